// Review-screen state machine. The one invariant that matters: submit is
// enabled only for a complete verdict (keep, or remove plus a criterion)
// from a named reviewer. Advancing to a fresh item resets everything
// except the reviewer name.

import type { QueueItem } from './api.js';

export interface ReviewScreenState {
  item: QueueItem | null;
  pending: number;
  reviewed: number;
  decision: 'keep' | 'remove' | null;
  criterion: string | null;
  reviewer: string;
  error: string | null;
}

export function initialState(reviewer = ''): ReviewScreenState {
  return {
    item: null,
    pending: 0,
    reviewed: 0,
    decision: null,
    criterion: null,
    reviewer,
    error: null,
  };
}

export function withItem(
  state: ReviewScreenState,
  item: QueueItem | null,
  pending: number,
  reviewed: number,
): ReviewScreenState {
  // Fresh item, fresh verdict controls; only the reviewer carries over.
  return { ...initialState(state.reviewer), item, pending, reviewed };
}

export function selectKeep(state: ReviewScreenState): ReviewScreenState {
  return { ...state, decision: 'keep', criterion: null, error: null };
}

export function selectCriterion(
  state: ReviewScreenState,
  criterion: string,
): ReviewScreenState {
  // Picking a criterion implies a remove verdict.
  return { ...state, decision: 'remove', criterion, error: null };
}

export function setReviewer(
  state: ReviewScreenState,
  reviewer: string,
): ReviewScreenState {
  return { ...state, reviewer };
}

export function canSubmit(state: ReviewScreenState): boolean {
  if (!state.item || state.reviewer.trim() === '') return false;
  if (state.decision === 'keep') return state.criterion === null;
  if (state.decision === 'remove') return state.criterion !== null;
  return false;
}
