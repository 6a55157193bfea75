// Headless review flow: owns the screen state and talks to the API.
// Rendering subscribes to state changes; nothing here touches the DOM.

import { ServiceUnavailableError, TriageApi } from './api.js';
import type { ShortcutAction } from './shortcuts.js';
import {
  ReviewScreenState,
  canSubmit,
  initialState,
  selectCriterion,
  selectKeep,
  setReviewer,
  withItem,
} from './state.js';

export type Screen =
  | { kind: 'review'; state: ReviewScreenState }
  | { kind: 'done'; reviewed: number }
  | { kind: 'unreachable'; detail: string };

export class ReviewController {
  private state = initialState();
  private criteriaList: string[] = [];
  private screen: Screen = { kind: 'unreachable', detail: 'not loaded' };

  constructor(
    private readonly api: TriageApi,
    private readonly onChange: (screen: Screen, criteria: string[]) => void = () => {},
  ) {}

  current(): Screen {
    return this.screen;
  }

  criteria(): string[] {
    return [...this.criteriaList];
  }

  canSubmit(): boolean {
    return this.screen.kind === 'review' && canSubmit(this.state);
  }

  private emit(): void {
    this.onChange(this.screen, this.criteriaList);
  }

  async start(): Promise<void> {
    try {
      this.criteriaList = await this.api.criteria();
    } catch (err) {
      this.screen = { kind: 'unreachable', detail: String(err) };
      this.emit();
      return;
    }
    await this.loadNext();
  }

  async loadNext(): Promise<void> {
    let view;
    try {
      view = await this.api.next();
    } catch (err) {
      if (err instanceof ServiceUnavailableError) {
        this.screen = { kind: 'unreachable', detail: err.message };
        this.emit();
        return;
      }
      throw err;
    }
    if (view.next === null) {
      this.screen = { kind: 'done', reviewed: view.reviewed };
    } else {
      this.state = withItem(this.state, view.next, view.pending, view.reviewed);
      this.screen = { kind: 'review', state: this.state };
    }
    this.emit();
  }

  setReviewer(name: string): void {
    this.state = setReviewer(this.state, name);
    this.refreshScreen();
  }

  handle(action: ShortcutAction): Promise<void> | void {
    if (this.screen.kind !== 'review') return;
    if (action.kind === 'keep') {
      this.state = selectKeep(this.state);
      this.refreshScreen();
    } else if (action.kind === 'criterion') {
      const criterion = this.criteriaList[action.index];
      if (criterion !== undefined) {
        this.state = selectCriterion(this.state, criterion);
        this.refreshScreen();
      }
    } else {
      return this.submit();
    }
  }

  async submit(): Promise<void> {
    if (!this.canSubmit() || !this.state.item) return;
    const outcome = await this.api.submitVerdict(this.state.item.video_id, {
      decision: this.state.decision as 'keep' | 'remove',
      criterion: this.state.criterion,
      reviewer: this.state.reviewer,
    });
    if (outcome.status === 'invalid') {
      this.state = { ...this.state, error: outcome.detail };
      this.refreshScreen();
      return;
    }
    // 'ok' advances; 'conflict' means someone else reviewed this item
    // first, so skip to the next one silently.
    await this.loadNext();
  }

  private refreshScreen(): void {
    if (this.screen.kind === 'review') {
      this.screen = { kind: 'review', state: this.state };
      this.emit();
    }
  }
}
