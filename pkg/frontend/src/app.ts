// DOM wiring: renders the controller's screen into #app and forwards
// user input back to it. Served statically by the triage service.

import { TriageApi } from './api.js';
import { ReviewController, Screen } from './controller.js';
import { bindShortcuts } from './shortcuts.js';

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function mount(root: HTMLElement, baseUrl = ''): ReviewController {
  let reviewerName = '';
  const controller = new ReviewController(
    new TriageApi(baseUrl),
    (screen, criteria) => render(screen, criteria),
  );

  function render(screen: Screen, criteria: string[]): void {
    root.replaceChildren();
    if (screen.kind === 'unreachable') {
      const banner = el('div', 'banner', 'Service unreachable.');
      const retry = el('button', 'retry', 'Retry');
      retry.onclick = () => void controller.start();
      banner.append(retry);
      root.append(banner);
      return;
    }
    if (screen.kind === 'done') {
      root.append(
        el('h2', undefined, 'All reviewed'),
        el('p', 'stats', `${screen.reviewed} videos reviewed.`),
      );
      return;
    }

    const { state } = screen;
    const item = state.item;
    if (!item) return;
    reviewerName = state.reviewer;

    const counters = el(
      'p',
      'counters',
      `pending ${state.pending} / reviewed ${state.reviewed}`,
    );

    const video = el('video', 'player');
    video.src = item.media.url;
    video.controls = true;

    const transcript = el('div', 'transcript');
    for (const u of item.transcript_preview ?? []) {
      transcript.append(
        el('p', undefined, `${u.speaker ?? ''} ${u.text}`.trim()),
      );
    }
    if (item.filter_detail) {
      transcript.append(el('p', 'filter-detail', item.filter_detail));
    }

    const reviewer = el('input', 'reviewer') as HTMLInputElement;
    reviewer.placeholder = 'reviewer name';
    reviewer.value = state.reviewer;
    reviewer.oninput = () => controller.setReviewer(reviewer.value);

    const controls = el('div', 'controls');
    const keep = el('button', 'keep', 'Keep (K)');
    keep.onclick = () => controller.handle({ kind: 'keep' });
    if (state.decision === 'keep') keep.classList.add('selected');
    controls.append(keep);

    criteria.forEach((name, i) => {
      const button = el('button', 'criterion', `${name} (${i + 1})`);
      button.onclick = () => controller.handle({ kind: 'criterion', index: i });
      if (state.criterion === name) button.classList.add('selected');
      controls.append(button);
    });

    const submit = el('button', 'submit', 'Submit (Enter)');
    submit.disabled = !controller.canSubmit();
    submit.onclick = () => void controller.submit();

    root.append(counters, video, transcript, reviewer, controls, submit);
    if (state.error) root.append(el('p', 'error', state.error));
  }

  bindShortcuts(window, (action) => void controller.handle(action));
  void controller.start().then(() => {
    if (reviewerName) controller.setReviewer(reviewerName);
  });
  return controller;
}
