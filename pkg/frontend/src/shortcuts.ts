// Keyboard layer: K = keep, 1-5 = safety criteria (implies remove),
// Enter = submit. Pure mapping so it can be tested without a DOM.

export type ShortcutAction =
  | { kind: 'keep' }
  | { kind: 'criterion'; index: number }
  | { kind: 'submit' };

const IGNORED_TAGS = new Set(['INPUT', 'TEXTAREA', 'SELECT']);

export interface KeyInput {
  key: string;
  targetTag?: string;
  isContentEditable?: boolean;
}

export function actionForKey(input: KeyInput): ShortcutAction | null {
  if (input.targetTag && IGNORED_TAGS.has(input.targetTag)) return null;
  if (input.isContentEditable) return null;

  const key = input.key;
  if (key === 'k' || key === 'K') return { kind: 'keep' };
  if (key >= '1' && key <= '5') {
    return { kind: 'criterion', index: Number(key) - 1 };
  }
  if (key === 'Enter') return { kind: 'submit' };
  return null;
}

export function bindShortcuts(
  target: { addEventListener: Window['addEventListener'] },
  handle: (action: ShortcutAction) => void,
): void {
  target.addEventListener('keydown', (event: KeyboardEvent) => {
    const element = event.target as HTMLElement | null;
    const action = actionForKey({
      key: event.key,
      targetTag: element?.tagName,
      isContentEditable: element?.isContentEditable,
    });
    if (action) {
      event.preventDefault();
      handle(action);
    }
  });
}
