/**
 * Textarea-backed code editor that turns DOM input into positional
 * insert/delete deltas. Keeping a shadow copy of the previous value lets
 * one input gesture (keystroke, paste, cut) map to at most one delete and
 * one insert delta, which is exactly what the recording format stores.
 */

import { lineColAt } from "./replay.js";
import { CodeEdit, HighlightToggle } from "./wire.js";

export interface EditorDelta {
  kind: "insert" | "delete";
  line: number;
  column: number;
  text: string;
}

/** Single-gesture diff between two buffer versions (common affix trim). */
export function diffOnce(before: string, after: string): EditorDelta[] {
  if (before === after) return [];
  let prefix = 0;
  const max = Math.min(before.length, after.length);
  while (prefix < max && before[prefix] === after[prefix]) prefix += 1;
  let suffix = 0;
  while (
    suffix < max - prefix &&
    before[before.length - 1 - suffix] === after[after.length - 1 - suffix]
  ) {
    suffix += 1;
  }
  const removed = before.slice(prefix, before.length - suffix);
  const added = after.slice(prefix, after.length - suffix);
  const deltas: EditorDelta[] = [];
  const [line, column] = lineColAt(before, prefix);
  if (removed) deltas.push({ kind: "delete", line, column, text: removed });
  if (added) deltas.push({ kind: "insert", line, column, text: added });
  return deltas;
}

export class CodeEditor {
  private shadow: string;

  constructor(
    readonly paneId: string,
    readonly textarea: HTMLTextAreaElement,
    private readonly onEdit: (edit: CodeEdit) => void,
    private readonly onHighlight?: (hl: HighlightToggle) => void,
  ) {
    this.shadow = textarea.value;
    textarea.addEventListener("input", () => this.handleInput());
  }

  get text(): string {
    return this.shadow;
  }

  private handleInput(): void {
    const current = this.textarea.value;
    for (const delta of diffOnce(this.shadow, current)) {
      this.onEdit({
        kind: "edit",
        paneId: this.paneId,
        op: delta.kind,
        line: delta.line,
        column: delta.column,
        text: delta.text,
      });
    }
    this.shadow = current;
  }

  /** Record the current selection as a highlight-on gesture. */
  highlightSelection(): void {
    const start = this.textarea.selectionStart ?? 0;
    const end = this.textarea.selectionEnd ?? 0;
    if (start === end || !this.onHighlight) return;
    this.onHighlight({ kind: "hl", paneId: this.paneId, start, end, active: true });
  }

  /** Replace content programmatically (playback and copy-to-practice). */
  setText(text: string): void {
    this.textarea.value = text;
    this.shadow = text;
  }
}
