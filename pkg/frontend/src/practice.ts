/**
 * Practice flow: copy the code visible at the playhead into the practice
 * editor, let the student change it, run it server-side, and surface
 * contextual help when a run fails.
 */

import { ApiClient, ExecutionDoc, HelpDoc } from "./api.js";
import { codeText, PlaybackState } from "./replay.js";

export class PracticePanel {
  lastResult: ExecutionDoc | null = null;

  constructor(
    private readonly api: ApiClient,
    readonly editor: { setText(text: string): void; text: string },
    private readonly language: string,
  ) {}

  copyFrom(state: PlaybackState): string {
    const code = codeText(state);
    this.editor.setText(code);
    return code;
  }

  async run(stdin = ""): Promise<ExecutionDoc> {
    this.lastResult = await this.api.execute(this.language, this.editor.text, stdin);
    return this.lastResult;
  }

  /** Context help for the most recent failing run, if any. */
  async helpForLastError(): Promise<HelpDoc | null> {
    const result = this.lastResult;
    if (!result) return null;
    const errorText = result.compile_errors ?? (result.exit_status !== 0 ? result.stderr : "");
    if (!errorText.trim()) return null;
    return this.api.help(errorText, this.language);
  }
}

export function renderExecution(result: ExecutionDoc): string {
  if (result.compile_errors) {
    return `compile error:\n${result.compile_errors}`;
  }
  const parts = [result.stdout];
  if (result.stderr) parts.push(`stderr:\n${result.stderr}`);
  if (result.timed_out) parts.push(`(stopped: time limit ${result.wall_time_ms} ms reached)`);
  if (result.stdout_truncated) parts.push("(output truncated)");
  return parts.filter(Boolean).join("\n");
}
