/**
 * Recording wire format: compact positional event arrays inside canonical
 * JSON documents. Sequence numbers are dense from 0 and equal the array
 * index, so they are never stored.
 *
 *   ["edit", at, paneId, "ins"|"del", line, column, text]
 *   ["hl", at, paneId, start, end, active]
 *   ["scroll", at, paneId, fraction]
 *   ["layout", at, [[paneId, kind, x, y, w, h, visible, maximized], ...]]
 *   ["exec", at, codeSnapshotSeq|null, stdin, stdout, stderr]
 */

export type PaneKind = "notes" | "code" | "input" | "output" | "practice";

export interface PaneSpec {
  paneId: string;
  kind: PaneKind;
  x: number;
  y: number;
  width: number;
  height: number;
  visible: boolean;
  maximized: boolean;
}

export interface CodeEdit {
  kind: "edit";
  paneId: string;
  op: "insert" | "delete";
  line: number;
  column: number;
  text: string;
}

export interface HighlightToggle {
  kind: "hl";
  paneId: string;
  start: number;
  end: number;
  active: boolean;
}

export interface ScrollMove {
  kind: "scroll";
  paneId: string;
  fraction: number;
}

export interface LayoutChange {
  kind: "layout";
  panes: PaneSpec[];
}

export interface ExecutionMark {
  kind: "exec";
  codeSnapshotSeq: number | null;
  stdin: string;
  stdout: string;
  stderr: string;
}

export type EventPayload = CodeEdit | HighlightToggle | ScrollMove | LayoutChange | ExecutionMark;

export interface ActionEvent {
  seq: number;
  at: number; // ms from recording start (audio capture anchors t=0)
  payload: EventPayload;
}

export type WireEvent = unknown[];

export function eventToWire(event: ActionEvent): WireEvent {
  const p = event.payload;
  switch (p.kind) {
    case "edit":
      return ["edit", event.at, p.paneId, p.op === "insert" ? "ins" : "del", p.line, p.column, p.text];
    case "hl":
      return ["hl", event.at, p.paneId, p.start, p.end, p.active];
    case "scroll":
      return ["scroll", event.at, p.paneId, p.fraction];
    case "layout":
      return [
        "layout",
        event.at,
        p.panes.map((s) => [s.paneId, s.kind, s.x, s.y, s.width, s.height, s.visible, s.maximized]),
      ];
    case "exec":
      return ["exec", event.at, p.codeSnapshotSeq, p.stdin, p.stdout, p.stderr];
  }
}

export function eventFromWire(seq: number, wire: WireEvent): ActionEvent {
  const kind = wire[0] as string;
  const at = wire[1] as number;
  switch (kind) {
    case "edit":
      return {
        seq,
        at,
        payload: {
          kind: "edit",
          paneId: wire[2] as string,
          op: wire[3] === "ins" ? "insert" : "delete",
          line: wire[4] as number,
          column: wire[5] as number,
          text: wire[6] as string,
        },
      };
    case "hl":
      return {
        seq,
        at,
        payload: {
          kind: "hl",
          paneId: wire[2] as string,
          start: wire[3] as number,
          end: wire[4] as number,
          active: Boolean(wire[5]),
        },
      };
    case "scroll":
      return { seq, at, payload: { kind: "scroll", paneId: wire[2] as string, fraction: wire[3] as number } };
    case "layout": {
      const panes = (wire[2] as unknown[][]).map(
        (p): PaneSpec => ({
          paneId: p[0] as string,
          kind: p[1] as PaneKind,
          x: p[2] as number,
          y: p[3] as number,
          width: p[4] as number,
          height: p[5] as number,
          visible: Boolean(p[6]),
          maximized: Boolean(p[7]),
        }),
      );
      return { seq, at, payload: { kind: "layout", panes } };
    }
    case "exec":
      return {
        seq,
        at,
        payload: {
          kind: "exec",
          codeSnapshotSeq: wire[2] as number | null,
          stdin: wire[3] as string,
          stdout: wire[4] as string,
          stderr: wire[5] as string,
        },
      };
    default:
      throw new Error(`unknown event kind ${kind}`);
  }
}

/** The canonical section document served inside a playback bundle. */
export interface SectionDocument {
  schema_version: number;
  section_id: string;
  language: string;
  duration_ms: number;
  events: WireEvent[];
  notes: string;
  final_code: string;
  audio: { filename: string; byte_size: number; sha256: string } | null;
  transcript: [number, number, string][];
}

export interface BundleResponse {
  kind: "recording" | "quiz";
  section?: SectionDocument;
  quiz?: QuizDocument;
  audio_url?: string;
  manifest_sha256: string;
}

export interface QuizDocument {
  schema_version: number;
  section_id: string;
  questions: {
    prompt: string;
    choices: string[];
    correct_index: number;
    explanation: string;
    points: number;
  }[];
}

export function decodeEvents(doc: SectionDocument): ActionEvent[] {
  return doc.events.map((w, i) => eventFromWire(i, w));
}
