/**
 * Client-side deterministic replay. Playback runs entirely in the browser
 * from the fetched bundle; the server's state endpoint computes the same
 * function and the integration tests hold the two to byte equality.
 *
 * Semantics: state at time t is the fold of every event with at <= t over
 * the initial state (events on the boundary included, so scrubbing onto an
 * event shows its effect). An edit to a pane clears that pane's highlights;
 * highlight offsets are validated against the pane text at apply time.
 */

import { ActionEvent, PaneSpec } from "./wire.js";

export interface PaneBuffer {
  text: string;
  cursor: [number, number];
}

export interface IoView {
  stdin: string;
  stdout: string;
  stderr: string;
}

export interface PlaybackState {
  buffers: Map<string, PaneBuffer>;
  highlights: Map<string, [number, number][]>;
  scrolls: Map<string, number>;
  layout: PaneSpec[];
  io: IoView | null;
  playhead: number;
}

export const DEFAULT_LAYOUT: PaneSpec[] = [
  { paneId: "notes", kind: "notes", x: 0.0, y: 0.0, width: 0.5, height: 1.0, visible: true, maximized: false },
  { paneId: "code", kind: "code", x: 0.5, y: 0.0, width: 0.5, height: 0.5, visible: true, maximized: false },
  { paneId: "input", kind: "input", x: 0.5, y: 0.5, width: 0.25, height: 0.5, visible: true, maximized: false },
  { paneId: "output", kind: "output", x: 0.75, y: 0.5, width: 0.25, height: 0.5, visible: true, maximized: false },
];

export function initialState(notesSource = ""): PlaybackState {
  const buffers = new Map<string, PaneBuffer>();
  if (notesSource) {
    buffers.set("notes", { text: notesSource, cursor: [0, 0] });
  }
  return {
    buffers,
    highlights: new Map(),
    scrolls: new Map(),
    layout: DEFAULT_LAYOUT,
    io: null,
    playhead: 0,
  };
}

export function paneText(state: PlaybackState, paneId: string): string {
  return state.buffers.get(paneId)?.text ?? "";
}

export function codeText(state: PlaybackState): string {
  return state.layout
    .filter((p) => p.kind === "code")
    .map((p) => paneText(state, p.paneId))
    .join("");
}

function offsetOf(text: string, line: number, column: number, seq: number): number {
  const lines = text.split("\n");
  if (line >= lines.length) {
    throw new Error(`event ${seq}: line ${line} beyond ${lines.length - 1}`);
  }
  if (column > lines[line].length) {
    throw new Error(`event ${seq}: column ${column} beyond line length ${lines[line].length}`);
  }
  let offset = column;
  for (let i = 0; i < line; i++) {
    offset += lines[i].length + 1;
  }
  return offset;
}

export function lineColAt(text: string, offset: number): [number, number] {
  let line = 0;
  let lineStart = 0;
  for (let i = 0; i < offset; i++) {
    if (text[i] === "\n") {
      line += 1;
      lineStart = i + 1;
    }
  }
  return [line, offset - lineStart];
}

function cloned(state: PlaybackState): PlaybackState {
  return {
    buffers: new Map(state.buffers),
    highlights: new Map(state.highlights),
    scrolls: new Map(state.scrolls),
    layout: state.layout,
    io: state.io,
    playhead: state.playhead,
  };
}

export function applyEvent(state: PlaybackState, event: ActionEvent): PlaybackState {
  const next = cloned(state);
  next.playhead = event.at;
  const p = event.payload;
  switch (p.kind) {
    case "edit": {
      const text = paneText(state, p.paneId);
      const offset = offsetOf(text, p.line, p.column, event.seq);
      if (p.op === "insert") {
        const newText = text.slice(0, offset) + p.text + text.slice(offset);
        next.buffers.set(p.paneId, { text: newText, cursor: lineColAt(newText, offset + p.text.length) });
      } else {
        const actual = text.slice(offset, offset + p.text.length);
        if (actual !== p.text) {
          throw new Error(`event ${event.seq}: delete mismatch (${JSON.stringify(actual)})`);
        }
        next.buffers.set(p.paneId, {
          text: text.slice(0, offset) + text.slice(offset + p.text.length),
          cursor: [p.line, p.column],
        });
      }
      next.highlights.delete(p.paneId);
      return next;
    }
    case "hl": {
      const text = paneText(state, p.paneId);
      if (!(0 <= p.start && p.start <= p.end && p.end <= text.length)) {
        throw new Error(`event ${event.seq}: highlight span out of bounds`);
      }
      const current = state.highlights.get(p.paneId) ?? [];
      let spans: [number, number][];
      if (p.active) {
        spans = current.some(([s, e]) => s === p.start && e === p.end)
          ? current
          : [...current, [p.start, p.end]];
      } else {
        spans = current.filter(([s, e]) => !(s === p.start && e === p.end));
      }
      if (spans.length > 0) {
        next.highlights.set(p.paneId, spans);
      } else {
        next.highlights.delete(p.paneId);
      }
      return next;
    }
    case "scroll":
      next.scrolls.set(p.paneId, p.fraction);
      return next;
    case "layout":
      next.layout = p.panes;
      return next;
    case "exec":
      next.io = { stdin: p.stdin, stdout: p.stdout, stderr: p.stderr };
      return next;
  }
}

export interface Snapshot {
  at: number;
  state: PlaybackState;
  nextEventIndex: number;
}

export const DEFAULT_SNAPSHOT_INTERVAL_MS = 5000;

export function buildSnapshotIndex(
  events: ActionEvent[],
  durationMs: number,
  notesSource = "",
  intervalMs = DEFAULT_SNAPSHOT_INTERVAL_MS,
): Snapshot[] {
  const snapshots: Snapshot[] = [];
  let state = initialState(notesSource);
  let i = 0;
  for (let boundary = 0; boundary <= durationMs; boundary += intervalMs) {
    while (i < events.length && events[i].at <= boundary) {
      state = applyEvent(state, events[i]);
      i += 1;
    }
    snapshots.push({ at: boundary, state: { ...state, playhead: boundary }, nextEventIndex: i });
  }
  return snapshots;
}

export function stateAt(
  events: ActionEvent[],
  t: number,
  notesSource = "",
  index?: Snapshot[],
): PlaybackState {
  let state = initialState(notesSource);
  let i = 0;
  if (index && index.length > 0) {
    let best = -1;
    for (let k = 0; k < index.length; k++) {
      if (index[k].at <= t) best = k;
    }
    if (best >= 0) {
      state = index[best].state;
      i = index[best].nextEventIndex;
    }
  }
  while (i < events.length && events[i].at <= t) {
    state = applyEvent(state, events[i]);
    i += 1;
  }
  return { ...state, playhead: t };
}

/** Wire shape shared with the server's state endpoint (parity-tested). */
export function stateToDocument(state: PlaybackState): Record<string, unknown> {
  const buffers: Record<string, { text: string; cursor: [number, number] }> = {};
  for (const [k, b] of state.buffers) {
    buffers[k] = { text: b.text, cursor: b.cursor };
  }
  const highlights: Record<string, [number, number][]> = {};
  for (const [k, spans] of state.highlights) {
    highlights[k] = spans;
  }
  const scrolls: Record<string, number> = {};
  for (const [k, v] of state.scrolls) {
    scrolls[k] = v;
  }
  return {
    playhead: state.playhead,
    buffers,
    highlights,
    scrolls,
    layout: {
      panes: state.layout.map((p) => [p.paneId, p.kind, p.x, p.y, p.width, p.height, p.visible, p.maximized]),
    },
    io: state.io === null ? null : { stdin: state.io.stdin, stdout: state.io.stdout, stderr: state.io.stderr },
    code: codeText(state),
  };
}
