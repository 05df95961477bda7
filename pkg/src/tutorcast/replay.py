"""Deterministic reconstruction of playback state at any timeline instant.

The recording replaces video frames: scrubbing to time ``t`` means
folding every event with ``at <= t`` (boundary events included, so
seeking onto an event's timestamp shows its effect) over the initial
state. A snapshot index makes backward/random seeks cheap without
changing the result: seeking with and without an index is equivalent
by construction and checked by tests.

All operations are pure: states are values, inputs are never mutated,
and repeated calls agree byte-for-byte.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, replace
from typing import Optional

from .errors import InputError, ReplayError, SectionValidationError
from .events import (
    ActionEvent,
    CodeEdit,
    DELETE,
    ExecutionMarker,
    Highlight,
    INSERT,
    PaneSpec,
    PanelLayout,
    Scroll,
    SectionRecording,
    Timestamp,
    validate_section,
)

#: layout used when the recording has no panel-layout event at t=0:
#: notes on the left half, code upper right, input/output lower right.
DEFAULT_LAYOUT = PanelLayout(
    panes=(
        PaneSpec("notes", "notes", 0.0, 0.0, 0.5, 1.0),
        PaneSpec("code", "code", 0.5, 0.0, 0.5, 0.5),
        PaneSpec("input", "input", 0.5, 0.5, 0.25, 0.5),
        PaneSpec("output", "output", 0.75, 0.5, 0.25, 0.5),
    )
)

NOTES_PANE_ID = "notes"


@dataclass(frozen=True)
class PaneBuffer:
    text: str
    cursor: tuple[int, int] = (0, 0)  # (line, column) after the last edit


@dataclass(frozen=True)
class IoView:
    stdin_text: str
    stdout_text: str
    stderr_text: str


@dataclass(frozen=True)
class PlaybackState:
    """Everything the screen shows at one instant, as a plain value.

    Mappings never hold empty entries (a pane with no highlights is
    absent from ``highlights``), so two states reached along different
    seek paths compare equal field by field.
    """

    buffers: dict[str, PaneBuffer]
    highlights: dict[str, tuple[tuple[int, int], ...]]
    scrolls: dict[str, float]
    layout: PanelLayout
    io: Optional[IoView]
    playhead: Timestamp


def initial_state(notes_source: str = "") -> PlaybackState:
    """State before any event: default layout; notes pane pre-seeded.

    The notes pane carries the section's notes markup so highlight
    offsets against it can be bounds-checked; code panes start empty.
    """
    buffers = {NOTES_PANE_ID: PaneBuffer(notes_source)} if notes_source else {}
    return PlaybackState(
        buffers=buffers,
        highlights={},
        scrolls={},
        layout=DEFAULT_LAYOUT,
        io=None,
        playhead=0,
    )


def pane_text(state: PlaybackState, pane_id: str) -> str:
    buf = state.buffers.get(pane_id)
    return buf.text if buf is not None else ""


def code_text(state: PlaybackState) -> str:
    """Concatenated content of the layout's code panes, in layout order."""
    return "".join(pane_text(state, p.pane_id) for p in state.layout.panes if p.kind == "code")


def _offset_of(text: str, line: int, column: int, seq: int) -> int:
    lines = text.split("\n")
    if line >= len(lines):
        raise ReplayError(seq, "position_bounds", f"line {line} beyond {len(lines) - 1}")
    if column > len(lines[line]):
        raise ReplayError(seq, "position_bounds", f"column {column} beyond line length {len(lines[line])}")
    return sum(len(l) + 1 for l in lines[:line]) + column


def _line_col_at(text: str, offset: int) -> tuple[int, int]:
    line = text.count("\n", 0, offset)
    col = offset - (text.rfind("\n", 0, offset) + 1)
    return (line, col)


def _without_key(mapping: dict, key):
    if key not in mapping:
        return mapping
    return {k: v for k, v in mapping.items() if k != key}


def apply_event(state: PlaybackState, event: ActionEvent) -> PlaybackState:
    """Return the successor state; the input state is untouched.

    Raises :class:`ReplayError` naming the event and the violated rule
    when the event's preconditions do not hold against this state;
    invalid recordings fail loudly rather than drifting silently.
    """
    p = event.payload
    if isinstance(p, CodeEdit):
        text = pane_text(state, p.pane_id)
        offset = _offset_of(text, p.line, p.column, event.seq)
        if p.op_kind == INSERT:
            new_text = text[:offset] + p.text + text[offset:]
            cursor = _line_col_at(new_text, offset + len(p.text))
        elif p.op_kind == DELETE:
            actual = text[offset : offset + len(p.text)]
            if actual != p.text:
                raise ReplayError(event.seq, "delete_mismatch", f"expected {p.text!r} at ({p.line},{p.column}), buffer has {actual!r}")
            new_text = text[:offset] + text[offset + len(p.text) :]
            cursor = (p.line, p.column)
        else:
            raise ReplayError(event.seq, "edit_op", f"unknown op_kind {p.op_kind!r}")
        buffers = {**state.buffers, p.pane_id: PaneBuffer(new_text, cursor)}
        # an edit invalidates highlight anchors on this pane
        highlights = _without_key(state.highlights, p.pane_id)
        return replace(state, buffers=buffers, highlights=highlights, playhead=event.at)

    if isinstance(p, Highlight):
        text = pane_text(state, p.pane_id)
        if not (0 <= p.start_offset <= p.end_offset <= len(text)):
            raise ReplayError(event.seq, "highlight_bounds", f"span ({p.start_offset},{p.end_offset}) outside text of length {len(text)}")
        span = (p.start_offset, p.end_offset)
        current = state.highlights.get(p.pane_id, ())
        if p.active:
            spans = current if span in current else current + (span,)
        else:
            spans = tuple(s for s in current if s != span)
        if spans:
            highlights = {**state.highlights, p.pane_id: spans}
        else:
            highlights = _without_key(state.highlights, p.pane_id)
        return replace(state, highlights=highlights, playhead=event.at)

    if isinstance(p, Scroll):
        if not (0.0 <= p.fraction <= 1.0):
            raise ReplayError(event.seq, "scroll_range", f"fraction {p.fraction} outside [0, 1]")
        return replace(state, scrolls={**state.scrolls, p.pane_id: p.fraction}, playhead=event.at)

    if isinstance(p, PanelLayout):
        ids = [s.pane_id for s in p.panes]
        if len(set(ids)) != len(ids):
            raise ReplayError(event.seq, "layout_panes", "pane ids must be unique")
        if sum(1 for s in p.panes if s.maximized) > 1:
            raise ReplayError(event.seq, "layout_maximized", "at most one maximized pane")
        for s in p.panes:
            if not all(0.0 <= v <= 1.0 for v in (s.x, s.y, s.width, s.height)):
                raise ReplayError(event.seq, "layout_geometry", f"pane {s.pane_id!r} geometry outside [0, 1]")
        return replace(state, layout=p, playhead=event.at)

    if isinstance(p, ExecutionMarker):
        return replace(state, io=IoView(p.stdin_text, p.recorded_stdout, p.recorded_stderr), playhead=event.at)

    raise ReplayError(event.seq, "unknown_payload", type(p).__name__)


def replay_events(events: tuple[ActionEvent, ...], notes_source: str = "") -> PlaybackState:
    """Fold every event over the initial state (used by validation)."""
    state = initial_state(notes_source)
    for event in events:
        state = apply_event(state, event)
    return state


@dataclass(frozen=True)
class Snapshot:
    at: Timestamp
    state: PlaybackState
    next_event_seq: int


@dataclass(frozen=True)
class SnapshotIndex:
    """Precomputed states at fixed boundaries for cheap random seeks."""

    interval: int
    snapshots: tuple[Snapshot, ...]


DEFAULT_SNAPSHOT_INTERVAL_MS = 5_000


def build_snapshot_index(section: SectionRecording, interval: int = DEFAULT_SNAPSHOT_INTERVAL_MS) -> SnapshotIndex:
    """One snapshot at t=0 and at every interval boundary up to duration."""
    if interval < 1000:
        raise InputError(f"snapshot interval must be >= 1000 ms, got {interval}")
    report = validate_section(section)
    if report:
        raise SectionValidationError(report)
    snapshots = []
    state = initial_state(section.notes_source)
    i = 0
    events = section.events
    for boundary in range(0, section.duration + 1, interval):
        while i < len(events) and events[i].at <= boundary:
            state = apply_event(state, events[i])
            i += 1
        snapshots.append(Snapshot(at=boundary, state=replace(state, playhead=boundary), next_event_seq=i))
    return SnapshotIndex(interval=interval, snapshots=tuple(snapshots))


def state_at(section: SectionRecording, t: Timestamp, index: Optional[SnapshotIndex] = None) -> PlaybackState:
    """State after all events with ``at <= t``, from scratch or a snapshot."""
    if not (0 <= t <= section.duration):
        raise InputError(f"t={t} outside section timeline [0, {section.duration}]")
    if index is not None and index.snapshots:
        ats = [s.at for s in index.snapshots]
        pos = bisect.bisect_right(ats, t) - 1
        if pos >= 0:
            snap = index.snapshots[pos]
            state, i = snap.state, snap.next_event_seq
        else:
            state, i = initial_state(section.notes_source), 0
    else:
        state, i = initial_state(section.notes_source), 0
    events = section.events
    while i < len(events) and events[i].at <= t:
        state = apply_event(state, events[i])
        i += 1
    return replace(state, playhead=t)


def state_to_document(state: PlaybackState) -> dict:
    """Wire shape of a playback state, mirroring the event encoding style."""
    return {
        "playhead": state.playhead,
        "buffers": {k: {"text": b.text, "cursor": [b.cursor[0], b.cursor[1]]} for k, b in state.buffers.items()},
        "highlights": {k: [[s, e] for s, e in spans] for k, spans in state.highlights.items()},
        "scrolls": dict(state.scrolls),
        "layout": {
            "panes": [
                [p.pane_id, p.kind, p.x, p.y, p.width, p.height, p.visible, p.maximized]
                for p in state.layout.panes
            ]
        },
        "io": None
        if state.io is None
        else {"stdin": state.io.stdin_text, "stdout": state.io.stdout_text, "stderr": state.io.stderr_text},
        "code": code_text(state),
    }


@dataclass(frozen=True)
class CodeCopy:
    language: str
    text: str


def copy_code_at(section: SectionRecording, t: Timestamp, index: Optional[SnapshotIndex] = None) -> CodeCopy:
    """Code pane content at ``t``, ready to paste into the practice panel."""
    return CodeCopy(language=section.language, text=code_text(state_at(section, t, index)))
