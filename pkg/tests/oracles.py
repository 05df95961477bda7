"""Independent brute-force models used to check the engine.

Everything here deliberately avoids the production code paths: buffers
are character lists spliced by hand, offsets are found by scanning, and
replay is a straight loop. Slow and obvious on purpose.
"""

from __future__ import annotations

from tutorcast.events import (
    ActionEvent,
    CodeEdit,
    ExecutionMarker,
    Highlight,
    PanelLayout,
    Scroll,
    SectionRecording,
)
from tutorcast.replay import DEFAULT_LAYOUT


class SpliceBuffer:
    """Character-array text buffer with scan-based position lookup."""

    def __init__(self, text: str = ""):
        self.chars = list(text)

    def offset(self, line: int, column: int) -> int:
        cur_line = 0
        i = 0
        while cur_line < line:
            if i >= len(self.chars):
                raise IndexError(f"line {line} out of range")
            if self.chars[i] == "\n":
                cur_line += 1
            i += 1
        # i is at start of target line; walk columns without crossing newline
        for _ in range(column):
            if i >= len(self.chars) or self.chars[i] == "\n":
                raise IndexError(f"column {column} out of range")
            i += 1
        return i

    def insert(self, line: int, column: int, text: str) -> None:
        at = self.offset(line, column)
        self.chars[at:at] = list(text)

    def delete(self, line: int, column: int, text: str) -> None:
        at = self.offset(line, column)
        if "".join(self.chars[at : at + len(text)]) != text:
            raise ValueError("delete text does not match buffer")
        del self.chars[at : at + len(text)]

    @property
    def text(self) -> str:
        return "".join(self.chars)

    @property
    def line_count(self) -> int:
        return self.text.count("\n") + 1

    def line_length(self, line: int) -> int:
        return len(self.text.split("\n")[line])


class NaiveReplayer:
    """Step-by-step replay holding plain mutable structures."""

    def __init__(self, notes_source: str = ""):
        self.buffers: dict[str, SpliceBuffer] = {}
        if notes_source:
            self.buffers["notes"] = SpliceBuffer(notes_source)
        self.highlights: dict[str, list[tuple[int, int]]] = {}
        self.scrolls: dict[str, float] = {}
        self.layout: PanelLayout = DEFAULT_LAYOUT
        self.io: tuple[str, str, str] | None = None

    def buffer_text(self, pane_id: str) -> str:
        buf = self.buffers.get(pane_id)
        return buf.text if buf else ""

    def apply(self, event: ActionEvent) -> None:
        p = event.payload
        if isinstance(p, CodeEdit):
            buf = self.buffers.setdefault(p.pane_id, SpliceBuffer())
            if p.op_kind == "insert":
                buf.insert(p.line, p.column, p.text)
            else:
                buf.delete(p.line, p.column, p.text)
            self.highlights.pop(p.pane_id, None)
        elif isinstance(p, Highlight):
            text = self.buffer_text(p.pane_id)
            assert 0 <= p.start_offset <= p.end_offset <= len(text)
            spans = self.highlights.setdefault(p.pane_id, [])
            span = (p.start_offset, p.end_offset)
            if p.active:
                if span not in spans:
                    spans.append(span)
            else:
                if span in spans:
                    spans.remove(span)
            if not spans:
                self.highlights.pop(p.pane_id, None)
        elif isinstance(p, Scroll):
            self.scrolls[p.pane_id] = p.fraction
        elif isinstance(p, PanelLayout):
            self.layout = p
        elif isinstance(p, ExecutionMarker):
            self.io = (p.stdin_text, p.recorded_stdout, p.recorded_stderr)
        else:
            raise AssertionError(f"unknown payload {p}")

    def code_text(self) -> str:
        return "".join(self.buffer_text(s.pane_id) for s in self.layout.panes if s.kind == "code")

    def as_comparable(self) -> dict:
        """Shape shared with engine states for equality checks."""
        return {
            "buffers": {k: b.text for k, b in self.buffers.items()},
            "highlights": {k: tuple(v) for k, v in self.highlights.items()},
            "scrolls": dict(self.scrolls),
            "layout": self.layout,
            "io": self.io,
        }


def naive_replay(events, notes_source: str = "") -> NaiveReplayer:
    r = NaiveReplayer(notes_source)
    for e in events:
        r.apply(e)
    return r


def naive_state_at(section: SectionRecording, t: int) -> NaiveReplayer:
    r = NaiveReplayer(section.notes_source)
    for e in section.events:
        if e.at <= t:
            r.apply(e)
    return r


def comparable(state) -> dict:
    """Project an engine PlaybackState onto the oracle's comparison shape."""
    return {
        "buffers": {k: b.text for k, b in state.buffers.items()},
        "highlights": {k: tuple(v) for k, v in state.highlights.items()},
        "scrolls": dict(state.scrolls),
        "layout": state.layout,
        "io": None if state.io is None else (state.io.stdin_text, state.io.stdout_text, state.io.stderr_text),
    }
