"""Recording artifact model: typed author actions, sections, tutorials.

A coding section is recorded as an ordered log of timestamped action
events plus static artifacts (notes, final code, audio reference,
transcript cues). Everything here is immutable value data; producing
and replaying the log live in :mod:`tutorcast.recording` and
:mod:`tutorcast.replay`.

Wire format
-----------
Sections serialize to a single canonical JSON document: UTF-8, sorted
object keys, no insignificant whitespace. Canonical means the same
section always yields byte-identical output, so documents can be
content-hashed and diffed.

Events are encoded as compact positional arrays. The ``seq`` number is
not stored: the sequence is dense from 0, so it equals the array index.

================  ==================================================
kind              encoding
================  ==================================================
code edit         ``["edit", at, pane_id, "ins"|"del", line, column, text]``
highlight         ``["hl", at, pane_id, start, end, active]``
scroll            ``["scroll", at, pane_id, fraction]``
panel layout      ``["layout", at, [[pane_id, kind, x, y, w, h, visible, maximized], ...]]``
execution         ``["exec", at, code_snapshot_seq|null, stdin, stdout, stderr]``
================  ==================================================

Transcript cues encode as ``[start_ms, end_ms, text]`` triples and are
additionally exported as a WebVTT file in the on-disk bundle.

Documents carry ``schema_version``; unknown versions are rejected on
load so stored recordings stay editable across format revisions.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from typing import Optional, Union

from .errors import InputError, SectionValidationError

SCHEMA_VERSION = 1

#: milliseconds from section start (audio capture start is t=0)
Timestamp = int

PANE_KINDS = ("notes", "code", "input", "output", "practice")

INSERT = "insert"
DELETE = "delete"

_OP_WIRE = {INSERT: "ins", DELETE: "del"}
_OP_FROM_WIRE = {v: k for k, v in _OP_WIRE.items()}


# ---------------------------------------------------------------------------
# Event payloads


@dataclass(frozen=True)
class CodeEdit:
    """Positional text delta. One physical keystroke maps to one delta."""

    pane_id: str
    op_kind: str  # INSERT or DELETE
    line: int
    column: int
    text: str


@dataclass(frozen=True)
class Highlight:
    """Toggle a highlight span, offsets into the pane's current text.

    Spans are not rebased across later edits: an edit to the pane
    implicitly clears its highlights.
    """

    pane_id: str
    start_offset: int
    end_offset: int
    active: bool


@dataclass(frozen=True)
class Scroll:
    pane_id: str
    fraction: float  # proportional position in [0, 1]


@dataclass(frozen=True)
class PaneSpec:
    pane_id: str
    kind: str  # one of PANE_KINDS
    x: float
    y: float
    width: float
    height: float
    visible: bool = True
    maximized: bool = False


@dataclass(frozen=True)
class PanelLayout:
    panes: tuple[PaneSpec, ...]


@dataclass(frozen=True)
class ExecutionMarker:
    """A recorded run. Output is stored so playback never re-executes.

    ``code_snapshot_seq`` is the seq of the last applied code edit, or
    None when the author ran before typing anything.
    """

    code_snapshot_seq: Optional[int]
    stdin_text: str
    recorded_stdout: str
    recorded_stderr: str


EventPayload = Union[CodeEdit, Highlight, Scroll, PanelLayout, ExecutionMarker]


@dataclass(frozen=True)
class ActionEvent:
    """One timestamped author action; the atom of a recording."""

    seq: int
    at: Timestamp
    payload: EventPayload


# ---------------------------------------------------------------------------
# Section-level artifacts


@dataclass(frozen=True)
class TranscriptCue:
    start: Timestamp
    end: Timestamp
    text: str  # single line; blank-line-free so WebVTT round-trips


@dataclass(frozen=True)
class AudioRef:
    """Content address of the section's audio track."""

    filename: str
    byte_size: int
    sha256: str

    @classmethod
    def from_blob(cls, blob: bytes, filename: str = "audio.mp3") -> "AudioRef":
        return cls(filename=filename, byte_size=len(blob), sha256=hashlib.sha256(blob).hexdigest())


@dataclass(frozen=True)
class SectionRecording:
    """A complete coding section: event log plus static artifacts."""

    section_id: str
    language: str
    duration: Timestamp
    events: tuple[ActionEvent, ...]
    notes_source: str
    final_code: str
    audio_ref: Optional[AudioRef]
    transcript: tuple[TranscriptCue, ...] = ()
    schema_version: int = SCHEMA_VERSION


@dataclass(frozen=True)
class QuizQuestion:
    prompt: str
    choices: tuple[str, ...]
    correct_index: int
    explanation: str
    points: int


@dataclass(frozen=True)
class QuizSection:
    section_id: str
    questions: tuple[QuizQuestion, ...]
    schema_version: int = SCHEMA_VERSION


DRAFT = "draft"
RELEASED = "released"


@dataclass(frozen=True)
class Tutorial:
    tutorial_id: str
    title: str
    language: str
    owner_id: str
    section_ids: tuple[str, ...]
    status: str = DRAFT
    version: int = 0
    released_at: Optional[float] = None


# ---------------------------------------------------------------------------
# Canonical JSON


def canonical_json_bytes(doc) -> bytes:
    """Stable byte encoding: sorted keys, compact separators, UTF-8."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def event_to_wire(event: ActionEvent) -> list:
    p = event.payload
    if isinstance(p, CodeEdit):
        return ["edit", event.at, p.pane_id, _OP_WIRE[p.op_kind], p.line, p.column, p.text]
    if isinstance(p, Highlight):
        return ["hl", event.at, p.pane_id, p.start_offset, p.end_offset, p.active]
    if isinstance(p, Scroll):
        return ["scroll", event.at, p.pane_id, p.fraction]
    if isinstance(p, PanelLayout):
        panes = [
            [s.pane_id, s.kind, s.x, s.y, s.width, s.height, s.visible, s.maximized]
            for s in p.panes
        ]
        return ["layout", event.at, panes]
    if isinstance(p, ExecutionMarker):
        return ["exec", event.at, p.code_snapshot_seq, p.stdin_text, p.recorded_stdout, p.recorded_stderr]
    raise InputError(f"unknown payload type {type(p).__name__}")


def event_from_wire(seq: int, wire) -> ActionEvent:
    try:
        kind = wire[0]
        at = wire[1]
        if not isinstance(at, int) or isinstance(at, bool):
            raise InputError(f"event {seq}: timestamp must be an integer")
        if kind == "edit":
            _, _, pane_id, op, line, column, text = wire
            payload: EventPayload = CodeEdit(pane_id, _OP_FROM_WIRE[op], line, column, text)
        elif kind == "hl":
            _, _, pane_id, start, end, active = wire
            payload = Highlight(pane_id, start, end, bool(active))
        elif kind == "scroll":
            _, _, pane_id, fraction = wire
            payload = Scroll(pane_id, float(fraction))
        elif kind == "layout":
            _, _, panes = wire
            payload = PanelLayout(
                tuple(
                    PaneSpec(p[0], p[1], float(p[2]), float(p[3]), float(p[4]), float(p[5]), bool(p[6]), bool(p[7]))
                    for p in panes
                )
            )
        elif kind == "exec":
            _, _, snap, stdin_text, out, err = wire
            payload = ExecutionMarker(snap, stdin_text, out, err)
        else:
            raise InputError(f"event {seq}: unknown kind {kind!r}")
    except (IndexError, ValueError, TypeError, KeyError) as exc:
        raise InputError(f"event {seq}: malformed wire encoding: {exc}") from exc
    return ActionEvent(seq=seq, at=at, payload=payload)


def section_to_document(section: SectionRecording) -> dict:
    audio = None
    if section.audio_ref is not None:
        a = section.audio_ref
        audio = {"filename": a.filename, "byte_size": a.byte_size, "sha256": a.sha256}
    return {
        "schema_version": section.schema_version,
        "section_id": section.section_id,
        "language": section.language,
        "duration_ms": section.duration,
        "events": [event_to_wire(e) for e in section.events],
        "notes": section.notes_source,
        "final_code": section.final_code,
        "audio": audio,
        "transcript": [[c.start, c.end, c.text] for c in section.transcript],
    }


def section_from_document(doc: dict) -> SectionRecording:
    if not isinstance(doc, dict):
        raise InputError("section document must be a JSON object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise InputError(f"unsupported schema_version {version!r} (supported: {SCHEMA_VERSION})")
    try:
        audio = doc["audio"]
        audio_ref = None
        if audio is not None:
            audio_ref = AudioRef(audio["filename"], audio["byte_size"], audio["sha256"])
        return SectionRecording(
            section_id=doc["section_id"],
            language=doc["language"],
            duration=doc["duration_ms"],
            events=tuple(event_from_wire(i, w) for i, w in enumerate(doc["events"])),
            notes_source=doc["notes"],
            final_code=doc["final_code"],
            audio_ref=audio_ref,
            transcript=tuple(TranscriptCue(c[0], c[1], c[2]) for c in doc["transcript"]),
            schema_version=version,
        )
    except (KeyError, IndexError, TypeError) as exc:
        raise InputError(f"malformed section document: {exc}") from exc


def serialize_section(section: SectionRecording) -> bytes:
    """Canonical bytes of a valid section; rejects invalid input loudly."""
    report = validate_section(section)
    if report:
        raise SectionValidationError(report)
    return canonical_json_bytes(section_to_document(section))


def deserialize_section(data: bytes) -> SectionRecording:
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InputError(f"section document is not valid JSON: {exc}") from exc
    return section_from_document(doc)


def quiz_to_document(quiz: QuizSection) -> dict:
    return {
        "schema_version": quiz.schema_version,
        "section_id": quiz.section_id,
        "questions": [
            {
                "prompt": q.prompt,
                "choices": list(q.choices),
                "correct_index": q.correct_index,
                "explanation": q.explanation,
                "points": q.points,
            }
            for q in quiz.questions
        ],
    }


def quiz_from_document(doc: dict) -> QuizSection:
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise InputError(f"unsupported schema_version {version!r} (supported: {SCHEMA_VERSION})")
    try:
        return QuizSection(
            section_id=doc["section_id"],
            questions=tuple(
                QuizQuestion(q["prompt"], tuple(q["choices"]), q["correct_index"], q["explanation"], q["points"])
                for q in doc["questions"]
            ),
            schema_version=version,
        )
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed quiz document: {exc}") from exc


def serialize_quiz(quiz: QuizSection) -> bytes:
    report = validate_quiz(quiz)
    if report:
        raise SectionValidationError(report)
    return canonical_json_bytes(quiz_to_document(quiz))


def deserialize_quiz(data: bytes) -> QuizSection:
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InputError(f"quiz document is not valid JSON: {exc}") from exc
    return quiz_from_document(doc)


# ---------------------------------------------------------------------------
# WebVTT transcript export


def _vtt_timestamp(ms: int) -> str:
    h, rem = divmod(ms, 3_600_000)
    m, rem = divmod(rem, 60_000)
    s, milli = divmod(rem, 1000)
    return f"{h:02d}:{m:02d}:{s:02d}.{milli:03d}"


_VTT_TS = re.compile(r"(\d+):(\d{2}):(\d{2})\.(\d{3})")


def _parse_vtt_timestamp(text: str) -> int:
    m = _VTT_TS.fullmatch(text.strip())
    if m is None:
        raise InputError(f"bad subtitle timestamp {text!r}")
    h, mi, s, milli = (int(g) for g in m.groups())
    return ((h * 60 + mi) * 60 + s) * 1000 + milli


def transcript_to_vtt(cues: tuple[TranscriptCue, ...]) -> str:
    lines = ["WEBVTT", ""]
    for cue in cues:
        lines.append(f"{_vtt_timestamp(cue.start)} --> {_vtt_timestamp(cue.end)}")
        lines.append(cue.text)
        lines.append("")
    return "\n".join(lines)


def vtt_to_transcript(text: str) -> tuple[TranscriptCue, ...]:
    cues = []
    block: list[str] = []
    for raw in text.splitlines() + [""]:
        line = raw.rstrip("\r")
        if line.strip():
            block.append(line)
            continue
        if block and "-->" in block[0]:
            start_s, _, end_s = block[0].partition("-->")
            cues.append(TranscriptCue(_parse_vtt_timestamp(start_s), _parse_vtt_timestamp(end_s), "\n".join(block[1:])))
        block = []
    return tuple(cues)


# ---------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class Violation:
    rule: str
    message: str
    seq: Optional[int] = None

    def describe(self) -> str:
        where = f" (event {self.seq})" if self.seq is not None else ""
        return f"{self.rule}: {self.message}{where}"


def _check_payload(seq: int, payload: EventPayload, out: list[Violation]) -> None:
    if isinstance(payload, CodeEdit):
        if payload.op_kind not in (INSERT, DELETE):
            out.append(Violation("edit_op", f"unknown op_kind {payload.op_kind!r}", seq))
        if payload.line < 0 or payload.column < 0:
            out.append(Violation("edit_position", "line/column must be non-negative", seq))
        if payload.text == "":
            out.append(Violation("edit_text", "edit text must be non-empty", seq))
    elif isinstance(payload, Highlight):
        if payload.start_offset < 0 or payload.end_offset < payload.start_offset:
            out.append(Violation("highlight_span", "need 0 <= start <= end", seq))
    elif isinstance(payload, Scroll):
        if not (0.0 <= payload.fraction <= 1.0):
            out.append(Violation("scroll_range", f"fraction {payload.fraction} outside [0, 1]", seq))
    elif isinstance(payload, PanelLayout):
        ids = [p.pane_id for p in payload.panes]
        if len(set(ids)) != len(ids):
            out.append(Violation("layout_panes", "pane ids must be unique", seq))
        if sum(1 for p in payload.panes if p.maximized) > 1:
            out.append(Violation("layout_maximized", "at most one maximized pane", seq))
        for p in payload.panes:
            if p.kind not in PANE_KINDS:
                out.append(Violation("layout_kind", f"unknown pane kind {p.kind!r}", seq))
            if not all(0.0 <= v <= 1.0 for v in (p.x, p.y, p.width, p.height)):
                out.append(Violation("layout_geometry", f"pane {p.pane_id!r} geometry outside [0, 1]", seq))


def validate_section(section: SectionRecording) -> list[Violation]:
    """Structural and replay validation; an empty report means valid.

    Violations are data, not failures: callers decide whether to raise.
    Apply-time rules (delete text must match the buffer, highlight
    offsets in bounds) are checked by a trial replay.
    """
    out: list[Violation] = []
    if section.schema_version != SCHEMA_VERSION:
        out.append(Violation("schema_version", f"unsupported version {section.schema_version}"))
    if section.duration < 0:
        out.append(Violation("duration", "duration must be non-negative"))

    exec_seen = False
    last_at = 0
    edit_seqs: set[int] = set()
    for i, event in enumerate(section.events):
        if event.seq != i:
            out.append(Violation("seq_density", f"expected seq {i}, got {event.seq}", event.seq))
        if event.at < 0:
            out.append(Violation("timestamp", "negative timestamp", event.seq))
        if event.at < last_at:
            out.append(Violation("timestamp_order", "timestamps must be non-decreasing", event.seq))
        last_at = max(last_at, event.at)
        if event.at > section.duration:
            out.append(Violation("timestamp_range", f"timestamp {event.at} beyond duration {section.duration}", event.seq))
        _check_payload(event.seq, event.payload, out)
        if isinstance(event.payload, CodeEdit):
            edit_seqs.add(i)
        if isinstance(event.payload, ExecutionMarker):
            exec_seen = True
            snap = event.payload.code_snapshot_seq
            if snap is not None and (snap < 0 or snap >= i or snap not in edit_seqs):
                out.append(Violation("exec_ref", f"code_snapshot_seq {snap} is not a prior code edit", event.seq))

    prev_end = 0
    for cue in section.transcript:
        if cue.start < 0 or cue.end < cue.start:
            out.append(Violation("transcript_cue", f"bad cue interval [{cue.start}, {cue.end}]"))
        if cue.end > section.duration:
            out.append(Violation("transcript_range", f"cue end {cue.end} beyond duration"))
        if cue.start < prev_end:
            out.append(Violation("transcript_overlap", f"cue at {cue.start} overlaps previous"))
        if "\n" in cue.text:
            out.append(Violation("transcript_text", "cue text must be a single line"))
        prev_end = max(prev_end, cue.end)

    if out:
        return out  # structural problems make trial replay unreliable

    # Apply-time rules and the final-code invariant, via trial replay.
    from . import replay  # local import: replay depends on this module

    try:
        final = replay.replay_events(section.events, notes_source=section.notes_source)
    except Exception as exc:  # ReplayError carries seq + rule
        seq = getattr(exc, "seq", None)
        rule = getattr(exc, "rule", "replay")
        out.append(Violation(rule, str(exc), seq))
        return out
    replayed = replay.code_text(final)
    if replayed != section.final_code:
        out.append(Violation("final_code", "replayed code does not equal final_code"))
    _ = exec_seen
    return out


def validate_quiz(quiz: QuizSection) -> list[Violation]:
    out: list[Violation] = []
    if quiz.schema_version != SCHEMA_VERSION:
        out.append(Violation("schema_version", f"unsupported version {quiz.schema_version}"))
    if not quiz.questions:
        out.append(Violation("quiz_empty", "quiz must have at least one question"))
    for i, q in enumerate(quiz.questions):
        if not q.choices:
            out.append(Violation("quiz_choices", f"question {i} has no choices"))
        if not (0 <= q.correct_index < len(q.choices)):
            out.append(Violation("quiz_correct_index", f"question {i} correct_index out of bounds"))
        if q.points < 0:
            out.append(Violation("quiz_points", f"question {i} has negative points"))
    return out


# ---------------------------------------------------------------------------
# Quiz grading


@dataclass(frozen=True)
class QuestionResult:
    correct: bool
    explanation: str
    points_awarded: int


@dataclass(frozen=True)
class GradeReport:
    score: int
    per_question: tuple[QuestionResult, ...]


def grade_quiz(quiz: QuizSection, answers: list[int]) -> GradeReport:
    """Score chosen answers; every question's explanation is returned."""
    if len(answers) != len(quiz.questions):
        raise InputError(f"expected {len(quiz.questions)} answers, got {len(answers)}")
    results = []
    score = 0
    for q, chosen in zip(quiz.questions, answers):
        if not (0 <= chosen < len(q.choices)):
            raise InputError(f"answer index {chosen} out of bounds for {len(q.choices)} choices")
        correct = chosen == q.correct_index
        awarded = q.points if correct else 0
        score += awarded
        results.append(QuestionResult(correct=correct, explanation=q.explanation, points_awarded=awarded))
    return GradeReport(score=score, per_question=tuple(results))
