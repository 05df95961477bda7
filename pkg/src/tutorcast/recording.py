"""Authoring sessions and tutorial lifecycle.

A recording session stages the author's event stream while the browser
is capturing; finalize turns the staged log plus the audio blob into a
validated, stored section. The final code is always computed server-side
by replaying the log, never trusted from the client, which makes
the replay/final-code invariant hold by construction.

Staged events are durable: each session appends to a JSONL journal under
the storage root and tracks its cursor in the metadata store, so any
service instance sharing the storage root can continue a session.
"""

from __future__ import annotations

import json
import time
import uuid
from pathlib import Path
from typing import Optional, Protocol, Sequence

from . import replay
from .errors import (
    AuthorizationError,
    ConflictError,
    InputError,
    LifecycleError,
    NotFoundError,
    OrderingError,
    SectionValidationError,
)
from .events import (
    ActionEvent,
    AudioRef,
    DRAFT,
    QuizQuestion,
    QuizSection,
    RELEASED,
    SectionRecording,
    TranscriptCue,
    Tutorial,
    event_from_wire,
    event_to_wire,
    validate_quiz,
    validate_section,
)
from .storage import BundleStore, MetadataStore, SectionRow, SessionRow


class Transcriber(Protocol):
    def transcribe(self, audio_blob: bytes, duration_ms: int) -> list[TranscriptCue]: ...


class IntervalStubTranscriber:
    """Placeholder transcription: one cue per 10 s slice of audio.

    Real speech-to-text providers are a deployment swap implementing the
    same call.
    """

    slice_ms = 10_000

    def transcribe(self, audio_blob: bytes, duration_ms: int) -> list[TranscriptCue]:
        cues = []
        start = 0
        n = 1
        while start < duration_ms:
            end = min(start + self.slice_ms, duration_ms)
            cues.append(TranscriptCue(start, end, f"[voice segment {n}]"))
            start = end
            n += 1
        return cues


OPEN = "open"
FINALIZED = "finalized"
DISCARDED = "discarded"


class RecorderService:
    """Session ingestion plus tutorial create/redo/remove/re-sequence/release."""

    def __init__(
        self,
        meta: MetadataStore,
        bundles: BundleStore,
        transcriber: Optional[Transcriber] = None,
        journal_dir: Optional[Path | str] = None,
    ):
        self.meta = meta
        self.bundles = bundles
        self.transcriber = transcriber or IntervalStubTranscriber()
        self.journal_dir = Path(journal_dir) if journal_dir is not None else bundles.root / ".sessions"
        self.journal_dir.mkdir(parents=True, exist_ok=True)
        self._staged: dict[str, list[ActionEvent]] = {}

    # -- tutorials

    def create_tutorial(self, owner_id: str, title: str, language: str) -> Tutorial:
        tutorial = Tutorial(
            tutorial_id=uuid.uuid4().hex,
            title=title,
            language=language,
            owner_id=owner_id,
            section_ids=(),
        )
        self.meta.create_tutorial(tutorial)
        return tutorial

    def _owned_tutorial(self, author_id: str, tutorial_id: str) -> Tutorial:
        tutorial = self.meta.get_tutorial(tutorial_id)
        if tutorial.owner_id != author_id:
            raise AuthorizationError(f"user {author_id} does not own tutorial {tutorial_id}")
        return tutorial

    def _owned_draft(self, author_id: str, tutorial_id: str) -> Tutorial:
        tutorial = self._owned_tutorial(author_id, tutorial_id)
        if tutorial.status != DRAFT:
            raise LifecycleError(f"tutorial {tutorial_id} is released; its sections are immutable")
        return tutorial

    # -- sessions

    def begin_session(
        self, author_id: str, tutorial_id: str, section_slot: int, language: str, notes_source: str = ""
    ) -> str:
        tutorial = self._owned_draft(author_id, tutorial_id)
        if not (0 <= section_slot <= len(tutorial.section_ids)):
            raise InputError(f"section_slot {section_slot} outside [0, {len(tutorial.section_ids)}]")
        session_id = uuid.uuid4().hex
        self.meta.put_session(
            SessionRow(
                session_id=session_id,
                tutorial_id=tutorial_id,
                author_id=author_id,
                section_slot=section_slot,
                language=language,
                notes_source=notes_source,
                state=OPEN,
                last_seq=-1,
                last_at=0,
                started_at=time.time(),
            )
        )
        self._staged[session_id] = []
        self._journal_path(session_id).write_text("", encoding="utf-8")
        return session_id

    def _journal_path(self, session_id: str) -> Path:
        return self.journal_dir / f"{session_id}.events.jsonl"

    def _open_session(self, session_id: str) -> SessionRow:
        row = self.meta.get_session(session_id)
        if row.state != OPEN:
            raise LifecycleError(f"session {session_id} is {row.state}")
        return row

    def _load_staged(self, session_id: str, last_seq: int) -> list[ActionEvent]:
        # another instance may have appended since we cached: the metadata
        # cursor is authoritative, the journal is re-read when we lag it
        staged = self._staged.get(session_id)
        if staged is None or len(staged) != last_seq + 1:
            staged = []
            path = self._journal_path(session_id)
            if path.exists():
                for i, line in enumerate(path.read_text(encoding="utf-8").splitlines()):
                    staged.append(event_from_wire(i, json.loads(line)))
            self._staged[session_id] = staged
        return staged

    def append_events(self, session_id: str, batch: Sequence[ActionEvent]) -> int:
        """Stage a batch; returns the highest accepted seq.

        Retransmits of already-accepted seqs are deduplicated, so the UI
        can flush with at-least-once delivery. Fresh events must continue
        the dense sequence with non-decreasing timestamps.
        """
        row = self._open_session(session_id)
        staged = self._load_staged(session_id, row.last_seq)
        last_seq = row.last_seq
        last_at = row.last_at
        fresh = [e for e in batch if e.seq > last_seq]
        expected = last_seq + 1
        new_lines = []
        for event in fresh:
            if event.seq != expected:
                raise OrderingError(expected_seq=expected, got_seq=event.seq)
            if event.at < last_at:
                raise InputError(f"event {event.seq}: timestamp {event.at} precedes {last_at}")
            if event.at < 0:
                raise InputError(f"event {event.seq}: negative timestamp")
            new_lines.append(json.dumps(event_to_wire(event), separators=(",", ":"), ensure_ascii=False))
            last_at = event.at
            expected += 1
        if new_lines:
            with self._journal_path(session_id).open("a", encoding="utf-8") as fh:
                fh.write("\n".join(new_lines) + "\n")
            staged.extend(fresh)
            last_seq = fresh[-1].seq
            self.meta.update_session(
                SessionRow(
                    session_id,
                    row.tutorial_id,
                    row.author_id,
                    row.section_slot,
                    row.language,
                    row.notes_source,
                    OPEN,
                    last_seq,
                    last_at,
                    row.started_at,
                )
            )
        return last_seq

    def discard_session(self, session_id: str) -> None:
        row = self._open_session(session_id)
        self.meta.update_session(
            SessionRow(
                session_id,
                row.tutorial_id,
                row.author_id,
                row.section_slot,
                row.language,
                row.notes_source,
                DISCARDED,
                row.last_seq,
                row.last_at,
                row.started_at,
            )
        )
        self._staged.pop(session_id, None)
        self._journal_path(session_id).unlink(missing_ok=True)

    def finalize_session(self, session_id: str, audio_blob: bytes, duration_ms: int) -> SectionRecording:
        """Build, validate and store the section; the session closes only on success."""
        row = self._open_session(session_id)
        if duration_ms < 0:
            raise InputError("duration must be non-negative")
        events = tuple(self._load_staged(session_id, row.last_seq))

        final_state = replay.replay_events(events, notes_source=row.notes_source)
        section = SectionRecording(
            section_id=uuid.uuid4().hex,
            language=row.language,
            duration=duration_ms,
            events=events,
            notes_source=row.notes_source,
            final_code=replay.code_text(final_state),
            audio_ref=AudioRef.from_blob(audio_blob),
            transcript=tuple(self.transcriber.transcribe(audio_blob, duration_ms)),
        )
        report = validate_section(section)
        if report:
            # session stays open so the author can discard or retry
            raise SectionValidationError(report)

        bundle_id, _ = self.bundles.store_recording_bundle(section, audio_blob)
        try:
            self._insert_section(row.tutorial_id, row.author_id, section.section_id, "recording", bundle_id, row.section_slot)
        except BaseException:
            self.bundles.delete_bundle(bundle_id)
            raise
        self.meta.update_session(
            SessionRow(
                session_id,
                row.tutorial_id,
                row.author_id,
                row.section_slot,
                row.language,
                row.notes_source,
                FINALIZED,
                row.last_seq,
                row.last_at,
                row.started_at,
            )
        )
        self._staged.pop(session_id, None)
        self._journal_path(session_id).unlink(missing_ok=True)
        return section

    def _insert_section(self, tutorial_id: str, author_id: str, section_id: str, kind: str, bundle_id: str, slot: int) -> Tutorial:
        self.meta.put_section(
            SectionRow(
                section_id=section_id,
                tutorial_id=tutorial_id,
                kind=kind,
                bundle_id=bundle_id,
                manifest_sha256=self.bundles.manifest_sha256(bundle_id),
                created_at=time.time(),
            )
        )
        for _ in range(3):  # optimistic retry against concurrent authoring ops
            tutorial = self._owned_draft(author_id, tutorial_id)
            ids = list(tutorial.section_ids)
            ids.insert(min(slot, len(ids)), section_id)
            try:
                return self.meta.update_tutorial(
                    Tutorial(
                        tutorial.tutorial_id,
                        tutorial.title,
                        tutorial.language,
                        tutorial.owner_id,
                        tuple(ids),
                        tutorial.status,
                        tutorial.version,
                        tutorial.released_at,
                    ),
                    expected_version=tutorial.version,
                )
            except ConflictError:
                continue
        self.meta.delete_section(section_id)
        raise ConflictError(f"tutorial {tutorial_id} kept changing; section not attached")

    # -- quiz sections

    def add_quiz_section(
        self, author_id: str, tutorial_id: str, slot: int, questions: Sequence[QuizQuestion]
    ) -> QuizSection:
        tutorial = self._owned_draft(author_id, tutorial_id)
        if not (0 <= slot <= len(tutorial.section_ids)):
            raise InputError(f"section_slot {slot} outside [0, {len(tutorial.section_ids)}]")
        quiz = QuizSection(section_id=uuid.uuid4().hex, questions=tuple(questions))
        report = validate_quiz(quiz)
        if report:
            raise SectionValidationError(report)
        bundle_id, _ = self.bundles.store_quiz_bundle(quiz)
        try:
            self._insert_section(tutorial_id, author_id, quiz.section_id, "quiz", bundle_id, slot)
        except BaseException:
            self.bundles.delete_bundle(bundle_id)
            raise
        return quiz

    # -- lifecycle

    def resequence_sections(self, author_id: str, tutorial_id: str, new_order: Sequence[str]) -> Tutorial:
        tutorial = self._owned_draft(author_id, tutorial_id)
        if sorted(new_order) != sorted(tutorial.section_ids) or len(new_order) != len(tutorial.section_ids):
            raise InputError("new order must be a permutation of the current section ids")
        return self.meta.update_tutorial(
            Tutorial(
                tutorial.tutorial_id,
                tutorial.title,
                tutorial.language,
                tutorial.owner_id,
                tuple(new_order),
                tutorial.status,
                tutorial.version,
                tutorial.released_at,
            ),
            expected_version=tutorial.version,
        )

    def release_tutorial(self, author_id: str, tutorial_id: str) -> Tutorial:
        tutorial = self._owned_tutorial(author_id, tutorial_id)
        if tutorial.status == RELEASED:
            return tutorial  # releasing twice is a no-op
        if not tutorial.section_ids:
            raise LifecycleError("cannot release a tutorial with no sections")
        return self.meta.update_tutorial(
            Tutorial(
                tutorial.tutorial_id,
                tutorial.title,
                tutorial.language,
                tutorial.owner_id,
                tutorial.section_ids,
                RELEASED,
                tutorial.version,
                released_at=time.time(),
            ),
            expected_version=tutorial.version,
        )

    def delete_section(self, author_id: str, tutorial_id: str, section_id: str) -> Tutorial:
        tutorial = self._owned_draft(author_id, tutorial_id)
        if section_id not in tutorial.section_ids:
            raise NotFoundError(f"section {section_id} not in tutorial {tutorial_id}")
        row = self.meta.get_section(section_id)
        updated = self.meta.update_tutorial(
            Tutorial(
                tutorial.tutorial_id,
                tutorial.title,
                tutorial.language,
                tutorial.owner_id,
                tuple(s for s in tutorial.section_ids if s != section_id),
                tutorial.status,
                tutorial.version,
                tutorial.released_at,
            ),
            expected_version=tutorial.version,
        )
        self.meta.delete_section(section_id)
        self.bundles.delete_bundle(row.bundle_id)
        return updated

    def redo_section(
        self, author_id: str, tutorial_id: str, section_id: str, language: str, notes_source: str = ""
    ) -> str:
        """Replace a section: delete it and open a fresh session on its slot."""
        tutorial = self._owned_draft(author_id, tutorial_id)
        if section_id not in tutorial.section_ids:
            raise NotFoundError(f"section {section_id} not in tutorial {tutorial_id}")
        slot = tutorial.section_ids.index(section_id)
        self.delete_section(author_id, tutorial_id, section_id)
        return self.begin_session(author_id, tutorial_id, slot, language, notes_source)
