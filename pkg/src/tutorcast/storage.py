"""Persistence: metadata repository and recording-file repository.

Two stores behind storage-neutral classes. Metadata (users, tutorials,
sections, sessions) lives in an embedded SQLite database; recording
bundles live as one directory per section on the local filesystem.
Both are deployment-swappable seams: cloud object storage or a managed
database would implement the same surface.

Bundle layout (one directory per section)::

    <root>/<bundle_id>/
        manifest.json    section metadata, transcript cues, file hashes
        actions.json     canonical event log
        notes.md         notes markup source
        code.json        final code + language
        audio.mp3        opaque audio blob
        transcript.vtt   WebVTT export of the transcript cues
        quiz.json        (quiz bundles carry manifest.json + quiz.json only)

Writes are atomic: files land in a temp directory that is renamed into
place, so a bundle is either fully present or fully absent. Every file's
SHA-256 is recorded in the manifest and verified on load.
"""

from __future__ import annotations

import hashlib
import json
import os
import shutil
import sqlite3
import threading
import time
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

from .errors import ConflictError, InputError, IntegrityError, NotFoundError
from .events import (
    QuizSection,
    SCHEMA_VERSION,
    SectionRecording,
    Tutorial,
    TranscriptCue,
    canonical_json_bytes,
    event_from_wire,
    event_to_wire,
    quiz_from_document,
    quiz_to_document,
    transcript_to_vtt,
)
from .events import AudioRef


@dataclass(frozen=True)
class ArtifactRef:
    bundle_id: str
    relative_path: str
    byte_size: int
    content_hash: str


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _check_relative(path: str) -> str:
    p = Path(path)
    if p.is_absolute() or ".." in p.parts:
        raise InputError(f"artifact path {path!r} escapes the bundle directory")
    return path


# ---------------------------------------------------------------------------
# Recording-file repository


class BundleStore:
    """Filesystem-backed artifact bundles with atomic visibility."""

    MANIFEST = "manifest.json"

    def __init__(self, root: Path | str):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        # test hook: called with each relative path right after its write
        self._write_hook: Optional[Callable[[str], None]] = None

    def _bundle_dir(self, bundle_id: str) -> Path:
        _check_relative(bundle_id)
        return self.root / bundle_id

    def list_bundles(self) -> list[str]:
        # dot-prefixed entries are staging or bookkeeping, never bundles
        return sorted(p.name for p in self.root.iterdir() if p.is_dir() and not p.name.startswith("."))

    def _write_files(self, bundle_id: str, files: dict[str, bytes]) -> list[ArtifactRef]:
        tmp = self.root / f".tmp-{bundle_id}-{uuid.uuid4().hex[:8]}"
        tmp.mkdir()
        refs = []
        try:
            for rel, data in files.items():
                _check_relative(rel)
                (tmp / rel).write_bytes(data)
                if self._write_hook is not None:
                    self._write_hook(rel)
                refs.append(ArtifactRef(bundle_id, rel, len(data), _sha256(data)))
            os.replace(tmp, self._bundle_dir(bundle_id))
        except BaseException:
            shutil.rmtree(tmp, ignore_errors=True)
            raise
        return refs

    def store_recording_bundle(self, section: SectionRecording, audio_blob: bytes) -> tuple[str, list[ArtifactRef]]:
        if section.audio_ref is not None and section.audio_ref.sha256 != _sha256(audio_blob):
            raise InputError("audio blob does not match the section's audio_ref")
        bundle_id = uuid.uuid4().hex
        actions = canonical_json_bytes([event_to_wire(e) for e in section.events])
        notes = section.notes_source.encode("utf-8")
        code = canonical_json_bytes({"language": section.language, "final_code": section.final_code})
        vtt = transcript_to_vtt(section.transcript).encode("utf-8")
        body = {
            "actions.json": actions,
            "notes.md": notes,
            "code.json": code,
            "transcript.vtt": vtt,
            "audio.mp3": audio_blob,
        }
        manifest = {
            "schema_version": section.schema_version,
            "kind": "recording",
            "section_id": section.section_id,
            "language": section.language,
            "duration_ms": section.duration,
            "transcript": [[c.start, c.end, c.text] for c in section.transcript],
            "audio": None
            if section.audio_ref is None
            else {
                "filename": section.audio_ref.filename,
                "byte_size": section.audio_ref.byte_size,
                "sha256": section.audio_ref.sha256,
            },
            "files": {rel: {"byte_size": len(data), "sha256": _sha256(data)} for rel, data in body.items()},
        }
        files = {self.MANIFEST: canonical_json_bytes(manifest), **body}
        refs = self._write_files(bundle_id, files)
        return bundle_id, refs

    def store_quiz_bundle(self, quiz: QuizSection) -> tuple[str, list[ArtifactRef]]:
        bundle_id = uuid.uuid4().hex
        quiz_bytes = canonical_json_bytes(quiz_to_document(quiz))
        manifest = {
            "schema_version": quiz.schema_version,
            "kind": "quiz",
            "section_id": quiz.section_id,
            "files": {"quiz.json": {"byte_size": len(quiz_bytes), "sha256": _sha256(quiz_bytes)}},
        }
        files = {self.MANIFEST: canonical_json_bytes(manifest), "quiz.json": quiz_bytes}
        refs = self._write_files(bundle_id, files)
        return bundle_id, refs

    def _read_verified(self, bundle_id: str, rel: str, expected: dict) -> bytes:
        path = self._bundle_dir(bundle_id) / _check_relative(rel)
        try:
            data = path.read_bytes()
        except FileNotFoundError:
            raise IntegrityError(rel, "file missing from bundle") from None
        if len(data) != expected["byte_size"] or _sha256(data) != expected["sha256"]:
            raise IntegrityError(rel)
        return data

    def read_manifest(self, bundle_id: str, expected_sha256: Optional[str] = None) -> dict:
        path = self._bundle_dir(bundle_id) / self.MANIFEST
        if not path.exists():
            raise NotFoundError(f"bundle {bundle_id} not found")
        data = path.read_bytes()
        if expected_sha256 is not None and _sha256(data) != expected_sha256:
            raise IntegrityError(self.MANIFEST)
        try:
            return json.loads(data)
        except json.JSONDecodeError as exc:
            raise IntegrityError(self.MANIFEST, f"manifest is not valid JSON: {exc}") from exc

    def load_recording_bundle(
        self, bundle_id: str, expected_manifest_sha256: Optional[str] = None
    ) -> tuple[SectionRecording, ArtifactRef]:
        manifest = self.read_manifest(bundle_id, expected_manifest_sha256)
        if manifest.get("kind") != "recording":
            raise InputError(f"bundle {bundle_id} is not a recording bundle")
        if manifest.get("schema_version") != SCHEMA_VERSION:
            raise InputError(f"unsupported bundle schema_version {manifest.get('schema_version')!r}")
        files = manifest["files"]
        actions = json.loads(self._read_verified(bundle_id, "actions.json", files["actions.json"]))
        notes = self._read_verified(bundle_id, "notes.md", files["notes.md"]).decode("utf-8")
        code = json.loads(self._read_verified(bundle_id, "code.json", files["code.json"]))
        self._read_verified(bundle_id, "transcript.vtt", files["transcript.vtt"])
        audio_bytes = self._read_verified(bundle_id, "audio.mp3", files["audio.mp3"])
        audio = manifest["audio"]
        audio_ref = None
        if audio is not None:
            audio_ref = AudioRef(audio["filename"], audio["byte_size"], audio["sha256"])
            if audio_ref.sha256 != _sha256(audio_bytes):
                raise IntegrityError("audio.mp3")
        section = SectionRecording(
            section_id=manifest["section_id"],
            language=manifest["language"],
            duration=manifest["duration_ms"],
            events=tuple(event_from_wire(i, w) for i, w in enumerate(actions)),
            notes_source=notes,
            final_code=code["final_code"],
            audio_ref=audio_ref,
            transcript=tuple(TranscriptCue(c[0], c[1], c[2]) for c in manifest["transcript"]),
            schema_version=manifest["schema_version"],
        )
        audio_artifact = ArtifactRef(bundle_id, "audio.mp3", len(audio_bytes), _sha256(audio_bytes))
        return section, audio_artifact

    def load_quiz_bundle(self, bundle_id: str, expected_manifest_sha256: Optional[str] = None) -> QuizSection:
        manifest = self.read_manifest(bundle_id, expected_manifest_sha256)
        if manifest.get("kind") != "quiz":
            raise InputError(f"bundle {bundle_id} is not a quiz bundle")
        data = self._read_verified(bundle_id, "quiz.json", manifest["files"]["quiz.json"])
        return quiz_from_document(json.loads(data))

    def read_audio(self, bundle_id: str) -> bytes:
        manifest = self.read_manifest(bundle_id)
        return self._read_verified(bundle_id, "audio.mp3", manifest["files"]["audio.mp3"])

    def manifest_sha256(self, bundle_id: str) -> str:
        path = self._bundle_dir(bundle_id) / self.MANIFEST
        if not path.exists():
            raise NotFoundError(f"bundle {bundle_id} not found")
        return _sha256(path.read_bytes())

    def delete_bundle(self, bundle_id: str) -> None:
        target = self._bundle_dir(bundle_id)
        if target.exists():
            shutil.rmtree(target)


# ---------------------------------------------------------------------------
# Metadata repository


@dataclass(frozen=True)
class User:
    user_id: str
    email: str
    password_hash: str
    role: str  # "author" | "student"
    auth_provider: str = "local"


@dataclass(frozen=True)
class SectionRow:
    section_id: str
    tutorial_id: str
    kind: str  # "recording" | "quiz"
    bundle_id: str
    manifest_sha256: str
    created_at: float


@dataclass(frozen=True)
class SessionRow:
    session_id: str
    tutorial_id: str
    author_id: str
    section_slot: int
    language: str
    notes_source: str
    state: str  # "open" | "finalized" | "discarded"
    last_seq: int  # -1 when no events staged yet
    last_at: int
    started_at: float


_SCHEMA = """
CREATE TABLE IF NOT EXISTS users (
    user_id TEXT PRIMARY KEY,
    email TEXT UNIQUE NOT NULL,
    password_hash TEXT NOT NULL,
    role TEXT NOT NULL,
    auth_provider TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS tutorials (
    tutorial_id TEXT PRIMARY KEY,
    title TEXT NOT NULL,
    language TEXT NOT NULL,
    owner_id TEXT NOT NULL,
    section_ids TEXT NOT NULL,
    status TEXT NOT NULL,
    version INTEGER NOT NULL,
    released_at REAL,
    created_at REAL NOT NULL
);
CREATE TABLE IF NOT EXISTS sections (
    section_id TEXT PRIMARY KEY,
    tutorial_id TEXT NOT NULL,
    kind TEXT NOT NULL,
    bundle_id TEXT NOT NULL,
    manifest_sha256 TEXT NOT NULL,
    created_at REAL NOT NULL
);
CREATE TABLE IF NOT EXISTS sessions (
    session_id TEXT PRIMARY KEY,
    tutorial_id TEXT NOT NULL,
    author_id TEXT NOT NULL,
    section_slot INTEGER NOT NULL,
    language TEXT NOT NULL,
    notes_source TEXT NOT NULL,
    state TEXT NOT NULL,
    last_seq INTEGER NOT NULL,
    last_at INTEGER NOT NULL,
    started_at REAL NOT NULL
);
"""


class MetadataStore:
    """SQLite-backed store; one shared connection, serialized by a lock.

    Tutorial rows carry a version counter for optimistic concurrency:
    every update names the version it read, and a stale update raises
    :class:`ConflictError` instead of clobbering a concurrent change.
    """

    def __init__(self, path: str | Path = ":memory:"):
        self._conn = sqlite3.connect(str(path), check_same_thread=False)
        if str(path) != ":memory:":
            self._conn.execute("PRAGMA journal_mode=WAL")
        self._lock = threading.RLock()
        with self._lock, self._conn:
            self._conn.executescript(_SCHEMA)

    def close(self) -> None:
        self._conn.close()

    # -- users

    def put_user(self, user: User) -> None:
        with self._lock, self._conn:
            try:
                self._conn.execute(
                    "INSERT INTO users VALUES (?, ?, ?, ?, ?)",
                    (user.user_id, user.email, user.password_hash, user.role, user.auth_provider),
                )
            except sqlite3.IntegrityError as exc:
                raise ConflictError(f"user with email {user.email!r} already exists") from exc

    def get_user(self, user_id: str) -> User:
        with self._lock:
            row = self._conn.execute("SELECT * FROM users WHERE user_id = ?", (user_id,)).fetchone()
        if row is None:
            raise NotFoundError(f"user {user_id} not found")
        return User(*row)

    def find_user_by_email(self, email: str) -> Optional[User]:
        with self._lock:
            row = self._conn.execute("SELECT * FROM users WHERE email = ?", (email,)).fetchone()
        return User(*row) if row else None

    # -- tutorials

    @staticmethod
    def _tutorial_from_row(row) -> Tutorial:
        return Tutorial(
            tutorial_id=row[0],
            title=row[1],
            language=row[2],
            owner_id=row[3],
            section_ids=tuple(json.loads(row[4])),
            status=row[5],
            version=row[6],
            released_at=row[7],
        )

    def create_tutorial(self, tutorial: Tutorial) -> None:
        with self._lock, self._conn:
            self._conn.execute(
                "INSERT INTO tutorials VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?)",
                (
                    tutorial.tutorial_id,
                    tutorial.title,
                    tutorial.language,
                    tutorial.owner_id,
                    json.dumps(list(tutorial.section_ids)),
                    tutorial.status,
                    tutorial.version,
                    tutorial.released_at,
                    time.time(),
                ),
            )

    def get_tutorial(self, tutorial_id: str) -> Tutorial:
        with self._lock:
            row = self._conn.execute("SELECT * FROM tutorials WHERE tutorial_id = ?", (tutorial_id,)).fetchone()
        if row is None:
            raise NotFoundError(f"tutorial {tutorial_id} not found")
        return self._tutorial_from_row(row)

    def update_tutorial(self, updated: Tutorial, expected_version: int) -> Tutorial:
        """Compare-and-swap on the version counter; stale writes conflict."""
        bumped = expected_version + 1
        with self._lock, self._conn:
            cur = self._conn.execute(
                "UPDATE tutorials SET title=?, language=?, owner_id=?, section_ids=?, status=?, version=?, released_at=?"
                " WHERE tutorial_id=? AND version=?",
                (
                    updated.title,
                    updated.language,
                    updated.owner_id,
                    json.dumps(list(updated.section_ids)),
                    updated.status,
                    bumped,
                    updated.released_at,
                    updated.tutorial_id,
                    expected_version,
                ),
            )
            if cur.rowcount == 0:
                self.get_tutorial(updated.tutorial_id)  # raises NotFound if missing
                raise ConflictError(f"tutorial {updated.tutorial_id} changed concurrently (expected version {expected_version})")
        return Tutorial(
            tutorial_id=updated.tutorial_id,
            title=updated.title,
            language=updated.language,
            owner_id=updated.owner_id,
            section_ids=updated.section_ids,
            status=updated.status,
            version=bumped,
            released_at=updated.released_at,
        )

    def list_tutorials(self, owner_id: Optional[str] = None) -> list[Tutorial]:
        q = "SELECT * FROM tutorials"
        args: tuple = ()
        if owner_id is not None:
            q += " WHERE owner_id = ?"
            args = (owner_id,)
        q += " ORDER BY created_at"
        with self._lock:
            rows = self._conn.execute(q, args).fetchall()
        return [self._tutorial_from_row(r) for r in rows]

    def list_released(self) -> list[Tutorial]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT * FROM tutorials WHERE status = 'released' ORDER BY released_at"
            ).fetchall()
        return [self._tutorial_from_row(r) for r in rows]

    # -- sections

    def put_section(self, row: SectionRow) -> None:
        with self._lock, self._conn:
            self._conn.execute(
                "INSERT INTO sections VALUES (?, ?, ?, ?, ?, ?)",
                (row.section_id, row.tutorial_id, row.kind, row.bundle_id, row.manifest_sha256, row.created_at),
            )

    def get_section(self, section_id: str) -> SectionRow:
        with self._lock:
            row = self._conn.execute("SELECT * FROM sections WHERE section_id = ?", (section_id,)).fetchone()
        if row is None:
            raise NotFoundError(f"section {section_id} not found")
        return SectionRow(*row)

    def delete_section(self, section_id: str) -> None:
        with self._lock, self._conn:
            self._conn.execute("DELETE FROM sections WHERE section_id = ?", (section_id,))

    def list_sections(self, tutorial_id: str) -> list[SectionRow]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT * FROM sections WHERE tutorial_id = ? ORDER BY created_at", (tutorial_id,)
            ).fetchall()
        return [SectionRow(*r) for r in rows]

    # -- recording sessions

    def put_session(self, row: SessionRow) -> None:
        with self._lock, self._conn:
            self._conn.execute(
                "INSERT INTO sessions VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?)",
                (
                    row.session_id,
                    row.tutorial_id,
                    row.author_id,
                    row.section_slot,
                    row.language,
                    row.notes_source,
                    row.state,
                    row.last_seq,
                    row.last_at,
                    row.started_at,
                ),
            )

    def get_session(self, session_id: str) -> SessionRow:
        with self._lock:
            row = self._conn.execute("SELECT * FROM sessions WHERE session_id = ?", (session_id,)).fetchone()
        if row is None:
            raise NotFoundError(f"session {session_id} not found")
        return SessionRow(*row)

    def update_session(self, row: SessionRow) -> None:
        with self._lock, self._conn:
            self._conn.execute(
                "UPDATE sessions SET state=?, last_seq=?, last_at=? WHERE session_id=?",
                (row.state, row.last_seq, row.last_at, row.session_id),
            )

    # -- audit

    def audit(self, bundles: BundleStore) -> list[str]:
        """Repo-wide referential integrity sweep; returns violations."""
        problems = []
        stored = set(bundles.list_bundles())
        for tutorial in self.list_tutorials():
            for section_id in tutorial.section_ids:
                try:
                    row = self.get_section(section_id)
                except NotFoundError:
                    problems.append(f"tutorial {tutorial.tutorial_id}: section {section_id} has no metadata row")
                    continue
                if row.bundle_id not in stored:
                    problems.append(f"section {section_id}: bundle {row.bundle_id} missing from bundle store")
        return problems
