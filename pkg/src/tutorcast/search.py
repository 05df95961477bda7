"""Keyword search over tutorial artifacts and contextual help for errors.

Search is token-based: the query and every artifact are split into
lowercase identifier-friendly tokens (``[a-z0-9_]+``; no stemming, which
would mangle code identifiers), and a text matches when it contains all
query tokens. Notes and quiz text are timeless (hits at t=0), transcript
cues carry their start time, and code hits report every instant the query
first becomes visible in the code panes, computed from the replayed
timeline, which is exact because state is piecewise-constant between
events.

Contextual help turns raw runtime errors into a clean query (paths,
line/column numbers, addresses and traceback scaffolding stripped) and
asks a pluggable Q&A resource client. The offline fixture client keeps
tests independent of third-party uptime; a thin HTTP client is the
deployment counterpart.
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol

import httpx

from . import replay
from .errors import InputError
from .events import QuizSection, SectionRecording, Timestamp, Tutorial
from .storage import BundleStore, MetadataStore

_TOKEN = re.compile(r"[a-z0-9_]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def _token_set(text: str) -> frozenset[str]:
    return frozenset(tokenize(text))


ARTIFACT_NOTES = "notes"
ARTIFACT_CODE = "code"
ARTIFACT_TRANSCRIPT = "transcript"
ARTIFACT_QUIZ = "quiz"

_KIND_RANK = {ARTIFACT_NOTES: 0, ARTIFACT_CODE: 1, ARTIFACT_TRANSCRIPT: 2, ARTIFACT_QUIZ: 3}

_SNIPPET_RADIUS = 40


@dataclass(frozen=True)
class TimelineHit:
    section_id: str
    artifact_kind: str
    at: Timestamp  # first instant the match is visible; 0 for notes/quiz
    snippet: str
    span: tuple[int, int]  # match location inside the snippet


def _snippet_for(text: str, first_token: str) -> tuple[str, tuple[int, int]]:
    pattern = re.compile(rf"(?<![a-z0-9_]){re.escape(first_token)}(?![a-z0-9_])", re.IGNORECASE)
    m = pattern.search(text)
    if m is None:  # defensive: caller guarantees the token is present
        return text[: 2 * _SNIPPET_RADIUS], (0, 0)
    lo = max(0, m.start() - _SNIPPET_RADIUS)
    hi = min(len(text), m.end() + _SNIPPET_RADIUS)
    return text[lo:hi], (m.start() - lo, m.end() - lo)


# ---------------------------------------------------------------------------
# Per-tutorial index


@dataclass(frozen=True)
class _CodePoint:
    at: Timestamp
    tokens: frozenset[str]


@dataclass(frozen=True)
class _RecordingEntry:
    section: SectionRecording
    notes_tokens: frozenset[str]
    cue_tokens: tuple[frozenset[str], ...]
    code_timeline: tuple[_CodePoint, ...]  # token set at each boundary where it changed


@dataclass(frozen=True)
class _QuizEntry:
    quiz: QuizSection
    question_tokens: tuple[frozenset[str], ...]


class TutorialIndex:
    """Precomputed token sets for one tutorial, built once per version."""

    def __init__(self, version: int, entries: list[tuple[str, object]]):
        self.version = version
        self.entries = entries  # (section_id, _RecordingEntry | _QuizEntry) in tutorial order


def _code_timeline(section: SectionRecording) -> tuple[_CodePoint, ...]:
    points: list[_CodePoint] = []
    state = replay.initial_state(section.notes_source)
    previous = _token_set(replay.code_text(state))
    i = 0
    events = section.events
    while i < len(events):
        boundary = events[i].at
        while i < len(events) and events[i].at == boundary:
            state = replay.apply_event(state, events[i])
            i += 1
        tokens = _token_set(replay.code_text(state))
        if tokens != previous:
            points.append(_CodePoint(at=boundary, tokens=tokens))
            previous = tokens
    return tuple(points)


def build_index(tutorial: Tutorial, meta: MetadataStore, bundles: BundleStore) -> TutorialIndex:
    entries: list[tuple[str, object]] = []
    for section_id in tutorial.section_ids:
        row = meta.get_section(section_id)
        if row.kind == "quiz":
            quiz = bundles.load_quiz_bundle(row.bundle_id, row.manifest_sha256)
            entries.append(
                (
                    section_id,
                    _QuizEntry(
                        quiz=quiz,
                        question_tokens=tuple(
                            _token_set(" ".join((q.prompt, *q.choices, q.explanation))) for q in quiz.questions
                        ),
                    ),
                )
            )
        else:
            section, _ = bundles.load_recording_bundle(row.bundle_id, row.manifest_sha256)
            entries.append(
                (
                    section_id,
                    _RecordingEntry(
                        section=section,
                        notes_tokens=_token_set(section.notes_source),
                        cue_tokens=tuple(_token_set(c.text) for c in section.transcript),
                        code_timeline=_code_timeline(section),
                    ),
                )
            )
    return TutorialIndex(tutorial.version, entries)


class SearchService:
    """Query interface with a per-version index cache.

    Released tutorials are immutable, so their index is built once
    (eagerly at release by the service layer, or lazily on first query)
    and reused; drafts rebuild whenever their version moves.
    """

    def __init__(self, meta: MetadataStore, bundles: BundleStore):
        self.meta = meta
        self.bundles = bundles
        self._cache: dict[str, TutorialIndex] = {}
        self._lock = threading.Lock()

    def ensure_index(self, tutorial_id: str) -> TutorialIndex:
        tutorial = self.meta.get_tutorial(tutorial_id)
        with self._lock:
            cached = self._cache.get(tutorial_id)
            if cached is not None and cached.version == tutorial.version:
                return cached
        index = build_index(tutorial, self.meta, self.bundles)
        with self._lock:
            self._cache[tutorial_id] = index
        return index

    def search(self, tutorial_id: str, keywords: str) -> list[TimelineHit]:
        tokens = tokenize(keywords)
        if not tokens:
            raise InputError("keywords must be non-empty")
        query = frozenset(tokens)
        first_token = tokens[0]
        index = self.ensure_index(tutorial_id)

        hits: list[tuple[int, Timestamp, int, TimelineHit]] = []
        for sec_idx, (section_id, entry) in enumerate(index.entries):
            if isinstance(entry, _QuizEntry):
                for q_idx, q_tokens in enumerate(entry.question_tokens):
                    if query <= q_tokens:
                        q = entry.quiz.questions[q_idx]
                        snippet, span = _snippet_for(" ".join((q.prompt, *q.choices, q.explanation)), first_token)
                        hit = TimelineHit(section_id, ARTIFACT_QUIZ, 0, snippet, span)
                        hits.append((sec_idx, 0, _KIND_RANK[ARTIFACT_QUIZ], hit))
                continue

            assert isinstance(entry, _RecordingEntry)
            section = entry.section
            if query <= entry.notes_tokens:
                snippet, span = _snippet_for(section.notes_source, first_token)
                hits.append((sec_idx, 0, _KIND_RANK[ARTIFACT_NOTES], TimelineHit(section_id, ARTIFACT_NOTES, 0, snippet, span)))

            matched_before = False
            for point in entry.code_timeline:
                matched_now = query <= point.tokens
                if matched_now and not matched_before:
                    code = replay.code_text(replay.state_at(section, point.at))
                    snippet, span = _snippet_for(code, first_token)
                    hits.append(
                        (sec_idx, point.at, _KIND_RANK[ARTIFACT_CODE], TimelineHit(section_id, ARTIFACT_CODE, point.at, snippet, span))
                    )
                matched_before = matched_now

            for cue, cue_tokens in zip(section.transcript, entry.cue_tokens):
                if query <= cue_tokens:
                    snippet, span = _snippet_for(cue.text, first_token)
                    hits.append(
                        (sec_idx, cue.start, _KIND_RANK[ARTIFACT_TRANSCRIPT], TimelineHit(section_id, ARTIFACT_TRANSCRIPT, cue.start, snippet, span))
                    )

        hits.sort(key=lambda item: item[:3])
        return [h for *_, h in hits]


# ---------------------------------------------------------------------------
# Contextual help


_FILE_LINE = re.compile(r'^\s*File "[^"]*", line \d+.*$', re.MULTILINE)
_TRACEBACK_HEADER = re.compile(r"^\s*Traceback \(most recent call last\):\s*$", re.MULTILINE)
_CARET_LINE = re.compile(r"^\s*[\^~]+\s*$", re.MULTILINE)
_WINDOWS_PATH = re.compile(r"[A-Za-z]:\\[^\s'\"]+")
_POSIX_PATH = re.compile(r"(?:~|/)[\w.\-/]+")
_LINE_COL = re.compile(r"\b(?:line|column|col)\s+\d+", re.IGNORECASE)
_HEX_ADDRESS = re.compile(r"\b0x[0-9a-fA-F]+\b")


def normalize_error_text(error_text: str) -> str:
    """Strip run-specific noise so equal mistakes map to equal queries.

    Removes traceback scaffolding, absolute paths (which also carry
    usernames), line/column numbers and memory addresses, then collapses
    the rest onto one line. Idempotent: normalizing twice is a no-op.
    """
    text = _TRACEBACK_HEADER.sub("", error_text)
    text = _FILE_LINE.sub("", text)
    text = _CARET_LINE.sub("", text)
    text = _WINDOWS_PATH.sub("", text)
    text = _POSIX_PATH.sub("", text)
    text = _LINE_COL.sub("", text)
    text = _HEX_ADDRESS.sub("", text)
    parts = [piece.strip() for piece in text.splitlines()]
    return " ".join(" ".join(p.split()) for p in parts if p).strip()


@dataclass(frozen=True)
class Resource:
    title: str
    url: str
    score: float


@dataclass(frozen=True)
class HelpQuery:
    normalized_error: str
    language_id: str
    resources: tuple[Resource, ...]
    provider_warning: Optional[str] = None


class QaClient(Protocol):
    def lookup(self, normalized_error: str, language_id: str) -> list[Resource]: ...


class FixtureQaClient:
    """Offline client backed by a fixture file of canned postings.

    Fixture format: JSON list of ``{pattern, title, url, score}``;
    an entry matches when its pattern occurs (case-insensitively) in
    the normalized error.
    """

    def __init__(self, entries: list[dict]):
        self.entries = entries

    @classmethod
    def from_file(cls, path: Path | str) -> "FixtureQaClient":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    def lookup(self, normalized_error: str, language_id: str) -> list[Resource]:
        needle = normalized_error.lower()
        matched = [e for e in self.entries if e["pattern"].lower() in needle]
        matched.sort(key=lambda e: (-e["score"], e["title"]))
        return [Resource(e["title"], e["url"], e["score"]) for e in matched]


class HttpQaClient:
    """Deployment client for a real Q&A endpoint returning JSON postings."""

    def __init__(self, base_url: str, timeout_s: float = 5.0):
        self.base_url = base_url.rstrip("/")
        self.timeout_s = timeout_s

    def lookup(self, normalized_error: str, language_id: str) -> list[Resource]:
        response = httpx.get(
            self.base_url,
            params={"q": normalized_error, "language": language_id},
            timeout=self.timeout_s,
        )
        response.raise_for_status()
        return [Resource(e["title"], e["url"], float(e["score"])) for e in response.json()]


class HelpService:
    """Error-to-resources flow; provider failures degrade, never break."""

    def __init__(self, client: QaClient):
        self.client = client

    def contextual_help(self, error_text: str, language_id: str) -> HelpQuery:
        if not error_text.strip():
            raise InputError("error_text must be non-empty")
        normalized = normalize_error_text(error_text)
        try:
            resources = sorted(self.client.lookup(normalized, language_id), key=lambda r: (-r.score, r.title))
            return HelpQuery(normalized, language_id, tuple(resources))
        except Exception as exc:  # students always get a usable answer
            return HelpQuery(normalized, language_id, (), provider_warning=f"resource provider unavailable: {exc}")
