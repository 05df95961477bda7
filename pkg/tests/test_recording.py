import random

import pytest

from tutorcast.errors import (
    AuthorizationError,
    InputError,
    LifecycleError,
    NotFoundError,
    OrderingError,
    SectionValidationError,
)
from tutorcast.events import ActionEvent, CodeEdit, QuizQuestion, RELEASED, Scroll
from tutorcast.recording import IntervalStubTranscriber, RecorderService
from tutorcast.storage import BundleStore, MetadataStore

from .generators import gen_section
from .oracles import naive_replay


@pytest.fixture
def recorder(tmp_path):
    meta = MetadataStore(":memory:")
    bundles = BundleStore(tmp_path / "bundles")
    yield RecorderService(meta, bundles)
    meta.close()


@pytest.fixture
def draft(recorder):
    return recorder.create_tutorial("alice", "Intro to Python", "python")


def typing_events(text, pane="code", start_seq=0, at=0):
    events = []
    col = 0
    line = 0
    for i, ch in enumerate(text):
        events.append(ActionEvent(start_seq + i, at + i * 40, CodeEdit(pane, "insert", line, col, ch)))
        if ch == "\n":
            line += 1
            col = 0
        else:
            col += 1
    return events


def test_begin_session_on_draft(recorder, draft):
    session_id = recorder.begin_session("alice", draft.tutorial_id, 0, "python")
    assert recorder.append_events(session_id, []) == -1


def test_begin_session_requires_ownership(recorder, draft):
    with pytest.raises(AuthorizationError):
        recorder.begin_session("mallory", draft.tutorial_id, 0, "python")


def test_begin_session_slot_bounds(recorder, draft):
    with pytest.raises(InputError):
        recorder.begin_session("alice", draft.tutorial_id, 1, "python")
    with pytest.raises(InputError):
        recorder.begin_session("alice", draft.tutorial_id, -1, "python")


def test_append_batches_and_ack(recorder, draft):
    session_id = recorder.begin_session("alice", draft.tutorial_id, 0, "python")
    batch = typing_events("abc")
    assert recorder.append_events(session_id, batch) == 2


def test_retransmit_is_idempotent(recorder, draft):
    session_id = recorder.begin_session("alice", draft.tutorial_id, 0, "python")
    batch = typing_events("abc")
    recorder.append_events(session_id, batch)
    assert recorder.append_events(session_id, batch[1:]) == 2
    section = recorder.finalize_session(session_id, b"audio", duration_ms=5000)
    assert section.final_code == "abc"
    assert [e.seq for e in section.events] == [0, 1, 2]


def test_gap_in_sequence_rejected(recorder, draft):
    session_id = recorder.begin_session("alice", draft.tutorial_id, 0, "python")
    recorder.append_events(session_id, typing_events("abc"))
    with pytest.raises(OrderingError) as exc:
        recorder.append_events(session_id, [ActionEvent(5, 500, Scroll("code", 0.5))])
    assert exc.value.expected_seq == 3


def test_timestamp_regression_rejected(recorder, draft):
    session_id = recorder.begin_session("alice", draft.tutorial_id, 0, "python")
    recorder.append_events(session_id, [ActionEvent(0, 1000, Scroll("code", 0.5))])
    with pytest.raises(InputError):
        recorder.append_events(session_id, [ActionEvent(1, 900, Scroll("code", 0.6))])


def test_finalize_computes_final_code_by_replay(recorder, draft):
    rng = random.Random(21)
    generated = gen_section(rng, n_events=150)
    session_id = recorder.begin_session("alice", draft.tutorial_id, 0, "python")
    recorder.append_events(session_id, list(generated.events))
    section = recorder.finalize_session(session_id, b"blob", duration_ms=generated.duration)
    oracle = naive_replay(generated.events)
    assert section.final_code == oracle.code_text()
    tutorial = recorder.meta.get_tutorial(draft.tutorial_id)
    assert tutorial.section_ids == (section.section_id,)
    loaded, _ = recorder.bundles.load_recording_bundle(recorder.meta.get_section(section.section_id).bundle_id)
    assert loaded == section


def test_finalize_rejects_event_beyond_duration(recorder, draft):
    session_id = recorder.begin_session("alice", draft.tutorial_id, 0, "python")
    recorder.append_events(session_id, typing_events("ab", at=9000))
    with pytest.raises(SectionValidationError):
        recorder.finalize_session(session_id, b"a", duration_ms=1000)
    # session is still open: the author can retry with the right duration
    section = recorder.finalize_session(session_id, b"a", duration_ms=10_000)
    assert section.final_code == "ab"


def test_discard_leaves_no_artifacts(recorder, draft):
    session_id = recorder.begin_session("alice", draft.tutorial_id, 0, "python")
    recorder.append_events(session_id, typing_events("abc"))
    recorder.discard_session(session_id)
    assert recorder.bundles.list_bundles() == []
    assert recorder.meta.get_tutorial(draft.tutorial_id).section_ids == ()
    with pytest.raises(LifecycleError):
        recorder.append_events(session_id, typing_events("d", start_seq=3))


def test_staged_events_survive_cache_loss(recorder, draft):
    session_id = recorder.begin_session("alice", draft.tutorial_id, 0, "python")
    recorder.append_events(session_id, typing_events("hello"))
    # a second service instance sharing the same stores picks the session up
    other = RecorderService(recorder.meta, recorder.bundles)
    bang = ActionEvent(5, 400, CodeEdit("code", "insert", 0, 5, "!"))
    assert other.append_events(session_id, [bang]) == 5
    section = other.finalize_session(session_id, b"a", duration_ms=2000)
    assert section.final_code == "hello!"


def test_transcription_stub_cues(recorder, draft):
    session_id = recorder.begin_session("alice", draft.tutorial_id, 0, "python")
    section = recorder.finalize_session(session_id, b"a", duration_ms=25_000)
    assert [((c.start, c.end)) for c in section.transcript] == [(0, 10_000), (10_000, 20_000), (20_000, 25_000)]
    assert IntervalStubTranscriber().transcribe(b"", 0) == []


def test_resequence_happy_path(recorder, draft):
    ids = []
    for i in range(3):
        sid = recorder.begin_session("alice", draft.tutorial_id, i, "python")
        ids.append(recorder.finalize_session(sid, b"a", duration_ms=100).section_id)
    new_order = [ids[2], ids[0], ids[1]]
    updated = recorder.resequence_sections("alice", draft.tutorial_id, new_order)
    assert list(updated.section_ids) == new_order


def test_resequence_identity_is_fine(recorder, draft):
    sid = recorder.begin_session("alice", draft.tutorial_id, 0, "python")
    section = recorder.finalize_session(sid, b"a", duration_ms=100)
    updated = recorder.resequence_sections("alice", draft.tutorial_id, [section.section_id])
    assert updated.section_ids == (section.section_id,)


def test_resequence_rejects_non_permutation(recorder, draft):
    sid = recorder.begin_session("alice", draft.tutorial_id, 0, "python")
    section = recorder.finalize_session(sid, b"a", duration_ms=100)
    with pytest.raises(InputError):
        recorder.resequence_sections("alice", draft.tutorial_id, [])
    with pytest.raises(InputError):
        recorder.resequence_sections("alice", draft.tutorial_id, [section.section_id, "phantom"])
    with pytest.raises(InputError):
        recorder.resequence_sections("alice", draft.tutorial_id, [section.section_id, section.section_id])


def test_release_requires_sections_and_is_idempotent(recorder, draft):
    with pytest.raises(LifecycleError):
        recorder.release_tutorial("alice", draft.tutorial_id)
    sid = recorder.begin_session("alice", draft.tutorial_id, 0, "python")
    recorder.finalize_session(sid, b"a", duration_ms=100)
    released = recorder.release_tutorial("alice", draft.tutorial_id)
    assert released.status == RELEASED
    again = recorder.release_tutorial("alice", draft.tutorial_id)
    assert again.status == RELEASED
    assert again.section_ids == released.section_ids


def test_released_tutorial_rejects_mutation(recorder, draft):
    sid = recorder.begin_session("alice", draft.tutorial_id, 0, "python")
    section = recorder.finalize_session(sid, b"a", duration_ms=100)
    recorder.release_tutorial("alice", draft.tutorial_id)
    with pytest.raises(LifecycleError):
        recorder.begin_session("alice", draft.tutorial_id, 0, "python")
    with pytest.raises(LifecycleError):
        recorder.resequence_sections("alice", draft.tutorial_id, [section.section_id])
    with pytest.raises(LifecycleError):
        recorder.delete_section("alice", draft.tutorial_id, section.section_id)


def test_delete_last_section_then_release_fails(recorder, draft):
    sid = recorder.begin_session("alice", draft.tutorial_id, 0, "python")
    section = recorder.finalize_session(sid, b"a", duration_ms=100)
    recorder.delete_section("alice", draft.tutorial_id, section.section_id)
    with pytest.raises(LifecycleError):
        recorder.release_tutorial("alice", draft.tutorial_id)


def test_redo_reopens_same_slot(recorder, draft):
    ids = []
    for i in range(2):
        sid = recorder.begin_session("alice", draft.tutorial_id, i, "python")
        ids.append(recorder.finalize_session(sid, b"a", duration_ms=100).section_id)
    session_id = recorder.redo_section("alice", draft.tutorial_id, ids[0], "python")
    recorder.append_events(session_id, typing_events("v2"))
    redone = recorder.finalize_session(session_id, b"a", duration_ms=1000)
    tutorial = recorder.meta.get_tutorial(draft.tutorial_id)
    assert list(tutorial.section_ids) == [redone.section_id, ids[1]]


def test_quiz_section_add_and_validate(recorder, draft):
    quiz = recorder.add_quiz_section(
        "alice",
        draft.tutorial_id,
        0,
        [QuizQuestion("1+1?", ("1", "2"), 1, "count", 2)],
    )
    assert recorder.meta.get_section(quiz.section_id).kind == "quiz"
    with pytest.raises(SectionValidationError):
        recorder.add_quiz_section(
            "alice", draft.tutorial_id, 0, [QuizQuestion("bad", ("only",), 3, "", 1)]
        )


def test_unknown_session_is_not_found(recorder):
    with pytest.raises(NotFoundError):
        recorder.append_events("nope", [])
