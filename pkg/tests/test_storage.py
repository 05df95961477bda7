import random
import threading

import pytest

from tutorcast.errors import ConflictError, InputError, IntegrityError, NotFoundError
from tutorcast.events import DRAFT, RELEASED, Tutorial
from tutorcast.storage import BundleStore, MetadataStore, SectionRow, User

from .generators import gen_quiz, gen_section


@pytest.fixture
def store(tmp_path):
    return BundleStore(tmp_path / "bundles")


@pytest.fixture
def meta():
    m = MetadataStore(":memory:")
    yield m
    m.close()


def section_with_blob(seed=0, **kw):
    from dataclasses import replace

    from tutorcast.events import AudioRef

    section = gen_section(random.Random(seed), **kw)
    blob = b"fake-mp3-bytes-" + bytes([seed % 250])
    return replace(section, audio_ref=AudioRef.from_blob(blob)), blob


def test_minimal_bundle_has_full_layout(store):
    section, blob = section_with_blob(1, n_events=5)
    bundle_id, refs = store.store_recording_bundle(section, blob)
    names = {r.relative_path for r in refs}
    assert names == {"manifest.json", "actions.json", "notes.md", "code.json", "transcript.vtt", "audio.mp3"}
    assert (store.root / bundle_id / "manifest.json").exists()


def test_store_then_load_round_trips(store):
    section, blob = section_with_blob(2)
    bundle_id, _ = store.store_recording_bundle(section, blob)
    loaded, audio = store.load_recording_bundle(bundle_id)
    assert loaded == section
    assert audio.byte_size == len(blob)
    assert store.read_audio(bundle_id) == blob


def test_mismatched_audio_blob_rejected(store):
    section, _ = section_with_blob(3)
    with pytest.raises(InputError):
        store.store_recording_bundle(section, b"different bytes")


def test_crash_between_writes_leaves_no_bundle(store):
    section, blob = section_with_blob(4)

    calls = []

    def boom(rel):
        calls.append(rel)
        if len(calls) == 3:
            raise OSError("disk died")

    store._write_hook = boom
    with pytest.raises(OSError):
        store.store_recording_bundle(section, blob)
    store._write_hook = None
    assert store.list_bundles() == []
    assert not any(p.name.startswith(".tmp-") and any(p.iterdir()) for p in store.root.iterdir() if p.is_dir())


def test_corrupted_actions_file_detected(store):
    section, blob = section_with_blob(5)
    bundle_id, _ = store.store_recording_bundle(section, blob)
    path = store.root / bundle_id / "actions.json"
    raw = bytearray(path.read_bytes())
    raw[len(raw) // 2] ^= 0x01
    path.write_bytes(bytes(raw))
    with pytest.raises(IntegrityError) as exc:
        store.load_recording_bundle(bundle_id)
    assert exc.value.path == "actions.json"


def test_corrupted_manifest_detected_via_expected_hash(store):
    section, blob = section_with_blob(6)
    bundle_id, _ = store.store_recording_bundle(section, blob)
    expected = store.manifest_sha256(bundle_id)
    path = store.root / bundle_id / "manifest.json"
    path.write_bytes(path.read_bytes().replace(b'"recording"', b'"recordinG"'))
    with pytest.raises(IntegrityError):
        store.read_manifest(bundle_id, expected)


def test_unknown_bundle_not_found(store):
    with pytest.raises(NotFoundError):
        store.load_recording_bundle("deadbeef")


def test_quiz_bundle_round_trip(store):
    quiz = gen_quiz(random.Random(7))
    bundle_id, refs = store.store_quiz_bundle(quiz)
    assert {r.relative_path for r in refs} == {"manifest.json", "quiz.json"}
    assert store.load_quiz_bundle(bundle_id) == quiz


def test_path_traversal_rejected(store):
    with pytest.raises(InputError):
        store.read_manifest("../outside")


# --- metadata --------------------------------------------------------------


def make_tutorial(tid="t1", owner="u1", status=DRAFT, sections=()):
    return Tutorial(tutorial_id=tid, title="Intro", language="python", owner_id=owner, section_ids=tuple(sections), status=status)


def test_user_crud_and_unique_email(meta):
    meta.put_user(User("u1", "a@example.com", "hash", "author"))
    assert meta.get_user("u1").email == "a@example.com"
    assert meta.find_user_by_email("a@example.com").user_id == "u1"
    assert meta.find_user_by_email("nobody@example.com") is None
    with pytest.raises(ConflictError):
        meta.put_user(User("u2", "a@example.com", "hash", "student"))


def test_draft_absent_from_released_listing(meta):
    meta.create_tutorial(make_tutorial())
    assert meta.list_released() == []
    t = meta.get_tutorial("t1")
    meta.update_tutorial(
        Tutorial(t.tutorial_id, t.title, t.language, t.owner_id, t.section_ids, RELEASED, t.version, released_at=123.0),
        expected_version=t.version,
    )
    released = meta.list_released()
    assert [t.tutorial_id for t in released] == ["t1"]
    assert released[0].status == RELEASED


def test_released_ordering_by_release_time(meta):
    for tid, at in (("a", 30.0), ("b", 10.0), ("c", 20.0)):
        meta.create_tutorial(make_tutorial(tid=tid))
        t = meta.get_tutorial(tid)
        meta.update_tutorial(
            Tutorial(t.tutorial_id, t.title, t.language, t.owner_id, t.section_ids, RELEASED, t.version, released_at=at),
            expected_version=t.version,
        )
    assert [t.tutorial_id for t in meta.list_released()] == ["b", "c", "a"]


def test_stale_update_conflicts(meta):
    meta.create_tutorial(make_tutorial())
    first = meta.get_tutorial("t1")
    meta.update_tutorial(
        Tutorial(first.tutorial_id, first.title, first.language, first.owner_id, ("s1",), first.status, first.version),
        expected_version=first.version,
    )
    with pytest.raises(ConflictError):
        meta.update_tutorial(
            Tutorial(first.tutorial_id, first.title, first.language, first.owner_id, ("s2",), first.status, first.version),
            expected_version=first.version,
        )
    assert meta.get_tutorial("t1").section_ids == ("s1",)


def test_concurrent_resequence_exactly_one_wins(meta):
    meta.create_tutorial(make_tutorial(sections=("a", "b", "c")))
    base = meta.get_tutorial("t1")
    outcomes = []

    def attempt(order):
        try:
            meta.update_tutorial(
                Tutorial(base.tutorial_id, base.title, base.language, base.owner_id, order, base.status, base.version),
                expected_version=base.version,
            )
            outcomes.append(("ok", order))
        except ConflictError:
            outcomes.append(("conflict", order))

    threads = [threading.Thread(target=attempt, args=(o,)) for o in (("c", "a", "b"), ("b", "c", "a"))]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert sorted(o[0] for o in outcomes) == ["conflict", "ok"]
    winner = next(o[1] for o in outcomes if o[0] == "ok")
    assert meta.get_tutorial("t1").section_ids == winner


@pytest.mark.parametrize("seed", range(3))
def test_sixty_second_sections_stay_small(store, seed):
    # worst-case event density for a one-minute recording
    section, blob = section_with_blob(seed, n_events=2000, duration_ms=60_000)
    _, refs = store.store_recording_bundle(section, blob)
    non_audio = sum(r.byte_size for r in refs if r.relative_path != "audio.mp3")
    assert non_audio <= 100 * 1024


def test_audit_reports_dangling_refs(meta, store):
    section, blob = section_with_blob(8, n_events=5)
    bundle_id, _ = store.store_recording_bundle(section, blob)
    meta.create_tutorial(make_tutorial(sections=(section.section_id, "ghost")))
    meta.put_section(SectionRow(section.section_id, "t1", "recording", bundle_id, store.manifest_sha256(bundle_id), 1.0))
    problems = meta.audit(store)
    assert len(problems) == 1
    assert "ghost" in problems[0]

    store.delete_bundle(bundle_id)
    problems = meta.audit(store)
    assert len(problems) == 2
