import random

import pytest
from fastapi.testclient import TestClient

from tutorcast.events import event_to_wire
from tutorcast.service import ServiceConfig, create_app

from .generators import gen_section

FIXTURE_QA = "tests/fixtures/qa_fixtures.json"


@pytest.fixture
def client(tmp_path):
    from pathlib import Path

    config = ServiceConfig(storage_root=tmp_path / "data", secret="test-secret", qa_fixture_path=Path(FIXTURE_QA))
    app = create_app(config)
    with TestClient(app, raise_server_exceptions=False) as c:
        yield c


def register(client, email, role, password="pw12345"):
    r = client.post("/auth/register", json={"email": email, "password": password, "role": role})
    assert r.status_code == 201, r.text
    doc = r.json()
    return {"Authorization": f"Bearer {doc['token']}"}, doc["user_id"]


@pytest.fixture
def author(client):
    return register(client, "author@example.com", "author")


@pytest.fixture
def student(client):
    return register(client, "student@example.com", "student")


def wire_events(events, start=0):
    return {"events": [{"seq": e.seq, "event": event_to_wire(e)} for e in events[start:]]}


def record_section(client, headers, tutorial_id, events, duration_ms, slot=0, notes=""):
    r = client.post(
        "/sessions",
        json={"tutorial_id": tutorial_id, "section_slot": slot, "language": "python", "notes_source": notes},
        headers=headers,
    )
    assert r.status_code == 201, r.text
    session_id = r.json()["session_id"]
    if events:
        r = client.post(f"/sessions/{session_id}/events", json=wire_events(events), headers=headers)
        assert r.status_code == 200, r.text
    r = client.post(
        f"/sessions/{session_id}/finalize",
        data={"duration_ms": str(duration_ms)},
        files={"audio": ("audio.mp3", b"fake-mp3", "audio/mpeg")},
        headers=headers,
    )
    assert r.status_code == 201, r.text
    return r.json()


def make_tutorial(client, headers, title="Loops 101"):
    r = client.post("/tutorials", json={"title": title, "language": "python"}, headers=headers)
    assert r.status_code == 201, r.text
    return r.json()["tutorial_id"]


# --- auth --------------------------------------------------------------------


def test_register_login_round_trip(client):
    headers, _ = register(client, "a@x.test", "author")
    r = client.post("/auth/login", json={"email": "a@x.test", "password": "pw12345"})
    assert r.status_code == 200
    assert r.json()["role"] == "author"


def test_bad_password_rejected(client):
    register(client, "a@x.test", "author")
    r = client.post("/auth/login", json={"email": "a@x.test", "password": "wrong"})
    assert r.status_code == 401


def test_external_stub_token_maps_principal(client):
    r = client.post("/auth/login", json={"external_token": "stub:ext@uni.test", "role": "author"})
    assert r.status_code == 200
    doc = r.json()
    # second login maps to the same user
    again = client.post("/auth/login", json={"external_token": "stub:ext@uni.test"}).json()
    assert again["user_id"] == doc["user_id"]
    bad = client.post("/auth/login", json={"external_token": "garbage"})
    assert bad.status_code == 401


def test_requests_without_token_rejected(client):
    assert client.get("/tutorials").status_code == 401
    assert client.post("/tutorials", json={"title": "x", "language": "python"}).status_code == 401


def test_duration_header_present(client):
    r = client.get("/health")
    assert r.status_code == 200
    assert float(r.headers["X-Server-Duration-Ms"]) >= 0


# --- tutorials & role filtering -----------------------------------------------


def test_student_sees_only_released(client, author, student):
    headers_a, _ = author
    headers_s, _ = student
    tid = make_tutorial(client, headers_a)
    record_section(client, headers_a, tid, [], duration_ms=1000)

    assert client.get("/tutorials", headers=headers_s).json()["tutorials"] == []
    assert client.post(f"/tutorials/{tid}/release", headers=headers_a).status_code == 200
    listed = client.get("/tutorials", headers=headers_s).json()["tutorials"]
    assert [t["tutorial_id"] for t in listed] == [tid]
    # authors keep seeing their drafts
    assert len(client.get("/tutorials", headers=headers_a).json()["tutorials"]) == 1


def test_non_owner_cannot_mutate(client, author):
    headers_a, _ = author
    tid = make_tutorial(client, headers_a)
    record_section(client, headers_a, tid, [], duration_ms=500)
    headers_b, _ = register(client, "other@x.test", "author")
    assert client.post(f"/tutorials/{tid}/release", headers=headers_b).status_code == 403
    assert client.put(f"/tutorials/{tid}/order", json={"section_ids": []}, headers=headers_b).status_code == 403


def test_student_role_cannot_author(client, student):
    headers_s, _ = student
    assert client.post("/tutorials", json={"title": "x", "language": "python"}, headers=headers_s).status_code == 403
    assert client.post(
        "/sessions", json={"tutorial_id": "t", "section_slot": 0, "language": "python"}, headers=headers_s
    ).status_code == 403


def test_resequence_roundtrip(client, author):
    headers, _ = author
    tid = make_tutorial(client, headers)
    first = record_section(client, headers, tid, [], duration_ms=100, slot=0)
    second = record_section(client, headers, tid, [], duration_ms=100, slot=1)
    new_order = [second["section_id"], first["section_id"]]
    r = client.put(f"/tutorials/{tid}/order", json={"section_ids": new_order}, headers=headers)
    assert r.status_code == 200
    assert r.json()["section_ids"] == new_order
    bad = client.put(f"/tutorials/{tid}/order", json={"section_ids": new_order[:1]}, headers=headers)
    assert bad.status_code == 400


# --- recording flow ------------------------------------------------------------


def test_recording_batches_and_finalize(client, author):
    headers, _ = author
    tid = make_tutorial(client, headers)
    section = gen_section(random.Random(4), n_events=60)

    r = client.post(
        "/sessions", json={"tutorial_id": tid, "section_slot": 0, "language": "python"}, headers=headers
    )
    session_id = r.json()["session_id"]
    events = list(section.events)
    half = len(events) // 2
    r1 = client.post(f"/sessions/{session_id}/events", json=wire_events(events[:half]), headers=headers)
    assert r1.json()["accepted_through_seq"] == half - 1
    r2 = client.post(f"/sessions/{session_id}/events", json=wire_events(events[half:]), headers=headers)
    assert r2.json()["accepted_through_seq"] == len(events) - 1

    gap = {"events": [{"seq": len(events) + 5, "event": ["scroll", section.duration, "code", 0.5]}]}
    r3 = client.post(f"/sessions/{session_id}/events", json=gap, headers=headers)
    assert r3.status_code == 409
    assert r3.json()["expected_seq"] == len(events)

    done = client.post(
        f"/sessions/{session_id}/finalize",
        data={"duration_ms": str(section.duration)},
        files={"audio": ("a.mp3", b"bytes", "audio/mpeg")},
        headers=headers,
    )
    assert done.status_code == 201
    assert done.json()["final_code"] == section.final_code


def test_finalize_validation_failure_keeps_session(client, author):
    headers, _ = author
    tid = make_tutorial(client, headers)
    r = client.post("/sessions", json={"tutorial_id": tid, "section_slot": 0, "language": "python"}, headers=headers)
    session_id = r.json()["session_id"]
    client.post(
        f"/sessions/{session_id}/events",
        json={"events": [{"seq": 0, "event": ["edit", 5000, "code", "ins", 0, 0, "x"]}]},
        headers=headers,
    )
    bad = client.post(
        f"/sessions/{session_id}/finalize",
        data={"duration_ms": "1000"},
        files={"audio": ("a.mp3", b"b", "audio/mpeg")},
        headers=headers,
    )
    assert bad.status_code == 422
    assert any(v["rule"] == "timestamp_range" for v in bad.json()["violations"])
    assert client.delete(f"/sessions/{session_id}", headers=headers).status_code == 200


# --- playback routes ------------------------------------------------------------


@pytest.fixture
def released_tutorial(client, author):
    headers, _ = author
    tid = make_tutorial(client, headers)
    section = gen_section(random.Random(9), n_events=80)
    summary = record_section(client, headers, tid, list(section.events), section.duration, notes="about loops marmalade")
    quiz = client.post(
        f"/tutorials/{tid}/quiz",
        json={
            "section_slot": 1,
            "questions": [
                {"prompt": "what prints?", "choices": ["1", "2"], "correct_index": 1, "explanation": "count", "points": 3}
            ],
        },
        headers=headers,
    ).json()
    client.post(f"/tutorials/{tid}/release", headers=headers)
    return tid, summary["section_id"], quiz["section_id"], section


def test_bundle_fetch_with_etag(client, student, released_tutorial):
    headers, _ = student
    tid, section_id, _, section = released_tutorial
    r = client.get(f"/tutorials/{tid}/sections/{section_id}/bundle", headers=headers)
    assert r.status_code == 200
    doc = r.json()
    assert doc["kind"] == "recording"
    assert doc["section"]["final_code"] == section.final_code
    assert len(doc["section"]["events"]) == len(section.events)
    etag = r.headers["ETag"]
    cached = client.get(
        f"/tutorials/{tid}/sections/{section_id}/bundle", headers={**headers, "If-None-Match": etag}
    )
    assert cached.status_code == 304

    audio = client.get(f"/tutorials/{tid}/sections/{section_id}/audio", headers=headers)
    assert audio.status_code == 200
    assert audio.content == b"fake-mp3"


def test_state_endpoint_final_matches_final_code(client, student, released_tutorial):
    headers, _ = student
    tid, section_id, _, section = released_tutorial
    r = client.get(f"/tutorials/{tid}/sections/{section_id}/state", params={"t": section.duration}, headers=headers)
    assert r.status_code == 200
    assert r.json()["code"] == section.final_code
    assert client.get(
        f"/tutorials/{tid}/sections/{section_id}/state", params={"t": section.duration + 1}, headers=headers
    ).status_code == 400


def test_draft_bundle_hidden_from_students(client, author, student):
    headers_a, _ = author
    headers_s, _ = student
    tid = make_tutorial(client, headers_a)
    summary = record_section(client, headers_a, tid, [], duration_ms=100)
    path = f"/tutorials/{tid}/sections/{summary['section_id']}/bundle"
    assert client.get(path, headers=headers_s).status_code == 403
    assert client.get(path, headers=headers_a).status_code == 200  # owner preview


def test_search_route(client, student, released_tutorial):
    headers, _ = student
    tid, section_id, _, _ = released_tutorial
    r = client.get(f"/tutorials/{tid}/search", params={"q": "marmalade"}, headers=headers)
    assert r.status_code == 200
    hits = r.json()["hits"]
    assert hits and hits[0]["artifact_kind"] == "notes"
    assert client.get(f"/tutorials/{tid}/search", params={"q": "  "}, headers=headers).status_code == 400


def test_help_route_uses_fixture_client(client, student):
    headers, _ = student
    r = client.post(
        "/help",
        json={"error_text": 'File "/tmp/x.py", line 3\nIndentationError: expected an indented block', "language_id": "python"},
        headers=headers,
    )
    assert r.status_code == 200
    doc = r.json()
    assert "expected an indented block" in doc["normalized_error"]
    assert "/tmp" not in doc["normalized_error"]
    assert len(doc["resources"]) == 3


def test_execute_route(client, student):
    headers, _ = student
    r = client.post(
        "/execute",
        json={"language_id": "python", "source": "print(input())", "stdin": "echoed"},
        headers=headers,
    )
    assert r.status_code == 200
    doc = r.json()
    assert doc["stdout"] == "echoed\n"
    assert doc["exit_status"] == 0
    r = client.post("/execute", json={"language_id": "nope", "source": "x"}, headers=headers)
    assert r.status_code == 400


def test_execute_route_timeout(client, student):
    headers, _ = student
    r = client.post(
        "/execute",
        json={"language_id": "python", "source": "while True: pass", "limits": {"time_ms": 1000}},
        headers=headers,
    )
    assert r.status_code == 200
    doc = r.json()
    assert doc["timed_out"] is True
    assert doc["wall_time_ms"] >= 1000


def test_execute_route_clamps_limits_to_config(client, student):
    headers, _ = student
    # ask for far more time than the service allows; the 10 s policy wins
    r = client.post(
        "/execute",
        json={"language_id": "python", "source": "print('ok')", "limits": {"time_ms": 10_000_000}},
        headers=headers,
    )
    assert r.status_code == 200
    assert r.json()["stdout"] == "ok\n"


def test_quiz_grade_route(client, student, released_tutorial):
    headers, _ = student
    _, _, quiz_id, _ = released_tutorial
    r = client.post(f"/quiz/{quiz_id}/grade", json={"answers": [1]}, headers=headers)
    assert r.status_code == 200
    assert r.json()["score"] == 3
    bad = client.post(f"/quiz/{quiz_id}/grade", json={"answers": [5]}, headers=headers)
    assert bad.status_code == 400


def test_any_instance_serves_any_request(tmp_path):
    """Two service instances over one storage root: tokens and sessions
    minted on one are served by the other."""
    config = ServiceConfig(storage_root=tmp_path / "shared", secret="shared-secret")
    with TestClient(create_app(config)) as a, TestClient(create_app(config)) as b:
        r = a.post("/auth/register", json={"email": "x@y.test", "password": "pw", "role": "author"})
        headers = {"Authorization": f"Bearer {r.json()['token']}"}
        tid = b.post("/tutorials", json={"title": "t", "language": "python"}, headers=headers).json()["tutorial_id"]
        sid = a.post(
            "/sessions", json={"tutorial_id": tid, "section_slot": 0, "language": "python"}, headers=headers
        ).json()["session_id"]
        r = b.post(
            f"/sessions/{sid}/events",
            json={"events": [{"seq": 0, "event": ["edit", 0, "code", "ins", 0, 0, "hi"]}]},
            headers=headers,
        )
        assert r.status_code == 200
        done = a.post(
            f"/sessions/{sid}/finalize",
            data={"duration_ms": "1000"},
            files={"audio": ("a.mp3", b"x", "audio/mpeg")},
            headers=headers,
        )
        assert done.status_code == 201
        assert done.json()["final_code"] == "hi"


def test_every_mutating_route_rejects_foreign_principal(client, author):
    """AuthZ completeness: iterate the mutating surface with a stranger."""
    headers_a, _ = author
    tid = make_tutorial(client, headers_a)
    summary = record_section(client, headers_a, tid, [], duration_ms=100)
    r = client.post("/sessions", json={"tutorial_id": tid, "section_slot": 1, "language": "python"}, headers=headers_a)
    open_session = r.json()["session_id"]

    foreign, _ = register(client, "foreign@x.test", "author")
    attempts = [
        ("POST", f"/tutorials/{tid}/release", {"json": {}}),
        ("PUT", f"/tutorials/{tid}/order", {"json": {"section_ids": [summary["section_id"]]}}),
        ("DELETE", f"/tutorials/{tid}/sections/{summary['section_id']}", {}),
        ("POST", f"/tutorials/{tid}/quiz", {"json": {"section_slot": 0, "questions": []}}),
        ("POST", "/sessions", {"json": {"tutorial_id": tid, "section_slot": 0, "language": "python"}}),
        ("POST", f"/sessions/{open_session}/events", {"json": {"events": []}}),
        ("DELETE", f"/sessions/{open_session}", {}),
    ]
    for method, path, kwargs in attempts:
        r = client.request(method, path, headers=foreign, **kwargs)
        assert r.status_code == 403, (method, path, r.status_code, r.text)
    # nothing changed
    listed = client.get("/tutorials", headers=headers_a).json()["tutorials"]
    assert listed[0]["section_ids"] == [summary["section_id"]]
    assert listed[0]["status"] == "draft"
