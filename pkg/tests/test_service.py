"""HTTP service: auth, scoring pipeline, devices, blinding."""

import json

import pytest
from fastapi.testclient import TestClient

from pianotact.service import create_app, make_token
from pianotact.store import canonical_json

from .conftest import PITCHES, build_smf, note_off, note_on, tempo_msg

SECRET = "test-secret"


def song_bytes(letters: str, spacing_ticks: int = 480, duration_ticks: int = 384) -> bytes:
    events = [(0, tempo_msg(500_000))]
    pending_off = None
    track = [(0, tempo_msg(500_000))]
    time = 0
    msgs = []
    for i, letter in enumerate(letters.split()):
        pitch = PITCHES[letter]
        on_t = i * spacing_ticks
        msgs.append((on_t, 1, note_on(pitch)))
        msgs.append((on_t + duration_ticks, 0, note_off(pitch)))
    msgs.sort(key=lambda m: (m[0], m[1]))
    deltas = []
    last = 0
    for t, _, m in msgs:
        deltas.append((t - last, m))
        last = t
    return build_smf([track + deltas])


def messages_for(letters: str, spacing_ms: int = 500, duration_ms: int = 400,
                 start_ms: int = 0) -> list[dict]:
    msgs = []
    for i, letter in enumerate(letters.split()):
        pitch = PITCHES[letter]
        onset = start_ms + i * spacing_ms
        msgs.append({"time_ms": onset, "kind": "on", "pitch": pitch, "velocity": 80})
        msgs.append({"time_ms": onset + duration_ms, "kind": "off", "pitch": pitch, "velocity": 0})
    return sorted(msgs, key=lambda m: m["time_ms"])


@pytest.fixture
def client(tmp_path):
    app = create_app(tmp_path, token_secret=SECRET)
    with TestClient(app) as c:
        yield c


@pytest.fixture
def analyst():
    return {"Authorization": f"Bearer {make_token(SECRET, 'analyst')}"}


def participant_headers(pid: str) -> dict:
    return {"Authorization": f"Bearer {make_token(SECRET, 'participant', pid)}"}


def import_song(client, analyst, letters="C D E F G A B C D E", song_id="etude"):
    resp = client.post(f"/songs?id={song_id}", content=song_bytes(letters), headers=analyst)
    assert resp.status_code == 200, resp.text
    return resp.json()


# --- auth ---------------------------------------------------------------------

def test_unauthenticated_rejected(client, tmp_path):
    assert client.get("/songs").status_code == 401
    resp = client.post("/participants/p1/performances", json={})
    assert resp.status_code == 401
    assert not (tmp_path / "sessions.log").exists()  # nothing reached storage


def test_participant_cannot_touch_others(client, analyst):
    import_song(client, analyst)
    body = {"song_id": "etude", "kind": "pre_test", "day": 1,
            "messages": messages_for("C D E")}
    resp = client.post("/participants/p2/performances", json=body,
                       headers=participant_headers("p1"))
    assert resp.status_code == 403


def test_participant_cannot_read_assignments(client):
    resp = client.get("/study/assignments", headers=participant_headers("p1"))
    assert resp.status_code == 403


def test_bogus_token_rejected(client):
    resp = client.get("/songs", headers={"Authorization": "Bearer p1.deadbeef"})
    assert resp.status_code == 401


# --- songs ---------------------------------------------------------------------

def test_import_and_fetch_song(client, analyst):
    info = import_song(client, analyst)
    assert info["id"] == "etude"
    assert info["events"] == 10
    got = client.get("/songs/etude", headers=participant_headers("p1"))
    assert got.status_code == 200
    events = got.json()["events"]
    assert len(events) == 10
    assert events[0]["pitch"] == PITCHES["C"]
    assert client.get("/songs/missing", headers=analyst).status_code == 404
    assert client.get("/songs", headers=analyst).json()["songs"] == ["etude"]


# --- performance pipeline ---------------------------------------------------------

def test_perfect_replay_scores_100(client, analyst):
    import_song(client, analyst)
    body = {"song_id": "etude", "kind": "pre_test", "day": 1,
            "messages": messages_for("C D E F G A B C D E")}
    resp = client.post("/participants/p1/performances", json=body,
                       headers=participant_headers("p1"))
    assert resp.status_code == 200, resp.text
    report = resp.json()["report"]
    assert report["score"] == 100.0
    assert report["score_display"] == "100"
    assert report["alignment_cost"] == 0.0
    assert report["timing_cost"] == 0


def test_worked_error_sequence_costs_3(client, analyst):
    import_song(client, analyst, letters="C B B A E E F C", song_id="worked")
    body = {"song_id": "worked", "kind": "pre_test", "day": 1,
            "messages": messages_for("C B A E C F C C")}
    resp = client.post("/participants/p1/performances", json=body,
                       headers=participant_headers("p1"))
    assert resp.status_code == 200, resp.text
    report = resp.json()["report"]
    assert report["alignment_cost"] == 3.0
    assert report["op_counts"]["deletion"] == 1
    assert report["op_counts"]["substitution"] == 1
    assert report["op_counts"]["insertion"] == 1


def test_empty_performance_rejected_and_not_stored(client, analyst, tmp_path):
    import_song(client, analyst)
    body = {"song_id": "etude", "kind": "pre_test", "day": 1, "messages": []}
    resp = client.post("/participants/p1/performances", json=body,
                       headers=participant_headers("p1"))
    assert resp.status_code == 400
    assert resp.json()["detail"]["error"] == "EmptyPerformance"
    assert not (tmp_path / "sessions.log").exists()


def test_unknown_song_rejected(client, analyst):
    body = {"song_id": "nope", "kind": "pre_test", "day": 1,
            "messages": messages_for("C")}
    resp = client.post("/participants/p1/performances", json=body,
                       headers=participant_headers("p1"))
    assert resp.status_code == 404


def test_duplicate_submission_conflicts(client, analyst):
    import_song(client, analyst)
    body = {"song_id": "etude", "kind": "post_test", "day": 2,
            "messages": messages_for("C D E F G A B C D E")}
    headers = participant_headers("p1")
    assert client.post("/participants/p1/performances", json=body, headers=headers).status_code == 200
    resp = client.post("/participants/p1/performances", json=body, headers=headers)
    assert resp.status_code == 409
    assert resp.json()["detail"]["error"] == "DuplicateSession"


def test_pipeline_determinism_byte_identical(client, analyst):
    import_song(client, analyst)
    headers = participant_headers("p1")
    reports = []
    for day in (1, 2):
        body = {"song_id": "etude", "kind": "pre_test", "day": day,
                "messages": messages_for("C D E F G A B C D C")}
        resp = client.post("/participants/p1/performances", json=body, headers=headers)
        reports.append(canonical_json(resp.json()["report"]))
    assert reports[0] == reports[1]


def test_progress_endpoint(client, analyst):
    import_song(client, analyst)
    headers = participant_headers("p1")
    perfect = messages_for("C D E F G A B C D E")
    flawed = messages_for("C D E F G A B C D C")
    for day, kind, msgs in ((1, "pre_test", flawed), (1, "post_test", perfect)):
        body = {"song_id": "etude", "kind": kind, "day": day, "messages": msgs}
        assert client.post("/participants/p1/performances", json=body, headers=headers).status_code == 200
    resp = client.get("/participants/p1/progress", headers=headers)
    points = resp.json()["points"]
    assert len(points) == 1
    assert points[0]["day"] == 1
    assert points[0]["active_delta"] > 0


# --- capture sessions ---------------------------------------------------------------

def test_capture_lifecycle(client, analyst):
    import_song(client, analyst)
    headers = participant_headers("p1")
    start = {"song_id": "etude", "kind": "pre_test", "day": 3}
    assert client.post("/participants/p1/capture", json=start, headers=headers).status_code == 200
    # only one live capture at a time
    assert client.post("/participants/p1/capture", json=start, headers=headers).status_code == 409
    msgs = messages_for("C D E F G A B C D E")
    half = len(msgs) // 2
    client.post("/participants/p1/capture/events", json={"messages": msgs[:half]}, headers=headers)
    client.post("/participants/p1/capture/events", json={"messages": msgs[half:]}, headers=headers)
    resp = client.post("/participants/p1/capture/submit", headers=headers)
    assert resp.status_code == 200
    assert resp.json()["report"]["score"] == 100.0
    # capture is closed after submit
    assert client.post("/participants/p1/capture/submit", headers=headers).status_code == 404


def test_capture_discard(client, analyst):
    import_song(client, analyst)
    headers = participant_headers("p1")
    client.post("/participants/p1/capture", json={"song_id": "etude"}, headers=headers)
    resp = client.delete("/participants/p1/capture", headers=headers)
    assert resp.json()["discarded"] is True


# --- passive sessions and blinding -----------------------------------------------------

def seed_assignments(client, analyst, team="t1"):
    improvements = {f"p{i}": float(i) for i in range(1, 9)}
    resp = client.post("/study/assignments",
                       json={"team_id": team, "improvements": improvements, "seed": 4},
                       headers=analyst)
    assert resp.status_code == 200
    return resp.json()["assignments"]


def test_passive_session_flags_and_condition(client, analyst):
    import_song(client, analyst)
    rows = seed_assignments(client, analyst)
    pid = rows[0]["participant_id"]
    headers = participant_headers(pid)
    body = {"kind": "passive", "song_id": "etude", "day": 1, "duration_minutes": 150.0}
    resp = client.post(f"/participants/{pid}/sessions", json=body, headers=headers)
    assert resp.status_code == 200
    assert resp.json()["flags"] == []
    short = {"kind": "passive", "song_id": "etude", "day": 2, "duration_minutes": 90.0}
    resp = client.post(f"/participants/{pid}/sessions", json=short, headers=headers)
    assert "incomplete" in resp.json()["flags"]

    # participants never see the condition; analysts do
    listing = client.get(f"/participants/{pid}/sessions", headers=headers).json()["sessions"]
    assert all("glove_condition" not in r for r in listing)
    analyst_listing = client.get(f"/participants/{pid}/sessions", headers=analyst).json()["sessions"]
    assert all(r["glove_condition"] in ("functional", "sham") for r in analyst_listing)
    expected = next(r["glove"] for r in rows if r["participant_id"] == pid and r["period"] == 1)
    assert analyst_listing[0]["glove_condition"] == expected


def test_no_participant_payload_mentions_condition(client, analyst):
    import_song(client, analyst)
    seed_assignments(client, analyst)
    headers = participant_headers("p1")
    body = {"song_id": "etude", "kind": "pre_test", "day": 1,
            "messages": messages_for("C D E F G A B C D E")}
    for resp in (
        client.post("/participants/p1/performances", json=body, headers=headers),
        client.get("/participants/p1/sessions", headers=headers),
        client.get("/participants/p1/progress", headers=headers),
        client.get("/songs/etude", headers=headers),
    ):
        assert resp.status_code == 200
        text = resp.text.lower()
        assert "sham" not in text
        assert "glove_condition" not in text


# --- device proxy -------------------------------------------------------------------

def test_fresh_device_status(client, analyst):
    headers = participant_headers("p1")
    resp = client.post("/gloves/p1", json={"time_scale": 0.0}, headers=headers)
    assert resp.status_code == 200
    status = resp.json()
    assert status["battery_pct"] == 100.0
    assert status["playback"] == "idle"


def test_device_upload_start_status(client, analyst):
    import_song(client, analyst)
    headers = participant_headers("p1")
    client.post("/gloves/p1", json={"time_scale": 0.0}, headers=headers)
    up = client.post("/gloves/p1/commands",
                     json={"command": "upload_schedule", "song_id": "etude", "minutes": 150},
                     headers=headers)
    assert up.status_code == 200
    start = client.post("/gloves/p1/commands", json={"command": "start"}, headers=headers)
    assert start.status_code == 200
    client.post("/gloves/p1/commands", json={"command": "advance", "advance_ms": 5_000},
                headers=headers)
    status = client.post("/gloves/p1/commands", json={"command": "status"}, headers=headers).json()
    assert status["playback"] == "playing"
    assert status["position_ms"] > 0
    client.post("/gloves/p1/commands", json={"command": "advance", "advance_ms": 5_000},
                headers=headers)
    later = client.post("/gloves/p1/commands", json={"command": "status"}, headers=headers).json()
    assert later["position_ms"] > status["position_ms"]


def test_upload_while_playing_is_busy(client, analyst):
    import_song(client, analyst)
    headers = participant_headers("p1")
    client.post("/gloves/p1", json={"time_scale": 0.0}, headers=headers)
    client.post("/gloves/p1/commands",
                json={"command": "upload_schedule", "song_id": "etude"}, headers=headers)
    client.post("/gloves/p1/commands", json={"command": "start"}, headers=headers)
    client.post("/gloves/p1/commands", json={"command": "advance", "advance_ms": 1_000},
                headers=headers)
    resp = client.post("/gloves/p1/commands",
                       json={"command": "upload_schedule", "song_id": "etude"}, headers=headers)
    assert resp.status_code == 409
    assert resp.json()["detail"]["error"] == "DeviceBusy"


def test_commands_without_device(client):
    headers = participant_headers("p1")
    resp = client.post("/gloves/p1/commands", json={"command": "status"}, headers=headers)
    assert resp.status_code == 404
    assert resp.json()["detail"]["error"] == "NoDevice"


def test_device_status_never_reveals_sham(client, analyst):
    import_song(client, analyst)
    rows = seed_assignments(client, analyst)
    sham_pid = next(r["participant_id"] for r in rows if r["period"] == 1 and r["glove"] == "sham")
    headers = participant_headers(sham_pid)
    client.post(f"/gloves/{sham_pid}", json={"time_scale": 0.0}, headers=headers)
    resp = client.post(f"/gloves/{sham_pid}/commands",
                       json={"command": "upload_schedule", "song_id": "etude", "day": 1},
                       headers=headers)
    assert resp.status_code == 200
    assert "sham" not in resp.text.lower()


# --- study assignments ------------------------------------------------------------------

def test_assignments_balanced_and_analyst_only(client, analyst):
    rows = seed_assignments(client, analyst)
    assert len(rows) == 16
    period1 = [r for r in rows if r["period"] == 1]
    from collections import Counter
    cells = Counter((r["song"], r["glove"]) for r in period1)
    assert sorted(cells.values()) == [2, 2, 2, 2]
    fetched = client.get("/study/assignments?team_id=t1", headers=analyst).json()["assignments"]
    assert fetched == rows
