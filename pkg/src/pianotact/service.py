"""HTTP service fronting songs, evaluation, session records, devices, and
study data.

Plain JSON over HTTP with static bearer tokens in two roles. Participants
can only touch their own resources and never see glove conditions; the
analyst role sees everything. Token scheme (documented in the README):

    participant token:  "<participant_id>." + sha256(secret:participant:<id>)[:32]
    analyst token:      "analyst."          + sha256(secret:analyst:)[:32]

The secret comes from the PIANOTACT_TOKEN_SECRET environment variable
unless passed explicitly.
"""

from __future__ import annotations

import hashlib
import hmac
import math
import os
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from fastapi import Depends, FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from . import errors
from .analytics import metric_by_condition, anova_f, permutation_test, progress_points
from .glove import PairRunner
from .haptics import HapticConfig, assign_fingers, compile_schedule
from .library import SongLibrary
from .midi import NoteMessage, capture_events, note_event_to_dict
from .scoring import EvalConfig, evaluate_performance, report_to_dict
from .store import AssignmentStore, SessionRecord, SessionStore, record_to_dict
from .study import assign_latin_square, make_team
from .tokens import Performance, extract_chords, make_performance, rebase_times

TOKEN_SECRET_ENV = "PIANOTACT_TOKEN_SECRET"
DEFAULT_PERIOD_DAYS = 14


def make_token(secret: str, role: str, participant_id: str | None = None) -> str:
    if role == "participant":
        if not participant_id:
            raise ValueError("participant tokens need a participant id")
        basis = f"{secret}:participant:{participant_id}"
        return f"{participant_id}." + hashlib.sha256(basis.encode()).hexdigest()[:32]
    if role == "analyst":
        basis = f"{secret}:analyst:"
        return "analyst." + hashlib.sha256(basis.encode()).hexdigest()[:32]
    raise ValueError(f"role {role!r} unknown")


@dataclass
class Identity:
    role: str  # "participant" | "analyst"
    participant_id: str | None


class DeviceSession:
    """One simulated glove pair, advanced on demand.

    time_scale maps wall-clock seconds onto simulated milliseconds; 0 freezes
    the clock so tests (and fast-forwarded passive sessions) drive it with
    explicit advance commands.
    """

    def __init__(self, time_scale: float = 1.0):
        self.runner = PairRunner()
        self.time_scale = time_scale
        self._anchor_wall = time.monotonic()
        self._anchor_sim = 0.0
        self.lock = threading.Lock()

    def _catch_up(self) -> None:
        if self.time_scale <= 0:
            return
        target = self._anchor_sim + (time.monotonic() - self._anchor_wall) * 1000.0 * self.time_scale
        if target > self.runner.now:
            self.runner.advance_to(target)

    def advance_by(self, sim_ms: float) -> None:
        self._catch_up()
        self.runner.advance_to(self.runner.now + sim_ms)
        self._anchor_wall = time.monotonic()
        self._anchor_sim = self.runner.now

    def status(self) -> dict:
        self._catch_up()
        info = self.runner.status()
        return {
            "battery_pct": info["battery_pct"],
            "playback": info["playback"],
            "position_ms": info["position_ms"],
            "completed": info["completed"],
        }


# --- request bodies ---------------------------------------------------------

class MessageBody(BaseModel):
    time_ms: int
    kind: str
    pitch: int
    velocity: int = 64


class PerformanceBody(BaseModel):
    song_id: str
    kind: str = "practice"  # pre_test | practice | post_test
    day: int = 1
    messages: list[MessageBody]
    config: dict = Field(default_factory=dict)
    started_at: str = ""
    ended_at: str = ""


class CaptureStartBody(BaseModel):
    song_id: str
    kind: str = "practice"
    day: int = 1
    config: dict = Field(default_factory=dict)


class CaptureEventsBody(BaseModel):
    messages: list[MessageBody]


class PassiveSessionBody(BaseModel):
    kind: str = "passive"
    song_id: str
    day: int = 1
    duration_minutes: float
    started_at: str = ""
    ended_at: str = ""
    glove_condition: str | None = None  # analyst override only
    flags: list[str] = Field(default_factory=list)


class DeviceCommandBody(BaseModel):
    command: str  # upload_schedule | start | stop | status | advance
    song_id: str | None = None
    minutes: int = 150
    day: int = 1
    advance_ms: float = 0.0
    time_scale: float | None = None


class ProvisionBody(BaseModel):
    time_scale: float = 1.0


class AssignTeamBody(BaseModel):
    team_id: str
    improvements: dict[str, float]
    seed: int = 0


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


def _http_error(status: int, name: str, message: str) -> HTTPException:
    return HTTPException(status_code=status, detail={"error": name, "message": message})


def create_app(data_dir: str | Path, token_secret: str | None = None) -> FastAPI:
    secret = token_secret or os.environ.get(TOKEN_SECRET_ENV)
    if not secret:
        raise RuntimeError(f"set {TOKEN_SECRET_ENV} or pass token_secret explicitly")

    data_dir = Path(data_dir)
    app = FastAPI(title="pianotact", version="0.1.0")
    # the browser client is served as static files from another origin;
    # auth is bearer-token only (no cookies), so a permissive policy is fine
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    library = SongLibrary(data_dir)
    sessions = SessionStore(data_dir / "sessions.log")
    assignments = AssignmentStore(data_dir / "assignments.log")
    devices: dict[str, DeviceSession] = {}
    captures: dict[str, dict] = {}
    store_lock = threading.Lock()
    analyst_token = make_token(secret, "analyst")

    def authenticate(request: Request) -> Identity:
        header = request.headers.get("Authorization", "")
        if not header.startswith("Bearer "):
            raise _http_error(401, "Unauthenticated", "missing bearer token")
        token = header[len("Bearer "):].strip()
        if hmac.compare_digest(token, analyst_token):
            return Identity(role="analyst", participant_id=None)
        prefix, _, _ = token.partition(".")
        if prefix and prefix != "analyst":
            expected = make_token(secret, "participant", prefix)
            if hmac.compare_digest(token, expected):
                return Identity(role="participant", participant_id=prefix)
        raise _http_error(401, "Unauthenticated", "invalid token")

    def require_self_or_analyst(identity: Identity, participant_id: str) -> None:
        if identity.role == "analyst":
            return
        if identity.participant_id != participant_id:
            raise _http_error(403, "Forbidden", "token does not cover this participant")

    def require_analyst(identity: Identity) -> None:
        if identity.role != "analyst":
            raise _http_error(403, "Forbidden", "analyst role required")

    def condition_for(participant_id: str, day: int) -> str:
        row = assignments.condition_on_day(participant_id, day, DEFAULT_PERIOD_DAYS)
        return row["glove"] if row else "none"

    def public_record(record: SessionRecord, identity: Identity) -> dict:
        d = record_to_dict(record)
        if identity.role != "analyst":
            d.pop("glove_condition", None)
        return d

    # -- songs ---------------------------------------------------------------

    @app.post("/songs")
    async def import_song(request: Request, identity: Identity = Depends(authenticate)):
        require_analyst(identity)
        body = await request.body()
        if not body:
            raise _http_error(400, "EmptyBody", "expected SMF bytes")
        song_id = request.query_params.get("id", "")
        title = request.query_params.get("title", "")
        try:
            song = library.import_smf(body, song_id=song_id, title=title)
        except (errors.MalformedHeader, errors.UnsupportedFormat) as exc:
            raise _http_error(400, type(exc).__name__, str(exc))
        return {"id": song.id, "title": song.title, "events": len(song.events),
                "span_ms": song.span_ms, "warnings": song.warnings}

    @app.get("/songs")
    def list_songs(identity: Identity = Depends(authenticate)):
        return {"songs": library.list_ids()}

    @app.get("/songs/{song_id}")
    def get_song(song_id: str, identity: Identity = Depends(authenticate)):
        try:
            song = library.get(song_id)
        except errors.UnknownSong as exc:
            raise _http_error(404, "UnknownSong", str(exc))
        return {
            "id": song.id,
            "title": song.title,
            "ppq": song.ppq,
            "span_ms": song.span_ms,
            "events": [note_event_to_dict(e) for e in song.events],
        }

    # -- performance submission ----------------------------------------------

    def run_eval(song_id: str, messages: list[MessageBody], config: dict):
        try:
            song = library.get(song_id)
        except errors.UnknownSong as exc:
            raise _http_error(404, "UnknownSong", str(exc))
        note_messages = [NoteMessage(m.time_ms, m.kind, m.pitch, m.velocity) for m in messages]
        events = capture_events(note_messages)
        if not events:
            raise _http_error(400, "EmptyPerformance", "no note events in submission")
        cfg = EvalConfig.from_dict(config)
        ref = Performance(tuple(extract_chords(song.events, cfg.chord_window_ms)), source="reference")
        perf = make_performance(events, source="test", chord_window_ms=cfg.chord_window_ms)
        perf = rebase_times(perf, ref)
        report = evaluate_performance(ref, perf, cfg)
        return report, perf, ref

    @app.post("/participants/{participant_id}/performances")
    def submit_performance(
        participant_id: str,
        body: PerformanceBody,
        identity: Identity = Depends(authenticate),
    ):
        require_self_or_analyst(identity, participant_id)
        if body.kind not in ("pre_test", "practice", "post_test"):
            raise _http_error(400, "BadKind", f"kind {body.kind!r} not submittable here")
        report, perf, ref = run_eval(body.song_id, body.messages, body.config)
        record = SessionRecord(
            participant_id=participant_id,
            day=body.day,
            kind=body.kind,
            song_ref=body.song_id,
            glove_condition=condition_for(participant_id, body.day),
            performance=perf,
            eval=report,
            started_at=body.started_at or _now_iso(),
            ended_at=body.ended_at or _now_iso(),
        )
        with store_lock:
            try:
                record_id = sessions.record_session(record)
            except errors.DuplicateSession as exc:
                raise _http_error(409, "DuplicateSession", str(exc))
        return {
            "record_id": record_id,
            "report": report_to_dict(report, list(ref.tokens), list(perf.tokens)),
        }

    # -- live capture sessions -------------------------------------------------

    @app.post("/participants/{participant_id}/capture")
    def start_capture(
        participant_id: str,
        body: CaptureStartBody,
        identity: Identity = Depends(authenticate),
    ):
        require_self_or_analyst(identity, participant_id)
        if participant_id in captures:
            raise _http_error(409, "SessionAlreadyActive", "a live capture is already open")
        if not library.exists(body.song_id):
            raise _http_error(404, "UnknownSong", f"song {body.song_id!r} is not in the library")
        captures[participant_id] = {
            "song_id": body.song_id,
            "kind": body.kind,
            "day": body.day,
            "config": body.config,
            "messages": [],
            "started_at": _now_iso(),
        }
        return {"state": "capturing", "song_id": body.song_id, "kind": body.kind}

    @app.post("/participants/{participant_id}/capture/events")
    def append_capture(
        participant_id: str,
        body: CaptureEventsBody,
        identity: Identity = Depends(authenticate),
    ):
        require_self_or_analyst(identity, participant_id)
        if participant_id not in captures:
            raise _http_error(404, "NoCapture", "no live capture open")
        captures[participant_id]["messages"].extend(body.messages)
        return {"buffered": len(captures[participant_id]["messages"])}

    @app.post("/participants/{participant_id}/capture/submit")
    def submit_capture(participant_id: str, identity: Identity = Depends(authenticate)):
        require_self_or_analyst(identity, participant_id)
        capture = captures.pop(participant_id, None)
        if capture is None:
            raise _http_error(404, "NoCapture", "no live capture open")
        body = PerformanceBody(
            song_id=capture["song_id"],
            kind=capture["kind"],
            day=capture["day"],
            messages=capture["messages"],
            config=capture["config"],
            started_at=capture["started_at"],
            ended_at=_now_iso(),
        )
        return submit_performance(participant_id, body, identity)

    @app.delete("/participants/{participant_id}/capture")
    def discard_capture(participant_id: str, identity: Identity = Depends(authenticate)):
        require_self_or_analyst(identity, participant_id)
        capture = captures.pop(participant_id, None)
        return {"discarded": capture is not None}

    # -- passive sessions & progress -------------------------------------------

    @app.post("/participants/{participant_id}/sessions")
    def log_passive_session(
        participant_id: str,
        body: PassiveSessionBody,
        identity: Identity = Depends(authenticate),
    ):
        require_self_or_analyst(identity, participant_id)
        if body.kind != "passive":
            raise _http_error(400, "BadKind", "only passive sessions are logged here")
        condition = condition_for(participant_id, body.day)
        if identity.role == "analyst" and body.glove_condition:
            condition = body.glove_condition
        if condition == "none":
            condition = "functional"
        record = SessionRecord(
            participant_id=participant_id,
            day=body.day,
            kind="passive",
            song_ref=body.song_id,
            glove_condition=condition,
            duration_minutes=body.duration_minutes,
            started_at=body.started_at or _now_iso(),
            ended_at=body.ended_at or _now_iso(),
            flags=list(body.flags),
        )
        with store_lock:
            try:
                record_id = sessions.record_session(record)
            except errors.DuplicateSession as exc:
                raise _http_error(409, "DuplicateSession", str(exc))
        stored = sessions.get(record_id)
        return {"record_id": record_id, "flags": stored.flags}

    @app.get("/participants/{participant_id}/sessions")
    def list_sessions(participant_id: str, identity: Identity = Depends(authenticate)):
        require_self_or_analyst(identity, participant_id)
        records = sessions.find(participant_id=participant_id)
        return {"sessions": [public_record(r, identity) for r in records]}

    @app.get("/participants/{participant_id}/progress")
    def participant_progress(participant_id: str, identity: Identity = Depends(authenticate)):
        require_self_or_analyst(identity, participant_id)
        points = progress_points(sessions, participant_id)
        tests = [
            {"day": r.day, "kind": r.kind, "song_id": r.song_ref, "score": r.eval.score}
            for r in sessions.find(participant_id=participant_id)
            if r.kind in ("pre_test", "post_test") and r.eval is not None
        ]
        return {
            "participant_id": participant_id,
            "points": [
                {"day": p.day, "active_delta": p.active_delta, "passive_delta": p.passive_delta}
                for p in points
            ],
            "tests": tests,
        }

    # -- device proxy -----------------------------------------------------------

    @app.post("/gloves/{participant_id}/commands")
    def glove_command(
        participant_id: str,
        body: DeviceCommandBody,
        identity: Identity = Depends(authenticate),
    ):
        require_self_or_analyst(identity, participant_id)
        device = devices.get(participant_id)
        if body.command == "upload_schedule":
            if body.song_id is None:
                raise _http_error(400, "BadCommand", "upload_schedule needs song_id")
            if device is None:
                device = DeviceSession(time_scale=body.time_scale if body.time_scale is not None else 1.0)
                devices[participant_id] = device
            with device.lock:
                if device.runner.master.playback == "playing":
                    raise _http_error(409, "DeviceBusy", "cannot upload during playback")
                try:
                    song = library.get(body.song_id)
                except errors.UnknownSong as exc:
                    raise _http_error(404, "UnknownSong", str(exc))
                fingered = _ensure_fingering(song)
                sham = condition_for(participant_id, body.day) == "sham"
                try:
                    schedule = compile_schedule(fingered, body.minutes, HapticConfig(), sham=sham)
                except errors.SongLongerThanSession as exc:
                    raise _http_error(400, "SongLongerThanSession", str(exc))
                device.runner.upload(schedule)
                return device.status()
        if device is None:
            raise _http_error(404, "NoDevice", "no simulated glove pair provisioned")
        with device.lock:
            if body.command == "start":
                if device.runner.master.schedule is None:
                    raise _http_error(409, "StartWithoutSchedule", "upload a schedule first")
                device.runner.start()
                return device.status()
            if body.command == "stop":
                device.runner.stop()
                return device.status()
            if body.command == "status":
                return device.status()
            if body.command == "advance":
                device.advance_by(body.advance_ms)
                return device.status()
        raise _http_error(400, "BadCommand", f"command {body.command!r} unknown")

    @app.post("/gloves/{participant_id}")
    def provision_device(
        participant_id: str,
        body: ProvisionBody | None = None,
        identity: Identity = Depends(authenticate),
    ):
        require_self_or_analyst(identity, participant_id)
        if participant_id in devices:
            raise _http_error(409, "DeviceBusy", "device already provisioned")
        scale = body.time_scale if body is not None else 1.0
        devices[participant_id] = DeviceSession(time_scale=scale)
        return devices[participant_id].status()

    # -- study ------------------------------------------------------------------

    @app.post("/study/assignments")
    def create_assignments(body: AssignTeamBody, identity: Identity = Depends(authenticate)):
        require_analyst(identity)
        try:
            team = make_team(body.team_id, body.improvements)
        except (errors.MalformedTeam, errors.OddCount) as exc:
            raise _http_error(400, type(exc).__name__, str(exc))
        rows = [a.to_dict() for a in assign_latin_square(team, body.seed)]
        assignments.add(rows)
        return {"assignments": rows}

    @app.get("/study/assignments")
    def list_assignments(identity: Identity = Depends(authenticate), team_id: str | None = None):
        require_analyst(identity)
        rows = assignments.for_team(team_id) if team_id else assignments.all()
        return {"assignments": rows}

    # -- stats -------------------------------------------------------------------

    @app.get("/stats/compare")
    def stats_compare(
        identity: Identity = Depends(authenticate),
        metric: str = "passive_retention",
        groups: str = "functional,sham",
        iterations: int = 10_000,
        seed: int = 0,
    ):
        require_analyst(identity)
        names = [g.strip() for g in groups.split(",") if g.strip()]
        collected = metric_by_condition(sessions, metric, names)
        result: dict = {"metric": metric, "groups": {n: collected[n] for n in names}}
        try:
            values = [collected[n] for n in names]
            if len(names) == 2:
                result["permutation_p"] = permutation_test(
                    values[0], values[1], iterations=iterations, seed=seed
                )
            f, p = anova_f(values)
            # JSON cannot carry +inf (the zero-within-variance sentinel)
            result["anova_f"] = f if math.isfinite(f) else None
            result["anova_f_infinite"] = not math.isfinite(f)
            result["anova_p"] = p
        except (errors.EmptyGroup, errors.DegenerateGroups) as exc:
            result["error"] = {"error": type(exc).__name__, "message": str(exc)}
        return result

    @app.get("/health")
    def health():
        return {"status": "ok"}

    return app


def _ensure_fingering(song):
    if all(e.hand is not None and e.finger is not None for e in song.events):
        return song
    return assign_fingers(song)
