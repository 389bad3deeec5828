"""Durable session and assignment records.

Both stores are append-only JSON-lines logs with an in-memory index
rebuilt on load. Records serialize canonically (sorted keys, no spaces),
so a retrieved record reserializes byte-identical to its stored line.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import DuplicateSession, MissingEval
from .scoring import EvalReport, report_from_dict, report_to_dict
from .tokens import Performance, performance_from_dict, performance_to_dict

KINDS = ("pre_test", "practice", "post_test", "passive")
CONDITIONS = ("functional", "sham", "none")

PASSIVE_TARGET_MINUTES = 150
PASSIVE_TOLERANCE_MINUTES = 5


@dataclass
class SessionRecord:
    participant_id: str
    day: int
    kind: str
    song_ref: str
    glove_condition: str = "none"
    performance: Performance | None = None
    eval: EvalReport | None = None
    started_at: str = ""
    ended_at: str = ""
    duration_minutes: float | None = None
    flags: list[str] = field(default_factory=list)
    record_id: str | None = None

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"kind {self.kind!r} unknown")
        if self.glove_condition not in CONDITIONS:
            raise ValueError(f"glove_condition {self.glove_condition!r} unknown")
        if self.day < 1:
            raise ValueError("day must be >= 1")
        if self.kind in ("pre_test", "post_test"):
            if self.performance is None or self.eval is None:
                raise MissingEval(f"{self.kind} records require a performance and its evaluation")
        if self.kind == "passive" and self.glove_condition == "none":
            raise ValueError("passive records require a glove condition")

    def key(self) -> tuple[str, int, str, str]:
        return (self.participant_id, self.day, self.kind, self.song_ref)

    @property
    def score(self) -> float | None:
        return self.eval.score if self.eval is not None else None


def record_to_dict(r: SessionRecord) -> dict:
    return {
        "record_id": r.record_id,
        "participant_id": r.participant_id,
        "day": r.day,
        "kind": r.kind,
        "song_ref": r.song_ref,
        "glove_condition": r.glove_condition,
        "performance": performance_to_dict(r.performance) if r.performance else None,
        "eval": report_to_dict(r.eval) if r.eval else None,
        "started_at": r.started_at,
        "ended_at": r.ended_at,
        "duration_minutes": r.duration_minutes,
        "flags": list(r.flags),
    }


def record_from_dict(d: dict) -> SessionRecord:
    return SessionRecord(
        record_id=d.get("record_id"),
        participant_id=d["participant_id"],
        day=d["day"],
        kind=d["kind"],
        song_ref=d["song_ref"],
        glove_condition=d.get("glove_condition", "none"),
        performance=performance_from_dict(d["performance"]) if d.get("performance") else None,
        eval=report_from_dict(d["eval"]) if d.get("eval") else None,
        started_at=d.get("started_at", ""),
        ended_at=d.get("ended_at", ""),
        duration_minutes=d.get("duration_minutes"),
        flags=list(d.get("flags", [])),
    )


def canonical_json(d: dict) -> str:
    return json.dumps(d, sort_keys=True, separators=(",", ":"))


def _passive_flags(duration_minutes: float | None) -> list[str]:
    if duration_minutes is None:
        return ["incomplete"]
    if duration_minutes < PASSIVE_TARGET_MINUTES - PASSIVE_TOLERANCE_MINUTES:
        return ["incomplete"]
    if duration_minutes > PASSIVE_TARGET_MINUTES + PASSIVE_TOLERANCE_MINUTES:
        return ["overrun"]
    return []


class SessionStore:
    """Append-only session log; one canonical JSON record per line."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._records: list[SessionRecord] = []
        self._by_key: dict[tuple, SessionRecord] = {}
        self._by_id: dict[str, SessionRecord] = {}
        if self.path.exists():
            for line in self.path.read_text().splitlines():
                if not line.strip():
                    continue
                rec = record_from_dict(json.loads(line))
                self._index(rec)

    def _index(self, rec: SessionRecord) -> None:
        self._records.append(rec)
        self._by_key[rec.key()] = rec
        if rec.record_id:
            self._by_id[rec.record_id] = rec

    def record_session(self, record: SessionRecord) -> str:
        """Validate, flag, assign an id, and append the record durably."""
        record.validate()
        if record.key() in self._by_key:
            p, d, k, s = record.key()
            raise DuplicateSession(f"{k} for participant {p} day {d} song {s} already recorded")
        rec = replace(record, flags=list(record.flags))
        if rec.kind == "passive":
            for flag in _passive_flags(rec.duration_minutes):
                if flag not in rec.flags:
                    rec.flags.append(flag)
        rec.record_id = f"s{len(self._records) + 1:06d}"
        line = canonical_json(record_to_dict(rec))
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a") as fh:
            fh.write(line + "\n")
            fh.flush()
        self._index(rec)
        return rec.record_id

    def get(self, record_id: str) -> SessionRecord | None:
        return self._by_id.get(record_id)

    def find(
        self,
        participant_id: str | None = None,
        day: int | None = None,
        kind: str | None = None,
        song_ref: str | None = None,
    ) -> list[SessionRecord]:
        out = []
        for r in self._records:
            if participant_id is not None and r.participant_id != participant_id:
                continue
            if day is not None and r.day != day:
                continue
            if kind is not None and r.kind != kind:
                continue
            if song_ref is not None and r.song_ref != song_ref:
                continue
            out.append(r)
        return out

    def one(self, participant_id: str, day: int, kind: str, song_ref: str | None = None) -> SessionRecord | None:
        matches = self.find(participant_id, day, kind, song_ref)
        return matches[0] if matches else None

    def all(self) -> list[SessionRecord]:
        return list(self._records)

    def participants(self) -> list[str]:
        return sorted({r.participant_id for r in self._records})


class AssignmentStore:
    """Append-only study assignment log."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._rows: list[dict] = []
        if self.path.exists():
            for line in self.path.read_text().splitlines():
                if line.strip():
                    self._rows.append(json.loads(line))

    def add(self, rows: list[dict]) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a") as fh:
            for row in rows:
                fh.write(canonical_json(row) + "\n")
            fh.flush()
        self._rows.extend(rows)

    def all(self) -> list[dict]:
        return list(self._rows)

    def for_participant(self, participant_id: str) -> list[dict]:
        return [r for r in self._rows if r["participant_id"] == participant_id]

    def for_team(self, team_id: str) -> list[dict]:
        return [r for r in self._rows if r["team_id"] == team_id]

    def condition_on_day(self, participant_id: str, day: int, period_days: int = 14) -> dict | None:
        """The assignment row in force on a study day (1-based)."""
        period = 1 if day <= period_days else 2
        for row in self.for_participant(participant_id):
            if row["period"] == period:
                return row
        return None
