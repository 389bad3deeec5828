"""Crossover study machinery: skill pairing and Latin-square counterbalancing.

Participants enroll in teams of eight (four skill-matched pairs). In period
1 each of the four (song, glove) conditions covers exactly two participants;
pair partners share a song and get opposite gloves. Period 2 flips both the
song and the glove for everyone.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace

from .errors import AlreadyPeriod2, MalformedTeam, OddCount

SONGS = ("A", "B")
GLOVES = ("functional", "sham")
TEAM_SIZE = 8


@dataclass(frozen=True)
class ConditionAssignment:
    participant_id: str
    team_id: str
    period: int  # 1 | 2
    song: str    # "A" | "B"
    glove: str   # "functional" | "sham"

    def __post_init__(self) -> None:
        if self.period not in (1, 2):
            raise ValueError(f"period {self.period} must be 1 or 2")
        if self.song not in SONGS:
            raise ValueError(f"song {self.song!r} must be one of {SONGS}")
        if self.glove not in GLOVES:
            raise ValueError(f"glove {self.glove!r} must be one of {GLOVES}")

    def to_dict(self) -> dict:
        return {
            "participant_id": self.participant_id,
            "team_id": self.team_id,
            "period": self.period,
            "song": self.song,
            "glove": self.glove,
        }


@dataclass(frozen=True)
class Team:
    team_id: str
    pairs: tuple[tuple[str, str], ...]

    def __post_init__(self) -> None:
        members = [m for pair in self.pairs for m in pair]
        if len(members) != TEAM_SIZE or len(set(members)) != TEAM_SIZE:
            raise MalformedTeam("a team is four pairs of distinct participants")

    @property
    def members(self) -> list[str]:
        return [m for pair in self.pairs for m in pair]


def pair_participants(improvements: dict[str, float]) -> list[tuple[str, str]]:
    """Pair by skill: rank on pre-study improvement, pair adjacent ranks.

    Ties break on participant id so the pairing is stable across runs.
    """
    if len(improvements) % 2 != 0:
        raise OddCount(f"cannot pair {len(improvements)} participants")
    ranked = sorted(improvements, key=lambda p: (improvements[p], p))
    return [(ranked[i], ranked[i + 1]) for i in range(0, len(ranked), 2)]


def make_team(team_id: str, improvements: dict[str, float]) -> Team:
    if len(improvements) != TEAM_SIZE:
        raise MalformedTeam(f"team needs exactly {TEAM_SIZE} participants, got {len(improvements)}")
    return Team(team_id=team_id, pairs=tuple(pair_participants(improvements)))


def crossover(assignment: ConditionAssignment) -> ConditionAssignment:
    """Second-period assignment: flip both song and glove."""
    if assignment.period != 1:
        raise AlreadyPeriod2("crossover applies to period-1 assignments only")
    return replace(
        assignment,
        period=2,
        song="B" if assignment.song == "A" else "A",
        glove="sham" if assignment.glove == "functional" else "functional",
    )


def assign_latin_square(team: Team, seed: int) -> list[ConditionAssignment]:
    """Counterbalanced assignment for one team of eight.

    A seeded shuffle decides which pairs start on which song and which
    partner starts functional; the crossover rule generates period 2.
    Every period-1 (song, glove) cell ends up with exactly two participants.
    """
    if len(team.pairs) != 4:
        raise MalformedTeam("team must contain four pairs")
    rng = random.Random(seed)
    pair_order = list(team.pairs)
    rng.shuffle(pair_order)
    period1: list[ConditionAssignment] = []
    for idx, pair in enumerate(pair_order):
        song = "A" if idx < 2 else "B"
        partners = list(pair)
        rng.shuffle(partners)
        period1.append(ConditionAssignment(partners[0], team.team_id, 1, song, "functional"))
        period1.append(ConditionAssignment(partners[1], team.team_id, 1, song, "sham"))
    period2 = [crossover(a) for a in period1]
    return period1 + period2
