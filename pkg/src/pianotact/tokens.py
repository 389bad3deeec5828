"""Alignment-ready token sequences: chord extraction and time rebasing.

Key presses in rapid succession merge into chord tokens compared as
unordered pitch sets; a chord's onset is the earliest onset in its run.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import EmptyPerformance
from .midi import NoteEvent

DEFAULT_CHORD_WINDOW_MS = 30


@dataclass(frozen=True)
class Token:
    kind: str  # "note" | "chord"
    pitches: frozenset[int]
    onset_ms: int

    def __post_init__(self) -> None:
        if not self.pitches:
            raise ValueError("token must contain at least one pitch")
        expected = "note" if len(self.pitches) == 1 else "chord"
        if self.kind != expected:
            raise ValueError(f"kind {self.kind!r} inconsistent with {len(self.pitches)} pitches")

    @classmethod
    def make(cls, pitches, onset_ms: int) -> "Token":
        ps = frozenset(pitches)
        return cls(kind="note" if len(ps) == 1 else "chord", pitches=ps, onset_ms=onset_ms)

    def sorted_pitches(self) -> list[int]:
        return sorted(self.pitches)


@dataclass(frozen=True)
class Performance:
    tokens: tuple[Token, ...]
    source: str = "live"  # "reference" | "live" | "test"
    session_ref: str | None = None

    def __post_init__(self) -> None:
        if self.source not in ("reference", "live", "test"):
            raise ValueError(f"source {self.source!r} unknown")
        onsets = [t.onset_ms for t in self.tokens]
        if any(b <= a for a, b in zip(onsets, onsets[1:])):
            raise ValueError("token onsets must be strictly increasing")

    @property
    def onsets(self) -> list[int]:
        return [t.onset_ms for t in self.tokens]


def group_tokens(tokens: list[Token], chord_window_ms: int = DEFAULT_CHORD_WINDOW_MS) -> list[Token]:
    """Merge runs of tokens whose onsets fall within `chord_window_ms` of the
    run's first onset. Duplicate pitches inside a run collapse to one."""
    if chord_window_ms <= 0:
        raise ValueError("chord_window_ms must be positive")
    out: list[Token] = []
    run_pitches: set[int] = set()
    run_onset = 0
    for tok in tokens:
        if not run_pitches:
            run_pitches = set(tok.pitches)
            run_onset = tok.onset_ms
        elif tok.onset_ms - run_onset <= chord_window_ms:
            run_pitches |= tok.pitches
        else:
            out.append(Token.make(run_pitches, run_onset))
            run_pitches = set(tok.pitches)
            run_onset = tok.onset_ms
    if run_pitches:
        out.append(Token.make(run_pitches, run_onset))
    return out


def extract_chords(events: list[NoteEvent], chord_window_ms: int = DEFAULT_CHORD_WINDOW_MS) -> list[Token]:
    """Tokenize onset-sorted note events, merging rapid successions into chords."""
    singles = [Token.make([e.pitch], e.onset_ms) for e in events]
    return group_tokens(singles, chord_window_ms)


def make_performance(
    events: list[NoteEvent],
    source: str = "live",
    chord_window_ms: int = DEFAULT_CHORD_WINDOW_MS,
    session_ref: str | None = None,
) -> Performance:
    return Performance(
        tokens=tuple(extract_chords(events, chord_window_ms)),
        source=source,
        session_ref=session_ref,
    )


def rebase_times(perf: Performance, ref: Performance) -> Performance:
    """Shift `perf` onsets by a constant so its first token starts with `ref`'s.

    Makes onset deltas between the two performances comparable regardless of
    when capture started. Pairwise onset differences are preserved exactly.
    """
    if not perf.tokens or not ref.tokens:
        raise EmptyPerformance("rebase_times requires non-empty performances")
    offset = ref.tokens[0].onset_ms - perf.tokens[0].onset_ms
    if offset == 0:
        return perf
    shifted = tuple(replace(t, onset_ms=t.onset_ms + offset) for t in perf.tokens)
    return replace(perf, tokens=shifted)


def token_to_dict(t: Token) -> dict:
    return {"kind": t.kind, "pitches": t.sorted_pitches(), "onset_ms": t.onset_ms}


def token_from_dict(d: dict) -> Token:
    return Token.make(d["pitches"], d["onset_ms"])


def performance_to_dict(p: Performance) -> dict:
    return {
        "tokens": [token_to_dict(t) for t in p.tokens],
        "source": p.source,
        "session_ref": p.session_ref,
    }


def performance_from_dict(d: dict) -> Performance:
    return Performance(
        tokens=tuple(token_from_dict(t) for t in d["tokens"]),
        source=d.get("source", "live"),
        session_ref=d.get("session_ref"),
    )
