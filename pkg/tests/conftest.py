"""Shared test helpers: hand-assembled SMF bytes and token builders."""

from __future__ import annotations

import pytest

from pianotact.midi import NoteEvent, SongScore
from pianotact.tokens import Token

# letter names used by the worked scoring examples (octave 4/ nearby)
PITCHES = {"C": 60, "D": 62, "E": 64, "F": 65, "G": 67, "A": 57, "B": 59}


def varlen(value: int) -> bytes:
    """Encode a variable-length quantity by hand (test-side oracle)."""
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append(0x80 | (value & 0x7F))
        value >>= 7
    return bytes(reversed(out))


def build_smf(track_events: list[list[tuple[int, bytes]]], fmt: int = 0, ppq: int = 480,
              division_override: int | None = None) -> bytes:
    """Assemble an SMF from (delta, message-bytes) tuples, one list per track."""
    division = division_override if division_override is not None else ppq
    data = b"MThd" + (6).to_bytes(4, "big")
    data += fmt.to_bytes(2, "big") + len(track_events).to_bytes(2, "big") + division.to_bytes(2, "big")
    for events in track_events:
        body = b"".join(varlen(delta) + msg for delta, msg in events)
        body += varlen(0) + b"\xff\x2f\x00"
        data += b"MTrk" + len(body).to_bytes(4, "big") + body
    return data


def tempo_msg(us_per_quarter: int) -> bytes:
    return b"\xff\x51\x03" + us_per_quarter.to_bytes(3, "big")


def note_on(pitch: int, velocity: int = 64, channel: int = 0) -> bytes:
    return bytes([0x90 | channel, pitch, velocity])


def note_off(pitch: int, channel: int = 0) -> bytes:
    return bytes([0x80 | channel, pitch, 64])


def toks(letters: str, spacing_ms: int = 500, start_ms: int = 0) -> list[Token]:
    """Single-note token sequence from space-separated letter names."""
    out = []
    for i, letter in enumerate(letters.split()):
        out.append(Token.make([PITCHES[letter]], start_ms + i * spacing_ms))
    return out


def tok(pitches, onset_ms: int = 0) -> Token:
    return Token.make(pitches, onset_ms)


def simple_song(pitch_onsets: list[tuple[int, int, int]], song_id: str = "test-song",
                with_fingering: bool = False) -> SongScore:
    """Song from (pitch, onset_ms, duration_ms) triples."""
    events = []
    for pitch, onset, duration in pitch_onsets:
        hand = ("left" if pitch < 60 else "right") if with_fingering else None
        finger = 3 if with_fingering else None
        events.append(NoteEvent(pitch=pitch, onset_ms=onset, duration_ms=duration,
                                hand=hand, finger=finger))
    return SongScore(id=song_id, title=song_id, events=events)


@pytest.fixture
def paper_ref_tokens() -> list[Token]:
    return toks("C B B A E E F C")


@pytest.fixture
def paper_perf_tokens() -> list[Token]:
    return toks("C B A E C F C C")
