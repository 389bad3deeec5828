"""Standard MIDI File parsing/writing and live note-stream capture.

Supports SMF format 0 and 1 with PPQ time division. All note times are
converted to integer milliseconds on ingest so downstream comparisons are
exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .errors import EmptyTempoMap, MalformedHeader, UnsupportedFormat

DEFAULT_TEMPO_US = 500_000  # microseconds per quarter note (120 bpm)
MIDDLE_C = 60


@dataclass(frozen=True)
class NoteEvent:
    """One key press with millisecond timing and optional fingering."""

    pitch: int
    onset_ms: int
    duration_ms: int
    velocity: int = 64
    hand: str | None = None    # "left" | "right"
    finger: int | None = None  # 1 (thumb) .. 5 (pinky)

    def __post_init__(self) -> None:
        if not 0 <= self.pitch <= 127:
            raise ValueError(f"pitch {self.pitch} outside [0, 127]")
        if self.onset_ms < 0:
            raise ValueError(f"onset_ms {self.onset_ms} is negative")
        if self.duration_ms <= 0:
            raise ValueError(f"duration_ms {self.duration_ms} must be positive")
        if not 1 <= self.velocity <= 127:
            raise ValueError(f"velocity {self.velocity} outside [1, 127]")
        if self.hand not in (None, "left", "right"):
            raise ValueError(f"hand {self.hand!r} must be 'left' or 'right'")
        if self.finger is not None and not 1 <= self.finger <= 5:
            raise ValueError(f"finger {self.finger} outside [1, 5]")

    @property
    def end_ms(self) -> int:
        return self.onset_ms + self.duration_ms


def sort_events(events: list[NoteEvent]) -> list[NoteEvent]:
    """Canonical event order: onset, then ascending pitch."""
    return sorted(events, key=lambda e: (e.onset_ms, e.pitch, e.duration_ms))


@dataclass
class SongScore:
    """A reference song: ordered note events plus the tempo map they came from."""

    id: str
    title: str
    events: list[NoteEvent]
    tempo_map: list[tuple[int, int]] = field(default_factory=lambda: [(0, DEFAULT_TEMPO_US)])
    ppq: int = 480
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.tempo_map:
            raise EmptyTempoMap("tempo_map must be non-empty")
        if self.ppq <= 0:
            raise ValueError(f"ppq {self.ppq} must be positive")
        self.events = sort_events(self.events)

    @property
    def span_ms(self) -> int:
        return max((e.end_ms for e in self.events), default=0)


def _validate_tempo_map(tempo_map: list[tuple[int, int]]) -> None:
    if not tempo_map:
        raise EmptyTempoMap("tempo_map must be non-empty")
    if tempo_map[0][0] != 0:
        raise ValueError("tempo_map must start at tick 0")
    ticks = [t for t, _ in tempo_map]
    if ticks != sorted(ticks):
        raise ValueError("tempo_map must be sorted by tick")


def ticks_to_ms(tick: int, tempo_map: list[tuple[int, int]], ppq: int) -> int:
    """Integrate microseconds over tempo segments up to `tick`, rounded to ms.

    Exact integer arithmetic: the accumulated value is in tick-microsecond
    units and divided once at the end, so the result is monotone in `tick`.
    """
    _validate_tempo_map(tempo_map)
    if ppq <= 0:
        raise ValueError("ppq must be positive")
    if tick < 0:
        raise ValueError("tick must be non-negative")
    acc = 0  # units: ticks * (us per quarter)
    for i, (seg_tick, tempo) in enumerate(tempo_map):
        seg_end = tempo_map[i + 1][0] if i + 1 < len(tempo_map) else tick
        lo = min(seg_tick, tick)
        hi = min(max(seg_end, seg_tick), tick)
        if hi > lo:
            acc += (hi - lo) * tempo
    denom = ppq * 1000
    return (acc + denom // 2) // denom


def ms_to_ticks(ms: int, tempo_map: list[tuple[int, int]], ppq: int) -> int:
    """Inverse of ticks_to_ms; rounds to the nearest tick."""
    _validate_tempo_map(tempo_map)
    if ms < 0:
        raise ValueError("ms must be non-negative")
    target = ms * ppq * 1000  # tick-microsecond units
    acc = 0
    for i, (seg_tick, tempo) in enumerate(tempo_map):
        next_tick = tempo_map[i + 1][0] if i + 1 < len(tempo_map) else None
        if next_tick is not None:
            seg_units = (next_tick - seg_tick) * tempo
            if acc + seg_units < target:
                acc += seg_units
                continue
        # target falls inside this segment
        rem = target - acc
        return seg_tick + (rem + tempo // 2) // tempo
    raise AssertionError("unreachable: last segment is unbounded")


# --- SMF binary reading ---------------------------------------------------

def _read_varlen(data: bytes, i: int) -> tuple[int, int]:
    value = 0
    for _ in range(4):
        if i >= len(data):
            raise MalformedHeader("truncated variable-length quantity")
        b = data[i]
        i += 1
        value = (value << 7) | (b & 0x7F)
        if not b & 0x80:
            return value, i
    raise MalformedHeader("variable-length quantity longer than 4 bytes")


def _u32(data: bytes, i: int) -> int:
    return int.from_bytes(data[i:i + 4], "big")


def _u16(data: bytes, i: int) -> int:
    return int.from_bytes(data[i:i + 2], "big")


def _parse_track(chunk: bytes, track_no: int, warnings: list[str]):
    """Walk one MTrk chunk.

    Returns (raw_notes, tempo_events, title) where raw_notes are
    (on_tick, off_tick, pitch, velocity) with LIFO pairing of re-struck keys.
    """
    notes: list[tuple[int, int, int, int]] = []
    tempos: list[tuple[int, int]] = []
    title: str | None = None
    open_notes: dict[tuple[int, int], list[tuple[int, int]]] = {}
    i = 0
    tick = 0
    running: int | None = None
    while i < len(chunk):
        delta, i = _read_varlen(chunk, i)
        tick += delta
        if i >= len(chunk):
            raise MalformedHeader("truncated track event")
        status = chunk[i]
        if status < 0x80:
            if running is None:
                raise MalformedHeader("data byte with no running status")
            status = running
        else:
            i += 1
        if status == 0xFF:
            running = None
            if i >= len(chunk):
                raise MalformedHeader("truncated meta event")
            mtype = chunk[i]
            i += 1
            length, i = _read_varlen(chunk, i)
            mdata = chunk[i:i + length]
            i += length
            if mtype == 0x51 and length == 3:
                tempos.append((tick, int.from_bytes(mdata, "big")))
            elif mtype == 0x03 and title is None:
                title = mdata.decode("latin-1", errors="replace").strip()
            elif mtype == 0x2F:
                break
        elif status in (0xF0, 0xF7):
            running = None
            length, i = _read_varlen(chunk, i)
            i += length
        elif 0x80 <= status < 0xF0:
            running = status
            kind = status & 0xF0
            channel = status & 0x0F
            nbytes = 1 if kind in (0xC0, 0xD0) else 2
            if i + nbytes > len(chunk):
                raise MalformedHeader("truncated channel message")
            d = chunk[i:i + nbytes]
            i += nbytes
            if kind == 0x90 and d[1] > 0:
                open_notes.setdefault((channel, d[0]), []).append((tick, d[1]))
            elif kind == 0x80 or (kind == 0x90 and d[1] == 0):
                stack = open_notes.get((channel, d[0]))
                if stack:
                    on_tick, vel = stack.pop()
                    notes.append((on_tick, tick, d[0], vel))
                else:
                    warnings.append(
                        f"track {track_no}: note-off for pitch {d[0]} with no open note"
                    )
        else:
            raise MalformedHeader(f"unexpected status byte {status:#04x}")
    # note-ons never closed: end them at the final tick of the track
    for (channel, pitch), stack in open_notes.items():
        for on_tick, vel in stack:
            warnings.append(
                f"track {track_no}: unterminated note pitch {pitch}, closed at track end"
            )
            notes.append((on_tick, tick, pitch, vel))
    return notes, tempos, title


def parse_smf(data: bytes, song_id: str = "", title: str = "") -> SongScore:
    """Parse SMF format 0/1 bytes into a SongScore with millisecond timing."""
    if len(data) < 14 or data[:4] != b"MThd":
        raise MalformedHeader("missing MThd header chunk")
    header_len = _u32(data, 4)
    if header_len < 6 or 8 + header_len > len(data):
        raise MalformedHeader("bad MThd length")
    smf_format = _u16(data, 8)
    ntrks = _u16(data, 10)
    division = _u16(data, 12)
    if smf_format == 2:
        raise UnsupportedFormat("SMF format 2 is not supported")
    if smf_format not in (0, 1):
        raise UnsupportedFormat(f"SMF format {smf_format} is not supported")
    if division & 0x8000:
        raise UnsupportedFormat("SMPTE time division is not supported")
    if division == 0:
        raise MalformedHeader("ppq of 0")

    warnings: list[str] = []
    raw_notes: list[tuple[int, int, int, int]] = []
    tempo_events: list[tuple[int, int]] = []
    meta_title: str | None = None
    pos = 8 + header_len
    tracks_seen = 0
    while tracks_seen < ntrks and pos + 8 <= len(data):
        ctype = data[pos:pos + 4]
        clen = _u32(data, pos + 4)
        pos += 8
        chunk = data[pos:pos + clen]
        if len(chunk) < clen:
            raise MalformedHeader("truncated chunk")
        pos += clen
        if ctype != b"MTrk":
            continue  # alien chunks are skipped per the SMF spec
        notes, tempos, track_title = _parse_track(chunk, tracks_seen, warnings)
        raw_notes.extend(notes)
        tempo_events.extend(tempos)
        if meta_title is None and track_title:
            meta_title = track_title
        tracks_seen += 1
    if tracks_seen < ntrks:
        warnings.append(f"header declared {ntrks} tracks, found {tracks_seen}")

    tempo_map = _merge_tempo_events(tempo_events)
    events = []
    for on_tick, off_tick, pitch, vel in raw_notes:
        onset = ticks_to_ms(on_tick, tempo_map, division)
        end = ticks_to_ms(off_tick, tempo_map, division)
        events.append(NoteEvent(
            pitch=pitch,
            onset_ms=onset,
            duration_ms=max(1, end - onset),
            velocity=vel,
        ))
    return SongScore(
        id=song_id or "song",
        title=title or meta_title or song_id or "song",
        events=events,
        tempo_map=tempo_map,
        ppq=division,
        warnings=warnings,
    )


def _merge_tempo_events(tempo_events: list[tuple[int, int]]) -> list[tuple[int, int]]:
    merged: dict[int, int] = {}
    for tick, tempo in tempo_events:
        merged[tick] = tempo  # later event at the same tick wins
    tempo_map = sorted(merged.items())
    if not tempo_map or tempo_map[0][0] != 0:
        tempo_map.insert(0, (0, DEFAULT_TEMPO_US))
    return tempo_map


# --- SMF binary writing ---------------------------------------------------

def _write_varlen(value: int) -> bytes:
    if value < 0:
        raise ValueError("varlen value must be non-negative")
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append(0x80 | (value & 0x7F))
        value >>= 7
    return bytes(reversed(out))


def write_smf(song: SongScore) -> bytes:
    """Serialize a SongScore as a format-0 SMF using the song's tempo map.

    Quantization to the tick grid bounds round-trip timing error by
    tempo / (2 * ppq * 1000) milliseconds per boundary. Same-pitch notes
    that partially overlap (start before, end inside) cannot round-trip:
    note-off messages carry no note identity, so LIFO pairing on re-parse
    can only reproduce disjoint or fully nested shapes. Keyboards cannot
    produce partial overlaps, so real captures are unaffected.
    """
    msgs: list[tuple[int, int, bytes]] = []
    for tick, tempo in song.tempo_map:
        msgs.append((tick, 0, b"\xff\x51\x03" + tempo.to_bytes(3, "big")))
    if song.title:
        title_bytes = song.title.encode("latin-1", errors="replace")
        msgs.append((0, 0, b"\xff\x03" + _write_varlen(len(title_bytes)) + title_bytes))
    for ev in song.events:
        on_tick = ms_to_ticks(ev.onset_ms, song.tempo_map, song.ppq)
        off_tick = ms_to_ticks(ev.end_ms, song.tempo_map, song.ppq)
        if off_tick <= on_tick:
            off_tick = on_tick + 1
        # offs sort before ons at the same tick so re-struck keys pair cleanly
        msgs.append((on_tick, 2, bytes([0x90, ev.pitch, ev.velocity])))
        msgs.append((off_tick, 1, bytes([0x80, ev.pitch, 0x40])))
    msgs.sort(key=lambda m: (m[0], m[1]))

    body = bytearray()
    last_tick = 0
    for tick, _, payload in msgs:
        body += _write_varlen(tick - last_tick)
        body += payload
        last_tick = tick
    body += _write_varlen(0) + b"\xff\x2f\x00"

    header = b"MThd" + (6).to_bytes(4, "big")
    header += (0).to_bytes(2, "big") + (1).to_bytes(2, "big") + song.ppq.to_bytes(2, "big")
    track = b"MTrk" + len(body).to_bytes(4, "big") + bytes(body)
    return header + track


# --- Live capture ---------------------------------------------------------

@dataclass(frozen=True)
class NoteMessage:
    """A timestamped note-on/off message from a keyboard stream."""

    time_ms: int
    kind: str  # "on" | "off"
    pitch: int
    velocity: int = 64

    def __post_init__(self) -> None:
        if self.kind not in ("on", "off"):
            raise ValueError(f"kind {self.kind!r} must be 'on' or 'off'")
        if not 0 <= self.pitch <= 127:
            raise ValueError(f"pitch {self.pitch} outside [0, 127]")
        if self.time_ms < 0:
            raise ValueError("time_ms must be non-negative")


def capture_events(
    messages: list[NoteMessage],
    diagnostics: dict[str, int] | None = None,
) -> list[NoteEvent]:
    """Resolve a monotone message stream into NoteEvents.

    Note-on with velocity 0 counts as note-off. Re-struck keys pair LIFO.
    Orphan note-offs are dropped and tallied in `diagnostics` when given;
    unterminated note-ons are closed at the final message time.
    """
    last_time = 0
    for msg in messages:
        if msg.time_ms < last_time:
            raise ValueError("message timestamps must be monotone non-decreasing")
        last_time = msg.time_ms

    tally = {"orphan_note_off": 0, "unterminated": 0}
    open_notes: dict[int, list[tuple[int, int]]] = {}
    events: list[NoteEvent] = []
    for msg in messages:
        is_off = msg.kind == "off" or (msg.kind == "on" and msg.velocity == 0)
        if not is_off:
            open_notes.setdefault(msg.pitch, []).append((msg.time_ms, msg.velocity))
        else:
            stack = open_notes.get(msg.pitch)
            if not stack:
                tally["orphan_note_off"] += 1
                continue
            onset, vel = stack.pop()
            events.append(NoteEvent(
                pitch=msg.pitch,
                onset_ms=onset,
                duration_ms=max(1, msg.time_ms - onset),
                velocity=max(1, vel),
            ))
    for pitch, stack in open_notes.items():
        for onset, vel in stack:
            tally["unterminated"] += 1
            events.append(NoteEvent(
                pitch=pitch,
                onset_ms=onset,
                duration_ms=max(1, last_time - onset),
                velocity=max(1, vel),
            ))
    if diagnostics is not None:
        diagnostics.update(tally)
    return sort_events(events)


# --- Text formats ---------------------------------------------------------
#
# Song file (tab-separated):
#   #song <id> <title> <ppq>
#   #tempo <tick> <us_per_quarter>      (one line per tempo segment)
#   #warning <text>
#   note <pitch> <onset_ms> <duration_ms> <velocity> <hand|-> <finger|->
#
# Capture file (tab-separated, one message per line):
#   <time_ms> <on|off> <pitch> <velocity>

def song_to_text(song: SongScore) -> str:
    lines = [f"#song\t{song.id}\t{song.title.replace(chr(9), ' ')}\t{song.ppq}"]
    for tick, tempo in song.tempo_map:
        lines.append(f"#tempo\t{tick}\t{tempo}")
    for w in song.warnings:
        lines.append(f"#warning\t{w.replace(chr(9), ' ')}")
    for e in song.events:
        hand = e.hand if e.hand is not None else "-"
        finger = str(e.finger) if e.finger is not None else "-"
        lines.append(f"note\t{e.pitch}\t{e.onset_ms}\t{e.duration_ms}\t{e.velocity}\t{hand}\t{finger}")
    return "\n".join(lines) + "\n"


def song_from_text(text: str) -> SongScore:
    song_id, title, ppq = "song", "song", 480
    tempo_map: list[tuple[int, int]] = []
    warnings: list[str] = []
    events: list[NoteEvent] = []
    for line in text.splitlines():
        line = line.rstrip("\n")
        if not line:
            continue
        parts = line.split("\t")
        if parts[0] == "#song":
            song_id, title, ppq = parts[1], parts[2], int(parts[3])
        elif parts[0] == "#tempo":
            tempo_map.append((int(parts[1]), int(parts[2])))
        elif parts[0] == "#warning":
            warnings.append(parts[1])
        elif parts[0] == "note":
            events.append(NoteEvent(
                pitch=int(parts[1]),
                onset_ms=int(parts[2]),
                duration_ms=int(parts[3]),
                velocity=int(parts[4]),
                hand=None if parts[5] == "-" else parts[5],
                finger=None if parts[6] == "-" else int(parts[6]),
            ))
        else:
            raise ValueError(f"unknown song record {parts[0]!r}")
    if not tempo_map:
        tempo_map = [(0, DEFAULT_TEMPO_US)]
    return SongScore(id=song_id, title=title, events=events,
                     tempo_map=tempo_map, ppq=ppq, warnings=warnings)


def capture_to_text(messages: list[NoteMessage]) -> str:
    return "".join(f"{m.time_ms}\t{m.kind}\t{m.pitch}\t{m.velocity}\n" for m in messages)


def capture_from_text(text: str) -> list[NoteMessage]:
    messages = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        t, kind, pitch, vel = line.split("\t")
        messages.append(NoteMessage(int(t), kind, int(pitch), int(vel)))
    return messages


def events_to_messages(events: list[NoteEvent]) -> list[NoteMessage]:
    """Turn note events back into an on/off message stream (for replay)."""
    msgs: list[tuple[int, int, NoteMessage]] = []
    for e in sort_events(events):
        msgs.append((e.onset_ms, 1, NoteMessage(e.onset_ms, "on", e.pitch, e.velocity)))
        msgs.append((e.end_ms, 0, NoteMessage(e.end_ms, "off", e.pitch, 0)))
    msgs.sort(key=lambda m: (m[0], m[1]))
    return [m for _, _, m in msgs]


def note_event_to_dict(e: NoteEvent) -> dict:
    return {
        "pitch": e.pitch,
        "onset_ms": e.onset_ms,
        "duration_ms": e.duration_ms,
        "velocity": e.velocity,
        "hand": e.hand,
        "finger": e.finger,
    }


def note_event_from_dict(d: dict) -> NoteEvent:
    return NoteEvent(
        pitch=d["pitch"],
        onset_ms=d["onset_ms"],
        duration_ms=d["duration_ms"],
        velocity=d.get("velocity", 64),
        hand=d.get("hand"),
        finger=d.get("finger"),
    )


def with_fingering(e: NoteEvent, hand: str, finger: int) -> NoteEvent:
    return replace(e, hand=hand, finger=finger)
