"""Compile fingered songs into repeating vibrotactile stimulation schedules.

A schedule drives a two-glove, five-motor-per-hand device: one pulse per
note at the note's onset, chords as simultaneous pulses on distinct
fingers, the whole song looped with a gap to fill a passive session.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .errors import SongLongerThanSession, UnfingeredEvent
from .midi import MIDDLE_C, NoteEvent, SongScore, sort_events

GLOVES = ("left", "right")


@dataclass(frozen=True)
class HapticConfig:
    max_pulse_ms: int = 250
    min_gap_ms: int = 50
    loop_gap_ms: int = 2000
    intensity: float = 1.0

    def __post_init__(self) -> None:
        if self.max_pulse_ms <= 0 or self.min_gap_ms < 0 or self.loop_gap_ms < 0:
            raise ValueError("pulse/gap parameters out of range")
        if not 0 < self.intensity <= 1:
            raise ValueError("intensity must be in (0, 1]")


@dataclass(frozen=True)
class StimulusEvent:
    glove: str
    finger: int
    start_ms: int
    duration_ms: int
    intensity: float = 1.0

    def __post_init__(self) -> None:
        if self.glove not in GLOVES:
            raise ValueError(f"glove {self.glove!r} must be left or right")
        if not 1 <= self.finger <= 5:
            raise ValueError(f"finger {self.finger} outside [1, 5]")
        if self.start_ms < 0 or self.duration_ms <= 0:
            raise ValueError("start must be >= 0 and duration positive")
        if not 0 < self.intensity <= 1:
            raise ValueError("intensity must be in (0, 1]")

    @property
    def end_ms(self) -> int:
        return self.start_ms + self.duration_ms


@dataclass
class StimulusSchedule:
    events: list[StimulusEvent]
    loop_gap_ms: int
    repetitions: int
    song_ref: str
    sham: bool = False
    span_ms: int = 0  # playback span of one repetition; kept explicit so
                      # per-glove subsets loop in step with the full schedule

    def __post_init__(self) -> None:
        if self.repetitions <= 0:
            raise ValueError("repetitions must be positive")
        self.events = sorted(self.events, key=lambda e: (e.start_ms, e.glove, e.finger))
        if self.span_ms == 0:
            self.span_ms = max((e.end_ms for e in self.events), default=0)

    @property
    def cycle_ms(self) -> int:
        return self.span_ms + self.loop_gap_ms

    @property
    def total_playback_ms(self) -> int:
        return self.repetitions * self.cycle_ms

    def glove_events(self, glove: str) -> list[StimulusEvent]:
        return [e for e in self.events if e.glove == glove]

    def subset(self, glove: str) -> "StimulusSchedule":
        return StimulusSchedule(
            events=self.glove_events(glove),
            loop_gap_ms=self.loop_gap_ms,
            repetitions=self.repetitions,
            song_ref=self.song_ref,
            sham=self.sham,
            span_ms=self.span_ms,
        )


def _band_finger(pitch: int, lo: int, hi: int, hand: str) -> int:
    """Partition [lo, hi] into 5 contiguous bands; thumb sits toward middle C."""
    width = hi - lo + 1
    band = min(4, (pitch - lo) * 5 // width)  # 0..4, ascending pitch
    return band + 1 if hand == "right" else 5 - band


def assign_fingers(song: SongScore) -> SongScore:
    """Fill in hand/finger for unannotated events.

    Heuristic: pitches below middle C go to the left hand, the rest to the
    right; each hand's active range splits into five contiguous pitch bands,
    one per finger, thumbs innermost. Already-annotated events pass through.
    """
    by_hand: dict[str, list[int]] = {"left": [], "right": []}
    for e in song.events:
        if e.hand is None or e.finger is None:
            hand = e.hand or ("left" if e.pitch < MIDDLE_C else "right")
            by_hand[hand].append(e.pitch)
    ranges = {
        hand: (min(ps), max(ps)) for hand, ps in by_hand.items() if ps
    }
    out = []
    for e in song.events:
        if e.hand is not None and e.finger is not None:
            out.append(e)
            continue
        hand = e.hand or ("left" if e.pitch < MIDDLE_C else "right")
        lo, hi = ranges[hand]
        out.append(replace(e, hand=hand, finger=_band_finger(e.pitch, lo, hi, hand)))
    return replace(song, events=out)


def compile_schedule(
    song: SongScore,
    session_minutes: int,
    config: HapticConfig | None = None,
    sham: bool = False,
) -> StimulusSchedule:
    """Build the looping pulse schedule for one passive session.

    Every event must carry hand and finger. Pulses start at note onsets,
    are capped at max_pulse_ms, never overlap on a motor, and keep at least
    min_gap_ms of silence before the next pulse on the same motor by
    truncating the earlier pulse.
    """
    cfg = config or HapticConfig()
    if session_minutes <= 0:
        raise ValueError("session_minutes must be positive")
    for e in song.events:
        if e.hand is None or e.finger is None:
            raise UnfingeredEvent(f"event at {e.onset_ms} ms pitch {e.pitch} has no fingering")

    # one pulse per note; chord pitches landing on the same motor collapse
    pulses: dict[tuple[str, int, int], int] = {}
    for e in sort_events(song.events):
        key = (e.hand, e.finger, e.onset_ms)
        duration = min(e.duration_ms, cfg.max_pulse_ms)
        pulses[key] = max(pulses.get(key, 0), duration)

    per_motor: dict[tuple[str, int], list[list[int]]] = {}
    for (glove, finger, start), duration in sorted(pulses.items(), key=lambda kv: kv[0][2]):
        per_motor.setdefault((glove, finger), []).append([start, duration])
    events: list[StimulusEvent] = []
    for (glove, finger), motor_pulses in per_motor.items():
        for cur, nxt in zip(motor_pulses, motor_pulses[1:]):
            if cur[0] + cur[1] > nxt[0] - cfg.min_gap_ms:
                cur[1] = max(1, nxt[0] - cfg.min_gap_ms - cur[0])
        for start, duration in motor_pulses:
            events.append(StimulusEvent(glove, finger, start, duration, cfg.intensity))

    span = max((e.end_ms for e in events), default=0)
    cycle = span + cfg.loop_gap_ms
    if cycle <= 0:
        raise SongLongerThanSession("song produces an empty schedule")
    repetitions = (session_minutes * 60_000) // cycle
    if repetitions < 1:
        raise SongLongerThanSession(
            f"one repetition needs {cycle} ms but the session has {session_minutes * 60_000} ms"
        )
    return StimulusSchedule(
        events=events,
        loop_gap_ms=cfg.loop_gap_ms,
        repetitions=repetitions,
        song_ref=song.id,
        sham=sham,
        span_ms=span,
    )


# --- Schedule file format (tab-separated) ----------------------------------
#
#   #schedule <song_ref> <repetitions> <loop_gap_ms> <span_ms> <sham 0|1>
#   <glove> <finger> <start_ms> <duration_ms> <intensity>

def schedule_to_text(schedule: StimulusSchedule) -> str:
    lines = [
        "#schedule\t{}\t{}\t{}\t{}\t{}".format(
            schedule.song_ref, schedule.repetitions, schedule.loop_gap_ms,
            schedule.span_ms, 1 if schedule.sham else 0,
        )
    ]
    for e in schedule.events:
        lines.append(f"{e.glove}\t{e.finger}\t{e.start_ms}\t{e.duration_ms}\t{e.intensity:g}")
    return "\n".join(lines) + "\n"


def schedule_from_text(text: str) -> StimulusSchedule:
    header = None
    events: list[StimulusEvent] = []
    for line in text.splitlines():
        line = line.rstrip()
        if not line:
            continue
        parts = line.split("\t")
        if parts[0] == "#schedule":
            header = parts
        elif parts[0].startswith("#"):
            continue
        else:
            glove, finger, start, duration, intensity = parts
            events.append(StimulusEvent(glove, int(finger), int(start), int(duration), float(intensity)))
    if header is None:
        raise ValueError("schedule text missing #schedule header")
    return StimulusSchedule(
        events=events,
        song_ref=header[1],
        repetitions=int(header[2]),
        loop_gap_ms=int(header[3]),
        span_ms=int(header[4]),
        sham=header[5] == "1",
    )
