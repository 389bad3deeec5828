"""Simulated self-contained glove pair.

The master (right glove) receives schedules and commands from the host,
plays its own side, and drives the slave (left glove) over a lossy duplex
link using the frame protocol: chunked schedule upload, epoch-based start,
periodic clock sync, and status polling. Playback position derives from
the glove's corrected clock, so a sync correction immediately realigns
the slave.
"""

from __future__ import annotations

import heapq
import math
import random
from dataclasses import dataclass, field

from .errors import CommitWithoutChunks, StartWithoutSchedule
from .haptics import StimulusSchedule, schedule_from_text, schedule_to_text
from .protocol import (
    MSG_SCHED_CHUNK,
    MSG_SCHED_COMMIT,
    MSG_START,
    MSG_STATUS,
    MSG_STATUS_REQ,
    MSG_STOP,
    MSG_SYNC,
    Frame,
    decode_frame,
    encode_frame,
)

PLAYING_DRAIN_PCT_PER_MS = 100.0 / (180 * 60_000)  # flat battery after ~3 h of playback
IDLE_DRAIN_FACTOR = 0.1
SYNC_INTERVAL_MS = 10_000
CHUNK_DATA_BYTES = 236  # payload limit minus the 4-byte chunk header

STATUS_OK = 0
STATUS_MISSING_CHUNKS = 1
STATUS_NO_SCHEDULE = 2
STATUS_BUSY = 3

PLAYBACK_CODES = {"idle": 0, "playing": 1, "paused": 2}
PLAYBACK_NAMES = {v: k for k, v in PLAYBACK_CODES.items()}

_BATTERY_EPS = 1e-9


@dataclass
class GloveState:
    role: str                      # "master" | "slave"
    side: str                      # "right" | "left" (which events it plays)
    schedule: StimulusSchedule | None = None
    playback: str = "idle"         # "idle" | "playing" | "paused"
    position_ms: float = 0.0
    battery_pct: float = 100.0
    clock_offset_ms: float = 0.0   # corrected = local_clock + offset (slave)
    local_clock_ms: float = 0.0
    motor_levels: list[float] = field(default_factory=lambda: [0.0] * 5)
    chunks: dict[int, bytes] = field(default_factory=dict)
    chunks_total: int | None = None
    start_epoch_ms: float | None = None  # corrected-clock time playback begins
    completed: bool = False
    tx_seq: int = 0
    last_rx_seq: int | None = None

    @property
    def corrected_clock_ms(self) -> float:
        return self.local_clock_ms + self.clock_offset_ms


def new_glove(role: str) -> GloveState:
    return GloveState(role=role, side="right" if role == "master" else "left")


def _next_seq(state: GloveState) -> int:
    seq = state.tx_seq
    state.tx_seq = (seq + 1) % 256
    return seq


def pack_status(code: int, battery_pct: float, playback: str, position_ms: float) -> bytes:
    return (
        bytes([code])
        + round(max(0.0, battery_pct) * 100).to_bytes(2, "big")
        + bytes([PLAYBACK_CODES[playback]])
        + int(max(0, round(position_ms))).to_bytes(4, "big")
    )


def unpack_status(payload: bytes) -> dict:
    return {
        "code": payload[0],
        "battery_pct": int.from_bytes(payload[1:3], "big") / 100.0,
        "playback": PLAYBACK_NAMES[payload[3]],
        "position_ms": int.from_bytes(payload[4:8], "big"),
    }


def pack_chunk(index: int, total: int, data: bytes) -> bytes:
    return index.to_bytes(2, "big") + total.to_bytes(2, "big") + data


def split_schedule(schedule: StimulusSchedule) -> list[bytes]:
    """Chunk a schedule's text form into SCHED_CHUNK payloads."""
    blob = schedule_to_text(schedule).encode("utf-8")
    pieces = [blob[i:i + CHUNK_DATA_BYTES] for i in range(0, len(blob), CHUNK_DATA_BYTES)] or [b""]
    total = len(pieces)
    return [pack_chunk(i, total, piece) for i, piece in enumerate(pieces)]


def _status_reply(state: GloveState, code: int = STATUS_OK) -> Frame:
    return Frame(
        msg_type=MSG_STATUS,
        seq=_next_seq(state),
        payload=pack_status(code, state.battery_pct, state.playback, state.position_ms),
    )


def _begin_playback(state: GloveState, epoch_ms: float) -> None:
    state.start_epoch_ms = epoch_ms
    state.completed = False
    now = state.corrected_clock_ms
    if now >= epoch_ms:
        state.playback = "playing"
        state.position_ms = now - epoch_ms
    else:
        state.playback = "idle"  # armed; tick promotes at the epoch
        state.position_ms = 0.0
    _update_motors(state)


def apply_command(state: GloveState, frame: Frame) -> tuple[GloveState, Frame | None]:
    """Process one decoded frame against a glove state machine."""
    state.last_rx_seq = frame.seq
    kind = frame.msg_type

    if kind == MSG_SCHED_CHUNK:
        if state.playback == "playing":
            return state, _status_reply(state, STATUS_BUSY)
        index = int.from_bytes(frame.payload[0:2], "big")
        total = int.from_bytes(frame.payload[2:4], "big")
        if state.chunks_total is not None and total != state.chunks_total:
            state.chunks.clear()  # a new upload supersedes a stale partial one
        state.chunks_total = total
        state.chunks[index] = frame.payload[4:]
        return state, None

    if kind == MSG_SCHED_COMMIT:
        if state.playback == "playing":
            return state, _status_reply(state, STATUS_BUSY)
        if not state.chunks:
            raise CommitWithoutChunks("commit received before any schedule chunk")
        total = state.chunks_total or 0
        if len(state.chunks) != total or set(state.chunks) != set(range(total)):
            return state, _status_reply(state, STATUS_MISSING_CHUNKS)
        text = b"".join(state.chunks[i] for i in range(total)).decode("utf-8")
        state.schedule = schedule_from_text(text)
        state.chunks.clear()
        state.chunks_total = None
        state.position_ms = 0.0
        state.completed = False
        return state, _status_reply(state, STATUS_OK)

    if kind == MSG_START:
        if state.schedule is None:
            raise StartWithoutSchedule("no schedule installed")
        if frame.payload:
            epoch = int.from_bytes(frame.payload[:8], "big") / 1000.0  # us -> ms
        else:
            epoch = state.corrected_clock_ms
        _begin_playback(state, epoch)
        return state, None

    if kind == MSG_STOP:
        state.playback = "idle"
        state.start_epoch_ms = None
        state.position_ms = 0.0
        state.motor_levels = [0.0] * 5
        return state, None

    if kind == MSG_STATUS_REQ:
        code = STATUS_OK if state.schedule is not None else STATUS_NO_SCHEDULE
        return state, _status_reply(state, code)

    if kind == MSG_SYNC:
        if state.role == "slave":
            master_now_ms = int.from_bytes(frame.payload[:8], "big") / 1000.0
            state.clock_offset_ms = master_now_ms - state.local_clock_ms
            if state.playback == "playing" and state.start_epoch_ms is not None:
                state.position_ms = state.corrected_clock_ms - state.start_epoch_ms
        return state, None

    if kind == MSG_STATUS:
        return state, None  # replies are consumed by whoever polled

    raise AssertionError(f"unhandled msg_type {kind}")  # pragma: no cover


def _side_events(state: GloveState):
    if state.schedule is None:
        return []
    return [e for e in state.schedule.events if e.glove == state.side]


def _update_motors(state: GloveState) -> None:
    levels = [0.0] * 5
    sched = state.schedule
    if sched is not None and state.playback == "playing" and not state.completed:
        cycle = sched.cycle_ms
        if cycle > 0 and state.position_ms < sched.total_playback_ms:
            local = state.position_ms % cycle
            sham = sched.sham
            for e in _side_events(state):
                if e.start_ms <= local < e.end_ms:
                    levels[e.finger - 1] = 0.0 if sham else e.intensity
    state.motor_levels = levels


def tick(state: GloveState, dt_ms: float) -> GloveState:
    """Advance a glove's local clock by dt_ms: battery, playback, motors."""
    if dt_ms <= 0:
        raise ValueError("dt_ms must be positive")
    rate = PLAYING_DRAIN_PCT_PER_MS if state.playback == "playing" else (
        PLAYING_DRAIN_PCT_PER_MS * IDLE_DRAIN_FACTOR
    )
    state.battery_pct = max(0.0, state.battery_pct - rate * dt_ms)
    if state.battery_pct < _BATTERY_EPS:
        state.battery_pct = 0.0
    state.local_clock_ms += dt_ms

    if state.battery_pct == 0.0:
        state.playback = "idle"
        state.start_epoch_ms = None
        state.motor_levels = [0.0] * 5
        return state

    if state.start_epoch_ms is not None and state.schedule is not None:
        now = state.corrected_clock_ms
        if state.playback == "idle" and now >= state.start_epoch_ms:
            state.playback = "playing"
        if state.playback == "playing":
            state.position_ms = now - state.start_epoch_ms
            if state.position_ms >= state.schedule.total_playback_ms:
                state.position_ms = float(state.schedule.total_playback_ms)
                state.playback = "idle"
                state.completed = True
                state.start_epoch_ms = None
    _update_motors(state)
    return state


# --- Lossy in-memory link ---------------------------------------------------

class Link:
    """Duplex channel with configurable drop rate and latency, seeded RNG."""

    def __init__(self, drop_rate: float = 0.0, latency_ms: float = 0.0, seed: int = 0):
        if not 0 <= drop_rate < 1:
            raise ValueError("drop_rate must be in [0, 1)")
        self.drop_rate = drop_rate
        self.latency_ms = latency_ms
        self.rng = random.Random(seed)
        self._queue: list[tuple[float, int, str, bytes]] = []
        self._counter = 0
        self.dropped = 0
        self.sent = 0

    def send(self, now_ms: float, direction: str, data: bytes) -> None:
        self.sent += 1
        if self.drop_rate > 0 and self.rng.random() < self.drop_rate:
            self.dropped += 1
            return
        heapq.heappush(self._queue, (now_ms + self.latency_ms, self._counter, direction, data))
        self._counter += 1

    def next_delivery_at(self) -> float | None:
        return self._queue[0][0] if self._queue else None

    def deliver_due(self, now_ms: float) -> list[tuple[str, bytes]]:
        out = []
        while self._queue and self._queue[0][0] <= now_ms + 1e-9:
            _, _, direction, data = heapq.heappop(self._queue)
            out.append((direction, data))
        return out


# --- Pair runner ------------------------------------------------------------

@dataclass(frozen=True)
class Activation:
    time_ms: float  # relative to playback epoch
    glove: str
    finger: int
    duration_ms: float
    intensity: float


class PairRunner:
    """Event-driven simulation of a master/slave glove pair playing a schedule."""

    def __init__(
        self,
        *,
        drop_rate: float = 0.0,
        latency_ms: float = 0.0,
        seed: int = 0,
        slave_skew_ppm: float = 0.0,
        sync_interval_ms: int = SYNC_INTERVAL_MS,
        start_lead_ms: int = 50,
        max_upload_attempts: int = 25,
    ):
        self.master = new_glove("master")
        self.slave = new_glove("slave")
        self.link = Link(drop_rate, latency_ms, seed)
        self.now = 0.0
        self.epoch_ms: float | None = None
        self.slave_skew = slave_skew_ppm * 1e-6
        self.sync_interval_ms = sync_interval_ms
        self.start_lead_ms = start_lead_ms
        self.max_upload_attempts = max_upload_attempts
        self.trace: list[Activation] = []
        self._pending: dict[tuple[str, int], tuple[float, float]] = {}
        self._next_sync = float(sync_interval_ms)
        self.start_retry_interval_ms = 2_000
        self._next_watchdog = float(self.start_retry_interval_ms)
        self._slave_committed = False
        self._slave_seen_playing = False
        self._start_sent = False
        self.diagnostics = {
            "upload_attempts": 0,
            "start_retries": 0,
            "max_divergence_ms": 0.0,
            "sync_count": 0,
        }

    # Host-to-master commands run through the codec but not the lossy link:
    # the host holds the master glove, the radio link is master-to-slave.
    def _host_to_master(self, frame: Frame) -> Frame | None:
        decoded = decode_frame(encode_frame(frame))
        _, reply = apply_command(self.master, decoded)
        return decoded_reply(reply)

    def _master_to_slave(self, frame: Frame) -> None:
        self.link.send(self.now, "m2s", encode_frame(frame))

    def _slave_to_master(self, frame: Frame) -> None:
        self.link.send(self.now, "s2m", encode_frame(frame))

    def upload(self, schedule: StimulusSchedule) -> None:
        """Install the schedule on the master and replicate the left side to the slave."""
        host_seq = 0
        for payload in split_schedule(schedule):
            self._host_to_master(Frame(MSG_SCHED_CHUNK, host_seq, payload))
            host_seq = (host_seq + 1) % 256
        reply = self._host_to_master(Frame(MSG_SCHED_COMMIT, host_seq))
        if reply is None or unpack_status(reply.payload)["code"] != STATUS_OK:
            raise ValueError("master rejected schedule upload")
        self._replicate_to_slave()

    def _replicate_to_slave(self) -> None:
        subset = self.master.schedule.subset("left")
        chunks = split_schedule(subset)
        attempts = 0
        while not self._slave_committed and attempts < self.max_upload_attempts:
            attempts += 1
            self.diagnostics["upload_attempts"] = attempts
            for payload in chunks:
                self._master_to_slave(Frame(MSG_SCHED_CHUNK, _next_seq(self.master), payload))
            self._master_to_slave(Frame(MSG_SCHED_COMMIT, _next_seq(self.master)))
            # let the link flush before deciding to retry
            self._drain_link(self.now + 2 * self.link.latency_ms + 1.0)
        if not self._slave_committed:
            raise ValueError("slave never acknowledged the schedule upload")

    def start(self) -> None:
        if self.master.schedule is None:
            raise StartWithoutSchedule("upload a schedule before starting")
        epoch = self.now + self.start_lead_ms
        payload = int(round(epoch * 1000)).to_bytes(8, "big")
        self._host_to_master(Frame(MSG_START, 0, payload))
        self._master_to_slave(Frame(MSG_START, _next_seq(self.master), payload))
        self.epoch_ms = epoch
        self._start_sent = True

    def stop(self) -> None:
        self._host_to_master(Frame(MSG_STOP, 0))
        self._master_to_slave(Frame(MSG_STOP, _next_seq(self.master)))
        self._drain_link(self.now + 2 * self.link.latency_ms + 1.0)

    def status(self) -> dict:
        reply = self._host_to_master(Frame(MSG_STATUS_REQ, 0))
        info = unpack_status(reply.payload)
        info["completed"] = self.master.completed and self.slave.completed
        info["sham"] = bool(self.master.schedule and self.master.schedule.sham)
        return info

    # -- event loop ----------------------------------------------------------

    def _boundaries(self, state: GloveState) -> list[float]:
        sched = state.schedule
        if sched is None:
            return []
        marks = set()
        for e in _side_events(state):
            marks.add(float(e.start_ms))
            marks.add(float(e.end_ms))
        marks.add(float(sched.cycle_ms))
        return sorted(marks)

    def _next_boundary_master_dt(self, state: GloveState, skew: float) -> float | None:
        """Master-clock delta until this glove next changes playback state."""
        sched = state.schedule
        if sched is None:
            return None
        local_rate = 1.0 + skew
        if state.start_epoch_ms is not None and state.playback == "idle":
            gap = (state.start_epoch_ms - state.corrected_clock_ms) / local_rate
            return max(gap, 1e-6)
        if state.playback != "playing":
            return None
        pos = state.position_ms
        total = sched.total_playback_ms
        if pos >= total:
            return None
        cycle = sched.cycle_ms
        local = pos % cycle
        candidates = [b for b in self._boundaries(state) if b > local + 1e-9]
        step = min(candidates) - local if candidates else cycle - local
        step = min(step, total - pos)
        return max(step / local_rate, 1e-6)

    def _battery_zero_dt(self, state: GloveState, skew: float) -> float | None:
        if state.battery_pct <= 0:
            return None
        rate = PLAYING_DRAIN_PCT_PER_MS if state.playback == "playing" else (
            PLAYING_DRAIN_PCT_PER_MS * IDLE_DRAIN_FACTOR
        )
        return state.battery_pct / rate / (1.0 + skew)

    def _record_transitions(self, name: str, state: GloveState, before: list[float]) -> None:
        rel = self.now - (self.epoch_ms or 0.0)
        for finger, (old, new) in enumerate(zip(before, state.motor_levels), start=1):
            key = (name, finger)
            if old == 0.0 and new > 0.0:
                self._pending[key] = (rel, new)
            elif old > 0.0 and new == 0.0 and key in self._pending:
                start, intensity = self._pending.pop(key)
                self.trace.append(Activation(start, name, finger, rel - start, intensity))

    def _flush_pending(self) -> None:
        rel = self.now - (self.epoch_ms or 0.0)
        for (name, finger), (start, intensity) in sorted(self._pending.items()):
            self.trace.append(Activation(start, name, finger, rel - start, intensity))
        self._pending.clear()

    def _deliver(self) -> None:
        for direction, data in self.link.deliver_due(self.now):
            frame = decode_frame(data)
            if direction == "m2s":
                try:
                    _, reply = apply_command(self.slave, frame)
                except CommitWithoutChunks:
                    # every chunk was lost; NACK so the master resends
                    reply = _status_reply(self.slave, STATUS_MISSING_CHUNKS)
                except StartWithoutSchedule:
                    reply = None  # watchdog will retry once the upload lands
                if reply is not None and frame.msg_type in (MSG_SCHED_COMMIT, MSG_STATUS_REQ):
                    self._slave_to_master(reply)
            else:
                if frame.msg_type == MSG_STATUS:
                    info = unpack_status(frame.payload)
                    if info["code"] == STATUS_OK:
                        if not self._slave_committed:
                            self._slave_committed = True
                        if info["playback"] == "playing":
                            self._slave_seen_playing = True
                        elif self._start_sent and self.master.playback == "playing":
                            # slave missed START: resend with the original epoch
                            payload = int(round(self.epoch_ms * 1000)).to_bytes(8, "big")
                            self._master_to_slave(Frame(MSG_START, _next_seq(self.master), payload))
                            self.diagnostics["start_retries"] += 1
                    elif info["code"] == STATUS_MISSING_CHUNKS and not self._slave_committed:
                        pass  # replication loop resends the full set
                else:
                    apply_command(self.master, frame)

    def _step_to(self, target: float) -> None:
        dt = target - self.now
        if dt <= 0:
            return
        master_before = list(self.master.motor_levels)
        slave_before = list(self.slave.motor_levels)
        tick(self.master, dt)
        tick(self.slave, dt * (1.0 + self.slave_skew))
        self.now = target
        self._record_transitions("right", self.master, master_before)
        self._record_transitions("left", self.slave, slave_before)
        if self.master.playback == "playing" and self.slave.playback == "playing":
            div = abs(self.master.position_ms - self.slave.position_ms)
            if div > self.diagnostics["max_divergence_ms"]:
                self.diagnostics["max_divergence_ms"] = div

    def advance_to(self, target_ms: float) -> None:
        while self.now < target_ms - 1e-9:
            horizon = target_ms
            nxt = self.link.next_delivery_at()
            if nxt is not None:
                horizon = min(horizon, max(nxt, self.now))
            for state, skew in ((self.master, 0.0), (self.slave, self.slave_skew)):
                b = self._next_boundary_master_dt(state, skew)
                if b is not None:
                    horizon = min(horizon, self.now + b)
                z = self._battery_zero_dt(state, skew)
                if z is not None:
                    horizon = min(horizon, self.now + z)
            if self._start_sent or self._slave_committed:
                horizon = min(horizon, self._next_sync)
            if self._start_sent and not self._slave_seen_playing:
                horizon = min(horizon, self._next_watchdog)
            if horizon > self.now:
                self._step_to(min(horizon, target_ms))
            self._deliver()
            if self.now >= self._next_sync - 1e-9:
                # timestamp what the master clock will read on delivery:
                # the link's nominal latency is calibration data both ends share
                stamp = self.now + self.link.latency_ms
                payload = int(round(stamp * 1000)).to_bytes(8, "big")
                self._master_to_slave(Frame(MSG_SYNC, _next_seq(self.master), payload))
                self.diagnostics["sync_count"] += 1
                self._next_sync = (math.floor(self.now / self.sync_interval_ms) + 1) * self.sync_interval_ms
            if (
                self._start_sent
                and not self._slave_seen_playing
                and self.now >= self._next_watchdog - 1e-9
            ):
                self._master_to_slave(Frame(MSG_STATUS_REQ, _next_seq(self.master)))
                interval = self.start_retry_interval_ms
                self._next_watchdog = (math.floor(self.now / interval) + 1) * interval

    def _drain_link(self, until: float) -> None:
        while True:
            nxt = self.link.next_delivery_at()
            if nxt is None or nxt > until:
                break
            if nxt > self.now:
                self._step_to(nxt)
            self._deliver()

    def run(self, minutes: float) -> None:
        """Play the uploaded schedule for up to `minutes` of simulated time."""
        if not self._start_sent:
            self.start()
        end = self.now + minutes * 60_000
        self.advance_to(end)
        self._flush_pending()
        self.trace.sort(key=lambda a: (a.time_ms, a.glove, a.finger))


def decoded_reply(reply: Frame | None) -> Frame | None:
    """Round-trip a reply through the codec, as the host radio would."""
    if reply is None:
        return None
    return decode_frame(encode_frame(reply))


def expected_trace(schedule: StimulusSchedule) -> list[Activation]:
    """The activation sequence a faithful playback of `schedule` produces."""
    out = []
    for rep in range(schedule.repetitions):
        base = rep * schedule.cycle_ms
        for e in schedule.events:
            out.append(Activation(
                time_ms=float(base + e.start_ms),
                glove=e.glove,
                finger=e.finger,
                duration_ms=float(e.duration_ms),
                intensity=e.intensity,
            ))
    out.sort(key=lambda a: (a.time_ms, a.glove, a.finger))
    return out


def trace_to_text(trace: list[Activation]) -> str:
    lines = ["#trace\ttime_ms\tglove\tfinger\tduration_ms\tintensity"]
    for a in trace:
        lines.append(f"{a.time_ms:g}\t{a.glove}\t{a.finger}\t{a.duration_ms:g}\t{a.intensity:g}")
    return "\n".join(lines) + "\n"
