"""SMF parsing, tick conversion, and live capture."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pianotact.errors import EmptyTempoMap, MalformedHeader, UnsupportedFormat
from pianotact.midi import (
    NoteEvent,
    NoteMessage,
    SongScore,
    capture_events,
    parse_smf,
    song_from_text,
    song_to_text,
    ticks_to_ms,
    write_smf,
)

from .conftest import build_smf, note_off, note_on, tempo_msg


# --- ticks_to_ms -----------------------------------------------------------

def test_tick_zero_is_zero_ms():
    assert ticks_to_ms(0, [(0, 500_000)], 480) == 0


def test_single_segment_arithmetic():
    # 480 ticks at 500000 us/quarter with ppq 480 -> exactly one quarter -> 500 ms
    assert ticks_to_ms(480, [(0, 500_000)], 480) == 500


def test_two_segment_sum():
    tempo_map = [(0, 500_000), (480, 250_000)]
    assert ticks_to_ms(960, tempo_map, 480) == 750


def test_empty_tempo_map_rejected():
    with pytest.raises(EmptyTempoMap):
        ticks_to_ms(10, [], 480)


@given(
    ticks=st.lists(st.integers(min_value=0, max_value=100_000), min_size=2, max_size=10),
    tempos=st.lists(st.integers(min_value=50_000, max_value=2_000_000), min_size=1, max_size=5),
)
def test_ticks_to_ms_monotone(ticks, tempos):
    tempo_map = [(i * 1000, t) for i, t in enumerate(tempos)]
    ms = [ticks_to_ms(t, tempo_map, 480) for t in sorted(ticks)]
    assert all(a <= b for a, b in zip(ms, ms[1:]))


# --- parse_smf ---------------------------------------------------------------

def test_empty_track_gives_empty_song():
    data = build_smf([[(0, tempo_msg(500_000))]])
    song = parse_smf(data)
    assert song.events == []


def test_single_note_hand_computed():
    # C4 on at tick 0, off at tick 480, ppq 480, tempo 500000:
    # ms = 480 * 500000 / (480 * 1000) = 500
    data = build_smf([[
        (0, tempo_msg(500_000)),
        (0, note_on(60)),
        (480, note_off(60)),
    ]])
    song = parse_smf(data)
    assert len(song.events) == 1
    ev = song.events[0]
    assert (ev.pitch, ev.onset_ms, ev.duration_ms) == (60, 0, 500)


def test_mid_track_tempo_change():
    # tempo halves at tick 480; a note at tick 960 starts at 500 + 250 = 750 ms
    data = build_smf([[
        (0, tempo_msg(500_000)),
        (480, tempo_msg(250_000)),
        (480, note_on(64)),
        (480, note_off(64)),
    ]])
    song = parse_smf(data)
    assert song.events[0].onset_ms == 750
    assert song.tempo_map == [(0, 500_000), (480, 250_000)]


def test_running_status_and_velocity_zero_off():
    # second pair reuses the note-on status byte; off is velocity-0 note-on
    body = [
        (0, tempo_msg(500_000)),
        (0, note_on(60)),
        (240, bytes([64, 80])),      # running status: on(64)
        (240, bytes([60, 0])),       # running status: on(60, vel 0) == off
        (240, bytes([64, 0])),
    ]
    song = parse_smf(build_smf([body]))
    assert [(e.pitch, e.onset_ms, e.duration_ms) for e in song.events] == [
        (60, 0, 500), (64, 250, 500),
    ]


def test_restruck_key_pairs_lifo():
    data = build_smf([[
        (0, note_on(60)),
        (240, note_on(60)),
        (240, note_off(60)),  # closes the re-strike (LIFO)
        (240, note_off(60)),  # closes the original
    ]])
    song = parse_smf(data)
    durations = sorted((e.onset_ms, e.duration_ms) for e in song.events)
    assert durations == [(0, 750), (250, 250)]


def test_unterminated_note_closed_with_warning():
    data = build_smf([[
        (0, note_on(60)),
        (480, note_on(64)),
        (0, note_off(64)),
    ]])
    song = parse_smf(data)
    assert any("unterminated" in w for w in song.warnings)
    sixty = [e for e in song.events if e.pitch == 60][0]
    assert sixty.duration_ms == 500  # closed at track end (tick 480)


def test_format_1_merges_tracks():
    conductor = [(0, tempo_msg(500_000))]
    left = [(0, note_on(48)), (480, note_off(48))]
    right = [(0, note_on(72)), (480, note_off(72))]
    song = parse_smf(build_smf([conductor, left, right], fmt=1))
    assert [e.pitch for e in song.events] == [48, 72]


def test_format_2_rejected():
    data = build_smf([[(0, tempo_msg(500_000))]], fmt=2)
    with pytest.raises(UnsupportedFormat):
        parse_smf(data)


def test_smpte_division_rejected():
    data = build_smf([[(0, tempo_msg(500_000))]], division_override=0x8000 | (25 << 8) | 40)
    with pytest.raises(UnsupportedFormat):
        parse_smf(data)


def test_bad_header_rejected():
    with pytest.raises(MalformedHeader):
        parse_smf(b"RIFF" + b"\x00" * 20)
    with pytest.raises(MalformedHeader):
        parse_smf(b"MThd\x00\x00\x00\x06")  # truncated


def test_no_zero_durations():
    # on and off at the same tick must still produce a positive duration
    data = build_smf([[(0, note_on(60)), (0, note_off(60))]])
    song = parse_smf(data)
    assert song.events[0].duration_ms >= 1


def test_title_from_track_name_meta():
    name = b"\xff\x03\x05Etude"
    data = build_smf([[(0, name), (0, note_on(60)), (10, note_off(60))]])
    assert parse_smf(data).title == "Etude"


# --- round trip -----------------------------------------------------------------

note_lists = st.lists(
    st.tuples(
        st.integers(min_value=21, max_value=108),   # pitch
        st.integers(min_value=0, max_value=20_000), # onset ms
        st.integers(min_value=10, max_value=3_000), # duration ms
    ),
    min_size=0,
    max_size=24,
)


def playable(notes):
    """Drop same-pitch partial overlaps: a held key cannot be re-struck.

    (Off messages carry no note identity, so no pairing convention can
    round-trip a partially overlapping same-pitch shape.)
    """
    kept = []
    last_end: dict[int, int] = {}
    for pitch, onset, duration in sorted(notes, key=lambda n: (n[1], n[0])):
        if onset < last_end.get(pitch, 0):
            continue
        last_end[pitch] = onset + duration
        kept.append((pitch, onset, duration))
    return kept


@given(notes=note_lists)
@settings(max_examples=60)
def test_smf_round_trip_within_1ms(notes):
    events = [NoteEvent(pitch=p, onset_ms=o, duration_ms=d) for p, o, d in playable(notes)]
    song = SongScore(id="rt", title="rt", events=events, tempo_map=[(0, 500_000)], ppq=480)
    reparsed = parse_smf(write_smf(song))
    assert len(reparsed.events) == len(song.events)
    for orig, back in zip(song.events, reparsed.events):
        assert back.pitch == orig.pitch
        assert abs(back.onset_ms - orig.onset_ms) <= 1
        assert abs(back.duration_ms - orig.duration_ms) <= 1


def test_smf_round_trip_nested_restrike():
    # fully nested same-pitch notes survive the LIFO convention exactly
    events = [NoteEvent(60, 0, 2000), NoteEvent(60, 500, 500)]
    song = SongScore(id="rt", title="rt", events=events, tempo_map=[(0, 500_000)], ppq=480)
    reparsed = parse_smf(write_smf(song))
    got = sorted((e.onset_ms, e.duration_ms) for e in reparsed.events)
    assert got == [(0, 2000), (500, 500)]


def test_song_text_round_trip():
    song = SongScore(
        id="fmt", title="Format Check", events=[
            NoteEvent(60, 0, 500, 90, hand="right", finger=1),
            NoteEvent(48, 250, 250, 60),
        ],
        tempo_map=[(0, 500_000), (480, 250_000)], ppq=480,
    )
    back = song_from_text(song_to_text(song))
    assert back.id == song.id and back.title == song.title
    assert back.tempo_map == song.tempo_map and back.ppq == song.ppq
    assert back.events == song.events


# --- capture ------------------------------------------------------------------------

def test_capture_empty_stream():
    assert capture_events([]) == []


def test_capture_single_pair():
    msgs = [NoteMessage(0, "on", 60, 90), NoteMessage(300, "off", 60, 0)]
    events = capture_events(msgs)
    assert [(e.pitch, e.onset_ms, e.duration_ms) for e in events] == [(60, 0, 300)]


def test_capture_interleaved_pairs():
    msgs = [
        NoteMessage(0, "on", 60),
        NoteMessage(10, "on", 64),
        NoteMessage(200, "off", 64),
        NoteMessage(300, "off", 60),
    ]
    events = capture_events(msgs)
    assert [(e.pitch, e.onset_ms, e.duration_ms) for e in events] == [
        (60, 0, 300), (64, 10, 190),
    ]


def test_capture_orphan_off_tallied():
    diag: dict = {}
    events = capture_events([NoteMessage(5, "off", 60)], diagnostics=diag)
    assert events == []
    assert diag["orphan_note_off"] == 1


def test_capture_unterminated_tallied():
    diag: dict = {}
    events = capture_events(
        [NoteMessage(0, "on", 60), NoteMessage(400, "on", 62), NoteMessage(500, "off", 62)],
        diagnostics=diag,
    )
    assert diag["unterminated"] == 1
    hanging = [e for e in events if e.pitch == 60][0]
    assert hanging.duration_ms == 500


def test_capture_rejects_time_travel():
    with pytest.raises(ValueError):
        capture_events([NoteMessage(100, "on", 60), NoteMessage(50, "off", 60)])
