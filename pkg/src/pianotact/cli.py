"""Command-line interface.

Subcommands mirror the platform's workflow: import songs, evaluate captures,
build stimulation schedules, run the glove simulator, report progress,
compare study groups, and manage assignments. Reports print tab-separated
records to stdout and, where an output directory is given (or defaulted),
render matplotlib figures next to the delimited files.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import errors
from .analytics import anova_f, metric_by_condition, permutation_test, progress_points
from .glove import PairRunner, expected_trace, trace_to_text
from .haptics import HapticConfig, assign_fingers, compile_schedule, schedule_from_text, schedule_to_text
from .library import SongLibrary, slugify
from .midi import capture_from_text, parse_smf, song_from_text
from .reporting import (
    eval_table,
    progress_table,
    stats_table,
    write_eval_report,
    write_progress_report,
    write_stats_report,
)
from .scoring import EvalConfig, evaluate_performance, report_to_dict
from .store import AssignmentStore, SessionStore
from .study import assign_latin_square, make_team
from .tokens import Performance, extract_chords, make_performance, rebase_times


@click.group()
@click.option("--data-dir", envvar="PIANOTACT_DATA_DIR", default="data",
              type=click.Path(path_type=Path), help="Directory holding songs and logs.")
@click.pass_context
def main(ctx: click.Context, data_dir: Path) -> None:
    """Piano practice platform: scoring, haptic schedules, study tooling."""
    ctx.ensure_object(dict)
    ctx.obj["data_dir"] = data_dir


def _library(ctx) -> SongLibrary:
    return SongLibrary(ctx.obj["data_dir"])


def _sessions(ctx) -> SessionStore:
    return SessionStore(ctx.obj["data_dir"] / "sessions.log")


def _assignments(ctx) -> AssignmentStore:
    return AssignmentStore(ctx.obj["data_dir"] / "assignments.log")


# --- song -------------------------------------------------------------------

@main.group()
def song() -> None:
    """Manage the reference song library."""


@song.command("import")
@click.argument("file", type=click.Path(exists=True, path_type=Path))
@click.option("--id", "song_id", default="", help="Library id (defaults to the file stem).")
@click.option("--title", default="", help="Display title (defaults to the SMF track name).")
@click.pass_context
def song_import(ctx, file: Path, song_id: str, title: str) -> None:
    """Import a Standard MIDI File into the library."""
    try:
        imported = _library(ctx).import_smf(
            file.read_bytes(), song_id=song_id or slugify(file.stem), title=title
        )
    except (errors.MalformedHeader, errors.UnsupportedFormat) as exc:
        raise click.ClickException(f"{type(exc).__name__}: {exc}")
    click.echo(f"id\t{imported.id}")
    click.echo(f"title\t{imported.title}")
    click.echo(f"events\t{len(imported.events)}")
    click.echo(f"span_ms\t{imported.span_ms}")
    for w in imported.warnings:
        click.echo(f"warning\t{w}", err=True)


@song.command("list")
@click.pass_context
def song_list(ctx) -> None:
    """List imported songs."""
    for song_id in _library(ctx).list_ids():
        click.echo(song_id)


# --- eval ---------------------------------------------------------------------

def _load_song_arg(ctx, ref: str):
    path = Path(ref)
    if path.exists():
        if path.suffix.lower() in (".mid", ".midi", ".smf"):
            return parse_smf(path.read_bytes(), song_id=slugify(path.stem))
        return song_from_text(path.read_text())
    return _library(ctx).get(ref)


@main.command("eval")
@click.option("--ref", required=True, help="Reference song: library id, .song file, or SMF.")
@click.option("--perf", required=True, type=click.Path(exists=True, path_type=Path),
              help="Captured performance file (time_ms<TAB>on|off<TAB>pitch<TAB>velocity).")
@click.option("--T", "timing_threshold", default=100, show_default=True,
              help="Timing threshold in ms.")
@click.option("--wa", default=1.0, show_default=True, help="Alignment cost weight.")
@click.option("--wt", default=0.5, show_default=True, help="Timing cost weight.")
@click.option("--chord-window", default=30, show_default=True, help="Chord merge window in ms.")
@click.option("--out-dir", type=click.Path(path_type=Path), default=None,
              help="Also write eval.tsv and eval.png here.")
@click.pass_context
def eval_cmd(ctx, ref, perf, timing_threshold, wa, wt, chord_window, out_dir) -> None:
    """Score a captured performance against a reference song."""
    try:
        song_score = _load_song_arg(ctx, ref)
    except errors.UnknownSong as exc:
        raise click.ClickException(str(exc))
    from .midi import capture_events
    messages = capture_from_text(Path(perf).read_text())
    events = capture_events(messages)
    if not events:
        raise click.ClickException("capture contains no note events")
    config = EvalConfig(
        timing_threshold_ms=timing_threshold,
        weight_alignment=wa,
        weight_timing=wt,
        chord_window_ms=chord_window,
    )
    ref_perf = Performance(
        tuple(extract_chords(song_score.events, config.chord_window_ms)), source="reference"
    )
    perf_perf = make_performance(events, source="test", chord_window_ms=config.chord_window_ms)
    perf_perf = rebase_times(perf_perf, ref_perf)
    report = evaluate_performance(ref_perf, perf_perf, config)
    report_dict = report_to_dict(report, list(ref_perf.tokens), list(perf_perf.tokens))
    click.echo(eval_table(report_dict), nl=False)
    if out_dir is not None:
        tsv_path, png_path = write_eval_report(report_dict, out_dir)
        click.echo(f"#wrote\t{tsv_path}", err=True)
        click.echo(f"#wrote\t{png_path}", err=True)


# --- schedule -------------------------------------------------------------------

@main.group()
def schedule() -> None:
    """Compile vibrotactile stimulation schedules."""


@schedule.command("build")
@click.option("--song", "song_ref", required=True, help="Library id, .song file, or SMF.")
@click.option("--minutes", default=150, show_default=True, help="Passive session length.")
@click.option("--sham", is_flag=True, help="Mark the schedule sham (rendered as zero drive).")
@click.option("--max-pulse", default=250, show_default=True)
@click.option("--min-gap", default=50, show_default=True)
@click.option("--loop-gap", default=2000, show_default=True)
@click.option("-o", "--output", type=click.Path(path_type=Path), default=None,
              help="Write the schedule here instead of stdout.")
@click.pass_context
def schedule_build(ctx, song_ref, minutes, sham, max_pulse, min_gap, loop_gap, output) -> None:
    """Compile a song into a repeating per-finger pulse schedule."""
    try:
        song_score = _load_song_arg(ctx, song_ref)
    except errors.UnknownSong as exc:
        raise click.ClickException(str(exc))
    fingered = assign_fingers(song_score)
    config = HapticConfig(max_pulse_ms=max_pulse, min_gap_ms=min_gap, loop_gap_ms=loop_gap)
    try:
        sched = compile_schedule(fingered, minutes, config, sham=sham)
    except (errors.SongLongerThanSession, errors.UnfingeredEvent) as exc:
        raise click.ClickException(f"{type(exc).__name__}: {exc}")
    text = schedule_to_text(sched)
    if output is not None:
        output.parent.mkdir(parents=True, exist_ok=True)
        output.write_text(text)
        click.echo(f"#wrote\t{output}", err=True)
        click.echo(f"#repetitions\t{sched.repetitions}")
        click.echo(f"#events_per_repetition\t{len(sched.events)}")
    else:
        click.echo(text, nl=False)


# --- glove-sim --------------------------------------------------------------------

@main.group(name="glove-sim")
def glove_sim() -> None:
    """Simulated glove pair."""


@glove_sim.command("run")
@click.option("--schedule", "schedule_file", required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--minutes", default=150.0, show_default=True)
@click.option("--drop-rate", default=0.0, show_default=True)
@click.option("--latency", default=0.0, show_default=True, help="Link latency in ms.")
@click.option("--seed", default=0, show_default=True)
@click.option("--skew-ppm", default=0.0, show_default=True, help="Slave clock skew.")
@click.option("-o", "--output", type=click.Path(path_type=Path), default=None,
              help="Write the activation trace here instead of stdout.")
def glove_sim_run(schedule_file, minutes, drop_rate, latency, seed, skew_ppm, output) -> None:
    """Upload a schedule to the simulated pair and play it, logging activations."""
    sched = schedule_from_text(Path(schedule_file).read_text())
    runner = PairRunner(drop_rate=drop_rate, latency_ms=latency, seed=seed,
                        slave_skew_ppm=skew_ppm)
    runner.upload(sched)
    runner.start()
    runner.run(minutes)
    text = trace_to_text(runner.trace)
    if output is not None:
        output.parent.mkdir(parents=True, exist_ok=True)
        output.write_text(text)
        click.echo(f"#wrote\t{output}", err=True)
    else:
        click.echo(text, nl=False)
    click.echo(f"#master_battery_pct\t{runner.master.battery_pct:.3f}")
    click.echo(f"#slave_battery_pct\t{runner.slave.battery_pct:.3f}")
    click.echo(f"#activations\t{len(runner.trace)}")
    click.echo(f"#expected_activations\t{len(expected_trace(sched))}")
    click.echo(f"#completed\t{int(runner.master.completed and runner.slave.completed)}")
    click.echo(f"#max_divergence_ms\t{runner.diagnostics['max_divergence_ms']:.3f}")


# --- report -------------------------------------------------------------------------

@main.group()
def report() -> None:
    """Progress reports."""


@report.command("participant")
@click.argument("participant_id")
@click.option("--out-dir", type=click.Path(path_type=Path), default=None,
              help="Figure/table directory (default: <data-dir>/reports).")
@click.pass_context
def report_participant(ctx, participant_id, out_dir) -> None:
    """Per-day active/passive deltas, as a table plus a rendered figure."""
    store = _sessions(ctx)
    points = progress_points(store, participant_id)
    if not points:
        raise click.ClickException(f"no test sessions recorded for {participant_id!r}")
    click.echo(progress_table(points), nl=False)
    target = out_dir if out_dir is not None else ctx.obj["data_dir"] / "reports"
    tsv_path, png_path = write_progress_report(points, target, participant_id)
    click.echo(f"#wrote\t{tsv_path}", err=True)
    click.echo(f"#wrote\t{png_path}", err=True)


# --- stats ----------------------------------------------------------------------------

@main.group()
def stats() -> None:
    """Study statistics."""


@stats.command("compare")
@click.option("--metric", default="passive_retention", show_default=True,
              type=click.Choice(["active_progress", "passive_retention"]))
@click.option("--groups", default="functional,sham", show_default=True,
              help="Comma-separated glove conditions to compare.")
@click.option("--iterations", default=10_000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out-dir", type=click.Path(path_type=Path), default=None,
              help="Also write stats_<metric>.tsv/.png here.")
@click.pass_context
def stats_compare(ctx, metric, groups, iterations, seed, out_dir) -> None:
    """Permutation test and one-way ANOVA across glove conditions."""
    names = [g.strip() for g in groups.split(",") if g.strip()]
    store = _sessions(ctx)
    collected = metric_by_condition(store, metric, names)
    results: dict = {}
    try:
        values = [collected[n] for n in names]
        if len(names) == 2:
            results["permutation_p"] = permutation_test(
                values[0], values[1], iterations=iterations, seed=seed
            )
        results["anova_f"], results["anova_p"] = anova_f(values)
    except (errors.EmptyGroup, errors.DegenerateGroups) as exc:
        raise click.ClickException(f"{type(exc).__name__}: {exc}")
    click.echo(stats_table(collected, results), nl=False)
    if out_dir is not None:
        tsv_path, png_path = write_stats_report(collected, results, out_dir, metric)
        click.echo(f"#wrote\t{tsv_path}", err=True)
        click.echo(f"#wrote\t{png_path}", err=True)


# --- study -------------------------------------------------------------------------------

@main.group()
def study() -> None:
    """Counterbalanced study assignment."""


@study.command("assign")
@click.option("--team", "team_file", required=True, type=click.Path(exists=True, path_type=Path),
              help="TSV of participant_id<TAB>improvement, 8 rows.")
@click.option("--seed", default=0, show_default=True)
@click.option("--team-id", default="", help="Defaults to the team file stem.")
@click.pass_context
def study_assign(ctx, team_file, seed, team_id) -> None:
    """Pair by skill, counterbalance conditions, and store the assignment.

    Prints the blinded view (no glove condition); use `study unblind` for the
    analyst view.
    """
    improvements: dict[str, float] = {}
    for line in Path(team_file).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        pid, value = line.split("\t")
        improvements[pid] = float(value)
    try:
        team = make_team(team_id or slugify(Path(team_file).stem), improvements)
        rows = [a.to_dict() for a in assign_latin_square(team, seed)]
    except (errors.MalformedTeam, errors.OddCount) as exc:
        raise click.ClickException(f"{type(exc).__name__}: {exc}")
    _assignments(ctx).add(rows)
    click.echo("participant_id\tteam_id\tperiod\tsong")
    for row in rows:
        click.echo(f"{row['participant_id']}\t{row['team_id']}\t{row['period']}\t{row['song']}")


@study.command("unblind")
@click.option("--team", "team_id", required=True)
@click.option("--role", default="participant", show_default=True,
              help="Must be 'analyst' to reveal glove conditions.")
@click.pass_context
def study_unblind(ctx, team_id, role) -> None:
    """Analyst-only view of assignments including the glove condition."""
    if role != "analyst":
        raise click.ClickException("glove conditions are blinded; pass --role analyst")
    rows = _assignments(ctx).for_team(team_id)
    if not rows:
        raise click.ClickException(f"no assignments stored for team {team_id!r}")
    click.echo("participant_id\tteam_id\tperiod\tsong\tglove")
    for row in rows:
        click.echo(f"{row['participant_id']}\t{row['team_id']}\t{row['period']}"
                   f"\t{row['song']}\t{row['glove']}")


# --- serve ---------------------------------------------------------------------------------

@main.command("serve")
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.pass_context
def serve(ctx, port, host) -> None:
    """Run the HTTP service over the data directory."""
    import uvicorn

    from .service import create_app

    app = create_app(ctx.obj["data_dir"])
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main(sys.argv[1:])
