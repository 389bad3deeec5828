"""Report rendering: delimited tables plus matplotlib figures on disk."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .analytics import ProgressPoint

OP_COLORS = {
    "match": "#2a9d8f",
    "substitution": "#e9c46a",
    "deletion": "#e76f51",
    "insertion": "#9b5de5",
}


def progress_table(points: list[ProgressPoint]) -> str:
    lines = ["day\tactive_delta\tpassive_delta"]
    for p in points:
        passive = "" if p.passive_delta is None else f"{p.passive_delta:g}"
        lines.append(f"{p.day}\t{p.active_delta:g}\t{passive}")
    return "\n".join(lines) + "\n"


def write_progress_report(points: list[ProgressPoint], out_dir: str | Path,
                          participant_id: str) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tsv_path = out_dir / f"progress_{participant_id}.tsv"
    tsv_path.write_text(progress_table(points))

    days = [p.day for p in points]
    active = [p.active_delta for p in points]
    passive = [p.passive_delta if p.passive_delta is not None else 0.0 for p in points]

    fig, ax = plt.subplots(figsize=(7, 4))
    width = 0.38
    ax.bar([d - width / 2 for d in days], active, width, label="active practice", color="#2a9d8f")
    ax.bar([d + width / 2 for d in days], passive, width, label="passive rehearsal", color="#577590")
    ax.axhline(0, color="black", linewidth=0.8)
    ax.set_xlabel("day")
    ax.set_ylabel("score delta")
    ax.set_title(f"Daily progress: {participant_id}")
    ax.set_xticks(days)
    ax.legend()
    fig.tight_layout()
    png_path = out_dir / f"progress_{participant_id}.png"
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return tsv_path, png_path


def eval_table(report_dict: dict) -> str:
    lines = [
        f"#alignment_cost\t{report_dict['alignment_cost']:g}",
        f"#timing_cost\t{report_dict['timing_cost']}",
        f"#total_cost\t{report_dict['total_cost']:g}",
        f"#score\t{report_dict['score_display']}",
        f"#matched_count\t{report_dict['matched_count']}",
        "op\tref_idx\tperf_idx\tcost\tref_pitches\tperf_pitches\tdelta_ms\ttiming_violation",
    ]
    for op in report_dict["ops"]:
        ref_p = ",".join(str(p) for p in op.get("ref_pitches", [])) or "-"
        perf_p = ",".join(str(p) for p in op.get("perf_pitches", [])) or "-"
        ref_idx = op["ref_idx"] if op["ref_idx"] is not None else "-"
        perf_idx = op["perf_idx"] if op["perf_idx"] is not None else "-"
        delta = op.get("delta_ms", "-")
        violation = {True: "1", False: "0"}.get(op.get("timing_violation"), "-")
        lines.append(f"{op['kind']}\t{ref_idx}\t{perf_idx}\t{op['cost']:g}\t{ref_p}\t{perf_p}\t{delta}\t{violation}")
    return "\n".join(lines) + "\n"


def write_eval_report(report_dict: dict, out_dir: str | Path, name: str = "eval") -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tsv_path = out_dir / f"{name}.tsv"
    tsv_path.write_text(eval_table(report_dict))

    fig, ax = plt.subplots(figsize=(8, 4.5))
    seen = set()
    for op in report_dict["ops"]:
        color = OP_COLORS[op["kind"]]
        label = op["kind"] if op["kind"] not in seen else None
        seen.add(op["kind"])
        if "t_ref" in op and op.get("ref_pitches"):
            ax.scatter(op["t_ref"], min(op["ref_pitches"]), marker="s", s=48,
                       color=color, label=label)
            label = None
        if "t_perf" in op and op.get("perf_pitches"):
            ax.scatter(op["t_perf"], min(op["perf_pitches"]), marker="o", s=26,
                       color=color, label=label)
        if op.get("timing_violation"):
            ax.scatter(op["t_perf"], min(op["perf_pitches"]), marker="o", s=140,
                       facecolors="none", edgecolors="red", linewidths=1.4)
    ax.set_xlabel("onset (ms)")
    ax.set_ylabel("pitch")
    score = report_dict["score_display"]
    ax.set_title(f"Alignment (squares: reference, dots: performance) — score {score}")
    if seen:
        ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    png_path = out_dir / f"{name}.png"
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return tsv_path, png_path


def stats_table(groups: dict[str, list[float]], results: dict) -> str:
    lines = ["group\tn\tmean\tvalues"]
    for name, values in groups.items():
        mean = sum(values) / len(values) if values else float("nan")
        joined = ",".join(f"{v:g}" for v in values)
        lines.append(f"{name}\t{len(values)}\t{mean:g}\t{joined}")
    for key in ("permutation_p", "anova_f", "anova_p"):
        if key in results:
            lines.append(f"#{key}\t{results[key]:g}")
    return "\n".join(lines) + "\n"


def write_stats_report(groups: dict[str, list[float]], results: dict,
                       out_dir: str | Path, metric: str) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tsv_path = out_dir / f"stats_{metric}.tsv"
    tsv_path.write_text(stats_table(groups, results))

    fig, ax = plt.subplots(figsize=(6, 4))
    names = list(groups)
    data = [groups[n] for n in names]
    if any(data):
        ax.boxplot(data, tick_labels=names)
        for i, values in enumerate(data, start=1):
            ax.scatter([i] * len(values), values, alpha=0.6, s=18, color="#577590")
    ax.set_ylabel(metric)
    title = f"{metric} by condition"
    if "permutation_p" in results:
        title += f" (permutation p = {results['permutation_p']:g})"
    ax.set_title(title)
    fig.tight_layout()
    png_path = out_dir / f"stats_{metric}.png"
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return tsv_path, png_path
