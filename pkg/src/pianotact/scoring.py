"""Performance scoring: global sequence alignment with a timing penalty.

A performance is scored against a reference by finding the optimal global
alignment of the two token sequences (match/substitution/deletion/insertion
with unit gap costs), then counting matched tokens whose onset deviation
meets a threshold. The two costs combine linearly into a total cost and a
normalized 0-100 score.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction

from .errors import ZeroLengthReference
from .tokens import Performance, Token

MATCH = "match"
SUBSTITUTION = "substitution"
DELETION = "deletion"
INSERTION = "insertion"

GAP_COST = Fraction(1)


@dataclass(frozen=True)
class EvalConfig:
    timing_threshold_ms: int = 100
    weight_alignment: float = 1.0
    weight_timing: float = 0.5
    chord_window_ms: int = 30

    def __post_init__(self) -> None:
        if self.timing_threshold_ms <= 0:
            raise ValueError("timing_threshold_ms must be positive")
        if self.weight_alignment < 0 or self.weight_timing < 0:
            raise ValueError("weights must be non-negative")
        if self.weight_alignment + self.weight_timing <= 0:
            raise ValueError("at least one weight must be positive")
        if self.chord_window_ms <= 0:
            raise ValueError("chord_window_ms must be positive")

    def to_dict(self) -> dict:
        return {
            "timing_threshold_ms": self.timing_threshold_ms,
            "weight_alignment": self.weight_alignment,
            "weight_timing": self.weight_timing,
            "chord_window_ms": self.chord_window_ms,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalConfig":
        return cls(
            timing_threshold_ms=d.get("timing_threshold_ms", 100),
            weight_alignment=d.get("weight_alignment", 1.0),
            weight_timing=d.get("weight_timing", 0.5),
            chord_window_ms=d.get("chord_window_ms", 30),
        )


@dataclass(frozen=True)
class AlignmentOp:
    kind: str
    ref_idx: int | None
    perf_idx: int | None
    cost: float


@dataclass
class AlignmentResult:
    ops: list[AlignmentOp]
    matched_pairs: list[tuple[int, int]]  # (ref onset ms, perf onset ms)
    alignment_cost: float
    timing_cost: int = 0

    @property
    def matched_count(self) -> int:
        return len(self.matched_pairs)

    def op_counts(self) -> dict[str, int]:
        counts = {MATCH: 0, SUBSTITUTION: 0, DELETION: 0, INSERTION: 0}
        for op in self.ops:
            counts[op.kind] += 1
        return counts


def substitution_cost(a: frozenset[int], b: frozenset[int]) -> Fraction:
    """Token substitution cost in [0, 1].

    Zero only for identical pitch sets; 1 for fully differing tokens of the
    same size (in particular two different single notes); partial chord
    overlap costs the mismatched-note fraction of the larger token.
    """
    if a == b:
        return Fraction(0)
    mismatched = max(len(a - b), len(b - a))
    return Fraction(mismatched, max(len(a), len(b)))


def align(ref: list[Token] | tuple[Token, ...], perf: list[Token] | tuple[Token, ...]) -> AlignmentResult:
    """Optimal global alignment of two token sequences.

    Cost model: match (identical pitch sets) 0, substitution per
    `substitution_cost`, deletion and insertion 1 per token. Among
    minimum-cost alignments the result canonicalizes to the fewest gaps and
    then the most matches, which makes the operation counts unique and the
    deletion/insertion split symmetric under swapping the roles of the two
    sequences. Traceback ties then break match > substitution > deletion >
    insertion, so matched pairs are reproducible.
    """
    n, m = len(ref), len(perf)
    # DP value: (cost, gap count, -match count), compared lexicographically.
    zero = (Fraction(0), 0, 0)
    table: list[list[tuple[Fraction, int, int]]] = [
        [zero] * (m + 1) for _ in range(n + 1)
    ]
    for i in range(1, n + 1):
        table[i][0] = (GAP_COST * i, i, 0)
    for j in range(1, m + 1):
        table[0][j] = (GAP_COST * j, j, 0)
    for i in range(1, n + 1):
        ref_pitches = ref[i - 1].pitches
        row = table[i]
        prev_row = table[i - 1]
        for j in range(1, m + 1):
            sub = substitution_cost(ref_pitches, perf[j - 1].pitches)
            dc, dg, dm = prev_row[j - 1]
            if sub == 0:
                diag = (dc, dg, dm - 1)
            else:
                diag = (dc + sub, dg, dm)
            uc, ug, um = prev_row[j]
            up = (uc + GAP_COST, ug + 1, um)
            lc, lg, lm = row[j - 1]
            left = (lc + GAP_COST, lg + 1, lm)
            best = diag
            if up < best:
                best = up
            if left < best:
                best = left
            row[j] = best

    ops_rev: list[AlignmentOp] = []
    i, j = n, m
    while i > 0 or j > 0:
        value = table[i][j]
        chosen = None
        if i > 0 and j > 0:
            sub = substitution_cost(ref[i - 1].pitches, perf[j - 1].pitches)
            dc, dg, dm = table[i - 1][j - 1]
            if sub == 0:
                if (dc, dg, dm - 1) == value:
                    chosen = AlignmentOp(MATCH, i - 1, j - 1, 0.0)
            elif (dc + sub, dg, dm) == value:
                chosen = AlignmentOp(SUBSTITUTION, i - 1, j - 1, float(sub))
        if chosen is None and i > 0:
            uc, ug, um = table[i - 1][j]
            if (uc + GAP_COST, ug + 1, um) == value:
                chosen = AlignmentOp(DELETION, i - 1, None, float(GAP_COST))
        if chosen is None and j > 0:
            lc, lg, lm = table[i][j - 1]
            if (lc + GAP_COST, lg + 1, lm) == value:
                chosen = AlignmentOp(INSERTION, None, j - 1, float(GAP_COST))
        if chosen is None:  # pragma: no cover - DP invariant
            raise AssertionError("traceback found no consistent predecessor")
        ops_rev.append(chosen)
        if chosen.ref_idx is not None:
            i -= 1
        if chosen.perf_idx is not None:
            j -= 1
    ops = list(reversed(ops_rev))

    matched_pairs = [
        (ref[op.ref_idx].onset_ms, perf[op.perf_idx].onset_ms)
        for op in ops
        if op.kind == MATCH
    ]
    return AlignmentResult(
        ops=ops,
        matched_pairs=matched_pairs,
        alignment_cost=float(table[n][m][0]),
    )


def timing_cost(alignment: AlignmentResult, timing_threshold_ms: int) -> int:
    """Count matched pairs whose onset deviation meets or exceeds the threshold.

    Substituted, deleted and inserted tokens contribute nothing.
    """
    if timing_threshold_ms <= 0:
        raise ValueError("timing threshold must be positive")
    return sum(
        1 for t_ref, t_perf in alignment.matched_pairs
        if abs(t_ref - t_perf) >= timing_threshold_ms
    )


def total_cost(alignment_cost: float, timing_cost_value: int, config: EvalConfig) -> float:
    if alignment_cost < 0 or timing_cost_value < 0:
        raise ValueError("costs must be non-negative")
    return config.weight_alignment * alignment_cost + config.weight_timing * timing_cost_value


def normalized_score(total_cost_value: float, ref_length: int, config: EvalConfig) -> float:
    """Map total cost into [0, 100], 100 being a perfect performance.

    The denominator is the worst plausible cost of a reference-length
    performance: every token a gap plus every token a timing violation.
    """
    if ref_length <= 0:
        raise ZeroLengthReference("reference must contain at least one token")
    denom = (config.weight_alignment + config.weight_timing) * ref_length
    return 100.0 * max(0.0, 1.0 - total_cost_value / denom)


@dataclass
class EvalReport:
    alignment: AlignmentResult
    total_cost: float
    score: float
    config: EvalConfig = field(default_factory=EvalConfig)

    @property
    def timing_cost(self) -> int:
        return self.alignment.timing_cost

    @property
    def alignment_cost(self) -> float:
        return self.alignment.alignment_cost


def evaluate_tokens(
    ref: list[Token] | tuple[Token, ...],
    perf: list[Token] | tuple[Token, ...],
    config: EvalConfig | None = None,
) -> EvalReport:
    """Align, count timing violations, and combine into the weighted report."""
    cfg = config or EvalConfig()
    result = align(ref, perf)
    result.timing_cost = timing_cost(result, cfg.timing_threshold_ms)
    total = total_cost(result.alignment_cost, result.timing_cost, cfg)
    score = normalized_score(total, len(ref), cfg)
    return EvalReport(alignment=result, total_cost=total, score=score, config=cfg)


def evaluate_performance(
    ref: Performance,
    perf: Performance,
    config: EvalConfig | None = None,
) -> EvalReport:
    return evaluate_tokens(list(ref.tokens), list(perf.tokens), config)


def format_score(score: float) -> str:
    """Canonical display form of a score, e.g. 81.25 -> '81.25', 100.0 -> '100'."""
    text = f"{score:.4f}".rstrip("0").rstrip(".")
    return text if text else "0"


def report_to_dict(
    report: EvalReport,
    ref: list[Token] | tuple[Token, ...] | None = None,
    perf: list[Token] | tuple[Token, ...] | None = None,
) -> dict:
    """Serializable report; token details are included when sequences are given."""
    threshold = report.config.timing_threshold_ms
    ops = []
    for op in report.alignment.ops:
        d: dict = {
            "kind": op.kind,
            "ref_idx": op.ref_idx,
            "perf_idx": op.perf_idx,
            "cost": op.cost,
        }
        if ref is not None and op.ref_idx is not None:
            tok = ref[op.ref_idx]
            d["ref_pitches"] = tok.sorted_pitches()
            d["t_ref"] = tok.onset_ms
        if perf is not None and op.perf_idx is not None:
            tok = perf[op.perf_idx]
            d["perf_pitches"] = tok.sorted_pitches()
            d["t_perf"] = tok.onset_ms
        if op.kind == MATCH and "t_ref" in d and "t_perf" in d:
            delta = abs(d["t_ref"] - d["t_perf"])
            d["delta_ms"] = delta
            d["timing_violation"] = delta >= threshold
        ops.append(d)
    counts = report.alignment.op_counts()
    return {
        "alignment_cost": report.alignment_cost,
        "timing_cost": report.timing_cost,
        "total_cost": report.total_cost,
        "score": report.score,
        "score_display": format_score(report.score),
        "matched_count": report.alignment.matched_count,
        "matched_pairs": [list(p) for p in report.alignment.matched_pairs],
        "op_counts": counts,
        "ops": ops,
        "config": report.config.to_dict(),
    }


def report_from_dict(d: dict) -> EvalReport:
    ops = [
        AlignmentOp(
            kind=o["kind"],
            ref_idx=o.get("ref_idx"),
            perf_idx=o.get("perf_idx"),
            cost=o.get("cost", 0.0),
        )
        for o in d["ops"]
    ]
    alignment = AlignmentResult(
        ops=ops,
        matched_pairs=[tuple(p) for p in d.get("matched_pairs", [])],
        alignment_cost=d["alignment_cost"],
        timing_cost=d.get("timing_cost", 0),
    )
    return EvalReport(
        alignment=alignment,
        total_cost=d["total_cost"],
        score=d["score"],
        config=EvalConfig.from_dict(d.get("config", {})),
    )
