"""Progress deltas over the session log, permutation tests, and one-way ANOVA.

Daily progress is measured on the normalized score (higher is better):
active progress compares the post-test to the same day's pre-test, passive
retention compares the next day's pre-test to the post-test, so forgetting
overnight shows up as a negative retention delta.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from itertools import combinations

from scipy import stats as scipy_stats

from .errors import DegenerateGroups, EmptyGroup, MissingTest
from .store import SessionStore

EXACT_COMBINATION_LIMIT = 20_000
DEFAULT_ITERATIONS = 10_000


@dataclass(frozen=True)
class ProgressPoint:
    participant_id: str
    day: int
    active_delta: float
    passive_delta: float | None  # needs the next day's pre-test


def _test_score(store: SessionStore, participant: str, day: int, kind: str, song: str | None) -> float:
    rec = store.one(participant, day, kind, song)
    if rec is None or rec.eval is None:
        raise MissingTest(f"no {kind} for participant {participant} on day {day}")
    return rec.eval.score


def active_progress(store: SessionStore, participant: str, day: int, song: str | None = None) -> float:
    """Post-test score minus pre-test score for one day of active practice."""
    post = _test_score(store, participant, day, "post_test", song)
    pre = _test_score(store, participant, day, "pre_test", song)
    return post - pre


def passive_retention(store: SessionStore, participant: str, day: int, song: str | None = None) -> float:
    """Next day's pre-test minus this day's post-test; negative means forgetting."""
    nxt = _test_score(store, participant, day + 1, "pre_test", song)
    post = _test_score(store, participant, day, "post_test", song)
    return nxt - post


def progress_points(store: SessionStore, participant: str, song: str | None = None) -> list[ProgressPoint]:
    days = sorted({
        r.day for r in store.find(participant_id=participant)
        if r.kind in ("pre_test", "post_test") and (song is None or r.song_ref == song)
    })
    points = []
    for day in days:
        try:
            active = active_progress(store, participant, day, song)
        except MissingTest:
            continue
        try:
            passive = passive_retention(store, participant, day, song)
        except MissingTest:
            passive = None
        points.append(ProgressPoint(participant, day, active, passive))
    return points


def _mean(values: list[float]) -> float:
    return math.fsum(values) / len(values)


def permutation_test(
    group_a: list[float],
    group_b: list[float],
    iterations: int = DEFAULT_ITERATIONS,
    seed: int | None = None,
    method: str = "auto",
) -> float:
    """Two-sided permutation p-value for a difference of group means.

    Enumerates every relabeling when the combination count allows it,
    otherwise draws seeded Monte Carlo relabelings.
    """
    if not group_a or not group_b:
        raise EmptyGroup("permutation test requires two non-empty groups")
    if method not in ("auto", "exact", "montecarlo"):
        raise ValueError(f"method {method!r} unknown")
    pooled = list(group_a) + list(group_b)
    na = len(group_a)
    n = len(pooled)
    observed = abs(_mean(pooled[:na]) - _mean(pooled[na:]))
    eps = 1e-9 * max(1.0, observed)

    def diff_for(indices) -> float:
        chosen = set(indices)
        a = [pooled[i] for i in range(n) if i in chosen]
        b = [pooled[i] for i in range(n) if i not in chosen]
        return abs(_mean(a) - _mean(b))

    if method == "exact" or (method == "auto" and math.comb(n, na) <= EXACT_COMBINATION_LIMIT):
        total = 0
        hits = 0
        for indices in combinations(range(n), na):
            total += 1
            if diff_for(indices) >= observed - eps:
                hits += 1
        return hits / total

    rng = random.Random(seed)
    hits = 0
    idx = list(range(n))
    for _ in range(iterations):
        sample = rng.sample(idx, na)
        if diff_for(sample) >= observed - eps:
            hits += 1
    return hits / iterations


def anova_f(groups: list[list[float]]) -> tuple[float, float]:
    """One-way ANOVA F statistic and its p-value.

    Zero within-group variance is handled without error: F is +inf when the
    group means still differ, 0 when everything is one constant.
    """
    if len(groups) < 2 or any(len(g) < 2 for g in groups):
        raise DegenerateGroups("need at least two groups with at least two values each")
    k = len(groups)
    n = sum(len(g) for g in groups)
    if n <= k:
        raise DegenerateGroups("total observations must exceed the group count")
    grand = _mean([v for g in groups for v in g])
    ss_between = math.fsum(len(g) * (_mean(g) - grand) ** 2 for g in groups)
    ss_within = math.fsum((v - _mean(g)) ** 2 for g in groups for v in g)
    df_between = k - 1
    df_within = n - k
    ms_between = ss_between / df_between
    ms_within = ss_within / df_within
    if ms_within == 0.0:
        f = math.inf if ms_between > 0 else 0.0
    else:
        f = ms_between / ms_within
    p = float(scipy_stats.f.sf(f, df_between, df_within)) if math.isfinite(f) else 0.0
    return f, p


def metric_by_condition(
    store: SessionStore,
    metric: str,
    conditions: list[str],
    song: str | None = None,
) -> dict[str, list[float]]:
    """Collect per-(participant, day) metric values grouped by that day's condition.

    The day's condition comes from any session record logged for the
    participant on the metric's anchor day.
    """
    if metric not in ("active_progress", "passive_retention"):
        raise ValueError(f"metric {metric!r} unknown")
    groups: dict[str, list[float]] = {c: [] for c in conditions}
    for participant in store.participants():
        days = sorted({r.day for r in store.find(participant_id=participant)})
        for day in days:
            day_records = store.find(participant_id=participant, day=day)
            condition = next(
                (r.glove_condition for r in day_records if r.glove_condition != "none"),
                "none",
            )
            if condition not in groups:
                continue
            try:
                if metric == "active_progress":
                    value = active_progress(store, participant, day, song)
                else:
                    value = passive_retention(store, participant, day, song)
            except MissingTest:
                continue
            groups[condition].append(value)
    return groups
