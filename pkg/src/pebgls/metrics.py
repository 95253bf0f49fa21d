"""Evaluation quantities: excess over the optimum, speedups and efficiency,
rank-sum comparison, penalty quality and contribution timelines.

Everything operates on immutable values or finished RunRecords, so these
functions are safe to call from anywhere.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np


@dataclass(frozen=True)
class Event:
    """One timestamped entry of a worker's run log."""

    time: float
    iteration: int
    kind: str  # improvement | send | receive | penalize | stop
    cost: int | None = None
    edges: tuple | None = None


@dataclass
class RunRecord:
    """Per-worker log of one run: events plus summary counters."""

    worker_id: int
    seed: int
    events: list[Event] = field(default_factory=list)
    final_cost: int | None = None
    duration: float = 0.0
    iterations: int = 0
    sends: int = 0
    receives: int = 0
    penalizations: int = 0

    def improvements(self) -> list[Event]:
        return [e for e in self.events if e.kind == "improvement"]

    def trace(self) -> tuple:
        """Wall-clock-free projection of the event log (for determinism checks)."""
        return tuple((e.iteration, e.kind, e.cost, e.edges) for e in self.events)

    def validate(self) -> None:
        times = [e.time for e in self.events]
        if times != sorted(times):
            raise ValueError("events are not sorted by elapsed time")
        imp = [e.cost for e in self.improvements()]
        if any(b >= a for a, b in zip(imp, imp[1:])):
            raise ValueError("improvement costs are not strictly decreasing")


def excess(cost: int, optimum: int) -> float:
    """Percentage excess of a solution cost over the registered optimum."""
    if optimum <= 0:
        raise ValueError(f"optimum must be positive, got {optimum}")
    if cost < optimum:
        raise ValueError(
            f"cost {cost} below optimum {optimum}: broken registry or cost bug")
    return 100.0 * (cost - optimum) / optimum


def _mean(samples: Sequence[float], what: str) -> float:
    if len(samples) == 0:
        raise ValueError(f"{what}: empty sample")
    if any(s <= 0 for s in samples):
        raise ValueError(f"{what}: runtimes must be positive")
    return sum(samples) / len(samples)


def speedup_s1(seq_times: Sequence[float], par_times: Sequence[float]) -> float:
    """Mean single-worker runtime over mean K-worker runtime."""
    return _mean(seq_times, "seq_times") / _mean(par_times, "par_times")


def speedup_s2(par1_times: Sequence[float], park_times: Sequence[float]) -> float:
    """Orthodox speedup: same parallel algorithm on one processor vs K."""
    return _mean(par1_times, "par1_times") / _mean(park_times, "parK_times")


def efficiency(speedup: float, k: int) -> float:
    if k < 1:
        raise ValueError(f"worker count must be >= 1, got {k}")
    return speedup / k


class MannWhitneyResult(NamedTuple):
    u: float
    p_value: float


def _rank_average(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x), dtype=np.float64)
    sx = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def mann_whitney_u(a: Sequence[float], b: Sequence[float]) -> MannWhitneyResult:
    """Two-sided rank-sum test.

    U counts pairs where a exceeds b (ties half). The p-value uses the
    normal approximation with tie and continuity corrections; fine for
    the sample sizes used here, and checked against exact enumeration for
    tiny samples in the test suite.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    n1, n2 = a.size, b.size
    combined = np.concatenate([a, b])
    ranks = _rank_average(combined)
    u1 = float(ranks[:n1].sum()) - n1 * (n1 + 1) / 2.0
    n = n1 + n2
    _, counts = np.unique(combined, return_counts=True)
    tie_sum = float(np.sum(counts.astype(np.float64) ** 3 - counts))
    var = n1 * n2 / 12.0 * ((n + 1) - tie_sum / (n * (n - 1)))
    if var <= 0.0:
        return MannWhitneyResult(u1, 1.0)
    z = (abs(u1 - n1 * n2 / 2.0) - 0.5) / math.sqrt(var)
    if z < 0.0:
        z = 0.0
    p = min(1.0, math.erfc(z / math.sqrt(2.0)))
    return MannWhitneyResult(u1, p)


def _canon_edges(edges: Iterable[tuple[int, int]]) -> set[tuple[int, int]]:
    return {(a, b) if a < b else (b, a) for a, b in edges}


def golden_edges_from_tours(tours: Iterable[Sequence[int]]) -> set[tuple[int, int]]:
    """Union of the cyclic edges of one or more reference tours."""
    golden: set[tuple[int, int]] = set()
    for tour in tours:
        n = len(tour)
        for i in range(n):
            a, b = int(tour[i]), int(tour[(i + 1) % n])
            golden.add((a, b) if a < b else (b, a))
    return golden


def undesirable_penalty_ratio(pen, golden_edges: Iterable[tuple[int, int]]) -> float:
    """Share of total penalty mass sitting on the golden (optimal-tour) edges."""
    golden = _canon_edges(golden_edges)
    total = 0
    on_golden = 0
    for edge, count in pen.items():
        total += count
        if edge in golden:
            on_golden += count
    if total == 0:
        return 0.0
    return on_golden / total


def best_contributor_stats(records: Sequence[RunRecord],
                           total_duration: float | None = None
                           ) -> tuple[int, list[float]]:
    """Replay the merged improvement timeline of one run.

    A worker contributes when it holds the overall best solution. Returns
    the contributor count and every worker's leading ratio, sorted
    descending. The interval before the first improvement has no leader,
    so the ratios sum to 1 minus its share.
    """
    merged = []
    for rec in records:
        for idx, ev in enumerate(rec.events):
            if ev.kind == "improvement":
                merged.append((ev.time, rec.worker_id, idx, ev.cost))
    merged.sort(key=lambda t: (t[0], t[1], t[2]))
    if total_duration is None:
        total_duration = max((rec.duration for rec in records), default=0.0)
    leading: dict[int, float] = defaultdict(float)
    for rec in records:
        leading[rec.worker_id] = 0.0
    holders: set[int] = set()
    best_cost = None
    holder = None
    since = 0.0
    for t, wid, _idx, cost in merged:
        if best_cost is None or cost < best_cost:
            if holder is not None:
                leading[holder] += t - since
            best_cost = cost
            holder = wid
            holders.add(wid)
            since = t
    if holder is not None and total_duration > since:
        leading[holder] += total_duration - since
    if total_duration > 0:
        ratios = [lt / total_duration for lt in leading.values()]
    else:
        ratios = [0.0 for _ in leading]
    return len(holders), sorted(ratios, reverse=True)


def communications_per_10k_iterations(records: Sequence[RunRecord]) -> float:
    """Average send operations per 10,000 iterations across workers."""
    total_iter = sum(rec.iterations for rec in records)
    if total_iter == 0:
        return 0.0
    total_sends = sum(rec.sends for rec in records)
    return 10_000.0 * total_sends / total_iter
