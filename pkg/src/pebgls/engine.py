"""Penalty-driven search engine: augmented cost, penalizing utilities and
the iteration loop of guided local search, with an optional elite bias.

Each engine owns one tour, one penalty table and one set of activation
bits; nothing here is shared between workers. The elite bias multiplies
the penalizing utility of edges absent from the elite tour by w, steering
penalties away from elite edges so the descent drifts toward them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .search import ActivationBits, BestSoFar, NeighborLists, Tour
from .tsplib import ContractViolation, TspInstance

PENALTY_DENSE_MAX_N = 5000


class PenaltyTable:
    """Per-edge penalty counts; absent edges read as 0, stored entries >= 1.

    Backed by a dense triangular int32 array up to PENALTY_DENSE_MAX_N
    cities and by a sparse packed-pair map above it. Both backings are
    consumed directly by the compiled kernels.
    """

    def __init__(self, n: int):
        if n < 3:
            raise ContractViolation(f"penalty table needs n >= 3, got {n}")
        self.n = n
        if n <= PENALTY_DENSE_MAX_N:
            self.tri = np.zeros(n * (n - 1) // 2, dtype=np.int32)
        else:
            self.tri = np.empty(0, dtype=np.int32)
        self.map = kernels.new_penalty_map()

    def _canon(self, a: int, b: int) -> tuple[int, int]:
        if a == b or not (0 <= a < self.n and 0 <= b < self.n):
            raise ContractViolation(f"bad edge ({a}, {b}) for n={self.n}")
        return (a, b) if a > b else (b, a)

    def get(self, a: int, b: int) -> int:
        hi, lo = self._canon(a, b)
        if self.tri.size > 0:
            return int(self.tri[hi * (hi - 1) // 2 + lo])
        return int(self.map.get((hi << 32) | lo, 0))

    def increment(self, a: int, b: int) -> None:
        hi, lo = self._canon(a, b)
        if self.tri.size > 0:
            self.tri[hi * (hi - 1) // 2 + lo] += 1
        else:
            key = (hi << 32) | lo
            self.map[key] = self.map.get(key, 0) + 1

    def items(self):
        """Nonzero entries as ((min_city, max_city), count)."""
        if self.tri.size > 0:
            for idx in np.nonzero(self.tri)[0]:
                idx = int(idx)
                hi = int((1 + np.sqrt(1 + 8 * idx)) // 2)
                # float sqrt can land one row off; fix up exactly
                while hi * (hi - 1) // 2 > idx:
                    hi -= 1
                while (hi + 1) * hi // 2 <= idx:
                    hi += 1
                lo = idx - hi * (hi - 1) // 2
                yield (lo, hi), int(self.tri[idx])
        else:
            for key, val in self.map.items():
                yield (int(key & 0xFFFFFFFF), int(key >> 32)), int(val)

    def total(self) -> int:
        if self.tri.size > 0:
            return int(self.tri.sum())
        return int(sum(self.map.values()))

    def nonzero_count(self) -> int:
        if self.tri.size > 0:
            return int(np.count_nonzero(self.tri))
        return len(self.map)


@dataclass
class GlsParams:
    """Tunable knobs of the engine.

    lam: explicit penalty weight, or None to derive it from the first
    local optimum as lambda_coeff * cost / n.
    """

    lam: float | None = None
    lambda_coeff: float = 0.3
    w: float = 2.0
    u_cycle: int = 100
    nn_k: int = 10
    greedy_init: bool = False

    def __post_init__(self) -> None:
        if self.lam is not None and self.lam <= 0:
            raise ContractViolation(f"lam must be positive, got {self.lam}")
        if self.lambda_coeff <= 0:
            raise ContractViolation(f"lambda_coeff must be positive, got {self.lambda_coeff}")
        if self.w < 1:
            raise ContractViolation(f"w must be >= 1, got {self.w}")
        if self.u_cycle < 1:
            raise ContractViolation(f"u_cycle must be >= 1, got {self.u_cycle}")
        if self.nn_k < 1:
            raise ContractViolation(f"nn_k must be >= 1, got {self.nn_k}")


def compute_lambda(first_local_opt_cost: int, n: int, coeff: float = 0.3) -> float:
    """Penalty weight derived from the first local optimum's cost."""
    if first_local_opt_cost <= 0:
        raise ContractViolation(
            f"first local optimum cost must be positive, got {first_local_opt_cost}")
    if n < 3:
        raise ContractViolation(f"need n >= 3, got {n}")
    if coeff <= 0:
        raise ContractViolation(f"coefficient must be positive, got {coeff}")
    return coeff * first_local_opt_cost / n


def augmented_cost(t: Tour, pen: PenaltyTable, lam: float) -> float:
    """Plain tour cost plus lam times the penalties of the tour's edges."""
    return float(t.cached_cost) + lam * sum(pen.get(a, b) for a, b in t.edges())


def _edge_in_tour(edge: tuple[int, int], t: Tour) -> bool:
    a, b = edge
    n = t.n
    return (int(t.order[(t.pos[a] + 1) % n]) == b
            or int(t.order[(t.pos[b] + 1) % n]) == a)


def utility(edge: tuple[int, int], t: Tour, pen: PenaltyTable,
            elite: Tour | None = None, w: float = 1.0) -> float:
    """Penalizing utility of an edge: 0 off-tour, else cost/(1+penalty),
    times w when an elite tour is given and the edge is not in it."""
    if not _edge_in_tour(edge, t):
        return 0.0
    a, b = edge
    u = t.inst.cost(a, b) / (1.0 + pen.get(a, b))
    if elite is not None and not _edge_in_tour(edge, elite):
        u *= w
    return u


def penalize(t: Tour, pen: PenaltyTable, elite: Tour | None, w: float,
             bits: ActivationBits) -> set[tuple[int, int]]:
    """Increment every maximum-utility edge of the tour; returns the set
    of penalized edges (canonical pairs) and activates their endpoints."""
    n = t.n
    if elite is None:
        elite_next = np.full(n, -1, dtype=np.int32)
    else:
        elite_next = elite.successor_array()
    utils = np.empty(n, dtype=np.float64)
    out_edges = np.empty((n, 2), dtype=np.int32)
    cnt = kernels.penalize(t.order, t.inst.coords, t.inst.kind_code,
                           t.inst.cost_matrix, pen.tri, pen.map, float(w),
                           elite_next, bits.arr, utils, out_edges)
    edges = set()
    for i in range(cnt):
        a, b = int(out_edges[i, 0]), int(out_edges[i, 1])
        edges.add((a, b) if a < b else (b, a))
    return edges


def successors_of(order: np.ndarray) -> np.ndarray:
    nxt = np.empty(order.shape[0], dtype=np.int32)
    nxt[order] = np.roll(order, -1)
    return nxt


class GlsEngine:
    """State and iteration loop of one search worker.

    Call iteration() repeatedly; each call descends to a local optimum of
    the guide cost and then penalizes the maximum-utility edges. The
    penalty weight is resolved from the first local optimum when params.lam
    is None. set_elite() installs or clears the elite tour used by the
    penalization step.
    """

    def __init__(self, inst: TspInstance, params: GlsParams, seed: int,
                 nl: NeighborLists | None = None):
        self.inst = inst
        self.params = params
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.nl = nl if nl is not None else NeighborLists.build(inst, params.nn_k)
        if params.greedy_init:
            self.tour = Tour.nearest_neighbor(inst)
        else:
            self.tour = Tour.random(inst, self.rng)
        self.bits = ActivationBits(inst.n, active=True)
        self.pen = PenaltyTable(inst.n)
        self.best = BestSoFar(inst.n)
        self.best.order[:] = self.tour.order
        self.best.cost_box[0] = self.tour.cached_cost
        self.lam = float(params.lam) if params.lam is not None else None
        self.elite_next = np.full(inst.n, -1, dtype=np.int32)
        self.j = 0
        # scratch buffers reused across iterations
        self._imp_costs = np.empty(8 * inst.n + 8, dtype=np.int64)
        self._utils = np.empty(inst.n, dtype=np.float64)
        self._out_edges = np.empty((inst.n, 2), dtype=np.int32)
        self._cost_box = np.empty(1, dtype=np.int64)
        self.last_n_imp = 0
        self.last_n_pen = 0

    @property
    def best_cost(self) -> int:
        return self.best.cost

    def set_elite(self, order: np.ndarray | None) -> None:
        if order is None:
            self.elite_next[:] = -1
        else:
            self.elite_next[:] = successors_of(np.asarray(order, dtype=np.int32))

    def inject_tour(self, order: np.ndarray) -> None:
        """Replace the current tour (restart strategies); activates all bits."""
        self.tour = Tour(np.asarray(order, dtype=np.int32).copy(), self.inst)
        self.bits.set_all()

    def iteration(self) -> tuple[int, int, int]:
        """One descent + penalization; returns (improvements, moves, penalized)."""
        t = self.tour
        self._cost_box[0] = t.cached_cost
        lam = self.lam if self.lam is not None else 0.0
        n_imp, n_moves, n_pen = kernels.gls_iteration(
            t.order, t.pos, self._cost_box, self.bits.arr, self.nl.lists,
            self.inst.coords, self.inst.kind_code, self.inst.cost_matrix,
            self.pen.tri, self.pen.map, float(lam), float(self.params.w),
            self.elite_next, self.best.order, self.best.cost_box,
            self._imp_costs, self._utils, self._out_edges)
        if n_imp > self._imp_costs.shape[0]:
            raise RuntimeError("improvement buffer overflow; raise the buffer size")
        t.cached_cost = int(self._cost_box[0])
        if self.lam is None:
            self.lam = compute_lambda(t.cached_cost, self.inst.n,
                                      self.params.lambda_coeff)
        self.j += 1
        self.last_n_imp = n_imp
        self.last_n_pen = n_pen
        return n_imp, n_moves, n_pen

    def improvement_costs(self) -> list[int]:
        """Best-cost improvements recorded by the latest iteration."""
        return [int(c) for c in self._imp_costs[:self.last_n_imp]]

    def penalized_edges(self) -> list[tuple[int, int]]:
        """Edges penalized by the latest iteration (canonical pairs)."""
        out = []
        for i in range(self.last_n_pen):
            a, b = int(self._out_edges[i, 0]), int(self._out_edges[i, 1])
            out.append((a, b) if a < b else (b, a))
        return out
