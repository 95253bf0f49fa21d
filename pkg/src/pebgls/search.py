"""Tour representation and 2-opt local search with neighbor lists and
per-city activation bits (fast local search).

Moves are evaluated under the guide cost g + lam * (penalty sum), applied
first-improvement in a fixed scan order: cities in ascending index among
the active ones, candidate neighbors in ascending edge cost, forward move
before backward move. Comparisons use strict < 0 with no epsilon; the
plain cost part is integral, so ties are never treated as improving.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .tsplib import ContractViolation, TspInstance


@dataclass
class NeighborLists:
    """Per-city nearest neighbors, ascending by (edge cost, city index)."""

    lists: np.ndarray  # int32, shape (n, k)

    @classmethod
    def build(cls, inst: TspInstance, k: int = 10) -> "NeighborLists":
        if k < 1:
            raise ContractViolation(f"neighbor list size must be >= 1, got {k}")
        lists = kernels.build_neighbor_lists(inst.coords, inst.kind_code,
                                             inst.cost_matrix, k)
        return cls(lists=lists)

    @property
    def k(self) -> int:
        return self.lists.shape[1]


class ActivationBits:
    """One flag per city; local search only scans cities with a set flag."""

    def __init__(self, n: int, active: bool = True):
        self.arr = np.full(n, 1 if active else 0, dtype=np.uint8)

    def set_all(self) -> None:
        self.arr[:] = 1

    def clear_all(self) -> None:
        self.arr[:] = 0

    def set(self, city: int) -> None:
        self.arr[city] = 1

    def is_active(self, city: int) -> bool:
        return bool(self.arr[city])

    def any_active(self) -> bool:
        return bool(self.arr.any())


class BestSoFar:
    """Best tour seen so far by plain cost (tracks g, never the guide cost)."""

    def __init__(self, n: int):
        self.order = np.empty(n, dtype=np.int32)
        self.cost_box = np.array([np.iinfo(np.int64).max], dtype=np.int64)

    @property
    def cost(self) -> int:
        return int(self.cost_box[0])

    def snapshot(self) -> np.ndarray:
        return self.order.copy()


class Tour:
    """Cyclic permutation of cities with its inverse index and cached cost."""

    def __init__(self, order, inst: TspInstance):
        order = np.ascontiguousarray(order, dtype=np.int32)
        if sorted(order.tolist()) != list(range(inst.n)):
            raise ContractViolation("order is not a permutation of 0..n-1")
        self.inst = inst
        self.order = order
        self.pos = np.empty(inst.n, dtype=np.int32)
        self.pos[order] = np.arange(inst.n, dtype=np.int32)
        self.cached_cost = int(kernels.tour_cost(order, inst.coords,
                                                 inst.kind_code, inst.cost_matrix))

    @classmethod
    def random(cls, inst: TspInstance, rng: np.random.Generator) -> "Tour":
        return cls(rng.permutation(inst.n), inst)

    @classmethod
    def nearest_neighbor(cls, inst: TspInstance, start: int = 0) -> "Tour":
        """Greedy construction; optional alternative to a random start."""
        n = inst.n
        xy = inst.coords
        unvisited = np.ones(n, dtype=bool)
        unvisited[start] = False
        order = np.empty(n, dtype=np.int32)
        order[0] = start
        cur = start
        for i in range(1, n):
            idx = np.flatnonzero(unvisited)
            dx = xy[idx, 0] - xy[cur, 0]
            dy = xy[idx, 1] - xy[cur, 1]
            if inst.kind == "ATT":
                r = np.sqrt((dx * dx + dy * dy) / 10.0)
                t = np.floor(r + 0.5)
                d = np.where(t < r, t + 1, t)
            elif inst.kind == "CEIL_2D":
                d = np.ceil(np.sqrt(dx * dx + dy * dy))
            else:
                d = np.floor(np.sqrt(dx * dx + dy * dy) + 0.5)
            cur = int(idx[np.argmin(d)])
            order[i] = cur
            unvisited[cur] = False
        return cls(order, inst)

    def copy(self) -> "Tour":
        t = object.__new__(Tour)
        t.inst = self.inst
        t.order = self.order.copy()
        t.pos = self.pos.copy()
        t.cached_cost = self.cached_cost
        return t

    @property
    def n(self) -> int:
        return self.inst.n

    def recompute_cost(self) -> int:
        return int(kernels.tour_cost(self.order, self.inst.coords,
                                     self.inst.kind_code, self.inst.cost_matrix))

    def edges(self):
        """The n cyclic edges as canonical (min, max) pairs."""
        n = self.inst.n
        for i in range(n):
            a = int(self.order[i])
            b = int(self.order[(i + 1) % n])
            yield (a, b) if a < b else (b, a)

    def successor_array(self) -> np.ndarray:
        nxt = np.empty(self.n, dtype=np.int32)
        nxt[self.order] = np.roll(self.order, -1)
        return nxt

    def canonical(self) -> tuple:
        """Rotation/reflection-invariant form, for equality of cyclic tours."""
        n = self.n
        start = int(self.pos[0])
        fwd = tuple(int(self.order[(start + i) % n]) for i in range(n))
        bwd = tuple(int(self.order[(start - i) % n]) for i in range(n))
        return min(fwd, bwd)

    def _check_move(self, i: int, j: int) -> None:
        n = self.n
        if not (0 <= i < n and 0 <= j < n):
            raise ContractViolation(f"edge positions out of range: ({i}, {j})")
        if i == j or (i + 1) % n == j or (j + 1) % n == i:
            raise ContractViolation(
                f"2-opt needs two non-adjacent tour edges, got positions ({i}, {j})")

    def two_opt_delta(self, i: int, j: int, pen=None, lam: float = 0.0):
        """(cost delta, guide delta) of cutting tour edges at positions i and j."""
        self._check_move(i, j)
        pen_tri, pen_map = _pen_arrays(pen, self.n)
        dg, dh = kernels.move_delta(self.order, self.pos, i, j,
                                    self.inst.coords, self.inst.kind_code,
                                    self.inst.cost_matrix, pen_tri, pen_map,
                                    float(lam))
        return int(dg), float(dh)

    def apply_two_opt(self, i: int, j: int) -> "Tour":
        """Reverse the arc between the cut points, in place."""
        dg, _ = self.two_opt_delta(i, j)
        kernels.apply_move(self.order, self.pos, i, j)
        self.cached_cost += dg
        return self


def tour_cost(t: Tour, inst: TspInstance) -> int:
    return int(kernels.tour_cost(t.order, inst.coords, inst.kind_code,
                                 inst.cost_matrix))


_EMPTY_MAP = None


def _pen_arrays(pen, n: int):
    """Kernel-facing (dense triangle, sparse map) pair for a penalty table."""
    global _EMPTY_MAP
    if pen is not None:
        return pen.tri, pen.map
    if _EMPTY_MAP is None:
        _EMPTY_MAP = kernels.new_penalty_map()
    return np.empty(0, dtype=np.int32), _EMPTY_MAP


def local_search(tour: Tour, pen, lam: float, bits: ActivationBits,
                 nl: NeighborLists, best_tracker: BestSoFar) -> Tour:
    """Descend to a 2-opt local optimum of the guide cost (in place).

    Only cities with active bits are scanned; the search ends when no
    active city admits an improving move, clearing all bits. Whenever a
    visited tour improves on best_tracker's plain cost it is copied there.
    """
    pen_tri, pen_map = _pen_arrays(pen, tour.n)
    cost_box = np.array([tour.cached_cost], dtype=np.int64)
    imp = np.empty(8 * tour.n + 8, dtype=np.int64)
    kernels.descend(tour.order, tour.pos, cost_box, bits.arr, nl.lists,
                    tour.inst.coords, tour.inst.kind_code, tour.inst.cost_matrix,
                    pen_tri, pen_map, float(lam),
                    best_tracker.order, best_tracker.cost_box, imp)
    tour.cached_cost = int(cost_box[0])
    return tour
