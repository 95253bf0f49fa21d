"""Concurrent search workers over a ring or torus neighborhood with
asynchronous best-solution exchange and stop broadcast.

Workers are in-process threads; the heavy per-iteration work happens in
compiled kernels that release the GIL. Communication goes through
per-worker unbounded mailboxes carrying solution messages and stop
signals; sends and receives never block. All mutable search state is
worker-private; the instance and neighbor lists are shared read-only.
"""
from __future__ import annotations

import queue
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .engine import GlsEngine, GlsParams, PenaltyTable
from .metrics import Event, RunRecord
from .search import NeighborLists
from .tsplib import TspInstance

STRATEGIES = ("independent", "elite_biased", "restart", "restart_elite_biased")

# internal extra mode: plain guided local search without any elite tour
PLAIN_GLS = "gls"


class ConfigError(ValueError):
    """Invalid run configuration, raised before any worker starts."""


@dataclass(frozen=True)
class Topology:
    """Neighbor map of the worker mesh; worker ids are 0-based."""

    kind: str
    k: int
    neighbors: tuple[tuple[int, ...], ...]
    rows: int | None = None
    cols: int | None = None

    def neighbors_of(self, wid: int) -> tuple[int, ...]:
        return self.neighbors[wid]


def build_topology(kind: str, k: int) -> Topology:
    """Ring (2 neighbors each) or row-major torus grid (4 neighbors each)."""
    if kind == "ring":
        if k < 3:
            raise ConfigError(f"ring topology needs at least 3 workers, got {k}")
        neigh = tuple(tuple(sorted(((i - 1) % k, (i + 1) % k))) for i in range(k))
        return Topology(kind="ring", k=k, neighbors=neigh)
    if kind == "torus":
        rows = 0
        for r in range(int(np.sqrt(k)), 2, -1):
            if k % r == 0:
                rows = r
                break
        cols = k // rows if rows else 0
        if rows < 3 or cols < 3:
            raise ConfigError(
                f"torus topology needs rows x cols with both >= 3; {k} does not factor")
        neigh = []
        for w in range(k):
            r, c = divmod(w, cols)
            around = {
                ((r - 1) % rows) * cols + c,
                ((r + 1) % rows) * cols + c,
                r * cols + (c - 1) % cols,
                r * cols + (c + 1) % cols,
            }
            if len(around) != 4 or w in around:
                raise ConfigError(f"degenerate torus neighborhood for K={k}")
            neigh.append(tuple(sorted(around)))
        return Topology(kind="torus", k=k, neighbors=tuple(neigh), rows=rows, cols=cols)
    raise ConfigError(f"unknown topology kind: {kind!r}")


@dataclass(frozen=True)
class SolutionMsg:
    """A best-solution announcement; cost is re-verified on receipt."""

    sender: int
    order: np.ndarray
    cost: int
    send_iteration: int
    send_time: float


@dataclass(frozen=True)
class StopSignal:
    sender: int


class MailboxClosed(Exception):
    pass


class Mailbox:
    """Unbounded non-blocking message channel owned by one worker."""

    def __init__(self) -> None:
        self._q: queue.SimpleQueue = queue.SimpleQueue()
        self._closed = False

    def put(self, msg) -> None:
        self._q.put(msg)

    def close(self) -> None:
        self._closed = True

    def drain(self) -> list:
        if self._closed:
            raise MailboxClosed
        out = []
        while True:
            try:
                out.append(self._q.get_nowait())
            except queue.Empty:
                return out


@dataclass
class StopCriteria:
    """When to halt: wall-clock cap, target cost and/or iteration budget."""

    max_seconds: float | None = None
    target_cost: int | None = None
    max_iterations: int | None = None

    def validate(self) -> None:
        if self.max_seconds is None and self.target_cost is None \
                and self.max_iterations is None:
            raise ConfigError("at least one stop criterion is required")
        if self.max_seconds is not None and self.max_seconds <= 0:
            raise ConfigError("max_seconds must be positive")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")


@dataclass
class EliteState:
    """Own historical best, newest message per neighbor, current elite."""

    best: object  # BestSoFar of the worker's engine
    received: dict[int, SolutionMsg] = field(default_factory=dict)
    elite_order: np.ndarray | None = None
    elite_cost: int | None = None
    dirty: bool = False


class Worker:
    """One search process: engine plus exchange protocol state."""

    def __init__(self, wid: int, inst: TspInstance, params: GlsParams, seed: int,
                 strategy: str, neighbors: tuple[int, ...], mailbox: Mailbox,
                 all_mailboxes: list[Mailbox], stop: StopCriteria, clock,
                 nl: NeighborLists, trace: bool = False):
        self.wid = wid
        self.params = params
        self.strategy = strategy
        self.neighbors = neighbors
        self.mailbox = mailbox
        self.all_mailboxes = all_mailboxes
        self.stop_criteria = stop
        self.clock = clock
        self.trace = trace
        self.engine = GlsEngine(inst, params, seed, nl=nl)
        self.elite = EliteState(best=self.engine.best)
        self.record = RunRecord(worker_id=wid, seed=seed)
        self.stopped = False
        self._stop_seen = False

    # -- protocol pieces -------------------------------------------------

    def _receive(self, msg: SolutionMsg) -> None:
        check = int(kernels.tour_cost(msg.order, self.engine.inst.coords,
                                      self.engine.inst.kind_code,
                                      self.engine.inst.cost_matrix))
        if check != msg.cost:
            raise RuntimeError(
                f"message integrity violation: declared {msg.cost}, got {check}")
        self.elite.received[msg.sender] = msg
        self.record.receives += 1
        self.record.events.append(Event(self.clock(), self.engine.j, "receive",
                                        cost=msg.cost))

    def _send_best(self) -> None:
        best = self.elite.best
        msg = SolutionMsg(sender=self.wid, order=best.order.copy(),
                          cost=best.cost, send_iteration=self.engine.j,
                          send_time=self.clock())
        for nb in self.neighbors:
            self.all_mailboxes[nb].put(msg)
        self.record.sends += 1
        self.record.events.append(Event(msg.send_time, self.engine.j, "send",
                                        cost=best.cost))

    def _set_elite(self, order: np.ndarray, cost: int) -> None:
        self.elite.elite_order = np.asarray(order, dtype=np.int32).copy()
        self.elite.elite_cost = int(cost)
        self.engine.set_elite(self.elite.elite_order)

    def _candidates(self) -> list[tuple[int, int, np.ndarray]]:
        """Received solutions plus own best, ordered by (cost, sender id)."""
        best = self.elite.best
        cands = [(best.cost, self.wid, best.order)]
        for sender, msg in self.elite.received.items():
            cands.append((msg.cost, sender, msg.order))
        cands.sort(key=lambda t: (t[0], t[1]))
        return cands

    def apply_strategy(self) -> None:
        s = self.strategy
        if s == PLAIN_GLS:
            return
        if s == "independent":
            best = self.elite.best
            self._set_elite(best.order, best.cost)
            return
        cands = self._candidates()
        if s == "elite_biased":
            cost, _, order = cands[0]
            self._set_elite(order, cost)
        elif s == "restart":
            _, _, order = cands[0]
            self.engine.inject_tour(order)
        elif s == "restart_elite_biased":
            _, _, order = cands[0]
            self.engine.inject_tour(order)
            if len(cands) >= 2:
                cost, _, order2 = cands[1]
                self._set_elite(order2, cost)
            else:
                best = self.elite.best
                self._set_elite(best.order, best.cost)
        else:
            raise ConfigError(f"unknown strategy: {s!r}")

    def _halt(self) -> bool:
        if not self.stopped:
            self.stopped = True
            now = self.clock()
            self.record.events.append(Event(now, self.engine.j, "stop"))
            self.record.final_cost = self.engine.best_cost
            self.record.duration = now
            self.record.iterations = self.engine.j
        return False

    def _broadcast_stop(self) -> None:
        sig = StopSignal(sender=self.wid)
        for wid, box in enumerate(self.all_mailboxes):
            if wid != self.wid:
                box.put(sig)

    # -- main loop --------------------------------------------------------

    def step(self) -> bool:
        """One protocol round plus one engine iteration; False when halted."""
        if self.stopped:
            return False
        try:
            msgs = self.mailbox.drain()
        except MailboxClosed:
            return self._halt()
        for msg in msgs:
            if isinstance(msg, StopSignal):
                self._stop_seen = True
            else:
                self._receive(msg)
        if self._stop_seen:
            return self._halt()
        j = self.engine.j
        if j % self.params.u_cycle == 0:
            self.apply_strategy()
            if self.elite.dirty and self.neighbors:
                self._send_best()
                self.elite.dirty = False
        n_imp, _n_moves, n_pen = self.engine.iteration()
        now = self.clock()
        if n_imp:
            for cost in self.engine.improvement_costs():
                self.record.events.append(Event(now, j, "improvement", cost=cost))
            self.elite.dirty = True
        self.record.penalizations += n_pen
        if self.trace:
            self.record.events.append(Event(now, j, "penalize",
                                            edges=tuple(self.engine.penalized_edges())))
        crit = self.stop_criteria
        if crit.target_cost is not None and self.engine.best_cost <= crit.target_cost:
            self._broadcast_stop()
            return self._halt()
        if crit.max_seconds is not None and self.clock() >= crit.max_seconds:
            return self._halt()
        if crit.max_iterations is not None and self.engine.j >= crit.max_iterations:
            return self._halt()
        return True

    def run(self) -> None:
        while self.step():
            pass


@dataclass
class ParallelResult:
    records: list[RunRecord]
    best_cost: int
    best_order: np.ndarray
    best_worker: int
    duration: float
    penalty_tables: list[PenaltyTable]


def run_parallel(inst: TspInstance, params: GlsParams, strategy: str,
                 seeds: list[int], stop: StopCriteria,
                 topology: Topology | None = None,
                 trace: bool = False) -> ParallelResult:
    """Launch one worker per seed and run them to the stop criterion.

    With K = 1 (or the independent strategy) no topology is needed and no
    messages flow. A worker that reaches the target cost broadcasts a stop
    signal that every other worker honors within one iteration.
    """
    k = len(seeds)
    if k < 1:
        raise ConfigError("need at least one seed")
    if len(set(seeds)) != k:
        raise ConfigError("seeds must be distinct")
    if strategy not in STRATEGIES and strategy != PLAIN_GLS:
        raise ConfigError(f"unknown strategy: {strategy!r}")
    stop.validate()
    cooperative = strategy in ("elite_biased", "restart", "restart_elite_biased")
    if k > 1 and cooperative:
        if topology is None:
            raise ConfigError(f"strategy {strategy!r} with K={k} needs a topology")
        if topology.k != k:
            raise ConfigError(f"topology is for K={topology.k}, run has K={k}")
        neighbor_map = topology.neighbors
    else:
        neighbor_map = tuple(() for _ in range(k))

    kernels.warmup()
    nl = NeighborLists.build(inst, params.nn_k)
    mailboxes = [Mailbox() for _ in range(k)]
    t0 = time.perf_counter()
    clock = lambda: time.perf_counter() - t0  # noqa: E731 - shared run clock
    workers = [Worker(wid, inst, params, seeds[wid], strategy,
                      neighbor_map[wid], mailboxes[wid], mailboxes, stop,
                      clock, nl, trace=trace)
               for wid in range(k)]
    if k == 1:
        workers[0].run()
    else:
        threads = [threading.Thread(target=w.run, name=f"worker-{w.wid}")
                   for w in workers]
        for th in threads:
            th.start()
        for th in threads:
            th.join()
    duration = clock()

    records = [w.record for w in workers]
    best_worker = None
    best_key = None
    for w in workers:
        t_best = next((e.time for e in reversed(w.record.events)
                       if e.kind == "improvement"), float("inf"))
        key = (w.engine.best_cost, t_best, w.wid)
        if best_key is None or key < best_key:
            best_key = key
            best_worker = w
    return ParallelResult(
        records=records,
        best_cost=best_worker.engine.best_cost,
        best_order=best_worker.engine.best.snapshot(),
        best_worker=best_worker.wid,
        duration=duration,
        penalty_tables=[w.engine.pen for w in workers],
    )
