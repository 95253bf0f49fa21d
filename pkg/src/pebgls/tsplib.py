"""Symmetric TSPLIB instances: parsing, integer edge costs, optima registry.

Supports the EUC_2D, CEIL_2D and ATT edge weight types with the exact
TSPLIB rounding conventions (the registered optima are only valid under
those conventions). City indices are 0-based internally; the 1-based
TSPLIB numbering is converted at the parse boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

EUC_2D = "EUC_2D"
CEIL_2D = "CEIL_2D"
ATT = "ATT"

SUPPORTED_KINDS = (EUC_2D, CEIL_2D, ATT)

# integer codes used by the compiled kernels
KIND_CODES = {EUC_2D: 0, CEIL_2D: 1, ATT: 2}

# instances up to this size get a memoized triangular cost matrix;
# above it costs are computed from coordinates on the fly
COST_MATRIX_MAX_N = 5000


class TsplibParseError(ValueError):
    """Malformed TSPLIB input; message names the offending line."""


class ContractViolation(ValueError):
    """An operation was called outside its documented preconditions."""


def _nint(x: float) -> int:
    return int(x + 0.5)


def _euc_2d(xa: float, ya: float, xb: float, yb: float) -> int:
    return _nint(math.sqrt((xa - xb) ** 2 + (ya - yb) ** 2))


def _ceil_2d(xa: float, ya: float, xb: float, yb: float) -> int:
    return int(math.ceil(math.sqrt((xa - xb) ** 2 + (ya - yb) ** 2)))


def _att(xa: float, ya: float, xb: float, yb: float) -> int:
    # TSPLIB pseudo-Euclidean distance
    r = math.sqrt(((xa - xb) ** 2 + (ya - yb) ** 2) / 10.0)
    t = _nint(r)
    return t + 1 if t < r else t

_DIST_FUNCS = {EUC_2D: _euc_2d, CEIL_2D: _ceil_2d, ATT: _att}


@dataclass
class TspInstance:
    """A symmetric TSP instance over 2-D coordinates."""

    name: str
    n: int
    coords: np.ndarray  # float64, shape (n, 2)
    kind: str
    known_optimum: int | None = None
    _tri: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.n < 3:
            raise ContractViolation(f"instance needs at least 3 cities, got {self.n}")
        if self.coords.shape != (self.n, 2):
            raise ContractViolation("coords shape does not match dimension")
        if self.kind not in SUPPORTED_KINDS:
            raise TsplibParseError(f"unsupported EDGE_WEIGHT_TYPE: {self.kind}")

    @property
    def kind_code(self) -> int:
        return KIND_CODES[self.kind]

    @property
    def cost_matrix(self) -> np.ndarray:
        """Triangular memo of edge costs (row a, a > b); empty above the size cap."""
        if self._tri is None:
            if self.n <= COST_MATRIX_MAX_N:
                from . import kernels

                self._tri = kernels.build_cost_triangle(self.coords, self.kind_code)
            else:
                self._tri = np.empty(0, dtype=np.int32)
        return self._tri

    def cost(self, a: int, b: int) -> int:
        """Integer cost of edge (a, b); symmetric, a != b."""
        return edge_cost(self, a, b)


def edge_cost(inst: TspInstance, a: int, b: int) -> int:
    if a == b:
        raise ContractViolation(f"edge requires two distinct cities, got ({a}, {b})")
    if not (0 <= a < inst.n and 0 <= b < inst.n):
        raise ContractViolation(f"city index out of range: ({a}, {b}), n={inst.n}")
    xa, ya = inst.coords[a]
    xb, yb = inst.coords[b]
    return _DIST_FUNCS[inst.kind](xa, ya, xb, yb)


def parse_tsplib(text: str, name_hint: str = "") -> TspInstance:
    """Parse a TSPLIB .tsp file with a NODE_COORD_SECTION."""
    name = name_hint
    dimension = None
    kind = None
    coords: list[tuple[float, float]] = []
    in_coords = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line == "EOF":
            break
        if in_coords:
            parts = line.split()
            if len(parts) < 3:
                raise TsplibParseError(f"line {lineno}: bad coordinate line: {raw!r}")
            try:
                coords.append((float(parts[1]), float(parts[2])))
            except ValueError as exc:
                raise TsplibParseError(f"line {lineno}: bad coordinate line: {raw!r}") from exc
            if dimension is not None and len(coords) == dimension:
                in_coords = False
            continue
        if line.startswith("NODE_COORD_SECTION"):
            if dimension is None:
                raise TsplibParseError(f"line {lineno}: NODE_COORD_SECTION before DIMENSION")
            in_coords = True
            continue
        if ":" in line:
            key, value = (s.strip() for s in line.split(":", 1))
            if key == "NAME":
                name = value
            elif key == "DIMENSION":
                try:
                    dimension = int(value)
                except ValueError as exc:
                    raise TsplibParseError(f"line {lineno}: bad DIMENSION: {value!r}") from exc
            elif key == "EDGE_WEIGHT_TYPE":
                if value not in SUPPORTED_KINDS:
                    raise TsplibParseError(
                        f"line {lineno}: unsupported EDGE_WEIGHT_TYPE: {value!r}"
                    )
                kind = value
            continue
        # section keywords without colon (TYPE etc. handled above); ignore others
    if dimension is None:
        raise TsplibParseError("missing DIMENSION header")
    if kind is None:
        raise TsplibParseError("missing EDGE_WEIGHT_TYPE header")
    if len(coords) != dimension:
        raise TsplibParseError(
            f"DIMENSION is {dimension} but NODE_COORD_SECTION has {len(coords)} entries"
        )
    arr = np.asarray(coords, dtype=np.float64)
    return TspInstance(name=name, n=dimension, coords=arr, kind=kind,
                       known_optimum=known_optimum(name))


def dump_tsplib(inst: TspInstance) -> str:
    """Serialize an instance back to TSPLIB text (coordinates bit-exactly)."""
    lines = [
        f"NAME : {inst.name}",
        "TYPE : TSP",
        f"DIMENSION : {inst.n}",
        f"EDGE_WEIGHT_TYPE : {inst.kind}",
        "NODE_COORD_SECTION",
    ]
    for i in range(inst.n):
        x, y = float(inst.coords[i, 0]), float(inst.coords[i, 1])
        lines.append(f"{i + 1} {x!r} {y!r}")
    lines.append("EOF")
    return "\n".join(lines) + "\n"


def load_instance(path) -> TspInstance:
    with open(path, "r") as f:
        return parse_tsplib(f.read())


def parse_tour(text: str) -> list[int]:
    """Parse a TSPLIB .tour file; returns 0-based city ids."""
    ids: list[int] = []
    in_tour = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line == "EOF":
            continue
        if line.startswith("TOUR_SECTION"):
            in_tour = True
            continue
        if not in_tour:
            continue
        for tok in line.split():
            val = int(tok)
            if val == -1:
                return ids
            if val < 1:
                raise TsplibParseError(f"line {lineno}: bad city id {val}")
            ids.append(val - 1)
    if not ids:
        raise TsplibParseError("no TOUR_SECTION found")
    return ids


def load_tour(path) -> list[int]:
    with open(path, "r") as f:
        return parse_tour(f.read())


_OPTIMA: dict[str, int] | None = None


def _optima_registry() -> dict[str, int]:
    global _OPTIMA
    if _OPTIMA is None:
        reg: dict[str, int] = {}
        text = resources.files("pebgls.data").joinpath("optima.txt").read_text()
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            reg[parts[0]] = int(parts[1])
        _OPTIMA = reg
    return _OPTIMA


def known_optimum(name: str) -> int | None:
    """Registered optimal cost for a bundled instance name, None if unknown."""
    return _optima_registry().get(name)


def bundled_path(filename: str):
    """Filesystem path of a bundled data file (instances, tours, registry)."""
    return resources.files("pebgls.data").joinpath(filename)


def random_instance(n: int, seed: int, kind: str = EUC_2D, box: float = 1000.0,
                    name: str | None = None) -> TspInstance:
    """Uniform random instance in a square box; handy for tests and pilots."""
    rng = np.random.default_rng(seed)
    coords = rng.uniform(0.0, box, size=(n, 2))
    return TspInstance(name=name or f"random{n}_{seed}", n=n, coords=coords, kind=kind)
