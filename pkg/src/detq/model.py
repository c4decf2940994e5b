"""Model specification shared by every engine.

Particle indices in a :class:`ModelSpec` are 1-based, exactly as they are
written in model files.  A point ``Point(target=i, crosser=j, position=x)``
means: whenever particle ``j`` passes ``x``, act on the spin of particle ``i``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, NamedTuple

logger = logging.getLogger(__name__)

FLIP, SET_PLUS, SET_MINUS = "flip", "set_plus", "set_minus"
KINDS = (FLIP, SET_PLUS, SET_MINUS)
KIND_CODE = {FLIP: 0, SET_PLUS: 1, SET_MINUS: 2}


class Point(NamedTuple):
    target: int
    crosser: int
    position: float


def _points(raw: Iterable) -> tuple[Point, ...]:
    return tuple(Point(int(i), int(j), float(x)) for i, j, x in raw)


@dataclass(frozen=True)
class ModelSpec:
    n_particles: int
    domain_length: float
    flip_points: tuple[Point, ...] = ()
    set_plus_points: tuple[Point, ...] = ()
    set_minus_points: tuple[Point, ...] = ()
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        for name in ("flip_points", "set_plus_points", "set_minus_points"):
            object.__setattr__(self, name, _points(getattr(self, name)))

    def table(self, kind: str) -> tuple[Point, ...]:
        return getattr(self, f"{kind}_points")

    def tagged_points(self) -> list[tuple[str, Point]]:
        """All points as ``(kind, point)`` in the global tie-break order.

        Order: crosser, position, kind (flip < set_plus < set_minus), target.
        """
        tagged = [(k, p) for k in KINDS for p in self.table(k)]
        tagged.sort(key=lambda kp: (kp[1].crosser, kp[1].position, KIND_CODE[kp[0]], kp[1].target))
        return tagged

    @property
    def has_loss(self) -> bool:
        return bool(self.set_plus_points or self.set_minus_points)

    @property
    def is_free(self) -> bool:
        return not (self.flip_points or self.set_plus_points or self.set_minus_points)


@dataclass(frozen=True)
class GridSpec:
    cells: int
    domain_length: float

    def __post_init__(self):
        if self.cells < 2:
            raise ValueError(f"grid needs at least 2 cells, got {self.cells}")

    @property
    def spacing(self) -> float:
        return self.domain_length / self.cells

    def boundary_index(self, position: float) -> int:
        """Index of the cell boundary nearest to ``position`` (mod cells)."""
        return int(round(position / self.spacing)) % self.cells

    def boundary(self, index: int) -> float:
        return (index % self.cells) * self.spacing

    def center(self, cell: int) -> float:
        return ((cell % self.cells) + 0.5) * self.spacing

    def cell_of_center(self, position: float, tol: float = 1e-9) -> int:
        """Cell whose center is ``position``; raises if it is not a center."""
        u = position / self.spacing - 0.5
        k = round(u)
        if abs(u - k) > tol:
            raise ValueError(f"position {position!r} is not a cell center of {self}")
        return int(k) % self.cells


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate(spec: ModelSpec) -> ValidationReport:
    report = ValidationReport()
    bad = report.violations
    n, L = spec.n_particles, spec.domain_length
    if not (isinstance(n, int) and n >= 1):
        bad.append(f"n_particles must be a positive integer, got {n!r}")
    if not (math.isfinite(L) and L > 0):
        bad.append(f"domain_length must be positive, got {L!r}")
    for kind in KINDS:
        for p in spec.table(kind):
            where = f"{kind} point {tuple(p)}"
            if p.target == p.crosser:
                bad.append(f"{where}: self-interaction forbidden")
            for role, idx in (("target", p.target), ("crosser", p.crosser)):
                if not 1 <= idx <= n:
                    bad.append(f"{where}: {role} index {idx} outside [1, {n}]")
            if not (0.0 <= p.position < L):
                bad.append(f"{where}: position outside [0, {L})")
    clash = set(spec.set_plus_points) & set(spec.set_minus_points)
    for p in sorted(clash):
        bad.append(f"point {tuple(p)}: contradictory reset (both set_plus and set_minus)")
    for name in ("alpha", "beta"):
        v = getattr(spec, name)
        if not v > 0:
            bad.append(f"{name} must be positive, got {v!r}")
    return report


class SnapError(ValueError):
    """Snapping merged a set_plus and a set_minus point onto one boundary."""


class Snap(NamedTuple):
    kind: str
    point: Point
    snapped_to: float


class SnapResult(NamedTuple):
    spec: ModelSpec
    moves: list[Snap]


def snap_to_grid(spec: ModelSpec, grid: GridSpec) -> SnapResult:
    """Move every point onto its nearest cell boundary and drop duplicates.

    Returns the snapped spec together with the list of points that actually
    moved.  Duplicates (same kind, target, crosser and boundary) collapse into
    one entry.
    """
    if not math.isclose(grid.domain_length, spec.domain_length, rel_tol=0, abs_tol=0):
        raise ValueError("grid and model disagree on the domain length")
    eps = grid.spacing / 2 * 1e-9
    moves: list[Snap] = []
    tables = {}
    for kind in KINDS:
        seen = {}
        for p in spec.table(kind):
            x = grid.boundary(grid.boundary_index(p.position))
            # distance on the circle, so L - tiny snaps to 0 without a spurious large move
            d = abs(p.position - x)
            d = min(d, spec.domain_length - d)
            if d > eps:
                moves.append(Snap(kind, p, x))
                logger.debug("snapped %s point %s -> %r", kind, tuple(p), x)
            q = Point(p.target, p.crosser, x)
            seen.setdefault(q, None)
        tables[kind] = tuple(seen)
    before = set(spec.set_plus_points) & set(spec.set_minus_points)
    after = set(tables[SET_PLUS]) & set(tables[SET_MINUS])
    if after and not before:
        raise SnapError(f"snapping creates contradictory resets at {sorted(after)}")
    snapped = replace(
        spec,
        flip_points=tables[FLIP],
        set_plus_points=tables[SET_PLUS],
        set_minus_points=tables[SET_MINUS],
    )
    return SnapResult(snapped, moves)


def model_from_dict(data: dict) -> ModelSpec:
    """Build a spec from the model-file tree (1-based ``[i, j, position]`` triples)."""
    allowed = {"n_particles", "domain_length", "flip_points", "set_plus_points",
               "set_minus_points", "alpha", "beta"}
    unknown = set(data) - allowed
    if unknown:
        raise ValueError(f"unknown model key(s): {', '.join(sorted(unknown))}")
    for key in ("n_particles", "domain_length"):
        if key not in data:
            raise ValueError(f"model is missing required key {key!r}")
    n = data["n_particles"]
    if isinstance(n, bool) or not isinstance(n, int):
        raise ValueError(f"n_particles must be an integer, got {n!r}")
    tables = {}
    for kind in KINDS:
        rows = data.get(f"{kind}_points", [])
        for row in rows:
            if not (isinstance(row, (list, tuple)) and len(row) == 3):
                raise ValueError(f"{kind}_points entries must be [i, j, position] triples, got {row!r}")
        tables[f"{kind}_points"] = rows
    return ModelSpec(
        n_particles=n,
        domain_length=float(data["domain_length"]),
        alpha=float(data.get("alpha", 1.0)),
        beta=float(data.get("beta", 1.0)),
        **tables,
    )


def model_to_dict(spec: ModelSpec) -> dict:
    out = {"n_particles": spec.n_particles, "domain_length": spec.domain_length,
           "alpha": spec.alpha, "beta": spec.beta}
    for kind in KINDS:
        out[f"{kind}_points"] = [list(p) for p in spec.table(kind)]
    return out
