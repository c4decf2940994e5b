"""Event-driven simulation of the classical unit-speed model.

Particles move on the circle ``[0, L)`` with velocity ``s = +-1``.  When a
crosser passes one of its registered points the target spin is flipped or
reset.  Simultaneous crossings (within ``1e-12 * L``) fold into one event whose
actions follow the tie-break order of :meth:`ModelSpec.tagged_points`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import _backend
from ._pure import wrap
from .model import KIND_CODE, KINDS, GridSpec, ModelSpec

COINCIDENCE = 1e-12
PROBE = 3


@dataclass(frozen=True)
class ClassicalState:
    time: float
    positions: tuple[float, ...]
    spins: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "positions", tuple(float(x) for x in self.positions))
        object.__setattr__(self, "spins", tuple(int(x) for x in self.spins))
        if len(self.positions) != len(self.spins):
            raise ValueError("positions and spins differ in length")
        if any(x not in (-1, 1) for x in self.spins):
            raise ValueError(f"spins must be +-1, got {self.spins}")

    @classmethod
    def at(cls, positions, spins, time=0.0, domain_length=None) -> "ClassicalState":
        if domain_length is not None:
            positions = [wrap(float(x), domain_length) for x in positions]
        return cls(float(time), tuple(positions), tuple(spins))

    @property
    def key(self):
        """Identity used for merging: positions and spins, time excluded."""
        return self.positions, self.spins


class Action(NamedTuple):
    crosser: int
    position: float
    kind: str
    target: int


@dataclass(frozen=True)
class Event:
    time: float
    actions: tuple[Action, ...]

    @property
    def crosser(self) -> int:
        return self.actions[0].crosser

    @property
    def position(self) -> float:
        return self.actions[0].position


@dataclass(frozen=True)
class Trajectory:
    initial: ClassicalState
    events: tuple[Event, ...] = field(default_factory=tuple)
    final: ClassicalState | None = None


class _Table(NamedTuple):
    tgt: np.ndarray
    crs: np.ndarray
    pos: np.ndarray
    kind: np.ndarray
    tagged: list


def _table(spec: ModelSpec, probes: Sequence[tuple[int, float]] = ()) -> _Table:
    tagged = spec.tagged_points()
    rows = [(p.target - 1, p.crosser - 1, p.position, KIND_CODE[k]) for k, p in tagged]
    # probes sort after real actions at the same crosser/position; they carry no action
    rows += [(j - 1, j - 1, float(x), PROBE) for j, x in probes]
    rows.sort(key=lambda r: (r[1], r[2], r[3], r[0]))
    if not rows:
        return _Table(*(np.zeros(0, dtype=d) for d in (np.int64, np.int64, np.float64, np.int64)), [])
    tgt, crs, pos, kind = zip(*rows)
    return _Table(np.array(tgt, dtype=np.int64), np.array(crs, dtype=np.int64),
                  np.array(pos, dtype=np.float64), np.array(kind, dtype=np.int64), rows)


def _action(row) -> Action:
    tgt, crs, pos, code = row
    return Action(crs + 1, pos, KINDS[code], tgt + 1)


def _events(table: _Table, ev_time, ev_off, ev_pts) -> tuple[Event, ...]:
    out = []
    for e, t in enumerate(ev_time):
        rows = [table.tagged[p] for p in ev_pts[ev_off[e]:ev_off[e + 1]]]
        acts = tuple(_action(r) for r in rows if r[3] != PROBE)
        if acts:
            out.append(Event(float(t), acts))
    return tuple(out)


def next_event(state: ClassicalState, spec: ModelSpec) -> Event | None:
    """Earliest strictly-future crossing, with all coincident crossings folded in."""
    table = _table(spec)
    if not table.tagged:
        return None
    L = spec.domain_length
    q, s = state.positions, state.spins
    dt = []
    for j, x in zip(table.crs.tolist(), table.pos.tolist()):
        d = wrap((x - q[j]) * s[j], L)
        dt.append(L if d == 0.0 else d)
    best = min(dt)
    hit = [p for p, d in enumerate(dt) if d <= best + COINCIDENCE * L]
    return Event(state.time + float(best), tuple(_action(table.tagged[p]) for p in hit))


def advance(state: ClassicalState, t: float, domain_length: float) -> ClassicalState:
    """Free motion to time ``t`` with no event processing."""
    d = t - state.time
    return ClassicalState(
        t, tuple(wrap(q + s * d, domain_length) for q, s in zip(state.positions, state.spins)),
        state.spins,
    )


def apply_event(state: ClassicalState, event: Event) -> ClassicalState:
    spins = list(state.spins)
    for a in event.actions:
        i = a.target - 1
        if a.kind == "flip":
            spins[i] = -spins[i]
        elif a.kind == "set_plus":
            spins[i] = 1
        else:
            spins[i] = -1
    return ClassicalState(state.time, state.positions, tuple(spins))


def simulate(state: ClassicalState, spec: ModelSpec, t_final: float, *, backend=None) -> Trajectory:
    """Exact piecewise-linear evolution to ``t_final`` (events at ``t_final`` included)."""
    if t_final < state.time:
        raise ValueError("t_final precedes the initial time")
    k = _backend.get(backend)
    table = _table(spec)
    L = spec.domain_length
    q, s, ev_time, ev_off, ev_pts, _ = k.simulate_events(
        state.positions, state.spins, state.time, t_final, L, COINCIDENCE * L,
        table.tgt, table.crs, table.pos, table.kind, True,
    )
    final = ClassicalState(float(t_final), tuple(q.tolist()), tuple(s.tolist()))
    return Trajectory(state, _events(table, ev_time, ev_off, ev_pts), final)


def simulate_many(states: Sequence[ClassicalState], spec: ModelSpec, t_final: float,
                  *, backend=None) -> list[ClassicalState]:
    """Final states of many independent runs sharing one start time."""
    if not states:
        return []
    Q = np.array([st.positions for st in states], dtype=np.float64)
    S = np.array([st.spins for st in states], dtype=np.int64)
    Qf, Sf, _ = run_batch(Q, S, spec, states[0].time, t_final, backend=backend)
    return [ClassicalState(float(t_final), tuple(a), tuple(b)) for a, b in zip(Qf.tolist(), Sf.tolist())]


def run_batch(Q, S, spec: ModelSpec, t0: float, t_final: float, probes=(), *, backend=None):
    """Array form of :func:`simulate` without event records.

    ``probes`` is a list of ``(crosser, position)`` pairs whose crossings are
    counted (half weight exactly at ``t_final``) but trigger nothing.
    """
    k = _backend.get(backend)
    table = _table(spec, probes)
    L = spec.domain_length
    return k.simulate_batch(Q, S, t0, t_final, L, COINCIDENCE * L,
                            table.tgt, table.crs, table.pos, table.kind)


def simulate_discrete(state: ClassicalState, spec: ModelSpec, grid: GridSpec, steps: int,
                      *, backend=None) -> Trajectory:
    """Cell-by-cell stepping that mirrors the quantum engine exactly.

    Within a step the particles move one cell along their spins one at a
    time, in index order, and the points each one crosses act right after its
    move.  Splitting the step this way keeps it a bijection when only flips
    are present, even if two particles flip each other in the same step.
    """
    if steps < 0:
        raise ValueError("steps must be non-negative")
    cells = [grid.cell_of_center(x) for x in state.positions]
    k = _backend.get(backend)
    tagged = spec.tagged_points()
    tgt = np.array([p.target - 1 for _, p in tagged], dtype=np.int64)
    crs = np.array([p.crosser - 1 for _, p in tagged], dtype=np.int64)
    bidx = np.array([grid.boundary_index(p.position) for _, p in tagged], dtype=np.int64)
    kind = np.array([KIND_CODE[kd] for kd, _ in tagged], dtype=np.int64)
    c, s, ev_step, ev_off, ev_pts = k.discrete_run(cells, state.spins, grid.cells, steps,
                                                   tgt, crs, bidx, kind, True)
    dx = grid.spacing
    events = []
    for e, n in enumerate(ev_step.tolist()):
        acts = []
        for p in ev_pts[ev_off[e]:ev_off[e + 1]].tolist():
            kd, pt = tagged[p]
            acts.append(Action(pt.crosser, pt.position, kd, pt.target))
        events.append(Event(state.time + n * dx, tuple(acts)))
    final = ClassicalState(state.time + steps * dx, tuple(grid.center(x) for x in c.tolist()),
                           tuple(s.tolist()))
    return Trajectory(state, tuple(events), final)


def merged_class_count(spec: ModelSpec, initial_states: Iterable[ClassicalState], t: float,
                       *, backend=None) -> int:
    """Number of distinct final states reached from ``initial_states`` at time ``t``."""
    states = list(dict.fromkeys(initial_states))
    if any(st.time != 0.0 for st in states):
        raise ValueError("all initial states must start at time 0")
    finals = simulate_many(states, spec, t, backend=backend)
    return len({f.key for f in finals})


def reverse(state: ClassicalState) -> ClassicalState:
    """Negate every spin (time-reversal of the free motion)."""
    return ClassicalState(state.time, state.positions, tuple(-x for x in state.spins))
