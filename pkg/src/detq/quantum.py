"""Exact quantum twin of the classical model on a position grid.

The amplitude array has shape ``(G,)*N + (2,)*N``: one cell axis per particle
followed by one spin axis per particle.  Spin index 0 is ``s=+1``, index 1 is
``s=-1``, so ``(1, 0)`` is the spin-up column vector.

A step is split over the particles in index order: particle ``j`` streams
one cell along its spin (a pure index permutation of each spin sector), then
the 2x2 kick of every boundary it crossed acts on the target spin, in
tie-break order.  A kick never touches the crosser's own cell or spin, so each
sub-step is a permutation when only flips are present.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .classical import ClassicalState, simulate_discrete
from .model import FLIP, SET_MINUS, SET_PLUS, GridSpec, ModelSpec

PAULI = {
    1: np.array([[0, 1], [1, 0]], dtype=complex),
    2: np.array([[0, -1j], [1j, 0]], dtype=complex),
    3: np.array([[1, 0], [0, -1]], dtype=complex),
}
IDENTITY = np.eye(2, dtype=complex)


class KickMatrix(NamedTuple):
    matrix: np.ndarray
    kind: str
    coupling: float

    def __matmul__(self, other):
        return self.matrix @ other


def flip_kick() -> KickMatrix:
    return KickMatrix(np.array([[0, 1], [1, 0]], dtype=complex), FLIP, math.pi / 2)


def set_plus_kick(alpha: float) -> KickMatrix:
    """``exp(i a s2 + a (s3 + s1 - 1))``; ``alpha=inf`` gives ``[[1, 1], [0, 0]]``."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    e = math.exp(-2.0 * alpha)
    return KickMatrix(np.array([[1.0, 1.0 - e], [0.0, e]], dtype=complex), SET_PLUS, alpha)


def set_minus_kick(beta: float) -> KickMatrix:
    """``exp(-i b s2 + b (s1 - s3 - 1))``; ``beta=inf`` gives ``[[0, 0], [1, 1]]``."""
    if beta < 0:
        raise ValueError("beta must be non-negative")
    e = math.exp(-2.0 * beta)
    return KickMatrix(np.array([[e, 0.0], [1.0 - e, 1.0]], dtype=complex), SET_MINUS, beta)


def flip_generator() -> np.ndarray:
    """Spin part of the flip interaction per unit delta weight."""
    return 0.5 * math.pi * (PAULI[1] - IDENTITY)


def set_plus_generator(alpha: float) -> np.ndarray:
    return alpha * (-PAULI[2] + 1j * (PAULI[1] + PAULI[3] - IDENTITY))


def set_minus_generator(beta: float) -> np.ndarray:
    return beta * (PAULI[2] + 1j * (PAULI[1] - PAULI[3] - IDENTITY))


def kick_for(kind: str, spec: ModelSpec, use_limit_kicks: bool) -> KickMatrix:
    if kind == FLIP:
        return flip_kick()
    if kind == SET_PLUS:
        return set_plus_kick(math.inf if use_limit_kicks else spec.alpha)
    return set_minus_kick(math.inf if use_limit_kicks else spec.beta)


@dataclass
class WaveFunction:
    grid: GridSpec
    amplitudes: np.ndarray
    steps: int = 0

    @property
    def n_particles(self) -> int:
        return self.amplitudes.ndim // 2

    def norm2(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def copy(self) -> "WaveFunction":
        return WaveFunction(self.grid, self.amplitudes.copy(), self.steps)

    @classmethod
    def basis(cls, grid: GridSpec, cells, spins) -> "WaveFunction":
        n = len(cells)
        amps = np.zeros((grid.cells,) * n + (2,) * n, dtype=complex)
        amps[tuple(int(c) % grid.cells for c in cells) + tuple(0 if s > 0 else 1 for s in spins)] = 1.0
        return cls(grid, amps)

    @classmethod
    def from_classical(cls, grid: GridSpec, state: ClassicalState) -> "WaveFunction":
        return cls.basis(grid, [grid.cell_of_center(x) for x in state.positions], state.spins)

    @classmethod
    def product(cls, grid: GridSpec, cells, spin_vectors) -> "WaveFunction":
        """Particles localized at ``cells`` with the given 2-component spin states."""
        amps = np.ones((), dtype=complex)
        n = len(cells)
        for c in cells:
            e = np.zeros(grid.cells, dtype=complex)
            e[int(c) % grid.cells] = 1.0
            amps = np.multiply.outer(amps, e)
        for v in spin_vectors:
            amps = np.multiply.outer(amps, np.asarray(v, dtype=complex))
        assert amps.ndim == 2 * n
        return cls(grid, amps)

    def support(self, threshold: float = 0.0):
        """Nonzero entries as ``(cells, spins, amplitude)`` in index order."""
        n = self.n_particles
        idx = np.argwhere(np.abs(self.amplitudes) > threshold)
        for row in idx:
            cells = tuple(int(x) for x in row[:n])
            spins = tuple(1 if x == 0 else -1 for x in row[n:])
            yield cells, spins, complex(self.amplitudes[tuple(row)])


class _Kick(NamedTuple):
    crosser: int  # 0-based
    boundary: int
    target: int  # 0-based
    matrix: np.ndarray


@dataclass
class Stepper:
    """Precomputed kick plan for one (spec, grid) pair."""

    spec: ModelSpec
    grid: GridSpec
    use_limit_kicks: bool = False
    kicks: list = field(init=False)

    def __post_init__(self):
        g = self.grid
        self.kicks = [
            _Kick(p.crosser - 1, g.boundary_index(p.position), p.target - 1,
                  kick_for(kind, self.spec, self.use_limit_kicks).matrix)
            for kind, p in self.spec.tagged_points()
        ]

    def step(self, psi: WaveFunction) -> WaveFunction:
        n = psi.n_particles
        G = self.grid.cells
        amps = psi.amplitudes.copy()
        for j in range(n):
            for sj, vel in ((0, 1), (1, -1)):
                sl = (slice(None),) * (n + j) + (sj,)
                amps[sl] = np.roll(amps[sl], vel, axis=j)
            for k in self.kicks:
                if k.crosser != j:
                    continue
                # the crosser's cell and spin index are fixed in the slice, so
                # the target spin axis moves down by one or two positions
                axis = n + k.target - 1 - (1 if j < k.target else 0)
                for sj, vel in ((0, 1), (1, -1)):
                    # cell reached after crossing boundary b: b moving up, b-1 moving down
                    cell = k.boundary % G if vel > 0 else (k.boundary - 1) % G
                    idx = (slice(None),) * j + (cell,) + (slice(None),) * (n - 1) + (sj,)
                    sub = amps[idx]
                    amps[idx] = np.moveaxis(np.tensordot(k.matrix, sub, axes=([1], [axis])), 0, axis)
        return WaveFunction(psi.grid, amps, psi.steps + 1)


def step(psi: WaveFunction, spec: ModelSpec, use_limit_kicks: bool = False) -> WaveFunction:
    return Stepper(spec, psi.grid, use_limit_kicks).step(psi)


def evolve(psi: WaveFunction, spec: ModelSpec, steps: int, use_limit_kicks: bool = False) -> WaveFunction:
    stepper = Stepper(spec, psi.grid, use_limit_kicks)
    for _ in range(steps):
        psi = stepper.step(psi)
    return psi


def norm_history(psi: WaveFunction, spec: ModelSpec, steps: int,
                 use_limit_kicks: bool = False) -> list[float]:
    """Squared norm after each of ``steps`` steps."""
    stepper = Stepper(spec, psi.grid, use_limit_kicks)
    out = []
    for _ in range(steps):
        psi = stepper.step(psi)
        out.append(psi.norm2())
    return out


@dataclass
class CorrespondenceReport:
    steps: int
    agreement: list[bool]
    first_disagreement: int | None = None
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.first_disagreement is None


def classical_correspondence(spec: ModelSpec, grid: GridSpec, state: ClassicalState,
                             steps: int) -> CorrespondenceReport:
    """Evolve a classical basis state with limit kicks and compare every step.

    Agreement at a step means the wave function has exactly one nonzero
    amplitude, equal to 1, at the cells and spins :func:`simulate_discrete`
    reaches after the same number of steps.
    """
    psi = WaveFunction.from_classical(grid, state)
    stepper = Stepper(spec, grid, use_limit_kicks=True)
    cur = state
    agreement: list[bool] = []
    for n in range(1, steps + 1):
        psi = stepper.step(psi)
        cur = simulate_discrete(cur, spec, grid, 1).final
        want = (tuple(grid.cell_of_center(x) for x in cur.positions), cur.spins)
        got = list(psi.support())
        ok = len(got) == 1 and (got[0][0], got[0][1]) == want and got[0][2] == 1.0
        agreement.append(ok)
        if not ok:
            detail = f"step {n}: expected basis state {want}, got {got[:4]}"
            return CorrespondenceReport(steps, agreement, n, detail)
    return CorrespondenceReport(steps, agreement)
