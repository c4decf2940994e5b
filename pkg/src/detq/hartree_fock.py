"""Mean-field (product-state) treatment and its complex one-particle spectrum.

Each particle carries a wave function on ``(cell, spin)``.  The other
particles enter only through five mean fields: the constants ``C``, ``A``,
``B`` (coupling-weighted densities of the crossers at the registered points)
and spike potentials ``V + iW`` located at those points.
"""
from __future__ import annotations

import cmath
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .model import FLIP, SET_MINUS, SET_PLUS, GridSpec, ModelSpec
from .quantum import IDENTITY, PAULI

logger = logging.getLogger(__name__)

DERIVATIVES = ("spectral", "central")


class BranchDegeneracyError(ValueError):
    """The square root in the closed-form spectrum vanishes at some momentum."""


class EigensolverError(RuntimeError):
    pass


@dataclass
class SingleParticleState:
    grid: GridSpec
    amplitudes: np.ndarray  # shape (cells, 2); spin index 0 is s=+1

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(self.grid.cells, 2)

    @classmethod
    def uniform(cls, grid: GridSpec, spin=(1.0, 1.0)) -> "SingleParticleState":
        v = np.asarray(spin, dtype=complex)
        amps = np.tile(v, (grid.cells, 1))
        return cls(grid, amps).normalized()

    @classmethod
    def random(cls, grid: GridSpec, rng: np.random.Generator) -> "SingleParticleState":
        """Complex Gaussian amplitudes, normalized."""
        amps = rng.normal(size=(grid.cells, 2)) + 1j * rng.normal(size=(grid.cells, 2))
        return cls(grid, amps).normalized()

    def normalized(self) -> "SingleParticleState":
        n = np.linalg.norm(self.amplitudes)
        if n == 0:
            raise ValueError("cannot normalize a zero state")
        return SingleParticleState(self.grid, self.amplitudes / n)

    def cell_mass(self) -> np.ndarray:
        return (np.abs(self.amplitudes) ** 2).sum(axis=1)

    def density_at(self, position: float) -> float:
        """Position density at a boundary: mean of the two adjacent cells over the spacing."""
        g = self.grid
        b = g.boundary_index(position)
        m = self.cell_mass()
        return 0.5 * (m[(b - 1) % g.cells] + m[b]) / g.spacing

    def spin_expectation(self, a: int) -> float:
        psi = self.amplitudes
        return float(np.einsum("ks,st,kt->", psi.conj(), PAULI[a], psi).real)


@dataclass
class MeanFields:
    C: np.ndarray
    A: np.ndarray
    B: np.ndarray
    V: list = field(default_factory=list)  # per particle: sorted [(position, weight)]
    W: list = field(default_factory=list)

    @property
    def n_particles(self) -> int:
        return len(self.C)

    def spikes(self, i: int) -> list[tuple[float, complex]]:
        """Combined ``V + iW`` spikes of particle ``i`` (0-based)."""
        out = defaultdict(complex)
        for x, v in self.V[i]:
            out[x] += v
        for x, v in self.W[i]:
            out[x] += 1j * v
        return sorted(out.items())

    def max_change(self, other: "MeanFields") -> float:
        d = max(np.max(np.abs(self.C - other.C), initial=0.0),
                np.max(np.abs(self.A - other.A), initial=0.0),
                np.max(np.abs(self.B - other.B), initial=0.0))
        for mine, theirs in ((self.V, other.V), (self.W, other.W)):
            for a, b in zip(mine, theirs):
                da, db = dict(a), dict(b)
                for x in set(da) | set(db):
                    d = max(d, abs(da.get(x, 0.0) - db.get(x, 0.0)))
        return float(d)


def _check(states: Sequence[SingleParticleState], spec: ModelSpec):
    if len(states) != spec.n_particles:
        raise ValueError(f"need {spec.n_particles} single-particle states, got {len(states)}")


def coefficients(states: Sequence[SingleParticleState], spec: ModelSpec):
    """``C``, ``A``, ``B`` per particle from the crossers' densities at the points."""
    _check(states, spec)
    weights = {FLIP: 0.5 * math.pi, SET_PLUS: spec.alpha, SET_MINUS: spec.beta}
    sums = {k: [[] for _ in range(spec.n_particles)] for k in weights}
    for kind in weights:
        for p in spec.table(kind):
            sums[kind][p.target - 1].append(states[p.crosser - 1].density_at(p.position))
    C, A, B = (np.array([weights[k] * math.fsum(terms) for terms in sums[k]])
               for k in (FLIP, SET_PLUS, SET_MINUS))
    return C, A, B


def spike_weight(kind: str, state: SingleParticleState, spec: ModelSpec) -> complex:
    """Spin expectation over the target's state of the operator attached to a point.

    The ``-1`` in each operator is folded into a difference of the two spin
    components, so an equal superposition gives exactly zero.
    """
    a, b = state.amplitudes[:, 0], state.amplitudes[:, 1]
    if kind == FLIP:
        # <s1 - 1> = -sum |a - b|^2
        return complex(-0.5 * math.pi * math.fsum(np.abs(a - b) ** 2))
    s2 = 2.0 * math.fsum((a.conj() * b).imag)
    if kind == SET_PLUS:
        # <s1 + s3 - 1> = 2 Re sum conj(a - b) b
        return spec.alpha * complex(-s2, 2.0 * math.fsum(((a - b).conj() * b).real))
    # <s1 - s3 - 1> = 2 Re sum conj(a) (b - a)
    return spec.beta * complex(s2, 2.0 * math.fsum((a.conj() * (b - a)).real))


def potentials(states: Sequence[SingleParticleState], spec: ModelSpec):
    """Spike lists ``V``, ``W``: each point puts a spike on its crosser."""
    _check(states, spec)
    acc = [defaultdict(list) for _ in range(spec.n_particles)]
    for kind in (FLIP, SET_PLUS, SET_MINUS):
        for p in spec.table(kind):
            acc[p.crosser - 1][p.position].append(spike_weight(kind, states[p.target - 1], spec))
    V = [sorted((x, math.fsum(w.real for w in ws)) for x, ws in a.items()) for a in acc]
    W = [sorted((x, math.fsum(w.imag for w in ws)) for x, ws in a.items()) for a in acc]
    return V, W


def mean_fields(states: Sequence[SingleParticleState], spec: ModelSpec) -> MeanFields:
    C, A, B = coefficients(states, spec)
    V, W = potentials(states, spec)
    return MeanFields(C, A, B, V, W)


class SpectrumPoint(NamedTuple):
    particle: int
    n: int
    branch: str
    energy: complex
    classification: str


def classify_energy(energy: complex, threshold: float) -> str:
    return "physical" if abs(energy.imag) <= threshold else "decaying"


def momentum_block(C, A, B, p, V=0.0, W=0.0) -> np.ndarray:
    """2x2 one-particle Hamiltonian acting on a plane wave of momentum ``p``."""
    g = C + 1j * (A + B)
    return (PAULI[1] * g + PAULI[2] * (B - A) + PAULI[3] * (p + 1j * A - 1j * B)
            + (-g + V + 1j * W) * IDENTITY)


def closed_form_energies(C, A, B, p, V=0.0, W=0.0) -> tuple[complex, complex]:
    """``(E+, E-)`` from the exact square root; ``+`` is the root with Re >= 0."""
    g = complex(C, A + B)
    p_hat = complex(p, A - B)
    rad = g * g + (B - A) ** 2 + p_hat * p_hat
    if rad == 0:
        raise BranchDegeneracyError(f"square-root argument vanishes at p={p!r}")
    r = cmath.sqrt(rad)
    base = -g + complex(V, W)
    return base + r, base - r


def closed_form_spectrum(C: float, A: float, B: float, V: float = 0.0, W: float = 0.0, *,
                         momenta: Sequence[int], domain_length: float, threshold: float = 1e-3,
                         particle: int = 1) -> list[SpectrumPoint]:
    out = []
    for n in momenta:
        p = 2.0 * math.pi * n / domain_length
        try:
            ep, em = closed_form_energies(C, A, B, p, V, W)
        except BranchDegeneracyError as exc:
            raise BranchDegeneracyError(f"{exc} (n={n})") from None
        out.append(SpectrumPoint(particle, int(n), "+", ep, classify_energy(ep, threshold)))
        out.append(SpectrumPoint(particle, int(n), "-", em, classify_energy(em, threshold)))
    return out


def grid_momenta(grid: GridSpec) -> np.ndarray:
    """Integer momentum labels represented on the grid, in FFT order."""
    return np.rint(np.fft.fftfreq(grid.cells) * grid.cells).astype(int)


def derivative_matrix(grid: GridSpec, kind: str = "spectral") -> np.ndarray:
    """Matrix of ``-i d/dq`` on the periodic grid."""
    G, dx = grid.cells, grid.spacing
    if kind == "spectral":
        p = 2.0 * math.pi * grid_momenta(grid) / grid.domain_length
        F = np.fft.fft(np.eye(G), axis=0)
        return np.fft.ifft(p[:, None] * F, axis=0)
    if kind == "central":
        up = np.roll(np.eye(G), 1, axis=1)  # (up @ psi)[k] = psi[k+1]
        return -1j * (up - up.T) / (2.0 * dx)
    raise ValueError(f"derivative must be one of {DERIVATIVES}, got {kind!r}")


def grid_hamiltonian(C, A, B, spikes: Sequence[tuple[float, complex]], grid: GridSpec,
                     derivative: str = "spectral") -> np.ndarray:
    """Dense ``2G x 2G`` one-particle Hamiltonian, index ``2*cell + spin``.

    The momentum keeps the shift ``p + i(A - B)`` inside the ``s3`` term.  A
    spike of weight ``w`` at a boundary adds ``w / (2*dx)`` to each adjacent cell.
    """
    G, dx = grid.cells, grid.spacing
    D = derivative_matrix(grid, derivative) + 1j * (A - B) * np.eye(G)
    g = C + 1j * (A + B)
    onsite = PAULI[1] * g + PAULI[2] * (B - A) - g * IDENTITY
    H = np.kron(D, PAULI[3]) + np.kron(np.eye(G), onsite)
    for x, w in spikes:
        b = grid.boundary_index(x)
        for cell in ((b - 1) % G, b):
            for s in (0, 1):
                H[2 * cell + s, 2 * cell + s] += w / (2.0 * dx)
    return H


def _eig(H: np.ndarray):
    try:
        vals, vecs = np.linalg.eig(H)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"eigensolver failed: {exc}; cond={np.linalg.cond(H):.3e}") from exc
    if not np.all(np.isfinite(vals)):
        raise EigensolverError(f"non-finite eigenvalues; cond={np.linalg.cond(H):.3e}")
    return vals, vecs


def label_eigenpairs(vals, vecs, grid: GridSpec, C, A, B, particle=1, threshold=1e-3):
    """Attach a momentum (dominant Fourier mode) and branch (nearest closed-form root)."""
    G = grid.cells
    labels = grid_momenta(grid)
    out = []
    for k in range(len(vals)):
        v = vecs[:, k].reshape(G, 2)
        power = (np.abs(np.fft.fft(v, axis=0)) ** 2).sum(axis=1)
        n = int(labels[int(np.argmax(power))])
        E = complex(vals[k])
        try:
            ep, em = closed_form_energies(C, A, B, 2.0 * math.pi * n / grid.domain_length)
            branch = "+" if abs(E - ep) <= abs(E - em) else "-"
        except BranchDegeneracyError:
            branch = "+"
        out.append(SpectrumPoint(particle, n, branch, E, classify_energy(E, threshold)))
    out.sort(key=lambda sp: (sp.n, sp.branch, sp.energy.real, sp.energy.imag))
    return out


def grid_hamiltonian_spectrum(C, A, B, spikes, grid: GridSpec, *, derivative: str = "spectral",
                              threshold: float = 1e-3, particle: int = 1) -> list[SpectrumPoint]:
    if 2 * grid.cells > 1024:
        raise ValueError("grid too large for a dense eigensolve (2G must be <= 1024)")
    vals, vecs = _eig(grid_hamiltonian(C, A, B, spikes, grid, derivative))
    return label_eigenpairs(vals, vecs, grid, C, A, B, particle, threshold)


@dataclass
class Classification:
    physical: list
    decaying: list
    max_im_physical: float | None
    min_im_decaying: float | None


def classify(spectrum: Sequence[SpectrumPoint], threshold: float) -> Classification:
    phys = [sp._replace(classification="physical") for sp in spectrum if abs(sp.energy.imag) <= threshold]
    dec = [sp._replace(classification="decaying") for sp in spectrum if abs(sp.energy.imag) > threshold]
    return Classification(
        phys, dec,
        max((abs(sp.energy.imag) for sp in phys), default=None),
        min((abs(sp.energy.imag) for sp in dec), default=None),
    )


# --- self-consistency -------------------------------------------------------

@dataclass
class SCFConfig:
    damping: float = 0.5
    tol: float = 1e-8
    max_iters: int = 500
    threshold: float = 1e-3
    derivative: str = "spectral"

    def __post_init__(self):
        if not 0.0 < self.damping <= 1.0:
            raise ValueError(f"damping must lie in (0, 1], got {self.damping}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.derivative not in DERIVATIVES:
            raise ValueError(f"derivative must be one of {DERIVATIVES}")


class IterationRecord(NamedTuple):
    iteration: int
    max_change: float
    energies: tuple[complex, ...]


@dataclass
class SCFResult:
    fields: MeanFields
    states: list[SingleParticleState]
    spectrum: list[SpectrumPoint]
    log: list[IterationRecord]
    converged: bool

    @property
    def iterations(self) -> int:
        return len(self.log)


def select_eigenpair(vals, vecs, A, B, tol):
    """Smallest real part among eigenvalues with ``Im E >= -(A + B + tol)``."""
    floor = -(A + B + tol)
    allowed = [k for k in range(len(vals)) if vals[k].imag >= floor]
    if not allowed:
        allowed = list(range(len(vals)))
    k = min(allowed, key=lambda k: (vals[k].real, abs(vals[k].imag), k))
    return complex(vals[k]), vecs[:, k]


def _align(v: np.ndarray, ref: np.ndarray) -> np.ndarray:
    v = v / np.linalg.norm(v)
    overlap = np.vdot(ref, v)
    if abs(overlap) > 1e-12:
        return v * (abs(overlap) / overlap)
    k = int(np.argmax(np.abs(v)))
    return v * (abs(v[k]) / v[k])


def scf_iteration(states, fields: MeanFields, spec: ModelSpec, cfg: SCFConfig):
    """One damped fixed-point update; returns ``(states, fields, energies)``."""
    grid = states[0].grid
    new_states, energies = [], []
    for i, st in enumerate(states):
        H = grid_hamiltonian(fields.C[i], fields.A[i], fields.B[i], fields.spikes(i), grid, cfg.derivative)
        vals, vecs = _eig(H)
        E, v = select_eigenpair(vals, vecs, fields.A[i], fields.B[i], cfg.tol)
        old = st.amplitudes.reshape(-1)
        v = _align(v, old)
        mixed = (1.0 - cfg.damping) * old + cfg.damping * v
        new_states.append(SingleParticleState(grid, mixed).normalized())
        energies.append(E)
    return new_states, mean_fields(new_states, spec), tuple(energies)


def scf_solve(spec: ModelSpec, grid: GridSpec, init: Sequence[SingleParticleState],
              config: SCFConfig | None = None) -> SCFResult:
    """Damped fixed-point iteration of the mean-field equations.

    Stops when no field (``C``, ``A``, ``B`` or any spike weight) moves by
    more than ``tol`` in one iteration.  On non-convergence the last iterate
    is returned with ``converged=False``.
    """
    cfg = config or SCFConfig()
    states = [st.normalized() for st in init]
    for st in states:
        if st.grid != grid:
            raise ValueError("initial states live on a different grid")
    fields = mean_fields(states, spec)
    log: list[IterationRecord] = []
    converged = False
    for it in range(1, cfg.max_iters + 1):
        states, new_fields, energies = scf_iteration(states, fields, spec, cfg)
        change = fields.max_change(new_fields)
        fields = new_fields
        log.append(IterationRecord(it, change, energies))
        logger.debug("scf iteration %d: max field change %.3e", it, change)
        if change < cfg.tol:
            converged = True
            break
    if not converged:
        logger.warning("scf did not converge in %d iterations", cfg.max_iters)
    spectrum = []
    for i in range(spec.n_particles):
        spectrum += grid_hamiltonian_spectrum(
            fields.C[i], fields.A[i], fields.B[i], fields.spikes(i), grid,
            derivative=cfg.derivative, threshold=cfg.threshold, particle=i + 1,
        )
    return SCFResult(fields, states, spectrum, log, converged)
