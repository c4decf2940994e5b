"""Monte-Carlo ensembles of classical states.

Sample ``m`` of an ensemble draws its ``2N`` uniforms from a Philox stream
keyed by the seed, at counter offset ``2N*m``.  Any slice of the ensemble can
therefore be regenerated on its own, and chunked or threaded runs reproduce a
serial run bit for bit.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .classical import ClassicalState, run_batch
from .model import ModelSpec


@dataclass(frozen=True)
class EnsembleSpec:
    """Initial distribution: uniform positions on ``ranges[i]``, spin +1 with ``p_plus[i]``.

    ``ranges`` of ``None`` means the whole circle.  Scalars broadcast to every
    particle.
    """

    sample_count: int
    seed: int = 0
    ranges: Sequence[tuple[float, float]] | None = None
    p_plus: float | Sequence[float] = 0.5

    def __post_init__(self):
        if self.sample_count < 1:
            raise ValueError(f"sample_count must be >= 1, got {self.sample_count}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")

    def resolved(self, spec: ModelSpec):
        n, L = spec.n_particles, spec.domain_length
        ranges = [(0.0, L)] * n if self.ranges is None else [tuple(map(float, r)) for r in self.ranges]
        p = [float(self.p_plus)] * n if np.isscalar(self.p_plus) else [float(x) for x in self.p_plus]
        if len(ranges) != n or len(p) != n:
            raise ValueError("ensemble ranges/p_plus must have one entry per particle")
        for lo, hi in ranges:
            if not (0.0 <= lo <= hi <= L and lo < L):
                raise ValueError(f"position range ({lo}, {hi}) not inside [0, {L}]")
        if any(not 0.0 <= x <= 1.0 for x in p):
            raise ValueError("p_plus must lie in [0, 1]")
        return ranges, p


def _uniforms(seed: int, width: int, start: int, stop: int) -> np.ndarray:
    bitgen = np.random.Philox(key=seed)
    offset = width * start
    # one Philox counter step yields four 64-bit words; one double uses one word
    bitgen.advance(offset // 4)
    gen = np.random.Generator(bitgen)
    gen.random(offset % 4)
    return gen.random((stop - start, width))


def sample_arrays(spec: ModelSpec, ens: EnsembleSpec, start: int = 0, stop: int | None = None):
    """Positions ``Q`` (M, N) and spins ``S`` (M, N) for samples ``start..stop``."""
    stop = ens.sample_count if stop is None else stop
    if not 0 <= start <= stop <= ens.sample_count:
        raise ValueError("sample slice out of range")
    n = spec.n_particles
    ranges, p = ens.resolved(spec)
    U = _uniforms(ens.seed, 2 * n, start, stop)
    lo = np.array([r[0] for r in ranges])
    width = np.array([r[1] - r[0] for r in ranges])
    Q = lo + width * U[:, :n]
    Q[Q >= spec.domain_length] = 0.0
    S = np.where(U[:, n:] < np.array(p), 1, -1).astype(np.int64)
    return Q, S


def sample_ensemble(spec: ModelSpec, ens: EnsembleSpec, start: int = 0,
                    stop: int | None = None) -> list[ClassicalState]:
    Q, S = sample_arrays(spec, ens, start, stop)
    return [ClassicalState(0.0, tuple(q), tuple(s)) for q, s in zip(Q.tolist(), S.tolist())]


def propagate(spec: ModelSpec, Q, S, t: float, *, threads: int = 1, probes=(), backend=None):
    """Run every sample to time ``t``; returns ``(Q, S, probe_weights)``.

    Samples are split into contiguous chunks for the worker threads; the
    result does not depend on ``threads``.
    """
    Q = np.asarray(Q, dtype=np.float64)
    S = np.asarray(S, dtype=np.int64)
    M = len(Q)
    if threads <= 1 or M < 2 * threads:
        return run_batch(Q, S, spec, 0.0, t, probes, backend=backend)
    bounds = np.linspace(0, M, threads + 1).astype(int)
    with ThreadPoolExecutor(threads) as pool:
        parts = list(pool.map(
            lambda ab: run_batch(Q[ab[0]:ab[1]], S[ab[0]:ab[1]], spec, 0.0, t, probes, backend=backend),
            zip(bounds[:-1], bounds[1:]),
        ))
    return tuple(np.concatenate([part[k] for part in parts]) for k in range(3))


@dataclass(frozen=True)
class Histogram:
    """Counts per particle, bin and spin (index 0 is s=+1, index 1 is s=-1)."""

    edges: np.ndarray
    counts: np.ndarray  # shape (N, bins, 2)
    total: int

    @property
    def bins(self) -> int:
        return len(self.edges) - 1

    def mass(self) -> np.ndarray:
        return self.counts.sum(axis=(1, 2))


def histogram(Q, S, domain_length: float, bins: int) -> Histogram:
    Q = np.asarray(Q, dtype=np.float64)
    S = np.asarray(S)
    M, n = Q.shape
    idx = np.minimum((Q * bins / domain_length).astype(np.int64), bins - 1)
    spin = (S < 0).astype(np.int64)
    counts = np.zeros((n, bins, 2), dtype=np.int64)
    for i in range(n):
        np.add.at(counts[i], (idx[:, i], spin[:, i]), 1)
    return Histogram(np.linspace(0.0, domain_length, bins + 1), counts, M)


def translate_histogram(h: Histogram, t: float, domain_length: float) -> np.ndarray:
    """Fractional counts of ``h`` carried along ``q -> q + s*t`` per spin sector."""
    out = np.zeros(h.counts.shape, dtype=np.float64)
    for col, s in ((0, 1), (1, -1)):
        u = s * t * h.bins / domain_length
        r = round(u)
        if abs(u - r) < 1e-9:
            u = float(r)
        k = math.floor(u)
        f = u - k
        c = h.counts[:, :, col].astype(np.float64)
        out[:, :, col] = (1.0 - f) * np.roll(c, k, axis=1) + f * np.roll(c, k + 1, axis=1)
    return out


def total_variation(h: Histogram, reference: np.ndarray) -> float:
    """Largest per-particle total-variation distance between ``h`` and ``reference``."""
    d = 0.5 * np.abs(h.counts - reference).sum(axis=(1, 2)) / h.total
    return float(d.max())


def translation_check(spec: ModelSpec, ens: EnsembleSpec, t: float, bins: int,
                      *, threads: int = 1, backend=None) -> float:
    """Distance between the propagated histogram and the translated initial one.

    Only free motion is allowed; the result shrinks like ``sqrt(bins/M)``.
    """
    if not spec.is_free:
        raise ValueError("translation_check needs a model with empty point tables")
    Q, S = sample_arrays(spec, ens)
    h0 = histogram(Q, S, spec.domain_length, bins)
    Qt, St, _ = propagate(spec, Q, S, t, threads=threads, backend=backend)
    ht = histogram(Qt, St, spec.domain_length, bins)
    return total_variation(ht, translate_histogram(h0, t, spec.domain_length))


def point_density(spec: ModelSpec, ens: EnsembleSpec, position: float, crosser: int,
                  window: float, *, threads: int = 1, backend=None) -> float:
    """Crossing-rate estimate of the density of particle ``crosser`` at ``position``.

    Counts passages of ``q_crosser`` through ``position`` during ``[0, window]``
    summed over samples, with contacts exactly at ``t=0`` or ``t=window``
    weighted one half, divided by ``M * window``.  At unit speed the crossing
    rate equals the density.
    """
    if not window > 0:
        raise ValueError("window must be positive")
    Q, S = sample_arrays(spec, ens)
    j = crosser - 1
    start = 0.5 * np.count_nonzero(Q[:, j] == position)
    _, _, w = propagate(spec, Q, S, window, threads=threads, probes=[(crosser, position)],
                        backend=backend)
    return float((start + w.sum()) / (len(Q) * window))
