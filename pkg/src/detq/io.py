"""Deterministic CSV/JSON artifact writers.

Floats are written with ``repr`` (shortest round-trip form, at most 17
significant digits), so identical results give identical bytes.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .classical import Trajectory
from .ensemble import Histogram
from .hartree_fock import IterationRecord, SpectrumPoint
from .quantum import WaveFunction


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def trajectory_rows(traj: Trajectory):
    """One row per action; then one ``final`` row per particle (target column holds the spin)."""
    for e, ev in enumerate(traj.events):
        for a in ev.actions:
            yield ev.time, e, a.crosser, a.position, a.kind, a.target
    fin = traj.final
    for i, (q, s) in enumerate(zip(fin.positions, fin.spins), start=1):
        yield fin.time, len(traj.events), i, q, "final", s


def write_trajectory(path, traj: Trajectory) -> Path:
    return write_csv(path, ["t", "event_index", "crosser", "position", "kind", "target"],
                     trajectory_rows(traj))


def write_histogram(path, h: Histogram) -> Path:
    def rows():
        for i in range(h.counts.shape[0]):
            for col, s in ((0, 1), (1, -1)):
                for b in range(h.bins):
                    yield i + 1, s, h.edges[b], h.edges[b + 1], h.counts[i, b, col]
    return write_csv(path, ["particle", "spin", "bin_lo", "bin_hi", "count"], rows())


def write_spectrum(path, spectrum: Sequence[SpectrumPoint]) -> Path:
    return write_csv(path, ["particle", "n", "branch", "re_E", "im_E", "class"],
                     ((sp.particle, sp.n, sp.branch, sp.energy.real, sp.energy.imag, sp.classification)
                      for sp in spectrum))


def write_scf_log(path, log: Sequence[IterationRecord]) -> Path:
    def rows():
        for rec in log:
            for i, E in enumerate(rec.energies, start=1):
                yield rec.iteration, rec.max_change, i, E.real, E.imag
    return write_csv(path, ["iteration", "max_change", "particle", "re_E", "im_E"], rows())


def write_wavefunction(path, psi: WaveFunction, threshold: float = 0.0) -> Path:
    n = psi.n_particles
    header = [f"cell_{i}" for i in range(1, n + 1)] + [f"spin_{i}" for i in range(1, n + 1)] + ["re", "im"]
    return write_csv(path, header, (
        (*cells, *spins, a.real, a.imag) for cells, spins, a in psi.support(threshold)))


def jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [jsonable(obj.real), jsonable(obj.imag)]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path, data) -> Path:
    path = Path(path)
    path.write_text(json.dumps(jsonable(data), sort_keys=True, indent=2, allow_nan=False) + "\n")
    return path
