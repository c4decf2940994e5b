"""``detq`` command line: one subcommand per run, JSON config in, CSV/JSON out.

    detq <subcommand> --config <path> [--out <dir>] [--seed <u64>] [--threads <n>]

Output directory precedence: ``--out``, then the config's ``out`` key, then
``$DETQ_OUT``, then ``./detq_out``.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .classical import ClassicalState, simulate, simulate_discrete
from .ensemble import (EnsembleSpec, histogram, point_density, propagate, sample_arrays,
                       total_variation, translate_histogram)
from .hartree_fock import (BranchDegeneracyError, EigensolverError, SCFConfig, SingleParticleState,
                           classify, closed_form_spectrum, coefficients, scf_solve)
from .io import (write_histogram, write_json, write_scf_log, write_spectrum, write_trajectory,
                 write_wavefunction)
from .model import GridSpec, ModelSpec, SnapError, model_from_dict, snap_to_grid, validate
from .quantum import Stepper, WaveFunction, classical_correspondence

logger = logging.getLogger("detq")

SUBCOMMANDS = ("simulate", "ensemble", "quantum", "hf", "spectrum")
EXIT = {"parse": 2, "unknown_key": 2, "range": 2, "type": 2, "missing": 2, "io": 3,
        "model": 4, "limit": 5, "engine": 6}


class ConfigError(ValueError):
    def __init__(self, category: str, message: str):
        super().__init__(message)
        self.category = category


# --- config schema ------------------------------------------------------------

@dataclass
class GridSection:
    cells: int = 64
    derivative: str = "spectral"


@dataclass
class SimulateSection:
    positions: list | None = None
    spins: list | None = None
    t_final: float | None = None
    steps: int | None = None


@dataclass
class EnsembleSection:
    samples: int = 10000
    t: float = 1.0
    bins: int = 50
    ranges: list | None = None
    p_plus: Any = 0.5
    density_window: float | None = None


@dataclass
class QuantumSection:
    steps: int = 100
    cells: list | None = None
    spins: list | None = None
    superpose: list = field(default_factory=list)
    limit_kicks: bool = True
    snapshot_threshold: float = 0.0


@dataclass
class SCFSection:
    damping: float = 0.5
    tol: float = 1e-8
    max_iters: int = 500
    threshold: float = 1e-3
    init: str = "uniform"


@dataclass
class SpectrumSection:
    C: float | None = None
    A: float | None = None
    B: float | None = None
    V: float = 0.0
    W: float = 0.0
    n_max: int = 16
    domain_length: float | None = None


SECTIONS = {"grid": GridSection, "simulate": SimulateSection, "ensemble": EnsembleSection,
            "quantum": QuantumSection, "scf": SCFSection, "spectrum": SpectrumSection}


@dataclass
class RunConfig:
    subcommand: str
    model: str | None = None
    seed: int = 0
    threads: int = 1
    out: str | None = None
    grid: GridSection = field(default_factory=GridSection)
    simulate: SimulateSection = field(default_factory=SimulateSection)
    ensemble: EnsembleSection = field(default_factory=EnsembleSection)
    quantum: QuantumSection = field(default_factory=QuantumSection)
    scf: SCFSection = field(default_factory=SCFSection)
    spectrum: SpectrumSection = field(default_factory=SpectrumSection)

    def resolved(self) -> dict:
        """Everything that determines the artifacts (``out`` and ``threads`` do not)."""
        d = dataclasses.asdict(self)
        d.pop("out")
        d.pop("threads")
        return d


def _section(cls, data, name):
    if not isinstance(data, dict):
        raise ConfigError("type", f"section {name!r} must be an object")
    known = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError("unknown_key", f"unknown key {key!r} in section {name!r}")
    return cls(**data)


def _num(value, name, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError("type", f"{name} must be a number, got {value!r}")
    if kind is int and not float(value).is_integer():
        raise ConfigError("type", f"{name} must be an integer, got {value!r}")
    return kind(value)


def _check_ranges(cfg: RunConfig):
    def need(cond, msg):
        if not cond:
            raise ConfigError("range", msg)

    need(cfg.subcommand in SUBCOMMANDS, f"subcommand must be one of {SUBCOMMANDS}, got {cfg.subcommand!r}")
    cfg.seed = _num(cfg.seed, "seed", int)
    need(0 <= cfg.seed < 2**64, "seed must be an unsigned 64-bit integer")
    cfg.threads = _num(cfg.threads, "threads", int)
    need(cfg.threads >= 1, "threads must be >= 1")
    g = cfg.grid
    g.cells = _num(g.cells, "grid.cells", int)
    need(g.cells >= 2, f"grid.cells must be >= 2, got {g.cells}")
    need(g.derivative in ("spectral", "central"), "grid.derivative must be 'spectral' or 'central'")
    e = cfg.ensemble
    e.samples = _num(e.samples, "ensemble.samples", int)
    need(e.samples >= 1, f"ensemble.samples must be >= 1, got {e.samples}")
    e.bins = _num(e.bins, "ensemble.bins", int)
    need(e.bins >= 1, "ensemble.bins must be >= 1")
    e.t = _num(e.t, "ensemble.t")
    need(e.t >= 0, "ensemble.t must be >= 0")
    if e.density_window is not None:
        e.density_window = _num(e.density_window, "ensemble.density_window")
        need(e.density_window > 0, "ensemble.density_window must be > 0")
    s = cfg.scf
    s.damping = _num(s.damping, "scf.damping")
    need(0 < s.damping <= 1, f"scf.damping must lie in (0, 1], got {s.damping}")
    s.tol = _num(s.tol, "scf.tol")
    need(s.tol > 0, "scf.tol must be > 0")
    s.max_iters = _num(s.max_iters, "scf.max_iters", int)
    need(s.max_iters >= 1, "scf.max_iters must be >= 1")
    s.threshold = _num(s.threshold, "scf.threshold")
    need(s.threshold >= 0, "scf.threshold must be >= 0")
    need(s.init in ("uniform", "random"), "scf.init must be 'uniform' or 'random'")
    q = cfg.quantum
    q.steps = _num(q.steps, "quantum.steps", int)
    need(q.steps >= 0, "quantum.steps must be >= 0")
    sim = cfg.simulate
    if sim.steps is not None:
        sim.steps = _num(sim.steps, "simulate.steps", int)
        need(sim.steps >= 0, "simulate.steps must be >= 0")
    if sim.t_final is not None:
        sim.t_final = _num(sim.t_final, "simulate.t_final")
        need(sim.t_final >= 0, "simulate.t_final must be >= 0")
    sp = cfg.spectrum
    sp.n_max = _num(sp.n_max, "spectrum.n_max", int)
    need(sp.n_max >= 0, "spectrum.n_max must be >= 0")
    have = [x is not None for x in (sp.C, sp.A, sp.B)]
    need(all(have) or not any(have), "spectrum.C, A and B must be given together")
    if cfg.model is None:
        need(cfg.subcommand == "spectrum" and all(have) and sp.domain_length is not None,
             "a model path is required (or spectrum constants C, A, B and domain_length)")


def parse_config(text: str, base_dir: str | Path | None = None, subcommand: str | None = None) -> RunConfig:
    """Parse and validate a JSON run config.

    Relative model paths resolve against ``base_dir``; ``subcommand`` (from the
    command line) fills in or must agree with the config's own.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("parse", f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError("parse", "config must be a JSON object")
    top = {f.name for f in dataclasses.fields(RunConfig)}
    for key in data:
        if key not in top:
            raise ConfigError("unknown_key", f"unknown key {key!r}")
    if subcommand is not None:
        if data.get("subcommand", subcommand) != subcommand:
            raise ConfigError("range", f"config subcommand {data['subcommand']!r} "
                                       f"disagrees with command line {subcommand!r}")
        data["subcommand"] = subcommand
    if "subcommand" not in data:
        raise ConfigError("missing", "missing required key 'subcommand'")
    kwargs = {k: v for k, v in data.items() if k not in SECTIONS}
    for name, cls in SECTIONS.items():
        if name in data:
            kwargs[name] = _section(cls, data[name], name)
    cfg = RunConfig(**kwargs)
    if cfg.model is not None:
        if not isinstance(cfg.model, str):
            raise ConfigError("type", "model must be a path string")
        p = Path(cfg.model)
        if not p.is_absolute() and base_dir is not None:
            p = Path(base_dir) / p
        p = p.resolve()
        if not p.is_file():
            raise ConfigError("io", f"model file not found: {p}")
        cfg.model = str(p)
    _check_ranges(cfg)
    return cfg


def load_model(path: str | Path) -> ModelSpec:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("parse", f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    try:
        spec = model_from_dict(data)
    except (ValueError, TypeError) as exc:
        raise ConfigError("model", f"{path}: {exc}") from None
    report = validate(spec)
    if not report.ok:
        raise ConfigError("model", f"{path}: " + "; ".join(report.violations))
    return spec


# --- pipelines ------------------------------------------------------------------

def _initial_classical(spec: ModelSpec, sec: SimulateSection, grid: GridSpec | None) -> ClassicalState:
    n, L = spec.n_particles, spec.domain_length
    if sec.positions is None:
        if grid is not None:
            positions = [grid.center(i * grid.cells // n) for i in range(n)]
        else:
            positions = [(i + 0.5) * L / n for i in range(n)]
    else:
        positions = [float(x) for x in sec.positions]
    spins = [1] * n if sec.spins is None else [int(s) for s in sec.spins]
    if len(positions) != n or len(spins) != n:
        raise ConfigError("range", f"initial state needs {n} positions and spins")
    if any(s not in (-1, 1) for s in spins):
        raise ConfigError("range", "spins must be +1 or -1")
    return ClassicalState.at(positions, spins, 0.0, L)


def _snap(spec: ModelSpec, grid: GridSpec) -> ModelSpec:
    try:
        snapped, moves = snap_to_grid(spec, grid)
    except SnapError as exc:
        raise ConfigError("model", str(exc)) from None
    for m in moves:
        logger.info("snapped %s point %s to %r", m.kind, tuple(m.point), m.snapped_to)
    return snapped


def run_simulate(cfg: RunConfig, spec: ModelSpec, out: Path) -> dict:
    sec = cfg.simulate
    if sec.steps is not None:
        grid = GridSpec(cfg.grid.cells, spec.domain_length)
        spec = _snap(spec, grid)
        state = _initial_classical(spec, sec, grid)
        try:
            traj = simulate_discrete(state, spec, grid, sec.steps)
        except ValueError as exc:
            raise ConfigError("range", str(exc)) from None
    else:
        state = _initial_classical(spec, sec, None)
        t_final = spec.domain_length if sec.t_final is None else sec.t_final
        traj = simulate(state, spec, t_final)
    write_trajectory(out / "trajectory.csv", traj)
    return {"events": len(traj.events), "final_time": traj.final.time,
            "final_positions": list(traj.final.positions), "final_spins": list(traj.final.spins)}


def run_ensemble(cfg: RunConfig, spec: ModelSpec, out: Path) -> dict:
    sec = cfg.ensemble
    try:
        ens = EnsembleSpec(sec.samples, cfg.seed, sec.ranges, sec.p_plus)
        Q, S = sample_arrays(spec, ens)
    except ValueError as exc:
        raise ConfigError("range", str(exc)) from None
    L = spec.domain_length
    h0 = histogram(Q, S, L, sec.bins)
    Qt, St, _ = propagate(spec, Q, S, sec.t, threads=cfg.threads)
    ht = histogram(Qt, St, L, sec.bins)
    write_histogram(out / "histogram.csv", ht)
    res = {"samples": sec.samples, "t": sec.t, "mass": ht.mass().tolist(),
           "translation_distance": (total_variation(ht, translate_histogram(h0, sec.t, L))
                                    if spec.is_free else None)}
    if sec.density_window is not None:
        pts = sorted({(p.crosser, p.position) for _, p in spec.tagged_points()})
        res["point_density"] = [
            {"crosser": j, "position": x,
             "density": point_density(spec, ens, x, j, sec.density_window, threads=cfg.threads)}
            for j, x in pts
        ]
    return res


def run_quantum(cfg: RunConfig, spec: ModelSpec, out: Path) -> dict:
    sec = cfg.quantum
    n = spec.n_particles
    if n > 3:
        raise ConfigError("limit", "dense quantum evolution supports at most 3 particles")
    grid = GridSpec(cfg.grid.cells, spec.domain_length)
    if grid.cells ** n * 2 ** n > 64 ** 3 * 8:
        raise ConfigError("limit", "grid too large for dense evolution (cap G <= 64 at N = 3)")
    spec = _snap(spec, grid)
    cells = [i * grid.cells // n for i in range(n)] if sec.cells is None else [int(c) for c in sec.cells]
    spins = [1] * n if sec.spins is None else [int(s) for s in sec.spins]
    if len(cells) != n or len(spins) != n or any(s not in (-1, 1) for s in spins):
        raise ConfigError("range", f"quantum initial state needs {n} cells and +-1 spins")
    superpose = {int(i) for i in sec.superpose}
    if not superpose <= set(range(1, n + 1)):
        raise ConfigError("range", "quantum.superpose holds 1-based particle indices")
    vecs = []
    for i, s in enumerate(spins, start=1):
        if i in superpose:
            vecs.append(np.array([1.0, 1.0]) / math.sqrt(2.0))
        else:
            vecs.append(np.array([1.0, 0.0]) if s > 0 else np.array([0.0, 1.0]))
    psi = WaveFunction.product(grid, cells, vecs)
    stepper = Stepper(spec, grid, sec.limit_kicks)
    final, norms = psi, []
    for _ in range(sec.steps):
        final = stepper.step(final)
        norms.append(final.norm2())
    write_wavefunction(out / "wavefunction.csv", final, sec.snapshot_threshold)
    res = {"steps": sec.steps, "norm_history": norms,
           "final_norm": norms[-1] if norms else 1.0}
    if not superpose and sec.limit_kicks:
        state = ClassicalState(0.0, tuple(grid.center(c) for c in cells), tuple(spins))
        rep = classical_correspondence(spec, grid, state, sec.steps)
        res["correspondence"] = {"ok": rep.ok, "first_disagreement": rep.first_disagreement}
    return res


def _summary_spectrum(spectrum, threshold) -> dict:
    cls = classify(spectrum, threshold)
    return {"points": len(spectrum), "physical": len(cls.physical), "decaying": len(cls.decaying),
            "max_abs_im_physical": cls.max_im_physical, "min_abs_im_decaying": cls.min_im_decaying}


def run_hf(cfg: RunConfig, spec: ModelSpec, out: Path) -> dict:
    grid = GridSpec(cfg.grid.cells, spec.domain_length)
    if 2 * grid.cells > 1024:
        raise ConfigError("limit", "grid too large for dense one-particle eigensolves")
    spec = _snap(spec, grid)
    sc = cfg.scf
    if sc.init == "uniform":
        init = [SingleParticleState.uniform(grid) for _ in range(spec.n_particles)]
    else:
        gen = np.random.Generator(np.random.Philox(key=cfg.seed))
        init = [SingleParticleState.random(grid, gen) for _ in range(spec.n_particles)]
    scfcfg = SCFConfig(sc.damping, sc.tol, sc.max_iters, sc.threshold, cfg.grid.derivative)
    try:
        res = scf_solve(spec, grid, init, scfcfg)
    except EigensolverError as exc:
        raise ConfigError("engine", str(exc)) from None
    write_scf_log(out / "scf_log.csv", res.log)
    write_spectrum(out / "spectrum.csv", res.spectrum)
    f = res.fields
    return {"converged": res.converged, "iterations": res.iterations,
            "final_change": res.log[-1].max_change,
            "fields": {"C": f.C, "A": f.A, "B": f.B, "V": f.V, "W": f.W},
            "spectrum": _summary_spectrum(res.spectrum, sc.threshold)}


def run_spectrum(cfg: RunConfig, spec: ModelSpec | None, out: Path) -> dict:
    sp = cfg.spectrum
    L = sp.domain_length if sp.domain_length is not None else spec.domain_length
    momenta = range(-sp.n_max, sp.n_max + 1)
    if sp.C is not None:
        params = [(1, sp.C, sp.A, sp.B)]
    else:
        # constants from uniform single-particle densities
        grid = GridSpec(cfg.grid.cells, spec.domain_length)
        snapped = _snap(spec, grid)
        states = [SingleParticleState.uniform(grid) for _ in range(spec.n_particles)]
        C, A, B = coefficients(states, snapped)
        params = [(i + 1, C[i], A[i], B[i]) for i in range(spec.n_particles)]
    spectrum = []
    try:
        for particle, C, A, B in params:
            spectrum += closed_form_spectrum(float(C), float(A), float(B), sp.V, sp.W, momenta=momenta,
                                             domain_length=L, threshold=cfg.scf.threshold,
                                             particle=particle)
    except BranchDegeneracyError as exc:
        raise ConfigError("engine", str(exc)) from None
    write_spectrum(out / "spectrum.csv", spectrum)
    return {"constants": [{"particle": p, "C": C, "A": A, "B": B} for p, C, A, B in params],
            "spectrum": _summary_spectrum(spectrum, cfg.scf.threshold)}


RUNNERS = {"simulate": run_simulate, "ensemble": run_ensemble, "quantum": run_quantum,
           "hf": run_hf, "spectrum": run_spectrum}


def output_dir(cfg: RunConfig) -> Path:
    return Path(cfg.out or os.environ.get("DETQ_OUT") or "detq_out")


def run(cfg: RunConfig) -> int:
    """Execute one subcommand and write its artifacts; returns the exit status."""
    out = output_dir(cfg)
    try:
        spec = load_model(cfg.model) if cfg.model is not None else None
        out.mkdir(parents=True, exist_ok=True)
        results = RUNNERS[cfg.subcommand](cfg, spec, out)
    except ConfigError as exc:
        return _fail(exc.category, str(exc))
    except OSError as exc:
        return _fail("io", str(exc))
    write_json(out / "summary.json", {"subcommand": cfg.subcommand, "version": __version__,
                                      "config": cfg.resolved(), "results": results})
    return 0


def _fail(category: str, message: str) -> int:
    print(json.dumps({"error": category, "message": message}), file=sys.stderr)
    return EXIT.get(category, 1)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="detq", description=__doc__.splitlines()[0])
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", required=True, help="JSON run config")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--seed", type=int, help="overrides the config seed")
    ap.add_argument("--threads", type=int, help="worker threads (results do not depend on it)")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        path = Path(args.config)
        text = path.read_text()
    except OSError as exc:
        return _fail("io", str(exc))
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        data = None
    if isinstance(data, dict):
        for key in ("seed", "threads", "out"):
            val = getattr(args, key)
            if val is not None:
                data[key] = val
        text = json.dumps(data)
    try:
        cfg = parse_config(text, base_dir=path.parent, subcommand=args.subcommand)
    except ConfigError as exc:
        return _fail(exc.category, str(exc))
    except TypeError as exc:
        return _fail("type", str(exc))
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
