import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linear_sum_assignment

from detq.hartree_fock import (BranchDegeneracyError, MeanFields, SCFConfig, SingleParticleState,
                               classify, closed_form_energies, closed_form_spectrum, coefficients,
                               derivative_matrix, grid_hamiltonian, grid_hamiltonian_spectrum,
                               grid_momenta, mean_fields, potentials, scf_iteration, scf_solve,
                               spike_weight)
from detq.model import GridSpec, ModelSpec

from oracles import dense_block_eigs

L = 10.0
GRID = GridSpec(20, L)
RING = ModelSpec(2, L, flip_points=[(1, 2, 1.25), (1, 2, 3.75), (1, 2, 6.25),
                                    (2, 1, 2.5), (2, 1, 5.0), (2, 1, 8.75)], alpha=0.05, beta=0.05)
SYMMETRIC = ModelSpec(2, L, flip_points=[(1, 2, 2.5), (2, 1, 5.0)],
                      set_plus_points=[(1, 2, 1.25), (2, 1, 3.75)],
                      set_minus_points=[(1, 2, 6.25), (2, 1, 8.75)], alpha=0.05, beta=0.05)


def uniform_states(n, grid=GRID, spin=(1.0, 1.0)):
    return [SingleParticleState.uniform(grid, spin) for _ in range(n)]


def match_error(a, b):
    """Largest distance after optimally pairing two multisets of complex numbers."""
    a, b = np.asarray(a), np.asarray(b)
    assert len(a) == len(b)
    cost = np.abs(a[:, None] - b[None, :])
    r, c = linear_sum_assignment(cost)
    return cost[r, c].max()


# --- coefficients and potentials -----------------------------------------------

def test_uniform_density_one_flip_point():
    spec = ModelSpec(2, L, flip_points=[(1, 2, 2.5)])
    C, A, B = coefficients(uniform_states(2), spec)
    assert C[0] == pytest.approx(math.pi / 20, abs=1e-15)
    assert C[1] == 0.0 and (A == 0).all() and (B == 0).all()


def test_density_at_boundary_averages_neighbours():
    amps = np.zeros((20, 2))
    amps[4, 0] = 1.0
    st_ = SingleParticleState(GRID, amps)
    assert st_.density_at(2.0) == pytest.approx(0.5 / 0.5)
    assert st_.density_at(2.5) == pytest.approx(0.5 / 0.5)
    assert st_.density_at(3.0) == 0.0


def test_no_points_zero_fields():
    f = mean_fields(uniform_states(3), ModelSpec(3, L))
    assert (f.C == 0).all() and (f.A == 0).all() and (f.B == 0).all()
    assert f.V == [[], [], []] and f.W == [[], [], []]


def test_doubling_points_doubles_everything():
    rng = np.random.default_rng(0)
    states = [SingleParticleState.random(GRID, rng) for _ in range(2)]
    twice = ModelSpec(2, L, RING.flip_points * 2, SYMMETRIC.set_plus_points * 2,
                      SYMMETRIC.set_minus_points * 2, alpha=0.3, beta=0.7)
    once = ModelSpec(2, L, RING.flip_points, SYMMETRIC.set_plus_points, SYMMETRIC.set_minus_points,
                     alpha=0.3, beta=0.7)
    f1, f2 = mean_fields(states, once), mean_fields(states, twice)
    for a, b in ((f1.C, f2.C), (f1.A, f2.A), (f1.B, f2.B)):
        assert np.array_equal(2 * a, b)
    for a, b in ((f1.V, f2.V), (f1.W, f2.W)):
        for la, lb in zip(a, b):
            assert [(x, 2 * w) for x, w in la] == lb


def test_equal_superposition_spin_gives_no_spikes():
    V, W = potentials(uniform_states(2), SYMMETRIC)
    for lst in V + W:
        assert all(w == 0.0 for _, w in lst)
    assert len(V[0]) == 3  # spikes at the crosser's points only


def test_spin_up_flip_spike():
    st_ = SingleParticleState.uniform(GRID, (1.0, 0.0))
    assert spike_weight("flip", st_, RING) == pytest.approx(-math.pi / 2)


@pytest.mark.parametrize("kind", ["flip", "set_plus", "set_minus"])
def test_spike_weight_matches_direct_expectation(kind):
    rng = np.random.default_rng(4)
    st_ = SingleParticleState.random(GRID, rng)
    s1 = np.array([[0, 1], [1, 0]])
    s2 = np.array([[0, -1j], [1j, 0]])
    s3 = np.diag([1, -1])
    I = np.eye(2)
    op = {"flip": 0.5 * math.pi * (s1 - I),
          "set_plus": RING.alpha * (-s2 + 1j * (s1 + s3 - I)),
          "set_minus": RING.beta * (s2 + 1j * (s1 - s3 - I))}[kind]
    psi = st_.amplitudes
    direct = np.einsum("ks,st,kt->", psi.conj(), op, psi)
    assert abs(spike_weight(kind, st_, RING) - direct) < 1e-14


def test_fields_nonnegative_for_random_states():
    rng = np.random.default_rng(1)
    for _ in range(20):
        states = [SingleParticleState.random(GRID, rng) for _ in range(2)]
        C, A, B = coefficients(states, SYMMETRIC)
        assert (C >= 0).all() and (A >= 0).all() and (B >= 0).all()


def test_wrong_state_count():
    with pytest.raises(ValueError):
        coefficients(uniform_states(1), RING)


# --- closed-form spectrum ------------------------------------------------------

def test_closed_form_examples():
    assert closed_form_energies(1, 0, 0, 0) == (0, -2)
    ep, em = closed_form_energies(1, 0.01, 0.01, 0)
    assert ep == 0
    assert em == pytest.approx(-2 - 0.04j, abs=1e-15)
    ep, _ = closed_form_energies(1, 0, 0, 0.1)
    assert ep == pytest.approx(math.sqrt(1.01) - 1, abs=1e-15)
    assert ep == pytest.approx(0.0049876, abs=1e-7)


def test_closed_form_matches_block_oracle():
    rng = np.random.default_rng(12)
    for _ in range(1000):
        C, A, B = rng.uniform(0, 3), rng.uniform(0, 1), rng.uniform(0, 1)
        p, V, W = rng.uniform(-5, 5), rng.uniform(-1, 1), rng.uniform(-1, 1)
        assert match_error(closed_form_energies(C, A, B, p, V, W), dense_block_eigs(C, A, B, p, V, W)) < 1e-12


@settings(max_examples=200, deadline=None)
@given(C=st.floats(0.1, 5), p=st.floats(-0.5, 0.5))
def test_small_momentum_bound(C, p):
    p = p * C  # |p| <= C/2
    ep, _ = closed_form_energies(C, 0, 0, p)
    assert ep == -C + cmath.sqrt(C * C + p * p)
    assert abs(ep - p * p / (2 * C)) <= p ** 4 / (8 * C ** 3) * 1.01 + 1e-15


def test_branch_degeneracy_raises():
    # C=0, A=B: g = 2iA, radicand = -4A^2 + p^2 vanishes at p = 2A
    A = 0.25
    with pytest.raises(BranchDegeneracyError):
        closed_form_energies(0.0, A, A, 2 * A)
    with pytest.raises(BranchDegeneracyError, match="n=1"):
        closed_form_spectrum(0.0, A, A, momenta=[0, 1], domain_length=4 * math.pi)


@pytest.mark.parametrize("A", [1e-3, 1e-2])
@pytest.mark.parametrize("C", [0.5, 1.0, 2.0])
def test_branch_gap(A, C):
    spec = closed_form_spectrum(C, A, A, momenta=range(-32, 33), domain_length=L)
    plus = [sp.energy for sp in spec if sp.branch == "+"]
    minus = [sp.energy for sp in spec if sp.branch == "-"]
    for ep, em in zip(plus, minus):
        assert abs(ep.imag) < abs(em.imag)
        assert em.imag <= -(2 * A)


def test_spectrum_rows_and_classification():
    spec = closed_form_spectrum(1.0, 0.01, 0.01, momenta=[0], domain_length=L, threshold=0.01)
    assert [(sp.n, sp.branch, sp.classification) for sp in spec] == [(0, "+", "physical"), (0, "-", "decaying")]


def test_classify():
    spec = closed_form_spectrum(1.0, 0.01, 0.01, momenta=[0, 1, 2], domain_length=L)
    cls = classify(spec, 0.01)
    assert {sp.branch for sp in cls.physical} == {"+"}
    assert {sp.branch for sp in cls.decaying} == {"-"}
    assert cls.max_im_physical < cls.min_im_decaying
    real = closed_form_spectrum(1.0, 0, 0, momenta=range(5), domain_length=L)
    assert len(classify(real, 1e-300).physical) == 10
    assert len(classify(real, 0.0).physical) == 10
    assert len(classify(spec, 0.0).physical) == 1  # only the exactly-real E+ at n=0


# --- grid Hamiltonian -----------------------------------------------------------

def test_spectral_derivative_on_plane_waves():
    grid = GridSpec(16, 3.0)
    D = derivative_matrix(grid)
    x = np.arange(16) * grid.spacing
    for n in grid_momenta(grid):
        p = 2 * math.pi * n / 3.0
        wave = np.exp(1j * p * x)
        assert np.abs(D @ wave - p * wave).max() < 1e-12


@pytest.mark.parametrize("C,A,B", [(1.0, 0.0, 0.0), (0.7, 0.01, 0.02), (2.0, 1e-3, 1e-3), (0.5, 0.3, 0.1)])
def test_grid_matches_closed_form(C, A, B):
    grid = GridSpec(32, L)
    numeric = [sp.energy for sp in grid_hamiltonian_spectrum(C, A, B, [], grid)]
    closed = [sp.energy for sp in closed_form_spectrum(C, A, B, momenta=grid_momenta(grid), domain_length=L)]
    assert match_error(numeric, closed) < 1e-10


def test_grid_labels_momenta_and_branches():
    grid = GridSpec(16, L)
    numeric = grid_hamiltonian_spectrum(1.0, 1e-3, 1e-3, [], grid)
    closed = closed_form_spectrum(1.0, 1e-3, 1e-3, momenta=grid_momenta(grid), domain_length=L)
    key = lambda sp: (sp.n, sp.branch)
    for a, b in zip(sorted(numeric, key=key), sorted(closed, key=key)):
        assert key(a) == key(b)
        assert abs(a.energy - b.energy) < 1e-10


def test_zero_fields_translation_spectrum():
    grid = GridSpec(16, L)
    vals = [sp.energy for sp in grid_hamiltonian_spectrum(0, 0, 0, [], grid)]
    p = 2 * math.pi * grid_momenta(grid) / L
    assert match_error(vals, np.concatenate([p, -p])) < 1e-10


def test_central_difference_second_order():
    errs = []
    for G in (16, 32, 64):
        grid = GridSpec(G, L)
        vals = [sp.energy for sp in grid_hamiltonian_spectrum(1.0, 0, 0, [], grid, derivative="central")]
        ep, _ = closed_form_energies(1.0, 0, 0, 2 * math.pi / L)
        errs.append(min(abs(v - ep) for v in vals))
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4, rel=0.05)


def test_spikes_enter_diagonal():
    grid = GridSpec(8, 4.0)
    H0 = grid_hamiltonian(0.3, 0.01, 0.02, [], grid)
    H1 = grid_hamiltonian(0.3, 0.01, 0.02, [(2.0, 0.4 - 0.2j)], grid)
    d = np.diag(H1 - H0)
    w = (0.4 - 0.2j) / (2 * grid.spacing)
    assert np.allclose(d.reshape(8, 2), [[0, 0]] * 3 + [[w, w]] * 2 + [[0, 0]] * 3, atol=0)


def test_spiked_grid_against_independent_assembly():
    grid = GridSpec(12, 6.0)
    C, A, B = 0.8, 0.01, 0.02
    spikes = [(1.5, -0.3 + 0.05j), (4.0, 0.2)]
    s1 = np.array([[0, 1], [1, 0]])
    s2 = np.array([[0, -1j], [1j, 0]])
    s3 = np.diag([1, -1])
    H = np.zeros((24, 24), dtype=complex)
    D = derivative_matrix(grid)
    g = C + 1j * (A + B)
    for a in range(12):
        for b in range(12):
            H[2 * a:2 * a + 2, 2 * b:2 * b + 2] += D[a, b] * s3
        H[2 * a:2 * a + 2, 2 * a:2 * a + 2] += g * s1 + (B - A) * s2 + 1j * (A - B) * s3 - g * np.eye(2)
    for x, w in spikes:
        k = int(round(x / grid.spacing))
        for c in (k - 1, k):
            H[2 * c, 2 * c] += w / (2 * grid.spacing)
            H[2 * c + 1, 2 * c + 1] += w / (2 * grid.spacing)
    got = [sp.energy for sp in grid_hamiltonian_spectrum(C, A, B, spikes, grid)]
    assert match_error(got, np.linalg.eigvals(H)) < 1e-10


def test_grid_too_large():
    with pytest.raises(ValueError):
        grid_hamiltonian_spectrum(1, 0, 0, [], GridSpec(513, 1.0))


# --- self-consistency -----------------------------------------------------------

def test_scf_no_points_one_iteration():
    grid = GridSpec(16, L)
    res = scf_solve(ModelSpec(2, L), grid, uniform_states(2, grid))
    assert res.converged and res.iterations == 1
    assert (res.fields.C == 0).all() and res.fields.V == [[], []]


def test_scf_ring_converges_and_recomputes():
    grid = GridSpec(32, L)
    rng = np.random.Generator(np.random.Philox(key=3))
    init = [SingleParticleState.random(grid, rng) for _ in range(2)]
    cfg = SCFConfig(damping=0.5, tol=1e-8, max_iters=500)
    res = scf_solve(RING, grid, init, cfg)
    assert res.converged and res.iterations <= 500
    assert res.log[-1].max_change < cfg.tol
    again = mean_fields(res.states, RING)
    assert res.fields.max_change(again) == 0.0
    _, fields, _ = scf_iteration(res.states, res.fields, RING, cfg)
    assert res.fields.max_change(fields) <= 10 * cfg.tol


def test_scf_symmetric_has_no_spikes():
    grid = GridSpec(32, L)
    res = scf_solve(SYMMETRIC, grid, uniform_states(2, grid))
    assert res.converged
    assert np.allclose(res.fields.A, res.fields.B, atol=1e-15)
    for lst in res.fields.V + res.fields.W:
        assert all(abs(w) < 1e-12 for _, w in lst)


def test_scf_non_convergence_flagged():
    grid = GridSpec(32, L)
    rng = np.random.Generator(np.random.Philox(key=3))
    init = [SingleParticleState.random(grid, rng) for _ in range(2)]
    res = scf_solve(RING, grid, init, SCFConfig(max_iters=2))
    assert not res.converged and res.iterations == 2


def test_scf_config_validation():
    with pytest.raises(ValueError):
        SCFConfig(damping=1.5)
    with pytest.raises(ValueError):
        SCFConfig(tol=0)
    with pytest.raises(ValueError):
        SCFConfig(derivative="upwind")


def test_max_change_detects_spike_moves():
    a = MeanFields(np.zeros(1), np.zeros(1), np.zeros(1), [[(1.0, 0.5)]], [[(1.0, 0.0)]])
    b = MeanFields(np.zeros(1), np.zeros(1), np.zeros(1), [[(1.0, 0.5), (2.0, 0.25)]], [[(1.0, 0.0)]])
    assert a.max_change(b) == 0.25
    assert a.spikes(0) == [(1.0, 0.5 + 0j)]
