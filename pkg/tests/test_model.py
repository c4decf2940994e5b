import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from detq.model import (GridSpec, ModelSpec, Point, SnapError, model_from_dict, model_to_dict,
                        snap_to_grid, validate)
from detq.classical import ClassicalState, simulate, simulate_discrete


def test_valid_spec_passes():
    spec = ModelSpec(2, 10.0, flip_points=[(1, 2, 0.5)], alpha=2.0, beta=2.0)
    assert validate(spec).ok


def test_self_interaction_reported():
    spec = ModelSpec(2, 10.0, flip_points=[(1, 1, 0.5)])
    report = validate(spec)
    assert not report.ok
    assert any("self-interaction forbidden" in v for v in report.violations)


def test_contradictory_reset_reported():
    spec = ModelSpec(2, 10.0, set_plus_points=[(1, 2, 3.0)], set_minus_points=[(1, 2, 3.0)])
    assert any("contradictory reset" in v for v in validate(spec).violations)


@pytest.mark.parametrize("kw, fragment", [
    (dict(flip_points=[(1, 3, 0.5)]), "outside [1, 2]"),
    (dict(flip_points=[(1, 2, 10.0)]), "position outside"),
    (dict(flip_points=[(1, 2, -0.1)]), "position outside"),
    (dict(alpha=0.0), "alpha must be positive"),
    (dict(beta=-1.0), "beta must be positive"),
])
def test_other_violations(kw, fragment):
    spec = ModelSpec(2, 10.0, **kw)
    assert any(fragment in v for v in validate(spec).violations)


def test_violations_are_reported_not_raised():
    spec = ModelSpec(2, 10.0, flip_points=[(1, 1, 11.0)], alpha=-1)
    assert len(validate(spec).violations) == 3


def test_snap_on_boundary_unchanged():
    spec = ModelSpec(2, 10.0, flip_points=[(1, 2, 0.5)])
    snapped, moves = snap_to_grid(spec, GridSpec(20, 10.0))
    assert snapped.flip_points == (Point(1, 2, 0.5),)
    assert moves == []


def test_snap_moves_to_nearest_and_reports():
    spec = ModelSpec(2, 10.0, flip_points=[(1, 2, 0.49)])
    snapped, moves = snap_to_grid(spec, GridSpec(20, 10.0))
    assert snapped.flip_points == (Point(1, 2, 0.5),)
    assert len(moves) == 1 and moves[0].snapped_to == 0.5


def test_snap_wraps_near_domain_end():
    spec = ModelSpec(2, 10.0, flip_points=[(1, 2, 9.9)])
    snapped, _ = snap_to_grid(spec, GridSpec(20, 10.0))
    assert snapped.flip_points == (Point(1, 2, 0.0),)


def test_snap_deduplicates():
    spec = ModelSpec(2, 10.0, set_plus_points=[(1, 2, 0.49), (1, 2, 0.51)])
    snapped, moves = snap_to_grid(spec, GridSpec(20, 10.0))
    assert snapped.set_plus_points == (Point(1, 2, 0.5),)
    assert len(moves) == 2


def test_dedup_matches_fine_grid_composite_kick():
    # two resets straddling one boundary act as one composite kick: compare the
    # unsnapped continuous run against the snapped grid run
    spec = ModelSpec(2, 10.0, set_plus_points=[(1, 2, 0.49), (1, 2, 0.51)])
    grid = GridSpec(20, 10.0)
    snapped, _ = snap_to_grid(spec, grid)
    for s1 in (1, -1):
        state = ClassicalState(0.0, (2.25, 8.75), (s1, 1))
        cont = simulate(state, spec, 4.0).final
        disc = simulate_discrete(state, snapped, grid, 8).final
        assert cont.spins == disc.spins == (1, 1)


def test_snap_creating_contradiction_raises():
    spec = ModelSpec(2, 10.0, set_plus_points=[(1, 2, 0.49)], set_minus_points=[(1, 2, 0.51)])
    assert validate(spec).ok
    with pytest.raises(SnapError):
        snap_to_grid(spec, GridSpec(20, 10.0))


def test_grid_requires_two_cells():
    with pytest.raises(ValueError):
        GridSpec(1, 10.0)


def test_model_dict_round_trip():
    spec = ModelSpec(3, 8.0, flip_points=[(1, 2, 0.5)], set_plus_points=[(3, 1, 2.0)],
                     set_minus_points=[(2, 3, 4.0)], alpha=1.5, beta=0.5)
    assert model_from_dict(model_to_dict(spec)) == spec


def test_model_dict_rejects_unknown_key():
    with pytest.raises(ValueError, match="alpa"):
        model_from_dict({"n_particles": 2, "domain_length": 1.0, "alpa": 1})


points = st.tuples(st.integers(1, 3), st.integers(1, 3), st.floats(0, 7.999, allow_nan=False))


@settings(max_examples=150, deadline=None)
@given(flips=st.lists(points, max_size=6), plus=st.lists(points, max_size=4),
       minus=st.lists(points, max_size=4), cells=st.integers(2, 40))
def test_snap_idempotent_and_valid(flips, plus, minus, cells):
    spec = ModelSpec(3, 8.0, flip_points=[p for p in flips if p[0] != p[1]],
                     set_plus_points=[p for p in plus if p[0] != p[1]],
                     set_minus_points=[p for p in minus if p[0] != p[1]])
    if not validate(spec).ok:
        return
    grid = GridSpec(cells, 8.0)
    try:
        once, _ = snap_to_grid(spec, grid)
    except SnapError:
        return
    assert validate(once).ok
    twice, moves = snap_to_grid(once, grid)
    assert twice == once
    assert moves == []
