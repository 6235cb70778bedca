import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import pure_trace_distance_2x2, trace_distance_dense
from snlab.errors import BoundaryClipping, GridMismatch, GridTooCoarse, NormDrift, WeightSumViolation
from snlab.hilbert import (
    BranchEnsemble,
    Grid,
    GridState,
    Mode,
    ensemble_mean_x,
    expectation_p,
    expectation_x,
    inner,
    make_gaussian,
    purity,
    trace_distance,
    variance_x,
)

GRID = Grid(2048, -20.0, 20.0)
SMALL = Grid(256, -16.0, 16.0)


def superpose(grid, *states, coeffs=None):
    coeffs = coeffs or [1.0] * len(states)
    a = sum(c * s.amplitudes for c, s in zip(coeffs, states))
    a = a / np.sqrt(np.sum(np.abs(a) ** 2) * grid.dx)
    return GridState(grid, a)


def test_grid_requires_power_of_two():
    with pytest.raises(ValueError):
        Grid(1000, -1, 1)
    g = Grid(1024, -5, 5)
    assert g.dx == pytest.approx(10 / 1024)
    assert g.dk == pytest.approx(2 * np.pi / (1024 * g.dx))


def test_make_gaussian_basic():
    psi = make_gaussian(GRID, 0.0, 0.0, 1.0)
    assert psi.norm == pytest.approx(1.0, abs=1e-12)
    assert abs(expectation_x(psi)) < 1e-12


def test_make_gaussian_displaced_mean():
    assert expectation_x(make_gaussian(GRID, 2.0, 0.0, 1.0)) == pytest.approx(2.0, abs=1e-10)


def test_make_gaussian_momentum_matches_finite_difference():
    psi = make_gaussian(GRID, 0.0, 3.0, 1.0)
    assert expectation_p(psi) == pytest.approx(3.0, abs=1e-8)
    # independent route: central-difference derivative on the same grid, 4th order
    a, dx = psi.amplitudes, GRID.dx
    da = (-np.roll(a, -2) + 8 * np.roll(a, -1) - 8 * np.roll(a, 1) + np.roll(a, 2)) / (12 * dx)
    p_fd = np.real(np.sum(np.conj(a) * (-1j) * da) * dx)
    assert p_fd == pytest.approx(3.0, abs=1e-5)


def test_make_gaussian_variance():
    assert variance_x(make_gaussian(GRID, 0.0, 0.0, 1.0)) == pytest.approx(1.0, abs=1e-9)


def test_make_gaussian_errors():
    with pytest.raises(GridTooCoarse):
        make_gaussian(GRID, 0.0, 0.0, 3 * GRID.dx)
    with pytest.raises(BoundaryClipping):
        make_gaussian(GRID, 15.0, 0.0, 1.0)


def test_state_invariants_enforced():
    a = make_gaussian(GRID, 0.0, 0.0, 1.0).amplitudes
    with pytest.raises(NormDrift):
        GridState(GRID, 1.01 * a)
    flat = np.ones(GRID.n_points) / np.sqrt(GRID.n_points * GRID.dx)
    with pytest.raises(BoundaryClipping):
        GridState(GRID, flat)


def test_state_is_immutable():
    psi = make_gaussian(GRID, 0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        psi.amplitudes[0] = 1.0


def test_expectation_x_even_superposition():
    a = make_gaussian(GRID, -2.0, 0.0, 0.8)
    b = make_gaussian(GRID, 2.0, 0.0, 0.8)
    assert abs(expectation_x(superpose(GRID, a, b))) < 1e-10
    assert expectation_x(make_gaussian(GRID, 1.5, 0.0, 1.0)) == pytest.approx(1.5, abs=1e-10)


def test_momentum_kick_shifts_mean_momentum_exactly():
    psi = make_gaussian(GRID, 0.5, 0.3, 0.9)
    lam = 1.7
    kicked = GridState(GRID, psi.amplitudes * np.exp(1j * lam * GRID.x))
    assert expectation_p(kicked) - expectation_p(psi) == pytest.approx(lam, abs=1e-10)


def test_real_state_has_zero_momentum():
    psi = superpose(GRID, make_gaussian(GRID, -1.0, 0.0, 0.6), make_gaussian(GRID, 2.0, 0.0, 1.1))
    assert abs(expectation_p(psi)) < 1e-10


def test_ensemble_mean_examples():
    a = make_gaussian(GRID, 1.0, 0.0, 1.0)
    b = make_gaussian(GRID, 2.0, 0.0, 1.0)
    c = make_gaussian(GRID, -1.0, 0.0, 1.0)
    assert ensemble_mean_x(BranchEnsemble.from_state(a)) == pytest.approx(expectation_x(a), abs=1e-14)
    assert abs(ensemble_mean_x(BranchEnsemble(((0.5, a), (0.5, c))))) < 1e-12
    assert ensemble_mean_x(BranchEnsemble(((0.3, a), (0.7, b)))) == pytest.approx(1.7, abs=1e-10)


def test_ensemble_invariants():
    a = make_gaussian(GRID, 0.0, 0.0, 1.0)
    with pytest.raises(WeightSumViolation):
        BranchEnsemble(((0.5, a), (0.6, a)))
    with pytest.raises(WeightSumViolation):
        BranchEnsemble(((-0.5, a), (1.5, a)))
    other = make_gaussian(Grid(2048, -21.0, 21.0), 0.0, 0.0, 1.0)
    with pytest.raises(GridMismatch):
        BranchEnsemble(((0.5, a), (0.5, other)))
    assert BranchEnsemble(((1.0, a),), "independent").mode is Mode.INDEPENDENT


def test_ensemble_mean_matches_dense_density_matrix():
    a = make_gaussian(SMALL, 1.0, 0.4, 0.7)
    b = make_gaussian(SMALL, -0.5, -0.2, 1.0)
    e = BranchEnsemble(((0.35, a), (0.65, b)))
    rho = e.density_matrix() * SMALL.dx
    dense = np.real(np.trace(rho @ np.diag(SMALL.x)))
    assert ensemble_mean_x(e) == pytest.approx(dense, abs=1e-12)


def test_trace_distance_examples():
    a = make_gaussian(GRID, 0.0, 0.0, 1.0)
    assert trace_distance(a, a) < 1e-12
    far = make_gaussian(GRID, 10.0, 0.0, 0.5)
    near = make_gaussian(GRID, -10.0, 0.0, 0.5)
    assert trace_distance(far, near) == pytest.approx(1.0, abs=1e-10)
    # |<psi|phi>|^2 = 0.5 from a real superposition of two orthogonal packets
    phi = superpose(GRID, far, near)
    assert abs(inner(far, phi)) ** 2 == pytest.approx(0.5, abs=1e-12)
    expected = pure_trace_distance_2x2(far.amplitudes, phi.amplitudes, GRID.dx)
    assert expected == pytest.approx(np.sqrt(0.5), abs=1e-12)
    assert trace_distance(far, phi) == pytest.approx(expected, abs=1e-9)


def test_trace_distance_grid_mismatch():
    a = make_gaussian(GRID, 0.0, 0.0, 1.0)
    b = make_gaussian(Grid(2048, -21.0, 21.0), 0.0, 0.0, 1.0)
    with pytest.raises(GridMismatch):
        trace_distance(a, b)


def random_ensemble(rng, grid, k):
    w = rng.dirichlet(np.ones(k))
    states = [make_gaussian(grid, rng.uniform(-3, 3), rng.uniform(-2, 2), rng.uniform(0.5, 1.2))
              for _ in range(k)]
    return BranchEnsemble(tuple(zip(w, states)))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(1, 3), st.integers(1, 3))
def test_trace_distance_metric_properties(seed, ka, kb, kc):
    rng = np.random.default_rng(seed)
    a, b, c = (random_ensemble(rng, SMALL, k) for k in (ka, kb, kc))
    dab, dba = trace_distance(a, b), trace_distance(b, a)
    assert dab == pytest.approx(dba, abs=1e-9)
    assert dab <= trace_distance(a, c) + trace_distance(c, b) + 1e-9
    dense = trace_distance_dense(a.density_matrix() * SMALL.dx, b.density_matrix() * SMALL.dx)
    assert dab == pytest.approx(dense, abs=1e-9)
    assert trace_distance(a, a) < 1e-9


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_trace_distance_pure_formula(seed):
    rng = np.random.default_rng(seed)
    a = make_gaussian(GRID, rng.uniform(-3, 3), rng.uniform(-2, 2), rng.uniform(0.3, 1.5))
    b = make_gaussian(GRID, rng.uniform(-3, 3), rng.uniform(-2, 2), rng.uniform(0.3, 1.5))
    expected = np.sqrt(max(0.0, 1 - abs(inner(a, b)) ** 2))
    assert trace_distance(a, b) == pytest.approx(expected, abs=1e-9)


def test_trace_distance_zero_iff_same_operator():
    # the same density operator written with different branch decompositions
    a = make_gaussian(SMALL, -1.0, 0.0, 0.8)
    b = make_gaussian(SMALL, 1.5, 0.0, 0.8)
    e1 = BranchEnsemble(((0.5, a), (0.5, b)))
    e2 = BranchEnsemble(((0.25, a), (0.5, b), (0.25, a)))
    assert trace_distance(e1, e2) < 1e-12
    e3 = BranchEnsemble(((0.49, a), (0.51, b)))
    assert trace_distance(e1, e3) > 1e-3


def test_purity_of_mixture():
    a = make_gaussian(GRID, -8.0, 0.0, 0.8)
    b = make_gaussian(GRID, 8.0, 0.0, 0.8)
    assert purity(BranchEnsemble(((0.5, a), (0.5, b)))) == pytest.approx(0.5, abs=1e-12)
    assert purity(BranchEnsemble(((0.5, a), (0.5, a)))) == pytest.approx(1.0, abs=1e-12)
