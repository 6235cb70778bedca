import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from snlab.dynamics import HamiltonianSpec, StepControl, step_sne
from snlab.errors import GridMismatch, WeightSumViolation
from snlab.hilbert import BranchEnsemble, Grid, Mode, make_gaussian, trace_distance
from snlab.moments import GaussianMomentState
from snlab.optomeasure import LightSpec
from snlab.statistics import (
    AcausalityScenario,
    DynamicalMap,
    MapKind,
    acausality_oracle,
    acausality_signal,
    apply_map,
    linearity_defect,
    linearity_defect_oracle,
    mix,
)

GRID = Grid(2048, -20.0, 20.0)
SMALL = Grid(512, -16.0, 16.0)
H = HamiltonianSpec(1.0, 1.0, 0.3)


def test_mix_examples():
    a = make_gaussian(GRID, -1.0, 0.0, 0.8)
    b = make_gaussian(GRID, 1.0, 0.0, 0.8)
    assert trace_distance(mix(a, b, 1.0, 0.0), a) < 1e-12
    assert trace_distance(mix(a, a, 0.3, 0.7), a) < 1e-12
    e = mix(a, b, 0.25, 0.75)
    assert e.mode is Mode.INDEPENDENT and e.weights.tolist() == [0.25, 0.75]
    with pytest.raises(WeightSumViolation):
        mix(a, b, 0.5, 0.6)
    with pytest.raises(GridMismatch):
        mix(a, make_gaussian(Grid(2048, -21.0, 21.0), 0.0, 0.0, 1.0), 0.5, 0.5)


def test_zero_duration_map_is_identity():
    psi = make_gaussian(GRID, 0.5, 0.5, 0.9)
    for kind in MapKind:
        out = apply_map(DynamicalMap(kind, H, StepControl(0.002), 0.0), psi)
        assert np.array_equal(out.states[0].amplitudes, psi.amplitudes)
    with pytest.raises(ValueError):
        DynamicalMap(MapKind.SNE, H, StepControl(0.002), -1.0)


def test_sne_map_on_pure_state_composes_steps():
    psi = make_gaussian(GRID, 0.5, 0.5, 0.9)
    c = StepControl(0.002)
    out = apply_map(DynamicalMap(MapKind.SNE, H, c, 10 * c.dt), psi)
    ref = psi
    for _ in range(10):
        ref = step_sne(ref, H, c)
    assert np.max(np.abs(out.states[0].amplitudes - ref.amplitudes)) <= 1e-13


def test_apply_map_keeps_mode():
    e = BranchEnsemble(((0.5, make_gaussian(GRID, -1.0, 0.0, 0.8)),
                        (0.5, make_gaussian(GRID, 1.0, 0.0, 0.8))), Mode.INDEPENDENT)
    out = apply_map(DynamicalMap(MapKind.SNE, H, StepControl(0.002), 0.1), e)
    assert out.mode is Mode.INDEPENDENT


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_linear_map_has_no_defect(seed):
    rng = np.random.default_rng(seed)
    psis = [make_gaussian(SMALL, rng.uniform(-3, 3), rng.uniform(-1, 1), rng.uniform(0.5, 1.5))
            for _ in range(2)]
    w1 = rng.uniform()
    m = DynamicalMap(MapKind.LINEAR, H, StepControl(0.005), 0.5)
    assert linearity_defect(m, *psis, w1, 1 - w1) <= 1e-9


@pytest.fixture(scope="module")
def sne_case():
    m = DynamicalMap(MapKind.SNE, H, StepControl(0.002), np.pi)
    a = make_gaussian(GRID, -1.0, 0.0, 1 / np.sqrt(2))
    b = make_gaussian(GRID, 1.0, 0.0, 1 / np.sqrt(2))
    return m, a, b


def test_sne_defect_matches_oracle(sne_case):
    m, a, b = sne_case
    d = linearity_defect(m, a, b, 0.5, 0.5)
    g1 = GaussianMomentState.coherent(-1.0, 0.0, 1 / np.sqrt(2))
    g2 = GaussianMomentState.coherent(1.0, 0.0, 1 / np.sqrt(2))
    ref = linearity_defect_oracle(m, g1, g2, 0.5, 0.5)
    assert d > 1e-3
    assert d == pytest.approx(ref, rel=0.05)


def test_defect_is_swap_symmetric(sne_case):
    m, a, b = sne_case
    m = DynamicalMap(m.kind, m.h, m.c, 0.5)
    assert abs(linearity_defect(m, a, b, 0.3, 0.7) - linearity_defect(m, b, a, 0.7, 0.3)) <= 1e-12


def test_identical_inputs_warn(sne_case):
    m, a, _ = sne_case
    m = DynamicalMap(m.kind, m.h, m.c, 0.5)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        assert linearity_defect(m, a, a, 0.5, 0.5) <= 1e-10
    assert any("identical" in str(w.message) for w in caught)


def scenario(omega_g=0.2, lam=1.0, dim=2, t_final=2.0, grid=SMALL, dt=0.005):
    return AcausalityScenario(grid, LightSpec.uniform(dim, lam), HamiltonianSpec(1.0, 1.0, omega_g),
                              StepControl(dt), t_final, 0.25)


def test_signal_vanishes_at_start():
    sig = acausality_signal(scenario())
    assert sig.trace_distance[0] <= 1e-12
    assert sig.max_trace_distance() > 1e-4
    assert len(sig.times) == len(sig.undetected) == len(sig.detected)


@pytest.mark.parametrize("kw", [{"omega_g": 0.0}, {"lam": 0.0}, {"dim": 1}])
def test_switch_offs(kw):
    s = scenario(**kw)
    assert s.switched_off
    assert acausality_signal(s).max_trace_distance() <= 1e-9


def test_signal_grows_with_self_gravity():
    peaks = [acausality_signal(scenario(omega_g=w)).trace_distance[-1] for w in (0.0, 0.05, 0.1, 0.2)]
    assert np.all(np.diff(peaks) > 0)


def test_signal_matches_oracle_on_coarse_setup():
    s = scenario(t_final=np.pi / np.hypot(1, 0.2))
    sig, ref = acausality_signal(s), acausality_oracle(s)
    assert np.allclose(sig.times, ref.times)
    mask = ref.trace_distance >= 1e-6
    assert np.allclose(sig.trace_distance[mask], ref.trace_distance[mask], rtol=0.05)


def test_detected_arm_branches_ignore_each_other():
    sig = acausality_signal(scenario(omega_g=0.3, t_final=np.pi))
    # each detected branch moves in the bare trap; its own mean drops out
    ref = acausality_oracle(scenario(omega_g=0.0, t_final=np.pi))
    for m, g in zip(sig.moments["detected"], ref.detected):
        assert m["mean_x"] == pytest.approx(g.mean_x, abs=1e-5)
