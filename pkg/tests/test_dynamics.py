import math

import numpy as np
import numpy.testing as npt
import pytest

from darbouxosc.dynamics import (IntegratorConfig, integrate, integrate_many, orbit_diagnostics,
                                 sample_bound_states, step)
from darbouxosc.errors import ConvergenceError, DomainExitError, UnboundOrbitError
from darbouxosc.integrals import sample_generic_states
from darbouxosc.model import Kind, Parameters, PhaseState, evaluate_H
from darbouxosc.radial import canonical_Q, potential_minimum

FLAT = Parameters(0.0, 1.0, 2)
HYP2 = Parameters(0.02, 1.0, 2)
HYP3 = Parameters(0.02, 1.0, 3)


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(scheme="leapfrog")
    with pytest.raises(ValueError):
        IntegratorConfig(dt=0.0)
    with pytest.raises(ValueError):
        IntegratorConfig(max_fixed_point_iters=0)


@pytest.mark.parametrize("scheme,tol", [("implicit_midpoint", 1e-6), ("gauss4", 1e-12), ("rk_adaptive", 1e-8)])
def test_harmonic_closed_form(scheme, tol):
    s0 = PhaseState([1.0, 0.0], [0.0, 0.0])
    tr = integrate(FLAT, s0, 10.0, IntegratorConfig(scheme=scheme, dt=1e-3, output_stride=100))
    exact_q = np.cos(tr.times)
    exact_p = -np.sin(tr.times)
    err = np.maximum(np.abs(tr.q[:, 0] - exact_q), np.abs(tr.p[:, 0] - exact_p))
    # midpoint error grows linearly: 1e-6 per unit time
    assert np.all(err <= tol * np.maximum(1.0, tr.times))
    npt.assert_allclose(tr.q[:, 1], 0.0, atol=1e-15)


def test_gauss4_flat_trajectory_over_ten():
    s0 = PhaseState([1.0, 0.5], [-0.3, 0.8])
    tr = integrate(FLAT, s0, 10.0, IntegratorConfig(dt=1e-3))
    t = tr.times[:, None]
    exact = s0.q * np.cos(t) + s0.p * np.sin(t)
    assert np.max(np.abs(tr.q - exact)) <= 1e-6


def test_times_and_output_layout():
    tr = integrate(HYP2, PhaseState([1.0, 0.0], [0.0, 1.0]), 1.0, IntegratorConfig(dt=0.03, output_stride=4))
    assert tr.times[0] == 0.0 and tr.times[-1] == pytest.approx(1.0)
    assert np.all(np.diff(tr.times) > 0)
    assert tr.q.shape == (len(tr.times), 2)
    assert tr.manifold.tag is Kind.TYPE_I
    assert set(tr.drift_report) == {"H", "C^(2)", "I_11", "I_12", "I_22"}
    assert tr.final_state.q.shape == (2,)


@pytest.mark.parametrize("params", [HYP2, Parameters(-0.02, 1.0, 2)])
def test_circular_orbit(params):
    c = 100.0
    kind = "type_i" if params.lam > 0 else "type_ii"
    r_min, _ = potential_minimum(params, c, kind)
    s0 = PhaseState([r_min, 0.0], [0.0, math.sqrt(c) / r_min])
    tr = integrate(params, s0, 20.0, IntegratorConfig(dt=1e-3, output_stride=50))
    r = np.linalg.norm(tr.q, axis=1)
    assert np.max(np.abs(r - r_min)) <= 1e-9 * r_min


@pytest.mark.parametrize("scheme,tol", [("implicit_midpoint", 1e-12), ("gauss4", 1e-12)])
def test_reversibility(scheme, tol):
    cfg = IntegratorConfig(scheme=scheme, dt=0.05)
    for s in sample_generic_states(HYP3, "type_i", 20, np.random.default_rng(9)):
        fwd = step(HYP3, s, cfg)
        back = step(HYP3, PhaseState(fwd.q, -fwd.p), cfg)
        npt.assert_allclose(back.q, s.q, atol=tol * max(1, np.abs(s.q).max()))
        npt.assert_allclose(-back.p, s.p, atol=tol * max(1, np.abs(s.p).max()))


def test_negative_step_inverts():
    cfg = IntegratorConfig(scheme="implicit_midpoint", dt=0.05)
    s = PhaseState([1.0, 2.0, -0.5], [0.3, -0.4, 1.0])
    back = step(HYP3, step(HYP3, s, cfg), cfg, dt=-0.05)
    npt.assert_allclose(back.as_vector(), s.as_vector(), atol=1e-10)


def _energy_error(scheme, dt):
    s0 = PhaseState([2.0, 0.0, 0.5], [0.1, 1.2, 0.0])
    tr = integrate(HYP3, s0, 20.0, IntegratorConfig(scheme=scheme, dt=dt, output_stride=1, fixed_point_tol=1e-15,
                                                    max_fixed_point_iters=200))
    return np.max(np.abs(tr.energy - tr.energy[0]))


@pytest.mark.parametrize("scheme,order", [("implicit_midpoint", 2), ("gauss4", 4)])
def test_energy_error_order(scheme, order):
    e1 = _energy_error(scheme, 0.1)
    e2 = _energy_error(scheme, 0.05)
    assert e1 / e2 == pytest.approx(2.0**order, rel=0.15)


def test_energy_error_does_not_grow():
    s0 = PhaseState([2.0, 0.0, 0.5], [0.1, 1.2, 0.0])
    tr = integrate(HYP3, s0, 200.0, IntegratorConfig(scheme="implicit_midpoint", dt=0.05, output_stride=1))
    err = np.abs(tr.energy - tr.energy[0])
    half = len(err) // 2
    # bounded oscillation: the second half is no worse than the first
    assert err[half:].max() <= 1.05 * err[:half].max()


def test_long_run_drift_typei():
    s0 = sample_bound_states(HYP3, 1, np.random.default_rng(0))[0]
    tr = integrate(HYP3, s0, 100.0, IntegratorConfig(dt=1e-3, output_stride=1000))
    assert tr.drift_report["H"] <= 1e-10
    assert max(tr.drift_report.values()) <= 1e-8


@pytest.mark.parametrize("kind", ["type_ii", "type_iii"])
def test_integrals_conserved_negative_lambda(kind):
    params = Parameters(-0.02, 1.0, 3)
    states = sample_generic_states(params, kind, 4, np.random.default_rng(5),
                                   radius=(0.2 * params.r_c, 0.4 * params.r_c) if kind == "type_ii"
                                   else (2.0 * params.r_c, 3.0 * params.r_c))
    for tr in integrate_many(params, states, 5.0, IntegratorConfig(dt=1e-3, output_stride=100)):
        assert max(tr.drift_report.values()) <= 1e-8, tr.drift_report


def test_rk_adaptive_agrees_with_gauss4():
    s0 = PhaseState([2.0, 0.0, 0.5], [0.1, 1.2, 0.0])
    a = integrate(HYP3, s0, 5.0, IntegratorConfig(dt=1e-3, output_stride=500))
    b = integrate(HYP3, s0, 5.0, IntegratorConfig(scheme="rk_adaptive", dt=1e-3, output_stride=500))
    npt.assert_allclose(b.times, a.times, rtol=1e-12)
    npt.assert_allclose(b.q, a.q, atol=1e-8)


def _exit_time(delta_r=0.0):
    params = Parameters(-0.02, 0.0, 2)
    r_c = params.r_c
    # with omega = 0 the canonical momentum P is conserved and Q moves uniformly
    p_cap = 1.0 / math.sqrt(0.98)
    r_exit = r_c - 1e-9 * r_c
    return params, (canonical_Q(params, r_exit, "type_ii") - canonical_Q(params, 1.0, "type_ii")) / p_cap


@pytest.mark.parametrize("scheme", ["implicit_midpoint", "gauss4", "rk_adaptive"])
def test_domain_exit_time(scheme):
    params, t_exit = _exit_time()
    with pytest.raises(DomainExitError) as err:
        integrate(params, PhaseState([1.0, 0.0], [1.0, 0.0]), 10.0, IntegratorConfig(scheme=scheme, dt=1e-3))
    assert err.value.time == pytest.approx(t_exit, abs=2e-3)


def test_start_in_guard_band():
    params = Parameters(-0.02, 1.0, 2)
    with pytest.raises(DomainExitError) as err:
        integrate(params, PhaseState([params.r_c * (1 - 1e-12), 0.0], [0.0, 1.0]), 1.0)
    assert err.value.time == 0.0


def test_convergence_error():
    cfg = IntegratorConfig(dt=0.1, max_fixed_point_iters=1)
    with pytest.raises(ConvergenceError) as err:
        integrate(HYP3, PhaseState([2.0, 0.0, 0.5], [0.1, 1.2, 0.0]), 1.0, cfg)
    assert err.value.time == 0.0


def test_mixed_batch_rejected():
    params = Parameters(-0.02, 1.0, 2)
    with pytest.raises(ValueError):
        integrate_many(params, [PhaseState([1.0, 0.0], [0.0, 1.0]), PhaseState([10.0, 0.0], [0.0, 1.0])], 1.0)


def test_bound_sampler():
    for s in sample_bound_states(HYP3, 20, np.random.default_rng(1)):
        assert evaluate_H(HYP3, s) < HYP3.alpha


# ---------------------------------------------------------------- diagnostics

def test_diagnostics_harmonic():
    s0 = PhaseState([1.0, 0.0], [0.0, 0.5])
    tr = integrate(FLAT, s0, 20.0, IntegratorConfig(dt=1e-3, output_stride=10))
    d = orbit_diagnostics(tr)
    t_r, dphi, resid = d
    assert t_r == pytest.approx(math.pi, rel=1e-9)
    assert dphi == pytest.approx(math.pi, rel=1e-9)
    # one radial period maps q to -q; the orbit closes after two
    assert d.closure_k == 2
    assert resid <= 1e-8


def test_diagnostics_hyperbolic_closure():
    for s in sample_bound_states(HYP2, 2, np.random.default_rng(3)):
        tr = integrate(HYP2, s, 40.0, IntegratorConfig(dt=1e-3, output_stride=5))
        d = orbit_diagnostics(tr)
        assert d.closure_residual <= 1e-4
        assert d.closure_k is not None and d.closure_k <= 32
        assert d.angular_advance == pytest.approx(math.pi, rel=1e-6)


def test_diagnostics_circular_fallback():
    c = 100.0
    r_min, _ = potential_minimum(HYP2, c, "type_i")
    s0 = PhaseState([r_min, 0.0], [0.0, math.sqrt(c) / r_min])
    tr = integrate(HYP2, s0, 20.0, IntegratorConfig(dt=1e-3, output_stride=10))
    d = orbit_diagnostics(tr)
    assert d.circular
    assert math.isfinite(d.radial_period) and d.radial_period > 0
    # the angular advance per radial period of a nearly circular orbit is still pi
    assert d.angular_advance == pytest.approx(math.pi, rel=1e-4)


def test_diagnostics_unbound():
    tr = integrate(HYP2, PhaseState([1.0, 0.0], [0.3, 0.6]), 0.5, IntegratorConfig(dt=1e-3))
    with pytest.raises(UnboundOrbitError):
        orbit_diagnostics(tr)
