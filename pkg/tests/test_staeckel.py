import numpy as np
import numpy.testing as npt
import pytest

from darbouxosc.errors import DomainError, FlatLimitError
from darbouxosc.integrals import (angular_blocks, fd_gradient, fradkin_tensor, max_involution_residual, poisson_bracket,
                                  sample_generic_states)
from darbouxosc.model import Parameters, PhaseState, evaluate_H
from darbouxosc.staeckel import (NaturalHamiltonian, ScalarField, angular_symmetry, build_oscillator_instance,
                                 check_instance, momentum_symmetry, radial_quadratic, staeckel_transform,
                                 transform_symmetry)


def test_identity_transform(rng):
    h = NaturalHamiltonian(radial_quadratic(2.0, 0.3), radial_quadratic(0.0, 0.7))
    ht = staeckel_transform(h, ScalarField.constant(1.0))
    for _ in range(10):
        q, p = rng.normal(size=3), rng.normal(size=3)
        assert ht.value(q, p) == h.value(q, p)


def test_transform_of_free_motion(rng):
    lam, alpha = 0.02, 25.0
    h = NaturalHamiltonian(ScalarField.constant(2.0), ScalarField.constant(-alpha))
    u = radial_quadratic(1.0, lam)
    ht = staeckel_transform(h, u)
    for _ in range(10):
        q, p = rng.normal(size=3) * 3, rng.normal(size=3)
        uq = 1 + lam * q @ q
        assert ht.value(q, p) == pytest.approx((p @ p - 2 * alpha) / (2 * uq), rel=1e-14)
        assert ht.mu(q) == pytest.approx(2 * uq)
        assert ht.v(q) == pytest.approx(-alpha / uq)


def test_transform_rejects_nonpositive_u():
    u = radial_quadratic(1.0, -0.02)
    h = NaturalHamiltonian(ScalarField.constant(2.0), ScalarField.constant(1.0))
    ht = staeckel_transform(h, u)
    q, p = np.array([10.0, 0.0]), np.array([0.0, 1.0])
    with pytest.raises(DomainError):
        ht.value(q, p)
    with pytest.raises(DomainError):
        transform_symmetry(angular_symmetry(2, 2), ht, u).value(q, p)


def test_transported_symmetry_forms(rng):
    lam = 0.05
    inst = build_oscillator_instance(Parameters(lam, 1.0, 3))
    for _ in range(10):
        q, p = rng.normal(size=3), rng.normal(size=3)
        ht = inst.final.value(q, p)
        up, _ = angular_blocks(PhaseState(q, p))
        assert inst.transported["C^(3)"].value(q, p) == pytest.approx(up[1] + ht, rel=1e-13)
        expected = p[0] * p[2] - 2 * lam * q[0] * q[2] * ht + ht
        assert inst.transported["S_13"].value(q, p) == pytest.approx(expected, rel=1e-13)


def test_instance_data():
    inst = build_oscillator_instance(Parameters(0.02, 1.0, 3))
    assert inst.alpha == 25.0
    assert inst.intermediate.value(np.zeros(3), np.zeros(3)) == 1.0
    h_init, h_mid, h_fin, syms = inst
    assert h_fin is inst.final
    # 2 upper + 1 lower + 6 momentum products
    assert len(syms) == 9
    with pytest.raises(FlatLimitError):
        build_oscillator_instance(Parameters(0.0, 1.0, 3))


@pytest.mark.parametrize("lam,kind", [(0.02, "type_i"), (-0.02, "type_ii")])
def test_final_plus_alpha_is_model_energy(lam, kind, rng):
    params = Parameters(lam, 1.0, 3)
    inst = build_oscillator_instance(params)
    for s in sample_generic_states(params, kind, 50, rng):
        assert inst.final.value(s.q, s.p) + inst.alpha == pytest.approx(evaluate_H(params, s, kind),
                                                                        rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("lam,kind", [(0.02, "type_i"), (-0.02, "type_ii")])
def test_reconstruction_of_fradkin(lam, kind, rng):
    params = Parameters(lam, 1.0, 3)
    inst = build_oscillator_instance(params)
    for s in sample_generic_states(params, kind, 30, rng):
        ht = inst.final.value(s.q, s.p)
        fr = fradkin_tensor(params, s, kind)
        for i in range(3):
            for j in range(i, 3):
                assert inst.transported[f"S_{i + 1}{j + 1}"].value(s.q, s.p) - ht == pytest.approx(
                    fr[i, j], abs=1e-12)


def test_transported_gradients_match_fd(rng):
    params = Parameters(0.1, 1.0, 3)
    inst = build_oscillator_instance(params)
    for s in sample_generic_states(params, "type_i", 10, rng):
        for f in inst.transported.values():
            a = np.concatenate(f.gradient(s.q, s.p))
            b = np.concatenate(fd_gradient(f, s.q, s.p))
            npt.assert_allclose(a, b, rtol=1e-6, atol=1e-6 * max(1, np.abs(a).max()))


def test_symmetries_of_initial_and_intermediate(rng):
    n = 4
    h_free = NaturalHamiltonian(ScalarField.constant(2.0), ScalarField.constant(-3.0)).as_function()
    h_u = NaturalHamiltonian(ScalarField.constant(2.0), radial_quadratic(1.0, 0.3)).as_function()
    for _ in range(20):
        s = PhaseState(rng.normal(size=n), rng.normal(size=n))
        for sym in [angular_symmetry(n, 3), angular_symmetry(n, 2, lower=True), momentum_symmetry(n, 1, 3, 0.3)]:
            assert abs(poisson_bracket(h_free, sym.as_function(), s)) <= 1e-12
            assert abs(poisson_bracket(h_u, sym.intermediate_function(), s)) <= 1e-12


def test_involution_survives_transport(rng):
    params = Parameters(0.02, 1.0, 4)
    inst = build_oscillator_instance(params)
    t = inst.transported
    before = [inst.symmetries[k].as_function() for k in ("C^(2)", "C^(3)", "C^(4)")]
    after = [inst.final.as_function()] + [t[k] for k in ("C^(2)", "C^(3)", "C^(4)")]
    diag = [t[f"S_{i}{i}"] for i in range(1, 5)]
    for s in sample_generic_states(params, "type_i", 20, rng):
        assert max_involution_residual(before, s) <= 1e-9
        assert max_involution_residual(after, s) <= 1e-9
        assert max_involution_residual(diag, s) <= 1e-9


@pytest.mark.parametrize("n", [2, 3, 4])
@pytest.mark.parametrize("lam,kind", [(0.02, "type_i"), (-0.02, "type_ii")])
def test_check_instance(n, lam, kind):
    rep = check_instance(Parameters(lam, 1.0, n), kind, samples=40, seed=5)
    assert rep.passed, (rep.identity_max, rep.bracket_max)


def test_check_instance_rejects_exterior():
    with pytest.raises(DomainError):
        check_instance(Parameters(-0.02, 1.0, 3), "type_iii", samples=5)
