import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wkam.errors import InvalidInputError, LegendreError, TonelliViolation
from wkam.lagrangian import (HamiltonianView, LagrangianModel, dH_dp, el_acceleration, eval_L, hamiltonian,
                             partials, validate_tonelli, velocity_hessian)
from wkam.omega import OmegaPoint, SkewProductSystem, sample_omega

FREE = LagrangianModel.free_kinetic()
PEND = LagrangianModel.pendulum()
SINE = LagrangianModel.time_forced([(1, 0.0, 1.0)], phase_map="none")
MOVING = LagrangianModel.mechanical([(1, 1, 0.5), (2, 0, 0.3)], h_coeffs=[(1, 0.2, 0.1)])
BUILTINS = [FREE, PEND, SINE, MOVING, LagrangianModel.pendulum(d=2)]


def test_eval_examples():
    assert eval_L(FREE, 0.3, 2.0, 0.0) == 2.0
    assert eval_L(PEND, 0.0, 0.0, 0.7) == -1.0
    assert eval_L(SINE, 0.4, 0.0, 0.25) == pytest.approx(1.0, abs=1e-15)


def test_partials_examples():
    assert partials(FREE, 0.1, 0.5, 0.0)[1][0] == 0.5
    lx, _ = partials(PEND, 0.25, 0.0, 0.0)
    assert lx[0] == pytest.approx(2 * np.pi, rel=1e-12)
    assert np.all(partials(SINE, np.random.default_rng(0).random((20, 1)), 0.3, 0.1)[0] == 0)


@pytest.mark.parametrize("model", BUILTINS)
def test_partials_match_finite_differences(model):
    rng = np.random.default_rng(1)
    d = model.d
    for _ in range(20):
        x, v, t = rng.random(d), rng.normal(size=d), rng.random()
        lx, lv = partials(model, x, v, t)
        for i in range(d):
            e = np.zeros(d)
            e[i] = 1e-6
            fx = (eval_L(model, x + e, v, t) - eval_L(model, x - e, v, t)) / 2e-6
            fv = (eval_L(model, x, v + e, t) - eval_L(model, x, v - e, t)) / 2e-6
            assert abs(fx - lx[i]) <= 1e-6 * max(1, abs(fx)) * 10
            assert abs(fv - lv[i]) <= 1e-6


def test_hamiltonian_examples():
    assert hamiltonian(HamiltonianView(FREE), 0.2, 1.0, 0.0) == 0.5
    assert hamiltonian(HamiltonianView(SINE), 0.2, 0.0, 0.25) == pytest.approx(-1.0, abs=1e-15)


@pytest.mark.parametrize("model", [FREE, PEND, SINE, MOVING])
def test_numeric_legendre_matches_closed_form(model):
    rng = np.random.default_rng(2)
    closed, numeric = HamiltonianView(model), HamiltonianView(model, mode="numeric")
    for _ in range(25):
        x, p, t = rng.random(), rng.normal(), rng.random()
        assert abs(hamiltonian(closed, x, p, t) - hamiltonian(numeric, x, p, t)) <= 1e-6


def test_numeric_legendre_cap_error():
    view = HamiltonianView(FREE, mode="numeric", v_cap=1.0)
    with pytest.raises(LegendreError) as info:
        hamiltonian(view, 0.0, 5.0, 0.0)
    assert info.value.best is not None


@given(st.floats(0, 1), st.floats(-5, 5), st.floats(-5, 5), st.floats(0, 1))
def test_fenchel_young(x, p, v, t):
    view = HamiltonianView(MOVING)
    assert hamiltonian(view, x, p, t) + eval_L(MOVING, x, v, t) >= p * v - 1e-9
    v_star = dH_dp(view, x, p, t)[0]
    assert hamiltonian(view, x, p, t) + eval_L(MOVING, x, v_star, t) == pytest.approx(p * v_star, abs=1e-8)


def test_el_acceleration_examples():
    assert el_acceleration(PEND, 0.25, 3.0, 0.0)[0] == pytest.approx(2 * np.pi, rel=1e-12)
    assert np.all(el_acceleration(FREE, 0.1, 0.4, 0.2) == 0)
    assert np.all(el_acceleration(SINE, 0.1, 0.4, 0.2) == 0)


def test_custom_model_matches_builtin():
    custom = LagrangianModel.custom(lambda x, v, tau: 0.5 * np.sum(v * v, -1) - np.cos(2 * np.pi * x[..., 0]))
    for x, v, t in [(0.1, 0.3, 0.0), (0.37, -1.2, 0.5)]:
        assert el_acceleration(custom, x, v, t)[0] == pytest.approx(el_acceleration(PEND, x, v, t)[0], rel=1e-5)
        assert np.allclose(partials(custom, x, v, t), partials(PEND, x, v, t), atol=1e-6)


def test_degenerate_custom_model():
    flat = LagrangianModel.custom(lambda x, v, tau: np.sqrt(np.sum(v * v, -1) + 1e-30))
    with pytest.raises(TonelliViolation):
        el_acceleration(flat, 0.1, 1.0, 0.0)
    report = validate_tonelli(flat)
    assert not report.checks["convexity"].passed
    assert report.checks["convexity"].witness is not None
    assert "convexity" in report.failures()


@pytest.mark.parametrize("model", BUILTINS)
def test_builtins_are_tonelli(model):
    assert validate_tonelli(model).passed


def test_hessian_positive():
    assert np.allclose(velocity_hessian(MOVING, 0.2, 0.1, 0.3), [[1.0]])


@pytest.mark.parametrize("system,phase_map", [
    (SkewProductSystem.interval_exchange(), "example1"),
    (SkewProductSystem.torus_rotation(2), "example2_pi"),
    (SkewProductSystem.torus_rotation(2, (), 2, (1, 0, 3, 2)), "example2_pi"),
])
def test_phase_matching(system, phase_map):
    model = LagrangianModel.time_forced([(1, 0.3, 1.0), (2, 0.0, 0.5)], phase_map=phase_map)
    rep = validate_tonelli(model, system=system, omega=sample_omega(system, 5))
    assert rep.checks["phase_matching"].passed
    assert rep.checks["phase_matching"].value <= 1e-12


def test_phase_matching_fails_for_mixing_permutation():
    # pi(omega) only shifts with time when f keeps the first-coordinate cell
    system = SkewProductSystem.torus_rotation(2, (), 2, (3, 0, 2, 1))
    model = LagrangianModel.time_forced([(1, 0.0, 1.0)], phase_map="example2_pi")
    assert not validate_tonelli(model, system=system).checks["phase_matching"].passed


def test_phase_variant_mismatch():
    model = LagrangianModel.time_forced([(1, 0.0, 1.0)], phase_map="example1")
    with pytest.raises(InvalidInputError):
        eval_L(model, 0.1, 0.0, 0.0, OmegaPoint("torus_rotation", (0.1, 0.2)))


@given(st.floats(0, 1), st.floats(-3, 3), st.floats(-5, 5))
def test_periodicity(x, v, t):
    assert eval_L(MOVING, x, v, t + 1) == pytest.approx(eval_L(MOVING, x, v, t), abs=1e-12)
    assert eval_L(MOVING, x + 1, v, t) == pytest.approx(eval_L(MOVING, x, v, t), abs=1e-12)


def test_bad_models_rejected():
    with pytest.raises(InvalidInputError):
        LagrangianModel.free_kinetic(mass=-1.0)
    with pytest.raises(InvalidInputError):
        LagrangianModel.mechanical([(1, 1.0)])
