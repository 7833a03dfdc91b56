import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wkam.errors import InvalidInputError, NondifferentiablePoint
from wkam.lagrangian import LagrangianModel
from wkam.minimizers import (b_set, calibration_of_orbit, energy, first_smooth_node, gradient_sum,
                             integrate_el, launch_minimizer, perturb_orbit, slice_gradients, theta_flow_check,
                             unit_windows, verify_global_minimizer)
from wkam.omega import SkewProductSystem, sample_omega
from wkam.torus import SpaceGrid
from wkam.weak_kam import weak_kam_solve

FREE = LagrangianModel.free_kinetic()
PEND = LagrangianModel.pendulum()
G64 = SpaceGrid(64)


@pytest.fixture(scope="module")
def pendulum_pair():
    u = weak_kam_solve(None, PEND, G64, 16, 1.0, n_burn=8, n_max=32)
    up = weak_kam_solve(None, PEND, G64, 16, 1.0, n_burn=8, n_max=32, direction="forward")
    return u, up


def test_free_flow_is_linear():
    t, x, v = integrate_el(FREE, None, 0.1, 0.7, 0.0, 2.0, 0.1)
    assert np.allclose(x[:, 0], 0.1 + 0.7 * t, atol=1e-12)
    assert np.allclose(v, 0.7)


def test_backward_then_forward_returns():
    # RK4 is not time-symmetric, so the round trip is exact only up to truncation error
    _, xb, vb = integrate_el(PEND, None, 0.2, 0.3, 0.0, -1.0, 1 / 64)
    _, xf, vf = integrate_el(PEND, None, xb[-1], vb[-1], -1.0, 1.0, 1 / 64)
    assert xf[-1, 0] == pytest.approx(0.2, abs=1e-5) and vf[-1, 0] == pytest.approx(0.3, abs=1e-5)


@settings(max_examples=15)
@given(st.floats(0, 1), st.floats(-2, 2))
def test_pendulum_energy_conserved(x0, v0):
    t, x, v = integrate_el(PEND, None, x0, v0, 0.0, 4.0, 1 / 128)
    e = energy(PEND, x, v, t)
    assert np.ptp(e) <= 1e-6


def test_rk4_order():
    def end(dt):
        return integrate_el(PEND, None, 0.3, 0.4, 0.0, 1.0, dt)[1][-1, 0]
    ref = end(1 / 512)
    ratio = abs(end(1 / 16) - ref) / abs(end(1 / 32) - ref)
    assert ratio >= 12


def test_energy_of_free_particle():
    assert energy(FREE, 0.3, 0.6, 0.0)[0] == pytest.approx(0.18)


def test_slice_gradients_of_linear_ramp():
    grid = SpaceGrid(16)
    u = grid.points()[:, 0] * 2.0
    cen, back, fwd = slice_gradients(u, grid, 5)
    assert cen[0] == pytest.approx(2.0) and back[0] == pytest.approx(2.0) and fwd[0] == pytest.approx(2.0)


def test_pendulum_b_set_is_equilibrium(pendulum_pair):
    u, up = pendulum_pair
    b = b_set(u, up, 0.0, 1e-6)
    assert b.nodes == [0] and b.minimum == pytest.approx(0.0, abs=1e-12)
    assert gradient_sum(u, up, 0.0, b.nodes)[0] <= 1e-12
    assert first_smooth_node(u, b) == 0
    with pytest.raises(InvalidInputError):
        b_set(up, u, 0.0, 1e-6)


def test_minimizer_at_equilibrium(pendulum_pair):
    u, up = pendulum_pair
    b = b_set(u, up, 0.0, 1e-6)
    orbit = launch_minimizer(0, 0.0, u, up, None, PEND, horizon=4, bset=b)
    assert orbit.v0[0] == 0.0
    assert np.all(orbit.curve.lifted == 0.0)
    windows = unit_windows(0.0, 4)
    worst, defects = verify_global_minimizer(orbit, None, PEND, windows, G64, 16)
    assert worst <= 1e-12 and len(defects) == 8
    assert calibration_of_orbit(orbit, u, up, None, 1.0, windows) == (0.0, 0.0)


def test_perturbation_costs_action(pendulum_pair):
    u, up = pendulum_pair
    orbit = launch_minimizer(0, 0.0, u, up, None, PEND, horizon=2)
    for amp in (0.02, 0.1):
        bumped = perturb_orbit(orbit, -1.0, 0.0, amp, PEND, None)
        excess = bumped.window_action(-1.0, 0.0, PEND, None) - orbit.window_action(-1.0, 0.0, PEND, None)
        assert excess > 0
        assert bumped.curve.lifted[0, 0] == orbit.curve.lifted[0, 0]


def test_launch_rejections(pendulum_pair):
    u, up = pendulum_pair
    b = b_set(u, up, 0.0, 1e-6)
    with pytest.raises(InvalidInputError):
        launch_minimizer(5, 0.0, u, up, None, PEND, bset=b)
    with pytest.raises(NondifferentiablePoint):
        launch_minimizer(32, 0.0, u, up, None, PEND)  # concave kink of u at x = 1/2


def test_orbit_sampling(pendulum_pair):
    u, up = pendulum_pair
    orbit = launch_minimizer(0, 0.0, u, up, None, PEND, horizon=1)
    assert orbit.index_of(0.0) == 64
    with pytest.raises(InvalidInputError):
        orbit.index_of(0.001)
    with pytest.raises(InvalidInputError):
        orbit.index_of(5.0)


def test_unit_windows():
    assert unit_windows(0.5, 2, "backward") == [(-1.5, -0.5), (-0.5, 0.5)]
    assert unit_windows(0.0, 1) == [(-1.0, 0.0), (0.0, 1.0)]


def test_theta_flow_for_autonomous_model():
    sys = SkewProductSystem.interval_exchange()
    res = theta_flow_check(sys, sample_omega(sys, 0), 0.25, PEND, SpaceGrid(32), 16, 1.0, horizon=1,
                           solver={"n_burn": 4, "n_max": 12})
    assert res.bset_match and res.defect == 0.0 and res.x0_index == 0
