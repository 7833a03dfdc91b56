import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wkam.action import (Propagator, action_kernel, action_to_target, discrete_action, extract_minimizer,
                         lax_step, make_curve, refine_minimizer, second_differences, semiconcavity_constant,
                         straight_curve, superdifferential_defect, superdifferential_momenta)
from wkam.errors import ConfigurationError, InvalidInputError
from wkam.lagrangian import LagrangianModel
from wkam.torus import SpaceGrid, torus_distance

FREE = LagrangianModel.free_kinetic()
PEND = LagrangianModel.pendulum()
G64 = SpaceGrid(64)


def test_lax_step_constant_cost():
    model = LagrangianModel.time_forced([], phase_map="none")
    # h = 0 so L = v^2 / 2: a constant slice is preserved and standing still is optimal
    u, idx = lax_step(np.ones(64), 0.0, None, model, G64, 16)
    assert np.allclose(u, 1.0)
    assert np.array_equal(idx.reshape(-1), np.arange(64))


def test_lax_step_unit_lagrangian():
    model = LagrangianModel.mechanical([(0, 0, -1.0)])  # V = -1, L = v^2/2 + 1
    u, _ = lax_step(np.zeros(64), 0.0, None, model, G64, 16)
    assert np.allclose(u, 1 / 16)


def test_lax_step_spike_closed_form():
    u0 = np.full(64, 10.0)
    u0[0] = 0.0
    dt = 1 / 16
    u, _ = lax_step(u0, 0.0, None, FREE, G64, 16)
    d = np.array([torus_distance(0.0, k / 64) for k in range(64)])
    expected = np.where(d <= 4 * dt + 1e-12, np.minimum(10.0, 0.5 * d ** 2 / dt), 10.0)
    assert np.allclose(u.reshape(-1), expected, atol=1e-12)


def test_forward_step_is_mirror_of_backward_for_free():
    u0 = np.random.default_rng(0).random(64)
    back, _ = lax_step(u0, 0.0, None, FREE, G64, 16)
    fwd, _ = lax_step(u0, 0.0, None, FREE, G64, 16, direction="forward")
    assert np.allclose(back, fwd)
    with pytest.raises(InvalidInputError):
        lax_step(u0, 0.0, None, FREE, G64, 16, direction="sideways")


@pytest.mark.parametrize("n_x,n_t", [(64, 16), (128, 32)])
def test_free_kernel_within_lattice_bound(n_x, n_t):
    grid = SpaceGrid(n_x)
    ker = action_kernel(0.0, 1.0, None, FREE, grid, n_t, sources=[0], keep_backpointers=False)
    d = np.array([torus_distance(0.0, k / n_x) for k in range(n_x)])
    # averaging grid velocities with spacing dv = n_t / n_x costs at most dv^2 / 8
    bound = (n_t / n_x) ** 2 / 8
    err = ker.from_source(0).reshape(-1) - 0.5 * d ** 2
    assert err.min() >= -1e-12
    assert err.max() <= bound + 1e-12


def test_kernel_triangle_equality():
    # with n_t = 8 the cap must stay below 4 so one step spans less than half a period
    grid = SpaceGrid(32)
    full = action_kernel(0.0, 1.0, None, PEND, grid, 8, v_cap=3.5)
    first = action_kernel(0.0, 0.5, None, PEND, grid, 8, v_cap=3.5)
    second = action_kernel(0.5, 1.0, None, PEND, grid, 8, v_cap=3.5)
    composed = np.min(first.values[:, :, None] + second.values[None, :, :], axis=1)
    assert np.allclose(composed, full.values, atol=1e-12)


def test_kernel_beats_hand_path():
    ker = action_kernel(0.0, 1.0, None, PEND, G64, 16, sources=[16])
    hand = straight_curve(0.25, [0.25], 0.0, 1.0, 16, PEND)
    assert ker.value(16, 32) <= hand.action + 1e-12


def test_cost_to_go_matches_kernel():
    grid = SpaceGrid(32)
    ker = action_kernel(0.0, 1.0, None, PEND, grid, 8, v_cap=3.5)
    col = action_to_target(0.0, 1.0, 5, None, PEND, grid, 8, v_cap=3.5)
    assert np.allclose(col.reshape(-1), ker.to_target(5).reshape(-1), atol=1e-12)


def test_extract_minimizer_examples():
    ker = action_kernel(0.0, 1.0, None, FREE, G64, 16, sources=[0])
    curve = extract_minimizer(ker, 0, 32)
    assert curve.action == pytest.approx(0.125, abs=1e-12)
    assert abs(curve.lifted[-1, 0] - curve.lifted[0, 0]) == pytest.approx(0.5)
    pk = action_kernel(0.0, 1.0, None, PEND, G64, 16, sources=[0])
    assert extract_minimizer(pk, 0, 0).action == pytest.approx(-1.0, abs=0.05)


def test_extract_requires_backpointers():
    ker = action_kernel(0.0, 1.0, None, FREE, G64, 16, sources=[0], keep_backpointers=False)
    with pytest.raises(InvalidInputError):
        extract_minimizer(ker, 0, 3)


def test_refine_keeps_free_straight_line():
    c = straight_curve(0.1, [0.3], 0.0, 1.0, 32, FREE)
    r = refine_minimizer(c, None, FREE)
    assert np.max(np.abs(r.lifted - c.lifted)) <= 1e-10
    assert r.info["converged"]


def test_refine_noisy_free_curve():
    c = straight_curve(0.0, [0.4], 0.0, 1.0, 32, FREE)
    noisy = c.lifted + np.r_[0, np.random.default_rng(3).normal(scale=0.02, size=31), 0][:, None]
    r = refine_minimizer(make_curve(noisy, c.times, FREE), None, FREE)
    assert r.action == pytest.approx(0.5 * 0.4 ** 2, abs=1e-8)
    hist = r.info["action_history"]
    assert all(b <= a + 1e-15 for a, b in zip(hist, hist[1:]))


def test_refine_pendulum_residual():
    ker = action_kernel(0.0, 1.0, None, PEND, G64, 16, sources=[8])
    r = refine_minimizer(extract_minimizer(ker, 8, 40), None, PEND)
    assert r.info["residual"] < 1e-6
    assert r.action <= ker.value(8, 40) + 1e-12


def test_second_differences():
    grid = SpaceGrid(64)
    x = grid.points()[:, 0]
    sd = second_differences(np.cos(2 * np.pi * x), grid, 1 / 64)
    h = 1 / 64
    expected = -np.cos(2 * np.pi * x) * (2 - 2 * np.cos(2 * np.pi * h)) / h ** 2
    assert np.allclose(sd, expected, atol=1e-9)
    assert semiconcavity_constant(np.zeros(64), grid, 1 / 8) == 0.0
    with pytest.raises(InvalidInputError):
        second_differences(np.zeros(64), grid, 0.3 / 64)


def test_free_kernel_semiconcavity_near_one():
    grid = SpaceGrid(128)
    ker = action_kernel(0.0, 1.0, None, FREE, grid, 16, sources=[0], keep_backpointers=False)
    assert semiconcavity_constant(ker.from_source(0), grid, 1 / 8) == pytest.approx(1.0, abs=0.05)


def test_momenta_antipodal_pair():
    mom = superdifferential_momenta(0.0, 0.0, 1.0, 0.5, None, FREE, restarts=2)
    assert sorted(float(p[0]) for p in mom) == pytest.approx([-0.5, 0.5], abs=1e-6)
    single = superdifferential_momenta(0.0, 0.0, 1.0, 0.25, None, FREE)
    assert len(single) == 1 and single[0][0] == pytest.approx(0.25, abs=1e-6)


def test_superdifferential_defect_free():
    grid = SpaceGrid(128)
    ker = action_kernel(0.0, 1.0, None, FREE, grid, 16, sources=[0], keep_backpointers=False)
    row = ker.from_source(0)
    for p in (-0.5, 0.5):
        assert superdifferential_defect(row, grid, 64, [p], 1.0, 1 / 8) <= 0.01


def test_csv_headers(tmp_path):
    ker = action_kernel(0.0, 0.25, None, FREE, SpaceGrid(16), 16, sources=[0, 1])
    ker.to_csv(tmp_path / "k.csv")
    extract_minimizer(ker, 1, 3).to_csv(tmp_path / "c.csv")
    with open(tmp_path / "k.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["y_index", "x_index", "action"] and len(rows) == 33
    with open(tmp_path / "c.csv") as fh:
        assert next(csv.reader(fh)) == ["t", "x1", "v1"]


def test_thread_count_does_not_change_kernel():
    grid = SpaceGrid(16, d=2)
    model = LagrangianModel.pendulum(d=2)
    a = action_kernel(0.0, 0.5, None, model, grid, 8, v_cap=3.5, threads=1, keep_backpointers=False)
    b = action_kernel(0.0, 0.5, None, model, grid, 8, v_cap=3.5, threads=2, keep_backpointers=False)
    assert np.array_equal(a.values, b.values)


def test_velocity_cap_configuration():
    with pytest.raises(ConfigurationError):
        Propagator(FREE, None, SpaceGrid(8), 64, v_cap=4.0)
    with pytest.raises(ConfigurationError):
        Propagator(FREE, None, SpaceGrid(64), 4, v_cap=4.0)


@settings(max_examples=15)
@given(st.integers(0, 31), st.integers(0, 31))
def test_mirror_symmetry_of_free_kernel(y, x):
    grid = SpaceGrid(32)
    ker = action_kernel(0.0, 1.0, None, FREE, grid, 8, v_cap=3.5, sources=[y, (-y) % 32], keep_backpointers=False)
    assert ker.value(y, x) == ker.value((-y) % 32, (-x) % 32)
    assert ker.value(y, x) == pytest.approx(discrete_action(
        extract_minimizer(action_kernel(0.0, 1.0, None, FREE, grid, 8, v_cap=3.5, sources=[y]), y, x).lifted,
        np.linspace(0, 1, 9), FREE), abs=1e-12)
