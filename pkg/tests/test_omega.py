from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wkam.errors import InvalidInputError
from wkam.omega import (OmegaPoint, SkewProductSystem, check_group_law, check_inverse,
                        check_measure_preservation, derive_seed, exchange_f, histogram_deviation, omega_distance,
                        sample_omega, theta)

IE = SkewProductSystem.interval_exchange()
TR = SkewProductSystem.torus_rotation(2)
TR_PERM = SkewProductSystem.torus_rotation(2, (), 2, (3, 0, 2, 1))


def _exact_f(x):
    if x < Fraction(1, 3):
        return x
    if x < Fraction(2, 3):
        return x + Fraction(1, 3)
    return x - Fraction(1, 3)


def _exact_f_inv(y):
    for x in (y, y - Fraction(1, 3), y + Fraction(1, 3)):
        if 0 <= x < 1 and _exact_f(x) == y:
            return x
    raise AssertionError


def test_theta_example1_against_rational_oracle():
    # oracle: exact rational evaluation of f^{-1}((s + f(w)) mod 1)
    s, w = Fraction(1, 10), Fraction(1, 2)
    expected = _exact_f_inv((s + _exact_f(w)) % 1)
    assert expected == Fraction(3, 5)
    assert theta(IE, 0.1, OmegaPoint("interval_exchange", (0.5,))).coords[0] == pytest.approx(0.6, abs=1e-12)


def test_theta_example2_translation():
    out = theta(TR, 0.5, OmegaPoint("torus_rotation", (0.0, 0.0)))
    assert np.allclose(out.coords, (0.5, np.sqrt(2) / 2), atol=1e-12)


@pytest.mark.parametrize("sys", [IE, TR, TR_PERM])
def test_theta_zero_is_identity(sys):
    rng = np.random.default_rng(0)
    for _ in range(1000 // 10):
        w = sample_omega(sys, int(rng.integers(2**32)))
        assert omega_distance(theta(sys, 0.0, w), w) <= 1e-12


def test_theta_variant_mismatch():
    with pytest.raises(InvalidInputError):
        theta(IE, 0.1, OmegaPoint("torus_rotation", (0.1, 0.2)))


def test_identity_permutation_reduces_to_translation():
    sys = SkewProductSystem.torus_rotation(2, (), 3, ())
    w = np.random.default_rng(1).random((200, 2))
    assert np.allclose(sys.theta_array(0.77, w), sys.translate(0.77, w), atol=0)


@pytest.mark.parametrize("sys", [IE, TR, TR_PERM])
def test_group_law(sys):
    assert check_group_law(sys, 1000, 3) <= 1e-12
    assert check_group_law(sys, 50, 3, zero_times=True) == 0.0


@pytest.mark.parametrize("sys", [IE, TR, TR_PERM])
def test_inverse_identities(sys):
    assert check_inverse(sys, 1000, 5) <= 1e-12


def test_exchange_f_matches_rational_oracle():
    xs = np.random.default_rng(2).random(1000)
    exact = np.array([float(_exact_f(Fraction(x))) for x in xs])
    assert np.max(np.abs(exchange_f(xs) - exact)) <= 1e-15


def test_sample_omega_deterministic():
    assert sample_omega(TR, 11) == sample_omega(TR, 11)
    assert sample_omega(IE, 11) != sample_omega(IE, 12)


@pytest.mark.parametrize("sys", [IE, TR])
def test_sampler_uniform(sys):
    rng = np.random.default_rng(9)
    w = rng.random((100_000, sys.dim))
    for i in range(sys.dim):
        assert histogram_deviation(w[:, i], 20) <= 0.02


@pytest.mark.parametrize("sys,t", [(IE, 0.37), (TR, 1.0), (TR_PERM, 2.3)])
def test_measure_preservation(sys, t):
    assert check_measure_preservation(sys, t, 100_000, 20, 4) <= 0.02


def test_measure_preservation_at_zero_matches_sampler():
    raw = np.random.default_rng(4).random((2000, 1))[:, 0]
    assert check_measure_preservation(IE, 0.0, 2000, 20, 4) == histogram_deviation(raw, 20)


def test_measure_preservation_needs_samples():
    with pytest.raises(InvalidInputError):
        check_measure_preservation(IE, 0.1, 100, 20, 0)


def test_bad_permutation_rejected():
    with pytest.raises(InvalidInputError):
        SkewProductSystem.torus_rotation(2, (), 2, (0, 0, 1, 2))


@given(st.integers(0, 2**63), st.text(min_size=1, max_size=8))
def test_derive_seed_is_involutive_split(root, tag):
    s = derive_seed(root, tag)
    assert derive_seed(s, tag) == root & 0xFFFFFFFFFFFFFFFF


@given(st.floats(-20, 20, allow_nan=False), st.floats(-20, 20, allow_nan=False), st.floats(0, 1, exclude_max=True))
def test_group_law_property(s, t, w):
    a = theta(IE, s, theta(IE, t, OmegaPoint("interval_exchange", (w,))))
    b = theta(IE, s + t, OmegaPoint("interval_exchange", (w,)))
    assert omega_distance(a, b) <= 1e-12
