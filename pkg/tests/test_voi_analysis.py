import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from growvoi.errors import ConfigError, DomainError
from growvoi.steady_state import sigma_star_closed_form
from growvoi.voi_analysis import (Classification, VoICurve, classify, curvature_at_zero, golden_min,
                                  growth_threshold, pro_rata_curvature_fd, pro_rata_curvature_sign,
                                  second_derivative_at_zero, steady_voi, voi_curve,
                                  voi_curvature_fd, voi_pro_rata, voi_stage)

D_GRID = np.round(np.arange(1.0, 1.5001, 0.05), 10)
G_GRID = (0.5, 1.0, 2.0)


def true_voi_curvature(d, g):
    """Second h-derivative of K*^2 S* at h = 0, derived symbolically from the Riccati root."""
    return 2 * d * d * (d * d - 2) / g**4


def true_pro_rata_curvature(d, g):
    return 2 * d * (d * d - 1) / g**3


# -- stage quantities ----------------------------------------------------------

def test_voi_stage_examples():
    assert voi_stage(0.0, 3.0) == 0.0
    assert voi_stage(1.2, 1.0) == pytest.approx(1.44)
    s, k, voi, pr = steady_voi(1.0, 1.0, 1.0, 1.0)
    assert k == pytest.approx(0.6180340, abs=1e-7)
    assert s == pytest.approx(1.6180340, abs=1e-7)
    assert voi == pytest.approx(0.6180340, abs=1e-7)
    assert voi == pytest.approx(s**3 / (s + 1) ** 2, rel=1e-14)


def test_voi_stage_matrix_is_symmetric_psd(rng):
    K = rng.standard_normal((3, 3))
    L = rng.standard_normal((3, 3))
    out = voi_stage(K, L @ L.T)
    np.testing.assert_array_equal(out, out.T)
    assert np.linalg.eigvalsh(out).min() > -1e-12


def test_pro_rata_examples():
    assert voi_pro_rata(1.2, 1.0) == pytest.approx(1.2)
    assert voi_pro_rata(0.0, 5.0) == 0.0
    assert steady_voi(1.2, 1, 1, 1.0)[3] > steady_voi(1.2, 1, 1, 0.0)[3]
    K = np.array([[0.5, 0.1], [0.0, 0.3]])
    np.testing.assert_array_equal(voi_pro_rata(K, np.eye(2)), K)


def test_noiseless_voi():
    s, k, voi, pr = steady_voi(1.2, 1.0, 1.0, 0.0)
    assert voi == pytest.approx(1.44, rel=1e-14)
    assert pr == pytest.approx(1.2, rel=1e-14)


# -- threshold and curvature ---------------------------------------------------

def test_threshold_examples():
    assert growth_threshold(1.0).d_upper == pytest.approx(math.sqrt(15) / 3, rel=1e-15)
    assert growth_threshold(0.5).d_upper == pytest.approx(1.5275252, abs=1e-7)
    assert growth_threshold(1e4).d_upper == pytest.approx(1.0, abs=1e-8)
    assert growth_threshold(1.0).d_lower == 1.0
    with pytest.raises(DomainError):
        growth_threshold(0.0)


@given(st.floats(1e-3, 1e3))
def test_threshold_equivalent_form(g):
    r = growth_threshold(g)
    alt = math.sqrt((2 * g * g + 3) / (2 * g * g + 1))
    assert r.d_upper == pytest.approx(alt, rel=1e-12)
    assert 1.0 < r.d_upper <= math.sqrt(3) + 1e-15
    assert r.contains(1.0) and not r.contains(r.d_upper + 1e-9)


def test_curvature_examples():
    assert curvature_at_zero(1.2, 1.0) == pytest.approx(-0.9792, abs=1e-12)
    assert curvature_at_zero(1.4, 1.0) == pytest.approx(1.7248, abs=1e-12)
    assert curvature_at_zero(1.0, 1.0) == pytest.approx(-2.0, abs=1e-15)
    with pytest.raises(DomainError):
        curvature_at_zero(1.0, 0.0)


@pytest.mark.parametrize("g", G_GRID)
def test_analytic_sign_flips_at_threshold(g):
    du = growth_threshold(g).d_upper
    d = np.arange(1.0, 1.8, 1e-4)
    sign = np.sign([curvature_at_zero(x, g) for x in d])
    flips = d[1:][np.diff(sign) != 0]
    assert flips.size == 1
    assert abs(flips[0] - du) <= 1e-4


def test_second_derivative_rule_on_polynomial():
    assert second_derivative_at_zero(lambda x: 3 + 2.5 * x * x - x**4) == pytest.approx(5.0, abs=1e-9)


@pytest.mark.parametrize("g", G_GRID)
@pytest.mark.parametrize("d", D_GRID)
def test_fd_curvature_matches_symbolic_oracle(d, g):
    fd = voi_curvature_fd(d, 1.0, g)
    assert fd == pytest.approx(true_voi_curvature(d, g), rel=1e-4, abs=1e-5)


@pytest.mark.parametrize("g", G_GRID)
@pytest.mark.parametrize("d", D_GRID)
def test_fd_pro_rata_curvature_matches_symbolic_oracle(d, g):
    fd = pro_rata_curvature_fd(d, 1.0, g)
    assert fd == pytest.approx(true_pro_rata_curvature(d, g), rel=1e-4, abs=1e-5)


@pytest.mark.xfail(strict=True, reason="the closed-form curvature expression disagrees in sign with "
                   "the steady-state VoI between the two roots of its sign changes; see notes")
def test_fd_sign_matches_closed_form_expression_everywhere():
    mismatches = [(d, g) for g in G_GRID for d in D_GRID
                  if abs(curvature_at_zero(d, g)) > 1e-6
                  and np.sign(voi_curvature_fd(d, 1.0, g)) != np.sign(curvature_at_zero(d, g))]
    assert not mismatches


@pytest.mark.parametrize("f", [0.5, 1.0, 2.0])
def test_curvature_independent_of_state_noise(f):
    for d, g in [(1.1, 1.0), (1.3, 2.0), (1.45, 0.5)]:
        assert voi_curvature_fd(d, f, g) == pytest.approx(voi_curvature_fd(d, 1.0, g), rel=1e-4, abs=1e-5)


def test_pro_rata_sign_examples():
    assert pro_rata_curvature_sign(1.2, 1.0, 1.0) == 1
    assert pro_rata_curvature_sign(1.0, 1.0, 1.0) == 0
    assert abs(pro_rata_curvature_fd(1.0, 1.0, 1.0)) < 1e-6
    assert pro_rata_curvature_sign(1.5, 2.0, 0.5) == 1


def test_classification():
    assert classify(1.2, 1.0) is Classification.MAX_AT_ZERO
    assert classify(1.4, 1.0) is Classification.MIN_AT_ZERO
    d0 = math.sqrt(15) / 3
    assert classify(d0, 1.0) is Classification.DEGENERATE
    assert str(Classification.MAX_AT_ZERO) == "MaxAtZero"


# -- curves --------------------------------------------------------------------

H = np.arange(0, 50.0001, 0.25)
# dense near zero, geometric out to very noisy signals (the recovery is slow for d near 1)
WIDE_H = np.concatenate([np.linspace(0, 10, 2001), np.geomspace(10, 1e5, 801)[1:]])


def test_non_monotone_curve():
    c = voi_curve(1.1, 1.0, 1.0, H)
    assert c.voi[0] == pytest.approx(1.21, rel=1e-14)
    assert np.any(c.voi < c.voi[0]) and np.any(c.voi > c.voi[0])
    assert c.classification is Classification.MAX_AT_ZERO
    h_min, v_min = c.interior_min
    assert 0 < h_min < 50
    assert v_min <= c.voi.min() + 1e-12
    # the refined minimum is stationary
    eps = 1e-3
    left = steady_voi(1.1, 1, 1, h_min - eps)[2]
    right = steady_voi(1.1, 1, 1, h_min + eps)[2]
    assert left > v_min and right > v_min


def test_above_threshold_curve_increases():
    c = voi_curve(1.4, 1.0, 1.0, H)
    assert c.voi[0] == pytest.approx(1.96, rel=1e-14)
    assert np.all(np.diff(c.voi) >= 0)
    assert c.classification is Classification.MIN_AT_ZERO
    assert c.interior_min is None


def test_no_growth_curve_decreases():
    c = voi_curve(1.0, 1.0, 1.0, np.arange(0, 10.0001, 0.25))
    assert c.voi[0] == pytest.approx(1.0)
    assert np.all(np.diff(c.voi) < 0)
    assert c.interior_min is None


@pytest.mark.parametrize("g", [1.0, 2.0])
def test_non_monotonicity_witness(g):
    du = growth_threshold(g).d_upper
    for d in np.linspace(1.0, du, 12)[1:-1]:
        v = voi_curve(d, 1.0, g, WIDE_H).voi
        assert np.any(v < v[0]) and np.any(v > v[0]), d


def test_witness_where_true_curvature_is_negative():
    # below sqrt(2) the zero-noise point is a true local maximum for every g
    for d in (1.05, 1.2, 1.4):
        v = voi_curve(d, 1.0, 0.5, WIDE_H).voi
        assert np.any(v < v[0]) and np.any(v > v[0])


@pytest.mark.xfail(strict=True, reason="for g=0.5 and sqrt(2) < d < threshold the zero-noise point "
                   "is a minimum of VoI, so no point dips below VoI(0); see notes")
def test_non_monotonicity_witness_weak_signal_loading():
    g = 0.5
    du = growth_threshold(g).d_upper
    for d in np.linspace(1.0, du, 12)[1:-1]:
        v = voi_curve(d, 1.0, g, WIDE_H).voi
        assert np.any(v < v[0]) and np.any(v > v[0]), d


@pytest.mark.parametrize("d", [1.05, 1.1, 1.2, 1.3, 1.5])
def test_unbounded_growth(d):
    v = steady_voi(d, 1.0, 1.0, np.array([10.0, 100.0]))[2]
    assert v[1] / v[0] > 10


@pytest.mark.parametrize("g", G_GRID)
@pytest.mark.parametrize("f", [0.5, 1.0, 2.0])
def test_pro_rata_global_minimum_at_zero(f, g):
    for d in (1.05, 1.2, 1.5):
        c = voi_curve(d, f, g, H)
        assert np.all(c.pro_rata[1:] > c.pro_rata[0])


def test_classification_independent_of_f():
    for d in (1.1, 1.3, 1.45):
        cls = {voi_curve(d, f, 1.0, H).classification for f in (0.5, 1.0, 2.0)}
        assert len(cls) == 1


def test_curve_validation():
    with pytest.raises(ConfigError):
        voi_curve(1.1, 1, 1, [])
    with pytest.raises(ConfigError):
        voi_curve(1.1, 1, 1, [0.0, 1.0, 0.5])
    with pytest.raises(ConfigError):
        voi_curve(1.1, 1, 1, [-1.0, 0.0])
    with pytest.raises(ConfigError):
        VoICurve(1.0, 1.0, 1.0, np.array([0.0, 1.0]), np.ones(2), np.ones(2), np.ones(1), np.ones(2),
                 Classification.MAX_AT_ZERO, None)


def test_golden_min():
    x, fx = golden_min(lambda x: (x - 1.234) ** 2 + 3, 0.0, 5.0, tol=1e-9)
    assert x == pytest.approx(1.234, abs=1e-7)  # f resolves x only to ~sqrt(eps)
    assert fx == pytest.approx(3.0)


def test_steady_voi_consistent_with_closed_form():
    h = np.linspace(0, 5, 11)
    s, k, voi, pr = steady_voi(1.3, 0.7, 1.5, h)
    np.testing.assert_allclose(s, sigma_star_closed_form(1.3, 0.7, 1.5, h))
    np.testing.assert_allclose(voi, k * pr)
