import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gkfp import estimates as est
from gkfp.basis import PGrid, op_airy_grid
from gkfp.geometry import normal_chart, sin1d_metric


def test_min_constant_diagonal_oracle():
    lhs = np.diag(np.arange(1.0, 11.0) + 0.5)
    rhs = np.diag(np.arange(1.0, 11.0) - 0.5)
    c, v, flag = est.min_constant(est.QuadraticFormBundle(lhs, [rhs]))
    assert np.isclose(c, (9.5 / 10.5) ** 2) and not flag
    assert np.argmax(np.abs(v)) == 9


def test_min_constant_regularizes_singular_lhs():
    lhs = np.diag([1.0, 0.0])
    c, _, flag = est.min_constant(est.QuadraticFormBundle(lhs, [np.eye(2)]))
    assert flag and c > 1e6


def test_bundle_validation():
    with pytest.raises(ValueError):
        est.QuadraticFormBundle(np.eye(2), [np.eye(3)])
    with pytest.raises(ValueError):
        est.QuadraticFormBundle(np.eye(2), [np.eye(2)], [-1.0])


@given(st.floats(-3, 3), st.floats(0.1, 10))
def test_exponent_fit_recovers_power_law(k, c):
    xs = np.geomspace(1, 100, 6)
    slope, err = est.exponent_fit(xs, c * xs**k)
    assert np.isclose(slope, k, atol=1e-9) and err < 1e-8


def test_exponent_fit_validation():
    with pytest.raises(ValueError):
        est.exponent_fit([1, 2, 3], [1, 2, 3])
    with pytest.raises(ValueError):
        est.exponent_fit([1, 2, 3, 4], [1, -2, 3, 4])


def test_resolvent_norm_normal_matrix():
    mat = np.diag([1.0, 2.0, 3.0 + 1j])
    assert np.isclose(est.resolvent_norm(mat, 0.5), 2.0)
    with pytest.raises(ValueError):
        est.resolvent_norm(mat, 1.0)


def test_airy_hermite_matches_grid():
    h = est.resolvent_norm(est.airy_hermite(2.0, 1.0, 160), 0.0)
    g = est.resolvent_norm(op_airy_grid(PGrid(12.0, 768), 2.0, 1.0).matrix, 0.0)
    assert abs(h / g - 1) < 1e-3


def test_airy_resolvent_scaling_exact():
    norms = est.airy_resolvent_norms([1.0, 8.0, 64.0], n=320)
    assert np.allclose(norms[1:] / norms[0], np.array([8.0, 64.0]) ** (-2 / 3), rtol=1e-8)


def test_airy_constant_is_cutoff_stable():
    c1 = est.airy_constant(4.0, 4.0, 1)[0]
    c2 = est.airy_constant(4.0, 4.0, 2)[0]
    assert est.drift(c1, c2) < 0.01 and np.isfinite(c1)


def test_euclid_constant_scaling_invariance():
    c, c1 = est.euclid_scaling_check(4.0, 0.25, 2.0, 3.0, 48)
    assert np.isclose(c, c1, rtol=1e-6)


@given(st.floats(0.25, 4), st.floats(0, 4), st.floats(-1.5, 1.5))
@settings(max_examples=20, deadline=None)
def test_ipp_floor_closed_form(b, kappa, a):
    # Herm(κ/b² + P) − (𝒪 + κ)/(4b²) = ¾(𝒪 + κ)/b² + a p/b, a shifted oscillator
    exact = 3 / (4 * b**2) * (kappa + 0.5) - 2 * a**2 / 3
    assert np.isclose(est.ipp_floor_margin(b, kappa, n=64, a=a), exact, atol=1e-8)


def test_ipp_second_inequality_holds_for_large_kappa():
    for b in (0.25, 1.0, 4.0):
        assert est.ipp_second_margin(b, 2 * (1 + b**2), 4.0, 3.0) >= 0


def test_ipp_c0_search_finds_hook_threshold():
    c, margins = est.ipp_c0_search([0.5, 1.0, 2.0], a=1.0)
    assert c is not None and min(margins) >= -1e-10


def test_resolvent_profile_scaling():
    lams = [8, 32, 128, 512]
    raw, weighted = est.resolvent_lambda_profile(lams)
    slope, _ = est.exponent_fit(lams, raw)
    assert abs(slope + 0.5) < 0.05
    assert weighted.max() < 2


def test_oscillator_compare_identical_metrics():
    r = est.oscillator_compare(np.eye(1), np.eye(1), 16)
    assert np.isclose(r["C_g1g2"], 1.0)
    assert abs(r["slope"] - 1) < 0.05


def test_refined_margins_sufficient_kappa():
    chart = normal_chart(sin1d_metric(0.5), np.array([np.pi / 2]), method="affine", radius=3.0)
    cells, _ = est.refined_accretivity(1.0, 3, lambda A, c1: 1 + 16 * c1 * A, chart, [0.5, 2.0], n_q=5)
    assert all(c["margin"] >= 0 for c in cells)
