import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gkfp.geometry import (blend_flat, check_metric, christoffel, conformal1d_metric, flat_metric, formoff,
                           inverse_divergence_defect, metric_from_preset, normal_chart, scaled_coeffs,
                           sin1d_metric, torus2d_metric)


@given(st.floats(-0.9, 0.9), st.floats(0, 2 * np.pi))
def test_sin1d_christoffel_closed_form(eps, q):
    m = sin1d_metric(eps)
    g, dg = 1 + eps * np.sin(q), eps * np.cos(q)
    assert np.isclose(christoffel(m, np.array([q]))[0, 0, 0], dg / (2 * g), atol=1e-12)


def test_conformal_christoffel_is_phi_prime():
    phi, dphi, d2phi = (lambda q: 0.3 * np.sin(q)), (lambda q: 0.3 * np.cos(q)), (lambda q: -0.3 * np.sin(q))
    m = conformal1d_metric(phi, dphi, d2phi)
    for q in np.linspace(0, 6, 7):
        assert np.isclose(christoffel(m, np.array([q]))[0, 0, 0], dphi(q))


def test_analytic_derivatives_match_finite_differences():
    rng = np.random.default_rng(3)
    assert check_metric(torus2d_metric(0.4), rng.uniform(0, 6, (10, 2))) < 1e-6
    assert check_metric(sin1d_metric(0.5), rng.uniform(0, 6, (10, 1))) < 1e-6
    assert inverse_divergence_defect(torus2d_metric(0.4), np.array([0.3, 1.2])) < 1e-6


def test_presets():
    assert metric_from_preset("flat").dim == 1
    assert metric_from_preset("flat2").dim == 2
    assert metric_from_preset("sin1d:0.2").name == "sin1d:0.2"
    assert metric_from_preset("torus2d:0.1").dim == 2
    with pytest.raises(ValueError):
        metric_from_preset("sphere")
    with pytest.raises(ValueError):
        sin1d_metric(1.0)


def test_blend_flat_is_flat_far_away():
    m = blend_flat(sin1d_metric(0.5), radius=2.0)
    assert np.allclose(m.g(np.array([10.0])), 1.0)
    assert np.isclose(m.g(np.array([0.5]))[0, 0], 1 + 0.5 * np.sin(0.5))


def test_normal_chart_is_normal_at_center():
    m = torus2d_metric(0.3)
    ch = normal_chart(m, np.array([0.7, 0.2]), radius=0.5)
    assert np.allclose(ch.gt(np.zeros(2)), np.eye(2), atol=1e-8)
    assert np.abs(ch.dgt(np.zeros(2))).max() < 1e-6
    x = np.array([0.1, -0.2])
    assert np.allclose(ch.forward(ch.backward(x)), x, atol=1e-8)


def test_arclength_chart_flattens_1d():
    ch = normal_chart(sin1d_metric(0.4), np.array([1.0]), radius=1.0)
    for t in np.linspace(-0.8, 0.8, 5):
        assert np.isclose(ch.gt(np.array([t]))[0, 0], 1.0, atol=1e-7)


@given(st.floats(-0.8, 0.8), st.floats(0, 6.2), st.integers(-1, 4))
@settings(max_examples=30)
def test_formoff_1d_closed_form(eps, q, ell):
    # in 1D the coefficient reduces to -2^ℓ g'(y)/(2 g(y)) with y = 2^{-ℓ} q
    m = sin1d_metric(eps)
    y = 2.0**-ell * q
    ref = -(2.0**ell) * eps * np.cos(y) / (2 * (1 + eps * np.sin(y)))
    assert np.isclose(formoff(m, np.array([q]), ell)[0, 0, 0], ref, atol=1e-12)


def test_formoff_vanishes_for_flat():
    assert np.abs(formoff(flat_metric(2), np.array([0.3, 0.1]), 2)).max() == 0


def test_scaled_coeffs_bounds_and_radius():
    ch = normal_chart(sin1d_metric(0.3), np.array([np.pi / 2]), method="affine", radius=3.0)
    sc = scaled_coeffs(ch, 1, 0.5)
    qs = np.linspace(-1, 1, 101)
    assert max(np.abs(sc.f(np.array([q]))).max() for q in qs) <= sc.sup_bound
    assert np.isclose(sc.c1, sc.sup_bound / 0.5)
    with pytest.raises(ValueError):
        scaled_coeffs(ch, 0, 10.0)
