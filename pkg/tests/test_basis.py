import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import eval_hermite, factorial

from gkfp._jet import Jet
from gkfp.basis import (HermiteBasis, PGrid, FiberOperator, default_grid, hermite_functions, ladder_1d,
                        op_airy_grid, op_deriv, op_number, op_position, to_grid, to_hermite, word_1d)


def test_hermite_functions_match_closed_form():
    x = np.linspace(-5, 5, 41)
    h = hermite_functions(12, x)
    for n in range(12):
        ref = eval_hermite(n, x) * np.exp(-x**2 / 2) / np.sqrt(2.0**n * factorial(n) * np.sqrt(np.pi))
        assert np.allclose(h[n], ref, atol=1e-12)


def test_hermite_orthonormal_by_quadrature():
    basis = HermiteBasis(1, 40)
    x, w = basis.quadrature()
    h = hermite_functions(40, x)
    assert np.abs((h * w) @ h.T - np.eye(40)).max() < 1e-12


def test_ladder_matrices_are_p_and_derivative():
    # p h_n and h_n' against finite differences of the functions themselves
    n = 10
    x = np.linspace(-4, 4, 2001)
    h = hermite_functions(n + 1, x)
    p, d = ladder_1d(n + 1, "p"), ladder_1d(n + 1, "d")
    dh = np.gradient(h, x, axis=1)
    for k in range(n):
        assert np.allclose(x * h[k], p[:, k] @ h, atol=1e-10)
        assert np.allclose(dh[k][5:-5], (d[:, k] @ h)[5:-5], atol=1e-4)
    with pytest.raises(ValueError):
        ladder_1d(4, "q")


@given(st.integers(4, 40))
def test_canonical_commutator_exact(n):
    assert np.allclose(word_1d(n, "dp") - word_1d(n, "pd"), np.eye(n), atol=1e-12)


@given(st.integers(3, 30))
def test_padded_word_equals_oscillator(n):
    osc = 0.5 * (-word_1d(n, "dd") + word_1d(n, "pp"))
    assert np.allclose(osc, np.diag(np.arange(n) + 0.5), atol=1e-12)


@given(st.integers(1, 3), st.integers(2, 6))
@settings(max_examples=20)
def test_number_operator_spectrum(d, n):
    basis = HermiteBasis(d, n)
    ev = np.sort(np.diag(op_number(basis).matrix))
    expect = np.sort([sum(m) + d / 2 for m in np.ndindex(*(n,) * d)])
    assert np.array_equal(ev, expect)


def test_tensor_words_commute_across_axes():
    basis = HermiteBasis(2, 6)
    a = basis.word([("p", 0), ("d", 1)])
    b = basis.embed(ladder_1d(6, "p"), 0) @ basis.embed(ladder_1d(6, "d"), 1)
    assert np.allclose(a, b)
    with pytest.raises(IndexError):
        basis.word([("p", 2)])


def test_position_and_derivative_symmetries():
    basis = HermiteBasis(1, 16)
    assert np.allclose(op_position(basis, 0).matrix, op_position(basis, 0).matrix.T)
    assert np.allclose(op_deriv(basis, 0).matrix, -op_deriv(basis, 0).matrix.T)


def test_grid_stencils():
    g = PGrid(np.pi, 64, "periodic")
    f = np.sin(g.nodes)
    assert np.abs(g.laplacian() @ f + f).max() < 2e-3
    assert np.abs(g.spectral_laplacian() @ f + f).max() < 1e-10
    assert np.abs(g.deriv() @ f - np.cos(g.nodes)).max() < 2e-2
    with pytest.raises(ValueError):
        PGrid(1.0, 16).spectral_laplacian()
    with pytest.raises(ValueError):
        PGrid(1.0, 4)


def test_grid_hermite_transfer_roundtrip():
    basis = HermiteBasis(1, 24)
    grid = default_grid(24)
    u = np.random.default_rng(1).normal(size=24)
    back, narrow = to_hermite(to_grid(u, basis, grid), basis, grid)
    assert not narrow
    assert np.allclose(back, u, atol=1e-9)
    _, narrow = to_hermite(np.zeros(16), basis, PGrid(2.0, 16))
    assert narrow


def test_airy_grid_is_skew_plus_positive():
    op = op_airy_grid(PGrid(6.0, 64), 2.0, 1.0)
    herm = op.hermitian_part()
    assert np.linalg.eigvalsh(herm)[0] > 0


def test_fiber_operator_shape_check():
    with pytest.raises(ValueError):
        FiberOperator(np.eye(3), HermiteBasis(1, 4), "bad")
    op = op_number(HermiteBasis(1, 4))
    with pytest.raises(ValueError):
        op.matrix[0, 0] = 2.0


@given(st.floats(-2, 2), st.integers(1, 4))
def test_jet_matches_analytic_derivatives(x0, order):
    x = Jet.variable(np.array([x0]), order)
    y = (x * x).exp()
    # d/dx e^{x²} = 2x e^{x²}; second derivative (2 + 4x²) e^{x²}
    e = np.exp(x0**2)
    ref = [e, 2 * x0 * e, (2 + 4 * x0**2) * e, (12 * x0 + 8 * x0**3) * e, (12 + 48 * x0**2 + 16 * x0**4) * e]
    assert np.allclose(y.derivs()[:, 0], ref[: order + 1], rtol=1e-10)
