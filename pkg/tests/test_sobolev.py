import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gkfp.basis import HermiteBasis, PGrid
from gkfp import sobolev as sob

coords = st.floats(-1e3, 1e3)
points = st.lists(coords, min_size=4, max_size=4)


@given(points)
def test_psi_weight_at_least_one(x):
    assert sob.psi_weight(sob.PhasePoint.from_array(x)) >= 1


@given(points, points)
def test_gpsi_dual_closed_form(x, t):
    # for this diagonal metric the symplectic dual is Ψ² g_Ψ(T)
    X = sob.PhasePoint.from_array(x)
    T = np.array(t)
    lhs = sob.symplectic_dual(sob.gpsi_matrix(X), T)
    rhs = float(sob.psi_weight(X)) ** 2 * float(sob.gpsi_form(X, sob.PhasePoint.from_array(T)))
    assert np.isclose(lhs, rhs, rtol=1e-9, atol=1e-12)


@given(points, points)
@settings(max_examples=200)
def test_temperance_property(x, y):
    X, Y = sob.PhasePoint.from_array(x), sob.PhasePoint.from_array(y)
    assert sob.temperance_check(X, Y)["failures"] == 0


def test_slowness_on_generated_pairs():
    rng = np.random.default_rng(11)
    X, Xp = sob.slowness_pairs(rng, 2000, d=2)
    res = sob.slowness_check(X, Xp)
    assert res["checked"] == 2000 and res["failures"] == 0
    assert res["max_ratio"] < 1.01
    with pytest.raises(ValueError):
        sob.slowness_check(X, Xp, R=2.0)


def test_phase_point_validation():
    with pytest.raises(ValueError):
        sob.PhasePoint([0.0], [0.0, 1.0], [0.0], [0.0])
    with pytest.raises(ValueError):
        sob.PhasePoint([np.nan], [0.0], [0.0], [0.0])


def test_log_psi_monotone_along_rays():
    X = sob.PhasePoint.from_array(np.random.default_rng(0).normal(0, 3, (50, 4)))
    assert sob.log_psi_monotone(X, np.linspace(0.01, 5, 20)) >= 0


@given(st.floats(0, 30), st.sampled_from([1.0, 2.0, 8.0]))
@settings(max_examples=25)
def test_w2_lower_bound_and_commutes(xi, c_g):
    basis = HermiteBasis(1, 12)
    w2 = sob.w2_fiber(xi, c_g, basis).matrix
    assert np.linalg.eigvalsh(w2)[0] >= c_g + xi**2 + c_g / 4 - 1e-9
    assert np.allclose(w2, np.diag(np.diag(w2)))


def test_default_c_g_is_one_for_unit_floor():
    assert sob.default_c_g([0.0, 3.0], HermiteBasis(1, 8)) == 1.0
    with pytest.raises(ValueError):
        sob.w2_fiber(0.0, 0.5, HermiteBasis(1, 4))


def test_norm_ws_order_zero_is_twice_l2():
    basis = HermiteBasis(1, 10)
    u = np.random.default_rng(1).normal(size=(2, 10))
    assert np.isclose(sob.norm_ws(u, 0, [1.0, 2.0], basis), 2 * np.sum(u**2))


def test_norm_ws_first_order_oracle():
    # s = 1 on h_n at frequency ξ: (n + ½)² + ξ²
    basis = HermiteBasis(1, 10)
    u = np.zeros((1, 10))
    u[0, 3] = 1
    assert np.isclose(sob.norm_ws(u, 1, [2.0], basis), 3.5**2 + 4)


def test_monomial_norm_oracle_k1():
    # k = 1 on h_n at frequency ξ: ‖u‖² + ξ²‖u‖² + ‖pu‖² + ‖u'‖² + ‖p²u‖² + ‖pu'‖² + ‖u''‖²
    n, xi = 4, 3.0
    basis = HermiteBasis(1, 12)
    u = np.zeros(12)
    u[n] = 1
    val = float(u @ sob.monomial_gram(1, xi, basis) @ u)
    # ladder algebra: ‖pu‖² = ‖u'‖² = n + ½, ‖p²u‖² = ‖u''‖² = c + (n + ½)², ‖pu'‖² = c + ¼
    c = ((n + 1) * (n + 2) + n * (n - 1)) / 4
    expected = 1 + xi**2 + 2 * (n + 0.5) + 2 * (c + (n + 0.5) ** 2) + c + 0.25
    assert np.isclose(val, expected)


def test_hermite_and_grid_calculus_agree():
    sg = sob.SobolevGrid(PGrid(24.0, 256, "periodic"))
    u = np.random.default_rng(4).normal(size=(1, 12))
    v = (sg.hermite_frame(12) @ u.T).T
    hb = HermiteBasis(1, 12)
    assert np.isclose(sob.norm_ws(u, 1.5, [1.0], hb), sob.norm_ws(v, 1.5, [1.0], sg), rtol=1e-8)


def test_equivalence_constants_trivial_at_s0():
    sg = sob.SobolevGrid(PGrid(24.0, 256, "periodic"))
    res = sob.equivalence_constants(0, 8, [0.0, 1.0], sg)
    # at s = 0 norm (ii) counts ‖u‖² twice (oscillator and frequency terms)
    assert np.allclose(res["iv"], (0.5, 0.5))
    assert np.allclose(res["iii"], (1.0, 1.0), atol=1e-10)


def test_embedding_inequality():
    basis = HermiteBasis(1, 16)
    rng = np.random.default_rng(7)
    for _ in range(20):
        u = rng.normal(size=(3, 16))
        lhs, rhs = sob.embedding_check(u, 2, 0.5, [0.0, 1.0, 5.0], 1.0, basis)
        assert lhs <= rhs * (1 + 1e-12)
