import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gkfp.basis import PGrid
from gkfp.geometry import flat_metric, torus2d_metric
from gkfp.partitions import (DyadicPartition, GridPartition, bump_jet, localization_bounds, transport_derivative,
                             triple_commutator_norm)

PART = DyadicPartition()


@given(st.floats(0, 2.0**11))
def test_dyadic_squares_sum_to_one(p):
    assert PART.identity_defect(np.array([p**2])) < 1e-12


@given(st.floats(0, 2.0**10))
@settings(max_examples=50)
def test_at_most_two_dyadic_members_active(p):
    vals = [PART.member(l, np.array([p**2]))[0] for l in PART.levels]
    assert sum(v > 0 for v in vals) <= 2


def test_dyadic_supports():
    # θ_ℓ(x) = θ(4^{-ℓ}x) lives on 4^ℓ/4 < x < 4^{ℓ+1}
    x = np.geomspace(1e-3, 1e6, 4001)
    for ell in range(0, 6):
        v = PART.member(ell, x)
        assert np.all(v[(x <= 4.0**ell / 4) | (x >= 4.0 ** (ell + 1))] == 0)
    assert np.all(PART.member(-1, x[x <= 0.25]) == 1)


def test_bump_jet_derivative_matches_finite_difference():
    t = np.linspace(0.5, 3.5, 31)
    j = bump_jet(t, 0.25, 4.0, 1)
    h = 1e-6
    fd = (bump_jet(t + h, 0.25, 4.0, 0).c[0] - bump_jet(t - h, 0.25, 4.0, 0).c[0]) / (2 * h)
    assert np.allclose(j.derivs()[1], fd, rtol=1e-6, atol=1e-12)


def test_transport_derivative_kills_radial_functions():
    metric = torus2d_metric(0.3)
    fun = lambda x: PART.member(2, x)
    dfun = lambda x: PART.member_jet(2, x, 1).c[1]
    rng = np.random.default_rng(0)
    for _ in range(20):
        q, p = rng.uniform(0, 6, 2), rng.normal(0, 4, 2)
        assert abs(transport_derivative(metric, q, p, fun, dfun)) < 1e-10
    # on the flat metric |p|² itself is conserved
    flat = flat_metric(2)
    assert abs(transport_derivative(flat, np.zeros(2), np.array([1.0, 2.0]), lambda x: x, lambda x: 1.0)) < 1e-14


@given(st.floats(-40, 40), st.sampled_from([0.6, 0.75, 1.0]))
@settings(max_examples=40)
def test_grid_partition_identity(x, s):
    g = GridPartition(half_support=s)
    assert g.identity_defect(np.array([x])) < 1e-12


def test_grid_partition_scaling_and_validation():
    g = GridPartition(A=3.0, ell=1)
    assert g.cell == 1.5
    q = np.linspace(-2, 2, 101)
    d = g.member(0, q, 2)
    base = GridPartition().psi_jet(q / 1.5, 2).derivs()
    assert np.allclose(d[2], base[2] / 1.5**2)
    with pytest.raises(ValueError):
        GridPartition(half_support=0.5)
    with pytest.raises(ValueError):
        g.periodic_members(q, 2.0)


def test_plateau_member_is_one_near_center():
    g = GridPartition(half_support=0.75)
    assert np.allclose(g.psi(np.linspace(-0.2, 0.2, 11)), 1.0)


def test_localization_bounds_single_member_is_equality():
    mat = np.diag(np.arange(1.0, 9.0))
    u = np.ones(8)
    r = localization_bounds(mat, [np.ones(8)], u)
    assert r["norm2"] == r["sum_local"] and r["comm1"] == 0 and r["comm2"] == 0


def test_localization_bounds_hold_for_random_partitions():
    grid = PGrid(8.0, 160)
    p = grid.nodes
    osc = -0.5 * grid.laplacian() + 0.5 * np.diag(p**2)
    chis = [PART.member(l, p**2) for l in PART.active_levels(8.0)]
    rng = np.random.default_rng(5)
    for _ in range(10):
        r = localization_bounds(osc, chis, rng.normal(size=160))
        assert r["upper_ok"] and r["lower_ok"]


def test_triple_commutator_of_multiplier_vanishes():
    chis = [np.linspace(0, 1, 6), np.linspace(1, 0, 6)]
    assert triple_commutator_norm(np.diag(np.arange(6.0)), chis) == 0
    with pytest.raises(ValueError):
        localization_bounds(np.eye(6), chis, np.ones(6), triple_tol=1e-3, triple_defect=1.0)


def test_partition_table_rows_sum_to_one():
    t = np.linspace(0, 100, 57)
    tab = PART.table(t)
    assert np.allclose(tab[:, -1], 1.0, atol=1e-12)
