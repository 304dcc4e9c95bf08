"""Named experiment suites: each check returns summary rows for the report."""

import json
import zlib

import numpy as np

from . import estimates as est
from .basis import HermiteBasis, PGrid, op_airy_grid, op_deriv, op_number, op_position, to_grid, to_hermite
from .geometry import (check_metric, flat_metric, inverse_divergence_defect, metric_from_preset, normal_chart,
                       scaled_coeffs, sin1d_metric, torus2d_metric)
from .operators import (GkfpParams, QGrid, assemble_euclid_fiber, assemble_scaled, conjugated_fiber,
                        fiber_spectrum, harmonic_oscillator_identity_defect, positive_operator_identity_defect,
                        quasimode, rotate_fiber, rotation_unitary, scaling_reduce, triangle_mask)
from .partitions import (DyadicPartition, GridPartition, dyadic_equivalence, grid_error_bound,
                         localization_bounds, transport_derivative)
from . import sobolev as sob


def rng_for(seed, check_id):
    """Counter-based stream keyed by (seed, check id): independent of scheduling."""
    return np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), zlib.crc32(check_id.encode())]))


def row(check_id, params, value, bound, kind="upper", drift=0.0, drift_tol=None, status=None, reason=""):
    """One summary row; margin >= 0 means the check holds.

    :param kind: "upper" (value <= bound) or "lower" (value >= bound)
    """
    value, bound = float(value), float(bound)
    margin = bound - value if kind == "upper" else value - bound
    if status is None:
        ok = np.isfinite(value) and margin >= 0
        if drift_tol is not None:
            ok = ok and drift <= drift_tol
        status = "pass" if ok else "fail"
    return {"check_id": check_id, "params": params, "value": value, "bound": bound, "margin": margin,
            "drift": float(drift), "status": status, "reason": reason}


def skipped(check_id, params, reason):
    return {"check_id": check_id, "params": params, "value": float("nan"), "bound": float("nan"),
            "margin": float("nan"), "drift": 0.0, "status": "skipped", "reason": reason}


# ---------------------------------------------------------------- identities

def check_number_spectrum(cfg, rng):
    basis = HermiteBasis(2, 32)
    diag = np.diag(op_number(basis).matrix)
    expect = basis.multi_indices.sum(axis=1) + 1.0
    off = np.abs(op_number(basis).matrix - np.diag(diag)).max()
    return [row("number_spectrum", {"N": 32, "d": 2}, max(np.abs(diag - expect).max(), off), 0.0)]


def check_oscillator_identities(cfg, rng):
    tol = cfg["tolerances"]["identity_tol"]
    basis = HermiteBasis(2, 32)
    # values reach ~10³ at N = 32, so defects are measured relative to the largest entry
    scale = (1 + 2 * 32) ** 2
    rows = [row("harmonic_oscillator_identity", {"N": 32, "d": 2},
                harmonic_oscillator_identity_defect(basis) / scale, tol)]
    for xi, lam in ((0.0, 0.0), (1.0, 0.5), (3.0, -2.0)):
        s = scale + (xi * 8 + abs(lam)) ** 2
        rows.append(row("positive_operator_identity", {"N": 32, "d": 2, "xi": xi, "lambda": lam},
                        positive_operator_identity_defect(basis, xi, lam) / s, tol))
    return rows


def check_ladder(cfg, rng):
    n = 24
    basis = HermiteBasis(1, n)
    x, d = op_position(basis, 0).matrix, op_deriv(basis, 0).matrix
    comm = (d @ x - x @ d)[: n - 1, : n - 1]
    osc = (-0.5 * d @ d + 0.5 * x @ x)[: n - 2, : n - 2]
    b2 = HermiteBasis(2, 8)
    pc = np.abs(op_position(b2, 0).matrix @ op_position(b2, 1).matrix
                - op_position(b2, 1).matrix @ op_position(b2, 0).matrix).max()
    return [row("canonical_commutation", {"N": n}, np.abs(comm - np.eye(n - 1)).max(), 1e-14),
            row("oscillator_from_ladders", {"N": n}, np.abs(osc - np.diag(np.arange(n - 2) + 0.5)).max(), 1e-13),
            row("position_commute", {"N": 8, "d": 2}, pc, 0.0)]


def check_quadrature(cfg, rng):
    from .basis import hermite_functions
    n = 32
    basis = HermiteBasis(1, n)
    x, w = basis.quadrature()
    h = hermite_functions(n, x)
    gram = (h * w) @ h.T
    p01 = float(np.sum(w * h[0] * x * h[1]))
    return [row("hermite_orthonormality", {"N": n}, np.abs(gram - np.eye(n)).max(), 1e-12),
            row("position_matrix_element", {"N": n}, abs(p01 - op_position(basis, 0).matrix[0, 1]), 1e-13)]


def check_grid_roundtrip(cfg, rng):
    n = 32
    basis = HermiteBasis(1, n)
    grid = PGrid(np.sqrt(2 * n) + 6, 8 * n)
    u = np.zeros(n)
    u[n // 4] = 1
    back, narrow = to_hermite(to_grid(u, basis, grid), basis, grid)
    return [row("grid_roundtrip", {"N": n}, np.abs(back - u).max(), 1e-8)]


def check_rotation(cfg, rng):
    basis = HermiteBasis(2, 16)
    xi = np.array([1.0, 1.0])
    rot = rotate_fiber(xi)
    u = rotation_unitary(basis, rot)
    m = triangle_mask(basis)
    mat = op_number(basis).matrix + 1j * (xi[0] * op_position(basis, 0).matrix + xi[1] * op_position(basis, 1).matrix)
    conj = conjugated_fiber(xi, basis).matrix
    # compare U*(𝒪 + ip·ξ)U with 𝒪 + ip₁|ξ| on the triangle shrunk by one shell (p couples neighbours)
    inner = triangle_mask(basis, 1)
    lhs = (u.T @ mat @ u)[np.ix_(inner, inner)]
    defect = np.abs(lhs - conj[np.ix_(inner, inner)]).max()
    uni = np.abs((u.T @ u)[np.ix_(m, m)] - np.eye(m.sum())).max()
    return [row("rotation_unitary", {"N": 16, "d": 2}, uni, 1e-12),
            row("rotation_conjugation", {"N": 16, "d": 2, "xi": [1, 1]}, defect, 1e-10),
            row("rotation_first_column", {"xi": [0, 3]}, abs(abs(rotate_fiber([0.0, 3.0])[1, 0]) - 1), 1e-15)]


# ---------------------------------------------------------------- airy

def check_airy_scaling(cfg, rng):
    a = cfg["airy"]
    xs = a["fit_xi"]
    norms = est.airy_resolvent_norms([1.0] + list(xs), a["hermite_N"])
    slope, err = est.exponent_fit(xs, norms[1:])
    rel = np.abs(norms[1:] / (np.asarray(xs) ** (-2 / 3) * norms[0]) - 1).max()
    tol = cfg["tolerances"]["fit_tol"]
    return [row("airy_exponent", {"xi": list(xs), "N": a["hermite_N"]}, abs(slope + 2 / 3), tol),
            row("airy_unitary_scaling", {"xi": list(xs), "N": a["hermite_N"]}, rel, 1e-6)]


def check_airy_cross(cfg, rng):
    herm = est.resolvent_norm(est.airy_hermite(1.0, 0.0, 128), -1.0)
    grid = est.resolvent_norm(op_airy_grid(PGrid(12.0, 512), 1.0, 0.0).matrix, -1.0)
    return [row("airy_cross_representation", {"N": 128, "P": 12, "M": 512}, abs(grid / herm - 1), 0.01)]


def check_airy_bound(cfg, rng):
    a = cfg["airy"]
    rep = est.airy_bound(a["xi"], a["lambda"], cfg["tolerances"]["drift_tol"])
    rows = [row("airy_bound_sup", {"xi": a["xi"], "lambda": a["lambda"]}, rep.empirical_constant, np.inf,
                drift=rep.refinement_drift, drift_tol=cfg["tolerances"]["drift_tol"]),
            row("airy_window_mass", {}, rep.extra["edge_mass"], 0.01)]
    c0 = est.airy_constant(0.0, 0.0)[0]
    rows.append(row("airy_bound_trivial", {"xi": 0, "lambda": 0}, c0, 3.0))
    return rows


# ---------------------------------------------------------------- euclid

def check_fiber_spectra(cfg, rng):
    n = 64
    basis = HermiteBasis(1, n)
    rows = []
    for xi in (0.0, 1.0, 2.0, 4.0):
        ev = fiber_spectrum(xi, basis)[: n // 2 + 1]
        err = np.abs(ev - (np.arange(n // 2 + 1) + 0.5 + xi**2 / 2)).max()
        rows.append(row("fiber_spectrum", {"N": n, "xi": xi}, err, 1e-6))
    return rows


def check_scaling_reduce(cfg, rng):
    n = 64
    basis = HermiteBasis(1, n)
    ref = np.sort(np.linalg.eigvals(assemble_euclid_fiber(GkfpParams(1.0, h=1.0), [0.0], basis).matrix).real)[:10]
    rows = []
    for b, h in ((4.0, 0.25), (0.5, 2.0)):
        ev = np.sort(np.linalg.eigvals(assemble_euclid_fiber(GkfpParams(b, h=h), [0.0], basis).matrix).real)[:10]
        cert = scaling_reduce(b, h)
        rows.append(row("scaling_reduce", {"b": b, "h": h}, np.abs(ev / ref - cert.factor).max(), 1e-8))
    return rows


def check_euclid_bound(cfg, rng):
    e = cfg["euclid"]
    tol = cfg["tolerances"]["drift_tol"]
    rep = est.euclid_bound(e["xi"], e["lambda"], n=e["N"], drift_tol=tol)
    rows = [row("euclid_bound_sup", {"b": 1, "h": 1, "xi": e["xi"], "lambda_range": [min(e["lambda"]), max(e["lambda"])]},
                rep.empirical_constant, np.inf, drift=rep.refinement_drift, drift_tol=tol)]
    for b, h in ((4.0, 0.25), (0.5, 2.0)):
        worst = 0.0
        for xi1, lam1 in ((0.0, 0.0), (2.0, 3.0), (4.0, -16.0), (16.0, 64.0)):
            c, c1 = est.euclid_scaling_check(b, h, xi1, lam1, e["N"])
            worst = max(worst, abs(c / c1 - 1))
        rows.append(row("euclid_scaling_invariance", {"b": b, "h": h}, worst, 0.01))
    return rows


def check_resolvent_profile(cfg, rng):
    lams = [8, 16, 32, 64, 128, 256, 512]
    raw, weighted = est.resolvent_lambda_profile(lams)
    slope, err = est.exponent_fit(lams, raw)
    return [row("resolvent_weighted_bounded", {"lambda": lams}, weighted.max(), 2.0),
            row("resolvent_raw_exponent", {"lambda": lams, "expected": -0.5}, abs(slope + 0.5), 0.05)]


def check_ipp(cfg, rng):
    bs = cfg["sweep"]["b"]
    rows = []
    c0, margins = est.ipp_c0_search(bs, a=0.0)
    rows.append(row("ipp_floor_flat", {"b": bs, "C0": c0}, min(margins), 0.0, kind="lower"))
    c0a, margins = est.ipp_c0_search(bs, a=1.0)
    rows.append(row("ipp_floor_hook", {"b": bs, "a": 1.0, "C0": c0a},
                    min(margins) if c0a is not None else -1.0, 0.0, kind="lower"))
    worst = np.inf
    for b in bs:
        for xi, lam in ((0.0, 0.0), (4.0, 16.0), (16.0, -64.0)):
            kap = max(c0a or 1.0, 1.0) * (1 + b**2)
            worst = min(worst, est.ipp_second_margin(b, kap, xi, lam))
    rows.append(row("ipp_second_inequality", {"b": bs}, worst, 0.0, kind="lower"))
    return rows


def check_refined(cfg, rng):
    r = cfg["refined"]
    metric = metric_from_preset(r["metric"])
    chart = normal_chart(metric, np.array([np.pi / 2]), method="affine", radius=3.0)
    b, ell = r["b"], r["ell"]
    rows = []
    cells, thr = est.refined_accretivity(b, ell, lambda A, c1: 1 + 16 * c1 * A * b, chart, r["A"], n_q=r["q_samples"])
    worst = min(min(c["margin"], c["margin_sq"]) for c in cells)
    rows.append(row("refined_floor_sufficient_kappa", {"b": b, "ell": ell, "A": r["A"], "kappa": "1+16*C1*A*b"},
                    worst, 0.0, kind="lower"))
    cells, thr = est.refined_accretivity(b, ell, r["kappa_fixed"], chart, r["A"], n_q=r["q_samples"])
    rows.append(row("refined_threshold_located", {"b": b, "ell": ell, "kappa": r["kappa_fixed"],
                                                  "threshold_A": thr, "A": r["A"]},
                    0.0 if thr is not None else -1.0, 0.0, kind="lower"))
    ms = [c["margin"] for c in cells]
    rows.append(row("refined_margin_monotone", {"kappa": r["kappa_fixed"]}, float(np.max(np.diff(ms))), 0.0))
    m0 = est.refined_margins(b, ell, 1.0, 0.0, 0.0)[0]
    m1 = est.refined_margins(b, ell, 1.0, 0.0, 37.0)[0]
    rows.append(row("refined_lambda_independent", {}, abs(m0 - m1), 1e-12))
    return rows


# ---------------------------------------------------------------- partitions

def check_dyadic_identity(cfg, rng):
    part = DyadicPartition()
    p = rng.uniform(0, 2.0 ** (part.ell_max - 1), 10**4)
    small = rng.uniform(0, 0.5, 1000)
    metric = torus2d_metric(0.3)
    worst = 0.0
    for ell in (-1, 0, 3):
        fun = lambda x, e=ell: part.member(e, x)
        dfun = lambda x, e=ell: part.member_jet(e, x, 1).c[1]
        for _ in range(50):
            q = rng.uniform(0, 2 * np.pi, 2)
            pp = rng.normal(0, 2.0 ** max(ell, 0), 2)
            worst = max(worst, abs(transport_derivative(metric, q, pp, fun, dfun)))
    return [row("dyadic_identity", {"points": 10**4}, part.identity_defect(p**2), 1e-12),
            row("theta_minus1_plateau", {}, np.abs(part.member(-1, small**2) - 1).max(), 0.0),
            row("Y_kills_theta", {"metric": "torus2d:0.3"}, worst, 1e-10)]


def check_grid_identity(cfg, rng):
    x = rng.uniform(-50, 50, 10**4)
    consts = []
    for A, ell in ((1.0, 0), (2.0, 3), (0.5, -1)):
        g = GridPartition(A=A, ell=ell)
        q = g.cell * 5 + g.cell * np.linspace(-1, 1, 2001)
        d = g.member(5, q, 1)
        consts.append(np.abs(d[1]).max() * g.cell)
    return [row("grid_identity", {"points": 10**4}, GridPartition().identity_defect(x), 1e-12),
            row("grid_derivative_scaling", {}, max(consts) - min(consts), 1e-10)]


def _stencil_errors(ell1, ell2, ms, half=8.0):
    part = DyadicPartition()
    out = []
    for m in ms:
        dx = 2 * half / m
        p = -half + (np.arange(m) + 0.5) * dx
        lap = lambda v: (np.r_[v[1:], 0] - 2 * v + np.r_[0, v[:-1]]) / dx**2
        der = lambda v: (np.r_[v[1:], 0] - np.r_[0, v[:-1]]) / (2 * dx)
        t1, d1, dd1 = part.member_p_derivs(ell1, p)
        t2, d2, _ = part.member_p_derivs(ell2, p)
        v = np.exp(-((np.abs(p) - 1.5) ** 2))
        c1 = -0.5 * (lap(t1 * v) - t1 * lap(v))
        e1 = np.abs(c1 - (-d1 * der(v) - 0.5 * dd1 * v)).max()
        # [[−½Δ, θ1], θ2] acting on v
        cw = lambda w: -0.5 * (lap(t1 * w) - t1 * lap(w))
        c2 = cw(t2 * v) - t2 * cw(v)
        e2 = np.abs(c2 - (-d1 * d2 * v)).max()
        out.append((e1, e2))
    return np.array(out)


def check_commutators(cfg, rng):
    ms = [3200, 6400, 12800]
    errs = _stencil_errors(0, 1, ms)
    o1 = np.log2(errs[-2] / errs[-1])
    rows = [row("first_commutator_order", {"M": ms}, o1[0], 1.8, kind="lower"),
            row("second_commutator_order", {"M": ms}, o1[1], 1.8, kind="lower")]
    # grid family: [P_{b,ℓ}, ψ] is the multiplier (1/b)2^ℓ p ψ', double commutator zero
    fib = PGrid(3.0, 48)
    qg = QGrid(64, 6.0)
    for ell in (0, 1):
        P = assemble_scaled(GkfpParams(1.0), ell, flat_metric(1), qg, fib)
        g = GridPartition(A=2.0 * 2.0**ell, ell=ell)
        mems = g.periodic_members(qg.nodes, 6.0, 1)
        u = rng.normal(size=P.dim) + 1j * rng.normal(size=P.dim)
        psi, dpsi = mems[0]
        lei = P.commutator_q(dpsi)
        expect = np.kron(np.diag(2.0**ell * dpsi), np.diag(fib.nodes))
        rows.append(row("grid_commutator_formula", {"ell": ell}, np.abs(lei.matrix() - expect).max(), 1e-12))
        psi2 = mems[1][0]
        dbl = lei.apply((u.reshape(64, -1) * psi2[:, None]).reshape(-1)) - \
            (lei.apply(u).reshape(64, -1) * psi2[:, None]).reshape(-1)
        rows.append(row("grid_double_commutator", {"ell": ell}, np.abs(dbl).max(), 1e-12))
    # the matrix commutator of the spectral ∂_q reproduces the Leibniz form as the q-grid resolves ψ
    small = PGrid(3.0, 8)
    errs = []
    for m in (128, 512):
        qg = QGrid(m, 12.0)
        P = assemble_scaled(GkfpParams(1.0), 0, flat_metric(1), qg, small)
        psi, dpsi = GridPartition(A=2.0, ell=0).periodic_members(qg.nodes, 12.0, 1)[0]
        u = rng.normal(size=(m, 8))
        u = np.fft.ifft(np.fft.fft(u, axis=0) * (np.abs(np.fft.fftfreq(m, 1 / m)) < 8)[:, None], axis=0).reshape(-1)
        mq = np.kron(psi, np.ones(8))
        lei = P.commutator_q(dpsi).apply(u)
        errs.append(np.abs(P.apply(mq * u) - mq * P.apply(u) - lei).max() / np.abs(lei).max())
    rows.append(row("grid_commutator_matrix_vs_leibniz", {"M": [128, 512], "errors": errs}, errs[-1], 1e-4))
    return rows


def check_localization(cfg, rng):
    part = DyadicPartition()
    grid = PGrid(16.0, 320)
    p = grid.nodes
    osc = -0.5 * grid.laplacian() + 0.5 * np.diag(p**2)
    chis = [part.member(l, p**2) for l in part.active_levels(16.0)]
    bad, worst_r = 0, 0.0
    for _ in range(100):
        scale = rng.uniform(1, 60)
        u = (rng.normal(size=grid.points) + 1j * rng.normal(size=grid.points)) * np.exp(-p**2 / scale)
        r = localization_bounds(osc, chis, u)
        bad += not (r["upper_ok"] and r["lower_ok"])
        worst_r = max(worst_r, r["r"])
    rows = [row("localization_dyadic_O", {"states": 100}, bad, 0)]
    one = localization_bounds(osc, [np.ones(grid.points)], rng.normal(size=grid.points))
    rows.append(row("localization_single_member", {}, abs(one["sum_local"] - one["norm2"]) / one["norm2"], 1e-14))
    # P_{b,0} with the grid family (double commutators vanish exactly)
    fib = PGrid(3.0, 32)
    qg = QGrid(48, 12.0)
    metric = flat_metric(1)
    P = assemble_scaled(GkfpParams(1.0), 0, metric, qg, fib).shift(2.0 - 0.5j)
    g = GridPartition(A=2.0, ell=0)
    mems = g.periodic_members(qg.nodes, 12.0, 1)
    chis_q = [np.kron(m[0], np.ones(32)) for m in mems]
    comm1 = lambda k, v: P.commutator_q(mems[k][1]).apply(v)
    comm2 = lambda k, l, v: comm1(k, chis_q[l] * v) - chis_q[l] * comm1(k, v)
    bad2, dbl = 0, 0.0
    for _ in range(100):
        u = rng.normal(size=P.dim) + 1j * rng.normal(size=P.dim)
        r = localization_bounds(P.apply, chis_q, u, comm1=comm1, comm2=comm2)
        bad2 += not (r["upper_ok"] and r["lower_ok"])
        dbl = max(dbl, r["comm2"])
    rows.append(row("localization_grid_Pb0", {"states": 100}, bad2, 0))
    rows.append(row("localization_grid_double_commutator", {}, dbl, 1e-24))
    return rows


def check_dyadic_equivalence(cfg, rng):
    part = DyadicPartition()
    grid = PGrid(16.0, 320)
    p = grid.nodes
    osc = -0.5 * grid.laplacian() + 0.5 * np.diag(p**2)
    chis = [part.member(l, p**2) for l in part.active_levels(16.0)]
    cells = [(xi, lam) for xi in (0.0, 1.0, 4.0) for lam in (0.0, 4.0, -4.0)]
    c_grid = [2.0 ** (k / 2) for k in range(-12, 17)]
    rows = []
    for b in cfg["sweep"]["b"]:
        def build(kappa, cell, b=b):
            xi, lam = cell
            return (kappa / b**2) * np.eye(grid.points) + osc / b**2 + 1j * np.diag(p * xi) / b - 1j * lam / b * np.eye(grid.points)
        c, recs = dyadic_equivalence(build, chis, b, c_grid, cells)
        last = recs[-1]
        rows.append(row("dyadic_equivalence", {"b": b, "C": c, "kappa": last["kappa"],
                                               "ratio_min": last["ratio_min"], "ratio_max": last["ratio_max"]},
                        last["margin"] if c is not None else -1.0, 0.0, kind="lower"))
    return rows


def check_grid_error(cfg, rng):
    part = DyadicPartition()
    fib = PGrid(3.0, 48)
    p = fib.nodes
    length = 48.0
    qg = QGrid(256, length)
    b = 1.0
    P = assemble_scaled(GkfpParams(b), 0, flat_metric(1), qg, fib).shift(2.0 / b**2 - 0.5j / b)
    u = (np.ones(qg.points)[:, None] * part.member(0, p**2)[None, :]).reshape(-1) + 0j
    As = cfg["sweep"]["A"]
    comm, cs = [], []
    for A in As:
        g = GridPartition(A=A, ell=0)
        mems = g.periodic_members(qg.nodes, length, 1)
        r = grid_error_bound(P, mems, u, A, b, 0)
        comm.append(r["comm_energy"])
        cs.append(r["comm_ratio"])
    slope, err = est.exponent_fit(As, comm)
    # single member with a plateau covering supp u
    g = GridPartition(A=8.0, ell=0, half_support=0.75)
    qs = qg.nodes
    psi = g.member(0, qs - length / 2 + 0 * qs, 1)
    v = (np.exp(-((qs - length / 2) ** 2)) * (np.abs(qs - length / 2) < 1.5))[:, None] * part.member(0, p**2)[None, :]
    r1 = grid_error_bound(P, [(psi[0], psi[1])], v.reshape(-1) + 0j, 8.0, b, 0)
    return [row("grid_error_slope", {"A": list(As), "slope": slope}, abs(slope + 2), 0.1),
            row("grid_error_constant", {"A": list(As), "C_tilde": max(cs)}, max(cs), np.inf),
            row("grid_single_member", {}, abs(r1["sum_local"] - r1["norm2"]) / r1["norm2"] + r1["comm_energy"], 1e-10)]


# ---------------------------------------------------------------- metric

def check_hormander(cfg, rng):
    n = cfg["metric_cert"]["pairs"]
    R = 2.0**12
    X, Xp = sob.slowness_pairs(rng, n, R=R)
    s = sob.slowness_check(X, Xp, R)
    Y = sob.PhasePoint.from_array(rng.normal(0, 10, (n, 4)))
    Yp = sob.PhasePoint.from_array(rng.normal(0, 10, (n, 4)))
    far = sob.slowness_check(Y, Yp, R)
    t = sob.temperance_check(Y, Yp)
    worst = 0.0
    for _ in range(100):
        x = sob.PhasePoint.from_array(rng.normal(0, 5, 4))
        T = rng.normal(size=4)
        dual = sob.symplectic_dual(sob.gpsi_matrix(x), T)
        expect = sob.psi_weight(x) ** 2 * sob.gpsi_form(x, sob.PhasePoint.from_array(T))
        worst = max(worst, abs(dual / expect - 1))
    mono = sob.log_psi_monotone(sob.PhasePoint.from_array(rng.normal(0, 3, (1000, 4))), np.linspace(0.01, 10, 50))
    return [row("slowness", {"pairs": n, "R": R, "checked": s["checked"], "max_ratio": s["max_ratio"]}, s["failures"], 0),
            row("slowness_premise_filter", {"pairs": n}, far["checked"], 0),
            row("temperance", {"pairs": n, "min_log_slack": t["min_log_slack"]}, t["failures"], 0),
            row("gsigma_dual", {"points": 100}, worst, 1e-12),
            row("psi_ray_monotone", {"points": 1000}, mono, 0.0, kind="lower")]


def check_metric_fields(cfg, rng):
    rows = []
    metric = metric_from_preset(cfg["metric"]["preset"])
    qs = rng.uniform(0, 2 * np.pi, (20, metric.dim))
    rows.append(row("metric_fd_consistency", {"preset": metric.name}, check_metric(metric, qs), 1e-6))
    t2 = torus2d_metric(0.3)
    q2 = rng.uniform(0, 2 * np.pi, (20, 2))
    rows.append(row("metric_fd_torus2d", {}, check_metric(t2, q2), 1e-6))
    rows.append(row("inverse_divergence_identity", {},
                    max(inverse_divergence_defect(t2, q) for q in q2[:5]), 1e-6))
    m1 = sin1d_metric(0.1)
    ch = normal_chart(m1, np.array([0.0]))
    g0 = abs(ch.gt(np.array([0.0]))[0, 0] - 1)
    dg0 = abs(ch.dgt(np.array([0.0]))).max()
    rows.append(row("normal_chart_1d", {"eps": 0.1}, max(g0, dg0), 1e-8))
    ch2 = normal_chart(t2, np.array([0.4, 1.1]), radius=0.5)
    g0 = np.abs(ch2.gt(np.zeros(2)) - np.eye(2)).max()
    dg0 = np.abs(ch2.dgt(np.zeros(2))).max()
    rows.append(row("normal_chart_2d", {"eps": 0.3}, max(g0, dg0), 1e-8))
    x = np.array([0.2, -0.1])
    rows.append(row("normal_chart_roundtrip", {}, np.abs(ch2.forward(ch2.backward(x)) - x).max(), 1e-8))
    c_a = normal_chart(sin1d_metric(0.3), np.array([np.pi / 2]), method="affine", radius=3.0)
    r = [scaled_coeffs(c_a, 1, A).sup_bound for A in (0.25, 0.5)]
    rows.append(row("scaled_coeffs_linear_in_A", {"ratio": r[1] / r[0]}, abs(r[1] / r[0] - 2), 0.2))
    s0, s2 = scaled_coeffs(c_a, 0, 0.25).sup_bound, scaled_coeffs(c_a, 2, 0.25).sup_bound
    rows.append(row("scaled_coeffs_ell_stable", {"ratio": s2 / s0}, s2 / s0, 1.2))
    flat_ch = normal_chart(flat_metric(1), np.array([0.0]), radius=3.0)
    rows.append(row("scaled_coeffs_flat_zero", {}, scaled_coeffs(flat_ch, 0, 1.0).sup_bound, 0.0))
    return rows


# ---------------------------------------------------------------- sobolev

def check_sobolev(cfg, rng):
    s_cfg = cfg["sobolev"]
    sg = sob.SobolevGrid(PGrid(s_cfg["P"], s_cfg["M"], "periodic"))
    xis = s_cfg["xi"]
    tol = cfg["tolerances"]["drift_tol"]
    rows, table = [], []
    for s in (1, 2):
        n0 = s_cfg["N"]
        a = sob.equivalence_constants(s, n0, xis, sg)
        b = sob.equivalence_constants(s, 2 * n0, xis, sg)
        for name in ("iv", "iii"):
            lo1, hi1 = a[name]
            lo2, hi2 = b[name]
            c1, c2 = max(hi1, 1 / lo1), max(hi2, 1 / lo2)
            table.append((s, n0, name, lo1, hi1))
            table.append((s, 2 * n0, name, lo2, hi2))
            rows.append(row("norm_equivalence_%s" % name, {"s": s, "N": [n0, 2 * n0], "C_lower": lo2, "C_upper": hi2},
                            c2, np.inf, drift=est.drift(c1, c2), drift_tol=tol))
    basis = HermiteBasis(1, 24)
    c_g = sob.default_c_g(xis, basis)
    worst = np.inf
    for _ in range(100):
        u = rng.normal(size=(len(xis), 24)) * np.exp(-0.2 * np.arange(24))[None, :]
        for s1 in (1, 2):
            lhs, rhs = sob.embedding_check(u, s1, 0.5, xis, c_g, basis)
            worst = min(worst, rhs - lhs)
    rows.append(row("embedding", {"states": 100, "C_g": c_g}, worst, 0.0, kind="lower"))
    w2min = min(np.linalg.eigvalsh(sob.w2_fiber(x, c_g, basis).matrix)[0] for x in xis)
    rows.append(row("w2_lower_bound", {"C_g": c_g}, w2min, 1.0, kind="lower"))
    w2 = sob.w2_fiber(3.0, c_g, basis).matrix
    o = op_number(basis).matrix
    rows.append(row("w2_commutes_O", {}, np.abs(w2 @ o - o @ w2).max(), 0.0))
    u = rng.normal(size=(2, 16))
    hb = HermiteBasis(1, 16)
    v = (sg.hermite_frame(16) @ u.T).T
    a, b = sob.norm_ws(u, 1.5, [0.0, 2.0], hb), sob.norm_ws(v, 1.5, [0.0, 2.0], sg)
    rows.append(row("hermite_vs_grid_calculus", {"s": 1.5}, abs(a / b - 1), 1e-6))
    return rows, table


def check_quasimode(cfg, rng):
    q = cfg["quasimode"]
    phi = lambda x: np.where((x > 0.25) & (x < 4), np.exp(-1 / np.clip((x - 0.25) * (4 - x), 1e-300, None)), 0.0)
    rows = []
    for name in ("flat", q["metric"]):
        metric = metric_from_preset(name)
        vals, ys = [], []
        for b in q["b"]:
            r = quasimode(metric, phi, b, q_points=q["q_points"], p_points=q["p_points"], p_half_width=q["p_half_width"])
            vals.append(r["scaled_P_plus"])
            ys.append(r["Y_norm"] / r["O_norm"])
        spread = (max(vals) - min(vals)) / min(vals)
        rows.append(row("quasimode_b2_constant", {"metric": name, "b": q["b"], "values": vals}, spread, 0.05))
        if name == "flat":
            rows.append(row("quasimode_Y_small", {"metric": name}, max(ys), 1e-8))
        else:
            # the steep profile needs fine grids before the discrete Yu reflects Yu = 0
            fine = quasimode(metric, phi, 1.0, q_points=1024, p_points=4096, p_half_width=q["p_half_width"])
            rows.append(row("quasimode_Y_small", {"metric": name, "coarse": max(ys), "grid": [1024, 4096]},
                            fine["Y_norm"] / fine["O_norm"], 1e-5))
    return rows


def check_oscillator_compare(cfg, rng):
    o = cfg["oscillator"]
    g1 = np.diag([1.0, 0.5])
    rows = []
    r = est.oscillator_compare(g1, g1, o["N"])
    rows.append(row("oscillator_identical", {}, abs(r["C_g1g2"] - 1), 1e-10))
    r1 = est.oscillator_compare(np.eye(1), 2 * np.eye(1), o["N"])
    r2 = est.oscillator_compare(np.eye(1), 2 * np.eye(1), 2 * o["N"])
    rows.append(row("oscillator_C_stable", {"N": [o["N"], 2 * o["N"]], "C": r2["C_g1g2"]},
                    est.drift(r1["C_g1g2"], r2["C_g1g2"]), 0.05))
    e = np.array([[0.0, 1.0], [1.0, 0.0]])
    r3 = est.oscillator_compare(g1, g1, 12, direction=e)
    rows.append(row("oscillator_difference_slope", {"slope": r3["slope"], "C_g1": r3["C_g1"]}, abs(r3["slope"] - 1), 0.05))
    r4 = est.oscillator_compare(np.eye(1), np.eye(1), o["N"])
    rows.append(row("oscillator_difference_slope_1d", {"slope": r4["slope"]}, abs(r4["slope"] - 1), 0.05))
    b = HermiteBasis(2, 12)
    from .operators import assemble_vertical
    h = assemble_vertical(b, np.diag([2.0, 0.5])).matrix
    m = triangle_mask(b, 2)
    ev = np.linalg.eigvalsh(h[np.ix_(m, m)])[0]
    rows.append(row("vertical_floor", {"g": [2, 0.5]}, ev, 1 - 1e-10, kind="lower"))
    return rows


SUITES = {
    "identities": ("exact matrix identities of the Hermite representation",
                   [check_number_spectrum, check_oscillator_identities, check_ladder, check_quadrature,
                    check_grid_roundtrip, check_rotation]),
    "airy-scan": ("complex Airy resolvent scaling and the subelliptic constant",
                  [check_airy_scaling, check_airy_cross, check_airy_bound]),
    "euclid-verify": ("Euclidean fibers, scaling reduction, subelliptic constant and accretivity floors",
                      [check_fiber_spectra, check_scaling_reduce, check_euclid_bound, check_resolvent_profile,
                       check_ipp, check_refined]),
    "partition-check": ("dyadic and grid partitions, commutators and localization inequalities",
                        [check_dyadic_identity, check_grid_identity, check_commutators, check_localization,
                         check_dyadic_equivalence, check_grid_error]),
    "metric-cert": ("metric fields, normal charts, f coefficients and the g_Psi Hormander checks",
                    [check_metric_fields, check_hormander]),
    "sobolev-equiv": ("Sobolev norm equivalences, W2 and the embedding", [check_sobolev]),
    "quasimode": ("b^-2 quasimodes built from phi(|p|_q^2)", [check_quasimode]),
    "oscillator-compare": ("oscillator comparison for two metrics", [check_oscillator_compare]),
}
SUITES["full"] = ("union of all suites", [c for k, (_, cs) in SUITES.items() for c in cs])


def list_suites():
    return [(name, desc) for name, (desc, _) in SUITES.items()]


def params_json(params):
    def default(o):
        if isinstance(o, np.generic):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        return str(o)
    return json.dumps(params, sort_keys=True, default=default, separators=(",", ":"))
