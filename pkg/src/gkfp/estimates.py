"""Extremal constants of the quadratic-form inequalities, resolvent norms and exponent fits."""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, eigh, LinAlgError

from .basis import HermiteBasis, PGrid, op_number
from .operators import GkfpParams, assemble_euclid_fiber, assemble_vertical, scalar_perturbation


@dataclass
class QuadraticFormBundle:
    """C‖Lu‖² >= Σ w_i‖R_i u‖²: the two sides of one inequality on a common basis."""

    lhs: np.ndarray
    rhs: list
    weights: list = None

    def __post_init__(self):
        self.lhs = np.asarray(self.lhs)
        n = self.lhs.shape[1]
        self.rhs = [np.asarray(r) for r in self.rhs]
        if any(r.shape[1] != n for r in self.rhs):
            raise ValueError("all operators must act on the same basis")
        if self.weights is None:
            self.weights = [1.0] * len(self.rhs)
        if len(self.weights) != len(self.rhs) or any(w < 0 for w in self.weights):
            raise ValueError("need one nonnegative weight per right-hand operator")


@dataclass
class EstimateReport:
    params: dict
    empirical_constant: float
    margin: float = 0.0
    refinement_drift: float = 0.0
    drift_tol: float = 0.1
    extra: dict = field(default_factory=dict)

    @property
    def passed(self):
        return bool(self.margin >= 0 and self.refinement_drift <= self.drift_tol)


def gram(mat):
    mat = np.asarray(mat)
    return mat.conj().T @ mat


def min_constant(bundle, eps=1e-12):
    """C* = max_u Σ w_i‖R_i u‖² / ‖Lu‖², the largest generalized eigenvalue.

    L*L is regularized by eps·‖L*L‖ only when its Cholesky factorization fails.

    :return: (C*, maximizer, regularized flag)
    """
    b = gram(bundle.lhs)
    a = sum(w * gram(r) for w, r in zip(bundle.weights, bundle.rhs))
    a = 0.5 * (a + a.conj().T)
    b = 0.5 * (b + b.conj().T)
    flag = False
    try:
        cho_factor(b)
    except LinAlgError:
        b = b + eps * np.linalg.norm(b, 2) * np.eye(b.shape[0])
        flag = True
        try:
            cho_factor(b)
        except LinAlgError:
            raise ValueError("L*L is indefinite after regularization")
    ev, vec = eigh(a, b)
    v = vec[:, -1]
    return float(ev[-1]), v / np.linalg.norm(v), flag


def resolvent_norm(mat, z=0.0):
    """‖(A − z)^{-1}‖ = 1/σ_min(A − z) by dense SVD."""
    mat = np.asarray(mat)
    s = np.linalg.svd(mat - z * np.eye(mat.shape[0]), compute_uv=False)
    if s[-1] < 1e-13 * max(1.0, s[0]):
        raise ValueError("A − z is numerically singular (σ_min = %.3g)" % s[-1])
    return 1.0 / s[-1]


def exponent_fit(xs, ys):
    """Least-squares slope of log y against log x, with its standard error."""
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    if len(xs) < 4 or len(xs) != len(ys):
        raise ValueError("need at least 4 matching points")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("exponent fits need positive data")
    lx, ly = np.log(xs), np.log(ys)
    a = np.column_stack([lx, np.ones_like(lx)])
    coef, res, *_ = np.linalg.lstsq(a, ly, rcond=None)
    resid = ly - a @ coef
    dof = len(xs) - 2
    s2 = resid @ resid / dof
    cov = s2 * np.linalg.inv(a.T @ a)
    return float(coef[0]), float(np.sqrt(max(cov[0, 0], 0.0)))


def drift(a, b):
    return abs(b - a) / abs(a) if a else abs(b - a)


# ---------------------------------------------------------------- Airy

def airy_hermite(xi, lam, n):
    """P_1(ξ, λ) = i(pξ − λ) − ½∂² in the first n Hermite functions (exact words)."""
    basis = HermiteBasis(1, n)
    return 1j * (xi * basis.word([("p", 0)]) - lam * np.eye(n)) - 0.5 * basis.word([("d", 0), ("d", 0)])


def airy_window(xi, lam, refine=1, width=12.0, cells=8.0):
    """Grid centred at the turning point λ/ξ, spacing ξ^{-1/3}/cells, covering
    |pξ − λ| <= width(1 + |ξ|^{2/3}) plus four decay lengths."""
    xi = abs(xi)
    if xi == 0:
        center, half, dx = 0.0, 12.0, 1 / cells
    else:
        center = lam / xi
        scale = xi ** (-1 / 3)
        half = width * (1 + xi ** (2 / 3)) / xi + 4 * scale
        dx = min(scale, 1.0) / cells
    dx /= refine
    m = int(2 * np.ceil(half / dx))
    return PGrid(m * dx / 2, m), center


def airy_bundle(xi, lam, grid, center=0.0):
    """Squared Airy subelliptic form: L = 1 + P_1(ξ, λ) against ½Δ, (pξ − λ), (|ξ|^{2/3}+1), (|λ|/(1+|p|))^{2/3}."""
    p = grid.nodes + center
    m = grid.points
    lap = grid.laplacian()
    L = np.eye(m) + 1j * np.diag(p * xi - lam) - 0.5 * lap
    rs = [0.5 * lap, np.diag(p * xi - lam), (abs(xi) ** (2 / 3) + 1) * np.eye(m),
          np.diag((abs(lam) / (1 + np.abs(p))) ** (2 / 3))]
    return QuadraticFormBundle(L, rs)


def _edge_mass(v, frac=0.05):
    k = max(1, int(frac * len(v)))
    w = np.abs(v) ** 2
    return float((w[:k].sum() + w[-k:].sum()) / w.sum())


def airy_constant(xi, lam, refine=1):
    grid, center = airy_window(xi, lam, refine)
    c, v, flag = min_constant(airy_bundle(xi, lam, grid, center))
    return c, {"points": grid.points, "center": center, "edge_mass": _edge_mass(v), "regularized": flag}


def airy_bound(xis, lams, drift_tol=0.1):
    """Sup over the sweep of the Airy subelliptic constant, at two resolutions.

    The constant is in squared form (Σ‖R_i u‖² <= C‖Lu‖²); it exceeds the
    norm-sum form's C₀² by at most 4.

    :return: EstimateReport with per-cell constants in extra["cells"]
    """
    cells, sup1, sup2, edge = [], 0.0, 0.0, 0.0
    for xi in xis:
        for lam in lams:
            c1, info1 = airy_constant(xi, lam, 1)
            c2, info2 = airy_constant(xi, lam, 2)
            sup1, sup2 = max(sup1, c1), max(sup2, c2)
            edge = max(edge, info1["edge_mass"], info2["edge_mass"])
            cells.append({"xi": xi, "lambda": lam, "C": c1, "C_refined": c2, "edge_mass": info2["edge_mass"]})
    dr = drift(sup1, sup2)
    window_ok = edge <= 0.01
    return EstimateReport({"xis": list(xis), "lambdas": list(lams)}, sup2,
                          margin=0.0 if (np.isfinite(sup2) and window_ok) else -1.0,
                          refinement_drift=dr, drift_tol=drift_tol,
                          extra={"cells": cells, "sup_coarse": sup1, "edge_mass": edge})


def airy_resolvent_norms(xis, n=640):
    """‖P_1(ξ, 0)^{-1}‖ in a fixed unit-scale Hermite basis."""
    return np.array([resolvent_norm(airy_hermite(x, 0.0, n)) for x in xis])


# ---------------------------------------------------------------- Euclidean fiber

def euclid_bundle(b, h, xi, lam, basis, width=1.0):
    """eq. (LowerBoundWithParameterbh) on the Fourier fiber ξ (1D), squared-norm form.

    (h²|λ|/(√(hb)+|p|))^{2/3} is formed by Hermitian functional calculus of p.

    :param width: Hermite functions of this width are used (p = width·p₀, ∂ = ∂₀/width)
    """
    n = basis.dim
    eye = np.eye(n)
    p = width * basis.word([("p", 0)])
    o_hat = (-0.5 * h**2 * basis.word([("d", 0), ("d", 0)]) / width**2
             + width**2 * basis.word([("p", 0), ("p", 0)]) / (2 * b**2))
    if width == 1:
        P = assemble_euclid_fiber(GkfpParams(b, h=h), [xi], basis).matrix
    else:
        P = o_hat + 1j * xi / b * p
    L = h / b * eye + P - 1j * h * lam * eye
    w, u = np.linalg.eigh(p)
    weight = (h**2 * abs(lam) / (np.sqrt(h * b) + np.abs(w))) ** (2 / 3)
    rs = [h / b * eye + o_hat, xi / b * p - h * lam * eye,
          (abs(h * xi / b) ** (2 / 3) + h / b) * eye, (u * weight) @ u.T]
    return QuadraticFormBundle(L, rs)


def euclid_constant(b, h, xi, lam, n=64):
    c, v, flag = min_constant(euclid_bundle(b, h, xi, lam, HermiteBasis(1, n)))
    return c


def euclid_bound(xis, lams, b=1.0, h=1.0, n=64, drift_tol=0.1):
    """Sup over (ξ, λ) of the Euclidean constant at cutoffs n and 2n."""
    sup1, sup2, cells = 0.0, 0.0, []
    for xi in xis:
        for lam in lams:
            c1, c2 = euclid_constant(b, h, xi, lam, n), euclid_constant(b, h, xi, lam, 2 * n)
            sup1, sup2 = max(sup1, c1), max(sup2, c2)
            cells.append({"xi": xi, "lambda": lam, "C": c1, "C_refined": c2})
    return EstimateReport({"b": b, "h": h}, sup2, margin=0.0 if np.isfinite(sup2) else -1.0,
                          refinement_drift=drift(sup1, sup2), drift_tol=drift_tol,
                          extra={"cells": cells, "sup_coarse": sup1})


def euclid_scaling_check(b, h, xi1, lam1, n=64):
    """C(b, h) at (ξ, λ) = (ξ₁√(h/b), λ₁/b) against C(1, 1) at (ξ₁, λ₁).

    The unitary dilation maps the first onto the second exactly; the
    Hermite basis is dilated with it (an eigenbasis of 𝒪̂_{b,h} on each
    side), so the comparison is exact up to rounding.
    """
    from .operators import scaling_reduce
    cert = scaling_reduce(b, h)
    xi, lam = xi1 / cert.xi_factor, lam1 / cert.lam_factor
    c = _scaled_euclid_constant(b, h, xi, lam, n)
    c1 = euclid_constant(1.0, 1.0, xi1, lam1, n)
    return c, c1


def _scaled_euclid_constant(b, h, xi, lam, n):
    # Hermite functions of width √(hb) diagonalize 𝒪̂_{b,h}
    return min_constant(euclid_bundle(b, h, xi, lam, HermiteBasis(1, n), np.sqrt(h * b)))[0]


def resolvent_lambda_profile(lams, p0s=None, n=256):
    """Resolvent along iℝ for the b = h = 1 Euclidean fibers 𝒪 + ipξ (d = 1).

    ξ is sampled through the turning point p₀ = λ/ξ. Returns, per λ,
    sup_ξ ‖(P̂_ξ − iλ)^{-1}‖ and sup_ξ ‖(|λ|/⟨p⟩)^{2/3}(P̂_ξ − iλ)^{-1}‖.
    """
    p0s = np.linspace(0.5, 12, 24) if p0s is None else p0s
    basis = HermiteBasis(1, n)
    o = op_number(basis).matrix
    pm = basis.word([("p", 0)])
    w, u = np.linalg.eigh(pm)
    raw, weighted = [], []
    for lam in lams:
        wt = (u * (abs(lam) / np.sqrt(1 + w**2)) ** (2 / 3)) @ u.T
        r0, r1 = 0.0, 0.0
        for p0 in p0s:
            mat = o + 1j * (lam / p0) * pm - 1j * lam * np.eye(n)
            r0 = max(r0, resolvent_norm(mat))
            r1 = max(r1, np.linalg.norm(wt @ np.linalg.inv(mat), 2))
        raw.append(r0)
        weighted.append(r1)
    return np.array(raw), np.array(weighted)


# ---------------------------------------------------------------- oscillator comparison

def oscillator_padded(g, n, pad=4):
    """𝒪_g acting from span{h_0..h_{n-1}} into n + pad modes, so ‖𝒪_g u‖ is exact."""
    big = HermiteBasis(np.atleast_2d(g).shape[0], n + pad)
    full = assemble_vertical(big, g).matrix
    keep = np.all(big.multi_indices < n, axis=1)
    return full[:, keep]


def oscillator_compare(g1, g2, n=32, ts=None, direction=None):
    """Two-sided constant C_{g1,g2} and the difference bound of the oscillator comparison.

    :param ts: perturbation sizes t for g1 + tE (default 1e-3..1e-1)
    :param direction: symmetric E with ‖E‖ = 1 (default: the unit matrix direction e_1e_1ᵀ)
    :return: dict with C_{g1,g2}, the sup ratios per t and their fitted slope in t
    """
    g1, g2 = np.atleast_2d(g1).astype(float), np.atleast_2d(g2).astype(float)
    for g in (g1, g2):
        if not np.allclose(g, g.T) or np.linalg.eigvalsh(g)[0] <= 0:
            raise ValueError("metrics must be symmetric positive definite")
    o1, o2 = oscillator_padded(g1, n), oscillator_padded(g2, n)
    c12 = min_constant(QuadraticFormBundle(o2, [o1]))[0]
    c21 = min_constant(QuadraticFormBundle(o1, [o2]))[0]
    out = {"C_g1g2": float(np.sqrt(max(c12, c21)))}
    ts = np.geomspace(1e-3, 1e-1, 5) if ts is None else np.asarray(ts)
    d = g1.shape[0]
    e = np.zeros((d, d))
    e[0, 0] = 1.0
    e = e if direction is None else np.asarray(direction, dtype=float)
    e = e / np.linalg.norm(e, 2)
    ratios = []
    for t in ts:
        ot = oscillator_padded(g1 + t * e, n)
        ratios.append(np.sqrt(min_constant(QuadraticFormBundle(o1, [ot - o1]))[0]))
    ratios = np.array(ratios)
    slope, err = exponent_fit(ts, ratios)
    out.update({"ts": ts.tolist(), "diff_ratio": ratios.tolist(), "C_g1": float((ratios / ts).max()),
                "slope": slope, "slope_err": err})
    return out


# ---------------------------------------------------------------- accretivity

def ipp_floor_margin(b, kappa, n=48, a=0.0):
    """Smallest eigenvalue of Herm(κ/b² + P_{±,b}) − (𝒪 + κ)/(4b²) on a flat scalar fiber.

    The transport part is skew and drops out; the optional hook a·p/b is
    a real multiplier and stays.
    """
    basis = HermiteBasis(1, n)
    o = op_number(basis).matrix
    herm = kappa / b**2 * np.eye(n) + o / b**2
    if a:
        herm = herm + scalar_perturbation(basis, a).matrix / b
    diff = herm - (o + kappa * np.eye(n)) / (4 * b**2)
    return float(np.linalg.eigvalsh(diff)[0])


def ipp_second_margin(b, kappa, xi=0.0, lam=0.0, n=48):
    """Smallest generalized margin of ‖(κ/b² + P_b − iλ)u‖² − κ/(16b⁴)(⟨u,𝒪u⟩ + κ‖u‖²) on a fiber."""
    basis = HermiteBasis(1, n + 2)
    keep = np.arange(n)
    o = op_number(basis).matrix
    L = (kappa / b**2 * np.eye(n + 2) + o / b**2 + 1j * xi / b * basis.word([("p", 0)])
         - 1j * lam * np.eye(n + 2))[:, keep]
    lhs = gram(L)
    rhs = kappa / (16 * b**4) * (o[np.ix_(keep, keep)] + kappa * np.eye(n))
    return float(np.linalg.eigvalsh(lhs - rhs)[0])


def ipp_c0_search(bs, a=0.0, n=48, c_grid=None):
    """Smallest C₀ on a grid with zero negative-margin cells for κ_b = C₀(1+b²)."""
    c_grid = np.geomspace(1 / 64, 64, 25) if c_grid is None else c_grid
    for c in c_grid:
        margins = [ipp_floor_margin(b, c * (1 + b**2), n, a) for b in bs]
        if min(margins) >= -1e-10:
            return float(c), margins
    return None, margins


def shell_cutoff(p, lo=1 / 8, hi=8.0, width=None):
    """Smooth χ_shell supported in lo <= |p| <= hi (fixed profile)."""
    from .partitions import bump_jet
    t = np.abs(p)
    return bump_jet(np.log(np.maximum(t, 1e-300)), np.log(lo), np.log(hi), 0).c[0] ** 0.25


def refined_margins(b, ell, kappa, f, lam=0.0, grid=None, xi=0.0):
    """Floors of eq. (IPPPbhf) and its squared version on χ_shell-localized states.

    :param f: frozen f (1D scalar) at a chart point
    :return: (margin of the Hermitian-part floor, margin of the squared floor),
        both as smallest eigenvalues of χ(·)χ compressed to supp χ
    """
    grid = grid or PGrid(9.0, 540)
    params = GkfpParams.from_ell(b, ell, kappa, lam)
    h = params.h
    n = grid.points
    eye = np.eye(n)
    P = assemble_euclid_fiber(params, [xi], grid, f=np.array([[[f]]])).matrix
    L = h * kappa / b * eye + P - 1j * h * lam * eye
    chi = shell_cutoff(grid.nodes)
    keep = chi > 1e-8
    cm = np.diag(chi)[:, keep]
    hd2 = -h**2 * grid.laplacian()  # Σ‖hD_p u‖² as a quadratic form
    herm = 0.5 * (L + L.conj().T)
    first = cm.T @ (herm - 0.5 * hd2 - eye / (2**7 * b**2)) @ cm
    second = cm.T @ (gram(L) - eye / (2**14 * b**4) - hd2 / (2**8 * b**2)) @ cm
    # compare against the norm of the localized states
    s = cm.T @ cm
    m1 = eigh(0.5 * (first + first.conj().T), s, eigvals_only=True)[0]
    m2 = eigh(0.5 * (second + second.conj().T), s, eigvals_only=True)[0]
    return float(m1), float(m2)


def refined_accretivity(b, ell, kappa, chart, As, c_hat=2.0, lam=0.0, n_q=9, grid=None):
    """A-sweep of the refined floor with f from a chart of a perturbed metric.

    f is frozen pointwise at n_q points of the ball B(0, ĉA) (the Hermitian
    part has no q-derivatives, so the q-family decouples).

    :param kappa: a fixed κ_b, or a callable (A, C⁽¹⁾) -> κ_b such as the
        sufficient choice 1 + 16 C⁽¹⁾ A b
    :return: list of cells (A, κ_b, sup|f|, worst margins) and the first A at
        which a margin turns negative (None if never)
    """
    from .geometry import scaled_coeffs
    cells, threshold = [], None
    for A in As:
        sc = scaled_coeffs(chart, ell, A, c_hat)
        qs = np.linspace(-sc.ball_radius, sc.ball_radius, n_q)
        fs = [float(sc.f(np.array([q])).reshape(-1)[0]) for q in qs]
        k = kappa(A, sc.c1) if callable(kappa) else kappa
        m1, m2 = np.inf, np.inf
        for f in fs:
            a, c = refined_margins(b, ell, k, f, lam, grid)
            m1, m2 = min(m1, a), min(m2, c)
        cells.append({"A": A, "kappa": k, "f_sup": max(abs(x) for x in fs), "c1": sc.c1, "margin": m1,
                      "margin_sq": m2})
        if threshold is None and min(m1, m2) < 0:
            threshold = A
    return cells, threshold


def fiber_spectrum(xi, basis):
    from .operators import fiber_spectrum as _fs
    return _fs(xi, basis)
