"""The Ψ weight, the metric g_Ψ and the W̃^s, W̃^{s1,s2} norms with their equivalences.

States are stored per Fourier fiber: an array of shape (n_xi, n) holding the
coefficients (Hermite) or samples (p-grid) of u at each frequency ξ.
"""

from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy.linalg import eigh

from .basis import FiberOperator, HermiteBasis, PGrid, hermite_functions, op_number, word_1d
from .partitions import DyadicPartition


@dataclass
class PhasePoint:
    """X = (q, p, ξ, η) in ℝ^{4d}; each field has shape (..., d)."""

    q: np.ndarray
    p: np.ndarray
    xi: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        self.q, self.p, self.xi, self.eta = (np.atleast_1d(np.asarray(a, dtype=float))
                                             for a in (self.q, self.p, self.xi, self.eta))
        if not (self.q.shape == self.p.shape == self.xi.shape == self.eta.shape):
            raise ValueError("q, p, xi, eta must have the same shape")
        if not all(np.all(np.isfinite(a)) for a in (self.q, self.p, self.xi, self.eta)):
            raise ValueError("phase point has non-finite entries")

    @classmethod
    def from_array(cls, x):
        """Split an array (..., 4d) as (q, p, ξ, η)."""
        x = np.asarray(x, dtype=float)
        d = x.shape[-1] // 4
        return cls(x[..., :d], x[..., d:2 * d], x[..., 2 * d:3 * d], x[..., 3 * d:])

    def as_array(self):
        return np.concatenate([self.q, self.p, self.xi, self.eta], axis=-1)

    def __sub__(self, other):
        return PhasePoint(self.q - other.q, self.p - other.p, self.xi - other.xi, self.eta - other.eta)


def _sq(a):
    return np.sum(a**2, axis=-1)


def psi_weight(X):
    """Ψ(X) = √(1 + |ξ|² + |p|⁴ + |η|⁴)."""
    return np.sqrt(1 + _sq(X.xi) + _sq(X.p) ** 2 + _sq(X.eta) ** 2)


def gpsi_form(X, T, psi=None):
    """g_{Ψ,X}(T) = |t_q|² + |t_ξ|²/Ψ² + (|t_p|² + |t_η|²)/Ψ.

    :param psi: optional override of Ψ(X) (e.g. a rescaled gain)
    """
    w = psi_weight(X) if psi is None else psi
    return _sq(T.q) + _sq(T.xi) / w**2 + (_sq(T.p) + _sq(T.eta)) / w


def gpsi_matrix(X):
    """Matrix of g_{Ψ,X} in the coordinates (q, p, ξ, η) at a single point."""
    w = float(psi_weight(X))
    d = X.q.shape[-1]
    return np.diag(np.concatenate([np.ones(d), np.full(d, 1 / w), np.full(d, 1 / w**2), np.full(d, 1 / w)]))


def symplectic_dual(gmat, T):
    """g^σ(T) = sup_{T'} σ(T, T')²/g(T') = (JT)ᵀ g^{-1} (JT) for σ = dξ∧dq + dη∧dp."""
    n = gmat.shape[0]
    d = n // 4
    z, e = np.zeros((d, d)), np.eye(d)
    # σ(T, T') = (J T)·T' with T = (t_q, t_p, t_ξ, t_η)
    J = np.block([[z, z, -e, z], [z, z, z, -e], [e, z, z, z], [z, e, z, z]])
    v = J @ T
    return float(v @ np.linalg.solve(gmat, v))


def slowness_check(X, Xp, R=2.0**12):
    """Slowness of Ψ for g_Ψ on pairs (X, X').

    Pairs with g_{Ψ,X}(X' − X) > 1/R² are skipped (premise false).

    :return: dict with the premise mask, the ratios max(Ψ/Ψ', Ψ'/Ψ) and the failure count
    """
    if R < 2.0**12:
        raise ValueError("the slowness constant needs R >= 2^12")
    premise = gpsi_form(X, Xp - X) <= 1 / R**2
    w, wp = psi_weight(X), psi_weight(Xp)
    ratio = np.maximum(w / wp, wp / w)
    fails = premise & (ratio > R)
    return {"premise": premise, "ratio": ratio, "checked": int(premise.sum()), "failures": int(fails.sum()),
            "max_ratio": float(ratio[premise].max()) if premise.any() else 1.0}


def temperance_check(X, Xp):
    """(Ψ(X)/Ψ(X'))^{±2} <= 64(1 + |X − X'|²)³ on pairs.

    :return: dict with the ratios, the bounds, the failure count and the worst slack log(bound/lhs)
    """
    w, wp = psi_weight(X), psi_weight(Xp)
    lhs = np.maximum(w / wp, wp / w) ** 2
    bound = 64 * (1 + _sq((X - Xp).as_array())) ** 3
    return {"lhs": lhs, "bound": bound, "failures": int(np.sum(lhs > bound)),
            "min_log_slack": float(np.min(np.log(bound) - np.log(lhs)))}


def slowness_pairs(rng, n, d=1, scale=10.0, R=2.0**12):
    """Random pairs with the slowness premise satisfied: X' = X + T, g_{Ψ,X}(T) = t/R², t ∈ (0, 1]."""
    X = PhasePoint.from_array(rng.normal(0, scale, (n, 4 * d)))
    T = PhasePoint.from_array(rng.normal(0, 1, (n, 4 * d)))
    t = rng.uniform(0, 1, n)
    s = np.sqrt(t / gpsi_form(X, T)) / R
    T = PhasePoint.from_array(T.as_array() * s[:, None])
    return X, PhasePoint.from_array(X.as_array() + T.as_array())


def log_psi_monotone(X, ts):
    """Smallest d/dt log Ψ(tX) over t ∈ ts (Ψ nondecreasing along rays from 0)."""
    a, b = _sq(X.xi), _sq(X.p) ** 2 + _sq(X.eta) ** 2
    ts = np.asarray(ts)[:, None]
    # log Ψ(tX) = ½ log(1 + a t² + b t⁴)
    der = (a * ts + 2 * b * ts**3) / (1 + a * ts**2 + b * ts**4)
    return float(der.min())


# ---------------------------------------------------------------- operators on fibers

def w2_fiber(xi, c_g, basis):
    """W² = C_g + |ξ|² + C_g 𝒪² on one fiber (flat metric, Δ_H = Δ_q)."""
    if c_g < 1:
        raise ValueError("C_g must be >= 1")
    o = op_number(basis).matrix
    xi2 = float(np.sum(np.atleast_1d(xi) ** 2))
    return FiberOperator((c_g + xi2) * np.eye(basis.dim) + c_g * o @ o, basis, "W2", {"xi": xi2**0.5, "C_g": c_g})


def default_c_g(xis, basis, floor=1.0, max_power=20):
    """Smallest power of 2 making every w2_fiber on the ξ grid ⪰ floor."""
    for k in range(max_power + 1):
        c = 2.0**k
        if all(np.linalg.eigvalsh(w2_fiber(x, c, basis).matrix)[0] >= floor for x in xis):
            return c
    raise RuntimeError("no C_g <= 2^%d makes W² >= %g" % (max_power, floor))


def _as_fibers(u, xis):
    u = np.atleast_2d(np.asarray(u))
    xis = np.atleast_1d(np.asarray(xis, dtype=float))
    if u.shape[0] != len(xis):
        raise ValueError("need one ξ per fiber: %d fibers, %d frequencies" % (u.shape[0], len(xis)))
    return u, xis


def norm_ws(u, s, xis, basis):
    """Squared norm (ii): ‖𝒪^s u‖² + ‖|D_q|^s u‖², by diagonal functional calculus.

    :param basis: a HermiteBasis (𝒪 diagonal) or a SobolevGrid
    """
    if s < 0:
        raise ValueError("only s >= 0 is characterized here")
    u, xis = _as_fibers(u, xis)
    if isinstance(basis, HermiteBasis):
        osc = basis.multi_indices.sum(axis=1) + basis.p_dims / 2
        ou = u * osc[None, :] ** s
        weight = 1.0
    elif isinstance(basis, SobolevGrid):
        ou = basis.power(u, s)
        weight = basis.grid.spacing
    else:
        raise TypeError("representation has no diagonal calculus: %r" % type(basis))
    n2 = lambda v: float(np.sum(np.abs(v) ** 2)) * weight
    return n2(ou) + n2(np.abs(xis)[:, None] ** s * u)


def norm_ws1s2(u, s1, s2, xis, c_g, basis):
    """‖𝒪^{s1/2}(W²)^{s2/2} u‖ by simultaneous diagonalization (Hermite ⊗ Fourier)."""
    if not isinstance(basis, HermiteBasis):
        raise TypeError("W̃^{s1,s2} uses the Hermite basis")
    u, xis = _as_fibers(u, xis)
    osc = (basis.multi_indices.sum(axis=1) + basis.p_dims / 2)[None, :]
    w2 = c_g + xis[:, None] ** 2 + c_g * osc**2
    return float(np.sqrt(np.sum(np.abs(osc ** (s1 / 2) * w2 ** (s2 / 2) * u) ** 2)))


def _monomials(k):
    """(α, β, γ) with α + (β + γ)/2 <= k."""
    return [(a, bb, c) for a, bb, c in product(range(k + 1), range(2 * k + 1), range(2 * k + 1))
            if 2 * a + bb + c <= 2 * k]


def monomial_gram(k, xi, basis):
    """Gram matrix of norm (iv) on one fiber: Σ ξ^{2α}(p^β∂^γ)*(p^β∂^γ), 1D Hermite.

    Each word is applied in a basis padded by 2k modes, so ‖p^β∂^γ u‖ is
    exact for every u in the span of the first N modes.
    """
    if basis.p_dims != 1:
        raise ValueError("monomial norms are implemented for d = 1")
    n = basis.cutoff
    m = n + 2 * k
    gram = np.zeros((n, n))
    for a, bb, c in _monomials(k):
        w = word_1d(m, "p" * bb + "d" * c)[:, :n]
        gram += xi ** (2 * a) * (w.T @ w)
    return gram


def norm_monomial(u, k, xis, basis):
    """Squared norm (iv) for s = k: Σ_{α+(β+γ)/2<=k} ‖ξ^α p^β ∂_p^γ u‖²."""
    u, xis = _as_fibers(u, xis)
    return float(sum(np.vdot(v, monomial_gram(k, x, basis) @ v).real for v, x in zip(u, xis)))


@dataclass
class SobolevGrid:
    """Periodic p-grid with the spectral oscillator, for norms needing multiplication by θ_ℓ."""

    grid: PGrid

    def __post_init__(self):
        if self.grid.boundary != "periodic":
            raise ValueError("SobolevGrid needs a periodic PGrid")
        p = self.grid.nodes
        self.osc = -0.5 * self.grid.spectral_laplacian() + 0.5 * np.diag(p**2)
        self.osc = 0.5 * (self.osc + self.osc.T)
        self.evals, self.evecs = np.linalg.eigh(self.osc)

    @property
    def dim(self):
        return self.grid.points

    def power_matrix(self, s):
        return (self.evecs * self.evals**s) @ self.evecs.T

    def power(self, u, s):
        return (self.power_matrix(s) @ np.atleast_2d(u).T).T

    def hermite_frame(self, n):
        """Samples of h_0..h_{n-1}, orthonormal for the grid inner product."""
        h = hermite_functions(n, self.grid.nodes).T * np.sqrt(self.grid.spacing)
        q, r = np.linalg.qr(h)
        return q * np.sign(np.diag(r))[None, :] / np.sqrt(self.grid.spacing)


def dyadic_norm(u, s, xis, sgrid, partition=None):
    """Squared norm (iii): Σ_ℓ ‖θ_ℓ(|p|²) u‖²_{W̃^s}, with the (ii) norm inside."""
    part = partition or DyadicPartition()
    u, xis = _as_fibers(u, xis)
    p = sgrid.grid.nodes
    total = 0.0
    for ell in part.active_levels(np.abs(p).max()):
        th = part.member(ell, p**2)
        total += norm_ws(u * th[None, :], s, xis, sgrid)
    return total


def _range(a, b):
    ev = eigh(a, b, eigvals_only=True)
    return float(ev[0]), float(ev[-1])


def equivalence_constants(s, n, xis, sgrid=None, partition=None):
    """Two-sided constants between norm (ii) and norms (iii), (iv) on span{h_0..h_{n-1}}.

    Worst cases over the subspace are generalized eigenvalues of the two
    Gram matrices, so no sampling is involved.

    :return: dict {"iv": (lo, hi), "iii": (lo, hi)} of ratio ranges (other / (ii)),
        the "iv" entry only for integer s
    """
    basis = HermiteBasis(1, n)
    osc = np.arange(n) + 0.5
    out = {}
    if float(s).is_integer():
        lo, hi = np.inf, 0.0
        for x in xis:
            g2 = np.diag(osc ** (2 * s) + abs(x) ** (2 * s))
            a, b = _range(monomial_gram(int(s), x, basis), g2)
            lo, hi = min(lo, a), max(hi, b)
        out["iv"] = (lo, hi)
    if sgrid is not None:
        part = partition or DyadicPartition()
        p = sgrid.grid.nodes
        v = sgrid.hermite_frame(n)
        dx = sgrid.grid.spacing
        ps = sgrid.power_matrix(s)
        ov = ps @ v
        g_ii0 = dx * ov.T @ ov
        gram_l = np.zeros((n, n))
        for ell in part.active_levels(np.abs(p).max()):
            tv = part.member(ell, p**2)[:, None] * v
            otv = ps @ tv
            gram_l += dx * otv.T @ otv
        lo, hi = np.inf, 0.0
        eye = dx * v.T @ v
        for x in xis:
            xs = abs(x) ** (2 * s)
            # Σ_ℓ ‖θ_ℓ u‖² = ‖u‖², so the |ξ|^{2s} part is identical on both sides
            a, b = _range(gram_l + xs * eye, g_ii0 + xs * eye)
            lo, hi = min(lo, a), max(hi, b)
        out["iii"] = (lo, hi)
    return out


def equivalence_table(s_values, cutoffs, xis, sgrid):
    """Rows (s, N, norm, C_lower, C_upper) with C the two-sided equivalence constants."""
    rows = []
    for s in s_values:
        for n in cutoffs:
            res = equivalence_constants(s, n, xis, sgrid)
            for name in sorted(res):
                lo, hi = res[name]
                rows.append((s, n, name, lo, hi))
    return rows


def embedding_check(u, s1, s2, xis, c_g, basis):
    """‖u‖_{W̃^{s1,s2}} <= ‖u‖_{W̃^{0,s2+s1/2}}: returns (lhs, rhs)."""
    return norm_ws1s2(u, s1, s2, xis, c_g, basis), norm_ws1s2(u, 0, s2 + s1 / 2, xis, c_g, basis)
