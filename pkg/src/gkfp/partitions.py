"""Dyadic and grid quadratic partitions of unity and the localization inequalities."""

from dataclasses import dataclass

import numpy as np

from ._jet import Jet
from .geometry import christoffel


def bump_jet(t, lo, hi, order=4):
    """exp(−1/((t−lo)(hi−t))) on (lo, hi), zero outside, with derivatives as a Jet."""
    t = np.asarray(t, dtype=float)
    inside = (t > lo) & (t < hi)
    mid = 0.5 * (lo + hi)
    tj = Jet.variable(np.where(inside, t, mid), order)
    val = (-1 / ((tj - lo) * (hi - tj))).exp()
    return val.where(inside, 0.0)


def _bump_ok(t, lo, hi):
    return (t > lo) & (t < hi)


@dataclass
class DyadicPartition:
    """θ̃(4|p|²) and θ(4^{-ℓ}|p|²), ℓ = 0..ell_max, with Σ squares = 1.

    θ = bump/√Θ with Θ(s) = Σ_k bump²(4^k s) is the square-root
    normalization; θ̃(u) equals 1 for u <= 1 and θ(u) on [1, 4].
    """

    ell_max: int = 12
    lo: float = 0.25
    hi: float = 4.0

    def theta_jet(self, s, order=4):
        s = np.asarray(s, dtype=float)
        b0 = bump_jet(s, self.lo, self.hi, order)
        total = b0 * b0
        for k in (-1, 1):
            bk = bump_jet(s * 4.0 ** k, self.lo, self.hi, order)
            # chain rule for s -> 4^k s
            scale = 4.0 ** (k * np.arange(order + 1))
            bk = Jet(bk.c * scale.reshape((-1,) + (1,) * s.ndim))
            total = total + bk * bk
        inside = _bump_ok(s, self.lo, self.hi)
        safe = total.where(inside, 1.0)
        return (b0 / safe.sqrt()).where(inside, 0.0)

    def theta_tilde_jet(self, u, order=4):
        u = np.asarray(u, dtype=float)
        th = self.theta_jet(u, order)
        one = Jet.const(1.0, th)
        one.c[1:] = 0
        return th.where(u >= 1, one)

    def theta(self, s):
        return self.theta_jet(s, 0).c[0]

    def theta_tilde(self, u):
        return self.theta_tilde_jet(u, 0).c[0]

    @property
    def levels(self):
        return list(range(-1, self.ell_max + 1))

    def member(self, ell, x):
        """θ_ℓ as a function of x = |p|²_q."""
        x = np.asarray(x, dtype=float)
        if ell == -1:
            return self.theta_tilde(4 * x)
        return self.theta(4.0 ** -ell * x)

    def member_jet(self, ell, x, order=2):
        """Derivatives of θ_ℓ with respect to x = |p|²."""
        x = np.asarray(x, dtype=float)
        if ell == -1:
            base, a = self.theta_tilde_jet(4 * x, order), 4.0
        else:
            base, a = self.theta_jet(4.0 ** -ell * x, order), 4.0 ** -ell
        scale = a ** np.arange(order + 1)
        return Jet(base.c * scale.reshape((-1,) + (1,) * x.ndim))

    def member_p_derivs(self, ell, p):
        """θ_ℓ(p²), ∂_p, ∂²_p for a flat 1D fiber."""
        j = self.member_jet(ell, p**2, 2).derivs()
        return j[0], 2 * p * j[1], 2 * j[1] + 4 * p**2 * j[2]

    def identity_defect(self, x):
        """max |θ̃²(4x) + Σ_ℓ θ²(4^{-ℓ}x) − 1| over the sample x = |p|²."""
        tot = sum(self.member(ell, x) ** 2 for ell in self.levels)
        return np.abs(tot - 1).max()

    def active_levels(self, p_max):
        """Levels with a member that is nonzero somewhere on |p| <= p_max."""
        return [ell for ell in self.levels if ell == -1 or 2.0 ** (ell - 1) < p_max]

    def derivative_constants(self, order=4, n=4001):
        """C_α = sup_ℓ sup_p |∂_p^α θ_ℓ| 2^{αℓ} on a flat 1D fiber, α = 0..order.

        Uses the exact chain rule of θ(4^{-ℓ}p²); by self-similarity the
        sup is attained on ℓ in {−1, 0, 1} and reported over those.
        """
        consts = np.zeros(order + 1)
        for ell in (-1, 0, 1, 2):
            scale = 2.0 ** max(ell, 0)
            p = np.linspace(0, 4 * scale, n)
            jets = self.member_jet(ell, p**2, order)
            # derivatives of the composite p -> θ_ℓ(p²) via a jet in p
            pj = Jet.variable(p, order)
            comp = _compose(jets, pj * pj)
            d = comp.derivs()
            for a in range(order + 1):
                consts[a] = max(consts[a], np.abs(d[a]).max() * 2.0 ** (a * max(ell, 0)))
        return consts

    def table(self, t):
        """Rows (t, θ̃², θ_0², ..., θ_{ell_max}², sum) with t = |p|."""
        cols = [t] + [self.member(ell, t**2) ** 2 for ell in self.levels]
        cols.append(sum(cols[1:]))
        return np.column_stack(cols)


def _compose(outer, inner):
    """Jet of f∘g given the jet of f evaluated at g(x) and the jet of g."""
    order = outer.order
    dg = inner - inner.c[0]
    out = Jet.const(0.0, inner)
    power = Jet.const(1.0, inner)
    power.c[1:] = 0
    for k in range(order + 1):
        out = out + power * outer.c[k]
        power = power * dg
    return out


def transport_derivative(metric, q, p, fun, dfun):
    """𝒴 applied to F(q, p) = fun(|p|²_q): g^{ij}p_j(∂_qi + Γ^m_ik p_m ∂_pk) F.

    :param dfun: derivative of fun with respect to its argument
    """
    q, p = np.atleast_1d(q), np.atleast_1d(p)
    ginv = metric.inv(q)
    dginv = -np.einsum("ka,iab,bn->ikn", ginv, metric.dg(q), ginv)
    gam = christoffel(metric, q)
    x = p @ ginv @ p
    dq = np.einsum("iab,a,b->i", dginv, p, p)  # ∂_qi |p|²
    dp = 2 * ginv @ p  # ∂_pk |p|²
    v = ginv @ p
    drift = dq + np.einsum("mik,m,k->i", gam, p, dp)
    return dfun(x) * (v @ drift)


@dataclass
class GridPartition:
    """ψ_{m,ℓ,A}(q) = ψ((q − A2^{-ℓ}m)/(A2^{-ℓ})), Σ_m ψ² = 1; ψ = w0/√(Σ_m w0²(·−m)).

    :param half_support: w0 is a bump on (−s, s), 1/2 < s <= 1
    """

    A: float = 1.0
    ell: int = 0
    half_support: float = 1.0
    dim: int = 1

    def __post_init__(self):
        if not 0.5 < self.half_support <= 1:
            raise ValueError("half_support must lie in (1/2, 1]; otherwise the normalizer vanishes")
        if self.A <= 0 or self.ell < -1:
            raise ValueError("need A > 0 and ell >= -1")

    @property
    def cell(self):
        return self.A * 2.0 ** -self.ell

    def psi_jet(self, x, order=2):
        x = np.asarray(x, dtype=float)
        s = self.half_support
        w = lambda y: bump_jet(y, -s, s, order)
        total = Jet.const(0.0, Jet.variable(x, order))
        for m in (-1, 0, 1):
            wm = w(x - m)
            total = total + wm * wm
        num = w(x)
        inside = np.abs(x) < s
        return (num / total.where(inside, 1.0).sqrt()).where(inside, 0.0)

    def psi(self, x):
        return self.psi_jet(x, 0).c[0]

    def member(self, m, q, order=1):
        """Values and q-derivatives of ψ_{m,ℓ,A}, shape (order+1, ...)."""
        c = self.cell
        q = np.asarray(q, dtype=float)
        d = self.psi_jet((q - c * m) / c, order).derivs()
        return d / c ** np.arange(order + 1).reshape((-1,) + (1,) * q.ndim)

    def periodic_members(self, q, length, order=1):
        """Members on a torus of the given length (must be a multiple of the cell)."""
        k = length / self.cell
        if abs(k - round(k)) > 1e-9 or round(k) < 3:
            raise ValueError("torus length must be an integer multiple (>= 3) of the cell A 2^-ell")
        k = int(round(k))
        out = []
        for m in range(k):
            acc = 0
            for wrap in (-1, 0, 1):
                acc = acc + self.member(m, q + wrap * length, order)
            out.append(acc)
        return out

    def identity_defect(self, x):
        tot = 0
        for m in range(int(np.floor(x.min())) - 2, int(np.ceil(x.max())) + 3):
            tot = tot + self.psi(x - m) ** 2
        return np.abs(tot - 1).max()

    def derivative_constants(self, order=2, n=4001):
        """C_β = sup |ψ^{(β)}|; equal to sup |(A2^{-ℓ})^β ∂^β ψ_{m,ℓ,A}| by scaling."""
        x = np.linspace(-1, 1, n)
        d = self.psi_jet(x, order).derivs()
        return np.abs(d).max(axis=1)


# ---------------------------------------------------------------- localization inequalities

def _as_apply(P):
    if callable(P):
        return P
    mat = np.asarray(P)
    return lambda u: mat @ u


def localization_bounds(P, chis, u, comm1=None, comm2=None, triple_tol=None, triple_defect=None):
    """Evaluate both localization inequalities for a quadratic partition.

    :param P: matrix or callable u -> Pu
    :param chis: multiplier samples (one array per member, acting diagonally)
    :param comm1: optional callable (k, v) -> [P, χ_k]v; matrix commutators otherwise
    :param comm2: optional callable (k, l, v) -> [[P, χ_k], χ_l]v
    :param triple_defect: size of the largest triple commutator, checked against triple_tol
    :return: dict with both sides, the r of the equivalence hypothesis and pass flags
    """
    apply = _as_apply(P)
    if triple_defect is not None and triple_tol is not None and triple_defect > triple_tol:
        raise ValueError("triple commutator %.3g exceeds tolerance %.3g: operator of order > 2" % (triple_defect, triple_tol))
    if comm1 is None:
        comm1 = lambda k, v: apply(chis[k] * v) - chis[k] * apply(v)
    if comm2 is None:
        comm2 = lambda k, l, v: comm1(k, chis[l] * v) - chis[l] * comm1(k, v)
    sq = lambda v: float(np.vdot(v, v).real)
    lhs = sq(apply(u))
    s0 = sum(sq(apply(c * u)) for c in chis)
    n = len(chis)
    s1, s2 = 0.0, 0.0
    for j in range(n):
        cu = chis[j] * u
        if not np.any(cu):
            continue
        for k in range(n):
            s1 += sq(comm1(k, cu))
            for l in range(n):
                s2 += sq(comm2(k, l, cu))
    upper = 2 * s0 + 4 * s1 + 8 * s2
    lower = 0.5 * s0 - 2 * s1 - 4 * s2
    r = 2 * (2 * s1 + 4 * s2) / s0 if s0 > 0 else np.inf
    out = {"norm2": lhs, "sum_local": s0, "comm1": s1, "comm2": s2, "upper": upper, "lower": lower,
           "upper_ok": lhs <= upper * (1 + 1e-12), "lower_ok": lhs >= lower - 1e-12 * abs(lower), "r": r}
    if r < 1:
        out["equiv_upper"] = (2 + r) * s0
        out["equiv_lower"] = (1 - r) / 2 * s0
        out["equiv_ok"] = out["equiv_lower"] * (1 - 1e-12) <= lhs <= out["equiv_upper"] * (1 + 1e-12)
    return out


def triple_commutator_norm(mat, chis, max_triples=None):
    """Largest spectral norm of [[[P, χ_a], χ_b], χ_c] over member triples."""
    mat = np.asarray(mat)
    worst = 0.0
    idx = range(len(chis))
    for a in idx:
        ca = mat * chis[a][None, :] - chis[a][:, None] * mat
        for b in idx:
            cb = ca * chis[b][None, :] - chis[b][:, None] * ca
            if not np.any(cb):
                continue
            for c in idx:
                cc = cb * chis[c][None, :] - chis[c][:, None] * cb
                worst = max(worst, np.linalg.norm(cc, 2))
    return worst


def dyadic_equivalence(op_builder, chis, b, c_grid, cells):
    """Smallest C in c_grid for which 1/4·Σ‖Lθu‖² <= ‖Lu‖² <= 5/2·Σ‖Lθu‖² for all u.

    Worst cases over u are generalized eigenvalues of (L*L, Σ θ L*L θ).

    :param op_builder: (kappa, cell) -> matrix L = κ/b² + P_b − iλ/b on one fiber
    :param cells: list of fiber parameters (e.g. (ξ, λ) pairs)
    :return: (C or None, per-C records)
    """
    from scipy.linalg import eigh
    records = []
    for c in c_grid:
        kappa = c * (1 + b**2)
        lo, hi = np.inf, 0.0
        for cell in cells:
            L = op_builder(kappa, cell)
            lhs = L.conj().T @ L
            rhs = sum((L * th[None, :]).conj().T @ (L * th[None, :]) for th in chis)
            ev = eigh(lhs, rhs, eigvals_only=True)
            lo, hi = min(lo, ev[0]), max(hi, ev[-1])
        ok = lo >= 0.25 and hi <= 2.5
        records.append({"C": c, "kappa": kappa, "ratio_min": lo, "ratio_max": hi,
                        "margin": min(lo - 0.25, 2.5 - hi), "pass": ok})
        if ok:
            return c, records
    return None, records


def grid_error_bound(P, members, u, A, b, ell):
    """Both inequalities of the grid localization with the smallest admissible C_{g,ψ}.

    :param P: GridOperator for κ/b² + P_{b,ℓ} − iλ/b
    :param members: list of (ψ_m samples, ψ_m' samples) on the q-grid
    :return: dict with ‖Lu‖², Σ‖Lψu‖², the commutator energy and C_{g,ψ}
    """
    sq = lambda v: float(np.vdot(v, v).real)
    n_fib = P.n_fiber
    lu = sq(P.apply(u))
    loc, comm = 0.0, 0.0
    weight = 0.0
    for psi, dpsi in members:
        mu = (u.reshape(-1, n_fib) * psi[:, None]).reshape(-1)
        loc += sq(P.apply(mu))
        weight += sq(mu)
        cp = P.commutator_q(dpsi)
        for psi2, _ in members:
            comm += sq(cp.apply((u.reshape(-1, n_fib) * psi2[:, None]).reshape(-1)))
    scale = 4.0 ** (2 * ell) * weight / (A**2 * b**2)
    # smallest C making both displayed inequalities hold
    need_lower = (0.5 * loc - lu) / scale
    need_upper = (lu - 2 * loc) / scale
    c_needed = max(need_lower, need_upper, 0.0)
    return {"norm2": lu, "sum_local": loc, "comm_energy": comm, "scale": scale, "C": c_needed,
            "comm_ratio": comm / scale if scale > 0 else 0.0}
