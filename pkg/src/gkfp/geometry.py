"""Base metrics, Christoffel symbols, normal charts and the scaled coefficients f^{ij}_k."""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.linalg import sqrtm
from scipy.optimize import brentq

from ._jet import Jet


@dataclass
class MetricField:
    """Riemannian metric g_ij(q) on R^d (d = 1 or 2) with analytic derivatives.

    g(q) -> (d, d); dg(q)[a, i, j] = ∂_a g_ij; d2g(q)[a, b, i, j] = ∂_a ∂_b g_ij.
    """

    dim: int
    g: Callable
    dg: Callable
    d2g: Callable
    name: str = "custom"
    flat_outside: Optional[float] = None

    def inv(self, q):
        return np.linalg.inv(self.g(q))

    def norm_p(self, q, p):
        """|p|_q^2 = g^{ij}(q) p_i p_j."""
        p = np.atleast_1d(p)
        return p @ self.inv(q) @ p


def _diag_metric(name, comps):
    """Diagonal metric from components returning (value, gradient, hessian)."""
    d = len(comps)

    def g(q):
        q = np.atleast_1d(np.asarray(q, dtype=float))
        return np.diag([c(q)[0] for c in comps])

    def dg(q):
        q = np.atleast_1d(np.asarray(q, dtype=float))
        out = np.zeros((d, d, d))
        for i, c in enumerate(comps):
            out[:, i, i] = c(q)[1]
        return out

    def d2g(q):
        q = np.atleast_1d(np.asarray(q, dtype=float))
        out = np.zeros((d, d, d, d))
        for i, c in enumerate(comps):
            out[:, :, i, i] = c(q)[2]
        return out

    return MetricField(d, g, dg, d2g, name)


def flat_metric(d=1):
    one = lambda q: (1.0, np.zeros(d), np.zeros((d, d)))
    return _diag_metric("flat", [one] * d)


def sin1d_metric(eps):
    """g = 1 + ε sin q on the circle."""
    if abs(eps) >= 1:
        raise ValueError("need |eps| < 1 for a positive metric")
    comp = lambda q: (1 + eps * np.sin(q[0]), np.array([eps * np.cos(q[0])]), np.array([[-eps * np.sin(q[0])]]))
    return _diag_metric("sin1d:%g" % eps, [comp])


def conformal1d_metric(phi, dphi, d2phi):
    """g = exp(2φ(q)); the single Christoffel symbol is φ'."""
    def comp(q):
        e = np.exp(2 * phi(q[0]))
        return e, np.array([2 * dphi(q[0]) * e]), np.array([[(2 * d2phi(q[0]) + 4 * dphi(q[0]) ** 2) * e]])
    return _diag_metric("conformal1d", [comp])


def torus2d_metric(eps):
    """Diagonal perturbation of the flat torus:
    g = diag(1 + ε sin q1 cos q2, 1 + ε cos(q1 + q2))."""
    if abs(eps) >= 1:
        raise ValueError("need |eps| < 1 for a positive metric")

    def c1(q):
        s1, c1_, s2, c2 = np.sin(q[0]), np.cos(q[0]), np.sin(q[1]), np.cos(q[1])
        val = 1 + eps * s1 * c2
        grad = eps * np.array([c1_ * c2, -s1 * s2])
        hess = eps * np.array([[-s1 * c2, -c1_ * s2], [-c1_ * s2, -s1 * c2]])
        return val, grad, hess

    def c2(q):
        t = q[0] + q[1]
        val = 1 + eps * np.cos(t)
        grad = -eps * np.sin(t) * np.ones(2)
        hess = -eps * np.cos(t) * np.ones((2, 2))
        return val, grad, hess

    return _diag_metric("torus2d:%g" % eps, [c1, c2])


def metric_from_preset(spec):
    """Parse 'flat', 'flat2', 'sin1d:eps' or 'torus2d:eps'."""
    name, _, arg = spec.partition(":")
    if name == "flat":
        return flat_metric(1)
    if name == "flat2":
        return flat_metric(2)
    if name == "sin1d":
        return sin1d_metric(float(arg or 0.1))
    if name == "torus2d":
        return torus2d_metric(float(arg or 0.1))
    raise ValueError("unknown metric preset %r" % spec)


def christoffel(metric, q):
    """Γ[l, j, k] = ½ g^{la}(∂_j g_ak + ∂_k g_aj − ∂_a g_jk)."""
    ginv = np.linalg.inv(metric.g(q))
    dg = metric.dg(q)
    low = dg.transpose(1, 0, 2) + dg.transpose(1, 2, 0) - dg  # [a, j, k]
    return 0.5 * np.einsum("la,ajk->ljk", ginv, low)


def christoffel_deriv(metric, q):
    """∂_m Γ^l_jk as array [m, l, j, k]."""
    ginv = np.linalg.inv(metric.g(q))
    dg, d2g = metric.dg(q), metric.d2g(q)
    dginv = -np.einsum("kb,mbc,ca->mka", ginv, dg, ginv)
    low = dg.transpose(1, 0, 2) + dg.transpose(1, 2, 0) - dg
    dlow = d2g.transpose(0, 2, 1, 3) + d2g.transpose(0, 2, 3, 1) - d2g  # [m, a, j, k]
    return 0.5 * (np.einsum("mla,ajk->mljk", dginv, low) + np.einsum("la,majk->mljk", ginv, dlow))


def check_metric(metric, qs, step=1e-5):
    """Largest mismatch between dg and centred differences of g over qs."""
    err = 0.0
    for q in qs:
        q = np.atleast_1d(np.asarray(q, dtype=float))
        if np.any(np.linalg.eigvalsh(metric.g(q)) <= 0):
            raise ValueError("metric not positive definite at %s" % q)
        for a in range(metric.dim):
            e = np.zeros(metric.dim)
            e[a] = step
            fd = (metric.g(q + e) - metric.g(q - e)) / (2 * step)
            err = max(err, np.abs(fd - metric.dg(q)[a]).max())
    return err


def inverse_divergence_defect(metric, q, step=1e-5):
    """Mismatch in ∂_i g^{ij} = −Γ^i_ik g^kj − Γ^j_ik g^ik, with ∂ by centred differences."""
    q = np.atleast_1d(np.asarray(q, dtype=float))
    d = metric.dim
    lhs = np.zeros(d)
    for i in range(d):
        e = np.zeros(d)
        e[i] = step
        lhs += (metric.inv(q + e)[i] - metric.inv(q - e)[i]) / (2 * step)
    gam, ginv = christoffel(metric, q), metric.inv(q)
    rhs = -np.einsum("iik,kj->j", gam, ginv) - np.einsum("jik,ik->j", gam, ginv)
    return np.abs(lhs - rhs).max()


def _smoothstep(t, order=2):
    """C^∞ step: 0 for t <= 0, 1 for t >= 1, with derivatives."""
    tj = Jet.variable(np.clip(t, 1e-3, 1 - 1e-3), order)
    f = lambda s: (-1 / s).exp()
    s = f(tj) / (f(tj) + f(1 - tj))
    d = s.derivs()
    d[:, t <= 1e-3] = 0
    d[:, t >= 1 - 1e-3] = 0
    d[0, t >= 1 - 1e-3] = 1
    # the clipped band is flat to far below double precision
    return d


def blend_flat(metric, radius, width=1.0):
    """g_b = χ g + (1 − χ) Id, with χ(|q|) = 1 inside `radius` and 0 beyond radius + width."""

    def chi(q):
        q = np.atleast_1d(np.asarray(q, dtype=float))
        r = np.linalg.norm(q)
        c0, c1, c2 = _smoothstep(np.array([(radius + width - r) / width]))[:, 0]
        c1, c2 = -c1 / width, c2 / width**2
        d = len(q)
        if r == 0 or (c1 == 0 and c2 == 0):
            return c0, np.zeros(d), np.zeros((d, d))
        u = q / r
        grad = c1 * u
        hess = c2 * np.outer(u, u) + c1 * (np.eye(d) - np.outer(u, u)) / r
        return c0, grad, hess

    eye = lambda: np.eye(metric.dim)

    def g(q):
        c, _, _ = chi(q)
        return c * metric.g(q) + (1 - c) * eye()

    def dg(q):
        c, gr, _ = chi(q)
        return c * metric.dg(q) + np.einsum("a,ij->aij", gr, metric.g(q) - eye())

    def d2g(q):
        c, gr, he = chi(q)
        dgq = metric.dg(q)
        return (c * metric.d2g(q) + np.einsum("a,bij->abij", gr, dgq) + np.einsum("b,aij->abij", gr, dgq)
                + np.einsum("ab,ij->abij", he, metric.g(q) - eye()))

    return MetricField(metric.dim, g, dg, d2g, metric.name + "+flat@%g" % radius, radius + width)


# ---------------------------------------------------------------- charts

@dataclass
class NormalChart:
    """Chart q = backward(q̃) around q0 with pulled-back metric g̃.

    method "normal": arclength (1D) or geodesic exponential map (2D).
    method "affine" (1D only): q̃ = (q − q0)√g(q0); normal only where g'(q0) = 0.
    """

    metric: MetricField
    center: np.ndarray
    method: str
    radius: float
    _frame: np.ndarray = field(default=None, repr=False)

    # -- maps
    def forward(self, q):
        q = np.atleast_1d(np.asarray(q, dtype=float))
        if self.metric.dim == 1:
            if self.method == "affine":
                return (q - self.center) * np.sqrt(self.metric.g(self.center)[0, 0])
            val, _ = quad(lambda s: np.sqrt(self.metric.g(np.array([s]))[0, 0]), self.center[0], q[0],
                          epsabs=1e-13, epsrel=1e-12, limit=200)
            return np.array([val])
        qt = np.linalg.solve(self._frame, q - self.center)
        for _ in range(50):
            x, jac = self._exp(qt)
            step = np.linalg.solve(jac, q - x)
            qt = qt + step
            if np.linalg.norm(step) < 1e-13:
                break
        else:
            raise RuntimeError("normal coordinate inversion did not converge")
        return qt

    def backward(self, qt):
        qt = np.atleast_1d(np.asarray(qt, dtype=float))
        if np.linalg.norm(qt) > self.radius * (1 + 1e-12):
            raise ValueError("point %s outside chart radius %g" % (qt, self.radius))
        if self.metric.dim == 1:
            if self.method == "affine":
                return self.center + qt / np.sqrt(self.metric.g(self.center)[0, 0])
            if qt[0] == 0:
                return self.center.copy()
            span = abs(qt[0]) / np.sqrt(self.metric.g(self.center)[0, 0])
            while True:
                lo, hi = self.center[0] - 2 * span - 1, self.center[0] + 2 * span + 1
                flo, fhi = self.forward(lo)[0] - qt[0], self.forward(hi)[0] - qt[0]
                if flo < 0 < fhi:
                    break
                span *= 2
            root = brentq(lambda s: self.forward(s)[0] - qt[0], lo, hi, xtol=1e-15, rtol=1e-15)
            return np.array([root])
        return self._exp(qt)[0]

    # -- 1D pullback through the chart map derivatives q', q'', q'''
    def _map_derivs_1d(self, qt):
        q = self.backward(qt)
        g0 = self.metric.g(self.center)[0, 0]
        if self.method == "affine":
            return q, 1 / np.sqrt(g0), 0.0, 0.0
        g, dg, d2g = self.metric.g(q)[0, 0], self.metric.dg(q)[0, 0, 0], self.metric.d2g(q)[0, 0, 0, 0]
        q1 = g ** -0.5
        q2 = -0.5 * dg / g**2
        q3 = -0.5 * (d2g * q1 / g**2 - 2 * dg**2 * q1 / g**3)
        return q, q1, q2, q3

    def gt(self, qt):
        if self.metric.dim == 1:
            q, q1, _, _ = self._map_derivs_1d(qt)
            return np.array([[self.metric.g(q)[0, 0] * q1**2]])
        x, jac = self._exp(np.atleast_1d(qt))
        return jac.T @ self.metric.g(x) @ jac

    def dgt(self, qt):
        if self.metric.dim == 1:
            q, q1, q2, _ = self._map_derivs_1d(qt)
            g, dg = self.metric.g(q)[0, 0], self.metric.dg(q)[0, 0, 0]
            return np.array([[[dg * q1**3 + 2 * g * q1 * q2]]])
        return self._fd(self.gt, np.atleast_1d(qt), 1e-3)

    def d2gt(self, qt):
        if self.metric.dim == 1:
            q, q1, q2, q3 = self._map_derivs_1d(qt)
            g, dg, d2g = self.metric.g(q)[0, 0], self.metric.dg(q)[0, 0, 0], self.metric.d2g(q)[0, 0, 0, 0]
            val = d2g * q1**4 + 5 * dg * q1**2 * q2 + 2 * g * q2**2 + 2 * g * q1 * q3
            return np.array([[[[val]]]])
        return self._fd(self.dgt, np.atleast_1d(qt), 1e-2)

    @staticmethod
    def _fd(fun, x, h):
        """Fourth-order centred differences along each axis, stacked first."""
        out = []
        for a in range(len(x)):
            e = np.zeros(len(x))
            e[a] = h
            out.append((-fun(x + 2 * e) + 8 * fun(x + e) - 8 * fun(x - e) + fun(x - 2 * e)) / (12 * h))
        return np.array(out)

    def as_metric(self):
        return MetricField(self.metric.dim, self.gt, self.dgt, self.d2gt, "chart(%s)" % self.metric.name)

    # -- 2D exponential map with its Jacobian (Jacobi fields)
    def _exp(self, qt):
        d = self.metric.dim
        frame = self._frame

        def rhs(_, y):
            x, v = y[:d], y[d:2 * d]
            jj = y[2 * d:2 * d + d * d].reshape(d, d)
            kk = y[2 * d + d * d:].reshape(d, d)
            gam = christoffel(self.metric, x)
            dgam = christoffel_deriv(self.metric, x)
            acc = -np.einsum("kij,i,j->k", gam, v, v)
            kdot = (-np.einsum("mkij,ma,i,j->ka", dgam, jj, v, v)
                    - 2 * np.einsum("kij,ia,j->ka", gam, kk, v))
            return np.concatenate([v, acc, kk.ravel(), kdot.ravel()])

        y0 = np.concatenate([self.center, frame @ qt, np.zeros(d * d), frame.ravel()])
        sol = solve_ivp(rhs, (0, 1), y0, method="DOP853", rtol=1e-12, atol=1e-13)
        if not sol.success:
            raise RuntimeError("geodesic solve failed: %s" % sol.message)
        y = sol.y[:, -1]
        return y[:d], y[2 * d:2 * d + d * d].reshape(d, d)

    # -- certificates
    def bound_constants(self, n=41):
        """Sampled C, C' with |g̃ − Id| <= C|q̃|^2 and |Γ̃| <= C'|q̃| on the chart ball."""
        pts = _ball_samples(self.metric.dim, self.radius, n)
        pts = pts[np.linalg.norm(pts, axis=1) > 1e-9]
        chart_metric = self.as_metric()
        c_g, c_gam = 0.0, 0.0
        for x in pts:
            r = np.linalg.norm(x)
            c_g = max(c_g, np.abs(self.gt(x) - np.eye(self.metric.dim)).max() / r**2)
            c_gam = max(c_gam, np.abs(christoffel(chart_metric, x)).max() / r)
        return c_g, c_gam


def _ball_samples(d, radius, n):
    t = np.linspace(-radius, radius, n)
    if d == 1:
        return t[:, None]
    xx, yy = np.meshgrid(t, t, indexing="ij")
    pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
    return pts[np.linalg.norm(pts, axis=1) <= radius]


def normal_chart(metric, q0, method="normal", radius=1.0, tol=1e-8):
    """Build a chart with g̃(0) = Id and dg̃(0) = 0.

    :param radius: validity radius in chart units; in 2D it must stay below
        the injectivity radius, which is not computed here.
    """
    q0 = np.atleast_1d(np.asarray(q0, dtype=float))
    if method not in ("normal", "affine"):
        raise ValueError("method must be 'normal' or 'affine'")
    if method == "affine":
        if metric.dim != 1:
            raise ValueError("affine charts are 1D only")
        if abs(metric.dg(q0)[0, 0, 0]) > tol:
            raise ValueError("affine chart needs g'(q0) = 0; got %g" % metric.dg(q0)[0, 0, 0])
    frame = np.real(np.linalg.inv(sqrtm(metric.g(q0))))
    return NormalChart(metric, q0, method, radius, frame)


# ---------------------------------------------------------------- f^{ij}_k

def formoff(chart_metric, q, ell):
    """f^{ij}_k(q, ℓ) = 2^ℓ g_{n'j}(y)(∂_i g^{kn'}(y) + Γ^{n'}_{in}(y) g^{nk}(y)), y = 2^{-ℓ}q.

    :return: array f[i, j, k]
    """
    y = 2.0 ** -ell * np.atleast_1d(np.asarray(q, dtype=float))
    g = chart_metric.g(y)
    ginv = np.linalg.inv(g)
    dginv = -np.einsum("ka,iab,bn->ikn", ginv, chart_metric.dg(y), ginv)  # ∂_i g^{kn}
    gam = christoffel(chart_metric, y)
    inner = dginv.transpose(0, 2, 1) + np.einsum("min,nk->imk", gam, ginv)  # [i, n', k]
    return 2.0 ** ell * np.einsum("mj,imk->ijk", g, inner)


@dataclass
class ScaledCoeffs:
    ell: int
    A: float
    f: Callable
    sup_bound: float
    c1: float
    ball_radius: float


def scaled_coeffs(chart, ell, A, c_hat=2.0, n=401):
    """f^{ij}_k on the ball B(0, ĉA) with a certified sup bound.

    The bound is the sampled maximum plus a Lipschitz allowance of half a
    sample spacing, using the largest observed difference quotient.
    """
    if ell < -1 or A <= 0:
        raise ValueError("need ell >= -1 and A > 0")
    rad = c_hat * A
    if 2.0 ** -ell * rad > chart.radius:
        raise ValueError("2^-ell * %g exceeds chart radius %g" % (rad, chart.radius))
    cm = chart.as_metric()
    fun = lambda q: formoff(cm, q, ell)
    d = chart.metric.dim
    pts = _ball_samples(d, rad, n if d == 1 else max(11, int(np.sqrt(n))))
    vals = np.array([np.abs(fun(x)).max() for x in pts])
    spacing = 2 * rad / ((n if d == 1 else max(11, int(np.sqrt(n)))) - 1)
    if d == 1:
        lip = np.abs(np.diff(vals)).max() / spacing if len(vals) > 1 else 0.0
    else:
        lip = 0.0
        for a in range(len(pts)):
            near = np.linalg.norm(pts - pts[a], axis=1)
            mask = (near > 0) & (near < 1.01 * spacing)
            if mask.any():
                lip = max(lip, (np.abs(vals[mask] - vals[a]) / near[mask]).max())
    sup = vals.max() + lip * spacing * np.sqrt(d) / 2
    return ScaledCoeffs(ell, A, fun, sup, sup / A, rad)
