"""Model operators: 𝒪, P̂_{b,h,f}, P_{b,ℓ} on a q-grid, scaling and rotation reductions."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import block_diag

from .basis import FiberOperator, HermiteBasis, PGrid, hermite_functions
from .geometry import MetricField, christoffel


@dataclass(frozen=True)
class GkfpParams:
    """b > 0, shift κ_b, spectral parameter λ and, when ℓ-derived, h = 1/(2^{2ℓ} b)."""

    b: float
    kappa: float = 0.0
    lam: float = 0.0
    h: Optional[float] = None
    ell: Optional[int] = None

    def __post_init__(self):
        if self.b <= 0:
            raise ValueError("b must be positive")
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")
        if self.ell is not None and self.h is None:
            object.__setattr__(self, "h", 1.0 / (4.0 ** self.ell * self.b))

    @classmethod
    def from_ell(cls, b, ell, kappa=0.0, lam=0.0):
        return cls(b, kappa, lam, None, ell)


# ---------------------------------------------------------------- fiber pieces

def _fiber_pieces(basis):
    """Elementary matrices on a 1D fiber: p, ∂, ∂², p², p²∂ and the skew p²∂ + p."""
    if isinstance(basis, HermiteBasis):
        if basis.p_dims != 1:
            raise ValueError("expected a 1D Hermite basis")
        w = lambda s: basis.word([(c, 0) for c in s])
        ppd = w("ppd")
        return {"p": w("p"), "d": w("d"), "dd": w("dd"), "pp": w("pp"), "ppd": ppd, "ppd_skew": ppd + w("p")}
    if isinstance(basis, PGrid):
        x = np.diag(basis.nodes)
        d = basis.deriv()
        x2 = x @ x
        skew = 0.5 * (x2 @ d + d @ x2)
        return {"p": x, "d": d, "dd": basis.laplacian(), "pp": x2, "ppd": skew - x, "ppd_skew": skew}
    raise TypeError("unsupported basis %r" % type(basis))


def assemble_vertical(basis, metric, q=None):
    """𝒪_g = ½(−g_ij ∂_pi ∂_pj + g^ij p_i p_j) at a base point.

    :param metric: a MetricField (then q is required) or an SPD matrix
    """
    g = metric.g(q) if isinstance(metric, MetricField) else np.atleast_2d(np.asarray(metric, dtype=float))
    if np.any(np.linalg.eigvalsh(g) <= 0):
        raise ValueError("metric is not positive definite")
    ginv = np.linalg.inv(g)
    d = g.shape[0]
    if isinstance(basis, PGrid):
        if d != 1:
            raise ValueError("grid fibers are 1D")
        pc = _fiber_pieces(basis)
        mat = 0.5 * (-g[0, 0] * pc["dd"] + ginv[0, 0] * pc["pp"])
    else:
        if basis.p_dims != d:
            raise ValueError("basis dimension %d does not match metric %d" % (basis.p_dims, d))
        mat = np.zeros((basis.dim, basis.dim))
        for i in range(d):
            for j in range(d):
                if g[i, j] != 0:
                    mat -= 0.5 * g[i, j] * basis.word([("d", i), ("d", j)])
                if ginv[i, j] != 0:
                    mat += 0.5 * ginv[i, j] * basis.word([("p", i), ("p", j)])
    return FiberOperator(mat, basis, "O_g", {"g": g.tolist()})


def assemble_euclid_fiber(params, xi, basis, f=None):
    """P̂_{b,h,f}(ξ) = ½Σ(hD_p)² + |p|²/(2b²) + (i/b)p·ξ + h f^{ij}_k p_i p_j ∂_pk.

    :param f: frozen coefficients f[i, j, k], or None to drop the term
    """
    b, h = params.b, (params.h if params.h is not None else 1.0)
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if isinstance(basis, PGrid):
        if len(xi) != 1:
            raise ValueError("grid fibers are 1D")
        pc = _fiber_pieces(basis)
        mat = -0.5 * h**2 * pc["dd"] + pc["pp"] / (2 * b**2) + 1j * xi[0] / b * pc["p"]
        if f is not None:
            mat = mat + h * np.asarray(f).reshape(-1)[0] * pc["ppd"]
    else:
        d = basis.p_dims
        if len(xi) != d:
            raise ValueError("xi has length %d, basis has d=%d" % (len(xi), d))
        mat = np.zeros((basis.dim, basis.dim), dtype=complex)
        for j in range(d):
            mat += -0.5 * h**2 * basis.word([("d", j), ("d", j)]) + basis.word([("p", j), ("p", j)]) / (2 * b**2)
            mat += 1j * xi[j] / b * basis.word([("p", j)])
        if f is not None:
            f = np.asarray(f).reshape(d, d, d)
            for i in range(d):
                for j in range(d):
                    for k in range(d):
                        if f[i, j, k] != 0:
                            mat += h * f[i, j, k] * basis.word([("p", i), ("p", j), ("d", k)])
    return FiberOperator(mat, basis, "Phat_bhf", {"b": b, "h": h, "xi": xi.tolist(), "f": f is not None})


def shifted(op, shift=0.0, label=None):
    """op + shift·Id (κ and −iλ terms enter this way)."""
    mat = op.matrix + shift * np.eye(op.basis.dim)
    return FiberOperator(mat, op.basis, label or op.label, dict(op.params, shift=complex(shift).__repr__()))


def scalar_perturbation(basis, a):
    """Scalar zeroth-order hook a·p (1D fiber), standing in for a bundle term."""
    return FiberOperator(a * _fiber_pieces(basis)["p"], basis, "a.p", {"a": a})


def fiber_spectrum(xi, basis):
    """Eigenvalues of 𝒪 + ip·ξ, sorted by real part."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    from .basis import op_number
    mat = op_number(basis).matrix.astype(complex)
    for j, x in enumerate(xi):
        if x:
            mat = mat + 1j * x * basis.word([("p", j)])
    ev = np.linalg.eigvals(mat)
    return ev[np.lexsort((ev.imag, ev.real))]


# ---------------------------------------------------------------- scaling

@dataclass(frozen=True)
class ScalingCertificate:
    """P̂_{b,h,0}(ξ) − ihλ = factor · U (P̂_{1,1,0}(ξ·xi_factor) − i λ·lam_factor) U*,
    where U is the dilation p -> p / p_scale."""

    factor: float
    p_scale: float
    xi_factor: float
    lam_factor: float

    @property
    def is_identity(self):
        return self.factor == 1 and self.p_scale == 1 and self.xi_factor == 1 and self.lam_factor == 1


def scaling_reduce(b, h):
    if b <= 0 or h <= 0:
        raise ValueError("b and h must be positive")
    return ScalingCertificate(h / b, np.sqrt(h * b), np.sqrt(b / h), b)


def rotate_fiber(xi):
    """Orthogonal R with R e_1 = ξ/|ξ| (Householder), so Rᵀξ = (|ξ|, 0, ...)."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    d = len(xi)
    n = np.linalg.norm(xi)
    if n == 0:
        return np.eye(d)
    v = xi / n - np.eye(d)[0]
    if np.linalg.norm(v) < 1e-15:
        return np.eye(d)
    return np.eye(d) - 2 * np.outer(v, v) / (v @ v)


def rotation_unitary(basis, rot):
    """Matrix of (Uu)(p) = u(Rᵀp) in a 2D Hermite basis, by exact Gauss quadrature.

    Unitary on the triangle n_1 + n_2 < N, where the energy shells are complete.
    """
    if basis.p_dims != 2:
        raise ValueError("rotation_unitary expects d = 2")
    x, w = basis.quadrature()
    n = basis.cutoff
    xx, yy = np.meshgrid(x, x, indexing="ij")
    ww = np.outer(w, w).ravel()
    pts = np.stack([xx.ravel(), yy.ravel()])
    rp = rot.T @ pts
    h_plain = [hermite_functions(n, pts[k]) for k in range(2)]
    h_rot = [hermite_functions(n, rp[k]) for k in range(2)]
    left = (h_plain[0][:, None, :] * h_plain[1][None, :, :]).reshape(n * n, -1)
    right = (h_rot[0][:, None, :] * h_rot[1][None, :, :]).reshape(n * n, -1)
    return (left * ww) @ right.T


def conjugated_fiber(xi, basis):
    """𝒪 + i p_1|ξ|, the rotated form of 𝒪 + i p·ξ."""
    from .basis import op_number
    mat = op_number(basis).matrix + 1j * np.linalg.norm(xi) * basis.word([("p", 0)])
    return FiberOperator(mat, basis, "Ptilde_xiR", {"xi": list(np.atleast_1d(xi))})


def triangle_mask(basis, margin=0):
    """Boolean mask of multi-indices with Σ n_j <= N − 1 − margin."""
    return basis.multi_indices.sum(axis=1) <= basis.cutoff - 1 - margin


def interior_mask(basis, margin=3):
    """Multi-indices with every n_j <= N − margin."""
    return np.all(basis.multi_indices <= basis.cutoff - margin, axis=1)


def harmonic_oscillator_identity_defect(basis):
    """(1+𝒪)² − (1+𝒪_1)² against (Σ_{j≠1}𝒪_j)² + 2(1+𝒪_1)Σ_{j≠1}𝒪_j on the interior block.

    𝒪 comes from the number operator, each 𝒪_j from p and ∂ products.
    """
    from .basis import op_number, op_position, op_deriv
    eye = np.eye(basis.dim)
    o = op_number(basis).matrix
    oj = []
    for j in range(basis.p_dims):
        x, dd = op_position(basis, j).matrix, op_deriv(basis, j).matrix
        oj.append(0.5 * (x @ x - dd @ dd))
    rest = sum(oj[1:]) if basis.p_dims > 1 else np.zeros_like(o)
    lhs = (eye + o) @ (eye + o) - (eye + oj[0]) @ (eye + oj[0])
    rhs = rest @ rest + 2 * (eye + oj[0]) @ rest
    m = interior_mask(basis)
    return np.abs((lhs - rhs)[np.ix_(m, m)]).max()


def positive_operator_identity_defect(basis, xi_norm, lam):
    """(1+P̃−iλ)*(1+P̃−iλ) against (1+𝒪_1−iB)(1+𝒪_1+iB) + (1+𝒪)² − (1+𝒪_1)²,
    B = p_1|ξ| − λ, on the interior block. The left side is formed as an exact
    Galerkin product in a padded basis."""
    from .basis import op_number, op_position, op_deriv
    pad = HermiteBasis(basis.p_dims, basis.cutoff + 2)
    keep = np.all(pad.multi_indices < basis.cutoff, axis=1)
    ep = np.eye(pad.dim)
    a = ep + op_number(pad).matrix + 1j * (xi_norm * op_position(pad, 0).matrix - lam * ep)
    lhs = (a.conj().T @ a)[np.ix_(keep, keep)]
    eye = np.eye(basis.dim)
    x0, d0 = op_position(basis, 0).matrix, op_deriv(basis, 0).matrix
    o1 = 0.5 * (x0 @ x0 - d0 @ d0)
    o = op_number(basis).matrix
    bb = xi_norm * x0 - lam * eye
    rhs = (eye + o1 - 1j * bb) @ (eye + o1 + 1j * bb) + (eye + o) @ (eye + o) - (eye + o1) @ (eye + o1)
    m = interior_mask(basis)
    return np.abs((lhs - rhs)[np.ix_(m, m)]).max()


# ---------------------------------------------------------------- q-grid operators

@dataclass(frozen=True)
class QGrid:
    """Periodic q-grid with M points on [0, L): the QRep grid mode."""

    points: int
    length: float = 2 * np.pi

    def __post_init__(self):
        if self.points < 8:
            raise ValueError("need at least 8 q points")

    @property
    def nodes(self):
        return np.arange(self.points) * self.length / self.points

    @property
    def wavenumbers(self):
        k = np.fft.fftfreq(self.points, d=self.length / (2 * np.pi * self.points))
        if self.points % 2 == 0:
            k[self.points // 2] = 0.0
        return k

    def deriv_apply(self, v, axis=0):
        """Spectral ∂_q along `axis` (Nyquist mode dropped for even M)."""
        shape = [1] * v.ndim
        shape[axis] = self.points
        return np.fft.ifft(1j * self.wavenumbers.reshape(shape) * np.fft.fft(v, axis=axis), axis=axis)

    def deriv_matrix(self):
        return np.real(self.deriv_apply(np.eye(self.points), axis=0))


@dataclass
class GridOperator:
    """Operator c0(q) + Σ_r ½(a_r ∂_q + ∂_q a_r) ⊗ B_r on (q-grid) ⊗ (fiber).

    Coefficients are kept symbolically in ∂_q so that commutators with
    q-multipliers follow the Leibniz rule exactly.
    """

    qgrid: QGrid
    fiber: object
    c0: np.ndarray
    terms: list = field(default_factory=list)
    label: str = "P"
    params: dict = field(default_factory=dict)

    @property
    def n_fiber(self):
        return self.c0.shape[1]

    @property
    def dim(self):
        return self.qgrid.points * self.n_fiber

    def apply(self, u):
        u = np.asarray(u).reshape(self.qgrid.points, self.n_fiber)
        out = np.einsum("qij,qj->qi", self.c0, u)
        for a, bm in self.terms:
            v = u @ bm.T
            out = out + 0.5 * (a[:, None] * self.qgrid.deriv_apply(v) + self.qgrid.deriv_apply(a[:, None] * v))
        return out.reshape(-1)

    def matrix(self, cap=20000):
        if self.dim > cap:
            raise MemoryError("dimension %d exceeds cap %d" % (self.dim, cap))
        mat = block_diag(*self.c0).astype(complex)
        dq = self.qgrid.deriv_matrix()
        for a, bm in self.terms:
            sym = 0.5 * (np.diag(a) @ dq + dq @ np.diag(a))
            mat = mat + np.kron(sym, bm)
        return mat

    def shift(self, c):
        return GridOperator(self.qgrid, self.fiber, self.c0 + c * np.eye(self.n_fiber)[None], list(self.terms),
                            self.label, dict(self.params))

    def commutator_q(self, dm):
        """[P, m(q)] = Σ_r a_r m' ⊗ B_r, given samples dm = m'(q)."""
        c0 = np.zeros_like(self.c0)
        for a, bm in self.terms:
            c0 = c0 + (a * dm)[:, None, None] * bm[None]
        return GridOperator(self.qgrid, self.fiber, c0, [], "[%s,m]" % self.label, dict(self.params))

    def multiply(self, m):
        """Apply the q-multiplier m (samples) to a state."""
        return lambda u: (np.asarray(u).reshape(self.qgrid.points, -1) * m[:, None]).reshape(-1)


def assemble_scaled(params, ell, metric, qgrid, basis, cap=200000):
    """P_{b,ℓ} = 𝒪_ℓ/b² + 𝒴_ℓ/b on (q-grid) ⊗ (1D fiber).

    𝒴_ℓ is stored in the skew form 2^ℓ[½{g^{-1}, ∂_q} p + c (p²∂_p + p)],
    c = g^{-1}Γ, which equals 2^ℓ g^{-1}p(∂_q + Γ p ∂_p).
    """
    if ell < -1:
        raise ValueError("ell must be >= -1")
    if metric.dim != 1:
        raise ValueError("q-grid operators use a 1D base")
    pc = _fiber_pieces(basis)
    n = pc["p"].shape[0]
    if qgrid.points * n > cap:
        raise MemoryError("total dimension %d exceeds cap %d" % (qgrid.points * n, cap))
    b = params.b
    s = 2.0 ** ell
    qs = qgrid.nodes
    g = np.array([metric.g(np.array([q]))[0, 0] for q in qs])
    gam = np.array([christoffel(metric, np.array([q]))[0, 0, 0] for q in qs])
    c0 = np.empty((len(qs), n, n), dtype=complex)
    for k in range(len(qs)):
        o_ell = 0.5 * (-g[k] / s**2 * pc["dd"] + s**2 / g[k] * pc["pp"])
        c0[k] = o_ell / b**2 + s * gam[k] / g[k] * pc["ppd_skew"] / b
    terms = [(s / g / b, pc["p"])]
    return GridOperator(qgrid, basis, c0, terms, "P_b_ell", {"b": b, "ell": ell, "metric": metric.name})


def fourier_block(op_matrix, qgrid, n_fiber, k_index):
    """Fiber block of a q-translation-invariant matrix at Fourier mode k."""
    m = qgrid.points
    phase = np.exp(2j * np.pi * k_index * np.arange(m) / m) / np.sqrt(m)
    v = np.kron(phase[:, None], np.eye(n_fiber))
    return v.conj().T @ op_matrix @ v


def commutator(op, m):
    """[A, m] = A·diag(m) − diag(m)·A for a multiplier sampled on the representation."""
    mat = op.matrix if isinstance(op, FiberOperator) else np.asarray(op)
    m = np.asarray(m)
    if m.shape != (mat.shape[0],):
        raise ValueError("multiplier has %s samples, operator dimension %d" % (m.shape, mat.shape[0]))
    out = mat * m[None, :] - m[:, None] * mat
    if isinstance(op, FiberOperator):
        return FiberOperator(out, op.basis, "[%s,m]" % op.label, dict(op.params))
    return out


# ---------------------------------------------------------------- quasimodes

def _spectral_deriv(v, length, axis, order=1):
    n = v.shape[axis]
    k = np.fft.fftfreq(n, d=length / (2 * np.pi * n))
    if order == 1 and n % 2 == 0:
        k[n // 2] = 0.0
    shape = [1] * v.ndim
    shape[axis] = n
    return np.fft.ifft((1j * k.reshape(shape)) ** order * np.fft.fft(v, axis=axis), axis=axis)


def quasimode(metric, phi, b, q_points=64, p_points=256, p_half_width=4.0, q_length=2 * np.pi):
    """u = φ(|p|²_q) on a periodic (q, p) grid with spectral derivatives.

    :param phi: callable profile, compactly supported inside the p-window
    :return: dict with ‖u‖ (=1), ‖𝒴u‖, ‖𝒪u‖, ‖P_{±,b}u‖ and b²‖P_{+,b}u‖
    """
    if metric.dim != 1:
        raise ValueError("quasimodes are built on a 1D base")
    qs = np.arange(q_points) * q_length / q_points
    dp = 2 * p_half_width / p_points
    ps = -p_half_width + np.arange(p_points) * dp
    g = np.array([metric.g(np.array([q]))[0, 0] for q in qs])[:, None]
    gam = np.array([christoffel(metric, np.array([q]))[0, 0, 0] for q in qs])[:, None]
    u = phi(ps[None, :] ** 2 / g)
    if not np.any(u):
        raise ValueError("profile underflow: all samples vanish")
    edge = np.abs(u[:, :3]).max() + np.abs(u[:, -3:]).max()
    w = (q_length / q_points) * dp
    u = u / np.sqrt(np.sum(np.abs(u) ** 2) * w)
    uq = _spectral_deriv(u, q_length, 0)
    up = _spectral_deriv(u, 2 * p_half_width, 1)
    upp = _spectral_deriv(u, 2 * p_half_width, 1, order=2)
    p = ps[None, :]
    yu = p / g * (uq + gam * p * up)
    ou = 0.5 * (-g * upp + p**2 / g * u)
    nrm = lambda v: np.sqrt(np.sum(np.abs(v) ** 2) * w)
    plus, minus = nrm(ou / b**2 + yu / b), nrm(ou / b**2 - yu / b)
    return {"u_norm": nrm(u), "Y_norm": nrm(yu), "O_norm": nrm(ou), "P_plus": plus, "P_minus": minus,
            "scaled_P_plus": plus * b**2, "edge_mass": float(edge)}
