"""Hermite and finite-difference representations of p, d/dp and the oscillator."""

from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.special import roots_hermite


def hermite_functions(n_max, x):
    """Orthonormal Hermite functions h_0..h_{n_max-1} at the points x.

    Uses the three-term recurrence, which stays stable far into the tails.

    :param n_max: number of functions
    :param x: sample points
    :return: array of shape (n_max, len(x))
    """
    x = np.asarray(x, dtype=float)
    out = np.zeros((n_max,) + x.shape)
    out[0] = np.pi ** -0.25 * np.exp(-x**2 / 2)
    if n_max > 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for n in range(1, n_max - 1):
        out[n + 1] = np.sqrt(2.0 / (n + 1)) * x * out[n] - np.sqrt(n / (n + 1)) * out[n - 1]
    return out


def ladder_1d(n, letter):
    """Matrix of p ('p') or d/dp ('d') on the first n Hermite functions."""
    k = np.sqrt(np.arange(1, n) / 2.0)
    if letter == "p":
        return np.diag(k, 1) + np.diag(k, -1)
    if letter == "d":
        return np.diag(k, 1) - np.diag(k, -1)
    raise ValueError("unknown letter %r" % letter)


def word_1d(n, word):
    """Exact Galerkin matrix of a product of p's and d's on n modes.

    The product is formed in a basis padded by len(word) modes, so that
    truncation never cuts a ladder step, and then restricted.
    """
    m = n + len(word)
    out = np.eye(m)
    for letter in word:
        out = out @ ladder_1d(m, letter)
    return out[:n, :n]


@dataclass(frozen=True)
class HermiteBasis:
    """Tensor Hermite basis h_{n_1}(p_1)...h_{n_d}(p_d), n_j < N.

    Multi-indices run in C order (axis 0 slowest).
    """

    p_dims: int
    cutoff: int
    quad_order: int = 0

    def __post_init__(self):
        if self.p_dims < 1 or self.cutoff < 1:
            raise ValueError("need p_dims >= 1 and cutoff >= 1")
        if self.quad_order < 2 * self.cutoff:
            object.__setattr__(self, "quad_order", 2 * self.cutoff)

    @property
    def dim(self):
        return self.cutoff ** self.p_dims

    @property
    def multi_indices(self):
        return np.array(list(product(range(self.cutoff), repeat=self.p_dims)), dtype=int).reshape(-1, self.p_dims)

    def quadrature(self):
        """Gauss-Hermite nodes and weights for integrals of f(p) dp (1D).

        Weights include the factor e^{x^2}, so sum(w * f(x)) ~ ∫ f.
        """
        x, w = roots_hermite(self.quad_order)
        return x, w * np.exp(x**2)

    def embed(self, mat, axis):
        """Lift a 1D N x N matrix acting on `axis` to the tensor basis."""
        if not 0 <= axis < self.p_dims:
            raise IndexError("axis %d out of range for d=%d" % (axis, self.p_dims))
        out = np.ones((1, 1))
        for j in range(self.p_dims):
            out = np.kron(out, mat if j == axis else np.eye(self.cutoff))
        return out

    def word(self, letters):
        """Exact Galerkin matrix of a product of (letter, axis) pairs.

        Factors on different axes commute, so the word is split per axis
        and each axis gets its own padded 1D product.
        """
        per_axis = [""] * self.p_dims
        for letter, axis in letters:
            if not 0 <= axis < self.p_dims:
                raise IndexError("axis %d out of range for d=%d" % (axis, self.p_dims))
            per_axis[axis] += letter
        out = np.ones((1, 1))
        for j in range(self.p_dims):
            out = np.kron(out, word_1d(self.cutoff, per_axis[j]) if per_axis[j] else np.eye(self.cutoff))
        return out


@dataclass(frozen=True)
class PGrid:
    """Cell-centred grid on [-P, P] with M points and spacing 2P/M."""

    half_width: float
    points: int
    boundary: str = "dirichlet"

    def __post_init__(self):
        if self.half_width <= 0 or self.points < 8:
            raise ValueError("need half_width > 0 and points >= 8")
        if self.boundary not in ("dirichlet", "periodic"):
            raise ValueError("boundary must be 'dirichlet' or 'periodic'")

    @property
    def spacing(self):
        return 2 * self.half_width / self.points

    @property
    def dim(self):
        return self.points

    @property
    def nodes(self):
        return -self.half_width + (np.arange(self.points) + 0.5) * self.spacing

    def laplacian(self):
        """3-point second difference with the grid's boundary rule."""
        m, dx = self.points, self.spacing
        lap = -2 * np.eye(m) + np.eye(m, k=1) + np.eye(m, k=-1)
        if self.boundary == "periodic":
            lap[0, -1] = lap[-1, 0] = 1
        return lap / dx**2

    def spectral_laplacian(self):
        """Fourier second derivative; needs the periodic boundary rule."""
        if self.boundary != "periodic":
            raise ValueError("spectral derivatives need a periodic grid")
        k = 2 * np.pi * np.fft.fftfreq(self.points, d=self.spacing)
        eye = np.eye(self.points)
        return np.real(np.fft.ifft(-(k**2)[:, None] * np.fft.fft(eye, axis=0), axis=0))

    def deriv(self):
        """Centred first difference (antisymmetric)."""
        m, dx = self.points, self.spacing
        d = np.eye(m, k=1) - np.eye(m, k=-1)
        if self.boundary == "periodic":
            d[0, -1], d[-1, 0] = -1, 1
        return d / (2 * dx)


@dataclass
class FiberOperator:
    """A discretized operator: matrix, the basis it acts on, and its parameters."""

    matrix: np.ndarray
    basis: object
    label: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.matrix = np.array(self.matrix)
        n = self.basis.dim
        if self.matrix.shape != (n, n):
            raise ValueError("matrix shape %s does not match basis dimension %d" % (self.matrix.shape, n))
        self.matrix.setflags(write=False)

    def hermitian_part(self):
        return (self.matrix + self.matrix.conj().T) / 2

    def __repr__(self):
        return "FiberOperator(%s, dim=%d, params=%s)" % (self.label, self.basis.dim, self.params)


def op_number(basis):
    """𝒪 = ½(−Δ_p + |p|²) in the Hermite basis: diag(Σ n_j + d/2)."""
    diag = basis.multi_indices.sum(axis=1) + basis.p_dims / 2
    return FiberOperator(np.diag(diag.astype(float)), basis, "O")


def op_position(basis, axis):
    return FiberOperator(basis.embed(ladder_1d(basis.cutoff, "p"), axis), basis, "p", {"axis": axis})


def op_deriv(basis, axis):
    return FiberOperator(basis.embed(ladder_1d(basis.cutoff, "d"), axis), basis, "dp", {"axis": axis})


def op_airy_grid(grid, xi, lam):
    """P_1(ξ, λ) = i(pξ − λ) − ½Δ_p on a PGrid."""
    mat = 1j * np.diag(grid.nodes * xi - lam) - 0.5 * grid.laplacian()
    return FiberOperator(mat, grid, "P1", {"xi": xi, "lambda": lam})


def default_grid(cutoff, boundary="dirichlet"):
    """Grid wide enough for every retained mode: P = √(2N)+6, M = 8N."""
    return PGrid(np.sqrt(2 * cutoff) + 6, 8 * cutoff, boundary)


def to_grid(u, basis, grid):
    """Evaluate a 1D Hermite expansion at the grid nodes."""
    if basis.p_dims != 1:
        raise ValueError("to_grid handles 1D bases")
    return hermite_functions(basis.cutoff, grid.nodes).T @ u


def to_hermite(samples, basis, grid):
    """Project grid samples onto the Hermite functions (midpoint rule).

    :return: (coefficients, narrow) where narrow flags a grid that does
        not cover the classically allowed region of the top mode.
    """
    if basis.p_dims != 1:
        raise ValueError("to_hermite handles 1D bases")
    narrow = grid.half_width < np.sqrt(2 * basis.cutoff) + 4
    h = hermite_functions(basis.cutoff, grid.nodes)
    return h @ samples * grid.spacing, narrow
