"""Truncated Taylor arithmetic for exact derivatives of smooth profiles.

A Jet holds c[k] = f^{(k)}(x)/k! for k = 0..order, vectorized over x.
"""

from math import factorial

import numpy as np


class Jet:
    def __init__(self, coeffs):
        self.c = np.asarray(coeffs, dtype=float)

    @classmethod
    def variable(cls, x, order):
        x = np.asarray(x, dtype=float)
        c = np.zeros((order + 1,) + x.shape)
        c[0] = x
        if order >= 1:
            c[1] = 1.0
        return cls(c)

    @classmethod
    def const(cls, v, like):
        c = np.zeros_like(like.c)
        c[0] = v
        return cls(c)

    @property
    def order(self):
        return self.c.shape[0] - 1

    def derivs(self):
        """Derivatives f, f', ..., f^{(order)} as an array."""
        return np.array([factorial(k) * self.c[k] for k in range(self.order + 1)])

    def _wrap(self, other):
        return other if isinstance(other, Jet) else Jet.const(other, self)

    def __add__(self, other):
        return Jet(self.c + self._wrap(other).c)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.c)

    def __sub__(self, other):
        return Jet(self.c - self._wrap(other).c)

    def __rsub__(self, other):
        return Jet(self._wrap(other).c - self.c)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.c * other)
        a, b = self.c, other.c
        out = np.zeros(np.broadcast_shapes(a.shape, b.shape))
        for k in range(out.shape[0]):
            for j in range(k + 1):
                out[k] += a[j] * b[k - j]
        return Jet(out)

    __rmul__ = __mul__

    def recip(self):
        a = self.c
        out = np.zeros_like(a)
        out[0] = 1 / a[0]
        for k in range(1, a.shape[0]):
            out[k] = -sum(a[j] * out[k - j] for j in range(1, k + 1)) / a[0]
        return Jet(out)

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.c / other)
        return self * other.recip()

    def __rtruediv__(self, other):
        return self._wrap(other) * self.recip()

    def exp(self):
        a = self.c
        out = np.zeros_like(a)
        out[0] = np.exp(a[0])
        # f = e^a  =>  k f_k = sum_j j a_j f_{k-j}
        for k in range(1, a.shape[0]):
            out[k] = sum(j * a[j] * out[k - j] for j in range(1, k + 1)) / k
        return Jet(out)

    def sqrt(self):
        a = self.c
        out = np.zeros_like(a)
        out[0] = np.sqrt(a[0])
        for k in range(1, a.shape[0]):
            s = a[k] - sum(out[j] * out[k - j] for j in range(1, k))
            out[k] = s / (2 * out[0])
        return Jet(out)

    def where(self, mask, other):
        """Select self where mask is True, other elsewhere (values and derivatives)."""
        return Jet(np.where(mask, self.c, self._wrap(other).c))
