"""Trivariate polynomials as sparse coefficient tables.

A polynomial is a dict mapping the multi-index (i, j, k) to a float
coefficient, meaning c * x^i * y^j * z^k.  This is all the symbolic
machinery the package needs: evaluation, arithmetic, and partial
derivatives, so that Lie derivatives of polynomial fields are exact.
"""

from __future__ import annotations

import numpy as np


class Poly3:
    """Sparse polynomial in (x, y, z)."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs=None):
        self.coeffs = {}
        if coeffs:
            for powers, c in coeffs.items():
                if c != 0:
                    key = tuple(int(p) for p in powers)
                    self.coeffs[key] = self.coeffs.get(key, 0.0) + float(c)

    @staticmethod
    def constant(c):
        return Poly3({(0, 0, 0): c})

    @staticmethod
    def variable(axis):
        powers = [0, 0, 0]
        powers[axis] = 1
        return Poly3({tuple(powers): 1.0})

    # -- evaluation ----------------------------------------------------------

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        if p.ndim == 1:
            x, y, z = p
            return float(sum(c * x**i * y**j * z**k
                             for (i, j, k), c in self.coeffs.items()))
        # batch: p has shape (n, 3)
        x, y, z = p[..., 0], p[..., 1], p[..., 2]
        out = np.zeros(p.shape[:-1])
        for (i, j, k), c in self.coeffs.items():
            out += c * x**i * y**j * z**k
        return out

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, Poly3):
            other = Poly3.constant(other)
        out = dict(self.coeffs)
        for key, c in other.coeffs.items():
            out[key] = out.get(key, 0.0) + c
        return Poly3(out)

    __radd__ = __add__

    def __neg__(self):
        return Poly3({k: -c for k, c in self.coeffs.items()})

    def __sub__(self, other):
        if not isinstance(other, Poly3):
            other = Poly3.constant(other)
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, Poly3):
            return Poly3({k: c * float(other) for k, c in self.coeffs.items()})
        out = {}
        for (i1, j1, k1), c1 in self.coeffs.items():
            for (i2, j2, k2), c2 in other.coeffs.items():
                key = (i1 + i2, j1 + j2, k1 + k2)
                out[key] = out.get(key, 0.0) + c1 * c2
        return Poly3(out)

    __rmul__ = __mul__

    def diff(self, axis):
        """Partial derivative along axis 0, 1 or 2."""
        out = {}
        for powers, c in self.coeffs.items():
            n = powers[axis]
            if n == 0:
                continue
            key = list(powers)
            key[axis] = n - 1
            out[tuple(key)] = out.get(tuple(key), 0.0) + c * n
        return Poly3(out)

    def gradient(self):
        return (self.diff(0), self.diff(1), self.diff(2))

    def is_zero(self):
        return not self.coeffs

    def __repr__(self):
        if not self.coeffs:
            return "Poly3(0)"
        names = ("x", "y", "z")
        terms = []
        for powers, c in sorted(self.coeffs.items()):
            mono = "*".join(f"{names[ax]}^{n}" if n > 1 else names[ax]
                            for ax, n in enumerate(powers) if n)
            terms.append(f"{c:g}*{mono}" if mono else f"{c:g}")
        return "Poly3(" + " + ".join(terms) + ")"


def lie_poly(field_polys, g):
    """Exact Lie derivative of polynomial g along a polynomial vector field."""
    gx, gy, gz = g.gradient()
    return field_polys[0] * gx + field_polys[1] * gy + field_polys[2] * gz
