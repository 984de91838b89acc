"""Exact constants of the form a + b*sqrt(r) with rational a, b.

The closed-form models carry eigenvalues, eigenvectors, interval endpoints
and intersection points in this shape.  Storing them exactly and lowering
to float on demand keeps the oracle values free of accumulated rounding.
"""

from __future__ import annotations

import math
from fractions import Fraction


class Quad:
    """a + b*sqrt(r) with a, b rational and r a fixed nonnegative integer.

    Closed under +, -, * (same radicand), and division by rationals.
    """

    __slots__ = ("a", "b", "r")

    def __init__(self, a, b=0, r=0):
        self.a = Fraction(a)
        self.b = Fraction(b)
        self.r = int(r)
        if self.b == 0:
            self.r = 0

    # -- arithmetic ---------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, Quad):
            if self.r and other.r and self.r != other.r:
                raise ValueError(f"mixed radicands {self.r} and {other.r}")
            return other
        return Quad(other)

    def __add__(self, other):
        o = self._coerce(other)
        return Quad(self.a + o.a, self.b + o.b, self.r or o.r)

    __radd__ = __add__

    def __neg__(self):
        return Quad(-self.a, -self.b, self.r)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        o = self._coerce(other)
        r = self.r or o.r
        return Quad(self.a * o.a + self.b * o.b * r,
                    self.a * o.b + self.b * o.a, r)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Quad) and other.b != 0:
            # multiply by the conjugate
            denom = other.a * other.a - other.b * other.b * other.r
            conj = Quad(other.a, -other.b, other.r)
            return (self * conj) / denom
        q = Fraction(other.a if isinstance(other, Quad) else other)
        return Quad(self.a / q, self.b / q, self.r)

    def __eq__(self, other):
        o = self._coerce(other)
        return self.a == o.a and self.b == o.b and (self.b == 0 or self.r == o.r)

    def __hash__(self):
        return hash((self.a, self.b, self.r))

    # -- lowering -----------------------------------------------------------

    def __float__(self):
        return float(self.a) + float(self.b) * math.sqrt(self.r)

    def __repr__(self):
        if self.b == 0:
            return f"Quad({self.a})"
        return f"Quad({self.a} + {self.b}*sqrt({self.r}))"


def lower(values):
    """Lower a nested structure of Quad / numbers to plain floats."""
    if isinstance(values, Quad):
        return float(values)
    if isinstance(values, (list, tuple)):
        t = type(values)
        return t(lower(v) for v in values)
    return float(values)
