"""Piecewise-smooth systems and pointwise switching-manifold analysis.

A system is a pair of smooth vector fields on a box in R^3, separated by
the zero level of a switching function f.  This module holds the data
types plus every pointwise operation: Filippov evaluation, Lie
derivatives, region classification, the fold-fold taxonomy and the
(normalized) sliding vector field.

All operations are pure functions of immutable inputs; nothing here keeps
mutable state, so concurrent use is safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import (DegenerateDenominator, NotAFoldFold, NotSliding,
                     OnSwitchingManifold, UnsupportedOrder)
from .poly import Poly3, lie_poly

ON_SIGMA_TOL = 1e-12          # |f| below this counts as "on the manifold"
TRANSVERSALITY_TOL = 1e-8     # |det| below this means fold lines not transverse


def tangency_tol(v_norm):
    """Scale-aware zero band for Lie derivatives: 1e-9 * (1 + |V(p)|)."""
    return 1e-9 * (1.0 + v_norm)


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Box:
    """Axis-aligned working domain."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if not all(h > l for l, h in zip(lo, hi)):
            raise ValueError("empty box")

    def contains(self, p, slack=0.0):
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= np.array(self.lo) - slack)
                    and np.all(p <= np.array(self.hi) + slack))

    def sample(self, rng, n):
        lo = np.array(self.lo)
        hi = np.array(self.hi)
        return lo + rng.random((n, 3)) * (hi - lo)


DEFAULT_BOX = Box((-10.0, -10.0, -10.0), (10.0, 10.0, 10.0))


class ScalarField:
    """Scalar function on R^3 with a gradient rule.

    Polynomially-defined fields carry their coefficient table so Lie
    derivatives stay symbolic; otherwise the gradient must be supplied (or
    is taken by central differences).
    """

    def __init__(self, func=None, grad=None, poly=None, name=""):
        if poly is not None and not isinstance(poly, Poly3):
            poly = Poly3(poly)
        self.poly = poly
        self.name = name
        if poly is not None:
            self._func = poly
            gx, gy, gz = poly.gradient()
            self._grad = lambda p: np.array([gx(p), gy(p), gz(p)])
        else:
            if func is None:
                raise ValueError("need func or poly")
            self._func = func
            self._grad = grad
        if func is not None:
            self._func = func  # explicit func wins for evaluation speed

    def __call__(self, p):
        return self._func(np.asarray(p, dtype=float))

    def gradient(self, p):
        p = np.asarray(p, dtype=float)
        if self._grad is not None:
            return np.asarray(self._grad(p), dtype=float)
        return self._fd_gradient(p)

    def _fd_gradient(self, p):
        h = 1e-6 * (1.0 + np.linalg.norm(p))
        g = np.empty(3)
        for ax in range(3):
            e = np.zeros(3)
            e[ax] = h
            g[ax] = (self(p + e) - self(p - e)) / (2 * h)
        return g


class SmoothField:
    """Vector field on R^3; optionally with closed-form flow and polynomials.

    flow(t, p), when present, is the exact solution map; return_time(p)
    gives the nonzero time at which the flow from a switching-manifold
    point returns to it.
    """

    def __init__(self, func, polys=None, flow=None, return_time=None, name=""):
        self._func = func
        self.polys = None
        if polys is not None:
            self.polys = tuple(c if isinstance(c, Poly3) else Poly3(c)
                               for c in polys)
        self.flow = flow
        self.return_time = return_time
        self.name = name

    def __call__(self, p):
        return np.asarray(self._func(np.asarray(p, dtype=float)), dtype=float)


@dataclass
class PiecewiseSystem:
    """The pair Z = (X, Y) with switching function f on a working box.

    upper is active where f > 0, lower where f < 0.  aux_switchings lists
    surfaces across which the one-sided fields themselves are only
    piecewise smooth (crossed transversally); integrators split steps
    there.
    """

    upper: SmoothField
    lower: SmoothField
    switching: ScalarField
    box: Box = DEFAULT_BOX
    aux_switchings: tuple = ()
    meta: dict = field(default_factory=dict)

    @property
    def name(self):
        return self.meta.get("model", "system")


class RegionLabel(Enum):
    Crossing = "Crossing"
    StableSliding = "StableSliding"
    UnstableSliding = "UnstableSliding"
    TangencyX = "TangencyX"
    TangencyY = "TangencyY"
    TangencyBoth = "TangencyBoth"


class FoldClass(Enum):
    VisibleVisible = "VisibleVisible"
    InvisibleVisible = "InvisibleVisible"
    VisibleInvisible = "VisibleInvisible"
    Invisible_T = "Invisible_T"


@dataclass
class FoldFoldReport:
    fold_class: FoldClass
    x2f: float
    y2f: float
    transversality_det: float
    tangency_dir_x: np.ndarray   # unit direction of the X-tangency line, chart coords
    tangency_dir_y: np.ndarray


# ---------------------------------------------------------------------------
# charts on the switching manifold
# ---------------------------------------------------------------------------

class SigmaChart:
    """Orthonormal 2D chart on the switching manifold around a base point.

    embed(u) Newton-projects back onto f = 0 along the normal, so it is
    exact for planar manifolds and second-order accurate otherwise.
    """

    def __init__(self, system, base):
        self.system = system
        self.base = np.asarray(base, dtype=float)
        n = system.switching.gradient(self.base)
        n = n / np.linalg.norm(n)
        self.normal = n
        # pick the coordinate axis least aligned with n to seed the basis
        seed = np.zeros(3)
        seed[int(np.argmin(np.abs(n)))] = 1.0
        e1 = seed - np.dot(seed, n) * n
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(n, e1)
        self.e1, self.e2 = e1, e2

    def embed(self, u):
        p = self.base + u[0] * self.e1 + u[1] * self.e2
        f = self.system.switching
        # Newton projection along the normal (no-op for planar manifolds)
        for _ in range(4):
            val = f(p)
            if abs(val) < 1e-14:
                break
            g = f.gradient(p)
            p = p - val * g / np.dot(g, g)
        return p

    def project(self, p):
        d = np.asarray(p, dtype=float) - self.base
        return np.array([np.dot(d, self.e1), np.dot(d, self.e2)])


def planar_chart(system, base):
    """Chart for the common f = z case: identity on (x, y)."""
    return SigmaChart(system, base)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def evaluate_filippov(Z, p):
    """Field value off the switching manifold: X where f>0, Y where f<0."""
    p = np.asarray(p, dtype=float)
    f = Z.switching(p)
    if abs(f) <= ON_SIGMA_TOL:
        raise OnSwitchingManifold(
            f"point {p.tolist()} lies on the switching manifold; "
            "use sliding/crossing logic")
    return Z.upper(p) if f > 0 else Z.lower(p)


def lie_derivative(V, f, p, order=1):
    """Lie derivative V^k f(p) for k in {1, 2, 3}.

    Symbolic when both the field and the scalar are polynomial; otherwise
    order 1 uses the gradient rule and higher orders nest central
    differences with step 1e-5 * (1 + |p|).
    """
    if order not in (1, 2, 3):
        raise UnsupportedOrder(f"order {order} not in {{1, 2, 3}}")
    p = np.asarray(p, dtype=float)

    if V.polys is not None and f.poly is not None:
        g = f.poly
        for _ in range(order):
            g = lie_poly(V.polys, g)
        return g(p)

    if order == 1:
        return float(np.dot(V(p), f.gradient(p)))

    def lie1(q):
        return float(np.dot(V(q), f.gradient(q)))

    def directional(fun, q):
        v = V(q)
        nv = np.linalg.norm(v)
        if nv == 0.0:
            return 0.0
        h = 1e-5 * (1.0 + np.linalg.norm(q))
        u = v / nv
        return (fun(q + h * u) - fun(q - h * u)) / (2 * h) * nv

    if order == 2:
        return directional(lie1, p)
    return directional(lambda q: directional(lie1, q), p)


def lie_pair(Z, p):
    """(Xf, Yf) at p."""
    return (lie_derivative(Z.upper, Z.switching, p, 1),
            lie_derivative(Z.lower, Z.switching, p, 1))


def classify_sigma_point(Z, p):
    """Region label of a switching-manifold point from the signs of (Xf, Yf).

    Lie derivatives within the scale-aware band tangency_tol count as zero.
    """
    p = np.asarray(p, dtype=float)
    xf, yf = lie_pair(Z, p)
    tx = tangency_tol(np.linalg.norm(Z.upper(p)))
    ty = tangency_tol(np.linalg.norm(Z.lower(p)))
    x_tan = abs(xf) <= tx
    y_tan = abs(yf) <= ty
    if x_tan and y_tan:
        return RegionLabel.TangencyBoth
    if x_tan:
        return RegionLabel.TangencyX
    if y_tan:
        return RegionLabel.TangencyY
    if xf * yf > 0:
        return RegionLabel.Crossing
    if xf < 0 < yf:
        return RegionLabel.StableSliding
    return RegionLabel.UnstableSliding


def classify_fold_fold(Z, p):
    """Fold-fold taxonomy at a double-tangency point.

    Classifies by the signs of the second Lie derivatives and reports the
    transversality determinant of the two tangency lines in the chart.
    """
    p = np.asarray(p, dtype=float)
    X, Y, f = Z.upper, Z.lower, Z.switching
    if np.linalg.norm(X(p)) == 0.0 or np.linalg.norm(Y(p)) == 0.0:
        raise NotAFoldFold("one of the fields vanishes at the point")
    x2f = lie_derivative(X, f, p, 2)
    y2f = lie_derivative(Y, f, p, 2)
    if x2f == 0.0 or y2f == 0.0:
        raise NotAFoldFold("second Lie derivative vanishes (not a fold)")

    chart = SigmaChart(Z, p)
    gx = _inplane_gradient(Z, X, chart)
    gy = _inplane_gradient(Z, Y, chart)
    det = gx[0] * gy[1] - gx[1] * gy[0]
    if abs(det) < TRANSVERSALITY_TOL:
        raise NotAFoldFold(f"tangency lines not transverse (det={det:g})")

    if x2f > 0 and y2f < 0:
        cls = FoldClass.VisibleVisible
    elif x2f < 0 and y2f < 0:
        cls = FoldClass.InvisibleVisible
    elif x2f > 0 and y2f > 0:
        cls = FoldClass.VisibleInvisible
    else:
        cls = FoldClass.Invisible_T

    def rot90(g):
        t = np.array([-g[1], g[0]])
        return t / np.linalg.norm(t)

    return FoldFoldReport(cls, x2f, y2f, det, rot90(gx), rot90(gy))


def _inplane_gradient(Z, V, chart, h=1e-6):
    """Chart gradient of the Lie derivative q -> Vf(q) restricted to Sigma."""
    f = Z.switching

    def lie_at(u):
        q = chart.embed(u)
        return lie_derivative(V, f, q, 1)

    g = np.empty(2)
    for ax in range(2):
        e = np.zeros(2)
        e[ax] = h
        g[ax] = (lie_at(e) - lie_at(-e)) / (2 * h)
    return g


def sliding_field(Z, p):
    """Filippov sliding vector field (Yf*X - Xf*Y) / (Yf - Xf) at p.

    Only defined on the sliding regions; the result is tangent to the
    switching manifold.
    """
    p = np.asarray(p, dtype=float)
    label = classify_sigma_point(Z, p)
    if label not in (RegionLabel.StableSliding, RegionLabel.UnstableSliding):
        raise NotSliding(f"{p.tolist()} classifies as {label.value}")
    xf, yf = lie_pair(Z, p)
    denom = yf - xf
    if abs(denom) < 1e-12:
        raise DegenerateDenominator(f"|Yf - Xf| = {abs(denom):g}")
    return (yf * Z.upper(p) - xf * Z.lower(p)) / denom


def normalized_sliding_field(Z, p):
    """Denominator-free sliding field Yf*X - Xf*Y.

    Defined beyond the sliding boundary; a positive reparameterization of
    the sliding field on the stable region, a negative one on the unstable
    region.
    """
    p = np.asarray(p, dtype=float)
    xf, yf = lie_pair(Z, p)
    return yf * Z.upper(p) - xf * Z.lower(p)


# ---------------------------------------------------------------------------
# validation helpers (used by tests and the CLI)
# ---------------------------------------------------------------------------

def validate_scalar_field(f, box, rng, n=200, rel_tol=1e-6):
    """Check the gradient rule against central differences on samples."""
    pts = box.sample(rng, n)
    worst = 0.0
    for p in pts:
        g = f.gradient(p)
        h = 1e-6 * (1.0 + np.linalg.norm(p))
        fd = np.empty(3)
        for ax in range(3):
            e = np.zeros(3)
            e[ax] = h
            fd[ax] = (f(p + e) - f(p - e)) / (2 * h)
        scale = max(np.linalg.norm(g), np.linalg.norm(fd), 1e-30)
        worst = max(worst, np.linalg.norm(g - fd) / scale)
    return worst <= rel_tol, worst


def validate_regular_level(f, box, rng, n=500):
    """0 must be a regular value: nonzero gradient wherever |f| is tiny."""
    pts = box.sample(rng, n)
    for p in pts:
        # pull the sample onto the zero level along the gradient
        for _ in range(10):
            val = f(p)
            if abs(val) < 1e-9:
                break
            g = f.gradient(p)
            gg = np.dot(g, g)
            if gg == 0.0:
                return False
            p = p - val * g / gg
        if abs(f(p)) < 1e-9 and np.linalg.norm(f.gradient(p)) == 0.0:
            return False
    return True
