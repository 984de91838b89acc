"""Closed-form model systems and their exact data.

Two linear-flow systems with an invisible two-fold each (named Z1 and Z2),
the composite system with a cross-shaped switching arrangement (CrossZ0),
and its C^1 mollified one-parameter family (Zeps:<eps>).  Everything a
numeric module computes on these systems has a closed form here, so this
module doubles as the oracle layer for the test suite.

Exact constants are kept as rational + sqrt pairs (exact.Quad) and lowered
to float on demand.

Orientation note: the communication switching function is stored as
g(x, y, z) = y + 17/10*x - 5/2, oriented so that the *first* system (the
one with its two-fold at the origin) is active on g < 0.  With the
opposite sign neither two-fold would lie in its own system's active
region and the whole communication construction collapses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import Box, PiecewiseSystem, ScalarField, SmoothField
from .errors import ConfigError
from .exact import Quad
from .poly import Poly3

SQRT2 = math.sqrt(2.0)
MODEL_BOX = Box((-40.0, -40.0, -40.0), (40.0, 40.0, 40.0))
SQRT6 = math.sqrt(6.0)


# ---------------------------------------------------------------------------
# model ids
# ---------------------------------------------------------------------------

def parse_model_id(name):
    """Parse "Z1" | "Z2" | "CrossZ0" | "Zeps:<eps>" into (kind, eps)."""
    if name in ("Z1", "Z2", "CrossZ0"):
        return name, None
    if name.startswith("Zeps:"):
        try:
            eps = float(name.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad epsilon in model id {name!r}") from None
        if not 0.0 < eps <= 1.0:
            raise ConfigError(f"epsilon must be in (0, 1], got {eps}")
        return "Zeps", eps
    raise ConfigError(f"unknown model id {name!r}")


# ---------------------------------------------------------------------------
# switching functions
# ---------------------------------------------------------------------------

def _f_z():
    return ScalarField(func=lambda p: p[..., 2] if p.ndim > 1 else p[2],
                       grad=lambda p: np.array([0.0, 0.0, 1.0]),
                       poly=Poly3({(0, 0, 1): 1.0}), name="z")


def communication_plane():
    """Scalar field g = y + 17/10*x - 5/2 whose zero set is the plane Pi."""
    poly = Poly3({(0, 1, 0): 1.0, (1, 0, 0): 1.7, (0, 0, 0): -2.5})
    return ScalarField(func=lambda p: (p[..., 1] if p.ndim > 1 else p[1])
                       + 1.7 * (p[..., 0] if p.ndim > 1 else p[0]) - 2.5,
                       grad=lambda p: np.array([1.7, 1.0, 0.0]),
                       poly=poly, name="g_pi")


PI_NORMAL = np.array([1.7, 1.0, 0.0]) / math.hypot(1.7, 1.0)
PI_OFFSET = 2.5 / math.hypot(1.7, 1.0)   # n . p = offset on Pi


# ---------------------------------------------------------------------------
# the two base systems
# ---------------------------------------------------------------------------

def _z1_fields():
    X = SmoothField(
        lambda p: np.array([1.0, -1.0, p[1]]),
        polys=(Poly3.constant(1), Poly3.constant(-1), Poly3.variable(1)),
        flow=lambda t, p: np.array([p[0] + t, p[1] - t,
                                    p[2] - (p[1] - t) ** 2 / 2 + p[1] ** 2 / 2]),
        return_time=lambda p: 2.0 * p[1], name="X1")
    Y = SmoothField(
        lambda p: np.array([-1.0, 2.0, -p[0]]),
        polys=(Poly3.constant(-1), Poly3.constant(2), -Poly3.variable(0)),
        flow=lambda t, p: np.array([p[0] - t, p[1] + 2 * t,
                                    p[2] + (p[0] - t) ** 2 / 2 - p[0] ** 2 / 2]),
        return_time=lambda p: 2.0 * p[0], name="Y1")
    return X, Y


def _z2_fields():
    X = SmoothField(
        lambda p: np.array([1.0, -1.0, p[1] - 2.0]),
        polys=(Poly3.constant(1), Poly3.constant(-1),
               Poly3.variable(1) - 2.0 * Poly3.constant(1)),
        flow=lambda t, p: np.array([p[0] + t, p[1] - t,
                                    p[2] - (p[1] - t) ** 2 / 2 + p[1] ** 2 / 2 - 2 * t]),
        return_time=lambda p: 2.0 * (p[1] - 2.0), name="X2")
    Y = SmoothField(
        lambda p: np.array([-1.0, 3.0, -(p[0] - 2.0)]),
        polys=(Poly3.constant(-1), Poly3.constant(3),
               -(Poly3.variable(0) - 2.0 * Poly3.constant(1))),
        flow=lambda t, p: np.array([p[0] - t, p[1] + 3 * t,
                                    p[2] + (p[0] - t) ** 2 / 2 - p[0] ** 2 / 2 + 2 * t]),
        return_time=lambda p: 2.0 * (p[0] - 2.0), name="Y2")
    return X, Y


def regularization_blend(x):
    """C^1 saturation: -1 below -1, sin(pi x / 2) on [-1, 1], +1 above."""
    x = np.asarray(x, dtype=float)
    out = np.where(x < -1.0, -1.0,
                   np.where(x > 1.0, 1.0, np.sin(0.5 * np.pi * x)))
    return float(out) if out.ndim == 0 else out


def model_system(name):
    """Build the PiecewiseSystem for a model id (see parse_model_id)."""
    kind, eps = parse_model_id(name)
    f = _f_z()

    if kind == "Z1":
        X, Y = _z1_fields()
        return PiecewiseSystem(X, Y, f, MODEL_BOX,
                               meta={"model": "Z1", "tsing": [(0.0, 0.0, 0.0)]})
    if kind == "Z2":
        X, Y = _z2_fields()
        return PiecewiseSystem(X, Y, f, MODEL_BOX,
                               meta={"model": "Z2", "tsing": [(2.0, 2.0, 0.0)]})

    X1, Y1 = _z1_fields()
    X2, Y2 = _z2_fields()
    g = communication_plane()

    if kind == "CrossZ0":
        def pick(a, b):
            def fn(p):
                return a(p) if g(p) < 0.0 else b(p)
            return fn
        X = SmoothField(pick(X1, X2), name="X0")
        Y = SmoothField(pick(Y1, Y2), name="Y0")
        return PiecewiseSystem(
            X, Y, f, MODEL_BOX, aux_switchings=(g,),
            meta={"model": "CrossZ0", "g": g,
                  "tsing": [(0.0, 0.0, 0.0), (2.0, 2.0, 0.0)]})

    # regularized family: smooth blend across the communication plane,
    # with exact saturation outside the transition band
    def blend(a, b):
        def fn(p):
            gval = g(p)
            if gval <= -eps:
                return a(p)
            if gval >= eps:
                return b(p)
            w = regularization_blend(gval / eps)
            va, vb = a(p), b(p)
            return (vb + va) / 2.0 + w * (vb - va) / 2.0
        return fn

    X = SmoothField(blend(X1, X2), name=f"Xeps{eps:g}")
    Y = SmoothField(blend(Y1, Y2), name=f"Yeps{eps:g}")
    return PiecewiseSystem(
        X, Y, f, MODEL_BOX,
        meta={"model": f"Zeps:{eps:g}", "eps": eps, "g": g,
              "tsing": [(0.0, 0.0, 0.0), (2.0, 2.0, 0.0)]})


# ---------------------------------------------------------------------------
# involutions and return maps (planar, exact coefficients)
# ---------------------------------------------------------------------------

def model_involution(name, side, q):
    """Planar half-return involution of Z1 or Z2.

    Accepts a length-2 or length-3 point; preserves exact input types
    (Fractions stay Fractions).  Applying the map twice is the identity.
    """
    kind, _ = parse_model_id(name)
    x, y = q[0], q[1]
    if kind == "Z1":
        out = (x + 2 * y, -y) if side == "upper" else (-x, 4 * x + y)
    elif kind == "Z2":
        if side == "upper":
            out = (x + 2 * (y - 2), 2 - (y - 2))
        else:
            out = (2 - (x - 2), y + 6 * (x - 2))
    else:
        raise ConfigError(f"no closed-form involution for {name}")
    if len(q) == 3:
        return (out[0], out[1], 0 * q[2])
    return out


def model_return_map(name, q, order="upper_first"):
    """Composed crossing return map of Z1 or Z2.

    order="upper_first" composes lower∘upper (the convention the models
    are printed in); "lower_first" gives the inverse composition.
    """
    if order == "upper_first":
        return model_involution(name, "lower", model_involution(name, "upper", q))
    if order == "lower_first":
        return model_involution(name, "upper", model_involution(name, "lower", q))
    raise ConfigError(f"unknown composition order {order!r}")


def model_half_maps(name):
    """(upper, lower) planar involutions as callables on (x, y) arrays."""
    def up(q):
        o = model_involution(name, "upper", (float(q[0]), float(q[1])))
        return np.array(o)

    def down(q):
        o = model_involution(name, "lower", (float(q[0]), float(q[1])))
        return np.array(o)
    return up, down


@dataclass
class InvariantLine:
    """Parametrized line: point + alpha * direction."""

    point: np.ndarray
    direction: np.ndarray

    def at(self, alpha):
        return self.point + np.multiply.outer(np.asarray(alpha), self.direction)

    def distance(self, q):
        d = np.asarray(q, dtype=float)[:2] - self.point[:2]
        u = self.direction[:2] / np.linalg.norm(self.direction[:2])
        return abs(d[0] * u[1] - d[1] * u[0])


@dataclass
class EigenData:
    values: tuple            # (lambda_plus, lambda_minus), floats
    values_exact: tuple      # same as Quad
    vectors: tuple           # (v_plus, v_minus), planar float arrays
    lines: tuple             # (D_plus, D_minus) InvariantLine
    matrix: np.ndarray       # linear part of the return map (upper_first)
    fixed_point: np.ndarray


def model_eigen_data(name):
    kind, _ = parse_model_id(name)
    if kind == "Z1":
        lp = Quad(3, 2, 2)
        lm = Quad(3, -2, 2)
        vp = (Quad(-1, Fraction(1, 2), 2), Quad(1))
        vm = (Quad(-1, Fraction(-1, 2), 2), Quad(1))
        fp = np.array([0.0, 0.0])
        mat = np.array([[-1.0, -2.0], [4.0, 7.0]])
    elif kind == "Z2":
        lp = Quad(5, 2, 6)
        lm = Quad(5, -2, 6)
        vp = (Quad(-1, Fraction(1, 3), 6), Quad(1))
        vm = (Quad(-1, Fraction(-1, 3), 6), Quad(1))
        fp = np.array([2.0, 2.0])
        mat = np.array([[-1.0, -2.0], [6.0, 11.0]])
    else:
        raise ConfigError(f"no closed-form eigen data for {name}")
    v_plus = np.array([float(vp[0]), float(vp[1])])
    v_minus = np.array([float(vm[0]), float(vm[1])])
    lines = (InvariantLine(fp.copy(), v_plus / np.linalg.norm(v_plus)),
             InvariantLine(fp.copy(), v_minus / np.linalg.norm(v_minus)))
    return EigenData((float(lp), float(lm)), (lp, lm),
                     (v_plus, v_minus), lines, mat, fp)


# ---------------------------------------------------------------------------
# crossing-cone parametrizations (both half-spaces)
# ---------------------------------------------------------------------------

@dataclass
class ConeParametrization:
    """Surface (alpha, t) -> R^3 covering one half of a cone branch.

    The boundary curves t = 0 and t = t_max(alpha) lie on the switching
    manifold; interior points have the sign of the half-space tag.
    """

    branch: str       # "unstable-of-Z1" | "stable-of-Z2"
    halfspace: str    # "z>0" | "z<0"
    point: object     # (alpha, t) -> np.ndarray(3)
    t_max: object     # alpha -> float
    alpha_sign: float  # admissible alphas satisfy alpha * alpha_sign >= 0


def cone_parametrization(branch, halfspace="z>0"):
    c2 = SQRT2 / 2

    if branch == "unstable-of-Z1":
        if halfspace == "z>0":
            def point(a, t):
                return np.array([(-1 + c2) * a + t, a - t,
                                 -(a - t) ** 2 / 2 + a ** 2 / 2])
            return ConeParametrization(branch, halfspace, point,
                                       lambda a: 2.0 * a, +1.0)

        def point(a, t):
            x0 = (-1 - c2) * a
            return np.array([x0 - t, a + 2 * t, ((x0 - t) ** 2 - x0 ** 2) / 2])
        return ConeParametrization(branch, halfspace, point,
                                   lambda a: 2.0 * (-1 - c2) * a, -1.0)

    if branch == "stable-of-Z2":
        c23 = math.sqrt(2.0 / 3.0)
        if halfspace == "z>0":
            def point(a, t):
                return np.array([2 + (-1 - c23) * a + t, 2 + a - t,
                                 (2 + a) ** 2 / 2 - (2 + a - t) ** 2 / 2 - 2 * t])
            return ConeParametrization(branch, halfspace, point,
                                       lambda a: 2.0 * a, +1.0)

        def point(a, t):
            x0 = 2 + (-1 + c23) * a
            return np.array([x0 - t, 2 + a + 3 * t,
                             ((x0 - t) ** 2 - x0 ** 2) / 2 + 2 * t])
        return ConeParametrization(branch, halfspace, point,
                                   lambda a: 2.0 * ((-1 + c23) * a), -1.0)

    raise ConfigError(f"unknown cone branch {branch!r}")


# ---------------------------------------------------------------------------
# section curves on the communication plane
# ---------------------------------------------------------------------------

@dataclass
class SectionCurve:
    """Arc alpha -> point on the communication plane."""

    name: str
    point: object            # alpha -> np.ndarray(3), vectorized over alpha
    alpha_min: float
    alpha_max: float
    alpha_min_exact: Quad = None
    alpha_max_exact: Quad = None

    def sample(self, n):
        alphas = np.linspace(self.alpha_min, self.alpha_max, n)
        return alphas, np.array([self.point(a) for a in alphas])


def cone_section_curves():
    """Upper-half section arcs of the two cones on the plane Pi."""
    def gu(a):
        return np.array([-5.0 / 7.0 * (-5.0 + SQRT2 * a),
                         (-50.0 + 17.0 * SQRT2 * a) / 14.0,
                         (-1250.0 + 850.0 * SQRT2 * a - 191.0 * a ** 2) / 196.0])

    gu_lo = Quad(Fraction(-350, 191), Fraction(425, 191), 2)
    gu_hi = Quad(Fraction(350, 191), Fraction(425, 191), 2)

    def gs(a):
        return np.array([5.0 / 21.0 * (-9.0 + 2.0 * SQRT6 * a),
                         (129.0 - 17.0 * SQRT6 * a) / 21.0,
                         (-2523.0 + 986.0 * SQRT6 * a - 431.0 * a ** 2) / 294.0])

    gs_lo = Quad(Fraction(-609, 431), Fraction(493, 431), 6)
    gs_hi = Quad(Fraction(609, 431), Fraction(493, 431), 6)

    return (SectionCurve("Cu_plus", gu, float(gu_lo), float(gu_hi), gu_lo, gu_hi),
            SectionCurve("Cs_plus", gs, float(gs_lo), float(gs_hi), gs_lo, gs_hi))


def _arc_plane_time(seed, drift):
    """Flight time at which a straight-drift arc reaches the plane Pi.

    g is affine and the planar flow components are linear in t, so
    g(arc(t)) = g(seed) + slope * t with slope = 1.7*dx + dy.
    """
    slope = 1.7 * drift[0] + drift[1]
    gval = seed[1] + 1.7 * seed[0] - 2.5
    return -gval / slope


def lower_section_curves():
    """z<0 section arcs of the two cones on the plane Pi (derived).

    Parametrized by the seed coordinate on the corresponding invariant
    line; admissible intervals are where 0 <= t(alpha) <= t_max(alpha).
    """
    cone_u = cone_parametrization("unstable-of-Z1", "z<0")
    cone_s = cone_parametrization("stable-of-Z2", "z<0")

    def make(cone, drift, seed_of_alpha):
        def point(a):
            t = _arc_plane_time(seed_of_alpha(a), drift)
            return cone.point(a, t)

        # solve t(a) = 0 and t(a) = t_max(a); both are affine in a
        def t_of(a):
            return _arc_plane_time(seed_of_alpha(a), drift)

        a0, a1 = -1.0, -2.0
        # t affine: t(a) = c + m a
        m = (t_of(a1) - t_of(a0)) / (a1 - a0)
        c = t_of(a0) - m * a0
        root_t0 = -c / m
        # t(a) - t_max(a) is affine as well
        def excess(a):
            return t_of(a) - cone.t_max(a)
        me = (excess(a1) - excess(a0)) / (a1 - a0)
        ce = excess(a0) - me * a0
        root_tmax = -ce / me
        lo, hi = sorted((root_t0, root_tmax))
        return SectionCurve(f"low_{cone.branch}", point, lo, hi)

    c2 = SQRT2 / 2
    c23 = math.sqrt(2.0 / 3.0)
    curve_u = make(cone_u, (-1.0, 2.0),
                   lambda a: ((-1 - c2) * a, a))
    curve_s = make(cone_s, (-1.0, 3.0),
                   lambda a: (2 + (-1 + c23) * a, 2 + a))
    return curve_u, curve_s


# ---------------------------------------------------------------------------
# cone intersection points on Pi
# ---------------------------------------------------------------------------

P_PLUS_EXACT = (Quad(Fraction(335, 49), Fraction(-40, 49), 51),
                Quad(Fraction(-447, 49), Fraction(68, 49), 51),
                Quad(Fraction(-330577, 4802), Fraction(48248, 4802), 51))

_P_MINUS_CACHE = {}


def _intersect_section_curves(cu, cs, n_scan=400):
    """Locate the transverse intersection of two section arcs by scan + Newton."""
    au = np.linspace(cu.alpha_min, cu.alpha_max, n_scan)
    asv = np.linspace(cs.alpha_min, cs.alpha_max, n_scan)
    Pu = np.array([cu.point(a) for a in au])
    Ps = np.array([cs.point(a) for a in asv])
    d2 = ((Pu[:, None, :] - Ps[None, :, :]) ** 2).sum(axis=2)
    iu, js = np.unravel_index(np.argmin(d2), d2.shape)
    a, b = au[iu], asv[js]

    def F(ab):
        d = cu.point(ab[0]) - cs.point(ab[1])
        return np.array([d[0], d[2]])   # x and z coordinates pin the planar point

    ab = np.array([a, b])
    for _ in range(60):
        val = F(ab)
        if np.linalg.norm(val) < 1e-13:
            break
        h = 1e-7
        J = np.column_stack([(F(ab + np.array([h, 0])) - F(ab - np.array([h, 0]))) / (2 * h),
                             (F(ab + np.array([0, h])) - F(ab - np.array([0, h]))) / (2 * h)])
        ab = ab - np.linalg.solve(J, val)
    return cu.point(ab[0]), ab


def cone_intersection_point(side="upper"):
    """Intersection of the two cone section arcs on Pi.

    The z>0 point has an exact closed form; the z<0 twin is located by
    running the same intersection routine on the z<0 arcs.
    """
    if side == "upper":
        return np.array([float(v) for v in P_PLUS_EXACT])
    if side != "lower":
        raise ConfigError(f"side must be 'upper' or 'lower', got {side!r}")
    if "p" not in _P_MINUS_CACHE:
        cu, cs = lower_section_curves()
        p, _ = _intersect_section_curves(cu, cs)
        _P_MINUS_CACHE["p"] = p
    return _P_MINUS_CACHE["p"].copy()
