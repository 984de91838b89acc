"""Synthetic piecewise-smooth systems with exactly known return maps.

With switching function z, a field of the form (g'(y)/2, -1, y) has the
planar half-return involution (x, y) -> (x + g(y), -y) for any odd g
(invisible fold on y = 0, return time 2y, quadratic arcs), and
(-1, k/2, -x) has (x, y) -> (-x, y + k x) (invisible fold on x = 0).
The composed crossing return map is therefore known in closed form and
entirely controlled by g and k.

Two members are shipped:

* "transverse": g(y) = 2y - (2/5) y^3, k = 5/2 — a cubic bend of a
  linear-flow model with golden-ratio-squared eigenvalues (3 ± sqrt(5))/2.  Its invariant
  manifolds develop a homoclinic tangle with order-one crossing angles,
  and the tangle lives inside the crossing quadrants xy < 0, so the
  horseshoe orbits are realized by crossing orbits of the flow.  This is
  the positive certification fixture.

* "tangency": the integrable composition of the swap (x, y) -> (y, x)
  with (x, y) -> (3y/(1+y^2) - x, y) (fields (1, -1, y-x) and
  (-1, 0, f(y)/2 - x)).  Its saddle manifolds coincide along a
  separatrix, every homoclinic "crossing" is tangential, and no
  horseshoe certificate exists.  This is the negative fixture.
"""

from __future__ import annotations

import numpy as np

from .core import Box, PiecewiseSystem, ScalarField, SmoothField
from .errors import ConfigError
from .integrate import DEFAULT_CFG, ReturnMapHandle
from .poly import Poly3

TANGLE_EPS = -0.4   # cubic coefficient of g(y) = 2y + eps*y^3


def _switching_z():
    return ScalarField(func=lambda p: p[..., 2] if p.ndim > 1 else p[2],
                       grad=lambda p: np.array([0.0, 0.0, 1.0]),
                       poly=Poly3({(0, 0, 1): 1.0}), name="z")


def shear_involution_system(eps=TANGLE_EPS, k=2.5, name="fixture-transverse",
                            box_half=40.0):
    """System with upper involution (x + 2y + eps*y^3, -y) and lower
    involution (-x, y + k*x), both exact."""
    c = 1.5 * eps

    def upper(p):
        return np.array([1.0 + c * p[1] ** 2, -1.0, p[1]])

    y = Poly3.variable(1)
    X = SmoothField(
        upper,
        polys=(Poly3.constant(1) + c * y * y, Poly3.constant(-1), y),
        flow=lambda t, p: np.array([
            p[0] + t + eps / 2.0 * (p[1] ** 3 - (p[1] - t) ** 3),
            p[1] - t,
            p[2] - (p[1] - t) ** 2 / 2 + p[1] ** 2 / 2]),
        return_time=lambda p: 2.0 * p[1], name=f"X_{name}")
    Y = SmoothField(
        lambda p: np.array([-1.0, k / 2.0, -p[0]]),
        polys=(Poly3.constant(-1), Poly3.constant(k / 2.0),
               -Poly3.variable(0)),
        flow=lambda t, p: np.array([p[0] - t, p[1] + k / 2.0 * t,
                                    p[2] + (p[0] - t) ** 2 / 2 - p[0] ** 2 / 2]),
        return_time=lambda p: 2.0 * p[0], name=f"Y_{name}")
    half = float(box_half)
    box = Box((-half, -half, -half), (half, half, half))
    return PiecewiseSystem(X, Y, _switching_z(), box,
                           meta={"model": name, "tsing": [(0.0, 0.0, 0.0)],
                                 "eps": eps, "k": k})


def swap_involution_system(f, f_poly=None, name="fixture-tangency",
                           box_half=40.0):
    """System with upper involution (y, x) and lower (f(y) - x, y)."""
    X = SmoothField(lambda p: np.array([1.0, -1.0, p[1] - p[0]]),
                    polys=(Poly3.constant(1), Poly3.constant(-1),
                           Poly3.variable(1) - Poly3.variable(0)),
                    name=f"X_{name}")
    y_polys = None
    if f_poly is not None:
        y_polys = (Poly3.constant(-1), Poly3.constant(0),
                   f_poly * 0.5 - Poly3.variable(0))
    Y = SmoothField(lambda p: np.array([-1.0, 0.0, 0.5 * f(p[1]) - p[0]]),
                    polys=y_polys, name=f"Y_{name}")
    half = float(box_half)
    box = Box((-half, -half, -half), (half, half, half))
    return PiecewiseSystem(X, Y, _switching_z(), box,
                           meta={"model": name, "tsing": [(0.0, 0.0, 0.0)],
                                 "f_rule": f})


def fixture_system(kind="transverse"):
    """"transverse" (planted homoclinic tangle) or "tangency" (integrable)."""
    if kind == "transverse":
        f = lambda t: 3.0 * t - t ** 3
        y = Poly3.variable(1)
        return swap_involution_system(f, f_poly=3.0 * y - y * y * y,
                                      name="fixture-transverse")
    if kind == "tangency":
        f = lambda t: 3.0 * t / (1.0 + t * t)
        return swap_involution_system(f)
    raise ConfigError(f"unknown fixture kind {kind!r}")


def fixture_half_maps(kind="transverse"):
    """Exact planar involutions of a fixture (closed-form fast path)."""
    if kind == "transverse":
        f = lambda t: 3.0 * t - t ** 3

        def up(q):
            return np.array([q[1], q[0]])

        def down(q):
            return np.array([f(q[1]) - q[0], q[1]])
        return up, down
    if kind == "tangency":
        f = lambda t: 3.0 * t / (1.0 + t * t)

        def up(q):
            return np.array([q[1], q[0]])

        def down(q):
            return np.array([f(q[1]) - q[0], q[1]])
        return up, down
    raise ConfigError(f"unknown fixture kind {kind!r}")


def fixture_handle(kind="transverse", cfg=DEFAULT_CFG, closed_form=True,
                   check_crossing=False):
    """Return-map handle for a fixture, closed-form by default.

    The composition order matches the construction as written (upper
    involution applied first); pass closed_form=False to cross-validate
    through the numeric integrator.
    """
    Z = fixture_system(kind)
    half_maps = fixture_half_maps(kind) if closed_form else None
    return ReturnMapHandle(Z, order="upper_first", cfg=cfg,
                           half_maps=half_maps,
                           check_crossing=check_crossing)


def model_handle(name, cfg=DEFAULT_CFG, closed_form=False,
                 check_crossing=False, order="upper_first"):
    """Return-map handle for one of the closed-form model systems."""
    from .models import model_half_maps, model_system
    Z = model_system(name)
    half_maps = None
    if closed_form:
        half_maps = model_half_maps(name)
    return ReturnMapHandle(Z, order=order, cfg=cfg, half_maps=half_maps,
                           check_crossing=check_crossing)
