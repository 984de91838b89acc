import math
from fractions import Fraction

import numpy as np
import pytest

from filippov3d import models
from filippov3d.exact import Quad


def test_involution_examples():
    assert models.model_involution("Z1", "upper", (1, 1)) == (3, -1)
    assert models.model_involution("Z1", "lower", (1, 0)) == (-1, 4)
    assert models.model_involution("Z2", "lower", (3, 2)) == (1, 8)


def test_involution_fixes_fold_line():
    # upper fold of Z1 is y = 0; lower fold is x = 0
    assert models.model_involution("Z1", "upper", (2.5, 0)) == (2.5, 0)
    assert models.model_involution("Z1", "lower", (0, -1.75)) == (0, -1.75)
    assert models.model_involution("Z2", "upper", (0.5, 2)) == (0.5, 2)


def test_involution_is_exact_involution(rng):
    """Applying twice is the identity, exactly in rational arithmetic."""
    for name in ("Z1", "Z2"):
        for side in ("upper", "lower"):
            for _ in range(25):
                q = (Fraction(int(rng.integers(-50, 50)), 7),
                     Fraction(int(rng.integers(-50, 50)), 9))
                out = models.model_involution(
                    name, side, models.model_involution(name, side, q))
                assert out == q
    # floating point round trip
    q = (0.123456, -3.25)
    out = models.model_involution(
        "Z2", "lower", models.model_involution("Z2", "lower", q))
    assert abs(out[0] - q[0]) < 1e-12 and abs(out[1] - q[1]) < 1e-12


def test_return_map_examples():
    assert models.model_return_map("Z1", (1, 0)) == (-1, 4)
    assert models.model_return_map("Z1", (0, 0)) == (0, 0)
    assert models.model_return_map("Z2", (2, 2)) == (2, 2)


def test_return_map_orders_are_inverse():
    q = (0.37, -1.2)
    fwd = models.model_return_map("Z1", q, order="upper_first")
    back = models.model_return_map("Z1", fwd, order="lower_first")
    assert back[0] == pytest.approx(q[0], abs=1e-12)
    assert back[1] == pytest.approx(q[1], abs=1e-12)


def test_eigen_data():
    ed1 = models.model_eigen_data("Z1")
    assert ed1.values[0] == pytest.approx(3 + 2 * math.sqrt(2))
    assert ed1.values[1] == pytest.approx(3 - 2 * math.sqrt(2))
    ed2 = models.model_eigen_data("Z2")
    assert ed2.values[0] == pytest.approx(5 + 2 * math.sqrt(6))
    assert ed2.values[1] == pytest.approx(5 - 2 * math.sqrt(6))
    for ed in (ed1, ed2):
        assert ed.values[0] * ed.values[1] == pytest.approx(1.0, abs=1e-12)
        for lam, v in zip(ed.values, ed.vectors):
            assert np.linalg.norm(ed.matrix @ v - lam * v) <= 1e-12
        assert np.linalg.det(ed.matrix) == pytest.approx(1.0, abs=1e-12)


def test_invariant_lines(rng):
    """The return map preserves each eigenline; the upper involution swaps
    the two lines."""
    for name in ("Z1", "Z2"):
        ed = models.model_eigen_data(name)
        Dp, Dm = ed.lines
        for line in (Dp, Dm):
            for a in rng.uniform(-3, 3, 50):
                q = line.at(a)
                img = models.model_return_map(name, (q[0], q[1]))
                assert line.distance(np.array(img)) < 1e-10
        # upper involution carries D- onto D+
        for a in rng.uniform(-3, 3, 50):
            q = Dm.at(a)
            img = models.model_involution(name, "upper", (q[0], q[1]))
            assert Dp.distance(np.array(img)) < 1e-10


def test_return_time_vanishes_on_sigma(rng):
    Z1 = models.model_system("Z1")
    for _ in range(100):
        x, y = rng.uniform(-4, 4, 2)
        p = np.array([x, y, 0.0])
        t = Z1.upper.return_time(p)
        assert Z1.upper.flow(t, p)[2] == pytest.approx(0.0, abs=1e-12)
        t = Z1.lower.return_time(p)
        assert Z1.lower.flow(t, p)[2] == pytest.approx(0.0, abs=1e-12)


def test_flow_group_property(z1, rng):
    for _ in range(50):
        p = rng.normal(size=3)
        s, t = rng.normal(size=2)
        a = z1.upper.flow(s, z1.upper.flow(t, p))
        b = z1.upper.flow(s + t, p)
        assert np.allclose(a, b, atol=1e-10)


def test_cone_parametrization_boundaries():
    for branch in ("unstable-of-Z1", "stable-of-Z2"):
        for half in ("z>0", "z<0"):
            cone = models.cone_parametrization(branch, half)
            for a in (0.3, 1.0, 2.4):
                alpha = cone.alpha_sign * a
                t_max = cone.t_max(alpha)
                assert abs(cone.point(alpha, 0.0)[2]) < 1e-10
                assert abs(cone.point(alpha, t_max)[2]) < 1e-10
                mid = cone.point(alpha, 0.5 * t_max)[2]
                assert (mid > 0) == (half == "z>0")


def test_section_curves_on_plane_and_cone():
    g = models.communication_plane()
    gu, gs = models.cone_section_curves()
    for curve, cone_name in ((gu, "unstable-of-Z1"), (gs, "stable-of-Z2")):
        cone = models.cone_parametrization(cone_name)
        for a in np.linspace(curve.alpha_min, curve.alpha_max, 9):
            pt = curve.point(a)
            assert abs(g(pt)) < 1e-9
            # the curve lies on the cone: recover the flight parameter
            if cone_name == "unstable-of-Z1":
                t = a - pt[1]
            else:
                t = 2 + a - pt[1]
            assert np.allclose(cone.point(a, t), pt, atol=1e-9)
        # interval endpoints sit on the switching manifold
        assert abs(curve.point(curve.alpha_min)[2]) < 1e-9
        assert abs(curve.point(curve.alpha_max)[2]) < 1e-9


def test_intersection_point_exact():
    p = models.cone_intersection_point("upper")
    assert np.allclose(p, [1.0070, 0.7881, 2.9118], atol=5e-4)
    g = models.communication_plane()
    assert abs(g(p)) < 1e-9
    # on both curves: dense sampling plus local refinement of the nearest
    # parameter
    from scipy.optimize import minimize_scalar
    gu, gs = models.cone_section_curves()
    for curve in (gu, gs):
        als = np.linspace(curve.alpha_min, curve.alpha_max, 4001)
        a0 = min(als, key=lambda a_: np.linalg.norm(curve.point(a_) - p))
        res = minimize_scalar(
            lambda a_: float(np.linalg.norm(curve.point(a_) - p)),
            bounds=(a0 - 1e-2, a0 + 1e-2), method="bounded",
            options={"xatol": 1e-14})
        assert res.fun < 1e-7


def test_intersection_transversality():
    gu, gs = models.cone_section_curves()
    p = models.cone_intersection_point("upper")
    # tangents at the closest parameters
    def tangent(curve):
        als = np.linspace(curve.alpha_min, curve.alpha_max, 4001)
        a = min(als, key=lambda a_: np.linalg.norm(curve.point(a_) - p))
        h = 1e-6
        d = curve.point(a + h) - curve.point(a - h)
        return d / np.linalg.norm(d)
    tu, ts = tangent(gu), tangent(gs)
    angle = np.arccos(min(1.0, abs(tu @ ts)))
    assert angle > 0.01


def test_lower_intersection_point():
    p = models.cone_intersection_point("lower")
    g = models.communication_plane()
    assert abs(g(p)) < 1e-8
    assert p[2] < 0


def test_regularization_blend():
    assert models.regularization_blend(0.0) == 0.0
    assert models.regularization_blend(1.0) == 1.0
    assert models.regularization_blend(-2.0) == -1.0
    # C^1 at the saturation knots: one-sided slopes vanish
    h = 1e-7
    for knot in (1.0, -1.0):
        inner = (models.regularization_blend(knot)
                 - models.regularization_blend(knot - np.sign(knot) * h)) / h
        assert abs(inner) < 1e-6


def test_regularized_saturation(rng):
    for eps in (0.2, 0.05):
        Z = models.model_system(f"Zeps:{eps}")
        Z1 = models.model_system("Z1")
        Z2 = models.model_system("Z2")
        g = models.communication_plane()
        for _ in range(50):
            p = rng.uniform(-3, 4, 3)
            if g(p) <= -eps:
                assert np.array_equal(Z.upper(p), Z1.upper(p))
                assert np.array_equal(Z.lower(p), Z1.lower(p))
            elif g(p) >= eps:
                assert np.array_equal(Z.upper(p), Z2.upper(p))
                assert np.array_equal(Z.lower(p), Z2.lower(p))


def test_crossz0_carries_aux_switching():
    Z = models.model_system("CrossZ0")
    assert len(Z.aux_switchings) == 1
    g = Z.aux_switchings[0]
    # the first system is active on g < 0 (its two-fold sits there)
    assert g(np.array([0.0, 0.0, 0.0])) < 0
    assert g(np.array([2.0, 2.0, 0.0])) > 0
    Z1 = models.model_system("Z1")
    assert np.array_equal(Z.upper(np.array([0.0, 0.0, 0.5])),
                          Z1.upper(np.array([0.0, 0.0, 0.5])))


def test_quad_arithmetic():
    a = Quad(3, 2, 2)
    b = Quad(3, -2, 2)
    assert float(a * b) == pytest.approx(1.0)
    assert float(a + b) == pytest.approx(6.0)
    assert (a - Quad(3, 2, 2)) == Quad(0)


def test_model_id_parsing():
    from filippov3d.errors import ConfigError
    assert models.parse_model_id("Zeps:0.05") == ("Zeps", 0.05)
    with pytest.raises(ConfigError):
        models.parse_model_id("Zeps:7")
    with pytest.raises(ConfigError):
        models.parse_model_id("nope")
