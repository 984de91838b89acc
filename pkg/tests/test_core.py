import numpy as np
import pytest

from filippov3d import models
from filippov3d.core import (FoldClass, PiecewiseSystem, RegionLabel,
                             ScalarField, SmoothField, classify_fold_fold,
                             classify_sigma_point, evaluate_filippov,
                             lie_derivative, normalized_sliding_field,
                             sliding_field, validate_regular_level,
                             validate_scalar_field)
from filippov3d.errors import (DegenerateDenominator, NotAFoldFold,
                               NotSliding, OnSwitchingManifold,
                               UnsupportedOrder)
from filippov3d.poly import Poly3


def test_evaluate_filippov_cases(z1):
    assert np.allclose(evaluate_filippov(z1, [0, 0, 1.0]), [1, -1, 0])
    assert np.allclose(evaluate_filippov(z1, [0, 0, -1.0]), [-1, 2, 0])
    with pytest.raises(OnSwitchingManifold):
        evaluate_filippov(z1, [0.3, -0.4, 0.0])


def test_evaluate_filippov_upper_is_exact(z1, rng):
    for _ in range(20):
        p = rng.uniform(-2, 2, 3)
        p[2] = abs(p[2]) + 0.1
        assert np.array_equal(evaluate_filippov(z1, p), z1.upper(p))


def test_lie_derivative_orders(z1):
    f = z1.switching
    assert lie_derivative(z1.upper, f, [5.0, 2.0, 0.0], 1) == pytest.approx(2.0)
    # second derivative of z along (1, -1, y) is constant -1
    assert lie_derivative(z1.upper, f, [0.3, 7.0, 0.0], 2) == pytest.approx(-1.0)
    assert lie_derivative(z1.lower, f, [3.0, 0.0, 0.0], 1) == pytest.approx(-3.0)
    with pytest.raises(UnsupportedOrder):
        lie_derivative(z1.upper, f, [0, 0, 0.0], 4)


def test_lie_symbolic_matches_finite_difference(z1):
    f = z1.switching
    numeric_upper = SmoothField(lambda p: z1.upper(p))   # strips the tables
    for p in ([0.5, 1.0, 0.0], [-2.0, 0.3, 0.0]):
        sym = lie_derivative(z1.upper, f, p, 2)
        fd = lie_derivative(numeric_upper, f, p, 2)
        assert fd == pytest.approx(sym, rel=1e-5)


def test_classify_sigma_quadrants(z1, z2):
    assert classify_sigma_point(z1, [1.0, 1.0, 0.0]) is RegionLabel.UnstableSliding
    assert classify_sigma_point(z1, [1.0, -1.0, 0.0]) is RegionLabel.Crossing
    assert classify_sigma_point(z1, [-1.0, -1.0, 0.0]) is RegionLabel.StableSliding
    assert classify_sigma_point(z2, [0.0, 0.0, 0.0]) is RegionLabel.StableSliding
    assert classify_sigma_point(z1, [0.0, 1.0, 0.0]) is RegionLabel.TangencyY
    assert classify_sigma_point(z1, [1.0, 0.0, 0.0]) is RegionLabel.TangencyX
    assert classify_sigma_point(z1, [0.0, 0.0, 0.0]) is RegionLabel.TangencyBoth


def test_region_partition_property(z1, z2, rng):
    """Each sampled point gets exactly one label and matches the closed
    forms of the two quadrant partitions."""
    for Z, shift in ((z1, 0.0), (z2, 2.0)):
        pts = rng.uniform(-3, 3, size=(1000, 2)) + shift
        for x, y in pts:
            label = classify_sigma_point(Z, [x, y, 0.0])
            u, v = x - shift, y - shift
            if abs(u) < 1e-8 or abs(v) < 1e-8:
                continue
            if u > 0 and v > 0:
                assert label is RegionLabel.UnstableSliding
            elif u < 0 and v < 0:
                assert label is RegionLabel.StableSliding
            else:
                assert label is RegionLabel.Crossing


def test_classify_fold_fold(z1, z2):
    rep = classify_fold_fold(z1, [0.0, 0.0, 0.0])
    assert rep.fold_class is FoldClass.Invisible_T
    assert rep.x2f == pytest.approx(-1.0)
    assert rep.y2f == pytest.approx(1.0)
    assert abs(rep.transversality_det) > 1e-8

    rep2 = classify_fold_fold(z2, [2.0, 2.0, 0.0])
    assert rep2.fold_class is FoldClass.Invisible_T


def test_fold_fold_sign_table(z1):
    # flip both fields' normal curvature: visible-visible
    X = SmoothField(lambda p: np.array([1.0, -1.0, -p[1]]),
                    polys=(Poly3.constant(1), Poly3.constant(-1),
                           -Poly3.variable(1)))
    Y = SmoothField(lambda p: np.array([-1.0, 2.0, p[0]]),
                    polys=(Poly3.constant(-1), Poly3.constant(2),
                           Poly3.variable(0)))
    Z = PiecewiseSystem(X, Y, z1.switching, z1.box)
    assert classify_fold_fold(Z, [0, 0, 0.0]).fold_class is FoldClass.VisibleVisible


def test_fold_fold_rejects_degenerate(z1):
    # upper field with cubic tangency: X^2 f = 0 on the fold
    X = SmoothField(lambda p: np.array([1.0, 0.0, p[1] ** 2]),
                    polys=(Poly3.constant(1), Poly3.constant(0),
                           Poly3.variable(1) * Poly3.variable(1)))
    Z = PiecewiseSystem(X, z1.lower, z1.switching, z1.box)
    with pytest.raises(NotAFoldFold):
        classify_fold_fold(Z, [0.0, 0.0, 0.0])


def test_sliding_field_values(z1, z2):
    F = sliding_field(z1, [-1.0, -1.0, 0.0])
    assert np.allclose(F, [0.0, 0.5, 0.0], atol=1e-12)
    # tangency to the switching manifold
    g = z1.switching.gradient(np.array([-1.0, -1.0, 0.0]))
    assert abs(F @ g) < 1e-10 * max(np.linalg.norm(F), 1) * np.linalg.norm(g)

    with pytest.raises(NotSliding):
        sliding_field(z1, [1.0, -1.0, 0.0])


def test_sliding_vs_normalized_consistency(z1, z2, rng):
    """F_Z^N = (Yf - Xf) * F_Z on sliding regions; anti-parallel on the
    unstable side."""
    from filippov3d.core import lie_pair
    for _ in range(50):
        x, y = rng.uniform(0.1, 3, 2)
        # stable sliding of Z1 is the negative quadrant
        p = np.array([-x, -y, 0.0])
        xf, yf = lie_pair(z1, p)
        F = sliding_field(z1, p)
        FN = normalized_sliding_field(z1, p)
        assert np.allclose(FN, (yf - xf) * F, atol=1e-10)
        # unstable quadrant: anti-parallel orientation
        q = np.array([x, y, 0.0])
        Fq = sliding_field(z1, q)
        FNq = normalized_sliding_field(z1, q)
        cos = (Fq @ FNq) / (np.linalg.norm(Fq) * np.linalg.norm(FNq))
        assert cos < -1 + 1e-9


def test_normalized_field_on_double_tangency(z1):
    assert np.allclose(normalized_sliding_field(z1, [0.0, 0.0, 0.0]),
                       [0.0, 0.0, 0.0])


def test_sliding_field_cross_check_z2(z2):
    from filippov3d.core import lie_pair
    p = np.array([0.0, 0.0, 0.0])
    xf, yf = lie_pair(z2, p)
    F = sliding_field(z2, p)
    FN = normalized_sliding_field(z2, p)
    assert np.allclose(F, FN / (yf - xf), atol=1e-12)


def test_degenerate_denominator():
    # equal one-sided fields: Yf - Xf = 0 wherever both slide
    f = ScalarField(poly=Poly3({(0, 0, 1): 1.0}))
    X = SmoothField(lambda p: np.array([0.0, 1.0, -1.0]))
    Z = PiecewiseSystem(X, X, f)
    with pytest.raises((DegenerateDenominator, NotSliding)):
        sliding_field(Z, [0.0, 0.0, 0.0])


def test_field_validators(z1, rng):
    ok, worst = validate_scalar_field(z1.switching, z1.box, rng, n=50)
    assert ok, worst
    assert validate_regular_level(z1.switching, z1.box, rng, n=50)


def test_flow_consistency_with_ode(z1, z2, rng):
    """Closed-form flows satisfy their ODEs by finite differences."""
    for Z in (z1, z2):
        worst = 0.0
        for _ in range(200):
            p = rng.normal(size=3)
            t = rng.normal()
            for V in (Z.upper, Z.lower):
                q = V.flow(t, p)
                h = 1e-6
                fd = (V.flow(t + h, p) - V.flow(t - h, p)) / (2 * h)
                worst = max(worst, np.linalg.norm(fd - V(q)))
        assert worst < 1e-8
