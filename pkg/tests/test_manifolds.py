import numpy as np
import pytest

from filippov3d import geom, manifolds, models
from filippov3d.errors import Ambiguous, NotTransverse
from filippov3d.integrate import SectionPlane

PI_NORM = float(np.hypot(1.7, 1.0))


def pi_plane(level=0.0):
    return SectionPlane(np.array([1.7, 1.0, 0.0]) / PI_NORM,
                        (2.5 + level) / PI_NORM)


@pytest.fixture(scope="module")
def wu1(h1, rep1):
    return manifolds.grow_manifold(h1, rep1, "u-", 3.0)


@pytest.fixture(scope="module")
def trace_u(z1, rep1, cfg):
    return manifolds.trace_cone_circle(z1, rep1, "unstable", pi_plane(),
                                       cfg, h_max=5e-3)


@pytest.fixture(scope="module")
def trace_s(z2, rep2, cfg):
    return manifolds.trace_cone_circle(z2, rep2, "stable", pi_plane(),
                                       cfg, h_max=5e-3)


def test_grow_follows_invariant_lines(h1, rep1, h2, rep2):
    ed1 = models.model_eigen_data("Z1")
    ed2 = models.model_eigen_data("Z2")
    for h, rep, ed, branches in ((h1, rep1, ed1, ("u-", "s+")),
                                 (h2, rep2, ed2, ("u+", "s-"))):
        for branch in branches:
            line = ed.lines[0] if branch.startswith("u") else ed.lines[1]
            curve = manifolds.grow_manifold(h, rep, branch, 3.0)
            assert curve.total_arclength() >= 3.0
            worst = max(line.distance(p) for p in curve.points)
            assert worst < 1e-6


def test_grow_zero_arclength_is_fundamental_domain(h1, rep1):
    curve = manifolds.grow_manifold(h1, rep1, "u+", 0.0)
    assert curve.generations == 0
    lam = rep1.eigenvalues[0]
    # fundamental domain spans [delta0, lam*delta0]
    r = np.linalg.norm(curve.points[-1] - curve.points[0])
    assert r <= lam * 1e-3 * 1.05


def test_invariance_residual(wu1):
    assert manifolds.invariance_residual(wu1, n_samples=40) < 1e-6


def test_lambda_stretching(h1, rep1):
    """Fundamental-domain images stretch by the unstable eigenvalue per
    generation for the linear model."""
    fund = manifolds.grow_manifold(h1, rep1, "u-", 0.0)
    lam = rep1.eigenvalues[0]
    pts = list(fund.points[1:])      # drop the fixed point itself
    prev_len = geom.arclengths(np.asarray(pts))[-1]
    for _ in range(3):
        pts = [h1.eval(p) for p in pts]
        length = geom.arclengths(np.asarray(pts))[-1]
        ratio = length / prev_len
        assert 0.5 * lam <= ratio <= 2.0 * lam
        assert ratio == pytest.approx(lam, rel=1e-6)
        prev_len = length


def test_trace_matches_closed_form_upper_arcs(trace_u, trace_s, z1, z2):
    gu, gs = models.cone_section_curves()
    for trace, curve, Z in ((trace_u, gu, z1), (trace_s, gs, z2)):
        assert trace.closed(1e-9)
        assert trace.sigma_corner_count(Z.switching) == 2
        i0, i1 = trace.corners
        arc = trace.points[i0:i1 + 1]
        dense = np.array([curve.point(a) for a in
                          np.linspace(curve.alpha_min, curve.alpha_max, 4096)])
        assert geom.hausdorff(arc, dense) < 1e-6


def test_trace_rejects_section_through_vertex(z1, rep1, cfg):
    plane = SectionPlane(np.array([1.7, 1.0, 0.0]) / PI_NORM, 0.0)
    with pytest.raises(NotTransverse):
        manifolds.trace_cone_circle(z1, rep1, "unstable", plane, cfg)


def test_propagate_identity(z1, trace_u, cfg):
    out = manifolds.propagate_circle(z1, trace_u, trace_u.plane, cfg)
    assert np.allclose(out.points, trace_u.points, atol=1e-10)


def test_propagate_crossz0_near_plane(cfg, trace_u):
    """The circle carried a short way into the far system's side stays a
    closed two-corner ring."""
    Z0 = models.model_system("CrossZ0")
    out = manifolds.propagate_circle(Z0, trace_u, pi_plane(0.3), cfg,
                                     h_max=2e-2)
    assert out.closed(1e-7)
    assert len(out.corners) == 2
    f = Z0.switching
    for c in out.corners:
        assert abs(float(f(out.points[c]))) < 1e-6


def test_propagate_crossz0_deep_reaches_sliding(cfg, trace_u):
    """Pushed all the way to the far singularity's local disk, part of the
    circle's orbit tube is captured by stable sliding; the propagation
    reports it rather than fabricating a closed image."""
    from filippov3d.errors import ReachedSliding
    Z0 = models.model_system("CrossZ0")
    target = SectionPlane([0.0, 1.0, 0.0], 2.0 - 0.3, name="y=1.7")
    with pytest.raises(ReachedSliding):
        manifolds.propagate_circle(Z0, trace_u, target, cfg, h_max=2e-2)


def test_propagation_self_convergence(z1, rep1, cfg):
    """Doubling the source resolution moves the image by less than 1e-6
    (image resolution fine enough that chord sag stays below the bound)."""
    Z0 = models.model_system("CrossZ0")
    target = pi_plane(0.05)
    coarse = manifolds.trace_cone_circle(z1, rep1, "unstable", pi_plane(),
                                         cfg, h_max=2e-2)
    fine = manifolds.trace_cone_circle(z1, rep1, "unstable", pi_plane(),
                                       cfg, h_max=1e-2)
    img_c = manifolds.propagate_circle(Z0, coarse, target, cfg, h_max=2e-3)
    img_f = manifolds.propagate_circle(Z0, fine, target, cfg, h_max=2e-3)
    assert geom.hausdorff(img_c.points, img_f.points) < 1e-6


def test_classify_chain_trichotomy(trace_u, trace_s, z1):
    # synthetic disjoint circles
    th = np.linspace(0, 2 * np.pi, 64)
    ring = np.column_stack([np.cos(th), np.sin(th), 0 * th])
    plane = SectionPlane([0.0, 0.0, 1.0], 0.0)
    mk = lambda pts: manifolds.CircleTrace(pts, (0, 32), ["x"] * len(pts),
                                           plane)
    a = mk(ring)
    b = mk(2.5 * ring)
    out = manifolds.classify_chain(a, b, lambda p: 1.0)
    assert out.kind == "NoChain"

    out = manifolds.classify_chain(a, mk(ring.copy()), lambda p: 1.0)
    assert out.kind == "PinchedTorus"


def test_classify_chain_crossz0(trace_u, trace_s, z1):
    chain = manifolds.classify_chain(trace_u, trace_s, z1.switching)
    assert chain.kind == "TransverseChains"
    assert chain.K == 2
    pp = models.cone_intersection_point("upper")
    pm = models.cone_intersection_point("lower")
    d_p = min(np.linalg.norm(np.array(it["point"]) - pp)
              for it in chain.intersections)
    d_m = min(np.linalg.norm(np.array(it["point"]) - pm)
              for it in chain.intersections)
    assert d_p < 1e-6 and d_m < 1e-6
    for it in chain.intersections:
        assert it["angle"] > 0.01
        assert abs(it["f_value"]) > 1e-9
    assert chain.K % 2 == 0


def test_classify_chain_ambiguous_on_tangency():
    """Two rings touching tangentially trigger the explicit escape hatch."""
    th = np.linspace(0, 2 * np.pi, 256)
    ring = np.column_stack([np.cos(th), np.sin(th), np.ones_like(th)])
    shifted = ring + np.array([2.0 - 1e-9, 0.0, 0.0])
    plane = SectionPlane([0.0, 0.0, 1.0], 1.0)
    mk = lambda pts: manifolds.CircleTrace(pts, (0, 128), ["x"] * len(pts),
                                           plane)
    with pytest.raises(Ambiguous):
        manifolds.classify_chain(mk(ring), mk(shifted), lambda p: 1.0)


def test_check_tc_r_z1_alone(z1, cfg):
    """A single linear system has no returning tube: the robustness
    conditions fail at the propagation stage."""
    n = np.array([1.0, 1.0, 0.0]) / np.sqrt(2)
    secs = (SectionPlane(n, 0.5, radius=2.0),
            SectionPlane(n, -0.5, radius=2.0))
    rep = manifolds.check_tc_r(z1, np.zeros(3), secs, cfg)
    assert rep.tc1
    assert not rep.tc2
    assert not rep.overall


def test_homoclinic_points_linear_model_empty(h1, rep1):
    """Distinct eigenlines of a linear map meet only at the fixed point."""
    wu = manifolds.grow_manifold(h1, rep1, "u-", 2.0)
    ws = manifolds.grow_manifold(h1, rep1, "s-", 2.0)
    assert manifolds.find_homoclinic_points(wu, ws) == []


def test_homoclinic_fixture_recovery():
    """The transverse fixture's first crossing is recovered consistently
    under doubled resolution."""
    from filippov3d import tsing
    from filippov3d.fixtures import fixture_handle, fixture_system
    Z = fixture_system("transverse")
    h = fixture_handle("transverse")
    rep = tsing.analyze_t_singularity(Z, np.zeros(3), h)
    wu = manifolds.grow_manifold(h, rep, "u-", 12.0, h_max=4e-3,
                                 roi_radius=6.0)
    ws = manifolds.grow_manifold(h, rep, "s-", 12.0, h_max=4e-3,
                                 roi_radius=6.0)
    homs = manifolds.find_homoclinic_points(wu, ws)
    assert homs
    wu2 = manifolds.grow_manifold(h, rep, "u-", 12.0, h_max=2e-3,
                                  roi_radius=6.0)
    ws2 = manifolds.grow_manifold(h, rep, "s-", 12.0, h_max=2e-3,
                                  roi_radius=6.0)
    homs2 = manifolds.find_homoclinic_points(wu2, ws2)
    p = homs[0].point
    d = min(np.linalg.norm(p - q.point) for q in homs2)
    assert d < 1e-7
    assert homs[0].angle > 1e-3
