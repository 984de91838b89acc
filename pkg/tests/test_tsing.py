import math

import numpy as np
import pytest

from filippov3d import models, tsing
from filippov3d.core import PiecewiseSystem, SmoothField
from filippov3d.errors import NonHyperbolic, NotTSingularity
from filippov3d.integrate import ReturnMapHandle
from filippov3d.poly import Poly3


def test_find_t_singularities(z1, z2):
    found = tsing.find_t_singularities(z1, ((-3, -3), (3, 3)), 12)
    assert len(found) == 1
    assert np.allclose(found[0], [0, 0, 0], atol=1e-9)

    found = tsing.find_t_singularities(z2, ((-1, -1), (5, 5)), 12)
    assert len(found) == 1
    assert np.allclose(found[0], [2, 2, 0], atol=1e-9)

    assert tsing.find_t_singularities(z1, ((1, 1), (3, 3)), 8) == []


def test_analyze_z1(rep1):
    lam_p, lam_m = rep1.eigenvalues
    assert lam_p == pytest.approx(3 + 2 * math.sqrt(2), abs=1e-6)
    assert lam_m == pytest.approx(3 - 2 * math.sqrt(2), abs=1e-6)
    assert lam_p * lam_m == pytest.approx(1.0, abs=1e-6)
    assert rep1.stable and rep1.saddle_ok and rep1.sector_ok
    # eigendirections within 1e-5 angle of the exact ones
    ed = models.model_eigen_data("Z1")
    for v_num, v_exact in zip(rep1.eigenvectors, ed.vectors):
        u = v_exact / np.linalg.norm(v_exact)
        cos = abs(float(v_num @ u))
        assert math.acos(min(1.0, cos)) < 1e-5


def test_analyze_z2(rep2):
    lam_p, lam_m = rep2.eigenvalues
    assert lam_p == pytest.approx(5 + 2 * math.sqrt(6), abs=1e-6)
    assert lam_m == pytest.approx(5 - 2 * math.sqrt(6), abs=1e-6)
    assert rep2.stable


def test_report_serialization(rep1):
    d = rep1.to_json_dict()
    assert d["fold_class"] == "Invisible_T"
    assert d["stable"] is True
    assert len(d["jacobian"]) == 2


def test_unstable_verdict_fixture(z1, cfg):
    """Same upper field, lower drift reversed: the saddle eigendirections
    land in the sliding quadrants, so the verdict must be unstable."""
    Y = SmoothField(lambda p: np.array([-1.0, -2.0, -p[0]]),
                    polys=(Poly3.constant(-1), Poly3.constant(-2),
                           -Poly3.variable(0)))
    Z = PiecewiseSystem(z1.upper, Y, z1.switching, z1.box)
    h = ReturnMapHandle(Z, order="upper_first", cfg=cfg,
                        check_crossing=False)
    rep = tsing.analyze_t_singularity(Z, np.zeros(3), h, cfg)
    assert not rep.sector_ok
    assert not rep.stable


def test_nonhyperbolic_fixture(z1, cfg):
    """Lower drift tuned so the return-map trace is exactly 2."""
    Y = SmoothField(lambda p: np.array([-1.0, 1.0, -p[0]]),
                    polys=(Poly3.constant(-1), Poly3.constant(1),
                           -Poly3.variable(0)))
    Z = PiecewiseSystem(z1.upper, Y, z1.switching, z1.box)
    h = ReturnMapHandle(Z, order="upper_first", cfg=cfg,
                        check_crossing=False)
    with pytest.raises(NonHyperbolic):
        tsing.analyze_t_singularity(Z, np.zeros(3), h, cfg)


def test_not_t_singularity(z1, h1, cfg):
    with pytest.raises(NotTSingularity):
        # a plain crossing point is not even a tangential singularity
        tsing.analyze_t_singularity(z1, np.array([1.0, -1.0, 0.0]), h1, cfg)


def test_sector_test_sign_invariance(z1, rep1, cfg):
    """Probing v and -v gives the same sector verdict."""
    from filippov3d.core import lie_pair
    chart = rep1.chart
    for v in rep1.eigenvectors:
        for s in (1.0, -1.0):
            q = chart.embed(s * 1e-4 * v)
            xf, yf = lie_pair(z1, q)
            assert xf * yf > 0


def test_sample_diabolo_z1(z1, rep1, cfg):
    sample = tsing.sample_diabolo(z1, rep1, "unstable", n_rays=6,
                                  radius=0.5, cfg=cfg)
    assert len(sample.arcs) == 12
    ed = models.model_eigen_data("Z1")
    Dp, Dm = ed.lines
    for arc in sample.arcs:
        for endpoint in (arc[0], arc[-1]):
            assert abs(endpoint[2]) < 1e-9
            assert min(Dp.distance(endpoint), Dm.distance(endpoint)) < 1e-6


def test_sample_diabolo_z2_stable(z2, rep2, cfg):
    sample = tsing.sample_diabolo(z2, rep2, "stable", n_rays=5,
                                  radius=0.4, cfg=cfg)
    ed = models.model_eigen_data("Z2")
    Dp, Dm = ed.lines
    for arc in sample.arcs:
        for endpoint in (arc[0], arc[-1]):
            assert min(Dp.distance(endpoint), Dm.distance(endpoint)) < 1e-6


def test_sample_diabolo_radius_scaling(z1, rep1, cfg):
    """Arc diameters shrink monotonically with the seeding radius."""
    diam_prev = None
    for radius in (0.4, 0.2, 0.1):
        sample = tsing.sample_diabolo(z1, rep1, "unstable", n_rays=3,
                                      radius=radius, cfg=cfg)
        diam = max(np.linalg.norm(arc[-1] - arc[0]) for arc in sample.arcs)
        if diam_prev is not None:
            assert diam < diam_prev
        diam_prev = diam
