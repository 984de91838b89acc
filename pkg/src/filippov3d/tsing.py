"""Detection and analysis of invisible two-fold (T-type) singularities.

A T-type point is a double tangency where both folds are invisible; the
local crossing return map then has a fixed point there.  This module
finds such points, checks the saddle + crossing-sector conditions that
make them robust organizing centers, and samples the pair of invariant
crossing cones that emanate from them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (FoldClass, RegionLabel, SigmaChart, classify_fold_fold,
                   classify_sigma_point, lie_pair)
from .errors import NonHyperbolic, NotTSingularity, ReachedSliding
from .integrate import DEFAULT_CFG, flow_to_sigma, jacobian_2d

SADDLE_MARGIN = 1e-6
SECTOR_PROBE = 1e-4


@dataclass
class TSingularityReport:
    """Everything the downstream pipeline needs about one singular point."""

    location: np.ndarray
    fold: object                      # FoldFoldReport
    jacobian: np.ndarray              # local return map, chart coords
    eigenvalues: tuple                # (lambda_plus, lambda_minus)
    eigenvectors: tuple               # unit planar vectors, chart coords
    sector_ok: bool
    saddle_ok: bool
    stable: bool
    order: str                        # composition order of the analyzed map
    chart: object = None
    notes: list = field(default_factory=list)

    def to_json_dict(self):
        return {
            "location": [float(v) for v in self.location],
            "fold_class": self.fold.fold_class.value,
            "x2f": float(self.fold.x2f),
            "y2f": float(self.fold.y2f),
            "transversality_det": float(self.fold.transversality_det),
            "tangency_dir_x": [float(v) for v in self.fold.tangency_dir_x],
            "tangency_dir_y": [float(v) for v in self.fold.tangency_dir_y],
            "jacobian": [[float(v) for v in row] for row in self.jacobian],
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "eigenvectors": [[float(v) for v in vec] for vec in self.eigenvectors],
            "sector_ok": bool(self.sector_ok),
            "saddle_ok": bool(self.saddle_ok),
            "stable": bool(self.stable),
            "order": self.order,
            "notes": list(self.notes),
        }


def find_t_singularities(Z, search_box, grid_n=16, tol=1e-12):
    """Newton-refined common zeros of (Xf, Yf), filtered to invisible folds.

    search_box is ((u_lo, v_lo), (u_hi, v_hi)) in the chart of the
    switching manifold around its center point.  Results are deduplicated
    at 1e-6 and sorted lexicographically for determinism.
    """
    if grid_n < 8:
        raise ValueError("grid_n must be >= 8")
    (u0, v0), (u1, v1) = search_box
    center = np.zeros(3)
    chart = SigmaChart(Z, center)

    def G(u):
        p = chart.embed(u)
        return np.array(lie_pair(Z, p))

    def G_jac(u, h=1e-6):
        cols = []
        for ax in range(2):
            e = np.zeros(2)
            e[ax] = h
            cols.append((G(u + e) - G(u - e)) / (2 * h))
        return np.column_stack(cols)

    found = []
    us = np.linspace(u0, u1, grid_n)
    vs = np.linspace(v0, v1, grid_n)
    for uu in us:
        for vv in vs:
            u = np.array([uu, vv])
            ok = False
            for _ in range(40):
                g = G(u)
                if np.linalg.norm(g) < tol:
                    ok = True
                    break
                try:
                    du = np.linalg.solve(G_jac(u), g)
                except np.linalg.LinAlgError:
                    break
                if np.linalg.norm(du) > 2 * max(u1 - u0, v1 - v0):
                    break
                u = u - du
            if not ok:
                continue
            if not (u0 - 1e-9 <= u[0] <= u1 + 1e-9
                    and v0 - 1e-9 <= u[1] <= v1 + 1e-9):
                continue
            p = chart.embed(u)
            if any(np.linalg.norm(p - q) < 1e-6 for q in found):
                continue
            try:
                rep = classify_fold_fold(Z, p)
            except Exception:
                continue
            if rep.fold_class is FoldClass.Invisible_T:
                found.append(p)
    found.sort(key=lambda p: (round(p[0], 9), round(p[1], 9), round(p[2], 9)))
    return found


def analyze_t_singularity(Z, p, handle, cfg=DEFAULT_CFG):
    """Full saddle/sector analysis of an invisible two-fold.

    The verdict is stable iff the local return map is a saddle (with the
    hyperbolicity margin) and both eigendirections point into the
    crossing sectors.  Only the tangent directions plus the sampled local
    manifold are checked, not the full germ; reports carry that caveat.
    """
    p = np.asarray(p, dtype=float)
    from .core import tangency_tol
    xf, yf = lie_pair(Z, p)
    if abs(xf) > tangency_tol(np.linalg.norm(Z.upper(p))) or \
            abs(yf) > tangency_tol(np.linalg.norm(Z.lower(p))):
        raise NotTSingularity("point is not a double tangency")
    fold = classify_fold_fold(Z, p)
    if fold.fold_class is not FoldClass.Invisible_T:
        raise NotTSingularity(f"fold class is {fold.fold_class.value}")

    est = jacobian_2d(handle, p)
    J = est.matrix
    tr = J[0, 0] + J[1, 1]
    disc = tr * tr - 4.0 * est.determinant
    if disc <= 0:
        raise NonHyperbolic("complex eigenvalues (focus-type return map)")
    root = np.sqrt(disc)
    lams = sorted([0.5 * (tr + root), 0.5 * (tr - root)], key=abs, reverse=True)
    lam_p, lam_m = lams
    if abs(abs(lam_p) - 1.0) < SADDLE_MARGIN:
        raise NonHyperbolic(f"|lambda| - 1 = {abs(lam_p) - 1:.2e} within margin")
    saddle_ok = abs(lam_p) > 1.0 + SADDLE_MARGIN and abs(lam_m) < 1.0 - SADDLE_MARGIN

    def eigvec(lam):
        A = J - lam * np.eye(2)
        # null vector of a near-singular 2x2
        v = np.array([A[0, 1], -A[0, 0]])
        if np.linalg.norm(v) < 1e-12:
            v = np.array([A[1, 1], -A[1, 0]])
        return v / np.linalg.norm(v)

    v_p, v_m = eigvec(lam_p), eigvec(lam_m)
    chart = SigmaChart(Z, p)

    def in_crossing_sector(v):
        ok = True
        for s in (+1.0, -1.0):
            q = chart.embed(s * SECTOR_PROBE * v)
            xf, yf = lie_pair(Z, q)
            ok = ok and (xf * yf > 0)
        return ok

    sector_ok = in_crossing_sector(v_p) and in_crossing_sector(v_m)
    stable = saddle_ok and sector_ok
    return TSingularityReport(
        location=p, fold=fold, jacobian=J,
        eigenvalues=(lam_p, lam_m), eigenvectors=(v_p, v_m),
        sector_ok=sector_ok, saddle_ok=saddle_ok, stable=stable,
        order=handle.order, chart=chart,
        notes=["sector test covers tangent directions and sampled manifold "
               "points only, not the full germ"])


@dataclass
class ConeSample:
    branch: str
    vertex: np.ndarray
    arcs: list          # list of (n, 3) arrays, each one orbit arc
    seed_params: list   # signed distance of each seed along its ray


def _branch_rays(Z, report, branch):
    """Seed rays of one cone branch: the branch-eigenline ray on which both
    Lie derivatives are positive, and its image ray under the upper arc."""
    v = report.eigenvectors[0] if branch == "unstable" else report.eigenvectors[1]
    chart = report.chart or SigmaChart(Z, report.location)
    probe = SECTOR_PROBE

    ray_a = None
    for s in (+1.0, -1.0):
        q = chart.embed(s * probe * v)
        xf, yf = lie_pair(Z, q)
        if xf > 0 and yf > 0:
            ray_a = s * v
            break
    if ray_a is None:
        raise NotTSingularity("no seed ray with positive Lie derivatives; "
                              "branch eigenline not in a crossing sector")
    from .integrate import half_return
    q = chart.embed(probe * ray_a)
    img = half_return(Z, "upper", q, DEFAULT_CFG)
    d = chart.project(img)
    ray_b = d / np.linalg.norm(d)
    return chart, ray_a, ray_b


def sample_diabolo(Z, report, branch, n_rays=12, radius=0.5, cfg=DEFAULT_CFG):
    """Fan of crossing orbit arcs foliating one branch of the local cone.

    Seeds sit along the branch's two trace rays at distances up to
    radius; the ray with positive Lie derivatives carries the upper-side
    arcs and its partner carries the lower-side arcs.
    """
    if not report.stable:
        raise NotTSingularity("diabolo sampling requires a stable verdict")
    chart, ray_a, ray_b = _branch_rays(Z, report, branch)

    arcs = []
    params = []
    for ray, side in ((ray_a, "upper"), (ray_b, "lower")):
        for k in range(1, n_rays + 1):
            s = radius * k / n_rays
            q = chart.embed(s * ray)
            label = classify_sigma_point(Z, q)
            if label not in (RegionLabel.Crossing, RegionLabel.TangencyX,
                             RegionLabel.TangencyY, RegionLabel.TangencyBoth):
                raise ReachedSliding(
                    f"seed at distance {s:g} on the {side} ray classifies "
                    f"{label.value}; radius too large", point=q, label=label)
            V = Z.upper if side == "upper" else Z.lower
            from .core import lie_derivative, tangency_tol
            lie = lie_derivative(V, Z.switching, q, 1)
            want_positive = (side == "upper")
            direction = "forward" if (lie > 0) == want_positive else "backward"
            res = flow_to_sigma(V, Z.switching, q, direction, cfg, Z.box,
                                restart_surfaces=Z.aux_switchings, record=True)
            arcs.append(res.path[:, 1:4])
            params.append(s if side == "upper" else -s)
    return ConeSample(branch, report.location.copy(), arcs, params)
