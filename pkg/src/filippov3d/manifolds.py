"""Global invariant manifolds, cone/section circles, and chain detection.

Grows the saddle manifolds of the crossing return map from a fundamental
domain, traces the closed curves where the crossing cones meet a
transversal section, pushes such circles along the flow to other
sections, classifies the resulting circle pair (no chain / pinched torus
/ finitely many transverse chains), runs the robustness checks, and
locates transverse homoclinic points of the return map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geom
from .core import RegionLabel, SigmaChart, classify_sigma_point, lie_pair
from .errors import (Ambiguous, ExitedDomain, LeftBox, NoReturn,
                     NotTransverse, ReachedSliding)
from .integrate import (DEFAULT_CFG, SectionPlane, flow_to_plane, half_return,
                        section_map)
from .tsing import _branch_rays, analyze_t_singularity

TOL_MFD = 1e-6
H_MAX = 1e-2
H_MIN = 1e-4
DELTA0 = 1e-3
M0 = 32
THETA_MIN = 1e-3
D_SEP = 1e-3
D_COINCIDE = 1e-6


# ---------------------------------------------------------------------------
# manifold growth
# ---------------------------------------------------------------------------

@dataclass
class ManifoldCurve:
    branch: str                  # "u+", "u-", "s+", "s-"
    points: np.ndarray           # (n, 3) ordered from the fixed point outward
    arclength: np.ndarray        # (n,) cumulative
    generations: int
    handle: object = None
    chart: object = None
    truncated: str = ""          # "", "ExitedDomain", "ReachedSliding"
    breaks: tuple = ()           # indices i where [i, i+1] is not a curve segment

    def chart_points(self):
        return np.array([self.chart.project(p) for p in self.points])

    def total_arclength(self):
        return float(self.arclength[-1]) if len(self.arclength) else 0.0

    def piece_slices(self):
        """Index ranges of the connected pieces (escape gaps excluded)."""
        if not self.breaks:
            return [(0, len(self.points))]
        out = []
        start = 0
        for b in self.breaks:
            if b + 1 > start + 1:
                out.append((start, b + 1))
            start = b + 1
        if len(self.points) > start + 1:
            out.append((start, len(self.points)))
        return out

    def distance_to(self, q):
        """Distance from a point to the curve, real segments only."""
        return min(geom.point_to_polyline(q, self.points[a:b])
                   for a, b in self.piece_slices())


def _branch_step(handle, branch):
    """Map iterated along a branch: forward for unstable, inverse for stable."""
    return handle.eval if branch.startswith("u") else handle.eval_inverse


def _branch_ray_direction(report, branch):
    v = report.eigenvectors[0] if branch.startswith("u") else report.eigenvectors[1]
    v = v / np.linalg.norm(v)
    want_positive = branch.endswith("+")
    comp = v[0] if abs(v[0]) > 1e-12 else v[1]
    if (comp > 0) != want_positive:
        v = -v
    return v


def _quadratic_seed_coeff(step, chart, p0_u, v, lam, other, h=1e-4):
    """Second-order coefficient of the local manifold along eigendirection v.

    From the quadratic term Q of the map along v, the graph coefficient w
    solves lam*w + Q/2 = a*v + lam^2*w, i.e. w = (Q/2 . u-comp)/(lam^2-lam).
    """
    def push(u):
        return chart.project(step(chart.embed(u)))

    Q = (push(p0_u + h * v) + push(p0_u - h * v) - 2 * p0_u) / h**2
    basis = np.column_stack([v, other])
    try:
        comps = np.linalg.solve(basis, Q / 2.0)
    except np.linalg.LinAlgError:
        return np.zeros(2)
    return comps[1] / (lam * lam - lam) * other


def grow_manifold(handle, report, branch, max_arclength,
                  delta0=DELTA0, m0=M0, h_max=H_MAX, h_min=H_MIN,
                  roi_radius=None):
    """Grow one saddle-manifold branch of the crossing return map.

    Seeds a fundamental domain [q, F(q)] at distance delta0 along the
    (quadratically corrected) eigendirection with m0 points, then iterates
    with adaptive midpoint insertion until max_arclength is covered, the
    domain is exited, or the curve hits the sliding boundary (both
    truncations are flagged, not fatal).

    For strongly escaping tangles, roi_radius scopes the h_max refinement
    contract to the ball of that radius around the fixed point; far
    excursion segments are kept coarse so the arclength budget is spent
    where the analysis happens.
    """
    if not report.stable:
        raise ValueError("manifold growth requires a stable-verdict report")
    chart = report.chart or SigmaChart(handle.system, report.location)
    step = _branch_step(handle, branch)
    lam_p, lam_m = report.eigenvalues
    lam = abs(lam_p) if branch.startswith("u") else 1.0 / abs(lam_m)
    v = _branch_ray_direction(report, branch)
    other = (report.eigenvectors[1] if branch.startswith("u")
             else report.eigenvectors[0])
    p0_u = chart.project(report.location)
    w = _quadratic_seed_coeff(step, chart, p0_u, v, lam, other)
    p0 = report.location

    def seed(t):
        return chart.embed(p0_u + t * v + t * t * w)

    def refinable(a, b):
        if roi_radius is None:
            return True
        return min(np.linalg.norm(a - p0), np.linalg.norm(b - p0)) < roi_radius

    GAP = None   # marker for escape gaps in the point stream

    def safe_step(q):
        try:
            return step(q)
        except ExitedDomain:
            return GAP
        except ReachedSliding:
            return "sliding"

    ts = delta0 * lam ** (np.arange(m0 + 1) / m0)
    pts = [report.location.copy()] + [seed(t) for t in ts]
    truncated = ""
    generations = 0
    cur_gen = [seed(t) for t in ts]

    max_gen = 64
    used = geom.arclengths([p for p in pts])[-1]
    while used < max_arclength and generations < max_gen and not truncated:
        if max_arclength <= 0.0:
            break
        nxt = []
        budget_left = max_arclength - used
        gen_len = 0.0
        prev = "start"
        for k, q in enumerate(cur_gen):
            if q is GAP:
                nxt.append(GAP)
                prev = GAP
                continue
            img = safe_step(q)
            if isinstance(img, str):        # sliding boundary: meaningful stop
                truncated = "ReachedSliding"
                break
            if img is GAP:
                nxt.append(GAP)
                prev = GAP
                continue
            if prev is None or isinstance(prev, str) or prev is GAP:
                nxt.append(img)
            else:
                # adaptive midpoint insertion on the source segment
                stack = [(cur_gen[k - 1], q, prev, img, 0)]
                refined = []
                bad = False
                while stack:
                    a, b, fa, fb, depth = stack.pop()
                    if np.linalg.norm(fb - fa) <= h_max or depth >= 12 \
                            or not refinable(fa, fb):
                        refined.append(fb)
                        continue
                    m = 0.5 * (a + b)
                    fm = safe_step(m)
                    if fm is GAP or isinstance(fm, str):
                        refined.append(GAP)
                        refined.append(fb)
                        bad = True
                        continue
                    stack.append((m, b, fm, fb, depth + 1))
                    stack.append((a, m, fa, fm, depth + 1))
                last = prev
                for r in refined:
                    if r is GAP:
                        last = GAP
                        continue
                    if last is not GAP and refinable(last, r):
                        gen_len += np.linalg.norm(r - last)
                    last = r
                nxt.extend(refined)
            prev = img
            if gen_len > budget_left:
                break
        # collapse repeated gaps; a trimmed leading gap breaks the seam
        # between this generation and the previous one
        seam_broken = bool(nxt) and nxt[0] is GAP
        cleaned = []
        for p in nxt:
            if p is GAP and (not cleaned or cleaned[-1] is GAP):
                continue
            cleaned.append(p)
        while cleaned and cleaned[-1] is GAP:
            cleaned.pop()
        if cleaned:
            if seam_broken:
                pts.append(GAP)
            pts.extend(cleaned)
            cur_gen = cleaned
            generations += 1
            used += gen_len
            if gen_len > budget_left:
                break
        elif not truncated:
            break

    # prune points closer than h_min (keep endpoints and gaps)
    pruned = [pts[0]]
    for p in pts[1:-1]:
        if p is GAP:
            if pruned[-1] is not GAP:
                pruned.append(GAP)
            continue
        if pruned[-1] is GAP or np.linalg.norm(p - pruned[-1]) >= h_min:
            pruned.append(p)
    if len(pts) > 1 and pts[-1] is not GAP:
        pruned.append(pts[-1])

    arr = []
    breaks = []
    for p in pruned:
        if p is GAP:
            if arr:
                breaks.append(len(arr) - 1)
        else:
            arr.append(p)
    P = np.asarray(arr)
    arc = geom.arclengths(P)
    return ManifoldCurve(branch, P, arc, generations, handle, chart,
                         truncated, tuple(breaks))


def invariance_residual(curve, n_samples=0):
    """max over vertices of distance(step(v), curve), stepping toward the
    fixed point (inverse map on unstable branches, forward on stable)."""
    handle = curve.handle
    step = (handle.eval_inverse if curve.branch.startswith("u")
            else handle.eval)
    pts = curve.points
    idx = range(1, len(pts)) if not n_samples else \
        np.linspace(1, len(pts) - 1, n_samples).astype(int)
    worst = 0.0
    for i in idx:
        img = step(pts[i])
        worst = max(worst, curve.distance_to(img))
    return worst


# ---------------------------------------------------------------------------
# circle traces
# ---------------------------------------------------------------------------

@dataclass
class CircleTrace:
    """Closed piecewise-smooth curve where a crossing cone meets a section.

    points is a closed polyline (first == last); corners are the two
    indices where the trace meets the switching manifold; arc_tags has one
    entry per vertex ("upper-arc" / "lower-arc" / "corner").
    """

    points: np.ndarray
    corners: tuple
    arc_tags: list
    plane: SectionPlane
    params: list = None         # per-vertex (family, s) generators
    param_fn: object = None     # (family, s) -> point, local refinement hook
    vertex: np.ndarray = None

    def closed(self, tol=1e-9):
        return np.linalg.norm(self.points[0] - self.points[-1]) <= tol

    def sigma_corner_count(self, f, tol=1e-9):
        vals = [abs(float(f(p))) for p in self.points[:-1]]
        return int(sum(1 for v in vals if v < tol))

    def chart_points(self):
        e1, e2 = self.plane.chart()
        rel = self.points - self.plane.center
        return np.column_stack([rel @ e1, rel @ e2])


def _ray_plane_param(chart, ray, plane, s_max, n_scan=256):
    vals_s = np.linspace(1e-9, s_max, n_scan)
    vals = np.array([plane.value(chart.embed(s * ray)) for s in vals_s])
    sgn = np.sign(vals)
    flips = np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]
    if len(flips) == 0:
        return None
    from scipy.optimize import brentq
    i = flips[0]
    return brentq(lambda s: plane.value(chart.embed(s * ray)),
                  vals_s[i], vals_s[i + 1], xtol=1e-14)


def trace_cone_circle(Z, report, branch, section, cfg=DEFAULT_CFG,
                      h_max=2e-3, s_pad=1e-6):
    """Closed curve cone ∩ section, assembled from the two arc families.

    The cone branch's trace on the switching manifold is a pair of rays;
    seeds on the positive-Lie ray generate the upper-side arcs and seeds
    on its partner ray the lower-side arcs.  The two corner points (where
    the circle meets the switching manifold) are the ray/section
    intersections, inserted exactly.
    """
    vertex = report.location
    if abs(section.value(vertex)) < 1e-9:
        raise NotTransverse("section passes through the cone vertex")
    chart, ray_a, ray_b = _branch_rays(Z, report, branch)
    n = section.normal
    for ray in (ray_a, ray_b):
        d3 = chart.embed(ray) - chart.embed(0 * ray)
        if abs(np.dot(d3 / np.linalg.norm(d3), n)) < 1e-8:
            raise NotTransverse("cone trace ray parallel to the section plane")

    box_rad = 0.5 * min(hi - lo for lo, hi in zip(Z.box.lo, Z.box.hi))

    corner_param = {}
    for fam, ray in (("upper", ray_a), ("lower", ray_b)):
        s = _ray_plane_param(chart, ray, section, box_rad)
        if s is None:
            raise NotTransverse(f"section does not cut the {fam} seed ray")
        corner_param[fam] = s
    corner_a = chart.embed(corner_param["upper"] * ray_a)
    corner_b = chart.embed(corner_param["lower"] * ray_b)

    from scipy.optimize import brentq

    def arc_end_value(fam, s):
        ray = ray_a if fam == "upper" else ray_b
        q = chart.embed(s * ray)
        end = half_return(Z, fam, q, cfg)
        return float(section.value(end))

    def try_hit(fam, s):
        ray = ray_a if fam == "upper" else ray_b
        q = chart.embed(s * ray)
        try:
            return flow_to_plane(Z, fam, q, section, cfg)
        except NotTransverse:
            return None

    def arc_end_param(fam):
        """Seed param whose arc endpoint lies on the section.

        Mid-arc hits live between the seed-corner param and this root;
        which side depends on the cone/section geometry, so probe first.
        """
        s_seed = corner_param[fam]
        delta = 1e-3 * s_seed
        has_plus = try_hit(fam, s_seed + delta) is not None
        has_minus = try_hit(fam, s_seed - delta) is not None
        if has_plus == has_minus:
            raise NotTransverse(
                f"cannot orient the {fam} arc family around its corner")
        direction = 1.0 if has_plus else -1.0
        v_ref = arc_end_value(fam, s_seed + direction * delta)
        s_prev = s_seed + direction * delta
        s_cur = s_prev
        for _ in range(200):
            s_cur = s_prev + direction * max(abs(s_prev) * 0.3, delta)
            if s_cur <= 0 or s_cur > box_rad:
                raise NotTransverse(
                    f"{fam} arc family never ends on the section")
            v = arc_end_value(fam, s_cur)
            if v * v_ref < 0:
                lo, hi = sorted((s_prev, s_cur))
                return brentq(lambda s: arc_end_value(fam, s), lo, hi,
                              xtol=1e-13)
            s_prev = s_cur
        raise NotTransverse(f"{fam} arc family never ends on the section")

    def hit(fam, s):
        pt = try_hit(fam, s)
        if pt is None:
            raise NotTransverse(
                f"arc from seed s={s:g} ({fam}) misses the section")
        return pt

    def sample_family(fam):
        s_seed = corner_param[fam]
        s_end = arc_end_param(fam)
        width = s_end - s_seed
        a = s_seed + s_pad * width      # corner of this family's own ray
        b = s_end - s_pad * width       # arc endpoint on the partner corner
        params = list(np.linspace(a, b, 17))
        points = [hit(fam, s) for s in params]
        k = 0
        while k < len(points) - 1 and len(points) < 20000:
            if np.linalg.norm(points[k + 1] - points[k]) > h_max:
                sm = 0.5 * (params[k] + params[k + 1])
                params.insert(k + 1, sm)
                points.insert(k + 1, hit(fam, sm))
            else:
                k += 1
        return params, points

    pu, up_pts = sample_family("upper")
    pl, low_pts = sample_family("lower")

    pts = [corner_a] + up_pts + [corner_b] + low_pts + [corner_a]
    tags = (["corner"] + ["upper-arc"] * len(up_pts) + ["corner"]
            + ["lower-arc"] * len(low_pts) + ["corner"])
    params = ([("upper", corner_param["upper"])]
              + [("upper", s) for s in pu]
              + [("lower", corner_param["lower"])]
              + [("lower", s) for s in pl]
              + [("upper", corner_param["upper"])])
    corners = (0, len(up_pts) + 1)

    def param_fn(fam, s):
        if fam == "upper" and abs(s - corner_param["upper"]) < 1e-13:
            return corner_a
        if fam == "lower" and abs(s - corner_param["lower"]) < 1e-13:
            return corner_b
        return hit(fam, s)

    return CircleTrace(np.asarray(pts), corners, tags, section,
                       params, param_fn, vertex=np.asarray(vertex, float))


def propagate_circle(Z, trace, target, cfg=DEFAULT_CFG, h_max=2e-3,
                     direction="forward", max_refine=20000):
    """Image of a circle trace on another section via the crossing flow.

    Propagates pointwise with section_map, refines in the source
    parametrization until image spacing meets h_max, and re-detects the
    two corners of the image (sign changes of the switching function) by
    bisection on the source polyline.
    """
    if trace.plane.same_plane(target):
        return CircleTrace(trace.points.copy(), trace.corners,
                           list(trace.arc_tags), target,
                           trace.params, trace.param_fn, trace.vertex)

    f = Z.switching
    src = list(trace.points[:-1])       # open ring
    imgs = []
    for p in src:
        res = section_map(Z, trace.plane, target, p, cfg, direction=direction)
        imgs.append(res.point)

    # refinement on image spacing, inserting source midpoints; midpoints
    # whose orbits escape are tolerated (slightly coarser ring there)
    k = 0
    while k < len(src) and len(src) < max_refine:
        a = imgs[k]
        b = imgs[(k + 1) % len(src)]
        if np.linalg.norm(b - a) > h_max:
            pm = 0.5 * (src[k] + src[(k + 1) % len(src)])
            try:
                res = section_map(Z, trace.plane, target, pm, cfg,
                                  direction=direction)
            except (LeftBox, NoReturn, ReachedSliding):
                k += 1
                continue
            src.insert(k + 1, pm)
            imgs.insert(k + 1, res.point)
        else:
            k += 1

    # corner re-detection: sign changes of f along the image ring
    vals = np.array([float(f(p)) for p in imgs])
    n = len(imgs)
    corner_idx = []
    for i in range(n):
        j = (i + 1) % n
        if vals[i] == 0.0:
            corner_idx.append(i)
        elif vals[i] * vals[j] < 0:
            # bisect on the source segment
            a_s, b_s = src[i], src[j]
            fa = vals[i]
            best = None
            for _ in range(60):
                m_s = 0.5 * (a_s + b_s)
                try:
                    res = section_map(Z, trace.plane, target, m_s, cfg,
                                      direction=direction)
                except (LeftBox, NoReturn, ReachedSliding):
                    break
                fm = float(f(res.point))
                best = (m_s, res.point)
                if fa * fm <= 0:
                    b_s = m_s
                else:
                    a_s, fa = m_s, fm
                if abs(fm) < 1e-10:
                    break
            if best is None:
                continue
            src.insert(j if j else n, best[0])
            imgs.insert(j if j else n, best[1])
            vals = np.array([float(f(p)) for p in imgs])
            corner_idx.append(j if j else n)
            n = len(imgs)

    ring = np.asarray(imgs + [imgs[0]])
    tags = ["image"] * len(ring)
    corners = tuple(corner_idx[:2]) if len(corner_idx) >= 2 else tuple(corner_idx)
    for c in corners:
        tags[c] = "corner"
    return CircleTrace(ring, corners, tags, target, vertex=trace.vertex)


# ---------------------------------------------------------------------------
# chain classification
# ---------------------------------------------------------------------------

@dataclass
class ChainClassification:
    kind: str                      # "NoChain" | "PinchedTorus" | "TransverseChains"
    K: int = 0
    intersections: list = field(default_factory=list)

    def to_json_dict(self):
        return {"kind": self.kind, "K": self.K,
                "intersections": [
                    {"point": [float(v) for v in it["point"]],
                     "angle": float(it["angle"]),
                     "f_value": float(it["f_value"])}
                    for it in self.intersections]}


def _refine_intersection(tu, ts_, iu, ti, js, tj, f):
    """Newton refinement of a circle-circle crossing using the generator
    callbacks when both traces carry them; falls back to the segment point."""
    if tu.param_fn is None or ts_.param_fn is None or \
            tu.params is None or ts_.params is None:
        return None
    fam_u, su0 = tu.params[iu]
    fam_u1, su1 = tu.params[iu + 1]
    fam_s, ss0 = ts_.params[js]
    fam_s1, ss1 = ts_.params[js + 1]
    if fam_u != fam_u1 or fam_s != fam_s1:
        return None
    e1, e2 = tu.plane.chart()

    def F(ab):
        pu = tu.param_fn(fam_u, ab[0])
        ps = ts_.param_fn(fam_s, ab[1])
        d = pu - ps
        return np.array([d @ e1, d @ e2])

    ab = np.array([su0 + ti * (su1 - su0), ss0 + tj * (ss1 - ss0)])
    h = np.array([max(1e-9, 1e-7 * abs(su1 - su0)),
                  max(1e-9, 1e-7 * abs(ss1 - ss0))])
    for _ in range(40):
        val = F(ab)
        if np.linalg.norm(val) < 1e-11:
            break
        J = np.column_stack([
            (F(ab + [h[0], 0]) - F(ab - [h[0], 0])) / (2 * h[0]),
            (F(ab + [0, h[1]]) - F(ab - [0, h[1]])) / (2 * h[1])])
        try:
            ab = ab - np.linalg.solve(J, val)
        except np.linalg.LinAlgError:
            return None
    return tu.param_fn(fam_u, ab[0])


def classify_chain(chat_u, c_s, f=None, theta_min=THETA_MIN,
                   d_sep=D_SEP, d_coincide=D_COINCIDE):
    """Trichotomy for a circle pair on one section plane.

    Disjoint by more than d_sep: no chains.  Coincident within
    d_coincide (Hausdorff): pinched torus.  Otherwise all transverse
    crossings are located and counted; tangential crossings, crossings on
    the switching manifold, or an odd count raise Ambiguous.
    """
    if not chat_u.plane.same_plane(c_s.plane, tol=1e-9):
        raise ValueError("traces live on different section planes")
    if f is None:
        f = lambda p: p[2]

    A = chat_u.chart_points()
    B = c_s.chart_points()
    hits = geom.segment_intersections_2d(A, B)

    if not hits:
        d = geom.min_distance(A, B)
        if d > d_sep:
            return ChainClassification("NoChain")
        h = geom.hausdorff(A, B)
        if h < d_coincide:
            return ChainClassification("PinchedTorus")
        raise Ambiguous(f"circles within {d:g} but no crossing located",
                        data={"min_distance": d, "hausdorff": h})

    h = geom.hausdorff(A, B)
    if h < d_coincide:
        return ChainClassification("PinchedTorus")

    P3u = chat_u.points
    P3s = c_s.points
    out = []
    for pt2, i, ti, j, tj in geom.dedupe_points(hits, tol=1e-7):
        du = A[i + 1] - A[i]
        ds = B[j + 1] - B[j]
        cosang = abs(np.dot(du, ds)) / (np.linalg.norm(du) * np.linalg.norm(ds))
        angle = math.acos(min(1.0, cosang))
        p3 = P3u[i] + ti * (P3u[i + 1] - P3u[i])
        refined = _refine_intersection(chat_u, c_s, i, ti, j, tj, f)
        if refined is not None:
            p3 = refined
        fv = float(f(p3))
        if angle <= theta_min:
            raise Ambiguous(f"crossing angle {angle:g} below threshold",
                            data={"point": p3, "angle": angle})
        if abs(fv) <= 1e-9:
            raise Ambiguous("crossing lies on the switching manifold",
                            data={"point": p3, "f_value": fv})
        out.append({"point": p3, "angle": angle, "f_value": fv,
                    "segments": (int(i), int(j))})

    out = geom.dedupe_points(out, key=lambda it: it["point"], tol=1e-7)
    K = len(out)
    if K % 2 == 1:
        raise Ambiguous(f"odd crossing count K={K}", data={"count": K})
    out.sort(key=lambda it: (round(it["point"][0], 9), round(it["point"][1], 9)))
    return ChainClassification("TransverseChains", K, out)


# ---------------------------------------------------------------------------
# robustness conditions
# ---------------------------------------------------------------------------

@dataclass
class ConditionsReport:
    tc1: bool
    tc2: bool
    tc3: bool
    r: bool
    tsing_report: object = None
    circles: dict = field(default_factory=dict)
    tc2_data: dict = field(default_factory=dict)
    tc3_data: dict = field(default_factory=dict)
    chain: object = None
    errors: dict = field(default_factory=dict)

    @property
    def overall(self):
        return self.tc1 and self.tc2 and self.tc3 and self.r

    def to_json_dict(self):
        return {
            "tc1": self.tc1, "tc2": self.tc2, "tc3": self.tc3, "r": self.r,
            "overall": self.overall,
            "tsing": self.tsing_report.to_json_dict() if self.tsing_report else None,
            "tc2":_jsonable(self.tc2_data),
            "tc3": _jsonable(self.tc3_data),
            "chain": self.chain.to_json_dict() if self.chain else None,
            "errors": {k: str(v) for k, v in self.errors.items()},
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


def check_tc_r(Z, p0, sections, cfg=DEFAULT_CFG, handle=None,
               h_max=5e-3, manifold_arclength=None):
    """Verify the robustness conditions for a self-chain at p0.

    sections = (tau_u, tau_s) transversal section planes for the unstable
    and stable cones.  Per-condition failures are recorded in the report,
    not raised.
    """
    from .integrate import ReturnMapHandle
    tau_u, tau_s = sections
    report = ConditionsReport(False, False, False, False)

    if handle is None:
        handle = ReturnMapHandle(Z, order="lower_first", cfg=cfg,
                                 check_crossing=False)

    # TC1: stable T-type singularity
    try:
        ts_rep = analyze_t_singularity(Z, p0, handle, cfg)
        report.tsing_report = ts_rep
        report.tc1 = bool(ts_rep.stable)
    except Exception as exc:   # noqa: BLE001 - recorded per contract
        report.errors["tc1"] = exc
        return report
    if not report.tc1:
        return report

    # circles on the two sections
    try:
        c_u = trace_cone_circle(Z, ts_rep, "unstable", tau_u, cfg, h_max=h_max)
        c_s = trace_cone_circle(Z, ts_rep, "stable", tau_s, cfg, h_max=h_max)
        report.circles = {"C_u": c_u, "C_s": c_s}
    except Exception as exc:   # noqa: BLE001
        report.errors["circles"] = exc
        return report

    # TC2: the unstable circle maps to a closed circle inside tau_s
    try:
        chat_u = propagate_circle(Z, c_u, tau_s, cfg, h_max=h_max)
        inside = all(tau_s.contains(p) for p in chat_u.points)
        two_corners = len(chat_u.corners) == 2
        report.tc2 = bool(inside and chat_u.closed(1e-7) and two_corners)
        report.circles["Chat_u"] = chat_u
        report.tc2_data = {"inside_section": inside,
                           "closed": chat_u.closed(1e-7),
                           "corners": len(chat_u.corners),
                           "n_points": len(chat_u.points)}
    except Exception as exc:   # noqa: BLE001
        report.errors["tc2"] = exc
        return report
    if not report.tc2:
        return report

    # TC3: cylinder trace via per-orbit switching-manifold hit sequences
    try:
        report.tc3, report.tc3_data = _check_cylinder(
            Z, handle, ts_rep, c_u, tau_s, cfg, manifold_arclength)
    except Exception as exc:   # noqa: BLE001
        report.errors["tc3"] = exc
        return report

    # R: transverse circle intersections off the switching manifold
    try:
        chain = classify_chain(report.circles["Chat_u"], c_s, Z.switching)
        report.chain = chain
        report.r = chain.kind == "TransverseChains"
    except Ambiguous as exc:
        report.errors["r"] = exc
    return report


def _check_cylinder(Z, handle, ts_rep, c_u, tau_s, cfg, manifold_arclength):
    """Follow the orbit tube from the unstable circle to the stable section,
    clustering switching-manifold hits onto the extended manifold branches."""
    if manifold_arclength is None:
        manifold_arclength = 12.0
    curves = {}
    for branch in ("u+", "u-", "s+", "s-"):
        curves[branch] = grow_manifold(handle, ts_rep, branch,
                                       manifold_arclength)
    u_pts = np.vstack([curves["u+"].points, curves["u-"].points])
    s_pts = np.vstack([curves["s+"].points, curves["s-"].points])

    n_orbit = min(64, len(c_u.points) - 1)
    idx = np.linspace(0, len(c_u.points) - 2, n_orbit).astype(int)
    assign_tol = 5e-2
    alternation_ok = True
    assigned_ok = True
    hit_records = []
    for i in idx:
        p = c_u.points[i]
        res = section_map(Z, c_u.plane, tau_s, p, cfg)
        labels = []
        for q, _lab in res.crossings:
            du = geom.point_to_polyline(q, u_pts)
            ds = geom.point_to_polyline(q, s_pts)
            if min(du, ds) > assign_tol:
                assigned_ok = False
                labels.append("?")
            else:
                labels.append("u" if du < ds else "s")
        for a, b in zip(labels, labels[1:]):
            if a == b and a != "?":
                alternation_ok = False
        hit_records.append(labels)

    # marked points: the corners of the circles must sit on the extensions
    marked_ok = True
    for c_idx in c_u.corners:
        q = c_u.points[c_idx]
        d = min(geom.point_to_polyline(q, u_pts),
                geom.point_to_polyline(q, s_pts))
        marked_ok = marked_ok and d < assign_tol

    ok = alternation_ok and assigned_ok and marked_ok
    return ok, {"alternation_ok": alternation_ok, "assigned_ok": assigned_ok,
                "marked_ok": marked_ok, "n_orbits": n_orbit,
                "hit_labels": ["".join(h) for h in hit_records]}


# ---------------------------------------------------------------------------
# homoclinic points
# ---------------------------------------------------------------------------

@dataclass
class HomoclinicPoint:
    point: np.ndarray
    s_unstable: float
    s_stable: float
    angle: float
    itinerary_fwd: list = field(default_factory=list)
    itinerary_bwd: list = field(default_factory=list)

    def to_json_dict(self):
        return {"point": [float(v) for v in self.point],
                "s_unstable": float(self.s_unstable),
                "s_stable": float(self.s_stable),
                "angle": float(self.angle)}


def find_homoclinic_points(Wu, Ws, itinerary_steps=3, fixed_point_tol=1e-6,
                           max_itineraries=256):
    """Transverse crossings of an unstable and a stable manifold curve.

    Requires the curves to share a chart (same fixed point).  Crossings at
    the fixed point itself are excluded; results are ordered along the
    stable curve's arclength.  Itinerary samples are only computed for the
    first max_itineraries crossings (near-coincident curves can produce
    thousands of near-tangential ones).
    """
    chart = Ws.chart or Wu.chart
    A = np.array([chart.project(p) for p in Wu.points])
    B = np.array([chart.project(p) for p in Ws.points])
    hits = []
    for ua, ub in Wu.piece_slices():
        for sa, sb in Ws.piece_slices():
            for pt2, i, ti, j, tj in geom.segment_intersections_2d(
                    A[ua:ub], B[sa:sb]):
                hits.append((pt2, i + ua, ti, j + sa, tj))
    p0 = chart.project(Wu.points[0])

    out = []
    for pt2, i, ti, j, tj in geom.dedupe_points(hits, tol=1e-9):
        if np.linalg.norm(pt2 - p0) < fixed_point_tol:
            continue
        du = A[i + 1] - A[i]
        ds = B[j + 1] - B[j]
        cosang = abs(np.dot(du, ds)) / (np.linalg.norm(du) * np.linalg.norm(ds))
        angle = math.acos(min(1.0, cosang))
        su = Wu.arclength[i] + ti * (Wu.arclength[i + 1] - Wu.arclength[i])
        ss = Ws.arclength[j] + tj * (Ws.arclength[j + 1] - Ws.arclength[j])
        p3 = chart.embed(pt2)
        fwd, bwd = [], []
        handle = Wu.handle or Ws.handle
        if handle is not None and len(out) < max_itineraries:
            q = p3
            try:
                for _ in range(itinerary_steps):
                    q = handle.eval(q)
                    fwd.append(q.copy())
                q = p3
                for _ in range(itinerary_steps):
                    q = handle.eval_inverse(q)
                    bwd.append(q.copy())
            except Exception:   # noqa: BLE001 - itinerary is best-effort
                pass
        out.append(HomoclinicPoint(p3, su, ss, angle, fwd, bwd))
    out.sort(key=lambda h: h.s_stable)
    return out
