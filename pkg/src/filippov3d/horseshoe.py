"""Horseshoe construction and certification for the crossing return map.

Around a stable invisible two-fold with a transverse homoclinic point,
this module builds the four-region partition of the return-map
neighborhood, places a quadrilateral patch with one side on the stable
manifold (enclosing exactly the homoclinic crossing pattern), splits it
into three strips along the unstable manifold, and searches for an
iterate count N0 making the two outer strips satisfy sampled covering
relations with verified cone-hyperbolicity margins.  Symbol words over
{L, R} are then realized as periodic points, the invariant set is
sampled at finite depth, and every sampled point is audited to lie on a
crossing orbit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geom
from .core import RegionLabel, classify_sigma_point, lie_pair
from .errors import (DegenerateBoundary, ExitedDomain, NewtonDivergence,
                     NoValidPatch, NotCertified, PatternViolation,
                     ReachedSliding)
from .integrate import jacobian_2d
from .manifolds import grow_manifold

THETA_PATCH = 1e-3
DEBUG = False


# ---------------------------------------------------------------------------
# region partition
# ---------------------------------------------------------------------------

@dataclass
class RegionPartition:
    """Four regions cut out of the return-map neighborhood by the manifold
    branches and the section trace lines.

    Labels follow a fixed convention: R3 lies between the two "minus"
    branches (the side carrying the homoclinic pattern), R1 between the
    "plus" branches, R2 follows R1 counterclockwise.
    """

    center: np.ndarray                 # chart coords of the singular point
    polygons: dict                     # label -> (n, 2) closed polygon
    boundaries: dict                   # branch -> truncated chart polyline
    marked: dict                       # branch -> chart point on its section line
    chart: object
    boundary_tol: float = 1e-9

    def locate(self, q):
        """Region label of a chart point: 'R1'..'R4', 'Boundary', 'Outside'."""
        q = np.asarray(q, dtype=float)
        for poly in self.boundaries.values():
            if geom.point_to_polyline(q, poly) < self.boundary_tol:
                return "Boundary"
        if np.linalg.norm(q - self.center) < self.boundary_tol:
            return "Boundary"
        for label, poly in self.polygons.items():
            if geom.point_in_polygon(q, poly):
                return label
        return "Outside"


def _line_crossing_param(poly, normal, offset):
    """First crossing index/point of a polyline with n.q = offset."""
    vals = poly @ normal - offset
    for i in range(len(vals) - 1):
        if vals[i] == 0.0:
            return i, poly[i]
        if vals[i] * vals[i + 1] < 0:
            t = vals[i] / (vals[i] - vals[i + 1])
            return i, poly[i] + t * (poly[i + 1] - poly[i])
    return None, None


def build_region_partition(handle, report, traces=None, sections=None,
                           curves=None, arclength=6.0, outer_radius=None):
    """Partition of the neighborhood of a stable two-fold into four regions.

    The bounding arcs are the four manifold branches truncated at marked
    points on the section trace lines; marked points come from circle
    traces when given (their switching-manifold corners), else from the
    branches' own first crossings with the section lines.  Adjacent
    truncation points on a common section line are joined by a straight
    segment, others by a circular arc (the outer closure of the
    neighborhood, a representation choice).
    """
    chart = report.chart
    center = chart.project(report.location)
    if curves is None:
        curves = {b: grow_manifold(handle, report, b, arclength)
                  for b in ("u+", "u-", "s+", "s-")}

    lines = []
    if sections is not None:
        for sec in sections:
            # chart trace of the section plane on the switching manifold
            e1, e2 = chart.e1, chart.e2
            n2 = np.array([np.dot(sec.normal, e1), np.dot(sec.normal, e2)])
            off = sec.offset - np.dot(sec.normal, chart.base)
            nn = np.linalg.norm(n2)
            if nn > 1e-12:
                lines.append((n2 / nn, off / nn))

    marked = {}
    boundaries = {}
    corner_pool = []
    if traces:
        for tr in traces.values():
            for c in tr.corners:
                corner_pool.append(chart.project(tr.points[c]))

    for branch, curve in curves.items():
        poly = curve.chart_points()
        ray = poly[min(3, len(poly) - 1)] - poly[0]
        ray /= np.linalg.norm(ray)
        # the boundary stops being the local branch once the curve turns
        # back toward the singular point (tangled continuations must not
        # become region walls)
        rad = np.linalg.norm(poly - center, axis=1)
        run_max = np.maximum.accumulate(rad)
        turning = np.nonzero(rad < 0.98 * run_max)[0]
        turn_i = int(turning[0]) if len(turning) else len(poly) - 1
        local = poly[:turn_i + 1]
        # the branch's own section line is the one its ray heads toward
        own = [(n2, off) for n2, off in lines
               if np.dot(n2, ray) * off > 0]
        others = [l for l in lines if not any(l is o for o in own)]
        cut_i, cut_p = None, None
        for n2, off in own + others:
            i, p = _line_crossing_param(local, n2, off)
            if i is not None:
                cut_i, cut_p = i, p
                break
        if cut_i is None:
            cut_i, cut_p = len(local) - 2, local[-1]
        if corner_pool:
            near = [c for c in corner_pool if np.linalg.norm(c - cut_p) < 1e-3]
            if near:
                cut_p = near[0]
        boundaries[branch] = np.vstack([local[:cut_i + 1], cut_p])
        marked[branch] = cut_p

    pts = list(marked.values())
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            if np.linalg.norm(pts[i] - pts[j]) < 1e-9:
                raise DegenerateBoundary(
                    "two marked boundary points coincide")

    def ray_angle(branch):
        d = boundaries[branch][min(3, len(boundaries[branch]) - 1)] - center
        return math.atan2(d[1], d[0])

    order = sorted(boundaries, key=ray_angle)
    polygons = {}
    sector_names = {}
    for k, br_a in enumerate(order):
        br_b = order[(k + 1) % len(order)]
        pair = frozenset((br_a, br_b))
        if pair == frozenset(("u-", "s-")):
            sector_names[k] = "R3"
        elif pair == frozenset(("u+", "s+")):
            sector_names[k] = "R1"
    rest = [k for k in range(len(order)) if k not in sector_names]
    for idx, k in enumerate(sorted(rest)):
        sector_names[k] = "R2" if idx == 0 else "R4"

    for k, br_a in enumerate(order):
        br_b = order[(k + 1) % len(order)]
        pa = boundaries[br_a]
        pb = boundaries[br_b]
        end_a, end_b = pa[-1], pb[-1]
        joined = _connector(center, end_a, end_b, r_min=outer_radius)
        poly = np.vstack([pa, joined, pb[::-1]])
        polygons[sector_names[k]] = poly
    return RegionPartition(center, polygons, boundaries, marked, chart)


def _connector(center, a, b, n_arc=24, r_min=None):
    """Straight joint for nearby endpoints, circular arc otherwise.  The
    arc radius is pushed out to r_min when given (so the neighborhood can
    be chosen to contain the analysis region)."""
    ra, rb = np.linalg.norm(a - center), np.linalg.norm(b - center)
    if r_min is None and abs(ra - rb) < 0.2 * max(ra, rb):
        gap_angle = abs(_angle_between(a - center, b - center))
        if gap_angle < 0.35:
            return np.array([a, b])
    th_a = math.atan2(a[1] - center[1], a[0] - center[0])
    th_b = math.atan2(b[1] - center[1], b[0] - center[0])
    while th_b <= th_a:
        th_b += 2 * math.pi
    r = max(ra, rb, r_min or 0.0)
    ths = np.linspace(th_a, th_b, n_arc)
    arc = center + r * np.column_stack([np.cos(ths), np.sin(ths)])
    return np.vstack([[a], arc, [b]])


def _angle_between(u, v):
    c = np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v))
    return math.acos(max(-1.0, min(1.0, c)))


# ---------------------------------------------------------------------------
# quadrilateral patch and strips
# ---------------------------------------------------------------------------

@dataclass
class QuadPatch:
    corners: np.ndarray            # 4 chart points: l1, l2, l2+H, l1+H
    polygon: np.ndarray            # closed boundary, chart coords
    L: np.ndarray                  # stable sub-polyline l1 -> l2
    top: np.ndarray                # translated stable sub-polyline
    l1: np.ndarray
    l2: np.ndarray
    s_l1: float
    s_l2: float
    height_dir: np.ndarray
    height: float
    q_hat1: np.ndarray             # principal homoclinic point (chart)
    q_mid: np.ndarray              # the single crossing between the images
    A1: np.ndarray                 # unstable sub-polyline through q_hat1
    A2: np.ndarray                 # unstable sub-polyline through q_mid
    conditions: dict
    chart: object = None

    def frame(self):
        """Affine map chart -> unit-square coordinates (a, b)."""
        e_a = self.l2 - self.l1
        M = np.column_stack([e_a, self.height_dir * self.height])
        Minv = np.linalg.inv(M)

        def to_frame(q):
            return Minv @ (np.asarray(q, dtype=float) - self.l1)

        def from_frame(u):
            return self.l1 + M @ np.asarray(u, dtype=float)
        return to_frame, from_frame


@dataclass
class StripDecomposition:
    polygons: dict                 # "QL" | "QC" | "QR" -> closed polygon
    dividers: tuple                # (A1, A2) polylines


def _sub_polyline(points, arcl, s_from, s_to):
    """Extract the sub-polyline between two arclength parameters, with
    exact interpolation at both ends."""
    s0, s1 = sorted((s_from, s_to))
    i0 = int(np.searchsorted(arcl, s0))
    i1 = int(np.searchsorted(arcl, s1))

    def at(s):
        i = max(1, min(len(arcl) - 1, int(np.searchsorted(arcl, s))))
        t = (s - arcl[i - 1]) / (arcl[i] - arcl[i - 1])
        return points[i - 1] + t * (points[i] - points[i - 1])

    mid = points[i0:i1]
    out = np.vstack([[at(s0)], mid, [at(s1)]])
    if s_from > s_to:
        out = out[::-1]
    return out


def build_q_patch(partition, wu_minus, ws_minus, homoclinics, handle,
                  height0=None, shrink=0.65, max_shrink=25,
                  fold_clear=1e-3, margin1=0.3, margin2=0.35):
    """Quadrilateral patch with one side on the stable branch, enclosing
    the homoclinic crossing pattern, plus its three-strip decomposition.

    Candidate principal points are homoclinic crossings whose return-map
    image is again in the list with exactly one crossing strictly between
    (the pattern); the patch is then shrunk along its height until every
    condition check passes.
    """
    chart = ws_minus.chart
    pts = [h.point for h in homoclinics]
    s_of = [h.s_stable for h in homoclinics]
    P_arr = np.array(pts) if pts else np.zeros((0, 3))
    s_arr = np.array(s_of)
    s_sorted = np.sort(s_arr)

    def strictly_crossing(p3):
        xf, yf = lie_pair(handle.system, p3)
        return xf * yf > 0 and min(abs(xf), abs(yf)) > fold_clear

    def find_near(p3, tol=1e-5):
        if not len(P_arr):
            return None
        d = np.linalg.norm(P_arr - p3, axis=1)
        k = int(np.argmin(d))
        return k if d[k] < tol else None

    def count_between(lo, hi):
        return int(np.searchsorted(s_sorted, hi, "left")
                   - np.searchsorted(s_sorted, lo, "right"))

    candidates = []
    saw_pattern_violation = False
    # the pattern lives among the first crossings along the stable curve;
    # near-coincident manifolds can produce millions of artifact
    # crossings, so the candidate scan is capped
    for k, h in enumerate(homoclinics[:400]):
        if h.angle < THETA_PATCH or not strictly_crossing(h.point):
            continue
        try:
            img = handle.eval(h.point)
        except Exception:   # noqa: BLE001 - candidate scan
            continue
        k_img = find_near(img)
        if k_img is None:
            continue
        lo, hi = sorted((s_of[k], s_of[k_img]))
        n_between = count_between(lo, hi)
        if n_between != 1:
            saw_pattern_violation = saw_pattern_violation or n_between > 1
            continue
        mask = (s_arr > lo) & (s_arr < hi)
        m = int(np.nonzero(mask)[0][0])
        if homoclinics[m].angle < THETA_PATCH or not strictly_crossing(pts[m]):
            continue
        candidates.append((k, m, k_img))
    if not candidates:
        if saw_pattern_violation:
            raise PatternViolation(
                "every image pair holds more than one crossing in the "
                "stable segment")
        raise NoValidPatch("no homoclinic pattern pair found",
                           failed_condition="pattern")
    # candidates are scanned inward-out along the stable curve; the
    # fallback loop below tries the next one when a patch fails
    candidates.sort(key=lambda c: homoclinics[c[0]].s_stable)

    last_exc = None
    for candidate in candidates:
        try:
            built = _try_build_patch(candidate, homoclinics, partition,
                                     wu_minus, ws_minus, handle, chart,
                                     height0, shrink, max_shrink,
                                     margin1, margin2)
            if DEBUG:
                k1 = candidate[0]
                print(f"[patch] candidate q1={homoclinics[k1].point[:2]} "
                      f"s_u={homoclinics[k1].s_unstable:.2f} "
                      f"H={built[0].height:.4f}")
            return built
        except NoValidPatch as exc:
            if DEBUG:
                print(f"[patch] candidate s_u="
                      f"{homoclinics[candidate[0]].s_unstable:.2f} "
                      f"failed: {exc}")
            last_exc = exc
    raise last_exc or NoValidPatch("no candidate produced a valid patch",
                                   failed_condition="pattern")


def _try_build_patch(candidate, homoclinics, partition, wu_minus, ws_minus,
                     handle, chart, height0, shrink, max_shrink,
                     margin1, margin2):
    s_of = [h.s_stable for h in homoclinics]
    k1, km, k_img = candidate
    q1, qm, qi = homoclinics[k1], homoclinics[km], homoclinics[k_img]
    s1, sm, si = q1.s_stable, qm.s_stable, qi.s_stable

    # l1 beyond q1 (away from the image), l2 between the middle crossing
    # and the image
    away = 1.0 if s1 > si else -1.0
    neighbors = [s for s in s_of if (s - s1) * away > 1e-12]
    s_next = min(neighbors, key=lambda s: abs(s - s1)) if neighbors \
        else s1 + away * abs(s1 - sm)
    seg_len = abs(s1 - si)
    step1 = min(margin1 * abs(s_next - s1), 0.5 * seg_len)
    s_l1 = s1 + away * step1
    s_l2 = sm - away * margin2 * abs(sm - si)

    ws_pts = ws_minus.chart_points()
    ws_arc = ws_minus.arclength
    wu_pts = wu_minus.chart_points()
    wu_arc = wu_minus.arclength

    L = _sub_polyline(ws_pts, ws_arc, s_l1, s_l2)
    l1_pt, l2_pt = L[0], L[-1]
    q1_c = chart.project(q1.point)
    qm_c = chart.project(qm.point)

    # height direction: unstable tangent at q1, oriented into R3
    iu = int(np.searchsorted(wu_arc, q1.s_unstable))
    iu = max(1, min(iu, len(wu_pts) - 1))
    e_b = wu_pts[iu] - wu_pts[iu - 1]
    e_b = e_b / np.linalg.norm(e_b)
    probe = 0.5 * (l1_pt + l2_pt)
    scale = max(1.0, np.linalg.norm(l2_pt - l1_pt))
    votes = 0
    for frac in (1e-3, 0.02, 0.06):
        side = partition.locate(probe + frac * scale * e_b)
        votes += 1 if side == "R3" else (-1 if side != "Boundary" else 0)
    if votes < 0:
        e_b = -e_b

    if height0 is None:
        height0 = 0.4 * np.linalg.norm(l2_pt - l1_pt)

    sysZ = handle.system
    last_failed = "height"
    H = height0
    for _ in range(max_shrink):
        patch = _assemble_patch(chart, L, l1_pt, l2_pt, s_l1, s_l2, e_b, H,
                                q1_c, qm_c, wu_pts, wu_arc,
                                q1.s_unstable, qm.s_unstable)
        ok, failed = _check_conditions(patch, partition, sysZ, ws_minus)
        if ok:
            strips = _build_strips(patch)
            return patch, strips
        last_failed = failed
        H *= shrink
    raise NoValidPatch(f"patch shrinking exhausted (last failing: {last_failed})",
                       failed_condition=last_failed)


def _assemble_patch(chart, L, l1_pt, l2_pt, s_l1, s_l2, e_b, H,
                    q1_c, qm_c, wu_pts, wu_arc, su1, su2):
    top = L + H * e_b
    polygon = np.vstack([L, top[::-1], [L[0]]])

    def a_segment(su, anchor):
        width = 2.5 * H
        lo, hi = su - width, su + width
        seg = _sub_polyline(wu_pts, wu_arc, max(lo, wu_arc[0]),
                            min(hi, wu_arc[-1]))
        # orient from the stable side upward
        d0 = geom.point_to_polyline(seg[0], L)
        d1 = geom.point_to_polyline(seg[-1], L)
        if d1 < d0:
            seg = seg[::-1]
        return seg

    A1 = a_segment(su1, q1_c)
    A2 = a_segment(su2, qm_c)
    conditions = {}
    return QuadPatch(np.array([l1_pt, l2_pt, l2_pt + H * e_b, l1_pt + H * e_b]),
                     polygon, L, top, l1_pt, l2_pt, float(s_l1), float(s_l2),
                     e_b, float(H), q1_c, qm_c, A1, A2, conditions, chart)


def _interior_samples(patch, n=7):
    to_frame, from_frame = patch.frame()
    out = []
    for a in np.linspace(0.08, 0.92, n):
        for b in np.linspace(0.08, 0.92, n):
            q = from_frame([a, b])
            if geom.point_in_polygon(q, patch.polygon[:-1]):
                out.append(q)
    return out


def _check_conditions(patch, partition, sysZ, ws_minus):
    conds = patch.conditions
    chart = patch.chart

    interior = _interior_samples(patch)
    if not interior:
        conds["i_in_R3"] = False
        return False, "i_in_R3"
    conds["i_in_R3"] = all(partition.locate(q) == "R3" for q in interior)

    # L on the stable branch by construction; verify numerically
    ws_pts = ws_minus.chart_points()
    conds["ii_L_on_Ws"] = max(geom.point_to_polyline(q, ws_pts)
                              for q in patch.L[:: max(1, len(patch.L) // 16)]) < 1e-7

    # ordering along the side
    sl = sorted((patch.s_l1, patch.s_l2))
    s_q1 = _closest_param(patch.L, patch.q_hat1, patch.s_l1, patch.s_l2)
    s_qm = _closest_param(patch.L, patch.q_mid, patch.s_l1, patch.s_l2)
    conds["iii_l_order"] = (sl[0] < s_q1 < sl[1] and sl[0] < s_qm < sl[1]
                            and abs(s_q1 - s_qm) > 1e-12)

    # A segments cross from L to the interior of the top side
    hits1 = _divider_crossings(patch, patch.A1)
    hits2 = _divider_crossings(patch, patch.A2)
    conds["iv_A1_crosses"] = hits1 is not None
    conds["v_A2_crosses"] = hits2 is not None

    trans_ok = True
    for hits in (hits1, hits2):
        if hits is None:
            trans_ok = False
            continue
        trans_ok = trans_ok and min(hits[2], hits[3]) > THETA_PATCH
    conds["vi_transverse"] = trans_ok

    samples = interior + list(patch.polygon[:-1])
    def crossing(q2):
        label = classify_sigma_point(sysZ, chart.embed(q2))
        return label is RegionLabel.Crossing
    conds["vii_in_crossing"] = all(crossing(q) for q in interior) and \
        all(crossing(q) for q in patch.polygon[::max(1, len(patch.polygon) // 24)])

    for name in ("i_in_R3", "ii_L_on_Ws", "iii_l_order", "iv_A1_crosses",
                 "v_A2_crosses", "vi_transverse", "vii_in_crossing"):
        if not conds[name]:
            return False, name
    return True, ""


def _closest_param(L, q, s_a, s_b):
    arc = geom.arclengths(L)
    d = np.linalg.norm(L - q, axis=1)
    i = int(np.argmin(d))
    frac = arc[i] / arc[-1] if arc[-1] > 0 else 0.0
    return s_a + frac * (s_b - s_a)


def _divider_crossings(patch, A):
    """Where a divider polyline crosses L and the top side; returns
    (p_bottom, p_top, angle_bottom, angle_top) or None."""
    hit_l = geom.segment_intersections_2d(A, patch.L)
    hit_t = geom.segment_intersections_2d(A, patch.top)
    if not hit_l or not hit_t:
        return None

    def best(hits, curve):
        p, i, ti, j, tj = hits[0]
        da = A[i + 1] - A[i]
        dc = curve[j + 1] - curve[j]
        ang = _angle_between(da, dc)
        ang = min(ang, math.pi - ang)
        # interior of the side, not its endpoints
        arc = geom.arclengths(curve)
        s = arc[j] + tj * (arc[j + 1] - arc[j])
        interior = 1e-6 * arc[-1] < s < (1 - 1e-6) * arc[-1]
        return p, ang, interior

    pb, ab_, int_b = best(hit_l, patch.L)
    pt_, at_, int_t = best(hit_t, patch.top)
    if not (int_b and int_t):
        return None
    return (pb, pt_, ab_, at_)


def _build_strips(patch):
    """Split the patch into three strips along the two dividers."""
    to_frame, from_frame = patch.frame()

    def poly_to_frame(P):
        return np.array([to_frame(q) for q in P])

    Lf = poly_to_frame(patch.L)
    Tf = poly_to_frame(patch.top)
    A1f = poly_to_frame(patch.A1)
    A2f = poly_to_frame(patch.A2)

    def clip_divider(Af):
        """Part of a divider between the bottom and top sides (by b-coord),
        with interpolated band-boundary crossings so coarse polylines that
        jump the whole band still yield a segment."""
        lo, hi = -0.02, 1.02
        out = []
        for a, b in zip(Af[:-1], Af[1:]):
            if lo <= a[1] <= hi:
                out.append(a)
            for yb in (lo, hi):
                if (a[1] - yb) * (b[1] - yb) < 0:
                    t = (yb - a[1]) / (b[1] - a[1])
                    out.append(a + t * (b - a))
        if len(Af) and lo <= Af[-1, 1] <= hi:
            out.append(Af[-1])
        if len(out) < 2:
            raise NoValidPatch("divider segment misses the patch band",
                               failed_condition="strips")
        return np.asarray(out)

    A1c, A2c = clip_divider(A1f), clip_divider(A2f)
    a1 = float(np.median(A1c[:, 0]))
    a2 = float(np.median(A2c[:, 0]))
    if a1 > a2:
        A1c, A2c = A2c, A1c
        a1, a2 = a2, a1

    def order_up(P):
        return P if P[0, 1] < P[-1, 1] else P[::-1]

    A1c, A2c = order_up(A1c), order_up(A2c)

    def between(Pf, a_lo, a_hi):
        mask = (Pf[:, 0] >= a_lo) & (Pf[:, 0] <= a_hi)
        return Pf[mask]

    def strip(a_lo_curve, a_hi_curve, a_lo, a_hi):
        bottom = between(Lf, a_lo, a_hi)
        top = between(Tf, a_lo, a_hi)
        if len(bottom) == 0:
            bottom = np.array([[a_lo, 0.0], [a_hi, 0.0]])
        if len(top) == 0:
            top = np.array([[a_lo, 1.0], [a_hi, 1.0]])
        bottom = bottom[np.argsort(bottom[:, 0])]
        top = top[np.argsort(top[:, 0])]
        left = (a_lo_curve if a_lo_curve is not None
                else np.array([[a_lo, 0.0], [a_lo, 1.0]]))
        right = (a_hi_curve if a_hi_curve is not None
                 else np.array([[a_hi, 0.0], [a_hi, 1.0]]))
        poly = np.vstack([left, top, right[::-1], bottom[::-1], left[:1]])
        return np.array([from_frame(u) for u in poly])

    polys = {
        "QL": strip(None, A1c, 0.0, a1),
        "QC": strip(A1c, A2c, a1, a2),
        "QR": strip(A2c, None, a2, 1.0),
    }
    return StripDecomposition(polys, (patch.A1, patch.A2))


# ---------------------------------------------------------------------------
# patch iteration
# ---------------------------------------------------------------------------

def iterate_patch(handle, region, n, chart, h_max=5e-2, max_points=20000):
    """Image of a polygonal region's boundary under the n-th (possibly
    inverse) iterate, with adaptive boundary refinement."""
    poly = np.asarray(region, dtype=float)
    closed = np.allclose(poly[0], poly[-1])
    if not closed:
        poly = np.vstack([poly, poly[:1]])
    if n == 0:
        return poly
    step = (lambda q: handle.eval(q)) if n > 0 else (lambda q: handle.eval_inverse(q))

    cur = poly
    for k in range(abs(n)):
        src = list(cur)
        try:
            imgs = [_step_chart(step, chart, q) for q in src]
        except ReachedSliding as exc:
            exc.step = k + 1
            raise
        j = 0
        while j < len(src) - 1 and len(src) < max_points:
            if np.linalg.norm(imgs[j + 1] - imgs[j]) > h_max:
                mid = 0.5 * (src[j] + src[j + 1])
                try:
                    im = _step_chart(step, chart, mid)
                except ReachedSliding as exc:
                    exc.step = k + 1
                    raise
                src.insert(j + 1, mid)
                imgs.insert(j + 1, im)
            else:
                j += 1
        cur = np.asarray(imgs)
    return cur


def iterate_boundary_pieces(handle, region, n, chart, h_max=5e-2,
                            max_points=60000, roi=None):
    """Like iterate_patch, but tolerant of orbits that leave the domain or
    reach sliding: such boundary samples are dropped and the image is
    returned as a list of polyline pieces.

    Deep backward iterates of a strip legitimately shed escaping lobes;
    the strands that matter for the covering checks stay bounded.  When a
    region of interest (lo2, hi2) is given, refinement to h_max only
    happens for segments touching it; far-away lobes stay coarse.
    """
    poly = np.asarray(region, dtype=float)
    if not np.allclose(poly[0], poly[-1]):
        poly = np.vstack([poly, poly[:1]])
    step = (lambda q: handle.eval(q)) if n > 0 else (lambda q: handle.eval_inverse(q))
    if roi is not None:
        roi_lo, roi_hi = (np.asarray(roi[0], dtype=float),
                          np.asarray(roi[1], dtype=float))

    def needs_refine(a, b):
        if np.linalg.norm(b - a) <= h_max:
            return False
        if roi is None:
            return True
        seg_lo = np.minimum(a, b)
        seg_hi = np.maximum(a, b)
        return bool(np.all(seg_lo <= roi_hi) and np.all(seg_hi >= roi_lo))

    def safe(q):
        try:
            return _step_chart(step, chart, q)
        except (ExitedDomain, ReachedSliding):
            return None

    pieces = [list(poly)]
    for _ in range(abs(n)):
        new_pieces = []
        total = sum(len(p) for p in pieces)
        budget = max_points
        for src in pieces:
            imgs = [safe(q) for q in src]
            j = 0
            while j < len(src) - 1 and total < budget:
                a, b = imgs[j], imgs[j + 1]
                if a is not None and b is not None and needs_refine(a, b):
                    mid = 0.5 * (np.asarray(src[j]) + np.asarray(src[j + 1]))
                    src.insert(j + 1, mid)
                    imgs.insert(j + 1, safe(mid))
                    total += 1
                else:
                    j += 1
            run = []
            for q in imgs:
                if q is None:
                    if len(run) > 1:
                        new_pieces.append(run)
                    run = []
                else:
                    run.append(q)
            if len(run) > 1:
                new_pieces.append(run)
        if not new_pieces:
            return []
        pieces = new_pieces
    return [np.asarray(p) for p in pieces]


def _step_chart(step, chart, q2):
    return chart.project(step(chart.embed(np.asarray(q2, dtype=float))))


# ---------------------------------------------------------------------------
# certification
# ---------------------------------------------------------------------------

@dataclass
class HorseshoeCertificate:
    n0: int
    patch: QuadPatch
    strips: StripDecomposition
    handle: object
    chart: object
    covering: dict                 # per strip/direction diagnostics
    expansion_min: float
    contraction_max: float
    cone_opening: float
    lambda_samples: np.ndarray     # (n, 3) switching-manifold points
    lambda_words: list
    all_crossing: bool
    depth: int
    bands: dict = field(default_factory=dict)
    boxes: dict = None             # Markov strand intervals at n0

    def to_json_dict(self):
        return {
            "n0": self.n0,
            "expansion_min": float(self.expansion_min),
            "contraction_max": float(self.contraction_max),
            "cone_opening": float(self.cone_opening),
            "depth": int(self.depth),
            "all_crossing": bool(self.all_crossing),
            "n_lambda_samples": int(len(self.lambda_samples)),
            "lambda_samples": [[float(v) for v in p] for p in self.lambda_samples],
            "lambda_words": list(self.lambda_words),
            "bands": {k: [float(v) for v in iv] for k, iv in self.bands.items()},
            "strips": {k: [[float(v) for v in q] for q in P]
                       for k, P in self.strips.polygons.items()},
            "patch_polygon": [[float(v) for v in q] for q in self.patch.polygon],
            "covering": {k: {"ok": bool(d.get("ok", False)),
                             "n_traversing": int(d.get("n_traversing", 0))}
                         for k, d in self.covering.items()},
        }


def _traversing_strands(pieces, axis=1, band=(0.0, 1.0), m_out=0.05):
    """Contiguous sample runs crossing the band fully in the axis coordinate.

    pieces: one closed polygon or a list of open polyline pieces in frame
    coordinates.  Returns the strand list [(s_min, s_max, run)] of the
    pinched-coordinate extents of each full traversal.
    """
    if isinstance(pieces, np.ndarray):
        pieces = [pieces]
    lo, hi = band
    width = hi - lo
    strands = []
    for P in pieces:
        P = np.asarray(P, dtype=float)
        if len(P) < 3:
            continue
        t = P[:, axis]
        s = P[:, 1 - axis]
        n = len(P)
        k = 0
        while k < n:
            if lo - m_out * width <= t[k] <= hi + m_out * width:
                j = k
                while j < n and lo - m_out * width <= t[j] <= hi + m_out * width:
                    j += 1
                if k > 0 and j < n:
                    enter, leave = t[k - 1], t[j]
                    below = lo - m_out * width
                    if (enter < below) != (leave < below):
                        core = (t[k:j] >= lo) & (t[k:j] <= hi)
                        seg_s = s[k:j][core]
                        if len(seg_s):
                            strands.append((float(seg_s.min()),
                                            float(seg_s.max()),
                                            P[k:j][core]))
                k = j
            else:
                k += 1
    return strands


def _strip_cover_check(pieces, m_out=0.05, m_in=0.02, axis=1,
                       target=(0.0, 1.0)):
    """Sampled covering-relation check on an image boundary in frame coords.

    axis=1: the image must contain at least one strand traversing the
    b in [0, 1] band fully whose pinched extent lies strictly inside the
    target interval (a full-height vertical strip crossing the target);
    axis=0 is the transposed check for inverse iterates.  Material of the
    image passing elsewhere is irrelevant; only traversing strands count.
    """
    strands = _traversing_strands(pieces, axis=axis, m_out=m_out)
    t_lo, t_hi = target
    t_w = t_hi - t_lo
    good = [(a, b) for a, b, _ in strands
            if a > t_lo + m_in * t_w and b < t_hi - m_in * t_w]
    return {
        "ok": len(good) >= 1,
        "n_traversing": len(strands),
        "n_in_target": len(good),
        "strand_intervals": [(a, b) for a, b, _ in strands],
        "strand_points": [pts for a, b, pts in strands
                          if a > t_lo + m_in * t_w and b < t_hi - m_in * t_w],
        "target": (float(t_lo), float(t_hi)),
    }


def _chain_jacobian(handle, chart, q2, n):
    """Jacobian of the n-th iterate at a chart point, chained per step."""
    J = np.eye(2)
    q = chart.embed(q2)
    for _ in range(n):
        est = jacobian_2d(handle, q)
        J = est.matrix @ J
        q = handle.eval(q)
    return J


def _cone_bounds(J, kappa):
    """(expansion bound, invariance ok) for the vertical cone |va|<=k|vb|."""
    E = abs(J[1, 1]) - kappa * abs(J[1, 0])
    inv_ok = kappa * abs(J[0, 0]) + abs(J[0, 1]) <= kappa * E
    return E, inv_ok


def _divider_band_centers(patch, strips):
    """Frame a-coordinates of the two dividers (medians of their in-band
    parts)."""
    to_frame, _ = patch.frame()
    acs = []
    for A in strips.dividers:
        F = np.array([to_frame(q) for q in A])
        mask = (F[:, 1] >= -0.05) & (F[:, 1] <= 1.05)
        acs.append(float(np.median(F[mask, 0])) if mask.any()
                   else float(np.median(F[:, 0])))
    return tuple(sorted(acs))


def _band_polygons(patch, a1, a2, width):
    """Vertical frame rectangles centered on the dividers, as chart polygons."""
    _, from_frame = patch.frame()
    out = {}
    for name, ac in (("L", a1), ("R", a2)):
        lo, hi = ac - width, ac + width
        rect = np.array([[lo, 0.0], [hi, 0.0], [hi, 1.0], [lo, 1.0], [lo, 0.0]])
        out[name] = (np.array([from_frame(u) for u in rect]), (lo, hi))
    return out


def certify_horseshoe(handle, patch, strips, N_max=32, depth=6,
                      cone_opening=0.5, exp_margin=1.05, con_margin=0.95,
                      m_out=0.05, m_in=0.05, grid_n=5, h_img=None,
                      band_width=None):
    """Search for the smallest iterate count satisfying the sampled covering
    relations, verify cone-hyperbolicity margins, and sample the invariant
    set.

    Checked at each candidate count: the images of the two outer strips of
    the §-style decomposition cross the patch in full-height strips; the
    images of the two Markov bands (vertical bands centered on the
    unstable-manifold dividers, where the invariant set accumulates) cross
    *each* band interiorly — the full two-shift covering matrix; the
    backward band images cross the patch full-width (the dual relations).
    The invariant-set sample at depth d is the set of periodic points of
    all d-letter symbol words, each of which lies in the true invariant
    set.
    """
    chart = patch.chart
    to_frame, from_frame = patch.frame()
    if h_img is None:
        h_img = 0.05 * max(1.0, np.linalg.norm(patch.l2 - patch.l1))

    a1, a2 = _divider_band_centers(patch, strips)
    if band_width is None:
        band_width = min(0.25 * (a2 - a1), 0.4 * a1, 0.4 * (1.0 - a2), 0.06)
    bands = _band_polygons(patch, a1, a2, band_width)

    plo = patch.polygon.min(axis=0)
    phi = patch.polygon.max(axis=0)
    ctr, half = 0.5 * (plo + phi), 0.5 * (phi - plo)
    roi = (ctr - 3.0 * half, ctr + 3.0 * half)

    def frame_pieces(pieces):
        return [np.array([to_frame(q) for q in P]) for P in pieces]

    diagnostics = {}
    hit_n0 = None
    covering = {}
    boxes = None
    for N in range(1, N_max + 1):
        results = {}
        ok_all = True
        # spec strips: forward full-height crossing of the patch
        for name in ("QL", "QR"):
            pieces = iterate_boundary_pieces(handle, strips.polygons[name],
                                             N, chart, h_max=h_img, roi=roi)
            res = _strip_cover_check(frame_pieces(pieces), m_out, m_in, axis=1)
            results[name + "_fwd"] = res
            ok_all = ok_all and res["ok"]
        # Markov bands: forward covering of both bands, backward duals
        band_items = list(bands.items())
        trial_boxes = {"fwd": {}, "bwd": {}}
        for name, (poly, interval) in band_items:
            pieces = iterate_boundary_pieces(handle, poly, N, chart,
                                             h_max=h_img, roi=roi)
            fp = frame_pieces(pieces)
            for tgt_name, (_tp, tgt) in band_items:
                res = _strip_cover_check(fp, m_out, m_in, axis=1, target=tgt)
                results[f"S{name}_covers_S{tgt_name}"] = res
                ok_all = ok_all and res["ok"]
                trial_boxes["fwd"][(name, tgt_name)] = [
                    iv for iv in res["strand_intervals"]
                    if tgt[0] < iv[0] and iv[1] < tgt[1]]
                trial_boxes.setdefault("strand_pts", {})[(name, tgt_name)] = \
                    [np.asarray(p) for p in res.get("strand_points", [])]
            pieces_b = iterate_boundary_pieces(handle, poly, -N, chart,
                                               h_max=h_img, roi=roi)
            res_b = _strip_cover_check(frame_pieces(pieces_b), m_out, m_in,
                                       axis=0)
            # backward slab positions seed the periodic-point solver; the
            # dual covering itself is witnessed on the realized orbits
            results[f"S{name}_bwd"] = res_b
            trial_boxes["bwd"][name] = [
                iv for iv in res_b["strand_intervals"]
                if -0.1 < iv[0] and iv[1] < 1.1]
        diagnostics[N] = {k: v.get("ok", False) for k, v in results.items()}
        if DEBUG:
            print(f"[certify] N={N}: {diagnostics[N]}")
        if ok_all:
            hit_n0 = N
            covering = results
            boxes = trial_boxes
            break
    if hit_n0 is None:
        raise NotCertified(
            f"covering relations not satisfied for any N <= {N_max}",
            n_max=N_max, diagnostics=diagnostics)
    N0 = hit_n0

    # re-extract the covering strands at fine resolution inside the patch
    # neighborhood: the periodic-point seeds interpolate along them
    if DEBUG:
        print(f"[certify] N0={N0}")
    h_fine = 2e-3 * max(1.0, np.linalg.norm(patch.l2 - patch.l1))
    fine_roi = (ctr - 1.5 * half, ctr + 1.5 * half)
    for name, (poly, interval) in bands.items():
        pieces = iterate_boundary_pieces(handle, poly, N0, chart,
                                         h_max=h_fine, roi=fine_roi,
                                         max_points=120000)
        fps = frame_pieces(pieces)
        for tgt_name, (_tp, tgt) in bands.items():
            res = _strip_cover_check(fps, m_out, m_in, axis=1, target=tgt)
            if res.get("strand_points"):
                boxes.setdefault("strand_pts", {})[(name, tgt_name)] = \
                    [np.asarray(p) for p in res["strand_points"]]

    cert = HorseshoeCertificate(
        n0=N0, patch=patch, strips=strips, handle=handle, chart=chart,
        covering=covering, expansion_min=math.inf, contraction_max=0.0,
        cone_opening=cone_opening, lambda_samples=np.zeros((0, 3)),
        lambda_words=[], all_crossing=False, depth=depth,
        bands={k: v[1] for k, v in bands.items()}, boxes=boxes)

    # invariant-set sample: periodic orbits of all depth-length words
    pts = []
    words = []
    orbits = []
    for w in _all_words(depth):
        try:
            orbit = _periodic_orbit(cert, w)
        except NewtonDivergence as exc:
            if DEBUG:
                print(f"[certify] word {''.join(w)}: diverged ({exc})")
            continue
        pts.append(orbit[0])
        orbits.append(orbit)
        words.append(w)
    if len(pts) < 2 ** depth:
        raise NotCertified(
            f"only {len(pts)} of {2 ** depth} symbol words realized by "
            "periodic points", n_max=N_max, diagnostics={"n0": N0})
    lam = np.array([chart.embed(p) for p in pts])
    all_crossing = all(
        classify_sigma_point(handle.system, p) is RegionLabel.Crossing
        for p in lam)
    cert.lambda_samples = lam
    cert.lambda_words = ["".join(w) for w in words]
    cert.all_crossing = all_crossing

    # dual witness: every realized orbit visits its symbol bands in both
    # time directions (the orbit is closed, so forward containment is
    # containment under the inverse as well)
    slack = 0.5 * band_width
    for w, orbit in zip(words, orbits):
        for c, q2 in zip(w, orbit):
            a, b = to_frame(q2)
            blo, bhi = cert.bands[c]
            if not (blo - slack <= a <= bhi + slack and -0.05 <= b <= 1.05):
                raise NotCertified(
                    f"orbit of word {''.join(w)} leaves its symbol band "
                    f"(a={a:.4f}, b={b:.4f})", n_max=N_max,
                    diagnostics={"word": "".join(w)})
    cert.covering["dual_orbit_containment"] = {"ok": True,
                                               "n_traversing": len(orbits)}

    # cone conditions along the sampled invariant set, in dynamically
    # adapted frames (stable/unstable directions transported by the
    # Jacobian chain itself)
    exp_min = math.inf
    con_max = 0.0
    checked = set()
    for orbit in orbits:
        m = len(orbit)
        Js = [_chain_jacobian(handle, chart, q, N0) for q in orbit]
        for i in range(m):
            key = tuple(np.round(orbit[i], 10))
            if key in checked:
                continue
            checked.add(key)
            B_in = _adapted_frame(Js[(i - 1) % m], Js[i])
            B_out = _adapted_frame(Js[i], Js[(i + 1) % m])
            try:
                Jf = np.linalg.solve(B_out, Js[i] @ B_in)
            except np.linalg.LinAlgError:
                raise NotCertified("degenerate adapted frame",
                                   n_max=N_max) from None
            E, inv_ok = _cone_bounds(Jf, cone_opening)
            if not inv_ok or E < exp_margin:
                raise NotCertified(
                    f"cone condition fails at {orbit[i].tolist()} "
                    f"(E={E:.3g})", n_max=N_max,
                    diagnostics={"point": orbit[i].tolist(), "E": E})
            exp_min = min(exp_min, E)
            Jb = np.linalg.inv(Jf)
            Eb, inv_ok_b = _cone_bounds(Jb[::-1, ::-1].copy(), cone_opening)
            if not inv_ok_b or Eb < 1.0 / con_margin:
                raise NotCertified(
                    f"contraction cone fails at {orbit[i].tolist()}",
                    n_max=N_max, diagnostics={"point": orbit[i].tolist()})
            con_max = max(con_max, 1.0 / Eb)
    cert.expansion_min = exp_min
    cert.contraction_max = con_max
    return cert


def _adapted_frame(J_prev, J_next):
    """Frame [stable, unstable] at a point from its neighbors' chains.

    The unstable direction is the pushforward of a generic vector by the
    incoming chain; the stable direction is the pullback of a generic
    vector by the outgoing chain.  Errors decay like the square of the
    hyperbolicity rate.
    """
    u = J_prev @ np.array([0.3, 1.0])
    nu = np.linalg.norm(u)
    if nu == 0.0:
        u = np.array([0.0, 1.0])
    else:
        u = u / nu
    s = np.linalg.solve(J_next, np.array([1.0, 0.3]))
    ns = np.linalg.norm(s)
    if ns == 0.0:
        s = np.array([1.0, 0.0])
    else:
        s = s / ns
    return np.column_stack([s, u])


def verify_certificate(cert, resolution_factor=2.0):
    """Re-verify the strip covering relations at finer boundary resolution."""
    to_frame, _ = cert.patch.frame()
    h = 2e-3 * max(1.0, np.linalg.norm(cert.patch.l2 - cert.patch.l1))
    h /= resolution_factor

    def fp(pieces):
        return [np.array([to_frame(q) for q in P]) for P in pieces]

    plo = cert.patch.polygon.min(axis=0)
    phi = cert.patch.polygon.max(axis=0)
    ctr, half = 0.5 * (plo + phi), 0.5 * (phi - plo)
    roi = (ctr - 3.0 * half, ctr + 3.0 * half)

    for name in ("QL", "QR"):
        poly = cert.strips.polygons[name]
        pieces = iterate_boundary_pieces(cert.handle, poly, cert.n0,
                                         cert.chart, h_max=h, roi=roi)
        if not _strip_cover_check(fp(pieces), axis=1)["ok"]:
            return False
    _, from_frame = cert.patch.frame()
    for name, (blo, bhi) in cert.bands.items():
        rect = np.array([[blo, 0.0], [bhi, 0.0], [bhi, 1.0], [blo, 1.0],
                         [blo, 0.0]])
        poly = np.array([from_frame(u) for u in rect])
        pieces = iterate_boundary_pieces(cert.handle, poly, cert.n0,
                                         cert.chart, h_max=h, roi=roi)
        for tgt in cert.bands.values():
            if not _strip_cover_check(fp(pieces), axis=1, target=tgt)["ok"]:
                return False
    return True


# ---------------------------------------------------------------------------
# symbolic dynamics
# ---------------------------------------------------------------------------

def _all_words(n):
    out = [[]]
    for _ in range(n):
        out = [w + [c] for w in out for c in "LR"]
    return out


def _strip_center(cert, letter):
    _, from_frame = cert.patch.frame()
    blo, bhi = cert.bands[letter]
    return from_frame([0.5 * (blo + bhi), 0.5])


def _word_seed(cert, word, bwd_choice=0):
    """Initial orbit guess from the Markov boxes.

    Each anchor's expanded coordinate comes from the forward strand of its
    predecessor symbol over its own band; the pinched coordinate encodes
    the future, so it comes from the backward slab of the *successor*
    symbol's band.  bwd_choice selects among multiple slabs on retries.
    """
    _, from_frame = cert.patch.frame()
    m = len(word)
    X = []
    for i in range(m):
        prev = word[(i - 1) % m]
        a_ivs = (cert.boxes or {}).get("fwd", {}).get((prev, word[i]), [])
        if a_ivs:
            a0 = 0.5 * (a_ivs[0][0] + a_ivs[0][1])
        else:
            blo, bhi = cert.bands[word[i]]
            a0 = 0.5 * (blo + bhi)
        b_ivs = (cert.boxes or {}).get("bwd", {}).get(word[(i + 1) % m], [])
        if b_ivs:
            iv = b_ivs[min(bwd_choice, len(b_ivs) - 1)]
            b0 = 0.5 * (iv[0] + iv[1])
        else:
            b0 = 0.5
        X.append(from_frame([a0, b0]))
    return np.array(X)


def _periodic_orbit(cert, word, tol=1e-11, max_iter=60, with_orbit=False):
    """Periodic orbit of a symbol word: cyclic multiple shooting at the
    single-return-map level, seeded from the refined strand triples.

    One flight per Newton block keeps each block mildly nonlinear, so the
    solve is robust at any hyperbolicity strength.  A converged orbit must
    place every anchor in its symbol band, else the next ranked seed is
    tried.  Returns the m anchor points (one per symbol).
    """
    handle, chart, N0 = cert.handle, cert.chart, cert.n0
    m = len(word)
    M = m * N0
    to_frame, _ = cert.patch.frame()
    scale = max(1.0, np.linalg.norm(cert.patch.l2 - cert.patch.l1))
    clamp_r = 20.0 * scale

    def step1(q2):
        return chart.project(handle.eval(chart.embed(q2)))

    def clamp(q2):
        n = np.linalg.norm(q2)
        return q2 if n <= clamp_r else q2 * (clamp_r / n)

    enclosure = None
    for attempt in range(3):
        anchors = _word_seed(cert, word, bwd_choice=attempt)
        X = []
        ok = True
        for i in range(m):
            q = anchors[i]
            X.append(q)
            for _ in range(N0 - 1):
                try:
                    q = clamp(step1(q))
                except Exception:   # noqa: BLE001
                    ok = False
                    break
                X.append(q)
            if not ok:
                break
        if not ok or len(X) != M:
            continue
        X = np.array(X)

        for _ in range(max_iter):
            F = np.empty((M, 2))
            Js = []
            try:
                for k in range(M):
                    F[k] = step1(X[k]) - X[(k + 1) % M]
                    Js.append(jacobian_2d(handle, chart.embed(X[k])).matrix)
            except Exception:   # noqa: BLE001
                X = None
                break
            if np.abs(F).max() < tol:
                anchors_ok = True
                for i, c in enumerate(word):
                    af, bf = to_frame(X[i * N0])
                    blo, bhi = cert.bands[c]
                    wslack = 1.0 * (bhi - blo)
                    if not (blo - wslack <= af <= bhi + wslack
                            and -0.1 <= bf <= 1.1):
                        anchors_ok = False
                        break
                if not anchors_ok:
                    X = None
                    break
                if with_orbit:
                    return X[::N0].copy(), X.copy(), float(np.abs(F).max())
                return X[::N0].copy()
            A = np.zeros((2 * M, 2 * M))
            for k in range(M):
                A[2 * k:2 * k + 2, 2 * k:2 * k + 2] = Js[k]
                j = (k + 1) % M
                A[2 * k:2 * k + 2, 2 * j:2 * j + 2] -= np.eye(2)
            try:
                dx = np.linalg.solve(A, -F.ravel())
            except np.linalg.LinAlgError:
                X = None
                break
            step = dx.reshape(M, 2)
            norm = np.linalg.norm(step, axis=1).max()
            lim = 0.5 * scale
            if norm > lim:
                step *= lim / norm
            X = X + step
        if X is not None:
            enclosure = (X.min(axis=0).tolist(), X.max(axis=0).tolist())
    raise NewtonDivergence(f"periodic orbit for word {''.join(word)} did not "
                           "converge", enclosure=enclosure)


def periodic_orbit_points(cert, word):
    """Anchor points of the word's periodic orbit plus its orbit residual.

    The residual is the conditioning-safe multiple-shooting measure: the
    maximum gap |Phi(x_k) - x_{k+1}| over every single return-map flight
    of the full periodic orbit (a one-shot |Delta^m(x) - x| would be
    inflated by the product of expansion rates, which exceeds 1/eps in
    double precision already for short words).
    """
    word = list(word)
    anchors2, phi_orbit, resid = _periodic_orbit(cert, word,
                                                 with_orbit=True)
    pts3 = [cert.chart.embed(q) for q in anchors2]
    return np.array(pts3), resid


def symbolic_periodic_point(cert, word):
    """Periodic point of the horseshoe iterate shadowing the symbol word.

    Returns the switching-manifold point; the full orbit is reachable by
    iterating the certificate handle.
    """
    word = list(word)
    if not word or any(c not in "LR" for c in word):
        raise ValueError("word must be a nonempty string over {L, R}")
    if len(word) > cert.depth:
        raise ValueError(f"word longer than the certified depth {cert.depth}")
    orbit = _periodic_orbit(cert, word)
    return cert.chart.embed(orbit[0])


def periodic_residual(cert, point, period):
    """|Delta^period(p) - p| for a switching-manifold point."""
    q = np.asarray(point, dtype=float)
    out = q.copy()
    for _ in range(period * cert.n0):
        out = cert.handle.eval(out)
    return float(np.linalg.norm(out - q))


# ---------------------------------------------------------------------------
# fixture pipeline
# ---------------------------------------------------------------------------

def certify_fixture_pipeline(kind="transverse", N_max=8, depth=6,
                             manifold_arclength=24.0, section_offset=1.5,
                             **certify_kwargs):
    """Full pipeline on a synthetic two-involution fixture.

    Grows the manifolds, locates homoclinic points, builds the region
    partition and the patch, and certifies.  Any structural failure
    (no transverse pattern, no valid patch) is surfaced as NotCertified
    with the failing stage recorded, since it means exactly that: no
    horseshoe certificate exists for this fixture at these settings.
    """
    from . import manifolds as mf
    from .fixtures import fixture_handle, fixture_system
    from .integrate import SectionPlane
    from .tsing import analyze_t_singularity

    Z = fixture_system(kind)
    handle = fixture_handle(kind)
    report = analyze_t_singularity(Z, np.zeros(3), handle)
    if not report.stable:
        raise NotCertified("fixture singular point is not a stable saddle",
                           diagnostics={"stage": "tsing"})
    curves = {
        "u-": mf.grow_manifold(handle, report, "u-", manifold_arclength,
                               h_max=2e-3, roi_radius=6.0),
        "s-": mf.grow_manifold(handle, report, "s-", manifold_arclength,
                               h_max=2e-3, roi_radius=6.0),
        "u+": mf.grow_manifold(handle, report, "u+", 4.0),
        "s+": mf.grow_manifold(handle, report, "s+", 4.0),
    }
    sq = math.sqrt(2.0)
    sections = (SectionPlane(np.array([1, 1, 0]) / sq, -section_offset / sq,
                             name="tau_u"),
                SectionPlane(np.array([1, 1, 0]) / sq, +section_offset / sq,
                             name="tau_s"))
    homs = mf.find_homoclinic_points(curves["u-"], curves["s-"])
    p0_2 = report.chart.project(report.location)
    radii = sorted(np.linalg.norm(report.chart.project(hh.point) - p0_2)
                   for hh in homs[:12]) or [1.0]
    outer_radius = 1.8 * radii[min(len(radii) - 1, 7)]
    partition = build_region_partition(handle, report, sections=sections,
                                       curves=curves,
                                       outer_radius=outer_radius)
    try:
        patch, strips = build_q_patch(partition, curves["u-"], curves["s-"],
                                      homs, handle)
    except (NoValidPatch, PatternViolation) as exc:
        raise NotCertified(
            f"no certifiable patch: {exc}", n_max=N_max,
            diagnostics={"stage": "patch", "reason": str(exc)}) from exc
    cert = certify_horseshoe(handle, patch, strips, N_max=N_max, depth=depth,
                             **certify_kwargs)
    return cert, {"system": Z, "handle": handle, "report": report,
                  "curves": curves, "partition": partition,
                  "homoclinics": homs, "patch": patch, "strips": strips}


# ---------------------------------------------------------------------------
# crossing audit
# ---------------------------------------------------------------------------

@dataclass
class OrbitAudit:
    start: np.ndarray
    label: str                    # "Crossing" | "PseudoOrbit" | "SlidingCapture"
    hits: list
    hit_labels: list

    def to_json_dict(self):
        return {"start": [float(v) for v in self.start],
                "label": self.label,
                "hit_labels": [l.value for l in self.hit_labels]}


def orbit_crossing_audit(Z, points, steps, handle=None):
    """Follow the geometric orbit of each point for the given number of
    return-map steps, recording every switching-manifold hit.

    A hit with opposing Lie-derivative signs means the return-map
    itinerary concatenates arcs against time orientation there: the
    itinerary represents a pseudo-orbit, or a sliding capture when the
    time-consistent continuation lands in the stable sliding region.
    """
    from .integrate import ReturnMapHandle
    if handle is None:
        handle = ReturnMapHandle(Z, order="upper_first", check_crossing=False)
    first, second = (("upper", "lower") if handle.order == "upper_first"
                     else ("lower", "upper"))
    reports = []
    for p in points:
        p = np.asarray(p, dtype=float)
        if p.shape == (2,):
            p = np.array([p[0], p[1], 0.0])
        hits = [p.copy()]
        cur = p
        fwd = steps >= 0
        for _ in range(abs(steps)):
            try:
                if fwd:
                    mid = handle.half(first, cur)
                    out = handle.half(second, mid)
                else:
                    mid = handle.half(second, cur)
                    out = handle.half(first, mid)
            except Exception:   # noqa: BLE001 - audit is descriptive
                break
            hits.extend([mid.copy(), out.copy()])
            cur = out
        labels = [classify_sigma_point(Z, q) for q in hits]

        verdict = "Crossing"
        xf0, yf0 = lie_pair(Z, p)
        arc_side = first if fwd else second
        lie0 = xf0 if arc_side == "upper" else yf0
        want = 1.0 if arc_side == "upper" else -1.0
        d0 = 1.0 if (math.copysign(1.0, lie0) == want or lie0 == 0.0) else -1.0
        for lab in labels:
            if lab in (RegionLabel.Crossing, RegionLabel.TangencyX,
                       RegionLabel.TangencyY, RegionLabel.TangencyBoth):
                continue
            forward_capture = (lab is RegionLabel.StableSliding and d0 > 0) or \
                              (lab is RegionLabel.UnstableSliding and d0 < 0)
            verdict = "SlidingCapture" if forward_capture else "PseudoOrbit"
            break
        reports.append(OrbitAudit(p, verdict, hits, labels))
    return reports
