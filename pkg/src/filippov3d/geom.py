"""Polyline and polygon geometry used by the manifold and horseshoe layers."""

from __future__ import annotations

import numpy as np


def arclengths(points):
    """Cumulative arclength parameters of a polyline, starting at 0."""
    P = np.asarray(points, dtype=float)
    if len(P) < 2:
        return np.zeros(len(P))
    seg = np.linalg.norm(np.diff(P, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(seg)])


def point_to_polyline(p, points):
    """Distance from p to a polyline (exact over segments)."""
    P = np.asarray(points, dtype=float)
    p = np.asarray(p, dtype=float)
    if len(P) == 1:
        return float(np.linalg.norm(p - P[0]))
    a = P[:-1]
    b = P[1:]
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    denom[denom == 0.0] = 1.0
    t = np.clip(np.einsum("ij,ij->i", p - a, ab) / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return float(np.linalg.norm(proj - p, axis=1).min())


def directed_hausdorff(A, B):
    """max over vertices of A of the distance to polyline B."""
    return max(point_to_polyline(p, B) for p in np.asarray(A, dtype=float))


def hausdorff(A, B):
    return max(directed_hausdorff(A, B), directed_hausdorff(B, A))


def min_distance(A, B):
    """Minimum vertex-to-polyline distance between two polylines."""
    dab = min(point_to_polyline(p, B) for p in np.asarray(A, dtype=float))
    dba = min(point_to_polyline(p, A) for p in np.asarray(B, dtype=float))
    return min(dab, dba)


def segment_intersections_2d(A, B, include_endpoints=True):
    """All crossings between two 2D polylines.

    Returns a list of (point, i, ti, j, tj): segment indices and local
    parameters in [0, 1].  Bounding-box prefilter keeps it near-linear for
    curves that cross only a few times.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    out = []
    if len(A) < 2 or len(B) < 2:
        return out
    a0, a1 = A[:-1], A[1:]
    b0, b1 = B[:-1], B[1:]
    amin = np.minimum(a0, a1)
    amax = np.maximum(a0, a1)
    bmin = np.minimum(b0, b1)
    bmax = np.maximum(b0, b1)
    # blocked bounding-box prefilter keeps memory linear in the block size
    pairs_i = []
    pairs_j = []
    block = max(1, int(4.0e6 // max(len(b0), 1)))
    for start in range(0, len(a0), block):
        sl = slice(start, min(start + block, len(a0)))
        overlap = ((amin[sl, None, 0] <= bmax[None, :, 0])
                   & (amax[sl, None, 0] >= bmin[None, :, 0])
                   & (amin[sl, None, 1] <= bmax[None, :, 1])
                   & (amax[sl, None, 1] >= bmin[None, :, 1]))
        ii, jj = np.nonzero(overlap)
        pairs_i.append(ii + start)
        pairs_j.append(jj)
    eps = 0.0 if include_endpoints else 1e-12
    for i, j in zip(np.concatenate(pairs_i) if pairs_i else [],
                    np.concatenate(pairs_j) if pairs_j else []):
        p, r = a0[i], a1[i] - a0[i]
        q, s = b0[j], b1[j] - b0[j]
        denom = r[0] * s[1] - r[1] * s[0]
        if denom == 0.0:
            continue
        d = q - p
        ti = (d[0] * s[1] - d[1] * s[0]) / denom
        tj = (d[0] * r[1] - d[1] * r[0]) / denom
        if -eps <= ti <= 1 + eps and -eps <= tj <= 1 + eps:
            if 0.0 <= ti <= 1.0 and 0.0 <= tj <= 1.0:
                out.append((p + ti * r, int(i), float(ti), int(j), float(tj)))
    return out


def dedupe_points(items, key=lambda it: it[0], tol=1e-9):
    """Drop items whose key points coincide within tol (keeps first).

    Grid-hashed so large noisy collections stay near-linear.
    """
    kept = []
    buckets = {}
    inv = 1.0 / tol
    for it in items:
        p = np.asarray(key(it), dtype=float)
        cell = tuple(np.floor(p * inv).astype(np.int64))
        clash = False
        for d in np.ndindex(*([3] * len(cell))):
            nb = tuple(c + dd - 1 for c, dd in zip(cell, d))
            for q in buckets.get(nb, ()):
                if np.linalg.norm(p - q) <= tol:
                    clash = True
                    break
            if clash:
                break
        if not clash:
            kept.append(it)
            buckets.setdefault(cell, []).append(p)
    return kept


# ---------------------------------------------------------------------------
# polygons (2D, simple, vertex list without repeated last point)
# ---------------------------------------------------------------------------

def polygon_area(poly):
    P = np.asarray(poly, dtype=float)
    x, y = P[:, 0], P[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def point_in_polygon(p, poly):
    """Ray-casting point-in-polygon test."""
    P = np.asarray(poly, dtype=float)
    x, y = float(p[0]), float(p[1])
    x0, y0 = P[:, 0], P[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    cond = (y0 > y) != (y1 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xin = x0 + (y - y0) / (y1 - y0) * (x1 - x0)
    crossing = cond & (x < xin)
    return bool(np.count_nonzero(crossing) % 2)


def winding_number(p, poly):
    """Winding number of a closed polygon around p (independent oracle for
    the ray-casting test)."""
    P = np.asarray(poly, dtype=float) - np.asarray(p, dtype=float)
    ang = np.arctan2(P[:, 1], P[:, 0])
    d = np.diff(np.concatenate([ang, ang[:1]]))
    d = (d + np.pi) % (2 * np.pi) - np.pi
    return int(round(float(d.sum()) / (2 * np.pi)))


def clip_halfplane(poly, normal, offset):
    """Sutherland-Hodgman clip of a polygon to {q . normal <= offset}."""
    P = list(np.asarray(poly, dtype=float))
    if not P:
        return np.zeros((0, 2))
    n = np.asarray(normal, dtype=float)
    out = []
    for k in range(len(P)):
        cur, nxt = P[k], P[(k + 1) % len(P)]
        c_in = np.dot(cur, n) <= offset
        n_in = np.dot(nxt, n) <= offset
        if c_in:
            out.append(cur)
        if c_in != n_in:
            d = np.dot(nxt - cur, n)
            t = (offset - np.dot(cur, n)) / d
            out.append(cur + t * (nxt - cur))
    return np.asarray(out)


def clip_band(poly, axis, lo, hi):
    """Clip a polygon to lo <= coordinate[axis] <= hi."""
    e = np.zeros(2)
    e[axis] = 1.0
    out = clip_halfplane(poly, e, hi)
    if len(out) == 0:
        return out
    return clip_halfplane(out, -e, -lo)


def resample_polyline(points, h_max):
    """Insert linear midpoints so no segment exceeds h_max."""
    P = np.asarray(points, dtype=float)
    out = [P[0]]
    for k in range(1, len(P)):
        a, b = P[k - 1], P[k]
        d = np.linalg.norm(b - a)
        n_ins = int(np.ceil(d / h_max)) - 1
        for m in range(1, n_ins + 1):
            out.append(a + (b - a) * m / (n_ins + 1))
        out.append(b)
    return np.asarray(out)
