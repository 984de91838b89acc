"""Event-driven integration to the switching manifold and to sections.

The stepper is scipy's embedded Runge-Kutta 5(4) pair behind an explicit
tolerance contract; event location is done on the dense output by sign
scanning plus bracketed root refinement, never by trusting a single step.
Departures that start exactly on a monitored surface are handled by a
known departure sign, so half-returns from the switching manifold are
robust at every flight scale.

On top of the flight primitive sit the numeric half-return involutions,
the composed crossing return map with domain bookkeeping, chart Jacobians,
and the plane-to-plane section map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .core import (RegionLabel, SigmaChart, classify_sigma_point,
                   lie_derivative, tangency_tol)
from .errors import (ExitedDomain, GrazingEvent, LeftBox, NoReturn,
                     ReachedSliding, StencilFailure)

_ZERO = 1e-13


@dataclass
class EventIntegratorConfig:
    rtol: float = 1e-10
    atol: float = 1e-12
    event_tol: float = 1e-12
    max_step: float = math.inf
    max_flight_time: float = 200.0
    scan_points: int = 96          # dense-output samples per chunk
    first_chunk: float = 0.25      # initial chunk length, grows geometrically

    def __post_init__(self):
        if min(self.rtol, self.atol, self.event_tol) <= 0:
            raise ValueError("tolerances must be positive")
        if self.event_tol > self.atol * 100:
            raise ValueError("event_tol must be <= 100 * atol")


DEFAULT_CFG = EventIntegratorConfig()


@dataclass
class HalfReturnResult:
    point: np.ndarray
    flight_time: float
    side: str
    monotone: bool                 # f-sign never flipped strictly inside the arc
    path: np.ndarray = None        # optional (n, 4) array of (t, x, y, z)


# ---------------------------------------------------------------------------
# flight primitive
# ---------------------------------------------------------------------------

class _Event:
    """Sign-change monitor on a scalar function of the state."""

    def __init__(self, fn, name, start_sign=None, kind="stop"):
        self.fn = fn
        self.name = name
        self.start_sign = start_sign   # sign to assume while the value is ~0 at start
        self.kind = kind               # "stop" or "restart"
        self.prev_sign = None

    def values(self, P):
        vals = self.fn(P)
        vals = np.asarray(vals, dtype=float)
        if vals.shape != (P.shape[0],):
            vals = np.array([float(self.fn(p)) for p in P])
        return vals


@dataclass
class _FlightOutcome:
    status: str           # "event" | "timeout" | "left_box"
    event: str = ""
    t: float = 0.0
    point: np.ndarray = None
    monotone: bool = True
    path: list = None


def _flight(field_fn, p0, sign, events, cfg, box, record=False):
    """Integrate dp/dt = sign*field until the first event fires.

    Events see the trajectory through dense-output scans; an event whose
    value is ~0 at departure must carry start_sign.  Returns a
    _FlightOutcome; restarts across interior surfaces are the caller's
    job (the outcome reports which event fired).
    """
    def rhs(t, p):
        return sign * field_fn(p)

    for ev in events:
        v0 = float(ev.fn(np.asarray(p0, dtype=float)))
        if abs(v0) <= 100 * cfg.event_tol:
            if ev.start_sign is None:
                raise ValueError(f"event {ev.name} starts at zero without start_sign")
            ev.prev_sign = float(ev.start_sign)
        else:
            ev.prev_sign = math.copysign(1.0, v0)

    t = 0.0
    p = np.asarray(p0, dtype=float)
    chunk = cfg.first_chunk * (1.0 + np.linalg.norm(p)) / (1.0 + np.linalg.norm(field_fn(p)))
    chunk = min(max(chunk, 1e-6), cfg.max_flight_time / 2)
    path = [] if record else None
    monotone = True
    first_chunk = True

    while t < cfg.max_flight_time:
        t_end = min(t + chunk, cfg.max_flight_time)
        sol = solve_ivp(rhs, (t, t_end), p, method="RK45", rtol=cfg.rtol,
                        atol=cfg.atol, max_step=cfg.max_step, dense_output=True)
        if not sol.success:
            raise NoReturn(f"integrator failed: {sol.message}")
        ts = np.linspace(t, sol.t[-1], cfg.scan_points)
        P = sol.sol(ts).T

        lo = np.array(box.lo) - 1e-9
        hi = np.array(box.hi) + 1e-9
        outside = np.any((P < lo) | (P > hi), axis=1)
        i_box = int(np.argmax(outside)) if outside.any() else None

        best = None   # (index, t_exact, event)
        for ev in events:
            vals = ev.values(P)
            signs = np.where(np.abs(vals) <= _ZERO, 0.0, np.sign(vals))
            prev = ev.prev_sign
            i0 = 1 if first_chunk else 0
            hit = None
            for i in range(i0, len(ts)):
                s = signs[i]
                if s == 0.0:
                    if abs(ts[i] - t) < 1e-300:
                        continue
                    hit = (i, ts[i])   # landed exactly on the surface
                    break
                if s == -prev:
                    # bracket [previous sample, this one]
                    ta = ts[i - 1] if i > 0 else t
                    va = float(ev.fn(sol.sol(ta)))
                    if abs(va) <= _ZERO or math.copysign(1.0, va) != prev:
                        # departure zero skipped inside one spacing: bisect
                        # geometrically for a point carrying the prior sign
                        tb = ts[i]
                        found = None
                        step = (tb - ta)
                        for _ in range(80):
                            step /= 2
                            cand = ta + step
                            vc = float(ev.fn(sol.sol(cand)))
                            if abs(vc) > _ZERO and math.copysign(1.0, vc) == prev:
                                found = cand
                                break
                        if found is None:
                            hit = (i, ta)  # grazing-degenerate, flag via zero time
                            break
                        ta = found
                    t_exact = brentq(lambda s_: float(ev.fn(sol.sol(s_))),
                                     ta, ts[i], xtol=1e-15, rtol=8.9e-16)
                    hit = (i, t_exact)
                    break
                prev = s if s != 0.0 else prev
            if hit is not None and (best is None or hit[0] < best[0]
                                    or (hit[0] == best[0] and hit[1] < best[2])):
                best = (hit[0], ev, hit[1])

        if record:
            stop_i = len(ts)
            if best is not None:
                stop_i = best[0]
            if i_box is not None:
                stop_i = min(stop_i, i_box)
            path.extend(zip(ts[:stop_i], P[:stop_i]))

        if best is not None and (i_box is None or best[0] <= i_box):
            _, ev, t_exact = best
            pt = sol.sol(t_exact)
            if record:
                path.append((t_exact, pt))
            return _FlightOutcome("event", ev.name, t_exact, pt, monotone, path)

        if i_box is not None:
            return _FlightOutcome("left_box", "", ts[i_box], P[i_box], monotone, path)

        for ev in events:
            vlast = float(ev.fn(P[-1]))
            if abs(vlast) > _ZERO:
                ev.prev_sign = math.copysign(1.0, vlast)
        p = sol.y[:, -1]
        t = sol.t[-1]
        chunk = min(chunk * 2.0, cfg.max_flight_time)
        first_chunk = False

    return _FlightOutcome("timeout", "", t, p, monotone, path)


# ---------------------------------------------------------------------------
# half returns
# ---------------------------------------------------------------------------

def flow_to_sigma(V, f, p, direction="forward", cfg=DEFAULT_CFG, box=None,
                  restart_surfaces=(), record=False):
    """First crossing of f = 0 along the orbit of V from p.

    p may lie on the manifold (the departure Lie derivative then fixes the
    excursion side) or off it.  Tangential departures and arrivals raise
    GrazingEvent; box exit raises LeftBox; exhausting the flight budget
    raises NoReturn.
    """
    from .core import DEFAULT_BOX
    box = box or DEFAULT_BOX
    p = np.asarray(p, dtype=float)
    sign = 1.0 if direction == "forward" else -1.0

    f0 = float(f(p))
    lie0 = lie_derivative(V, f, p, 1)
    tau = tangency_tol(np.linalg.norm(V(p)))
    if abs(f0) <= 100 * cfg.event_tol:
        if abs(lie0) < tau:
            raise GrazingEvent("tangential departure from the switching manifold",
                               point=p, lie=lie0)
        start_sign = math.copysign(1.0, sign * lie0)
    else:
        start_sign = math.copysign(1.0, f0)

    events = [_Event(lambda q: f(q), "sigma", start_sign=start_sign)]
    total_t = 0.0
    cur = p
    side = "upper" if start_sign > 0 else "lower"
    merged_path = [] if record else None

    for g in restart_surfaces:
        events.append(_Event((lambda gg: lambda q: gg(q))(g), f"aux{id(g)}",
                             kind="restart"))

    for _ in range(64):
        out = _flight(V, cur, sign, events, cfg, box, record=record)
        if record and out.path:
            merged_path.extend((total_t + tt, pt) for tt, pt in out.path)
        if out.status == "left_box":
            raise LeftBox("trajectory left the working box",
                          point=out.point, time=total_t + out.t)
        if out.status == "timeout":
            raise NoReturn(f"no crossing within {cfg.max_flight_time} time units")
        total_t += out.t
        if out.event == "sigma":
            arr = out.point
            lie_arr = lie_derivative(V, f, arr, 1)
            if abs(lie_arr) < tangency_tol(np.linalg.norm(V(arr))):
                raise GrazingEvent("tangential arrival at the switching manifold",
                                   point=arr, lie=lie_arr)
            path_arr = None
            if record:
                path_arr = np.array([[tt, *pt] for tt, pt in merged_path])
            return HalfReturnResult(arr, sign * total_t, side, out.monotone, path_arr)
        # restart across an interior surface: flip that event's start sign
        cur = out.point
        for ev in events:
            if ev.name == out.event:
                v_end = float(ev.fn(cur))
                ev.start_sign = -ev.prev_sign if abs(v_end) <= 100 * cfg.event_tol \
                    else math.copysign(1.0, v_end)
            else:
                v_end = float(ev.fn(cur))
                ev.start_sign = ev.prev_sign if abs(v_end) <= 100 * cfg.event_tol \
                    else math.copysign(1.0, v_end)
    raise NoReturn("too many interior-surface restarts")


def half_return(Z, side, q, cfg=DEFAULT_CFG, record=False):
    """Numeric half-return involution image of a switching-manifold point.

    Points on the field's own fold line are fixed (zero flight time).  The
    arc is traversed forward in time when the departure Lie derivative
    sends it into the requested side, backward otherwise — either way it
    is the unique one-sided orbit segment through q.
    """
    q = np.asarray(q, dtype=float)
    V = Z.upper if side == "upper" else Z.lower
    f = Z.switching
    lie = lie_derivative(V, f, q, 1)
    if abs(lie) <= tangency_tol(np.linalg.norm(V(q))):
        return (q.copy(), HalfReturnResult(q.copy(), 0.0, side, True)) if record \
            else q.copy()
    want_positive = (side == "upper")
    forward = (lie > 0) == want_positive
    res = flow_to_sigma(V, f, q, "forward" if forward else "backward", cfg,
                        Z.box, restart_surfaces=Z.aux_switchings, record=record)
    return (res.point, res) if record else res.point


# ---------------------------------------------------------------------------
# return-map handles
# ---------------------------------------------------------------------------

class BoxDomain:
    """Whole working box as the return-map domain."""

    def __init__(self, box):
        self.box = box

    def contains(self, p):
        return self.box.contains(p, slack=1e-9)

    def describe(self):
        return {"kind": "box", "lo": list(self.box.lo), "hi": list(self.box.hi)}


class DiskTubeDomain:
    """Disk around the two-fold point plus tubes around global curves."""

    def __init__(self, center, r_disk=0.5, curves=(), r_tube=0.1):
        self.center = np.asarray(center, dtype=float)
        self.r_disk = float(r_disk)
        self.curves = [np.asarray(c, dtype=float) for c in curves]
        self.r_tube = float(r_tube)

    def contains(self, p):
        p = np.asarray(p, dtype=float)
        if np.linalg.norm(p - self.center) <= self.r_disk:
            return True
        for c in self.curves:
            d = np.linalg.norm(c - p, axis=1)
            if d.min() <= self.r_tube:
                return True
        return False

    def describe(self):
        return {"kind": "disk+tube", "center": self.center.tolist(),
                "r_disk": self.r_disk, "n_curves": len(self.curves),
                "r_tube": self.r_tube}


class ReturnMapHandle:
    """Crossing return map composed of the two half-return involutions.

    order="lower_first" composes upper∘lower (the extension-lemma
    convention); "upper_first" composes lower∘upper (the convention the
    closed-form models are printed in).  Supplying half_maps=(up, down)
    with planar callables bypasses numeric integration; region checks
    still go through the system fields.
    """

    def __init__(self, system, order="lower_first", cfg=DEFAULT_CFG,
                 domain=None, half_maps=None, cache=True,
                 check_crossing=True, local_disk=None):
        self.system = system
        if order not in ("lower_first", "upper_first"):
            raise ValueError(f"bad composition order {order!r}")
        self.order = order
        self.cfg = cfg
        self.domain = domain or BoxDomain(system.box)
        self.half_maps = half_maps
        self.check_crossing = check_crossing
        # inside this disk the map is the *local* return map, which is
        # defined across the sliding sectors; the crossing guard only
        # applies beyond it
        self.local_disk = local_disk
        self._cache = {} if cache else None

    def _guard_applies(self, p):
        if not self.check_crossing:
            return False
        if self.local_disk is None:
            return True
        center, radius = self.local_disk
        return np.linalg.norm(np.asarray(p, dtype=float)
                              - np.asarray(center, dtype=float)) > radius

    # -- half maps -----------------------------------------------------------

    def half(self, side, q):
        q = np.asarray(q, dtype=float)
        if self.half_maps is not None:
            fn = self.half_maps[0] if side == "upper" else self.half_maps[1]
            out = np.asarray(fn(q[:2]), dtype=float)
            return np.array([out[0], out[1], 0.0])
        return half_return(self.system, side, q, self.cfg)

    # -- composed map --------------------------------------------------------

    def _compose(self, q, order):
        q = np.asarray(q, dtype=float)
        if q.shape == (2,):
            q = np.array([q[0], q[1], 0.0])
        if not self.domain.contains(q):
            raise ExitedDomain("input outside the return-map domain", point=q)
        key = None
        if self._cache is not None:
            key = (order, q.tobytes())
            hit = self._cache.get(key)
            if hit is not None:
                return hit.copy()
        first, second = (("lower", "upper") if order == "lower_first"
                         else ("upper", "lower"))
        mid = self.half(first, q)
        if self._guard_applies(mid):
            label = classify_sigma_point(self.system, mid)
            if label in (RegionLabel.StableSliding, RegionLabel.UnstableSliding):
                raise ReachedSliding(
                    f"intermediate arrival classifies {label.value}",
                    point=mid, label=label)
        out = self.half(second, mid)
        if not self.domain.contains(out):
            raise ExitedDomain("output outside the return-map domain", point=out)
        if self._cache is not None:
            self._cache[key] = out.copy()
        return out

    def eval(self, q):
        return self._compose(q, self.order)

    def eval_inverse(self, q):
        inv = "upper_first" if self.order == "lower_first" else "lower_first"
        return self._compose(q, inv)

    def iterate(self, q, n):
        step = self.eval if n >= 0 else self.eval_inverse
        for _ in range(abs(n)):
            q = step(q)
        return q


def return_map_eval(handle, q):
    """Evaluate the composed crossing return map (module-level convenience)."""
    return handle.eval(q)


# ---------------------------------------------------------------------------
# chart Jacobians
# ---------------------------------------------------------------------------

@dataclass
class JacobianEstimate:
    matrix: np.ndarray
    step: float
    condition: float
    determinant: float


def jacobian_2d(handle, q, step=None, inverse=False):
    """Richardson-extrapolated central-difference Jacobian in the chart.

    The chart is the orthonormal tangent frame of the switching manifold
    at q (plain (x, y) for a planar manifold).
    """
    q = np.asarray(q, dtype=float)
    if q.shape == (2,):
        q = np.array([q[0], q[1], 0.0])
    chart = SigmaChart(handle.system, q)
    fn = handle.eval_inverse if inverse else handle.eval
    if step is None:
        step = 1e-3 * (1.0 + np.linalg.norm(q))

    def chart_map(u):
        return chart.project(fn(chart.embed(u)))

    def jac(h):
        cols = []
        for ax in range(2):
            e = np.zeros(2)
            e[ax] = h
            try:
                cols.append((chart_map(e) - chart_map(-e)) / (2 * h))
            except Exception as exc:   # noqa: BLE001 - stencil contract
                raise StencilFailure(f"stencil evaluation failed: {exc}") from exc
        return np.column_stack(cols)

    J1 = jac(step)
    J2 = jac(step / 2)
    J = (4.0 * J2 - J1) / 3.0
    det = float(np.linalg.det(J))
    cond = float(np.linalg.cond(J))
    return JacobianEstimate(J, step, cond, det)


# ---------------------------------------------------------------------------
# plane sections and the crossing section map
# ---------------------------------------------------------------------------

@dataclass
class SectionPlane:
    """Bounded transversal section: n . p = offset, within radius of center."""

    normal: np.ndarray
    offset: float
    center: np.ndarray = None
    radius: float = math.inf
    name: str = ""

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        self.normal = n / np.linalg.norm(n)
        if self.center is None:
            self.center = self.normal * self.offset
        else:
            self.center = np.asarray(self.center, dtype=float)

    def value(self, p):
        p = np.asarray(p, dtype=float)
        return p @ self.normal - self.offset

    def contains(self, p):
        if not np.isfinite(self.radius):
            return True
        d = np.asarray(p, dtype=float) - self.center
        d = d - np.dot(d, self.normal) * self.normal
        return bool(np.linalg.norm(d) <= self.radius)

    def same_plane(self, other, tol=1e-12):
        return (np.linalg.norm(self.normal - other.normal) < tol
                and abs(self.offset - other.offset) < tol)

    def chart(self):
        n = self.normal
        seed = np.zeros(3)
        seed[int(np.argmin(np.abs(n)))] = 1.0
        e1 = seed - np.dot(seed, n) * n
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(n, e1)
        return e1, e2


@dataclass
class SectionMapResult:
    point: np.ndarray
    flight_time: float
    crossings: list            # [(point, RegionLabel), ...] in flight order


def section_map(Z, plane_from, plane_to, p, cfg=DEFAULT_CFG,
                direction="forward", max_arcs=400):
    """Follow the crossing orbit from one transversal plane to the other.

    Every switching-manifold crossing en route is recorded with its
    region label; a sliding arrival aborts with ReachedSliding.
    """
    p = np.asarray(p, dtype=float)
    if plane_from.same_plane(plane_to) and abs(plane_to.value(p)) <= 1e-12:
        return SectionMapResult(p.copy(), 0.0, [])

    f = Z.switching
    sign = 1.0 if direction == "forward" else -1.0
    fval = float(f(p))
    if abs(fval) <= 100 * cfg.event_tol:
        xf, yf = (lie_derivative(Z.upper, f, p, 1),
                  lie_derivative(Z.lower, f, p, 1))
        label = classify_sigma_point(Z, p)
        if label in (RegionLabel.StableSliding, RegionLabel.UnstableSliding):
            raise ReachedSliding("section map started in a sliding region",
                                 point=p, label=label)
        going_up = (sign * xf) > 0
        side = "upper" if going_up else "lower"
        f_start_sign = 1.0 if going_up else -1.0
    else:
        side = "upper" if fval > 0 else "lower"
        f_start_sign = math.copysign(1.0, fval)

    crossings = []
    total_t = 0.0
    cur = p

    for _ in range(max_arcs):
        V = Z.upper if side == "upper" else Z.lower
        tval = float(plane_to.value(cur))
        if abs(tval) <= 100 * cfg.event_tol:
            drift = float(np.dot(V(cur), plane_to.normal)) * sign
            target_start = math.copysign(1.0, drift) if drift != 0 else 1.0
        else:
            target_start = math.copysign(1.0, tval)
        events = [_Event(lambda q: plane_to.value(q), "target",
                         start_sign=target_start),
                  _Event(lambda q: f(q), "sigma", start_sign=f_start_sign)]
        for g in Z.aux_switchings:
            gval = float(g(cur))
            ss = math.copysign(1.0, gval) if abs(gval) > 100 * cfg.event_tol else None
            if ss is None:
                gdot = float(np.dot(
                    np.asarray(g.gradient(cur), dtype=float), V(cur))) * sign
                ss = math.copysign(1.0, gdot) if gdot != 0 else 1.0
            events.append(_Event((lambda gg: lambda q: gg(q))(g),
                                 f"aux{id(g)}", start_sign=ss, kind="restart"))

        out = _flight(V, cur, sign, events, cfg, Z.box)
        if out.status == "left_box":
            raise LeftBox("orbit left the working box before the target section",
                          point=out.point, time=total_t + out.t)
        if out.status == "timeout":
            raise NoReturn("flight budget exhausted before the target section")
        total_t += out.t
        cur = out.point
        if out.event == "target":
            return SectionMapResult(cur, sign * total_t, crossings)
        if out.event == "sigma":
            label = classify_sigma_point(Z, cur)
            if label in (RegionLabel.StableSliding, RegionLabel.UnstableSliding):
                raise ReachedSliding("orbit reached a sliding region",
                                     point=cur, label=label)
            crossings.append((cur.copy(), label))
            side = "lower" if side == "upper" else "upper"
            f_start_sign = 1.0 if side == "upper" else -1.0
        # aux restart: loop continues with the same side from cur
    raise NoReturn(f"more than {max_arcs} arcs before reaching the target section")


def flow_to_plane(Z, side, q, plane, cfg=DEFAULT_CFG):
    """First hit of a plane along one one-sided arc from a Σ-point.

    Returns None if the arc returns to the switching manifold first.
    The hit must be transverse (|field . normal| above tolerance).
    """
    from .errors import NotTransverse
    q = np.asarray(q, dtype=float)
    V = Z.upper if side == "upper" else Z.lower
    f = Z.switching
    lie = lie_derivative(V, f, q, 1)
    if abs(lie) <= tangency_tol(np.linalg.norm(V(q))):
        return None
    want_positive = (side == "upper")
    sign = 1.0 if (lie > 0) == want_positive else -1.0

    pval = float(plane.value(q))
    if abs(pval) <= 100 * cfg.event_tol:
        drift = sign * float(np.dot(V(q), plane.normal))
        p_start = math.copysign(1.0, drift) if drift != 0 else 1.0
    else:
        p_start = math.copysign(1.0, pval)

    events = [_Event(lambda p: plane.value(p), "plane", start_sign=p_start),
              _Event(lambda p: f(p), "sigma",
                     start_sign=1.0 if side == "upper" else -1.0)]
    for g in Z.aux_switchings:
        gval = float(g(q))
        ss = math.copysign(1.0, gval) if abs(gval) > 100 * cfg.event_tol else 1.0
        events.append(_Event((lambda gg: lambda p: gg(p))(g),
                             f"aux{id(g)}", start_sign=ss, kind="restart"))

    cur = q
    for _ in range(16):
        out = _flight(V, cur, sign, events, cfg, Z.box)
        if out.status != "event":
            return None
        if out.event == "plane":
            hit = out.point
            if abs(np.dot(V(hit), plane.normal)) < 1e-8:
                raise NotTransverse("orbit meets the section tangentially")
            return hit
        if out.event == "sigma":
            return None
        cur = out.point
        for ev in events:
            v_end = float(ev.fn(cur))
            if abs(v_end) <= 100 * cfg.event_tol:
                ev.start_sign = -ev.prev_sign if ev.name == out.event else ev.prev_sign
            else:
                ev.start_sign = math.copysign(1.0, v_end)
    return None
