"""Batch front-end: scenario configs in, CSV/JSON artifacts out.

Commands
--------
analyze    region atlas over the switching manifold + singularity reports
chain      cone/section circles, propagation, chain classification
horseshoe  certification pipeline on a synthetic fixture
plotdata   re-emit an artifact as gnuplot-ready data blocks

All artifacts are deterministic: a fixed config and seed reproduce them
byte for byte (timings are reported on stdout only, never in files).
Exit codes: 0 success, 2 bad config, 3 stage failure (report still
written).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import geom, manifolds, models, tsing
from .core import Box, PiecewiseSystem, ScalarField, SmoothField, \
    classify_sigma_point
from .errors import Ambiguous, ConfigError, Filippov3dError, NotCertified, \
    UnknownArtifact
from .fixtures import fixture_handle, fixture_system
from .integrate import EventIntegratorConfig, ReturnMapHandle, SectionPlane
from .poly import Poly3
from .serialize import fmt, gnuplot_blocks, write_csv, write_curve_csv, \
    write_json

SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class ScenarioConfig:
    model: str = None
    fields: dict = None              # polynomial coefficient tables
    box: list = None
    sections: list = None            # [{normal, offset, radius?}, ...]
    rtol: float = 1e-10
    atol: float = 1e-12
    grid_n: int = 40
    atlas_n: int = 64
    search_box: list = None
    trace_h: float = 8e-3
    manifold_arclength: float = 6.0
    fixture: str = "transverse"
    n_max: int = 8
    depth: int = 6
    cone_opening: float = 0.5
    exp_margin: float = 1.05
    con_margin: float = 0.95
    seed: int = 0
    out: str = "out"
    raw: dict = field(default_factory=dict)

    @staticmethod
    def load(path, out_override=None, seed_override=None):
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if raw.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
            raise ConfigError(
                f"unsupported schema_version {raw.get('schema_version')!r}")
        cfg = ScenarioConfig(raw=raw)
        for key in ("model", "fields", "box", "sections", "rtol", "atol",
                    "grid_n", "atlas_n", "search_box", "trace_h",
                    "manifold_arclength", "fixture", "n_max", "depth",
                    "cone_opening", "exp_margin", "con_margin", "seed",
                    "out"):
            if key in raw:
                setattr(cfg, key, raw[key])
        if out_override:
            cfg.out = out_override
        if seed_override is not None:
            cfg.seed = seed_override
        cfg.validate()
        return cfg

    def validate(self):
        if (self.model is None) == (self.fields is None):
            raise ConfigError(
                "exactly one of 'model' or 'fields' must be present")
        for name in ("rtol", "atol", "trace_h"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.box is not None:
            lo, hi = self.box
            if not all(h > l for l, h in zip(lo, hi)):
                raise ConfigError("box is empty")

    def integrator(self):
        return EventIntegratorConfig(rtol=self.rtol, atol=self.atol)

    def build_system(self):
        if self.model is not None:
            return models.model_system(self.model)
        return _system_from_tables(self.fields, self.box)


def _poly_from_records(records):
    table = {}
    for rec in records:
        powers = tuple(int(v) for v in rec["powers"])
        table[powers] = table.get(powers, 0.0) + float(rec["coeff"])
    return Poly3(table)


def _system_from_tables(fields, box):
    try:
        upper = tuple(_poly_from_records(c) for c in fields["upper"])
        lower = tuple(_poly_from_records(c) for c in fields["lower"])
        switching = _poly_from_records(fields["switching"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad polynomial field table: {exc}") from None

    def make_field(polys, name):
        def fn(p):
            return np.array([c(p) for c in polys])
        return SmoothField(fn, polys=polys, name=name)

    b = Box(tuple(box[0]), tuple(box[1])) if box else \
        Box((-10.0,) * 3, (10.0,) * 3)
    return PiecewiseSystem(make_field(upper, "X"), make_field(lower, "Y"),
                           ScalarField(poly=switching, name="f"), b,
                           meta={"model": "custom"})


# ---------------------------------------------------------------------------
# run reports
# ---------------------------------------------------------------------------

@dataclass
class RunReport:
    command: str
    stages: list = field(default_factory=list)     # (name, status)
    artifacts: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)    # stdout only, not written

    def stage(self, name, status):
        self.stages.append({"name": name, "status": status})

    def artifact(self, path):
        self.artifacts.append(str(path))

    def to_json_dict(self):
        return {"command": self.command, "stages": self.stages,
                "artifacts": self.artifacts, "warnings": self.warnings}

    @property
    def ok(self):
        return all(s["status"] == "ok" for s in self.stages)


def _write_report(report, outdir):
    path = Path(outdir) / "report.json"
    write_json(path, report.to_json_dict())
    report.artifact(path)
    return path


# ---------------------------------------------------------------------------
# cmd: analyze
# ---------------------------------------------------------------------------

def cmd_analyze(config):
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    report = RunReport("analyze")
    t0 = time.monotonic()
    Z = config.build_system()
    order = "upper_first"
    handle = ReturnMapHandle(Z, order=order, cfg=config.integrator(),
                             check_crossing=False)

    # region atlas on a deterministic grid over the chart
    sb = config.search_box or [[-3.0, -3.0], [3.0, 3.0]]
    (u0, v0), (u1, v1) = sb
    n = config.atlas_n
    rows = []
    for uu in np.linspace(u0, u1, n):
        for vv in np.linspace(v0, v1, n):
            p = _chart_embed(Z, uu, vv)
            label = classify_sigma_point(Z, p)
            rows.append([p[0], p[1], label.value])
    atlas = out / "region_atlas.csv"
    write_csv(atlas, ["x", "y", "region_label"], rows)
    report.artifact(atlas)
    report.stage("atlas", "ok")

    # switching-manifold singularities
    found = tsing.find_t_singularities(Z, sb, max(8, config.grid_n // 2))
    reports = []
    for p in found:
        try:
            rep = tsing.analyze_t_singularity(Z, p, handle,
                                              config.integrator())
            reports.append(rep.to_json_dict())
        except Filippov3dError as exc:
            report.warnings.append(f"analysis failed at {p.tolist()}: {exc}")
    tpath = out / "tsingularities.json"
    write_json(tpath, {"count": len(reports), "reports": reports})
    report.artifact(tpath)
    report.stage("tsingularities", "ok")
    report.timings["total"] = time.monotonic() - t0
    _write_report(report, out)
    return report


def _chart_embed(Z, u, v):
    from .core import SigmaChart
    chart = SigmaChart(Z, np.zeros(3))
    return chart.embed(np.array([u, v]))


# ---------------------------------------------------------------------------
# cmd: chain
# ---------------------------------------------------------------------------

PI_NORM = float(np.hypot(1.7, 1.0))


def _pi_plane(level=0.0, radius=np.inf):
    return SectionPlane(np.array([1.7, 1.0, 0.0]) / PI_NORM,
                        (2.5 + level) / PI_NORM, radius=radius,
                        name=f"Pi{level:+g}")


def cmd_chain(config):
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    report = RunReport("chain")
    t0 = time.monotonic()
    name = config.model or "custom"

    if name == "CrossZ0":
        _chain_cross(config, report, out, eps=None)
    elif name.startswith("Zeps:"):
        _chain_cross(config, report, out, eps=float(name.split(":")[1]))
    else:
        _chain_single(config, report, out)

    report.timings["total"] = time.monotonic() - t0
    _write_report(report, out)
    return report


def _chain_cross(config, report, out, eps):
    """Communication pipeline: the two-fold pair connected across the
    communication plane (sharp or mollified)."""
    cfg = config.integrator()
    h = config.trace_h
    if eps is None:
        Z1 = models.model_system("Z1")
        Z2 = models.model_system("Z2")
        h1 = ReturnMapHandle(Z1, order="upper_first", cfg=cfg,
                             check_crossing=False)
        h2 = ReturnMapHandle(Z2, order="upper_first", cfg=cfg,
                             check_crossing=False)
        rep1 = tsing.analyze_t_singularity(Z1, np.zeros(3), h1, cfg)
        rep2 = tsing.analyze_t_singularity(Z2, np.array([2.0, 2.0, 0.0]),
                                           h2, cfg)
        cu = manifolds.trace_cone_circle(Z1, rep1, "unstable", _pi_plane(),
                                         cfg, h_max=h)
        cs = manifolds.trace_cone_circle(Z2, rep2, "stable", _pi_plane(),
                                         cfg, h_max=h)
        chat = cu
        switching = Z1.switching
    else:
        Z = models.model_system(f"Zeps:{eps}")
        hd = ReturnMapHandle(Z, order="upper_first", cfg=cfg,
                             check_crossing=False)
        rep1 = tsing.analyze_t_singularity(Z, np.zeros(3), hd, cfg)
        rep2 = tsing.analyze_t_singularity(Z, np.array([2.0, 2.0, 0.0]),
                                           hd, cfg)
        cu = manifolds.trace_cone_circle(Z, rep1, "unstable",
                                         _pi_plane(-eps), cfg, h_max=h)
        # the mollified cone of the far singularity is only ray-traceable
        # deep inside its saturated zone; trace there and carry the circle
        # back to the zone boundary along the flow
        cs_mid = manifolds.trace_cone_circle(Z, rep2, "stable",
                                             _pi_plane(2.3), cfg, h_max=h)
        cs = manifolds.propagate_circle(Z, cs_mid, _pi_plane(+eps), cfg,
                                        h_max=h, direction="backward")
        chat = manifolds.propagate_circle(Z, cu, _pi_plane(+eps), cfg,
                                          h_max=h)
        switching = Z.switching
    report.stage("traces", "ok")

    for tag, tr in (("C_u", cu), ("C_s", cs), ("Chat_u", chat)):
        path = out / f"trace_{tag}.csv"
        write_curve_csv(path, tr.points, tr.arc_tags)
        report.artifact(path)

    try:
        chain = manifolds.classify_chain(chat, cs, switching)
        payload = chain.to_json_dict()
        report.stage("classify", "ok")
    except Ambiguous as exc:
        payload = {"kind": "Ambiguous", "detail": str(exc)}
        report.stage("classify", "ambiguous")

    if eps is not None and payload.get("kind") == "TransverseChains":
        pp = models.cone_intersection_point("upper")
        pm = models.cone_intersection_point("lower")
        for item in payload["intersections"]:
            p = np.array(item["point"])
            item["dist_to_p_plus"] = float(np.linalg.norm(p - pp))
            item["dist_to_p_minus"] = float(np.linalg.norm(p - pm))
        payload["epsilon"] = eps
    cpath = out / "chain.json"
    write_json(cpath, payload)
    report.artifact(cpath)


def _chain_single(config, report, out):
    """Single system: trace both cones, run the robustness conditions for
    a self-connection (they fail when no communication exists)."""
    cfg = config.integrator()
    Z = config.build_system()
    handle = ReturnMapHandle(Z, order="upper_first", cfg=cfg,
                             check_crossing=False)
    sb = config.search_box or [[-3.0, -3.0], [3.0, 3.0]]
    found = tsing.find_t_singularities(Z, sb, max(8, config.grid_n // 2))
    if not found:
        report.stage("tsingularities", "none found")
        write_json(out / "chain.json", {"kind": "NoChain",
                                        "reason": "no T-type singularity"})
        report.artifact(out / "chain.json")
        return
    p0 = found[0]
    rep = tsing.analyze_t_singularity(Z, p0, handle, cfg)
    report.stage("tsingularity", "ok" if rep.stable else "unstable")

    secs = config.sections
    if secs:
        planes = tuple(SectionPlane(np.array(s["normal"], dtype=float),
                                    float(s["offset"]),
                                    radius=float(s.get("radius", np.inf)))
                       for s in secs[:2])
    else:
        planes = _default_self_sections(Z, rep)
    cond = manifolds.check_tc_r(Z, p0, planes, cfg, handle=handle)
    cpath = out / "conditions.json"
    write_json(cpath, cond.to_json_dict())
    report.artifact(cpath)
    report.stage("conditions", "ok" if cond.overall else "failed")

    if cond.chain is not None:
        write_json(out / "chain.json", cond.chain.to_json_dict())
    else:
        write_json(out / "chain.json",
                   {"kind": "NoChain",
                    "reason": "robustness conditions not satisfied"})
    report.artifact(out / "chain.json")
    for tag in ("C_u", "C_s", "Chat_u"):
        tr = cond.circles.get(tag)
        if tr is not None:
            path = out / f"trace_{tag}.csv"
            write_curve_csv(path, tr.points, tr.arc_tags)
            report.artifact(path)


def _default_self_sections(Z, rep):
    """Section pair cutting the two cone traces of a single singularity.

    Each plane sits at distance 1/2 from the singular point on the side
    its cone's seed ray points into."""
    from .tsing import _branch_rays
    chart = rep.chart
    n = np.array([1.0, 1.0, 0.0]) / np.sqrt(2.0)
    planes = []
    for branch in ("unstable", "stable"):
        _, ray_a, _rb = _branch_rays(Z, rep, branch)
        probe = chart.embed(0.1 * ray_a)
        side = 1.0 if float(probe @ n) >= 0 else -1.0
        planes.append(SectionPlane(n, side * 0.5, radius=3.0,
                                   name=f"tau_{branch[0]}"))
    return tuple(planes)


# ---------------------------------------------------------------------------
# cmd: horseshoe
# ---------------------------------------------------------------------------

def cmd_horseshoe(config):
    from . import horseshoe as hs
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    report = RunReport("horseshoe")
    t0 = time.monotonic()

    try:
        cert, ctx = hs.certify_fixture_pipeline(
            config.fixture, N_max=config.n_max, depth=config.depth,
            cone_opening=config.cone_opening, exp_margin=config.exp_margin,
            con_margin=config.con_margin)
    except NotCertified as exc:
        report.stage("certify", "NotCertified")
        report.warnings.append(str(exc))
        write_json(out / "certificate.json",
                   {"certified": False, "reason": str(exc),
                    "diagnostics": _jsonable_diag(exc.diagnostics)})
        report.artifact(out / "certificate.json")
        report.timings["total"] = time.monotonic() - t0
        _write_report(report, out)
        return report

    report.stage("certify", "ok")
    cpath = out / "certificate.json"
    payload = cert.to_json_dict()
    payload["certified"] = True
    write_json(cpath, payload)
    report.artifact(cpath)

    lam_path = out / "lambda_samples.csv"
    write_csv(lam_path, ["word", "x", "y", "z"],
              [[w, p[0], p[1], p[2]]
               for w, p in zip(cert.lambda_words, cert.lambda_samples)])
    report.artifact(lam_path)

    rows = []
    for n in range(1, min(4, config.depth) + 1):
        for w in hs._all_words(n):
            word = "".join(w)
            pts, resid = hs.periodic_orbit_points(cert, word)
            for k, p in enumerate(pts):
                rows.append([word, k, p[0], p[1], p[2], resid])
    ppath = out / "periodic_orbits.csv"
    write_csv(ppath, ["word", "index", "x", "y", "z", "orbit_residual"], rows)
    report.artifact(ppath)
    report.stage("periodic_orbits", "ok")

    audits = hs.orbit_crossing_audit(ctx["system"], cert.lambda_samples, 1,
                                     handle=ctx["handle"])
    apath = out / "crossing_audit.json"
    write_json(apath, {"labels": [a.label for a in audits],
                       "all_crossing": all(a.label == "Crossing"
                                           for a in audits)})
    report.artifact(apath)
    report.stage("audit", "ok")
    report.timings["total"] = time.monotonic() - t0
    _write_report(report, out)
    return report


def _jsonable_diag(diag):
    try:
        from .serialize import canonical_json
        canonical_json(diag)
        return diag
    except TypeError:
        return {str(k): str(v) for k, v in (diag or {}).items()}


# ---------------------------------------------------------------------------
# cmd: plotdata
# ---------------------------------------------------------------------------

def cmd_plotdata(config, artifact):
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    report = RunReport("plotdata")
    src = Path(artifact)
    if not src.exists():
        raise UnknownArtifact(f"artifact not found: {artifact}")

    dest = out / (src.stem + ".dat")
    if src.suffix == ".csv":
        blocks = _blocks_from_csv(src)
    elif src.suffix == ".json":
        blocks = _blocks_from_json(src)
    else:
        raise UnknownArtifact(f"cannot plot artifact type {src.suffix!r}")
    gnuplot_blocks(dest, blocks)
    report.artifact(dest)
    report.stage("plotdata", "ok")
    _write_report(report, out)
    return report


def _blocks_from_csv(src):
    with open(src) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    tag_cols = [i for i, h in enumerate(header)
                if h in ("tag", "region_label", "word")]
    num_cols = [i for i in range(len(header)) if i not in tag_cols]
    if tag_cols:
        tcol = tag_cols[0]
        groups = {}
        for row in rows:
            groups.setdefault(row[tcol], []).append(
                [float(row[i]) for i in num_cols])
        return [(k, np.asarray(v)) for k, v in sorted(groups.items())]
    return [("data", np.asarray([[float(row[i]) for i in num_cols]
                                 for row in rows]))]


def _blocks_from_json(src):
    with open(src) as fh:
        data = json.load(fh)
    blocks = []
    if "patch_polygon" in data:
        blocks.append(("Q", np.asarray(data["patch_polygon"])))
        for name, poly in sorted(data.get("strips", {}).items()):
            blocks.append((name, np.asarray(poly)))
        if data.get("lambda_samples"):
            blocks.append(("Lambda", np.asarray(data["lambda_samples"])))
    elif "intersections" in data:
        pts = [it["point"] for it in data["intersections"]]
        if pts:
            blocks.append(("intersections", np.asarray(pts)))
    elif "reports" in data:
        pts = [r["location"] for r in data["reports"]]
        if pts:
            blocks.append(("tsingularities", np.asarray(pts)))
    if not blocks:
        raise UnknownArtifact(f"no plottable objects in {src}")
    return blocks


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="filippov3d",
        description="piecewise-smooth system analysis pipelines")
    parser.add_argument("command",
                        choices=["analyze", "chain", "horseshoe", "plotdata"])
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--artifact", default=None,
                        help="input artifact for plotdata")
    parser.add_argument("--verbose", action="store_true")
    args = parser.parse_args(argv)

    try:
        config = ScenarioConfig.load(args.config, out_override=args.out,
                                     seed_override=args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        if args.command == "analyze":
            report = cmd_analyze(config)
        elif args.command == "chain":
            report = cmd_chain(config)
        elif args.command == "horseshoe":
            report = cmd_horseshoe(config)
        else:
            if not args.artifact:
                print("plotdata requires --artifact", file=sys.stderr)
                return 2
            report = cmd_plotdata(config, args.artifact)
    except (ConfigError, UnknownArtifact) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Filippov3dError as exc:
        print(f"stage failure: {exc}", file=sys.stderr)
        return 3

    if args.verbose:
        for s in report.stages:
            print(f"{s['name']}: {s['status']}")
        for w in report.warnings:
            print(f"warning: {w}")
        for k, v in report.timings.items():
            print(f"timing {k}: {v:.2f}s")
    print(f"artifacts written to {config.out}")
    return 0 if report.ok else 3


if __name__ == "__main__":
    sys.exit(main())
