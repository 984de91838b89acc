"""Deterministic artifact writers.

Every float is printed with 17 significant digits so that identical runs
produce byte-identical files; JSON keys are emitted in sorted order by a
small canonical emitter (the stdlib encoder delegates float formatting to
repr, which is shortest-round-trip rather than fixed-width).
"""

from __future__ import annotations

import numpy as np


def fmt(x):
    """Canonical float text: 17 significant digits."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _emit(obj, out):
    if obj is None:
        out.append("null")
    elif isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(fmt(obj))
    elif isinstance(obj, str):
        out.append('"' + obj.replace("\\", "\\\\").replace('"', '\\"') + '"')
    elif isinstance(obj, dict):
        out.append("{")
        first = True
        for k in sorted(obj, key=str):
            if not first:
                out.append(",")
            first = False
            _emit(str(k), out)
            out.append(":")
            _emit(obj[k], out)
        out.append("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        out.append("[")
        first = True
        for v in (obj.tolist() if isinstance(obj, np.ndarray) else obj):
            if not first:
                out.append(",")
            first = False
            _emit(v, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj)}")


def canonical_json(obj):
    out = []
    _emit(obj, out)
    return "".join(out)


def write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(canonical_json(obj))
        fh.write("\n")


def write_csv(path, header, rows):
    """Rows of numbers/strings; floats canonicalized."""
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = []
            for v in row:
                if isinstance(v, str):
                    cells.append(v)
                else:
                    cells.append(fmt(v))
            fh.write(",".join(cells) + "\n")


def write_curve_csv(path, points, tags=None, extra_name="tag"):
    """Polyline CSV with columns s, x, y, z, tag."""
    from . import geom
    P = np.asarray(points, dtype=float)
    arc = geom.arclengths(P)
    rows = []
    for i, p in enumerate(P):
        tag = tags[i] if tags is not None else ""
        rows.append([arc[i], p[0], p[1], p[2], tag])
    write_csv(path, ["s", "x", "y", "z", extra_name], rows)


def gnuplot_blocks(path, blocks):
    """Whitespace-separated data blocks, one per tagged object.

    blocks: list of (name, (n, k) array); blocks are separated by blank
    lines and preceded by a comment line carrying the name.
    """
    with open(path, "w") as fh:
        for name, arr in blocks:
            fh.write(f"# {name}\n")
            for row in np.asarray(arr, dtype=float):
                fh.write(" ".join(fmt(v) for v in row) + "\n")
            fh.write("\n")
