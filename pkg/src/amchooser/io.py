"""Plain-text artifacts: CSV surfaces, boundary curves, region masks, manifests.

Floats are written with 17 significant digits so a file round-trips to the
exact binary value and identical runs produce identical bytes.
"""

from __future__ import annotations

import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .vanilla import FreeBoundaryCurve

FLOAT_FMT = ".17g"


def fmt_float(v: float) -> str:
    v = float(v)
    if math.isnan(v):
        return "nan"
    return format(v, FLOAT_FMT)


def atomic_write(path, text: str) -> Path:
    """Write ``text`` to a sibling temp file, then rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _rows(header: list[str], rows) -> str:
    out = [",".join(header)]
    out.extend(",".join(r) for r in rows)
    return "\n".join(out) + "\n"


def surface_csv(values: np.ndarray, xs: np.ndarray, tau: np.ndarray) -> str:
    """Header ``tau,x_0,...,x_{M+1}``; then one row per level starting with its ``tau``."""
    header = ["tau"] + [fmt_float(x) for x in xs]
    rows = ([fmt_float(t)] + [fmt_float(v) for v in row] for t, row in zip(tau, values))
    return _rows(header, rows)


def boundary_csv(curve: FreeBoundaryCurve) -> str:
    """Columns ``tau,x,kind``; absent entries have ``x = nan``."""
    kind = curve.kind.value
    rows = ([fmt_float(t), fmt_float(x), kind] for t, x in zip(curve.tau, curve.x))
    return _rows(["tau", "x", "kind"], rows)


def regions_csv(labels: np.ndarray, xs: np.ndarray, tau: np.ndarray) -> str:
    """Long format ``tau,x,label`` with labels 0 continuation, 1 put, 2 call."""
    xs_s = [fmt_float(x) for x in xs]
    rows = (
        (ts, xs_s[i], str(int(lab)))
        for ts, row in zip((fmt_float(t) for t in tau), labels)
        for i, lab in enumerate(row)
    )
    return _rows(["tau", "x", "label"], rows)


def table_csv(header: list[str], rows) -> str:
    """Generic table; floats get the fixed format, everything else ``str``."""
    def cell(v):
        if isinstance(v, (float, np.floating)):
            return fmt_float(v)
        return str(v)
    return _rows(header, ([cell(v) for v in r] for r in rows))


def read_surface_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Inverse of :func:`surface_csv`: ``(values, xs, tau)``."""
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("tau,"):
        raise ValueError(f"{path}: not a surface CSV")
    xs = np.array([float(v) for v in lines[0].split(",")[1:]])
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:] if ln], ndmin=2)
    return data[:, 1:], xs, data[:, 0]


def read_boundary_csv(path) -> tuple[np.ndarray, np.ndarray, str]:
    """Inverse of :func:`boundary_csv`: ``(tau, x, kind)``."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != "tau,x,kind":
        raise ValueError(f"{path}: not a boundary CSV")
    tau, x, kinds = [], [], set()
    for ln in lines[1:]:
        t, v, k = ln.split(",")
        tau.append(float(t))
        x.append(float(v))
        kinds.add(k)
    return np.array(tau), np.array(x), kinds.pop() if len(kinds) == 1 else ""


def manifest_text(entries: dict) -> str:
    """Flat ``key = value`` lines in insertion order."""
    lines = []
    for key, val in entries.items():
        if isinstance(val, (float, np.floating)):
            val = fmt_float(val)
        lines.append(f"{key} = {val}")
    return "\n".join(lines) + "\n"


def read_manifest(path) -> dict:
    out = {}
    for ln in Path(path).read_text().splitlines():
        if " = " in ln:
            k, v = ln.split(" = ", 1)
            out[k] = v
    return out
