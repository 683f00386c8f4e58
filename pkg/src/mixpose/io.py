"""Plain-text artifacts: CSV (canonical, diffable) and 16-bit PGM previews.

Every CSV starts with ``# key=value`` comment lines describing the grid or
configuration it came from, so files are self-describing. Floats are written
with ``repr`` so they round-trip exactly and repeated runs are byte-identical.
"""

from __future__ import annotations

import csv
import math
import os
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .density import GridSpec, MeasurementDensity
from .geometry import Pose6D
from .objective import ObjectiveMap

PGM_MAX = 65535


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _join(values) -> str:
    return ",".join(fmt(v) for v in values)


def header_lines(meta: Mapping[str, object] | None) -> list[str]:
    out = []
    for k, v in (meta or {}).items():
        text = _join(v) if isinstance(v, (tuple, list)) else fmt(v)
        if "\n" in text:
            raise ValueError(f"header value for {k!r} spans lines")
        out.append(f"# {k}={text}\n")
    return out


def read_header(path) -> dict[str, str]:
    meta = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("# "):
                break
            key, _, value = line[2:].rstrip("\n").partition("=")
            meta[key] = value
    return meta


def _open_w(path):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", encoding="utf-8", newline="")


# -- measurement densities -------------------------------------------------

def write_density_csv(d: MeasurementDensity, path, meta: Mapping[str, object] | None = None) -> None:
    """One row per grid line of the first axis (one value per row in 1D)."""
    g = d.grid
    head = {"kind": "measurement_density", "dim": g.dim, "origin": g.origin,
            "spacing": g.spacing, "counts": g.counts, "normalization": d.normalization}
    head.update(meta or {})
    with _open_w(path) as fh:
        fh.writelines(header_lines(head))
        w = csv.writer(fh, lineterminator="\n")
        rows = d.values[:, None] if g.dim == 1 else d.values
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_density_csv(path) -> MeasurementDensity:
    meta = read_header(path)
    if meta.get("kind") != "measurement_density":
        raise ValueError(f"{path} is not a measurement density file")

    def floats(key):
        return tuple(float(v) for v in meta[key].split(","))

    grid = GridSpec(floats("origin"), floats("spacing"), tuple(int(v) for v in meta["counts"].split(",")))
    values = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    values = values.reshape(grid.counts)
    return MeasurementDensity(grid, values, float(meta.get("normalization", 1.0)))


def write_pgm(values, path) -> None:
    """Binary 16-bit PGM scaled so the maximum maps to white; rows follow the first axis."""
    v = np.asarray(values, dtype=float)
    if v.ndim == 1:
        v = v[None, :]
    if v.ndim != 2:
        raise ValueError("PGM output needs a 1D or 2D array")
    top = float(v.max())
    scaled = np.zeros(v.shape) if not top > 0 else np.clip(v, 0.0, None) / top
    pix = np.round(scaled * PGM_MAX).astype(">u2")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{v.shape[1]} {v.shape[0]}\n{PGM_MAX}\n".encode("ascii"))
        fh.write(pix.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError(f"{path} is not a binary PGM")
    width, height, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    dtype = ">u2" if maxval > 255 else "u1"
    return np.frombuffer(parts[4], dtype=dtype).reshape(height, width)


# -- objective maps --------------------------------------------------------

def write_map(m: ObjectiveMap, out_dir, meta: Mapping[str, object] | None = None,
              stem: str = "map", rel: float = 0.8) -> dict[str, Path]:
    """Write ``<stem>.csv``, ``<stem>.pgm`` and the ``<stem>_argmax.txt`` sidecar.

    The CSV's first row lists the ``w`` values; each further row starts with
    its ``phi`` value.
    """
    out = Path(out_dir)
    paths = {"csv": out / f"{stem}.csv", "pgm": out / f"{stem}.pgm", "argmax": out / f"{stem}_argmax.txt"}
    head = {"kind": "objective_map", "phi_count": len(m.phis), "w_count": len(m.ws)}
    head.update(meta or {})
    with _open_w(paths["csv"]) as fh:
        fh.writelines(header_lines(head))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["phi\\w"] + [fmt(x) for x in m.ws])
        for phi, row in zip(m.phis, m.values):
            w.writerow([fmt(phi)] + [fmt(v) for v in row])
    write_pgm(m.values, paths["pgm"])
    i, j = m.argmax
    maxima = m.local_maxima(rel)
    with _open_w(paths["argmax"]) as fh:
        fh.writelines(header_lines(meta))
        fh.write(f"argmax_phi={fmt(m.phis[i])}\n")
        fh.write(f"argmax_w={fmt(m.ws[j])}\n")
        fh.write(f"argmax_index={i},{j}\n")
        fh.write(f"max_value={fmt(m.values[i, j])}\n")
        fh.write(f"cell={_join(m.cell)}\n")
        fh.write(f"local_maxima_above_{fmt(rel)}={len(maxima)}\n")
        for a, b in maxima:
            fh.write(f"local_maximum={fmt(m.phis[a])},{fmt(m.ws[b])},{fmt(m.values[a, b])}\n")
    return paths


def read_map_csv(path) -> ObjectiveMap:
    with open(path, encoding="utf-8") as fh:
        rows = np.array([r for r in csv.reader(ln for ln in fh if not ln.startswith("#"))])
    ws = rows[0, 1:].astype(float)
    phis = rows[1:, 0].astype(float)
    return ObjectiveMap(phis, ws, rows[1:, 1:].astype(float))


# -- estimation records ----------------------------------------------------

def _pose_columns(prefix: str) -> list[str]:
    return [f"{prefix}_phi{k}" for k in (1, 2, 3)] + [f"{prefix}_w{k}" for k in (1, 2, 3)]


ESTIMATE_COLUMNS = (["run", "seed"] + _pose_columns("true") + _pose_columns("start")
                    + _pose_columns("est") + ["objective", "iterations", "converged", "error"])


def estimate_row(run: int, seed: int, truth: Pose6D, start: Pose6D, estimate: Pose6D,
                 value: float, iterations: int, converged: bool, error: str | None = None) -> list[str]:
    cells = [run, seed, *truth.to_vector(), *start.to_vector(), *estimate.to_vector(),
             value, iterations, converged, error or ""]
    return [fmt(c) for c in cells]


def write_estimates(rows: Iterable[list[str]], path, meta: Mapping[str, object] | None = None) -> None:
    with _open_w(path) as fh:
        fh.writelines(header_lines(meta))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ESTIMATE_COLUMNS)
        w.writerows(rows)


def read_estimates(path) -> list[dict[str, str]]:
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


# -- study tables ----------------------------------------------------------

RMS_NAMES = ["phi1", "phi2", "phi3", "w1", "w2", "w3"]
TABLE_COLUMNS = (["system", "scenario", "M", "R"] + [f"rms_{n}" for n in RMS_NAMES]
                 + [f"rms_{n}_deg" for n in RMS_NAMES[:3]] + ["failures", "nonconverged"])


def study_table_row(result) -> list[str]:
    deg = [math.degrees(v) for v in result.rms[:3]]
    cells = [result.system, result.scenario, result.M, result.R, *result.rms, *deg,
             result.failures, result.nonconverged]
    return [fmt(c) for c in cells]


def write_study(results, out_dir, meta: Mapping[str, object] | None = None) -> dict[str, Path]:
    """Table of RMS rows (one per system and scenario) plus all per-run records."""
    results = list(results)
    out = Path(out_dir)
    paths = {"table": out / "study_table.csv", "runs": out / "study_runs.csv"}
    with _open_w(paths["table"]) as fh:
        fh.writelines(header_lines(meta))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TABLE_COLUMNS)
        for r in results:
            w.writerow(study_table_row(r))
    rows = []
    for r in results:
        for rec in r.records:
            rows.append(estimate_row(rec.run, rec.seed, rec.true_pose, rec.start_pose, rec.estimate,
                                     rec.objective_value, rec.iterations, rec.converged, rec.error))
    write_estimates(rows, paths["runs"], meta)
    return paths


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    if not os.access(p, os.W_OK):
        raise PermissionError(f"output directory {p} is not writable")
    return p
