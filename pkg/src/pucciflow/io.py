"""CSV and JSON export of fields, traces, eigen results and reports."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .grid import Field, Grid, build_grid, domain_from_descriptor
from .matrix_ops import InputDomainError


def _header(dim: int):
    return ["x", "value"] if dim == 1 else ["x", "y", "value"]


def write_field_csv(u: Field, path) -> None:
    """One row per node: coordinates then value, floats written with ``repr``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_header(u.grid.dim))
        for p, v in zip(u.grid.points, u.values):
            w.writerow([repr(float(c)) for c in p] + [repr(float(v))])


def read_field_csv(grid: Grid, path) -> Field:
    """Read a field written by :func:`write_field_csv` onto ``grid`` (same node order)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if rows[0] != _header(grid.dim):
        raise InputDomainError(f"{path}: header {rows[0]} does not match a {grid.dim}D field")
    body = rows[1:]
    if len(body) != grid.n_nodes:
        raise InputDomainError(f"{path}: {len(body)} rows for a grid with {grid.n_nodes} nodes")
    pts = np.array([[float(c) for c in r[:-1]] for r in body])
    if not np.array_equal(pts, grid.points):
        k = int(np.flatnonzero(np.any(pts != grid.points, axis=1))[0])
        raise InputDomainError(f"{path}: row {k + 2} coordinates {pts[k]} differ from node {grid.points[k]}")
    return Field(grid, np.array([float(r[-1]) for r in body]))


def field_to_json(u: Field) -> dict:
    return {"grid": u.grid.metadata(), "values": [float(v) for v in u.values],
            "meta": {k: v for k, v in u.meta.items() if isinstance(v, (int, float, str, bool))}}


def field_from_json(d: dict) -> Field:
    g = d["grid"]
    grid = build_grid(domain_from_descriptor(g["domain"]), g["h"])
    return Field(grid, np.array(d["values"], dtype=float), dict(d.get("meta", {})))


def _dump(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, default=_default))


def _default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, float):
        return x
    return str(x)


def write_trace(trace, directory, extra: dict | None = None) -> Path:
    """Snapshot CSVs (``u`` and, for m > 1, ``w``) plus ``manifest.json``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    rows = []
    for i, s in enumerate(trace.snapshots):
        name = f"snapshot_{i:05d}.csv"
        write_field_csv(trace.u(i), d / name)
        entry = {"index": i, "t": s.t, "sup": s.sup, "steps": s.steps, "u": name,
                 "boundary_slopes": s.slopes}
        if s.w is not None:
            wname = f"snapshot_{i:05d}_w.csv"
            write_field_csv(trace.w(i), d / wname)
            entry["w"] = wname
        rows.append(entry)
    man = {"config": trace.config.echo(), "grid": trace.grid.metadata(), "snapshots": rows}
    if extra:
        man.update(extra)
    _dump(man, d / "manifest.json")
    with open(d / "norms.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "sup", "steps"])
        for s in trace.snapshots:
            w.writerow([repr(s.t), repr(s.sup), s.steps])
    return d


def write_eigen(result, directory) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    _dump(result.to_json(), d / "eigen.json")
    write_field_csv(result.profile, d / "profile.csv")
    return d


def write_report(report, path) -> None:
    """Any object with ``to_json()``, or a plain dict."""
    _dump(report.to_json() if hasattr(report, "to_json") else report, path)
