"""Concavity diagnostics on grid fields.

Midpoint checks enumerate every pair of band nodes whose midpoint is itself a
lattice node in the band and evaluate ``T(u(x)) + T(u(y)) - 2 T(u(mid))``
for a transform ``T`` (identity, log, or a power). Nonpositive everywhere is
midpoint concavity of ``T(u)``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from .eigen import BAND_CELLS, EigenResult, band_mask
from .flow import FlowTrace
from .grid import Field, Grid
from .matrix_ops import InputDomainError

TOL_GEOM = 1e-8


class ConcavityPreconditionError(InputDomainError):
    """The initial datum of an audit is not concave under the transform."""


@dataclass(frozen=True)
class Transform:
    """``kind`` is ``identity``, ``log`` or ``power`` (with exponent ``q``)."""

    kind: str = "identity"
    q: float = 1.0

    def __post_init__(self):
        if self.kind not in ("identity", "log", "power"):
            raise InputDomainError(f"unknown transform {self.kind!r}")
        if self.kind == "power" and not self.q > 0:
            raise InputDomainError(f"power transform needs q > 0, got {self.q}")

    def __call__(self, values: np.ndarray, nodes: np.ndarray | None = None, grid: Grid | None = None):
        v = np.asarray(values, dtype=float)
        if self.kind == "identity":
            return v.copy()
        bad = v <= 0 if self.kind == "log" else v < 0
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            node = int(nodes[i]) if nodes is not None else i
            where = f" {grid.points[node]}" if grid is not None else ""
            raise InputDomainError(
                f"{self.kind} transform undefined at node {node}{where}: value {v[i]}")
        if self.kind == "log":
            return np.log(v)
        return v ** self.q

    def label(self) -> str:
        return self.kind if self.kind != "power" else f"power({self.q:g})"


LOG = Transform("log")
IDENTITY = Transform("identity")


@dataclass
class ConcavityReport:
    transform: str
    band_cells: float
    worst: float
    worst_triple: Optional[tuple]
    count: int
    tol: float
    sup_transformed: float
    max_hessian_eig: float = float("nan")
    c1: Optional[float] = None
    top: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.worst <= self.tol

    def to_json(self) -> dict:
        d = {k: getattr(self, k) for k in ("transform", "band_cells", "worst", "count", "tol",
                                           "sup_transformed", "max_hessian_eig", "c1")}
        d["worst_triple"] = [list(map(float, p)) for p in self.worst_triple] if self.worst_triple else None
        d["ok"] = self.ok
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    def write_top_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["value", "x", "y", "mid"])
            for val, x, y, mid in self.top:
                w.writerow([repr(val), " ".join(map(repr, x)), " ".join(map(repr, y)),
                            " ".join(map(repr, mid))])


@njit(cache=True)
def _midpoint_scan(lat, vals, lookup, shape1, in_band, ntop):
    # lat: (nb, dim) lattice indices of band nodes; lookup: flat lattice -> band slot or -1
    nb, dim = lat.shape
    worst = -np.inf
    wi = wj = wm = -1
    count = 0
    top_v = np.full(ntop, -np.inf)
    top_i = np.full((ntop, 3), -1, dtype=np.int64)
    top_min = 0
    for i in range(nb):
        for j in range(i + 1, nb):
            even = True
            for a in range(dim):
                if (lat[i, a] + lat[j, a]) % 2 != 0:
                    even = False
                    break
            if not even:
                continue
            if dim == 1:
                flat = (lat[i, 0] + lat[j, 0]) // 2
            else:
                flat = ((lat[i, 0] + lat[j, 0]) // 2) * shape1 + (lat[i, 1] + lat[j, 1]) // 2
            mid = lookup[flat]
            if mid < 0 or not in_band[mid]:
                continue
            count += 1
            val = vals[i] + vals[j] - 2.0 * vals[mid]
            if val > worst:
                worst = val
                wi, wj, wm = i, j, mid
            if ntop > 0 and val > top_v[top_min]:
                top_v[top_min] = val
                top_i[top_min, 0] = i
                top_i[top_min, 1] = j
                top_i[top_min, 2] = mid
                top_min = 0
                for q in range(1, ntop):
                    if top_v[q] < top_v[top_min]:
                        top_min = q
    return worst, wi, wj, wm, count, top_v, top_i


def _band(u: Field, band_cells: float):
    g = u.grid
    mask = band_mask(g, band_cells)
    nodes = np.flatnonzero(mask)
    return g, nodes


def midpoint_concavity(u: Field, transform: Transform = IDENTITY, band_cells: float = BAND_CELLS,
                       ntop: int = 0, tol_rel: float = TOL_GEOM) -> ConcavityReport:
    """Worst midpoint second difference of ``transform(u)`` over band triples."""
    g, nodes = _band(u, band_cells)
    if len(nodes) == 0:
        raise InputDomainError(f"band of {band_cells} cells is empty on {g!r}")
    tv = transform(u.values[nodes], nodes, g)
    lat = np.ascontiguousarray(g.lattice_index[nodes])
    lookup = np.full(int(np.prod(g.shape)), -1, dtype=np.int64)
    flat = lat[:, 0] * (g.shape[1] if g.dim == 2 else 1) + (lat[:, 1] if g.dim == 2 else 0)
    lookup[flat] = np.arange(len(nodes))
    in_band = np.ones(len(nodes), dtype=np.bool_)
    shape1 = g.shape[1] if g.dim == 2 else 1
    worst, i, j, mid, count, top_v, top_i = _midpoint_scan(lat, tv, lookup, shape1, in_band, ntop)
    sup = float(np.max(np.abs(tv)))
    triple = None
    if count:
        triple = (g.points[nodes[i]], g.points[nodes[j]], g.points[nodes[mid]])
    top = []
    for q in np.argsort(-top_v):
        if np.isfinite(top_v[q]):
            a, b, c = (nodes[top_i[q, r]] for r in range(3))
            top.append((float(top_v[q]), g.points[a], g.points[b], g.points[c]))
    return ConcavityReport(transform.label(), band_cells, float(worst) if count else -math.inf,
                           triple, int(count), tol_rel * sup, sup, top=top)


def _hessian_max_eig(g: Grid, vals: np.ndarray, nodes: np.ndarray):
    """Largest eigenvalue of the discrete Hessian at each node (nan if a neighbour is missing)."""
    h = g.h
    out = np.full(len(nodes), np.nan)
    lat = g.lattice_index[nodes]
    interior = np.zeros(g.n_nodes, dtype=bool)
    interior[: g.n_interior] = True

    def nb(offset):
        ij = lat + np.asarray(offset)
        inside = np.all((ij >= 0) & (ij < np.array(g.shape)), axis=1)
        idx = np.full(len(nodes), -1, dtype=np.int64)
        idx[inside] = g.node_at[tuple(ij[inside].T)]
        ok = idx >= 0
        ok[ok] &= interior[idx[ok]]
        return idx, ok

    c = vals[nodes]
    if g.dim == 1:
        (p, okp), (m, okm) = nb((1,)), nb((-1,))
        ok = okp & okm
        out[ok] = (vals[p[ok]] - 2 * c[ok] + vals[m[ok]]) / h ** 2
        return out
    offs = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1)]
    found = [nb(o) for o in offs]
    ok = np.logical_and.reduce([f[1] for f in found])
    v = [np.where(ok, vals[np.where(f[1], f[0], 0)], 0.0) for f in found]
    d11 = (v[0] - 2 * c + v[1]) / h ** 2
    d22 = (v[2] - 2 * c + v[3]) / h ** 2
    sp = v[4] - 2 * c + v[5]
    sm = v[6] - 2 * c + v[7]
    d12 = (sp - sm) / (4 * h ** 2)
    lam = 0.5 * (d11 + d22) + np.hypot(0.5 * (d11 - d22), d12)
    out[ok] = lam[ok]
    return out


def hessian_bound(u: Field, transform: Transform = LOG, band_cells: float = BAND_CELLS):
    """``(max eigenvalue of the discrete Hessian of T(u) over the band, c1)``.

    ``c1`` is minus that eigenvalue when it is negative, else ``None``.
    """
    g, nodes = _band(u, band_cells)
    if len(nodes) == 0:
        raise InputDomainError(f"band of {band_cells} cells is empty on {g!r}")
    # transform every interior node so stencil neighbours outside the band are available
    vals = np.full(g.n_nodes, np.nan)
    inner = np.arange(g.n_interior)
    vals[inner] = transform(u.values[inner], inner, g)
    eig = _hessian_max_eig(g, vals, nodes)
    if np.all(np.isnan(eig)):
        raise InputDomainError("no band node has a complete Hessian stencil")
    top = float(np.nanmax(eig))
    return top, (-top if top < 0 else None)


@dataclass
class AuditEntry:
    t: float
    worst: float
    tol: float

    @property
    def ok(self) -> bool:
        return self.worst <= self.tol


def default_transform(m: float) -> Transform:
    """Log for m = 1; ``u^((m-1)/2)`` (square root of the pressure, up to a constant) for m > 1."""
    return LOG if m == 1 else Transform("power", (m - 1) / 2)


def preservation_audit(trace: FlowTrace, transform: Transform | None = None,
                       band_cells: float = BAND_CELLS, schedule=None) -> list:
    """Midpoint concavity of ``T(u(t))`` at each scheduled snapshot.

    Refuses with :class:`ConcavityPreconditionError` when the initial datum
    fails the same check.
    """
    if transform is None:
        transform = default_transform(trace.config.m)
    idx = range(len(trace)) if schedule is None else schedule
    entries = []
    first = True
    for i in idx:
        rep = midpoint_concavity(trace.u(i), transform, band_cells)
        if first:
            if not rep.ok:
                raise ConcavityPreconditionError(
                    f"initial datum not concave under {transform.label()}: worst {rep.worst:.3g} "
                    f"at {rep.worst_triple}")
            first = False
        entries.append(AuditEntry(trace.snapshots[i].t, rep.worst, rep.tol))
    return entries


@dataclass
class ProbeResult:
    t0: Optional[float]
    index: Optional[int]
    c1: float
    eps: float
    max_eigs: list

    @property
    def reached(self) -> bool:
        return self.index is not None

    @property
    def closest_margin(self) -> float:
        """Smallest ``-(c1-eps) - max_eig`` seen (positive means the bound held)."""
        thr = -(self.c1 - self.eps)
        return float(np.nanmax([thr - e for e in self.max_eigs]))


def _probe_field(trace: FlowTrace, i: int, m: float) -> Field:
    u = trace.u(i)
    if m == 1:
        return u
    t = trace.snapshots[i].t
    return Field(u.grid, np.sqrt(t * m / (m - 1) * np.maximum(u.values, 0) ** (m - 1)))


def eventual_concavity_probe(trace: FlowTrace, eigen: EigenResult, eps: float,
                             band_cells: float = BAND_CELLS) -> ProbeResult:
    """Earliest snapshot from which ``D^2 T(u) <= -(c1 - eps) I`` holds to the end.

    ``T`` is log for the linear mode and ``sqrt(t v)`` (``v`` the pressure)
    for the sublinear mode; ``c1`` comes from the same quantity on the
    eigen profile.
    """
    m = eigen.m
    if eigen.mode == "linear":
        c_top, _ = hessian_bound(eigen.profile, LOG, band_cells)
        tf = LOG
    else:
        prof = Field(eigen.profile.grid, np.sqrt(m / (m - 1) * eigen.profile.values ** (m - 1)))
        c_top, _ = hessian_bound(prof, IDENTITY, band_cells)
        tf = IDENTITY
    c1 = -c_top
    thr = -(c1 - eps)
    eigs = []
    for i in range(len(trace)):
        fld = _probe_field(trace, i, m)
        try:
            top, _ = hessian_bound(fld, tf, band_cells)
        except InputDomainError:
            top = math.inf
        eigs.append(top)
    holds = [e <= thr for e in eigs]
    index = None
    for i in range(len(holds) - 1, -1, -1):
        if holds[i]:
            index = i
        else:
            break
    t0 = trace.snapshots[index].t if index is not None else None
    return ProbeResult(t0, index, c1, eps, eigs)
