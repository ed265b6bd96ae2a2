"""Monotone wide-stencil discretisation of F(D^2 u).

In 2D a frame is an orthonormal pair of lattice directions. The available
frames, by angle from the x-axis, are::

    0       (1,0)  (0,1)
    18.43   (3,1)  (-1,3)
    26.57   (2,1)  (-1,2)
    33.69   (3,2)  (-2,3)
    45      (1,1)  (-1,1)
    56.31   (2,3)  (-3,2)
    63.43   (1,2)  (-2,1)
    71.57   (1,3)  (-3,1)

``K`` frames are the lattice frames closest to the angles ``i*pi/(2K)``;
K = 1, 2, 4, 8 give nested sets. Pucci values are the min (or max) over
available frames of ``sum_i c(delta_i) delta_i`` where ``delta_i`` is the
second difference along the i-th frame direction. A wide frame whose lattice
targets leave the closed domain is unavailable at that node; the axis frame,
with Shortley-Weller arms at cut cells, is always available.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .grid import Field, Grid
from .matrix_ops import ConfigurationError, InputDomainError, OperatorKind, SymMatrix, sym_eigvals


class StencilError(ConfigurationError):
    """A stencil direction leaves the lattice."""


_LATTICE_FRAMES = (
    ((1, 0), (0, 1)),
    ((3, 1), (-1, 3)),
    ((2, 1), (-1, 2)),
    ((3, 2), (-2, 3)),
    ((1, 1), (-1, 1)),
    ((2, 3), (-3, 2)),
    ((1, 2), (-2, 1)),
    ((1, 3), (-3, 1)),
)
_FRAME_ANGLES = tuple(math.atan2(f[0][1], f[0][0]) for f in _LATTICE_FRAMES)
_K_SUBSETS = {1: (0,), 2: (0, 4), 4: (0, 2, 4, 6), 8: tuple(range(8))}


@dataclass(frozen=True)
class StencilSet:
    """Direction frames of a stencil: ``frames[f]`` is a tuple of integer offsets."""

    dim: int
    frames: tuple

    @classmethod
    def build(cls, dim: int, K: int = 8) -> "StencilSet":
        if dim == 1:
            return cls(1, (((1,),),))
        if dim != 2:
            raise ConfigurationError(f"stencils exist for dim 1 and 2, got {dim}")
        if K not in _K_SUBSETS:
            raise ConfigurationError(f"frame count K must be one of {sorted(_K_SUBSETS)}, got {K}")
        return cls(2, tuple(_LATTICE_FRAMES[i] for i in _K_SUBSETS[K]))

    @property
    def K(self) -> int:
        return len(self.frames)

    @property
    def angles(self) -> tuple:
        if self.dim == 1:
            return (0.0,)
        return tuple(math.atan2(f[0][1], f[0][0]) for f in self.frames)

    @property
    def radius(self) -> int:
        return max(abs(c) for fr in self.frames for v in fr for c in v)

    def directions(self) -> list:
        return [v for fr in self.frames for v in fr]


class DiscreteOperator:
    """``F_h`` on a grid: compiled neighbour tables plus the operator kind."""

    def __init__(self, kind: OperatorKind, grid: Grid, stencils: StencilSet | None = None):
        if stencils is None:
            stencils = StencilSet.build(grid.dim)
        if stencils.dim != grid.dim:
            raise ConfigurationError(f"stencil dim {stencils.dim} != grid dim {grid.dim}")
        self.kind = kind
        self.grid = grid
        self.stencils = stencils
        self.dpf = grid.dim
        self._build_tables()
        self._build_operator_tables()

    # -- tables ----------------------------------------------------------------

    def _build_tables(self):
        g = self.grid
        n = g.n_interior
        dirs = self.stencils.directions()
        nd = len(dirs)
        nf = self.stencils.K
        nbp = np.tile(np.arange(n)[:, None], (1, nd))
        nbm = nbp.copy()
        wp = np.zeros((n, nd))
        wm = np.zeros((n, nd))
        wc = np.zeros((n, nd))
        avail = np.zeros((n, nf), dtype=np.bool_)
        h = g.h
        idx = g.lattice_index[:n]
        for f, frame in enumerate(self.stencils.frames):
            if f == 0:
                # axis frame, cut-cell arms
                for axis in range(self.dpf):
                    a = g.axis_arm[:, axis, 0]
                    b = g.axis_arm[:, axis, 1]
                    nbp[:, axis] = g.axis_link[:, axis, 0]
                    nbm[:, axis] = g.axis_link[:, axis, 1]
                    wp[:, axis] = 2.0 / (a * (a + b))
                    wm[:, axis] = 2.0 / (b * (a + b))
                    wc[:, axis] = 2.0 / (a * b)
                avail[:, 0] = True
                continue
            ok = np.ones(n, dtype=bool)
            targets = []
            for v in frame:
                v = np.asarray(v)
                tp = _lookup(g, idx + v)
                tm = _lookup(g, idx - v)
                ok &= (tp >= 0) & (tm >= 0)
                targets.append((tp, tm, float(v @ v) * h * h))
            avail[:, f] = ok
            for i, (tp, tm, l2) in enumerate(targets):
                d = f * self.dpf + i
                sel = np.flatnonzero(ok)
                nbp[sel, d] = tp[sel]
                nbm[sel, d] = tm[sel]
                wp[sel, d] = 1.0 / l2
                wm[sel, d] = 1.0 / l2
                wc[sel, d] = 2.0 / l2
        self.nbp, self.nbm = np.ascontiguousarray(nbp.T), np.ascontiguousarray(nbm.T)
        self.wp, self.wm, self.wc = (np.ascontiguousarray(a.T) for a in (wp, wm, wc))
        self.avail = np.ascontiguousarray(avail.T)
        # geometric CFL factor: 1 on a uniform axis frame, larger at short cut arms
        per_frame = wc.reshape(n, nf, self.dpf).sum(axis=2) if n else np.zeros((0, nf))
        self.cfl_weight = float(per_frame.max() * h * h / (2 * self.dpf)) if n else 1.0
        self._scratch = np.empty((nd, n))

    def _build_operator_tables(self):
        kind = self.kind
        self.opcode = {
            "laplacian": _kernels.LAPLACIAN,
            "pucci_minus": _kernels.PUCCI_MINUS,
            "pucci_plus": _kernels.PUCCI_PLUS,
            "bellman_inf": _kernels.BELLMAN,
        }[kind.variant]
        J = max(1, len(kind.matrices))
        self.bell_dir = np.zeros((J, 3), dtype=np.int64)
        self.bell_coef = np.zeros((J, 3))
        self.bell_frame = np.full((J, 3), -1, dtype=np.int64)
        self.bell_fb = np.zeros((J, self.dpf))
        self.bell_scheme = []
        if kind.variant != "bellman_inf":
            return
        for j, A in enumerate(kind.matrices):
            if A.n != self.dpf:
                raise ConfigurationError(f"bellman matrix #{j} is {A.n}x{A.n}, grid is {self.dpf}D")
            a = A.to_array()
            self.bell_fb[j] = np.diag(a)
            if self.dpf == 1:
                self._set_terms(j, [(0, a[0, 0])])
                self.bell_scheme.append("axis")
                continue
            a11, a12, a22 = a[0, 0], a[0, 1], a[1, 1]
            if a12 == 0.0:
                self._set_terms(j, [(0, a11), (1, a22)])
                self.bell_scheme.append("axis")
            elif a11 >= abs(a12) and a22 >= abs(a12):
                f45 = self._frame_index((1, 1))
                if f45 is None:
                    raise ConfigurationError(
                        "bellman matrices with off-diagonal entries need the 45-degree frame (K >= 2)")
                diag = f45 * 2 + (0 if a12 > 0 else 1)
                self._set_terms(j, [(0, a11 - abs(a12)), (1, a22 - abs(a12)), (diag, 2 * abs(a12))])
                self.bell_scheme.append("cross-difference")
            else:
                eig = sym_eigvals(A)
                vec = np.linalg.eigh(a)[1][:, 0]
                theta = math.atan2(vec[1], vec[0]) % (math.pi / 2)
                angs = np.array(self.stencils.angles)
                gap = np.abs((angs - theta + math.pi / 4) % (math.pi / 2) - math.pi / 4)
                f = int(np.argmin(gap))
                # which frame direction carries the smaller eigenvalue
                d0 = np.array(self.stencils.frames[f][0], dtype=float)
                d0 /= np.linalg.norm(d0)
                first_small = abs(d0 @ vec) >= math.sqrt(0.5)
                c0, c1 = (eig[0], eig[1]) if first_small else (eig[1], eig[0])
                self._set_terms(j, [(2 * f, c0), (2 * f + 1, c1)])
                self.bell_scheme.append("frame-projection")

    def _set_terms(self, j, terms):
        for t, (d, c) in enumerate(terms):
            self.bell_dir[j, t] = d
            self.bell_coef[j, t] = c
            self.bell_frame[j, t] = d // self.dpf

    def _frame_index(self, v):
        for f, fr in enumerate(self.stencils.frames):
            if tuple(fr[0]) == tuple(v):
                return f
        return None

    # -- evaluation -------------------------------------------------------------

    def _args(self):
        lam, Lam = self.kind.spec.lambda_low, self.kind.spec.lambda_high
        return (self.nbp, self.nbm, self.wp, self.wm, self.wc, self.avail, self.dpf,
                self.opcode, lam, Lam, self.bell_dir, self.bell_coef, self.bell_frame, self.bell_fb)

    def apply_values(self, u: np.ndarray, return_selection: bool = False):
        """``F_h(u)`` at interior nodes for a raw value vector."""
        u = np.ascontiguousarray(u, dtype=float)
        n = self.grid.n_interior
        out = np.empty(n)
        sel = np.empty(n, dtype=np.int64)
        _kernels.apply_all(u, out, sel, *self._args(), self._scratch)
        if return_selection:
            return out, sel
        return out

    def node_value(self, u: np.ndarray, k: int) -> float:
        return float(self.apply_values(u)[int(k)])

    def __call__(self, u: Field) -> Field:
        return apply_operator(self, u)

    def __repr__(self):
        return f"DiscreteOperator({self.kind.variant}, K={self.stencils.K}, {self.grid!r})"


def _lookup(grid: Grid, ij: np.ndarray) -> np.ndarray:
    inside = np.all((ij >= 0) & (ij < np.array(grid.shape)), axis=1)
    out = np.full(len(ij), -1, dtype=np.int64)
    if np.any(inside):
        sub = ij[inside]
        out[inside] = grid.node_at[tuple(sub.T)]
    return out


def apply_operator(op: DiscreteOperator, u: Field) -> Field:
    """Field of ``F_h(D^2 u)`` at interior nodes (boundary entries are 0)."""
    if u.grid is not op.grid:
        raise InputDomainError("field and operator live on different grids")
    vals = np.zeros(op.grid.n_nodes)
    vals[: op.grid.n_interior] = op.apply_values(u.values)
    return Field(op.grid, vals)


def directional_second_difference(u: Field, node: int, offset) -> float:
    """Second difference of ``u`` at an interior node along an integer lattice offset.

    Axis offsets of unit length use the unequal-arm formula at cut cells;
    other offsets use the centred formula with ``h_eff = |offset| h``.
    """
    g = u.grid
    if not 0 <= node < g.n_interior:
        raise InputDomainError(f"node {node} is not interior")
    v = np.atleast_1d(np.asarray(offset, dtype=np.int64))
    if v.shape != (g.dim,) or not np.any(v):
        raise InputDomainError(f"offset {offset!r} is not a nonzero {g.dim}D lattice vector")
    vals = u.values
    nz = np.flatnonzero(v)
    if len(nz) == 1 and abs(v[nz[0]]) == 1:
        axis = int(nz[0])
        a = g.axis_arm[node, axis, 0]
        b = g.axis_arm[node, axis, 1]
        up = vals[g.axis_link[node, axis, 0]]
        dn = vals[g.axis_link[node, axis, 1]]
        return 2.0 * (up / (a * (a + b)) - vals[node] / (a * b) + dn / (b * (a + b)))
    ij = g.lattice_index[node]
    jp = g.lattice_node(ij + v)
    jm = g.lattice_node(ij - v)
    if jp < 0 or jm < 0:
        raise StencilError(f"offset {tuple(v)} leaves the domain at node {node} {g.points[node]}")
    l2 = float(v @ v) * g.h ** 2
    return (vals[jp] - 2.0 * vals[node] + vals[jm]) / l2


def frame_values(op: DiscreteOperator, u: Field, variant: str) -> np.ndarray:
    """Pucci frame values with this operator's stencil, for sandwich checks."""
    other = DiscreteOperator.__new__(DiscreteOperator)
    other.__dict__.update(op.__dict__)
    other.kind = OperatorKind(variant, op.kind.spec)
    other._build_operator_tables()
    return other.apply_values(u.values)


@dataclass
class MonotonicityReport:
    trials: int
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations


def monotonicity_audit(op: DiscreteOperator, trials: int = 500, eps: float = 1e-6,
                       seed: int = 0) -> MonotonicityReport:
    """Perturb one neighbour upward at random and check the node value does not drop."""
    rng = np.random.default_rng(seed)
    g = op.grid
    violations = []
    if g.n_interior == 0:
        return MonotonicityReport(0, [])
    for t in range(trials):
        u = rng.random(g.n_nodes)
        k = int(rng.integers(g.n_interior))
        frames = np.flatnonzero(op.avail[:, k])
        f = int(rng.choice(frames))
        d = f * op.dpf + int(rng.integers(op.dpf))
        nb = int(op.nbp[d, k] if rng.random() < 0.5 else op.nbm[d, k])
        base = op.node_value(u, k)
        u2 = u.copy()
        u2[nb] += eps
        after = op.node_value(u2, k)
        if after < base - 1e-12 * (1.0 + abs(base)):
            violations.append({"trial": t, "node": k, "neighbor": nb, "before": base, "after": after})
    return MonotonicityReport(trials, violations)
