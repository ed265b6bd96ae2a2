"""Uniform lattices over convex domains, with cut-cell boundary nodes.

Lattice points are ``origin + h * index`` where ``origin`` is the lower-left
corner of the domain's bounding box, so halving ``h`` keeps every coarse node.
Interior lattice nodes come first in the node ordering, then lattice nodes
lying exactly on the boundary, then cut-cell boundary nodes (intersections of
grid lines with the boundary).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .matrix_ops import ConfigurationError, InputDomainError

EXTERIOR, INTERIOR, BOUNDARY = 0, 1, 2

_ON_TOL = 1e-12


class Domain:
    """Base class for convex domains; subclasses provide the geometry."""

    dim: int
    strictly_convex: bool = False

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def level(self, p: np.ndarray) -> np.ndarray:
        """Signed boundary function: negative inside, zero on the boundary."""
        raise NotImplementedError

    def distance(self, p: np.ndarray) -> np.ndarray:
        """Euclidean distance to the boundary for points in the closed domain."""
        raise NotImplementedError

    def ray_exit(self, p: np.ndarray, d: np.ndarray) -> float:
        """Distance ``s > 0`` at which ``p + s d`` leaves the domain (``d`` unit)."""
        raise NotImplementedError

    def vertices(self) -> np.ndarray:
        return np.empty((0, self.dim))

    def descriptor(self) -> dict[str, Any]:
        raise NotImplementedError

    @property
    def min_extent(self) -> float:
        lo, hi = self.bbox()
        return float(np.min(hi - lo))

    @property
    def scale(self) -> float:
        lo, hi = self.bbox()
        return float(np.max(hi - lo))


class _HalfPlaneDomain(Domain):
    # inside: normals @ x <= offsets
    normals: np.ndarray
    offsets: np.ndarray

    def level(self, p):
        p = np.atleast_2d(np.asarray(p, dtype=float))
        return np.max(p @ self.normals.T - self.offsets, axis=1)

    def distance(self, p):
        p = np.atleast_2d(np.asarray(p, dtype=float))
        return np.maximum(np.min(self.offsets - p @ self.normals.T, axis=1), 0.0)

    def ray_exit(self, p, d):
        p = np.asarray(p, dtype=float)
        d = np.asarray(d, dtype=float)
        nd = self.normals @ d
        gap = self.offsets - self.normals @ p
        with np.errstate(divide="ignore"):
            s = np.where(nd > 0, gap / np.where(nd > 0, nd, 1.0), np.inf)
        return float(np.min(s))


class Interval(_HalfPlaneDomain):
    """The interval ``[0, length]``."""

    dim = 1
    strictly_convex = True

    def __init__(self, length: float):
        length = float(length)
        if not (length > 0 and math.isfinite(length)):
            raise ConfigurationError(f"interval length must be positive, got {length}")
        self.length = length
        self.normals = np.array([[-1.0], [1.0]])
        self.offsets = np.array([0.0, length])

    def bbox(self):
        return np.array([0.0]), np.array([self.length])

    def vertices(self):
        return np.array([[0.0], [self.length]])

    def descriptor(self):
        return {"shape": "interval", "length": self.length}

    def __repr__(self):
        return f"Interval({self.length!r})"


class Polygon(_HalfPlaneDomain):
    """Convex polygon with counterclockwise vertices."""

    dim = 2

    def __init__(self, vertices):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise ConfigurationError(f"polygon needs >= 3 planar vertices, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ConfigurationError("polygon vertices must be finite")
        e = np.roll(v, -1, axis=0) - v
        cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
        if not np.all(cross > 0):
            raise ConfigurationError(
                "polygon must be convex with counterclockwise vertices "
                f"(edge cross products {cross.tolist()})")
        self._v = v
        lengths = np.hypot(e[:, 0], e[:, 1])
        self.normals = np.column_stack([e[:, 1], -e[:, 0]]) / lengths[:, None]
        self.offsets = np.einsum("ij,ij->i", self.normals, v)
        self.strictly_convex = False

    def bbox(self):
        return self._v.min(axis=0), self._v.max(axis=0)

    def vertices(self):
        return self._v.copy()

    def descriptor(self):
        return {"shape": "polygon", "vertices": self._v.tolist()}

    def __repr__(self):
        return f"Polygon({self._v.tolist()!r})"


class Rectangle(Polygon):
    """The rectangle ``[0, lx] x [0, ly]``."""

    def __init__(self, lx: float, ly: float):
        lx, ly = float(lx), float(ly)
        if not (lx > 0 and ly > 0 and math.isfinite(lx) and math.isfinite(ly)):
            raise ConfigurationError(f"rectangle extents must be positive, got ({lx}, {ly})")
        self.lx, self.ly = lx, ly
        super().__init__([[0.0, 0.0], [lx, 0.0], [lx, ly], [0.0, ly]])
        # exact axis-aligned normals, no rounding from the edge normalization
        self.normals = np.array([[0.0, -1.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
        self.offsets = np.array([0.0, lx, ly, 0.0])

    def descriptor(self):
        return {"shape": "rectangle", "lx": self.lx, "ly": self.ly}

    def __repr__(self):
        return f"Rectangle({self.lx!r}, {self.ly!r})"


class Disk(Domain):
    """Disk of given radius centred at the origin."""

    dim = 2
    strictly_convex = True

    def __init__(self, radius: float):
        radius = float(radius)
        if not (radius > 0 and math.isfinite(radius)):
            raise ConfigurationError(f"disk radius must be positive, got {radius}")
        self.radius = radius

    def bbox(self):
        return np.array([-self.radius] * 2), np.array([self.radius] * 2)

    def level(self, p):
        p = np.atleast_2d(np.asarray(p, dtype=float))
        return np.hypot(p[:, 0], p[:, 1]) - self.radius

    def distance(self, p):
        return np.maximum(-self.level(p), 0.0)

    def ray_exit(self, p, d):
        p = np.asarray(p, dtype=float)
        pd = float(p @ d)
        c = float(p @ p) - self.radius ** 2
        return -pd + math.sqrt(max(pd * pd - c, 0.0))

    def descriptor(self):
        return {"shape": "disk", "radius": self.radius}

    def __repr__(self):
        return f"Disk({self.radius!r})"


def domain_from_descriptor(desc: dict) -> Domain:
    shape = desc.get("shape")
    if shape == "interval":
        return Interval(desc["length"])
    if shape == "rectangle":
        return Rectangle(desc["lx"], desc["ly"])
    if shape == "disk":
        return Disk(desc["radius"])
    if shape == "polygon":
        return Polygon(desc["vertices"])
    raise ConfigurationError(f"unknown domain shape {shape!r}")


@dataclass(frozen=True, eq=False)
class CutNode:
    """A boundary node placed where a grid line from ``owner`` meets the boundary."""

    owner: int      # interior node index
    axis: int
    sign: int       # +1 or -1 along the axis
    arm: float      # distance from the owner, 0 < arm < h


class Grid:
    """Uniform lattice over a convex domain with node classification.

    Attributes
    ----------
    points : (N, dim) array
        Coordinates of interior nodes, then lattice boundary nodes, then
        cut-cell boundary nodes.
    n_interior : int
        Number of interior nodes (they occupy ``points[:n_interior]``).
    status : int8 array of the lattice shape
        ``EXTERIOR``, ``INTERIOR`` or ``BOUNDARY`` per lattice point.
    node_at : int array of the lattice shape
        Node index of each lattice point, ``-1`` for exterior points.
    """

    def __init__(self, domain: Domain, h: float):
        h = float(h)
        if not (h > 0 and math.isfinite(h)):
            raise ConfigurationError(f"grid spacing must be positive, got {h}")
        if h > domain.min_extent / 4 * (1 + 1e-12):
            raise ConfigurationError(
                f"grid spacing h={h} too large for domain extent {domain.min_extent} "
                "(need h <= extent/4)")
        self.domain = domain
        self.h = h
        self.dim = domain.dim
        lo, hi = domain.bbox()
        self.origin = lo.astype(float)
        self.shape = tuple(int(math.floor((hi[k] - lo[k]) / h + 1e-9)) + 1 for k in range(self.dim))

        idx = np.indices(self.shape).reshape(self.dim, -1).T
        coords = self.origin + h * idx
        lev = domain.level(coords)
        tol = _ON_TOL * max(1.0, domain.scale)
        status = np.full(len(idx), EXTERIOR, dtype=np.int8)
        status[lev < -tol] = INTERIOR
        status[np.abs(lev) <= tol] = BOUNDARY
        self.status = status.reshape(self.shape)

        flat = status
        inner = np.flatnonzero(flat == INTERIOR)
        bnd = np.flatnonzero(flat == BOUNDARY)
        order = np.concatenate([inner, bnd])
        node_at = np.full(len(idx), -1, dtype=np.int64)
        node_at[order] = np.arange(len(order))
        self.node_at = node_at.reshape(self.shape)
        self.n_interior = len(inner)
        self.n_lattice_boundary = len(bnd)
        self.lattice_index = idx[order]

        cut_nodes: list[CutNode] = []
        cut_points = []
        # axis_link[k, axis, side] -> neighbor node index for interior node k
        axis_link = np.empty((self.n_interior, self.dim, 2), dtype=np.int64)
        axis_arm = np.full((self.n_interior, self.dim, 2), h)
        n_lat = len(order)
        for k in range(self.n_interior):
            ij = self.lattice_index[k]
            for axis in range(self.dim):
                for side, sgn in enumerate((1, -1)):
                    nb = ij.copy()
                    nb[axis] += sgn
                    inside = 0 <= nb[axis] < self.shape[axis]
                    j = self.node_at[tuple(nb)] if inside else -1
                    if j >= 0:
                        axis_link[k, axis, side] = j
                        continue
                    e = np.zeros(self.dim)
                    e[axis] = sgn
                    p = coords[inner[k]]
                    s = min(domain.ray_exit(p, e), h)
                    q = p + s * e
                    if isinstance(domain, Rectangle):
                        # snap exactly onto the edge being crossed
                        q[axis] = 0.0 if sgn < 0 else (domain.lx, domain.ly)[axis]
                    elif isinstance(domain, Interval):
                        q[0] = 0.0 if sgn < 0 else domain.length
                    axis_link[k, axis, side] = n_lat + len(cut_nodes)
                    axis_arm[k, axis, side] = s
                    cut_nodes.append(CutNode(k, axis, sgn, s))
                    cut_points.append(q)
        self.cut_nodes = tuple(cut_nodes)
        pts = coords[order]
        if cut_points:
            pts = np.vstack([pts, np.array(cut_points)])
        self.points = pts
        self.axis_link = axis_link
        self.axis_arm = axis_arm
        self.n_nodes = len(pts)

    # -- classification helpers -------------------------------------------------

    @property
    def n_boundary(self) -> int:
        return self.n_nodes - self.n_interior

    @property
    def interior_points(self) -> np.ndarray:
        return self.points[: self.n_interior]

    def counts(self) -> dict[str, int]:
        return {
            "interior": int(self.n_interior),
            "lattice_boundary": int(self.n_lattice_boundary),
            "cut_boundary": len(self.cut_nodes),
            "exterior": int(np.sum(self.status == EXTERIOR)),
        }

    def lattice_node(self, index) -> int:
        """Node index at a lattice index, or -1 if exterior / off-lattice."""
        index = tuple(int(i) for i in np.atleast_1d(index))
        if any(i < 0 or i >= s for i, s in zip(index, self.shape)):
            return -1
        return int(self.node_at[index])

    def distance(self) -> np.ndarray:
        d = self.domain.distance(self.points)
        d[self.n_interior:] = 0.0
        return d

    def near_vertex(self, radius_cells: float = 2.0) -> np.ndarray:
        """Mask of nodes within ``radius_cells * h`` of a domain vertex (corner flag)."""
        v = self.domain.vertices()
        if self.dim == 1 or len(v) == 0:
            return np.zeros(self.n_nodes, dtype=bool)
        d = np.min(np.linalg.norm(self.points[:, None, :] - v[None, :, :], axis=2), axis=1)
        return d <= radius_cells * self.h

    def metadata(self) -> dict[str, Any]:
        return {"domain": self.domain.descriptor(), "h": self.h, "counts": self.counts()}

    def __repr__(self):
        return f"Grid({self.domain!r}, h={self.h!r}, interior={self.n_interior})"


def build_grid(domain: Domain, h: float) -> Grid:
    return Grid(domain, h)


@dataclass
class Field:
    """One real value per interior and boundary node of a grid."""

    grid: Grid
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n_nodes,):
            raise InputDomainError(
                f"field has {v.shape} values, grid has {self.grid.n_nodes} nodes")
        if not np.all(np.isfinite(v)):
            bad = int(np.flatnonzero(~np.isfinite(v))[0])
            raise InputDomainError(f"non-finite field value at node {bad} {self.grid.points[bad]}")
        self.values = v

    @classmethod
    def from_function(cls, grid: Grid, fn, boundary_value: float | None = 0.0) -> "Field":
        pts = grid.points
        args = [pts[:, k] for k in range(grid.dim)]
        vals = np.asarray(fn(*args), dtype=float) * np.ones(grid.n_nodes)
        f = cls(grid, vals)
        if boundary_value is not None:
            f.values[grid.n_interior:] = boundary_value
        return f

    @property
    def interior(self) -> np.ndarray:
        return self.values[: self.grid.n_interior]

    @property
    def boundary(self) -> np.ndarray:
        return self.values[self.grid.n_interior:]

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if len(self.values) else 0.0

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy(), dict(self.meta))

    def with_values(self, values) -> "Field":
        return Field(self.grid, values)

    def __repr__(self):
        return f"Field({self.grid!r}, sup={self.sup_norm():.6g})"


def distance_field(grid: Grid) -> Field:
    return Field(grid, grid.distance())


def _laplacian_eigen(grid: Grid) -> np.ndarray:
    dom = grid.domain
    p = grid.points
    if isinstance(dom, Interval):
        return np.sin(np.pi * p[:, 0] / dom.length)
    if isinstance(dom, Rectangle):
        return np.sin(np.pi * p[:, 0] / dom.lx) * np.sin(np.pi * p[:, 1] / dom.ly)
    if isinstance(dom, Disk):
        from scipy.special import j0, jn_zeros

        return j0(jn_zeros(0, 1)[0] * np.hypot(p[:, 0], p[:, 1]) / dom.radius)
    # no closed form; compute the discrete principal eigenfield
    from .eigen import solve_linear
    from .matrix_ops import OperatorKind

    res = solve_linear(OperatorKind("laplacian"), grid, distance_field(grid))
    return res.profile.values.copy()


def canonical_initial_data(grid: Grid, kind="distance", m: float = 1.0) -> Field:
    """Initial data for flows.

    ``kind`` is ``"distance"``, ``("distance_power", q)``, ``"eigen_laplacian"``,
    ``("custom", values_or_field)`` or ``"default"``. For ``m > 1`` the default
    is ``dist ** (1/m)``, so that ``u0 ** m`` is comparable to the distance.
    ``meta["cb_bounds"]`` holds the fitted ``(c_o, C_o)`` with
    ``c_o dist <= u0**m <= C_o dist`` and ``meta["in_cb"]`` whether they are
    positive and finite.
    """
    if m < 1:
        raise ConfigurationError(f"m must be >= 1, got {m}")
    name, arg = (kind, None) if isinstance(kind, str) else (kind[0], kind[1])
    dist = grid.distance()
    if name == "default":
        name, arg = ("distance_power", 1.0 / m) if m > 1 else ("distance", None)
    if name == "distance":
        vals = dist.copy()
    elif name == "distance_power":
        q = float(arg)
        if not q > 0:
            raise InputDomainError(f"distance power must be positive, got {q}")
        vals = dist ** q
    elif name == "eigen_laplacian":
        vals = _laplacian_eigen(grid)
        vals[grid.n_interior:] = 0.0
        vals = np.maximum(vals, 0.0)
    elif name == "custom":
        vals = np.array(arg.values if isinstance(arg, Field) else arg, dtype=float)
        if vals.shape != (grid.n_nodes,):
            raise InputDomainError(f"custom data has shape {vals.shape}, expected ({grid.n_nodes},)")
        if np.any(vals < 0):
            bad = int(np.flatnonzero(vals < 0)[0])
            raise InputDomainError(
                f"custom initial data negative at node {bad} {grid.points[bad]}: {vals[bad]}")
    else:
        raise ConfigurationError(f"unknown initial-data kind {kind!r}")
    f = Field(grid, vals)
    ratio = (vals[: grid.n_interior] ** m) / dist[: grid.n_interior]
    lo, hi = (float(ratio.min()), float(ratio.max())) if len(ratio) else (0.0, 0.0)
    f.meta = {"kind": name, "m": m, "cb_bounds": (lo, hi), "in_cb": bool(lo > 0 and math.isfinite(hi))}
    return f


def _outward_normal(domain: Domain, p: np.ndarray):
    """Outward unit normal at a boundary point, or None at a corner."""
    if isinstance(domain, Disk):
        return p / np.linalg.norm(p)
    tol = 1e-9 * max(1.0, domain.scale)
    active = np.flatnonzero(np.abs(domain.normals @ p - domain.offsets) <= tol)
    if len(active) != 1:
        return None
    return domain.normals[active[0]]


def _one_sided_slope(u0, u1, u2, s1, s2):
    # derivative at 0 of the quadratic through (0,u0), (s1,u1), (s2,u2)
    return (-u0 * (s1 + s2) / (s1 * s2)
            + u1 * s2 / (s1 * (s2 - s1))
            - u2 * s1 / (s2 * (s2 - s1)))


def boundary_slopes(u: Field, min_alignment: float = 0.5) -> dict:
    """Inward normal slopes of a field at boundary nodes.

    Uses second-order one-sided differences along the grid line through each
    boundary node that is best aligned with the inward normal, divided by the
    alignment cosine. Nodes at corners, nodes without two interior nodes along
    the line, and nodes whose grid line is poorly aligned are skipped and
    counted; nodes near a polygon vertex are flagged.
    """
    g = u.grid
    v = u.values
    h = g.h
    slopes = np.full(g.n_nodes, np.nan)
    skipped = 0
    n_lat_end = g.n_interior + g.n_lattice_boundary
    for j in range(g.n_interior, g.n_nodes):
        p = g.points[j]
        nu = _outward_normal(g.domain, p)
        if nu is None:
            skipped += 1
            continue
        if j < n_lat_end:
            axis = int(np.argmax(np.abs(nu)))
            sgn = -1 if nu[axis] > 0 else 1
            align = abs(nu[axis])
            ij = g.lattice_index[j].copy()
            ij[axis] += sgn
            k1 = g.lattice_node(ij)
            ij[axis] += sgn
            k2 = g.lattice_node(ij)
            if k1 < 0 or k2 < 0 or k1 >= g.n_interior or k2 >= n_lat_end:
                skipped += 1
                continue
            s1, s2 = h, 2 * h
        else:
            cut = g.cut_nodes[j - n_lat_end]
            align = abs(nu[cut.axis])
            k1 = cut.owner
            # step away from the boundary along the cut's grid line
            k2 = g.axis_link[k1, cut.axis, 0 if cut.sign < 0 else 1]
            s1 = cut.arm
            s2 = cut.arm + g.axis_arm[k1, cut.axis, 0 if cut.sign < 0 else 1]
            if k2 >= n_lat_end:
                skipped += 1
                continue
        if align < min_alignment:
            skipped += 1
            continue
        slopes[j] = _one_sided_slope(v[j], v[k1], v[k2], s1, s2) / align
    flagged = g.near_vertex() & ~np.isnan(slopes)
    if g.dim == 1:
        flagged[:] = False
    good = ~np.isnan(slopes)
    smooth = good & ~flagged
    out = {
        "min": float(np.min(slopes[good])) if np.any(good) else float("nan"),
        "max": float(np.max(slopes[good])) if np.any(good) else float("nan"),
        "min_away_from_vertices": float(np.min(slopes[smooth])) if np.any(smooth) else float("nan"),
        "evaluated": int(np.sum(good)),
        "skipped": int(skipped),
        "flagged_near_vertex": int(np.sum(flagged)),
    }
    return out
