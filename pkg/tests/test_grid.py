import math

import numpy as np
import pytest

from pucciflow.grid import (
    BOUNDARY, INTERIOR, Disk, Field, Interval, Polygon, Rectangle, boundary_slopes, build_grid,
    canonical_initial_data, distance_field, domain_from_descriptor,
)
from pucciflow.matrix_ops import ConfigurationError, InputDomainError


def test_interval_counts():
    g = build_grid(Interval(math.pi), math.pi / 4)
    c = g.counts()
    assert c["interior"] == 3
    assert c["lattice_boundary"] + c["cut_boundary"] == 2


def test_unit_square_counts():
    g = build_grid(Rectangle(1, 1), 0.25)
    assert g.n_interior == 9


def test_disk_membership():
    g = build_grid(Disk(1.0), 0.5)
    pts = g.points[: g.n_interior]
    assert np.all(np.linalg.norm(pts, axis=1) < 1)
    lattice = g.origin + 0.5 * np.indices(g.shape).reshape(2, -1).T
    inside = np.linalg.norm(lattice, axis=1) < 1 - 1e-12
    assert g.n_interior == int(inside.sum())


def test_distance_examples():
    g = build_grid(Interval(math.pi), math.pi / 16)
    x = g.points[: g.n_interior, 0]
    assert np.allclose(g.distance()[: g.n_interior], np.minimum(x, math.pi - x), atol=1e-15)
    gd = build_grid(Disk(1.0), 0.125)
    p = gd.points[: gd.n_interior]
    assert np.allclose(gd.distance()[: gd.n_interior], 1 - np.linalg.norm(p, axis=1), atol=1e-14)
    gs = build_grid(Rectangle(1, 1), 0.125)
    assert gs.distance()[gs.lattice_node((4, 4))] == pytest.approx(0.5)


def test_boundary_nodes_on_boundary():
    for dom, h in ((Disk(1.0), 0.1), (Rectangle(1.0, 0.7), 0.09),
                   (Polygon([(0, 0), (2, 0), (0.5, 1.5)]), 0.1)):
        g = build_grid(dom, h)
        lev = dom.level(g.points[g.n_interior:])
        assert np.max(np.abs(lev)) <= 1e-12 * max(1, dom.scale)


def test_refinement_keeps_classification():
    dom = Polygon([(0, 0), (2, 0), (0.5, 1.5)])
    coarse, fine = build_grid(dom, 0.1), build_grid(dom, 0.05)
    idx = np.indices(coarse.shape).reshape(2, -1).T
    for ij in idx:
        assert coarse.status[tuple(ij)] == fine.status[tuple(2 * ij)]


def test_cut_arms_for_disk():
    g = build_grid(Disk(1.0), 0.3)
    assert len(g.cut_nodes) > 0
    for c in g.cut_nodes:
        assert 0 < c.arm <= g.h


def test_h_too_large():
    with pytest.raises(ConfigurationError):
        build_grid(Interval(1.0), 0.3)
    with pytest.raises(ConfigurationError):
        build_grid(Interval(1.0), -0.1)


def test_distance_midpoint_concave():
    g = build_grid(Polygon([(0, 0), (2, 0), (0.5, 1.5)]), 0.1)
    from pucciflow.geometry import midpoint_concavity
    rep = midpoint_concavity(distance_field(g), band_cells=0)
    assert rep.worst <= 1e-12


def test_canonical_initial_data():
    g = build_grid(Interval(math.pi), math.pi / 64)
    d = canonical_initial_data(g, "distance")
    assert d.sup_norm() == pytest.approx(math.pi / 2)
    s = canonical_initial_data(g, ("distance_power", 0.5), m=2)
    assert np.allclose(s.values ** 2, g.distance())
    assert s.meta["in_cb"]
    e = canonical_initial_data(g, "eigen_laplacian")
    x = g.points[:, 0]
    assert np.allclose(e.values, np.sin(x), atol=1e-14)
    dflt = canonical_initial_data(g, "default", m=3)
    assert np.allclose(dflt.values ** 3, g.distance())
    with pytest.raises(InputDomainError):
        canonical_initial_data(g, ("custom", -np.ones(g.n_nodes)))


def test_field_validation():
    g = build_grid(Interval(1.0), 0.125)
    with pytest.raises(InputDomainError):
        Field(g, np.zeros(3))
    bad = np.zeros(g.n_nodes)
    bad[2] = np.nan
    with pytest.raises(InputDomainError, match="node 2"):
        Field(g, bad)


def test_boundary_slopes_of_sin():
    g = build_grid(Interval(math.pi), math.pi / 128)
    s = boundary_slopes(Field.from_function(g, np.sin))
    assert s["min"] == pytest.approx(1.0, abs=1e-3)
    assert s["max"] == pytest.approx(1.0, abs=1e-3)


def test_boundary_slopes_disk_and_corners():
    g = build_grid(Disk(1.0), 1 / 32)
    u = Field.from_function(g, lambda x, y: 1 - x ** 2 - y ** 2)
    s = boundary_slopes(u)
    assert s["min"] == pytest.approx(2.0, abs=1e-2)
    sq = build_grid(Rectangle(1, 1), 1 / 16)
    s2 = boundary_slopes(distance_field(sq))
    assert s2["skipped"] >= 4
    assert s2["flagged_near_vertex"] > 0


def test_descriptor_round_trip():
    for dom in (Interval(2.0), Rectangle(1, 2), Disk(0.5), Polygon([(0, 0), (1, 0), (0, 1)])):
        again = domain_from_descriptor(dom.descriptor())
        assert again.descriptor() == dom.descriptor()
