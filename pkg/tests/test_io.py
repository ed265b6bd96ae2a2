import json
import math

import numpy as np
import pytest

from pucciflow import io as pio
from pucciflow.eigen import solve_linear
from pucciflow.flow import Flow, FlowConfig, SnapshotSchedule
from pucciflow.grid import Disk, Field, Interval, build_grid, distance_field
from pucciflow.matrix_ops import InputDomainError, OperatorKind


def test_field_csv_round_trip_is_bit_exact(tmp_path, rng):
    g = build_grid(Disk(1.0), 0.1)
    u = Field(g, rng.normal(size=g.n_nodes) * 1e-7)
    pio.write_field_csv(u, tmp_path / "u.csv")
    back = pio.read_field_csv(g, tmp_path / "u.csv")
    assert np.array_equal(back.values, u.values)


def test_field_csv_wrong_grid(tmp_path):
    g = build_grid(Interval(1.0), 0.125)
    pio.write_field_csv(distance_field(g), tmp_path / "u.csv")
    with pytest.raises(InputDomainError):
        pio.read_field_csv(build_grid(Interval(1.0), 0.0625), tmp_path / "u.csv")


def test_field_json_round_trip():
    g = build_grid(Disk(1.0), 0.2)
    u = distance_field(g)
    back = pio.field_from_json(json.loads(json.dumps(pio.field_to_json(u))))
    assert np.array_equal(back.values, u.values)
    assert np.array_equal(back.grid.points, g.points)


def test_trace_export(tmp_path):
    g = build_grid(Interval(1.0), 1 / 32)
    cfg = FlowConfig(OperatorKind("laplacian"), m=2.0, t_end=0.1,
                     schedule=SnapshotSchedule("uniform", 0.05))
    tr = Flow(cfg, g).evolve(Field(g, np.sqrt(g.distance())))
    pio.write_trace(tr, tmp_path / "tr")
    man = json.loads((tmp_path / "tr" / "manifest.json").read_text())
    assert [s["t"] for s in man["snapshots"]] == list(tr.times)
    assert man["config"]["m"] == 2.0
    w = pio.read_field_csv(g, tmp_path / "tr" / man["snapshots"][-1]["w"])
    assert np.array_equal(w.values, tr.snapshots[-1].w)


def test_eigen_export(tmp_path):
    g = build_grid(Interval(math.pi), math.pi / 32)
    r = solve_linear(OperatorKind("laplacian"), g, distance_field(g))
    pio.write_eigen(r, tmp_path)
    d = json.loads((tmp_path / "eigen.json").read_text())
    assert d["mu"] == r.mu and d["mode"] == "linear"
    assert d["convergence"]
    assert np.array_equal(pio.read_field_csv(g, tmp_path / "profile.csv").values, r.profile.values)
