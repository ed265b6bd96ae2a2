"""Command-line front end.

Exit codes: 0 success, 1 a check failed, 2 usage or configuration error,
3 numerical failure (non-finite values, no convergence).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import io as pio
from .config import ConfigError, compile_expression, defaults_text, parse_config
from .matrix_ops import ConfigurationError, InputDomainError

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
OUTPUT_ENV = "PUCCIFLOW_OUTPUT"


class UsageError(Exception):
    pass


# -- helpers ----------------------------------------------------------------------------


def _load(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


def _outdir(args, cfg, default_name: str) -> Path:
    if getattr(args, "out", None):
        d = Path(args.out)
    elif cfg is not None and cfg["output.dir"]:
        d = Path(cfg["output.dir"])
    else:
        d = Path(os.environ.get(OUTPUT_ENV, "runs")) / default_name
    if d.exists() and any(d.iterdir()) and not args.force:
        raise UsageError(f"output directory {d} is not empty; pass --force to overwrite")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _grid(cfg, h):
    from .grid import build_grid
    return build_grid(cfg.domain(), h)


def _initial(cfg, grid):
    from .grid import Field, canonical_initial_data
    kind = cfg["initial.kind"]
    if kind == "expr":
        fn = compile_expression(cfg["initial.expr"], grid.dim)
        return Field.from_function(grid, fn)
    if kind == "file":
        return pio.read_field_csv(grid, cfg["initial.file"])
    if kind == "distance_power":
        return canonical_initial_data(grid, ("distance_power", cfg["initial.power"]), cfg["m"])
    return canonical_initial_data(grid, kind, cfg["m"])


def _transform(cfg):
    from .geometry import Transform, default_transform
    t = cfg["check.transform"]
    if t == "auto":
        return default_transform(cfg["m"])
    return Transform(t, cfg["check.power"]) if t == "power" else Transform(t)


def _levels(cfg, out: Path):
    lad = cfg.ladder()
    for i, h in enumerate(lad):
        yield h, (out if len(lad) == 1 else out / f"level_{i}")


def _manifest(out: Path, command: str, cfg, wall: float, results, passed=None):
    man = {"command": command, "version": __version__, "wall_time": wall,
           "config": cfg.echo() if cfg is not None else None, "results": results}
    if passed is not None:
        man["passed"] = passed
    pio._dump(man, out / "manifest.json")
    if cfg is not None:
        (out / "resolved.cfg").write_text(cfg.to_text())


def _pt(p) -> str:
    return "(" + ", ".join(f"{float(c):.6g}" for c in p) + ")"


def _say(msg):
    print(msg, flush=True)


# -- subcommands ------------------------------------------------------------------------


def cmd_evolve(args):
    from .flow import Flow
    cfg = _load(args.config)
    out = _outdir(args, cfg, f"evolve-{Path(args.config).stem}")
    t0 = time.perf_counter()
    results = []
    for h, d in _levels(cfg, out):
        grid = _grid(cfg, h)
        trace = Flow(cfg.flow_config(), grid).evolve(_initial(cfg, grid))
        pio.write_trace(trace, d)
        results.append({"h": h, "dir": str(d), "snapshots": len(trace), "steps": trace.steps,
                        "final_sup": float(trace.sup_norms[-1])})
        _say(f"h={h:.6g}: {len(trace)} snapshots, {trace.steps} steps, final sup {trace.sup_norms[-1]:.6g}")
    _manifest(out, "evolve", cfg, time.perf_counter() - t0, results)
    return EXIT_OK


def cmd_eigen(args):
    from .eigen import solve_linear, solve_sublinear
    cfg = _load(args.config)
    out = _outdir(args, cfg, f"eigen-{Path(args.config).stem}")
    t0 = time.perf_counter()
    results = []
    for h, d in _levels(cfg, out):
        grid = _grid(cfg, h)
        u0 = _initial(cfg, grid)
        if cfg["m"] == 1:
            r = solve_linear(cfg.operator(), grid, u0, tol_mu=cfg["eigen.tol_mu"],
                             tol_profile=cfg["eigen.tol_profile"], frames=cfg["grid.frames"],
                             max_time=cfg["eigen.max_time"])
        else:
            r = solve_sublinear(cfg.operator(), grid, cfg["m"], u0,
                                tol_profile=cfg["eigen.tol_profile"], frames=cfg["grid.frames"])
        pio.write_eigen(r, d)
        results.append({"h": h, "dir": str(d), "mu": r.mu, "residual": r.residual,
                        "residual_bound": r.residual_bound})
        _say(f"h={h:.6g}: mode={r.mode} mu={r.mu:.10g} residual={r.residual:.3g} "
             f"(bound {r.residual_bound:.3g})")
    _manifest(out, "eigen", cfg, time.perf_counter() - t0, results)
    return EXIT_OK


def _check_concavity(cfg, grid, d):
    from .eigen import solve_linear, solve_sublinear
    from .flow import Flow
    from .geometry import midpoint_concavity, preservation_audit
    tf = _transform(cfg)
    band = cfg["check.band"]
    u0 = _initial(cfg, grid)
    target = cfg["check.target"]
    if target == "flow":
        trace = Flow(cfg.flow_config(), grid).evolve(u0, slopes=False)
        entries = preservation_audit(trace, tf, band)
        ok = all(e.ok for e in entries)
        rows = [{"t": e.t, "worst": e.worst, "tol": e.tol, "ok": e.ok} for e in entries]
        pio._dump({"transform": tf.label(), "audit": rows, "ok": ok}, d / "concavity.json")
        worst = max(entries, key=lambda e: e.worst - e.tol)
        _say(f"audit over {len(entries)} snapshots: worst {worst.worst:.4g} at t={worst.t:.4g} "
             f"(tol {worst.tol:.3g})")
        return ok, {"worst": worst.worst, "t": worst.t}
    field = u0
    if target == "eigen":
        if cfg["m"] == 1:
            field = solve_linear(cfg.operator(), grid, u0, tol_mu=cfg["eigen.tol_mu"]).profile
        else:
            field = solve_sublinear(cfg.operator(), grid, cfg["m"], u0).profile
    rep = midpoint_concavity(field, tf, band, ntop=100)
    pio.write_report(rep, d / "concavity.json")
    rep.write_top_csv(d / "worst_triples.csv")
    trip = "none" if rep.worst_triple is None else \
        " | ".join(" ".join(f"{c:.6g}" for c in p) for p in rep.worst_triple)
    _say(f"{tf.label()} midpoint check over {rep.count} triples: worst {rep.worst:.4g} "
         f"(tol {rep.tol:.3g}) at x, y, mid = {trip}")
    return rep.ok, rep.to_json()


def _check_ab(cfg, grid, d):
    from .flow import Flow
    from .verify import ab_constant
    m = cfg["m"]
    if not m > 1:
        raise ConfigError("check ab needs m > 1", cfg.lines.get("m"), "m")
    ta, tb = cfg["check.window"]
    dt = cfg["check.snap_dt"]
    times = np.concatenate([[0.0], np.arange(ta - dt, tb + 1.5 * dt, dt)])
    fc = cfg.flow_config().replace(t_end=float(times[-1]))
    trace = Flow(fc, grid).evolve(_initial(cfg, grid), times=times, slopes=False)
    rep = ab_constant(trace, (ta, tb), cfg["check.band"])
    bound = m / (m - 1) + 0.5
    res = {"C_star_w": rep.c_star_w, "C_star_v": rep.c_star_v, "bound": bound,
           "worst_point": list(rep.worst_point), "worst_time": rep.worst_time,
           "excluded": rep.excluded, "evaluated": rep.evaluated}
    ok = math.isfinite(rep.c_star_w) and rep.c_star_w <= bound
    res["ok"] = ok
    pio.write_report(res, d / "ab.json")
    _say(f"C* (w) = {rep.c_star_w:.6g} at x={_pt(rep.worst_point)}, t={rep.worst_time:.4g}; "
         f"C* (v) = {rep.c_star_v:.6g}; bound {bound:.4g}")
    return ok, res


def _check_comparison(cfg, grid, d):
    from .flow import comparison_harness
    from .verify import _random_pair
    rng = np.random.default_rng(cfg["seed"])
    worst = 0.0
    fc = cfg.flow_config()
    for _ in range(cfg["check.pairs"]):
        lo, hi = _random_pair(rng, grid)
        if fc.eta > 0:
            lo = lo.with_values(np.maximum(lo.values, fc.eta))
            hi = hi.with_values(np.maximum(hi.values, lo.values))
        worst = max(worst, comparison_harness(fc, lo, hi).worst_violation)
    res = {"pairs": cfg["check.pairs"], "worst_violation": worst, "tol": 1e-12, "ok": worst <= 1e-12}
    pio.write_report(res, d / "comparison.json")
    _say(f"{cfg['check.pairs']} ordered pairs: worst violation {worst:.3g}")
    return res["ok"], res


def _check_barriers(cfg, grid, d):
    from . import barriers as bar
    spec = cfg.spec()
    bs = bar.BarrierSpec(cfg["barrier.kind"], spec, m=cfg["m"] if cfg["barrier.kind"] == "barenblatt" else 1.0,
                         dim=grid.dim, c0=cfg["barrier.c0"], tau=cfg["barrier.tau"],
                         delta0=cfg["barrier.delta0"], c=cfg["barrier.c"])
    rep = bar.residual_check(bs, grid, tuple(cfg["check.window"]), cfg["barrier.sign"],
                             operator=cfg.operator(), frames=cfg["grid.frames"])
    pio.write_report(rep, d / "barrier.json")
    _say(f"{bs.kind} residual ({rep.sign}): worst {rep.worst:.4g} at {_pt(rep.worst_point)}, "
         f"t={rep.worst_time:.4g}; threshold {rep.threshold:.3g}")
    return rep.ok, rep.to_json()


CHECKS = {"concavity": _check_concavity, "ab": _check_ab, "comparison": _check_comparison,
          "barriers": _check_barriers}


def cmd_check(args):
    cfg = _load(args.config)
    out = _outdir(args, cfg, f"check-{args.what}-{Path(args.config).stem}")
    t0 = time.perf_counter()
    results, ok = [], True
    for h, d in _levels(cfg, out):
        d.mkdir(parents=True, exist_ok=True)
        grid = _grid(cfg, h)
        passed, res = CHECKS[args.what](cfg, grid, d)
        ok &= bool(passed)
        results.append({"h": h, "passed": bool(passed), "result": res})
    _manifest(out, f"check {args.what}", cfg, time.perf_counter() - t0, results, ok)
    _say("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_experiment(args):
    from .verify import REGISTRY, UnknownExperimentError, run_experiment, write_outcomes
    if args.name not in REGISTRY:
        raise UnknownExperimentError(
            f"unknown experiment {args.name!r}; registered experiments:\n  "
            + "\n  ".join(sorted(REGISTRY)))
    out = _outdir(args, None, f"experiment-{args.name}")
    o = run_experiment(args.name)
    write_outcomes([o], out)
    _manifest(out, f"experiment {args.name}", None, o.wall_time,
              {"params": {k: v for k, v in REGISTRY[args.name]["params"].items()}, "outcome": o.to_json()},
              o.passed)
    for c in o.checks:
        _say(f"  {'ok  ' if c.passed else 'FAIL'} {c.label}: {c.measured:.6g} {c.relation} {c.threshold:.6g}")
    _say(o.summary_line())
    return EXIT_OK if o.passed else EXIT_CHECK


def cmd_report(args):
    root = Path(args.dir)
    if not root.is_dir():
        raise UsageError(f"{root} is not a directory")
    rows = []
    for man in sorted(root.rglob("manifest.json")):
        try:
            d = json.loads(man.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read {man}: {exc}") from None
        if "command" not in d:
            continue  # trace manifests nested inside a run
        rows.append({"run": str(man.parent.relative_to(root)) or ".", "command": d.get("command"),
                     "version": d.get("version"), "wall_time": d.get("wall_time"),
                     "passed": d.get("passed"), "results": d.get("results")})
    if not rows:
        raise UsageError(f"no run manifests under {root}")
    pio._dump({"runs": rows}, root / "summary.json")
    with open(root / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["run", "command", "version", "wall_time", "passed"])
        for r in rows:
            w.writerow([r["run"], r["command"], r["version"], r["wall_time"], r["passed"]])
    _say(f"{len(rows)} runs summarised into {root / 'summary.json'} and summary.csv")
    failed = [r for r in rows if r["passed"] is False]
    return EXIT_CHECK if failed else EXIT_OK


# -- parser ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="pucciflow",
        description="Flows u_t = F(D^2 u^m), principal eigenpairs and concavity checks. "
                    "'pucciflow --help defaults' lists every config key.",
        epilog="exit codes: 0 ok, 1 check failed, 2 usage/config error, 3 numerical failure")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--threads", type=int, default=None, help="cap on compiled-kernel worker threads")
    sub = p.add_subparsers(dest="command", metavar="command")

    def common(sp, with_config=True):
        if with_config:
            sp.add_argument("config", help="config file")
        sp.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV}/<command>)")
        sp.add_argument("--force", action="store_true", help="overwrite a non-empty output directory")

    common(sub.add_parser("evolve", help="run a flow and write its trace"))
    common(sub.add_parser("eigen", help="compute a principal eigenpair or sublinear profile"))
    ck = sub.add_parser("check", help="run a concavity, AB, comparison or barrier check")
    ck.add_argument("what", choices=sorted(CHECKS), help="which check")
    common(ck)
    ex = sub.add_parser("experiment", help="run a registered verification experiment")
    ex.add_argument("name", help="experiment name")
    common(ex, with_config=False)
    rp = sub.add_parser("report", help="summarise a run directory into JSON and CSV")
    rp.add_argument("dir", help="run directory")
    return p


COMMANDS = {"evolve": cmd_evolve, "eigen": cmd_eigen, "check": cmd_check,
            "experiment": cmd_experiment, "report": cmd_report}


def _set_threads(n):
    if n is None:
        return
    if n < 1:
        raise UsageError(f"--threads must be >= 1, got {n}")
    import numba
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv[:2] == ["--help", "defaults"] or argv[:2] == ["help", "defaults"]:
        print(defaults_text())
        return EXIT_OK
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_USAGE
    if args.command is None:
        parser.print_help()
        return EXIT_USAGE
    from .eigen import EigenConvergenceError
    from .flow import IntegrationError
    try:
        _set_threads(args.threads)
        return COMMANDS[args.command](args)
    except (UsageError, ConfigurationError, InputDomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IntegrationError, EigenConvergenceError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
