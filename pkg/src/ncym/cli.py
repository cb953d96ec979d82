"""Batch front end: `ncym run`, `ncym selfcheck`, `ncym plot`.

One run per process.  A run reads a JSON config, dispatches its task, and
writes artifacts into the output directory: `report.json` always (carrying
the resolved config verbatim), `trace.csv` for solves, field snapshots when
requested.  Exit codes: 0 success, 2 validation failure, 3 the solver ran
out of budget (partial artifacts are still written).

`--threads` (or the NCYM_THREADS environment variable) is a parallelism
hint handed to the BLAS runtime before the numerical modules load; it never
changes results, only wall time.
"""

import argparse
import csv
import json
import os
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NO_CONVERGE = 3


def _apply_threads_hint(threads: int | None) -> None:
    n = threads if threads is not None else os.environ.get("NCYM_THREADS")
    if n is None:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, str(n))


def _pyify(obj):
    """Plain-Python mirror of a result tree so report JSON is canonical."""
    import numpy as np

    if isinstance(obj, dict):
        return {str(k): _pyify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_pyify(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)) and not isinstance(obj, bool):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_pyify(v) for v in obj.tolist()]
    return obj


def _write_report(out_dir: Path, task: str, resolved: dict, result: dict) -> None:
    from .serialize import save_report

    save_report(
        out_dir / "report.json",
        {"task": task, "config": resolved, "result": _pyify(result)},
    )


def _task_eval(problem, doc):
    from .yang_mills import action, gradient, grad_norm, vacuum_residuals

    bd = action(problem.init, problem.riem)
    res = vacuum_residuals(problem.init, problem.riem)
    gn = grad_norm(gradient(problem.init, problem.riem))
    return EXIT_OK, {
        "action": {
            "horizontal": bd.s_horizontal,
            "mixed": bd.s_mixed,
            "vertical": bd.s_vertical,
            "total": bd.s_total,
        },
        "vacuum_residuals": list(res),
        "grad_norm": gn,
    }


def _task_solve(problem, doc, out_dir):
    from .serialize import save_trace_csv, state_snapshot, save_report
    from .yang_mills import SolverOptions, solve_vacuum

    opts = SolverOptions(**doc["solver"])
    state, report, trace = solve_vacuum(problem.init, problem.riem, opts)
    save_trace_csv(out_dir / "trace.csv", trace)
    if doc["snapshots"]:
        save_report(out_dir / "state.json", _pyify_snapshot(state))
    result = {
        "converged": report.converged,
        "iterations": report.iterations,
        "action": report.action,
        "residuals": list(report.residuals),
        "casimir_spectrum": None
        if report.casimir_spectrum is None
        else list(report.casimir_spectrum),
        "casimir_deviation": report.casimir_deviation,
        "commutant_dim": report.commutant_dim,
        "refused": report.refused,
    }
    code = EXIT_OK if report.converged else EXIT_NO_CONVERGE
    return code, result


def _pyify_snapshot(state):
    from .serialize import state_snapshot

    return state_snapshot(state)


def _task_classify(problem, doc):
    from .errors import ClassificationRefused
    from .yang_mills import classify_vacuum

    try:
        finger = classify_vacuum(
            problem.init.phi, problem.basis, hint=problem.riem.hint
        )
        return EXIT_OK, {"refused": None, **_pyify(finger)}
    except ClassificationRefused as exc:
        return EXIT_OK, {"refused": str(exc)}


def _task_chern(problem, doc):
    from .chern_weil import chern_form, chern_number, closedness_residual

    q = doc["chern"]["degree"]
    value = chern_number(problem.conn, q, riem=problem.riem)
    residual = closedness_residual(chern_form(problem.conn, q))
    return EXIT_OK, {
        "q": q,
        "value": value,
        "grid": doc["bundle"]["npts"],
        "estimated_error": abs(value - round(value)),
        "gluing_residual": residual,
    }


def _task_lc_check(problem, doc):
    from .levi_civita import residual_table

    return EXIT_OK, {"residuals": residual_table(problem.riem)}


def _task_geom_check(problem, doc):
    import numpy as np
    from .geometry import grid_points

    man = problem.man
    base = problem.riem.base
    volume = 0.0
    for ch in man.charts:
        volume += (
            float(np.sum(man.weights[ch.name] * base.sqrt_det[ch.name]))
            * ch.cell_volume
        )
    round_trip = 0.0
    for ov in man.overlaps:
        x = grid_points(man.chart(ov.src))
        pts = x[ov.in_overlap(x)]
        for ov2 in man.overlaps:
            if ov2.src == ov.dst and ov2.dst == ov.src:
                round_trip = max(
                    round_trip,
                    float(np.max(np.abs(ov2.point_map(ov.point_map(pts)) - pts))),
                )
    from .connections import gluing_residuals

    gluing = gluing_residuals(problem.conn) if man.overlaps else {}
    return EXIT_OK, {
        "volume": volume,
        "overlap_round_trip": round_trip,
        "potential_gluing": gluing,
    }


def _task_selfcheck(doc, filter_=None):
    from .selfcheck import format_table, run_selfcheck

    results = run_selfcheck(filter_)
    print(format_table(results))
    ok = all(r.passed for r in results)
    payload = {
        "checks": [
            {
                "module": r.module,
                "name": r.name,
                "passed": r.passed,
                "detail": r.detail,
            }
            for r in results
        ],
        "failed": sum(1 for r in results if not r.passed),
    }
    return (EXIT_OK if ok else 1), payload


def cmd_run(args) -> int:
    from .config import build_problem, resolve
    from .errors import ConfigError

    try:
        try:
            doc = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if args.seed is not None:
            doc["seed"] = args.seed
        cfg = resolve(doc)
        resolved = cfg.resolved
        out_dir = Path(
            args.output_dir or resolved.get("output_dir") or f"ncym-out-{cfg.task}"
        )
        out_dir.mkdir(parents=True, exist_ok=True)

        if cfg.task == "selfcheck":
            code, result = _task_selfcheck(resolved)
        else:
            problem = build_problem(cfg)
            if cfg.task == "eval":
                code, result = _task_eval(problem, resolved)
            elif cfg.task == "solve":
                code, result = _task_solve(problem, resolved, out_dir)
            elif cfg.task == "classify":
                code, result = _task_classify(problem, resolved)
            elif cfg.task == "chern":
                code, result = _task_chern(problem, resolved)
            elif cfg.task == "lc-check":
                code, result = _task_lc_check(problem, resolved)
            else:
                code, result = _task_geom_check(problem, resolved)
    except ValueError as exc:
        # every package validation error (ConfigError, ShapeError, InvalidRank,
        # ...) means the inputs were unusable
        print(f"ncym: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    _write_report(Path(out_dir), cfg.task, resolved, result)
    print(f"{cfg.task}: report written to {out_dir / 'report.json'}")
    return code


def cmd_selfcheck(args) -> int:
    code, payload = _task_selfcheck({}, args.filter)
    if args.output_dir:
        out_dir = Path(args.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_report(out_dir, "selfcheck", {"task": "selfcheck"}, payload)
    return code


def _load_run(run_dir: Path):
    from .config import build_problem, resolve
    from .errors import ConfigError

    report_path = run_dir / "report.json"
    if not report_path.exists():
        raise ConfigError(f"no report.json under {run_dir}")
    report = json.loads(report_path.read_text())
    cfg = resolve(report["config"])
    return report, cfg, build_problem(cfg)


def cmd_plot(args) -> int:
    import numpy as np
    from .errors import ConfigError

    run_dir = Path(args.run_dir)
    out_dir = Path(args.output_dir) if args.output_dir else run_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        if args.what == "trace":
            src = run_dir / "trace.csv"
            if not src.exists():
                raise ConfigError(f"no trace.csv under {run_dir}; run a solve first")
            rows = list(csv.reader(src.open()))
            with open(out_dir / "plot_trace.csv", "w", newline="") as fh:
                csv.writer(fh).writerows(rows)
        elif args.what == "well":
            _, _, problem = _load_run(run_dir)
            _emit_well_scan(problem, out_dir / "well.csv")
        elif args.what == "density":
            _, cfg, problem = _load_run(run_dir)
            if cfg.resolved["bundle"]["kind"] == "torus":
                raise ConfigError("density profiles need a sphere bundle")
            _emit_density_profile(cfg, problem, out_dir / "density.csv")
        else:
            _, _, problem = _load_run(run_dir)
            _emit_action_slice(problem, out_dir / "slice.csv")
    except ValueError as exc:
        print(f"ncym: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"plot data written to {out_dir}")
    return EXIT_OK


def _emit_well_scan(problem, path) -> None:
    import numpy as np
    from .connections import zero_ncc
    from .yang_mills import action

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "action"])
        for t in np.linspace(-0.5, 1.5, 81):
            ncc = zero_ncc(problem.conn)
            for name in ncc.phi:
                ncc.phi[name] = ncc.phi[name] + float(t) * problem.rep.matrices
            writer.writerow([repr(float(t)), repr(action(ncc, problem.riem).s_total)])


def _emit_density_profile(cfg, problem, path) -> None:
    import numpy as np
    from .chern_weil import chern_form
    from .geometry import grid_points

    q = cfg.resolved.get("chern", {}).get("degree", problem.man.dim // 2)
    cf = chern_form(problem.conn, q)
    ch = problem.man.chart("north")
    comp = ch.orientation * cf.comps["north"][tuple(range(problem.man.dim))]
    x = grid_points(ch)
    # 1-d cut along the first axis through the row of cells nearest the origin
    centre = [s // 2 for s in ch.shape]
    idx = tuple([slice(None)] + centre[1:])
    coords = x[idx + (0,)]
    values = comp[idx]
    order = np.argsort(coords)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x0", "density"])
        for i in order:
            writer.writerow([repr(float(coords[i])), repr(float(values[i]))])


def _emit_action_slice(problem, path) -> None:
    import numpy as np
    from .geometry import grid_points
    from .yang_mills import action

    bd = action(problem.init, problem.riem)
    name = problem.man.charts[0].name
    dens = bd.densities[name]
    ch = problem.man.charts[0]
    x = grid_points(ch)
    # fix every axis beyond the first two at its middle index
    extra = tuple(s // 2 for s in ch.shape[2:])
    plane = dens[(slice(None), slice(None), slice(None)) + extra]
    xs = x[(slice(None), slice(None)) + extra + (0,)]
    ys = (
        x[(slice(None), slice(None)) + extra + (1,)]
        if ch.dim > 1
        else np.zeros_like(xs)
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "j", "x0", "x1", "horizontal", "mixed", "vertical"])
        for i in range(plane.shape[1]):
            for j in range(plane.shape[2]):
                writer.writerow(
                    [i, j, repr(float(xs[i, j])), repr(float(ys[i, j]))]
                    + [repr(float(plane[c, i, j])) for c in range(3)]
                )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ncym",
        description="Gauge fields and Yang-Mills vacua on endomorphism bundles",
    )
    parser.add_argument("--threads", type=int, default=None,
                        help="BLAS parallelism hint (or NCYM_THREADS)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--output-dir", default=None)
    p_run.add_argument("--seed", type=int, default=None)

    p_check = sub.add_parser("selfcheck", help="run the invariant suite")
    p_check.add_argument("--filter", default=None, metavar="MODULE")
    p_check.add_argument("--output-dir", default=None)

    p_plot = sub.add_parser("plot", help="emit plot-ready CSV from a run")
    p_plot.add_argument("run_dir")
    p_plot.add_argument(
        "--what", choices=["trace", "well", "density", "slice"], default="trace"
    )
    p_plot.add_argument("--output-dir", default=None)

    args = parser.parse_args(argv)
    _apply_threads_hint(args.threads)
    if args.command == "run":
        return cmd_run(args)
    if args.command == "selfcheck":
        return cmd_selfcheck(args)
    return cmd_plot(args)


if __name__ == "__main__":
    sys.exit(main())
