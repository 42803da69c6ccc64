"""Command-line front end.

Commands
--------
optimize
    Run the surrogate-based optimizer; writes trace.json, trace.csv and
    estimate.json into the output directory.
baseline
    Run the Monte-Carlo 1-D optimizer on the same config; writes
    trace.csv, probes.csv and estimate.json.
compare
    Tabulate data/time ratios between an optimize run and a baseline run.
diagnose
    Residual diagnostics of a beta,s dataset CSV.
fixture export
    Write the static structural fixture matrices in Matrix Market format.

Exit status: 0 on success, 2 on configuration/usage errors, 3 on runtime
errors.  All randomness stems from the config seed; reruns with the same
config and seed produce byte-identical CSV artifacts.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

from . import baselines, config, diagnostics, driver, glm, problems
from .errors import ConfigError, MismatchedProblem, ScaleboError

RUN_SCHEMA = "scalebo-run/1"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scalebo")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="path to the run config (JSON)")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="max concurrent statistic evaluations")
    common.add_argument("--out", default=None, help="output directory")

    p_opt = sub.add_parser("optimize", parents=[common], help="run the surrogate optimizer")
    p_opt.set_defaults(func=cmd_optimize)

    p_base = sub.add_parser("baseline", parents=[common], help="run the MC 1-D baseline")
    p_base.set_defaults(func=cmd_baseline)

    p_cmp = sub.add_parser("compare", help="compare an optimize run with a baseline run")
    p_cmp.add_argument("bo_dir", help="directory written by 'optimize'")
    p_cmp.add_argument("baseline_dir", help="directory written by 'baseline'")
    p_cmp.add_argument("--out", default=None, help="also write comparison.json here")
    p_cmp.set_defaults(func=cmd_compare)

    p_diag = sub.add_parser("diagnose", help="residual diagnostics for a beta,s dataset")
    p_diag.add_argument("--data", required=True, help="dataset CSV with header beta,s")
    p_diag.add_argument("--fit", default="self",
                        help="'self' to refit on the dataset, or a path to a fit JSON")
    p_diag.add_argument("--min-per-beta", type=int, default=1000)
    p_diag.add_argument("--window", type=int, default=6)
    p_diag.add_argument("--beta", type=float, default=None,
                        help="beta slice for the family fits (default: largest group)")
    p_diag.add_argument("--out", default=None, help="output directory")
    p_diag.set_defaults(func=cmd_diagnose)

    p_fix = sub.add_parser("fixture", help="static structural fixture utilities")
    fix_sub = p_fix.add_subparsers(dest="action", required=True)
    p_exp = fix_sub.add_parser("export", help="write K, V, f_E, f_H as Matrix Market files")
    p_exp.add_argument("--out", default=None, help="output directory")
    p_exp.set_defaults(func=cmd_fixture_export)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, MismatchedProblem) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ScaleboError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # anything unexpected is a runtime failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


def _load_run_config(args) -> config.RunConfig:
    cfg = config.load_config(args.config)
    if args.seed is not None:
        bo = driver.BoConfig(**{**_bo_as_dict(cfg.bo), "seed": args.seed})
        cfg = config.RunConfig(
            seed=args.seed,
            problem_section=cfg.problem_section,
            bo=bo,
            baseline=cfg.baseline,
            out=cfg.out,
        )
    return cfg


def _bo_as_dict(bo: driver.BoConfig) -> dict:
    from dataclasses import asdict

    return asdict(bo)


def _out_dir(args, cfg, default_name: str) -> Path:
    out = args.out or (cfg.out if cfg is not None else None) or default_name
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path: Path, doc: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _run_metadata(cfg: config.RunConfig, args, method: str, extra=None) -> dict:
    doc = {
        "schema": RUN_SCHEMA,
        "method": method,
        "seed": cfg.seed,
        "threads": args.threads,
        "problem": cfg.problem_section,
        "problem_hash": cfg.problem_hash,
        "bo": _bo_as_dict(cfg.bo),
        "baseline": {
            "method": cfg.baseline.method,
            "mc_samples": cfg.baseline.mc_samples,
            "tol": cfg.baseline.tol,
            "max_iter": cfg.baseline.max_iter,
        },
    }
    if extra:
        doc.update(extra)
    return doc


def cmd_optimize(args) -> int:
    cfg = _load_run_config(args)
    problem = config.build_problem(cfg.problem_section)
    outdir = _out_dir(args, cfg, "optimize-run")
    trace = driver.run(cfg.bo, problem, threads=max(1, args.threads))
    driver.save_trace(trace, outdir / "trace.json")
    driver.trace_to_csv(trace, outdir / "trace.csv")
    _write_json(outdir / "estimate.json", {
        "beta_hat": trace.final_estimate,
        "evaluations": trace.total_evaluations,
        "wall_clock_seconds": trace.wall_clock_seconds,
    })
    _write_json(outdir / "run.json", _run_metadata(cfg, args, "surrogate-bo", {
        "stop_reason": trace.stop_reason,
    }))
    print(f"beta_hat = {trace.final_estimate:g} "
          f"({trace.total_evaluations} evaluations, stop: {trace.stop_reason})")
    return 0


def cmd_baseline(args) -> int:
    cfg = _load_run_config(args)
    problem = config.build_problem(cfg.problem_section)
    outdir = _out_dir(args, cfg, "baseline-run")
    objective = baselines.McObjective(
        problem=problem,
        mc_samples=cfg.baseline.mc_samples,
        seed=cfg.seed,
        threads=max(1, args.threads),
    )
    optimizer = (
        baselines.golden_section
        if cfg.baseline.method == "golden"
        else baselines.parabolic_interpolation
    )
    start = time.perf_counter()
    result = optimizer(
        objective,
        cfg.bo.bounds,
        tol=cfg.baseline.tol,
        max_iter=cfg.baseline.max_iter,
        integer_beta=cfg.bo.integer_beta,
    )
    wall = time.perf_counter() - start

    with open(outdir / "trace.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iteration", "beta", "s", "source"])
        for probe in result.probes:
            for s in probe.s_draws:
                writer.writerow([probe.order, repr(probe.beta), repr(float(s)), "mc-probe"])
    with open(outdir / "probes.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["order", "beta", "mean", "se", "count"])
        for probe in result.probes:
            writer.writerow([probe.order, repr(probe.beta), repr(probe.mean),
                             repr(probe.se), probe.count])
    _write_json(outdir / "estimate.json", {
        "beta_hat": result.beta_hat,
        "evaluations": result.evaluations_used,
        "wall_clock_seconds": wall,
    })
    _write_json(outdir / "run.json", _run_metadata(cfg, args, result.method, {
        "stop_reason": result.stop_reason,
        # The probe schedule below is this implementation's concretization:
        # golden bracketing over ln beta from the configured bounds, stopping
        # on bracket width, probe budget, or the MC noise floor.
        "bracketing": "ln-beta golden bracket from [beta_min, beta_max]",
        "stopping": f"bracket < {cfg.baseline.tol} | noise-floor | {cfg.baseline.max_iter} probes",
    }))
    print(f"beta_hat = {result.beta_hat:g} "
          f"({result.evaluations_used} evaluations, stop: {result.stop_reason})")
    return 0


def _read_run_dir(run_dir: Path) -> tuple[dict, dict]:
    run_doc = json.loads((run_dir / "run.json").read_text(encoding="utf-8"))
    estimate = json.loads((run_dir / "estimate.json").read_text(encoding="utf-8"))
    return run_doc, estimate


def cmd_compare(args) -> int:
    bo_dir, base_dir = Path(args.bo_dir), Path(args.baseline_dir)
    bo_run, bo_est = _read_run_dir(bo_dir)
    base_run, base_est = _read_run_dir(base_dir)
    if bo_run["problem_hash"] != base_run["problem_hash"]:
        raise MismatchedProblem(
            f"runs solve different problems: {bo_run['problem_hash'][:12]} "
            f"vs {base_run['problem_hash'][:12]}"
        )
    data_ratio = base_est["evaluations"] / bo_est["evaluations"]
    time_ratio = (
        base_est["wall_clock_seconds"] / bo_est["wall_clock_seconds"]
        if bo_est["wall_clock_seconds"] > 0
        else float("inf")
    )
    rows = [
        ("data_points", bo_est["evaluations"], base_est["evaluations"], f"{data_ratio:.1f}"),
        ("wall_clock_seconds", f"{bo_est['wall_clock_seconds']:.3f}",
         f"{base_est['wall_clock_seconds']:.3f}", f"{time_ratio:.1f}"),
    ]
    header = ("metric", bo_run["method"], base_run["method"], "ratio")
    widths = [max(len(str(row[i])) for row in [header, *rows]) for i in range(4)]
    for row in [header, *rows]:
        print("  ".join(str(cell).ljust(widths[i]) for i, cell in enumerate(row)))
    print("note: ratio = baseline / surrogate, rounded to one decimal.")
    if args.out:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        _write_json(outdir / "comparison.json", {
            "surrogate": {"method": bo_run["method"], **bo_est},
            "baseline": {"method": base_run["method"], **base_est},
            "ratios": {
                "data_points": round(data_ratio, 1),
                "wall_clock_seconds": round(time_ratio, 1),
            },
            "problem_hash": bo_run["problem_hash"],
        })
    return 0


def cmd_diagnose(args) -> int:
    data_path = Path(args.data)
    try:
        data, rejected = glm.load_csv(data_path)
    except OSError as exc:
        raise ConfigError(f"cannot read dataset {data_path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"malformed dataset {data_path}: {exc}") from exc

    if args.fit == "self":
        fit = glm.fit(data)
    else:
        try:
            doc = json.loads(Path(args.fit).read_text(encoding="utf-8"))
            import numpy as np

            fit = glm.GlmFit(
                coef_hat=np.asarray(doc["coef_hat"], dtype=float),
                s2=float(doc["s2"]),
                v_theta=np.asarray(doc["v_theta"], dtype=float),
                dof=int(doc["dof"]),
            )
        except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load fit from {args.fit}: {exc}") from exc

    outdir = _out_dir(args, None, "diagnose-run")
    report = diagnostics.residual_report(
        fit, data, min_per_beta=args.min_per_beta, window=args.window, fit_beta=args.beta
    )
    diagnostics.save_report_json(report, outdir / "report.json")
    diagnostics.save_groups_csv(report, outdir / "groups.csv")
    if report.histogram is not None:
        diagnostics.save_histogram_csv(report, outdir / "histogram.csv")
    print(f"{len(report.per_beta)} groups retained, {len(report.dropped)} dropped, "
          f"{rejected} rows rejected at ingestion")
    if report.families is not None:
        print("family ranking:", " > ".join(report.families.ranking))
    return 0


def cmd_fixture_export(args) -> int:
    outdir = Path(args.out or "fixture-export")
    outdir.mkdir(parents=True, exist_ok=True)
    fixture = problems.build_static_fixture()
    written = problems.export_fixture(fixture, outdir)
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
