"""Command-line runner: flow sweeps, cumulant predictions, and SVG figures.

Exit codes: 0 success, 2 configuration problem, 3 a flow diverged at runtime
(partial artifacts are kept with a FAILED marker in the trace).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .analysis import (
    SlopeEstimate,
    residual_to_csv,
    slope,
    slope_additivity_report,
    slopes_table_text,
    slopes_to_csv,
    theory_residual,
)
from .config import (
    ConfigError,
    ExperimentConfig,
    config_hash,
    load_config,
    resolve_config_path,
)
from .cumulant import (
    build_table,
    cumulants_to_csv,
    kl_series_error,
)
from .flow import FlowDiverged, RunSpec, run
from .grid import make_grid
from .measure import check_assumptions, from_potential
from .plots import plot_divergences, plot_energies
from .trace import trace_from_csv, trace_to_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _specs_for(cfg: ExperimentConfig) -> list[RunSpec]:
    specs = []
    for kind in cfg.flows:
        for init in cfg.inits:
            specs.append(
                RunSpec(
                    kind=kind,
                    target=cfg.target,
                    init=init,
                    n=cfg.n,
                    eps=cfg.eps.get(kind),
                    T=cfg.T[kind],
                    record_dt=cfg.record_dt,
                    q_list=cfg.q_list,
                    v_derivatives=cfg.v_derivatives,
                    renormalize_w=cfg.w_renormalize,
                    force_cfl=cfg.force_cfl,
                )
            )
    return specs


def _execute_run(spec: RunSpec) -> dict:
    """Run one flow; never raises for divergence so results survive a worker pool."""
    start = time.perf_counter()
    try:
        trace = run(spec)
        status, error = "ok", None
    except FlowDiverged as exc:
        trace, status, error = exc.trace, "failed", str(exc)
    return {
        "kind": spec.kind,
        "init_label": spec.init.label,
        "trace": trace,
        "status": status,
        "error": error,
        "wall_s": time.perf_counter() - start,
    }


def cmd_run(args) -> int:
    overrides: dict = {}
    if args.force_cfl:
        overrides["force_cfl"] = True
    if args.out:
        overrides["output_dir"] = args.out
    cfg = load_config(resolve_config_path(args.config), overrides)

    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    specs = _specs_for(cfg)
    total_start = time.perf_counter()
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_execute_run, specs, chunksize=1))
    else:
        results = [_execute_run(spec) for spec in specs]

    grid = make_grid(cfg.n)
    pi = from_potential(cfg.target, grid)
    tables = {
        init.label: build_table(from_potential(init, grid), pi, cfg.cumulant_order)
        for init in cfg.inits
    }

    slopes: dict[str, dict[str, SlopeEstimate]] = {}
    manifest_runs = []
    any_failed = False
    for res in results:
        kind, init_label, trace = res["kind"], res["init_label"], res["trace"]
        trace_name = f"trace_{kind}_{init_label}.csv"
        trace_to_csv(trace, out_dir / trace_name)
        entry = {
            "flow": kind,
            "init": init_label,
            "trace": trace_name,
            "status": res["status"],
            "wall_s": round(res["wall_s"], 3),
        }
        if res["status"] == "failed":
            any_failed = True
            entry["error"] = res["error"]
            entry["failed_t"] = trace.meta.get("failed_t")
            print(f"{kind} from {init_label}: FAILED ({res['error']})", file=sys.stderr)
        else:
            window = cfg.slope_windows.get(kind)
            if window is not None:
                try:
                    est = slope(trace, *window)
                    slopes.setdefault(kind, {})[init_label] = est
                    entry["slope"] = {
                        "value": est.value,
                        "t1": est.t1,
                        "t2": est.t2,
                        "kl_t1": est.kl1,
                        "kl_t2": est.kl2,
                    }
                except ValueError as exc:
                    entry["slope_error"] = str(exc)
            line = f"{kind} from {init_label}: {trace.t.size} rows, wall {res['wall_s']:.1f}s"
            if "slope" in entry:
                line += f", slope {entry['slope']['value']:+.4f} on ({est.t1:g}, {est.t2:g})"
            print(line)
        manifest_runs.append(entry)

    residual_files = []
    for res in results:
        kind, init_label = res["kind"], res["init_label"]
        if kind in ("FR", "FR_exact") and res["status"] == "ok":
            report = theory_residual(res["trace"], tables[init_label], cfg.cumulant_order)
            name = f"residual_{kind}_{init_label}.csv"
            residual_to_csv(report, out_dir / name)
            residual_files.append(name)

    additivity = []
    if slopes:
        slopes_to_csv(slopes, out_dir / "slopes.csv")
        text = slopes_table_text(slopes, title=f"log-KL slopes, target {cfg.target.label}")
        for init in cfg.inits:
            label = init.label
            if all(label in slopes.get(k, {}) for k in ("FR", "W", "WFR")):
                rep = slope_additivity_report(
                    slopes["FR"][label], slopes["W"][label], slopes["WFR"][label]
                )
                additivity.append(
                    {
                        "init": label,
                        "fr": rep.fr,
                        "w": rep.w,
                        "wfr": rep.wfr,
                        "discrepancy": rep.discrepancy,
                        "relative": rep.relative,
                    }
                )
                text += (
                    f"additivity {label}: wfr - (fr + w) = {rep.discrepancy:+.4f} "
                    f"(relative {rep.relative:+.4f})\n"
                )
        (out_dir / "slopes.txt").write_text(text)
        print(text, end="")

    manifest = {
        "version": __version__,
        "config_hash": config_hash(cfg),
        "config_file": str(args.config),
        "grid": {"n": grid.n, "h": grid.h},
        "record_dt": cfg.record_dt,
        "runs": manifest_runs,
        "residual_files": residual_files,
        "additivity": additivity,
        "total_wall_s": round(time.perf_counter() - total_start, 3),
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
    print(f"artifacts written to {out_dir}")
    return EXIT_RUNTIME if any_failed else EXIT_OK


def cmd_predict(args) -> int:
    overrides = {"output_dir": args.out} if args.out else {}
    cfg = load_config(resolve_config_path(args.config), overrides)
    labels = [p.label for p in cfg.inits]
    if args.init is None:
        if len(cfg.inits) != 1:
            raise ConfigError(
                [f"config has {len(labels)} inits ({', '.join(labels)}); pick one with --init"]
            )
        init = cfg.inits[0]
    else:
        matches = [p for p in cfg.inits if p.label == args.init]
        if not matches:
            raise ConfigError([f"no init named {args.init!r}; known: {', '.join(labels)}"])
        init = matches[0]

    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = make_grid(cfg.n)
    pi = from_potential(cfg.target, grid)
    rho0 = from_potential(init, grid)
    order = cfg.cumulant_order
    table = build_table(rho0, pi, max_order=min(16, order + 1))
    kappa2 = float(table.kappas[1])

    cumulants_to_csv(table, out_dir / f"cumulants_{init.label}.csv")

    horizon = max(cfg.T.values())
    n_rows = max(1, round(horizon / cfg.record_dt))
    with open(out_dir / f"prediction_{init.label}.csv", "w") as fh:
        fh.write("t,kl_pred,tail_estimate\n")
        for j in range(n_rows + 1):
            t = j * cfg.record_dt
            pred = 0.5 * kappa2 * math.exp(-2.0 * t)
            tail = kl_series_error(table, t, order) if order + 1 <= table.max_order else float("nan")
            fh.write(f"{t:.17g},{pred:.17g},{tail:.17g}\n")

    report = check_assumptions(rho0, pi, alpha=args.alpha)
    lines = [
        f"target: {cfg.target.label}",
        f"init:   {init.label}",
        f"alpha:  {report.alpha:g}",
        f"tail domination margin min(log rho0 - (1+alpha) log pi): {report.a2_margin:.6g}"
        f"  -> {'ok' if report.a2_passes else 'VIOLATED'}",
        "mean target energy under pi (up to additive normalizer): "
        f"{report.a1_mean_potential:.6g}  -> {'finite' if report.a1_finite else 'NOT finite'}",
        f"one-sided bound M = max(log pi - log rho0): {report.m_constant:.6g}",
        f"kappa_2: {kappa2:.17g}",
    ]
    (out_dir / f"assumptions_{init.label}.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    print(f"artifacts written to {out_dir}")
    return EXIT_OK


def cmd_plot(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    wrote = []
    if args.energies:
        cfg = load_config(resolve_config_path(args.energies))
        grid = make_grid(cfg.n)
        curves = [(cfg.target.label, cfg.target)] + [(p.label, p) for p in cfg.inits]
        wrote.append(plot_energies(curves, grid, out_dir / "energies.svg"))
    if args.traces:
        traces = [trace_from_csv(p) for p in args.traces]
        name = "kl.svg" if args.column == "kl" else f"{args.column}.svg"
        wrote.append(
            plot_divergences(
                traces, out_dir / name, overlay=not args.no_overlay, column=args.column
            )
        )
    if not wrote:
        raise ConfigError(["nothing to plot: pass trace CSVs and/or --energies CONFIG"])
    for path in wrote:
        print(f"wrote {path}")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gradflow",
        description="Gradient flows of relative entropy on a periodic grid.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="integrate the configured flows and write traces")
    p_run.add_argument("--config", required=True, help="config file path or bundled preset name")
    p_run.add_argument("--out", default=None, help="output directory (overrides config)")
    p_run.add_argument("--workers", type=int, default=1, help="parallel runs (default 1)")
    p_run.add_argument(
        "--force-cfl",
        action="store_true",
        help="run transport flows even above the h^2/8 stability guard",
    )
    p_run.set_defaults(func=cmd_run)

    p_pred = sub.add_parser("predict", help="cumulant table, decay prediction, diagnostics")
    p_pred.add_argument("--config", required=True)
    p_pred.add_argument("--out", default=None)
    p_pred.add_argument("--init", default=None, help="which configured init to analyze")
    p_pred.add_argument("--alpha", type=float, default=0.0, help="tail-domination exponent")
    p_pred.set_defaults(func=cmd_predict)

    p_plot = sub.add_parser("plot", help="render SVG figures from traces")
    p_plot.add_argument("traces", nargs="*", help="trace CSV files")
    p_plot.add_argument("--out", default=".", help="output directory")
    p_plot.add_argument("--column", default="kl", help="trace column to plot (default kl)")
    p_plot.add_argument("--no-overlay", action="store_true", help="skip the dotted decay reference")
    p_plot.add_argument("--energies", default=None, help="config whose potentials to plot")
    p_plot.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    if os.environ.get("GRADFLOW_SEED") is not None:
        print(
            "warning: GRADFLOW_SEED is ignored; all computations are deterministic",
            file=sys.stderr,
        )
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FlowDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
