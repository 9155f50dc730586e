"""Command-line interface.

::

    tclid gen       [--config run.ini] [--out DIR] [--set section.key=value ...]
    tclid identify  ...
    tclid baseline  ...
    tclid compare   ...
    tclid scenario list

Exit codes: 0 success, 2 configuration or input error, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .config import build_experiment, load_run_config
from .errors import ConfigError, DimensionMismatchError, ModelError, NumericalAbort
from .identifier import differential_baseline, identify
from .scenarios import SCENARIOS, scenario_defaults

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _out_dir(args, rc) -> Path:
    out = Path(args.out) if args.out else rc.resolve(rc.get("run", "output_dir", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _channel_labels(exp):
    return list(exp.generator.channel_labels)


def _load_target(rc, exp, out):
    path = rc.get("identify", "target")
    path = rc.resolve(path) if path else out / "target.csv"
    if not path.exists():
        raise ConfigError(f"target file {path} not found; run 'tclid gen' first")
    states = None
    spath = path.with_name("states.csv")
    if spath.exists():
        _, states = io.read_states(spath)
    try:
        target = io.read_trace(path, x0=exp.x0, states=states)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if target.K != exp.truth.K or target.y.shape[1] != exp.generator.n_outputs:
        raise DimensionMismatchError(
            f"target {path} has shape {target.y.shape}, model expects "
            f"({exp.truth.K}, {exp.generator.n_outputs})"
        )
    if not np.isclose(target.dt, exp.truth.dt):
        raise DimensionMismatchError(f"target sample spacing {target.dt} differs from {exp.truth.dt}")
    return target


def cmd_gen(rc, out):
    exp = build_experiment(rc)
    io.write_trace(exp.target, out / "target.csv")
    io.write_states(exp.target.times, exp.target.states, out / "states.csv")
    io.write_schedule(exp.truth, _channel_labels(exp), out / "truth_schedule.csv")
    print(f"wrote {exp.target.K} samples to {out / 'target.csv'}")
    return EXIT_OK


def _run_identify(rc, exp, target, out):
    cfg = exp.config

    def progress(it, J, gnorm, scale):
        if cfg.log_every and it % cfg.log_every == 0:
            print(f"iter {it:6d}  J={J:.6e}  |grad|={gnorm:.3e}", file=sys.stderr)

    result = identify(exp.generator, target, cfg, x0=exp.x0, callback=progress)
    io.write_schedule(result.schedule, _channel_labels(exp), out / "result_schedule.csv")
    io.write_iterations(result, cfg.eps_R, cfg.eps_I, out / "iterations.csv")
    summary = {
        "termination": result.termination,
        "iterations_run": result.iterations_run,
        "initial_J": float(result.J_history[0]),
        "final_J": result.final_J,
        "wall_time_s": round(result.wall_time, 3),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(
        f"{result.termination} after {result.iterations_run} iterations: "
        f"J {summary['initial_J']:.6e} -> {result.final_J:.6e}"
    )
    return result


def cmd_identify(rc, out):
    exp = build_experiment(rc)
    _run_identify(rc, exp, _load_target(rc, exp, out), out)
    return EXIT_OK


def _run_baseline(rc, exp, target, out):
    scheme = rc.get("baseline", "scheme", "midpoint")
    real_only = rc.get("baseline", "real_only", exp.config.real_only)
    sched, flagged = differential_baseline(exp.generator, target, real_only=real_only, scheme=scheme)
    io.write_schedule(sched, _channel_labels(exp), out / "baseline_schedule.csv")
    if flagged.any():
        print(f"warning: {int(flagged.sum())} rank-deficient intervals carried over", file=sys.stderr)
    print(f"baseline ({scheme}) written to {out / 'baseline_schedule.csv'}")
    return sched


def cmd_baseline(rc, out):
    exp = build_experiment(rc)
    _run_baseline(rc, exp, _load_target(rc, exp, out), out)
    return EXIT_OK


def window_rmse(t_mid, estimate, truth, lo, hi):
    """RMSE of complex rate estimates over intervals whose midpoint lies in ``[lo, hi]``."""
    mask = (t_mid >= lo) & (t_mid <= hi)
    if not mask.any():
        return float("nan")
    return float(np.sqrt(np.mean(np.abs(estimate[mask] - truth[mask]) ** 2)))


def cmd_compare(rc, out):
    exp = build_experiment(rc)
    target = _load_target(rc, exp, out)
    result = _run_identify(rc, exp, target, out)
    base = _run_baseline(rc, exp, target, out)
    truth = exp.truth
    labels = _channel_labels(exp)
    header = ["t_start"]
    cols = [truth.t_start]
    for p, lab in enumerate(labels):
        g_t, g_g, g_d = truth.values[:, p], result.schedule.values[:, p], base.values[:, p]
        header += [
            f"gamma_true_{lab}",
            f"gamma_gradient_{lab}",
            f"gamma_differential_{lab}",
            f"err_gradient_{lab}",
            f"err_differential_{lab}",
        ]
        cols += [g_t.real, g_g.real, g_d.real, np.abs(g_g - g_t), np.abs(g_d - g_t)]
    io.write_table(out / "compare.csv", header, np.column_stack(cols))

    T = truth.dt * truth.K
    report = []
    for a, b in rc.windows():
        e_g = window_rmse(truth.t_mid, result.schedule.values, truth.values, a * T, b * T)
        e_d = window_rmse(truth.t_mid, base.values, truth.values, a * T, b * T)
        report.append({"window": [a * T, b * T], "rmse_gradient": e_g, "rmse_differential": e_d})
        print(f"window [{a * T:g}, {b * T:g}]  RMSE gradient={e_g:.3e}  differential={e_d:.3e}")
    (out / "compare.json").write_text(json.dumps(report, indent=2) + "\n")
    return EXIT_OK


def cmd_scenario_list(rc, out):
    for name in sorted(SCENARIOS):
        params = ", ".join(f"{k}={v}" for k, v in scenario_defaults(name).items())
        print(f"{name}: {params}")
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "identify": cmd_identify,
    "baseline": cmd_baseline,
    "compare": cmd_compare,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tclid", description="Identify time-varying damping rates of a TCL master equation."
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration file (INI)")
    common.add_argument("--out", help="output directory (default: [run] output_dir or ./out)")
    common.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override one config entry; may be repeated",
    )
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("gen", parents=[common], help="simulate the true model and write the target trace")
    sub.add_parser("identify", parents=[common], help="run gradient identification on a target")
    sub.add_parser("baseline", parents=[common], help="run the finite-difference baseline")
    sub.add_parser("compare", parents=[common], help="identify, run the baseline and score both")
    sc = sub.add_parser("scenario", help="built-in scenarios")
    sc.add_argument("action", choices=["list"])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command == "scenario":
        return cmd_scenario_list(None, None)
    try:
        rc = load_run_config(args.config, args.set)
        out = _out_dir(args, rc)
        return COMMANDS[args.command](rc, out)
    except (ConfigError, DimensionMismatchError, ModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
