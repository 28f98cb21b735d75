"""Command-line surface: certification, training, simulation, and the
four-controller comparison, all driven by one JSON scenario config.

Exit codes: 0 success, 1 domain failure (certification fail, safety violation,
training divergence), 2 usage or config error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import dpc
from .barrier import certify_sdzcbf1, certify_sdzcbf2, estimate_constants
from .model import discretize
from .safety_filter import FilterConfig, analytic_backup
from .scenario import ConfigError, Scenario, build_scenario, load_config
from .sim import (SimConfig, compute_metrics, run_closed_loop,
                  write_metrics, write_trajectory_csv)

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2


def _out_dir(scn: Scenario, override: str | None) -> Path:
    d = Path(override) if override else Path(scn.config["run"]["output_dir"])
    d.mkdir(parents=True, exist_ok=True)
    return d


def _certify(scn: Scenario):
    consts = estimate_constants(scn.barrier, scn.sys, scn.input_set,
                                scn.disturbance.w_bar, scn.dt, scn.grid)

    def backup(x, t):
        return analytic_backup(scn.corridor, scn.sys, consts, x, t)

    report2 = certify_sdzcbf2(scn.barrier, scn.sys, scn.input_set, consts,
                              backup, scn.grid)
    consts_d = estimate_constants(scn.barrier, scn.sys, scn.input_set,
                                  scn.disturbance.w_bar, scn.dt, scn.grid,
                                  region="domain")
    report1 = certify_sdzcbf1(scn.barrier, scn.sys, scn.input_set, consts_d,
                              backup, scn.grid)
    return consts, report2, report1


def cmd_certify(scn: Scenario, out_dir: Path) -> int:
    _, report2, report1 = _certify(scn)
    text = ("== operative condition (annulus) ==\n" + report2.to_text()
            + "\n== whole-domain comparison ==\n" + report1.to_text())
    (out_dir / "cert_report.txt").write_text(text)
    with open(out_dir / "cert_summary.json", "w") as fh:
        json.dump({"annulus": report2.to_dict(), "domain": report1.to_dict()},
                  fh, indent=2)
    print(text, end="")
    return EXIT_OK if report2.passed else EXIT_DOMAIN


def _train_one(scn: Scenario, mode: str, out_dir: Path):
    tc = scn.training
    if mode != tc.reference_mode:
        from dataclasses import replace
        tc = replace(tc, reference_mode=mode)
    model = discretize(scn.sys, scn.dt)
    net, curve = dpc.train(tc, model, scn.barrier, scn.loss_weights,
                           input_set=scn.input_set)
    wpath = out_dir / f"weights_{mode}.txt"
    cpath = out_dir / f"training_curve_{mode}.csv"
    dpc.save_weights(net, wpath, seed=tc.seed, reference_mode=mode)
    dpc.save_training_curve(curve, cpath)
    return net, curve, wpath, cpath


def cmd_train(scn: Scenario, out_dir: Path, reference_mode: str | None) -> int:
    mode = reference_mode or scn.training.reference_mode
    try:
        net, curve, wpath, cpath = _train_one(scn, mode, out_dir)
    except dpc.TrainingDivergedError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DOMAIN
    if curve:
        last = curve[-1]
        print(f"final losses: total={last['total']:.6g} "
              f"tracking={last['tracking']:.6g} effort={last['effort']:.6g} "
              f"state_pen={last['state_pen']:.6g} "
              f"input_pen={last['input_pen']:.6g} "
              f"barrier_pen={last['barrier_pen']:.6g} "
              f"validation={last['validation']:.6g}")
    else:
        print("no training epochs run; saved the initialized network")
    print(f"weights: {wpath}")
    print(f"training curve: {cpath}")
    return EXIT_OK


def _simulate_one(scn: Scenario, controller: str, policy, out_dir: Path,
                  tag: str | None = None):
    consts = estimate_constants(scn.barrier, scn.sys, scn.input_set,
                                scn.disturbance.w_bar, scn.dt, scn.grid)

    def backup(x, t):
        return analytic_backup(scn.corridor, scn.sys, consts, x, t)

    fcfg = FilterConfig(barrier=scn.barrier, constants=consts,
                        input_set=scn.input_set, sys=scn.sys,
                        fallback="use-backup", backup=backup)
    cfg = SimConfig(sys=scn.sys, disturbance=scn.disturbance,
                    controller=controller, dt=scn.dt, t_end=scn.t_end,
                    x0=np.zeros(scn.sys.n_x), substeps=scn.substeps)
    log = run_closed_loop(cfg, policy=policy, filter_cfg=fcfg)
    metrics = compute_metrics(log, scn.corridor)
    tag = tag or controller.replace("+", "_")
    write_trajectory_csv(log, out_dir / f"trajectory_{tag}.csv")
    write_metrics(metrics, out_dir / f"metrics_{tag}.txt")
    return log, metrics


def cmd_simulate(scn: Scenario, out_dir: Path, controller: str,
                 weights: str | None) -> int:
    policy = None
    if controller in ("policy-only", "policy+filter"):
        if weights is None:
            print("error: this controller mode needs --weights",
                  file=sys.stderr)
            return EXIT_USAGE
        policy, _ = dpc.load_weights(weights)
    _, metrics = _simulate_one(scn, controller, policy, out_dir)
    print(f"min_h={metrics.min_h:.6g}")
    print(f"trigger_fraction={metrics.trigger_fraction:.6g}")
    return EXIT_OK


FIG2_RUNS = (
    # (label, controller, which trained policy)
    ("blue", "backup-only+filter", None),
    ("gold", "policy+filter", "true"),
    ("green", "policy-only", "zero"),
    ("purple", "policy+filter", "zero"),
)


def cmd_scenario_fig2(scn: Scenario, out_dir: Path) -> int:
    stage = "train"
    try:
        nets = {}
        for mode in ("true", "zero"):
            nets[mode], _, _, _ = _train_one(scn, mode, out_dir)
        stage = "simulate"
        rows = []
        for label, controller, mode in FIG2_RUNS:
            policy = nets[mode] if mode else None
            _, metrics = _simulate_one(scn, controller, policy, out_dir,
                                       tag=label)
            rows.append((label, controller, metrics))
    except Exception as err:
        print(f"error in stage {stage}: {err}", file=sys.stderr)
        return EXIT_DOMAIN

    header = (f"{'run':8s} {'controller':22s} {'min_h':>12s} "
              f"{'trigger_frac':>13s} {'rms_error':>12s} {'max_input':>10s}")
    lines = [header]
    for label, controller, m in rows:
        lines.append(f"{label:8s} {controller:22s} {m.min_h:12.6f} "
                     f"{m.trigger_fraction:13.4f} "
                     f"{m.rms_tracking_error:12.6f} {m.max_input_norm:10.4f}")
    table = "\n".join(lines) + "\n"
    (out_dir / "fig2_summary.txt").write_text(table)
    with open(out_dir / "fig2_summary.csv", "w") as fh:
        fh.write("run,controller,min_h,trigger_fraction,rms_error,max_input\n")
        for label, controller, m in rows:
            fh.write(f"{label},{controller},{m.min_h!r},"
                     f"{m.trigger_fraction!r},{m.rms_tracking_error!r},"
                     f"{m.max_input_norm!r}\n")
    print(table, end="")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="safedpc",
        description="Barrier-certified differentiable predictive control")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_text in (
            ("certify", "check the sampled-data barrier conditions"),
            ("train", "train the receding-horizon policy offline"),
            ("simulate", "run one closed-loop simulation"),
            ("scenario-fig2", "four-controller comparison on one scenario")):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", type=str, default=None,
                        help="JSON scenario config (defaults embedded)")
        sp.add_argument("--output-dir", type=str, default=None)
        sp.add_argument("--seed", type=int, default=None,
                        help="override the config seeds")
        sp.add_argument("--dump-effective-config", action="store_true",
                        help="print the merged config as JSON and exit")
    sub.choices["train"].add_argument(
        "--reference-mode", choices=("true", "zero"), default=None)
    sub.choices["simulate"].add_argument(
        "--controller", default=None,
        choices=("zero-policy+filter", "policy-only", "policy+filter",
                 "backup-only+filter"))
    sub.choices["simulate"].add_argument("--weights", type=str, default=None)
    return p


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        scn = build_scenario(cfg, seed_override=args.seed)
    except (ConfigError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    if args.dump_effective_config:
        print(json.dumps(scn.config, indent=2, sort_keys=True))
        return EXIT_OK
    out_dir = _out_dir(scn, args.output_dir)
    if args.command == "certify":
        return cmd_certify(scn, out_dir)
    if args.command == "train":
        return cmd_train(scn, out_dir, args.reference_mode)
    if args.command == "simulate":
        controller = args.controller or scn.config["run"]["mode"]
        return cmd_simulate(scn, out_dir, controller, args.weights)
    if args.command == "scenario-fig2":
        return cmd_scenario_fig2(scn, out_dir)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
