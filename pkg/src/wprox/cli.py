#!/usr/bin/env python3
"""
wprox — Command-Line Interface
==============================

Sub-commands:

  train         Adversarial training sweeps over penalties and seeds.
  metric        Proximal penalty between two generator snapshots.
  flow          Gradient-flow integration of the 1-D Gaussian model.
  toy-example1  Two-point mixture divergences and proximal update directions.
  eval          Sample-quality metric of a snapshot against a target.

Usage::

    wprox train --config ring.cfg --penalty rwp,o1sbe,o2diag,none --seeds 5 --plot
    wprox metric --kind rwp --snapshot s1 --snapshot s2 --seed 7
    wprox flow --scheme sbe --penalty o2diag --h 0.1 --steps 50 --output flow.csv
    wprox toy-example1 --alpha 0.5 --output-dir example1
    wprox eval --snapshot s1 --config ring.cfg --metric frechet-gaussian

Exit codes: 0 success, 1 other library error, 2 configuration error,
3 numeric divergence.

Author: wprox developers
"""

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

import pandas as pd

from wprox import __version__
from wprox.config import ExperimentConfig, load_config
from wprox.evaluation import METRIC_TAGS, evaluate_metric
from wprox.exceptions import ConfigurationError, DivergenceError, WproxError
from wprox.experiments import example1_report, gaussian_flow, load_snapshot, run_experiment
from wprox.metric import Midpoint, parse_penalty
from wprox.models import LatentSource, TargetSpec
from wprox.optim import SCHEMES, SOLVE_MODES, FlowConfig, InnerOptimizer

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wprox",
        description="Wasserstein natural-gradient and proximal optimization for implicit generative models.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--verbose", "-v", action="count", default=0,
        help="Log progress (-v for INFO, -vv for DEBUG).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    # ---- train ---------------------------------------------------------------
    train_p = sub.add_parser("train", help="Train generators over penalties and seeds.")
    train_p.add_argument("--config", "-c", default=None, help="Experiment config file (key = value).")
    train_p.add_argument("--penalty", default=None, help="Comma-separated penalties, e.g. rwp,o1sbe,none.")
    train_p.add_argument("--seeds", type=int, default=None, help="Number of seeds (0..N-1).")
    train_p.add_argument("--output-dir", "-o", default=None, help="Directory for logs, snapshots, plots.")
    train_p.add_argument("--plot", action="store_true", help="Write SVG plots.")
    train_p.add_argument("--workers", type=int, default=None, help="Parallel worker processes.")
    train_p.add_argument("--outer-iterations", type=int, default=None, help="Override train.outer_iterations.")

    # ---- metric --------------------------------------------------------------
    metric_p = sub.add_parser("metric", help="Penalty D(theta, theta_k)^2 between two snapshots.")
    metric_p.add_argument("--kind", default="rwp",
                          help="rwp, o1sbe, o2diag, exact1d, none, affine1, affine2d or affine2f.")
    metric_p.add_argument("--snapshot", action="append", required=True,
                          help="Snapshot file; give twice (theta, then theta_k).")
    metric_p.add_argument("--seed", type=int, default=0, help="Latent seed (default: 0).")
    metric_p.add_argument("--batch-size", type=int, default=1024, help="Latent batch size (default: 1024).")
    metric_p.add_argument("--midpoint", choices=[m.value for m in Midpoint], default=Midpoint.PREVIOUS.value)
    metric_p.add_argument("--damping", type=float, default=None, help="Damping for affine penalties.")

    # ---- flow ----------------------------------------------------------------
    flow_p = sub.add_parser("flow", help="Integrate the 1-D Gaussian gradient flow.")
    flow_p.add_argument("--scheme", choices=SCHEMES, default="sbe")
    flow_p.add_argument("--penalty", default="rwp", help="Penalty for the semi-backward scheme.")
    flow_p.add_argument("--h", type=float, default=0.1, help="Step size (default: 0.1).")
    flow_p.add_argument("--steps", type=int, default=50, help="Outer steps (default: 50).")
    flow_p.add_argument("--inner-iterations", type=int, default=20, help="Inner optimizer steps.")
    flow_p.add_argument("--solve", choices=SOLVE_MODES, default="fixed")
    flow_p.add_argument("--lr", type=float, default=0.05, help="Inner Adam learning rate.")
    flow_p.add_argument("--midpoint", choices=[m.value for m in Midpoint], default=Midpoint.PREVIOUS.value)
    flow_p.add_argument("--mu0", type=float, default=0.0)
    flow_p.add_argument("--sigma0", type=float, default=1.0)
    flow_p.add_argument("--target-mean", type=float, default=2.0)
    flow_p.add_argument("--target-std", type=float, default=0.5)
    flow_p.add_argument("--batch-size", type=int, default=256)
    flow_p.add_argument("--seed", type=int, default=0)
    flow_p.add_argument("--output", "-o", default=None, help="Trajectory CSV (default: print).")

    # ---- toy-example1 --------------------------------------------------------
    toy_p = sub.add_parser("toy-example1", help="Two-point mixture report and update-direction grid.")
    toy_p.add_argument("--alpha", type=float, default=0.5, help="Mixture ratio (default: 0.5).")
    toy_p.add_argument("--h", type=float, default=0.5, help="Proximal step size (default: 0.5).")
    toy_p.add_argument("--points", type=int, default=21, help="Grid points per axis (default: 21).")
    toy_p.add_argument("--output-dir", "-o", default=".", help="Directory for the grid CSV.")
    toy_p.add_argument("--plot", action="store_true", help="Write the quiver plot as SVG.")

    # ---- eval ----------------------------------------------------------------
    eval_p = sub.add_parser("eval", help="Quality metric of a snapshot or a sample file.")
    eval_p.add_argument("--metric", choices=METRIC_TAGS, default="frechet-gaussian")
    eval_p.add_argument("--snapshot", default=None, help="Generator snapshot to sample from.")
    eval_p.add_argument("--config", "-c", default=None, help="Config whose target is the reference.")
    eval_p.add_argument("--samples", default=None, help="CSV of generated samples (instead of --snapshot).")
    eval_p.add_argument("--reference", default=None, help="CSV of reference samples (instead of --config).")
    eval_p.add_argument("--batch-size", type=int, default=512)
    eval_p.add_argument("--seed", type=int, default=0)

    return parser


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity == 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def cmd_train(args: argparse.Namespace) -> int:
    """Execute the 'train' sub-command."""
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides: dict = {}
    if args.penalty:
        overrides["penalties"] = tuple(p.strip() for p in args.penalty.split(",") if p.strip())
    if args.seeds is not None:
        if args.seeds < 1:
            raise ConfigurationError(f"--seeds must be >= 1, got {args.seeds}")
        overrides["seeds"] = tuple(range(args.seeds))
    if args.output_dir:
        overrides["output_dir"] = args.output_dir
    if args.plot:
        overrides["plot"] = True
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.outer_iterations is not None:
        overrides["train"] = replace(cfg.train, outer_iterations=args.outer_iterations)
    cfg = replace(cfg, **overrides)

    result = run_experiment(cfg)
    print(f"Experiment: {cfg.name}")
    for run in result.runs:
        print(f"  {run.penalty:10s} seed {run.seed:<3d} final {cfg.train.eval_metric} {run.final_metric:.6g}")
    for f in result.files:
        print(f"  -> {f}")
    return EXIT_OK


def cmd_metric(args: argparse.Namespace) -> int:
    """Execute the 'metric' sub-command."""
    if len(args.snapshot) != 2:
        raise ConfigurationError(f"metric needs exactly two --snapshot files, got {len(args.snapshot)}")
    spec, gen = load_snapshot(args.snapshot[0])
    spec_k, gen_k = load_snapshot(args.snapshot[1])
    if gen.theta.layout != gen_k.theta.layout or spec.kind != spec_k.kind:
        raise ConfigurationError("Snapshots describe different generators")
    penalty = replace(parse_penalty(args.kind), midpoint=Midpoint(args.midpoint), damping=args.damping)
    latents = LatentSource(gen.latent_dim, gen.latent_distribution, seed=args.seed).draw(args.batch_size)
    value = float(penalty.as_function(gen_k, gen_k.theta, latents)(gen.theta.values))
    print(f"{value:.12g}")
    return EXIT_OK


def cmd_flow(args: argparse.Namespace) -> int:
    """Execute the 'flow' sub-command."""
    penalty = replace(parse_penalty(args.penalty), midpoint=Midpoint(args.midpoint))
    cfg = FlowConfig(h=args.h, inner_iterations=args.inner_iterations, penalty=penalty,
                     max_outer=args.steps, solve=args.solve)
    inner = InnerOptimizer("adam", args.lr, 0.9, 0.999)
    traj = gaussian_flow(cfg, args.scheme, args.mu0, args.sigma0, args.target_mean, args.target_std,
                         args.batch_size, args.seed, inner=inner)
    if args.output:
        traj.to_csv(args.output)
        mu, sigma = traj.thetas[-1]
        print(f"Final mu={mu:.6g} sigma={sigma:.6g} F={traj.rows[-1]['F']:.6g}")
        print(f"  -> {args.output}")
    else:
        print(traj.to_frame().to_string(index=False))
    return EXIT_OK


def cmd_toy_example1(args: argparse.Namespace) -> int:
    """Execute the 'toy-example1' sub-command."""
    report = example1_report(alpha=args.alpha, h=args.h, points=args.points)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid_path = out / "example1_grid.csv"
    report.grid.to_csv(grid_path, index=False)
    print(report.format())
    print(f"  -> {grid_path}")
    if args.plot:
        from wprox.plotting import plot_example1_field

        print(f"  -> {plot_example1_field(report, out / 'example1.svg')}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    """Execute the 'eval' sub-command."""
    if args.samples:
        fake = pd.read_csv(args.samples).to_numpy(dtype=float)
    elif args.snapshot:
        _, gen = load_snapshot(args.snapshot)
        latents = LatentSource(gen.latent_dim, gen.latent_distribution, seed=args.seed, stream=2)
        fake = gen.forward(latents.draw(args.batch_size).values)
    else:
        raise ConfigurationError("eval needs --snapshot or --samples")

    if args.reference:
        real = pd.read_csv(args.reference).to_numpy(dtype=float)
    else:
        target = load_config(args.config).target if args.config else TargetSpec()
        real = target.sample(len(fake), draw_index=0, stream=4).values
    print(f"{evaluate_metric(args.metric, fake, real):.12g}")
    return EXIT_OK


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose)

    dispatch = {
        "train": cmd_train,
        "metric": cmd_metric,
        "flow": cmd_flow,
        "toy-example1": cmd_toy_example1,
        "eval": cmd_eval,
    }

    handler = dispatch.get(args.command)
    if handler is None:
        parser.print_help()
        return EXIT_ERROR

    try:
        return handler(args)
    except ConfigurationError as exc:
        print(f"Configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"Diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except WproxError as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
