#!/usr/bin/env python3
"""
Experiment Harness
==================

Runs that leave artifacts on disk:

  run_experiment        one training run per (penalty, seed) pair, sequential or
                        on a process pool; writes one log CSV and one generator
                        snapshot per run, then the envelope summary and plots
  example1_report       the two-point mixture comparisons: divergence table and
                        Euclidean vs Wasserstein proximal update directions on a
                        parameter grid
  gaussian_flow         gradient-flow integration for the 1-D Gaussian model

File names follow ``<name>_<penalty>_seed<seed>.csv`` and
``<name>_<penalty>_seed<seed>.snapshot``.

Author: wprox developers
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

from wprox.adversarial import Discriminator, PotentialNetwork, TrainLog, train_algorithm1, train_algorithm2
from wprox.config import ExperimentConfig, ModelSpec, parse_dataclass, serialize_dataclass
from wprox.exceptions import ConfigurationError
from wprox.metric import (
    DivergenceRecord,
    PenaltyKind,
    delta_mixture_distances,
    parse_penalty,
    relaxed_metric_tensor,
)
from wprox.models import DeltaMixtureModel, Generator, LatentSource, gaussian_w2sq_objective
from wprox.optim import FlowConfig, InnerOptimizer, Trajectory, flow_integrate, proximal_weighted_l1
from wprox.params import ParamVector

logger = logging.getLogger(__name__)

EXAMPLE1_COLUMNS = ["a", "b", "F", "euclid_dx", "euclid_dy", "wass_dx", "wass_dy"]
ENVELOPE_COLUMNS = ["penalty", "outer_iter", "wallclock_s", "mean", "min", "max", "seeds"]
SNAPSHOT_MAGIC = "# wprox generator snapshot"


# ---------------------------------------------------------------------------
# snapshots
# ---------------------------------------------------------------------------

def save_snapshot(spec: ModelSpec, gen: Generator, path: Union[str, Path]) -> Path:
    """
    Write θ as text, one value per line, under a commented header holding the
    generator spec and the parameter layout.
    """
    path = Path(path)
    header = [SNAPSHOT_MAGIC]
    header += [f"# {line}" for line in serialize_dataclass(spec).splitlines()]
    header.append(f"# layout = {gen.theta.layout_header()}")
    body = [repr(float(v)) for v in gen.theta.values]
    path.write_text("\n".join(header + body) + "\n")
    logger.info("Wrote snapshot (%d parameters) to %s", len(body), path)
    return path


def load_snapshot(path: Union[str, Path]) -> tuple[ModelSpec, Generator]:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or lines[0].strip() != SNAPSHOT_MAGIC:
        raise ConfigurationError(f"{path} is not a generator snapshot")
    spec_lines: list[str] = []
    layout_text: Optional[str] = None
    values: list[float] = []
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            entry = line.lstrip("#").strip()
            if entry.startswith("layout ="):
                layout_text = entry.split("=", 1)[1].strip()
            else:
                spec_lines.append(entry)
            continue
        try:
            values.append(float(line))
        except ValueError as exc:
            raise ConfigurationError(f"{path}: line {lineno}: expected a number, got {line!r}") from exc
    if layout_text is None:
        raise ConfigurationError(f"{path}: missing layout header")

    spec = parse_dataclass(ModelSpec, "\n".join(spec_lines))
    base = spec.build()
    layout = ParamVector.parse_layout_header(layout_text)
    if layout != base.theta.layout:
        raise ConfigurationError(f"{path}: layout does not match the {spec.kind} generator it describes")
    return spec, base.with_theta(np.asarray(values))


# ---------------------------------------------------------------------------
# training sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunResult:
    penalty: str
    seed: int
    log_path: Path
    snapshot_path: Path
    final_metric: float


@dataclass
class ExperimentResult:
    runs: list[RunResult] = field(default_factory=list)
    summary_path: Optional[Path] = None
    envelope_path: Optional[Path] = None
    plots: list[Path] = field(default_factory=list)

    @property
    def files(self) -> list[Path]:
        out = [p for r in self.runs for p in (r.log_path, r.snapshot_path)]
        out += [p for p in (self.summary_path, self.envelope_path) if p is not None]
        return out + self.plots


def _run_stem(cfg: ExperimentConfig, label: str, seed: int) -> str:
    return f"{cfg.name}_{label}_seed{seed}"


def train_single(cfg: ExperimentConfig, label: str, seed: int) -> TrainLog:
    """One training run: generator initialized from ``model.init_seed + seed``."""
    spec = replace(cfg.model, init_seed=cfg.model.init_seed + seed)
    gen = spec.build()
    train_cfg = replace(cfg.train, penalty=parse_penalty(label), seed=seed)
    disc = None
    if train_cfg.loss_mode == "vanilla":
        disc = Discriminator.mlp(gen.output_dim, cfg.discriminator_hidden,
                                 cfg.discriminator_leaky_slope, seed)
    if cfg.algorithm == 2:
        pot = PotentialNetwork.create(train_cfg.potential_kind, gen.output_dim,
                                      train_cfg.potential_width, seed)
        return train_algorithm2(gen, disc, pot, cfg.target, train_cfg)
    return train_algorithm1(gen, disc, cfg.target, train_cfg)


def _run_job(job: tuple[ExperimentConfig, str, int]) -> RunResult:
    cfg, label, seed = job
    out = Path(cfg.output_dir)
    stem = _run_stem(cfg, label, seed)
    log = train_single(cfg, label, seed)
    log_path = log.to_csv(out / f"{stem}.csv")
    spec = replace(cfg.model, init_seed=cfg.model.init_seed + seed)
    snap = save_snapshot(spec, log.generator, out / f"{stem}.snapshot")
    series = log.eval_series()
    final = float(series["eval_metric"].iloc[-1]) if len(series) else math.nan
    return RunResult(label, seed, log_path, snap, final)


def envelope_frame(runs: list[RunResult]) -> pd.DataFrame:
    """
    Min, mean and max of the evaluation metric over seeds, per penalty and
    outer iteration; wallclock is the mean over seeds at that iteration.
    """
    frames = []
    for r in runs:
        series = pd.read_csv(r.log_path).dropna(subset=["eval_metric"])
        frames.append(series.assign(penalty=r.penalty, seed=r.seed))
    if not frames:
        return pd.DataFrame(columns=ENVELOPE_COLUMNS)
    long = pd.concat(frames, ignore_index=True)
    grouped = long.groupby(["penalty", "outer_iter"], sort=True)
    env = grouped.agg(
        wallclock_s=("wallclock_s", "mean"),
        mean=("eval_metric", "mean"),
        min=("eval_metric", "min"),
        max=("eval_metric", "max"),
        seeds=("seed", "nunique"),
    ).reset_index()
    return env[ENVELOPE_COLUMNS]


def summarize_runs(runs: list[RunResult]) -> pd.DataFrame:
    """Final metric per penalty across seeds."""
    frame = pd.DataFrame(
        [{"penalty": r.penalty, "seed": r.seed, "final_metric": r.final_metric} for r in runs]
    )
    summary = frame.groupby("penalty", sort=False)["final_metric"].agg(["mean", "std", "min", "max", "count"])
    return summary.reset_index()


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """
    Train every (penalty, seed) pair of ``cfg`` and write the artifacts.

    With ``cfg.workers > 1`` runs go to a process pool, one run per task; each
    run owns its RNG streams and output files. The summary and plots are
    produced afterwards in this process.
    """
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigurationError(f"Cannot create output directory {out}: {exc}") from exc

    labels = [parse_penalty(p).label for p in cfg.penalties]
    jobs = [(cfg, label, seed) for label in labels for seed in cfg.seeds]
    logger.info("Running %d training runs (%d penalties x %d seeds) with %d worker(s)",
                len(jobs), len(labels), len(cfg.seeds), cfg.workers)
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            runs = list(pool.map(_run_job, jobs))
    else:
        runs = [_run_job(job) for job in jobs]

    result = ExperimentResult(runs)
    summary = summarize_runs(runs)
    result.summary_path = out / f"{cfg.name}_summary.csv"
    summary.to_csv(result.summary_path, index=False)
    env = envelope_frame(runs)
    result.envelope_path = out / f"{cfg.name}_envelope.csv"
    env.to_csv(result.envelope_path, index=False)

    if cfg.plot:
        from wprox.plotting import plot_envelopes, plot_example1_field

        result.plots.append(plot_envelopes(env, out / f"{cfg.name}_envelope.svg", cfg.train.eval_metric))
        target = cfg.target
        if target.kind == "delta_mixture":
            report = example1_report(alpha=target.alpha, target=(target.a, target.b))
        else:
            report = example1_report()
        report.grid.to_csv(out / f"{cfg.name}_example1_grid.csv", index=False)
        result.plots.append(plot_example1_field(report, out / f"{cfg.name}_example1.svg"))
    return result


# ---------------------------------------------------------------------------
# two-point mixture report
# ---------------------------------------------------------------------------

@dataclass
class Example1Report:
    alpha: float
    target: tuple[float, float]
    h: float
    table: DivergenceRecord
    grid: pd.DataFrame
    euclid_angle: float
    wass_angle: float

    def format(self) -> str:
        t = self.table
        lines = [
            f"Two-point mixture, alpha = {self.alpha:g}",
            f"  W2^2      {t.w2sq:.6g}",
            f"  Euclid^2  {t.euclidsq:.6g}",
            f"  KL        {t.kl:.6g}",
            f"  L2^2      {t.l2:.6g}",
            f"Mean angle to the minimizer over {len(self.grid)} grid points (h = {self.h:g}):",
            f"  Euclidean proximal    {self.euclid_angle:.4f} rad",
            f"  Wasserstein proximal  {self.wass_angle:.4f} rad",
        ]
        return "\n".join(lines)


def _mean_angle(dx: np.ndarray, dy: np.ndarray, tx: np.ndarray, ty: np.ndarray) -> float:
    step = np.hypot(dx, dy)
    goal = np.hypot(tx, ty)
    valid = (step > 1e-12) & (goal > 1e-12)
    if not np.any(valid):
        return math.nan
    cos = (dx * tx + dy * ty)[valid] / (step[valid] * goal[valid])
    return float(np.mean(np.arccos(np.clip(cos, -1.0, 1.0))))


def example1_report(
    alpha: float = 0.5,
    theta: tuple[float, float] = (-1.0, 1.0),
    theta_k: tuple[float, float] = (-2.0, 3.0),
    target: tuple[float, float] = (-1.2, 2.1),
    h: float = 0.5,
    points: int = 21,
    a_range: tuple[float, float] = (-3.0, 0.0),
    b_range: tuple[float, float] = (0.5, 4.5),
) -> Example1Report:
    """
    Divergences between ``theta`` and ``theta_k`` and one proximal step of
    F = W1(ρ_θ, ρ_target) from every point of a ``points``×``points`` grid,
    under the Euclidean metric and under diag(α, 1 − α).

    The Euclidean step soft-thresholds coordinate i by h·c_i with
    c = (α, 1 − α); the Wasserstein step thresholds both by h, whatever α.
    """
    if not 0.0 < alpha < 1.0:
        raise ConfigurationError(f"alpha must lie strictly between 0 and 1, got {alpha}")
    if points < 2:
        raise ConfigurationError(f"Grid needs at least 2 points per axis, got {points}")
    if a_range[1] >= b_range[0]:
        raise ConfigurationError("Grid must keep a < b: a_range must end below the start of b_range")
    table = delta_mixture_distances(DeltaMixtureModel(*theta, alpha), DeltaMixtureModel(*theta_k, alpha))
    star = DeltaMixtureModel(*target, alpha)

    a, b = np.meshgrid(np.linspace(*a_range, points), np.linspace(*b_range, points), indexing="ij")
    anchors = np.column_stack([a.ravel(), b.ravel()])
    weights = np.array([alpha, 1.0 - alpha])
    euclid = np.array([proximal_weighted_l1(x, star.theta, weights, np.ones(2), h) for x in anchors]) - anchors
    wass = np.array([proximal_weighted_l1(x, star.theta, weights, weights, h) for x in anchors]) - anchors
    f = np.abs(anchors - star.theta) @ weights

    grid = pd.DataFrame({
        "a": anchors[:, 0], "b": anchors[:, 1], "F": f,
        "euclid_dx": euclid[:, 0], "euclid_dy": euclid[:, 1],
        "wass_dx": wass[:, 0], "wass_dy": wass[:, 1],
    })[EXAMPLE1_COLUMNS]
    to_goal = star.theta - anchors
    return Example1Report(
        alpha=alpha,
        target=(float(target[0]), float(target[1])),
        h=h,
        table=table,
        grid=grid,
        euclid_angle=_mean_angle(euclid[:, 0], euclid[:, 1], to_goal[:, 0], to_goal[:, 1]),
        wass_angle=_mean_angle(wass[:, 0], wass[:, 1], to_goal[:, 0], to_goal[:, 1]),
    )


# ---------------------------------------------------------------------------
# 1-D Gaussian flows
# ---------------------------------------------------------------------------

def gaussian_flow(
    cfg: FlowConfig,
    scheme: str = "sbe",
    mu0: float = 0.0,
    sigma0: float = 1.0,
    target_mean: float = 2.0,
    target_std: float = 0.5,
    batch_size: int = 256,
    seed: int = 0,
    steps: Optional[int] = None,
    inner: Optional[InnerOptimizer] = None,
) -> Trajectory:
    """
    Flow of N(μ, σ²) toward N(m, s²) under F(μ, σ) = (μ − m)² + (σ − s)².

    The forward scheme uses the relaxed metric on the latent batch at each
    iterate; the proximal schemes use ``cfg.penalty`` (sbe) or the exact 1-D
    distance (backward).
    """
    if not sigma0 > 0:
        raise ConfigurationError(f"sigma0 must be positive, got {sigma0}")
    gen = Generator.location_scale([mu0], [sigma0])
    latents = LatentSource(1, seed=seed).draw(batch_size)
    objective = gaussian_w2sq_objective(target_mean, target_std)
    if scheme == "sbe" and cfg.penalty.kind is PenaltyKind.NONE:
        logger.warning("Penalty 'none' turns the proximal step into plain minimization")

    def metric(theta: np.ndarray) -> np.ndarray:
        return relaxed_metric_tensor(gen, theta, latents).matrix

    return flow_integrate(
        objective, gen.theta, cfg, inner, steps=steps, scheme=scheme,
        model=gen, latents=latents, metric=metric,
    )
