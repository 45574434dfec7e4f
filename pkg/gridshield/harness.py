"""Scenario runner: seeded trajectories, paired estimator runs, RMSE series,
runtime benchmark and report files."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import time
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from pydantic import ValidationError

from .attacks import realize_attack
from .estimators import Estimator, calibrate_noise
from .exceptions import ConfigError, DimensionError, GridShieldError
from .models import EstimatorKind, MeasurementFrame, Metric, SelectorKind, SimState, SystemModel
from .plant import apply_attack, initial_state, load_model, measure, random_model, simulate_step
from .schemas import (
    EstimatorConfig,
    NoAttack,
    RandomAttackSpec,
    RmseReport,
    RuntimeRow,
    RuntimeTable,
    ScenarioConfig,
)
from .settings import BENCH_MIN_REPS, BENCH_STEPS, BUNDLED_PREFIX

logger = logging.getLogger(__name__)

CALIBRATION_FRAMES = 200


def load_scenario(path: str | Path) -> ScenarioConfig:
    """Read a scenario file; a relative model_path is taken relative to the file."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"scenario file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}")
    try:
        cfg = ScenarioConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"{path}: {exc}")
    if not cfg.model_path.startswith(BUNDLED_PREFIX) and not Path(cfg.model_path).is_absolute():
        cfg = cfg.model_copy(update={"model_path": str(path.parent / cfg.model_path)})
    return cfg


def config_digest(cfg: ScenarioConfig) -> str:
    payload = cfg.model_dump_json(exclude={"output_path", "runs"})
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def frame_digest(frame: MeasurementFrame) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(frame.y_observed, dtype=float).tobytes())
    h.update(str(frame.k).encode())
    h.update(",".join(str(i) for i in sorted(frame.attack_support)).encode())
    return h.hexdigest()


def run_streams(seed: int, run: int, count: int) -> list[np.random.Generator]:
    """Independent generators for one run, derived from (seed, run) by counter."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence([seed, run]).spawn(count)]


def simulate_frames(
    cfg: ScenarioConfig,
    model: SystemModel,
    plant_rng: np.random.Generator,
    attack_rng: np.random.Generator,
) -> Iterator[tuple[SimState, MeasurementFrame]]:
    """True states and (attacked) frames for k = 0 .. steps-1."""
    state = initial_state(model, plant_rng)
    frame = measure(model, state.x, 0, plant_rng)
    pinned = None
    for t in range(cfg.steps):
        if t > 0:
            state, frame = simulate_step(model, state, plant_rng)
        if t >= cfg.attack_start and not isinstance(cfg.attack, NoAttack):
            vector = realize_attack(
                cfg.attack, model, attack_rng, frame.y_clean, support=pinned, step=t - cfg.attack_start
            ).scaled(cfg.attack_scale)
            if isinstance(cfg.attack, RandomAttackSpec):
                pinned = vector.support
            frame = apply_attack(frame, vector.phi, vector.support)
        yield state, frame


def _calibration_sigma(model: SystemModel, rng: np.random.Generator) -> np.ndarray:
    state = initial_state(model, rng)
    frames, truths = [], []
    for _ in range(CALIBRATION_FRAMES):
        state, frame = simulate_step(model, state, rng)
        frames.append(frame)
        truths.append(state.x)
    return calibrate_noise(model, frames, np.stack(truths)).cov


def run_errors(cfg: ScenarioConfig, model: SystemModel, run: int) -> tuple[dict[str, np.ndarray], dict[str, int]]:
    """Squared state errors per step for every estimator on one run's shared frames."""
    plant_rng, attack_rng, calib_rng, *est_rngs = run_streams(cfg.seed, run, 3 + len(cfg.estimators))
    sigma = None
    if any(e.metric is Metric.MAHALANOBIS for e in cfg.estimators):
        sigma = _calibration_sigma(model, calib_rng)
    estimators = [Estimator(e, model, rng, sigma) for e, rng in zip(cfg.estimators, est_rngs)]
    errors = {e.name: np.zeros(cfg.steps) for e in estimators}
    for t, (state, frame) in enumerate(simulate_frames(cfg, model, plant_rng, attack_rng)):
        for est in estimators:
            x_hat = est.step(frame).x_hat
            errors[est.name][t] = float(np.sum((x_hat - state.x) ** 2))
    flags = {est.name: est.flagged for est in estimators}
    for name, count in flags.items():
        if count:
            logger.info("run %d: %s flagged %d of %d steps", run, name, count, cfg.steps)
    return errors, flags


def run_scenario(cfg: ScenarioConfig) -> RmseReport:
    model = load_model(cfg.model_path)
    total = {e.name: np.zeros(cfg.steps) for e in cfg.estimators}
    flags = {e.name: 0 for e in cfg.estimators}
    for run in range(cfg.runs):
        errors, run_flags = run_errors(cfg, model, run)
        for name in total:
            total[name] += errors[name]
            flags[name] += run_flags[name]
        logger.info("run %d/%d done", run + 1, cfg.runs)
    rmse = {name: np.sqrt(sq / (cfg.runs * model.p)).tolist() for name, sq in total.items()}
    return RmseReport(
        seed=cfg.seed,
        config_digest=config_digest(cfg),
        steps=cfg.steps,
        runs=cfg.runs,
        step_seconds=cfg.step_seconds,
        attack=cfg.attack.kind,
        rmse=rmse,
        flags=flags,
    )


def monte_carlo(cfg: ScenarioConfig, runs: int) -> RmseReport:
    if runs < 1:
        raise ConfigError(f"runs must be at least 1, got {runs}")
    return run_scenario(cfg.model_copy(update={"runs": runs}))


def rmse_series(estimates, truths) -> np.ndarray:
    """Per-step sqrt(mean over runs of ||x_hat - x||^2 / p); arrays are (steps, p) or (runs, steps, p)."""
    estimates = np.asarray(estimates, dtype=float)
    truths = np.asarray(truths, dtype=float)
    if estimates.shape != truths.shape:
        raise DimensionError(f"estimates {estimates.shape} and truths {truths.shape} differ")
    if estimates.ndim == 2:
        estimates, truths = estimates[None], truths[None]
    if estimates.ndim != 3:
        raise DimensionError("expected (steps, p) or (runs, steps, p) arrays")
    sq = np.sum((estimates - truths) ** 2, axis=2)
    return np.sqrt(sq.mean(axis=0) / estimates.shape[2])


def report_csv(report: RmseReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["step", "estimator", "rmse"])
    for t in range(report.steps):
        for name, series in report.rmse.items():
            writer.writerow([t, name, f"{series[t]:.9g}"])
    return buf.getvalue()


def emit_report(report: RmseReport, path: str | Path, fmt: str = "csv") -> None:
    path = Path(path)
    if fmt == "csv":
        text = report_csv(report)
    elif fmt == "json":
        text = report.model_dump_json(indent=2)
    else:
        raise ConfigError(f"unknown report format {fmt!r}")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    logger.info("wrote %s report to %s", fmt, path)


def load_report(path: str | Path) -> RmseReport:
    return RmseReport.model_validate_json(Path(path).read_text())


BENCH_ESTIMATORS = (
    EstimatorConfig(name="MMSE", estimator=EstimatorKind.CONSISTENT_LEAST_SQUARES),
    EstimatorConfig(name="PCNA", estimator=EstimatorKind.PCNA),
    EstimatorConfig(name="CCKF", estimator=EstimatorKind.CCKF, selector=SelectorKind.RANK_EXPANDING),
)


def _bench_frames(model: SystemModel, steps: int, seed: int) -> list[MeasurementFrame]:
    cfg = ScenarioConfig(
        steps=steps,
        attack=RandomAttackSpec(m=model.n // 2 - 1),
        attack_start=1 if steps > 1 else 0,
        estimators=[BENCH_ESTIMATORS[0]],
    )
    plant_rng, attack_rng = run_streams(seed, model.p, 2)
    return [frame for _, frame in simulate_frames(cfg, model, plant_rng, attack_rng)]


def bench_runtime(
    p_list: Sequence[int],
    template: Sequence[EstimatorConfig] = BENCH_ESTIMATORS,
    reps: int = BENCH_MIN_REPS,
    steps: int = BENCH_STEPS,
    seed: int = 0,
) -> RuntimeTable:
    """Wall-clock seconds per trajectory for each estimator on a random n = 3p model under a random sparse attack."""
    if reps < BENCH_MIN_REPS:
        raise ConfigError(f"at least {BENCH_MIN_REPS} repetitions are needed, got {reps}")
    if steps < 1:
        raise ConfigError("steps must be at least 1")
    rows: list[RuntimeRow] = []
    for p in p_list:
        if p < 2:
            raise ConfigError(f"benchmark dimensions must be at least 2, got {p}")
        n = 3 * p
        rng = np.random.default_rng([seed, p])
        model = random_model(p, n, rng)
        frames = _bench_frames(model, steps, seed)
        for est_cfg in template:
            timings, error = [], None
            try:
                for rep in range(reps):
                    est = Estimator(est_cfg, model, np.random.default_rng([seed, p, rep]))
                    started = time.perf_counter()
                    for frame in frames:
                        est.step(frame)
                    timings.append(time.perf_counter() - started)
            except (GridShieldError, MemoryError) as exc:
                error = f"{type(exc).__name__}: {exc}"
                logger.warning("bench p=%d %s failed: %s", p, est_cfg.name, error)
            mean = float(np.mean(timings)) if timings else 0.0
            sd = float(np.std(timings, ddof=1)) if len(timings) > 1 else 0.0
            rows.append(RuntimeRow(p=p, n=n, estimator=est_cfg.name, mean_seconds=mean, sd_seconds=sd, reps=len(timings), error=error))
            logger.info("bench p=%d %s: %.4f s (sd %.4f)", p, est_cfg.name, mean, sd)
    return RuntimeTable(rows=rows)


def emit_runtime_table(table: RuntimeTable, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix == ".json":
        path.write_text(table.model_dump_json(indent=2))
    else:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["p", "n", "estimator", "mean_seconds", "sd_seconds", "reps", "error"])
        for r in table.rows:
            writer.writerow([r.p, r.n, r.estimator, f"{r.mean_seconds:.9g}", f"{r.sd_seconds:.9g}", r.reps, r.error or ""])
        path.write_text(buf.getvalue())
    logger.info("wrote runtime table to %s", path)
