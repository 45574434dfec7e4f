"""State estimators: least squares, the Kalman filter and the attack-resilient
PCNA and CCKF filters built on top of the consistency selectors.

Filter equations, with K' the entrywise-perturbed gain:

    x(k|k-1) = A x(k-1|k-1)
    P(k|k-1) = A P(k-1|k-1) A' + sigma_w2 I
    K        = P C' (C P C' + sigma_v2 I)^-1
    x(k|k)   = x(k|k-1) + K' (y - C x(k|k-1))
    P(k|k)   = (I - K' C) P(k|k-1)
"""
from __future__ import annotations

import logging
from typing import Sequence

import numpy as np
from scipy import linalg

from .consistency import (
    check_consistency,
    pcna_select,
    rank_expanding_select,
    static_check,
)
from .exceptions import DimensionError, SingularMatrixError
from .linalg_stats import generalized_inverse, least_squares, sample_stats
from .models import (
    ConsistencyVariant,
    EstimatorKind,
    FilterState,
    MeasurementFrame,
    Metric,
    SampleStats,
    SelectionResult,
    SelectorKind,
    SystemModel,
    index_tuple,
)
from .schemas import EstimatorConfig

logger = logging.getLogger(__name__)


def _symmetrize(P: np.ndarray) -> np.ndarray:
    return (P + P.T) / 2.0


def least_squares_estimate(H, y) -> np.ndarray:
    return least_squares(H, y)


def kf_predict(state: FilterState, model: SystemModel) -> tuple[np.ndarray, np.ndarray]:
    if state.x_hat.shape != (model.p,) or state.P.shape != (model.p, model.p):
        raise DimensionError(f"filter state does not match a model with p={model.p}")
    x_pred = model.A @ state.x_hat
    P_pred = model.A @ state.P @ model.A.T + model.sigma_w2 * np.eye(model.p)
    return x_pred, _symmetrize(P_pred)


def kf_gain(
    P_pred: np.ndarray,
    C_sub: np.ndarray,
    sigma_v2: float,
    rho: float = 0.0,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Kalman gain on the selected rows, entries perturbed uniformly within rho * |K_ij|."""
    C_sub = np.atleast_2d(C_sub)
    if C_sub.shape[0] < 1:
        raise DimensionError("the gain needs at least one measurement row")
    S = _symmetrize(C_sub @ P_pred @ C_sub.T) + sigma_v2 * np.eye(C_sub.shape[0])
    try:
        K = linalg.solve(S, C_sub @ P_pred, assume_a="sym").T
    except linalg.LinAlgError as exc:
        raise SingularMatrixError(f"innovation covariance is singular: {exc}")
    if rho == 0.0:
        return K
    if rng is None:
        raise DimensionError("a perturbed gain needs a random generator")
    radius = rho * np.abs(K)
    return rng.uniform(K - radius, K + radius)


def kf_update(x_pred, P_pred, K, C_sub, y_sub, k: int = 0) -> FilterState:
    C_sub = np.atleast_2d(C_sub)
    x_hat = x_pred + K @ (np.asarray(y_sub, dtype=float) - C_sub @ x_pred)
    P = (np.eye(P_pred.shape[0]) - K @ C_sub) @ P_pred
    return FilterState(x_hat=x_hat, P=_symmetrize(P), k=k)


def bootstrap_state(frame: MeasurementFrame, model: SystemModel) -> FilterState:
    """x(0|0) from least squares on every meter of the first frame, P(0|0) = I."""
    return FilterState(x_hat=least_squares(model.C, frame.y_observed), P=np.eye(model.p), k=frame.k)


def _require_next(state: FilterState, frame: MeasurementFrame) -> None:
    if state.k != frame.k - 1:
        raise DimensionError(f"filter is at k={state.k} but the frame is k={frame.k}")


def _filter_on(
    x_pred, P_pred, model: SystemModel, frame: MeasurementFrame, subset: Sequence[int], rho: float, rng
) -> FilterState:
    rows = list(subset)
    C_sub = model.C[rows]
    K = kf_gain(P_pred, C_sub, model.sigma_v2, rho, rng)
    return kf_update(x_pred, P_pred, K, C_sub, frame.y_observed[rows], k=frame.k)


def least_squares_step(frame: MeasurementFrame, model: SystemModel) -> tuple[FilterState, SelectionResult]:
    """Unprotected baseline: least squares on every meter."""
    x = least_squares(model.C, frame.y_observed)
    P = model.sigma_v2 * generalized_inverse(model.C.T @ model.C)
    return FilterState(x_hat=x, P=P, k=frame.k), SelectionResult(subset=tuple(range(model.n)))


def kalman_step(state: FilterState, frame: MeasurementFrame, model: SystemModel) -> tuple[FilterState, SelectionResult]:
    """Textbook Kalman update on every meter with the nominal gain."""
    _require_next(state, frame)
    x_pred, P_pred = kf_predict(state, model)
    every = tuple(range(model.n))
    return _filter_on(x_pred, P_pred, model, frame, every, 0.0, None), SelectionResult(subset=every)


def _noise_sigma(cfg: EstimatorConfig, sigma: np.ndarray | None) -> np.ndarray | None:
    if cfg.metric is Metric.MAHALANOBIS:
        if sigma is None:
            raise DimensionError("the Mahalanobis metric needs a noise covariance (see calibrate_noise)")
        return sigma
    return None


def consistent_least_squares_step(
    frame: MeasurementFrame,
    model: SystemModel,
    cfg: EstimatorConfig,
    rng: np.random.Generator,
    sigma: np.ndarray | None = None,
) -> tuple[FilterState, SelectionResult]:
    """Static defense: rank-expanding selection under the static check, then least squares on the survivors."""
    y = frame.y_observed
    check = static_check(model.C, y, cfg.alpha, model.sigma_v2, _noise_sigma(cfg, sigma))
    selection = rank_expanding_select(
        model.C, y, cfg.P_h, cfg.n_best, cfg.alpha, model.sigma_v2, rng, check=check, max_seeds=cfg.max_seeds
    )
    H = model.C[list(selection.subset)]
    x = least_squares(H, y[list(selection.subset)])
    P = model.sigma_v2 * generalized_inverse(H.T @ H)
    return FilterState(x_hat=x, P=P, k=frame.k), selection


def pcna_step(
    state: FilterState,
    frame: MeasurementFrame,
    model: SystemModel,
    cfg: EstimatorConfig,
    rng: np.random.Generator | None = None,
    sigma: np.ndarray | None = None,
) -> tuple[FilterState, SelectionResult]:
    _require_next(state, frame)
    if rng is None and cfg.rho > 0.0:
        raise DimensionError("a perturbed gain needs a random generator")
    x_pred, P_pred = kf_predict(state, model)
    selection = pcna_select(model, state.x_hat, frame.y_observed, cfg.alpha, _noise_sigma(cfg, sigma), P_pred)
    return _filter_on(x_pred, P_pred, model, frame, selection.subset, cfg.rho, rng), selection


def _filter_check(x_pred, P_pred, model: SystemModel, y, cfg: EstimatorConfig, rng, sigma):
    """Filter-based check: residual of the subset against its own modified-gain filter estimate."""

    def check(subset):
        rows = list(index_tuple(subset))
        K = kf_gain(P_pred, model.C[rows], model.sigma_v2, cfg.rho, rng)
        x_f = x_pred + K @ (y[rows] - model.C[rows] @ x_pred)
        variant = ConsistencyVariant.filter_based(x_f, sigma, P_pred)
        return check_consistency(variant, model.C, model.A, rows, y, cfg.alpha, model.sigma_v2)

    return check


def cckf_step(
    state: FilterState,
    frame: MeasurementFrame,
    model: SystemModel,
    cfg: EstimatorConfig,
    rng: np.random.Generator,
    sigma: np.ndarray | None = None,
) -> tuple[FilterState, SelectionResult]:
    """Consistent set first, then the Kalman update on it with the perturbed gain."""
    _require_next(state, frame)
    sigma = _noise_sigma(cfg, sigma)
    y = frame.y_observed
    x_pred, P_pred = kf_predict(state, model)

    if cfg.selector is SelectorKind.PCNA:
        selection = pcna_select(model, state.x_hat, y, cfg.alpha, sigma, P_pred)
    else:
        check = _filter_check(x_pred, P_pred, model, y, cfg, rng, sigma)
        selection = rank_expanding_select(
            model.C, y, cfg.P_h, cfg.n_best, cfg.alpha, model.sigma_v2, rng, check=check, max_seeds=cfg.max_seeds
        )
        if not selection.consistent:
            fallback = pcna_select(model, state.x_hat, y, cfg.alpha, sigma, P_pred)
            logger.debug("k=%d: no filter-consistent expansion, falling back to the predictive selector", frame.k)
            selection = SelectionResult(
                subset=fallback.subset,
                verdict=fallback.verdict,
                exhausted=fallback.exhausted,
                fallback=True,
                removed=fallback.removed,
            )
    return _filter_on(x_pred, P_pred, model, frame, selection.subset, cfg.rho, rng), selection


def calibrate_noise(model: SystemModel, frames: Sequence[MeasurementFrame], x_truths=None) -> SampleStats:
    """Sensor-noise mean and covariance from attack-free frames.

    With ground-truth states the residuals y - C x are the noise itself.
    Without them, least-squares residuals lose the column space of C, which
    is restored as sigma2_hat * C C^+ so the result stays positive definite.
    """
    if len(frames) < 2:
        raise DimensionError(f"need at least 2 calibration frames, got {len(frames)}")
    Y = np.stack([f.y_observed for f in frames])
    if x_truths is not None:
        X = np.asarray(x_truths, dtype=float)
        if X.shape != (len(frames), model.p):
            raise DimensionError(f"x_truths must have shape ({len(frames)}, {model.p})")
        return sample_stats(Y - X @ model.C.T)
    X = np.stack([least_squares(model.C, y) for y in Y])
    stats = sample_stats(Y - X @ model.C.T)
    hat = model.C @ generalized_inverse(model.C)
    sigma2 = float(np.trace(stats.cov)) / (model.n - model.p)
    return SampleStats(mean=stats.mean, cov=stats.cov + sigma2 * hat)


class Estimator:
    """One configured estimator following one trajectory."""

    def __init__(
        self,
        cfg: EstimatorConfig,
        model: SystemModel,
        rng: np.random.Generator,
        sigma: np.ndarray | None = None,
    ):
        self.cfg = cfg
        self.model = model
        self.rng = rng
        self.sigma = sigma
        self.state: FilterState | None = None
        self.flagged = 0

    @property
    def name(self) -> str:
        return self.cfg.name

    def start(self, frame: MeasurementFrame) -> FilterState:
        if self.cfg.estimator is EstimatorKind.LEAST_SQUARES:
            self.state, _ = least_squares_step(frame, self.model)
        elif self.cfg.estimator is EstimatorKind.CONSISTENT_LEAST_SQUARES:
            self.state, selection = consistent_least_squares_step(frame, self.model, self.cfg, self.rng, self.sigma)
            self._count(selection)
        else:
            self.state = bootstrap_state(frame, self.model)
        return self.state

    def step(self, frame: MeasurementFrame) -> FilterState:
        if self.state is None:
            return self.start(frame)
        kind = self.cfg.estimator
        if kind is EstimatorKind.LEAST_SQUARES:
            self.state, selection = least_squares_step(frame, self.model)
        elif kind is EstimatorKind.CONSISTENT_LEAST_SQUARES:
            self.state, selection = consistent_least_squares_step(frame, self.model, self.cfg, self.rng, self.sigma)
        elif kind is EstimatorKind.KALMAN:
            self.state, selection = kalman_step(self.state, frame, self.model)
        elif kind is EstimatorKind.PCNA:
            self.state, selection = pcna_step(self.state, frame, self.model, self.cfg, self.rng, self.sigma)
        else:
            self.state, selection = cckf_step(self.state, frame, self.model, self.cfg, self.rng, self.sigma)
        self._count(selection)
        return self.state

    def _count(self, selection: SelectionResult) -> None:
        if selection.exhausted or selection.fallback:
            self.flagged += 1
