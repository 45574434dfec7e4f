"""tau-consistency checks and consistent-subset selectors.

A subset of meters is tau-consistent when the norm L of its residuals against
a state estimate stays below tau, the upper alpha point of L under attack-free
noise. The estimate comes from least squares on the subset (static checks,
L**2 / sigma_v2 ~ chi-square with d - p degrees of freedom), from A x_hat(k-1)
(predictive check) or from the modified Kalman update (filter-based check).
The last two are not fitted to the subset: given P(k|k-1) their residuals are
whitened by their own covariance and compared against d degrees of freedom.
"""
from __future__ import annotations

import itertools
import logging
import math
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import linalg
from scipy.special import gammaln

from .exceptions import (
    DimensionError,
    NoConsistentSubsetError,
    RankDeficientError,
    SeedingError,
    SingularMatrixError,
)
from .linalg_stats import chi_square_quantile, least_squares, mahalanobis_distance
from .models import (
    ConsistencyVariant,
    ConsistencyVerdict,
    SeedCandidate,
    SelectionResult,
    SystemModel,
    VariantTag,
    index_tuple,
)
from .settings import BRUTE_FORCE_MAX_SENSORS, RANK_RTOL

logger = logging.getLogger(__name__)

SubsetCheck = Callable[[tuple[int, ...]], ConsistencyVerdict]


def benign_floor(n: int, p: int) -> int:
    """Guaranteed number of benign meters when fewer than half of the spare ones are attacked."""
    if n <= p:
        raise DimensionError(f"n must exceed p (n={n}, p={p})")
    return n - (n - p - 1) // 2


def seed_subset_probability(n: int, p: int, delta: int) -> float:
    """Probability that a uniformly drawn size-p subset is all benign: C(delta,p)/C(n,p)."""
    log_ratio = (gammaln(delta + 1) - gammaln(delta - p + 1)) - (gammaln(n + 1) - gammaln(n - p + 1))
    return float(min(1.0, math.exp(log_ratio)))


def seed_subset_count(n: int, p: int, delta: int, P_h: float) -> int:
    if not p <= delta <= n:
        raise DimensionError(f"need p <= delta <= n (p={p}, delta={delta}, n={n})")
    if not 0.0 < P_h < 1.0:
        raise DimensionError(f"P_h must lie in (0, 1), got {P_h}")
    if delta == n:
        return 1
    P_delta = seed_subset_probability(n, p, delta)
    if P_delta >= 1.0:
        return 1
    return max(1, math.ceil(math.log1p(-P_h) / math.log1p(-P_delta)))


def tau_threshold(d: int, p: int, alpha: float, sigma_v2: float, fitted: bool = True) -> float:
    """Upper alpha point of the residual norm.

    A residual fitted to the subset loses p degrees of freedom; one measured
    against an outside reference (predictive and filter-based checks) keeps all d.
    """
    if d <= p:
        raise DimensionError(f"a consistency check needs more meters than states (d={d}, p={p})")
    if not 0.0 < alpha < 1.0:
        raise DimensionError(f"alpha must lie in (0, 1), got {alpha}")
    dof = d - p if fitted else d
    return math.sqrt(sigma_v2 * chi_square_quantile(dof, 1.0 - alpha))


def residual_statistic(residual: np.ndarray, sigma: np.ndarray | None = None) -> float:
    """Euclidean norm, or the Mahalanobis norm sqrt(r' Sigma^-1 r) when sigma is given."""
    if sigma is None:
        return float(np.linalg.norm(residual))
    return mahalanobis_distance(residual, np.zeros_like(residual), sigma)


def _spd_factor(S: np.ndarray):
    try:
        return linalg.cho_factor(S)
    except linalg.LinAlgError as exc:
        raise SingularMatrixError(f"innovation covariance is not positive definite: {exc}")


def reference_statistic(
    tag: VariantTag, H: np.ndarray, P_pred: np.ndarray, residual: np.ndarray, R: np.ndarray | None, sigma_v2: float
) -> float:
    """Whitened norm of H x_ref - y for a reference built from the prediction.

    With S = H P_pred H' + R the predictive residual has covariance S. The
    residual of the nominal-gain update on the same rows has covariance
    R S^-1 R, whose whitened norm is sqrt(u' S u) with u = R^-1 r.
    """
    d = H.shape[0]
    S = H @ P_pred @ H.T + (R if R is not None else sigma_v2 * np.eye(d))
    S = (S + S.T) / 2.0
    if tag is VariantTag.PREDICTIVE:
        q = residual @ linalg.cho_solve(_spd_factor(S), residual)
    else:
        u = residual / sigma_v2 if R is None else linalg.cho_solve(_spd_factor(R), residual)
        q = u @ S @ u
    return float(np.sqrt(max(q, 0.0)))


def check_consistency(
    variant: ConsistencyVariant,
    C: np.ndarray,
    A: np.ndarray | None,
    subset: Sequence[int],
    y: np.ndarray,
    alpha: float,
    sigma_v2: float,
) -> ConsistencyVerdict:
    subset = index_tuple(subset)
    d, p = len(subset), C.shape[1]
    if d <= p:
        raise DimensionError(f"a consistency check needs more meters than states (d={d}, p={p})")
    rows = list(subset)
    H, y_s = C[rows], np.asarray(y, dtype=float)[rows]

    fitted = variant.tag in (VariantTag.STATIC_EUCLIDEAN, VariantTag.STATIC_MAHALANOBIS)
    if fitted:
        estimate = least_squares(H, y_s)
    elif variant.tag is VariantTag.PREDICTIVE:
        if variant.reference is None or A is None:
            raise DimensionError("the predictive check needs x_hat(k-1) and A")
        estimate = A @ variant.reference
    else:
        if variant.reference is None:
            raise DimensionError("the filter-based check needs the filter estimate")
        estimate = variant.reference

    residual = H @ estimate - y_s
    if variant.tag is VariantTag.STATIC_MAHALANOBIS and variant.sigma is None:
        raise DimensionError("the Mahalanobis check needs a covariance matrix")
    noise = variant.sigma[np.ix_(rows, rows)] if variant.sigma is not None else None
    if not fitted and variant.P_pred is not None:
        statistic = reference_statistic(variant.tag, H, variant.P_pred, residual, noise, sigma_v2)
        threshold = tau_threshold(d, p, alpha, 1.0, fitted=False)
    elif noise is not None:
        statistic = residual_statistic(residual, noise)
        threshold = tau_threshold(d, p, alpha, 1.0, fitted=fitted)
    else:
        statistic = residual_statistic(residual)
        threshold = tau_threshold(d, p, alpha, sigma_v2, fitted=fitted)
    return ConsistencyVerdict(
        passed=bool(statistic < threshold),
        statistic=statistic,
        threshold=threshold,
        estimate=estimate,
        subset=subset,
    )


def brute_force_max_consistent(C: np.ndarray, y: np.ndarray, alpha: float, sigma_v2: float) -> tuple[int, ...]:
    """Largest statically consistent subset, lexicographically smallest among ties."""
    n, p = C.shape
    if n > BRUTE_FORCE_MAX_SENSORS:
        raise DimensionError(f"brute force search is limited to n <= {BRUTE_FORCE_MAX_SENSORS}, got {n}")
    variant = ConsistencyVariant.static_euclidean()
    for size in range(n, p, -1):
        for subset in itertools.combinations(range(n), size):
            try:
                verdict = check_consistency(variant, C, None, subset, y, alpha, sigma_v2)
            except RankDeficientError:
                continue
            if verdict.passed:
                return subset
    raise NoConsistentSubsetError(f"no consistent subset larger than p={p}")


@lru_cache(maxsize=None)
def _warn_capped(n: int, p: int, h: int, cap: int) -> None:
    logger.warning("seeding needs h=%d subsets for n=%d, p=%d; capped at %d", h, n, p, cap)


def _draw_subsets(rng: np.random.Generator, count: int, n: int, p: int) -> np.ndarray:
    return np.sort(rng.random((count, n)).argsort(axis=1)[:, :p], axis=1)


def seed_candidates(
    C: np.ndarray,
    y: np.ndarray,
    P_h: float,
    n_best: int,
    alpha: float,
    sigma_v2: float,
    rng: np.random.Generator,
    max_seeds: int | None = None,
) -> list[SeedCandidate]:
    """Seeding phase: score h random size-p least-squares fits by their delta smallest squared residuals.

    alpha and sigma_v2 are unused by the scoring itself and kept so the seeding
    and expanding phases share one call signature.
    """
    n, p = C.shape
    y = np.asarray(y, dtype=float)
    delta = benign_floor(n, p)
    h = seed_subset_count(n, p, delta, P_h)
    if max_seeds is not None and h > max_seeds:
        _warn_capped(n, p, h, max_seeds)
        h = max_seeds

    subsets, estimates = [], []
    usable, attempts, limit = 0, 0, 10 * h
    while usable < h and attempts < limit:
        batch = min(h - usable, limit - attempts)
        drawn = _draw_subsets(rng, batch, n, p)
        attempts += batch
        H = C[drawn]
        s = np.linalg.svd(H, compute_uv=False)
        ok = s[:, -1] > RANK_RTOL * s[:, 0]
        if not np.any(ok):
            continue
        X = np.linalg.solve(H[ok], y[drawn[ok]][..., None])[..., 0]
        subsets.append(drawn[ok])
        estimates.append(X)
        usable += int(ok.sum())
    if attempts > h:
        logger.debug("seeding discarded %d degenerate subsets", attempts - usable)

    need = min(n_best, h)
    if usable < need:
        raise SeedingError(f"only {usable} usable subsets after {attempts} draws, need {need}")
    subsets = np.concatenate(subsets)
    estimates = np.concatenate(estimates)

    sq = (estimates @ C.T - y) ** 2
    if delta < n:
        sq = np.partition(sq, delta - 1, axis=1)[:, :delta]
    scores = sq.sum(axis=1)
    # lexsort keys: last key is primary; ties on score fall back to index order
    order = np.lexsort(tuple(subsets[:, j] for j in range(p - 1, -1, -1)) + (scores,))
    return [
        SeedCandidate(subset=tuple(int(i) for i in subsets[j]), estimate=estimates[j], score=float(scores[j]))
        for j in order[:need]
    ]


def static_check(C: np.ndarray, y: np.ndarray, alpha: float, sigma_v2: float, sigma: np.ndarray | None = None) -> SubsetCheck:
    """Static Euclidean check (Mahalanobis when sigma is given) bound to one frame."""
    variant = (
        ConsistencyVariant.static_mahalanobis(sigma) if sigma is not None else ConsistencyVariant.static_euclidean()
    )
    return lambda subset: check_consistency(variant, C, None, subset, y, alpha, sigma_v2)


def _expand(seed: SeedCandidate, C: np.ndarray, y: np.ndarray, check: SubsetCheck) -> tuple[tuple[int, ...], ConsistencyVerdict | None]:
    members = set(seed.subset)
    residual = np.abs(C @ seed.estimate - y)
    outside = sorted((i for i in range(C.shape[0]) if i not in members), key=lambda i: (residual[i], i))
    verdict = None
    for i in outside:
        trial = index_tuple(members | {i})
        try:
            candidate = check(trial)
        except RankDeficientError:
            continue
        if candidate.passed:
            members.add(i)
            verdict = candidate
    return index_tuple(members), verdict


def expand_seed(
    seed: SeedCandidate,
    C: np.ndarray,
    y: np.ndarray,
    alpha: float,
    sigma_v2: float,
    check: SubsetCheck | None = None,
) -> tuple[int, ...]:
    """Expanding phase: admit meters in ascending seed-residual order while the set stays consistent."""
    y = np.asarray(y, dtype=float)
    subset, _ = _expand(seed, C, y, check or static_check(C, y, alpha, sigma_v2))
    return subset


def rank_expanding_select(
    C: np.ndarray,
    y: np.ndarray,
    P_h: float,
    n_best: int,
    alpha: float,
    sigma_v2: float,
    rng: np.random.Generator,
    check: SubsetCheck | None = None,
    max_seeds: int | None = None,
) -> SelectionResult:
    """Seed, expand every kept seed, and keep the largest consistent result (smallest RSS on ties)."""
    y = np.asarray(y, dtype=float)
    check = check or static_check(C, y, alpha, sigma_v2)
    best_key, best = None, None
    for seed in seed_candidates(C, y, P_h, n_best, alpha, sigma_v2, rng, max_seeds=max_seeds):
        subset, verdict = _expand(seed, C, y, check)
        consistent = verdict is not None and verdict.passed
        rss = verdict.statistic**2 if verdict is not None else math.inf
        key = (not consistent, -len(subset), rss, subset)
        if best_key is None or key < best_key:
            best_key, best = key, SelectionResult(subset=subset, verdict=verdict, exhausted=not consistent)
    return best


def _drop_from_inverse(M: np.ndarray, pos: int) -> np.ndarray:
    """Inverse of a symmetric matrix with row and column pos removed, from the full inverse."""
    keep = np.arange(M.shape[0]) != pos
    col = M[keep, pos]
    return M[np.ix_(keep, keep)] - np.outer(col, col) / M[pos, pos]


def pcna_select(
    model: SystemModel,
    x_prev: np.ndarray,
    y: np.ndarray,
    alpha: float,
    sigma: np.ndarray | None = None,
    P_pred: np.ndarray | None = None,
) -> SelectionResult:
    """Drop the worst predicted-residual meter until the predictive check passes or delta meters remain.

    Residuals are ranked after scaling by their standard deviation, so meters
    on poorly predicted states are not dropped first for that reason alone.
    Given P_pred the innovation covariance is inverted once per frame and
    downdated as meters leave.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (model.n,):
        raise DimensionError(f"y has shape {y.shape}, model expects ({model.n},)")
    n, p = model.n, model.p
    delta = benign_floor(n, p)
    variant = ConsistencyVariant.predictive(x_prev, sigma, P_pred)
    estimate = model.A @ np.asarray(x_prev, dtype=float)
    raw = model.C @ estimate - y
    R = sigma if sigma is not None else model.sigma_v2 * np.eye(n)
    inverse = None
    if P_pred is not None:
        S = model.C @ P_pred @ model.C.T + R
        S = (S + S.T) / 2.0
        inverse = linalg.cho_solve(_spd_factor(S), np.eye(n))
        scale = np.sqrt(np.diag(S))
    else:
        scale = np.sqrt(np.diag(R))
    score = np.abs(raw) / scale

    members = list(range(n))
    removed: list[int] = []
    while True:
        if inverse is None:
            verdict = check_consistency(variant, model.C, model.A, members, y, alpha, model.sigma_v2)
        else:
            r = raw[members]
            statistic = float(np.sqrt(max(r @ inverse @ r, 0.0)))
            threshold = tau_threshold(len(members), p, alpha, 1.0, fitted=False)
            verdict = ConsistencyVerdict(
                passed=bool(statistic < threshold),
                statistic=statistic,
                threshold=threshold,
                estimate=estimate,
                subset=tuple(members),
            )
        if verdict.passed:
            return SelectionResult(subset=verdict.subset, verdict=verdict, removed=tuple(removed))
        if len(members) <= delta:
            logger.debug("PCNA exhausted at delta=%d meters (L=%.4g, tau=%.4g)", delta, verdict.statistic, verdict.threshold)
            return SelectionResult(subset=verdict.subset, verdict=verdict, exhausted=True, removed=tuple(removed))
        pos = int(np.argmax(score[members]))
        if inverse is not None:
            inverse = _drop_from_inverse(inverse, pos)
        removed.append(members.pop(pos))
