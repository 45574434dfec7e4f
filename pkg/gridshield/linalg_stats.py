"""Numerical primitives: eigen-factorizations, matrix powers, pseudoinverse,
sample statistics, Mahalanobis whitening and chi-square quantiles."""
from __future__ import annotations

import logging
from functools import lru_cache

import numpy as np
from scipy import linalg
from scipy.stats import chi2

from .exceptions import DimensionError, RankDeficientError, SingularMatrixError
from .models import SampleStats, SpectralDecomposition
from .settings import RANK_RTOL, SYMMETRY_TOL

logger = logging.getLogger(__name__)


def _as_square(A) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {A.shape}")
    return A


def spectral_decompose(A) -> SpectralDecomposition:
    """A = U diag(D) U^T for symmetric A, eigenvalues sorted descending."""
    A = _as_square(A)
    if np.max(np.abs(A - A.T), initial=0.0) > SYMMETRY_TOL * max(1.0, np.max(np.abs(A), initial=0.0)):
        raise DimensionError("spectral decomposition needs a symmetric matrix")
    D, U = linalg.eigh((A + A.T) / 2.0)
    order = np.argsort(D)[::-1]
    return SpectralDecomposition(U=U[:, order], D=D[order])


def matrix_power(A, a: float) -> np.ndarray:
    """U diag(D**a) U^T for a symmetric positive (semi)definite A."""
    dec = spectral_decompose(A)
    D = dec.D.copy()
    scale = max(1.0, float(np.max(np.abs(D), initial=0.0)))
    tol = RANK_RTOL * scale
    integer_power = float(a).is_integer()
    if a < 0 and np.any(D <= tol):
        raise SingularMatrixError(f"negative power {a} needs a positive definite matrix")
    if not integer_power:
        if np.any(D < -tol):
            raise SingularMatrixError(f"fractional power {a} needs a positive semidefinite matrix")
        D = np.clip(D, 0.0, None)
    return (dec.U * D**a) @ dec.U.T


def generalized_inverse(A) -> np.ndarray:
    """Moore-Penrose inverse; singular values below RANK_RTOL * s_max count as zero."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0 or not np.any(A):
        return np.zeros(A.T.shape)
    return linalg.pinv(A, atol=0.0, rtol=RANK_RTOL)


def numerical_rank(A) -> int:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        return 0
    s = linalg.svdvals(A)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > RANK_RTOL * s[0]))


def least_squares(H, y) -> np.ndarray:
    """Minimizer of ||Hx - y|| for a full-column-rank H."""
    H = np.atleast_2d(np.asarray(H, dtype=float))
    y = np.asarray(y, dtype=float)
    if H.shape[0] != y.shape[0]:
        raise DimensionError(f"H has {H.shape[0]} rows but y has {y.shape[0]} entries")
    if H.shape[0] < H.shape[1]:
        raise RankDeficientError(f"{H.shape[0]} equations cannot determine {H.shape[1]} unknowns")
    x, _, rank, s = linalg.lstsq(H, y, cond=RANK_RTOL)
    if rank < H.shape[1]:
        raise RankDeficientError(f"design matrix has rank {rank} < {H.shape[1]}")
    return x


def sample_stats(samples) -> SampleStats:
    """Sample mean and unbiased (1/(N-1)) sample covariance of row vectors."""
    X = np.asarray(samples, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise DimensionError("samples must be a sequence of equal-length vectors")
    if X.shape[0] < 2:
        raise DimensionError(f"need at least 2 samples, got {X.shape[0]}")
    mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / (X.shape[0] - 1)
    return SampleStats(mean=mean, cov=(cov + cov.T) / 2.0)


def _require_positive_definite(sigma) -> np.ndarray:
    sigma = _as_square(sigma)
    eig = linalg.eigvalsh((sigma + sigma.T) / 2.0)
    if eig[-1] <= 0.0 or eig[0] <= RANK_RTOL * eig[-1]:
        raise SingularMatrixError("covariance matrix is not positive definite")
    return sigma


def mahalanobis_transform(y, stats: SampleStats) -> np.ndarray:
    """z = Sigma^(-1/2) (y - mu); y may be one vector or a stack of rows."""
    cov = _require_positive_definite(stats.cov)
    W = matrix_power(cov, -0.5)
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != cov.shape[0]:
        raise DimensionError(f"vector length {y.shape[-1]} does not match covariance size {cov.shape[0]}")
    return (y - stats.mean) @ W.T


def mahalanobis_distance(x, mu, sigma) -> float:
    sigma = _require_positive_definite(sigma)
    diff = np.asarray(x, dtype=float) - np.asarray(mu, dtype=float)
    if diff.shape != (sigma.shape[0],):
        raise DimensionError("x, mu and sigma sizes differ")
    factor = linalg.cho_factor(sigma)
    return float(np.sqrt(max(diff @ linalg.cho_solve(factor, diff), 0.0)))


@lru_cache(maxsize=4096)
def chi_square_quantile(dof: int, prob: float) -> float:
    if dof < 1:
        raise DimensionError(f"degrees of freedom must be >= 1, got {dof}")
    if not 0.0 < prob < 1.0:
        raise DimensionError(f"probability must lie in (0, 1), got {prob}")
    return float(chi2.ppf(prob, dof))
