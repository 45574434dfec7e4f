"""In-memory domain types.

Everything numeric is a numpy array; the dataclasses are frozen so a model,
frame or filter state can be shared between estimators without copying.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np

from .exceptions import DimensionError


class VariantTag(str, Enum):
    STATIC_EUCLIDEAN = "StaticEuclidean"
    STATIC_MAHALANOBIS = "StaticMahalanobis"
    PREDICTIVE = "Predictive"
    FILTER_BASED = "FilterBased"


class EstimatorKind(str, Enum):
    LEAST_SQUARES = "LeastSquares"
    CONSISTENT_LEAST_SQUARES = "ConsistentLeastSquares"
    KALMAN = "Kalman"
    PCNA = "PCNA"
    CCKF = "CCKF"


class SelectorKind(str, Enum):
    PCNA = "PCNA"
    RANK_EXPANDING = "RankExpanding"


class Metric(str, Enum):
    EUCLIDEAN = "euclidean"
    MAHALANOBIS = "mahalanobis"


def index_tuple(indices) -> tuple[int, ...]:
    """Sorted tuple of ints, the canonical form for sensor index sets."""
    return tuple(sorted(int(i) for i in indices))


@dataclass(frozen=True, eq=False)
class SystemModel:
    A: np.ndarray
    C: np.ndarray
    sigma_w2: float
    sigma_v2: float
    protected: frozenset[int] = frozenset()
    name: str = ""

    @property
    def p(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.C.shape[0]

    @cached_property
    def CA(self) -> np.ndarray:
        return self.C @ self.A

    @property
    def attackable(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.n) if i not in self.protected)


@dataclass(frozen=True, eq=False)
class SimState:
    x: np.ndarray
    k: int = 0


@dataclass(frozen=True, eq=False)
class MeasurementFrame:
    y_clean: np.ndarray
    y_observed: np.ndarray
    k: int
    attack_support: frozenset[int] = frozenset()


@dataclass(frozen=True, eq=False)
class AdmittanceModel:
    G: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        if self.G.shape != self.B.shape or self.G.ndim != 2 or self.G.shape[0] != self.G.shape[1]:
            raise DimensionError("G and B must be square matrices of the same size")
        if not (np.allclose(self.G, self.G.T) and np.allclose(self.B, self.B.T)):
            raise DimensionError("G and B must be symmetric")

    @property
    def b(self) -> int:
        return self.G.shape[0]


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    U: np.ndarray
    D: np.ndarray


@dataclass(frozen=True, eq=False)
class SampleStats:
    mean: np.ndarray
    cov: np.ndarray


@dataclass(frozen=True, eq=False)
class ConsistencyVariant:
    tag: VariantTag
    sigma: np.ndarray | None = None
    reference: np.ndarray | None = None
    # P(k|k-1); whitens the residuals of the predictive and filter-based checks
    P_pred: np.ndarray | None = None

    @classmethod
    def static_euclidean(cls) -> "ConsistencyVariant":
        return cls(VariantTag.STATIC_EUCLIDEAN)

    @classmethod
    def static_mahalanobis(cls, sigma: np.ndarray) -> "ConsistencyVariant":
        return cls(VariantTag.STATIC_MAHALANOBIS, sigma=np.asarray(sigma, dtype=float))

    @classmethod
    def predictive(
        cls, x_prev: np.ndarray, sigma: np.ndarray | None = None, P_pred: np.ndarray | None = None
    ) -> "ConsistencyVariant":
        return cls(VariantTag.PREDICTIVE, sigma=sigma, reference=np.asarray(x_prev, dtype=float), P_pred=P_pred)

    @classmethod
    def filter_based(
        cls, x_f: np.ndarray, sigma: np.ndarray | None = None, P_pred: np.ndarray | None = None
    ) -> "ConsistencyVariant":
        return cls(VariantTag.FILTER_BASED, sigma=sigma, reference=np.asarray(x_f, dtype=float), P_pred=P_pred)


@dataclass(frozen=True, eq=False)
class ConsistencyVerdict:
    passed: bool
    statistic: float
    threshold: float
    estimate: np.ndarray
    subset: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class SeedCandidate:
    subset: tuple[int, ...]
    estimate: np.ndarray
    score: float


@dataclass(frozen=True, eq=False)
class SelectionResult:
    subset: tuple[int, ...]
    verdict: ConsistencyVerdict | None = None
    exhausted: bool = False
    fallback: bool = False
    removed: tuple[int, ...] = ()

    @property
    def consistent(self) -> bool:
        return self.verdict is not None and self.verdict.passed


@dataclass(frozen=True, eq=False)
class AttackVector:
    phi: np.ndarray
    support: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        outside = np.ones(self.phi.shape[0], dtype=bool)
        outside[list(self.support)] = False
        if np.any(self.phi[outside] != 0.0):
            raise DimensionError("attack vector is nonzero outside its support")

    @classmethod
    def zero(cls, n: int) -> "AttackVector":
        return cls(np.zeros(n))

    @property
    def m(self) -> int:
        return len(self.support)

    def scaled(self, factor: float) -> "AttackVector":
        return AttackVector(self.phi * factor, self.support)


@dataclass(frozen=True, eq=False)
class ObservabilityBypass:
    e: np.ndarray
    stacked: np.ndarray
    inexact: bool = False


@dataclass(frozen=True, eq=False)
class FilterState:
    x_hat: np.ndarray
    P: np.ndarray
    k: int = 0
