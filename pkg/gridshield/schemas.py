from typing import Annotated, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .models import EstimatorKind, Metric, SelectorKind
from .settings import (
    BUNDLED_MODEL_NAME,
    BUNDLED_PREFIX,
    DEFAULT_ALPHA,
    DEFAULT_MAX_SEEDS,
    DEFAULT_N_BEST,
    DEFAULT_P_H,
    DEFAULT_RANDOM_MAGNITUDE,
    DEFAULT_RHO,
    DEFAULT_STEP_SECONDS,
)


class ModelFile(BaseModel):
    """On-disk model: dimensions, row-major matrices, noise variances, protected meters."""
    name: str = ""
    description: Optional[str] = None
    p: int
    n: int
    A: List[List[float]]
    C: List[List[float]]
    sigma_w2: float
    sigma_v2: float
    protected: List[int] = []

    @field_validator('p')
    @classmethod
    def validate_p_positive(cls, v):
        if v < 1:
            raise ValueError('p must be at least 1')
        return v

    @field_validator('sigma_w2', 'sigma_v2')
    @classmethod
    def validate_variance_positive(cls, v):
        if not v > 0:
            raise ValueError('variance must be positive')
        return v

    @model_validator(mode='after')
    def validate_dimensions(self):
        if self.n <= self.p:
            raise ValueError('n must exceed p')
        if len(self.A) != self.p or any(len(row) != self.p for row in self.A):
            raise ValueError(f'A must be {self.p}x{self.p}')
        if len(self.C) != self.n or any(len(row) != self.p for row in self.C):
            raise ValueError(f'C must be {self.n}x{self.p}')
        bad = [i for i in self.protected if not 0 <= i < self.n]
        if bad:
            raise ValueError(f'protected indices out of range: {bad}')
        return self


class NoAttack(BaseModel):
    kind: Literal['none'] = 'none'


class RandomAttackSpec(BaseModel):
    kind: Literal['random'] = 'random'
    m: int = Field(ge=0)
    M: float = DEFAULT_RANDOM_MAGNITUDE


class SpecificSensorSpec(BaseModel):
    kind: Literal['specific_sensor'] = 'specific_sensor'
    sensors: List[int]
    d: List[float]
    one_based: bool = False

    @model_validator(mode='after')
    def normalize_indices(self):
        if len(self.d) != len(self.sensors):
            raise ValueError('d must have one entry per attacked sensor')
        if len(set(self.sensors)) != len(self.sensors):
            raise ValueError('sensors must be distinct')
        if self.one_based:
            if min(self.sensors, default=1) < 1:
                raise ValueError('one-based sensor numbers start at 1')
            self.sensors = [i - 1 for i in self.sensors]
            self.one_based = False
        if min(self.sensors, default=0) < 0:
            raise ValueError('sensor indices must be non-negative')
        return self


class TargetedSpec(BaseModel):
    kind: Literal['targeted'] = 'targeted'
    targets: List[int]
    c: List[float]

    @model_validator(mode='after')
    def validate_shifts(self):
        if not self.targets:
            raise ValueError('targets cannot be empty')
        if len(self.c) != len(self.targets):
            raise ValueError('c must have one shift per target state')
        if len(set(self.targets)) != len(self.targets) or min(self.targets) < 0:
            raise ValueError('targets must be distinct non-negative state indices')
        return self


class ObservabilityBypassSpec(BaseModel):
    kind: Literal['observability_bypass'] = 'observability_bypass'
    eta: int = Field(ge=1)
    phi_base: List[float]


AttackSpec = Annotated[
    Union[NoAttack, RandomAttackSpec, SpecificSensorSpec, TargetedSpec, ObservabilityBypassSpec],
    Field(discriminator='kind'),
]


class EstimatorConfig(BaseModel):
    name: Optional[str] = None
    estimator: EstimatorKind
    selector: SelectorKind = SelectorKind.RANK_EXPANDING
    alpha: float = DEFAULT_ALPHA
    P_h: float = DEFAULT_P_H
    n_best: int = DEFAULT_N_BEST
    rho: float = DEFAULT_RHO
    metric: Metric = Metric.EUCLIDEAN
    max_seeds: int = DEFAULT_MAX_SEEDS

    @field_validator('alpha', 'P_h')
    @classmethod
    def validate_probability(cls, v):
        if not 0.0 < v < 1.0:
            raise ValueError('must lie strictly between 0 and 1')
        return v

    @field_validator('rho')
    @classmethod
    def validate_rho(cls, v):
        if not 0.0 <= v < 1.0:
            raise ValueError('rho must lie in [0, 1)')
        return v

    @field_validator('n_best', 'max_seeds')
    @classmethod
    def validate_count(cls, v):
        if v < 1:
            raise ValueError('must be at least 1')
        return v

    @model_validator(mode='after')
    def default_name(self):
        if not self.name:
            self.name = self.estimator.value
        return self


class ScenarioConfig(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    model_path: str = f'{BUNDLED_PREFIX}{BUNDLED_MODEL_NAME}'
    steps: int = Field(ge=1)
    runs: int = Field(default=1, ge=1)
    seed: int = 0
    attack: AttackSpec = NoAttack()
    attack_start: int = Field(default=0, ge=0)
    attack_scale: float = 1.0
    estimators: List[EstimatorConfig]
    output_path: Optional[str] = None
    step_seconds: float = DEFAULT_STEP_SECONDS

    @model_validator(mode='after')
    def validate_schedule(self):
        if self.attack_start >= self.steps:
            raise ValueError('attack_start must be smaller than steps')
        if not self.estimators:
            raise ValueError('at least one estimator is required')
        names = [e.name for e in self.estimators]
        if len(set(names)) != len(names):
            raise ValueError(f'estimator names must be unique: {names}')
        return self


class RmseReport(BaseModel):
    seed: int
    config_digest: str
    steps: int
    runs: int
    step_seconds: float = DEFAULT_STEP_SECONDS
    attack: str = 'none'
    rmse: Dict[str, List[float]]
    flags: Dict[str, int] = {}

    @model_validator(mode='after')
    def validate_series(self):
        for name, series in self.rmse.items():
            if len(series) != self.steps:
                raise ValueError(f'{name}: expected {self.steps} values, got {len(series)}')
            if any(v < 0 for v in series):
                raise ValueError(f'{name}: RMSE values must be non-negative')
        return self


class RuntimeRow(BaseModel):
    p: int
    n: int
    estimator: str
    mean_seconds: float = Field(ge=0)
    sd_seconds: float = Field(ge=0)
    reps: int
    error: Optional[str] = None


class RuntimeTable(BaseModel):
    rows: List[RuntimeRow] = []

    def row(self, p: int, estimator: str) -> RuntimeRow:
        for r in self.rows:
            if r.p == p and r.estimator == estimator:
                return r
        raise KeyError((p, estimator))


class ValidationReport(BaseModel):
    name: str = ''
    n: int
    p: int
    rank_C: int
    spectral_radius_A: float
    violations: List[str] = []
    warnings: List[str] = []

    @property
    def ok(self) -> bool:
        return not self.violations


class AttackVectorOut(BaseModel):
    model_config = ConfigDict(from_attributes=True)

    kind: str
    n: int
    support: List[int]
    phi: List[float]
    e: Optional[List[float]] = None
    inexact: Optional[bool] = None


class AttackRequest(BaseModel):
    model: Optional[ModelFile] = None
    spec: AttackSpec
    seed: int = 0
