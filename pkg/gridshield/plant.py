"""Linear plant: model files, trajectories, noisy meters and bus injections.

    x(k+1) = A x(k) + w(k),   w ~ N(0, sigma_w2 I_p)
    y(k)   = C x(k) + v(k),   v ~ N(0, sigma_v2 I_n)
"""
from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from .exceptions import DimensionError, ModelError
from .linalg_stats import least_squares, numerical_rank
from .models import AdmittanceModel, MeasurementFrame, SimState, SystemModel
from .schemas import ModelFile, ValidationReport
from .settings import BUNDLED_PREFIX, DATA_DIR, SPECTRAL_RADIUS_TOL

logger = logging.getLogger(__name__)


def resolve_model_path(path: str | Path) -> Path:
    text = str(path)
    if text.startswith(BUNDLED_PREFIX):
        return DATA_DIR / f"{text[len(BUNDLED_PREFIX):]}.json"
    return Path(path)


def model_from_file(spec: ModelFile, check_rank: bool = True) -> SystemModel:
    """Build a SystemModel from a schema-valid file, enforcing the rank invariant."""
    C = np.asarray(spec.C, dtype=float)
    if check_rank and numerical_rank(C) < spec.p:
        raise ModelError("C", f"C rank < p ({numerical_rank(C)} < {spec.p})")
    return SystemModel(
        A=np.asarray(spec.A, dtype=float),
        C=C,
        sigma_w2=float(spec.sigma_w2),
        sigma_v2=float(spec.sigma_v2),
        protected=frozenset(spec.protected),
        name=spec.name,
    )


def model_to_file(model: SystemModel) -> ModelFile:
    return ModelFile(
        name=model.name,
        p=model.p,
        n=model.n,
        A=model.A.tolist(),
        C=model.C.tolist(),
        sigma_w2=model.sigma_w2,
        sigma_v2=model.sigma_v2,
        protected=sorted(model.protected),
    )


def load_model(path: str | Path) -> SystemModel:
    path = resolve_model_path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ModelError("path", f"model file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ModelError("json", f"cannot parse {path}: {exc}")
    try:
        spec = ModelFile.model_validate(raw)
    except ValidationError as exc:
        err = exc.errors()[0]
        field = ".".join(str(p) for p in err["loc"]) or "model"
        raise ModelError(field, err["msg"])
    model = model_from_file(spec)
    logger.info("loaded model %s (n=%d, p=%d) from %s", model.name or path.stem, model.n, model.p, path)
    return model


def validate_model(model: SystemModel) -> ValidationReport:
    """Rank of C, spectral radius of A and every invariant violation; never raises."""
    violations: list[str] = []
    warnings: list[str] = []
    p, n = model.A.shape[0], model.C.shape[0]
    if model.A.shape != (p, p):
        violations.append(f"A must be square, got {model.A.shape}")
    if model.C.ndim != 2 or model.C.shape[1] != p:
        violations.append(f"C must be n x {p}, got {model.C.shape}")
    if n <= p:
        violations.append("n must exceed p")
    rank = numerical_rank(model.C)
    if rank < p:
        violations.append(f"C rank < p ({rank} < {p})")
    if not model.sigma_w2 > 0:
        violations.append("sigma_w2 must be positive")
    if not model.sigma_v2 > 0:
        violations.append("sigma_v2 must be positive")
    outside = sorted(i for i in model.protected if not 0 <= i < n)
    if outside:
        violations.append(f"protected indices out of range: {outside}")

    radius = float("nan")
    if model.A.ndim == 2 and model.A.shape[0] == model.A.shape[1]:
        radius = float(np.max(np.abs(np.linalg.eigvals(model.A)), initial=0.0))
        if radius > 1.0 + SPECTRAL_RADIUS_TOL:
            warnings.append(f"A is unstable (spectral radius {radius:.6g} > 1)")
    for w in warnings:
        logger.warning("%s: %s", model.name or "model", w)
    return ValidationReport(
        name=model.name, n=n, p=p, rank_C=rank, spectral_radius_A=radius,
        violations=violations, warnings=warnings,
    )


def initial_state(model: SystemModel, rng: np.random.Generator) -> SimState:
    return SimState(x=rng.standard_normal(model.p), k=0)


def measure(model: SystemModel, x: np.ndarray, k: int, rng: np.random.Generator) -> MeasurementFrame:
    y = model.C @ x + rng.normal(0.0, np.sqrt(model.sigma_v2), model.n)
    return MeasurementFrame(y_clean=y, y_observed=y.copy(), k=k)


def simulate_step(
    model: SystemModel, state: SimState, rng: np.random.Generator
) -> tuple[SimState, MeasurementFrame]:
    if state.x.shape != (model.p,):
        raise DimensionError(f"state has shape {state.x.shape}, model expects ({model.p},)")
    w = rng.normal(0.0, np.sqrt(model.sigma_w2), model.p)
    nxt = SimState(x=model.A @ state.x + w, k=state.k + 1)
    return nxt, measure(model, nxt.x, nxt.k, rng)


def apply_attack(frame: MeasurementFrame, phi: np.ndarray, support) -> MeasurementFrame:
    return MeasurementFrame(
        y_clean=frame.y_clean,
        y_observed=frame.y_clean + phi,
        k=frame.k,
        attack_support=frozenset(int(i) for i in support),
    )


def power_injections(adm: AdmittanceModel, V, theta) -> tuple[np.ndarray, np.ndarray]:
    """Active and reactive bus injections from voltage magnitudes and angles (radians)."""
    V = np.asarray(V, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if V.shape != (adm.b,) or theta.shape != (adm.b,):
        raise DimensionError(f"V and theta must have length {adm.b}")
    dtheta = theta[:, None] - theta[None, :]
    cos, sin = np.cos(dtheta), np.sin(dtheta)
    P = V * ((adm.G * cos + adm.B * sin) @ V)
    Q = V * ((adm.G * sin - adm.B * cos) @ V)
    return P, Q


def observability_matrix(A, C, eta: int) -> np.ndarray:
    """Stack C, CA, ..., CA^(eta-1)."""
    A = np.asarray(A, dtype=float)
    C = np.asarray(C, dtype=float)
    if eta < 1:
        raise DimensionError("eta must be at least 1")
    blocks = [C]
    for _ in range(eta - 1):
        blocks.append(blocks[-1] @ A)
    return np.vstack(blocks)


def window_estimate(model: SystemModel, Y, eta: int) -> np.ndarray:
    """Least-squares state from a stacked window of eta measurement vectors."""
    O = observability_matrix(model.A, model.C, eta)
    return least_squares(O, np.asarray(Y, dtype=float).reshape(-1))


def random_model(
    p: int,
    n: int,
    rng: np.random.Generator,
    sigma_w2: float = 1e-7,
    sigma_v2: float = 0.1,
    radius: float = 0.99,
) -> SystemModel:
    """Stable random plant: A a scaled orthogonal matrix, C dense Gaussian (full rank almost surely)."""
    if n <= p:
        raise DimensionError(f"n must exceed p (n={n}, p={p})")
    Q, _ = np.linalg.qr(rng.standard_normal((p, p)))
    C = rng.standard_normal((n, p))
    model = SystemModel(A=radius * Q, C=C, sigma_w2=sigma_w2, sigma_v2=sigma_v2, name=f"random_p{p}_n{n}")
    if numerical_rank(C) < p:
        raise ModelError("C", f"C rank < p ({numerical_rank(C)} < {p})")
    return model
