"""False data injection attack vectors.

Every stealthy construction here puts phi in the column space of C (or of the
observability matrix O), so the least-squares residual of the attacked frame
equals that of the clean frame while the state estimate moves.
"""
from __future__ import annotations

import logging
from typing import Sequence

import numpy as np

from .exceptions import ConfigError, DimensionError, NoStealthyAttackError, NumericalError, RankDeficientError
from .linalg_stats import generalized_inverse, least_squares, numerical_rank
from .models import AttackVector, ObservabilityBypass, SystemModel, index_tuple
from .plant import observability_matrix
from .schemas import (
    AttackSpec,
    AttackVectorOut,
    NoAttack,
    ObservabilityBypassSpec,
    RandomAttackSpec,
    SpecificSensorSpec,
    TargetedSpec,
)
from .settings import STEALTH_TOL

logger = logging.getLogger(__name__)


def random_attack(spec: RandomAttackSpec, model: SystemModel, rng: np.random.Generator) -> AttackVector:
    """Random sparse attack: m non-protected meters, each offset by M * N(0, 1)."""
    candidates = np.array(model.attackable, dtype=int)
    if spec.m > candidates.size:
        raise ConfigError(f"cannot attack {spec.m} meters, only {candidates.size} are not protected")
    support = np.sort(rng.choice(candidates, size=spec.m, replace=False))
    return random_magnitudes(spec, model.n, support, rng)


def random_magnitudes(spec: RandomAttackSpec, n: int, support, rng: np.random.Generator) -> AttackVector:
    """Fresh magnitudes on a fixed support."""
    support = np.asarray(sorted(support), dtype=int)
    phi = np.zeros(n)
    phi[support] = spec.M * rng.standard_normal(support.size)
    return AttackVector(phi, frozenset(int(i) for i in support))


def bypass_attack(C: np.ndarray, e) -> AttackVector:
    """phi = C e; shifts the least-squares estimate by e and leaves the residual alone."""
    C = np.asarray(C, dtype=float)
    e = np.asarray(e, dtype=float)
    if e.shape != (C.shape[1],):
        raise DimensionError(f"e must have length {C.shape[1]}, got {e.shape}")
    phi = C @ e
    return AttackVector(phi, frozenset(int(i) for i in np.flatnonzero(phi)))


def specific_sensor_attack(C: np.ndarray, sensors: Sequence[int], d) -> AttackVector:
    """Stealthy injection restricted to the given meters.

    With B = C (C'C)^- C' - I and B' its columns on the attacked meters, the
    reduced vector phi' = (I_m - B'^- B') d lies in the null space of B', so
    the full phi is in the column space of C.
    """
    C = np.asarray(C, dtype=float)
    n = C.shape[0]
    sensors = index_tuple(sensors)
    d = np.asarray(d, dtype=float)
    if d.shape != (len(sensors),):
        raise DimensionError(f"d must have one entry per attacked meter ({len(sensors)}), got {d.shape}")
    if sensors and not 0 <= sensors[0] <= sensors[-1] < n:
        raise DimensionError(f"meter indices must lie in [0, {n})")
    support = frozenset(sensors)
    if not np.any(d):
        return AttackVector(np.zeros(n), support)

    B = C @ generalized_inverse(C.T @ C) @ C.T - np.eye(n)
    B_m = B[:, list(sensors)]
    if numerical_rank(B_m) == len(sensors):
        raise NoStealthyAttackError(f"no stealthy attack for this sensor set {list(sensors)}")
    phi_m = (np.eye(len(sensors)) - generalized_inverse(B_m) @ B_m) @ d
    phi = np.zeros(n)
    phi[list(sensors)] = phi_m

    leak = np.linalg.norm(B @ phi)
    if leak > STEALTH_TOL * np.linalg.norm(phi):
        raise NumericalError(f"attack leaks outside the column space of C (||B phi|| = {leak:.3g})")
    logger.debug("specific-sensor attack on %d meters, ||phi|| = %.4g", len(sensors), np.linalg.norm(phi))
    return AttackVector(phi, support)


def targeted_attack(C: np.ndarray, targets: Sequence[int], c) -> AttackVector:
    """Targeted attack: move the chosen state coordinates by c."""
    C = np.asarray(C, dtype=float)
    p = C.shape[1]
    c = np.asarray(c, dtype=float)
    if c.shape != (len(targets),):
        raise DimensionError("c must have one shift per target state")
    if len(targets) >= p:
        raise DimensionError(f"at most {p - 1} target states, got {len(targets)}")
    if any(not 0 <= j < p for j in targets):
        raise DimensionError(f"target states must lie in [0, {p})")
    e = np.zeros(p)
    e[list(targets)] = c
    return bypass_attack(C, e)


def observability_bypass(model: SystemModel, eta: int, phi_base) -> ObservabilityBypass:
    """Window attack e = O^-1 (1_eta kron phi_base) against window least squares.

    The equality needs 1_eta kron phi_base in the range of O; otherwise the
    least-squares e is returned with inexact=True.
    """
    phi_base = np.asarray(phi_base, dtype=float)
    if phi_base.shape != (model.n,):
        raise DimensionError(f"phi_base must have length {model.n}, got {phi_base.shape}")
    if not 1 <= eta <= model.p:
        raise DimensionError(f"eta must lie in [1, {model.p}], got {eta}")
    O = observability_matrix(model.A, model.C, eta)
    if numerical_rank(O) < model.p:
        raise RankDeficientError(f"observability matrix for eta={eta} is rank deficient")
    target = np.tile(phi_base, eta)
    e = least_squares(O, target)
    stacked = O @ e
    miss = np.linalg.norm(stacked - target)
    inexact = bool(miss > STEALTH_TOL * np.linalg.norm(phi_base))
    if inexact:
        logger.warning("inexact bypass: ||O e - 1 kron phi|| = %.3g", miss)
    return ObservabilityBypass(e=e, stacked=stacked, inexact=inexact)


def _require_unprotected(vector: AttackVector, model: SystemModel) -> AttackVector:
    touched = sorted(vector.support & model.protected)
    if touched:
        raise ConfigError(f"attack touches protected meters {touched}")
    return vector


def realize_attack(
    spec: AttackSpec,
    model: SystemModel,
    rng: np.random.Generator,
    frame_y: np.ndarray | None = None,
    support=None,
    step: int = 0,
) -> AttackVector:
    """Attack vector for one frame.

    ``support`` pins the meters of a random attack (drawn once per run);
    ``step`` counts frames since the attack began and picks the window block
    of an observability bypass.
    """
    if frame_y is not None and np.shape(frame_y) != (model.n,):
        raise DimensionError(f"frame has shape {np.shape(frame_y)}, model expects ({model.n},)")
    if isinstance(spec, NoAttack):
        return AttackVector.zero(model.n)
    if isinstance(spec, RandomAttackSpec):
        if support is None:
            vector = random_attack(spec, model, rng)
        else:
            vector = random_magnitudes(spec, model.n, support, rng)
    elif isinstance(spec, SpecificSensorSpec):
        vector = specific_sensor_attack(model.C, spec.sensors, spec.d)
    elif isinstance(spec, TargetedSpec):
        vector = targeted_attack(model.C, spec.targets, spec.c)
    elif isinstance(spec, ObservabilityBypassSpec):
        bypass = observability_bypass(model, spec.eta, spec.phi_base)
        block = step % spec.eta
        phi = bypass.stacked[block * model.n:(block + 1) * model.n].copy()
        vector = AttackVector(phi, frozenset(int(i) for i in np.flatnonzero(phi)))
    else:
        raise ConfigError(f"unknown attack kind {getattr(spec, 'kind', spec)!r}")
    return _require_unprotected(vector, model)


def attack_summary(spec: AttackSpec, model: SystemModel, rng: np.random.Generator) -> AttackVectorOut:
    """One realization of an attack spec in its JSON form."""
    if isinstance(spec, ObservabilityBypassSpec):
        bypass = observability_bypass(model, spec.eta, spec.phi_base)
        blocks = bypass.stacked.reshape(spec.eta, model.n)
        support = sorted(int(i) for i in np.flatnonzero(np.any(blocks != 0.0, axis=0)))
        touched = sorted(set(support) & model.protected)
        if touched:
            raise ConfigError(f"attack touches protected meters {touched}")
        return AttackVectorOut(
            kind=spec.kind, n=model.n, support=support, phi=bypass.stacked.tolist(),
            e=bypass.e.tolist(), inexact=bypass.inexact,
        )
    vector = realize_attack(spec, model, rng)
    return AttackVectorOut(kind=spec.kind, n=model.n, support=sorted(vector.support), phi=vector.phi.tolist())
