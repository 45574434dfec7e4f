"""Bundled surrogate model and the sample scenarios shipped in scenarios/."""
from pathlib import Path

from .models import EstimatorKind, SelectorKind, SystemModel
from .plant import load_model
from .schemas import (
    EstimatorConfig,
    NoAttack,
    RandomAttackSpec,
    ScenarioConfig,
    SpecificSensorSpec,
    TargetedSpec,
)
from .settings import BUNDLED_MODEL_NAME, BUNDLED_PREFIX, PACKAGE_ROOT

BUNDLED_MODEL = f"{BUNDLED_PREFIX}{BUNDLED_MODEL_NAME}"
SCENARIO_DIR = PACKAGE_ROOT.parent / "scenarios"

# Meters of the specific-sensor attack, 1-based numbering.
SPECIFIC_SENSOR_METERS = [1, 2, 3, 4, 5, 13, 15, 16, 17, 18, 19, 20, 28, 33]
SPECIFIC_SENSOR_MAGNITUDE = 50.0
TARGET_STATE = 3
TARGET_SHIFT = 10.0
RANDOM_ATTACKED = 14
WARMUP_STEPS = 20


def load_bundled_model() -> SystemModel:
    return load_model(BUNDLED_MODEL)


def default_estimators() -> list[EstimatorConfig]:
    return [
        EstimatorConfig(name="LS", estimator=EstimatorKind.LEAST_SQUARES),
        EstimatorConfig(name="KF", estimator=EstimatorKind.KALMAN),
        EstimatorConfig(name="PCNA", estimator=EstimatorKind.PCNA),
        EstimatorConfig(name="CCKF", estimator=EstimatorKind.CCKF, selector=SelectorKind.RANK_EXPANDING),
    ]


def sample_scenarios(steps: int = 200, runs: int = 100) -> dict[str, ScenarioConfig]:
    attacks = {
        'clean': NoAttack(),
        'random': RandomAttackSpec(m=RANDOM_ATTACKED),
        'specific_sensor': SpecificSensorSpec(
            sensors=SPECIFIC_SENSOR_METERS,
            d=[SPECIFIC_SENSOR_MAGNITUDE] * len(SPECIFIC_SENSOR_METERS),
            one_based=True,
        ),
        'targeted': TargetedSpec(targets=[TARGET_STATE], c=[TARGET_SHIFT]),
    }
    return {
        name: ScenarioConfig(
            model_path=BUNDLED_MODEL,
            steps=steps,
            runs=runs,
            seed=0,
            attack=attack,
            attack_start=0 if isinstance(attack, NoAttack) else WARMUP_STEPS,
            estimators=default_estimators(),
        )
        for name, attack in attacks.items()
    }


def write_sample_scenarios(directory: Path = SCENARIO_DIR) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name, cfg in sample_scenarios().items():
        path = directory / f"{name}.json"
        path.write_text(cfg.model_dump_json(indent=2, exclude_none=True))
        written.append(path)
    return written


if __name__ == '__main__':
    for path in write_sample_scenarios():
        print(f'Wrote {path}')
