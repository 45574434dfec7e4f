import numpy as np
import pytest
from fastapi.testclient import TestClient

from gridshield.attacks import observability_bypass, targeted_attack
from gridshield.bundled import (
    BUNDLED_MODEL,
    RANDOM_ATTACKED,
    SPECIFIC_SENSOR_MAGNITUDE,
    SPECIFIC_SENSOR_METERS,
    TARGET_SHIFT,
    TARGET_STATE,
    WARMUP_STEPS,
    default_estimators,
)
from gridshield.consistency import check_consistency
from gridshield.harness import bench_runtime, run_scenario, run_streams, simulate_frames
from gridshield.linalg_stats import least_squares
from gridshield.models import ConsistencyVariant
from gridshield.plant import observability_matrix, window_estimate
from gridshield.schemas import RandomAttackSpec, ScenarioConfig, SpecificSensorSpec, TargetedSpec

STEPS = 200
WINDOW = 50

ATTACKS = {
    "random": RandomAttackSpec(m=RANDOM_ATTACKED),
    "specific_sensor": SpecificSensorSpec(
        sensors=SPECIFIC_SENSOR_METERS,
        d=[SPECIFIC_SENSOR_MAGNITUDE] * len(SPECIFIC_SENSOR_METERS),
        one_based=True,
    ),
    "targeted": TargetedSpec(targets=[TARGET_STATE], c=[TARGET_SHIFT]),
}


def steady_state(series):
    return float(np.mean(series[-WINDOW:]))


@pytest.mark.slow
class TestDefenseEfficacy:
    """Steady-state error of the resilient filters against unprotected least squares."""

    @pytest.mark.parametrize("attack", list(ATTACKS))
    def test_two_orders_of_magnitude(self, attack):
        cfg = ScenarioConfig(
            model_path=BUNDLED_MODEL,
            steps=STEPS,
            runs=3,
            seed=0,
            attack=ATTACKS[attack],
            attack_start=WARMUP_STEPS,
            estimators=default_estimators(),
        )
        report = run_scenario(cfg)
        ls = steady_state(report.rmse["LS"])
        assert ls > 1.0
        assert steady_state(report.rmse["PCNA"]) <= 1e-2 * ls
        assert steady_state(report.rmse["CCKF"]) <= 1e-2 * ls

    def test_clean_run_keeps_filters_accurate(self):
        cfg = ScenarioConfig(model_path=BUNDLED_MODEL, steps=STEPS, runs=2, estimators=default_estimators())
        report = run_scenario(cfg)
        for name in ("KF", "PCNA", "CCKF"):
            assert steady_state(report.rmse[name]) < steady_state(report.rmse["LS"])


@pytest.mark.slow
class TestRuntimeTrend:
    """Per-trajectory cost grows with the state dimension."""

    def test_cost_grows_with_dimension(self):
        table = bench_runtime([10, 25, 50], reps=5, steps=10)
        assert all(row.error is None for row in table.rows)
        for estimator in ("MMSE", "PCNA", "CCKF"):
            assert table.row(50, estimator).mean_seconds > table.row(10, estimator).mean_seconds

    def test_pruning_is_cheaper_than_expansion(self):
        """PCNA costs less than CCKF and its cost grows more slowly with p."""
        table = bench_runtime([10, 50], reps=5, steps=10)

        def growth(estimator):
            return table.row(50, estimator).mean_seconds / table.row(10, estimator).mean_seconds

        assert table.row(50, "PCNA").mean_seconds < table.row(50, "CCKF").mean_seconds
        assert growth("PCNA") < growth("CCKF")


class TestStealthyAttacks:
    """Column-space attacks pass the static check and move least squares."""

    def test_targeted_attack_over_a_trajectory(self, bundled_model):
        cfg = ScenarioConfig(steps=100, attack=ATTACKS["targeted"], estimators=default_estimators())
        plant_rng, attack_rng = run_streams(0, 0, 2)
        variant = ConsistencyVariant.static_euclidean()
        every = range(bundled_model.n)
        for _, frame in simulate_frames(cfg, bundled_model, plant_rng, attack_rng):
            clean = check_consistency(variant, bundled_model.C, None, every, frame.y_clean, 0.005, 0.1)
            attacked = check_consistency(variant, bundled_model.C, None, every, frame.y_observed, 0.005, 0.1)
            assert attacked.statistic == pytest.approx(clean.statistic, rel=1e-8)
            assert np.linalg.norm(attacked.estimate - clean.estimate) >= 1.0

    @pytest.mark.parametrize("eta", [2, 3, 5])
    def test_window_least_squares_is_bypassed(self, bundled_model, rng, eta):
        """A window-consistent injection shifts the window estimate by e with the residual unchanged."""
        O = observability_matrix(bundled_model.A, bundled_model.C, eta)
        Y = O @ rng.standard_normal(bundled_model.p) + rng.normal(0.0, 0.3, O.shape[0])
        phi_base = targeted_attack(bundled_model.C, [TARGET_STATE], [TARGET_SHIFT]).phi
        bypass = observability_bypass(bundled_model, eta, phi_base)
        shift = window_estimate(bundled_model, Y + bypass.stacked, eta) - window_estimate(bundled_model, Y, eta)
        np.testing.assert_allclose(shift, bypass.e, atol=1e-8)
        residual = np.linalg.norm(Y - O @ least_squares(O, Y))
        attacked = np.linalg.norm(Y + bypass.stacked - O @ least_squares(O, Y + bypass.stacked))
        assert attacked == pytest.approx(residual, abs=1e-8)


class TestServiceWorkflow:
    """Validate, attack and simulate through the HTTP service."""

    def test_validate_attack_simulate(self, client: TestClient, tiny_model_data):
        # 1. Validate a user model
        response = client.post("/validate", json=tiny_model_data)
        assert response.status_code == 200
        assert response.json()["violations"] == []

        # 2. Realize an attack against it
        response = client.post("/attacks", json={
            "model": tiny_model_data,
            "spec": {"kind": "specific_sensor", "sensors": [0, 1, 2], "d": [1.0, 1.0, 1.0]},
        })
        assert response.status_code == 200
        attack = response.json()
        assert set(attack["support"]) <= {0, 1, 2}

        # 3. Simulate the bundled model under the same kind of attack
        response = client.post("/simulate", json={
            "steps": 8,
            "attack": {"kind": "random", "m": 5},
            "attack_start": 3,
            "estimators": [{"name": "LS", "estimator": "LeastSquares"}, {"name": "PCNA", "estimator": "PCNA"}],
        })
        assert response.status_code == 200
        assert response.json()["attack"] == "random"
