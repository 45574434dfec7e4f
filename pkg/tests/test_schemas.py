import pytest
from pydantic import TypeAdapter, ValidationError

from gridshield.models import EstimatorKind, Metric, SelectorKind
from gridshield.schemas import (
    AttackRequest,
    AttackSpec,
    EstimatorConfig,
    ModelFile,
    NoAttack,
    ObservabilityBypassSpec,
    RandomAttackSpec,
    RuntimeRow,
    RuntimeTable,
    ScenarioConfig,
    SpecificSensorSpec,
    TargetedSpec,
    ValidationReport,
)


class TestModelFileSchema:
    """Test cases for the model file schema."""

    def test_valid_model(self, tiny_model_data):
        spec = ModelFile(**tiny_model_data)
        assert spec.p == 2
        assert spec.protected == [3]

    def test_protected_defaults_empty(self, tiny_model_data):
        data = dict(tiny_model_data)
        del data["protected"]
        assert ModelFile(**data).protected == []

    def test_missing_matrix(self, tiny_model_data):
        """A is required."""
        data = dict(tiny_model_data)
        del data["A"]
        with pytest.raises(ValidationError):
            ModelFile(**data)

    def test_wrong_C_shape(self, tiny_model_data):
        with pytest.raises(ValidationError, match="C must be 4x2"):
            ModelFile(**dict(tiny_model_data, C=[[1.0, 0.0]] * 3))

    def test_ragged_A(self, tiny_model_data):
        with pytest.raises(ValidationError, match="A must be 2x2"):
            ModelFile(**dict(tiny_model_data, A=[[1.0, 0.0], [0.0]]))

    def test_zero_variance(self, tiny_model_data):
        with pytest.raises(ValidationError, match="variance must be positive"):
            ModelFile(**dict(tiny_model_data, sigma_w2=0.0))

    def test_protected_out_of_range(self, tiny_model_data):
        with pytest.raises(ValidationError, match="protected indices out of range"):
            ModelFile(**dict(tiny_model_data, protected=[4]))


class TestAttackSpecs:
    """Test cases for the tagged attack specifications."""

    @pytest.mark.parametrize("payload, cls", [
        ({"kind": "none"}, NoAttack),
        ({"kind": "random", "m": 3}, RandomAttackSpec),
        ({"kind": "specific_sensor", "sensors": [0, 1], "d": [1.0, 2.0]}, SpecificSensorSpec),
        ({"kind": "targeted", "targets": [1], "c": [5.0]}, TargetedSpec),
        ({"kind": "observability_bypass", "eta": 2, "phi_base": [0.0, 1.0]}, ObservabilityBypassSpec),
    ])
    def test_discriminator(self, payload, cls):
        assert isinstance(TypeAdapter(AttackSpec).validate_python(payload), cls)

    def test_unknown_kind(self):
        with pytest.raises(ValidationError):
            TypeAdapter(AttackSpec).validate_python({"kind": "replay"})

    def test_random_defaults(self):
        spec = RandomAttackSpec(m=14)
        assert spec.M == 10.0

    def test_negative_meter_count(self):
        with pytest.raises(ValidationError):
            RandomAttackSpec(m=-1)

    def test_one_based_sensors_are_normalized(self):
        """One-based meter numbers are stored zero-based."""
        spec = SpecificSensorSpec(sensors=[1, 5, 33], d=[1.0, 1.0, 1.0], one_based=True)
        assert spec.sensors == [0, 4, 32]
        assert spec.one_based is False

    def test_one_based_rejects_zero(self):
        with pytest.raises(ValidationError, match="start at 1"):
            SpecificSensorSpec(sensors=[0, 1], d=[1.0, 1.0], one_based=True)

    def test_duplicate_sensors(self):
        with pytest.raises(ValidationError, match="distinct"):
            SpecificSensorSpec(sensors=[2, 2], d=[1.0, 1.0])

    def test_injection_length(self):
        with pytest.raises(ValidationError):
            SpecificSensorSpec(sensors=[0, 1], d=[1.0])

    def test_targeted_needs_targets(self):
        with pytest.raises(ValidationError, match="targets cannot be empty"):
            TargetedSpec(targets=[], c=[])

    def test_targeted_shift_length(self):
        with pytest.raises(ValidationError):
            TargetedSpec(targets=[0, 1], c=[1.0])

    def test_bypass_window_positive(self):
        with pytest.raises(ValidationError):
            ObservabilityBypassSpec(eta=0, phi_base=[1.0])


class TestEstimatorConfigSchema:
    """Test cases for estimator settings."""

    def test_defaults(self):
        cfg = EstimatorConfig(estimator="CCKF")
        assert cfg.name == "CCKF"
        assert cfg.estimator is EstimatorKind.CCKF
        assert cfg.selector is SelectorKind.RANK_EXPANDING
        assert cfg.metric is Metric.EUCLIDEAN
        assert (cfg.alpha, cfg.P_h, cfg.n_best, cfg.rho) == (0.005, 0.995, 3, 0.05)

    def test_explicit_name_kept(self):
        assert EstimatorConfig(name="mine", estimator="PCNA").name == "mine"

    @pytest.mark.parametrize("field, value", [
        ("alpha", 0.0), ("alpha", 1.0), ("P_h", 1.0), ("rho", 1.0), ("rho", -0.1), ("n_best", 0), ("max_seeds", 0),
    ])
    def test_out_of_range(self, field, value):
        with pytest.raises(ValidationError):
            EstimatorConfig(estimator="CCKF", **{field: value})

    def test_unknown_estimator(self):
        with pytest.raises(ValidationError):
            EstimatorConfig(estimator="Particle")


class TestScenarioConfigSchema:
    """Test cases for scenario files."""

    def test_defaults(self):
        cfg = ScenarioConfig(steps=10, estimators=[{"estimator": "Kalman"}])
        assert cfg.model_path == "bundled:ieee14_surrogate"
        assert cfg.runs == 1
        assert isinstance(cfg.attack, NoAttack)
        assert cfg.step_seconds == 0.1

    def test_attack_start_after_end(self):
        with pytest.raises(ValidationError, match="attack_start"):
            ScenarioConfig(steps=10, attack_start=10, estimators=[{"estimator": "Kalman"}])

    def test_needs_an_estimator(self):
        with pytest.raises(ValidationError, match="at least one estimator"):
            ScenarioConfig(steps=10, estimators=[])

    def test_duplicate_names(self):
        with pytest.raises(ValidationError, match="unique"):
            ScenarioConfig(steps=10, estimators=[{"estimator": "PCNA"}, {"estimator": "PCNA"}])

    def test_nested_attack(self):
        cfg = ScenarioConfig(
            steps=10, attack={"kind": "targeted", "targets": [3], "c": [10.0]}, estimators=[{"estimator": "PCNA"}]
        )
        assert isinstance(cfg.attack, TargetedSpec)


class TestReportSchemas:
    """Test cases for runtime and validation reports."""

    def test_runtime_row_lookup(self):
        table = RuntimeTable(rows=[RuntimeRow(p=10, n=30, estimator="CCKF", mean_seconds=0.2, sd_seconds=0.01, reps=5)])
        assert table.row(10, "CCKF").mean_seconds == 0.2
        with pytest.raises(KeyError):
            table.row(25, "CCKF")

    def test_negative_runtime(self):
        with pytest.raises(ValidationError):
            RuntimeRow(p=10, n=30, estimator="CCKF", mean_seconds=-1.0, sd_seconds=0.0, reps=5)

    def test_validation_report_ok(self):
        assert ValidationReport(n=4, p=2, rank_C=2, spectral_radius_A=0.9).ok
        assert not ValidationReport(n=4, p=2, rank_C=1, spectral_radius_A=0.9, violations=["C rank < p"]).ok

    def test_attack_request_without_model(self):
        request = AttackRequest(spec={"kind": "random", "m": 2})
        assert request.model is None
        assert request.seed == 0
