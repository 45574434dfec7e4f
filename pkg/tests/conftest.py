import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from gridshield.bundled import load_bundled_model
from gridshield.main import app
from gridshield.models import MeasurementFrame, SimState, SystemModel
from gridshield.plant import random_model
from gridshield.schemas import EstimatorConfig


@pytest.fixture(scope="session")
def bundled_model():
    """The packaged 35-meter, 10-state surrogate model."""
    return load_bundled_model()


@pytest.fixture
def rng():
    return np.random.default_rng(20240614)


@pytest.fixture
def make_model():
    """Factory for stable random models with a dense measurement map."""
    def _make(p=3, n=10, seed=0, **kwargs):
        return random_model(p, n, np.random.default_rng(seed), **kwargs)
    return _make


@pytest.fixture
def small_model(make_model):
    return make_model(p=3, n=10, seed=7)


@pytest.fixture
def clean_trajectory():
    """Noise-free trajectory: x(k+1) = A x(k), y(k) = C x(k), exact frames."""
    def _trajectory(model: SystemModel, steps: int, seed: int = 0):
        x = np.random.default_rng(seed).standard_normal(model.p)
        states, frames = [], []
        for k in range(steps):
            if k > 0:
                x = model.A @ x
            y = model.C @ x
            states.append(SimState(x=x.copy(), k=k))
            frames.append(MeasurementFrame(y_clean=y, y_observed=y.copy(), k=k))
        return states, frames
    return _trajectory


@pytest.fixture
def estimator_config():
    def _config(estimator, **kwargs):
        return EstimatorConfig(estimator=estimator, **kwargs)
    return _config


@pytest.fixture
def model_file(tmp_path):
    """Write a model dict to a temporary JSON file and return its path."""
    def _write(data, name="model.json"):
        path = tmp_path / name
        path.write_text(json.dumps(data))
        return path
    return _write


@pytest.fixture
def tiny_model_data():
    return {
        "name": "tiny",
        "p": 2,
        "n": 4,
        "A": [[0.9, 0.1], [0.0, 0.8]],
        "C": [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, -1.0]],
        "sigma_w2": 1e-4,
        "sigma_v2": 0.01,
        "protected": [3],
    }


@pytest.fixture
def client():
    with TestClient(app) as test_client:
        yield test_client
