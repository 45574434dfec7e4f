from contextlib import contextmanager

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware

from . import __version__, schemas
from .attacks import attack_summary
from .bundled import load_bundled_model
from .exceptions import ConfigError, DimensionError, NumericalError
from .harness import run_scenario
from .plant import model_from_file, validate_model
from .settings import BUNDLED_PREFIX, configure_logging

configure_logging()

app = FastAPI(title="GridShield attack-resilient state estimation")

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


@contextmanager
def domain_errors():
    try:
        yield
    except (ConfigError, DimensionError) as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    except NumericalError as exc:
        raise HTTPException(status_code=409, detail=str(exc))


@app.get('/health')
def health():
    return {'status': 'ok', 'version': __version__}


@app.post('/validate', response_model=schemas.ValidationReport)
def validate(model: schemas.ModelFile):
    return validate_model(model_from_file(model, check_rank=False))


@app.post('/attacks', response_model=schemas.AttackVectorOut, response_model_exclude_none=True)
def generate_attack(request: schemas.AttackRequest):
    with domain_errors():
        model = model_from_file(request.model) if request.model else load_bundled_model()
        return attack_summary(request.spec, model, np.random.default_rng(request.seed))


@app.post('/simulate', response_model=schemas.RmseReport)
def simulate(cfg: schemas.ScenarioConfig):
    if not cfg.model_path.startswith(BUNDLED_PREFIX):
        raise HTTPException(status_code=422, detail='Only bundled models can be simulated through the API')
    with domain_errors():
        return run_scenario(cfg)
