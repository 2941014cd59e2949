"""HTTP service exposing the localization pipeline.

The service wraps the same runner functions the CLI uses; it exists so
multiple clients can share one process (and one backend rate budget) for
long-running batch work.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from . import __version__
from .errors import (
    BackendError,
    ConfigError,
    EvalError,
    FrameIOError,
    OracleError,
    TimelineError,
)
from .models import (
    EvaluateRequest,
    EvaluateResponse,
    LocalizeRequest,
    LocalizeResponse,
    ScanRequest,
    ScanResponse,
    SweepRequest,
    SweepResponse,
    TransitionsRequest,
    TransitionsResponse,
)
from .runner import run_evaluate, run_localize, run_scan, run_transitions
from .sweep import run_sweep

app = FastAPI(title="vlmloc", version=__version__)

_CLIENT_ERRORS = (ConfigError, TimelineError, EvalError)


def _guard(fn, req):
    try:
        return fn(req)
    except _CLIENT_ERRORS as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    except FrameIOError as exc:
        raise HTTPException(status_code=404, detail=str(exc)) from exc
    except (BackendError, OracleError) as exc:
        raise HTTPException(status_code=502, detail=str(exc)) from exc


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/localize", response_model=LocalizeResponse)
def localize(req: LocalizeRequest) -> LocalizeResponse:
    return _guard(run_localize, req)


@app.post("/transitions", response_model=TransitionsResponse)
def transitions(req: TransitionsRequest) -> TransitionsResponse:
    return _guard(run_transitions, req)


@app.post("/scan", response_model=ScanResponse)
def scan(req: ScanRequest) -> ScanResponse:
    return _guard(run_scan, req)


@app.post("/evaluate", response_model=EvaluateResponse)
def evaluate(req: EvaluateRequest) -> EvaluateResponse:
    return _guard(run_evaluate, req)


@app.post("/sweep", response_model=SweepResponse)
def sweep(req: SweepRequest) -> SweepResponse:
    return _guard(run_sweep, req)
