"""
FastAPI application for the broyden_lab experiment harness.

This API exposes single experiment runs, the randomized verification suites
and the scalar local-region thresholds over REST.
"""

import logging
import math
import traceback

from dotenv import load_dotenv
from fastapi import FastAPI, HTTPException
from fastapi.concurrency import run_in_threadpool
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from broyden_lab.bounds import k0, region_radius
from broyden_lab.shared_libraries.errors import BroydenLabError, ConfigError
from broyden_lab.shared_libraries.settings import LOG_FORMAT
from broyden_lab.shared_libraries.types import (
    ExperimentConfig,
    ExperimentResult,
    K0Request,
    VerificationReport,
    VerifyRequest,
)
from broyden_lab.verifiers import VERIFIERS, run_verification
from broyden_lab.workflow import run_experiment

# Load environment variables from .env file
load_dotenv()

logging.basicConfig(level=logging.INFO, format=LOG_FORMAT)
logger = logging.getLogger(__name__)


app = FastAPI(
    title="Broyden Lab API",
    description="API for running and verifying convex Broyden-class quasi-Newton experiments",
    version="1.0.0",
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


class K0Response(BaseModel):
    """Local-region thresholds for one parameter set"""
    k0: int
    region_radius: float | None = None
    request: K0Request


@app.get("/")
async def root():
    """Health check endpoint"""
    return {
        "service": "Broyden Lab API",
        "status": "online",
        "version": "1.0.0",
    }


@app.get("/health")
async def health():
    """Detailed health check"""
    return {
        "status": "healthy",
        "verifiers": [v.name for v in VERIFIERS],
    }


@app.post("/run", response_model=ExperimentResult)
async def run(config: ExperimentConfig):
    """
    Run one experiment in memory and return its verdict.

    No files are written; the result carries the envelope summaries and the
    trace checks.

    Raises:
        HTTPException: 422 if the instance or start cannot be realized, 500 if
            the run crashes outside the library's error handling
    """
    try:
        return await run_in_threadpool(run_experiment, config, None, False)
    except ConfigError as e:
        raise HTTPException(status_code=422, detail=str(e))
    except Exception as e:
        logger.error("Experiment run failed with exception:")
        logger.error(traceback.format_exc())
        raise HTTPException(status_code=500, detail=f"Experiment run failed: {str(e)}")


@app.post("/verify", response_model=VerificationReport)
async def verify(request: VerifyRequest):
    """Run the three verification suites and combine them into a global verdict."""
    try:
        return await run_in_threadpool(run_verification, request)
    except Exception as e:
        logger.error(traceback.format_exc())
        raise HTTPException(status_code=500, detail=f"Verification failed: {str(e)}")


@app.post("/k0", response_model=K0Response)
async def thresholds(request: K0Request):
    """K0 and, when M > 0, the radius of the local region."""
    try:
        count = k0(request.n, request.mu, request.ell, request.sup_tau)
        radius = region_radius(request.mu, request.ell, request.n, request.sup_tau, request.m_const)
    except BroydenLabError as e:
        raise HTTPException(status_code=422, detail=str(e))
    return K0Response(k0=count, region_radius=None if math.isinf(radius) else radius, request=request)


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host="0.0.0.0", port=8000)
