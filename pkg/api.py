"""FastAPI service exposing bound evaluation, clustering and a health check."""
import logging
import math
from typing import Dict, List, Optional

import numpy as np
import uvicorn
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

import bounds
import experiments
from errors import NumericalError
from gomp import RATIO, StopPolicy
from numerics import as_matrix
from settings import API_KEY, SEED, THREADS, setup_logging

VERSION = "0.2.0"

setup_logging()
logger = logging.getLogger("api")

app = FastAPI(title="SSC-GOMP Service", version=VERSION)


@app.middleware("http")
async def _auth(request: Request, call_next):
    if API_KEY and request.headers.get("x-api-key") != API_KEY:
        return JSONResponse(status_code=401, content={"detail": "unauthorized"})
    return await call_next(request)


@app.exception_handler(ValueError)
async def _bad_request(request: Request, exc: ValueError):
    logger.error("%s %s: %s", request.method, request.url.path, exc)
    return JSONResponse(status_code=400, content={"detail": str(exc)})


@app.exception_handler(NumericalError)
@app.exception_handler(np.linalg.LinAlgError)
async def _numerical(request: Request, exc: Exception):
    logger.error("%s %s: numerical failure: %s", request.method, request.url.path, exc)
    return JSONResponse(status_code=422, content={"detail": str(exc)})


class BoundsRequest(BaseModel):
    n: int
    N: int
    cluster_size: int
    d_L: int
    sigma: float
    tau: float
    p: int = 1
    M: int = 1
    c: float = 1.0
    affinities: Optional[List[float]] = None
    k_t: Optional[int] = None
    k: Optional[int] = None


class ClusterRequest(BaseModel):
    points: List[List[float]]
    labels: Optional[List[int]] = None
    p: int = 1
    stop: str = RATIO
    clusters: Optional[int] = None
    seed: int = SEED
    normalize: bool = False


def _json_safe(row: Dict[str, object]) -> Dict[str, object]:
    # -inf appears when a loss term overflows; JSON has no infinities
    return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in row.items()}


@app.get("/health")
def health() -> Dict:
    return {"ok": True, "version": VERSION}


@app.post("/bounds")
def evaluate_bounds(req: BoundsRequest) -> Dict:
    params = bounds.BoundParams(
        n=req.n, N=req.N, cluster_size=req.cluster_size, d_L=req.d_L, sigma=req.sigma, tau=req.tau,
        p=req.p, M=req.M, c_const=req.c,
        affinities=tuple(req.affinities) if req.affinities else None,
    )
    return _json_safe(experiments.bound_row(params, req.k_t, req.k))


@app.post("/cluster")
def cluster(req: ClusterRequest) -> Dict:
    try:
        points = as_matrix(req.points, "points")
    except ValueError as exc:
        raise ValueError(f"points must be a rectangular list of rows: {exc}") from exc
    truth = np.asarray(req.labels, dtype=np.int64) if req.labels is not None else None
    if truth is not None and len(truth) != points.shape[0]:
        raise ValueError(f"{len(truth)} labels for {points.shape[0]} points")
    policy = StopPolicy.parse(req.stop, req.p)
    result = experiments.cluster_points(points, policy, req.clusters, truth, req.seed, THREADS, req.normalize)
    logger.info("clustered %d points into %d clusters", points.shape[0], result.labels.num_clusters)
    return {
        "labels": result.labels.assignment.tolist(),
        "num_clusters": result.labels.num_clusters,
        "metrics": _json_safe(result.report.to_row()),
        "halted_by": result.halted_by,
    }


if __name__ == "__main__":
    uvicorn.run("api:app", host="0.0.0.0", port=8000)
