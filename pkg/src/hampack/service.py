"""HTTP service wrapping the packing pipeline.

Graphs travel as JSON edge lists; reports use the canonical report
schema. The CLI talks to this app in-process by default, so running a
server is only needed for remote use.
"""

from __future__ import annotations

from typing import Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .exposure import ConfigError
from .graph import Graph, gen_gnp
from .pipeline import (
    PackingConfig,
    PackingReport,
    pack,
    run_experiment,
    verify_packing,
)
from .pipeline import ALL_STAGES


class GraphPayload(BaseModel):
    n: int = Field(ge=1)
    edges: list[tuple[int, int]]

    def to_graph(self) -> Graph:
        return Graph.from_edges(self.n, self.edges)

    @classmethod
    def of(cls, g: Graph) -> "GraphPayload":
        return cls(n=g.n, edges=sorted(g.edges()))


class GenerateRequest(BaseModel):
    n: int = Field(ge=1)
    p: float = Field(ge=0.0, le=1.0)
    seed: int = 0


class PackRequest(BaseModel):
    n: int = Field(ge=3)
    p: float = Field(ge=0.0, le=1.0)
    seed: int = 0
    config: dict = Field(default_factory=dict)
    graph: Optional[GraphPayload] = None


class VerifyRequest(BaseModel):
    graph: GraphPayload
    report: dict


class VerifyResponse(BaseModel):
    passed: bool
    failures: list
    outcome_consistent: bool


class ExperimentRequest(BaseModel):
    grid: list[tuple[int, float]]
    trials: int = Field(ge=0)
    seed: int = 0
    config: dict = Field(default_factory=dict)
    stages: Optional[list[str]] = None


app = FastAPI(title="hampack", version=__version__)


def _config_from(data: dict, seed: int) -> PackingConfig:
    merged = dict(data)
    merged["seed"] = seed
    try:
        return PackingConfig.from_dict(merged)
    except (ConfigError, TypeError) as exc:
        raise HTTPException(status_code=422, detail=str(exc))


@app.get("/health")
def health():
    return {"status": "ok", "version": __version__}


@app.post("/generate", response_model=GraphPayload)
def generate(req: GenerateRequest):
    return GraphPayload.of(gen_gnp(req.n, req.p, req.seed))


@app.post("/pack")
def pack_endpoint(req: PackRequest):
    config = _config_from(req.config, req.seed)
    graph = req.graph.to_graph() if req.graph is not None else None
    try:
        report = pack(req.n, req.p, config, graph=graph)
    except ConfigError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return report.to_dict()


@app.post("/verify", response_model=VerifyResponse)
def verify(req: VerifyRequest):
    try:
        report = PackingReport.from_dict(req.report)
    except (ValueError, TypeError, KeyError) as exc:
        raise HTTPException(status_code=422, detail=f"malformed report: {exc}")
    g = req.graph.to_graph()
    result = verify_packing(g, report.cycles)
    consistent = (report.outcome == "full") == (
        result.passed and len(report.cycles) == report.k_target
    )
    return VerifyResponse(
        passed=result.passed,
        failures=result.failures,
        outcome_consistent=consistent,
    )


@app.post("/experiment")
def experiment(req: ExperimentRequest):
    config = _config_from(req.config, req.seed)
    stages = tuple(req.stages) if req.stages else ALL_STAGES
    try:
        return run_experiment(req.grid, req.trials, config, stages=stages)
    except ConfigError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
