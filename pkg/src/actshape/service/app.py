"""HTTP front end: config validation, queued training/sweep jobs, plots."""
from __future__ import annotations

import logging
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor

from fastapi import FastAPI, HTTPException, Response

from .. import api
from ..harness.config import ConfigError, config_from_json
from ..harness.curves import EmptyInput, IncomparableBudgets, compare, curve_from_csv
from ..harness.plot import render_svg
from ..harness.presets import PRESETS, preset
from .schemas import (
    CompareRequest,
    CompareResponse,
    EnumerateRequest,
    EnumerateResponse,
    ExperimentSummary,
    Job,
    PlotRequest,
    SweepRequest,
    TrainRequest,
)

log = logging.getLogger(__name__)


class JobStore:
    """In-memory job table; training runs one job at a time on a worker thread."""

    def __init__(self, workers: int = 1):
        self._jobs: dict[str, Job] = {}
        self._lock = threading.Lock()
        self._pool = ThreadPoolExecutor(max_workers=workers)

    def submit(self, kind: str, fn) -> Job:
        job = Job(id=uuid.uuid4().hex[:12], kind=kind, status="queued")
        with self._lock:
            self._jobs[job.id] = job
        self._pool.submit(self._run, job.id, fn)
        return job

    def _set(self, job_id: str, **changes):
        with self._lock:
            self._jobs[job_id] = self._jobs[job_id].model_copy(update=changes)

    def _run(self, job_id: str, fn):
        self._set(job_id, status="running")
        try:
            results = fn()
        except Exception as exc:  # noqa: BLE001 - surfaced through the job record
            log.exception("job %s failed", job_id)
            self._set(job_id, status="failed", error=f"{type(exc).__name__}: {exc}")
            return
        summaries = [ExperimentSummary(**api.result_summary(r)) for r in results]
        failed = any(s.failures for s in summaries)
        self._set(job_id, status="failed" if failed else "done", results=summaries,
                  error="some seeds failed" if failed else None)

    def get(self, job_id: str) -> Job:
        with self._lock:
            if job_id not in self._jobs:
                raise KeyError(job_id)
            return self._jobs[job_id]

    def list(self) -> list[Job]:
        with self._lock:
            return list(self._jobs.values())


def _parse(config: dict):
    try:
        return config_from_json(config)
    except ConfigError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


def create_app(workers: int = 1) -> FastAPI:
    app = FastAPI(title="actshape", version="0.1.0")
    jobs = JobStore(workers)
    app.state.jobs = jobs

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/presets")
    def presets():
        return {name: [c.name for c in preset(name)] for name in PRESETS}

    @app.post("/enumerate", response_model=EnumerateResponse)
    def enumerate_(req: EnumerateRequest):
        return api.enumerate_config(_parse(req.config))

    @app.post("/train", response_model=Job, status_code=202)
    def train(req: TrainRequest):
        config = _parse(req.config)
        return jobs.submit("train", lambda: [api.train_config(config, req.seed, req.out)])

    @app.post("/sweep", response_model=Job, status_code=202)
    def sweep(req: SweepRequest):
        if (req.preset is None) == (req.config is None):
            raise HTTPException(status_code=422, detail="give exactly one of 'preset' or 'config'")
        if req.preset is not None:
            if req.preset not in PRESETS:
                raise HTTPException(status_code=422, detail=f"unknown preset {req.preset!r}")
            configs = preset(req.preset, seeds=req.seeds, budget=req.budget)
        else:
            config = _parse(req.config)
            if req.seeds:
                config = config.with_seeds(req.seeds)
            configs = [config]
        name = req.preset or configs[0].name
        return jobs.submit("sweep", lambda: api.sweep(configs, req.out, plot_name=name))

    @app.get("/jobs", response_model=list[Job])
    def list_jobs():
        return jobs.list()

    @app.get("/jobs/{job_id}", response_model=Job)
    def get_job(job_id: str):
        try:
            return jobs.get(job_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no job {job_id}") from None

    @app.post("/plot")
    def plot(req: PlotRequest):
        try:
            curves = [api.parse_any_curve(text) for text in req.curves.values()]
            svg = render_svg(curves, labels=list(req.curves), title=req.title)
        except (ValueError, EmptyInput) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return Response(content=svg, media_type="image/svg+xml")

    @app.post("/compare", response_model=CompareResponse)
    def compare_(req: CompareRequest):
        try:
            a = [curve_from_csv(t, seed=i) for i, t in enumerate(req.a)]
            b = [curve_from_csv(t, seed=i) for i, t in enumerate(req.b)]
            c = compare(a, b, req.metric)
        except (ValueError, EmptyInput, IncomparableBudgets) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return CompareResponse(
            metric=c.metric, a_mean=c.a_mean, a_std=c.a_std, b_mean=c.b_mean, b_std=c.b_std,
            difference=c.difference, preserved_fraction=c.preserved_fraction,
        )

    return app


app = create_app()
