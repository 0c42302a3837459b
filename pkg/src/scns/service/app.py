"""FastAPI wrapper around the experiment runner.

The service is stateless: every request carries the full plain-text
configuration, and responses embed the manifest so clients never need
server-side storage.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .. import __version__
from ..config import parse_config
from ..errors import PreconditionError
from ..galerkin import System
from ..oracles import run_oracle
from ..runner import emit_plot_data, run_experiment, selftest
from ..spectral import ConfigurationError


class RunRequest(BaseModel):
    config_text: str
    workers: int = Field(default=1, ge=1, le=64)
    output_dir: str | None = None


class RunResponse(BaseModel):
    exit_code: int
    manifest: dict
    plot_csv: str


class SelftestResponse(BaseModel):
    ok: bool
    cases: dict


def _execute(req: RunRequest, require_sweep: bool) -> RunResponse:
    try:
        cfg = parse_config(req.config_text)
        for sim in cfg.sweep_points():  # surface grid/basis violations up front
            System(sim)
    except (PreconditionError, ConfigurationError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    if require_sweep and not cfg.sweep_axis:
        raise HTTPException(status_code=422,
                            detail="sweep endpoint needs a [sweep] section")
    code, manifest = run_experiment(cfg, workers=req.workers, root=req.output_dir)
    import json
    from pathlib import Path

    root = Path(req.output_dir if req.output_dir is not None else cfg.output_dir)
    reports = [
        json.loads((root / point["directory"] / "report.json").read_text())
        for point in manifest["points"]
    ]
    return RunResponse(exit_code=code, manifest=manifest,
                       plot_csv=emit_plot_data(reports))


def create_app() -> FastAPI:
    app = FastAPI(title="scns", version=__version__)

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/run", response_model=RunResponse)
    def run(req: RunRequest):
        return _execute(req, require_sweep=False)

    @app.post("/sweep", response_model=RunResponse)
    def sweep(req: RunRequest):
        return _execute(req, require_sweep=True)

    @app.post("/selftest", response_model=SelftestResponse)
    def run_selftest():
        return SelftestResponse(**selftest())

    @app.get("/oracle/{case}")
    def oracle(case: str):
        try:
            return {"case": case, "result": run_oracle(case)}
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc

    return app
