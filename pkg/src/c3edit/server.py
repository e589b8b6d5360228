"""Session-scoped HTTP API consumed by the web UI.

One mutating job runs at a time; progress is published as an atomic
snapshot polled by clients. CLI and API mutations exclude each other through
the session lock file.
"""

from __future__ import annotations

import io
import json
import threading
import uuid
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import FileResponse, JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles
from filelock import FileLock, Timeout
from PIL import Image

from .errors import C3EditError, NumericFault, PhaseError, ValidationError
from .pipeline import EditSession, phase_index

LOCK_TIMEOUT = 0.5

# Phase jobs the API can launch, with the phase each one requires.
PHASE_JOBS = {
    "fit": "gt_selected",
    "propagate": "gt_fitted",
    "edit": "propagated",
    "lift": "edited",
}


class JobManager:
    """Single-slot background job runner with a polled progress snapshot."""

    def __init__(self, session_dir: Path):
        self.session_dir = session_dir
        self._slot = threading.Lock()
        self.current: dict | None = None
        self.progress: dict = {}

    def running(self) -> bool:
        return self.current is not None and self.current["state"] == "running"

    def start(self, phase_name: str) -> str:
        with self._slot:
            if self.running():
                raise HTTPException(status_code=409, detail="a job is already running")
            job_id = uuid.uuid4().hex[:8]
            self.current = {"id": job_id, "phase": phase_name, "state": "running", "error": None}
            self.progress = {}
        worker = threading.Thread(target=self._run, args=(phase_name,), daemon=True)
        worker.start()
        return job_id

    def _publish(self, info: dict):
        self.progress = dict(info)

    def _run(self, phase_name: str):
        try:
            lock = FileLock(self.session_dir / "session.lock")
            with lock.acquire(timeout=LOCK_TIMEOUT):
                session = EditSession.load(self.session_dir)
                runner = {
                    "fit": session.fit_gt,
                    "propagate": session.propagate,
                    "edit": session.edit_all_views,
                    "lift": session.lift_to_3d,
                }[phase_name]
                if phase_name in ("edit",):
                    runner(progress_cb=self._publish)
                elif phase_name == "lift":
                    runner(masks=None, progress_cb=self._publish)
                else:
                    runner(progress_cb=self._publish)
                session.save()
            self.current = {**self.current, "state": "done"}
        except Timeout:
            self.current = {**self.current, "state": "failed",
                            "error": "session is locked by another process"}
        except Exception as exc:  # job failures surface via /api/progress
            self.current = {**self.current, "state": "failed", "error": str(exc)}


def _read_manifest(session_dir: Path) -> dict:
    manifest_path = session_dir / "manifest.json"
    if not manifest_path.exists():
        raise HTTPException(status_code=404, detail="session manifest not found")
    with open(manifest_path) as fh:
        return json.load(fh)


def _default_ui_dir() -> Path | None:
    import os

    env = os.environ.get("C3EDIT_UI_DIR")
    if env:
        return Path(env)
    repo_ui = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    return repo_ui if repo_ui.is_dir() else None


def create_app(session_dir: Path, ui_dir: Path | None = None) -> FastAPI:
    session_dir = Path(session_dir)
    if not (session_dir / "manifest.json").exists():
        raise ValidationError(f"{session_dir} is not a session directory")
    app = FastAPI(title="c3edit session API")
    jobs = JobManager(session_dir)

    @app.get("/api/session")
    def get_session():
        manifest = _read_manifest(session_dir)
        with open(session_dir / "config.json") as fh:
            manifest["config"] = json.load(fh)
        return manifest

    @app.get("/api/candidates")
    def get_candidates():
        index_path = session_dir / "candidates" / "index.json"
        if not index_path.exists():
            return []
        with open(index_path) as fh:
            index = json.load(fh)
        return [
            {
                "view_id": entry["view_id"],
                "seed": entry["seed"],
                "image_url": f"/api/images/{entry['file']}",
                "render_url": f"/api/images/renders/view{entry['view_id']}.png",
            }
            for entry in index
        ]

    @app.get("/api/images/{name:path}")
    def get_image(name: str):
        if name.startswith("renders/"):
            return _render_image(name)
        target = (session_dir / name).resolve()
        if session_dir.resolve() not in target.parents and target != session_dir.resolve():
            raise HTTPException(status_code=400, detail="invalid image path")
        if target.suffix != ".png" or not target.exists():
            raise HTTPException(status_code=404, detail=f"image {name} not found")
        return FileResponse(target, media_type="image/png")

    def _render_image(name: str):
        # Renders are derived, not stored; rasterize on demand and cache.
        cache_dir = session_dir / "renders"
        cache_dir.mkdir(exist_ok=True)
        target = (cache_dir / Path(name).name).resolve()
        if not target.exists():
            try:
                view_id = int(Path(name).stem.removeprefix("view"))
            except ValueError:
                raise HTTPException(status_code=404, detail=f"bad render name {name}")
            session = EditSession.load(session_dir)
            from .scene import save_png

            try:
                save_png(target, session.render_view(view_id).pixels)
            except ValidationError as exc:
                raise HTTPException(status_code=404, detail=str(exc))
        return FileResponse(target, media_type="image/png")

    @app.post("/api/select-gt")
    async def select_gt(request: Request):
        content_type = request.headers.get("content-type", "")
        override = None
        candidate_seed = None
        if content_type.startswith("multipart/form-data"):
            form = await request.form()
            if "view_id" not in form:
                raise HTTPException(status_code=400, detail="view_id is required")
            view_id = int(form["view_id"])
            if form.get("candidate_seed") not in (None, ""):
                candidate_seed = int(form["candidate_seed"])
            upload = form.get("image")
            if upload is not None and hasattr(upload, "read"):
                data = await upload.read()
                try:
                    with Image.open(io.BytesIO(data)) as img:
                        override = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
                except Exception:
                    raise HTTPException(status_code=400, detail="uploaded file is not a valid image")
        else:
            body = await request.json()
            if "view_id" not in body:
                raise HTTPException(status_code=400, detail="view_id is required")
            view_id = int(body["view_id"])
            candidate_seed = body.get("candidate_seed")
        if jobs.running():
            raise HTTPException(status_code=409, detail="a job is already running")
        lock = FileLock(session_dir / "session.lock")
        try:
            with lock.acquire(timeout=LOCK_TIMEOUT):
                session = EditSession.load(session_dir)
                try:
                    session.select_gt(view_id, override_image=override,
                                      candidate_seed=candidate_seed)
                except PhaseError as exc:
                    raise HTTPException(
                        status_code=409,
                        detail=f"{exc} (requires phase '{exc.required_phase}')",
                    )
                except ValidationError as exc:
                    raise HTTPException(status_code=400, detail=str(exc))
                session.save()
        except Timeout:
            raise HTTPException(status_code=409, detail="session is locked by another process")
        return {"gt_view_id": view_id, "phase": "gt_selected"}

    @app.post("/api/phase/{phase_name}")
    def start_phase(phase_name: str):
        if phase_name not in PHASE_JOBS:
            raise HTTPException(status_code=404, detail=f"unknown phase job {phase_name}")
        manifest = _read_manifest(session_dir)
        required = PHASE_JOBS[phase_name]
        if manifest["phase"] != required:
            raise HTTPException(
                status_code=409,
                detail=f"phase '{phase_name}' requires session phase '{required}', "
                f"current is '{manifest['phase']}'",
            )
        job_id = jobs.start(phase_name)
        return {"job_id": job_id, "phase": phase_name}

    @app.get("/api/progress")
    def get_progress():
        manifest = _read_manifest(session_dir)
        return {
            "phase": manifest["phase"],
            "job": jobs.current,
            "progress": jobs.progress,
        }

    @app.get("/api/metrics")
    def get_metrics():
        report_path = session_dir / "report.json"
        if report_path.exists():
            with open(report_path) as fh:
                return json.load(fh)
        manifest = _read_manifest(session_dir)
        if phase_index(manifest["phase"]) < phase_index("edited"):
            raise HTTPException(
                status_code=409, detail="metrics require phase 'edited' or later"
            )
        lock = FileLock(session_dir / "session.lock")
        try:
            with lock.acquire(timeout=LOCK_TIMEOUT):
                session = EditSession.load(session_dir)
                return session.eval_report()
        except Timeout:
            raise HTTPException(status_code=409, detail="session is locked by another process")

    @app.get("/api/losslog")
    def get_losslog(start: int = 0):
        log_path = session_dir / "loss_log.jsonl"
        if not log_path.exists():
            return PlainTextResponse("", media_type="application/x-ndjson")
        with open(log_path) as fh:
            lines = fh.readlines()
        return PlainTextResponse(
            "".join(lines[start:]), media_type="application/x-ndjson"
        )

    @app.exception_handler(C3EditError)
    def handle_package_error(request, exc: C3EditError):
        status = 500 if isinstance(exc, NumericFault) else 400
        return JSONResponse(status_code=status, content={"detail": str(exc)})

    ui = ui_dir or _default_ui_dir()
    if ui is not None and Path(ui).is_dir():
        app.mount("/", StaticFiles(directory=ui, html=True), name="ui")

    return app
