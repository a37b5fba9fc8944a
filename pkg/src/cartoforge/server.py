"""HTTP API over the session store: serves runs to the studio UI and accepts
human verdicts.

Each active run is advanced by one background worker thread; verdicts are
handed to it through the human reviewer's mailbox. Events stream as
newline-delimited JSON over a held response and end at run termination.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import asdict, dataclass
from pathlib import Path

from fastapi import FastAPI, File, Form, HTTPException, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response, StreamingResponse
from fastapi.staticfiles import StaticFiles

from .dataset import build_dataset
from .errors import AwaitingHumanVerdict, CartoforgeError, SchemaViolation, SessionTerminated
from .orchestrator import HumanReviewer, Orchestrator, build_roles, resolve_run_id
from .prompts import parse_reviewer_reply
from .session import REVIEWER_HUMAN, RunConfig, SessionStore
from .stylesheet import LayerManifest

MAX_INSPIRATION_BYTES = 20 * 1024 * 1024
MAX_DATA_BYTES = 100 * 1024 * 1024

_CONTENT_TYPES = {
    ".json": "application/json",
    ".geojson": "application/geo+json",
    ".png": "image/png",
    ".txt": "text/plain; charset=utf-8",
}


@dataclass(frozen=True)
class ApiEvent:
    kind: str  # iteration-started | iteration-completed | awaiting-verdict | run-terminated
    run_id: str
    iteration: int | None
    timestamp: float


class ActiveRun:
    def __init__(self, orchestrator: Orchestrator, reviewer: HumanReviewer | None):
        self.orchestrator = orchestrator
        self.reviewer = reviewer
        self.events: list[ApiEvent] = []
        self.events_lock = threading.Lock()
        self.verdict_acks: dict[int, tuple[str, dict]] = {}
        self.thread: threading.Thread | None = None

    def on_event(self, event: dict) -> None:
        with self.events_lock:
            self.events.append(ApiEvent(**event))

    def events_snapshot(self) -> list[ApiEvent]:
        with self.events_lock:
            return list(self.events)


class RunManager:
    """Holds in-flight runs; persisted runs are read straight from the store."""

    def __init__(self, store: SessionStore, max_inspiration=MAX_INSPIRATION_BYTES, max_data=MAX_DATA_BYTES):
        self.store = store
        self.max_inspiration = max_inspiration
        self.max_data = max_data
        self.active: dict[str, ActiveRun] = {}
        self.lock = threading.Lock()

    def start_run(
        self,
        inspiration: bytes,
        manifest_text: str,
        data_files: dict[str, bytes],
        config: RunConfig,
    ) -> str:
        manifest = LayerManifest.from_json(manifest_text)
        layers = {}
        bbox = None
        for name, data in data_files.items():
            stem = Path(name).name
            if stem == "bbox.json":
                bbox = tuple(json.loads(data.decode("utf-8")))
                continue
            if not stem.endswith(".geojson"):
                continue
            layers[stem[: -len(".geojson")]] = json.loads(data.decode("utf-8"))
        dataset = build_dataset(manifest, layers, bbox)

        reviewer = HumanReviewer() if config.reviewer_source == REVIEWER_HUMAN else None
        roles = build_roles(config, manifest, reviewer=reviewer)
        run_id = resolve_run_id(self.store, config, inspiration, manifest)
        active = ActiveRun(None, reviewer)  # orchestrator next; on_event needs the object
        orchestrator = Orchestrator(
            inspiration, dataset, config, roles, self.store, run_id, on_event=active.on_event
        )
        active.orchestrator = orchestrator
        with self.lock:
            self.active[run_id] = active
        thread = threading.Thread(target=self._worker, args=(active,), daemon=True)
        active.thread = thread
        thread.start()
        return run_id

    @staticmethod
    def _worker(active: ActiveRun) -> None:
        orchestrator = active.orchestrator
        while not orchestrator.session.is_terminated:
            try:
                orchestrator.step()
            except AwaitingHumanVerdict:
                active.reviewer.verdict_event.wait(timeout=0.2)
            except SessionTerminated:
                break
            except CartoforgeError:
                break

    def post_verdict(self, run_id: str, body: str) -> tuple[int, dict]:
        """Returns (status, ack).

        Idempotent per (run, iteration): a retry of the most recently
        acknowledged verdict returns the original ack instead of being
        applied to a later iteration.
        """
        digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
        with self.lock:
            active = self.active.get(run_id)
        if active is None or active.reviewer is None:
            raise HTTPException(409, "run does not accept human verdicts")
        orchestrator = active.orchestrator
        if active.verdict_acks:
            last_iteration = max(active.verdict_acks)
            prior_digest, ack = active.verdict_acks[last_iteration]
            if prior_digest == digest:
                return 200, ack
        if not orchestrator.awaiting_verdict:
            raise HTTPException(409, "run is not awaiting a verdict")
        try:
            verdict = parse_reviewer_reply(body)
        except (SchemaViolation, CartoforgeError) as e:
            raise HTTPException(400, f"verdict rejected: {e}") from e
        iteration = orchestrator.post_verdict(verdict)
        ack = {"run_id": run_id, "iteration": iteration, "status": "accepted"}
        active.verdict_acks[iteration] = (digest, ack)
        return 200, ack


def _summary(index_doc: dict, awaiting: bool) -> dict:
    iterations = index_doc.get("iterations", [])
    last = iterations[-1] if iterations else None
    return {
        "id": index_doc.get("run_id"),
        "iterations": len(iterations),
        "terminated_by": index_doc.get("terminated_by"),
        "awaiting_verdict": awaiting,
        "last_similarity": last.get("similarity") if last else None,
        "last_decision": last.get("decision") if last else None,
    }


def create_app(runs_dir: str | Path, ui_dir: str | Path | None = None) -> FastAPI:
    store = SessionStore(runs_dir)
    manager = RunManager(store)
    app = FastAPI(title="cartoforge")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.manager = manager
    app.state.store = store

    def read_index_or_404(run_id: str) -> dict:
        try:
            return store.read_index(run_id)
        except FileNotFoundError:
            if run_id in manager.active:  # just started, first iteration not yet persisted
                return {
                    "run_id": run_id,
                    "terminated_by": None,
                    "error": None,
                    "template_hashes": {},
                    "iterations": [],
                    "pending": None,
                }
            raise HTTPException(404, f"unknown session {run_id!r}")

    def is_awaiting(run_id: str) -> bool:
        active = manager.active.get(run_id)
        return bool(active and active.orchestrator.awaiting_verdict)

    @app.get("/api/sessions")
    def list_sessions():
        return [_summary(store.read_index(run_id), is_awaiting(run_id)) for run_id in store.list_runs()]

    @app.get("/api/sessions/{run_id}")
    def get_session(run_id: str):
        doc = read_index_or_404(run_id)
        doc["awaiting_verdict"] = is_awaiting(run_id)
        return doc

    @app.get("/api/sessions/{run_id}/iterations/{k}")
    def get_iteration(run_id: str, k: int):
        doc = read_index_or_404(run_id)
        entries = [e for e in doc.get("iterations", []) if e.get("index") == k]
        pending = doc.get("pending")
        if not entries and pending and pending.get("index") == k:
            entries = [dict(pending, pending=True)]
        if not entries:
            raise HTTPException(404, f"iteration {k} not found")
        entry = dict(entries[0])
        entry["assets"] = {
            rel: f"/api/sessions/{run_id}/assets/iterations/{k}/{rel}"
            for rel in entry.get("files", {})
        }
        return entry

    @app.get("/api/sessions/{run_id}/assets/{asset_path:path}")
    def get_asset(run_id: str, asset_path: str):
        doc = read_index_or_404(run_id)
        root = store.run_dir(run_id).resolve()
        target = (root / asset_path).resolve()
        if not target.is_relative_to(root) or not target.is_file():
            raise HTTPException(404, "no such asset")
        if asset_path.startswith("iterations/"):
            # serve only fully persisted (digest-indexed) iteration files
            parts = asset_path.split("/", 2)
            if len(parts) != 3:
                raise HTTPException(404, "no such asset")
            index, rel = parts[1], parts[2]
            indexed = set()
            for entry in doc.get("iterations", []):
                if str(entry.get("index")) == index:
                    indexed = set(entry.get("files", {}))
            pending = doc.get("pending")
            if pending and str(pending.get("index")) == index:
                indexed |= set(pending.get("files", {}))
            if rel not in indexed:
                raise HTTPException(404, "asset not yet persisted")
        data = target.read_bytes()
        return Response(
            content=data,
            media_type=_CONTENT_TYPES.get(target.suffix, "application/octet-stream"),
            headers={"X-Content-Digest": hashlib.sha256(data).hexdigest()},
        )

    @app.post("/api/sessions", status_code=201)
    async def create_session(
        inspiration: UploadFile = File(...),
        manifest: UploadFile = File(...),
        data: list[UploadFile] = File(default=[]),
        config: str = Form(default="{}"),
    ):
        inspiration_bytes = await inspiration.read()
        if len(inspiration_bytes) > manager.max_inspiration:
            raise HTTPException(413, "inspiration image exceeds the upload cap")
        data_files: dict[str, bytes] = {}
        total = 0
        for upload in data:
            blob = await upload.read()
            total += len(blob)
            if total > manager.max_data:
                raise HTTPException(413, "map data exceeds the upload cap")
            data_files[upload.filename] = blob
        try:
            run_config = RunConfig.from_dict(json.loads(config))
            run_id = manager.start_run(
                inspiration_bytes, (await manifest.read()).decode("utf-8"), data_files, run_config
            )
        except (ValueError, CartoforgeError, json.JSONDecodeError) as e:
            raise HTTPException(400, f"cannot start run: {e}") from e
        return {"id": run_id}

    @app.post("/api/sessions/{run_id}/verdict")
    async def post_verdict(run_id: str, body: dict):
        read_index_or_404(run_id)
        status, ack = manager.post_verdict(run_id, json.dumps(body, sort_keys=True))
        return JSONResponse(ack, status_code=status)

    @app.get("/api/sessions/{run_id}/events")
    def get_events(run_id: str):
        doc = read_index_or_404(run_id)
        active = manager.active.get(run_id)

        def synthesized() -> list[ApiEvent]:
            events = []
            for entry in doc.get("iterations", []):
                events.append(ApiEvent("iteration-completed", run_id, entry["index"], 0.0))
            if doc.get("terminated_by"):
                last = doc["iterations"][-1]["index"] if doc.get("iterations") else None
                events.append(ApiEvent("run-terminated", run_id, last, 0.0))
            return events

        def stream():
            if active is None:
                for event in synthesized():
                    yield json.dumps(asdict(event)) + "\n"
                return
            sent = 0
            while True:
                events = active.events_snapshot()
                terminated = False
                for event in events[sent:]:
                    yield json.dumps(asdict(event)) + "\n"
                    if event.kind == "run-terminated":
                        terminated = True
                sent = len(events)
                if terminated:
                    return
                time.sleep(0.05)

        return StreamingResponse(stream(), media_type="application/x-ndjson")

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="studio")

    return app


def serve(port: int, runs_dir: str | Path, host: str = "127.0.0.1", ui_dir: str | Path | None = None) -> None:
    import uvicorn

    uvicorn.run(create_app(runs_dir, ui_dir), host=host, port=port, log_level="info")
