"""HTTP annotation service: qualification lifecycle, batch serving with
golden questions, and click persistence with timing."""

from __future__ import annotations

import secrets
import threading
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from . import defaults
from .annotator import ClickRecord, evaluate_qualification, generate_polygon
from .datastore import ClickLog, Dataset
from .geometry import Point, Polygon, box_center, euclidean, polygon_bbox_center

API_SCHEMA_VERSION = 1

INSTRUCTIONS = {
    "center_definition": (
        "Imagine a perfectly tight rectangular box around the object and then "
        "click as close as possible to the center of this imaginary box. For "
        "concave objects the center may lie outside the object itself."
    ),
    "truncation_rule": (
        "If the object is truncated and only part of it is visible, click on "
        "the center of the visible part."
    ),
    "multi_instance_rule": (
        "If there are multiple instances of the target class, click on the "
        "center of any one of them."
    ),
    "pacing_seconds_per_click": defaults.SUGGESTED_SECONDS_PER_CLICK,
}


@dataclass
class AnnotatorSession:
    annotator_id: str
    state: Literal["untrained", "qualified", "annotating"] = "untrained"
    qualification_attempts: int = 0
    pending_polygons: Optional[list[Polygon]] = None
    current_batch_id: Optional[str] = None


@dataclass
class BatchItem:
    image_id: str
    cls: str
    width: float
    height: float
    golden: bool  # server-side only, never serialized


@dataclass
class BatchState:
    batch_id: str
    cls: str
    items: list[BatchItem]
    submitted: bool = False


class ClickSubmission(BaseModel):
    x: float
    y: float
    time_ms: float = 0.0


class QualificationSubmission(BaseModel):
    token: str
    clicks: list[ClickSubmission]


class BatchClick(BaseModel):
    image_id: str
    x: float
    y: float
    time_ms: float = 0.0


class BatchSubmission(BaseModel):
    token: str
    batch_id: str
    clicks: list[BatchClick]


@dataclass
class ServiceState:
    dataset: Dataset
    click_log: ClickLog
    canvas_w: float = 500.0
    canvas_h: float = 400.0
    clicks_per_object: int = defaults.CLICKS_PER_OBJECT
    pass_threshold: float = defaults.QUALIFICATION_THRESHOLD_PX
    batch_size: int = defaults.BATCH_SIZE
    golden_per_batch: int = defaults.GOLDEN_PER_BATCH
    seed: int = 0
    sessions: dict[str, AnnotatorSession] = field(default_factory=dict)
    batches: dict[str, BatchState] = field(default_factory=dict)
    serve_counts: dict[tuple[str, str], int] = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)
    _counter: int = 0

    def next_id(self, prefix: str) -> str:
        self._counter += 1
        return f"{prefix}-{self._counter:06d}"


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="clickmil annotation service")
    rng = np.random.default_rng(state.seed)

    def get_session(token: str) -> AnnotatorSession:
        session = state.sessions.get(token)
        if session is None:
            raise HTTPException(status_code=401, detail="unknown session token")
        return session

    @app.post("/session")
    def create_session() -> dict:
        with state.lock:
            token = secrets.token_hex(16)
            state.sessions[token] = AnnotatorSession(annotator_id=state.next_id("annotator"))
        return {"schema_version": API_SCHEMA_VERSION, "token": token}

    @app.get("/instructions")
    def instructions() -> dict:
        return {"schema_version": API_SCHEMA_VERSION, "instructions": INSTRUCTIONS}

    @app.get("/qualification")
    def get_qualification(token: str) -> dict:
        with state.lock:
            session = get_session(token)
            if session.state != "untrained":
                return {"schema_version": API_SCHEMA_VERSION, "status": "qualified", "polygons": []}
            # fresh polygons on every attempt so annotators cannot overfit
            polygons = [
                generate_polygon(rng, state.canvas_w, state.canvas_h)
                for _ in range(defaults.QUALIFICATION_POLYGONS)
            ]
            session.pending_polygons = polygons
        return {
            "schema_version": API_SCHEMA_VERSION,
            "status": "untrained",
            "canvas": {"width": state.canvas_w, "height": state.canvas_h},
            "polygons": [
                {"vertices": [[v.x, v.y] for v in poly.vertices]} for poly in polygons
            ],
        }

    @app.post("/qualification")
    def submit_qualification(sub: QualificationSubmission) -> dict:
        with state.lock:
            session = get_session(sub.token)
            if session.state != "untrained":
                return {"schema_version": API_SCHEMA_VERSION, "status": "qualified", "passed": True}
            if session.pending_polygons is None:
                raise HTTPException(status_code=409, detail="no qualification in progress")
            polygons = session.pending_polygons
            if len(sub.clicks) != len(polygons):
                raise HTTPException(
                    status_code=400,
                    detail=f"expected {len(polygons)} clicks, got {len(sub.clicks)}",
                )
            clicks = [
                ClickRecord(f"poly-{i}", session.annotator_id, Point(c.x, c.y), c.time_ms)
                for i, c in enumerate(sub.clicks)
            ]
            result = evaluate_qualification(clicks, polygons, state.pass_threshold)
            feedback = []
            for poly, click, err in zip(polygons, clicks, result.per_polygon_errors):
                _, center = polygon_bbox_center(poly)
                feedback.append(
                    {
                        "center": [center.x, center.y],
                        "click": [click.position.x, click.position.y],
                        "distance_px": err,
                    }
                )
            session.qualification_attempts += 1
            session.pending_polygons = None
            if result.passed:
                session.state = "qualified"
        return {
            "schema_version": API_SCHEMA_VERSION,
            "passed": result.passed,
            "mean_error_px": result.mean_error,
            "threshold_px": state.pass_threshold,
            "feedback": feedback,
        }

    @app.get("/batch")
    def fetch_batch(token: str) -> dict:
        with state.lock:
            session = get_session(token)
            if session.state == "untrained":
                raise HTTPException(status_code=403, detail="qualification required")
            batch = _assemble_batch(state, rng)
            if batch is None:
                return {"schema_version": API_SCHEMA_VERSION, "batch_id": None, "items": []}
            state.batches[batch.batch_id] = batch
            session.state = "annotating"
            session.current_batch_id = batch.batch_id
        return {
            "schema_version": API_SCHEMA_VERSION,
            "batch_id": batch.batch_id,
            "class": batch.cls,
            "items": [
                {"image_id": it.image_id, "width": it.width, "height": it.height}
                for it in batch.items
            ],
        }

    @app.post("/batch")
    def submit_batch(sub: BatchSubmission) -> dict:
        with state.lock:
            session = get_session(sub.token)
            batch = state.batches.get(sub.batch_id)
            if batch is None or batch.submitted:
                raise HTTPException(status_code=404, detail="unknown or closed batch")
            by_image = {c.image_id: c for c in sub.clicks}
            if set(by_image) != {it.image_id for it in batch.items} or len(sub.clicks) != len(
                batch.items
            ):
                raise HTTPException(status_code=400, detail="clicks must cover the batch exactly")

            golden_errors = []
            for it in batch.items:
                if not it.golden:
                    continue
                gt = state.dataset.gt[(it.image_id, it.cls)][0]
                c = by_image[it.image_id]
                golden_errors.append(euclidean(Point(c.x, c.y), box_center(gt)))
            mean_golden = float(np.mean(golden_errors)) if golden_errors else 0.0
            accepted = mean_golden < state.pass_threshold

            if accepted:
                for it in batch.items:
                    c = by_image[it.image_id]
                    state.click_log.append(
                        it.image_id,
                        it.cls,
                        ClickRecord(
                            f"{it.image_id}:{it.cls}",
                            session.annotator_id,
                            Point(c.x, c.y),
                            c.time_ms,
                        ),
                    )
                batch.submitted = True
            else:
                # rejected batches are re-servable, nothing persisted
                for it in batch.items:
                    if not it.golden:
                        state.serve_counts[(it.image_id, it.cls)] -= 1
                del state.batches[batch.batch_id]
            mean_time = float(np.mean([c.time_ms for c in sub.clicks])) if sub.clicks else 0.0
        return {
            "schema_version": API_SCHEMA_VERSION,
            "accepted": accepted,
            "mean_golden_error_px": mean_golden,
            "mean_response_time_ms": mean_time,
        }

    return app


def _assemble_batch(state: ServiceState, rng: np.random.Generator) -> Optional[BatchState]:
    """20 images of one class with 2 golden items mixed in, or None when no
    class has enough unserved images left."""
    ds = state.dataset
    meta = {im.image_id: im for im in ds.images}
    for cls in ds.classes:
        golden_ids = [
            im.image_id for im in ds.images if (im.image_id, cls) in ds.gt
        ][: state.golden_per_batch]
        if len(golden_ids) < state.golden_per_batch:
            continue
        normal_needed = state.batch_size - state.golden_per_batch
        candidates = [
            im.image_id
            for im in ds.images
            if cls in im.labels
            and im.image_id not in golden_ids
            and state.serve_counts.get((im.image_id, cls), 0) < state.clicks_per_object
        ]
        if len(candidates) < normal_needed:
            continue
        chosen = candidates[:normal_needed]
        for image_id in chosen:
            state.serve_counts[(image_id, cls)] = state.serve_counts.get((image_id, cls), 0) + 1
        items = [
            BatchItem(i, cls, meta[i].width, meta[i].height, golden=False) for i in chosen
        ]
        for gid in golden_ids:
            pos = int(rng.integers(0, len(items) + 1))
            items.insert(pos, BatchItem(gid, cls, meta[gid].width, meta[gid].height, golden=True))
        return BatchState(state.next_id("batch"), cls, items)
    return None
