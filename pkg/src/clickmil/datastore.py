"""Dataset schemas, loaders/writers, the seeded synthetic dataset
generator, and the append-only click log.

Interchange formats are line-delimited JSON with a schema-version header
line; all writes go through a write-temp-then-rename step so a crashed
write never leaves a half-record behind.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .annotator import ClickRecord, ErrorModel
from .geometry import Box, Point, iou
from .mil import Bag, Proposal

SCHEMA_VERSION = 1


class DataFormatError(ValueError):
    pass


def _round6(v: float) -> float:
    return float(f"{float(v):.6g}")


def _box_to_list(b: Box) -> list[float]:
    return [_round6(b.x), _round6(b.y), _round6(b.w), _round6(b.h)]


def _box_from_list(v: list) -> Box:
    return Box(float(v[0]), float(v[1]), float(v[2]), float(v[3]))


def atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def write_jsonl(path: Path, kind: str, records: list[dict]) -> None:
    lines = [json.dumps({"schema_version": SCHEMA_VERSION, "kind": kind})]
    lines.extend(json.dumps(r) for r in records)
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_jsonl(path: Path, kind: str) -> list[dict]:
    if not path.exists():
        raise DataFormatError(f"missing file: {path}")
    records = []
    with path.open() as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataFormatError(f"{path}:{lineno}: malformed JSON: {e}") from e
            if lineno == 1:
                if rec.get("kind") != kind or rec.get("schema_version") != SCHEMA_VERSION:
                    raise DataFormatError(f"{path}:1: bad header for kind {kind!r}: {rec}")
                continue
            records.append(rec)
    return records


# ---------------------------------------------------------------------------
# dataset


@dataclass
class ImageMeta:
    image_id: str
    width: float
    height: float
    labels: list[str]


@dataclass
class Dataset:
    name: str
    classes: list[str]
    feature_dim: int
    images: list[ImageMeta]
    proposals: dict[str, list[Proposal]]
    gt: dict[tuple[str, str], list[Box]] = field(default_factory=dict)
    clicks: dict[tuple[str, str], list[ClickRecord]] = field(default_factory=dict)
    feature_fns: dict[str, Callable[[Box], np.ndarray]] = field(default_factory=dict)

    def bags_for_class(self, cls: str) -> list[Bag]:
        bags = []
        for im in self.images:
            label = "positive" if cls in im.labels else "negative"
            bags.append(
                Bag(
                    image_id=im.image_id,
                    width=im.width,
                    height=im.height,
                    proposals=self.proposals.get(im.image_id, []),
                    label=label,
                    clicks=list(self.clicks.get((im.image_id, cls), [])),
                    gt_boxes=self.gt.get((im.image_id, cls)),
                    feature_fn=self.feature_fns.get(im.image_id),
                )
            )
        return bags


def save_dataset(ds: Dataset, out_dir: Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "name": ds.name,
        "classes": list(ds.classes),
        "feature_dim": ds.feature_dim,
        "images": [
            {
                "id": im.image_id,
                "width": _round6(im.width),
                "height": _round6(im.height),
                "labels": list(im.labels),
            }
            for im in ds.images
        ],
        "files": {"proposals": "proposals.jsonl", "gt": "gt.jsonl", "clicks": "clicks.jsonl"},
    }
    atomic_write_text(out_dir / "manifest.json", json.dumps(manifest, indent=2) + "\n")

    prop_records = []
    for im in ds.images:
        for p in ds.proposals.get(im.image_id, []):
            prop_records.append(
                {
                    "image_id": im.image_id,
                    "box": _box_to_list(p.box),
                    "objectness": _round6(p.objectness),
                    "feature": [_round6(v) for v in p.feature],
                }
            )
    write_jsonl(out_dir / "proposals.jsonl", "proposals", prop_records)

    gt_records = [
        {"image_id": image_id, "class": cls, "box": _box_to_list(b)}
        for (image_id, cls), boxes in sorted(ds.gt.items())
        for b in boxes
    ]
    write_jsonl(out_dir / "gt.jsonl", "gt", gt_records)

    click_records = [
        _click_to_record(image_id, cls, c)
        for (image_id, cls), clicks in sorted(ds.clicks.items())
        for c in clicks
    ]
    write_jsonl(out_dir / "clicks.jsonl", "clicks", click_records)


def load_dataset(data_dir: Path) -> Dataset:
    data_dir = Path(data_dir)
    manifest_path = data_dir / "manifest.json"
    if not manifest_path.exists():
        raise DataFormatError(f"missing file: {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise DataFormatError(f"{manifest_path}: unsupported schema version")

    images = [
        ImageMeta(im["id"], float(im["width"]), float(im["height"]), list(im["labels"]))
        for im in manifest["images"]
    ]
    ids = {im.image_id for im in images}
    if len(ids) != len(images):
        raise DataFormatError(f"{manifest_path}: duplicate image ids")

    proposals: dict[str, list[Proposal]] = {im.image_id: [] for im in images}
    for rec in read_jsonl(data_dir / manifest["files"]["proposals"], "proposals"):
        if rec["image_id"] not in ids:
            raise DataFormatError(f"proposal references unknown image {rec['image_id']}")
        proposals[rec["image_id"]].append(
            Proposal(
                box=_box_from_list(rec["box"]),
                feature=np.asarray(rec["feature"], dtype=float),
                objectness=float(rec["objectness"]),
            )
        )

    gt: dict[tuple[str, str], list[Box]] = {}
    for rec in read_jsonl(data_dir / manifest["files"]["gt"], "gt"):
        gt.setdefault((rec["image_id"], rec["class"]), []).append(_box_from_list(rec["box"]))

    clicks: dict[tuple[str, str], list[ClickRecord]] = {}
    clicks_path = data_dir / manifest["files"]["clicks"]
    if clicks_path.exists():
        for rec in read_jsonl(clicks_path, "clicks"):
            clicks.setdefault((rec["image_id"], rec["class"]), []).append(
                _click_from_record(rec)
            )

    return Dataset(
        name=manifest["name"],
        classes=list(manifest["classes"]),
        feature_dim=int(manifest["feature_dim"]),
        images=images,
        proposals=proposals,
        gt=gt,
        clicks=clicks,
    )


def _click_to_record(image_id: str, cls: str, c: ClickRecord) -> dict:
    return {
        "image_id": image_id,
        "class": cls,
        "annotator_id": c.annotator_id,
        "x": _round6(c.position.x),
        "y": _round6(c.position.y),
        "time_ms": _round6(c.response_time_ms),
    }


def _click_from_record(rec: dict) -> ClickRecord:
    return ClickRecord(
        target_id=f"{rec['image_id']}:{rec['class']}",
        annotator_id=rec["annotator_id"],
        position=Point(float(rec["x"]), float(rec["y"])),
        response_time_ms=float(rec["time_ms"]),
    )


# ---------------------------------------------------------------------------
# selections / metrics / error model files


def save_selections(path: Path, selections: list[dict]) -> None:
    write_jsonl(Path(path), "selections", selections)


def load_selections(path: Path) -> list[dict]:
    return read_jsonl(Path(path), "selections")


def save_metrics(path: Path, metrics: dict) -> None:
    doc = {"schema_version": SCHEMA_VERSION, **metrics}
    atomic_write_text(Path(path), json.dumps(doc, indent=2, sort_keys=True) + "\n")


def save_error_model(path: Path, model: ErrorModel) -> None:
    atomic_write_text(Path(path), json.dumps(model.to_dict(), indent=2) + "\n")


def load_error_model(path: Path) -> ErrorModel:
    return ErrorModel.from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# click log


class ClickLog:
    """Append-only click log. Corrections are new records carrying a
    `supersedes` field; records are never edited in place."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def append(
        self,
        image_id: str,
        cls: str,
        click: ClickRecord,
        supersedes: Optional[int] = None,
    ) -> None:
        rec = _click_to_record(image_id, cls, click)
        if supersedes is not None:
            rec["supersedes"] = supersedes
        line = json.dumps(rec) + "\n"
        with self._lock:
            new_file = not self.path.exists()
            with self.path.open("a") as f:
                if new_file:
                    f.write(json.dumps({"schema_version": SCHEMA_VERSION, "kind": "clicks"}) + "\n")
                f.write(line)
                f.flush()
                os.fsync(f.fileno())

    def read_all(self) -> list[dict]:
        if not self.path.exists():
            return []
        return read_jsonl(self.path, "clicks")


# ---------------------------------------------------------------------------
# synthetic dataset generator


@dataclass
class SyntheticConfig:
    n_positive: int = 500
    n_negative: int = 500
    classes: tuple[str, ...] = ("object",)
    proposals_per_image: int = 30
    feature_dim: int = 12
    feature_noise: float = 1.0
    jitter_iou_floor: float = 0.6
    distractor_overlap: float = 0.5  # rho: 0 separable, 1 indistinguishable
    objectness_noise: float = 0.35
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0 < self.jitter_iou_floor <= 1:
            raise ValueError("jitter IoU floor must be in (0, 1]")
        if not 0 <= self.distractor_overlap <= 1:
            raise ValueError("distractor overlap must be in [0, 1]")


def _feature_noise_rng(seed: int, image_id: str, box: Box) -> np.random.Generator:
    key = f"{seed}|{image_id}|{box.x:.3f},{box.y:.3f},{box.w:.3f},{box.h:.3f}"
    digest = hashlib.blake2b(key.encode(), digest_size=8).digest()
    return np.random.default_rng(int.from_bytes(digest, "little"))


def _make_feature_fn(
    cfg: SyntheticConfig, image_id: str, gt: Optional[Box]
) -> Callable[[Box], np.ndarray]:
    sep = 8.0 * cfg.feature_noise * (1.0 - cfg.distractor_overlap)

    def feature_fn(box: Box) -> np.ndarray:
        alpha = iou(box, gt) if gt is not None else 0.0
        rng = _feature_noise_rng(cfg.seed, image_id, box)
        noise = rng.uniform(-2.0 * cfg.feature_noise, 2.0 * cfg.feature_noise, cfg.feature_dim)
        feat = noise
        feat[0] += alpha * sep
        return feat

    return feature_fn


def _random_box(rng: np.random.Generator, w: float, h: float) -> Box:
    rel = rng.uniform(0.03, 0.5)
    aspect = rng.uniform(0.5, 2.0)
    bw = min(math.sqrt(rel * w * h * aspect), 0.95 * w)
    bh = min(math.sqrt(rel * w * h / aspect), 0.95 * h)
    x = rng.uniform(0, w - bw)
    y = rng.uniform(0, h - bh)
    return Box(x, y, bw, bh)


def _jittered_gt_proposal(rng: np.random.Generator, gt: Box, floor: float, w: float, h: float) -> Box:
    if floor >= 1.0:
        return gt
    for _ in range(200):
        amp = (1.0 - floor) * 0.5
        dx = rng.uniform(-amp, amp) * gt.w
        dy = rng.uniform(-amp, amp) * gt.h
        sw = gt.w * rng.uniform(1 - amp, 1 + amp)
        sh = gt.h * rng.uniform(1 - amp, 1 + amp)
        x = min(max(gt.x + dx, 0.0), w - sw)
        y = min(max(gt.y + dy, 0.0), h - sh)
        cand = Box(x, y, sw, sh)
        if iou(cand, gt) >= floor:
            return cand
    return gt


def generate_synthetic(cfg: SyntheticConfig) -> Dataset:
    """Seeded synthetic dataset: each positive image has one GT box, one
    proposal meeting the configured IoU floor against it, and random
    distractors. Features separate object from background along one axis
    with bounded noise; rho=0 is strictly separable, rho=1 is chance."""
    rng = np.random.default_rng(cfg.seed)
    cls = cfg.classes[0]
    images: list[ImageMeta] = []
    proposals: dict[str, list[Proposal]] = {}
    gt: dict[tuple[str, str], list[Box]] = {}
    feature_fns: dict[str, Callable[[Box], np.ndarray]] = {}

    def build_image(image_id: str, positive: bool) -> None:
        w = float(rng.uniform(300, 600))
        h = float(rng.uniform(200, 500))
        gt_box = _random_box(rng, w, h) if positive else None
        ffn = _make_feature_fn(cfg, image_id, gt_box)
        boxes: list[Box] = []
        if positive:
            boxes.append(_jittered_gt_proposal(rng, gt_box, cfg.jitter_iou_floor, w, h))
        while len(boxes) < cfg.proposals_per_image:
            cand = _random_box(rng, w, h)
            if gt_box is not None and iou(cand, gt_box) >= 0.3:
                continue
            boxes.append(cand)
        props = []
        for b in boxes:
            base = iou(b, gt_box) if gt_box is not None else 0.0
            obj = float(np.clip(base + rng.normal(0.0, cfg.objectness_noise), 0.0, 1.0))
            props.append(Proposal(box=b, feature=ffn(b), objectness=obj))
        images.append(ImageMeta(image_id, w, h, [cls] if positive else []))
        proposals[image_id] = props
        feature_fns[image_id] = ffn
        if positive:
            gt[(image_id, cls)] = [gt_box]

    for i in range(cfg.n_positive):
        build_image(f"pos-{i:05d}", True)
    for i in range(cfg.n_negative):
        build_image(f"neg-{i:05d}", False)

    return Dataset(
        name="synthetic",
        classes=list(cfg.classes),
        feature_dim=cfg.feature_dim,
        images=images,
        proposals=proposals,
        gt=gt,
        clicks={},
        feature_fns=feature_fns,
    )


def simulate_dataset_clicks(ds: Dataset, model: ErrorModel, n_clicks: int, seed: int) -> None:
    """Attach simulated clicks to every positive (image, class) pair."""
    from .annotator import simulate_click

    rng = np.random.default_rng(seed)
    for im in ds.images:
        for cls in im.labels:
            gts = ds.gt.get((im.image_id, cls))
            if not gts:
                continue
            clicks = [
                simulate_click(
                    gts[0],
                    model,
                    rng,
                    img_w=im.width,
                    img_h=im.height,
                    target_id=f"{im.image_id}:{cls}",
                    annotator_id=f"sim-{k}",
                )
                for k in range(n_clicks)
            ]
            ds.clicks[(im.image_id, cls)] = clicks
