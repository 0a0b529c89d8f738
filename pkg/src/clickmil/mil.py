"""Alternating MIL optimizer with click supervision.

Each image is a bag of scored proposals. The optimizer alternates between
re-training a linear appearance model on the current selections and
re-localizing each positive bag with the combined score: the calibrated
appearance/objectness average, optionally multiplied by the click-derived
center and area likelihoods.
"""

from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Literal, Optional, Sequence

import numpy as np
from sklearn.exceptions import ConvergenceWarning
from sklearn.svm import LinearSVC

from . import defaults
from .annotator import ClickRecord, ErrorModel
from .geometry import Box, Point, box_center, euclidean, iou, max_window_at

Supervision = Literal["none", "one_click", "two_click"]


@dataclass
class Proposal:
    box: Box
    feature: np.ndarray
    objectness: float

    def __post_init__(self) -> None:
        self.feature = np.asarray(self.feature, dtype=float)
        if not 0.0 <= self.objectness <= 1.0:
            raise ValueError(f"objectness must be in [0,1], got {self.objectness}")


@dataclass
class Bag:
    image_id: str
    width: float
    height: float
    proposals: list[Proposal]
    label: Literal["positive", "negative"]
    clicks: list[ClickRecord] = field(default_factory=list)
    gt_boxes: Optional[list[Box]] = None
    # synthetic datasets can score a feature for an arbitrary window;
    # absent for datasets loaded from disk
    feature_fn: Optional[Callable[[Box], np.ndarray]] = None

    def __post_init__(self) -> None:
        if self.label == "positive" and not self.proposals:
            raise ValueError(f"positive bag {self.image_id} has no proposals")
        for c in self.clicks:
            if not (0 <= c.position.x <= self.width and 0 <= c.position.y <= self.height):
                raise ValueError(f"click outside image bounds in bag {self.image_id}")


@dataclass
class AppearanceModel:
    weights: np.ndarray
    bias: float

    def margins(self, features: np.ndarray) -> np.ndarray:
        return features @ self.weights + self.bias

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.asarray(self.weights, dtype="<f8").tobytes())
        h.update(np.float64(self.bias).tobytes())
        return h.hexdigest()


@dataclass
class MilConfig:
    folds: int = defaults.MIL_FOLDS
    iterations: int = defaults.MIL_ITERATIONS
    svm_lambda: float = 1e-4
    negative_cap: int = 50
    supervision: Supervision = "none"
    error_model: Optional[ErrorModel] = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.folds < 2:
            raise ValueError("need at least 2 folds")
        if self.svm_lambda <= 0:
            raise ValueError("svm regularization must be > 0")
        if self.supervision not in ("none", "one_click", "two_click"):
            raise ValueError(f"unknown supervision mode: {self.supervision}")
        if self.supervision != "none" and self.error_model is None:
            raise ValueError("click supervision requires an error model")


def train_svm(
    positives: Sequence[np.ndarray],
    negatives: Sequence[np.ndarray],
    lam: float,
    seed: int = 0,
) -> AppearanceModel:
    """Linear SVM minimizing lam/2*||w||^2 + mean hinge loss.

    Backed by liblinear; C = 1/(lam*n) maps its objective onto ours, which
    makes the model invariant to duplicating the whole dataset.
    """
    if len(positives) == 0 or len(negatives) == 0:
        raise ValueError("both classes must be non-empty")
    x = np.vstack([np.asarray(positives, dtype=float), np.asarray(negatives, dtype=float)])
    y = np.concatenate([np.ones(len(positives)), -np.ones(len(negatives))])
    n = len(y)
    svc = LinearSVC(
        loss="hinge",
        C=1.0 / (lam * n),
        tol=1e-6,
        max_iter=20000,
        random_state=seed,
        fit_intercept=True,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        svc.fit(x, y)
    return AppearanceModel(weights=svc.coef_[0].copy(), bias=float(svc.intercept_[0]))


def hinge_loss(model: AppearanceModel, x: np.ndarray, y: np.ndarray) -> float:
    """Mean hinge loss of a model on labeled data (y in {-1, +1})."""
    return float(np.mean(np.maximum(0.0, 1.0 - y * model.margins(x))))


def calibrate_margins(margins: np.ndarray) -> np.ndarray:
    """Min-max normalize raw margins of one image's proposals to [0,1].

    Rank-preserving within the image, which is all re-localization needs.
    A constant margin maps to 0.5.
    """
    lo, hi = float(np.min(margins)), float(np.max(margins))
    if hi - lo < 1e-12:
        return np.full_like(margins, 0.5)
    return (margins - lo) / (hi - lo)


def score_s_ap(calibrated_appearance: float, objectness: float) -> float:
    """Equal-weight fusion of calibrated appearance and objectness."""
    return 0.5 * calibrated_appearance + 0.5 * objectness


def score_s_bc(
    p: Proposal,
    clicks: Sequence[ClickRecord],
    sigma_bc: float,
    d_max: float,
) -> float:
    """Box center likelihood from one or two clicks.

    Two clicks within d_max are averaged; farther apart they are assumed to
    target different instances and the click nearest to the proposal center
    is used.
    """
    if not clicks:
        raise ValueError("need at least one click")
    cp = box_center(p.box)
    if len(clicks) == 1:
        d = euclidean(cp, clicks[0].position)
    else:
        c1, c2 = clicks[0].position, clicks[1].position
        if euclidean(c1, c2) <= d_max:
            mid = Point((c1.x + c2.x) / 2.0, (c1.y + c2.y) / 2.0)
            d = euclidean(cp, mid)
        else:
            d = min(euclidean(cp, c1), euclidean(cp, c2))
    return math.exp(-(d * d) / (2.0 * sigma_bc * sigma_bc))


def score_s_ba(
    p: Proposal,
    c1: ClickRecord,
    c2: ClickRecord,
    model: ErrorModel,
    image_area: float,
) -> float:
    """Box area likelihood: Gaussian in log-area space around the object
    area estimated from the two-click distance.

    The area regressor works in canvas-relative log area, so the estimate
    is shifted by log(image area) to compare with the proposal's absolute
    log area.
    """
    a_p = math.log(p.box.area())
    d = euclidean(c1.position, c2.position)
    mu_hat = model.mu(d) + math.log(image_area)
    z = a_p - mu_hat
    return math.exp(-(z * z) / (2.0 * model.sigma_ba * model.sigma_ba))


def combined_scores(bag: Bag, model: AppearanceModel, config: MilConfig) -> np.ndarray:
    """Per-proposal re-localization scores for one bag."""
    feats = np.stack([p.feature for p in bag.proposals])
    a_cal = calibrate_margins(model.margins(feats))
    scores = np.array(
        [score_s_ap(a, p.objectness) for a, p in zip(a_cal, bag.proposals)]
    )
    if config.supervision == "none" or not bag.clicks:
        return scores
    em = config.error_model
    clicks = bag.clicks[: 2 if config.supervision == "two_click" else 1]
    sbc = np.array([score_s_bc(p, clicks, em.sigma_bc, em.d_max) for p in bag.proposals])
    scores = scores * sbc
    if config.supervision == "two_click" and len(bag.clicks) >= 2:
        sba = np.array(
            [
                score_s_ba(p, bag.clicks[0], bag.clicks[1], em, bag.width * bag.height)
                for p in bag.proposals
            ]
        )
        scores = scores * sba
    return scores


def relocalize(bag: Bag, model: AppearanceModel, config: MilConfig) -> Optional[int]:
    """Index of the best-scoring proposal; ties go to the lowest index.

    Returns None for bags without proposals (reported by the caller).
    """
    if not bag.proposals:
        return None
    scores = combined_scores(bag, model, config)
    return int(np.argmax(scores))


def initialize(bags: Sequence[Bag], config: MilConfig) -> dict[str, Box]:
    """Initial positive window per positive bag.

    Without clicks this is the full image; with clicks it is the largest
    window centered on the click (or the two-click midpoint).
    """
    windows: dict[str, Box] = {}
    for bag in bags:
        if bag.label != "positive":
            continue
        if config.supervision == "none" or not bag.clicks:
            windows[bag.image_id] = Box(0.0, 0.0, bag.width, bag.height)
            continue
        if config.supervision == "two_click" and len(bag.clicks) >= 2:
            c1, c2 = bag.clicks[0].position, bag.clicks[1].position
            if euclidean(c1, c2) <= config.error_model.d_max:
                c = Point((c1.x + c2.x) / 2.0, (c1.y + c2.y) / 2.0)
            else:
                c = c1  # different instances: anchor on the first click
        else:
            c = bag.clicks[0].position
        # clamp clicks sitting exactly on the border into the interior
        cx = min(max(c.x, 0.5), bag.width - 0.5)
        cy = min(max(c.y, 0.5), bag.height - 0.5)
        windows[bag.image_id] = max_window_at(Point(cx, cy), bag.width, bag.height)
    return windows


def _window_feature(bag: Bag, window: Box) -> np.ndarray:
    if bag.feature_fn is not None:
        return np.asarray(bag.feature_fn(window), dtype=float)
    best = max(range(len(bag.proposals)), key=lambda i: iou(bag.proposals[i].box, window))
    return bag.proposals[best].feature


def _negative_features(bags: Sequence[Bag], cap: int) -> np.ndarray:
    feats = []
    for bag in bags:
        ranked = sorted(
            range(len(bag.proposals)),
            key=lambda i: (-bag.proposals[i].objectness, i),
        )[:cap]
        feats.extend(bag.proposals[i].feature for i in ranked)
    if not feats:
        raise ValueError("no negative proposals available")
    return np.stack(feats)


@dataclass
class MilResult:
    selections: dict[str, int]
    model: AppearanceModel
    corloc_trace: list[float]
    skipped: list[str]


def run_mil(bags: Sequence[Bag], config: MilConfig) -> MilResult:
    """Multi-fold alternating MIL.

    Each iteration: positives are split into k fixed folds; the model for
    fold i is trained on the other folds' current selections plus capped
    negatives, and re-localizes fold i. Selections update at iteration
    barriers. Iteration 1 trains on the initialization windows.
    """
    positives = [b for b in bags if b.label == "positive"]
    negatives = [b for b in bags if b.label == "negative"]
    if len(positives) < config.folds:
        raise ValueError(
            f"{len(positives)} positive bags but {config.folds} folds requested"
        )
    if not negatives:
        raise ValueError("need at least one negative bag")

    neg_feats = _negative_features(negatives, config.negative_cap)
    init_windows = initialize(positives, config)

    rng = np.random.default_rng(config.seed)
    order = rng.permutation(len(positives))
    folds: list[list[int]] = [list(order[i :: config.folds]) for i in range(config.folds)]

    # per positive-bag training feature; starts as the init window feature
    pos_feats: list[np.ndarray] = [
        _window_feature(b, init_windows[b.image_id]) for b in positives
    ]
    selections: dict[str, int] = {}
    skipped = [b.image_id for b in positives if not b.proposals]
    trace: list[float] = []

    for _ in range(config.iterations):
        new_sel: dict[int, int] = {}
        for fold in folds:
            in_fold = set(fold)
            train_feats = [pos_feats[i] for i in range(len(positives)) if i not in in_fold]
            model = train_svm(train_feats, neg_feats, config.svm_lambda, config.seed)
            for i in fold:
                idx = relocalize(positives[i], model, config)
                if idx is not None:
                    new_sel[i] = idx
        for i, idx in new_sel.items():
            pos_feats[i] = positives[i].proposals[idx].feature
            selections[positives[i].image_id] = idx
        trace.append(_trace_corloc(positives, selections))

    final_model = train_svm(pos_feats, neg_feats, config.svm_lambda, config.seed)
    return MilResult(selections, final_model, trace, skipped)


def _trace_corloc(positives: Sequence[Bag], selections: dict[str, int]) -> float:
    scored = 0
    correct = 0
    for bag in positives:
        if bag.gt_boxes is None or bag.image_id not in selections:
            continue
        scored += 1
        chosen = bag.proposals[selections[bag.image_id]].box
        if any(iou(chosen, gt) >= 0.5 for gt in bag.gt_boxes):
            correct += 1
    return correct / scored if scored else float("nan")


def detect(
    test_bags: Sequence[Bag],
    model: AppearanceModel,
    nms_threshold: float = 0.3,
):
    """Score every proposal with the calibrated appearance/objectness
    average and apply NMS, yielding ranked detections per image."""
    from .metrics import Detection, nms

    detections = []
    for bag in test_bags:
        if not bag.proposals:
            continue
        feats = np.stack([p.feature for p in bag.proposals])
        a_cal = calibrate_margins(model.margins(feats))
        for a, p in zip(a_cal, bag.proposals):
            detections.append(
                Detection(bag.image_id, p.box, score_s_ap(float(a), p.objectness))
            )
    return nms(detections, nms_threshold)
