"""Annotator behavior: synthetic qualification polygons, qualification
scoring, error-model fitting from polygon clicks, and realistic click
simulation on real boxes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial import polynomial as npoly

from . import defaults
from .geometry import Box, Point, Polygon, box_center, euclidean, polygon_bbox_center

ERROR_MODEL_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ClickRecord:
    target_id: str
    annotator_id: str
    position: Point
    response_time_ms: float = 0.0

    def __post_init__(self) -> None:
        if self.response_time_ms < 0:
            raise ValueError("response time must be >= 0")


@dataclass
class ErrorModel:
    """Learned annotator parameters.

    mu_coeffs and sim_distance_coeffs are polynomial coefficients in
    ascending order (c0 + c1*x + c2*x^2 + ...).
    mu maps two-click distance (px) to log relative object area;
    sim_distance maps sqrt(object area) (px) to expected click error (px).
    """

    sigma_bc: float
    d_max: float = defaults.D_MAX_PX
    mu_coeffs: list[float] = field(default_factory=lambda: [-3.9, 0.055, 0.0])
    sigma_ba: float = 0.5
    sim_distance_coeffs: list[float] = field(default_factory=lambda: [2.0, 0.12, 0.0])

    def __post_init__(self) -> None:
        if self.sigma_bc <= 0:
            raise ValueError("sigma_bc must be > 0")
        if self.sigma_ba <= 0:
            raise ValueError("sigma_ba must be > 0")
        if self.d_max <= 0:
            raise ValueError("d_max must be > 0")

    def mu(self, click_distance: float) -> float:
        return float(npoly.polyval(click_distance, self.mu_coeffs))

    def sim_distance(self, sqrt_area: float) -> float:
        return max(0.0, float(npoly.polyval(sqrt_area, self.sim_distance_coeffs)))

    def to_dict(self) -> dict:
        return {
            "schema_version": ERROR_MODEL_SCHEMA_VERSION,
            "sigma_bc": self.sigma_bc,
            "d_max": self.d_max,
            "mu_coeffs": list(self.mu_coeffs),
            "sigma_ba": self.sigma_ba,
            "sim_distance_coeffs": list(self.sim_distance_coeffs),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ErrorModel":
        version = d.get("schema_version")
        if version != ERROR_MODEL_SCHEMA_VERSION:
            raise ValueError(f"unsupported error model schema version: {version}")
        return cls(
            sigma_bc=d["sigma_bc"],
            d_max=d["d_max"],
            mu_coeffs=list(d["mu_coeffs"]),
            sigma_ba=d["sigma_ba"],
            sim_distance_coeffs=list(d["sim_distance_coeffs"]),
        )


@dataclass(frozen=True)
class QualificationResult:
    per_polygon_errors: list[float]
    mean_error: float
    passed: bool


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def generate_polygon(seed, canvas_w: float, canvas_h: float) -> Polygon:
    """Random simple polygon for the qualification test.

    Star-shaped radial construction (6-12 vertices); half the samples get
    one vertex dented sharply inward so the bounding-box center can fall
    outside the shape. The bounding-box area relative to the canvas is
    uniform in [0.02, 0.9].
    """
    if canvas_w < 100 or canvas_h < 100:
        raise ValueError("canvas must be at least 100x100")
    rng = _as_rng(seed)

    n = int(rng.integers(6, 13))
    # jittered even spacing keeps every angular gap in (0, pi), which keeps
    # the radial construction simple
    angles = 2.0 * math.pi * (np.arange(n) + rng.uniform(-0.35, 0.35, size=n)) / n
    radii = rng.uniform(0.4, 1.0, size=n)
    if rng.uniform() < 0.5:
        dent = int(rng.integers(0, n))
        radii[dent] *= rng.uniform(0.3, 0.6)  # 40-70% inward

    xs = radii * np.cos(angles)
    ys = radii * np.sin(angles)
    # normalize the unit shape to a [0,1]^2 bounding box
    xs = (xs - xs.min()) / (xs.max() - xs.min())
    ys = (ys - ys.min()) / (ys.max() - ys.min())

    rel_area = rng.uniform(0.02, 0.9)
    target_area = rel_area * canvas_w * canvas_h
    lo = target_area / (0.98 * canvas_h) ** 2
    hi = (0.98 * canvas_w) ** 2 / target_area
    aspect = rng.uniform(max(lo, min(0.5, hi)), min(hi, max(2.0, lo)))
    bw = math.sqrt(target_area * aspect)
    bh = math.sqrt(target_area / aspect)
    ox = rng.uniform(0.0, canvas_w - bw)
    oy = rng.uniform(0.0, canvas_h - bh)

    verts = tuple(Point(ox + float(x) * bw, oy + float(y) * bh) for x, y in zip(xs, ys))
    return Polygon(verts)


def evaluate_qualification(
    clicks: list[ClickRecord],
    polygons: list[Polygon],
    pass_threshold: float = defaults.QUALIFICATION_THRESHOLD_PX,
) -> QualificationResult:
    """Score a qualification attempt: one click per polygon, pass iff the
    mean center error is strictly below the threshold."""
    if len(clicks) != len(polygons):
        raise ValueError(f"expected {len(polygons)} clicks, got {len(clicks)}")
    errors = []
    for click, poly in zip(clicks, polygons):
        _, center = polygon_bbox_center(poly)
        errors.append(euclidean(click.position, center))
    mean_error = float(np.mean(errors)) if errors else 0.0
    return QualificationResult(errors, mean_error, mean_error < pass_threshold)


def fit_sigma_bc(errors: list[float]) -> float:
    """MLE of the Rayleigh scale of click error distances, assuming an
    isotropic 2-D Gaussian click error: sigma^2 = sum(d^2) / (2N)."""
    if len(errors) < 30:
        raise ValueError("need at least 30 error samples")
    arr = np.asarray(errors, dtype=float)
    if np.any(arr < 0):
        raise ValueError("error distances must be >= 0")
    sigma = math.sqrt(float(np.sum(arr**2)) / (2 * len(arr)))
    if sigma <= 0:
        raise ValueError("degenerate zero-error distribution (oracle clicks?)")
    return sigma


def fit_d_max(errors: list[float]) -> float:
    """Robust maximum of the qualification error distribution
    (99.5th percentile)."""
    if not errors:
        raise ValueError("empty error list")
    return float(np.percentile(np.asarray(errors, dtype=float), 99.5))


def _polyfit(x: np.ndarray, y: np.ndarray, degree: int) -> list[float]:
    if np.ptp(x) == 0:
        raise ValueError("degenerate design: all abscissae equal")
    return [float(c) for c in npoly.polyfit(x, y, degree)]


def fit_mu(pairs: list[tuple[float, float]], degree: int = 2) -> list[float]:
    """Least-squares polynomial mapping two-click distance to log relative
    area, fitted on (distance, log_rel_area) pairs."""
    if len(pairs) < 50:
        raise ValueError("need at least 50 pairs")
    d = np.asarray([p[0] for p in pairs], dtype=float)
    a = np.asarray([p[1] for p in pairs], dtype=float)
    coeffs = _polyfit(d, a, degree)
    lo, hi = float(d.min()), float(d.max())
    if npoly.polyval(hi, coeffs) < npoly.polyval(lo, coeffs) - 1e-9:
        raise ValueError("fitted area regressor decreases over the data range")
    return coeffs


def compute_sigma_ba(pairs: list[tuple[float, float]], mu_coeffs: list[float]) -> float:
    """RMS residual of the area regressor on its fitting pairs, floored to
    keep the area score well defined on noise-free data."""
    d = np.asarray([p[0] for p in pairs], dtype=float)
    a = np.asarray([p[1] for p in pairs], dtype=float)
    residuals = a - npoly.polyval(d, mu_coeffs)
    return max(1e-3, float(np.sqrt(np.mean(residuals**2))))


def fit_sim_distance_law(pairs: list[tuple[float, float]], degree: int = 2) -> list[float]:
    """Least-squares polynomial for expected click error distance as a
    function of sqrt(object area)."""
    if len(pairs) < 3:
        raise ValueError("need at least 3 pairs")
    s = np.asarray([p[0] for p in pairs], dtype=float)
    e = np.asarray([p[1] for p in pairs], dtype=float)
    return _polyfit(s, e, degree)


def simulate_polygon_corpus(
    n_polygons: int,
    seed,
    canvas_w: float = 500.0,
    canvas_h: float = 400.0,
    true_distance_coeffs: tuple[float, ...] = (2.0, 0.12),
) -> list[dict]:
    """Simulate a two-click qualification corpus on synthetic polygons.

    Each record holds the polygon's bbox center and area plus two noisy
    clicks whose radial error follows the given distance law (mean error
    as a polynomial in sqrt(bbox area))."""
    rng = _as_rng(seed)
    records = []
    for i in range(n_polygons):
        poly = generate_polygon(rng, canvas_w, canvas_h)
        bbox, center = polygon_bbox_center(poly)
        mean_dist = max(0.0, float(npoly.polyval(math.sqrt(bbox.area()), true_distance_coeffs)))
        clicks = []
        for _ in range(2):
            r = float(rng.rayleigh(mean_dist / math.sqrt(math.pi / 2.0))) if mean_dist else 0.0
            theta = float(rng.uniform(0.0, 2.0 * math.pi))
            x = min(max(center.x + r * math.cos(theta), 0.0), canvas_w)
            y = min(max(center.y + r * math.sin(theta), 0.0), canvas_h)
            clicks.append([x, y])
        records.append(
            {
                "polygon_id": f"poly-{i:05d}",
                "center": [center.x, center.y],
                "bbox_area": bbox.area(),
                "canvas_area": canvas_w * canvas_h,
                "clicks": clicks,
            }
        )
    return records


def fit_error_model_from_corpus(
    records: list[dict],
    pin_d_max: Optional[float] = None,
) -> ErrorModel:
    """Fit all annotator error parameters from a polygon click corpus."""
    errors: list[float] = []
    mu_pairs: list[tuple[float, float]] = []
    law_pairs: list[tuple[float, float]] = []
    for rec in records:
        center = Point(*rec["center"])
        clicks = [Point(*c) for c in rec["clicks"]]
        rel_area = rec["bbox_area"] / rec["canvas_area"]
        for c in clicks:
            err = euclidean(c, center)
            errors.append(err)
            law_pairs.append((math.sqrt(rec["bbox_area"]), err))
        if len(clicks) >= 2:
            mu_pairs.append((euclidean(clicks[0], clicks[1]), math.log(rel_area)))
    mu_coeffs = fit_mu(mu_pairs)
    return ErrorModel(
        sigma_bc=fit_sigma_bc(errors),
        d_max=pin_d_max if pin_d_max is not None else fit_d_max(errors),
        mu_coeffs=mu_coeffs,
        sigma_ba=compute_sigma_ba(mu_pairs, mu_coeffs),
        sim_distance_coeffs=fit_sim_distance_law(law_pairs),
    )


def simulate_click(
    gt: Box,
    model: ErrorModel,
    seed,
    img_w: float | None = None,
    img_h: float | None = None,
    target_id: str = "",
    annotator_id: str = "sim-0",
) -> ClickRecord:
    """Simulate a noisy center-click on a ground-truth box.

    Error direction is uniform; radial magnitude is Rayleigh with its mean
    pinned to the fitted distance law at sqrt(box area). Clicks landing
    outside the image are clamped to the border.
    """
    rng = _as_rng(seed)
    center = box_center(gt)
    mean_dist = model.sim_distance(math.sqrt(gt.area()))
    if mean_dist > 0:
        scale = mean_dist / math.sqrt(math.pi / 2.0)
        r = float(rng.rayleigh(scale))
    else:
        r = 0.0
    theta = float(rng.uniform(0.0, 2.0 * math.pi))
    x = center.x + r * math.cos(theta)
    y = center.y + r * math.sin(theta)
    if img_w is not None:
        x = min(max(x, 0.0), img_w)
    if img_h is not None:
        y = min(max(y, 0.0), img_h)
    rt = float(rng.normal(defaults.SECONDS_PER_CLICK * 1000.0, 300.0))
    return ClickRecord(target_id, annotator_id, Point(x, y), max(0.0, rt))


def simulate_two_clicks(
    gt: Box,
    model: ErrorModel,
    seed,
    img_w: float | None = None,
    img_h: float | None = None,
    target_id: str = "",
) -> tuple[ClickRecord, ClickRecord]:
    """Two independent simulated clicks on the same box, as if made by two
    different annotators."""
    rng = _as_rng(seed)
    c1 = simulate_click(gt, model, rng, img_w, img_h, target_id, annotator_id="sim-0")
    c2 = simulate_click(gt, model, rng, img_w, img_h, target_id, annotator_id="sim-1")
    return c1, c2
