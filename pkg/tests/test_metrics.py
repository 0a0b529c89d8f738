import itertools

import numpy as np
import pytest

from clickmil.geometry import Box, iou
from clickmil.metrics import (
    Detection,
    MetricReport,
    annotation_time_hours,
    average_precision,
    corloc,
    nms,
)


def shapely_iou(a: Box, b: Box) -> float:
    """Independent IoU oracle via polygon clipping."""
    from shapely.geometry import box as shapely_box

    pa = shapely_box(a.x, a.y, a.x2, a.y2)
    pb = shapely_box(b.x, b.y, b.x2, b.y2)
    union = pa.union(pb).area
    return pa.intersection(pb).area / union if union else 0.0


def oracle_corloc(selections, gt_boxes, iou_thresh=0.5):
    hits = 0
    for image_id, gts in gt_boxes.items():
        sel = selections.get(image_id)
        if sel is not None and any(shapely_iou(sel, g) >= iou_thresh for g in gts):
            hits += 1
    return hits / len(gt_boxes)


def oracle_ap_11pt(detections, gt_boxes, iou_thresh=0.5):
    """Brute-force 11-point AP: for every top-k prefix compute the maximum
    detection-GT matching by exhaustive enumeration."""
    n_gt = sum(len(g) for g in gt_boxes.values())
    dets = sorted(detections, key=lambda d: -d.score)
    points = []
    def max_matching(img_dets, gts):
        if not img_dets:
            return 0
        head, rest = img_dets[0], img_dets[1:]
        best = max_matching(rest, gts)  # head unmatched
        for j, g in enumerate(gts):
            if shapely_iou(head.box, g) >= iou_thresh:
                best = max(best, 1 + max_matching(rest, gts[:j] + gts[j + 1 :]))
        return best

    for k in range(1, len(dets) + 1):
        prefix = dets[:k]
        tp = 0
        for image_id, gts in gt_boxes.items():
            img_dets = [d for d in prefix if d.image_id == image_id]
            tp += max_matching(img_dets, list(gts))
        points.append((tp / n_gt, tp / k))
    ap = 0.0
    for r in np.linspace(0, 1, 11):
        candidates = [p for rec, p in points if rec >= r - 1e-12]
        ap += (max(candidates) if candidates else 0.0) / 11.0
    return ap


def _spaced_boxes(rng, n, region=1000.0):
    """Random boxes on a sparse grid so no box overlaps two GT boxes."""
    cells = rng.choice(100, size=n, replace=False)
    boxes = []
    for c in cells:
        cx, cy = (c % 10) * region / 10, (c // 10) * region / 10
        w = rng.uniform(20, 60)
        h = rng.uniform(20, 60)
        boxes.append(Box(cx + rng.uniform(0, 30), cy + rng.uniform(0, 30), w, h))
    return boxes


class TestCorloc:
    def test_all_correct(self):
        gt = {"a": [Box(0, 0, 10, 10)], "b": [Box(5, 5, 20, 20)]}
        sel = {k: v[0] for k, v in gt.items()}
        assert corloc(sel, gt) == 1.0

    def test_iou_exactly_half_counts(self):
        gt = {"a": [Box(0, 0, 10, 10)]}
        sel = {"a": Box(0, 0, 10, 5)}  # IoU exactly 0.5
        assert iou(sel["a"], gt["a"][0]) == pytest.approx(0.5)
        assert corloc(sel, gt) == 1.0

    def test_three_of_four(self):
        gt = {f"i{k}": [Box(0, 0, 10, 10)] for k in range(4)}
        sel = {f"i{k}": Box(0, 0, 10, 10) for k in range(3)}
        sel["i3"] = Box(500, 500, 10, 10)
        assert corloc(sel, gt) == 0.75

    def test_missing_selection_is_miss(self):
        gt = {"a": [Box(0, 0, 10, 10)], "b": [Box(0, 0, 10, 10)]}
        assert corloc({"a": Box(0, 0, 10, 10)}, gt) == 0.5

    def test_matches_oracle_on_random_instances(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            n = int(rng.integers(1, 21))
            gt = {}
            sel = {}
            for i in range(n):
                image_id = f"img{i}"
                boxes = _spaced_boxes(rng, int(rng.integers(1, 4)))
                gt[image_id] = boxes
                if rng.uniform() < 0.9:
                    base = boxes[0]
                    sel[image_id] = Box(
                        base.x + rng.uniform(-10, 10),
                        base.y + rng.uniform(-10, 10),
                        base.w * rng.uniform(0.6, 1.4),
                        base.h * rng.uniform(0.6, 1.4),
                    )
            assert corloc(sel, gt) == pytest.approx(oracle_corloc(sel, gt))


class TestNms:
    def test_disjoint_unchanged(self):
        dets = [
            Detection("i", Box(0, 0, 10, 10), 0.9),
            Detection("i", Box(100, 100, 10, 10), 0.5),
        ]
        assert len(nms(dets)) == 2

    def test_duplicates_collapse_to_best(self):
        dets = [
            Detection("i", Box(0, 0, 10, 10), 0.5),
            Detection("i", Box(0, 0, 10, 10), 0.9),
        ]
        out = nms(dets)
        assert len(out) == 1 and out[0].score == 0.9

    def test_chain_keeps_third(self):
        # A suppresses B; C overlaps B but not A, so C survives
        a = Detection("i", Box(0, 0, 10, 10), 0.9)
        b = Detection("i", Box(4, 0, 10, 10), 0.8)
        c = Detection("i", Box(9, 0, 10, 10), 0.7)
        assert iou(a.box, c.box) < 0.3 < iou(a.box, b.box)
        assert iou(b.box, c.box) >= 0.3
        out = nms([a, b, c], iou_thresh=0.3)
        assert [d.score for d in out] == [0.9, 0.7]

    def test_survivors_pairwise_below_threshold(self):
        rng = np.random.default_rng(1)
        dets = [
            Detection("i", Box(rng.uniform(0, 50), rng.uniform(0, 50), 20, 20), float(s))
            for s in rng.uniform(0, 1, 50)
        ]
        out = nms(dets, 0.3)
        assert set(out) <= set(dets)
        for x, y in itertools.combinations(out, 2):
            assert iou(x.box, y.box) < 0.3


class TestAveragePrecision:
    def test_perfect_ranking(self):
        gt = {"a": [Box(0, 0, 10, 10)], "b": [Box(0, 0, 10, 10)]}
        dets = [
            Detection("a", Box(0, 0, 10, 10), 0.9),
            Detection("b", Box(0, 0, 10, 10), 0.8),
        ]
        assert average_precision(dets, gt) == pytest.approx(1.0)

    def test_no_detections(self):
        assert average_precision([], {"a": [Box(0, 0, 10, 10)]}) == 0.0

    def test_hit_miss_hit_hand_computed(self):
        # 2 GT; detections by score: hit, miss, hit
        # PR points: (0.5, 1), (0.5, 1/2), (1.0, 2/3)
        # 11-point: recalls 0..0.5 -> 1 (6 points), 0.6..1.0 -> 2/3 (5 points)
        gt = {"a": [Box(0, 0, 10, 10)], "b": [Box(0, 0, 10, 10)]}
        dets = [
            Detection("a", Box(0, 0, 10, 10), 0.9),
            Detection("a", Box(500, 500, 10, 10), 0.8),
            Detection("b", Box(0, 0, 10, 10), 0.7),
        ]
        assert average_precision(dets, gt) == pytest.approx(28 / 33)

    def test_monotone_score_invariance(self):
        rng = np.random.default_rng(2)
        gt = {"a": _spaced_boxes(rng, 3), "b": _spaced_boxes(rng, 2)}
        dets = []
        for image_id in gt:
            for b in _spaced_boxes(rng, 4):
                dets.append(Detection(image_id, b, float(rng.uniform())))
        mapped = [Detection(d.image_id, d.box, 2.0 * d.score + 5.0) for d in dets]
        assert average_precision(dets, gt) == pytest.approx(average_precision(mapped, gt))

    def test_matches_oracle_on_random_instances(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            n_img = int(rng.integers(1, 6))
            gt = {}
            dets = []
            for i in range(n_img):
                image_id = f"img{i}"
                boxes = _spaced_boxes(rng, int(rng.integers(1, 4)))
                gt[image_id] = boxes
                for b in boxes:
                    if rng.uniform() < 0.7:
                        dets.append(
                            Detection(
                                image_id,
                                Box(
                                    b.x + rng.uniform(-8, 8),
                                    b.y + rng.uniform(-8, 8),
                                    b.w * rng.uniform(0.7, 1.3),
                                    b.h * rng.uniform(0.7, 1.3),
                                ),
                                float(rng.uniform()),
                            )
                        )
                if rng.uniform() < 0.5:
                    dets.append(
                        Detection(image_id, _spaced_boxes(rng, 1)[0], float(rng.uniform()))
                    )
            dets = dets[:5]
            if not dets:
                continue
            assert average_precision(dets, gt) == pytest.approx(oracle_ap_11pt(dets, gt))


class TestAnnotationTime:
    def test_reference_one_click_total(self):
        hours = annotation_time_hours(7306, "one_click")
        assert hours == pytest.approx(3.8, abs=0.2)

    def test_zero_bags(self):
        assert annotation_time_hours(0, "one_click") == 0.0

    def test_drawn_box_total(self):
        hours = annotation_time_hours(7306, "drawn_box")
        assert hours == pytest.approx(70.0, abs=0.1)

    def test_two_click_doubles(self):
        assert annotation_time_hours(100, "two_click") == pytest.approx(
            2 * annotation_time_hours(100, "one_click")
        )

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError):
            annotation_time_hours(10, "triple_click")


class TestMetricReport:
    def test_map_is_mean_of_per_class(self):
        rep = MetricReport(corloc=0.5, per_class_ap={"cat": 0.4, "dog": 0.8})
        assert rep.map == pytest.approx(0.6)
        assert rep.to_dict()["map"] == pytest.approx(0.6)
