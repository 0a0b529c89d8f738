"""Command-line entry point for scripted, reproducible pipeline runs."""

from __future__ import annotations

import hashlib
import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__, datastore, defaults
from .annotator import (
    ErrorModel,
    fit_error_model_from_corpus,
    generate_polygon,
    simulate_polygon_corpus,
)
from .geometry import polygon_bbox_center
from .metrics import annotation_time_hours, average_precision, corloc
from .mil import MilConfig, run_mil


def _write_run_record(out_dir: Path, subcommand: str, params: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    digest = hashlib.sha256(
        json.dumps(params, sort_keys=True, default=str).encode()
    ).hexdigest()
    record = {
        "subcommand": subcommand,
        "params": params,
        "config_digest": digest,
        "version": __version__,
        "python": sys.version.split()[0],
    }
    datastore.atomic_write_text(out_dir / "run.json", json.dumps(record, indent=2) + "\n")


def _echo_config(params: dict) -> None:
    click.echo("effective configuration:")
    for k, v in sorted(params.items()):
        click.echo(f"  {k} = {v}")


def _thread_cap() -> int | None:
    v = os.environ.get("CLICKMIL_THREADS")
    return int(v) if v else None


@click.group()
def main() -> None:
    """Center-click supervision pipeline."""


@main.command("gen-polygons")
@click.option("--count", default=defaults.QUALIFICATION_POLYGONS, show_default=True)
@click.option("--canvas", nargs=2, type=float, default=(500.0, 400.0), show_default=True)
@click.option("--seed", required=True, type=int)
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
def gen_polygons(count: int, canvas: tuple[float, float], seed: int, out_dir: Path) -> None:
    """Generate qualification polygons to polygons.jsonl."""
    params = {"count": count, "canvas": list(canvas), "seed": seed}
    _echo_config(params)
    rng = np.random.default_rng(seed)
    records = []
    for i in range(count):
        poly = generate_polygon(rng, canvas[0], canvas[1])
        box, center = polygon_bbox_center(poly)
        records.append(
            {
                "polygon_id": f"poly-{i:05d}",
                "vertices": [[v.x, v.y] for v in poly.vertices],
                "bbox": [box.x, box.y, box.w, box.h],
                "center": [center.x, center.y],
                "canvas": list(canvas),
            }
        )
    out_dir.mkdir(parents=True, exist_ok=True)
    datastore.write_jsonl(out_dir / "polygons.jsonl", "polygons", records)
    _write_run_record(out_dir, "gen-polygons", params)
    click.echo(f"wrote {count} polygons to {out_dir / 'polygons.jsonl'}")


@main.command("gen-polygon-clicks")
@click.option("--count", default=2000, show_default=True)
@click.option("--canvas", nargs=2, type=float, default=(500.0, 400.0), show_default=True)
@click.option("--seed", required=True, type=int)
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
def gen_polygon_clicks(count: int, canvas: tuple[float, float], seed: int, out_dir: Path) -> None:
    """Simulate a two-click polygon qualification corpus for model fitting."""
    params = {"count": count, "canvas": list(canvas), "seed": seed}
    _echo_config(params)
    records = simulate_polygon_corpus(count, seed, canvas[0], canvas[1])
    out_dir.mkdir(parents=True, exist_ok=True)
    datastore.write_jsonl(out_dir / "polygon_clicks.jsonl", "polygon_clicks", records)
    _write_run_record(out_dir, "gen-polygon-clicks", params)
    click.echo(f"wrote {count} polygon click records to {out_dir / 'polygon_clicks.jsonl'}")


@main.command("fit-error-model")
@click.option(
    "--corpus",
    required=True,
    type=click.Path(path_type=Path, exists=True),
    help="polygon_clicks.jsonl corpus: per polygon, center, bbox area, canvas area, two clicks",
)
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--pin-d-max", type=float, default=None, help="override fitted d_max")
def fit_error_model(corpus: Path, out_dir: Path, pin_d_max: float | None) -> None:
    """Fit annotator error parameters from a polygon click corpus."""
    params = {"corpus": str(corpus), "pin_d_max": pin_d_max}
    _echo_config(params)
    records = datastore.read_jsonl(corpus, "polygon_clicks")
    model = fit_error_model_from_corpus(records, pin_d_max=pin_d_max)
    out_dir.mkdir(parents=True, exist_ok=True)
    datastore.save_error_model(out_dir / "error_model.json", model)
    _write_run_record(out_dir, "fit-error-model", params)
    click.echo(
        f"sigma_bc={model.sigma_bc:.3f} d_max={model.d_max:.3f} sigma_ba={model.sigma_ba:.4f}"
    )


@main.command("gen-synthetic")
@click.option("--positives", default=500, show_default=True)
@click.option("--negatives", default=500, show_default=True)
@click.option("--proposals", default=30, show_default=True)
@click.option("--rho", default=0.5, show_default=True, help="distractor feature overlap")
@click.option("--iou-floor", default=0.6, show_default=True)
@click.option("--seed", required=True, type=int)
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
def gen_synthetic(
    positives: int, negatives: int, proposals: int, rho: float, iou_floor: float, seed: int, out_dir: Path
) -> None:
    """Generate and save the seeded synthetic benchmark dataset."""
    params = {
        "positives": positives,
        "negatives": negatives,
        "proposals": proposals,
        "rho": rho,
        "iou_floor": iou_floor,
        "seed": seed,
    }
    _echo_config(params)
    cfg = datastore.SyntheticConfig(
        n_positive=positives,
        n_negative=negatives,
        proposals_per_image=proposals,
        distractor_overlap=rho,
        jitter_iou_floor=iou_floor,
        seed=seed,
    )
    ds = datastore.generate_synthetic(cfg)
    datastore.save_dataset(ds, out_dir)
    _write_run_record(out_dir, "gen-synthetic", params)
    click.echo(f"wrote dataset with {len(ds.images)} images to {out_dir}")


@main.command("simulate-clicks")
@click.option("--data", "data_dir", required=True, type=click.Path(path_type=Path, exists=True))
@click.option("--error-model", "model_path", type=click.Path(path_type=Path, exists=True))
@click.option("--clicks", default=2, show_default=True, type=click.IntRange(1, 2))
@click.option("--seed", required=True, type=int)
def simulate_clicks(data_dir: Path, model_path: Path | None, clicks: int, seed: int) -> None:
    """Simulate noisy center-clicks for every positive image of a dataset."""
    params = {"data": str(data_dir), "error_model": str(model_path), "clicks": clicks, "seed": seed}
    _echo_config(params)
    ds = datastore.load_dataset(data_dir)
    model = datastore.load_error_model(model_path) if model_path else ErrorModel(sigma_bc=15.0)
    datastore.simulate_dataset_clicks(ds, model, clicks, seed)
    datastore.save_dataset(ds, data_dir)
    _write_run_record(data_dir, "simulate-clicks", params)
    click.echo(f"simulated {clicks} click(s) per positive image in {data_dir}")


@main.command("train")
@click.option("--data", "data_dir", required=True, type=click.Path(path_type=Path, exists=True))
@click.option(
    "--supervision",
    type=click.Choice(["none", "one-click", "two-click"]),
    default="none",
    show_default=True,
)
@click.option("--error-model", "model_path", type=click.Path(path_type=Path, exists=True))
@click.option("--folds", default=defaults.MIL_FOLDS, show_default=True)
@click.option("--iterations", default=defaults.MIL_ITERATIONS, show_default=True)
@click.option("--seed", required=True, type=int)
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
def train(
    data_dir: Path,
    supervision: str,
    model_path: Path | None,
    folds: int,
    iterations: int,
    seed: int,
    out_dir: Path,
) -> None:
    """Run the alternating MIL optimizer and write selections + metrics."""
    params = {
        "data": str(data_dir),
        "supervision": supervision,
        "error_model": str(model_path),
        "folds": folds,
        "iterations": iterations,
        "seed": seed,
        "threads": _thread_cap(),
    }
    _echo_config(params)
    ds = datastore.load_dataset(data_dir)
    sup = supervision.replace("-", "_")
    error_model = None
    if sup != "none":
        error_model = (
            datastore.load_error_model(model_path) if model_path else ErrorModel(sigma_bc=15.0)
        )
    config = MilConfig(
        folds=folds,
        iterations=iterations,
        supervision=sup,
        error_model=error_model,
        seed=seed,
    )

    out_dir.mkdir(parents=True, exist_ok=True)
    selection_records = []
    trace_by_class = {}
    model_digests = {}
    for cls in ds.classes:
        bags = ds.bags_for_class(cls)
        result = run_mil(bags, config)
        trace_by_class[cls] = result.corloc_trace
        model_digests[cls] = result.model.digest()
        np.save(out_dir / f"model-{cls}.npy", np.append(result.model.weights, result.model.bias))
        by_id = {b.image_id: b for b in bags}
        for image_id, idx in sorted(result.selections.items()):
            box = by_id[image_id].proposals[idx].box
            selection_records.append(
                {
                    "image_id": image_id,
                    "class": cls,
                    "proposal_index": idx,
                    "box": [box.x, box.y, box.w, box.h],
                }
            )
        if result.skipped:
            click.echo(f"class {cls}: skipped {len(result.skipped)} bags without proposals")

    datastore.save_selections(out_dir / "selections.jsonl", selection_records)
    datastore.save_metrics(
        out_dir / "train_metrics.json",
        {
            "supervision": sup,
            "seed": seed,
            "corloc_trace": trace_by_class,
            "model_digests": model_digests,
        },
    )
    _write_run_record(out_dir, "train", params)
    for cls, trace in trace_by_class.items():
        final = trace[-1] if trace else float("nan")
        click.echo(f"class {cls}: final CorLoc {final:.3f}")


@main.command("evaluate")
@click.option("--data", "data_dir", required=True, type=click.Path(path_type=Path, exists=True))
@click.option("--train-out", "train_dir", required=True, type=click.Path(path_type=Path, exists=True))
@click.option("--test-data", "test_dir", type=click.Path(path_type=Path, exists=True))
@click.option(
    "--supervision",
    type=click.Choice(["none", "one-click", "two-click", "drawn-box"]),
    default="one-click",
    show_default=True,
)
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
def evaluate(
    data_dir: Path, train_dir: Path, test_dir: Path | None, supervision: str, out_path: Path
) -> None:
    """Compute CorLoc (and mAP on a test set) plus the annotation-time model."""
    from .geometry import Box
    from .mil import AppearanceModel, detect

    params = {
        "data": str(data_dir),
        "train_out": str(train_dir),
        "test_data": str(test_dir),
        "supervision": supervision,
    }
    _echo_config(params)
    ds = datastore.load_dataset(data_dir)
    selections = datastore.load_selections(train_dir / "selections.jsonl")

    per_class_corloc = {}
    per_class_ap = {}
    n_pairs = 0
    for cls in ds.classes:
        gt = {
            image_id: boxes for (image_id, c), boxes in ds.gt.items() if c == cls
        }
        n_pairs += len(gt)
        sel = {
            r["image_id"]: Box(*r["box"]) for r in selections if r["class"] == cls
        }
        per_class_corloc[cls] = corloc(sel, gt)
        if test_dir is not None:
            test_ds = datastore.load_dataset(test_dir)
            raw = np.load(train_dir / f"model-{cls}.npy")
            model = AppearanceModel(weights=raw[:-1], bias=float(raw[-1]))
            dets = detect(test_ds.bags_for_class(cls), model)
            test_gt = {
                image_id: boxes for (image_id, c), boxes in test_ds.gt.items() if c == cls
            }
            per_class_ap[cls] = average_precision(dets, test_gt)

    sup = supervision.replace("-", "_")
    report = {
        "corloc": float(np.mean(list(per_class_corloc.values()))),
        "per_class_corloc": per_class_corloc,
        "per_class_ap": per_class_ap,
        "map": float(np.mean(list(per_class_ap.values()))) if per_class_ap else None,
        "annotation_time_hours": annotation_time_hours(n_pairs, sup),
        "supervision": sup,
    }
    datastore.save_metrics(out_path, report)
    _write_run_record(out_path.parent, "evaluate", params)
    click.echo(f"corloc={report['corloc']:.3f} time={report['annotation_time_hours']:.2f}h")


@main.command("report")
@click.option(
    "--metrics",
    "metric_paths",
    multiple=True,
    required=True,
    type=click.Path(path_type=Path, exists=True),
)
def report(metric_paths: tuple[Path, ...]) -> None:
    """Render a quality-vs-annotation-time table from metrics files."""
    rows = []
    for path in metric_paths:
        doc = json.loads(path.read_text())
        rows.append(
            (
                doc.get("supervision", "?"),
                doc.get("annotation_time_hours", 0.0),
                doc.get("corloc"),
                doc.get("map"),
            )
        )
    rows.sort(key=lambda r: r[1])
    click.echo(f"{'supervision':<12} {'time (h)':>9} {'CorLoc':>8} {'mAP':>8}")
    for sup, hours, cl, mp in rows:
        cl_s = f"{cl:.3f}" if cl is not None else "-"
        mp_s = f"{mp:.3f}" if mp is not None else "-"
        click.echo(f"{sup:<12} {hours:>9.2f} {cl_s:>8} {mp_s:>8}")


@main.command("serve")
@click.option("--data", "data_dir", required=True, type=click.Path(path_type=Path, exists=True))
@click.option("--click-log", "log_path", required=True, type=click.Path(path_type=Path))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--seed", default=0, show_default=True, type=int)
def serve(data_dir: Path, log_path: Path, host: str, port: int, seed: int) -> None:
    """Start the annotation service over a dataset."""
    import uvicorn

    from .datastore import ClickLog
    from .service import ServiceState, create_app

    ds = datastore.load_dataset(data_dir)
    state = ServiceState(dataset=ds, click_log=ClickLog(log_path), seed=seed)
    app = create_app(state)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    sys.exit(main())
