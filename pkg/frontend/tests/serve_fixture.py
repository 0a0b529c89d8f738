"""Start the annotation service on a synthetic dataset for frontend tests.

Usage: python3 serve_fixture.py PORT WORKDIR

Writes ground-truth box centers to WORKDIR/gt_centers.json so tests can
script accurate or deliberately offset clicks, and logs accepted clicks to
WORKDIR/clicks.jsonl.
"""

import json
import sys
from pathlib import Path

import uvicorn

from clickmil.datastore import ClickLog, SyntheticConfig, generate_synthetic
from clickmil.geometry import box_center
from clickmil.service import ServiceState, create_app


def main() -> None:
    port = int(sys.argv[1])
    work = Path(sys.argv[2])
    work.mkdir(parents=True, exist_ok=True)

    ds = generate_synthetic(SyntheticConfig(n_positive=40, n_negative=10, seed=0))
    centers = {}
    for (image_id, _cls), boxes in ds.gt.items():
        c = box_center(boxes[0])
        centers[image_id] = [c.x, c.y]
    (work / "gt_centers.json").write_text(json.dumps(centers))

    state = ServiceState(dataset=ds, click_log=ClickLog(work / "clicks.jsonl"), seed=0)
    uvicorn.run(create_app(state), host="127.0.0.1", port=port, log_level="warning")


if __name__ == "__main__":
    main()
