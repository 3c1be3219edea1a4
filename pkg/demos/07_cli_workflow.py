"""The full command-line workflow, driven programmatically.

Equivalent shell session:

    saflab gen-data --kind two_moons --rotation 35 --seed 7 --out data/
    saflab train --config lab.cfg --seeds 0..2 --out runs/
    saflab eval --config lab.cfg --model runs/seed_0/model.txt \
        --source data/source.csv --target data/target.csv
"""

import json
import tempfile
from pathlib import Path

from saflab.cli import main

with tempfile.TemporaryDirectory() as tmp:
    root = Path(tmp)
    data = root / "data"
    assert main(["gen-data", "--kind", "two_moons", "--rotation", "35",
                 "--samples", "60", "--seed", "7", "--out", str(data)]) == 0

    cfg_path = root / "lab.cfg"
    cfg_path.write_text(
        "[data]\n"
        f"source = {data / 'source.csv'}\n"
        f"target = {data / 'target.csv'}\n"
        "[train]\n"
        "iterations = 120\n"
        "eval_every = 60\n"
        "[model]\n"
        "backbone = dann\n"
    )

    runs = root / "runs"
    assert main(["train", "--config", str(cfg_path), "--seeds", "0..2",
                 "--out", str(runs)]) == 0
    manifest = json.loads((runs / "manifest.json").read_text())
    agg = manifest["aggregate"]
    print(f"seeds {manifest['seeds']}: mean target accuracy "
          f"{agg['mean_target_accuracy']:.3f} (sd {agg['sd_target_accuracy']:.3f})")

    assert main(["eval", "--config", str(cfg_path),
                 "--model", str(runs / "seed_0" / "model.txt"),
                 "--source", str(data / "source.csv"),
                 "--target", str(data / "target.csv")]) == 0
