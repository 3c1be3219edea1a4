"""A short end-to-end adaptation run with live metric rows.

Trains the margin-disparity backbone with the feature-mixup branch on a
rotated two-moons pair for a few hundred steps and prints the evaluation
rows as they land in metrics.csv.
"""

import tempfile
from pathlib import Path

from saflab import DomainSpec, TrainConfig, run_experiment
from saflab.data import TARGET_TAG, gen_two_moons

src = gen_two_moons(DomainSpec(n_samples=200, noise_sd=0.15, seed=3))
tgt = gen_two_moons(DomainSpec(n_samples=200, noise_sd=0.15, seed=3, rotation_deg=35.0),
                    domain_tag=TARGET_TAG)

cfg = TrainConfig(backbone="mdd", total_iterations=600, eval_every=150, seed=0)

with tempfile.TemporaryDirectory() as tmp:
    out = run_experiment(cfg, src, tgt, Path(tmp) / "run")
    print((out / "metrics.csv").read_text())
    print("model saved to", (out / "model.txt").name,
          f"({(out / 'model.txt').stat().st_size} bytes)")
