"""Multi-seed experiment fan-out, run manifests, and the ablation grid.

Each seed gets its own run directory; the manifest records per-seed result
paths, dataset hashes and the aggregate target-accuracy statistics, all
recomputable from the per-seed metrics files.  Worker parallelism is capped
by the SAF_LAB_THREADS environment variable.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from .config import FileConfig, serialize_config
from .data import Batch, load_csv, SOURCE_TAG, TARGET_TAG
from .exceptions import DataError, SafLabError
from .training import METRICS_HEADER, run_experiment

ABLATION_VARIANTS = (
    "backbone_only",
    "no_bottleneck",
    "beta_eta",
    "constant_eta",
    "one_bottleneck",
    "four_bottlenecks",
    "include_source",
    "only_uncertain",
    "only_certain",
    "full_saf",
)


def max_workers(n_tasks: int) -> int:
    cap = os.environ.get("SAF_LAB_THREADS")
    if cap is not None:
        try:
            cap_n = int(cap)
        except ValueError:
            raise SafLabError(f"SAF_LAB_THREADS must be an integer, got {cap!r}") from None
        if cap_n < 1:
            raise SafLabError(f"SAF_LAB_THREADS must be >= 1, got {cap_n}")
        return max(1, min(n_tasks, cap_n))
    return max(1, min(n_tasks, os.cpu_count() or 1))


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def load_datasets(cfg: FileConfig, base_dir) -> tuple[Batch, Batch]:
    base = Path(base_dir)
    src = load_csv(base / cfg.source_path, has_labels=True, domain_tag=SOURCE_TAG)
    tgt = load_csv(base / cfg.target_path, has_labels=True, domain_tag=TARGET_TAG)
    return src, tgt


def final_target_accuracy(run_dir) -> float:
    """tgt_acc of the last metrics row."""
    lines = (Path(run_dir) / "metrics.csv").read_text(encoding="utf-8").strip().splitlines()
    if len(lines) < 2 or lines[0] != METRICS_HEADER:
        raise DataError(f"{run_dir}: metrics.csv has no evaluation rows")
    cols = METRICS_HEADER.split(",")
    last = lines[-1].split(",")
    return float(last[cols.index("tgt_acc")])


def aggregate(values: list[float]) -> tuple[float, float]:
    """Mean and sample standard deviation, in list order (recompute-exact)."""
    n = len(values)
    mean = sum(values) / n
    if n < 2:
        return mean, 0.0
    sd = math.sqrt(sum((v - mean) ** 2 for v in values) / (n - 1))
    return mean, sd


def run_with_seeds(cfg: FileConfig, seeds: list[int], out_dir, base_dir=".") -> dict:
    """One run directory per seed plus manifest.json with the aggregates."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    source, target = load_datasets(cfg, base_dir)
    (out_dir / "config.cfg").write_text(serialize_config(cfg), encoding="utf-8")

    def one(seed: int) -> dict:
        run_cfg = replace(cfg.train, seed=seed)
        run_dir = run_experiment(run_cfg, source, target, out_dir / f"seed_{seed}")
        return {
            "seed": seed,
            "path": str(run_dir.relative_to(out_dir)),
            "target_accuracy": final_target_accuracy(run_dir),
        }

    with ThreadPoolExecutor(max_workers=max_workers(len(seeds))) as pool:
        results = list(pool.map(one, seeds))

    accs = [r["target_accuracy"] for r in results]
    mean, sd = aggregate(accs)
    manifest = {
        "config": {f"{s}.{k}": v for (s, k), v in sorted(cfg.pairs().items())},
        "data_hashes": {
            "source": file_sha256(Path(base_dir) / cfg.source_path),
            "target": file_sha256(Path(base_dir) / cfg.target_path),
        },
        "seeds": seeds,
        "runs": results,
        "aggregate": {"mean_target_accuracy": mean, "sd_target_accuracy": sd},
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest


def ablation_config(base: FileConfig, variant: str) -> FileConfig:
    """The named modification applied to the base configuration."""
    t = base.train

    def with_policy(**kw) -> FileConfig:
        return replace(base, train=replace(t, mixup=replace(t.mixup, **kw)))

    if variant == "full_saf":
        return base
    if variant == "backbone_only":
        return replace(base, train=replace(t, saf_enabled=False))
    if variant == "no_bottleneck":
        return replace(base, train=replace(t, mixup_after_bottleneck=True))
    if variant == "beta_eta":
        return with_policy(mode="beta")
    if variant == "constant_eta":
        return with_policy(mode="constant")
    if variant == "one_bottleneck":
        return replace(base, train=replace(t, saf_bottlenecks=1))
    if variant == "four_bottlenecks":
        return replace(base, train=replace(t, saf_bottlenecks=4))
    if variant == "include_source":
        return with_policy(include_source=True)
    if variant == "only_uncertain":
        return with_policy(entropy_filter="only_uncertain")
    if variant == "only_certain":
        return with_policy(entropy_filter="only_certain")
    raise DataError(f"unknown ablation variant {variant!r}")


def run_ablation(base: FileConfig, seeds: list[int], out_dir, base_dir=".") -> Path:
    """Controlled comparison: every variant over the same data and seeds.

    A failing variant is recorded in the table with its error; the rest
    proceed.  Writes ablation.csv and returns its path.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = ["variant,mean_tgt_acc,sd_tgt_acc,status"]
    for variant in ABLATION_VARIANTS:
        try:
            manifest = run_with_seeds(
                ablation_config(base, variant), seeds, out_dir / variant, base_dir
            )
            agg = manifest["aggregate"]
            rows.append(
                f"{variant},{agg['mean_target_accuracy']!r},{agg['sd_target_accuracy']!r},ok"
            )
        except Exception as exc:  # record and continue with the other variants
            rows.append(f"{variant},nan,nan,error: {exc}")
    table = out_dir / "ablation.csv"
    table.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return table
