"""Command-line surface: dataset generation, training, evaluation,
ablation sweeps, and 2-D embedding export.

Exit status: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import build_config, documented_default_text, parse_pairs, serialize_config
from .data import (
    DomainSpec,
    SOURCE_TAG,
    TARGET_TAG,
    gen_gaussian_blobs,
    gen_two_moons,
    save_csv,
)
from .embed import export_embeddings
from .exceptions import SafLabError
from .networks import build_bundle
from .runs import load_datasets, run_ablation, run_with_seeds
from .training import evaluate, run_experiment

USAGE_EXIT = 1
RUNTIME_EXIT = 2

_BLOB_CENTERS = [(-1.0, 0.0), (1.0, 0.0), (0.0, 1.5)]


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on usage errors; we promise 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _parse_seeds(raw: str) -> list[int]:
    if ".." in raw:
        lo, hi = raw.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(p) for p in raw.split(",") if p.strip() != ""]


def _load_file_config(path: Path, overrides: dict[tuple[str, str], str]):
    pairs = parse_pairs(path.read_text(encoding="utf-8"))
    pairs.update(overrides)
    return build_config(pairs)


def cmd_gen_data(args) -> int:
    src_spec = DomainSpec(
        generator=args.kind,
        n_samples=args.samples,
        noise_sd=args.noise,
        seed=args.seed,
    )
    tgt_spec = replace(
        src_spec,
        rotation_deg=args.rotation,
        translation=(args.translate_x, args.translate_y),
        scale=args.scale,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.kind == "two_moons":
        src = gen_two_moons(src_spec, SOURCE_TAG)
        tgt = gen_two_moons(tgt_spec, TARGET_TAG)
    else:
        src = gen_gaussian_blobs(src_spec, args.classes, _BLOB_CENTERS[: args.classes], SOURCE_TAG)
        tgt = gen_gaussian_blobs(tgt_spec, args.classes, _BLOB_CENTERS[: args.classes], TARGET_TAG)
    save_csv(src, out / "source.csv")
    save_csv(tgt, out / "target.csv")
    manifest = {
        "source": _spec_dict(src_spec),
        "target": _spec_dict(tgt_spec),
        "files": {"source": "source.csv", "target": "target.csv"},
    }
    (out / "data_manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"wrote {out / 'source.csv'}, {out / 'target.csv'}, {out / 'data_manifest.json'}")
    return 0


def _spec_dict(spec: DomainSpec) -> dict:
    return {
        "generator": spec.generator,
        "n_samples": spec.n_samples,
        "noise_sd": spec.noise_sd,
        "rotation_deg": spec.rotation_deg,
        "translation": list(spec.translation),
        "scale": spec.scale,
        "seed": spec.seed,
    }


def _cli_overrides(args) -> dict[tuple[str, str], str]:
    overrides: dict[tuple[str, str], str] = {}
    if getattr(args, "saf", None) is not None:
        overrides[("train", "saf")] = args.saf
    if getattr(args, "backbone", None) is not None:
        overrides[("model", "backbone")] = args.backbone
    return overrides


def cmd_train(args) -> int:
    cfg_path = Path(args.config)
    cfg = _load_file_config(cfg_path, _cli_overrides(args))
    out = Path(args.out)
    base_dir = cfg_path.parent
    if args.seeds is not None:
        seeds = _parse_seeds(args.seeds)
        manifest = run_with_seeds(cfg, seeds, out, base_dir)
        agg = manifest["aggregate"]
        print(f"{len(seeds)} runs -> {out}: mean tgt acc "
              f"{agg['mean_target_accuracy']:.4f} (sd {agg['sd_target_accuracy']:.4f})")
    else:
        source, target = load_datasets(cfg, base_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.cfg").write_text(serialize_config(cfg), encoding="utf-8")
        run_experiment(cfg.train, source, target, out)
        print(f"run complete -> {out}")
    return 0


def cmd_eval(args) -> int:
    cfg = _load_file_config(Path(args.config), {})
    from .data import load_csv

    src = load_csv(args.source, has_labels=True, domain_tag=SOURCE_TAG)
    tgt = load_csv(args.target, has_labels=True, domain_tag=TARGET_TAG)
    bundle = build_bundle(cfg.train, np.random.default_rng(cfg.train.seed))
    bundle.load_params(args.model)
    rec = evaluate(bundle, src, tgt, cfg.train)
    from .training import METRICS_HEADER

    print(METRICS_HEADER)
    print(rec.csv_row())
    return 0


def cmd_ablate(args) -> int:
    cfg_path = Path(args.config)
    cfg = _load_file_config(cfg_path, {})
    seeds = _parse_seeds(args.seeds)
    table = run_ablation(cfg, seeds, Path(args.out), cfg_path.parent)
    print(table.read_text(encoding="utf-8"), end="")
    return 0


def cmd_export_embeddings(args) -> int:
    cfg = _load_file_config(Path(args.config), {})
    from .data import load_csv

    src = load_csv(args.source, has_labels=True, domain_tag=SOURCE_TAG)
    tgt = load_csv(args.target, has_labels=True, domain_tag=TARGET_TAG)
    bundle = build_bundle(cfg.train, np.random.default_rng(cfg.train.seed))
    bundle.load_params(args.model)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    export_embeddings(bundle, src, tgt, out / "embeddings.csv", out / "embeddings.svg")
    print(f"wrote {out / 'embeddings.csv'} and {out / 'embeddings.svg'}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="saflab", description=__doc__)
    parser.add_argument("--print-config", action="store_true",
                        help="print the documented default config and exit")
    sub = parser.add_subparsers(dest="command")

    g = sub.add_parser("gen-data", help="generate a shifted source/target dataset pair")
    g.add_argument("--kind", choices=["two_moons", "gaussian_blobs"], default="two_moons")
    g.add_argument("--samples", type=int, default=400)
    g.add_argument("--noise", type=float, default=0.15)
    g.add_argument("--rotation", type=float, default=35.0)
    g.add_argument("--translate-x", type=float, default=0.0)
    g.add_argument("--translate-y", type=float, default=0.0)
    g.add_argument("--scale", type=float, default=1.0)
    g.add_argument("--classes", type=int, default=2, help="gaussian_blobs class count (<= 3)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(fn=cmd_gen_data)

    t = sub.add_parser("train", help="run one configuration, optionally over several seeds")
    t.add_argument("--config", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--seeds", default=None, help="e.g. 0..4 or 0,1,2")
    t.add_argument("--saf", choices=["on", "off"], default=None,
                   help="override the config's train.saf")
    t.add_argument("--backbone", choices=["dann", "mdd"], default=None)
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="evaluate a saved model on labeled datasets")
    e.add_argument("--config", required=True)
    e.add_argument("--model", required=True)
    e.add_argument("--source", required=True)
    e.add_argument("--target", required=True)
    e.set_defaults(fn=cmd_eval)

    a = sub.add_parser("ablate", help="run the ten-variant modification grid")
    a.add_argument("--config", required=True)
    a.add_argument("--seeds", default="0..4")
    a.add_argument("--out", required=True)
    a.set_defaults(fn=cmd_ablate)

    x = sub.add_parser("export-embeddings", help="project bottleneck activations to 2-D")
    x.add_argument("--config", required=True)
    x.add_argument("--model", required=True)
    x.add_argument("--source", required=True)
    x.add_argument("--target", required=True)
    x.add_argument("--out", required=True)
    x.set_defaults(fn=cmd_export_embeddings)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.print_config:
        print(documented_default_text(), end="")
        return 0
    if getattr(args, "fn", None) is None:
        parser.print_usage(sys.stderr)
        return USAGE_EXIT
    try:
        return args.fn(args)
    except (SafLabError, OSError) as exc:
        print(f"saflab: error: {exc}", file=sys.stderr)
        return RUNTIME_EXIT


if __name__ == "__main__":
    sys.exit(main())
