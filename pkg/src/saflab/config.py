"""Flat `key = value` config files with sections, parsed strictly.

Unknown sections or keys are rejected by name; `#` starts a comment.  The
same registry drives parsing, default documentation (`--print-config`) and
canonical serialization for run-directory snapshots.
"""

from __future__ import annotations

from dataclasses import dataclass

from .exceptions import ConfigError
from .mixup import MixupPolicy
from .training import TrainConfig


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("on", "true", "yes", "1"):
        return True
    if low in ("off", "false", "no", "0"):
        return False
    raise ConfigError(f"expected on/off, got {raw!r}")


def _parse_widths(raw: str) -> tuple[int, ...]:
    try:
        widths = tuple(int(p) for p in raw.split(",") if p.strip() != "")
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {raw!r}") from None
    if not widths:
        raise ConfigError("need at least one width")
    return widths


def _parse_threshold(raw: str):
    if raw.strip().lower() == "auto":
        return None
    return float(raw)


def _fmt_bool(v: bool) -> str:
    return "on" if v else "off"


def _fmt_widths(v) -> str:
    return ",".join(str(w) for w in v)


def _fmt_threshold(v) -> str:
    return "auto" if v is None else repr(float(v))


# section -> key -> (parser, formatter, comment)
_SCHEMA = {
    "data": {
        "source": (str, str, "labeled source CSV"),
        "target": (str, str, "labeled target CSV (labels used for evaluation only)"),
    },
    "model": {
        "backbone": (str, str, "dann | mdd"),
        "input_dim": (int, str, "feature width of the raw data"),
        "f_widths": (_parse_widths, _fmt_widths, "extractor layer widths, last = feature dim"),
        "bottleneck_dim": (int, str, ""),
        "saf_dim": (int, str, "mixup bottleneck output width"),
        "num_classes": (int, str, ""),
        "saf_bottlenecks": (int, str, "parallel mixup bottlenecks (2 = standard)"),
        "dropout": (float, repr, "rate used in bottleneck/classifier/adversary"),
        "conditioned_adversary": (_parse_bool, _fmt_bool,
                                  "dann only: append class probabilities to the adversary input"),
    },
    "train": {
        "iterations": (int, str, "total optimization steps"),
        "batch_size": (int, str, ""),
        "base_lr": (float, repr, "extractor/adversary rate; bottleneck/classifier/mixup run 10x"),
        "momentum": (float, repr, "Nesterov momentum"),
        "lambda_d_max": (float, repr, "adversarial ramp ceiling"),
        "lambda_m_max": (float, repr, "mixup ramp ceiling"),
        "margin_gamma": (float, repr, "source-term weight of the mdd adversary loss"),
        "saf": (_parse_bool, _fmt_bool, "enable the mixup supervision branch"),
        "eval_every": (int, str, "evaluation cadence in steps"),
        "seed": (int, str, ""),
    },
    "mixup": {
        "mode": (str, str, "saf | beta | constant"),
        "beta_alpha": (float, repr, "Beta(alpha, alpha) used in beta mode"),
        "constant_eta": (float, repr, "weight used in constant mode"),
        "entropy_filter": (str, str, "none | only_uncertain | only_certain"),
        "entropy_threshold": (_parse_threshold, _fmt_threshold,
                              "auto = half the maximum entropy log(K)"),
        "include_source": (_parse_bool, _fmt_bool, "append source rows to the mixing pool"),
        "after_bottleneck": (_parse_bool, _fmt_bool,
                             "mix bottleneck outputs instead of extractor outputs"),
    },
}


@dataclass
class FileConfig:
    """A parsed config file: dataset paths plus the training configuration."""

    source_path: str
    target_path: str
    train: TrainConfig

    def pairs(self) -> dict[tuple[str, str], str]:
        t, m = self.train, self.train.mixup
        values = {
            ("data", "source"): self.source_path,
            ("data", "target"): self.target_path,
            ("model", "backbone"): t.backbone,
            ("model", "input_dim"): t.input_dim,
            ("model", "f_widths"): t.f_widths,
            ("model", "bottleneck_dim"): t.bottleneck_dim,
            ("model", "saf_dim"): t.saf_dim,
            ("model", "num_classes"): t.num_classes,
            ("model", "saf_bottlenecks"): t.saf_bottlenecks,
            ("model", "dropout"): t.dropout,
            ("model", "conditioned_adversary"): t.conditioned_adversary,
            ("train", "iterations"): t.total_iterations,
            ("train", "batch_size"): t.batch_size,
            ("train", "base_lr"): t.base_lr,
            ("train", "momentum"): t.momentum,
            ("train", "lambda_d_max"): t.lambda_d_max,
            ("train", "lambda_m_max"): t.lambda_m_max,
            ("train", "margin_gamma"): t.margin_gamma,
            ("train", "saf"): t.saf_enabled,
            ("train", "eval_every"): t.eval_every,
            ("train", "seed"): t.seed,
            ("mixup", "mode"): m.mode,
            ("mixup", "beta_alpha"): m.beta_alpha,
            ("mixup", "constant_eta"): m.constant_eta,
            ("mixup", "entropy_filter"): m.entropy_filter,
            ("mixup", "entropy_threshold"): m.entropy_threshold,
            ("mixup", "include_source"): m.include_source,
            ("mixup", "after_bottleneck"): t.mixup_after_bottleneck,
        }
        out = {}
        for (section, key), value in values.items():
            _, fmt, _ = _SCHEMA[section][key]
            out[(section, key)] = fmt(value)
        return out


def default_config() -> FileConfig:
    return FileConfig("source.csv", "target.csv", TrainConfig())


def parse_pairs(text: str) -> dict[tuple[str, str], str]:
    """Raw `(section, key) -> value` pairs; strict about names and shape."""
    pairs: dict[tuple[str, str], str] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SCHEMA:
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        if section is None:
            raise ConfigError(f"line {lineno}: key outside of any [section]")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in _SCHEMA[section]:
            raise ConfigError(f"line {lineno}: unknown key {section}.{key}")
        pairs[(section, key)] = value
    return pairs


def build_config(pairs: dict[tuple[str, str], str]) -> FileConfig:
    """Defaults overlaid with the given pairs, validated by the dataclasses."""
    merged = default_config().pairs()
    merged.update(pairs)
    parsed = {}
    for (section, key), raw in merged.items():
        parser, _, _ = _SCHEMA[section][key]
        try:
            parsed[(section, key)] = parser(raw)
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"{section}.{key}: {exc}") from None

    def g(section, key):
        return parsed[(section, key)]

    policy = MixupPolicy(
        mode=g("mixup", "mode"),
        beta_alpha=g("mixup", "beta_alpha"),
        constant_eta=g("mixup", "constant_eta"),
        entropy_filter=g("mixup", "entropy_filter"),
        entropy_threshold=g("mixup", "entropy_threshold"),
        include_source=g("mixup", "include_source"),
    )
    train = TrainConfig(
        backbone=g("model", "backbone"),
        total_iterations=g("train", "iterations"),
        batch_size=g("train", "batch_size"),
        base_lr=g("train", "base_lr"),
        momentum=g("train", "momentum"),
        lambda_d_max=g("train", "lambda_d_max"),
        lambda_m_max=g("train", "lambda_m_max"),
        margin_gamma=g("train", "margin_gamma"),
        saf_enabled=g("train", "saf"),
        eval_every=g("train", "eval_every"),
        seed=g("train", "seed"),
        mixup=policy,
        input_dim=g("model", "input_dim"),
        f_widths=g("model", "f_widths"),
        bottleneck_dim=g("model", "bottleneck_dim"),
        saf_dim=g("model", "saf_dim"),
        num_classes=g("model", "num_classes"),
        saf_bottlenecks=g("model", "saf_bottlenecks"),
        dropout=g("model", "dropout"),
        mixup_after_bottleneck=g("mixup", "after_bottleneck"),
        conditioned_adversary=g("model", "conditioned_adversary"),
    )
    return FileConfig(g("data", "source"), g("data", "target"), train)


def parse_config(text: str) -> FileConfig:
    return build_config(parse_pairs(text))


def serialize_config(cfg: FileConfig) -> str:
    """Canonical text form: every key in schema order, no comments."""
    pairs = cfg.pairs()
    lines = []
    for section, keys in _SCHEMA.items():
        lines.append(f"[{section}]")
        for key in keys:
            lines.append(f"{key} = {pairs[(section, key)]}")
        lines.append("")
    return "\n".join(lines)


def documented_default_text() -> str:
    """Default config with one comment per documented key (--print-config)."""
    pairs = default_config().pairs()
    lines = []
    for section, keys in _SCHEMA.items():
        lines.append(f"[{section}]")
        for key, (_, _, comment) in keys.items():
            entry = f"{key} = {pairs[(section, key)]}"
            lines.append(f"{entry}  # {comment}" if comment else entry)
        lines.append("")
    return "\n".join(lines)
