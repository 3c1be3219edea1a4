"""The joint training loop: source supervision + adversarial alignment +
mixup supervision, with tanh ramp schedules and periodic evaluation.

One backward pass per step carries all three objectives; the gradient
reversal layer inside the adversary path gives the adversary its
opposite-sign update within that single pass.  Target ground-truth labels
never enter the training path -- training batches carry no target labels by
construction; they are used only by :func:`evaluate`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .data import Batch, cycle_batches
from .exceptions import ConfigError, DataError
from .losses import (
    MarginParams,
    accuracy,
    conditional_entropy,
    cross_entropy,
    dann_domain_loss,
    empirical_h_divergence,
    empirical_margin_disparity,
    empirical_mdd_estimate,
    mdd_adversarial_loss,
)
from .mixup import MixupPolicy, saf_mixup_batch, saf_supervision_loss
from .networks import ModelBundle, adversary_logits, build_bundle, classify, forward_features

METRICS_HEADER = "iter,eps_c,eps_d,eps_m,lambda_d,lambda_m,src_acc,tgt_acc,tgt_entropy,mdd_est,h_div"


@dataclass
class TrainConfig:
    """Every knob of one run: backbone, schedules, dimensions, mixup policy."""

    backbone: str = "mdd"
    total_iterations: int = 3000
    batch_size: int = 32
    base_lr: float = 0.004
    momentum: float = 0.9
    lambda_d_max: float = 0.1
    lambda_m_max: float = 0.1
    margin_gamma: float = 4.0
    saf_enabled: bool = True
    eval_every: int = 500
    seed: int = 0
    mixup: MixupPolicy = field(default_factory=MixupPolicy)
    input_dim: int = 2
    f_widths: tuple[int, ...] = (64, 32)
    bottleneck_dim: int = 16
    saf_dim: int = 16
    num_classes: int = 2
    saf_bottlenecks: int = 2
    dropout: float = 0.1
    mixup_after_bottleneck: bool = False
    conditioned_adversary: bool = False

    def __post_init__(self):
        if self.backbone not in ("dann", "mdd"):
            raise ConfigError(f"unknown backbone {self.backbone!r}")
        if self.total_iterations < 1:
            raise ConfigError(f"need at least 1 iteration, got {self.total_iterations}")
        if self.batch_size < 2:
            raise ConfigError(f"batch size must be >= 2, got {self.batch_size}")
        if self.base_lr <= 0 or self.momentum < 0:
            raise ConfigError("learning rate must be positive and momentum non-negative")
        if self.lambda_d_max < 0 or self.lambda_m_max < 0:
            raise ConfigError("schedule maxima must be >= 0")
        if self.margin_gamma <= 1:
            raise ConfigError(f"margin gamma must exceed 1, got {self.margin_gamma}")
        if self.eval_every < 1:
            raise ConfigError(f"eval_every must be >= 1, got {self.eval_every}")
        if self.num_classes < 2:
            raise ConfigError(f"need at least 2 classes, got {self.num_classes}")
        dims = (self.input_dim, *self.f_widths, self.bottleneck_dim, self.saf_dim)
        if min(dims) < 1:
            raise ConfigError(f"model dimensions must be positive, got {dims}")
        if self.saf_bottlenecks < 1:
            raise ConfigError(f"need at least one mixup bottleneck, got {self.saf_bottlenecks}")

    def margin_params(self) -> MarginParams:
        return MarginParams.from_gamma(self.margin_gamma)


@dataclass
class MetricsRecord:
    """One evaluation row; matches the metrics CSV column order."""

    iteration: int
    eps_c: float
    eps_d: float
    eps_m: float
    lambda_d: float
    lambda_m: float
    src_acc: float
    tgt_acc: float
    tgt_entropy: float
    mdd_est: float
    h_div: float

    def csv_row(self) -> str:
        vals = [
            self.eps_c, self.eps_d, self.eps_m, self.lambda_d, self.lambda_m,
            self.src_acc, self.tgt_acc, self.tgt_entropy, self.mdd_est, self.h_div,
        ]
        return ",".join([str(self.iteration)] + [repr(float(v)) for v in vals])


def _ramp(t: int, total: int, max_value: float, speed: float) -> float:
    if t < 0:
        raise ConfigError(f"iteration must be >= 0, got {t}")
    if total < 1:
        raise ConfigError(f"total iterations must be >= 1, got {total}")
    t = min(t, total)
    return max_value * math.tanh(speed * t / total)


def lambda_d_schedule(t: int, total: int, max_value: float = 0.1) -> float:
    """Adversarial weight ramp: max * tanh(10 t / T); 0 at t=0."""
    return _ramp(t, total, max_value, 10.0)


def lambda_m_schedule(t: int, total: int, max_value: float = 0.1) -> float:
    """Mixup weight ramp, slower: max * tanh(5 t / T)."""
    return _ramp(t, total, max_value, 5.0)


def _pseudo_probs_for(bundle: ModelBundle, raw_inputs: np.ndarray) -> np.ndarray:
    """Eval-mode F -> B -> C probabilities on raw inputs, detached."""
    feats = forward_features(None, bundle, raw_inputs)
    logits = classify(None, bundle, feats, training=False)
    return ad.softmax_rows(None, logits).data


def train_step(
    bundle: ModelBundle,
    src: Batch,
    tgt: Batch,
    config: TrainConfig,
    t: int,
    rng: np.random.Generator,
) -> dict:
    """One optimization step; returns the loss fragment that drove it.

    The backward pass runs on eps_c + eps_d + lambda_m(t) * eps_m.  The GRL
    coefficient lambda_d(t) scales (and flips) only the extractor's share of
    the adversarial gradient; when it is exactly 0 the adversarial branch is
    evaluated out of graph so the step matches plain supervised training.
    """
    if src.labels is None:
        raise DataError("source training batches must carry labels")
    lam_d = lambda_d_schedule(t, config.total_iterations, config.lambda_d_max)
    lam_m = lambda_m_schedule(t, config.total_iterations, config.lambda_m_max)

    tape = Tape()
    feats_src = forward_features(tape, bundle, src, training=True, rng=rng)
    logits_src = classify(tape, bundle, feats_src, training=True, rng=rng)
    eps_c = cross_entropy(tape, logits_src, src.labels)
    total = eps_c

    feats_tgt = None
    if lam_d > 0.0 or config.saf_enabled:
        feats_tgt = forward_features(tape, bundle, tgt, training=True, rng=rng)

    if lam_d > 0.0:
        d_src = adversary_logits(tape, bundle, feats_src, lam_d, training=True, rng=rng)
        d_tgt = adversary_logits(tape, bundle, feats_tgt, lam_d, training=True, rng=rng)
        if config.backbone == "dann":
            eps_d = dann_domain_loss(tape, d_src, d_tgt)
        else:
            c_src = Tensor(_pseudo_probs_for(bundle, src.features))
            c_tgt = Tensor(_pseudo_probs_for(bundle, tgt.features))
            eps_d = mdd_adversarial_loss(tape, c_src, d_src, c_tgt, d_tgt,
                                         config.margin_params())
        total = ad.add(tape, total, eps_d)
        eps_d_val = eps_d.item()
    else:
        eps_d_val = _adversarial_loss_value(bundle, src, tgt, config)

    if config.saf_enabled:
        if config.mixup_after_bottleneck:
            mix_input = bundle.B.forward(tape, feats_tgt, training=True, rng=rng)
        else:
            mix_input = feats_tgt
        src_kw = {}
        if config.mixup.include_source:
            src_feats = feats_src
            if config.mixup_after_bottleneck:
                src_feats = bundle.B.forward(tape, src_feats, training=True, rng=rng)
            src_kw = {"src_features": src_feats, "src_labels": src.labels}
        mixed = saf_mixup_batch(
            tape, bundle, mix_input, config.mixup, rng,
            through_bottleneck=not config.mixup_after_bottleneck, **src_kw,
        )
        # entropy filters can leave a single pair; batch norm needs >= 2 rows
        # in training mode, so such remnants contribute nothing (like empty)
        if len(mixed) >= 2:
            eps_m = saf_supervision_loss(
                tape, bundle, mixed, training=True, rng=rng,
                through_bottleneck=not config.mixup_after_bottleneck,
            )
            total = ad.add(tape, total, ad.scale_shift(tape, eps_m, lam_m))
            eps_m_val = eps_m.item()
        else:
            eps_m_val = 0.0
    else:
        eps_m_val = 0.0

    ad.backward(total, tape)
    trained = [p for p in bundle.parameters() if p.tensor.grad is not None]
    ad.sgd_nesterov_step(trained, config.base_lr, config.momentum)
    return {"eps_c": eps_c.item(), "eps_d": eps_d_val, "eps_m": eps_m_val,
            "lambda_d": lam_d, "lambda_m": lam_m}


def _adversarial_loss_value(bundle: ModelBundle, src: Batch, tgt: Batch,
                            config: TrainConfig) -> float:
    """Eval-mode adversarial loss, out of graph (metric only)."""
    feats_s = forward_features(None, bundle, src)
    feats_t = forward_features(None, bundle, tgt)
    d_src = adversary_logits(None, bundle, feats_s, 0.0)
    d_tgt = adversary_logits(None, bundle, feats_t, 0.0)
    if config.backbone == "dann":
        return dann_domain_loss(None, d_src, d_tgt).item()
    c_src = Tensor(_pseudo_probs_for(bundle, src.features))
    c_tgt = Tensor(_pseudo_probs_for(bundle, tgt.features))
    return mdd_adversarial_loss(None, c_src, d_src, c_tgt, d_tgt,
                                config.margin_params()).item()


def evaluate(
    bundle: ModelBundle,
    src_eval: Batch,
    tgt_eval: Batch,
    config: TrainConfig,
    iteration: int = 0,
) -> MetricsRecord:
    """Eval-mode metrics: losses, accuracies, and the divergence diagnostics.

    Deterministic: the mixup loss uses a generator freshly seeded from the
    config, so calling twice yields identical records.  Target labels are
    consumed only here.
    """
    if src_eval.labels is None or tgt_eval.labels is None:
        raise DataError("evaluation batches must carry labels")
    lam_d = lambda_d_schedule(iteration, config.total_iterations, config.lambda_d_max)
    lam_m = lambda_m_schedule(iteration, config.total_iterations, config.lambda_m_max)

    feats_s = forward_features(None, bundle, src_eval)
    feats_t = forward_features(None, bundle, tgt_eval)
    logits_s = classify(None, bundle, feats_s)
    logits_t = classify(None, bundle, feats_t)
    probs_s = ad.softmax_rows(None, logits_s).data
    probs_t = ad.softmax_rows(None, logits_t).data

    eps_c = cross_entropy(None, logits_s, src_eval.labels).item()
    eps_d = _adversarial_loss_value(bundle, src_eval, tgt_eval, config)

    if config.saf_enabled:
        eval_rng = np.random.default_rng(config.seed)
        mix_input = feats_t
        if config.mixup_after_bottleneck:
            mix_input = bundle.B.forward(None, feats_t)
        src_kw = {}
        if config.mixup.include_source:
            sf = feats_s
            if config.mixup_after_bottleneck:
                sf = bundle.B.forward(None, sf)
            src_kw = {"src_features": sf, "src_labels": src_eval.labels}
        mixed = saf_mixup_batch(
            None, bundle, mix_input, config.mixup, eval_rng,
            through_bottleneck=not config.mixup_after_bottleneck, **src_kw,
        )
        eps_m = saf_supervision_loss(
            None, bundle, mixed, training=False,
            through_bottleneck=not config.mixup_after_bottleneck,
        ).item()
    else:
        eps_m = 0.0

    d_src = adversary_logits(None, bundle, feats_s, lam_d)
    d_tgt = adversary_logits(None, bundle, feats_t, lam_d)
    if d_src.cols == config.num_classes:
        params = config.margin_params()
        probs_d_s = ad.softmax_rows(None, d_src).data
        probs_d_t = ad.softmax_rows(None, d_tgt).data
        delta_s = empirical_margin_disparity(probs_s, probs_d_s, params.rho)
        delta_t = empirical_margin_disparity(probs_t, probs_d_t, params.rho)
        mdd_est = empirical_mdd_estimate(delta_s, delta_t)
    else:
        # a 2-way domain head is not a classifier over the label set
        mdd_est = math.nan

    return MetricsRecord(
        iteration=iteration,
        eps_c=eps_c,
        eps_d=eps_d,
        eps_m=eps_m,
        lambda_d=lam_d,
        lambda_m=lam_m,
        src_acc=accuracy(logits_s, src_eval.labels),
        tgt_acc=accuracy(logits_t, tgt_eval.labels),
        tgt_entropy=float(conditional_entropy(probs_t).mean()),
        mdd_est=mdd_est,
        h_div=empirical_h_divergence(feats_s.data, feats_t.data),
    )


def run_experiment(
    config: TrainConfig,
    source: Batch,
    target: Batch,
    out_dir,
) -> Path:
    """Full run: T steps over independently cycling loaders, periodic evals.

    Writes metrics.csv incrementally and the final parameters to model.txt.
    Fully deterministic given (config, data): all randomness flows from
    SeedSequence(config.seed).
    """
    if source.labels is None:
        raise DataError("the source dataset must be labeled")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    ss = np.random.SeedSequence(config.seed)
    init_ss, src_ss, tgt_ss, step_ss = ss.spawn(4)
    bundle = build_bundle(config, np.random.default_rng(init_ss))
    src_iter = cycle_batches(source, config.batch_size, np.random.default_rng(src_ss))
    tgt_train = target.without_labels()
    tgt_iter = cycle_batches(tgt_train, config.batch_size, np.random.default_rng(tgt_ss))
    step_rng = np.random.default_rng(step_ss)

    metrics_path = out_dir / "metrics.csv"
    with open(metrics_path, "w", encoding="utf-8") as f:
        f.write(METRICS_HEADER + "\n")
        for t in range(config.total_iterations):
            train_step(bundle, next(src_iter), next(tgt_iter), config, t, step_rng)
            done = t + 1
            if done % config.eval_every == 0:
                rec = evaluate(bundle, source, target, config, iteration=done)
                f.write(rec.csv_row() + "\n")
                f.flush()
    bundle.save_params(out_dir / "model.txt")
    return out_dir
