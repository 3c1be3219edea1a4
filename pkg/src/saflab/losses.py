"""Loss functions and divergence diagnostics.

Differentiable losses (cross-entropy, cross-entropy divergence, the DANN
domain loss and the MDD adversarial loss) are fused tape operations with
analytic backwards; everything built on log-sum-exp so no log(0) appears.
The margin machinery, conditional entropy and the stump-based H-divergence
estimator are plain numpy diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .autodiff import Tape, Tensor, add, concat_rows, log_softmax_rows, record_op, scale_shift
from .exceptions import ConfigError, DataError, ShapeError


@dataclass(frozen=True)
class MarginParams:
    """Margin threshold rho and its exponential gamma = e^rho."""

    rho: float
    gamma: float

    def __post_init__(self):
        if self.rho <= 0:
            raise ConfigError(f"margin threshold must be positive, got {self.rho}")
        if not math.isclose(self.gamma, math.exp(self.rho), rel_tol=1e-12, abs_tol=1e-12):
            raise ConfigError(
                f"gamma must equal exp(rho): got gamma={self.gamma}, exp(rho)={math.exp(self.rho)}"
            )

    @classmethod
    def from_gamma(cls, gamma: float) -> "MarginParams":
        if gamma <= 1.0:
            raise ConfigError(f"gamma must exceed 1 so rho = log(gamma) > 0, got {gamma}")
        return cls(rho=math.log(gamma), gamma=gamma)


def _check_labels(labels, num_classes: int, batch: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.shape[0] != batch:
        raise ShapeError(f"labels must be a length-{batch} vector, got shape {labels.shape}")
    labels = labels.astype(np.intp)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise DataError(f"labels must lie in [0, {num_classes}), got range "
                        f"[{labels.min()}, {labels.max()}]")
    return labels


def cross_entropy(tape: Tape | None, logits: Tensor, labels) -> Tensor:
    """Mean over the batch of -log softmax(logits)[label]."""
    m, k = logits.shape
    if m == 0:
        raise DataError("cross entropy needs a non-empty batch")
    y = _check_labels(labels, k, m)
    ls = log_softmax_rows(logits.data)
    out = Tensor([[-ls[np.arange(m), y].mean()]])

    def bwd(g):
        gg = g[0, 0] / m
        grad = np.exp(ls)
        grad[np.arange(m), y] -= 1.0
        return (gg * grad,)

    return record_op(tape, (logits,), out, bwd)


def cross_entropy_divergence(tape: Tape | None, logits: Tensor, soft_labels) -> Tensor:
    """Mean over the batch of -sum_y Y_y * log softmax(logits)_y.

    Reduces exactly to ``cross_entropy`` when Y is one-hot, and is affine in
    Y.  ``soft_labels`` may be a Tensor, in which case gradients flow into it
    as well (the mixup weight needs this path).
    """
    y_t = soft_labels if isinstance(soft_labels, Tensor) else Tensor(np.asarray(soft_labels))
    if y_t.shape != logits.shape:
        raise ShapeError(f"soft labels shape {y_t.shape} != logits shape {logits.shape}")
    m = logits.rows
    if m == 0:
        raise DataError("cross entropy divergence needs a non-empty batch")
    ydata = y_t.data
    if ydata.min() < -1e-9:
        raise DataError(f"soft labels must be non-negative, min={ydata.min()}")
    row_sums = ydata.sum(axis=1)
    worst = np.abs(row_sums - 1.0).max()
    if worst > 1e-6:
        raise DataError(f"soft label rows must sum to 1 (worst deviation {worst:.3g})")
    ls = log_softmax_rows(logits.data)
    out = Tensor([[-(ydata * ls).sum() / m]])

    def bwd(g):
        gg = g[0, 0] / m
        p = np.exp(ls)
        dlogits = gg * (p * row_sums[:, None] - ydata)
        dy = -gg * ls
        return dlogits, dy

    return record_op(tape, (logits, y_t), out, bwd)


def dann_domain_loss(tape: Tape | None, d_logits_src: Tensor, d_logits_tgt: Tensor) -> Tensor:
    """Mean binary cross-entropy of the 2-way domain head; source=0, target=1."""
    if d_logits_src.cols != 2 or d_logits_tgt.cols != 2:
        raise ShapeError(
            f"domain adversary must have 2 outputs, got {d_logits_src.cols} / {d_logits_tgt.cols}"
        )
    both = concat_rows(tape, d_logits_src, d_logits_tgt)
    labels = np.concatenate(
        [np.zeros(d_logits_src.rows, dtype=np.intp), np.ones(d_logits_tgt.rows, dtype=np.intp)]
    )
    return cross_entropy(tape, both, labels)


def _complement_log_softmax_nll(tape: Tape | None, logits: Tensor, idx: np.ndarray) -> Tensor:
    """Mean of -log(1 - softmax(logits)[idx]) via log-sum-exp over the complement."""
    m, k = logits.shape
    x = logits.data
    full_max = x.max(axis=1, keepdims=True)
    e = np.exp(x - full_max)
    s_full = e.sum(axis=1, keepdims=True)
    rows = np.arange(m)
    # complement sum: drop the selected column before the log
    e_sel = e[rows, idx]
    s_comp = s_full[:, 0] - e_sel
    # log(1 - p_idx) = log(s_comp) - log(s_full); stable because s_comp >= 0
    vals = np.log(s_comp) - np.log(s_full[:, 0])
    out = Tensor([[-vals.mean()]])
    p = e / s_full
    c = e / s_comp[:, None]
    c[rows, idx] = 0.0

    def bwd(g):
        gg = g[0, 0] / m
        return (gg * (p - c),)

    return record_op(tape, (logits,), out, bwd)


def mdd_adversarial_loss(
    tape: Tape | None,
    c_logits_src: Tensor,
    d_logits_src: Tensor,
    c_logits_tgt: Tensor,
    d_logits_tgt: Tensor,
    params: MarginParams,
) -> Tensor:
    """Adversary loss of the margin-disparity backbone.

    Pseudo-labels are the gradient-stopped argmaxes of the main classifier's
    logits.  Target term: mean -log(1 - softmax(D)[y_hat]); source term is
    weighted by gamma = e^rho: gamma * mean -log(softmax(D)[y_hat]).  The
    adversary descends this loss directly while the extractor receives the
    reversed, lambda-scaled gradient through the GRL in its path.
    """
    k = c_logits_src.cols
    if not (c_logits_tgt.cols == d_logits_src.cols == d_logits_tgt.cols == k):
        raise ShapeError(
            "classifier and adversary widths must agree, got "
            f"C:{c_logits_src.cols}/{c_logits_tgt.cols} D:{d_logits_src.cols}/{d_logits_tgt.cols}"
        )
    y_src = np.argmax(c_logits_src.data, axis=1)
    y_tgt = np.argmax(c_logits_tgt.data, axis=1)
    src_term = cross_entropy(tape, d_logits_src, y_src)
    tgt_term = _complement_log_softmax_nll(tape, d_logits_tgt, y_tgt)
    return add(tape, scale_shift(tape, src_term, params.gamma), tgt_term)


# ---------------------------------------------------------------------------
# margin machinery (diagnostics, plain numpy)


def margin(probs, exemplar: int) -> float:
    """Half the gap between the exemplar-class probability and the runner-up."""
    p = np.asarray(probs, dtype=np.float64).ravel()
    if p.size < 2:
        raise ShapeError(f"margin needs at least two class probabilities, got {p.size}")
    if not (0 <= exemplar < p.size):
        raise DataError(f"exemplar index {exemplar} out of range for {p.size} classes")
    rest = np.delete(p, exemplar)
    return 0.5 * (p[exemplar] - rest.max())


def margin_loss(rho_val: float, rho_threshold: float) -> float:
    """1 below zero margin, linear ramp down to 0 at the threshold."""
    if rho_threshold <= 0:
        raise ConfigError(f"margin threshold must be positive, got {rho_threshold}")
    if rho_val < 0.0:
        return 1.0
    if rho_val > rho_threshold:
        return 0.0
    return 1.0 - rho_val / rho_threshold


def empirical_margin_disparity(
    probs_c: np.ndarray, probs_cprime: np.ndarray, rho_threshold: float
) -> float:
    """Mean margin loss of C against C-prime's predicted labels."""
    probs_c = np.asarray(probs_c, dtype=np.float64)
    probs_cprime = np.asarray(probs_cprime, dtype=np.float64)
    if probs_c.shape != probs_cprime.shape:
        raise ShapeError(f"shapes differ: {probs_c.shape} vs {probs_cprime.shape}")
    if rho_threshold <= 0:
        raise ConfigError(f"margin threshold must be positive, got {rho_threshold}")
    m = probs_c.shape[0]
    yp = np.argmax(probs_cprime, axis=1)
    rows = np.arange(m)
    top = probs_c[rows, yp]
    masked = probs_c.copy()
    masked[rows, yp] = -np.inf
    margins = 0.5 * (top - masked.max(axis=1))
    losses = np.where(margins < 0.0, 1.0, np.where(margins > rho_threshold, 0.0,
                                                   1.0 - margins / rho_threshold))
    return float(losses.mean())


def empirical_mdd_estimate(delta_src: float, delta_tgt: float) -> float:
    """2*(source disparity - target disparity); a lower-bound diagnostic."""
    return 2.0 * (delta_src - delta_tgt)


def conditional_entropy(probs) -> np.ndarray:
    """Per-row H = -sum p log p with 0*log(0) := 0; in [0, log K]."""
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim == 1:
        p = p.reshape(1, -1)
    if p.min() < 0:
        raise DataError(f"probabilities must be non-negative, min={p.min()}")
    plogp = np.zeros_like(p)
    mask = p > 0
    plogp[mask] = p[mask] * np.log(p[mask])
    return -plogp.sum(axis=1) + 0.0


class AxisStump:
    """Threshold classifier on one axis; hi_label goes to the > side."""

    __slots__ = ("axis", "threshold", "hi_label")

    def __init__(self, axis: int, threshold: float, hi_label: int):
        self.axis = axis
        self.threshold = threshold
        self.hi_label = hi_label

    def __call__(self, x: np.ndarray) -> np.ndarray:
        hi = x[:, self.axis] > self.threshold
        return np.where(hi, self.hi_label, 1 - self.hi_label)


def axis_stump_grid(points: np.ndarray, points_per_axis: int = 64) -> list[AxisStump]:
    """Both-polarity threshold stumps on an even grid per axis.

    The grid spans the observed range of each coordinate, so the set is
    closed under label flip by construction.
    """
    stumps: list[AxisStump] = []
    for axis in range(points.shape[1]):
        col = points[:, axis]
        for thr in np.linspace(col.min(), col.max(), points_per_axis):
            stumps.append(AxisStump(axis, float(thr), 1))
            stumps.append(AxisStump(axis, float(thr), 0))
    return stumps


def empirical_h_divergence(
    samples_src,
    samples_tgt,
    hypotheses: Sequence[Callable[[np.ndarray], np.ndarray]] | None = None,
    points_per_axis: int = 64,
) -> float:
    """2*(1 - min over hypotheses of [source-0 fraction + target-1 fraction]).

    Exhaustive enumeration over the hypothesis set; defaults to axis-aligned
    threshold stumps on the combined sample range.  Close to 0 for
    indistinguishable sets, 2 for perfectly separable ones.
    """
    s = _as_points(samples_src)
    t = _as_points(samples_tgt)
    if hypotheses is None:
        hypotheses = axis_stump_grid(np.vstack([s, t]), points_per_axis)
    hypotheses = list(hypotheses)
    if not hypotheses:
        raise ConfigError("hypothesis set must be non-empty")
    best = math.inf
    for h in hypotheses:
        score = float((h(s) == 0).mean()) + float((h(t) == 1).mean())
        if score < best:
            best = score
    return 2.0 * (1.0 - best)


def _as_points(samples) -> np.ndarray:
    feats = getattr(samples, "features", samples)
    arr = np.asarray(feats, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise DataError(f"samples must be a non-empty 2-D array, got shape {arr.shape}")
    return arr


def accuracy(logits, labels) -> float:
    """Fraction of rows whose argmax matches the label; ties go to the lowest index."""
    arr = logits.data if isinstance(logits, Tensor) else np.asarray(logits, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise DataError(f"accuracy needs a non-empty 2-D logits array, got shape {arr.shape}")
    y = _check_labels(labels, arr.shape[1], arr.shape[0])
    return float((np.argmax(arr, axis=1) == y).mean())
