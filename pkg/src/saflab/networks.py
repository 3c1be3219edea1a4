"""The five trainable blocks: extractor F, bottleneck B, classifier C,
adversary D, and the mixup-weight module M = (S_1..S_k, S_eta).

Blocks are small configurable MLPs.  The bottleneck and classifier carry a
10x learning-rate multiplier relative to the extractor, the adversary
follows the extractor's rate.  The adversary path applies gradient reversal
to the features first, then runs them through the shared bottleneck.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import BatchNormState, Parameter, Tape, Tensor
from .exceptions import ConfigError, DataError, ShapeError

ACTIVATIONS = ("relu", "sigmoid", "none")


@dataclass
class MLPSpec:
    """Per-layer widths, activations, dropout rates and batch-norm flags."""

    in_dim: int
    widths: list[int]
    activations: list[str]
    dropout_rates: list[float]
    batch_norm: list[bool] = field(default_factory=list)

    def __post_init__(self):
        if not self.batch_norm:
            self.batch_norm = [False] * len(self.widths)
        n = len(self.widths)
        if not (len(self.activations) == len(self.dropout_rates) == len(self.batch_norm) == n):
            raise ConfigError("per-layer lists must have equal length")
        if n == 0:
            raise ConfigError("an MLP needs at least one layer")
        if self.in_dim < 1 or min(self.widths) < 1:
            raise ConfigError(f"dimensions must be positive: in={self.in_dim}, widths={self.widths}")
        for a in self.activations:
            if a not in ACTIVATIONS:
                raise ConfigError(f"unknown activation {a!r}")
        for r in self.dropout_rates:
            if not (0.0 <= r < 1.0):
                raise ConfigError(f"dropout rate must be in [0, 1), got {r}")


class _Layer:
    __slots__ = ("w", "b", "activation", "dropout", "gamma", "beta", "bn_state")

    def __init__(self, w, b, activation, dropout, gamma=None, beta=None, bn_state=None):
        self.w = w
        self.b = b
        self.activation = activation
        self.dropout = dropout
        self.gamma = gamma
        self.beta = beta
        self.bn_state = bn_state


def _init_weight(fan_in: int, fan_out: int, activation: str, rng: np.random.Generator):
    # He-uniform feeds ReLU layers, Xavier-uniform everything else
    if activation == "relu":
        limit = math.sqrt(6.0 / fan_in)
    else:
        limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class MLP:
    """Stack of FC -> [batch norm] -> activation -> [dropout] layers."""

    def __init__(self, spec: MLPSpec, rng: np.random.Generator,
                 lr_multiplier: float = 1.0, name: str = "mlp"):
        self.spec = spec
        self.name = name
        self.layers: list[_Layer] = []
        fan_in = spec.in_dim
        for i, (width, act, rate, bn) in enumerate(
            zip(spec.widths, spec.activations, spec.dropout_rates, spec.batch_norm)
        ):
            w = Parameter(_init_weight(fan_in, width, act, rng), lr_multiplier, f"{name}.{i}.w")
            b = Parameter(np.zeros((1, width)), lr_multiplier, f"{name}.{i}.b")
            gamma = beta = state = None
            if bn:
                gamma = Parameter(np.ones((1, width)), lr_multiplier, f"{name}.{i}.bn_gamma")
                beta = Parameter(np.zeros((1, width)), lr_multiplier, f"{name}.{i}.bn_beta")
                state = BatchNormState(width)
            self.layers.append(_Layer(w, b, act, rate, gamma, beta, state))
            fan_in = width

    @property
    def in_dim(self) -> int:
        return self.spec.in_dim

    @property
    def out_dim(self) -> int:
        return self.spec.widths[-1]

    def forward(self, tape: Tape | None, x: Tensor, training: bool = False,
                rng: np.random.Generator | None = None) -> Tensor:
        if x.cols != self.in_dim:
            raise ShapeError(f"{self.name} expects width {self.in_dim}, got {x.cols}")
        h = x
        for layer in self.layers:
            h = ad.add_bias(tape, ad.matmul(tape, h, layer.w.tensor), layer.b.tensor)
            if layer.bn_state is not None:
                h = ad.batch_norm(tape, h, layer.gamma, layer.beta, layer.bn_state, training)
            if layer.activation == "relu":
                h = ad.relu(tape, h)
            elif layer.activation == "sigmoid":
                h = ad.sigmoid(tape, h)
            if layer.dropout > 0.0:
                h = ad.dropout(tape, h, layer.dropout, training, rng)
        return h

    def parameters(self):
        for layer in self.layers:
            yield layer.w
            yield layer.b
            if layer.gamma is not None:
                yield layer.gamma
                yield layer.beta

    def named_arrays(self):
        """All persistent arrays: parameters plus batch-norm running stats."""
        for p in self.parameters():
            yield p.name, p.tensor.data
        for i, layer in enumerate(self.layers):
            if layer.bn_state is not None:
                yield f"{self.name}.{i}.bn_mean", layer.bn_state.mean
                yield f"{self.name}.{i}.bn_var", layer.bn_state.var


class SAFModule:
    """Parallel feature bottlenecks plus a sigmoid weight estimator."""

    def __init__(self, in_dim: int, saf_dim: int, count: int,
                 rng: np.random.Generator, lr_multiplier: float = 10.0, name: str = "M"):
        if count < 1:
            raise ConfigError(f"need at least one mixup bottleneck, got {count}")
        self.in_dim = in_dim
        self.saf_dim = saf_dim
        self.bottlenecks = [
            MLP(MLPSpec(in_dim, [saf_dim], ["relu"], [0.0]), rng, lr_multiplier, f"{name}.s{i}")
            for i in range(count)
        ]
        self.estimator = MLP(
            MLPSpec(saf_dim, [1], ["sigmoid"], [0.0]), rng, lr_multiplier, f"{name}.eta"
        )

    def parameters(self):
        for b in self.bottlenecks:
            yield from b.parameters()
        yield from self.estimator.parameters()

    def named_arrays(self):
        for b in self.bottlenecks:
            yield from b.named_arrays()
        yield from self.estimator.named_arrays()


class ModelBundle:
    """F, B, C, D and M with all dimension seams checked at build time."""

    def __init__(self, F: MLP, B: MLP, C: MLP, D: MLP, M: SAFModule,
                 backbone: str, num_classes: int, conditioned_adversary: bool = False):
        self.F = F
        self.B = B
        self.C = C
        self.D = D
        self.M = M
        self.backbone = backbone
        self.num_classes = num_classes
        self.conditioned_adversary = conditioned_adversary

    def parameters(self):
        yield from self.F.parameters()
        yield from self.B.parameters()
        yield from self.C.parameters()
        yield from self.D.parameters()
        yield from self.M.parameters()

    def named_arrays(self):
        yield from self.F.named_arrays()
        yield from self.B.named_arrays()
        yield from self.C.named_arrays()
        yield from self.D.named_arrays()
        yield from self.M.named_arrays()

    def save_params(self, path) -> None:
        """Flat text format: one record per array -- name, shape, decimal values."""
        lines = []
        for name, arr in self.named_arrays():
            vals = " ".join(repr(float(v)) for v in arr.ravel())
            lines.append(f"{name} {arr.shape[0]} {arr.shape[1]} {vals}")
        with open(path, "w", encoding="utf-8") as f:
            f.write("\n".join(lines) + "\n")

    def load_params(self, path) -> None:
        with open(path, "r", encoding="utf-8") as f:
            records = {}
            for line in f:
                line = line.strip()
                if not line:
                    continue
                parts = line.split(" ")
                name, rows, cols = parts[0], int(parts[1]), int(parts[2])
                vals = np.array([float(v) for v in parts[3:]], dtype=np.float64)
                if vals.size != rows * cols:
                    raise DataError(f"record {name!r} has {vals.size} values for shape "
                                    f"{rows}x{cols}")
                records[name] = vals.reshape(rows, cols)
        own = dict(self.named_arrays())
        missing = sorted(set(own) - set(records))
        extra = sorted(set(records) - set(own))
        if missing or extra:
            raise DataError(f"parameter file mismatch: missing={missing}, unexpected={extra}")
        for name, arr in own.items():
            if records[name].shape != arr.shape:
                raise ShapeError(f"record {name!r} has shape {records[name].shape}, "
                                 f"expected {arr.shape}")
            arr[...] = records[name]


def build_bundle(config, rng: np.random.Generator) -> ModelBundle:
    """Construct all blocks from a TrainConfig-like object.

    Learning-rate multipliers: extractor and adversary carry 1, bottleneck,
    classifier and mixup module carry 10.
    """
    k = config.num_classes
    if k < 2:
        raise ConfigError(f"need at least 2 classes, got {k}")
    f_widths = list(config.f_widths)
    if not f_widths:
        raise ConfigError("extractor needs at least one layer width")
    feature_dim = f_widths[-1]
    drop = config.dropout
    f_spec = MLPSpec(config.input_dim, f_widths, ["relu"] * len(f_widths),
                     [0.0] * len(f_widths))
    b_spec = MLPSpec(feature_dim, [config.bottleneck_dim], ["relu"], [drop], [True])
    c_spec = MLPSpec(config.bottleneck_dim, [config.bottleneck_dim, k],
                     ["relu", "none"], [drop, 0.0])
    d_out = 2 if config.backbone == "dann" else k
    d_in = config.bottleneck_dim + (k if config.conditioned_adversary else 0)
    d_spec = MLPSpec(d_in, [config.bottleneck_dim, d_out], ["relu", "none"], [drop, 0.0])
    if config.backbone not in ("dann", "mdd"):
        raise ConfigError(f"unknown backbone {config.backbone!r}")
    if config.conditioned_adversary and config.backbone != "dann":
        raise ConfigError("the class-conditioned adversary is a dann-only option")

    saf_in = config.bottleneck_dim if config.mixup_after_bottleneck else feature_dim
    F = MLP(f_spec, rng, 1.0, "F")
    B = MLP(b_spec, rng, 10.0, "B")
    C = MLP(c_spec, rng, 10.0, "C")
    D = MLP(d_spec, rng, 1.0, "D")
    M = SAFModule(saf_in, config.saf_dim, config.saf_bottlenecks, rng, 10.0, "M")
    return ModelBundle(F, B, C, D, M, config.backbone, k, config.conditioned_adversary)


def forward_features(tape: Tape | None, bundle: ModelBundle, x,
                     training: bool = False, rng: np.random.Generator | None = None) -> Tensor:
    """Run the extractor on a Batch (or raw matrix), returning feature rows."""
    feats = getattr(x, "features", x)
    t = feats if isinstance(feats, Tensor) else Tensor(np.asarray(feats, dtype=np.float64))
    return bundle.F.forward(tape, t, training, rng)


def classify(tape: Tape | None, bundle: ModelBundle, features: Tensor,
             training: bool = False, rng: np.random.Generator | None = None) -> Tensor:
    """Bottleneck then classifier: logits of shape batch x num_classes."""
    h = bundle.B.forward(tape, features, training, rng)
    return bundle.C.forward(tape, h, training, rng)


def adversary_logits(tape: Tape | None, bundle: ModelBundle, features: Tensor,
                     lambda_d: float, training: bool = False,
                     rng: np.random.Generator | None = None) -> Tensor:
    """Gradient reversal, then the shared bottleneck, then the adversary.

    Forward-identity GRL means this equals the classify pipeline with C
    replaced by D; on the way back the extractor receives -lambda_d times
    the adversary gradient while B and D receive it unflipped.
    """
    h = ad.grad_reverse(tape, features, lambda_d)
    h = bundle.B.forward(tape, h, training, rng)
    if bundle.conditioned_adversary:
        # rough stand-in for a prediction-conditioned adversary: append the
        # gradient-stopped class probabilities to the bottleneck output
        logits = classify(None, bundle, Tensor(features.data), training=False)
        probs = ad.softmax_rows(None, logits)
        h = ad.concat_cols(tape, h, Tensor(probs.data))
    return bundle.D.forward(tape, h, training, rng)


def saf_weight(tape: Tape | None, m: SAFModule, phi1: Tensor, phi2: Tensor) -> Tensor:
    """Adaptive mixup weight: eta = S_eta(sum of routed bottleneck outputs).

    The two pair members are distributed round-robin over the k bottlenecks:
    with k=2 this is S_eta(S1(phi1) + S2(phi2)); with k=1 both members share
    the single bottleneck; with k=4 each member feeds two.
    """
    if phi1.shape != phi2.shape:
        raise ShapeError(f"pair members must share a shape, got {phi1.shape} and {phi2.shape}")
    if phi1.cols != m.in_dim:
        raise ShapeError(f"mixup module expects width {m.in_dim}, got {phi1.cols}")
    k = len(m.bottlenecks)
    total = None
    for i in range(max(k, 2)):
        member = phi1 if i % 2 == 0 else phi2
        s = m.bottlenecks[i % k].forward(tape, member)
        total = s if total is None else ad.add(tape, total, s)
    return m.estimator.forward(tape, total)
