"""Feed-forward classifier with hand-written gradients.

Architecture: per hidden block Linear -> BatchNorm -> ReLU, then a final
linear layer feeding a sigmoid (single output unit, binary) or a softmax.
Everything is float64 numpy; gradients are exact and checked against central
finite differences by grad_check.
"""

from __future__ import annotations

import copy
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, NumericError

log = logging.getLogger(__name__)

LOSS_KINDS = ("bce_logit", "squared", "cross_entropy")
PROB_FLOOR = 1e-12


@dataclass
class ModelConfig:
    """Layer widths (input first, output last) plus batchnorm settings."""

    layer_widths: list[int]
    batchnorm_epsilon: float = 1e-5
    batchnorm_momentum: float = 0.1
    init_seed: int = 0

    def __post_init__(self):
        if len(self.layer_widths) < 2:
            raise ConfigError("need at least an input and an output width")
        if any(w < 1 for w in self.layer_widths):
            raise ConfigError("layer widths must be >= 1")
        if self.batchnorm_epsilon <= 0:
            raise ConfigError("batchnorm epsilon must be > 0")
        if not (0.0 <= self.batchnorm_momentum < 1.0):
            raise ConfigError("batchnorm momentum must lie in [0, 1)")

    def to_dict(self) -> dict:
        return {
            "layer_widths": list(self.layer_widths),
            "batchnorm_epsilon": self.batchnorm_epsilon,
            "batchnorm_momentum": self.batchnorm_momentum,
            "init_seed": self.init_seed,
        }


class ModelState:
    """Parameters, batchnorm running statistics and the train/eval mode flag."""

    def __init__(self, config: ModelConfig):
        self.config = config
        self.mode = "train"
        widths = config.layer_widths
        self.n_hidden = len(widths) - 2
        self.w: list[np.ndarray] = []
        self.b: list[np.ndarray] = []
        self.gamma: list[np.ndarray] = []
        self.beta: list[np.ndarray] = []
        self.run_mean: list[np.ndarray] = []
        self.run_var: list[np.ndarray] = []
        for i in range(self.n_hidden):
            out_w, in_w = widths[i + 1], widths[i]
            self.w.append(np.zeros((out_w, in_w)))
            self.b.append(np.zeros(out_w))
            self.gamma.append(np.ones(out_w))
            self.beta.append(np.zeros(out_w))
            self.run_mean.append(np.zeros(out_w))
            self.run_var.append(np.ones(out_w))
        self.w_out = np.zeros((widths[-1], widths[-2]))
        self.b_out = np.zeros(widths[-1])

    @property
    def in_dim(self) -> int:
        return self.config.layer_widths[0]

    @property
    def out_dim(self) -> int:
        return self.config.layer_widths[-1]

    def named_parameters(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for i in range(self.n_hidden):
            out.extend(
                [

                    (f"w{i}", self.w[i]),
                    (f"b{i}", self.b[i]),
                    (f"gamma{i}", self.gamma[i]),
                    (f"beta{i}", self.beta[i]),
                ]
            )
        out.extend([("w_out", self.w_out), ("b_out", self.b_out)])
        return out

    def copy(self) -> ModelState:
        return copy.deepcopy(self)

    def train(self) -> ModelState:
        self.mode = "train"
        return self

    def eval(self) -> ModelState:
        self.mode = "eval"
        return self


def init_model(config: ModelConfig) -> ModelState:
    """Fan-in-scaled uniform weights (variance 2/fan_in), unit batchnorm."""
    model = ModelState(config)
    rng = np.random.default_rng(config.init_seed)
    for i in range(model.n_hidden):
        fan_in = config.layer_widths[i]
        bound = np.sqrt(6.0 / fan_in)
        model.w[i] = rng.uniform(-bound, bound, size=model.w[i].shape)
    fan_in = config.layer_widths[-2]
    bound = np.sqrt(6.0 / fan_in)
    model.w_out = rng.uniform(-bound, bound, size=model.w_out.shape)
    return model


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    ez = np.exp(shifted)
    return ez / ez.sum(axis=1, keepdims=True)


def forward(
    model: ModelState,
    batch: np.ndarray,
    mode: str | None = None,
    update_running: bool = True,
) -> tuple[np.ndarray, dict]:
    """Run the network; returns (probabilities, cache for backprop).

    Binary models (single output unit) return the positive-class probability
    as a length-N vector; wider heads return an (N, C) softmax matrix. Train
    mode normalizes with batch statistics and, unless update_running is
    False, folds them into the running statistics.
    """
    mode = mode or model.mode
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != model.in_dim:
        raise NumericError(f"batch width {x.shape[1]} != model input width {model.in_dim}")
    if mode == "train" and x.shape[0] < 2:
        raise NumericError("train-mode forward needs batch size >= 2 for batch statistics")

    eps = model.config.batchnorm_epsilon
    momentum = model.config.batchnorm_momentum
    n = x.shape[0]
    layers = []
    a = x
    for i in range(model.n_hidden):
        z = a @ model.w[i].T + model.b[i]
        if mode == "train":
            mu = z.mean(axis=0)
            var = z.var(axis=0)
            if update_running:
                unbiased = var * n / (n - 1)
                model.run_mean[i] = (1 - momentum) * model.run_mean[i] + momentum * mu
                model.run_var[i] = (1 - momentum) * model.run_var[i] + momentum * unbiased
        else:
            mu = model.run_mean[i]
            var = model.run_var[i]
        inv_std = 1.0 / np.sqrt(var + eps)
        xhat = (z - mu) * inv_std
        y = model.gamma[i] * xhat + model.beta[i]
        a_next = np.maximum(y, 0.0)
        layers.append(
            {"a_prev": a, "z": z, "mu": mu, "inv_std": inv_std, "xhat": xhat, "y": y}
        )
        a = a_next

    logits = a @ model.w_out.T + model.b_out
    if model.out_dim == 1:
        probs = _sigmoid(logits[:, 0])
    else:
        probs = _softmax(logits)
    cache = {"layers": layers, "a_last": a, "logits": logits, "mode": mode, "n": n}
    return probs, cache


def _clamped_log(p: np.ndarray) -> np.ndarray:
    if np.any(p < PROB_FLOOR) or np.any(p > 1.0 - PROB_FLOOR):
        log.warning("probabilities clamped to [%g, 1-%g] before log", PROB_FLOOR, PROB_FLOOR)
    return np.log(np.clip(p, PROB_FLOOR, 1.0 - PROB_FLOOR))


def compute_loss(kind: str, outputs: np.ndarray, targets: np.ndarray) -> float:
    """Mean loss over the batch.

    bce_logit expects raw logits and 0/1 targets; squared expects
    probabilities and 0/1 targets (one-hot rows for a softmax head);
    cross_entropy expects probabilities and 1-based class indices.
    """
    outputs = np.asarray(outputs, dtype=np.float64)
    targets = np.asarray(targets)
    if kind == "bce_logit":
        z = outputs.reshape(-1)
        t = targets.reshape(-1).astype(np.float64)
        if z.shape != t.shape:
            raise ConfigError("bce_logit: outputs and targets disagree on length")
        return float(np.mean(np.maximum(z, 0.0) - z * t + np.log1p(np.exp(-np.abs(z)))))
    if kind == "squared":
        if outputs.ndim == 1:
            t = targets.reshape(-1).astype(np.float64)
            return float(np.mean((outputs - t) ** 2))
        onehot = _onehot(targets, outputs.shape[1])
        return float(np.mean(((outputs - onehot) ** 2).sum(axis=1)))
    if kind == "cross_entropy":
        idx = targets.reshape(-1).astype(np.int64)
        if outputs.ndim == 1:
            pt = np.where(idx == 2, outputs, 1.0 - outputs)
        else:
            pt = outputs[np.arange(outputs.shape[0]), idx - 1]
        return float(np.mean(-_clamped_log(pt)))
    raise ConfigError(f"unknown loss kind {kind!r}")


def _onehot(targets: np.ndarray, c: int) -> np.ndarray:
    idx = np.asarray(targets).reshape(-1).astype(np.int64)
    out = np.zeros((idx.shape[0], c))
    out[np.arange(idx.shape[0]), idx - 1] = 1.0
    return out


def _dlogits(
    kind: str,
    probs: np.ndarray,
    logits: np.ndarray,
    targets: np.ndarray,
    denom: int | None = None,
) -> np.ndarray:
    """Gradient of the (sum / denom) loss with respect to the logits."""
    n = denom if denom is not None else logits.shape[0]
    if logits.shape[1] == 1:
        p = probs.reshape(-1)
        if kind == "bce_logit":
            t = np.asarray(targets).reshape(-1).astype(np.float64)
            d = (p - t) / n
        elif kind == "squared":
            t = np.asarray(targets).reshape(-1).astype(np.float64)
            d = 2.0 * (p - t) * p * (1.0 - p) / n
        elif kind == "cross_entropy":
            idx = np.asarray(targets).reshape(-1).astype(np.int64)
            t = (idx == 2).astype(np.float64)
            pc = np.clip(p, PROB_FLOOR, 1.0 - PROB_FLOOR)
            # d/dp of -log(p or 1-p), times sigmoid jacobian p(1-p)
            d = np.where(t == 1.0, -(1.0 - p) * p / pc, p * (1.0 - p) / (1.0 - pc)) / n
        else:
            raise ConfigError(f"unknown loss kind {kind!r}")
        return d[:, None]
    # softmax head
    if kind == "cross_entropy":
        onehot = _onehot(targets, logits.shape[1])
        return (probs - onehot) / n
    if kind == "squared":
        onehot = _onehot(targets, logits.shape[1])
        dp = 2.0 * (probs - onehot) / n
        inner = (dp * probs).sum(axis=1, keepdims=True)
        return probs * (dp - inner)
    raise ConfigError(f"loss kind {kind!r} is not defined for a softmax head")


def backprop(model: ModelState, cache: dict, dlogits: np.ndarray) -> dict[str, np.ndarray]:
    """Propagate a loss gradient at the logits back to every parameter.

    Uses the cached intermediates of the forward pass that produced the
    logits; in train mode the gradient flows through the batch statistics.
    """
    grads: dict[str, np.ndarray] = {}
    grads["w_out"] = dlogits.T @ cache["a_last"]
    grads["b_out"] = dlogits.sum(axis=0)
    da = dlogits @ model.w_out

    eps = model.config.batchnorm_epsilon
    train_mode = cache["mode"] == "train"
    for i in reversed(range(model.n_hidden)):
        layer = cache["layers"][i]
        dy = da * (layer["y"] > 0.0)
        grads[f"gamma{i}"] = (dy * layer["xhat"]).sum(axis=0)
        grads[f"beta{i}"] = dy.sum(axis=0)
        dxhat = dy * model.gamma[i]
        if train_mode:
            m = cache["n"]
            z_centered = layer["z"] - layer["mu"]
            inv_std = layer["inv_std"]
            dvar = (dxhat * z_centered).sum(axis=0) * (-0.5) * inv_std**3
            dmu = -(dxhat.sum(axis=0)) * inv_std + dvar * (-2.0 / m) * z_centered.sum(axis=0)
            dz = dxhat * inv_std + dvar * (2.0 / m) * z_centered + dmu / m
        else:
            dz = dxhat / np.sqrt(model.run_var[i] + eps)
        grads[f"w{i}"] = dz.T @ layer["a_prev"]
        grads[f"b{i}"] = dz.sum(axis=0)
        da = dz @ model.w[i]
    return grads


def loss_and_gradients(
    model: ModelState,
    batch: np.ndarray,
    targets: np.ndarray,
    kind: str,
    mode: str | None = None,
    update_running: bool = True,
) -> tuple[float, dict[str, np.ndarray]]:
    """Forward plus manual backprop; returns (loss, gradients by parameter name)."""
    mode = mode or model.mode
    probs, cache = forward(model, batch, mode=mode, update_running=update_running)
    if kind == "bce_logit":
        loss = compute_loss(kind, cache["logits"], targets)
    else:
        loss = compute_loss(kind, probs, targets)
    dlogits = _dlogits(kind, probs, cache["logits"], targets)
    return loss, backprop(model, cache, dlogits)


def compute_gradients(
    model: ModelState, batch: np.ndarray, targets: np.ndarray, kind: str
) -> dict[str, np.ndarray]:
    """Exact gradients of compute_loss for every parameter, honoring model.mode."""
    _, grads = loss_and_gradients(model, batch, targets, kind, update_running=False)
    return grads


@dataclass
class AdamState:
    """Per-parameter moment accumulators plus the shared step counter."""

    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_model(cls, model: ModelState, learning_rate: float = 0.001) -> AdamState:
        state = cls(learning_rate=learning_rate)
        for name, param in model.named_parameters():
            state.m[name] = np.zeros_like(param)
            state.v[name] = np.zeros_like(param)
        return state


def adam_step(
    opt: AdamState, model: ModelState, grads: dict[str, np.ndarray]
) -> tuple[ModelState, AdamState]:
    """One bias-corrected Adam update, in place."""
    opt.t += 1
    b1, b2 = opt.beta1, opt.beta2
    bias1 = 1.0 - b1**opt.t
    bias2 = 1.0 - b2**opt.t
    for name, param in model.named_parameters():
        g = grads[name]
        opt.m[name] = b1 * opt.m[name] + (1 - b1) * g
        opt.v[name] = b2 * opt.v[name] + (1 - b2) * g * g
        m_hat = opt.m[name] / bias1
        v_hat = opt.v[name] / bias2
        param -= opt.learning_rate * m_hat / (np.sqrt(v_hat) + opt.epsilon)
    return model, opt


@dataclass
class GradCheckReport:
    passed: bool
    tolerance: float
    worst_param: str
    worst_rel_error: float

    def __str__(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return (
            f"grad check {status}: worst {self.worst_param} "
            f"rel err {self.worst_rel_error:.3e} (tolerance {self.tolerance:.1e})"
        )


def grad_check(
    model: ModelState,
    batch: np.ndarray,
    targets: np.ndarray,
    kind: str,
    tolerance: float = 1e-4,
    step: float = 1e-4,
) -> GradCheckReport:
    """Compare analytic gradients to central finite differences, parameter-wise.

    Runs with eval-mode batchnorm (frozen statistics) so the loss is a smooth
    deterministic function of the parameters. Entries where both gradients
    are below 1e-6 in magnitude count as matching.
    """

    def loss_at() -> float:
        probs, cache = forward(model, batch, mode="eval")
        out = cache["logits"] if kind == "bce_logit" else probs
        return compute_loss(kind, out, targets)

    _, grads = loss_and_gradients(model, batch, targets, kind, mode="eval")
    worst_param = ""
    worst = 0.0
    for name, param in model.named_parameters():
        flat = param.reshape(-1)
        analytic = grads[name].reshape(-1)
        for j in range(flat.shape[0]):
            orig = flat[j]
            flat[j] = orig + step
            up = loss_at()
            flat[j] = orig - step
            down = loss_at()
            flat[j] = orig
            numeric = (up - down) / (2.0 * step)
            denom = max(abs(analytic[j]), abs(numeric), 1e-6)
            rel = abs(analytic[j] - numeric) / denom
            if rel > worst:
                worst = rel
                worst_param = f"{name}[{j}]"
    return GradCheckReport(worst <= tolerance, tolerance, worst_param, worst)


def predict_proba(model: ModelState, rows: np.ndarray) -> np.ndarray:
    """Eval-mode probabilities; positive-class vector for binary heads."""
    probs, _ = forward(model, rows, mode="eval")
    return probs


def predict(model: ModelState, rows: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Hard class labels (1-based); binary heads are positive iff p >= threshold."""
    probs = predict_proba(model, rows)
    if probs.ndim == 1:
        return np.where(probs >= threshold, 2, 1).astype(np.int64)
    return (np.argmax(probs, axis=1) + 1).astype(np.int64)


# -- checkpointing ----------------------------------------------------------


def save_model(model: ModelState, path: str | Path, train_seed: int | None = None) -> Path:
    """Single-file checkpoint: config, parameters, running stats, training seed."""
    path = Path(path)
    arrays = {name: param for name, param in model.named_parameters()}
    for i in range(model.n_hidden):
        arrays[f"run_mean{i}"] = model.run_mean[i]
        arrays[f"run_var{i}"] = model.run_var[i]
    meta = {
        "config": model.config.to_dict(),
        "mode": model.mode,
        "train_seed": train_seed,
    }
    np.savez(path, __meta__=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)
    return path if path.suffix == ".npz" else path.with_suffix(path.suffix + ".npz")


def load_model(path: str | Path) -> tuple[ModelState, int | None]:
    """Inverse of save_model; round-trips arrays bit-exactly."""
    with np.load(path) as data:
        meta = json.loads(bytes(data["__meta__"]).decode())
        model = ModelState(ModelConfig(**meta["config"]))
        model.mode = meta["mode"]
        for i in range(model.n_hidden):
            model.w[i] = data[f"w{i}"].copy()
            model.b[i] = data[f"b{i}"].copy()
            model.gamma[i] = data[f"gamma{i}"].copy()
            model.beta[i] = data[f"beta{i}"].copy()
            model.run_mean[i] = data[f"run_mean{i}"].copy()
            model.run_var[i] = data[f"run_var{i}"].copy()
        model.w_out = data["w_out"].copy()
        model.b_out = data["b_out"].copy()
    return model, meta["train_seed"]
