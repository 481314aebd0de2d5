"""Fairness-aware training: the substitution proxy term and the epoch loop.

Each epoch computes the primary loss on the real batch, then for every
protected subset the constraint loss on rows substituted down to that subset
against freshly drawn uniform labels. The combined objective is
primary + alpha * proxy. The returned model is the parameter snapshot with
the highest validation accuracy.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset
from .errors import ConfigError, TrainingError
from .nn import (
    AdamState,
    ModelConfig,
    ModelState,
    _dlogits,
    adam_step,
    backprop,
    compute_loss,
    forward,
    init_model,
    predict,
)
from .schema import ProtectedFamily
from .substitution import substitute

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    """Objective weights, loss kinds and loop hyperparameters."""

    alpha: float = 0.0
    family: ProtectedFamily | None = None
    constraint_loss: str = "squared"
    primary_loss: str = "bce_logit"
    learning_rate: float = 0.001
    max_epochs: int = 100
    batch_size: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.alpha < 0:
            raise ConfigError("alpha must be >= 0")
        if self.max_epochs < 1:
            raise ConfigError("max_epochs must be >= 1")
        if self.batch_size is not None and self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2 (batch statistics) or None for full batch")
        if self.constraint_loss not in ("squared", "cross_entropy"):
            raise ConfigError(f"unsupported constraint loss {self.constraint_loss!r}")
        if self.primary_loss not in ("bce_logit", "cross_entropy"):
            raise ConfigError(f"unsupported primary loss {self.primary_loss!r}")
        if self.alpha > 0 and (self.family is None or len(self.family) == 0):
            raise ConfigError("alpha > 0 requires a non-empty protected family")


@dataclass
class EpochStats:
    epoch: int
    primary_loss: float
    proxy_loss: float
    combined_loss: float
    validation_accuracy: float


@dataclass
class TrainReport:
    epochs: list[EpochStats] = field(default_factory=list)
    best_epoch: int = 0
    best_validation_accuracy: float = 0.0

    def rows(self) -> list[list]:
        return [
            [e.epoch, e.primary_loss, e.proxy_loss, e.combined_loss, e.validation_accuracy]
            for e in self.epochs
        ]

    HEADER = ["epoch", "primary_loss", "proxy_loss", "combined_loss", "validation_accuracy"]


def sample_uniform_labels(n: int, c: int, rng: np.random.Generator | int) -> np.ndarray:
    """n labels drawn i.i.d. uniform over [1, c]."""
    if n < 1:
        raise ConfigError("need n >= 1 labels")
    if c < 2:
        raise ConfigError("uniform labels need at least 2 classes")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    return rng.integers(1, c + 1, size=n, dtype=np.int64)


def _constraint_targets(kind: str, y_rand: np.ndarray) -> np.ndarray:
    # squared on a sigmoid head wants 0/1 targets; cross_entropy wants class indices
    if kind == "squared":
        return (y_rand == 2).astype(np.float64)
    return y_rand


def proxy_loss(
    model: ModelState,
    batch: np.ndarray,
    baseline: np.ndarray,
    family: ProtectedFamily,
    y_rand_per_subset: list[np.ndarray],
    kind: str = "squared",
    mode: str | None = None,
) -> float:
    """Mean over rows of the summed per-subset constraint loss.

    y_rand_per_subset supplies one label vector per subset, aligned with the
    batch rows. Never touches running statistics.
    """
    if family is None or len(family) == 0:
        raise ConfigError("proxy loss needs a non-empty protected family")
    if len(y_rand_per_subset) != len(family):
        raise ConfigError("need one random label vector per protected subset")
    total = 0.0
    for subset, y_rand in zip(family.subsets, y_rand_per_subset):
        sub_batch = substitute(batch, baseline, subset)
        probs, cache = forward(model, sub_batch, mode=mode, update_running=False)
        outputs = probs
        targets = _constraint_targets(kind, np.asarray(y_rand))
        total += compute_loss(kind, outputs, targets)
    return total


def combined_loss(primary: float, proxy: float, alpha: float) -> float:
    return primary + alpha * proxy


def _batches(n: int, batch_size: int | None, rng: np.random.Generator) -> list[np.ndarray]:
    if batch_size is None or batch_size >= n:
        return [np.arange(n)]
    order = rng.permutation(n)
    chunks = [order[i : i + batch_size] for i in range(0, n, batch_size)]
    if len(chunks) > 1 and chunks[-1].shape[0] == 1:
        # a singleton batch has no batch variance; fold it into the previous one
        chunks[-2] = np.concatenate([chunks[-2], chunks[-1]])
        chunks.pop()
    return chunks


def train(
    train_ds: Dataset,
    valid_ds: Dataset,
    model_config: ModelConfig,
    config: TrainConfig,
) -> tuple[ModelState, TrainReport]:
    """Run the fairness-aware loop and return the best-validation snapshot.

    Determinism: the shuffle stream and the random-label stream are spawned
    independently from the seed, so enabling the proxy term never perturbs
    the primary path's randomness.
    """
    if train_ds.schema != valid_ds.schema:
        raise ConfigError("train and validation datasets must share a schema")
    if valid_ds.n < 1:
        raise ConfigError("validation dataset must be non-empty")
    if model_config.layer_widths[0] != train_ds.m:
        raise ConfigError(
            f"model input width {model_config.layer_widths[0]} != dataset width {train_ds.m}"
        )
    expected_out = 1 if train_ds.C == 2 else train_ds.C
    if model_config.layer_widths[-1] != expected_out:
        raise ConfigError(
            f"model output width {model_config.layer_widths[-1]} unsuited to C={train_ds.C}"
        )
    if train_ds.C != 2 and config.primary_loss == "bce_logit":
        raise ConfigError("bce_logit needs a binary dataset")

    shuffle_seq, label_seq = np.random.SeedSequence(config.seed).spawn(2)
    shuffle_rng = np.random.default_rng(shuffle_seq)
    label_rng = np.random.default_rng(label_seq)

    model = init_model(model_config).train()
    opt = AdamState.for_model(model, learning_rate=config.learning_rate)
    baseline = train_ds.schema.baseline_vector()
    subsets = config.family.subsets if config.family is not None else ()
    use_proxy = config.alpha > 0 and len(subsets) > 0

    x = train_ds.rows
    y = train_ds.labels
    primary_targets = train_ds.binary_targets() if train_ds.C == 2 else y
    xv = valid_ds.rows
    yv = valid_ds.labels

    report = TrainReport()
    best_model = model.copy()
    best_acc = -1.0
    last_finite: tuple[float, float] | None = None

    for epoch in range(1, config.max_epochs + 1):
        primary_sum = 0.0
        proxy_sum = 0.0
        for idx in _batches(train_ds.n, config.batch_size, shuffle_rng):
            xb = x[idx]
            nb = idx.shape[0]
            # the substituted rows ride in the same batch as the real ones
            # (weighted data augmentation), sharing batchnorm statistics
            if use_proxy:
                segments = [xb] + [substitute(xb, baseline, s) for s in subsets]
                y_rands = [
                    label_rng.integers(1, train_ds.C + 1, size=nb, dtype=np.int64)
                    for _ in subsets
                ]
                batch_all = np.concatenate(segments)
            else:
                batch_all = xb
                y_rands = []

            probs, cache = forward(model, batch_all, mode="train")
            logits = cache["logits"]
            p_probs = probs[:nb]
            p_logits = logits[:nb]
            p_out = p_logits if config.primary_loss == "bce_logit" else p_probs
            p_loss = compute_loss(config.primary_loss, p_out, primary_targets[idx])
            dlogits = np.zeros_like(logits)
            dlogits[:nb] = _dlogits(
                config.primary_loss, p_probs, p_logits, primary_targets[idx], denom=nb
            )

            batch_proxy = 0.0
            for k, y_rand in enumerate(y_rands):
                lo = (k + 1) * nb
                hi = lo + nb
                targets = _constraint_targets(config.constraint_loss, y_rand)
                k_probs = probs[lo:hi]
                batch_proxy += compute_loss(config.constraint_loss, k_probs, targets)
                dlogits[lo:hi] = config.alpha * _dlogits(
                    config.constraint_loss, k_probs, logits[lo:hi], targets, denom=nb
                )

            total = combined_loss(p_loss, batch_proxy, config.alpha)
            if not np.isfinite(total):
                raise TrainingError(
                    f"training diverged at epoch {epoch} "
                    f"(last finite losses: {last_finite})"
                )
            last_finite = (p_loss, batch_proxy)
            grads = backprop(model, cache, dlogits)
            adam_step(opt, model, grads)
            primary_sum += p_loss * nb
            proxy_sum += batch_proxy * nb

        primary_epoch = primary_sum / train_ds.n
        proxy_epoch = proxy_sum / train_ds.n
        preds = predict(model, xv)
        val_acc = float(np.mean(preds == yv))
        report.epochs.append(
            EpochStats(
                epoch,
                primary_epoch,
                proxy_epoch,
                combined_loss(primary_epoch, proxy_epoch, config.alpha),
                val_acc,
            )
        )
        if val_acc > best_acc:
            best_acc = val_acc
            best_model = model.copy()
            report.best_epoch = epoch

    report.best_validation_accuracy = best_acc
    log.info(
        "training done: best epoch %d, validation accuracy %.4f",
        report.best_epoch,
        best_acc,
    )
    return best_model, report
