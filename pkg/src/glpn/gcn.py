"""Two-layer graph convolutional classifier trained under the global random mask.

    H1     = relu(A X' W0 + b0)
    logits = A H1 W1 + b1
    loss   = mean_{i in L} -log softmax(logits)_i[y_i]

``A`` is the symmetric normalized adjacency, ``X'`` the features with the label
block appended and ``L`` the loss set (masked train nodes). Gradients are
derived by hand; ``A`` is symmetric, so ``A^T`` never needs forming.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from glpn.dataset import Dataset
from glpn.labels import NUM_CLASSES, LabelAssignment, MaskPlan, apply_mask, assemble_features, draw_mask

PARAM_NAMES = ("w0", "b0", "w1", "b1")


class NonFiniteError(FloatingPointError):
    def __init__(self, stage: str, epoch: Optional[int] = None):
        where = f" at epoch {epoch}" if epoch is not None else ""
        super().__init__(f"non-finite values in {stage}{where}")
        self.stage = stage
        self.epoch = epoch


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 200
    rho: float = 0.5
    hidden: int = 512
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    runs: int = 5

    def __post_init__(self) -> None:
        if self.learning_rate <= 0 or self.epochs < 1 or self.hidden < 1 or self.runs < 1:
            raise ValueError("learning_rate, epochs, hidden and runs must be positive")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must lie in [0, 1], got {self.rho}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0 and self.eps > 0):
            raise ValueError("invalid Adam hyperparameters")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass
class GcnModel:
    w0: np.ndarray
    b0: np.ndarray
    w1: np.ndarray
    b1: np.ndarray

    @property
    def d_in(self) -> int:
        return self.w0.shape[0]

    @property
    def hidden(self) -> int:
        return self.w0.shape[1]

    @property
    def num_classes(self) -> int:
        return self.w1.shape[1]

    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self) -> "GcnModel":
        return GcnModel(**{k: v.copy() for k, v in self.params().items()})

    def equals(self, other: "GcnModel") -> bool:
        return all(np.array_equal(a, b) for a, b in zip(self.params().values(), other.params().values()))


Grads = dict[str, np.ndarray]


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, model: GcnModel) -> "AdamState":
        params = model.params()
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
        )


@dataclass(frozen=True)
class ForwardCache:
    ax: np.ndarray  # A X'
    pre: np.ndarray  # A X' W0 + b0
    h1: np.ndarray
    ah1: np.ndarray  # A H1
    logits: np.ndarray
    log_probs: np.ndarray
    probs: np.ndarray


@dataclass(frozen=True)
class EpochReport:
    epoch: int
    loss: Optional[float]  # None when the loss set was empty and the step skipped
    loss_set_size: int
    held_out_accuracy: Optional[float] = None


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def init_model(d_in: int, d_h: int, num_classes: int = NUM_CLASSES, seed: int = 0) -> GcnModel:
    if min(d_in, d_h, num_classes) < 1:
        raise ValueError("model dimensions must be positive")
    rng = np.random.default_rng(seed)
    return GcnModel(
        w0=glorot(rng, d_in, d_h),
        b0=np.zeros(d_h),
        w1=glorot(rng, d_h, num_classes),
        b1=np.zeros(num_classes),
    )


def _finite(stage: str, a: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise NonFiniteError(stage)
    return a


def forward(a_hat: sp.spmatrix, x: np.ndarray, model: GcnModel) -> ForwardCache:
    n = x.shape[0]
    if a_hat.shape != (n, n):
        raise ValueError(f"adjacency is {a_hat.shape}, features have {n} rows")
    if x.shape[1] != model.d_in:
        raise ValueError(f"features have {x.shape[1]} columns, model expects {model.d_in}")
    ax = _finite("layer-1 aggregation", np.asarray(a_hat @ x))
    pre = _finite("layer-1 pre-activation", ax @ model.w0 + model.b0)
    h1 = np.maximum(pre, 0.0)
    ah1 = np.asarray(a_hat @ h1)
    logits = _finite("logits", ah1 @ model.w1 + model.b1)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    probs = np.exp(log_probs)
    return ForwardCache(ax, pre, h1, ah1, logits, log_probs, probs)


def loss_nodes(plan: Optional[MaskPlan], train_idx: np.ndarray) -> np.ndarray:
    """Train nodes that contribute to the loss: the masked ones, or all when there is no plan."""
    if plan is None:
        return np.sort(np.asarray(train_idx, dtype=np.int64))
    return np.intersect1d(plan.masked, train_idx).astype(np.int64)


def masked_loss(log_probs: np.ndarray, targets: np.ndarray, loss_set: np.ndarray) -> Optional[float]:
    """Mean cross-entropy over ``loss_set``; ``None`` when the set is empty."""
    if loss_set.size == 0:
        return None
    return float(-log_probs[loss_set, targets[loss_set]].mean())


def backward(
    a_hat: sp.spmatrix,
    x: np.ndarray,
    model: GcnModel,
    cache: Optional[ForwardCache],
    loss_set: np.ndarray,
    targets: np.ndarray,
) -> Grads:
    if cache is None:
        raise ValueError("backward needs the forward cache of the same inputs")
    if loss_set.size == 0:
        return {k: np.zeros_like(p) for k, p in model.params().items()}

    d_logits = np.zeros_like(cache.probs)
    d_logits[loss_set] = cache.probs[loss_set]
    d_logits[loss_set, targets[loss_set]] -= 1.0
    d_logits /= loss_set.size

    d_w1 = cache.ah1.T @ d_logits
    d_b1 = d_logits.sum(axis=0)
    d_h1 = np.asarray(a_hat @ (d_logits @ model.w1.T))
    d_pre = d_h1 * (cache.pre > 0)
    d_w0 = cache.ax.T @ d_pre
    d_b0 = d_pre.sum(axis=0)
    return {"w0": d_w0, "b0": d_b0, "w1": d_w1, "b1": d_b1}


def adam_step(
    model: GcnModel,
    grads: Grads,
    state: AdamState,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[GcnModel, AdamState]:
    t = state.t + 1
    new_params, new_m, new_v = {}, {}, {}
    for name, p in model.params().items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient for {name} has shape {g.shape}, parameter has {p.shape}")
        m = beta1 * state.m[name] + (1.0 - beta1) * g
        v = beta2 * state.v[name] + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        new_params[name] = p - lr * m_hat / (np.sqrt(v_hat) + eps)
        new_m[name], new_v[name] = m, v
    return GcnModel(**new_params), AdamState(new_m, new_v, t)


def epoch_seed(seed: int, epoch: int) -> int:
    return int(np.random.SeedSequence([seed, epoch]).generate_state(1, dtype=np.uint64)[0])


def init_seed(seed: int) -> int:
    return int(np.random.SeedSequence([seed, 0xC0FFEE]).generate_state(1, dtype=np.uint64)[0])


def train_targets(ds: Dataset) -> np.ndarray:
    """Ground-truth classes for train nodes, ``-1`` for every other node."""
    targets = np.full(ds.n, -1, dtype=np.int64)
    for i, r in enumerate(ds.records):
        if r.split == "train":
            targets[i] = r.label
    return targets


EpochObserver = Callable[[int, Optional[MaskPlan], np.ndarray, np.ndarray], None]


def train(
    ds: Dataset,
    a_hat: sp.spmatrix,
    labels: LabelAssignment,
    cfg: TrainConfig,
    *,
    mask_labels: bool = True,
    observer: Optional[EpochObserver] = None,
    held_out: Optional[tuple[np.ndarray, np.ndarray]] = None,
) -> tuple[GcnModel, list[EpochReport]]:
    """Full-batch training.

    With ``mask_labels`` (the default) every epoch draws a fresh mask, zeroes the
    label block of the masked nodes and computes the loss on masked train nodes
    only. With ``mask_labels=False`` the label block is fed unmasked and every
    train node contributes to the loss; this is the leaky variant, and the
    label-free baseline when ``labels`` is all-zero.

    ``observer(epoch, plan, features, loss_set)`` is called every epoch.
    ``held_out=(indices, classes)`` adds an inference-mode accuracy to each report.
    """
    if labels.n != ds.n:
        raise ValueError(f"labels cover {labels.n} nodes, dataset has {ds.n}")
    targets = train_targets(ds)
    train_idx = np.flatnonzero(targets >= 0)
    d_in = ds.d_t + ds.d_v + labels.num_classes
    model = init_model(d_in, cfg.hidden, labels.num_classes, seed=init_seed(cfg.seed))
    state = AdamState.zeros_like(model)
    reports = []

    for epoch in range(cfg.epochs):
        if mask_labels:
            plan = draw_mask(ds.n, cfg.rho, epoch_seed(cfg.seed, epoch))
            y_prime = apply_mask(labels, plan)
        else:
            plan = None
            y_prime = labels.vectors
        x = assemble_features(ds, y_prime)
        current = loss_nodes(plan, train_idx)
        if observer is not None:
            observer(epoch, plan, x, current)

        try:
            cache = forward(a_hat, x, model)
        except NonFiniteError as exc:
            raise NonFiniteError(exc.stage, epoch) from None
        loss = masked_loss(cache.log_probs, targets, current)
        if loss is not None:
            if not np.isfinite(loss):
                raise NonFiniteError("loss", epoch)
            grads = backward(a_hat, x, model, cache, current, targets)
            model, state = adam_step(model, grads, state, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)

        acc = None
        if held_out is not None:
            idx, truth = held_out
            pred, _ = predict(ds, a_hat, labels, model)
            acc = float(np.mean(pred[idx] == truth))
        reports.append(EpochReport(epoch, loss, int(current.size), acc))
    return model, reports


def predict(
    ds: Dataset, a_hat: sp.spmatrix, labels: LabelAssignment, model: GcnModel
) -> tuple[np.ndarray, np.ndarray]:
    """Inference with the unmasked label block; ties go to class 0."""
    cache = forward(a_hat, assemble_features(ds, labels.vectors), model)
    return np.argmax(cache.probs, axis=1), cache.probs


_MAGIC = b"GLPNGCN1"


def save_model(model: GcnModel, path: str | Path, config: Optional[dict] = None) -> None:
    """Binary checkpoint: magic, u32 header length, JSON header, float64 little-endian tensors."""
    header = {
        "shapes": {k: list(v.shape) for k, v in model.params().items()},
        "order": list(PARAM_NAMES),
        "config": config or {},
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for name in PARAM_NAMES:
            fh.write(np.ascontiguousarray(getattr(model, name), dtype="<f8").tobytes(order="C"))


def load_model(path: str | Path) -> tuple[GcnModel, dict]:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[: len(_MAGIC)] != _MAGIC:
        raise ValueError(f"{path} is not a model checkpoint")
    offset = len(_MAGIC)
    (hlen,) = struct.unpack_from("<I", data, offset)
    offset += 4
    header = json.loads(data[offset : offset + hlen].decode("utf-8"))
    offset += hlen
    params = {}
    for name in header["order"]:
        shape = tuple(header["shapes"][name])
        count = int(np.prod(shape))
        params[name] = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape).astype(np.float64)
        offset += 8 * count
    if offset != len(data):
        raise ValueError(f"{path} has {len(data) - offset} trailing bytes")
    return GcnModel(**params), header["config"]
