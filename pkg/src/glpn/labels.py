"""Label blocks appended to node features, and the per-epoch global random mask."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from glpn.dataset import Dataset
from glpn.pseudolabel.client import PseudoLabelSet

NUM_CLASSES = 2


class Provenance(str, enum.Enum):
    TRUTH = "truth"
    PSEUDO = "pseudo"
    NONE = "none"


class LabelError(ValueError):
    pass


@dataclass(frozen=True)
class LabelAssignment:
    vectors: np.ndarray  # (n, C) one-hot or zero rows
    provenance: tuple[Provenance, ...]

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def num_classes(self) -> int:
        return self.vectors.shape[1]

    def indices(self, kind: Provenance) -> np.ndarray:
        return np.array([i for i, p in enumerate(self.provenance) if p is kind], dtype=np.int64)

    @classmethod
    def empty(cls, n: int, num_classes: int = NUM_CLASSES) -> "LabelAssignment":
        return cls(np.zeros((n, num_classes)), (Provenance.NONE,) * n)


@dataclass(frozen=True)
class MaskPlan:
    epoch_seed: int
    rho: float
    masked: np.ndarray  # sorted node indices
    m: np.ndarray  # 0.0 for masked nodes, 1.0 otherwise


def build_labels(ds: Dataset, pseudo: PseudoLabelSet | None = None) -> LabelAssignment:
    """Truth one-hots for train nodes, pseudo one-hots for filtered test nodes, zeros elsewhere.

    Held-out test labels are never read.
    """
    vectors = np.zeros((ds.n, NUM_CLASSES))
    prov = [Provenance.NONE] * ds.n
    for i, r in enumerate(ds.records):
        if r.split == "train":
            vectors[i, r.label] = 1.0
            prov[i] = Provenance.TRUTH
    if pseudo is not None:
        index = ds.index_of()
        for rid, verdict in pseudo.verdicts.items():
            if rid not in index:
                raise LabelError(f"pseudo label for unknown id {rid!r}")
            i = index[rid]
            if prov[i] is Provenance.TRUTH:
                raise LabelError(f"pseudo label would overwrite the truly labeled node {rid!r}")
            vectors[i, verdict.pred] = 1.0
            prov[i] = Provenance.PSEUDO
    return LabelAssignment(vectors, tuple(prov))


def mask_size(n: int, rho: float) -> int:
    # the epsilon keeps e.g. 0.7 * 10 == 6.999999999999999 from flooring to 6
    return min(n, math.floor(rho * n + 1e-9))


def draw_mask(n: int, rho: float, epoch_seed: int) -> MaskPlan:
    if not 0.0 <= rho <= 1.0:
        raise LabelError(f"rho must lie in [0, 1], got {rho}")
    rng = np.random.default_rng(epoch_seed)
    masked = np.sort(rng.choice(n, size=mask_size(n, rho), replace=False)).astype(np.int64)
    m = np.ones(n)
    m[masked] = 0.0
    return MaskPlan(epoch_seed=epoch_seed, rho=rho, masked=masked, m=m)


def apply_mask(labels: LabelAssignment, plan: MaskPlan) -> np.ndarray:
    if plan.m.shape[0] != labels.n:
        raise LabelError(f"mask covers {plan.m.shape[0]} nodes, labels cover {labels.n}")
    return labels.vectors * plan.m[:, None]


def assemble_features(ds: Dataset, y_prime: np.ndarray) -> np.ndarray:
    """Rows ``t_i ++ v_i ++ y'_i``."""
    if y_prime.shape[0] != ds.n:
        raise LabelError(f"label block has {y_prime.shape[0]} rows, dataset has {ds.n}")
    return np.hstack([ds.features(), y_prime])
