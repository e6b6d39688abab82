"""Synthetic multimodal datasets and a simulated LLM labeler.

Records are grouped into *stories*: near-duplicate items (reposts of one
claim) that share a label and a latent offset from their class mean, the way
real fake-news corpora contain many posts about the same event. Story members
are nearly collinear, so they end up connected in the similarity graph, while
different stories rarely are. ``story_size=1`` yields i.i.d. records.

``heldout_story_fraction`` of each class's test budget is filled with whole
stories before the remaining records are split at random, so some test stories
have no labeled member, as with event-based train/test splits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from glpn.dataset import Dataset, NewsRecord
from glpn.pseudolabel.client import PseudoLabelSet, PseudoSource
from glpn.pseudolabel.verdict import LlmVerdict


@dataclass(frozen=True)
class SynthConfig:
    n_per_class_train: int = 60
    n_per_class_test: int = 140
    d_t: int = 16
    d_v: int = 16
    class_separation: float = 0.3
    noise_sigma: float = 0.2
    modality_correlation: float = 0.9
    story_size: int = 4
    story_spread: float = 1.0
    heldout_story_fraction: float = 0.3
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.n_per_class_train, self.n_per_class_test, self.d_t, self.d_v, self.story_size) < 1:
            raise ValueError("counts, dimensions and story_size must be >= 1")
        if self.class_separation < 0 or self.story_spread < 0:
            raise ValueError("class_separation and story_spread must be >= 0")
        if self.noise_sigma <= 0:
            raise ValueError("noise_sigma must be > 0")
        if not 0.0 <= self.modality_correlation <= 1.0:
            raise ValueError("modality_correlation must lie in [0, 1]")
        if not 0.0 <= self.heldout_story_fraction <= 1.0:
            raise ValueError("heldout_story_fraction must lie in [0, 1]")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    @property
    def n(self) -> int:
        return 2 * (self.n_per_class_train + self.n_per_class_test)


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _class_means(rng: np.random.Generator, d: int, separation: float) -> np.ndarray:
    """Two means at distance ``separation``, symmetric about a random unit direction."""
    base = _unit(rng.standard_normal(d))
    if d == 1:
        return np.stack([base, base])  # no room for a separating axis
    u = rng.standard_normal(d)
    u = _unit(u - (u @ base) * base)
    return np.stack([base - 0.5 * separation * u, base + 0.5 * separation * u])


def _embed(rng: np.random.Generator, center: np.ndarray, sigma: float) -> np.ndarray:
    d = center.shape[0]
    for _ in range(100):
        v = center + sigma / math.sqrt(d) * rng.standard_normal(d)
        norm = np.linalg.norm(v)
        if norm > 1e-12:
            return v / norm
    raise RuntimeError("could not draw a nonzero embedding")  # pragma: no cover


def generate_synthetic(cfg: SynthConfig = SynthConfig()) -> Dataset:
    rng = np.random.default_rng(cfg.seed)
    mu_t = _class_means(rng, cfg.d_t, cfg.class_separation)
    mu_v = _class_means(rng, cfg.d_v, cfg.class_separation)

    rows = []  # (class, story, split)
    story = 0
    for c in (0, 1):
        n_c = cfg.n_per_class_train + cfg.n_per_class_test
        members = [list(range(k, min(k + cfg.story_size, n_c))) for k in range(0, n_c, cfg.story_size)]
        # whole stories go to the test split first, as in event-based splits
        budget = math.floor(cfg.heldout_story_fraction * cfg.n_per_class_test + 1e-9)
        split_of = {}
        for k in rng.permutation(len(members)):
            if len(members[k]) <= budget:
                budget -= len(members[k])
                split_of.update({m: "test" for m in members[k]})
        rest = [m for m in range(n_c) if m not in split_of]
        n_test_rest = cfg.n_per_class_test - sum(v == "test" for v in split_of.values())
        rest_splits = np.array(["train"] * (len(rest) - n_test_rest) + ["test"] * n_test_rest)
        split_of.update(zip(rest, rest_splits[rng.permutation(len(rest))].tolist()))
        for k, group in enumerate(members):
            rows.extend((c, story + k, split_of[m]) for m in group)
        story += len(members)

    offsets_t = cfg.story_spread / math.sqrt(cfg.d_t) * rng.standard_normal((story, cfg.d_t))
    offsets_v = cfg.story_spread / math.sqrt(cfg.d_v) * rng.standard_normal((story, cfg.d_v))

    order = rng.permutation(len(rows))
    records = []
    for idx, pos in enumerate(order):
        c, s, split = rows[pos]
        image_class = c if rng.random() < cfg.modality_correlation else 1 - c
        rid = f"n{idx:05d}"
        records.append(
            NewsRecord(
                id=rid,
                split=split,
                label=c,
                text_embedding=_embed(rng, mu_t[c] + offsets_t[s], cfg.noise_sigma),
                image_embedding=_embed(rng, mu_v[image_class] + offsets_v[s], cfg.noise_sigma),
                text=f"Synthetic news item {rid}.",
            )
        )
    return Dataset(tuple(records))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def near_duplicate_groups(vectors: np.ndarray, threshold: float) -> np.ndarray:
    """Connected components of the graph linking rows with cosine similarity above ``threshold``."""
    unit = _unit(vectors)
    sim = unit @ unit.T
    n = len(vectors)
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in zip(*np.nonzero(np.triu(sim > threshold, k=1))):
        ri, rj = find(int(i)), find(int(j))
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    roots = np.array([find(i) for i in range(n)])
    _, group = np.unique(roots, return_inverse=True)
    return group


def oracle_pseudo_labels(
    ds: Dataset,
    accuracy: float = 0.85,
    conf_sharpness: float = 4.0,
    seed: int = 0,
    duplicate_threshold: float | None = None,
) -> list[tuple[str, LlmVerdict]]:
    """Simulated LLM verdicts for every test record.

    Each verdict is correct with probability ``accuracy``. Its confidence is
    ``sigmoid(s)`` with ``s ~ N(+sharpness/2, 1)`` for correct verdicts and
    ``N(-sharpness/2, 1)`` for wrong ones, so confidence ranks a correct verdict
    above a wrong one with probability ``Phi(sharpness / sqrt(2))``.

    With ``duplicate_threshold`` set, test records whose text embeddings are
    linked by cosine similarity above it share a single correctness draw, the
    way a language model answers near-identical posts identically. Marginal
    accuracy per record is unchanged.
    """
    if not 0.0 <= accuracy <= 1.0:
        raise ValueError(f"accuracy must lie in [0, 1], got {accuracy}")
    if conf_sharpness <= 0:
        raise ValueError("conf_sharpness must be > 0")
    test = [r for r in ds.records if r.split == "test"]
    for r in test:
        if r.label is None:
            raise ValueError(f"test record {r.id!r} has no held-out label for the oracle")
    if not test:
        return []
    rng = np.random.default_rng(seed)
    if duplicate_threshold is None:
        group = np.arange(len(test))
    else:
        group = near_duplicate_groups(np.vstack([r.text_embedding for r in test]), duplicate_threshold)
    correct = (rng.random(group.max() + 1) < accuracy)[group]
    latent = np.where(correct, 0.5, -0.5) * conf_sharpness + rng.standard_normal(len(test))
    conf = _sigmoid(latent)
    out = []
    for r, ok, cf in zip(test, correct, conf):
        pred = r.label if ok else 1 - r.label
        raw = f"Result: {pred}, Confidence: {float(cf) * 100.0:.4f}%"
        out.append((r.id, LlmVerdict(pred=int(pred), confidence=float(cf), reason=None, raw=raw)))
    return out


def oracle_pseudo_set(
    ds: Dataset,
    accuracy: float = 0.85,
    conf_sharpness: float = 4.0,
    seed: int = 0,
    duplicate_threshold: float | None = None,
) -> PseudoLabelSet:
    verdicts = oracle_pseudo_labels(ds, accuracy, conf_sharpness, seed, duplicate_threshold)
    return PseudoLabelSet(dict(verdicts), PseudoSource.ORACLE)
