"""Cross-modal similarity graph and the symmetric normalized propagation operator.

Construction is O(N^2 (d_t + d_v)): five dense Gram matrices pick candidate
pairs, then every candidate is rescored with :func:`pair_similarities` so the
stored scores and the edge decision come from one scalar code path.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np
import scipy.sparse as sp

from glpn.dataset import Dataset, NewsRecord

DEFAULT_THETA = 0.95

# candidate prefilter slack, far above float64 rounding in a Gram entry
_PREFILTER_SLACK = 1e-9


class SimilarityKind(str, enum.Enum):
    CONCAT_CONCAT = "concat_concat"
    IMAGE_TO_TEXT = "image_to_text"
    TEXT_TO_IMAGE = "text_to_image"
    IMAGE_TO_IMAGE = "image_to_image"
    TEXT_TO_TEXT = "text_to_text"


CROSS_MODAL = (SimilarityKind.IMAGE_TO_TEXT, SimilarityKind.TEXT_TO_IMAGE)

Annotation = tuple[tuple[SimilarityKind, float], ...]


class GraphError(ValueError):
    pass


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise GraphError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise GraphError("cosine is undefined for a zero vector")
    # clip guards |dot| exceeding the norm product by rounding
    return float(min(1.0, max(-1.0, float(np.dot(a, b)) / (na * nb))))


def pair_similarities(r_i: NewsRecord, r_j: NewsRecord) -> dict[SimilarityKind, float]:
    """All similarity kinds defined for the pair.

    ImageToText is ``cosine(v_i, t_j)`` and TextToImage is ``cosine(t_i, v_j)``.
    Both are omitted when the text and image dimensions differ.
    """
    out = {
        SimilarityKind.CONCAT_CONCAT: cosine(
            np.concatenate([r_i.text_embedding, r_i.image_embedding]),
            np.concatenate([r_j.text_embedding, r_j.image_embedding]),
        ),
        SimilarityKind.IMAGE_TO_IMAGE: cosine(r_i.image_embedding, r_j.image_embedding),
        SimilarityKind.TEXT_TO_TEXT: cosine(r_i.text_embedding, r_j.text_embedding),
    }
    if r_i.text_embedding.shape == r_i.image_embedding.shape == r_j.text_embedding.shape:
        out[SimilarityKind.IMAGE_TO_TEXT] = cosine(r_i.image_embedding, r_j.text_embedding)
        out[SimilarityKind.TEXT_TO_IMAGE] = cosine(r_i.text_embedding, r_j.image_embedding)
    return out


@dataclass(frozen=True)
class CrossModalGraph:
    n: int
    theta: float
    edges: Mapping[tuple[int, int], Annotation]

    def edge_set(self) -> set[tuple[int, int]]:
        return set(self.edges)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def adjacency(self) -> sp.csr_matrix:
        """Binary symmetric adjacency without self-loops."""
        if not self.edges:
            return sp.csr_matrix((self.n, self.n), dtype=np.float64)
        pairs = np.array(sorted(self.edges), dtype=np.int64)
        rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
        cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
        data = np.ones(rows.shape[0], dtype=np.float64)
        return sp.csr_matrix((data, (rows, cols)), shape=(self.n, self.n))


def _unit_rows(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def _candidate_pairs(ds: Dataset, theta: float, block: int = 1024) -> list[tuple[int, int]]:
    t = _unit_rows(ds.text_matrix())
    v = _unit_rows(ds.image_matrix())
    c = _unit_rows(np.hstack([ds.text_matrix(), ds.image_matrix()]))
    cut = theta - _PREFILTER_SLACK
    cross_modal = ds.d_t == ds.d_v
    pairs: list[tuple[int, int]] = []
    for start in range(0, ds.n, block):
        rows = slice(start, min(start + block, ds.n))
        hit = (c[rows] @ c.T > cut) | (t[rows] @ t.T > cut) | (v[rows] @ v.T > cut)
        if cross_modal:
            # v_i . t_j and t_i . v_j for i in this block
            hit |= (v[rows] @ t.T > cut) | (t[rows] @ v.T > cut)
        bi, bj = np.nonzero(hit)
        bi = bi + start
        keep = bi < bj
        pairs.extend(zip(bi[keep].tolist(), bj[keep].tolist()))
    return pairs


def build_graph(ds: Dataset, theta: float = DEFAULT_THETA) -> CrossModalGraph:
    if not -1.0 < theta <= 1.0:
        raise GraphError(f"theta must lie in (-1, 1], got {theta}")
    edges: dict[tuple[int, int], Annotation] = {}
    recs = ds.records
    for i, j in _candidate_pairs(ds, theta):
        sims = pair_similarities(recs[i], recs[j])
        hits = tuple((k, s) for k, s in sims.items() if s > theta)
        if hits:
            edges[(i, j)] = tuple(sorted(hits, key=lambda ks: ks[0].value))
    return CrossModalGraph(n=ds.n, theta=float(theta), edges=edges)


def normalize(g: CrossModalGraph) -> sp.csr_matrix:
    """``D^-1/2 (A + I) D^-1/2`` with ``D`` the degree matrix of ``A + I``."""
    a = g.adjacency() + sp.identity(g.n, dtype=np.float64, format="csr")
    deg = np.asarray(a.sum(axis=1)).ravel()
    d_inv_sqrt = sp.diags(1.0 / np.sqrt(deg))
    a_hat = (d_inv_sqrt @ a @ d_inv_sqrt).tocsr()
    a_hat.sort_indices()
    return a_hat


def save_graph(g: CrossModalGraph, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps({"n": g.n, "theta": g.theta}) + "\n")
        for (i, j) in sorted(g.edges):
            kinds = [{"kind": k.value, "score": s} for k, s in g.edges[(i, j)]]
            fh.write(json.dumps({"i": i, "j": j, "kinds": kinds}) + "\n")


def load_graph(path: str | Path) -> CrossModalGraph:
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if ln.strip()]
    if not lines:
        raise GraphError("empty graph file")
    header = json.loads(lines[0])
    n, theta = int(header["n"]), float(header["theta"])
    edges: dict[tuple[int, int], Annotation] = {}
    for lineno, raw in enumerate(lines[1:], start=2):
        obj = json.loads(raw)
        i, j = int(obj["i"]), int(obj["j"])
        if not 0 <= i < j < n:
            raise GraphError(f"line {lineno}: edge ({i}, {j}) violates 0 <= i < j < n")
        ann = tuple((SimilarityKind(k["kind"]), float(k["score"])) for k in obj["kinds"])
        if not ann or any(s <= theta for _, s in ann):
            raise GraphError(f"line {lineno}: every stored score must exceed theta")
        edges[(i, j)] = ann
    return CrossModalGraph(n=n, theta=theta, edges=edges)
