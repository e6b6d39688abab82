"""End-to-end runs and parameter sweeps."""

from __future__ import annotations

import enum
import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from glpn.baselines import LpConfig, classic_lp, fcn_lp, label_free_gcn
from glpn.dataset import Dataset
from glpn.evaluation import Aggregate, ConfusionMatrix, MetricsReport, aggregate, confusion, metrics
from glpn.gcn import GcnModel, TrainConfig, predict, train
from glpn.graph import DEFAULT_THETA, build_graph, normalize
from glpn.labels import build_labels
from glpn.pseudolabel.client import (
    EndpointConfig,
    PseudoLabelSet,
    fetch_verdicts,
    filter_top_fraction,
    load_pseudo_labels,
    replay_fixture,
)
from glpn.pseudolabel.prompts import TEMPLATES, PromptStyle
from glpn.synthetic import oracle_pseudo_set

log = logging.getLogger(__name__)


class Mode(str, enum.Enum):
    FCN = "fcn"  # label-free GCN
    LP = "lp"  # classic label propagation of train labels
    FCN_LP = "fcn-lp"  # label-free GCN refined by clamped propagation
    GLPN = "glpn"  # masked label integration, ground truth only
    GLPN_LLM = "glpn-llm"  # plus confidence-filtered pseudo labels


class SweepError(RuntimeError):
    """A pipeline failure at one grid point; the message names the point."""


class SweepParameter(str, enum.Enum):
    MASK_RATE = "mask_rate"
    PSEUDO_FRACTION = "pseudo_fraction"


@dataclass(frozen=True)
class RunConfig:
    mode: Mode = Mode.GLPN_LLM
    theta: float = DEFAULT_THETA
    rho: float = 0.5
    pseudo_fraction: float = 0.05
    hidden: int = 512
    learning_rate: float = 1e-3
    epochs: int = 200
    runs: int = 5
    seed: int = 0
    lp_iterations: int = 50
    pseudo_source: str = "oracle"  # oracle | fixture | live | file
    oracle_accuracy: float = 0.85
    oracle_sharpness: float = 4.0
    oracle_seed: int = 0
    oracle_duplicate_threshold: Optional[float] = DEFAULT_THETA
    fixtures: Optional[str] = None
    pseudo_file: Optional[str] = None
    prompt_style: PromptStyle = PromptStyle.DETAILED
    endpoint_url: Optional[str] = None
    endpoint_model: str = "gpt-4o"
    llm_concurrency: int = 4

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "prompt_style", PromptStyle(self.prompt_style))
        if not -1.0 < self.theta <= 1.0:
            raise ValueError(f"theta must lie in (-1, 1], got {self.theta}")
        if not 0.0 <= self.pseudo_fraction <= 1.0:
            raise ValueError(f"pseudo_fraction must lie in [0, 1], got {self.pseudo_fraction}")
        if self.pseudo_source not in ("oracle", "fixture", "live", "file"):
            raise ValueError(f"unknown pseudo source {self.pseudo_source!r}")
        if self.pseudo_source == "fixture" and not self.fixtures:
            raise ValueError("pseudo source 'fixture' needs a fixtures file")
        if self.pseudo_source == "file" and not self.pseudo_file:
            raise ValueError("pseudo source 'file' needs a pseudo-label file")
        if self.llm_concurrency < 1:
            raise ValueError("llm_concurrency must be >= 1")
        if self.lp_iterations < 1:
            raise ValueError("lp_iterations must be >= 1")
        if not 0.0 <= self.oracle_accuracy <= 1.0 or self.oracle_sharpness <= 0:
            raise ValueError("oracle accuracy must lie in [0, 1] and sharpness be > 0")
        self.train_config(0)  # validates the trainer fields

    def train_config(self, run: int) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            rho=self.rho,
            hidden=self.hidden,
            seed=self.seed + run,
            runs=self.runs,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mode"] = self.mode.value
        d["prompt_style"] = self.prompt_style.value
        return d


@dataclass
class RunOutcome:
    config: RunConfig
    reports: list[MetricsReport]
    confusions: list[ConfusionMatrix]
    aggregate: Aggregate
    num_edges: int
    num_pseudo: int
    model: Optional[GcnModel] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "graph": {"edges": self.num_edges},
            "pseudo_labels_used": self.num_pseudo,
            "runs": [
                {"run": i, "seed": self.config.seed + i, "metrics": r.to_dict(), "confusion": asdict(c)}
                for i, (r, c) in enumerate(zip(self.reports, self.confusions))
            ],
            "aggregate": self.aggregate.to_dict(),
        }


def obtain_pseudo_labels(ds: Dataset, cfg: RunConfig) -> PseudoLabelSet:
    if cfg.pseudo_source == "oracle":
        return oracle_pseudo_set(
            ds, cfg.oracle_accuracy, cfg.oracle_sharpness, cfg.oracle_seed, cfg.oracle_duplicate_threshold
        )
    if cfg.pseudo_source == "fixture":
        return replay_fixture(cfg.fixtures, ds)  # type: ignore[arg-type]
    if cfg.pseudo_source == "file":
        return load_pseudo_labels(cfg.pseudo_file)  # type: ignore[arg-type]
    endpoint = EndpointConfig(model=cfg.endpoint_model, concurrency=cfg.llm_concurrency)
    if cfg.endpoint_url:
        endpoint.url = cfg.endpoint_url
    return fetch_verdicts(ds, TEMPLATES[cfg.prompt_style], endpoint, fixture=cfg.fixtures)


def _evaluate(ds: Dataset, classes: np.ndarray) -> tuple[MetricsReport, ConfusionMatrix]:
    preds = {r.id: int(c) for r, c in zip(ds.records, classes)}
    truths = {r.id: r.label for r in ds.records}
    eval_ids = [r.id for r in ds.records if r.split == "test"]
    cm = confusion(preds, truths, eval_ids)
    return metrics(cm), cm


def run_pipeline(
    ds: Dataset,
    cfg: RunConfig,
    *,
    a_hat: Optional[sp.spmatrix] = None,
    pseudo: Optional[PseudoLabelSet] = None,
    num_edges: Optional[int] = None,
) -> RunOutcome:
    """Graph, labels, ``cfg.runs`` trainings with seeds ``seed .. seed+runs-1``, test metrics.

    ``a_hat`` and ``pseudo`` may be passed in to reuse them across sweep points;
    ``pseudo`` is the unfiltered set and is filtered here.
    """
    if a_hat is None:
        graph = build_graph(ds, cfg.theta)
        a_hat = normalize(graph)
        num_edges = graph.num_edges
    if num_edges is None:
        num_edges = int((a_hat.nnz - ds.n) // 2)

    used: Optional[PseudoLabelSet] = None
    if cfg.mode is Mode.GLPN_LLM:
        if pseudo is None:
            pseudo = obtain_pseudo_labels(ds, cfg)
        used = filter_top_fraction(pseudo, cfg.pseudo_fraction, n_test=ds.n_test)
    labels = build_labels(ds, used)

    reports, cms = [], []
    model: Optional[GcnModel] = None
    if cfg.mode is Mode.LP:
        classes = classic_lp(a_hat, labels, LpConfig(cfg.lp_iterations)).classes
        report, cm = _evaluate(ds, classes)
        reports, cms = [report] * cfg.runs, [cm] * cfg.runs
    else:
        for run in range(cfg.runs):
            tcfg = cfg.train_config(run)
            if cfg.mode is Mode.FCN:
                model, classes, _ = label_free_gcn(ds, a_hat, tcfg)
            elif cfg.mode is Mode.FCN_LP:
                classes, _ = fcn_lp(ds, a_hat, labels, tcfg, LpConfig(cfg.lp_iterations))
            else:
                model, _ = train(ds, a_hat, labels, tcfg)
                classes, _ = predict(ds, a_hat, labels, model)
            report, cm = _evaluate(ds, classes)
            log.info("run %d (seed %d): accuracy %.4f", run, tcfg.seed, report.accuracy)
            reports.append(report)
            cms.append(cm)

    return RunOutcome(
        config=cfg,
        reports=reports,
        confusions=cms,
        aggregate=aggregate(reports),
        num_edges=int(num_edges),
        num_pseudo=0 if used is None else len(used),
        model=model,
    )


@dataclass
class SweepResult:
    parameter: SweepParameter
    grid: list[float]
    outcomes: list[RunOutcome]

    def means(self, metric: str = "accuracy") -> list[float]:
        return [o.aggregate.mean[metric] for o in self.outcomes]

    def to_dict(self) -> dict:
        return {
            "parameter": self.parameter.value,
            "grid": self.grid,
            "entries": [
                {"value": v, **o.to_dict()} for v, o in zip(self.grid, self.outcomes)
            ],
        }


def sweep(
    ds: Dataset,
    parameter: SweepParameter | str,
    grid: Sequence[float],
    base: RunConfig,
    *,
    pseudo: Optional[PseudoLabelSet] = None,
) -> SweepResult:
    parameter = SweepParameter(parameter)
    if not grid:
        raise ValueError("sweep grid is empty")
    graph = build_graph(ds, base.theta)
    a_hat = normalize(graph)
    if pseudo is None and (base.mode is Mode.GLPN_LLM or parameter is SweepParameter.PSEUDO_FRACTION):
        pseudo = obtain_pseudo_labels(ds, base)

    outcomes = []
    for value in grid:
        try:
            if parameter is SweepParameter.MASK_RATE:
                cfg = replace(base, rho=float(value))
            else:
                cfg = replace(base, pseudo_fraction=float(value), mode=Mode.GLPN_LLM)
            outcomes.append(run_pipeline(ds, cfg, a_hat=a_hat, pseudo=pseudo, num_edges=graph.num_edges))
        except Exception as exc:
            raise SweepError(f"{parameter.value}={value}: {exc}") from exc
    return SweepResult(parameter, [float(v) for v in grid], outcomes)
