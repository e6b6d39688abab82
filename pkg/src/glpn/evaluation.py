"""Classification metrics and multi-run aggregation.

Class 0 ("fake") is the positive class of the confusion matrix; headline
precision, recall and F1 are macro averages over both classes.
"""

from __future__ import annotations

import statistics
from dataclasses import asdict, dataclass
from typing import Mapping, Sequence


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    precision_fake: float
    recall_fake: float
    f1_fake: float
    precision_real: float
    recall_real: float
    f1_real: float

    def to_dict(self) -> dict[str, float]:
        return asdict(self)


METRIC_NAMES = tuple(MetricsReport.__dataclass_fields__)


@dataclass(frozen=True)
class Aggregate:
    mean: dict[str, float]
    std: dict[str, float]
    runs: int

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std, "runs": self.runs}


class EvaluationError(ValueError):
    pass


def confusion(preds: Mapping[str, int], truths: Mapping[str, int | None], eval_ids: Sequence[str]) -> ConfusionMatrix:
    if not eval_ids:
        raise EvaluationError("empty evaluation set")
    tp = fp = fn = tn = 0
    for rid in eval_ids:
        if rid not in preds:
            raise EvaluationError(f"no prediction for {rid!r}")
        truth = truths.get(rid)
        if truth is None:
            raise EvaluationError(f"no held-out truth for {rid!r}")
        pred = preds[rid]
        if pred == 0 and truth == 0:
            tp += 1
        elif pred == 0:
            fp += 1
        elif truth == 0:
            fn += 1
        else:
            tn += 1
    return ConfusionMatrix(tp, fp, fn, tn)


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def _f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r else 0.0


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    if cm.total <= 0:
        raise EvaluationError("confusion matrix is empty")
    p_fake, r_fake = _ratio(cm.tp, cm.tp + cm.fp), _ratio(cm.tp, cm.tp + cm.fn)
    p_real, r_real = _ratio(cm.tn, cm.tn + cm.fn), _ratio(cm.tn, cm.tn + cm.fp)
    f_fake, f_real = _f1(p_fake, r_fake), _f1(p_real, r_real)
    return MetricsReport(
        accuracy=(cm.tp + cm.tn) / cm.total,
        macro_precision=(p_fake + p_real) / 2,
        macro_recall=(r_fake + r_real) / 2,
        macro_f1=(f_fake + f_real) / 2,
        precision_fake=p_fake,
        recall_fake=r_fake,
        f1_fake=f_fake,
        precision_real=p_real,
        recall_real=r_real,
        f1_real=f_real,
    )


def aggregate(reports: Sequence[MetricsReport]) -> Aggregate:
    """Per-metric mean and sample standard deviation (0 for a single report)."""
    if not reports:
        raise EvaluationError("nothing to aggregate")
    mean, std = {}, {}
    for name in METRIC_NAMES:
        values = [getattr(r, name) for r in reports]
        mean[name] = statistics.fmean(values)
        std[name] = statistics.stdev(values) if len(values) > 1 else 0.0
    return Aggregate(mean, std, len(reports))
