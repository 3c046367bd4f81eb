"""Prediction, confusion, and class-accuracy imbalance metrics.

COBias is the mean absolute difference in accuracy over all class pairs:

    COBias = C(N,2)^-1 * sum_{i<j} |A_i - A_j|

The odd class of a true class i is the class receiving most of i's
mispredictions; COBias_single averages |A_odd(i) - A_i| over classes with a
defined odd class. The per-class PMI uses add-mu smoothed count ratios

    PMI_j = ln( f(pred=j, true=j) / (f(pred=j) * f(true=j)) ),
    f(event) = (count + mu) / (M + mu * N)

with natural logarithms throughout.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .data import ProbabilityDataset, WeightScale, WeightSelection, readonly_array
from .errors import ValidationError

DEFAULT_MU = 1e-3


def _coefficients(
    num_classes: int,
    selection: WeightSelection | None,
    scale: WeightScale | None,
) -> np.ndarray | None:
    """Resolve an optional (selection, scale) pair to a coefficient vector."""
    if selection is None:
        return None
    if scale is None:
        raise ValidationError("a weight selection requires its scale")
    selection.validate(num_classes, scale)
    return selection.coefficients(scale)


def weighted_scores(probs: np.ndarray, coefficients: np.ndarray | None) -> np.ndarray:
    return probs if coefficients is None else probs * coefficients


def predict(
    probs,
    selection: WeightSelection | None = None,
    scale: WeightScale | None = None,
) -> int:
    """Predicted class for one probability vector: argmax of weighted entries.

    With no selection the raw argmax is returned. Ties break to the lowest
    class index.
    """
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1:
        raise ValidationError(f"expected a 1-d probability vector, got shape {probs.shape}")
    coeffs = _coefficients(probs.shape[0], selection, scale)
    return int(np.argmax(weighted_scores(probs, coeffs)))


def predict_dataset(
    dataset: ProbabilityDataset,
    selection: WeightSelection | None = None,
    scale: WeightScale | None = None,
) -> np.ndarray:
    """Predicted class per sample, lowest-index tie-break."""
    coeffs = _coefficients(dataset.num_classes, selection, scale)
    return np.argmax(weighted_scores(dataset.probs, coeffs), axis=1)


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """counts[i][j] = number of samples with true class i predicted as j."""

    counts: np.ndarray

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def num_samples(self) -> int:
        return int(self.counts.sum())

    @property
    def class_totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def prediction_totals(self) -> np.ndarray:
        return self.counts.sum(axis=0)


def counts_from_predictions(labels: np.ndarray, predictions: np.ndarray, num_classes: int) -> np.ndarray:
    flat = labels * num_classes + predictions
    return np.bincount(flat, minlength=num_classes * num_classes).reshape(
        num_classes, num_classes
    )


def confusion(
    dataset: ProbabilityDataset,
    selection: WeightSelection | None = None,
    scale: WeightScale | None = None,
) -> ConfusionMatrix:
    """Confusion matrix of the dataset under (optionally reweighted) argmax."""
    preds = predict_dataset(dataset, selection, scale)
    return ConfusionMatrix(
        counts=readonly_array(counts_from_predictions(dataset.labels, preds, dataset.num_classes))
    )


def accuracy_from_counts(counts: np.ndarray) -> np.ndarray:
    totals = counts.sum(axis=1).astype(np.float64)
    diag = np.diag(counts).astype(np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        acc = np.where(totals > 0, diag / totals, np.nan)
    return acc


def per_class_accuracy(cm: ConfusionMatrix) -> np.ndarray:
    """Diagonal over row totals; NaN marks classes with no true samples."""
    return accuracy_from_counts(cm.counts)


def cobias(per_class) -> float:
    """Mean absolute pairwise accuracy difference.

    NaN entries (classes without true samples) are excluded from the pairs
    with a warning; fewer than two defined entries yield 0.0.
    """
    vals = np.asarray(per_class, dtype=np.float64)
    if vals.ndim != 1 or vals.size < 2:
        raise ValidationError("need accuracies for at least 2 classes")
    defined = vals[~np.isnan(vals)]
    if defined.size < vals.size:
        warnings.warn(
            "classes without true samples excluded from the pairwise accuracy gap",
            stacklevel=2,
        )
    n = defined.size
    if n < 2:
        warnings.warn("fewer than 2 classes with defined accuracy; gap is 0", stacklevel=2)
        return 0.0
    # For sorted a: sum_{i<j} (a_j - a_i) = sum_k a_k * (2k - n + 1). Sorting
    # makes the result exactly permutation invariant; anchoring at the minimum
    # makes equal inputs yield exactly 0.
    a = np.sort(defined)
    if a[0] == a[-1]:
        return 0.0
    a = a - a[0]
    weights = 2.0 * np.arange(n) - (n - 1)
    return float((a * weights).sum() / (n * (n - 1) / 2))


def odd_classes(cm: ConfusionMatrix) -> tuple[int | None, ...]:
    """Per true class, the class receiving most of its mispredictions.

    Ties break to the lowest class index; rows without any misprediction
    map to None.
    """
    counts = cm.counts
    n = cm.num_classes
    out: list[int | None] = []
    for i in range(n):
        row = counts[i].copy()
        row[i] = -1
        j = int(np.argmax(row))
        out.append(j if row[j] > 0 else None)
    return tuple(out)


def cobias_single(per_class, odd: tuple[int | None, ...]) -> float:
    """Mean |A_odd(i) - A_i| over classes with a defined odd class."""
    vals = np.asarray(per_class, dtype=np.float64)
    gaps = []
    skipped_undefined = False
    for i, j in enumerate(odd):
        if j is None:
            continue
        if np.isnan(vals[i]) or np.isnan(vals[j]):
            skipped_undefined = True
            continue
        gaps.append(abs(vals[j] - vals[i]))
    if skipped_undefined:
        warnings.warn(
            "pairs involving classes without true samples excluded from the odd-class gap",
            stacklevel=2,
        )
    if not gaps:
        raise ValidationError("no class has a defined odd class")
    return float(sum(gaps) / len(gaps))


def pmi_vector(
    dataset: ProbabilityDataset,
    selection: WeightSelection | None = None,
    scale: WeightScale | None = None,
    mu: float = DEFAULT_MU,
) -> np.ndarray:
    """Smoothed pointwise mutual information between predicted and true class j."""
    cm = confusion(dataset, selection, scale)
    return pmi_from_counts(cm.counts, mu)


def pmi_from_counts(counts: np.ndarray, mu: float) -> np.ndarray:
    if mu < 0:
        raise ValidationError(f"mu must be nonnegative, got {mu}")
    m = counts.sum()
    n = counts.shape[0]
    joint = np.diag(counts).astype(np.float64)
    pred = counts.sum(axis=0).astype(np.float64)
    true = counts.sum(axis=1).astype(np.float64)
    if mu == 0:
        for j in range(n):
            if joint[j] == 0 or pred[j] == 0 or true[j] == 0:
                raise ValidationError(
                    f"class {j}: zero count with mu=0 makes the PMI ratio undefined"
                )
    # f(joint)/(f(pred)*f(true)) with f = (c + mu)/(M + mu*N) rearranges to
    # (joint + mu)(M + mu*N) / ((pred + mu)(true + mu)); at mu=0 this is a
    # ratio of exact integer products, so exact independence gives exactly 0.
    denom = m + mu * n
    ratio = (joint + mu) * denom / ((pred + mu) * (true + mu))
    return np.log(ratio)


@dataclass(frozen=True, eq=False)
class ClassAccuracyReport:
    """Per-class accuracies plus the imbalance summary metrics.

    ``per_class`` uses NaN for classes with no true samples; ``odd_class``
    uses None for rows without mispredictions. ``cobias_single`` is 0.0 when
    no class has an odd class (a perfectly diagonal confusion matrix).
    """

    per_class: np.ndarray
    overall: float
    cobias: float
    cobias_single: float
    odd_class: tuple[int | None, ...]


def class_report(
    dataset: ProbabilityDataset,
    selection: WeightSelection | None = None,
    scale: WeightScale | None = None,
) -> ClassAccuracyReport:
    """Full accuracy/imbalance report for a dataset under a selection."""
    cm = confusion(dataset, selection, scale)
    return report_from_confusion(cm)


def report_from_confusion(cm: ConfusionMatrix) -> ClassAccuracyReport:
    acc = per_class_accuracy(cm)
    odd = odd_classes(cm)
    overall = float(np.diag(cm.counts).sum() / cm.num_samples)
    cb = cobias(acc)
    try:
        cbs = cobias_single(acc, odd)
    except ValidationError:
        cbs = 0.0
    return ClassAccuracyReport(
        per_class=readonly_array(acc),
        overall=overall,
        cobias=cb,
        cobias_single=cbs,
        odd_class=odd,
    )


def report_document(
    dataset: ProbabilityDataset,
    selection: WeightSelection | None = None,
    scale: WeightScale | None = None,
    mu: float = DEFAULT_MU,
) -> dict:
    """Machine-readable evaluation report (confusion, accuracies, PMI).

    The schema is versioned; see the README for field documentation.
    """
    cm = confusion(dataset, selection, scale)
    rep = report_from_confusion(cm)
    pmi = pmi_from_counts(cm.counts, mu)
    return {
        "schema_version": 1,
        "kind": "evaluation_report",
        "num_samples": dataset.num_samples,
        "num_classes": dataset.num_classes,
        "confusion": cm.counts.tolist(),
        "class_totals": cm.class_totals.tolist(),
        "prediction_totals": cm.prediction_totals.tolist(),
        "per_class_accuracy": [None if np.isnan(a) else float(a) for a in rep.per_class],
        "overall_accuracy": rep.overall,
        "cobias": rep.cobias,
        "cobias_single": rep.cobias_single,
        "odd_classes": list(rep.odd_class),
        "pmi": [float(v) for v in pmi],
        "mu": mu,
    }
