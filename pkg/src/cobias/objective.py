"""The correction objective and its incremental evaluation fast path.

For a weight selection xi the objective combines three terms computed from
the reweighted argmax predictions on the optimization set:

    z1  error rate          (1/M) * sum 1{pred != label}
    z2  accuracy imbalance  mean absolute pairwise accuracy difference
    z3  PMI sum             sum_j PMI_j with add-mu smoothing

    total = [z1 on]*z1 + [z2 on]*beta*z2 - [z3 on]*tau*z3

All three terms are pure functions of the integer confusion counts, so the
full and incremental evaluators share one counts-to-value code path and agree
bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ProbabilityDataset, WeightScale, WeightSelection
from .errors import ValidationError
from .metrics import (
    DEFAULT_MU,
    accuracy_from_counts,
    cobias,
    counts_from_predictions,
    pmi_from_counts,
)

DEFAULT_BETA = 2.7
DEFAULT_TAU = 0.2

# The seven term combinations used for ablations, keyed by an ASCII name.
# "+z2" always carries the beta weight and "-z3" the (negated) tau weight.
TERM_COMBINATIONS = {
    "z1": (True, False, False),
    "z2": (False, True, False),
    "z3": (False, False, True),
    "z1+z2": (True, True, False),
    "z1-z3": (True, False, True),
    "z2-z3": (False, True, True),
    "z1+z2-z3": (True, True, True),
}

ABLATION_LABELS = {
    "z1": "z1",
    "z2": "z2",
    "z3": "z3",
    "z1+z2": "z1+βz2",
    "z1-z3": "z1-τz3",
    "z2-z3": "βz2-τz3",
    "z1+z2-z3": "z1+βz2-τz3",
}


@dataclass(frozen=True)
class ObjectiveConfig:
    """Term weights and per-term enable flags."""

    beta: float = DEFAULT_BETA
    tau: float = DEFAULT_TAU
    mu: float = DEFAULT_MU
    use_z1: bool = True
    use_z2: bool = True
    use_z3: bool = True

    def __post_init__(self):
        if self.beta < 0 or self.tau < 0 or self.mu < 0:
            raise ValidationError("beta, tau, and mu must be nonnegative")
        if not (self.use_z1 or self.use_z2 or self.use_z3):
            raise ValidationError("at least one objective term must be enabled")

    @classmethod
    def with_terms(cls, terms: str, beta: float = DEFAULT_BETA, tau: float = DEFAULT_TAU,
                   mu: float = DEFAULT_MU) -> "ObjectiveConfig":
        """Build a config from one of the named term combinations."""
        if terms not in TERM_COMBINATIONS:
            raise ValidationError(
                f"unknown term combination {terms!r}; expected one of "
                f"{', '.join(TERM_COMBINATIONS)}"
            )
        z1, z2, z3 = TERM_COMBINATIONS[terms]
        return cls(beta=beta, tau=tau, mu=mu, use_z1=z1, use_z2=z2, use_z3=z3)

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "tau": self.tau,
            "mu": self.mu,
            "use_z1": self.use_z1,
            "use_z2": self.use_z2,
            "use_z3": self.use_z3,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ObjectiveConfig":
        return cls(
            beta=float(doc["beta"]),
            tau=float(doc["tau"]),
            mu=float(doc["mu"]),
            use_z1=bool(doc["use_z1"]),
            use_z2=bool(doc["use_z2"]),
            use_z3=bool(doc["use_z3"]),
        )


@dataclass(frozen=True)
class ObjectiveValue:
    """Evaluated objective; disabled terms are reported as None."""

    z1_error_rate: float | None
    z2_cobias: float | None
    z3_pmi_sum: float | None
    total: float


def objective_from_counts(counts: np.ndarray, config: ObjectiveConfig) -> ObjectiveValue:
    """Evaluate the objective terms from integer confusion counts."""
    m = int(counts.sum())
    z1 = z2 = z3 = None
    total = 0.0
    if config.use_z1:
        z1 = float((m - int(np.diag(counts).sum())) / m)
        total += z1
    if config.use_z2:
        z2 = cobias(accuracy_from_counts(counts))
        total += config.beta * z2
    if config.use_z3:
        z3 = float(pmi_from_counts(counts, config.mu).sum())
        total -= config.tau * z3
    return ObjectiveValue(z1_error_rate=z1, z2_cobias=z2, z3_pmi_sum=z3, total=total)


def evaluate(
    dataset: ProbabilityDataset,
    selection: WeightSelection,
    scale: WeightScale,
    config: ObjectiveConfig,
) -> ObjectiveValue:
    """Full objective evaluation for one selection."""
    selection.validate(dataset.num_classes, scale)
    coeffs = selection.coefficients(scale)
    preds = np.argmax(dataset.probs * coeffs, axis=1)
    counts = counts_from_predictions(dataset.labels, preds, dataset.num_classes)
    return objective_from_counts(counts, config)


class IncrementalEvaluator:
    """Cached evaluation state for single-class weight changes.

    Caches the weighted score matrix, current argmax predictions, row maxima,
    and confusion counts. A proposal that changes one class's weight only
    re-scores that column and re-runs the argmax on rows whose prediction can
    actually flip: rows currently predicting the changed class, plus rows
    where the new column value reaches their current maximum. Results are
    bit-identical to a full evaluation.

    A single solver run owns the cache; ``propose`` is side-effect free and
    ``apply`` commits a move.
    """

    def __init__(
        self,
        dataset: ProbabilityDataset,
        scale: WeightScale,
        config: ObjectiveConfig,
        selection: WeightSelection,
    ):
        selection.validate(dataset.num_classes, scale)
        self.dataset = dataset
        self.scale = scale
        self.config = config
        self._fingerprint = dataset.fingerprint()
        self._indices = np.asarray(selection.indices, dtype=np.int64)
        self._scores = dataset.probs * scale.values[self._indices - 1]
        self._preds = np.argmax(self._scores, axis=1)
        self._row_max = np.take_along_axis(
            self._scores, self._preds[:, None], axis=1
        )[:, 0]
        self._counts = counts_from_predictions(
            dataset.labels, self._preds, dataset.num_classes
        )
        self._value = objective_from_counts(self._counts, config)
        self._pending = None

    @property
    def selection(self) -> WeightSelection:
        return WeightSelection(tuple(int(i) for i in self._indices))

    @property
    def value(self) -> ObjectiveValue:
        return self._value

    def dataset_fingerprint(self) -> str:
        return self._fingerprint

    def _check_move(self, class_index: int, new_index: int) -> None:
        if not 0 <= class_index < self.dataset.num_classes:
            raise ValidationError(
                f"class index {class_index} outside [0, {self.dataset.num_classes - 1}]"
            )
        if not 1 <= new_index <= self.scale.k_points:
            raise ValidationError(
                f"scale index {new_index} outside [1, {self.scale.k_points}]"
            )

    def propose(self, class_index: int, new_index: int) -> ObjectiveValue:
        """Objective value with one class's weight changed; state untouched."""
        self._check_move(class_index, new_index)
        c = class_index
        if new_index == self._indices[c]:
            self._pending = (c, new_index, None, None, None, self._value)
            return self._value
        new_col = self.dataset.probs[:, c] * self.scale.values[new_index - 1]
        moved = np.flatnonzero((self._preds == c) | (new_col >= self._row_max))
        if moved.size:
            block = self._scores[moved]  # fancy indexing copies
            block[:, c] = new_col[moved]
            new_preds = np.argmax(block, axis=1)
            counts = self._counts.copy()
            labels = self.dataset.labels[moved]
            np.subtract.at(counts, (labels, self._preds[moved]), 1)
            np.add.at(counts, (labels, new_preds), 1)
            new_max = np.take_along_axis(block, new_preds[:, None], axis=1)[:, 0]
        else:
            new_preds = None
            new_max = None
            counts = self._counts
        value = objective_from_counts(counts, self.config)
        self._pending = (c, new_index, new_col, (moved, new_preds, new_max), counts, value)
        return value

    def apply(self, class_index: int, new_index: int) -> ObjectiveValue:
        """Commit a single-class weight change and return the new value."""
        pending = self._pending
        if pending is None or pending[0] != class_index or pending[1] != new_index:
            self.propose(class_index, new_index)
            pending = self._pending
        c, idx, new_col, move, counts, value = pending
        self._pending = None
        self._indices[c] = idx
        if new_col is None:  # no-op move
            return self._value
        self._scores[:, c] = new_col
        moved, new_preds, new_max = move
        if moved.size:
            self._preds[moved] = new_preds
            self._row_max[moved] = new_max
        self._counts = counts
        self._value = value
        return value


def evaluate_incremental(
    state: IncrementalEvaluator, changed_class: int, new_index: int
) -> ObjectiveValue:
    """Objective after changing one class's weight, via the cached state.

    Raises if the state's dataset no longer matches the fingerprint captured
    when the cache was built (stale state).
    """
    if state.dataset.fingerprint() != state.dataset_fingerprint():
        raise ValidationError("stale evaluation state: dataset fingerprint mismatch")
    return state.propose(changed_class, new_index)
