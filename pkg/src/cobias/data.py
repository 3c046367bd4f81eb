"""Domain types and dataset I/O.

A probability dataset is a matrix of per-sample class probabilities plus
integer ground-truth labels. Correction weights live on a discrete K-point
scale; a selection assigns one scale index to each class. Learned selections
are persisted as versioned JSON artifacts.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import TYPE_CHECKING, Iterable

import numpy as np

from .errors import ArtifactError, DatasetFormatError, ValidationError

if TYPE_CHECKING:  # avoids a circular import; objective.py depends on this module
    from .objective import ObjectiveConfig

PROB_SUM_TOL = 1e-6
ARTIFACT_SCHEMA_VERSION = 1


def readonly_array(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class ProbabilityDataset:
    """Immutable matrix of class probabilities with ground-truth labels.

    ``probs`` has shape (M, N) with rows summing to 1 within ``PROB_SUM_TOL``;
    ``labels`` has shape (M,) with values in [0, N-1]. Arrays are read-only.
    """

    probs: np.ndarray
    labels: np.ndarray

    @property
    def num_samples(self) -> int:
        return self.probs.shape[0]

    @property
    def num_classes(self) -> int:
        return self.probs.shape[1]

    @classmethod
    def from_arrays(cls, probs, labels, renormalize: bool = False) -> "ProbabilityDataset":
        # copy=True keeps the dataset detached from caller-owned buffers
        probs = np.array(probs, dtype=np.float64, copy=True)
        labels = np.array(labels, dtype=np.int64, copy=True)
        if probs.ndim != 2:
            raise ValidationError(f"probs must be 2-dimensional, got shape {probs.shape}")
        m, n = probs.shape
        if m < 1:
            raise ValidationError("dataset must contain at least one sample")
        if n < 2:
            raise ValidationError(f"dataset must have at least 2 classes, got {n}")
        if labels.shape != (m,):
            raise ValidationError(
                f"labels shape {labels.shape} does not match {m} samples"
            )
        if not np.all(np.isfinite(probs)):
            bad = int(np.flatnonzero(~np.isfinite(probs).all(axis=1))[0])
            raise ValidationError(f"non-finite probability in sample {bad}")
        if np.any(probs < 0):
            bad = int(np.flatnonzero((probs < 0).any(axis=1))[0])
            raise ValidationError(f"negative probability in sample {bad}")
        if renormalize:
            sums = probs.sum(axis=1)
            zero = np.flatnonzero(sums == 0.0)
            if zero.size:
                raise ValidationError(f"zero-sum probability row in sample {int(zero[0])}")
            probs = probs / sums[:, None]
        sums = probs.sum(axis=1)
        off = np.abs(sums - 1.0)
        if np.any(off > PROB_SUM_TOL):
            bad = int(np.argmax(off))
            raise ValidationError(
                f"sample {bad}: probabilities sum to {sums[bad]:.8f}, expected 1 "
                f"within {PROB_SUM_TOL} (pass renormalize=True to rescale rows)"
            )
        if np.any((labels < 0) | (labels >= n)):
            bad = int(np.flatnonzero((labels < 0) | (labels >= n))[0])
            raise ValidationError(
                f"sample {bad}: label {int(labels[bad])} outside [0, {n - 1}]"
            )
        return cls(probs=readonly_array(probs), labels=readonly_array(labels))

    def fingerprint(self) -> str:
        """Content hash of the canonical serialized dataset (sha256 hex)."""
        h = hashlib.sha256()
        h.update(b"cobias-dataset-v1")
        h.update(self.num_classes.to_bytes(4, "little"))
        h.update(np.ascontiguousarray(self.labels, dtype="<i8").tobytes())
        h.update(np.ascontiguousarray(self.probs, dtype="<f8").tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class WeightScale:
    """Discrete correction-weight scale with K evenly spaced points.

    Point k (1-based) carries the value k/K, so the scale always ends at 1.0
    and a K=1 scale degenerates to the identity weight.
    """

    k_points: int

    def __post_init__(self):
        if self.k_points < 1:
            raise ValidationError(f"k_points must be >= 1, got {self.k_points}")

    @cached_property
    def values(self) -> np.ndarray:
        return readonly_array((np.arange(1, self.k_points + 1, dtype=np.float64)) / self.k_points)


@dataclass(frozen=True)
class WeightSelection:
    """Per-class scale indices (1-based), the decision variables of the program."""

    indices: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))

    @classmethod
    def identity(cls, num_classes: int, scale: WeightScale) -> "WeightSelection":
        """Selection mapping every class to the top scale point (weight 1.0)."""
        return cls(indices=(scale.k_points,) * num_classes)

    def validate(self, num_classes: int, scale: WeightScale) -> None:
        if len(self.indices) != num_classes:
            raise ValidationError(
                f"selection has {len(self.indices)} entries, expected {num_classes}"
            )
        for n, idx in enumerate(self.indices):
            if not 1 <= idx <= scale.k_points:
                raise ValidationError(
                    f"class {n}: index {idx} outside [1, {scale.k_points}]"
                )

    def coefficients(self, scale: WeightScale) -> np.ndarray:
        return scale.values[np.asarray(self.indices, dtype=np.int64) - 1]


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a synthetic biased dataset.

    ``confusion_bias`` is a row-stochastic matrix: row i is the mean
    probability mass a true-class-i sample places on each class.
    ``concentration`` is the total Dirichlet pseudo-count mass per draw;
    larger values concentrate samples around the row mean.
    """

    num_classes: int
    samples_per_class: tuple[int, ...]
    confusion_bias: tuple[tuple[float, ...], ...]
    concentration: float
    seed: int

    def __post_init__(self):
        n = self.num_classes
        if n < 2:
            raise ValidationError("num_classes must be >= 2")
        if len(self.samples_per_class) != n:
            raise ValidationError("samples_per_class length must equal num_classes")
        if any(c < 1 for c in self.samples_per_class):
            raise ValidationError("samples_per_class entries must be positive")
        bias = np.asarray(self.confusion_bias, dtype=np.float64)
        if bias.shape != (n, n):
            raise ValidationError(f"confusion_bias must be {n}x{n}, got {bias.shape}")
        if np.any(bias < 0):
            raise ValidationError("confusion_bias entries must be nonnegative")
        if np.any(np.abs(bias.sum(axis=1) - 1.0) > 1e-9):
            raise ValidationError("confusion_bias rows must sum to 1 within 1e-9")
        if not self.concentration > 0:
            raise ValidationError("concentration must be positive")

    @classmethod
    def from_dict(cls, doc: dict) -> "SyntheticSpec":
        try:
            return cls(
                num_classes=int(doc["num_classes"]),
                samples_per_class=tuple(int(c) for c in doc["samples_per_class"]),
                confusion_bias=tuple(tuple(float(x) for x in row) for row in doc["confusion_bias"]),
                concentration=float(doc["concentration"]),
                seed=int(doc["seed"]),
            )
        except KeyError as exc:
            raise ValidationError(f"synthetic spec missing field {exc}") from exc


def generate_synthetic(spec: SyntheticSpec) -> ProbabilityDataset:
    """Draw a dataset from a synthetic spec; deterministic for a fixed seed.

    Each true-class-i sample's probability vector is a Dirichlet draw with
    mean equal to ``confusion_bias`` row i and pseudo-count mass equal to
    ``concentration``. Zero-mass classes stay exactly zero.
    """
    rng = np.random.default_rng(spec.seed)
    bias = np.asarray(spec.confusion_bias, dtype=np.float64)
    blocks = []
    labels = []
    for i, count in enumerate(spec.samples_per_class):
        row = bias[i]
        support = np.flatnonzero(row > 0)
        block = np.zeros((count, spec.num_classes))
        if support.size == 1:
            block[:, support[0]] = 1.0
        else:
            alpha = spec.concentration * row[support]
            block[:, support] = rng.dirichlet(alpha, size=count)
        blocks.append(block)
        labels.append(np.full(count, i, dtype=np.int64))
    return ProbabilityDataset.from_arrays(np.vstack(blocks), np.concatenate(labels))


# ---------------------------------------------------------------------------
# Dataset file I/O
# ---------------------------------------------------------------------------

DATASET_FORMATS = ("jsonl", "csv")


def _parse_jsonl(lines: Iterable[str]) -> tuple[list[list[float]], list[int]]:
    rows, labels = [], []
    width = None
    for lineno, line in enumerate(lines):
        if not line.strip():
            # blank lines are rejected so that sample index == line index
            raise DatasetFormatError("blank line", line=lineno)
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetFormatError(f"invalid JSON ({exc.msg})", line=lineno) from exc
        if not isinstance(obj, dict) or "probs" not in obj or "label" not in obj:
            raise DatasetFormatError('expected object with "probs" and "label"', line=lineno)
        probs = obj["probs"]
        if not isinstance(probs, list) or not all(
            isinstance(p, (int, float)) and not isinstance(p, bool) for p in probs
        ):
            raise DatasetFormatError('"probs" must be a list of numbers', line=lineno)
        if width is None:
            width = len(probs)
            if width < 2:
                raise DatasetFormatError(f"need at least 2 classes, got {width}", line=lineno)
        elif len(probs) != width:
            raise DatasetFormatError(
                f"expected {width} probabilities, got {len(probs)}", line=lineno
            )
        label = obj["label"]
        if isinstance(label, bool) or not isinstance(label, int):
            raise DatasetFormatError('"label" must be an integer', line=lineno)
        rows.append([float(p) for p in probs])
        labels.append(label)
    return rows, labels


def _parse_number(token: str, lineno: int, what: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise DatasetFormatError(f"non-numeric {what} {token!r}", line=lineno) from None


def _parse_csv(lines: Iterable[str]) -> tuple[list[list[float]], list[int]]:
    rows, labels = [], []
    width = None
    for lineno, record in enumerate(csv.reader(lines)):
        if not record or (len(record) == 1 and not record[0].strip()):
            raise DatasetFormatError("blank line", line=lineno)
        if width is None:
            width = len(record) - 1
            if width < 2:
                raise DatasetFormatError(
                    f"need at least 2 probability columns, got {width}", line=lineno
                )
        elif len(record) - 1 != width:
            raise DatasetFormatError(
                f"expected {width + 1} columns, got {len(record)}", line=lineno
            )
        probs = [_parse_number(tok, lineno, "probability") for tok in record[:-1]]
        raw_label = _parse_number(record[-1], lineno, "label")
        if raw_label != int(raw_label):
            raise DatasetFormatError(f"label {record[-1]!r} is not an integer", line=lineno)
        rows.append(probs)
        labels.append(int(raw_label))
    return rows, labels


def load_dataset(path, fmt: str, renormalize: bool = False) -> ProbabilityDataset:
    """Load and validate a dataset file.

    ``fmt`` is "jsonl" (one ``{"probs": [...], "label": i}`` object per line)
    or "csv" (headerless, N probability columns then the label column). The
    class count is inferred from the first row and enforced thereafter.
    With ``renormalize`` each row is divided by its sum before validation.
    """
    if fmt not in DATASET_FORMATS:
        raise ValidationError(f"unknown dataset format {fmt!r}, expected one of {DATASET_FORMATS}")
    text = Path(path).read_text()
    lines = text.splitlines()
    rows, labels = _parse_jsonl(lines) if fmt == "jsonl" else _parse_csv(lines)
    if not rows:
        raise DatasetFormatError(f"no samples found in {path}")
    try:
        return ProbabilityDataset.from_arrays(rows, labels, renormalize=renormalize)
    except ValidationError as exc:
        # sample index == 0-based line index (parsers reject blank lines)
        found = re.search(r"sample (\d+)", str(exc))
        line = int(found.group(1)) if found else None
        raise DatasetFormatError(str(exc), line=line) from exc


def save_dataset(dataset: ProbabilityDataset, path, fmt: str) -> None:
    """Write a dataset in one of the loadable formats."""
    if fmt not in DATASET_FORMATS:
        raise ValidationError(f"unknown dataset format {fmt!r}, expected one of {DATASET_FORMATS}")
    path = Path(path)
    with path.open("w", newline="") as fh:
        if fmt == "jsonl":
            for probs, label in zip(dataset.probs, dataset.labels):
                fh.write(json.dumps({"probs": [float(p) for p in probs], "label": int(label)}))
                fh.write("\n")
        else:
            writer = csv.writer(fh)
            for probs, label in zip(dataset.probs, dataset.labels):
                writer.writerow([repr(float(p)) for p in probs] + [int(label)])


# ---------------------------------------------------------------------------
# Reweighting artifacts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunProvenance:
    """Metadata tying an artifact to the run that produced it."""

    seed: int
    schedule: dict
    dataset_fingerprint: str
    created_at: str | None = None


@dataclass(frozen=True, eq=False)
class ReweightArtifact:
    """A learned per-class reweighting: scale, selection, and run metadata.

    ``coefficients[n]`` always equals ``scale.values[selection.indices[n]-1]``
    and survives a save/load round trip bit-for-bit.
    """

    scale: WeightScale
    selection: WeightSelection
    objective_config: "ObjectiveConfig"
    final_objective: float
    provenance: RunProvenance
    coefficients: np.ndarray = field(init=False)

    def __post_init__(self):
        self.selection.validate(len(self.selection.indices), self.scale)
        object.__setattr__(
            self, "coefficients", readonly_array(self.selection.coefficients(self.scale))
        )

    @property
    def num_classes(self) -> int:
        return len(self.selection.indices)


def save_artifact(artifact: ReweightArtifact, path) -> None:
    """Persist an artifact as a self-describing versioned JSON document."""
    doc = {
        "schema_version": ARTIFACT_SCHEMA_VERSION,
        "kind": "reweight_artifact",
        "k_points": artifact.scale.k_points,
        "indices": list(artifact.selection.indices),
        "coefficients": [float(c) for c in artifact.coefficients],
        "objective_config": artifact.objective_config.to_dict(),
        "final_objective": float(artifact.final_objective),
        "provenance": {
            "seed": artifact.provenance.seed,
            "schedule": artifact.provenance.schedule,
            "dataset_fingerprint": artifact.provenance.dataset_fingerprint,
            "created_at": artifact.provenance.created_at,
        },
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_artifact(path) -> ReweightArtifact:
    """Load an artifact, rejecting version or schema violations outright."""
    from .objective import ObjectiveConfig

    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"artifact file is not valid JSON: {exc.msg}") from exc
    if not isinstance(doc, dict) or doc.get("kind") != "reweight_artifact":
        raise ArtifactError("not a reweight-artifact document")
    version = doc.get("schema_version")
    if version != ARTIFACT_SCHEMA_VERSION:
        raise ArtifactError(
            f"unsupported artifact schema version {version!r}, "
            f"expected {ARTIFACT_SCHEMA_VERSION}"
        )
    try:
        scale = WeightScale(int(doc["k_points"]))
        selection = WeightSelection(tuple(int(i) for i in doc["indices"]))
        config = ObjectiveConfig.from_dict(doc["objective_config"])
        final_objective = float(doc["final_objective"])
        prov = doc["provenance"]
        fingerprint = prov["dataset_fingerprint"]
        provenance = RunProvenance(
            seed=int(prov["seed"]),
            schedule=dict(prov["schedule"]),
            dataset_fingerprint=fingerprint,
            created_at=prov.get("created_at"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ArtifactError(f"artifact schema violation: {exc!r}") from exc
    if not isinstance(fingerprint, str) or not fingerprint:
        raise ArtifactError("artifact schema violation: dataset fingerprint absent")
    artifact = ReweightArtifact(
        scale=scale,
        selection=selection,
        objective_config=config,
        final_objective=final_objective,
        provenance=provenance,
    )
    stored = [float(c) for c in doc["coefficients"]]
    if len(stored) != artifact.num_classes or any(
        s != c for s, c in zip(stored, artifact.coefficients)
    ):
        raise ArtifactError(
            "artifact schema violation: stored coefficients do not match the "
            "scale values selected by the stored indices"
        )
    if not math.isfinite(final_objective):
        raise ArtifactError("artifact schema violation: non-finite final objective")
    return artifact
