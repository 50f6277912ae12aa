"""Cross-fitted estimation of P(y=1 | signature) and instance weights.

Under label-dependent selection the deployed (fair) label distribution Q
differs from the observed one P; training on samples reweighted by
w = Q(y) / P(y | z) recovers expectations under Q.  P(y | z) is estimated
out-of-fold so a sample never contributes to its own estimate.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import Dataset, IdentitySignature


@dataclass(frozen=True)
class ConditionalEstimate:
    """Laplace-smoothed frequency table for P(y=1 | signature).

    ``table`` maps each signature seen during fitting to ``(p1, n)`` where
    ``p1 = (k + alpha) / (n + 2*alpha)`` with ``k`` positives out of ``n``
    samples.  Unseen signatures fall back to the smoothed global rate.
    """

    table: Mapping[IdentitySignature, tuple[float, int]]
    global_p1: float
    alpha: float

    def p1(self, signature: IdentitySignature) -> float:
        entry = self.table.get(signature)
        return self.global_p1 if entry is None else entry[0]

    def support(self, signature: IdentitySignature) -> int:
        entry = self.table.get(signature)
        return 0 if entry is None else entry[1]


def fit_frequency_estimator(
    signatures: Sequence[IdentitySignature],
    labels: Sequence[int] | np.ndarray,
    alpha: float = 1.0,
) -> ConditionalEstimate:
    """Fit the smoothed per-signature positive-rate table."""
    if len(signatures) != len(labels):
        raise ValueError("signatures and labels must be parallel")
    if len(signatures) == 0:
        raise ValueError("cannot fit an estimator on an empty subset")
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    counts: dict[IdentitySignature, list[int]] = {}
    total_k = 0
    for sig, y in zip(signatures, labels):
        y = int(y)
        if y not in (0, 1):
            raise ValueError(f"labels must be 0/1, got {y!r}")
        n_k = counts.setdefault(sig, [0, 0])
        n_k[0] += 1
        n_k[1] += y
        total_k += y
    table = {
        sig: ((k + alpha) / (n + 2 * alpha), n) for sig, (n, k) in counts.items()
    }
    global_p1 = (total_k + alpha) / (len(signatures) + 2 * alpha)
    return ConditionalEstimate(table=table, global_p1=global_p1, alpha=alpha)


@dataclass(frozen=True)
class WeightConfig:
    """Knobs for the weighting stage.

    ``prior_q1`` is the target positive rate Q(y=1): either the string
    "empirical" (use the observed rate, i.e. assume Q(Y) = P(Y)) or an
    explicit float in (0, 1).  ``clip``, when set, bounds raw weights to
    ``[lo, hi]`` before normalization.
    """

    folds: int = 5
    alpha: float = 1.0
    prior_q1: float | str = "empirical"
    seed: int = 0
    normalize: bool = True
    clip: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        if self.folds < 2:
            raise ValueError(f"folds must be >= 2, got {self.folds}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if isinstance(self.prior_q1, str):
            if self.prior_q1 != "empirical":
                raise ValueError(f"prior_q1 must be 'empirical' or a float, got {self.prior_q1!r}")
        elif not 0.0 < float(self.prior_q1) < 1.0:
            raise ValueError(f"prior_q1 must lie in (0, 1), got {self.prior_q1}")
        if self.clip is not None:
            lo, hi = self.clip
            if not (0 < lo <= hi):
                raise ValueError(f"clip bounds must satisfy 0 < lo <= hi, got {self.clip}")


def assign_folds(labels: np.ndarray, n_folds: int, seed: int) -> np.ndarray:
    """Label-stratified fold assignment.

    Protocol (fixed so runs are reproducible): a single
    ``numpy.random.default_rng(seed)`` generator permutes the positive
    indices first, then the negative indices; each permuted class is dealt
    round-robin into folds ``0..n_folds-1``.
    """
    labels = np.asarray(labels)
    if labels.size < n_folds:
        raise ValueError(f"need at least {n_folds} samples for {n_folds} folds, got {labels.size}")
    rng = np.random.default_rng(seed)
    fold = np.empty(labels.size, dtype=np.int64)
    for value in (1, 0):
        idx = np.flatnonzero(labels == value)
        perm = rng.permutation(idx)
        fold[perm] = np.arange(perm.size, dtype=np.int64) % n_folds
    return fold


def _cross_fit(
    signatures: Sequence[IdentitySignature],
    labels: np.ndarray,
    folds: np.ndarray,
    n_folds: int,
    alpha: float,
) -> np.ndarray:
    p = np.empty(labels.size, dtype=np.float64)
    for k in range(n_folds):
        held = folds == k
        train = ~held
        est = fit_frequency_estimator(
            [signatures[i] for i in np.flatnonzero(train)], labels[train], alpha
        )
        for i in np.flatnonzero(held):
            p[i] = est.p1(signatures[i])
    return p


def cross_fit_p(dataset: Dataset, config: WeightConfig = WeightConfig()) -> np.ndarray:
    """Out-of-fold estimate of P(y=1 | signature) for every sample."""
    if dataset.signatures is None:
        raise ValueError("dataset has no signatures; run build_signatures first")
    folds = assign_folds(dataset.labels, config.folds, config.seed)
    return _cross_fit(dataset.signatures, dataset.labels, folds, config.folds, config.alpha)


def compute_weights(
    labels: np.ndarray,
    p_y_given_z: np.ndarray,
    config: WeightConfig = WeightConfig(),
) -> np.ndarray:
    """Turn per-sample P(y | z) estimates into instance weights.

    w_i = q1 / p_i for positives and (1 - q1) / (1 - p_i) for negatives,
    optionally clipped, then (by default) rescaled to mean 1.
    """
    labels = np.asarray(labels)
    p = np.asarray(p_y_given_z, dtype=np.float64)
    if labels.shape != p.shape:
        raise ValueError("labels and p_y_given_z must be parallel")
    if np.any((p <= 0.0) | (p >= 1.0)):
        bad = int(np.flatnonzero((p <= 0.0) | (p >= 1.0))[0])
        raise ValueError(f"p_y_given_z must lie strictly in (0, 1); index {bad} is {p[bad]}")
    if config.prior_q1 == "empirical":
        q1 = float(np.mean(labels == 1))
        if not 0.0 < q1 < 1.0:
            raise ValueError(
                "empirical positive rate is degenerate "
                f"({q1}); supply an explicit prior_q1 instead"
            )
    else:
        q1 = float(config.prior_q1)
    w = np.where(labels == 1, q1 / p, (1.0 - q1) / (1.0 - p))
    if config.clip is not None:
        w = np.clip(w, config.clip[0], config.clip[1])
    if config.normalize:
        w = w / w.mean()
    return w


@dataclass(frozen=True, eq=False)
class WeightedDataset:
    """A dataset plus parallel per-sample weights.

    ``p_y_given_z`` and ``folds`` record how the weights were produced and
    ride along for audits; both are optional so externally supplied
    weights (or uniform baselines) fit the same type.
    """

    dataset: Dataset
    weights: np.ndarray
    p_y_given_z: np.ndarray | None = None
    folds: np.ndarray | None = None

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (len(self.dataset),):
            raise ValueError(f"expected {len(self.dataset)} weights, got shape {w.shape}")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("weights must be finite and strictly positive")
        object.__setattr__(self, "weights", w)
        for name in ("p_y_given_z", "folds"):
            arr = getattr(self, name)
            if arr is not None and np.asarray(arr).shape != (len(self.dataset),):
                raise ValueError(f"{name} must be parallel to the dataset")

    def __len__(self) -> int:
        return len(self.dataset)

    @classmethod
    def uniform(cls, dataset: Dataset) -> "WeightedDataset":
        return cls(dataset=dataset, weights=np.ones(len(dataset)))


def weigh(dataset: Dataset, config: WeightConfig = WeightConfig()) -> WeightedDataset:
    """Full weighting pipeline: assign folds, cross-fit P(y|z), compute weights."""
    if dataset.signatures is None:
        raise ValueError("dataset has no signatures; run build_signatures first")
    folds = assign_folds(dataset.labels, config.folds, config.seed)
    p = _cross_fit(dataset.signatures, dataset.labels, folds, config.folds, config.alpha)
    w = compute_weights(dataset.labels, p, config)
    return WeightedDataset(dataset=dataset, weights=w, p_y_given_z=p, folds=folds)


def write_weights_csv(weighted: WeightedDataset, path: str | Path) -> None:
    """Persist weights as CSV with header ``id,weight,p_y_given_z,fold``.

    Floats are written with 9 fractional digits so reruns are
    byte-comparable.
    """
    p = weighted.p_y_given_z
    folds = weighted.folds
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "weight", "p_y_given_z", "fold"])
        for i, sample in enumerate(weighted.dataset.samples):
            writer.writerow(
                [
                    sample.id,
                    f"{weighted.weights[i]:.9f}",
                    "" if p is None else f"{p[i]:.9f}",
                    "" if folds is None else int(folds[i]),
                ]
            )


def read_weights_csv(path: str | Path) -> dict[str, float]:
    """Read back ``id -> weight`` from a weights CSV."""
    out: dict[str, float] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"id", "weight"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected columns id,weight")
        for row in reader:
            out[row["id"]] = float(row["weight"])
    return out


def weights_for(dataset: Dataset, mapping: Mapping[str, float]) -> np.ndarray:
    """Align a weight mapping to a dataset's sample order."""
    missing = [s.id for s in dataset.samples if s.id not in mapping]
    if missing:
        raise ValueError(f"weights missing for {len(missing)} ids (first: {missing[0]!r})")
    return np.array([mapping[s.id] for s in dataset.samples], dtype=np.float64)
