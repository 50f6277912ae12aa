"""Weighted logistic regression over sparse bag-of-words counts.

Training minimizes the weighted mean log loss plus an L2 penalty on the
coefficients (never the bias):

    L = sum_i w_i * nll_i / sum_i w_i  +  0.5 * l2 * ||coef||^2

by minibatch gradient descent with per-batch weight renormalization, a
1/sqrt(epoch) learning-rate schedule, and best-epoch selection on the
weighted validation loss.  The inner loops live in the kernel backends
(see :mod:`textdebias.backend`).
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import backend
from .corpus import tokenize
from .weighting import WeightedDataset

_EPS = 1e-12


class TrainingError(RuntimeError):
    """Optimization produced a non-finite loss."""


@dataclass(frozen=True)
class Vocabulary:
    """Token-to-column mapping, alphabetical over kept tokens."""

    index: Mapping[str, int]
    min_count: int

    @classmethod
    def build(cls, token_seqs: Iterable[Sequence[str]], min_count: int = 2) -> "Vocabulary":
        """Keep tokens occurring at least ``min_count`` times in total,
        assigning columns in sorted token order."""
        if min_count < 1:
            raise ValueError(f"min_count must be >= 1, got {min_count}")
        counts: Counter[str] = Counter()
        for toks in token_seqs:
            counts.update(toks)
        kept = sorted(t for t, c in counts.items() if c >= min_count)
        return cls(index={t: i for i, t in enumerate(kept)}, min_count=min_count)

    @property
    def tokens(self) -> list[str]:
        out = [""] * len(self.index)
        for tok, i in self.index.items():
            out[i] = tok
        return out

    def __len__(self) -> int:
        return len(self.index)

    def __contains__(self, token: str) -> bool:
        return token in self.index


def featurize(tokens: Sequence[str], vocab: Vocabulary) -> tuple[tuple[int, float], ...]:
    """Sparse count vector for one token sequence: ``(column, count)``
    pairs sorted by column; out-of-vocabulary tokens are dropped."""
    counts: Counter[int] = Counter()
    index = vocab.index
    for tok in tokens:
        col = index.get(tok)
        if col is not None:
            counts[col] += 1
    return tuple((col, float(c)) for col, c in sorted(counts.items()))


def featurize_matrix(
    token_seqs: Sequence[Sequence[str]], vocab: Vocabulary
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """CSR arrays (indptr, indices, data) for a whole corpus."""
    indptr = np.zeros(len(token_seqs) + 1, dtype=np.int64)
    cols: list[int] = []
    vals: list[float] = []
    for i, toks in enumerate(token_seqs):
        pairs = featurize(toks, vocab)
        indptr[i + 1] = indptr[i] + len(pairs)
        for col, c in pairs:
            cols.append(col)
            vals.append(c)
    return indptr, np.array(cols, dtype=np.int64), np.array(vals, dtype=np.float64)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 30
    l2: float = 1e-4
    batch_size: int = 64
    seed: int = 0
    min_count: int = 2

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.l2 < 0:
            raise ValueError("l2 must be nonnegative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    learning_rate: float
    train_loss: float
    valid_loss: float


def _sigmoid(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-z))


def _weighted_nll(p: np.ndarray, y: np.ndarray, w: np.ndarray) -> float:
    """Weighted mean negative log likelihood, probabilities clamped to
    [1e-12, 1 - 1e-12].  Sums use ``math.fsum`` so the result does not
    depend on summation order or array layout."""
    p = np.clip(p, _EPS, 1.0 - _EPS)
    nll = -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))
    return math.fsum((w * nll).tolist()) / math.fsum(w.tolist())


@dataclass(frozen=True, eq=False)
class LinearModel:
    """Trained logistic model: vocabulary, coefficients, bias, and the
    training trace."""

    vocab: Vocabulary
    coef: np.ndarray
    bias: float
    config: TrainConfig
    best_epoch: int
    history: tuple[EpochStats, ...]

    def predict_proba_tokens(self, tokens: Sequence[str]) -> float:
        z = self.bias
        for col, c in featurize(tokens, self.vocab):
            z += c * self.coef[col]
        if z >= 0:
            return 1.0 / (1.0 + math.exp(-z))
        e = math.exp(z)
        return e / (1.0 + e)

    def predict_proba(self, text: str) -> float:
        """Probability of the positive class for one raw text."""
        return self.predict_proba_tokens(tokenize(text))

    def score_texts(self, texts: Sequence[str], backend_name: str | None = None) -> np.ndarray:
        """Batch probabilities via the kernel scoring path."""
        token_seqs = [tokenize(t) for t in texts]
        indptr, indices, data = featurize_matrix(token_seqs, self.vocab)
        ker = backend.kernels(backend_name)
        return _sigmoid(ker.csr_margins(indptr, indices, data, self.coef, self.bias))

    def to_dict(self) -> dict:
        return {
            "vocabulary": self.vocab.tokens,
            "coefficients": [round(float(c), 9) for c in self.coef],
            "bias": float(self.bias),
            "config": asdict(self.config),
            "best_epoch": self.best_epoch,
            "history": [asdict(h) for h in self.history],
        }

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def from_dict(cls, obj: dict) -> "LinearModel":
        config = TrainConfig(**obj["config"])
        vocab = Vocabulary(
            index={t: i for i, t in enumerate(obj["vocabulary"])},
            min_count=config.min_count,
        )
        return cls(
            vocab=vocab,
            coef=np.array(obj["coefficients"], dtype=np.float64),
            bias=float(obj["bias"]),
            config=config,
            best_epoch=int(obj["best_epoch"]),
            history=tuple(EpochStats(**h) for h in obj.get("history", [])),
        )

    @classmethod
    def load(cls, path: str | Path) -> "LinearModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def train_weighted(
    train: WeightedDataset,
    valid: WeightedDataset,
    config: TrainConfig = TrainConfig(),
    backend_name: str | None = None,
) -> LinearModel:
    """Fit the model on ``train``, selecting the epoch whose weighted
    validation loss is lowest.

    The vocabulary is built from the training split only.  Epoch ``e``
    uses learning rate ``learning_rate / sqrt(e)`` and a fresh permutation
    of the training rows drawn from ``default_rng(seed)``; with a fixed
    seed and backend the run is bitwise reproducible.
    """
    train_ids = {s.id for s in train.dataset.samples}
    overlap = [s.id for s in valid.dataset.samples if s.id in train_ids]
    if overlap:
        raise ValueError(f"train/valid overlap on {len(overlap)} ids (first: {overlap[0]!r})")

    train_tokens = [tokenize(s.text) for s in train.dataset.samples]
    vocab = Vocabulary.build(train_tokens, config.min_count)
    xtr = featurize_matrix(train_tokens, vocab)
    xva = featurize_matrix([tokenize(s.text) for s in valid.dataset.samples], vocab)
    ytr = train.dataset.labels.astype(np.float64)
    yva = valid.dataset.labels.astype(np.float64)
    wtr = train.weights
    wva = valid.weights

    ker = backend.kernels(backend_name)
    coef = np.zeros(len(vocab), dtype=np.float64)
    bias = 0.0
    rng = np.random.default_rng(config.seed)
    best_loss = math.inf
    best: tuple[np.ndarray, float, int] = (coef.copy(), bias, 0)
    history: list[EpochStats] = []

    for epoch in range(1, config.epochs + 1):
        lr = config.learning_rate / math.sqrt(epoch)
        order = rng.permutation(len(train)).astype(np.int64)
        bias = ker.sgd_epoch(
            *xtr, ytr, wtr, order, config.batch_size, lr, config.l2, coef, bias
        )
        train_loss = _weighted_nll(_sigmoid(ker.csr_margins(*xtr, coef, bias)), ytr, wtr)
        valid_loss = _weighted_nll(_sigmoid(ker.csr_margins(*xva, coef, bias)), yva, wva)
        if not (math.isfinite(train_loss) and math.isfinite(valid_loss)):
            raise TrainingError(
                f"non-finite loss at epoch {epoch} (learning rate {lr:g}); "
                "lower the learning rate"
            )
        history.append(EpochStats(epoch, lr, train_loss, valid_loss))
        if valid_loss < best_loss:
            best_loss = valid_loss
            best = (coef.copy(), bias, epoch)

    return LinearModel(
        vocab=vocab,
        coef=best[0],
        bias=best[1],
        config=config,
        best_epoch=best[2],
        history=tuple(history),
    )


def weighted_log_loss(
    model: LinearModel, data: WeightedDataset, backend_name: str | None = None
) -> float:
    """Weighted mean log loss of ``model`` on a weighted dataset."""
    p = model.score_texts(data.dataset.texts, backend_name)
    return _weighted_nll(p, data.dataset.labels.astype(np.float64), data.weights)


def logistic_loss_grad(
    indptr: np.ndarray,
    indices: np.ndarray,
    data: np.ndarray,
    y: np.ndarray,
    w: np.ndarray,
    coef: np.ndarray,
    bias: float,
    l2: float = 0.0,
) -> tuple[float, np.ndarray, float]:
    """Full-batch objective and exact gradient at ``(coef, bias)``.

    Reference implementation used for gradient checking; returns
    ``(loss, d_coef, d_bias)`` for the same objective the SGD kernels
    descend.
    """
    contrib = np.concatenate(([0.0], np.cumsum(data * coef[indices])))
    z = bias + (contrib[indptr[1:]] - contrib[indptr[:-1]])
    p = _sigmoid(z)
    wsum = float(w.sum())
    loss = _weighted_nll(p, y, w) + 0.5 * l2 * float(coef @ coef)
    r = w * (p - y) / wsum
    row_id = np.repeat(np.arange(len(y)), np.diff(indptr))
    d_coef = np.bincount(indices, weights=data * r[row_id], minlength=coef.size) + l2 * coef
    return loss, d_coef, float(r.sum())
