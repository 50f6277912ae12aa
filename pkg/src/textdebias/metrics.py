"""Per-identity error-rate gaps, AUC, and term-frequency audits.

The headline numbers are the equality-difference sums

    FPED = sum_z |FPR_z - FPR_overall|
    FNED = sum_z |FNR_z - FNR_overall|

over identity terms z.  A rate with an empty denominator is undefined —
reported as ``None`` and excluded (never silently zero).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import Dataset


@dataclass(frozen=True, eq=False)
class GroupedPredictions:
    """Scores, hard predictions, gold labels, and per-row identity terms.

    ``preds`` is derived as ``score >= threshold``; construct via
    :meth:`from_scores` so the invariant holds.  A row may carry several
    terms (it then counts once in each term's rates) or none.
    """

    scores: np.ndarray
    preds: np.ndarray
    labels: np.ndarray
    term_sets: tuple[tuple[str, ...], ...]
    threshold: float

    @classmethod
    def from_scores(
        cls,
        scores: Sequence[float] | np.ndarray,
        labels: Sequence[int] | np.ndarray,
        term_sets: Sequence[Sequence[str]],
        threshold: float = 0.5,
    ) -> "GroupedPredictions":
        scores = np.asarray(scores, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        if not (len(scores) == len(labels) == len(term_sets)):
            raise ValueError("scores, labels, and term_sets must be parallel")
        if not np.all((labels == 0) | (labels == 1)):
            raise ValueError("labels must be 0/1")
        preds = (scores >= threshold).astype(np.int64)
        return cls(
            scores=scores,
            preds=preds,
            labels=labels,
            term_sets=tuple(tuple(t) for t in term_sets),
            threshold=float(threshold),
        )

    def __len__(self) -> int:
        return len(self.labels)

    def _mask(self, term: str | None) -> np.ndarray:
        if term is None:
            return np.ones(len(self.labels), dtype=bool)
        return np.array([term in ts for ts in self.term_sets], dtype=bool)


def _rates_from_mask(preds: GroupedPredictions, mask: np.ndarray) -> tuple[float | None, float | None]:
    y = preds.labels[mask]
    yhat = preds.preds[mask]
    neg = y == 0
    pos = y == 1
    fpr = float(np.mean(yhat[neg] == 1)) if neg.any() else None
    fnr = float(np.mean(yhat[pos] == 0)) if pos.any() else None
    return fpr, fnr


def rates(preds: GroupedPredictions, term: str | None = None) -> tuple[float | None, float | None]:
    """(FPR, FNR) over rows carrying ``term`` (all rows when None).

    A component is ``None`` when its denominator is empty: no
    gold-negative rows for FPR, no gold-positive rows for FNR.
    """
    return _rates_from_mask(preds, preds._mask(term))


def delta_rates(
    preds: GroupedPredictions, terms: Sequence[str]
) -> dict[str, tuple[float | None, float | None]]:
    """Per-term (FPR_z - FPR_overall, FNR_z - FNR_overall); a component is
    None when either side is undefined."""
    fpr_all, fnr_all = rates(preds)
    out: dict[str, tuple[float | None, float | None]] = {}
    for term in terms:
        fpr_z, fnr_z = rates(preds, term)
        dfpr = None if fpr_z is None or fpr_all is None else fpr_z - fpr_all
        dfnr = None if fnr_z is None or fnr_all is None else fnr_z - fnr_all
        out[term] = (dfpr, dfnr)
    return out


def fped_fned(preds: GroupedPredictions, terms: Sequence[str]) -> tuple[float, float]:
    """Sum of absolute per-term deviations from the overall FPR and FNR.

    Terms whose own rate is undefined contribute 0 (use
    :func:`fairness_report` to see which); undefined *overall* rates are
    an error because every term's deviation would be meaningless.
    """
    fpr_all, fnr_all = rates(preds)
    if fpr_all is None or fnr_all is None:
        missing = "FPR" if fpr_all is None else "FNR"
        raise ValueError(f"overall {missing} is undefined (single-class gold labels)")
    deltas = delta_rates(preds, terms)
    fped = sum(abs(d[0]) for d in deltas.values() if d[0] is not None)
    fned = sum(abs(d[1]) for d in deltas.values() if d[1] is not None)
    return float(fped), float(fned)


def auc(scores: Sequence[float] | np.ndarray, labels: Sequence[int] | np.ndarray) -> float:
    """Area under the ROC curve as the Mann-Whitney rank statistic.

    Equals the probability that a uniformly chosen positive outscores a
    uniformly chosen negative, with ties counting 1/2; invariant under
    strictly increasing transforms of the scores.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if s.shape != y.shape:
        raise ValueError("scores and labels must be parallel")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0/1")
    n_pos = int((y == 1).sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC is undefined when only one class is present")
    _, inverse, counts = np.unique(s, return_inverse=True, return_counts=True)
    ends = np.cumsum(counts)
    avg_rank = ends - (counts - 1) / 2.0
    rank_sum = float(avg_rank[inverse][y == 1].sum())
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


@dataclass(frozen=True)
class TermRates:
    term: str
    fpr: float | None
    fnr: float | None
    dfpr: float | None
    dfnr: float | None
    n: int


@dataclass(frozen=True)
class FairnessReport:
    fped: float
    fned: float
    fpr_overall: float
    fnr_overall: float
    auc_orig: float | None
    auc_iptts: float | None
    per_term: tuple[TermRates, ...]
    warnings: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "fped": self.fped,
            "fned": self.fned,
            "fpr_overall": self.fpr_overall,
            "fnr_overall": self.fnr_overall,
            "auc_orig": self.auc_orig,
            "auc_iptts": self.auc_iptts,
            "per_term": [asdict(t) for t in self.per_term],
            "warnings": list(self.warnings),
        }

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


def fairness_report(
    preds: GroupedPredictions,
    terms: Sequence[str],
    auc_orig: float | None = None,
    auc_iptts: float | None = None,
) -> FairnessReport:
    """Assemble FPED/FNED, per-term rates, and caveats into one report.

    Emits warnings for terms with undefined rates (excluded from the
    sums) and for a trivial predictor — when every hard prediction is
    identical the equality differences are vacuously small.
    """
    warnings: list[str] = []
    fped, fned = fped_fned(preds, terms)
    fpr_all, fnr_all = rates(preds)
    assert fpr_all is not None and fnr_all is not None
    per_term: list[TermRates] = []
    for term in terms:
        mask = preds._mask(term)
        fpr_z, fnr_z = _rates_from_mask(preds, mask)
        if fpr_z is None:
            warnings.append(f"FPR undefined for term {term!r} (no gold-negative rows); excluded from FPED")
        if fnr_z is None:
            warnings.append(f"FNR undefined for term {term!r} (no gold-positive rows); excluded from FNED")
        per_term.append(
            TermRates(
                term=term,
                fpr=fpr_z,
                fnr=fnr_z,
                dfpr=None if fpr_z is None else fpr_z - fpr_all,
                dfnr=None if fnr_z is None else fnr_z - fnr_all,
                n=int(mask.sum()),
            )
        )
    if len(np.unique(preds.preds)) == 1:
        warnings.append(
            f"all hard predictions equal {int(preds.preds[0])} (trivial predictor at "
            f"threshold {preds.threshold:g}); FPED/FNED are vacuously small"
        )
    return FairnessReport(
        fped=fped,
        fned=fned,
        fpr_overall=fpr_all,
        fnr_overall=fnr_all,
        auc_orig=auc_orig,
        auc_iptts=auc_iptts,
        per_term=tuple(per_term),
        warnings=tuple(warnings),
    )


@dataclass(frozen=True)
class FrequencyRow:
    term: str
    freq_positive: float
    freq_overall: float
    delta: float


def frequency_table(
    dataset: Dataset,
    terms: Sequence[str],
    weights: np.ndarray | None = None,
) -> tuple[FrequencyRow, ...]:
    """Percent of (optionally weighted) samples mentioning each term,
    among positives and overall, plus the difference.

    A term over-represented among positive samples (positive ``delta``)
    is a bias amplification risk; weights let you preview how a weighted
    corpus shifts the balance.
    """
    if dataset.signatures is None:
        raise ValueError("dataset has no signatures; run build_signatures first")
    w = np.ones(len(dataset)) if weights is None else np.asarray(weights, dtype=np.float64)
    if w.shape != (len(dataset),):
        raise ValueError("weights must be parallel to the dataset")
    pos = dataset.labels == 1
    denom_all = float(w.sum())
    denom_pos = float(w[pos].sum())
    if denom_pos == 0:
        raise ValueError("no positive samples; frequency among positives is undefined")
    rows = []
    for term in terms:
        has = np.array([term in sig.terms for sig in dataset.signatures], dtype=bool)
        freq_pos = 100.0 * float(w[has & pos].sum()) / denom_pos
        freq_all = 100.0 * float(w[has].sum()) / denom_all
        rows.append(FrequencyRow(term, freq_pos, freq_all, freq_pos - freq_all))
    return tuple(rows)


def write_frequency_csv(rows: Sequence[FrequencyRow], path: str | Path) -> None:
    """Write the audit table with two decimal places per percentage."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["term", "freq_positive", "freq_overall", "delta"])
        for r in rows:
            writer.writerow(
                [r.term, f"{r.freq_positive:.2f}", f"{r.freq_overall:.2f}", f"{r.delta:.2f}"]
            )
