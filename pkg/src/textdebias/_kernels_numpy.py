"""Pure-numpy kernels: vectorized CSR scoring and minibatch SGD.

Semantically interchangeable with the numba backend; per-batch floating
point sums may associate differently, so cross-backend results agree to
rounding error rather than bitwise.
"""

from __future__ import annotations

import numpy as np


def csr_margins(
    indptr: np.ndarray,
    indices: np.ndarray,
    data: np.ndarray,
    coef: np.ndarray,
    bias: float,
) -> np.ndarray:
    """Row scores ``bias + x_i . coef`` for a CSR count matrix."""
    with np.errstate(over="ignore", invalid="ignore"):
        contrib = np.concatenate(([0.0], np.cumsum(data * coef[indices])))
        return bias + (contrib[indptr[1:]] - contrib[indptr[:-1]])


def _gather_rows(indptr, rows):
    """Flat positions into indices/data for the given rows, plus the
    row-local id of each position."""
    lens = indptr[rows + 1] - indptr[rows]
    total = int(lens.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64), lens
    offsets = np.cumsum(lens) - lens
    flat = np.arange(total, dtype=np.int64) - np.repeat(offsets, lens) + np.repeat(indptr[rows], lens)
    row_id = np.repeat(np.arange(rows.size, dtype=np.int64), lens)
    return flat, row_id, lens


def sgd_epoch(
    indptr: np.ndarray,
    indices: np.ndarray,
    data: np.ndarray,
    y: np.ndarray,
    w: np.ndarray,
    order: np.ndarray,
    batch_size: int,
    lr: float,
    l2: float,
    coef: np.ndarray,
    bias: float,
) -> float:
    """One epoch of weight-normalized minibatch gradient descent.

    Visits rows in ``order``, in consecutive batches of ``batch_size``.
    The data gradient of each batch is the weighted mean of per-row
    gradients (weights renormalized within the batch); the L2 term decays
    every coefficient each step but never the bias.  ``coef`` is updated
    in place; the new bias is returned.
    """
    n = order.shape[0]
    n_features = coef.shape[0]
    # Divergent settings overflow to inf/nan here; the trainer detects that
    # from the epoch loss, so arithmetic warnings are suppressed.
    with np.errstate(over="ignore", invalid="ignore"):
        for start in range(0, n, batch_size):
            rows = order[start : start + batch_size]
            flat, row_id, _ = _gather_rows(indptr, rows)
            if flat.size:
                cols = indices[flat]
                vals = data[flat]
                z = bias + np.bincount(row_id, weights=vals * coef[cols], minlength=rows.size)
            else:
                z = np.full(rows.size, bias)
            p = 1.0 / (1.0 + np.exp(-z))
            wb = w[rows]
            r = (wb * (p - y[rows])) / wb.sum()
            if flat.size:
                grad = np.bincount(cols, weights=vals * r[row_id], minlength=n_features)
            else:
                grad = np.zeros(n_features)
            coef -= lr * (grad + l2 * coef)
            bias -= lr * r.sum()
    return float(bias)
