"""Numba-jitted kernels: sequential CSR scoring and minibatch SGD.

Same contract as the numpy backend (see that module for the semantics).
No fastmath: float operations keep IEEE ordering so a fixed seed gives
bitwise-identical trajectories run to run.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def csr_margins(indptr, indices, data, coef, bias):
    n = indptr.shape[0] - 1
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        z = bias
        for k in range(indptr[i], indptr[i + 1]):
            z += data[k] * coef[indices[k]]
        out[i] = z
    return out


@njit(cache=True)
def sgd_epoch(indptr, indices, data, y, w, order, batch_size, lr, l2, coef, bias):
    n = order.shape[0]
    n_features = coef.shape[0]
    grad = np.zeros(n_features, dtype=np.float64)
    resid = np.empty(batch_size, dtype=np.float64)
    start = 0
    while start < n:
        stop = min(start + batch_size, n)
        m = stop - start
        wsum = 0.0
        for b in range(m):
            i = order[start + b]
            z = bias
            for k in range(indptr[i], indptr[i + 1]):
                z += data[k] * coef[indices[k]]
            p = 1.0 / (1.0 + np.exp(-z))
            resid[b] = w[i] * (p - y[i])
            wsum += w[i]
        g_bias = 0.0
        for b in range(m):
            i = order[start + b]
            r = resid[b] / wsum
            g_bias += r
            for k in range(indptr[i], indptr[i + 1]):
                grad[indices[k]] += data[k] * r
        for j in range(n_features):
            coef[j] -= lr * (grad[j] + l2 * coef[j])
            grad[j] = 0.0
        bias -= lr * g_bias
        start = stop
    return bias
