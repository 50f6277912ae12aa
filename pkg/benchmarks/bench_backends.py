#!/usr/bin/env python3
"""Benchmark the jitted kernels against the pure-numpy fallback.

Builds a synthetic corpus, featurizes it once, then times the two hot
kernels (CSR scoring and one SGD epoch) under each backend.  Warm-up
calls run first so numba's compilation cost is not counted.  Also checks
that the backends agree numerically.

Usage:
    python3 benchmarks/bench_backends.py [--rows N] [--epochs N] [--repeats N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from textdebias.backend import kernels
from textdebias.classifier import TrainConfig, Vocabulary, featurize_matrix, train_weighted
from textdebias.corpus import tokenize
from textdebias.synthbias import biased_text_world, content_renderer, sample_biased
from textdebias.weighting import WeightedDataset


def _available_backends() -> list[str]:
    names = ["numpy"]
    try:
        import numba  # noqa: F401
    except ImportError:
        print("numba not importable; benchmarking the numpy backend only")
    else:
        names.append("numba")
    return names


def _best_of(repeats: int, fn) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rows", type=int, default=40_000)
    parser.add_argument("--epochs", type=int, default=10)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--batch-size", type=int, default=64)
    args = parser.parse_args()

    world = biased_text_world()
    corpus = sample_biased(world, args.rows, seed=0, renderer=content_renderer)
    seqs = [tokenize(s.text) for s in corpus.dataset.samples]
    vocab = Vocabulary.build(seqs, min_count=2)
    indptr, indices, data = featurize_matrix(seqs, vocab)
    y = corpus.y.astype(np.float64)
    w = np.ones(args.rows)
    order = np.random.default_rng(0).permutation(args.rows)
    print(
        f"{args.rows} rows, {len(vocab)} features, "
        f"{indices.size} nonzeros, batch size {args.batch_size}"
    )

    timings: dict[str, dict[str, float]] = {}
    results: dict[str, tuple[np.ndarray, np.ndarray, float]] = {}
    for name in _available_backends():
        ker = kernels(name)
        rng = np.random.default_rng(7)
        coef0 = rng.normal(scale=0.01, size=len(vocab))

        # warm-up: first call compiles (numba) or touches caches (numpy)
        ker.csr_margins(indptr, indices, data, coef0, 0.0)
        ker.sgd_epoch(
            indptr, indices, data, y, w, order[:256], args.batch_size, 0.1, 1e-4, coef0.copy(), 0.0
        )

        t_margins = _best_of(
            args.repeats, lambda: ker.csr_margins(indptr, indices, data, coef0, 0.0)
        )

        coef = coef0.copy()
        bias = 0.0

        def run_epochs():
            nonlocal coef, bias
            coef = coef0.copy()
            bias = 0.0
            for _ in range(args.epochs):
                bias = ker.sgd_epoch(
                    indptr, indices, data, y, w, order,
                    args.batch_size, 0.1, 1e-4, coef, bias,
                )

        t_epochs = _best_of(args.repeats, run_epochs)
        timings[name] = {"margins": t_margins, "epoch": t_epochs / args.epochs}
        results[name] = (
            ker.csr_margins(indptr, indices, data, coef0, 0.0),
            coef,
            bias,
        )

    print(f"\n{'backend':<8} {'csr_margins':>14} {'sgd_epoch':>14}")
    for name, t in timings.items():
        print(f"{name:<8} {t['margins'] * 1e3:>11.2f} ms {t['epoch'] * 1e3:>11.2f} ms")
    if "numba" in timings:
        for key in ("margins", "epoch"):
            ratio = timings["numpy"][key] / timings["numba"][key]
            print(f"numba speedup, {key}: {ratio:.1f}x")

        m_np, c_np, b_np = results["numpy"]
        m_nb, c_nb, b_nb = results["numba"]
        np.testing.assert_allclose(m_np, m_nb, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(c_np, c_nb, rtol=1e-7, atol=1e-10)
        np.testing.assert_allclose(b_np, b_nb, rtol=1e-7)
        print("agreement: margins within 1e-12, trained parameters within 1e-7")

        # end-to-end sanity: full training path under both backends
        ds = corpus.dataset
        cut = args.rows * 4 // 5
        tr = WeightedDataset.uniform(type(ds)(ds.samples[:cut], ds.signatures[:cut]))
        va = WeightedDataset.uniform(type(ds)(ds.samples[cut:], ds.signatures[cut:]))
        cfg = TrainConfig(epochs=3)
        model_nb = train_weighted(tr, va, cfg, backend_name="numba")
        t_nb = _best_of(2, lambda: train_weighted(tr, va, cfg, backend_name="numba"))
        model_np = train_weighted(tr, va, cfg, backend_name="numpy")
        t_np = _best_of(2, lambda: train_weighted(tr, va, cfg, backend_name="numpy"))
        np.testing.assert_allclose(model_nb.coef, model_np.coef, rtol=1e-7, atol=1e-10)
        print(
            f"train_weighted (3 epochs): numba {t_nb:.2f}s, numpy {t_np:.2f}s "
            f"({t_np / t_nb:.1f}x); models agree within 1e-7"
        )


if __name__ == "__main__":
    main()
