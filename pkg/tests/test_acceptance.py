"""Acceptance gate: ten end-to-end guarantees, one test (and one printed
pass/fail line) each.

Monte Carlo criteria use seeds frozen after checking their margins, so a
red run signals a real regression rather than sampling luck.  The jitted
kernels are warmed up once before any timed section; compilation time is
deliberately excluded from the runtime budgets.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from textdebias.classifier import (
    TrainConfig,
    Vocabulary,
    featurize_matrix,
    logistic_loss_grad,
    train_weighted,
)
from textdebias.corpus import Dataset, IdentitySignature, Sample
from textdebias.iptts import (
    DEFAULT_SLOT_LEXICON,
    DEFAULT_TEMPLATES,
    SlotLexicon,
    generate,
    verify_balance,
)
from textdebias.metrics import GroupedPredictions, auc, fped_fned, frequency_table
from textdebias.synthbias import (
    biased_distribution,
    biased_text_world,
    check_posterior,
    check_theorem1,
    check_theorem2,
    content_renderer,
    exact_weights,
    perturb_joint,
    random_classifier,
    random_eo_joint,
    random_world,
    reference_world,
    sample_biased,
)
from textdebias.weighting import WeightConfig, WeightedDataset, weigh

# frozen Monte Carlo seeds (margins checked at freeze time: criterion 2
# gaps <= 1.1e-3 vs 0.01; criterion 5 cell deviations <= 0.015 vs 0.05)
MC_LOSS_SEEDS = (1, 2, 3)
RECOVERY_SEEDS = (2, 3, 5)
E2E_SEEDS = (1, 2, 3, 4, 5)
E2E_SKEW = {"groupa": (1.0, 0.05), "groupb": (0.35, 1.0)}


def _report(capsys, cid: str, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"acceptance {cid}: {'PASS' if ok else 'FAIL'} — {detail}")


@pytest.fixture(scope="module", autouse=True)
def jit_warmup():
    """Touch both kernels once so runtime budgets below exclude JIT
    compilation (first-call cost, cached on disk afterwards)."""
    texts = ["nice quiet day friend", "awful nasty mess story"] * 10
    labels = [0, 1] * 10
    train = WeightedDataset.uniform(
        Dataset(tuple(Sample(f"w{i}", t, y) for i, (t, y) in enumerate(zip(texts, labels))))
    )
    vtexts = ["nice walk", "awful story"]
    valid = WeightedDataset.uniform(
        Dataset(tuple(Sample(f"v{i}", t, y) for i, (t, y) in enumerate(zip(vtexts, [0, 1]))))
    )
    train_weighted(train, valid, TrainConfig(min_count=1, epochs=1))


def test_01_reweighted_loss_matches_deployed_exactly(capsys):
    """Exact expectation transfer on 100 random worlds x classifiers x
    two losses, support up to 200 triples, gap < 1e-10, under 10s."""
    rng = np.random.default_rng(1001)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        world = random_world(rng, n_z=int(rng.integers(2, 9)), n_x=int(rng.integers(1, 13)))
        assert world.n <= 200
        clf = random_classifier(rng, world)
        for loss in ("zero_one", "logistic"):
            report = check_theorem2(world, clf, loss, exact_tol=1e-10)
            worst = max(worst, report.max_gap)
            if not report.passed:
                break
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-10 and elapsed < 10.0
    _report(capsys, "01 exact loss transfer", ok,
            f"max gap {worst:.2e} over 100 worlds x 2 losses in {elapsed:.2f}s")
    assert worst < 1e-10
    assert elapsed < 10.0


def test_02_sampled_reweighted_loss_converges(capsys):
    """Weighted empirical loss at n=100,000 within 0.01 of the exact
    deployed loss (0.5 for the always-positive classifier under 0-1
    loss) on each of three seeds, under 30s."""
    t0 = time.perf_counter()
    report = check_theorem2(
        reference_world(), lambda x, z: 1.0, "zero_one",
        n_samples=100_000, seeds=MC_LOSS_SEEDS, mc_tol=0.01,
    )
    elapsed = time.perf_counter() - t0
    exact_pair, *sampled = report.pairs
    gaps = [p.gap for p in sampled]
    ok = exact_pair.right == 0.5 and all(g < 0.01 for g in gaps) and elapsed < 30.0
    _report(capsys, "02 sampled loss transfer", ok,
            f"gaps {[f'{g:.4f}' for g in gaps]} at n=100000, seeds {MC_LOSS_SEEDS}, {elapsed:.2f}s")
    assert exact_pair.right == 0.5
    assert all(g < 0.01 for g in gaps)
    assert elapsed < 30.0


def test_03_equalized_odds_implies_both_parities(capsys):
    """100 random joints with a z-independent label and equalized odds:
    both parities hold below 1e-9; perturbing any one cell by 1e-3
    breaks at least one parity in every mutant."""
    rng = np.random.default_rng(1003)
    worst = 0.0
    surviving_mutants = 0
    for _ in range(100):
        joint = random_eo_joint(rng, n_z=int(rng.integers(2, 6)))
        report = check_theorem1(joint)
        assert report.passed, report.premise_failures
        worst = max(worst, report.max_gap)
        cell = (int(rng.integers(2)), int(rng.integers(2)), int(rng.integers(len(joint.z_values))))
        mutant = perturb_joint(joint, cell, 1e-3)
        if check_theorem1(mutant, enforce_premises=False).passed:
            surviving_mutants += 1
    ok = worst < 1e-9 and surviving_mutants == 0
    _report(capsys, "03 parity collapse", ok,
            f"max parity gap {worst:.2e} over 100 joints; {surviving_mutants}/100 mutants survived")
    assert worst < 1e-9
    assert surviving_mutants == 0


def test_04_weighted_posterior_identities(capsys):
    """50 worlds whose observed identity marginal differs from the
    deployed one: reweighting restores the label posterior exactly and
    rescales the content marginal by exactly P(z)/Q(z), gaps < 1e-10."""
    rng = np.random.default_rng(1004)
    worst = 0.0
    checked = 0
    while checked < 50:
        world = random_world(rng, selection_uniform=False)
        p = biased_distribution(world)
        pz: dict = {}
        qz: dict = {}
        for i, z in enumerate(world.zs):
            pz[z] = pz.get(z, 0.0) + p[i]
            qz[z] = qz.get(z, 0.0) + world.q[i]
        if max(abs(pz[z] - qz[z]) for z in qz) < 1e-4:
            continue  # selection barely moved the marginal; not a test of anything
        report = check_posterior(world, tol=1e-10)
        assert report.passed, report.to_dict()
        worst = max(worst, report.max_gap)
        checked += 1
    ok = worst < 1e-10
    _report(capsys, "04 posterior identities", ok,
            f"max gap {worst:.2e} over {checked} marginal-shifted worlds")
    assert ok


def test_05_estimated_weights_recover_exact_weights(capsys):
    """Cross-fitted weights on 100,000 biased samples land within 0.05
    of the closed-form weights in every (label, identity) cell with
    probability >= 0.01, on three seeds."""
    world = reference_world()
    exact = exact_weights(world)
    p = biased_distribution(world)
    cell_mass: dict = {}
    for i, (z, y) in enumerate(zip(world.zs, world.ys)):
        cell_mass[(y, z)] = cell_mass.get((y, z), 0.0) + p[i]
    worst = 0.0
    for seed in RECOVERY_SEEDS:
        corpus = sample_biased(world, 100_000, seed)
        config = WeightConfig(folds=5, alpha=1.0, prior_q1=world.q_y1, normalize=False, seed=seed)
        estimated = weigh(corpus.dataset, config)
        z_arr = np.array(corpus.z)
        for (y, z), w_true in exact.items():
            if cell_mass[(y, z)] < 0.01:
                continue
            mask = (corpus.y == y) & (z_arr == z)
            worst = max(worst, abs(float(estimated.weights[mask].mean()) - w_true))
    ok = worst < 0.05
    _report(capsys, "05 weight recovery", ok,
            f"max cell deviation {worst:.4f} at n=100000, seeds {RECOVERY_SEEDS}")
    assert ok


# -- end-to-end pipeline shared by criteria 06 and 08 ----------------------


def _suite_for(world):
    return generate(
        DEFAULT_TEMPLATES,
        SlotLexicon(
            identity_terms=world.identity_terms(),
            adj_offensive=DEFAULT_SLOT_LEXICON.adj_offensive,
            adj_inoffensive=DEFAULT_SLOT_LEXICON.adj_inoffensive,
            verb_offensive=DEFAULT_SLOT_LEXICON.verb_offensive,
            verb_inoffensive=DEFAULT_SLOT_LEXICON.verb_inoffensive,
            suffixes=(
                "the morning river again.",
                "a quiet garden window.",
                "walking to the market.",
            ),
        ),
    )


def _eval_on_suite(model, suite):
    scores = model.score_texts(suite.texts)
    preds = GroupedPredictions.from_scores(
        scores, suite.labels, [(r.identity,) for r in suite.rows]
    )
    assert len(np.unique(preds.preds)) == 2, "trivial predictor; gaps would be vacuous"
    fped, fned = fped_fned(preds, suite.identities)
    return fped, fned, auc(scores, suite.labels)


@pytest.fixture(scope="module")
def e2e_runs():
    """Five seeded corpus -> weights -> two models -> suite-metric runs."""
    world = biased_text_world(skew=E2E_SKEW)
    suite = _suite_for(world)
    assert verify_balance(suite).ok
    skewed_terms = sorted(E2E_SKEW)
    runs = []
    t0 = time.perf_counter()
    for seed in E2E_SEEDS:
        corpus = sample_biased(world, 20_000, seed, renderer=content_renderer)
        ds = corpus.dataset
        z_arr = np.array(corpus.z)
        rate_overall = float(corpus.y.mean())
        rate_a = float(corpus.y[z_arr == "groupa"].mean())

        weighted_all = weigh(ds, WeightConfig(seed=seed))
        cut = 16_000
        train_ds = Dataset(ds.samples[:cut], ds.signatures[:cut])
        valid_ds = Dataset(ds.samples[cut:], ds.signatures[cut:])
        uniform = (
            WeightedDataset.uniform(train_ds),
            WeightedDataset.uniform(valid_ds),
        )
        reweighted = (
            WeightedDataset(train_ds, weighted_all.weights[:cut]),
            WeightedDataset(valid_ds, weighted_all.weights[cut:]),
        )
        config = TrainConfig(seed=seed)
        base = train_weighted(*uniform, config)
        debiased = train_weighted(*reweighted, config)

        terms = world.identity_terms()
        freq_base = {r.term: r.delta for r in frequency_table(ds, terms)}
        freq_weighted = {
            r.term: r.delta for r in frequency_table(ds, terms, weighted_all.weights)
        }
        runs.append(
            {
                "seed": seed,
                "skew_ratio": rate_a / rate_overall,
                "base": _eval_on_suite(base, suite),
                "debiased": _eval_on_suite(debiased, suite),
                "freq_base": freq_base,
                "freq_weighted": freq_weighted,
            }
        )
    return {"runs": runs, "elapsed": time.perf_counter() - t0, "skewed_terms": skewed_terms}


def test_06_weighting_shrinks_error_rate_gaps_end_to_end(capsys, e2e_runs):
    """On a 20,000-sentence corpus where one group's positive rate is at
    least 4x the overall rate, training on the estimated weights cuts
    both suite error-rate gaps by >= 30% (5-seed means) without losing
    more than 0.02 suite AUC, in under 5 minutes."""
    runs = e2e_runs["runs"]
    min_ratio = min(r["skew_ratio"] for r in runs)
    fped_base = float(np.mean([r["base"][0] for r in runs]))
    fned_base = float(np.mean([r["base"][1] for r in runs]))
    auc_base = float(np.mean([r["base"][2] for r in runs]))
    fped_w = float(np.mean([r["debiased"][0] for r in runs]))
    fned_w = float(np.mean([r["debiased"][1] for r in runs]))
    auc_w = float(np.mean([r["debiased"][2] for r in runs]))
    elapsed = e2e_runs["elapsed"]
    ok = (
        min_ratio >= 4.0
        and fped_w <= 0.7 * fped_base
        and fned_w <= 0.7 * fned_base
        and auc_w >= auc_base - 0.02
        and elapsed < 300.0
    )
    _report(
        capsys, "06 end-to-end gap reduction", ok,
        f"FPED {fped_base:.3f}->{fped_w:.3f}, FNED {fned_base:.3f}->{fned_w:.3f}, "
        f"AUC {auc_base:.4f}->{auc_w:.4f}, skew ratio >= {min_ratio:.2f}, {elapsed:.1f}s",
    )
    assert min_ratio >= 4.0
    assert fped_w <= 0.7 * fped_base
    assert fned_w <= 0.7 * fned_base
    assert auc_w >= auc_base - 0.02
    assert elapsed < 300.0


def test_07_metric_oracles(capsys):
    """AUC equals the brute-force pairwise oracle bitwise on 1,000
    random cases; pinned hand examples for AUC and the gap sums."""
    rng = np.random.default_rng(1007)
    mismatches = 0
    for _ in range(1000):
        n = int(rng.integers(2, 25))
        labels = rng.integers(0, 2, size=n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        scores = (
            rng.choice([0.0, 0.25, 0.5, 0.75, 1.0], size=n)
            if rng.random() < 0.5
            else rng.random(n)
        )
        pos, neg = scores[labels == 1], scores[labels == 0]
        wins = 0.0
        for a in pos:
            for b in neg:
                wins += 1.0 if a > b else (0.5 if a == b else 0.0)
        if auc(scores, labels) != wins / (len(pos) * len(neg)):
            mismatches += 1

    hand_auc = auc([0.8, 0.8, 0.3, 0.1], [1, 0, 1, 0])

    # two groups: FPR 0.4 vs 0.2 around an overall 0.3 -> FPED 0.2
    scores2, labels2, terms2 = [], [], []
    for term, flips in (("a", (1, 1, 0, 0, 0)), ("b", (1, 0, 0, 0, 0))):
        for pred in flips:
            scores2.append(0.9 if pred else 0.1)
            labels2.append(0)
            terms2.append((term,))
        scores2.append(0.9)
        labels2.append(1)
        terms2.append((term,))
    hand = fped_fned(GroupedPredictions.from_scores(scores2, labels2, terms2), ["a", "b"])

    const = GroupedPredictions.from_scores(
        [0.9] * 4, [0, 1, 0, 1], [("a",), ("a",), ("b",), ("b",)]
    )
    const_gaps = fped_fned(const, ["a", "b"])

    ok = mismatches == 0 and hand_auc == 0.625 and hand == (0.2, 0.0) and const_gaps == (0.0, 0.0)
    _report(capsys, "07 metric oracles", ok,
            f"{1000 - mismatches}/1000 AUC cases bitwise-equal; hand AUC {hand_auc}; "
            f"hand FPED {hand[0]}; constant predictor {const_gaps}")
    assert mismatches == 0
    assert hand_auc == 0.625
    assert hand == (0.2, 0.0)
    assert const_gaps == (0.0, 0.0)


def test_08_weighting_shrinks_frequency_gaps(capsys, e2e_runs):
    """The weighted corpus's positive-vs-overall mention-rate gap is
    smaller than the raw corpus's for every selection-skewed identity
    term, in every seeded run."""
    worst_seed = None
    for run in e2e_runs["runs"]:
        for term in e2e_runs["skewed_terms"]:
            if abs(run["freq_weighted"][term]) >= abs(run["freq_base"][term]):
                worst_seed = (run["seed"], term)
    sample = e2e_runs["runs"][0]
    detail = ", ".join(
        f"{t}: {sample['freq_base'][t]:+.2f}->{sample['freq_weighted'][t]:+.2f}pp"
        for t in e2e_runs["skewed_terms"]
    )
    ok = worst_seed is None
    _report(capsys, "08 frequency-gap shrinkage", ok,
            f"all skewed terms shrink in all {len(e2e_runs['runs'])} runs (seed 1: {detail})")
    assert worst_seed is None, f"gap failed to shrink for {worst_seed}"


def test_09_weight_and_gradient_identities(capsys):
    """Structural identities of the weighting and the trainer."""
    # (a) unbiased input: per-group rates equal the overall rate, so
    # every weight sits within alpha/n_z of 1 (here: exactly 1)
    sig = IdentitySignature(("groupa",))
    ds = Dataset(
        tuple(Sample(f"u{i}", "text groupa text", i % 2) for i in range(1000)),
        (sig,) * 1000,
    )
    w = weigh(ds, WeightConfig(folds=5, alpha=1.0, seed=0)).weights
    unbiased_dev = float(np.max(np.abs(w - 1.0)))
    unbiased_ok = unbiased_dev <= 1.0 / 1000

    # (b) duplicating a row == doubling its weight, loss bitwise equal
    rng = np.random.default_rng(1009)
    seqs = [list(rng.choice([f"w{i}" for i in range(15)], size=5)) for _ in range(10)]
    vocab = Vocabulary.build(seqs, min_count=1)
    indptr, indices, data = featurize_matrix(seqs, vocab)
    y = rng.integers(0, 2, size=10).astype(np.float64)
    wts = rng.uniform(0.5, 2.0, size=10)
    coef = rng.normal(scale=0.2, size=len(vocab))
    bias = 0.1
    lo, hi = indptr[3], indptr[4]
    dup = (
        np.concatenate([indptr, [indptr[-1] + hi - lo]]),
        np.concatenate([indices, indices[lo:hi]]),
        np.concatenate([data, data[lo:hi]]),
        np.concatenate([y, [y[3]]]),
        np.concatenate([wts, [wts[3]]]),
    )
    doubled = wts.copy()
    doubled[3] *= 2.0
    loss_dup, g_dup, b_dup = logistic_loss_grad(*dup, coef, bias, 0.01)
    loss_dbl, g_dbl, b_dbl = logistic_loss_grad(indptr, indices, data, y, doubled, coef, bias, 0.01)
    dup_ok = (
        loss_dup == loss_dbl
        and np.allclose(g_dup, g_dbl, rtol=1e-13, atol=1e-16)
        and math.isclose(b_dup, b_dbl, rel_tol=1e-13)
    )

    # (c) scaling all weights by a power of two: bitwise-identical model
    texts = [("awful mess here today" if i % 2 else "nice calm walk today") for i in range(80)]
    tr = Dataset(tuple(Sample(f"t{i}", t, i % 2) for i, t in enumerate(texts[:60])))
    va = Dataset(tuple(Sample(f"x{i}", t, i % 2) for i, t in enumerate(texts[60:])))
    cfg = TrainConfig(min_count=1, epochs=5, seed=3)
    m1 = train_weighted(
        WeightedDataset(tr, np.ones(60)), WeightedDataset.uniform(va), cfg, backend_name="numpy"
    )
    m2 = train_weighted(
        WeightedDataset(tr, np.full(60, 4.0)), WeightedDataset.uniform(va), cfg, backend_name="numpy"
    )
    scale_ok = np.array_equal(m1.coef, m2.coef) and m1.bias == m2.bias

    # (d) analytic gradient vs central differences, 1e-6 relative
    h = 1e-6
    _, d_coef, d_bias = logistic_loss_grad(indptr, indices, data, y, wts, coef, bias, 0.01)
    grad_ok = True
    worst_rel = 0.0

    def loss_at(c, b):
        return logistic_loss_grad(indptr, indices, data, y, wts, c, b, 0.01)[0]

    for j in range(coef.size):
        cp, cm = coef.copy(), coef.copy()
        cp[j] += h
        cm[j] -= h
        fd = (loss_at(cp, bias) - loss_at(cm, bias)) / (2 * h)
        rel = abs(fd - d_coef[j]) / max(1.0, abs(fd))
        worst_rel = max(worst_rel, rel)
    fd_b = (loss_at(coef, bias + h) - loss_at(coef, bias - h)) / (2 * h)
    worst_rel = max(worst_rel, abs(fd_b - d_bias) / max(1.0, abs(fd_b)))
    grad_ok = worst_rel <= 1e-6

    ok = unbiased_ok and dup_ok and scale_ok and grad_ok
    _report(capsys, "09 weight/gradient identities", ok,
            f"unbiased dev {unbiased_dev:.1e} (<=1e-3); duplication bitwise {dup_ok}; "
            f"power-of-two scale bitwise {scale_ok}; gradient rel err {worst_rel:.1e}")
    assert unbiased_ok
    assert dup_ok
    assert scale_ok
    assert grad_ok


def test_10_template_suite_balance_and_size(capsys):
    """Every generated suite is label-balanced per identity term; suite
    size matches the closed-form count on 100 random configurations; the
    default templates give an exactly 50% positive rate."""
    rng = np.random.default_rng(1010)
    size_mismatches = 0
    imbalanced = 0
    for _ in range(100):
        lex = SlotLexicon(
            identity_terms=tuple(f"id{i}" for i in range(int(rng.integers(1, 6)))),
            adj_offensive=tuple(f"ao{i}" for i in range(int(rng.integers(1, 4)))),
            adj_inoffensive=tuple(f"ai{i}" for i in range(int(rng.integers(1, 4)))),
            verb_offensive=tuple(f"vo{i}" for i in range(int(rng.integers(1, 4)))),
            verb_inoffensive=tuple(f"vi{i}" for i in range(int(rng.integers(1, 4)))),
            suffixes=tuple(f"End {i}." for i in range(int(rng.integers(0, 3)))),
        )
        picks = rng.integers(0, len(DEFAULT_TEMPLATES), size=int(rng.integers(1, 9)))
        templates = [DEFAULT_TEMPLATES[i] for i in picks]
        suite = generate(templates, lex)
        expected = 0
        for t in templates:
            combos = 1
            for slot in t.filler_slots:
                combos *= len(lex.words_for(slot))
            expected += len(lex.identity_terms) * combos * max(1, len(lex.suffixes))
        if len(suite) != expected:
            size_mismatches += 1
        if not verify_balance(suite).ok:
            imbalanced += 1
    default_rate = verify_balance(generate()).positive_rate
    ok = size_mismatches == 0 and imbalanced == 0 and default_rate == Fraction(1, 2)
    _report(capsys, "10 template suite guarantees", ok,
            f"100/100 sizes match closed form, {100 - imbalanced}/100 balanced, "
            f"default positive rate {default_rate}")
    assert size_mismatches == 0
    assert imbalanced == 0
    assert default_rate == Fraction(1, 2)
