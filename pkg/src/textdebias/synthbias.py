"""Synthetic discrete worlds where the selection-bias story is exact.

A :class:`DiscreteWorld` fixes a finite joint distribution Q over triples
(x, z, y) — content symbol, identity symbol, label — together with a
selection rule s(y, z) = probability a triple survives into the observed
corpus.  The observed distribution is then P(x, z, y) proportional to
Q(x, z, y) * s(y, z).  Because everything is enumerable, the claims the
weighting stage relies on can be verified by exact arithmetic instead of
simulation:

* reweighting by w(y, z) = Q(y) / P(y | z) makes observed expectations
  match deployed ones (``check_theorem2``),
* equalized odds plus a label independent of identity forces statistical
  and predictive parity (``check_theorem1``),
* the weighted observed distribution has the deployed label posterior
  and a per-identity-scaled marginal (``check_posterior``).

Worlds can also emit sampled text corpora through a renderer, which is
how the end-to-end pipeline tests build datasets with a known, tunable
amount of selection bias.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .corpus import Dataset, IdentitySignature, Sample

_FLAG_TOL = 1e-12

Renderer = Callable[
    [np.random.Generator, Sequence[str], Sequence[str], np.ndarray], list[str]
]


class AssumptionError(ValueError):
    """A world lacks the structural property an operation requires."""


@dataclass(frozen=True, eq=False)
class DiscreteWorld:
    """Finite joint Q over (x, z, y) plus the selection rule s(y, z).

    ``xs``/``zs``/``ys`` are parallel to ``q``; the empty string is a
    legal identity symbol meaning "mentions no identity".  Two structural
    flags are computed at construction (never trusted from input):

    * ``label_independent`` — Q(y=1 | z) is the same for every z;
    * ``selection_uniform`` — the overall survival rate Q(s=1 | z) is the
      same for every z, even though s(y, z) itself may vary.
    """

    xs: tuple[str, ...]
    zs: tuple[str, ...]
    ys: tuple[int, ...]
    q: np.ndarray
    selection: Mapping[tuple[int, str], float]
    label_independent: bool = field(init=False)
    selection_uniform: bool = field(init=False)

    def __post_init__(self) -> None:
        n = len(self.xs)
        if not (len(self.zs) == len(self.ys) == n) or self.q.shape != (n,):
            raise ValueError("xs, zs, ys, q must be parallel")
        if n == 0:
            raise ValueError("world has empty support")
        if len({(x, z, y) for x, z, y in zip(self.xs, self.zs, self.ys)}) != n:
            raise ValueError("duplicate (x, z, y) triples")
        if any(y not in (0, 1) for y in self.ys):
            raise ValueError("labels must be 0/1")
        q = np.asarray(self.q, dtype=np.float64)
        if np.any(q < 0) or abs(float(q.sum()) - 1.0) > _FLAG_TOL:
            raise ValueError("q must be nonnegative and sum to 1")
        object.__setattr__(self, "q", q)
        for y in (0, 1):
            for z in sorted(set(self.zs)):
                s = self.selection.get((y, z))
                if s is None:
                    raise ValueError(f"selection missing for (y={y}, z={z!r})")
                if not 0.0 < s <= 1.0:
                    raise AssumptionError(
                        f"selection probability for (y={y}, z={z!r}) is {s}; "
                        "every group/label must have positive selection odds"
                    )
        object.__setattr__(self, "label_independent", self._check_label_independent())
        object.__setattr__(self, "selection_uniform", self._check_selection_uniform())

    # -- structural flags ------------------------------------------------

    def _q_by_z(self) -> dict[str, tuple[float, float]]:
        """z -> (Q(z), Q(y=1, z))."""
        acc: dict[str, list[float]] = {}
        for z, y, qi in zip(self.zs, self.ys, self.q):
            e = acc.setdefault(z, [0.0, 0.0])
            e[0] += qi
            e[1] += qi * y
        return {z: (v[0], v[1]) for z, v in acc.items()}

    def _check_label_independent(self) -> bool:
        overall = self.q_y1
        for z, (qz, qy1z) in self._q_by_z().items():
            if qz > 0 and abs(qy1z / qz - overall) > _FLAG_TOL:
                return False
        return True

    def _check_selection_uniform(self) -> bool:
        rates = []
        for z, (qz, qy1z) in self._q_by_z().items():
            if qz == 0:
                continue
            p1 = qy1z / qz
            rates.append(p1 * self.selection[(1, z)] + (1 - p1) * self.selection[(0, z)])
        return max(rates) - min(rates) <= _FLAG_TOL

    # -- basic marginals -------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.xs)

    @property
    def q_y1(self) -> float:
        """Q(y=1)."""
        return float(sum(qi for y, qi in zip(self.ys, self.q) if y == 1))

    def q_z(self) -> dict[str, float]:
        return {z: v[0] for z, v in self._q_by_z().items()}

    def identity_terms(self) -> tuple[str, ...]:
        """Non-empty identity symbols, sorted (usable as a lexicon)."""
        return tuple(sorted({z for z in self.zs if z}))

    # -- (de)serialization ------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "triples": [
                {"x": x, "z": z, "y": y, "q": float(qi)}
                for x, z, y, qi in zip(self.xs, self.zs, self.ys, self.q)
            ],
            "selection": [
                {"y": y, "z": z, "p": float(p)} for (y, z), p in sorted(self.selection.items())
            ],
        }

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def from_dict(cls, obj: dict) -> "DiscreteWorld":
        triples = obj["triples"]
        return cls(
            xs=tuple(t["x"] for t in triples),
            zs=tuple(t["z"] for t in triples),
            ys=tuple(int(t["y"]) for t in triples),
            q=np.array([t["q"] for t in triples], dtype=np.float64),
            selection={(int(e["y"]), e["z"]): float(e["p"]) for e in obj["selection"]},
        )

    @classmethod
    def load(cls, path: str | Path) -> "DiscreteWorld":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def biased_distribution(world: DiscreteWorld) -> np.ndarray:
    """Observed distribution P(x, z, y) = Q(x, z, y) s(y, z) / Q(s=1),
    parallel to the world's triples."""
    sel = np.array([world.selection[(y, z)] for y, z in zip(world.ys, world.zs)])
    mass = world.q * sel
    return mass / mass.sum()


def _p_y1_given_z(world: DiscreteWorld, p: np.ndarray) -> dict[str, float]:
    acc: dict[str, list[float]] = {}
    for z, y, pi in zip(world.zs, world.ys, p):
        e = acc.setdefault(z, [0.0, 0.0])
        e[0] += pi
        e[1] += pi * y
    return {z: v[1] / v[0] for z, v in acc.items() if v[0] > 0}


def _weight_map(world: DiscreteWorld, p: np.ndarray) -> dict[tuple[int, str], float]:
    """w(y, z) = Q(y) / P(y | z)."""
    q1 = world.q_y1
    p1z = _p_y1_given_z(world, p)
    out: dict[tuple[int, str], float] = {}
    for z, p1 in p1z.items():
        out[(1, z)] = q1 / p1
        out[(0, z)] = (1.0 - q1) / (1.0 - p1)
    return out


def exact_weights(world: DiscreteWorld) -> dict[tuple[int, str], float]:
    """Closed-form weights w(y, z) = Q(y) / P(y | z).

    Requires both structural flags; also verifies, triple by triple, that
    the same numbers equal the full density ratio Q(x, z, y) / P(x, z, y)
    to within 1e-12 — the identity the expectation-transfer argument
    rests on.
    """
    if not world.label_independent:
        raise AssumptionError("Q(y | z) varies with z; the deployed world is not label-balanced")
    if not world.selection_uniform:
        raise AssumptionError("Q(s=1 | z) varies with z; overall selection odds must not depend on z")
    p = biased_distribution(world)
    weights = _weight_map(world, p)
    for i in range(world.n):
        if world.q[i] == 0:
            continue
        ratio = world.q[i] / p[i]
        w = weights[(world.ys[i], world.zs[i])]
        if abs(w - ratio) > 1e-12 * max(1.0, abs(w)):
            raise RuntimeError(
                f"weight identity violated on triple {i}: w={w!r} vs Q/P={ratio!r}"
            )
    return weights


# -- report plumbing -----------------------------------------------------


@dataclass(frozen=True)
class CheckPair:
    """One verified equality: |left - right| <= tolerance."""

    label: str
    left: float
    right: float
    tolerance: float

    def __post_init__(self) -> None:
        for name in ("left", "right", "tolerance"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def gap(self) -> float:
        return abs(self.left - self.right)

    @property
    def passed(self) -> bool:
        return bool(self.gap <= self.tolerance)


@dataclass(frozen=True)
class TheoremReport:
    name: str
    pairs: tuple[CheckPair, ...]
    premise_failures: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return not self.premise_failures and all(p.passed for p in self.pairs)

    @property
    def max_gap(self) -> float:
        return max((p.gap for p in self.pairs), default=0.0)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "premise_failures": list(self.premise_failures),
            "pairs": [
                {
                    "label": p.label,
                    "left": p.left,
                    "right": p.right,
                    "gap": p.gap,
                    "tolerance": p.tolerance,
                    "passed": p.passed,
                }
                for p in self.pairs
            ],
        }


# -- expectation transfer (weighted observed == deployed) -----------------


def _resolve_loss(loss: str | Callable[[float, int], float]) -> Callable[[float, int], float]:
    if callable(loss):
        return loss
    if loss == "zero_one":
        return lambda score, y: float((score >= 0.5) != bool(y))
    if loss == "logistic":
        def _logistic(score: float, y: int) -> float:
            s = min(max(score, 1e-12), 1.0 - 1e-12)
            return -math.log(s) if y == 1 else -math.log(1.0 - s)
        return _logistic
    raise ValueError(f"unknown loss {loss!r}; expected 'zero_one', 'logistic', or a callable")


def check_theorem2(
    world: DiscreteWorld,
    classifier: Mapping[tuple[str, str], float] | Callable[[str, str], float],
    loss: str | Callable[[float, int], float] = "zero_one",
    n_samples: int = 0,
    seeds: Sequence[int] = (),
    exact_tol: float = 1e-10,
    mc_tol: float = 0.01,
) -> TheoremReport:
    """Verify E_P[w * loss] == E_Q[loss] for an arbitrary classifier.

    The exact pair sums both expectations over the whole support.  When
    ``n_samples`` and ``seeds`` are given, each seed additionally draws
    that many iid samples from P and compares the plain average of
    ``w * loss`` (no self-normalization) against the deployed expectation
    within ``mc_tol``.
    """
    if isinstance(classifier, Mapping):
        table = classifier
        score = lambda x, z: table[(x, z)]  # noqa: E731
    else:
        score = classifier
    loss_fn = _resolve_loss(loss)
    weights = exact_weights(world)
    p = biased_distribution(world)
    per_triple_loss = np.array(
        [loss_fn(score(x, z), y) for x, z, y in zip(world.xs, world.zs, world.ys)]
    )
    per_triple_w = np.array([weights[(y, z)] for y, z in zip(world.ys, world.zs)])
    deployed = float(np.dot(world.q, per_triple_loss))
    reweighted = float(np.dot(p, per_triple_w * per_triple_loss))
    pairs = [CheckPair("exact: E_P[w*loss] vs E_Q[loss]", reweighted, deployed, exact_tol)]
    for seed in seeds:
        rng = np.random.default_rng(seed)
        idx = _sample_indices(p, n_samples, rng)
        estimate = float(np.mean(per_triple_w[idx] * per_triple_loss[idx]))
        pairs.append(
            CheckPair(f"sampled (n={n_samples}, seed={seed})", estimate, deployed, mc_tol)
        )
    return TheoremReport(name="expectation_transfer", pairs=tuple(pairs))


# -- criterion collapse (equalized odds => both parities) -----------------


@dataclass(frozen=True, eq=False)
class PredictorJoint:
    """Joint distribution of (prediction, label, identity): ``table[i, j, k]``
    = Pr(yhat=i, y=j, z=z_values[k])."""

    z_values: tuple[str, ...]
    table: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.table, dtype=np.float64)
        if t.shape != (2, 2, len(self.z_values)):
            raise ValueError(f"table must have shape (2, 2, {len(self.z_values)})")
        if np.any(t < 0) or abs(float(t.sum()) - 1.0) > 1e-9:
            raise ValueError("table must be nonnegative and sum to 1")
        object.__setattr__(self, "table", t)


def check_theorem1(
    joint: PredictorJoint,
    tol: float = 1e-9,
    premise_tol: float = 1e-9,
    enforce_premises: bool = True,
) -> TheoremReport:
    """Check that equalized odds plus a z-independent label imply
    statistical parity and predictive parity.

    Premises verified first: Pr(y=1 | z) constant and
    Pr(yhat=1 | y, z) = Pr(yhat=1 | y).  With ``enforce_premises`` a
    violated premise is reported by name and no parity verdict is issued;
    pass ``False`` to compute the parity gaps regardless (useful for
    showing that a perturbed joint breaks them).
    """
    t = joint.table
    failures: list[str] = []
    p_z = t.sum(axis=(0, 1))
    p_y1 = float(t[:, 1, :].sum())
    for k, z in enumerate(joint.z_values):
        if p_z[k] == 0:
            failures.append(f"Pr(z={z!r}) = 0")
            continue
        if abs(float(t[:, 1, k].sum()) / p_z[k] - p_y1) > premise_tol:
            failures.append(f"label depends on identity: Pr(y=1 | z={z!r}) != Pr(y=1)")
    for y in (0, 1):
        p_y = float(t[:, y, :].sum())
        if p_y == 0:
            failures.append(f"Pr(y={y}) = 0")
            continue
        overall = float(t[1, y, :].sum()) / p_y
        for k, z in enumerate(joint.z_values):
            mass = float(t[:, y, k].sum())
            if mass == 0:
                continue
            if abs(float(t[1, y, k]) / mass - overall) > premise_tol:
                failures.append(
                    f"equalized odds violated: Pr(yhat=1 | y={y}, z={z!r}) != Pr(yhat=1 | y={y})"
                )
    if failures and enforce_premises:
        return TheoremReport(
            name="criterion_collapse", pairs=(), premise_failures=tuple(dict.fromkeys(failures))
        )

    pairs: list[CheckPair] = []
    p_yhat1 = float(t[1, :, :].sum())
    for k, z in enumerate(joint.z_values):
        if p_z[k] > 0:
            pairs.append(
                CheckPair(
                    f"statistical parity at z={z!r}",
                    float(t[1, :, k].sum()) / float(p_z[k]),
                    p_yhat1,
                    tol,
                )
            )
    if p_yhat1 > 0:
        ppv_overall = float(t[1, 1, :].sum()) / p_yhat1
        for k, z in enumerate(joint.z_values):
            mass = float(t[1, :, k].sum())
            if mass > 0:
                pairs.append(
                    CheckPair(
                        f"predictive parity at z={z!r}",
                        float(t[1, 1, k]) / mass,
                        ppv_overall,
                        tol,
                    )
                )
    return TheoremReport(
        name="criterion_collapse",
        pairs=tuple(pairs),
        premise_failures=tuple(dict.fromkeys(failures)),
    )


# -- posterior shape of the weighted observed distribution ----------------


def check_posterior(world: DiscreteWorld, tol: float = 1e-10) -> TheoremReport:
    """Verify the two structural facts about P*(x, z, y) ∝ w * P(x, z, y):

    its label posterior equals the deployed one, P*(y | x) = Q(y | x),
    and its content marginal is the deployed one rescaled per identity,
    P*(x) = (P(z_x) / Q(z_x)) Q(x).  Requires a z-independent label and
    that each content symbol determines its identity symbol; the
    selection-uniformity flag is *not* required.
    """
    if not world.label_independent:
        raise AssumptionError("Q(y | z) varies with z; the deployed world is not label-balanced")
    z_of_x: dict[str, str] = {}
    for x, z in zip(world.xs, world.zs):
        if z_of_x.setdefault(x, z) != z:
            raise AssumptionError(f"content symbol {x!r} appears with identities "
                                  f"{z_of_x[x]!r} and {z!r}; z must be a function of x")
    p = biased_distribution(world)
    weights = _weight_map(world, p)
    star = np.array([weights[(y, z)] for y, z in zip(world.ys, world.zs)]) * p
    normalizer = float(star.sum())
    pairs = [CheckPair("normalizer of w * P", normalizer, 1.0, tol)]
    star = star / normalizer

    def marg(dist: np.ndarray, key: Callable[[int], object]) -> dict:
        acc: dict = {}
        for i, m in enumerate(dist):
            k = key(i)
            acc[k] = acc.get(k, 0.0) + m
        return acc

    q_x = marg(world.q, lambda i: world.xs[i])
    star_x = marg(star, lambda i: world.xs[i])
    q_xy = marg(world.q, lambda i: (world.xs[i], world.ys[i]))
    star_xy = marg(star, lambda i: (world.xs[i], world.ys[i]))
    p_zm = marg(p, lambda i: world.zs[i])
    q_zm = marg(world.q, lambda i: world.zs[i])

    for x in sorted(q_x):
        if q_x[x] == 0 or star_x.get(x, 0.0) == 0:
            continue
        pairs.append(
            CheckPair(
                f"label posterior at x={x!r}",
                star_xy.get((x, 1), 0.0) / star_x[x],
                q_xy.get((x, 1), 0.0) / q_x[x],
                tol,
            )
        )
        z = z_of_x[x]
        pairs.append(
            CheckPair(
                f"marginal ratio at x={x!r}",
                star_x[x] / q_x[x],
                p_zm[z] / q_zm[z],
                tol,
            )
        )
    return TheoremReport(name="weighted_posterior", pairs=tuple(pairs))


# -- sampling ------------------------------------------------------------


def _sample_indices(p: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    cum = np.cumsum(p)
    cum[-1] = 1.0
    return np.searchsorted(cum, rng.random(n), side="right")


NEUTRAL_FILLERS = (
    "the", "and", "today", "morning", "river", "window", "garden", "quietly",
    "again", "letter", "coffee", "music", "walking", "weather", "story",
    "evening", "friend", "market", "travel", "paper", "sunset", "bridge",
    "station", "orchard", "notebook", "bicycle", "harbor", "meadow", "lantern",
    "kettle",
)


def render_neutral(
    rng: np.random.Generator,
    xs: Sequence[str],
    zs: Sequence[str],
    ys: np.ndarray,
    fillers: Sequence[str] = NEUTRAL_FILLERS,
) -> list[str]:
    """Default renderer: label-blind filler text with the identity symbol
    spliced in (when non-empty), so the identity term is recoverable from
    the text and nothing else is informative."""
    n = len(xs)
    lengths = rng.integers(5, 11, size=n)
    positions = rng.integers(0, lengths + 1)
    choices = rng.integers(0, len(fillers), size=(n, int(lengths.max())))
    out: list[str] = []
    for i in range(n):
        words = [fillers[j] for j in choices[i, : lengths[i]]]
        if zs[i]:
            words.insert(int(positions[i]), zs[i])
        out.append(" ".join(words) + ".")
    return out


@dataclass(frozen=True, eq=False)
class SampledCorpus:
    """A rendered draw from the observed distribution P.

    ``dataset`` carries signatures built from the *true* identity symbol;
    the parallel ``x``/``z``/``y`` tuples record the latent triple behind
    each sample for oracle-style assertions.
    """

    dataset: Dataset
    x: tuple[str, ...]
    z: tuple[str, ...]
    y: np.ndarray


def sample_biased(
    world: DiscreteWorld,
    n: int,
    seed: int,
    renderer: Renderer | None = None,
) -> SampledCorpus:
    """Draw ``n`` iid samples from the observed distribution P and render
    them to text.  Fixed seed => identical corpus, bytes included."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    p = biased_distribution(world)
    idx = _sample_indices(p, n, rng)
    xs = tuple(world.xs[i] for i in idx)
    zs = tuple(world.zs[i] for i in idx)
    ys = np.array([world.ys[i] for i in idx], dtype=np.int64)
    texts = (renderer or render_neutral)(rng, xs, zs, ys)
    samples = tuple(
        Sample(id=f"s{i:06d}", text=t, label=int(y)) for i, (t, y) in enumerate(zip(texts, ys))
    )
    signatures = tuple(IdentitySignature((z,) if z else ()) for z in zs)
    return SampledCorpus(dataset=Dataset(samples, signatures), x=xs, z=zs, y=ys)


# -- world constructors ----------------------------------------------------


def reference_world() -> DiscreteWorld:
    """Two-identity world with hand-checkable numbers.

    Deployed: both identities g and s have mass 1/2 and positive rate
    1/2.  Selection keeps every g-positive (1.0) but only a fifth of
    g-negatives (0.2), and 60% of s either way, so the overall survival
    rate is 0.6 for both identities.  Observed: P(y=1 | g) = 5/6, and the
    closed-form weights are w(1,g)=0.6, w(0,g)=3.0, w(·,s)=1.0.
    """
    return DiscreteWorld(
        xs=("x_g_1", "x_g_0", "x_s_1", "x_s_0"),
        zs=("g", "g", "s", "s"),
        ys=(1, 0, 1, 0),
        q=np.array([0.25, 0.25, 0.25, 0.25]),
        selection={(1, "g"): 1.0, (0, "g"): 0.2, (1, "s"): 0.6, (0, "s"): 0.6},
    )


def random_world(
    rng: np.random.Generator,
    n_z: int = 3,
    n_x: int = 2,
    label_independent: bool = True,
    selection_uniform: bool = True,
) -> DiscreteWorld:
    """Random world with the requested structural properties.

    Identity symbols are ``g0..g{n_z-1}`` with ``n_x`` content symbols
    each (content determines identity, so posterior checks apply).  With
    ``selection_uniform`` the per-z selection rates are jittered around a
    common mean m as s(1,z) = m + (1-q1) d_z and s(0,z) = m - q1 d_z,
    which keeps Q(s=1 | z) = m for every z while the per-label odds still
    differ.
    """
    zs_names = [f"g{i}" for i in range(n_z)]
    q_z = rng.random(n_z) + 0.2
    q_z /= q_z.sum()
    q1_overall = float(rng.uniform(0.2, 0.8))

    xs: list[str] = []
    zl: list[str] = []
    yl: list[int] = []
    ql: list[float] = []
    for k, zname in enumerate(zs_names):
        q1_z = q1_overall if label_independent else float(rng.uniform(0.1, 0.9))
        for y in (0, 1):
            probs = rng.random(n_x) + 0.1
            probs /= probs.sum()
            mass = q_z[k] * (q1_z if y == 1 else 1.0 - q1_z)
            for j in range(n_x):
                xs.append(f"x_{zname}_{j}")
                zl.append(zname)
                yl.append(y)
                ql.append(mass * probs[j])

    selection: dict[tuple[int, str], float] = {}
    if selection_uniform:
        m = float(rng.uniform(0.3, 0.7))
        lo = max((0.05 - m) / (1 - q1_overall), (m - 1.0) / q1_overall)
        hi = min((1.0 - m) / (1 - q1_overall), (m - 0.05) / q1_overall)
        for zname in zs_names:
            d = float(rng.uniform(lo, hi))
            selection[(1, zname)] = m + (1 - q1_overall) * d
            selection[(0, zname)] = m - q1_overall * d
    else:
        for zname in zs_names:
            selection[(1, zname)] = float(rng.uniform(0.05, 1.0))
            selection[(0, zname)] = float(rng.uniform(0.05, 1.0))

    q = np.array(ql)
    return DiscreteWorld(
        xs=tuple(xs), zs=tuple(zl), ys=tuple(yl), q=q / q.sum(), selection=selection
    )


TOXIC_CONTENT = (
    "kill", "murder", "hate", "destroy", "disgusting", "filthy", "nasty",
    "rotten", "garbage", "awful", "stupid", "ugly",
)
BENIGN_CONTENT = (
    "hug", "love", "like", "respect", "great", "fun", "nice", "neat",
    "happy", "kind", "gentle", "bright",
)
_CONTENT_MIX = {
    # content class -> probability given y=1, given y=0
    "tox": (0.70, 0.04),
    "amb": (0.20, 0.25),
    "ben": (0.10, 0.71),
}


def biased_text_world(
    terms: Sequence[str] = ("groupa", "groupb", "groupc", "groupd", "groupe"),
    q_identity: float = 0.13,
    q1: float = 0.15,
    skew: Mapping[str, tuple[float, float]] | None = None,
    base_selection: float = 0.6,
) -> DiscreteWorld:
    """World whose samples render to toxicity-flavored sentences.

    The deployed distribution is fair by construction: the positive rate
    is ``q1`` for every identity and for identity-free text.  ``skew``
    maps an identity term to its per-label selection probabilities
    ``(s(y=1, term), s(y=0, term))``; everything else keeps the uniform
    ``base_selection``.  A term with s1 >> s0 looks far more toxic in the
    observed corpus than it is in the deployed world — the log of the
    ratio s1/s0 is exactly the logit bump a conditional-likelihood model
    has to hang on that term.

    Content symbols are ``{term}|{cls}`` with cls in tox/amb/ben; the
    class mix depends only on the label, so content carries signal about
    y but none about z.  Use with :func:`content_renderer`.
    """
    if len(terms) * q_identity >= 1.0:
        raise ValueError("identity mass exceeds 1; lower q_identity")
    skew = dict(skew or {})
    unknown = set(skew) - set(terms)
    if unknown:
        raise ValueError(f"skew given for unknown terms {sorted(unknown)}")
    z_mass = {term: q_identity for term in terms}
    z_mass[""] = 1.0 - len(terms) * q_identity
    xs: list[str] = []
    zl: list[str] = []
    yl: list[int] = []
    ql: list[float] = []
    selection: dict[tuple[int, str], float] = {}
    for z, qz in z_mass.items():
        s1, s0 = skew.get(z, (base_selection, base_selection))
        selection[(1, z)] = s1
        selection[(0, z)] = s0
        for y in (0, 1):
            for cls, mix in _CONTENT_MIX.items():
                xs.append(f"{z or 'bg'}|{cls}")
                zl.append(z)
                yl.append(y)
                ql.append(qz * (q1 if y == 1 else 1.0 - q1) * mix[0 if y == 1 else 1])
    q = np.array(ql)
    return DiscreteWorld(
        xs=tuple(xs), zs=tuple(zl), ys=tuple(yl), q=q / q.sum(), selection=selection
    )


def content_renderer(
    rng: np.random.Generator,
    xs: Sequence[str],
    zs: Sequence[str],
    ys: np.ndarray,
) -> list[str]:
    """Renderer for :func:`biased_text_world` corpora.

    Sentences are neutral filler plus, depending on the content class
    encoded in x, a couple of toxic or benign content words; the identity
    term is spliced in when present.  Toxic/benign word lists overlap the
    default template slot words on purpose, so template suites probe the
    exact vocabulary the classifier learned.
    """
    n = len(xs)
    lengths = rng.integers(6, 12, size=n)
    max_len = int(lengths.max())
    filler_idx = rng.integers(0, len(NEUTRAL_FILLERS), size=(n, max_len))
    content_n = rng.integers(1, 3, size=n)
    content_idx = rng.integers(0, len(TOXIC_CONTENT), size=(n, 3))
    positions = rng.random(size=(n, 4))
    out: list[str] = []
    for i in range(n):
        words = [NEUTRAL_FILLERS[j] for j in filler_idx[i, : lengths[i]]]
        cls = xs[i].rsplit("|", 1)[1]
        if cls != "amb":
            pool = TOXIC_CONTENT if cls == "tox" else BENIGN_CONTENT
            for c in range(int(content_n[i])):
                pos = int(positions[i, c] * (len(words) + 1))
                words.insert(pos, pool[content_idx[i, c] % len(pool)])
        if zs[i]:
            pos = int(positions[i, 3] * (len(words) + 1))
            words.insert(pos, zs[i])
        out.append(" ".join(words) + ".")
    return out


def random_classifier(
    rng: np.random.Generator, world: DiscreteWorld
) -> dict[tuple[str, str], float]:
    """Arbitrary scores in (0, 1) for every (x, z) in the support.

    Pairs are visited in support order (not set order, which varies with
    the interpreter's hash seed), so a fixed rng gives the same classifier
    in every process.
    """
    return {
        pair: float(rng.uniform(0.01, 0.99))
        for pair in dict.fromkeys(zip(world.xs, world.zs))
    }


def random_eo_joint(rng: np.random.Generator, n_z: int = 3) -> PredictorJoint:
    """Random joint satisfying both premises of the criterion-collapse
    check: label independent of z and per-label prediction rates shared
    across z."""
    p_z = rng.random(n_z) + 0.3
    p_z /= p_z.sum()
    p_y1 = float(rng.uniform(0.2, 0.8))
    rate = {1: float(rng.uniform(0.1, 0.9)), 0: float(rng.uniform(0.1, 0.9))}
    table = np.empty((2, 2, n_z))
    for yhat in (0, 1):
        for y in (0, 1):
            p_y = p_y1 if y == 1 else 1.0 - p_y1
            cond = rate[y] if yhat == 1 else 1.0 - rate[y]
            table[yhat, y, :] = p_z * p_y * cond
    return PredictorJoint(z_values=tuple(f"g{i}" for i in range(n_z)), table=table)


def perturb_joint(joint: PredictorJoint, cell: tuple[int, int, int], delta: float = 1e-3) -> PredictorJoint:
    """Shift one cell's mass by ``delta`` and renormalize — the standard
    mutant for showing the parity conclusions are not vacuous."""
    t = joint.table.copy()
    t[cell] += delta
    if t[cell] < 0:
        raise ValueError("perturbation drove a cell negative")
    return PredictorJoint(z_values=joint.z_values, table=t / t.sum())
