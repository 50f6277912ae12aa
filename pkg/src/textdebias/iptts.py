"""Identity-swapped template test suites.

A suite is generated by filling sentence templates with identity terms
and slot words.  Every identity term passes through exactly the same
templates and fillers, so the positive rate is identical across terms by
construction — deviations in a classifier's per-term error rates on such
a suite measure bias, not data imbalance.
"""

from __future__ import annotations

import csv
import itertools
import json
import string
from dataclasses import dataclass, field, fields
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

SLOT_NAMES = ("identity", "adj_off", "adj_inoff", "verb_off", "verb_inoff")
_OFFENSIVE_SLOTS = ("adj_off", "verb_off")
_INOFFENSIVE_SLOTS = ("adj_inoff", "verb_inoff")


class TemplateError(ValueError):
    """A template or slot lexicon violates the generation rules."""


def _slot_occurrences(pattern: str) -> list[str]:
    """Slot names referenced by ``pattern``, one entry per occurrence, in
    textual order."""
    out: list[str] = []
    for _, name, _, _ in string.Formatter().parse(pattern):
        if name is None:
            continue
        if name not in SLOT_NAMES:
            raise TemplateError(f"unknown slot {{{name}}} in pattern {pattern!r}")
        out.append(name)
    return out


@dataclass(frozen=True)
class Template:
    """One sentence pattern with a gold label.

    Patterns use ``{slot}`` placeholders.  Exactly one ``{identity}`` is
    required; offensive slots may appear only in label-1 templates and
    inoffensive slots only in label-0 templates, otherwise the generated
    gold labels would be wrong by construction.
    """

    pattern: str
    label: int

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise TemplateError(f"label must be 0 or 1, got {self.label!r}")
        occurrences = _slot_occurrences(self.pattern)
        if occurrences.count("identity") != 1:
            raise TemplateError(
                f"pattern {self.pattern!r} must contain exactly one {{identity}} slot"
            )
        banned = _INOFFENSIVE_SLOTS if self.label == 1 else _OFFENSIVE_SLOTS
        for name in occurrences:
            if name in banned:
                raise TemplateError(
                    f"slot {{{name}}} contradicts label {self.label} in pattern {self.pattern!r}"
                )

    @property
    def filler_slots(self) -> tuple[str, ...]:
        """Distinct non-identity slots, in order of first appearance."""
        seen: list[str] = []
        for name in _slot_occurrences(self.pattern):
            if name != "identity" and name not in seen:
                seen.append(name)
        return tuple(seen)


DEFAULT_TEMPLATES: tuple[Template, ...] = (
    Template("{verb_inoff} {identity}.", 0),
    Template("{verb_off} {identity}.", 1),
    Template("I am {identity}.", 0),
    Template("I hate {identity}.", 1),
    Template("Being {identity} is {adj_inoff}.", 0),
    Template("Being {identity} is {adj_off}.", 1),
    Template("You are a {adj_inoff} {identity}.", 0),
    Template("You are a {adj_off} {identity}.", 1),
)


@dataclass(frozen=True)
class SlotLexicon:
    """Word lists backing the template slots, plus optional suffix
    sentences appended (space-separated) after the filled pattern."""

    identity_terms: tuple[str, ...]
    adj_offensive: tuple[str, ...] = ()
    adj_inoffensive: tuple[str, ...] = ()
    verb_offensive: tuple[str, ...] = ()
    verb_inoffensive: tuple[str, ...] = ()
    suffixes: tuple[str, ...] = ()

    _SLOT_FIELDS = {
        "identity": "identity_terms",
        "adj_off": "adj_offensive",
        "adj_inoff": "adj_inoffensive",
        "verb_off": "verb_offensive",
        "verb_inoff": "verb_inoffensive",
    }

    def __post_init__(self) -> None:
        if not self.identity_terms:
            raise TemplateError("identity_terms must be non-empty")
        for f in fields(self):
            values = getattr(self, f.name)
            object.__setattr__(self, f.name, tuple(values))
            if len(set(getattr(self, f.name))) != len(getattr(self, f.name)):
                raise TemplateError(f"duplicate entries in {f.name}")

    def words_for(self, slot: str) -> tuple[str, ...]:
        return getattr(self, self._SLOT_FIELDS[slot])

    @classmethod
    def from_dict(cls, obj: dict) -> "SlotLexicon":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise TemplateError(f"unknown slot lexicon keys {sorted(unknown)}")
        return cls(**{k: tuple(v) for k, v in obj.items()})


DEFAULT_SLOT_LEXICON = SlotLexicon(
    identity_terms=("actor", "actress", "airman", "airwoman", "boy", "girl", "man", "woman"),
    adj_offensive=("disgusting", "filthy", "nasty", "rotten"),
    adj_inoffensive=("great", "fun", "nice", "neat"),
    verb_offensive=("kill", "murder", "hate", "destroy"),
    verb_inoffensive=("hug", "love", "like", "respect"),
)


@dataclass(frozen=True)
class SuiteRow:
    text: str
    label: int
    identity: str
    template_id: int


@dataclass(frozen=True)
class TestSuite:
    rows: tuple[SuiteRow, ...]

    __test__ = False  # keep pytest from collecting this as a test class

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self) -> Iterator[SuiteRow]:
        return iter(self.rows)

    @property
    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.rows], dtype=np.int64)

    @property
    def texts(self) -> list[str]:
        return [r.text for r in self.rows]

    @property
    def identities(self) -> tuple[str, ...]:
        """Distinct identity terms, sorted."""
        return tuple(sorted({r.identity for r in self.rows}))

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["text", "label", "identity", "template_id"])
            for r in self.rows:
                writer.writerow([r.text, r.label, r.identity, r.template_id])

    @classmethod
    def read_csv(cls, path: str | Path) -> "TestSuite":
        rows: list[SuiteRow] = []
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            required = {"text", "label", "identity", "template_id"}
            if reader.fieldnames is None or not required <= set(reader.fieldnames):
                raise TemplateError(f"{path}: expected columns {sorted(required)}")
            for row in reader:
                rows.append(
                    SuiteRow(
                        text=row["text"],
                        label=int(row["label"]),
                        identity=row["identity"],
                        template_id=int(row["template_id"]),
                    )
                )
        return cls(tuple(rows))


def generate(
    templates: Sequence[Template] = DEFAULT_TEMPLATES,
    lexicon: SlotLexicon = DEFAULT_SLOT_LEXICON,
) -> TestSuite:
    """Cross-product expansion of templates x identity terms x fillers
    x suffixes.

    Row order is deterministic: templates in the given order, then
    identity terms in lexicon order, then filler combinations in
    lexicographic list order, then suffixes.  When the suffix list is
    empty each filled pattern yields a single row.  ``template_id`` is
    the template's position in ``templates``.
    """
    rows: list[SuiteRow] = []
    suffixes: tuple[str | None, ...] = lexicon.suffixes or (None,)
    for template_id, template in enumerate(templates):
        slots = template.filler_slots
        word_lists = []
        for slot in slots:
            words = lexicon.words_for(slot)
            if not words:
                raise TemplateError(
                    f"template {template_id} uses {{{slot}}} but the lexicon's "
                    f"{SlotLexicon._SLOT_FIELDS[slot]} list is empty"
                )
            word_lists.append(words)
        for term in lexicon.identity_terms:
            for combo in itertools.product(*word_lists):
                filled = template.pattern.format(identity=term, **dict(zip(slots, combo)))
                for suffix in suffixes:
                    text = f"{filled} {suffix}" if suffix else filled
                    rows.append(SuiteRow(text, template.label, term, template_id))
    return TestSuite(tuple(rows))


@dataclass(frozen=True)
class BalanceReport:
    """Exact per-term label balance of a suite.

    ``violations`` lists identity terms whose positive rate differs from
    the overall rate; comparison is by integer cross-multiplication, so
    no float tolerance is involved.
    """

    total: int
    positives: int
    per_term: dict[str, tuple[int, int]]
    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def positive_rate(self) -> Fraction:
        return Fraction(self.positives, self.total)


def verify_balance(suite: TestSuite) -> BalanceReport:
    """Check Pr(label=1 | identity) == Pr(label=1) exactly, per term."""
    if not suite.rows:
        raise TemplateError("cannot verify an empty suite")
    per_term: dict[str, list[int]] = {}
    positives = 0
    for row in suite.rows:
        n_k = per_term.setdefault(row.identity, [0, 0])
        n_k[0] += 1
        n_k[1] += row.label
        positives += row.label
    total = len(suite.rows)
    violations = tuple(
        sorted(t for t, (n, k) in per_term.items() if k * total != positives * n)
    )
    return BalanceReport(
        total=total,
        positives=positives,
        per_term={t: (n, k) for t, (n, k) in sorted(per_term.items())},
        violations=violations,
    )


def load_templates(path: str | Path) -> tuple[Template, ...]:
    """Read templates from JSON: a list of {"pattern": ..., "label": ...}."""
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    if not isinstance(obj, list):
        raise TemplateError(f"{path}: expected a JSON list of templates")
    out = []
    for i, entry in enumerate(obj):
        if not isinstance(entry, dict) or set(entry) != {"pattern", "label"}:
            raise TemplateError(f"{path}: template {i} must have exactly pattern and label")
        out.append(Template(pattern=entry["pattern"], label=int(entry["label"])))
    return tuple(out)


def save_templates(templates: Sequence[Template], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([{"pattern": t.pattern, "label": t.label} for t in templates], fh, indent=2)
        fh.write("\n")


def load_slot_lexicon(path: str | Path) -> SlotLexicon:
    """Read a slot lexicon from JSON keyed by the SlotLexicon field names."""
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    if not isinstance(obj, dict):
        raise TemplateError(f"{path}: expected a JSON object")
    return SlotLexicon.from_dict(obj)
