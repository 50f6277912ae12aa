"""Dataset ingestion, tokenization, and identity-signature construction.

A corpus is a sequence of labeled text samples.  Each sample gets an
:class:`IdentitySignature` describing the demographic identity terms it
mentions (plus an optional sentence-length bucket); the signature is the
conditioning variable used by the weighting stage.
"""

from __future__ import annotations

import csv
import json
import re
from bisect import bisect_left
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

# A token is a maximal run of characters that are alphanumeric or an
# apostrophe; everything else separates tokens.
_TOKEN_RE = re.compile(r"(?:[^\W_]|')+")

_MAX_PHRASE_TOKENS = 4


class DataFormatError(ValueError):
    """An input file violates the dataset or lexicon format."""


def tokenize(text: str) -> list[str]:
    """Lowercase ``text`` and split it into tokens.

    Splitting happens on every character that is neither alphanumeric nor
    an apostrophe, so hyphenated words come apart ("african-american" ->
    ["african", "american"]) while contractions stay whole ("don't").
    """
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Sample:
    """One labeled text instance."""

    id: str
    text: str
    label: int

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise ValueError(f"sample {self.id!r}: label must be 0 or 1, got {self.label!r}")
        if not self.text.strip():
            raise ValueError(f"sample {self.id!r}: text is empty after trimming")


@dataclass(frozen=True)
class IdentityLexicon:
    """Set of lowercase identity phrases, each 1..4 tokens long.

    Phrases are stored in canonical form (tokens joined by single spaces)
    so that file-level variants like "african-american" and
    "african american" collapse to one entry.
    """

    terms: tuple[str, ...]
    groups: Mapping[str, str | None]

    @classmethod
    def from_entries(cls, entries: Iterable[tuple[str, str | None]]) -> "IdentityLexicon":
        canonical: dict[str, str | None] = {}
        for phrase, group in entries:
            toks = tokenize(phrase)
            if not toks:
                raise DataFormatError(f"empty identity phrase: {phrase!r}")
            if len(toks) > _MAX_PHRASE_TOKENS:
                raise DataFormatError(
                    f"identity phrase {phrase!r} has {len(toks)} tokens (max {_MAX_PHRASE_TOKENS})"
                )
            key = " ".join(toks)
            canonical.setdefault(key, group)
        return cls(terms=tuple(sorted(canonical)), groups=canonical)

    @classmethod
    def from_terms(cls, phrases: Iterable[str]) -> "IdentityLexicon":
        return cls.from_entries((p, None) for p in phrases)

    @cached_property
    def token_index(self) -> dict[tuple[str, ...], str]:
        """Map phrase-token tuples to their canonical phrase string."""
        return {tuple(term.split(" ")): term for term in self.terms}

    @cached_property
    def max_phrase_tokens(self) -> int:
        return max((len(k) for k in self.token_index), default=0)

    def __len__(self) -> int:
        return len(self.terms)


def load_lexicon(path: str | Path) -> IdentityLexicon:
    """Read a lexicon file: one phrase per line, optional ``<tab>group``
    suffix, ``#`` starts a comment line; blank lines are skipped."""
    entries: list[tuple[str, str | None]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            phrase, _, group = line.partition("\t")
            phrase = phrase.strip().lower()
            if not phrase:
                raise DataFormatError(f"{path}, line {lineno}: empty phrase")
            entries.append((phrase, group.strip() or None))
    return IdentityLexicon.from_entries(entries)


@dataclass(frozen=True)
class IdentitySignature:
    """The realized identity information of one sample: the sorted set of
    matched lexicon phrases plus an optional length bucket.

    Signatures are value keys: two samples with equal fields compare (and
    hash) equal.
    """

    terms: tuple[str, ...]
    length_bucket: int | None = None

    def __post_init__(self) -> None:
        canonical = tuple(sorted(set(self.terms)))
        if canonical != self.terms:
            object.__setattr__(self, "terms", canonical)


def extract_identity(tokens: Sequence[str], lexicon: IdentityLexicon) -> tuple[str, ...]:
    """Find every lexicon phrase occurring as a contiguous token run.

    Scanning is left to right; at each position the longest matching
    phrase wins and consumes its tokens, so "african american" suppresses
    the contained "american".  Each phrase is reported at most once; the
    result is sorted.
    """
    index = lexicon.token_index
    if not index:
        return ()
    max_len = lexicon.max_phrase_tokens
    found: set[str] = set()
    i, n = 0, len(tokens)
    while i < n:
        hit = 0
        for span in range(min(max_len, n - i), 0, -1):
            phrase = index.get(tuple(tokens[i : i + span]))
            if phrase is not None:
                found.add(phrase)
                hit = span
                break
        i += hit or 1
    return tuple(sorted(found))


def bucketize_length(token_count: int, boundaries: Sequence[int]) -> int:
    """Return the index of the first boundary >= ``token_count``, or
    ``len(boundaries)`` when the count exceeds every boundary."""
    if token_count < 0:
        raise ValueError("token_count must be nonnegative")
    if any(b >= a for a, b in zip(boundaries[1:], boundaries)):
        raise ValueError(f"boundaries must be strictly ascending: {boundaries!r}")
    return bisect_left(list(boundaries), token_count)


def quantile_boundaries(token_counts: Sequence[int], n_buckets: int = 4) -> tuple[int, ...]:
    """Quantile-based bucket boundaries for sentence lengths.

    Returns up to ``n_buckets - 1`` strictly ascending integers; ties
    between quantiles collapse, so short-range corpora may yield fewer
    buckets.
    """
    if n_buckets < 2:
        raise ValueError("n_buckets must be >= 2")
    counts = np.asarray(token_counts)
    if counts.size == 0:
        raise ValueError("token_counts is empty")
    out: list[int] = []
    for i in range(1, n_buckets):
        b = int(np.quantile(counts, i / n_buckets))
        if not out or b > out[-1]:
            out.append(b)
    return tuple(out)


@dataclass(frozen=True)
class Dataset:
    """Sample sequence plus (optionally) a parallel signature sequence.

    Order is stable: loading the same file twice yields the same dataset.
    """

    samples: tuple[Sample, ...]
    signatures: tuple[IdentitySignature, ...] | None = None

    def __post_init__(self) -> None:
        if self.signatures is not None and len(self.signatures) != len(self.samples):
            raise ValueError(
                f"{len(self.samples)} samples but {len(self.signatures)} signatures"
            )
        seen: set[str] = set()
        for s in self.samples:
            if s.id in seen:
                raise DataFormatError(f"duplicate sample id {s.id!r}")
            seen.add(s.id)

    def __len__(self) -> int:
        return len(self.samples)

    @cached_property
    def labels(self) -> np.ndarray:
        arr = np.fromiter((s.label for s in self.samples), dtype=np.int64, count=len(self.samples))
        arr.setflags(write=False)
        return arr

    @property
    def texts(self) -> list[str]:
        return [s.text for s in self.samples]

    def with_signatures(self, signatures: Sequence[IdentitySignature]) -> "Dataset":
        return Dataset(self.samples, tuple(signatures))


def _parse_label(value: object, where: str) -> int:
    if isinstance(value, bool):
        raise DataFormatError(f"{where}: label must be 0 or 1, got {value!r}")
    if isinstance(value, int):
        if value in (0, 1):
            return value
    elif isinstance(value, str) and value.strip() in ("0", "1"):
        return int(value.strip())
    raise DataFormatError(f"{where}: label must be 0 or 1, got {value!r}")


def _load_csv(path: Path) -> list[Sample]:
    samples: list[Sample] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataFormatError(f"{path}: empty file")
        missing = {"id", "text", "label"} - set(reader.fieldnames)
        if missing:
            raise DataFormatError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            where = f"{path}, line {reader.line_num}"
            if any(row.get(c) is None for c in ("id", "text", "label")):
                raise DataFormatError(f"{where}: malformed row (too few fields)")
            label = _parse_label(row["label"], where)
            sid = row["id"].strip()
            if not sid:
                raise DataFormatError(f"{where}: empty id")
            if not row["text"].strip():
                raise DataFormatError(f"{where}: empty text")
            samples.append(Sample(sid, row["text"], label))
    return samples


def _load_jsonl(path: Path) -> list[Sample]:
    samples: list[Sample] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            where = f"{path}, line {lineno}"
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{where}: invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise DataFormatError(f"{where}: expected an object")
            missing = {"id", "text", "label"} - set(obj)
            if missing:
                raise DataFormatError(f"{where}: missing keys {sorted(missing)}")
            label = _parse_label(obj["label"], where)
            sid = obj["id"]
            if not isinstance(sid, (str, int)):
                raise DataFormatError(f"{where}: id must be a string or integer")
            text = obj["text"]
            if not isinstance(text, str) or not text.strip():
                raise DataFormatError(f"{where}: text must be a non-empty string")
            samples.append(Sample(str(sid), text, label))
    return samples


def load_dataset(path: str | Path, format: str | None = None) -> Dataset:
    """Load a dataset from CSV (header ``id,text,label``) or JSONL.

    ``format`` is "csv" or "jsonl"; when omitted it is inferred from the
    file suffix.  Rows appear in file order; labels are parsed strictly as
    0/1 and malformed rows are reported with their line number.
    """
    path = Path(path)
    if format is None:
        suffix = path.suffix.lower()
        format = {"csv": "csv", "jsonl": "jsonl", "ndjson": "jsonl"}.get(suffix.lstrip("."))
        if format is None:
            raise DataFormatError(f"{path}: cannot infer format from suffix {suffix!r}")
    if format == "csv":
        samples = _load_csv(path)
    elif format == "jsonl":
        samples = _load_jsonl(path)
    else:
        raise ValueError(f"unknown format {format!r} (expected 'csv' or 'jsonl')")
    return Dataset(tuple(samples))


def write_dataset_csv(dataset: Dataset, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "text", "label"])
        for s in dataset.samples:
            writer.writerow([s.id, s.text, s.label])


def build_signatures(
    dataset: Dataset,
    lexicon: IdentityLexicon,
    length_buckets: Sequence[int] | None = None,
) -> Dataset:
    """Attach an :class:`IdentitySignature` to every sample.

    Terms come from :func:`extract_identity`; when ``length_buckets`` is
    given each signature also carries the token-count bucket.  Samples
    matching no phrase get the empty signature, which forms its own group.
    """
    boundaries = list(length_buckets) if length_buckets is not None else None
    signatures = []
    for sample in dataset.samples:
        tokens = tokenize(sample.text)
        terms = extract_identity(tokens, lexicon)
        bucket = bucketize_length(len(tokens), boundaries) if boundaries is not None else None
        signatures.append(IdentitySignature(terms, bucket))
    return dataset.with_signatures(signatures)
