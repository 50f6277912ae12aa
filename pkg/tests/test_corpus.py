"""Tests for dataset loading, tokenization, and identity signatures."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from textdebias.corpus import (
    DataFormatError,
    Dataset,
    IdentityLexicon,
    IdentitySignature,
    Sample,
    bucketize_length,
    build_signatures,
    extract_identity,
    load_dataset,
    load_lexicon,
    quantile_boundaries,
    tokenize,
    write_dataset_csv,
)


class TestTokenize:
    def test_lowercases_and_splits_punctuation(self):
        assert tokenize("You ARE a Boy!") == ["you", "are", "a", "boy"]

    def test_hyphen_splits(self):
        assert tokenize("african-american man") == ["african", "american", "man"]

    def test_apostrophe_kept(self):
        assert tokenize("don't stop") == ["don't", "stop"]

    def test_digits_kept_underscore_splits(self):
        assert tokenize("mk2_ultra 3b") == ["mk2", "ultra", "3b"]

    def test_empty_and_punctuation_only(self):
        assert tokenize("") == []
        assert tokenize("... !! --") == []


class TestIdentityLexicon:
    def test_canonicalizes_and_dedupes(self):
        lex = IdentityLexicon.from_terms(["Gay", "gay", "african-american", "african american"])
        assert lex.terms == ("african american", "gay")

    def test_rejects_empty_phrase(self):
        with pytest.raises(DataFormatError):
            IdentityLexicon.from_terms(["gay", "  !!  "])

    def test_rejects_overlong_phrase(self):
        with pytest.raises(DataFormatError, match="5 tokens"):
            IdentityLexicon.from_terms(["one two three four five"])

    def test_file_parsing(self, tmp_path):
        path = tmp_path / "lex.txt"
        path.write_text(
            "# demographic identity phrases\n"
            "gay\tsexual_orientation\n"
            "african american\trace\n"
            "\n"
            "muslim\n",
            encoding="utf-8",
        )
        lex = load_lexicon(path)
        assert lex.terms == ("african american", "gay", "muslim")
        assert lex.groups["gay"] == "sexual_orientation"
        assert lex.groups["muslim"] is None


class TestExtractIdentity:
    LEX = IdentityLexicon.from_terms(
        ["gay", "man", "woman", "gay man", "african american", "american"]
    )

    def test_single_terms_sorted(self):
        toks = tokenize("The woman met a gay friend")
        assert extract_identity(toks, self.LEX) == ("gay", "woman")

    def test_longest_match_wins(self):
        toks = tokenize("an african american speaker")
        assert extract_identity(toks, self.LEX) == ("african american",)

    def test_match_consumes_tokens(self):
        # "gay man" swallows both tokens, so "man" alone is not reported
        toks = tokenize("a gay man spoke")
        assert extract_identity(toks, self.LEX) == ("gay man",)

    def test_duplicates_collapse(self):
        toks = tokenize("man to man, woman to woman")
        assert extract_identity(toks, self.LEX) == ("man", "woman")

    def test_no_match(self):
        assert extract_identity(tokenize("nothing here"), self.LEX) == ()

    def test_empty_lexicon(self):
        assert extract_identity(["a", "b"], IdentityLexicon.from_entries([])) == ()

    @staticmethod
    def _oracle(tokens, phrases):
        """Independent reimplementation: enumerate every matching span,
        then repeatedly take the earliest-starting span (ties: longest)
        and discard overlapping ones."""
        canon = set(phrases)
        spans = [
            (s, e)
            for s in range(len(tokens))
            for e in range(s + 1, len(tokens) + 1)
            if " ".join(tokens[s:e]) in canon
        ]
        chosen = set()
        while spans:
            start = min(sp[0] for sp in spans)
            best = max((sp for sp in spans if sp[0] == start), key=lambda sp: sp[1])
            chosen.add(" ".join(tokens[best[0] : best[1]]))
            spans = [sp for sp in spans if sp[0] >= best[1]]
        return tuple(sorted(chosen))

    @given(
        tokens=st.lists(st.sampled_from("a b c d".split()), max_size=12),
        phrase_idx=st.sets(st.integers(min_value=0, max_value=83), max_size=8),
    )
    @settings(max_examples=300, deadline=None)
    def test_matches_span_oracle(self, tokens, phrase_idx):
        alphabet = "a b c d".split()
        pool = [
            " ".join(p)
            for length in (1, 2, 3)
            for p in __import__("itertools").product(alphabet, repeat=length)
        ]
        phrases = [pool[i] for i in phrase_idx if i < len(pool)]
        if not phrases:
            return
        lex = IdentityLexicon.from_terms(phrases)
        assert extract_identity(tokens, lex) == self._oracle(tokens, lex.terms)


class TestBucketize:
    BOUNDS = [10, 25, 60]

    @pytest.mark.parametrize(
        "count,expected",
        [(0, 0), (10, 0), (11, 1), (14, 1), (25, 1), (26, 2), (60, 2), (61, 3), (999, 3)],
    )
    def test_cases(self, count, expected):
        assert bucketize_length(count, self.BOUNDS) == expected

    def test_rejects_unsorted(self):
        with pytest.raises(ValueError, match="ascending"):
            bucketize_length(5, [10, 10, 20])

    def test_rejects_negative_count(self):
        with pytest.raises(ValueError):
            bucketize_length(-1, self.BOUNDS)

    @given(count=st.integers(min_value=0, max_value=200))
    def test_first_boundary_at_least_count(self, count):
        b = bucketize_length(count, self.BOUNDS)
        if b < len(self.BOUNDS):
            assert self.BOUNDS[b] >= count
        if b > 0:
            assert self.BOUNDS[b - 1] < count

    def test_quantile_boundaries(self):
        counts = list(range(1, 101))
        bounds = quantile_boundaries(counts, 4)
        assert bounds == (25, 50, 75)
        assert quantile_boundaries([7] * 50, 4) == (7,)


class TestLoadDataset:
    def test_csv_roundtrip_preserves_order(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text(
            'id,text,label\na,"hello, world",1\nb,"line\nbreak",0\nc,plain,1\n',
            encoding="utf-8",
        )
        ds = load_dataset(path)
        assert [s.id for s in ds.samples] == ["a", "b", "c"]
        assert ds.samples[0].text == "hello, world"
        assert ds.samples[1].text == "line\nbreak"
        assert ds.labels.tolist() == [1, 0, 1]
        out = tmp_path / "copy.csv"
        write_dataset_csv(ds, out)
        assert load_dataset(out).samples == ds.samples

    def test_bad_label_reports_line(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("id,text,label\na,ok,1\nb,bad,2\n", encoding="utf-8")
        with pytest.raises(DataFormatError, match="line 3"):
            load_dataset(path)

    def test_duplicate_id_rejected(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("id,text,label\na,x,1\na,y,0\n", encoding="utf-8")
        with pytest.raises(DataFormatError, match="duplicate"):
            load_dataset(path)

    def test_missing_column(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("id,text\na,x\n", encoding="utf-8")
        with pytest.raises(DataFormatError, match="label"):
            load_dataset(path)

    def test_empty_text_rejected(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("id,text,label\na,   ,1\n", encoding="utf-8")
        with pytest.raises(DataFormatError, match="empty text"):
            load_dataset(path)

    def test_jsonl(self, tmp_path):
        path = tmp_path / "data.jsonl"
        rows = [
            {"id": "a", "text": "first", "label": 1},
            {"id": 2, "text": "second", "label": "0"},
        ]
        path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
        ds = load_dataset(path)
        assert [s.id for s in ds.samples] == ["a", "2"]
        assert ds.labels.tolist() == [1, 0]

    def test_jsonl_rejects_boolean_label(self, tmp_path):
        path = tmp_path / "data.jsonl"
        path.write_text('{"id": "a", "text": "x", "label": true}\n', encoding="utf-8")
        with pytest.raises(DataFormatError, match="label"):
            load_dataset(path)

    def test_jsonl_invalid_json_reports_line(self, tmp_path):
        path = tmp_path / "data.jsonl"
        path.write_text('{"id": "a", "text": "x", "label": 0}\n{oops\n', encoding="utf-8")
        with pytest.raises(DataFormatError, match="line 2"):
            load_dataset(path)

    def test_jsonl_large_row_count(self, tmp_path):
        path = tmp_path / "big.jsonl"
        n = 12097
        with open(path, "w", encoding="utf-8") as fh:
            for i in range(n):
                fh.write(json.dumps({"id": i, "text": f"sample {i}", "label": i % 4 == 0 and 1 or 0}) + "\n")
        assert len(load_dataset(path)) == n

    def test_unknown_suffix_needs_explicit_format(self, tmp_path):
        path = tmp_path / "data.txt"
        path.write_text("id,text,label\na,x,1\n", encoding="utf-8")
        with pytest.raises(DataFormatError, match="infer"):
            load_dataset(path)
        assert len(load_dataset(path, format="csv")) == 1


class TestSignatures:
    def test_build_signatures(self):
        lex = IdentityLexicon.from_terms(["gay", "woman"])
        ds = Dataset(
            (
                Sample("a", "She is a proud GAY woman.", 1),
                Sample("b", "nothing to see", 0),
            )
        )
        signed = build_signatures(ds, lex)
        assert signed.signatures == (
            IdentitySignature(("gay", "woman")),
            IdentitySignature(()),
        )
        # the original dataset is untouched
        assert ds.signatures is None

    def test_with_length_buckets(self):
        lex = IdentityLexicon.from_terms(["gay"])
        ds = Dataset((Sample("a", "gay " + "w " * 30, 0), Sample("b", "short gay", 1)))
        signed = build_signatures(ds, lex, length_buckets=[10, 25, 60])
        assert signed.signatures[0].length_bucket == 2
        assert signed.signatures[1].length_bucket == 0

    def test_signature_is_value_key(self):
        a = IdentitySignature(("gay", "woman"), 1)
        b = IdentitySignature(("woman", "gay", "woman"), 1)
        assert a == b and hash(a) == hash(b)
        assert a != IdentitySignature(("gay", "woman"), 2)

    def test_deterministic_across_loads(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("id,text,label\na,gay rights march,1\nb,hello,0\n", encoding="utf-8")
        lex = IdentityLexicon.from_terms(["gay"])
        first = build_signatures(load_dataset(path), lex)
        second = build_signatures(load_dataset(path), lex)
        assert first.signatures == second.signatures
        assert first.samples == second.samples

    def test_lexicon_order_irrelevant(self):
        ds = Dataset((Sample("a", "gay man and woman", 1),))
        fwd = build_signatures(ds, IdentityLexicon.from_terms(["gay man", "woman", "man"]))
        rev = build_signatures(ds, IdentityLexicon.from_terms(["man", "woman", "gay man"]))
        assert fwd.signatures == rev.signatures
