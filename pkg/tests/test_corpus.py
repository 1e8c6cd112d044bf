import re

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from veritext.corpus import (
    Corpus, DatasetError, DomainError, Label, LabelError, LabeledPost, Pipeline, SplitSpec,
    combine_and_split, corpus_stats, load_dataset, preprocess, stopword_hash, stopwords,
)

from synthetic import make_corpus, write_corpus


def _toy(n_fake, n_real, name="train"):
    posts = [LabeledPost(str(i), f"post {i}", Label.FAKE) for i in range(n_fake)]
    posts += [LabeledPost(str(n_fake + i), f"post {n_fake + i}", Label.REAL) for i in range(n_real)]
    return Corpus(posts, name)


# -- preprocessing ---------------------------------------------------------

def test_classic_example():
    toks = preprocess("The CDC currently reports 99031 deaths.", Pipeline.CLASSIC).tokens
    assert toks == ("cdc", "currently", "reports", "99031", "deaths")


def test_raw_keeps_everything():
    toks = preprocess("Check https://t.co/x #coronavirus", "raw").tokens
    assert toks == ("Check", "https://t.co/x", "#coronavirus")


def test_classic_symbols_only():
    assert preprocess("!!! ???", Pipeline.CLASSIC).tokens == ()


def test_classic_keeps_sigils():
    toks = preprocess("RT @WHO: #COVID19 isn't over", Pipeline.CLASSIC).tokens
    assert "@who" in toks and "#covid19" in toks


def test_stopword_list_is_fixed():
    words = stopwords()
    assert 150 <= len(words) <= 200
    assert "the" in words
    assert len(stopword_hash()) == 64


@settings(max_examples=200, deadline=None)
@given(st.text())
def test_classic_tokens_alphabet(text):
    stop = stopwords()
    for tok in preprocess(text, Pipeline.CLASSIC).tokens:
        assert re.fullmatch(r"[a-z0-9#@']+", tok)
        assert tok not in stop


@settings(max_examples=200, deadline=None)
@given(st.text())
def test_raw_tokens_are_substrings(text):
    for tok in preprocess(text, Pipeline.RAW).tokens:
        assert tok in text and not any(c.isspace() for c in tok)


# -- loading ---------------------------------------------------------------

def test_load_roundtrip(tmp_path):
    corpus = make_corpus(50, seed=3)
    for delim, suffix in ((",", ".csv"), ("\t", ".tsv")):
        path = write_corpus(corpus, tmp_path / f"d{suffix}", delimiter=delim)
        loaded = load_dataset(path)
        assert [p.id for p in loaded.posts] == [p.id for p in corpus.posts]
        assert [p.text for p in loaded.posts] == corpus.texts
        assert (loaded.labels == corpus.labels).all()


def test_labels_case_insensitive(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("id,tweet,label\n1,x y,FAKE\n2,z,Real\n")
    assert list(load_dataset(path).labels) == [Label.FAKE, Label.REAL]


def test_header_only(tmp_path):
    path = tmp_path / "d.tsv"
    path.write_text("id\ttweet\tlabel\n")
    assert len(load_dataset(path)) == 0


def test_bad_label_names_value(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("id,tweet,label\n1,x,fake\n2,y,maybe\n")
    with pytest.raises(LabelError, match="maybe"):
        load_dataset(path)


def test_wrong_column_count_names_line(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("id,tweet,label\n1,x,fake\n2,y\n")
    with pytest.raises(DatasetError, match=":3:"):
        load_dataset(path)


def test_missing_file():
    with pytest.raises(DatasetError, match="nope"):
        load_dataset("nope.csv")


def test_duplicate_ids_rejected():
    with pytest.raises(ValueError):
        Corpus([LabeledPost("1", "a", Label.FAKE), LabeledPost("1", "b", Label.REAL)])


# -- stats -----------------------------------------------------------------

def test_stats_single_post():
    s = corpus_stats(Corpus([LabeledPost("1", "a b c", Label.FAKE)]), Pipeline.RAW)
    assert (s.avg_words, s.max_words, s.min_words) == (3.0, 3, 3)
    assert s.fake_count + s.real_count == s.sample_count == 1


def test_stats_equal_lengths():
    posts = [LabeledPost(str(i), "w " * 7, Label(i % 2)) for i in range(9)]
    s = corpus_stats(Corpus(posts))
    assert s.avg_words == s.max_words == s.min_words == 7


def test_stats_empty():
    with pytest.raises(DomainError):
        corpus_stats(Corpus([]))


def test_classic_avg_below_raw():
    c = make_corpus(200, seed=1)
    assert corpus_stats(c, Pipeline.CLASSIC).avg_words < corpus_stats(c, Pipeline.RAW).avg_words


# -- resplit ---------------------------------------------------------------

def test_split_toy_half():
    a, b = combine_and_split(_toy(6, 4, "train"), _toy(4, 6, "validation"), SplitSpec(0.5, 42))
    assert (a.labels == Label.FAKE).sum() == 5 and (a.labels == Label.REAL).sum() == 5
    assert (b.labels == Label.FAKE).sum() == 5 and (b.labels == Label.REAL).sum() == 5


def test_split_official_arithmetic():
    # 4080 fake / 4480 real pooled
    train, val = _toy(3060, 3360, "train"), _toy(1020, 1120, "validation")
    a, b = combine_and_split(train, val, SplitSpec(0.9, 42))
    assert (len(a), len(b)) == (7704, 856)
    assert (a.labels == Label.FAKE).sum() == 3672 and (a.labels == Label.REAL).sum() == 4032


def test_split_deterministic_and_seeded():
    train, val = make_corpus(120, 0, name="train"), make_corpus(40, 1, name="validation")
    ids = lambda c: [p.id for p in c.posts]
    a1, b1 = combine_and_split(train, val, SplitSpec(0.9, 7))
    a2, b2 = combine_and_split(train, val, SplitSpec(0.9, 7))
    a3, _ = combine_and_split(train, val, SplitSpec(0.9, 8))
    assert ids(a1) == ids(a2) and ids(b1) == ids(b2)
    assert ids(a1) != ids(a3)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 40), st.integers(2, 40), st.integers(2, 40), st.integers(2, 40),
       st.floats(0.2, 0.8), st.integers(0, 2**32))
def test_split_conserves_posts(f1, r1, f2, r2, ratio, seed):
    train, val = _toy(f1, r1, "train"), _toy(f2, r2, "validation")
    try:
        a, b = combine_and_split(train, val, SplitSpec(ratio, seed))
    except DomainError:
        return
    out = sorted(p.id for p in a.posts + b.posts)
    expected = sorted([f"train:{p.id}" for p in train.posts] + [f"validation:{p.id}" for p in val.posts])
    assert out == expected
    for label, n in ((Label.FAKE, f1 + f2), (Label.REAL, r1 + r2)):
        assert abs((a.labels == label).sum() - ratio * n) <= 1


def test_split_empty_side():
    with pytest.raises(DomainError):
        combine_and_split(_toy(1, 5), _toy(0, 5, "validation"), SplitSpec(0.9, 1))


def test_split_spec_bounds():
    for bad in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            SplitSpec(bad, 1)
