import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from veritext.corpus import DomainError, Label
from veritext.features import Vocabulary, count_matrix, count_vector
from veritext.gradcheck import check_logreg
from veritext.linear import (
    LinearKind, LinearModel, LogRegParams, SVMParams, linear_predict, logistic_probability, logreg_fit,
    logreg_objective, nb_fit, nb_predict, nb_predict_many, svm_fit, svm_objective,
)

TOY = [("cheap cure miracle", Label.FAKE), ("cdc reports deaths", Label.REAL)]


def _toy_nb(alpha=1.0):
    docs = [t.split() for t, _ in TOY]
    vocab = Vocabulary.build(docs)
    X = count_matrix(vocab, docs)
    return vocab, nb_fit(X, [l for _, l in TOY], alpha)


def brute_force_posterior(docs, labels, query, alpha):
    """Bayes' rule written out token by token, no matrix algebra."""
    vocab = sorted({t for d in docs for t in d})
    scores = {}
    for c in (Label.REAL, Label.FAKE):
        class_docs = [d for d, l in zip(docs, labels) if l == c]
        total = sum(len(d) for d in class_docs)
        p = math.log(len(class_docs) / len(docs))
        for tok in query:
            if tok not in vocab:
                continue
            count = sum(d.count(tok) for d in class_docs)
            p += math.log((count + alpha) / (total + alpha * len(vocab)))
        scores[c] = p
    z = max(scores.values())
    norm = sum(math.exp(s - z) for s in scores.values())
    return np.array([math.exp(scores[Label.REAL] - z) / norm, math.exp(scores[Label.FAKE] - z) / norm])


# -- Naive Bayes -------------------------------------------------------------

def test_nb_toy_prediction():
    vocab, model = _toy_nb()
    label, post = nb_predict(model, count_vector(vocab, ["cheap", "cure"]))
    assert label is Label.FAKE
    expected = brute_force_posterior([t.split() for t, _ in TOY], [l for _, l in TOY], ["cheap", "cure"], 1.0)
    assert np.abs(post - expected).max() <= 1e-12


def test_nb_model_invariants():
    _, model = _toy_nb()
    assert abs(np.exp(model.log_prior).sum() - 1) <= 1e-12
    assert np.allclose(np.exp(model.log_likelihood).sum(axis=1), 1, atol=1e-9)


def test_nb_rejects_single_class_and_bad_alpha():
    X = np.array([[1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(DomainError):
        nb_fit(X, [Label.FAKE, Label.FAKE])
    with pytest.raises(DomainError):
        nb_fit(X, [Label.FAKE, Label.REAL], alpha=0.0)


def test_nb_large_alpha_goes_to_prior():
    docs = ["a b c", "a a", "b c d", "d d"]
    vocab = Vocabulary.build([d.split() for d in docs])
    y = [Label.FAKE, Label.FAKE, Label.FAKE, Label.REAL]
    model = nb_fit(count_matrix(vocab, [d.split() for d in docs]), y, alpha=1e6)
    _, post = nb_predict(model, count_vector(vocab, ["a", "b"]))
    assert np.allclose(post, [0.25, 0.75], atol=1e-3)


def test_nb_zero_vector_uses_prior():
    model = nb_fit(np.array([[1.0, 0], [0, 1.0], [1.0, 1.0]]), [Label.FAKE, Label.REAL, Label.REAL])
    assert nb_predict(model, np.zeros(2))[0] is Label.REAL
    model = nb_fit(np.array([[1.0, 0], [0, 1.0]]), [Label.FAKE, Label.REAL])
    label, post = nb_predict(model, np.zeros(2))
    assert label is Label.REAL and post[0] == post[1]  # tie goes to REAL


def test_nb_dimension_mismatch():
    _, model = _toy_nb()
    with pytest.raises(DomainError):
        nb_predict(model, np.zeros(model.dimension + 1))


corpora = st.lists(
    st.tuples(st.lists(st.sampled_from("abcdef"), min_size=1, max_size=6), st.sampled_from([0, 1])),
    min_size=2, max_size=20,
).filter(lambda rows: len({l for _, l in rows}) == 2)


@settings(max_examples=100, deadline=None)
@given(corpora, st.lists(st.sampled_from("abcdefz"), max_size=8), st.floats(0.1, 5.0))
def test_nb_matches_brute_force(rows, query, alpha):
    docs = [d for d, _ in rows]
    labels = [Label(l) for _, l in rows]
    vocab = Vocabulary.build(docs)
    model = nb_fit(count_matrix(vocab, docs), labels, alpha)
    label, post = nb_predict(model, count_vector(vocab, query))
    assert abs(post.sum() - 1) <= 1e-12
    assert np.abs(post - brute_force_posterior(docs, labels, query, alpha)).max() <= 1e-12


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.integers(0, 4), min_size=3, max_size=3), min_size=1, max_size=5))
def test_nb_count_scaling_equal_priors(queries):
    X = np.array([[3, 1, 0], [2, 0, 1], [0, 2, 3], [1, 1, 2]], dtype=float)
    model = nb_fit(X, [1, 1, 0, 0])
    Q = np.array(queries, dtype=float)
    base = nb_predict_many(model, Q)
    for k in (2, 5):
        assert np.array_equal(nb_predict_many(model, k * Q), base)


# -- logistic regression -----------------------------------------------------

SEP_X = np.array([[-1.0], [1.0]])
SEP_Y = np.array([Label.REAL, Label.FAKE])


def test_logreg_zero_init_probability():
    model, _ = logreg_fit(SEP_X, SEP_Y, LogRegParams(epochs=0))
    assert logistic_probability(linear_predict(model, [5.0])[1]) == 0.5


def test_logreg_separable():
    model, log = logreg_fit(SEP_X, SEP_Y, LogRegParams())
    assert np.array_equal(model.predict(SEP_X), SEP_Y)
    assert log.epochs == 100 == len(log.objective)


def test_logreg_gradient_finite_differences():
    for seed in range(5):
        assert all(r.passed for r in check_logreg(seed))


def test_logreg_objective_monotone_below_bound():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(30, 5))
    y = (X[:, 0] + 0.5 * rng.normal(size=30) > 0).astype(int)
    reg = 1e-3
    lr = 0.25 / ((X * X).sum(axis=1).max() + reg)
    _, log = logreg_fit(X, y, LogRegParams(reg=reg, lr=lr, epochs=200))
    assert np.all(np.diff(log.objective) <= 0)
    assert log.final == pytest.approx(logreg_objective(*_fit_wb(X, y, reg, lr), X, y, reg))


def _fit_wb(X, y, reg, lr):
    m, _ = logreg_fit(X, y, LogRegParams(reg=reg, lr=lr, epochs=200))
    return m.weights, m.bias


def test_logreg_deterministic():
    X = np.random.default_rng(0).normal(size=(20, 3))
    y = np.arange(20) % 2
    a, _ = logreg_fit(X, y)
    b, _ = logreg_fit(X, y)
    assert np.array_equal(a.weights, b.weights) and a.bias == b.bias


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_logreg_divergence_raises():
    from veritext.linear import TrainingError
    X = np.array([[1e200], [-1e200]])
    with pytest.raises(TrainingError, match="epoch"):
        logreg_fit(X, [1, 0], LogRegParams(lr=1e10, epochs=5))


# -- SVM ---------------------------------------------------------------------

def test_svm_separable():
    model, log = svm_fit(SEP_X, SEP_Y, SVMParams())
    assert np.array_equal(model.predict(SEP_X), SEP_Y)
    assert log.epochs == 20


def test_svm_scaling_keeps_labels():
    m1, _ = svm_fit(SEP_X, SEP_Y)
    m2, _ = svm_fit(2 * SEP_X, SEP_Y)
    assert np.array_equal(m1.predict(SEP_X), m2.predict(2 * SEP_X))


def test_svm_sparse_matches_dense():
    import scipy.sparse as sp
    rng = np.random.default_rng(2)
    X = rng.normal(size=(40, 6)) * (rng.random((40, 6)) < 0.4)
    y = (X.sum(axis=1) > 0).astype(int)
    y[0], y[1] = 0, 1
    d, _ = svm_fit(X, y, SVMParams(reg=1e-2, epochs=5))
    s, _ = svm_fit(sp.csr_matrix(X), y, SVMParams(reg=1e-2, epochs=5))
    assert np.allclose(d.weights, s.weights, rtol=1e-10, atol=1e-12)
    assert d.bias == pytest.approx(s.bias, rel=1e-10)


def test_svm_objective_reasonable():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(200, 4))
    y = (X @ np.array([1.0, -2.0, 0.5, 0.0]) > 0).astype(int)
    model, log = svm_fit(X, y, SVMParams(reg=1e-2, epochs=30))
    signs = np.where(y == 1, 1.0, -1.0)
    assert log.final == pytest.approx(svm_objective(model.weights, model.bias, X, signs, 1e-2))
    assert (model.predict(X) == y).mean() > 0.95


def test_svm_zero_vector_margin_is_bias():
    model = LinearModel(np.array([1.0, 2.0]), 0.0, LinearKind.SVM, 1e-4)
    assert linear_predict(model, np.zeros(2)) == (Label.REAL, 0.0)


# -- prediction --------------------------------------------------------------

def test_linear_predict_examples():
    zero = LinearModel(np.zeros(2), 0.0, LinearKind.LOGISTIC, 0.0)
    assert linear_predict(zero, [4.0, -1.0]) == (Label.REAL, 0.0)
    assert logistic_probability(0.0) == 0.5
    hand = LinearModel(np.array([1.0, -1.0]), 0.0, LinearKind.LOGISTIC, 0.0)
    assert linear_predict(hand, [3.0, 1.0]) == (Label.FAKE, 2.0)


@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3), st.floats(-5, 5),
       st.lists(st.floats(-10, 10), min_size=3, max_size=3))
def test_linear_sign_invariance(w, b, x):
    m1 = LinearModel(np.array(w), b, LinearKind.SVM, 0.0)
    m2 = LinearModel(2 * np.array(w), 2 * b, LinearKind.SVM, 0.0)
    assert linear_predict(m1, x)[0] == linear_predict(m2, x)[0]
