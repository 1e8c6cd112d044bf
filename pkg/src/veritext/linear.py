"""Multinomial Naive Bayes, logistic regression and a Pegasos linear SVM.

Feature matrices may be dense ``ndarray`` or ``scipy.sparse`` CSR. Labels are
integer arrays with ``Label.FAKE == 1`` as the positive class.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .corpus import DomainError, Label


class TrainingError(RuntimeError):
    """Raised when an optimizer produces a non-finite objective."""


@dataclass
class TrainLog:
    objective: list[float] = field(default_factory=list)

    @property
    def epochs(self) -> int:
        return len(self.objective)

    @property
    def final(self) -> float:
        return self.objective[-1] if self.objective else float("nan")


def as_matrix(X):
    """Accept a CSR matrix, a dense array, or a list of ``SparseVector``."""
    if sp.issparse(X):
        return sp.csr_matrix(X, dtype=np.float64)
    if isinstance(X, list) and X and hasattr(X[0], "indices"):
        from .features import sparse_rows

        return sparse_rows(X)
    return np.atleast_2d(np.asarray(X, dtype=np.float64))


def _row_vector(x, dim: int) -> np.ndarray:
    if hasattr(x, "to_dense"):
        if x.dimension != dim:
            raise DomainError(f"feature dimension {x.dimension} does not match model dimension {dim}")
        return x.to_dense()
    if sp.issparse(x):
        x = x.toarray()
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape[0] != dim:
        raise DomainError(f"feature dimension {x.shape[0]} does not match model dimension {dim}")
    return x


def _check_two_classes(y) -> np.ndarray:
    y = np.asarray(y, dtype=np.int64)
    present = set(np.unique(y).tolist())
    if present != {0, 1}:
        missing = [Label(c).name for c in (0, 1) if c not in present]
        raise DomainError(f"training labels must contain both classes; missing {missing}")
    return y


def _check_dim(X, dim: int) -> None:
    if X.shape[1] != dim:
        raise DomainError(f"feature dimension {X.shape[1]} does not match model dimension {dim}")


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    return np.exp(-np.logaddexp(0.0, -z))


# ---------------------------------------------------------------------------
# Naive Bayes


@dataclass
class NaiveBayesModel:
    log_prior: np.ndarray  # (2,) indexed by Label value
    log_likelihood: np.ndarray  # (2, V)
    alpha: float

    @property
    def dimension(self) -> int:
        return self.log_likelihood.shape[1]

    def log_scores(self, X) -> np.ndarray:
        X = as_matrix(X)
        _check_dim(X, self.dimension)
        return np.asarray(X @ self.log_likelihood.T) + self.log_prior


def nb_fit(X, y, alpha: float = 1.0) -> NaiveBayesModel:
    if not alpha > 0:
        raise DomainError(f"smoothing alpha must be positive, got {alpha}")
    X = as_matrix(X)
    y = _check_two_classes(y)
    if (X.data if sp.issparse(X) else X).min(initial=0.0) < 0:
        raise DomainError("Naive Bayes needs nonnegative count features")
    n_features = X.shape[1]
    counts = np.zeros((2, n_features))
    for c in (0, 1):
        counts[c] = np.asarray(X[y == c].sum(axis=0)).ravel()
    prior = np.bincount(y, minlength=2) / len(y)
    smoothed = counts + alpha
    log_lik = np.log(smoothed) - np.log(smoothed.sum(axis=1, keepdims=True))
    return NaiveBayesModel(np.log(prior), log_lik, float(alpha))


def nb_predict(model: NaiveBayesModel, x) -> tuple[Label, np.ndarray]:
    """Label and posterior ``[P(REAL), P(FAKE)]`` for one count vector."""
    scores = model.log_likelihood @ _row_vector(x, model.dimension) + model.log_prior
    posterior = np.exp(scores - np.logaddexp(scores[0], scores[1]))
    label = Label.FAKE if scores[1] > scores[0] else Label.REAL
    return label, posterior


def nb_predict_many(model: NaiveBayesModel, X) -> np.ndarray:
    scores = model.log_scores(X)
    return (scores[:, 1] > scores[:, 0]).astype(np.int64)


# ---------------------------------------------------------------------------
# linear models


class LinearKind(str, enum.Enum):
    LOGISTIC = "logistic"
    SVM = "svm"


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float
    kind: LinearKind
    reg: float

    @property
    def dimension(self) -> int:
        return self.weights.shape[0]

    def scores(self, X) -> np.ndarray:
        X = as_matrix(X)
        _check_dim(X, self.dimension)
        return np.asarray(X @ self.weights).ravel() + self.bias

    def predict(self, X) -> np.ndarray:
        return (self.scores(X) > 0).astype(np.int64)


def linear_predict(model: LinearModel, x) -> tuple[Label, float]:
    score = float(np.dot(_row_vector(x, model.dimension), model.weights) + model.bias)
    return (Label.FAKE if score > 0 else Label.REAL), score


def logistic_probability(score: float) -> float:
    return float(sigmoid(score))


@dataclass(frozen=True)
class LogRegParams:
    reg: float = 1e-4
    lr: float = 0.1
    epochs: int = 100
    seed: int = 42


def logreg_objective(w: np.ndarray, b: float, X, y: np.ndarray, reg: float) -> float:
    z = np.asarray(X @ w).ravel() + b
    # mean of log(1 + exp(-z)) for y=1 and log(1 + exp(z)) for y=0
    loss = np.logaddexp(0.0, np.where(y == 1, -z, z)).mean()
    return float(loss + 0.5 * reg * np.dot(w, w))


def logreg_gradient(w: np.ndarray, b: float, X, y: np.ndarray, reg: float) -> tuple[np.ndarray, float]:
    residual = sigmoid(np.asarray(X @ w).ravel() + b) - y
    n = len(y)
    grad_w = np.asarray(X.T @ residual).ravel() / n + reg * w
    return grad_w, float(residual.sum() / n)


def logreg_fit(X, y, params: LogRegParams = LogRegParams()) -> tuple[LinearModel, TrainLog]:
    """Full-batch gradient descent on L2-regularized mean cross-entropy.

    Starts from zero weights, so the run is deterministic and ``seed`` is unused.
    The bias is not regularized.
    """
    X = as_matrix(X)
    y = _check_two_classes(y).astype(np.float64)
    w = np.zeros(X.shape[1])
    b = 0.0
    log = TrainLog()
    for epoch in range(params.epochs):
        gw, gb = logreg_gradient(w, b, X, y, params.reg)
        w -= params.lr * gw
        b -= params.lr * gb
        obj = logreg_objective(w, b, X, y, params.reg)
        if not np.isfinite(obj):
            raise TrainingError(f"logistic regression objective became non-finite at epoch {epoch}")
        log.objective.append(obj)
    return LinearModel(w, b, LinearKind.LOGISTIC, params.reg), log


@dataclass(frozen=True)
class SVMParams:
    reg: float = 1e-4
    epochs: int = 20
    seed: int = 42


def svm_objective(w: np.ndarray, b: float, X, signs: np.ndarray, reg: float) -> float:
    margins = signs * (np.asarray(X @ w).ravel() + b)
    return float(0.5 * reg * np.dot(w, w) + np.maximum(0.0, 1.0 - margins).mean())


def svm_fit(X, y, params: SVMParams = SVMParams()) -> tuple[LinearModel, TrainLog]:
    """Pegasos: one sample per step, step size ``1 / (reg * t)``.

    The weight vector is kept as ``scale * v`` so the shrink step costs O(1)
    on sparse rows. The bias takes the same step but is never shrunk.
    """
    X = as_matrix(X)
    y = _check_two_classes(y)
    signs = np.where(y == Label.FAKE, 1.0, -1.0)
    n, dim = X.shape
    sparse = sp.issparse(X)
    if sparse:
        indptr, indices, data = X.indptr, X.indices, X.data
    rng = np.random.Generator(np.random.PCG64(params.seed))
    lam = params.reg
    v = np.zeros(dim)
    scale = 1.0
    b = 0.0
    t = 0
    log = TrainLog()
    for epoch in range(params.epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t)
            if sparse:
                lo, hi = indptr[i], indptr[i + 1]
                cols, vals = indices[lo:hi], data[lo:hi]
                margin = signs[i] * (scale * np.dot(v[cols], vals) + b)
            else:
                row = X[i]
                margin = signs[i] * (scale * np.dot(v, row) + b)
            shrink = 1.0 - eta * lam
            if abs(shrink) < 1e-12:
                # first step (t = 1) zeroes w exactly
                v[:] = 0.0
                scale = 1.0
            else:
                scale *= shrink
            if margin < 1.0:
                step = eta * signs[i] / scale
                if sparse:
                    v[cols] += step * vals
                else:
                    v += step * row
                b += eta * signs[i]
            if scale < 1e-9:
                v *= scale
                scale = 1.0
        w = scale * v
        obj = svm_objective(w, b, X, signs, lam)
        if not np.isfinite(obj):
            raise TrainingError(f"SVM objective became non-finite at epoch {epoch}")
        log.objective.append(obj)
    return LinearModel(scale * v, float(b), LinearKind.SVM, lam), log
