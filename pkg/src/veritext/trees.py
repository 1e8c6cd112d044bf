"""CART trees, bagged random forests and Newton-boosted trees.

Trees are stored as flat node arrays. A row is routed left when
``x[feature] <= threshold``. Split thresholds are midpoints between
consecutive distinct observed values; entries absent from a sparse row take
part as 0.0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.sparse as sp

from .corpus import DomainError, Label
from .linear import TrainLog, TrainingError, as_matrix, sigmoid

LEAF = -1


@dataclass
class Tree:
    feature: np.ndarray  # int64, LEAF for leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    # per-node training diagnostics, not needed for prediction
    impurity: np.ndarray = field(default=None, repr=False)
    weight: np.ndarray = field(default=None, repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] == LEAF

    def depth(self) -> int:
        def walk(node):
            if self.feature[node] == LEAF:
                return 0
            return 1 + max(walk(self.left[node]), walk(self.right[node]))

        return walk(0)

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by every row of ``X``."""
        X = as_matrix(X)
        if sp.issparse(X):
            X.sort_indices()
            return _apply_csr(X.indptr.astype(np.int64), X.indices.astype(np.int64), X.data,
                              self.feature, self.threshold, self.left, self.right)
        return _apply_dense(np.ascontiguousarray(X), self.feature, self.threshold, self.left, self.right)

    def predict_value(self, X) -> np.ndarray:
        return self.value[self.apply(X)]


@numba.njit(cache=True)
def _apply_dense(X, feature, threshold, left, right):
    out = np.empty(X.shape[0], dtype=np.int64)
    for i in range(X.shape[0]):
        node = 0
        while feature[node] != LEAF:
            node = left[node] if X[i, feature[node]] <= threshold[node] else right[node]
        out[i] = node
    return out


@numba.njit(cache=True)
def _apply_csr(indptr, indices, data, feature, threshold, left, right):
    out = np.empty(indptr.shape[0] - 1, dtype=np.int64)
    for i in range(out.shape[0]):
        lo, hi = indptr[i], indptr[i + 1]
        node = 0
        while feature[node] != LEAF:
            f = feature[node]
            k = lo + np.searchsorted(indices[lo:hi], f)
            v = data[k] if k < hi and indices[k] == f else 0.0
            node = left[node] if v <= threshold[node] else right[node]
        out[i] = node
    return out


class _TreeBuilder:
    def __init__(self):
        self.feature, self.threshold, self.left, self.right = [], [], [], []
        self.value, self.impurity, self.weight = [], [], []

    def add(self, value: float, impurity: float, weight: float) -> int:
        self.feature.append(LEAF)
        self.threshold.append(0.0)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.value.append(value)
        self.impurity.append(impurity)
        self.weight.append(weight)
        return len(self.feature) - 1

    def split(self, node: int, feature: int, threshold: float, left: int, right: int) -> None:
        self.feature[node] = feature
        self.threshold[node] = threshold
        self.left[node] = left
        self.right[node] = right

    def build(self) -> Tree:
        return Tree(
            np.array(self.feature, dtype=np.int64),
            np.array(self.threshold, dtype=np.float64),
            np.array(self.left, dtype=np.int64),
            np.array(self.right, dtype=np.int64),
            np.array(self.value, dtype=np.float64),
            np.array(self.impurity, dtype=np.float64),
            np.array(self.weight, dtype=np.float64),
        )


# ---------------------------------------------------------------------------
# split search

GINI, NEWTON = 0, 1


class _Columns:
    """Column-major copy of the training matrix with every column sorted by value.

    Dense inputs store every entry; sparse inputs store only the nonzeros and
    the zero rows of a column are handled as one implicit group.
    """

    def __init__(self, X):
        n, self.n_features = X.shape
        self.n_rows = n
        if sp.issparse(X):
            csc = sp.csc_matrix(X)
            csc.sum_duplicates()
            ptr, rows, vals = csc.indptr.astype(np.int64), csc.indices.astype(np.int64), csc.data
            csr = sp.csr_matrix(X)
            csr.sum_duplicates()
            self.row_ptr, self.row_idx = csr.indptr.astype(np.int64), csr.indices.astype(np.int64)
            self.sparse = True
        else:
            X = np.asarray(X, dtype=np.float64)
            ptr = np.arange(0, n * self.n_features + 1, n, dtype=np.int64)
            rows = np.tile(np.arange(n, dtype=np.int64), self.n_features)
            vals = X.T.ravel().copy()
            self.row_ptr = self.row_idx = None
            self.sparse = False
        col = np.repeat(np.arange(self.n_features), np.diff(ptr))
        order = np.lexsort((rows, vals, col))
        self.col_ptr, self.rows, self.vals = ptr, rows[order], np.ascontiguousarray(vals[order], dtype=np.float64)

    def node_features(self, rows: np.ndarray) -> np.ndarray:
        """Features that may vary inside the node: every feature for dense
        input, the features with a nonzero in some node row for sparse input."""
        if not self.sparse:
            return np.arange(self.n_features, dtype=np.int64)
        return _present_features(self.row_ptr, self.row_idx, rows, self.n_features)

    def column_values(self, feature: int, rows: np.ndarray) -> np.ndarray:
        return _column_values(self.col_ptr, self.rows, self.vals, feature, rows, self.n_rows)


@numba.njit(cache=True)
def _present_features(row_ptr, row_idx, rows, n_features):
    seen = np.zeros(n_features, dtype=np.bool_)
    for r in rows:
        for j in range(row_ptr[r], row_ptr[r + 1]):
            seen[row_idx[j]] = True
    return np.flatnonzero(seen)


@numba.njit(cache=True)
def _column_values(col_ptr, col_rows, col_vals, feature, rows, n_rows):
    full = np.zeros(n_rows)
    for j in range(col_ptr[feature], col_ptr[feature + 1]):
        full[col_rows[j]] = col_vals[j]
    out = np.empty(rows.shape[0])
    for i in range(rows.shape[0]):
        out[i] = full[rows[i]]
    return out


@numba.njit(cache=True)
def _split_score(criterion, l0, l1, r0, r1, reg, min_leaf, cl, cr):
    """Score to minimize; +inf marks an inadmissible split."""
    if criterion == 0:
        if cl < min_leaf or cr < min_leaf:
            return np.inf
        return 2.0 * l1 * (l0 - l1) / l0 + 2.0 * r1 * (r0 - r1) / r0
    denom = l1 + r1 + reg
    gain = 0.5 * (l0 * l0 / (l1 + reg) + r0 * r0 / (r1 + reg) - (l0 + r0) * (l0 + r0) / denom)
    if not np.isfinite(gain):
        return np.inf
    return -gain


@numba.njit(cache=True)
def _best_split(col_ptr, col_rows, col_vals, in_node, stats, counts, feats,
                total0, total1, total_count, criterion, reg, min_leaf):
    """Scan the presorted columns in ``feats`` for the lowest-scoring split.

    ``stats`` holds two additive statistics per row (weight and weighted
    positives for Gini; gradient and hessian for Newton) and ``counts`` the
    row multiplicities used for the ``min_leaf`` rule. Ties keep the first
    candidate in (feature order, ascending threshold).
    """
    best_score = np.inf
    best_feat = -1
    best_thr = 0.0
    for fi in range(feats.shape[0]):
        f = feats[fi]
        # in-node explicit entries: sums, to derive the implicit zero group
        nz0 = 0.0
        nz1 = 0.0
        nzc = 0.0
        for j in range(col_ptr[f], col_ptr[f + 1]):
            r = col_rows[j]
            if in_node[r]:
                nz0 += stats[r, 0]
                nz1 += stats[r, 1]
                nzc += counts[r]
        zc = total_count - nzc
        has_zero = zc > 0.5
        z0 = total0 - nz0
        z1 = total1 - nz1
        l0 = 0.0
        l1 = 0.0
        lc = 0.0
        started = False
        prev = 0.0
        zero_done = not has_zero
        j = col_ptr[f]
        end = col_ptr[f + 1]
        while True:
            # next group in ascending order: implicit zeros go before the first value >= 0
            take_zero = False
            while j < end and not in_node[col_rows[j]]:
                j += 1
            if not zero_done and (j >= end or col_vals[j] >= 0.0):
                take_zero = True
            elif j >= end:
                break
            if take_zero:
                v = 0.0
                s0, s1, sc = z0, z1, zc
                zero_done = True
            else:
                r = col_rows[j]
                v = col_vals[j]
                s0, s1, sc = stats[r, 0], stats[r, 1], counts[r]
                j += 1
            if started and v > prev:
                score = _split_score(criterion, l0, l1, total0 - l0, total1 - l1, reg, min_leaf,
                                     lc, total_count - lc)
                if score < best_score:
                    thr = (prev + v) / 2.0
                    if thr >= v:
                        thr = prev
                    best_score = score
                    best_feat = f
                    best_thr = thr
            l0 += s0
            l1 += s1
            lc += sc
            prev = v
            started = True
    return best_feat, best_thr, best_score


class _SplitFinder:
    def __init__(self, X, stats, counts, criterion, reg=0.0, min_leaf=1):
        self.cols = X if isinstance(X, _Columns) else _Columns(X)
        self.stats = np.ascontiguousarray(stats, dtype=np.float64)
        self.counts = np.ascontiguousarray(counts, dtype=np.float64)
        self.criterion = criterion
        self.reg = float(reg)
        self.min_leaf = float(min_leaf)
        self.in_node = np.zeros(self.cols.n_rows, dtype=np.bool_)

    def best(self, rows: np.ndarray, feats: np.ndarray):
        """``(feature, threshold, score)`` or ``None`` when no admissible split exists."""
        if not len(feats):
            return None
        self.in_node[rows] = True
        t0, t1 = self.stats[rows].sum(axis=0)
        tc = self.counts[rows].sum()
        c = self.cols
        f, thr, score = _best_split(c.col_ptr, c.rows, c.vals, self.in_node, self.stats, self.counts,
                                    np.asarray(feats, dtype=np.int64), t0, t1, tc,
                                    self.criterion, self.reg, self.min_leaf)
        self.in_node[rows] = False
        if f < 0 or not np.isfinite(score):
            return None
        return int(f), float(thr), float(score)

    def partition(self, rows: np.ndarray, feature: int, threshold: float):
        go_left = self.cols.column_values(feature, rows) <= threshold
        return rows[go_left], rows[~go_left]


def gini(pos: float, n: float) -> float:
    if n <= 0:
        return 0.0
    p = pos / n
    return 2.0 * p * (1.0 - p)


def newton_gain(GL, HL, GR, HR, reg):
    return 0.5 * (GL**2 / (HL + reg) + GR**2 / (HR + reg) - (GL + GR) ** 2 / (HL + HR + reg))


# ---------------------------------------------------------------------------
# CART


@dataclass(frozen=True)
class TreeParams:
    max_depth: int | None = None
    min_leaf: int = 1
    max_features: int | None = None  # None means every feature
    seed: int = 42


def _cart(cols: _Columns, y, weights, params: TreeParams, rng) -> Tree:
    n_features = cols.n_features
    m = n_features if params.max_features is None else params.max_features
    if not 1 <= m <= n_features:
        raise DomainError(f"feature subset size {m} outside [1, {n_features}]")
    stats = np.column_stack([weights, weights * y]).astype(np.float64)
    finder = _SplitFinder(cols, stats, weights, GINI, min_leaf=params.min_leaf)
    builder = _TreeBuilder()
    rows = np.flatnonzero(weights > 0)
    w_total, w_pos = stats[rows].sum(axis=0)
    root = builder.add(w_pos / w_total, gini(w_pos, w_total), w_total)
    stack = [(root, rows, 0)]
    while stack:
        node, rows, depth = stack.pop()
        pure = builder.impurity[node] == 0.0
        deep = params.max_depth is not None and depth >= params.max_depth
        if pure or deep or builder.weight[node] < 2 * params.min_leaf:
            continue
        candidates = cols.node_features(rows)
        if m < n_features:
            candidates = candidates[rng.permutation(len(candidates))]
        found = None
        # keep drawing blocks of m features until one of them admits a split
        for start in range(0, len(candidates), m):
            found = finder.best(rows, candidates[start:start + m])
            if found is not None:
                break
        if found is None:
            continue
        feature, threshold, _ = found
        left_rows, right_rows = finder.partition(rows, feature, threshold)
        kids = []
        for part in (left_rows, right_rows):
            w, p = stats[part].sum(axis=0)
            kids.append(builder.add(p / w, gini(p, w), w))
        builder.split(node, feature, threshold, kids[0], kids[1])
        # right pushed first so the left subtree is numbered first
        stack.append((kids[1], right_rows, depth + 1))
        stack.append((kids[0], left_rows, depth + 1))
    return builder.build()


def tree_fit(X, y, params: TreeParams = TreeParams(), sample_weight=None) -> Tree:
    """Greedy Gini CART; leaves hold the positive-class (FAKE) fraction."""
    X = as_matrix(X)
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] == 0:
        raise DomainError("tree_fit needs at least one sample")
    weights = np.ones(len(y)) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
    rng = np.random.Generator(np.random.PCG64(params.seed))
    return _cart(_Columns(X), y, weights, params, rng)


# ---------------------------------------------------------------------------
# random forest


@dataclass
class ForestModel:
    trees: list[Tree]
    seeds: list[int]
    max_features: int
    n_features: int

    def scores(self, X) -> np.ndarray:
        X = as_matrix(X)
        if X.shape[1] != self.n_features:
            raise DomainError(f"feature dimension {X.shape[1]} does not match model dimension {self.n_features}")
        total = np.zeros(X.shape[0])
        for tree in self.trees:
            total += tree.predict_value(X)
        return total / len(self.trees)

    def predict(self, X) -> np.ndarray:
        return (self.scores(X) > 0.5).astype(np.int64)


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int | None = None
    max_features: int | None = None  # None means ceil(sqrt(D))
    bootstrap: bool = True
    min_leaf: int = 1
    seed: int = 42


def tree_seeds(master: int, count: int) -> list[int]:
    children = np.random.SeedSequence(master).spawn(count)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


def forest_fit(X, y, params: ForestParams = ForestParams()) -> ForestModel:
    X = as_matrix(X)
    y = np.asarray(y, dtype=np.float64)
    n, dim = X.shape
    if n == 0:
        raise DomainError("forest_fit needs at least one sample")
    m = params.max_features or math.ceil(math.sqrt(dim))
    seeds = tree_seeds(params.seed, params.n_trees)
    cols = _Columns(X)
    trees = []
    for seed in seeds:
        rng = np.random.Generator(np.random.PCG64(seed))
        if params.bootstrap:
            weights = np.bincount(rng.integers(0, n, size=n), minlength=n).astype(np.float64)
        else:
            weights = np.ones(n)
        tp = TreeParams(params.max_depth, params.min_leaf, m, seed)
        trees.append(_cart(cols, y, weights, tp, rng))
    return ForestModel(trees, seeds, m, dim)


# ---------------------------------------------------------------------------
# gradient boosting


@dataclass
class BoostedModel:
    base_score: float
    trees: list[Tree]
    learning_rate: float
    reg: float
    n_features: int

    def margin(self, X) -> np.ndarray:
        X = as_matrix(X)
        if X.shape[1] != self.n_features:
            raise DomainError(f"feature dimension {X.shape[1]} does not match model dimension {self.n_features}")
        out = np.full(X.shape[0], self.base_score)
        for tree in self.trees:
            out += self.learning_rate * tree.predict_value(X)
        return out

    def scores(self, X) -> np.ndarray:
        return sigmoid(self.margin(X))

    def predict(self, X) -> np.ndarray:
        return (self.margin(X) > 0).astype(np.int64)


@dataclass(frozen=True)
class BoostParams:
    rounds: int = 100
    learning_rate: float = 0.1
    max_depth: int = 3
    reg: float = 1.0
    seed: int = 42


def logistic_loss(margin: np.ndarray, y: np.ndarray) -> float:
    return float(np.logaddexp(0.0, np.where(y == 1, -margin, margin)).mean())


def _newton_tree(cols: _Columns, grad, hess, params: BoostParams) -> tuple[Tree, list[tuple[int, np.ndarray]]]:
    stats = np.column_stack([grad, hess])
    finder = _SplitFinder(cols, stats, np.ones(len(grad)), NEWTON, reg=params.reg)
    builder = _TreeBuilder()
    all_rows = np.arange(cols.n_rows)
    G, H = stats.sum(axis=0)
    root = builder.add(-G / (H + params.reg), 0.0, H)
    stack = [(root, all_rows, 0)]
    leaves = []
    while stack:
        node, rows, depth = stack.pop()
        found = None
        if depth < params.max_depth and len(rows) >= 2:
            found = finder.best(rows, cols.node_features(rows))
        if found is None or not -found[2] > 0:
            leaves.append((node, rows))
            continue
        feature, threshold, score = found
        left_rows, right_rows = finder.partition(rows, feature, threshold)
        kids = []
        for part in (left_rows, right_rows):
            g, h = stats[part].sum(axis=0)
            kids.append(builder.add(-g / (h + params.reg), 0.0, h))
        builder.impurity[node] = -score  # split gain
        builder.split(node, feature, threshold, kids[0], kids[1])
        stack.append((kids[1], right_rows, depth + 1))
        stack.append((kids[0], left_rows, depth + 1))
    return builder.build(), leaves


def boost_fit(X, y, params: BoostParams = BoostParams()) -> tuple[BoostedModel, TrainLog]:
    """Second-order boosting on the logistic loss.

    Leaf weight is ``-G / (H + reg)``; splits maximize the regularized gain.
    The log records the mean training loss after every round.
    """
    if not 0.0 < params.learning_rate <= 1.0:
        raise DomainError(f"learning rate must be in (0, 1], got {params.learning_rate}")
    X = as_matrix(X)
    y = np.asarray(y, dtype=np.float64)
    pos = float((y == Label.FAKE).sum())
    neg = len(y) - pos
    if pos == 0 or neg == 0:
        raise DomainError("boosting needs both classes in the training labels")
    base = math.log(pos / neg)
    margin = np.full(len(y), base)
    cols = _Columns(X)
    trees, log = [], TrainLog()
    for rnd in range(params.rounds):
        p = sigmoid(margin)
        tree, leaves = _newton_tree(cols, p - y, p * (1.0 - p), params)
        for node, rows in leaves:
            margin[rows] += params.learning_rate * tree.value[node]
        loss = logistic_loss(margin, y)
        if not np.isfinite(loss):
            raise TrainingError(f"boosting loss became non-finite at round {rnd}")
        trees.append(tree)
        log.objective.append(loss)
    return BoostedModel(base, trees, params.learning_rate, params.reg, X.shape[1]), log


def ensemble_predict(model: ForestModel | BoostedModel, x) -> tuple[Label, float]:
    """Label and score for one row; forest score is the mean leaf probability,
    boosted score the sigmoid of the additive margin."""
    X = as_matrix(x.to_dense() if hasattr(x, "to_dense") else x)
    if isinstance(model, ForestModel):
        score = float(model.scores(X)[0])
        return (Label.FAKE if score > 0.5 else Label.REAL), score
    margin = float(model.margin(X)[0])
    return (Label.FAKE if margin > 0 else Label.REAL), float(sigmoid(margin))
