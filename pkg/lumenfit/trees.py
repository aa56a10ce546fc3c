# (c) 2026 lumenfit authors

"""
    Binary regression trees grown by exact greedy search.

    A split is chosen among all midpoints between consecutive distinct
    values of every feature by the largest reduction of the squared
    error. Rows with x <= threshold go left. Trees are stored as flat
    arrays so prediction is a vectorized walk from the root.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .errors import ValidationError
from .utilities import append_to

logger = logging.getLogger(__name__)

__all__ = []

LEAF = -1


def training_arrays(X, y):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != len(y):
        raise ValidationError('y', len(y), 'X has {} rows, y has {}'.format(X.shape[0], len(y)))
    if len(y) < 2:
        raise ValidationError('n', len(y), 'need at least 2 rows')
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise ValidationError('X', 'nan', 'training data must be finite')
    return X, y


def _best_split(X, y, rows, min_leaf):
    """
        (gain, feature, threshold) of the best split of rows, or
        (0, LEAF, nan) when no admissible split exists.
    """
    n = len(rows)
    target = y[rows]
    total = target.sum()
    parent = total * total / n
    best = (0.0, LEAF, float('nan'))
    for feature in range(X.shape[1]):
        values = X[rows, feature]
        order = np.argsort(values, kind='stable')
        values = values[order]
        left_sum = np.cumsum(target[order])[:-1]
        left_n = np.arange(1, n)
        right_sum = total - left_sum
        right_n = n - left_n
        admissible = (values[1:] > values[:-1]) & (left_n >= min_leaf) & (right_n >= min_leaf)
        if not admissible.any():
            continue
        gains = left_sum ** 2 / left_n + right_sum ** 2 / right_n - parent
        gains = np.where(admissible, gains, -np.inf)
        position = int(np.argmax(gains))
        if gains[position] > best[0]:
            threshold = 0.5 * (values[position] + values[position + 1])
            best = (float(gains[position]), feature, threshold)
    return best


@append_to(__all__)
class RegressionTree(object):
    """
        Least-squares regression tree.

        max_depth None grows until every leaf is pure or no split of at
        least min_leaf rows per side reduces the error. gain holds the
        squared-error reduction of every internal node.
    """

    def __init__(self, max_depth=3, min_leaf=5):
        if max_depth is not None and max_depth < 1:
            raise ValidationError('max_depth', max_depth)
        if min_leaf < 1:
            raise ValidationError('min_leaf', min_leaf)
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.feature = []
        self.threshold = []
        self.left = []
        self.right = []
        self.value = []
        self.gain = []
        self.n_features = 0

    def _add_node(self, value):
        self.feature.append(LEAF)
        self.threshold.append(float('nan'))
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.value.append(value)
        self.gain.append(0.0)
        return len(self.value) - 1

    def fit(self, X, y):
        X, y = training_arrays(X, y)
        self.n_features = X.shape[1]
        self._grow(X, y, np.arange(len(y)), 0)
        for name in ('feature', 'left', 'right'):
            setattr(self, name, np.asarray(getattr(self, name), dtype=int))
        for name in ('threshold', 'value', 'gain'):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        return self

    def _grow(self, X, y, rows, depth):
        node = self._add_node(float(y[rows].mean()))
        if self.max_depth is not None and depth >= self.max_depth:
            return node
        if len(rows) < 2 * self.min_leaf or np.ptp(y[rows]) == 0:
            return node
        gain, feature, threshold = _best_split(X, y, rows, self.min_leaf)
        # rounding can leave a tiny positive gain on a flat node
        if feature == LEAF or gain <= 1e-12 * np.sum((y[rows] - y[rows].mean()) ** 2):
            return node
        goes_left = X[rows, feature] <= threshold
        self.feature[node] = feature
        self.threshold[node] = threshold
        self.gain[node] = gain
        self.left[node] = self._grow(X, y, rows[goes_left], depth + 1)
        self.right[node] = self._grow(X, y, rows[~goes_left], depth + 1)
        return node

    @property
    def n_nodes(self):
        return len(self.value)

    @property
    def depth(self):
        def walk(node):
            if self.feature[node] == LEAF:
                return 0
            return 1 + max(walk(self.left[node]), walk(self.right[node]))
        return walk(0)

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[1] != self.n_features:
            raise ValidationError('X', X.shape[1], 'tree was fitted on {} features'.format(
                self.n_features,
            ))
        nodes = np.zeros(len(X), dtype=int)
        active = self.feature[nodes] != LEAF
        while active.any():
            current = nodes[active]
            rows = np.flatnonzero(active)
            goes_left = X[rows, self.feature[current]] <= self.threshold[current]
            nodes[rows] = np.where(goes_left, self.left[current], self.right[current])
            active = self.feature[nodes] != LEAF
        return self.value[nodes]

    def feature_gains(self):
        """ Total squared-error reduction per feature. """
        gains = np.zeros(self.n_features)
        internal = self.feature != LEAF
        np.add.at(gains, self.feature[internal], self.gain[internal])
        return gains


@append_to(__all__)
@dataclass
class TreeEnsemble:
    """
        Boosted or bagged regression trees.

        A boosted ensemble predicts initial + learning_rate * sum of tree
        predictions; a bagged one predicts the mean over its trees.
        train_mse holds the training error after each boosting stage,
        starting with the constant model.
    """

    kind: str
    trees: list = field(repr=False)
    learning_rate: float
    n_trees: int
    max_depth: Optional[int]
    initial: float
    feature_names: Tuple[str, ...] = ()
    train_mse: np.ndarray = field(repr=False, default=None)
    oob_error: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ('gbm', 'bagging'):
            raise ValidationError('kind', self.kind)

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if not self.trees:
            return np.full(len(X), self.initial)
        if self.kind == 'bagging':
            return np.mean([tree.predict(X) for tree in self.trees], axis=0)
        total = np.zeros(len(X))
        for tree in self.trees:
            total += tree.predict(X)
        return self.initial + self.learning_rate * total

    def staged_predict(self, X):
        """ Boosted predictions after 0, 1, ..., n_trees stages. """
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        current = np.full(len(X), self.initial)
        yield current.copy()
        for tree in self.trees:
            current = current + self.learning_rate * tree.predict(X)
            yield current.copy()

    def feature_gains(self):
        """
            Split gains per feature, weighted by each tree's share of the
            prediction: learning_rate for boosting, 1/n for bagging.
        """
        n_features = len(self.feature_names)
        gains = np.zeros(n_features)
        if not self.trees:
            return gains
        weight = self.learning_rate if self.kind == 'gbm' else 1.0 / len(self.trees)
        for tree in self.trees:
            gains += weight * tree.feature_gains()
        return gains
