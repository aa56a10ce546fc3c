# (c) 2026 lumenfit authors

"""
    Ranking of candidate controls by importance.

    Three competing learners are fitted to the same feature matrix:
    gradient boosted trees, bagged trees and a k-nearest-neighbour
    regressor. Tree importance is the total split gain per feature; KNN
    importance is the error increase when a feature is shuffled. The
    learners are compared by cross-validated test error.
"""

import logging
from collections import OrderedDict, namedtuple

import numpy as np
import pandas as pd
from scipy.spatial import cKDTree

from .errors import ValidationError
from .linear_models import ortho_poly_basis
from .models import COVARIATES, ImportanceReport
from .trees import RegressionTree, TreeEnsemble, training_arrays
from .utilities import append_to, parallel_map, spawn_generators

logger = logging.getLogger(__name__)

__all__ = ['ModelSpec']

# fit(X, y) returns a function that predicts from a feature matrix.
ModelSpec = namedtuple('ModelSpec', ['name', 'fit'])


def _feature_names(names, width):
    if names is None:
        return tuple('x{}'.format(j + 1) for j in range(width))
    names = tuple(names)
    if len(names) != width:
        raise ValidationError('feature_names', len(names), 'expected {} names'.format(width))
    return names


def _bootstrap(rng, n):
    return rng.integers(0, n, size=n)


@append_to(__all__)
def fit_gbm(X, y, n_trees=200, max_depth=3, learning_rate=0.1, seed=0,
            min_leaf=5, subsample=1.0, feature_names=None):
    """
        Gradient boosting with squared-error loss.

        Every stage fits a tree to the current residuals and adds it with
        shrinkage learning_rate. With subsample below 1 each tree sees a
        seeded random share of the rows; otherwise the fit is
        deterministic and the staged training error never increases.
    """
    X, y = training_arrays(X, y)
    if n_trees < 1:
        raise ValidationError('n_trees', n_trees)
    if not 0 < learning_rate <= 1:
        raise ValidationError('learning_rate', learning_rate)
    if not 0 < subsample <= 1:
        raise ValidationError('subsample', subsample)
    names = _feature_names(feature_names, X.shape[1])
    initial = float(y.mean())
    prediction = np.full(len(y), initial)
    mse = [float(np.mean((y - prediction) ** 2))]
    trees = []
    if np.ptp(y) == 0:
        logger.info('Constant response, boosting adds no trees')
    else:
        rng = np.random.default_rng(seed)
        draw = max(2, int(round(subsample * len(y))))
        for _ in range(n_trees):
            rows = np.arange(len(y))
            if subsample < 1:
                rows = np.sort(rng.choice(len(y), size=draw, replace=False))
            residuals = y - prediction
            tree = RegressionTree(max_depth, min_leaf).fit(X[rows], residuals[rows])
            trees.append(tree)
            prediction = prediction + learning_rate * tree.predict(X)
            mse.append(float(np.mean((y - prediction) ** 2)))
    mse = np.asarray(mse)
    if subsample == 1:
        assert (np.diff(mse) <= 1e-12 * max(mse[0], 1.0)).all(), \
            'staged training error increased'
    logger.debug('Boosted {} trees, training MSE {:.6g} -> {:.6g}'.format(
        len(trees), mse[0], mse[-1],
    ))
    return TreeEnsemble(
        'gbm', trees, learning_rate, n_trees, max_depth, initial, names, mse,
    )


@append_to(__all__)
def fit_bagging(X, y, n_trees=100, seed=0, max_depth=None, min_leaf=5,
                sampler=_bootstrap, feature_names=None):
    """
        Equal-weight average of trees grown on resamples of the rows.

        sampler(rng, n) returns the row indices of one resample. Each tree
        draws from its own stream spawned from seed, so the result does
        not depend on the thread schedule. The out-of-bag error averages,
        for every row left out by at least one tree, the squared error of
        the mean prediction of those trees.
    """
    X, y = training_arrays(X, y)
    if n_trees < 1:
        raise ValidationError('n_trees', n_trees)
    names = _feature_names(feature_names, X.shape[1])
    n = len(y)
    if np.ptp(y) == 0:
        logger.info('Constant response, bagging adds no trees')
        return TreeEnsemble('bagging', [], 1.0, n_trees, max_depth, float(y[0]), names)

    def grow(rng):
        rows = np.asarray(sampler(rng, n), dtype=int)
        tree = RegressionTree(max_depth, min_leaf).fit(X[rows], y[rows])
        return tree, rows

    fitted = parallel_map(grow, spawn_generators(seed, n_trees))
    trees = [tree for tree, _ in fitted]
    oob_sum = np.zeros(n)
    oob_count = np.zeros(n)
    for tree, rows in fitted:
        left_out = np.ones(n, dtype=bool)
        left_out[rows] = False
        if left_out.any():
            oob_sum[left_out] += tree.predict(X[left_out])
            oob_count[left_out] += 1
    covered = oob_count > 0
    oob_error = None
    if covered.any():
        oob_error = float(np.mean((y[covered] - oob_sum[covered] / oob_count[covered]) ** 2))
    return TreeEnsemble(
        'bagging', trees, 1.0, n_trees, max_depth, float(y.mean()), names,
        oob_error=oob_error,
    )


@append_to(__all__)
def gbm_importance(ensemble):
    """ Split-gain importance of a boosted or bagged ensemble. """
    return ImportanceReport(ensemble.feature_names, ensemble.feature_gains(), ensemble.kind)


@append_to(__all__)
def knn_predictor(X, y, k=10):
    """ k-nearest-neighbour mean on standardized Euclidean distance. """
    X, y = training_arrays(X, y)
    if not 1 <= k <= len(y):
        raise ValidationError('k', k, 'k must be in 1..{}'.format(len(y)))
    centre = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    index = cKDTree((X - centre) / scale)

    def predict(points):
        points = (np.asarray(points, dtype=float) - centre) / scale
        _, neighbours = index.query(points, k=k)
        neighbours = np.asarray(neighbours).reshape(len(points), k)
        return y[neighbours].mean(axis=1)

    return predict


@append_to(__all__)
def knn_importance(X, y, k=10, seed=0, feature_names=None, repeats=1):
    """
        Permutation importance of a KNN regressor on its training points.

        importance_j = max(0, MSE with column j shuffled - base MSE),
        averaged over repeats shuffles, then normalized to 100.
    """
    X, y = training_arrays(X, y)
    names = _feature_names(feature_names, X.shape[1])
    predict = knn_predictor(X, y, k)
    base = float(np.mean((y - predict(X)) ** 2))
    streams = spawn_generators(seed, X.shape[1])

    def shuffled_error(feature):
        rng = streams[feature]
        increase = 0.0
        for _ in range(repeats):
            permuted = X.copy()
            permuted[:, feature] = rng.permutation(permuted[:, feature])
            increase += np.mean((y - predict(permuted)) ** 2) - base
        return max(0.0, increase / repeats)

    scores = parallel_map(shuffled_error, range(X.shape[1]))
    return ImportanceReport(names, scores, 'knn_permutation', {'knn_training': base})


@append_to(__all__)
def fold_indices(n, folds, seed):
    """ Seeded partition of range(n) into folds nearly equal parts. """
    if folds < 2:
        raise ValidationError('folds', folds, 'need at least 2 folds')
    if folds > n:
        raise ValidationError('folds', folds, 'more folds than rows ({})'.format(n))
    order = np.random.default_rng(seed).permutation(n)
    return np.array_split(order, folds)


@append_to(__all__)
def cv_error(spec, X, y, folds=5, seed=0):
    """
        Mean squared test error of spec pooled over a seeded k-fold split.
    """
    X, y = training_arrays(X, y)
    parts = fold_indices(len(y), folds, seed)

    def squared_error(test):
        train = np.ones(len(y), dtype=bool)
        train[test] = False
        predict = spec.fit(X[train], y[train])
        return np.sum((y[test] - predict(X[test])) ** 2)

    total = sum(parallel_map(squared_error, parts))
    error = float(total / len(y))
    logger.debug('{}-fold CV error of {}: {:.6g}'.format(folds, spec.name, error))
    return error


def mean_model():
    return ModelSpec('mean', lambda X, y: (lambda points: np.full(len(points), y.mean())))


@append_to(__all__)
def competing_models(n_trees=200, max_depth=3, learning_rate=0.1, min_leaf=5,
                     bagging_trees=100, k=10, seed=0):
    """ Model specs of the three learners plus the training-mean baseline. """
    return [
        ModelSpec('gbm', lambda X, y: fit_gbm(
            X, y, n_trees, max_depth, learning_rate, seed, min_leaf,
        ).predict),
        ModelSpec('bagging', lambda X, y: fit_bagging(
            X, y, bagging_trees, seed, None, min_leaf,
        ).predict),
        ModelSpec('knn', lambda X, y: knn_predictor(X, y, k)),
        mean_model(),
    ]


@append_to(__all__)
def feature_matrix(panel, covariates=COVARIATES, light_degree=4, regressor='log_radiance'):
    """
        Covariates plus orthonormal light polynomial terms light_poly1..d,
        over the rows where every column is observed. Returns (X, names, rows).
    """
    columns = [panel.column(name) for name in covariates]
    light = panel.column(regressor)
    complete = ~np.isnan(light)
    for values in columns:
        complete &= ~np.isnan(values)
    basis = ortho_poly_basis(light[complete], light_degree)
    names = tuple(covariates) + tuple(
        'light_poly{}'.format(j + 1) for j in range(light_degree)
    )
    X = np.column_stack([values[complete] for values in columns] + [basis])
    return X, names, complete


@append_to(__all__)
def select_features(panel, outcome, n_trees=200, max_depth=3, learning_rate=0.1,
                    min_leaf=5, bagging_trees=100, k=10, folds=5, seed=0,
                    covariates=COVARIATES, light_degree=4):
    """
        Importance of every candidate feature for outcome under the three
        learners, each report carrying the CV errors of all models.
        Returns an OrderedDict keyed by method.
    """
    X, names, complete = feature_matrix(panel, covariates, light_degree)
    y = panel.column(outcome)[complete]
    keep = ~np.isnan(y)
    X, y = X[keep], y[keep]
    logger.info('Ranking {} features for {} on {} rows'.format(len(names), outcome, len(y)))
    errors = OrderedDict(
        (spec.name, cv_error(spec, X, y, folds, seed))
        for spec in competing_models(
            n_trees, max_depth, learning_rate, min_leaf, bagging_trees, k, seed,
        )
    )
    gbm = fit_gbm(X, y, n_trees, max_depth, learning_rate, seed, min_leaf, feature_names=names)
    bagging = fit_bagging(X, y, bagging_trees, seed, None, min_leaf, feature_names=names)
    reports = OrderedDict([
        ('gbm', gbm_importance(gbm)),
        ('bagging', gbm_importance(bagging)),
        ('knn_permutation', knn_importance(X, y, k, seed, names)),
    ])
    for report in reports.values():
        report.cv_error = errors
    if bagging.oob_error is not None:
        logger.info('Bagging out-of-bag error {:.6g}'.format(bagging.oob_error))
    return reports


@append_to(__all__)
def importance_frame(reports, outcome=None):
    """ Long frame (outcome, feature, method, score) of several reports. """
    frames = [report.to_frame() for report in reports.values()]
    frame = pd.concat(frames, ignore_index=True)
    if outcome is not None:
        frame.insert(0, 'outcome', outcome)
    return frame


@append_to(__all__)
def cv_frame(reports, outcome=None):
    """ One row per model with its cross-validated error. """
    errors = next(iter(reports.values())).cv_error
    frame = pd.DataFrame({'model': list(errors), 'cv_error': list(errors.values())})
    if outcome is not None:
        frame.insert(0, 'outcome', outcome)
    return frame
