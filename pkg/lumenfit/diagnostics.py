# (c) 2026 lumenfit authors

"""
    Residual diagnostics: spatial dependence and serial correlation.

    Spatial weights are built between light cluster sites and expanded to
    the observation level, so the tests apply to child-level residuals
    of a pooled fit. Serial correlation is tested on cluster-by-round
    means, the level at which the survey forms a panel.
"""

import logging
from dataclasses import replace

import numpy as np
import pandas as pd
from scipy import sparse

from .distributions import chi2_sf, f_sf, normal_sf
from .errors import NotComputable, ValidationError
from .geo_merge import distance_matrix
from .linear_models import design_matrix, fit_ols, ols
from .models import SpatialWeights, TestResult
from .utilities import append_to, parallel_map, spawn_generators

logger = logging.getLogger(__name__)

__all__ = []


@append_to(__all__)
def build_weights(sites, scheme='knn', k=5, cutoff_km=None, row_standardize=True):
    """
        Spatial weights between sites, a frame with cluster_id, lat, lon.

        scheme "knn" links every site to its k nearest other sites, ties
        going to the lower row; "inverse_distance" weights every other
        site within cutoff_km by 1/d. Sites without neighbours keep a zero
        row and are listed as isolated.
    """
    n = len(sites)
    if n < 2:
        raise ValidationError('sites', n, 'spatial weights need at least 2 sites')
    ids = sites['cluster_id'].to_numpy()
    distances = distance_matrix(sites, sites)
    np.fill_diagonal(distances, np.inf)
    if scheme == 'knn':
        if k < 1:
            raise ValidationError('k', k)
        if k > n - 1:
            logger.warning('Only {} other sites, using {} neighbours instead of {}'.format(
                n - 1, n - 1, k,
            ))
            k = n - 1
        neighbours = np.argsort(distances, axis=1, kind='stable')[:, :k]
        rows = np.repeat(np.arange(n), k)
        matrix = sparse.csr_matrix(
            (np.ones(n * k), (rows, neighbours.ravel())), shape=(n, n),
        )
        parameter = k
    elif scheme == 'inverse_distance':
        if cutoff_km is None or not cutoff_km > 0:
            raise ValidationError('cutoff_km', cutoff_km)
        if (distances == 0).any():
            first = np.argwhere(distances == 0)[0]
            raise ValidationError('sites', ids[first[0]], 'sites {} and {} coincide'.format(
                ids[first[0]], ids[first[1]],
            ))
        within = distances <= cutoff_km
        with np.errstate(divide='ignore'):
            matrix = sparse.csr_matrix(np.where(within, 1.0 / distances, 0.0))
        parameter = cutoff_km
    else:
        raise ValidationError('scheme', scheme)

    row_sums = np.asarray(matrix.sum(axis=1)).ravel()
    isolated = tuple(ids[row_sums == 0].tolist())
    if len(isolated) == n:
        logger.warning('Spatial weight matrix is all zero')
    elif isolated:
        logger.warning('{} sites have no neighbour'.format(len(isolated)))
    if row_standardize:
        scale = np.where(row_sums > 0, 1.0 / np.where(row_sums > 0, row_sums, 1.0), 0.0)
        matrix = sparse.diags(scale) @ matrix
    return SpatialWeights(
        sparse.csr_matrix(matrix), ids, scheme, parameter, row_standardize, isolated,
    )


@append_to(__all__)
def panel_sites(panel, clusters):
    """
        Coordinates of every light cluster used by panel, taken from the
        earliest cluster row with that id.
    """
    used = np.unique(panel.cluster_index)
    located = clusters.sort_values(['cluster_id', 'year']).drop_duplicates('cluster_id')
    sites = located[located['cluster_id'].isin(used)][['cluster_id', 'lat', 'lon']]
    if len(sites) != len(used):
        raise ValidationError('clusters', len(used) - len(sites), 'light clusters without coordinates')
    return sites.reset_index(drop=True)


@append_to(__all__)
def expand_weights(weights, groups):
    """
        Observation-level weights from site weights: observation i in site
        a gives weight W[a, b] / n_b to each observation in site b.
        Row sums are preserved.
    """
    positions = pd.Index(weights.ids).get_indexer(np.asarray(groups))
    if (positions < 0).any():
        raise ValidationError('groups', np.asarray(groups)[positions < 0][0],
                              'group has no spatial weight row')
    sizes = np.bincount(positions, minlength=weights.n).astype(float)
    membership = sparse.csr_matrix(
        (np.ones(len(positions)), (positions, np.arange(len(positions)))),
        shape=(weights.n, len(positions)),
    )
    scale = np.where(sizes > 0, 1.0 / np.where(sizes > 0, sizes, 1.0), 0.0)
    per_site = weights.matrix @ sparse.diags(scale) @ membership
    return sparse.csr_matrix(membership.T @ per_site)


def _matrix(weights):
    return weights.matrix if isinstance(weights, SpatialWeights) else sparse.csr_matrix(weights)


@append_to(__all__)
def lm_spatial_lag(fit, weights):
    """
        Lagrange multiplier test for a spatially lagged dependent variable.

        LM = (e'Wy / s2)^2 / ((WXb)'M(WXb) / s2 + tr(W'W + WW)) with
        s2 = e'e / n and M the residual maker of X, referred to chi2(1).
    """
    W = _matrix(weights)
    n = len(fit.residuals)
    if W.shape != (n, n):
        raise ValidationError('weights', W.shape, 'weights are {} but the fit has {} rows'.format(
            W.shape, n,
        ))
    e = fit.residuals
    sigma2 = float(e @ e) / n
    lagged_fit = W @ fit.fitted
    coefficients, *_ = np.linalg.lstsq(fit.X, lagged_fit, rcond=None)
    remainder = lagged_fit - fit.X @ coefficients
    trace = float(W.multiply(W).sum() + W.multiply(W.T).sum())
    numerator = float(e @ (W @ fit.y)) / sigma2 if sigma2 > 0 else 0.0
    denominator = float(remainder @ remainder) / sigma2 + trace if sigma2 > 0 else trace
    statistic = numerator ** 2 / denominator if numerator != 0 else 0.0
    note = weights.provenance() if isinstance(weights, SpatialWeights) else ''
    return TestResult('lm_lag', statistic, 1, None, chi2_sf(statistic, 1), note=note)


@append_to(__all__)
def morans_i(values, weights):
    """
        Moran's I of values with a two-sided p-value from the normal
        approximation to its distribution.
    """
    W = _matrix(weights)
    z = np.asarray(values, dtype=float) - np.mean(values)
    n = len(z)
    if W.shape != (n, n):
        raise ValidationError('weights', W.shape)
    s0 = float(W.sum())
    if s0 == 0 or not float(z @ z) > 0:
        return TestResult('moran_i', float('nan'), 1, None, float('nan'), False,
                          'undefined for zero weights or constant values')
    statistic = n / s0 * float(z @ (W @ z)) / float(z @ z)
    expected = -1.0 / (n - 1)
    symmetric = W + W.T
    s1 = 0.5 * float(symmetric.multiply(symmetric).sum())
    s2 = float(np.sum((np.asarray(W.sum(axis=1)).ravel() + np.asarray(W.sum(axis=0)).ravel()) ** 2))
    variance = (n * n * s1 - n * s2 + 3 * s0 * s0) / ((n * n - 1) * s0 * s0) - expected ** 2
    score = (statistic - expected) / np.sqrt(variance)
    return TestResult(
        'moran_i', statistic, 1, None, min(1.0, 2 * normal_sf(abs(score))),
        note='z = {:.4f}'.format(score),
    )


@append_to(__all__)
def wooldridge_ar1(y, X, units, periods, strict=False):
    """
        Wooldridge test for first-order serial correlation in panel
        residuals.

        The first-differenced model is fitted without a constant; its
        residuals are regressed on their own lag within each unit and the
        slope is tested against -0.5 with unit-clustered errors, giving
        F(1, G - 1). Units need three consecutive rounds to contribute;
        with fewer everywhere the test is not computable: strict raises
        NotComputable, otherwise a result with computable False is returned.
    """
    try:
        return _wooldridge(y, X, units, periods)
    except NotComputable as error:
        if strict:
            raise
        return TestResult('wooldridge_ar1', float('nan'), 1, None, float('nan'), False, str(error))


def _wooldridge(y, X, units, periods):
    y = np.asarray(y, dtype=float).ravel()
    frame = pd.DataFrame(np.asarray(X, dtype=float).reshape(len(y), -1))
    regressors = list(frame.columns)
    frame['y'] = y
    frame['unit'] = np.asarray(units)
    frame['period'] = np.asarray(periods)
    frame = frame.sort_values(['unit', 'period'], kind='mergesort')
    if frame.duplicated(['unit', 'period']).any():
        raise ValidationError('periods', 'duplicate', 'one row per unit and period expected')
    longest = int(frame.groupby('unit').size().max())
    if longest < 3:
        raise NotComputable('needs at least 3 periods per unit, found {}'.format(longest))
    differenced = frame.groupby('unit')[regressors + ['y']].diff()
    differenced['unit'] = frame['unit']
    differenced = differenced.dropna()
    varying = [column for column in regressors if (differenced[column] != 0).any()]
    residuals = differenced['y'].to_numpy()
    if varying:
        residuals = ols(
            differenced[varying].to_numpy(), residuals,
            [str(column) for column in varying], intercept=False,
        ).residuals
    differenced['u'] = residuals
    differenced['u_lag'] = differenced.groupby('unit')['u'].shift()
    pairs = differenced.dropna(subset=['u_lag'])
    lag = pairs['u_lag'].to_numpy()
    current = pairs['u'].to_numpy()
    n_units = pairs['unit'].nunique()
    if n_units < 2 or not float(lag @ lag) > 0:
        raise NotComputable('too few units with three periods')
    sxx = float(lag @ lag)
    rho = float(lag @ current) / sxx
    errors = current - rho * lag
    scores = pd.Series(lag * errors).groupby(pairs['unit'].to_numpy()).sum().to_numpy()
    variance = n_units / (n_units - 1) * float(scores @ scores) / sxx ** 2
    statistic = (rho + 0.5) ** 2 / variance
    return TestResult(
        'wooldridge_ar1', statistic, 1, n_units - 1, f_sf(statistic, 1, n_units - 1),
        note='rho = {:.4f}'.format(rho),
    )


def _random_sites(rng, n):
    return pd.DataFrame({
        'cluster_id': np.arange(1, n + 1),
        'lat': rng.uniform(22.0, 24.0, size=n),
        'lon': rng.uniform(89.0, 91.0, size=n),
    })


@append_to(__all__)
def simulate_lm_lag(n=200, rho=0.8, replications=200, seed=0, k=5, level=0.01):
    """
        Share of replications in which lm_spatial_lag rejects at level for
        data y = (I - rho W)^-1 (X b + e) on random sites.
    """
    def replicate(rng):
        weights = build_weights(_random_sites(rng, n), 'knn', k)
        X = np.column_stack([np.ones(n), rng.normal(size=n)])
        signal = X @ [1.0, 1.0] + rng.normal(size=n)
        dense = weights.matrix.toarray()
        y = np.linalg.solve(np.eye(n) - rho * dense, signal)
        fit = ols(X, y, ['const', 'x'])
        return lm_spatial_lag(fit, weights).p_value < level

    outcomes = parallel_map(replicate, spawn_generators(seed, replications))
    return float(np.mean(outcomes))


@append_to(__all__)
def simulate_wooldridge(units=100, periods=4, phi=0.0, replications=500, seed=0, level=0.05):
    """
        Share of replications in which wooldridge_ar1 rejects at level for
        a one-regressor panel with unit effects and AR(1) errors.
    """
    def replicate(rng):
        errors = np.zeros((units, periods))
        errors[:, 0] = rng.normal(size=units) / np.sqrt(max(1 - phi * phi, 1e-12))
        for t in range(1, periods):
            errors[:, t] = phi * errors[:, t - 1] + rng.normal(size=units)
        x = rng.normal(size=(units, periods))
        effect = rng.normal(size=(units, 1))
        y = 1.0 + 0.5 * x + effect + errors
        result = wooldridge_ar1(
            y.ravel(), x.ravel(), np.repeat(np.arange(units), periods),
            np.tile(np.arange(periods), units),
        )
        return result.p_value < level

    outcomes = parallel_map(replicate, spawn_generators(seed, replications))
    return float(np.mean(outcomes))


@append_to(__all__)
def residual_diagnostics(panel, spec, clusters, scheme='knn', k=5, cutoff_km=None):
    """
        LM lag and Moran's I on the residuals of the pooled fit of spec,
        plus the serial correlation test on cluster-by-round means of
        its design. Returns (results, site weights).
    """
    if spec.year is not None:
        panel, spec = panel.subset_year(spec.year), replace(spec, year=None)
    fit = fit_ols(panel, spec)
    rows = design_matrix(panel, spec)[3]
    groups = panel.cluster_index[rows]
    weights = build_weights(panel_sites(panel, clusters), scheme, k, cutoff_km)
    expanded = expand_weights(weights, groups)
    lag = replace(lm_spatial_lag(fit, expanded), note=weights.provenance())
    moran = morans_i(fit.residuals, expanded)
    means = pd.DataFrame(fit.X[:, 1:], columns=fit.names[1:])
    means['y'] = fit.y
    means['unit'] = groups
    means['period'] = panel.year_index[rows]
    means = means.groupby(['unit', 'period'], as_index=False).mean()
    try:
        serial = wooldridge_ar1(
            means['y'].to_numpy(), means[list(fit.names[1:])].to_numpy(),
            means['unit'].to_numpy(), means['period'].to_numpy(), strict=True,
        )
    except NotComputable as error:
        logger.info('Serial correlation test skipped: {}'.format(error))
        serial = TestResult('wooldridge_ar1', float('nan'), 1, None, float('nan'), False, str(error))
    return [lag, moran, serial], weights
