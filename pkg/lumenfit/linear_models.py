# (c) 2026 lumenfit authors

"""
    Least-squares regressions of child outcomes on light intensity.

    Light enters as a polynomial in log radiance, by default through an
    orthonormal basis so the coefficients of different degrees do not
    interact. Fits are solved by a pivoted QR decomposition of the
    design; the normal equations are never formed.

    fit_ols estimates the pooled model, fit_cluster_fe the model with one
    intercept per matched light cluster, and anova_nested compares the
    residual sums of squares of nested polynomial degrees.
"""

import logging
from dataclasses import replace

import numpy as np
import pandas as pd
from scipy import linalg

from .distributions import f_sf, t_two_sided
from .errors import RankError, ValidationError
from .models import AnovaRow, AnovaTable, FitResult, RegressionSpec
from .utilities import append_to, parallel_map

logger = logging.getLogger(__name__)

__all__ = ['DEGREE_LABELS']

DEGREE_LABELS = ('linear', 'quadratic', 'cubic', 'quartic', 'quintic')

# relative column norm below which a column counts as absorbed
ABSORBED = 1e-10


@append_to(__all__)
class OrthoPoly(object):
    """
        Orthonormal polynomial basis fitted on x.

        The columns on the training points come from a QR decomposition of
        the centred Vandermonde matrix. alpha and norm2 hold the three-term
        recurrence that evaluates the same polynomials at new points.
    """

    def __init__(self, x, degree):
        x = np.asarray(x, dtype=float).ravel()
        if degree < 1:
            raise ValidationError('degree', degree)
        if np.isnan(x).any():
            raise ValidationError('x', 'nan', 'polynomial basis needs finite x')
        distinct = len(np.unique(x))
        if distinct < degree + 1:
            raise RankError(
                ['light_{}'.format(j + 1) for j in range(distinct - 1, degree)],
                'degree {} needs {} distinct values, got {}'.format(degree, degree + 1, distinct),
            )
        self.degree = degree
        # the basis does not depend on the location or scale of x
        self.centre = x.mean()
        self.scale = x.std()
        u = (x - self.centre) / self.scale
        q, r = np.linalg.qr(np.vander(u, degree + 1, increasing=True))
        diagonal = np.diag(r)
        if (np.abs(diagonal[1:]) <= 1e-10 * np.sqrt(len(x))).any():
            raise RankError(['light_{}'.format(degree)], 'polynomial basis is numerically singular')
        z = q * diagonal
        self.norm2 = np.concatenate([[1.0], np.sum(z ** 2, axis=0)])
        self.alpha = (np.sum(u[:, None] * z ** 2, axis=0) / self.norm2[1:])[:degree]
        self.basis = (q * np.sign(diagonal))[:, 1:]

    def evaluate(self, x):
        """ The fitted polynomials at new points x. """
        u = (np.asarray(x, dtype=float).ravel() - self.centre) / self.scale
        columns = [np.ones_like(u), u - self.alpha[0]]
        for i in range(1, self.degree):
            columns.append(
                (u - self.alpha[i]) * columns[i]
                - (self.norm2[i + 1] / self.norm2[i]) * columns[i - 1]
            )
        values = np.column_stack(columns) / np.sqrt(self.norm2[1:])
        return values[:, 1:]


@append_to(__all__)
def ortho_poly_basis(x, degree):
    """ degree orthonormal columns, each orthogonal to the constant. """
    return OrthoPoly(x, degree).basis


@append_to(__all__)
def raw_power_basis(x, degree):
    x = np.asarray(x, dtype=float).ravel()
    return np.column_stack([x ** (j + 1) for j in range(degree)])


def _complete_rows(panel, columns):
    complete = np.ones(len(panel), dtype=bool)
    for name in columns:
        complete &= ~np.isnan(panel.column(name))
    return complete


@append_to(__all__)
def design_matrix(panel, spec, regressor='log_radiance', intercept=True):
    """
        Design of spec over the complete rows of panel.

        Columns are const, light_1..light_d, year_<last> when the rows span
        more than one survey year and spec.year_dummy is set, then the
        covariates. Returns (X, y, names, rows) where rows is the boolean
        mask of panel rows used.
    """
    if spec.year is not None:
        panel = panel.subset_year(spec.year)
    rows = _complete_rows(panel, (spec.outcome, regressor) + spec.covariates)
    if rows.sum() == 0:
        raise ValidationError('rows', 0, 'no complete rows for {}'.format(spec.outcome))
    light = panel.column(regressor)[rows]
    if spec.raw_powers:
        light_columns = raw_power_basis(light, spec.degree)
    else:
        light_columns = ortho_poly_basis(light, spec.degree)
    columns = []
    names = []
    if intercept:
        columns.append(np.ones(rows.sum()))
        names.append('const')
    columns.extend(light_columns.T)
    names.extend('light_{}'.format(j + 1) for j in range(spec.degree))
    years = panel.year_index[rows]
    distinct = sorted(set(years))
    if spec.year_dummy and len(distinct) > 1:
        columns.append((years == distinct[-1]).astype(float))
        names.append('year_{}'.format(distinct[-1]))
    for name in spec.covariates:
        columns.append(panel.column(name)[rows])
        names.append(name)
    X = np.column_stack(columns)
    y = panel.column(spec.outcome)[rows]
    return X, y, tuple(names), rows


def _p_values(t_values, df):
    return np.array([
        t_two_sided(t, df) if np.isfinite(t) else float('nan') for t in t_values
    ])


@append_to(__all__)
def ols(X, y, names, groups=None, cluster_robust=False, intercept=True, absorbed=0):
    """
        Least squares by pivoted QR.

        absorbed counts parameters removed before the fit (cluster means
        under the within transformation); they are charged to the
        residual degrees of freedom. With cluster_robust the covariance is
        the sandwich over groups with the G/(G-1)*(n-1)/(n-p) correction
        and tests use G-1 degrees of freedom.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    names = tuple(names)
    n, p = X.shape
    if len(names) != p:
        raise ValidationError('names', len(names), 'design has {} columns'.format(p))
    df_resid = n - p - absorbed
    if df_resid <= 0:
        raise RankError(names, 'no residual degrees of freedom ({} rows, {} parameters)'.format(
            n, p + absorbed,
        ))
    q, r, pivot = linalg.qr(X, mode='economic', pivoting=True)
    diagonal = np.abs(np.diag(r))
    tolerance = max(n, p) * np.finfo(float).eps * diagonal[0] if p else 0.0
    rank = int(np.sum(diagonal > tolerance))
    if rank < p:
        raise RankError([names[j] for j in sorted(pivot[rank:])])
    coefficients = np.empty(p)
    coefficients[pivot] = linalg.solve_triangular(r, q.T @ y)
    r_inverse = linalg.solve_triangular(r, np.eye(p))
    bread = np.empty((p, p))
    bread[np.ix_(pivot, pivot)] = r_inverse @ r_inverse.T

    fitted = X @ coefficients
    residuals = y - fitted
    rss = float(residuals @ residuals)
    sigma2 = rss / df_resid
    cov_type = 'classical'
    test_df = df_resid
    if cluster_robust:
        if groups is None:
            raise ValidationError('groups', None, 'cluster-robust errors need groups')
        labels, codes = np.unique(groups, return_inverse=True)
        n_groups = len(labels)
        if n_groups < 2:
            raise ValidationError('groups', n_groups, 'need at least 2 clusters')
        scores = np.zeros((n_groups, p))
        np.add.at(scores, codes, X * residuals[:, None])
        correction = n_groups / (n_groups - 1) * (n - 1) / (n - p - absorbed)
        covariance = correction * bread @ (scores.T @ scores) @ bread
        cov_type = 'cluster'
        test_df = n_groups - 1
    else:
        covariance = sigma2 * bread

    std_errors = np.sqrt(np.diag(covariance))
    with np.errstate(divide='ignore', invalid='ignore'):
        t_values = coefficients / std_errors
    p_values = _p_values(t_values, test_df)

    centred = y - y.mean() if intercept else y
    tss = float(centred @ centred)
    r_squared = 1.0 - rss / tss if tss > 0 else float('nan')
    model_df = p - 1 if intercept else p
    adj_r_squared = 1.0 - (1.0 - r_squared) * (n - 1) / df_resid
    if model_df > 0 and rss > 0:
        f_statistic = ((tss - rss) / model_df) / sigma2
        f_p_value = f_sf(f_statistic, model_df, df_resid)
    else:
        f_statistic = f_p_value = float('nan')
    return FitResult(
        names, coefficients, std_errors, t_values, p_values,
        r_squared, adj_r_squared, f_statistic, (model_df, df_resid), f_p_value,
        residuals, fitted, rss, n, df_resid, sigma2,
        cov_type=cov_type, X=X, y=y, groups=groups,
    )


@append_to(__all__)
def fit_ols(panel, spec):
    """ Pooled least squares of spec on panel. """
    X, y, names, rows = design_matrix(panel, spec)
    groups = panel.cluster_index[rows] if spec.year is None else \
        panel.subset_year(spec.year).cluster_index[rows]
    fit = ols(X, y, names, groups, spec.cluster_robust)
    logger.debug('OLS {}: n={} R2={:.4f}'.format(spec.outcome, fit.n, fit.r_squared))
    return replace(fit, model='ols', outcome=spec.outcome)


def _group_codes(groups):
    _, codes = np.unique(groups, return_inverse=True)
    return codes


def _demean(values, codes):
    frame = pd.DataFrame(values)
    return (frame - frame.groupby(codes).transform('mean')).to_numpy()


@append_to(__all__)
def fit_cluster_fe(panel, spec, method='within'):
    """
        Least squares with one intercept per light cluster.

        method "within" demeans every column by cluster; "dummies" adds
        an indicator per cluster. Both report the slope coefficients only.
        r_squared is the within R2, computed against the within-cluster
        variation of y; adj_r_squared charges every cluster intercept and
        can be negative. Columns that are constant within every cluster are
        absorbed and listed in the dropped field.
    """
    if method not in ('within', 'dummies'):
        raise ValidationError('method', method)
    X, y, names, rows = design_matrix(panel, spec, intercept=False)
    source = panel if spec.year is None else panel.subset_year(spec.year)
    groups = source.cluster_index[rows]
    codes = _group_codes(groups)
    n_groups = codes.max() + 1
    n = len(y)
    if n_groups < 2:
        raise ValidationError('clusters', n_groups, 'fixed effects need at least 2 clusters')
    if n_groups == n:
        raise RankError(names, 'one observation per cluster, all variation is absorbed')

    X_within = _demean(X, codes)
    y_within = _demean(y[:, None], codes).ravel()
    norms = np.linalg.norm(X, axis=0)
    within_norms = np.linalg.norm(X_within, axis=0)
    keep = within_norms > ABSORBED * np.where(norms > 0, norms, 1.0)
    dropped = tuple(name for name, kept in zip(names, keep) if not kept)
    if dropped:
        logger.warning('Absorbed by cluster effects: {}'.format(', '.join(dropped)))
    names = tuple(name for name, kept in zip(names, keep) if kept)
    if not names:
        raise RankError(dropped, 'every regressor is absorbed by cluster effects')
    k = len(names)

    if method == 'within':
        fit = ols(
            X_within[:, keep], y_within, names, groups, spec.cluster_robust,
            intercept=False, absorbed=n_groups,
        )
    else:
        dummies = np.zeros((n, n_groups))
        dummies[np.arange(n), codes] = 1.0
        design = np.column_stack([X[:, keep], dummies])
        labels = names + tuple('cluster_{}'.format(j) for j in range(n_groups))
        full = ols(design, y, labels, groups, spec.cluster_robust, intercept=False)
        fit = replace(
            full,
            names=names,
            coefficients=full.coefficients[:k],
            std_errors=full.std_errors[:k],
            t_values=full.t_values[:k],
            p_values=full.p_values[:k],
        )

    tss_within = float(y_within @ y_within)
    r_squared = 1.0 - fit.rss / tss_within if tss_within > 0 else float('nan')
    df_resid = n - k - n_groups
    adj_r_squared = 1.0 - (1.0 - r_squared) * (n - 1) / df_resid
    f_statistic = ((tss_within - fit.rss) / k) / (fit.rss / df_resid) if fit.rss > 0 else float('nan')
    f_p_value = f_sf(f_statistic, k, df_resid) if np.isfinite(f_statistic) else float('nan')
    logger.debug('FE {} ({}): n={} clusters={} within R2={:.4f}'.format(
        spec.outcome, method, n, n_groups, r_squared,
    ))
    return replace(
        fit,
        r_squared=r_squared,
        adj_r_squared=adj_r_squared,
        f_statistic=f_statistic,
        f_df=(k, df_resid),
        f_p_value=f_p_value,
        df_resid=df_resid,
        sigma2=fit.rss / df_resid,
        model='fe',
        outcome=spec.outcome,
        dropped=dropped,
        X=X_within[:, keep],
        y=y_within,
        groups=groups,
    )


@append_to(__all__)
def anova_from_rss(models, labels=None):
    """
        Sequential F table from (residual df, RSS) pairs of nested models,
        smallest model first.

        Each row compares a model with the one before it. The F
        denominator is the mean square error of the largest model, the one
        with the fewest residual degrees of freedom.
    """
    models = [(int(df), float(rss)) for df, rss in models]
    if len(models) < 2:
        raise ValidationError('models', len(models), 'need at least 2 nested models')
    if labels is None:
        labels = [
            DEGREE_LABELS[j] if j < len(DEGREE_LABELS) else 'model_{}'.format(j + 1)
            for j in range(len(models))
        ]
    full_df, full_rss = min(models, key=lambda model: model[0])
    scale = full_rss / full_df
    rows = [AnovaRow(labels[0], *models[0])]
    for j in range(1, len(models)):
        (df_before, rss_before), (df_after, rss_after) = models[j - 1], models[j]
        df = df_before - df_after
        sum_sq = rss_before - rss_after
        if df < 0 or sum_sq < -1e-9 * max(rss_before, 1.0):
            raise ValidationError(
                'models', labels[j], 'model {} is not nested in {}'.format(labels[j - 1], labels[j]),
            )
        sum_sq = max(sum_sq, 0.0)
        if df == 0:
            f = p = float('nan')
        elif scale > 0:
            f = (sum_sq / df) / scale
            p = f_sf(f, df, full_df)
        else:
            f = p = float('nan')
        rows.append(AnovaRow(labels[j], df_after, rss_after, df, sum_sq, f, p))
    return AnovaTable(rows)


@append_to(__all__)
def anova_nested(fits, labels=None):
    """ Sequential F table of nested fits of the same outcome and rows. """
    outcomes = {fit.outcome for fit in fits}
    sizes = {fit.n for fit in fits}
    if len(outcomes) > 1 or len(sizes) > 1:
        raise ValidationError('fits', sorted(map(str, outcomes)), 'fits differ in outcome or rows')
    return anova_from_rss([(fit.df_resid, fit.rss) for fit in fits], labels)


@append_to(__all__)
def polynomial_anova(panel, outcome, max_degree=5, covariates=(), year_dummy=True,
                     regressor='log_radiance'):
    """
        Fits of degree 1..max_degree in light on the same rows and their
        sequential F table. Returns (fits, table).
    """
    if not 1 < max_degree <= 5:
        raise ValidationError('max_degree', max_degree)
    spec = RegressionSpec(outcome, max_degree, tuple(covariates), year_dummy)
    X, y, names, rows = design_matrix(panel, spec, regressor)
    light = [j for j, name in enumerate(names) if name.startswith('light_')]
    fits = []
    for degree in range(1, max_degree + 1):
        # the orthonormal columns of a lower degree are a prefix of the higher
        columns = [j for j in range(len(names)) if j not in light[degree:]]
        fit = ols(X[:, columns], y, [names[j] for j in columns])
        fits.append(replace(fit, model='ols', outcome=outcome))
    return fits, anova_nested(fits, list(DEGREE_LABELS[:max_degree]))


@append_to(__all__)
def semi_elasticity(beta):
    """ Outcome change per one percent increase of light: beta / 100. """
    return beta / 100.0


@append_to(__all__)
def std_effect(beta, sd_x):
    """ Outcome change per one standard deviation of the regressor. """
    if not sd_x > 0:
        raise ValidationError('sd_x', sd_x, 'standard deviation must be positive')
    return beta * sd_x


@append_to(__all__)
def regression_battery(panel, outcomes, degree=4, covariates=(), cluster_robust=False,
                       by_year=False):
    """
        Pooled OLS and cluster fixed-effect fits of every outcome, plus
        one pooled fit per survey year when by_year is set. Outcomes are
        fitted in the worker pool; the result keeps outcome order.
    """
    def fit_outcome(outcome):
        base = RegressionSpec(
            outcome, degree, tuple(covariates), cluster_robust=cluster_robust,
        )
        fits = [fit_ols(panel, base), fit_cluster_fe(panel, replace(base, fixed_effects=True))]
        if by_year:
            for year in panel.years:
                yearly = replace(base, year=year, year_dummy=False)
                fits.append(replace(fit_ols(panel, yearly), model='ols_{}'.format(year)))
        return fits

    results = parallel_map(fit_outcome, outcomes)
    return [fit for fits in results for fit in fits]
