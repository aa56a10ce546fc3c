# (c) 2026 lumenfit authors

"""
    Additive models with one penalized smooth of light intensity.

    The smooth is a cubic regression spline: its coefficients are the
    function values at k knots, the second derivatives at the knots follow
    from the natural spline conditions, and the penalty is the integrated
    squared second derivative. A sum-to-zero constraint over the data
    keeps the intercept identified.

    For a given smoothing parameter the penalized least-squares problem is
    solved by a QR decomposition of the design augmented with a square
    root of the penalty; the smoothing parameter itself minimizes GCV or
    UBRE over log lambda.
"""

import math
import logging

import numpy as np
import pandas as pd
from scipy import linalg

from .distributions import f_sf, t_two_sided
from .errors import RankError, ValidationError
from .linear_models import OrthoPoly
from .models import GamFit, ModelFormula, SmoothTerm, TestResult
from .parsers import parse_formula
from .utilities import append_to

logger = logging.getLogger(__name__)

__all__ = ['LOG_LAMBDA_BOUNDS', 'GOLDEN_TOLERANCE']

LOG_LAMBDA_BOUNDS = (-12.0, 12.0)
GOLDEN_TOLERANCE = 1e-4
GRID_STEPS = 25
GOLDEN = (math.sqrt(5) - 1) / 2


@append_to(__all__)
def place_knots(x, k=10):
    """ k knots at evenly spaced quantiles of the distinct values of x. """
    if k < 4:
        raise ValidationError('k', k, 'basis dimension must be at least 4')
    values = np.unique(np.asarray(x, dtype=float))
    values = values[~np.isnan(values)]
    if len(values) < k:
        raise ValidationError('k', k, 'only {} distinct values for {} knots'.format(len(values), k))
    return np.quantile(values, np.linspace(0, 1, k))


@append_to(__all__)
class CubicRegressionSpline(object):
    """
        Natural cubic spline parameterized by its values at the knots.

        second_derivatives maps knot values to the second derivatives at
        the knots, zero at both ends. Outside the knots the spline is
        continued linearly.
    """

    def __init__(self, knots):
        knots = np.asarray(knots, dtype=float)
        if len(knots) < 4:
            raise ValidationError('knots', len(knots), 'need at least 4 knots')
        h = np.diff(knots)
        if not (h > 0).all():
            raise ValidationError('knots', knots.tolist(), 'knots must be strictly increasing')
        k = len(knots)
        self.knots = knots
        self.h = h
        D = np.zeros((k - 2, k))
        B = np.zeros((k - 2, k - 2))
        for i in range(k - 2):
            D[i, i] = 1.0 / h[i]
            D[i, i + 1] = -1.0 / h[i] - 1.0 / h[i + 1]
            D[i, i + 2] = 1.0 / h[i + 1]
            B[i, i] = (h[i] + h[i + 1]) / 3.0
            if i < k - 3:
                B[i, i + 1] = B[i + 1, i] = h[i + 1] / 6.0
        inner = linalg.solve(B, D, assume_a='sym')
        self.second_derivatives = np.vstack([np.zeros(k), inner, np.zeros(k)])
        self.penalty = D.T @ inner
        self.penalty = (self.penalty + self.penalty.T) / 2

    @property
    def k(self):
        return len(self.knots)

    def basis(self, x):
        """ Row j maps knot values to the spline value at x[j]. """
        x = np.asarray(x, dtype=float).ravel()
        knots, h, F = self.knots, self.h, self.second_derivatives
        k = self.k
        rows = np.zeros((len(x), k))
        below = x < knots[0]
        above = x > knots[-1]
        inside = ~(below | above)

        j = np.clip(np.searchsorted(knots, x[inside], side='right') - 1, 0, k - 2)
        step = h[j]
        right = knots[j + 1] - x[inside]
        left = x[inside] - knots[j]
        a_minus = right / step
        a_plus = left / step
        c_minus = (right ** 3 / step - step * right) / 6.0
        c_plus = (left ** 3 / step - step * left) / 6.0
        index = np.flatnonzero(inside)
        rows[index, j] += a_minus
        rows[index, j + 1] += a_plus
        rows[index] += c_minus[:, None] * F[j] + c_plus[:, None] * F[j + 1]

        if below.any():
            slope = -np.eye(k)[0] / h[0] + np.eye(k)[1] / h[0] - h[0] / 6.0 * F[1]
            rows[below] = np.eye(k)[0] + (x[below] - knots[0])[:, None] * slope
        if above.any():
            slope = (np.eye(k)[-1] - np.eye(k)[-2]) / h[-1] + h[-1] / 6.0 * F[-2]
            rows[above] = np.eye(k)[-1] + (x[above] - knots[-1])[:, None] * slope
        return rows


@append_to(__all__)
def spline_basis(x, k=10, knots=None):
    """
        Cubic regression spline basis of x and its penalty.

        Returns (basis, penalty, knots); without knots they are placed at
        quantiles of x.
    """
    if knots is None:
        knots = place_knots(x, k)
    spline = CubicRegressionSpline(knots)
    return spline.basis(x), spline.penalty, spline.knots


@append_to(__all__)
def integrated_curvature(spline, values):
    """ Integral of the squared second derivative of the spline through values. """
    delta = spline.second_derivatives @ np.asarray(values, dtype=float)
    return float(np.sum(spline.h / 3.0 * (delta[:-1] ** 2 + delta[:-1] * delta[1:] + delta[1:] ** 2)))


def _sum_to_zero(basis):
    """ Null space of the column sums of basis, as a k x (k-1) matrix. """
    q, _ = np.linalg.qr(basis.sum(axis=0)[:, None], mode='complete')
    return q[:, 1:]


def _column(data, name):
    if hasattr(data, 'column'):
        return data.column(name)
    if name not in data:
        raise ValidationError('column', name, 'no column named {}'.format(name))
    return np.asarray(data[name], dtype=float)


def _variables(formula):
    names = [formula.response]
    if formula.smooth:
        names.append(formula.smooth[0])
    names.extend(variable for variable, _ in formula.polynomials)
    names.extend(formula.linear)
    return list(dict.fromkeys(names))


@append_to(__all__)
def gam_design(data, formula):
    """
        Model matrix of formula over the complete rows of data.

        Parametric columns come first (const, poly terms, linear terms),
        then the constrained smooth columns. Returns (X, y, names,
        n_parametric, smooth, rows) where smooth is a SmoothTerm whose
        penalty is scaled to the size of the smooth columns, or None.
    """
    if isinstance(formula, str):
        formula = parse_formula(formula)
    variables = _variables(formula)
    rows = np.ones(len(_column(data, formula.response)), dtype=bool)
    for name in variables:
        rows &= ~np.isnan(_column(data, name))
    if rows.sum() < 3:
        raise ValidationError('rows', int(rows.sum()), 'too few complete rows')
    n = int(rows.sum())
    columns = [np.ones(n)]
    names = ['const']
    for variable, degree in formula.polynomials:
        basis = OrthoPoly(_column(data, variable)[rows], degree).basis
        columns.extend(basis.T)
        names.extend('poly_{}_{}'.format(variable, j + 1) for j in range(degree))
    for variable in formula.linear:
        columns.append(_column(data, variable)[rows])
        names.append(variable)
    n_parametric = len(columns)
    smooth = None
    if formula.smooth:
        variable, k = formula.smooth
        x = _column(data, variable)[rows]
        spline = CubicRegressionSpline(place_knots(x, k))
        raw = spline.basis(x)
        constraint = _sum_to_zero(raw)
        constrained = raw @ constraint
        penalty = constraint.T @ spline.penalty @ constraint
        scale = np.linalg.norm(constrained.T @ constrained, 1) / np.linalg.norm(penalty, 1)
        columns.extend(constrained.T)
        names.extend('s({}).{}'.format(variable, j + 1) for j in range(k - 1))
        smooth = SmoothTerm(
            variable, k, spline.knots, penalty * scale, constraint,
            slice(n_parametric, n_parametric + k - 1),
        )
    X = np.column_stack(columns)
    y = _column(data, formula.response)[rows]
    return X, y, tuple(names), n_parametric, smooth, rows


def _penalty_matrix(p, smooth):
    penalty = np.zeros((p, p))
    if smooth is not None:
        penalty[smooth.columns, smooth.columns] = smooth.penalty
    return penalty


class PenalizedProblem(object):
    """
        ||y - X b||^2 + lam * b'Pb for a fixed design, solved for any lam
        from one QR decomposition of X.
    """

    def __init__(self, X, y, penalty):
        self.X = X
        self.y = y
        self.n, self.p = X.shape
        q, self.r = linalg.qr(X, mode='economic')
        diagonal = np.abs(np.diag(self.r))
        weak = np.flatnonzero(diagonal <= 1e-10 * diagonal.max())
        if len(weak):
            raise RankError(
                weak.tolist(),
                'additive model design is not identifiable',
            )
        self.qty = q.T @ y
        self.rss_floor = float(y @ y - self.qty @ self.qty)
        self.penalty = penalty
        values, vectors = np.linalg.eigh(penalty)
        self.root = (vectors * np.sqrt(np.clip(values, 0.0, None))).T

    def solve(self, lam):
        """ (coefficients, rss, inverse of the augmented R, influence trace). """
        if lam < 0:
            raise ValidationError('lambda', lam, 'smoothing parameter must be non-negative')
        augmented = np.vstack([self.r, math.sqrt(lam) * self.root])
        q, r = linalg.qr(augmented, mode='economic')
        inverse = linalg.solve_triangular(r, np.eye(self.p))
        coefficients = inverse @ (q[:self.p].T @ self.qty)
        residuals = self.y - self.X @ coefficients
        trace = float(np.sum((self.r @ inverse) ** 2))
        return coefficients, float(residuals @ residuals), inverse, trace

    def score(self, lam, criterion='gcv', scale=None):
        _, rss, _, trace = self.solve(lam)
        return criterion_score(rss, trace, self.n, criterion, scale)


@append_to(__all__)
def criterion_score(rss, trace, n, criterion='gcv', scale=None):
    """
        GCV = n * RSS / (n - tr A)^2 or UBRE = RSS/n - s2 + 2 s2 tr A / n.
        GCV is infinite when tr A >= n.
    """
    if criterion == 'gcv':
        if trace >= n:
            return float('inf')
        return n * rss / (n - trace) ** 2
    if criterion == 'ubre':
        if scale is None or not scale > 0:
            raise ValidationError('scale', scale, 'UBRE needs a known positive scale')
        return rss / n - scale + 2.0 * scale * trace / n
    raise ValidationError('criterion', criterion)


@append_to(__all__)
def select_lambda(problem, criterion='gcv', scale=None, bounds=LOG_LAMBDA_BOUNDS,
                  tolerance=GOLDEN_TOLERANCE):
    """
        Smoothing parameter minimizing the criterion over log lambda.

        A coarse grid over bounds locates the best bracket, which golden
        section search then narrows to tolerance. Returns (lam, score,
        trace) where trace lists every (log lambda, score) evaluated.
    """
    trace = []

    def evaluate(log_lam):
        value = problem.score(math.exp(log_lam), criterion, scale)
        trace.append((log_lam, value))
        return value

    grid = np.linspace(bounds[0], bounds[1], GRID_STEPS)
    scores = [evaluate(point) for point in grid]
    if not np.isfinite(scores).any():
        raise ValidationError('criterion', criterion, 'score undefined on the whole lambda range')
    best = int(np.argmin(scores))
    low = grid[max(best - 1, 0)]
    high = grid[min(best + 1, len(grid) - 1)]
    a = high - GOLDEN * (high - low)
    b = low + GOLDEN * (high - low)
    fa, fb = evaluate(a), evaluate(b)
    while high - low > tolerance:
        if fa < fb:
            high, b, fb = b, a, fa
            a = high - GOLDEN * (high - low)
            fa = evaluate(a)
        else:
            low, a, fa = a, b, fb
            b = low + GOLDEN * (high - low)
            fb = evaluate(b)
    log_lam, value = min(trace, key=lambda item: (item[1], -item[0]))
    return math.exp(log_lam), value, trace


@append_to(__all__)
def fit_gam(data, formula, lam='auto', criterion='gcv', scale=None):
    """
        Penalized least-squares fit of an additive model with identity
        link.

        lam is a non-negative number or "auto" for selection by criterion.
        The smooth's edf counts the constant absorbed by the intercept, so
        it runs from 2 for a straight line to k.
    """
    if isinstance(formula, str):
        formula = parse_formula(formula)
    X, y, names, n_parametric, smooth, rows = gam_design(data, formula)
    n, p = X.shape
    penalty = _penalty_matrix(p, smooth)
    problem = PenalizedProblem(X, y, penalty)
    score_trace = []
    if smooth is None:
        lam = 0.0
    elif lam == 'auto':
        lam, _, score_trace = select_lambda(problem, criterion, scale)
    elif not isinstance(lam, (int, float)) or lam < 0:
        raise ValidationError('lambda', lam, 'smoothing parameter must be non-negative or auto')
    coefficients, rss, inverse, trace = problem.solve(float(lam))
    if trace >= n:
        raise ValidationError('edf', trace, 'effective degrees of freedom reach the sample size')
    score = criterion_score(rss, trace, n, criterion, scale)

    fitted = X @ coefficients
    residuals = y - fitted
    sigma2 = rss / (n - trace)
    bread = inverse @ inverse.T
    covariance = sigma2 * bread
    std_errors = np.sqrt(np.diag(covariance))
    p_values = np.array([
        t_two_sided(beta / se, n - trace) if se > 0 else float('nan')
        for beta, se in zip(coefficients, std_errors)
    ])
    if smooth is not None:
        influence = bread @ (problem.r.T @ problem.r)
        smooth.lam = float(lam)
        smooth.edf = float(np.trace(influence[smooth.columns, smooth.columns])) + 1.0
    tss = float(np.sum((y - y.mean()) ** 2))
    fit = GamFit(
        formula=formula,
        names=names,
        coefficients=coefficients,
        std_errors=std_errors,
        p_values=p_values,
        smooth=smooth,
        fitted=fitted,
        residuals=residuals,
        rss=rss,
        tss=tss,
        n=n,
        edf_total=trace,
        sigma2=sigma2,
        score=score,
        criterion=criterion,
        adj_r_squared=1.0 - (rss / (n - trace)) / (tss / (n - 1)) if tss > 0 else float('nan'),
        log_likelihood=-n / 2.0 * (math.log(2 * math.pi * rss / n) + 1.0) if rss > 0 else float('inf'),
        deviance_explained=1.0 - rss / tss if tss > 0 else float('nan'),
        covariance=covariance,
        X=X,
        y=y,
        penalty=penalty,
        score_trace=score_trace,
        n_parametric=n_parametric,
    )
    logger.debug('GAM {}: lambda={:.4g} edf={:.3f} {}={:.5g}'.format(
        formula.response, float(lam), trace, criterion, score,
    ))
    return fit


@append_to(__all__)
def edf(fit):
    """ Effective degrees of freedom of the smooth, or None without one. """
    return None if fit.smooth is None else fit.smooth.edf


def _linear_restriction(fit):
    """ The formula with the smooth replaced by a linear term. """
    formula = fit.formula
    variable = formula.smooth[0]
    linear = formula.linear if variable in formula.linear else formula.linear + (variable,)
    return ModelFormula(formula.response, None, formula.polynomials, linear)


@append_to(__all__)
def smooth_significance(fit, data, line=None):
    """
        Approximate F test of the smooth against a straight line.

        F = ((RSS_line - RSS) / (edf - 2)) / (RSS / (n - edf_total)) on
        (edf - 2, n - edf_total) degrees of freedom. Not computable when
        the smooth is already a straight line. line is the fitted
        restriction when the caller already has it.
    """
    if fit.smooth is None:
        raise ValidationError('smooth', None, 'model has no smooth term')
    numerator_df = fit.smooth.edf - 2.0
    if numerator_df <= 1e-6:
        return TestResult('smooth_f', float('nan'), numerator_df, None, float('nan'), False,
                          'smooth is effectively linear (edf {:.3f})'.format(fit.smooth.edf))
    if line is None:
        line = fit_gam(data, _linear_restriction(fit))
    denominator_df = fit.n - fit.edf_total
    statistic = max(line.rss - fit.rss, 0.0) / numerator_df / (fit.rss / denominator_df)
    return TestResult(
        'smooth_f', statistic, numerator_df, denominator_df,
        f_sf(statistic, numerator_df, denominator_df),
        note='edf {:.3f}, Ref.df {:.3f}'.format(fit.smooth.edf, numerator_df),
    )


@append_to(__all__)
def deviance_delta(with_smooth, without_smooth):
    """ Additional percentage of deviance explained by the first model. """
    if with_smooth.outcome != without_smooth.outcome or with_smooth.n != without_smooth.n:
        raise ValidationError('fits', with_smooth.outcome, 'fits differ in outcome or rows')
    return 100.0 * (with_smooth.deviance_explained - without_smooth.deviance_explained)


@append_to(__all__)
def smooth_curve(fit, points=100, z=1.96):
    """
        The centred smooth on an even grid over the knot range with a
        pointwise band of z standard errors, as a frame with columns x,
        fit, se, lower, upper.
    """
    smooth = fit.smooth
    if smooth is None:
        raise ValidationError('smooth', None, 'model has no smooth term')
    grid = np.linspace(smooth.knots[0], smooth.knots[-1], points)
    basis = CubicRegressionSpline(smooth.knots).basis(grid) @ smooth.constraint
    values = basis @ fit.coefficients[smooth.columns]
    covariance = fit.covariance[smooth.columns, smooth.columns]
    se = np.sqrt(np.einsum('ij,jk,ik->i', basis, covariance, basis))
    return pd.DataFrame({
        'x': grid, 'fit': values, 'se': se, 'lower': values - z * se, 'upper': values + z * se,
    })


@append_to(__all__)
def gam_battery(panel, outcomes, covariates=(), k=10, degree=4, criterion='gcv', scale=None,
                regressor='log_radiance'):
    """
        For every outcome: the smooth model, its straight-line restriction
        and the parametric polynomial model, with the smooth test and the
        deviance gained by the smooth. Returns a list of dicts.
    """
    results = []
    for outcome in outcomes:
        smooth_formula = ModelFormula(outcome, (regressor, k), (), tuple(covariates))
        parametric_formula = ModelFormula(outcome, None, ((regressor, degree),), tuple(covariates))
        smooth_fit = fit_gam(panel, smooth_formula, criterion=criterion, scale=scale)
        line_fit = fit_gam(panel, _linear_restriction(smooth_fit))
        results.append({
            'outcome': outcome,
            'smooth': smooth_fit,
            'parametric': fit_gam(panel, parametric_formula, criterion=criterion, scale=scale),
            'significance': smooth_significance(smooth_fit, panel, line_fit),
            'deviance_delta': deviance_delta(smooth_fit, line_fit),
        })
        logger.info('GAM {}: edf {:.3f}, deviance gained {:.3f}%'.format(
            outcome, smooth_fit.smooth.edf, results[-1]['deviance_delta'],
        ))
    return results
