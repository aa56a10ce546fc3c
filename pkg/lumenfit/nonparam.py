# (c) 2026 lumenfit authors

"""
    Kernel regression of an outcome on log light intensity.

    nw_regress is the locally constant (Nadaraya-Watson) estimator and
    local_poly_regress its locally polynomial generalization. Both return
    a SmoothCurve with a pointwise 95% band built by confidence_band from
    the kernel-weighted local residual variance.
"""

import logging

import numpy as np
import pandas as pd

from .errors import ValidationError
from .models import KernelSpec, SmoothCurve
from .summary import KERNELS, resolve_bandwidth
from .utilities import append_to, parallel_map

logger = logging.getLogger(__name__)

__all__ = ['Z_95']

Z_95 = 1.96


def _paired(x, y):
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if len(x) != len(y):
        raise ValidationError('y', len(y), 'x and y differ in length')
    keep = ~(np.isnan(x) | np.isnan(y))
    x, y = x[keep], y[keep]
    if len(x) < 2:
        raise ValidationError('x', len(x), 'need at least 2 points')
    return x, y


def _grid(x, grid, points=100):
    if grid is None:
        return np.linspace(x.min(), x.max(), points)
    grid = np.asarray(grid, dtype=float).ravel()
    if len(grid) == 0:
        raise ValidationError('grid', 0, 'empty evaluation grid')
    return grid


@append_to(__all__)
def confidence_band(fit, sigma2, weight_norm, n_effective, z=Z_95):
    """
        Pointwise band fit +- z * SE with SE^2 = sigma2 * weight_norm.

        weight_norm is the sum of squared normalized weights, which is
        sum(w^2) / sum(w)^2 for the locally constant fit. Points with
        fewer than 2 effective observations get NaN bounds.
        Returns (lower, upper, se).
    """
    fit = np.asarray(fit, dtype=float)
    se = np.sqrt(np.asarray(sigma2, dtype=float) * np.asarray(weight_norm, dtype=float))
    se = np.where(np.asarray(n_effective) >= 2, se, np.nan)
    return fit - z * se, fit + z * se, se


def _curve(grid, fit, sigma2, weight_norm, n_effective, bandwidth):
    lower, upper, se = confidence_band(fit, sigma2, weight_norm, n_effective)
    defined = ~np.isnan(fit)
    undefined = int((~defined).sum())
    if undefined:
        logger.warning('Kernel fit undefined at {} of {} grid points'.format(
            undefined, len(grid),
        ))
    return SmoothCurve(grid, fit, lower, upper, bandwidth, se, defined)


@append_to(__all__)
def nw_regress(x, y, spec=KernelSpec(), grid=None):
    """ Kernel-weighted local mean of y at every grid point. """
    x, y = _paired(x, y)
    h = resolve_bandwidth(x, spec)
    grid = _grid(x, grid)
    kernel = KERNELS[spec.kernel]
    weights = kernel((grid[:, None] - x[None, :]) / h)
    total = weights.sum(axis=1)
    with np.errstate(invalid='ignore', divide='ignore'):
        fit = weights @ y / total
        sigma2 = (weights * (y[None, :] - fit[:, None]) ** 2).sum(axis=1) / total
        weight_norm = (weights ** 2).sum(axis=1) / total ** 2
        n_effective = total ** 2 / (weights ** 2).sum(axis=1)
    undefined = ~(total > 0)
    fit[undefined] = np.nan
    n_effective = np.where(undefined, 0.0, n_effective)
    return _curve(grid, fit, sigma2, weight_norm, n_effective, h)


def _local_fit(x, y, weights, point, degree, h):
    """
        Weighted least-squares polynomial centred at point. Returns
        (intercept, sigma2, weight_norm, n_effective); NaN intercept when
        the local system is rank deficient.
    """
    active = weights > 0
    total = weights.sum()
    if active.sum() < degree + 1 or not total > 0:
        return np.nan, np.nan, np.nan, 0.0
    u = (x[active] - point) / h
    w = weights[active]
    basis = np.vander(u, degree + 1, increasing=True)
    root = np.sqrt(w)
    coefficients, _, rank, _ = np.linalg.lstsq(basis * root[:, None], y[active] * root, rcond=None)
    if rank < degree + 1:
        return np.nan, np.nan, np.nan, 0.0
    # equivalent kernel: the intercept is sum(l_i * y_i)
    gram = basis.T @ (basis * w[:, None])
    first_row = np.linalg.solve(gram, np.eye(degree + 1)[:, 0])
    equivalent = (basis @ first_row) * w
    residuals = y[active] - basis @ coefficients
    sigma2 = np.sum(w * residuals ** 2) / total
    n_effective = total ** 2 / np.sum(w ** 2)
    return coefficients[0], sigma2, np.sum(equivalent ** 2), n_effective


@append_to(__all__)
def local_poly_regress(x, y, degree=1, spec=KernelSpec(), grid=None):
    """
        Intercept of a kernel-weighted polynomial fit centred at each grid
        point. Degree 0 is the Nadaraya-Watson estimator.
    """
    if degree < 0:
        raise ValidationError('degree', degree)
    x, y = _paired(x, y)
    h = resolve_bandwidth(x, spec)
    grid = _grid(x, grid)
    kernel = KERNELS[spec.kernel]

    def at(point):
        return _local_fit(x, y, kernel((point - x) / h), point, degree, h)

    results = np.array(parallel_map(at, grid), dtype=float).reshape(len(grid), 4)
    fit, sigma2, weight_norm, n_effective = results.T
    return _curve(grid, fit.copy(), sigma2, weight_norm, n_effective, h)


@append_to(__all__)
def smooth_outcomes(panel, outcomes, degree=1, spec=KernelSpec(), points=100,
                    regressor='log_radiance'):
    """ Kernel regression of every outcome on the regressor, as one frame. """
    x = panel.column(regressor)
    grid = np.linspace(np.nanmin(x), np.nanmax(x), points)
    frames = []
    for outcome in outcomes:
        if degree == 0:
            curve = nw_regress(x, panel.column(outcome), spec, grid)
        else:
            curve = local_poly_regress(x, panel.column(outcome), degree, spec, grid)
        frame = curve.to_frame()
        frame.insert(0, 'outcome', outcome)
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)
