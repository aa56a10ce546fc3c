# (c) 2026 lumenfit authors

"""
    Descriptive statistics of the panel and kernel density estimation
    of light intensity.
"""

import math
import logging
from collections import OrderedDict

import numpy as np
import pandas as pd

from .errors import ValidationError
from .models import KernelSpec, SummaryStats
from .utilities import append_to, parallel_map

logger = logging.getLogger(__name__)

__all__ = []

GRID_CHUNK = 128


def gaussian_kernel(u):
    return np.exp(-0.5 * u * u) / math.sqrt(2 * math.pi)


def epanechnikov_kernel(u):
    return np.where(np.abs(u) <= 1, 0.75 * (1 - u * u), 0.0)


KERNELS = {
    'gaussian': gaussian_kernel,
    'epanechnikov': epanechnikov_kernel,
}


def _finite(column, name='column'):
    values = np.asarray(column, dtype=float).ravel()
    values = values[~np.isnan(values)]
    if len(values) < 2:
        raise ValidationError(name, len(values), 'need at least 2 values')
    return values


@append_to(__all__)
def summary_stats(column):
    """
        Mean, sample standard deviation, range, skewness and excess
        kurtosis, by two passes over the data. NaN entries are ignored.
    """
    values = _finite(column)
    n = len(values)
    mean = values.sum() / n
    centred = values - mean
    # second pass corrects the rounding of the first
    mean += centred.sum() / n
    centred = values - mean
    m2 = np.mean(centred ** 2)
    std_dev = math.sqrt(np.sum(centred ** 2) / (n - 1))
    if m2 == 0:
        return SummaryStats(mean, 0.0, values.min(), values.max(), 0.0, 0.0, n, True)
    skewness = np.mean(centred ** 3) / m2 ** 1.5
    kurtosis = np.mean(centred ** 4) / m2 ** 2 - 3.0
    return SummaryStats(
        float(mean), std_dev, float(values.min()), float(values.max()),
        float(skewness), float(kurtosis), n,
    )


@append_to(__all__)
def silverman_bandwidth(x):
    """
        Rule-of-thumb bandwidth 0.9 * min(sd, IQR / 1.34) * n^(-1/5).

        When the interquartile range is zero but the standard deviation
        is not, the standard deviation is used alone.
    """
    values = _finite(x, 'x')
    sigma = np.std(values, ddof=1)
    if not sigma > 0:
        raise ValidationError('x', sigma, 'zero variance, bandwidth undefined')
    q75, q25 = np.percentile(values, [75, 25])
    spread = min(sigma, (q75 - q25) / 1.34) if q75 > q25 else sigma
    return 0.9 * spread * len(values) ** -0.2


def resolve_bandwidth(x, spec):
    if spec.bandwidth == 'silverman':
        return silverman_bandwidth(x)
    return float(spec.bandwidth)


@append_to(__all__)
def default_grid(x, bandwidth, points=512, pad=5.0):
    """ Evenly spaced grid from min(x) - pad*h to max(x) + pad*h. """
    values = _finite(x, 'x')
    return np.linspace(values.min() - pad * bandwidth, values.max() + pad * bandwidth, points)


@append_to(__all__)
def kde(x, spec=KernelSpec(), grid=None):
    """
        Kernel density estimate of x evaluated on grid.

        Returns (grid, density, bandwidth). Without a grid, default_grid
        is used. The grid is evaluated in fixed chunks in the worker pool.
    """
    values = np.asarray(x, dtype=float).ravel()
    values = values[~np.isnan(values)]
    if len(values) == 0:
        raise ValidationError('x', 0, 'no data')
    h = resolve_bandwidth(values, spec)
    if grid is None:
        grid = default_grid(values, h) if len(values) > 1 else np.linspace(
            values[0] - 5 * h, values[0] + 5 * h, 512,
        )
    grid = np.asarray(grid, dtype=float).ravel()
    if len(grid) == 0:
        raise ValidationError('grid', 0, 'empty evaluation grid')
    kernel = KERNELS[spec.kernel]
    n = len(values)

    def evaluate(start):
        points = grid[start:start + GRID_CHUNK]
        u = (points[:, None] - values[None, :]) / h
        return kernel(u).sum(axis=1) / (n * h)

    density = np.concatenate(parallel_map(evaluate, range(0, len(grid), GRID_CHUNK)))
    return grid, density, h


@append_to(__all__)
def density_frames(panel, column='radiance', spec=KernelSpec(), points=512):
    """
        KDE of column per survey year plus pooled, as one long frame
        with columns sample, grid, density.
    """
    frames = []
    samples = [('pooled', panel.column(column))] + [
        (str(year), panel.subset_year(year).column(column)) for year in panel.years
    ]
    for label, values in samples:
        if len(values) < 2:
            logger.warning('Skipping density of {} for {}: too few rows'.format(column, label))
            continue
        h = resolve_bandwidth(values, spec)
        grid, density, _ = kde(values, spec, default_grid(values, h, points))
        frames.append(pd.DataFrame({'sample': label, 'grid': grid, 'density': density}))
    return pd.concat(frames, ignore_index=True)


@append_to(__all__)
def summary_table(panel, columns):
    """
        Pooled statistics of each column with per-year means, one row per
        column, in the layout of a descriptive statistics table.
    """
    rows = []
    years = panel.years
    for name in columns:
        stats = summary_stats(panel.column(name))
        row = OrderedDict([
            ('variable', name),
            ('n', stats.n),
            ('mean', stats.mean),
            ('std_dev', stats.std_dev),
            ('min', stats.minimum),
            ('max', stats.maximum),
            ('skewness', stats.skewness),
            ('kurtosis', stats.kurtosis),
        ])
        for year in years:
            values = panel.subset_year(year).column(name)
            values = values[~np.isnan(values)]
            row['mean_{}'.format(year)] = values.mean() if len(values) else float('nan')
            row['n_{}'.format(year)] = len(values)
        rows.append(row)
    return pd.DataFrame(rows)


@append_to(__all__)
def light_shares(radiance, threshold=25.0):
    """ Shares of observations at or below the mean and above threshold. """
    values = _finite(radiance, 'radiance')
    return OrderedDict([
        ('at_or_below_mean', float(np.mean(values <= values.mean()))),
        ('above_threshold', float(np.mean(values > threshold))),
        ('threshold', threshold),
    ])


@append_to(__all__)
def year_change(table):
    """ Percentage change of each mean from the first to the last year. """
    means = sorted(name for name in table.columns if name.startswith('mean_'))
    if len(means) < 2:
        return pd.Series(dtype=float)
    first, last = table[means[0]], table[means[-1]]
    change = 100.0 * (last - first) / first.abs()
    change.index = table['variable']
    return change
