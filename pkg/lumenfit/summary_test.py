# (c) 2026 lumenfit authors

import math
from fractions import Fraction

import numpy as np
import pytest

from .models import KernelSpec
from .summary import *


def test_summary_stats_examples():
    constant = summary_stats([5, 5, 5])
    assert constant.mean == 5 and constant.std_dev == 0
    assert constant.skewness == 0 and constant.degenerate
    pair = summary_stats([0, 1])
    assert pair.mean == 0.5
    assert pair.std_dev == pytest.approx(math.sqrt(0.5), abs=1e-15)
    assert pair.n == 2 and not pair.degenerate


def test_summary_stats_needs_two_values():
    with pytest.raises(ValueError):
        summary_stats([3.0])
    with pytest.raises(ValueError):
        summary_stats([3.0, float('nan')])


def test_summary_stats_exact_oracle(rng):
    for _ in range(10):
        values = rng.integers(-50, 50, size=rng.integers(2, 30))
        exact = [Fraction(int(v)) for v in values]
        n = len(exact)
        mean = sum(exact) / n
        variance = sum((v - mean) ** 2 for v in exact) / (n - 1)
        stats = summary_stats(values)
        assert stats.mean == pytest.approx(float(mean), abs=1e-12)
        assert stats.std_dev == pytest.approx(math.sqrt(variance), abs=1e-12)


def test_summary_stats_shape():
    stats = summary_stats([1, 2, 3, 10])
    assert stats.skewness > 0
    symmetric = summary_stats([-2, -1, 0, 1, 2])
    assert symmetric.skewness == pytest.approx(0, abs=1e-15)
    assert symmetric.kurtosis == pytest.approx(6.8 / 4 - 3)


def test_silverman_rule():
    half = math.sqrt(99 / 100)
    x = np.array([-half] * 50 + [half] * 50)
    assert np.std(x, ddof=1) == pytest.approx(1.0, abs=1e-12)
    assert silverman_bandwidth(x) == pytest.approx(0.9 * 100 ** -0.2, abs=1e-12)
    assert silverman_bandwidth(x) == pytest.approx(0.35835, abs=1e-3)


def test_silverman_homogeneous_and_monotone(rng):
    x = rng.normal(size=200)
    assert silverman_bandwidth(3.5 * x) == pytest.approx(3.5 * silverman_bandwidth(x))
    base = rng.normal(size=50)
    small = base
    large = np.concatenate([base, base])
    ratio = np.std(large, ddof=1) / np.std(small, ddof=1)
    # same spread, more points: bandwidth shrinks
    assert silverman_bandwidth(large) / ratio < silverman_bandwidth(small)


def test_silverman_zero_variance():
    with pytest.raises(ValueError):
        silverman_bandwidth([2.0, 2.0, 2.0])


def test_kde_examples():
    spec = KernelSpec('gaussian', 1.0)
    _, density, _ = kde([0.0], spec, [0.0])
    assert density[0] == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-15)
    _, density, _ = kde([0.0, 0.5], spec, [10.5, -10.0])
    assert (density < 1e-20).all()
    grid = np.linspace(-4, 4, 81)
    _, density, _ = kde([-1.3, 1.3], spec, grid)
    assert np.allclose(density, density[::-1], atol=1e-12)
    with pytest.raises(ValueError):
        kde([0.0], spec, [])


@pytest.mark.parametrize('kernel', ['gaussian', 'epanechnikov'])
def test_kde_integrates_to_one(rng, kernel):
    for _ in range(5):
        x = rng.lognormal(0, 1, size=300)
        grid, density, h = kde(x, KernelSpec(kernel))
        assert grid[0] == pytest.approx(x.min() - 5 * h)
        assert (density >= 0).all()
        assert np.trapz(density, grid) == pytest.approx(1.0, abs=1e-3)


def test_kde_independent_of_threads(monkeypatch, rng):
    x = rng.normal(size=500)
    monkeypatch.setenv('LUMENFIT_THREADS', '1')
    _, serial, _ = kde(x)
    monkeypatch.setenv('LUMENFIT_THREADS', '6')
    _, threaded, _ = kde(x)
    assert np.array_equal(serial, threaded)


def test_jensen_on_positive_data(rng):
    x = rng.lognormal(0.5, 1.3, size=1000)
    assert np.mean(np.log(x)) <= np.log(np.mean(x))


def test_light_shares_and_year_change(small_panel):
    shares = light_shares([1.0, 1.0, 1.0, 30.0], threshold=25)
    assert shares['at_or_below_mean'] == 0.75
    assert shares['above_threshold'] == 0.25
    table = summary_table(small_panel, ['radiance', 'log_radiance', 'haz'])
    assert list(table['variable']) == ['radiance', 'log_radiance', 'haz']
    assert (table['n'] == len(small_panel)).all()
    years = small_panel.years
    first = table['mean_{}'.format(years[0])][0]
    last = table['mean_{}'.format(years[-1])][0]
    change = year_change(table)
    assert change['radiance'] == pytest.approx(100 * (last - first) / first)


def test_density_frames(small_panel):
    frame = density_frames(small_panel, points=64)
    assert set(frame['sample']) == {'pooled'} | {str(y) for y in small_panel.years}
    assert len(frame) == 64 * (1 + len(small_panel.years))
