# (c) 2026 lumenfit authors

import logging

import numpy as np
import pandas as pd
import pytest
from scipy import sparse

from .conftest import slow
from .diagnostics import *
from .distributions import chi2_sf, f_sf
from .errors import NotComputable, ValidationError
from .geo_merge import haversine_km
from .linear_models import ols
from .models import RegressionSpec


def _sites(points):
    return pd.DataFrame({
        'cluster_id': np.arange(1, len(points) + 1),
        'lat': [p[0] for p in points],
        'lon': [p[1] for p in points],
    })


def test_two_sites_are_mutual_neighbours():
    weights = build_weights(_sites([(23.0, 90.0), (23.1, 90.1)]), 'knn', k=5)
    assert weights.matrix.toarray().tolist() == [[0.0, 1.0], [1.0, 0.0]]
    assert weights.isolated == ()
    assert '1-nearest-neighbour' in weights.provenance()


def test_knn_rows_sum_to_one(rng):
    sites = _sites(list(zip(rng.uniform(22, 24, 40), rng.uniform(89, 91, 40))))
    weights = build_weights(sites, 'knn', k=5)
    dense = weights.matrix.toarray()
    assert np.allclose(dense.sum(axis=1), 1.0, atol=1e-12)
    assert (np.diag(dense) == 0).all()
    assert ((dense > 0).sum(axis=1) == 5).all()


def test_inverse_distance_hand_oracle():
    points = [(23.0, 90.0), (23.0, 90.02), (23.015, 90.01)]
    weights = build_weights(_sites(points), 'inverse_distance', cutoff_km=10,
                            row_standardize=False)
    dense = weights.matrix.toarray()
    for i in range(3):
        for j in range(3):
            expected = 0.0 if i == j else 1.0 / haversine_km(points[i], points[j])
            assert dense[i, j] == pytest.approx(expected, rel=1e-12)
    assert np.allclose(dense, dense.T)
    assert not weights.row_standardized


def test_cutoff_below_every_distance(caplog):
    with caplog.at_level(logging.WARNING):
        weights = build_weights(_sites([(23.0, 90.0), (23.5, 90.5), (24.0, 91.0)]),
                                'inverse_distance', cutoff_km=1.0)
    assert weights.matrix.nnz == 0
    assert weights.isolated == (1, 2, 3)
    assert 'all zero' in caplog.text


def test_weight_errors():
    with pytest.raises(ValidationError):
        build_weights(_sites([(23.0, 90.0)]))
    with pytest.raises(ValidationError):
        build_weights(_sites([(23.0, 90.0), (23.0, 90.0)]), 'inverse_distance', cutoff_km=5)
    with pytest.raises(ValidationError):
        build_weights(_sites([(23.0, 90.0), (23.1, 90.0)]), 'queen')
    with pytest.raises(ValidationError):
        build_weights(_sites([(23.0, 90.0), (23.1, 90.0)]), 'inverse_distance')


def test_expand_weights_preserves_row_sums():
    weights = build_weights(_sites([(23.0, 90.0), (23.1, 90.0), (23.3, 90.0)]), 'knn', k=1)
    groups = np.array([1, 1, 2, 3, 3, 3])
    expanded = expand_weights(weights, groups).toarray()
    assert np.allclose(expanded.sum(axis=1), 1.0)
    # site 1's nearest is site 2, which holds one observation
    assert expanded[0].tolist() == [0, 0, 1, 0, 0, 0]
    # site 3's nearest is site 2 as well
    assert expanded[3, 2] == 1.0
    # site 2's nearest is site 1, two observations share the weight
    assert expanded[2].tolist() == [0.5, 0.5, 0, 0, 0, 0]
    with pytest.raises(ValidationError):
        expand_weights(weights, np.array([1, 9]))


def _fit(rng, n=60):
    X = np.column_stack([np.ones(n), rng.normal(size=n)])
    y = X @ [1.0, 0.5] + rng.normal(size=n)
    return ols(X, y, ['const', 'x'])


def test_lm_lag_zero_weights(rng):
    fit = _fit(rng)
    result = lm_spatial_lag(fit, sparse.csr_matrix((60, 60)))
    assert result.statistic == 0.0 and result.p_value == 1.0
    assert result.df1 == 1


def test_lm_lag_nonconformable(rng):
    with pytest.raises(ValidationError):
        lm_spatial_lag(_fit(rng), sparse.identity(10, format='csr'))


def test_lm_lag_row_permutation_invariant(rng):
    sites = _sites(list(zip(rng.uniform(22, 24, 60), rng.uniform(89, 91, 60))))
    weights = build_weights(sites, 'knn', k=4)
    fit = _fit(rng)
    order = rng.permutation(60)
    permuted_fit = ols(fit.X[order], fit.y[order], fit.names)
    permuted_w = weights.matrix[order][:, order]
    first = lm_spatial_lag(fit, weights.matrix).statistic
    second = lm_spatial_lag(permuted_fit, permuted_w).statistic
    assert first == pytest.approx(second, rel=1e-9)


def test_lm_lag_dense_formula(rng):
    sites = _sites(list(zip(rng.uniform(22, 24, 30), rng.uniform(89, 91, 30))))
    W = build_weights(sites, 'knn', k=3).matrix.toarray()
    fit = _fit(rng, 30)
    e, X, y = fit.residuals, fit.X, fit.y
    s2 = e @ e / 30
    M = np.eye(30) - X @ np.linalg.inv(X.T @ X) @ X.T
    wxb = W @ X @ fit.coefficients
    expected = (e @ W @ y / s2) ** 2 / (wxb @ M @ wxb / s2 + np.trace(W.T @ W + W @ W))
    assert lm_spatial_lag(fit, W).statistic == pytest.approx(expected, rel=1e-10)


def test_published_p_values():
    assert chi2_sf(5.7034, 3) == pytest.approx(0.127, abs=1e-3)
    assert f_sf(1.67459, 1, 10) == pytest.approx(0.224732, abs=5e-4)


def test_lm_lag_power():
    assert simulate_lm_lag(n=200, rho=0.8, replications=20, seed=11) >= 0.9


@slow
def test_lm_lag_power_full():
    assert simulate_lm_lag(n=200, rho=0.8, replications=200, seed=11) >= 0.95


def test_morans_i(rng):
    sites = _sites(list(zip(rng.uniform(22, 24, 50), rng.uniform(89, 91, 50))))
    weights = build_weights(sites, 'knn', k=4)
    values = rng.normal(size=50)
    result = morans_i(values, weights)
    z = values - values.mean()
    dense = weights.matrix.toarray()
    assert result.statistic == pytest.approx(50 / dense.sum() * (z @ dense @ z) / (z @ z))
    assert 0 <= result.p_value <= 1
    smooth = sites['lat'].to_numpy() + sites['lon'].to_numpy()
    assert morans_i(smooth, weights).statistic > 0.3
    assert not morans_i(np.ones(50), weights).computable


def test_wooldridge_two_periods_not_computable(rng):
    result = wooldridge_ar1(rng.normal(size=20), rng.normal(size=20),
                            np.repeat(np.arange(10), 2), np.tile([2011, 2014], 10))
    assert not result.computable
    assert np.isnan(result.statistic)
    assert 'at least 3 periods' in result.note


def test_wooldridge_strict_raises(rng):
    with pytest.raises(NotComputable) as caught:
        wooldridge_ar1(rng.normal(size=20), rng.normal(size=20),
                       np.repeat(np.arange(10), 2), np.tile([2011, 2014], 10), strict=True)
    assert 'found 2' in str(caught.value)
    # one unit with three rounds, the rest with two
    with pytest.raises(NotComputable):
        wooldridge_ar1(rng.normal(size=21), rng.normal(size=21),
                       np.r_[np.repeat(np.arange(9), 2), [9, 9, 9]],
                       np.r_[np.tile([1, 2], 9), [1, 2, 3]], strict=True)


def test_wooldridge_duplicate_periods(rng):
    with pytest.raises(ValidationError):
        wooldridge_ar1(rng.normal(size=4), rng.normal(size=4), [1, 1, 1, 1], [1, 1, 2, 3])


def test_wooldridge_degrees_of_freedom(rng):
    units, periods = 30, 4
    result = wooldridge_ar1(
        rng.normal(size=units * periods), rng.normal(size=units * periods),
        np.repeat(np.arange(units), periods), np.tile(np.arange(periods), units),
    )
    assert result.computable
    assert (result.df1, result.df2) == (1, units - 1)
    assert result.p_value == pytest.approx(f_sf(result.statistic, 1, units - 1))


def test_wooldridge_size_and_power():
    assert simulate_wooldridge(periods=4, phi=0.0, replications=100, seed=5) <= 0.12
    assert simulate_wooldridge(periods=4, phi=0.9, replications=30, seed=6) > 0.9


@slow
def test_wooldridge_size_full():
    assert 0.02 <= simulate_wooldridge(periods=4, phi=0.0, replications=500, seed=5) <= 0.09


def test_residual_diagnostics(small_panel, small_scenario, caplog):
    spec = RegressionSpec('haz', 2, ('child_age_months',))
    with caplog.at_level(logging.INFO):
        results, weights = residual_diagnostics(small_panel, spec, small_scenario['clusters'])
    assert any('Serial correlation test skipped' in record.getMessage() for record in caplog.records)
    lag, moran, serial = results
    assert lag.name == 'lm_lag' and lag.statistic >= 0
    assert 'nearest-neighbour' in lag.note
    assert moran.name == 'moran_i'
    assert not serial.computable
    assert weights.n == len(np.unique(small_panel.cluster_index))
