# (c) 2026 lumenfit authors

from dataclasses import replace
from fractions import Fraction

import numpy as np
import pandas as pd
import pytest

from .conftest import TABLE2_F, TABLE2_STARS, slow
from .errors import RankError, ValidationError
from .linear_models import *
from .models import AnalysisPanel, RegressionSpec
from .report import significance_stars


def test_ortho_poly_degree_one(rng):
    x = rng.normal(size=25)
    basis = ortho_poly_basis(x, 1)
    centred = (x - x.mean()) / np.linalg.norm(x - x.mean())
    assert np.allclose(np.abs(basis[:, 0]), np.abs(centred), atol=1e-12)
    assert np.linalg.norm(basis[:, 0]) == pytest.approx(1.0)


def test_ortho_poly_gram_is_identity(rng):
    x = rng.lognormal(size=300)
    basis = ortho_poly_basis(np.log(x), 4)
    assert np.allclose(basis.T @ basis, np.eye(4), atol=1e-10)
    assert np.allclose(basis.sum(axis=0), 0, atol=1e-10)


def test_ortho_poly_matches_raw_powers(rng):
    x = rng.uniform(-1, 2, size=20)
    y = rng.normal(size=20)
    ortho = np.column_stack([np.ones(20), ortho_poly_basis(x, 3)])
    raw = [[Fraction(float(v)) ** j for j in range(4)] for v in x]
    exact_y = [Fraction(float(v)) for v in y]
    # exact normal equations by Gauss-Jordan elimination
    gram = [[sum(row[i] * row[j] for row in raw) for j in range(4)] for i in range(4)]
    rhs = [sum(row[i] * value for row, value in zip(raw, exact_y)) for i in range(4)]
    for column in range(4):
        pivot = gram[column][column]
        gram[column] = [value / pivot for value in gram[column]]
        rhs[column] = rhs[column] / pivot
        for other in range(4):
            if other != column:
                factor = gram[other][column]
                gram[other] = [a - factor * b for a, b in zip(gram[other], gram[column])]
                rhs[other] = rhs[other] - factor * rhs[column]
    exact_fit = [float(sum(c * value for c, value in zip(rhs, row))) for row in raw]
    coefficients, *_ = np.linalg.lstsq(ortho, y, rcond=None)
    assert np.allclose(ortho @ coefficients, exact_fit, atol=1e-8)


def test_ortho_poly_scale_invariant(rng):
    x = rng.uniform(0.1, 5, size=100)
    assert np.allclose(ortho_poly_basis(x, 4), ortho_poly_basis(1000 * x, 4), atol=1e-8)
    assert np.allclose(ortho_poly_basis(x, 4), ortho_poly_basis(1e-3 * x, 4), atol=1e-8)


def test_ortho_poly_evaluate_reproduces_training_basis(rng):
    x = rng.normal(size=50)
    poly = OrthoPoly(x, 4)
    assert np.allclose(poly.evaluate(x), poly.basis, atol=1e-10)


def test_ortho_poly_needs_distinct_values():
    with pytest.raises(RankError):
        ortho_poly_basis([1.0, 1.0, 2.0, 2.0], 2)
    with pytest.raises(ValidationError):
        ortho_poly_basis([1.0, 2.0], 0)


def test_ols_exact_line():
    x = np.arange(1.0, 7.0)
    fit = ols(np.column_stack([np.ones(6), x]), 2 * x, ['const', 'x'])
    assert fit.coef('x') == pytest.approx(2.0, abs=1e-12)
    assert fit.coef('const') == pytest.approx(0.0, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0)


def test_ols_matches_rational_oracle():
    x = [1, 2, 3, 4, 5, 6]
    y = [1, 3, 2, 5, 7, 8]
    n = len(x)
    sx, sy = sum(x), sum(y)
    sxx = sum(v * v for v in x)
    sxy = sum(a * b for a, b in zip(x, y))
    slope = Fraction(n * sxy - sx * sy, n * sxx - sx * sx)
    intercept = Fraction(sy, n) - slope * Fraction(sx, n)
    fit = ols(np.column_stack([np.ones(n), x]), y, ['const', 'x'])
    assert fit.coef('x') == pytest.approx(float(slope), abs=1e-12)
    assert fit.coef('const') == pytest.approx(float(intercept), abs=1e-12)
    residuals = [Fraction(b) - intercept - slope * a for a, b in zip(x, y)]
    rss = sum(r * r for r in residuals)
    assert fit.rss == pytest.approx(float(rss), abs=1e-12)
    variance = rss / (n - 2) / (sxx - Fraction(sx * sx, n))
    assert fit.se('x') == pytest.approx(float(variance) ** 0.5, abs=1e-12)
    assert fit.df_resid == 4 and fit.f_df == (1, 4)


def test_ols_residuals_orthogonal(rng):
    X = np.column_stack([np.ones(100), rng.normal(size=(100, 3))])
    y = rng.normal(size=100)
    fit = ols(X, y, ['const', 'a', 'b', 'c'])
    assert np.allclose(X.T @ fit.residuals, 0, atol=1e-8)
    assert fit.adj_r_squared <= fit.r_squared
    assert fit.rss >= 0


def test_ols_irrelevant_orthogonal_column(rng):
    x = rng.normal(size=40)
    X = np.column_stack([np.ones(40), x - x.mean()])
    y = 1.0 + 0.5 * x + rng.normal(size=40)
    extra = rng.normal(size=40)
    extra -= X @ np.linalg.lstsq(X, extra, rcond=None)[0]
    base = ols(X, y, ['const', 'x'])
    wider = ols(np.column_stack([X, extra]), y, ['const', 'x', 'extra'])
    assert np.allclose(base.coefficients, wider.coefficients[:2], atol=1e-10)


def test_ols_rank_error_names_columns(rng):
    x = rng.normal(size=30)
    X = np.column_stack([np.ones(30), x, 2 * x])
    with pytest.raises(RankError) as caught:
        ols(X, rng.normal(size=30), ['const', 'x', 'twice_x'])
    assert set(caught.value.columns) <= {'x', 'twice_x'}
    assert len(caught.value.columns) == 1


def test_ols_cluster_robust(rng):
    groups = np.repeat(np.arange(20), 5)
    X = np.column_stack([np.ones(100), rng.normal(size=100)])
    y = X @ [1.0, 2.0] + np.repeat(rng.normal(size=20), 5) + rng.normal(size=100)
    classical = ols(X, y, ['const', 'x'])
    robust = ols(X, y, ['const', 'x'], groups=groups, cluster_robust=True)
    assert np.allclose(classical.coefficients, robust.coefficients)
    assert robust.cov_type == 'cluster'
    assert not np.allclose(classical.std_errors, robust.std_errors)
    with pytest.raises(ValidationError):
        ols(X, y, ['const', 'x'], cluster_robust=True)


def _fe_panel(rng, clusters=30, size=6):
    light_cluster = np.repeat(np.arange(clusters), size)
    n = clusters * size
    log_radiance = rng.normal(size=n) + 0.3 * np.repeat(rng.normal(size=clusters), size)
    frame = pd.DataFrame({
        'light_cluster_id': light_cluster,
        'survey_year': np.tile([2011, 2014], n // 2),
        'log_radiance': log_radiance,
        'child_age_months': rng.integers(0, 5, size=n).astype(float),
        'has_electricity': np.repeat(rng.integers(0, 2, size=clusters), size).astype(float),
    })
    frame['haz'] = (
        0.4 * log_radiance - 0.2 * frame['child_age_months']
        + np.repeat(rng.normal(size=clusters), size) + 0.5 * rng.normal(size=n)
    )
    return AnalysisPanel(frame)


def test_fe_recovers_slope_with_cluster_intercepts(rng):
    clusters = np.repeat(np.arange(10), 4)
    x = rng.normal(size=40)
    frame = pd.DataFrame({
        'light_cluster_id': clusters,
        'survey_year': 2011,
        'log_radiance': x,
        'haz': 2 * x + np.repeat(rng.normal(size=10) * 5, 4),
    })
    fit = fit_cluster_fe(AnalysisPanel(frame), RegressionSpec('haz', degree=1, year_dummy=False),
                         method='dummies')
    assert fit.names == ('light_1',)
    poly = ortho_poly_basis(x, 1)[:, 0]
    slope = np.polyfit(x, poly, 1)[0]
    assert fit.coefficients[0] * slope == pytest.approx(2.0, abs=1e-10)


def test_fe_within_equals_dummies(rng):
    panel = _fe_panel(rng)
    spec = RegressionSpec('haz', 2, ('child_age_months',), fixed_effects=True)
    within = fit_cluster_fe(panel, spec, 'within')
    dummies = fit_cluster_fe(panel, spec, 'dummies')
    assert within.names == dummies.names
    assert np.allclose(within.coefficients, dummies.coefficients, atol=1e-8)
    assert np.allclose(within.std_errors, dummies.std_errors, atol=1e-8)
    assert within.rss == pytest.approx(dummies.rss)
    assert within.r_squared == pytest.approx(dummies.r_squared)
    assert within.df_resid == len(panel) - len(within.names) - 30


def test_fe_absorbs_cluster_constant_covariate(rng):
    panel = _fe_panel(rng)
    spec = RegressionSpec('haz', 1, ('has_electricity', 'child_age_months'))
    fit = fit_cluster_fe(panel, spec)
    assert fit.dropped == ('has_electricity',)
    assert 'has_electricity' not in fit.names
    assert fit.model == 'fe'


def test_fe_single_observation_per_cluster(rng):
    frame = pd.DataFrame({
        'light_cluster_id': np.arange(12),
        'survey_year': 2011,
        'log_radiance': rng.normal(size=12),
        'haz': rng.normal(size=12),
    })
    with pytest.raises(RankError):
        fit_cluster_fe(AnalysisPanel(frame), RegressionSpec('haz', 1, year_dummy=False))


def _two_cluster_panel(first_outcomes):
    return AnalysisPanel(pd.DataFrame({
        'light_cluster_id': [1, 1, 1, 2, 2, 2],
        'survey_year': 2011,
        'log_radiance': [0.0, 1.0, 2.0, 0.0, 1.0, 2.0],
        'haz': list(first_outcomes) + [3.0, 3.0, 3.0],
    }))


@pytest.mark.parametrize('method', ['within', 'dummies'])
def test_fe_reports_within_r_squared(method):
    spec = RegressionSpec('haz', 1, year_dummy=False)
    # within: x = -1, 0, 1 twice; y = -2, -1, 3 then zeros
    fit = fit_cluster_fe(_two_cluster_panel([0.0, 1.0, 5.0]), spec, method)
    assert fit.df_resid == 3
    assert fit.r_squared == pytest.approx(25 / 56)
    assert fit.adj_r_squared == pytest.approx(13 / 168)
    # within y orthogonal to within x: R2 of zero, charged for two intercepts
    fit = fit_cluster_fe(_two_cluster_panel([0.0, 1.0, 0.0]), spec, method)
    assert fit.r_squared == pytest.approx(0.0, abs=1e-12)
    assert fit.adj_r_squared == pytest.approx(-2 / 3)


def test_anova_reproduces_published_table(table2):
    table = anova_from_rss(table2)
    frame = table.to_frame()
    assert list(frame['label']) == list(DEGREE_LABELS)
    assert list(frame['res_df']) == [8732, 8731, 8730, 8729, 8728]
    assert np.isnan(frame['f'][0])
    assert frame['f'][1:].tolist() == pytest.approx(TABLE2_F, abs=1e-3)
    assert [significance_stars(p) for p in frame['p'][1:]] == TABLE2_STARS
    assert (np.diff(frame['rss']) <= 0).all()


def test_anova_edge_cases():
    flat = anova_from_rss([(10, 50.0), (9, 50.0)])
    assert flat.rows[1].f == 0.0 and flat.rows[1].p == 1.0
    duplicate = anova_from_rss([(10, 50.0), (9, 40.0), (9, 40.0)])
    assert duplicate.rows[2].sum_sq == 0.0
    assert np.isnan(duplicate.rows[2].f)
    with pytest.raises(ValidationError):
        anova_from_rss([(10, 40.0), (9, 50.0)])
    with pytest.raises(ValidationError):
        anova_from_rss([(9, 50.0), (10, 40.0)])
    with pytest.raises(ValidationError):
        anova_from_rss([(10, 40.0)])


def test_polynomial_anova(small_panel):
    fits, table = polynomial_anova(small_panel, 'haz', max_degree=4,
                                   covariates=('child_age_months',))
    assert [fit.df_resid for fit in fits] == [fits[0].df_resid - j for j in range(4)]
    assert (np.diff([fit.rss for fit in fits]) <= 1e-9).all()
    assert (np.diff([fit.r_squared for fit in fits]) >= -1e-12).all()
    assert len(table.rows) == 4
    with pytest.raises(ValidationError):
        anova_nested([fits[0], replace(fits[1], outcome='waz')])


def test_semi_elasticity_and_std_effect(rng):
    assert semi_elasticity(8.242) == pytest.approx(0.08242)
    assert semi_elasticity(0.0) == 0.0
    assert semi_elasticity(-1.0) == -0.01
    assert std_effect(1.0, 2.0) == 2.0
    assert std_effect(0.0, 3.0) == 0.0
    with pytest.raises(ValidationError):
        std_effect(1.0, 0.0)
    x = rng.normal(2.0, 3.0, size=200)
    y = 0.7 * x + rng.normal(size=200)
    raw = ols(np.column_stack([np.ones(200), x]), y, ['const', 'x'])
    z = (x - x.mean()) / x.std(ddof=1)
    standardized = ols(np.column_stack([np.ones(200), z]), y, ['const', 'z'])
    assert std_effect(raw.coef('x'), x.std(ddof=1)) == pytest.approx(
        standardized.coef('z'), abs=1e-10,
    )


def test_fit_ols_design(small_panel):
    spec = RegressionSpec('haz', 4, ('child_age_months', 'has_electricity'))
    fit = fit_ols(small_panel, spec)
    assert fit.names[:5] == ('const', 'light_1', 'light_2', 'light_3', 'light_4')
    assert fit.names[5].startswith('year_')
    assert fit.model == 'ols' and fit.outcome == 'haz'
    yearly = fit_ols(small_panel, replace(spec, year=small_panel.years[0]))
    assert not any(name.startswith('year_') for name in yearly.names)
    assert yearly.n < fit.n
    raw = fit_ols(small_panel, replace(spec, raw_powers=True))
    assert np.allclose(raw.fitted, fit.fitted, atol=1e-8)
    assert raw.r_squared == pytest.approx(fit.r_squared, abs=1e-10)


def test_regression_battery(small_panel):
    fits = regression_battery(small_panel, ['haz', 'stunted'], degree=2, by_year=True)
    per_outcome = 2 + len(small_panel.years)
    assert len(fits) == 2 * per_outcome
    assert [fit.model for fit in fits[:2]] == ['ols', 'fe']
    assert fits[per_outcome].outcome == 'stunted'


def _coverage(rng, replications):
    n = 400
    x = rng.normal(size=n)
    X = np.column_stack([np.ones(n), ortho_poly_basis(x, 1)])
    truth = np.array([-1.6, 3.0])
    covered = 0
    for _ in range(replications):
        y = X @ truth + rng.normal(size=n)
        fit = ols(X, y, ['const', 'light_1'])
        covered += abs(fit.coef('light_1') - truth[1]) <= 1.96 * fit.se('light_1')
    return covered / replications


def test_confidence_interval_coverage(rng):
    assert 0.91 <= _coverage(rng, 200) <= 0.99


@slow
def test_confidence_interval_coverage_full(rng):
    assert 0.92 <= _coverage(rng, 500) <= 0.98
