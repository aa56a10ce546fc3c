# (c) 2026 lumenfit authors

import math

import numpy as np
import pytest

from .conftest import slow
from .diagnostics import build_weights, morans_i
from .errors import ValidationError
from .geo_merge import load_children, load_clusters, load_lights, match_survey, build_panel
from .linear_models import fit_ols, ols
from .models import CHILD_COLUMNS, CLUSTER_COLUMNS, LIGHT_COLUMNS, ScenarioConfig
from .synthgen import *


def test_frames_satisfy_the_loaders(small_scenario, scenario_files):
    assert tuple(small_scenario['clusters'].columns) == CLUSTER_COLUMNS
    assert tuple(small_scenario['lights'].columns) == LIGHT_COLUMNS
    assert tuple(small_scenario['children'].columns) == CHILD_COLUMNS
    assert len(load_clusters(scenario_files['clusters'])) == 300
    assert len(load_lights(scenario_files['lights'])) == 300
    assert len(load_children(scenario_files['children'])) == 2400


def test_first_round_clusters_sit_on_sites(small_scenario):
    clusters = small_scenario['clusters']
    first = clusters[clusters['year'] == 2011]
    assert first['cluster_id'].tolist() == list(range(1, 151))
    later = clusters[clusters['year'] == 2014]
    assert later['cluster_id'].min() == 151
    assert set(clusters['division']) <= set(DIVISIONS)


def test_later_rounds_match_their_site(small_scenario):
    scenario = small_scenario
    matching = match_survey(scenario['clusters'], scenario['lights'], scenario['children'], 1.5)
    later = {key: value for key, value in matching.mapping.items() if key[0] == 2014}
    matched = [key for key, value in later.items() if value is not None]
    assert all(later[key] == key[1] - 150 for key in matched)
    assert len(matched) >= 0.9 * len(later)
    first = [value for key, value in matching.mapping.items() if key[0] == 2011]
    assert None not in first


def test_deterministic(tmp_path):
    config = ScenarioConfig(n_clusters=40, households_per_cluster=3, seed=5)
    first = write_scenario(generate(config), str(tmp_path / 'a'))
    second = write_scenario(generate(config), str(tmp_path / 'b'))
    assert list(first) == ['clusters', 'lights', 'children', 'truth']
    for name in first:
        with open(first[name], 'rb') as a, open(second[name], 'rb') as b:
            assert a.read() == b.read()
    other = generate(ScenarioConfig(n_clusters=40, households_per_cluster=3, seed=6))
    assert not other['children'].equals(generate(config)['children'])


def test_calibrated_to_published_means():
    scenario = generate(ScenarioConfig(n_children=8734))
    children = scenario['children']
    assert len(children) == 8734
    lights = scenario['lights']
    radiance = lights.set_index(['cluster_id', 'year'])['radiance']
    mean = radiance.mean()
    assert 1.46 <= mean <= 1.78
    assert abs(radiance.std() - 3.54) <= 0.354
    assert radiance.max() <= 29.94 and radiance.min() >= 0.00023
    by_year = lights.groupby('year')['radiance'].mean()
    assert by_year[2014] / by_year[2011] == pytest.approx(1.0729, abs=0.03)
    for outcome, target in DEFAULT_OUTCOME_MEANS.items():
        assert children[outcome].mean() == pytest.approx(target, abs=0.1)
    assert children['child_age_months'].mean() == pytest.approx(2.029, abs=0.1)
    assert set(children['child_age_months']) <= {0, 1, 2, 3, 4}
    assert children['has_electricity'].mean() == pytest.approx(0.602, abs=0.03)
    assert children['owns_tv'].mean() == pytest.approx(0.409, abs=0.03)
    assert children['mother_educ_years'].mean() == pytest.approx(3.215, abs=0.1)
    assert children['mother_age_first_birth'].mean() == pytest.approx(18.14, abs=0.3)
    assert (children['owns_tv'] <= children['has_electricity']).all()


def test_log_range_of_light_bounds():
    config = ScenarioConfig()
    assert math.log(config.light_min) == pytest.approx(-8.37, abs=0.01)
    assert math.log(config.light_max) == pytest.approx(3.39, abs=0.01)


def test_binary_outcomes_follow_scores(small_scenario):
    children = small_scenario['children'].dropna(subset=['haz', 'whz', 'waz'])
    assert ((children['haz'] < -2) == (children['stunted'] == 1)).all()
    assert ((children['whz'] < -2) == (children['wasted'] == 1)).all()
    assert ((children['waz'] < -2) == (children['underweight'] == 1)).all()
    missing = small_scenario['children']['haz'].isna()
    assert small_scenario['children'].loc[missing, 'stunted'].isna().all()


def test_truth_records_every_coefficient(small_scenario):
    truth = small_scenario['truth']
    assert list(truth.columns) == ['outcome', 'term', 'value']
    haz = truth[truth['outcome'] == 'haz'].set_index('term')['value']
    for term, value in DEFAULT_COEFFICIENTS['haz'].items():
        assert haz[term] == value
    assert haz['rho'] == 0.5
    assert {'intercept', 'cluster_sd', 'noise_sd'} <= set(haz.index)


def test_infeasible_configs():
    with pytest.raises(ValidationError):
        ScenarioConfig(households_per_cluster=0)
    with pytest.raises(ValidationError):
        ScenarioConfig(rho=1.0)
    with pytest.raises(ValidationError):
        generate(ScenarioConfig(n_clusters=10, coefficients={'haz': {'shoe_size': 1.0}}))


def test_light_scale_calibration():
    sigma = calibrate_light_scale(1.62, 3.54, 0.00023, 29.94)
    unclipped = math.sqrt(math.log1p((3.54 / 1.62) ** 2))
    # clipping the tail needs a wider log-normal for the same spread
    assert sigma > unclipped
    assert calibrate_light_scale(1.0, 0.5) == pytest.approx(math.sqrt(math.log1p(0.25)), rel=0.05)


def _moran_score(seed):
    config = ScenarioConfig(n_clusters=120, rho=0.0, seed=seed)
    rng = np.random.default_rng(seed)
    sites = place_sites(120, rng)
    effects = cluster_effects(sites, config, rng)
    return morans_i(effects, build_weights(sites, 'knn', k=5)).p_value


def test_no_spatial_dependence_without_rho():
    assert sum(_moran_score(seed) > 0.0027 for seed in range(20)) >= 19


@slow
def test_no_spatial_dependence_without_rho_full():
    assert sum(_moran_score(seed) > 0.0027 for seed in range(100)) >= 97


def test_spatial_dependence_with_rho():
    config = ScenarioConfig(n_clusters=300, rho=0.8, cluster_sd=1.0, seed=3)
    rng = np.random.default_rng(3)
    sites = place_sites(300, rng)
    effects = cluster_effects(sites, config, rng)
    assert morans_i(effects, build_weights(sites, 'knn', k=5)).p_value < 1e-4


def _recovered(seed):
    config = ScenarioConfig(n_clusters=200, households_per_cluster=6, seed=seed, rho=0.0,
                            missing_share=0.0, unmatched_share=0.0)
    scenario = generate(config)
    children = scenario['children']
    matching = match_survey(scenario['clusters'], scenario['lights'], children, 1.5)
    panel, _ = build_panel(children, scenario['lights'], matching)
    rows = panel.rows
    X = np.column_stack([
        np.ones(len(rows)), rows['log_radiance'], rows['survey_year'] == 2014,
    ] + [rows[name] for name in ('child_age_months', 'mother_age_first_birth',
                                 'has_electricity', 'wealth_poorest', 'mother_educ_years')])
    names = ['const', 'light', 'year', 'age', 'mafb', 'elec', 'poorest', 'educ']
    fit = ols(X.astype(float), rows['haz'].to_numpy(), names,
              groups=rows['light_cluster_id'].to_numpy(), cluster_robust=True)
    truth = DEFAULT_COEFFICIENTS['haz']['log_radiance']
    return abs(fit.coef('light') - truth) <= 3 * fit.se('light'), fit.coef('light')


def test_light_effect_recovered():
    results = [_recovered(seed) for seed in range(5)]
    assert all(inside for inside, _ in results)


@slow
def test_light_effect_recovered_full():
    results = [_recovered(seed) for seed in range(100)]
    assert sum(inside for inside, _ in results) >= 99
    assert sum(estimate > 0 for _, estimate in results) >= 95


def test_pooled_polynomial_marginal_effect_positive():
    scenario = generate(ScenarioConfig(n_children=8734, seed=21))
    matching = match_survey(scenario['clusters'], scenario['lights'], scenario['children'], 1.5)
    panel, _ = build_panel(scenario['children'], scenario['lights'], matching)
    from .models import RegressionSpec
    fit = fit_ols(panel, RegressionSpec('waz', 1, ('child_age_months', 'has_electricity')))
    assert fit.coef('light_1') > 0


def test_scenario_config_from_application_config():
    from . import create_application
    app = create_application()
    config = scenario_config(app.config, seed=3, n_children=None)
    assert config.seed == 3
    assert config.n_clusters == 600
    assert config.survey_years == (2011, 2014)
