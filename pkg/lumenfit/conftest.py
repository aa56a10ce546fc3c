# (c) 2026 lumenfit authors

import os

import numpy as np
import pandas as pd
import pytest

from .models import CHILD_COLUMNS, WEALTH_QUINTILES, ScenarioConfig

# Full-size Monte Carlo checks take minutes; they run when
# LUMENFIT_SLOW is set in the environment.
slow = pytest.mark.skipif(
    not os.environ.get('LUMENFIT_SLOW'),
    reason='set LUMENFIT_SLOW=1 to run full-size simulations',
)

# Residual df and RSS of the five nested light polynomials of the
# published ANOVA table. The RSS column there is rounded, so it is
# rebuilt from the full-model RSS and the printed sums of squares.
TABLE2_SUM_SQ = [10.1809, 6.2709, 11.2995, 3.4405]
TABLE2_F = [5.8021, 3.5738, 6.4396, 1.9608]
TABLE2_STARS = ['**', '*', '**', '']


def table2_rows():
    rss = [15315.0]
    for sum_sq in reversed(TABLE2_SUM_SQ):
        rss.insert(0, rss[0] + sum_sq)
    return list(zip(range(8732, 8727, -1), rss))


CONFIG_CASES = {
    'scalars': ('''
# radius in km
RADIUS_KM = 1.5
seed = 7
drop_incomplete = no
GAM_SCALE = none
''', {'RADIUS_KM': 1.5, 'SEED': 7, 'DROP_INCOMPLETE': False, 'GAM_SCALE': None}),
    'lists': ('''
OUTCOMES = haz, whz , waz   # z-scores only
COVARIATES = child_age_months
''', {'OUTCOMES': ['haz', 'whz', 'waz'], 'COVARIATES': 'child_age_months'}),
    'paths_and_exponents': ('''
CLUSTERS_PATH = data/run 1/clusters.csv
LEARNING_RATE = 1e-1
''', {'CLUSTERS_PATH': 'data/run 1/clusters.csv', 'LEARNING_RATE': 0.1}),
}


@pytest.fixture(params=CONFIG_CASES.values(), ids=list(CONFIG_CASES.keys()))
def config_case(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def table2():
    return table2_rows()


@pytest.fixture
def child_factory():
    """ Build one children.csv row; keyword arguments override columns. """
    def build(child_id, cluster_id, survey_year, **overrides):
        row = dict.fromkeys(CHILD_COLUMNS, 0)
        row.update(
            child_id=child_id,
            cluster_id=cluster_id,
            survey_year=survey_year,
            haz=-1.6, whz=-0.9, waz=-1.5,
            mother_educ_years=3, father_educ_years=4,
            mother_age_first_birth=18, birth_order=2, mother_bmi=2120,
            child_age_months=2, child_sex=1, has_electricity=1,
        )
        row[WEALTH_QUINTILES[0]] = 1
        row.update(overrides)
        return row
    return build


@pytest.fixture(scope='session')
def small_scenario():
    from .synthgen import generate
    config = ScenarioConfig(
        n_clusters=150, households_per_cluster=8, seed=99, rho=0.5,
    )
    return generate(config)


@pytest.fixture(scope='session')
def small_panel(small_scenario):
    from .geo_merge import match_survey, build_panel
    clusters = small_scenario['clusters']
    lights = small_scenario['lights']
    children = small_scenario['children']
    matching = match_survey(clusters, lights, children, 1.5)
    panel, _ = build_panel(children, lights, matching, clusters=clusters)
    return panel


@pytest.fixture
def scenario_files(tmp_path, small_scenario):
    """ The small scenario written to CSV files; returns their paths. """
    paths = {}
    for name in ('clusters', 'lights', 'children'):
        path = tmp_path / '{}.csv'.format(name)
        small_scenario[name].to_csv(path, index=False)
        paths[name] = str(path)
    return paths
