# (c) 2026 lumenfit authors

"""
    Synthetic surveys with known effects.

    A scenario places light cluster sites over Bangladesh, surveys every
    site in the first round and a slightly displaced cluster near each
    site in later rounds, and draws children whose z-scores follow a
    linear model in log light, the covariates and a spatially
    autocorrelated cluster effect. Marginals default to the published
    summary statistics of the 2011 and 2014 survey rounds.
"""

import os
import math
import logging
from collections import OrderedDict

import numpy as np
import pandas as pd
from scipy import optimize, sparse, stats
from scipy.sparse import linalg as sparse_linalg

from .diagnostics import build_weights
from .errors import ValidationError
from .models import (
    CHILD_COLUMNS, CLUSTER_COLUMNS, COVARIATES, LIGHT_COLUMNS, WEALTH_QUINTILES,
    Z_SCORES, ScenarioConfig,
)
from .utilities import append_to, spawn_generators

logger = logging.getLogger(__name__)

__all__ = [
    'DIVISIONS', 'BOUNDS', 'DEFAULT_COEFFICIENTS', 'DEFAULT_OUTCOME_MEANS',
    'BINARY_THRESHOLDS',
]

BOUNDS = {'lat': (20.7, 26.6), 'lon': (88.0, 92.7)}

DIVISIONS = OrderedDict([
    ('Barisal', (22.70, 90.37)),
    ('Chittagong', (22.36, 91.78)),
    ('Dhaka', (23.81, 90.41)),
    ('Khulna', (22.85, 89.54)),
    ('Rajshahi', (24.37, 88.60)),
    ('Rangpur', (25.74, 89.28)),
    ('Sylhet', (24.89, 91.87)),
])

# child_age_months keeps its survey column name but holds completed years,
# 0 to 4. Its coefficients are per year of age.
DEFAULT_COEFFICIENTS = {
    'haz': {
        'log_radiance': 0.06, 'log_radiance_sq': 0.0, 'year': 0.10,
        'child_age_months': -0.20, 'mother_age_first_birth': 0.06,
        'has_electricity': 0.25, 'wealth_poorest': -0.075, 'mother_educ_years': 0.02,
    },
    'whz': {
        'log_radiance': 0.05, 'log_radiance_sq': 0.0, 'year': 0.04,
        'child_age_months': -0.15, 'mother_age_first_birth': 0.03,
        'has_electricity': 0.157, 'wealth_poorest': -0.095, 'mother_educ_years': 0.0,
    },
    'waz': {
        'log_radiance': 0.07, 'log_radiance_sq': 0.0, 'year': 0.09,
        'child_age_months': -0.20, 'mother_age_first_birth': 0.05,
        'has_electricity': 0.26, 'wealth_poorest': -0.113, 'mother_educ_years': 0.01,
    },
}

DEFAULT_OUTCOME_MEANS = {'haz': -1.6, 'whz': -0.91, 'waz': -1.54}

BINARY_THRESHOLDS = OrderedDict([
    ('stunted', 'haz'),
    ('wasted', 'whz'),
    ('underweight', 'waz'),
])

KM_PER_DEGREE = 111.195
MATCHED_SHIFT_KM = (0.0, 1.2)
UNMATCHED_SHIFT_KM = (3.0, 6.0)
LIGHT_NOISE = 0.1
WEALTH_SHARES = (0.221, 0.193, 0.191, 0.200, 0.195)
MISSING_CANDIDATES = Z_SCORES + ('mother_bmi', 'mother_educ_years', 'father_educ_years')


@append_to(__all__)
def scenario_config(config, **overrides):
    """
        ScenarioConfig from the SIM_* keys of an application config;
        non-None overrides win.
    """
    values = {
        'n_clusters': config['SIM_CLUSTERS'],
        'households_per_cluster': config['SIM_HOUSEHOLDS'],
        'n_children': config.get('SIM_CHILDREN'),
        'survey_years': tuple(config['SIM_YEARS']),
        'light_mean': config['SIM_LIGHT_MEAN'],
        'light_sd': config['SIM_LIGHT_SD'],
        'light_min': config.get('SIM_LIGHT_MIN'),
        'light_max': config.get('SIM_LIGHT_MAX'),
        'light_growth': config['SIM_LIGHT_GROWTH'],
        'cluster_sd': config['SIM_CLUSTER_SD'],
        'noise_sd': config['SIM_NOISE_SD'],
        'rho': config['SIM_RHO'],
        'seed': config['SEED'],
    }
    values.update((key, value) for key, value in overrides.items() if value is not None)
    return ScenarioConfig(**values)


def _nearest_division(lat, lon):
    centroids = np.array(list(DIVISIONS.values()))
    distances = (lat[:, None] - centroids[None, :, 0]) ** 2 + (
        (lon[:, None] - centroids[None, :, 1]) * np.cos(np.radians(lat[:, None]))
    ) ** 2
    names = np.array(list(DIVISIONS))
    return names[np.argmin(distances, axis=1)]


@append_to(__all__)
def place_sites(n, rng):
    """ n light cluster sites, uniform over the bounding box. """
    lat = rng.uniform(*BOUNDS['lat'], size=n)
    lon = rng.uniform(*BOUNDS['lon'], size=n)
    return pd.DataFrame({
        'cluster_id': np.arange(1, n + 1),
        'lat': lat,
        'lon': lon,
        'division': _nearest_division(lat, lon),
    })


def _displace(lat, lon, km, rng):
    bearing = rng.uniform(0, 2 * math.pi, size=len(lat))
    new_lat = lat + km * np.cos(bearing) / KM_PER_DEGREE
    new_lon = lon + km * np.sin(bearing) / (KM_PER_DEGREE * np.cos(np.radians(lat)))
    return new_lat, new_lon


@append_to(__all__)
def survey_clusters(sites, years, unmatched_share, rng):
    """
        Survey clusters per round and the site each one was drawn near.

        First-round clusters sit on the sites and share their ids. Later
        rounds get fresh ids and are displaced up to 1.2 km, except an
        unmatched_share of them moved 3 to 6 km away.
    """
    n = len(sites)
    frames, site_index = [], []
    for position, year in enumerate(years):
        lat = sites['lat'].to_numpy()
        lon = sites['lon'].to_numpy()
        if position:
            km = rng.uniform(*MATCHED_SHIFT_KM, size=n)
            far = rng.uniform(size=n) < unmatched_share
            km[far] = rng.uniform(*UNMATCHED_SHIFT_KM, size=int(far.sum()))
            lat, lon = _displace(lat, lon, km, rng)
        frames.append(pd.DataFrame({
            'cluster_id': np.arange(1, n + 1) + position * n,
            'lat': lat,
            'lon': lon,
            'division': sites['division'].to_numpy(),
            'year': year,
        }))
        site_index.append(np.arange(n))
    return pd.concat(frames, ignore_index=True)[list(CLUSTER_COLUMNS)], np.concatenate(site_index)


def _clipped(values, lower, upper):
    return np.clip(values, lower if lower is not None else 0.0,
                   upper if upper is not None else np.inf)


def _light_sample(scores, sigma, mean, lower, upper):
    """ Log-normal values rescaled until their clipped mean is mean. """
    values = np.exp(sigma * (scores - scores.max()))
    for _ in range(100):
        values = _clipped(values * mean / values.mean(), lower, upper)
        if abs(values.mean() - mean) <= 1e-12 * mean:
            break
    return values


@append_to(__all__)
def calibrate_light_scale(mean, sd, lower=None, upper=None, points=2000):
    """
        Log-scale sigma whose clipped log-normal has standard deviation sd
        at the given mean, found on an even quantile grid. Falls back to
        the moment-matched sigma when clipping makes sd unreachable.
    """
    scores = stats.norm.ppf((np.arange(points) + 0.5) / points)

    def gap(sigma):
        return _light_sample(scores, sigma, mean, lower, upper).std() - sd

    sigmas = np.linspace(0.05, 4.0, 80)
    above = [position for position, sigma in enumerate(sigmas) if gap(sigma) >= 0]
    if not above or above[0] == 0:
        moments = math.sqrt(math.log1p((sd / mean) ** 2))
        logger.warning('Light sd {} unreachable within the bounds, using sigma {:.4f}'.format(
            sd, moments,
        ))
        return moments
    return optimize.brentq(gap, sigmas[above[0] - 1], sigmas[above[0]], xtol=1e-10)


@append_to(__all__)
def draw_lights(sites, config, rng):
    """
        Radiance per site and round, as an (n_sites, n_rounds) array.

        First-round values are stratified log-normal draws rescaled to the
        first-round mean; later rounds grow by light_growth per round with
        mean-one noise. The pooled mean over rounds targets light_mean.
    """
    n = len(sites)
    rounds = len(config.survey_years)
    growth = (1.0 + config.light_growth) ** np.arange(rounds)
    first_mean = config.light_mean * rounds / growth.sum()
    sigma = calibrate_light_scale(
        first_mean, config.light_sd * first_mean / config.light_mean,
        config.light_min, config.light_max,
    )
    strata = (rng.permutation(n) + rng.uniform(size=n)) / n
    radiance = np.empty((n, rounds))
    radiance[:, 0] = _light_sample(
        stats.norm.ppf(strata), sigma, first_mean, config.light_min, config.light_max,
    )
    for position in range(1, rounds):
        noise = np.exp(LIGHT_NOISE * rng.normal(size=n) - LIGHT_NOISE ** 2 / 2)
        radiance[:, position] = _clipped(
            radiance[:, 0] * growth[position] * noise, config.light_min, config.light_max,
        )
    logger.debug('Light sigma {:.4f}, first-round mean {:.4f}'.format(sigma, radiance[:, 0].mean()))
    return radiance


def _light_frame(sites, years, radiance):
    return pd.DataFrame({
        'cluster_id': np.tile(sites['cluster_id'].to_numpy(), len(years)),
        'year': np.repeat(years, len(sites)),
        'radiance': radiance.T.ravel(),
    })[list(LIGHT_COLUMNS)]


@append_to(__all__)
def allocate_children(n_rows, config, rng):
    """ Cluster row of every child: households_per_cluster each, or n_children split evenly at random. """
    if config.n_children is None:
        counts = np.full(n_rows, config.households_per_cluster)
    else:
        counts = rng.multinomial(config.n_children, np.full(n_rows, 1.0 / n_rows))
    return np.repeat(np.arange(n_rows), counts)


def _rounded(values, lower, upper):
    return np.clip(np.round(values), lower, upper)


def _calibrated_intercept(target, scores):
    """ a with mean(expit(a + scores)) == target. """
    return optimize.brentq(lambda a: stats.logistic.cdf(a + scores).mean() - target, -30, 30)


@append_to(__all__)
def draw_covariates(light_z, rng):
    """
        Child, parental and household attributes matching the pooled
        survey means. light_z is the standardized log light of each child;
        wealth and electricity rise with it, television needs electricity.
    """
    n = len(light_z)
    mother = rng.normal(size=n)
    father = 0.5 * mother + math.sqrt(0.75) * rng.normal(size=n)
    shape, scale = 7.14 ** 2 / 3.285 ** 2, 3.285 ** 2 / 7.14
    frame = pd.DataFrame({
        'mother_educ_years': _rounded(3.215 + 1.522 * mother, 0, 8),
        'father_educ_years': _rounded(3.490 + 1.566 * father, 0, 8),
        'mother_age_first_birth': _rounded(11 + rng.gamma(shape, scale, size=n), 11, 46),
        'birth_order': np.minimum(1 + rng.poisson(1.298, size=n), 14),
        'mother_bmi': _rounded(rng.normal(2120.879, 373.003, size=n), 1220, 4549),
        'child_age_months': rng.integers(0, 5, size=n),  # completed years
        'child_sex': (rng.uniform(size=n) < 0.515).astype(int),
    })
    logits = np.log(WEALTH_SHARES)[None, :] + 0.25 * (np.arange(5) - 2)[None, :] * light_z[:, None]
    weights = np.exp(logits)
    cumulative = np.cumsum(weights / weights.sum(axis=1, keepdims=True), axis=1)
    quintile = np.minimum((rng.uniform(size=(n, 1)) > cumulative).sum(axis=1), 4)
    for position, name in enumerate(WEALTH_QUINTILES):
        frame[name] = (quintile == position).astype(int)
    electricity = _calibrated_intercept(0.602, 1.2 * light_z)
    frame['has_electricity'] = (
        rng.uniform(size=n) < stats.logistic.cdf(electricity + 1.2 * light_z)
    ).astype(int)
    frame['owns_tv'] = (
        (frame['has_electricity'] == 1) & (rng.uniform(size=n) < 0.409 / 0.602)
    ).astype(int)
    return frame[list(COVARIATES)]


@append_to(__all__)
def cluster_effects(sites, config, rng):
    """
        Per-site effects u = (I - rho W)^-1 e with e ~ N(0, cluster_sd^2)
        and W the row-standardized nearest-neighbour weights of the sites.
    """
    e = config.cluster_sd * rng.normal(size=len(sites))
    if config.rho == 0 or config.cluster_sd == 0:
        return e
    W = build_weights(sites, 'knn', k=config.neighbours).matrix
    system = (sparse.identity(len(sites), format='csc') - config.rho * W).tocsc()
    return sparse_linalg.spsolve(system, e)


def _term_values(children, light, rounds):
    centred = light - light.mean()
    values = {'log_radiance': light, 'log_radiance_sq': centred ** 2, 'year': rounds}
    values.update((name, children[name].to_numpy(dtype=float)) for name in COVARIATES)
    return values


@append_to(__all__)
def generate(config=None):
    """
        Draw a scenario. Returns an OrderedDict of DataFrames: clusters,
        lights, children (the three input tables) and truth, the
        coefficient of every term per outcome with the calibrated
        intercept and the noise settings.
    """
    config = config or ScenarioConfig()
    coefficients = config.coefficients or DEFAULT_COEFFICIENTS
    means = config.outcome_means or DEFAULT_OUTCOME_MEANS
    site_rng, cluster_rng, light_rng, child_rng, covariate_rng, outcome_rng, missing_rng = (
        spawn_generators(config.seed, 7)
    )
    years = np.asarray(config.survey_years, dtype=int)

    sites = place_sites(config.n_clusters, site_rng)
    clusters, site_of_cluster = survey_clusters(sites, years, config.unmatched_share, cluster_rng)
    radiance = draw_lights(sites, config, light_rng)
    lights = _light_frame(sites, years, radiance)

    row_of_child = allocate_children(len(clusters), config, child_rng)
    if len(row_of_child) == 0:
        raise ValidationError('n_children', 0, 'scenario has no children')
    site = site_of_cluster[row_of_child]
    rounds = row_of_child // config.n_clusters
    light = np.log(radiance[site, rounds])
    children = pd.DataFrame({
        'child_id': np.arange(1, len(row_of_child) + 1),
        'cluster_id': clusters['cluster_id'].to_numpy()[row_of_child],
        'survey_year': years[rounds],
    })
    spread = light.std()
    light_z = (light - light.mean()) / (spread if spread > 0 else 1.0)
    children = pd.concat([children, draw_covariates(light_z, covariate_rng)], axis=1)

    values = _term_values(children, light, rounds.astype(float))
    truth = []
    for outcome in Z_SCORES:
        terms = coefficients.get(outcome, {})
        unknown = sorted(set(terms) - set(values))
        if unknown:
            raise ValidationError('coefficients', unknown, 'unknown term(s) for {}: {}'.format(
                outcome, ', '.join(unknown),
            ))
        linear = sum((value * values[term] for term, value in terms.items()), np.zeros(len(light)))
        effect = cluster_effects(sites, config, outcome_rng)[site]
        intercept = means[outcome] - linear.mean() - effect.mean()
        noise = config.noise_sd * outcome_rng.normal(size=len(light))
        children[outcome] = intercept + linear + effect + noise
        truth.append((outcome, 'intercept', intercept))
        truth.extend((outcome, term, float(value)) for term, value in sorted(terms.items()))
        truth.extend([
            (outcome, 'cluster_sd', config.cluster_sd),
            (outcome, 'noise_sd', config.noise_sd),
            (outcome, 'rho', config.rho),
        ])
    for binary, score in BINARY_THRESHOLDS.items():
        children[binary] = (children[score] < -2).astype(float)

    missing = missing_rng.choice(len(children), int(round(config.missing_share * len(children))),
                                 replace=False)
    columns = missing_rng.choice(MISSING_CANDIDATES, size=len(missing))
    for row, column in zip(missing, columns):
        children.loc[row, column] = np.nan
        for binary, score in BINARY_THRESHOLDS.items():
            if score == column:
                children.loc[row, binary] = np.nan

    logger.info('Scenario: {} clusters, {} children, seed {}'.format(
        len(clusters), len(children), config.seed,
    ))
    return OrderedDict([
        ('clusters', clusters),
        ('lights', lights),
        ('children', children[list(CHILD_COLUMNS)]),
        ('truth', pd.DataFrame(truth, columns=['outcome', 'term', 'value'])),
    ])


@append_to(__all__)
def write_scenario(scenario, directory):
    """ Write every table of a scenario as <name>.csv; returns the paths by name. """
    os.makedirs(directory, exist_ok=True)
    paths = OrderedDict()
    for name, frame in scenario.items():
        path = os.path.join(directory, '{}.csv'.format(name))
        frame.to_csv(path, index=False, float_format='%.10g')
        paths[name] = path
        logger.info('Wrote {} rows to {}'.format(len(frame), path))
    return paths
