# (c) 2026 lumenfit authors

"""
    Load the survey tables, match survey clusters to the nearest light
    cluster and assemble the analysis panel.

    Matching happens within each survey year. The matched light cluster
    id links observations across rounds, so it doubles as the grouping
    for cluster fixed effects.
"""

import logging
from collections import OrderedDict

import numpy as np
import pandas as pd

from .errors import ValidationError
from .models import (
    AnalysisPanel, ChildObservation, Matching, MergeReport, CLUSTER_COLUMNS, LIGHT_COLUMNS,
    CHILD_COLUMNS, Z_SCORES, BINARY_OUTCOMES, BINARY_COVARIATES,
    WEALTH_QUINTILES, COVARIATES, MAX_RADIANCE,
)
from .utilities import append_to, parallel_map

logger = logging.getLogger(__name__)

__all__ = ['EARTH_RADIUS_KM', 'DROP_REASONS']

EARTH_RADIUS_KM = 6371.0088

DROP_REASONS = (
    'unmatched cluster',
    'missing radiance',
    'nonpositive radiance',
    'missing outcome',
    'missing covariate',
)


def _check_bounds(latitude, longitude):
    latitude = np.asarray(latitude, dtype=float)
    longitude = np.asarray(longitude, dtype=float)
    bad = ~(np.abs(latitude) <= 90)
    if bad.any():
        raise ValidationError('latitude', latitude[bad].ravel()[0])
    bad = ~(np.abs(longitude) <= 180)
    if bad.any():
        raise ValidationError('longitude', longitude[bad].ravel()[0])
    return latitude, longitude


@append_to(__all__)
def haversine_km(a, b):
    """ Great-circle distance in km between two (latitude, longitude) pairs. """
    return float(haversine_matrix([a[0]], [a[1]], [b[0]], [b[1]])[0, 0])


@append_to(__all__)
def haversine_matrix(lat1, lon1, lat2, lon2):
    """ Distances in km between every first point and every second point. """
    lat1, lon1 = _check_bounds(lat1, lon1)
    lat2, lon2 = _check_bounds(lat2, lon2)
    phi1 = np.radians(lat1)[:, None]
    phi2 = np.radians(lat2)[None, :]
    dphi = phi2 - phi1
    dlambda = np.radians(lon2)[None, :] - np.radians(lon1)[:, None]
    h = (
        np.sin(dphi / 2) ** 2
        + np.cos(phi1) * np.cos(phi2) * np.sin(dlambda / 2) ** 2
    )
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


@append_to(__all__)
def distance_matrix(sources, targets, block=256):
    """
        Pairwise distances between two frames with lat and lon columns.

        Row blocks are computed in the worker pool and stacked in order.
    """
    lat1, lon1 = _check_bounds(sources['lat'], sources['lon'])
    lat2, lon2 = _check_bounds(targets['lat'], targets['lon'])
    if len(lat1) == 0 or len(lat2) == 0:
        return np.zeros((len(lat1), len(lat2)))
    starts = range(0, len(lat1), block)
    blocks = parallel_map(
        lambda start: haversine_matrix(
            lat1[start:start + block], lon1[start:start + block], lat2, lon2,
        ),
        starts,
    )
    return np.vstack(blocks)


def _require_columns(frame, columns, source):
    missing = [name for name in columns if name not in frame.columns]
    if missing:
        raise ValidationError('header', source,
            '{} lacks column(s): {}'.format(source, ', '.join(missing)))


@append_to(__all__)
def load_clusters(path):
    """ Read clusters.csv: cluster_id, lat, lon, division, year. """
    frame = pd.read_csv(path)
    _require_columns(frame, CLUSTER_COLUMNS, path)
    frame = frame[list(CLUSTER_COLUMNS)].copy()
    frame['cluster_id'] = frame['cluster_id'].astype(int)
    frame['year'] = frame['year'].astype(int)
    frame['division'] = frame['division'].astype(str)
    _check_bounds(frame['lat'], frame['lon'])
    duplicated = frame.duplicated(['year', 'cluster_id'])
    if duplicated.any():
        row = frame[duplicated].iloc[0]
        raise ValidationError('cluster_id', int(row['cluster_id']),
            'cluster_id {} repeated in year {}'.format(row['cluster_id'], row['year']))
    logger.info('Loaded {} clusters from {}'.format(len(frame), path))
    return frame


@append_to(__all__)
def load_lights(path):
    """ Read lights.csv: cluster_id, year, radiance. """
    frame = pd.read_csv(path)
    _require_columns(frame, LIGHT_COLUMNS, path)
    frame = frame[list(LIGHT_COLUMNS)].copy()
    frame['cluster_id'] = frame['cluster_id'].astype(int)
    frame['year'] = frame['year'].astype(int)
    radiance = frame['radiance'].to_numpy(dtype=float)
    bad = ~((radiance >= 0) & (radiance <= MAX_RADIANCE))
    if bad.any():
        raise ValidationError('radiance', radiance[bad][0])
    duplicated = frame.duplicated(['cluster_id', 'year'])
    if duplicated.any():
        row = frame[duplicated].iloc[0]
        raise ValidationError('cluster_id', int(row['cluster_id']),
            'two light records for cluster {} in {}'.format(row['cluster_id'], row['year']))
    logger.info('Loaded {} light records from {}'.format(len(frame), path))
    return frame


@append_to(__all__)
def load_children(path):
    """
        Read children.csv. Missing values are allowed; whatever is present
        must satisfy the ChildObservation invariants.
    """
    frame = pd.read_csv(path)
    _require_columns(frame, CHILD_COLUMNS, path)
    frame = frame[list(CHILD_COLUMNS)].copy()
    validate_children(frame)
    logger.info('Loaded {} children from {}'.format(len(frame), path))
    return frame


@append_to(__all__)
def validate_children(frame):
    """
        Screen every row against the ChildObservation invariants. The
        first offending row is rebuilt as a ChildObservation, whose own
        checks raise the ValidationError.
    """
    bad = np.zeros(len(frame), dtype=bool)
    for name in Z_SCORES:
        bad |= np.isinf(frame[name].to_numpy(dtype=float))
    for name in BINARY_OUTCOMES + BINARY_COVARIATES:
        bad |= (frame[name].notna() & ~frame[name].isin([0, 1])).to_numpy()
    quintiles = frame[list(WEALTH_QUINTILES)]
    bad |= (quintiles.notna().all(axis=1) & (quintiles.sum(axis=1) != 1)).to_numpy()
    if not bad.any():
        return
    row = frame.iloc[int(np.flatnonzero(bad)[0])]
    logger.warning('{} invalid child rows, first is child {}'.format(
        int(bad.sum()), row['child_id'],
    ))
    ChildObservation.from_row(row)
    raise ValidationError('child_id', row['child_id'])


@append_to(__all__)
def light_sites(clusters, lights, year):
    """
        Candidate light clusters for one year, with coordinates.

        A light record takes the coordinates of the cluster row with the
        same id and year, or else of the earliest row with that id.
    """
    records = lights[lights['year'] == year][['cluster_id', 'radiance']]
    located = clusters.sort_values(['cluster_id', 'year'])
    same_year = located[located['year'] == year].drop_duplicates('cluster_id')
    earliest = located.drop_duplicates('cluster_id')
    coordinates = pd.concat([same_year, earliest]).drop_duplicates('cluster_id')
    sites = records.merge(
        coordinates[['cluster_id', 'lat', 'lon']], on='cluster_id', how='inner',
    )
    lost = len(records) - len(sites)
    if lost:
        logger.warning('{} light records in {} have no cluster coordinates'.format(
            lost, year,
        ))
    return sites.sort_values('cluster_id').reset_index(drop=True)


@append_to(__all__)
def match_nearest(children, lights, radius_km=1.5):
    """
        Map each source cluster_id to the nearest light cluster strictly
        within radius_km, or to None.

        children and lights are frames with cluster_id, lat and lon.
        Equal distances go to the lowest light cluster_id.
    """
    if not radius_km > 0:
        raise ValidationError('radius_km', radius_km)
    if len(lights) == 0:
        raise ValidationError('lights', 0, 'empty light cluster set')
    lights = lights.sort_values('cluster_id', kind='mergesort')
    light_ids = lights['cluster_id'].to_numpy()
    distances = distance_matrix(children, lights)
    nearest = np.argmin(distances, axis=1)
    mapping, distance_km = OrderedDict(), OrderedDict()
    for row, cluster_id in enumerate(children['cluster_id'].to_numpy()):
        best = distances[row, nearest[row]]
        key = int(cluster_id)
        distance_km[key] = float(best)
        mapping[key] = int(light_ids[nearest[row]]) if best < radius_km else None
    return mapping, distance_km


@append_to(__all__)
def match_survey(clusters, lights, children, radius_km=1.5):
    """ Run match_nearest per survey year over the clusters children use. """
    mapping, distance_km = OrderedDict(), OrderedDict()
    for year in sorted(children['survey_year'].unique()):
        used = children.loc[children['survey_year'] == year, 'cluster_id'].unique()
        sources = clusters[
            (clusters['year'] == year) & clusters['cluster_id'].isin(used)
        ]
        missing = sorted(set(int(i) for i in used) - set(sources['cluster_id']))
        for cluster_id in missing:
            mapping[(int(year), cluster_id)] = None
            distance_km[(int(year), cluster_id)] = float('inf')
        sites = light_sites(clusters, lights, year)
        if len(sources) == 0:
            continue
        year_map, year_km = match_nearest(sources, sites, radius_km)
        for cluster_id, light_id in year_map.items():
            mapping[(int(year), cluster_id)] = light_id
            distance_km[(int(year), cluster_id)] = year_km[cluster_id]
        logger.info('Year {}: {} of {} clusters matched within {} km'.format(
            year, sum(v is not None for v in year_map.values()), len(year_map),
            radius_km,
        ))
    matching = Matching(mapping, distance_km, radius_km)
    if matching.unmatched:
        logger.warning('{} survey clusters have no light cluster within {} km'.format(
            len(matching.unmatched), radius_km,
        ))
    return matching


@append_to(__all__)
def build_panel(children, lights, matching, drop_incomplete=True,
                covariates=COVARIATES, clusters=None):
    """
        Attach matched radiance to every child and filter the rows.

        Each dropped row is counted under the first reason that applies,
        in DROP_REASONS order. Returns (AnalysisPanel, MergeReport).
    """
    frame = children.copy()
    n_input = len(frame)
    keys = list(zip(frame['survey_year'].astype(int), frame['cluster_id'].astype(int)))
    frame['light_cluster_id'] = [matching.matched(key) for key in keys]
    frame['match_km'] = [matching.distance_km.get(key, float('inf')) for key in keys]
    if clusters is not None:
        divisions = clusters.rename(columns={'year': 'survey_year'})[
            ['cluster_id', 'survey_year', 'division']
        ]
        frame = frame.merge(divisions, on=['cluster_id', 'survey_year'], how='left')
    radiance = lights.rename(columns={
        'cluster_id': 'light_cluster_id', 'year': 'survey_year',
    })[['light_cluster_id', 'survey_year', 'radiance']]
    frame['light_cluster_id'] = frame['light_cluster_id'].astype('Int64')
    radiance = radiance.astype({'light_cluster_id': 'Int64'})
    frame = frame.merge(radiance, on=['light_cluster_id', 'survey_year'], how='left')

    dropped = OrderedDict((reason, 0) for reason in DROP_REASONS)
    keep = np.ones(len(frame), dtype=bool)
    checks = [
        ('unmatched cluster', frame['light_cluster_id'].isna().to_numpy()),
        ('missing radiance', frame['radiance'].isna().to_numpy()),
        ('nonpositive radiance', ~(frame['radiance'].fillna(1.0) > 0).to_numpy()),
    ]
    if drop_incomplete:
        checks.append(('missing outcome', frame[list(Z_SCORES)].isna().any(axis=1).to_numpy()))
        checks.append(('missing covariate', frame[list(covariates)].isna().any(axis=1).to_numpy()))
    for reason, failed in checks:
        hit = keep & failed
        dropped[reason] = int(hit.sum())
        keep &= ~failed
    for reason, count in dropped.items():
        if count:
            logger.warning('Dropped {} rows: {}'.format(count, reason))

    frame = frame[keep].copy()
    frame['light_cluster_id'] = frame['light_cluster_id'].astype(int)
    frame['log_radiance'] = np.log(frame['radiance'].to_numpy(dtype=float))
    if len(frame):
        # mean of logs never exceeds log of mean
        assert frame['log_radiance'].mean() <= np.log(frame['radiance'].mean()) + 1e-12
    report = MergeReport(
        n_input=n_input,
        dropped=dropped,
        unmatched_clusters=matching.unmatched,
        radius_km=matching.radius_km,
    )
    assert report.n_retained == len(frame)
    logger.info('Panel has {} of {} rows'.format(len(frame), n_input))
    return AnalysisPanel(frame), report


@append_to(__all__)
def division_shares(panel):
    """ Share of panel rows per division, largest first. """
    counts = panel.rows['division'].value_counts()
    return (counts / counts.sum()).sort_values(ascending=False, kind='mergesort')


@append_to(__all__)
def merge_inputs(clusters_path, lights_path, children_path, radius_km=1.5,
                 drop_incomplete=True, covariates=COVARIATES):
    """ Load the three tables and run matching and panel assembly. """
    clusters = load_clusters(clusters_path)
    lights = load_lights(lights_path)
    children = load_children(children_path)
    matching = match_survey(clusters, lights, children, radius_km)
    return build_panel(
        children, lights, matching, drop_incomplete, covariates, clusters,
    )
