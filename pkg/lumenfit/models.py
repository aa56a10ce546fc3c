# (c) 2026 lumenfit authors

"""
    Domain types shared by the estimation modules.

    Records that carry arrays keep them as numpy arrays; tables that end
    up in an output file know how to render themselves as a pandas
    DataFrame through the Artifact mixin.
"""

import math
from collections import OrderedDict
from dataclasses import dataclass, field, asdict
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from .errors import ValidationError, ConfigError
from .utilities import append_to, un_camelcase


__all__ = []

OUTCOMES = ('haz', 'whz', 'waz', 'stunted', 'wasted', 'underweight')
Z_SCORES = ('haz', 'whz', 'waz')
BINARY_OUTCOMES = ('stunted', 'wasted', 'underweight')
WEALTH_QUINTILES = (
    'wealth_poorest',
    'wealth_poorer',
    'wealth_middle',
    'wealth_richer',
    'wealth_richest',
)
COVARIATES = (
    'mother_educ_years',
    'father_educ_years',
    'mother_age_first_birth',
    'birth_order',
    'mother_bmi',
    'child_age_months',
    'child_sex',
) + WEALTH_QUINTILES + ('owns_tv', 'has_electricity')
BINARY_COVARIATES = ('child_sex',) + WEALTH_QUINTILES + (
    'owns_tv', 'has_electricity',
)
CLUSTER_COLUMNS = ('cluster_id', 'lat', 'lon', 'division', 'year')
LIGHT_COLUMNS = ('cluster_id', 'year', 'radiance')
CHILD_COLUMNS = ('child_id', 'cluster_id', 'survey_year') + OUTCOMES + COVARIATES
MAX_RADIANCE = 63.0


def check_coordinate(field_name, value, bound):
    if not (-bound <= value <= bound):
        raise ValidationError(field_name, value)


class Artifact(object):
    """
        Common pattern for results that are written to the output directory.

        Subclasses implement to_frame; the artifact class used in file
        names and in the manifest derives from the class name.
    """

    @property
    def artifact_class(self):
        return un_camelcase(type(self).__name__)

    def to_frame(self):
        raise NotImplementedError


@append_to(__all__)
@dataclass(frozen=True)
class GeoCluster:
    """ Survey enumeration area with its centroid. """

    cluster_id: int
    latitude: float
    longitude: float
    division: str
    survey_year: int

    def __post_init__(self):
        check_coordinate('latitude', self.latitude, 90)
        check_coordinate('longitude', self.longitude, 180)


@append_to(__all__)
@dataclass(frozen=True)
class LightRecord:
    """ Nighttime-light radiance of one cluster in one year. """

    cluster_id: int
    year: int
    radiance: float

    def __post_init__(self):
        if not (0 <= self.radiance <= MAX_RADIANCE):
            raise ValidationError('radiance', self.radiance)


@append_to(__all__)
@dataclass(frozen=True)
class ChildObservation:
    """ One child: outcome z-scores, malnutrition flags and covariates. """

    child_id: int
    cluster_id: int
    survey_year: int
    outcomes: dict
    covariates: dict

    def __post_init__(self):
        for name in Z_SCORES:
            value = self.outcomes.get(name)
            if value is not None and not math.isfinite(value):
                raise ValidationError(name, value)
        for name in BINARY_OUTCOMES + BINARY_COVARIATES:
            value = self.outcomes.get(name, self.covariates.get(name))
            if value is not None and value not in (0, 1):
                raise ValidationError(name, value)
        quintiles = [self.covariates.get(name) for name in WEALTH_QUINTILES]
        if None not in quintiles and sum(quintiles) != 1:
            raise ValidationError('wealth_quintile', quintiles,
                'exactly one wealth quintile must be set')

    @classmethod
    def from_row(cls, row):
        """ Build from a mapping with one entry per CHILD_COLUMNS name. """
        def present(value):
            return None if pd.isna(value) else value
        return cls(
            child_id=int(row['child_id']),
            cluster_id=int(row['cluster_id']),
            survey_year=int(row['survey_year']),
            outcomes={name: present(row[name]) for name in OUTCOMES},
            covariates={name: present(row[name]) for name in COVARIATES},
        )


@append_to(__all__)
class AnalysisPanel(object):
    """
        Merged child observations with matched light intensity.

        The rows live in a DataFrame with every ChildObservation column
        plus light_cluster_id, match_km, division, radiance and
        log_radiance. light_cluster_id is the grouping used for cluster
        fixed effects, since it links the survey rounds.
    """

    def __init__(self, frame):
        self.rows = frame.reset_index(drop=True)

    def __len__(self):
        return len(self.rows)

    @property
    def cluster_index(self):
        return self.rows['light_cluster_id'].to_numpy()

    @property
    def year_index(self):
        return self.rows['survey_year'].to_numpy()

    @property
    def years(self):
        return sorted(self.rows['survey_year'].unique())

    def column(self, name):
        if name not in self.rows:
            raise ValidationError('column', name, 'panel has no column {}'.format(name))
        return self.rows[name].to_numpy(dtype=float)

    def subset_year(self, year):
        return AnalysisPanel(self.rows[self.rows['survey_year'] == year])


@append_to(__all__)
@dataclass
class Matching:
    """ Nearest light cluster per (survey_year, cluster_id), or None. """

    mapping: dict
    distance_km: dict
    radius_km: float

    @property
    def unmatched(self):
        return sorted(key for key, value in self.mapping.items() if value is None)

    def matched(self, key):
        return self.mapping.get(key)


@append_to(__all__)
@dataclass
class MergeReport(Artifact):
    """ Row counts of the merge, with the number dropped per reason. """

    n_input: int
    dropped: OrderedDict
    unmatched_clusters: list
    radius_km: float

    @property
    def n_dropped(self):
        return sum(self.dropped.values())

    @property
    def n_retained(self):
        return self.n_input - self.n_dropped

    def to_frame(self):
        rows = [('input', self.n_input)]
        rows.extend(self.dropped.items())
        rows.append(('retained', self.n_retained))
        return pd.DataFrame(rows, columns=['reason', 'rows'])

    def to_text(self):
        lines = ['Merge report (radius {} km)'.format(self.radius_km)]
        lines.extend(
            '  {:<24}{:>8}'.format(reason, count)
            for reason, count in self.to_frame().itertuples(index=False)
        )
        lines.append('  unmatched clusters: {}'.format(len(self.unmatched_clusters)))
        return '\n'.join(lines)


@append_to(__all__)
@dataclass(frozen=True)
class KernelSpec:
    """ Kernel shape and bandwidth, numeric or "silverman". """

    kernel: str = 'gaussian'
    bandwidth: object = 'silverman'

    def __post_init__(self):
        if self.kernel not in ('gaussian', 'epanechnikov'):
            raise ValidationError('kernel', self.kernel)
        if isinstance(self.bandwidth, str):
            if self.bandwidth != 'silverman':
                raise ValidationError('bandwidth', self.bandwidth)
        elif not (self.bandwidth > 0):
            raise ValidationError('bandwidth', self.bandwidth)


@append_to(__all__)
@dataclass(frozen=True)
class SummaryStats:
    mean: float
    std_dev: float
    minimum: float
    maximum: float
    skewness: float
    kurtosis: float
    n: int
    degenerate: bool = False


@append_to(__all__)
@dataclass
class SmoothCurve(Artifact):
    """
        Kernel regression estimate on a grid with a pointwise 95% band.

        defined is False where the estimate could not be computed; fit,
        lower and upper are NaN there.
    """

    grid: np.ndarray
    fit: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    bandwidth: float
    se: np.ndarray = field(repr=False, default=None)
    defined: np.ndarray = field(repr=False, default=None)

    def to_frame(self):
        return pd.DataFrame({
            'grid': self.grid,
            'fit': self.fit,
            'lower': self.lower,
            'upper': self.upper,
        })


@append_to(__all__)
@dataclass
class ImportanceReport(Artifact):
    """ Feature importance normalized to sum to 100. """

    features: Tuple[str, ...]
    scores: np.ndarray
    method: str
    cv_error: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in ('gbm', 'bagging', 'knn_permutation'):
            raise ValidationError('method', self.method)
        scores = np.maximum(np.asarray(self.scores, dtype=float), 0.0)
        total = scores.sum()
        self.scores = scores * (100.0 / total) if total > 0 else scores

    def ranking(self):
        order = sorted(
            range(len(self.features)), key=lambda j: (-self.scores[j], j),
        )
        return [self.features[j] for j in order]

    def to_frame(self):
        return pd.DataFrame({
            'feature': list(self.features),
            'method': self.method,
            'score': self.scores,
        })


@append_to(__all__)
@dataclass(frozen=True)
class RegressionSpec:
    """ Outcome, light polynomial degree, controls, year dummy and FE flag. """

    outcome: str
    degree: int = 4
    covariates: Tuple[str, ...] = ()
    year_dummy: bool = True
    fixed_effects: bool = False
    raw_powers: bool = False
    year: Optional[int] = None
    cluster_robust: bool = False

    def __post_init__(self):
        if self.outcome not in OUTCOMES:
            raise ValidationError('outcome', self.outcome)
        if not (1 <= self.degree <= 5):
            raise ValidationError('degree', self.degree)
        object.__setattr__(self, 'covariates', tuple(self.covariates))

    @property
    def label(self):
        return '{} {}'.format(self.outcome, 'FE' if self.fixed_effects else 'OLS')


@append_to(__all__)
@dataclass
class FitResult:
    """
        Least-squares fit. X and y are the design and response as they
        entered the solver, after any within transformation.
    """

    names: Tuple[str, ...]
    coefficients: np.ndarray
    std_errors: np.ndarray
    t_values: np.ndarray
    p_values: np.ndarray
    r_squared: float
    adj_r_squared: float
    f_statistic: float
    f_df: Tuple[int, int]
    f_p_value: float
    residuals: np.ndarray = field(repr=False)
    fitted: np.ndarray = field(repr=False)
    rss: float
    n: int
    df_resid: int
    sigma2: float
    model: str = 'ols'
    outcome: Optional[str] = None
    cov_type: str = 'classical'
    dropped: Tuple[str, ...] = ()
    X: np.ndarray = field(repr=False, default=None)
    y: np.ndarray = field(repr=False, default=None)
    groups: np.ndarray = field(repr=False, default=None)

    def index(self, name):
        try:
            return self.names.index(name)
        except ValueError:
            raise ValidationError('term', name, 'no term named {}'.format(name))

    def coef(self, name):
        return float(self.coefficients[self.index(name)])

    def se(self, name):
        return float(self.std_errors[self.index(name)])

    @property
    def n_params(self):
        return len(self.names)


@append_to(__all__)
@dataclass(frozen=True)
class AnovaRow:
    label: str
    res_df: int
    rss: float
    df: Optional[int] = None
    sum_sq: Optional[float] = None
    f: Optional[float] = None
    p: Optional[float] = None


@append_to(__all__)
@dataclass
class AnovaTable(Artifact):
    """ Sequential F comparisons of nested models. """

    rows: list

    def to_frame(self):
        return pd.DataFrame(
            [asdict(row) for row in self.rows],
            columns=['label', 'res_df', 'rss', 'df', 'sum_sq', 'f', 'p'],
        )


@append_to(__all__)
@dataclass
class SpatialWeights:
    """
        Sparse n x n weight matrix over ids. isolated lists the ids whose
        row is empty.
    """

    matrix: object = field(repr=False)
    ids: np.ndarray = field(repr=False)
    scheme: str
    parameter: float
    row_standardized: bool
    isolated: tuple = ()

    @property
    def n(self):
        return self.matrix.shape[0]

    def provenance(self):
        if self.scheme == 'knn':
            shape = '{:g}-nearest-neighbour contiguity'.format(self.parameter)
        else:
            shape = 'inverse distance, cutoff {:g} km'.format(self.parameter)
        return 'spatial weights: {}, {} units, {}'.format(
            shape, self.n,
            'row-standardized' if self.row_standardized else 'raw',
        )


@append_to(__all__)
@dataclass(frozen=True)
class TestResult:
    """ A test statistic with its degrees of freedom and p-value. """

    __test__ = False  # not a pytest class

    name: str
    statistic: float
    df1: float
    df2: Optional[float]
    p_value: float
    computable: bool = True
    note: str = ''


@append_to(__all__)
@dataclass(frozen=True)
class ModelFormula:
    """ Response, at most one smooth (variable, k), poly terms, linear terms. """

    response: str
    smooth: Optional[Tuple[str, int]] = None
    polynomials: Tuple[Tuple[str, int], ...] = ()
    linear: Tuple[str, ...] = ()


@append_to(__all__)
@dataclass
class SmoothTerm:
    """
        Penalized cubic regression spline of one variable.

        penalty is the constrained, rescaled second-derivative penalty;
        constraint maps constrained coefficients to the k knot values.
        edf counts the constant absorbed by the intercept, so it runs
        from 2 (affine) to k.
    """

    variable: str
    k: int
    knots: np.ndarray = field(repr=False)
    penalty: np.ndarray = field(repr=False)
    constraint: np.ndarray = field(repr=False)
    columns: slice = None
    lam: float = 0.0
    edf: float = float('nan')


@append_to(__all__)
@dataclass
class GamFit:
    """ Penalized least-squares fit of an additive model. """

    formula: ModelFormula
    names: Tuple[str, ...]
    coefficients: np.ndarray
    std_errors: np.ndarray
    p_values: np.ndarray
    smooth: Optional[SmoothTerm]
    fitted: np.ndarray = field(repr=False)
    residuals: np.ndarray = field(repr=False)
    rss: float
    tss: float
    n: int
    edf_total: float
    sigma2: float
    score: float
    criterion: str
    adj_r_squared: float
    log_likelihood: float
    deviance_explained: float
    covariance: np.ndarray = field(repr=False, default=None)
    X: np.ndarray = field(repr=False, default=None)
    y: np.ndarray = field(repr=False, default=None)
    penalty: np.ndarray = field(repr=False, default=None)
    score_trace: list = field(repr=False, default_factory=list)
    n_parametric: int = 0

    @property
    def outcome(self):
        return self.formula.response


@append_to(__all__)
@dataclass(frozen=True)
class ScenarioConfig:
    """
        Parameters of a synthetic survey.

        coefficients maps each outcome to {term: value}; terms are
        covariate names plus log_radiance, log_radiance_sq (a centred
        square) and year.
    """

    n_clusters: int = 600
    households_per_cluster: int = 7
    n_children: Optional[int] = None
    survey_years: Tuple[int, ...] = (2011, 2014)
    light_mean: float = 1.62
    light_sd: float = 3.54
    light_min: Optional[float] = 0.00023
    light_max: Optional[float] = 29.94
    light_growth: float = 0.0729
    coefficients: dict = None
    outcome_means: dict = None
    cluster_sd: float = 0.3
    noise_sd: float = 1.2
    rho: float = 0.3
    neighbours: int = 5
    unmatched_share: float = 0.02
    missing_share: float = 0.01
    seed: int = 2014

    def __post_init__(self):
        if self.n_clusters < 2:
            raise ValidationError('n_clusters', self.n_clusters)
        if self.households_per_cluster < 1:
            raise ValidationError('households_per_cluster', self.households_per_cluster)
        if self.n_children is not None and self.n_children < 1:
            raise ValidationError('n_children', self.n_children)
        if len(self.survey_years) < 1:
            raise ValidationError('survey_years', self.survey_years)
        for name in ('cluster_sd', 'noise_sd', 'light_growth'):
            if getattr(self, name) < 0:
                raise ValidationError(name, getattr(self, name))
        if not (self.light_mean > 0 and self.light_sd > 0):
            raise ValidationError('light_sd', self.light_sd)
        if not (-1 < self.rho < 1):
            raise ValidationError('rho', self.rho)
        for name in ('unmatched_share', 'missing_share'):
            if not (0 <= getattr(self, name) < 1):
                raise ValidationError(name, getattr(self, name))

    @property
    def log_scale(self):
        """ sigma of the log-normal with the configured mean and sd. """
        return math.sqrt(math.log1p((self.light_sd / self.light_mean) ** 2))

    @property
    def log_location(self):
        return math.log(self.light_mean) - self.log_scale ** 2 / 2


@append_to(__all__)
@dataclass(frozen=True)
class PipelineConfig:
    """
        Resolved settings of a pipeline run. Built from the application
        config with from_mapping, where command-line overrides win.
    """

    clusters_path: str
    lights_path: str
    children_path: str
    output_dir: str
    seed: int
    radius_km: float
    drop_incomplete: bool
    outcomes: Tuple[str, ...]
    max_degree: int
    regression_degree: int
    covariates: Tuple[str, ...]
    cluster_robust: bool
    kernel: str
    bandwidth: object
    kde_grid_points: int
    grid_points: int
    local_degree: int
    high_light_threshold: float
    gbm_trees: int
    gbm_depth: int
    learning_rate: float
    min_leaf: int
    bagging_trees: int
    knn_neighbors: int
    cv_folds: int
    light_feature_degree: int
    gam_basis_dimension: int
    gam_criterion: str
    gam_scale: Optional[float]
    weight_scheme: str
    weight_neighbors: int
    weight_cutoff_km: Optional[float]

    def __post_init__(self):
        for name in ('outcomes', 'covariates'):
            value = getattr(self, name)
            if isinstance(value, str):
                value = (value,)
            object.__setattr__(self, name, tuple(value))
        if not self.radius_km > 0:
            raise ConfigError('RADIUS_KM must be positive, got {}'.format(self.radius_km))
        if not 1 <= self.max_degree <= 5:
            raise ConfigError('MAX_DEGREE must be in 1..5, got {}'.format(self.max_degree))
        if not 1 <= self.regression_degree <= 5:
            raise ConfigError('REGRESSION_DEGREE must be in 1..5, got {}'.format(
                self.regression_degree,
            ))
        unknown = [name for name in self.outcomes if name not in OUTCOMES]
        if unknown:
            raise ConfigError('unknown outcome(s): {}'.format(', '.join(unknown)))
        unknown = [name for name in self.covariates if name not in COVARIATES]
        if unknown:
            raise ConfigError('unknown covariate(s): {}'.format(', '.join(unknown)))
        if self.gam_criterion not in ('gcv', 'ubre'):
            raise ConfigError('GAM_CRITERION must be gcv or ubre')
        if self.gam_criterion == 'ubre' and self.gam_scale is None:
            raise ConfigError('GAM_CRITERION = ubre needs GAM_SCALE')
        if self.weight_scheme not in ('knn', 'inverse_distance'):
            raise ConfigError('WEIGHT_SCHEME must be knn or inverse_distance')
        if self.weight_scheme == 'inverse_distance' and self.weight_cutoff_km is None:
            raise ConfigError('WEIGHT_SCHEME = inverse_distance needs WEIGHT_CUTOFF_KM')

    @classmethod
    def from_mapping(cls, config, **overrides):
        """ Read every field from config[FIELD_NAME]; non-None overrides win. """
        values = {}
        for name in cls.__dataclass_fields__:
            value = overrides.get(name)
            if value is None:
                try:
                    value = config[name.upper()]
                except KeyError:
                    raise ConfigError('missing configuration key {}'.format(name.upper()))
            values[name] = value
        return cls(**values)

    def input_paths(self):
        return OrderedDict([
            ('clusters', self.clusters_path),
            ('lights', self.lights_path),
            ('children', self.children_path),
        ])

    def as_dict(self):
        return asdict(self)
