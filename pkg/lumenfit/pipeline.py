# (c) 2026 lumenfit authors

"""
    The estimation pipeline, stage by stage.

    Stages run in a fixed order: merge, summarize, kde, npreg, select,
    anova, regress, diagnose, gam. Every stage after merge works on the
    panel that merge assembled, so merge always runs. Each stage writes
    its artifacts to the output directory and registers them in the
    manifest. When a stage fails, every file written during the run is
    removed and a StageError names the stage.
"""

import os
import logging
from collections import OrderedDict

import pandas as pd

from .diagnostics import residual_diagnostics
from .errors import StageError, ValidationError
from .feature_select import cv_frame, importance_frame, select_features
from .gam import gam_battery, smooth_curve
from .geo_merge import division_shares, load_children, load_clusters, load_lights, match_survey, build_panel
from .linear_models import polynomial_anova, regression_battery
from .models import KernelSpec, RegressionSpec, Z_SCORES
from .nonparam import smooth_outcomes
from .report import (
    Manifest, diagnostics_frame, format_anova, format_diagnostics, format_smooth_block,
    format_table, regression_frame, smooth_frame, write_frame, write_text,
)
from .summary import density_frames, light_shares, summary_table, year_change
from .utilities import append_to

logger = logging.getLogger(__name__)

__all__ = ['STAGES']

SUMMARY_COLUMNS = ('radiance', 'log_radiance') + Z_SCORES + (
    'stunted', 'wasted', 'underweight',
)


class PipelineRun(object):
    """ State shared by the stages of one run. """

    def __init__(self, config, models=('ols', 'fe')):
        self.config = config
        self.models = tuple(models)
        self.directory = config.output_dir
        self.manifest = Manifest(config.output_dir, config.seed, config.as_dict())
        self.written = []
        self.clusters = None
        self.panel = None

    def _register(self, artifact_class, path):
        self.written.append(path)
        return self.manifest.add(artifact_class, path)

    def frame(self, artifact_class, frame, name=None):
        return self._register(artifact_class, write_frame(frame, self.directory, name or artifact_class))

    def text(self, artifact_class, text, name=None):
        return self._register(artifact_class, write_text(text, self.directory, name or artifact_class))

    def remove_outputs(self):
        for path in self.written:
            if os.path.exists(path):
                os.remove(path)
                logger.debug('Removed {}'.format(path))
        self.written = []

    @property
    def kernel(self):
        return KernelSpec(self.config.kernel, self.config.bandwidth)

    def spec(self, outcome, **changes):
        values = dict(
            outcome=outcome, degree=self.config.regression_degree,
            covariates=self.config.covariates, cluster_robust=self.config.cluster_robust,
        )
        values.update(changes)
        return RegressionSpec(**values)


def merge(run):
    config = run.config
    run.clusters = load_clusters(config.clusters_path)
    lights = load_lights(config.lights_path)
    children = load_children(config.children_path)
    matching = match_survey(run.clusters, lights, children, config.radius_km)
    run.panel, report = build_panel(
        children, lights, matching, config.drop_incomplete, config.covariates, run.clusters,
    )
    if len(run.panel) == 0:
        raise ValidationError('panel', 0, 'no rows survive the merge')
    run.frame(report.artifact_class, report.to_frame())
    text = report.to_text()
    shares = division_shares(run.panel)
    if len(shares):
        text += '\n  largest division: {} ({:.1%} of rows)'.format(shares.index[0], shares.iloc[0])
    run.text(report.artifact_class, text)


def summarize(run):
    columns = [name for name in SUMMARY_COLUMNS + run.config.covariates if name in run.panel.rows]
    table = summary_table(run.panel, list(OrderedDict.fromkeys(columns)))
    run.frame('summary', table)
    change = year_change(table)
    run.frame('summary', pd.DataFrame({'variable': change.index, 'percent_change': change.values}),
              'summary_change')
    shares = light_shares(run.panel.column('radiance'), run.config.high_light_threshold)
    run.frame('summary', pd.DataFrame([shares]), 'light_shares')


def kde_stage(run):
    frames = []
    for column in ('radiance', 'log_radiance'):
        frame = density_frames(run.panel, column, run.kernel, run.config.kde_grid_points)
        frame.insert(0, 'variable', column)
        frames.append(frame)
    run.frame('kde', pd.concat(frames, ignore_index=True))


def npreg(run):
    frame = smooth_outcomes(
        run.panel, run.config.outcomes, run.config.local_degree, run.kernel,
        run.config.grid_points,
    )
    run.frame('npreg', frame)


def select(run):
    config = run.config
    importance, errors = [], []
    for outcome in config.outcomes:
        reports = select_features(
            run.panel, outcome, n_trees=config.gbm_trees, max_depth=config.gbm_depth,
            learning_rate=config.learning_rate, min_leaf=config.min_leaf,
            bagging_trees=config.bagging_trees, k=config.knn_neighbors, folds=config.cv_folds,
            seed=config.seed, covariates=config.covariates,
            light_degree=config.light_feature_degree,
        )
        importance.append(importance_frame(reports, outcome))
        errors.append(cv_frame(reports, outcome))
    run.frame('importance', pd.concat(importance, ignore_index=True))
    run.frame('importance', pd.concat(errors, ignore_index=True), 'importance_cv')


def anova(run):
    frames, texts = [], []
    for outcome in run.config.outcomes:
        _, table = polynomial_anova(
            run.panel, outcome, run.config.max_degree, run.config.covariates,
        )
        frame = table.to_frame()
        frame.insert(0, 'outcome', outcome)
        frames.append(frame)
        texts.append(format_anova(table, 'Nested light polynomials: {}'.format(outcome)))
    run.frame('anova', pd.concat(frames, ignore_index=True))
    run.text('anova', '\n\n'.join(texts))


def regress(run):
    config = run.config
    fits = regression_battery(
        run.panel, config.outcomes, config.regression_degree, config.covariates,
        config.cluster_robust, by_year='ols' in run.models,
    )
    fits = [fit for fit in fits if fit.model.split('_')[0] in run.models]
    frame = regression_frame(fits)
    run.frame('regressions', frame)
    run.text('regressions', format_table(frame, 'Light polynomial regressions'))


def diagnose(run):
    results = OrderedDict()
    for outcome in run.config.outcomes:
        tests, _ = residual_diagnostics(
            run.panel, run.spec(outcome), run.clusters, run.config.weight_scheme,
            run.config.weight_neighbors, run.config.weight_cutoff_km,
        )
        results[outcome] = tests
    frame = diagnostics_frame(results)
    run.frame('diagnostics', frame)
    run.text('diagnostics', format_diagnostics(frame))


def gam(run):
    config = run.config
    results = gam_battery(
        run.panel, list(config.outcomes), config.covariates, config.gam_basis_dimension,
        config.regression_degree, config.gam_criterion, config.gam_scale,
    )
    frame = regression_frame([result['parametric'] for result in results])
    run.frame('gam', frame, 'gam_parametric')
    smooths = smooth_frame(results)
    run.frame('gam', smooths, 'gam_smooth')
    run.text('gam', '\n\n'.join([
        format_table(frame, 'Additive models, parametric light terms'),
        format_smooth_block(smooths),
    ]))
    curves = []
    for result in results:
        curve = smooth_curve(result['smooth'], config.grid_points)
        curve.insert(0, 'outcome', result['outcome'])
        curves.append(curve)
    run.frame('smooth_curve', pd.concat(curves, ignore_index=True))


STAGES = OrderedDict([
    ('merge', merge),
    ('summarize', summarize),
    ('kde', kde_stage),
    ('npreg', npreg),
    ('select', select),
    ('anova', anova),
    ('regress', regress),
    ('diagnose', diagnose),
    ('gam', gam),
])


@append_to(__all__)
def run_pipeline(config, stages=None, models=('ols', 'fe')):
    """
        Run the named stages (all by default) in pipeline order and write
        the manifest. Returns the Manifest.
    """
    requested = list(STAGES) if stages is None else list(stages)
    unknown = [name for name in requested if name not in STAGES]
    if unknown:
        raise ValidationError('stages', unknown, 'unknown stage(s): {}'.format(', '.join(unknown)))
    order = [name for name in STAGES if name == 'merge' or name in requested]
    os.makedirs(config.output_dir, exist_ok=True)
    run = PipelineRun(config, models)
    for name in order:
        logger.info('Stage {}'.format(name))
        try:
            STAGES[name](run)
        except Exception as error:
            logger.error('Stage {} failed: {}'.format(name, error))
            run.remove_outputs()
            raise StageError(name, error) from error
    run.manifest.write()
    return run.manifest
