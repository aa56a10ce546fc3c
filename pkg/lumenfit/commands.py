# (c) 2026 lumenfit authors

"""
    Subcommands of manage.py.

    Every command reads the application config, lets its command-line
    flags override it and runs the pipeline stages it needs. Failures
    are logged and turned into exit code 1.
"""

import os
import logging
from collections import OrderedDict

import flask
from flask_script import Command, Option

from .errors import LumenfitError
from .models import PipelineConfig
from .pipeline import run_pipeline
from .synthgen import generate, scenario_config, write_scenario
from .utilities import maybe

logger = logging.getLogger(__name__)

COMMON_OPTIONS = (
    Option('--seed', dest='seed', type=int, help='random seed'),
    Option('--out-dir', dest='out_dir', help='directory for the artifacts'),
    Option('--radius-km', dest='radius_km', type=float, help='cluster matching radius'),
    Option('--max-degree', dest='max_degree', type=int,
           help='largest light polynomial degree compared'),
    Option('--outcome', dest='outcome', action='append',
           help='outcome to analyse; repeat for several'),
)


def pipeline_config(seed=None, out_dir=None, radius_km=None, max_degree=None, outcome=None):
    """ PipelineConfig of the current application; flags win. """
    return PipelineConfig.from_mapping(
        flask.current_app.config,
        seed=seed,
        output_dir=out_dir,
        radius_km=radius_km,
        max_degree=max_degree,
        outcomes=tuple(outcome) if outcome else None,
    )


class StageCommand(Command):
    """ Run the merge stage. """

    option_list = COMMON_OPTIONS
    stages = ('merge',)
    models = ('ols', 'fe')
    # artifact classes whose text rendering is echoed to stdout
    shows = ('merge_report',)

    def run(self, **flags):
        try:
            manifest = run_pipeline(pipeline_config(**flags), self.stages, self.models)
        except LumenfitError as error:
            logger.error(str(error))
            return 1
        for artifact_class in self.shows:
            for entry in maybe(manifest.artifacts, artifact_class, fallback=()):
                if entry['path'].endswith('.txt'):
                    with open(os.path.join(manifest.directory, entry['path']), encoding='utf-8') as source:
                        print(source.read().rstrip('\n'))
        logger.info('Wrote {} files to {}'.format(len(manifest.paths), manifest.directory))
        return 0


class Summarize(StageCommand):
    """ Descriptive statistics per survey year. """
    stages = ('summarize',)
    shows = ()


class Kde(StageCommand):
    """ Kernel density of light, pooled and per survey year. """
    stages = ('kde',)
    shows = ()


class Npreg(StageCommand):
    """ Kernel regression of each outcome on log light. """
    stages = ('npreg',)
    shows = ()


class Select(StageCommand):
    """ Feature importance under boosting, bagging and nearest neighbours. """
    stages = ('select',)
    shows = ()


class Anova(StageCommand):
    """ Sequential F tests of nested light polynomials. """
    stages = ('anova',)
    shows = ('anova',)


class FitOls(StageCommand):
    """ Pooled and per-year least squares on the light polynomial. """
    stages = ('regress',)
    models = ('ols',)
    shows = ('regressions',)


class FitFe(StageCommand):
    """ Cluster fixed-effect fits on the light polynomial. """
    stages = ('regress',)
    models = ('fe',)
    shows = ('regressions',)


class Gam(StageCommand):
    """ Additive models with a penalized light smooth. """
    stages = ('gam',)
    shows = ('gam',)


class Diagnose(StageCommand):
    """ Spatial lag, Moran and serial correlation tests on residuals. """
    stages = ('diagnose',)
    shows = ('diagnostics',)


class Run(StageCommand):
    """ Run every stage and write the manifest. """
    stages = None
    shows = ('merge_report', 'anova', 'regressions', 'diagnostics', 'gam')


class Simulate(Command):
    """
        Write a synthetic scenario: the three input tables plus truth.csv.
        Without --out-dir the tables go next to CLUSTERS_PATH, where the
        other commands look for them.
    """

    option_list = (
        Option('--seed', dest='seed', type=int, help='random seed'),
        Option('--out-dir', dest='out_dir', help='directory for the tables'),
        Option('--clusters', dest='n_clusters', type=int, help='number of survey sites'),
        Option('--children', dest='n_children', type=int, help='number of child rows'),
        Option('--rho', dest='rho', type=float, help='spatial dependence of cluster effects'),
    )

    def run(self, seed=None, out_dir=None, n_clusters=None, n_children=None, rho=None):
        config = flask.current_app.config
        if seed is None:
            seed = config['SEED']
        directory = out_dir or os.path.dirname(config['CLUSTERS_PATH']) or '.'
        try:
            scenario = generate(scenario_config(
                config, seed=seed, n_clusters=n_clusters, n_children=n_children, rho=rho,
            ))
            write_scenario(scenario, directory)
        except LumenfitError as error:
            logger.error(str(error))
            return 1
        logger.info('Scenario with seed {} written to {}'.format(seed, directory))
        return 0


COMMANDS = OrderedDict([
    ('simulate', Simulate),
    ('merge', StageCommand),
    ('summarize', Summarize),
    ('kde', Kde),
    ('npreg', Npreg),
    ('select', Select),
    ('anova', Anova),
    ('fit-ols', FitOls),
    ('fit-fe', FitFe),
    ('gam', Gam),
    ('diagnose', Diagnose),
    ('run', Run),
])


def register(manager):
    """ Attach every subcommand to a flask_script Manager. """
    for name, command in COMMANDS.items():
        manager.add_command(name, command())
    return manager
