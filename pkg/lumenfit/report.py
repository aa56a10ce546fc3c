# (c) 2026 lumenfit authors

"""
    Output tables and the run manifest.

    Fits are first flattened into long frames; the CSV files and the
    fixed-width text tables are both rendered from those frames, so a
    number in a text table is always the rounded CSV value.
"""

import os
import json
import math
import logging
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .models import GamFit
from .utilities import append_to, config_hash as hash_mapping, sha256_file

logger = logging.getLogger(__name__)

__all__ = ['ARTIFACT_CLASSES', 'STAR_LEVELS', 'SIGNIFICANCE_NOTE']

ARTIFACT_CLASSES = (
    'merge_report',
    'summary',
    'kde',
    'npreg',
    'importance',
    'anova',
    'regressions',
    'diagnostics',
    'gam',
    'smooth_curve',
)

STAR_LEVELS = ((0.01, '***'), (0.05, '**'), (0.1, '*'))
SIGNIFICANCE_NOTE = 'Note: *p<0.1; **p<0.05; ***p<0.01'
FLOAT_FORMAT = '%.10g'

FIT_STATISTICS = OrderedDict([
    ('Observations', 'n'),
    ('R2', 'r_squared'),
    ('Adjusted R2', 'adj_r_squared'),
    ('F Statistic', 'f_statistic'),
])

GAM_STATISTICS = OrderedDict([
    ('Observations', 'n'),
    ('Adjusted R2', 'adj_r_squared'),
    ('Deviance explained', 'deviance_explained'),
    ('Log likelihood', 'log_likelihood'),
    ('Total edf', 'edf_total'),
])

FRAME_COLUMNS = [
    'column', 'outcome', 'model', 'term', 'estimate', 'std_error', 'p_value', 'df1', 'df2',
]


@append_to(__all__)
def significance_stars(p):
    """ "***" below 0.01, "**" below 0.05, "*" below 0.1, else "". """
    if p is None or not p == p:
        return ''
    for level, stars in STAR_LEVELS:
        if p < level:
            return stars
    return ''


def _number(value, digits):
    if value is None or not value == value:
        return ''
    return '{:.{}f}'.format(value, digits)


@append_to(__all__)
def format_coefficient(estimate, std_error, p, digits=3):
    """ 5.358, 1.442, 0.001 -> "5.358*** (1.442)". """
    text = _number(estimate, digits) + significance_stars(p)
    if std_error is not None and std_error == std_error:
        text += ' ({})'.format(_number(std_error, digits))
    return text


def _model_label(fit):
    if isinstance(fit, GamFit):
        return 'gam'
    return fit.model


def _fit_rows(fit, column):
    model = _model_label(fit)
    base = {'column': column, 'outcome': fit.outcome, 'model': model}
    rows = []
    for j, name in enumerate(fit.names):
        rows.append(dict(base, term=name, estimate=fit.coefficients[j],
                         std_error=fit.std_errors[j], p_value=fit.p_values[j]))
    if isinstance(fit, GamFit):
        for label, attribute in GAM_STATISTICS.items():
            rows.append(dict(base, term=label, estimate=float(getattr(fit, attribute))))
        rows.append(dict(base, term=fit.criterion.upper(), estimate=fit.score))
    else:
        for label, attribute in FIT_STATISTICS.items():
            row = dict(base, term=label, estimate=float(getattr(fit, attribute)))
            if attribute == 'f_statistic':
                row.update(p_value=fit.f_p_value, df1=fit.f_df[0], df2=fit.f_df[1])
            rows.append(row)
    return rows


@append_to(__all__)
def regression_frame(fits):
    """
        Long frame of several OLS, FE or additive model fits, one row per
        coefficient followed by the fit statistics. column numbers the fits
        from 1 in the order given.
    """
    rows = []
    for column, fit in enumerate(fits, 1):
        rows.extend(_fit_rows(fit, column))
    return pd.DataFrame(rows, columns=FRAME_COLUMNS)


def _is_statistic(term):
    return term in FIT_STATISTICS or term in GAM_STATISTICS or term in ('GCV', 'UBRE')


def _statistic_cell(row, digits):
    if row['term'] == 'Observations':
        return '{:d}'.format(int(row['estimate']))
    text = _number(row['estimate'], digits)
    if row['term'] == 'F Statistic' and row['df1'] == row['df1']:
        text += significance_stars(row['p_value'])
        text += ' (df = {:d}; {:d})'.format(int(row['df1']), int(row['df2']))
    return text


@append_to(__all__)
def format_table(frame, title=None, digits=3):
    """
        Fixed-width rendering of a regression_frame: coefficients with
        stars, standard errors in parentheses beneath, then the fit
        statistics and the significance note.
    """
    columns = sorted(frame['column'].unique()) if len(frame) else []
    headers = []
    for column in columns:
        part = frame[frame['column'] == column].iloc[0]
        headers.append(('({})'.format(column), part['outcome'], part['model']))
    terms = [term for term in OrderedDict.fromkeys(frame['term']) if not _is_statistic(term)]
    statistics = [term for term in OrderedDict.fromkeys(frame['term']) if _is_statistic(term)]
    cells = {(row['term'], row['column']): row for _, row in frame.iterrows()}

    body = []
    for term in terms:
        estimates, errors = [], []
        for column in columns:
            row = cells.get((term, column))
            if row is None:
                estimates.append('')
                errors.append('')
                continue
            estimates.append(_number(row['estimate'], digits) + significance_stars(row['p_value']))
            errors.append('({})'.format(_number(row['std_error'], digits))
                          if row['std_error'] == row['std_error'] else '')
        body.append((term, estimates))
        body.append(('', errors))
    footer = []
    for term in statistics:
        footer.append((term, [
            _statistic_cell(cells[(term, column)], digits) if (term, column) in cells else ''
            for column in columns
        ]))

    label_width = max([len(label) for label, _ in body + footer] + [12])
    widths = [
        max([len(text) for header in headers for text in header] +
            [len(values[position]) for _, values in body + footer] + [8])
        for position in range(len(columns))
    ]

    def line(label, values):
        return '  '.join([label.ljust(label_width)] + [
            value.rjust(width) for value, width in zip(values, widths)
        ]).rstrip()

    rule = '-' * (label_width + sum(width + 2 for width in widths))
    lines = []
    if title:
        lines.append(title)
    lines.append(rule)
    for position in range(3):
        lines.append(line('', [header[position] for header in headers]))
    lines.append(rule)
    lines.extend(line(label, values) for label, values in body)
    if footer:
        lines.append(rule)
        lines.extend(line(label, values) for label, values in footer)
    lines.append(rule)
    lines.append(SIGNIFICANCE_NOTE)
    return '\n'.join(lines)


@append_to(__all__)
def format_anova(table, title=None):
    """ Text rendering of an AnovaTable with significance codes. """
    frame = table.to_frame()
    lines = [title] if title else []
    lines.append('{:<12}{:>8}{:>14}{:>4}{:>12}{:>10}{:>12}'.format(
        'Model', 'Res.Df', 'RSS', 'Df', 'Sum of Sq', 'F', 'Pr(>F)',
    ))
    for row in frame.itertuples(index=False):
        lines.append('{:<12}{:>8}{:>14}{:>4}{:>12}{:>10}{:>12} {}'.format(
            row.label, row.res_df, '{:.3f}'.format(row.rss),
            '' if row.df is None or row.df != row.df else int(row.df),
            _number(row.sum_sq, 4), _number(row.f, 4), _number(row.p, 6),
            significance_stars(row.p),
        ).rstrip())
    lines.append(SIGNIFICANCE_NOTE)
    return '\n'.join(lines)


@append_to(__all__)
def smooth_frame(results):
    """ One row per additive model: edf, reference df, F and p of the smooth. """
    rows = []
    for result in results:
        fit, test = result['smooth'], result['significance']
        rows.append(OrderedDict([
            ('outcome', fit.outcome),
            ('term', 's({})'.format(fit.smooth.variable)),
            ('edf', fit.smooth.edf),
            ('ref_df', test.df1),
            ('f', test.statistic),
            ('p_value', test.p_value),
            ('computable', test.computable),
            ('lambda', fit.smooth.lam),
            ('criterion', fit.criterion),
            ('score', fit.score),
            ('deviance_delta', result['deviance_delta']),
        ]))
    return pd.DataFrame(rows)


@append_to(__all__)
def format_smooth_block(frame):
    lines = ['Approximate significance of smooth terms']
    lines.append('{:<8}{:<20}{:>8}{:>8}{:>10}{:>12}{:>12}'.format(
        'Outcome', 'Term', 'edf', 'Ref.df', 'F', 'p-value', 'Dev.gain %',
    ))
    for row in frame.itertuples(index=False):
        lines.append('{:<8}{:<20}{:>8}{:>8}{:>10}{:>12}{:>12} {}'.format(
            row.outcome, row.term, _number(row.edf, 3), _number(row.ref_df, 3),
            _number(row.f, 3), _number(row.p_value, 6), _number(row.deviance_delta, 3),
            significance_stars(row.p_value),
        ).rstrip())
    return '\n'.join(lines)


@append_to(__all__)
def diagnostics_frame(results):
    """ Long frame of test results; results maps outcome to a list of TestResult. """
    rows = []
    for outcome, tests in results.items():
        for test in tests:
            rows.append(OrderedDict([
                ('outcome', outcome),
                ('test', test.name),
                ('statistic', test.statistic),
                ('df1', test.df1),
                ('df2', test.df2),
                ('p_value', test.p_value),
                ('computable', test.computable),
                ('note', test.note),
            ]))
    return pd.DataFrame(rows, columns=[
        'outcome', 'test', 'statistic', 'df1', 'df2', 'p_value', 'computable', 'note',
    ])


@append_to(__all__)
def format_diagnostics(frame):
    lines = ['Residual diagnostics']
    for row in frame.itertuples(index=False):
        if row.computable:
            value = '{} = {:.4f}, p = {:.4f}{}'.format(
                row.test, row.statistic, row.p_value, significance_stars(row.p_value),
            )
        else:
            value = '{}: not computable'.format(row.test)
        note = ' [{}]'.format(row.note) if row.note else ''
        lines.append('  {:<6}{}{}'.format(row.outcome, value, note))
    return '\n'.join(lines)


@append_to(__all__)
def write_frame(frame, directory, name):
    """ Write frame as <directory>/<name>.csv and return the path. """
    path = os.path.join(directory, '{}.csv'.format(name))
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.debug('Wrote {}'.format(path))
    return path


@append_to(__all__)
def write_text(text, directory, name):
    path = os.path.join(directory, '{}.txt'.format(name))
    with open(path, 'w', encoding='utf-8') as target:
        target.write(text + '\n')
    logger.debug('Wrote {}'.format(path))
    return path


def _plain(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, float) and math.isnan(value):
        return None
    if isinstance(value, (tuple, list)):
        return [_plain(item) for item in value]
    return value


@append_to(__all__)
@dataclass
class Manifest:
    """
        Every file a run wrote, by artifact class, with its SHA-256, plus
        the seed, the resolved configuration and its hash. Paths are
        relative to the output directory.
    """

    directory: str
    seed: int
    config: dict
    artifacts: OrderedDict = field(default_factory=OrderedDict)

    @property
    def config_hash(self):
        return hash_mapping(self.config)

    def add(self, artifact_class, path):
        if artifact_class not in ARTIFACT_CLASSES:
            raise ValueError('unknown artifact class {}'.format(artifact_class))
        entry = OrderedDict([
            ('path', os.path.relpath(path, self.directory)),
            ('sha256', sha256_file(path)),
        ])
        self.artifacts.setdefault(artifact_class, []).append(entry)
        return path

    @property
    def paths(self):
        return [
            os.path.join(self.directory, entry['path'])
            for entries in self.artifacts.values() for entry in entries
        ]

    def to_dict(self):
        return {
            'seed': self.seed,
            'config_hash': self.config_hash,
            'config': {key: _plain(value) for key, value in self.config.items()},
            'artifacts': self.artifacts,
        }

    def write(self, name='manifest.json'):
        path = os.path.join(self.directory, name)
        with open(path, 'w', encoding='utf-8') as target:
            json.dump(self.to_dict(), target, indent=2, sort_keys=True)
            target.write('\n')
        logger.info('Manifest lists {} artifact classes, written to {}'.format(
            len(self.artifacts), path,
        ))
        return path
