# (c) 2026 lumenfit authors

"""
    Grammars for the two small languages lumenfit reads: the key/value
    configuration file and the model formula of the additive model,

        haz ~ s(log_radiance, k=10) + poly(log_radiance, 4) + child_age_months
"""

import pyparsing as pp

from .errors import ConfigError, ValidationError
from .models import ModelFormula

# General

def to_int(toks):
    """ Parser action for converting strings of digits to int. """
    return int(toks[0])

integer    = pp.Regex(r'[+-]?\d+').setName('integer').setParseAction(to_int)

floating   = pp.Regex(
    r'[+-]?(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?',
).setName('floating').setParseAction(lambda toks: float(toks[0]))

identifier = pp.Word(pp.alphas + '_', pp.alphanums + '_').setName('identifier')

# Configuration values

v_true     = (
    pp.CaselessKeyword('true') | pp.CaselessKeyword('yes')
).setName('v_true').setParseAction(pp.replaceWith(True))

v_false    = (
    pp.CaselessKeyword('false') | pp.CaselessKeyword('no')
).setName('v_false').setParseAction(pp.replaceWith(False))

v_scalar   = (
    integer + pp.StringEnd() |
    floating + pp.StringEnd() |
    v_true + pp.StringEnd() |
    v_false + pp.StringEnd()
).setName('v_scalar')


def coerce_value(text):
    """ Convert one configuration item to int, float, bool or None. """
    text = text.strip()
    if text.lower() == 'none':
        return None
    try:
        return v_scalar.parseString(text, parseAll=True)[0]
    except pp.ParseException:
        return text

# Configuration lines

c_key      = identifier.copy().setName('c_key').setParseAction(
    lambda toks: toks[0].upper()
)
c_equals   = pp.Literal('=').setName('c_equals').suppress()
c_item     = pp.Regex(r'[^,#]+').setName('c_item')
c_value    = pp.Group(pp.delimitedList(c_item)).setName('c_value')
c_setting  = (c_key('key') + c_equals + c_value('value')).setName('c_setting')
c_line     = pp.Optional(c_setting).setName('c_line')
c_line.ignore(pp.pythonStyleComment)


def parse_config(text):
    """
        Parse the text of a configuration file into a dict.

        Keys are upper-cased. A value with commas becomes a list, other
        values are coerced by coerce_value.
    """
    settings = {}
    for number, line in enumerate(text.splitlines(), 1):
        try:
            result = c_line.parseString(line, parseAll=True)
        except pp.ParseException as error:
            raise ConfigError('line {}: {}'.format(number, error))
        if 'key' not in result:
            continue
        values = [coerce_value(item) for item in result['value']]
        settings[result['key']] = values[0] if len(values) == 1 else values
    return settings

# Model formula

f_open     = pp.Literal('(').setName('f_open').suppress()
f_close    = pp.Literal(')').setName('f_close').suppress()
f_comma    = pp.Literal(',').setName('f_comma').suppress()
f_tilde    = pp.Literal('~').setName('f_tilde').suppress()

f_smooth   = pp.Group(
    pp.Keyword('s')('kind') + f_open + identifier('variable') +
    pp.Optional(
        f_comma + pp.Keyword('k').suppress() + pp.Literal('=').suppress() +
        integer('k')
    ) + f_close
).setName('f_smooth')

f_poly     = pp.Group(
    pp.Keyword('poly')('kind') + f_open + identifier('variable') + f_comma +
    integer('degree') + f_close
).setName('f_poly')

f_linear   = pp.Group(identifier('variable')).setName('f_linear')

f_term     = (f_smooth | f_poly | f_linear).setName('f_term')

formula    = (
    identifier + f_tilde + pp.delimitedList(f_term, delim='+')
).setName('formula')


def parse_formula(text, default_k=10):
    """ Parse a model formula into a ModelFormula. """
    try:
        tokens = formula.parseString(text, parseAll=True)
    except pp.ParseException as error:
        raise ValidationError('formula', text, str(error))
    smooths, polynomials, linear = [], [], []
    for term in tokens[1:]:
        kind = term.get('kind')
        if kind == 's':
            smooths.append((term['variable'], term.get('k', default_k)))
        elif kind == 'poly':
            polynomials.append((term['variable'], term['degree']))
        else:
            linear.append(term['variable'])
    if len(smooths) > 1:
        raise ValidationError(
            'formula', text, 'at most one smooth term is supported',
        )
    return ModelFormula(
        response=tokens[0],
        smooth=smooths[0] if smooths else None,
        polynomials=tuple(polynomials),
        linear=tuple(linear),
    )
