# (c) 2026 lumenfit authors

import pytest

from .errors import ConfigError, ValidationError
from .parsers import *


def test_integer():
    assert integer.parseString('12')[0] == 12
    assert integer.parseString('-3')[0] == -3


def test_floating():
    assert floating.parseString('1.5')[0] == 1.5
    assert floating.parseString('.25')[0] == 0.25
    assert floating.parseString('6371.0088')[0] == 6371.0088
    assert floating.parseString('2.3e-4')[0] == 0.00023


def test_coerce_value():
    assert coerce_value(' 10 ') == 10
    assert isinstance(coerce_value('10'), int)
    assert coerce_value('1.5') == 1.5
    assert coerce_value('Yes') is True
    assert coerce_value('FALSE') is False
    assert coerce_value('None') is None
    assert coerce_value('gcv') == 'gcv'
    assert coerce_value('1.5km') == '1.5km'


def test_parse_config(config_case):
    text, expected = config_case
    assert parse_config(text) == expected


def test_parse_config_errors():
    with pytest.raises(ConfigError):
        parse_config('RADIUS_KM 1.5')
    with pytest.raises(ConfigError):
        parse_config('RADIUS_KM =')


def test_parse_formula():
    parsed = parse_formula(
        'haz ~ s(log_radiance, k=12) + poly(log_radiance, 4) + child_age_months',
    )
    assert parsed.response == 'haz'
    assert parsed.smooth == ('log_radiance', 12)
    assert parsed.polynomials == (('log_radiance', 4),)
    assert parsed.linear == ('child_age_months',)


def test_parse_formula_defaults():
    parsed = parse_formula('waz ~ s(log_radiance) + size', default_k=8)
    assert parsed.smooth == ('log_radiance', 8)
    assert parsed.linear == ('size',)
    parsed = parse_formula('whz ~ mother_bmi')
    assert parsed.smooth is None
    assert parsed.polynomials == ()


def test_parse_formula_errors():
    with pytest.raises(ValidationError):
        parse_formula('haz s(log_radiance)')
    with pytest.raises(ValidationError):
        parse_formula('haz ~ s(a) + s(b)')
