# (c) 2026 lumenfit authors

import math

import numpy as np
import pytest
from scipy import special, stats

from .distributions import *


def test_published_anchors():
    assert abs(chi2_sf(5.7034, 3) - 0.127) <= 0.001
    assert abs(f_sf(1.67459, 1, 10) - 0.224732) <= 5e-4


def test_trivial_cases():
    assert chi2_sf(0, 4) == 1.0
    assert f_sf(0, 2, 7) == 1.0
    assert t_sf(0, 5) == pytest.approx(0.5, abs=1e-15)
    assert normal_sf(0) == pytest.approx(0.5, abs=1e-15)
    assert regularized_beta(2, 3, 0) == 0.0
    assert regularized_beta(2, 3, 1) == 1.0


@pytest.mark.parametrize('x', [1e-8, 0.3, 1.0, 5.0, 20.0, 80.0])
def test_chi2_two_degrees_closed_form(x):
    assert chi2_sf(x, 2) == pytest.approx(math.exp(-x / 2), abs=1e-12)


@pytest.mark.parametrize('a, x', [
    (0.5, 1e-8), (0.5, 0.2), (1.5, 2.8517), (3.0, 0.5), (3.0, 9.0),
    (10.0, 4.0), (10.0, 25.0), (50.0, 45.0), (200.0, 230.0),
])
def test_incomplete_gamma_against_scipy(a, x):
    assert regularized_gamma_p(a, x) == pytest.approx(special.gammainc(a, x), abs=1e-10)
    assert regularized_gamma_q(a, x) == pytest.approx(special.gammaincc(a, x), abs=1e-10)


@pytest.mark.parametrize('a, b, x', [
    (0.5, 0.5, 0.1), (0.5, 5.0, 0.5), (2.0, 3.0, 0.4), (5.0, 0.5, 0.999),
    (4364.0, 0.5, 0.999), (4364.0, 0.5, 0.3), (30.0, 40.0, 0.45),
])
def test_incomplete_beta_against_scipy(a, b, x):
    assert regularized_beta(a, b, x) == pytest.approx(special.betainc(a, b, x), abs=1e-10)


def test_tails_against_scipy():
    for x in np.linspace(0.01, 0.5, 7):
        assert chi2_sf(x, 3) == pytest.approx(stats.chi2.sf(x, 3), abs=1e-10)
        assert f_sf(x, 3, 40) == pytest.approx(stats.f.sf(x, 3, 40), abs=1e-10)
        assert t_sf(x, 12) == pytest.approx(stats.t.sf(x, 12), abs=1e-10)
        assert normal_sf(x) == pytest.approx(stats.norm.sf(x), abs=1e-10)
    for t in (-3.0, -0.7, 1.3, 4.0):
        assert t_sf(t, 8728) == pytest.approx(stats.t.sf(t, 8728), abs=1e-10)
        assert t_two_sided(t, 30) == pytest.approx(2 * stats.t.sf(abs(t), 30), abs=1e-10)
    assert f_sf(5.8021, 1, 8728) == pytest.approx(stats.f.sf(5.8021, 1, 8728), abs=1e-10)


def test_chi2_monotone_decreasing():
    values = [chi2_sf(x, 3) for x in np.linspace(0, 30, 61)]
    assert all(later <= earlier for earlier, later in zip(values, values[1:]))


@pytest.mark.parametrize('x, d', [(0.2, 3), (1.67459, 10), (4.0, 57), (9.5, 1000)])
def test_f_with_one_numerator_df_is_two_sided_t(x, d):
    assert f_sf(x, 1, d) == pytest.approx(2 * t_sf(math.sqrt(x), d), abs=1e-10)


def test_domain_errors():
    with pytest.raises(ValueError):
        chi2_sf(1.0, 0)
    with pytest.raises(ValueError):
        f_sf(1.0, 1, -2)
    with pytest.raises(ValueError):
        regularized_beta(1.0, 1.0, 1.5)
