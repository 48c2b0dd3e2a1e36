import math

import numpy as np
import pytest
import scipy.special as sc
from hypothesis import given, strategies as st

from parastab.errors import InputError
from parastab.special import log_gamma, special_beta, sup_power_exp


def test_beta_examples():
    assert special_beta(1, 1) == pytest.approx(1.0, rel=1e-14)
    assert special_beta(0.5, 0.5) == pytest.approx(math.pi, rel=1e-13)
    assert special_beta(2, 3) == pytest.approx(1 / 12, rel=1e-13)


def test_beta_rejects_nonpositive():
    with pytest.raises(InputError):
        special_beta(0, 1)
    with pytest.raises(InputError):
        special_beta(1, -2)


def test_log_gamma_matches_reference_grid():
    z = np.concatenate([np.geomspace(1e-4, 1, 50), np.linspace(1, 100, 200)])
    ours = np.array([log_gamma(v) for v in z])
    ref = sc.gammaln(z)
    assert np.max(np.abs(ours - ref) / np.maximum(1, np.abs(ref))) <= 1e-13


def test_beta_relative_error_grid():
    x = np.geomspace(1e-3, 50, 40)
    worst = 0.0
    for a in x:
        for b in x:
            worst = max(worst, abs(special_beta(a, b) / sc.beta(a, b) - 1))
    assert worst <= 1e-12


def test_sup_power_exp_examples():
    assert sup_power_exp(0, 3.0) == 1.0
    assert sup_power_exp(1, 1) == pytest.approx(math.exp(-1), rel=1e-15)
    assert sup_power_exp(0.5, 2) == pytest.approx(0.5 * math.exp(-0.5), rel=1e-15)


def test_sup_power_exp_against_grid_maximum():
    r = np.geomspace(1e-6, 1e3, 200001)
    for a, eta in [(0.3, 0.7), (1.7, 2.0), (0.05, 0.05)]:
        grid = np.max(r ** a * np.exp(-eta * r))
        assert sup_power_exp(a, eta) == pytest.approx(grid, rel=1e-8)


pos = st.floats(1e-3, 50)


@given(pos, pos)
def test_beta_symmetry(x, y):
    assert special_beta(x, y) == pytest.approx(special_beta(y, x), rel=1e-13)


@given(st.floats(1e-3, 49), pos)
def test_beta_recursion(x, y):
    assert special_beta(x + 1, y) == pytest.approx(special_beta(x, y) * x / (x + y), rel=1e-12)
