import math
from fractions import Fraction

import pytest
from hypothesis import assume, given, strategies as st

from parastab.errors import InputError
from parastab.exponents import (CRITICAL, INVALID, NEG_INFINITY, QUASILINEAR, SUBCRITICAL, CriticalReport,
                                ExponentProfile, alpha_crit, alpha_crit_star, chemotaxis_profile,
                                critical_sobolev_index, gradient_profile, scaling_defect, validate_profile)


def test_alpha_crit_exact():
    assert alpha_crit(2, 0.1, 0.65) == 0.2


def test_alpha_crit_linear_growth():
    assert alpha_crit(1, 0.3, 0.7) == NEG_INFINITY


def test_alpha_crit_gradient_value():
    assert alpha_crit(4, 0.275, 0.925) == pytest.approx(0.275 + 8 / 15, abs=1e-15)


def test_alpha_crit_errors():
    with pytest.raises(InputError):
        alpha_crit(2, 0.7, 0.7)
    with pytest.raises(InputError):
        alpha_crit(0.5, 0.1, 0.7)


def test_alpha_crit_star():
    assert alpha_crit_star(2, 0.1, 0.65) == 0.2
    assert alpha_crit_star(2, 0, 1) == 1
    assert alpha_crit_star(3, 0.2, 0.8) == pytest.approx(0.6, abs=1e-15)
    with pytest.raises(InputError):
        alpha_crit_star(1, 0.1, 0.5)


def test_validate_chemotaxis_subcritical():
    rep = validate_profile(ExponentProfile(0.1, None, 0.3, 0.65, 2))
    assert rep.classification == SUBCRITICAL
    assert rep.alpha_crit == 0.2


def test_validate_gradient_critical():
    prof = gradient_profile(1, 2.5, 4, 0.275).profile
    assert validate_profile(prof).classification == CRITICAL


def test_validate_ordering_violation():
    rep = validate_profile(ExponentProfile(0.5, 0.4, 0.6, 0.8, 2, QUASILINEAR))
    assert rep.classification == INVALID
    assert "ordering" in rep.violated_constraints


def test_validate_alpha_below_crit():
    rep = validate_profile(ExponentProfile(0.1, None, 0.15, 0.65, 2))
    assert rep.classification == INVALID
    assert "alpha_below_crit" in rep.violated_constraints


def test_validate_semilinear_endpoint():
    rep = validate_profile(ExponentProfile(0.0, None, 0.5, 1.0, 1))
    assert "endpoint" in rep.violated_constraints


def test_chemotaxis_profile_values():
    p = chemotaxis_profile(0.3, 4, 1)
    assert (p.gamma, p.alpha, p.xi, p.q) == pytest.approx((0.1, 0.3, 0.65, 2))
    assert validate_profile(p).classification == SUBCRITICAL
    p = chemotaxis_profile(0.2, 4, 3)
    assert (p.gamma, p.alpha, p.xi, p.q) == pytest.approx((0.2 / 3, 0.2, 0.6, 2))


def test_chemotaxis_profile_bounds():
    with pytest.raises(InputError, match="min"):
        chemotaxis_profile(0.45, 2, 1)
    # 2*eps = 0.6 exceeds 1 - 1/p = 0.5 for p = 2
    with pytest.raises(InputError):
        chemotaxis_profile(0.3, 2, 1)
    with pytest.raises(InputError):
        chemotaxis_profile(0.1, 1, 1)


def test_gradient_profile_values():
    g = gradient_profile(1, 2.5, 4, 0.275)
    assert g.s_c == pytest.approx(16 / 15, abs=1e-15)
    assert g.s == pytest.approx(1.3, abs=1e-15)
    assert g.mu == pytest.approx(7 / 60, abs=1e-15)
    assert g.profile.alpha == pytest.approx(0.808333333333333, abs=1e-14)
    assert g.profile.xi == pytest.approx(0.925, abs=1e-15)
    assert abs(g.profile.xi - g.profile.alpha - g.mu) <= 1e-14


def test_gradient_profile_errors():
    with pytest.raises(InputError, match="p must lie"):
        gradient_profile(1, 2, 4, 0.275)
    with pytest.raises(InputError, match="differ"):
        gradient_profile(2, 5, 6, 0.275)
    with pytest.raises(InputError, match="kappa"):
        gradient_profile(1, 2.5, 3, 0.275)


def test_scaling_defect_examples():
    assert scaling_defect(1, 1, 2, 3) == 0
    assert scaling_defect(1.5, 1, 2, 3) == pytest.approx(0.5)
    g = gradient_profile(1, 2.5, 4, 0.275)
    assert abs(scaling_defect(g.s_c, 1, 2.5, 4)) <= 1e-14


def test_serialization_roundtrip():
    p = gradient_profile(1, 2.5, 4, 0.275).profile
    assert ExponentProfile.loads(p.dumps()) == p
    r = validate_profile(ExponentProfile(0.5, 0.4, 0.6, 0.8, 2, QUASILINEAR))
    assert CriticalReport.loads(r.dumps()) == r
    r = validate_profile(ExponentProfile(0.1, None, 0.3, 0.65, 1))
    assert CriticalReport.loads(r.dumps()).alpha_crit == -math.inf


@st.composite
def gradient_inputs(draw):
    n = draw(st.integers(1, 4))
    kappa = draw(st.floats(3.05, 12))
    p = draw(st.floats(2 * n + 1e-3, (kappa - 1) * n - 1e-3))
    assume(abs(p - (n - 1) * (kappa - 1)) > 1e-6)
    lo, hi = 0.25, (1 - n / p) / 2
    assume(hi - lo > 1e-6)
    tau = draw(st.floats(lo + 1e-7, hi - 1e-7))
    return n, p, kappa, tau


@given(gradient_inputs())
def test_gradient_identity_mu(args):
    g = gradient_profile(*args)
    assert abs(g.profile.xi - g.profile.alpha - g.mu) <= 1e-14


@given(st.floats(1.01, 8), st.floats(0, 0.9), st.floats(0.01, 0.99))
def test_alpha_crit_below_xi(q, gamma, dxi):
    xi = gamma + dxi * (1 - gamma)
    assume(xi > gamma)
    assert alpha_crit(q, gamma, xi) < xi


@given(st.floats(1.01, 8), st.floats(0, 0.4), st.floats(0.51, 0.9), st.floats(0.001, 0.09))
def test_alpha_crit_monotone(q, gamma, xi, d):
    assert alpha_crit(q, gamma, xi + d) > alpha_crit(q, gamma, xi)
    assert alpha_crit(q, gamma + d, xi) < alpha_crit(q, gamma, xi)


@given(st.integers(1, 5), st.floats(0.1, 50), st.floats(2.01, 20))
def test_critical_index_against_rational(n, p, kappa):
    exact = Fraction(n) / Fraction(p) + (Fraction(kappa) - 2) / (Fraction(kappa) - 1)
    sc = critical_sobolev_index(n, p, kappa)
    assert abs(Fraction(sc) - exact) <= Fraction(1, 10 ** 14)
    assert abs(scaling_defect(sc, n, p, kappa)) <= 1e-14
