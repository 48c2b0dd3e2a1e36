"""Exponent bookkeeping for ``v' = A(v)v + f(v)`` on an interpolation scale.

The growth of ``f`` from ``E_xi`` into ``E_gamma`` is measured by ``q``; the
phase space ``E_alpha`` is admissible when ``alpha >= alpha_crit`` with

    alpha_crit = (q xi - 1 - gamma) / (q - 1)      (q > 1)
    alpha_crit = -inf                              (q = 1)

and the natural time weight on ``E_xi`` is ``mu = xi - alpha``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .errors import InputError
from .records import dump_kv, parse_kv

NEG_INFINITY = -math.inf

QUASILINEAR = "quasilinear"
SEMILINEAR = "semilinear"

SUBCRITICAL = "subcritical"
CRITICAL = "critical"
INVALID = "invalid"

CRITICAL_TOL = 1e-12


def _rat(x):
    # shortest decimal representation, so 0.65 is read as 13/20
    return Fraction(repr(float(x))) if not isinstance(x, (int, Fraction)) else Fraction(x)


def alpha_crit(q, gamma, xi):
    """Critical phase-space index; ``NEG_INFINITY`` for linear growth ``q = 1``."""
    if not q >= 1:
        raise InputError(f"q must be >= 1, got {q!r}")
    if not gamma < xi:
        raise InputError(f"need gamma < xi, got gamma={gamma!r}, xi={xi!r}")
    if q == 1:
        return NEG_INFINITY
    q, gamma, xi = _rat(q), _rat(gamma), _rat(xi)
    return float((q * xi - 1 - gamma) / (q - 1))


def alpha_crit_star(q_star, gamma_star, xi):
    """Critical index attached to the remainder bound ``||f_hat(w)||_{gamma*} <= c* ||w||_xi^{q*}``."""
    if not q_star > 1:
        raise InputError(f"q_star must be > 1, got {q_star!r}")
    q, g, x = _rat(q_star), _rat(gamma_star), _rat(xi)
    return float((q * x - 1 - g) / (q - 1))


@dataclass(frozen=True)
class ExponentProfile:
    gamma: float
    beta: Optional[float]
    alpha: float
    xi: float
    q: float
    mode: str = SEMILINEAR

    def __post_init__(self):
        if self.mode not in (QUASILINEAR, SEMILINEAR):
            raise InputError(f"mode must be {QUASILINEAR!r} or {SEMILINEAR!r}")

    @property
    def alpha_crit(self):
        if self.q == 1:
            return NEG_INFINITY
        q, g, x = _rat(self.q), _rat(self.gamma), _rat(self.xi)
        return float((q * x - 1 - g) / (q - 1))

    @property
    def mu(self):
        return self.xi - self.alpha

    def to_dict(self):
        return {
            "mode": self.mode, "gamma": self.gamma, "beta": self.beta, "alpha": self.alpha,
            "xi": self.xi, "q": self.q, "alpha_crit": self.alpha_crit, "mu": self.mu,
        }

    def dumps(self):
        return dump_kv(self.to_dict())

    @classmethod
    def loads(cls, text):
        d = parse_kv(text)
        return cls(gamma=float(d["gamma"]), beta=None if d.get("beta") is None else float(d["beta"]),
                   alpha=float(d["alpha"]), xi=float(d["xi"]), q=float(d["q"]), mode=d.get("mode", SEMILINEAR))


@dataclass(frozen=True)
class CriticalReport:
    alpha_crit: float
    classification: str
    violated_constraints: tuple = ()

    def dumps(self):
        return dump_kv({"alpha_crit": self.alpha_crit, "classification": self.classification,
                        "violated": list(self.violated_constraints)})

    @classmethod
    def loads(cls, text):
        d = parse_kv(text)
        v = d.get("violated")
        tags = () if v in (None, "") else tuple(str(v).split(";"))
        return cls(float(d["alpha_crit"]), d["classification"], tags)


def validate_profile(profile: ExponentProfile) -> CriticalReport:
    """Check the ordering/range constraints of the profile's mode and classify ``alpha``."""
    g, b, a, x, q = profile.gamma, profile.beta, profile.alpha, profile.xi, profile.q
    bad = []
    if not q >= 1:
        bad.append("q")
    if profile.mode == QUASILINEAR:
        if b is None or not (0 < g < b < x < 1):
            bad.append("ordering")
        elif not (b < a < x):
            bad.append("alpha_window")
    else:
        if not (0 <= g < x <= 1):
            bad.append("ordering")
        elif g == 0 and x == 1:
            bad.append("endpoint")
    try:
        ac = alpha_crit(q, g, x) if q >= 1 and g < x else math.nan
    except InputError:
        ac = math.nan
    is_crit = math.isfinite(ac) and abs(a - ac) <= CRITICAL_TOL
    if not math.isnan(ac) and not is_crit and a < ac:
        bad.append("alpha_below_crit")
    if profile.mode == SEMILINEAR and "ordering" not in bad:
        window_ok = (g < a < x) if is_crit else (g <= a < x)
        if not window_ok:
            bad.append("alpha_window")
    mu = x - a
    if not mu > 0:
        bad.append("weight")
    elif not (q * mu <= 1 + g - a + CRITICAL_TOL):
        bad.append("weight")
    bad = tuple(dict.fromkeys(bad))
    if bad:
        cls = INVALID
    else:
        cls = CRITICAL if is_crit else SUBCRITICAL
    return CriticalReport(ac, cls, bad)


def chemotaxis_profile(epsilon, p, n):
    """Exponents for the chemotaxis example: ``gamma = eps/3, alpha = eps, xi = (1+eps)/2, q = 2``."""
    if not p > 1:
        raise InputError(f"p must exceed 1, got {p!r}")
    if not p > n / 2:
        raise InputError(f"p must exceed n/2 = {n / 2!r}")
    bound = min(1 - 1 / p, 1 - n / (2 * p))
    if not 0 < 2 * epsilon:
        raise InputError("epsilon must be positive")
    if not 2 * epsilon < bound:
        raise InputError(f"2*epsilon = {2 * epsilon!r} must be < min(1-1/p, 1-n/(2p)) = {bound!r}")
    return ExponentProfile(gamma=epsilon / 3, beta=None, alpha=epsilon, xi=(1 + epsilon) / 2, q=2.0,
                           mode=SEMILINEAR)


@dataclass(frozen=True)
class GradientIndices:
    profile: ExponentProfile
    s_bar: float
    s: float
    s_c: float
    mu: float


def critical_sobolev_index(n, p, kappa):
    """Scaling-critical index ``s_c = n/p + (kappa-2)/(kappa-1)``."""
    N, P, k = _rat(n), _rat(p), _rat(kappa)
    return float(N / P + (k - 2) / (k - 1))


def gradient_profile(n, p, kappa, tau) -> GradientIndices:
    """Indices for ``u_t = (a(u) u_x)_x + |u_x|^kappa`` in the critical space ``H^{s_c}``.

    ``E_theta = H^{2 theta - 2 tau}`` so ``gamma = tau``, ``beta = tau + s_bar/2``,
    ``xi = tau + s/2`` and ``alpha = tau + s_c/2``.
    """
    if not kappa > 3:
        raise InputError(f"kappa must be > 3, got {kappa!r}")
    if not (2 * n < p < (kappa - 1) * n):
        raise InputError(f"p must lie in (2n, (kappa-1)n) = ({2 * n}, {(kappa - 1) * n}), got {p!r}")
    if p == (n - 1) * (kappa - 1):
        raise InputError(f"p must differ from (n-1)(kappa-1) = {(n - 1) * (kappa - 1)!r}")
    if not (0.5 < 2 * tau < 1 - n / p):
        raise InputError(f"need 1/2 < 2*tau < 1 - n/p = {1 - n / p!r}, got 2*tau = {2 * tau!r}")
    N, P, k, t = _rat(n), _rat(p), _rat(kappa), _rat(tau)
    s_bar = 2 * t + N / P
    s_c = N / P + (k - 2) / (k - 1)
    s = 1 + N * (k - 1) / (P * k)
    mu = 1 / (2 * (k - 1)) - N / (2 * P * k)
    prof = ExponentProfile(gamma=float(t), beta=float(t + s_bar / 2), alpha=float(t + s_c / 2),
                           xi=float(t + s / 2), q=float(kappa), mode=QUASILINEAR)
    return GradientIndices(prof, float(s_bar), float(s), float(s_c), float(mu))


def scaling_defect(s, n, p, kappa):
    """Homogeneity exponent ``s - n/p - (kappa-2)/(kappa-1)`` of ``||.||_{H^s_p}`` under parabolic rescaling."""
    if not kappa > 2:
        raise InputError("kappa must be > 2")
    if not p > 0:
        raise InputError("p must be positive")
    return s - n / p - (kappa - 2) / (kappa - 1)
