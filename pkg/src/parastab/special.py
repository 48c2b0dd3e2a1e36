"""Beta function via a Lanczos log-Gamma, and the ``sup r^a e^{-eta r}`` constant."""

import math

from .errors import InputError

# Lanczos approximation, g = 7, n = 9
_G = 7.0
_P = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def log_gamma(z):
    """``log Gamma(z)`` for ``z > 0``."""
    z = float(z)
    if not z > 0:
        raise InputError(f"log_gamma requires z > 0, got {z!r}")
    if z < 0.5:
        # Gamma(z) = Gamma(z + 1) / z keeps the series in its accurate range
        return log_gamma(z + 1.0) - math.log(z)
    z -= 1.0
    x = _P[0]
    for i in range(1, len(_P)):
        x += _P[i] / (z + i)
    t = z + _G + 0.5
    return _HALF_LOG_2PI + (z + 0.5) * math.log(t) - t + math.log(x)


def special_beta(x, y):
    """Euler Beta function ``B(x, y) = Gamma(x) Gamma(y) / Gamma(x + y)``."""
    x, y = float(x), float(y)
    if not (x > 0 and y > 0) or not (math.isfinite(x) and math.isfinite(y)):
        raise InputError(f"Beta requires positive finite arguments, got ({x!r}, {y!r})")
    return math.exp(log_gamma(x) + log_gamma(y) - log_gamma(x + y))


def sup_power_exp(a, eta):
    """``sup_{r > 0} r**a * exp(-eta * r)``; attained at ``r = a / eta``."""
    a, eta = float(a), float(eta)
    if a < 0 or not eta > 0:
        raise InputError("sup_power_exp requires a >= 0 and eta > 0")
    if a == 0:
        return 1.0
    return math.exp(a * (math.log(a) - math.log(eta)) - a)
