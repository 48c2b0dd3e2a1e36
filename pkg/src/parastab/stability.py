"""Decay fits, exponential-estimate checks, instability probes and basin certificates.

The basin certificate follows the contraction argument for ``u' = A u + f_hat(u)``
with ``||f_hat(w)||_{gamma*} <= c* ||w||_xi^{q*}`` on ``||w||_xi < r*``:

    c0  = 1 + (B(mu q*, 1 - mu q*) + B(mu (q* - 1), 1 - mu q*))
              * sup_r r^{1 + gamma0 - alpha - mu q*} e^{(omega - omega_bar) r}
    L   : largest value below r* with c* M L^{q* - 1} <= 1
    eps0 = L / M

Data within ``eps0`` of the equilibrium in ``E_alpha`` then satisfy
``||v - v*||_alpha + t^mu ||v - v*||_xi <= M e^{-omega t} ||v0 - v*||_alpha``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InputError, PreconditionError
from .exponents import alpha_crit_star
from .integrate import SolveConfig, TimeMesh, solve_quasilinear, solve_semilinear
from .linops import semigroup_norm_constants, spectral_bound
from .records import dump_kv, parse_kv
from .spaces import Scale, SystemField, WeightedTrajectory, as_system
from .special import special_beta, sup_power_exp

STABLE = "stable"
UNSTABLE = "unstable"
INCONCLUSIVE = "inconclusive"

__all__ = [
    "DecayFit", "BasinCertificate", "StabilityVerdict", "RemainderEstimate", "VanishingReport",
    "fit_decay", "verify_exponential_estimate", "weighted_vanishing", "smoothing_probe",
    "estimate_remainder_constants", "c0_constant", "basin_length", "basin_certificate",
    "certificate_M", "instability_probe", "special_beta", "sup_power_exp",
]


def _deviation_norms(traj: WeightedTrajectory, v_star, weights):
    d = traj.states - as_system(v_star).coefficients[None]
    return np.sqrt(np.sum((weights * d) ** 2, axis=(1, 2)))


def _sobolev_weights(traj, s):
    lam = traj.domain.eigenvalues(traj.states.shape[-1])
    return (1.0 + lam) ** (s / 2.0)


def _scale_weights(traj, scale, theta):
    m = traj.states.shape[1]
    scale = scale or Scale.plain(m)
    return scale.weights(traj.domain.eigenvalues(traj.states.shape[-1]), theta)


# -- decay -------------------------------------------------------------------------------

@dataclass(frozen=True)
class DecayFit:
    omega_hat: float
    M_hat: float
    window: tuple
    residual: float

    def __post_init__(self):
        if not self.window[0] < self.window[1]:
            raise InputError("window must satisfy t_min < t_max")


def fit_decay(traj: WeightedTrajectory, v_star, s=0.0, window=None) -> DecayFit:
    """Least-squares fit ``log ||v(t) - v*||_{H^s} = log C - omega t`` over ``window``.

    The default window is ``[0.3 T, 0.9 T]``.  ``M_hat`` is ``C`` divided by
    the initial deviation.
    """
    T = float(traj.times[-1])
    lo, hi = window if window is not None else (0.3 * T, 0.9 * T)
    if not lo < hi:
        raise InputError("window must satisfy t_min < t_max")
    norms = _deviation_norms(traj, v_star, _sobolev_weights(traj, s))
    sel = (traj.times >= lo) & (traj.times <= hi)
    if sel.sum() < 3:
        raise InputError(f"need at least 3 samples in the window, got {int(sel.sum())}")
    y = norms[sel]
    if not np.all(y > 0):
        raise InputError("deviation vanishes inside the window")
    t = traj.times[sel]
    slope, icpt = np.polyfit(t, np.log(y), 1)
    resid = float(np.sqrt(np.mean((np.log(y) - (icpt + slope * t)) ** 2)))
    d0 = norms[0]
    M_hat = math.exp(icpt) / d0 if d0 > 0 else math.inf
    return DecayFit(float(-slope), float(M_hat), (float(lo), float(hi)), resid)


def verify_exponential_estimate(traj: WeightedTrajectory, v_star, alpha, xi, omega, M, scale=None):
    """Worst margin of ``||d||_alpha + t^{xi-alpha} ||d||_xi <= M e^{-omega t} ||d(0)||_alpha`` over ``t > 0``.

    ``d = v(t) - v*``, norms in ``E_theta`` of ``scale`` (default: ``E_theta = H^{2 theta}``).
    """
    da = _deviation_norms(traj, v_star, _scale_weights(traj, scale, alpha))
    dx = _deviation_norms(traj, v_star, _scale_weights(traj, scale, xi))
    d0 = da[0]
    if not d0 > 0:
        raise InputError("initial deviation must be positive")
    t = traj.times
    pos = t > 0
    lhs = da[pos] + t[pos] ** (xi - alpha) * dx[pos]
    rhs = M * np.exp(-omega * t[pos]) * d0
    if not pos.any():
        raise InputError("trajectory has no positive sample times")
    return float(np.min(rhs - lhs))


@dataclass(frozen=True)
class VanishingReport:
    times: np.ndarray
    values: np.ndarray
    verdict: str

    @property
    def vanishing(self):
        return self.verdict == "vanishing"


def weighted_vanishing(traj: WeightedTrajectory, mu, s, levels: Optional[Sequence[int]] = None,
                       component=None, last=4) -> VanishingReport:
    """``t^mu ||u(t)||_{H^s}`` at the dyadic times ``2^{-j}`` present in the trajectory.

    The verdict is ``"vanishing"`` when the sequence decreases strictly over
    the finest ``last`` levels, ``"not-vanishing"`` otherwise.
    """
    t = traj.times
    if levels is None:
        pos = t[t > 0]
        js = -np.log2(pos)
        levels = sorted(int(round(j)) for j, tt in zip(js, pos)
                        if abs(2.0 ** -round(j) - tt) <= 1e-12 * tt)
    levels = sorted(levels)
    norms = traj.component_norms(s, component)
    ts, vals = [], []
    for j in levels:
        tj = 2.0 ** -j
        i = int(np.argmin(np.abs(t - tj)))
        if abs(t[i] - tj) > 1e-9 * tj:
            raise InputError(f"trajectory has no sample at t = 2^-{j}")
        ts.append(tj)
        vals.append(tj ** mu * norms[i])
    vals = np.array(vals)
    tail = vals[-last:]
    ok = len(tail) >= 2 and bool(np.all(np.diff(tail) < 0))
    return VanishingReport(np.array(ts), vals, "vanishing" if ok else "not-vanishing")


def smoothing_probe(traj0: WeightedTrajectory, traj1: WeightedTrajectory, zeta, weight, alpha, scale=None):
    """``sup_t t^weight ||v0(t) - v1(t)||_zeta / ||v0(0) - v1(0)||_alpha`` over shared samples."""
    if traj0.times.shape != traj1.times.shape or not np.allclose(traj0.times, traj1.times, rtol=0, atol=0):
        raise InputError("trajectories must share the time mesh")
    d = traj1.states - traj0.states
    wz = _scale_weights(traj0, scale, zeta)
    wa = _scale_weights(traj0, scale, alpha)
    d0 = float(np.linalg.norm(wa * d[0]))
    if not d0 > 0:
        raise InputError("initial deviation must be positive")
    nz = np.sqrt(np.sum((wz * d) ** 2, axis=(1, 2)))
    t = traj0.times
    pos = t > 0
    return float(np.max(t[pos] ** weight * nz[pos]) / d0)


# -- remainder -------------------------------------------------------------------------------

@dataclass(frozen=True)
class RemainderEstimate:
    c_star: float
    q_star: float
    linear: bool = False
    samples: int = 0


def _random_direction(rng, m, K):
    k = np.arange(K)
    return rng.normal(size=(m, K)) * (1.0 + k) ** -2.0


def estimate_remainder_constants(problem, v_star, radii, gamma_star, xi=None, directions=8, seed=0,
                                 q_star=None) -> RemainderEstimate:
    """Fit ``log ||f_hat(w)||_{gamma*}`` against ``log ||w||_xi`` for ``f_hat(w) = f(v*+w) - f(v*) - df(v*) w``.

    ``df(v*) w`` is a central difference along ``w`` with one Richardson step.
    With ``q_star`` given, only ``c*`` is fitted.  ``c*`` carries 10% headroom.
    """
    radii = np.asarray(radii, dtype=float)
    if radii.size < 2 or not np.all(radii > 0):
        raise InputError("need at least two positive radii")
    vs = as_system(v_star).coefficients
    xi = problem.profile.xi if xi is None else xi
    scale = problem.scale
    lam = problem.domain.eigenvalues(problem.K)
    wx = scale.weights(lam, xi)
    wg = scale.weights(lam, gamma_star)
    rng = np.random.default_rng(seed)
    f0 = problem.f(vs)
    xs, ys = [], []
    for _ in range(directions):
        d = _random_direction(rng, problem.m, problem.K)
        d /= np.linalg.norm(wx * d)
        h = np.finfo(float).eps ** (1 / 3) * max(1.0, float(np.max(np.abs(vs)))) / np.max(np.abs(d))

        def quot(step):
            return (problem.f(vs + step * d) - problem.f(vs - step * d)) / (2 * step)

        df = (4 * quot(h / 2) - quot(h)) / 3
        for r in radii:
            rem = problem.f(vs + r * d) - f0 - r * df
            xs.append(math.log(r))
            ys.append(float(np.linalg.norm(wg * rem)))
    ys = np.array(ys)
    xs = np.array(xs)
    ref = max(1.0, float(np.linalg.norm(wg * f0)))
    if np.max(ys) <= 1e-12 * ref * max(1.0, float(np.exp(xs).max())):
        return RemainderEstimate(0.0, math.nan, True, ys.size)
    good = ys > 0
    if q_star is None:
        q_star = float(np.polyfit(xs[good], np.log(ys[good]), 1)[0])
    c = float(np.max(ys[good] / np.exp(xs[good]) ** q_star)) * 1.1
    return RemainderEstimate(c, float(q_star), False, ys.size)


# -- certificate ---------------------------------------------------------------------------------

def c0_constant(mu, q_star, gamma0, alpha, gap):
    """``1 + (B(mu q*, 1-mu q*) + B(mu (q*-1), 1-mu q*)) sup_r r^{1+gamma0-alpha-mu q*} e^{-gap r}``."""
    mq = mu * q_star
    if not 0 < mq < 1:
        raise PreconditionError(f"need 0 < mu*q_star < 1, got {mq!r}")
    expo = 1 + gamma0 - alpha - mq
    if expo < -1e-14:
        raise PreconditionError(f"need mu*q_star <= 1 + gamma0 - alpha (exponent {expo!r})")
    expo = max(expo, 0.0)
    b1 = special_beta(mq, 1 - mq)
    b2 = special_beta(mu * (q_star - 1), 1 - mq)
    return 1.0 + (b1 + b2) * sup_power_exp(expo, gap)


def basin_length(c_star, M, q_star, r_star):
    """Largest ``L < r*`` with ``c* M L^{q*-1} <= 1``."""
    if not q_star > 1:
        raise PreconditionError("q_star must exceed 1")
    if not (c_star > 0 and M > 0 and r_star > 0):
        raise InputError("c_star, M and r_star must be positive")
    L = (c_star * M) ** (-1.0 / (q_star - 1))
    return min(L, r_star * (1 - 1e-9))


def choose_gamma0(gamma_star, gamma, alpha, mu, q_star):
    if gamma_star == 0 or gamma_star == gamma:
        return gamma_star
    lo, hi = max(0.0, alpha + mu * q_star - 1), gamma_star
    if not lo < hi:
        raise PreconditionError("no gamma0 in (0, gamma*) with mu q* < 1 + gamma0 - alpha")
    return 0.5 * (lo + hi)


def certificate_M(gen, alpha, xi, gamma_star, omega_bar, c0, scale=None):
    """``M = max(1, 4 c0 max_pairs sup_t e^{omega_bar t} (||e^{tA}||_theta + t^{theta-theta'} ||e^{tA}||_{theta'->theta}))``.

    Pairs ``(theta', theta)`` range over ``(alpha, alpha), (alpha, xi), (gamma*, alpha), (gamma*, xi)``.
    """
    worst = 0.0
    for lo, hi in ((alpha, alpha), (alpha, xi), (gamma_star, alpha), (gamma_star, xi)):
        same = semigroup_norm_constants(gen, hi, hi, omega_bar, scale)
        cross = semigroup_norm_constants(gen, lo, hi, omega_bar, scale)
        worst = max(worst, same + cross)
    return max(1.0, 4.0 * c0 * worst)


@dataclass(frozen=True)
class BasinCertificate:
    gamma_star: float
    q_star: float
    c_star: float
    r_star: float
    M: float
    omega: float
    omega_bar: float
    omega0: float
    mu: float
    gamma0: float
    c0: float
    L: float
    epsilon0: float
    gate: dict = field(default_factory=dict)

    def to_dict(self):
        d = {k: getattr(self, k) for k in ("gamma_star", "q_star", "c_star", "r_star", "M", "omega",
                                           "omega_bar", "omega0", "mu", "gamma0", "c0", "L", "epsilon0")}
        for k, v in self.gate.items():
            d[f"gate_{k}"] = v
        return d

    def dumps(self):
        return dump_kv(self.to_dict())

    @classmethod
    def loads(cls, text):
        d = parse_kv(text)
        gate = {k[5:]: d.pop(k) for k in list(d) if k.startswith("gate_")}
        return cls(**{k: float(v) for k, v in d.items()}, gate=gate)


def basin_certificate(c_star, q_star, r_star, gamma_star, M, omega, omega_bar, omega0, alpha, xi, gamma,
                      mu=None) -> BasinCertificate:
    """Assemble the certificate, refusing it (``PreconditionError``) with the violated condition named."""
    if not q_star > 1:
        raise PreconditionError("q_star must exceed 1")
    if not 0 < omega < omega_bar < omega0:
        raise PreconditionError(f"need 0 < omega < omega_bar < omega0, got {omega}, {omega_bar}, {omega0}")
    if not 0 <= gamma_star <= gamma:
        raise PreconditionError("need 0 <= gamma_star <= gamma")
    mu = xi - alpha if mu is None else mu
    if not mu * q_star < 1:
        raise PreconditionError(f"need mu*q_star < 1, got {mu * q_star!r}")
    ac = alpha_crit_star(q_star, gamma_star, xi)
    strict = (0 < gamma_star < gamma) or alpha == gamma
    ok = alpha > ac if strict else alpha >= ac - 1e-12
    gate = {"alpha": alpha, "alpha_crit_star": ac, "strict": strict, "passed": ok}
    if not ok:
        rel = ">" if strict else ">="
        raise PreconditionError(f"gate failed: need alpha {rel} alpha*_crit = {ac!r}, got {alpha!r}")
    g0 = choose_gamma0(gamma_star, gamma, alpha, mu, q_star)
    c0 = c0_constant(mu, q_star, g0, alpha, omega_bar - omega)
    L = basin_length(c_star, M, q_star, r_star)
    return BasinCertificate(gamma_star, q_star, c_star, r_star, M, omega, omega_bar, omega0, mu, g0, c0,
                            L, L / M, gate)


# -- instability -------------------------------------------------------------------------------------

@dataclass(frozen=True)
class StabilityVerdict:
    verdict: str
    evidence: dict = field(default_factory=dict)

    def lines(self):
        out = [f"verdict={self.verdict}"]
        for k, v in self.evidence.items():
            out.append(dump_kv({k: v}).strip())
        return out


def instability_probe(problem, v_star, direction, deltas, escape_radius=None, T_max=40.0, N=800,
                      alpha=None) -> StabilityVerdict:
    """Simulate from ``v* + delta * direction`` and record escape times and early growth rates.

    The deviation is measured in ``E_alpha``.  Growth rates are fitted on the
    samples whose deviation stays below ``sqrt(delta * escape_radius)``.
    """
    deltas = sorted((float(d) for d in deltas), reverse=True)
    if not deltas or not all(d > 0 for d in deltas):
        raise InputError("deltas must be positive")
    R = 10 * max(deltas) if escape_radius is None else float(escape_radius)
    alpha = problem.profile.alpha if alpha is None else alpha
    vs = as_system(v_star)
    d = as_system(direction)
    dn = problem.scale.norm(d, alpha)
    if not dn > 0:
        raise InputError("direction must be nonzero")
    d = d * (1.0 / dn)
    lin = problem.linearization(vs)
    sb = spectral_bound(lin).spectral_bound if lin is not None else math.nan
    lam = problem.domain.eigenvalues(problem.K)
    wa = problem.scale.weights(lam, alpha)
    cfg = SolveConfig(problem.K, TimeMesh(T_max, N, 1.0))
    escapes, rates, degenerate = [], [], []
    for delta in deltas:
        if delta >= R:
            escapes.append(0.0)
            rates.append(math.nan)
            degenerate.append(True)
            continue
        u0 = vs + d * delta
        if problem.quasilinear:
            sol = solve_quasilinear(problem, u0, cfg)
        else:
            sol = solve_semilinear(problem.generator, problem.f, u0, cfg, margin=None)
        tr = sol.trajectory
        dev = np.sqrt(np.sum((wa * (tr.states - vs.coefficients[None])) ** 2, axis=(1, 2)))
        hit = np.nonzero(dev > R)[0]
        escapes.append(float(tr.times[hit[0]]) if hit.size else math.inf)
        if not hit.size and sol.status != "completed":
            escapes[-1] = float(sol.t_plus_estimate)
        early = dev <= math.sqrt(delta * R)
        stop = hit[0] if hit.size else dev.size
        sel = early & (np.arange(dev.size) < stop)
        if sel.sum() >= 3:
            rates.append(float(np.polyfit(tr.times[sel], np.log(dev[sel]), 1)[0]))
        else:
            rates.append(math.nan)
        degenerate.append(False)
    escaped = [math.isfinite(e) for e in escapes]
    evidence = {"spectral_bound": sb, "escape_radius": R, "deltas": deltas, "escape_times": escapes,
                "growth_rates": rates, "degenerate": degenerate}
    if not any(escaped):
        verdict = INCONCLUSIVE
    else:
        grow = [r for r in rates if math.isfinite(r)]
        verdict = UNSTABLE if (sb > 0 or (grow and max(grow) > 0)) else INCONCLUSIVE
    return StabilityVerdict(verdict, evidence)
