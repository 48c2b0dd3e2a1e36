"""Mild-solution integrators on graded time meshes.

Semilinear problems ``u' = A u + f(u)`` with a block generator are advanced by
the second-order exponential Runge-Kutta scheme (ETD2RK)::

    a       = e^{hA} u_n + h phi1(hA) f(u_n)
    u_{n+1} = a + h phi2(hA) (f(a) - f(u_n))

Quasilinear problems are solved by a Picard iteration on the whole time
interval: the operator is frozen on every mesh slice at the previous iterate
and the frozen linear problem is integrated exactly for a piecewise-linear
forcing.  Meshes ``t_j = T (j/N)^r`` concentrate nodes near ``t = 0`` where
mild solutions from rough data carry the singular weight ``t^{-mu}``.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp
from scipy.special import roots_jacobi

from .errors import InputError, NumericError
from .linops import BlockGenerator, DenseGenerator, apply_semigroup, block_exponentials
from .records import write_csv
from .spaces import DEFAULT_DEALIAS, Scale, SystemField, WeightedTrajectory, as_system
from .special import special_beta, sup_power_exp

COMPLETED = "completed"
BLOWUP = "blowup_f_norm"
LEFT_REGION = "left_admissible_region"
MAX_ITERATIONS = "max_iterations"

BLOWUP_CAP = 1e8


@dataclass(frozen=True)
class TimeMesh:
    T: float
    N: int
    r: float = 1.0

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise InputError("T must be positive")
        if int(self.N) != self.N or self.N < 1:
            raise InputError("N must be a positive integer")
        if not self.r >= 1:
            raise InputError("grading r must be >= 1")
        object.__setattr__(self, "N", int(self.N))

    @classmethod
    def graded(cls, T, N, mu=0.0, q=1.0):
        """Mesh with the default grading ``r = min(4, 2/(1 - mu q))``."""
        if not mu * q < 1:
            raise InputError("need mu*q < 1")
        return cls(T, N, min(4.0, 2.0 / (1.0 - mu * q)))

    @property
    def nodes(self):
        t = self.T * (np.arange(self.N + 1) / self.N) ** self.r
        t[-1] = self.T
        return t


@dataclass(frozen=True)
class SolveConfig:
    K: int
    mesh: TimeMesh
    dealias: float = DEFAULT_DEALIAS
    fixed_point_tol: float = 1e-10
    max_outer_iterations: int = 50
    mu: float = 0.0
    blowup_cap: float = BLOWUP_CAP

    def __post_init__(self):
        if not self.fixed_point_tol > 0:
            raise InputError("fixed_point_tol must be positive")
        if not self.mu >= 0:
            raise InputError("mu must be >= 0")
        if self.max_outer_iterations < 1:
            raise InputError("max_outer_iterations must be >= 1")

    def check_profile(self, profile):
        if profile is not None and not self.mu * profile.q < 1:
            raise InputError(f"mu*q = {self.mu * profile.q!r} must be < 1")


@dataclass
class TrajectorySolution:
    trajectory: WeightedTrajectory
    status: str
    t_plus_estimate: Optional[float] = None   # None means "t+ >= T"
    monitors: dict = field(default_factory=dict)
    iterations: list = field(default_factory=list)

    @property
    def completed(self):
        return self.status == COMPLETED

    @property
    def t_plus_text(self):
        if self.t_plus_estimate is None:
            return f">= {float(self.trajectory.times[-1])!r}"
        return repr(float(self.t_plus_estimate))


# -- phi functions ------------------------------------------------------------------

def _phi_scalar(z):
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 0.1
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        e = np.exp(z)
        em1 = np.expm1(z)
        p1 = np.where(small, 0.0, em1 / z)
        p2 = np.where(small, 0.0, (em1 - z) / (z * z))
    zs = np.where(small, z, 0.0)
    s1, s2, term = np.zeros_like(z), np.zeros_like(z), np.ones_like(z)
    fact1, fact2 = 1.0, 2.0
    for k in range(12):
        s1 = s1 + term / fact1
        s2 = s2 + term / fact2
        term = term * zs
        fact1 *= k + 2
        fact2 *= k + 3
    return e, np.where(small, s1, p1), np.where(small, s2, p2)


def phi_functions(blocks, h):
    """``e^{hB}, phi1(hB), phi2(hB)`` for a batch of blocks ``(..., m, m)``.

    Scalars use closed forms with short series near zero; larger blocks take
    the corner blocks of the exponential of an augmented matrix.
    """
    blocks = np.asarray(blocks, dtype=float)
    m = blocks.shape[-1]
    if m == 1:
        e, p1, p2 = _phi_scalar(h * blocks)
        return e, p1, p2
    lead = blocks.shape[:-2]
    aug = np.zeros(lead + (3 * m, 3 * m))
    aug[..., :m, :m] = h * blocks
    eye = np.eye(m)
    aug[..., :m, m:2 * m] = eye
    aug[..., m:2 * m, 2 * m:] = eye
    X = sla.expm(aug)
    return X[..., :m, :m], X[..., :m, m:2 * m], X[..., :m, 2 * m:]


def _blocks_apply(P, c):
    # P: (K, m, m), c: (m, K)
    return np.einsum("kij,jk->ik", P, c)


# -- semilinear ------------------------------------------------------------------------

def _f_norm(fc):
    return float(np.linalg.norm(fc))


def solve_semilinear(A: BlockGenerator, f: Callable, u0, config: SolveConfig, profile=None,
                     margin: Optional[Callable] = None) -> TrajectorySolution:
    """ETD2RK on the graded mesh of ``config``.

    ``f`` maps coefficient arrays ``(m, K)`` to ``(m, K)``.  The run stops
    with ``blowup_f_norm`` once ``||f||_0`` exceeds the cap or the state stops
    being finite, and with ``left_admissible_region`` when ``margin`` turns
    nonpositive.
    """
    u0 = as_system(u0)
    if isinstance(A, DenseGenerator):
        raise InputError("solve_semilinear needs a block generator")
    if (u0.m, u0.K) != (A.m, A.K):
        raise InputError("initial state does not match the generator")
    config.check_profile(profile)
    t = config.mesh.nodes
    states = np.empty((t.size, u0.m, u0.K))
    states[0] = u0.coefficients
    fn = np.full(t.size, np.nan)
    mg = np.full(t.size, np.nan)
    cache = {}
    u = u0.coefficients.copy()
    fu = np.asarray(f(u), dtype=float)
    status, tplus, last = COMPLETED, None, t.size - 1

    def check(j, u, fu):
        fn[j] = _f_norm(fu) if np.all(np.isfinite(fu)) else math.inf
        if margin is not None and np.all(np.isfinite(u)):
            mg[j] = margin(SystemField(u0.domain, u))
        if not (np.all(np.isfinite(u)) and fn[j] < config.blowup_cap):
            return BLOWUP
        if margin is not None and not mg[j] > 0:
            return LEFT_REGION
        return None

    bad = check(0, u, fu)
    if bad:
        status, tplus, last = bad, 0.0, 0
    else:
        for j in range(t.size - 1):
            h = t[j + 1] - t[j]
            key = float(h)
            if key not in cache:
                cache = {key: phi_functions(A.blocks, h)}
            E, P1, P2 = cache[key]
            with np.errstate(over="ignore", invalid="ignore"):
                a = _blocks_apply(E, u) + h * _blocks_apply(P1, fu)
                fa = np.asarray(f(a), dtype=float) if np.all(np.isfinite(a)) else np.full_like(a, np.nan)
                u = a + h * _blocks_apply(P2, fa - fu)
                fu = np.asarray(f(u), dtype=float) if np.all(np.isfinite(u)) else np.full_like(u, np.nan)
            states[j + 1] = u
            bad = check(j + 1, u, fu)
            if bad:
                status, tplus, last = bad, float(t[j + 1]), j + 1
                break
    # the failing node stays in the monitors; a non-finite state is not stored
    nkeep = last + 1
    if nkeep > 1 and not np.all(np.isfinite(states[last])):
        nkeep = last
    keep = slice(0, last + 1)
    traj = WeightedTrajectory(u0.domain, t[:nkeep], states[:nkeep], config.mu)
    return TrajectorySolution(traj, status, tplus,
                              {"t": t[keep], "f_norm": fn[keep], "margin": mg[keep]})


# -- quasilinear -------------------------------------------------------------------------

def _weighted_distances(d, t, scale, domain, alpha, xi, mu):
    na = scale.norms(d, domain, alpha)
    nx = scale.norms(d, domain, xi)
    pos = t > 0
    return float(na.max()), float(np.max(t[pos] ** mu * nx[pos])) if pos.any() else 0.0


def _margins(problem, dom, w):
    return np.array([problem.admissible_margin(SystemField(dom, wj)) if np.all(np.isfinite(wj)) else math.nan
                     for wj in w])


def solve_quasilinear(problem, u0, config: SolveConfig) -> TrajectorySolution:
    """Picard iteration ``w^{m+1} = mild solution of v' = A(w^m) v + f(w^m)``.

    On each slice ``[t_j, t_{j+1}]`` the operator is frozen at
    ``A((w_j + w_{j+1})/2)`` and the forcing interpolated linearly, which the
    ``phi1``/``phi2`` functions integrate exactly.  The first iterate is the
    semigroup orbit of ``A(u0)``.  Iteration stops when the distance
    ``sup ||dw||_alpha + sup t^mu ||dw||_xi`` falls below ``fixed_point_tol``.
    """
    u0 = as_system(u0)
    if (u0.m, u0.K) != (problem.m, problem.K):
        raise InputError("initial state does not match the problem")
    config.check_profile(problem.profile)
    m0 = problem.admissible_margin(u0)
    if not m0 > 0:
        raise InputError(f"initial state outside the admissible region (margin {m0!r})")
    prof = problem.profile
    alpha, xi = prof.alpha, prof.xi
    t = config.mesh.nodes
    n = t.size
    dom = u0.domain
    A0 = problem.assemble_A(u0)
    w = np.empty((n, problem.m, problem.K))
    for j, tj in enumerate(t):
        w[j] = apply_semigroup(A0, tj, u0).coefficients
    hist = []
    status, tplus = MAX_ITERATIONS, None
    fn = np.full(n, np.nan)
    mg = np.full(n, np.nan)
    for it in range(config.max_outer_iterations):
        with np.errstate(over="ignore", invalid="ignore"):
            F = np.asarray(problem.f(w), dtype=float)
        fn = np.sqrt(np.sum(F * F, axis=(1, 2)))
        mg = _margins(problem, dom, w)
        blow = np.nonzero(~(fn < config.blowup_cap))[0]
        out = np.nonzero(~(mg > 0))[0]
        if blow.size or out.size:
            jb = blow[0] if blow.size else n
            jo = out[0] if out.size else n
            status = BLOWUP if jb <= jo else LEFT_REGION
            tplus = float(t[min(jb, jo)])
            break
        v = np.empty_like(w)
        v[0] = u0.coefficients
        for j in range(n - 1):
            h = t[j + 1] - t[j]
            Aj = problem.assemble_A(SystemField(dom, 0.5 * (w[j] + w[j + 1]))).matrix
            E, P1, P2 = phi_functions(Aj, h)
            v[j + 1] = (E @ v[j].reshape(-1) + h * (P1 @ F[j].reshape(-1))
                        + h * (P2 @ (F[j + 1] - F[j]).reshape(-1))).reshape(problem.m, problem.K)
        if not np.all(np.isfinite(v)):
            status, tplus = BLOWUP, float(t[np.nonzero(~np.isfinite(v).all(axis=(1, 2)))[0][0]])
            break
        da, dx = _weighted_distances(v - w, t, problem.scale, dom, alpha, xi, config.mu)
        hist.append((da, dx))
        w = v
        if da + dx <= config.fixed_point_tol:
            status = COMPLETED
            with np.errstate(over="ignore", invalid="ignore"):
                F = np.asarray(problem.f(w), dtype=float)
            fn = np.sqrt(np.sum(F * F, axis=(1, 2)))
            mg = _margins(problem, dom, w)
            break
    traj = WeightedTrajectory(dom, t, w, config.mu)
    return TrajectorySolution(traj, status, tplus, {"t": t, "f_norm": fn, "margin": mg}, hist)


# -- oracle ------------------------------------------------------------------------------

def oracle_integrate(rhs: Callable, u0, T, tol=1e-10, times=None) -> TrajectorySolution:
    """Dormand-Prince 5(4) on the full coefficient system, as an independent reference.

    ``rhs`` maps a flat coefficient vector to its time derivative.
    """
    u0 = as_system(u0)
    if not T > 0:
        raise InputError("T must be positive")
    times = np.linspace(0.0, T, 11) if times is None else np.asarray(times, dtype=float)
    sol = solve_ivp(lambda _t, y: rhs(y), (0.0, T), u0.flat(), method="RK45", t_eval=times,
                    rtol=tol, atol=tol)
    ok = sol.status == 0 and sol.y.shape[1] == times.size
    k = sol.y.shape[1]
    states = sol.y.T.reshape(k, u0.m, u0.K)
    if k == 0:
        states = u0.coefficients[None]
        tt = np.array([0.0])
    else:
        tt = sol.t
    traj = WeightedTrajectory(u0.domain, tt, states)
    status = COMPLETED if ok else BLOWUP
    tplus = None if ok else float(sol.t[-1] if k else 0.0)
    return TrajectorySolution(traj, status, tplus, {"message": sol.message, "nfev": sol.nfev})


# -- singular quadrature -------------------------------------------------------------------

def _gauss_jacobi(lo, hi, p, q, g, n):
    """``int_lo^hi (hi - s)^p (s - lo)^q g(s) ds`` with ``n`` Gauss-Jacobi nodes."""
    x, w = roots_jacobi(n, p, q)
    half = (hi - lo) / 2
    return half ** (1 + p + q) * float(np.sum(w * g(lo + half * (1 + x))))


def singular_integral(b, c, eta_t, tol=1e-10, n0=16, n_max=4096):
    """``int_0^1 (1-s)^{-b} e^{-eta t (1-s)} s^{-c} ds`` by Gauss-Jacobi quadrature.

    The interval is split so that each piece carries one endpoint singularity
    in its weight and the exponential varies by at most ``e^{-30}`` across the
    right piece.  Node counts double until the relative change is at most ``tol``.
    """
    split = 1.0 - min(0.5, 30.0 / eta_t) if eta_t > 0 else 0.5

    def left(n):
        return _gauss_jacobi(0.0, split, 0.0, -c, lambda s: (1 - s) ** (-b) * np.exp(-eta_t * (1 - s)), n)

    def right(n):
        return _gauss_jacobi(split, 1.0, -b, 0.0, lambda s: s ** (-c) * np.exp(-eta_t * (1 - s)), n)

    prev = None
    n = n0
    while n <= n_max:
        val = left(n) + right(n)
        if prev is not None and abs(val - prev) <= tol * abs(val):
            return val
        prev = val
        n *= 2
    raise NumericError(f"Gauss-Jacobi quadrature did not converge (b={b}, c={c}, eta*t={eta_t})")


def singular_bound_check(a, b, c, eta, t_samples):
    """Worst margin of ``t^a I(t) <= sup_r r^a e^{-eta r} * B(1-a-b, 1-c)`` over ``t_samples``."""
    if not (b < 1 and c < 1):
        raise InputError("need b < 1 and c < 1")
    if not (0 <= a < 1 - b):
        raise InputError("need 0 <= a < 1 - b")
    if not eta > 0:
        raise InputError("eta must be positive")
    rhs = sup_power_exp(a, eta) * special_beta(1 - a - b, 1 - c)
    worst = math.inf
    for t in np.atleast_1d(np.asarray(t_samples, dtype=float)):
        if not t > 0:
            raise InputError("t samples must be positive")
        lhs = t ** a * singular_integral(b, c, eta * t)
        worst = min(worst, rhs - lhs)
    return worst


# -- trajectory I/O --------------------------------------------------------------------------

def trajectory_rows(sol: TrajectorySolution, alpha, xi, scale: Optional[Scale] = None):
    traj = sol.trajectory
    m = traj.states.shape[1]
    scale = scale or Scale.plain(m)
    lam = traj.domain.eigenvalues(traj.states.shape[-1])
    header = ["t"]
    cols = [traj.times]
    for i in range(m):
        for name, th in (("h0", 0.0), ("alpha", alpha), ("xi", xi)):
            w = scale.weights(lam, th)[i]
            header.append(f"u{i}_{name}")
            cols.append(np.sqrt(np.sum((w * traj.states[:, i, :]) ** 2, axis=-1)))
    nt = traj.times.size
    for key in ("f_norm", "margin"):
        vals = np.asarray(sol.monitors.get(key, np.full(nt, np.nan)), dtype=float)[:nt]
        header.append(key)
        cols.append(np.pad(vals, (0, nt - vals.size), constant_values=np.nan))
    rows = np.column_stack(cols).tolist()
    return header, rows


def write_trajectory(sol: TrajectorySolution, path, alpha=0.0, xi=0.0, scale=None):
    """CSV of norms and monitors plus the ``<path>.bin`` little-endian coefficient sidecar."""
    header, rows = trajectory_rows(sol, alpha, xi, scale)
    text = write_csv(path, header, rows)
    write_states_binary(sol.trajectory, str(path) + ".bin")
    return text


def write_states_binary(traj: WeightedTrajectory, path):
    nt, m, K = traj.states.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<3q", nt, m, K))
        fh.write(np.asarray(traj.times, dtype="<f8").tobytes())
        fh.write(np.asarray(traj.states, dtype="<f8").tobytes())


def read_states_binary(path, domain, mu=0.0) -> WeightedTrajectory:
    with open(path, "rb") as fh:
        nt, m, K = struct.unpack("<3q", fh.read(24))
        times = np.frombuffer(fh.read(8 * nt), dtype="<f8")
        states = np.frombuffer(fh.read(8 * nt * m * K), dtype="<f8").reshape(nt, m, K)
    return WeightedTrajectory(domain, times.astype(float), states.astype(float), mu)
