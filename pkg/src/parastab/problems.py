"""Concrete problems ``v' = A(v) v + f(v)`` packaged behind :class:`ProblemSpec`.

All operators act on coefficient arrays of shape ``(..., m, K)`` so that a
batch of states (finite-difference probes, quadrature nodes) is evaluated in
one pass.  Products and powers are formed on the midpoint collocation grid
and projected back; derivatives are exact on the coefficients.

Built-in instances:

* chemotaxis with logistic source on a Neumann interval,
  ``u_t = u_xx - chi (u v_x)_x + kappa u (1 - u)``, ``v_t = v_xx + u - v``;
* ``u_t = (a(u) u_x)_x + |u_x|^kappa`` on a Dirichlet interval;
* ``u_t = ((1 + sigma(u)) u_x)_x - m u + Q(u, u)`` (and a ``+kappa u`` variant).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InputError
from .exponents import (ExponentProfile, SEMILINEAR, chemotaxis_profile, gradient_profile)
from .linops import BlockGenerator, DenseGenerator, chemotaxis_linearization
from .spaces import (DEFAULT_DEALIAS, DIRICHLET, NEUMANN, Domain1D, Scale, SystemField,
                     analyze, as_system, collocation_size, synthesize)

A_MIN = 1e-6
SMOOTHING_EPS = 1e-12


@dataclass(frozen=True)
class ProblemSpec:
    """A truncated evolution problem.

    ``apply_A(v, w)`` returns ``A(v) w`` and ``f(v)`` the nonlinearity, both
    on coefficient arrays ``(..., m, K)``.  For semilinear problems
    ``generator`` holds the constant ``A`` as a block generator.
    """

    name: str
    m: int
    domain: Domain1D
    K: int
    apply_A: Callable
    f: Callable
    profile: ExponentProfile
    equilibria: tuple
    admissible_margin: Callable
    scale: Scale
    quasilinear: bool = False
    generator: Optional[BlockGenerator] = None
    closed_linearization: Optional[Callable] = None
    linear_f: bool = False
    dealias: float = DEFAULT_DEALIAS
    params: dict = field(default_factory=dict)
    references: tuple = ()

    def rhs(self, v):
        """``A(v) v + f(v)`` on coefficients ``(..., m, K)``."""
        v = np.asarray(v, dtype=float)
        return self.apply_A(v, v) + self.f(v)

    def rhs_flat(self, y):
        return self.rhs(np.reshape(y, (self.m, self.K))).reshape(-1)

    def assemble_A(self, v=None):
        """The operator ``A(v)``; a :class:`DenseGenerator` for quasilinear problems."""
        if not self.quasilinear:
            return self.generator
        v = np.asarray(as_system(v).coefficients if v is not None else np.zeros((self.m, self.K)))
        n = self.m * self.K
        E = np.eye(n).reshape(n, self.m, self.K)
        cols = self.apply_A(np.broadcast_to(v, E.shape), E).reshape(n, n)
        return DenseGenerator(self.domain, self.m, self.K, cols.T)

    def linearization(self, v_star):
        """Closed-form linearization at ``v_star`` when one is known, else ``None``."""
        if self.closed_linearization is None:
            return None
        return self.closed_linearization(as_system(v_star))

    def field(self, coefficients):
        return SystemField(self.domain, np.reshape(coefficients, (self.m, self.K)))


def equilibrium_residual(problem: ProblemSpec, v) -> float:
    """``||A(v) v + f(v)||_0``."""
    v = as_system(v)
    if (v.m, v.K) != (problem.m, problem.K):
        raise InputError("state shape does not match the problem")
    return float(np.linalg.norm(problem.rhs(v.coefficients)))


# -- pseudospectral building blocks ----------------------------------------------

class _Collocation:
    """Grid transforms for one domain and truncation."""

    def __init__(self, domain, K, dealias):
        self.domain, self.K = domain, K
        self.ell = domain.length
        self.n = collocation_size(K, dealias, domain.boundary)
        self.ks = domain.wavenumbers(K)
        self.kpi = self.ks * np.pi / self.ell

    def values(self, coef):
        return synthesize(self.domain.kind, self.ks, coef, self.n, self.ell)

    def dx_values(self, coef):
        other = "sin" if self.domain.kind == "cos" else "cos"
        sign = -1.0 if self.domain.kind == "cos" else 1.0
        return synthesize(other, self.ks, sign * self.kpi * coef, self.n, self.ell)

    def project(self, values):
        return analyze(self.domain.kind, self.ks, values, self.ell)

    def divergence(self, flux):
        """Coefficients of ``d/dx`` of a grid flux that vanishes/extends oddly at the ends."""
        other = "sin" if self.domain.kind == "cos" else "cos"
        g = analyze(other, self.ks, flux, self.ell)
        sign = 1.0 if other == "sin" else -1.0
        return sign * self.kpi * g


# -- chemotaxis ---------------------------------------------------------------------

def make_chemotaxis(chi, kappa, domain=None, K=64, epsilon=0.2, p=4.0, n=1, dealias=DEFAULT_DEALIAS):
    """Chemotaxis with logistic source, split as a linear block part plus ``f``.

    Linear part per mode ``[[-lambda + kappa, 0], [1, -lambda - 1]]``; nonlinearity
    ``f(u, v) = (-chi (u v_x)_x - kappa u^2, 0)``.
    """
    if not chi > 0:
        raise InputError("chi must be positive")
    if not kappa > 0:
        raise InputError("kappa must be positive")
    domain = domain or Domain1D(1.0, NEUMANN)
    if domain.boundary != NEUMANN:
        raise InputError("the chemotaxis system carries Neumann boundary conditions")
    K = int(K)
    profile = chemotaxis_profile(epsilon, p, n)
    col = _Collocation(domain, K, dealias)
    gen = BlockGenerator.from_affine(domain, K, [[kappa, 0.0], [1.0, -1.0]], [[-1.0, 0.0], [0.0, -1.0]])
    blocks = gen.blocks

    def apply_A(v, w):
        w = np.asarray(w, dtype=float)
        return np.einsum("kij,...jk->...ik", blocks, w)

    def f(v):
        v = np.asarray(v, dtype=float)
        u, c = v[..., 0, :], v[..., 1, :]
        ug = col.values(u)
        flux = ug * col.dx_values(c)
        out = np.zeros_like(v)
        out[..., 0, :] = -chi * col.divergence(flux) - kappa * col.project(ug * ug)
        return out

    zero = SystemField.zeros(domain, 2, K)
    one = SystemField.constant(domain, (1.0, 1.0), K)

    def closed(vs):
        if np.allclose(vs.coefficients, zero.coefficients, atol=1e-12):
            return chemotaxis_linearization(chi, kappa, "zero", domain, K)
        if np.allclose(vs.coefficients, one.coefficients, atol=1e-12):
            return chemotaxis_linearization(chi, kappa, "one", domain, K)
        return None

    return ProblemSpec(
        name="chemotaxis", m=2, domain=domain, K=K, apply_A=apply_A, f=f, profile=profile,
        equilibria=(zero, one), admissible_margin=lambda v: math.inf,
        scale=Scale((-2 * epsilon, 1 - 2 * epsilon)), quasilinear=False, generator=gen,
        closed_linearization=closed, dealias=dealias,
        params=dict(chi=chi, kappa=kappa, K=K, epsilon=epsilon, p=p, n=n),
        references=("chemotaxis-logistic",),
    )


# -- gradient nonlinearity ---------------------------------------------------------------

def default_diffusivity(u):
    """``a(u) = 1 + u^2/(1 + u^2)``: bounded, with globally Lipschitz derivative."""
    u2 = np.square(u)
    return 1.0 + u2 / (1.0 + u2)


def make_gradient_quasilinear(a=None, kappa=4.0, domain=None, K=64, profile=None, p=None, tau=None,
                              a_min=A_MIN, probe_range=(-10.0, 10.0), dealias=DEFAULT_DEALIAS):
    """``u_t = (a(u) u_x)_x + |u_x|^kappa`` with Dirichlet conditions.

    ``|.|`` is smoothed as ``(u_x^2 + e^2)^(kappa/2) - e^kappa`` with
    ``e = 1e-12`` so that difference quotients stay finite.
    """
    if not kappa > 3:
        raise InputError(f"kappa must be > 3, got {kappa!r}")
    a = default_diffusivity if a is None else a
    domain = domain or Domain1D(1.0, DIRICHLET)
    if domain.boundary != DIRICHLET:
        raise InputError("the gradient problem carries Dirichlet boundary conditions")
    probe = np.linspace(probe_range[0], probe_range[1], 4001)
    if not np.all(np.asarray(a(probe)) >= a_min):
        raise InputError(f"diffusivity dips below a_min={a_min!r} on {probe_range}")
    if profile is None:
        p = (kappa + 1) / 2 if p is None else p
        tau = (0.5 + 1 - 1 / p) / 4 if tau is None else tau
        idx = gradient_profile(1, p, kappa, tau)
        profile = idx.profile
    tau = profile.gamma
    K = int(K)
    col = _Collocation(domain, K, dealias)
    e = SMOOTHING_EPS
    half_k = kappa / 2

    def apply_A(v, w):
        v = np.asarray(v, dtype=float)
        w = np.asarray(w, dtype=float)
        flux = a(col.values(v[..., 0, :])) * col.dx_values(w[..., 0, :])
        return col.divergence(flux)[..., None, :]

    def f(v):
        ux = col.dx_values(np.asarray(v, dtype=float)[..., 0, :])
        return col.project((ux * ux + e * e) ** half_k - (e * e) ** half_k)[..., None, :]

    def margin(v):
        ug = col.values(as_system(v).coefficients[0])
        return float(np.min(a(ug)) - a_min)

    zero = SystemField.zeros(domain, 1, K)
    lam = domain.eigenvalues(K)
    a0 = float(a(np.array(0.0)))

    def closed(vs):
        if np.allclose(vs.coefficients, 0.0, atol=1e-14):
            return BlockGenerator.from_affine(domain, K, [[0.0]], [[-a0]])
        return None

    return ProblemSpec(
        name="gradient", m=1, domain=domain, K=K, apply_A=apply_A, f=f, profile=profile,
        equilibria=(zero,), admissible_margin=margin, scale=Scale((-2 * tau,)), quasilinear=True,
        closed_linearization=closed, dealias=dealias,
        params=dict(kappa=kappa, K=K, tau=tau, a_min=a_min),
        references=("gradient-nonlinearity",),
    )


# -- quadratic ------------------------------------------------------------------------

def _symmetrize(Q):
    rng = np.random.default_rng(12345)
    x, y = rng.normal(size=64), rng.normal(size=64)
    if np.allclose(Q(x, y), Q(y, x), rtol=1e-12, atol=1e-12):
        return Q
    warnings.warn("Q is not symmetric; using (Q(u,w) + Q(w,u))/2", stacklevel=3)
    return lambda u, w: 0.5 * (Q(u, w) + Q(w, u))


def make_quadratic(domain=None, K=64, mass=1.0, growth=None, sigma=None, Q=None, profile=None,
                   dealias=DEFAULT_DEALIAS):
    """``u_t = ((1 + sigma(u)) u_x)_x - mass u + Q(u, u)``.

    With ``growth`` given, ``+growth u`` replaces ``-mass u`` (unstable at 0).
    ``sigma=None`` gives a semilinear problem with a block generator;
    ``Q=None`` means ``u^2``; pass ``Q=0`` for the linear problem.
    """
    domain = domain or Domain1D(1.0, NEUMANN)
    K = int(K)
    if growth is not None:
        if not growth > 0:
            raise InputError("growth must be positive")
        shift = float(growth)
    else:
        if not mass > 0:
            raise InputError("mass must be positive")
        shift = -float(mass)
    linear = isinstance(Q, (int, float)) and Q == 0
    if Q is None:
        Q = np.multiply
    elif not linear:
        Q = _symmetrize(Q)
    if profile is None:
        profile = ExponentProfile(gamma=0.0, beta=None, alpha=0.25, xi=0.5, q=2.0, mode=SEMILINEAR)
    col = _Collocation(domain, K, dealias)
    lam = domain.eigenvalues(K)
    gen = BlockGenerator.from_affine(domain, K, [[shift]], [[-1.0]])

    if sigma is None:
        def apply_A(v, w):
            return (-lam + shift) * np.asarray(w, dtype=float)
    else:
        def apply_A(v, w):
            v = np.asarray(v, dtype=float)
            w = np.asarray(w, dtype=float)
            flux = (1.0 + sigma(col.values(v[..., 0, :]))) * col.dx_values(w[..., 0, :])
            return col.divergence(flux)[..., None, :] + shift * w

    def f(v):
        v = np.asarray(v, dtype=float)
        if linear:
            return np.zeros_like(v)
        ug = col.values(v[..., 0, :])
        return col.project(Q(ug, ug))[..., None, :]

    def margin(v):
        if sigma is None:
            return math.inf
        ug = col.values(as_system(v).coefficients[0])
        return float(np.min(1.0 + sigma(ug)) - A_MIN)

    eqs = [SystemField.zeros(domain, 1, K)]
    if not linear and Q is np.multiply and domain.boundary == NEUMANN:
        eqs.append(SystemField.constant(domain, (-shift,), K))

    def closed(vs):
        c = vs.coefficients
        if domain.boundary == NEUMANN and np.allclose(c[0, 1:], 0.0, atol=1e-14):
            ustar = c[0, 0] / math.sqrt(domain.length)
        elif np.allclose(c, 0.0, atol=1e-14):
            ustar = 0.0
        else:
            return None
        if not (linear or Q is np.multiply):
            return None
        diff = 1.0 + (float(sigma(np.array(ustar))) if sigma is not None else 0.0)
        react = shift + (0.0 if linear else 2.0 * ustar)
        return BlockGenerator.from_affine(domain, K, [[react]], [[-diff]])

    return ProblemSpec(
        name="quadratic", m=1, domain=domain, K=K, apply_A=apply_A, f=f, profile=profile,
        equilibria=tuple(eqs), admissible_margin=margin, scale=Scale.plain(1),
        quasilinear=sigma is not None, generator=gen if sigma is None else None,
        closed_linearization=closed, linear_f=linear, dealias=dealias,
        params=dict(mass=mass, growth=growth, K=K),
        references=("quadratic",),
    )


def make_problem(name, **kw) -> ProblemSpec:
    """Instantiate a built-in problem by name."""
    makers = {"chemotaxis": make_chemotaxis, "gradient": make_gradient_quasilinear,
              "quadratic": make_quadratic}
    if name not in makers:
        raise InputError(f"unknown problem {name!r}; choose from {sorted(makers)}")
    return makers[name](**kw)
