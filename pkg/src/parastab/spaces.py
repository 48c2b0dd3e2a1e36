"""Spectral Hilbert scales on an interval.

Functions on ``(0, length)`` are stored as coefficients in the eigenbasis of
the Dirichlet or Neumann Laplacian::

    Dirichlet: phi_k(x) = sqrt(2/l) sin(k pi x / l),   k = 1, 2, ...
    Neumann:   phi_0(x) = 1/sqrt(l),
               phi_k(x) = sqrt(2/l) cos(k pi x / l),   k = 1, 2, ...

with eigenvalues ``lambda_k = (k pi / l)**2`` of ``-Laplacian``.  The scale
``H^s`` carries the norm ``(sum_k (1 + lambda_k)**s c_k**2)**(1/2)``, so
interpolation between two indices is exact (complex interpolation equals
fractional powers on a Hilbert scale).

Pointwise nonlinearities are evaluated by collocation on the midpoint grid
``x_j = (j + 1/2) l / n`` where discrete cosine/sine transforms are exact
quadratures for trigonometric polynomials of degree below ``2n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.fft as sfft

from .errors import InputError, NumericOverflowError

DIRICHLET = "dirichlet"
NEUMANN = "neumann"

DEFAULT_K = 256
DEFAULT_DEALIAS = 1.5


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Domain1D:
    """The interval ``(0, length)`` with a homogeneous boundary condition."""

    length: float = 1.0
    boundary: str = NEUMANN

    def __post_init__(self):
        b = str(self.boundary).lower()
        if b not in (DIRICHLET, NEUMANN):
            raise InputError(f"boundary must be 'dirichlet' or 'neumann', got {self.boundary!r}")
        object.__setattr__(self, "boundary", b)
        if not (np.isfinite(self.length) and self.length > 0):
            raise InputError("length must be positive and finite")

    @property
    def kind(self):
        """Trigonometric family of the basis: ``"sin"`` or ``"cos"``."""
        return "sin" if self.boundary == DIRICHLET else "cos"

    def wavenumbers(self, K):
        """Integer mode indices ``k`` of the first ``K`` basis functions."""
        start = 1 if self.boundary == DIRICHLET else 0
        return np.arange(start, start + K)

    def eigenvalues(self, K):
        k = self.wavenumbers(K)
        return (k * np.pi / self.length) ** 2

    def eigenvalue(self, k):
        return (k * np.pi / self.length) ** 2

    def eigenfunctions(self, x, K):
        """Matrix ``Phi[i, j] = phi_j(x_i)`` for the first ``K`` modes."""
        x = np.asarray(x, dtype=float)
        return _basis(self.kind, self.wavenumbers(K), x, self.length)


def _basis(kind, ks, x, ell):
    arg = np.outer(x, ks * np.pi / ell)
    if kind == "sin":
        return math.sqrt(2.0 / ell) * np.sin(arg)
    out = math.sqrt(2.0 / ell) * np.cos(arg)
    out[:, ks == 0] = 1.0 / math.sqrt(ell)
    return out


def _basis_norms(kind, ks, ell):
    norms = np.full(len(ks), math.sqrt(2.0 / ell))
    if kind == "cos":
        norms[ks == 0] = 1.0 / math.sqrt(ell)
    return norms


# -- collocation transforms ---------------------------------------------------

def midpoint_grid(domain, n):
    """Collocation abscissae ``(j + 1/2) l / n``."""
    return (np.arange(n) + 0.5) * domain.length / n


def synthesize(kind, ks, coef, n, ell):
    """Evaluate ``sum_k coef[..., k] phi_k`` on the ``n``-point midpoint grid.

    ``coef`` may carry leading batch axes; the mode axis is last.
    """
    coef = np.asarray(coef, dtype=float)
    ks = np.asarray(ks)
    if ks.size and ks.max() >= n:
        raise InputError(f"grid of {n} nodes cannot resolve mode {ks.max()}")
    X = np.zeros(coef.shape[:-1] + (n,))
    norms = _basis_norms(kind, ks, ell)
    if kind == "cos":
        scale = np.where(ks == 0, norms, norms / 2.0)
        X[..., ks] = coef * scale
        return sfft.dct(X, type=3, axis=-1)
    keep = ks > 0
    X[..., ks[keep] - 1] = coef[..., keep] * (norms[keep] / 2.0)
    return sfft.dst(X, type=3, axis=-1)


def analyze(kind, ks, values, ell):
    """Project grid values onto the modes ``ks`` (midpoint-rule inner products)."""
    values = np.asarray(values, dtype=float)
    n = values.shape[-1]
    ks = np.asarray(ks)
    norms = _basis_norms(kind, ks, ell)
    h = ell / n
    if kind == "cos":
        Y = sfft.dct(values, type=2, axis=-1)
        return Y[..., ks] * (h * norms / 2.0)
    Y = sfft.dst(values, type=2, axis=-1)
    out = np.zeros(values.shape[:-1] + (len(ks),))
    keep = ks > 0
    out[..., keep] = Y[..., ks[keep] - 1] * (h * norms[keep] / 2.0)
    return out


def derivative_coefficients(kind, ks, coef, ell):
    """Coefficients of ``d/dx`` of a series; the result lives in the other family.

    ``d/dx cos -> -k pi/l sin`` and ``d/dx sin -> +k pi/l cos`` with the same
    normalisation constant, except that the constant cosine mode drops out.
    """
    ks = np.asarray(ks)
    factor = ks * np.pi / ell
    coef = np.asarray(coef, dtype=float)
    if kind == "cos":
        return "sin", coef * (-factor)
    out = coef * factor
    return "cos", out


def collocation_size(K, dealias, boundary=NEUMANN):
    """Grid size ``ceil(dealias * span)`` where ``span`` counts wavenumbers 0..k_max."""
    span = K + 1 if boundary == DIRICHLET else K
    n = int(math.ceil(dealias * span - 1e-12))
    return max(n, K + 1)


# -- fields ---------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralField:
    """A function on a :class:`Domain1D` given by ``K`` eigenbasis coefficients."""

    domain: Domain1D
    coefficients: np.ndarray

    def __post_init__(self):
        c = _frozen(self.coefficients)
        if c.ndim != 1 or c.size < 1:
            raise InputError("coefficients must be a nonempty 1-d sequence")
        if not np.all(np.isfinite(c)):
            raise InputError("coefficients must be finite")
        object.__setattr__(self, "coefficients", c)

    @property
    def K(self):
        return self.coefficients.size

    def __call__(self, x):
        return self.domain.eigenfunctions(np.atleast_1d(x), self.K) @ self.coefficients

    def __add__(self, other):
        return SpectralField(self.domain, self.coefficients + other.coefficients)

    def __sub__(self, other):
        return SpectralField(self.domain, self.coefficients - other.coefficients)

    def __mul__(self, a):
        return SpectralField(self.domain, a * self.coefficients)

    __rmul__ = __mul__


@dataclass(frozen=True)
class SystemField:
    """``m`` fields sharing one domain and truncation, stored as an ``(m, K)`` array."""

    domain: Domain1D
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=float)
        if c.ndim == 1:
            c = c[None, :]
        if c.ndim != 2 or c.shape[1] < 1:
            raise InputError("system coefficients must have shape (m, K)")
        if not np.all(np.isfinite(c)):
            raise InputError("coefficients must be finite")
        object.__setattr__(self, "coefficients", _frozen(c))

    @classmethod
    def from_components(cls, components: Sequence[SpectralField]):
        components = list(components)
        if not components:
            raise InputError("a system needs at least one component")
        dom, K = components[0].domain, components[0].K
        for comp in components[1:]:
            if comp.domain != dom or comp.K != K:
                raise InputError("all components must share domain and truncation")
        return cls(dom, np.stack([c.coefficients for c in components]))

    @classmethod
    def zeros(cls, domain, m, K):
        return cls(domain, np.zeros((m, K)))

    @classmethod
    def constant(cls, domain, values, K):
        """Spatially constant state (Neumann only: the constant is mode 0)."""
        if domain.boundary != NEUMANN:
            raise InputError("nonzero constants are only representable on the Neumann basis")
        c = np.zeros((len(values), K))
        c[:, 0] = np.asarray(values, dtype=float) * math.sqrt(domain.length)
        return cls(domain, c)

    @property
    def m(self):
        return self.coefficients.shape[0]

    @property
    def K(self):
        return self.coefficients.shape[1]

    @property
    def components(self):
        return tuple(SpectralField(self.domain, row) for row in self.coefficients)

    def component(self, i):
        return SpectralField(self.domain, self.coefficients[i])

    def flat(self):
        return self.coefficients.reshape(-1)

    def with_coefficients(self, c):
        return SystemField(self.domain, np.reshape(c, (self.m, self.K)))

    def __add__(self, other):
        return SystemField(self.domain, self.coefficients + other.coefficients)

    def __sub__(self, other):
        return SystemField(self.domain, self.coefficients - other.coefficients)

    def __mul__(self, a):
        return SystemField(self.domain, a * self.coefficients)

    __rmul__ = __mul__


def as_system(u):
    if isinstance(u, SystemField):
        return u
    if isinstance(u, SpectralField):
        return SystemField(u.domain, u.coefficients[None, :])
    raise InputError(f"expected a SpectralField or SystemField, got {type(u).__name__}")


@dataclass(frozen=True)
class Scale:
    """Index bookkeeping for a product scale ``E_theta``.

    Component ``i`` of ``E_theta`` is ``H^(2 theta + offsets[i])``.  The default
    (all offsets zero) is the plain scale generated by ``-Laplacian``.
    """

    offsets: tuple = (0.0,)

    def __post_init__(self):
        object.__setattr__(self, "offsets", tuple(float(o) for o in self.offsets))

    @classmethod
    def plain(cls, m=1):
        return cls((0.0,) * m)

    def sobolev_indices(self, theta):
        return tuple(2.0 * theta + o for o in self.offsets)

    def weights(self, lam, theta):
        """``(m, K)`` array of norm weights ``(1 + lambda_k)**(s_i / 2)``."""
        lam = np.asarray(lam, dtype=float)
        return np.stack([(1.0 + lam) ** (s / 2.0) for s in self.sobolev_indices(theta)])

    def norm(self, u, theta):
        u = as_system(u)
        if u.m != len(self.offsets):
            raise InputError(f"scale has {len(self.offsets)} components, field has {u.m}")
        w = self.weights(u.domain.eigenvalues(u.K), theta)
        return float(np.linalg.norm(w * u.coefficients))

    def norms(self, coefficients, domain, theta):
        """Vectorised norm over leading axes of ``coefficients[..., m, K]``."""
        c = np.asarray(coefficients, dtype=float)
        w = self.weights(domain.eigenvalues(c.shape[-1]), theta)
        return _scaled_norm(w * c, axis=(-2, -1))


def _scaled_norm(a, axis):
    # 2-norm that neither underflows nor overflows for extreme magnitudes
    big = np.max(np.abs(a), axis=axis, keepdims=True)
    safe = np.where(big > 0, big, 1.0)
    return np.squeeze(big, axis=axis) * np.sqrt(np.sum((a / safe) ** 2, axis=axis))


# -- operations -----------------------------------------------------------------

def _gauss_legendre_composite(ell, K, nodes_per_panel=16):
    panels = max(1, K)
    xg, wg = np.polynomial.legendre.leggauss(nodes_per_panel)
    edges = np.linspace(0.0, ell, panels + 1)
    half = np.diff(edges) / 2.0
    mid = (edges[:-1] + edges[1:]) / 2.0
    x = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    w = (half[:, None] * wg[None, :]).ravel()
    return x, w


def project_function(f: Callable, domain: Domain1D, K: int) -> SpectralField:
    """First ``K`` eigenbasis coefficients of ``f`` by composite Gauss-Legendre quadrature.

    ``K`` panels of 16 nodes each are used, which integrates products of
    retained modes to round-off.
    """
    if int(K) != K or K < 1:
        raise InputError("K must be a positive integer")
    K = int(K)
    x, w = _gauss_legendre_composite(domain.length, K)
    fx = np.asarray(f(x), dtype=float)
    if fx.shape == ():
        fx = np.full_like(x, float(fx))
    if not np.all(np.isfinite(fx)):
        bad = x[~np.isfinite(fx)][0]
        raise InputError(f"f is not finite at x={bad!r}")
    phi = domain.eigenfunctions(x, K)
    return SpectralField(domain, (w * fx) @ phi)


def sobolev_norm(u, s: float) -> float:
    """Spectral ``H^s`` norm ``(sum (1 + lambda_k)**s c_k**2)**(1/2)``.

    For a :class:`SystemField` the component norms are combined in ``l2``.
    """
    if not np.isfinite(s):
        raise InputError("Sobolev index must be finite")
    u = as_system(u)
    lam = u.domain.eigenvalues(u.K)
    return float(np.linalg.norm(((1.0 + lam) ** (s / 2.0)) * u.coefficients))


def pointwise_compose(u, g: Callable, dealias: float = DEFAULT_DEALIAS, out_domain=None) -> SystemField:
    """Apply a pointwise map by collocation and project back to ``K`` modes.

    ``g`` receives the stacked grid values with shape ``(m, n)`` and returns
    an array of shape ``(m', n)`` (or ``(n,)`` for a single output).  The
    result is projected onto the basis of ``out_domain`` (default: the input
    domain).  With ``dealias >= (d + 1)/2`` a polynomial ``g`` of degree ``d``
    is projected exactly whenever ``g(u)`` is a finite series in the output
    basis (always true for cosine series).
    """
    u = as_system(u)
    if dealias < 1:
        raise InputError("dealias must be >= 1")
    dom = u.domain
    out = dom if out_domain is None else out_domain
    if out.length != dom.length:
        raise InputError("output domain must have the same length")
    n = collocation_size(u.K, dealias, dom.boundary)
    vals = synthesize(dom.kind, dom.wavenumbers(u.K), u.coefficients, n, dom.length)
    res = np.asarray(g(vals), dtype=float)
    if res.ndim == 1:
        res = res[None, :]
    if res.shape[-1] != n:
        raise InputError("g must preserve the grid axis")
    finite = np.isfinite(res)
    if not finite.all():
        comp, j = np.argwhere(~finite)[0]
        x = midpoint_grid(dom, n)[j]
        raise NumericOverflowError(f"g produced a non-finite value at x={x:.6g}", node=float(x), component=int(comp))
    coef = analyze(out.kind, out.wavenumbers(u.K), res, dom.length)
    return SystemField(out, coef)


@dataclass(frozen=True)
class WeightedTrajectory:
    """Time-stamped states ``(n_t, m, K)`` with the time weight ``mu``."""

    domain: Domain1D
    times: np.ndarray
    states: np.ndarray
    mu: float = 0.0

    def __post_init__(self):
        t = _frozen(self.times)
        s = _frozen(self.states)
        if s.ndim == 2:
            s = _frozen(s[:, None, :])
        if t.ndim != 1 or t.size == 0 or s.shape[0] != t.size or s.ndim != 3:
            raise InputError("times and states must be nonempty and aligned")
        if np.any(np.diff(t) <= 0):
            raise InputError("times must be strictly increasing")
        if t[0] < 0:
            raise InputError("times must be nonnegative")
        if self.mu < 0:
            raise InputError("weight mu must be >= 0")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", s)

    def __len__(self):
        return self.times.size

    def state(self, i) -> SystemField:
        return SystemField(self.domain, self.states[i])

    @property
    def final(self):
        return self.state(-1)

    def component_norms(self, s, component=None):
        """``H^s`` norms at every sample, of one component or the whole system."""
        lam = self.domain.eigenvalues(self.states.shape[-1])
        w = (1.0 + lam) ** (s / 2.0)
        c = self.states if component is None else self.states[:, component:component + 1, :]
        return _scaled_norm(w * c, axis=(1, 2))


def weighted_sup_norm(traj: WeightedTrajectory, mu: float, s: float, component=0) -> float:
    """``max_t t**mu * ||u(t)||_{H^s}`` over the positive sample times."""
    if component is not None and not (0 <= component < traj.states.shape[1]):
        raise InputError(f"component {component} out of range")
    pos = traj.times > 0
    if not pos.any():
        raise InputError("trajectory has no positive sample times")
    norms = traj.component_norms(s, component)[pos]
    return float(np.max(traj.times[pos] ** mu * norms))
