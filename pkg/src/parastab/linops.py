"""Generators on the truncated spectral scale and the machinery built on them.

A *block generator* acts mode by mode: the coefficient vector ``c[:, k]`` of
an ``m``-component system is multiplied by an ``m x m`` block ``B_k``.  Beyond
the truncation the blocks follow an affine rule ``B(lambda) = B0 + lambda B1``
which is what makes the spectral bound a finite, checkable computation.

Generators that couple modes (quasilinear operators, numerical
linearizations) are held densely as :class:`DenseGenerator`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize_scalar

from .errors import DivergenceError, InputError, PreconditionError
from .records import write_csv
from .spaces import NEUMANN, Domain1D, Scale, SystemField, as_system

TAIL_CONSISTENCY_TOL = 1e-10


@dataclass(frozen=True)
class BlockGenerator:
    domain: Domain1D
    blocks: np.ndarray
    tail_B0: Optional[np.ndarray] = None
    tail_B1: Optional[np.ndarray] = None

    def __post_init__(self):
        b = np.array(self.blocks, dtype=float)
        if b.ndim == 1:
            b = b[:, None, None]
        if b.ndim != 3 or b.shape[1] != b.shape[2] or b.shape[0] < 1:
            raise InputError("blocks must have shape (K, m, m)")
        b.setflags(write=False)
        object.__setattr__(self, "blocks", b)
        if (self.tail_B0 is None) != (self.tail_B1 is None):
            raise InputError("tail rule needs both B0 and B1")
        if self.tail_B0 is not None:
            B0 = np.atleast_2d(np.array(self.tail_B0, dtype=float))
            B1 = np.atleast_2d(np.array(self.tail_B1, dtype=float))
            object.__setattr__(self, "tail_B0", B0)
            object.__setattr__(self, "tail_B1", B1)
            lam = self.eigenvalues[-1]
            dev = np.max(np.abs(B0 + lam * B1 - b[-1]))
            if dev > TAIL_CONSISTENCY_TOL * max(1.0, np.max(np.abs(b[-1]))):
                raise InputError(f"tail rule deviates from the last block by {dev:.3g}")

    @classmethod
    def from_affine(cls, domain, K, B0, B1):
        """Blocks ``B0 + lambda_k B1`` for the first ``K`` modes, with that tail rule."""
        B0 = np.atleast_2d(np.asarray(B0, dtype=float))
        B1 = np.atleast_2d(np.asarray(B1, dtype=float))
        lam = domain.eigenvalues(K)
        return cls(domain, B0[None] + lam[:, None, None] * B1[None], B0, B1)

    @property
    def K(self):
        return self.blocks.shape[0]

    @property
    def m(self):
        return self.blocks.shape[1]

    @property
    def eigenvalues(self):
        return self.domain.eigenvalues(self.K)

    @property
    def has_tail(self):
        return self.tail_B0 is not None

    def tail_blocks(self, lam):
        lam = np.asarray(lam, dtype=float)
        return self.tail_B0[None] + lam[:, None, None] * self.tail_B1[None]

    def apply(self, u):
        """``A u`` mode by mode."""
        u = as_system(u)
        c = np.einsum("kij,jk->ik", self.blocks, u.coefficients)
        return SystemField(u.domain, c)

    def to_dense(self):
        m, K = self.m, self.K
        M = np.zeros((m * K, m * K))
        idx = np.arange(K)
        for i in range(m):
            for j in range(m):
                M[i * K + idx, j * K + idx] = self.blocks[:, i, j]
        return DenseGenerator(self.domain, m, K, M)


@dataclass(frozen=True)
class DenseGenerator:
    """A generator acting on the flattened ``(m*K,)`` coefficient vector (component-major)."""

    domain: Domain1D
    m: int
    K: int
    matrix: np.ndarray

    def __post_init__(self):
        M = np.array(self.matrix, dtype=float)
        if M.shape != (self.m * self.K, self.m * self.K):
            raise InputError("dense generator has the wrong shape")
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)

    def apply(self, u):
        u = as_system(u)
        return u.with_coefficients(self.matrix @ u.flat())


# -- exponentials ---------------------------------------------------------------

def _sinhc_t(z2, t):
    """``sinh(sqrt(z2) t) / sqrt(z2)`` for small ``|z2| t**2`` by series."""
    w = z2 * t * t
    return t * (1 + w / 6 + w * w / 120 + w ** 3 / 5040)


def expm2(A, t=1.0):
    """Closed-form ``exp(t A)`` for a batch of real 2x2 matrices ``A[..., 2, 2]``."""
    A = np.asarray(A, dtype=float)
    t = np.asarray(t, dtype=float)
    a, b, c, d = A[..., 0, 0], A[..., 0, 1], A[..., 1, 0], A[..., 1, 1]
    h = (a + d) / 2
    disc = ((a - d) / 2) ** 2 + b * c
    ht = h * t
    small = np.abs(disc) * t * t < 1e-6
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        delta = np.sqrt(np.abs(disc))
        # real split: e^{(h +- delta) t}; complex split: e^{ht} cos/sin
        ep = np.exp((h + delta) * t)
        em = np.exp((h - delta) * t)
        c_real = 0.5 * (ep + em)
        s_real = (ep - em) / (2 * delta)
        eh = np.exp(ht)
        c_cplx = eh * np.cos(delta * t)
        s_cplx = eh * np.sin(delta * t) / delta
        z = disc * t * t
        c_small = eh * (1 + z / 2 + z * z / 24 + z ** 3 / 720)
        s_small = eh * _sinhc_t(disc, t)
    pos = disc >= 0
    c0 = np.where(small, c_small, np.where(pos, c_real, c_cplx))
    s = np.where(small, s_small, np.where(pos, s_real, s_cplx))
    out = np.empty(np.broadcast(a, t).shape + (2, 2))
    out[..., 0, 0] = c0 + s * (a - h)
    out[..., 1, 1] = c0 + s * (d - h)
    out[..., 0, 1] = s * b
    out[..., 1, 0] = s * c
    return out


def block_exponentials(blocks, t):
    """``exp(t B_k)`` for every block; closed form for ``m <= 2``, Pade otherwise."""
    blocks = np.asarray(blocks, dtype=float)
    m = blocks.shape[-1]
    if m == 1:
        return np.exp(t * blocks)
    if m == 2:
        return expm2(blocks, t)
    return sla.expm(t * blocks)


def apply_semigroup(gen, t, u):
    """``e^{t A} u``."""
    if not t >= 0:
        raise InputError(f"t must be >= 0, got {t!r}")
    u = as_system(u)
    if isinstance(gen, DenseGenerator):
        if (u.m, u.K) != (gen.m, gen.K):
            raise InputError("field shape does not match the generator")
        return u.with_coefficients(sla.expm(t * gen.matrix) @ u.flat())
    if (u.m, u.K) != (gen.m, gen.K):
        raise InputError("field shape does not match the generator")
    E = block_exponentials(gen.blocks, t)
    return SystemField(u.domain, np.einsum("kij,jk->ik", E, u.coefficients))


def evolution_operator(frozen: Sequence, t, s, u):
    """Propagate ``u`` from ``s`` to ``t`` through piecewise-frozen generators.

    ``frozen`` is a sequence of ``(t_j, gen_j)`` with increasing ``t_j``;
    ``gen_j`` is active on ``[t_j, t_{j+1})`` and the last one indefinitely.
    """
    if t < s:
        raise InputError(f"need s <= t, got s={s!r}, t={t!r}")
    frozen = list(frozen)
    if not frozen:
        raise InputError("empty freeze schedule")
    starts = [float(tj) for tj, _ in frozen]
    if any(b <= a for a, b in zip(starts, starts[1:])):
        raise InputError("freeze times must be strictly increasing")
    if s < starts[0]:
        raise InputError("s precedes the freeze schedule")
    ends = starts[1:] + [math.inf]
    v = as_system(u)
    for (t0, gen), t1 in zip(frozen, ends):
        lo, hi = max(t0, s), min(t1, t)
        if hi > lo:
            v = apply_semigroup(gen, hi - lo, v)
    return v


# -- spectra --------------------------------------------------------------------

def chemotaxis_linearization(chi, kappa, equilibrium, domain, K):
    """Mode blocks of the chemotaxis linearization at ``(1,1)`` ("one") or ``(0,0)`` ("zero")."""
    if not (chi > 0 and kappa > 0):
        raise InputError("chi and kappa must be positive")
    if domain.boundary != NEUMANN:
        raise InputError("the chemotaxis system carries Neumann boundary conditions")
    if equilibrium in ("one", 1, (1, 1)):
        B0 = [[-kappa, 0.0], [1.0, -1.0]]
        B1 = [[-1.0, chi], [0.0, -1.0]]
    elif equilibrium in ("zero", 0, (0, 0)):
        B0 = [[kappa, 0.0], [1.0, -1.0]]
        B1 = [[-1.0, 0.0], [0.0, -1.0]]
    else:
        raise InputError(f"equilibrium must be 'zero' or 'one', got {equilibrium!r}")
    return BlockGenerator.from_affine(domain, K, B0, B1)


@dataclass(frozen=True)
class LinearizationReport:
    spectral_bound: float
    leading_mode: int
    per_mode_eigs: np.ndarray
    tail_verified: bool
    status: str = "ok"


def _gershgorin_bound(blocks):
    """Upper bound on ``max Re eig`` per block via diagonally scaled Gershgorin discs."""
    blocks = np.asarray(blocks, dtype=float)
    m = blocks.shape[-1]
    diag = np.diagonal(blocks, axis1=-2, axis2=-1)
    if m == 1:
        return diag[..., 0]
    if m == 2:
        r = np.sqrt(np.abs(blocks[..., 0, 1] * blocks[..., 1, 0]))
        return diag.max(axis=-1) + r
    off = np.abs(blocks).copy()
    idx = np.arange(m)
    off[..., idx, idx] = 0.0
    rows = diag + off.sum(axis=-1)
    cols = diag + off.sum(axis=-2)
    return np.minimum(rows.max(axis=-1), cols.max(axis=-1))


def _tail_lambdas(domain, K, decades=6):
    k_dense = np.arange(K, 4 * K + 1)
    k_geo = np.unique(np.round(np.geomspace(4 * K, 4 * K * 10 ** decades, 200)).astype(np.int64))
    ks = np.unique(np.concatenate([k_dense, k_geo]))
    if domain.boundary == NEUMANN:
        pass
    else:
        ks = ks + 1  # Dirichlet index of the K-th retained mode is K, tail starts at K+1
    return domain.eigenvalue(ks.astype(float))


def verify_tail(gen, bound):
    """True when every tail mode's scaled-Gershgorin bound stays at or below ``bound``."""
    if not gen.has_tail:
        return False
    B1 = gen.tail_B1
    slope = float(_gershgorin_bound(B1[None])[0])
    if not slope < 0:
        return False
    lam = _tail_lambdas(gen.domain, gen.K)
    g = _gershgorin_bound(gen.tail_blocks(lam))
    if not np.all(g <= bound + 1e-12 * max(1.0, abs(bound))):
        return False
    tail_end = g[-5:]
    return bool(np.all(np.diff(tail_end) < 0))


def spectral_bound(gen) -> LinearizationReport:
    """Supremum of the real parts of the spectrum, with a certified tail for block generators."""
    if isinstance(gen, DenseGenerator):
        w, V = np.linalg.eig(gen.matrix)
        i = int(np.argmax(w.real))
        amp = np.abs(V[:, i]).reshape(gen.m, gen.K).sum(axis=0)
        return LinearizationReport(float(w[i].real), int(np.argmax(amp)), np.sort_complex(w)[::-1],
                                   False, "tail_unverified")
    eigs = np.linalg.eigvals(gen.blocks)
    order = np.argsort(-eigs.real, axis=1)
    eigs = np.take_along_axis(eigs, order, axis=1)
    re = eigs.real.max(axis=1)
    k = int(np.argmax(re))
    sb = float(re[k])
    ok = verify_tail(gen, sb)
    return LinearizationReport(sb, k, eigs, ok, "ok" if ok else "tail_unverified")


def dispersion_rows(gen):
    """Rows ``(mode, lambda, re_eig1, im_eig1, re_eig2, im_eig2, ...)`` ordered by real part."""
    rep = spectral_bound(gen)
    ks = gen.domain.wavenumbers(gen.K)
    lam = gen.eigenvalues
    rows = []
    for j in range(gen.K):
        row = [int(ks[j]), float(lam[j])]
        for e in rep.per_mode_eigs[j]:
            row += [float(e.real), float(e.imag)]
        rows.append(row)
    return rows


def write_dispersion_csv(gen, path):
    header = ["mode", "lambda"]
    for i in range(gen.m):
        header += [f"re_eig{i + 1}", f"im_eig{i + 1}"]
    return write_csv(path, header, dispersion_rows(gen))


# -- resolvent sampling -----------------------------------------------------------

@dataclass(frozen=True)
class GeneratorCertificate:
    kappa_cert: float
    omega_cert: float
    sample_count: int
    worst_ratio_low: float
    worst_ratio_high: float
    failures: tuple = ()

    @property
    def ok(self):
        return not self.failures


def resolvent_certificate(gen, omega, trials, seed=0, single_mode=False, real_mu=False):
    """Sample ``||(mu - A) z||_0 / (|mu| ||z||_0 + ||z||_1)`` over ``Re mu >= omega``.

    ``||.||_1`` is the ``H^2`` norm ``||(1 + lambda) c||``.  Points ``mu`` on the
    line ``Re mu = omega`` opposite an eigenvalue are probed first; a singular
    ``mu - A`` there is reported in ``failures`` as ``(mode, mu)``.
    """
    if trials < 1:
        raise InputError("trials must be >= 1")
    if isinstance(gen, DenseGenerator):
        blocks = None
        M = gen.matrix
    else:
        blocks = gen.blocks
    m, K = gen.m, gen.K
    lam = gen.domain.eigenvalues(K)
    w1 = np.tile(1.0 + lam, m)
    rng = np.random.default_rng(seed)

    failures = []
    if blocks is not None:
        eigs = np.linalg.eigvals(blocks)
        for k in range(K):
            scale = max(1.0, np.abs(blocks[k]).max())
            for e in eigs[k]:
                if e.real >= omega - 1e-12 * scale:
                    mu = complex(max(e.real, omega), e.imag)
                    smin = np.linalg.svd(mu * np.eye(m) - blocks[k], compute_uv=False)[-1]
                    if smin <= 1e-12 * scale:
                        failures.append((k, mu))
    else:
        eigs = np.linalg.eigvals(M)
        scale = max(1.0, np.abs(M).max())
        for e in eigs:
            if e.real >= omega - 1e-12 * scale:
                mu = complex(max(e.real, omega), e.imag)
                smin = np.linalg.svd(mu * np.eye(m * K) - M, compute_uv=False)[-1]
                if smin <= 1e-12 * scale:
                    failures.append((-1, mu))

    lo, hi = math.inf, 0.0
    count = 0
    for _ in range(trials):
        if real_mu:
            mu = omega + rng.exponential(1.0) * 10 ** rng.uniform(-1, 3)
        else:
            mu = complex(omega + rng.exponential(1.0) * 10 ** rng.uniform(-1, 3),
                         rng.normal() * 10 ** rng.uniform(-1, 3))
        z = np.zeros(m * K)
        if single_mode:
            z[rng.integers(m * K)] = 1.0
        else:
            nz = rng.integers(1, m * K + 1)
            pick = rng.choice(m * K, size=nz, replace=False)
            z[pick] = rng.normal(size=nz)
        if blocks is not None:
            zz = z.reshape(m, K)
            Az = np.einsum("kij,jk->ik", blocks, zz).reshape(-1)
        else:
            Az = M @ z
        num = np.linalg.norm(mu * z - Az)
        den = abs(mu) * np.linalg.norm(z) + np.linalg.norm(w1 * z)
        r = num / den
        lo, hi = min(lo, r), max(hi, r)
        count += 1
    kappa = max(hi, 1.0 / lo, 1.0)
    return GeneratorCertificate(float(kappa), float(omega), count, float(lo), float(hi), tuple(failures))


# -- energy identity ----------------------------------------------------------------

def energy_identity_residual(chi, kappa, lam, eigenpair):
    """Residual of the per-mode energy identity for the chemotaxis linearization at ``(1,1)``.

    For an eigenpair ``(mu, (u, v))`` of ``[[-lam-kappa, chi lam], [1, -lam-1]]``::

        Re mu (|u|^2 + |v|^2) = -[lam (|u|^2 + |v|^2) - chi lam Re(u conj v)
                                  + kappa |u|^2 - Re(u conj v) + |v|^2]

    The vector is normalised to unit length first.
    """
    mu, vec = eigenpair
    u, v = np.asarray(vec, dtype=complex)
    nrm = math.sqrt(abs(u) ** 2 + abs(v) ** 2)
    if nrm == 0:
        raise InputError("eigenvector must be nonzero")
    u, v = u / nrm, v / nrm
    uu, vv, uv = abs(u) ** 2, abs(v) ** 2, (u * np.conj(v)).real
    lhs = complex(mu).real * (uu + vv)
    rhs = -(lam * (uu + vv) - chi * lam * uv + kappa * uu - uv + vv)
    return float(abs(lhs - rhs))


# -- semigroup norm constants ----------------------------------------------------------

def _spectral_norm2(A):
    """Largest singular value of a batch of 2x2 matrices."""
    fro2 = np.sum(A * A, axis=(-2, -1))
    det = A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]
    root = np.sqrt(np.maximum(fro2 * fro2 - 4 * det * det, 0.0))
    return np.sqrt((fro2 + root) / 2)


def _weighted_norms(blocks, lam, t, scale, theta_from, theta_to):
    """``||D_to e^{tB} D_from^{-1}||_2`` per block."""
    m = blocks.shape[-1]
    E = block_exponentials(blocks, t)
    wt = scale.weights(lam, theta_to).T      # (n, m)
    wf = scale.weights(lam, theta_from).T
    W = E * (wt[:, :, None] / wf[:, None, :])
    if m == 1:
        return np.abs(W[:, 0, 0])
    if m == 2:
        return _spectral_norm2(W)
    return np.linalg.norm(W, ord=2, axis=(-2, -1))


def semigroup_norm_constants(gen, theta_from, theta_to, omega_bar, scale=None):
    """``M = sup_{t>0} t^{theta_to - theta_from} e^{omega_bar t} ||e^{tA}||_{E_from -> E_to}``.

    Mode-diagonal scalar generators use the closed form ``sup_t t^a e^{-b t} =
    (a/b)^a e^{-a}``; general blocks are maximised over a logarithmic time grid
    and refined by a bounded scalar search.  Tail modes (from the affine rule)
    are sampled up to ``lambda ~ 1e12``.
    """
    if theta_to < theta_from:
        raise InputError("need theta_to >= theta_from")
    a = theta_to - theta_from
    sb = spectral_bound(gen).spectral_bound
    if not omega_bar < -sb:
        raise DivergenceError(f"omega_bar={omega_bar!r} must be below -s(A)={-sb!r}")
    if isinstance(gen, DenseGenerator):
        return _semigroup_norm_dense(gen, a, theta_from, theta_to, omega_bar, scale, sb)
    scale = scale or Scale.plain(gen.m)
    blocks = gen.blocks
    lam = gen.eigenvalues
    if gen.has_tail:
        lt = _tail_lambdas(gen.domain, gen.K)
        blocks = np.concatenate([blocks, gen.tail_blocks(lt)])
        lam = np.concatenate([lam, lt])
    if gen.m == 1:
        b = -(omega_bar + blocks[:, 0, 0])
        if a == 0:
            return 1.0
        vals = (1 + lam) ** a * (a / b) ** a * math.exp(-a)
        return float(vals.max())

    gap = -(omega_bar + sb)
    tmax = 80.0 / gap
    ts = np.geomspace(1e-12, tmax, 500)

    shifted = blocks + omega_bar * np.eye(gen.m)

    def value(t, sel=slice(None)):
        # e^{omega_bar t} folded into the exponent to avoid overflow on long horizons
        return t ** a * _weighted_norms(shifted[sel], lam[sel], t, scale, theta_from, theta_to)

    grid = np.array([value(t) for t in ts])        # (nt, modes)
    best = float(grid.max())
    if a == 0:
        best = max(best, 1.0)
    # refine the strongest few modes around their grid maximum
    flat = np.argsort(grid.max(axis=0))[::-1][:8]
    for j in flat:
        i = int(np.argmax(grid[:, j]))
        lo, hi = ts[max(i - 1, 0)], ts[min(i + 1, len(ts) - 1)]
        if hi > lo:
            res = minimize_scalar(lambda t: -value(t, slice(j, j + 1))[0], bounds=(lo, hi),
                                  method="bounded", options={"xatol": 1e-12 * hi})
            best = max(best, -float(res.fun))
    return best


def _semigroup_norm_dense(gen, a, theta_from, theta_to, omega_bar, scale, sb):
    scale = scale or Scale.plain(gen.m)
    lam = gen.domain.eigenvalues(gen.K)
    wt = scale.weights(lam, theta_to).reshape(-1)
    wf = scale.weights(lam, theta_from).reshape(-1)
    gap = -(omega_bar + sb)
    ts = np.geomspace(1e-8, 80.0 / gap, 160)

    shifted = gen.matrix + omega_bar * np.eye(gen.matrix.shape[0])

    def value(t):
        E = sla.expm(t * shifted)
        W = (wt[:, None] * E) / wf[None, :]
        return t ** a * np.linalg.norm(W, 2)

    vals = np.array([value(t) for t in ts])
    i = int(np.argmax(vals))
    best = float(vals[i])
    lo, hi = ts[max(i - 1, 0)], ts[min(i + 1, len(ts) - 1)]
    res = minimize_scalar(lambda t: -value(t), bounds=(lo, hi), method="bounded")
    best = max(best, -float(res.fun))
    if a == 0:
        best = max(best, 1.0)
    return best


# -- numerical linearization ----------------------------------------------------------

EQUILIBRIUM_TOL = 1e-8


def numeric_linearization(problem, v_star, h=None):
    """Dense Jacobian of ``v -> A(v) v + f(v)`` at ``v_star``.

    Central differences in every coefficient direction with step
    ``h = eps**(1/3) * max(1, max|v_star|)``, combined with the half-step
    quotient by one Richardson step (error ``O(h^4)``).
    """
    v = as_system(v_star)
    c = v.coefficients
    if (v.m, v.K) != (problem.m, problem.K):
        raise InputError("state shape does not match the problem")
    res = float(np.linalg.norm(problem.rhs(c)))
    if not res <= EQUILIBRIUM_TOL:
        raise PreconditionError(f"v_star is not an equilibrium: residual {res:.3g} > {EQUILIBRIUM_TOL}")
    if h is None:
        h = np.finfo(float).eps ** (1 / 3) * max(1.0, float(np.max(np.abs(c))))
    if not h > 0:
        raise InputError("h must be positive")
    n = v.m * v.K
    E = np.eye(n).reshape(n, v.m, v.K)

    def quotient(step):
        fp = problem.rhs(c[None] + step * E)
        fm = problem.rhs(c[None] - step * E)
        return ((fp - fm) / (2 * step)).reshape(n, n)

    J = (4 * quotient(h / 2) - quotient(h)) / 3
    return DenseGenerator(v.domain, v.m, v.K, J.T)
