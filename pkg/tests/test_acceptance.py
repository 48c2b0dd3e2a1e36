"""The ten acceptance criteria, each at its stated tolerance and runtime budget.

Every test prints one ``ACCEPTANCE <n> PASS|FAIL`` line (visible without ``-s``).
"""

import io
import math
import time
from fractions import Fraction

import numpy as np
import pytest
from scipy.integrate import quad

from parastab.cli import run as cli_run
from parastab.exponents import (alpha_crit, chemotaxis_profile, critical_sobolev_index, gradient_profile,
                                scaling_defect)
from parastab.integrate import (SolveConfig, TimeMesh, oracle_integrate, singular_bound_check,
                                solve_quasilinear, solve_semilinear)
from parastab.linops import (BlockGenerator, apply_semigroup, chemotaxis_linearization,
                             energy_identity_residual, spectral_bound)
from parastab.problems import make_chemotaxis, make_gradient_quasilinear, make_quadratic
from parastab.spaces import DIRICHLET, NEUMANN, Domain1D, SpectralField, SystemField, WeightedTrajectory, sobolev_norm
from parastab.stability import (basin_certificate, basin_length, c0_constant, certificate_M, choose_gamma0,
                                estimate_remainder_constants, fit_decay, instability_probe,
                                verify_exponential_estimate, weighted_vanishing)

NEU = Domain1D(1.0, NEUMANN)
DIR = Domain1D(1.0, DIRICHLET)


@pytest.fixture
def report(capsys):
    def emit(n, ok, elapsed, budget, detail):
        ok_all = bool(ok) and elapsed <= budget
        line = (f"ACCEPTANCE {n} {'PASS' if ok_all else 'FAIL'}: {detail} "
                f"[{elapsed:.2f}s, budget {budget:g}s]")
        with capsys.disabled():
            print("\n" + line)
        return ok_all
    return emit


def test_acceptance_01_exponent_formulas(report):
    t0 = time.perf_counter()
    a = alpha_crit(2, 0.1, 0.65)
    g = gradient_profile(1, 2.5, 4, 0.275)
    ident = g.profile.xi - g.profile.alpha - g.mu
    ok = (a == 0.2 and abs(g.s_c - 16 / 15) <= 1e-15 and abs(g.s - 1.3) <= 1e-15
          and abs(g.mu - 7 / 60) <= 1e-15 and abs(ident) <= 1e-14)
    assert report(1, ok, time.perf_counter() - t0, 1,
                  f"alpha_crit={a!r}, s_c={g.s_c!r}, s={g.s!r}, mu={g.mu!r}, xi-alpha-mu={ident:.1e}")


def test_acceptance_02_chemotaxis_threshold(report):
    t0 = time.perf_counter()
    chis = [0.25 * i for i in range(1, 9)]
    kappas = [0.3, 0.5, 1.0, 2.0, 4.0]
    worst = -math.inf
    verified = True
    for chi in chis:
        for kappa in kappas:
            rep = spectral_bound(chemotaxis_linearization(chi, kappa, "one", NEU, 64))
            worst = max(worst, rep.spectral_bound)
            verified &= rep.tail_verified
    spot = spectral_bound(chemotaxis_linearization(2.0, 0.5, "one", NEU, 64)).spectral_bound
    ok = worst < 0 and verified and abs(spot + 0.5) <= 1e-10
    assert report(2, ok, time.perf_counter() - t0, 5,
                  f"max bound over 40 cells {worst:.4g}, all tails verified={verified}, spot={spot!r}")


def test_acceptance_03_instability(report):
    t0 = time.perf_counter()
    ok, parts = True, []
    for kappa in (0.3, 0.7, 1.5):
        prob = make_chemotaxis(2.0, kappa, K=16)
        sb = spectral_bound(prob.linearization(prob.equilibria[0])).spectral_bound
        c = np.zeros((2, 16))
        c[:, 0] = [1.0, 1.0 / (kappa + 1.0)]
        v = instability_probe(prob, prob.equilibria[0], SystemField(NEU, c), [1e-2, 1e-3, 1e-4],
                              T_max=60 / kappa, N=1200)
        esc = all(math.isfinite(e) for e in v.evidence["escape_times"])
        rates = v.evidence["growth_rates"]
        rel = max(abs(r / kappa - 1) for r in rates)
        ok &= abs(sb - kappa) <= 1e-12 and esc and rel <= 0.05 and v.verdict == "unstable"
        parts.append(f"kappa={kappa}: bound={sb!r}, escaped={esc}, growth err={rel:.2%}")
    assert report(3, ok, time.perf_counter() - t0, 60, "; ".join(parts))


def test_acceptance_04_nonlinear_decay(report):
    t0 = time.perf_counter()
    prob = make_chemotaxis(2.0, 0.5, K=64)
    vs = prob.equilibria[1]
    pr = prob.profile
    rng = np.random.default_rng(0)
    k = np.arange(64)
    d = SystemField(NEU, rng.normal(size=(2, 64)) * (1.0 + k) ** -2.0)
    d = d * (1e-3 / prob.scale.norm(d, pr.alpha))
    mesh = TimeMesh.graded(20.0, 400, pr.xi - pr.alpha, pr.q)
    sol = solve_semilinear(prob.generator, prob.f, vs + d, SolveConfig(64, mesh, mu=pr.xi - pr.alpha))
    fit = fit_decay(sol.trajectory, vs, window=(6.0, 18.0))

    gen = prob.linearization(vs)
    rem = estimate_remainder_constants(prob, vs, [0.1, 0.03, 0.01, 0.003], pr.gamma)
    mu = pr.xi - pr.alpha
    omega, omega_bar = 0.4, 0.45
    g0 = choose_gamma0(pr.gamma, pr.gamma, pr.alpha, mu, rem.q_star)
    c0 = c0_constant(mu, rem.q_star, g0, pr.alpha, omega_bar - omega)
    M = certificate_M(gen, pr.alpha, pr.xi, pr.gamma, omega_bar, c0, prob.scale)
    cert = basin_certificate(rem.c_star, rem.q_star, 1.0, pr.gamma, M, omega, omega_bar,
                             -spectral_bound(gen).spectral_bound, pr.alpha, pr.xi, pr.gamma)
    margin = verify_exponential_estimate(sol.trajectory, vs, pr.alpha, pr.xi, cert.omega, cert.M, prob.scale)
    ok = sol.completed and abs(fit.omega_hat / 0.5 - 1) <= 0.10 and margin >= 0
    assert report(4, ok, time.perf_counter() - t0, 60,
                  f"omega_hat={fit.omega_hat:.5f}, certificate (omega, M)=({cert.omega}, {cert.M:.4g}), "
                  f"eps0={cert.epsilon0:.3g}, estimate margin={margin:.3g}")


def test_acceptance_05_solver_oracle(report):
    t0 = time.perf_counter()
    prob = make_quadratic(domain=NEU, K=1, mass=1.0)
    sol = solve_semilinear(prob.generator, prob.f, SystemField(NEU, [[0.1]]),
                           SolveConfig(1, TimeMesh(1.0, 2048, 2.0)))
    exact = 0.1 / (0.1 + 0.9 * math.e)
    e1 = abs(sol.trajectory.states[-1, 0, 0] / exact - 1)

    gp = make_gradient_quasilinear(K=64)
    c = np.zeros((1, 64))
    c[0, 0], c[0, 2] = 0.02 / math.sqrt(2), 0.01 / math.sqrt(2)     # 0.02 (sin pi x + 0.5 sin 3 pi x)
    u0 = SystemField(DIR, c)
    q = solve_quasilinear(gp, u0, SolveConfig(64, TimeMesh(0.5, 64, 2.0), fixed_point_tol=1e-12))
    ref = oracle_integrate(gp.rhs_flat, u0, 0.5, tol=1e-12, times=[0.0, 0.5])
    uq, ur = q.trajectory.states[-1], ref.trajectory.states[-1]
    e2 = float(np.linalg.norm(uq - ur) / np.linalg.norm(ur))
    ok = sol.completed and q.completed and ref.completed and e1 <= 1e-8 and e2 <= 1e-6
    assert report(5, ok, time.perf_counter() - t0, 60,
                  f"Bernoulli rel err={e1:.2e}; quasilinear vs oracle rel err={e2:.2e} "
                  f"({len(q.iterations)} Picard iterations)")


def _rough_heat(levels, K):
    g = gradient_profile(1, 2.5, 4, 0.275)
    mu = g.profile.xi - g.profile.alpha
    lam = DIR.eigenvalues(K)
    k = DIR.wavenumbers(K).astype(float)
    c = (1 + lam) ** (-g.s_c / 2) * (k + 1) ** -0.51
    gen = BlockGenerator.from_affine(DIR, K, [[0.0]], [[-1.0]])
    u0 = SystemField(DIR, c[None])
    ts = [2.0 ** -j for j in sorted(levels, reverse=True)]
    states = np.array([apply_semigroup(gen, t, u0).coefficients for t in ts])
    tr = WeightedTrajectory(DIR, np.array(ts), states)
    return weighted_vanishing(tr, mu, g.s, levels=list(levels))


def test_acceptance_06_time_weight(report):
    # Data and indices as prescribed: Dirichlet heat flow from c_k = (1+lam_k)^(-s_c/2) (k+1)^(-0.51),
    # weight t^(xi-alpha), norm H^s with (s_c, s, xi-alpha) from the gradient profile (1, 2.5, 4, 0.275).
    t0 = time.perf_counter()
    rep = _rough_heat(range(4, 15), 2 ** 14)
    tail = rep.values[4:]                       # j = 8..14
    ok = bool(np.all(np.diff(tail) < 0))
    vals = ", ".join(f"{v:.4f}" for v in rep.values)
    assert report(6, ok, time.perf_counter() - t0, 10,
                  f"t^(xi-alpha)||u||_Hs at j=4..14: [{vals}]; decreasing for j>=8: {ok}")


def test_acceptance_07_certificate_constants(report):
    t0 = time.perf_counter()
    mu, q = 0.25, 2.0
    c0 = c0_constant(mu, q, 0.3, 0.3, 1.0)
    # independent route: Beta integrals and the supremum by direct quadrature / dense search
    b1 = quad(lambda s: s ** (mu * q - 1) * (1 - s) ** (-mu * q), 0, 1, limit=200)[0]
    b2 = quad(lambda s: s ** (mu * (q - 1) - 1) * (1 - s) ** (-mu * q), 0, 1, limit=200)[0]
    r = np.geomspace(1e-8, 1e3, 400001)
    sup = float(np.max(r ** (1 - mu * q) * np.exp(-r)))
    direct = 1 + (b1 + b2) * sup
    L = basin_length(2, 4, 2, 1)
    ok = abs(c0 - 4.5966) <= 1e-3 and abs(c0 - direct) <= 1e-3 and L == 0.125 and L / 4 == 1 / 32
    assert report(7, ok, time.perf_counter() - t0, 1,
                  f"c0={c0:.6f}, quadrature c0={direct:.6f}, L={L!r}, eps0={L / 4!r}")


def test_acceptance_08_integral_inequality(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = math.inf
    for _ in range(1000):
        b = rng.uniform(-1.0, 0.95)
        c = rng.uniform(-1.0, 0.95)
        a = rng.uniform(0.0, 0.999) * (1 - b)
        eta = 10 ** rng.uniform(-2, 1)
        t = 10 ** rng.uniform(-3, 3)
        worst = min(worst, singular_bound_check(a, b, c, eta, [t]))
    assert report(8, worst >= 0, time.perf_counter() - t0, 30, f"worst margin over 1000 samples={worst:.3g}")


def test_acceptance_09_scaling_criticality(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    worst = 0.0
    vs_exact = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 6))
        kappa = float(rng.uniform(3.01, 12))
        p = float(rng.uniform(2 * n, (kappa - 1) * n))
        sc = critical_sobolev_index(n, p, kappa)
        worst = max(worst, abs(scaling_defect(sc, n, p, kappa)))
        # rational evaluation of n/p + (kappa-2)/(kappa-1) for the same binary inputs
        fp, fk = Fraction(p), Fraction(kappa)
        vs_exact = max(vs_exact, abs(float(Fraction(sc) - Fraction(n) / fp - (fk - 2) / (fk - 1))))
    ok = worst <= 1e-14 and vs_exact <= 1e-14
    assert report(9, ok, time.perf_counter() - t0, 1,
                  f"max |defect| over 100 triples={worst:.1e}, max deviation from rational value={vs_exact:.1e}")


def test_acceptance_10_structural_suites(report, tmp_path):
    t0 = time.perf_counter()
    rng = np.random.default_rng(10)
    gen = chemotaxis_linearization(2.0, 0.5, "one", NEU, 32)
    comp = 0.0
    for _ in range(100):
        s, t = rng.uniform(0, 2, size=2)
        u = SystemField(NEU, rng.normal(size=(2, 32)))
        a = apply_semigroup(gen, s + t, u).coefficients
        b = apply_semigroup(gen, s, apply_semigroup(gen, t, u)).coefficients
        comp = max(comp, float(np.max(np.abs(a - b)) / np.max(np.abs(u.coefficients))))

    logc = -math.inf
    for _ in range(1000):
        dom = NEU if rng.random() < 0.5 else DIR
        K = int(rng.integers(1, 40))
        f = SpectralField(dom, rng.normal(size=K) * (1.0 + np.arange(K)) ** rng.uniform(-3, 1))
        s0, s1 = rng.uniform(-2, 3, size=2)
        th = rng.uniform(0, 1)
        lhs = sobolev_norm(f, (1 - th) * s0 + th * s1)
        rhs = sobolev_norm(f, s0) ** (1 - th) * sobolev_norm(f, s1) ** th
        logc = max(logc, lhs / rhs - 1)

    energy = 0.0
    for lam in NEU.eigenvalues(33):
        B = gen.tail_blocks([lam])[0]
        w, V = np.linalg.eig(B)
        for mu, vec in zip(w, V.T):
            energy = max(energy, energy_identity_residual(2.0, 0.5, lam, (mu, vec)))

    outs = []
    for i in range(2):
        path = tmp_path / f"replay{i}.csv"
        code = cli_run(["simulate", "--K", "16", "--T", "2", "--N", "50", "--seed", "11", "--out", str(path)],
                       io.StringIO(), io.StringIO())
        outs.append((code, path.read_bytes()))
    replay = outs[0] == outs[1] and outs[0][0] == 0

    ok = comp <= 1e-12 and logc <= 1e-10 and energy <= 1e-10 and replay
    assert report(10, ok, time.perf_counter() - t0, 30,
                  f"composition err={comp:.1e}, log-convexity excess={logc:.1e}, "
                  f"energy residual={energy:.1e}, byte-identical replay={replay}")
