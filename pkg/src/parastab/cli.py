"""Command-line driver: ``parastab <subcommand> [--key value ...] [--config file] [--dry-run]``.

Every subcommand accepts a flat ``key = value`` config file; flags override
file values.  Exit status is 0 on success, 1 on a numeric failure and 2 on a
configuration error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import exponents as ex
from .errors import InputError, NumericError, ParastabError, PreconditionError
from .integrate import (SolveConfig, TimeMesh, read_states_binary, solve_quasilinear, solve_semilinear,
                        write_trajectory)
from .linops import (chemotaxis_linearization, numeric_linearization, spectral_bound, write_dispersion_csv)
from .problems import make_problem
from .records import dump_kv, format_value, parse_kv, write_csv
from .spaces import Domain1D, SystemField
from .stability import (basin_certificate, c0_constant, choose_gamma0, certificate_M, estimate_remainder_constants,
                        fit_decay, instability_probe, special_beta, verify_exponential_estimate)

EXIT_OK, EXIT_NUMERIC, EXIT_CONFIG = 0, 1, 2


class ConfigError(Exception):
    pass


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    if isinstance(text, (int, float)):
        return [float(text)]
    return [float(x) for x in str(text).replace(";", ",").split(",") if x.strip()]


def _bool(v):
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _seed(v):
    s = int(v)
    if not 0 <= s < 2 ** 64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    return s


PROBLEM_KEYS = {
    "problem": (str, "chemotaxis"), "chi": (float, 2.0), "kappa": (float, None), "m": (float, 1.0),
    "epsilon": (float, 0.2), "n": (int, 1), "p": (float, 4.0), "tau": (float, None), "K": (int, 64),
    "boundary": (str, None), "length": (float, 1.0),
}

SUBCOMMANDS = {
    "critical": {"q": (float, None), "gamma": (float, None), "xi": (float, None), "alpha": (float, None)},
    "profile": {"kind": (str, "chemotaxis"), "epsilon": (float, 0.2), "p": (float, None), "n": (int, 1),
                "kappa": (float, 4.0), "tau": (float, 0.275)},
    "dispersion": {"chi": (float, 2.0), "kappa": (float, 0.5), "modes": (int, 64), "equilibrium": (str, "one"),
                   "length": (float, 1.0), "out": (str, None)},
    "spectrum": dict(PROBLEM_KEYS, equilibrium=(int, -1), numeric=(_bool, False)),
    "simulate": dict(PROBLEM_KEYS, equilibrium=(int, -1), amplitude=(float, 1e-3), T=(float, 20.0),
                     N=(int, 400), r=(float, None), seed=(_seed, 0), out=(str, None), plot=(str, None)),
    "fit": dict(PROBLEM_KEYS, traj=(str, None), equilibrium=(int, -1), s=(float, 0.0),
                t_min=(float, None), t_max=(float, None)),
    "verify-estimate": dict(PROBLEM_KEYS, traj=(str, None), equilibrium=(int, -1), alpha=(float, None),
                            xi=(float, None), omega=(float, None), M=(float, None)),
    "basin": dict(PROBLEM_KEYS, equilibrium=(int, -1), omega=(float, 0.4), omega_bar=(float, 0.45),
                  r_star=(float, 1.0), q_star=(float, None), gamma_star=(float, None),
                  radii=(_floats, [0.1, 0.03, 0.01, 0.003]), seed=(_seed, 0)),
    "instability": dict(PROBLEM_KEYS, equilibrium=(int, 0), deltas=(_floats, [1e-2, 1e-3, 1e-4]),
                        escape_radius=(float, None), T_max=(float, 40.0), N=(int, 800)),
    "scan": {"chi": (_floats, [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0]),
             "kappa": (_floats, [0.3, 0.5, 1.0, 2.0, 4.0]), "modes": (int, 64), "equilibrium": (str, "one"),
             "out": (str, None)},
    "scaling": {"n": (int, 1), "p": (float, 2.5), "kappa": (float, 4.0), "s": (float, None)},
    "selftest": {},
}

def _flag(key):
    return "--" + key.replace("_", "-")


def build_parser():
    parser = argparse.ArgumentParser(prog="parastab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, keys in SUBCOMMANDS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None, help="flat key = value file")
        sp.add_argument("--dry-run", action="store_true", help="print the resolved configuration and exit")
        for key in keys:
            sp.add_argument(_flag(key), dest=key, default=None)
    return parser


def resolve(subcommand, flags: dict, config_text=None) -> dict:
    """Merge defaults, file values and flags, with typed parsing; unknown file keys are errors."""
    keys = SUBCOMMANDS[subcommand]
    values = {k: d for k, (_, d) in keys.items()}
    if config_text is not None:
        try:
            file_vals = parse_kv(config_text)
        except ValueError as e:
            raise ConfigError(str(e))
        for k, v in file_vals.items():
            kk = k.replace("-", "_")
            if kk not in keys:
                raise ConfigError(f"unknown key {k!r}")
            values[kk] = v
    for k, v in flags.items():
        if v is not None:
            values[k] = v
    out = {}
    for k, (typ, _) in keys.items():
        v = values[k]
        if v is None:
            out[k] = None
            continue
        try:
            out[k] = typ(v)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad value for {k}: {v!r} ({e})")
    return out


# -- helpers --------------------------------------------------------------------------------

def _problem(cfg):
    name = cfg["problem"]
    K = cfg["K"]
    if name == "chemotaxis":
        dom = Domain1D(cfg["length"], cfg["boundary"] or "neumann")
        kappa = cfg["kappa"] if cfg["kappa"] is not None else 0.5
        return make_problem(name, chi=cfg["chi"], kappa=kappa, domain=dom, K=K, epsilon=cfg["epsilon"],
                            p=cfg["p"], n=cfg["n"])
    if name == "gradient":
        dom = Domain1D(cfg["length"], cfg["boundary"] or "dirichlet")
        kw = {} if cfg["tau"] is None else {"tau": cfg["tau"]}
        kappa = cfg["kappa"] if cfg["kappa"] is not None else 4.0
        return make_problem(name, kappa=kappa, domain=dom, K=K, **kw)
    if name == "quadratic":
        dom = Domain1D(cfg["length"], cfg["boundary"] or "neumann")
        return make_problem(name, domain=dom, K=K, mass=cfg["m"])
    raise InputError(f"unknown problem {name!r}")


def _equilibrium(problem, idx):
    try:
        return problem.equilibria[idx]
    except IndexError:
        raise InputError(f"problem has {len(problem.equilibria)} equilibria, index {idx} out of range")


def _initial(problem, v_star, amplitude, seed):
    rng = np.random.default_rng(seed)
    k = np.arange(problem.K)
    d = SystemField(problem.domain, rng.normal(size=(problem.m, problem.K)) * (1.0 + k) ** -2.0)
    d = d * (amplitude / problem.scale.norm(d, problem.profile.alpha))
    return v_star + d


def write_svg(path, t, series: dict, log_y=True, width=640, height=400):
    """Minimal standalone SVG line chart."""
    pad = 50
    t = np.asarray(t, dtype=float)
    ys = {k: np.asarray(v, dtype=float) for k, v in series.items()}
    allv = np.concatenate([v[np.isfinite(v) & ((v > 0) if log_y else True)] for v in ys.values()])
    tf = lambda v: np.log10(v) if log_y else v
    lo, hi = (tf(allv.min()), tf(allv.max())) if allv.size else (0.0, 1.0)
    if hi <= lo:
        hi = lo + 1.0
    t0, t1 = float(t.min()), float(t.max()) if t.max() > t.min() else float(t.min()) + 1.0
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<rect x="{pad}" y="{pad // 2}" width="{width - 1.5 * pad}" height="{height - 1.5 * pad}" '
             'fill="none" stroke="black"/>']
    for i, (name, v) in enumerate(ys.items()):
        ok = np.isfinite(v) & ((v > 0) if log_y else True)
        xs = pad + (t[ok] - t0) / (t1 - t0) * (width - 1.5 * pad)
        yv = height - pad - (tf(v[ok]) - lo) / (hi - lo) * (height - 1.5 * pad)
        pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, yv))
        c = colors[i % len(colors)]
        parts.append(f'<polyline fill="none" stroke="{c}" points="{pts}"/>')
        parts.append(f'<text x="{width - pad * 3}" y="{pad + 15 * i}" fill="{c}" font-size="12">{name}</text>')
    parts.append(f'<text x="{pad}" y="{height - 10}" font-size="12">t in [{t0:.3g}, {t1:.3g}]'
                 f'{" (log10 y)" if log_y else ""} y in [{lo:.3g}, {hi:.3g}]</text>')
    parts.append("</svg>\n")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))


def _threads():
    v = os.environ.get("PARASTAB_THREADS")
    if v is None:
        return None
    try:
        n = int(v)
    except ValueError:
        raise ConfigError(f"PARASTAB_THREADS must be a positive integer, got {v!r}")
    if n < 1:
        raise ConfigError(f"PARASTAB_THREADS must be a positive integer, got {v!r}")
    return n


def _need(cfg, *keys):
    for k in keys:
        if cfg[k] is None:
            raise ConfigError(f"missing required key {k!r}")


# -- subcommands ------------------------------------------------------------------------------

def cmd_critical(cfg, out):
    _need(cfg, "q", "gamma", "xi")
    ac = ex.alpha_crit(cfg["q"], cfg["gamma"], cfg["xi"])
    out.write(f"alpha_crit={format_value(ac)}\n")
    if cfg["alpha"] is not None:
        rep = ex.validate_profile(ex.ExponentProfile(cfg["gamma"], None, cfg["alpha"], cfg["xi"], cfg["q"]))
        out.write(f"classification={rep.classification}\n")
    return EXIT_OK


def cmd_profile(cfg, out):
    if cfg["kind"] == "chemotaxis":
        p = 4.0 if cfg["p"] is None else cfg["p"]
        prof = ex.chemotaxis_profile(cfg["epsilon"], p, cfg["n"])
        out.write(prof.dumps())
    elif cfg["kind"] == "gradient":
        # default p sits mid-way in the admissible interval (2n, (kappa-1)n)
        p = (cfg["kappa"] + 1) * cfg["n"] / 2 if cfg["p"] is None else cfg["p"]
        g = ex.gradient_profile(cfg["n"], p, cfg["kappa"], cfg["tau"])
        out.write(g.profile.dumps())
        out.write(dump_kv({"s_bar": g.s_bar, "s": g.s, "s_c": g.s_c, "mu_weight": g.mu}))
        prof = g.profile
    else:
        raise ConfigError(f"kind must be chemotaxis or gradient, got {cfg['kind']!r}")
    out.write(f"classification={ex.validate_profile(prof).classification}\n")
    return EXIT_OK


def cmd_dispersion(cfg, out):
    dom = Domain1D(cfg["length"], "neumann")
    gen = chemotaxis_linearization(cfg["chi"], cfg["kappa"], cfg["equilibrium"], dom, cfg["modes"])
    rep = spectral_bound(gen)
    if cfg["out"]:
        write_dispersion_csv(gen, cfg["out"])
    else:
        write_dispersion_csv(gen, out)
    out.write(dump_kv({"spectral_bound": rep.spectral_bound, "leading_mode": rep.leading_mode,
                       "tail_verified": rep.tail_verified}))
    return EXIT_OK


def cmd_spectrum(cfg, out):
    prob = _problem(cfg)
    vs = _equilibrium(prob, cfg["equilibrium"])
    gen = numeric_linearization(prob, vs) if cfg["numeric"] else (prob.linearization(vs) or
                                                                 numeric_linearization(prob, vs))
    rep = spectral_bound(gen)
    out.write(dump_kv({"spectral_bound": rep.spectral_bound, "leading_mode": rep.leading_mode,
                       "tail_verified": rep.tail_verified, "status": rep.status}))
    return EXIT_OK


def _solve(prob, u0, T, N, r, mu=0.0):
    if r is None:
        mesh = TimeMesh.graded(T, N, mu, prob.profile.q)
    else:
        mesh = TimeMesh(T, N, r)
    cfg = SolveConfig(prob.K, mesh, dealias=prob.dealias, mu=mu)
    if prob.quasilinear:
        return solve_quasilinear(prob, u0, cfg)
    return solve_semilinear(prob.generator, prob.f, u0, cfg, profile=prob.profile, margin=prob.admissible_margin)


def cmd_simulate(cfg, out):
    prob = _problem(cfg)
    vs = _equilibrium(prob, cfg["equilibrium"])
    u0 = _initial(prob, vs, cfg["amplitude"], cfg["seed"])
    sol = _solve(prob, u0, cfg["T"], cfg["N"], cfg["r"])
    pr = prob.profile
    if cfg["out"]:
        write_trajectory(sol, cfg["out"], pr.alpha, pr.xi, prob.scale)
    if cfg["plot"]:
        tr = sol.trajectory
        lam = prob.domain.eigenvalues(prob.K)
        w = prob.scale.weights(lam, pr.alpha)
        dev = np.sqrt(np.sum((w * (tr.states - vs.coefficients[None])) ** 2, axis=(1, 2)))
        write_svg(cfg["plot"], tr.times, {"||v - v*||_alpha": dev})
    out.write(dump_kv({"status": sol.status, "t_plus": sol.t_plus_text, "samples": len(sol.trajectory)}))
    return EXIT_OK if sol.completed else EXIT_NUMERIC


def _load_traj(cfg, prob):
    _need(cfg, "traj")
    path = cfg["traj"]
    if not path.endswith(".bin"):
        path = path + ".bin"
    return read_states_binary(path, prob.domain)


def cmd_fit(cfg, out):
    prob = _problem(cfg)
    tr = _load_traj(cfg, prob)
    vs = _equilibrium(prob, cfg["equilibrium"])
    win = None
    if cfg["t_min"] is not None or cfg["t_max"] is not None:
        T = tr.times[-1]
        win = (cfg["t_min"] if cfg["t_min"] is not None else 0.3 * T,
               cfg["t_max"] if cfg["t_max"] is not None else 0.9 * T)
    fit = fit_decay(tr, vs, cfg["s"], win)
    out.write(dump_kv({"omega_hat": fit.omega_hat, "M_hat": fit.M_hat, "t_min": fit.window[0],
                       "t_max": fit.window[1], "residual": fit.residual}))
    return EXIT_OK


def cmd_verify_estimate(cfg, out):
    _need(cfg, "omega", "M")
    prob = _problem(cfg)
    tr = _load_traj(cfg, prob)
    vs = _equilibrium(prob, cfg["equilibrium"])
    a = prob.profile.alpha if cfg["alpha"] is None else cfg["alpha"]
    x = prob.profile.xi if cfg["xi"] is None else cfg["xi"]
    margin = verify_exponential_estimate(tr, vs, a, x, cfg["omega"], cfg["M"], prob.scale)
    ok = margin >= 0
    out.write(dump_kv({"margin": margin, "passed": ok}))
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_basin(cfg, out):
    prob = _problem(cfg)
    if prob.quasilinear:
        raise ConfigError("basin certificates are constant-based only for semilinear problems")
    vs = _equilibrium(prob, cfg["equilibrium"])
    gen = prob.linearization(vs) or numeric_linearization(prob, vs)
    rep = spectral_bound(gen)
    omega0 = -rep.spectral_bound
    if not omega0 > 0:
        out.write(dump_kv({"status": "refused", "reason": f"spectral bound {rep.spectral_bound!r} is not negative"}))
        return EXIT_NUMERIC
    pr = prob.profile
    gs = pr.gamma if cfg["gamma_star"] is None else cfg["gamma_star"]
    rem = estimate_remainder_constants(prob, vs, cfg["radii"], gs, seed=cfg["seed"], q_star=cfg["q_star"])
    if rem.linear:
        out.write(dump_kv({"status": "linear", "reason": "remainder vanishes"}))
        return EXIT_OK
    try:
        mu = pr.xi - pr.alpha
        g0 = choose_gamma0(gs, pr.gamma, pr.alpha, mu, rem.q_star)
        c0 = c0_constant(mu, rem.q_star, g0, pr.alpha, cfg["omega_bar"] - cfg["omega"])
        M = certificate_M(gen, pr.alpha, pr.xi, gs, cfg["omega_bar"], c0, prob.scale)
        cert = basin_certificate(rem.c_star, rem.q_star, cfg["r_star"], gs, M, cfg["omega"], cfg["omega_bar"],
                                 omega0, pr.alpha, pr.xi, pr.gamma)
    except PreconditionError as e:
        out.write(dump_kv({"status": "refused", "reason": str(e)}))
        return EXIT_NUMERIC
    out.write("status=certified\n")
    out.write(cert.dumps())
    return EXIT_OK


def cmd_instability(cfg, out):
    prob = _problem(cfg)
    vs = _equilibrium(prob, cfg["equilibrium"])
    gen = prob.linearization(vs) or numeric_linearization(prob, vs)
    rep = spectral_bound(gen)
    # leading eigenvector of the leading mode as the probe direction
    if hasattr(gen, "blocks"):
        w, V = np.linalg.eig(gen.blocks[rep.leading_mode])
        vec = np.real(V[:, int(np.argmax(w.real))])
        c = np.zeros((prob.m, prob.K))
        c[:, rep.leading_mode] = vec
    else:
        w, V = np.linalg.eig(gen.matrix)
        c = np.real(V[:, int(np.argmax(w.real))]).reshape(prob.m, prob.K)
    d = SystemField(prob.domain, c)
    v = instability_probe(prob, vs, d, cfg["deltas"], cfg["escape_radius"], cfg["T_max"], cfg["N"])
    out.write("\n".join(v.lines()) + "\n")
    return EXIT_OK


def _scan_cell(args):
    chi, kappa, modes, eq = args
    rep = spectral_bound(chemotaxis_linearization(chi, kappa, eq, Domain1D(1.0, "neumann"), modes))
    return [chi, kappa, rep.spectral_bound, rep.leading_mode, int(rep.tail_verified)]


def cmd_scan(cfg, out):
    cells = [(c, k, cfg["modes"], cfg["equilibrium"]) for c in cfg["chi"] for k in cfg["kappa"]]
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        rows = list(pool.map(_scan_cell, cells))   # map keeps grid order
    header = ["chi", "kappa", "spectral_bound", "leading_mode", "tail_verified"]
    write_csv(cfg["out"] if cfg["out"] else out, header, rows)
    return EXIT_OK


def cmd_scaling(cfg, out):
    sc = ex.critical_sobolev_index(cfg["n"], cfg["p"], cfg["kappa"])
    s = sc if cfg["s"] is None else cfg["s"]
    out.write(dump_kv({"s_c": sc, "s": s, "defect": ex.scaling_defect(s, cfg["n"], cfg["p"], cfg["kappa"])}))
    return EXIT_OK


def cmd_selftest(cfg, out):
    checks = [
        ("alpha_crit", ex.alpha_crit(2, 0.1, 0.65) == 0.2),
        ("beta_half", abs(special_beta(0.5, 0.5) - math.pi) <= 1e-12 * math.pi),
        ("c0", abs(c0_constant(0.25, 2, 0.3, 0.3, 1.0) - 4.5966) <= 1e-3),
        ("spectral_bound", abs(spectral_bound(chemotaxis_linearization(2, 0.5, "one", Domain1D(), 64))
                               .spectral_bound + 0.5) <= 1e-10),
    ]
    for name, ok in checks:
        out.write(f"{name}={'pass' if ok else 'fail'}\n")
    return EXIT_OK if all(ok for _, ok in checks) else EXIT_NUMERIC


COMMANDS = {
    "critical": cmd_critical, "profile": cmd_profile, "dispersion": cmd_dispersion, "spectrum": cmd_spectrum,
    "simulate": cmd_simulate, "fit": cmd_fit, "verify-estimate": cmd_verify_estimate, "basin": cmd_basin,
    "instability": cmd_instability, "scan": cmd_scan, "scaling": cmd_scaling, "selftest": cmd_selftest,
}


def run(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    sub = ns.subcommand
    flags = {k: getattr(ns, k) for k in SUBCOMMANDS[sub]}
    try:
        text = None
        if ns.config:
            with open(ns.config) as fh:
                text = fh.read()
        cfg = resolve(sub, flags, text)
        if ns.dry_run:
            if "problem" in cfg:
                _problem(cfg)
            out.write(f"subcommand={sub}\n")
            out.write(dump_kv(cfg))
            return EXIT_OK
        return COMMANDS[sub](cfg, out)
    except (ConfigError, InputError, OSError) as e:
        err.write(f"error: {e}\n")
        return EXIT_CONFIG
    except (NumericError, PreconditionError, ParastabError, FloatingPointError) as e:
        err.write(f"numeric failure: {e}\n")
        return EXIT_NUMERIC


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
