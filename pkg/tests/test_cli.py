import io
import os
import subprocess
import sys

import pytest

from parastab.cli import ConfigError, resolve, run
from parastab.records import parse_kv, read_csv


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def test_critical():
    code, out, _ = call("critical", "--q", "2", "--gamma", "0.1", "--xi", "0.65")
    assert code == 0 and "alpha_crit=0.2" in out


def test_dispersion_csv(tmp_path):
    path = tmp_path / "d.csv"
    code, _, _ = call("dispersion", "--chi", "2", "--kappa", "0.5", "--modes", "8", "--out", str(path))
    assert code == 0
    header, rows = read_csv(path)
    assert len(rows) == 8 and float(rows[0][header.index("re_eig1")]) == -0.5


def test_negative_kappa_is_config_error():
    code, _, err = call("simulate", "--problem", "chemotaxis", "--chi", "2", "--kappa", "-1")
    assert code == 2 and "kappa must be positive" in err


def test_unknown_config_key_named(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("chi = 2\nbogus = 3\n")
    code, _, err = call("dispersion", "--config", str(cfg))
    assert code == 2 and "bogus" in err


def test_flags_override_file():
    text = "chi = 1.0\nkappa = 0.5\n"
    cfg = resolve("dispersion", {"chi": 2.0}, text)
    assert cfg["chi"] == 2.0 and cfg["kappa"] == 0.5
    with pytest.raises(ConfigError):
        resolve("dispersion", {}, "chi = two\n")


@pytest.mark.parametrize("sub", ["critical", "profile", "dispersion", "spectrum", "simulate", "fit",
                                 "verify-estimate", "basin", "instability", "scan", "scaling", "selftest"])
def test_dry_run(sub):
    code, out, _ = call(sub, "--dry-run")
    assert code == 0 and "subcommand=" in out


def test_simulate_fit_verify_chain(tmp_path):
    traj = tmp_path / "run.csv"
    code, out, _ = call("simulate", "--K", "16", "--T", "20", "--N", "200", "--out", str(traj),
                        "--plot", str(tmp_path / "run.svg"))
    assert code == 0 and parse_kv(out)["status"] == "completed"
    assert (tmp_path / "run.svg").read_text().startswith("<svg")
    code, out, _ = call("fit", "--K", "16", "--traj", str(traj), "--t-min", "6", "--t-max", "18")
    assert code == 0 and abs(float(parse_kv(out)["omega_hat"]) - 0.5) <= 0.05
    code, out, _ = call("verify-estimate", "--K", "16", "--traj", str(traj), "--omega", "0.4", "--M", "50")
    assert code == 0


def test_replay_is_byte_identical(tmp_path):
    paths = [tmp_path / f"r{i}.csv" for i in range(2)]
    for p in paths:
        assert call("simulate", "--K", "16", "--T", "2", "--N", "40", "--seed", "7", "--out", str(p))[0] == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert (tmp_path / "r0.csv.bin").read_bytes() == (tmp_path / "r1.csv.bin").read_bytes()


def test_basin_certificate():
    code, out, _ = call("basin", "--K", "32")
    kv = parse_kv(out)
    assert code == 0 and kv["status"] == "certified"
    assert float(kv["epsilon0"]) > 0


def test_basin_refused_at_unstable_state():
    code, out, _ = call("basin", "--K", "16", "--equilibrium", "0")
    assert code == 1 and "refused" in out


def test_instability():
    code, out, _ = call("instability", "--K", "8", "--kappa", "0.7", "--T-max", "60", "--N", "600",
                        "--deltas", "1e-2,1e-3")
    assert code == 0 and "verdict=unstable" in out


def test_scan_keeps_grid_order(tmp_path, monkeypatch):
    monkeypatch.setenv("PARASTAB_THREADS", "3")
    path = tmp_path / "scan.csv"
    code, _, _ = call("scan", "--chi", "0.5,2", "--kappa", "0.3,4", "--modes", "16", "--out", str(path))
    assert code == 0
    _, rows = read_csv(path)
    assert [(float(r[0]), float(r[1])) for r in rows] == [(0.5, 0.3), (0.5, 4.0), (2.0, 0.3), (2.0, 4.0)]
    assert all(float(r[2]) < 0 for r in rows)


def test_scaling_profile_spectrum_selftest():
    code, out, _ = call("scaling", "--n", "1", "--p", "2.5", "--kappa", "4")
    assert code == 0 and abs(float(parse_kv(out)["defect"])) <= 1e-14
    code, out, _ = call("profile", "--kind", "gradient")
    assert code == 0 and "critical" in out
    code, out, _ = call("spectrum", "--K", "16")
    assert code == 0 and abs(float(parse_kv(out)["spectral_bound"]) + 0.5) <= 1e-12
    code, out, _ = call("selftest")
    assert code == 0 and "fail" not in out


def test_gradient_simulation():
    code, out, _ = call("simulate", "--problem", "gradient", "--K", "16", "--T", "0.2", "--N", "16",
                        "--amplitude", "0.01")
    assert code == 0


def test_module_entry_point():
    env = dict(os.environ)
    res = subprocess.run([sys.executable, "-m", "parastab", "critical", "--q", "2", "--gamma", "0.1",
                          "--xi", "0.65"], capture_output=True, text=True, env=env)
    assert res.returncode == 0 and "alpha_crit=0.2" in res.stdout
