import math
from pathlib import Path

import numpy as np
import pytest

import hopflab as hl
from hopflab import cli, reporting
from hopflab.config import RunConfig


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------

def test_config_round_trip_identity():
    cfg = RunConfig(L=12.5, seed=99, converge_n_list=(2, 4, 8, 16),
                    phi_sin_coeffs=(1.0, 0.25), out_dir="elsewhere")
    text = cfg.to_ini()
    cfg2 = RunConfig.from_ini(text)
    assert cfg2 == cfg
    assert RunConfig.from_ini(cfg2.to_ini()) == cfg2
    assert cfg.config_hash() == cfg2.config_hash()


def test_config_violations_are_named():
    cfg = RunConfig(rho2=0.3, rho1=0.7)
    bad = cfg.violations()
    assert "rho2 in (3/8, 1/2)" in bad
    cfg = RunConfig(beta0=0.0)
    assert "beta0 != 0" in cfg.violations()
    cfg = RunConfig(converge_n_list=(1, 2, 3))
    assert any("4 points" in b for b in cfg.violations())


def test_config_builds_system_and_family():
    cfg = RunConfig(L=7.0, beta0=2.0)
    sys_ = cfg.system()
    assert sys_.L == 7.0
    assert sys_.beta0 == 2.0
    fam = cfg.family()
    assert fam.zeta == math.pi / 2
    assert fam.beta0 == 2.0


# ---------------------------------------------------------------------------
# histogram and certificate files
# ---------------------------------------------------------------------------

def test_histogram_round_trip(tmp_path):
    counts = np.arange(12.0).reshape(3, 4) / 66.0
    path = tmp_path / "h.bin"
    reporting.write_histogram(path, counts, description="test grid")
    back = reporting.read_histogram(path)
    assert back.shape == (3, 4)
    assert (back == counts).all()
    raw = path.read_bytes()
    assert raw[:4] == b"HGR1"
    assert len(raw) == 16 + 12 * 8
    assert "3x4" in (tmp_path / "h.bin.txt").read_text()


def test_histogram_bad_magic(tmp_path):
    path = tmp_path / "h.bin"
    path.write_bytes(b"XXXX" + b"\0" * 12)
    with pytest.raises(ValueError):
        reporting.read_histogram(path)


@pytest.fixture(scope="module")
def small_pair():
    return hl.find_misiurewicz_pair(
        hl.HOPF_FAMILY, 60.0, hl.SearchConfig(horizon_N=200, depth_cap=8))


def test_certificate_round_trip(tmp_path, small_pair):
    a, L, cert = small_pair
    path = tmp_path / "certificate.txt"
    reporting.write_certificate(path, a, L, cert)
    doc = reporting.read_certificate(path)
    assert float(doc["L_star"]) == pytest.approx(float(L), rel=1e-15)
    assert float(doc["K"]) == cert.K
    assert doc["conditions"]["critical_orbits"]["passed"]
    assert doc["conditions"]["outside_expansion"]["passed"]
    # the full-precision parameter string reconstructs beyond double accuracy
    assert len(doc["a_star"]) > 50


def test_certificate_bytes_deterministic(tmp_path):
    cfgs = []
    for run in ("one", "two"):
        a, L, cert = hl.find_misiurewicz_pair(
            hl.HOPF_FAMILY, 60.0, hl.SearchConfig(horizon_N=200, depth_cap=8))
        p = tmp_path / f"{run}.txt"
        reporting.write_certificate(p, a, L, cert)
        cfgs.append(p.read_bytes())
    assert cfgs[0] == cfgs[1]


def test_manifest_hashes(tmp_path):
    (tmp_path / "a.txt").write_text("alpha")
    (tmp_path / "b.bin").write_bytes(b"\x01\x02")
    reporting.write_manifest(tmp_path)
    import json, hashlib
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["files"]["a.txt"] == hashlib.sha256(b"alpha").hexdigest()
    assert set(man["files"]) == {"a.txt", "b.bin"}


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def test_cli_defaults_exits_clean(capsys):
    assert cli.main(["defaults"]) == 0
    out = capsys.readouterr().out
    assert "[system]" in out
    assert "records.csv" in out


def test_cli_rejects_bad_config(tmp_path, capsys):
    cfg = RunConfig(rho2=0.39, rho1=0.61)
    cfg.rho2 = 0.3            # bypass dataclass construction checks
    cfg.rho1 = 0.7
    path = tmp_path / "bad.ini"
    path.write_text(cfg.to_ini())
    code = cli.main(["--config", str(path), "converge"])
    assert code == cli.EXIT_CONFIG
    assert "rho2 in (3/8, 1/2)" in capsys.readouterr().err


def test_cli_find_writes_certificate(tmp_path):
    cfg = RunConfig(search_L_lo=60.0, search_horizon=200, out_dir=str(tmp_path))
    path = tmp_path / "cfg.ini"
    path.write_text(cfg.to_ini())
    assert cli.main(["--config", str(path), "find"]) == 0
    runs = list(tmp_path.glob("find-*"))
    assert len(runs) == 1
    cert_doc = reporting.read_certificate(runs[0] / "certificate.txt")
    assert 60.0 <= float(cert_doc["L_star"]) <= 60.0 + math.pi
    assert (runs[0] / "manifest.json").exists()
    assert (runs[0] / "config.ini").exists()


def test_cli_find_search_exhausted_exit_code(tmp_path):
    # a four-critical-point family is outside the two-parameter scheme
    cfg = RunConfig(search_L_lo=60.0, search_horizon=100,
                    phi_sin_coeffs=(0.0, 1.0), out_dir=str(tmp_path))
    path = tmp_path / "cfg.ini"
    path.write_text(cfg.to_ini())
    assert cli.main(["--config", str(path), "find"]) == cli.EXIT_SEARCH


def test_cli_sweep_records_and_histograms(tmp_path):
    cfg = RunConfig(L=100.0, sweep_points=3, sweep_mu_lo=1e-4, sweep_mu_hi=1e-3,
                    sweep_iterates=20_000, sweep_burn_in=500,
                    sweep_histogram_iterates=100_000,
                    sweep_bins_z=8, sweep_bins_theta=64,
                    sweep_a=1.0, out_dir=str(tmp_path), seed=3)
    path = tmp_path / "cfg.ini"
    path.write_text(cfg.to_ini())
    assert cli.main(["--config", str(path), "sweep"]) == 0
    run = next(tmp_path.glob("sweep-*"))
    lines = (run / "records.csv").read_text().strip().splitlines()
    assert lines[0] == reporting.SWEEP_CSV_HEADER
    assert len(lines) == 4
    assert (run / "histogram_seed.bin").exists()
    assert (run / "histogram_seed2.bin").exists()
    summary = (run / "summary.txt").read_text()
    assert "fraction_lambda_positive" in summary
    assert "histogram_tv_distance" in summary
    # manifest covers every artifact
    import json
    man = json.loads((run / "manifest.json").read_text())
    assert "records.csv" in man["files"]


def test_cli_sweep_empty_grid(tmp_path):
    cfg = RunConfig(sweep_points=0, out_dir=str(tmp_path))
    path = tmp_path / "cfg.ini"
    path.write_text(cfg.to_ini())
    assert cli.main(["--config", str(path), "sweep"]) == 0
    run = next(tmp_path.glob("sweep-*"))
    lines = (run / "records.csv").read_text().splitlines()
    assert lines == [reporting.SWEEP_CSV_HEADER]


def test_cli_sweep_duplicate_points_identical_rows(tmp_path):
    # degenerate grid: every target resolves to the same resonant index,
    # so all rows must agree except for position and timing
    cfg = RunConfig(L=100.0, sweep_points=2, sweep_mu_lo=1e-3,
                    sweep_mu_hi=1.0000001e-3, sweep_iterates=20_000,
                    sweep_burn_in=500, sweep_histogram_iterates=100_000,
                    sweep_bins_z=8, sweep_bins_theta=64,
                    sweep_a=1.0, out_dir=str(tmp_path), seed=4)
    path = tmp_path / "cfg.ini"
    path.write_text(cfg.to_ini())
    assert cli.main(["--config", str(path), "sweep"]) == 0
    run = next(tmp_path.glob("sweep-*"))
    rows = (run / "records.csv").read_text().strip().splitlines()[1:]
    stripped = [",".join(r.split(",")[1:-1]) for r in rows]
    assert stripped[0] == stripped[1]


def test_cli_converge_matches_library(tmp_path):
    cfg = RunConfig(converge_n_list=(1, 4, 16, 64), converge_a_count=2,
                    converge_grid_z=8, converge_grid_theta=8,
                    converge_order=0, perturb_points=2,
                    perturb_mu_lo=1e-9, perturb_mu_hi=1e-8,
                    out_dir=str(tmp_path))
    path = tmp_path / "cfg.ini"
    path.write_text(cfg.to_ini())
    assert cli.main(["--config", str(path), "converge"]) == 0
    run = next(tmp_path.glob("converge-*"))
    lines = (run / "convergence.csv").read_text().strip().splitlines()
    assert lines[0] == reporting.CONVERGENCE_CSV_HEADER
    # the CLI is a thin adapter: the library reproduces the CSV numbers bit
    # for bit
    sys_ = cfg.system()
    a_grid = np.linspace(0.0, 2 * math.pi, 2, endpoint=False)
    rep = hl.convergence_report(sys_, a_grid, [1, 4, 16, 64],
                                derivative_order=0, grid=(8, 8))
    for line, row in zip(lines[1:], rep.rows):
        fields = line.split(",")
        assert int(fields[0]) == row.n
        assert float(fields[1]) == row.mu_n
        assert float(fields[2]) == row.c0
    pert_lines = (run / "perturbation.csv").read_text().strip().splitlines()
    assert pert_lines[0] == reporting.PERTURBATION_CSV_HEADER
    assert len(pert_lines) == 3


def test_cli_lyapunov(tmp_path):
    cfg = RunConfig(L=100.0, sweep_iterates=20_000, sweep_burn_in=500,
                    out_dir=str(tmp_path), seed=11)
    path = tmp_path / "cfg.ini"
    path.write_text(cfg.to_ini())
    assert cli.main(["--config", str(path), "lyapunov",
                     "--n-index", "3", "--a", "1.0"]) == 0
    run = next(tmp_path.glob("lyapunov-*"))
    text = (run / "lyapunov.txt").read_text()
    assert "lambda1" in text and "seed 11" in text


def test_cli_seed_override_changes_run_dir(tmp_path):
    cfg = RunConfig(sweep_points=0, out_dir=str(tmp_path), seed=1)
    path = tmp_path / "cfg.ini"
    path.write_text(cfg.to_ini())
    assert cli.main(["--config", str(path), "--seed", "77", "sweep"]) == 0
    assert any("seed77" in p.name for p in tmp_path.glob("sweep-*"))


def test_cli_sweep_consumes_certificate(tmp_path, small_pair):
    a, L, cert = small_pair
    cert_path = tmp_path / "certificate.txt"
    reporting.write_certificate(cert_path, a, L, cert)
    cfg = RunConfig(sweep_points=2, sweep_mu_lo=1e-4, sweep_mu_hi=1e-3,
                    sweep_iterates=20_000, sweep_burn_in=500,
                    sweep_histogram_iterates=50_000,
                    sweep_bins_z=8, sweep_bins_theta=64,
                    sweep_certificate=str(cert_path),
                    out_dir=str(tmp_path), seed=6)
    path = tmp_path / "cfg.ini"
    path.write_text(cfg.to_ini())
    assert cli.main(["--config", str(path), "sweep"]) == 0
    run = next(tmp_path.glob("sweep-*"))
    rows = (run / "records.csv").read_text().strip().splitlines()[1:]
    # the L column carries the certified amplitude, not the config default
    assert float(rows[0].split(",")[3]) == pytest.approx(float(L), rel=1e-12)
