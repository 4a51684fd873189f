"""Command-line front end: find / sweep / converge / lyapunov / defaults.

Thin adapter over the library: every number written to disk is produced by a
library call.  Each invocation materialises one run directory containing the
config snapshot, result files, and a SHA-256 manifest.

Exit codes: 0 success, 2 config error, 3 search exhausted, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from pathlib import Path

import numpy as np

from .circle import TWO_PI
from .config import RunConfig
from .diagnostics import (
    EscapedError,
    empirical_measure,
    lyapunov_top,
    make_rng,
    random_annulus_point,
    tv_distance,
)
from .kicked import (
    AnnulusPoint,
    NonMonotoneError,
    NotRelaxableError,
    ReturnMap,
    StepFailureError,
    convergence_report,
    first_resonant_index,
    perturbation_magnitude,
    solve_xi_equals,
    xi,
)
from .misiurewicz import SearchConfig, SearchExhaustedError, find_misiurewicz_pair
from . import reporting

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SEARCH = 3
EXIT_NUMERIC = 4


def _load_config(args) -> RunConfig:
    if args.config:
        cfg = RunConfig.from_ini(Path(args.config).read_text())
    else:
        cfg = RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.workers is not None:
        cfg.workers = args.workers
    if args.out is not None:
        cfg.out_dir = args.out
    return cfg


def _reject_invalid(cfg: RunConfig) -> list:
    bad = cfg.violations()
    for constraint in bad:
        print(f"config error: violated constraint: {constraint}", file=sys.stderr)
    return bad


def _run_dir(cfg: RunConfig, command: str) -> Path:
    d = Path(cfg.out_dir) / f"{command}-{cfg.config_hash()[:8]}-seed{cfg.seed}"
    d.mkdir(parents=True, exist_ok=True)
    (d / "config.ini").write_text(cfg.to_ini())
    (d / "csv_schema.txt").write_text(reporting.schema_text())
    return d


def _set_workers(n: int) -> None:
    try:
        import numba
        numba.set_num_threads(max(1, n))
    except (ImportError, ValueError):
        pass


def cmd_find(cfg: RunConfig) -> int:
    run = _run_dir(cfg, "find")
    search = SearchConfig(horizon_N=cfg.search_horizon,
                          K=cfg.search_K if cfg.search_K > 0 else None)
    try:
        a_star, L_star, cert = find_misiurewicz_pair(cfg.family(),
                                                     cfg.search_L_lo, search)
    except SearchExhaustedError as e:
        print(f"search exhausted: {e}", file=sys.stderr)
        return EXIT_SEARCH
    except ValueError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    reporting.write_certificate(run / "certificate.txt", a_star, L_star, cert)
    reporting.write_manifest(run)
    print(f"a* = {float(a_star)!r}")
    print(f"L* = {float(L_star)!r}")
    print(f"K = {cert.K!r}, sigma/2 = {cert.delta1!r}, horizon = {cert.horizon_N}")
    print(f"min critical-orbit distance = {cert.evidence['orbit_min_distance']!r}")
    print(f"certificate: {run / 'certificate.txt'}")
    return EXIT_OK


def _sweep_targets(system, cfg: RunConfig, a: float):
    m1 = first_resonant_index(system, cfg.mu_start)
    targets = np.logspace(math.log10(cfg.sweep_mu_lo),
                          math.log10(cfg.sweep_mu_hi), cfg.sweep_points)
    pairs = []
    for mu_t in sorted(targets, reverse=True):
        m = max(m1, int(round((xi(system, mu_t) - a) / TWO_PI)))
        n = m - m1 + 1
        pairs.append((n, m))
    return pairs


def cmd_sweep(cfg: RunConfig) -> int:
    run = _run_dir(cfg, "sweep")
    a, L = cfg.sweep_a, cfg.L
    if cfg.sweep_certificate:
        cert_doc = reporting.read_certificate(cfg.sweep_certificate)
        a = float(cert_doc["a_star"]) % TWO_PI
        L = float(cert_doc["L_star"])
    system = cfg.system(L=L)
    pairs = _sweep_targets(system, cfg, a)
    rows = []
    lam_by_index = {}
    for idx, (n, m) in enumerate(pairs):
        t0 = time.perf_counter()
        record_seed = cfg.seed * (1 << 20) + m
        err = ""
        lam = stderr = mu = float("nan")
        escaped = False
        try:
            mu = solve_xi_equals(system, TWO_PI * m + a, mu_hi=cfg.mu_start)
            rm = ReturnMap.reduced(system, n, a, mu_start=cfg.mu_start)
            p0 = random_annulus_point(make_rng(record_seed), cfg.K4)
            est = lyapunov_top(rm, p0, cfg.sweep_iterates, cfg.sweep_burn_in)
            lam, stderr = est.lambda1, est.stderr
            lam_by_index[idx] = (lam, n)
        except EscapedError:
            escaped = True
        except (NotRelaxableError, NonMonotoneError, StepFailureError) as e:
            err = type(e).__name__
        elapsed = time.perf_counter() - t0
        rows.append(f"{idx},{n},{a!r},{L!r},{mu!r},{lam!r},{stderr!r},"
                    f"{int(escaped)},{err},{record_seed},{elapsed:.3f}")
    body = ("\n".join(rows) + "\n") if rows else ""
    (run / "records.csv").write_text(reporting.SWEEP_CSV_HEADER + "\n" + body)

    ok = {i: v for i, v in lam_by_index.items() if math.isfinite(v[0])}
    frac = (sum(1 for v in ok.values() if v[0] > cfg.sweep_threshold) / len(ok)
            if ok else 0.0)
    summary = [f"records {len(pairs)}",
               f"fraction_lambda_positive {frac!r}",
               f"threshold {cfg.sweep_threshold!r}",
               f"seed {cfg.seed}"]
    if ok:
        best_idx = max(ok, key=lambda i: ok[i][0])
        best_n = ok[best_idx][1]
        rm = ReturnMap.reduced(system, best_n, a, mu_start=cfg.mu_start)
        hists = []
        for tag, s in (("seed", cfg.seed), ("seed2", cfg.sweep_second_seed)):
            p0 = random_annulus_point(make_rng(s), cfg.K4)
            h = empirical_measure(rm, p0, cfg.sweep_histogram_iterates,
                                  cfg.sweep_burn_in,
                                  (cfg.sweep_bins_z, cfg.sweep_bins_theta))
            reporting.write_histogram(
                run / f"histogram_{tag}.bin", h.counts,
                description=f"most chaotic grid point n={best_n}, seed={s}")
            hists.append(h)
        summary.append(f"histogram_tv_distance {tv_distance(*hists)!r}")
        summary.append(f"most_chaotic_index {best_idx}")
        summary.append(f"most_chaotic_lambda {ok[best_idx][0]!r}")
    (run / "summary.txt").write_text("\n".join(summary) + "\n")
    reporting.write_manifest(run)
    print("\n".join(summary))
    print(f"records: {run / 'records.csv'}")
    return EXIT_OK


def cmd_converge(cfg: RunConfig) -> int:
    run = _run_dir(cfg, "converge")
    system = cfg.system()
    a_grid = np.linspace(0.0, TWO_PI, cfg.converge_a_count, endpoint=False)
    rep = convergence_report(system, a_grid, list(cfg.converge_n_list),
                             derivative_order=cfg.converge_order,
                             grid=(cfg.converge_grid_z, cfg.converge_grid_theta),
                             mu_start=cfg.mu_start)
    lines = [reporting.CONVERGENCE_CSV_HEADER]
    for r in rep.rows:
        lines.append(f"{r.n},{r.mu_n!r},{r.c0!r},{r.c1!r},{r.c2!r},{r.c3!r},"
                     f"{rep.fitted_slope!r}")
    (run / "convergence.csv").write_text("\n".join(lines) + "\n")

    pert_system = cfg.system(L=cfg.perturb_L,
                             g=lambda r, th, mu: 1.0,
                             h=lambda r, th, mu: math.cos(th))
    mus = np.logspace(math.log10(cfg.perturb_mu_lo),
                      math.log10(cfg.perturb_mu_hi), cfg.perturb_points)
    pert = perturbation_magnitude(pert_system, mus, tol=cfg.integrator_tol)
    lines = [reporting.PERTURBATION_CSV_HEADER]
    for r in pert.rows:
        lines.append(f"{r.mu!r},{r.zeta_tau!r},{r.theta_tilde_tau!r},"
                     f"{pert.zeta_exponent!r},{pert.theta_exponent!r}")
    (run / "perturbation.csv").write_text("\n".join(lines) + "\n")
    reporting.write_manifest(run)
    print(f"C0 slope {rep.fitted_slope!r} (target {rep.target_slope!r})")
    print(f"zeta exponent {pert.zeta_exponent!r} "
          f"(reference {pert.zeta_reference!r})")
    print(f"outputs: {run}")
    return EXIT_OK


def cmd_lyapunov(cfg: RunConfig, n_index: int, a: float) -> int:
    run = _run_dir(cfg, "lyapunov")
    system = cfg.system()
    rm = ReturnMap.reduced(system, n_index, a, mu_start=cfg.mu_start)
    p0 = random_annulus_point(make_rng(cfg.seed), cfg.K4)
    est = lyapunov_top(rm, p0, cfg.sweep_iterates, cfg.sweep_burn_in)
    out = (f"n_index {n_index}\na {a!r}\nmu {rm.mu!r}\n"
           f"lambda1 {est.lambda1!r}\nstderr {est.stderr!r}\nseed {cfg.seed}\n")
    (run / "lyapunov.txt").write_text(out)
    reporting.write_manifest(run)
    print(out, end="")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hopflab",
        description="Kicked degenerate-Hopf numerics: certified parameter "
                    "search, singular-limit convergence, chaos diagnostics.")
    parser.add_argument("--config", type=str, default=None,
                        help="INI config path (defaults are used when omitted)")
    parser.add_argument("--seed", type=int, default=None, help="RNG seed override")
    parser.add_argument("--workers", type=int, default=None,
                        help="worker threads; 1 guarantees bit-reproducibility")
    parser.add_argument("--out", type=str, default=None, help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("find", help="run the Misiurewicz pair search")
    sub.add_parser("sweep", help="Lyapunov sweep over a log-mu grid")
    sub.add_parser("converge", help="singular-limit convergence and "
                                    "higher-order-term decay reports")
    lyap = sub.add_parser("lyapunov", help="single-map Lyapunov estimate")
    lyap.add_argument("--n-index", type=int, default=1)
    lyap.add_argument("--a", type=float, default=0.0)
    sub.add_parser("defaults", help="print the default config and CSV schema")

    args = parser.parse_args(argv)
    if args.command == "defaults":
        print(RunConfig().to_ini())
        print(reporting.schema_text())
        return EXIT_OK

    try:
        cfg = _load_config(args)
    except (OSError, ValueError, KeyError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if _reject_invalid(cfg):
        return EXIT_CONFIG
    _set_workers(cfg.workers)

    try:
        if args.command == "find":
            return cmd_find(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg)
        if args.command == "converge":
            return cmd_converge(cfg)
        if args.command == "lyapunov":
            return cmd_lyapunov(cfg, args.n_index, args.a)
    except SearchExhaustedError as e:
        print(f"search exhausted: {e}", file=sys.stderr)
        return EXIT_SEARCH
    except (NotRelaxableError, NonMonotoneError, StepFailureError,
            EscapedError, FloatingPointError) as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
