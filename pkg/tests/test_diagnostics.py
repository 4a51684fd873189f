import math

import numpy as np
import pytest

import hopflab as hl
from hopflab.circle import TWO_PI


@pytest.fixture(scope="module")
def chaotic_system():
    """Strongly kicked system: the reduced maps at small mu are chaotic."""
    return hl.HopfSystem(L=100.0)


@pytest.fixture(scope="module")
def chaotic_map(chaotic_system):
    return hl.ReturnMap.reduced(chaotic_system, 40, 1.0)


def test_lyapunov_singular_matches_1d_oracle():
    # the singular limit collapses to the circle family after one step, so
    # the top exponent equals the orbit average of log|f'| from the 1-D side
    # (the two orbit generators use different libm builds and decorrelate
    # after ~7 steps, so agreement is statistical: both sample the same
    # invariant average, with fluctuations ~ 1/sqrt(n))
    sys_ = hl.HopfSystem(L=500.0)
    rm = hl.ReturnMap.singular(sys_, 1.0)
    n = 4_000_000
    th0 = 0.3
    est = hl.lyapunov_top(rm, hl.AnnulusPoint(1.0, th0), n, burn_in=0)
    fam = hl.singular_limit_restriction(rm)
    crit = hl.critical_points(fam, sys_.L)
    tr = hl.iterate_orbit(fam, 1.0, sys_.L, th0, n, crit, keep_states=False)
    assert est.lambda1 == pytest.approx(tr.sum_log_derivatives / n, abs=1e-3)


def test_lyapunov_near_rotation_not_positive():
    sys_ = hl.HopfSystem(L=10.0, beta=lambda mu: 1e-30)
    rm = hl.ReturnMap.singular(sys_, 1.0)
    est = hl.lyapunov_top(rm, hl.AnnulusPoint(1.0, 0.5), 20_000, burn_in=100)
    assert est.lambda1 <= 0.0 + 3 * est.stderr


def test_lyapunov_doubling_consistency(chaotic_map):
    p0 = hl.AnnulusPoint(1.1, 0.7)
    e1 = hl.lyapunov_top(chaotic_map, p0, 200_000, burn_in=1000)
    e2 = hl.lyapunov_top(chaotic_map, p0, 400_000, burn_in=1000)
    assert abs(e1.lambda1 - e2.lambda1) <= 2 * max(e1.stderr, e2.stderr)


def test_lyapunov_shift_invariance(chaotic_map):
    p0 = hl.AnnulusPoint(1.1, 0.7)
    e1 = hl.lyapunov_top(chaotic_map, p0, 200_000, burn_in=1000)
    e2 = hl.lyapunov_top(chaotic_map, chaotic_map(p0), 200_000, burn_in=1000)
    assert abs(e1.lambda1 - e2.lambda1) <= 2 * (e1.stderr + e2.stderr)


def test_lyapunov_requires_enough_iterates(chaotic_map):
    with pytest.raises(ValueError):
        hl.lyapunov_top(chaotic_map, hl.AnnulusPoint(1.0, 1.0), 100)


def test_lyapunov_full_kind_smoke(chaotic_system):
    rm = hl.ReturnMap.full(chaotic_system, 40, 1.0, tol=1e-8)
    red = hl.ReturnMap.reduced(chaotic_system, 40, 1.0)
    p, q = hl.AnnulusPoint(1.2, 0.4), hl.AnnulusPoint(1.2, 0.4)
    # one step of the fd-jacobian product machinery against the analytic path
    Jf = rm.jacobian(p)
    Jr = red.jacobian(q)
    assert np.allclose(Jf, Jr, rtol=1e-4, atol=1e-6)


def test_empirical_measure_mass_and_birkhoff(chaotic_map):
    p0 = hl.AnnulusPoint(1.05, 2.0)
    h = hl.empirical_measure(chaotic_map, p0, 1_000_000, burn_in=1000)
    assert h.counts.sum() == pytest.approx(1.0, abs=1e-12)
    assert h.birkhoff["one"] == pytest.approx(1.0, abs=0.0)
    # histogram-weighted observable integral against the exact Birkhoff sum
    tc = 0.5 * (h.theta_edges[:-1] + h.theta_edges[1:])
    integral = float((h.counts.sum(axis=0) * np.sin(tc)).sum())
    assert integral == pytest.approx(h.birkhoff["sin_theta"], abs=1e-3)


def test_empirical_measure_two_seeds_close(chaotic_map):
    hists = []
    for seed in (11, 12):
        p0 = hl.random_annulus_point(hl.make_rng(seed), chaotic_map.system.K4)
        hists.append(hl.empirical_measure(chaotic_map, p0, 1_000_000,
                                          burn_in=10_000))
    assert hl.tv_distance(*hists) <= 0.05


def test_pushforward_changes_little(chaotic_map):
    # transfer-operator fixed-point proxy: pushing the occupation histogram
    # forward changes no bin by more than 2/sqrt(n), once the bin width
    # resolves the invariant density and the subsampling resolves the
    # angular stretching (~L bins per bin)
    n = 4_000_000
    p0 = hl.AnnulusPoint(1.05, 2.0)
    h = hl.empirical_measure(chaotic_map, p0, n, burn_in=10_000,
                             bins=(8, 512))
    _, per_bin = hl.pushforward_tv(chaotic_map, h, subsample=128)
    assert per_bin <= 2.0 / math.sqrt(n)


def test_escape_detection():
    sys_ = hl.HopfSystem(L=3.0)
    rm = hl.ReturnMap.reduced_raw(sys_, 0.04)
    with pytest.raises(hl.EscapedError):
        hl.lyapunov_top(rm, hl.AnnulusPoint(1.9, math.pi / 2), 20_000,
                        burn_in=0)


def test_observable_series_kinds_agree(chaotic_map):
    p0 = hl.AnnulusPoint(1.3, 0.9)
    fast = hl.observable_series(chaotic_map, "sin_theta", p0, 200, burn_in=5)
    slow = hl.observable_series(chaotic_map, lambda p: math.sin(p.theta),
                                p0, 200, burn_in=5)
    assert np.max(np.abs(fast - slow)) <= 1e-12


def test_autocorrelation_chaotic_decays(chaotic_map):
    p0 = hl.AnnulusPoint(1.2, 2.5)
    res = hl.autocorrelation(chaotic_map, "sin_theta", p0, 1_000_000,
                             max_lag=32, burn_in=10_000)
    assert res.values[0] == pytest.approx(1.0, abs=1e-12)
    assert res.flag in ("decaying", "below-noise")
    assert abs(res.values[20]) <= 0.05


def test_autocorrelation_periodic_regime_flagged():
    # weak amplitude: orbits fall onto an attracting period-2 cycle, whose
    # observable correlations never decay
    sys_ = hl.HopfSystem(L=1.5)
    rm = hl.ReturnMap.singular(sys_, math.pi / 2)
    res = hl.autocorrelation(rm, "sin_theta", hl.AnnulusPoint(1.0, 0.3),
                             200_000, max_lag=64, burn_in=1000)
    assert res.flag == "non-decaying"
    assert res.decay_rate is None


def test_autocorrelation_constant_observable(chaotic_map):
    with pytest.raises(hl.DegenerateObservableError):
        hl.autocorrelation(chaotic_map, lambda p: 1.0,
                           hl.AnnulusPoint(1.0, 1.0), 50_000, max_lag=8)


def test_clt_iid_surrogate_control(chaotic_map):
    # shuffling the orbit destroys correlations: the harness must accept it
    p0 = hl.AnnulusPoint(1.2, 2.5)
    x = hl.observable_series(chaotic_map, "sin_theta", p0, 1_000_000,
                             burn_in=10_000)
    rng = hl.make_rng(3)
    rng.shuffle(x)
    res = hl.clt_from_series(x, block_len=1000)
    assert res.statistic <= res.critical_5pct


def test_clt_chaotic_map(chaotic_map):
    p0 = hl.AnnulusPoint(1.2, 2.5)
    res = hl.clt_check(chaotic_map, "sin_theta", p0, 1_000_000,
                       block_len=1000, burn_in=10_000)
    assert res.statistic <= 1.5 * res.critical_5pct


def test_clt_coboundary_zero_variance(chaotic_map):
    # observable psi(T x) - psi(x) telescopes: degenerate limiting variance
    p0 = hl.AnnulusPoint(1.2, 2.5)
    n = 1_000_000
    s = hl.observable_series(chaotic_map, "sin_theta", p0, n + 1, burn_in=10_000)
    cob = s[1:] - s[:-1]
    with pytest.raises(hl.ZeroVarianceError):
        hl.clt_from_series(cob, block_len=1000)


def test_basin_sample_fraction(chaotic_map):
    res = hl.basin_sample(chaotic_map, (6, 12), 50_000, threshold=0.0,
                          burn_in=2000)
    assert res.fraction_positive == pytest.approx(1.0)
    assert res.escape_count == 0
    # disjoint sub-grids agree on the chaotic fraction
    top = res.lambda_grid[:3] > 0.0
    bot = res.lambda_grid[3:] > 0.0
    assert abs(top.mean() - bot.mean()) <= 0.05


def test_basin_sample_infinite_threshold(chaotic_map):
    res = hl.basin_sample(chaotic_map, (4, 8), 20_000, threshold=math.inf,
                          burn_in=1000)
    assert res.fraction_positive == 0.0


def test_basin_sample_counts_escapes():
    sys_ = hl.HopfSystem(L=3.0)
    rm = hl.ReturnMap.reduced_raw(sys_, 0.04)
    res = hl.basin_sample(rm, (6, 12), 20_000, burn_in=100)
    assert res.escape_count > 0


def test_lyapunov_over_parameters(chaotic_system):
    mus, lams, errs, esc = hl.lyapunov_over_parameters(
        chaotic_system, [1, 10, 100], a=1.0, n=50_000, burn_in=1000, seed=5)
    assert len(mus) == 3
    assert (~esc).all()
    assert (lams > 0).any()


def test_reproducible_runs(chaotic_map):
    p0 = hl.random_annulus_point(hl.make_rng(123), chaotic_map.system.K4)
    q0 = hl.random_annulus_point(hl.make_rng(123), chaotic_map.system.K4)
    assert p0 == q0
    e1 = hl.lyapunov_top(chaotic_map, p0, 20_000, burn_in=100)
    e2 = hl.lyapunov_top(chaotic_map, q0, 20_000, burn_in=100)
    assert e1.lambda1 == e2.lambda1 and e1.stderr == e2.stderr
