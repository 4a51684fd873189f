import math

import gmpy2
import numpy as np
import pytest

import hopflab as hl
from hopflab.circle import TWO_PI
from hopflab.misiurewicz import _largest_arc_midpoint

RNG = np.random.default_rng(42)


# ---------------------------------------------------------------------------
# critical-curve dynamics
# ---------------------------------------------------------------------------

def test_critical_curve_zero_steps(hopf_family):
    crit = hl.critical_points(hopf_family, 10.0)
    assert hl.critical_curve(hopf_family, 1, 0, 0.3, 10.0, crit) == crit.points[0]


def test_critical_curve_one_step_closed_form(hopf_family):
    # Phi(pi/2) = 1, so the first image is (pi/2 + L + a) mod 2*pi
    a, L = 0.9, 10.0
    crit = hl.critical_points(hopf_family, L)
    got = hl.critical_curve(hopf_family, 1, 1, a, L, crit)
    assert got == pytest.approx((math.pi / 2 + L + a) % TWO_PI, abs=1e-11)


def test_critical_curve_matches_orbit_iteration(hopf_family):
    a, L = 1.0, 50.0
    crit = hl.critical_points(hopf_family, L)
    got = hl.critical_curve(hopf_family, 2, 3, a, L, crit)
    tr = hl.iterate_orbit(hopf_family, a, L, crit.points[1], 3, crit)
    assert abs(got - tr.states[-1]) <= 1e-12


def test_gamma_jacobian_sine(hopf_family):
    assert hl.gamma_jacobian(hopf_family, 0.0, 10.0) == pytest.approx(-2.0)


def test_gamma_jacobian_degenerate_guard(hopf_family):
    fake = hl.CriticalStructure(points=(0.5, 2.5), values_phi=(0.7, 0.7),
                                min_abs_second=1.0, separation=2.0)
    with pytest.raises(hl.DegenerateJacobianError):
        hl.gamma_jacobian(hopf_family, 0.0, 10.0, critical=fake)


def test_gamma_jacobian_finite_difference_oracle(wavy_family):
    a, L, h = 0.4, 9.0, 1e-6
    crit = hl.critical_points(wavy_family, L)

    def gamma1(i, aa, LL):
        return hl.eval_family_lift(wavy_family, aa, LL, crit.points[i - 1])

    J = np.array([
        [(gamma1(1, a + h, L) - gamma1(1, a - h, L)) / (2 * h),
         (gamma1(1, a, L + h) - gamma1(1, a, L - h)) / (2 * h)],
        [(gamma1(2, a + h, L) - gamma1(2, a - h, L)) / (2 * h),
         (gamma1(2, a, L + h) - gamma1(2, a, L - h)) / (2 * h)],
    ])
    fd_det = float(np.linalg.det(J))
    assert hl.gamma_jacobian(wavy_family, a, L, crit) == pytest.approx(
        fd_det, rel=1e-6)


# ---------------------------------------------------------------------------
# expansion outside V
# ---------------------------------------------------------------------------

def test_outside_expansion_pointwise_bound_oracle(hopf_family):
    # oracle: on a 10^5 grid, every point outside V = {|f'| <= K} has
    # |f'| > K, so every excursion product beats K^n factor by factor
    L, K = 200.0, 8.0
    grid = np.linspace(0.0, TWO_PI, 100_000, endpoint=False)
    fp = np.abs(L * np.cos(grid))
    outside = fp > K
    assert (fp[outside] > K).all()
    cert = hl.build_certificate(hopf_family, L, K, horizon_N=1000)
    res = hl.check_outside_expansion(hopf_family, 1.0, L, cert, samples=2000)
    assert res.passed
    assert res.min_ratio >= cert.d0
    assert cert.M0 == 1 and cert.d0 == 1.0


def test_outside_expansion_impossible_constant(hopf_family):
    # K above sup|f'| makes V the whole circle: nothing can be certified
    L = 50.0
    cert = hl.build_certificate(hopf_family, L, K=8.0, horizon_N=100)
    cert.K = 100.0
    cert.lambda0 = math.log(100.0)
    cert.V_description = "{x : |f'(x)| <= 100}"
    res = hl.check_outside_expansion(hopf_family, 1.0, L, cert, samples=1000)
    assert not res.passed


def test_outside_expansion_requires_enough_samples(hopf_family):
    cert = hl.build_certificate(hopf_family, 200.0, 8.0, horizon_N=100)
    with pytest.raises(ValueError):
        hl.check_outside_expansion(hopf_family, 1.0, 200.0, cert, samples=10)


# ---------------------------------------------------------------------------
# critical-orbit checks
# ---------------------------------------------------------------------------

def test_critical_orbit_direct_hit_fails(hopf_family):
    # choose a so that f(c1) = c2 exactly: a = c2 - zeta - L
    L = 30.0
    crit = hl.critical_points(hopf_family, L)
    a = (crit.points[1] - hopf_family.zeta - L) % TWO_PI
    cert = hl.build_certificate(hopf_family, L,
                                hl.choose_expansion_constant(hopf_family, L),
                                horizon_N=10)
    res = hl.check_critical_orbits(hopf_family, a, L, cert, N=5)
    assert not res.passed
    assert res.first_violation == 1


def test_critical_orbit_check_rejects_zero_horizon(hopf_family):
    cert = hl.build_certificate(hopf_family, 30.0, 2.0, horizon_N=10)
    with pytest.raises(ValueError):
        hl.check_critical_orbits(hopf_family, 0.1, 30.0, cert, N=0)


def test_certified_pair_passes_horizon(certified_100):
    a, L, cert = certified_100
    res = hl.check_critical_orbits(hl.HOPF_FAMILY, a, L, cert, N=10_000)
    assert res.passed
    assert res.min_distance >= cert.delta1
    assert res.min_abs_derivative > cert.K
    assert res.reliable_horizon >= 10_000


def test_certificate_prefix_property(certified_100):
    # passing at horizon N implies passing at N/2 with the same margin
    a, L, cert = certified_100
    full = hl.check_critical_orbits(hl.HOPF_FAMILY, a, L, cert, N=10_000)
    half = hl.check_critical_orbits(hl.HOPF_FAMILY, a, L, cert, N=5_000)
    assert full.passed and half.passed
    assert half.min_distance >= full.min_distance - 1e-12


def test_certificate_constants(certified_100):
    _, L, cert = certified_100
    crit = hl.critical_points(hl.HOPF_FAMILY, float(L))
    d2 = hl.delta2_of(hl.HOPF_FAMILY, crit)
    assert cert.lambda0 > 0
    assert 0 < cert.d0 <= 1
    assert cert.delta1 == pytest.approx(0.5 * cert.sigma)
    assert 0.5 * cert.sigma < d2
    # V is contained in the sigma/2 neighbourhood of the critical set
    grid = np.linspace(0.0, TWO_PI, 20_000, endpoint=False)
    fp = np.abs(float(L) * np.cos(grid))
    in_V = grid[fp <= cert.K]
    dists = np.array([hl.distance_to_set(t, crit.points) for t in in_V])
    assert dists.max() <= 0.5 * cert.sigma


# ---------------------------------------------------------------------------
# recovery and distortion
# ---------------------------------------------------------------------------

def test_recovery_estimate_growth_bound(certified_300):
    a, L, cert = certified_300
    af, Lf = float(a), float(L)
    crit = hl.critical_points(hl.HOPF_FAMILY, Lf)
    c = crit.points[0]
    K2 = hl.HOPF_FAMILY.phi.c2_norm_bound()
    n_x, growth = hl.recovery_estimate(hl.HOPF_FAMILY, af, Lf, cert,
                                       c, c + 1e-4, crit)
    assert n_x > 1
    k3 = crit.k1 / (8.0 * K2)
    assert growth >= k3 * cert.K ** n_x
    # the stated bound also holds at the stronger constant 8
    assert growth >= k3 * 8.0 ** n_x


def test_recovery_no_escape_for_critical_point(certified_300):
    a, L, cert = certified_300
    crit = hl.critical_points(hl.HOPF_FAMILY, float(L))
    c = crit.points[0]
    with pytest.raises(hl.NoEscapeError):
        hl.recovery_estimate(hl.HOPF_FAMILY, float(a), float(L), cert, c, c,
                             crit, max_steps=40)


def test_recovery_boundary_point_needs_two_steps(certified_300):
    a, L, cert = certified_300
    af, Lf = float(a), float(L)
    crit = hl.critical_points(hl.HOPF_FAMILY, Lf)
    c = crit.points[0]
    x = c + math.asin(cert.K * (1 - 1e-9) / Lf)   # |f'(x)| = K up to rounding
    n_x, _ = hl.recovery_estimate(hl.HOPF_FAMILY, af, Lf, cert, c, x, crit)
    assert n_x >= 2


def test_local_distortion_trivial_cases(hopf_family):
    assert hl.local_distortion_ratio(hopf_family, 0.3, 50.0, 1.0, 1.0, 5) == 1.0
    assert hl.local_distortion_ratio(hopf_family, 0.3, 50.0, 1.0, 2.0, 0) == 1.0


def test_local_distortion_ratio_in_range(certified_300):
    a, L, cert = certified_300
    af, Lf = float(a), float(L)
    p = float(cert.pin.fixed_point)
    ratio = hl.local_distortion_ratio(hl.HOPF_FAMILY, af, Lf,
                                      p + 1.5e-12, p - 1.5e-12, 5, K=cert.K)
    assert 0.5 <= ratio <= 2.0
    assert ratio == pytest.approx(1.0, abs=1e-4)


def test_local_distortion_precondition_violation(certified_300):
    a, L, cert = certified_300
    p = float(cert.pin.fixed_point)
    with pytest.raises(hl.PreconditionViolatedError) as exc:
        hl.local_distortion_ratio(hl.HOPF_FAMILY, float(a), float(L),
                                  p + 5e-4, p - 5e-4, 5, K=cert.K)
    assert exc.value.step >= 0


def test_distortion_sampled_pairs_within_bounds(certified_300):
    # every precondition-satisfying pair measures a ratio in [1/2, 2];
    # random start points often wander into C_{sigma/2} within 4 steps and
    # are skipped, hence the generous sample count
    a, L, cert = certified_300
    af, Lf = float(a), float(L)
    crit = hl.critical_points(hl.HOPF_FAMILY, Lf)
    count = 0
    for theta in RNG.uniform(0.0, TWO_PI, 400):
        if hl.distance_to_set(theta, crit.points) < 0.55 * cert.sigma:
            continue
        try:
            r = hl.local_distortion_ratio(hl.HOPF_FAMILY, af, Lf,
                                          theta + 5e-13, theta - 5e-13, 4,
                                          K=cert.K, critical=crit)
        except hl.PreconditionViolatedError:
            continue
        assert 0.5 <= r <= 2.0
        count += 1
    assert count >= 5


# ---------------------------------------------------------------------------
# the search
# ---------------------------------------------------------------------------

def test_find_pair_window_and_certificate(certified_100):
    a, L, cert = certified_100
    assert 100.0 <= float(L) <= 100.0 + math.pi
    assert 0.0 <= float(a) < TWO_PI
    assert cert.evidence["orbit_min_distance"] >= cert.delta1
    hyp = cert.evidence["hypotheses"]
    assert hyp["H1"] and hyp["H2"] and hyp["H3"]
    assert hyp["parameter_increment_ok"]


def test_find_pair_rejects_small_L(hopf_family):
    with pytest.raises(ValueError):
        hl.find_misiurewicz_pair(hopf_family, 5.0)


def test_resonance_alignment_slope(hopf_family):
    # the L-derivative gap of the two critical curves equals Phi(c2)-Phi(c1),
    # so an L-shift of pi realigns the critical values for the sine family
    crit = hl.critical_points(hopf_family, 40.0)
    h = 1e-6
    a = 0.3

    def g(i, L):
        return hl.eval_family_lift(hopf_family, a, L, crit.points[i - 1])

    d1 = (g(1, 40.0 + h) - g(1, 40.0 - h)) / (2 * h)
    d2 = (g(2, 40.0 + h) - g(2, 40.0 - h)) / (2 * h)
    assert abs(d2 - d1) == pytest.approx(2.0, rel=1e-6)
    assert abs(TWO_PI / abs(d2 - d1)) == pytest.approx(math.pi, rel=1e-6)


def test_pinned_target_near_arc_midpoint(certified_100):
    a, L, cert = certified_100
    crit = hl.critical_points(hl.HOPF_FAMILY, float(L))
    z = _largest_arc_midpoint(crit)
    p = float(cert.pin.fixed_point)
    assert hl.circle_distance(p, z) <= TWO_PI / float(L) * 4
    assert cert.pin.distance_to_critical >= math.pi / 2 - 0.05


def test_search_region_invariants(certified_100):
    a, L, cert = certified_100
    region = cert.evidence["region"]
    crit = hl.critical_points(hl.HOPF_FAMILY, float(L))
    # the parameter-increment inequality from the nested-set argument
    norm = max(1.0, hl.HOPF_FAMILY.phi.sup_norm_bound(0))
    lhs = 2 * math.sqrt(2) * norm * max(region.Delta1[1] - region.Delta1[0],
                                        region.Delta2[1] - region.Delta2[0])
    assert lhs < region.epsilon1
    # target intervals avoid the delta1 critical neighbourhood
    for I in (region.I1, region.I2):
        for t in np.linspace(I[0], I[1], 16):
            assert hl.distance_to_set(t, crit.points) > cert.delta1


def test_nested_refinement_monotone(certified_100):
    history = certified_100[2].evidence["refinement_history"]
    assert len(history) >= 2

    def contained(inner, outer):
        return (outer[0] <= inner[0] + 1e-15 and outer[1] <= inner[1] + 1e-15
                and inner[2] <= outer[2] + 1e-15 and inner[3] <= outer[3] + 1e-15)

    for prev, nxt in zip(history, history[1:]):
        for cell in nxt:
            assert any(contained(cell, parent) for parent in prev)


def test_refined_cell_contains_pin_neighbourhood(certified_100):
    a, L, cert = certified_100
    af, Lf = float(a), float(L)
    for gen in cert.evidence["refinement_history"]:
        assert any(c[0] - 1e-12 <= af <= c[2] + 1e-12
                   and c[1] - 1e-12 <= Lf <= c[3] + 1e-12 for c in gen)


def test_grid_search_oracle_agrees_with_refinement(certified_100):
    # exhaustive grid over the search rectangle, maximising the minimum
    # orbit distance over a short horizon, against the nested-cell winner
    a, L, cert = certified_100
    region = cert.evidence["region"]
    crit = hl.critical_points(hl.HOPF_FAMILY, float(L))

    def objective(aa, LL, steps=3):
        worst = math.inf
        for c in crit.points:
            x = c
            for _ in range(steps):
                x = float(hl.eval_family(hl.HOPF_FAMILY, aa, LL, x))
                worst = min(worst, hl.distance_to_set(x, crit.points))
        return worst

    best = -math.inf
    for aa in np.linspace(region.Delta1[0], region.Delta1[1], 41):
        for LL in np.linspace(region.Delta2[0], region.Delta2[1], 41):
            best = max(best, objective(aa, LL))
    cell = cert.evidence["refinement_best_cell"]
    cell_obj = objective(0.5 * (cell[0] + cell[2]), 0.5 * (cell[1] + cell[3]))
    pin_obj = objective(float(a), float(L))
    assert pin_obj >= best - 1e-6          # the pin is optimal up to grid error
    assert cell_obj >= best - 0.05         # the refinement lands nearby


def test_search_odd_resonance_branch():
    # L window [97, 97+pi) forces an odd multiple of pi, exercising the
    # shifted fixed-point branch
    a, L, cert = hl.find_misiurewicz_pair(
        hl.HOPF_FAMILY, 97.0, hl.SearchConfig(horizon_N=500, depth_cap=10))
    assert 97.0 <= float(L) <= 97.0 + math.pi
    m = round(float(L) / math.pi)
    assert m % 2 == 1
    expected = math.pi / 2 - math.asin(1.0 / m)
    assert cert.pin.distance_to_critical == pytest.approx(expected, abs=1e-9)


def test_search_needs_two_critical_points():
    fam = hl.OneDFamily(zeta=0.0, phi=hl.TrigPolynomial(sin_coeffs=(0.0, 1.0)))
    with pytest.raises(hl.SearchExhaustedError):
        hl.find_misiurewicz_pair(fam, 50.0,
                                 hl.SearchConfig(horizon_N=100, depth_cap=6))


def test_search_generic_family(wavy_family):
    a, L, cert = hl.find_misiurewicz_pair(
        wavy_family, 60.0, hl.SearchConfig(horizon_N=300, depth_cap=10))
    crit = hl.critical_points(wavy_family, float(L))
    window = TWO_PI / abs(crit.values_phi[1] - crit.values_phi[0])
    assert 60.0 <= float(L) <= 60.0 + window + 1e-9
    res = hl.check_critical_orbits(wavy_family, a, L, cert, N=300, critical=crit)
    assert res.passed


# ---------------------------------------------------------------------------
# parameter-derivative growth (chain-rule recursion and finite differences)
# ---------------------------------------------------------------------------

def test_parameter_derivative_growth(certified_40):
    # half-K^n growth of the parameter derivative of the critical curves,
    # at a moderate K (the first derivative is exactly 1, which caps the
    # exponential base at 2; the per-step expansion floor K_cert^3 is far
    # larger, so the derivative also tracks ~ floor^(n-1))
    a, L, cert = certified_40
    af, Lf = float(a), float(L)
    crit = hl.critical_points(hl.HOPF_FAMILY, Lf)
    K_mod = 2.0
    floor = cert.K ** 3     # per-step expansion outside the delta1 neighbourhood
    for c in crit.points:
        # chain rule: d gamma_{n+1} = f'(gamma_n) d gamma_n + 1
        x, d = c, 0.0
        for n in range(1, 9):
            fp = Lf * math.cos(x)
            d = fp * d + 1.0
            x = float(hl.eval_family(hl.HOPF_FAMILY, af, Lf, x))
            assert hl.distance_to_set(x, crit.points) >= cert.delta1
            assert abs(d) >= 0.5 * K_mod ** n - 1e-12
            if n >= 2:
                assert abs(d) >= 0.5 * floor ** (n - 1)
        # finite-difference cross-check for n <= 5
        h = 1e-11
        for n in range(1, 6):
            xp, xm = c, c
            for _ in range(n):
                xp = float(hl.eval_family(hl.HOPF_FAMILY, af + h, Lf, xp))
                xm = float(hl.eval_family(hl.HOPF_FAMILY, af - h, Lf, xm))
            diff = (xp - xm + math.pi) % TWO_PI - math.pi
            fd = abs(diff / (2 * h))
            assert fd >= 0.5 * K_mod ** n
            if n >= 2:
                assert fd >= 0.4 * floor ** (n - 1)


# ---------------------------------------------------------------------------
# rank-one checklist pieces
# ---------------------------------------------------------------------------

def test_transversality_geometric_floor(certified_100):
    a, L, _ = certified_100
    for K, floor in ((3.0, 0.5), (8.0, 1.0 - 1.0 / 7.0)):
        margin = hl.transversality_margin(hl.HOPF_FAMILY, a, L, K, truncation=50)
        assert margin >= floor


def test_transversality_truncation_consistency(certified_100):
    a, L, _ = certified_100
    m50 = hl.transversality_margin(hl.HOPF_FAMILY, a, L, 8.0, truncation=50)
    m200 = hl.transversality_margin(hl.HOPF_FAMILY, a, L, 8.0, truncation=200)
    assert abs(m50 - m200) <= 2.0 * 8.0 ** -50 / 7.0 + 1e-40


def test_transversality_precondition_guard(hopf_family):
    # at a generic non-certified parameter the orbit of f(c) falls below K^k
    with pytest.raises(ValueError):
        hl.transversality_margin(hopf_family, 0.37, 30.0, K=29.0, truncation=50)


def test_turn_derivatives(default_system):
    rm = hl.ReturnMap.singular(default_system, 0.0)
    crit = hl.critical_points(hl.HOPF_FAMILY, default_system.L)
    vals = hl.turn_nondegeneracy(rm, crit)
    assert vals[0] == pytest.approx(10.0, rel=1e-12)
    assert vals[1] == pytest.approx(-10.0, rel=1e-12)
    # finite-difference oracle in the radial coordinate
    h = 1e-6
    for c, v in zip(crit.points, vals):
        up = rm.map_arrays(np.array(1.0 + h), np.array(c))[1]
        dn = rm.map_arrays(np.array(1.0 - h), np.array(c))[1]
        assert (up - dn) / (2 * h) == pytest.approx(v, rel=1e-5)


def test_turn_derivatives_need_singular_kind(default_system):
    rm = hl.ReturnMap.reduced(default_system, 1, 0.0)
    crit = hl.critical_points(hl.HOPF_FAMILY, default_system.L)
    with pytest.raises(ValueError):
        hl.turn_nondegeneracy(rm, crit)


def test_mixing_full_covering(hopf_family):
    g6a, Q, N = hl.mixing_conditions(hopf_family, 0.7, 10.0, K=8.0 + 1e-3)
    assert g6a
    assert (Q == 1).all()
    assert N == 1


def test_mixing_small_amplitude_fails(hopf_family):
    with pytest.raises(hl.NotEventuallyPositiveError):
        hl.mixing_conditions(hopf_family, 0.7, 0.1, K=8.0 + 1e-3)


@pytest.mark.parametrize("a,L", [(1.1, 2.0), (2.0, 2.6), (1.1, 3.2), (4.0, 5.0)])
def test_covering_matrix_against_grid_oracle(wavy_family, a, L):
    crit = hl.critical_points(wavy_family, L)
    Q = hl.covering_matrix(wavy_family, a, L, crit)
    pts = sorted(crit.points)
    r = len(pts)
    intervals = [(pts[i], pts[(i + 1) % r] + (TWO_PI if i + 1 == r else 0))
                 for i in range(r)]
    bins = 512
    for i, (lo, hi) in enumerate(intervals):
        occupancy = np.zeros(bins, dtype=bool)
        for t in np.linspace(lo, hi, 10_000):
            img = float(hl.eval_family(wavy_family, a, L, t))
            occupancy[int(img / TWO_PI * bins) % bins] = True
        for j, (jlo, jhi) in enumerate(intervals):
            idx = [int((x % TWO_PI) / TWO_PI * bins) % bins
                   for x in np.linspace(jlo + 0.02, jhi - 0.02, 200)]
            covered = all(occupancy[k] for k in idx)
            assert covered == bool(Q[i, j])


def test_rank_one_report_assembly(certified_100):
    a, L, cert = certified_100
    rep = hl.rank_one_report(hl.HOPF_FAMILY, a, L, cert, K_mix=8.0 + 1e-3,
                             horizon_N=1000)
    assert rep.g3_misiurewicz
    assert rep.g4_transversality_margin >= 1.0 - 1.0 / 7.001
    assert rep.g5_turn_derivatives[0] == pytest.approx(float(L), rel=1e-9)
    assert rep.g5_turn_derivatives[1] == pytest.approx(-float(L), rel=1e-9)
    assert rep.g6a_expansion
    assert (rep.g6b_matrix_Q == 1).all()
    assert rep.g6b_minimal_N == 1
