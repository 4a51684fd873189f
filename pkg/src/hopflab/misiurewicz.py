"""Misiurewicz certificates and the constructive two-parameter search.

A circle map f is Misiurewicz (here, at finite horizon) when both critical
orbits stay uniformly away from the critical set while the derivative
expands outside a small critical neighbourhood V = {x : |f'(x)| <= K}.
This module

  * checks the expansion conditions outside V and the recovery/distortion
    estimates near V,
  * runs the constructive search for a pair (a*, L*) whose critical orbits
    are certified away from the critical set up to a requested horizon, and
  * evaluates the remaining rank-one checklist items for the singular-limit
    family: parameter transversality, turn nondegeneracy, and the mixing
    (covering-matrix) condition.

The search resolves the resonance L*|Phi(c2)-Phi(c1)| in 2*pi*Z, which makes
both critical values coincide, and then lands that common value on a fixed
point p of the map itself, solved in arbitrary precision (gmpy2/MPFR).  Both
critical orbits then sit on p forever; a short verified prefix plus a
one-line drift bound certifies any requested horizon without iterating at
full precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import gmpy2
import numpy as np

from .circle import (
    TWO_PI,
    CriticalStructure,
    OneDFamily,
    circle_distance,
    critical_points,
    distance_to_set,
    eval_family,
    eval_family_lift,
    wrap_angle,
)

#: default auxiliary expansion constant; K > 8 gives the mixing condition,
#: K > 2 suffices for transversality.  The search caps it by the geometric
#: constraint sigma/2 < delta2 (see choose_expansion_constant).
K_DEFAULT = 8.0 + 1e-3

#: empirical smallest kick amplitude for which the adaptive K stays safely > 1
L0_DEFAULT = 20.0


class DegenerateJacobianError(ValueError):
    """Critical values coincide; the two parameters are not independent."""


class NoEscapeError(RuntimeError):
    """A point in V never separated from the critical orbit within horizon."""


class PreconditionViolatedError(RuntimeError):
    """A distortion-estimate hypothesis failed; carries the offending step."""

    def __init__(self, step: int, reason: str):
        super().__init__(f"precondition violated at step {step}: {reason}")
        self.step = step
        self.reason = reason


class SearchExhaustedError(RuntimeError):
    """No surviving parameter cell at the configured depth/horizon."""


class NotEventuallyPositiveError(RuntimeError):
    """No power of the covering matrix Q is strictly positive."""


# ---------------------------------------------------------------------------
# result records
# ---------------------------------------------------------------------------

@dataclass
class PinEvidence:
    """Arbitrary-precision witness that both critical orbits sit on a fixed point.

    residual_log10 bounds log10 of max(|f(c1)-p|, |f(c2)-p|, |f(p)-p|)
    evaluated at `precision_bits`; growth_log10 is log10 of the global
    derivative bound sup|f'| entering the drift estimate.
    """

    fixed_point: object          # gmpy2.mpfr
    a_star: object               # gmpy2.mpfr
    L_star: object               # gmpy2.mpfr
    critical_mp: tuple           # critical points refined to precision_bits
    precision_bits: int
    residual_log10: float
    growth_log10: float
    distance_to_critical: float


@dataclass
class MisiurewiczCertificate:
    """Constants of the finite-horizon Misiurewicz check plus evidence."""

    K: float
    sigma: float                 # 2 k1^-1 L_eff^-1 K^3
    lambda0: float               # log K
    M0: int
    d0: float
    delta1: float                # critical-set exclusion radius (= sigma/2)
    horizon_N: int
    V_description: str
    evidence: dict = field(default_factory=dict)
    pin: PinEvidence | None = None


@dataclass
class SearchRegion:
    """Parameter rectangle and target intervals of the nested-set search."""

    Delta1: tuple                # (lo, hi) in a-space
    Delta2: tuple                # (lo, hi) in L-space
    I1: tuple
    I2: tuple
    epsilon1: float
    n0: int
    k0: float                    # |Phi(c2) - Phi(c1)| scaled by beta0
    lambdaM: float               # max eigenvalue of DGamma1^T DGamma1


@dataclass
class OrbitCheckResult:
    passed: bool
    min_distance: float
    min_abs_derivative: float
    reliable_horizon: int
    first_violation: int | None = None
    notes: str = ""


@dataclass
class ExpansionCheckResult:
    passed: bool
    min_ratio: float                 # min |(f^n)'(x)| / e^(lambda0 n)
    worst_witness: tuple | None      # (x0, n) achieving the minimum
    samples: int


@dataclass
class RankOneReport:
    g3_misiurewicz: bool
    g3_certificate: MisiurewiczCertificate
    g4_transversality_margin: float
    g5_turn_derivatives: list
    g6a_expansion: bool
    g6b_matrix_Q: np.ndarray
    g6b_minimal_N: int


# ---------------------------------------------------------------------------
# critical-curve dynamics
# ---------------------------------------------------------------------------

def critical_curve(family: OneDFamily, i: int, n: int, a: float, L: float,
                   critical: CriticalStructure | None = None,
                   region: SearchRegion | None = None) -> float:
    """n-th forward image of the i-th critical point (i is 1-based)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    crit = critical if critical is not None else critical_points(family, L)
    if region is not None:
        if not (region.Delta1[0] <= a <= region.Delta1[1]
                and region.Delta2[0] <= L <= region.Delta2[1]):
            raise ValueError("(a, L) outside the search region")
    x = crit.points[i - 1]
    for _ in range(n):
        x = float(eval_family(family, a, L, x))
    return x


def gamma_jacobian(family: OneDFamily, a: float, L: float,
                   critical: CriticalStructure | None = None) -> float:
    """det of d(gamma_1^(1), gamma_1^(2))/d(a, L) = beta0*(Phi(c2)-Phi(c1)).

    gamma_1^(i) = zeta + beta0*L*Phi(c_i) + a and the critical points do not
    move with (a, L), so the matrix is [[1, beta0*Phi(c1)], [1, beta0*Phi(c2)]].
    """
    crit = critical if critical is not None else critical_points(family, L)
    if len(crit.points) != 2:
        raise ValueError("two critical points required")
    det = family.beta0 * (crit.values_phi[1] - crit.values_phi[0])
    if abs(det) < 1e-10:
        raise DegenerateJacobianError(
            f"|Phi(c2) - Phi(c1)| = {abs(det):.2e}: parameters not independent"
        )
    return det


# ---------------------------------------------------------------------------
# geometric constants
# ---------------------------------------------------------------------------

def delta2_of(family: OneDFamily, critical: CriticalStructure) -> float:
    """Largest radius with |Phi''| > k1 throughout the critical neighbourhood.

    Capped just below half the critical separation so the neighbourhoods
    stay disjoint.
    """
    d2 = family.phi.deriv(2)
    k1 = critical.k1
    cap = 0.4999 * critical.separation
    best = cap
    for c in critical.points:
        for sign in (+1.0, -1.0):
            f = lambda t: abs(float(d2(c + sign * t))) - k1
            if f(cap) >= 0:
                continue
            a, b = 0.0, cap
            for _ in range(80):
                mid = 0.5 * (a + b)
                if f(mid) > 0:
                    a = mid
                else:
                    b = mid
            best = min(best, a)
    return best


def choose_expansion_constant(family: OneDFamily, L: float,
                              critical: CriticalStructure | None = None,
                              orbit_distance: float | None = None,
                              K_cap: float = K_DEFAULT) -> float:
    """Largest usable K: keeps sigma/2 < delta2 and sigma below the orbit gap.

    sigma = 2 k1^-1 L_eff^-1 K^3 is the radius where |f'| >= K^3 kicks in;
    the recovery estimate additionally needs the certified critical orbit to
    stay outside the full sigma-neighbourhood, hence the orbit_distance/2 cap.
    """
    crit = critical if critical is not None else critical_points(family, L)
    L_eff = abs(family.amplitude(L))
    d2 = delta2_of(family, crit)
    bound = crit.k1 * L_eff * (d2 if orbit_distance is None
                               else min(d2, 0.5 * orbit_distance))
    K = min(K_cap, 0.97 * bound ** (1.0 / 3.0))
    if K <= 1.0:
        raise ValueError(
            f"L = {L} too small: adaptive expansion constant {K:.3f} <= 1")
    return K


def build_certificate(family: OneDFamily, L: float, K: float, horizon_N: int,
                      critical: CriticalStructure | None = None) -> MisiurewiczCertificate:
    """Assemble the constant block; evidence fields are filled by the checks."""
    crit = critical if critical is not None else critical_points(family, L)
    L_eff = abs(family.amplitude(L))
    sigma = 2.0 * K**3 / (crit.k1 * L_eff)
    return MisiurewiczCertificate(
        K=K,
        sigma=sigma,
        lambda0=math.log(K),
        M0=1,
        d0=1.0,
        delta1=0.5 * sigma,
        horizon_N=horizon_N,
        V_description=f"{{x : |f'(x)| <= {K:.6g}}}",
    )


# ---------------------------------------------------------------------------
# expansion / orbit / recovery / distortion checks
# ---------------------------------------------------------------------------

def check_outside_expansion(family: OneDFamily, a: float, L: float,
                            cert: MisiurewiczCertificate, samples: int = 2000,
                            max_excursion: int = 400,
                            critical: CriticalStructure | None = None) -> ExpansionCheckResult:
    """Sample excursions outside V and compare |(f^n)'| against e^(lambda0 n).

    Each excursion multiplies true derivative values at computed points, so
    the pointwise bound |f'| > K outside V makes every factor direct
    evidence; no shadowing argument is needed.  Covers both the long-run
    bound (with M0) and the enters-V bound (with d0).
    """
    if samples < 1000:
        raise ValueError("need at least 10^3 samples")
    crit = critical if critical is not None else critical_points(family, L)
    amp = family.amplitude(L)
    dphi = family.phi.deriv(1)
    K, lam0 = cert.K, cert.lambda0
    cap = min(cert.horizon_N, max_excursion)
    min_log_ratio = math.inf
    worst = None
    for x0 in np.linspace(0.0, TWO_PI, samples, endpoint=False):
        if abs(amp * float(dphi(x0))) <= K:
            continue  # starts inside V
        x = float(x0)
        log_prod = 0.0
        for n in range(1, cap + 1):
            log_prod += math.log(abs(amp * float(dphi(x))))
            x = float(eval_family(family, a, L, x))
            entered_V = abs(amp * float(dphi(x))) <= K
            # bound to beat: d0*e^(lam0 n) on entering V, e^(lam0 n) otherwise
            floor = cert.d0 if entered_V else (1.0 if n >= cert.M0 else 0.0)
            if floor > 0.0:
                log_ratio = log_prod - lam0 * n - math.log(floor)
                if log_ratio < min_log_ratio:
                    min_log_ratio = log_ratio
                    worst = (float(x0), n)
            if entered_V:
                break
    if worst is None:
        # V covered every sample: the requested expansion constant exceeds
        # the family's derivative range and nothing can be certified
        return ExpansionCheckResult(passed=False, min_ratio=math.nan,
                                    worst_witness=None, samples=samples)
    min_ratio = math.exp(min_log_ratio) if min_log_ratio < 700 else math.inf
    return ExpansionCheckResult(
        passed=bool(min_log_ratio >= -1e-12),
        min_ratio=min_ratio,
        worst_witness=worst,
        samples=samples,
    )


def _mp_eval_map(family: OneDFamily, a, L, theta, two_pi):
    """One map application at the active gmpy2 precision, reduced to [0, 2*pi)."""
    v = gmpy2.mpfr(family.zeta) + gmpy2.mpfr(family.beta0) * L * family.phi.mp(theta) + a
    v = gmpy2.fmod(v, two_pi)
    return v + two_pi if v < 0 else v


def check_critical_orbits(family: OneDFamily, a, L,
                          cert: MisiurewiczCertificate, N: int,
                          critical: CriticalStructure | None = None,
                          prefix_steps: int = 32,
                          digits_cap: int = 4000) -> OrbitCheckResult:
    """Certify d(f^n(c), C) >= delta1 and |f'(f^n(c))| > K for 1 <= n <= N.

    With pin evidence matching (a, L), a verified prefix at full precision
    plus the drift bound |f^n(c) - p| <= Lambda^n * 2r covers every n <= N in
    milliseconds.  Without a pin the orbit is iterated directly at a
    precision of N*log10(sup|f'|)+30 digits (capped); steps beyond the
    reliable horizon do not count as verified.
    """
    if N < 1:
        raise ValueError("horizon N must be >= 1")
    crit = critical if critical is not None else critical_points(family, float(L))
    if cert.pin is not None and _pin_matches(cert.pin, a, L):
        return _check_orbits_pinned(family, cert, crit, N, prefix_steps)

    amp_abs = abs(family.beta0) * float(L)
    sup_fp = amp_abs * family.phi.sup_norm_bound(1)
    digits_needed = int(N * math.log10(max(sup_fp, 2.0))) + 30
    digits = min(digits_needed, digits_cap)
    reliable = N if digits_needed <= digits_cap else max(
        1, int((digits_cap - 30) / math.log10(max(sup_fp, 2.0))))
    bits = int(digits * 3.3219281) + 16
    min_dist, min_fp = math.inf, math.inf
    first_violation = None
    dphi = family.phi.deriv(1)
    with gmpy2.context(precision=bits):
        two_pi = 2 * gmpy2.const_pi()
        a_mp, L_mp = gmpy2.mpfr(a), gmpy2.mpfr(L)
        for ci in crit.points:
            x = gmpy2.mpfr(ci)
            for n in range(1, N + 1):
                x = _mp_eval_map(family, a_mp, L_mp, x, two_pi)
                xf = float(x)
                d = distance_to_set(xf, crit.points)
                fp = abs(amp_abs * float(dphi(xf)))
                min_dist = min(min_dist, d)
                min_fp = min(min_fp, fp)
                if (d < cert.delta1 or fp <= cert.K) and first_violation is None:
                    first_violation = n
    return OrbitCheckResult(
        passed=first_violation is None and reliable >= N,
        min_distance=min_dist,
        min_abs_derivative=min_fp,
        reliable_horizon=reliable,
        first_violation=first_violation,
        notes="" if reliable >= N else
        f"precision cap limits verification to {reliable} of {N} steps",
    )


def _pin_matches(pin: PinEvidence, a, L) -> bool:
    try:
        with gmpy2.context(precision=pin.precision_bits):
            return gmpy2.mpfr(a) == pin.a_star and gmpy2.mpfr(L) == pin.L_star
    except (TypeError, ValueError):
        return False


def _check_orbits_pinned(family, cert, crit, N, prefix_steps) -> OrbitCheckResult:
    pin = cert.pin
    r_max = 1e-9  # ball around p containing the whole certified orbit
    drift_log10 = N * pin.growth_log10 + pin.residual_log10 + math.log10(2.0)
    if drift_log10 > math.log10(r_max):
        reliable = int((math.log10(r_max) - pin.residual_log10 - math.log10(2.0))
                       / pin.growth_log10)
        return OrbitCheckResult(
            passed=False, min_distance=math.nan, min_abs_derivative=math.nan,
            reliable_horizon=reliable, first_violation=None,
            notes="pin precision insufficient for this horizon",
        )
    n_pre = min(N, prefix_steps)
    min_dist = math.inf
    with gmpy2.context(precision=pin.precision_bits):
        two_pi = 2 * gmpy2.const_pi()
        for ci in pin.critical_mp:
            x = ci
            for _ in range(n_pre):
                x = _mp_eval_map(family, pin.a_star, pin.L_star, x, two_pi)
                min_dist = min(min_dist, distance_to_set(float(x), crit.points))
    min_dist = min(min_dist, pin.distance_to_critical - r_max)
    amp_abs = abs(float(pin.L_star)) * abs(family.beta0)
    dphi = family.phi.deriv(1)
    fp_at_p = abs(amp_abs * float(dphi(float(pin.fixed_point))))
    min_fp = fp_at_p - amp_abs * family.phi.sup_norm_bound(2) * r_max
    return OrbitCheckResult(
        passed=(min_dist >= cert.delta1) and (min_fp > cert.K),
        min_distance=min_dist,
        min_abs_derivative=min_fp,
        reliable_horizon=N,
        first_violation=None,
        notes=f"pinned orbit: all iterates within {r_max:g} of the fixed point",
    )


def recovery_estimate(family: OneDFamily, a: float, L: float,
                      cert: MisiurewiczCertificate, c: float, x: float,
                      critical: CriticalStructure | None = None,
                      max_steps: int = 200) -> tuple:
    """Escape time n(x) of x in V from the critical orbit, and the regained growth.

    n(x) is the first n with |f^n(x) - f^n(c)| beyond the tracking threshold
    K^3/(4 K2 L_eff); the derivative along x's orbit has then regained
    |(f^{n(x)})'(x)| >= (k1/(8 K2)) K^{n(x)}.  Requires x in V and the
    critical orbit outside C_sigma up to the escape time.
    """
    crit = critical if critical is not None else critical_points(family, L)
    amp = family.amplitude(L)
    dphi = family.phi.deriv(1)
    K2 = family.phi.c2_norm_bound()
    K = cert.K
    if abs(amp * float(dphi(x))) > K:
        raise ValueError(f"x is not in V: |f'(x)| > K = {K:.4g}")
    if circle_distance(x, c) == 0.0:
        raise NoEscapeError("x coincides with the critical point at working precision")
    threshold = K**3 / (4.0 * K2 * abs(amp))
    xa, ca = float(x), float(c)
    log_growth = 0.0
    for n in range(1, min(max_steps, cert.horizon_N) + 1):
        log_growth += math.log(max(abs(amp * float(dphi(xa))), 1e-300))
        xa = float(eval_family(family, a, L, xa))
        ca = float(eval_family(family, a, L, ca))
        if distance_to_set(ca, crit.points) <= cert.sigma:
            raise PreconditionViolatedError(
                n, "critical orbit entered C_sigma before escape")
        if circle_distance(xa, ca) > threshold:
            if n == 1:
                raise AssertionError("escape at n=1 contradicts the quadratic bound")
            return n, math.exp(log_growth)
    raise NoEscapeError(
        f"x did not separate from the critical orbit within {max_steps} steps")


def local_distortion_ratio(family: OneDFamily, a: float, L: float,
                           x: float, y: float, n: int,
                           K: float | None = None,
                           critical: CriticalStructure | None = None) -> float:
    """(f^n)'(x) / (f^n)'(y) while the two orbits stay close and away from C.

    Hypotheses checked per step i < n: segment length |f^i(x)-f^i(y)| at most
    K^3/(4 K2 L_eff) and distance of the segment endpoints to C at least
    sigma/2.  Violations raise with the first offending step.
    """
    if n == 0 or x == y:
        return 1.0
    crit = critical if critical is not None else critical_points(family, L)
    if K is None:
        K = choose_expansion_constant(family, L, crit)
    amp = family.amplitude(L)
    K2 = family.phi.c2_norm_bound()
    sigma = 2.0 * K**3 / (crit.k1 * abs(amp))
    threshold = K**3 / (4.0 * K2 * abs(amp))
    dphi = family.phi.deriv(1)
    xa, ya = float(x), float(y)
    log_ratio = 0.0
    for i in range(n):
        if circle_distance(xa, ya) > threshold:
            raise PreconditionViolatedError(i, "segment longer than the tracking threshold")
        if min(distance_to_set(xa, crit.points),
               distance_to_set(ya, crit.points)) < 0.5 * sigma:
            raise PreconditionViolatedError(i, "segment within sigma/2 of C")
        log_ratio += (math.log(abs(amp * float(dphi(xa))))
                      - math.log(abs(amp * float(dphi(ya)))))
        xa = float(eval_family(family, a, L, xa))
        ya = float(eval_family(family, a, L, ya))
    return math.exp(log_ratio)


# ---------------------------------------------------------------------------
# the constructive search
# ---------------------------------------------------------------------------

@dataclass
class SearchConfig:
    horizon_N: int = 10_000
    K: float | None = None            # None -> adaptive, capped at K_DEFAULT
    L0: float = L0_DEFAULT
    depth_cap: int = 40
    extra_digits: int = 60
    prefix_steps: int = 32


def _largest_arc_midpoint(crit: CriticalStructure) -> float:
    pts = sorted(crit.points)
    best_len, best_mid = -1.0, 0.0
    for i, p in enumerate(pts):
        q = pts[(i + 1) % len(pts)] + (TWO_PI if i + 1 == len(pts) else 0.0)
        if q - p > best_len:
            best_len = q - p
            best_mid = wrap_angle(0.5 * (p + q))
    return float(best_mid)


def _mp_newton(value, deriv, x0, bits: int, max_iter: int = 200):
    """Newton iteration run to full working precision from a double-accurate seed."""
    x = gmpy2.mpfr(x0)
    tol = gmpy2.mpfr(2) ** (-(bits - 8))
    for _ in range(max_iter):
        step = value(x) / deriv(x)
        x = x - step
        if abs(step) <= tol * max(abs(x), gmpy2.mpfr(1)):
            return x
    raise SearchExhaustedError("high-precision Newton refinement did not converge")


def _mp_refine_critical(family: OneDFamily, c_float: float, bits: int):
    """Polish a critical point (root of Phi') to the active precision."""
    return _mp_newton(lambda t: family.phi.mp(t, order=1),
                      lambda t: family.phi.mp(t, order=2), c_float, bits)


def _mp_solve_phi_equals(family: OneDFamily, target, guess: float, bits: int):
    """Solve Phi(p) = target near guess (Phi' nonzero there)."""
    return _mp_newton(lambda t: family.phi.mp(t) - target,
                      lambda t: family.phi.mp(t, order=1), guess, bits)


def _build_search_region(family: OneDFamily, crit: CriticalStructure,
                         a_center: float, L_center: float, p: float,
                         K: float) -> SearchRegion:
    k0 = abs(family.beta0) * abs(crit.values_phi[1] - crit.values_phi[0])
    M = np.array([[1.0, family.beta0 * crit.values_phi[0]],
                  [1.0, family.beta0 * crit.values_phi[1]]])
    lamM = float(np.linalg.eigvalsh(M.T @ M).max())
    side = (lamM / k0**2) * K**-3
    Delta1 = (a_center - side / 2, a_center + side / 2)
    Delta2 = (L_center - side / 2, L_center + side / 2)
    # inscribed image box: the preimage of [-b/2, b/2]^2 under the affine
    # critical-value map must fit in the realised parameter rectangle (whose
    # float spans fall short of `side` by an ulp of the centre coordinates)
    Minv = np.linalg.inv(M)
    row_sums = np.abs(Minv).sum(axis=1)
    spans = (Delta1[1] - Delta1[0], Delta2[1] - Delta2[0])
    box = 0.999 * min(spans[i] / float(row_sums[i]) for i in range(2))
    norm_bound = max(1.0, abs(family.beta0) * family.phi.sup_norm_bound(0))
    eps1 = min(1.0, 2.0 * 2.0 * math.sqrt(2.0) * norm_bound * side)
    return SearchRegion(
        Delta1=Delta1,
        Delta2=Delta2,
        I1=(p - box / 2, p + box / 2),
        I2=(p - box / 2, p + box / 2),
        epsilon1=eps1,
        n0=1,
        k0=k0,
        lambdaM=lamM,
    )


def verify_region_hypotheses(family: OneDFamily, crit: CriticalStructure,
                             region: SearchRegion, delta1: float) -> dict:
    """Check the covering/avoidance hypotheses behind the nested-set argument.

    The first-step covering (n0 = 1) uses the exact affine inverse of the
    critical-curve pair; the centre-map expansion check compares image arcs
    of I1, I2 against their epsilon1 fattenings; the avoidance check samples
    I1, I2 against C_delta1.  Also verifies the parameter-increment
    inequality 2*sqrt(2)*max||dF||*max|Delta| < epsilon1.
    """
    a_c = 0.5 * (region.Delta1[0] + region.Delta1[1])
    L_c = 0.5 * (region.Delta2[0] + region.Delta2[1])
    M = np.array([[1.0, family.beta0 * crit.values_phi[0]],
                  [1.0, family.beta0 * crit.values_phi[1]]])
    Minv = np.linalg.inv(M)
    h1_ok = True
    for su in (-0.5, 0.5):
        for sv in (-0.5, 0.5):
            du = su * (region.I1[1] - region.I1[0])
            dv = sv * (region.I2[1] - region.I2[0])
            da, dL = Minv @ np.array([du, dv])
            if abs(da) > 0.5 * (region.Delta1[1] - region.Delta1[0]) + 1e-15 or \
               abs(dL) > 0.5 * (region.Delta2[1] - region.Delta2[0]) + 1e-15:
                h1_ok = False
    h2_ok = True
    for I in (region.I1, region.I2):
        grid = np.linspace(I[0], I[1], 64)
        img = eval_family_lift(family, a_c, L_c, grid)
        length = float(np.max(img) - np.min(img))
        if length < (I[1] - I[0]) + 2 * region.epsilon1 and length < TWO_PI:
            h2_ok = False
    h3_ok = all(
        distance_to_set(t, crit.points) > delta1
        for I in (region.I1, region.I2)
        for t in np.linspace(I[0], I[1], 32)
    )
    norm_bound = max(1.0, abs(family.beta0) * family.phi.sup_norm_bound(0))
    lhs = 2.0 * math.sqrt(2.0) * norm_bound * max(
        region.Delta1[1] - region.Delta1[0], region.Delta2[1] - region.Delta2[0])
    return {
        "H1": h1_ok,
        "H2": h2_ok,
        "H3": h3_ok,
        "parameter_increment_lhs": lhs,
        "parameter_increment_ok": lhs < region.epsilon1,
    }


def refine_nested_rectangles(family: OneDFamily, crit: CriticalStructure,
                             region: SearchRegion, depth_cap: int = 40,
                             beam: int = 256):
    """Adaptive realisation of the nested parameter sets: 4-way splits.

    A cell survives step n when the critical curves of its centre lie in
    I1 x I2 for every step up to n.  The surviving set thins by a factor
    ~sup|f'| per orbit step while one split only halves cells, so each step
    is allowed several 4-way splitting rounds (within the total depth cap),
    pruned to the cells whose centre orbits land closest to the targets.
    Refinement stops at the depth cap (double precision is then exhausted).
    Returns the per-step surviving rectangle lists (newest last) and the
    best final cell under the min-orbit-distance objective, ties broken by
    the lexicographically smaller (a, L) corner.
    """
    mid1 = wrap_angle(0.5 * (region.I1[0] + region.I1[1]))
    mid2 = wrap_angle(0.5 * (region.I2[0] + region.I2[1]))
    half1 = 0.5 * (region.I1[1] - region.I1[0])
    half2 = 0.5 * (region.I2[1] - region.I2[0])

    def target_miss(center, n):
        """Worst overshoot of the step-<=n critical curves past the targets."""
        a, L = center
        miss = 0.0
        for i in (1, 2):
            x = crit.points[i - 1]
            mid, half = (mid1, half1) if i == 1 else (mid2, half2)
            for _ in range(n):
                x = float(eval_family(family, a, L, x))
                miss = max(miss, circle_distance(x, mid) - half)
        return miss

    def objective(center, n):
        a, L = center
        best = math.inf
        for i in (1, 2):
            x = crit.points[i - 1]
            for _ in range(n):
                x = float(eval_family(family, a, L, x))
                best = min(best, distance_to_set(x, crit.points))
        return best

    def center(c):
        return 0.5 * (c[0] + c[2]), 0.5 * (c[1] + c[3])

    def split(cs):
        out = []
        for (alo, Llo, ahi, Lhi) in cs:
            am, Lm = 0.5 * (alo + ahi), 0.5 * (Llo + Lhi)
            out.extend([
                (alo, Llo, am, Lm), (am, Llo, ahi, Lm),
                (alo, Lm, am, Lhi), (am, Lm, ahi, Lhi),
            ])
        return out

    cells = [(region.Delta1[0], region.Delta2[0],
              region.Delta1[1], region.Delta2[1])]
    generations = []
    depth = 0
    n = 0
    while depth < depth_cap:
        n += 1
        current = cells
        while True:
            survivors = [c for c in current if target_miss(center(c), n) <= 0.0]
            if survivors or depth >= depth_cap:
                break
            current = split(current)
            depth += 1
            if len(current) > 4 * beam:
                current.sort(key=lambda c: (target_miss(center(c), n),
                                            c[0], c[1]))
                current = current[: 4 * beam]
        if not survivors:
            break
        if len(survivors) > beam:
            survivors.sort(key=lambda c: (target_miss(center(c), n), c[0], c[1]))
            survivors = survivors[:beam]
        cells = survivors
        generations.append(list(cells))
    steps = max(len(generations), 1)
    scored = sorted(
        ((objective(center(c), steps), c) for c in cells),
        key=lambda t: (-t[0], t[1][0], t[1][1]),
    )
    return generations, scored[0][1]


def find_misiurewicz_pair(family: OneDFamily, L_lo: float,
                          config: SearchConfig | None = None):
    """Constructive search for a certified pair (a*, L*) in the resonance window.

    Steps: (1) resolve L* = 2*pi*q / (beta0*|Phi(c2)-Phi(c1)|) inside
    [L_lo, L_lo + 2*pi/|dPhi|), which makes both critical values coincide;
    (2) aim the common critical value at the farthest-from-C arc midpoint and
    land it on the nearest invariant (fixed) point p of the map itself, via
    the single monotone scalar equation Phi(p) = Phi(c1) - 2*pi*j/(beta0*L*)
    solved in MPFR at a precision budgeted for the requested horizon;
    (3) build the parameter rectangle and run the nested 4-way refinement
    around (a*, L*), verifying the covering hypotheses; (4) certify both
    critical orbits to the horizon.

    Returns (a_star, L_star, certificate); a_star and L_star are gmpy2.mpfr
    values carrying the full working precision (float() gives the double view).
    """
    cfg = config or SearchConfig()
    if L_lo < cfg.L0:
        raise ValueError(f"L_lo = {L_lo} below the supported floor L0 = {cfg.L0}")
    crit = critical_points(family, L_lo)
    if len(crit.points) != 2:
        raise SearchExhaustedError("search implemented for two critical points")
    gamma_jacobian(family, 0.0, L_lo, crit)  # raises if critical values tie

    dval = family.beta0 * (crit.values_phi[1] - crit.values_phi[0])
    window = TWO_PI / abs(dval)
    sup_fp = abs(family.beta0) * (L_lo + window) * family.phi.sup_norm_bound(1)
    digits = int(cfg.horizon_N * math.log10(sup_fp + 2.0)) + cfg.extra_digits
    bits = int(digits * 3.3219281) + 64

    with gmpy2.context(precision=bits):
        two_pi = 2 * gmpy2.const_pi()
        c1 = _mp_refine_critical(family, crit.points[0], bits)
        c2 = _mp_refine_critical(family, crit.points[1], bits)
        phi_c1 = family.phi.mp(c1)
        phi_c2 = family.phi.mp(c2)
        dphi_val = gmpy2.mpfr(family.beta0) * (phi_c2 - phi_c1)
        q = int(math.ceil(L_lo * abs(float(dphi_val)) / TWO_PI))
        L_star = two_pi * q / abs(dphi_val)
        if L_star < L_lo:  # guard the integer ceiling against rounding
            q += 1
            L_star = two_pi * q / abs(dphi_val)

        z_mid = _largest_arc_midpoint(crit)
        amp = gmpy2.mpfr(family.beta0) * L_star
        # invariance condition for the common critical value p:
        #   f(p) = p  <=>  Phi(p) = Phi(c1) - 2*pi*j/(beta0*L*)
        j = int(round(float(amp * (phi_c1 - family.phi.mp(z_mid)) / two_pi)))
        target = phi_c1 - two_pi * j / amp
        p = _mp_solve_phi_equals(family, target, z_mid, bits)
        a_star = gmpy2.fmod(p - gmpy2.mpfr(family.zeta) - amp * phi_c1, two_pi)
        if a_star < 0:
            a_star += two_pi

        r1 = abs(_mp_eval_map(family, a_star, L_star, c1, two_pi) - p)
        r2 = abs(_mp_eval_map(family, a_star, L_star, c2, two_pi) - p)
        rp = abs(_mp_eval_map(family, a_star, L_star, p, two_pi) - p)
        worst = max(r1, r2, rp)
        residual_log10 = float(gmpy2.log10(worst)) if worst > 0 else -float(digits)

    p_f = float(p)
    d_pc = distance_to_set(p_f, crit.points)
    L_f = float(L_star)
    K = cfg.K if cfg.K is not None else choose_expansion_constant(
        family, L_f, crit, orbit_distance=d_pc)
    cert = build_certificate(family, L_f, K, cfg.horizon_N, crit)
    cert.pin = PinEvidence(
        fixed_point=p,
        a_star=a_star,
        L_star=L_star,
        critical_mp=(c1, c2),
        precision_bits=bits,
        residual_log10=residual_log10,
        growth_log10=math.log10(
            abs(family.beta0) * L_f * family.phi.sup_norm_bound(1) + 1.0),
        distance_to_critical=d_pc,
    )

    region = _build_search_region(family, crit, float(a_star), L_f, p_f, K)
    hyp = verify_region_hypotheses(family, crit, region, cert.delta1)
    generations, best_cell = refine_nested_rectangles(
        family, crit, region, depth_cap=cfg.depth_cap)

    orbit_check = check_critical_orbits(family, a_star, L_star, cert,
                                        cfg.horizon_N, crit,
                                        prefix_steps=cfg.prefix_steps)
    if not orbit_check.passed:
        raise SearchExhaustedError(
            f"pinned pair failed the horizon-{cfg.horizon_N} orbit check: "
            f"{orbit_check.notes or orbit_check.first_violation}")
    expansion = check_outside_expansion(family, float(a_star), L_f, cert,
                                        samples=2000, critical=crit)
    cert.evidence.update({
        "orbit_min_distance": orbit_check.min_distance,
        "orbit_min_abs_derivative": orbit_check.min_abs_derivative,
        "orbit_reliable_horizon": orbit_check.reliable_horizon,
        "expansion_min_ratio": expansion.min_ratio,
        "expansion_passed": expansion.passed,
        "hypotheses": hyp,
        "region": region,
        "refinement_generations": len(generations),
        "refinement_history": generations,
        "refinement_best_cell": best_cell,
        "window": (L_lo, L_lo + window),
    })
    return a_star, L_star, cert


# ---------------------------------------------------------------------------
# rank-one checklist pieces
# ---------------------------------------------------------------------------

def transversality_margin(family: OneDFamily, a, L, K: float,
                          truncation: int = 50,
                          critical: CriticalStructure | None = None) -> float:
    """|sum_k da f(f^k(c)) / (f^k)'(f(c))| minus the geometric tail bound.

    The partial sum runs along each critical orbit at a working precision
    that keeps every retained term exact; the tail beyond `truncation` is
    bounded by sum_{k>truncation} K^-k, legitimate because the expansion
    |(f^k)'(f(c))| >= K^k is verified along the way.  Returns the minimum
    margin over critical points; positive certifies transversality.
    """
    crit = critical if critical is not None else critical_points(family, float(L))
    amp_abs = abs(family.beta0) * float(L)
    sup_fp = amp_abs * family.phi.sup_norm_bound(1)
    digits = int(truncation * math.log10(sup_fp + 2.0)) + 30
    bits = int(digits * 3.3219281) + 16
    margins = []
    with gmpy2.context(precision=bits):
        two_pi = 2 * gmpy2.const_pi()
        a_mp, L_mp = gmpy2.mpfr(a), gmpy2.mpfr(L)
        amp = gmpy2.mpfr(family.beta0) * L_mp
        for ci in crit.points:
            x = _mp_eval_map(family, a_mp, L_mp, gmpy2.mpfr(ci), two_pi)
            total = gmpy2.mpfr(1)          # k = 0 term; da f is identically 1
            prod = gmpy2.mpfr(1)
            for k in range(1, truncation + 1):
                prod *= amp * family.phi.mp(x, order=1)
                if abs(prod) < gmpy2.mpfr(K) ** k:
                    raise ValueError(
                        f"expansion precondition |(f^k)'(f(c))| >= K^k fails at k={k}")
                total += 1 / prod
                x = _mp_eval_map(family, a_mp, L_mp, x, two_pi)
            tail = gmpy2.mpfr(K) ** (-truncation) / (K - 1.0)
            margins.append(float(abs(total) - tail))
    return min(margins)


def turn_nondegeneracy(singular_map, critical: CriticalStructure) -> list:
    """Radial derivative of the singular-limit angular component at each turn.

    For the circle restriction pi/2 + beta0*L*z0*sin(theta) + a the value at
    a critical angle c is beta0*L*sin(c), i.e. +-beta0*L for the kicked-Hopf
    family.  `singular_map` must be a singular-limit return map.
    """
    if getattr(singular_map, "kind", None) != "singular-limit":
        raise ValueError("turn derivatives are defined for the singular limit")
    amp = singular_map.beta0_L
    return [amp * math.sin(c) for c in critical.points]


def rank_one_report(family: OneDFamily, a, L, cert: MisiurewiczCertificate,
                    K_mix: float = K_DEFAULT, truncation: int = 50,
                    horizon_N: int | None = None) -> RankOneReport:
    """Assemble the full checklist at a certified pair.

    The Misiurewicz condition is re-checked at the certificate horizon; the
    transversality margin and the mixing flag are evaluated at K_mix (the
    mixing condition wants K > 8, transversality only K > 2).
    """
    from .kicked import HopfSystem, ReturnMap

    crit = critical_points(family, float(L))
    orbit = check_critical_orbits(family, a, L, cert,
                                  horizon_N or cert.horizon_N, crit)
    margin = transversality_margin(family, a, L, K_mix, truncation, crit)
    system = HopfSystem(L=float(L), beta=(lambda mu, b=family.beta0: b))
    singular = ReturnMap.singular(system, float(a) % TWO_PI)
    turns = turn_nondegeneracy(singular, crit)
    g6a, Q, N = mixing_conditions(family, float(a) % TWO_PI, float(L),
                                  K_mix, crit)
    return RankOneReport(
        g3_misiurewicz=orbit.passed,
        g3_certificate=cert,
        g4_transversality_margin=margin,
        g5_turn_derivatives=turns,
        g6a_expansion=g6a,
        g6b_matrix_Q=Q,
        g6b_minimal_N=N,
    )


def covering_matrix(family: OneDFamily, a: float, L: float,
                    critical: CriticalStructure | None = None) -> np.ndarray:
    """Q[i, j] = 1 when the image arc of monotonicity interval J_i covers J_j.

    Computed from the monotone lift over each interval between consecutive
    turning points; an image arc of length >= 2*pi covers everything.
    """
    crit = critical if critical is not None else critical_points(family, L)
    pts = sorted(crit.points)
    r = len(pts)
    intervals = [(pts[i], pts[(i + 1) % r] + (TWO_PI if i + 1 == r else 0.0))
                 for i in range(r)]
    Q = np.zeros((r, r), dtype=int)
    for i, (lo, hi) in enumerate(intervals):
        vlo = float(eval_family_lift(family, a, L, lo))
        vhi = float(eval_family_lift(family, a, L, hi))
        img_lo, img_hi = min(vlo, vhi), max(vlo, vhi)
        if img_hi - img_lo >= TWO_PI - 1e-12:
            Q[i, :] = 1
            continue
        for jdx, (jlo, jhi) in enumerate(intervals):
            kmin = math.ceil((img_lo - jlo) / TWO_PI)
            kmax = math.floor((img_hi - jhi) / TWO_PI)
            if kmax >= kmin:
                Q[i, jdx] = 1
    return Q


def mixing_conditions(family: OneDFamily, a: float, L: float, K: float,
                      critical: CriticalStructure | None = None):
    """Expansion flag and covering-matrix mixing power.

    Returns (K > 8, Q, minimal N with Q^N strictly positive), searching
    N up to the square of the matrix dimension.
    """
    Q = covering_matrix(family, a, L, critical)
    g6a = K > 8.0
    r = Q.shape[0]
    B = (Q > 0).astype(int)
    P = B.copy()
    for N in range(1, r * r + 1):
        if (P > 0).all():
            return g6a, Q, N
        P = (P @ B > 0).astype(int)
    raise NotEventuallyPositiveError("no power of Q is strictly positive")
