"""Circle-map families f(theta) = zeta + L*Phi(theta) + a and orbit bookkeeping.

Everything downstream (Misiurewicz certificates, rank-one checklists, the
singular limit of the kicked-flow return maps) works with the two-parameter
family

    f_{a,L}(theta) = zeta + L * Phi(theta) + a   (mod 2*pi),

where Phi is a smooth 2*pi-periodic function with finitely many nondegenerate
critical points.  Angles are stored in [0, 2*pi).  Phi is represented as a
trigonometric polynomial so that analytic derivatives of any order and
arbitrary-precision evaluation (needed by the parameter search) come for free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import gmpy2
import numpy as np

TWO_PI = 2.0 * math.pi

#: grid resolution used to bracket sign changes of Phi' before bisection
CRITICAL_SCAN_POINTS = 4096


class DegenerateCriticalError(ValueError):
    """Raised when Phi has a critical point with |Phi''| below tolerance."""


def wrap_angle(theta):
    """Reduce an angle (scalar or array) to [0, 2*pi).

    Increments of size O(L) occur in one map application, so a plain modulo is
    required; the result is then clipped against rounding at the right edge.
    """
    if isinstance(theta, (float, int)):
        out = math.fmod(theta, TWO_PI)
        if out < 0.0:
            out += TWO_PI
        return 0.0 if out >= TWO_PI else out
    out = np.mod(theta, TWO_PI)
    return np.where(out >= TWO_PI, 0.0, out) if isinstance(out, np.ndarray) else (
        0.0 if out >= TWO_PI else out
    )


def circle_distance(x, y):
    """Geodesic distance on the circle of circumference 2*pi."""
    d = np.mod(np.asarray(x) - np.asarray(y), TWO_PI)
    d = np.minimum(d, TWO_PI - d)
    return float(d) if d.ndim == 0 else d


def distance_to_set(theta, points):
    """Min circle distance from theta (scalar or array) to a point set."""
    theta = np.asarray(theta, dtype=float)
    dists = [circle_distance(theta, c) for c in points]
    out = np.minimum.reduce(dists)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class TrigPolynomial:
    """Phi(theta) = const + sum_k a_k sin(k theta) + b_k cos(k theta).

    sin_coeffs[i] multiplies sin((i+1) theta); likewise for cos_coeffs.
    Evaluates on floats and numpy arrays; `mp` evaluates under the active
    gmpy2 precision context, which the Misiurewicz search relies on.
    """

    sin_coeffs: tuple = ()
    cos_coeffs: tuple = ()
    const: float = 0.0

    def __call__(self, theta):
        if isinstance(theta, (float, int)):
            out = self.const
            for k, a in enumerate(self.sin_coeffs, start=1):
                if a:
                    out += a * math.sin(k * theta)
            for k, b in enumerate(self.cos_coeffs, start=1):
                if b:
                    out += b * math.cos(k * theta)
            return out
        theta = np.asarray(theta, dtype=float)
        out = np.full_like(theta, self.const, dtype=float)
        for k, a in enumerate(self.sin_coeffs, start=1):
            if a:
                out = out + a * np.sin(k * theta)
        for k, b in enumerate(self.cos_coeffs, start=1):
            if b:
                out = out + b * np.cos(k * theta)
        return float(out) if out.ndim == 0 else out

    def deriv(self, order: int = 1) -> "TrigPolynomial":
        """Analytic derivative of the given order (a new TrigPolynomial)."""
        if order == 0:
            return self
        n = max(len(self.sin_coeffs), len(self.cos_coeffs))
        a = list(self.sin_coeffs) + [0.0] * (n - len(self.sin_coeffs))
        b = list(self.cos_coeffs) + [0.0] * (n - len(self.cos_coeffs))
        # d/dtheta: sin(k t) -> k cos(k t), cos(k t) -> -k sin(k t)
        new_a = tuple(-(k + 1) * b[k] for k in range(n))
        new_b = tuple((k + 1) * a[k] for k in range(n))
        d = TrigPolynomial(sin_coeffs=new_a, cos_coeffs=new_b, const=0.0)
        return d if order == 1 else d.deriv(order - 1)

    def mp(self, theta, order: int = 0):
        """Evaluate Phi^(order) at an mpfr/float theta at current precision."""
        f = self if order == 0 else self.deriv(order)
        out = gmpy2.mpfr(f.const)
        for k, a in enumerate(f.sin_coeffs, start=1):
            if a:
                out += gmpy2.mpfr(a) * gmpy2.sin(k * gmpy2.mpfr(theta))
        for k, b in enumerate(f.cos_coeffs, start=1):
            if b:
                out += gmpy2.mpfr(b) * gmpy2.cos(k * gmpy2.mpfr(theta))
        return out

    def sup_norm_bound(self, order: int = 0) -> float:
        """Coefficient bound sum_k k^order (|a_k|+|b_k|) >= sup |Phi^(order)|."""
        n = max(len(self.sin_coeffs), len(self.cos_coeffs))
        a = list(self.sin_coeffs) + [0.0] * (n - len(self.sin_coeffs))
        b = list(self.cos_coeffs) + [0.0] * (n - len(self.cos_coeffs))
        s = abs(self.const) if order == 0 else 0.0
        for k in range(1, n + 1):
            s += k**order * (abs(a[k - 1]) + abs(b[k - 1]))
        return s

    def c2_norm_bound(self) -> float:
        """Upper bound for the C^2 norm, max over orders 0..2."""
        return max(self.sup_norm_bound(i) for i in range(3))


SINE = TrigPolynomial(sin_coeffs=(1.0,))
COSINE = TrigPolynomial(cos_coeffs=(1.0,))


@dataclass(frozen=True)
class OneDFamily:
    """The two-parameter circle family zeta + (beta0*L)*Phi(theta) + a.

    beta0 is the twist coefficient of the planar system the family arises
    from; it rescales the kick amplitude L so the effective slope is beta0*L.
    For stand-alone use leave beta0 = 1.
    """

    zeta: float
    phi: TrigPolynomial
    beta0: float = 1.0

    def amplitude(self, L: float) -> float:
        return self.beta0 * L


HOPF_FAMILY = OneDFamily(zeta=math.pi / 2, phi=SINE)


@dataclass(frozen=True)
class CriticalStructure:
    """Critical points of Phi with the constants every estimate hangs on."""

    points: tuple            # sorted angles in [0, 2*pi)
    values_phi: tuple        # Phi at each critical point
    min_abs_second: float    # min |Phi''(c)| over critical points
    separation: float        # min pairwise circle distance

    @property
    def k1(self) -> float:
        """Nondegeneracy floor: half the smallest |Phi''| at a critical point."""
        return 0.5 * self.min_abs_second


@dataclass
class OrbitTrace:
    """Forward orbit with per-step log|f'| and the closest critical approach."""

    states: np.ndarray | None       # length n+1, or None in streaming mode
    log_derivatives: np.ndarray | None
    min_distance_to_critical: float
    sum_log_derivatives: float
    length: int


def eval_family(family: OneDFamily, a: float, L: float, theta):
    """One application of the map; angle reduced to [0, 2*pi).

    L must be positive (the kick amplitude of the driving construction).
    """
    if L <= 0:
        raise ValueError("kick amplitude L must be positive")
    return wrap_angle(family.zeta + family.amplitude(L) * family.phi(theta) + a)


def eval_family_lift(family: OneDFamily, a: float, L: float, theta):
    """Same as eval_family but without the circle reduction (the lift)."""
    return family.zeta + family.amplitude(L) * family.phi(theta) + a


def derivative(family: OneDFamily, a: float, L: float, theta, order: int = 1):
    """f' = (beta0*L) Phi'(theta) or f'' = (beta0*L) Phi''(theta)."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    return family.amplitude(L) * family.phi.deriv(order)(theta)


def _bisect(fn, lo: float, hi: float, tol: float = 1e-13) -> float:
    flo = fn(lo)
    if flo == 0.0:
        return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if fm == 0.0:
            return mid
        if (flo < 0) == (fm < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def critical_points(family: OneDFamily, L: float = 1.0,
                    degeneracy_tol: float = 1e-8) -> CriticalStructure:
    """Locate all roots of Phi' on [0, 2*pi) and package the constants.

    Sign changes of Phi' are bracketed on a uniform 4096-point grid and
    refined by bisection to 1e-13, which is sufficient because the standing
    assumption is that all critical points are nondegenerate (simple roots).
    """
    dphi = family.phi.deriv(1)
    d2phi = family.phi.deriv(2)
    grid = np.linspace(0.0, TWO_PI, CRITICAL_SCAN_POINTS + 1)
    vals = dphi(grid)
    roots = []
    for i in range(CRITICAL_SCAN_POINTS):
        lo, hi = grid[i], grid[i + 1]
        vlo, vhi = vals[i], vals[i + 1]
        if vlo == 0.0:
            roots.append(lo)
        elif vlo * vhi < 0.0:
            roots.append(_bisect(dphi, lo, hi))
    roots = sorted(wrap_angle(r) for r in roots)
    dedup: list[float] = []
    for r in roots:
        if all(circle_distance(r, q) > 1e-9 for q in dedup):
            dedup.append(r)
    roots = dedup
    if not roots:
        raise DegenerateCriticalError("Phi' has no roots on the scan grid")
    second = [abs(float(d2phi(r))) for r in roots]
    for r, s in zip(roots, second):
        if s < degeneracy_tol:
            raise DegenerateCriticalError(
                f"critical point {r:.6f} has |Phi''| = {s:.3e} below tolerance"
            )
    seps = [
        circle_distance(roots[i], roots[(i + 1) % len(roots)])
        for i in range(len(roots))
    ] if len(roots) > 1 else [TWO_PI]
    return CriticalStructure(
        points=tuple(roots),
        values_phi=tuple(float(family.phi(r)) for r in roots),
        min_abs_second=min(second),
        separation=min(seps),
    )


def iterate_orbit(family: OneDFamily, a: float, L: float, x0: float, n: int,
                  critical: CriticalStructure,
                  keep_states: bool | None = None) -> OrbitTrace:
    """Iterate n steps from x0, tracking log|f'| and critical-set distance.

    keep_states defaults to n <= 10**6; longer orbits stream, storing only
    running sums and the minimum distance (the per-step lists would dominate
    memory without adding information).
    """
    if n < 1:
        raise ValueError("orbit length n must be >= 1")
    if keep_states is None:
        keep_states = n <= 10**6
    amp = family.amplitude(L)
    dphi = family.phi.deriv(1)
    pts = critical.points
    x = wrap_angle(float(x0))
    states = np.empty(n + 1) if keep_states else None
    logd = np.empty(n) if keep_states else None
    if keep_states:
        states[0] = x
    min_d = distance_to_set(x, pts)
    total = 0.0
    for i in range(n):
        fp = amp * float(dphi(x))
        ld = math.log(abs(fp)) if fp != 0.0 else -math.inf
        total += ld
        x = float(wrap_angle(family.zeta + amp * float(family.phi(x)) + a))
        min_d = min(min_d, distance_to_set(x, pts))
        if keep_states:
            states[i + 1] = x
            logd[i] = ld
    return OrbitTrace(
        states=states,
        log_derivatives=logd,
        min_distance_to_critical=min_d,
        sum_log_derivatives=total,
        length=n,
    )
