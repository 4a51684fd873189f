"""Kicked degenerate-Hopf system: kick map, flows, and annulus return maps.

The planar system (polar coordinates, bifurcation parameter mu > 0)

    r'     = -mu r                + r^5 g(r, theta, mu)
    theta' = omega + gamma(mu) mu + beta(mu) r^2 + r^4 h(r, theta, mu)

has a spiral sink at the origin.  An instantaneous vertical kick of size
L mu^rho2 followed by relaxation for time tau(mu) defines a return map of
the annulus K4^-1 <= z <= K4 in the rescaled radius z = r mu^-rho1.  Along
the resonant sequence mu_n (where the accumulated winding xi(mu) is a
multiple of 2*pi) the family T_{a,L,mu_n} converges to the one-dimensional
singular limit (z, theta) -> (1, pi/2 + beta(0) L z sin(theta) + a), the
circle family analysed in the Misiurewicz module.

Conventions: rho1 + rho2 = 1 with rho2 in (3/8, 1/2); the reduced map
(g = h = 0) has closed forms throughout; the full map integrates the
relaxation segment in kick-rescaled time t = t' tau so the horizon is
always t' in [0, 1].
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .circle import TWO_PI, OneDFamily, SINE, wrap_angle

XI_SOLVE_TOL = 1e-10
DEFAULT_MU_START = 0.05


class NotRelaxableError(ValueError):
    """Kicked annulus does not clear the origin (z-tilde <= 1); mu too large."""


class LeftAnnulusError(RuntimeError):
    """Return-map output violated K4^-1 <= z <= K4."""

    def __init__(self, point, value):
        super().__init__(f"image z = {value:.6g} left the annulus from {point}")
        self.point = point
        self.value = value


class StepFailureError(RuntimeError):
    """Adaptive step control failed while integrating the full flow."""


class NonMonotoneError(RuntimeError):
    """xi failed to be monotone on the bracket used by the resonance solver."""


def _zero(mu):
    return 0.0


def _const_one(mu):
    return 1.0


@dataclass(frozen=True, eq=False)
class HopfSystem:
    """All constants of the normal form plus the kick/annulus geometry.

    gamma and beta are functions of mu (beta(0) is the twist factor and must
    be nonzero); g and h are the higher-order terms, callables of
    (r, theta, mu), or None for the reduced system.
    """

    omega: float = 1.0
    gamma: object = _zero
    beta: object = _const_one
    rho1: float = 0.55
    rho2: float = 0.45
    L: float = 10.0
    K4: float = 2.0
    g: object = None
    h: object = None

    def __post_init__(self):
        if not (0.375 < self.rho2 < 0.5):
            raise ValueError(f"rho2 = {self.rho2} outside (3/8, 1/2)")
        if abs(self.rho1 + self.rho2 - 1.0) > 1e-12:
            raise ValueError("rho1 + rho2 must equal 1")
        if self.beta(0.0) == 0.0:
            raise ValueError("twist factor beta(0) must be nonzero")
        if self.K4 <= 1.0:
            raise ValueError("K4 must exceed 1")
        if self.L <= 0.0:
            raise ValueError("kick amplitude L must be positive")
        if self.omega <= 0.0:
            raise ValueError("base frequency omega must be positive")

    @property
    def beta0(self) -> float:
        return self.beta(0.0)

    def kick_size(self, mu: float) -> float:
        """Rescaled kick displacement L mu^(rho2 - rho1)."""
        return self.L * mu ** (self.rho2 - self.rho1)

    def z_tilde(self, mu: float) -> float:
        return self.kick_size(mu) - self.K4


@dataclass(frozen=True)
class AnnulusPoint:
    z: float
    theta: float

    def inside(self, K4: float, slack: float = 1e-12) -> bool:
        return 1.0 / K4 - slack <= self.z <= K4 + slack


# ---------------------------------------------------------------------------
# kick and flows
# ---------------------------------------------------------------------------

def kick(p: AnnulusPoint, system: HopfSystem, mu: float) -> AnnulusPoint:
    """Vertical translation by the kick size, in rescaled polar coordinates."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    P = system.kick_size(mu)
    x = p.z * math.cos(p.theta)
    y = p.z * math.sin(p.theta) + P
    return AnnulusPoint(z=math.hypot(x, y), theta=math.atan2(y, x))


def kick_jacobian_det(p: AnnulusPoint, system: HopfSystem, mu: float) -> float:
    """det of the kick map in (z, theta) coordinates: exactly z0/z1.

    The kick is a rigid translation in rectangular coordinates, so the polar
    determinant is the ratio of the area-element radii.
    """
    z1 = kick(p, system, mu).z
    if z1 <= 0:
        raise ValueError("kicked point at the origin")
    return p.z / z1


def relaxation_time(system: HopfSystem, mu: float) -> float:
    """tau with z_tilde * exp(-mu tau) = 1, i.e. log(z_tilde)/mu."""
    zt = system.z_tilde(mu)
    if zt <= 1.0:
        raise NotRelaxableError(
            f"z_tilde = {zt:.6g} <= 1 at mu = {mu:.3g}: kicked annulus cannot relax back")
    if zt - 1.0 < 1e-9:
        warnings.warn(f"near-degenerate relaxation: z_tilde - 1 = {zt - 1:.2e}",
                      RuntimeWarning, stacklevel=2)
    return math.log(zt) / mu


def reduced_flow(p: AnnulusPoint, t: float, system: HopfSystem, mu: float) -> AnnulusPoint:
    """Closed-form relaxation flow of the reduced (g = h = 0) system.

    z(t) = z e^(-mu t); the angle picks up the drift (omega + gamma mu) t plus
    the twist integral (beta/2) mu^(2 rho1 - 1) z^2 (1 - e^(-2 mu t)).
    The angle is returned unreduced (the lift); wrap as needed.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    bm = system.beta(mu)
    gm = system.gamma(mu)
    z_t = p.z * math.exp(-mu * t)
    theta_t = (p.theta + t * (system.omega + gm * mu)
               + 0.5 * bm * mu ** (2 * system.rho1 - 1) * p.z**2
               * (1.0 - math.exp(-2.0 * mu * t)))
    return AnnulusPoint(z=z_t, theta=theta_t)


def full_flow(p: AnnulusPoint, t: float, system: HopfSystem, mu: float,
              tol: float = 1e-10) -> AnnulusPoint:
    """Numerically integrated flow of the full normal form, horizon t.

    Integrates in rescaled time (t' in [0, 1]) so step counts stay bounded
    even when t is a full relaxation interval.  Reduces to reduced_flow up to
    the integration tolerance when g and h vanish.  The returned angle is the
    lift; note it grows like omega*t, so for very long horizons prefer the
    resonance-aware return map which never forms large angles.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if t == 0:
        return p
    g = system.g or (lambda r, th, m: 0.0)
    h = system.h or (lambda r, th, m: 0.0)
    bm, gm = system.beta(mu), system.gamma(mu)
    r1, r2 = system.rho1, system.rho2

    def rhs(tp, y):
        z, th = y
        r = mu**r1 * z
        dz = t * (-mu * z + mu ** (4 * r1) * z**5 * g(r, th, mu))
        dth = t * (system.omega + gm * mu + bm * mu ** (2 * r1) * z**2
                   + mu ** (4 * r1) * z**4 * h(r, th, mu))
        return (dz, dth)

    sol = solve_ivp(rhs, (0.0, 1.0), (p.z, p.theta), method="RK45",
                    rtol=tol, atol=tol * 1e-2)
    if not sol.success:
        raise StepFailureError(sol.message)
    return AnnulusPoint(z=float(sol.y[0][-1]), theta=float(sol.y[1][-1]))


def gronwall_bound(A1: float, A2: float, t: float) -> float:
    """(A1/A2)(e^(A2 t) - 1): trajectory gap bound for vector-field gap A1."""
    if A1 < 0 or A2 <= 0 or t < 0:
        raise ValueError("need A1 >= 0, A2 > 0, t >= 0")
    return (A1 / A2) * math.expm1(A2 * t)


# ---------------------------------------------------------------------------
# resonant-mu machinery
# ---------------------------------------------------------------------------

def xi(system: HopfSystem, mu: float) -> float:
    """Accumulated winding (omega + gamma mu) tau(mu) + (beta/2) L^2 mu^(2 rho2 - 1)."""
    tau = relaxation_time(system, mu)
    return ((system.omega + system.gamma(mu) * mu) * tau
            + 0.5 * system.beta(mu) * system.L**2 * mu ** (2 * system.rho2 - 1))


def solve_xi_equals(system: HopfSystem, target: float,
                    mu_hi: float = DEFAULT_MU_START,
                    tol: float = XI_SOLVE_TOL) -> float:
    """Bracketing + bisection solve of xi(mu) = target on the decreasing branch.

    Bisection runs to interval collapse (float resolution), after which the
    residual |xi - target| sits at the evaluation-noise level ~|target|*eps,
    well below the contracted tol for targets up to ~1e5.  Raises
    NonMonotoneError when the initial bracket does not straddle the target.
    """
    hi = mu_hi
    if xi(system, hi) >= target:
        raise NonMonotoneError("mu_hi already winds past the target; raise mu_start")
    lo = hi
    for _ in range(200):
        lo *= 0.5
        if xi(system, lo) > target:
            break
    else:
        raise NonMonotoneError("no bracket found: xi never exceeded the target")
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        if xi(system, mid) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 2.0 * np.finfo(float).eps * hi:
            break
    return 0.5 * (lo + hi)


def first_resonant_index(system: HopfSystem, mu_start: float = DEFAULT_MU_START) -> int:
    """Smallest integer m with 2 pi m > xi(mu_start) (so mu_1 < mu_start)."""
    return int(math.floor(xi(system, mu_start) / TWO_PI)) + 1


def mu_n(system: HopfSystem, n: int, mu_start: float = DEFAULT_MU_START) -> float:
    """n-th resonant parameter: xi(mu_n) = 2 pi (m1 + n - 1), n >= 1."""
    if n < 1:
        raise ValueError("n must be >= 1")
    m = first_resonant_index(system, mu_start) + n - 1
    return solve_xi_equals(system, TWO_PI * m, mu_hi=mu_start)


def mu_sequence(system: HopfSystem, n_max: int,
                mu_start: float = DEFAULT_MU_START) -> list:
    """The first n_max resonant parameters, strictly decreasing."""
    m1 = first_resonant_index(system, mu_start)
    return [solve_xi_equals(system, TWO_PI * (m1 + k), mu_hi=mu_start)
            for k in range(n_max)]


def mu_of_a(system: HopfSystem, n: int, a: float,
            mu_start: float = DEFAULT_MU_START) -> float:
    """Parameter with xi(mu) = xi(mu_n) + a, so the winding reduces to a (mod 2 pi)."""
    if not (0.0 <= a < TWO_PI):
        raise ValueError("a must lie in [0, 2*pi)")
    m = first_resonant_index(system, mu_start) + n - 1
    return solve_xi_equals(system, TWO_PI * m + a, mu_hi=mu_start)


def annulus_invariant(system: HopfSystem, mu: float, samples: int = 64) -> bool:
    """Sampled check that the reduced return map sends the annulus into itself."""
    try:
        rm = ReturnMap.reduced_raw(system, mu)
    except NotRelaxableError:
        return False
    z = np.linspace(1.0 / system.K4, system.K4, samples)
    th = np.linspace(0.0, TWO_PI, samples, endpoint=False)
    Z, TH = np.meshgrid(z, th, indexing="ij")
    z_out, _ = rm.map_arrays(Z, TH)
    return bool((z_out >= 1.0 / system.K4 - 1e-12).all()
                and (z_out <= system.K4 + 1e-12).all())


def mu_max(system: HopfSystem, mu_lo: float = 1e-8, mu_hi: float = 0.5,
           points: int = 61, samples: int = 64) -> float:
    """Largest mu on a log grid passing the annulus-invariance sample check."""
    grid = np.logspace(math.log10(mu_lo), math.log10(mu_hi), points)
    passing = [m for m in grid if annulus_invariant(system, m, samples)]
    if not passing:
        raise NotRelaxableError("annulus invariance fails on the whole grid")
    return float(max(passing))


# ---------------------------------------------------------------------------
# return maps
# ---------------------------------------------------------------------------

class ReturnMap:
    """Annulus self-map: kick followed by relaxation for tau(mu(a)).

    kind is one of 'reduced-exact' (closed forms), 'full-integrated'
    (numerical relaxation segment including g, h), or 'singular-limit'
    (the mu -> 0 member (z, theta) -> (1, pi/2 + beta0 L z sin theta + a)).
    Construct via the classmethods.  Calling the map raises LeftAnnulusError
    if the image leaves the annulus; map_arrays is the vectorised variant
    used by grid scans (no containment check).
    """

    def __init__(self, kind, system, a, mu=None, n=None, tol=1e-10,
                 mu_start=DEFAULT_MU_START, resonant_m=None):
        self.kind = kind
        self.system = system
        self.a = float(a)
        self.n = n
        self.tol = tol
        self.mu_start = mu_start
        self.resonant_m = resonant_m
        if kind == "singular-limit":
            self.mu = 0.0
            self.beta0_L = system.beta0 * system.L
            return
        self.mu = float(mu)
        self.tau = relaxation_time(system, self.mu)
        self.P = system.kick_size(self.mu)
        self.ztil = system.z_tilde(self.mu)
        self.beta_mu = system.beta(self.mu)
        self.gamma_mu = system.gamma(self.mu)

    # -- constructors -------------------------------------------------------

    @classmethod
    def reduced(cls, system, n, a, mu_start=DEFAULT_MU_START):
        m = first_resonant_index(system, mu_start) + n - 1
        mu = solve_xi_equals(system, TWO_PI * m + a, mu_hi=mu_start)
        return cls("reduced-exact", system, a, mu=mu, n=n,
                   mu_start=mu_start, resonant_m=m)

    @classmethod
    def reduced_raw(cls, system, mu):
        """Reduced map at a raw mu; the winding parameter is xi(mu) mod 2*pi."""
        a = wrap_angle(xi(system, mu))
        return cls("reduced-exact", system, a, mu=mu)

    @classmethod
    def full(cls, system, n, a, tol=1e-10, mu_start=DEFAULT_MU_START):
        m = first_resonant_index(system, mu_start) + n - 1
        mu = solve_xi_equals(system, TWO_PI * m + a, mu_hi=mu_start)
        return cls("full-integrated", system, a, mu=mu, n=n, tol=tol,
                   mu_start=mu_start, resonant_m=m)

    @classmethod
    def singular(cls, system, a):
        return cls("singular-limit", system, a)

    # -- evaluation ---------------------------------------------------------

    def __call__(self, p: AnnulusPoint) -> AnnulusPoint:
        z, th = self._apply(p.z, p.theta)
        out = AnnulusPoint(z=z, theta=float(wrap_angle(th)))
        if self.kind != "singular-limit" and not out.inside(self.system.K4):
            raise LeftAnnulusError(p, out.z)
        return out

    def _apply(self, z0, th0):
        if self.kind == "singular-limit":
            return 1.0, math.pi / 2 + self.beta0_L * z0 * math.sin(th0) + self.a
        if self.kind == "reduced-exact":
            z, th = self._reduced_scalar(z0, th0)
            return z, th
        return self._full_scalar(z0, th0)

    def _reduced_scalar(self, z0, th0):
        sys_ = self.system
        P, zt, mu = self.P, self.ztil, self.mu
        s, c = math.sin(th0), math.cos(th0)
        x = z0 * c
        y = z0 * s + P
        z1sq = x * x + y * y
        z1 = math.sqrt(z1sq)
        th1 = math.atan2(y, x)
        w = mu ** (2 * sys_.rho1 - 1)
        th_out = (th1 + self.a + 0.5 * self.beta_mu
                  * (w * z0 * z0 + 2.0 * w * P * z0 * s - w * z1sq / (zt * zt)))
        return z1 / zt, th_out

    def _full_scalar(self, z0, th0):
        sys_ = self.system
        mu, P, zt, T = self.mu, self.P, self.ztil, self.tau
        s, c = math.sin(th0), math.cos(th0)
        x, y = z0 * c, z0 * s + P
        z1, th1 = math.hypot(x, y), math.atan2(y, x)
        g = sys_.g or (lambda r, th, m: 0.0)
        h = sys_.h or (lambda r, th, m: 0.0)
        r1 = sys_.rho1
        om_eff = sys_.omega + self.gamma_mu * mu

        def rhs(tp, yv):
            zh, ph = yv
            tha = th1 + math.fmod(om_eff * tp * T, TWO_PI) + ph
            r = mu**r1 * zh
            dz = T * (-mu * zh + mu ** (4 * r1) * zh**5 * g(r, tha, mu))
            dph = T * (self.beta_mu * mu ** (2 * r1) * zh**2
                       + mu ** (4 * r1) * zh**4 * h(r, tha, mu))
            return (dz, dph)

        sol = solve_ivp(rhs, (0.0, 1.0), (z1, 0.0), method="RK45",
                        rtol=self.tol, atol=self.tol * 1e-2)
        if not sol.success:
            raise StepFailureError(sol.message)
        zh_out = float(sol.y[0][-1])
        phi_out = float(sol.y[1][-1])
        # the drift accumulated over tau reduces, modulo 2*pi, to the winding
        # parameter a minus the twist tail: (omega + gamma mu) tau =
        # xi(mu(a)) - (beta/2) L^2 mu^(2 rho2 - 1), and xi(mu(a)) = 2 pi m + a
        if self.resonant_m is not None:
            drift = math.fmod(
                self.a - 0.5 * self.beta_mu * sys_.L**2
                * mu ** (2 * sys_.rho2 - 1), TWO_PI)
        else:
            drift = math.fmod(om_eff * T, TWO_PI)
        return zh_out, th1 + drift + phi_out

    def map_arrays(self, z0, th0):
        """Vectorised map over numpy arrays (reduced/singular kinds only).

        Angle output is the lift (unreduced); no annulus containment check.
        """
        z0 = np.asarray(z0, dtype=float)
        th0 = np.asarray(th0, dtype=float)
        if self.kind == "singular-limit":
            return np.ones_like(z0), (math.pi / 2
                                      + self.beta0_L * z0 * np.sin(th0) + self.a)
        if self.kind != "reduced-exact":
            raise ValueError("map_arrays supports reduced/singular kinds")
        sys_ = self.system
        P, zt, mu = self.P, self.ztil, self.mu
        s, c = np.sin(th0), np.cos(th0)
        x, y = z0 * c, z0 * s + P
        z1sq = x * x + y * y
        z1 = np.sqrt(z1sq)
        th1 = np.arctan2(y, x)
        w = mu ** (2 * sys_.rho1 - 1)
        th_out = (th1 + self.a + 0.5 * self.beta_mu
                  * (w * z0 * z0 + 2.0 * w * P * z0 * s - w * z1sq / (zt * zt)))
        return z1 / zt, th_out

    # -- derivatives --------------------------------------------------------

    def jacobian(self, p: AnnulusPoint, fd_step: float = 1e-7) -> np.ndarray:
        """d(output)/d(z0, theta0); analytic except for the integrated kind."""
        z0, th0 = p.z, p.theta
        if self.kind == "singular-limit":
            amp = self.beta0_L
            return np.array([[0.0, 0.0],
                             [amp * math.sin(th0), amp * z0 * math.cos(th0)]])
        if self.kind == "reduced-exact":
            return self._reduced_jacobian(z0, th0)
        out = []
        for dz, dth in ((fd_step, 0.0), (0.0, fd_step)):
            zp, tp = self._apply(z0 + dz, th0 + dth)
            zm, tm = self._apply(z0 - dz, th0 - dth)
            out.append(((zp - zm) / (2 * fd_step), (tp - tm) / (2 * fd_step)))
        return np.array([[out[0][0], out[1][0]], [out[0][1], out[1][1]]])

    def _reduced_jacobian(self, z0, th0):
        sys_ = self.system
        P, zt, mu = self.P, self.ztil, self.mu
        s, c = math.sin(th0), math.cos(th0)
        u = z0 + P * s
        z1sq = z0 * z0 + 2 * P * z0 * s + P * P
        z1 = math.sqrt(z1sq)
        w = mu ** (2 * sys_.rho1 - 1)
        b = self.beta_mu
        one_m = 1.0 - 1.0 / (zt * zt)
        dz_dz0 = u / (z1 * zt)
        dz_dth = P * z0 * c / (z1 * zt)
        dth_dz0 = -P * c / z1sq + b * w * u * one_m
        dth_dth = z0 * u / z1sq + b * w * P * z0 * c * one_m
        return np.array([[dz_dz0, dz_dth], [dth_dz0, dth_dth]])

    def det_jacobian(self, p: AnnulusPoint) -> float:
        """Determinant of the return-map derivative.

        For the reduced kind this is exactly (z0/z1)/z_tilde: the kick
        contributes z0/z1 and the relaxation segment contributes 1/z_tilde.
        """
        if self.kind == "reduced-exact":
            z1 = kick(p, self.system, self.mu).z
            return (p.z / z1) / self.ztil
        return float(np.linalg.det(self.jacobian(p)))


def return_map(rm: ReturnMap, p: AnnulusPoint) -> AnnulusPoint:
    """Functional alias for applying a return map to a point."""
    return rm(p)


def singular_limit_restriction(rm: ReturnMap) -> OneDFamily:
    """The circle family traced on {z = 1} by the singular-limit angular part."""
    if rm.kind != "singular-limit":
        raise ValueError("restriction defined for the singular-limit kind")
    return OneDFamily(zeta=math.pi / 2, phi=SINE, beta0=rm.system.beta0)


# ---------------------------------------------------------------------------
# convergence and perturbation reports
# ---------------------------------------------------------------------------

@dataclass
class ConvergenceRow:
    n: int
    mu_n: float
    c0: float
    c1: float
    c2: float
    c3: float


@dataclass
class ConvergenceReport:
    rows: list
    fitted_slope: float        # least-squares slope of log c0 vs log mu_n
    target_slope: float        # rho1 - rho2
    monotone_violations: int   # inversions in the c0 trend


def _signed_angle_diff(x, y):
    return np.mod(x - y + math.pi, TWO_PI) - math.pi


def convergence_report(system: HopfSystem, a_grid, n_list,
                       derivative_order: int = 3,
                       kind: str = "reduced-exact",
                       grid: tuple = (64, 64),
                       mu_start: float = DEFAULT_MU_START,
                       tol: float = 1e-10) -> ConvergenceReport:
    """Sup-distance of T_{a,L,mu_n} to the singular limit, orders 0..3.

    Differences are taken of the wrapped gap field (finite-mu output minus
    limit output), so derivative mismatches are central finite differences
    of a genuinely small smooth field in each of (z0, theta0, a).  The full-
    integrated kind uses the same code path with integrated map values; keep
    its grid small since every node is an ODE solve.
    """
    if len(n_list) < 4:
        raise ValueError("need at least 4 resonant indices for a rate fit")
    if not (0 <= derivative_order <= 3):
        raise ValueError("derivative_order must be in 0..3")
    nz, nth = grid
    a_grid = np.atleast_1d(np.asarray(a_grid, dtype=float))
    zg = np.linspace(1.0 / system.K4, system.K4, nz)
    tg = np.linspace(0.0, TWO_PI, nth, endpoint=False)
    Z, TH = np.meshgrid(zg, tg, indexing="ij")
    amp0 = system.beta0 * system.L
    steps = {1: 1e-6, 2: 1e-4, 3: 1e-2}

    def gap_field(n, a, dz=0.0, dth=0.0, da=0.0):
        a_eff = a + da
        if kind == "reduced-exact":
            rm = ReturnMap.reduced(system, n, wrap_angle(a_eff), mu_start=mu_start)
            z_out, th_out = rm.map_arrays(Z + dz, TH + dth)
        else:
            rm = ReturnMap.full(system, n, float(wrap_angle(a_eff)), tol=tol,
                                mu_start=mu_start)
            z_out = np.empty_like(Z)
            th_out = np.empty_like(Z)
            for idx in np.ndindex(Z.shape):
                z_out[idx], th_out[idx] = rm._apply(Z[idx] + dz, TH[idx] + dth)
        z_lim = 1.0
        th_lim = math.pi / 2 + amp0 * (Z + dz) * np.sin(TH + dth) + a_eff
        return z_out - z_lim, _signed_angle_diff(th_out, th_lim)

    rows = []
    for n in n_list:
        mu_val = mu_n(system, n, mu_start=mu_start)
        dists = [0.0, 0.0, 0.0, 0.0]
        for a in a_grid:
            gz0, gt0 = gap_field(n, a)
            dists[0] = max(dists[0], float(np.abs(gz0).max()), float(np.abs(gt0).max()))
            for order in range(1, derivative_order + 1):
                hstep = steps[order]
                for var in ("z", "th", "a"):
                    kw = {"dz": hstep} if var == "z" else (
                        {"dth": hstep} if var == "th" else {"da": hstep})
                    kwm = {k: -v for k, v in kw.items()}
                    gzp, gtp = gap_field(n, a, **kw)
                    gzm, gtm = gap_field(n, a, **kwm)
                    if order == 1:
                        dz_fd = (gzp - gzm) / (2 * hstep)
                        dt_fd = (gtp - gtm) / (2 * hstep)
                    elif order == 2:
                        dz_fd = (gzp - 2 * gz0 + gzm) / hstep**2
                        dt_fd = (gtp - 2 * gt0 + gtm) / hstep**2
                    else:
                        kw2 = {k: 2 * v for k, v in kw.items()}
                        kw2m = {k: -2 * v for k, v in kw.items()}
                        gzp2, gtp2 = gap_field(n, a, **kw2)
                        gzm2, gtm2 = gap_field(n, a, **kw2m)
                        dz_fd = (gzp2 - 2 * gzp + 2 * gzm - gzm2) / (2 * hstep**3)
                        dt_fd = (gtp2 - 2 * gtp + 2 * gtm - gtm2) / (2 * hstep**3)
                    dists[order] = max(dists[order],
                                       float(np.abs(dz_fd).max()),
                                       float(np.abs(dt_fd).max()))
        rows.append(ConvergenceRow(n=n, mu_n=mu_val, c0=dists[0], c1=dists[1],
                                   c2=dists[2], c3=dists[3]))
    mus = np.array([r.mu_n for r in rows])
    c0s = np.array([r.c0 for r in rows])
    slope = float(np.polyfit(np.log(mus), np.log(c0s), 1)[0])
    inversions = int(np.sum(np.diff(c0s[np.argsort(mus)]) < 0))
    return ConvergenceReport(rows=rows, fitted_slope=slope,
                             target_slope=system.rho1 - system.rho2,
                             monotone_violations=inversions)


@dataclass
class PerturbationRow:
    mu: float
    zeta_tau: float
    theta_tilde_tau: float


@dataclass
class PerturbationReport:
    rows: list
    zeta_exponent: float
    theta_exponent: float
    zeta_reference: float      # 5 rho2 - rho1 - 1
    theta_reference: float     # 6 rho2 - 2


def _g_theta_independent(system: HopfSystem) -> bool:
    if system.g is None:
        return True
    probe = [system.g(0.1, th, 1e-4) for th in (0.0, 1.0, 2.5, 4.0)]
    return max(probe) - min(probe) < 1e-14


def perturbation_magnitude(system: HopfSystem, mu_list,
                           grid: tuple = (6, 8), tol: float = 1e-11,
                           theta_oscillation_cap: float = 2e4) -> PerturbationReport:
    """Measured size of the higher-order-term corrections after one relaxation.

    zeta is the radial gap |z_full(tau) - z_reduced(tau)|, maximised over a
    kick-image grid; when g does not depend on theta the radial equation
    decouples and is integrated on its own (the angular drift oscillates
    xi/2pi times per relaxation, which would otherwise dominate the cost).
    The angular gap is only integrated when the oscillation count is below
    theta_oscillation_cap; rows beyond it carry NaN there.
    """
    if system.g is None and system.h is None:
        raise ValueError("perturbation measurement needs a nonzero g or h")
    nz, nth = grid
    zg = np.linspace(1.0 / system.K4, system.K4, nz)
    tg = np.linspace(0.0, TWO_PI, nth, endpoint=False)
    r1 = system.rho1
    g = system.g or (lambda r, th, m: 0.0)
    h = system.h or (lambda r, th, m: 0.0)
    radial_only = _g_theta_independent(system)
    rows = []
    for mu in mu_list:
        T = relaxation_time(system, mu)
        P = system.kick_size(mu)
        bm, gm = system.beta(mu), system.gamma(mu)
        om_eff = system.omega + gm * mu
        want_theta = om_eff * T / TWO_PI <= theta_oscillation_cap
        run_coupled = want_theta or not radial_only
        zeta_best, theta_best = 0.0, 0.0
        for z0 in zg:
            for th0 in tg:
                x, y = z0 * math.cos(th0), z0 * math.sin(th0) + P
                z1, th1 = math.hypot(x, y), math.atan2(y, x)
                z_red = z1 * math.exp(-mu * T)
                if radial_only:
                    rhs = lambda tp, yv: (T * (-mu * yv[0] + mu ** (4 * r1)
                                               * yv[0]**5 * g(mu**r1 * yv[0], 0.0, mu)),)
                    sol = solve_ivp(rhs, (0.0, 1.0), (z1,), method="RK45",
                                    rtol=tol, atol=tol * 1e-2)
                    if not sol.success:
                        raise StepFailureError(sol.message)
                    zeta_best = max(zeta_best, abs(float(sol.y[0][-1]) - z_red))
                if run_coupled:

                    def rhs2(tp, yv):
                        zh, ph = yv
                        tha = th1 + math.fmod(om_eff * tp * T, TWO_PI) + ph
                        r = mu**r1 * zh
                        return (T * (-mu * zh + mu ** (4 * r1) * zh**5 * g(r, tha, mu)),
                                T * (bm * mu ** (2 * r1) * zh**2
                                     + mu ** (4 * r1) * zh**4 * h(r, tha, mu)))

                    sol = solve_ivp(rhs2, (0.0, 1.0), (z1, 0.0), method="RK45",
                                    rtol=tol, atol=tol * 1e-2)
                    if not sol.success:
                        raise StepFailureError(sol.message)
                    phi_red = (0.5 * bm * mu ** (2 * r1 - 1) * z1**2
                               * (1.0 - math.exp(-2.0 * mu * T)))
                    theta_best = max(theta_best,
                                     abs(float(sol.y[1][-1]) - phi_red))
                    if not radial_only:
                        zeta_best = max(zeta_best, abs(float(sol.y[0][-1]) - z_red))
        rows.append(PerturbationRow(
            mu=mu, zeta_tau=zeta_best,
            theta_tilde_tau=theta_best if run_coupled else math.nan))
    mus = np.array([r.mu for r in rows])
    zs = np.array([r.zeta_tau for r in rows])
    ts = np.array([r.theta_tilde_tau for r in rows])
    zeta_exp = (float(np.polyfit(np.log(mus), np.log(zs), 1)[0])
                if len(mus) >= 2 and (zs > 0).all() else math.nan)
    ok = np.isfinite(ts) & (ts > 0)
    theta_exp = (float(np.polyfit(np.log(mus[ok]), np.log(ts[ok]), 1)[0])
                 if ok.sum() >= 2 else math.nan)
    return PerturbationReport(
        rows=rows, zeta_exponent=zeta_exp, theta_exponent=theta_exp,
        zeta_reference=5 * system.rho2 - system.rho1 - 1.0,
        theta_reference=6 * system.rho2 - 2.0,
    )


def determinant_ratio_scan(system: HopfSystem, n_list, grid: int = 64,
                           a: float = 0.0,
                           mu_start: float = DEFAULT_MU_START):
    """Max pairwise |det DT| ratio of the reduced map over an annulus grid.

    Returns (K_D, per-mu maxima); det DT = (z0/z1)/z_tilde exactly, so the
    ratio only involves the kick factor z0/z1.
    """
    per_mu = []
    for n in n_list:
        rm = ReturnMap.reduced(system, n, a, mu_start=mu_start)
        z = np.linspace(1.0 / system.K4, system.K4, grid)
        th = np.linspace(0.0, TWO_PI, grid, endpoint=False)
        Z, TH = np.meshgrid(z, th, indexing="ij")
        z1 = np.sqrt((Z * np.cos(TH))**2 + (Z * np.sin(TH) + rm.P)**2)
        dets = (Z / z1) / rm.ztil
        per_mu.append(float(dets.max() / dets.min()))
    return max(per_mu), per_mu
