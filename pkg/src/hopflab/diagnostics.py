"""Statistical chaos diagnostics for annulus return maps.

Numerical stand-ins for the attractor properties of interest: the top
Lyapunov exponent (positive exponent on a large set), occupation histograms
(empirical invariant measures and their seed-independence), autocorrelation
decay, a central-limit statistic for Holder observables, and basin
statistics over grids of initial conditions.

Orbits are generated with a counter-based (Philox) generator keyed by an
explicit seed, so every experiment is reproducible bit-for-bit from its
recorded seed in single-threaded mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _fast
from .circle import TWO_PI
from .kicked import AnnulusPoint, ReturnMap

OBSERVABLES = {"sin_theta": 0, "cos_theta": 1, "z": 2}

#: default number of iterates discarded before statistics start
DEFAULT_BURN_IN = 10_000


class EscapedError(RuntimeError):
    """Orbit left the annulus."""

    def __init__(self, step: int):
        super().__init__(f"orbit left the annulus at step {step}")
        self.step = step


class DegenerateObservableError(ValueError):
    """Observable has (numerically) zero variance along the orbit."""


class ZeroVarianceError(RuntimeError):
    """Block-sum variance vanished (coboundary observable)."""


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator; splittable and stable across platforms."""
    return np.random.Generator(np.random.Philox(key=seed))


def random_annulus_point(rng: np.random.Generator, K4: float) -> AnnulusPoint:
    return AnnulusPoint(z=float(rng.uniform(1.0 / K4, K4)),
                        theta=float(rng.uniform(0.0, TWO_PI)))


def _kernel_args(rm: ReturnMap):
    if rm.kind == "reduced-exact":
        w = rm.mu ** (2 * rm.system.rho1 - 1)
        return ("reduced", rm.P, rm.ztil, w, rm.beta_mu, rm.a)
    if rm.kind == "singular-limit":
        return ("singular", rm.beta0_L, rm.a)
    return ("generic",)


# ---------------------------------------------------------------------------
# Lyapunov exponents
# ---------------------------------------------------------------------------

@dataclass
class LyapunovEstimate:
    lambda1: float
    stderr: float
    n: int
    burn_in: int


def lyapunov_top(rm: ReturnMap, p0: AnnulusPoint, n: int,
                 burn_in: int = DEFAULT_BURN_IN, n_batches: int = 20,
                 fd_step: float = 1e-7) -> LyapunovEstimate:
    """Top Lyapunov exponent via tangent renormalisation.

    Jacobians are analytic for the reduced and singular kinds; the
    full-integrated kind falls back to centred finite differences of the map
    (step fd_step), which makes it expensive -- use modest n there.
    Standard error comes from batch means over n_batches batches.
    """
    if n < 10_000:
        raise ValueError("need n >= 10^4 iterates after burn-in")
    args = _kernel_args(rm)
    if args[0] == "reduced":
        _, P, zt, w, b, a = args
        lam, err, esc, step = _fast.reduced_lyapunov(
            p0.z, p0.theta, P, zt, w, b, a, rm.system.K4, n, burn_in, n_batches)
        if esc:
            raise EscapedError(step)
        return LyapunovEstimate(lam, err, n, burn_in)
    if args[0] == "singular":
        _, amp, a = args
        lam, err, _, _ = _fast.singular_lyapunov(
            p0.z, p0.theta, amp, a, n, burn_in, n_batches)
        return LyapunovEstimate(lam, err, n, burn_in)
    # generic python path (full-integrated)
    z, th = p0.z, p0.theta
    tv = np.array([1.0, 1.0]) / math.sqrt(2.0)
    logs = np.empty(n)
    for i in range(burn_in + n):
        pt = AnnulusPoint(z, th)
        J = rm.jacobian(pt, fd_step=fd_step)
        tv = J @ tv
        gn = float(np.hypot(tv[0], tv[1]))
        tv /= gn
        out = rm(pt)
        z, th = out.z, out.theta
        if i >= burn_in:
            logs[i - burn_in] = math.log(gn)
    lam = float(logs.mean())
    bm = logs[: (n // n_batches) * n_batches].reshape(n_batches, -1).mean(axis=1)
    return LyapunovEstimate(lam, float(bm.std(ddof=1) / math.sqrt(n_batches)),
                            n, burn_in)


# ---------------------------------------------------------------------------
# empirical measures
# ---------------------------------------------------------------------------

@dataclass
class Histogram2D:
    """Normalised occupation histogram over the annulus with Birkhoff averages."""

    counts: np.ndarray           # (nz, nth), sums to 1
    z_edges: np.ndarray
    theta_edges: np.ndarray
    birkhoff: dict = field(default_factory=dict)
    n: int = 0


def empirical_measure(rm: ReturnMap, p0: AnnulusPoint, n: int,
                      burn_in: int = DEFAULT_BURN_IN,
                      bins: tuple = (64, 256)) -> Histogram2D:
    """Occupation histogram of one orbit, mass-normalised to 1.

    Birkhoff averages of the test observables (1, sin theta, cos theta, z)
    are accumulated alongside, exactly, not from the binned measure.
    """
    nz, nth = bins
    K4 = rm.system.K4
    args = _kernel_args(rm)
    if args[0] == "reduced":
        _, P, zt, w, b, a = args
        counts, birk, esc, step = _fast.reduced_histogram(
            p0.z, p0.theta, P, zt, w, b, a, K4, n, burn_in, nz, nth)
        if esc:
            raise EscapedError(step)
    elif args[0] == "singular":
        _, amp, a = args
        counts, birk, _, _ = _fast.singular_histogram(
            p0.z, p0.theta, amp, a, K4, n, burn_in, nz, nth)
    else:
        raise ValueError("empirical_measure supports reduced/singular kinds")
    return Histogram2D(
        counts=counts / counts.sum(),
        z_edges=np.linspace(1.0 / K4, K4, nz + 1),
        theta_edges=np.linspace(0.0, TWO_PI, nth + 1),
        birkhoff={
            "one": birk[0] / n,
            "sin_theta": birk[1] / n,
            "cos_theta": birk[2] / n,
            "z": birk[3] / n,
        },
        n=n,
    )


def tv_distance(h1: Histogram2D, h2: Histogram2D) -> float:
    """Total-variation distance between two normalised histograms."""
    return 0.5 * float(np.abs(h1.counts - h2.counts).sum())


def pushforward_tv(rm: ReturnMap, hist: Histogram2D,
                   subsample: int = 32) -> tuple:
    """Change of the histogram under one pushforward by the map.

    Each bin's mass is spread over a subsample x subsample grid of source
    points before mapping; the map stretches angular bins by a factor ~L, so
    the subgrid spacing must resolve the image at the bin scale (pick
    subsample >= L / bins_theta * 2*pi / bin_width ~ L).  Returns
    (total TV distance, max per-bin deviation).
    """
    nz, nth = hist.counts.shape
    ze, te = hist.z_edges, hist.theta_edges
    frac = (np.arange(subsample) + 0.5) / subsample
    pushed = np.zeros_like(hist.counts)
    w = 1.0 / subsample**2
    for i in range(nz):
        if not hist.counts[i].any():
            continue
        zs = ze[i] + frac * (ze[i + 1] - ze[i])
        for fz in zs:
            TH = te[:-1][:, None] + frac[None, :] * (te[1] - te[0])
            z_out, th_out = rm.map_arrays(np.full_like(TH, fz), TH)
            th_out = np.mod(th_out, TWO_PI)
            iz = np.clip(((z_out - ze[0]) / (ze[-1] - ze[0]) * nz).astype(int),
                         0, nz - 1)
            it = np.clip((th_out / TWO_PI * nth).astype(int), 0, nth - 1)
            mass = np.broadcast_to(hist.counts[i][:, None] * w, TH.shape)
            np.add.at(pushed, (iz, it), mass)
    diff = np.abs(pushed - hist.counts)
    return 0.5 * float(diff.sum()), float(diff.max())


# ---------------------------------------------------------------------------
# observable series, autocorrelation, CLT
# ---------------------------------------------------------------------------

def observable_series(rm: ReturnMap, observable, p0: AnnulusPoint, n: int,
                      burn_in: int = DEFAULT_BURN_IN) -> np.ndarray:
    """Time series of a named observable ('sin_theta', 'cos_theta', 'z')."""
    code = OBSERVABLES[observable] if isinstance(observable, str) else None
    args = _kernel_args(rm)
    if code is not None and args[0] == "reduced":
        _, P, zt, w, b, a = args
        out, esc, step = _fast.reduced_series(
            p0.z, p0.theta, P, zt, w, b, a, rm.system.K4, n, burn_in, code)
        if esc:
            raise EscapedError(step)
        return out
    if code is not None and args[0] == "singular":
        _, amp, a = args
        out, _, _ = _fast.singular_series(p0.z, p0.theta, amp, a, n, burn_in, code)
        return out
    fn = observable if callable(observable) else {
        "sin_theta": lambda p: math.sin(p.theta),
        "cos_theta": lambda p: math.cos(p.theta),
        "z": lambda p: p.z,
    }[observable]
    out = np.empty(n)
    pt = p0
    for i in range(burn_in + n):
        pt = rm(pt)
        if i >= burn_in:
            out[i - burn_in] = fn(pt)
    return out


@dataclass
class AutocorrResult:
    lags: np.ndarray
    values: np.ndarray          # normalised autocovariance, value 1 at lag 0
    decay_rate: float | None    # fitted tau with |rho_k| ~ C tau^k, else None
    flag: str                   # 'decaying', 'non-decaying', or 'below-noise'
    noise_floor: float


def autocorrelation(rm: ReturnMap, observable, p0: AnnulusPoint, n: int,
                    max_lag: int = 64,
                    burn_in: int = DEFAULT_BURN_IN) -> AutocorrResult:
    """Normalised autocovariance up to max_lag with an exponential-decay fit.

    The fit uses lags whose |rho| sits above the noise floor 3/sqrt(n); when
    the sequence never drops to the floor within max_lag it is flagged
    non-decaying and no rate is returned.
    """
    x = observable_series(rm, observable, p0, n, burn_in)
    x = x - x.mean()
    var = float(x @ x) / n
    if var < 1e-12:
        raise DegenerateObservableError("observable variance below 1e-12")
    vals = np.empty(max_lag + 1)
    for k in range(max_lag + 1):
        vals[k] = float(x[: n - k] @ x[k:]) / (n * var)
    noise = 3.0 / math.sqrt(n)
    lags = np.arange(max_lag + 1)
    # quasi-periodic signals revisit O(1) correlation in the tail; mixing
    # ones sit at the noise floor there
    tail = np.abs(vals[1 + 3 * max_lag // 4:])
    if tail.size and tail.max() > max(0.2, 5.0 * noise):
        return AutocorrResult(lags, vals, None, "non-decaying", noise)
    above = np.abs(vals[1:]) > noise
    if not above.any():
        return AutocorrResult(lags, vals, None, "below-noise", noise)
    ks = 1 + np.nonzero(above)[0]
    if len(ks) >= 2:
        rate = float(np.exp(np.polyfit(ks, np.log(np.abs(vals[ks])), 1)[0]))
    else:
        rate = float(abs(vals[ks[0]]) ** (1.0 / ks[0]))
    return AutocorrResult(lags, vals, rate, "decaying", noise)


@dataclass
class CltResult:
    statistic: float            # KS distance of normalised block sums to N(0,1)
    critical_5pct: float
    n_blocks: int
    block_variance: float


def clt_from_series(x: np.ndarray, block_len: int) -> CltResult:
    """CLT statistic for an already-generated observable series."""
    n_blocks = len(x) // block_len
    if n_blocks < 1000:
        raise ValueError("need n/block_len >= 10^3 blocks")
    x = np.asarray(x, dtype=float)[: n_blocks * block_len]
    x = x - x.mean()
    series_var = float(x.var())
    sums = x.reshape(n_blocks, block_len).sum(axis=1) / math.sqrt(block_len)
    var = float(sums.var(ddof=1))
    # a coboundary telescopes: its block-sum variance collapses to
    # O(series variance / block_len) instead of a positive limit
    if var < max(1e-12, 10.0 * series_var / block_len):
        raise ZeroVarianceError(
            f"limiting variance estimate {var:.3e} is degenerate "
            f"(series variance {series_var:.3e}, block length {block_len})")
    return CltResult(
        statistic=ks_normal_statistic(sums / math.sqrt(var)),
        critical_5pct=1.358 / math.sqrt(n_blocks),
        n_blocks=n_blocks,
        block_variance=var,
    )


def clt_check(rm: ReturnMap, observable, p0: AnnulusPoint, n: int,
              block_len: int, burn_in: int = DEFAULT_BURN_IN) -> CltResult:
    """Kolmogorov-Smirnov distance of normalised block sums to standard normal.

    Blocks of length block_len of the centred observable are summed and
    scaled by sqrt(block_len); their empirical distribution (rescaled by the
    estimated standard deviation) is compared to the normal CDF.
    """
    x = observable_series(rm, observable, p0, n, burn_in)
    return clt_from_series(x, block_len)


def ks_normal_statistic(samples: np.ndarray) -> float:
    """KS distance of a sample (already standardised) to the normal CDF."""
    from scipy.stats import norm
    u = np.sort(np.asarray(samples, dtype=float))
    m = len(u)
    cdf = norm.cdf(u)
    i = np.arange(1, m + 1)
    return float(np.max(np.maximum(i / m - cdf, cdf - (i - 1) / m)))


# ---------------------------------------------------------------------------
# basin statistics and parameter sweeps
# ---------------------------------------------------------------------------

@dataclass
class BasinResult:
    fraction_positive: float
    lambda_grid: np.ndarray
    stderr_grid: np.ndarray
    escaped: np.ndarray
    escape_count: int
    threshold: float


def basin_sample(rm: ReturnMap, grid: tuple, n: int,
                 threshold: float = 0.0,
                 burn_in: int = DEFAULT_BURN_IN) -> BasinResult:
    """Per-cell Lyapunov exponents over an initial-condition grid.

    Returns the fraction of non-escaping cells with lambda1 > threshold;
    escapes are counted separately, never silently dropped.
    """
    nz, nth = grid
    K4 = rm.system.K4
    zc = np.linspace(1.0 / K4, K4, nz + 1)[:-1] + (K4 - 1.0 / K4) / (2 * nz)
    tc = np.linspace(0.0, TWO_PI, nth, endpoint=False) + math.pi / nth
    Z, TH = np.meshgrid(zc, tc, indexing="ij")
    m = Z.size
    args = _kernel_args(rm)
    if args[0] != "reduced":
        raise ValueError("basin_sample supports the reduced kind")
    _, P, zt, w, b, a = args
    lams, errs, esc = _fast.reduced_lyapunov_batch(
        Z.ravel(), TH.ravel(),
        np.full(m, P), np.full(m, zt), np.full(m, w), np.full(m, b),
        np.full(m, a), K4, n, burn_in, 20)
    ok = ~esc
    frac = float((lams[ok] > threshold).mean()) if ok.any() else 0.0
    return BasinResult(
        fraction_positive=frac,
        lambda_grid=lams.reshape(nz, nth),
        stderr_grid=errs.reshape(nz, nth),
        escaped=esc.reshape(nz, nth),
        escape_count=int(esc.sum()),
        threshold=threshold,
    )


def lyapunov_over_parameters(system, n_index_list, a: float, n: int,
                             burn_in: int = DEFAULT_BURN_IN,
                             seed: int = 0, mu_start: float = 0.05):
    """Batch top-Lyapunov estimates across a list of resonant indices.

    One random initial point per index (seeded); returns per-index arrays
    (mu, lambda1, stderr, escaped).  The batch kernel runs the independent
    orbits in parallel without affecting bit-reproducibility.
    """
    from .kicked import solve_xi_equals, first_resonant_index
    rng = make_rng(seed)
    m1 = first_resonant_index(system, mu_start)
    mus, Ps, zts, ws, bs = [], [], [], [], []
    for nn in n_index_list:
        mu = solve_xi_equals(system, TWO_PI * (m1 + nn - 1) + a, mu_hi=mu_start)
        mus.append(mu)
        Ps.append(system.kick_size(mu))
        zts.append(system.z_tilde(mu))
        ws.append(mu ** (2 * system.rho1 - 1))
        bs.append(system.beta(mu))
    mcount = len(mus)
    z0s = rng.uniform(1.0 / system.K4, system.K4, mcount)
    th0s = rng.uniform(0.0, TWO_PI, mcount)
    lams, errs, esc = _fast.reduced_lyapunov_batch(
        z0s, th0s, np.array(Ps), np.array(zts), np.array(ws), np.array(bs),
        np.full(mcount, a), system.K4, n, burn_in, 20)
    return np.array(mus), lams, errs, esc
