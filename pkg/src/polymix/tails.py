"""Survival curves, confidence intervals, slope fits, and the gamma statistic.

The pipeline estimates P[tau > t] on a log-spaced grid with Agresti-Coull
intervals, restricts attention to the reliable range (points whose raw count
still exceeds m_min), fits the tail exponent by weighted least squares in
log-log, and takes gamma = max over reliable grid points of p_tilde * t^beta.

Both lattice models spend a long time on a pre-asymptotic shoulder before the
power law shows, so the default fit window is the trailing `fit_decades`
decades of the reliable range after dropping head points with p_tilde above
`head_max`; see fit_window.  The gamma maximum is always taken over the full
reliable range, not the fit window.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

DEFAULT_Z = 1.96
DEFAULT_POINTS_PER_DECADE = 40
DEFAULT_M_MIN = 100
DEFAULT_HEAD_MAX = 0.75
DEFAULT_FIT_DECADES = 1.0


def log_grid(h, t_max, points_per_decade=DEFAULT_POINTS_PER_DECADE):
    """Log-spaced times h * 10^(k/ppd), capped at t_max."""
    if not h > 0.0:
        raise ValueError("h must be positive")
    if not t_max > h:
        raise ValueError("t_max must exceed h")
    n = int(math.floor(points_per_decade * math.log10(t_max / h) + 1e-9)) + 1
    grid = h * 10.0 ** (np.arange(n) / points_per_decade)
    return grid[grid <= t_max * (1.0 + 1e-12)]


def agresti_coull(m, n, z=DEFAULT_Z):
    """Adjusted binomial interval: (p_tilde, halfwidth).

    N~ = n + z^2, p~ = (m + z^2/2)/N~, halfwidth = z * sqrt(p~(1-p~)/N~).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 <= m <= n:
        raise ValueError("need 0 <= m <= n")
    if z < 0:
        raise ValueError("z must be >= 0")
    n_adj = n + z * z
    p = (m + 0.5 * z * z) / n_adj
    half = z * math.sqrt(p * (1.0 - p) / n_adj)
    return p, half


@dataclass(frozen=True)
class SurvivalCurve:
    """Empirical tail on a time grid.

    counts[k] = number of samples with tau > grid[k]; censored samples count
    as exceeding every grid point (grids never extend past the censoring
    horizon, so this is exact).
    """

    grid: np.ndarray
    counts: np.ndarray
    n_total: int
    z: float
    p_tilde: np.ndarray
    halfwidth: np.ndarray

    @classmethod
    def from_counts(cls, grid, counts, n_total, z=DEFAULT_Z):
        grid = np.asarray(grid, dtype=np.float64)
        counts = np.asarray(counts, dtype=np.int64)
        if len(grid) != len(counts):
            raise ValueError("grid and counts must have equal length")
        if n_total < 1:
            raise ValueError("n_total must be >= 1")
        p = np.empty(len(grid))
        half = np.empty(len(grid))
        for k in range(len(grid)):
            p[k], half[k] = agresti_coull(int(counts[k]), n_total, z)
        return cls(grid, counts, int(n_total), float(z), p, half)

    @classmethod
    def from_probabilities(cls, grid, probs, n_total=10**12):
        """Synthetic exact curve (halfwidth 0): for injecting closed forms."""
        grid = np.asarray(grid, dtype=np.float64)
        probs = np.asarray(probs, dtype=np.float64)
        counts = np.rint(probs * n_total).astype(np.int64)
        return cls(grid, counts, int(n_total), 0.0, probs.copy(),
                   np.zeros(len(grid)))

    def __len__(self):
        return len(self.grid)

    def validate(self):
        if np.any(np.diff(self.grid) <= 0.0):
            raise AssertionError("grid must be strictly increasing")
        if np.any(np.diff(self.counts) > 0):
            raise AssertionError("counts must be nonincreasing")
        if self.counts[0] > self.n_total or self.counts[-1] < 0:
            raise AssertionError("counts out of [0, n_total]")
        if np.any(self.halfwidth < 0.0):
            raise AssertionError("halfwidth must be >= 0")
        return self


def estimate_survival(outcomes, grid, z=DEFAULT_Z):
    """SurvivalCurve from a stream of PassageOutcome."""
    grid = np.asarray(grid, dtype=np.float64)
    counts = np.zeros(len(grid), dtype=np.int64)
    n_total = 0
    for out in outcomes:
        n_total += 1
        if out.hit:
            counts[: np.searchsorted(grid, out.time, side="left")] += 1
        else:
            counts += 1
    if n_total == 0:
        raise ValueError("empty outcome stream")
    return SurvivalCurve.from_counts(grid, counts, n_total, z)


def counts_of_times(times, grid):
    """Tail counts of hit times over the grid (no censored entries)."""
    times = np.asarray(times, dtype=np.float64)
    # tau > t_k  <=>  k < searchsorted(grid, tau, 'left')
    idx = np.searchsorted(grid, times, side="left")
    counts = np.zeros(len(grid) + 1, dtype=np.int64)
    np.add.at(counts, idx, -1)
    counts[0] += len(times)
    return np.cumsum(counts)[:-1]


def reliable_range(curve, m_min=DEFAULT_M_MIN):
    """Half-open index interval (0, stop) of points with counts >= m_min.

    Counts are nonincreasing, so the reliable points form a prefix.
    """
    below = np.nonzero(curve.counts < m_min)[0]
    stop = int(below[0]) if len(below) else len(curve)
    return 0, stop


@dataclass(frozen=True)
class TailFit:
    beta: float
    stderr: float
    fit_range: tuple
    n_points: int


def fit_slope(curve, fit_range):
    """Weighted LS of log p_tilde on log t over the half-open index range.

    Weights are (halfwidth/p_tilde)^-2; a synthetic curve with zero halfwidth
    everywhere falls back to equal weights.  beta is the negated slope; the
    stderr is residual-scaled, so an exact power law reports stderr 0.
    """
    i0, i1 = fit_range
    if i1 - i0 < 3:
        raise ValueError("need at least 3 points to fit")
    t = curve.grid[i0:i1]
    p = curve.p_tilde[i0:i1]
    half = curve.halfwidth[i0:i1]
    if np.any(p <= 0.0):
        raise ValueError("fit range contains nonpositive p_tilde")
    if np.all(half == 0.0):
        w = np.ones(len(t))
    elif np.any(half == 0.0):
        raise ValueError("mixed zero and positive halfwidths in fit range")
    else:
        w = (p / half) ** 2
    x = np.log(t)
    y = np.log(p)
    if np.allclose(x, x[0]):
        raise ValueError("degenerate fit design: all times equal")
    xm = np.average(x, weights=w)
    ym = np.average(y, weights=w)
    sxx = np.sum(w * (x - xm) ** 2)
    slope = np.sum(w * (x - xm) * (y - ym)) / sxx
    resid = y - (ym + slope * (x - xm))
    chi2_red = np.sum(w * resid**2) / (len(t) - 2)
    stderr = math.sqrt(chi2_red / sxx)
    return TailFit(beta=float(-slope), stderr=float(stderr),
                   fit_range=(int(i0), int(i1)), n_points=int(i1 - i0))


def fit_window(curve, m_min=DEFAULT_M_MIN, head_max=DEFAULT_HEAD_MAX,
               fit_decades=DEFAULT_FIT_DECADES):
    """Default slope-fit window (half-open index range).

    Within the reliable range, drop the head where p_tilde > head_max (the
    pre-asymptotic shoulder) and keep the trailing fit_decades decades.  The
    window is widened back toward the head if that leaves fewer than 3 points.
    """
    lo, hi = reliable_range(curve, m_min)
    start = lo
    while start < hi and curve.p_tilde[start] > head_max:
        start += 1
    if hi - start < 3:
        start = max(lo, hi - 3)
    if hi - start < 3:
        raise ValueError("fewer than 3 fittable points")
    t_lo = curve.grid[hi - 1] / 10.0**fit_decades
    i0 = int(np.searchsorted(curve.grid[:hi], t_lo, side="left"))
    i0 = max(start, min(i0, hi - 3))
    return i0, hi


@dataclass(frozen=True)
class GammaEstimate:
    """gamma = max over reliable grid points t >= h of p_tilde * t^beta.

    stabilized: both sample doublings (quarter->half->full) moved the value
    by < rel_change; None when the input carries no growth information.
    std_dev: standard error of the value from batch means.
    """

    value: float
    argmax_time: float
    stabilized: Optional[bool]
    std_dev: float
    checkpoints: tuple = ()
    n_batches_used: int = 0


def gamma_from_curve(curve, beta, h=None, m_min=DEFAULT_M_MIN):
    """(value, argmax_time) over reliable points with t >= h, else None."""
    lo, hi = reliable_range(curve, m_min)
    if h is None:
        h = curve.grid[0]
    vals = curve.p_tilde[lo:hi] * curve.grid[lo:hi] ** beta
    ok = curve.grid[lo:hi] >= h
    if not np.any(ok):
        return None
    vals = np.where(ok, vals, -np.inf)
    k = int(np.argmax(vals))
    return float(vals[k]), float(curve.grid[lo + k])


@dataclass(frozen=True)
class TailCounts:
    """Survival counts kept per farm chunk, in chunk order.

    Prefixes of the chunk sequence give deterministic sample-growth
    checkpoints; consecutive chunk groups give the batches.  All estimators
    below are exact integer reductions, so results never depend on worker
    count.
    """

    grid: np.ndarray
    chunk_counts: np.ndarray  # (n_chunks, len(grid)) int64
    chunk_sizes: np.ndarray  # (n_chunks,) int64
    z: float = DEFAULT_Z

    @property
    def n_total(self):
        return int(self.chunk_sizes.sum())

    def curve(self, n_chunks=None):
        take = len(self.chunk_sizes) if n_chunks is None else n_chunks
        counts = self.chunk_counts[:take].sum(axis=0)
        n = int(self.chunk_sizes[:take].sum())
        return SurvivalCurve.from_counts(self.grid, counts, n, self.z)

    def batch_curves(self, n_batches):
        parts = np.array_split(np.arange(len(self.chunk_sizes)), n_batches)
        out = []
        for part in parts:
            if len(part) == 0:
                continue
            counts = self.chunk_counts[part].sum(axis=0)
            n = int(self.chunk_sizes[part].sum())
            out.append(SurvivalCurve.from_counts(self.grid, counts, n, self.z))
        return out


def gamma_estimate(data, beta, h=None, m_min=DEFAULT_M_MIN, rel_change=0.05,
                   n_batches=10):
    """GammaEstimate from TailCounts (full metadata) or a bare SurvivalCurve.

    A bare curve yields value/argmax only (stabilized None, std_dev 0): there
    is no sample-growth or batch information to use.
    """
    if isinstance(data, SurvivalCurve):
        got = gamma_from_curve(data, beta, h, m_min)
        if got is None:
            raise ValueError("no reliable grid point at or after h")
        value, argmax = got
        return GammaEstimate(value, argmax, None, 0.0)

    full = data.curve()
    got = gamma_from_curve(full, beta, h, m_min)
    if got is None:
        raise ValueError("no reliable grid point at or after h")
    value, argmax = got
    n_chunks = len(data.chunk_sizes)
    checkpoints = []
    for frac in (4, 2, 1):
        take = max(1, n_chunks // frac)
        g = gamma_from_curve(data.curve(take), beta, h, m_min)
        checkpoints.append(g[0] if g is not None else math.nan)
    stabilized = None
    if n_chunks >= 4 and not any(math.isnan(c) for c in checkpoints):
        q, half_, full_ = checkpoints
        stabilized = (
            abs(half_ - q) < rel_change * abs(half_)
            and abs(full_ - half_) < rel_change * abs(full_)
        )
    batch_vals = []
    for curve in data.batch_curves(n_batches):
        g = gamma_from_curve(curve, beta, h, m_min)
        if g is not None:
            batch_vals.append(g[0])
    if len(batch_vals) >= 2:
        std_dev = float(np.std(batch_vals, ddof=1) / math.sqrt(len(batch_vals)))
    else:
        std_dev = 0.0
    return GammaEstimate(value, argmax, stabilized, std_dev,
                         checkpoints=tuple(checkpoints),
                         n_batches_used=len(batch_vals))


# ---- moment/tail series checks ----------------------------------------------


def power_law_tail(c, beta):
    """P[Z > n] = min(1, c * n^-beta) as a clean vectorized callable."""

    def tail(n):
        n = np.asarray(n, dtype=np.float64)
        out = np.ones_like(n)
        pos = n > 0.0
        out[pos] = np.minimum(1.0, c * n[pos] ** -beta)
        return out

    return tail


@dataclass(frozen=True)
class MomentReport:
    """Truncated-series report for E[Z^(beta-epsilon)] next to E[Z^beta].

    converged: the last added increment of the (beta-epsilon)-moment fell
    below tol.  beta_divergent: per-decade block sums of the beta-moment
    series stopped decaying (ratio of the last two blocks >= 0.5), the
    signature of a logarithmically growing truncated sum.
    """

    exponent: float
    value: float
    last_increment: float
    converged: bool
    beta_exponent: float
    beta_value: float
    beta_divergent: bool
    block_sums: tuple
    n_max: int


def _tail_on_integers(tail, n_max):
    n = np.arange(n_max + 1, dtype=np.float64)
    if isinstance(tail, SurvivalCurve):
        # right-continuous step lookup of p_tilde, truncated at the grid end
        idx = np.searchsorted(tail.grid, n, side="right") - 1
        vals = np.where(idx >= 0, tail.p_tilde[np.clip(idx, 0, None)], 1.0)
        vals = np.where(n > tail.grid[-1], 0.0, vals)
        return vals
    return np.asarray(tail(n), dtype=np.float64)


def _moment_increments(tails, q, n_max):
    n = np.arange(n_max, dtype=np.float64)
    return ((n + 1.0) ** q - n**q) * tails[:n_max]


def moment_tail_check(tail, beta, epsilon, n_max=10**6, tol=1e-6):
    """Check the moment/tail relation numerically for a given tail.

    Sums E[Z^q] = sum_n ((n+1)^q - n^q) P[Z > n] truncated at n_max for
    q = beta - epsilon (expected convergent when the tail decays like n^-beta)
    and for q = beta (expected divergent for an exact power law).
    """
    if not epsilon > 0.0:
        raise ValueError("epsilon must be positive")
    if not beta > epsilon:
        raise ValueError("need beta > epsilon")
    tails = _tail_on_integers(tail, n_max)
    q = beta - epsilon
    inc_q = _moment_increments(tails, q, n_max)
    inc_b = _moment_increments(tails, beta, n_max)
    # per-decade block sums of the beta series reveal log growth
    blocks = []
    lo = 1
    while lo < n_max:
        hi = min(lo * 10, n_max)
        blocks.append(float(inc_b[lo:hi].sum()))
        lo = hi
    divergent = (
        len(blocks) >= 2
        and blocks[-1] > tol
        and blocks[-1] >= 0.5 * blocks[-2]
    )
    return MomentReport(
        exponent=q,
        value=float(inc_q.sum()),
        last_increment=float(inc_q[-1]),
        converged=bool(inc_q[-1] < tol),
        beta_exponent=beta,
        beta_value=float(inc_b.sum()),
        beta_divergent=bool(divergent),
        block_sums=tuple(blocks),
        n_max=int(n_max),
    )
