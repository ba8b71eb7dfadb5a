"""Coupling laboratory on finite chains.

Everything here is exactly computable: finite state space, explicit row-
stochastic kernel, explicit minorization pair (eta, theta) on a reference
set.  The module builds the split chain (state space extended by a copy of
the reference set that acts as a true atom), simulates the simultaneous-
renewal coupling, and checks the coupling inequality

    TV(mu P^n, nu P^n) <= 2 P[T > n]

with the exact left side from matrix iteration and the right side from
simulation with an upper confidence limit.  The coupling time convention is
T = 1 + (first time both copies sit in the atom simultaneously): one step
later both chains draw from the atom's exit law, so the bound is a theorem
for every sample.  The standalone renewal sampler below uses the plain
first-common-epoch convention instead, where already-aligned zero delays
give T = 0.
"""

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import farm
from . import rng as rng_mod
from .tails import DEFAULT_Z, SurvivalCurve, agresti_coull

ROW_TOL = 1e-12


def minorization(kernel, refset_idx):
    """Componentwise row minimum over the refset: maximal (eta, theta)."""
    mins = np.min(kernel[list(refset_idx)], axis=0)
    eta = float(mins.sum())
    if eta <= 0.0:
        raise ValueError("refset rows share no common component (eta = 0)")
    return eta, mins / eta


class DiscreteChain:
    """Finite chain with a reference set and a minorization pair.

    kernel(x, y) >= eta * theta(y) for every x in the refset; when eta/theta
    are not supplied they are computed as the componentwise row minimum over
    the refset, which gives the maximal eta for that refset.
    """

    def __init__(self, states, kernel, refset, eta=None, theta=None):
        self.states = tuple(states)
        self.kernel = np.asarray(kernel, dtype=np.float64)
        n = len(self.states)
        if self.kernel.shape != (n, n):
            raise ValueError(f"kernel must be {n}x{n}")
        if np.any(self.kernel < 0.0):
            raise ValueError("kernel entries must be >= 0")
        bad = np.nonzero(np.abs(self.kernel.sum(axis=1) - 1.0) > ROW_TOL)[0]
        if len(bad):
            raise ValueError(f"row {self.states[bad[0]]!r} does not sum to 1")
        self.refset = tuple(refset)
        if not self.refset:
            raise ValueError("refset must be nonempty")
        if len(set(self.refset)) != len(self.refset):
            raise ValueError("refset has duplicate states")
        index = {s: i for i, s in enumerate(self.states)}
        try:
            self.refset_idx = tuple(index[s] for s in self.refset)
        except KeyError as err:
            raise ValueError(f"refset state {err.args[0]!r} unknown") from None
        if (eta is None) != (theta is None):
            raise ValueError("supply eta and theta together or neither")
        if eta is None:
            eta, theta = minorization(self.kernel, self.refset_idx)
        theta = np.asarray(theta, dtype=np.float64)
        if not 0.0 < eta <= 1.0:
            raise ValueError("eta must lie in (0, 1]")
        if theta.shape != (n,) or np.any(theta < 0.0):
            raise ValueError("theta must be a nonnegative vector over states")
        if abs(theta.sum() - 1.0) > ROW_TOL:
            raise ValueError("theta must sum to 1")
        self.eta = float(eta)
        self.theta = theta
        for i in self.refset_idx:
            short = self.kernel[i] - self.eta * self.theta
            j = int(np.argmin(short))
            if short[j] < -ROW_TOL:
                raise ValueError(
                    "minorization fails at "
                    f"({self.states[i]!r}, {self.states[j]!r})"
                )

    def __len__(self):
        return len(self.states)

    def distribution(self, spec):
        """Distribution vector from a vector, a state label, or an index."""
        if isinstance(spec, str):
            spec = self.states.index(spec)
        if np.isscalar(spec):
            out = np.zeros(len(self.states))
            out[int(spec)] = 1.0
            return out
        mu = np.asarray(spec, dtype=np.float64)
        if mu.shape != (len(self.states),) or np.any(mu < 0.0):
            raise ValueError("distribution must be nonnegative over states")
        if abs(mu.sum() - 1.0) > 1e-9:
            raise ValueError("distribution must sum to 1")
        return mu

    def as_dict(self):
        return {
            "states": list(self.states),
            "kernel": [[float(v) for v in row] for row in self.kernel],
            "refset": list(self.refset),
            "eta": self.eta,
            "theta": [float(v) for v in self.theta],
        }


def chain_to_json(chain, indent=2):
    return json.dumps(chain.as_dict(), indent=indent)


def chain_from_json(text):
    """DiscreteChain from JSON with states, kernel (row-major), refset, and
    an optional eta/theta pair."""
    raw = json.loads(text)
    kernel = np.asarray(raw["kernel"], dtype=np.float64)
    n = len(raw["states"])
    if kernel.ndim == 1:
        kernel = kernel.reshape(n, n)
    return DiscreteChain(
        states=raw["states"],
        kernel=kernel,
        refset=raw["refset"],
        eta=raw.get("eta"),
        theta=np.asarray(raw["theta"], dtype=np.float64)
        if "theta" in raw
        else None,
    )


# ---- Nummelin splitting ------------------------------------------------------


@dataclass(frozen=True)
class SplitChainSpec:
    """Split chain: original states followed by the atom copy of the refset.

    Rows out of the atom all equal theta_star, the split image of theta.  For
    eta = 1 the retained copy of the refset carries no split mass, and its
    rows are set to theta_star as well, making the whole refset behave as the
    atom.
    """

    base: DiscreteChain
    states: tuple
    kernel: np.ndarray
    atom: tuple  # indices of the refset copy
    copy_of: dict  # original refset index -> copy index
    theta_star: np.ndarray

    def split_measure(self, mu):
        """Image of a distribution on the base chain: refset mass splits
        (1-eta) onto the retained copy and eta onto the atom."""
        mu = self.base.distribution(mu)
        out = np.zeros(len(self.states))
        out[: len(mu)] = mu
        for i, c in self.copy_of.items():
            out[i] = (1.0 - self.base.eta) * mu[i]
            out[c] = self.base.eta * mu[i]
        return out

    def project(self, dist):
        """Marginalize a split-space distribution back to the base chain."""
        dist = np.asarray(dist, dtype=np.float64)
        out = dist[: len(self.base)].copy()
        for i, c in self.copy_of.items():
            out[i] += dist[c]
        return out


def split_chain(chain):
    """Nummelin splitting of a minorized finite chain."""
    n = len(chain)
    ref = list(chain.refset_idx)
    copy_of = {i: n + j for j, i in enumerate(ref)}
    size = n + len(ref)
    eta = chain.eta

    def star(row):
        out = np.zeros(size)
        out[:n] = row
        for i, c in copy_of.items():
            out[i] = (1.0 - eta) * row[i]
            out[c] = eta * row[i]
        return out

    theta_star = star(chain.theta)
    kernel = np.zeros((size, size))
    for x in range(n):
        if x in copy_of and eta < 1.0:
            residual = (star(chain.kernel[x]) - eta * theta_star) / (1.0 - eta)
            bad = int(np.argmin(residual))
            if residual[bad] < -ROW_TOL:
                orig = bad if bad < n else ref[bad - n]
                raise ValueError(
                    "minorization fails at "
                    f"({chain.states[x]!r}, {chain.states[orig]!r})"
                )
            kernel[x] = np.maximum(residual, 0.0)
        elif x in copy_of:
            kernel[x] = theta_star
        else:
            kernel[x] = star(chain.kernel[x])
    for c in copy_of.values():
        kernel[c] = theta_star
    states = tuple(chain.states) + tuple(
        f"{chain.states[i]}#1" for i in ref
    )
    return SplitChainSpec(
        base=chain,
        states=states,
        kernel=kernel,
        atom=tuple(copy_of[i] for i in ref),
        copy_of=copy_of,
        theta_star=theta_star,
    )


# ---- exact total variation ---------------------------------------------------


def exact_tv_curve(chain, mu, nu, n_max):
    """TV(mu P^n, nu P^n) for n = 0..n_max (TV = half the L1 distance)."""
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    diff = chain.distribution(mu) - chain.distribution(nu)
    out = np.empty(n_max + 1)
    for n in range(n_max + 1):
        out[n] = 0.5 * np.abs(diff).sum()
        diff = diff @ chain.kernel
    return out


# ---- renewal coupling --------------------------------------------------------


class RenewalSpec:
    """Inter-renewal law of Y plus the two initial delays.

    law: probability vector (law[n] = P[Y = n], support >= 1) or a tail
    callable T(n) = P[Y > n] with T(0) = 1.  Delays: deterministic ints or
    probability vectors (0 allowed).  Aperiodicity (gcd of the support is 1)
    is checked, for tail callables over the first 1024 integers.
    """

    def __init__(self, law, delay=0, delay_other=0):
        if callable(law):
            self.tail = law
            self.cdf = None
            probs = [
                float(law(n - 1)) - float(law(n)) for n in range(1, 1025)
            ]
            support = [n for n, p in zip(range(1, 1025), probs) if p > 1e-15]
        else:
            law = np.asarray(law, dtype=np.float64)
            if np.any(law < 0.0) or abs(law.sum() - 1.0) > 1e-9:
                raise ValueError("law must be a probability vector")
            if len(law) and law[0] > 0.0:
                raise ValueError("inter-renewal times must be >= 1")
            self.tail = None
            self.cdf = np.cumsum(law)
            self.cdf[-1] = 1.0
            support = [n for n in range(len(law)) if law[n] > 0.0]
        if not support:
            raise ValueError("law has empty support")
        if int(np.gcd.reduce(support)) != 1:
            raise ValueError("law is periodic (gcd of support > 1)")
        self.delay = self._delay_spec(delay)
        self.delay_other = self._delay_spec(delay_other)

    @staticmethod
    def _delay_spec(spec):
        if np.isscalar(spec):
            if int(spec) < 0:
                raise ValueError("delays must be >= 0")
            return int(spec)
        spec = np.asarray(spec, dtype=np.float64)
        if np.any(spec < 0.0) or abs(spec.sum() - 1.0) > 1e-9:
            raise ValueError("delay law must be a probability vector")
        return np.cumsum(spec)

    def draw_y(self, rng):
        """One inter-renewal time by inverse transform."""
        u = rng.random()
        while u == 0.0:
            u = rng.random()
        if self.cdf is not None:
            return int(np.searchsorted(self.cdf, u, side="left"))
        # first n with tail(n) < u, by doubling then bisection
        hi = 1
        while float(self.tail(hi)) >= u:
            hi *= 2
            if hi > 2**62:
                raise RuntimeError("tail does not decay below the draw")
        lo = hi // 2
        while lo + 1 < hi:
            mid = (lo + hi) // 2
            if float(self.tail(mid)) < u:
                hi = mid
            else:
                lo = mid
        return hi

    @staticmethod
    def _draw_delay(spec, rng):
        if isinstance(spec, int):
            return spec
        u = rng.random()
        return int(np.searchsorted(spec, u, side="right"))


def coupling_time_sample(renewal, rng, max_epoch=10**9):
    """First common renewal epoch of the two sequences (0 when the initial
    delays already align at 0)."""
    s = RenewalSpec._draw_delay(renewal.delay, rng)
    s2 = RenewalSpec._draw_delay(renewal.delay_other, rng)
    while s != s2:
        if s < s2:
            s += renewal.draw_y(rng)
        else:
            s2 += renewal.draw_y(rng)
        if min(s, s2) > max_epoch:
            raise RuntimeError(f"no common epoch by {max_epoch}")
    return int(s)


class RenewalJob:
    """Farm job: one coupling-time sample per stream."""

    def __init__(self, renewal, master_seed, sub=0):
        self.renewal = renewal
        self.master_seed = int(master_seed)
        self.sub = int(sub)

    def warm_up(self):
        pass

    def run_chunk(self, chunk_index, start, size):
        out = np.empty(size, dtype=np.int64)
        for j in range(size):
            gen = rng_mod.stream(
                self.master_seed, start + j, rng_mod.PHASE_RENEWAL, self.sub
            )
            out[j] = coupling_time_sample(self.renewal, gen)
        return out


def sample_renewal_couplings(renewal, n_samples, master_seed, workers=None,
                             sub=0):
    """Coupling times of the renewal pair, in global sample order."""
    job = RenewalJob(renewal, master_seed, sub)
    return np.concatenate(farm.run_chunks(job, n_samples, workers))


def integer_tail_curve(samples, n_max, start=1, z=DEFAULT_Z):
    """SurvivalCurve of integer samples on the grid start..n_max."""
    samples = np.asarray(samples)
    grid = np.arange(start, n_max + 1, dtype=np.float64)
    counts = np.array([(samples > n).sum() for n in grid], dtype=np.int64)
    return SurvivalCurve.from_counts(grid, counts, len(samples), z)


# ---- split-chain coupling and the inequality check ----------------------------


@dataclass(frozen=True)
class CouplingResult:
    """Split-chain coupling times (each >= 1) with their integer-grid tail."""

    samples: np.ndarray
    curve: SurvivalCurve


class SplitCouplingJob:
    """Farm job: two independent split chains until a simultaneous atom visit.

    Whole chunks are stepped as vectors on one chunk stream; the sample order
    inside a chunk and the chunk layout are fixed, so results do not depend
    on the worker count.
    """

    def __init__(self, split, mu, nu, master_seed, sub=0, max_steps=10**7):
        self.split = split
        self.mu_star = split.split_measure(mu)
        self.nu_star = split.split_measure(nu)
        self.master_seed = int(master_seed)
        self.sub = int(sub)
        self.max_steps = max_steps
        self.row_cdf = np.cumsum(split.kernel, axis=1)
        self.row_cdf[:, -1] = 1.0
        self.mu_cdf = np.cumsum(self.mu_star)
        self.mu_cdf[-1] = 1.0
        self.nu_cdf = np.cumsum(self.nu_star)
        self.nu_cdf[-1] = 1.0
        self.in_atom = np.zeros(len(split.states), dtype=bool)
        self.in_atom[list(split.atom)] = True

    def warm_up(self):
        pass

    def _step(self, states, u):
        return (self.row_cdf[states] <= u[:, None]).sum(axis=1)

    def run_chunk(self, chunk_index, start, size):
        gen = rng_mod.stream(
            self.master_seed, chunk_index, rng_mod.PHASE_COUPLING, self.sub
        )
        x = np.searchsorted(self.mu_cdf, gen.random(size), side="right")
        y = np.searchsorted(self.nu_cdf, gen.random(size), side="right")
        t_val = np.zeros(size, dtype=np.int64)
        alive = ~(self.in_atom[x] & self.in_atom[y])
        t_val[~alive] = 1
        steps = 0
        while alive.any():
            steps += 1
            if steps > self.max_steps:
                raise RuntimeError("coupling did not occur within max_steps")
            idx = np.nonzero(alive)[0]
            x[idx] = self._step(x[idx], gen.random(len(idx)))
            y[idx] = self._step(y[idx], gen.random(len(idx)))
            met = self.in_atom[x[idx]] & self.in_atom[y[idx]]
            t_val[idx[met]] = steps + 1
            alive[idx[met]] = False
        return t_val


@dataclass(frozen=True)
class InequalityReport:
    """Exact TV against the simulated coupling bound on n = 0..n_max.

    bound[n] = 2 * (p_tilde + halfwidth) for P[T > n]; ok means tv <= bound
    everywhere.
    """

    result: CouplingResult
    n_grid: np.ndarray
    tv: np.ndarray
    p_tail: np.ndarray
    halfwidth: np.ndarray
    bound: np.ndarray
    violations: tuple
    ok: bool
    eta: float
    n_samples: int


def coupling_inequality_check(chain, mu, nu, n_max, n_samples, master_seed,
                              workers=None, sub=0, z=DEFAULT_Z):
    """Verify TV(mu P^n, nu P^n) <= 2 * upper CI of P[T > n] for n <= n_max."""
    split = split_chain(chain)
    job = SplitCouplingJob(split, mu, nu, master_seed, sub)
    samples = np.concatenate(farm.run_chunks(job, n_samples, workers))
    if samples.min() < 1:
        raise AssertionError("split-chain coupling produced T < 1")
    tv = exact_tv_curve(chain, mu, nu, n_max)
    n_grid = np.arange(n_max + 1)
    counts = np.array([(samples > n).sum() for n in n_grid], dtype=np.int64)
    p_tail = np.empty(n_max + 1)
    halfwidth = np.empty(n_max + 1)
    for n in n_grid:
        p_tail[n], halfwidth[n] = agresti_coull(int(counts[n]), len(samples), z)
    bound = 2.0 * (p_tail + halfwidth)
    violations = tuple(int(n) for n in n_grid if tv[n] > bound[n])
    curve = SurvivalCurve.from_counts(
        n_grid.astype(np.float64), counts, len(samples), z
    )
    return InequalityReport(
        result=CouplingResult(samples=samples, curve=curve),
        n_grid=n_grid,
        tv=tv,
        p_tail=p_tail,
        halfwidth=halfwidth,
        bound=bound,
        violations=violations,
        ok=not violations,
        eta=chain.eta,
        n_samples=int(n_samples),
    )


# ---- dominance criterion -----------------------------------------------------


def dominate_check(chain):
    """Search the refset for x_* with kernel(x_*, .) >= delta * kernel(x, .).

    delta(x_*) = min over refset rows x and columns y of the entry ratio
    kernel(x_*, y) / kernel(x, y); a column with kernel(x, y) = 0 imposes no
    constraint, while kernel(x_*, y) = 0 < kernel(x, y) disqualifies x_*.
    Returns (state, delta) for the best qualifying x_*, or None.
    """
    best = None
    for i in chain.refset_idx:
        delta = math.inf
        for j in chain.refset_idx:
            for y in range(len(chain)):
                denom = chain.kernel[j, y]
                if denom == 0.0:
                    continue
                num = chain.kernel[i, y]
                if num == 0.0:
                    delta = 0.0
                    break
                delta = min(delta, num / denom)
            if delta == 0.0:
                break
        if delta > 0.0 and (best is None or delta > best[1]):
            best = (chain.states[i], delta)
    return best
