"""Stochastic energy exchange chain.

N sites hold energies e_1..e_N; neighbors exchange at rate sqrt(min(e_i,
e_{i+1})), splitting the pair total by an independent uniform fraction.  The
end sites additionally trade with heat baths: the bath clock rings at rate
sqrt(min(T_bath, e_end)), after which the site keeps a uniform fraction of
its energy plus an Exponential(mean T_bath) contribution.

Clock indexing: 0 = left bath, 1..N-1 = interior pairs (i, i+1), N = right
bath, giving N+1 clocks.  Uniform fractions reject exact 0.0 so energies stay
strictly positive.

The jitted kernels below replicate the generic engine loops draw for draw;
tests pin them to bit-for-bit agreement on shared streams.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from ..engine import CENSORED, HIT, EventRates, Model, PassageOutcome, RefSet


@dataclass(frozen=True)
class SeeParams:
    n_sites: int = 3
    t_left: float = 1.0
    t_right: float = 2.0

    def __post_init__(self):
        if self.n_sites < 1:
            raise ValueError("n_sites must be >= 1")
        if not (self.t_left > 0.0 and self.t_right > 0.0):
            raise ValueError("bath temperatures must be positive")

    def as_dict(self):
        return {
            "kind": "see",
            "n_sites": self.n_sites,
            "t_left": self.t_left,
            "t_right": self.t_right,
        }


def rates_of(e, params):
    """N+1 clock rates: left bath, interior pairs, right bath."""
    n = params.n_sites
    rates = np.empty(n + 1, dtype=np.float64)
    rates[0] = np.sqrt(min(params.t_left, e[0]))
    for i in range(n - 1):
        rates[i + 1] = np.sqrt(min(e[i], e[i + 1]))
    rates[n] = np.sqrt(min(params.t_right, e[n - 1]))
    total = 0.0
    for i in range(n + 1):
        total += rates[i]
    return EventRates(rates=rates, total=total)


def apply_event(e, clock_index, params, rng):
    """Apply one exchange in place; returns e.

    Interior clock i: (e_i, e_{i+1}) <- (p*E, (1-p)*E) with E the pair total.
    Bath clocks: e_end <- p*(e_end + rho), rho ~ Exponential(mean T_bath);
    rho is drawn before p.
    """
    n = params.n_sites
    if clock_index == 0:
        rho = rng.standard_exponential() * params.t_left
        p = rng.random()
        while p == 0.0:
            p = rng.random()
        e[0] = p * (e[0] + rho)
    elif clock_index == n:
        rho = rng.standard_exponential() * params.t_right
        p = rng.random()
        while p == 0.0:
            p = rng.random()
        e[n - 1] = p * (e[n - 1] + rho)
    else:
        i = clock_index - 1
        p = rng.random()
        while p == 0.0:
            p = rng.random()
        tot = e[i] + e[i + 1]
        e[i] = p * tot
        e[i + 1] = (1.0 - p) * tot
    return e


class SeeBox(RefSet):
    """Axis-aligned energy box: lo_i <= e_i <= hi_i per site."""

    def __init__(self, lo=0.1, hi=100.0, n_sites=3):
        self.lo = np.broadcast_to(np.asarray(lo, dtype=np.float64), (n_sites,)).copy()
        self.hi = np.broadcast_to(np.asarray(hi, dtype=np.float64), (n_sites,)).copy()
        if np.any(self.lo > self.hi):
            raise ValueError("box lower bound exceeds upper bound")

    def contains(self, e):
        for i in range(len(self.lo)):
            if e[i] < self.lo[i] or e[i] > self.hi[i]:
                return False
        return True

    def as_dict(self):
        return {"site_lo": self.lo.tolist(), "site_hi": self.hi.tolist()}


# ---- jitted fast paths ------------------------------------------------------


@njit(cache=True)
def _inside(e, lo, hi):
    for i in range(e.shape[0]):
        if e[i] < lo[i] or e[i] > hi[i]:
            return False
    return True


@njit(cache=True)
def _total_and_r0(e, t_left, t_right):
    n = e.shape[0]
    r0 = np.sqrt(min(t_left, e[0]))
    total = r0
    for i in range(n - 1):
        total += np.sqrt(min(e[i], e[i + 1]))
    total += np.sqrt(min(t_right, e[n - 1]))
    return total, r0


@njit(cache=True)
def _select_apply(e, t_left, t_right, r0, u, rng):
    # clock selection by cumulative walk, then the exchange, in one pass
    n = e.shape[0]
    acc = r0
    clock = 0
    if acc <= u:
        clock = n
        for i in range(n - 1):
            acc += np.sqrt(min(e[i], e[i + 1]))
            if acc > u:
                clock = i + 1
                break
    if clock == 0:
        rho = rng.standard_exponential() * t_left
        p = rng.random()
        while p == 0.0:
            p = rng.random()
        e[0] = p * (e[0] + rho)
    elif clock == n:
        rho = rng.standard_exponential() * t_right
        p = rng.random()
        while p == 0.0:
            p = rng.random()
        e[n - 1] = p * (e[n - 1] + rho)
    else:
        i = clock - 1
        p = rng.random()
        while p == 0.0:
            p = rng.random()
        tot = e[i] + e[i + 1]
        e[i] = p * tot
        e[i + 1] = (1.0 - p) * tot


@njit(cache=True)
def _passage_kernel(e, t_left, t_right, lo, hi, h, t_max, rng):
    """First passage into [lo, hi] after h.  Mutates e.  (1, tau) or (0, t_max)."""
    t = 0.0
    seen_h = False
    while True:
        total, r0 = _total_and_r0(e, t_left, t_right)
        if total <= 0.0:
            if not seen_h and _inside(e, lo, hi):
                return 1, h
            return 0, t_max
        dt = rng.standard_exponential() / total
        if not seen_h and t + dt > h:
            seen_h = True
            if _inside(e, lo, hi):
                return 1, h
        t += dt
        if t > t_max:
            return 0, t_max
        u = rng.random() * total
        _select_apply(e, t_left, t_right, r0, u, rng)
        if seen_h and t >= h and _inside(e, lo, hi):
            return 1, t


@njit(cache=True)
def _evolve_kernel(e, t_left, t_right, t_end, rng):
    """State at t_end, in place."""
    t = 0.0
    while True:
        total, r0 = _total_and_r0(e, t_left, t_right)
        if total <= 0.0:
            return
        dt = rng.standard_exponential() / total
        if t + dt > t_end:
            return
        t += dt
        u = rng.random() * total
        _select_apply(e, t_left, t_right, r0, u, rng)


@njit(cache=True)
def _series_kernel(e, t_left, t_right, times, out, rng):
    """Record e at each grid time (post-jump on ties).  Mutates e, fills out."""
    nt = times.shape[0]
    t = 0.0
    idx = 0
    while idx < nt:
        total, r0 = _total_and_r0(e, t_left, t_right)
        if total <= 0.0:
            while idx < nt:
                out[idx] = e
                idx += 1
            return
        dt = rng.standard_exponential() / total
        t_new = t + dt
        while idx < nt and times[idx] < t_new:
            out[idx] = e
            idx += 1
        if idx >= nt:
            return
        u = rng.random() * total
        _select_apply(e, t_left, t_right, r0, u, rng)
        t = t_new


class SeeModel(Model):
    name = "see"

    def __init__(self, params=None):
        self.params = params if params is not None else SeeParams()
        self.series_channels = tuple(
            f"e{i + 1}" for i in range(self.params.n_sites)
        )

    # ---- core contract ----

    def rates_of(self, e):
        return rates_of(e, self.params)

    def apply_event(self, e, clock_index, rng):
        return apply_event(e, clock_index, self.params, rng)

    def copy_state(self, e):
        return np.array(e, dtype=np.float64)

    # ---- serialization / observables ----

    def encode_state(self, e):
        return ",".join(format(v, ".17g") for v in e)

    def decode_state(self, text):
        e = np.array([float(tok) for tok in text.split(",")], dtype=np.float64)
        if len(e) != self.params.n_sites:
            raise ValueError(f"expected {self.params.n_sites} energies")
        if np.any(e <= 0.0):
            raise ValueError("site energies must be strictly positive")
        return e

    def state_channels(self, e):
        return np.asarray(e, dtype=np.float64)

    def observable(self, name):
        if name == "total":
            return lambda ch: np.asarray(ch).sum(axis=-1)
        return super().observable(name)

    def coordinate_state(self, base_state, name, value):
        if name.startswith("e"):
            i = int(name[1:]) - 1
            if 0 <= i < self.params.n_sites:
                e = self.copy_state(base_state)
                e[i] = float(value)
                return e
        return super().coordinate_state(base_state, name, value)

    def initial_sampler(self):
        """Burn-in initial law: iid Exponential(mean (T_L + T_R)/2)."""
        mean = 0.5 * (self.params.t_left + self.params.t_right)
        n = self.params.n_sites

        def draw(rng):
            return rng.standard_exponential(n) * mean

        return draw

    def as_dict(self):
        return self.params.as_dict()

    # ---- jitted fast paths ----

    def passage_runner(self, refset, h, t_max):
        if not isinstance(refset, SeeBox):
            return None
        p = self.params

        def run(state, rng):
            e = np.array(state, dtype=np.float64)
            status, t = _passage_kernel(
                e, p.t_left, p.t_right, refset.lo, refset.hi, h, t_max, rng
            )
            return PassageOutcome(HIT if status == 1 else CENSORED, t)

        return run

    def evolve_runner(self, t_end):
        p = self.params

        def run(state, rng):
            e = np.array(state, dtype=np.float64)
            _evolve_kernel(e, p.t_left, p.t_right, t_end, rng)
            return e

        return run

    def series_runner(self, times):
        p = self.params
        times = np.asarray(times, dtype=np.float64)

        def run(state, rng):
            e = np.array(state, dtype=np.float64)
            out = np.empty((len(times), len(e)), dtype=np.float64)
            _series_kernel(e, p.t_left, p.t_right, times, out, rng)
            return out

        return run
