"""Random halves model.

N sites each hold a stored energy s_i and a multiset of particles with
energies x.  Each particle carries an exponential clock of rate
(1+m)*S*sqrt(x); when it rings the particle jumps to a uniform neighbor with
probability 1/(1+m) (leaving the system at a bath boundary) and otherwise
mixes with the stored energy:

    (s', x') = (x u^2, s + x (1 - u^2)),   u ~ Uniform(0,1), u > 0.

Baths inject particles at site 1 / site N at constant rates rho_L / rho_R
with energies drawn from Gamma(shape 3/2, scale T_bath).

Clock order: particles site-major in slot order, then left injection, then
right injection.  Particles are indistinguishable; removal swaps the last
slot in, so slot order is an implementation detail with a fixed, reproducible
rule.  Observables must ignore slots >= k_i.

Particle storage is a fixed-capacity array per site (default 512 slots);
exceeding it raises, which at sensible parameters (k_i ~ Poisson(1)) is
unreachable.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from ..engine import CENSORED, HIT, EventRates, Model, PassageOutcome, RefSet

DEFAULT_CAP = 512


@dataclass(frozen=True)
class RhmParams:
    """mix_ratio is the constant m, rate_scale the constant S of the clock
    rate (1+m)*S*sqrt(x)."""

    n_sites: int = 3
    t_left: float = 1.0
    t_right: float = 2.0
    rho_left: float = 1.0
    rho_right: float = 1.0
    mix_ratio: float = 1.0
    rate_scale: float = 1.0

    def __post_init__(self):
        if self.n_sites < 1:
            raise ValueError("n_sites must be >= 1")
        for name in ("t_left", "t_right", "rho_left", "rho_right",
                     "mix_ratio", "rate_scale"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")

    def as_dict(self):
        return {
            "kind": "rhm",
            "n_sites": self.n_sites,
            "t_left": self.t_left,
            "t_right": self.t_right,
            "rho_left": self.rho_left,
            "rho_right": self.rho_right,
            "mix_ratio": self.mix_ratio,
            "rate_scale": self.rate_scale,
        }


class RhmState:
    """Per-site stored energy s, particle slots x, and live counts k.

    x[i, :k[i]] are the live particle energies of site i; higher slots are
    stale.  Use ``site_particles`` rather than reading x directly.
    """

    __slots__ = ("s", "x", "k")

    def __init__(self, s, x, k):
        self.s = s
        self.x = x
        self.k = k

    @classmethod
    def build(cls, stored, particles, cap=DEFAULT_CAP):
        """From per-site stored energies and per-site particle energy lists."""
        n = len(stored)
        if len(particles) != n:
            raise ValueError("stored and particles must have one entry per site")
        s = np.asarray(stored, dtype=np.float64).copy()
        if np.any(s < 0.0):
            raise ValueError("stored energies must be nonnegative")
        k = np.array([len(p) for p in particles], dtype=np.int64)
        if np.any(k > cap):
            raise ValueError(f"more than {cap} particles on one site")
        x = np.zeros((n, cap), dtype=np.float64)
        for i, site in enumerate(particles):
            for j, xj in enumerate(site):
                if not xj > 0.0:
                    raise ValueError("particle energies must be strictly positive")
                x[i, j] = xj
        return cls(s, x, k)

    def site_particles(self, i):
        return self.x[i, : self.k[i]]

    def n_particles(self):
        return int(self.k.sum())

    def total_energy(self):
        tot = float(self.s.sum())
        for i in range(len(self.s)):
            tot += float(self.site_particles(i).sum())
        return tot

    def copy(self, cap=None):
        """Copy, optionally re-padded to a new slot capacity."""
        width = self.x.shape[1] if cap is None else int(cap)
        if width == self.x.shape[1]:
            return RhmState(self.s.copy(), self.x.copy(), self.k.copy())
        if width < int(self.k.max()):
            raise ValueError("cap smaller than a live particle count")
        x = np.zeros((len(self.s), width), dtype=np.float64)
        for i in range(len(self.s)):
            x[i, : self.k[i]] = self.x[i, : self.k[i]]
        return RhmState(self.s.copy(), x, self.k.copy())

    def trimmed(self):
        """Copy at the minimal slot capacity; compact form for ensembles."""
        return self.copy(cap=max(int(self.k.max()), 1))


class RhmBox(RefSet):
    """k_i <= k_max, s_i <= s_max, and every particle in [x_lo, x_hi]."""

    def __init__(self, k_max=40, s_max=100.0, x_lo=0.1, x_hi=100.0):
        if x_lo > x_hi or k_max < 0 or s_max < 0:
            raise ValueError("invalid box bounds")
        self.k_max = int(k_max)
        self.s_max = float(s_max)
        self.x_lo = float(x_lo)
        self.x_hi = float(x_hi)

    def contains(self, state):
        for i in range(len(state.s)):
            if state.k[i] > self.k_max or state.s[i] > self.s_max:
                return False
            for j in range(state.k[i]):
                xj = state.x[i, j]
                if xj < self.x_lo or xj > self.x_hi:
                    return False
        return True

    def as_dict(self):
        return {
            "k_max": self.k_max,
            "s_max": self.s_max,
            "x_lo": self.x_lo,
            "x_hi": self.x_hi,
        }


def rates_of(state, params):
    """One clock per particle (site-major slot order), then the injections.

    The total is accumulated injections-first to match the jitted kernels;
    it equals the vector sum to roundoff.
    """
    m, sc = params.mix_ratio, params.rate_scale
    n_p = state.n_particles()
    rates = np.empty(n_p + 2, dtype=np.float64)
    total = params.rho_left + params.rho_right
    c = 0
    for i in range(params.n_sites):
        for j in range(state.k[i]):
            r = (1.0 + m) * sc * np.sqrt(state.x[i, j])
            rates[c] = r
            total += r
            c += 1
    rates[n_p] = params.rho_left
    rates[n_p + 1] = params.rho_right
    return EventRates(rates=rates, total=total)


def apply_event(state, clock_index, params, rng):
    """Apply one particle event or injection in place; returns state.

    Particle clock: jump with probability 1/(1+m) (direction uniform, exits
    at the boundary baths, removal swaps the last slot in), else mix with the
    stored energy.  Injection: Gamma(3/2, T_bath) energy appended at the
    boundary site.
    """
    n = params.n_sites
    m = params.mix_ratio
    cap = state.x.shape[1]
    n_p = state.n_particles()
    if clock_index < n_p:
        c = clock_index
        i = 0
        while c >= state.k[i]:
            c -= state.k[i]
            i += 1
        j = c
        b = rng.random()
        if b * (1.0 + m) < 1.0:
            d = rng.random()
            xx = state.x[i, j]
            state.x[i, j] = state.x[i, state.k[i] - 1]
            state.k[i] -= 1
            if d < 0.5:
                if i > 0:
                    if state.k[i - 1] >= cap:
                        raise RuntimeError("particle capacity exceeded")
                    state.x[i - 1, state.k[i - 1]] = xx
                    state.k[i - 1] += 1
            else:
                if i < n - 1:
                    if state.k[i + 1] >= cap:
                        raise RuntimeError("particle capacity exceeded")
                    state.x[i + 1, state.k[i + 1]] = xx
                    state.k[i + 1] += 1
        else:
            uu = rng.random()
            while uu == 0.0:
                uu = rng.random()
            xx = state.x[i, j]
            s_new = xx * uu * uu
            state.x[i, j] = state.s[i] + xx * (1.0 - uu * uu)
            state.s[i] = s_new
    elif clock_index == n_p:
        if state.k[0] >= cap:
            raise RuntimeError("particle capacity exceeded")
        state.x[0, state.k[0]] = sample_injection_energy(params.t_left, rng)
        state.k[0] += 1
    else:
        if state.k[n - 1] >= cap:
            raise RuntimeError("particle capacity exceeded")
        state.x[n - 1, state.k[n - 1]] = sample_injection_energy(params.t_right, rng)
        state.k[n - 1] += 1
    return state


def sample_injection_energy(t_bath, rng):
    """Bath injection energy: Gamma(shape 3/2, scale T), density
    proportional to sqrt(x) exp(-x/T)."""
    return rng.gamma(1.5, t_bath)


# ---- jitted fast paths ------------------------------------------------------


@njit(cache=True)
def _inside(s, x, k, k_max, s_max, x_lo, x_hi):
    for i in range(s.shape[0]):
        if k[i] > k_max or s[i] > s_max:
            return False
        for j in range(k[i]):
            if x[i, j] < x_lo or x[i, j] > x_hi:
                return False
    return True


@njit(cache=True)
def _total_rate(s, x, k, rho_l, rho_r, m, sc):
    total = rho_l + rho_r
    for i in range(s.shape[0]):
        for j in range(k[i]):
            total += (1.0 + m) * sc * np.sqrt(x[i, j])
    return total


@njit(cache=True)
def _select_apply(s, x, k, t_left, t_right, rho_l, rho_r, m, sc, u, rng):
    """Clock selection walk + event application.  0 ok, -1 capacity overflow."""
    n = s.shape[0]
    cap = x.shape[1]
    acc = 0.0
    for i in range(n):
        for j in range(k[i]):
            acc += (1.0 + m) * sc * np.sqrt(x[i, j])
            if acc > u:
                b = rng.random()
                if b * (1.0 + m) < 1.0:
                    d = rng.random()
                    xx = x[i, j]
                    x[i, j] = x[i, k[i] - 1]
                    k[i] -= 1
                    if d < 0.5:
                        if i > 0:
                            if k[i - 1] >= cap:
                                return -1
                            x[i - 1, k[i - 1]] = xx
                            k[i - 1] += 1
                    else:
                        if i < n - 1:
                            if k[i + 1] >= cap:
                                return -1
                            x[i + 1, k[i + 1]] = xx
                            k[i + 1] += 1
                else:
                    uu = rng.random()
                    while uu == 0.0:
                        uu = rng.random()
                    xx = x[i, j]
                    s_new = xx * uu * uu
                    x[i, j] = s[i] + xx * (1.0 - uu * uu)
                    s[i] = s_new
                return 0
    acc += rho_l
    if acc > u:
        if k[0] >= cap:
            return -1
        x[0, k[0]] = rng.gamma(1.5, t_left)
        k[0] += 1
        return 0
    if k[n - 1] >= cap:
        return -1
    x[n - 1, k[n - 1]] = rng.gamma(1.5, t_right)
    k[n - 1] += 1
    return 0


@njit(cache=True)
def _passage_kernel(s, x, k, t_left, t_right, rho_l, rho_r, m, sc,
                    k_max, s_max, x_lo, x_hi, h, t_max, rng):
    """(1, tau) hit, (0, t_max) censored, (-1, t) capacity overflow."""
    t = 0.0
    seen_h = False
    while True:
        total = _total_rate(s, x, k, rho_l, rho_r, m, sc)
        dt = rng.standard_exponential() / total
        if not seen_h and t + dt > h:
            seen_h = True
            if _inside(s, x, k, k_max, s_max, x_lo, x_hi):
                return 1, h
        t += dt
        if t > t_max:
            return 0, t_max
        u = rng.random() * total
        st = _select_apply(s, x, k, t_left, t_right, rho_l, rho_r, m, sc, u, rng)
        if st != 0:
            return -1, t
        if seen_h and t >= h and _inside(s, x, k, k_max, s_max, x_lo, x_hi):
            return 1, t


@njit(cache=True)
def _evolve_kernel(s, x, k, t_left, t_right, rho_l, rho_r, m, sc, t_end, rng):
    """State at t_end in place.  0 ok, -1 capacity overflow."""
    t = 0.0
    while True:
        total = _total_rate(s, x, k, rho_l, rho_r, m, sc)
        dt = rng.standard_exponential() / total
        if t + dt > t_end:
            return 0
        t += dt
        u = rng.random() * total
        st = _select_apply(s, x, k, t_left, t_right, rho_l, rho_r, m, sc, u, rng)
        if st != 0:
            return -1


@njit(cache=True)
def _series_kernel(s, x, k, t_left, t_right, rho_l, rho_r, m, sc, times, out, rng):
    """Record (s_i, k_i, sum of live x_i) per site at each grid time."""
    n = s.shape[0]
    nt = times.shape[0]
    t = 0.0
    idx = 0
    while idx < nt:
        total = _total_rate(s, x, k, rho_l, rho_r, m, sc)
        dt = rng.standard_exponential() / total
        t_new = t + dt
        while idx < nt and times[idx] < t_new:
            for i in range(n):
                px = 0.0
                for j in range(k[i]):
                    px += x[i, j]
                out[idx, 3 * i] = s[i]
                out[idx, 3 * i + 1] = k[i]
                out[idx, 3 * i + 2] = px
            idx += 1
        if idx >= nt:
            return 0
        u = rng.random() * total
        st = _select_apply(s, x, k, t_left, t_right, rho_l, rho_r, m, sc, u, rng)
        if st != 0:
            return -1
        t = t_new
    return 0


class RhmModel(Model):
    name = "rhm"

    def __init__(self, params=None, cap=DEFAULT_CAP):
        self.params = params if params is not None else RhmParams()
        self.cap = cap
        ch = []
        for i in range(1, self.params.n_sites + 1):
            ch += [f"s{i}", f"k{i}", f"px{i}"]
        self.series_channels = tuple(ch)

    # ---- core contract ----

    def rates_of(self, state):
        return rates_of(state, self.params)

    def apply_event(self, state, clock_index, rng):
        return apply_event(state, clock_index, self.params, rng)

    def copy_state(self, state):
        # always re-pad to model capacity so compact ensemble states can grow
        return state.copy(self.cap)

    def compact_state(self, state):
        return state.trimmed()

    def build_state(self, stored, particles):
        """RhmState from per-site stored energies and particle energy lists."""
        return RhmState.build(stored, particles, cap=self.cap)

    # ---- serialization / observables ----

    def encode_state(self, state):
        sites = []
        for i in range(self.params.n_sites):
            xs = ",".join(format(v, ".17g") for v in state.site_particles(i))
            sites.append(f"{format(state.s[i], '.17g')}; {xs}")
        return " | ".join(sites)

    def decode_state(self, text):
        stored, particles = [], []
        sites = text.split(" | ")
        if len(sites) != self.params.n_sites:
            raise ValueError(f"expected {self.params.n_sites} sites")
        for token in sites:
            s_part, _, x_part = token.partition(";")
            stored.append(float(s_part))
            x_part = x_part.strip()
            particles.append([float(v) for v in x_part.split(",")] if x_part else [])
        return RhmState.build(stored, particles, cap=self.cap)

    def state_channels(self, state):
        out = np.empty(3 * self.params.n_sites, dtype=np.float64)
        for i in range(self.params.n_sites):
            out[3 * i] = state.s[i]
            out[3 * i + 1] = state.k[i]
            out[3 * i + 2] = state.site_particles(i).sum()
        return out

    def observable(self, name):
        n = self.params.n_sites
        if name == "total":
            def total(ch):
                ch = np.asarray(ch)
                return sum(ch[..., 3 * i] + ch[..., 3 * i + 2] for i in range(n))
            return total
        if name == "particles":
            return lambda ch: sum(
                np.asarray(ch)[..., 3 * i + 1] for i in range(n)
            )
        if name.startswith("site"):
            i = int(name[4:]) - 1
            if 0 <= i < n:
                return lambda ch: (
                    np.asarray(ch)[..., 3 * i] + np.asarray(ch)[..., 3 * i + 2]
                )
        return super().observable(name)

    def coordinate_state(self, base_state, name, value):
        """Sweep coordinates: s{i} stored energy, x{i} sets every particle
        energy at site i, k{i} sets the count replicating the first particle."""
        st = base_state.copy()
        kind, idx = name[0], name[1:]
        if kind in ("s", "x", "k") and idx.isdigit():
            i = int(idx) - 1
            if 0 <= i < self.params.n_sites:
                if kind == "s":
                    st.s[i] = float(value)
                    return st
                if kind == "x":
                    st.x[i, : st.k[i]] = float(value)
                    return st
                new_k = int(value)
                if new_k < 0 or new_k > st.x.shape[1]:
                    raise ValueError(f"particle count {new_k} out of range")
                if new_k > 0 and st.k[i] == 0:
                    raise ValueError("k sweep needs a template particle on the site")
                if new_k > 0:
                    st.x[i, :new_k] = st.x[i, 0]
                st.k[i] = new_k
                return st
        return super().coordinate_state(base_state, name, value)

    def initial_sampler(self):
        """Burn-in initial law: s_i ~ U(0, 100), k_i ~ Poisson((rho_L+rho_R)/2),
        particle energies iid Exponential(mean (T_L+T_R)/2)."""
        p = self.params
        k_mean = 0.5 * (p.rho_left + p.rho_right)
        x_mean = 0.5 * (p.t_left + p.t_right)
        n = p.n_sites
        cap = self.cap

        def draw(rng):
            s = rng.random(n) * 100.0
            k = rng.poisson(k_mean, n).astype(np.int64)
            k = np.minimum(k, cap)
            x = np.zeros((n, cap), dtype=np.float64)
            for i in range(n):
                for j in range(k[i]):
                    xj = rng.standard_exponential() * x_mean
                    while xj == 0.0:
                        xj = rng.standard_exponential() * x_mean
                    x[i, j] = xj
            return RhmState(s, x, k)

        return draw

    def as_dict(self):
        return self.params.as_dict()

    # ---- jitted fast paths ----

    def passage_runner(self, refset, h, t_max):
        if not isinstance(refset, RhmBox):
            return None
        p = self.params

        def run(state, rng):
            st = state.copy(self.cap)
            status, t = _passage_kernel(
                st.s, st.x, st.k, p.t_left, p.t_right, p.rho_left, p.rho_right,
                p.mix_ratio, p.rate_scale, refset.k_max, refset.s_max,
                refset.x_lo, refset.x_hi, h, t_max, rng,
            )
            if status == -1:
                raise RuntimeError("particle capacity exceeded")
            return PassageOutcome(HIT if status == 1 else CENSORED, t)

        return run

    def evolve_runner(self, t_end):
        p = self.params

        def run(state, rng):
            st = state.copy(self.cap)
            status = _evolve_kernel(
                st.s, st.x, st.k, p.t_left, p.t_right, p.rho_left, p.rho_right,
                p.mix_ratio, p.rate_scale, t_end, rng,
            )
            if status == -1:
                raise RuntimeError("particle capacity exceeded")
            return st

        return run

    def series_runner(self, times):
        p = self.params
        times = np.asarray(times, dtype=np.float64)

        def run(state, rng):
            st = state.copy(self.cap)
            out = np.empty((len(times), 3 * p.n_sites), dtype=np.float64)
            status = _series_kernel(
                st.s, st.x, st.k, p.t_left, p.t_right, p.rho_left, p.rho_right,
                p.mix_ratio, p.rate_scale, times, out, rng,
            )
            if status == -1:
                raise RuntimeError("particle capacity exceeded")
            return out

        return run
