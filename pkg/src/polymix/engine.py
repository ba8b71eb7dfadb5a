"""Continuous-time jump process core.

A model is a set of exponential clocks attached to the current state: clock i
rings first with probability rates[i]/total after an Exponential(total)
waiting time.  The path is piecewise constant and right-continuous; membership
in a reference set therefore only needs to be checked at jump times and at the
single grid time h.

Everything here is the generic pure-Python route.  Models may carry jitted
fast paths for the same loops (see ``models``); tests hold the two routes to
bit-for-bit agreement on shared streams, so this module is the behavioral
reference.
"""

import abc
import math
from dataclasses import dataclass, field

import numpy as np

HIT = "hit"
CENSORED = "censored"


class AbsorbingState(Exception):
    """A state with no active clocks (total rate zero)."""


@dataclass(frozen=True)
class EventRates:
    """Per-clock intensities plus their total.

    ``total`` may be accumulated in a model-specific order; it must equal
    sum(rates) to 1e-12 relative.  Keeping the model's accumulation order is
    what lets the pure-Python route reproduce a jitted kernel bit-for-bit.
    """

    rates: np.ndarray
    total: float

    @classmethod
    def from_rates(cls, rates):
        rates = np.asarray(rates, dtype=np.float64)
        return cls(rates=rates, total=float(rates.sum()))


@dataclass(frozen=True)
class PassageOutcome:
    """Result of one first-passage trajectory: Hit(tau) or Censored(t_max)."""

    kind: str
    time: float

    @property
    def hit(self):
        return self.kind == HIT


@dataclass
class EvolveResult:
    state: object
    jumps: list = field(default_factory=list)  # (time, clock_index), increasing
    absorbed: bool = False


class RefSet(abc.ABC):
    """Membership test for a reference set."""

    @abc.abstractmethod
    def contains(self, state):
        ...


class Model(abc.ABC):
    """A jump process: per-state clock rates plus the effect of each clock.

    Subclasses own the state representation; the engine treats states as
    opaque, copies them with ``copy_state`` before evolving, and hands them
    back only through model methods.  ``apply_event`` may mutate its argument
    and must return the new state.
    """

    name = "model"

    @abc.abstractmethod
    def rates_of(self, state) -> EventRates:
        ...

    @abc.abstractmethod
    def apply_event(self, state, clock_index, rng):
        ...

    @abc.abstractmethod
    def copy_state(self, state):
        ...

    def draw_event(self, state, rng):
        """Draw (dt, clock_index) for the next event.

        Default: competing exponentials via ``next_event``.  Models with
        non-exponential holding times override this; engine loops only ever
        draw events through here.
        """
        return next_event(state, self, rng)

    def compact_state(self, state):
        """Storage form for ensembles; default is the state itself."""
        return state

    # ---- serialization ----------------------------------------------------

    @abc.abstractmethod
    def encode_state(self, state) -> str:
        ...

    @abc.abstractmethod
    def decode_state(self, text):
        ...

    # ---- observables ------------------------------------------------------

    series_channels: tuple = ()

    def state_channels(self, state):
        """Vector of recorded channels for series/observable evaluation."""
        raise NotImplementedError

    def observable(self, name):
        """Return a vectorized observable: (..., n_channels) -> (...).

        Base implementation resolves channel names; models add derived
        observables on top.
        """
        if name in self.series_channels:
            idx = self.series_channels.index(name)
            return lambda ch: np.asarray(ch)[..., idx]
        raise KeyError(f"unknown observable {name!r} for model {self.name}")

    def coordinate_state(self, base_state, name, value):
        """Return a copy of base_state with sweep coordinate `name` set."""
        raise KeyError(f"model {self.name} has no sweep coordinate {name!r}")

    # ---- optional jitted fast paths ----------------------------------------
    # Each returns a callable equivalent to the generic loop, or None.

    def passage_runner(self, refset, h, t_max):
        return None

    def evolve_runner(self, t_end):
        return None

    def series_runner(self, times):
        return None


# ---- generic operations ----------------------------------------------------


def next_event(state, model, rng):
    """Competing-exponentials step: (dt, clock_index).

    dt ~ Exponential(total); the clock is chosen with probability
    rates[i]/total, independent of dt.  Zero-rate clocks are never selected
    (strict comparison); raises AbsorbingState when total is zero.
    """
    er = model.rates_of(state)
    total = er.total
    if total <= 0.0:
        raise AbsorbingState(f"total rate {total} for state {state!r}")
    dt = rng.standard_exponential() / total
    u = rng.random() * total
    acc = 0.0
    rates = er.rates
    for i in range(len(rates)):
        acc += rates[i]
        if acc > u:
            return dt, i
    # u landed on the accumulated total by roundoff: take the last live clock
    for i in range(len(rates) - 1, -1, -1):
        if rates[i] > 0.0:
            return dt, i
    raise AbsorbingState("no positive rate despite positive total")


def evolve_until(state, model, t_end, rng, copy=True):
    """Right-continuous path value at t_end, with the jump log.

    On absorption the state freezes and is returned at t_end with the
    ``absorbed`` flag set.  A jump landing exactly on t_end is applied
    (right continuity).
    """
    if not t_end > 0.0:
        raise ValueError("t_end must be positive")
    s = model.copy_state(state) if copy else state
    t = 0.0
    jumps = []
    while True:
        try:
            dt, clock = model.draw_event(s, rng)
        except AbsorbingState:
            return EvolveResult(s, jumps, absorbed=True)
        if t + dt > t_end:
            return EvolveResult(s, jumps, absorbed=False)
        t += dt
        s = model.apply_event(s, clock, rng)
        jumps.append((t, clock))


def sample_chain(state, model, h, n_steps, rng):
    """States of the time-h sample chain at h, 2h, ..., n_steps*h.

    Single event stream throughout, so the k-th element is bitwise the state
    evolve_until(state, model, k*h, rng) would return on the same stream.
    """
    if not h > 0.0:
        raise ValueError("h must be positive")
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    s = model.copy_state(state)
    out = []
    t = 0.0
    k = 1
    absorbed = False
    while k <= n_steps:
        if absorbed:
            out.append(model.copy_state(s))
            k += 1
            continue
        try:
            dt, clock = model.draw_event(s, rng)
        except AbsorbingState:
            absorbed = True
            continue
        t_new = t + dt
        while k <= n_steps and k * h < t_new:
            out.append(model.copy_state(s))
            k += 1
        if k > n_steps:
            break
        t = t_new
        s = model.apply_event(s, clock, rng)
    return out


def first_passage(state, model, refset, h, t_max, rng, copy=True):
    """tau(h) = inf{t >= h : path in refset}, censored at t_max.

    Literal reading of the definition: a start inside the refset that still
    occupies it at time h returns Hit(h).  The path is right-continuous, so a
    jump exactly at h counts with its post-jump state.  Absorption inside the
    refset before h is Hit(h); absorption outside is Censored(t_max).
    """
    if not h > 0.0:
        raise ValueError("h must be positive")
    if not t_max > h:
        raise ValueError("t_max must exceed h")
    s = model.copy_state(state) if copy else state
    t = 0.0
    while True:
        try:
            dt, clock = model.draw_event(s, rng)
        except AbsorbingState:
            if refset.contains(s):
                return PassageOutcome(HIT, max(h, t))
            return PassageOutcome(CENSORED, t_max)
        t_new = t + dt
        if t <= h < t_new and refset.contains(s):
            return PassageOutcome(HIT, h)
        if t_new > t_max:
            return PassageOutcome(CENSORED, t_max)
        s = model.apply_event(s, clock, rng)
        if t_new >= h and refset.contains(s):
            return PassageOutcome(HIT, t_new)
        t = t_new


def evolve_series(state, model, times, rng):
    """Channel values of one path at the given times (sorted, >= 0).

    Single event stream; a time coinciding with a jump records the post-jump
    state (right continuity).  After absorption the frozen state fills the
    remaining times.
    """
    times = np.asarray(times, dtype=np.float64)
    out = np.empty((len(times), len(model.series_channels)), dtype=np.float64)
    s = model.copy_state(state)
    t = 0.0
    idx = 0
    while idx < len(times):
        try:
            dt, clock = model.draw_event(s, rng)
        except AbsorbingState:
            frozen = model.state_channels(s)
            while idx < len(times):
                out[idx] = frozen
                idx += 1
            return out
        t_new = t + dt
        while idx < len(times) and times[idx] < t_new:
            out[idx] = model.state_channels(s)
            idx += 1
        if idx >= len(times):
            return out
        s = model.apply_event(s, clock, rng)
        t = t_new
    return out


def false_return_stats(state, model, refset, h, n_returns, rng, t_cap=None):
    """Histogram of the false-return count N over n_returns episodes.

    One episode starts at `state` and runs until a *true* return: the path
    touches the refset at a jump (or occupies it at time 0) and is still
    inside at the next grid multiple of h.  Every touch whose grid check
    fails increments N; touches while a grid check is pending are not counted
    again.  Returns counts where counts[n] = #episodes with N == n.

    For models with inf_{x in refset} P[no event in h] >= g > 0 the tail obeys
    P[N > n] <= (1-g)^n; tests check that envelope.
    """
    if n_returns < 1:
        raise ValueError("n_returns must be >= 1")
    if t_cap is None:
        t_cap = 1e6 * h
    ns = []
    for _ in range(n_returns):
        s = model.copy_state(state)
        t = 0.0
        n_false = 0
        pending = h if refset.contains(s) else None  # grid time to verify
        while True:
            if t > t_cap:
                raise RuntimeError(f"no true return by t = {t_cap}")
            try:
                dt, clock = model.draw_event(s, rng)
            except AbsorbingState:
                if pending is not None and refset.contains(s):
                    break
                if refset.contains(s):
                    break  # frozen inside: next grid point verifies it
                raise RuntimeError("absorbed outside the refset") from None
            t_new = t + dt
            if pending is not None and t <= pending < t_new:
                if refset.contains(s):
                    break
                n_false += 1
                pending = None
            s = model.apply_event(s, clock, rng)
            if pending is None and refset.contains(s):
                g = math.ceil(t_new / h) * h
                pending = t_new if g == t_new else g
                if pending == t_new:
                    break  # jump landed exactly on the grid: true return
            t = t_new
        ns.append(n_false)
    counts = np.zeros(max(ns) + 1, dtype=np.int64)
    for n_false in ns:
        counts[n_false] += 1
    return counts
