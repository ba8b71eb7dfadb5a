"""Exactly solvable chains for validating the estimators.

The countdown oracle walks down from its current level once per holding time
and, on reaching 0, jumps to a fresh level Y with P[Y > n] = min(1, C n^-b).
Holding times are deterministic (the model overrides the exponential event
draw), so the return time to 0 from level L is exactly L times the holding
time and every tail/γ statistic has a closed form.

Also hosts the constant-rate toys the engine tests use.
"""

import math
from dataclasses import dataclass

import numpy as np

from ..engine import EventRates, Model, RefSet


@dataclass(frozen=True)
class CountdownParams:
    tail_c: float = 4.0
    tail_beta: float = 2.0
    holding: float = 1.0

    def __post_init__(self):
        if not self.tail_c > 0.0:
            raise ValueError("tail_c must be positive")
        if not self.tail_beta > 1.0:
            raise ValueError("tail_beta must exceed 1")
        if not self.holding > 0.0:
            raise ValueError("holding must be positive")

    def as_dict(self):
        return {
            "kind": "countdown",
            "tail_c": self.tail_c,
            "tail_beta": self.tail_beta,
            "holding": self.holding,
        }


def level_tail(params, n):
    """P[Y > n], clamped to [0, 1]; n <= 0 gives 1."""
    if n <= 0:
        return 1.0
    return min(1.0, params.tail_c * float(n) ** -params.tail_beta)


def draw_level(params, rng):
    """Inverse-transform draw of Y: exact, P[Y > n] = level_tail(n)."""
    u = rng.random()
    while u == 0.0:
        u = rng.random()
    # smallest n >= 1 with tail(n) <= u, located by the closed form then
    # nudged to undo any floating-point slip
    n = max(1, math.ceil((params.tail_c / u) ** (1.0 / params.tail_beta)))
    while n > 1 and level_tail(params, n - 1) <= u:
        n -= 1
    while level_tail(params, n) > u:
        n += 1
    return n


def countdown_step(level, params, rng):
    """One jump: decrement, or redraw the level from the tail law at 0."""
    if level < 0:
        raise ValueError("level must be >= 0")
    if level == 0:
        return draw_level(params, rng)
    return level - 1


def return_time_tail(params, t):
    """P[tau > t] for the return time tau = Y * holding from an atom exit."""
    q = math.floor(t / params.holding)
    return level_tail(params, q)


def gamma_on_grid(params, grid, beta):
    """Exact sup over the grid of P[tau > t] * t^beta (the estimator's target)."""
    best = 0.0
    for t in np.asarray(grid, dtype=np.float64):
        best = max(best, return_time_tail(params, t) * t**beta)
    return best


class CountdownAtom(RefSet):
    """The singleton reference set {0}."""

    def contains(self, state):
        return state == 0

    def as_dict(self):
        return {"atom": 0}


class CountdownOracle(Model):
    name = "countdown"
    series_channels = ("level",)

    def __init__(self, params=None):
        self.params = params if params is not None else CountdownParams()

    def rates_of(self, state):
        r = 1.0 / self.params.holding  # nominal; events are deterministic
        return EventRates(rates=np.array([r]), total=r)

    def draw_event(self, state, rng):
        # deterministic holding: this override is why return times are exact
        return self.params.holding, 0

    def apply_event(self, state, clock_index, rng):
        return countdown_step(state, self.params, rng)

    def copy_state(self, state):
        return int(state)

    def encode_state(self, state):
        return str(int(state))

    def decode_state(self, text):
        level = int(text)
        if level < 0:
            raise ValueError("level must be >= 0")
        return level

    def state_channels(self, state):
        return np.array([float(state)])

    def observable(self, name):
        if name == "is_home":
            return lambda ch: (np.asarray(ch)[..., 0] == 0.0).astype(np.float64)
        return super().observable(name)

    def coordinate_state(self, base_state, name, value):
        if name == "level":
            level = int(value)
            if level < 0:
                raise ValueError("level must be >= 0")
            return level
        return super().coordinate_state(base_state, name, value)

    def initial_sampler(self):
        """The atom-exit law: level ~ Y.  Return times are then Y * holding."""
        p = self.params

        def draw(rng):
            return draw_level(p, rng)

        return draw

    def as_dict(self):
        return self.params.as_dict()


class ConstantRates(Model):
    """Fixed clock intensities, state never changes.  Engine test double."""

    name = "constant-rates"
    series_channels = ("value",)

    def __init__(self, rates):
        self._rates = np.asarray(rates, dtype=np.float64)
        self._total = float(self._rates.sum())

    def rates_of(self, state):
        return EventRates(rates=self._rates, total=self._total)

    def apply_event(self, state, clock_index, rng):
        return state

    def copy_state(self, state):
        return state

    def encode_state(self, state):
        return format(float(state), ".17g")

    def decode_state(self, text):
        return float(text)

    def state_channels(self, state):
        return np.array([float(state)])


class FlipFlop(Model):
    """Two states 0/1; a single clock of rate rate_out[state] flips the state.

    Holding in state 0 is Exponential(rate_out[0]), so with refset {0} the
    false-return success bound P[no event in h] = exp(-rate_out[0] * h) is
    exact.
    """

    name = "flipflop"
    series_channels = ("pos",)

    def __init__(self, rate_out=(1.0, 1.0)):
        self.rate_out = (float(rate_out[0]), float(rate_out[1]))

    def rates_of(self, state):
        r = self.rate_out[int(state)]
        return EventRates(rates=np.array([r]), total=r)

    def apply_event(self, state, clock_index, rng):
        return 1 - int(state)

    def copy_state(self, state):
        return int(state)

    def encode_state(self, state):
        return str(int(state))

    def decode_state(self, text):
        return int(text)

    def state_channels(self, state):
        return np.array([float(state)])


class IntSet(RefSet):
    """Reference set given by an explicit collection of integer states."""

    def __init__(self, members):
        self.members = frozenset(int(m) for m in members)

    def contains(self, state):
        return int(state) in self.members

    def as_dict(self):
        return {"members": sorted(self.members)}
