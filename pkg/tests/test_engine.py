"""Generic engine loops against their exact distributional laws.

The constant-rate and flip-flop toys have closed-form event laws, so the
competing-exponentials step, the passage-time conventions, and the false-
return envelope can all be checked directly.
"""

import math

import numpy as np
import pytest
from scipy import stats

from polymix import engine, rng
from polymix.models.oracles import ConstantRates, FlipFlop, IntSet

SEED = 20260825


class ShrinkModel(engine.Model):
    """Test double that absorbs: level decrements at rate 1 until 0."""

    name = "shrink"
    series_channels = ("level",)

    def rates_of(self, state):
        r = 1.0 if state > 0 else 0.0
        return engine.EventRates(rates=np.array([r]), total=r)

    def apply_event(self, state, clock_index, rng):
        return state - 1

    def copy_state(self, state):
        return int(state)

    def encode_state(self, state):
        return str(int(state))

    def decode_state(self, text):
        return int(text)

    def state_channels(self, state):
        return np.array([float(state)])


def test_next_event_rejects_total_zero():
    model = ConstantRates([0.0, 0.0])
    with pytest.raises(engine.AbsorbingState):
        engine.next_event(0.0, model, rng.stream(SEED, 0))


def test_next_event_skips_zero_rate_clocks():
    model = ConstantRates([0.0, 1.0, 0.0])
    gen = rng.stream(SEED, 1)
    for _ in range(500):
        _, clock = engine.next_event(0.0, model, gen)
        assert clock == 1


def test_next_event_holding_times_are_exponential():
    model = ConstantRates([1.0, 3.0])  # total 4
    gen = rng.stream(SEED, 2)
    dts = np.array([engine.next_event(0.0, model, gen)[0] for _ in range(20000)])
    stat = stats.kstest(dts, stats.expon(scale=0.25).cdf)
    assert stat.pvalue > 0.01


def test_next_event_clock_selection_proportions():
    model = ConstantRates([1.0, 3.0])
    gen = rng.stream(SEED, 3)
    n = 40000
    picks = np.array([engine.next_event(0.0, model, gen)[1] for _ in range(n)])
    observed = np.bincount(picks, minlength=2)
    stat = stats.chisquare(observed, f_exp=[0.25 * n, 0.75 * n])
    assert stat.pvalue > 0.01


def test_evolve_until_jump_log_and_flip_parity():
    model = FlipFlop((2.0, 0.5))
    gen = rng.stream(SEED, 4)
    for k in range(50):
        res = engine.evolve_until(0, model, 5.0, gen, copy=True)
        times = [t for t, _ in res.jumps]
        assert all(t1 < t2 for t1, t2 in zip(times, times[1:]))
        assert all(0.0 < t <= 5.0 for t in times)
        assert res.state == len(res.jumps) % 2
        assert not res.absorbed


def test_evolve_until_reports_absorption():
    model = ShrinkModel()
    res = engine.evolve_until(3, model, 1e6, rng.stream(SEED, 5))
    assert res.absorbed
    assert res.state == 0
    assert len(res.jumps) == 3


def test_sample_chain_matches_evolve_until_on_shared_stream():
    model = FlipFlop((1.0, 1.5))
    h, n_steps = 0.7, 6
    chain = engine.sample_chain(0, model, h, n_steps, rng.stream(SEED, 6))
    assert len(chain) == n_steps
    for k in range(1, n_steps + 1):
        # a fresh copy of the same stream must land on the same state
        res = engine.evolve_until(0, model, k * h, rng.stream(SEED, 6))
        assert chain[k - 1] == res.state


def test_sample_chain_freezes_after_absorption():
    model = ShrinkModel()
    chain = engine.sample_chain(2, model, 50.0, 4, rng.stream(SEED, 7))
    assert chain == [0, 0, 0, 0]


def test_first_passage_start_inside_hits_at_h():
    # the start state occupies the refset at time h (exit rate is tiny)
    model = FlipFlop((0.01, 1.0))
    refset = IntSet([0])
    out = engine.first_passage(0, model, refset, 0.5, 10.0, rng.stream(SEED, 8))
    assert out.hit and out.time == 0.5


def test_first_passage_entry_after_h_is_the_jump_time():
    model = ShrinkModel()
    refset = IntSet([0])
    gen = rng.stream(SEED, 9)
    probe = rng.stream(SEED, 9)
    out = engine.first_passage(3, model, refset, 1e-6, 1e6, gen)
    t_entry = 0.0
    for _ in range(3):  # every event consumes one exponential and one uniform
        t_entry += probe.standard_exponential()
        probe.random()
    assert out.hit and out.time == t_entry


def test_first_passage_censors_at_t_max():
    # leaving state 1 takes ~1e9 time units; the run is censored instead
    model = FlipFlop((1.0, 1e-9))
    out = engine.first_passage(
        1, model, IntSet([0]), 0.1, 5.0, rng.stream(SEED, 10)
    )
    assert not out.hit
    assert out.time == 5.0


def test_first_passage_absorbed_inside_hits_at_max_h_t():
    model = ShrinkModel()
    refset = IntSet([0])
    gen = rng.stream(SEED, 11)
    probe = rng.stream(SEED, 11)
    t_abs = 0.0
    for _ in range(2):
        t_abs += probe.standard_exponential()
        probe.random()
    # h beyond the absorption time: the frozen state is inside, so Hit(h)
    out = engine.first_passage(2, model, refset, t_abs + 5.0, t_abs + 9.0, gen)
    assert out.hit and out.time == t_abs + 5.0


def test_first_passage_absorbed_outside_censors():
    model = ConstantRates([0.0])  # absorbed at t = 0 in state 7
    out = engine.first_passage(
        7.0, model, IntSet([0]), 0.1, 3.0, rng.stream(SEED, 12)
    )
    assert not out.hit
    assert out.time == 3.0


def test_first_passage_monotone_in_h():
    # same stream, smaller h: tau(h') <= tau(h) path by path
    model = FlipFlop((1.0, 1.0))
    refset = IntSet([0])
    for k in range(200):
        small = engine.first_passage(
            1, model, refset, 0.2, 50.0, rng.stream(SEED, 100 + k)
        )
        large = engine.first_passage(
            1, model, refset, 2.0, 50.0, rng.stream(SEED, 100 + k)
        )
        assert small.hit and large.hit
        assert small.time <= large.time
        assert large.time >= 2.0


def test_first_passage_argument_validation():
    model = FlipFlop()
    with pytest.raises(ValueError):
        engine.first_passage(0, model, IntSet([0]), 0.0, 1.0, rng.stream(SEED, 13))
    with pytest.raises(ValueError):
        engine.first_passage(0, model, IntSet([0]), 1.0, 1.0, rng.stream(SEED, 13))


def test_evolve_series_matches_jump_log_reconstruction():
    model = FlipFlop((1.2, 0.8))
    times = np.array([0.0, 0.5, 1.0, 2.0, 4.0])
    series = engine.evolve_series(1, model, times, rng.stream(SEED, 14))
    res = engine.evolve_until(1, model, float(times[-1]), rng.stream(SEED, 14))
    state = 1
    jumps = list(res.jumps)
    for t, row in zip(times, series):
        # post-jump value at ties: count jumps with time <= t
        flips = sum(1 for tj, _ in jumps if tj <= t)
        assert row[0] == float((1 + flips) % 2)
    assert series.shape == (len(times), 1)


def test_evolve_series_fills_frozen_state_after_absorption():
    model = ShrinkModel()
    times = np.array([0.1, 1e3, 1e6])
    series = engine.evolve_series(1, model, times, rng.stream(SEED, 15))
    assert series[-1, 0] == 0.0
    assert series[-2, 0] == 0.0


def test_false_return_envelope():
    # refset {0}: success chance of each grid check is at least
    # g = exp(-rate_out[0] * h), so P[N > n] <= (1 - g)^n
    model = FlipFlop((2.0, 4.0))
    h = 0.5
    g = math.exp(-2.0 * h)
    counts = engine.false_return_stats(
        0, model, IntSet([0]), h, 4000, rng.stream(SEED, 16)
    )
    n_total = counts.sum()
    tail = 1.0 - np.cumsum(counts) / n_total
    for n in range(min(len(tail), 8)):
        envelope = (1.0 - g) ** (n + 1)
        slack = 4.0 * math.sqrt(envelope * (1.0 - envelope) / n_total)
        assert tail[n] <= envelope + slack


def test_false_return_stats_counts_sum_to_episodes():
    model = FlipFlop((1.0, 1.0))
    counts = engine.false_return_stats(
        0, model, IntSet([0]), 0.3, 500, rng.stream(SEED, 17)
    )
    assert counts.sum() == 500
    assert np.all(counts >= 0)
