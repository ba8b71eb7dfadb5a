"""Survival estimation, slope fits, gamma, and the moment/tail checks.

Reference values here come from tests/oracles.py (high-precision mpmath
routes and closed forms), frozen as literals where they pin a contract.
"""

import math

import numpy as np
import pytest

import oracles
from polymix import tails
from polymix.engine import CENSORED, HIT, PassageOutcome

SEED = 424242


# ---- grids --------------------------------------------------------------------


def test_log_grid_geometry():
    grid = tails.log_grid(0.1, 1000.0)
    assert len(grid) == 161  # 4 decades at 40 points each, plus the anchor
    assert grid[0] == 0.1
    assert np.all(np.diff(grid) > 0.0)
    assert grid[-1] <= 1000.0 * (1.0 + 1e-12)
    ratios = grid[1:] / grid[:-1]
    assert np.allclose(ratios, 10.0 ** (1.0 / 40.0), rtol=1e-12)


def test_log_grid_validation():
    with pytest.raises(ValueError):
        tails.log_grid(0.0, 10.0)
    with pytest.raises(ValueError):
        tails.log_grid(1.0, 1.0)


# ---- Agresti-Coull --------------------------------------------------------------


def test_agresti_coull_frozen_values():
    # mpmath oracle at 50 digits, rounded to float
    cases = [
        ((0, 100, 1.96), 0.018497403738000955, 0.025916210578884203),
        ((5, 1000, 1.96), 0.006894314800263308, 0.005118783550814871),
        ((999, 1000, 1.96), 0.9970903776053911, 0.0033320311641142682),
        ((50, 50, 2.0), 0.9629629629629629, 0.05139916048064525),
    ]
    for (m, n, z), p_ref, h_ref in cases:
        p, half = tails.agresti_coull(m, n, z)
        assert abs(p - p_ref) <= 1e-15
        assert abs(half - h_ref) <= 1e-15


def test_agresti_coull_hand_arithmetic():
    # all 50 successes at z = 2: N~ = 54, p~ = 52/54
    p, half = tails.agresti_coull(50, 50, 2.0)
    assert p == 52.0 / 54.0
    assert half == 2.0 * math.sqrt(p * (1.0 - p) / 54.0)


def test_agresti_coull_against_mp_oracle():
    gen = np.random.default_rng(SEED)
    for _ in range(200):
        n = int(gen.integers(1, 10**7))
        m = int(gen.integers(0, n + 1))
        z = float(gen.uniform(0.5, 4.0))
        p, half = tails.agresti_coull(m, n, z)
        p_ref, h_ref = oracles.agresti_coull_mp(m, n, z)
        assert abs(p - p_ref) <= 1e-12
        assert abs(half - h_ref) <= 1e-12


def test_agresti_coull_validation():
    with pytest.raises(ValueError):
        tails.agresti_coull(0, 0)
    with pytest.raises(ValueError):
        tails.agresti_coull(-1, 10)
    with pytest.raises(ValueError):
        tails.agresti_coull(11, 10)
    with pytest.raises(ValueError):
        tails.agresti_coull(1, 10, z=-1.0)
    p, half = tails.agresti_coull(3, 10, z=0.0)
    assert p == 0.3 and half == 0.0


# ---- survival curves -------------------------------------------------------------


def test_estimate_survival_counting_conventions():
    grid = np.array([1.0, 2.0, 4.0])
    outcomes = [
        PassageOutcome(HIT, 0.5),
        PassageOutcome(HIT, 1.0),  # tau = t_0 does not exceed t_0
        PassageOutcome(HIT, 1.5),
        PassageOutcome(HIT, 3.0),
        PassageOutcome(CENSORED, 4.0),  # censored exceeds every grid point
    ]
    curve = tails.estimate_survival(outcomes, grid)
    assert curve.counts.tolist() == [3, 2, 1]
    assert curve.n_total == 5
    curve.validate()
    with pytest.raises(ValueError):
        tails.estimate_survival([], grid)


def test_counts_of_times_matches_bruteforce():
    gen = np.random.default_rng(SEED)
    grid = tails.log_grid(0.1, 50.0, 10)
    times = gen.uniform(0.0, 60.0, size=500)
    counts = tails.counts_of_times(times, grid)
    brute = np.array([(times > t).sum() for t in grid])
    assert np.array_equal(counts, brute)


def test_curve_validate_rejects_bad_shapes():
    grid = np.array([1.0, 2.0])
    with pytest.raises(ValueError):
        tails.SurvivalCurve.from_counts(grid, [3], 10)
    curve = tails.SurvivalCurve.from_counts(grid, [2, 3], 10)
    with pytest.raises(AssertionError):
        curve.validate()  # counts increase


def test_reliable_range_is_a_prefix():
    grid = np.array([1.0, 2.0, 4.0, 8.0])
    curve = tails.SurvivalCurve.from_counts(grid, [150, 120, 90, 40], 200)
    assert tails.reliable_range(curve, 100) == (0, 2)
    assert tails.reliable_range(curve, 10) == (0, 4)
    assert tails.reliable_range(curve, 1000) == (0, 0)


# ---- slope fits ------------------------------------------------------------------


def test_fit_slope_exact_power_law_has_zero_stderr():
    grid = tails.log_grid(1.0, 100.0, 10)
    curve = tails.SurvivalCurve.from_probabilities(grid, 0.5 * grid**-2.0)
    fit = tails.fit_slope(curve, (0, len(grid)))
    assert abs(fit.beta - 2.0) <= 1e-12
    assert fit.stderr <= 1e-14  # residuals at log() rounding scale only
    assert fit.n_points == len(grid)


def test_fit_slope_recovers_noiseless_counts():
    grid = tails.log_grid(1.0, 30.0, 20)
    n = 10**6
    counts = np.rint(n * grid**-1.0).astype(np.int64)
    curve = tails.SurvivalCurve.from_counts(grid, counts, n)
    fit = tails.fit_slope(curve, (0, len(grid)))
    assert abs(fit.beta - 1.0) < 0.02


def test_fit_slope_validation():
    grid = np.array([1.0, 2.0, 4.0, 8.0])
    curve = tails.SurvivalCurve.from_counts(grid, [40, 30, 20, 10], 100)
    with pytest.raises(ValueError):
        tails.fit_slope(curve, (0, 2))  # too few points
    zero_p = tails.SurvivalCurve.from_probabilities(grid, [0.5, 0.2, 0.0, 0.0])
    with pytest.raises(ValueError):
        tails.fit_slope(zero_p, (0, 4))
    mixed = tails.SurvivalCurve(
        grid=grid,
        counts=np.array([40, 30, 20, 10]),
        n_total=100,
        z=1.96,
        p_tilde=np.array([0.4, 0.3, 0.2, 0.1]),
        halfwidth=np.array([0.0, 0.1, 0.1, 0.1]),
    )
    with pytest.raises(ValueError):
        tails.fit_slope(mixed, (0, 4))


def test_fit_window_hand_case():
    # two decades at 10 points each; tail ~ t^-1 from n = 1000 samples:
    # the head p~ > 0.75 drops the first two points, m_min = 100 stops the
    # reliable range at index 11, and the trailing decade reaches back to
    # index 1 but is clipped by the head drop
    grid = tails.log_grid(1.0, 100.0, 10)
    n = 1000
    counts = np.rint(n * np.minimum(1.0, grid**-1.0)).astype(np.int64)
    curve = tails.SurvivalCurve.from_counts(grid, counts, n)
    assert tails.reliable_range(curve, 100) == (0, 11)
    assert tails.fit_window(curve, m_min=100) == (2, 11)
    fit = tails.fit_slope(curve, tails.fit_window(curve, m_min=100))
    assert abs(fit.beta - 1.0) < 0.05


def test_fit_window_widens_back_to_three_points():
    grid = np.array([1.0, 2.0, 4.0, 8.0])
    curve = tails.SurvivalCurve.from_counts(grid, [998, 990, 980, 970], 1000)
    lo, hi = tails.fit_window(curve, m_min=100)
    assert hi - lo == 3  # every point is above head_max; keep the last three
    assert hi == 4


def test_fit_window_needs_three_points():
    grid = np.array([1.0, 2.0])
    curve = tails.SurvivalCurve.from_counts(grid, [50, 40], 100)
    with pytest.raises(ValueError):
        tails.fit_window(curve, m_min=10)


# ---- gamma -----------------------------------------------------------------------


def test_gamma_from_exact_clamped_power_law():
    grid = tails.log_grid(0.1, 100.0)
    curve = tails.SurvivalCurve.from_probabilities(
        grid, np.minimum(1.0, 4.0 * grid**-2.0)
    )
    value, argmax = tails.gamma_from_curve(curve, 2.0)
    assert abs(value - 4.0) <= 1e-12 * 4.0
    assert argmax >= 2.0 * (1.0 - 1e-12)
    # restricting to t >= h keeps the plateau value
    value_h, argmax_h = tails.gamma_from_curve(curve, 2.0, h=50.0)
    assert abs(value_h - 4.0) <= 1e-12 * 4.0
    assert argmax_h >= 50.0


def test_gamma_from_curve_none_without_reliable_points():
    grid = np.array([1.0, 2.0, 4.0])
    curve = tails.SurvivalCurve.from_counts(grid, [5, 3, 1], 10)
    assert tails.gamma_from_curve(curve, 2.0, m_min=100) is None
    with pytest.raises(ValueError):
        tails.gamma_estimate(curve, 2.0, m_min=100)


def make_tail_counts(chunk_counts, chunk_size):
    chunk_counts = np.asarray(chunk_counts, dtype=np.int64)
    sizes = np.full(len(chunk_counts), chunk_size, dtype=np.int64)
    grid = np.array([1.0, 2.0, 4.0], dtype=np.float64)
    return tails.TailCounts(grid, chunk_counts, sizes)


def test_tail_counts_prefix_and_batches():
    rows = [[900, 500, 200]] * 8
    data = make_tail_counts(rows, 1000)
    assert data.n_total == 8000
    half = data.curve(4)
    assert half.n_total == 4000
    assert half.counts.tolist() == [3600, 2000, 800]
    batches = data.batch_curves(4)
    assert len(batches) == 4
    assert all(b.n_total == 2000 for b in batches)


def test_gamma_estimate_stabilized_on_identical_chunks():
    rows = [[900, 500, 200]] * 8
    est = tails.gamma_estimate(make_tail_counts(rows, 1000), 2.0)
    assert est.stabilized is True
    assert est.std_dev == 0.0
    assert est.n_batches_used == 8
    assert len(est.checkpoints) == 3
    # every chunk is identical, so the checkpoints only move by the
    # shrinkage of the adjusted estimator
    assert max(est.checkpoints) - min(est.checkpoints) < 0.01 * est.value


def test_gamma_estimate_flags_drift():
    rows = [[900, 800, 700]] * 2 + [[300, 200, 100]] * 6
    est = tails.gamma_estimate(make_tail_counts(rows, 1000), 2.0)
    assert est.stabilized is False


def test_gamma_estimate_without_growth_information():
    rows = [[900, 500, 200]] * 3  # fewer than 4 chunks
    est = tails.gamma_estimate(make_tail_counts(rows, 1000), 2.0)
    assert est.stabilized is None
    curve = tails.SurvivalCurve.from_counts(
        np.array([1.0, 2.0]), [500, 300], 1000
    )
    bare = tails.gamma_estimate(curve, 2.0)
    assert bare.stabilized is None
    assert bare.std_dev == 0.0 and bare.checkpoints == ()


def test_gamma_estimate_drops_unreliable_batches():
    # counts below m_min in every chunk: batch gammas all missing
    rows = [[50, 20, 5]] * 8
    data = make_tail_counts(rows, 1000)
    est = tails.gamma_estimate(data, 2.0, m_min=100)
    assert est.n_batches_used == 0
    assert est.std_dev == 0.0


# ---- moments ---------------------------------------------------------------------


def test_moment_tail_check_matches_mp_oracle():
    report = tails.moment_tail_check(
        tails.power_law_tail(1.0, 2.0), beta=2.0, epsilon=1.0, n_max=10**5
    )
    # E[Z] = 1 + pi^2/6 for P[Z > n] = min(1, n^-2)
    assert abs(report.value - 2.644924066798226) <= 1e-12 * report.value
    assert abs(report.value - (1.0 + math.pi**2 / 6.0)) < 1e-3
    assert report.converged
    assert report.beta_divergent


def test_moment_tail_check_fractional_exponent():
    report = tails.moment_tail_check(
        tails.power_law_tail(1.0, 2.0), beta=2.0, epsilon=0.5, n_max=10**5
    )
    assert abs(report.value - 5.3586898312963696) <= 1e-12 * report.value
    assert report.converged
    assert report.last_increment < 1e-6


def test_moment_tail_check_faster_tail_is_not_divergent():
    report = tails.moment_tail_check(
        tails.power_law_tail(1.0, 4.0), beta=2.0, epsilon=0.5, n_max=10**5
    )
    assert report.converged
    assert not report.beta_divergent  # E[Z^2] exists under an n^-4 tail


def test_moment_tail_check_validation():
    tail = tails.power_law_tail(1.0, 2.0)
    with pytest.raises(ValueError):
        tails.moment_tail_check(tail, beta=2.0, epsilon=0.0)
    with pytest.raises(ValueError):
        tails.moment_tail_check(tail, beta=1.0, epsilon=2.0)


def test_moment_tail_check_accepts_survival_curves():
    # step tail: 1 on [0,1), 0.9 on [1,3), 0.5 on [3,10), 0.1 at 10, 0 past
    grid = np.array([1.0, 3.0, 10.0])
    curve = tails.SurvivalCurve.from_probabilities(grid, [0.9, 0.5, 0.1])
    report = tails.moment_tail_check(curve, beta=2.0, epsilon=1.0, n_max=100)
    expect = 1.0 + 2 * 0.9 + 7 * 0.5 + 0.1
    assert abs(report.value - expect) <= 1e-12
    assert report.converged


def test_power_law_tail_clamps_and_vectorizes():
    tail = tails.power_law_tail(4.0, 2.0)
    out = tail([0.0, 1.0, 2.0, 4.0])
    assert out.tolist() == [1.0, 1.0, 1.0, 0.25]
