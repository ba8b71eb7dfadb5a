"""Gamma scans: monotone verdicts, lattices, sweeps, and confirmation."""

from types import SimpleNamespace

import numpy as np
import pytest

from polymix import scan, tails
from polymix.models.oracles import CountdownAtom, CountdownOracle, CountdownParams
from polymix.models.rhm import RhmModel, RhmParams
from polymix.models.see import SeeBox, SeeModel, SeeParams

SEED = 606060


# ---- monotone verdicts -----------------------------------------------------------


def test_monotone_verdict_directions():
    sd = [0.01] * 4
    assert scan.monotone_verdict([8.0, 6.0, 5.0, 2.0], sd) == "nonincreasing"
    assert scan.monotone_verdict([2.0, 5.0, 6.0, 8.0], sd) == "nondecreasing"
    assert scan.monotone_verdict([3.0, 3.0, 3.0, 3.0], sd) == "flat"


def test_monotone_verdict_soft_and_hard_violations():
    # one uptick hidden inside overlapping intervals is forgiven once
    values = [5.0, 4.0, 4.1, 3.0]
    sd = [0.2] * 4
    assert scan.monotone_verdict(values, sd) == "nonincreasing"
    assert scan.monotone_verdict(values, sd, max_soft=0) == "mixed"
    # a clear uptick is never forgiven
    assert scan.monotone_verdict([5.0, 4.0, 6.0, 3.0], [0.01] * 4) == "mixed"


# ---- candidate selection ---------------------------------------------------------


def fake_estimate(value, std_dev=0.01):
    return SimpleNamespace(value=value, std_dev=std_dev)


def test_pick_candidate_breaks_ties_lexicographically():
    model = CountdownOracle()
    states = [3, 1, 2]
    estimates = [fake_estimate(5.0), fake_estimate(5.0), fake_estimate(3.0)]
    idx, separated = scan.pick_candidate(states, estimates, model)
    assert idx == 1
    assert not separated  # the tied point's interval cannot be cleared


def test_pick_candidate_separation():
    model = CountdownOracle()
    estimates = [fake_estimate(10.0, 0.1), fake_estimate(5.0, 0.1),
                 fake_estimate(3.0, 0.1)]
    idx, separated = scan.pick_candidate([1, 2, 3], estimates, model)
    assert idx == 0
    assert separated


# ---- lattices --------------------------------------------------------------------


def test_see_lattice_geometry():
    model = SeeModel(SeeParams(3, 1.0, 2.0))
    box = SeeBox(0.1, 10.0, 3)
    lat = scan.see_lattice(model, box, per_axis=3)
    assert len(lat.states) == 27
    assert lat.axis_names == ("e1", "e2", "e3")
    np.testing.assert_allclose(lat.axis_values[0], (0.1, 1.0, 10.0), rtol=1e-12)
    np.testing.assert_allclose(lat.states[0], (0.1, 0.1, 0.1), rtol=1e-12)
    # row-major: the last axis varies fastest
    np.testing.assert_allclose(lat.states[1], (0.1, 0.1, 1.0), rtol=1e-12)
    assert len(lat.lines) == 3 and all(len(ls) == 9 for ls in lat.lines)
    assert lat.lines[0][0] == (0, 9, 18)
    assert lat.lines[2][0] == (0, 1, 2)


def test_rhm_lattice_collapses_empty_sites():
    model = RhmModel(RhmParams(3, 1.0, 2.0))
    lat = scan.rhm_lattice(model, s_values=(1.0,), k_values=(0, 1),
                           x_values=(0.5, 2.0))
    # k = 0 points are the same state for every particle energy
    assert len(lat.states) == 3
    assert lat.axis_names == ("s", "k", "x")
    x_lines = lat.lines[2]
    assert x_lines[0] == (0, 0)  # the collapsed pair revisits its survivor
    assert x_lines[1] == (1, 2)


# ---- 1D sweeps -------------------------------------------------------------------


def countdown_sweep(levels, n_samples=200):
    model = CountdownOracle(CountdownParams(4.0, 2.0, 1.0))
    config = scan.TailConfig(h=1.0, t_max=10.0, beta=2.0,
                             n_samples=n_samples, m_min=50)
    return scan.sweep_1d(model, CountdownAtom(), 0, "level", levels, config,
                         SEED, require_in_refset=False)


def test_sweep_1d_deterministic_return_times():
    # from level L every return takes exactly L, so the tail is a step
    # function and gamma lands on the last grid point below L
    estimates = countdown_sweep((2, 4, 8))
    grid = tails.log_grid(1.0, 10.0)
    p_full = tails.agresti_coull(200, 200)[0]
    for level, est in zip((2, 4, 8), estimates):
        t_star = grid[grid < level][-1]
        assert est.value == pytest.approx(p_full * t_star**2, rel=1e-12)
        assert est.argmax_time == t_star
        assert est.stabilized is True
        assert est.std_dev == 0.0
    verdict = scan.monotone_verdict(
        [e.value for e in estimates], [e.std_dev for e in estimates]
    )
    assert verdict == "nondecreasing"


def test_sweep_1d_refset_containment():
    with pytest.raises(ValueError, match="outside the refset"):
        model = CountdownOracle()
        config = scan.TailConfig(h=1.0, t_max=10.0, beta=2.0, n_samples=10)
        scan.sweep_1d(model, CountdownAtom(), 0, "level", (2,), config, SEED)


# ---- grid scans ------------------------------------------------------------------


def test_grid_scan_structure_on_see():
    model = SeeModel(SeeParams(3, 1.0, 1.0))
    box = SeeBox(0.5, 2.0, 3)
    lat = scan.see_lattice(model, box, per_axis=2)
    config = scan.TailConfig(h=0.5, t_max=5.0, beta=2.0, n_samples=150,
                             m_min=20)
    report = scan.grid_scan(model, box, lat, config, SEED)
    assert len(report.points) == 8
    assert set(report.sweeps) == {"e1", "e2", "e3"}
    assert all(
        v in ("nonincreasing", "nondecreasing", "flat", "mixed")
        for v in report.sweeps.values()
    )
    assert report.candidate_max is lat.states[report.candidate_index]
    assert report.confirmed is False and report.updated_beta is None


def test_grid_scan_accepts_bare_state_lists():
    model = SeeModel(SeeParams(3, 1.0, 1.0))
    box = SeeBox(0.5, 2.0, 3)
    config = scan.TailConfig(h=0.5, t_max=5.0, beta=2.0, n_samples=100,
                             m_min=20)
    states = [np.full(3, 0.5), np.full(3, 2.0)]
    report = scan.grid_scan(model, box, states, config, SEED)
    assert len(report.points) == 2
    assert report.sweeps == {}


def test_grid_scan_rejects_out_of_box_states():
    model = SeeModel(SeeParams(3, 1.0, 1.0))
    box = SeeBox(0.5, 2.0, 3)
    config = scan.TailConfig(h=0.5, t_max=5.0, beta=2.0, n_samples=10)
    with pytest.raises(ValueError, match="outside the refset"):
        scan.grid_scan(model, box, [np.array([3.0, 1.0, 1.0])], config, SEED)
    with pytest.raises(ValueError, match="empty lattice"):
        scan.grid_scan(model, box, [], config, SEED)


# ---- confirmation ----------------------------------------------------------------


def exact_curve(exponent):
    grid = tails.log_grid(1.0, 100.0, 10)
    return tails.SurvivalCurve.from_probabilities(grid, grid**-exponent)


def test_confirm_updates_beta_on_clear_mismatch():
    report = scan.confirm_from_data(exact_curve(3.0), reference_beta=2.0)
    assert report.updated_beta == pytest.approx(3.0, abs=1e-9)
    assert report.reference_beta == 2.0
    # gamma recomputed with the fitted exponent: sup t^-3 * t^3 = 1
    assert report.gamma.value == pytest.approx(1.0, rel=1e-9)
    assert report.unstable is False
    gamma, fit = report
    assert gamma is report.gamma and fit is report.fit


def test_confirm_keeps_matching_beta():
    curve = exact_curve(2.0)
    fitted = tails.fit_slope(curve, tails.fit_window(curve, 100)).beta
    report = scan.confirm_from_data(curve, reference_beta=fitted)
    assert report.updated_beta is None
    assert report.gamma.value == pytest.approx(1.0, rel=1e-9)


def test_confirm_reports_instability():
    grid = tails.log_grid(1.0, 20.0, 4)
    rows = [[600, 450, 380, 300, 230, 180]] * 2 + [[280, 200, 150, 110, 80, 60]] * 6
    data = tails.TailCounts(
        grid,
        np.asarray(rows, dtype=np.int64),
        np.full(8, 1000, dtype=np.int64),
    )
    report = scan.confirm_from_data(data, reference_beta=2.0, m_min=50)
    assert report.unstable is True
    assert report.gamma.stabilized is False


def test_confirm_maximizer_containment():
    model = CountdownOracle()
    config = scan.TailConfig(h=1.0, t_max=10.0, beta=2.0, n_samples=10)
    with pytest.raises(ValueError, match="outside the refset"):
        scan.confirm_maximizer(model, CountdownAtom(), 3, config, SEED)
