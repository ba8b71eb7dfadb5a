"""Chunked sampling farm: layout, worker resolution, and invariance."""

import os

import numpy as np
import pytest

from polymix import farm, tails
from polymix.models.oracles import CountdownAtom, CountdownOracle, CountdownParams

SEED = 515151


# ---- layout ---------------------------------------------------------------------


def test_chunk_layout_small_n_gets_unit_chunks():
    layout = farm.chunk_layout(10)
    assert layout == [(i, i, 1) for i in range(10)]


def test_chunk_layout_large_n_caps_chunk_size():
    layout = farm.chunk_layout(10**6)
    sizes = [size for _, _, size in layout]
    assert sizes[0] == 4096
    assert len(layout) == 245
    assert sum(sizes) == 10**6
    starts = [start for _, start, _ in layout]
    assert starts == list(np.cumsum([0] + sizes[:-1]))


def test_chunk_layout_explicit_size():
    layout = farm.chunk_layout(20, chunk_size=7)
    assert [(s, z) for _, s, z in layout] == [(0, 7), (7, 7), (14, 6)]


def test_chunk_layout_validation():
    with pytest.raises(ValueError):
        farm.chunk_layout(0)
    with pytest.raises(ValueError):
        farm.chunk_layout(10, chunk_size=0)


# ---- worker resolution ----------------------------------------------------------


def test_resolve_workers(monkeypatch):
    assert farm.resolve_workers(3) == 3
    monkeypatch.setenv("POLYMIX_WORKERS", "5")
    assert farm.resolve_workers() == 5
    assert farm.resolve_workers(2) == 2  # explicit beats the environment
    monkeypatch.delenv("POLYMIX_WORKERS")
    assert farm.resolve_workers() == 1
    monkeypatch.setenv("POLYMIX_WORKERS", "  ")
    assert farm.resolve_workers() == 1
    with pytest.raises(ValueError):
        farm.resolve_workers(0)


# ---- run_chunks -----------------------------------------------------------------


class RecordingJob:
    """Echoes each task back so ordering is visible in the results."""

    def __init__(self):
        self.warmed = 0

    def warm_up(self):
        self.warmed += 1

    def run_chunk(self, chunk_index, start, size):
        return (chunk_index, start, size)


def test_run_chunks_preserves_chunk_order():
    job = RecordingJob()
    serial = farm.run_chunks(job, 10, workers=1, chunk_size=3)
    assert job.warmed == 1
    forked = farm.run_chunks(RecordingJob(), 10, workers=3, chunk_size=3)
    expect = [(0, 0, 3), (1, 3, 3), (2, 6, 3), (3, 9, 1)]
    assert serial == expect
    assert forked == expect


# ---- initial-state sources ------------------------------------------------------


def test_fixed_initial_hands_out_copies():
    class ArrayModel:
        @staticmethod
        def copy_state(state):
            return state.copy()

    base = np.array([1.0, 2.0, 3.0])
    initial = farm.FixedInitial(base)
    gen = np.random.default_rng(SEED)
    drawn = initial.draw(ArrayModel(), gen)
    assert drawn is not base
    drawn[0] = -1.0
    assert base[0] == 1.0


def test_ensemble_initial_resamples_member_states():
    states = [object() for _ in range(5)]
    initial = farm.EnsembleInitial(states)
    gen = np.random.default_rng(SEED)
    seen = {id(initial.draw(None, gen)) for _ in range(100)}
    assert seen <= {id(s) for s in states}
    assert len(seen) == 5
    with pytest.raises(ValueError):
        farm.EnsembleInitial([])


def test_law_initial_draws_fresh():
    initial = farm.LawInitial(lambda rng: rng.random())
    gen = np.random.default_rng(SEED)
    assert initial.draw(None, gen) != initial.draw(None, gen)


# ---- passage farming ------------------------------------------------------------


def countdown_setup():
    model = CountdownOracle(CountdownParams(4.0, 2.0, 1.0))
    return model, CountdownAtom(), farm.LawInitial(model.initial_sampler())


def test_passage_counts_are_worker_invariant():
    model, refset, initial = countdown_setup()
    kwargs = dict(h=1.0, t_max=50.0, n_samples=3000, master_seed=SEED)
    one = farm.run_passage_counts(model, refset, initial, workers=1, **kwargs)
    few = farm.run_passage_counts(model, refset, initial, workers=3, **kwargs)
    assert np.array_equal(one.chunk_counts, few.chunk_counts)
    assert np.array_equal(one.chunk_sizes, few.chunk_sizes)
    assert np.array_equal(one.curve().p_tilde, few.curve().p_tilde)


def test_passage_counts_default_grid():
    model, refset, initial = countdown_setup()
    counts = farm.run_passage_counts(
        model, refset, initial, h=1.0, t_max=50.0, n_samples=200,
        master_seed=SEED,
    )
    assert np.array_equal(counts.grid, tails.log_grid(1.0, 50.0))
    assert counts.n_total == 200


def test_run_tail_pipeline_fields():
    model, refset, initial = countdown_setup()
    run = farm.run_tail(
        model, refset, initial, h=1.0, t_max=100.0, beta=2.0,
        n_samples=20000, master_seed=SEED,
    )
    assert run.counts.n_total == 20000
    assert run.curve.n_total == 20000
    assert run.fit is not None
    assert 1.6 < run.fit.beta < 2.4
    assert 4.0 < run.gamma.value < 16.0
    assert run.gamma.stabilized is not None


def test_run_tail_without_enough_fittable_points():
    # a grid this short holds a single point: no slope, but gamma still lands
    model, refset, initial = countdown_setup()
    run = farm.run_tail(
        model, refset, initial, h=1.0, t_max=1.05, beta=2.0,
        n_samples=500, master_seed=SEED,
    )
    assert run.fit is None
    assert run.gamma.value > 0.0
