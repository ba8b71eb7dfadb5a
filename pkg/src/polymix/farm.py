"""Trajectory farm: chunked, stream-indexed parallel sampling.

Work is split into fixed-size chunks of consecutive samples; the stream id of
a sample is its global index, so every trajectory is pinned to one counter-
based stream no matter how chunks land on workers.  Chunk results are small
pure reductions (integer counts, float sums) merged in chunk order, which
makes every downstream number independent of the worker count.

Workers are forked, so the parent warms the jit kernels once and children
inherit the compiled code; the job object itself is shared through a module
global rather than pickled (runner closures are not picklable).
"""

import os
from dataclasses import dataclass
from multiprocessing import get_context

import numpy as np

from . import rng as rng_mod
from .engine import first_passage
from .tails import (
    DEFAULT_M_MIN,
    DEFAULT_POINTS_PER_DECADE,
    DEFAULT_Z,
    TailCounts,
    fit_slope,
    fit_window,
    gamma_estimate,
    log_grid,
)

DEFAULT_CHUNK = 4096
MIN_CHUNKS = 40  # aim for at least this many chunks so batch means resolve


def resolve_workers(workers=None):
    """Explicit argument, else POLYMIX_WORKERS, else 1."""
    if workers is None:
        env = os.environ.get("POLYMIX_WORKERS", "").strip()
        workers = int(env) if env else 1
    workers = int(workers)
    if workers < 1:
        raise ValueError("workers must be >= 1")
    return workers


def chunk_layout(n_samples, chunk_size=None):
    """(chunk_index, first_sample, size) triples; a function of n_samples only."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if chunk_size is None:
        chunk_size = max(1, min(DEFAULT_CHUNK, n_samples // MIN_CHUNKS or 1))
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")
    starts = range(0, n_samples, chunk_size)
    return [
        (i, start, min(chunk_size, n_samples - start))
        for i, start in enumerate(starts)
    ]


_JOB = None  # set in the parent right before forking; inherited by workers


def _run_chunk(task):
    chunk_index, start, size = task
    return _JOB.run_chunk(chunk_index, start, size)


def run_chunks(job, n_samples, workers=None, chunk_size=None):
    """Map job.run_chunk over the chunk layout; results in chunk order."""
    global _JOB
    workers = resolve_workers(workers)
    layout = chunk_layout(n_samples, chunk_size)
    job.warm_up()
    if workers == 1 or len(layout) == 1:
        return [job.run_chunk(*task) for task in layout]
    _JOB = job
    try:
        ctx = get_context("fork")
        with ctx.Pool(min(workers, len(layout))) as pool:
            results = pool.map(_run_chunk, layout)
    finally:
        _JOB = None
    return results


# ---- initial-state sources ---------------------------------------------------


class FixedInitial:
    """Every sample starts from the same state."""

    def __init__(self, state):
        self.state = state

    def draw(self, model, rng):
        return model.copy_state(self.state)


class EnsembleInitial:
    """Samples start from a stored ensemble, resampled with replacement."""

    def __init__(self, states):
        self.states = list(states)
        if not self.states:
            raise ValueError("empty ensemble")

    def draw(self, model, rng):
        return self.states[int(rng.integers(len(self.states)))]


class LawInitial:
    """Samples start from fresh draws of a law(rng) callable."""

    def __init__(self, law):
        self.law = law

    def draw(self, model, rng):
        return self.law(rng)


# ---- first-passage counting job ----------------------------------------------


class PassageJob:
    """Tail counts of tau over a time grid, one stream per sample.

    run_chunk returns (counts, size) with counts[k] = #{tau > grid[k]} within
    the chunk; censored trajectories exceed every grid point.
    """

    def __init__(self, model, refset, initial, h, t_max, grid, master_seed,
                 sub=0):
        self.model = model
        self.refset = refset
        self.initial = initial
        self.h = float(h)
        self.t_max = float(t_max)
        self.grid = np.asarray(grid, dtype=np.float64)
        self.master_seed = int(master_seed)
        self.sub = int(sub)
        self._runner = None

    def _get_runner(self):
        if self._runner is None:
            fast = self.model.passage_runner(self.refset, self.h, self.t_max)
            if fast is None:
                def fast(state, gen):
                    return first_passage(
                        state, self.model, self.refset, self.h, self.t_max, gen
                    )
            self._runner = fast
        return self._runner

    def warm_up(self):
        """Compile the model's kernels on a short throwaway trajectory."""
        runner = self.model.passage_runner(self.refset, self.h, 2.0 * self.h)
        if runner is None:
            return
        gen = rng_mod.stream(self.master_seed, 0, rng_mod.PHASE_GENERIC)
        runner(self.initial.draw(self.model, gen), gen)

    def run_chunk(self, chunk_index, start, size):
        runner = self._get_runner()
        counts = np.zeros(len(self.grid), dtype=np.int64)
        for j in range(size):
            gen = rng_mod.stream(
                self.master_seed, start + j, rng_mod.PHASE_PASSAGE, self.sub
            )
            state = self.initial.draw(self.model, gen)
            out = runner(state, gen)
            if out.hit:
                counts[: np.searchsorted(self.grid, out.time, "left")] += 1
            else:
                counts += 1
        return counts, size


def run_passage_counts(model, refset, initial, h, t_max, n_samples,
                       master_seed, grid=None, workers=None, chunk_size=None,
                       sub=0, z=DEFAULT_Z,
                       points_per_decade=DEFAULT_POINTS_PER_DECADE):
    """Farmed first-passage tail counts as a TailCounts."""
    if grid is None:
        grid = log_grid(h, t_max, points_per_decade)
    job = PassageJob(model, refset, initial, h, t_max, grid, master_seed, sub)
    results = run_chunks(job, n_samples, workers, chunk_size)
    rows = np.stack([counts for counts, _ in results])
    sizes = np.array([size for _, size in results], dtype=np.int64)
    return TailCounts(np.asarray(grid, dtype=np.float64), rows, sizes, z)


@dataclass(frozen=True)
class TailRun:
    """Counts plus the derived curve, slope fit, and gamma estimate.

    fit is None when the curve has too few fittable points for a slope.
    """

    counts: TailCounts
    curve: object
    fit: object
    gamma: object


def run_tail(model, refset, initial, h, t_max, beta, n_samples, master_seed,
             workers=None, chunk_size=None, sub=0, z=DEFAULT_Z,
             m_min=DEFAULT_M_MIN, points_per_decade=DEFAULT_POINTS_PER_DECADE,
             rel_change=0.05, n_batches=10):
    """Full tail pipeline: sample, estimate, fit the slope, take gamma."""
    counts = run_passage_counts(
        model, refset, initial, h, t_max, n_samples, master_seed,
        workers=workers, chunk_size=chunk_size, sub=sub, z=z,
        points_per_decade=points_per_decade,
    )
    curve = counts.curve()
    try:
        fit = fit_slope(curve, fit_window(curve, m_min))
    except ValueError:
        fit = None
    gamma = gamma_estimate(counts, beta, h, m_min, rel_change, n_batches)
    return TailRun(counts=counts, curve=curve, fit=fit, gamma=gamma)
