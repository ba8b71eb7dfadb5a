"""Numerical invariant measure and observable diagnostics.

The steady state is approximated by an ensemble: many independent
trajectories run from a convenient initial law for a fixed burn time, keeping
the endpoints.  Tail experiments then resample initial states from the
ensemble with replacement (double sampling: ensemble noise plus trajectory
noise; the ensemble is the numerical stand-in for the invariant measure, and
return times from it may differ from the true stationary ones).  Whether the
burn time suffices is checked by the stabilization series, and correlation
decay is estimated at short horizons by paired sampling from the ensemble.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from . import farm
from . import rng as rng_mod
from .engine import evolve_series, evolve_until
from .models import model_from_dict

ENSEMBLE_HEADER = "# polymix ensemble v1"


@dataclass(frozen=True)
class Ensemble:
    """Endpoint states of independent burned-in trajectories.

    params is the model spec (including "kind"); states are decoded model
    states in sample order.
    """

    params: dict
    burn_time: float
    master_seed: int
    states: tuple

    def model(self):
        return model_from_dict(dict(self.params))

    def __len__(self):
        return len(self.states)


def write_ensemble(ensemble, path):
    """Versioned text format: header, one JSON metadata line, one state per
    line in the model's encoding."""
    model = ensemble.model()
    meta = {
        "model": ensemble.params,
        "burn_time": ensemble.burn_time,
        "master_seed": ensemble.master_seed,
        "count": len(ensemble.states),
    }
    with open(path, "w") as fh:
        fh.write(ENSEMBLE_HEADER + "\n")
        fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        for state in ensemble.states:
            fh.write(model.encode_state(state) + "\n")


def read_ensemble(path):
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        if header != ENSEMBLE_HEADER:
            raise ValueError(f"not an ensemble file: {header!r}")
        meta = json.loads(fh.readline().lstrip("# "))
        model = model_from_dict(dict(meta["model"]))
        states = [model.decode_state(line.rstrip("\n")) for line in fh if line.strip()]
    if len(states) != meta["count"]:
        raise ValueError(
            f"state count {len(states)} != recorded {meta['count']}"
        )
    return Ensemble(
        params=meta["model"],
        burn_time=float(meta["burn_time"]),
        master_seed=int(meta["master_seed"]),
        states=tuple(states),
    )


class BurnJob:
    """Farm job: endpoint of one burn trajectory per stream."""

    def __init__(self, model, sampler, burn_time, master_seed, sub=0):
        self.model = model
        self.sampler = sampler
        self.burn_time = float(burn_time)
        self.master_seed = int(master_seed)
        self.sub = int(sub)
        self._runner = None

    def _get_runner(self):
        if self._runner is None:
            fast = self.model.evolve_runner(self.burn_time)
            if fast is None:
                def fast(state, gen):
                    return evolve_until(
                        state, self.model, self.burn_time, gen, copy=False
                    ).state
            self._runner = fast
        return self._runner

    def warm_up(self):
        runner = self.model.evolve_runner(1e-9)
        if runner is None:
            return
        gen = rng_mod.stream(self.master_seed, 0, rng_mod.PHASE_GENERIC)
        runner(self.sampler(gen), gen)

    def run_chunk(self, chunk_index, start, size):
        runner = self._get_runner()
        out = []
        for j in range(size):
            gen = rng_mod.stream(
                self.master_seed, start + j, rng_mod.PHASE_BURN, self.sub
            )
            state = self.model.copy_state(self.sampler(gen))
            out.append(self.model.compact_state(runner(state, gen)))
        return out


def burn_in(model, initial_sampler, burn_time, ensemble_size, master_seed,
            workers=None, sub=0):
    """Ensemble of independent endpoints after burn_time.

    initial_sampler: law(rng) -> state, or None for the model's default
    initial law.
    """
    if not burn_time > 0.0:
        raise ValueError("burn_time must be positive")
    if ensemble_size < 1:
        raise ValueError("ensemble_size must be >= 1")
    sampler = initial_sampler or model.initial_sampler()
    job = BurnJob(model, sampler, burn_time, master_seed, sub)
    chunks = farm.run_chunks(job, ensemble_size, workers)
    states = tuple(state for chunk in chunks for state in chunk)
    return Ensemble(
        params=model.as_dict(),
        burn_time=float(burn_time),
        master_seed=int(master_seed),
        states=states,
    )


# ---- observable series --------------------------------------------------------


@dataclass(frozen=True)
class ObservableSeries:
    """Means of an observable on a time grid with 1.96 * M^-1/2 * sd bars."""

    times: np.ndarray
    means: np.ndarray
    stderrs: np.ndarray

    def __post_init__(self):
        if not (len(self.times) == len(self.means) == len(self.stderrs)):
            raise ValueError("times, means, stderrs must share a length")
        if np.any(self.stderrs < 0.0):
            raise ValueError("stderrs must be >= 0")

    def flat_tail(self):
        """Do the last two grid means agree within 2 combined stderrs?

        Equality counts as agreement, so an exactly constant noise-free
        series is flat.
        """
        if len(self.times) < 2:
            raise ValueError("need at least 2 grid times")
        gap = abs(self.means[-1] - self.means[-2])
        return bool(gap <= 2.0 * math.hypot(self.stderrs[-1], self.stderrs[-2]))


@dataclass(frozen=True)
class ObservableSpec:
    """Named bounded function of the model's channel vector."""

    name: str
    fn: object = None

    @classmethod
    def resolve(cls, model, spec):
        if isinstance(spec, cls):
            if spec.fn is not None:
                return spec
            spec = spec.name
        return cls(name=spec, fn=model.observable(spec))


def _series_runner(model, times):
    fast = model.series_runner(times)
    if fast is None:
        def fast(state, gen):
            return evolve_series(state, model, times, gen)
    return fast


class SeriesJob:
    """Farm job: per-time sums and squared sums of one observable."""

    def __init__(self, model, sampler, observable, times, master_seed, sub=0):
        self.model = model
        self.sampler = sampler
        self.obs = observable
        self.times = np.asarray(times, dtype=np.float64)
        self.master_seed = int(master_seed)
        self.sub = int(sub)
        self._runner = None

    def _get_runner(self):
        if self._runner is None:
            self._runner = _series_runner(self.model, self.times)
        return self._runner

    def warm_up(self):
        runner = self.model.series_runner(self.times[:1])
        if runner is None:
            return
        gen = rng_mod.stream(self.master_seed, 0, rng_mod.PHASE_GENERIC)
        runner(self.model.copy_state(self.sampler(gen)), gen)

    def run_chunk(self, chunk_index, start, size):
        runner = self._get_runner()
        total = np.zeros(len(self.times))
        total_sq = np.zeros(len(self.times))
        for j in range(size):
            gen = rng_mod.stream(
                self.master_seed, start + j, rng_mod.PHASE_SERIES, self.sub
            )
            state = self.model.copy_state(self.sampler(gen))
            vals = self.obs.fn(runner(state, gen))
            total += vals
            total_sq += vals * vals
        return total, total_sq, size


def stabilization_series(model, initial_sampler, observable, times, m_samples,
                         master_seed, workers=None, sub=0):
    """Monte Carlo mean of the observable at each grid time over m_samples
    independent trajectories from the initial law."""
    if m_samples < 2:
        raise ValueError("m_samples must be >= 2")
    times = np.asarray(times, dtype=np.float64)
    if len(times) == 0 or np.any(np.diff(times) <= 0.0) or times[0] < 0.0:
        raise ValueError("times must be strictly increasing and >= 0")
    sampler = initial_sampler or model.initial_sampler()
    obs = ObservableSpec.resolve(model, observable)
    job = SeriesJob(model, sampler, obs, times, master_seed, sub)
    chunks = farm.run_chunks(job, m_samples, workers)
    total = np.zeros(len(times))
    total_sq = np.zeros(len(times))
    m = 0
    for t, tsq, size in chunks:
        total += t
        total_sq += tsq
        m += size
    means = total / m
    var = np.maximum(total_sq - m * means**2, 0.0) / (m - 1)
    stderrs = 1.96 * np.sqrt(var / m)
    return ObservableSeries(times=times, means=means, stderrs=stderrs)


# ---- correlation decay ---------------------------------------------------------


class CorrelationJob:
    """Farm job: paired sums for C(t) = E[xi(X0) eta(Xt)] - E[xi] E[eta]."""

    def __init__(self, model, states, xi, eta, times, master_seed, sub=0):
        self.model = model
        self.states = states
        self.xi = xi
        self.eta = eta
        self.times = np.asarray(times, dtype=np.float64)
        self.master_seed = int(master_seed)
        self.sub = int(sub)
        self._runner = None

    def _get_runner(self):
        if self._runner is None:
            self._runner = _series_runner(self.model, self.times)
        return self._runner

    def warm_up(self):
        runner = self.model.series_runner(self.times[:1])
        if runner is None:
            return
        gen = rng_mod.stream(self.master_seed, 0, rng_mod.PHASE_GENERIC)
        runner(self.model.copy_state(self.states[0]), gen)

    def run_chunk(self, chunk_index, start, size):
        runner = self._get_runner()
        k = len(self.times)
        sum_xi = 0.0
        sum_eta = np.zeros(k)
        sum_prod = np.zeros(k)
        for j in range(size):
            gen = rng_mod.stream(
                self.master_seed, start + j, rng_mod.PHASE_CORRELATION, self.sub
            )
            state = self.states[int(gen.integers(len(self.states)))]
            xi0 = float(self.xi.fn(self.model.state_channels(state)))
            etas = self.eta.fn(runner(self.model.copy_state(state), gen))
            sum_xi += xi0
            sum_eta += etas
            sum_prod += xi0 * etas
        return sum_xi, sum_eta, sum_prod, size


def correlation_decay(model, ensemble, xi, eta, times, m_samples, master_seed,
                      workers=None, sub=0, n_batches=10, max_time=50.0):
    """|C(t)| on the grid with batch-means stderrs.

    Initial states are drawn from the ensemble with replacement; xi is read
    off the initial state and eta along the trajectory.  The estimate per
    batch is mean(xi * eta) - mean(xi) * mean(eta); the reported stderr is the
    spread of the batch estimates scaled by 1.96 / sqrt(n_batches).

    The grid is capped at max_time (None disables).  Long-horizon decay
    curves need ensemble sizes this estimator is not built for; the cap keeps
    accidental week-long runs from slipping through.
    """
    if m_samples < 2:
        raise ValueError("m_samples must be >= 2")
    if not len(ensemble.states):
        raise ValueError("empty ensemble")
    times = np.asarray(times, dtype=np.float64)
    if max_time is not None and times.size and times[-1] > max_time:
        raise ValueError(
            f"times: grid runs past t = {max_time:g}"
            " (raise max_time to override)"
        )
    xi = ObservableSpec.resolve(model, xi)
    eta = ObservableSpec.resolve(model, eta)
    job = CorrelationJob(
        model, ensemble.states, xi, eta, times, master_seed, sub
    )
    chunks = farm.run_chunks(job, m_samples, workers)
    sum_xi = 0.0
    sum_eta = np.zeros(len(times))
    sum_prod = np.zeros(len(times))
    m = 0
    for sx, se, sp, size in chunks:
        sum_xi += sx
        sum_eta += se
        sum_prod += sp
        m += size
    c_full = sum_prod / m - (sum_xi / m) * (sum_eta / m)
    batch_c = []
    for part in np.array_split(np.arange(len(chunks)), n_batches):
        if len(part) == 0:
            continue
        sx = sum(chunks[i][0] for i in part)
        se = sum(chunks[i][1] for i in part)
        sp = sum(chunks[i][2] for i in part)
        mb = sum(chunks[i][3] for i in part)
        batch_c.append(sp / mb - (sx / mb) * (se / mb))
    if len(batch_c) >= 2:
        spread = np.std(np.stack(batch_c), axis=0, ddof=1)
        stderrs = 1.96 * spread / math.sqrt(len(batch_c))
    else:
        stderrs = np.zeros(len(times))
    return ObservableSeries(
        times=times, means=np.abs(c_full), stderrs=stderrs
    )


def ensemble_covariance(model, ensemble, xi, eta):
    """Direct Cov(xi, eta) over the ensemble states; cross-check for C(0)."""
    xi = ObservableSpec.resolve(model, xi)
    eta = ObservableSpec.resolve(model, eta)
    xs = np.array(
        [float(xi.fn(model.state_channels(s))) for s in ensemble.states]
    )
    ys = np.array(
        [float(eta.fn(model.state_channels(s))) for s in ensemble.states]
    )
    return float(np.mean(xs * ys) - xs.mean() * ys.mean())
