"""Experiment configs: JSON with a packaged schema plus semantic validation.

Validation aggregates every violation (schema errors first, then range and
cross-field checks), with each message naming the offending field.  A parsed
config is a normalized dict with documented defaults filled in; builders turn
its blocks into model, refset, and initial-state objects.
"""

import json
from dataclasses import dataclass
from importlib import resources

import jsonschema
import numpy as np

from . import couplab, farm
from .models import IntSet, RhmBox, SeeBox, model_from_dict

_COMMON = {"kind", "master_seed", "workers", "out"}
_TAIL = {
    "model", "refset", "h", "t_max", "points_per_decade", "beta",
    "n_samples", "m_min", "n_batches", "chunk_size", "rel_change", "initial",
}
KIND_FIELDS = {
    # kind -> (required, optional beyond _COMMON)
    "tail": ({"model", "refset", "h", "t_max", "n_samples"}, _TAIL),
    "sweep": (
        {"model", "refset", "h", "t_max", "n_samples", "coordinate",
         "values", "base_state"},
        _TAIL | {"coordinate", "values", "base_state", "require_in_refset"},
    ),
    "grid-scan": (
        {"model", "refset", "h", "t_max", "n_samples", "lattice"},
        _TAIL | {"lattice"},
    ),
    "confirm": (
        {"model", "refset", "h", "t_max", "n_samples", "candidate"},
        _TAIL | {"candidate"},
    ),
    "burn-in": (
        {"model", "burn_time", "ensemble_size"},
        {"model", "burn_time", "ensemble_size", "chunk_size"},
    ),
    "stabilization": (
        {"model", "observable", "times", "m_samples"},
        {"model", "observable", "times", "m_samples", "chunk_size"},
    ),
    "correlation": (
        {"model", "ensemble", "xi", "eta", "times", "m_samples"},
        {"model", "ensemble", "xi", "eta", "times", "m_samples",
         "chunk_size", "n_batches", "max_time"},
    ),
    "couplab": (
        {"mu", "nu", "n_max", "n_samples"},
        {"chain", "chain_path", "mu", "nu", "n_max", "n_samples",
         "chunk_size"},
    ),
}

DEFAULTS = {
    "points_per_decade": 40,
    "beta": 2.0,
    "m_min": 100,
    "n_batches": 10,
    "rel_change": 0.05,
    "require_in_refset": True,
    "initial": {"kind": "law"},
    "max_time": 50.0,
}

_MODEL_FIELDS = {
    "see": {"n_sites": "int", "t_left": "pos", "t_right": "pos"},
    "rhm": {
        "n_sites": "int", "t_left": "pos", "t_right": "pos",
        "rho_left": "pos", "rho_right": "pos", "mix_ratio": "pos",
        "rate_scale": "pos",
    },
    "countdown": {"tail_c": "pos", "tail_beta": "pos", "holding": "pos"},
}


class ConfigError(Exception):
    """Raised with the aggregated list of validation messages."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    master_seed: int
    workers: object  # None defers to the CLI / environment
    out: object
    data: dict

    def get(self, key, default=None):
        return self.data.get(key, default)

    def __getitem__(self, key):
        return self.data[key]


def load_schema():
    ref = resources.files("polymix") / "schema" / "experiment.schema.json"
    return json.loads(ref.read_text())


def _check_model(model, errors):
    kind = model.get("kind")
    if kind not in _MODEL_FIELDS:
        errors.append(f"model.kind: unknown model {kind!r}")
        return
    fields = _MODEL_FIELDS[kind]
    for key, value in model.items():
        if key == "kind":
            continue
        if key not in fields:
            errors.append(f"model.{key}: unknown key for model {kind!r}")
            continue
        if fields[key] == "int":
            if not isinstance(value, int) or value < 1:
                errors.append(f"model.{key}: must be an integer >= 1")
        elif not isinstance(value, (int, float)) or not value > 0:
            errors.append(f"model.{key}: must be > 0")
    if kind == "countdown" and isinstance(model.get("tail_beta"), (int, float)):
        if not model["tail_beta"] > 1.0:
            errors.append("model.tail_beta: must be > 1")


def _check_refset(refset, model_kind, errors):
    allowed = {
        "see": {"lo", "hi"},
        "rhm": {"k_max", "s_max", "x_lo", "x_hi"},
        "countdown": {"levels"},
        None: set(),
    }.get(model_kind, set())
    for key in refset:
        if key not in allowed:
            errors.append(f"refset.{key}: unknown key for model {model_kind!r}")
    if model_kind == "see":
        lo, hi = refset.get("lo"), refset.get("hi")
        if not (isinstance(lo, (int, float)) and lo > 0):
            errors.append("refset.lo: must be > 0")
        if not (isinstance(hi, (int, float)) and hi > 0):
            errors.append("refset.hi: must be > 0")
        if isinstance(lo, (int, float)) and isinstance(hi, (int, float)):
            if lo > hi:
                errors.append("refset.lo: exceeds refset.hi")
    elif model_kind == "rhm":
        for key in ("k_max", "s_max", "x_lo", "x_hi"):
            if key not in refset:
                errors.append(f"refset.{key}: required for rhm")
        if all(isinstance(refset.get(k), (int, float))
               for k in ("x_lo", "x_hi")):
            if refset["x_lo"] > refset["x_hi"]:
                errors.append("refset.x_lo: exceeds refset.x_hi")
    elif model_kind == "countdown":
        levels = refset.get("levels")
        if (
            not isinstance(levels, list)
            or not levels
            or not all(isinstance(v, int) and v >= 0 for v in levels)
        ):
            errors.append("refset.levels: must be a nonempty list of ints >= 0")


def _check_initial(initial, errors):
    kind = initial.get("kind")
    if kind not in ("law", "ensemble", "state"):
        errors.append("initial.kind: must be law, ensemble, or state")
        return
    if kind == "ensemble" and not isinstance(initial.get("path"), str):
        errors.append("initial.path: required for ensemble initial")
    if kind == "state" and not isinstance(initial.get("state"), str):
        errors.append("initial.state: required for state initial")
    for key in initial:
        if key not in {"kind", "path", "state"}:
            errors.append(f"initial.{key}: unknown key")


def _check_times(times, errors):
    if isinstance(times, list):
        arr = np.asarray(times, dtype=np.float64)
        if np.any(arr < 0.0) or np.any(np.diff(arr) <= 0.0):
            errors.append("times: must be nonnegative and strictly increasing")
        return
    for key in times:
        if key not in {"start", "stop", "num", "spacing"}:
            errors.append(f"times.{key}: unknown key")
    spacing = times.get("spacing", "linear")
    if spacing not in ("linear", "log"):
        errors.append("times.spacing: must be linear or log")
    start, stop, num = times.get("start"), times.get("stop"), times.get("num")
    if not isinstance(num, int) or num < 2:
        errors.append("times.num: must be an integer >= 2")
    if not isinstance(start, (int, float)) or start < 0:
        errors.append("times.start: must be >= 0")
    if spacing == "log" and isinstance(start, (int, float)) and start <= 0:
        errors.append("times.start: must be > 0 for log spacing")
    if (
        isinstance(start, (int, float))
        and isinstance(stop, (int, float))
        and not stop > start
    ):
        errors.append("times.stop: must exceed times.start")


def _check_lattice(lattice, model_kind, errors):
    keys = set(lattice)
    if keys == {"per_axis"}:
        if model_kind != "see":
            errors.append("lattice.per_axis: only defined for the see model")
        elif not isinstance(lattice["per_axis"], int) or lattice["per_axis"] < 2:
            errors.append("lattice.per_axis: must be an integer >= 2")
    elif keys == {"s_values", "k_values", "x_values"}:
        if model_kind != "rhm":
            errors.append("lattice.s_values: only defined for the rhm model")
        else:
            for key in keys:
                vals = lattice[key]
                if not isinstance(vals, list) or not vals:
                    errors.append(f"lattice.{key}: must be a nonempty list")
            kv = lattice.get("k_values")
            if isinstance(kv, list) and not all(
                isinstance(v, int) and v >= 0 for v in kv
            ):
                errors.append("lattice.k_values: entries must be ints >= 0")
    elif keys == {"states"}:
        if not isinstance(lattice["states"], list) or not lattice["states"]:
            errors.append("lattice.states: must be a nonempty list")
    else:
        errors.append(
            "lattice: expected per_axis, (s_values,k_values,x_values), or states"
        )


def validate_config(text):
    """Parse and validate raw JSON; raises ConfigError with every violation."""
    errors = []
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError([f"invalid JSON: {err}"]) from None
    validator = jsonschema.Draft202012Validator(load_schema())
    for err in sorted(validator.iter_errors(raw), key=lambda e: list(e.path)):
        where = ".".join(str(p) for p in err.path) or "config"
        errors.append(f"{where}: {err.message}")
    if errors:
        raise ConfigError(errors)

    kind = raw["kind"]
    required, optional = KIND_FIELDS[kind]
    allowed = _COMMON | optional
    for key in raw:
        if key not in allowed:
            errors.append(f"{key}: not a field of kind {kind!r}")
    for key in required:
        if key not in raw:
            errors.append(f"{key}: required for kind {kind!r}")

    data = dict(raw)
    for key, value in DEFAULTS.items():
        if key in allowed:
            data.setdefault(key, value)

    model_kind = None
    if "model" in data and isinstance(data["model"], dict):
        _check_model(data["model"], errors)
        model_kind = data["model"].get("kind")
    if "refset" in data and isinstance(data["refset"], dict):
        _check_refset(data["refset"], model_kind, errors)
    if "initial" in data and isinstance(data["initial"], dict):
        _check_initial(data["initial"], errors)
    if "times" in data:
        _check_times(data["times"], errors)
    if "lattice" in data and isinstance(data["lattice"], dict):
        _check_lattice(data["lattice"], model_kind, errors)
    if "h" in data and "t_max" in data and data["t_max"] <= data["h"]:
        errors.append("t_max: must exceed h")
    if kind == "correlation" and "times" in data:
        spec = data["times"]
        stop = max(spec) if isinstance(spec, list) else spec.get("stop")
        cap = data["max_time"]
        if isinstance(stop, (int, float)) and stop > cap:
            errors.append(
                f"times: correlation grid runs past t = {cap:g}"
                " (raise max_time to override)"
            )
    if kind == "couplab":
        if ("chain" in data) == ("chain_path" in data):
            errors.append("chain: supply exactly one of chain or chain_path")
        elif "chain" in data:
            try:
                couplab.chain_from_json(json.dumps(data["chain"]))
            except (ValueError, KeyError) as err:
                errors.append(f"chain: {err}")

    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(
        kind=kind,
        master_seed=int(data["master_seed"]),
        workers=data.get("workers"),
        out=data.get("out"),
        data=data,
    )


# ---- builders -----------------------------------------------------------------


def build_model(config):
    return model_from_dict(dict(config["model"]))


def build_refset(config, model):
    refset = config["refset"]
    if model.name == "see":
        return SeeBox(refset["lo"], refset["hi"], model.params.n_sites)
    if model.name == "rhm":
        return RhmBox(refset["k_max"], refset["s_max"], refset["x_lo"],
                      refset["x_hi"])
    return IntSet(refset["levels"])


def build_initial(config, model):
    spec = config.get("initial", {"kind": "law"})
    if spec["kind"] == "law":
        return farm.LawInitial(model.initial_sampler())
    if spec["kind"] == "state":
        return farm.FixedInitial(model.decode_state(spec["state"]))
    from .stationary import read_ensemble

    ensemble = read_ensemble(spec["path"])
    if ensemble.params != model.as_dict():
        raise ValueError("ensemble was built for different model parameters")
    return farm.EnsembleInitial(ensemble.states)


def build_times(spec):
    if isinstance(spec, list):
        return np.asarray(spec, dtype=np.float64)
    num = spec["num"]
    if spec.get("spacing", "linear") == "log":
        return np.geomspace(spec["start"], spec["stop"], num)
    return np.linspace(spec["start"], spec["stop"], num)
