"""Concrete jump-process models and their reference sets."""

from .oracles import (
    ConstantRates,
    CountdownAtom,
    CountdownOracle,
    CountdownParams,
    FlipFlop,
    IntSet,
    countdown_step,
    draw_level,
    gamma_on_grid,
    level_tail,
    return_time_tail,
)
from .rhm import RhmBox, RhmModel, RhmParams, RhmState, sample_injection_energy
from .see import SeeBox, SeeModel, SeeParams

_MODEL_KINDS = {
    "see": (SeeModel, SeeParams),
    "rhm": (RhmModel, RhmParams),
    "countdown": (CountdownOracle, CountdownParams),
}


def model_from_dict(spec):
    """Build a model from its `as_dict` form (e.g. out of a config or an
    ensemble header)."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind not in _MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    model_cls, params_cls = _MODEL_KINDS[kind]
    return model_cls(params_cls(**spec))


__all__ = [
    "ConstantRates",
    "CountdownAtom",
    "CountdownOracle",
    "CountdownParams",
    "FlipFlop",
    "IntSet",
    "RhmBox",
    "RhmModel",
    "RhmParams",
    "RhmState",
    "SeeBox",
    "SeeModel",
    "SeeParams",
    "countdown_step",
    "draw_level",
    "gamma_on_grid",
    "level_tail",
    "model_from_dict",
    "return_time_tail",
    "sample_injection_energy",
]
