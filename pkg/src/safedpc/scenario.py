"""Declarative scenario configs: JSON schema validation, defaults, and
construction of the library objects an experiment needs."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass

import numpy as np

from .barrier import BarrierFunction, CorridorBarrier, GridSpec
from .dpc import LossWeights, TrainingConfig
from .model import (DisturbanceSpec, InputSet, ReferenceTrajectory,
                    SystemDynamics, linear_system, sinusoid_reference)


class ConfigError(ValueError):
    """Malformed scenario config (unknown keys, missing keys, bad values)."""


DEFAULT_CONFIG: dict = {
    "system": {
        "A": 1.0,
        "n_x": 1,
        "input_bounds": [-2.0, 2.0],
        "state_bounds": [-4.0, 4.0],
    },
    "barrier": {
        "epsilon": 0.2,
        "alpha": 0.5,
        "a": 0.03,
        "b": 1e-5,
    },
    "reference": {
        "amplitude": 0.5,
        "frequency": 0.5,
    },
    "disturbance": {
        "kind": "sinusoid",
        "amplitude": 0.3,
        "frequency": 1.0,
        "hold": 0.001,
        "seed": 0,
    },
    "timing": {
        "dt": 0.01,
        "substeps": 10,
        "t_end": 20.0,
    },
    "training": {
        "m": 2000,
        "N": 10,
        "epochs": 400,
        "lr": 1e-3,
        "weights": {
            "q_track": 10.0,
            "q_u": 0.0001,
            "q_state_pen": 1.0,
            "q_input_pen": 1.0,
            "q_barrier_pen": 1.0,
        },
        "d": 0.001,
        "penalty_kind": "relu-squared",
        "reference_mode": "true",
        "seed": 1,
    },
    "run": {
        "mode": "backup-only+filter",
        "output_dir": "out",
    },
}

# section -> key -> required python types
_SCHEMA: dict[str, dict[str, tuple]] = {
    "system": {"A": (int, float, list), "n_x": (int,),
               "input_bounds": (list,), "state_bounds": (list,)},
    "barrier": {"epsilon": (int, float), "alpha": (int, float),
                "a": (int, float), "b": (int, float)},
    "reference": {"amplitude": (int, float), "frequency": (int, float)},
    "disturbance": {"kind": (str,), "amplitude": (int, float),
                    "frequency": (int, float), "hold": (int, float),
                    "seed": (int,)},
    "timing": {"dt": (int, float), "substeps": (int,), "t_end": (int, float)},
    "training": {"m": (int,), "N": (int,), "epochs": (int,),
                 "lr": (int, float), "weights": (dict,), "d": (int, float),
                 "penalty_kind": (str,), "reference_mode": (str,),
                 "seed": (int,)},
    "run": {"mode": (str,), "output_dir": (str,)},
}

_WEIGHT_KEYS = ("q_track", "q_u", "q_state_pen", "q_input_pen", "q_barrier_pen")


def _deep_merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key: {where}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{where} must be an object")
            out[key] = _deep_merge(base[key], val, where)
        else:
            out[key] = val
    return out


def validate_config(cfg: dict) -> None:
    for section, keys in _SCHEMA.items():
        if section not in cfg:
            raise ConfigError(f"missing config section: {section}")
        for key in cfg[section]:
            if key not in keys:
                raise ConfigError(f"unknown config key: {section}.{key}")
        for key, types in keys.items():
            if key not in cfg[section]:
                raise ConfigError(f"missing config key: {section}.{key}")
            if not isinstance(cfg[section][key], types) or \
                    isinstance(cfg[section][key], bool):
                raise ConfigError(
                    f"{section}.{key} has wrong type "
                    f"{type(cfg[section][key]).__name__}")
    for extra in cfg:
        if extra not in _SCHEMA:
            raise ConfigError(f"unknown config section: {extra}")
    for key in cfg["training"]["weights"]:
        if key not in _WEIGHT_KEYS:
            raise ConfigError(f"unknown config key: training.weights.{key}")

    b = cfg["barrier"]
    for name in ("epsilon", "alpha", "a", "b"):
        if b[name] <= 0:
            raise ConfigError(f"barrier.{name} must be positive")
    if b["a"] >= b["epsilon"]:
        raise ConfigError("barrier.a must be smaller than barrier.epsilon")
    t = cfg["timing"]
    if t["dt"] <= 0 or t["t_end"] <= 0 or t["substeps"] < 1:
        raise ConfigError("timing values must be positive")
    if cfg["disturbance"]["kind"] not in ("zero", "sinusoid",
                                          "piecewise-constant-random"):
        raise ConfigError(f"unknown disturbance kind "
                          f"{cfg['disturbance']['kind']!r}")
    lb, ub = cfg["system"]["input_bounds"]
    if not lb < ub:
        raise ConfigError("system.input_bounds must satisfy lower < upper")


def load_config(path: str | None) -> dict:
    """Defaults deep-merged with the (optional) JSON file; strict keys."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        with open(path) as fh:
            try:
                user = json.load(fh)
            except json.JSONDecodeError as err:
                raise ConfigError(f"config is not valid JSON: {err}") from err
        if not isinstance(user, dict):
            raise ConfigError("config root must be a JSON object")
        cfg = _deep_merge(cfg, user)
    validate_config(cfg)
    return cfg


@dataclass(frozen=True)
class Scenario:
    """All library objects one experiment needs, built from a config."""

    config: dict
    sys: SystemDynamics
    input_set: InputSet
    reference: ReferenceTrajectory
    corridor: CorridorBarrier
    barrier: BarrierFunction
    disturbance: DisturbanceSpec
    loss_weights: LossWeights
    training: TrainingConfig
    grid: GridSpec

    @property
    def dt(self) -> float:
        return self.config["timing"]["dt"]

    @property
    def t_end(self) -> float:
        return self.config["timing"]["t_end"]

    @property
    def substeps(self) -> int:
        return self.config["timing"]["substeps"]


def build_scenario(cfg: dict, seed_override: int | None = None) -> Scenario:
    validate_config(cfg)
    if seed_override is not None:
        cfg = copy.deepcopy(cfg)
        seeds = np.random.SeedSequence(seed_override).generate_state(2)
        cfg["training"]["seed"] = int(seeds[0] % (2 ** 31))
        cfg["disturbance"]["seed"] = int(seeds[1] % (2 ** 31))

    s = cfg["system"]
    n_x = s["n_x"]
    sys = linear_system(np.asarray(s["A"], dtype=float) * np.eye(n_x)
                        if np.isscalar(s["A"]) else np.asarray(s["A"], float))
    lb, ub = s["input_bounds"]
    input_set = InputSet(lower=np.full(sys.n_u, float(lb)),
                         upper=np.full(sys.n_u, float(ub)))

    r = cfg["reference"]
    reference = sinusoid_reference(r["amplitude"], r["frequency"], n_x=n_x)

    b = cfg["barrier"]
    corridor = CorridorBarrier(epsilon=float(b["epsilon"]), reference=reference)
    barrier = corridor.barrier(alpha=float(b["alpha"]), a=float(b["a"]),
                               b=float(b["b"]))

    d = cfg["disturbance"]
    disturbance = DisturbanceSpec(kind=d["kind"], n_x=n_x,
                                  amplitude=float(d["amplitude"]),
                                  frequency=float(d["frequency"]),
                                  hold=float(d["hold"]), seed=int(d["seed"]))

    tr = cfg["training"]
    wts = tr["weights"]
    loss_weights = LossWeights(
        q_track=float(wts["q_track"]), q_u=float(wts["q_u"]),
        q_state_pen=float(wts["q_state_pen"]),
        q_input_pen=float(wts["q_input_pen"]),
        q_barrier_pen=float(wts["q_barrier_pen"]),
        d=float(tr["d"]), penalty_kind=tr["penalty_kind"])
    state_lo, state_hi = cfg["system"]["state_bounds"]
    training = TrainingConfig(
        m=tr["m"], N=tr["N"], epochs=tr["epochs"], lr=float(tr["lr"]),
        seed=int(tr["seed"]), init_state_lo=float(state_lo),
        init_state_hi=float(state_hi), reference_mode=tr["reference_mode"])

    return Scenario(config=cfg, sys=sys, input_set=input_set,
                    reference=reference, corridor=corridor, barrier=barrier,
                    disturbance=disturbance, loss_weights=loss_weights,
                    training=training, grid=GridSpec())
