"""Scenario files: JSON with sections array, params, mc, grids and output.

Field units are carried by suffixes: ``_db`` for decibels, ``_m`` for metres
and ``_m2`` for square metres.  Decibel values are converted to linear scale
here and nowhere else.  Any field can be overridden from the environment as
``HOLOISAC_<SECTION>__<FIELD>=<json value>``, e.g.
``HOLOISAC_MC__TRIALS=20000`` or ``HOLOISAC_PARAMS__R_TARGET_M=[0,0,4]``.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional

import numpy as np

from .array import DEFAULT_WAVELENGTH, ArrayConfig
from .channels import ScenarioParams, db_to_lin
from .exceptions import HoloIsacError
from .montecarlo import McConfig

ENV_PREFIX = "HOLOISAC_"

# section -> field -> default (None means "derived from other fields")
SCHEMA = {
    "array": {
        "n_x": 20, "n_y": 20, "d_m": None, "a_elem_m2": None,
        "wavelength_m": DEFAULT_WAVELENGTH, "conventional": False,
    },
    "params": {
        "p_db": 30.0, "p_c_db": 30.0, "p_s_db": 30.0,
        "sigma2_s_db": 0.0, "sigma2_c_db": 0.0, "sigma2_u_db": 0.0,
        "alpha_s_db": 0.0, "alpha0_db": 0.0, "mu_i_gain_db": 0.0,
        "frame_len": 4, "r_target_m": [0.0, 0.0, 3.0], "r_user_m": [1.0, 1.0, 5.0],
        "r0": 12.0, "kappa": 0.5, "iota": 0.5, "varrho": 0.0,
    },
    "mc": {"trials": 100_000, "seed": 42, "workers": 1, "ci_z": 3.0, "block": 10_000},
    "grids": {
        "snr_db": [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0],
        "tau": 41, "kappa": 21, "iota": 21, "epsilon": 41,
        "region_trials": 1000, "sdr_draws": 10_000, "probe_db": [60.0, 70.0],
    },
    "output": {"digits": 12},
}


class ConfigError(ValueError):
    pass


@dataclass
class Grids:
    snr_db: list
    tau: list
    kappa: list
    iota: list
    epsilon: list
    region_trials: int
    sdr_draws: int
    probe_db: list


@dataclass
class ScenarioFile:
    array: ArrayConfig
    params: ScenarioParams
    mc: McConfig
    grids: Grids
    output: dict
    raw: dict = field(default_factory=dict)


def _grid(v, name):
    # an integer means that many evenly spaced points on [0, 1]
    if isinstance(v, bool):
        raise ConfigError(f"grids.{name}: expected a count or a list")
    if isinstance(v, int):
        if v < 2:
            raise ConfigError(f"grids.{name}: need at least 2 points")
        return [float(x) for x in np.linspace(0.0, 1.0, v)]
    if isinstance(v, list) and v:
        return [float(x) for x in v]
    raise ConfigError(f"grids.{name}: expected a count or a non-empty list")


def _env_overrides(env: Mapping[str, str]) -> dict:
    out: dict = {}
    for key in sorted(env):
        if not key.startswith(ENV_PREFIX):
            continue
        rest = key[len(ENV_PREFIX):]
        if "__" not in rest:
            raise ConfigError(f"{key}: expected {ENV_PREFIX}<SECTION>__<FIELD>")
        sec, name = (s.lower() for s in rest.split("__", 1))
        try:
            val = json.loads(env[key])
        except json.JSONDecodeError:
            val = env[key]
        out.setdefault(sec, {})[name] = val
    return out


def merge(doc: dict, overrides: dict) -> dict:
    merged = {k: dict(v) for k, v in doc.items()}
    for sec, vals in overrides.items():
        merged.setdefault(sec, {}).update(vals)
    return merged


def validate_keys(doc: dict) -> None:
    for sec, vals in doc.items():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section {sec!r}; expected one of {sorted(SCHEMA)}")
        if not isinstance(vals, dict):
            raise ConfigError(f"section {sec!r} must be an object")
        for k in vals:
            if k not in SCHEMA[sec]:
                raise ConfigError(f"unknown key {sec}.{k}")


def build(doc: dict) -> ScenarioFile:
    """Turn a (possibly partial) document into typed configuration objects."""
    validate_keys(doc)
    full = {sec: {**defaults, **doc.get(sec, {})} for sec, defaults in SCHEMA.items()}
    a = full["array"]
    try:
        lam = float(a["wavelength_m"])
        if a["conventional"] and doc.get("array", {}).keys() <= {"conventional", "wavelength_m"}:
            arr = ArrayConfig.conventional_baseline(lam)
        else:
            arr = ArrayConfig(n_x=int(a["n_x"]), n_y=int(a["n_y"]),
                              d=lam / 4 if a["d_m"] is None else float(a["d_m"]),
                              a_elem=lam ** 2 / 64 if a["a_elem_m2"] is None else float(a["a_elem_m2"]),
                              wavelength=lam, conventional=bool(a["conventional"]))
        q = full["params"]
        lin = {k[:-3]: float(db_to_lin(v)) for k, v in q.items() if k.endswith("_db")}
        params = ScenarioParams(**lin, frame_len=int(q["frame_len"]),
                                r_target=tuple(q["r_target_m"]), r_user=tuple(q["r_user_m"]),
                                r0=float(q["r0"]), kappa=float(q["kappa"]),
                                iota=float(q["iota"]), varrho=float(q["varrho"]))
        m = full["mc"]
        mc = McConfig(trials=int(m["trials"]), seed=int(m["seed"]), workers=int(m["workers"]),
                      ci_z=float(m["ci_z"]), block=int(m["block"]))
    except (TypeError, ValueError, HoloIsacError) as exc:
        raise ConfigError(str(exc)) from exc
    g = full["grids"]
    grids = Grids(snr_db=[float(x) for x in g["snr_db"]], tau=_grid(g["tau"], "tau"),
                  kappa=_grid(g["kappa"], "kappa"), iota=_grid(g["iota"], "iota"),
                  epsilon=_grid(g["epsilon"], "epsilon"),
                  region_trials=int(g["region_trials"]), sdr_draws=int(g["sdr_draws"]),
                  probe_db=[float(x) for x in g["probe_db"]])
    return ScenarioFile(arr, params, mc, grids, dict(full["output"]), full)


def load(path: Optional[str] = None, env: Optional[Mapping[str, str]] = None,
         seed: Optional[int] = None, workers: Optional[int] = None) -> ScenarioFile:
    """Read a scenario file, apply environment and command-line overrides."""
    doc: dict = {}
    if path:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        if not isinstance(doc, dict):
            raise ConfigError("scenario file must hold a JSON object")
    validate_keys(doc)
    env = os.environ if env is None else env
    doc = merge(doc, _env_overrides(env))
    cli = {}
    if seed is not None:
        cli["seed"] = seed
    if workers is not None:
        cli["workers"] = workers
    if cli:
        doc = merge(doc, {"mc": cli})
    return build(doc)


def with_snr(params: ScenarioParams, snr_db: float, link: str) -> ScenarioParams:
    """Set the transmit power(s) so that power/noise equals ``snr_db``.

    The downlink scales p against sigma_s^2; the uplink scales p_c and p_s
    together against sigma_u^2.
    """
    lin = float(db_to_lin(snr_db))
    if link == "downlink":
        return replace(params, p=lin * params.sigma2_s)
    return replace(params, p_c=lin * params.sigma2_u, p_s=lin * params.sigma2_u)
