"""JSON run configuration: schema validation, defaults and normalisation.

A configuration document is validated against ``config.schema.json`` (shipped
with the package), merged over the defaults of the selected units mode and
turned into domain objects. :meth:`RunConfig.to_dict` returns the normalised
document; parsing it again yields the same document.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Any

import jsonschema

from .estimation import CampaignPlan, NoiseModel, ViolationParams
from .model import (
    SR88_WAVENUMBER,
    Constants,
    InvalidParameterError,
    LaserPulse,
    PulseSequence,
    Species,
    State,
    build_redshift_geometry,
)

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Schema violation; ``path`` is the dotted location of the offending value."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
        self.reason = message


@lru_cache(maxsize=1)
def load_schema() -> dict:
    text = resources.files(__package__).joinpath("config.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def _physical_defaults() -> dict:
    constants = Constants()
    species = Species()
    return {
        "constants": {"units": "physical", "c": constants.c, "hbar": constants.hbar, "g": constants.g},
        "species": {"m": species.m, "Omega": species.Omega},
        "geometry": {"T1": 0.25, "T": 0.5, "k": SR88_WAVENUMBER, "inverted": False, "z0": 0.0, "v0": 0.0},
    }


def _scaled_defaults() -> dict:
    constants = Constants.scaled()
    dm = 1e-6
    return {
        "constants": {"units": "scaled", "c": constants.c, "hbar": constants.hbar, "g": constants.g},
        "species": {"m": 1.0, "Omega": dm * constants.c**2 / constants.hbar},
        "geometry": {"T1": 1.0, "T": 2.0, "k": 1.0, "inverted": False, "z0": 0.0, "v0": 0.0},
    }


_COMMON_DEFAULTS = {
    "violation": {"beta_plus": 0.0, "beta_minus": 0.0},
    "noise": {
        "atom_flux": 1e5,
        "cycle_time": 4.0,
        "vibration_accel": 5e-10,
        "interleaved": True,
        "leakage": 0.0,
        "shot_noise": True,
    },
    "campaign": {
        "T_values": [0.4, 0.6],
        "t_avg": 6e4,
        "t_avg_grid": [4.0, 1e2, 1e3, 1e4, 6e4],
        "seed": 0,
    },
    "sweep": {"parameter": "T", "values": [0.4, 0.6]},
    "oracle": {"dm_fractions": [1e-3, 5e-4, 2.5e-4, 1.25e-4]},
}

_EXPLICIT_DEFAULTS = {"z0": 0.0, "v0": 0.0, "lambda0": -1, "t_end": None}
_PULSE_DEFAULTS = {"phi_upper": 0.0, "phi_lower": 0.0}


def _path_str(parts) -> str:
    return ".".join(str(p) for p in parts)


def validate_document(doc: Any) -> None:
    """Raise :class:`ConfigError` naming the offending path if ``doc`` breaks the schema."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    validator = jsonschema.Draft202012Validator(load_schema())
    error = jsonschema.exceptions.best_match(validator.iter_errors(doc))
    if error is not None:
        raise ConfigError(error.message, _path_str(error.absolute_path))


def _is_explicit(geometry: dict) -> bool:
    return "pulses" in geometry


def normalize(doc: dict) -> dict:
    """Validated document with every default filled in."""
    validate_document(doc)
    units = doc.get("constants", {}).get("units", "physical")
    base = _scaled_defaults() if units == "scaled" else _physical_defaults()
    base.update(copy.deepcopy(_COMMON_DEFAULTS))

    out: dict = {"schema_version": SCHEMA_VERSION}
    for section, defaults in base.items():
        given = doc.get(section, {})
        if section == "geometry" and _is_explicit(given):
            merged = {**_EXPLICIT_DEFAULTS, **copy.deepcopy(given)}
            merged["pulses"] = [{**_PULSE_DEFAULTS, **p} for p in merged["pulses"]]
        else:
            merged = {**defaults, **copy.deepcopy(given)}
        out[section] = merged
    return out


@dataclass(frozen=True)
class CampaignSettings:
    T_values: tuple[float, ...]
    t_avg: float
    t_avg_grid: tuple[float, ...]
    seed: int


@dataclass(frozen=True)
class SweepSettings:
    parameter: str
    values: tuple[float, ...]


@dataclass(frozen=True)
class RunConfig:
    """Fully validated configuration and the normalised document it came from."""

    constants: Constants
    species: Species
    sequence: PulseSequence
    parametric: dict | None
    violation: ViolationParams
    noise: NoiseModel
    campaign: CampaignSettings
    sweep: SweepSettings
    dm_fractions: tuple[float, ...]
    document: dict

    @property
    def units_mode(self) -> str:
        return self.constants.units_mode

    def to_dict(self) -> dict:
        return copy.deepcopy(self.document)

    def require_parametric(self, command: str) -> dict:
        """Parametric geometry fields, or an error for subcommands that need them."""
        if self.parametric is None:
            raise ConfigError(
                f"'{command}' needs the parametric geometry (T1, T, k); an explicit pulse list was given",
                "geometry",
            )
        return self.parametric

    def plan(self, command: str = "campaign") -> CampaignPlan:
        geo = self.require_parametric(command)
        return CampaignPlan(T1=geo["T1"], k=geo["k"], T_values=self.campaign.T_values)


def _sequence(geo: dict) -> PulseSequence:
    if _is_explicit(geo):
        pulses = tuple(
            LaserPulse(
                p["t"], p["k_upper"], p["k_lower"], State(p["lambda_after"]), p["phi_upper"], p["phi_lower"]
            )
            for p in geo["pulses"]
        )
        return PulseSequence(pulses, geo["z0"], geo["v0"], State(geo["lambda0"]), geo["t_end"])
    return build_redshift_geometry(
        geo["T1"], geo["T"], geo["k"], geo["inverted"], z0=geo["z0"], v0=geo["v0"]
    )


def _check_finite(doc: dict, path: tuple = ()) -> None:
    if isinstance(doc, dict):
        for key, val in doc.items():
            _check_finite(val, path + (key,))
    elif isinstance(doc, list):
        for i, val in enumerate(doc):
            _check_finite(val, path + (i,))
    elif isinstance(doc, float) and not math.isfinite(doc):
        raise InvalidParameterError(f"{_path_str(path)} must be finite")


def from_document(doc: dict) -> RunConfig:
    """Build a :class:`RunConfig`; range problems raise :class:`InvalidParameterError`."""
    norm = normalize(doc)
    _check_finite(norm)
    c = norm["constants"]
    constants = Constants(c=c["c"], hbar=c["hbar"], g=c["g"], scaled_units=c["units"] == "scaled")
    species = Species(m=norm["species"]["m"], Omega=norm["species"]["Omega"])
    species.check(constants)
    geo = norm["geometry"]
    sequence = _sequence(geo)
    camp = norm["campaign"]
    if any(t <= 0 for t in camp["T_values"]):
        raise InvalidParameterError("campaign.T_values must be positive")
    if not camp["t_avg"] > 0 or any(t <= 0 for t in camp["t_avg_grid"]):
        raise InvalidParameterError("averaging times must be positive")
    sweep = norm["sweep"]
    if any(val <= 0 for val in sweep["values"]):
        raise InvalidParameterError("sweep.values must be positive")
    fractions = tuple(norm["oracle"]["dm_fractions"])
    if any(not 0 < f < 1 for f in fractions):
        raise InvalidParameterError("oracle.dm_fractions must lie in (0, 1)")
    return RunConfig(
        constants=constants,
        species=species,
        sequence=sequence,
        parametric=None if _is_explicit(geo) else dict(geo),
        violation=ViolationParams(**norm["violation"]),
        noise=NoiseModel(**norm["noise"]),
        campaign=CampaignSettings(
            tuple(camp["T_values"]), camp["t_avg"], tuple(camp["t_avg_grid"]), camp["seed"]
        ),
        sweep=SweepSettings(sweep["parameter"], tuple(sweep["values"])),
        dm_fractions=fractions,
        document=norm,
    )


def parse_config(text: str) -> RunConfig:
    """Parse a JSON document into a :class:`RunConfig`."""
    try:
        doc = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} at line {exc.lineno}") from None
    return from_document(doc)


def apply_override(doc: dict, assignment: str) -> dict:
    """Apply one ``dotted.path=value`` override; ``value`` is read as JSON when possible."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not of the form path=value")
    path, raw = assignment.split("=", 1)
    keys = [k for k in path.strip().split(".") if k]
    if not keys:
        raise ConfigError(f"override {assignment!r} has an empty path")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    out = copy.deepcopy(doc)
    node = out
    for key in keys[:-1]:
        child = node.setdefault(key, {})
        if not isinstance(child, dict):
            raise ConfigError("cannot descend into a non-object value", path)
        node = child
    node[keys[-1]] = value
    return out
