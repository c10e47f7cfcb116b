"""Versioned pass/fail tolerances and per-command parameter schemas."""
from __future__ import annotations

import logging
from typing import Any, Mapping, Optional

import dacite
import voluptuous as vol

from .const import ALPHA_BAND, DEFAULT_SEED, DEFAULT_WORKERS, MC_EXPERIMENTS, MIN_MC_PATHS
from .DTO.TolerancesDTO import TolerancesDTO

_LOGGER = logging.getLogger(__name__)

TOLERANCES_VERSION = 1

DEFAULT_TOLERANCES: dict[str, Any] = {
    "version": TOLERANCES_VERSION,
    "standard_errors": 3.0,
    "ks_occupation0": 0.05,
    "ks_occupation2": 0.10,
    "tail_exponent": 0.05,
    "relative_gamma_star": 0.005,
    "relative_gamma_bullet": 0.01,
    "relative_gamma_circ": 0.01,
}

_positive = vol.All(vol.Coerce(float), vol.Range(min=0, min_included=False))

TOLERANCE_SCHEMA = vol.Schema({
    vol.Required("version", default=TOLERANCES_VERSION): vol.All(vol.Coerce(int), vol.In([TOLERANCES_VERSION])),
    vol.Required("standard_errors", default=DEFAULT_TOLERANCES["standard_errors"]): _positive,
    vol.Required("ks_occupation0", default=DEFAULT_TOLERANCES["ks_occupation0"]): _positive,
    vol.Required("ks_occupation2", default=DEFAULT_TOLERANCES["ks_occupation2"]): _positive,
    vol.Required("tail_exponent", default=DEFAULT_TOLERANCES["tail_exponent"]): _positive,
    vol.Required("relative_gamma_star", default=DEFAULT_TOLERANCES["relative_gamma_star"]): _positive,
    vol.Required("relative_gamma_bullet", default=DEFAULT_TOLERANCES["relative_gamma_bullet"]): _positive,
    vol.Required("relative_gamma_circ", default=DEFAULT_TOLERANCES["relative_gamma_circ"]): _positive,
})

_alpha = vol.All(vol.Coerce(float), vol.Range(min=ALPHA_BAND[0], max=ALPHA_BAND[1]))
_unit_open = vol.All(vol.Coerce(float), vol.Range(min=0, max=1, min_included=False, max_included=False))

RATE_TABLE_SCHEMA = vol.Schema({
    vol.Required("alpha_min", default=0.05): _alpha,
    vol.Required("alpha_max", default=0.85): _alpha,
    vol.Required("n", default=161): vol.All(vol.Coerce(int), vol.Range(min=3)),
    vol.Required("workers", default=DEFAULT_WORKERS): vol.All(vol.Coerce(int), vol.Range(min=1)),
})

TAIL_SCHEMA = vol.Schema({
    vol.Optional("alpha"): vol.Any(None, _alpha),
    vol.Required("eps_min", default=1e-3): vol.All(vol.Coerce(float), vol.Range(min=1e-3, max=1e-1)),
    vol.Required("eps_max", default=1e-1): vol.All(vol.Coerce(float), vol.Range(min=1e-3, max=1e-1)),
    vol.Required("n", default=25): vol.All(vol.Coerce(int), vol.Range(min=5)),
})

MC_SCHEMA = vol.Schema({
    vol.Required("experiment"): vol.In(MC_EXPERIMENTS),
    vol.Optional("c"): vol.Any(None, _positive),
    vol.Optional("s"): vol.Any(None, _positive),
    vol.Optional("paths"): vol.Any(None, vol.All(vol.Coerce(int), vol.Range(min=MIN_MC_PATHS))),
    vol.Required("seed", default=DEFAULT_SEED): vol.Coerce(int),
    vol.Required("workers", default=DEFAULT_WORKERS): vol.All(vol.Coerce(int), vol.Range(min=1)),
})

DETOUR_SCHEMA = vol.Schema({
    vol.Required("v_min", default=1.2): vol.All(vol.Coerce(float), vol.Range(min=1, min_included=False)),
    vol.Required("v_max", default=3.5): vol.All(vol.Coerce(float), vol.Range(min=1, min_included=False)),
    vol.Required("n", default=47): vol.All(vol.Coerce(int), vol.Range(min=3)),
})


def parse_overrides(pairs: Optional[list[str]]) -> dict[str, str]:
    """Turn repeated KEY=VALUE flags into a mapping."""
    overrides: dict[str, str] = {}
    for pair in pairs or []:
        key, sep, value = pair.partition("=")
        if not sep or not key:
            raise vol.Invalid(f"Tolerance override must look like KEY=VALUE, got {pair!r}")
        overrides[key.strip()] = value.strip()
    return overrides


def load_tolerances(overrides: Optional[Mapping[str, Any]] = None) -> TolerancesDTO:
    data = TOLERANCE_SCHEMA({**DEFAULT_TOLERANCES, **(overrides or {})})
    if overrides:
        _LOGGER.info(f"Tolerance overrides applied: {dict(overrides)}")
    return dacite.from_dict(data_class=TolerancesDTO, data=data)


def validate_parameters(schema: vol.Schema, parameters: Mapping[str, Any]) -> dict[str, Any]:
    """Apply a command schema, dropping unset optional values first."""
    cleaned = {key: value for key, value in parameters.items() if value is not None}
    try:
        return schema(cleaned)
    except vol.Invalid as e:
        _LOGGER.error(f"Invalid parameters {cleaned}: {e}")
        raise
