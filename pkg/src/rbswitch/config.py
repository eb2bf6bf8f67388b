"""Run configuration: one JSON document, unit-suffixed keys, dotted-key overrides.

Every block is checked against the module invariants when the configuration
is loaded, so no computation starts from an invalid setting.  Detunings are
ordinary frequencies in GHz here and are converted once, in
:meth:`RunConfig.field_config`.
"""

from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass
from pathlib import Path

from .atomic import DOPPLER_METHODS, GEOMETRIES, MIN_NODES, FieldConfig, LadderAtom, VaporCell
from .cavity import FORMULA_MODES, RingCavity
from .constants import load_constants
from .dynamics import BIAS_POLICIES, ControlPulseTrain
from .errors import ConfigError, DomainError
from .fitting import DEFAULT_BOUNDS

__all__ = ["ENV_VAR", "DEFAULTS", "RunConfig", "load_config", "apply_overrides"]

ENV_VAR = "RBSWITCH_CONFIG"

DEFAULTS: dict = {
    "atom": {
        "constants_file": None,
        "doppler_method": "faddeeva",
        "quadrature_nodes": 64,
    },
    "cell": {
        "length_v_m": 0.05,
        "temperature_K": 332.0,
        "extra_dephasing_rad_s": 0.0,
        "number_density_m3": None,
    },
    "cavity": {
        "r1_sq": 0.8,
        "r2_sq": 0.8,
        "t1_sq": None,
        "t2_sq": None,
        "eta": 0.83,
        "round_trip_length_m": 0.3331,
        "bias_phase_rad": 0.0,
        "bias_policy": "control_on_resonant",
        "formula_mode": "self_consistent",
    },
    "field": {
        "delta_s_ghz": -0.65,
        "delta_c_ghz": -0.65,
        "control_power_W": 0.5,
        "beam_waist_m": 100e-6,
        "geometry": "counter",
    },
    "pulses": {
        "modulation_rates_hz": [2e6, 4e6, 12e6],
        "duty": 0.5,
        "pulse_duration_s": None,
        "peak_power_W": None,
        "enhancement": 18.0,
        "edge_time_s": 1e-9,
        "periods": 4,
        "samples_per_round_trip": 8,
    },
    "sweep": {
        "delta_s_min_ghz": -3.0,
        "delta_s_max_ghz": 3.0,
        "delta_c_min_ghz": -3.0,
        "delta_c_max_ghz": 3.0,
        "points_s": 121,
        "points_c": 121,
        "diagonal_min_ghz": -3.0,
        "diagonal_max_ghz": 3.0,
        "diagonal_points": 121,
    },
    "fit": {
        "data_file": None,
        "temperature_bounds_K": list(DEFAULT_BOUNDS["temperature_K"]),
        "power_bounds_W": list(DEFAULT_BOUNDS["intracavity_power_W"]),
        "synthetic_temperature_K": 332.0,
        "synthetic_power_W": 0.5,
        "synthetic_noise": 0.02,
        "synthetic_points": 25,
        "nm_starts": 4,
        "xtol": 1e-4,
        "max_iter": 500,
    },
    "output_dir": "rbswitch_out",
    "seed": 0,
}


def _merge(base: dict, update: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in update.items():
        path = f"{where}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {path!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {path!r} must be an object")
            out[key] = _merge(base[key], value, path + ".")
        else:
            out[key] = value
    return out


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(raw: dict, overrides: list[str] | None) -> dict:
    """Apply ``block.key=value`` strings; values are parsed as JSON when possible."""
    out = copy.deepcopy(raw)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        dotted, text = item.split("=", 1)
        parts = dotted.strip().split(".")
        node, ref = out, DEFAULTS
        for part in parts[:-1]:
            if part not in ref or not isinstance(ref[part], dict):
                raise ConfigError(f"unknown config key {dotted!r}")
            node, ref = node.setdefault(part, {}), ref[part]
        if parts[-1] not in ref or isinstance(ref[parts[-1]], dict):
            raise ConfigError(f"unknown config key {dotted!r}")
        node[parts[-1]] = _parse_value(text)
    return out


def _require(cond: bool, key: str, message: str):
    if not cond:
        raise ConfigError(f"{key}: {message}")


def _number(block: dict, name: str, key: str, *, lo=None, hi=None, lo_open=False, allow_none=False):
    value = block[key]
    where = f"{name}.{key}"
    if value is None and allow_none:
        return None
    _require(isinstance(value, (int, float)) and not isinstance(value, bool), where, f"must be a number, got {value!r}")
    if lo is not None:
        ok = value > lo if lo_open else value >= lo
        _require(ok, where, f"must be {'>' if lo_open else '>='} {lo}, got {value!r}")
    if hi is not None:
        _require(value <= hi, where, f"must be <= {hi}, got {value!r}")
    return float(value)


def _integer(block: dict, name: str, key: str, lo: int):
    value = block[key]
    _require(isinstance(value, int) and not isinstance(value, bool) and value >= lo, f"{name}.{key}", f"must be an integer >= {lo}, got {value!r}")
    return value


def _choice(block: dict, name: str, key: str, options):
    value = block[key]
    _require(value in options, f"{name}.{key}", f"must be one of {list(options)}, got {value!r}")
    return value


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration plus the physics objects built from it."""

    raw: dict
    atom: LadderAtom
    cell: VaporCell
    cavity: RingCavity

    @classmethod
    def from_dict(cls, data: dict | None = None, overrides: list[str] | None = None) -> "RunConfig":
        raw = _merge(DEFAULTS, data or {})
        raw = _merge(DEFAULTS, apply_overrides(raw, overrides))
        _validate(raw)
        try:
            a = raw["atom"]
            atom = LadderAtom.from_table(load_constants(a["constants_file"]) if a["constants_file"] else None)
            c = raw["cell"]
            cell = VaporCell(
                length_v=c["length_v_m"],
                temperature=c["temperature_K"],
                extra_dephasing=c["extra_dephasing_rad_s"],
                number_density=c["number_density_m3"],
            )
            k = raw["cavity"]
            cavity = RingCavity.from_intensities(
                k["r1_sq"], k["r2_sq"], k["t1_sq"], k["t2_sq"], k["eta"], k["round_trip_length_m"], k["bias_phase_rad"]
            )
        except OSError as exc:
            raise ConfigError(f"atom.constants_file: {exc}") from exc
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc
        cfg = cls(raw=raw, atom=atom, cell=cell, cavity=cavity)
        cfg.field_config()
        cfg.pulse_trains()
        return cfg

    @property
    def doppler(self) -> dict:
        return {"method": self.raw["atom"]["doppler_method"], "nodes": self.raw["atom"]["quadrature_nodes"]}

    @property
    def bias_policy(self) -> str:
        return self.raw["cavity"]["bias_policy"]

    @property
    def formula_mode(self) -> str:
        return self.raw["cavity"]["formula_mode"]

    @property
    def output_dir(self) -> Path:
        return Path(self.raw["output_dir"])

    @property
    def seed(self) -> int:
        return self.raw["seed"]

    def field_config(self, **changes) -> FieldConfig:
        f = {**self.raw["field"], **changes}
        try:
            return FieldConfig.from_ghz(
                f["delta_s_ghz"],
                f["delta_c_ghz"],
                control_power=f["control_power_W"],
                beam_waist=f["beam_waist_m"],
                geometry=f["geometry"],
            )
        except DomainError as exc:
            raise ConfigError(f"field: {exc}") from exc

    def pulse_trains(self) -> list[ControlPulseTrain]:
        p = self.raw["pulses"]
        peak = p["peak_power_W"]
        if peak is None:
            peak = self.raw["field"]["control_power_W"] / p["enhancement"]
        try:
            return [
                ControlPulseTrain(
                    modulation_rate=rate,
                    duty=p["duty"],
                    pulse_duration=p["pulse_duration_s"],
                    peak_power=peak,
                    enhancement=p["enhancement"],
                    edge_time=p["edge_time_s"],
                )
                for rate in p["modulation_rates_hz"]
            ]
        except DomainError as exc:
            raise ConfigError(f"pulses: {exc}") from exc


def _validate(raw: dict) -> None:
    a = raw["atom"]
    _require(a["constants_file"] is None or isinstance(a["constants_file"], str), "atom.constants_file", "must be a path or null")
    _choice(a, "atom", "doppler_method", DOPPLER_METHODS)
    _integer(a, "atom", "quadrature_nodes", MIN_NODES)

    c = raw["cell"]
    _number(c, "cell", "length_v_m", lo=0, lo_open=True)
    _number(c, "cell", "temperature_K", lo=273, hi=500, lo_open=True)
    _number(c, "cell", "extra_dephasing_rad_s", lo=0)
    _number(c, "cell", "number_density_m3", lo=0, allow_none=True)

    k = raw["cavity"]
    for key in ("r1_sq", "r2_sq"):
        _number(k, "cavity", key, lo=0, hi=1)
    for key in ("t1_sq", "t2_sq"):
        _number(k, "cavity", key, lo=0, hi=1, allow_none=True)
    _number(k, "cavity", "eta", lo=0, hi=1, lo_open=True)
    _number(k, "cavity", "round_trip_length_m", lo=0, lo_open=True)
    _number(k, "cavity", "bias_phase_rad")
    _choice(k, "cavity", "bias_policy", BIAS_POLICIES)
    _choice(k, "cavity", "formula_mode", FORMULA_MODES)

    f = raw["field"]
    _number(f, "field", "delta_s_ghz")
    _number(f, "field", "delta_c_ghz")
    _number(f, "field", "control_power_W", lo=0)
    _number(f, "field", "beam_waist_m", lo=0, lo_open=True)
    _choice(f, "field", "geometry", GEOMETRIES)

    p = raw["pulses"]
    rates = p["modulation_rates_hz"]
    _require(isinstance(rates, list) and len(rates) > 0, "pulses.modulation_rates_hz", "must be a non-empty list")
    for i, rate in enumerate(rates):
        _number({"r": rate}, f"pulses.modulation_rates_hz[{i}]", "r", lo=0, lo_open=True)
    _number(p, "pulses", "duty", lo=0, hi=1, lo_open=True)
    _number(p, "pulses", "pulse_duration_s", lo=0, lo_open=True, allow_none=True)
    _number(p, "pulses", "peak_power_W", lo=0, allow_none=True)
    _number(p, "pulses", "enhancement", lo=0, lo_open=True)
    _number(p, "pulses", "edge_time_s", lo=0)
    _integer(p, "pulses", "periods", 2)
    _integer(p, "pulses", "samples_per_round_trip", 4)

    s = raw["sweep"]
    for axis in ("delta_s", "delta_c", "diagonal"):
        lo = _number(s, "sweep", f"{axis}_min_ghz")
        hi = _number(s, "sweep", f"{axis}_max_ghz")
        _require(lo < hi, f"sweep.{axis}_max_ghz", f"must exceed {axis}_min_ghz ({lo}), got {hi}")
    _integer(s, "sweep", "points_s", 2)
    _integer(s, "sweep", "points_c", 2)
    _integer(s, "sweep", "diagonal_points", 1)

    t = raw["fit"]
    _require(t["data_file"] is None or isinstance(t["data_file"], str), "fit.data_file", "must be a path or null")
    for key, (lo_lim, hi_lim) in (("temperature_bounds_K", (273, 500)), ("power_bounds_W", (0, None))):
        b = t[key]
        _require(isinstance(b, list) and len(b) == 2, f"fit.{key}", f"must be [lower, upper], got {b!r}")
        _number({"lo": b[0]}, f"fit.{key}", "lo", lo=lo_lim, lo_open=key.startswith("temperature"))
        _number({"hi": b[1]}, f"fit.{key}", "hi", hi=hi_lim)
        _require(b[0] < b[1], f"fit.{key}", f"lower bound must be below upper bound, got {b!r}")
    _number(t, "fit", "synthetic_temperature_K", lo=273, hi=500, lo_open=True)
    _number(t, "fit", "synthetic_power_W", lo=0)
    _number(t, "fit", "synthetic_noise", lo=0)
    _integer(t, "fit", "synthetic_points", 5)
    _integer(t, "fit", "nm_starts", 1)
    _number(t, "fit", "xtol", lo=0, lo_open=True)
    _integer(t, "fit", "max_iter", 1)

    _require(isinstance(raw["output_dir"], str) and raw["output_dir"] != "", "output_dir", "must be a non-empty path")
    _require(isinstance(raw["seed"], int) and not isinstance(raw["seed"], bool) and raw["seed"] >= 0, "seed", "must be an integer >= 0")


def load_config(path: str | Path | None = None, overrides: list[str] | None = None) -> RunConfig:
    """Load ``path`` (or the file named by ``RBSWITCH_CONFIG``; else built-in defaults)."""
    if path is None:
        path = os.environ.get(ENV_VAR) or None
    data = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
    return RunConfig.from_dict(data, overrides)
