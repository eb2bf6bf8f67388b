"""Physical constants, the versioned atomic data table, and frequency units.

Frequency convention
--------------------
Every detuning and rate handled inside the package is an *angular* frequency
in rad/s.  Every detuning that crosses an external interface (config files,
CSV columns, CLI flags) is an *ordinary* frequency in GHz.  The only place the
factor 2*pi appears is in :func:`ghz_to_rad_s` / :func:`rad_s_to_ghz`.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.constants import c, epsilon_0, hbar, k as k_B, torr

from .errors import ConfigError

__all__ = [
    "C_LIGHT",
    "EPS0",
    "HBAR",
    "K_B",
    "TORR_TO_PA",
    "CONSTANTS_FILE",
    "REQUIRED_KEYS",
    "load_constants",
    "ghz_to_rad_s",
    "rad_s_to_ghz",
]

C_LIGHT = c
EPS0 = epsilon_0
HBAR = hbar
K_B = k_B
TORR_TO_PA = torr

CONSTANTS_FILE = "rb87_constants_v1.json"

REQUIRED_KEYS = (
    "lambda_s_m",
    "lambda_c_m",
    "gamma_e_rad_s",
    "gamma_d_rad_s",
    "dipole_ge_Cm",
    "dipole_ed_Cm",
    "mass_kg",
    "vapor_pressure_coeffs",
)
_METADATA_KEYS = ("version", "source")


def load_constants(path: str | Path | None = None) -> dict:
    """Read an atomic constants table.

    Args:
        path: JSON file to read. ``None`` loads the table shipped with the
            package.

    Returns:
        dict with the keys in :data:`REQUIRED_KEYS` (plus ``version`` and
        ``source`` when present).
    """
    if path is None:
        text = resources.files("rbswitch.data").joinpath(CONSTANTS_FILE).read_text()
        origin = CONSTANTS_FILE
    else:
        text = Path(path).read_text()
        origin = str(path)
    table = json.loads(text)
    missing = [key for key in REQUIRED_KEYS if key not in table]
    if missing:
        raise ConfigError(f"{origin}: missing constants {missing}")
    unknown = sorted(set(table) - set(REQUIRED_KEYS) - set(_METADATA_KEYS))
    if unknown:
        raise ConfigError(f"{origin}: unknown constants {unknown}")
    if len(table["vapor_pressure_coeffs"]) != 4:
        raise ConfigError(f"{origin}: vapor_pressure_coeffs needs 4 entries [a, b, c, d]")
    return table


def ghz_to_rad_s(f_ghz):
    return 2.0 * np.pi * 1e9 * np.asarray(f_ghz, dtype=float)


def rad_s_to_ghz(w):
    return np.asarray(w, dtype=float) / (2.0 * np.pi * 1e9)
