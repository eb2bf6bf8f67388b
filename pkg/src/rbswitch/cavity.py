"""Two-port ring cavity: steady-state transmission/reflection, finesse, ring-up.

Field model (self-consistent mode).  With ``E_ret`` the field arriving back at
the input beamsplitter after one round trip,

    E_c = t1 E_in + r1 E_ret          (circulating, just after BS1)
    E_R = r1 E_in - t1 E_ret          (reflected port)
    E_ret = r2 sqrt(eta) exp(i phi) E_c
    E_T = t2 sqrt(eta) E_c            (transmitted port, loss lumped before BS2)

which gives ``T = t1^2 t2^2 eta / |1 - a e^{i phi}|^2`` with the amplitude
round-trip factor ``a = r1 r2 sqrt(eta)``.

``formula_mode="paper"`` evaluates the published closed form instead, in which
``eta`` multiplies both ``r1^2 r2^2`` and the cosine cross term.  The two modes
coincide for ``eta = 1``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .constants import C_LIGHT
from .errors import ConfigError, DomainError

__all__ = [
    "RingCavity",
    "CavityWarning",
    "FORMULA_MODES",
    "transmission",
    "reflection",
    "finesse",
    "ring_up_time",
    "bandwidth",
    "free_spectral_range",
    "resonant_bias",
]

FORMULA_MODES = ("self_consistent", "paper")
_DEN_FLOOR = 1e-15


class CavityWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class RingCavity:
    """Beamsplitter intensity coefficients r_i^2, t_i^2; round-trip survival eta; length in m.

    Intensities are stored so that closed-form results such as the unit
    on-resonance transmission of a symmetric lossless cavity hold to the last
    bit; the field amplitudes are derived properties.
    """

    r1_sq: float = 0.8
    r2_sq: float = 0.8
    t1_sq: float = 0.2
    t2_sq: float = 0.2
    eta: float = 0.83
    round_trip_length: float = 0.3331
    bias_phase: float = 0.0

    def __post_init__(self):
        for r_sq, t_sq, label in ((self.r1_sq, self.t1_sq, "1"), (self.r2_sq, self.t2_sq, "2")):
            if not (0 <= r_sq <= 1 and 0 <= t_sq <= 1):
                raise DomainError(f"beamsplitter {label}: intensities must lie in [0, 1], got r^2={r_sq!r}, t^2={t_sq!r}")
            if r_sq + t_sq > 1 + 1e-12:
                raise DomainError(f"beamsplitter {label}: r^2 + t^2 = {r_sq + t_sq:.6g} exceeds 1")
        if not 0 < self.eta <= 1:
            raise DomainError(f"eta must lie in (0, 1], got {self.eta!r}")
        if not self.round_trip_length > 0:
            raise DomainError(f"round_trip_length must be > 0, got {self.round_trip_length!r}")

    @classmethod
    def from_intensities(
        cls,
        r1_sq: float = 0.8,
        r2_sq: float = 0.8,
        t1_sq: float | None = None,
        t2_sq: float | None = None,
        eta: float = 0.83,
        round_trip_length: float = 0.3331,
        bias_phase: float = 0.0,
    ) -> "RingCavity":
        """Build from intensity coefficients; missing ``t_i^2`` default to ``1 - r_i^2``."""
        t1_sq = 1 - r1_sq if t1_sq is None else t1_sq
        t2_sq = 1 - r2_sq if t2_sq is None else t2_sq
        return cls(float(r1_sq), float(r2_sq), float(t1_sq), float(t2_sq), eta, round_trip_length, bias_phase)

    @property
    def r1(self) -> float:
        return float(np.sqrt(self.r1_sq))

    @property
    def r2(self) -> float:
        return float(np.sqrt(self.r2_sq))

    @property
    def t1(self) -> float:
        return float(np.sqrt(self.t1_sq))

    @property
    def t2(self) -> float:
        return float(np.sqrt(self.t2_sq))

    @property
    def round_trip_factor(self) -> float:
        return float(np.sqrt(self.r1_sq * self.r2_sq * self.eta))

    @property
    def round_trip_time(self) -> float:
        return self.round_trip_length / C_LIGHT

    @property
    def lossless(self) -> bool:
        return (
            self.eta == 1
            and abs(self.r1_sq + self.t1_sq - 1) < 1e-12
            and abs(self.r2_sq + self.t2_sq - 1) < 1e-12
        )


def _survival(cavity: RingCavity, loss_factor):
    """Round-trip intensity survival, cavity losses times any extra (atomic) factor."""
    extra = np.asarray(loss_factor, dtype=float)
    if np.any((extra < 0) | (extra > 1)):
        raise DomainError("loss_factor must lie in [0, 1]")
    return cavity.eta * extra


def _floor(den):
    if np.any(den < _DEN_FLOOR):
        warnings.warn("cavity denominator underflow near a lossless resonance; value capped", CavityWarning, stacklevel=3)
        den = np.maximum(den, _DEN_FLOOR)
    return den


def _scalar(x):
    return x if np.ndim(x) else float(x)


def transmission(phi, cavity: RingCavity, formula_mode: str = "self_consistent", loss_factor=1.0):
    """Transmitted-port intensity for round-trip phase ``phi`` (rad).

    ``loss_factor`` multiplies ``eta``; the switch passes the single-pass vapor
    transmission here.
    """
    if formula_mode not in FORMULA_MODES:
        raise ConfigError(f"formula_mode must be one of {FORMULA_MODES}, got {formula_mode!r}")
    eta = _survival(cavity, loss_factor)
    phi = np.asarray(phi, dtype=float)
    rr_sq = cavity.r1_sq * cavity.r2_sq
    num = cavity.t1_sq * cavity.t2_sq * eta
    # 1 + x^2 - 2 x cos(phi) written as (1 - x)^2 + 4 x sin^2(phi / 2), exact on resonance
    half = np.sin(phi / 2) ** 2
    if formula_mode == "paper":
        x = np.sqrt(rr_sq) * eta
        den = (1 - x) ** 2 + 4 * x * half + rr_sq * eta * (1 - eta)
    else:
        x = np.sqrt(rr_sq * eta)
        den = (1 - x) ** 2 + 4 * x * half
    return _scalar(num / _floor(den))


def reflection(phi, cavity: RingCavity, loss_factor=1.0):
    """Reflected-port intensity from the self-consistent field model."""
    eta = _survival(cavity, loss_factor)
    e = np.exp(1j * np.asarray(phi, dtype=float))
    s = np.sqrt(eta)
    num = np.abs(cavity.r1 - cavity.r2 * s * (cavity.r1_sq + cavity.t1_sq) * e) ** 2
    den = np.abs(1 - np.sqrt(cavity.r1_sq * cavity.r2_sq) * s * e) ** 2
    return _scalar(num / _floor(den))


def finesse(cavity: RingCavity, loss_factor: float = 1.0) -> float:
    """``pi sqrt(a) / (1 - a)`` with the amplitude round-trip factor ``a``."""
    a = np.sqrt(cavity.r1_sq * cavity.r2_sq * _survival(cavity, loss_factor))
    if a >= 1:
        raise DomainError(f"round-trip factor {a:.6g} >= 1: no finite finesse")
    return float(np.pi * np.sqrt(a) / (1 - a))


def ring_up_time(finesse_value: float, round_trip_length: float) -> float:
    """Ring-up time F L / c in seconds."""
    if not (finesse_value > 0 and round_trip_length > 0):
        raise DomainError("finesse and round-trip length must be > 0")
    return finesse_value * round_trip_length / C_LIGHT


def free_spectral_range(cavity: RingCavity) -> float:
    return C_LIGHT / cavity.round_trip_length


def bandwidth(cavity: RingCavity, loss_factor: float = 1.0) -> float:
    """Resonance full width in Hz, FSR / F."""
    F = finesse(cavity, loss_factor)
    return free_spectral_range(cavity) / F if F > 0 else float("inf")


def resonant_bias(phi) -> float:
    """Bias phase in (-pi, pi] that brings total phase ``phi`` onto resonance."""
    return float(np.pi - np.mod(np.pi + float(phi), 2 * np.pi))
