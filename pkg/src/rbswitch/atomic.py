"""Signal-field susceptibility of warm 87Rb in the 5S -> 5P3/2 -> 5D5/2 ladder.

The weak signal couples 5S1/2 -> 5P3/2 (detuning ``delta_s``); a strong control
couples 5P3/2 -> 5D5/2 (detuning ``delta_c``).  The stationary-atom response is
the weak-probe ladder susceptibility; the warm-vapor response averages it over
a Maxwell-Boltzmann velocity distribution.

Doppler averaging
-----------------
For every velocity class the susceptibility is a rational function of the
velocity with (at most) two poles, so the Gaussian average has a closed form
in terms of the Faddeeva function ``w(z)``.  That is the default route
(``method="faddeeva"``).  Gauss-Hermite quadrature in the reduced velocity
``x = v / u`` is kept as ``method="gauss_hermite"``.  Unless extra dephasing
makes the homogeneous width comparable to the node spacing (of order
``k u / sqrt(nodes)``), it is not converged at practical node counts, because
the natural width (~6 MHz) is ~50x narrower than the Doppler width.

Sign conventions: fields vary as ``exp(i(kz - wt))``, so ``Im(chi) >= 0`` is
absorption and the intensity absorption coefficient is ``+2 k Im(n)``.
Detunings are laser minus atomic frequency, in rad/s.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.special import wofz

from .constants import C_LIGHT, EPS0, HBAR, K_B, TORR_TO_PA, ghz_to_rad_s, load_constants
from .errors import ConfigError, DomainError, PreconditionError

__all__ = [
    "LadderAtom",
    "VaporCell",
    "FieldConfig",
    "OpticalResponse",
    "GEOMETRIES",
    "DOPPLER_METHODS",
    "vapor_density",
    "thermal_speed",
    "rabi_frequency",
    "susceptibility_stationary",
    "doppler_susceptibility",
    "susceptibility_doppler",
    "refractive_index",
    "absorption_coefficient",
    "accumulated_phase",
    "optical_response",
    "phase_shift",
    "wrap_phase",
]

T_MIN, T_MAX = 273.0, 500.0
GEOMETRIES = ("counter", "co")
DOPPLER_METHODS = ("faddeeva", "gauss_hermite")
MIN_NODES = 8


@dataclass(frozen=True)
class LadderAtom:
    """Three-level ladder. Rates in rad/s, dipoles in C m, lengths in m."""

    lambda_s: float = 780.241e-9
    lambda_c: float = 776.0e-9
    gamma_e: float = 2 * np.pi * 6.07e6
    gamma_d: float = 2 * np.pi * 0.66e6
    dipole_ge: float = 1.63588818e-29
    dipole_ed: float = 1.97884774e-29
    mass: float = 1.44316090e-25
    vapor_pressure_coeffs: tuple = (15.88253, -4529.635, 0.00058663, -2.99138)

    def __post_init__(self):
        for name in ("lambda_s", "lambda_c", "gamma_e", "gamma_d", "dipole_ge", "dipole_ed", "mass"):
            if not getattr(self, name) > 0:
                raise DomainError(f"LadderAtom.{name} must be > 0, got {getattr(self, name)!r}")
        if not self.lambda_c < self.lambda_s:
            raise DomainError("LadderAtom: control wavelength must be shorter than the signal wavelength")
        object.__setattr__(self, "vapor_pressure_coeffs", tuple(float(v) for v in self.vapor_pressure_coeffs))

    @classmethod
    def from_table(cls, table: dict | None = None) -> "LadderAtom":
        """Build from a constants table (see :func:`rbswitch.constants.load_constants`)."""
        table = load_constants() if table is None else table
        return cls(
            lambda_s=table["lambda_s_m"],
            lambda_c=table["lambda_c_m"],
            gamma_e=table["gamma_e_rad_s"],
            gamma_d=table["gamma_d_rad_s"],
            dipole_ge=table["dipole_ge_Cm"],
            dipole_ed=table["dipole_ed_Cm"],
            mass=table["mass_kg"],
            vapor_pressure_coeffs=tuple(table["vapor_pressure_coeffs"]),
        )

    @property
    def k_s(self) -> float:
        return 2 * np.pi / self.lambda_s

    @property
    def k_c(self) -> float:
        return 2 * np.pi / self.lambda_c


@dataclass(frozen=True)
class VaporCell:
    """Vapor cell.

    ``number_density`` overrides the vapor-pressure value when given (1/m^3);
    set it to 0 for an empty cell.
    """

    length_v: float = 0.05
    temperature: float = 332.0
    extra_dephasing: float = 0.0
    number_density: float | None = None

    def __post_init__(self):
        if not self.length_v > 0:
            raise DomainError(f"VaporCell.length_v must be > 0, got {self.length_v!r}")
        if not T_MIN < self.temperature < T_MAX:
            raise DomainError(f"VaporCell.temperature must lie in ({T_MIN}, {T_MAX}) K, got {self.temperature!r}")
        if self.extra_dephasing < 0:
            raise DomainError("VaporCell.extra_dephasing must be >= 0")
        if self.number_density is not None and self.number_density < 0:
            raise DomainError("VaporCell.number_density must be >= 0")

    def density(self, atom: LadderAtom | None = None) -> float:
        if self.number_density is not None:
            return float(self.number_density)
        coeffs = None if atom is None else atom.vapor_pressure_coeffs
        return float(vapor_density(self.temperature, coeffs))


@dataclass(frozen=True)
class FieldConfig:
    """Signal/control detunings (rad/s), intra-cavity control power (W), waist (m)."""

    delta_s: float = 0.0
    delta_c: float = 0.0
    control_power: float = 0.5
    beam_waist: float = 100e-6
    geometry: str = "counter"

    def __post_init__(self):
        if self.control_power < 0:
            raise DomainError(f"FieldConfig.control_power must be >= 0, got {self.control_power!r}")
        if not self.beam_waist > 0:
            raise DomainError(f"FieldConfig.beam_waist must be > 0, got {self.beam_waist!r}")
        if self.geometry not in GEOMETRIES:
            raise DomainError(f"FieldConfig.geometry must be one of {GEOMETRIES}, got {self.geometry!r}")

    @classmethod
    def from_ghz(cls, delta_s_ghz: float, delta_c_ghz: float, **kwargs) -> "FieldConfig":
        return cls(delta_s=float(ghz_to_rad_s(delta_s_ghz)), delta_c=float(ghz_to_rad_s(delta_c_ghz)), **kwargs)

    def control_off(self) -> "FieldConfig":
        return replace(self, control_power=0.0)


@dataclass(frozen=True)
class OpticalResponse:
    chi: complex
    n: complex
    alpha: float
    phase: float
    transmission_single_pass: float
    phase_shift: float | None = None


def vapor_density(temperature, coeffs=None):
    """Rb number density (1/m^3) from the liquid-phase vapor-pressure correlation.

    ``log10(P / torr) = a + b/T + c*T + d*log10(T)``, then ``N = P / (k_B T)``.
    """
    T = np.asarray(temperature, dtype=float)
    if np.any(~((T > T_MIN) & (T < T_MAX))):
        raise DomainError(f"temperature must lie in ({T_MIN}, {T_MAX}) K, got {temperature!r}")
    a, b, c, d = LadderAtom.vapor_pressure_coeffs if coeffs is None else coeffs
    pressure = 10.0 ** (a + b / T + c * T + d * np.log10(T)) * TORR_TO_PA
    N = pressure / (K_B * T)
    return N if N.ndim else float(N)


def thermal_speed(temperature: float, mass: float) -> float:
    """Most probable speed sqrt(2 k_B T / m), the 1/e half width of the 1-D distribution."""
    return float(np.sqrt(2 * K_B * temperature / mass))


def rabi_frequency(control_power, beam_waist, dipole_ed):
    """Peak Rabi frequency (rad/s) of a Gaussian beam: ``d E0 / hbar``.

    ``E0 = sqrt(2 I0 / (c eps0))`` with the peak intensity ``I0 = 2 P / (pi w^2)``.
    """
    if not np.all(np.asarray(beam_waist) > 0):
        raise DomainError(f"beam waist must be > 0, got {beam_waist!r}")
    power = np.asarray(control_power, dtype=float)
    if np.any(power < 0):
        raise DomainError("control power must be >= 0")
    intensity = 2 * power / (np.pi * np.asarray(beam_waist, dtype=float) ** 2)
    omega = dipole_ed * np.sqrt(2 * intensity / (C_LIGHT * EPS0)) / HBAR
    return omega if np.ndim(omega) else float(omega)


def _coherence_rates(atom: LadderAtom, cell: VaporCell) -> tuple[float, float]:
    return atom.gamma_e / 2 + cell.extra_dephasing, atom.gamma_d / 2 + cell.extra_dephasing


def _chi_prefactor(atom: LadderAtom, N: float) -> float:
    return N * atom.dipole_ge**2 / (HBAR * EPS0)


def susceptibility_stationary(delta_s, delta_c, omega_c, atom: LadderAtom, N: float, cell: VaporCell):
    """Weak-probe ladder susceptibility of atoms at rest.

    ``chi = i C / (g_ge - i delta_s + (omega_c^2 / 4) / (g_gd - i (delta_s + delta_c)))``
    with ``C = N d_ge^2 / (hbar eps0)``.  Reduces to the two-level Lorentzian for
    ``omega_c = 0``.  Broadcasts over array inputs.
    """
    if N < 0:
        raise DomainError("number density must be >= 0")
    g_ge, g_gd = _coherence_rates(atom, cell)
    ds = np.asarray(delta_s, dtype=float)
    two_photon = ds + np.asarray(delta_c, dtype=float)
    dressing = (np.asarray(omega_c, dtype=float) ** 2 / 4) / (g_gd - 1j * two_photon)
    chi = 1j * _chi_prefactor(atom, N) / (g_ge - 1j * ds + dressing)
    return chi if chi.ndim else complex(chi)


def _gauss_pole_average(z):
    """``(1/sqrt(pi)) * integral exp(-x^2) / (x - z) dx`` for complex ``z`` off the real axis."""
    z = np.asarray(z, dtype=complex)
    upper = z.imag >= 0
    zu = np.where(upper, z, np.conj(z))
    w = wofz(zu)
    return np.where(upper, 1j * np.sqrt(np.pi) * w, -1j * np.sqrt(np.pi) * np.conj(w))


def _gauss_double_pole_average(z):
    """Same average for ``1 / (x - z)^2``: the z-derivative of :func:`_gauss_pole_average`."""
    z = np.asarray(z, dtype=complex)
    upper = z.imag >= 0
    zu = np.where(upper, z, np.conj(z))
    dw = -2 * zu * wofz(zu) + 2j / np.sqrt(np.pi)
    return np.where(upper, 1j * np.sqrt(np.pi) * dw, -1j * np.sqrt(np.pi) * np.conj(dw))


def _doppler_faddeeva(ds, dc, omega_c, atom, cell, geometry, N):
    g_ge, g_gd = _coherence_rates(atom, cell)
    u = thermal_speed(cell.temperature, atom.mass)
    pref = _chi_prefactor(atom, N)
    sign = 1.0 if geometry == "counter" else -1.0
    p = atom.k_s * u
    q = (atom.k_s - sign * atom.k_c) * u
    K = omega_c**2 / 4

    # chi(x) = (pref/p) (x - xb) / ((x - xa)(x - xb) - K/(p q)),  x = v/u
    xa = (ds + 1j * g_ge) / p
    out = np.empty(np.broadcast(ds, dc, omega_c).shape, dtype=complex)
    if abs(q) <= 1e-12 * p:
        # two-photon detuning independent of velocity: single shifted pole
        r = xa + 1j * K / (p * (g_gd - 1j * (ds + dc)))
        out[...] = pref / p * _gauss_pole_average(r)
        return out
    xb = (ds + dc + 1j * g_gd) / q
    half = (xa - xb) / 2
    root = np.sqrt(half**2 + K / (p * q) + 0j)
    r1 = (xa + xb) / 2 + root
    r2 = (xa + xb) / 2 - root
    split = np.abs(r1 - r2)
    near_double = split <= 1e-7 * (1 + np.abs(r1))
    safe = np.where(near_double, 1.0, r1 - r2)
    A1 = (r1 - xb) / safe
    A2 = (r2 - xb) / (-safe)
    out[...] = np.where(
        near_double,
        _gauss_pole_average(r1) + (r1 - xb) * _gauss_double_pole_average(r1),
        A1 * _gauss_pole_average(r1) + A2 * _gauss_pole_average(r2),
    )
    return pref / p * out


@lru_cache(maxsize=32)
def _hermite_rule(nodes: int):
    x, w = np.polynomial.hermite.hermgauss(nodes)
    return x, w / np.sqrt(np.pi)


def _doppler_gauss_hermite(ds, dc, omega_c, atom, cell, geometry, N, nodes):
    x, w = _hermite_rule(nodes)
    v = thermal_speed(cell.temperature, atom.mass) * x
    sign = 1.0 if geometry == "counter" else -1.0
    ds_v = ds[..., None] - atom.k_s * v
    dc_v = dc[..., None] + sign * atom.k_c * v
    chi = susceptibility_stationary(ds_v, dc_v, omega_c[..., None], atom, N, cell)
    return np.asarray(chi) @ w


def doppler_susceptibility(
    delta_s,
    delta_c,
    omega_c,
    atom: LadderAtom,
    cell: VaporCell,
    geometry: str = "counter",
    method: str = "faddeeva",
    nodes: int = 64,
):
    """Velocity-averaged susceptibility on arrays of detunings / Rabi frequencies.

    The signal is taken to travel along +z.  An atom with velocity ``v`` sees
    ``delta_s - k_s v`` and, for a counter-propagating control,
    ``delta_c + k_c v`` (``delta_c - k_c v`` when co-propagating).
    """
    if geometry not in GEOMETRIES:
        raise ConfigError(f"geometry must be one of {GEOMETRIES}, got {geometry!r}")
    if method not in DOPPLER_METHODS:
        raise ConfigError(f"Doppler method must be one of {DOPPLER_METHODS}, got {method!r}")
    if method == "gauss_hermite" and (int(nodes) != nodes or nodes < MIN_NODES):
        raise ConfigError(f"quadrature needs an integer node count >= {MIN_NODES}, got {nodes!r}")
    ds, dc, om = np.broadcast_arrays(
        np.asarray(delta_s, dtype=float), np.asarray(delta_c, dtype=float), np.asarray(omega_c, dtype=float)
    )
    N = cell.density(atom)
    if N == 0:
        chi = np.zeros(ds.shape, dtype=complex)
    elif thermal_speed(cell.temperature, atom.mass) == 0:
        chi = np.asarray(susceptibility_stationary(ds, dc, om, atom, N, cell), dtype=complex)
    elif method == "faddeeva":
        chi = _doppler_faddeeva(ds, dc, om, atom, cell, geometry, N)
    else:
        chi = _doppler_gauss_hermite(ds, dc, om, atom, cell, geometry, N, int(nodes))
    return chi if chi.ndim else complex(chi)


def susceptibility_doppler(
    config: FieldConfig, atom: LadderAtom, cell: VaporCell, method: str = "faddeeva", nodes: int = 64
) -> complex:
    omega_c = rabi_frequency(config.control_power, config.beam_waist, atom.dipole_ed)
    return doppler_susceptibility(
        config.delta_s, config.delta_c, omega_c, atom, cell, config.geometry, method=method, nodes=nodes
    )


def refractive_index(chi):
    """Principal branch of sqrt(1 + chi), i.e. Re(n) > 0."""
    n = np.sqrt(1 + np.asarray(chi, dtype=complex))
    return n if n.ndim else complex(n)


def absorption_coefficient(n, k_s: float):
    """Intensity absorption coefficient (1/m), ``2 k Im(n)``."""
    alpha = 2 * k_s * np.imag(n)
    return alpha if np.ndim(alpha) else float(alpha)


def accumulated_phase(n, k_s: float, length_v: float, round_trip_length: float):
    """Round-trip signal phase: the vapor's excess index plus the empty-cavity length."""
    phi = k_s * ((np.real(n) - 1) * length_v + round_trip_length)
    return phi if np.ndim(phi) else float(phi)


def optical_response(
    config: FieldConfig,
    atom: LadderAtom,
    cell: VaporCell,
    cavity_round_trip: float,
    method: str = "faddeeva",
    nodes: int = 64,
) -> OpticalResponse:
    chi = susceptibility_doppler(config, atom, cell, method=method, nodes=nodes)
    n = refractive_index(chi)
    alpha = absorption_coefficient(n, atom.k_s)
    return OpticalResponse(
        chi=chi,
        n=n,
        alpha=alpha,
        phase=accumulated_phase(n, atom.k_s, cell.length_v, cavity_round_trip),
        transmission_single_pass=float(np.exp(-alpha * cell.length_v)),
    )


def wrap_phase(phi):
    """Map onto (-pi, pi]."""
    wrapped = np.pi - np.mod(np.pi - np.asarray(phi, dtype=float), 2 * np.pi)
    return wrapped if wrapped.ndim else float(wrapped)


def phase_shift(
    config_on: FieldConfig,
    config_off: FieldConfig,
    atom: LadderAtom,
    cell: VaporCell,
    cavity_round_trip: float,
    wrap: bool = False,
    method: str = "faddeeva",
    nodes: int = 64,
) -> float:
    """Control-induced phase shift phi(on) - phi(off), in rad.

    ``config_off`` must be ``config_on`` with the control power set to zero.
    The empty-cavity term cancels analytically and is left out, which keeps the
    difference free of the ~1e6 rad cavity offset.
    """
    if config_off.control_power != 0:
        raise PreconditionError("config_off must have control_power = 0")
    if config_on.control_off() != config_off:
        raise PreconditionError("config_on and config_off may differ only in control_power")
    on = optical_response(config_on, atom, cell, cavity_round_trip, method, nodes)
    off = optical_response(config_off, atom, cell, cavity_round_trip, method, nodes)
    dphi = atom.k_s * cell.length_v * (on.n.real - off.n.real)
    return wrap_phase(dphi) if wrap else float(dphi)
