import json
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.constants import epsilon_0, hbar, k as k_B
from scipy.integrate import quad

from oracle_values import ORACLE, rel
from rbswitch import FieldConfig, LadderAtom, VaporCell
from rbswitch.atomic import (
    absorption_coefficient,
    doppler_susceptibility,
    optical_response,
    phase_shift,
    rabi_frequency,
    refractive_index,
    susceptibility_doppler,
    susceptibility_stationary,
    thermal_speed,
    vapor_density,
    wrap_phase,
)
from rbswitch.constants import ghz_to_rad_s, load_constants, rad_s_to_ghz
from rbswitch.errors import ConfigError, DomainError, PreconditionError

GHZ = 2 * np.pi * 1e9
L_C = 0.3331


# ---------------------------------------------------------------- constants


def test_constants_table_loads_and_matches_oracle_dipoles():
    table = load_constants()
    assert table["version"] == 1
    assert rel(table["dipole_ed_Cm"], ORACLE["dipole_ed"]) < 1e-8
    assert rel(table["dipole_ge_Cm"], ORACLE["dipole_ge"]) < 1e-8


def test_constants_table_rejects_missing_and_unknown_keys(tmp_path):
    table = load_constants()
    missing = {k: v for k, v in table.items() if k != "mass_kg"}
    (tmp_path / "a.json").write_text(json.dumps(missing))
    with pytest.raises(ConfigError, match="mass_kg"):
        load_constants(tmp_path / "a.json")
    (tmp_path / "b.json").write_text(json.dumps({**table, "spin": 1}))
    with pytest.raises(ConfigError, match="spin"):
        load_constants(tmp_path / "b.json")


def test_ghz_round_trip():
    assert ghz_to_rad_s(1.0) == pytest.approx(2 * np.pi * 1e9)
    assert rad_s_to_ghz(ghz_to_rad_s(-0.65)) == pytest.approx(-0.65)


def test_atom_invariants():
    with pytest.raises(DomainError):
        LadderAtom(gamma_e=0.0)
    with pytest.raises(DomainError):
        LadderAtom(lambda_c=800e-9)


# ------------------------------------------------------------ vapor density


def test_vapor_density_oracle():
    assert rel(vapor_density(333.15), ORACLE["N_333.15"]) < 1e-9
    assert rel(vapor_density(332.0), ORACLE["N_332"]) < 1e-9


@given(st.floats(274.0, 498.0), st.floats(0.1, 1.0))
def test_vapor_density_monotone(t1, dt):
    assert vapor_density(t1 + dt) > vapor_density(t1)


@pytest.mark.parametrize("temperature", [273.0, 500.0, 200.0])
def test_vapor_density_domain(temperature):
    with pytest.raises(DomainError):
        vapor_density(temperature)
    with pytest.raises(DomainError):
        VaporCell(temperature=temperature)


# ----------------------------------------------------------- Rabi frequency


def test_rabi_oracle(atom):
    assert rel(rabi_frequency(0.5, 100e-6, atom.dipole_ed), ORACLE["omega_c"]) < 1e-8


def test_rabi_zero_power_and_sqrt_scaling(atom):
    assert rabi_frequency(0.0, 100e-6, atom.dipole_ed) == 0.0
    w1 = rabi_frequency(0.1, 80e-6, atom.dipole_ed)
    assert rabi_frequency(0.4, 80e-6, atom.dipole_ed) == pytest.approx(2 * w1, rel=1e-12)


@pytest.mark.parametrize("waist", [0.0, -1e-6])
def test_rabi_bad_waist(atom, waist):
    with pytest.raises(DomainError):
        rabi_frequency(0.5, waist, atom.dipole_ed)


# ------------------------------------------------ stationary susceptibility


def test_stationary_empty_cell(atom, cell):
    assert susceptibility_stationary(0.3e9, 0.1e9, 1e9, atom, 0.0, cell) == 0


def test_stationary_two_level_is_lorentzian(atom, cell):
    N = 1e17
    d = np.linspace(-50, 50, 201) * 1e6
    chi = susceptibility_stationary(d, 0.0, 0.0, atom, N, cell)
    C = N * atom.dipole_ge**2 / (hbar * epsilon_0)
    g = atom.gamma_e / 2
    np.testing.assert_allclose(chi, 1j * C / (g - 1j * d), rtol=1e-12)
    assert np.argmax(chi.imag) == 100  # line centre


def test_stationary_two_photon_transparency(atom, cell):
    # within the natural linewidth the dressing opens a transparency window; far outside it the
    # extra broadening raises the off-resonant absorption instead
    N = 1e17
    for ds in (0.0, 5e6, -1e7):
        bare = susceptibility_stationary(ds, 0.0, 0.0, atom, N, cell)
        dressed = susceptibility_stationary(ds, -ds, 2e8, atom, N, cell)
        assert dressed.imag < bare.imag


def test_kramers_kronig_symmetry(atom):
    cell = VaporCell(temperature=320.0, extra_dephasing=3e6)
    d = np.linspace(-3, 3, 61) * GHZ
    for chi in (
        susceptibility_stationary(d, 0.0, 0.0, atom, 1e16, cell),
        doppler_susceptibility(d, 0.0, 0.0, atom, cell),
    ):
        np.testing.assert_allclose(chi.real, -chi.real[::-1], atol=1e-14 * np.abs(chi).max())
        np.testing.assert_allclose(chi.imag, chi.imag[::-1], rtol=1e-10)


# ---------------------------------------------------------- Doppler average


def _quad_reference(ds, dc, omega, atom, cell, geometry="counter"):
    """Independent velocity integral of the closed-form stationary response."""
    N = cell.density(atom)
    u = np.sqrt(2 * k_B * cell.temperature / atom.mass)
    C = N * atom.dipole_ge**2 / (hbar * epsilon_0)
    g1, g2 = atom.gamma_e / 2 + cell.extra_dephasing, atom.gamma_d / 2 + cell.extra_dephasing
    sign = 1 if geometry == "counter" else -1

    def chi(x):
        a = ds - atom.k_s * u * x
        b = a + dc + sign * atom.k_c * u * x
        return 1j * C / (g1 - 1j * a + omega**2 / 4 / (g2 - 1j * b)) * np.exp(-x * x) / np.sqrt(np.pi)

    # resonant velocity classes make the integrand sharply peaked; hand quad the break points
    pts = sorted({ds / (atom.k_s * u)} | {np.clip(ds / (atom.k_s * u), -8, 8)})
    kw = dict(limit=2000, epsabs=0, epsrel=1e-11, points=[p for p in pts if -8 < p < 8])
    re = quad(lambda x: chi(x).real, -8, 8, **kw)[0]
    im = quad(lambda x: chi(x).imag, -8, 8, **kw)[0]
    return re + 1j * im


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
@pytest.mark.parametrize(
    "ds_ghz,dc_ghz,power,geometry",
    [(-0.65, -0.65, 0.5, "counter"), (-0.65, -0.65, 0.0, "counter"), (0.2, -0.1, 0.1, "co"), (1.5, 1.5, 0.5, "counter"), (0.0, 0.0, 0.05, "counter")],
)
def test_faddeeva_matches_adaptive_quadrature(atom, cell, ds_ghz, dc_ghz, power, geometry):
    omega = rabi_frequency(power, 100e-6, atom.dipole_ed)
    got = doppler_susceptibility(ds_ghz * GHZ, dc_ghz * GHZ, omega, atom, cell, geometry)
    ref = _quad_reference(ds_ghz * GHZ, dc_ghz * GHZ, omega, atom, cell, geometry)
    assert abs(got - ref) / abs(ref) < 1e-7


@given(
    st.floats(-3.0, 3.0),
    st.floats(-3.0, 3.0),
    st.floats(0.0, 2.0),
    st.floats(300.0, 400.0),
    st.sampled_from(["counter", "co"]),
)
def test_doppler_passive_medium(ds, dc, power, temperature, geometry):
    atom = LadderAtom.from_table()
    cell = VaporCell(temperature=temperature)
    omega = rabi_frequency(power, 100e-6, atom.dipole_ed)
    chi = doppler_susceptibility(ds * GHZ, dc * GHZ, omega, atom, cell, geometry)
    assert chi.imag >= 0
    n = refractive_index(chi)
    assert n.real > 0
    assert 0 <= np.exp(-absorption_coefficient(n, atom.k_s) * cell.length_v) <= 1


def test_frozen_atom_limit(atom):
    heavy = replace(atom, mass=1e-12)
    cell = VaporCell(temperature=273.5, number_density=1e16)
    for ds, dc, om in [(0.3e9, -0.2e9, 1e9), (-4e9, -4e9, 2.9e10), (1e7, 0, 0)]:
        stationary = susceptibility_stationary(ds, dc, om, heavy, 1e16, cell)
        averaged = doppler_susceptibility(ds, dc, om, heavy, cell)
        assert abs(averaged - stationary) / abs(stationary) < 1e-3


def test_geometry_changes_response(atom, cell):
    omega = rabi_frequency(0.5, 100e-6, atom.dipole_ed)
    a = doppler_susceptibility(-0.65 * GHZ, -0.65 * GHZ, omega, atom, cell, "counter")
    b = doppler_susceptibility(-0.65 * GHZ, -0.65 * GHZ, omega, atom, cell, "co")
    assert abs(a - b) > 1e-3 * abs(a)


def test_default_route_is_node_independent(atom, cell):
    omega = rabi_frequency(0.5, 100e-6, atom.dipole_ed)
    d = np.linspace(-3, 3, 21) * GHZ
    a = doppler_susceptibility(d, d, omega, atom, cell, nodes=64)
    b = doppler_susceptibility(d, d, omega, atom, cell, nodes=128)
    assert np.max(np.abs(a - b) / np.abs(a)) < 1e-6


def test_gauss_hermite_converges_toward_exact_when_lines_are_broad(atom):
    # with the homogeneous width comparable to the Doppler width the quadrature is well resolved
    cell = VaporCell(temperature=332.0, extra_dephasing=2 * np.pi * 300e6)
    d = np.linspace(-3, 3, 7) * GHZ
    exact = doppler_susceptibility(d, d, 1e10, atom, cell)
    gh = doppler_susceptibility(d, d, 1e10, atom, cell, method="gauss_hermite", nodes=128)
    assert np.max(np.abs(gh - exact) / np.abs(exact)) < 1e-4


def test_quadrature_node_validation(atom, cell):
    with pytest.raises(ConfigError):
        doppler_susceptibility(0.0, 0.0, 0.0, atom, cell, method="gauss_hermite", nodes=4)
    with pytest.raises(ConfigError):
        doppler_susceptibility(0.0, 0.0, 0.0, atom, cell, method="simpson")
    with pytest.raises(ConfigError):
        doppler_susceptibility(0.0, 0.0, 0.0, atom, cell, geometry="sideways")


def test_thermal_speed(atom):
    assert thermal_speed(332.0, atom.mass) == pytest.approx(np.sqrt(2 * k_B * 332.0 / atom.mass))


# --------------------------------------------------------- optical response


def test_empty_cell_response(atom):
    empty = VaporCell(number_density=0.0)
    r = optical_response(FieldConfig.from_ghz(-0.65, -0.65), atom, empty, L_C)
    assert r.chi == 0 and r.alpha == 0 and r.transmission_single_pass == 1
    assert r.phase == atom.k_s * L_C


def test_absorption_definition(atom, cell, operating_field):
    r = optical_response(operating_field, atom, cell, L_C)
    assert r.n == refractive_index(r.chi)
    assert r.alpha == pytest.approx(2 * atom.k_s * r.n.imag, rel=1e-15)
    assert r.transmission_single_pass == pytest.approx(np.exp(-r.alpha * cell.length_v))


def test_control_off_transmission_at_operating_detuning(atom, cell, operating_field):
    off = optical_response(operating_field.control_off(), atom, cell, L_C)
    assert off.transmission_single_pass > 0.5


def test_susceptibility_doppler_uses_config(atom, cell, operating_field):
    omega = rabi_frequency(0.5, 100e-6, atom.dipole_ed)
    assert susceptibility_doppler(operating_field, atom, cell) == doppler_susceptibility(
        operating_field.delta_s, operating_field.delta_c, omega, atom, cell
    )


# -------------------------------------------------------------- phase shift


def test_phase_shift_zero_without_control(atom, cell, operating_field):
    off = operating_field.control_off()
    assert phase_shift(off, off, atom, cell, L_C) == 0.0


def test_phase_shift_preconditions(atom, cell, operating_field):
    with pytest.raises(PreconditionError):
        phase_shift(operating_field, operating_field, atom, cell, L_C)
    other = replace(operating_field.control_off(), delta_s=0.0)
    with pytest.raises(PreconditionError):
        phase_shift(operating_field, other, atom, cell, L_C)


def test_phase_shift_antisymmetric_under_mirrored_detunings(atom, cell):
    omega = rabi_frequency(0.3, 100e-6, atom.dipole_ed)
    for ds, dc in [(-0.65, -0.65), (-2.0, -2.0), (0.5, -1.5)]:
        chi = doppler_susceptibility(ds * GHZ, dc * GHZ, omega, atom, cell)
        chi_mirror = doppler_susceptibility(-ds * GHZ, -dc * GHZ, omega, atom, cell)
        assert chi_mirror == pytest.approx(-np.conj(chi), rel=1e-12)
        on = FieldConfig.from_ghz(ds, dc, control_power=0.3)
        mirror = FieldConfig.from_ghz(-ds, -dc, control_power=0.3)
        a = phase_shift(on, on.control_off(), atom, cell, L_C)
        b = phase_shift(mirror, mirror.control_off(), atom, cell, L_C)
        assert a != 0
        # sqrt(1 + chi) adds terms even in chi at second order, of relative size ~|chi|
        assert b == pytest.approx(-a, rel=1e-4)


def test_operating_point_supports_pi_switch(atom, cell, operating_field):
    dphi = phase_shift(operating_field, operating_field.control_off(), atom, cell, L_C)
    assert abs(dphi) > np.pi
    assert wrap_phase(dphi) == pytest.approx(dphi + 2 * np.pi)


def test_far_detuned_phase_decreases_with_detuning(atom, cell):
    values = []
    for d in np.linspace(4.0, 12.0, 9):
        on = FieldConfig.from_ghz(-d, -d, control_power=0.5)
        values.append(abs(phase_shift(on, on.control_off(), atom, cell, L_C)))
    assert np.all(np.diff(values) < 0)


@given(st.floats(-50.0, 50.0))
def test_wrap_phase_range(phi):
    w = wrap_phase(phi)
    assert -np.pi < w <= np.pi
    assert np.isclose(np.cos(w), np.cos(phi), atol=1e-9)
