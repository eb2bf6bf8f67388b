import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import ndimage

from rbswitch import FieldConfig, VaporCell
from rbswitch.atomic import rabi_frequency
from rbswitch.errors import ConfigError, DomainError, OutputError
from rbswitch.sweeps import (
    TRANSMISSION_LEVELS,
    SweepGrid,
    contour_polygons,
    sweep_2d,
    sweep_contrast_diagonal,
    transmission_masks,
    write_contours_json,
    write_diagonal_csv,
    write_matrix_csv,
)

FIELD = FieldConfig(0.0, 0.0, control_power=0.5)


@pytest.fixture(scope="module")
def grid(request):
    atom = request.getfixturevalue("atom")
    cell = request.getfixturevalue("cell")
    return sweep_2d((-3, 3), (-3, 3), 120, FIELD, atom, cell)


@pytest.fixture(scope="module")
def diagonal(request):
    atom = request.getfixturevalue("atom")
    cell = request.getfixturevalue("cell")
    cavity = request.getfixturevalue("cavity")
    return sweep_contrast_diagonal(np.linspace(-3, 3, 61), FIELD, atom, cell, cavity)


# ------------------------------------------------------------------ 2-D map


def test_grid_shapes_and_axes(grid):
    assert grid.values_phase.shape == (120, 120)
    assert grid.values_transmission.shape == (120, 120)
    assert grid.delta_s_axis[0] == -3 and grid.delta_c_axis[-1] == 3
    assert np.all((grid.values_transmission >= 0) & (grid.values_transmission <= 1))


def test_no_control_no_phase(atom, cell):
    g = sweep_2d((-3, 3), (-3, 3), 25, FieldConfig(0.0, 0.0, control_power=0.0), atom, cell)
    assert np.max(np.abs(g.values_phase)) == 0.0


def test_far_detuned_corner_is_transparent(atom, cell):
    g = sweep_2d((-30, -20), (-30, -20), 5, FIELD, atom, cell)
    assert g.values_transmission.min() > 0.999
    assert np.max(np.abs(g.values_phase)) < 1e-2


def test_transparent_region_with_phase_in_detuned_quadrant(grid):
    quadrant = (grid.delta_s_axis[None, :] < 0) & (grid.delta_c_axis[:, None] < 0)
    useful = (grid.values_transmission > 0.95) & (np.abs(grid.values_phase) > np.pi / 2) & quadrant
    labels, count = ndimage.label(useful)
    assert count >= 1
    assert np.bincount(labels.ravel())[1:].max() >= 100


def test_dressed_resonances_absorb(atom, grid):
    # on-state absorption sits where the control-dressed states are resonant
    omega = rabi_frequency(FIELD.control_power, FIELD.beam_waist, atom.dipole_ed) / (2 * np.pi * 1e9)
    checked = 0
    for j, dc in enumerate(grid.delta_c_axis[::10]):
        for sign in (1, -1):
            ds = (-dc + sign * np.hypot(dc, omega)) / 2
            if -2.9 < ds < 2.9:
                i = np.argmin(np.abs(grid.delta_s_axis - ds))
                window = grid.values_transmission[10 * j, max(i - 2, 0) : i + 3]
                assert window.min() < 0.5
                checked += 1
    assert checked >= 10


def test_mask_nesting(grid):
    masks = grid.masks
    assert set(masks) == set(TRANSMISSION_LEVELS)
    assert np.all(masks[0.95] <= masks[0.8])
    assert np.all(masks[0.8] <= masks[0.5])
    assert masks[0.95].any() and not masks[0.5].all()


def test_phase_mirror_symmetry(atom, cell):
    g = sweep_2d((-2, 2), (-2, 2), 21, FIELD, atom, cell)
    # the mirror is exact for chi and holds to first order in chi for the phase
    np.testing.assert_allclose(g.values_phase, -g.values_phase[::-1, ::-1], atol=1e-3)
    np.testing.assert_allclose(g.values_transmission, g.values_transmission[::-1, ::-1], atol=1e-4)


def test_rectangular_resolution(atom, cell):
    g = sweep_2d((-1, 1), (-2, 2), (7, 5), FIELD, atom, cell)
    assert g.values_phase.shape == (5, 7)


@pytest.mark.parametrize("resolution", [1, 0, (3, 1), 2.5])
def test_bad_resolution(resolution):
    with pytest.raises(DomainError):
        sweep_2d((-1, 1), (-1, 1), resolution, FIELD)


def test_grid_validation():
    with pytest.raises(DomainError):
        SweepGrid(np.array([0.0, 1.0]), np.array([0.0, 1.0]), np.zeros((2, 3)), np.zeros((2, 2)))
    with pytest.raises(DomainError):
        SweepGrid(np.array([1.0, 0.0]), np.array([0.0, 1.0]), np.zeros((2, 2)), np.zeros((2, 2)))


@given(st.lists(st.floats(0.01, 0.99), min_size=1, max_size=4, unique=True))
def test_masks_nest_for_any_levels(levels):
    rng = np.random.default_rng(0)
    g = SweepGrid(np.arange(6.0), np.arange(5.0), np.zeros((5, 6)), rng.random((5, 6)))
    masks = transmission_masks(g, sorted(levels))
    ordered = sorted(masks)
    for lo, hi in zip(ordered, ordered[1:]):
        assert np.all(masks[hi] <= masks[lo])


def test_contours_are_inside_axes(grid):
    polys = contour_polygons(grid)
    assert set(polys) == set(TRANSMISSION_LEVELS)
    for lines in polys.values():
        assert lines
        for line in lines:
            pts = np.asarray(line)
            assert pts.shape[1] == 2
            assert np.all(np.abs(pts) <= 3 + 1e-9)


# ---------------------------------------------------------------- diagonal


def _at(points, x):
    return min(points, key=lambda p: abs(p.detuning_ghz - x))


def test_diagonal_is_even(diagonal):
    c = np.array([p.contrast for p in diagonal])
    dphi = np.array([p.dphi for p in diagonal])
    np.testing.assert_allclose(c, c[::-1], atol=1e-4)
    np.testing.assert_allclose(dphi, -dphi[::-1], atol=1e-3)


def test_operating_point_contrast(diagonal):
    assert _at(diagonal, -0.65).contrast == pytest.approx(0.89, abs=0.1)
    assert 2.0 <= _at(diagonal, -0.65).insertion_loss_db <= 5.0


def test_dressed_resonance_spoils_the_switch(diagonal):
    worst = min(diagonal, key=lambda p: p.contrast)
    assert worst.contrast < 0
    assert worst.insertion_loss_db > 20
    assert 1.3 < abs(worst.detuning_ghz) < 2.0


def test_contrast_tails_off_far_from_resonance(diagonal):
    tail = [p.contrast for p in diagonal if p.detuning_ghz >= 2.1]
    assert np.all(np.diff(tail) < 0)
    assert tail[-1] < 0.5


def test_contrast_grows_with_power_until_pi(atom, cell, cavity):
    values = []
    for power in np.linspace(0.0, 2.0, 21):
        (p,) = sweep_contrast_diagonal([-4.0], FieldConfig(0, 0, control_power=power), atom, cell, cavity)
        assert abs(p.dphi) < np.pi
        values.append(p.contrast)
    assert values[0] == pytest.approx(0.0, abs=1e-12)
    assert np.all(np.diff(values) > 0)


def test_bias_policies_on_diagonal(atom, cell, cavity):
    on = sweep_contrast_diagonal([-2.5], FIELD, atom, cell, cavity)[0]
    off = sweep_contrast_diagonal([-2.5], FIELD, atom, cell, cavity, bias_policy="control_off_resonant")[0]
    assert on.dphi == off.dphi
    assert off.contrast < 0 < on.contrast
    with pytest.raises(ConfigError):
        sweep_contrast_diagonal([-2.5], FIELD, atom, cell, cavity, bias_policy="bogus")
    with pytest.raises(DomainError):
        sweep_contrast_diagonal([], FIELD, atom, cell, cavity)


# --------------------------------------------------------------------- I/O


def test_matrix_csv_layout(tmp_path, atom, cell):
    g = sweep_2d((-1, 1), (-2, 2), (4, 3), FIELD, atom, cell)
    path = write_matrix_csv(g, tmp_path / "phase.csv")
    rows = [line.split(",") for line in path.read_text().splitlines()]
    assert rows[0][0] == "4" and len(rows[0]) == 5
    assert len(rows) == 4 and all(len(r) == 5 for r in rows[1:])
    np.testing.assert_allclose([float(r[0]) for r in rows[1:]], g.delta_c_axis)
    np.testing.assert_allclose(np.array([[float(v) for v in r[1:]] for r in rows[1:]]), g.values_phase, rtol=1e-8)
    with pytest.raises(ConfigError):
        write_matrix_csv(g, tmp_path / "x.csv", "absorption")
    with pytest.raises(OutputError):
        write_matrix_csv(g, tmp_path / "missing" / "x.csv")


def test_outputs_are_deterministic(tmp_path, atom, cell, cavity):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    for out in (a, b):
        g = sweep_2d((-3, 3), (-3, 3), 30, FIELD, atom, cell)
        write_matrix_csv(g, out / "t.csv", "transmission")
        write_contours_json(g, out / "c.json")
        write_diagonal_csv(sweep_contrast_diagonal(np.linspace(-3, 3, 13), FIELD, atom, cell, cavity), out / "d.csv")
    for name in ("t.csv", "c.json", "d.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    data = json.loads((a / "c.json").read_text())
    assert set(data["levels"]) == {"0.5", "0.8", "0.95"}
    header = (a / "d.csv").read_text().splitlines()[0]
    assert header.startswith("detuning_ghz,contrast,insertion_loss_db")


def test_empty_cell_diagonal_has_no_contrast(atom, cavity):
    pts = sweep_contrast_diagonal(np.linspace(-1, 1, 5), FIELD, atom, VaporCell(number_density=0.0), cavity)
    assert all(p.contrast == pytest.approx(0.0, abs=1e-12) for p in pts)
