"""Parameter-space sweeps: the (signal, control) detuning map and the diagonal contrast scan.

External axes are ordinary frequencies in GHz; conversion to rad/s happens
only through :func:`rbswitch.constants.ghz_to_rad_s`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from dataclasses import field as dc_field
from pathlib import Path

import contourpy
import numpy as np

from .atomic import FieldConfig, LadderAtom, VaporCell, doppler_susceptibility, rabi_frequency
from .cavity import RingCavity, reflection, transmission
from .constants import ghz_to_rad_s
from .dynamics import BIAS_POLICIES
from .errors import ConfigError, DomainError, OutputError
from .metrics import contrast, insertion_loss_db, intracavity_loss

__all__ = [
    "TRANSMISSION_LEVELS",
    "DEFAULT_DETUNING_AXIS_GHZ",
    "SweepGrid",
    "DiagonalPoint",
    "sweep_2d",
    "transmission_masks",
    "contour_polygons",
    "sweep_contrast_diagonal",
    "diagonal_contrast",
    "write_matrix_csv",
    "write_contours_json",
    "write_diagonal_csv",
]

TRANSMISSION_LEVELS = (0.5, 0.8, 0.95)
DEFAULT_DETUNING_AXIS_GHZ = np.linspace(-3.0, 3.0, 121)


def _check_axis(axis, name: str) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    if axis.ndim != 1 or axis.size < 2:
        raise DomainError(f"{name} needs at least 2 points")
    if np.any(np.diff(axis) <= 0):
        raise DomainError(f"{name} must be strictly increasing")
    return axis


@dataclass(frozen=True)
class SweepGrid:
    """Phase shift and control-on single-pass transmission on a detuning grid.

    Matrices are indexed ``[i_c, i_s]``: rows follow ``delta_c_axis`` and
    columns ``delta_s_axis``, both in GHz.
    """

    delta_s_axis: np.ndarray
    delta_c_axis: np.ndarray
    values_phase: np.ndarray
    values_transmission: np.ndarray
    masks: dict = dc_field(default_factory=dict, compare=False)

    def __post_init__(self):
        ds = _check_axis(self.delta_s_axis, "delta_s_axis")
        dc = _check_axis(self.delta_c_axis, "delta_c_axis")
        shape = (dc.size, ds.size)
        for name in ("values_phase", "values_transmission"):
            if np.shape(getattr(self, name)) != shape:
                raise DomainError(f"{name} has shape {np.shape(getattr(self, name))}, expected {shape}")


def _resolution(resolution) -> tuple[int, int]:
    n_s, n_c = (resolution, resolution) if np.ndim(resolution) == 0 else tuple(resolution)
    if int(n_s) != n_s or int(n_c) != n_c or n_s < 2 or n_c < 2:
        raise DomainError(f"resolution must be >= 2 points per axis, got {resolution!r}")
    return int(n_s), int(n_c)


def sweep_2d(
    delta_s_range_ghz=(-3.0, 3.0),
    delta_c_range_ghz=(-3.0, 3.0),
    resolution=121,
    field: FieldConfig | None = None,
    atom: LadderAtom | None = None,
    cell: VaporCell | None = None,
    *,
    method: str = "faddeeva",
    nodes: int = 64,
) -> SweepGrid:
    """Map the control-induced phase shift over independent signal and control detunings.

    Args:
        delta_s_range_ghz: (low, high) signal detuning range, GHz.
        delta_c_range_ghz: (low, high) control detuning range, GHz.
        resolution: points per axis, an int or ``(n_s, n_c)``.
        field: supplies control power, waist and geometry; its detunings are ignored.
        atom, cell: medium; defaults are the packaged table and default cell.
        method, nodes: Doppler-average route, see :func:`doppler_susceptibility`.

    Returns:
        :class:`SweepGrid` whose ``masks`` hold the on-state transmission masks
        at :data:`TRANSMISSION_LEVELS`.
    """
    n_s, n_c = _resolution(resolution)
    field = FieldConfig(0.0, 0.0) if field is None else field
    atom = LadderAtom.from_table() if atom is None else atom
    cell = VaporCell() if cell is None else cell
    ds_axis = np.linspace(*delta_s_range_ghz, n_s)
    dc_axis = np.linspace(*delta_c_range_ghz, n_c)
    _check_axis(ds_axis, "delta_s_axis")
    _check_axis(dc_axis, "delta_c_axis")
    ds = ghz_to_rad_s(ds_axis)[None, :]
    dc = ghz_to_rad_s(dc_axis)[:, None]
    omega = rabi_frequency(field.control_power, field.beam_waist, atom.dipole_ed)
    chi_on = doppler_susceptibility(ds, dc, omega, atom, cell, field.geometry, method=method, nodes=nodes)
    chi_off = doppler_susceptibility(ds, dc, 0.0, atom, cell, field.geometry, method=method, nodes=nodes)
    n_on = np.sqrt(1 + np.broadcast_to(chi_on, (n_c, n_s)))
    n_off = np.sqrt(1 + np.broadcast_to(chi_off, (n_c, n_s)))
    dphi = atom.k_s * cell.length_v * (n_on.real - n_off.real)
    t_on = np.exp(-2 * atom.k_s * n_on.imag * cell.length_v)
    grid = SweepGrid(ds_axis, dc_axis, dphi, t_on)
    return replace(grid, masks=transmission_masks(grid))


def transmission_masks(grid: SweepGrid, levels=TRANSMISSION_LEVELS) -> dict:
    """Boolean masks ``T > level``; a higher level's mask lies inside a lower one's."""
    return {float(level): grid.values_transmission > level for level in levels}


def contour_polygons(grid: SweepGrid, levels=TRANSMISSION_LEVELS) -> dict:
    """Iso-transmission lines as lists of ``[[delta_s, delta_c], ...]`` in GHz, keyed by level."""
    gen = contourpy.contour_generator(
        grid.delta_s_axis, grid.delta_c_axis, grid.values_transmission, line_type=contourpy.LineType.Separate
    )
    return {float(level): [np.round(line, 12).tolist() for line in gen.lines(level)] for level in levels}


@dataclass(frozen=True)
class DiagonalPoint:
    detuning_ghz: float
    contrast: float
    insertion_loss_db: float
    intracavity_loss: float
    t_on: float
    t_off: float
    r_on: float
    dphi: float


def _diagonal_arrays(axis_ghz, field: FieldConfig, atom, cell, cavity, bias_policy, method, nodes):
    if bias_policy not in BIAS_POLICIES:
        raise ConfigError(f"bias_policy must be one of {BIAS_POLICIES}, got {bias_policy!r}")
    d = ghz_to_rad_s(axis_ghz)
    omega = rabi_frequency(field.control_power, field.beam_waist, atom.dipole_ed)
    chi_on = doppler_susceptibility(d, d, omega, atom, cell, field.geometry, method=method, nodes=nodes)
    chi_off = doppler_susceptibility(d, d, 0.0, atom, cell, field.geometry, method=method, nodes=nodes)
    n_on, n_off = np.sqrt(1 + chi_on), np.sqrt(1 + chi_off)
    dphi = atom.k_s * cell.length_v * (n_on.real - n_off.real)
    tsp_on = np.exp(-2 * atom.k_s * n_on.imag * cell.length_v)
    tsp_off = np.exp(-2 * atom.k_s * n_off.imag * cell.length_v)
    if bias_policy == "control_on_resonant":
        phi_off = -dphi
    elif bias_policy == "control_off_resonant":
        phi_off = np.zeros_like(dphi)
    else:
        base = atom.k_s * ((n_off.real - 1) * cell.length_v + cavity.round_trip_length)
        phi_off = base + cavity.bias_phase
    phi_on = phi_off + dphi
    t_on = np.asarray(transmission(phi_on, cavity, loss_factor=tsp_on))
    t_off = np.asarray(transmission(phi_off, cavity, loss_factor=tsp_off))
    r_on = np.asarray(reflection(phi_on, cavity, loss_factor=tsp_on))
    return dphi, t_on, t_off, r_on


def diagonal_contrast(
    detuning_axis_ghz,
    field: FieldConfig,
    atom: LadderAtom,
    cell: VaporCell,
    cavity: RingCavity,
    *,
    bias_policy: str = "control_on_resonant",
    method: str = "faddeeva",
    nodes: int = 64,
) -> np.ndarray:
    """Steady-state contrast along ``delta_c = delta_s`` as a plain array (the fit's model)."""
    axis = np.atleast_1d(np.asarray(detuning_axis_ghz, dtype=float))
    _, t_on, t_off, _ = _diagonal_arrays(axis, field, atom, cell, cavity, bias_policy, method, nodes)
    return np.asarray(contrast(t_on, t_off))


def sweep_contrast_diagonal(
    detuning_axis_ghz=DEFAULT_DETUNING_AXIS_GHZ,
    field: FieldConfig | None = None,
    atom: LadderAtom | None = None,
    cell: VaporCell | None = None,
    cavity: RingCavity | None = None,
    *,
    bias_policy: str = "control_on_resonant",
    method: str = "faddeeva",
    nodes: int = 64,
) -> list[DiagonalPoint]:
    """Steady-state switch figures of merit with both lasers stepped together.

    The detunings in ``field`` are ignored: every point uses
    ``delta_c = delta_s = detuning``.  The cavity bias is re-chosen at each
    detuning according to ``bias_policy``.
    """
    field = FieldConfig(0.0, 0.0) if field is None else field
    atom = LadderAtom.from_table() if atom is None else atom
    cell = VaporCell() if cell is None else cell
    cavity = RingCavity() if cavity is None else cavity
    axis = np.atleast_1d(np.asarray(detuning_axis_ghz, dtype=float))
    if axis.ndim != 1 or axis.size < 1:
        raise DomainError("detuning axis must be a non-empty 1-D array")
    dphi, t_on, t_off, r_on = _diagonal_arrays(axis, field, atom, cell, cavity, bias_policy, method, nodes)
    c = np.asarray(contrast(t_on, t_off))
    il = np.asarray(insertion_loss_db(t_on))
    loss = np.asarray(intracavity_loss(t_on, r_on))
    return [
        DiagonalPoint(float(a), float(ci), float(ili), float(li), float(ton), float(toff), float(ron), float(dp))
        for a, ci, ili, li, ton, toff, ron, dp in zip(axis, c, il, loss, t_on, t_off, r_on, dphi)
    ]


def _write(path: str | Path, text: str) -> Path:
    path = Path(path)
    try:
        path.write_text(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path


def write_matrix_csv(grid: SweepGrid, path: str | Path, quantity: str = "phase") -> Path:
    """gnuplot ``nonuniform matrix`` layout.

    The first row is the column count followed by the signal-detuning axis;
    every later row is one control detuning followed by its values.
    """
    values = {"phase": grid.values_phase, "transmission": grid.values_transmission}
    if quantity not in values:
        raise ConfigError(f"quantity must be 'phase' or 'transmission', got {quantity!r}")
    z = values[quantity]
    fmt = "{:.9e}".format
    lines = [",".join([str(grid.delta_s_axis.size)] + [fmt(x) for x in grid.delta_s_axis])]
    for y, row in zip(grid.delta_c_axis, z):
        lines.append(",".join([fmt(y)] + [fmt(v) for v in row]))
    return _write(path, "\n".join(lines) + "\n")


def write_contours_json(grid: SweepGrid, path: str | Path, levels=TRANSMISSION_LEVELS) -> Path:
    polygons = contour_polygons(grid, levels)
    payload = {
        "quantity": "single_pass_transmission_control_on",
        "axes": {"x": "delta_s_ghz", "y": "delta_c_ghz"},
        "levels": {f"{level:g}": lines for level, lines in polygons.items()},
    }
    return _write(path, json.dumps(payload, indent=1) + "\n")


def write_diagonal_csv(points: list[DiagonalPoint], path: str | Path) -> Path:
    header = "detuning_ghz,contrast,insertion_loss_db,intracavity_loss,t_on,t_off,r_on,dphi_rad"
    lines = [header]
    for p in points:
        lines.append(
            f"{p.detuning_ghz:.6f},{p.contrast:.9e},{p.insertion_loss_db:.9e},{p.intracavity_loss:.9e},"
            f"{p.t_on:.9e},{p.t_off:.9e},{p.r_on:.9e},{p.dphi:.9e}"
        )
    return _write(path, "\n".join(lines) + "\n")
