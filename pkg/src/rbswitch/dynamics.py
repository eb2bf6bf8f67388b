"""Time-domain switching: round-trip field map under a pulsed control envelope.

The circulating field obeys ``E(t) = t1 E_in + a(t) exp(i phi(t)) E(t - t_rt)``
with ``a(t) = r1 r2 sqrt(eta * T_vapor(t))``.  The vapor follows the control
envelope instantaneously: phase and absorption are interpolated between their
control-off and control-on steady-state values with the envelope ``s(t)`` in
[0, 1].  Port outputs follow the field model in :mod:`rbswitch.cavity`.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .atomic import FieldConfig, LadderAtom, VaporCell, optical_response
from .cavity import RingCavity, finesse, resonant_bias, ring_up_time
from .errors import ConfigError, DomainError, OutputError, PreconditionError
from .metrics import SwitchMetrics

__all__ = [
    "ControlPulseTrain",
    "TimeTrace",
    "BIAS_POLICIES",
    "switch_phases",
    "control_envelope",
    "simulate_switching",
    "phase_step_response",
    "rise_time",
    "window_metrics",
    "write_trace_csv",
    "read_trace_csv",
    "write_metrics_json",
]

log = logging.getLogger(__name__)

BIAS_POLICIES = ("control_on_resonant", "control_off_resonant", "fixed")
TRACE_HEADER = "t_s,transmitted,reflected,control_on"


@dataclass(frozen=True)
class ControlPulseTrain:
    """Square control modulation.

    ``peak_power`` is the control power before the cavity; the intra-cavity
    power is ``peak_power * enhancement``.  ``pulse_duration``, when set,
    replaces ``duty``.
    """

    modulation_rate: float = 2e6
    duty: float = 0.5
    pulse_duration: float | None = None
    peak_power: float = 25e-3
    enhancement: float = 18.0
    edge_time: float = 1e-9

    def __post_init__(self):
        if not self.modulation_rate > 0:
            raise DomainError("modulation_rate must be > 0")
        if not 0 < self.duty < 1:
            raise DomainError(f"duty must lie in (0, 1), got {self.duty!r}")
        if self.pulse_duration is not None and not 0 < self.pulse_duration * self.modulation_rate < 1:
            raise DomainError("pulse_duration must be positive and shorter than one modulation period")
        if self.peak_power < 0:
            raise DomainError("peak_power must be >= 0")
        if not self.enhancement > 0:
            raise DomainError("enhancement must be > 0")
        if self.edge_time < 0:
            raise DomainError("edge_time must be >= 0")

    @property
    def period(self) -> float:
        return 1.0 / self.modulation_rate

    @property
    def on_time(self) -> float:
        return self.pulse_duration if self.pulse_duration is not None else self.duty * self.period

    @property
    def intracavity_power(self) -> float:
        return self.peak_power * self.enhancement


@dataclass(frozen=True)
class TimeTrace:
    """Port intensities normalized to the input signal power."""

    dt: float
    samples_T: np.ndarray
    samples_R: np.ndarray
    control_mask: np.ndarray
    tau: float | None = None

    def __post_init__(self):
        n = len(self.samples_T)
        if len(self.samples_R) != n or len(self.control_mask) != n:
            raise DomainError("trace arrays must have equal length")
        if np.any(np.asarray(self.samples_T) < 0) or np.any(np.asarray(self.samples_R) < 0):
            raise DomainError("trace intensities must be >= 0")

    @property
    def t(self) -> np.ndarray:
        return np.arange(len(self.samples_T)) * self.dt


def switch_phases(
    cavity: RingCavity,
    atom: LadderAtom,
    cell: VaporCell,
    config_on: FieldConfig,
    bias_policy: str = "control_on_resonant",
    method: str = "faddeeva",
    nodes: int = 64,
) -> dict:
    """Biased round-trip phases and vapor transmissions for control off and on.

    Returns a dict with ``phi_off``/``phi_on`` (total phase relative to the
    nearest cavity resonance under the chosen bias, on stays continuous with
    off so the swept path is physical), ``dphi`` (unwrapped atomic phase shift),
    ``tsp_off``/``tsp_on``, and ``bias``.
    """
    if bias_policy not in BIAS_POLICIES:
        raise ConfigError(f"bias_policy must be one of {BIAS_POLICIES}, got {bias_policy!r}")
    L_c = cavity.round_trip_length
    on = optical_response(config_on, atom, cell, L_c, method, nodes)
    off = optical_response(config_on.control_off(), atom, cell, L_c, method, nodes)
    dphi = atom.k_s * cell.length_v * (on.n.real - off.n.real)
    if bias_policy == "control_on_resonant":
        bias = resonant_bias(on.phase)
    elif bias_policy == "control_off_resonant":
        bias = resonant_bias(off.phase)
    else:
        bias = cavity.bias_phase
    phi_off = float(np.pi - np.mod(np.pi - (off.phase + bias), 2 * np.pi))
    return {
        "phi_off": phi_off,
        "phi_on": phi_off + dphi,
        "dphi": float(dphi),
        "tsp_off": off.transmission_single_pass,
        "tsp_on": on.transmission_single_pass,
        "bias": bias,
    }


def control_envelope(t, pulses: ControlPulseTrain) -> np.ndarray:
    """Trapezoidal envelope in [0, 1].

    Within each period the on-window is centred, so the trace starts and ends
    mid-way through an off-window.

    Edges are linear ramps centred on the nominal switching instants with the
    requested 10-90 % time.
    """
    t = np.asarray(t, dtype=float)
    period, on_time = pulses.period, pulses.on_time
    ramp = pulses.edge_time / 0.8
    k = np.floor(t / period)
    s = np.zeros_like(t)
    # neighbouring pulses whose edges may spill into this period
    for shift in (-1.0, 0.0, 1.0):
        start = (k + shift) * period + (period - on_time) / 2
        stop = start + on_time
        if ramp > 0:
            s = s + np.clip(np.minimum((t - start) / ramp + 0.5, (stop - t) / ramp + 0.5), 0.0, 1.0)
        else:
            s = s + ((t >= start) & (t < stop))
    return np.clip(s, 0.0, 1.0)


def _field_map(cavity: RingCavity, phi: np.ndarray, sqrt_eta: np.ndarray, dt: float):
    """Iterate the round-trip map; returns transmitted and reflected intensities.

    ``phi`` and ``sqrt_eta`` are per-sample round-trip phase and amplitude
    survival.  The history before the first sample is the steady state of the
    first sample's settings.
    """
    n = len(phi)
    step = cavity.r1 * cavity.r2 * sqrt_eta * np.exp(1j * phi)
    delay = cavity.round_trip_time / dt
    m0 = int(np.floor(delay + 1e-9))
    frac = delay - m0
    if frac < 1e-9:
        frac = 0.0
    pad = m0 + 1
    hist = np.full(n + pad, cavity.t1 / (1 - step[0]), dtype=complex)  # hist[i + pad] = E[i]
    E_del = np.empty(n, dtype=complex)
    # E[i] depends only on samples >= m0 steps back, so blocks of m0 are independent
    for start in range(0, n, m0):
        stop = min(start + m0, n)
        idx = np.arange(start, stop) + pad
        delayed = hist[idx - m0]
        if frac:
            delayed = (1 - frac) * delayed + frac * hist[idx - m0 - 1]
        E_del[start:stop] = delayed
        hist[idx] = cavity.t1 + step[start:stop] * delayed
    E_ret = cavity.r2 * sqrt_eta * np.exp(1j * phi) * E_del
    samples_T = np.abs(cavity.t2 * sqrt_eta * E_del) ** 2
    samples_R = np.abs(cavity.r1 - cavity.t1 * E_ret) ** 2
    return samples_T, samples_R


def phase_step_response(
    cavity: RingCavity,
    phi_before: float,
    phi_after: float,
    duration: float,
    *,
    step_time: float | None = None,
    dt: float | None = None,
    samples_per_round_trip: int = 8,
) -> TimeTrace:
    """Cavity response to an instantaneous round-trip phase step.

    No vapor is involved; ``control_mask`` marks the samples after the step.
    ``step_time`` defaults to a quarter of ``duration``.
    """
    t_rt = cavity.round_trip_time
    dt = t_rt / samples_per_round_trip if dt is None else dt
    if not 0 < dt <= t_rt / 4 * (1 + 1e-12):
        raise ConfigError(f"dt = {dt:.4g} s must lie in (0, t_rt/4 = {t_rt / 4:.4g} s]")
    n = int(round(duration / dt))
    step_time = duration / 4 if step_time is None else step_time
    mask = np.arange(n) * dt >= step_time
    if mask.all() or not mask.any():
        raise ConfigError("step_time must fall inside the simulated duration")
    phi = np.where(mask, phi_after, phi_before).astype(float)
    samples_T, samples_R = _field_map(cavity, phi, np.full(n, np.sqrt(cavity.eta)), dt)
    tau = ring_up_time(finesse(cavity), cavity.round_trip_length)
    return TimeTrace(dt=dt, samples_T=samples_T, samples_R=samples_R, control_mask=mask, tau=tau)


def simulate_switching(
    cavity: RingCavity,
    atom: LadderAtom,
    cell: VaporCell,
    field_base: FieldConfig,
    pulses: ControlPulseTrain,
    duration: float,
    *,
    dt: float | None = None,
    samples_per_round_trip: int = 8,
    bias_policy: str = "control_on_resonant",
    method: str = "faddeeva",
    nodes: int = 64,
) -> TimeTrace:
    """Iterate the round-trip map over ``duration`` seconds.

    The control-on state uses the pulse train's intra-cavity power; every other
    field setting comes from ``field_base``.  The history before ``t = 0`` is
    the steady state of the initial control state.
    """
    t_rt = cavity.round_trip_time
    if dt is None:
        dt = t_rt / samples_per_round_trip
    if not 0 < dt <= t_rt / 4 * (1 + 1e-12):
        raise ConfigError(f"dt = {dt:.4g} s must lie in (0, t_rt/4 = {t_rt / 4:.4g} s]")
    if duration < 2 * pulses.period:
        raise ConfigError(f"duration {duration:.4g} s must cover at least two modulation periods")

    config_on = replace(field_base, control_power=pulses.intracavity_power)
    ph = switch_phases(cavity, atom, cell, config_on, bias_policy, method, nodes)
    log.debug("switch phases %s", ph)

    n = int(round(duration / dt))
    t = np.arange(n) * dt
    s = control_envelope(t, pulses)
    phi = ph["phi_off"] + s * ph["dphi"]
    log_tsp = np.log(ph["tsp_off"]) + s * (np.log(ph["tsp_on"]) - np.log(ph["tsp_off"]))
    sqrt_eta = np.sqrt(cavity.eta * np.exp(log_tsp))

    samples_T, samples_R = _field_map(cavity, phi, sqrt_eta, dt)
    tau = ring_up_time(finesse(cavity), cavity.round_trip_length)
    return TimeTrace(dt=dt, samples_T=samples_T, samples_R=samples_R, control_mask=s >= 0.5, tau=tau)


def _runs(mask: np.ndarray):
    """(value, start, stop) for each run of equal values."""
    edges = np.flatnonzero(np.diff(mask.astype(np.int8))) + 1
    bounds = np.concatenate(([0], edges, [len(mask)]))
    return [(bool(mask[a]), int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]


def _crossing(y: np.ndarray, level: float, start: int, dt: float) -> float | None:
    """First upward crossing of ``level`` at or after ``start``, linearly interpolated."""
    above = np.flatnonzero(y[start:] >= level)
    if above.size == 0:
        return None
    j = start + int(above[0])
    if j == 0 or y[j] == y[j - 1] or j == start:
        return j * dt
    return (j - 1 + (level - y[j - 1]) / (y[j] - y[j - 1])) * dt


def _level(y: np.ndarray, a: int, b: int) -> float:
    return float(np.median(y[a + (b - a) // 2 : b]))


def rise_time(trace: TimeTrace, port: str = "auto") -> float:
    """Mean 10-90 % time of the port that brightens at each off -> on transition.

    The start and end levels are the medians over the second halves of the
    preceding off-window and of the on-window, which keeps the switching edges
    themselves out of the level estimate.
    """
    mask = np.asarray(trace.control_mask, dtype=bool)
    runs = _runs(mask)
    segments = [
        (runs[k - 1][1], a, b) for k, (on, a, b) in enumerate(runs) if on and k > 0
    ]
    if not segments:
        raise PreconditionError("trace has no off -> on control transition")
    ports = {"transmitted": np.asarray(trace.samples_T), "reflected": np.asarray(trace.samples_R)}
    if port == "auto":
        def swing(y):
            return np.mean([_level(y, a, b) - _level(y, a0, a) for a0, a, b in segments])
        port = max(ports, key=lambda name: swing(ports[name]))
    if port not in ports:
        raise ConfigError(f"port must be 'auto', 'transmitted' or 'reflected', got {port!r}")
    y_all = ports[port]
    times = []
    for a0, a, b in segments:
        lo, hi = _level(y_all, a0, a), _level(y_all, a, b)
        y = y_all[: b] if hi >= lo else -y_all[: b]
        lo, hi = (lo, hi) if hi >= lo else (-lo, -hi)
        if hi == lo:
            continue
        t10 = _crossing(y, lo + 0.1 * (hi - lo), a - 1, trace.dt)
        t90 = _crossing(y, lo + 0.9 * (hi - lo), a - 1, trace.dt)
        if t10 is not None and t90 is not None:
            times.append(t90 - t10)
    if not times:
        raise PreconditionError("no transition with a measurable intensity swing")
    return float(np.mean(times))


def window_metrics(trace: TimeTrace, guard_band: float | None = None) -> SwitchMetrics:
    """Average port intensities over complete control-on and control-off windows.

    ``guard_band`` (default ``3 * trace.tau``) is dropped from the start of each
    window to skip the ring-up transient.  A window shorter than twice the guard
    band has no quasi-steady part and is averaged whole.
    """
    if guard_band is None:
        guard_band = 3 * trace.tau if trace.tau else 0.0
    mask = np.asarray(trace.control_mask, dtype=bool)
    runs = _runs(mask)[1:-1]
    if not any(on for on, _, _ in runs) or not any(not on for on, _, _ in runs):
        raise PreconditionError("trace must contain at least one complete on and one complete off window")
    guard = int(round(guard_band / trace.dt))
    picks = {True: [], False: []}
    for on, a, b in runs:
        if b - a >= 2 * guard:
            a += guard
        picks[on].append(np.arange(a, b))
    on_idx = np.concatenate(picks[True])
    off_idx = np.concatenate(picks[False])
    T = np.asarray(trace.samples_T)
    R = np.asarray(trace.samples_R)
    try:
        rt = rise_time(trace)
    except PreconditionError:
        rt = None
    return SwitchMetrics.from_levels(T[on_idx].mean(), T[off_idx].mean(), R[on_idx].mean(), rise_time_s=rt)


def write_trace_csv(trace: TimeTrace, path: str | Path) -> Path:
    path = Path(path)
    lines = [TRACE_HEADER]
    for t, T, R, on in zip(trace.t, trace.samples_T, trace.samples_R, trace.control_mask):
        lines.append(f"{t:.6e},{T:.9e},{R:.9e},{int(on)}")
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path


def read_trace_csv(path: str | Path) -> TimeTrace:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    dt = data[1, 0] - data[0, 0] if len(data) > 1 else 0.0
    return TimeTrace(dt=dt, samples_T=data[:, 1], samples_R=data[:, 2], control_mask=data[:, 3] > 0.5)


def write_metrics_json(metrics: SwitchMetrics | dict, path: str | Path) -> Path:
    path = Path(path)
    payload = metrics.to_dict() if isinstance(metrics, SwitchMetrics) else metrics
    try:
        path.write_text(json.dumps(payload, indent=2) + "\n")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path
