"""Figures of merit for the switch, from on/off intensities at the two ports."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "SwitchMetrics",
    "contrast",
    "extinction_db",
    "insertion_loss_db",
    "intracavity_loss",
]


def contrast(t_on, t_off):
    """(T_on - T_off) / (T_on + T_off)."""
    t_on = np.asarray(t_on, dtype=float)
    t_off = np.asarray(t_off, dtype=float)
    total = t_on + t_off
    if np.any(total <= 0):
        raise DomainError("contrast undefined: T_on + T_off = 0")
    c = (t_on - t_off) / total
    return c if c.ndim else float(c)


def extinction_db(t_on, t_off):
    with np.errstate(divide="ignore"):
        e = 10 * np.log10(np.asarray(t_on, dtype=float) / np.asarray(t_off, dtype=float))
    return e if e.ndim else float(e)


def insertion_loss_db(t_on):
    with np.errstate(divide="ignore"):
        il = -10 * np.log10(np.asarray(t_on, dtype=float))
    return il if il.ndim else float(il)


def intracavity_loss(t_on, r_on):
    loss = 1 - (np.asarray(t_on, dtype=float) + np.asarray(r_on, dtype=float))
    return loss if loss.ndim else float(loss)


@dataclass(frozen=True)
class SwitchMetrics:
    contrast: float
    extinction_db: float
    insertion_loss_db: float
    intracavity_loss: float
    t_on: float
    t_off: float
    r_on: float
    rise_time_s: float | None = None

    @classmethod
    def from_levels(cls, t_on: float, t_off: float, r_on: float, rise_time_s: float | None = None) -> "SwitchMetrics":
        return cls(
            contrast=contrast(t_on, t_off),
            extinction_db=extinction_db(t_on, t_off),
            insertion_loss_db=insertion_loss_db(t_on),
            intracavity_loss=intracavity_loss(t_on, r_on),
            t_on=float(t_on),
            t_off=float(t_off),
            r_on=float(r_on),
            rise_time_s=rise_time_s,
        )

    def to_dict(self) -> dict:
        keys = ("contrast", "extinction_db", "insertion_loss_db", "intracavity_loss", "rise_time_s", "t_on", "t_off", "r_on")
        d = asdict(self)
        return {key: d[key] for key in keys}
