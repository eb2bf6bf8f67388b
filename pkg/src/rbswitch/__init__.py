"""All-optical switching in a warm-87Rb ring cavity: vapor response, cavity, dynamics, fits."""

from .atomic import (
    FieldConfig,
    LadderAtom,
    OpticalResponse,
    VaporCell,
    doppler_susceptibility,
    optical_response,
    phase_shift,
    rabi_frequency,
    susceptibility_doppler,
    susceptibility_stationary,
    vapor_density,
)
from .cavity import RingCavity, bandwidth, finesse, reflection, ring_up_time, transmission
from .config import RunConfig, load_config
from .dynamics import ControlPulseTrain, TimeTrace, phase_step_response, rise_time, simulate_switching, window_metrics
from .errors import ConfigError, ConvergenceError, DomainError, OutputError, PreconditionError, SwitchError
from .fitting import FitProblem, FitResult, fit_least_squares, grid_refine, nelder_mead
from .metrics import SwitchMetrics, contrast, extinction_db, insertion_loss_db, intracavity_loss
from .sweeps import SweepGrid, sweep_2d, sweep_contrast_diagonal

__version__ = "0.1.0"
