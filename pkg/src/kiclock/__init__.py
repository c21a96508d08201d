"""Bi:Si clock transitions coupled to a kinetic-inductance parametric circuit."""

from .circuit import (
    CircuitNetlist,
    CouplingSet,
    KineticInductor,
    default_netlist,
    quantize_circuit,
    three_wave_coupling,
    tuning_curve,
)
from .config import Config, load_config
from .errors import KiclockError
from .fitting import FitResult, fit_exponential, fit_lorentzian_peaks, fit_resonance, fit_tuning
from .modes import ModePair, PulseEvent, PulseSchedule, Trace, integrate_modes, device_modes, reflection_s11
from .pulses import EnsembleModel, endor_scan, hahn_echo, hahn_schedule
from .spin import SpinSystem, find_clock_transition, labeled_spectrum, transitions

__version__ = "0.1.0"
