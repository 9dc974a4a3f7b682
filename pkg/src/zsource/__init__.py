"""Semi-quasi-Z-source inverter: models, simulation, stability certificates."""

from .analysis import (
    DecayFit,
    SweepRow,
    WaveformReport,
    averaging_sweep,
    inverter_demo,
    periodic_orbit,
    trajectory_difference,
)
from .certificates import (
    AveragedCertificate,
    MonodromyReport,
    SwitchedCertificate,
    certify_averaged,
    certify_switched,
    iss_bound_check,
    monodromy_check,
)
from .circuit import CircuitParams, StateVector, gain, steady_state, to_x, to_z
from .signals import DutyProfile, PwmSignal, duty_reference, pwm_from_duty
from .sim import SimConfig, Trajectory, simulate_averaged, simulate_switched

__version__ = "0.1.0"

__all__ = [
    "AveragedCertificate",
    "CircuitParams",
    "DecayFit",
    "DutyProfile",
    "MonodromyReport",
    "PwmSignal",
    "SimConfig",
    "StateVector",
    "SweepRow",
    "SwitchedCertificate",
    "Trajectory",
    "WaveformReport",
    "averaging_sweep",
    "certify_averaged",
    "certify_switched",
    "duty_reference",
    "gain",
    "inverter_demo",
    "iss_bound_check",
    "monodromy_check",
    "periodic_orbit",
    "pwm_from_duty",
    "simulate_averaged",
    "simulate_switched",
    "steady_state",
    "to_x",
    "to_z",
    "trajectory_difference",
]
