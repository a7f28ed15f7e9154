"""Phase engine for light-pulse atom interferometers with a mass defect.

The interferometer phase is split into a reference part, evaluated at the mean
mass, and a clock part proportional to the transition frequency and the
branch proper-time differences. Submodules:

``model``       constants, species, pulses and the standard four-pulse geometry
``kinematics``  piecewise-analytic branch trajectories
``phase``       proper times, phase breakdown, direct full-mass oracle
``frames``      the same phase evaluated in the freely falling frame
``estimation``  violation model, parameter extraction, noise budget, Monte Carlo
``config``      JSON configuration; ``cli`` the command-line front end
"""

__version__ = "0.1.0"

from .estimation import (
    CampaignPlan,
    NoiseModel,
    ViolationParams,
    differential_signal,
    extract_alpha_dbeta,
    monte_carlo_campaign,
    sensitivity_budget,
    violated_phase,
)
from .frames import total_phase_falling_frame
from .kinematics import propagate_full_mass, propagate_reference
from .model import (
    Constants,
    InvalidParameterError,
    LaserPulse,
    PulseSequence,
    Species,
    State,
    build_redshift_geometry,
)
from .phase import (
    OpenInterferometerError,
    PhaseBreakdown,
    reference_phase,
    total_phase_direct,
    total_phase_perturbative,
)

__all__ = [
    "CampaignPlan",
    "Constants",
    "InvalidParameterError",
    "LaserPulse",
    "NoiseModel",
    "OpenInterferometerError",
    "PhaseBreakdown",
    "PulseSequence",
    "Species",
    "State",
    "ViolationParams",
    "build_redshift_geometry",
    "differential_signal",
    "extract_alpha_dbeta",
    "monte_carlo_campaign",
    "propagate_full_mass",
    "propagate_reference",
    "reference_phase",
    "sensitivity_budget",
    "total_phase_direct",
    "total_phase_falling_frame",
    "total_phase_perturbative",
    "violated_phase",
]
