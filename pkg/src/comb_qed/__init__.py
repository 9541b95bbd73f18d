"""Simulation and analysis of a superconducting-qubit frequency comb in a cavity."""
from .errors import (ConvergenceError, FitError, InfeasibleTargetError, IntegrationError,
                     NumericalError, RankDeficientError, StateInvariantError, ValidationError)
from .model import (RAD_PER_NS, CavityParams, EnsembleSpec, PulseSpec, QubitSpec, SimGrid,
                    build_comb, collective_coupling, drive_photon_number)

__version__ = "0.1.0"
