"""Spectral simulator and potential-well classifier for the critical Choquard heat flow on a box."""
from .classifier import (BracketInvalid, Kind, LambdaScanResult, TrajectoryVerdict, classify_trajectory,
                         infinite_blowup_probe, lambda_scan)
from .evolution import (RunOutcome, SolverConfig, TrajectoryRecord, Verdict, integrate, picard_mild_solve,
                        scale_field)
from .functionals import Constants, Exponents, WellClass, bubble, compute_B, constants_build, energy_report
from .grid import BoxDomain, Field, SpectralField, sine_mode
from .ground_state import QuotientResult, minimize_quotient, quotient
from .riesz import RieszKernel, kernel_build, riesz_apply

__version__ = "0.1.0"

__all__ = [
    "BoxDomain", "Field", "SpectralField", "sine_mode",
    "RieszKernel", "kernel_build", "riesz_apply",
    "Constants", "Exponents", "WellClass", "bubble", "compute_B", "constants_build", "energy_report",
    "RunOutcome", "SolverConfig", "TrajectoryRecord", "Verdict", "integrate", "picard_mild_solve", "scale_field",
    "QuotientResult", "minimize_quotient", "quotient",
    "BracketInvalid", "Kind", "LambdaScanResult", "TrajectoryVerdict", "classify_trajectory",
    "infinite_blowup_probe", "lambda_scan",
]
