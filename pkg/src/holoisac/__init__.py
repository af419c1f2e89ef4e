"""Holographic-MIMO ISAC performance toolkit.

Channel models, closed-form sensing and communication metrics, beamformer
designs, rate regions and a Monte Carlo oracle that cross-checks them.
"""
__version__ = "0.1.0"

from .array import ArrayConfig, antenna_position, antenna_positions, array_occupation_ratio
from .channels import (CorrelatedChannelModel, ScenarioParams, SensingChannel,
                       correlation_model, sensing_channel)
from .exceptions import (ConvergenceError, DegenerateGeometryError, DomainError, HoloIsacError,
                         ModelError, NumericError, SolverError)
from .montecarlo import McConfig, estimate_ecr, estimate_op, mmse_sr_equivalence
from .special import SpectralStats

__all__ = [
    "ArrayConfig", "antenna_position", "antenna_positions", "array_occupation_ratio",
    "CorrelatedChannelModel", "ScenarioParams", "SensingChannel", "correlation_model",
    "sensing_channel", "ConvergenceError", "DegenerateGeometryError", "DomainError",
    "HoloIsacError", "ModelError", "NumericError", "SolverError", "McConfig",
    "estimate_ecr", "estimate_op", "mmse_sr_equivalence", "SpectralStats",
]
