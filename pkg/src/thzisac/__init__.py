"""Performance limits of THz inter-satellite ISAC links under hardware impairments."""

__version__ = "0.1.0"

from .capacity import LinkBudget, capacity, ceiling, net_rate, sinr_eff, snr0  # noqa: E402
from .hardware import (BussgangDecomposition, HardwareProfile, PhaseNoiseModel, SalehParams,  # noqa: E402
                       SoftLimiterParams, bussgang_decompose, bussgang_gain_soft_limiter, gamma_components,
                       phase_correlation_matrix, saleh_transfer)
from .profiles import get_profile, list_profiles  # noqa: E402
from .scenario import LinkScenario  # noqa: E402

__all__ = [
    "LinkBudget", "capacity", "ceiling", "net_rate", "sinr_eff", "snr0",
    "BussgangDecomposition", "HardwareProfile", "PhaseNoiseModel", "SalehParams", "SoftLimiterParams",
    "bussgang_decompose", "bussgang_gain_soft_limiter", "gamma_components", "phase_correlation_matrix",
    "saleh_transfer", "get_profile", "list_profiles", "LinkScenario",
]
