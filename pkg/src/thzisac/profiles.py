"""Built-in transceiver grades.

High-Performance and SWaP-Efficient component values are published
datasheet-level figures. The State-of-the-Art and Low-Cost component values
are placeholders chosen so their component sums land near the headline
quality factor; the headline value is what link results use by default.
"""

from __future__ import annotations

from dataclasses import replace

from .hardware import HardwareProfile

# characteristic system bandwidth for net-rate reporting; the component
# bandwidth feeding the clock-jitter term is a separate field
_REGISTRY = {
    "state_of_the_art": HardwareProfile(
        name="state_of_the_art", label="State-of-the-Art",
        evm_pa=0.068, jitter_rms=10e-15, enob=7.0, linewidth=10e3,
        signal_bandwidth=10e9, system_bandwidth=100e9, gamma_asserted=0.005),
    "high_performance": HardwareProfile(
        name="high_performance", label="High-Performance",
        evm_pa=0.106, jitter_rms=20.9e-15, enob=6.0, linewidth=15e3,
        signal_bandwidth=10e9, system_bandwidth=20e9, gamma_asserted=0.01),
    "swap_efficient": HardwareProfile(
        name="swap_efficient", label="SWaP-Efficient",
        evm_pa=0.2093, jitter_rms=70e-15, enob=5.0, linewidth=20e3,
        signal_bandwidth=10e9, system_bandwidth=10e9, gamma_asserted=0.025),
    "low_cost": HardwareProfile(
        name="low_cost", label="Low-Cost",
        evm_pa=0.22, jitter_rms=100e-15, enob=4.5, linewidth=25e3,
        signal_bandwidth=10e9, system_bandwidth=5e9, gamma_asserted=0.05),
}

PROFILE_ORDER = tuple(_REGISTRY)

_ALIASES = {p.label.lower(): k for k, p in _REGISTRY.items()}
_ALIASES.update({k.replace("_", "-"): k for k in _REGISTRY})


def profile_names():
    return PROFILE_ORDER


def get_profile(name: str, **overrides) -> HardwareProfile:
    key = _ALIASES.get(name.lower(), name.lower())
    if key not in _REGISTRY:
        raise KeyError(f"unknown hardware profile {name!r}; known: {', '.join(PROFILE_ORDER)}")
    prof = _REGISTRY[key]
    return replace(prof, **overrides) if overrides else prof


def all_profiles():
    return [get_profile(n) for n in PROFILE_ORDER]


def list_profiles() -> list[dict]:
    return [p.summary() for p in all_profiles()]
