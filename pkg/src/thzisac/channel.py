"""
Deterministic inter-satellite channel: free-space gain, carrier phase,
Doppler and Doppler-squint terms, Gaussian-beam pointing loss and the
effective noise budget.

Sign convention: geometry stores the range rate dR/dt directly. A closing
link has dR/dt < 0 and therefore a positive Doppler shift.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .constants import BOLTZMANN, SPEED_OF_LIGHT, T0_KELVIN, db_to_linear


class ChannelDomainError(ValueError):
    pass


class PointingValidityWarning(RuntimeWarning):
    """Pointing error outside the main-lobe Gaussian approximation."""


# ---------------------------------------------------------------------------
# Geometry and antennas
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioGeometry:
    """Link state between the two satellites.

    ``range_rate_mps`` is dR/dt (negative while closing) and
    ``range_accel_mps2`` is d2R/dt2. ``position_offset`` defaults to
    ``range_m * los_unit``.
    """

    range_m: float
    range_rate_mps: float = 0.0
    range_accel_mps2: float = 0.0
    los_unit: tuple = (1.0, 0.0, 0.0)
    position_offset: tuple | None = None
    velocity_offset: tuple | None = None

    def __post_init__(self):
        if not (np.isfinite(self.range_m) and self.range_m > 0):
            raise ChannelDomainError(f"range_m must be positive, got {self.range_m}")
        u = np.asarray(self.los_unit, dtype=float)
        if u.shape != (3,) or abs(np.linalg.norm(u) - 1.0) > 1e-12:
            raise ChannelDomainError("los_unit must be a 3-vector of unit norm (tolerance 1e-12)")
        object.__setattr__(self, "los_unit", tuple(u))
        if self.position_offset is None:
            object.__setattr__(self, "position_offset", tuple(self.range_m * u))
        else:
            dr = np.asarray(self.position_offset, dtype=float)
            if abs(np.linalg.norm(dr) - self.range_m) > 1e-9 * self.range_m:
                raise ChannelDomainError("range_m must equal the norm of position_offset")
            object.__setattr__(self, "position_offset", tuple(dr))
        if self.velocity_offset is None:
            object.__setattr__(self, "velocity_offset", tuple(self.range_rate_mps * u))
        else:
            object.__setattr__(self, "velocity_offset", tuple(np.asarray(self.velocity_offset, dtype=float)))

    @property
    def closing_speed_mps(self) -> float:
        return -self.range_rate_mps

    def with_range(self, range_m: float) -> "ScenarioGeometry":
        return ScenarioGeometry(range_m=range_m, range_rate_mps=self.range_rate_mps,
                                range_accel_mps2=self.range_accel_mps2, los_unit=self.los_unit)


def beamwidth(diameter_m: float, carrier_hz: float) -> float:
    """Half-power beamwidth 1.02 * wavelength / D (rad)."""
    if diameter_m <= 0 or carrier_hz <= 0:
        raise ChannelDomainError("diameter and carrier frequency must be positive")
    return 1.02 * (SPEED_OF_LIGHT / carrier_hz) / diameter_m


def aperture_gain(diameter_m: float, carrier_hz: float, efficiency: float = 0.65) -> float:
    """Parabolic-dish gain eta * (pi D / lambda)^2."""
    return efficiency * (math.pi * diameter_m * carrier_hz / SPEED_OF_LIGHT) ** 2


GAIN_MODES = ("aperture", "fixed", "compensated")


@dataclass(frozen=True)
class AntennaConfig:
    """Identical dishes at both ends.

    gain_mode:
      ``aperture``    gains follow the dish size at the carrier (G ~ f^2 per end)
      ``fixed``       gains are the given ``fixed_gain_dbi`` values
      ``compensated`` the gain product scales as f^2 only, referenced to
                      ``reference_hz``; cancels the free-space 1/f so |g|
                      does not depend on the carrier
    """

    diameter_m: float = 1.0
    carrier_hz: float = 300e9
    gain_mode: str = "aperture"
    efficiency: float = 0.65
    fixed_gain_dbi: tuple = (50.0, 50.0)
    reference_hz: float = 300e9

    def __post_init__(self):
        if self.diameter_m <= 0 or self.carrier_hz <= 0:
            raise ChannelDomainError("diameter and carrier frequency must be positive")
        if self.gain_mode not in GAIN_MODES:
            raise ChannelDomainError(f"gain_mode must be one of {GAIN_MODES}, got {self.gain_mode!r}")
        if not (0 < self.efficiency <= 1):
            raise ChannelDomainError("aperture efficiency must be in (0, 1]")

    @property
    def gains(self) -> tuple[float, float]:
        if self.gain_mode == "fixed":
            return float(db_to_linear(self.fixed_gain_dbi[0])), float(db_to_linear(self.fixed_gain_dbi[1]))
        if self.gain_mode == "aperture":
            g = aperture_gain(self.diameter_m, self.carrier_hz, self.efficiency)
            return g, g
        g_ref = aperture_gain(self.diameter_m, self.reference_hz, self.efficiency)
        g = g_ref * (self.carrier_hz / self.reference_hz)
        return g, g

    @property
    def tx_gain(self) -> float:
        return self.gains[0]

    @property
    def rx_gain(self) -> float:
        return self.gains[1]

    @property
    def beamwidth_rad(self) -> float:
        return beamwidth(self.diameter_m, self.carrier_hz)

    @property
    def power_rolloff(self) -> float:
        return 4.0 * math.log(2.0) / self.beamwidth_rad**2

    @property
    def amp_rolloff(self) -> float:
        return 0.5 * self.power_rolloff


@dataclass(frozen=True)
class PointingState:
    error_rad: tuple = (0.0, 0.0)
    rms_rad: float = 1e-6

    def __post_init__(self):
        if self.rms_rad < 0:
            raise ChannelDomainError("pointing rms must be >= 0")
        e = np.asarray(self.error_rad, dtype=float)
        if e.shape != (2,):
            raise ChannelDomainError("pointing error must be a 2-vector [theta_x, theta_y]")
        object.__setattr__(self, "error_rad", tuple(e))


# ---------------------------------------------------------------------------
# Gain, phase, Doppler
# ---------------------------------------------------------------------------

def free_space_amplitude(range_m, carrier_hz, tx_gain, rx_gain):
    range_m = np.asarray(range_m, dtype=float)
    if np.any(range_m <= 0):
        raise ChannelDomainError("range must be positive")
    return SPEED_OF_LIGHT / (4.0 * np.pi * range_m * carrier_hz) * np.sqrt(tx_gain * rx_gain)


def carrier_phase(range_m, carrier_hz):
    """Propagation phase -2 pi f_c R / c (not wrapped)."""
    return -2.0 * np.pi * carrier_hz * np.asarray(range_m, dtype=float) / SPEED_OF_LIGHT


def friis_gain(geom: ScenarioGeometry, ant: AntennaConfig) -> complex:
    """Complex free-space channel coefficient at boresight."""
    mag = free_space_amplitude(geom.range_m, ant.carrier_hz, ant.tx_gain, ant.rx_gain)
    return complex(mag * np.exp(1j * np.mod(carrier_phase(geom.range_m, ant.carrier_hz), 2 * np.pi)))


def pointing_loss(theta_e, ant: AntennaConfig, warn: bool = True):
    """Power factor exp(-g_power |theta|^2); amplitude factor is its square root."""
    th = np.asarray(theta_e, dtype=float)
    r2 = np.sum(th**2, axis=-1)
    if warn and np.any(np.sqrt(r2) >= 2.0 * ant.beamwidth_rad):
        warnings.warn("pointing error beyond twice the 3-dB beamwidth; Gaussian main-lobe "
                      "approximation used anyway", PointingValidityWarning, stacklevel=2)
    out = np.exp(-ant.power_rolloff * r2)
    return float(out) if np.ndim(out) == 0 else out


def mean_pointing_loss(rms_rad: float, ant: AntennaConfig, n_draws: int = 1000, rng=None):
    """Sample mean and standard error of the pointing power factor under
    i.i.d. Gaussian errors on both axes."""
    if n_draws < 1:
        raise ChannelDomainError("n_draws must be >= 1")
    rng = np.random.default_rng(rng)
    draws = rng.standard_normal((n_draws, 2)) * rms_rad
    vals = pointing_loss(draws, ant, warn=False)
    return float(np.mean(vals)), float(np.std(vals) / math.sqrt(n_draws))


def mean_pointing_loss_analytic(rms_rad: float, ant: AntennaConfig) -> float:
    return 1.0 / (1.0 + 2.0 * ant.power_rolloff * rms_rad**2)


@dataclass(frozen=True)
class DopplerQuantities:
    shift_hz: float
    rate_hz_per_s: float
    differential_hz: float


def doppler_quantities(geom: ScenarioGeometry, carrier_hz: float, bandwidth_hz: float) -> DopplerQuantities:
    if carrier_hz <= 0:
        raise ChannelDomainError("carrier must be positive")
    f_d = -carrier_hz * geom.range_rate_mps / SPEED_OF_LIGHT
    f_d_rate = -carrier_hz * geom.range_accel_mps2 / SPEED_OF_LIGHT
    diff = abs(geom.range_rate_mps) * bandwidth_hz / SPEED_OF_LIGHT
    return DopplerQuantities(shift_hz=f_d + 0.0, rate_hz_per_s=f_d_rate + 0.0, differential_hz=diff)


def dse_phase(t, f_baseband, geom: ScenarioGeometry, carrier_hz: float):
    """Doppler-squint phase: the Doppler terms scaled by f / f_c."""
    dq = doppler_quantities(geom, carrier_hz, 0.0)
    t = np.asarray(t, dtype=float)
    scale = np.asarray(f_baseband, dtype=float) / carrier_hz
    return 2.0 * np.pi * (dq.shift_hz * scale * t + 0.5 * dq.rate_hz_per_s * scale * t**2)


def total_phase(t, f_baseband, geom: ScenarioGeometry, carrier_hz: float):
    """Carrier + bulk Doppler + squint phase of subcarrier f at time t."""
    dq = doppler_quantities(geom, carrier_hz, 0.0)
    t = np.asarray(t, dtype=float)
    f = np.asarray(f_baseband, dtype=float)
    return (2.0 * np.pi * (carrier_hz + f) * t
            + 2.0 * np.pi * (dq.shift_hz * t + 0.5 * dq.rate_hz_per_s * t**2)
            + dse_phase(t, f, geom, carrier_hz))


def instantaneous_frequency(t, f_baseband, geom: ScenarioGeometry, carrier_hz: float):
    """(f_c + f) * (1 + f_D(t) / f_c) with f_D(t) = f_D + fdot_D * t."""
    dq = doppler_quantities(geom, carrier_hz, 0.0)
    t = np.asarray(t, dtype=float)
    return (carrier_hz + np.asarray(f_baseband, dtype=float)) * (1.0 + (dq.shift_hz + dq.rate_hz_per_s * t) / carrier_hz)


# ---------------------------------------------------------------------------
# Noise
# ---------------------------------------------------------------------------

def thermal_noise_power(bandwidth_hz: float, noise_figure_db: float = 10.0, temperature_k: float = T0_KELVIN) -> float:
    """k T F B in watts."""
    if bandwidth_hz <= 0:
        raise ChannelDomainError("noise bandwidth must be positive")
    return BOLTZMANN * temperature_k * float(db_to_linear(noise_figure_db)) * bandwidth_hz


DSE_BELOW_DISTORTION_DB = 30.0


@dataclass(frozen=True)
class NoiseBudget:
    thermal_w: float
    distortion_w: float
    dse_residual_w: float
    effective_w: float = field(init=False)

    def __post_init__(self):
        for name in ("thermal_w", "distortion_w", "dse_residual_w"):
            if getattr(self, name) < 0:
                raise ChannelDomainError(f"{name} must be >= 0")
        object.__setattr__(self, "effective_w", self.thermal_w + self.distortion_w + self.dse_residual_w)


def effective_noise(thermal_w: float, g: complex, distortion_power: float, dse_residual_w: float | None = None,
                    dse_below_db: float = DSE_BELOW_DISTORTION_DB) -> NoiseBudget:
    """N0 + |g|^2 sigma_eta^2 + sigma_DSE^2.

    When ``dse_residual_w`` is None the squint residual is placed
    ``dse_below_db`` under the received distortion power.
    """
    if thermal_w < 0 or distortion_power < 0:
        raise ChannelDomainError("noise inputs must be non-negative")
    dist = abs(g) ** 2 * distortion_power
    if dse_residual_w is None:
        dse_residual_w = dist * 10.0 ** (-dse_below_db / 10.0)
    return NoiseBudget(thermal_w=thermal_w, distortion_w=dist, dse_residual_w=dse_residual_w)
