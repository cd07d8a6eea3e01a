"""A complete link scenario tying geometry, antennas, hardware and noise
together, with the derived quantities every experiment needs."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace


from .capacity import LinkBudget, ceiling
from .channel import (AntennaConfig, NoiseBudget, PointingState, ScenarioGeometry, effective_noise,
                      free_space_amplitude, mean_pointing_loss, pointing_loss, thermal_noise_power)
from .constants import dbm_to_watt
from .hardware import HardwareProfile, SoftLimiterParams, bussgang_decompose, ibo_guard
from .profiles import get_profile
from .sensing import PilotFrame, SensingState


@dataclass(frozen=True)
class LinkScenario:
    geometry: ScenarioGeometry = field(default_factory=lambda: ScenarioGeometry(range_m=2000e3, range_rate_mps=-7.5e3))
    antenna: AntennaConfig = field(default_factory=AntennaConfig)
    pointing: PointingState = field(default_factory=PointingState)
    frame: PilotFrame = field(default_factory=PilotFrame)
    profile: HardwareProfile = field(default_factory=lambda: get_profile("high_performance"))
    tx_power_dbm: float = 30.0
    noise_figure_db: float = 10.0
    noise_bandwidth_hz: float = 1e9
    ibo_kappa: float = 0.1
    dse_below_db: float = 30.0
    covariance: str = "diagonal"
    # None: use the deterministic loss at pointing.error_rad
    pointing_factor: float | None = None
    phase_variance: float | None = None

    def __post_init__(self):
        if self.ibo_kappa <= 0:
            raise ValueError("ibo_kappa must be positive")
        ibo_guard(self.ibo_kappa)

    # -- basic quantities ------------------------------------------------

    @property
    def tx_power_w(self) -> float:
        return float(dbm_to_watt(self.tx_power_dbm))

    @property
    def sigma_phi2(self) -> float:
        return self.profile.phase_variance if self.phase_variance is None else self.phase_variance

    @property
    def gamma_eff(self) -> float:
        return self.profile.gamma_eff

    @property
    def thermal_w(self) -> float:
        return thermal_noise_power(self.noise_bandwidth_hz, self.noise_figure_db)

    @property
    def bussgang(self):
        p = self.tx_power_w
        return bussgang_decompose(SoftLimiterParams(a_sat=math.sqrt(p / self.ibo_kappa), p_in=p), p)

    @property
    def power_factor(self) -> float:
        if self.pointing_factor is not None:
            return self.pointing_factor
        return pointing_loss(self.pointing.error_rad, self.antenna)

    @property
    def free_space_amp(self) -> float:
        a = self.antenna
        return float(free_space_amplitude(self.geometry.range_m, a.carrier_hz, a.tx_gain, a.rx_gain))

    @property
    def gain_amp(self) -> float:
        return self.free_space_amp * math.sqrt(self.power_factor)

    @property
    def snr0(self) -> float:
        b = self.bussgang.gain_b
        return self.tx_power_w * self.gain_amp**2 * abs(b) ** 2 / self.thermal_w

    @property
    def distortion_power(self) -> float:
        """sigma_eta^2 at the transmitter (before |g|^2)."""
        return self.gamma_eff * abs(self.bussgang.gain_b) ** 2 * self.tx_power_w

    def noise_budget(self) -> NoiseBudget:
        return effective_noise(self.thermal_w, self.gain_amp, self.distortion_power,
                               dse_below_db=self.dse_below_db)

    def link_budget(self, bandwidth_hz: float | None = None) -> LinkBudget:
        bw = self.profile.system_bandwidth if bandwidth_hz is None else bandwidth_hz
        return LinkBudget.evaluate(self.tx_power_w, self.snr0, self.sigma_phi2, self.gamma_eff,
                                   self.frame.m_pilots, self.frame.frame_symbols, bw)

    @property
    def capacity_bits(self) -> float:
        return self.link_budget().capacity_bits

    @property
    def ceiling_bits(self) -> float:
        return ceiling(self.sigma_phi2, self.gamma_eff)

    # -- sensing ----------------------------------------------------------

    def sensing_state(self, **overrides) -> SensingState:
        a = self.antenna
        pf = self.power_factor if self.pointing_factor is not None else 1.0
        frame = replace(self.frame, symbol_amp=math.sqrt(self.tx_power_w))
        pn = self.profile.phase_noise
        if self.phase_variance is not None:
            pn = replace(pn, variance=self.phase_variance)
        kw = dict(
            carrier_hz=a.carrier_hz, range_m=self.geometry.range_m, free_space_amp=self.free_space_amp,
            amp_rolloff=a.amp_rolloff, frame=frame, thermal_w=self.thermal_w, gamma_eff=self.gamma_eff,
            phase_noise=pn, bussgang_gain=self.bussgang.gain_b, theta=self.pointing.error_rad,
            pointing_amp=math.sqrt(pf), los_unit=self.geometry.los_unit, dse_below_db=self.dse_below_db,
            covariance=self.covariance,
        )
        kw.update(overrides)
        return SensingState(**kw)

    # -- convenience ------------------------------------------------------

    def with_(self, **kw) -> "LinkScenario":
        geom_kw = {k: kw.pop(k) for k in ("range_m", "range_rate_mps") if k in kw}
        ant_kw = {k: kw.pop(k) for k in ("diameter_m", "carrier_hz", "gain_mode") if k in kw}
        if isinstance(kw.get("profile"), str):
            kw["profile"] = get_profile(kw["profile"])
        sc = self
        if geom_kw:
            g = sc.geometry
            sc = replace(sc, geometry=ScenarioGeometry(range_m=geom_kw.get("range_m", g.range_m),
                                                       range_rate_mps=geom_kw.get("range_rate_mps", g.range_rate_mps),
                                                       range_accel_mps2=g.range_accel_mps2, los_unit=g.los_unit))
        if ant_kw:
            sc = replace(sc, antenna=replace(sc.antenna, **ant_kw))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return replace(sc, **kw) if kw else sc

    def with_snr0_db(self, snr0_db: float) -> "LinkScenario":
        """Set the transmit power that yields the requested pre-impairment SNR."""
        target = 10.0 ** (snr0_db / 10.0)
        ref = self.snr0
        p_dbm = self.tx_power_dbm + 10.0 * math.log10(target / ref)
        return self.with_(tx_power_dbm=p_dbm)

    def with_mc_pointing(self, n_draws: int = 1000, rng=None) -> "LinkScenario":
        mean, _ = mean_pointing_loss(self.pointing.rms_rad, self.antenna, n_draws, rng)
        return self.with_(pointing_factor=mean)
