import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import awgn_capacity_bits
from thzisac.capacity import (CapacityDomainError, LinkBudget, awgn_capacity, capacity, ceiling, knee_snr0,
                              net_rate, sinr_eff, snr0)
from thzisac.channel import (AntennaConfig, ChannelDomainError, PointingValidityWarning, ScenarioGeometry,
                             aperture_gain, beamwidth, dse_phase, doppler_quantities, effective_noise,
                             free_space_amplitude, friis_gain, instantaneous_frequency, mean_pointing_loss,
                             mean_pointing_loss_analytic, pointing_loss, thermal_noise_power)
from thzisac.constants import SPEED_OF_LIGHT, db_to_linear, dbm_to_watt, linear_to_db, watt_to_dbm
from thzisac.profiles import get_profile
from thzisac.scenario import LinkScenario


# -- geometry and antennas ---------------------------------------------------

def test_geometry_validation():
    with pytest.raises(ChannelDomainError):
        ScenarioGeometry(range_m=-1.0)
    with pytest.raises(ChannelDomainError):
        ScenarioGeometry(range_m=1e6, los_unit=(1.0, 1.0, 0.0))
    g = ScenarioGeometry(range_m=1e6, range_rate_mps=-100.0)
    assert g.closing_speed_mps == 100.0
    np.testing.assert_allclose(g.position_offset, (1e6, 0, 0))
    assert g.with_range(2e6).range_rate_mps == -100.0


def test_unit_conversions_round_trip():
    assert float(dbm_to_watt(30.0)) == pytest.approx(1.0)
    assert float(watt_to_dbm(0.001)) == pytest.approx(0.0)
    assert float(linear_to_db(db_to_linear(13.7))) == pytest.approx(13.7)


def test_beamwidth_and_gain():
    lam = SPEED_OF_LIGHT / 300e9
    assert beamwidth(1.0, 300e9) == pytest.approx(1.02 * lam)
    assert aperture_gain(1.0, 300e9) == pytest.approx(0.65 * (math.pi / lam) ** 2)
    ant = AntennaConfig()
    assert ant.power_rolloff * ant.beamwidth_rad**2 == pytest.approx(4 * math.log(2))
    # half power at half the beamwidth off boresight on one axis
    assert pointing_loss((ant.beamwidth_rad / 2, 0.0), ant) == pytest.approx(0.5)


def test_gain_modes_scale_with_carrier():
    r = 2000e3
    def amp(mode, fc):
        a = AntennaConfig(carrier_hz=fc, gain_mode=mode)
        return free_space_amplitude(r, fc, a.tx_gain, a.rx_gain)
    # aperture gains: |g| grows linearly with the carrier
    assert amp("aperture", 1e12) / amp("aperture", 300e9) == pytest.approx(1e12 / 300e9)
    assert amp("compensated", 1e12) == pytest.approx(amp("compensated", 300e9))
    assert amp("fixed", 1e12) / amp("fixed", 300e9) == pytest.approx(0.3)
    with pytest.raises(ChannelDomainError):
        AntennaConfig(gain_mode="magic")


def test_friis_gain_magnitude():
    g = ScenarioGeometry(range_m=1000e3)
    a = AntennaConfig()
    lam = SPEED_OF_LIGHT / a.carrier_hz
    assert abs(friis_gain(g, a)) == pytest.approx(lam / (4 * math.pi * 1000e3) * a.tx_gain)


def test_pointing_validity_warning():
    ant = AntennaConfig()
    with pytest.warns(PointingValidityWarning):
        pointing_loss((3 * ant.beamwidth_rad, 0.0), ant)


def test_mean_pointing_loss_against_closed_form():
    ant = AntennaConfig()
    rms = 0.2 * ant.beamwidth_rad
    mean, se = mean_pointing_loss(rms, ant, n_draws=200_000, rng=3)
    assert mean == pytest.approx(mean_pointing_loss_analytic(rms, ant), abs=4 * se)


# -- Doppler -----------------------------------------------------------------

def test_doppler_sign_and_squint():
    closing = ScenarioGeometry(range_m=1e6, range_rate_mps=-7.5e3)
    dq = doppler_quantities(closing, 300e9, 10e9)
    assert dq.shift_hz == pytest.approx(300e9 * 7.5e3 / SPEED_OF_LIGHT)
    assert dq.shift_hz > 0
    assert dq.differential_hz == pytest.approx(7.5e3 * 10e9 / SPEED_OF_LIGHT)


def test_squint_matches_instantaneous_frequency():
    geom = ScenarioGeometry(range_m=1e6, range_rate_mps=-5e3, range_accel_mps2=3.0)
    fc, f = 300e9, 2e9
    t = np.linspace(0, 1e-3, 5)
    fi = instantaneous_frequency(t, f, geom, fc)
    dq = doppler_quantities(geom, fc, 0.0)
    expected = fc + f + (dq.shift_hz + dq.rate_hz_per_s * t) * (1 + f / fc)
    np.testing.assert_allclose(fi, expected, rtol=1e-14)
    # the squint phase vanishes at baseband frequency zero
    assert np.all(dse_phase(t, 0.0, geom, fc) == 0)


# -- noise -------------------------------------------------------------------

def test_thermal_noise():
    assert thermal_noise_power(1e9, 0.0) == pytest.approx(1.380649e-23 * 290 * 1e9)
    assert thermal_noise_power(1e9, 10.0) == pytest.approx(10 * 1.380649e-23 * 290 * 1e9)
    with pytest.raises(ChannelDomainError):
        thermal_noise_power(0.0)


def test_effective_noise_budget():
    nb = effective_noise(1e-12, 1e-3, 2.0, dse_below_db=30)
    assert nb.distortion_w == pytest.approx(2e-6)
    assert nb.dse_residual_w == pytest.approx(2e-9)
    assert nb.effective_w == pytest.approx(1e-12 + 2e-6 + 2e-9)


# -- capacity ----------------------------------------------------------------

def test_sinr_limits():
    assert float(sinr_eff(1e12, 0.0, 0.01)) == pytest.approx(100.0, rel=1e-9)
    assert float(sinr_eff(10.0, 0.0, 0.0)) == 10.0
    assert float(capacity(sinr_eff(10.0, 0.0, 0.0))) == pytest.approx(awgn_capacity_bits(10.0))
    assert ceiling(0.0, 0.0) == math.inf
    assert knee_snr0(0.01) == 100.0


@given(st.floats(1e-3, 1e8), st.floats(0.0, 1.0), st.floats(1e-4, 0.2))
@settings(max_examples=100, deadline=None)
def test_capacity_below_ceiling_and_awgn(s, sig2, gam):
    c = float(capacity(sinr_eff(s, sig2, gam)))
    assert c <= ceiling(sig2, gam) + 1e-12
    assert c <= float(awgn_capacity(s)) + 1e-12


def test_capacity_monotone_in_snr():
    s = np.logspace(-2, 8, 200)
    c = capacity(sinr_eff(s, 0.1, 0.01))
    assert np.all(np.diff(c) > 0)


def test_net_rate():
    assert float(net_rate(6.0, 64, 1024, 100e9)) == pytest.approx(6.0 * 100e9 * (1 - 1 / 16))
    with pytest.raises(CapacityDomainError):
        net_rate(1.0, 2048, 1024, 1e9)


def test_snr0_and_link_budget():
    assert float(snr0(1.0, 1e-6, 0.9, 1e-14)) == pytest.approx(1e-12 * 0.81 / 1e-14)
    lb = LinkBudget.evaluate(1.0, 1e3, 0.05, 0.01, 64, 1024, 1e9)
    assert lb.capacity_bits == pytest.approx(math.log2(1 + 1e3 * math.exp(-0.05) / 11))
    assert lb.ceiling_bits > lb.capacity_bits


# -- scenario wiring ---------------------------------------------------------

def test_default_scenario_snr():
    sc = LinkScenario()
    assert 10 * math.log10(sc.snr0) == pytest.approx(32.12, abs=0.02)
    assert 10 * math.log10(sc.with_(range_m=500e3).snr0) == pytest.approx(44.16, abs=0.02)


def test_with_snr0_db_hits_target():
    sc = LinkScenario(profile=get_profile("low_cost")).with_snr0_db(17.0)
    assert 10 * math.log10(sc.snr0) == pytest.approx(17.0, abs=1e-9)
    assert sc.capacity_bits == pytest.approx(
        float(capacity(sinr_eff(10 ** 1.7, sc.sigma_phi2, sc.gamma_eff))))


def test_scenario_noise_budget_uses_received_distortion():
    sc = LinkScenario()
    nb = sc.noise_budget()
    assert nb.distortion_w == pytest.approx(sc.gamma_eff * sc.snr0 * sc.thermal_w)
