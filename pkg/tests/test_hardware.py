import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import soft_limiter_gain_direct_mc, soft_limiter_gain_mc
from thzisac.hardware import (HardwareDomainError, PhaseNoiseModel, SalehParams, SoftLimiterParams,
                              bussgang_decompose, bussgang_decompose_mc, bussgang_gain_erfc_variant,
                              bussgang_gain_soft_limiter, enforce_psd, gamma_adc, gamma_components, gamma_lo,
                              gamma_pa, ibo_guard, phase_correlation_matrix, phase_variance_from_linewidth,
                              saleh_transfer, soft_limiter_output_power, soft_limiter_transfer)
from thzisac.profiles import PROFILE_ORDER, get_profile, list_profiles


# -- soft limiter ----------------------------------------------------------

@pytest.mark.parametrize("kappa,expected", [(0.1, 0.99998), (0.5, 0.92169), (1.0, 0.77152), (4.0, 0.43367)])
def test_soft_limiter_gain_reference_values(kappa, expected):
    # reference values from the variance-reduced sampling oracle at 1e7 draws
    assert bussgang_gain_soft_limiter(kappa) == pytest.approx(expected, abs=2e-5)


def test_soft_limiter_gain_matches_plain_sampling():
    for kappa in (0.3, 1.5):
        assert bussgang_gain_soft_limiter(kappa) == pytest.approx(soft_limiter_gain_direct_mc(kappa), abs=3e-3)


def test_erfc_variant_disagrees_with_sampling():
    # kept only as a comparison; it falls well below the sampled gain
    mc, se = soft_limiter_gain_mc(1.0, n_samples=2_000_000, seed=4)
    assert abs(bussgang_gain_erfc_variant(1.0) - mc) > 50 * se
    assert abs(bussgang_gain_soft_limiter(1.0) - mc) < 4 * se + 1e-6


@given(st.floats(min_value=1e-3, max_value=50.0))
@settings(max_examples=60, deadline=None)
def test_soft_limiter_gain_bounded_and_decreasing(kappa):
    b = bussgang_gain_soft_limiter(kappa)
    assert 0.0 < b <= 1.0
    assert bussgang_gain_soft_limiter(kappa * 1.1) <= b + 1e-15


def test_soft_limiter_output_power_vs_sampling():
    rng = np.random.default_rng(0)
    x = (rng.standard_normal(1_000_000) + 1j * rng.standard_normal(1_000_000)) / math.sqrt(2)
    y = soft_limiter_transfer(x, a_sat=1.0)
    assert soft_limiter_output_power(1.0, 1.0) == pytest.approx(np.mean(np.abs(y) ** 2), rel=3e-3)


def test_soft_limiter_decomposition_consistent():
    pa = SoftLimiterParams.from_ibo_db(3.0, p_in=2.0)
    dec = bussgang_decompose(pa, 2.0)
    assert pa.kappa == pytest.approx(10 ** -0.3)
    assert dec.output_power == pytest.approx(soft_limiter_output_power(pa.kappa, 2.0))
    mc, _ = bussgang_decompose_mc(pa, 2.0, n_samples=400_000, seed=1)
    assert abs(dec.gain_b - mc.gain_b) < 5e-3
    # residual power E|y - B x|^2 sampled directly; out - |B|^2 P is too noisy to compare
    rng = np.random.default_rng(5)
    x = (rng.standard_normal(2_000_000) + 1j * rng.standard_normal(2_000_000))
    resid = np.abs(soft_limiter_transfer(x, pa.a_sat) - dec.gain_b * x) ** 2
    se = resid.std() / math.sqrt(resid.size)
    assert dec.distortion_power == pytest.approx(resid.mean(), abs=5 * se)


def test_unsaturated_limiter_is_identity():
    dec = bussgang_decompose(SoftLimiterParams(a_sat=math.inf, p_in=1.0), 1.0)
    assert dec.gain_b == 1.0 and dec.distortion_power == 0.0


def test_soft_limiter_transfer_clips_envelope():
    s = np.array([0.5, 2.0j, -3.0 + 4.0j, 0.0])
    out = soft_limiter_transfer(s, 1.0)
    np.testing.assert_allclose(np.abs(out), [0.5, 1.0, 1.0, 0.0])
    np.testing.assert_allclose(np.angle(out[:3]), np.angle(s[:3]))


# -- Saleh ---------------------------------------------------------------

def test_saleh_curves():
    p = SalehParams()
    assert p.peak_amplitude == pytest.approx(float(p.am_am(1.0)))
    out = saleh_transfer(1.0 + 0j, p)
    assert abs(out) == pytest.approx(1.0)
    assert np.angle(out) == pytest.approx(math.pi / 6)


@pytest.mark.parametrize("p_in", [0.05, 0.3, 1.0])
def test_saleh_quadrature_matches_sampling(p_in):
    pa = SalehParams()
    dec = bussgang_decompose(pa, p_in)
    mc, se = bussgang_decompose_mc(pa, p_in, n_samples=1_000_000, seed=2)
    assert abs(dec.gain_b - mc.gain_b) < 5e-3
    assert dec.output_power == pytest.approx(mc.output_power, abs=6 * se)


def test_saleh_params_validated():
    with pytest.raises(HardwareDomainError):
        SalehParams(alpha_a=-1.0)
    with pytest.raises(HardwareDomainError):
        SoftLimiterParams(a_sat=0.0, p_in=1.0)
    with pytest.raises(HardwareDomainError):
        bussgang_decompose(SalehParams(), 0.0)


def test_ibo_guard_warns_in_saturation():
    with pytest.warns(RuntimeWarning):
        assert not ibo_guard(2.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert ibo_guard(0.5)


# -- phase noise -----------------------------------------------------------

def test_phase_variance_from_linewidth():
    assert phase_variance_from_linewidth(10e3, 1e-6) == pytest.approx(2 * math.pi * 1e-2)
    with pytest.raises(HardwareDomainError):
        phase_variance_from_linewidth(-1.0, 1e-6)


def test_phase_correlation_matrix_entries():
    t = np.linspace(0, 1e-6, 5)
    pn = PhaseNoiseModel(variance=0.2, linewidth=50e3)
    r = phase_correlation_matrix(t, pn)
    rho = np.exp(-2 * math.pi * 50e3 * np.abs(t[:, None] - t[None, :]))
    np.testing.assert_allclose(r, np.exp(-0.2 * (1 - rho)) - math.exp(-0.2), rtol=1e-12, atol=1e-15)
    assert np.allclose(np.diag(r), 1 - math.exp(-0.2))
    assert np.min(np.linalg.eigvalsh(r)) > -1e-12


def test_phase_correlation_small_variance_keeps_precision():
    t = np.linspace(0, 1e-6, 4)
    r = phase_correlation_matrix(t, PhaseNoiseModel(variance=1e-14, linewidth=1e3))
    assert r[0, 0] == pytest.approx(1e-14, rel=1e-6)
    assert np.all(phase_correlation_matrix(t, PhaseNoiseModel()) == 0)


def test_phase_correlation_rejects_unsorted_times():
    with pytest.raises(HardwareDomainError):
        phase_correlation_matrix([0.0, 2.0, 1.0], PhaseNoiseModel(variance=0.1, linewidth=1.0))


def test_enforce_psd():
    dust = np.array([[1.0, 1.0], [1.0, 1.0 - 1e-14]])
    fixed = enforce_psd(dust)
    assert np.min(np.linalg.eigvalsh(fixed)) >= 0
    with pytest.raises(HardwareDomainError):
        enforce_psd(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_coherent_power_factor():
    pn = PhaseNoiseModel(variance=0.3)
    rng = np.random.default_rng(0)
    phi = rng.standard_normal(400_000) * math.sqrt(0.3)
    assert pn.coherent_power_factor == pytest.approx(abs(np.mean(np.exp(1j * phi))) ** 2, abs=5e-3)


# -- quality factor and profiles ---------------------------------------------

def test_gamma_component_formulas():
    assert gamma_pa(0.1) == pytest.approx(0.01)
    assert gamma_lo(10e9, 20e-15) == pytest.approx((math.pi * 10e9 * 20e-15) ** 2)
    assert gamma_adc(6) == pytest.approx(10 ** (-(6.02 * 6 + 1.76) / 10))
    g = gamma_components(0.1, 10e9, 20e-15, 6)
    assert g.total == pytest.approx(g.pa + g.lo + g.adc)


def test_profiles_registry():
    assert tuple(p["name"] for p in list_profiles()) == PROFILE_ORDER
    gammas = [get_profile(n).gamma_eff for n in PROFILE_ORDER]
    assert gammas == sorted(gammas)
    assert get_profile("high_performance").phase_variance == pytest.approx(2 * math.pi * 15e3 * 1e-6)
    assert get_profile("High-Performance").name == "high_performance"
    over = get_profile("low_cost", gamma_asserted=0.02)
    assert over.gamma_eff == 0.02
    with pytest.raises(KeyError):
        get_profile("nonexistent")


def test_component_gamma_is_reported_not_substituted():
    p = get_profile("state_of_the_art")
    s = p.summary()
    assert s["gamma_eff_used"] == p.gamma_asserted
    assert s["gamma_eff_components"] == pytest.approx(p.gamma_breakdown.total)
    q = get_profile("state_of_the_art", use_component_gamma=True)
    assert q.gamma_eff == pytest.approx(p.gamma_breakdown.total)
