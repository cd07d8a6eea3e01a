import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import random_simplex_points
from thzisac.profiles import get_profile
from thzisac.scenario import LinkScenario
from thzisac.tradeoff import (Constellation, ImpairedChannel, InputDistribution, TradeoffError, TradeoffProblem,
                              ba_optimize, distortion_of, mi_gradient, mutual_information_mc, project_simplex)


# -- simplex projection ------------------------------------------------------

def test_projection_is_nearest_point_among_samples():
    rng = np.random.default_rng(0)
    samples = random_simplex_points(5, 20_000, seed=1)
    for _ in range(20):
        v = rng.normal(0, 1, 5)
        p = project_simplex(v).probs
        d_proj = np.linalg.norm(v - p)
        assert d_proj <= np.min(np.linalg.norm(samples - v, axis=1)) + 1e-12


@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=20))
@settings(max_examples=100, deadline=None)
def test_projection_properties(vals):
    v = np.array(vals)
    p = project_simplex(v).probs
    assert np.all(p >= 0) and abs(p.sum() - 1) < 1e-12
    # idempotent and order preserving
    np.testing.assert_allclose(project_simplex(p).probs, p, atol=1e-12)
    assert np.all(np.diff(p[np.argsort(v)]) >= -1e-12)


def test_distribution_validation():
    with pytest.raises(TradeoffError):
        InputDistribution(np.array([0.5, 0.6]))
    with pytest.raises(TradeoffError):
        InputDistribution(np.array([-0.1, 1.1]))
    assert InputDistribution.uniform(8).entropy_bits() == pytest.approx(3.0)


# -- constellations ----------------------------------------------------------

def test_constellations_unit_power():
    for name in ("qam16", "qam64", "psk8", "bpsk"):
        c = Constellation.from_name(name)
        assert c.average_power(InputDistribution.uniform(len(c))) == pytest.approx(1.0)
    with pytest.raises(TradeoffError):
        Constellation.from_name("qam15")
    with pytest.raises(TradeoffError):
        Constellation(np.array([1.0, 1.0]))


def test_nonuniform_distribution_changes_power():
    c = Constellation.from_name("qam16")
    outer = np.argmax(c.energies)
    p = np.zeros(16)
    p[outer] = 1.0
    assert c.average_power(InputDistribution(p)) == pytest.approx(1.8)
    assert np.mean(np.abs(c.normalized(InputDistribution(p))) ** 2) > 0


# -- mutual information ------------------------------------------------------

def test_mi_bounds():
    c = Constellation.from_name("qam16")
    u = InputDistribution.uniform(16)
    hi = mutual_information_mc(c, u, ImpairedChannel(snr0=1e5), 20_000, 0)
    assert hi.bits == pytest.approx(4.0, abs=1e-3)
    ch = ImpairedChannel(snr0=30.0, gamma_eff=0.01, sigma_phi2=0.05)
    est = mutual_information_mc(c, u, ch, 50_000, 0)
    assert 0 < est.bits <= ch.capacity_bound(1.0) + 3 * est.stderr
    point = InputDistribution(np.eye(16)[3])
    assert mutual_information_mc(c, point, ch, 20_000, 0).bits == 0.0
    with pytest.raises(TradeoffError):
        mutual_information_mc(c, u, ch, 1000, 0)


def test_mi_matches_closed_form_at_low_snr():
    c = Constellation.from_name("psk8")
    ch = ImpairedChannel(snr0=0.05, gamma_eff=0.01, sigma_phi2=0.02)
    est = mutual_information_mc(c, InputDistribution.uniform(8), ch, 200_000, 4)
    assert abs(est.bits - ch.capacity_bound()) < 3 * est.stderr + 2e-3


def test_mi_common_random_numbers_are_deterministic():
    c = Constellation.from_name("qam16")
    ch = ImpairedChannel(snr0=100.0, gamma_eff=0.01)
    p = InputDistribution.uniform(16)
    assert mutual_information_mc(c, p, ch, 20_000, 9).bits == mutual_information_mc(c, p, ch, 20_000, 9).bits


def test_noise_derivative_matches_finite_difference():
    c = Constellation.from_name("qam16")
    ch = ImpairedChannel(snr0=50.0, gamma_eff=0.02, sigma_phi2=0.05)
    p = InputDistribution.uniform(16)
    est = mutual_information_mc(c, p, ch, 20_000, 2)
    nv = ch.noise_var(1.0)
    h = 1e-5 * nv
    up = mutual_information_mc(c, p, ch, 20_000, 2, _noise_var=nv + h).bits
    dn = mutual_information_mc(c, p, ch, 20_000, 2, _noise_var=nv - h).bits
    assert est.dnoise == pytest.approx((up - dn) / (2 * h), rel=1e-4)


def test_mi_gradient_directional_derivative():
    c = Constellation.from_name("qam16")
    ch = ImpairedChannel(snr0=50.0, gamma_eff=0.02, sigma_phi2=0.05)
    rng = np.random.default_rng(3)
    p = InputDistribution(rng.dirichlet(np.full(16, 5.0)))
    _, g = mi_gradient(c, p, ch, 20_000, 6)
    d = rng.normal(size=16)
    d -= d.mean()
    h = 1e-6
    up = mutual_information_mc(c, InputDistribution(p.probs + h * d), ch, 20_000, 6).bits
    dn = mutual_information_mc(c, InputDistribution(p.probs - h * d), ch, 20_000, 6).bits
    assert g @ d == pytest.approx((up - dn) / (2 * h), rel=1e-3)


def test_random_phase_mode_reduces_to_coherent_without_phase_noise():
    c = Constellation.from_name("qam16")
    p = InputDistribution.uniform(16)
    a = mutual_information_mc(c, p, ImpairedChannel(snr0=100, gamma_eff=0.01, sigma_phi2=0.0,
                                                    phase_mode="random"), 20_000, 0)
    b = mutual_information_mc(c, p, ImpairedChannel(snr0=100, gamma_eff=0.01), 20_000, 0)
    assert a.bits == pytest.approx(b.bits, abs=1e-12)
    r = mutual_information_mc(c, p, ImpairedChannel(snr0=100, gamma_eff=0.01, sigma_phi2=0.1,
                                                    phase_mode="random"), 20_000, 0)
    assert r.bits < b.bits


def test_channel_sampler_statistics():
    ch = ImpairedChannel(snr0=10.0, gamma_eff=0.1, sigma_phi2=0.2)
    y = ch.sample(np.ones(200_000), rng=1)
    assert np.mean(y).real == pytest.approx(ch.amplitude, rel=1e-2)
    assert np.var(y) == pytest.approx(ch.noise_var(1.0), rel=2e-2)


# -- distortion and optimizer ------------------------------------------------

@pytest.fixture(scope="module")
def hp_problem():
    sc = LinkScenario(profile=get_profile("high_performance"))
    return TradeoffProblem.from_scenario(sc, Constellation.from_name("qam16"), n_samples=20_000)


def test_distortion_decreases_with_power(hp_problem):
    dm = hp_problem.distortion
    vals = [dm.value(p) for p in (0.2, 0.5, 1.0, 1.8)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert dm.derivative(1.0) < 0
    assert dm.minimum_over(hp_problem.constellation) == pytest.approx(dm.value(1.8))
    assert math.isinf(dm.value(0.0))


def test_ba_invariants(hp_problem):
    c = hp_problem.constellation
    dm = hp_problem.distortion
    target = 0.5 * (dm.minimum_over(c) + dm.value(1.0))
    pt = ba_optimize(c, hp_problem, target, seed=1, max_iters=60)
    assert pt.feasible and pt.distortion <= target
    assert pt.distortion == pytest.approx(distortion_of(pt.distribution, c, dm))
    assert pt.distortion >= dm.minimum_over(c)
    avg = c.average_power(pt.distribution)
    assert pt.rate <= hp_problem.channel.capacity_bound(avg) + 3 * pt.rate_stderr
    # each accepted step never lowers the Lagrangian at fixed multiplier
    assert all(after >= before - 1e-12 for before, after in pt.lagrangian_trace)


def test_ba_reports_infeasible_target(hp_problem):
    c = hp_problem.constellation
    pt = ba_optimize(c, hp_problem, 0.5 * hp_problem.distortion.minimum_over(c), seed=1, max_iters=20)
    assert not pt.feasible


def test_ba_rejects_bad_target(hp_problem):
    with pytest.raises(TradeoffError):
        ba_optimize(hp_problem.constellation, hp_problem, 0.0)


def test_unconstrained_ba_prefers_uniform_psk():
    psk = Constellation.from_name("psk8")
    sc = LinkScenario(profile=get_profile("state_of_the_art")).with_snr0_db(5.0)
    prob = TradeoffProblem.from_scenario(sc, psk, n_samples=40_000)
    pt = ba_optimize(psk, prob, math.inf, seed=2)
    assert pt.converged
    np.testing.assert_allclose(pt.distribution.probs, 1 / 8, atol=0.02)
