"""Hardware-limited capacity: SNR, post-impairment SINR, ceiling, net rate."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class CapacityDomainError(ValueError):
    pass


def snr0(p_w, g, bussgang_gain, n0_w):
    """Pre-impairment SNR P |g|^2 |B|^2 / N0."""
    p_w = np.asarray(p_w, dtype=float)
    if np.any(p_w < 0) or n0_w <= 0:
        raise CapacityDomainError("power must be >= 0 and noise > 0")
    return p_w * abs(g) ** 2 * abs(bussgang_gain) ** 2 / n0_w


def sinr_eff(snr0_lin, sigma_phi2, gamma_eff):
    """SNR0 exp(-sigma_phi^2) / (1 + SNR0 Gamma_eff)."""
    s = np.asarray(snr0_lin, dtype=float)
    if np.any(s < 0) or gamma_eff < 0 or sigma_phi2 < 0:
        raise CapacityDomainError("snr0, gamma_eff and sigma_phi2 must be non-negative")
    return s * math.exp(-sigma_phi2) / (1.0 + s * gamma_eff)


def capacity(sinr):
    """log2(1 + SINR) in bits/symbol."""
    return np.log2(1.0 + np.asarray(sinr, dtype=float))


def ceiling(sigma_phi2, gamma_eff) -> float:
    """Saturation capacity log2(1 + exp(-sigma_phi^2)/Gamma_eff); inf when Gamma_eff = 0."""
    if gamma_eff < 0 or sigma_phi2 < 0:
        raise CapacityDomainError("gamma_eff and sigma_phi2 must be non-negative")
    if gamma_eff == 0:
        return math.inf
    return math.log2(1.0 + math.exp(-sigma_phi2) / gamma_eff)


def awgn_capacity(snr0_lin):
    return capacity(snr0_lin)


def net_rate(capacity_bits, m_pilots: int, frame_symbols: int, bandwidth_hz: float):
    """(1 - M/K) C B in bit/s."""
    if m_pilots > frame_symbols or m_pilots < 0:
        raise CapacityDomainError("need 0 <= M <= K")
    if bandwidth_hz <= 0:
        raise CapacityDomainError("bandwidth must be positive")
    return (1.0 - m_pilots / frame_symbols) * np.asarray(capacity_bits, dtype=float) * bandwidth_hz


def knee_snr0(gamma_eff: float) -> float:
    """SNR0 at which distortion equals thermal noise (P Gamma = N0 in received terms)."""
    return math.inf if gamma_eff == 0 else 1.0 / gamma_eff


@dataclass(frozen=True)
class LinkBudget:
    tx_power_w: float
    snr0: float
    sinr_eff: float
    capacity_bits: float
    ceiling_bits: float
    net_rate_bps: float

    @classmethod
    def evaluate(cls, tx_power_w, snr0_lin, sigma_phi2, gamma_eff, m_pilots, frame_symbols, bandwidth_hz):
        s = float(sinr_eff(snr0_lin, sigma_phi2, gamma_eff))
        c = float(capacity(s))
        return cls(tx_power_w=float(tx_power_w), snr0=float(snr0_lin), sinr_eff=s, capacity_bits=c,
                   ceiling_bits=ceiling(sigma_phi2, gamma_eff),
                   net_rate_bps=float(net_rate(c, m_pilots, frame_symbols, bandwidth_hz)))
