"""
Transceiver hardware impairments.

PA nonlinearity (soft limiter and Saleh), Bussgang linearization under a
circular complex Gaussian input, phase-noise correlation statistics and the
hardware quality factor Gamma_eff built from datasheet-level quantities.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy import integrate
from scipy.special import erfc, roots_laguerre


class HardwareDomainError(ValueError):
    """Raised when a hardware model is evaluated outside its domain."""


# ---------------------------------------------------------------------------
# PA models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SalehParams:
    """Saleh AM-AM / AM-PM coefficients (normalized units)."""

    alpha_a: float = 2.0
    beta_a: float = 1.0
    alpha_phi: float = math.pi / 3
    beta_phi: float = 1.0

    def __post_init__(self):
        for name in ("alpha_a", "beta_a", "alpha_phi", "beta_phi"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise HardwareDomainError(f"Saleh parameter {name} must be positive and finite, got {v}")

    @property
    def peak_amplitude(self) -> float:
        """Maximum of the AM-AM curve, reached at r = 1/sqrt(beta_a)."""
        return self.alpha_a / (2.0 * math.sqrt(self.beta_a))

    def am_am(self, r):
        r = np.asarray(r, dtype=float)
        return self.alpha_a * r / (1.0 + self.beta_a * r**2)

    def am_pm(self, r):
        r = np.asarray(r, dtype=float)
        return self.alpha_phi * r**2 / (1.0 + self.beta_phi * r**2)


@dataclass(frozen=True)
class SoftLimiterParams:
    """Ideal envelope clipper: linear below a_sat, constant envelope above."""

    a_sat: float
    p_in: float

    def __post_init__(self):
        if not (self.a_sat > 0):
            raise HardwareDomainError(f"a_sat must be > 0, got {self.a_sat}")
        if not (np.isfinite(self.p_in) and self.p_in > 0):
            raise HardwareDomainError(f"p_in must be > 0 and finite, got {self.p_in}")

    @property
    def kappa(self) -> float:
        """Input back-off ratio P_in / A_sat^2."""
        return self.p_in / self.a_sat**2

    @classmethod
    def from_ibo_db(cls, ibo_db: float, p_in: float = 1.0) -> "SoftLimiterParams":
        """Build from a back-off in dB (positive = backed off, kappa < 1)."""
        kappa = 10.0 ** (-ibo_db / 10.0)
        return cls(a_sat=math.sqrt(p_in / kappa), p_in=p_in)


PAModel = Union[SalehParams, SoftLimiterParams]


def soft_limiter_transfer(s, a_sat: float):
    s = np.asarray(s, dtype=complex)
    if math.isinf(a_sat):
        return s
    r = np.abs(s)
    scale = np.where(r > a_sat, a_sat / np.where(r > 0, r, 1.0), 1.0)
    return s * scale


def saleh_transfer(s, params: SalehParams):
    """Apply the Saleh PA to complex envelope samples."""
    s = np.asarray(s, dtype=complex)
    r = np.abs(s)
    out = params.am_am(r) * np.exp(1j * (np.angle(s) + params.am_pm(r)))
    return out if out.ndim else complex(out)


def pa_transfer(s, pa: PAModel):
    if isinstance(pa, SalehParams):
        return saleh_transfer(s, pa)
    if isinstance(pa, SoftLimiterParams):
        return soft_limiter_transfer(s, pa.a_sat)
    raise HardwareDomainError(f"unsupported PA description {type(pa).__name__}")


# ---------------------------------------------------------------------------
# Bussgang decomposition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BussgangDecomposition:
    gain_b: complex
    distortion_power: float
    input_power: float

    @property
    def output_power(self) -> float:
        return abs(self.gain_b) ** 2 * self.input_power + self.distortion_power

    @property
    def distortion_ratio(self) -> float:
        """sigma_eta^2 / (|B|^2 P_in), the PA share of Gamma_eff."""
        return self.distortion_power / (abs(self.gain_b) ** 2 * self.input_power)


def bussgang_gain_soft_limiter(kappa: float) -> float:
    """Bussgang gain of the envelope soft limiter for a CN(0, P_in) input.

    With u = |x|^2 / A_sat^2 exponentially distributed (mean kappa), the
    Rayleigh-amplitude integral of E[U(x) x*] / P_in evaluates to

        B = 1 - exp(-1/kappa) + sqrt(pi / (4 kappa)) * erfc(1 / sqrt(kappa)).

    B -> 1 as kappa -> 0 and decays like sqrt(pi / (4 kappa)) for deep
    saturation.
    """
    if not np.isfinite(kappa) or kappa <= 0:
        raise HardwareDomainError(f"kappa must be positive and finite, got {kappa}")
    inv = 1.0 / kappa
    return float(1.0 - math.exp(-inv) + math.sqrt(math.pi * inv / 4.0) * erfc(math.sqrt(inv)))


def bussgang_gain_erfc_variant(kappa: float) -> float:
    """Alternative erfc expression 1 - e^{-1/k} - sqrt(pi/2k) erfc(1/sqrt(2k)).

    Kept for comparison only; it does not equal E[U(x)x*]/P_in for the soft
    limiter and turns negative for kappa >~ 1.9.
    """
    if not np.isfinite(kappa) or kappa <= 0:
        raise HardwareDomainError(f"kappa must be positive and finite, got {kappa}")
    return float(1.0 - math.exp(-1.0 / kappa)
                 - math.sqrt(math.pi / (2.0 * kappa)) * erfc(1.0 / math.sqrt(2.0 * kappa)))


def soft_limiter_output_power(kappa: float, p_in: float) -> float:
    """E|U(x)|^2 = P_in (1 - exp(-1/kappa)); tends to A_sat^2 as kappa grows."""
    return p_in * (1.0 - math.exp(-1.0 / kappa))


_LAGUERRE_ORDER = 96
_LAG_NODES, _LAG_WEIGHTS = roots_laguerre(_LAGUERRE_ORDER)


def _saleh_moments(params: SalehParams, p_in: float):
    # E over |x|^2 = p_in * t, t ~ Exp(1)
    def corr(t):
        r = np.sqrt(p_in * t)
        return params.am_am(r) * r * np.exp(1j * params.am_pm(r))

    def power(t):
        r = np.sqrt(p_in * t)
        return params.am_am(r) ** 2

    c_gl = np.sum(_LAG_WEIGHTS * corr(_LAG_NODES))
    p_gl = np.sum(_LAG_WEIGHTS * power(_LAG_NODES))

    # adaptive cross-check; Laguerre can be poor when p_in*beta is large
    re = integrate.quad(lambda t: np.real(corr(t)) * np.exp(-t), 0, np.inf, limit=200)[0]
    im = integrate.quad(lambda t: np.imag(corr(t)) * np.exp(-t), 0, np.inf, limit=200)[0]
    pw = integrate.quad(lambda t: power(t) * np.exp(-t), 0, np.inf, limit=200)[0]
    c_ad = re + 1j * im
    if abs(c_gl - c_ad) > 1e-8 * max(abs(c_ad), 1e-300) or abs(p_gl - pw) > 1e-8 * max(pw, 1e-300):
        return c_ad, pw
    return c_gl, p_gl


def bussgang_decompose(pa: PAModel, p_in: float) -> BussgangDecomposition:
    """Bussgang gain and distortion power for x ~ CN(0, p_in) through ``pa``.

    The soft limiter uses the closed forms; the Saleh model is integrated
    over the Rayleigh amplitude density (Gauss-Laguerre, with an adaptive
    quadrature fallback).
    """
    if not (np.isfinite(p_in) and p_in > 0):
        raise HardwareDomainError(f"p_in must be > 0, got {p_in}")
    if isinstance(pa, SoftLimiterParams):
        if math.isinf(pa.a_sat):
            return BussgangDecomposition(gain_b=1.0 + 0j, distortion_power=0.0, input_power=p_in)
        kappa = p_in / pa.a_sat**2
        b = bussgang_gain_soft_limiter(kappa)
        out = soft_limiter_output_power(kappa, p_in)
        return BussgangDecomposition(gain_b=complex(b), distortion_power=max(out - b * b * p_in, 0.0),
                                     input_power=p_in)
    if isinstance(pa, SalehParams):
        cross, out = _saleh_moments(pa, p_in)
        b = complex(cross / p_in)
        return BussgangDecomposition(gain_b=b, distortion_power=max(float(out) - abs(b) ** 2 * p_in, 0.0),
                                     input_power=p_in)
    raise HardwareDomainError(f"unsupported PA description {type(pa).__name__}")


def bussgang_decompose_mc(pa: PAModel, p_in: float, n_samples: int = 1_000_000, seed: int = 0):
    """Sample-average Bussgang decomposition.

    Returns (decomposition, standard error of the output-power estimate).
    """
    rng = np.random.default_rng(seed)
    x = (rng.standard_normal(n_samples) + 1j * rng.standard_normal(n_samples)) * math.sqrt(p_in / 2)
    u = pa_transfer(x, pa)
    b = np.mean(u * np.conj(x)) / p_in
    pw = np.abs(u) ** 2
    out = float(np.mean(pw))
    dec = BussgangDecomposition(gain_b=complex(b), distortion_power=out - abs(b) ** 2 * p_in, input_power=p_in)
    return dec, float(np.std(pw) / math.sqrt(n_samples))


def ibo_guard(kappa: float, limit: float = 1.0) -> bool:
    """Warn when the drive level leaves the quasi-linear regime. Returns True if OK."""
    if kappa > limit:
        warnings.warn(f"input back-off kappa={kappa:.3g} implies deep PA saturation; "
                      "a power-independent Gamma_eff is not accurate here", RuntimeWarning, stacklevel=2)
        return False
    return True


# ---------------------------------------------------------------------------
# Phase noise
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhaseNoiseModel:
    """Stationary small-phase model: variance sigma_phi^2, Lorentzian linewidth."""

    variance: float = 0.0
    linewidth: float = 0.0
    jitter_rms: float = 0.0

    def __post_init__(self):
        if self.variance < 0 or self.linewidth < 0 or self.jitter_rms < 0:
            raise HardwareDomainError("phase-noise variance, linewidth and jitter must be non-negative")

    @classmethod
    def from_linewidth(cls, linewidth: float, t_obs: float, jitter_rms: float = 0.0) -> "PhaseNoiseModel":
        return cls(variance=phase_variance_from_linewidth(linewidth, t_obs), linewidth=linewidth,
                   jitter_rms=jitter_rms)

    def correlation(self, dt):
        return np.exp(-2.0 * np.pi * self.linewidth * np.abs(dt))

    @property
    def coherence_time(self) -> float:
        return math.inf if self.linewidth == 0 else 1.0 / self.linewidth

    @property
    def coherent_power_factor(self) -> float:
        """|E[exp(j phi)]|^2 = exp(-sigma_phi^2)."""
        return math.exp(-self.variance)


def phase_variance_from_linewidth(linewidth: float, t_obs: float) -> float:
    """Accumulated Wiener phase variance 2*pi*linewidth*T over a window."""
    if linewidth < 0 or t_obs < 0:
        raise HardwareDomainError("linewidth and observation window must be non-negative")
    return 2.0 * math.pi * linewidth * t_obs


PSD_TOL = 1e-10


def phase_correlation_matrix(times: Sequence[float], model: PhaseNoiseModel) -> np.ndarray:
    """[R]_kl = exp(-s(1 - rho_kl)) - exp(-s), rho_kl = exp(-2 pi dnu |t_k - t_l|)."""
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise HardwareDomainError("times must be a non-empty 1-D grid")
    if t.size > 1 and not np.all(np.diff(t) > 0):
        raise HardwareDomainError("pilot times must be strictly increasing")
    s = model.variance
    if s == 0:
        return np.zeros((t.size, t.size))
    rho = model.correlation(t[:, None] - t[None, :])
    # exp(-s) * expm1(s*rho) avoids cancellation for small s
    r_phi = math.exp(-s) * np.expm1(s * rho)
    r_phi = 0.5 * (r_phi + r_phi.T)
    return enforce_psd(r_phi)


def enforce_psd(mat: np.ndarray, tol: float = PSD_TOL) -> np.ndarray:
    """Clip floating-point dust below zero; reject genuinely indefinite input."""
    w, v = np.linalg.eigh(mat)
    scale = max(1.0, float(np.max(np.abs(w))))
    if w[0] < -tol * scale:
        raise HardwareDomainError(f"matrix is not positive semidefinite (min eigenvalue {w[0]:.3e})")
    if w[0] < 0:
        w = np.clip(w, 0.0, None)
        mat = (v * w) @ v.T
        mat = 0.5 * (mat + mat.T)
    return mat


# ---------------------------------------------------------------------------
# Hardware quality factor
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GammaBreakdown:
    pa: float
    lo: float
    adc: float

    @property
    def total(self) -> float:
        return self.pa + self.lo + self.adc

    def as_dict(self) -> dict:
        return {"gamma_pa": self.pa, "gamma_lo": self.lo, "gamma_adc": self.adc, "gamma_eff": self.total}


def gamma_pa(evm_pa: float) -> float:
    return evm_pa**2


def gamma_lo(b_sig: float, jitter_rms: float) -> float:
    return (math.pi * b_sig * jitter_rms) ** 2


def gamma_adc(enob: float) -> float:
    return 10.0 ** (-(6.02 * enob + 1.76) / 10.0)


def gamma_components(evm_pa: float, b_sig: float, jitter_rms: float, enob: float) -> GammaBreakdown:
    """Gamma_PA, Gamma_LO and Gamma_ADC from datasheet values; ``.total`` is Gamma_eff."""
    if not (0 <= evm_pa < 1):
        raise HardwareDomainError(f"evm_pa must lie in [0, 1), got {evm_pa}")
    if not (b_sig > 0):
        raise HardwareDomainError(f"b_sig must be > 0, got {b_sig}")
    if jitter_rms < 0:
        raise HardwareDomainError(f"jitter_rms must be >= 0, got {jitter_rms}")
    if not (enob > 0):
        raise HardwareDomainError(f"enob must be > 0, got {enob}")
    return GammaBreakdown(pa=gamma_pa(evm_pa), lo=gamma_lo(b_sig, jitter_rms), adc=gamma_adc(enob))


@dataclass(frozen=True)
class HardwareProfile:
    """A named transceiver grade.

    ``gamma_asserted`` is the headline quality factor used for link-level
    results; ``gamma_breakdown`` is recomputed from the component fields and
    is reported next to it, never substituted silently.
    """

    name: str
    label: str
    evm_pa: float
    jitter_rms: float
    enob: float
    linewidth: float
    signal_bandwidth: float
    system_bandwidth: float
    gamma_asserted: float
    phase_window: float = 1e-6
    phase_variance_override: float | None = None
    use_component_gamma: bool = False
    gamma_breakdown: GammaBreakdown = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "gamma_breakdown",
                           gamma_components(self.evm_pa, self.signal_bandwidth, self.jitter_rms, self.enob))
        if self.gamma_asserted < 0:
            raise HardwareDomainError("gamma_asserted must be >= 0")

    @property
    def gamma_components_total(self) -> float:
        return self.gamma_breakdown.total

    @property
    def gamma_eff(self) -> float:
        return self.gamma_components_total if self.use_component_gamma else self.gamma_asserted

    @property
    def phase_variance(self) -> float:
        if self.phase_variance_override is not None:
            return self.phase_variance_override
        return phase_variance_from_linewidth(self.linewidth, self.phase_window)

    @property
    def phase_noise(self) -> PhaseNoiseModel:
        return PhaseNoiseModel(variance=self.phase_variance, linewidth=self.linewidth, jitter_rms=self.jitter_rms)

    def summary(self) -> dict:
        out = {
            "name": self.name,
            "label": self.label,
            "evm_pa": self.evm_pa,
            "jitter_rms_s": self.jitter_rms,
            "enob_bits": self.enob,
            "linewidth_hz": self.linewidth,
            "signal_bandwidth_hz": self.signal_bandwidth,
            "system_bandwidth_hz": self.system_bandwidth,
            "phase_window_s": self.phase_window,
            "phase_variance_rad2": self.phase_variance,
            "gamma_asserted": self.gamma_asserted,
            "gamma_source": "components" if self.use_component_gamma else "asserted",
            "gamma_eff_used": self.gamma_eff,
        }
        out.update({k + "_components": v for k, v in self.gamma_breakdown.as_dict().items()})
        return out
