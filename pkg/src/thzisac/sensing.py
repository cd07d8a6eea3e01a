"""
Fisher information and Bayesian CRLBs for range, LOS velocity and pointing
error from a block of constant-modulus pilots.

Observation model per pilot k (phase noise conditioned out of the mean):

    y_k = g(R, theta) * exp(+j k_c v t_k) * B * s_k * exp(j phi_k) + n_k
    g(R, theta) = (C / R) * exp(-gamma |theta|^2) * exp(-j k_c R)

with k_c = 2 pi f_c / c and v the LOS velocity offset (positive = closing).
The Gaussian-equivalent covariance is either diagonal (additive terms
only, the phase loss entering as the coherent factor exp(-sigma_phi^2)) or
the full correlated form with the phase-noise correlation matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .constants import SPEED_OF_LIGHT
from .hardware import PhaseNoiseModel, phase_correlation_matrix
from .channel import NoiseBudget


class SensingError(ValueError):
    pass


class UnknownParameterError(SensingError, KeyError):
    pass


COVARIANCE_MODES = ("diagonal", "correlated")

OBSERVABLE_LABELS = ("range", "los_velocity", "theta_x", "theta_y")
VECTOR_LABELS = ("dR_x", "dR_y", "dR_z", "dV_x", "dV_y", "dV_z")

PARAM_UNITS = {
    "range": "m", "los_velocity": "m/s", "theta_x": "rad", "theta_y": "rad",
    "dR_x": "m", "dR_y": "m", "dR_z": "m", "dV_x": "m/s", "dV_y": "m/s", "dV_z": "m/s",
}


# ---------------------------------------------------------------------------
# Pilot frame
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PilotFrame:
    """M constant-modulus pilots spread over a frame of K symbols.

    Default timing places the pilots at the centres of M equal slots of the
    frame, referenced to the frame centre, so the grid is symmetric about 0.
    """

    m_pilots: int = 64
    frame_symbols: int = 1024
    frame_duration: float = 1e-6
    symbol_amp: float = 1.0
    times: tuple | None = None

    def __post_init__(self):
        if self.m_pilots < 2:
            raise SensingError("need at least 2 pilots")
        if self.m_pilots > self.frame_symbols:
            raise SensingError("pilot count cannot exceed frame size")
        if self.frame_duration <= 0:
            raise SensingError("frame duration must be positive")
        if self.symbol_amp <= 0:
            raise SensingError("pilot amplitude must be positive")
        if self.times is None:
            slot = self.frame_duration / self.m_pilots
            t = (np.arange(self.m_pilots) + 0.5) * slot - 0.5 * self.frame_duration
        else:
            t = np.asarray(self.times, dtype=float)
            if t.shape != (self.m_pilots,):
                raise SensingError("times must have length m_pilots")
            if not np.all(np.diff(t) > 0):
                raise SensingError("pilot times must be strictly increasing")
        object.__setattr__(self, "times", tuple(float(x) for x in t))

    @property
    def t(self) -> np.ndarray:
        return np.asarray(self.times)

    @property
    def pilot_power(self) -> float:
        return self.symbol_amp**2

    @property
    def overhead(self) -> float:
        return self.m_pilots / self.frame_symbols


def check_constant_modulus(pilots, rtol: float = 1e-9):
    a = np.abs(np.asarray(pilots))
    if a.size and np.ptp(a) > rtol * np.max(a):
        raise SensingError("correlated covariance form requires constant-modulus pilots")


# ---------------------------------------------------------------------------
# State
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SensingState:
    """Everything the FIM needs, in linear SI units.

    ``free_space_amp`` is |g| at boresight and nominal range (gains included).
    ``pointing_amp`` is an extra amplitude factor, e.g. the square root of a
    Monte-Carlo averaged pointing loss. Distortion power at the receiver is
    gamma_eff * |g|^2 |B|^2 |s|^2. The squint residual is held fixed at its
    nominal value (``dse_below_db`` under the nominal distortion) unless
    given explicitly.
    """

    carrier_hz: float
    range_m: float
    free_space_amp: float
    amp_rolloff: float
    frame: PilotFrame
    thermal_w: float
    gamma_eff: float
    phase_noise: PhaseNoiseModel = PhaseNoiseModel()
    bussgang_gain: complex = 1.0
    theta: tuple = (0.0, 0.0)
    pointing_amp: float = 1.0
    los_velocity: float = 0.0
    los_unit: tuple = (1.0, 0.0, 0.0)
    dse_below_db: float = 30.0
    dse_residual_w: float | None = None
    covariance: str = "diagonal"

    def __post_init__(self):
        if self.covariance not in COVARIANCE_MODES:
            raise SensingError(f"covariance must be one of {COVARIANCE_MODES}")
        if self.range_m <= 0 or self.carrier_hz <= 0 or self.free_space_amp <= 0:
            raise SensingError("range, carrier and channel amplitude must be positive")
        if self.thermal_w < 0 or self.gamma_eff < 0 or self.amp_rolloff < 0:
            raise SensingError("noise, quality factor and rolloff must be non-negative")
        object.__setattr__(self, "theta", tuple(float(x) for x in self.theta))
        if self.dse_residual_w is None:
            object.__setattr__(self, "dse_residual_w",
                               self.distortion_w() * 10.0 ** (-self.dse_below_db / 10.0))

    # -- channel pieces -----------------------------------------------------

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi * self.carrier_hz / SPEED_OF_LIGHT

    def amplitude(self, range_m=None, theta=None) -> float:
        r = self.range_m if range_m is None else range_m
        th = np.asarray(self.theta if theta is None else theta, dtype=float)
        return (self.free_space_amp * self.range_m / r * self.pointing_amp
                * math.exp(-self.amp_rolloff * float(th @ th)))

    def gain(self, range_m=None, theta=None, range_offset: float = 0.0) -> complex:
        # carrier phase split as k*R0 + k*dR so small perturbations keep full precision
        r0 = self.range_m
        delta = (0.0 if range_m is None else range_m - r0) + range_offset
        k = self.wavenumber
        return (self.amplitude(r0 + delta, theta) * complex(np.exp(-1j * k * r0))
                * complex(np.exp(-1j * k * delta)))

    def signal_scale(self) -> float:
        """|B|^2 |s|^2."""
        return abs(self.bussgang_gain) ** 2 * self.frame.pilot_power

    def distortion_w(self, range_m=None, theta=None) -> float:
        return self.gamma_eff * self.amplitude(range_m, theta) ** 2 * self.signal_scale()

    def noise_budget(self) -> NoiseBudget:
        return NoiseBudget(thermal_w=self.thermal_w, distortion_w=self.distortion_w(),
                           dse_residual_w=self.dse_residual_w)

    def sigma2_add(self, range_m=None, theta=None) -> float:
        return self.thermal_w + self.distortion_w(range_m, theta) + self.dse_residual_w

    @property
    def snr0(self) -> float:
        return self.amplitude() ** 2 * self.signal_scale() / self.thermal_w

    def with_(self, **kw) -> "SensingState":
        if "frame" not in kw and "pilot_power" in kw:
            p = kw.pop("pilot_power")
            kw["frame"] = replace(self.frame, symbol_amp=math.sqrt(p))
        keep_dse = kw.pop("keep_dse", False)
        if not keep_dse and "dse_residual_w" not in kw:
            kw["dse_residual_w"] = None
        return replace(self, **kw)


# ---------------------------------------------------------------------------
# Mean vector and gradients
# ---------------------------------------------------------------------------

def _param_values(state: SensingState) -> dict:
    return {"range": state.range_m, "los_velocity": state.los_velocity,
            "theta_x": state.theta[0], "theta_y": state.theta[1]}


def mean_vector(state: SensingState, **params) -> np.ndarray:
    """Conditional mean of the pilot observations.

    Keyword overrides for range, los_velocity, theta_x, theta_y, or the 3D
    offsets dR_* / dV_* (added to the nominal position/velocity along the
    axes; the LOS direction used for projection stays at its nominal
    value) are used for finite-difference checks.
    """
    vals = _param_values(state)
    u = np.asarray(state.los_unit)
    dr = np.array([params.pop(f"dR_{a}", 0.0) for a in "xyz"])
    dv = np.array([params.pop(f"dV_{a}", 0.0) for a in "xyz"])
    for k, v in params.items():
        if k not in vals:
            raise UnknownParameterError(k)
        vals[k] = v
    vel = vals["los_velocity"] + float(u @ dv)
    g = state.gain(vals["range"], (vals["theta_x"], vals["theta_y"]), range_offset=float(u @ dr))
    t = state.frame.t
    return g * np.exp(1j * state.wavenumber * vel * t) * state.bussgang_gain * state.frame.symbol_amp


def mean_gradient(param: str, state: SensingState) -> np.ndarray:
    """Analytic derivative of the conditional mean vector w.r.t. one parameter."""
    m = mean_vector(state)
    k = state.wavenumber
    t = state.frame.t
    u = np.asarray(state.los_unit)
    if param == "range":
        return m * (-1.0 / state.range_m - 1j * k)
    if param == "los_velocity":
        return m * (1j * k * t)
    if param in ("theta_x", "theta_y"):
        idx = 0 if param == "theta_x" else 1
        return m * (-2.0 * state.amp_rolloff * state.theta[idx])
    if param in ("dR_x", "dR_y", "dR_z"):
        return u["xyz".index(param[-1])] * mean_gradient("range", state)
    if param in ("dV_x", "dV_y", "dV_z"):
        return u["xyz".index(param[-1])] * mean_gradient("los_velocity", state)
    raise UnknownParameterError(f"unknown parameter label {param!r}")


def gain_power_gradient(param: str, state: SensingState) -> float:
    """d|g|^2 / d(param), used for the signal-dependent covariance terms."""
    a2 = state.amplitude() ** 2
    u = np.asarray(state.los_unit)
    if param == "range":
        return -2.0 * a2 / state.range_m
    if param in ("los_velocity", "dV_x", "dV_y", "dV_z"):
        return 0.0
    if param in ("theta_x", "theta_y"):
        idx = 0 if param == "theta_x" else 1
        return -4.0 * state.amp_rolloff * state.theta[idx] * a2
    if param in ("dR_x", "dR_y", "dR_z"):
        return u["xyz".index(param[-1])] * gain_power_gradient("range", state)
    raise UnknownParameterError(f"unknown parameter label {param!r}")


# ---------------------------------------------------------------------------
# Covariance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ObservationCovariance:
    matrix: np.ndarray
    phase_part: np.ndarray
    additive_part: float
    r_phi: np.ndarray | None = None

    def __post_init__(self):
        herm = np.max(np.abs(self.matrix - self.matrix.conj().T)) if self.matrix.size else 0.0
        if herm > 1e-12 * max(1.0, float(np.max(np.abs(self.matrix)))):
            raise SensingError(f"covariance not Hermitian (max asymmetry {herm:.3e})")


def build_covariance(frame: PilotFrame, g: complex, bussgang_gain: complex, pn: PhaseNoiseModel,
                     noise: NoiseBudget, pilots=None) -> ObservationCovariance:
    """|g|^2 |B|^2 |s|^2 R_phi + sigma_add^2 I."""
    if pilots is not None:
        check_constant_modulus(pilots)
    r_phi = phase_correlation_matrix(frame.t, pn)
    scale = abs(g) ** 2 * abs(bussgang_gain) ** 2 * frame.pilot_power
    phase_part = scale * r_phi
    mat = phase_part + noise.effective_w * np.eye(frame.m_pilots)
    return ObservationCovariance(matrix=mat, phase_part=phase_part, additive_part=noise.effective_w, r_phi=r_phi)


def state_covariance(state: SensingState) -> ObservationCovariance:
    if state.covariance == "diagonal":
        m = state.frame.m_pilots
        s2 = state.sigma2_add()
        return ObservationCovariance(matrix=s2 * np.eye(m), phase_part=np.zeros((m, m)), additive_part=s2)
    return build_covariance(state.frame, state.gain(), state.bussgang_gain, state.phase_noise, state.noise_budget())


def covariance_gradient(param: str, state: SensingState, cov: ObservationCovariance) -> np.ndarray:
    dg2 = gain_power_gradient(param, state)
    m = state.frame.m_pilots
    if dg2 == 0.0:
        return np.zeros((m, m))
    out = dg2 * state.gamma_eff * state.signal_scale() * np.eye(m)
    if state.covariance == "correlated" and cov.r_phi is not None:
        out = out + dg2 * state.signal_scale() * cov.r_phi
    return out


# ---------------------------------------------------------------------------
# FIM
# ---------------------------------------------------------------------------

_COND_LIMIT = 1e15


def slepian_bangs_fim(gradients, covariance, cov_gradients=None, coherent_factor: float = 1.0,
                      return_parts: bool = False):
    """Gaussian FIM with parameter-dependent mean and covariance.

    gradients: (n, M) complex array of d(mean)/d(eta_i).
    covariance: (M, M) Hermitian matrix or ObservationCovariance.
    cov_gradients: sequence of n entries, each an (M, M) matrix or a scalar
        s meaning s * I (diagonal sensitivity).
    coherent_factor multiplies the mean term only.

    Observations are circularly-symmetric complex Gaussian, so the covariance
    term is tr(S^-1 dS_i S^-1 dS_j) without the 1/2 of the real-valued case.
    """
    sig = covariance.matrix if isinstance(covariance, ObservationCovariance) else np.asarray(covariance)
    d = np.atleast_2d(np.asarray(gradients, dtype=complex))
    n, m = d.shape
    if sig.shape != (m, m):
        raise SensingError("gradient length does not match covariance size")
    cond = np.linalg.cond(sig)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise SensingError(f"covariance is singular or ill-conditioned (condition number {cond:.3e})")
    sig_inv_d = np.linalg.solve(sig, d.T)  # (M, n)
    j_mean = 2.0 * np.real(d.conj() @ sig_inv_d)
    j_mean = coherent_factor * 0.5 * (j_mean + j_mean.T)

    j_trace = np.zeros((n, n))
    if cov_gradients is not None:
        if len(cov_gradients) != n:
            raise SensingError("need one covariance derivative per parameter")
        mats = []
        for dc in cov_gradients:
            if np.ndim(dc) == 0:
                mats.append(None if dc == 0 else float(dc) * np.eye(m))
            else:
                dc = np.asarray(dc)
                mats.append(None if not np.any(dc) else dc)
        a = [None if x is None else np.linalg.solve(sig, x) for x in mats]
        for i in range(n):
            for j in range(i, n):
                if a[i] is None or a[j] is None:
                    continue
                v = float(np.real(np.sum(a[i] * a[j].T)))
                j_trace[i, j] = j_trace[j, i] = v
    if return_parts:
        return j_mean, j_trace
    return j_mean + j_trace


@dataclass
class FisherResult:
    fim: np.ndarray
    bcrlb: np.ndarray
    param_labels: tuple
    prior_fim: np.ndarray | None = None
    data_fim: np.ndarray | None = None
    identifiable: dict = field(default_factory=dict)
    condition_number: float = float("nan")

    def index(self, label: str) -> int:
        try:
            return self.param_labels.index(label)
        except ValueError:
            raise UnknownParameterError(f"{label!r} not among {self.param_labels}") from None

    def variance(self, label: str) -> float:
        return bcrlb(self, label)

    def rmse(self, label: str) -> float:
        return math.sqrt(self.variance(label))

    @property
    def units(self) -> dict:
        return {lab: PARAM_UNITS.get(lab, "") for lab in self.param_labels}


def invert_fim(fim: np.ndarray, rel_tol: float = 1e-12):
    """Inverse over the identifiable subspace.

    Parameters with zero information, or with significant weight on a
    numerically null direction of the Jacobi-scaled matrix, are marked
    unidentifiable (their variance is +inf). Returns (cov, mask, cond).
    """
    fim = 0.5 * (fim + fim.T)
    n = fim.shape[0]
    diag = np.diag(fim).copy()
    ok = diag > 0
    for _ in range(n):
        idx = np.flatnonzero(ok)
        if idx.size == 0:
            break
        sc = 1.0 / np.sqrt(diag[idx])
        scaled = fim[np.ix_(idx, idx)] * np.outer(sc, sc)
        w, v = np.linalg.eigh(scaled)
        null = w < rel_tol * max(w[-1], 1e-300)
        if not np.any(null):
            break
        weight = np.max(np.abs(v[:, null]), axis=1)
        ok[idx[weight > 1e-6]] = False
    out = np.full((n, n), np.nan)
    idx = np.flatnonzero(ok)
    cond = float("inf")
    if idx.size:
        sc = 1.0 / np.sqrt(diag[idx])
        scaled = fim[np.ix_(idx, idx)] * np.outer(sc, sc)
        inv = np.linalg.inv(scaled) * np.outer(sc, sc)
        out[np.ix_(idx, idx)] = 0.5 * (inv + inv.T)
        cond = float(np.linalg.cond(scaled))
    for i in np.flatnonzero(~ok):
        out[i, i] = np.inf
    return out, ok, cond


def conditional_fim(state: SensingState, labels: Sequence[str] = OBSERVABLE_LABELS,
                    coherent_factor: float = 1.0, return_parts: bool = False):
    cov = state_covariance(state)
    grads = np.array([mean_gradient(lab, state) for lab in labels])
    dcovs = [covariance_gradient(lab, state, cov) for lab in labels]
    return slepian_bangs_fim(grads, cov, dcovs, coherent_factor=coherent_factor, return_parts=return_parts)


def coherent_factor(phase_variance: float) -> float:
    """|E[exp(j phi)]|^2 for Gaussian phi."""
    return math.exp(-phase_variance)


def coherent_factor_mc(phase_variance: float, n_samples: int = 100_000, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    phi = rng.standard_normal(n_samples) * math.sqrt(phase_variance)
    return float(abs(np.mean(np.exp(1j * phi))) ** 2)


def bayesian_fim(state: SensingState, labels: Sequence[str] = OBSERVABLE_LABELS, prior=None,
                 mc_phase_samples: int | None = None, seed: int = 0) -> FisherResult:
    """Data FIM averaged over the phase noise plus an optional prior FIM.

    The phase average multiplies the mean contribution by the coherent
    power factor; ``mc_phase_samples`` replaces the closed form with a
    sample estimate (test cross-check).
    """
    s = state.phase_noise.variance
    cf = coherent_factor(s) if mc_phase_samples is None else coherent_factor_mc(s, mc_phase_samples, seed)
    j_data = conditional_fim(state, labels, coherent_factor=cf)
    n = len(labels)
    j_p = np.zeros((n, n)) if prior is None else np.asarray(prior, dtype=float)
    if j_p.shape != (n, n):
        raise SensingError("prior FIM has the wrong shape")
    j_b = j_data + j_p
    inv, ok, cond = invert_fim(j_b)
    return FisherResult(fim=j_b, bcrlb=inv, param_labels=tuple(labels), prior_fim=j_p, data_fim=j_data,
                        identifiable=dict(zip(labels, map(bool, ok))), condition_number=cond)


fisher_information = bayesian_fim


def bcrlb(result: FisherResult, param: str) -> float:
    """Diagonal entry of the inverse B-FIM; +inf when the parameter is unidentifiable."""
    i = result.index(param)
    if not result.identifiable.get(param, True):
        return math.inf
    return float(result.bcrlb[i, i])


# ---------------------------------------------------------------------------
# Pointing at boresight
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoresightPointingBound:
    """Curvature bound at zero pointing error.

    The mean depends on theta only through |theta|^2 near boresight, so the
    curvature information bounds the squared offset psi = |theta|^2 (units
    rad^4). ``angle_variance`` = sqrt(psi_variance) is the angle-equivalent
    spread in rad^2.
    """

    psi_variance: float
    angle_variance: float


def pointing_bcrlb_at_boresight(state: SensingState) -> BoresightPointingBound:
    """sigma_eff^2 exp(sigma_phi^2) / (2 gamma^2 M |g|^2 |B|^2 |s|^2), evaluated at theta = 0."""
    st = state.with_(theta=(0.0, 0.0))
    gam = st.amp_rolloff
    if gam == 0:
        return BoresightPointingBound(math.inf, math.inf)
    num = st.sigma2_add() * math.exp(st.phase_noise.variance)
    den = 2.0 * gam**2 * st.frame.m_pilots * st.amplitude() ** 2 * st.signal_scale()
    v = num / den
    return BoresightPointingBound(psi_variance=v, angle_variance=math.sqrt(v))


def pointing_bcrlb_first_order(state: SensingState) -> float:
    """Variance bound (rad^2) for the pointing error magnitude along the
    current offset direction, from the first-order gradients."""
    th = np.asarray(state.theta)
    r = float(np.linalg.norm(th))
    if r == 0:
        return math.inf
    res = bayesian_fim(state, ("theta_x", "theta_y"))
    u = th / r
    j = res.fim
    # information along the offset direction
    info = float(u @ j @ u)
    return math.inf if info <= 0 else 1.0 / info


def covariance_and_fim_psd(state: SensingState, labels=OBSERVABLE_LABELS, tol: float = 1e-10):
    """Return (max Hermitian asymmetry of Sigma, min scaled eigenvalue of Sigma,
    max asymmetry of J_B, min scaled eigenvalue of J_B)."""
    cov = state_covariance(state).matrix
    res = bayesian_fim(state, labels)
    j = res.fim

    def asym(a):
        return float(np.max(np.abs(a - a.conj().T)) / max(1.0, float(np.max(np.abs(a)))))

    def min_eig(a):
        d = np.sqrt(np.clip(np.real(np.diag(a)), 1e-300, None))
        s = a / np.outer(d, d)
        return float(np.min(np.linalg.eigvalsh(0.5 * (s + s.conj().T))))

    return asym(cov), min_eig(cov), asym(j), min_eig(j)


__all__ = [
    "PilotFrame", "SensingState", "ObservationCovariance", "FisherResult", "BoresightPointingBound",
    "mean_vector", "mean_gradient", "build_covariance", "state_covariance", "slepian_bangs_fim",
    "conditional_fim", "bayesian_fim", "fisher_information", "bcrlb", "invert_fim",
    "pointing_bcrlb_at_boresight", "pointing_bcrlb_first_order", "coherent_factor", "coherent_factor_mc",
    "OBSERVABLE_LABELS", "SensingError", "UnknownParameterError",
]
