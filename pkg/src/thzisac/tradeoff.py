"""
Capacity-distortion trade-off via a projected-gradient Blahut-Arimoto loop.

The communication side estimates I(X;Y) for a finite constellation over
the Gaussian-equivalent impaired channel by Monte Carlo. The sensing side
is the normalized trace of the range / LOS-velocity BCRLB block, which
depends on the input distribution through the average transmit power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.special import logsumexp

from .sensing import SensingState, bayesian_fim

LOG2E = 1.0 / math.log(2.0)


class TradeoffError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Constellations and distributions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Constellation:
    """Symbol alphabet scaled to unit average power under the uniform law.

    The scaling is fixed at construction. A non-uniform distribution then
    changes the average transmit power, which is how the sensing side sees
    the input distribution.
    """

    points: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=complex).ravel()
        if pts.size < 2 or np.unique(np.round(pts, 12)).size < 2:
            raise TradeoffError("a constellation needs at least two distinct points")
        if not np.all(np.isfinite(pts)):
            raise TradeoffError("constellation points must be finite")
        pts = pts / math.sqrt(np.mean(np.abs(pts) ** 2))
        object.__setattr__(self, "points", pts)
        if not self.labels:
            object.__setattr__(self, "labels", tuple(str(i) for i in range(pts.size)))
        elif len(self.labels) != pts.size:
            raise TradeoffError("one label per point")

    def __len__(self):
        return self.points.size

    @property
    def energies(self) -> np.ndarray:
        return np.abs(self.points) ** 2

    def average_power(self, dist: "InputDistribution") -> float:
        return float(dist.probs @ self.energies)

    def normalized(self, dist: "InputDistribution", power: float = 1.0) -> np.ndarray:
        """Points rescaled so their average power under ``dist`` equals ``power``."""
        return self.points * math.sqrt(power / self.average_power(dist))

    @classmethod
    def qam(cls, order: int) -> "Constellation":
        side = int(round(math.sqrt(order)))
        if side * side != order or side < 2:
            raise TradeoffError("square QAM needs a perfect-square order >= 4")
        lv = np.arange(side) * 2.0 - (side - 1)
        pts = (lv[:, None] + 1j * lv[None, :]).ravel()
        return cls(pts, tuple(f"qam{order}_{i}" for i in range(order)))

    @classmethod
    def psk(cls, order: int, offset: float = 0.0) -> "Constellation":
        pts = np.exp(1j * (2 * np.pi * np.arange(order) / order + offset))
        return cls(pts, tuple(f"psk{order}_{i}" for i in range(order)))

    @classmethod
    def rings(cls, radii, per_ring) -> "Constellation":
        """Concentric constant-modulus rings (APSK style)."""
        if np.isscalar(per_ring):
            per_ring = [int(per_ring)] * len(radii)
        pts = [r * np.exp(1j * (2 * np.pi * np.arange(n) / n + (np.pi / n if k % 2 else 0.0)))
               for k, (r, n) in enumerate(zip(radii, per_ring))]
        return cls(np.concatenate(pts))

    @classmethod
    def from_name(cls, name: str) -> "Constellation":
        name = name.lower()
        for prefix, fn in (("qam", cls.qam), ("psk", cls.psk)):
            if name.startswith(prefix):
                return fn(int(name[len(prefix):]))
        if name == "bpsk":
            return cls.psk(2)
        raise TradeoffError(f"unknown constellation {name!r}")


@dataclass(frozen=True)
class InputDistribution:
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float).ravel()
        if p.size == 0 or np.any(p < 0) or not np.all(np.isfinite(p)):
            raise TradeoffError("probabilities must be finite and non-negative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise TradeoffError(f"probabilities must sum to 1 (got {p.sum():.15f})")
        object.__setattr__(self, "probs", p)

    @classmethod
    def uniform(cls, n: int) -> "InputDistribution":
        return cls(np.full(n, 1.0 / n))

    @property
    def is_degenerate(self) -> bool:
        return np.count_nonzero(self.probs) <= 1

    def entropy_bits(self) -> float:
        p = self.probs[self.probs > 0]
        return float(-(p @ np.log2(p)))


def project_simplex(v) -> InputDistribution:
    """Euclidean projection onto the probability simplex (sort and threshold)."""
    v = np.asarray(v, dtype=float).ravel()
    if not np.all(np.isfinite(v)):
        raise TradeoffError("cannot project a non-finite vector")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    tau = css[rho] / (rho + 1.0)
    w = np.maximum(v - tau, 0.0)
    w /= w.sum()  # float dust only
    return InputDistribution(w)


# ---------------------------------------------------------------------------
# Channel and MI estimator
# ---------------------------------------------------------------------------

PHASE_MODES = ("coherent_loss", "random")


@dataclass(frozen=True)
class ImpairedChannel:
    """Gaussian-equivalent impaired channel with thermal noise normalized to 1.

    ``snr0`` is the pre-impairment SNR for unit average symbol power.
    Distortion noise is gamma_eff times the received signal power.
    ``coherent_loss``: y = sqrt(snr0) exp(-s/2) x + n.
    ``random``: y = sqrt(snr0) exp(j phi) x + n with phi ~ N(0, s) per symbol.
    """

    snr0: float
    gamma_eff: float = 0.0
    sigma_phi2: float = 0.0
    phase_mode: str = "coherent_loss"
    hermite_order: int = 16

    def __post_init__(self):
        if self.snr0 <= 0 or self.gamma_eff < 0 or self.sigma_phi2 < 0:
            raise TradeoffError("snr0 must be positive; gamma_eff and sigma_phi2 non-negative")
        if self.phase_mode not in PHASE_MODES:
            raise TradeoffError(f"phase_mode must be one of {PHASE_MODES}")

    @property
    def amplitude(self) -> float:
        a = math.sqrt(self.snr0)
        return a * math.exp(-0.5 * self.sigma_phi2) if self.phase_mode == "coherent_loss" else a

    def noise_var(self, avg_power: float) -> float:
        return 1.0 + self.gamma_eff * self.snr0 * avg_power

    def capacity_bound(self, avg_power: float = 1.0) -> float:
        s = self.snr0 * avg_power
        return math.log2(1.0 + s * math.exp(-self.sigma_phi2) / (1.0 + s * self.gamma_eff))

    def sample(self, x, rng=None, avg_power: float = 1.0):
        rng = np.random.default_rng(rng)
        x = np.asarray(x, dtype=complex)
        nv = self.noise_var(avg_power)
        n = (rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape)) * math.sqrt(nv / 2)
        if self.phase_mode == "random":
            phi = rng.standard_normal(x.shape) * math.sqrt(self.sigma_phi2)
            return self.amplitude * np.exp(1j * phi) * x + n
        return self.amplitude * x + n


@dataclass(frozen=True)
class MIEstimate:
    bits: float
    stderr: float
    per_letter: np.ndarray  # E[log2 p(y|x_i)/p(y)] under x_i
    n_samples: int
    dnoise: float = 0.0  # dI/d(noise variance) with the distribution held fixed
    # sum_i p_i E_i[p(y|x_k)/p(y)] on the same draws; 1 in expectation
    likelihood_ratio: np.ndarray | None = None


class _Draws:
    """Fixed standardized draws shared by every MI evaluation (common random numbers)."""

    def __init__(self, n_per: int, seed: int):
        rng = np.random.default_rng(seed)
        self.z = (rng.standard_normal(n_per) + 1j * rng.standard_normal(n_per)) / math.sqrt(2.0)
        self.u = rng.standard_normal(n_per)


_DRAW_CACHE: dict = {}


def _draws(n_per: int, seed: int) -> _Draws:
    key = (n_per, seed)
    if key not in _DRAW_CACHE:
        if len(_DRAW_CACHE) > 16:
            _DRAW_CACHE.clear()
        _DRAW_CACHE[key] = _Draws(n_per, seed)
    return _DRAW_CACHE[key]


_CHUNK_ELEMS = 1_000_000


def _coherent_terms(pts, logp, amp, nv, z, active):
    """Per-letter means/variances of the information density and its
    derivative w.r.t. the noise variance (pathwise, common draws)."""
    L = pts.size
    n = z.size
    f = np.zeros(L)
    var = np.zeros(L)
    df = np.zeros(L)
    post = np.zeros((L, L))
    zr, zi = z.real, z.imag
    scale = -2.0 / math.sqrt(nv)
    batch = max(1, _CHUNK_ELEMS // (n * L))
    idx = np.flatnonzero(active)
    for b0 in range(0, idx.size, batch):
        ii = idx[b0:b0 + batch]
        dif = amp * (pts[ii][:, None] - pts[None, :])  # (b, L)
        dr, di = dif.real, dif.imag
        d2 = dr * dr + di * di
        # cross[b, n, l] = Re(dif * conj(z))
        cross = dr[:, None, :] * zr[None, :, None]
        cross += di[:, None, :] * zi[None, :, None]
        ll = cross * scale
        ll += (logp[None, :] - d2 / nv)[:, None, :]
        mx = ll.max(axis=2, keepdims=True)
        ll -= mx
        np.exp(ll, out=ll)  # unnormalized posterior weights
        ssum = ll.sum(axis=2)
        terms = -(mx[..., 0] + np.log(ssum)) * LOG2E
        f[ii] = terms.mean(axis=1)
        var[ii] = terms.var(axis=1, ddof=1)
        s_d2 = np.einsum("bnl,bl->bn", ll, d2)
        s_cr = np.einsum("bnl,bnl->bn", ll, cross)
        df[ii] = -((s_d2 / nv**2 + s_cr / nv**1.5) / ssum).mean(axis=1) * LOG2E
        post[ii] = np.einsum("bnl,bn->bl", ll, 1.0 / ssum) / n
    return f, var, df, post


def _loglik_matrix(y, pts, amp, nv, channel):
    """log p(y | x_j) up to a common constant, with the Gaussian phase
    averaged by Gauss-Hermite quadrature. Returns (n, L)."""
    t, w = hermgauss(channel.hermite_order)
    phi = math.sqrt(2.0 * channel.sigma_phi2) * t
    logw = np.log(w / math.sqrt(math.pi))
    out = np.empty((y.size, pts.size))
    for j, x in enumerate(pts):
        mu = amp * np.exp(1j * phi) * x  # (K,)
        d = y[:, None] - mu[None, :]
        out[:, j] = logsumexp(logw[None, :] - (d.real**2 + d.imag**2) / nv, axis=1)
    return out


def _random_phase_terms(pts, logp, amp, nv, draws, channel, active):
    L = pts.size
    f = np.zeros(L)
    var = np.zeros(L)
    post = np.zeros((L, L))
    noise = math.sqrt(nv) * draws.z
    rot = np.exp(1j * math.sqrt(channel.sigma_phi2) * draws.u)
    for i in np.flatnonzero(active):
        y = amp * rot * pts[i] + noise
        ll = _loglik_matrix(y, pts, amp, nv, channel)
        lse = logsumexp(ll + logp[None, :], axis=1)
        terms = (ll[:, i] - lse) * LOG2E
        f[i] = terms.mean()
        var[i] = terms.var(ddof=1)
        post[i] = np.exp(ll + logp[None, :] - lse[:, None]).mean(axis=0)
    return f, var, post


def mutual_information_mc(constellation: Constellation, dist: InputDistribution, channel: ImpairedChannel,
                          n_samples: int = 100_000, seed: int = 0, _noise_var: float | None = None) -> MIEstimate:
    """Stratified Monte Carlo estimate of I(X;Y) in bits.

    Each letter receives n_samples/|X| draws; the standardized noise (and
    phase) draws are common to all letters and to every call with the same
    seed, so the estimate is a deterministic smooth function of ``dist``.
    """
    if n_samples < 10_000:
        raise TradeoffError("n_samples must be at least 1e4")
    pts = constellation.points
    p = dist.probs
    if p.size != pts.size:
        raise TradeoffError("distribution and constellation sizes differ")
    n_per = -(-n_samples // pts.size)
    if dist.is_degenerate:
        return MIEstimate(0.0, 0.0, np.zeros(pts.size), n_per * pts.size)
    draws = _draws(n_per, seed)
    nv = channel.noise_var(constellation.average_power(dist)) if _noise_var is None else _noise_var
    amp = channel.amplitude
    with np.errstate(divide="ignore"):
        logp = np.log(p)
    mask = p > 0
    if channel.phase_mode == "random" and channel.sigma_phi2 > 0:
        f, var, post = _random_phase_terms(pts, logp, amp, nv, draws, channel, mask)
        df = None
    else:
        f, var, df, post = _coherent_terms(pts, logp, amp, nv, draws.z, mask)
    bits = float(p[mask] @ f[mask])
    se = float(math.sqrt(np.sum(p[mask] ** 2 * var[mask]) / n_per))
    if df is None:
        dnoise = 0.0
        if _noise_var is None and channel.gamma_eff > 0:
            h = 1e-4 * nv
            up = mutual_information_mc(constellation, dist, channel, n_samples, seed, _noise_var=nv + h).bits
            dn = mutual_information_mc(constellation, dist, channel, n_samples, seed, _noise_var=nv - h).bits
            dnoise = (up - dn) / (2 * h)
    else:
        dnoise = float(p[mask] @ df[mask])
    # posterior mass on letter k divided by its prior; inactive letters take the expectation
    ratio = np.ones(pts.size)
    ratio[mask] = (p[mask] @ post[mask][:, mask]) / p[mask]
    return MIEstimate(max(bits, 0.0), se, f, n_per * pts.size, dnoise, ratio)


def mi_gradient(constellation, dist, channel, n_samples=100_000, seed=0, estimate: MIEstimate | None = None):
    """(estimate, dI/dp): per-letter information density plus the effect of
    the average power on the distortion noise."""
    est = estimate or mutual_information_mc(constellation, dist, channel, n_samples, seed)
    ratio = 1.0 if est.likelihood_ratio is None else est.likelihood_ratio
    grad = est.per_letter - LOG2E * ratio
    if channel.gamma_eff > 0 and not dist.is_degenerate:
        grad = grad + est.dnoise * channel.gamma_eff * channel.snr0 * constellation.energies
    return est, grad


# ---------------------------------------------------------------------------
# Distortion
# ---------------------------------------------------------------------------

@dataclass
class DistortionModel:
    """Normalized BCRLB trace as a function of the average symbol power.

    ``state`` is the sensing state at the reference pilot power
    ``reference_power_w`` (unit average symbol power). Each variance is
    divided by its reference variance so the sum is dimensionless.
    """

    state: SensingState
    reference_power_w: float
    reference_variances: dict = field(default_factory=lambda: {"range": 1e-6, "los_velocity": 1e-6})
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.reference_power_w <= 0:
            raise TradeoffError("reference power must be positive")
        for k, v in self.reference_variances.items():
            if v <= 0:
                raise TradeoffError(f"reference variance for {k} must be positive")

    @property
    def labels(self):
        return tuple(self.reference_variances)

    def value(self, avg_power: float) -> float:
        key = float(avg_power)
        if key in self._cache:
            return self._cache[key]
        if avg_power <= 0:
            return math.inf
        st = self.state.with_(pilot_power=self.reference_power_w * avg_power)
        res = bayesian_fim(st, self.labels)
        d = 0.0
        for lab, ref in self.reference_variances.items():
            v = res.variance(lab)
            if not math.isfinite(v):
                d = math.inf
                break
            d += v / ref
        if len(self._cache) > 4096:
            self._cache.clear()
        self._cache[key] = d
        return d

    def derivative(self, avg_power: float, rel_step: float = 1e-4) -> float:
        h = rel_step * avg_power
        return (self.value(avg_power + h) - self.value(avg_power - h)) / (2 * h)

    def minimum_over(self, constellation: Constellation) -> float:
        """Smallest achievable distortion: all mass on the highest-energy point."""
        return self.value(float(np.max(constellation.energies)))


def distortion_of(dist: InputDistribution, constellation: Constellation, model: DistortionModel) -> float:
    return model.value(constellation.average_power(dist))


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TradeoffPoint:
    distortion: float
    rate: float
    rate_stderr: float
    distribution: InputDistribution
    lam: float
    converged: bool
    iterations: int
    feasible: bool = True
    lagrangian_trace: tuple = ()

    @property
    def rate_bits(self) -> float:
        return self.rate


@dataclass(frozen=True)
class TradeoffProblem:
    constellation: Constellation
    channel: ImpairedChannel
    distortion: DistortionModel
    n_samples: int = 100_000

    @classmethod
    def from_scenario(cls, scenario, constellation: Constellation, n_samples: int = 100_000,
                      reference_variances: dict | None = None, phase_mode: str = "coherent_loss"):
        """Channel and distortion model of a LinkScenario at its transmit power."""
        ch = ImpairedChannel(snr0=scenario.snr0, gamma_eff=scenario.gamma_eff, sigma_phi2=scenario.sigma_phi2,
                             phase_mode=phase_mode)
        refs = {"range": 1e-6, "los_velocity": 1e-6} if reference_variances is None else dict(reference_variances)
        dm = DistortionModel(scenario.sensing_state(), scenario.tx_power_w, refs)
        return cls(constellation, ch, dm, n_samples)


LAMBDA_UP = 1.5
LAMBDA_DOWN = 0.8


def ba_optimize(constellation: Constellation, scenario: TradeoffProblem, d_target: float, tolerance: float = 0.05,
                max_iters: int = 200, seed: int = 0, step: float = 0.2, min_step: float = 1e-9,
                p_tol: float = 1e-4, l_tol: float = 1e-6, patience: int = 3) -> TradeoffPoint:
    """Maximize I(X;Y) subject to D(p) <= d_target.

    Lagrangian L = I(p) - lam * (D(p)/d_target - 1); the constraint is
    scaled by the target so lam is dimensionless. Each iteration takes a
    normalized ascent step on L, projected onto the simplex and halved
    until L does not decrease, then scales lam by 1.5 (D above target) or
    0.8. The step size persists across iterations and is halved whenever
    D - d_target changes sign.

    An iteration counts as calm when p moves by less than ``p_tol`` (L1)
    or L rises by less than ``l_tol`` bits; ``patience`` calm iterations
    in a row with D near the target stop the run. The second test matters
    on flat surfaces, where p can drift without changing the rate.
    """
    if not d_target > 0:
        raise TradeoffError("d_target must be positive")
    ch = scenario.channel
    dm = scenario.distortion
    ns = scenario.n_samples
    unconstrained = math.isinf(d_target)
    energies = constellation.energies

    def lagr(i_bits, d, lam):
        if unconstrained:
            return i_bits
        return i_bits - lam * (d / d_target - 1.0)

    def feasible(d):
        return unconstrained or d <= d_target

    p = InputDistribution.uniform(len(constellation))
    lam = 1.0
    alpha = step
    est, g_i = mi_gradient(constellation, p, ch, ns, seed)
    d = distortion_of(p, constellation, dm)
    best = None
    trace = []
    calm = 0
    converged = False
    prev_sign = None
    it = 0
    for it in range(1, max_iters + 1):
        pw = constellation.average_power(p)
        if unconstrained:
            grad = g_i
        else:
            grad = g_i - lam * dm.derivative(pw) * energies / d_target
        direction = grad - grad.mean()
        norm = np.linalg.norm(direction)
        l_cur = lagr(est.bits, d, lam)
        if feasible(d) and (best is None or est.bits > best[0].bits):
            best = (est, p, d, lam)

        moved = False
        p_new, est_new, d_new = p, est, d
        if norm > 0 and np.isfinite(norm):
            a = alpha
            while a >= min_step:
                cand = project_simplex(p.probs + a * direction / norm)
                e_c = mutual_information_mc(constellation, cand, ch, ns, seed)
                d_c = distortion_of(cand, constellation, dm)
                if lagr(e_c.bits, d_c, lam) >= l_cur - 1e-12:
                    p_new, est_new, d_new, moved = cand, e_c, d_c, True
                    break
                a *= 0.5
            # grow only after a clean first-try step; backtracking keeps the smaller size
            alpha = min(a * 1.25, step) if (moved and a == alpha) else a if moved else alpha
        dp = float(np.abs(p_new.probs - p.probs).sum())
        trace.append((l_cur, lagr(est_new.bits, d_new, lam)))

        if not unconstrained:
            sign = d_new > d_target
            if prev_sign is not None and sign != prev_sign:
                alpha *= 0.5
            prev_sign = sign
        lam = lam * (LAMBDA_UP if d_new > d_target else LAMBDA_DOWN)

        p, d = p_new, d_new
        if moved:
            est, g_i = mi_gradient(constellation, p, ch, ns, seed, estimate=est_new)

        ok_d = unconstrained or d <= d_target or abs(d - d_target) <= tolerance * d_target
        gain = trace[-1][1] - trace[-1][0]
        calm = calm + 1 if ((dp < p_tol or gain < l_tol) and ok_d) else 0
        if calm >= patience:
            converged = True
            break

    if feasible(d) and (best is None or est.bits > best[0].bits):
        best = (est, p, d, lam)
    if best is None:
        return TradeoffPoint(distortion=d, rate=est.bits, rate_stderr=est.stderr, distribution=p, lam=lam,
                             converged=False, iterations=it, feasible=False, lagrangian_trace=tuple(trace))
    e_b, p_b, d_b, lam_b = best
    return TradeoffPoint(distortion=d_b, rate=e_b.bits, rate_stderr=e_b.stderr, distribution=p_b, lam=lam_b,
                         converged=converged, iterations=it, feasible=True, lagrangian_trace=tuple(trace))


def trace_frontier(problem: TradeoffProblem, d_targets, seed: int = 0, **kw) -> list[TradeoffPoint]:
    return [ba_optimize(problem.constellation, problem, dt, seed=seed, **kw) for dt in d_targets]
