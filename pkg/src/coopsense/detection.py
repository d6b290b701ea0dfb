"""Scenario model, per-SU energy statistics and Gaussian tail utilities.

Each secondary user (SU) senses the primary user (PU) through a sensing
channel ``g``, then amplifies and forwards its samples to the fusion centre
(FC) over a reporting channel ``h`` with relay power ``p_r``. The FC runs
one energy detector per SU over ``K`` samples. For large ``K`` each energy
is approximately Gaussian with

    mu0   = K * (p_r * h^2 * sigma_w^2 + delta^2)
    theta = K * p_r * g^2 * h^2 * sigma_s^2
    mu1   = mu0 + theta
    var0  = 2 * mu0^2 / K,   var1 = 2 * mu1^2 / K

The SNR of SU ``i`` as seen at the FC is ``theta_i / mu0_i``; this is the
only SNR definition used anywhere in the package.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from . import rng as _rng


class Hypothesis(str, enum.Enum):
    H0 = "H0"  # PU absent
    H1 = "H1"  # PU present


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)


def _frozen(values, name, length=None) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if length is not None and arr.shape[0] != length:
        raise ValueError(f"{name} has length {arr.shape[0]}, expected {length}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ScenarioSpec:
    """Recipe for drawing random scenarios.

    ``K`` wins over ``Ts``/``B`` when given; otherwise ``K = 2 * Ts * B``.
    Per-SU FC SNRs are drawn uniformly in dB over ``snr_db``.
    """

    M: int = 18
    K: int | None = None
    Ts: float = 25e-6
    B: float = 6e6
    snr_db: tuple[float, float] = (-15.0, -10.0)
    relay_power_dbm: float = 12.0
    sigma_s_sq: float = 1.0
    noise_var: tuple[float, float] = (0.5, 1.5)
    report_noise_var: tuple[float, float] = (0.5, 1.5)

    def __post_init__(self):
        object.__setattr__(self, "snr_db", tuple(float(v) for v in self.snr_db))
        object.__setattr__(self, "noise_var", tuple(float(v) for v in self.noise_var))
        object.__setattr__(self, "report_noise_var", tuple(float(v) for v in self.report_noise_var))
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"M must be a positive integer, got {self.M}")
        if self.K is None:
            if not (self.Ts > 0 and self.B > 0):
                raise ValueError("Ts and B must be positive")
        elif int(self.K) != self.K or self.K < 1:
            raise ValueError(f"K must be a positive integer, got {self.K}")
        if self.sample_count < 1:
            raise ValueError(f"2*Ts*B rounds to {self.sample_count} samples")
        lo, hi = self.snr_db
        if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
            raise ValueError(f"snr_db must be an ordered finite pair, got {self.snr_db}")
        for name in ("noise_var", "report_noise_var"):
            lo, hi = getattr(self, name)
            if not (0 < lo <= hi < math.inf):
                raise ValueError(f"{name} must satisfy 0 < low <= high, got {(lo, hi)}")
        if not (self.sigma_s_sq > 0 and math.isfinite(self.sigma_s_sq)):
            raise ValueError("sigma_s_sq must be positive")
        if not math.isfinite(self.relay_power_dbm):
            raise ValueError("relay_power_dbm must be finite")

    @property
    def sample_count(self) -> int:
        if self.K is not None:
            return int(self.K)
        return int(round(2.0 * self.Ts * self.B))

    @property
    def relay_power(self) -> float:
        return dbm_to_watts(self.relay_power_dbm)


@dataclass(frozen=True)
class Scenario:
    """One quasi-static realization of the network (linear units throughout)."""

    K: int
    sigma_s_sq: float
    g: np.ndarray
    h: np.ndarray
    sigma_w_sq: np.ndarray
    delta_sq: np.ndarray
    p_r: np.ndarray

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 1:
            raise ValueError(f"K must be a positive integer, got {self.K}")
        if not (self.sigma_s_sq > 0):
            raise ValueError("sigma_s_sq must be positive")
        g = _frozen(self.g, "g")
        M = g.shape[0]
        if M < 1:
            raise ValueError("scenario needs at least one SU")
        object.__setattr__(self, "g", g)
        for name in ("h", "sigma_w_sq", "delta_sq", "p_r"):
            object.__setattr__(self, name, _frozen(getattr(self, name), name, M))
        for name in ("sigma_w_sq", "delta_sq", "p_r"):
            if np.any(getattr(self, name) <= 0):
                raise ValueError(f"{name} must be strictly positive")

    @property
    def M(self) -> int:
        return self.g.shape[0]

    def to_dict(self) -> dict:
        return {
            "M": self.M,
            "K": self.K,
            "sigma_s_sq": self.sigma_s_sq,
            "g": self.g.tolist(),
            "h": self.h.tolist(),
            "sigma_w_sq": self.sigma_w_sq.tolist(),
            "delta_sq": self.delta_sq.tolist(),
            "p_r": self.p_r.tolist(),
            "snr_db": linear_to_db(fc_snr(self)).tolist(),
        }


@dataclass(frozen=True)
class FusionStatistics:
    """Gaussian model of the M energies; covariances kept as their diagonals."""

    mu0: np.ndarray
    mu1: np.ndarray
    theta: np.ndarray
    var0: np.ndarray
    var1: np.ndarray

    def __post_init__(self):
        theta = _frozen(self.theta, "theta")
        M = theta.shape[0]
        object.__setattr__(self, "theta", theta)
        for name in ("mu0", "mu1", "var0", "var1"):
            object.__setattr__(self, name, _frozen(getattr(self, name), name, M))
        if M < 1:
            raise ValueError("statistics need at least one SU")
        if np.any(theta < 0):
            raise ValueError("theta must be nonnegative")
        if np.any(self.var0 <= 0):
            raise ValueError("var0 must be strictly positive")
        if np.any(self.var1 < self.var0):
            raise ValueError("var1 must be >= var0")

    @property
    def M(self) -> int:
        return self.theta.shape[0]


@dataclass(frozen=True)
class EnergySample:
    """Batch of simulated energies: ``z[t, i]`` is SU ``i`` in trial ``t``."""

    z: np.ndarray
    hypothesis: Hypothesis

    def __post_init__(self):
        z = np.array(self.z, dtype=float)
        if z.ndim != 2:
            raise ValueError("z must be (trials, M)")
        if np.any(z < 0):
            raise ValueError("energies must be nonnegative")
        z.setflags(write=False)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "hypothesis", Hypothesis(self.hypothesis))

    def __len__(self):
        return self.z.shape[0]

    def __iter__(self):
        return iter(self.z)


def generate_scenario(spec: ScenarioSpec, seed: int) -> Scenario:
    """Draw a scenario whose per-SU FC SNRs lie inside ``spec.snr_db``.

    |g| and |h| start as absolute unit Gaussians. The half-normal quantile of
    each raw |g| picks that SU's SNR inside the range (uniform in dB), and g
    is then rescaled to hit it exactly, so stronger raw draws stay stronger.
    """
    rng = _rng.make_rng(seed, _rng.SCENARIO)
    M = spec.M
    g_raw = np.abs(rng.standard_normal(M))
    h = np.abs(rng.standard_normal(M))
    sigma_w_sq = rng.uniform(*spec.noise_var, size=M)
    delta_sq = rng.uniform(*spec.report_noise_var, size=M)
    p_r = np.full(M, spec.relay_power)

    quantile = special.erf(g_raw / math.sqrt(2.0))
    lo, hi = spec.snr_db
    snr = db_to_linear(lo + (hi - lo) * quantile)
    # theta/mu0 = p_r g^2 h^2 s2 / (p_r h^2 w2 + d2)  ->  solve for g
    noise_floor = p_r * h**2 * sigma_w_sq + delta_sq
    g = np.sqrt(snr * noise_floor / (p_r * h**2 * spec.sigma_s_sq))
    return Scenario(
        K=spec.sample_count,
        sigma_s_sq=spec.sigma_s_sq,
        g=g,
        h=h,
        sigma_w_sq=sigma_w_sq,
        delta_sq=delta_sq,
        p_r=p_r,
    )


def statistics(s: Scenario) -> FusionStatistics:
    K = s.K
    mu0 = K * (s.p_r * s.h**2 * s.sigma_w_sq + s.delta_sq)
    theta = K * s.p_r * s.g**2 * s.h**2 * s.sigma_s_sq
    mu1 = mu0 + theta
    return FusionStatistics(mu0=mu0, mu1=mu1, theta=theta, var0=2.0 * mu0**2 / K, var1=2.0 * mu1**2 / K)


def fc_snr(s) -> np.ndarray:
    """Per-SU SNR at the FC, ``theta / mu0``, from a Scenario or FusionStatistics."""
    st = statistics(s) if isinstance(s, Scenario) else s
    return st.theta / st.mu0


def simulate_energies(
    s: Scenario,
    hypothesis,
    trials: int,
    seed: int,
    shared_signal: bool = False,
    chunk: int = 2048,
) -> EnergySample:
    """Signal-level Monte Carlo of the FC energy detectors.

    Every trial draws K Gaussian samples per SU of PU signal, sensing noise
    and reporting noise, forms ``Y = sqrt(p_r) h (g S + W) + N`` and sums
    ``Y^2``. By default each SU sees its own PU signal stream, which gives
    exactly the diagonal covariance of the analytic model; with
    ``shared_signal=True`` all SUs observe one common stream S[n].
    """
    hypothesis = Hypothesis(hypothesis)
    if int(trials) != trials or trials < 1:
        raise ValueError(f"trials must be a positive integer, got {trials}")
    if chunk < 1:
        raise ValueError("chunk must be positive")
    rng = _rng.make_rng(seed, _rng.SIMULATION)
    M, K = s.M, s.K
    amp = np.sqrt(s.p_r) * s.h
    w_std = np.sqrt(s.sigma_w_sq)
    n_std = np.sqrt(s.delta_sq)
    s_std = math.sqrt(s.sigma_s_sq)

    z = np.empty((trials, M))
    for start in range(0, trials, chunk):
        n = min(chunk, trials - start)
        x = rng.standard_normal((n, K, M)) * w_std
        if hypothesis is Hypothesis.H1:
            if shared_signal:
                sig = rng.standard_normal((n, K, 1)) * s_std
            else:
                sig = rng.standard_normal((n, K, M)) * s_std
            x += s.g * sig
        y = amp * x + rng.standard_normal((n, K, M)) * n_std
        z[start:start + n] = np.einsum("nkm,nkm->nm", y, y)
    return EnergySample(z=z, hypothesis=hypothesis)


def q_tail(x):
    """Standard normal upper-tail probability Q(x); vectorized."""
    out = 0.5 * special.erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))
    return float(out) if out.ndim == 0 else out


def q_tail_inverse(p: float) -> float:
    """Inverse of :func:`q_tail` on (0, 1) by bracketed root finding."""
    p = float(p)
    if not (0.0 < p < 1.0):
        raise ValueError(f"probability must lie strictly inside (0, 1), got {p}")
    if p == 0.5:
        return 0.0
    # solve on the small tail for accuracy, then mirror
    tail = min(p, 1.0 - p)
    x = optimize.brentq(lambda v: q_tail(v) - tail, 0.0, 40.0, xtol=1e-12, rtol=4 * np.finfo(float).eps)
    return x if p < 0.5 else -x
