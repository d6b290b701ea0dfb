"""Linear soft-decision fusion: weight schemes and global Pf/Pd.

The FC statistic is ``Z = w @ z``. Under each hypothesis it is Gaussian
with mean ``w @ mu`` and variance ``sum(w**2 * var)``, so a weight vector
fixes a whole ROC curve. Weight vectors are plain 1-D float arrays with
nonnegative entries and unit 2-norm. Functions taking weights also accept a
2-D array (one weight vector per row) and then return one value per row.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .detection import FusionStatistics, Scenario, fc_snr, q_tail, q_tail_inverse


class DegenerateWeightsError(ValueError):
    """Raised when a weight direction is undefined (all-zero raw weights)."""


class Scheme(str, enum.Enum):
    EGC = "EGC"
    MRC = "MRC"
    NDC = "NDC"
    MDC = "MDC"
    BGA = "BGA"
    OR_RULE = "OR_RULE"


ANALYTIC_SCHEMES = (Scheme.EGC, Scheme.MRC, Scheme.NDC, Scheme.MDC)


@dataclass(frozen=True)
class SchemeResult:
    scheme: Scheme
    weights: np.ndarray | None
    pd: float
    pf: float

    def __post_init__(self):
        if not (0.0 <= self.pd <= 1.0 and 0.0 <= self.pf <= 1.0):
            raise ValueError(f"probabilities out of range: pd={self.pd}, pf={self.pf}")


def _check_probability(p, name):
    p = float(p)
    if not (0.0 < p < 1.0):
        raise ValueError(f"{name} must lie strictly inside (0, 1), got {p}")
    return p


def normalize(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError(f"weights must be a non-empty 1-D sequence, got shape {w.shape}")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ValueError("weights must be finite and nonnegative")
    norm = np.linalg.norm(w)
    if norm == 0.0:
        raise DegenerateWeightsError("cannot normalize an all-zero weight vector")
    return w / norm


def weights_egc(M: int) -> np.ndarray:
    if int(M) != M or M < 1:
        raise ValueError(f"M must be a positive integer, got {M}")
    return np.full(int(M), math.sqrt(1.0 / M))


def weights_mrc(s) -> np.ndarray:
    """MRC weights ``sqrt(SNR_i / sum(SNR))``.

    ``s`` may be a Scenario, a FusionStatistics, or the per-SU SNRs (linear).
    """
    if isinstance(s, (Scenario, FusionStatistics)):
        snr = fc_snr(s)
    else:
        snr = np.asarray(s, dtype=float)
    if snr.ndim != 1 or snr.size == 0 or np.any(snr < 0) or not np.all(np.isfinite(snr)):
        raise ValueError("SNRs must be a non-empty sequence of finite nonnegative values")
    total = snr.sum()
    if total == 0.0:
        raise DegenerateWeightsError("MRC weights undefined when every SNR is zero")
    return np.sqrt(snr / total)


def _deflection_direction(theta, var):
    if not np.any(theta > 0):
        raise DegenerateWeightsError("deflection weights undefined when theta is zero everywhere")
    return normalize(theta / var)


def weights_ndc(st: FusionStatistics) -> np.ndarray:
    """Maximizer of the H0-normalized deflection: w ~ theta / var0."""
    return _deflection_direction(st.theta, st.var0)


def weights_mdc(st: FusionStatistics) -> np.ndarray:
    """Maximizer of the H1-normalized deflection: w ~ theta / var1."""
    return _deflection_direction(st.theta, st.var1)


def deflection(w, st: FusionStatistics, modified: bool = False):
    """(w @ theta)^2 / (w^T Sigma w) with Sigma = Sigma_H1 if ``modified`` else Sigma_H0."""
    w = np.asarray(w, dtype=float)
    var = st.var1 if modified else st.var0
    return (w @ st.theta) ** 2 / ((w**2) @ var)


def _moments(w, st):
    w = np.asarray(w, dtype=float)
    if w.shape[-1] != st.M:
        raise ValueError(f"weights have {w.shape[-1]} entries, statistics have {st.M}")
    w2 = w**2
    return w @ st.theta, np.sqrt(w2 @ st.var0), np.sqrt(w2 @ st.var1)


def pd_given_pf(w, st: FusionStatistics, pf_target: float):
    """Global Pd at the threshold that yields exactly ``pf_target``."""
    q = q_tail_inverse(_check_probability(pf_target, "pf_target"))
    shift, sd0, sd1 = _moments(w, st)
    return q_tail((q * sd0 - shift) / sd1)


def pf_given_pd(w, st: FusionStatistics, pd_target: float):
    q = q_tail_inverse(_check_probability(pd_target, "pd_target"))
    shift, sd0, sd1 = _moments(w, st)
    return q_tail((q * sd1 + shift) / sd0)


def detection_pair(w, st: FusionStatistics, beta: float) -> tuple[float, float]:
    """(Pf, Pd) of the test ``w @ z > beta``."""
    w = np.asarray(w, dtype=float)
    _, sd0, sd1 = _moments(w, st)
    pf = q_tail((beta - w @ st.mu0) / sd0)
    pd = q_tail((beta - w @ st.mu1) / sd1)
    return pf, pd


def threshold_for_pf(w, st: FusionStatistics, pf_target: float) -> float:
    w = np.asarray(w, dtype=float)
    q = q_tail_inverse(_check_probability(pf_target, "pf_target"))
    return float(q * math.sqrt((w**2) @ st.var0) + w @ st.mu0)


def or_rule_hdf(st: FusionStatistics, pf_target: float) -> tuple[float, float]:
    """OR-rule hard fusion with an equal local false-alarm split.

    Each SU thresholds its own energy at local false alarm
    ``1 - (1 - pf_target)**(1/M)`` and the FC declares H1 if any SU does.
    """
    pf_target = _check_probability(pf_target, "pf_target")
    M = st.M
    alpha = -math.expm1(math.log1p(-pf_target) / M)
    q = q_tail_inverse(alpha)
    local_pd = q_tail((q * np.sqrt(st.var0) - st.theta) / np.sqrt(st.var1))
    pf = -math.expm1(M * math.log1p(-alpha))
    pd = 1.0 - float(np.prod(1.0 - local_pd))
    return pf, pd


def scheme_weights(scheme, st: FusionStatistics) -> np.ndarray:
    scheme = Scheme(scheme)
    if scheme is Scheme.EGC:
        return weights_egc(st.M)
    if scheme is Scheme.MRC:
        return weights_mrc(st)
    if scheme is Scheme.NDC:
        return weights_ndc(st)
    if scheme is Scheme.MDC:
        return weights_mdc(st)
    raise ValueError(f"{scheme.value} has no closed-form weights")


def evaluate_scheme(scheme, st: FusionStatistics, pf_target: float) -> SchemeResult:
    """Pd of an analytic SDF scheme or the OR rule at ``pf_target``."""
    scheme = Scheme(scheme)
    if scheme is Scheme.OR_RULE:
        pf, pd = or_rule_hdf(st, pf_target)
        return SchemeResult(scheme, None, pd, pf)
    w = scheme_weights(scheme, st)
    return SchemeResult(scheme, w, float(pd_given_pf(w, st, pf_target)), float(pf_target))
