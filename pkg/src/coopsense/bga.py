"""Binary genetic algorithm over fusion weight vectors.

A chromosome is a flat 0/1 ``uint8`` array of ``M * nbits`` genes; a
population is a ``(pops, M * nbits)`` array. Each group of ``nbits`` genes
(most significant bit first) decodes to an unsigned integer scaled onto
[0, 1]; the decoded vector is normalized and scored by its global Pd at the
configured false-alarm rate.

One generation keeps ``floor(pops * (1 - prep))`` elites, breeds
``ceil(pops * prep)`` children from roulette-selected parent pairs with
two-point crossover, then flips an exact number of distinct non-elite bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from .detection import FusionStatistics, q_tail, q_tail_inverse
from .fusion import normalize

# absorbs float error in pops * prep (50 * (1 - 0.9) == 4.999...)
_ROUND_EPS = 1e-9


@dataclass(frozen=True)
class GaConfig:
    pops: int = 50
    nbits: int = 10
    M: int = 18
    p_c: float = 0.95
    p_m: float = 0.01
    prep: float = 0.9
    n_gener: int = 200
    pf_target: float = 0.25
    seed: int = 0

    def __post_init__(self):
        for name in ("pops", "nbits", "M", "n_gener", "seed"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value:
                raise ValueError(f"{name} must be an integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if self.pops < 2:
            raise ValueError(f"pops must be >= 2, got {self.pops}")
        if self.nbits < 1 or self.M < 1 or self.n_gener < 1:
            raise ValueError("nbits, M and n_gener must be >= 1")
        if not (0.0 <= self.p_c <= 1.0 and 0.0 <= self.p_m <= 1.0):
            raise ValueError("p_c and p_m must lie in [0, 1]")
        if not (0.0 < self.prep <= 1.0):
            raise ValueError(f"prep must lie in (0, 1], got {self.prep}")
        if not (0.0 < self.pf_target < 1.0):
            raise ValueError(f"pf_target must lie in (0, 1), got {self.pf_target}")
        if self.n_elite + self.n_children != self.pops:
            raise ValueError(
                f"elite ({self.n_elite}) and offspring ({self.n_children}) counts do not sum to pops"
            )
        if self.n_children < 1:
            raise ValueError("configuration produces no offspring")

    @property
    def n_elite(self) -> int:
        return math.floor(self.pops * (1.0 - self.prep) + _ROUND_EPS)

    @property
    def n_children(self) -> int:
        return math.ceil(self.pops * self.prep - _ROUND_EPS)

    @property
    def chromosome_length(self) -> int:
        return self.M * self.nbits

    @property
    def n_mutations(self) -> int:
        return mutation_count(self.p_m, self.pops, self.chromosome_length)


@dataclass(frozen=True)
class GaRun:
    best_weights: np.ndarray
    best_fitness: float
    best_chromosome: np.ndarray
    trace: np.ndarray  # (generations_run, 2): best and mean fitness per generation
    generations_run: int

    @property
    def best_trace(self) -> np.ndarray:
        return self.trace[:, 0]

    @property
    def mean_trace(self) -> np.ndarray:
        return self.trace[:, 1]


def decode(bits, M: int, nbits: int) -> np.ndarray:
    """Map chromosome(s) to raw weights in [0, 1]; shape ``(..., M)``."""
    bits = np.asarray(bits)
    if bits.shape[-1] != M * nbits:
        raise ValueError(f"chromosome has {bits.shape[-1]} bits, expected M*nbits = {M * nbits}")
    place = 2.0 ** np.arange(nbits - 1, -1, -1)
    groups = bits.reshape(bits.shape[:-1] + (M, nbits)).astype(float)
    return groups @ place / (2.0**nbits - 1.0)


def encode(w, nbits: int) -> np.ndarray:
    """Nearest chromosome to raw weights ``w`` in [0, 1] (inverse of :func:`decode`)."""
    w = np.asarray(w, dtype=float)
    if np.any(w < 0) or np.any(w > 1):
        raise ValueError("encodable weights lie in [0, 1]")
    codes = np.rint(w * (2**nbits - 1)).astype(np.int64)
    shifts = np.arange(nbits - 1, -1, -1)
    return ((codes[:, None] >> shifts) & 1).astype(np.uint8).ravel()


def _fitness_rows(raw, st, q):
    raw = np.atleast_2d(raw)
    norm = np.linalg.norm(raw, axis=1)
    out = np.zeros(raw.shape[0])
    ok = norm > 0
    w = raw[ok] / norm[ok, None]
    w2 = w**2
    out[ok] = q_tail((q * np.sqrt(w2 @ st.var0) - w @ st.theta) / np.sqrt(w2 @ st.var1))
    return out


def fitness(bits, st: FusionStatistics, cfg: GaConfig):
    """Pd at ``cfg.pf_target`` of the decoded, normalized weights.

    Chromosomes decoding to all zeros score 0. Accepts one chromosome or a
    population (2-D) and returns a float or an array accordingly.
    """
    raw = decode(bits, cfg.M, cfg.nbits)
    out = _fitness_rows(raw, st, q_tail_inverse(cfg.pf_target))
    return float(out[0]) if raw.ndim == 1 else out


def roulette_select(fitnesses, count: int, rng) -> np.ndarray:
    """Indices drawn with probability proportional to fitness.

    Each draw inverts the cumulative fitness distribution at a uniform
    number; an all-zero fitness vector falls back to uniform selection.
    """
    f = np.asarray(fitnesses, dtype=float)
    if f.ndim != 1 or f.size == 0:
        raise ValueError("fitnesses must be a non-empty 1-D sequence")
    if np.any(f < 0) or not np.all(np.isfinite(f)):
        raise ValueError("fitnesses must be finite and nonnegative")
    total = f.sum()
    if total == 0.0:
        f = np.ones_like(f)
        total = f.size
    cdf = np.cumsum(f) / total
    idx = np.searchsorted(cdf, rng.random(count), side="right")
    return np.minimum(idx, f.size - 1)


def crossover_at(ma, pa, p1: int, p2: int):
    """Swap genes in ``[p1, p2)`` between two parents."""
    ma, pa = np.asarray(ma), np.asarray(pa)
    if ma.shape != pa.shape:
        raise ValueError("parents must have equal length")
    if not (0 <= p1 < p2 <= ma.shape[-1]):
        raise ValueError(f"need 0 <= p1 < p2 <= {ma.shape[-1]}, got ({p1}, {p2})")
    c1, c2 = ma.copy(), pa.copy()
    c1[..., p1:p2] = pa[..., p1:p2]
    c2[..., p1:p2] = ma[..., p1:p2]
    return c1, c2


def _crossover_pairs(ma, pa, rng, p_c):
    n, L = ma.shape
    cross = rng.random(n) < p_c
    # two distinct cut points in 0..L, uniform over unordered pairs
    a = rng.integers(0, L + 1, n)
    b = rng.integers(0, L, n)
    b = b + (b >= a)
    p1, p2 = np.minimum(a, b), np.maximum(a, b)
    pos = np.arange(L)
    swap = (pos >= p1[:, None]) & (pos < p2[:, None]) & cross[:, None]
    return np.where(swap, pa, ma), np.where(swap, ma, pa)


def crossover(ma, pa, rng, p_c: float = 1.0):
    """Two-point crossover applied with probability ``p_c``; otherwise clones."""
    ma, pa = np.asarray(ma), np.asarray(pa)
    if ma.shape != pa.shape or ma.ndim != 1:
        raise ValueError("parents must be 1-D and of equal length")
    c1, c2 = _crossover_pairs(ma[None], pa[None], rng, p_c)
    return c1[0], c2[0]


def mutation_count(p_m: float, pops: int, length: int) -> int:
    return math.floor(p_m * pops * length + 0.5)


def mutate(population, p_m: float, rng, n_elite: int = 0) -> np.ndarray:
    """Flip ``round(p_m * pops * length)`` distinct bits outside the first ``n_elite`` rows."""
    pop = np.array(population, dtype=np.uint8)
    if not (0.0 <= p_m <= 1.0):
        raise ValueError(f"p_m must lie in [0, 1], got {p_m}")
    rows, L = pop.shape
    free = (rows - n_elite) * L
    n_mut = min(mutation_count(p_m, rows, L), free)
    if n_mut == 0:
        return pop
    flat = rng.choice(free, size=n_mut, replace=False)
    body = pop[n_elite:].reshape(-1)
    body[flat] ^= 1
    pop[n_elite:] = body.reshape(rows - n_elite, L)
    return pop


def run_bga(st: FusionStatistics, cfg: GaConfig) -> GaRun:
    if st.M != cfg.M:
        raise ValueError(f"config is for M={cfg.M} SUs, statistics have {st.M}")
    if not np.any(st.theta > 0):
        raise ValueError("theta is zero everywhere; nothing to optimize")
    rng = _rng.make_rng(cfg.seed, _rng.GA)
    q = q_tail_inverse(cfg.pf_target)
    L = cfg.chromosome_length
    n_elite, n_children = cfg.n_elite, cfg.n_children
    n_pairs = (n_children + 1) // 2

    def evaluate(pop):
        return _fitness_rows(decode(pop, cfg.M, cfg.nbits), st, q)

    pop = rng.integers(0, 2, size=(cfg.pops, L), dtype=np.uint8)
    fit = evaluate(pop)
    best = int(np.argmax(fit))
    best_fit, bits = float(fit[best]), pop[best].copy()
    trace = np.empty((cfg.n_gener, 2))
    for t in range(cfg.n_gener):
        order = np.argsort(-fit, kind="stable")
        elites = pop[order[:n_elite]]
        parents = roulette_select(fit, 2 * n_pairs, rng)
        c1, c2 = _crossover_pairs(pop[parents[:n_pairs]], pop[parents[n_pairs:]], rng, cfg.p_c)
        children = np.stack((c1, c2), axis=1).reshape(-1, L)[:n_children]
        pop = mutate(np.concatenate((elites, children)), cfg.p_m, rng, n_elite)
        # elites keep their stored fitness; re-evaluating them in a different
        # batch shape can round differently and break monotonicity by an ulp
        fit = np.concatenate((fit[order[:n_elite]], evaluate(pop[n_elite:])))
        best = int(np.argmax(fit))
        trace[t] = fit[best], fit.mean()
        if fit[best] > best_fit:
            best_fit, bits = float(fit[best]), pop[best].copy()

    if best_fit > 0:
        weights = normalize(decode(bits, cfg.M, cfg.nbits))
    else:
        weights = np.full(cfg.M, np.nan)
    for arr in (bits, weights, trace):
        arr.setflags(write=False)
    return GaRun(
        best_weights=weights,
        best_fitness=best_fit,
        best_chromosome=bits,
        trace=trace,
        generations_run=cfg.n_gener,
    )
