"""Max-divergences on finite discrete distributions.

Implements the delta-approximate max-divergence and its Tsallis-logarithm
generalization, computed exactly by subset enumeration (N <= 20), by a
likelihood-ratio threshold-set heuristic, or on smoothed empirical
distributions built from Monte-Carlo samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import stream

EXACT_MAX_N = 20

METHODS = ("exact", "threshold", "mc")


class UnsupportedCombinationError(ValueError):
    pass


class SizeError(ValueError):
    pass


@dataclass
class DiscreteDist:
    """A probability vector over [N]: entries >= 0 and summing to 1."""

    probs: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        if self.probs.ndim != 1 or self.probs.size == 0:
            raise ValueError("probs must be a non-empty 1-d vector")
        if np.any(self.probs < 0):
            raise ValueError("probabilities must be non-negative")
        if abs(self.probs.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities must sum to 1, got {self.probs.sum()!r}")

    def __len__(self):
        return self.probs.size


@dataclass
class DivergenceQuery:
    """What to compute: Tsallis index gamma, approximation mass delta, method.

    delta > 0 is defined only for gamma = 1 (the classical approximate
    max-divergence); the generalized divergence never carries a delta.
    """

    gamma: float = 1.0
    delta: float = 0.0
    method: str = "exact"
    mc_samples: int = 100_000
    mc_seed: int = 0

    def __post_init__(self):
        if not 1.0 <= self.gamma <= 2.0:
            raise ValueError(f"gamma must be in [1, 2], got {self.gamma}")
        if not 0.0 <= self.delta < 1.0:
            raise ValueError(f"delta must be in [0, 1), got {self.delta}")
        if self.delta > 0.0 and self.gamma != 1.0:
            raise UnsupportedCombinationError("delta > 0 is only defined for gamma = 1")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.mc_samples < 1:
            raise ValueError("mc_samples must be >= 1")

    def smoothing(self) -> float:
        """Additive smoothing constant used by the Monte-Carlo method."""
        return 1.0 / (10.0 * self.mc_samples)


def tsallis_log(x: float, gamma: float, *, allow_infinite: bool = False) -> float:
    """Generalized logarithm: log(x) at gamma=1, else (x^(1-gamma)-1)/(1-gamma).

    Continuous in gamma at 1 for fixed x > 0.  x = 0 yields -inf; at gamma = 1
    that is a domain error unless ``allow_infinite`` opts into the sentinel.
    """
    if x < 0:
        raise ValueError(f"x must be >= 0, got {x}")
    if not 1.0 <= gamma <= 2.0:
        raise ValueError(f"gamma must be in [1, 2], got {gamma}")
    if x == 0.0:
        if gamma == 1.0 and not allow_infinite:
            raise ValueError("log of zero; pass allow_infinite=True for the -inf sentinel")
        return -math.inf
    if gamma == 1.0:
        return math.log(x)
    return (x ** (1.0 - gamma) - 1.0) / (1.0 - gamma)


def _subset_values(P: np.ndarray, Q: np.ndarray, gamma: float, delta: float) -> np.ndarray:
    """log_gamma(P)-log_gamma(Q) (or the delta variant) per subset; -inf = inadmissible."""
    with np.errstate(divide="ignore", invalid="ignore"):
        if gamma == 1.0:
            if delta > 0.0:
                vals = np.where(P > delta, np.log(np.maximum(P - delta, 0.0)) - np.log(Q), -np.inf)
            else:
                vals = np.log(P) - np.log(Q)
        else:
            # (Q^(1-g) - P^(1-g))/(g-1); Q=0 -> +inf, P=0 -> -inf automatically
            vals = (Q ** (1.0 - gamma) - P ** (1.0 - gamma)) / (gamma - 1.0)
    # events that are null under both distributions carry no information
    return np.where(np.isnan(vals), -np.inf, vals)


def _subset_sums(v: np.ndarray) -> np.ndarray:
    """Sums over all 2^n subsets, indexed by bitmask (doubling construction)."""
    n = v.size
    out = np.zeros(1 << n)
    for i in range(n):
        size = 1 << i
        out[size : 2 * size] = out[:size] + v[i]
    return out


def _exhaustive(p: np.ndarray, q: np.ndarray, gamma: float, delta: float) -> float:
    n = p.size
    if n > EXACT_MAX_N:
        raise SizeError(f"exact enumeration supports N <= {EXACT_MAX_N}, got {n}")
    P = _subset_sums(p)[1:]  # drop the empty set
    Q = _subset_sums(q)[1:]
    return float(np.max(_subset_values(P, Q, gamma, delta)))


def _threshold_sets(p: np.ndarray, q: np.ndarray, gamma: float, delta: float) -> float:
    """Lower bound from O(N) candidate sets on the likelihood-ratio frontier.

    Candidates are the nested sets {i : p_i/q_i >= t} plus, for gamma > 1,
    all singletons: above gamma = 1 the optimal event is often a single
    small-q atom rather than a ratio prefix.  At gamma = 1 the best prefix
    (equivalently the best singleton) is exactly optimal.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(q > 0, p / np.where(q > 0, q, 1.0), np.where(p > 0, np.inf, 1.0))
    order = np.argsort(-ratio, kind="stable")
    P = np.cumsum(p[order])
    Q = np.cumsum(q[order])
    best = float(np.max(_subset_values(P, Q, gamma, delta)))
    if gamma > 1.0:
        best = max(best, float(np.max(_subset_values(p, q, gamma, delta))))
    return best


def _smoothed_empirical(dist: DiscreteDist, n: int, lam: float, rng) -> np.ndarray:
    counts = np.bincount(
        rng.choice(dist.probs.size, size=n, p=dist.probs), minlength=dist.probs.size
    )
    smoothed = counts / n + lam
    return smoothed / smoothed.sum()


def max_divergence(p: DiscreteDist, q: DiscreteDist, query: DivergenceQuery) -> float:
    """Supremum over non-empty events B of log_gamma P(B) - log_gamma Q(B).

    With delta > 0 (gamma = 1) the supremum runs over B with P(B) > delta of
    log((P(B)-delta)/Q(B)).  Returns +inf when some event has Q(B) = 0 but
    positive (post-delta) P mass; the full space always gives 0 at delta = 0,
    so the result is then non-negative.
    """
    if len(p) != len(q):
        raise ValueError(f"support sizes differ: {len(p)} vs {len(q)}")
    pv, qv = p.probs, q.probs
    if query.method == "mc":
        lam = query.smoothing()
        pv = _smoothed_empirical(p, query.mc_samples, lam, stream(query.mc_seed, 0, 1))
        qv = _smoothed_empirical(q, query.mc_samples, lam, stream(query.mc_seed, 0, 2))
    if query.method == "threshold":
        return _threshold_sets(pv, qv, query.gamma, query.delta)
    if query.method == "mc" and len(p) > EXACT_MAX_N:
        return _threshold_sets(pv, qv, query.gamma, query.delta)
    return _exhaustive(pv, qv, query.gamma, query.delta)


def pushforward(dist: DiscreteDist, index_map, n_out: int | None = None) -> DiscreteDist:
    """Image distribution under a deterministic map [N] -> [M], given as an index array."""
    idx = np.asarray(
        [index_map(i) for i in range(len(dist))] if callable(index_map) else index_map,
        dtype=int,
    )
    if idx.shape != (len(dist),):
        raise ValueError("index_map must be total on the support")
    if np.any(idx < 0):
        raise ValueError("index_map values must be non-negative")
    m = int(idx.max()) + 1 if n_out is None else n_out
    return DiscreteDist(np.bincount(idx, weights=dist.probs, minlength=m))


def divergence_of_pushforward(p: DiscreteDist, q: DiscreteDist, index_map, gamma: float) -> float:
    """Divergence between the images f(P), f(Q); never exceeds the source divergence."""
    fp = pushforward(p, index_map)
    fq = pushforward(q, index_map, n_out=len(fp))
    return max_divergence(fp, fq, DivergenceQuery(gamma=gamma, method="exact"))
