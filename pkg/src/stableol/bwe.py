"""Bandits with expert advice: expert/action transforms, clipping, game loop.

Experts recommend one of K actions each round; the potential runs over the N
experts while sampling and loss estimation happen in action space.  The
transform pair moves distributions from experts to actions and estimates
back, preserving the inner product; clipping floors the sampling
probabilities to keep estimates bounded by 1/rho.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gbpa import Potential, RunRecord, potential_gradient, sample_from_probs
from .rng import ADVERSARY_ROUND, StreamFactory, stream

PROB_FLOOR = 1e-300


@dataclass
class ClipConfig:
    """Clipping threshold rho; rho * K < 1 is required so some entry survives."""

    rho: float

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must lie in [0, 1)")

    def validate_for(self, n_actions: int):
        if self.rho * n_actions >= 1.0:
            raise ValueError(f"need rho < 1/K: rho={self.rho}, K={n_actions}")


def theorem_rho(epsilon_scale: float, n_actions: int) -> float:
    """Default clipping threshold sqrt(2*eps/K); requires 2*eps*K < 1."""
    if not 2.0 * epsilon_scale * n_actions < 1.0:
        raise ValueError("default threshold needs 2 * epsilon_scale * K < 1")
    return math.sqrt(2.0 * epsilon_scale / n_actions)


def experts_to_actions(p, advice_col, n_actions: int) -> np.ndarray:
    """Action distribution: each action gets the mass of the experts advising it."""
    p = np.asarray(p, dtype=float)
    advice_col = np.asarray(advice_col, dtype=int)
    return np.bincount(advice_col, weights=p, minlength=n_actions)


def actions_to_experts(lhat, advice_col) -> np.ndarray:
    """Expert-space estimate: expert i receives the estimate of its advised action.

    Adjoint to experts_to_actions: <experts_to_actions(p), lhat> = <p, actions_to_experts(lhat)>.
    """
    lhat = np.asarray(lhat, dtype=float)
    return lhat[np.asarray(advice_col, dtype=int)]


def duality_gap(p, lhat, advice_col) -> float:
    """<psi(p), lhat> - <p, phi(lhat)> for a single-atom estimate, with both
    sides accumulated in index order so the gap is exactly zero in floats."""
    lhat = np.asarray(lhat, dtype=float)
    (nonzero,) = np.nonzero(lhat)
    if nonzero.size == 0:
        return 0.0
    j = int(nonzero[0])
    advice_col = np.asarray(advice_col, dtype=int)
    lhs = lhat[j] * experts_to_actions(p, advice_col, int(advice_col.max()) + 1)[j]
    mass = 0.0
    for pi in np.asarray(p, dtype=float)[advice_col == j]:
        mass += pi
    return lhs - lhat[j] * mass


def clip(q, cfg: ClipConfig) -> np.ndarray:
    """Zero entries below rho and rescale the survivors by 1 - clipped mass."""
    q = np.asarray(q, dtype=float)
    cfg.validate_for(q.size)
    if cfg.rho == 0.0:
        return q.copy()
    cut = q < cfg.rho
    removed = q[cut].sum()
    assert not cut.all(), "rho < 1/K guarantees a surviving entry"
    out = np.where(cut, 0.0, q / (1.0 - removed))
    return out


def uniform_advice(T: int, n_experts: int, n_actions: int, seed: int, replicate: int = 0) -> np.ndarray:
    """Advice matrix with iid uniform recommendations (0-based actions)."""
    g = stream(seed, replicate, ADVERSARY_ROUND)
    return g.integers(0, n_actions, size=(T, n_experts))


def planted_good_expert(
    T: int, n_experts: int, n_actions: int, seed: int, replicate: int = 0, mean: float = 0.5
) -> tuple[np.ndarray, np.ndarray]:
    """Loss matrix and advice where expert 0's advised action always has zero loss."""
    g = stream(seed, replicate, ADVERSARY_ROUND)
    advice = g.integers(0, n_actions, size=(T, n_experts))
    losses = (g.random((T, n_actions)) < mean).astype(float)
    losses[np.arange(T), advice[:, 0]] = 0.0
    return losses, advice


def expert_cumulative_losses(losses, advice) -> np.ndarray:
    """(T, N) matrix of per-round losses each expert's advice would incur."""
    losses = np.asarray(losses, dtype=float)
    advice = np.asarray(advice, dtype=int)
    T = losses.shape[0]
    return losses[np.arange(T)[:, None], advice]


def run_bwe(
    potential: Potential,
    losses,
    advice,
    cfg: ClipConfig,
    seed: int,
    *,
    replicate: int = 0,
    record_probs: bool = True,
) -> RunRecord:
    """Bandit play guided by expert advice.

    Each round: expert distribution from the potential gradient, push to
    actions, optionally clip, sample one action, importance-weight with the
    probability of the distribution actually sampled from, and pull the
    estimate back to expert space for the update.  Regret is against the
    best expert in hindsight.
    """
    losses = np.asarray(losses, dtype=float)
    advice = np.asarray(advice, dtype=int)
    T, K = losses.shape
    if advice.shape[0] != T:
        raise ValueError("advice and losses disagree on T")
    n_experts = advice.shape[1]
    if np.any((advice < 0) | (advice >= K)):
        raise ValueError("advice entries must be actions in [0, K)")
    if np.any(losses < 0) or np.any(losses > 1):
        raise ValueError("losses must lie in [0, 1]")
    cfg.validate_for(K)

    factory = StreamFactory(seed)
    phi_bar = np.zeros(n_experts)
    arms = np.zeros(T, dtype=int)
    incurred = np.zeros(T)
    est_vals = np.zeros(T)
    probs = np.zeros((T + 1, n_experts)) if record_probs else None
    qs = np.zeros((T, K))
    q_tildes = np.zeros((T, K))
    clamped = 0

    for t in range(1, T + 1):
        adv = advice[t - 1]
        p = potential_gradient(potential, phi_bar)
        if record_probs:
            probs[t - 1] = p
        q = experts_to_actions(p, adv, K)
        q_tilde = clip(q, cfg)
        g = factory.stream(replicate, t)
        j = sample_from_probs(q_tilde, g)
        loss = losses[t - 1, j]
        pa = q_tilde[j]
        if pa < PROB_FLOOR:
            pa = PROB_FLOOR
            clamped += 1
        est = loss / pa
        lhat = np.zeros(K)
        lhat[j] = est
        phi_hat = actions_to_experts(lhat, adv)
        assert duality_gap(p, lhat, adv) == 0.0
        phi_bar = phi_bar + phi_hat
        arms[t - 1] = j
        incurred[t - 1] = loss
        est_vals[t - 1] = est
        qs[t - 1] = q
        q_tildes[t - 1] = q_tilde
    if record_probs:
        probs[T] = potential_gradient(potential, phi_bar)

    per_expert = expert_cumulative_losses(losses, advice)
    prefix_best = np.minimum.reduce(np.cumsum(per_expert, axis=0), axis=1)
    totals = per_expert.sum(axis=0)
    best_expert = int(np.argmin(totals))
    best = float(totals[best_expert])
    cum = np.cumsum(incurred)
    return RunRecord(
        arms=arms,
        losses=incurred,
        cum_loss=cum,
        prefix_best=prefix_best,
        best_arm=best_expert,
        best_loss=best,
        realized_regret=float(cum[-1] - best),
        probs=probs,
        estimates=est_vals,
        est_cum=phi_bar.copy(),
        clamped_rounds=clamped,
        action_probs=qs,
        sample_probs=q_tildes,
    )
