"""Bandit feedback on top of the potential-gradient loop.

Importance-weighted loss estimation, geometric resampling of reciprocal
action probabilities for perturbed leaders, and per-round stability
accounting for the audits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gbpa import (
    FTPL,
    FTRL,
    Potential,
    RunRecord,
    best_arm_loss,
    ftpl_sample_action,
    ftrl_gradient,
    pick_from_cdf,
    stability_level,
    _validate_losses,
)
from .rng import StreamFactory

PROB_FLOOR = 1e-300

MODES = ("exact", "gr")


@dataclass
class LossEstimate:
    """Importance-weighted loss vector: at most one nonzero coordinate.

    ``prob`` is the probability used in the weighting: the exact action
    probability, or the reciprocal of the geometric-resampling count when
    the probability itself is intractable.
    """

    values: np.ndarray
    arm: int
    prob: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if np.count_nonzero(self.values) > 1:
            raise ValueError("a loss estimate has at most one nonzero entry")
        if np.any(self.values < 0):
            raise ValueError("loss estimates are non-negative")


@dataclass
class GeometricResamplingCfg:
    """Cap on the number of resampling draws per round."""

    cap: int

    def __post_init__(self):
        if self.cap < 1:
            raise ValueError("cap must be >= 1")


def default_gr_cap(T: int, first_order: bool = False) -> int:
    """ceil(sqrt(T)) for zero-order experiments, T for first-order ones."""
    return int(T) if first_order else int(math.ceil(math.sqrt(T)))


def importance_weighted_estimate(
    observed_loss: float, prob: float, arm: int, n_arms: int
) -> LossEstimate:
    """(observed_loss / prob) on the observed arm, zero elsewhere."""
    if not prob > 0:
        raise ValueError("prob must be > 0")
    if not 0.0 <= observed_loss <= 1.0:
        raise ValueError("observed loss must lie in [0, 1]")
    values = np.zeros(n_arms)
    values[arm] = observed_loss / prob
    return LossEstimate(values=values, arm=arm, prob=prob)


def _geometric_resampling_detail(spec, L, arm, cap, rng) -> tuple[int, bool]:
    for k in range(1, cap + 1):
        if ftpl_sample_action(spec, L, rng) == arm:
            return k, False
    return cap, True


def geometric_resampling(spec, L, arm: int, cfg: GeometricResamplingCfg, rng) -> int:
    """Number of perturbed-argmin draws until `arm` reappears, capped at cfg.cap.

    The count K^M estimates 1/p_arm from below: E[K^M] = (1-(1-p)^M)/p.
    """
    count, _ = _geometric_resampling_detail(spec, L, arm, cfg.cap, rng)
    return count


def run_bandit(
    potential: Potential,
    losses,
    mode: str,
    seed: int,
    *,
    replicate: int = 0,
    gr_cap: int | None = None,
    gamma: float | None = None,
    record_probs: bool = True,
) -> RunRecord:
    """One bandit run: only the chosen arm's loss is observed each round.

    ``exact`` mode requires a regularized-leader potential and feeds exact
    action probabilities to the estimator; it is the only mode in which the
    per-step audits can run.  ``gr`` mode requires a perturbed leader,
    samples the action by a perturbed argmin, and replaces 1/p by a
    geometric-resampling count (cap-hit rounds are recorded).
    """
    if mode == "exact":
        return _run_exact_batch(
            potential, np.asarray(losses, dtype=float)[None], seed,
            first_replicate=replicate, gamma=gamma, record_probs=record_probs,
        )[0]
    if mode == "gr":
        return _run_gr(potential, losses, seed, replicate, gr_cap, gamma)
    raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


def run_bandit_batch(
    potential: Potential,
    losses,
    seed: int,
    *,
    first_replicate: int = 0,
    gamma: float | None = None,
    record_probs: bool = False,
) -> list[RunRecord]:
    """Exact-mode replicates run in lockstep (row r uses replicate key r).

    Trajectories are identical to the corresponding single runs; batching
    only vectorizes the simplex solves across replicates.
    """
    losses = np.asarray(losses, dtype=float)
    if losses.ndim != 3:
        raise ValueError("batch losses must have shape (R, T, N)")
    return _run_exact_batch(
        potential, losses, seed, first_replicate=first_replicate,
        gamma=gamma, record_probs=record_probs,
    )


def _run_exact_batch(potential, losses, seed, *, first_replicate, gamma, record_probs):
    if not isinstance(potential, FTRL):
        raise ValueError("exact mode requires an FTRL potential")
    for r in range(losses.shape[0]):
        _validate_losses(losses[r])
    R, T, n = losses.shape
    if gamma is None:
        gamma = stability_level(potential)[0]
    reg = potential.reg

    factory = StreamFactory(seed)
    Lhat = np.zeros((R, n))
    rows = np.arange(R)
    arms = np.zeros((R, T), dtype=int)
    incurred = np.zeros((R, T))
    est_vals = np.zeros((R, T))
    summands = np.zeros((R, T))
    clamped = np.zeros(R, dtype=int)
    probs = np.zeros((R, T + 1, n)) if record_probs else None
    u = np.zeros(R)

    for t in range(1, T + 1):
        P = ftrl_gradient(reg, Lhat)
        if record_probs:
            probs[:, t - 1] = P
        cdf = np.cumsum(P, axis=1)
        arm = np.zeros(R, dtype=int)
        for r in range(R):
            u[r] = factory.stream(first_replicate + r, t).random()
            arm[r] = pick_from_cdf(cdf[r], u[r])
        pa = P[rows, arm]
        small = pa < PROB_FLOOR
        clamped += small
        pa = np.maximum(pa, PROB_FLOOR)
        loss = losses[rows, t - 1, arm]
        est = loss / pa
        Lhat[rows, arm] += est
        arms[:, t - 1] = arm
        incurred[:, t - 1] = loss
        est_vals[:, t - 1] = est
        summands[:, t - 1] = est**2 * pa**gamma
    if record_probs:
        probs[:, T] = ftrl_gradient(reg, Lhat)

    records = []
    for r in range(R):
        cum = np.cumsum(incurred[r])
        prefix_best = np.minimum.reduce(np.cumsum(losses[r], axis=0), axis=1)
        best_arm, best = best_arm_loss(losses[r])
        records.append(
            RunRecord(
                arms=arms[r],
                losses=incurred[r],
                cum_loss=cum,
                prefix_best=prefix_best,
                best_arm=best_arm,
                best_loss=best,
                realized_regret=float(cum[-1] - best),
                probs=probs[r] if record_probs else None,
                estimates=est_vals[r],
                est_cum=Lhat[r].copy(),
                summands=summands[r],
                summand_gamma=gamma,
                clamped_rounds=int(clamped[r]),
            )
        )
    return records


def _run_gr(potential, losses, seed, replicate, gr_cap, gamma):
    if not isinstance(potential, FTPL):
        raise ValueError("gr mode requires an FTPL potential")
    losses = _validate_losses(losses)
    T, n = losses.shape
    cap = default_gr_cap(T) if gr_cap is None else int(gr_cap)
    cfg = GeometricResamplingCfg(cap)
    spec = potential.spec

    factory = StreamFactory(seed)
    Lhat = np.zeros(n)
    arms = np.zeros(T, dtype=int)
    incurred = np.zeros(T)
    est_vals = np.zeros(T)
    cap_hits = 0
    for t in range(1, T + 1):
        g = factory.stream(replicate, t)
        arm = ftpl_sample_action(spec, Lhat, g)
        loss = losses[t - 1, arm]
        count, hit = _geometric_resampling_detail(spec, Lhat, arm, cfg.cap, g)
        cap_hits += hit
        est = loss * count
        Lhat[arm] += est
        arms[t - 1] = arm
        incurred[t - 1] = loss
        est_vals[t - 1] = est

    cum = np.cumsum(incurred)
    prefix_best = np.minimum.reduce(np.cumsum(losses, axis=0), axis=1)
    best_arm, best = best_arm_loss(losses)
    return RunRecord(
        arms=arms,
        losses=incurred,
        cum_loss=cum,
        prefix_best=prefix_best,
        best_arm=best_arm,
        best_loss=best,
        realized_regret=float(cum[-1] - best),
        estimates=est_vals,
        est_cum=Lhat.copy(),
        cap_hits=cap_hits,
    )


def lemma7_audit(trace: RunRecord, epsilon_level: float, gamma: float, slack: float = 1e-8) -> bool:
    """Per-round inequality <p_t - p_{t+1}, lhat_t> <= eps * lhat_t(i_t)^2 * p_t(i_t)^gamma.

    Requires an exact-mode trace with distributions recorded (T+1 rows).
    """
    if trace.probs is None or trace.estimates is None:
        raise ValueError("trace lacks recorded distributions or estimates")
    T = trace.arms.size
    idx = np.arange(T)
    p_now = trace.probs[idx, trace.arms]
    p_next = trace.probs[idx + 1, trace.arms]
    lhs = (p_now - p_next) * trace.estimates
    rhs = epsilon_level * trace.estimates**2 * p_now**gamma
    return bool(np.all(lhs <= rhs + slack))
