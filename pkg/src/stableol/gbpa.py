"""Gradient-based prediction for the experts game.

A potential maps cumulative losses L to a probability vector over arms.
Regularized leaders compute the gradient exactly through the Lagrangian
stationarity condition; perturbed leaders sample an argmin directly or
evaluate the gradient by adaptive quadrature over the noise distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .divergence import DiscreteDist, DivergenceQuery, max_divergence
from .perturbation import PerturbationSpec, sample_scalar
from .rng import StreamFactory

QUAD_MAX_ARMS = 64
BISECTION_CAP = 10_000
SUM_TOL = 1e-12


class SolverError(RuntimeError):
    pass


class QuadratureError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Potentials
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Shannon:
    """Negative Shannon entropy, eta * sum p log p.

    The alpha -> 1 limit of the Tsallis family.  Baseline only: the
    partial-information guarantees for 0 < alpha < 1 do not cover it.
    """

    eta: float

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be > 0")

    def value(self, p):
        p = np.asarray(p)
        return float(self.eta * np.sum(np.where(p > 0, p * np.log(np.maximum(p, 1e-300)), 0.0)))

    def fprime(self, x):
        return self.eta * (1.0 + np.log(x))

    def consistency(self):
        return 1.0, 1.0 / self.eta

    def range_on_simplex(self, n, tau=None):
        return self.eta * math.log(n)


@dataclass(frozen=True)
class TsallisEntropy:
    """Negative Tsallis entropy, eta/(1-alpha) * sum (p_i - p_i^alpha), 0 < alpha < 1."""

    eta: float
    alpha: float

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be > 0")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie strictly inside (0, 1)")

    def value(self, p):
        p = np.asarray(p)
        return float(self.eta / (1.0 - self.alpha) * np.sum(p - p**self.alpha))

    def fprime(self, x):
        return self.eta / (1.0 - self.alpha) * (1.0 - self.alpha * x ** (self.alpha - 1.0))

    def lambda_lower(self, L):
        return -np.min(L, axis=-1) - self.eta / (1.0 - self.alpha)

    def p_of_lambda(self, lam, L):
        w = (1.0 + (1.0 - self.alpha) * (lam[..., None] + L) / self.eta) / self.alpha
        return w ** (-1.0 / (1.0 - self.alpha))

    def consistency(self):
        return 2.0 - self.alpha, 1.0 / (self.eta * self.alpha)

    def range_on_simplex(self, n, tau=None):
        return self.eta * (n ** (1.0 - self.alpha) - 1.0) / (1.0 - self.alpha)


@dataclass(frozen=True)
class LogBarrier:
    """Log-barrier regularizer, -eta * sum log p_i."""

    eta: float

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be > 0")

    def value(self, p):
        p = np.asarray(p)
        return float(-self.eta * np.sum(np.log(np.maximum(p, 1e-300))))

    def fprime(self, x):
        return -self.eta / x

    def lambda_lower(self, L):
        return -np.min(L, axis=-1)

    def p_of_lambda(self, lam, L):
        return self.eta / (lam[..., None] + L)

    def consistency(self):
        return 2.0, 1.0 / self.eta

    def range_on_simplex(self, n, tau):
        # unbounded on the open simplex; reported over {p : p_i >= tau}
        return self.eta * n * math.log(1.0 / tau)


Regularizer = Shannon | TsallisEntropy | LogBarrier


@dataclass(frozen=True)
class FTRL:
    reg: Regularizer


@dataclass(frozen=True)
class FTPL:
    spec: PerturbationSpec


Potential = FTRL | FTPL


def stability_level(potential: Potential) -> tuple[float, float]:
    """(gamma, epsilon) such that the one-step divergence D_{inf,gamma} between
    consecutive action distributions is at most epsilon * ||loss||_inf."""
    if isinstance(potential, FTRL):
        gamma_dc, eps_dc = potential.reg.consistency()
        return gamma_dc, 2.0 * eps_dc
    return 1.0, 2.0 * preset_epsilon_scale(potential.spec)


def preset_epsilon_scale(spec: PerturbationSpec) -> float:
    """Reciprocal of the scale parameter: the stability knob of the presets."""
    key = {"gamma": "scale", "gumbel": "beta", "frechet": "scale", "weibull": "lam", "pareto": "xm", "exponential": "scale"}
    if spec.family not in key:
        raise ValueError(f"no preset stability level for family {spec.family!r}")
    return 1.0 / spec.params[key[spec.family]]


# ---------------------------------------------------------------------------
# Regularized-leader gradient (Lagrangian bisection)
# ---------------------------------------------------------------------------


def ftrl_gradient(reg: Regularizer, L) -> np.ndarray:
    """argmin_p <L, p> + F(p) over the simplex.

    Solves the stationarity condition L_i + f'(p_i) + lambda = 0 by bisection
    on the multiplier until |sum p - 1| <= 1e-12.  Accepts L of shape (N,) or
    a batch (R, N), solved row-wise.  The Shannon case uses the stable
    closed form p propto exp(-(L - min L)/eta).
    """
    L = np.asarray(L, dtype=float)
    single = L.ndim == 1
    Lb = L[None, :] if single else L
    if isinstance(reg, Shannon):
        z = -(Lb - Lb.min(axis=1, keepdims=True)) / reg.eta
        w = np.exp(z)
        P = w / w.sum(axis=1, keepdims=True)
        return P[0] if single else P

    lo = reg.lambda_lower(Lb)
    width = np.ones_like(lo)
    with np.errstate(divide="ignore", over="ignore"):
        for _ in range(BISECTION_CAP):
            too_big = reg.p_of_lambda(lo + width, Lb).sum(axis=1) >= 1.0
            if not too_big.any():
                break
            width[too_big] *= 2.0
        else:
            raise SolverError("could not bracket the simplex multiplier")
        hi = lo + width
        lo = lo.copy()
        for it in range(BISECTION_CAP):
            mid = 0.5 * (lo + hi)
            P = reg.p_of_lambda(mid, Lb)
            s = P.sum(axis=1)
            if np.all(np.abs(s - 1.0) <= SUM_TOL):
                break
            bigger = s > 1.0
            lo = np.where(bigger, mid, lo)
            hi = np.where(bigger, hi, mid)
        else:
            raise SolverError(
                f"bisection did not converge in {BISECTION_CAP} iterations; "
                f"bracket [{lo}, {hi}]"
            )
    return P[0] if single else P


def stationarity_residual(reg: Regularizer, L, p) -> float:
    """max_i |L_i + f'(p_i) + lambda| at the implied multiplier (a solution check)."""
    L = np.asarray(L, dtype=float)
    p = np.asarray(p, dtype=float)
    g = L + reg.fprime(p)
    lam = -np.mean(g)
    return float(np.max(np.abs(g + lam)))


# ---------------------------------------------------------------------------
# Perturbed-leader gradient (quadrature) and sampling
# ---------------------------------------------------------------------------


def _integration_window(spec, L, i, tail_mass):
    qlo = float(spec.ppf(tail_mass))
    qhi = float(spec.ppf(1.0 - tail_mass))
    trail = float(np.max(L[i] - L))  # how far arm i is behind the leader (>= 0)
    smin = spec.support_min()
    lo = qlo if math.isinf(smin) else max(qlo, smin + max(0.0, trail))
    hi = qhi + max(0.0, trail)
    return lo, hi


def _scan_grid(lo, hi, n=161):
    span = hi - lo
    if span <= 0:
        return np.array([lo])
    if span > 200.0 * (1.0 + abs(lo)):
        # heavy-tailed upper end: resolve the region near lo on a log scale
        offs = np.geomspace(span * 1e-12, span, n - 1)
        return lo + np.concatenate(([0.0], offs))
    return np.linspace(lo, hi, n)


def ftpl_gradient_quadrature(
    spec: PerturbationSpec,
    L,
    *,
    abs_tol: float = 1e-8,
    tail_mass: float = 1e-12,
    drift_tol: float = 1e-6,
) -> np.ndarray:
    """Win probabilities p_i = P(i = argmin_j (L_j - Z_j)) for iid noise Z.

    Evaluates p_i = integral f(z) * prod_{j != i} F(z + L_j - L_i) dz by
    adaptive quadrature on a support truncated at the tail_mass quantiles
    (window shifted outward when arm i trails the leader, so that trailing
    arms keep relative accuracy).  Entries are renormalized; drift beyond
    drift_tol raises.
    """
    L = np.asarray(L, dtype=float)
    n = L.size
    if n > QUAD_MAX_ARMS:
        raise ValueError(f"quadrature gradient supports N <= {QUAD_MAX_ARMS}, got {n}")
    if n == 1:
        return np.ones(1)
    pdf, cdf_s = spec.scalar_funcs()
    p = np.zeros(n)
    for i in range(n):
        shifts = np.delete(L - L[i], i)

        def integrand(z):
            v = pdf(z)
            if v == 0.0:
                return 0.0
            for d in shifts:
                v *= cdf_s(z + d)
                if v == 0.0:
                    return 0.0
            return v

        lo, hi = _integration_window(spec, L, i, tail_mass)
        if hi <= lo:
            continue
        grid = _scan_grid(lo, hi)
        vals = np.array([integrand(z) for z in grid])
        peak = vals.max()
        if peak == 0.0:
            continue  # below float range; clamped later
        live = np.flatnonzero(vals > peak * 1e-22)
        a = grid[max(live[0] - 1, 0)]
        b = grid[min(live[-1] + 1, grid.size - 1)]
        est = max(float(np.trapezoid(vals, grid)), peak * (b - a) / grid.size)
        # kinks where a shifted factor's support begins, plus the scanned peak
        smin = spec.support_min()
        pts = [float(grid[vals.argmax()])]
        if not math.isinf(smin):
            pts += [smin - d for d in shifts]
        pts = sorted({x for x in pts if a < x < b})
        epsabs = abs_tol * min(1.0, est)
        val, err, info = integrate.quad(
            integrand, a, b, points=pts or None, epsabs=epsabs, epsrel=1e-10,
            limit=300, full_output=True,
        )[:3]
        if err > max(50.0 * epsabs, 1e-4 * abs(val)):
            raise QuadratureError(
                f"arm {i}: quadrature error {err:.2e} too large for value {val:.2e}"
            )
        p[i] = max(val, 0.0)
    total = p.sum()
    if abs(total - 1.0) > drift_tol:
        raise QuadratureError(f"gradient mass {total!r} drifted more than {drift_tol}")
    p = np.maximum(p / total, 1e-300)
    return p / p.sum()


def gumbel_softmax_gradient(spec: PerturbationSpec, L) -> np.ndarray:
    """Closed form for Gumbel noise: the perturbed argmin is a softmax draw."""
    if spec.family != "gumbel":
        raise ValueError("closed form requires the gumbel family")
    L = np.asarray(L, dtype=float)
    z = -(L - L.min(axis=-1, keepdims=True)) / spec.params["beta"]
    w = np.exp(z)
    return w / w.sum(axis=-1, keepdims=True)


def potential_gradient(potential: Potential, L, *, closed_form: bool = True, **quad_opts) -> np.ndarray:
    """Action distribution of the potential at cumulative loss L."""
    if isinstance(potential, FTRL):
        return ftrl_gradient(potential.reg, L)
    if closed_form and potential.spec.family == "gumbel":
        return gumbel_softmax_gradient(potential.spec, L)
    return ftpl_gradient_quadrature(potential.spec, L, **quad_opts)


def ftpl_sample_action(spec: PerturbationSpec, L, rng) -> int:
    """Draw Z_1..Z_N iid and return argmin_i (L_i - Z_i), lowest index on ties."""
    L = np.asarray(L, dtype=float)
    z = sample_scalar(spec, rng, size=L.size)
    return int(np.argmin(L - z))


def pick_from_cdf(cdf: np.ndarray, u: float) -> int:
    """Index of the first cumulative weight exceeding u (clamped to the support)."""
    return int(min(np.searchsorted(cdf, u, side="right"), cdf.size - 1))


def sample_from_probs(p: np.ndarray, rng) -> int:
    """Inverse-CDF draw from a probability vector using a single uniform."""
    return pick_from_cdf(np.cumsum(p), rng.random())


# ---------------------------------------------------------------------------
# The experts game loop
# ---------------------------------------------------------------------------


@dataclass
class RunRecord:
    """Per-round trace of a run plus regret accounting.

    ``probs`` has T+1 rows when recorded: row t-1 is the distribution played
    at round t and row T is the one-step-lookahead distribution after the
    final loss.  ``lookahead_*`` trace the fictitious algorithm that plays
    round t with the distribution available after seeing round t's loss.
    """

    arms: np.ndarray
    losses: np.ndarray
    cum_loss: np.ndarray
    prefix_best: np.ndarray
    best_arm: int
    best_loss: float
    realized_regret: float
    expected_regret: float | None = None
    probs: np.ndarray | None = None
    lookahead_arms: np.ndarray | None = None
    lookahead_losses: np.ndarray | None = None
    estimates: np.ndarray | None = None
    est_cum: np.ndarray | None = None
    summands: np.ndarray | None = None
    summand_gamma: float | None = None
    cap_hits: int = 0
    clamped_rounds: int = 0
    noise: np.ndarray | None = None
    action_probs: np.ndarray | None = None
    sample_probs: np.ndarray | None = None

    def regret_at(self, t: int) -> float:
        """Cumulative regret against the best fixed arm over rounds 1..t."""
        return float(self.cum_loss[t - 1] - self.prefix_best[t - 1])


def _validate_losses(losses) -> np.ndarray:
    losses = np.asarray(losses, dtype=float)
    if losses.ndim != 2:
        raise ValueError("losses must be a (T, N) matrix")
    if np.any(losses < 0) or np.any(losses > 1):
        raise ValueError("losses must lie in [0, 1]")
    return losses


def best_arm_loss(losses) -> tuple[int, float]:
    """Best fixed arm in hindsight and its cumulative loss (lowest index on ties)."""
    losses = np.asarray(losses, dtype=float)
    if losses.size == 0:
        raise ValueError("empty loss sequence")
    totals = losses.sum(axis=0)
    arm = int(np.argmin(totals))
    return arm, float(totals[arm])


def run_experts(
    potential: Potential,
    losses,
    seed: int,
    *,
    replicate: int = 0,
    fixed_noise: bool = False,
    record_probs: bool | None = None,
    lookahead: bool = False,
) -> RunRecord:
    """Full-information play: sample from the potential gradient, observe the
    whole loss vector, update cumulative losses.

    Perturbed leaders redraw noise each round by default (an oblivious
    adversary makes the expected regret identical either way); fixed_noise
    draws Z once and reuses it, which is the mode the lookahead/be-the-leader
    audit is stated for.  Distributions are recorded (and expected regret
    computed) whenever they are available exactly: always for regularized
    leaders, for perturbed leaders only with Gumbel noise unless
    ``record_probs`` forces quadrature.
    """
    losses = _validate_losses(losses)
    T, n = losses.shape
    is_ftrl = isinstance(potential, FTRL)
    if fixed_noise and is_ftrl:
        raise ValueError("fixed_noise applies to perturbed-leader potentials only")
    if record_probs is None:
        record_probs = is_ftrl or (isinstance(potential, FTPL) and potential.spec.family == "gumbel")

    factory = StreamFactory(seed)
    L = np.zeros(n)
    arms = np.zeros(T, dtype=int)
    incurred = np.zeros(T)
    probs = np.zeros((T + 1, n)) if record_probs else None
    la_arms = np.zeros(T, dtype=int) if lookahead else None
    la_losses = np.zeros(T) if lookahead else None
    z_fixed = None
    if fixed_noise:
        z_fixed = np.asarray(sample_scalar(potential.spec, factory.stream(replicate, 0), size=n))

    need_probs = is_ftrl or record_probs
    expected = 0.0
    for t in range(1, T + 1):
        ell = losses[t - 1]
        g = factory.stream(replicate, t)
        if need_probs:
            p = potential_gradient(potential, L)
            if record_probs:
                probs[t - 1] = p
        if is_ftrl:
            arm = sample_from_probs(p, g)
        elif fixed_noise:
            arm = int(np.argmin(L - z_fixed))
        else:
            arm = ftpl_sample_action(potential.spec, L, g)
        arms[t - 1] = arm
        incurred[t - 1] = ell[arm]
        if need_probs:
            expected += float(p @ ell)
        L = L + ell
        if lookahead:
            if is_ftrl:
                p_next = ftrl_gradient(potential.reg, L)
                la = sample_from_probs(p_next, g)
            elif fixed_noise:
                la = int(np.argmin(L - z_fixed))
            else:
                la = ftpl_sample_action(potential.spec, L, g)
            la_arms[t - 1] = la
            la_losses[t - 1] = ell[la]
    if record_probs:
        probs[T] = potential_gradient(potential, L)

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
        expected_regret=(expected - best) if need_probs else None,
        probs=probs,
        lookahead_arms=la_arms,
        lookahead_losses=la_losses,
        noise=z_fixed,
    )


def btl_audit(record: RunRecord) -> tuple[float, float]:
    """(lhs, rhs) of the be-the-leader inequality for a fixed-noise run:
    sum_t loss_t(lookahead arm) <= best_loss + 2 ||Z||_inf."""
    if record.noise is None or record.lookahead_losses is None:
        raise ValueError("audit needs a fixed-noise run with lookahead recorded")
    lhs = float(record.lookahead_losses.sum())
    rhs = record.best_loss + 2.0 * float(np.max(np.abs(record.noise)))
    return lhs, rhs


# ---------------------------------------------------------------------------
# Stability probe
# ---------------------------------------------------------------------------


@dataclass
class ProbeConfig:
    abs_tol: float = 1e-8
    tail_mass: float = 1e-12


def probe_stability(
    potential: Potential,
    L_prefix,
    new_loss,
    gamma: float,
    probe_cfg: ProbeConfig | None = None,
) -> float:
    """Measured D_{inf,gamma} between the action distributions before and
    after appending one loss vector.

    Distributions are computed exactly for regularized leaders and by
    quadrature for perturbed leaders (no closed-form shortcut, so the probe
    stays independent of it), then compared by exhaustive enumeration.
    The stability claim for the potential is level * ||new_loss||_inf with
    (gamma, level) = stability_level(potential).
    """
    cfg = probe_cfg or ProbeConfig()
    L = np.asarray(L_prefix, dtype=float)
    ell = np.asarray(new_loss, dtype=float)
    if isinstance(potential, FTRL):
        before = ftrl_gradient(potential.reg, L)
        after = ftrl_gradient(potential.reg, L + ell)
    else:
        before = ftpl_gradient_quadrature(
            potential.spec, L, abs_tol=cfg.abs_tol, tail_mass=cfg.tail_mass
        )
        after = ftpl_gradient_quadrature(
            potential.spec, L + ell, abs_tol=cfg.abs_tol, tail_mass=cfg.tail_mass
        )
    query = DivergenceQuery(gamma=gamma, method="exact")
    return max_divergence(
        DiscreteDist(before / before.sum()), DiscreteDist(after / after.sum()), query
    )
