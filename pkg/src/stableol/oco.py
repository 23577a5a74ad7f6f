"""Online convex optimization with objective perturbation.

Losses are scalar links of a linear predictor, so their Hessians have rank
at most one.  Each round minimizes the running loss sum plus a ridge term
and a random linear term over an L2 ball; the noise scale carries the
stability level that the regret audits consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .perturbation import ObjPertNoiseSpec, sample_objpert_noise
from .rng import ADVERSARY_ROUND, StreamFactory

PGD_CAP = 100_000

LINKS = ("linear", "squared", "logistic")


class SolverError(RuntimeError):
    pass


@dataclass
class BallDomain:
    """L2 ball of the given radius; optionally capped to the nonnegative orthant."""

    dimension: int
    radius: float
    nonneg: bool = False

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if not self.radius > 0:
            raise ValueError("radius must be > 0")

    def project(self, x: np.ndarray) -> np.ndarray:
        if self.nonneg:
            x = np.maximum(x, 0.0)
        norm = float(np.linalg.norm(x))
        if norm > self.radius:
            return x * (self.radius / norm)
        return x.copy()


def _sigmoid(s):
    out = np.empty_like(s)
    pos = s >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-s[pos]))
    e = np.exp(s[~pos])
    out[~pos] = e / (1.0 + e)
    return out


@dataclass
class ConvexLossSpec:
    """One round's loss: a scalar link applied to <x, z>.

    linear: <x, z> + offset; squared: 0.5*(<x, z> - target)^2;
    logistic: log(1 + exp(-target * <x, z>)) with target in {-1, +1}.
    The offset shifts linear losses so the loss-only generators keep the
    per-round minimum over the domain at zero.
    """

    link: str
    z: np.ndarray
    target: float | None = None
    offset: float = 0.0

    def __post_init__(self):
        if self.link not in LINKS:
            raise ValueError(f"link must be one of {LINKS}, got {self.link!r}")
        self.z = np.asarray(self.z, dtype=float)
        if self.link == "squared" and self.target is None:
            raise ValueError("squared link needs a target")
        if self.link == "logistic" and self.target not in (-1.0, 1.0, -1, 1):
            raise ValueError("logistic link needs a label in {-1, +1}")

    def value(self, x) -> float:
        s = float(self.z @ x)
        if self.link == "linear":
            return s + self.offset
        if self.link == "squared":
            return 0.5 * (s - self.target) ** 2
        m = self.target * s
        return float(np.logaddexp(0.0, -m))

    def grad(self, x) -> np.ndarray:
        s = float(self.z @ x)
        if self.link == "linear":
            return self.z.copy()
        if self.link == "squared":
            return (s - self.target) * self.z
        return -self.target * float(_sigmoid(np.array([-self.target * s]))[0]) * self.z

    def curvature(self) -> float:
        """Largest Hessian eigenvalue over the whole space (rank-one Hessian)."""
        zz = float(self.z @ self.z)
        if self.link == "linear":
            return 0.0
        if self.link == "squared":
            return zz
        return 0.25 * zz

    def grad_bound(self, radius: float) -> float:
        zn = float(np.linalg.norm(self.z))
        if self.link == "linear":
            return zn
        if self.link == "squared":
            return (radius * zn + abs(self.target)) * zn
        return zn

    def value_bound(self, radius: float) -> float:
        zn = float(np.linalg.norm(self.z))
        if self.link == "linear":
            return radius * zn + abs(self.offset)
        if self.link == "squared":
            return 0.5 * (radius * zn + abs(self.target)) ** 2
        return float(np.logaddexp(0.0, radius * zn))


def _stack(losses):
    if not losses:
        return None
    link = losses[0].link
    if any(spec.link != link for spec in losses):
        raise ValueError("mixed link kinds in one objective are not supported")
    Z = np.stack([spec.z for spec in losses])
    if link == "linear":
        aux = np.array([spec.offset for spec in losses])
    else:
        aux = np.array([spec.target for spec in losses])
    return link, Z, aux


def _objective_funcs(losses, ridge: float, b: np.ndarray):
    """(value, grad, smoothness) of sum of losses + ridge*||x||^2 + <b, x>."""
    stacked = _stack(losses)

    if stacked is None:
        value = lambda x: ridge * float(x @ x) + float(b @ x)
        grad = lambda x: 2.0 * ridge * x + b
        return value, grad, 2.0 * ridge, None

    link, Z, aux = stacked
    if link == "linear":
        c = Z.sum(axis=0) + b
        const = float(aux.sum())

        def value(x):
            return float(c @ x) + const + ridge * float(x @ x)

        def grad(x):
            return c + 2.0 * ridge * x

        return value, grad, 2.0 * ridge, c

    if link == "squared":

        def value(x):
            s = Z @ x - aux
            return 0.5 * float(s @ s) + ridge * float(x @ x) + float(b @ x)

        def grad(x):
            return Z.T @ (Z @ x - aux) + 2.0 * ridge * x + b

    else:  # logistic

        def value(x):
            m = aux * (Z @ x)
            return float(np.logaddexp(0.0, -m).sum()) + ridge * float(x @ x) + float(b @ x)

        def grad(x):
            m = aux * (Z @ x)
            return Z.T @ (-aux * _sigmoid(-m)) + 2.0 * ridge * x + b

    smooth = sum(spec.curvature() for spec in losses) + 2.0 * ridge
    return value, grad, smooth, None


def _pgd(value, grad, smooth, domain, tol, x0=None):
    x = domain.project(np.zeros(domain.dimension) if x0 is None else np.asarray(x0, float))
    fx = value(x)
    step = 1.0 / max(smooth, 1e-12)
    for _ in range(PGD_CAP):
        g = grad(x)
        accepted = False
        for _ in range(80):
            cand = domain.project(x - step * g)
            fc = value(cand)
            if fc <= fx:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            return x  # no projected step improves: stationary to float precision
        improvement = fx - fc
        x, fx = cand, fc
        step *= 1.5
        if improvement <= tol * (1.0 + abs(fc)):
            return x
    gm = gradient_mapping_norm(value, grad, domain, x)
    raise SolverError(f"projected gradient descent hit the iteration cap; gradient mapping {gm:.3e}")


def gradient_mapping_norm(value, grad, domain, x, step: float = 1.0) -> float:
    return float(np.linalg.norm((x - domain.project(x - step * grad(x))) / step))


def objpert_step(
    losses: list[ConvexLossSpec],
    b: np.ndarray,
    epsilon: float,
    gamma_curv: float,
    domain: BallDomain,
    tol: float = 1e-9,
) -> np.ndarray:
    """argmin over the domain of sum_s loss_s(x) + (gamma_curv/eps)||x||^2 + <b, x>.

    All-linear objectives over a plain ball are solved in closed form (the
    fixed point of projected gradient descent); anything curved runs PGD with
    backtracking.  A fully constant objective returns the origin.
    """
    b = np.asarray(b, dtype=float)
    if b.shape != (domain.dimension,):
        raise ValueError("noise vector dimension mismatch")
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    if gamma_curv < 0:
        raise ValueError("gamma_curv must be >= 0")
    ridge = gamma_curv / epsilon
    value, grad, smooth, linear_c = _objective_funcs(losses, ridge, b)

    if linear_c is not None and not domain.nonneg:
        c = linear_c
        cn = float(np.linalg.norm(c))
        if cn == 0.0:
            return np.zeros(domain.dimension)
        if ridge > 0.0:
            reach = min(1.0 / (2.0 * ridge), domain.radius / cn)
            return -c * reach
        return -c * (domain.radius / cn)
    return _pgd(value, grad, smooth, domain, tol)


def offline_opt(domain: BallDomain, losses: list[ConvexLossSpec], tol: float = 1e-9):
    """Minimizer and value of the summed loss over the domain."""
    if not losses:
        raise ValueError("empty loss sequence")
    x = objpert_step(losses, np.zeros(domain.dimension), 1.0, 0.0, domain, tol)
    value, _, _, _ = _objective_funcs(losses, 0.0, np.zeros(domain.dimension))
    return x, float(value(x))


def gradient_check(spec: ConvexLossSpec, x, h: float = 1e-6) -> float:
    """Relative error of the analytic gradient against central differences."""
    x = np.asarray(x, dtype=float)
    g = spec.grad(x)
    num = np.zeros_like(g)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        num[i] = (spec.value(x + e) - spec.value(x - e)) / (2.0 * h)
    denom = max(float(np.linalg.norm(g)), 1e-12)
    return float(np.linalg.norm(num - g)) / denom


@dataclass
class OcoRunRecord:
    xs: np.ndarray
    losses: np.ndarray
    cum_loss: np.ndarray
    offline_x: np.ndarray
    offline_value: float
    realized_regret: float
    lookahead_losses: np.ndarray | None = None
    noise: np.ndarray | None = None
    x2: np.ndarray | None = None
    solver_tol: float = 1e-9

    def btl_terms(self, epsilon: float, gamma_curv: float, domain: BallDomain):
        """(lhs, rhs) of the fixed-noise be-the-leader inequality:
        sum_t loss_t(x_{t+1}) <= L*_T + (gamma/eps) D^2 + <b, x* - x_2> + 2 tol."""
        if self.noise is None or self.lookahead_losses is None:
            raise ValueError("audit needs a fixed-noise run with lookahead recorded")
        lhs = float(self.lookahead_losses.sum())
        rhs = (
            self.offline_value
            + (gamma_curv / epsilon) * domain.radius**2
            + float(self.noise @ (self.offline_x - self.x2))
            + 2.0 * self.solver_tol * (1.0 + abs(self.offline_value))
        )
        return lhs, rhs


def run_oco(
    domain: BallDomain,
    losses: list[ConvexLossSpec],
    noise: ObjPertNoiseSpec,
    seed: int,
    *,
    replicate: int = 0,
    fixed_noise: bool = False,
    gamma_curv: float | None = None,
    lookahead: bool = True,
    tol: float = 1e-9,
) -> OcoRunRecord:
    """Play the perturbed-objective minimizer each round.

    Noise is redrawn per round by default; fixed_noise draws it once, the
    mode the be-the-leader audit is stated for.  The lookahead column traces
    the fictitious one-step-ahead play used by the first-order regret audit.
    """
    if noise.dimension != domain.dimension:
        raise ValueError("noise dimension must match the domain")
    if noise.epsilon > 1.0:
        raise ValueError("the regret pipeline requires epsilon <= 1")
    T = len(losses)
    if T == 0:
        raise ValueError("empty loss sequence")
    if gamma_curv is None:
        gamma_curv = max(spec.curvature() for spec in losses)
    else:
        worst = max(spec.curvature() for spec in losses)
        if worst > gamma_curv * (1.0 + 1e-9):
            raise ValueError(f"losses have curvature {worst}, above the declared {gamma_curv}")
    worst_grad = max(spec.grad_bound(domain.radius) for spec in losses)
    if worst_grad > noise.beta * (1.0 + 1e-9):
        raise ValueError(f"losses have gradient norm {worst_grad}, above beta={noise.beta}")

    factory = StreamFactory(seed)
    b_fixed = sample_objpert_noise(noise, factory.stream(replicate, 0)) if fixed_noise else None
    eps = noise.epsilon
    xs = np.zeros((T, domain.dimension))
    vals = np.zeros(T)
    la_vals = np.zeros(T) if lookahead else None
    for t in range(1, T + 1):
        g = factory.stream(replicate, t)
        b = b_fixed if fixed_noise else sample_objpert_noise(noise, g)
        x = objpert_step(losses[: t - 1], b, eps, gamma_curv, domain, tol)
        xs[t - 1] = x
        vals[t - 1] = losses[t - 1].value(x)
        if lookahead:
            b_la = b_fixed if fixed_noise else sample_objpert_noise(noise, g)
            x_la = objpert_step(losses[:t], b_la, eps, gamma_curv, domain, tol)
            la_vals[t - 1] = losses[t - 1].value(x_la)
    x_star, l_star = offline_opt(domain, losses, tol)
    cum = np.cumsum(vals)
    return OcoRunRecord(
        xs=xs,
        losses=vals,
        cum_loss=cum,
        offline_x=x_star,
        offline_value=l_star,
        realized_regret=float(cum[-1] - l_star),
        lookahead_losses=la_vals,
        noise=b_fixed,
        x2=xs[1].copy() if T >= 2 else xs[0].copy(),
        solver_tol=tol,
    )


def linear_shifted_losses(
    T: int, domain: BallDomain, beta: float, seed: int, replicate: int = 0
) -> list[ConvexLossSpec]:
    """Loss-only linear losses: coefficients uniform on the nonnegative-orthant
    cap of the beta-ball, shifted so the per-round minimum over the ball is 0."""
    g = StreamFactory(seed).stream(replicate, ADVERSARY_ROUND)
    out = []
    for _ in range(T):
        direction = g.standard_normal(domain.dimension)
        direction /= max(float(np.linalg.norm(direction)), 1e-12)
        radius = g.random() ** (1.0 / domain.dimension)
        z = beta * np.abs(direction * radius)
        offset = domain.radius * float(np.linalg.norm(z))
        out.append(ConvexLossSpec("linear", z, offset=offset))
    return out
