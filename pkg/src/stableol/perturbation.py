"""Perturbation families: samplers, densities, CDFs, and parameter presets.

Covers the scalar noise families used for perturbed-leader smoothing (Gamma,
Gumbel, Frechet, Weibull, Pareto, plus Gaussian and Exponential) and the
vector noise used by the objective-perturbation step (spherical Gamma and
isotropic Gaussian).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

FAMILIES = ("gamma", "gumbel", "frechet", "weibull", "pareto", "gaussian", "exponential")

# canonical parameter names and defaults per family
_PARAMS = {
    "gamma": {"shape": 1.0, "scale": 1.0},
    "gumbel": {"mu": 0.0, "beta": 1.0},
    "frechet": {"alpha": 2.0, "scale": 1.0},
    "weibull": {"lam": 1.0, "k": 1.0, "shift": 0.0},
    "pareto": {"xm": 1.0, "alpha": 2.0, "shift": 0.0},
    "gaussian": {"mu": 0.0, "sigma": 1.0},
    "exponential": {"scale": 1.0},
}

_POSITIVE = {"shape", "scale", "beta", "alpha", "lam", "k", "xm", "sigma"}


class InvalidSpecError(ValueError):
    pass


@dataclass
class PerturbationSpec:
    """A scalar noise distribution: family name plus family-specific parameters.

    Unknown parameters are rejected; omitted ones take the family defaults.
    ``shift`` (Weibull, Pareto) translates the support and is the documented
    candidate for the starred-family modification; it defaults to 0 so the
    stock presets are exactly the unmodified families.
    """

    family: str
    params: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        fam = self.family.lower()
        if fam not in _PARAMS:
            raise InvalidSpecError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        self.family = fam
        merged = dict(_PARAMS[fam])
        for name, value in self.params.items():
            if name not in merged:
                raise InvalidSpecError(f"{fam} has no parameter {name!r}")
            merged[name] = float(value)
        for name, value in merged.items():
            if name in _POSITIVE and not value > 0:
                raise InvalidSpecError(f"{fam} parameter {name} must be > 0, got {value}")
            if not math.isfinite(value):
                raise InvalidSpecError(f"{fam} parameter {name} must be finite")
        self.params = merged

    def __getitem__(self, name: str) -> float:
        return self.params[name]

    # -- closed forms ------------------------------------------------------

    def cdf(self, x):
        """Exact CDF, vectorized over x."""
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.family == "gamma":
            return special.gammainc(p["shape"], np.maximum(x, 0.0) / p["scale"])
        if self.family == "gumbel":
            return np.exp(-np.exp(-(x - p["mu"]) / p["beta"]))
        if self.family == "frechet":
            z = np.maximum(x, 0.0) / p["scale"]
            out = np.zeros_like(z)
            pos = z > 0
            out[pos] = np.exp(-z[pos] ** (-p["alpha"]))
            return out
        if self.family == "weibull":
            z = np.maximum(x - p["shift"], 0.0) / p["lam"]
            return -np.expm1(-(z ** p["k"]))
        if self.family == "pareto":
            z = (x - p["shift"]) / p["xm"]
            return np.where(z >= 1.0, 1.0 - np.maximum(z, 1.0) ** (-p["alpha"]), 0.0)
        if self.family == "gaussian":
            return special.ndtr((x - p["mu"]) / p["sigma"])
        # exponential
        return -np.expm1(-np.maximum(x, 0.0) / p["scale"])

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.family == "gamma":
            k, th = p["shape"], p["scale"]
            z = np.maximum(x, 0.0) / th
            with np.errstate(divide="ignore", invalid="ignore"):
                logpdf = (k - 1) * np.log(z) - z - special.gammaln(k) - math.log(th)
            return np.where(x > 0, np.exp(logpdf), np.where((x == 0) & (k == 1), 1.0 / th, 0.0))
        if self.family == "gumbel":
            z = (x - p["mu"]) / p["beta"]
            return np.exp(-z - np.exp(-z)) / p["beta"]
        if self.family == "frechet":
            a, s = p["alpha"], p["scale"]
            z = x / s
            out = np.zeros_like(z)
            pos = z > 0
            out[pos] = (a / s) * z[pos] ** (-1 - a) * np.exp(-z[pos] ** (-a))
            return out
        if self.family == "weibull":
            lam, k = p["lam"], p["k"]
            z = (x - p["shift"]) / lam
            out = np.zeros_like(z)
            pos = z > 0
            out[pos] = (k / lam) * z[pos] ** (k - 1) * np.exp(-(z[pos] ** k))
            if k == 1:
                out = np.where(z == 0, 1.0 / lam, out)
            return out
        if self.family == "pareto":
            a, xm = p["alpha"], p["xm"]
            z = (x - p["shift"]) / xm
            return np.where(z >= 1.0, (a / xm) * np.maximum(z, 1.0) ** (-a - 1), 0.0)
        if self.family == "gaussian":
            z = (x - p["mu"]) / p["sigma"]
            return np.exp(-0.5 * z * z) / (p["sigma"] * math.sqrt(2 * math.pi))
        return np.where(x >= 0, np.exp(-np.maximum(x, 0.0) / p["scale"]) / p["scale"], 0.0)

    def ppf(self, q):
        """Quantile function (inverse CDF), vectorized over q in [0, 1)."""
        q = np.asarray(q, dtype=float)
        p = self.params
        if self.family == "gamma":
            return special.gammaincinv(p["shape"], q) * p["scale"]
        if self.family == "gumbel":
            return p["mu"] - p["beta"] * np.log(-np.log(q))
        if self.family == "frechet":
            return p["scale"] * (-np.log(q)) ** (-1.0 / p["alpha"])
        if self.family == "weibull":
            return p["shift"] + p["lam"] * (-np.log1p(-q)) ** (1.0 / p["k"])
        if self.family == "pareto":
            return p["shift"] + p["xm"] * (1.0 - q) ** (-1.0 / p["alpha"])
        if self.family == "gaussian":
            return p["mu"] + p["sigma"] * special.ndtri(q)
        return -p["scale"] * np.log1p(-q)

    def support_min(self) -> float:
        p = self.params
        if self.family in ("gamma", "exponential"):
            return 0.0
        if self.family == "frechet":
            return 0.0
        if self.family == "weibull":
            return p["shift"]
        if self.family == "pareto":
            return p["shift"] + p["xm"]
        return -math.inf

    def scalar_funcs(self):
        """(pdf, cdf) closures on python floats, for tight quadrature loops."""
        p = self.params
        if self.family == "gumbel":
            mu, beta = p["mu"], p["beta"]

            def pdf(x):
                z = (x - mu) / beta
                return math.exp(-z - math.exp(-z)) / beta if z > -30 else 0.0

            def cdf(x):
                return math.exp(-math.exp(-min((x - mu) / beta, 700.0)))

        elif self.family == "gamma":
            k, th = p["shape"], p["scale"]
            lg = special.gammaln(k)

            def pdf(x):
                if x <= 0:
                    return 1.0 / th if (x == 0 and k == 1) else 0.0
                z = x / th
                return math.exp((k - 1) * math.log(z) - z - lg) / th

            def cdf(x, _inc=special.gammainc):
                return float(_inc(k, x / th)) if x > 0 else 0.0

        elif self.family == "frechet":
            a, s = p["alpha"], p["scale"]

            def pdf(x):
                if x <= 0:
                    return 0.0
                z = x / s
                return (a / s) * z ** (-1 - a) * math.exp(-(z ** (-a)))

            def cdf(x):
                if x <= 0:
                    return 0.0
                u = (x / s) ** (-a)
                return math.exp(-u) if u < 700 else 0.0

        elif self.family == "weibull":
            lam, k, sh = p["lam"], p["k"], p["shift"]

            def pdf(x):
                z = (x - sh) / lam
                if z <= 0:
                    return 1.0 / lam if (z == 0 and k == 1) else 0.0
                return (k / lam) * z ** (k - 1) * math.exp(-(z**k))

            def cdf(x):
                z = (x - sh) / lam
                return -math.expm1(-(z**k)) if z > 0 else 0.0

        elif self.family == "pareto":
            a, xm, sh = p["alpha"], p["xm"], p["shift"]

            def pdf(x):
                z = (x - sh) / xm
                return (a / xm) * z ** (-a - 1) if z >= 1 else 0.0

            def cdf(x):
                z = (x - sh) / xm
                return 1.0 - z ** (-a) if z >= 1 else 0.0

        elif self.family == "gaussian":
            mu, sg = p["mu"], p["sigma"]
            c = 1.0 / (sg * math.sqrt(2 * math.pi))

            def pdf(x):
                z = (x - mu) / sg
                return c * math.exp(-0.5 * z * z) if abs(z) < 38 else 0.0

            def cdf(x, _ndtr=special.ndtr):
                return float(_ndtr((x - mu) / sg))

        else:  # exponential
            th = p["scale"]

            def pdf(x):
                return math.exp(-x / th) / th if x >= 0 else 0.0

            def cdf(x):
                return -math.expm1(-x / th) if x > 0 else 0.0

        return pdf, cdf

    # -- serialization -----------------------------------------------------

    def to_text(self) -> str:
        parts = [f"family={self.family}"]
        parts += [f"{k}={v:g}" for k, v in sorted(self.params.items())]
        return " ".join(parts)

    @classmethod
    def from_text(cls, text: str) -> "PerturbationSpec":
        fields = {}
        for tok in text.split():
            if "=" not in tok:
                raise InvalidSpecError(f"bad token {tok!r}; expected key=value")
            key, val = tok.split("=", 1)
            fields[key] = val
        if "family" not in fields:
            raise InvalidSpecError("missing family=<name>")
        family = fields.pop("family")
        return cls(family, {k: float(v) for k, v in fields.items()})


def sample_scalar(spec: PerturbationSpec, rng: np.random.Generator, size=None):
    """Draw from the family.

    Inverse-CDF sampling for Gumbel/Frechet/Weibull/Pareto/Exponential,
    standard Gamma and Gaussian sampling for those two families.
    """
    p = spec.params
    if spec.family == "gamma":
        return rng.gamma(p["shape"], p["scale"], size=size)
    if spec.family == "gaussian":
        return rng.normal(p["mu"], p["sigma"], size=size)
    return spec.ppf(rng.random(size))


def cdf(spec: PerturbationSpec, x):
    return spec.cdf(x)


def table1_preset(family: str, n_arms: int, epsilon_scale: float = 1.0) -> PerturbationSpec:
    """Stock parameter choices for the five perturbed-leader noise families.

    Base parameters: Gamma(1,1), Gumbel(0,1), Frechet(alpha=log N),
    Weibull(1,1), Pareto(x_m=1, alpha=log N).  ``epsilon_scale`` divides the
    scale parameter, trading a stability level proportional to epsilon_scale
    against noise magnitude proportional to 1/epsilon_scale.
    """
    fam = family.lower()
    if n_arms < 2:
        raise InvalidSpecError("presets need at least 2 arms")
    if not epsilon_scale > 0:
        raise InvalidSpecError("epsilon_scale must be > 0")
    s = 1.0 / epsilon_scale
    ln_n = math.log(n_arms)
    if fam == "gamma":
        return PerturbationSpec("gamma", {"shape": 1.0, "scale": s})
    if fam == "gumbel":
        return PerturbationSpec("gumbel", {"mu": 0.0, "beta": s})
    if fam == "frechet":
        if ln_n <= 1.0:
            raise InvalidSpecError("frechet preset needs log(n_arms) > 1, i.e. n_arms >= 3")
        return PerturbationSpec("frechet", {"alpha": ln_n, "scale": s})
    if fam == "weibull":
        return PerturbationSpec("weibull", {"lam": s, "k": 1.0})
    if fam == "pareto":
        return PerturbationSpec("pareto", {"xm": s, "alpha": ln_n})
    raise InvalidSpecError(f"{family!r} is not one of the preset families")


PRESET_FAMILIES = ("gamma", "gumbel", "frechet", "weibull", "pareto")


@dataclass
class ObjPertNoiseSpec:
    """Vector noise for the objective-perturbation step.

    Gamma kind: direction uniform on the sphere, norm ~ Gamma(d, 2*beta/eps),
    i.e. density proportional to exp(-eps*||b||_2/(2*beta)).
    Gaussian kind: iid coordinates with variance (beta^2*log(2/delta)+4*eps)/eps^2.
    """

    kind: str
    dimension: int
    epsilon: float
    beta: float
    delta: float | None = None

    def __post_init__(self):
        self.kind = self.kind.lower()
        if self.kind not in ("gamma", "gaussian"):
            raise InvalidSpecError(f"kind must be gamma or gaussian, got {self.kind!r}")
        if self.dimension < 1:
            raise InvalidSpecError("dimension must be >= 1")
        if not self.epsilon > 0:
            raise InvalidSpecError("epsilon must be > 0")
        if not self.beta > 0:
            raise InvalidSpecError("beta must be > 0")
        if self.kind == "gaussian":
            if self.delta is None or not (0 < self.delta < 1):
                raise InvalidSpecError("gaussian kind needs delta in (0, 1)")

    def sigma(self) -> float:
        if self.kind != "gaussian":
            raise InvalidSpecError("sigma is defined for the gaussian kind only")
        var = (self.beta**2 * math.log(2.0 / self.delta) + 4.0 * self.epsilon) / self.epsilon**2
        return math.sqrt(var)


def sample_objpert_noise(spec: ObjPertNoiseSpec, rng: np.random.Generator) -> np.ndarray:
    d = spec.dimension
    if spec.kind == "gamma":
        direction = rng.standard_normal(d)
        norm = np.linalg.norm(direction)
        while norm == 0.0:  # probability-zero guard
            direction = rng.standard_normal(d)
            norm = np.linalg.norm(direction)
        radius = rng.gamma(d, 2.0 * spec.beta / spec.epsilon)
        return direction * (radius / norm)
    return rng.normal(0.0, spec.sigma(), size=d)
