import math

import numpy as np
import pytest
from scipy import stats

from stableol.perturbation import (
    InvalidSpecError,
    ObjPertNoiseSpec,
    PerturbationSpec,
    sample_objpert_noise,
    sample_scalar,
    table1_preset,
)
from stableol.rng import stream

EULER_MASCHERONI = 0.5772156649015329


def spec(family, **params):
    return PerturbationSpec(family, params)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def test_gamma_unit_mean():
    g = stream(1, 0, 1)
    x = sample_scalar(spec("gamma", shape=1.0, scale=1.0), g, size=1_000_000)
    se = x.std() / math.sqrt(x.size)
    assert abs(x.mean() - 1.0) < 3 * se


def test_gumbel_mean_is_euler_mascheroni():
    g = stream(2, 0, 1)
    x = sample_scalar(spec("gumbel", mu=0.0, beta=1.0), g, size=1_000_000)
    se = x.std() / math.sqrt(x.size)
    assert abs(x.mean() - EULER_MASCHERONI) < 3 * se


def test_pareto_support_lower_bound():
    n = math.exp(2)
    s = spec("pareto", xm=1.0, alpha=math.log(n))
    x = sample_scalar(s, stream(3, 0, 1), size=10_000)
    assert np.all(x >= 1.0)


def test_invalid_parameters_raise_before_any_draw():
    with pytest.raises(InvalidSpecError):
        spec("gamma", shape=-1.0)
    with pytest.raises(InvalidSpecError):
        spec("gumbel", beta=0.0)
    with pytest.raises(InvalidSpecError):
        spec("gumbel", nonsense=1.0)
    with pytest.raises(InvalidSpecError):
        spec("laplace")


# ---------------------------------------------------------------------------
# cdf / ppf
# ---------------------------------------------------------------------------


def test_cdf_examples():
    assert spec("exponential", scale=1.0).cdf(0.0) == pytest.approx(0.0, abs=1e-15)
    assert spec("gumbel", mu=0.0, beta=1.0).cdf(0.0) == pytest.approx(math.exp(-1), rel=1e-12)
    assert spec("weibull", lam=1.0, k=1.0).cdf(1.0) == pytest.approx(1 - math.exp(-1), rel=1e-12)


@pytest.mark.parametrize(
    "s",
    [
        spec("gamma", shape=2.0, scale=0.5),
        spec("gumbel", mu=-1.0, beta=2.0),
        spec("frechet", alpha=2.5, scale=1.3),
        spec("weibull", lam=0.7, k=1.4),
        spec("pareto", xm=0.5, alpha=3.0),
        spec("gaussian", mu=0.3, sigma=1.1),
        spec("exponential", scale=2.0),
    ],
    ids=lambda s: s.family,
)
def test_cdf_monotone_with_limits_and_ppf_roundtrip(s):
    lo, hi = s.ppf(1e-9), s.ppf(1 - 1e-9)
    xs = np.linspace(lo, hi, 200)
    cs = s.cdf(xs)
    assert np.all(np.diff(cs) >= -1e-12)
    assert s.cdf(lo - 10 * (hi - lo)) < 1e-6
    assert s.cdf(hi + 10 * (hi - lo)) > 1 - 1e-6
    qs = np.linspace(0.001, 0.999, 99)
    assert np.allclose(s.cdf(s.ppf(qs)), qs, atol=1e-9)


@pytest.mark.parametrize(
    "s",
    [
        spec("gamma", shape=1.0, scale=1.0),
        spec("gamma", shape=2.5, scale=0.8),
        spec("gumbel"),
        spec("frechet", alpha=2.08),
        spec("weibull"),
        spec("pareto", xm=1.0, alpha=2.3),
        spec("gaussian"),
        spec("exponential"),
    ],
    ids=lambda s: f"{s.family}-{id(s) % 97}",
)
def test_kolmogorov_smirnov_and_pit(s):
    x = sample_scalar(s, stream(11, 0, 1), size=100_000)
    ks = stats.kstest(x, s.cdf).statistic
    assert ks < 0.01
    # probability integral transform: cdf(samples) uniform on [0, 1]
    u = s.cdf(x)
    ks_u = stats.kstest(u, "uniform").statistic
    assert ks_u < 0.01


def test_scalar_funcs_match_vectorized():
    for s in [
        spec("gamma", shape=1.7, scale=0.9),
        spec("gumbel", mu=0.2, beta=1.1),
        spec("frechet", alpha=2.1, scale=1.2),
        spec("weibull", lam=1.1, k=0.9),
        spec("pareto", xm=1.0, alpha=2.3),
        spec("gaussian", mu=0.0, sigma=2.0),
        spec("exponential", scale=0.5),
    ]:
        pdf, cdf = s.scalar_funcs()
        xs = np.linspace(s.ppf(1e-6), s.ppf(1 - 1e-6), 57)
        assert np.allclose([pdf(x) for x in xs], s.pdf(xs), rtol=1e-10, atol=1e-300)
        assert np.allclose([cdf(x) for x in xs], s.cdf(xs), rtol=1e-10, atol=1e-14)


def test_pdf_integrates_to_cdf_increment():
    from scipy import integrate

    for s in [spec("frechet", alpha=2.1), spec("pareto", xm=1.0, alpha=2.3), spec("gamma")]:
        a, b = float(s.ppf(0.1)), float(s.ppf(0.7))
        val, _ = integrate.quad(lambda x: float(s.pdf(x)), a, b)
        assert val == pytest.approx(float(s.cdf(b) - s.cdf(a)), abs=1e-9)


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------


def test_table_presets():
    g = table1_preset("gamma", 10)
    assert g.params == {"shape": 1.0, "scale": 1.0}
    f = table1_preset("frechet", 8)
    assert f.params["alpha"] == pytest.approx(math.log(8))
    p = table1_preset("pareto", 10)
    assert p.params["xm"] == 1.0 and p.params["alpha"] == pytest.approx(math.log(10))
    w = table1_preset("weibull", 5)
    assert w.params["lam"] == 1.0 and w.params["k"] == 1.0
    u = table1_preset("gumbel", 5)
    assert u.params == {"mu": 0.0, "beta": 1.0}


def test_preset_epsilon_scale_divides_scale():
    assert table1_preset("gamma", 10, 2.0).params["scale"] == 0.5
    assert table1_preset("gumbel", 10, 0.5).params["beta"] == 2.0
    assert table1_preset("pareto", 10, 2.0).params["xm"] == 0.5


def test_preset_is_pure():
    a = table1_preset("frechet", 8, 1.0)
    b = table1_preset("frechet", 8, 1.0)
    assert a == b


def test_frechet_preset_needs_heavy_enough_tail():
    with pytest.raises(InvalidSpecError):
        table1_preset("frechet", 2)


def test_unknown_preset_family():
    with pytest.raises(InvalidSpecError):
        table1_preset("gaussian", 10)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def test_text_round_trip():
    s = spec("gumbel", mu=0.0, beta=1.0)
    assert s.to_text() == "family=gumbel beta=1 mu=0"
    assert PerturbationSpec.from_text(s.to_text()) == s
    assert PerturbationSpec.from_text("family=gumbel mu=0 beta=1") == s


def test_from_text_rejects_garbage():
    with pytest.raises(InvalidSpecError):
        PerturbationSpec.from_text("gumbel mu=0")
    with pytest.raises(InvalidSpecError):
        PerturbationSpec.from_text("family=gumbel mu")


# ---------------------------------------------------------------------------
# objective-perturbation noise
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("d", [1, 2, 5, 10])
def test_gamma_noise_norm_mean(d):
    eps, beta = 1.0, 1.0
    s = ObjPertNoiseSpec("gamma", d, eps, beta)
    g = stream(21, 0, d)
    norms = np.array([np.linalg.norm(sample_objpert_noise(s, g)) for _ in range(100_000)])
    se = norms.std() / math.sqrt(norms.size)
    assert abs(norms.mean() - 2 * d * beta / eps) < 3 * se


def test_gaussian_noise_coordinate_variance():
    s = ObjPertNoiseSpec("gaussian", 2, 1.0, 1.0, delta=0.5)
    target = math.log(4.0) + 4.0
    g = stream(22, 0, 1)
    draws = np.array([sample_objpert_noise(s, g) for _ in range(100_000)])
    var = draws.var(axis=0, ddof=1)
    se = target * math.sqrt(2.0 / (draws.shape[0] - 1))
    assert np.all(np.abs(var - target) < 3 * se)


@pytest.mark.parametrize("kind,delta", [("gamma", None), ("gaussian", 0.25)])
def test_noise_symmetric_in_one_dimension(kind, delta):
    s = ObjPertNoiseSpec(kind, 1, 1.0, 1.0, delta=delta)
    g = stream(23, 0, 1)
    draws = np.array([sample_objpert_noise(s, g)[0] for _ in range(100_000)])
    positives = int((draws > 0).sum())
    n = int((draws != 0).sum())
    assert stats.binomtest(positives, n, 0.5).pvalue > 0.001


def test_gaussian_kind_requires_delta():
    with pytest.raises(InvalidSpecError):
        ObjPertNoiseSpec("gaussian", 3, 1.0, 1.0)
    with pytest.raises(InvalidSpecError):
        ObjPertNoiseSpec("gaussian", 3, 1.0, 1.0, delta=1.5)
