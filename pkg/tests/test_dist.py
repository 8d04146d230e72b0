import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from mginf.dist import (CATALOG, Erlang, Exponential, HyperExponential, Light, Lomax,
                        RegularlyVarying, SubexponentialOther, WeibullHeavy, parse_dist)
from mginf.errors import DomainError, InfiniteMeanError


class _FixedUniform:
    """Stand-in rng returning a fixed uniform draw."""

    def __init__(self, u):
        self.u = u

    def random(self, size=None):
        return self.u if size is None else np.full(size, self.u)


def test_sf_examples():
    assert Exponential(1.0).sf(0.0) == 1.0
    assert Lomax(3.0, 1.0).sf(1.0) == pytest.approx(0.125, rel=1e-15)
    assert Exponential(2.0).sf(1.0) == pytest.approx(math.exp(-2.0), rel=1e-15)


def test_sf_negative_time_rejected(model):
    with pytest.raises(DomainError):
        model.sf(-0.1)
    with pytest.raises(DomainError):
        model.tail_integral(-1.0)


def test_mean_examples():
    assert Exponential(1.0).mean() == 1.0
    assert Lomax(3.0, 1.0).mean() == pytest.approx(0.5)
    assert HyperExponential((0.5, 0.5), (1.0, 2.0)).mean() == pytest.approx(0.75)
    assert Erlang(2, 3.0).mean() == pytest.approx(2 / 3)
    assert WeibullHeavy(0.5, 1.0).mean() == pytest.approx(2.0)


def test_infinite_mean_lomax():
    with pytest.raises(InfiniteMeanError):
        Lomax(1.0, 1.0).mean()
    with pytest.raises(InfiniteMeanError):
        Lomax(0.8, 2.0).tail_integral(1.0)


def test_mean_matches_quadrature_of_sf(model):
    # independent route: integrate the survival function numerically
    val, _ = integrate.quad(lambda x: float(model.sf(x)), 0, np.inf, limit=500, epsabs=1e-12)
    assert model.mean() == pytest.approx(val, rel=1e-8)


def test_tail_integral_examples():
    assert Exponential(1.0).tail_integral(0.0) == pytest.approx(1.0)
    assert Lomax(3.0, 1.0).tail_integral(1.0) == pytest.approx(0.125)
    assert Exponential(1.0).tail_integral(3.0) == pytest.approx(math.exp(-3.0), rel=1e-14)


def test_tail_integral_at_zero_is_mean(model):
    assert abs(model.tail_integral(0.0) - model.mean()) < 1e-10


@pytest.mark.parametrize("t", [0.0, 0.3, 1.0, 4.0, 12.0])
def test_tail_integral_closed_form_vs_quadrature(model, t):
    assert model.tail_integral(t) == pytest.approx(model.tail_integral_quad(t), rel=1e-8, abs=1e-10)


def test_tail_integral_derivative_is_minus_sf(model):
    h = 1e-5
    ts = np.random.default_rng(3).uniform(0.01, 10 * model.mean(), 100)
    fd = (model.tail_integral(ts + h) - model.tail_integral(ts - h)) / (2 * h)
    rel = np.abs(fd + model.sf(ts)) / model.sf(ts)
    assert np.max(rel) < 1e-3


@given(x1=st.floats(0, 200), dx=st.floats(0, 200))
@settings(max_examples=200, deadline=None)
def test_sf_nonincreasing(x1, dx):
    for m in CATALOG.values():
        assert m.sf(x1) >= m.sf(x1 + dx)
        assert 0.0 <= m.sf(x1) <= 1.0


def test_sf_at_zero(model):
    assert model.sf(0.0) == 1.0
    assert model.cdf(0.0) == 0.0


def test_inverse_cdf_examples():
    assert Exponential(1.0).sample(_FixedUniform(0.5)) == pytest.approx(math.log(2.0), rel=1e-15)
    assert Lomax(3.0, 1.0).sample(_FixedUniform(0.875)) == pytest.approx(1.0, rel=1e-14)


@given(u=st.floats(0.0, 0.999999))
@settings(max_examples=100, deadline=None)
def test_ppf_inverts_cdf(u):
    for m in CATALOG.values():
        assert m.cdf(m.ppf(u)) == pytest.approx(u, abs=1e-9)


def test_sample_mean_within_three_se(model):
    rng = np.random.default_rng(11)
    x = model.sample(rng, 100_000)
    se = x.std(ddof=1) / math.sqrt(len(x))
    assert abs(x.mean() - model.mean()) < 3 * se


def test_samples_pass_ks(model):
    rng = np.random.default_rng(12)
    x = model.sample(rng, 100_000)
    assert stats.kstest(x, model.cdf).pvalue > 0.001


def test_sampling_is_deterministic(model):
    a = model.sample(np.random.default_rng(5), 1000)
    b = model.sample(np.random.default_rng(5), 1000)
    assert np.array_equal(a, b)


def test_classify_tail():
    assert Exponential(2.0).classify_tail() == Light(2.0)
    assert HyperExponential((0.5, 0.5), (1.0, 2.0)).classify_tail() == Light(1.0)
    assert Erlang(2, 3.0).classify_tail() == Light(3.0)
    rv = Lomax(3.0, 1.0).classify_tail()
    assert isinstance(rv, RegularlyVarying) and rv.alpha == 3.0
    assert isinstance(WeibullHeavy(0.5, 1.0).classify_tail(), SubexponentialOther)


def test_lomax_slowly_varying_reconstructs_sf():
    m = Lomax(2.5, 3.0)
    x = np.array([0.1, 1.0, 10.0, 1e3])
    rv = m.classify_tail()
    np.testing.assert_allclose(x ** -rv.alpha * rv.slowly_varying(x), m.sf(x), rtol=1e-13)
    assert rv.slowly_varying(1e12) == pytest.approx(3.0 ** 2.5, rel=1e-9)


def test_light_models_have_finite_moment_below_abscissa(model):
    tail = model.classify_tail()
    if isinstance(tail, Light):
        assert math.isfinite(model.exp_moment(tail.cramer_abscissa / 2))
        assert model.exp_moment(tail.cramer_abscissa) == math.inf


@pytest.mark.parametrize("x", [1e2, 1e3, 1e4])
def test_regularly_varying_ratio(x):
    m = CATALOG["lomax"]
    alpha = m.classify_tail().alpha
    assert m.sf(2 * x) / m.sf(x) == pytest.approx(2 ** -alpha, rel=0.05)


def test_exp_moment_examples():
    assert Exponential(1.0).exp_moment(0.0) == 1.0
    assert Exponential(2.0).exp_moment(1.0) == pytest.approx(2.0)
    assert Lomax(3.0, 1.0).exp_moment(0.1) == math.inf
    assert WeibullHeavy(0.5, 1.0).exp_moment(1e-3) == math.inf


@pytest.mark.parametrize("name", sorted(CATALOG))
def test_exp_moment_negative_s_matches_quadrature(name):
    m = CATALOG[name]
    s = -0.7
    val, _ = integrate.quad(lambda x: math.exp(s * x) * float(m.pdf(x)), 0, np.inf, limit=500)
    assert m.exp_moment(s) == pytest.approx(val, rel=1e-6)


def test_log_sf_matches_sf(model):
    x = np.linspace(0, 30 * model.mean(), 50)
    np.testing.assert_allclose(np.exp(model.log_sf(x)), model.sf(x), rtol=1e-10, atol=1e-300)


def test_log_sf_far_tail_is_finite():
    for m in (Exponential(1.0), HyperExponential((0.5, 0.5), (1.0, 2.0)), Erlang(3, 2.0)):
        assert math.isfinite(m.log_sf(5000.0))


def test_invalid_parameters():
    with pytest.raises(DomainError):
        HyperExponential((0.5, 0.6), (1.0, 2.0))
    with pytest.raises(DomainError):
        Exponential(0.0)
    with pytest.raises(DomainError):
        Erlang(1.5, 1.0)
    with pytest.raises(DomainError):
        WeibullHeavy(1.5, 1.0)


@pytest.mark.parametrize("text, expected", [
    ("exp:rate=1.0", Exponential(1.0)),
    ("hyperexp:w=0.5,0.5;rates=1,2", HyperExponential((0.5, 0.5), (1.0, 2.0))),
    ("erlang:k=2,rate=3", Erlang(2, 3.0)),
    ("lomax:alpha=3,scale=1", Lomax(3.0, 1.0)),
    ("weibull:shape=0.5,scale=1", WeibullHeavy(0.5, 1.0)),
])
def test_parse_dist(text, expected):
    parsed = parse_dist(text)
    assert parsed == expected
    assert parse_dist(parsed.spec()) == parsed


@pytest.mark.parametrize("text", ["exp", "exp:rate", "exp:rate=-1", "gamma:k=2", "lomax:alpha=3",
                                  "erlang:k=2.5,rate=1", "exp:rate=1,scale=2", "hyperexp:w=0.5;rates=1,2"])
def test_parse_dist_rejects(text):
    with pytest.raises(ValueError):
        parse_dist(text)
