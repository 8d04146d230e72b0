import math

import numpy as np
import pytest
from scipy import integrate, optimize

from mginf.busy import regen_tail, stadje_tail
from mginf.dist import CATALOG, Exponential, HyperExponential, Lomax, WeibullHeavy
from mginf.errors import DomainError, RegimeError
from mginf.rates import (compound_geometric_transform, condition5_check, heavy_bound, karamata_tail,
                         rate_report, solve_decay_root, u_small_o_check, v_density, v_star)
from mginf.transient import QueueParams, phi_exact

Q1 = 1 - math.exp(-1)


def v_star_series(s, terms=60):
    """v*(s) for lam = 1, Exp(1) service: e^-1 / q * sum 1 / (n! (n + 1 - s))."""
    return math.exp(-1) / Q1 * sum(1 / (math.factorial(n) * (n + 1 - s)) for n in range(terms))


@pytest.fixture(scope="module")
def lomax_regen():
    p = QueueParams(1.0, Lomax(3.0, 1.0))
    return p, regen_tail(p, stadje_tail(p))


@pytest.fixture(scope="module")
def exp_regen():
    p = QueueParams(1.0, Exponential(1.0))
    return p, regen_tail(p, stadje_tail(p))


def test_v_density_normalised(model):
    p = QueueParams(1.0, model)
    mass, _ = integrate.quad(lambda t: float(v_density(p, t)), 0, np.inf, limit=500, epsabs=1e-13)
    assert abs(mass - 1.0) < 1e-8


def test_v_density_at_zero(mm_inf):
    assert v_density(mm_inf, 0.0) == pytest.approx(1 / Q1, rel=1e-14)


def test_v_density_regularly_varying(lomax3):
    p = lomax3
    q = -math.expm1(-p.rho)
    limit = p.lam * math.exp(-p.rho) / q  # slowly varying part tends to scale**alpha = 1
    for t in (1e3, 1e4, 1e5):
        assert v_density(p, t) * t ** 3 == pytest.approx(limit, rel=5 / t)


def test_v_star_matches_series(mm_inf):
    assert v_star(mm_inf, 0.0) == 1.0
    for s in (-0.5, 0.1, 0.25, 0.5, 0.9, 0.99):
        assert v_star(mm_inf, s) == pytest.approx(v_star_series(s), rel=1e-9)


def test_v_star_monotone_and_divergent(mm_inf):
    assert 1.0 < v_star(mm_inf, 0.25) < v_star(mm_inf, 0.5) < math.inf
    assert v_star(mm_inf, 1.0) == math.inf
    assert v_star(mm_inf, 3.0) == math.inf


@pytest.mark.parametrize("name", ["exp", "hyperexp", "erlang"])
def test_v_star_strictly_increasing(name):
    p = QueueParams(1.0, CATALOG[name])
    s_max = p.service.classify_tail().cramer_abscissa
    s = np.linspace(0, 0.98 * s_max, 20)
    vals = [v_star(p, x) for x in s]
    assert np.all(np.diff(vals) > 0)


def test_v_star_rejects_heavy(lomax3):
    with pytest.raises(RegimeError):
        v_star(lomax3, 0.1)


def test_decay_root_exp(mm_inf):
    root = solve_decay_root(mm_inf)
    assert 0 < root.value < 1 and not root.at_boundary
    assert abs(Q1 * v_star(mm_inf, root.value) - 1) < 1e-8
    oracle = optimize.brentq(lambda s: v_star_series(s) - 1 / Q1, 1e-6, 0.999, xtol=1e-14)
    assert root.value == pytest.approx(oracle, rel=1e-8)


@pytest.mark.parametrize("name", ["exp", "hyperexp", "erlang"])
@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_decay_root_residual(name, lam):
    p = QueueParams(lam, CATALOG[name])
    root = solve_decay_root(p)
    assert abs(root.residual) < 1e-6


def test_decay_root_grows_as_load_vanishes():
    slow = solve_decay_root(QueueParams(0.01, Exponential(1.0))).value
    fast = solve_decay_root(QueueParams(1.0, Exponential(1.0))).value
    assert slow > fast


def test_compound_transform_diverges_at_root(mm_inf):
    s1 = solve_decay_root(mm_inf).value
    assert math.isfinite(compound_geometric_transform(mm_inf, 0.9 * s1))
    assert compound_geometric_transform(mm_inf, 0.0) == pytest.approx(1.0)
    near = [compound_geometric_transform(mm_inf, s1 * (1 - d)) for d in (1e-2, 1e-4, 1e-6)]
    assert near[0] < near[1] < near[2] and near[2] > 1e4
    assert compound_geometric_transform(mm_inf, s1 * 1.01) == math.inf


def test_karamata_examples():
    assert karamata_tail(3.0, 0.0, 2.0) == pytest.approx(0.125, rel=1e-15)
    assert karamata_tail(3.0, 1.0, 10.0) == pytest.approx(0.1, rel=1e-15)
    with pytest.raises(DomainError):
        karamata_tail(2.0, 1.0, 1.0)


@pytest.mark.parametrize("alpha, p", [(3, 0), (3, 1), (4, 2), (2.5, 0.7)])
@pytest.mark.parametrize("t", [1.0, 10.0, 100.0])
def test_karamata_exact_for_power_laws(alpha, p, t):
    val, _ = integrate.quad(lambda y: y ** (p - alpha), t, np.inf, epsabs=0, epsrel=1e-12)
    assert karamata_tail(alpha, p, t) == pytest.approx(val, rel=1e-6)


def test_karamata_asymptotic_with_slowly_varying():
    m = Lomax(3.0, 2.0)
    sv = m.classify_tail().slowly_varying
    for t in (1e2, 1e3, 1e4):
        exact = m.tail_integral(t)
        assert karamata_tail(3.0, 0.0, t, sv) == pytest.approx(exact, rel=10 / t)


def test_heavy_bound_example(lomax_regen):
    p, regen = lomax_regen
    assert regen.mu == pytest.approx(math.exp(0.5))
    b = heavy_bound(p, regen, 50.0, 0.1)
    expected = math.exp(0.5) * 1.1 * (1 + 1 / 50) ** -3 / (math.exp(0.5) * 2 * 50 ** 2)
    assert b == pytest.approx(expected, rel=1e-14)
    assert b >= phi_exact(p, 50.0)


def test_heavy_bound_scaling(lomax_regen):
    p, regen = lomax_regen
    ratio = heavy_bound(p, regen, 200.0) / heavy_bound(p, regen, 100.0)
    assert ratio == pytest.approx(0.25, rel=0.1)


def test_heavy_bound_linear_in_eps(lomax_regen):
    p, regen = lomax_regen
    assert heavy_bound(p, regen, 30.0, 0.1) == pytest.approx(1.1 * heavy_bound(p, regen, 30.0, 0.0), rel=1e-15)


def test_heavy_bound_variants(lomax_regen):
    p, regen = lomax_regen
    a = heavy_bound(p, regen, 30.0, denominator="alpha-1")
    b = heavy_bound(p, regen, 30.0, denominator="alpha+1")
    assert a / b == pytest.approx(4 / 2)


def test_heavy_bound_regimes(exp_regen):
    p, regen = exp_regen
    with pytest.raises(RegimeError):
        heavy_bound(p, regen, 10.0)
    p2 = QueueParams(1.0, Lomax(1.8, 1.0))
    with pytest.raises(RegimeError):
        heavy_bound(p2, regen, 10.0)


@pytest.mark.parametrize("alpha", [2.5, 3.0, 4.0])
@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_heavy_bound_dominates(alpha, lam):
    p = QueueParams(lam, Lomax(alpha, 1.0))
    regen = regen_tail(p, stadje_tail(p, tol=1e-6))
    t = np.linspace(20 * p.b, 400 * p.b, 300)
    assert np.all(heavy_bound(p, regen, t) >= phi_exact(p, t))


def test_condition5_lomax(lomax_regen):
    _, regen = lomax_regen
    c5 = condition5_check(regen)
    assert math.isfinite(c5.sup)
    assert c5.ratio_at_largest == pytest.approx(4.0, rel=0.1)
    assert c5.times[-1] * 2 <= regen.t_max


@pytest.mark.parametrize("alpha", [2.5, 3.0, 4.0])
def test_condition5_limit(alpha):
    p = QueueParams(1.0, Lomax(alpha, 1.0))
    c5 = condition5_check(regen_tail(p, stadje_tail(p, tol=1e-8)))
    assert c5.ratio_at_largest == pytest.approx(2 ** (alpha - 1), rel=0.1)


def test_condition5_light_grows(exp_regen):
    _, regen = exp_regen
    c5 = condition5_check(regen)
    assert c5.ratios[-1] > 100 * c5.ratios[len(c5.ratios) // 4]


def test_condition5_floor_guard(exp_regen):
    _, regen = exp_regen
    c5 = condition5_check(regen, floor=1e-3)
    assert np.all(np.interp(2 * c5.times, regen.v_of_t.times, regen.v_of_t.values) > 1e-3)
    assert c5.times[-1] < regen.t_max / 2


def test_u_small_o(lomax_regen):
    p, regen = lomax_regen
    passed, times, ratio = u_small_o_check(regen, p.b)
    assert passed
    assert regen.u_of_t[0] == 0.0
    sel = (times >= 10 * p.b) & (times <= regen.t_max / 2)
    r = ratio[sel]
    # decreasing, allowing 5% wiggle against the running minimum
    assert np.all(r <= 1.05 * np.minimum.accumulate(r))


def test_rate_report_light(mm_inf):
    rep = rate_report(mm_inf, np.linspace(0, 20, 81))
    assert rep.regime == "Light"
    assert rep.decay_rate == pytest.approx(solve_decay_root(mm_inf).value)
    assert rep.bound_holds()
    assert np.all(rep.bound_eq1_curve >= rep.exact_curve)


def test_rate_report_heavy(lomax3):
    rep = rate_report(lomax3, np.linspace(0, 100, 101))
    assert rep.regime == "HeavyRV"
    assert rep.decay_rate == 2.0
    assert rep.t_asymptotic == pytest.approx(10.0)
    assert rep.bound_holds()
    np.testing.assert_allclose(rep.extras["bound_alpha_plus_1"][1:], rep.bound_curve[1:] / 2)


def test_rate_report_rejects_other_regimes():
    with pytest.raises(RegimeError):
        rate_report(QueueParams(1.0, WeibullHeavy(0.5, 1.0)), [1.0])
    with pytest.raises(RegimeError):
        rate_report(QueueParams(1.0, Lomax(1.5, 1.0)), [1.0])


@pytest.mark.parametrize("service", [Exponential(1.0), HyperExponential((0.5, 0.5), (1.0, 2.0))])
def test_light_phi_decays_exponentially(service):
    p = QueueParams(1.0, service)
    t = np.linspace(5 * p.b, 15 * p.b, 40)
    slope = np.polyfit(t, np.log(phi_exact(p, t)), 1)[0]
    assert slope < 0


def test_heavy_phi_power_law(lomax3):
    p = lomax3
    t = np.geomspace(20 * p.b, 200 * p.b, 40)
    slope = np.polyfit(np.log(t), np.log(phi_exact(p, t)), 1)[0]
    assert slope == pytest.approx(-2.0, abs=0.15)
