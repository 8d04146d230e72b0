"""Convergence-rate machinery for light and regularly varying service laws.

Light tails: the normalised busy-period kernel ``v = c / q`` has a finite
exponential moment ``v*(s)`` below the Cramer abscissa, and the root of
``v*(s) = 1/q`` is the decay rate of the geometric compound that drives the
busy-period tail.

Regularly varying tails (alpha > 2): the distance to stationarity decays like
``t**-(alpha - 1)``; the heavy bound and the V(t)/V(2t) condition live here,
together with :func:`rate_report`, which puts every curve on one time grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy import integrate

from .busy import (BusyTable, RegenTable, c_density, default_grid, regen_tail,
                   stadje_tail)
from .dist import Light, RegularlyVarying
from .errors import DomainError, RegimeError
from .transient import QueueParams, phi_bound_eq1, phi_exact

T_ASYMPTOTIC_MEANS = 20.0
DEFAULT_EPS = 0.1


def _q(params):
    return -math.expm1(-params.rho)


def v_density(params: QueueParams, t):
    """Probability density ``c(t) / (1 - exp(-lam b))``."""
    return c_density(params, t) / _q(params)


def _light_abscissa(params):
    tail = params.service.classify_tail()
    if not isinstance(tail, Light):
        raise RegimeError(f"{params.service.spec()} is not light-tailed ({tail.name})")
    return tail.cramer_abscissa


def v_star(params: QueueParams, s: float) -> float:
    """``int_0^inf exp(s x) v(x) dx``; ``inf`` at or beyond the abscissa."""
    s_max = _light_abscissa(params)
    if s >= s_max:
        return math.inf
    if s == 0.0:
        return 1.0
    svc = params.service
    log_margin = math.log(1e-14 * (s_max - s))
    x_end = max(svc.mean(), 1.0)
    while s * x_end + svc.log_sf(x_end) >= log_margin:
        x_end *= 2.0
    q = _q(params)
    log_lam = math.log(params.lam)

    def integrand(x):
        return math.exp(s * x + log_lam + svc.log_sf(x) - params.rho + params.lam * svc.tail_integral(x))

    # split at a few scales so quad sees the bulk before the long tail
    edges = [0.0] + [e for e in (svc.mean(), 5 * svc.mean(), 25 * svc.mean()) if e < x_end] + [x_end]
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(integrand, lo, hi, epsabs=1e-14, epsrel=1e-12, limit=500)
        total += val
    return total / q


def compound_geometric_transform(params: QueueParams, s: float) -> float:
    """``p v*(s) / (1 - q v*(s))``: exponential moment of the geometric compound."""
    q = _q(params)
    vs = v_star(params, s)
    if not math.isfinite(vs) or q * vs >= 1.0:
        return math.inf
    return (1.0 - q) * vs / (1.0 - q * vs)


class DecayRoot(NamedTuple):
    value: float
    residual: float
    at_boundary: bool


def solve_decay_root(params: QueueParams, max_iter: int = 200) -> DecayRoot:
    """Bisection for ``v*(s) = 1/q`` on ``[1e-9, 0.999 s_max]``.

    ``residual`` is ``q v*(s1) - 1``. When ``v*`` stays below ``1/q`` on the
    whole bracket the abscissa is returned with ``at_boundary=True``.
    """
    s_max = _light_abscissa(params)
    q = _q(params)
    target = 1.0 / q
    lo, hi = 1e-9, 0.999 * s_max
    f_hi = v_star(params, hi) - target
    if f_hi < 0:
        return DecayRoot(s_max, q * v_star(params, hi) - 1.0, True)
    mid = 0.5 * (lo + hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = v_star(params, mid) - target
        if abs(f_mid) < 1e-10 or hi - lo < 4 * np.finfo(float).eps * mid:
            break
        if f_mid < 0:
            lo = mid
        else:
            hi = mid
    return DecayRoot(mid, q * v_star(params, mid) - 1.0, False)


def karamata_tail(alpha: float, p: float, t, slowly_varying=None):
    """First-order Karamata value of ``int_t^inf y**p Z(y) dy``.

    ``Z(y) = y**-alpha * L(y)``; the result ``t**(p+1) Z(t) / (alpha - p - 1)``
    is exact when ``L`` is constant. ``slowly_varying=None`` means ``L = 1``.
    """
    if alpha - p <= 1:
        raise DomainError(f"int y^{p} y^-{alpha} dy diverges (need alpha - p > 1)")
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("t must be positive")
    lval = 1.0 if slowly_varying is None else slowly_varying(t)
    out = t ** (p + 1.0 - alpha) * lval / (alpha - p - 1.0)
    return float(out) if np.ndim(out) == 0 else out


def _rv_alpha(params):
    tail = params.service.classify_tail()
    if not isinstance(tail, RegularlyVarying):
        raise RegimeError(f"{params.service.spec()} is not regularly varying ({tail.name})")
    if tail.alpha <= 2:
        raise RegimeError(f"heavy-rate bounds require alpha > 2, got alpha={tail.alpha}")
    return tail


def heavy_bound(params: QueueParams, regen: RegenTable, t, eps=DEFAULT_EPS, denominator="alpha-1"):
    """``exp(lam b) (1 + eps) L(t) / (mu * D * t**(alpha - 1))``.

    ``D`` is ``alpha - 1`` (Karamata's constant, the default) or
    ``alpha + 1`` when ``denominator="alpha+1"``. Meaningful for
    ``t >= 20 b``; returns ``inf`` at ``t = 0``.
    """
    tail = _rv_alpha(params)
    alpha = tail.alpha
    if denominator == "alpha-1":
        d = alpha - 1.0
    elif denominator == "alpha+1":
        d = alpha + 1.0
    else:
        raise ValueError(f"unknown denominator {denominator!r}")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("t must be nonnegative")
    safe = np.where(t > 0, t, 1.0)
    val = math.exp(params.rho) * (1.0 + eps) * tail.slowly_varying(safe) / (regen.mu * d * safe ** (alpha - 1.0))
    val = np.where(t > 0, val, math.inf)
    return float(val) if np.ndim(val) == 0 else val


def light_bound(params: QueueParams, regen: RegenTable, t, eps=DEFAULT_EPS):
    """Regenerative form ``(1 + eps) V(t) / mu`` evaluated on the cycle table."""
    return (1.0 + eps) * regen.v_at(t) / regen.mu


@dataclass(frozen=True)
class Condition5:
    sup: float
    ratio_at_largest: float
    times: np.ndarray
    ratios: np.ndarray


def condition5_check(regen: RegenTable, floor=1e-12) -> Condition5:
    """``V(t) / V(2t)`` over grid points with ``2t <= t_max`` and ``V(2t) > floor``."""
    v = regen.v_of_t.values
    n = len(v)
    idx = np.arange((n - 1) // 2 + 1)
    v2 = v[2 * idx]
    keep = v2 > floor
    idx = idx[keep]
    ratios = v[idx] / v[2 * idx]
    times = idx * regen.step
    if len(ratios) == 0:
        return Condition5(math.nan, math.nan, times, ratios)
    return Condition5(float(np.max(ratios)), float(ratios[-1]), times, ratios)


def u_small_o_check(regen: RegenTable, b: float, factor: float = 5.0):
    """Empirical surrogate for ``u(t) = o(V(t))``.

    Returns ``(passed, times, ratio)`` with ``ratio = u / V`` on the grid;
    ``passed`` means the ratio fell by ``factor`` from ``10 b`` to ``t_max / 2``.
    """
    times = regen.v_of_t.times
    v = regen.v_of_t.values
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(v > 0, regen.u_of_t.values / v, np.nan)
    r_start = np.interp(10 * b, times, ratio)
    r_end = np.interp(regen.t_max / 2, times, ratio)
    passed = bool(r_end > 0 and r_start / r_end >= factor) or bool(r_end == 0 and r_start > 0)
    return passed, times, ratio


@dataclass
class RateReport:
    regime: str
    decay_rate: float
    times: np.ndarray
    bound_curve: np.ndarray
    exact_curve: np.ndarray
    bound_eq1_curve: np.ndarray
    condition5_ratio_sup: float
    t_asymptotic: float
    epsilon: float
    mu: float
    empirical_curve: Optional[np.ndarray] = None
    empirical_se: Optional[float] = None
    extras: dict = field(default_factory=dict)
    busy: Optional[BusyTable] = None
    regen: Optional[RegenTable] = None

    def bound_holds(self):
        """Whether the regime bound dominates phi on ``t >= t_asymptotic``."""
        sel = self.times >= self.t_asymptotic
        return bool(np.all(self.bound_curve[sel] >= self.exact_curve[sel]))


def regime_of(params: QueueParams) -> str:
    tail = params.service.classify_tail()
    if isinstance(tail, Light):
        return "Light"
    _rv_alpha(params)
    return "HeavyRV"


def rate_report(params: QueueParams, t_grid, eps=DEFAULT_EPS, h=None, t_max=None, tol=1e-10,
                sim_opts: Optional[dict] = None) -> RateReport:
    """Exact phi, bound (1), the regime bound and diagnostics on ``t_grid``.

    ``sim_opts`` (keys ``reps``, ``seed``, ``workers``) adds the simulated
    phi curve.
    """
    regime = regime_of(params)
    times = np.asarray(t_grid, dtype=float)
    busy = stadje_tail(params, h, t_max, tol)
    regen = regen_tail(params, busy)
    exact = phi_exact(params, times)
    eq1 = np.asarray(phi_bound_eq1(params, times), dtype=float)
    cond5 = condition5_check(regen)
    extras = {"condition5_ratio_at_largest": cond5.ratio_at_largest,
              "series_terms": busy.series_terms_used,
              "truncation_bound": busy.truncation_bound,
              "h": busy.step, "T_max": busy.t_max}
    if regime == "Light":
        root = solve_decay_root(params)
        decay = root.value
        bound = np.asarray(light_bound(params, regen, times, eps), dtype=float)
        t_asym = 0.0
        extras.update(s1=root.value, s1_residual=root.residual, s1_at_boundary=root.at_boundary)
    else:
        alpha = params.service.classify_tail().alpha
        decay = alpha - 1.0
        bound = np.asarray(heavy_bound(params, regen, times, eps), dtype=float)
        t_asym = T_ASYMPTOTIC_MEANS * params.b
        extras.update(alpha=alpha,
                      bound_alpha_plus_1=np.asarray(heavy_bound(params, regen, times, eps, "alpha+1")))
    report = RateReport(regime, float(decay), times, bound, exact, eq1, cond5.sup, t_asym, eps,
                        regen.mu, extras=extras, busy=busy, regen=regen)
    if sim_opts:
        from .sim import empirical_phi_curve
        phis, se = empirical_phi_curve(params, times, reps=sim_opts.get("reps", 10_000),
                                       seed=sim_opts.get("seed", 0), workers=sim_opts.get("workers", 1))
        report.empirical_curve = phis
        report.empirical_se = se
    return report


def default_t_grid(params: QueueParams, n: int = 201):
    _, t_max = default_grid(params)
    return np.linspace(0.0, t_max, n)
