"""Exact transient law of the M/G/inf queue started empty.

``Q(t)`` is Poisson with mean ``rho(t) = lam * int_0^t sf(x) dx`` and tends to
Poisson(``rho = lam * b``). This module evaluates both laws, the uniform
distance ``phi(t) = sup_k |P_k(t) - P_k|`` and its explicit upper bound
``C_rho * lam * int_t^inf sf(x) dx``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .dist import ServiceModel
from .errors import DomainError


@dataclass(frozen=True)
class QueueParams:
    lam: float
    service: ServiceModel

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise DomainError("arrival rate must be positive and finite")
        if not math.isfinite(self.rho):
            raise DomainError("offered load must be finite")

    @property
    def b(self) -> float:
        return self.service.mean()

    @property
    def rho(self) -> float:
        return self.lam * self.service.mean()


def truncation_k(rho: float) -> int:
    """Largest k examined by sup-over-k computations."""
    return int(math.ceil(rho + 10.0 * math.sqrt(rho) + 30.0))


def rho_deficit(params: QueueParams, t):
    """``rho - rho(t) = lam * int_t^inf sf``, evaluated without cancellation."""
    return params.lam * params.service.tail_integral(t)


def rho_of_t(params: QueueParams, t):
    return params.lam * (params.service.mean() - params.service.tail_integral(t))


def _log_poisson(k, mu):
    k = np.asarray(k, dtype=float)
    return special.xlogy(k, mu) - mu - special.gammaln(k + 1.0)


def log_pk_transient(params: QueueParams, k, t):
    return _log_poisson(k, rho_of_t(params, t))


def pk_transient(params: QueueParams, k, t):
    """``P(Q(t) = k)`` computed in log space.

    Masses below the smallest double underflow to 0.0; use
    :func:`log_pk_transient` when the magnitude itself is needed.
    """
    out = np.exp(log_pk_transient(params, k, t))
    return float(out) if np.ndim(out) == 0 else out


def pk_stationary(params: QueueParams, k):
    out = np.exp(_log_poisson(k, params.rho))
    return float(out) if np.ndim(out) == 0 else out


def pk_difference(params: QueueParams, k, t):
    """``P_k(t) - P_k`` for k = array, written as ``P_k * expm1(...)``.

    With ``d = rho - rho(t)`` the ratio ``P_k(t) / P_k`` equals
    ``(1 - d/rho)**k * exp(d)``, so the difference keeps full relative
    precision even when it is far below the masses themselves.
    """
    rho = params.rho
    d = rho_deficit(params, t)
    k = np.asarray(k, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        expo = np.where(k > 0, k * np.log1p(-min(d / rho, 1.0)), 0.0) + d
    return np.exp(_log_poisson(k, rho)) * np.expm1(expo)


def phi_exact(params: QueueParams, t):
    """``sup_k |P_k(t) - P_k|`` over ``k <= truncation_k(rho)``.

    Beyond the truncation both masses are below 1e-12.
    """
    ks = np.arange(truncation_k(params.rho) + 1)
    if np.ndim(t) == 0:
        if t < 0:
            raise DomainError("t must be nonnegative")
        return float(np.max(np.abs(pk_difference(params, ks, t))))
    return np.array([phi_exact(params, float(x)) for x in np.asarray(t, dtype=float)])


def c_rho(params: QueueParams) -> float:
    """``2 * rho**[rho] / [rho]!`` with ``[.]`` the integer part."""
    rho = params.rho
    m = math.floor(rho)
    return 2.0 * math.exp(special.xlogy(m, rho) - special.gammaln(m + 1.0))


def phi_bound_eq1(params: QueueParams, t):
    return c_rho(params) * rho_deficit(params, t)


@dataclass(frozen=True)
class TransientCurve:
    times: np.ndarray
    rho_t: np.ndarray
    phi: np.ndarray
    bound_eq1: np.ndarray


def transient_curve(params: QueueParams, times) -> TransientCurve:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or np.any(np.diff(times) < 0):
        raise DomainError("times must be an ascending 1-d grid")
    return TransientCurve(
        times=times,
        rho_t=np.asarray(rho_of_t(params, times), dtype=float),
        phi=phi_exact(params, times),
        bound_eq1=np.asarray(phi_bound_eq1(params, times), dtype=float),
    )
