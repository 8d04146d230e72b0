"""Service-time laws for the M/G/inf queue.

Each law is an immutable dataclass exposing its survival function, mean,
tail integral, inverse CDF, sampler, exponential moment and tail class.
All laws are continuous on ``[0, inf)`` with ``B(0) = 0`` and a finite mean.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from scipy import integrate, optimize, special

from .errors import DomainError, InfiniteMeanError

QUAD_ABS_TOL = 1e-10


# ---------------------------------------------------------------------------
# Tail classes


@dataclass(frozen=True)
class Light:
    """Service law satisfying the Cramer condition.

    ``cramer_abscissa`` is ``sup{s : E exp(sX) < inf}``.
    """

    cramer_abscissa: float
    name: str = field(default="Light", init=False)


@dataclass(frozen=True)
class RegularlyVarying:
    """Survival ``x**-alpha * slowly_varying(x)`` with a slowly varying factor."""

    alpha: float
    slowly_varying: Callable[[float], float] = field(compare=False)
    name: str = field(default="RegularlyVarying", init=False)

    def slowly_varying_at(self, x):
        return self.slowly_varying(x)


@dataclass(frozen=True)
class SubexponentialOther:
    """Heavy, subexponential, but not regularly varying. No rate results attach."""

    name: str = field(default="SubexponentialOther", init=False)


TailClass = Union[Light, RegularlyVarying, SubexponentialOther]


# ---------------------------------------------------------------------------
# Service models


def _check_nonneg(x):
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError(f"time argument must be nonnegative, got {x!r}")
    return arr


def _out(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


class ServiceModel:
    """Common behaviour of the service-time catalog.

    Subclasses implement ``_sf``, ``_tail``, ``_ppf``, ``mean`` and
    ``classify_tail``; everything else is derived here.
    """

    def sf(self, x):
        """Survival function ``P(X > x)``; raises on negative ``x``."""
        return _out(self._sf(_check_nonneg(x)))

    def log_sf(self, x):
        """``log P(X > x)`` without underflow far in the tail."""
        return _out(self._log_sf(_check_nonneg(x)))

    def _log_sf(self, x):
        with np.errstate(divide="ignore"):
            return np.log(self._sf(x))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x > 0, 1.0 - self._sf(np.maximum(x, 0.0)), 0.0)
        return _out(out)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x >= 0, self._pdf(np.maximum(x, 0.0)), 0.0)
        return _out(out)

    def tail_integral(self, t):
        """Return ``int_t^inf sf(x) dx``.

        Closed forms are used for every catalog law; ``tail_integral_quad``
        is the adaptive-quadrature route kept for laws without one.
        """
        return _out(self._tail(_check_nonneg(t)))

    def tail_integral_quad(self, t):
        t = float(_check_nonneg(t))
        val, _ = integrate.quad(self._sf_scalar, t, np.inf, epsabs=QUAD_ABS_TOL, epsrel=1e-12, limit=500)
        return val

    def _sf_scalar(self, x):
        return float(self._sf(np.asarray(x, dtype=float)))

    def ppf(self, u):
        """Inverse CDF; ``u`` in ``[0, 1)``."""
        u = np.asarray(u, dtype=float)
        if np.any((u < 0) | (u >= 1)):
            raise DomainError("uniform draw must lie in [0, 1)")
        return _out(self._ppf(u))

    def sample(self, rng, size=None):
        """Draw from the law by inversion of uniform variates from ``rng``."""
        u = rng.random(size)
        return self.ppf(u)

    def exp_moment(self, s):
        """``E exp(sX)``; ``inf`` when the integral diverges."""
        s = float(s)
        if s == 0.0:
            return 1.0
        closed = self._exp_moment(s)
        if closed is not None:
            return closed
        # s < 0 here: E e^{sX} = 1 + s int_0^inf e^{sx} sf(x) dx
        val, _ = integrate.quad(lambda x: math.exp(s * x) * self._sf_scalar(x), 0, np.inf,
                                epsabs=QUAD_ABS_TOL, limit=500)
        return 1.0 + s * val

    def _exp_moment(self, s):
        return None

    def spec(self):
        """Distribution spec string understood by :func:`parse_dist`."""
        raise NotImplementedError


@dataclass(frozen=True)
class Exponential(ServiceModel):
    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise DomainError("rate must be positive")

    def _sf(self, x):
        return np.exp(-self.rate * x)

    def _log_sf(self, x):
        return -self.rate * x

    def _pdf(self, x):
        return self.rate * np.exp(-self.rate * x)

    def _tail(self, t):
        return np.exp(-self.rate * t) / self.rate

    def _ppf(self, u):
        return -np.log1p(-u) / self.rate

    def mean(self):
        return 1.0 / self.rate

    def _exp_moment(self, s):
        return self.rate / (self.rate - s) if s < self.rate else math.inf

    def classify_tail(self):
        return Light(self.rate)

    def spec(self):
        return f"exp:rate={self.rate!r}"


@dataclass(frozen=True)
class HyperExponential(ServiceModel):
    weights: tuple
    rates: tuple

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        r = tuple(float(v) for v in self.rates)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "rates", r)
        if len(w) != len(r) or not w:
            raise DomainError("weights and rates must have equal nonzero length")
        if any(v < 0 for v in w) or abs(sum(w) - 1.0) > 1e-12:
            raise DomainError("weights must be a probability vector")
        if any(not v > 0 for v in r):
            raise DomainError("rates must be positive")

    def _sf(self, x):
        x = np.asarray(x, dtype=float)
        return sum(w * np.exp(-r * x) for w, r in zip(self.weights, self.rates))

    def _log_sf(self, x):
        x = np.asarray(x, dtype=float)
        terms = [math.log(w) - r * x for w, r in zip(self.weights, self.rates) if w > 0]
        return special.logsumexp(np.stack(np.broadcast_arrays(*terms)), axis=0)

    def _pdf(self, x):
        return sum(w * r * np.exp(-r * x) for w, r in zip(self.weights, self.rates))

    def _tail(self, t):
        return sum(w * np.exp(-r * t) / r for w, r in zip(self.weights, self.rates))

    def _ppf(self, u):
        w = np.asarray(self.weights)
        r = np.asarray(self.rates)

        def one(p):
            if p == 0.0:
                return 0.0
            hi = -math.log1p(-p) / r.min()
            # cdf written with expm1 so tiny p keep full precision
            return optimize.brentq(lambda x: float(np.dot(w, -np.expm1(-r * x))) - p, 0.0, hi,
                                   xtol=max(hi * 1e-16, 1e-300), rtol=4 * np.finfo(float).eps, maxiter=500)
        return np.vectorize(one, otypes=[float])(u)

    def sample(self, rng, size=None):
        # Mixture draw: pick a phase, then invert that phase's exponential CDF.
        u_phase = rng.random(size)
        u = rng.random(size)
        idx = np.searchsorted(np.cumsum(self.weights)[:-1], u_phase, side="right")
        rates = np.asarray(self.rates)[idx]
        return _out(-np.log1p(-u) / rates)

    def mean(self):
        return sum(w / r for w, r in zip(self.weights, self.rates))

    def _exp_moment(self, s):
        if s >= min(self.rates):
            return math.inf
        return sum(w * r / (r - s) for w, r in zip(self.weights, self.rates))

    def classify_tail(self):
        return Light(min(self.rates))

    def spec(self):
        w = ",".join(repr(v) for v in self.weights)
        r = ",".join(repr(v) for v in self.rates)
        return f"hyperexp:w={w};rates={r}"


@dataclass(frozen=True)
class Erlang(ServiceModel):
    shape: int
    rate: float

    def __post_init__(self):
        if int(self.shape) != self.shape or self.shape < 1:
            raise DomainError("Erlang shape must be a positive integer")
        object.__setattr__(self, "shape", int(self.shape))
        if not self.rate > 0:
            raise DomainError("rate must be positive")

    def _sf(self, x):
        return special.gammaincc(self.shape, self.rate * np.asarray(x, dtype=float))

    def _log_sf(self, x):
        # sf = exp(-rx) * sum_{j<k} (rx)^j / j!
        rx = self.rate * np.asarray(x, dtype=float)
        j = np.arange(self.shape).reshape((-1,) + (1,) * rx.ndim)
        return -rx + special.logsumexp(special.xlogy(j, rx) - special.gammaln(j + 1.0), axis=0)

    def _pdf(self, x):
        k, r = self.shape, self.rate
        return np.exp(k * math.log(r) + special.xlogy(k - 1, x) - r * x - special.gammaln(k))

    def _tail(self, t):
        # E(X - t)^+ = E[X; X > t] - t P(X > t)
        k, r = self.shape, self.rate
        rt = r * np.asarray(t, dtype=float)
        return (k / r) * special.gammaincc(k + 1, rt) - np.asarray(t) * special.gammaincc(k, rt)

    def _ppf(self, u):
        return special.gammaincinv(self.shape, u) / self.rate

    def mean(self):
        return self.shape / self.rate

    def _exp_moment(self, s):
        return (self.rate / (self.rate - s)) ** self.shape if s < self.rate else math.inf

    def classify_tail(self):
        return Light(self.rate)

    def spec(self):
        return f"erlang:k={self.shape},rate={self.rate!r}"


@dataclass(frozen=True)
class Lomax(ServiceModel):
    """Pareto type II: ``sf(x) = (1 + x/scale)**-alpha``."""

    alpha: float
    scale: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError("alpha must be positive")
        if not self.scale > 0:
            raise DomainError("scale must be positive")

    def _sf(self, x):
        return (1.0 + x / self.scale) ** (-self.alpha)

    def _log_sf(self, x):
        return -self.alpha * np.log1p(x / self.scale)

    def _pdf(self, x):
        return self.alpha / self.scale * (1.0 + x / self.scale) ** (-self.alpha - 1.0)

    def _tail(self, t):
        if self.alpha <= 1:
            raise InfiniteMeanError(f"Lomax alpha={self.alpha} has infinite mean")
        return self.scale * (1.0 + t / self.scale) ** (1.0 - self.alpha) / (self.alpha - 1.0)

    def _ppf(self, u):
        return self.scale * np.expm1(-np.log1p(-u) / self.alpha)

    def mean(self):
        if self.alpha <= 1:
            raise InfiniteMeanError(f"Lomax alpha={self.alpha} has infinite mean")
        return self.scale / (self.alpha - 1.0)

    def _exp_moment(self, s):
        return math.inf if s > 0 else None

    def slowly_varying(self, x):
        """``x**alpha * sf(x)``, which tends to ``scale**alpha``."""
        x = np.asarray(x, dtype=float)
        return _out(self.scale ** self.alpha * (1.0 + self.scale / x) ** (-self.alpha))

    def classify_tail(self):
        return RegularlyVarying(self.alpha, self.slowly_varying)

    def spec(self):
        return f"lomax:alpha={self.alpha!r},scale={self.scale!r}"


@dataclass(frozen=True)
class WeibullHeavy(ServiceModel):
    """Weibull with shape below one: subexponential, every moment finite."""

    shape: float
    scale: float = 1.0

    def __post_init__(self):
        if not 0 < self.shape < 1:
            raise DomainError("heavy Weibull shape must lie in (0, 1)")
        if not self.scale > 0:
            raise DomainError("scale must be positive")

    def _sf(self, x):
        return np.exp(-((x / self.scale) ** self.shape))

    def _log_sf(self, x):
        return -((x / self.scale) ** self.shape)

    def _pdf(self, x):
        z = np.where(x > 0, x / self.scale, np.inf)
        return np.where(x > 0, self.shape / self.scale * z ** (self.shape - 1) * np.exp(-(z ** self.shape)), np.inf)

    def _tail(self, t):
        k = self.shape
        return self.scale * special.gamma(1 + 1 / k) * special.gammaincc(1 / k, (t / self.scale) ** k)

    def _ppf(self, u):
        return self.scale * (-np.log1p(-u)) ** (1.0 / self.shape)

    def mean(self):
        return self.scale * special.gamma(1.0 + 1.0 / self.shape)

    def _exp_moment(self, s):
        return math.inf if s > 0 else None

    def classify_tail(self):
        return SubexponentialOther()

    def spec(self):
        return f"weibull:shape={self.shape!r},scale={self.scale!r}"


# ---------------------------------------------------------------------------
# Spec strings

_TOKEN = re.compile(r"(\w+)=([^=]*?)(?=[,;]\w+=|$)")


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def parse_dist(text: str) -> ServiceModel:
    """Parse a spec such as ``lomax:alpha=3,scale=1`` into a model.

    Raises ``ValueError`` on any malformed or invalid spec.
    """
    name, sep, rest = text.strip().partition(":")
    if not sep:
        raise ValueError(f"malformed distribution spec {text!r}: expected name:key=value")
    params = {}
    pos = 0
    for m in _TOKEN.finditer(rest):
        if m.start() != pos:
            raise ValueError(f"malformed distribution spec {text!r}")
        params[m.group(1)] = m.group(2)
        pos = m.end() + 1
    if pos < len(rest):
        raise ValueError(f"malformed distribution spec {text!r}")

    def take(*keys):
        missing = [k for k in keys if k not in params]
        extra = set(params) - set(keys)
        if missing or extra:
            raise ValueError(f"{name}: expected keys {keys}, got {tuple(params)}")
        return [params[k] for k in keys]

    try:
        if name in ("exp", "exponential"):
            (rate,) = take("rate")
            return Exponential(float(rate))
        if name == "hyperexp":
            w, rates = take("w", "rates")
            return HyperExponential(tuple(_floats(w)), tuple(_floats(rates)))
        if name == "erlang":
            k, rate = take("k", "rate")
            if float(k) != int(float(k)):
                raise ValueError("erlang k must be an integer")
            return Erlang(int(float(k)), float(rate))
        if name == "lomax":
            alpha, scale = take("alpha", "scale")
            return Lomax(float(alpha), float(scale))
        if name == "weibull":
            shape, scale = take("shape", "scale")
            return WeibullHeavy(float(shape), float(scale))
    except DomainError as exc:
        raise ValueError(f"invalid distribution spec {text!r}: {exc}") from exc
    raise ValueError(f"unknown distribution {name!r}")


CATALOG = {
    "exp": Exponential(1.0),
    "hyperexp": HyperExponential((0.5, 0.5), (1.0, 2.0)),
    "erlang": Erlang(2, 3.0),
    "lomax": Lomax(3.0, 1.0),
    "weibull": WeibullHeavy(0.5, 1.0),
}
