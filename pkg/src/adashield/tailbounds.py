"""Inverse tail bounds for linear combinations of independent noise variables.

Given ``expr = c0 + sum_i c_i * X_i`` and a tolerance ``eps``, ``invccdf``
returns a value ``b`` with ``P(expr > b) <= eps`` (upper tail) or
``P(expr < b) <= eps`` (lower tail).  Every applicable method is computed and
the smallest (tightest) finite value wins:

* ``gaussian``: exact when all variables are Gaussian,
  ``mu + sqrt(2)*sigma*erfinv(1 - 2*eps)``
* ``uniform``: exact quantile for a single uniform variable
* ``bernoulli``: exact enumeration of the joint distribution
  (at most ``BERNOULLI_ENUM_MAX`` variables)
* ``hoeffding``: all variables of bounded support,
  ``mu + sqrt(sum c_i^2 (b_i - a_i)^2) * sqrt(ln(1/eps)/2)``
* ``chebyshev``: any finite-variance mix, ``mu + sigma/sqrt(eps)``
* ``cantelli`` (optional, off by default): one-sided
  ``mu + sigma*sqrt((1-eps)/eps)``

Note the Hoeffding expression is the analytic inversion of the one-sided
Hoeffding inequality ``P(S - mu > t) <= exp(-2 t^2 / sum w_i^2)``; a factor
``sqrt(.)`` around the log term is sometimes dropped in informal statements,
which does not invert the inequality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

BERNOULLI_ENUM_MAX = 20

_SQRT2 = math.sqrt(2.0)


def erfinv(y: float) -> float:
    """Inverse error function on (-1, 1).

    Polynomial initial guess (two branches on w = -ln(1-y^2)) refined with two
    Newton steps against ``math.erf``; accurate to ~1 ulp, and in particular
    ``|erf(erfinv(y)) - y| <= 1e-12`` over the open interval.
    """
    if not -1.0 < y < 1.0:
        raise ValueError(f"erfinv domain is (-1, 1), got {y}")
    if y == 0.0:
        return 0.0
    w = -math.log((1.0 - y) * (1.0 + y))
    if w < 6.25:
        w -= 3.125
        p = -3.6444120640178196e-21
        p = -1.685059138182016e-19 + p * w
        p = 1.2858480715256400e-18 + p * w
        p = 1.115787767802518e-17 + p * w
        p = -1.333171662854621e-16 + p * w
        p = 2.0972767875968561e-17 + p * w
        p = 6.6376381343583238e-15 + p * w
        p = -4.0545662729752068e-14 + p * w
        p = -8.1519341976054721e-14 + p * w
        p = 2.6335093153082322e-12 + p * w
        p = -1.2975133253453532e-11 + p * w
        p = -5.4154120542946279e-11 + p * w
        p = 1.0512122733215323e-9 + p * w
        p = -4.1126339803469836e-9 + p * w
        p = -2.9070369957882005e-8 + p * w
        p = 4.2347877827932403e-7 + p * w
        p = -1.3654692000834678e-6 + p * w
        p = -1.3882523362786468e-5 + p * w
        p = 1.8673420803405714e-4 + p * w
        p = -7.4070253416626697e-4 + p * w
        p = -6.0336708714301490e-3 + p * w
        p = 2.4015818242558961e-1 + p * w
        p = 1.6536545626831027 + p * w
    elif w < 16.0:
        w = math.sqrt(w) - 3.25
        p = 2.2137376921775787e-9
        p = 9.0756561938885390e-8 + p * w
        p = -2.7517406297064545e-7 + p * w
        p = 1.8239629214389227e-8 + p * w
        p = 1.5027403968909827e-6 + p * w
        p = -4.0138675269815460e-6 + p * w
        p = 2.9234449089955446e-6 + p * w
        p = 1.2475304481671779e-5 + p * w
        p = -4.7318229009055734e-5 + p * w
        p = 6.8284851459573175e-5 + p * w
        p = 2.4031110387097894e-5 + p * w
        p = -3.5503752036284748e-4 + p * w
        p = 9.5328937973738050e-4 + p * w
        p = -1.6882755560235047e-3 + p * w
        p = 2.4914420961078508e-3 + p * w
        p = -3.7512085075692412e-3 + p * w
        p = 5.3709145535900636e-3 + p * w
        p = 1.0052589676941592 + p * w
        p = 3.0838856104922208 + p * w
    else:
        w = math.sqrt(w) - 5.0
        p = -2.7109920616438573e-11
        p = -2.5556418169965252e-10 + p * w
        p = 1.5076572693500548e-9 + p * w
        p = -3.7894654401267370e-9 + p * w
        p = 7.6157012080783394e-9 + p * w
        p = -1.4960026627149240e-8 + p * w
        p = 2.9147953450901081e-8 + p * w
        p = -6.7711997758452339e-8 + p * w
        p = 2.2900482228026655e-7 + p * w
        p = -9.9298272942317003e-7 + p * w
        p = 4.5260625972231537e-6 + p * w
        p = -1.9681778105531671e-5 + p * w
        p = 7.5995277030017761e-5 + p * w
        p = -2.1503011930044477e-4 + p * w
        p = -1.3871931833623122e-4 + p * w
        p = 1.0103004648645344 + p * w
        p = 4.8499064014085844 + p * w
    x = p * y
    # two Newton refinements on erf(x) = y
    for _ in range(2):
        err = math.erf(x) - y
        x -= err * (math.sqrt(math.pi) / 2.0) * math.exp(x * x)
    return x


def normal_upper_quantile(eps: float) -> float:
    """z with P(N(0,1) > z) = eps, i.e. sqrt(2)*erfinv(1 - 2*eps)."""
    if eps <= 0.0 or eps >= 1.0:
        raise ValueError("eps must lie in (0, 1)")
    return _SQRT2 * erfinv(1.0 - 2.0 * eps)


@dataclass(frozen=True)
class Dist:
    """Concrete noise distribution: normal(mean, variance), uniform(lo, hi)
    or bernoulli(p)."""

    kind: str  # 'normal' | 'uniform' | 'bernoulli'
    a: float
    b: float = 0.0

    def mean(self) -> float:
        if self.kind == "normal":
            return self.a
        if self.kind == "uniform":
            return 0.5 * (self.a + self.b)
        return self.a

    def variance(self) -> float:
        if self.kind == "normal":
            return self.b
        if self.kind == "uniform":
            w = self.b - self.a
            return w * w / 12.0
        return self.a * (1.0 - self.a)

    def support(self) -> Optional[tuple[float, float]]:
        if self.kind == "uniform":
            return (self.a, self.b)
        if self.kind == "bernoulli":
            return (0.0, 1.0)
        return None

    def validate(self) -> None:
        if self.kind == "normal":
            if self.b < 0.0:
                raise ValueError("negative variance")
        elif self.kind == "uniform":
            if self.b < self.a:
                raise ValueError("empty uniform support")
        elif self.kind == "bernoulli":
            if not 0.0 <= self.a <= 1.0:
                raise ValueError("bernoulli parameter outside [0, 1]")
        else:
            raise ValueError(f"unknown distribution kind {self.kind!r}")


class DomainError(Exception):
    pass


def invccdf(coeffs: list[tuple[float, Dist]], c0: float, eps: float,
            tail: str = "up", allow_cantelli: bool = False):
    """Tightest available bound for ``c0 + sum c_i X_i``.

    Returns ``(value, method_name)`` or ``None`` when no method yields a
    finite value (e.g. eps = 0 with unbounded noise).
    """
    if not 0.0 <= eps <= 1.0:
        raise DomainError(f"tolerance must lie in [0, 1], got {eps}")
    if tail == "lo":
        r = invccdf([(-c, d) for c, d in coeffs], -c0, eps, "up", allow_cantelli)
        if r is None:
            return None
        return (-r[0], r[1])
    if tail != "up":
        raise DomainError(f"tail must be 'up' or 'lo', got {tail!r}")
    for c, d in coeffs:
        d.validate()

    mean = c0 + sum(c * d.mean() for c, d in coeffs)
    variance = sum(c * c * d.variance() for c, d in coeffs)
    candidates: list[tuple[float, str]] = []

    kinds = {d.kind for _, d in coeffs}

    if kinds <= {"normal"}:
        if 0.0 < eps < 1.0:
            candidates.append((mean + math.sqrt(variance) * normal_upper_quantile(eps),
                               "gaussian"))
        elif eps == 1.0:
            candidates.append((-math.inf, "gaussian"))

    if kinds == {"uniform"} and len(coeffs) == 1:
        c, d = coeffs[0]
        lo, hi = sorted((c * d.a, c * d.b))
        candidates.append((hi - eps * (hi - lo) + c0, "uniform"))

    if kinds <= {"bernoulli"} and coeffs and len(coeffs) <= BERNOULLI_ENUM_MAX:
        candidates.append((_bernoulli_exact(coeffs, c0, eps), "bernoulli"))

    if all(d.support() is not None for _, d in coeffs):
        widths = sum((c * (d.support()[1] - d.support()[0])) ** 2 for c, d in coeffs)
        if eps > 0.0:
            candidates.append((mean + math.sqrt(widths) * math.sqrt(math.log(1.0 / eps) / 2.0),
                               "hoeffding"))
        else:
            # eps = 0 over bounded support: the maximum of the support is sound
            top = c0 + sum(max(c * d.support()[0], c * d.support()[1]) for c, d in coeffs)
            candidates.append((top, "support"))

    if eps > 0.0:
        candidates.append((mean + math.sqrt(variance / eps), "chebyshev"))
        if allow_cantelli:
            candidates.append((mean + math.sqrt(variance * (1.0 - eps) / eps),
                               "cantelli"))

    finite = [(v, m) for v, m in candidates if not math.isnan(v) and v < math.inf]
    if not finite:
        return None
    return min(finite, key=lambda vm: vm[0])


def _bernoulli_exact(coeffs, c0: float, eps: float) -> float:
    """Exact inverse tail by convolving the finite joint distribution."""
    dist = {c0: 1.0}
    for c, d in coeffs:
        p = d.a
        nxt: dict[float, float] = {}
        for value, q in dist.items():
            if p < 1.0:
                k = value
                nxt[k] = nxt.get(k, 0.0) + q * (1.0 - p)
            if p > 0.0:
                k = value + c
                nxt[k] = nxt.get(k, 0.0) + q * p
        dist = nxt
    values = sorted(dist)
    # smallest support value whose strict upper tail is within eps
    tail = 1.0
    for v in values:
        tail -= dist[v]
        if tail <= eps:
            return v
    return values[-1]
