"""Auxiliary functions behind the admissible potential class.

Iterated logarithms and exponentials, the Young pair ``f_km``/``g_km``,
the Rosen constant ``gamma(eps)``, the log-Sobolev constant ``beta(eps)``
and the Gross exponent ``N(s)``.  Everything here is a pure function of
its arguments and works on Python floats.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from scipy import integrate

from .errors import DomainError, QuadratureError

SQRT2 = math.sqrt(2.0)


def iter_log(m: int, r: float) -> float:
    """Apply ``ln`` ``m`` times to ``r``; ``m = 0`` returns ``r``."""
    if m < 0:
        raise DomainError(f"iteration depth must be >= 0, got {m}")
    x = float(r)
    for j in range(m):
        if not x > 0.0:
            raise DomainError(f"ln^({j})({r}) = {x} is not positive")
        x = math.log(x)
    return x


def iter_exp(m: int, r: float) -> float:
    """Apply ``exp`` ``m`` times to ``r``.

    Raises OverflowError when an iterate leaves the double range.
    """
    if m < 0:
        raise DomainError(f"iteration depth must be >= 0, got {m}")
    x = float(r)
    for _ in range(m):
        x = math.exp(x)
    if math.isinf(x):
        raise OverflowError(f"exp^({m})({r}) overflows")
    return x


@dataclass(frozen=True)
class IteratedLogParams:
    """Exponent ``k`` and iteration depth ``m`` of the lower envelope."""

    k: float
    m: int

    def __post_init__(self):
        if not self.k > 0:
            raise DomainError(f"k must be positive, got {self.k}")
        if int(self.m) != self.m or self.m < 1:
            raise DomainError(f"m must be a positive integer, got {self.m}")

    @property
    def r_m(self) -> float:
        """Knot of the Young pair, ``exp^(m)(1)``."""
        return iter_exp(self.m, 1.0)


@dataclass(frozen=True)
class RosenConstants:
    """Coefficient ``d``, dimension ``n`` and the two free additive constants.

    ``C_rosen`` enters ``gamma(eps)``; ``C_ls`` enters ``beta(eps)``.
    """

    d: float
    n: int
    C_rosen: float = 0.0
    C_ls: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.d <= 1.0:
            raise DomainError(f"d must lie in (0, 1], got {self.d}")
        if self.d == 1.0:
            warnings.warn(
                "d = 1 is the closed endpoint; the Rosen lemma is stated for d < 1",
                stacklevel=3,
            )
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n}")
        if not (math.isfinite(self.C_rosen) and math.isfinite(self.C_ls)):
            raise DomainError("additive constants must be finite")


def f_km(p: IteratedLogParams, q: float) -> float:
    """Linear below the knot ``r_m``, ``(ln^(m) q)^k`` above it."""
    if q < 0:
        raise DomainError(f"f_km is defined on [0, inf), got {q}")
    r_m = p.r_m
    if q < r_m:
        return q / r_m
    return iter_log(p.m, q) ** p.k


def g_km(p: IteratedLogParams, b: float) -> float:
    """Inverse of :func:`f_km` on ``[0, inf)``."""
    if b < 0:
        raise DomainError(f"g_km is defined on [0, inf), got {b}")
    if b < 1.0:
        return p.r_m * b
    return iter_exp(p.m, b ** (1.0 / p.k))


def rosen_gamma(p: IteratedLogParams, rc: RosenConstants, eps: float) -> float:
    """Constant in ``-ln phi <= eps q + gamma(eps)``."""
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    return SQRT2 * g_km(p, SQRT2 / (rc.d * eps)) + rc.C_rosen


def rosen_beta(p: IteratedLogParams, rc: RosenConstants, eps: float) -> float:
    """Log-Sobolev constant built from ``gamma(eps / 2)``."""
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    half = 0.5 * eps
    return half - 0.25 * rc.n * math.log(half) + rosen_gamma(p, rc, half) + rc.C_ls


def exponent_path(t: float, q1: float = 1.0, q2: float = 2.0):
    """Linear exponent path from ``q1`` at ``s = 0`` to ``q2`` at ``s = t``.

    Returns ``(p, dp)`` as callables of ``s``.
    """
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    if not 1.0 <= q1 < q2:
        raise DomainError(f"need 1 <= q1 < q2, got ({q1}, {q2})")
    slope = (q2 - q1) / t
    return (lambda s: q1 + slope * s), (lambda s: slope)


def gross_integrand(p: IteratedLogParams, rc: RosenConstants, t: float,
                    path: tuple[float, float] = (1.0, 2.0)):
    """``r -> 2 beta(p(r)/p'(r)) p'(r) / p(r)^2`` for the given exponent path."""
    pf, dpf = exponent_path(t, *path)

    def integrand(r):
        pr, dpr = pf(r), dpf(r)
        return 2.0 * rosen_beta(p, rc, pr / dpr) * dpr / (pr * pr)

    return integrand


def gross_N(p: IteratedLogParams, rc: RosenConstants, t: float, s: float,
            path: tuple[float, float] = (1.0, 2.0), epsrel: float = 1e-8,
            limit: int = 200) -> float:
    """Accumulated log-Sobolev constants ``N(s)`` along the exponent path.

    For the default path ``p(r) = 1 + r/t`` the integrand reduces to
    ``2 beta(r + t) / ((r + t)(1 + r/t))``.
    """
    if not 0.0 <= s <= t:
        raise DomainError(f"need 0 <= s <= t, got s={s}, t={t}")
    if s == 0.0:
        return 0.0
    f = gross_integrand(p, rc, t, path)
    out = integrate.quad(f, 0.0, s, epsabs=0.0, epsrel=epsrel, limit=limit,
                         full_output=1)
    value, abserr = out[0], out[1]
    # quad may flag roundoff even when its error estimate is well inside tolerance
    if not (math.isfinite(value) and abserr <= epsrel * abs(value) + 1e-300):
        raise QuadratureError(
            f"N({s}) did not reach rel. tol {epsrel}: estimate {value}, error {abserr}"
        )
    return value
