"""Potential families, envelope integrals and the admissibility checker.

A potential ``q`` on R^n is paired with a radial envelope ``Q``.  The
checker tests the growth conditions on ``Q`` (monotone, ``r^2 < Q``,
``Q' Q^(-3/2) -> 0`` and the two-sided iterated-log sandwich) on a finite
radial grid, and samples ``q`` on spheres to test the sandwich bound
``d I(|x|) (ln^(m) I(|x|))^k <= q(x) <= Q(|x|)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .auxmath import IteratedLogParams, iter_exp, iter_log
from .errors import DomainError, QuadratureError

FAMILIES = ("power", "power-log", "table")


@dataclass(frozen=True)
class EnvelopeSpec:
    """Radial envelope ``Q: [0, inf) -> (0, inf)``.

    ``power``: ``r^alpha + c``.  ``power-log``: ``r^2 (ln^(n0) r)_+^l + c``,
    where the iterated log is clamped to zero below the point where it turns
    positive.  ``table``: piecewise-linear interpolation of ``(r_table,
    Q_table)``, held constant beyond the last sample.
    """

    family: str = "power"
    alpha: float = 4.0
    c: float = 1.0
    n0: int = 1
    l: float = 2.0
    r_table: tuple = ()
    Q_table: tuple = ()

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown envelope family {self.family!r}")
        if self.family == "table":
            if len(self.r_table) < 2 or len(self.r_table) != len(self.Q_table):
                raise DomainError("table envelope needs >= 2 matching samples")
            if self.r_table[0] != 0.0:
                raise DomainError("table envelope must start at r = 0")
        if self.family == "power" and self.alpha <= 0:
            raise DomainError("power envelope needs alpha > 0")
        if self.family == "power-log" and (self.n0 < 1 or self.l <= 0):
            raise DomainError("power-log envelope needs n0 >= 1 and l > 0")

    def _log_factor(self, r: float) -> float:
        # ln^(n0) r > 0 exactly when r > exp^(n0-1)(1)
        if r <= iter_exp(self.n0 - 1, 1.0):
            return 0.0
        return iter_log(self.n0, r)

    def __call__(self, r):
        r_arr = np.asarray(r, dtype=float)
        if self.family == "power":
            out = r_arr ** self.alpha + self.c
        elif self.family == "power-log":
            logs = np.vectorize(self._log_factor, otypes=[float])(r_arr)
            out = r_arr ** 2 * logs ** self.l + self.c
        else:
            out = np.interp(r_arr, self.r_table, self.Q_table)
        return out if out.ndim else float(out)

    def closed_form_integral(self, r: float) -> Optional[float]:
        """``int_0^r Q^(1/2)`` when the family admits a closed form."""
        if self.family == "power" and self.c == 0.0:
            e = 0.5 * self.alpha + 1.0
            return r ** e / e
        if self.family == "table" and len(set(self.Q_table)) == 1:
            return math.sqrt(self.Q_table[0]) * r
        return None

    def breakpoints(self, a: float, b: float) -> list:
        """Points in ``(a, b)`` where ``Q`` is not smooth."""
        if self.family == "table":
            return [x for x in self.r_table if a < x < b]
        if self.family == "power-log":
            kink = iter_exp(self.n0 - 1, 1.0)
            return [kink] if a < kink < b else []
        return []


def _quad_piece(f, a, b, points, epsrel):
    out = integrate.quad(f, a, b, points=points or None, epsabs=0.0,
                         epsrel=epsrel, limit=200, full_output=1)
    value, abserr = out[0], out[1]
    if not (math.isfinite(value) and abserr <= epsrel * abs(value) + 1e-14 * (b - a)):
        raise QuadratureError(f"int_{a}^{b} sqrt(Q) failed: {value} +- {abserr}")
    return value


def envelope_integral(e: EnvelopeSpec, r: float, epsrel: float = 1e-9) -> float:
    """``I(r) = int_0^r Q(t)^(1/2) dt``."""
    if r < 0:
        raise DomainError(f"r must be >= 0, got {r}")
    if r == 0:
        return 0.0
    exact = e.closed_form_integral(r)
    if exact is not None:
        return exact
    return _quad_piece(lambda t: math.sqrt(e(t)), 0.0, r, e.breakpoints(0.0, r), epsrel)


def envelope_integral_grid(e: EnvelopeSpec, r_grid, epsrel: float = 1e-9) -> np.ndarray:
    """``I`` on an increasing grid by summing per-interval quadratures."""
    r_grid = np.asarray(r_grid, dtype=float)
    if np.any(np.diff(r_grid) <= 0) or r_grid[0] < 0:
        raise DomainError("r_grid must be increasing and nonnegative")
    if e.closed_form_integral(1.0) is not None:
        return np.array([e.closed_form_integral(r) for r in r_grid])
    f = lambda t: math.sqrt(e(t))  # noqa: E731
    pieces = []
    prev = 0.0
    for r in r_grid:
        pieces.append(_quad_piece(f, prev, r, e.breakpoints(prev, r), epsrel) if r > prev else 0.0)
        prev = r
    return np.cumsum(pieces)


def _radial(fn):
    def q(x):
        x = np.asarray(x, dtype=float)
        r = np.sqrt(np.sum(x * x, axis=-1)) if x.ndim > 1 else np.abs(x)
        return fn(r)
    return q


@dataclass
class PotentialSpec:
    """A potential ``q`` together with its envelope and lower-bound parameters.

    ``q`` maps points of shape ``(M, n)`` (or ``(M,)`` in 1D) to ``(M,)``
    values.  ``R_m`` is the admissibility radius; it is filled in by
    :func:`check_admissibility` when not configured.
    """

    q: Callable
    envelope: Optional[EnvelopeSpec] = None
    params: IteratedLogParams = field(default_factory=lambda: IteratedLogParams(1.0, 1))
    d: float = 1.0
    R_m: float = 0.0
    name: str = ""

    def __post_init__(self):
        if not 0.0 < self.d <= 1.0:
            raise DomainError(f"d must lie in (0, 1], got {self.d}")

    def I(self, r: float) -> float:
        if self.envelope is None:
            raise DomainError(f"potential {self.name!r} has no envelope")
        return envelope_integral(self.envelope, r)


def radial_potential(envelope: EnvelopeSpec, params: IteratedLogParams = None,
                     d: float = 1.0, name: str = "") -> PotentialSpec:
    """``q(x) = Q(|x|)``: the potential saturating its own upper envelope."""
    return PotentialSpec(q=_radial(envelope), envelope=envelope,
                         params=params or IteratedLogParams(1.0, 1), d=d,
                         name=name or f"{envelope.family}-envelope")


def power_potential(alpha: float = 4.0, c: float = 1.0, k: float = 1.0, m: int = 1,
                    d: float = 1.0) -> PotentialSpec:
    """``q(x) = |x|^alpha + c``."""
    return radial_potential(EnvelopeSpec("power", alpha=alpha, c=c),
                            IteratedLogParams(k, m), d, name=f"|x|^{alpha:g}+{c:g}")


def harmonic_potential() -> PotentialSpec:
    """``q(x) = |x|^2``, the negative control."""
    return radial_potential(EnvelopeSpec("power", alpha=2.0, c=0.0), name="|x|^2")


def free_potential() -> PotentialSpec:
    """``q = 0``."""
    def q(x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[0] if x.ndim else 1)
    return PotentialSpec(q=q, envelope=None, name="0")


def lower_envelope(spec: PotentialSpec, r: float) -> float:
    """``d I(r) (ln^(m) I(r))^k``."""
    I = spec.I(r)
    lg = iter_log(spec.params.m, I)
    if lg <= 0:
        raise DomainError(f"ln^({spec.params.m})(I({r})) = {lg} is not positive")
    return spec.d * I * lg ** spec.params.k


def legacy_lower_bound(spec: PotentialSpec, r: float) -> float:
    """Older lower bound carrying the extra product ``prod_{p<m} ln^(p) I``."""
    I = spec.I(r)
    m = spec.params.m
    prod = 1.0
    for p in range(m):
        f = iter_log(p, I)
        if f <= 0:
            raise DomainError(f"ln^({p})(I({r})) = {f} is not positive")
        prod *= f
    lg = iter_log(m, I)
    if lg <= 0:
        raise DomainError(f"ln^({m})(I({r})) = {lg} is not positive")
    return spec.d * I * lg ** spec.params.k * prod


def sphere_points(n: int, r: float, count: int = 64) -> np.ndarray:
    """Deterministic sample of ``count`` points on the sphere of radius ``r``."""
    if n == 1:
        return np.array([[-r], [r]])
    if n == 2:
        a = 2 * np.pi * np.arange(count) / count
        return r * np.column_stack([np.cos(a), np.sin(a)])
    if n == 3:
        i = np.arange(count) + 0.5
        z = 1 - 2 * i / count
        phi = np.pi * (1 + 5 ** 0.5) * i
        s = np.sqrt(1 - z * z)
        return r * np.column_stack([s * np.cos(phi), s * np.sin(phi), z])
    raise DomainError(f"sphere sampling supports n in {{1, 2, 3}}, got {n}")


@dataclass
class AdmissibilityReport:
    """Outcome of :func:`check_admissibility`; every verdict is replayable
    from the stored grid columns."""

    r: np.ndarray
    Q: np.ndarray
    I: np.ndarray
    lower: np.ndarray
    q_min: np.ndarray
    q_max: np.ndarray
    cond_iii_ok: np.ndarray
    condition_i: bool
    condition_i_witness: Optional[float]
    tail_decay: np.ndarray
    condition_ii: bool
    condition_iii: bool
    R_m: Optional[float]
    first_violation: Optional[float]
    sandwich: bool
    legacy_ratio: np.ndarray

    @property
    def admissible(self) -> bool:
        return self.condition_i and self.condition_ii and self.condition_iii and self.sandwich

    def summary(self) -> dict:
        return {
            "condition_i": self.condition_i,
            "condition_i_witness": self.condition_i_witness,
            "condition_ii": self.condition_ii,
            "tail_decay_last": float(self.tail_decay[-1]),
            "condition_iii": self.condition_iii,
            "R_m": self.R_m,
            "first_violation": self.first_violation,
            "sandwich": self.sandwich,
            "admissible": self.admissible,
        }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "Q", "I", "lower", "q_min_on_sphere", "q_max_on_sphere", "cond_iii"])
            for row in zip(self.r, self.Q, self.I, self.lower, self.q_min, self.q_max,
                           self.cond_iii_ok):
                w.writerow([f"{v:.17g}" for v in row[:-1]] + [int(row[-1])])


def tail_decay_profile(e: EnvelopeSpec, r_grid) -> np.ndarray:
    """``Q'(r) Q(r)^(-3/2)`` by central differences (one-sided at the ends)."""
    r = np.asarray(r_grid, dtype=float)
    Q = np.asarray(e(r), dtype=float)
    dQ = np.gradient(Q, r)
    return dQ * Q ** -1.5


def check_admissibility(spec: PotentialSpec, r_grid, tail_tol: float = 1e-2,
                        n: int = 1, sphere_count: int = 64) -> AdmissibilityReport:
    """Test the growth conditions on a radial grid.

    Conditions (ii) and (iii) are limits at infinity; both are judged on
    the last third of the grid.  Failures are reported, never raised; only
    quadrature trouble raises.
    """
    e = spec.envelope
    if e is None:
        raise DomainError(f"potential {spec.name!r} has no envelope to check")
    r = np.asarray(r_grid, dtype=float)
    if r[0] <= 0:
        r = r[r > 0]
    Q = np.asarray(e(r), dtype=float)
    I = envelope_integral_grid(e, r)

    # (i) monotone with r^2 < Q(r)
    bad = np.flatnonzero(~(r ** 2 < Q))
    mono = bool(np.all(np.diff(Q) >= 0))
    cond_i = mono and bad.size == 0
    witness = float(r[bad[0]]) if bad.size else None

    # (ii) Q' Q^(-3/2) small and decreasing on the last third
    decay = tail_decay_profile(e, r)
    tail = decay[-(len(r) // 3):]
    cond_ii = bool(np.all(np.abs(tail) < tail_tol) and np.all(np.diff(tail) <= 0))

    # (iii) r^2 < I (ln^(m) I)^k < Q(r) beyond R_m
    k, m = spec.params.k, spec.params.m
    lower = np.full_like(r, np.nan)
    legacy = np.full_like(r, np.nan)
    for i, Ii in enumerate(I):
        try:
            lg = iter_log(m, Ii)
        except DomainError:
            continue
        if lg > 0:
            lower[i] = Ii * lg ** k
            try:
                legacy[i] = lower[i] * math.prod(iter_log(p, Ii) for p in range(m))
            except DomainError:
                pass
    ok = (r ** 2 < lower) & (lower < Q)
    ok &= np.isfinite(lower)
    fails = np.flatnonzero(~ok)
    if fails.size == 0:
        R_m = float(r[0])
        cond_iii = True
        first_violation = None
    elif fails[-1] == len(r) - 1:
        R_m = None
        cond_iii = False
        first_violation = float(r[fails[0]])
    else:
        R_m = float(r[fails[-1]])
        # the holding tail must cover the last third of the grid
        cond_iii = bool(fails[-1] < len(r) - len(r) // 3)
        first_violation = float(r[fails[0]])
    lower = spec.d * lower

    # sandwich on spheres beyond R_m
    q_min = np.empty_like(r)
    q_max = np.empty_like(r)
    for i, ri in enumerate(r):
        vals = np.asarray(spec.q(sphere_points(n, ri, sphere_count)), dtype=float)
        q_min[i], q_max[i] = vals.min(), vals.max()
    if R_m is None:
        sandwich = False
    else:
        tail_pts = r > R_m
        rel = 1e-12 * np.maximum(1.0, Q[tail_pts])
        sandwich = bool(np.all(lower[tail_pts] <= q_min[tail_pts] + rel)
                        and np.all(q_max[tail_pts] <= Q[tail_pts] + rel)
                        and np.all(q_min >= 0))

    with np.errstate(invalid="ignore", divide="ignore"):
        legacy_ratio = (spec.d * legacy) / lower
    return AdmissibilityReport(
        r=r, Q=Q, I=I, lower=lower, q_min=q_min, q_max=q_max, cond_iii_ok=ok,
        condition_i=cond_i, condition_i_witness=witness, tail_decay=decay,
        condition_ii=cond_ii, condition_iii=cond_iii, R_m=R_m,
        first_violation=first_violation, sandwich=sandwich, legacy_ratio=legacy_ratio,
    )
