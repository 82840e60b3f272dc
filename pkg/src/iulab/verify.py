"""Numerical checks of the kernel bounds, Rosen and log-Sobolev inequalities.

Every "sup over R^n" becomes a max over grid nodes.  For sups of
``-ln phi`` and ``|v_j| / phi`` the max is taken over interior nodes, at
distance ``margin`` (default ``L / 10``) or more from the box faces.  The
Dirichlet wall forces ``phi`` to zero there, which has nothing to do with
the whole-space problem.  Whether a quantity converges is judged by how it
changes as ``L`` grows, not by a single grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .auxmath import (IteratedLogParams, RosenConstants, exponent_path, gross_N,
                      rosen_beta, rosen_gamma)
from .discretize import Grid, SparseHamiltonian, assemble
from .eigensolve import GroundState, full_spectrum, ground_state
from .errors import DomainError
from .semigroup import (SpectralPropagator, WeightedSpace, build_propagator, make_propagator,
                        weighted_generator_apply,
                        weighted_inner, weighted_kernel, weighted_kernel_norms,
                        weighted_norm, weighted_propagate)

STABLE_TOL = 0.05
DIVERGE_FACTOR = 2.0
MONOTONE_SLACK = 1e-8
CHAIN_SLACK = 1e-8
DUALITY_TOL = 1e-10
ENTROPY_FLOOR = 1e-300

# short tags naming the statement each check exercises
ANCHORS = {
    "iuc_constant": "kernel-bound k<=C_t phi phi",
    "iuc_stability_study": "kernel-bound k<=C_t phi phi",
    "rosen_fit": "rosen -ln phi<=eps q+gamma",
    "decay_constant": "agmon phi<=C exp(-|x|)",
    "eigen_domination": "eigenfunction |v|<=C_lambda phi",
    "log_sobolev_check": "log-sobolev beta(eps)",
    "gross_monotonicity": "gross exp(-N)||T u||_p(s) decreasing",
    "chain_bound_check": "duality L2->Linf chain",
    "duality_check": "duality mu-self-adjointness",
    "radial_supersolution_check": "radial supersolution bracket",
    "check_admissibility": "admissible class conditions i-iii",
}


@dataclass
class VerificationReport:
    """Outcome of one check; ``series`` holds ``(parameter, value)`` pairs."""

    check: str
    params: dict
    value: float
    verdict: str
    series: list = field(default_factory=list)
    residuals: dict = field(default_factory=dict)
    notes: str = ""
    columns: tuple = ("param", "value")

    @property
    def anchor(self) -> str:
        return ANCHORS.get(self.check, "")

    @property
    def passed(self) -> bool:
        return self.verdict in ("pass", "stable")


@dataclass(frozen=True)
class Problem:
    """Everything one grid run produces, bundled for the checks."""

    grid: Grid
    hamiltonian: SparseHamiltonian
    ground: GroundState
    propagator: SpectralPropagator
    space: WeightedSpace


def prepare(q, grid: Grid, *, full: bool = True, J: int | None = None,
            t_min: float | None = None, tol: float = 1e-8, seed: int = 0) -> Problem:
    """Assemble, solve and wrap a problem.  ``q`` is a PotentialSpec or callable."""
    Hh = assemble(grid, q)
    if full:
        pairs = full_spectrum(Hh)
        gs = ground_state(Hh, tol, pairs=pairs[:2])
        P = make_propagator(Hh, gs, pairs)
    else:
        gs = ground_state(Hh, tol, seed=seed)
        P = build_propagator(Hh, gs, J=J, t_min=t_min, tol=tol, seed=seed)
    return Problem(grid, Hh, gs, P, WeightedSpace.from_ground(gs, grid))


def default_margin(grid: Grid) -> float:
    return 0.1 * grid.L


# ---------------------------------------------------------------------------
# kernel bound


def iuc_constant(P: SpectralPropagator, W: WeightedSpace, t: float,
                 detail: bool = False):
    """``max k(t, x, y) / (phi(x) phi(y))`` over node pairs.

    Equals ``norm_1_to_inf`` of the weighted kernel divided by ``Z``.
    With ``detail=True`` also returns the argmax coordinates.
    """
    K = weighted_kernel(P, W, t) / W.Z
    i, j = np.unravel_index(int(np.argmax(K)), K.shape)
    value = float(K[i, j])
    if detail:
        return value, P.grid.coord(i), P.grid.coord(j)
    return value


def stability_verdict(values: Sequence[float], stable_tol: float = STABLE_TOL,
                      diverge_factor: float = DIVERGE_FACTOR) -> str:
    if len(values) < 2:
        return "inconclusive"
    ratio = values[-1] / values[0]
    if abs(ratio - 1.0) <= stable_tol:
        return "stable"
    if ratio >= diverge_factor:
        return "diverging"
    return "inconclusive"


def drift(values: Sequence[float]) -> float:
    """Relative change from the first to the last value."""
    return abs(values[-1] / values[0] - 1.0)


def iuc_stability_study(q, t: float, L_list: Sequence[float], N_per_L: float = 20.0,
                        n: int = 1, stable_tol: float = STABLE_TOL,
                        diverge_factor: float = DIVERGE_FACTOR) -> VerificationReport:
    """``iuc_constant`` at fixed spacing ``h = 1 / N_per_L`` over growing boxes."""
    L_list = list(L_list)
    if any(b <= a for a, b in zip(L_list, L_list[1:])):
        raise DomainError("L_list must be increasing")
    series = []
    for L in L_list:
        pb = prepare(q, Grid.from_spacing(n, L, 1.0 / N_per_L))
        series.append((L, iuc_constant(pb.propagator, pb.space, t)))
    values = [v for _, v in series]
    verdict = stability_verdict(values, stable_tol, diverge_factor)
    return VerificationReport(
        "iuc_stability_study",
        {"t": t, "L_list": L_list, "h": 1.0 / N_per_L, "n": n},
        values[-1] / values[0] if len(values) > 1 else values[0],
        verdict,
        series=series,
        notes="value is last/first ratio",
        columns=("L", "iuc_constant"),
    )


# ---------------------------------------------------------------------------
# ground-state bounds


def rosen_fit(ground: GroundState, grid: Grid, q_values, eps_list,
              margin: float | None = None) -> dict:
    """``gamma_hat(eps) = max (-ln phi - eps q)`` over interior nodes."""
    mask = grid.interior_mask(default_margin(grid) if margin is None else margin)
    a = -np.log(ground.phi[mask])
    qv = np.asarray(q_values)[mask]
    out = {}
    for eps in eps_list:
        if not eps > 0:
            raise DomainError(f"eps must be positive, got {eps}")
        out[eps] = float(np.max(a - eps * qv))
    return out


def fit_rosen_constant(gamma_hat_ref: float, p: IteratedLogParams, rc: RosenConstants,
                       eps_ref: float = 1.0) -> float:
    """``C = max(0, gamma_hat(eps*) - formula gamma(eps*))`` with ``C_rosen = 0``."""
    base = RosenConstants(rc.d, rc.n, 0.0, rc.C_ls)
    return max(0.0, gamma_hat_ref - rosen_gamma(p, base, eps_ref))


def decay_constant(ground: GroundState, grid: Grid):
    """``(C_hat, x_argmax)`` with ``C_hat = max phi(x) exp(|x|)``."""
    with np.errstate(over="ignore"):
        vals = ground.phi * np.exp(grid.radius)
    i = int(np.argmax(vals))
    return float(vals[i]), grid.coord(i)


def eigen_domination(P: SpectralPropagator, margin: float | None = None,
                     J: int | None = None) -> list[float]:
    """``C_j = max |v_j| / phi`` over interior nodes, from the tail-accurate ``psi_j``."""
    g = P.grid
    mask = g.interior_mask(default_margin(g) if margin is None else margin)
    J = P.J if J is None else min(J, P.J)
    Z = math.sqrt(np.sum(P.ground.phi ** 2) * g.cell)
    # psi_0 is 1 / ||phi||; rescale so C_0 = 1 exactly
    return [float(np.max(np.abs(P.psi[j][mask])) * Z) for j in range(J)]


# ---------------------------------------------------------------------------
# semigroup inequalities


@dataclass(frozen=True)
class LogSobolevResult:
    residual: float
    lhs: float
    rhs: float
    entropy: float
    form: float
    norm_p: float


def _check_nonneg(u):
    u = np.asarray(u, dtype=float)
    if np.min(u) < -1e-12:
        raise DomainError(f"u must be nonnegative, min is {np.min(u):.3g}")
    return np.maximum(u, 0.0)


def log_sobolev_check(P: SpectralPropagator, W: WeightedSpace, u, t: float, p: float,
                      eps: float, params: IteratedLogParams, rc: RosenConstants,
                      normalized: bool = False) -> LogSobolevResult:
    """Residual ``RHS - LHS`` of the log-Sobolev inequality at ``w = e^{-tH~} u``.

    LHS ``= sum w^p ln w dmu``; RHS ``= eps <H~ w, w^(p-1)>_mu
    + (2 beta(eps)/p) ||w||_p^p + ||w||_p^p ln ||w||_p``.  ``w`` is clamped
    at zero (tiny negative values are truncation noise) and at ``1e-300``
    inside the logarithm.  ``normalized=True`` divides everything by
    ``||w||_p^p``, making the residual invariant under ``u -> c u``.
    """
    if not 1 < p <= 2:
        raise DomainError(f"p must lie in (1, 2], got {p}")
    u = _check_nonneg(u)
    Hw, w = weighted_generator_apply(P, W, t, u)
    w = np.maximum(w, 0.0)
    wp = w ** p
    norm_pp = float(np.sum(wp * W.weights))
    lnw = np.log(np.maximum(w, ENTROPY_FLOOR))
    entropy = float(np.sum(np.where(w > 0, wp * lnw, 0.0) * W.weights))
    form = weighted_inner(W, Hw, w ** (p - 1))
    beta = rosen_beta(params, rc, eps)
    norm_p = norm_pp ** (1.0 / p)
    rhs = eps * form + 2.0 * beta / p * norm_pp + norm_pp * math.log(norm_p)
    lhs = entropy
    if normalized:
        rhs, lhs, entropy, form = rhs / norm_pp, lhs / norm_pp, entropy / norm_pp, form / norm_pp
    return LogSobolevResult(rhs - lhs, lhs, rhs, entropy, form, norm_p)


@dataclass(frozen=True)
class GrossSeries:
    s: np.ndarray
    p: np.ndarray
    N: np.ndarray
    norms: np.ndarray
    values: np.ndarray
    verdict: str


def gross_monotonicity(P: SpectralPropagator, W: WeightedSpace, u, t: float,
                       s_grid, params: IteratedLogParams, rc: RosenConstants,
                       path: tuple[float, float] = (1.0, 2.0),
                       slack: float = MONOTONE_SLACK) -> GrossSeries:
    """``exp(-N(s)) ||e^{-sH~} u||_{p(s), mu}`` along the exponent path."""
    u = _check_nonneg(u)
    s_grid = np.asarray(s_grid, dtype=float)
    if s_grid[0] < 0 or s_grid[-1] > t or np.any(np.diff(s_grid) <= 0):
        raise DomainError("s_grid must increase within [0, t]")
    pf, _ = exponent_path(t, *path)
    ps = np.array([pf(s) for s in s_grid])
    Ns = np.array([gross_N(params, rc, t, float(s), path) for s in s_grid])
    norms = np.array([
        weighted_norm(W, np.maximum(weighted_propagate(P, W, float(s), u), 0.0), p)
        for s, p in zip(s_grid, ps)
    ])
    values = np.exp(-Ns) * norms
    ok = bool(np.all(np.diff(values) <= slack * values[0]))
    return GrossSeries(s_grid, ps, Ns, norms, values, "pass" if ok else "fail")


def chain_bound_check(P: SpectralPropagator, W: WeightedSpace, t: float,
                      slack: float = CHAIN_SLACK, rel_slack: float = 0.0) -> VerificationReport:
    """``||T(2t)||_{1->inf} <= ||T(t)||_{1->2} ||T(t)||_{2->inf} + slack``.

    Both sides agree in exact arithmetic (the sup of ``k~(2t)`` sits on the
    diagonal), so the excess is pure rounding, about ``1e-16`` times the
    norms; ``rel_slack`` adds ``rel_slack * bound`` for large norms.
    """
    a = weighted_kernel_norms(P, W, t)
    b = weighted_kernel_norms(P, W, 2 * t)
    bound = a["norm_1_to_2"] * a["norm_2_to_inf"]
    excess = b["norm_1_to_inf"] - bound
    ok = excess <= slack + rel_slack * bound
    return VerificationReport(
        "chain_bound_check", {"t": t}, excess, "pass" if ok else "fail",
        residuals={"norm_1_to_inf_2t": b["norm_1_to_inf"], "norm_1_to_2": a["norm_1_to_2"],
                   "norm_2_to_inf": a["norm_2_to_inf"]},
        notes="value is norm_1_to_inf(2t) - norm_1_to_2(t) norm_2_to_inf(t)",
    )


def duality_check(P: SpectralPropagator, W: WeightedSpace, t: float, u, v) -> float:
    """``|<u, T v>_mu - <T u, v>_mu| / (||u||_2,mu ||v||_2,mu)``."""
    lhs = weighted_inner(W, u, weighted_propagate(P, W, t, v))
    rhs = weighted_inner(W, weighted_propagate(P, W, t, u), v)
    scale = weighted_norm(W, u, 2) * weighted_norm(W, v, 2)
    return abs(lhs - rhs) / scale if scale > 0 else 0.0


def boundary_radius(E0: float) -> float:
    """Smallest double ``r`` with ``r * r - 1 >= E0`` in floating point.

    ``sqrt(1 + E0)`` rounded to a double can sit just below the true root,
    and ``1 + E0`` itself rounds to 1 for tiny ``E0``.
    """
    r = math.sqrt(1.0 + E0)
    while r * r - 1.0 < E0 or r * r < 1.0 + E0:
        r = math.nextafter(r, math.inf)
    return r


def radial_supersolution_check(beta: float, n: int, E0: float, r: float) -> float:
    """The bracket ``-b^2 r^(2(b-1)) + b(b-2+n) r^(b-2) + r^2 - E0`` for ``u = exp(-r^b)``."""
    if not r > 0:
        raise DomainError(f"r must be positive, got {r}")
    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta}")
    return (-beta ** 2 * r ** (2 * (beta - 1)) + beta * (beta - 2 + n) * r ** (beta - 2)
            + r * r - E0)
