"""Spectral heat semigroup, ground-state measure and weighted norms.

``e^{-tH}`` is the truncated spectral sum over the computed eigenpairs.
The weighted semigroup ``e^{-tH~} = phi^-1 e^{-tH} phi`` acts on
``L^p(mu)`` with ``d mu = phi^2 dx / Z``.  Its eigenfunctions are
``psi_j = v_j / phi``.  Dividing the eigensolver vectors by ``phi`` is
useless in the tails, where both are rounding noise.  So each ``psi_j`` is
recomputed by shifted inverse iteration on the ground-state-transformed
generator ``G = phi^-1 (H - E0) phi``.  ``G`` only involves neighbour ratios
``phi_j / phi_i``, which the refined ground state gives to full relative
precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .discretize import Grid, SparseHamiltonian
from .eigensolve import EigenPair, GroundState, full_spectrum, lowest_eigenpairs
from .errors import CapacityError, DomainError, ShapeError

DENSE_KERNEL_MAX = 8000
TAIL_EPS = 1e-10


@dataclass(frozen=True)
class WeightedSpace:
    """Probability measure ``w_i = phi_i^2 h^n / Z`` on the grid nodes."""

    phi: np.ndarray
    cell: float

    @cached_property
    def Z(self) -> float:
        return float(np.sum(self.phi ** 2) * self.cell)

    @cached_property
    def weights(self) -> np.ndarray:
        return self.phi ** 2 * self.cell / self.Z

    @classmethod
    def from_ground(cls, ground: GroundState, grid: Grid) -> "WeightedSpace":
        if not np.all(ground.phi > 0):
            raise DomainError("the ground state must be strictly positive")
        return cls(phi=ground.phi, cell=grid.cell)


def weighted_inner(W: WeightedSpace, u, v) -> float:
    return float(np.sum(np.asarray(u) * np.asarray(v) * W.weights))


def weighted_norm(W: WeightedSpace, u, p: float) -> float:
    """``(sum |u|^p w)^(1/p)``; ``p = inf`` gives ``max |u|``."""
    u = np.abs(np.asarray(u, dtype=float))
    if u.shape != W.weights.shape:
        raise ShapeError(f"vector of shape {u.shape} does not match {W.weights.shape}")
    if p == math.inf:
        return float(u.max())
    if not p >= 1:
        raise DomainError(f"p must be >= 1 or inf, got {p}")
    m = u.max()
    if m == 0:
        return 0.0
    # scale out the maximum so large exponents do not overflow
    return float(m * np.sum((u / m) ** p * W.weights) ** (1.0 / p))


def doob_generator(Hh: SparseHamiltonian, phi) -> sp.csr_matrix:
    """``G = phi^-1 (H - E0) phi`` built from neighbour ratios only.

    Off-diagonals ``H_ij phi_j / phi_i``; the diagonal makes each row sum
    to zero, so ``G 1 = 0`` holds exactly, without relying on ``E0``.
    """
    A = Hh.matrix.tocoo()
    off = A.row != A.col
    r, c = A.row[off], A.col[off]
    vals = A.data[off] * (phi[c] / phi[r])
    diag = -np.bincount(r, weights=vals, minlength=Hh.size)
    G = sp.coo_matrix((np.concatenate([vals, diag]),
                       (np.concatenate([r, np.arange(Hh.size)]),
                        np.concatenate([c, np.arange(Hh.size)]))),
                      shape=A.shape)
    return G.tocsr()


def weighted_eigenvectors(Hh: SparseHamiltonian, ground: GroundState, lam, V,
                          steps: int = 2) -> np.ndarray:
    """Rows ``psi_j`` with ``sum (psi_j phi)^2 h^n = 1`` and ``psi_0 = 1``.

    ``V`` holds the eigenvectors as columns.  Each row is two steps of
    inverse iteration on ``G - (lam_j - E0 - delta)``, started from
    ``v_j / phi`` restricted to where ``v_j`` is above rounding level.
    Near-degenerate clusters are re-orthonormalized in ``L^2(mu)``.
    """
    phi, cell = ground.phi, Hh.grid.cell
    G = doob_generator(Hh, phi).tocsc()
    eye = sp.identity(Hh.size, format="csc")
    J = len(lam)
    Psi = np.empty((J, Hh.size))
    for j in range(J):
        v = V[:, j]
        if j == 0:
            Psi[0] = 1.0 / math.sqrt(np.sum(phi ** 2) * cell)
            continue
        start = np.where(np.abs(v) > 1e-13 * np.abs(v).max(), v / phi, 0.0)
        sigma = lam[j] - ground.E0
        delta = 1e-10 * max(1.0, abs(sigma))
        lu = spla.splu(G - (sigma - delta) * eye)
        y = start
        for _ in range(steps):
            y = lu.solve(y)
            y /= math.sqrt(np.sum((y * phi) ** 2) * cell)
        if np.sum((y * phi) * (start * phi)) < 0:
            y = -y
        Psi[j] = y
    # clusters of (nearly) equal eigenvalues
    lam = np.asarray(lam)
    j = 1
    wts = phi ** 2 * cell
    while j < J:
        k = j + 1
        while k < J and lam[k] - lam[k - 1] <= 1e-8 * max(1.0, abs(lam[k])):
            k += 1
        if k - j > 1:
            B = Psi[j:k]
            M = (B * wts) @ B.T
            s, U = np.linalg.eigh(0.5 * (M + M.T))
            Psi[j:k] = (U / np.sqrt(s)) @ U.T @ B
        j = k
    return Psi


@dataclass(frozen=True)
class SpectralPropagator:
    """Truncated spectral representation of ``e^{-tH}``.

    ``V`` stores the eigenvectors as columns, discretely L^2-normalized;
    column 0 is the (refined) ground state.
    """

    lam: np.ndarray
    V: np.ndarray
    ground: GroundState
    grid: Grid
    hamiltonian: SparseHamiltonian = field(repr=False)

    @property
    def J(self) -> int:
        return len(self.lam)

    @property
    def pairs(self) -> list[EigenPair]:
        return [EigenPair(float(l), self.V[:, j], math.nan) for j, l in enumerate(self.lam)]

    @cached_property
    def psi(self) -> np.ndarray:
        return weighted_eigenvectors(self.hamiltonian, self.ground, self.lam, self.V)

    @property
    def complete(self) -> bool:
        return self.J == self.grid.size


def make_propagator(Hh: SparseHamiltonian, ground: GroundState,
                    pairs: list[EigenPair]) -> SpectralPropagator:
    lam = np.array([p.lam for p in pairs])
    V = np.column_stack([p.v for p in pairs])
    V[:, 0] = ground.phi
    return SpectralPropagator(lam=lam, V=V, ground=ground, grid=Hh.grid, hamiltonian=Hh)


def truncation_rank(lam, E0: float, t_min: float, eps: float = TAIL_EPS) -> int:
    """Smallest ``J`` with ``exp(-t_min (lam_J - E0)) <= eps`` (``len(lam)`` if none)."""
    lam = np.asarray(lam)
    gap = -math.log(eps) / t_min
    hit = np.nonzero(lam - E0 >= gap)[0]
    return int(hit[0]) + 1 if hit.size else len(lam)


def build_propagator(Hh: SparseHamiltonian, ground: GroundState, *, t_min=None,
                     J=None, full=False, tol=1e-8, eps=TAIL_EPS, seed=0):
    """Propagator with the full spectrum, a fixed ``J``, or ``J`` chosen from ``t_min``.

    With ``t_min`` the rank grows until ``exp(-t_min (lam_J - E0)) <= eps``
    or the spectrum is exhausted.
    """
    if full:
        pairs = full_spectrum(Hh)
    elif J is not None:
        pairs = lowest_eigenpairs(Hh, min(J, Hh.size), tol, seed=seed)
    elif t_min is not None:
        J = min(Hh.size, 32)
        while True:
            pairs = lowest_eigenpairs(Hh, J, tol, seed=seed)
            lam = [p.lam for p in pairs]
            need = truncation_rank(lam, ground.E0, t_min, eps)
            if need < J or J == Hh.size:
                pairs = pairs[:need]
                break
            J = min(Hh.size, 2 * J)
    else:
        raise DomainError("give one of full, J or t_min")
    return make_propagator(Hh, ground, pairs)


def _check(P, u):
    u = np.asarray(u, dtype=float)
    if u.shape != (P.grid.size,):
        raise ShapeError(f"vector of shape {u.shape} does not match {P.grid.size} nodes")
    return u


def propagate(P: SpectralPropagator, t: float, u) -> np.ndarray:
    """``sum_j exp(-t lam_j) <v_j, u>_h v_j``."""
    if t < 0:
        raise DomainError(f"t must be >= 0, got {t}")
    u = _check(P, u)
    c = (P.V.T @ u) * P.grid.cell
    return P.V @ (np.exp(-t * P.lam) * c)


def _dense_budget(P, max_nodes):
    if P.grid.size > max_nodes:
        raise CapacityError(f"dense kernel on {P.grid.size} nodes exceeds {max_nodes}")


def kernel(P: SpectralPropagator, t: float, max_nodes: int = DENSE_KERNEL_MAX) -> np.ndarray:
    """Dense ``k(t, x, y) = sum_j exp(-t lam_j) v_j(x) v_j(y)``, exactly symmetric."""
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    _dense_budget(P, max_nodes)
    A = P.V * np.exp(-0.5 * t * P.lam)
    K = A @ A.T
    return 0.5 * (K + K.T)


def weighted_coefficients(P: SpectralPropagator, u) -> np.ndarray:
    """``c_j = sum_i psi_j u phi^2 h^n``, the expansion coefficients of ``u``."""
    u = _check(P, u)
    phi = P.ground.phi
    return P.psi @ (u * phi ** 2) * P.grid.cell


def weighted_propagate(P: SpectralPropagator, W: WeightedSpace, t: float, u,
                       route: str = "psi") -> np.ndarray:
    """``e^{-tH~} u``.

    ``route="psi"`` sums ``exp(-t lam_j) c_j psi_j`` (tail-accurate);
    ``route="direct"`` evaluates ``phi^-1 propagate(t, phi u)`` literally.
    """
    if t < 0:
        raise DomainError(f"t must be >= 0, got {t}")
    if route == "direct":
        return propagate(P, t, W.phi * np.asarray(u, dtype=float)) / W.phi
    if route != "psi":
        raise DomainError(f"unknown route {route!r}")
    c = weighted_coefficients(P, u)
    return (np.exp(-t * P.lam) * c) @ P.psi


def weighted_generator_apply(P: SpectralPropagator, W: WeightedSpace, t: float, u):
    """``(H~ e^{-tH~} u, e^{-tH~} u)`` from the spectral representation."""
    a = np.exp(-t * P.lam) * weighted_coefficients(P, u)
    return (P.lam * a) @ P.psi, a @ P.psi


def weighted_kernel(P: SpectralPropagator, W: WeightedSpace, t: float,
                    max_nodes: int = DENSE_KERNEL_MAX) -> np.ndarray:
    """``k~(t, x, y)`` with ``(e^{-tH~} u)(x) = sum_y k~(x, y) u(y) w_y``.

    ``k~ = Z k(t, x, y) / (phi(x) phi(y))``, assembled from ``psi``.
    """
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    _dense_budget(P, max_nodes)
    with np.errstate(under="ignore"):
        A = P.psi.T * np.exp(-0.5 * t * P.lam)
    K = A @ A.T
    return W.Z * 0.5 * (K + K.T)


def weighted_kernel_norms(P: SpectralPropagator, W: WeightedSpace, t: float,
                          max_nodes: int = DENSE_KERNEL_MAX) -> dict:
    """Operator norms of ``e^{-tH~}`` between ``L^1(mu)``, ``L^2(mu)``, ``L^inf(mu)``."""
    K = weighted_kernel(P, W, t, max_nodes)
    w = W.weights
    col = np.sqrt((K ** 2 * w[:, None]).sum(axis=0))
    row = np.sqrt((K ** 2 * w[None, :]).sum(axis=1))
    return {
        "norm_1_to_2": float(col.max()),
        "norm_2_to_inf": float(row.max()),
        "norm_1_to_inf": float(np.abs(K).max()),
    }


def doob_kernel(Hh: SparseHamiltonian, ground: GroundState, t: float,
                max_nodes: int = 4000) -> np.ndarray:
    """Independent route to ``k~``: ``exp(-t E0) e^{-tG} / w`` by uniformization.

    ``-G`` is a Markov generator, so ``e^{-tG} = e^{-Lam d} sum (Lam d B)^k / k!``
    with ``B = I - G / Lam`` entrywise nonnegative; squaring then restores
    ``t = 2^s d``.  No subtraction occurs anywhere, so small transition
    probabilities keep their relative accuracy.
    """
    if Hh.size > max_nodes:
        raise CapacityError(f"dense Markov kernel on {Hh.size} nodes exceeds {max_nodes}")
    phi = ground.phi
    G = doob_generator(Hh, phi).toarray()
    Lam = float(np.max(G.diagonal()))
    s = max(0, math.ceil(math.log2(max(Lam * t, 1e-300) / 0.5)))
    d = t / 2 ** s
    B = np.eye(Hh.size) - G / Lam
    np.fill_diagonal(B, np.maximum(B.diagonal(), 0.0))
    term = np.eye(Hh.size) * math.exp(-Lam * d)
    Pm = term.copy()
    k = 0
    while k <= Lam * d + 40:
        k += 1
        term = term @ B * (Lam * d / k)
        Pm += term
    for _ in range(s):
        Pm = Pm @ Pm
    w = phi ** 2 * Hh.grid.cell
    Z = w.sum()
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        return math.exp(-t * ground.E0) * Pm / (w[None, :] / Z)
