"""Lowest eigenpairs of the grid Hamiltonian and the positive ground state.

Small problems go to dense ``eigh``.  Larger ones use a thick-restart
Lanczos iteration with full (two-pass) reorthogonalization, applied to
``H^-1`` through a sparse LU factorization when ``q >= 0`` (``H`` is then
positive definite) and to ``H`` itself otherwise.

The ground state is refined by inverse iteration on a subtraction-free
factorization of ``H``.  ``H`` is an irreducible M-matrix with nonnegative
row sums, so Gaussian elimination can carry the row sums instead of the
diagonal and never subtracts; every triangular solve with a nonnegative
right-hand side then only adds positive numbers.  The refined ``phi`` is
accurate to a few ulps *relative to each entry*, including far in the tails
where the eigensolver vector is pure rounding noise.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla
from scipy.linalg import lapack

from .discretize import SparseHamiltonian
from .errors import ConvergenceError, DomainError, GapWarning, PositivityError

DENSE_MAX = 2000
GAP_TOL = 1e-8
REFINE_BUDGET = 4e8


@dataclass(frozen=True)
class EigenPair:
    lam: float
    v: np.ndarray
    residual: float


@dataclass(frozen=True)
class GroundState:
    """Ground state ``(E0, phi)``; ``phi`` has ``sum phi^2 h^n = 1``.

    ``gap`` is ``lambda_2 - E0`` (``nan`` on a one-node problem) and
    ``refined`` records whether the tail-accurate refinement was applied.
    """

    E0: float
    phi: np.ndarray
    min_phi: float
    gap: float
    refined: bool = False
    iterations: int = 0


def residual(Hh: SparseHamiltonian, lam: float, v) -> float:
    """``||H v - lam v|| / max(1, |lam|)`` in the discrete L^2 norm, for unit ``v``."""
    r = Hh.matrix @ v - lam * v
    return float(np.sqrt(np.dot(r, r) / np.dot(v, v)) / max(1.0, abs(lam)))


def _pairs_from(Hh, lam, X):
    cell = Hh.grid.cell
    out = []
    for j in range(len(lam)):
        v = X[:, j] / math.sqrt(np.dot(X[:, j], X[:, j]) * cell)
        # deterministic sign: largest-magnitude entry positive
        if v[np.argmax(np.abs(v))] < 0:
            v = -v
        out.append(EigenPair(float(lam[j]), v, residual(Hh, lam[j], v)))
    return out


def _dense(Hh, J):
    lam, X = sla.eigh(Hh.toarray(), subset_by_index=[0, J - 1])
    return lam, X


def _orthonormalize(w, V, k):
    """Two passes of classical Gram-Schmidt of ``w`` against ``V[:, :k]``."""
    h = np.zeros(k)
    for _ in range(2):
        c = V[:, :k].T @ w
        w = w - V[:, :k] @ c
        h += c
    return w, h


class _Krylov:
    """Thick-restart Lanczos for the largest eigenvalues of a symmetric ``op``.

    ``lock`` is an orthonormal block that the iteration is kept orthogonal
    to (deflation).
    """

    def __init__(self, op, size, nev, rng, lock=None, max_dim=None):
        self.op = op
        self.size = size
        self.nev = nev
        self.rng = rng
        self.lock = lock if lock is not None else np.zeros((size, 0))
        free = size - self.lock.shape[1]
        self.max_dim = min(free, max_dim or max(2 * nev + 30, 60))
        if nev > free:
            raise DomainError(f"asked for {nev} eigenpairs of a {free}-dimensional space")

    def _deflate(self, w):
        if self.lock.shape[1]:
            for _ in range(2):
                w = w - self.lock @ (self.lock.T @ w)
        return w

    def run(self, tol, max_apply):
        size, m = self.size, self.max_dim
        V = np.zeros((size, m + 1))
        T = np.zeros((m + 1, m + 1))
        v = self._deflate(self.rng.standard_normal(size))
        V[:, 0] = v / np.linalg.norm(v)
        k = 0          # number of kept (restart) vectors
        j = 0          # current basis size minus one
        applied = 0
        best = None
        while True:
            # extend the basis from column j to column m
            while j < m:
                if applied >= max_apply:
                    raise ConvergenceError(
                        f"Lanczos budget of {max_apply} operator applications exhausted",
                        residuals=np.full(self.nev, np.inf) if best is None else best.copy(),
                    )
                w = self._deflate(self.op(V[:, j]))
                applied += 1
                w, h = _orthonormalize(w, V, j + 1)
                T[: j + 1, j] = h
                T[j, : j + 1] = h
                beta = np.linalg.norm(w)
                if beta <= 1e-14 * max(1.0, abs(T[j, j])):
                    # invariant subspace: restart with a fresh direction
                    w = self._deflate(self.rng.standard_normal(size))
                    w, _ = _orthonormalize(w, V, j + 1)
                    w, _ = _orthonormalize(w, V, j + 1)
                    beta_store = 0.0
                    w = w / np.linalg.norm(w)
                else:
                    beta_store = beta
                    w = w / beta
                V[:, j + 1] = w
                T[j + 1, j] = T[j, j + 1] = beta_store
                j += 1
                if j >= m:
                    break
            theta, S = np.linalg.eigh(T[:m, :m])
            order = np.argsort(theta)[::-1]
            theta, S = theta[order], S[:, order]
            beta_m = T[m, m - 1]
            est = np.abs(beta_m * S[m - 1, :]) / np.maximum(np.abs(theta), 1e-300)
            best = est[: self.nev]
            if np.all(best <= tol) or m == self.size - self.lock.shape[1]:
                Y = V[:, :m] @ S[:, : self.nev]
                return theta[: self.nev], Y, best, applied
            # thick restart: keep the wanted Ritz vectors plus a buffer
            k = min(m - 1, self.nev + max(5, (m - self.nev) // 2))
            Vk = V[:, :m] @ S[:, :k]
            V[:, :k] = Vk
            V[:, k] = V[:, m]
            V[:, k + 1:] = 0.0
            T[:] = 0.0
            T[np.arange(k), np.arange(k)] = theta[:k]
            T[k, :k] = T[:k, k] = beta_m * S[m - 1, :k]
            # column k's diagonal and its coupling to k+1 come from the next sweep
            j = k


def _krylov_pairs(Hh, J, tol, rng, max_apply):
    H = Hh.matrix
    q_nonneg = bool(np.all(Hh.potential >= 0))
    if q_nonneg:
        lu = spla.splu(H.tocsc())
        op = lu.solve
    else:
        # largest eigenvalues of -H are the smallest of H
        op = lambda x: -(H @ x)
    inner_tol = min(1e-3, tol) * 1e-2

    def solve(nev, lock):
        kr = _Krylov(op, Hh.size, nev, rng, lock=lock)
        theta, Y, est, _ = kr.run(inner_tol, max_apply)
        Y, _ = np.linalg.qr(Y)
        return Y

    def rayleigh(Y):
        HY = H @ Y
        lam = np.einsum("ij,ij->j", Y, HY)
        order = np.argsort(lam)
        return lam[order], Y[:, order]

    Y = solve(J, None)
    lam, Y = rayleigh(Y)
    # verification: look for eigenvalues missed below lam[-1] (degenerate
    # multiplicities are invisible to a single Krylov sequence)
    for _ in range(Hh.size):
        if Y.shape[1] >= Hh.size:
            break
        extra = solve(1, Y)
        mu, Z = rayleigh(extra)
        if mu[0] >= lam[-1] - 1e-10 * max(1.0, abs(lam[-1])):
            break
        lam = np.concatenate([lam[:-1], mu])
        Y = np.column_stack([Y[:, :-1], Z])
        Y, _ = np.linalg.qr(Y)
        lam, Y = rayleigh(Y)
    # one Rayleigh-Ritz pass on the final block sharpens near-degenerate pairs
    Hs = Y.T @ (H @ Y)
    mu, S = np.linalg.eigh(0.5 * (Hs + Hs.T))
    return mu, Y @ S


def lowest_eigenpairs(Hh: SparseHamiltonian, J: int, tol: float = 1e-8, *,
                      method: str = "auto", dense_max: int = DENSE_MAX,
                      seed: int = 0, max_apply: int = 20000) -> list[EigenPair]:
    """The ``J`` lowest eigenpairs of ``Hh``, ascending.

    ``method`` is ``"dense"``, ``"lanczos"`` or ``"auto"`` (dense up to
    ``dense_max`` nodes).  Raises ConvergenceError when a residual exceeds
    ``tol`` or the Lanczos budget runs out.
    """
    if not 1 <= J <= Hh.size:
        raise DomainError(f"J must lie in [1, {Hh.size}], got {J}")
    if not tol > 0:
        raise DomainError(f"tol must be positive, got {tol}")
    if method not in ("auto", "dense", "lanczos"):
        raise DomainError(f"unknown method {method!r}")
    if method == "dense" or (method == "auto" and Hh.size <= dense_max):
        lam, X = _dense(Hh, J)
    else:
        lam, X = _krylov_pairs(Hh, J, tol, np.random.default_rng(seed), max_apply)
    pairs = _pairs_from(Hh, lam, X)
    res = np.array([p.residual for p in pairs])
    if np.any(res > tol):
        raise ConvergenceError(
            f"residuals up to {res.max():.3g} exceed tol {tol:.3g}", residuals=res
        )
    return pairs


def full_spectrum(Hh: SparseHamiltonian) -> list[EigenPair]:
    """All eigenpairs by dense ``eigh`` (small grids only)."""
    lam, X = sla.eigh(Hh.toarray())
    return _pairs_from(Hh, lam, X)


# ---------------------------------------------------------------------------
# subtraction-free factorization


def _row_sums(Hh: SparseHamiltonian) -> np.ndarray:
    """Exact row sums ``q_i + (#missing neighbours)/h^2`` of the M-matrix."""
    g = Hh.grid
    A = Hh.matrix
    degree = np.diff(A.indptr) - 1
    return Hh.potential + (2 * g.n - degree) / g.h ** 2


class MFactor:
    """``H = U^T D^-1 U`` computed without subtractions.

    ``U`` is upper triangular with bandwidth ``N^(n-1)``, stored in LAPACK
    band format; its off-diagonal entries are ``<= 0`` and its diagonal is
    ``D``.  Requires nonnegative row sums (``q >= 0``).
    """

    def __init__(self, Hh: SparseHamiltonian):
        g = Hh.grid
        size, b = g.size, g.N ** (g.n - 1)
        s = _row_sums(Hh).astype(float)
        if np.any(s < 0):
            raise DomainError("subtraction-free factorization needs q >= 0")
        # B[k, o] = |H[k, k + o]| for o = 1..b, fill-in included
        B = np.zeros((size + b + 1, b + 1))
        A = Hh.matrix.tocoo()
        upper = A.col > A.row
        B[A.row[upper], A.col[upper] - A.row[upper]] = -A.data[upper]
        d = np.empty(size)
        if b == 1:
            off = B[:, 1].tolist()
            sl = s.tolist()
            for k in range(size - 1):
                d[k] = sl[k] + off[k]
                sl[k + 1] += off[k] * sl[k] / d[k]
            d[size - 1] = sl[size - 1]
        else:
            o1, o2 = np.triu_indices(b, 1)
            o1, o2 = o1 + 1, o2 + 1
            offs = np.arange(1, b + 1)
            for k in range(size):
                u = B[k, 1:]
                d[k] = s[k] + u.sum()
                if k + 1 < size:
                    f = u / d[k]
                    nr = min(b, size - 1 - k)
                    s[k + 1:k + 1 + nr] += f[:nr] * s[k]
                    # fill-in between later rows i = k+o1 and j = k+o2
                    B[k + o1, o2 - o1] += f[o1 - 1] * u[o2 - 1]
        self.size, self.b = size, b
        self.d = d
        ab = np.zeros((b + 1, size))
        ab[b] = d
        for o in range(1, b + 1):
            ab[b - o, o:] = -B[:size - o, o]
        self.ab = ab

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """``H^-1 rhs``; entrywise relative accuracy when ``rhs >= 0``."""
        y, info = lapack.dtbtrs(self.ab, rhs.reshape(-1, 1), uplo="U", trans="T")
        if info != 0:
            raise np.linalg.LinAlgError(f"dtbtrs failed with info={info}")
        y = y[:, 0] * self.d
        x, info = lapack.dtbtrs(self.ab, y.reshape(-1, 1), uplo="U", trans="N")
        if info != 0:
            raise np.linalg.LinAlgError(f"dtbtrs failed with info={info}")
        return x[:, 0]


def refine_ground_state(Hh: SparseHamiltonian, phi0=None, rtol: float = 1e-14,
                        max_iter: int = 2000):
    """Inverse iteration for ``phi`` on the subtraction-free factor.

    Stops when ``max |phi_new / phi_old - 1| < rtol`` or when the change
    stops decreasing at rounding level.  Returns ``(phi, iterations)``.
    """
    F = MFactor(Hh)
    cell = Hh.grid.cell
    p = np.ones(Hh.size) if phi0 is None else np.maximum(np.abs(phi0), 0) + 0.0
    if np.any(p <= 0):
        p = np.ones(Hh.size)
    prev = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        pn = F.solve(p)
        pn /= math.sqrt(np.dot(pn, pn) * cell)
        with np.errstate(divide="ignore", invalid="ignore"):
            change = float(np.max(np.abs(pn / p - 1.0)))
        p = pn
        if change < rtol or (change < 1e-12 and change >= prev):
            break
        prev = change
    return p, it


def ground_state(Hh: SparseHamiltonian, tol: float = 1e-8, *, refine: bool = True,
                 pairs: list[EigenPair] | None = None,
                 refine_budget: float = REFINE_BUDGET, **kw) -> GroundState:
    """Positive ground state.  ``pairs`` may be passed to reuse a solve.

    Refinement runs when ``q >= 0`` and the banded elimination costs fewer
    than ``refine_budget`` flops.
    """
    if pairs is None:
        pairs = lowest_eigenpairs(Hh, min(2, Hh.size), tol, **kw)
    v = pairs[0].v
    if v.sum() < 0:
        v = -v
    E0 = pairs[0].lam
    gap = pairs[1].lam - E0 if len(pairs) > 1 else math.nan
    if len(pairs) > 1 and gap < GAP_TOL:
        warnings.warn(f"spectral gap {gap:.3g} is below {GAP_TOL}", GapWarning, stacklevel=2)
    g = Hh.grid
    cost = g.size * float(g.N ** (g.n - 1)) ** 2
    refined, iters = False, 0
    if refine and np.all(Hh.potential >= 0) and cost <= refine_budget:
        phi, iters = refine_ground_state(Hh, v)
        refined = True
    else:
        phi = v
    min_phi = float(phi.min())
    if not min_phi > 0:
        bad = int(np.argmin(phi))
        raise PositivityError(
            f"ground state is not positive: phi[{bad}] = {phi[bad]:.3g}"
            + ("" if refined else " (refinement skipped)")
        )
    return GroundState(E0=E0, phi=phi, min_phi=min_phi, gap=gap,
                       refined=refined, iterations=iters)


def write_pairs_csv(path, pairs) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["j", "lambda", "residual"])
        for j, p in enumerate(pairs, start=1):
            w.writerow([j, f"{p.lam:.17g}", f"{p.residual:.17g}"])
