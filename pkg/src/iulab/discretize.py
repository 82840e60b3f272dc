"""Tensor grids on [-L, L]^n and the finite-difference Hamiltonian.

Nodes are the ``N`` interior points per axis of a uniform partition of
``[-L, L]`` into ``N + 1`` cells, so ``h = 2L/(N + 1)`` and the Dirichlet
condition sits exactly on the box faces.  Node ``i`` has multi-index
``np.unravel_index(i, (N,) * n)``: lexicographic, first axis slowest.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import CapacityError, DomainError, ShapeError

DEFAULT_MAX_NODES = 1_000_000


@dataclass(frozen=True)
class Grid:
    n: int
    L: float
    N: int

    def __post_init__(self):
        if self.n not in (1, 2, 3):
            raise DomainError(f"dimension must be 1, 2 or 3, got {self.n}")
        if self.N < 3:
            raise DomainError(f"need at least 3 points per axis, got {self.N}")
        if not self.L > 0:
            raise DomainError(f"half-width must be positive, got {self.L}")

    @classmethod
    def from_spacing(cls, n: int, L: float, h: float) -> "Grid":
        """Grid whose spacing is as close to ``h`` as an integer ``N`` allows."""
        return cls(n, L, int(round(2 * L / h)) - 1)

    @property
    def h(self) -> float:
        return 2 * self.L / (self.N + 1)

    @property
    def cell(self) -> float:
        """Volume element ``h^n`` of the discrete inner product."""
        return self.h ** self.n

    @property
    def size(self) -> int:
        return self.N ** self.n

    @cached_property
    def axis(self) -> np.ndarray:
        return -self.L + self.h * np.arange(1, self.N + 1)

    @cached_property
    def coords(self) -> np.ndarray:
        """``(size, n)`` array of node coordinates."""
        mesh = np.meshgrid(*([self.axis] * self.n), indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])

    @cached_property
    def radius(self) -> np.ndarray:
        return np.sqrt(np.sum(self.coords ** 2, axis=1))

    def index(self, multi) -> int:
        return int(np.ravel_multi_index(tuple(multi), (self.N,) * self.n))

    def coord(self, i: int) -> np.ndarray:
        return self.axis[list(np.unravel_index(i, (self.N,) * self.n))]

    def interior_mask(self, margin: float) -> np.ndarray:
        """Nodes at sup-distance at least ``margin`` from the box faces."""
        far = self.L - np.max(np.abs(self.coords), axis=1)
        mask = far >= margin - 1e-12 * self.L
        if not mask.any():
            raise DomainError(f"margin {margin} leaves no interior nodes")
        return mask

    def center_index(self) -> int:
        return int(np.argmin(self.radius))

    def inner(self, u, v) -> float:
        """Discrete L^2 inner product ``sum u v h^n``."""
        return float(np.dot(u, v) * self.cell)

    def norm(self, u) -> float:
        return float(np.sqrt(self.inner(u, u)))


def laplacian_1d(N: int, h: float) -> sp.csr_matrix:
    """``-d^2/dx^2`` with zero Dirichlet data: ``tridiag(-1, 2, -1) / h^2``."""
    a = 1.0 / (h * h)
    return sp.diags([-a * np.ones(N - 1), 2 * a * np.ones(N), -a * np.ones(N - 1)],
                    [-1, 0, 1], format="csr")


@dataclass(frozen=True)
class SparseHamiltonian:
    """``-Delta_h + diag(q)``; immutable after assembly."""

    grid: Grid
    matrix: sp.csr_matrix
    potential: np.ndarray

    @property
    def size(self) -> int:
        return self.grid.size

    @property
    def diag(self) -> np.ndarray:
        return self.matrix.diagonal()

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


def _potential_values(grid: Grid, spec) -> np.ndarray:
    q = spec.q if hasattr(spec, "q") else spec
    x = grid.coords if grid.n > 1 else grid.coords[:, 0]
    vals = np.asarray(q(x), dtype=float).reshape(-1)
    if vals.size == 1 and grid.size > 1:
        vals = np.full(grid.size, float(vals[0]))
    if vals.shape != (grid.size,):
        raise ShapeError(f"potential returned shape {vals.shape}, expected ({grid.size},)")
    if not np.all(np.isfinite(vals)):
        raise DomainError("potential is not finite on the grid")
    return vals


def assemble(grid: Grid, spec, max_nodes: int = DEFAULT_MAX_NODES) -> SparseHamiltonian:
    """Assemble the ``2n + 1``-point Hamiltonian for ``spec.q`` (or a bare callable)."""
    if grid.size > max_nodes:
        raise CapacityError(f"{grid.size} nodes exceed the budget of {max_nodes}")
    q = _potential_values(grid, spec)
    T = laplacian_1d(grid.N, grid.h)
    eye = sp.identity(grid.N, format="csr")
    lap = sp.csr_matrix((grid.size, grid.size))
    for ax in range(grid.n):
        factors = [T if j == ax else eye for j in range(grid.n)]
        term = factors[0]
        for f in factors[1:]:
            term = sp.kron(term, f, format="csr")
        lap = lap + term
    H = (lap + sp.diags(q, 0, format="csr")).tocsr()
    H.sort_indices()
    return SparseHamiltonian(grid=grid, matrix=H, potential=q)


def matvec(Hh: SparseHamiltonian, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (Hh.size,):
        raise ShapeError(f"vector of shape {u.shape} does not match {Hh.size} nodes")
    return Hh.matrix @ u


def write_node_csv(path, grid: Grid, columns: dict) -> None:
    """Write node vectors as ``index, x0[, x1, x2], <name>...`` rows."""
    names = list(columns)
    for name in names:
        if np.shape(columns[name]) != (grid.size,):
            raise ShapeError(f"column {name!r} has the wrong length")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index"] + [f"x{j}" for j in range(grid.n)] + names)
        for i in range(grid.size):
            w.writerow([i] + [f"{c:.17g}" for c in grid.coords[i]]
                       + [f"{columns[k][i]:.17g}" for k in names])
