"""Uniform cell-midpoint grids on [-L, L]^d and their N-fold products.

Fields are plain numpy arrays. A scalar field on the one-particle grid has
shape ``(M,) * d``; a configuration field on the product grid has shape
``(M,) * (N * d)``, with particle ``j`` owning axes ``j*d .. j*d + d - 1``.
Every array is row-major, so flattening reproduces the on-disk order.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels import grad_sq_sum
from .errors import DensityError, GridArgumentError, GridSizeError, SymmetryError

#: Largest admissible number of product-grid nodes (8 bytes each).
DEFAULT_MAX_NODES = 2 ** 24

DENSITY_RTOL = 1e-12
MARGINAL_AGREEMENT = 1e-10


@dataclass(frozen=True)
class GridSpec:
    d: int
    N: int
    L: float
    M: int
    h: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "h", 2.0 * self.L / self.M)

    @property
    def scalar_shape(self) -> tuple[int, ...]:
        return (self.M,) * self.d

    @property
    def config_shape(self) -> tuple[int, ...]:
        return (self.M,) * (self.N * self.d)

    @property
    def n_config_nodes(self) -> int:
        return self.M ** (self.N * self.d)

    @property
    def block(self) -> int:
        """Number of one-particle nodes, ``M**d``."""
        return self.M ** self.d

    def nodes(self) -> np.ndarray:
        """Cell-midpoint coordinates along one axis."""
        return -self.L + (np.arange(self.M) + 0.5) * self.h

    def scalar_coords(self) -> list[np.ndarray]:
        """Broadcastable coordinate arrays ``x[a]`` on the one-particle grid."""
        x = self.nodes()
        out = []
        for a in range(self.d):
            shape = [1] * self.d
            shape[a] = self.M
            out.append(x.reshape(shape))
        return out

    def config_coords(self) -> list[list[np.ndarray]]:
        """``coords[j][a]``: coordinate ``a`` of particle ``j``, broadcastable."""
        x = self.nodes()
        n_axes = self.N * self.d
        out = []
        for j in range(self.N):
            row = []
            for a in range(self.d):
                shape = [1] * n_axes
                shape[j * self.d + a] = self.M
                row.append(x.reshape(shape))
            out.append(row)
        return out

    def config_radius(self) -> float:
        """Largest Euclidean norm of a product-grid node."""
        return math.sqrt(self.N * self.d) * (self.L - 0.5 * self.h)


def make_grid(d: int, N: int, L: float, M: int, max_nodes: int = DEFAULT_MAX_NODES) -> GridSpec:
    """Build a grid, rejecting bad parameters and oversized product grids."""
    if int(d) != d or int(N) != N or int(M) != M:
        raise GridArgumentError("d, N and M must be integers")
    if d < 1 or N < 2:
        raise GridArgumentError(f"need d >= 1 and N >= 2, got d={d}, N={N}")
    if M < 2:
        raise GridArgumentError(f"need M >= 2, got {M}")
    if not (L > 0 and math.isfinite(L)):
        raise GridArgumentError(f"need finite L > 0, got {L}")
    size = int(M) ** (int(N) * int(d))
    if size > max_nodes:
        raise GridSizeError(f"product grid has {size} nodes, budget is {max_nodes}")
    return GridSpec(int(d), int(N), float(L), int(M))


def _check_ndim(grid, f):
    if f.ndim not in (grid.d, grid.N * grid.d) or any(s != grid.M for s in f.shape):
        raise GridArgumentError(
            f"field of shape {f.shape} does not live on the grid (M={grid.M}, d={grid.d}, N={grid.N})")


def integrate(grid: GridSpec, f) -> float:
    """Midpoint quadrature of a scalar or configuration field."""
    f = np.asarray(f)
    _check_ndim(grid, f)
    return grid.h ** f.ndim * f.sum()


def l2_norm(grid: GridSpec, f) -> float:
    f = np.asarray(f)
    _check_ndim(grid, f)
    return math.sqrt(grid.h ** f.ndim * float(np.sum(np.abs(f) ** 2)))


def h1_seminorm(grid: GridSpec, f) -> float:
    """L2 norm of the forward-difference gradient, zero-extended past the box."""
    f = np.asarray(f)
    _check_ndim(grid, f)
    return math.sqrt(grid.h ** (f.ndim - 2) * grad_sq_sum(f))


def h1_norm(grid: GridSpec, f) -> float:
    return math.hypot(l2_norm(grid, f), h1_seminorm(grid, f))


def forward_gradient(grid: GridSpec, f) -> list[np.ndarray]:
    """Per-axis forward differences with zero extension, divided by ``h``."""
    f = np.asarray(f)
    return [np.diff(f, axis=a, append=0) / grid.h for a in range(f.ndim)]


def particle_marginals(grid: GridSpec, u) -> list[np.ndarray]:
    """Marginal of ``|u|**2`` onto each particle block in turn."""
    w = np.abs(np.asarray(u)) ** 2
    n_axes = grid.N * grid.d
    scale = grid.h ** ((grid.N - 1) * grid.d)
    out = []
    for j in range(grid.N):
        keep = set(range(j * grid.d, (j + 1) * grid.d))
        axes = tuple(a for a in range(n_axes) if a not in keep)
        out.append(scale * w.sum(axis=axes))
    return out


def marginal(grid: GridSpec, u, check: bool = True) -> np.ndarray:
    """Single-particle density of ``|u|**2``.

    Integrates out the last ``N - 1`` particle blocks. With ``check`` the
    marginals onto every block are compared and a :class:`SymmetryError`
    is raised when they differ by more than ``1e-10``.
    """
    u = np.asarray(u)
    _check_ndim(grid, u)
    if u.ndim != grid.N * grid.d:
        raise GridArgumentError("marginal expects a configuration field")
    if not check:
        return measure_marginal(grid, np.abs(u) ** 2)
    margs = particle_marginals(grid, u)
    spread = max(float(np.max(np.abs(m - margs[0]))) for m in margs[1:])
    if spread > MARGINAL_AGREEMENT:
        raise SymmetryError(f"per-particle marginals differ by {spread:.3e}")
    return margs[0]


def measure_marginal(grid: GridSpec, w) -> np.ndarray:
    """First-particle marginal of a density ``w`` given directly (not squared)."""
    w = np.asarray(w)
    flat = w.reshape(grid.block, -1).sum(axis=1)
    return grid.h ** ((grid.N - 1) * grid.d) * flat.reshape(grid.scalar_shape)


def _block_permutation(grid, perm):
    axes = []
    for j in perm:
        axes.extend(range(j * grid.d, (j + 1) * grid.d))
    return axes


def symmetry_defect(grid: GridSpec, u) -> float:
    """Max-norm change of ``u`` under adjacent particle transpositions."""
    u = np.asarray(u)
    worst = 0.0
    for j in range(grid.N - 1):
        perm = list(range(grid.N))
        perm[j], perm[j + 1] = perm[j + 1], perm[j]
        swapped = np.transpose(u, _block_permutation(grid, perm))
        worst = max(worst, float(np.max(np.abs(u - swapped))))
    return worst


def symmetrize(grid: GridSpec, u) -> np.ndarray:
    """Average of ``u`` over all ``N!`` particle permutations (``N <= 3``)."""
    if grid.N > 3:
        raise GridArgumentError("symmetrize supports N <= 3 only")
    u = np.asarray(u)
    perms = list(itertools.permutations(range(grid.N)))
    acc = np.zeros_like(u)
    for perm in perms:
        acc = acc + np.transpose(u, _block_permutation(grid, perm))
    acc = acc / len(perms)
    # Summation order differs between permuted copies; read every node from
    # its sorted-block representative so the result is exactly symmetric.
    return _exact_symmetric(grid, acc)


def _exact_symmetric(grid, u):
    shape = (grid.block,) * grid.N
    idx = np.sort(np.indices(shape).reshape(grid.N, -1), axis=0)
    flat = u.reshape(shape)[tuple(idx)]
    return flat.reshape(u.shape)


def embed(grid: GridSpec, g, j: int) -> np.ndarray:
    """View a one-particle field as a function of particle ``j`` on the product grid."""
    g = np.asarray(g)
    shape = [1] * (grid.N * grid.d)
    shape[j * grid.d:(j + 1) * grid.d] = grid.scalar_shape
    return g.reshape(shape)


def product_field(grid: GridSpec, g) -> np.ndarray:
    """``prod_j g(x_j)`` on the full product grid."""
    out = embed(grid, g, 0)
    for j in range(1, grid.N):
        out = out * embed(grid, g, j)
    return np.broadcast_to(out, grid.config_shape).copy()


def check_finite(f, name="field"):
    if not np.all(np.isfinite(f)):
        raise DensityError(f"{name} contains non-finite values")


def check_density(grid: GridSpec, rho, rtol: float = DENSITY_RTOL, name="density") -> np.ndarray:
    """Validate a one-particle density: finite, non-negative, unit mass."""
    rho = np.asarray(rho, dtype=float)
    if rho.shape != grid.scalar_shape:
        raise DensityError(f"{name} has shape {rho.shape}, expected {grid.scalar_shape}")
    check_finite(rho, name)
    if np.any(rho < 0):
        raise DensityError(f"{name} has negative values (min {rho.min():.3e})")
    mass = integrate(grid, rho)
    if abs(mass - 1.0) > rtol:
        raise DensityError(f"{name} has mass {mass!r}, expected 1")
    return rho


def sqrt_density_h1_distance(grid: GridSpec, rho1, rho2) -> float:
    return h1_norm(grid, np.sqrt(rho1) - np.sqrt(rho2))


def sqrt_density_l2_distance(grid: GridSpec, rho1, rho2) -> float:
    return l2_norm(grid, np.sqrt(rho1) - np.sqrt(rho2))
