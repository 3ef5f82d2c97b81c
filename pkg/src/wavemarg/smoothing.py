"""Marginal-preserving Gaussian smoothing of configuration fields.

``theta_eps`` mollifies the measure ``|u|^2 dX`` with a product Gaussian and
then pulls the result back through a plan whose one-particle marginals are
the original ``rho[u]``, so the smoothed field has exactly the marginal of
``u``. The plan lives on the square of the product grid; we never form it
and instead use the factorisation

    Theta(X) = prod_j rho(x_j) * (G * phi_eps)(X),
    G(Y)     = Lambda(Y) / prod_j rho_eps(y_j),

which costs two separable convolutions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import convolve1d

from .errors import (
    ArgumentError,
    ConsistencyError,
    DivisionFloorError,
    LeakageError,
    ResolutionError,
    ScheduleIncompleteError,
)
from .grid import (
    GridSpec,
    embed,
    h1_norm,
    integrate,
    marginal,
    measure_marginal,
    product_field,
)

R_TRUNC = 6.0
DIVISION_FLOOR = 1e-300
MAX_LEAKAGE = 1e-8
DUAL_PATH_TOL = 1e-9


@dataclass(frozen=True)
class Mollifier:
    """Discrete one-axis Gaussian; the full kernel is its tensor power."""

    epsilon: float
    grid: GridSpec
    stencil: np.ndarray

    @property
    def radius(self) -> int:
        return (self.stencil.size - 1) // 2

    @classmethod
    def identity(cls, grid: GridSpec) -> "Mollifier":
        """Single-tap stencil: convolution becomes the identity."""
        return cls(0.0, grid, np.array([1.0 / grid.h]))

    def offsets(self) -> np.ndarray:
        return np.arange(-self.radius, self.radius + 1) * self.grid.h

    def second_moment(self) -> float:
        return float(np.sum(self.offsets() ** 2 * self.stencil) * self.grid.h)


@dataclass
class SmoothingOutput:
    u_eps: np.ndarray
    theta: np.ndarray
    rho_eps: np.ndarray
    marginal_error: float
    leakage: float


def gauss_stencil(epsilon: float, grid: GridSpec, r_trunc: float = R_TRUNC) -> Mollifier:
    """Sampled Gaussian of variance ``epsilon``, cut at ``r_trunc`` standard
    deviations and rescaled to unit discrete mass.

    Raises :class:`ResolutionError` unless the standard deviation exceeds
    one grid spacing.
    """
    if not epsilon > 0:
        raise ArgumentError(f"epsilon must be positive, got {epsilon}")
    std = math.sqrt(epsilon)
    if std <= grid.h:
        raise ResolutionError(
            f"sqrt(epsilon) = {std:.4g} does not exceed the spacing h = {grid.h:.4g}")
    radius = min(int(math.floor(r_trunc * std / grid.h)), grid.M - 1)
    z = np.arange(-radius, radius + 1) * grid.h
    s = np.exp(-z * z / (2.0 * epsilon)) / math.sqrt(2.0 * math.pi * epsilon)
    s = s / (s.sum() * grid.h)
    return Mollifier(float(epsilon), grid, s)


def convolve_axes(f, m: Mollifier, axes=None) -> np.ndarray:
    """Zero-padded convolution with the stencil along each listed axis."""
    out = np.asarray(f, dtype=float)
    if axes is None:
        axes = range(out.ndim)
    weights = m.stencil * m.grid.h
    for a in axes:
        out = convolve1d(out, weights, axis=a, mode="constant", cval=0.0)
    return out


def lambda_eps(grid: GridSpec, u, m: Mollifier) -> np.ndarray:
    """``|u|^2`` convolved with the product kernel."""
    return convolve_axes(np.abs(np.asarray(u)) ** 2, m)


def _rho_eps_paths(grid, rho, lam, m):
    direct = convolve_axes(rho, m)
    via_plan = measure_marginal(grid, lam)
    gap = float(np.max(np.abs(direct - via_plan)))
    if gap > DUAL_PATH_TOL:
        raise ConsistencyError(f"smoothed marginal paths disagree by {gap:.3e}")
    return direct, via_plan


def rho_eps(grid: GridSpec, u, m: Mollifier) -> np.ndarray:
    """Marginal of the mollified measure, computed two ways and cross-checked.

    Returns ``rho[u] * eta_eps``; raises :class:`ConsistencyError` if the
    marginal of ``lambda_eps(u)`` differs from it by more than ``1e-9``.
    """
    lam = lambda_eps(grid, u, m)
    direct, _ = _rho_eps_paths(grid, marginal(grid, u), lam, m)
    return direct


def theta_eps(grid: GridSpec, u, m: Mollifier, floor: float = DIVISION_FLOOR,
              max_leakage: float = MAX_LEAKAGE) -> SmoothingOutput:
    u = np.asarray(u)
    rho = marginal(grid, u)
    lam = lambda_eps(grid, u, m)
    mass = integrate(grid, np.abs(u) ** 2)
    leakage = float(abs(mass - integrate(grid, lam)))
    if leakage > max_leakage:
        raise LeakageError(f"convolution leaked {leakage:.3e} of mass through the boundary")
    r_eps, _ = _rho_eps_paths(grid, rho, lam, m)

    carries = lam > 0
    g = lam.copy()
    for j in range(grid.N):
        denom = np.broadcast_to(embed(grid, r_eps, j), grid.config_shape)
        if np.any(carries & (denom < floor)):
            raise DivisionFloorError(
                f"smoothed marginal below {floor:.0e} where the plan carries mass")
        np.divide(g, denom, out=g, where=carries)
    g[~carries] = 0.0

    theta = product_field(grid, rho) * convolve_axes(g, m)
    marg = measure_marginal(grid, theta)
    err = float(np.sum(np.abs(marg - rho)) / np.sum(rho))
    return SmoothingOutput(np.sqrt(theta), theta, r_eps, err, leakage)


def smooth_sqrt(grid: GridSpec, u, m: Mollifier) -> np.ndarray:
    return theta_eps(grid, u, m).u_eps


def default_levels(K: int) -> list[float]:
    return [2.0 ** -k for k in range(1, K + 1)]


@dataclass
class Schedule:
    pairs: list            # (n, epsilon), n counted from 1
    starts: list           # N_k per level, 1-based
    distances: np.ndarray  # [level, n-1]: H1 gap between smoothed phi_n and phi
    smoothed: dict         # (n, level) -> smoothed phi_n
    reference: list        # per level, smoothed phi


def build_schedule(grid: GridSpec, phi_seq, phi, eps_levels, delta: float = 1.0,
                   r_trunc: float = R_TRUNC, trace=None) -> Schedule:
    """Diagonal pairing of sequence index and smoothing level.

    For level ``k`` the start ``N_k`` is the smallest index (not below
    ``N_{k-1}``) from which every later term stays within
    ``delta * eps_levels[k]`` of the smoothed limit in H1.
    """
    levels = [float(e) for e in eps_levels]
    if not levels:
        raise ArgumentError("eps_levels must not be empty")
    if any(b >= a for a, b in zip(levels, levels[1:])):
        raise ArgumentError("eps_levels must be strictly decreasing")
    phi_seq = list(phi_seq)
    if not phi_seq:
        raise ArgumentError("phi_seq must not be empty")

    count = len(phi_seq)
    dist = np.empty((len(levels), count))
    smoothed = {}
    reference = []
    for k, eps in enumerate(levels):
        m = gauss_stencil(eps, grid, r_trunc)
        ref = smooth_sqrt(grid, phi, m)
        reference.append(ref)
        for i, phi_n in enumerate(phi_seq):
            out = theta_eps(grid, phi_n, m)
            smoothed[(i + 1, k)] = out.u_eps
            dist[k, i] = h1_norm(grid, out.u_eps - ref)
            if trace is not None:
                trace("smooth", eps, out.marginal_error, dist[k, i])

    starts = []
    previous = 1
    for k, eps in enumerate(levels):
        ok = dist[k] <= delta * eps
        start = None
        for i in range(previous, count + 1):
            if ok[i - 1:].all():
                start = i
                break
        if start is None:
            achieved = list(zip(levels[:k], starts))
            raise ScheduleIncompleteError(
                f"level {eps:g} has no admissible start within {count} terms", achieved)
        starts.append(start)
        previous = start

    pairs = []
    for n in range(1, count + 1):
        level = 0
        for k, start in enumerate(starts):
            if start <= n:
                level = k
        pairs.append((n, levels[level]))
    return Schedule(pairs, starts, dist, smoothed, reference)


def diagonal_schedule(grid: GridSpec, phi_seq, phi, eps_levels, delta: float = 1.0):
    """List of ``(n, epsilon)`` pairs; see :func:`build_schedule`."""
    return build_schedule(grid, phi_seq, phi, eps_levels, delta).pairs
