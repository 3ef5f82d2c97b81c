"""Iterative reallocation of a symmetric non-negative field onto a new marginal.

Starting from ``phi`` with marginal ``rho``, every step multiplies ``phi`` by
``sqrt(1 - S)`` where ``S`` averages, over the particles, the relative excess
``(sigma - rho_n) / sigma`` of the current marginal on the set where it
exceeds the target. The iterates decrease monotonically; after the limit a
product-form term restores the missing mass so that the output has marginal
exactly ``rho_n``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Optional

import numpy as np

from . import _kernels
from .errors import ConvergenceError, DensityError, MassDefectError
from .grid import (
    GridSpec,
    check_density,
    check_finite,
    embed,
    integrate,
    marginal,
    product_field,
)

DEFAULT_TOL = 1e-10
Q_FLOOR = 1e-14
SIGMA_FLOOR = 1e-300
MAX_MASS_DEFECT = 1e-8

Trace = Optional[Callable[..., None]]


@dataclass
class ReallocState:
    k: int
    phi_k: np.ndarray
    sigma_k: np.ndarray
    excess_mask: np.ndarray


@dataclass
class ReallocResult:
    phi_inf: np.ndarray
    sigma_inf: np.ndarray
    q_n: float
    phi_out: np.ndarray
    iterations: int
    residual: float
    mass_defect: float
    alpha: np.ndarray
    mass_loss: float  # ||phi||^2 - ||phi_inf||^2


def excess_set(sigma, rho_n) -> np.ndarray:
    """Nodes where the current marginal strictly exceeds the target."""
    return np.asarray(sigma) > np.asarray(rho_n)


def shrink_ratio(sigma, rho_n, mask) -> np.ndarray:
    """One-particle factor ``(sigma - rho_n) / sigma`` on the mask, 0 elsewhere."""
    sigma = np.asarray(sigma, dtype=float)
    rho_n = np.asarray(rho_n, dtype=float)
    if np.any(sigma[mask] < SIGMA_FLOOR):
        raise AssertionError("marginal underflow on the excess set")
    t = np.zeros_like(sigma)
    t[mask] = (sigma[mask] - rho_n[mask]) / sigma[mask]
    return t


def shrink_factor(grid: GridSpec, sigma, rho_n, mask) -> np.ndarray:
    """The configuration-space factor ``S(X) = mean_j t(x_j)``."""
    t = shrink_ratio(sigma, rho_n, mask)
    s = np.zeros(grid.config_shape)
    for j in range(grid.N):
        s = s + embed(grid, t, j)
    return s / grid.N


def excess_residual(grid: GridSpec, sigma, rho_n, mask=None) -> float:
    """``integral over the excess set of (sigma - rho_n)``."""
    if mask is None:
        mask = excess_set(sigma, rho_n)
    return float(grid.h ** grid.d * np.sum((sigma - rho_n)[mask]))


def initial_state(grid: GridSpec, phi, rho_n) -> ReallocState:
    phi = _as_nonnegative(phi)
    sigma = marginal(grid, phi)
    return ReallocState(0, phi, sigma, excess_set(sigma, rho_n))


def realloc_step(grid: GridSpec, state: ReallocState, rho_n) -> ReallocState:
    """Advance one iterate; the marginal is recomputed from the new field."""
    t = shrink_ratio(state.sigma_k, rho_n, state.excess_mask)
    flat, sigma_raw = _kernels.realloc_sweep(
        state.phi_k.reshape(-1), t.reshape(-1), grid.N)
    phi = flat.reshape(grid.config_shape)
    sigma = grid.h ** ((grid.N - 1) * grid.d) * sigma_raw.reshape(grid.scalar_shape)
    return ReallocState(state.k + 1, phi, sigma, excess_set(sigma, rho_n))


def realloc_iterates(grid: GridSpec, phi, rho_n) -> Iterator[ReallocState]:
    """Endless stream of iterates, starting with ``k = 0``."""
    state = initial_state(grid, phi, rho_n)
    while True:
        yield state
        state = realloc_step(grid, state, rho_n)


def default_k_max(N: int, tol: float) -> int:
    return math.ceil(math.log(tol / 2.0) / math.log((N - 1) / N)) + 16


def realloc_limit(grid: GridSpec, phi, rho_n, tol: float = DEFAULT_TOL,
                  k_max: int | None = None, trace: Trace = None):
    """Iterate until the excess is below ``tol``.

    Stops once both the integrated excess and its pointwise maximum are at
    most ``tol``. Returns ``(phi_inf, sigma_inf, iterations, residual)``.

    Raises
    ------
    ConvergenceError
        If ``k_max`` steps do not bring the excess below ``tol``.
    """
    rho_n = np.asarray(rho_n, dtype=float)
    if k_max is None:
        k_max = default_k_max(grid.N, tol)
    for state in realloc_iterates(grid, phi, rho_n):
        if state.k == 0:
            check_density(grid, state.sigma_k, name="marginal of phi")
        residual = excess_residual(grid, state.sigma_k, rho_n, state.excess_mask)
        deficit = rho_n - state.sigma_k
        if trace is not None:
            trace("realloc", state.k, residual, integrate(grid, state.phi_k ** 2),
                  float(deficit.min()))
        if residual <= tol and -float(deficit.min()) <= tol:
            return state.phi_k, state.sigma_k, state.k, residual
        if state.k >= k_max:
            raise ConvergenceError(
                f"excess {residual:.3e} above tol {tol:.1e} after {state.k} steps",
                residual, state.k)


def correction(grid: GridSpec, sigma_inf, rho_n, q_floor: float = Q_FLOOR):
    """Product-form refill ``alpha`` of the deficit ``rho_n - sigma_inf``.

    The deficit is clamped at zero first. Returns ``(alpha, q_n)``; below
    ``q_floor`` the refill is dropped and ``(0, 0.0)`` returned.
    """
    g = np.maximum(np.asarray(rho_n) - np.asarray(sigma_inf), 0.0)
    q = float(integrate(grid, g))
    if q <= q_floor:
        return np.zeros(grid.config_shape), 0.0
    alpha = product_field(grid, g) / q ** (grid.N - 1)
    return alpha, q


def l2_match(grid: GridSpec, phi, rho_n, tol: float = DEFAULT_TOL, k_max: int | None = None,
             q_floor: float = Q_FLOOR, max_mass_defect: float = MAX_MASS_DEFECT,
             trace: Trace = None) -> ReallocResult:
    """Build a symmetric field with marginal ``rho_n`` close to ``phi`` in L2.

    ``phi`` must be symmetric, non-negative and of unit L2 mass. The output
    is ``sqrt(phi_inf**2 + alpha)`` rescaled to unit mass; the size of that
    rescaling is reported as ``mass_defect``.
    """
    rho_n = check_density(grid, rho_n, name="rho_n")
    phi = _as_nonnegative(phi)
    mass0 = integrate(grid, phi ** 2)
    if abs(mass0 - 1.0) > 1e-12:
        raise DensityError(f"phi has L2 mass {mass0!r}, expected 1")
    phi_inf, sigma_inf, iterations, residual = realloc_limit(
        grid, phi, rho_n, tol=tol, k_max=k_max, trace=trace)
    alpha, q = correction(grid, sigma_inf, rho_n, q_floor=q_floor)
    out = np.sqrt(phi_inf ** 2 + alpha)
    mass = integrate(grid, out ** 2)
    defect = abs(mass - 1.0)
    if defect > max_mass_defect:
        raise MassDefectError(f"mass defect {defect:.3e} exceeds {max_mass_defect:.1e}")
    out = out / math.sqrt(mass)
    return ReallocResult(
        phi_inf=phi_inf, sigma_inf=sigma_inf, q_n=q, phi_out=out,
        iterations=iterations, residual=residual, mass_defect=defect, alpha=alpha,
        mass_loss=float(mass0 - integrate(grid, phi_inf ** 2)))


def _as_nonnegative(phi):
    phi = np.asarray(phi, dtype=float)
    check_finite(phi, "phi")
    if np.any(phi < 0):
        raise DensityError(f"phi must be non-negative (min {phi.min():.3e})")
    return np.abs(phi)
