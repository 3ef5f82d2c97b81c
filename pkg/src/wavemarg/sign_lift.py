"""Signs of real wavefunctions, their smooth approximants and the circle lift.

A real ``psi`` factors as ``e * |psi|`` with ``e`` in {-1, +1}. The sign is
smoothed by a radial cut-off followed by a compactly supported mollifier,
which keeps values in [-1, 1]. The map ``omega(s) = exp(i (1 - s) pi / 2)``
sends [-1, 1] onto the upper half circle, fixes +1 and -1, and is
``pi/2``-Lipschitz, so ``omega(e_n) * phi_n`` has modulus ``phi_n`` and
therefore the same marginal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, RangeError, ResolutionError, SubsequenceError
from .grid import GridSpec, h1_norm, l2_norm
from .smoothing import Mollifier, convolve_axes

SIGN_FLOOR = 1e-13
LIFT_SLACK = 1e-12
OMEGA_LIP = math.pi / 2


@dataclass
class SignField:
    e: np.ndarray
    lam: np.ndarray  # |psi|, the weight of the Sobolev space e lives in


@dataclass
class SmoothedSign:
    e_n: np.ndarray
    lip: float
    n: int
    epsilon: float
    weighted_distance: float = float("nan")


def extract_sign(psi) -> SignField:
    """Sign of ``psi``; +1 wherever ``|psi|`` is below ``1e-13 * max|psi|``."""
    psi = np.asarray(psi)
    if np.iscomplexobj(psi):
        raise ArgumentError("extract_sign expects a real field")
    lam = np.abs(psi)
    floor = SIGN_FLOOR * float(lam.max()) if lam.size else 0.0
    e = np.where(lam > floor, np.sign(psi), 1.0)
    return SignField(e.astype(float), lam)


def central_gradient(grid: GridSpec, f) -> list[np.ndarray]:
    f = np.asarray(f, dtype=float)
    return [np.gradient(f, grid.h, axis=a) for a in range(f.ndim)]


def weighted_gradient_residual(grid: GridSpec, f, lam, test) -> float:
    """Defect of the weak identity defining a zero weighted gradient.

    Per axis ``a`` this is ``int f d_a(test) lam^2 + 2 int f test lam d_a(lam)``
    (central differences); the Euclidean norm over axes is returned. It
    vanishes when ``f`` has zero gradient with respect to ``lam^2 dX``.
    """
    f = np.asarray(f, dtype=float)
    lam = np.asarray(lam, dtype=float)
    dtest = central_gradient(grid, test)
    dlam = central_gradient(grid, lam)
    vol = grid.h ** f.ndim
    parts = [vol * np.sum(f * dt * lam ** 2 + 2.0 * f * test * lam * dl)
             for dt, dl in zip(dtest, dlam)]
    return math.sqrt(sum(p * p for p in parts))


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def cutoff_unit(grid: GridSpec, n_max: int) -> float:
    return grid.config_radius() / (n_max + 1)


def cutoff(grid: GridSpec, n: int, n_max: int) -> np.ndarray:
    """Radial cut-off: 1 inside radius ``(n-1) r``, 0 outside ``n r``.

    ``r = config_radius / (n_max + 1)``; the cubic transition has slope at
    most ``1.5 / r``.
    """
    if n < 1:
        raise ArgumentError(f"cut-off index must be >= 1, got {n}")
    r_unit = cutoff_unit(grid, n_max)
    r2 = np.zeros(grid.config_shape)
    for row in grid.config_coords():
        for x in row:
            r2 = r2 + x * x
    r = np.sqrt(r2)
    return 1.0 - _smoothstep((r - (n - 1) * r_unit) / r_unit)


def bump_stencil(width: float, grid: GridSpec) -> Mollifier:
    """Compact C^2 bump ``(1 - (z/width)^2)^2`` on ``|z| < width``, unit discrete mass."""
    if width < 2 * grid.h:
        raise ResolutionError(f"bump width {width:.4g} is below 2h = {2 * grid.h:.4g}")
    radius = min(int(math.floor(width / grid.h)), grid.M - 1)
    z = np.arange(-radius, radius + 1) * grid.h
    s = np.clip(1.0 - (z / width) ** 2, 0.0, None) ** 2
    s = s / (s.sum() * grid.h)
    return Mollifier(float(width), grid, s)


def interior_gradient(grid: GridSpec, f) -> list[np.ndarray]:
    """Forward differences with no contribution past the last node."""
    f = np.asarray(f, dtype=float)
    out = []
    for a in range(f.ndim):
        d = np.diff(f, axis=a) / grid.h
        pad = [(0, 0)] * f.ndim
        pad[a] = (0, 1)
        out.append(np.pad(d, pad))
    return out


def lipschitz_estimate(grid: GridSpec, f) -> float:
    g2 = sum(g * g for g in interior_gradient(grid, f))
    return float(np.sqrt(np.max(g2)))


def weighted_h1_distance(grid: GridSpec, e_n, e, c, lam) -> float:
    """Distance of ``e_n`` from ``e * c`` in H1(lam^2 dX).

    The weighted gradient of ``e * c`` is ``e * grad(c)`` since ``e`` has no
    weighted gradient.
    """
    w = np.asarray(lam) ** 2
    vol = grid.h ** w.ndim
    total = np.sum((e_n - e * c) ** 2 * w)
    for gn, gc in zip(interior_gradient(grid, e_n), interior_gradient(grid, c)):
        total += np.sum((gn - e * gc) ** 2 * w)
    return math.sqrt(vol * float(total))


def smooth_sign(grid: GridSpec, sign: SignField, n: int, epsilon: float,
                n_max: int) -> SmoothedSign:
    """``J_epsilon * (e * c_n)`` clipped to [-1, 1], with its Lipschitz estimate."""
    J = bump_stencil(epsilon, grid)
    c = cutoff(grid, n, n_max)
    e_n = np.clip(convolve_axes(sign.e * c, J), -1.0, 1.0)
    dist = weighted_h1_distance(grid, e_n, sign.e, c, sign.lam)
    return SmoothedSign(e_n, lipschitz_estimate(grid, e_n), n, float(epsilon), dist)


def sign_width_candidates(grid: GridSpec, largest: float | None = None) -> list[float]:
    """Dyadic bump widths from ``largest`` (default L/2) down to the ``2h`` floor."""
    width = grid.L / 2 if largest is None else largest
    out = []
    while width >= 2 * grid.h:
        out.append(width)
        width /= 2
    if not out:
        out.append(2 * grid.h)
    return out


def select_smoothed_sign(grid: GridSpec, sign: SignField, n: int, n_max: int,
                         widths=None) -> SmoothedSign:
    """Largest width meeting ``weighted distance <= 2**-n``, else the narrowest."""
    widths = sign_width_candidates(grid) if widths is None else list(widths)
    best = None
    for width in widths:
        best = smooth_sign(grid, sign, n, width, n_max)
        if best.weighted_distance <= 2.0 ** -n:
            return best
    return best


def subsequence_starts(M, a) -> list[int]:
    """Thresholds ``K(1) < K(2) < ...`` (1-based) of the index selection.

    ``K(n)`` is the first ``k`` after ``K(n-1)`` with ``M_n a_j < 2**-n`` for
    every ``j >= k`` in the list; the scan stops at the first ``n`` without one.
    """
    M = [float(v) for v in M]
    a = [float(v) for v in a]
    starts = []
    previous = 0
    for n in range(1, len(M) + 1):
        bound = 2.0 ** -n
        ok = [M[n - 1] * ak < bound for ak in a]
        found = None
        for k in range(previous + 1, len(a) + 1):
            if all(ok[k - 1:]):
                found = k
                break
        if found is None:
            break
        starts.append(found)
        previous = found
    return starts


def subsequence_select(M, a) -> list[int]:
    """Indices ``n_k`` (1-based, one per entry of ``a``) pairing ``M`` with ``a``.

    ``n_k = 1`` before ``K(1)`` and ``n_k = n`` on ``K(n) <= k < K(n+1)``.
    """
    a = list(a)
    if len(a) < 2 or not a[-1] < a[0]:
        raise SubsequenceError("a does not decrease towards 0", deepest=0)
    if any(v < 0 for v in a) or any(v < 0 for v in M):
        raise ArgumentError("M and a must be non-negative")
    starts = subsequence_starts(M, a)
    if not starts:
        raise SubsequenceError("no admissible K(1) within the list", deepest=0)
    out = []
    for k in range(1, len(a) + 1):
        n_k = 1
        for n, start in enumerate(starts, 1):
            if start <= k:
                n_k = n
        out.append(n_k)
    return out


def _sinpi(t):
    return np.sin(np.pi * np.minimum(t, 1.0 - t))


def lift(e_n) -> np.ndarray:
    """``omega(s) = exp(i (1 - s) pi / 2)``, exact at ``s = -1, 0, 1``."""
    s = np.asarray(e_n, dtype=float)
    excess = float(np.max(np.abs(s))) - 1.0 if s.size else 0.0
    if excess > LIFT_SLACK:
        raise RangeError(f"values exceed [-1, 1] by {excess:.3e}")
    s = np.clip(s, -1.0, 1.0)
    t = 0.5 * (1.0 - s)
    # cos(pi t) = sin(pi (1/2 - t)), |1/2 - t| <= 1/2
    re = np.sin(np.pi * (0.5 - t))
    return re + 1j * _sinpi(t)


def assemble(e_n_seq, phi_n_seq, psi=None) -> list[np.ndarray]:
    """``psi_n = omega(e_n) * phi_n`` term by term."""
    e_n_seq = list(e_n_seq)
    phi_n_seq = list(phi_n_seq)
    if len(e_n_seq) != len(phi_n_seq):
        raise ArgumentError("sign and amplitude sequences differ in length")
    out = []
    for e_n, phi_n in zip(e_n_seq, phi_n_seq):
        if psi is not None and np.shape(phi_n) != np.shape(psi):
            raise ArgumentError("amplitude shape does not match psi")
        out.append(lift(e_n) * np.asarray(phi_n))
    return out


@dataclass
class SignRun:
    psi_seq: list
    indices: list
    signs: list
    lips: list
    a: list
    sign: SignField
    l2_errors: list = field(default_factory=list)
    h1_errors: list = field(default_factory=list)
    decomposition_slack: list = field(default_factory=list)


def sign_pipeline(grid: GridSpec, psi, phi_seq, n_max: int | None = None,
                  widths=None, trace=None) -> SignRun:
    """Smoothed signs, Lipschitz pairing and assembly for a real ``psi``.

    ``phi_seq`` are non-negative amplitudes converging to ``|psi|``. Signs
    ``e_1..e_{n_max}`` are smoothed, paired with ``phi_seq`` through
    :func:`subsequence_select` with ``M_n = Lip(e_n)`` and
    ``a_k = ||phi_k - |psi|||``, then lifted.
    """
    psi = np.asarray(psi, dtype=float)
    phi_seq = [np.asarray(p) for p in phi_seq]
    n_max = len(phi_seq) if n_max is None else n_max
    sign = extract_sign(psi)
    signs = [select_smoothed_sign(grid, sign, n, n_max, widths) for n in range(1, n_max + 1)]
    lips = [s.lip for s in signs]
    a = [l2_norm(grid, p - sign.lam) for p in phi_seq]
    indices = subsequence_select(lips, a)
    chosen = [signs[i - 1].e_n for i in indices]
    psi_seq = assemble(chosen, phi_seq, psi)
    run = SignRun(psi_seq, indices, signs, lips, a, sign)
    weight = sign.lam ** 2
    vol = grid.h ** psi.ndim
    for k, (psi_k, e_k) in enumerate(zip(psi_seq, chosen)):
        l2_err = l2_norm(grid, psi_k - psi)
        h1_err = h1_norm(grid, psi_k - psi)
        bound = a[k] + OMEGA_LIP * math.sqrt(vol * float(np.sum((e_k - sign.e) ** 2 * weight)))
        run.l2_errors.append(l2_err)
        run.h1_errors.append(h1_err)
        run.decomposition_slack.append(bound - l2_err)
        if trace is not None:
            trace("sign", indices[k], lips[indices[k] - 1], a[k], l2_err, h1_err)
    return run
