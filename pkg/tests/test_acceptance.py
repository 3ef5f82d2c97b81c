"""Exit criteria. Each test records one PASS/FAIL line before asserting."""

import math
import time

import numpy as np
import pytest

from wavemarg.grid import (
    h1_norm,
    integrate,
    make_grid,
    marginal,
    measure_marginal,
    product_field,
    sqrt_density_l2_distance,
)
from wavemarg.pipeline import ExperimentConfig, emit_report, generate_target, run_pipeline
from wavemarg.reallocation import excess_residual, l2_match, realloc_iterates
from wavemarg.sign_lift import extract_sign, lift, subsequence_starts, weighted_gradient_residual
from wavemarg.smoothing import convolve_axes, gauss_stencil, lambda_eps, smooth_sqrt, theta_eps

from conftest import bump_density, bump_panel, compact_random_field, random_instance
from test_smoothing import dense_theta

pytestmark = pytest.mark.acceptance

SEEDS = range(50)
REALLOC_TOL = 1e-12


def trajectory(seed):
    """All iterates of one random instance until the excess drops below tolerance."""
    grid, phi, rho_n = random_instance(seed)
    states = []
    for state in realloc_iterates(grid, phi, rho_n):
        states.append(state)
        residual = excess_residual(grid, state.sigma_k, rho_n, state.excess_mask)
        if residual <= REALLOC_TOL and np.max(state.sigma_k - rho_n) <= REALLOC_TOL:
            break
        if state.k >= 400:
            break
    return grid, phi, rho_n, states


@pytest.fixture(scope="module")
def trajectories():
    return [trajectory(seed) for seed in SEEDS]


@pytest.fixture(scope="module")
def nonneg_report():
    start = time.perf_counter()
    report = run_pipeline(ExperimentConfig())
    return report, time.perf_counter() - start


@pytest.fixture(scope="module")
def signed_report():
    return run_pipeline(ExperimentConfig(mode="signed"))


def test_criterion_01_monotonicity(record_criterion):
    start = time.perf_counter()
    worst_value = worst_set = 0
    for seed in SEEDS:
        _, _, _, states = trajectory(seed)
        for prev, cur in zip(states, states[1:]):
            worst_value = max(worst_value, float(np.max(cur.phi_k - prev.phi_k)),
                              float(-cur.phi_k.min()))
            worst_set += int(np.sum(cur.excess_mask & ~prev.excess_mask))
    elapsed = time.perf_counter() - start
    passed = worst_value <= 1e-15 and worst_set == 0 and elapsed < 10.0
    record_criterion(1, passed, f"max increase {worst_value:.2e}, new excess nodes "
                                f"{worst_set}, {elapsed:.2f} s")
    assert passed


def test_criterion_02_geometric_decay(trajectories, record_criterion):
    worst = -math.inf
    for grid, phi, rho_n, states in trajectories:
        gap = integrate(grid, np.abs(marginal(grid, phi) - rho_n))
        for s in states:
            excess = excess_residual(grid, s.sigma_k, rho_n, s.excess_mask)
            worst = max(worst, excess - 0.5 ** s.k * gap)
    passed = worst <= 1e-13
    record_criterion(2, passed, f"max(excess - 2^-k * L1 gap) = {worst:.2e}")
    assert passed


def test_criterion_03_k_estimate(trajectories, record_criterion):
    worst = -math.inf
    for grid, phi, rho_n, states in trajectories:
        bound = 4.0 * sqrt_density_l2_distance(grid, marginal(grid, phi), rho_n)
        mass = integrate(grid, phi ** 2)
        for s in states:
            worst = max(worst, mass - integrate(grid, s.phi_k ** 2) - bound)
    passed = worst <= 1e-10
    record_criterion(3, passed, f"max(mass loss - 4 * sqrt-density gap) = {worst:.2e}")
    assert passed


def test_criterion_04_final_bound(record_criterion):
    worst = -math.inf
    for seed in SEEDS:
        grid, phi, rho_n = random_instance(seed)
        out = l2_match(grid, phi, rho_n, tol=REALLOC_TOL).phi_out
        bound = 10.0 * sqrt_density_l2_distance(grid, marginal(grid, phi), rho_n)
        worst = max(worst, integrate(grid, (out - phi) ** 2) - bound)
    passed = worst <= 1e-10
    record_criterion(4, passed, f"max(||phi_n - phi||^2 - 10 * gap) = {worst:.2e}")
    assert passed


def test_criterion_05_marginal_restoration(record_criterion):
    worst = 0.0
    converged = 0
    for seed in SEEDS:
        grid, phi, rho_n = random_instance(seed)
        res = l2_match(grid, phi, rho_n, tol=REALLOC_TOL)
        if res.residual <= REALLOC_TOL:
            converged += 1
            err = np.sum(np.abs(marginal(grid, res.phi_out) - rho_n)) / np.sum(rho_n)
            worst = max(worst, float(err))
    passed = converged == len(SEEDS) and worst <= 1e-10
    record_criterion(5, passed, f"{converged}/{len(SEEDS)} converged, "
                                f"max relative L1 error {worst:.2e}")
    assert passed


def test_criterion_06_smoothing_properties(record_criterion):
    start = time.perf_counter()
    dual = marg = fixed = dense = 0.0
    g = make_grid(1, 2, 6.0, 48)
    for seed in range(10):
        u = compact_random_field(g, seed, 18, 30)
        for eps in (0.1, 0.15, 0.3):
            m = gauss_stencil(eps, g)
            direct = convolve_axes(marginal(g, u), m)
            via_plan = measure_marginal(g, lambda_eps(g, u, m))
            dual = max(dual, float(np.max(np.abs(direct - via_plan))))
            out = theta_eps(g, u, m)
            err = np.max(np.abs(measure_marginal(g, out.u_eps ** 2) - marginal(g, u)))
            marg = max(marg, float(err))
    gp = make_grid(1, 2, 6.0, 48)
    for radius in (0.8, 1.0, 1.5):
        u = np.sqrt(product_field(gp, bump_density(gp, radius)))
        for eps in (0.1, 0.3, 0.6):
            theta = theta_eps(gp, u, gauss_stencil(eps, gp)).theta
            fixed = max(fixed, float(np.max(np.abs(theta - u ** 2))))
    gd = make_grid(1, 2, 1.6, 16)
    for seed in range(5):
        u = compact_random_field(gd, seed, 6, 10)
        fast = theta_eps(gd, u, gauss_stencil(0.05, gd)).theta
        slow = dense_theta(gd, u, 0.05)
        dense = max(dense, float(np.max(np.abs(fast - slow)) / np.max(slow)))
    elapsed = time.perf_counter() - start
    passed = (dual <= 1e-11 and marg <= 1e-10 and fixed <= 1e-12 and dense <= 1e-12
              and elapsed < 30.0)
    record_criterion(6, passed, f"dual {dual:.1e}, marginal {marg:.1e}, fixed point "
                                f"{fixed:.1e}, dense {dense:.1e}, {elapsed:.2f} s")
    assert passed


def test_criterion_07_smoothing_trend(record_criterion):
    cfg = ExperimentConfig(M=128)
    g = cfg.grid()
    psi, _ = generate_target(cfg)
    values = [h1_norm(g, smooth_sqrt(g, psi, gauss_stencil(eps, g)) - psi)
              for eps in (0.4, 0.2, 0.1, 0.05)]
    steps = all(b <= 1.05 * a for a, b in zip(values, values[1:]))
    passed = steps and values[0] / values[-1] >= 2.0
    record_criterion(7, passed, "H1 errors " + ", ".join(f"{v:.4g}" for v in values))
    assert passed


def _trend(report):
    h1 = report.column("h1_psi")
    ratio = h1[-1] / h1[0]
    tail = h1[-3] > h1[-2] > h1[-1]
    marg = max(report.column("marginal_l1"))
    return h1, ratio, tail, marg


def test_criterion_08_nonneg_end_to_end(nonneg_report, record_criterion):
    report, elapsed = nonneg_report
    h1, ratio, tail, marg = _trend(report)
    passed = ratio <= 0.5 and tail and marg <= 1e-9 and elapsed < 120.0
    record_criterion(8, passed, f"final/initial {ratio:.3f}, tail decreasing {tail}, "
                                f"marginal {marg:.1e}, {elapsed:.2f} s")
    assert passed


def test_criterion_09_signed_end_to_end(signed_report, record_criterion):
    report = signed_report
    h1, ratio, tail, marg = _trend(report)
    modulus = max(float(np.max(np.abs(np.abs(p) - f)))
                  for p, f in zip(report.psi_seq, report.amplitudes))
    unit = max(float(np.max(np.abs(np.abs(lift(s.e_n)) - 1.0))) for s in report.sign_run.signs)
    passed = (ratio <= 0.5 and tail and marg <= 1e-9 and modulus <= 1e-14 and unit <= 1e-15)
    record_criterion(9, passed, f"final/initial {ratio:.3f}, tail decreasing {tail}, "
                                f"marginal {marg:.1e}, ||psi_n|-phi_n| {modulus:.1e}, "
                                f"||omega|-1| {unit:.1e}")
    assert passed


def test_criterion_10_sign_machinery(signed_report, record_criterion):
    run = signed_report.sign_run
    first = subsequence_starts(run.lips, run.a)[0]
    products = all(run.lips[n - 1] * a < 2.0 ** -n
                   for k, (n, a) in enumerate(zip(run.indices, run.a), 1) if k >= first)

    s = np.linspace(-1.0, 1.0, 2001)
    w = lift(s)
    ds = np.abs(s[:, None] - s[None, :])
    mask = ds > 0
    lip = float(np.max(np.abs(w[:, None] - w[None, :])[mask] / ds[mask]))

    residuals = []
    for M in (32, 64, 128):
        cfg = ExperimentConfig(M=M, mode="signed")
        psi, _ = generate_target(cfg)
        g = cfg.grid()
        sign = extract_sign(psi)
        residuals.append(max(weighted_gradient_residual(g, sign.e, sign.lam, t) / h1_norm(g, t)
                             for t in bump_panel(g)))
    shrink = [a / b for a, b in zip(residuals, residuals[1:])]
    passed = products and lip <= math.pi / 2 + 1e-12 and min(shrink) >= 1.3
    record_criterion(10, passed, f"products from K(1)={first} {products}, omega Lipschitz "
                                 f"{lip:.15f}, residual shrink "
                                 + ", ".join(f"{q:.2f}" for q in shrink))
    assert passed


def test_criterion_11_determinism(tmp_path, record_criterion):
    paths = []
    for name in ("a.csv", "b.csv"):
        paths.append(tmp_path / name)
        emit_report(run_pipeline(ExperimentConfig(seed=0)), paths[-1])
    first, second = (p.read_bytes() for p in paths)
    passed = first == second
    record_criterion(11, passed, f"{len(first)} bytes, identical {passed}")
    assert passed
