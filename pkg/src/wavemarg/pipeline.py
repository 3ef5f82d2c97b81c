"""End-to-end runs: targets, density sequences, per-n construction, reports."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import AmplitudeError, ConfigError, InvariantError, SupportError
from .fieldio import write_wff
from .grid import (
    GridSpec,
    embed,
    h1_norm,
    integrate,
    l2_norm,
    make_grid,
    marginal,
    sqrt_density_h1_distance,
    sqrt_density_l2_distance,
    symmetrize,
)
from .reallocation import l2_match
from .sign_lift import SignRun, sign_pipeline
from .smoothing import build_schedule

MODES = ("nonneg", "signed")
SUPPORT_TOL = 1e-10


@dataclass
class ExperimentConfig:
    d: int = 1
    N: int = 2
    L: float = 10.0
    M: int = 64
    n_max: int = 6
    width: float = 0.7
    alpha0: float = 0.15
    realloc_tol: float = 1e-12
    marginal_tol: float = 1e-9
    bound_slack: float = 1e-10
    eps_levels: tuple = (0.5, 0.25, 0.125)
    delta: float = 1.0
    mode: str = "nonneg"
    seed: int = 0
    output_dir: str = "out"

    def __post_init__(self):
        self.eps_levels = tuple(float(e) for e in self.eps_levels)
        self.validate()

    def validate(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.n_max < 3:
            raise ConfigError("n_max must be at least 3")
        for name in ("realloc_tol", "marginal_tol", "bound_slack", "delta", "width", "L"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.alpha0 < 0:
            raise ConfigError("alpha0 must be non-negative")
        if not self.eps_levels:
            raise ConfigError("eps_levels must not be empty")

    def grid(self) -> GridSpec:
        return make_grid(self.d, self.N, self.L, self.M)

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        """Parse ``key = value`` lines; ``#`` starts a comment."""
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = (s.strip() for s in line.partition("="))
            if not sep:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            if key not in known:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            kwargs[key] = _parse_value(key, value, cls.__dataclass_fields__[key].default)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls.from_text(Path(path).read_text())

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = ", ".join(repr(v) for v in value)
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"


def _parse_value(key, value, default):
    try:
        if isinstance(default, tuple):
            return tuple(float(v) for v in value.split(",") if v.strip())
        if isinstance(default, bool):
            return value.lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {value!r}") from exc
    return value


def _check_support(grid: GridSpec, rho):
    core = np.ones(grid.scalar_shape, dtype=bool)
    for x in grid.scalar_coords():
        core = core & (np.abs(x) <= grid.L / 2)
    outside = float(integrate(grid, np.where(core, 0.0, rho)))
    if outside > SUPPORT_TOL:
        raise SupportError(f"mass {outside:.3e} outside [-L/2, L/2]^d")


def _gaussian(grid: GridSpec, center, width):
    r2 = 0.0
    for x, c in zip(grid.scalar_coords(), center):
        r2 = r2 + (x - c) ** 2
    return np.exp(-r2 / (4.0 * width ** 2))


def generate_target(config: ExperimentConfig):
    """Canonical test wavefunction and its single-particle density.

    ``nonneg``: symmetrised product of seeded two-component Gaussian
    mixtures (for ``N > 3`` one shared mixture, whose product is already
    symmetric). ``signed``: ``(x_1 + ... + x_N) * (1 - |X|^2 / R^2)_+^2`` with
    ``R = L/2``, using the first coordinate of each particle. The compact
    envelope fills the safe core, which keeps the nodal set resolved at
    moderate ``M``. Both are normalised in L2.
    """
    grid = config.grid()
    rng = np.random.default_rng(config.seed)
    s = config.width
    if config.mode == "nonneg":
        count = grid.N if grid.N <= 3 else 1
        factors = []
        for _ in range(count):
            centers = rng.uniform(-s, s, size=(2, grid.d))
            weights = rng.uniform(0.5, 1.0, size=2)
            factors.append(sum(w * _gaussian(grid, c, s) for w, c in zip(weights, centers)))
        factors = factors * (grid.N // count)
        psi = embed(grid, factors[0], 0)
        for j in range(1, grid.N):
            psi = psi * embed(grid, factors[j], j)
        psi = np.broadcast_to(psi, grid.config_shape).copy()
        if count > 1:
            psi = symmetrize(grid, psi)
    else:
        coords = grid.config_coords()
        total = sum(row[0] for row in coords)
        r2 = sum(x * x for row in coords for x in row)
        bump = np.clip(1.0 - r2 / (grid.L / 2) ** 2, 0.0, None) ** 2
        psi = np.broadcast_to(total * bump, grid.config_shape).copy()
    psi = psi / l2_norm(grid, psi)
    rho = marginal(grid, psi)
    _check_support(grid, rho)
    return psi, rho


def generate_density_sequence(rho, config: ExperimentConfig, alpha0: float | None = None):
    """``rho_n = (sqrt(rho) (1 + (alpha0/n) b))^2`` renormalised, ``n = 1..n_max``.

    ``b`` is a seeded cosine profile bounded by 1, so the perturbation is
    smooth and shares the decay of ``sqrt(rho)``.
    """
    grid = config.grid()
    alpha0 = config.alpha0 if alpha0 is None else alpha0
    rng = np.random.default_rng(config.seed + 1)
    phase = rng.uniform(0.0, 2.0 * math.pi)
    x0 = grid.scalar_coords()[0]
    b = np.broadcast_to(np.cos(x0 / config.width + phase), grid.scalar_shape)
    root = np.sqrt(rho)
    out = []
    for n in range(1, config.n_max + 1):
        amp = root + (alpha0 / n) * root * b
        if np.any(amp < 0):
            raise AmplitudeError(f"perturbation at n={n} is negative; reduce alpha0")
        rho_n = amp * amp
        out.append(rho_n / integrate(grid, rho_n))
    return out


COLUMNS = (
    "n",
    "h1_sqrt_density",
    "l2_amplitude",
    "l2_psi",
    "h1_psi",
    "marginal_l1",
    "k_estimate_slack",
    "final_bound_slack",
    "iterations",
    "epsilon",
)


@dataclass
class ReportRow:
    n: int
    h1_sqrt_density: float
    l2_amplitude: float
    l2_psi: float
    h1_psi: float
    marginal_l1: float
    k_estimate_slack: float
    final_bound_slack: float
    iterations: int
    epsilon: float


@dataclass
class ConvergenceReport:
    rows: list = field(default_factory=list)
    config: ExperimentConfig | None = None
    psi: np.ndarray | None = None
    rho: np.ndarray | None = None
    rho_seq: list = field(default_factory=list)
    amplitudes: list = field(default_factory=list)
    psi_seq: list = field(default_factory=list)
    sign_run: SignRun | None = None
    schedule_starts: list = field(default_factory=list)

    def column(self, name):
        return [getattr(r, name) for r in self.rows]


def run_pipeline(config: ExperimentConfig, trace=None, rho_seq=None) -> ConvergenceReport:
    """Build ``psi_n`` with marginal ``rho_n`` for every ``n`` and tabulate errors.

    Raises :class:`InvariantError` (carrying ``n`` and the stage) when a row
    breaks the marginal tolerance or one of the reallocation bounds.
    """
    grid = config.grid()
    psi, rho = generate_target(config)
    phi = np.abs(psi)
    if rho_seq is None:
        rho_seq = generate_density_sequence(rho, config)
    N = grid.N

    matched = []
    for n, rho_n in enumerate(rho_seq, 1):
        res = l2_match(grid, phi, rho_n, tol=config.realloc_tol, trace=trace)
        gap = sqrt_density_l2_distance(grid, rho, rho_n)
        k_slack = 2 * N * gap - res.mass_loss
        f_slack = 2 * (2 * N + 1) * gap - l2_norm(grid, res.phi_out - phi) ** 2
        if min(k_slack, f_slack) < -config.bound_slack:
            raise InvariantError(
                f"reallocation bound violated at n={n} (slacks {k_slack:.3e}, {f_slack:.3e})",
                n=n, stage="reallocation")
        matched.append((res, k_slack, f_slack))

    schedule = build_schedule(grid, [m[0].phi_out for m in matched], phi,
                              config.eps_levels, config.delta, trace=trace)
    level_of = {eps: k for k, eps in enumerate(config.eps_levels)}
    amplitudes = [schedule.smoothed[(n, level_of[eps])] for n, eps in schedule.pairs]

    sign_run = None
    if config.mode == "signed":
        sign_run = sign_pipeline(grid, psi, amplitudes, trace=trace)
        psi_seq = sign_run.psi_seq
        worst = min(sign_run.decomposition_slack)
        if worst < -config.bound_slack:
            k = sign_run.decomposition_slack.index(worst) + 1
            raise InvariantError(f"L2 decomposition bound violated (slack {worst:.3e})",
                                 n=k, stage="sign")
    else:
        psi_seq = amplitudes

    report = ConvergenceReport(config=config, psi=psi, rho=rho, rho_seq=list(rho_seq),
                               amplitudes=amplitudes, psi_seq=psi_seq, sign_run=sign_run,
                               schedule_starts=schedule.starts)
    for (n, eps), (res, k_slack, f_slack), rho_n, amp, psi_n in zip(
            schedule.pairs, matched, rho_seq, amplitudes, psi_seq):
        marg = marginal(grid, np.abs(psi_n))
        marg_err = float(np.sum(np.abs(marg - rho_n)) / np.sum(rho_n))
        if marg_err > config.marginal_tol:
            raise InvariantError(f"marginal error {marg_err:.3e} at n={n}", n=n, stage="smoothing")
        report.rows.append(ReportRow(
            n=n,
            h1_sqrt_density=sqrt_density_h1_distance(grid, rho_n, rho),
            l2_amplitude=l2_norm(grid, amp - phi),
            l2_psi=l2_norm(grid, psi_n - psi),
            h1_psi=h1_norm(grid, psi_n - psi),
            marginal_l1=marg_err,
            k_estimate_slack=k_slack,
            final_bound_slack=f_slack,
            iterations=res.iterations,
            epsilon=eps,
        ))
    return report


def _fmt(value):
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def emit_report(report: ConvergenceReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COLUMNS)
        for row in report.rows:
            writer.writerow([_fmt(getattr(row, c)) for c in COLUMNS])


def read_report(path) -> list[ReportRow]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != COLUMNS:
            raise ConfigError(f"{path}: unexpected header {reader.fieldnames}")
        rows = []
        for rec in reader:
            rows.append(ReportRow(**{
                c: int(rec[c]) if c in ("n", "iterations") else float(rec[c]) for c in COLUMNS}))
    return rows


def write_fields(report: ConvergenceReport, directory) -> None:
    """Dump psi, rho and every rho_n / psi_n as wff files."""
    cfg = report.config
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    write_wff(out / "psi.wff", report.psi, cfg.d, cfg.L)
    write_wff(out / "rho.wff", report.rho, cfg.d, cfg.L)
    for n, (rho_n, psi_n) in enumerate(zip(report.rho_seq, report.psi_seq), 1):
        write_wff(out / f"rho_{n}.wff", rho_n, cfg.d, cfg.L)
        write_wff(out / f"psi_{n}.wff", psi_n, cfg.d, cfg.L)
