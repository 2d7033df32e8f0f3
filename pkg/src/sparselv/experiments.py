"""Seeded Monte Carlo experiment driver.

Every trial seed is a pure function of (master_seed, kappa index, trial
index), so runs are fully deterministic given the config, independent of
worker count and scheduling.  Aggregation reduces per-trial records in
sorted (kappa, trial) order, which makes floating-point sums reproducible
across 1 and W workers.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, asdict

import numpy as np

from . import __version__
from .patterns import (
    AdjacencyPattern,
    Permutation,
    PatternModel,
    block_permutation_pattern,
    full_pattern,
    general_regular_pattern,
    proportional_pattern,
)
from .interaction import InteractionMatrix, assemble, spectral_norm
from .equilibrium import DivergenceError, solve_feasibility
from .dynamics import TrajectoryRecord, integrate_lv, jacobian_spectrum

__all__ = [
    "ConfigError",
    "SweepConfig",
    "SweepResult",
    "HistogramResult",
    "DynamicsTrace",
    "SpectrumSweepResult",
    "run_feasibility_sweep",
    "run_abundance_histogram",
    "run_dynamics_trace",
    "run_spectrum_check",
    "run_singular_gap_trials",
    "trial_seed",
    "pattern_seed",
    "build_pattern",
]

_MODELS = ("block_permutation", "general_regular", "full", "proportional")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class SweepConfig:
    n: int
    d: int = 0
    model: str = "block_permutation"
    beta: float | None = None  # proportional model only; overrides d
    kappa_grid: list[float] = field(default_factory=lambda: [2.0])
    trials_per_point: int = 1
    master_seed: int = 0
    fix_pattern: bool = True
    t_end: float = 50.0
    sample_count: int = 201
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    solver_tol: float = 1e-12
    trace_species: int = 10

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError(f"n must be >= 1, got {self.n}")
        if self.model not in _MODELS:
            raise ConfigError(f"model must be one of {_MODELS}, got {self.model!r}")
        if self.model == "full":
            self.d = self.n
        elif self.model == "proportional":
            if self.beta is None:
                raise ConfigError("proportional model requires beta")
            if not (0.0 < self.beta <= 1.0):
                raise ConfigError(f"beta must be in (0, 1], got {self.beta}")
            self.d = max(1, round(self.beta * self.n))
        if not (1 <= self.d <= self.n):
            raise ConfigError(f"need 1 <= d <= n, got d={self.d}, n={self.n}")
        if self.model == "block_permutation" and self.n % self.d != 0:
            raise ConfigError(
                f"block-permutation model needs d | n, got n={self.n}, d={self.d}"
            )
        if not self.kappa_grid:
            raise ConfigError("kappa_grid must be non-empty")
        if any(k <= 0 for k in self.kappa_grid):
            raise ConfigError(f"kappa values must be positive: {self.kappa_grid}")
        if self.trials_per_point < 1:
            raise ConfigError(
                f"trials_per_point must be >= 1, got {self.trials_per_point}"
            )
        self.kappa_grid = sorted(float(k) for k in self.kappa_grid)

    def alpha(self, kappa: float) -> float:
        """Interaction strength alpha = sqrt(kappa * log n)."""
        if self.n < 2:
            raise ConfigError("alpha parameterization needs n >= 2")
        return math.sqrt(kappa * math.log(self.n))

    @classmethod
    def from_mapping(cls, mapping: dict) -> "SweepConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(mapping) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**mapping)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def echo(self) -> dict:
        return asdict(self)


def trial_seed(master_seed: int, kappa_index: int, trial: int) -> int:
    """Deterministic per-trial seed, independent of execution order."""
    ss = np.random.SeedSequence([int(master_seed), int(kappa_index), int(trial)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def pattern_seed(master_seed: int, trial: int | None = None) -> int:
    entropy = [int(master_seed), 0x5EED]
    if trial is not None:
        entropy.append(int(trial))
    return int(np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)[0])


def build_pattern(cfg: SweepConfig, seed: int) -> AdjacencyPattern:
    if cfg.model == "block_permutation":
        m = cfg.n // cfg.d
        sigma = Permutation.random(m, np.random.default_rng(seed))
        return block_permutation_pattern(m, cfg.d, sigma)
    if cfg.model == "general_regular":
        return general_regular_pattern(cfg.n, cfg.d, seed)
    if cfg.model == "proportional":
        return proportional_pattern(cfg.n, cfg.beta, seed)
    return full_pattern(cfg.n)


# ---------------------------------------------------------------------------
# Feasibility sweep
# ---------------------------------------------------------------------------

# Worker-process state: the fixed pattern is rebuilt per worker from the
# seed instead of being pickled per task.
_CTX: dict = {}


def _sweep_init(cfg: SweepConfig) -> None:
    _CTX["cfg"] = cfg
    _CTX["pattern"] = build_pattern(cfg, pattern_seed(cfg.master_seed)) if cfg.fix_pattern else None


def _sweep_trial(task: tuple[int, int]) -> tuple[int, int, dict]:
    cfg: SweepConfig = _CTX["cfg"]
    kappa_index, trial = task
    kappa = cfg.kappa_grid[kappa_index]
    alpha = cfg.alpha(kappa)
    seed = trial_seed(cfg.master_seed, kappa_index, trial)
    pattern = _CTX["pattern"]
    if pattern is None:
        pattern = build_pattern(cfg, pattern_seed(cfg.master_seed, trial))
    M = assemble(pattern, alpha, seed)
    # Loose norm estimate: only the >= alpha guard needs to be reliable,
    # the solver's own divergence detection covers borderline cases.
    norm_est = spectral_norm(
        M, unscaled=True, tol=1e-8, max_iter=500, full_spectrum=False
    ).spectral_norm
    record = {"spectral_norm": norm_est}
    if norm_est >= alpha:
        record.update(diverged=True, feasible=False)
        return kappa_index, trial, record
    try:
        report = solve_feasibility(M, tol=cfg.solver_tol)
    except DivergenceError:
        record.update(diverged=True, feasible=False)
        return kappa_index, trial, record
    max_r_norm = float(np.max(np.abs(report.R))) / (alpha * math.sqrt(2.0 * math.log(cfg.n)))
    record.update(
        diverged=False,
        feasible=report.feasible,
        min_x=report.min_x,
        max_R_normalized=max_r_norm,
    )
    return kappa_index, trial, record


@dataclass
class SweepResult:
    rows: list[dict]
    provenance: dict

    CSV_COLUMNS = (
        "kappa",
        "alpha",
        "trials",
        "feasible_count",
        "diverged",
        "feasible_fraction",
        "mean_min_x",
        "mean_max_R_normalized",
        "mean_spectral_norm",
    )

    def feasible_fractions(self) -> list[tuple[float, float]]:
        return [(r["kappa"], r["feasible_fraction"]) for r in self.rows]


def _map_trials(cfg, tasks, worker, init, workers):
    if workers <= 1:
        init(cfg)
        return [worker(t) for t in tasks]
    with ProcessPoolExecutor(
        max_workers=workers, initializer=init, initargs=(cfg,)
    ) as pool:
        return list(pool.map(worker, tasks, chunksize=8))


def run_feasibility_sweep(cfg: SweepConfig, workers: int = 1) -> SweepResult:
    """Feasibility fraction per kappa over seeded trials.

    Trials whose Neumann solve diverges (||M|| >= 1) count in a separate
    ``diverged`` column and as infeasible; they are never dropped.
    ``mean_min_x`` and ``mean_max_R_normalized`` average over the solved
    (non-diverged) trials, ``mean_spectral_norm`` over all trials.
    """
    t0 = time.time()
    tasks = [
        (ki, t)
        for ki in range(len(cfg.kappa_grid))
        for t in range(cfg.trials_per_point)
    ]
    results = _map_trials(cfg, tasks, _sweep_trial, _sweep_init, workers)
    by_key = {(ki, t): rec for ki, t, rec in results}

    rows = []
    for ki, kappa in enumerate(cfg.kappa_grid):
        recs = [by_key[(ki, t)] for t in range(cfg.trials_per_point)]
        solved = [r for r in recs if not r["diverged"]]
        feasible_count = sum(1 for r in recs if r["feasible"])
        rows.append(
            {
                "kappa": kappa,
                "alpha": cfg.alpha(kappa),
                "trials": len(recs),
                "feasible_count": feasible_count,
                "diverged": sum(1 for r in recs if r["diverged"]),
                "feasible_fraction": feasible_count / len(recs),
                "mean_min_x": (
                    sum(r["min_x"] for r in solved) / len(solved) if solved else math.nan
                ),
                "mean_max_R_normalized": (
                    sum(r["max_R_normalized"] for r in solved) / len(solved)
                    if solved
                    else math.nan
                ),
                "mean_spectral_norm": sum(r["spectral_norm"] for r in recs) / len(recs),
            }
        )
    provenance = {
        "config": cfg.echo(),
        "version": __version__,
        "wall_time_s": time.time() - t0,
    }
    return SweepResult(rows=rows, provenance=provenance)


# ---------------------------------------------------------------------------
# Abundance histogram
# ---------------------------------------------------------------------------


def _hist_init(cfg_and_extra) -> None:
    cfg, kappa, edges = cfg_and_extra
    _CTX["cfg"] = cfg
    _CTX["kappa"] = kappa
    _CTX["edges"] = edges
    _CTX["pattern"] = build_pattern(cfg, pattern_seed(cfg.master_seed)) if cfg.fix_pattern else None


def _hist_trial(trial: int) -> tuple[int, dict]:
    cfg: SweepConfig = _CTX["cfg"]
    kappa, edges = _CTX["kappa"], _CTX["edges"]
    alpha = cfg.alpha(kappa)
    seed = trial_seed(cfg.master_seed, 0, trial)
    pattern = _CTX["pattern"]
    if pattern is None:
        pattern = build_pattern(cfg, pattern_seed(cfg.master_seed, trial))
    M = assemble(pattern, alpha, seed)
    try:
        report = solve_feasibility(M, tol=cfg.solver_tol)
    except DivergenceError:
        return trial, {"diverged": True}
    x = report.x
    counts, _ = np.histogram(x, bins=edges)
    return trial, {
        "diverged": False,
        "counts": counts,
        "sum": float(x.sum()),
        "sumsq": float((x * x).sum()),
        "count": x.size,
    }


@dataclass
class HistogramResult:
    kappa: float
    alpha: float
    bin_edges: np.ndarray
    counts: np.ndarray
    mean: float
    variance: float
    pooled: int
    trials: int
    diverged: int
    provenance: dict

    def bin_rows(self):
        header = ["bin_left", "bin_right", "count"]
        rows = [
            (float(self.bin_edges[i]), float(self.bin_edges[i + 1]), int(c))
            for i, c in enumerate(self.counts)
        ]
        return header, rows


def run_abundance_histogram(
    cfg: SweepConfig, kappa: float, bins: int = 60, workers: int = 1
) -> HistogramResult:
    """Pool equilibrium abundances across trials; the sample mean and
    variance are reported for comparison against (1, 1/alpha^2)."""
    if kappa <= 0:
        raise ConfigError(f"kappa must be positive, got {kappa}")
    if bins < 1:
        raise ConfigError(f"bins must be >= 1, got {bins}")
    if kappa < 2.0:
        import warnings

        warnings.warn(
            f"kappa={kappa} is below the feasibility threshold; the abundance "
            "histogram is meant for the feasible regime",
            RuntimeWarning,
        )
    t0 = time.time()
    alpha = cfg.alpha(kappa)
    span = 8.0 / alpha
    edges = np.linspace(1.0 - span, 1.0 + span, bins + 1)
    tasks = list(range(cfg.trials_per_point))
    results = _map_trials((cfg, kappa, edges), tasks, _hist_trial, _hist_init, workers)
    by_trial = {t: rec for t, rec in results}

    counts = np.zeros(bins, dtype=np.int64)
    total = 0
    acc_sum = 0.0
    acc_sumsq = 0.0
    diverged = 0
    for t in sorted(by_trial):
        rec = by_trial[t]
        if rec["diverged"]:
            diverged += 1
            continue
        counts += rec["counts"]
        total += rec["count"]
        acc_sum += rec["sum"]
        acc_sumsq += rec["sumsq"]
    mean = acc_sum / total if total else math.nan
    variance = acc_sumsq / total - mean * mean if total else math.nan
    return HistogramResult(
        kappa=kappa,
        alpha=alpha,
        bin_edges=edges,
        counts=counts,
        mean=mean,
        variance=variance,
        pooled=total,
        trials=cfg.trials_per_point,
        diverged=diverged,
        provenance={
            "config": cfg.echo(),
            "kappa": kappa,
            "bins": bins,
            "version": __version__,
            "wall_time_s": time.time() - t0,
        },
    )


# ---------------------------------------------------------------------------
# Dynamics trace and spectrum check
# ---------------------------------------------------------------------------


@dataclass
class DynamicsTrace:
    record: TrajectoryRecord
    species_indices: np.ndarray
    species_traces: np.ndarray  # (len(species_indices), T)
    kappa: float
    alpha: float
    provenance: dict

    def trace_rows(self):
        """One row per selected species: index followed by its abundances
        at the sample times."""
        header = ["species"] + [f"t={t:g}" for t in self.record.times]
        rows = [
            (int(idx), *map(float, self.species_traces[i]))
            for i, idx in enumerate(self.species_indices)
        ]
        return header, rows


def run_dynamics_trace(cfg: SweepConfig, kappa: float) -> DynamicsTrace:
    """Integrate one seeded trial and extract the min/max/mean series plus
    full traces for a random selection of species (all from x0 = 1/2)."""
    t0 = time.time()
    alpha = cfg.alpha(kappa)
    pattern = build_pattern(cfg, pattern_seed(cfg.master_seed))
    seed = trial_seed(cfg.master_seed, 0, 0)
    M = assemble(pattern, alpha, seed)
    reference = None
    try:
        report = solve_feasibility(M, tol=cfg.solver_tol)
        if report.feasible:
            reference = report.x
    except DivergenceError:
        pass
    record = integrate_lv(
        M,
        np.full(cfg.n, 0.5),
        cfg.t_end,
        rel_tol=cfg.rel_tol,
        abs_tol=cfg.abs_tol,
        sample_count=cfg.sample_count,
        reference=reference,
        keep_states=True,
    )
    rng = np.random.default_rng(trial_seed(cfg.master_seed, 0, 1))
    k = min(cfg.trace_species, cfg.n)
    indices = np.sort(rng.choice(cfg.n, size=k, replace=False))
    traces = record.states[indices]
    return DynamicsTrace(
        record=record,
        species_indices=indices,
        species_traces=traces,
        kappa=kappa,
        alpha=alpha,
        provenance={
            "config": cfg.echo(),
            "kappa": kappa,
            "version": __version__,
            "wall_time_s": time.time() - t0,
        },
    )


@dataclass
class SpectrumSweepResult:
    rows: list[dict]
    skipped: int
    mean_max_real_part: float
    mean_localization_error: float
    provenance: dict

    CSV_COLUMNS = ("trial", "max_real_part", "localization_error", "min_x")


def run_spectrum_check(cfg: SweepConfig, kappa: float, workers: int = 1) -> SpectrumSweepResult:
    """Per-trial Jacobian spectra at the feasible equilibrium.  Infeasible
    or diverged trials are skipped and counted."""
    t0 = time.time()
    alpha = cfg.alpha(kappa)
    pattern_fixed = build_pattern(cfg, pattern_seed(cfg.master_seed)) if cfg.fix_pattern else None
    rows = []
    skipped = 0
    for trial in range(cfg.trials_per_point):
        pattern = pattern_fixed
        if pattern is None:
            pattern = build_pattern(cfg, pattern_seed(cfg.master_seed, trial))
        M = assemble(pattern, alpha, trial_seed(cfg.master_seed, 0, trial))
        try:
            report = solve_feasibility(M, tol=cfg.solver_tol)
        except DivergenceError:
            skipped += 1
            continue
        if not report.feasible:
            skipped += 1
            continue
        spec = jacobian_spectrum(M, report.x)
        rows.append(
            {
                "trial": trial,
                "max_real_part": spec.max_real_part,
                "localization_error": spec.localization_error,
                "min_x": report.min_x,
            }
        )
    mean_max = sum(r["max_real_part"] for r in rows) / len(rows) if rows else math.nan
    mean_loc = (
        sum(r["localization_error"] for r in rows) / len(rows) if rows else math.nan
    )
    return SpectrumSweepResult(
        rows=rows,
        skipped=skipped,
        mean_max_real_part=mean_max,
        mean_localization_error=mean_loc,
        provenance={
            "config": cfg.echo(),
            "kappa": kappa,
            "version": __version__,
            "wall_time_s": time.time() - t0,
        },
    )


def run_singular_gap_trials(
    n: int, d: int, trials: int, master_seed: int, model: str = "general_regular"
) -> list[float]:
    """Monte Carlo over the smallest consecutive singular-value gap of the
    raw masked matrix (almost surely positive)."""
    from .interaction import singular_gap

    cfg = SweepConfig(
        n=n, d=d, model=model, kappa_grid=[2.0], trials_per_point=trials,
        master_seed=master_seed,
    )
    pattern = build_pattern(cfg, pattern_seed(master_seed))
    gaps = []
    for trial in range(trials):
        M = assemble(pattern, 1.0, trial_seed(master_seed, 0, trial))
        gaps.append(singular_gap(M))
    return gaps
