"""Command-line interface.

Subcommands: pattern, solve, sweep, histogram, dynamics, spectrum, gap.
Outputs are plot-ready CSV or JSON; file outputs get a meta.json sidecar
with the config echo and version.  Exit codes: 0 success, 2 invalid
config, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time

import yaml

from . import __version__
from .patterns import pattern_text, save_pattern
from .interaction import assemble, spectral_norm, singular_gap
from .equilibrium import DivergenceError, EquilibriumError, solve_feasibility
from .dynamics import IntegrationError
from .experiments import (
    ConfigError,
    SweepConfig,
    build_pattern,
    pattern_seed,
    run_abundance_histogram,
    run_dynamics_trace,
    run_feasibility_sweep,
    run_spectrum_check,
    run_singular_gap_trials,
    trial_seed,
)

EXIT_INVALID_CONFIG = 2
EXIT_NUMERICAL_FAILURE = 3


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="master seed")
    parser.add_argument("--threads", type=int, default=1, help="worker count")
    parser.add_argument("--out", type=str, default=None, help="output path (default stdout)")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--config", type=str, default=None, help="flat key-value config file")


def _load_config(args, **overrides) -> SweepConfig:
    mapping = {}
    if args.config:
        with open(args.config) as f:
            loaded = yaml.safe_load(f)
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file must be a flat mapping, got {type(loaded).__name__}")
        mapping.update(loaded)
    if "master_seed" not in mapping:
        mapping["master_seed"] = args.seed
    mapping.update({k: v for k, v in overrides.items() if v is not None})
    return SweepConfig.from_mapping(mapping)


def _write_rows(args, header, rows, meta=None):
    if args.format == "json":
        payload = [dict(zip(header, row)) for row in rows]
        text = json.dumps(payload, indent=2) + "\n"
    else:
        import io

        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        text = buf.getvalue()
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
        if meta is not None:
            with open(args.out + ".meta.json", "w") as f:
                json.dump(meta, f, indent=2)
                f.write("\n")
    else:
        sys.stdout.write(text)


def _meta(cfg=None, **extra) -> dict:
    meta = {"version": __version__, "wall_time_s": None, **extra}
    if cfg is not None:
        meta["config"] = cfg.echo()
    return meta


def cmd_pattern(args) -> int:
    cfg = _load_config(
        args, n=args.n, d=args.d, model=args.model, beta=args.beta,
    )
    pattern = build_pattern(cfg, pattern_seed(cfg.master_seed))
    if args.out:
        save_pattern(pattern, args.out)
    else:
        sys.stdout.write(pattern_text(pattern))
    return 0


def cmd_solve(args) -> int:
    cfg = _load_config(
        args, n=args.n, d=args.d, model=args.model, beta=args.beta,
        kappa_grid=[args.kappa] if args.kappa is not None else None,
    )
    kappa = cfg.kappa_grid[0]
    pattern = build_pattern(cfg, pattern_seed(cfg.master_seed))
    M = assemble(pattern, cfg.alpha(kappa), trial_seed(cfg.master_seed, 0, 0))
    report = solve_feasibility(M, tol=cfg.solver_tol)
    if args.format == "json" or args.full_state:
        text = report.to_json(full_state=args.full_state) + "\n"
        if args.out:
            with open(args.out, "w") as f:
                f.write(text)
        else:
            sys.stdout.write(text)
    else:
        scalars = report.scalar_dict()
        _write_rows(args, list(scalars), [tuple(scalars.values())], _meta(cfg))
        return 0
    if args.out:
        with open(args.out + ".meta.json", "w") as f:
            json.dump(_meta(cfg), f, indent=2)
            f.write("\n")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    t0 = time.time()
    result = run_feasibility_sweep(cfg, workers=args.threads)
    header = list(result.CSV_COLUMNS)
    rows = [tuple(r[c] for c in header) for r in result.rows]
    meta = _meta(cfg, wall_time_s=time.time() - t0)
    _write_rows(args, header, rows, meta)
    return 0


def cmd_histogram(args) -> int:
    cfg = _load_config(args)
    t0 = time.time()
    result = run_abundance_histogram(cfg, args.kappa, bins=args.bins, workers=args.threads)
    header, rows = result.bin_rows()
    meta = _meta(
        cfg,
        wall_time_s=time.time() - t0,
        kappa=args.kappa,
        mean=result.mean,
        variance=result.variance,
        pooled=result.pooled,
        diverged=result.diverged,
    )
    _write_rows(args, header, rows, meta)
    return 0


def cmd_dynamics(args) -> int:
    cfg = _load_config(args)
    t0 = time.time()
    trace = run_dynamics_trace(cfg, args.kappa)
    header, rows = trace.record.series_rows()
    meta = _meta(cfg, wall_time_s=time.time() - t0, kappa=args.kappa)
    _write_rows(args, header, rows, meta)
    if args.out:
        t_header, t_rows = trace.trace_rows()
        with open(args.out + ".traces.csv", "w") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(t_header)
            writer.writerows(t_rows)
    return 0


def cmd_spectrum(args) -> int:
    cfg = _load_config(args)
    t0 = time.time()
    result = run_spectrum_check(cfg, args.kappa, workers=args.threads)
    header = list(result.CSV_COLUMNS)
    rows = [tuple(r[c] for c in header) for r in result.rows]
    meta = _meta(
        cfg,
        wall_time_s=time.time() - t0,
        kappa=args.kappa,
        skipped=result.skipped,
        mean_max_real_part=result.mean_max_real_part,
        mean_localization_error=result.mean_localization_error,
    )
    _write_rows(args, header, rows, meta)
    return 0


def cmd_gap(args) -> int:
    gaps = run_singular_gap_trials(
        args.n, args.d, args.trials, args.seed, model=args.model
    )
    header = ["trial", "min_gap"]
    rows = list(enumerate(gaps))
    meta = _meta(
        None, n=args.n, d=args.d, trials=args.trials, seed=args.seed,
        min_over_trials=min(gaps),
    )
    _write_rows(args, header, rows, meta)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparselv",
        description="Sparse Lotka-Volterra feasibility and stability experiments",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pattern", help="generate a d-regular adjacency pattern")
    _add_common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--model", choices=("block_permutation", "general_regular", "full", "proportional"))
    p.add_argument("--beta", type=float)
    p.set_defaults(func=cmd_pattern)

    p = sub.add_parser("solve", help="solve one feasibility instance")
    _add_common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--model", choices=("block_permutation", "general_regular", "full", "proportional"))
    p.add_argument("--beta", type=float)
    p.add_argument("--kappa", type=float, help="alpha = sqrt(kappa log n)")
    p.add_argument("--full-state", action="store_true", help="include x in JSON output")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="feasibility fraction over a kappa grid")
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("histogram", help="pooled abundance histogram at one kappa")
    _add_common(p)
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--bins", type=int, default=60)
    p.set_defaults(func=cmd_histogram)

    p = sub.add_parser("dynamics", help="trajectory trace for one seeded trial")
    _add_common(p)
    p.add_argument("--kappa", type=float, required=True)
    p.set_defaults(func=cmd_dynamics)

    p = sub.add_parser("spectrum", help="Jacobian spectra at feasible equilibria")
    _add_common(p)
    p.add_argument("--kappa", type=float, required=True)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("gap", help="singular-gap Monte Carlo")
    _add_common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--model", choices=("block_permutation", "general_regular", "full"), default="general_regular")
    p.set_defaults(func=cmd_gap)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID_CONFIG
    except (DivergenceError, EquilibriumError, IntegrationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL_FAILURE


if __name__ == "__main__":
    sys.exit(main())
