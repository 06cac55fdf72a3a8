"""Command-line interface.

Subcommands: ``run`` (simulate and write JSONL ledgers), ``paired-deviation``
(profit of one misreporting agent against its truthful twin),
``report`` (aggregate run files into plot-ready CSVs), ``gen-data``
(synthetic labeled corpus), and ``validate-config``.

Errors print a single line ``error [category] message`` to stderr and exit
with a category-specific code: 2 for config problems, 3 for data problems,
4 for filesystem problems.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .config import ConfigError, ExperimentConfig
from .core import ConfigurationError
from .dataio import (
    ConvergenceError,
    ParseError,
    generate_synthetic_dataset,
    load_examples,
    read_run,
    write_examples,
    write_run,
)
from .experiment import paired_deviation_runs, prepare_dataset, run_metadata, run_single
from .metrics import build_series, loglog_tail_slope

__all__ = ["main", "write_histogram_csv", "write_regret_csv"]


def _mean_stderr(stacked: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Row-wise mean and standard error across runs (axis 0 indexes runs).
    mean = stacked.mean(axis=0)
    if stacked.shape[0] < 2:
        return mean, np.zeros_like(mean)
    return mean, stacked.std(axis=0, ddof=1) / np.sqrt(stacked.shape[0])


def write_regret_csv(
    path: Path,
    welfare_mean: np.ndarray,
    welfare_stderr: np.ndarray,
    revenue_mean: np.ndarray,
    revenue_stderr: np.ndarray,
) -> None:
    """Plot-ready cumulative-regret curves: one row per round."""
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t", "welfare_mean", "welfare_stderr", "revenue_mean", "revenue_stderr"])
        for i in range(welfare_mean.shape[0]):
            writer.writerow(
                [
                    i + 1,
                    repr(float(welfare_mean[i])),
                    repr(float(welfare_stderr[i])),
                    repr(float(revenue_mean[i])),
                    repr(float(revenue_stderr[i])),
                ]
            )


def write_histogram_csv(path: Path, loss_mean: np.ndarray, loss_stderr: np.ndarray) -> None:
    """Per-agent welfare-loss histogram: one row per agent."""
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["agent", "welfare_loss_mean", "welfare_loss_stderr"])
        for agent in range(loss_mean.shape[0]):
            writer.writerow(
                [agent, repr(float(loss_mean[agent])), repr(float(loss_stderr[agent]))]
            )


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    config = ExperimentConfig.from_file(args.config)
    overrides: dict[str, Any] = {}
    if getattr(args, "master_seed", None) is not None:
        overrides["master_seed"] = args.master_seed
    if getattr(args, "seeds", None) is not None:
        overrides["n_seeds"] = args.seeds
    if getattr(args, "output_dir", None) is not None:
        overrides["output_dir"] = args.output_dir
    if overrides:
        config = config.replace(**overrides).validate()
    return config


def _load_examples_if_needed(config: ExperimentConfig):
    if config.data_source != "csv":
        return None
    return prepare_dataset(load_examples(config.data_path), config.pca_components)


def _cmd_run(args: argparse.Namespace) -> int:
    config = _load_config(args)
    examples = _load_examples_if_needed(config)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    finals_welfare, finals_revenue, min_net = [], [], []
    welfare_curves, revenue_curves = [], []
    for seed_index in range(config.n_seeds):
        run = run_single(config, seed_index, examples)
        series = build_series(run)
        path = out_dir / f"{config.mechanism}_seed{seed_index:03d}.jsonl"
        write_run(
            path,
            run.records,
            series,
            run_metadata(run),
            include_contexts=not args.skip_contexts,
        )
        welfare_curves.append(series.cumulative_welfare_regret)
        revenue_curves.append(series.cumulative_revenue_regret)
        finals_welfare.append(series.cumulative_welfare_regret[-1])
        finals_revenue.append(series.cumulative_revenue_regret[-1])
        min_net.append(series.net_utility.sum(axis=0).min())
        print(
            f"seed {seed_index:3d}: welfare_regret={finals_welfare[-1]:.3f} "
            f"revenue_regret={finals_revenue[-1]:.3f} "
            f"explored={run.explored.mean():.4f} -> {path}"
        )
    welfare_mean, _ = _mean_stderr(np.stack(welfare_curves))
    revenue_mean, _ = _mean_stderr(np.stack(revenue_curves))
    print(
        f"final welfare regret: mean={np.mean(finals_welfare):.3f} "
        f"stderr={_stderr(finals_welfare):.3f}"
    )
    print(
        f"final revenue regret: mean={np.mean(finals_revenue):.3f} "
        f"stderr={_stderr(finals_revenue):.3f}"
    )
    print(f"tail slope welfare: {_slope_or_na(welfare_mean)}")
    print(f"tail slope revenue: {_slope_or_na(revenue_mean)}")
    print(f"worst final agent net utility: {min(min_net):.3f}")
    return 0


def _stderr(values: Sequence[float]) -> float:
    if len(values) < 2:
        return 0.0
    return float(np.std(values, ddof=1) / np.sqrt(len(values)))


def _slope_or_na(curve: np.ndarray) -> str:
    try:
        return f"{loglog_tail_slope(curve):.4f}"
    except ValueError:
        return "n/a"


def _cmd_paired_deviation(args: argparse.Namespace) -> int:
    config = _load_config(args)
    examples = _load_examples_if_needed(config)
    pairs = paired_deviation_runs(config, args.agent, args.strategy, examples)
    from .metrics import estimation_error_trace, per_round_profit

    profits, quartile_means, error_sums = [], [], []
    for truthful_run, deviant_run in pairs:
        profile = per_round_profit(truthful_run, deviant_run, args.agent)
        profits.append(float(profile.sum()))
        quartile_means.append(float(profile[3 * len(profile) // 4 :].mean()))
        errors = estimation_error_trace(truthful_run.true_means, truthful_run.estimates)
        error_sums.append(float(errors.sum()))
        print(
            f"seed {truthful_run.seed_index:3d}: profit={profits[-1]:+.4f} "
            f"last_quartile_per_round={quartile_means[-1]:+.6f}"
        )
    bound = 6.0 * float(np.mean(error_sums))
    print(f"agent {args.agent} strategy {args.strategy}")
    print(f"mean profit: {np.mean(profits):+.4f} stderr={_stderr(profits):.4f}")
    print(f"profit bound (6 x cumulative estimate error): {bound:.4f}")
    print(
        f"last-quartile per-round profit: mean={np.mean(quartile_means):+.6f} "
        f"stderr={_stderr(quartile_means):.6f}"
    )
    if args.out:
        with Path(args.out).open("w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["seed", "profit", "last_quartile_per_round"])
            for seed_index, (profit, quartile) in enumerate(zip(profits, quartile_means)):
                writer.writerow([seed_index, repr(profit), repr(quartile)])
    return 0


_COMPARABLE_EXEMPT = {
    "mechanism",
    "seeds.master",
    "seeds.count",
    "output.dir",
    "agents.deviant_index",
    "agents.deviant_strategy",
}


def _cmd_report(args: argparse.Namespace) -> int:
    groups: dict[str, list[tuple[dict, list[dict]]]] = {}
    signatures = set()
    for file_path in args.files:
        metadata, rows = read_run(file_path)
        echo = metadata["config"]
        signature = tuple(
            (k, repr(v)) for k, v in sorted(echo.items()) if k not in _COMPARABLE_EXEMPT
        )
        signatures.add(signature)
        groups.setdefault(echo["mechanism"], []).append((metadata, rows))
    if len(signatures) > 1 and not args.allow_mixed:
        raise ConfigError(
            "run files come from incompatible configs; pass --allow-mixed to force"
        )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    print(f"{'mechanism':18s} {'runs':>4s} {'welfare_slope':>14s} {'revenue_slope':>14s}")
    for mechanism in sorted(groups):
        entries = groups[mechanism]
        horizon = min(len(rows) for _, rows in entries)
        welfare = np.stack(
            [
                np.cumsum([row["welfare_regret_increment"] for row in rows[:horizon]])
                for _, rows in entries
            ]
        )
        revenue = np.stack(
            [
                np.cumsum([row["revenue_regret_increment"] for row in rows[:horizon]])
                for _, rows in entries
            ]
        )
        losses = []
        for _, rows in entries:
            n_agents = len(rows[0]["net_utility"])
            per_agent = np.zeros(n_agents)
            for row in rows[:horizon]:
                per_agent[row["allocated_agent"]] += row["welfare_regret_increment"]
            losses.append(per_agent)
        welfare_mean, welfare_stderr = _mean_stderr(welfare)
        revenue_mean, revenue_stderr = _mean_stderr(revenue)
        loss_mean, loss_stderr = _mean_stderr(np.stack(losses))
        write_regret_csv(
            out_dir / f"regret_{mechanism}.csv",
            welfare_mean,
            welfare_stderr,
            revenue_mean,
            revenue_stderr,
        )
        write_histogram_csv(out_dir / f"histogram_{mechanism}.csv", loss_mean, loss_stderr)
        print(
            f"{mechanism:18s} {len(entries):4d} {_slope_or_na(welfare_mean):>14s} "
            f"{_slope_or_na(revenue_mean):>14s}"
        )
    print(f"wrote CSVs to {out_dir}")
    return 0


def _cmd_gen_data(args: argparse.Namespace) -> int:
    examples = generate_synthetic_dataset(args.examples, args.features, args.seed)
    write_examples(args.out, examples)
    print(f"wrote {len(examples)} examples with {args.features} features to {args.out}")
    return 0


def _cmd_validate_config(args: argparse.Namespace) -> int:
    config = ExperimentConfig.from_file(args.config)
    print("ok")
    for key, value in sorted(config.echo().items()):
        print(f"{key} = {value}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="feedauction",
        description="Repeated-auction simulator with binary comparison feedback.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="simulate one mechanism and write JSONL ledgers")
    run_p.add_argument("--config", required=True, help="flat key=value config file")
    run_p.add_argument("--output-dir", help="override output.dir")
    run_p.add_argument("--master-seed", type=int, help="override seeds.master")
    run_p.add_argument("--seeds", type=int, help="override seeds.count")
    run_p.add_argument(
        "--skip-contexts",
        action="store_true",
        help="omit per-round context matrices from the ledgers",
    )
    run_p.set_defaults(func=_cmd_run)

    dev_p = sub.add_parser(
        "paired-deviation",
        help="profit of one misreporting agent against its truthful twin",
    )
    dev_p.add_argument("--config", required=True)
    dev_p.add_argument("--agent", type=int, required=True, help="deviating agent index")
    dev_p.add_argument(
        "--strategy", required=True, help="e.g. always_high or threshold_shift:-0.2"
    )
    dev_p.add_argument("--master-seed", type=int, help="override seeds.master")
    dev_p.add_argument("--seeds", type=int, help="override seeds.count")
    dev_p.add_argument("--out", help="optional per-seed profit CSV")
    dev_p.set_defaults(func=_cmd_paired_deviation)

    report_p = sub.add_parser("report", help="aggregate run files into plot-ready CSVs")
    report_p.add_argument("files", nargs="+", help="JSONL run files")
    report_p.add_argument("--out", required=True, help="directory for the CSVs")
    report_p.add_argument(
        "--allow-mixed",
        action="store_true",
        help="aggregate files even if their configs differ beyond the mechanism",
    )
    report_p.set_defaults(func=_cmd_report)

    gen_p = sub.add_parser("gen-data", help="generate a synthetic labeled corpus")
    gen_p.add_argument("--out", required=True, help="CSV path to write")
    gen_p.add_argument("--examples", type=int, default=2000)
    gen_p.add_argument("--features", type=int, default=60)
    gen_p.add_argument("--seed", type=int, default=7)
    gen_p.set_defaults(func=_cmd_gen_data)

    validate_p = sub.add_parser("validate-config", help="check a config file and echo it")
    validate_p.add_argument("--config", required=True)
    validate_p.set_defaults(func=_cmd_validate_config)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ConfigurationError) as exc:
        print(f"error [config] {exc}", file=sys.stderr)
        return 2
    except (ParseError, ConvergenceError, ValueError) as exc:
        print(f"error [data] {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error [io] {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
