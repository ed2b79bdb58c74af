"""Command-line front end for training, thresholding, sweeps, and benchmarks.

Exit codes: 0 success, 2 configuration problems (bad config file, unknown
method tags, invalid values), 3 runtime failures (diverged training,
unwritable paths, and so on). FEDTHRESH_THREADS caps worker threads.
"""
import functools
import sys
from dataclasses import replace
from pathlib import Path

import click

from .benchmark import format_bench, run_bench
from .errors import ConfigError, StageError
from .harness import (ScenarioConfig, audit_channel, build_followup_dataset,
                      run_scenario, sweep_clients, sweep_corruption,
                      train_model)
from .thresholds import METHOD_TAGS
from .util import derive_seed


def _guard(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except (ConfigError, StageError) as exc:
            cause = getattr(exc, "cause", None)
            config_side = isinstance(exc, ConfigError) or \
                isinstance(cause, ConfigError)
            click.echo(f"error: {exc}", err=True)
            sys.exit(2 if config_side else 3)
        except Exception as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(3)
    return wrapper


def _load(config_path, seed=None, methods=()):
    cfg = ScenarioConfig.from_file(config_path)
    if seed is not None:
        # one CLI seed fans out to decorrelated per-stage seeds
        cfg = replace(cfg,
                      data_seed=derive_seed(seed, 0),
                      model_seed=derive_seed(seed, 1),
                      partition_seed=derive_seed(seed, 2),
                      train_seed=derive_seed(seed, 3),
                      corruption_seed=derive_seed(seed, 4))
    if methods:
        cfg = replace(cfg, methods=tuple(methods))
    return cfg


def _parse_counts(raw: str):
    try:
        return [int(part) for part in raw.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"counts must be comma-separated integers, "
                          f"got {raw!r}") from None


config_option = click.option("--config", "config_path", required=True,
                             type=click.Path(), help="Scenario JSON file.")
seed_option = click.option("--seed", type=int, default=None,
                           help="Override every stage seed from one value.")
out_option = click.option("--out", "out_dir", type=click.Path(), default=None,
                          help="Output directory for CSV artifacts.")


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def main():
    """Federated anomaly-threshold experiment runner."""


@main.command()
@config_option
@seed_option
@out_option
@_guard
def train(config_path, seed, out_dir):
    """FedAvg-train the shared autoencoder and save it."""
    cfg = _load(config_path, seed)
    _, round_log = train_model(cfg, out_dir)
    final = [r for r in round_log if r["round"] == cfg.rounds - 1]
    mean_mse = sum(r["local_final_mse"] for r in final) / max(len(final), 1)
    click.echo(f"trained {cfg.rounds} rounds x {cfg.num_clients} clients; "
               f"final mean local MSE {mean_mse:.6g}")
    if out_dir:
        click.echo(f"wrote model + round log to {out_dir}")


@main.command()
@config_option
@seed_option
@out_option
@click.option("--method", "methods", multiple=True,
              type=click.Choice(METHOD_TAGS),
              help="Restrict to these methods (repeatable).")
@_guard
def threshold(config_path, seed, out_dir, methods):
    """Run one full scenario: train, select thresholds, score test F1."""
    cfg = _load(config_path, seed, methods)
    artifacts = {}
    rows = run_scenario(cfg, out_dir=out_dir, artifacts=artifacts)
    audit_channel(artifacts["channel"], cfg.num_clients, cfg.rounds,
                  methods=[m for m in cfg.methods
                           if m in ("our_method", "fed_mse_std",
                                    "fed_filtered")])
    width = max(len(m) for m in cfg.methods) + 2
    click.echo(f"{'method':<{width}}{'global_f1':>10}{'threshold':>14}")
    for row in rows:
        if row.client_id == "global":
            click.echo(f"{row.method:<{width}}{row.f1:>10.4f}"
                       f"{row.threshold:>14.6g}")
    if out_dir:
        click.echo(f"wrote artifacts to {out_dir}")


@main.command()
@out_option
@click.option("--n-errors", type=int, default=200_000, show_default=True)
@click.option("--n-candidates", type=int, default=1000, show_default=True)
@click.option("--repeats", type=int, default=5, show_default=True)
@_guard
def bench(out_dir, n_errors, n_candidates, repeats):
    """Time the F1-sweep backends against each other."""
    results = run_bench(n_errors, n_candidates, repeats)
    click.echo(format_bench(results))
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        lines = ["backend,n_errors,n_candidates,repeats,best_ms,mean_ms"]
        for r in results:
            lines.append(f"{r.backend},{r.n_errors},{r.n_candidates},"
                         f"{r.repeats},{r.best_ms!r},{r.mean_ms!r}")
        (out / "bench.csv").write_text("\n".join(lines) + "\n",
                                       encoding="utf-8")
        click.echo(f"wrote {out / 'bench.csv'}")


@main.command("sweep-clients")
@config_option
@seed_option
@out_option
@click.option("--counts", required=True,
              help="Comma-separated client counts, each >= 2.")
@_guard
def sweep_clients_cmd(config_path, seed, out_dir, counts):
    """Rerun the scenario across client counts."""
    cfg = _load(config_path, seed)
    results = sweep_clients(cfg, _parse_counts(counts), out_dir)
    for count, rows in results.items():
        best = max((r for r in rows if r.client_id == "global"),
                   key=lambda r: r.f1)
        click.echo(f"{count} clients: best global F1 {best.f1:.4f} "
                   f"({best.method})")
    if out_dir:
        click.echo(f"wrote sweep CSVs to {out_dir}")


@main.command("sweep-corruption")
@config_option
@seed_option
@out_option
@click.option("--counts", required=True,
              help="Comma-separated corrupt-client counts.")
@click.option("--retrain", is_flag=True,
              help="Retrain the model at each corruption level.")
@_guard
def sweep_corruption_cmd(config_path, seed, out_dir, counts, retrain):
    """Corrupt growing client sets and redo threshold selection."""
    cfg = _load(config_path, seed)
    results = sweep_corruption(cfg, _parse_counts(counts), out_dir, retrain)
    for count, rows in results.items():
        ours = [r for r in rows
                if r.client_id == "global" and r.method == "our_method"]
        shown = ours[0] if ours else max(
            (r for r in rows if r.client_id == "global"), key=lambda r: r.f1)
        click.echo(f"{count} corrupt: {shown.method} global F1 "
                   f"{shown.f1:.4f}")
    if out_dir:
        click.echo(f"wrote corruption_sweep.csv to {out_dir}")


@main.command("followup-dataset")
@config_option
@seed_option
@out_option
@click.option("--runs", type=int, default=10, show_default=True,
              help="Scenario repetitions; each client contributes one row "
                   "per run.")
@_guard
def followup_dataset(config_path, seed, out_dir, runs):
    """Build the per-client summary-feature dataset and its correlations."""
    cfg = _load(config_path, seed)
    rows, corr, constant = build_followup_dataset(cfg, runs, out_dir)
    label_corr = corr[-1]
    click.echo(f"{len(rows)} feature rows; "
               f"{int(constant.sum())} constant columns")
    click.echo(f"strongest |corr| with f1_difference: "
               f"{max(abs(label_corr[:-1])):.3f}")
    if out_dir:
        click.echo(f"wrote followup CSVs to {out_dir}")


if __name__ == "__main__":
    main()
