import asyncio
import json
import logging
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional, Tuple

import click
from rich.table import Table

from median_adversary.config import settings
from median_adversary.core import metric_io
from median_adversary.core.errors import MedianAdversaryError
from median_adversary.main import configure_logging, stderr_console
from median_adversary.models.schemas import SweepPlan
from median_adversary.services import experiment_service
from median_adversary.services.adversary import DeltaParam
from median_adversary.services.algorithms import AlgorithmId, available_algorithms
from median_adversary.services.recovery import build_query_graph
from median_adversary.services.sweep import run_sweep, write_records

logger = logging.getLogger(__name__)

VALIDATION_FAILED = 2


@contextmanager
def reported_errors() -> Iterator[None]:
    """Turn package errors into a JSON diagnostic and the matching exit code"""
    try:
        yield
    except MedianAdversaryError as e:
        logger.error(f"{type(e).__name__}: {e.message}")
        click.echo(json.dumps(e.to_diagnostic(), default=str))
        sys.exit(e.exit_code)


@click.group()
@click.version_option(settings.app_version, prog_name=settings.app_name)
@click.option("--log-level", default=None, help="Override the configured log level")
def main(log_level: Optional[str]):
    """Adversarial lower-bound harness for metric 1-median algorithms"""
    configure_logging(log_level)


@main.command()
@click.option("--n", "n", required=True, type=int, help="Number of points")
@click.option("--delta", required=True, help="delta as num/den, below 1/10")
@click.option("--alg", default="pivot", show_default=True, help="Algorithm id: name or name:param")
@click.option("--budget", type=int, default=None, help="Cap on distinct queries")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None, help="Write the record here")
@click.option("--format", "fmt", type=click.Choice(["csv", "jsonl"]), default="jsonl", show_default=True)
@click.option("--export-instance", type=click.Path(dir_okay=False, path_type=Path), default=None)
@click.option("--export-metric", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Dense metric text file of the finalized instance")
@click.option("--export-trace", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Algorithm query trace as JSON lines")
@click.option("--export-queries", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Every frozen pair, padding included, as a query-set file for recover --queries")
@click.option("--full-validate", is_flag=True, help="Run the full validator regardless of n")
@click.option("--pad-heavy", is_flag=True, help="Pad heavy points to full degree")
@click.option("--omit-timing", is_flag=True, help="Leave wall_time_ms empty")
def run(
    n: int,
    delta: str,
    alg: str,
    budget: Optional[int],
    out: Optional[Path],
    fmt: str,
    export_instance: Optional[Path],
    export_metric: Optional[Path],
    export_trace: Optional[Path],
    export_queries: Optional[Path],
    full_validate: bool,
    pad_heavy: bool,
    omit_timing: bool,
):
    """Run one algorithm against a fresh adversary"""
    with reported_errors():
        outcome = experiment_service.run(
            n,
            DeltaParam.parse(delta),
            AlgorithmId.parse(alg),
            budget=budget,
            pad_heavy=pad_heavy or settings.heavy_padding,
            full_validate=full_validate,
            omit_timing=omit_timing,
        )
        if export_instance is not None:
            metric_io.write_instance(outcome.instance.to_export(), export_instance)
        if export_metric is not None:
            with open(export_metric, "w", encoding="utf-8") as f:
                metric_io.write_dense_metric(outcome.instance.metric, f, max_n=settings.dense_max_n)
        if export_trace is not None:
            with open(export_trace, "w", encoding="utf-8") as f:
                for line in outcome.trace.to_jsonl():
                    f.write(line + "\n")
        if export_queries is not None:
            m = outcome.instance.metric
            with open(export_queries, "w", encoding="utf-8") as f:
                metric_io.write_query_set(build_query_graph(m, outcome.instance.log.iter_seq()), f)

    stderr_console.print(_report_table(outcome.report.model_dump(mode="json")))
    if out is None:
        click.echo(outcome.record.model_dump_json())
    else:
        with open(out, "w", encoding="utf-8", newline="") as f:
            write_records([outcome.record], f, fmt)


@main.command()
@click.option("--n", "n_values", multiple=True, type=int, required=True, help="Repeatable point count")
@click.option("--delta", "deltas", multiple=True, required=True, help="Repeatable delta as num/den")
@click.option("--alg", "algorithms", multiple=True, help="Repeatable algorithm id")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None)
@click.option("--format", "fmt", type=click.Choice(["csv", "jsonl"]), default="csv", show_default=True)
@click.option("--budget", type=int, default=None)
@click.option("--workers", type=int, default=None, help="Parallel cells (MEDIAN_ADVERSARY_WORKERS wins)")
@click.option("--pad-heavy", is_flag=True, help="Pad heavy points to full degree")
@click.option("--omit-timing", is_flag=True, help="Leave wall_time_ms empty")
def sweep(
    n_values: Tuple[int, ...],
    deltas: Tuple[str, ...],
    algorithms: Tuple[str, ...],
    out: Optional[Path],
    fmt: str,
    budget: Optional[int],
    workers: Optional[int],
    pad_heavy: bool,
    omit_timing: bool,
):
    """Run a grid of (n, delta, algorithm) cells"""
    plan = SweepPlan(
        n_values=list(n_values),
        deltas=list(deltas),
        algorithms=list(algorithms),
        out=out,
        format=fmt,
        budget=budget,
        omit_timing=omit_timing,
        pad_heavy=pad_heavy or settings.heavy_padding,
    )
    with reported_errors():
        records = asyncio.run(run_sweep(plan, workers=settings.resolve_workers(workers)))

    if plan.out is None:
        write_records(records, sys.stdout, plan.format)
    else:
        with open(plan.out, "w", encoding="utf-8", newline="") as f:
            write_records(records, f, plan.format)
        logger.info(f"Wrote {len(records)} records to {plan.out}")


@main.command()
@click.argument("path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--mode", type=click.Choice(["full", "structured"]), default="full", show_default=True)
@click.option("--median", is_flag=True, help="Add the exact median, its cost and closeness")
def validate(path: Path, mode: str, median: bool):
    """Check a dense metric file"""
    with reported_errors():
        result = experiment_service.validate(path, mode, median=median)
    click.echo(json.dumps(result))
    if not result["ok"]:
        sys.exit(VALIDATION_FAILED)


@main.command()
@click.option("--instance", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None,
              help="Exported instance JSON")
@click.option("--metric", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None,
              help="Dense metric text file")
@click.option("--queries", default=None, help="'all', 'logged' (instance pairs) or a query-set file")
def recover(instance: Optional[Path], metric: Optional[Path], queries: Optional[str]):
    """Shortest-path recovery of a metric from observed pairs"""
    source = queries or ("logged" if instance is not None else "all")
    with reported_errors():
        m = experiment_service.load_metric(instance=instance, metric=metric)
        graph = experiment_service.query_graph(m, source if source in ("all", "logged") else Path(source), instance)
        record = experiment_service.recover(m, graph)
    click.echo(record.model_dump_json())


@main.command(name="algorithms")
def list_algorithms():
    """List registered algorithm names"""
    for name in available_algorithms():
        click.echo(name)


def _report_table(report: dict) -> Table:
    table = Table(title="Instance report", show_header=False)
    for key, value in report.items():
        table.add_row(key, str(value))
    return table


if __name__ == "__main__":
    main()
