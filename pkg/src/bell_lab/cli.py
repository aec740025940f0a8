#!/usr/bin/env python3
"""Command-line interface for bell-lab."""

import sys
import logging
from pathlib import Path
from typing import Optional

import click
from dotenv import load_dotenv
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from . import __version__
from .config import FORMATS, ConfigLoader
from .errors import BellLabError, ConfigValidationError
from .experiments import run_experiment
from .reports import ExperimentResult, report_emit

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

# Reports go to stdout or a file; everything else goes to stderr.
console = Console(stderr=True)


def setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.INFO,
        format="%(message)s",
        handlers=[RichHandler(console=console, rich_tracebacks=True)]
    )
    logging.getLogger().setLevel(logging.DEBUG if verbose else logging.INFO)


def print_summary(result: ExperimentResult, destination: str) -> None:
    """Render the headline numbers of a run as a small table."""
    table = Table(title=f"bell-lab {result.experiment}", show_header=True, header_style="bold cyan")
    table.add_column("quantity")
    table.add_column("value", justify="right")
    for label, value in result.summary:
        if isinstance(value, float):
            value = f"{value:.10g}"
        table.add_row(str(label), str(value))
    table.add_row("report", destination)
    console.print(table)


def write_report(data: bytes, out: Optional[str]) -> str:
    if out is None:
        stream = click.get_binary_stream('stdout')
        stream.write(data)
        stream.flush()
        return "stdout"
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)
    logger.info(f"Report written to {path}")
    return str(path)


@click.group()
@click.version_option(__version__, prog_name="bell-lab")
def main():
    """Local-causality and Bell-inequality experiments driven by JSON configs."""
    load_dotenv()


@main.command()
@click.argument('config_path', type=click.Path(dir_okay=False))
@click.option('-o', '--out', default=None, help='Report path (default: config output.path, else stdout)')
@click.option('-f', '--format', 'fmt', type=click.Choice(FORMATS), default=None,
              help='Report format (default: config output.format)')
@click.option('-w', '--workers', type=click.IntRange(min=1), default=None,
              help='Worker threads for Monte Carlo (overrides BELL_LAB_WORKERS)')
@click.option('-s', '--seed', type=int, default=None, help='Seed (overrides BELL_LAB_SEED and the config)')
@click.option('-v', '--verbose', is_flag=True, help='Enable verbose logging')
@click.option('-q', '--quiet', is_flag=True, help='Do not print the run summary')
def run(config_path: str, out: Optional[str], fmt: Optional[str], workers: Optional[int],
        seed: Optional[int], verbose: bool, quiet: bool):
    """Run the experiment described by CONFIG_PATH."""
    setup_logging(verbose)
    try:
        config = ConfigLoader().load(config_path, seed=seed, workers=workers, out=out, fmt=fmt)
        result = run_experiment(config)
        data = report_emit(result, config.output.format)
        destination = write_report(data, config.output.path)
    except ConfigValidationError as e:
        console.print(f"[red]Invalid config {config_path}:[/red]")
        for pointer, message in e.problems:
            console.print(f"  [yellow]{pointer or '/'}[/yellow]: {message}")
        sys.exit(EXIT_VALIDATION)
    except BellLabError as e:
        console.print(f"[red]Error: {e}[/red]")
        if verbose:
            console.print_exception()
        sys.exit(EXIT_RUNTIME)
    except Exception as e:
        console.print(f"[red]Unexpected error: {type(e).__name__}: {e}[/red]")
        if verbose:
            console.print_exception()
        sys.exit(EXIT_RUNTIME)

    if not quiet:
        print_summary(result, destination)
    sys.exit(EXIT_OK)


if __name__ == '__main__':
    main()
