"""Command line entry point: one subcommand per stage plus run-all."""
import asyncio
import logging
from typing import Sequence

import click

from .exceptions import PvYieldError
from .pipeline import RUN_ALL, Pipeline, load_config


def _options(func):
    options = [
        click.option('--config', 'config_path', type=click.Path(dir_okay=False), help='TOML config file.'),
        click.option('--input-dir', type=click.Path(file_okay=False), help='Directory holding the input files.'),
        click.option('--out', help='Output directory (s3: key prefix).'),
        click.option('--scenario', 'scenarios', type=int, multiple=True, help='Scenario id, repeatable.'),
        click.option('--year', type=int, help='Restrict to one calendar year.'),
        click.option('--seed', type=int, help='Base seed.'),
        click.option('--threads', type=click.IntRange(min=1), help='Days estimated concurrently.'),
        click.option('--storage', type=click.Choice(['local', 'memory', 's3']), help='Output sink.'),
        click.option('-v', '--verbose', is_flag=True, help='Debug logging.'),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _run(stages: Sequence[str], config_path=None, verbose=False, **flags):
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO,
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    try:
        config = load_config(config_path, {'scenarios': list(flags.pop('scenarios', ())) or None, **flags})
        pipeline = Pipeline(config)
    except PvYieldError as err:
        raise click.ClickException(str(err)) from err
    results = asyncio.run(pipeline(*stages))
    for result in results:
        if not result.status:
            raise click.ClickException(f'{result.stage}: {result.error}')
        click.echo(f'{result.stage}: {result.message}')
    return pipeline


@click.group()
def cli():
    """Estimate national and regional PV yields from logger samples, a capacity register and gridded irradiance."""


@cli.command()
@_options
def synth(**kwargs):
    """Generate a synthetic dataset with known yields into the input directory."""
    _run(['synth'], **kwargs)


@cli.command()
@_options
def clean(**kwargs):
    """Run the quality checks and write the daily reliable set."""
    _run(['clean'], **kwargs)


@cli.command()
@_options
def grid(**kwargs):
    """Aggregate irradiance to daily totals and match postal codes to cells."""
    _run(['grid'], **kwargs)


@cli.command()
@_options
def estimate(**kwargs):
    """Estimate daily and annual national yields per scenario."""
    _run(['estimate'], **kwargs)


@cli.command()
@_options
def regional(**kwargs):
    """Downscale the national estimates to municipalities."""
    _run(['regional'], **kwargs)


@cli.command('run-all')
@_options
def run_all(**kwargs):
    """Run clean, grid, estimate, regional and report."""
    pipeline = _run(RUN_ALL, **kwargs)
    click.echo(asyncio.run(pipeline.engine.load('report.txt')).decode())


@cli.command()
@_options
def report(**kwargs):
    """Summarise the estimates as text tables and write the scenario index."""
    pipeline = _run(['report'], **kwargs)
    click.echo(asyncio.run(pipeline.engine.load('report.txt')).decode())


if __name__ == '__main__':
    cli()
