import logging
import sys
from typing import Optional, Sequence

import click

from ..config import ExportFormat, load_config
from ..errors import PyaevError
from ..event_bus import events
from ..signals import Signals
from .pipeline import Pipeline


def print_event(message, **fields):
    click.echo(message)


def print_warning(message, **fields):
    click.echo(f"warning: {message}", err=True)


def _attach_console(verbose: bool):
    if print_event not in events.consumers.get(Signals.LOG, []):
        events.consumer(Signals.LOG)(print_event)
        events.consumer(Signals.WARNING)(print_warning)
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")


@click.group()
@click.option('--config', '-c', 'config_path', type=click.Path(dir_okay=False), default=None,
              help="TOML run configuration")
@click.option('--set', 'overrides', multiple=True, metavar="SECTION.KEY=VALUE",
              help="Override one config key; repeatable")
@click.option('--output', '-o', default=None, help="Output directory (overrides run.output_dir)")
@click.option('--force', is_flag=True, help="Recompute cached stages and reuse a directory made from other inputs")
@click.option('--verbose', '-v', is_flag=True, help="Debug logging")
@click.pass_context
def cli(ctx, config_path, overrides, output, force, verbose):
    """Aggregated EV fleet flexibility: generate, dispatch, aggregate, evaluate"""
    _attach_console(verbose)
    overrides = list(overrides)
    if output is not None:
        overrides.append(f"run.output_dir={output!r}")
    cfg = load_config(config_path, overrides)
    pipeline = Pipeline(cfg, force=force)
    pipeline.check_directory()
    ctx.obj = pipeline
    ctx.with_resource(pipeline.recording())


@cli.command()
@click.pass_obj
def gen(pipeline: Pipeline):
    """Generate (or load) the fleet and the price series"""
    pipeline.gen()


@cli.command()
@click.pass_obj
def reference(pipeline: Pipeline):
    """Dispatch every vehicle and sum the fleet reference"""
    pipeline.reference()


@cli.command()
@click.pass_obj
def sa(pipeline: Pipeline):
    """Simple aggregation with constant factors and its dispatch"""
    pipeline.sa()


@cli.command()
@click.option('--n', 'group_width', type=int, required=True, help="Group width in hours")
@click.option('--strict', is_flag=True, help="Fail unless proven optimal and validated")
@click.pass_obj
def bilevel(pipeline: Pipeline, group_width: int, strict: bool):
    """Fit scaling factors of one group width"""
    pipeline.bilevel(group_width, strict=strict)


@cli.command()
@click.pass_obj
def evaluate(pipeline: Pipeline):
    """Compare every approach against the reference; write report and figure data"""
    pipeline.evaluate()


@cli.command()
@click.pass_obj
def full(pipeline: Pipeline):
    """Run every stage"""
    pipeline.full()


@cli.command()
@click.option('--n', 'group_width', type=int, required=True)
@click.option('--format', 'fmt', type=click.Choice([f.value for f in ExportFormat]), default=ExportFormat.MPS.value)
@click.pass_obj
def export(pipeline: Pipeline, group_width: int, fmt: str):
    """Write the big-M single-level model for an external MILP solver"""
    path = pipeline.export(group_width, ExportFormat(fmt))
    click.echo(str(path))


def main(argv: Optional[Sequence[str]] = None):
    try:
        cli.main(args=argv, prog_name="pyaev", standalone_mode=False)
    except PyaevError as e:
        click.echo(f"error: {e.message}", err=True)
        sys.exit(e.exit_code)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        sys.exit(1)
    except click.ClickException as e:
        e.show()
        sys.exit(2)
    except OSError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(5)


if __name__ == "__main__":
    main()
