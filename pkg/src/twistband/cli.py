"""Command line front end.

Commands: bands | critical | mourre | flow | tube | report.
Exit codes: 0 ok, 2 config error, 3 solver failure, 4 critical-energy.
"""

from __future__ import annotations

import os
import sys

import click

from .config import load_config
from .errors import (
    ConfigError,
    CoverageError,
    CriticalEnergyError,
    MemoryGuardError,
    RefinementFailureError,
    SolverError,
    TrackingAmbiguityError,
)
from .runner import Session, run_bands, run_critical, run_flow, run_mourre, run_report, run_tube

EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_CRITICAL = 4


def _session(config_path, out, jobs, seed) -> Session:
    config = load_config(config_path)
    if out is not None:
        config.output_dir = out
    if jobs is not None:
        config.jobs = jobs
    if seed is not None:
        config.seed = seed
    if config.jobs < 1:
        config.jobs = max(1, os.cpu_count() or 1)
    return Session(config)


def _run(stage, config_path, out, jobs, seed, extra_check=None):
    try:
        session = _session(config_path, out, jobs, seed)
        if extra_check is not None:
            extra_check(session.config)
        stage(session)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except CriticalEnergyError as exc:
        click.echo(f"critical-energy error: {exc}", err=True)
        sys.exit(EXIT_CRITICAL)
    except (SolverError, TrackingAmbiguityError, RefinementFailureError,
            CoverageError, MemoryGuardError) as exc:
        click.echo(f"solver error: {exc}", err=True)
        sys.exit(EXIT_SOLVER)
    click.echo(f"wrote outputs to {session.config.output_dir}")


CONFIG_OPT = click.option("--config", "config_path", required=True,
                          type=click.Path(), help="JSON run configuration.")
OUT_OPT = click.option("--out", default=None, type=click.Path(), help="Output directory.")
JOBS_OPT = click.option("--jobs", default=None, type=int,
                        help="Worker threads for k sweeps (0 = logical cores).")
SEED_OPT = click.option("--seed", default=None, type=int,
                        help="Seed for stochastic trace estimation.")


def _command(fn, extra_check=None):
    @CONFIG_OPT
    @OUT_OPT
    @JOBS_OPT
    @SEED_OPT
    def cmd(config_path, out, jobs, seed):
        _run(fn, config_path, out, jobs, seed, extra_check)

    cmd.__doc__ = fn.__doc__
    return cmd


@click.group()
def main():
    """Band structure and Mourre-estimate toolkit for twisted waveguides."""


def _check_energies(config):
    if not config.energies:
        raise ConfigError("mourre command needs a nonempty 'energies' list", field="energies")


def _check_tube(config):
    if config.tube is None:
        raise ConfigError("tube command needs a 'tube' config section", field="tube")


main.command("bands")(_command(run_bands))
main.command("critical")(_command(run_critical))
main.command("mourre")(_command(run_mourre, extra_check=_check_energies))
main.command("flow")(_command(run_flow))
main.command("tube")(_command(run_tube, extra_check=_check_tube))
main.command("report")(_command(run_report))


if __name__ == "__main__":
    main()
