"""Command-line entry points.

Global flags (--config, --seed, --out-dir, --threads) precede a
subcommand: simulate, fixed-points, phase-scan, discriminate, channel.
Exit codes: 0 success, 1 validation error, 2 runtime error.
"""

from __future__ import annotations

import sys

import click

from . import scenario as scn

_KIND_BY_COMMAND = {
    "simulate": scn.SimulateScenario,
    "fixed-points": scn.FixedPointsScenario,
    "phase-scan": scn.PhaseScanScenario,
    "discriminate": scn.DiscriminateScenario,
    "channel": scn.ChannelScenario,
}


@click.group()
@click.option("--config", type=click.Path(), default=None, help="Scenario TOML file.")
@click.option("--seed", type=int, default=None, help="Override the scenario seed.")
@click.option("--out-dir", type=click.Path(), default="ptpflow-out", show_default=True)
@click.option("--threads", type=int, default=1, show_default=True)
@click.pass_context
def cli(ctx, config, seed, out_dir, threads):
    """Nonlinear PTP qubit channels: flows, fixed points, discrimination."""
    if threads < 1:
        raise scn.ScenarioError(f"--threads must be >= 1, got {threads}")
    ctx.obj = {"config": config, "seed": seed, "out_dir": out_dir, "threads": threads}


def _load_config_scenario(ctx, command):
    path = ctx.obj["config"]
    if path is None:
        return None
    try:
        with open(path) as f:
            text = f.read()
    except OSError as exc:
        raise scn.ScenarioError(f"cannot read config {path}: {exc}") from exc
    scenario = scn.parse_scenario(text)
    expected = _KIND_BY_COMMAND[command]
    if not isinstance(scenario, expected):
        raise scn.ScenarioError(
            f"config kind {scenario.kind!r} does not match subcommand {command!r}"
        )
    return scenario


def _execute(ctx, scenario):
    written = scn.run_scenario(
        scenario, ctx.obj["out_dir"], threads=ctx.obj["threads"], seed=ctx.obj["seed"]
    )
    for path in written:
        click.echo(str(path))


@cli.command()
@click.option("--preset", type=click.Choice(sorted(scn.PRESETS)), default=None)
@click.pass_context
def simulate(ctx, preset):
    """Run a seeded uniform-in-ball ensemble of the dissipative torsion flow."""
    scenario = _load_config_scenario(ctx, "simulate")
    if scenario is None:
        if preset is None:
            raise scn.ScenarioError("simulate needs --config or --preset")
        scenario = scn.parse_scenario(f'kind = "simulate"\npreset = "{preset}"\n')
    _execute(ctx, scenario)


@cli.command("fixed-points")
@click.option("--m", "m", type=float, default=None)
@click.option("--gamma", type=float, default=None)
@click.option("--g", "g", type=float, default=None)
@click.pass_context
def fixed_points(ctx, m, gamma, g):
    """Closed-form fixed points, Jacobian eigenvalues, and stability."""
    scenario = _load_config_scenario(ctx, "fixed-points")
    if scenario is None:
        if None in (m, gamma, g):
            raise scn.ScenarioError("fixed-points needs --config or all of --m --gamma --g")
        scenario = scn.FixedPointsScenario(m=m, gamma=gamma, g=g)
    _execute(ctx, scenario)


@cli.command("phase-scan")
@click.pass_context
def phase_scan_cmd(ctx):
    """Label a 2-D parameter grid by its fixed-point phase."""
    scenario = _load_config_scenario(ctx, "phase-scan")
    if scenario is None:
        raise scn.ScenarioError("phase-scan needs --config")
    _execute(ctx, scenario)


@cli.command()
@click.option("--m", "m", type=float, default=None)
@click.option("--gamma", type=float, default=None)
@click.option("--g", "g", type=float, default=None)
@click.option("--k", "k_values", type=int, multiple=True)
@click.option("--trials", type=int, default=100, show_default=True)
@click.option("--noise-sigma", type=float, default=0.0, show_default=True)
@click.pass_context
def discriminate(ctx, m, gamma, g, k_values, trials, noise_sigma):
    """State-discrimination trials across the separatrix."""
    scenario = _load_config_scenario(ctx, "discriminate")
    if scenario is None:
        if None in (m, gamma, g) or not k_values:
            raise scn.ScenarioError(
                "discriminate needs --config or all of --m --gamma --g plus --k"
            )
        scenario = scn.DiscriminateScenario(
            m=m, gamma=gamma, g=g, k_values=tuple(k_values), trials=trials, noise_sigma=noise_sigma
        )
    _execute(ctx, scenario)


@cli.command()
@click.pass_context
def channel(ctx):
    """Decompose and classify a channel specification."""
    scenario = _load_config_scenario(ctx, "channel")
    if scenario is None:
        raise scn.ScenarioError("channel needs --config")
    _execute(ctx, scenario)


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
    except scn.ScenarioError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        sys.exit(1)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.Abort:
        sys.exit(1)
    except Exception as exc:  # runtime failures, IO included
        click.echo(f"runtime error: {exc}", err=True)
        sys.exit(2)
    sys.exit(0)


if __name__ == "__main__":
    main()
