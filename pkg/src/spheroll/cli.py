"""Command line entry point.

Every command writes its files under ``--out-dir`` and prints a tab-separated
summary to stdout. The exit code is 0 only when every enabled check passes.
"""

import math
import os
import sys

import click

from spheroll import quasistatic, stability
from spheroll.errors import SchemaError, SpherollError
from spheroll.harness import config as cfgmod
from spheroll.harness import scenarios


def _load(ctx, kind):
    opts = ctx.obj
    if opts["config"]:
        cfg = cfgmod.load(opts["config"])
        if cfg.kind != kind:
            cfg = cfg.replace(kind=kind)
    else:
        cfg = cfgmod.default_config(kind)
    changes = {}
    if opts["seed"] is not None:
        changes["seed"] = opts["seed"]
    if opts["strict_contact"]:
        changes["strict_contact"] = True
    if opts["workers"] is not None:
        changes["workers"] = opts["workers"]
    cfg = cfg.replace(**changes)
    if opts["out_dir"] is not None:
        cfg = cfg.replace(output=cfgmod.OutputSettings(opts["out_dir"], cfg.output.plots))
    if opts["plots"]:
        cfg = cfg.replace(output=cfgmod.OutputSettings(cfg.output.dir, True))
    return cfgmod.validate(cfg)


def _robot(ctx):
    if ctx.obj["config"]:
        return cfgmod.load(ctx.obj["config"]).robot
    return cfgmod.ScenarioConfig(kind="circle").robot


def _out_dir(ctx):
    d = ctx.obj["out_dir"] or "out"
    os.makedirs(d, exist_ok=True)
    return d


def _emit(lines):
    for line in lines:
        click.echo(line)


@click.group()
@click.option("--config", "config", type=click.Path(exists=True, dir_okay=False), help="Scenario config JSON.")
@click.option("--out-dir", "out_dir", type=click.Path(file_okay=False), default=None, help="Output directory.")
@click.option("--seed", type=int, default=None, help="Seed for the optional disturbance noise.")
@click.option("--strict-contact", is_flag=True, help="Abort a run when the ground contact is lost or slips.")
@click.option("--workers", type=int, default=None, help="Process pool size for independent points.")
@click.option("--plots", is_flag=True, help="Also render PNG figures next to the CSV files.")
@click.pass_context
def main(ctx, config, out_dir, seed, strict_contact, workers, plots):
    """Simulate and steer a pendulum-driven spherical robot."""
    ctx.obj = dict(config=config, out_dir=out_dir, seed=seed, strict_contact=strict_contact, workers=workers, plots=plots)


@main.group("quasistatic")
def quasistatic_group():
    """Steady revolving states."""


@quasistatic_group.command("sweep")
@click.option("--omega0-max", type=float, default=3 * math.pi, show_default=True)
@click.option("--points", type=int, default=50, show_default=True)
@click.pass_context
def quasistatic_sweep(ctx, omega0_max, points):
    """Solve the steady state over a driving-speed grid."""
    p = _robot(ctx)
    table = quasistatic.sweep(p, quasistatic.default_grid(omega0_max, points))
    out = _out_dir(ctx)
    path = os.path.join(out, "quasistatic.csv")
    table.to_csv(path)
    click.echo("\t".join(quasistatic.TABLE_CSV_COLUMNS))
    for row in table.rows():
        click.echo("\t".join(f"{v:.9g}" for v in row))
    if ctx.obj["plots"]:
        from spheroll.harness import plots

        plots.quasistatic_curves(path, os.path.join(out, "quasistatic.png"))


@main.group("stability")
def stability_group():
    """Linear stability of the steady states."""


@stability_group.command("sweep")
@click.option("--omega0-max", type=float, default=3 * math.pi, show_default=True)
@click.option("--points", type=int, default=50, show_default=True)
@click.pass_context
def stability_sweep(ctx, omega0_max, points):
    """Eigenvalues and recovery time over a driving-speed grid."""
    p = _robot(ctx)
    table = quasistatic.sweep(p, quasistatic.default_grid(omega0_max, points))
    reports = stability.sweep(p, table)
    out = _out_dir(ctx)
    locus = os.path.join(out, "eigenvalue_locus.csv")
    stability.write_locus_csv(reports, locus)
    click.echo("omega0\ttau\tstable\tdominant_re\tdominant_im")
    for rep in reports:
        lam = rep.dominant
        click.echo(f"{rep.omega0:.9g}\t{rep.tau:.9g}\t{int(rep.stable)}\t{lam.real:.9g}\t{lam.imag:.9g}")
    if ctx.obj["plots"]:
        from spheroll.harness import plots

        plots.eigenvalue_locus(locus, os.path.join(out, "eigenvalue_locus.png"))
    if not all(rep.stable for rep in reports):
        ctx.exit(1)


@main.group("sim")
def sim_group():
    """Simulated experiments."""


def _run_scenario(ctx, kind):
    cfg = _load(ctx, kind)
    out = cfg.output.dir
    os.makedirs(out, exist_ok=True)
    cfg.write(os.path.join(out, f"{kind}_config.json"))
    report = scenarios.run(cfg, out)
    report.write(os.path.join(out, f"{kind}_report.json"))
    if cfg.output.plots:
        _plot_scenario(cfg, report, out)
    _emit(report.summary_lines())
    click.echo(f"RESULT\t{'PASS' if report.passed else 'FAIL'}")
    if not report.passed:
        ctx.exit(1)


def _plot_scenario(cfg, report, out):
    from spheroll.harness import plots

    if cfg.kind == "open-loop-sweep":
        plots.open_loop_comparison(os.path.join(out, "open_loop_compare.csv"), os.path.join(out, "open_loop.png"))
        return
    trajs = [os.path.join(out, r["trajectory"]) for r in report.metrics if r.get("trajectory")]
    trajs = sorted(set(trajs))
    if cfg.kind == "circle":
        circles = [(tuple(cfg.circle.center), r) for r in cfg.circle.radii]
        plots.paths(trajs, os.path.join(out, "circle_paths.png"), targets=[tuple(cfg.circle.center)], circles=circles)
    else:
        targets = [(pt["x"], pt["y"]) for pt in cfg.waypoints.points]
        plots.paths(trajs, os.path.join(out, "waypoints_path.png"), targets=targets)


@sim_group.command("open-loop")
@click.pass_context
def sim_open_loop(ctx):
    """Constant driving speeds; fitted circles against the steady-state solution."""
    _run_scenario(ctx, "open-loop-sweep")


@sim_group.command("circle")
@click.pass_context
def sim_circle(ctx):
    """Closed-loop capture of target circles."""
    _run_scenario(ctx, "circle")


@sim_group.command("waypoints")
@click.pass_context
def sim_waypoints(ctx):
    """Closed-loop waypoint sequence with timed stops."""
    _run_scenario(ctx, "waypoints")


@main.group("report")
def report_group():
    """Compare run reports."""


def _numeric_pairs(a, b, prefix=""):
    if isinstance(a, dict) and isinstance(b, dict):
        for key in sorted(set(a) | set(b)):
            yield from _numeric_pairs(a.get(key), b.get(key), f"{prefix}{key}.")
    elif isinstance(a, list) and isinstance(b, list) and len(a) == len(b):
        for i, (x, y) in enumerate(zip(a, b)):
            yield from _numeric_pairs(x, y, f"{prefix}{i}.")
    elif isinstance(a, (int, float)) and isinstance(b, (int, float)) and not isinstance(a, bool):
        yield prefix.rstrip("."), float(a), float(b)
    elif a != b:
        yield prefix.rstrip("."), a, b


@report_group.command("compare")
@click.argument("first", type=click.Path(exists=True, dir_okay=False))
@click.argument("second", type=click.Path(exists=True, dir_okay=False))
@click.option("--rtol", type=float, default=0.0, show_default=True)
@click.option("--atol", type=float, default=0.0, show_default=True)
@click.pass_context
def report_compare(ctx, first, second, rtol, atol):
    """Metric-by-metric comparison of two report files."""
    a = scenarios.RunReport.read(first).to_dict()
    b = scenarios.RunReport.read(second).to_dict()
    click.echo("metric\tfirst\tsecond\tok")
    ok_all = True
    for key, x, y in _numeric_pairs(a["metrics"], b["metrics"], "metrics."):
        if isinstance(x, float) and isinstance(y, float):
            same = (math.isnan(x) and math.isnan(y)) or abs(x - y) <= atol + rtol * abs(y)
        else:
            same = False
        ok_all &= same
        click.echo(f"{key}\t{x}\t{y}\t{int(same)}")
    click.echo(f"RESULT\t{'MATCH' if ok_all else 'DIFFER'}")
    if not ok_all:
        ctx.exit(1)


def run():
    try:
        code = main(standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except click.exceptions.Abort:
        sys.exit(1)
    except SchemaError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    except SpherollError as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        sys.exit(1)
    sys.exit(code if isinstance(code, int) else 0)
