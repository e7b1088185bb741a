"""Command-line entry point: ``meadd run|preset|plot-data|robustness|drag``."""

from __future__ import annotations

import json
import os
import sys
from dataclasses import replace

import click
import numpy as np

from .harness import (
    PRESETS,
    ConfigError,
    ConfigMismatch,
    UnknownKind,
    emit_plot_data,
    load_config,
    named_gate,
    preset_path,
    run_experiment,
)
from .pulses import PulseEnvelope, drag_envelope, integrate_three_level, power_law_exponent
from .robustness import DD_LAYERS, robustness_verdict

EXIT_CONFIG = 1
EXIT_CHECK = 2


def _apply_overrides(cfg, seed, shots, exact):
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    noise = dict(cfg.noise)
    if exact:
        noise["shots"] = None
    elif shots is not None:
        noise["shots"] = shots
    return replace(cfg, noise=noise)


def _execute(source, seed, shots, exact, jobs, out, check, force):
    try:
        cfg = _apply_overrides(load_config(source), seed, shots, exact)
        result = run_experiment(cfg, jobs=jobs or os.cpu_count() or 1, out_dir=out, force=force)
    except (ConfigError, ConfigMismatch) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    for p in result.paths:
        click.echo(f"wrote {p}")
    for label, ok, detail in result.checks:
        click.echo(f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
    if check and not result.passed:
        sys.exit(EXIT_CHECK)


def _run_options(f):
    opts = [
        click.option("--seed", type=int, default=None, help="Override the config seed."),
        click.option("--shots", type=int, default=None, help="Override shots per circuit."),
        click.option("--exact", is_flag=True, help="Exact expectation values (infinite shots)."),
        click.option("--jobs", type=int, default=None, help="Worker processes (default: all cores)."),
        click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory."),
        click.option("--check", is_flag=True, help="Exit with status 2 if a declared expectation fails."),
        click.option("--force", is_flag=True, help="Overwrite outputs written by a different config."),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Gate characterization by amplifying matrix elements with dynamical decoupling."""


@main.command()
@click.argument("config", type=click.Path(dir_okay=False))
@_run_options
def run(config, seed, shots, exact, jobs, out, check, force):
    """Run the experiment described by a YAML CONFIG file."""
    _execute(config, seed, shots, exact, jobs, out, check, force)


@main.command()
@click.argument("name", type=click.Choice(PRESETS))
@_run_options
def preset(name, seed, shots, exact, jobs, out, check, force):
    """Run one of the bundled configs."""
    _execute(preset_path(name), seed, shots, exact, jobs, out, check, force)


@main.command("plot-data")
@click.argument("table", type=click.Path(exists=True, dir_okay=False))
@click.argument("kind")
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Directory for series files.")
def plot_data(table, kind, out):
    """Write x/y series files from a result TABLE (kinds: fig5, fig6, drag, variance)."""
    try:
        paths = emit_plot_data(table, kind, out)
    except UnknownKind as exc:
        click.echo(str(exc), err=True)
        sys.exit(EXIT_CONFIG)
    for p in paths:
        click.echo(f"wrote {p}")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


@main.command()
@click.argument("gate")
@click.argument("dd", type=click.Choice(sorted(DD_LAYERS)))
@click.option("--alternating-idle", is_flag=True, help="Apply the gate only in every other cycle.")
@click.option("--json", "as_json", is_flag=True, help="Emit the report as JSON.")
def robustness(gate, dd, alternating_idle, as_json):
    """First-order robustness report for GATE (CZ, sqrt_iSWAP, iSWAP or F:theta,phi) under DD."""
    try:
        u = named_gate(gate)
    except (ConfigError, ValueError, SyntaxError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    rep = robustness_verdict(u, dd, alternating_idle, name=gate)
    if as_json:
        d = {
            "gate": rep.gate,
            "dd": rep.dd,
            "alternating_idle": rep.alternating_idle,
            "eigenphases": rep.eigenphases,
            "trivial_flags": rep.trivial_flags,
            "min_cancel_cycles": rep.min_cancel_cycles,
            "robust": rep.robust,
            "notes": rep.notes,
        }
        click.echo(json.dumps(_jsonable(d), indent=2))
    else:
        click.echo("\n".join(rep.lines()))


def _parse_range(text: str) -> np.ndarray:
    """"a:b:n" for n points from a to b, or a comma list."""
    if ":" in text:
        a, b, n = text.split(":")
        return np.linspace(float(a), float(b), int(n))
    return np.array([float(x) for x in text.split(",")])


@main.command()
@click.argument("eta_range")
@click.option("--mu", type=float, default=np.pi, show_default=True, help="Rotation angle of the pulse.")
@click.option("--steps", type=int, default=2000, show_default=True, help="Integration steps per pulse.")
def drag(eta_range, mu, steps):
    """Leakage with and without DRAG over ETA_RANGE (eta*T), e.g. 14:38:7."""
    try:
        etas = _parse_range(eta_range)
    except ValueError:
        click.echo(f"config error: cannot parse range {eta_range!r}", err=True)
        sys.exit(EXIT_CONFIG)
    if np.any(etas <= 0):
        click.echo("config error: eta*T must be positive", err=True)
        sys.exit(EXIT_CONFIG)
    plain, dragged = [], []
    click.echo("eta_T,leakage_plain,leakage_drag,ratio")
    for eta in etas:
        p = PulseEnvelope(amplitude=mu)
        a = abs(integrate_three_level(p, eta, steps).leakage_amplitude)
        b = abs(integrate_three_level(drag_envelope(p, eta), eta, steps).leakage_amplitude)
        plain.append(a)
        dragged.append(b)
        click.echo(f"{eta:.6g},{a:.6e},{b:.6e},{b / a:.4f}")
    if len(etas) > 1:
        click.echo(f"# plain leakage exponent: {power_law_exponent(etas, plain):.3f}")


if __name__ == "__main__":
    main()
