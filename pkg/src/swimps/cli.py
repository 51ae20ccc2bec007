"""swimps command line: run scenarios, serve the gateway, score surveys,
render reports."""

import json
import sys
from pathlib import Path

import click

from .scenario import ScenarioError, load_scenario, run_scenario, scenario_from_dict
from .survey import ResponseSheet, SurveyError, score_sheet, write_table


@click.group()
def main() -> None:
    """Smart water irrigation platform tools."""


@main.command()
@click.option("--scenario", "scenario_path", type=click.Path(), default=None,
              help="Scenario JSON file; omit for the built-in defaults.")
@click.option("--seed", type=int, default=None, help="Override the scenario seed.")
@click.option("--duration", type=int, default=None, help="Override duration in seconds.")
@click.option("--out", "out_dir", type=click.Path(), default="out",
              help="Output directory for metrics.json and gateway.log.")
@click.option("--realtime", is_flag=True, help="Pace ticks against the wall clock.")
@click.option("--speed", type=float, default=60.0, show_default=True,
              help="Simulated seconds per wall second in realtime mode.")
def run(scenario_path, seed, duration, out_dir, realtime, speed) -> None:
    """Run a closed-loop simulation and write its artifacts."""
    try:
        cfg = load_scenario(scenario_path) if scenario_path else scenario_from_dict({})
    except (ScenarioError, FileNotFoundError) as exc:
        raise click.ClickException(str(exc))
    if seed is not None or duration is not None or (realtime and cfg.start_time_ms == 0):
        raw = {
            "duration_s": duration if duration is not None else cfg.duration_s,
            "seed": seed if seed is not None else cfg.seed,
        }
        cfg = _override(cfg, raw, realtime)
    metrics = run_scenario(cfg, out_dir, realtime=realtime, speed=speed)
    click.echo(json.dumps(metrics.to_dict(), indent=2))
    click.echo(f"artifacts written to {out_dir}/", err=True)


def _override(cfg, raw: dict, realtime: bool):
    # Rebuild the frozen parts that depend on the seed.
    import dataclasses
    import time

    from .env import EnvParams

    env_fields = {f.name: getattr(cfg.env, f.name) for f in dataclasses.fields(EnvParams)}
    env_fields["seed"] = raw["seed"]
    start = cfg.start_time_ms
    if realtime and start == 0:
        start = int(time.time() * 1000)
    return dataclasses.replace(
        cfg, duration_s=raw["duration_s"], seed=raw["seed"],
        env=EnvParams(**env_fields), start_time_ms=start,
    )


@main.command()
@click.option("--listen", default="127.0.0.1:8000", show_default=True,
              help="HTTP listen address host:port.")
@click.option("--data", "data_dir", type=click.Path(), default="data", show_default=True,
              help="Deployment directory (gateway.log, registry.json).")
@click.option("--fsync", type=click.Choice(["on", "off"]), default="on", show_default=True,
              help="fsync the log on every append.")
@click.option("--device-port", type=int, default=9763, show_default=True,
              help="TCP port for the binary device transport.")
@click.option("--ui", "ui_dir", type=click.Path(), default=None,
              help="Directory of dashboard static files to serve at /ui "
                   "(default: bundled frontend/dist when present).")
def serve(listen, data_dir, fsync, device_port, ui_dir) -> None:
    """Serve the gateway API, event stream and device transport."""
    import uvicorn

    from .gateway.api import TcpDeviceServer, create_app
    from .gateway.service import GatewayService

    host, _, port = listen.rpartition(":")
    host = host or "127.0.0.1"
    service = GatewayService(data_dir, fsync=(fsync == "on"))
    if ui_dir is None:
        bundled = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        ui_dir = bundled if bundled.is_dir() else None
    device_server = TcpDeviceServer(service, host=host, port=device_port)
    app = create_app(service, ui_dir=ui_dir, device_server=device_server)
    click.echo(f"http on {host}:{port}, device transport on {host}:{device_port}", err=True)
    uvicorn.run(app, host=host, port=int(port), log_level="warning")


@main.command()
@click.option("--input", "input_path", type=click.Path(exists=True), required=True,
              help="Response sheet CSV.")
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Also write the table as JSON.")
def score(input_path, out_path) -> None:
    """Score a Likert response sheet and print the interpretation table."""
    try:
        sheet = ResponseSheet.from_csv(input_path)
        table = score_sheet(sheet)
    except SurveyError as exc:
        raise click.ClickException(str(exc))
    width = max(len(r.characteristic) for r in table.rows)
    for row in table.rows:
        click.echo(f"{row.characteristic:<{width}}  {row.mean}  {row.band}")
    click.echo(f"{'Overall Weighted Mean':<{width}}  {table.overall_mean}  {table.overall_band}")
    if out_path:
        write_table(table, out_path)
        click.echo(f"table written to {out_path}", err=True)


@main.command()
@click.option("--run", "run_dir", type=click.Path(exists=True), required=True,
              help="Directory holding a run's gateway.log.")
@click.option("--out", "out_dir", type=click.Path(), default=None,
              help="Where to put trace.csv and figures (default: the run dir).")
def report(run_dir, out_dir) -> None:
    """Render trace.csv and figures from a finished run."""
    from .report import render_report

    try:
        written = render_report(run_dir, out_dir)
    except FileNotFoundError as exc:
        raise click.ClickException(str(exc))
    for path in written:
        click.echo(str(path))


if __name__ == "__main__":
    sys.exit(main())
