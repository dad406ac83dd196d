"""muralctl: compile plans, run missions headless, serve the API.

`plan` turns an SVG into a saved mission plan, `simulate` flies one
without a server, `serve` exposes the HTTP/WebSocket API, and
`calibrate` solves the ground camera pose from correspondences.
"""

from __future__ import annotations

import json
import logging
import sys
from dataclasses import replace

import click
import numpy as np

from .config import load_config
from .errors import MuralError
from .localization import CameraModel, calibrate_camera, save_calibration
from .mission import MissionRunner, load_checkpoint, select_paths
from .planner import PlanParams, compile_mission, load_plan, save_plan
from .simulation import SimWorld, paint_needed_g
from .svg import map_to_wall, parse_svg

log = logging.getLogger(__name__)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="debug logging")
def main(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )


def _parse_rect(text: str) -> tuple[float, float, float, float]:
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 4:
        raise click.BadParameter("expected x0,z0,width,height")
    return tuple(parts)  # type: ignore[return-value]


def _parse_selection(plan, text: str) -> list[int]:
    if ".." in text:
        a, b = text.split("..", 1)
        return select_paths(plan, span=(int(a), int(b)))
    return select_paths(plan, ids=[int(v) for v in text.split(",")])


@main.command("plan")
@click.argument("svg", type=click.Path(exists=True, dir_okay=False))
@click.option("--wall-rect", default="0,0,10,6", show_default=True,
              help="target rectangle on the wall: x0,z0,width,height in m")
@click.option("-o", "--output", required=True, type=click.Path())
@click.option("--spacing", default=0.12, show_default=True,
              help="infill line spacing, m")
@click.option("--extension", default=0.30, show_default=True,
              help="lead-in/lead-out length, m")
@click.option("--speed", default=0.5, show_default=True,
              help="target drawing speed, m/s")
def cmd_plan(svg: str, wall_rect: str, output: str, spacing: float,
             extension: float, speed: float) -> None:
    """Compile an SVG into a mission plan file."""
    with open(svg, "rb") as fh:
        raw = fh.read()
    try:
        pset = parse_svg(raw)
        for w in pset.warnings:
            click.echo(f"warning: {w}", err=True)
        mapped = map_to_wall(pset, _parse_rect(wall_rect))
        params = PlanParams(infill_spacing=spacing, extension_len=extension,
                            target_speed=speed)
        plan = compile_mission(mapped, params)
    except MuralError as exc:
        raise click.ClickException(str(exc))
    save_plan(plan, output)
    stroke_m = sum(p.chain.arc_length() for p in plan.draw_paths)
    paint = paint_needed_g(plan, speed, 2.0)
    click.echo(f"{len(plan.draw_paths)} paths, {stroke_m:.2f} m of stroke, "
               f"about {paint:.0f} g of paint -> {output}")


@main.command("simulate")
@click.argument("plan_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", default=0, show_default=True)
@click.option("--wind", default=None, type=float,
              help="override gust sigma, m/s")
@click.option("--config", "config_path", default=None,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--select", "select_spec", default=None,
              help="path subset: 'a..b' range or comma-separated ids")
@click.option("--checkpoint", default=None, type=click.Path(),
              help="checkpoint file to write (and resume from)")
@click.option("--resume", is_flag=True,
              help="resume from the checkpoint file")
@click.option("--raster-out", default=None, type=click.Path(),
              help="write the painted wall as PNG")
@click.option("--events-out", default=None, type=click.Path(),
              help="write the event feed as JSON")
@click.option("--max-time", default=600.0, show_default=True,
              help="sim-time budget, s")
def cmd_simulate(plan_file: str, seed: int, wind: float | None,
                 config_path: str | None, select_spec: str | None,
                 checkpoint: str | None, resume: bool,
                 raster_out: str | None, events_out: str | None,
                 max_time: float) -> None:
    """Fly a plan headless in the simulator and report the outcome."""
    cfg = load_config(config_path)
    sim = cfg.sim if wind is None else replace(cfg.sim, wind_sigma=wind)
    world = SimWorld(cfg.wall_width, cfg.wall_height, cfg.camera, cfg.mount,
                     params=sim, seed=seed, start_pos=cfg.start_pos)
    try:
        plan = load_plan(plan_file)
        runner = MissionRunner(plan, world, gains=cfg.gains, link=cfg.link,
                               guards=cfg.guards, seed=seed, dt=cfg.dt,
                               checkpoint_path=checkpoint)
        if select_spec:
            runner.selection = _parse_selection(plan, select_spec)
        if resume:
            if not checkpoint:
                raise click.ClickException("--resume needs --checkpoint")
            runner.apply_checkpoint(load_checkpoint(checkpoint))
    except MuralError as exc:
        raise click.ClickException(str(exc))

    runner.start()
    runner.run(max_t=max_time)

    st = world.state
    codes = runner.events.codes()
    click.echo(f"phase:     {runner.phase}")
    click.echo(f"paths:     {codes.count('path_completed')} completed, "
               f"{codes.count('path_retry')} retried")
    click.echo(f"paint:     {world.params.paint_full_g - st.paint_g:.1f} g "
               f"used, {st.paint_g:.1f} g left")
    click.echo(f"battery:   {st.battery * 100:.0f}%")
    click.echo(f"sim time:  {st.time:.1f} s")
    if world.band_violations:
        click.echo(f"warning: {world.band_violations} spray ticks outside "
                   "the standoff band", err=True)
    if raster_out:
        world.raster.save_png(raster_out)
        click.echo(f"raster -> {raster_out}")
    if events_out:
        with open(events_out, "w", encoding="utf-8") as fh:
            json.dump([e.to_json() for e in runner.events.events], fh,
                      indent=1)
        click.echo(f"events -> {events_out}")
    sys.exit(0 if runner.phase == "landed" else 1)


@main.command("serve")
@click.option("--config", "config_path", default=None,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--checkpoint", default=None, type=click.Path())
@click.option("--realtime", is_flag=True,
              help="pace the sim at wall-clock speed instead of flat out")
def cmd_serve(config_path: str | None, host: str, port: int,
              checkpoint: str | None, realtime: bool) -> None:
    """Serve the mission HTTP API and /stream socket."""
    from .service import run_server

    run_server(config_path, host, port, checkpoint,
               speed=1.0 if realtime else 0.0)


@main.command("calibrate")
@click.argument("correspondences", type=click.Path(exists=True,
                                                   dir_okay=False))
@click.option("-o", "--output", default="calibration.json",
              show_default=True, type=click.Path())
def cmd_calibrate(correspondences: str, output: str) -> None:
    """Solve the ground camera pose from wall/pixel correspondences.

    The input JSON needs `image_points` ([[px, py], ...]),
    `wall_points` ([[x, z], ...] in meters), and an `intrinsics` table
    (fx, fy, cx, cy, width, height).
    """
    with open(correspondences, encoding="utf-8") as fh:
        doc = json.load(fh)
    image = np.asarray(doc["image_points"], dtype=float)
    wall = np.asarray(doc["wall_points"], dtype=float)
    intr = doc["intrinsics"]
    base = CameraModel(fx=float(intr["fx"]), fy=float(intr["fy"]),
                       cx=float(intr["cx"]), cy=float(intr["cy"]),
                       width=int(intr.get("width", 1920)),
                       height=int(intr.get("height", 1080)))
    try:
        cam, rms = calibrate_camera(image, wall, base)
    except MuralError as exc:
        raise click.ClickException(str(exc))
    save_calibration(output, cam, rms, image, wall)
    click.echo(f"camera at ({cam.pos[0]:.3f}, {cam.pos[1]:.3f}, "
               f"{cam.pos[2]:.3f}) m, reprojection rms {rms:.3f} px "
               f"-> {output}")


if __name__ == "__main__":
    main()
