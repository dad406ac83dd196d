"""TOML configuration for the whole stack.

One file configures the wall, the ground camera rig, the LiDAR and
dynamics simulation, the controller gains, both telemetry channels,
and the auto-landing guards. Every key has a default, so an empty
file (or no file) yields a runnable nominal setup.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields, replace

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

import numpy as np

from .comms import ChannelConfig
from .control import ControllerGains
from .localization import CameraModel, MountGeometry
from .simulation import SimParams

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GuardConfig:
    battery_min: float = 0.15  # fraction, land below this
    paint_reserve_g: float = 20.0  # keep this much in the can
    drain_warn_per_s: float = 3.0 / 1200.0  # battery rate worth a warning

    def __post_init__(self) -> None:
        if not 0.0 <= self.battery_min < 1.0:
            raise ValueError("battery_min must be in [0, 1)")
        if self.paint_reserve_g < 0:
            raise ValueError("paint_reserve_g must be >= 0")


@dataclass(frozen=True)
class LinkSettings:
    key: bytes = b"mural-default-key"
    primary: ChannelConfig = field(
        default_factory=lambda: ChannelConfig(latency_mean=0.01,
                                              latency_jitter=0.005))
    backup: ChannelConfig = field(
        default_factory=lambda: ChannelConfig(latency_mean=0.05,
                                              latency_jitter=0.02))
    backup_rate_hz: float = 10.0  # backup sends at this rate, primary every tick
    failover_timeout_s: float = 0.2  # newest pose older than this → stale

    def __post_init__(self) -> None:
        if not self.key:
            raise ValueError("link key must be non-empty")
        if self.backup_rate_hz <= 0 or self.failover_timeout_s <= 0:
            raise ValueError("backup rate and timeout must be > 0")


@dataclass(frozen=True)
class AppConfig:
    wall_width: float = 10.0
    wall_height: float = 6.0
    camera: CameraModel = field(default_factory=lambda: _default_camera())
    mount: MountGeometry = field(default_factory=MountGeometry)
    sim: SimParams = field(default_factory=SimParams)
    gains: ControllerGains = field(default_factory=ControllerGains)
    link: LinkSettings = field(default_factory=LinkSettings)
    guards: GuardConfig = field(default_factory=GuardConfig)
    seed: int = 0
    dt: float = 0.02  # s, mission tick
    start_pos: tuple[float, float, float] = (0.5, 1.0, 0.0)


def _default_camera() -> CameraModel:
    return CameraModel(fx=2000.0, fy=2000.0, cx=960.0, cy=540.0,
                       width=1920, height=1080,
                       pos=np.array([5.0, 15.0, 2.0]))


def _pick(table: dict, cls, **extra):
    """Build a dataclass from matching table keys plus overrides."""
    names = {f.name for f in fields(cls)}
    kwargs = {k: v for k, v in table.items() if k in names}
    kwargs.update(extra)
    unknown = set(table) - names - set(extra) - {"position", "rotation"}
    for k in sorted(unknown):
        log.warning("ignoring unknown config key %r for %s", k, cls.__name__)
    return cls(**kwargs)


def _camera_from(table: dict) -> CameraModel:
    cam = _default_camera()
    names = {"fx", "fy", "cx", "cy", "width", "height"}
    for k, v in table.items():
        if k in names:
            setattr(cam, k, v)
    if "position" in table:
        cam.pos = np.asarray(table["position"], dtype=float)
    if "rotation" in table:
        r = np.asarray(table["rotation"], dtype=float)
        if r.shape != (3, 3):
            raise ValueError("camera rotation must be a 3x3 row list")
        cam.r_wc = r
    return cam


def load_config(path: str | None = None) -> AppConfig:
    """Parse a TOML config file; missing keys fall back to defaults."""
    doc: dict = {}
    if path is not None:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)

    wall = doc.get("wall", {})
    cam_t = doc.get("camera", {})
    lidar = doc.get("lidar", {})
    ctrl = doc.get("controller", {})
    sim_t = doc.get("sim", {})
    link_t = doc.get("link", {})
    guard_t = doc.get("guards", {})

    # LiDAR keys live in their own section but land in SimParams.
    sim_kw = dict(sim_t)
    start = tuple(sim_kw.pop("start", (0.5, 1.0, 0.0)))
    seed = int(sim_kw.pop("seed", 0))
    dt = float(sim_kw.pop("dt", 0.02))
    lidar_map = {"sigma": "lidar_sigma", "outlier_frac": "lidar_outlier_frac",
                 "resolution_deg": "lidar_resolution_deg",
                 "max_range": "lidar_max_range"}
    for src, dst in lidar_map.items():
        if src in lidar:
            sim_kw[dst] = lidar[src]
    sim = _pick(sim_kw, SimParams)

    mount = _pick({k: v for k, v in cam_t.items()
                   if k.startswith("led_")}, MountGeometry)
    cam = _camera_from({k: v for k, v in cam_t.items()
                        if not k.startswith("led_")})

    link_kw = dict(link_t)
    primary_t = link_kw.pop("primary", None)
    backup_t = link_kw.pop("backup", None)
    if "key" in link_kw:
        link_kw["key"] = str(link_kw["key"]).encode()
    link = _pick(link_kw, LinkSettings)
    if primary_t is not None:
        link = replace(link, primary=_pick(primary_t, ChannelConfig))
    if backup_t is not None:
        link = replace(link, backup=_pick(backup_t, ChannelConfig))

    return AppConfig(
        wall_width=float(wall.get("width", 10.0)),
        wall_height=float(wall.get("height", 6.0)),
        camera=cam,
        mount=mount,
        sim=sim,
        gains=_pick(ctrl, ControllerGains),
        link=link,
        guards=_pick(guard_t, GuardConfig),
        seed=seed,
        dt=dt,
        start_pos=start,
    )
