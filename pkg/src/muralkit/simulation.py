"""Deterministic desk-scale stand-in for the drone, wall, and sensors.

Physics is first-order: commanded velocity reaches the airframe through
a time-constant lag plus wind coupling, integrated with the exact
exponential step so results do not depend on dt subdivision. Gusts are
an Ornstein-Uhlenbeck process, also discretized exactly. Every noise
source draws from its own seeded stream so a run is reproducible from
the seed alone.

Paint lands on a fixed-resolution wall raster. The valve has an
actuation delay; open/close events are applied mid-tick so deposition
starts and stops at the commanded positions, not at tick boundaries.
"""

from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .localization import CameraModel, MountGeometry, led_world_positions
from .planner import MissionPlan

log = logging.getLogger(__name__)

BACKGROUND_COLOR = 0
# Deposition only happens inside this standoff band, m from the wall.
SPRAY_BAND = (0.05, 0.10)
WALL_CONTACT_Y = 0.005  # m, prop guards keep the body off the plane

_PALETTE = {
    0: (245, 244, 239),  # bare wall
    1: (25, 25, 28),
    2: (204, 41, 41),
    3: (36, 84, 196),
    4: (32, 150, 65),
    5: (235, 177, 26),
    6: (130, 60, 180),
    7: (240, 120, 40),
}


def palette_rgb(color: int) -> tuple[int, int, int]:
    if color in _PALETTE:
        return _PALETTE[color]
    keys = sorted(k for k in _PALETTE if k > 0)
    return _PALETTE[keys[(color - 1) % len(keys)]]


@dataclass
class SimParams:
    tau_v: float = 0.3  # s, velocity lag time constant
    wind_tau: float = 2.0  # s, gust correlation time
    wind_sigma: float = 0.0  # m/s, stationary gust std per axis
    wind_coupling: float = 0.4  # fraction of gust felt as velocity offset
    lidar_sigma: float = 0.0  # m, radial range noise
    lidar_outlier_frac: float = 0.0
    lidar_resolution_deg: float = 1.0
    lidar_max_range: float = 10.0
    camera_sigma_px: float = 0.0
    camera_distractors: int = 0
    paint_full_g: float = 500.0
    paint_flow_g_s: float = 2.0
    battery_drain_per_s: float = 1.0 / 1200.0
    valve_delay_s: float = 0.15  # s from command to the valve moving
    cell_m: float = 0.01  # raster resolution

    def __post_init__(self) -> None:
        if self.tau_v <= 0 or self.wind_tau <= 0:
            raise ValueError("time constants must be > 0")
        if self.cell_m <= 0:
            raise ValueError("cell size must be > 0")


@dataclass
class DroneState:
    pos: np.ndarray  # (3,) m WallFrame
    vel: np.ndarray = field(default_factory=lambda: np.zeros(3))  # m/s
    yaw: float = 0.0  # rad
    time: float = 0.0  # s
    paint_g: float = 500.0
    battery: float = 1.0  # fraction
    valve_open: bool = False

    def copy(self) -> "DroneState":
        return DroneState(self.pos.copy(), self.vel.copy(), self.yaw,
                          self.time, self.paint_g, self.battery,
                          self.valve_open)


def step_dynamics(state: DroneState, v_cmd: np.ndarray, yaw_rate: float,
                  wind: np.ndarray, dt: float, params: SimParams) -> None:
    """Advance the plant one step.

    Velocity relaxes toward command + coupled wind with the exact
    exponential solution of the first-order lag; position integrates
    the updated velocity (semi-implicit).
    """
    if not 0.0 < dt <= 0.1:
        raise ValueError(f"dt must be in (0, 0.1], got {dt}")
    v_inf = np.asarray(v_cmd, dtype=float) + params.wind_coupling * wind
    decay = math.exp(-dt / params.tau_v)
    state.vel = v_inf + (state.vel - v_inf) * decay
    state.pos = state.pos + state.vel * dt
    state.yaw += yaw_rate * dt
    state.time += dt


class OuWind:
    """Ornstein-Uhlenbeck gust vector with exact discretization."""

    def __init__(self, params: SimParams, rng: np.random.Generator):
        self.params = params
        self.rng = rng
        self.value = np.zeros(3)

    def step(self, dt: float) -> np.ndarray:
        p = self.params
        if p.wind_sigma <= 0:
            return self.value
        decay = math.exp(-dt / p.wind_tau)
        kick = p.wind_sigma * math.sqrt(1.0 - decay * decay)
        self.value = self.value * decay + kick * self.rng.standard_normal(3)
        return self.value


class PaintRaster:
    """Wall paint record: per-cell color id and last path index."""

    def __init__(self, width_m: float, height_m: float, cell_m: float = 0.01):
        if width_m <= 0 or height_m <= 0:
            raise ValueError("wall must have positive size")
        self.cell = cell_m
        self.nx = max(1, int(round(width_m / cell_m)))
        self.nz = max(1, int(round(height_m / cell_m)))
        self.color = np.full((self.nx, self.nz), BACKGROUND_COLOR, dtype=np.int16)
        self.path_idx = np.full((self.nx, self.nz), -1, dtype=np.int32)

    def stamp(self, x: float, z: float, radius: float, color: int,
              path_index: int) -> None:
        """Paint a disc of the given radius centered at (x, z)."""
        c = self.cell
        i0 = max(0, int(math.floor((x - radius) / c)))
        i1 = min(self.nx - 1, int(math.floor((x + radius) / c)))
        j0 = max(0, int(math.floor((z - radius) / c)))
        j1 = min(self.nz - 1, int(math.floor((z + radius) / c)))
        if i1 < i0 or j1 < j0:
            return
        ii = (np.arange(i0, i1 + 1) + 0.5) * c - x
        jj = (np.arange(j0, j1 + 1) + 0.5) * c - z
        mask = ii[:, None] ** 2 + jj[None, :] ** 2 <= radius * radius
        self.color[i0:i1 + 1, j0:j1 + 1][mask] = color
        self.path_idx[i0:i1 + 1, j0:j1 + 1][mask] = path_index

    def stamp_swath(self, p0, p1, radius: float, color: int,
                    path_index: int) -> None:
        """Paint along the straight move from p0 to p1 in the wall plane."""
        p0 = np.asarray(p0, dtype=float)
        p1 = np.asarray(p1, dtype=float)
        dist = float(np.linalg.norm(p1 - p0))
        n = max(1, int(math.ceil(dist / (self.cell * 0.5))))
        for k in range(n + 1):
            q = p0 + (p1 - p0) * (k / n)
            self.stamp(q[0], q[1], radius, color, path_index)

    def painted_mask(self, color: int | None = None) -> np.ndarray:
        if color is None:
            return self.color != BACKGROUND_COLOR
        return self.color == color

    def painted_points(self, color: int | None = None) -> np.ndarray:
        """Centers (x, z) of painted cells, shape (N, 2)."""
        idx = np.argwhere(self.painted_mask(color))
        return (idx + 0.5) * self.cell

    def cells_for_path(self, path_index: int) -> np.ndarray:
        return self.path_idx == path_index

    def to_image(self) -> Image.Image:
        rgb = np.zeros((self.nz, self.nx, 3), dtype=np.uint8)
        for color in np.unique(self.color):
            r, g, b = palette_rgb(int(color))
            sel = (self.color == color).T
            rgb[sel] = (r, g, b)
        return Image.fromarray(rgb[::-1])  # z up -> image rows down

    def to_png_bytes(self) -> bytes:
        buf = io.BytesIO()
        self.to_image().save(buf, format="PNG")
        return buf.getvalue()

    def save_png(self, path: str) -> None:
        self.to_image().save(path, format="PNG")


def render_lidar(state: DroneState, params: SimParams,
                 rng: np.random.Generator) -> np.ndarray:
    """Sensor-frame scan of the wall plane, shape (N, 2).

    Rays sweep the full circle at the configured resolution; those that
    meet the wall inside max range return a radially noisy point, and a
    configured fraction are replaced by uniform clutter.
    """
    n_rays = int(round(360.0 / params.lidar_resolution_deg))
    theta = np.linspace(-math.pi, math.pi, n_rays, endpoint=False)
    dirs = np.column_stack([np.sin(theta), np.cos(theta)])
    # Wall line in the sensor frame: normal (-sin yaw, cos yaw), offset y.
    normal = np.array([-math.sin(state.yaw), math.cos(state.yaw)])
    d = float(state.pos[1])
    toward = dirs @ normal
    with np.errstate(divide="ignore"):
        t = np.where(toward > 1e-6, d / np.where(toward > 1e-6, toward, 1.0),
                     np.inf)
    hit = t <= params.lidar_max_range
    ranges = t[hit]
    if params.lidar_sigma > 0:
        ranges = ranges + rng.normal(0.0, params.lidar_sigma, len(ranges))
    pts = dirs[hit] * ranges[:, None]
    if params.lidar_outlier_frac > 0 and len(pts):
        n_out = int(round(params.lidar_outlier_frac * len(pts)))
        if n_out:
            which = rng.choice(len(pts), size=n_out, replace=False)
            ang = rng.uniform(-math.pi, math.pi, n_out)
            rr = rng.uniform(0.1, params.lidar_max_range, n_out)
            pts[which] = np.column_stack([np.sin(ang), np.cos(ang)]) * rr[:, None]
    return pts


def render_camera(state: DroneState, camera: CameraModel,
                  mount: MountGeometry, params: SimParams,
                  rng: np.random.Generator) -> list[tuple[float, float, float]]:
    """Blob detections (px, py, brightness) for the current drone pose."""
    blobs = []
    for p in led_world_positions(state.pos, state.yaw, mount):
        px = camera.project(p)
        if px is None:
            continue
        u, v = px
        if params.camera_sigma_px > 0:
            u += rng.normal(0.0, params.camera_sigma_px)
            v += rng.normal(0.0, params.camera_sigma_px)
        if 0 <= u < camera.width and 0 <= v < camera.height:
            blobs.append((float(u), float(v), 250.0))
    for _ in range(params.camera_distractors):
        blobs.append((
            float(rng.uniform(0, camera.width)),
            float(rng.uniform(0, camera.height)),
            float(rng.uniform(60.0, 200.0)),
        ))
    return blobs


class SimWorld:
    """Owns the drone state, wall raster, wind, and sensor noise streams."""

    def __init__(self, wall_width_m: float, wall_height_m: float,
                 camera: CameraModel, mount: MountGeometry,
                 params: SimParams | None = None, seed: int = 0,
                 start_pos=(0.5, 1.0, 0.0)):
        self.params = params or SimParams()
        self.camera = camera
        self.mount = mount
        self.wall = (wall_width_m, wall_height_m)
        self.raster = PaintRaster(wall_width_m, wall_height_m, self.params.cell_m)
        self.state = DroneState(pos=np.array(start_pos, dtype=float),
                                paint_g=self.params.paint_full_g)
        self.band_violations = 0
        self._band_warned = False
        self._valve_cmd = False
        self._valve_events: list[tuple[float, bool]] = []
        # (time, position, opened) at each applied valve transition.
        self.valve_log: list[tuple[float, np.ndarray, bool]] = []
        self._brush = (0.02, 1, -1)  # radius m, color, path index
        self.reseed([seed])

    def reseed(self, key: list[int]) -> None:
        """Restart every noise stream from the key; gusts reset to calm.

        Called on phase entry so a resumed mission replays the exact
        noise of an uninterrupted one.
        """
        key = [int(k) & 0xFFFFFFFF for k in key]
        self.wind = OuWind(self.params, np.random.default_rng(key + [1]))
        self.rng_lidar = np.random.default_rng(key + [2])
        self.rng_camera = np.random.default_rng(key + [3])

    def set_brush(self, radius: float, color: int, path_index: int) -> None:
        self._brush = (radius, color, path_index)

    def command_valve(self, want: bool) -> None:
        if want != self._valve_cmd:
            self._valve_cmd = want
            self._valve_events.append(
                (self.state.time + self.params.valve_delay_s, want))

    def sense(self):
        """LiDAR scan and camera blobs for the current true state."""
        scan = render_lidar(self.state, self.params, self.rng_lidar)
        blobs = render_camera(self.state, self.camera, self.mount,
                              self.params, self.rng_camera)
        return scan, blobs

    def step(self, v_cmd: np.ndarray, yaw_rate: float, dt: float) -> None:
        """Advance one tick: wind, dynamics, valve events, deposition."""
        t0 = self.state.time
        p0 = self.state.pos.copy()
        wind = self.wind.step(dt)
        step_dynamics(self.state, v_cmd, yaw_rate, wind, dt, self.params)
        # The wall is solid: prop guards stop the drone just short of
        # the plane instead of letting a gust push it through.
        if self.state.pos[1] < WALL_CONTACT_Y:
            self.state.pos[1] = WALL_CONTACT_Y
            self.state.vel[1] = max(self.state.vel[1], 0.0)
        t1 = self.state.time
        p1 = self.state.pos

        # Split the tick at valve transitions that fall inside it.
        cuts = [(t0, None)]
        remaining = []
        for when, want in self._valve_events:
            if when <= t1:
                cuts.append((max(when, t0), want))
            else:
                remaining.append((when, want))
        self._valve_events = remaining
        cuts.sort(key=lambda c: c[0])
        cuts.append((t1, None))

        radius, color, path_index = self._brush
        open_time = 0.0
        for (ta, want), (tb, _) in zip(cuts, cuts[1:]):
            if want is not None:
                self.state.valve_open = want
                q = p0 + (p1 - p0) * ((ta - t0) / dt)
                self.valve_log.append((ta, q, want))
            if not self.state.valve_open or tb <= ta:
                continue
            open_time += tb - ta
            if self.state.paint_g <= 0:
                continue
            fa = (ta - t0) / dt
            fb = (tb - t0) / dt
            qa = p0 + (p1 - p0) * fa
            qb = p0 + (p1 - p0) * fb
            y_mid = 0.5 * (qa[1] + qb[1])
            if SPRAY_BAND[0] <= y_mid <= SPRAY_BAND[1]:
                self.raster.stamp_swath((qa[0], qa[2]), (qb[0], qb[2]),
                                        radius, color, path_index)
                self._band_warned = False
            else:
                self.band_violations += 1
                if not self._band_warned:
                    log.warning("spraying at %.3f m from the wall, outside "
                                "the %.2f-%.2f band: no deposition", y_mid,
                                SPRAY_BAND[0], SPRAY_BAND[1])
                    self._band_warned = True
        self.state.paint_g = max(0.0, self.state.paint_g
                                 - self.params.paint_flow_g_s * open_time)
        self.state.battery = max(0.0, self.state.battery
                                 - self.params.battery_drain_per_s * dt)


def paint_needed_g(plan: MissionPlan, v_target: float, flow_g_s: float,
                   from_index: int = 0,
                   indices: "set[int] | None" = None) -> float:
    """Paint mass to finish the plan from the given path index onward.

    With `indices` given, only those paths count (queue projection).
    """
    total = 0.0
    for path in plan.draw_paths:
        if indices is not None:
            if path.index not in indices:
                continue
        elif path.index < from_index:
            continue
        s_on, s_off = path.spray_window
        total += (s_off - s_on) / v_target * flow_g_s
    return total
