"""Split-axis path tracking for wall painting.

Each planned path is followed with the axes decoupled: a trapezoidal
speed profile along the path tangent, a PD loop on the cross-track
error in the wall plane, a proportional hold on the spray standoff
distance, and proportional yaw regulation toward facing the wall.
The spray valve is commanded early by v * lag so paint lands exactly
on the spray window despite the valve's actuation delay.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleProfile
from .geometry import sample_path
from .localization import PoseEstimate
from .planner import DrawPath, MissionPlan

log = logging.getLogger(__name__)

# Tracking is declared finished this close to the extended end, m.
STOP_TOL = 0.005
# Minimum commanded speed so the profile can leave s = 0.
FLOOR_SPEED = 0.05
RETRY_ERROR_BOUND = 0.03  # m, max |cross-track| during the painted window
MAX_ATTEMPTS = 2


@dataclass(frozen=True)
class ControllerGains:
    kp_normal: float = 30.0  # 1/s
    kd_normal: float = 2.5
    kp_standoff: float = 30.0  # 1/s
    kd_standoff: float = 2.5
    kp_yaw: float = 2.0  # 1/s
    a_max: float = 1.0  # m/s^2, tangential accel bound
    v_target: float = 0.5  # m/s, cruise speed along the path
    v_normal_max: float = 1.0  # m/s, cross-track command saturation
    standoff: float = 0.075  # m, target wall distance while painting
    spray_lag: float = 0.15  # s, valve actuation delay to compensate
    lookahead: float = 0.3  # s, command tangent taken ahead by v * lookahead
    deriv_alpha: float = 0.3  # EMA factor on the error derivative

    def __post_init__(self) -> None:
        if self.a_max <= 0 or self.v_target <= 0:
            raise ValueError("a_max and v_target must be > 0")
        if not 0 < self.deriv_alpha <= 1:
            raise ValueError("deriv_alpha must be in (0, 1]")


@dataclass
class ControlCommand:
    velocity: np.ndarray  # (3,) m/s in WallFrame
    yaw_rate: float  # rad/s
    spray: bool
    done: bool
    hold: bool = False
    progress_s: float = 0.0  # m along the extended path
    normal_error: float = 0.0  # m, signed cross-track


def trapezoid_speed(s: float, length: float, v_target: float, a_max: float) -> float:
    """Speed at arc position s for a symmetric accel-cruise-decel profile."""
    if s <= 0 or s >= length:
        return 0.0
    return min(
        v_target,
        math.sqrt(2.0 * a_max * s),
        math.sqrt(2.0 * a_max * (length - s)),
    )


def validate_plan(plan: MissionPlan, gains: ControllerGains) -> None:
    """Reject plans whose lead-ins are too short to reach cruise speed."""
    ramp = gains.v_target ** 2 / (2.0 * gains.a_max)
    for path in plan.draw_paths:
        s_on, s_off = path.spray_window
        room = min(s_on, path.extended_length() - s_off)
        if ramp > room + 1e-12:
            raise InfeasibleProfile(
                f"path {path.index}: {room:.3f} m of lead cannot reach "
                f"{gains.v_target} m/s (needs {ramp:.3f} m at a_max {gains.a_max})"
            )


def check_retry(max_abs_error: float, attempts: int) -> bool:
    """Repaint decision after a pass: bad accuracy and attempts remain."""
    return max_abs_error > RETRY_ERROR_BOUND and attempts < MAX_ATTEMPTS


class _EmaDeriv:
    """Finite-difference derivative smoothed with an exponential average."""

    def __init__(self, alpha: float):
        self.alpha = alpha
        self._last: float | None = None
        self._d = 0.0

    def step(self, value: float, dt: float) -> float:
        if self._last is None or dt <= 0:
            self._last = value
            return 0.0
        raw = (value - self._last) / dt
        self._d = self.alpha * raw + (1.0 - self.alpha) * self._d
        self._last = value
        return self._d


class PathTracker:
    """Progress, error, and spray bookkeeping for one extended path."""

    def __init__(self, path: DrawPath, gains: ControllerGains,
                 sample_spacing: float = 0.01):
        self.path = path
        self.gains = gains
        self.points = sample_path(path.extended_chain(), sample_spacing)
        deltas = np.diff(self.points, axis=0)
        seg_len = np.linalg.norm(deltas, axis=1)
        keep = seg_len > 1e-12
        self.deltas = deltas[keep]
        self.seg_len = seg_len[keep]
        self.starts = self.points[:-1][keep]
        self.cum_s = np.concatenate([[0.0], np.cumsum(self.seg_len)])
        self.length = float(self.cum_s[-1])
        self.tangents = self.deltas / self.seg_len[:, None]
        self._kappa = self._smoothed_curvature(half_window_m=0.05)
        self._last_seg: int | None = None
        self.d_normal = _EmaDeriv(gains.deriv_alpha)
        self.d_standoff = _EmaDeriv(gains.deriv_alpha)
        self.d_progress = _EmaDeriv(gains.deriv_alpha)
        self.max_window_error = 0.0

    def progress(self, x: float, z: float) -> tuple[float, float, float, np.ndarray]:
        """Arc position, cross-track error, along-track clamp offset, tangent.

        The offset is nonzero only when the position projects past an end
        of the path (negative behind the start): gusts can push the drone
        off the ends, where cross-track error alone is blind.

        The first call searches the whole path; afterwards only a window
        around the previous match, since progress is monotone at tick rate.
        """
        p = np.array([x, z])
        if self._last_seg is None:
            lo, hi = 0, len(self.starts)
        else:
            lo = max(0, self._last_seg - 10)
            hi = min(len(self.starts), self._last_seg + 80)
        rel = p - self.starts[lo:hi]
        t = np.clip(
            (rel * self.deltas[lo:hi]).sum(axis=1) / self.seg_len[lo:hi] ** 2,
            0.0, 1.0,
        )
        proj = self.starts[lo:hi] + t[:, None] * self.deltas[lo:hi]
        d2 = ((p - proj) ** 2).sum(axis=1)
        j = int(np.argmin(d2))
        seg = lo + j
        self._last_seg = seg
        s = float(self.cum_s[seg] + t[j] * self.seg_len[seg])
        tangent = self.tangents[seg]
        off = p - proj[j]
        err = float(tangent[0] * off[1] - tangent[1] * off[0])
        along = 0.0
        if (seg == 0 and t[j] <= 0.0) or (seg == len(self.starts) - 1
                                          and t[j] >= 1.0):
            along = float(off @ tangent)
        return s, err, along, tangent

    def _smoothed_curvature(self, half_window_m: float) -> np.ndarray:
        """Unsigned curvature per segment from tangent rotation over a window.

        Sampled polylines concentrate turning at vertices; averaging the
        tangent swing over +-half_window_m recovers the underlying curve's
        curvature well enough for feedforward.
        """
        mid_s = 0.5 * (self.cum_s[:-1] + self.cum_s[1:])
        lo = np.searchsorted(self.cum_s, mid_s - half_window_m, side="right") - 1
        hi = np.searchsorted(self.cum_s, mid_s + half_window_m, side="right") - 1
        lo = np.clip(lo, 0, len(self.tangents) - 1)
        hi = np.clip(hi, 0, len(self.tangents) - 1)
        ta = self.tangents[lo]
        tb = self.tangents[hi]
        angle = np.abs(np.arctan2(
            ta[:, 0] * tb[:, 1] - ta[:, 1] * tb[:, 0],
            (ta * tb).sum(axis=1),
        ))
        ds = np.maximum(self.cum_s[np.minimum(hi + 1, len(self.cum_s) - 1)]
                        - self.cum_s[lo], 1e-9)
        return angle / ds

    def tangent_at(self, s: float) -> np.ndarray:
        seg = int(np.searchsorted(self.cum_s, s, side="right")) - 1
        seg = max(0, min(seg, len(self.tangents) - 1))
        return self.tangents[seg]

    def curvature_at(self, s: float) -> float:
        seg = int(np.searchsorted(self.cum_s, s, side="right")) - 1
        seg = max(0, min(seg, len(self._kappa) - 1))
        return float(self._kappa[seg])

    def spray_wanted(self, s: float, speed: float) -> bool:
        """Valve command with lead compensation on both edges."""
        s_on, s_off = self.path.spray_window
        lead = speed * self.gains.spray_lag
        return s_on - lead <= s < s_off - lead

    def in_window(self, s: float) -> bool:
        s_on, s_off = self.path.spray_window
        return s_on <= s <= s_off

    def observe(self, s: float, err: float) -> None:
        if self.in_window(s):
            self.max_window_error = max(self.max_window_error, abs(err))


def hold_command() -> ControlCommand:
    return ControlCommand(velocity=np.zeros(3), yaw_rate=0.0, spray=False,
                          done=False, hold=True)


def control_step(tracker: PathTracker, pose: PoseEstimate | None,
                 dt: float) -> ControlCommand:
    """One tick of the tracking controller.

    A missing or partially invalid pose yields a hold: zero velocity,
    valve closed, no progress update.
    """
    if pose is None or not pose.all_valid:
        return hold_command()
    g = tracker.gains
    s, err, along, tangent = tracker.progress(pose.x, pose.z)
    s_rate = tracker.d_progress.step(s, dt)
    tracker.observe(s, err)

    if s >= tracker.length - STOP_TOL:
        return ControlCommand(velocity=np.zeros(3), yaw_rate=-g.kp_yaw * pose.yaw,
                              spray=False, done=True, progress_s=s,
                              normal_error=err)

    v_t = trapezoid_speed(s, tracker.length, g.v_target, g.a_max)
    v_t = max(v_t, min(FLOOR_SPEED, g.v_target))
    v_n = -(g.kp_normal * err + g.kd_normal * tracker.d_normal.step(err, dt))
    v_n = max(-g.v_normal_max, min(g.v_normal_max, v_n))
    # Gusts can push the drone past the path ends where the profile gives
    # no restoring speed; pull back toward the end with the normal gains.
    v_a = max(-g.v_normal_max, min(g.v_normal_max, -g.kp_normal * along))
    # Command along the tangent a little ahead of the projection so the
    # velocity lag does not cut corners; the error stays measured at s.
    s_look = min(s + v_t * g.lookahead, tracker.length)
    ahead = tracker.tangent_at(s_look)
    normal = np.array([-ahead[1], ahead[0]])
    # The lag attenuates a rotating command by 1/sqrt(1+(w*T)^2); boost
    # the speed so the achieved velocity keeps its magnitude on curves.
    omega = v_t * tracker.curvature_at(s_look)
    boost = math.sqrt(1.0 + (omega * g.lookahead) ** 2)
    plane_v = (v_t * boost + v_a) * ahead + v_n * normal
    e_y = pose.y - g.standoff
    v_y = -(g.kp_standoff * e_y + g.kd_standoff * tracker.d_standoff.step(e_y, dt))
    v_y = max(-g.v_normal_max, min(g.v_normal_max, v_y))
    velocity = np.array([plane_v[0], v_y, plane_v[1]])
    # The valve lead uses the measured progress rate: gusts change the
    # true ground speed, and the paint edge lands where the drone will
    # actually be one actuation delay from now.
    speed_est = s_rate if s_rate > 0.05 else v_t
    spray = tracker.spray_wanted(s, speed_est)
    return ControlCommand(velocity=velocity, yaw_rate=-g.kp_yaw * pose.yaw,
                          spray=spray, done=False, progress_s=s,
                          normal_error=err)


@dataclass
class GotoController:
    """Simple proportional position hold / waypoint approach."""

    target: np.ndarray  # (3,)
    kp: float = 3.0  # 1/s, stiff enough to park against design gusts
    v_max: float = 1.0  # m/s
    tol: float = 0.04  # m
    kp_yaw: float = 2.0
    _arrived: bool = field(default=False, repr=False)

    def step(self, pose: PoseEstimate | None) -> ControlCommand:
        if pose is None or not pose.all_valid:
            return hold_command()
        cur = np.array([pose.x, pose.y, pose.z])
        delta = self.target - cur
        dist = float(np.linalg.norm(delta))
        if dist < self.tol:
            self._arrived = True
            return ControlCommand(velocity=np.zeros(3),
                                  yaw_rate=-self.kp_yaw * pose.yaw,
                                  spray=False, done=True)
        v = self.kp * delta
        speed = float(np.linalg.norm(v))
        if speed > self.v_max:
            v *= self.v_max / speed
        return ControlCommand(velocity=v, yaw_rate=-self.kp_yaw * pose.yaw,
                              spray=False, done=False)
