"""Pose estimation from the stationary camera and the onboard 2D LiDAR.

The camera sees three IR LEDs on the drone's rear and supplies lateral
position and height; the LiDAR scan, fit to the wall line with RANSAC,
supplies the perpendicular wall distance and yaw. Conventions:

- WallFrame: wall plane at y = 0, drone flies at y > 0, yaw 0 = facing
  the wall (body forward = -y), positive yaw turns toward +x.
- LiDAR sensor frame: +y is body forward, +x body right. The fit yaw of
  the wall seen by a drone yawed psi equals psi itself.
- Camera: pinhole, z forward along the optical axis, x image-right,
  y image-down.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import (
    DegenerateConfig,
    InsufficientData,
    NoIntersection,
    NoPattern,
    NoWall,
    StaleSensor,
)

log = logging.getLogger(__name__)

# Minimum fraction of scan points that must agree with the best line.
MIN_INLIER_RATIO = 0.30
# Pattern residual acceptance bound, fraction of the triple span.
PATTERN_TOL = 0.10
DEFAULT_STALENESS_S = 0.1


@dataclass
class CameraModel:
    fx: float  # px
    fy: float  # px
    cx: float  # px
    cy: float  # px
    width: int  # px
    height: int  # px
    r_wc: np.ndarray = field(default_factory=lambda: _DEFAULT_R.copy())  # cam->world
    pos: np.ndarray = field(default_factory=lambda: np.zeros(3))  # camera center, m

    def __post_init__(self) -> None:
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be > 0")
        if not (0 <= self.cx <= self.width and 0 <= self.cy <= self.height):
            raise ValueError("principal point must lie inside the image")
        self.r_wc = np.asarray(self.r_wc, dtype=float)
        self.pos = np.asarray(self.pos, dtype=float)

    def project(self, world_pt: np.ndarray) -> tuple[float, float] | None:
        """World point to pixel; None when behind the camera."""
        pc = self.r_wc.T @ (np.asarray(world_pt, dtype=float) - self.pos)
        if pc[2] <= 1e-9:
            return None
        return (
            self.fx * pc[0] / pc[2] + self.cx,
            self.fy * pc[1] / pc[2] + self.cy,
        )

    def back_project(self, px: float, py: float) -> tuple[np.ndarray, np.ndarray]:
        """Pixel to (origin, unit direction) ray in world coordinates."""
        d_cam = np.array([(px - self.cx) / self.fx, (py - self.cy) / self.fy, 1.0])
        d = self.r_wc @ d_cam
        return self.pos.copy(), d / np.linalg.norm(d)

    def to_json(self) -> dict:
        return {
            "fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
            "width": self.width, "height": self.height,
            "r_wc": self.r_wc.tolist(), "pos": self.pos.tolist(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "CameraModel":
        doc = dict(doc)
        doc["r_wc"] = np.array(doc["r_wc"], dtype=float)
        doc["pos"] = np.array(doc["pos"], dtype=float)
        return cls(**doc)


# Default rig: camera on the far side of the room looking in -y at the
# wall. Image right = -x (mirror view of the wall), image down = -z.
_DEFAULT_R = np.array(
    [
        [-1.0, 0.0, 0.0],
        [0.0, 0.0, -1.0],
        [0.0, -1.0, 0.0],
    ]
)


@dataclass(frozen=True)
class WallFit:
    distance: float  # m, perpendicular distance sensor origin -> wall line
    yaw: float  # rad, signed angle between wall normal and sensor forward
    inlier_count: int
    timestamp: float  # s

    def __post_init__(self) -> None:
        if self.distance <= 0:
            raise ValueError("wall distance must be > 0")
        if abs(self.yaw) >= math.pi / 2:
            raise ValueError("wall yaw must satisfy |yaw| < pi/2")
        if self.inlier_count < 2:
            raise ValueError("a line fit needs at least 2 inliers")


@dataclass(frozen=True)
class PoseEstimate:
    x: float  # m lateral
    z: float  # m height
    y: float  # m wall distance
    yaw: float  # rad
    valid: tuple[bool, bool, bool, bool]  # (x, y, z, yaw)
    timestamp: float  # s

    @property
    def all_valid(self) -> bool:
        return all(self.valid)


def ransac_wall_fit(
    scan: np.ndarray,
    iterations: int = 200,
    inlier_tol: float = 0.02,
    seed: int = 0,
    timestamp: float = 0.0,
) -> WallFit:
    """Robust wall-line fit on a 2D scan in the sensor frame.

    Fixed-iteration, seeded 2-point RANSAC followed by a total
    least-squares refit over the winning inliers. Orthogonal refinement
    is the right norm here because scan noise is radial, not axis
    aligned.
    """
    pts = np.asarray(scan, dtype=float).reshape(-1, 2)
    n = len(pts)
    if n < 2:
        raise InsufficientData(f"need at least 2 scan points, got {n}")

    rng = np.random.default_rng(seed)
    first = rng.integers(0, n, size=iterations)
    second = rng.integers(0, n - 1, size=iterations)
    second = np.where(second >= first, second + 1, second)  # distinct pairs

    a = pts[first]
    d = pts[second] - a
    norms = np.linalg.norm(d, axis=1)
    ok = norms > 1e-12
    # Hypothesis line normals (unit), distances of all points to each line.
    nx = np.where(ok, -d[:, 1] / np.where(ok, norms, 1.0), 1.0)
    nz = np.where(ok, d[:, 0] / np.where(ok, norms, 1.0), 0.0)
    offs = nx * a[:, 0] + nz * a[:, 1]
    dist = np.abs(pts[:, 0][None, :] * nx[:, None] + pts[:, 1][None, :] * nz[:, None]
                  - offs[:, None])
    counts = (dist < inlier_tol).sum(axis=1)
    counts[~ok] = 0
    best = int(np.argmax(counts))
    if counts[best] < max(2, MIN_INLIER_RATIO * n):
        raise NoWall(f"best hypothesis explains {counts[best]}/{n} points")

    inliers = pts[dist[best] < inlier_tol]
    centroid = inliers.mean(axis=0)
    centered = inliers - centroid
    # Smallest principal component is the line normal.
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    normal = vt[-1]
    if float(normal @ centroid) < 0:
        normal = -normal  # point the normal from the sensor toward the wall
    distance = float(normal @ centroid)
    if distance <= 1e-9 or normal[1] <= 0:
        raise NoWall("fitted line does not face the sensor")
    yaw = math.atan2(-normal[0], normal[1])
    return WallFit(distance, yaw, int(len(inliers)), timestamp)


def detect_led_pattern(
    blobs: list[tuple[float, float, float]],
    max_candidates: int = 20,
) -> tuple[tuple[float, float], tuple[float, float], tuple[float, float]]:
    """Find the collinear, evenly spaced triple among blob detections.

    Scores every 3-subset of the brightest candidates by collinearity
    plus spacing evenness, both normalized by the subset span; both
    residuals must stay under 10% of span. Returns centers ordered
    left to right.
    """
    if len(blobs) < 3:
        raise NoPattern(f"need 3 blobs, got {len(blobs)}")
    cand = sorted(blobs, key=lambda b: -b[2])[:max_candidates]
    best_score = math.inf
    best: tuple | None = None
    for tri in combinations(cand, 3):
        pts = sorted(tri, key=lambda b: (b[0], b[1]))
        left = np.array(pts[0][:2])
        mid = np.array(pts[1][:2])
        right = np.array(pts[2][:2])
        span_v = right - left
        span = float(np.linalg.norm(span_v))
        if span < 1e-9:
            continue
        along = span_v / span
        rel = mid - left
        collin = abs(float(rel[0] * along[1] - rel[1] * along[0]))
        t = float(rel @ along)
        evenness = abs(t - (span - t))
        if collin > PATTERN_TOL * span or evenness > PATTERN_TOL * span:
            continue
        score = (collin + evenness) / span
        if score < best_score:
            best_score = score
            best = (tuple(left), tuple(mid), tuple(right))
    if best is None:
        raise NoPattern("no collinear evenly spaced triple found")
    return best


class LedTracker:
    """Region-of-interest wrapper: after a hit, search near the last triple.

    The window is 3x the triple span around its centroid; if the window
    yields nothing the tracker falls back to a full-frame search before
    giving up, so a lost target reacquires on the next clean frame.
    """

    def __init__(self, window_scale: float = 3.0):
        self.window_scale = window_scale
        self.last_triple = None

    def detect(self, blobs):
        if self.last_triple is not None:
            (lx, ly), _, (rx, ry) = self.last_triple
            ctr = ((lx + rx) / 2.0, (ly + ry) / 2.0)
            radius = self.window_scale * math.hypot(rx - lx, ry - ly) / 2.0
            near = [
                b for b in blobs
                if math.hypot(b[0] - ctr[0], b[1] - ctr[1]) <= radius
            ]
            if len(near) >= 3:
                try:
                    self.last_triple = detect_led_pattern(near)
                    return self.last_triple
                except NoPattern:
                    pass
        self.last_triple = detect_led_pattern(blobs)
        return self.last_triple


def _hartley_normalize(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    scale = math.sqrt(2.0) / max(np.linalg.norm(centered, axis=1).mean(), 1e-12)
    t = np.array(
        [[scale, 0, -scale * centroid[0]],
         [0, scale, -scale * centroid[1]],
         [0, 0, 1]]
    )
    return (t @ np.column_stack([pts, np.ones(len(pts))]).T).T[:, :2], t


def _homography_dlt(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """src (wall) -> dst (image) homography via the normalized DLT."""
    sn, ts = _hartley_normalize(src)
    dn, td = _hartley_normalize(dst)
    rows = []
    for (x, y), (u, v) in zip(sn, dn):
        rows.append([-x, -y, -1, 0, 0, 0, u * x, u * y, u])
        rows.append([0, 0, 0, -x, -y, -1, v * x, v * y, v])
    a = np.array(rows)
    _, sv, vt = np.linalg.svd(a)
    if sv[-2] < 1e-9 * sv[0]:
        raise DegenerateConfig("correspondences do not determine a homography")
    h = vt[-1].reshape(3, 3)
    return np.linalg.inv(td) @ h @ ts


def _any_three_collinear(pts: np.ndarray, tol: float = 1e-9) -> bool:
    scale = max(np.ptp(pts, axis=0).max(), 1e-12)
    for i, j, k in combinations(range(len(pts)), 3):
        area = abs(
            (pts[j, 0] - pts[i, 0]) * (pts[k, 1] - pts[i, 1])
            - (pts[k, 0] - pts[i, 0]) * (pts[j, 1] - pts[i, 1])
        )
        if area < tol * scale * scale:
            return True
    return False


def calibrate_camera(
    image_pts: np.ndarray,
    wall_pts: np.ndarray,
    intrinsics: CameraModel,
) -> tuple[CameraModel, float]:
    """Solve camera extrinsics from wall-plane correspondences.

    wall_pts are (x, z) positions on the wall plane (y = 0); image_pts
    the matching pixels. Returns a copy of the camera with solved pose
    plus the reprojection RMS in pixels.
    """
    image_pts = np.asarray(image_pts, dtype=float).reshape(-1, 2)
    wall_pts = np.asarray(wall_pts, dtype=float).reshape(-1, 2)
    if len(image_pts) < 4 or len(wall_pts) < 4 or len(image_pts) != len(wall_pts):
        raise InsufficientData("need at least 4 matched correspondences")
    if len(wall_pts) == 4 and _any_three_collinear(wall_pts):
        raise DegenerateConfig("3 of the 4 wall points are collinear")

    h = _homography_dlt(wall_pts, image_pts)
    k = np.array([[intrinsics.fx, 0, intrinsics.cx],
                  [0, intrinsics.fy, intrinsics.cy],
                  [0, 0, 1]])
    m = np.linalg.inv(k) @ h
    lam = (np.linalg.norm(m[:, 0]) + np.linalg.norm(m[:, 1])) / 2.0
    if lam < 1e-12:
        raise DegenerateConfig("homography collapsed")
    m = m / lam
    if m[2, 2] < 0:
        m = -m  # wall origin must sit in front of the camera (z_cam > 0)
    c1, c3, t = m[:, 0], m[:, 1], m[:, 2]
    c2 = np.cross(c3, c1)
    r_approx = np.column_stack([c1, c2, c3])
    u, _, vt = np.linalg.svd(r_approx)
    r_cw = u @ np.diag([1, 1, np.sign(np.linalg.det(u @ vt))]) @ vt

    cam = CameraModel(
        intrinsics.fx, intrinsics.fy, intrinsics.cx, intrinsics.cy,
        intrinsics.width, intrinsics.height,
        r_wc=r_cw.T, pos=-(r_cw.T @ t),
    )
    errs = []
    for (x, z), px in zip(wall_pts, image_pts):
        proj = cam.project(np.array([x, 0.0, z]))
        if proj is None:
            raise DegenerateConfig("solved pose puts a marker behind the camera")
        errs.append((proj[0] - px[0]) ** 2 + (proj[1] - px[1]) ** 2)
    rms = math.sqrt(float(np.mean(errs)))
    return cam, rms


@dataclass(frozen=True)
class MountGeometry:
    """Where the sensors and LEDs sit on the airframe (body frame, m)."""

    led_spacing: float = 0.10  # between adjacent LEDs along body right
    led_rear_offset: float = 0.15  # LED bar behind drone center (+rear)
    led_height_offset: float = 0.0  # LED bar above drone center


def led_world_positions(
    pos: np.ndarray, yaw: float, mount: MountGeometry
) -> list[np.ndarray]:
    """Centers of the three rear LEDs for a drone at pos with given yaw."""
    rear = np.array([-math.sin(yaw), math.cos(yaw), 0.0])
    right = np.array([math.cos(yaw), math.sin(yaw), 0.0])
    up = np.array([0.0, 0.0, 1.0])
    center = np.asarray(pos, float) + mount.led_rear_offset * rear \
        + mount.led_height_offset * up
    return [
        center - mount.led_spacing * right,
        center,
        center + mount.led_spacing * right,
    ]


def fuse_pose(
    triple,
    fit: WallFit,
    camera: CameraModel,
    mount: MountGeometry,
    now: float,
    staleness: float = DEFAULT_STALENESS_S,
) -> PoseEstimate:
    """Combine the camera triple with the LiDAR wall fit into one pose.

    The LiDAR gives wall distance and yaw directly. The pattern center
    (middle LED) back-projects to a ray which is cut with the LED bar's
    wall-distance plane; the known rear offset of the bar then shifts
    the intersection back to the drone center.
    """
    if now - fit.timestamp > staleness:
        raise StaleSensor(
            f"wall fit is {now - fit.timestamp:.3f}s old, bound {staleness:.3f}s"
        )
    yaw = fit.yaw
    y_drone = fit.distance
    # Plane of the LED bar: its rear offset tilts with yaw.
    y_led = y_drone + mount.led_rear_offset * math.cos(yaw)

    mid = triple[1]
    origin, direction = camera.back_project(mid[0], mid[1])
    if abs(direction[1]) < 1e-9:
        raise NoIntersection("view ray runs parallel to the wall plane")
    t = (y_led - origin[1]) / direction[1]
    if t <= 0:
        raise NoIntersection("LED plane lies behind the camera")
    hit = origin + t * direction
    x = float(hit[0] + mount.led_rear_offset * math.sin(yaw))
    z = float(hit[2] - mount.led_height_offset)
    return PoseEstimate(
        x=x, z=z, y=float(y_drone), yaw=float(yaw),
        valid=(True, True, True, True), timestamp=now,
    )


def save_calibration(path: str, camera: CameraModel, rms: float,
                     image_pts, wall_pts) -> None:
    doc = {
        "camera": camera.to_json(),
        "reprojection_rms_px": rms,
        "correspondences": {
            "image": np.asarray(image_pts, dtype=float).tolist(),
            "wall": np.asarray(wall_pts, dtype=float).tolist(),
        },
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=2)


def load_calibration(path: str) -> CameraModel:
    with open(path) as f:
        doc = json.load(f)
    return CameraModel.from_json(doc["camera"])
