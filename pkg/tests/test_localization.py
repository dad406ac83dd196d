"""Tests for camera/LiDAR localization.

Frozen oracles used below:

- Wall-line closed form: a scan built as p = d*n + s*u with unit normal
  n = (-sin(psi), cos(psi)) and tangent u = (cos(psi), sin(psi)) has
  perpendicular distance d from the origin and fit yaw psi, since
  atan2(sin(psi), cos(psi)) = psi.
- Sensor-frame rendering: for a drone at (xd, yd) with yaw psi facing a
  wall at world y = 0, a wall point (x, 0) appears in the sensor frame
  at (right . delta, forward . delta) with right = (cos psi, sin psi),
  forward = (sin psi, -cos psi), delta = (x - xd, -yd). At psi = 0 the
  wall sits at sensor y = yd, dead ahead.
- Pinhole noise propagation: a pixel perturbation sigma maps to a world
  offset of approximately depth * sigma / f at small angles.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from muralkit.errors import (
    DegenerateConfig,
    InsufficientData,
    NoIntersection,
    NoPattern,
    NoWall,
    StaleSensor,
)
from muralkit.localization import (
    CameraModel,
    LedTracker,
    MountGeometry,
    WallFit,
    calibrate_camera,
    detect_led_pattern,
    fuse_pose,
    led_world_positions,
    ransac_wall_fit,
)


def wall_scan(distance, psi, n=120, lateral=4.0):
    """Noise-free wall points in the sensor frame (see module docstring)."""
    s = np.linspace(-lateral, lateral, n)
    normal = np.array([-math.sin(psi), math.cos(psi)])
    tangent = np.array([math.cos(psi), math.sin(psi)])
    return distance * normal[None, :] + s[:, None] * tangent[None, :]


def default_camera(pos=(5.0, 15.0, 2.0)):
    return CameraModel(fx=2000.0, fy=2000.0, cx=960.0, cy=540.0,
                       width=1920, height=1080, pos=np.array(pos, dtype=float))


class TestRansacWallFit:
    def test_axis_aligned_wall(self):
        fit = ransac_wall_fit(wall_scan(2.0, 0.0))
        assert fit.distance == pytest.approx(2.0, abs=1e-9)
        assert fit.yaw == pytest.approx(0.0, abs=1e-9)
        assert fit.inlier_count == 120

    def test_rotated_wall_recovers_yaw(self):
        for psi in (-0.4, -0.1, 0.25, 0.45):
            fit = ransac_wall_fit(wall_scan(3.0, psi))
            assert fit.yaw == pytest.approx(psi, abs=1e-9)
            assert fit.distance == pytest.approx(3.0, abs=1e-9)

    def test_outliers_rejected(self):
        rng = np.random.default_rng(7)
        clean = wall_scan(2.5, 0.2, n=90)
        junk = rng.uniform([-4, 0.2], [4, 6], size=(60, 2))
        scan = np.vstack([clean, junk])
        fit = ransac_wall_fit(scan, inlier_tol=0.02, seed=3)
        assert fit.distance == pytest.approx(2.5, abs=0.01)
        assert fit.yaw == pytest.approx(0.2, abs=math.radians(0.5))

    def test_monte_carlo_noise_and_outliers(self):
        # Smaller sibling of the acceptance run: 20 scans, 40% outliers,
        # 5 mm radial-ish noise, all within 1 cm / 0.5 deg.
        rng = np.random.default_rng(42)
        for trial in range(20):
            d = rng.uniform(1.0, 4.0)
            psi = rng.uniform(-0.4, 0.4)
            clean = wall_scan(d, psi, n=120) + rng.normal(0, 0.005, (120, 2))
            junk = rng.uniform([-5, 0.1], [5, 8], size=(80, 2))
            fit = ransac_wall_fit(np.vstack([clean, junk]), seed=trial)
            assert abs(fit.distance - d) < 0.01
            assert abs(fit.yaw - psi) < math.radians(0.5)

    def test_deterministic_for_fixed_seed(self):
        rng = np.random.default_rng(1)
        scan = np.vstack([
            wall_scan(2.0, 0.1) + rng.normal(0, 0.01, (120, 2)),
            rng.uniform([-3, 0.5], [3, 5], size=(50, 2)),
        ])
        a = ransac_wall_fit(scan, seed=9)
        b = ransac_wall_fit(scan, seed=9)
        assert (a.distance, a.yaw, a.inlier_count) == (b.distance, b.yaw, b.inlier_count)

    def test_too_few_points(self):
        with pytest.raises(InsufficientData):
            ransac_wall_fit(np.array([[0.0, 1.0]]))

    def test_pure_scatter_is_no_wall(self):
        rng = np.random.default_rng(5)
        scan = rng.uniform(-3, 3, size=(150, 2))
        with pytest.raises(NoWall):
            ransac_wall_fit(scan, inlier_tol=0.01, seed=2)

    def test_wall_behind_sensor_rejected(self):
        scan = wall_scan(2.0, 0.0) * np.array([1.0, -1.0])
        with pytest.raises(NoWall):
            ransac_wall_fit(scan)

    def test_refit_beats_two_point_hypothesis(self):
        # With dense noisy inliers the TLS refit should land well inside
        # the inlier tolerance even though single pairs wobble by ~2 cm.
        rng = np.random.default_rng(11)
        scan = wall_scan(2.0, 0.0, n=300) + rng.normal(0, 0.008, (300, 2))
        fit = ransac_wall_fit(scan, inlier_tol=0.03, seed=1)
        assert abs(fit.distance - 2.0) < 0.002

    @given(psi=st.floats(-0.4, 0.4), delta=st.floats(-0.3, 0.3))
    @settings(max_examples=40, deadline=None)
    def test_rotation_equivariance(self, psi, delta):
        # Rotating the whole scan by delta shifts the yaw by delta.
        if abs(psi + delta) >= math.pi / 2 - 0.05:
            return
        base = wall_scan(2.5, psi, n=80)
        c, s = math.cos(delta), math.sin(delta)
        rot = base @ np.array([[c, s], [-s, c]])
        fit = ransac_wall_fit(rot)
        assert fit.yaw == pytest.approx(psi + delta, abs=1e-7)
        assert fit.distance == pytest.approx(2.5, abs=1e-7)

    def test_fit_fields_validated(self):
        with pytest.raises(ValueError):
            WallFit(distance=-1.0, yaw=0.0, inlier_count=10, timestamp=0.0)
        with pytest.raises(ValueError):
            WallFit(distance=1.0, yaw=2.0, inlier_count=10, timestamp=0.0)
        with pytest.raises(ValueError):
            WallFit(distance=1.0, yaw=0.0, inlier_count=1, timestamp=0.0)


class TestDetectLedPattern:
    def triple(self, x0=100.0, y0=200.0, dx=20.0, dy=0.0):
        return [
            (x0, y0, 255.0),
            (x0 + dx, y0 + dy, 250.0),
            (x0 + 2 * dx, y0 + 2 * dy, 252.0),
        ]

    def test_clean_triple(self):
        got = detect_led_pattern(self.triple())
        assert got == ((100.0, 200.0), (120.0, 200.0), (140.0, 200.0))

    def test_ordering_is_left_to_right(self):
        blobs = list(reversed(self.triple()))
        got = detect_led_pattern(blobs)
        assert got[0][0] < got[1][0] < got[2][0]

    def test_survives_distractors(self):
        blobs = self.triple() + [(400.0, 50.0, 180.0), (30.0, 800.0, 90.0),
                                 (555.0, 555.0, 120.0)]
        got = detect_led_pattern(blobs)
        assert got == ((100.0, 200.0), (120.0, 200.0), (140.0, 200.0))

    def test_tilted_triple(self):
        got = detect_led_pattern(self.triple(dx=15.0, dy=9.0))
        assert got[1] == (115.0, 209.0)

    def test_uneven_spacing_rejected(self):
        # Middle LED shoved 20% of span off-center: evenness residual
        # is 2 * 0.2 * span > 10% bound.
        blobs = [(0.0, 0.0, 255.0), (28.0, 0.0, 255.0), (40.0, 0.0, 255.0)]
        with pytest.raises(NoPattern):
            detect_led_pattern(blobs)

    def test_bent_triple_rejected(self):
        blobs = [(0.0, 0.0, 255.0), (20.0, 8.0, 255.0), (40.0, 0.0, 255.0)]
        with pytest.raises(NoPattern):
            detect_led_pattern(blobs)

    def test_too_few_blobs(self):
        with pytest.raises(NoPattern):
            detect_led_pattern(self.triple()[:2])

    def test_best_of_many_candidates(self):
        # A slightly bent decoy must lose to the straight pattern.
        decoy = [(500.0, 0.0, 255.0), (520.0, 1.5, 255.0), (540.0, 0.0, 255.0)]
        got = detect_led_pattern(self.triple() + decoy)
        assert got[0] == (100.0, 200.0)

    def test_tracker_prefers_window(self):
        tracker = LedTracker()
        real = self.triple()
        # Prime the tracker on the true pattern.
        assert tracker.detect(real)[0] == (100.0, 200.0)
        # A geometrically perfect decoy far outside the 3x-span window
        # must not steal the track while the real pattern is visible.
        decoy = [(900.0, 900.0, 255.0), (905.0, 900.0, 255.0),
                 (910.0, 900.0, 255.0)]
        jittered = [(x + 0.4, y - 0.2, b) for x, y, b in real]
        got = tracker.detect(jittered + decoy)
        assert abs(got[0][0] - 100.4) < 1e-9

    def test_tracker_reacquires_after_loss(self):
        tracker = LedTracker()
        tracker.detect(self.triple())
        moved = self.triple(x0=1500.0, y0=900.0)
        got = tracker.detect(moved)
        assert got[0] == (1500.0, 900.0)

    def test_tracker_propagates_no_pattern(self):
        tracker = LedTracker()
        tracker.detect(self.triple())
        with pytest.raises(NoPattern):
            tracker.detect([(0.0, 0.0, 10.0), (5.0, 90.0, 10.0),
                            (80.0, 3.0, 10.0)])


class TestCalibrateCamera:
    WALL_MARKERS = np.array([
        [1.0, 0.5], [9.0, 0.5], [9.0, 4.5], [1.0, 4.5], [5.0, 2.5], [3.0, 3.5],
    ])

    def project_markers(self, cam):
        pts = []
        for x, z in self.WALL_MARKERS:
            px = cam.project(np.array([x, 0.0, z]))
            assert px is not None
            pts.append(px)
        return np.array(pts)

    def test_noiseless_round_trip(self):
        true_cam = default_camera()
        image_pts = self.project_markers(true_cam)
        solved, rms = calibrate_camera(image_pts, self.WALL_MARKERS, true_cam)
        assert rms < 1e-6
        assert np.linalg.norm(solved.pos - true_cam.pos) < 1e-3
        # Orientation error as the angle of the relative rotation.
        rel = solved.r_wc.T @ true_cam.r_wc
        angle = math.acos(min(1.0, max(-1.0, (np.trace(rel) - 1) / 2)))
        assert angle < 1e-6

    def test_round_trip_with_tilted_camera(self):
        tilt = math.radians(12.0)
        rx = np.array([
            [1, 0, 0],
            [0, math.cos(tilt), -math.sin(tilt)],
            [0, math.sin(tilt), math.cos(tilt)],
        ])
        cam = default_camera(pos=(3.0, 12.0, 4.0))
        cam.r_wc = cam.r_wc @ rx
        image_pts = self.project_markers(cam)
        solved, rms = calibrate_camera(image_pts, self.WALL_MARKERS, cam)
        assert rms < 1e-6
        assert np.linalg.norm(solved.pos - cam.pos) < 1e-3

    def test_minimum_four_points(self):
        cam = default_camera()
        image_pts = self.project_markers(cam)
        with pytest.raises(InsufficientData):
            calibrate_camera(image_pts[:3], self.WALL_MARKERS[:3], cam)

    def test_collinear_markers_degenerate(self):
        cam = default_camera()
        wall = np.array([[1.0, 1.0], [3.0, 1.0], [5.0, 1.0], [2.0, 4.0]])
        pts = np.array([cam.project(np.array([x, 0.0, z])) for x, z in wall])
        with pytest.raises(DegenerateConfig):
            calibrate_camera(pts, wall, cam)

    def test_noisy_markers_report_residual(self):
        cam = default_camera()
        rng = np.random.default_rng(3)
        image_pts = self.project_markers(cam) + rng.normal(0, 0.5, (6, 2))
        solved, rms = calibrate_camera(image_pts, self.WALL_MARKERS, cam)
        assert 0.05 < rms < 2.0
        assert np.linalg.norm(solved.pos - cam.pos) < 0.2

    def test_serialization_round_trip(self):
        cam = default_camera()
        clone = CameraModel.from_json(cam.to_json())
        assert np.allclose(clone.r_wc, cam.r_wc)
        assert np.allclose(clone.pos, cam.pos)
        assert clone.fx == cam.fx and clone.height == cam.height


class TestCameraModel:
    def test_project_back_project_round_trip(self):
        cam = default_camera()
        p = np.array([4.0, 2.0, 1.5])
        px = cam.project(p)
        origin, d = cam.back_project(*px)
        # The original point must sit on the recovered ray.
        t = (p - origin) @ d
        assert np.linalg.norm(origin + t * d - p) < 1e-9

    def test_point_behind_camera_is_none(self):
        cam = default_camera(pos=(5.0, 15.0, 2.0))
        assert cam.project(np.array([5.0, 20.0, 2.0])) is None

    def test_validation(self):
        with pytest.raises(ValueError):
            CameraModel(fx=-1.0, fy=1.0, cx=0, cy=0, width=10, height=10)
        with pytest.raises(ValueError):
            CameraModel(fx=1.0, fy=1.0, cx=50, cy=0, width=10, height=10)


class TestFusePose:
    MOUNT = MountGeometry(led_spacing=0.1, led_rear_offset=0.15,
                          led_height_offset=0.05)

    def render(self, cam, pos, yaw):
        """Noise-free LED triple as the camera would report it."""
        leds = led_world_positions(np.array(pos), yaw, self.MOUNT)
        pix = [cam.project(p) for p in leds]
        assert all(p is not None for p in pix)
        pix.sort(key=lambda p: p[0])
        return tuple(pix)

    def test_noiseless_round_trip(self):
        cam = default_camera()
        rng = np.random.default_rng(0)
        for _ in range(50):
            pos = rng.uniform([0.5, 0.8, 0.3], [9.5, 5.0, 3.0])
            yaw = rng.uniform(-0.4, 0.4)
            triple = self.render(cam, pos, yaw)
            fit = WallFit(distance=pos[1], yaw=yaw, inlier_count=50,
                          timestamp=10.0)
            est = fuse_pose(triple, fit, cam, self.MOUNT, now=10.0)
            assert abs(est.x - pos[0]) < 1e-6
            assert abs(est.y - pos[1]) < 1e-9
            assert abs(est.z - pos[2]) < 1e-6
            assert abs(est.yaw - yaw) < 1e-9
            assert est.all_valid

    def test_stale_fit_rejected(self):
        cam = default_camera()
        triple = self.render(cam, (5.0, 2.0, 1.5), 0.0)
        fit = WallFit(distance=2.0, yaw=0.0, inlier_count=50, timestamp=0.0)
        with pytest.raises(StaleSensor):
            fuse_pose(triple, fit, cam, self.MOUNT, now=0.2)
        # Just inside the bound is fine.
        est = fuse_pose(triple, fit, cam, self.MOUNT, now=0.09)
        assert est.timestamp == 0.09

    def test_parallel_ray_rejected(self):
        # Camera pitched to look straight down: rays never cross a
        # constant-y plane.
        cam = default_camera()
        cam.r_wc = np.array([
            [-1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, -1.0],
        ])
        fit = WallFit(distance=2.0, yaw=0.0, inlier_count=50, timestamp=0.0)
        with pytest.raises(NoIntersection):
            fuse_pose(((959, 539), (960, 540), (961, 541)), fit, cam,
                      self.MOUNT, now=0.0)

    def test_yaw_shifts_led_plane(self):
        # At 30 deg yaw the bar closes in by r*(1-cos) and slides
        # laterally by r*sin; fusion must undo both.
        cam = default_camera()
        pos = (4.0, 2.0, 1.5)
        yaw = math.radians(30.0)
        triple = self.render(cam, pos, yaw)
        fit = WallFit(distance=2.0, yaw=yaw, inlier_count=50, timestamp=1.0)
        est = fuse_pose(triple, fit, cam, self.MOUNT, now=1.0)
        assert abs(est.x - 4.0) < 1e-6
        assert abs(est.z - 1.5) < 1e-6

    def test_noise_propagation_matches_pinhole_model(self):
        # Pixel noise sigma on the pattern center maps to roughly
        # depth * sigma / f of lateral error; check within x1.5 and
        # confirm linear scaling across sigma.
        cam = default_camera()
        pos = np.array([5.0, 2.0, 1.5])
        triple = self.render(cam, pos, 0.0)
        fit = WallFit(distance=2.0, yaw=0.0, inlier_count=50, timestamp=0.0)
        depth = 15.0 - (2.0 + self.MOUNT.led_rear_offset)
        rng = np.random.default_rng(8)
        stds = []
        for sigma in (0.1, 0.5, 1.0):
            xs = []
            for _ in range(400):
                mid = (triple[1][0] + rng.normal(0, sigma),
                       triple[1][1] + rng.normal(0, sigma))
                noisy = (triple[0], mid, triple[2])
                est = fuse_pose(noisy, fit, cam, self.MOUNT, now=0.0)
                xs.append(est.x)
            stds.append(float(np.std(xs)))
            predicted = depth * sigma / cam.fx
            assert predicted / 1.5 < stds[-1] < predicted * 1.5
        assert stds[0] < stds[1] < stds[2]

    def test_led_world_positions_geometry(self):
        leds = led_world_positions(np.array([2.0, 1.0, 3.0]), 0.0, self.MOUNT)
        mid = leds[1]
        assert np.allclose(mid, [2.0, 1.15, 3.05])
        assert np.allclose(leds[0], [1.9, 1.15, 3.05])
        assert np.allclose(leds[2], [2.1, 1.15, 3.05])
        # Spacing is preserved under yaw.
        leds = led_world_positions(np.array([2.0, 1.0, 3.0]), 0.7, self.MOUNT)
        assert np.linalg.norm(leds[2] - leds[0]) == pytest.approx(0.2)
