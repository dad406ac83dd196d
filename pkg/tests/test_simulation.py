"""Tests for the plant, wind, sensors, and paint raster.

Frozen oracles used below:

- First-order lag closed form: v(t) = v_inf + (v0 - v_inf) * exp(-t/tau).
  The exact discretization must reproduce it bit-for-bit regardless of
  how the interval is subdivided, since exp(-a)*exp(-b) = exp(-(a+b)).
- OU stationary statistics: std sigma per axis, mean 0; the exact
  update w' = w*exp(-dt/tau) + sigma*sqrt(1-exp(-2dt/tau))*N(0,1)
  preserves them for any dt.
- Disc area: a radius-r stamp on a c-cell grid covers about pi*r^2/c^2
  cells (within discretization slack).
- Valve timing: with velocity pinned at v and a delay d, paint must
  start at pos(t_cmd + d), to within one raster cell.
"""

import math

import numpy as np
import pytest

from muralkit.errors import NoPattern
from muralkit.localization import (
    MountGeometry,
    detect_led_pattern,
    fuse_pose,
    ransac_wall_fit,
    WallFit,
)
from muralkit.simulation import (
    BACKGROUND_COLOR,
    DroneState,
    OuWind,
    PaintRaster,
    SimParams,
    SimWorld,
    paint_needed_g,
    render_camera,
    render_lidar,
    step_dynamics,
)
from tests.test_localization import default_camera

MOUNT = MountGeometry()


def make_world(**kw):
    params = SimParams(**kw.pop("params", {}))
    return SimWorld(10.0, 6.0, default_camera(), MOUNT, params=params, **kw)


class TestDynamics:
    def test_matches_closed_form_velocity(self):
        p = SimParams()
        s = DroneState(pos=np.zeros(3), vel=np.array([0.2, 0.0, -0.1]))
        cmd = np.array([1.0, 0.5, 0.0])
        step_dynamics(s, cmd, 0.0, np.zeros(3), 0.08, p)
        expect = cmd + (np.array([0.2, 0.0, -0.1]) - cmd) * math.exp(-0.08 / p.tau_v)
        assert np.allclose(s.vel, expect, atol=1e-15)

    def test_velocity_independent_of_subdivision(self):
        p = SimParams()
        a = DroneState(pos=np.zeros(3), vel=np.array([0.3, 0.1, 0.0]))
        b = a.copy()
        cmd = np.array([0.7, -0.2, 0.4])
        step_dynamics(a, cmd, 0.0, np.zeros(3), 0.1, p)
        for _ in range(4):
            step_dynamics(b, cmd, 0.0, np.zeros(3), 0.025, p)
        assert np.allclose(a.vel, b.vel, atol=1e-12)

    def test_step_response_at_tau(self):
        p = SimParams()
        s = DroneState(pos=np.zeros(3))
        n = int(round(p.tau_v / 0.02))
        for _ in range(n):
            step_dynamics(s, np.array([1.0, 0.0, 0.0]), 0.0, np.zeros(3), 0.02, p)
        assert s.vel[0] == pytest.approx(1.0 - math.exp(-1.0), abs=1e-12)

    def test_position_tracks_exact_integral(self):
        p = SimParams()
        s = DroneState(pos=np.zeros(3))
        cmd = np.array([1.0, 0.0, 0.0])
        t, dt = 2.0, 0.02
        for _ in range(int(t / dt)):
            step_dynamics(s, cmd, 0.0, np.zeros(3), dt, p)
        exact = t - p.tau_v * (1.0 - math.exp(-t / p.tau_v))
        assert s.pos[0] == pytest.approx(exact, abs=2e-2)

    def test_yaw_and_time_integrate(self):
        s = DroneState(pos=np.zeros(3))
        step_dynamics(s, np.zeros(3), 0.5, np.zeros(3), 0.1, SimParams())
        assert s.yaw == pytest.approx(0.05)
        assert s.time == pytest.approx(0.1)

    def test_wind_coupling_offsets_velocity(self):
        p = SimParams(wind_coupling=0.4)
        s = DroneState(pos=np.zeros(3))
        wind = np.array([1.0, 0.0, 0.0])
        for _ in range(400):
            step_dynamics(s, np.zeros(3), 0.0, wind, 0.05, p)
        assert s.vel[0] == pytest.approx(0.4, abs=1e-6)

    def test_dt_bounds(self):
        s = DroneState(pos=np.zeros(3))
        with pytest.raises(ValueError):
            step_dynamics(s, np.zeros(3), 0.0, np.zeros(3), 0.0, SimParams())
        with pytest.raises(ValueError):
            step_dynamics(s, np.zeros(3), 0.0, np.zeros(3), 0.11, SimParams())


class TestOuWind:
    def test_stationary_std(self):
        p = SimParams(wind_sigma=0.5, wind_tau=2.0)
        wind = OuWind(p, np.random.default_rng(1))
        samples = np.array([wind.step(0.02).copy() for _ in range(40000)])
        # Skip the spin-up from zero.
        tail = samples[2000:]
        assert np.allclose(tail.std(axis=0), 0.5, rtol=0.1)
        assert np.allclose(tail.mean(axis=0), 0.0, atol=0.06)

    def test_disabled_wind_is_zero(self):
        wind = OuWind(SimParams(wind_sigma=0.0), np.random.default_rng(1))
        assert np.all(wind.step(0.02) == 0.0)

    def test_seeded_reproducibility(self):
        p = SimParams(wind_sigma=0.5)
        a = OuWind(p, np.random.default_rng(7))
        b = OuWind(p, np.random.default_rng(7))
        for _ in range(100):
            assert np.array_equal(a.step(0.02), b.step(0.02))


class TestPaintRaster:
    def test_disc_area(self):
        r = PaintRaster(2.0, 2.0, 0.01)
        r.stamp(1.0, 1.0, 0.05, 2, 0)
        count = int(r.painted_mask().sum())
        assert count == pytest.approx(math.pi * 0.05 ** 2 / 0.01 ** 2, rel=0.15)
        assert set(np.unique(r.color)) == {BACKGROUND_COLOR, 2}
        assert r.cells_for_path(0).sum() == count

    def test_swath_covers_stroke(self):
        r = PaintRaster(2.0, 1.0, 0.01)
        r.stamp_swath((0.2, 0.5), (1.2, 0.5), 0.03, 1, 3)
        pts = r.painted_points()
        # Every painted cell is within the dilated stroke.
        d = np.abs(pts[:, 1] - 0.5)
        inside_x = (pts[:, 0] > 0.2 - 0.04) & (pts[:, 0] < 1.2 + 0.04)
        assert np.all(d <= 0.03 + 0.011)
        assert np.all(inside_x)
        # And the stroke core is fully covered.
        xs = np.arange(0.25, 1.15, 0.005)
        cols = (xs / 0.01).astype(int)
        row = int(0.5 / 0.01)
        assert np.all(r.color[cols, row] == 1)

    def test_out_of_wall_clipped(self):
        r = PaintRaster(1.0, 1.0, 0.01)
        r.stamp(-0.5, 0.5, 0.02, 1, 0)
        r.stamp(0.99, 0.99, 0.05, 1, 0)
        assert r.painted_mask().sum() > 0  # corner stamp partially lands

    def test_last_path_wins(self):
        r = PaintRaster(1.0, 1.0, 0.01)
        r.stamp(0.5, 0.5, 0.05, 1, 0)
        r.stamp(0.5, 0.5, 0.02, 2, 1)
        center = r.color[50, 50]
        assert center == 2
        assert r.path_idx[50, 50] == 1
        assert r.color[50 + 4, 50] == 1  # outer ring untouched

    def test_png_round_trip_orientation(self):
        r = PaintRaster(1.0, 0.5, 0.01)
        r.stamp(0.05, 0.45, 0.02, 1, 0)  # top-left corner of the wall
        img = r.to_image()
        assert img.size == (100, 50)
        px = img.getpixel((5, 5))  # image top-left
        assert px == (25, 25, 28)
        assert r.to_png_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


class TestSensors:
    def test_lidar_noiseless_geometry(self):
        state = DroneState(pos=np.array([3.0, 2.0, 1.0]), yaw=0.25)
        scan = render_lidar(state, SimParams(), np.random.default_rng(0))
        assert len(scan) > 50
        fit = ransac_wall_fit(scan)
        assert fit.distance == pytest.approx(2.0, abs=1e-9)
        assert fit.yaw == pytest.approx(0.25, abs=1e-9)

    def test_lidar_max_range(self):
        state = DroneState(pos=np.array([3.0, 9.5, 1.0]))
        scan = render_lidar(state, SimParams(lidar_max_range=10.0),
                            np.random.default_rng(0))
        assert np.all(np.linalg.norm(scan, axis=1) <= 10.0 + 1e-9)

    def test_lidar_outlier_fraction(self):
        state = DroneState(pos=np.array([3.0, 2.0, 1.0]))
        params = SimParams(lidar_outlier_frac=0.4)
        scan = render_lidar(state, params, np.random.default_rng(3))
        off_wall = np.abs(scan[:, 1] - 2.0) > 0.05
        assert 0.25 < off_wall.mean() < 0.45

    def test_camera_sees_three_leds(self):
        state = DroneState(pos=np.array([5.0, 2.0, 1.5]))
        blobs = render_camera(state, default_camera(), MOUNT, SimParams(),
                              np.random.default_rng(0))
        assert len(blobs) == 3
        assert all(b[2] == 250.0 for b in blobs)

    def test_camera_distractors_added(self):
        state = DroneState(pos=np.array([5.0, 2.0, 1.5]))
        params = SimParams(camera_distractors=5)
        blobs = render_camera(state, default_camera(), MOUNT, params,
                              np.random.default_rng(0))
        assert len(blobs) == 8

    def test_full_sensing_round_trip(self):
        # Noise-free render -> detect -> fit -> fuse returns the truth.
        cam = default_camera()
        state = DroneState(pos=np.array([4.2, 1.8, 2.1]), yaw=0.15, time=5.0)
        scan = render_lidar(state, SimParams(), np.random.default_rng(0))
        blobs = render_camera(state, cam, MOUNT, SimParams(),
                              np.random.default_rng(0))
        fit = ransac_wall_fit(scan, timestamp=state.time)
        triple = detect_led_pattern(blobs)
        est = fuse_pose(triple, fit, cam, MOUNT, now=state.time)
        assert abs(est.x - 4.2) < 1e-6
        assert abs(est.y - 1.8) < 1e-9
        assert abs(est.z - 2.1) < 1e-6
        assert abs(est.yaw - 0.15) < 1e-9


class TestSimWorld:
    def test_valve_delay_shifts_paint_start(self):
        world = make_world(start_pos=(0.5, 0.075, 1.0))
        world.state.vel = np.array([0.5, 0.0, 0.0])
        world.set_brush(0.02, 1, 0)
        world.command_valve(True)
        for _ in range(30):
            world.step(np.array([0.5, 0.0, 0.0]), 0.0, 0.02)
        pts = world.raster.painted_points()
        assert len(pts)
        # Valve opens 0.15 s after the command, at x = 0.5 + 0.5 * 0.15.
        expected = 0.5 + 0.5 * world.params.valve_delay_s
        assert pts[:, 0].min() == pytest.approx(expected - 0.02, abs=0.015)

    def test_valve_close_delay(self):
        world = make_world(start_pos=(0.5, 0.075, 1.0))
        world.state.vel = np.array([0.5, 0.0, 0.0])
        world.set_brush(0.02, 1, 0)
        world.command_valve(True)
        for k in range(50):
            if k == 25:
                world.command_valve(False)
            world.step(np.array([0.5, 0.0, 0.0]), 0.0, 0.02)
        x_close = 0.5 + 0.5 * (25 * 0.02 + world.params.valve_delay_s)
        pts = world.raster.painted_points()
        assert pts[:, 0].max() == pytest.approx(x_close + 0.02, abs=0.015)

    def test_band_violation_blocks_paint(self):
        world = make_world(start_pos=(1.0, 0.5, 1.0))
        world.set_brush(0.02, 1, 0)
        world.command_valve(True)
        for _ in range(30):
            world.step(np.zeros(3), 0.0, 0.02)
        assert world.raster.painted_mask().sum() == 0
        assert world.band_violations > 0

    def test_paint_and_battery_consumption(self):
        world = make_world(start_pos=(1.0, 0.075, 1.0))
        world.set_brush(0.02, 1, 0)
        world.command_valve(True)
        for _ in range(100):
            world.step(np.zeros(3), 0.0, 0.02)
        open_time = 2.0 - world.params.valve_delay_s
        expect = world.params.paint_full_g - world.params.paint_flow_g_s * open_time
        assert world.state.paint_g == pytest.approx(expect, abs=1e-9)
        assert world.state.battery == pytest.approx(1.0 - 2.0 / 1200.0, abs=1e-12)

    def test_no_paint_when_empty(self):
        world = make_world(start_pos=(1.0, 0.075, 1.0))
        world.state.paint_g = 0.0
        world.set_brush(0.02, 1, 0)
        world.command_valve(True)
        for _ in range(30):
            world.step(np.zeros(3), 0.0, 0.02)
        assert world.raster.painted_mask().sum() == 0

    def test_deterministic_runs(self):
        def run():
            world = make_world(
                params={"wind_sigma": 0.5, "lidar_sigma": 0.005,
                        "camera_sigma_px": 0.5},
                seed=11, start_pos=(2.0, 0.075, 1.0))
            world.set_brush(0.02, 1, 0)
            world.command_valve(True)
            for _ in range(200):
                scan, blobs = world.sense()
                world.step(np.array([0.3, 0.0, 0.1]), 0.01, 0.02)
            return world
        a, b = run(), run()
        assert np.array_equal(a.state.pos, b.state.pos)
        assert np.array_equal(a.raster.color, b.raster.color)
        assert a.state.paint_g == b.state.paint_g

    def test_reseed_restarts_streams(self):
        a = make_world(params={"wind_sigma": 0.5}, seed=1)
        b = make_world(params={"wind_sigma": 0.5}, seed=2)
        for _ in range(40):
            a.step(np.zeros(3), 0.0, 0.02)
            b.step(np.zeros(3), 0.0, 0.02)
        assert not np.array_equal(a.state.pos, b.state.pos)
        a.reseed([9, 3])
        b.reseed([9, 3])
        assert np.array_equal(a.wind.step(0.02), b.wind.step(0.02))
        assert np.array_equal(a.rng_lidar.normal(size=4),
                              b.rng_lidar.normal(size=4))


class TestResourceProjection:
    def test_paint_needed(self):
        from dataclasses import replace

        from muralkit.geometry import CurveSegment, PathChain
        from muralkit.planner import MissionPlan, PlanParams, extend_path
        chain = PathChain((CurveSegment.line((0, 0), (4, 0)),))
        paths = [replace(extend_path(chain, 0.3), index=i) for i in range(2)]
        plan = MissionPlan(tuple(paths), PlanParams())
        # Two 4 m windows at 0.5 m/s and 2 g/s: 32 g.
        assert paint_needed_g(plan, 0.5, 2.0) == pytest.approx(32.0, rel=1e-6)
        assert paint_needed_g(plan, 0.5, 2.0, from_index=1) == pytest.approx(
            16.0, rel=1e-6)
