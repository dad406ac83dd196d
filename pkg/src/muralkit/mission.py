"""Mission lifecycle: state machine, guards, checkpoints, eraser, retries.

Runs the whole stack against the simulated world at a fixed tick: the
ground station renders its camera, seals the LED triple into a frame
and sends it over both channels; the drone side fits the wall from
LiDAR, fuses the freshest verified frame into a pose, and feeds the
tracking or goto controller. Guards can force a landing on any tick;
an RC interrupt aborts from any phase. Progress is checkpointed after
every completed path so a later run can resume, and resumed drawing is
bit-identical to an uninterrupted run because each drawing phase
starts from a reseeded world and a canonical start state.
"""

from __future__ import annotations

import json
import logging
import struct
from collections import deque
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Iterable

import numpy as np

from .comms import Channel, FailoverSelector, LinkReceiver, seal_frame
from .config import GuardConfig, LinkSettings
from .control import (
    RETRY_ERROR_BOUND,
    ControllerGains,
    GotoController,
    PathTracker,
    check_retry,
    control_step,
    validate_plan,
)
from .errors import (
    BadGeometry,
    BadSelection,
    IllegalTransition,
    InsufficientData,
    NoIntersection,
    NoPattern,
    NoWall,
    PlanChanged,
    StaleSensor,
)
from .geometry import PathChain, sample_path
from .localization import LedTracker, PoseEstimate, fuse_pose, ransac_wall_fit
from .planner import MissionPlan, extend_path, plan_hash
from .simulation import BACKGROUND_COLOR, SimWorld, paint_needed_g

log = logging.getLogger(__name__)

PHASES = ("idle", "takeoff", "goto", "drawing", "travel",
          "landing", "landed", "aborted")

# Guard trips may force a landing from any airborne phase; everything
# else follows the nominal lifecycle.
LEGAL_TRANSITIONS: dict[str, frozenset[str]] = {
    "idle": frozenset({"takeoff", "aborted"}),
    "takeoff": frozenset({"goto", "landing", "aborted"}),
    "goto": frozenset({"drawing", "landing", "aborted"}),
    "drawing": frozenset({"travel", "landing", "aborted"}),
    "travel": frozenset({"drawing", "landing", "aborted"}),
    "landing": frozenset({"landed", "aborted"}),
    "landed": frozenset({"aborted"}),
    "aborted": frozenset(),
}

ACTIVE_PHASES = frozenset({"takeoff", "goto", "drawing", "travel", "landing"})

CRUISE_Z = 1.0  # m, takeoff hover height
TRAVEL_STANDOFF = 0.3  # m, wall distance for repositioning moves
DRAW_BRUSH_RADIUS = 0.02  # m, half the spray cap footprint
ERASER_BRUSH_RADIUS = 0.04  # m, eraser cap covers the stroke plus slop
TELEMETRY_HZ = 10.0

_TRIPLE_WIRE = struct.Struct(">6d")  # 3 LED pixel pairs


@dataclass(frozen=True)
class Event:
    time: float
    severity: str  # info | warning | critical
    code: str
    message: str
    payload: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)


class EventLog:
    """Append-only feed with monotone timestamps and fan-out."""

    def __init__(self) -> None:
        self.events: list[Event] = []
        self._subs: list[Callable[[Event], None]] = []

    def emit(self, time: float, severity: str, code: str, message: str,
             **payload) -> Event:
        if self.events and time < self.events[-1].time:
            time = self.events[-1].time  # clamp: feed stays monotone
        ev = Event(time, severity, code, message, payload)
        self.events.append(ev)
        log.log({"info": logging.INFO, "warning": logging.WARNING,
                 "critical": logging.ERROR}[severity],
                "[%.3fs] %s: %s", time, code, message)
        for cb in list(self._subs):
            cb(ev)
        return ev

    def subscribe(self, cb: Callable[[Event], None]) -> None:
        self._subs.append(cb)

    def codes(self) -> list[str]:
        return [e.code for e in self.events]


def select_paths(plan: MissionPlan, ids: Iterable[int] | None = None,
                 span: tuple[int, int] | None = None) -> list[int]:
    """Resolve a selection to path indices in plan order.

    `span` is a half-open index range; `ids` is an explicit set whose
    click order is ignored (execution always follows plan order).
    """
    if (ids is None) == (span is None):
        raise ValueError("give exactly one of ids or span")
    n = len(plan.draw_paths)
    if span is not None:
        a, b = span
        if not (0 <= a <= b <= n):
            raise BadSelection(f"range {a}..{b} outside 0..{n}")
        return list(range(a, b))
    picked = list(ids)
    if len(picked) != len(set(picked)):
        raise BadSelection("duplicate path indices in selection")
    for i in picked:
        if not 0 <= i < n:
            raise BadSelection(f"path index {i} outside 0..{n - 1}")
    return sorted(picked)


@dataclass(frozen=True)
class Checkpoint:
    plan_hash: str
    last_completed_index: int  # -1 when nothing finished yet
    position: tuple[float, float, float]
    timestamp: float

    def to_json(self) -> dict:
        return {"plan_hash": self.plan_hash,
                "last_completed_index": self.last_completed_index,
                "position": list(self.position),
                "timestamp": self.timestamp}

    @classmethod
    def from_json(cls, doc: dict) -> "Checkpoint":
        return cls(plan_hash=doc["plan_hash"],
                   last_completed_index=int(doc["last_completed_index"]),
                   position=tuple(float(v) for v in doc["position"]),
                   timestamp=float(doc["timestamp"]))


def save_checkpoint(cp: Checkpoint, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cp.to_json(), fh, indent=1)


def load_checkpoint(path: str) -> Checkpoint:
    with open(path, encoding="utf-8") as fh:
        return Checkpoint.from_json(json.load(fh))


def resume_selection(cp: Checkpoint, plan: MissionPlan,
                     selection: list[int] | None = None) -> list[int]:
    """Selection minus already-completed paths; guards the plan hash."""
    if cp.plan_hash != plan_hash(plan):
        raise PlanChanged("checkpoint was written against a different plan")
    base = selection if selection is not None else list(
        range(len(plan.draw_paths)))
    return [i for i in base if i > cp.last_completed_index]


def add_eraser_segments(plan: MissionPlan, chains: list[PathChain],
                        wall_size: tuple[float, float],
                        bg_color: int = BACKGROUND_COLOR) -> MissionPlan:
    """Append eraser paths, in operator order, painted in background.

    Eraser paths are not re-sorted: the operator is targeting specific
    mistakes, so placement order is execution order.
    """
    w, h = wall_size
    new_paths = list(plan.draw_paths)
    for chain in chains:
        pts = sample_path(chain, 0.01)
        if (pts[:, 0].min() < 0 or pts[:, 0].max() > w
                or pts[:, 1].min() < 0 or pts[:, 1].max() > h):
            raise BadGeometry("eraser segment leaves the wall rectangle")
        dp = extend_path(chain, plan.params.extension_len,
                         color=bg_color, source="eraser")
        new_paths.append(replace(dp, index=len(new_paths)))
    return MissionPlan(draw_paths=new_paths, params=plan.params)


def pack_triple(triple) -> bytes:
    (ax, ay), (bx, by), (cx, cy) = triple
    return _TRIPLE_WIRE.pack(ax, ay, bx, by, cx, cy)


def unpack_triple(data: bytes):
    ax, ay, bx, by, cx, cy = _TRIPLE_WIRE.unpack(data)
    return ((ax, ay), (bx, by), (cx, cy))


@dataclass
class TelemetrySample:
    time: float
    phase: str
    x: float
    y: float
    z: float
    yaw: float
    paint_g: float
    battery: float
    path_index: int  # -1 outside drawing
    attempt: int
    progress_s: float
    spray: bool
    link_stale: bool
    pose_ok: bool

    def to_json(self) -> dict:
        return asdict(self)


class MissionRunner:
    """Single authoritative mission state driven by fixed 20 ms ticks.

    Commands from any front end land in one queue and are applied
    between ticks, so the state machine never races itself.
    """

    def __init__(self, plan: MissionPlan, world: SimWorld, *,
                 gains: ControllerGains | None = None,
                 link: LinkSettings | None = None,
                 guards: GuardConfig | None = None,
                 seed: int = 0, dt: float = 0.02,
                 checkpoint_path: str | None = None,
                 validate: bool = True):
        self.plan = plan
        self.world = world
        self.gains = gains if gains is not None else ControllerGains()
        self.link = link if link is not None else LinkSettings()
        self.guards = guards if guards is not None else GuardConfig()
        self.seed = int(seed)
        self.dt = float(dt)
        if validate:
            validate_plan(plan, self.gains)

        self.phase = "idle"
        self.selection: list[int] = list(range(len(plan.draw_paths)))
        self.queue: list[tuple[int, int]] = []  # (path index, attempt)
        self.attempts: dict[int, int] = {}
        self.last_completed = -1
        self.checkpoint: Checkpoint | None = None
        self.checkpoint_path = checkpoint_path
        self._plan_hash = plan_hash(plan)

        self.events = EventLog()
        self.telemetry: list[TelemetrySample] = []
        self.on_telemetry: list[Callable[[TelemetrySample], None]] = []
        self._telem_next = 0.0

        self._commands: deque = deque()
        self._blackouts: list[tuple[str, float, float]] = []
        self._manual_land = False
        self._drain_warned = False
        self._drain_window: deque = deque()

        self.home = world.state.pos.copy()
        self.tracker: PathTracker | None = None
        self._goto: GotoController | None = None
        self.last_pose: PoseEstimate | None = None
        self.link_stale = False
        self._had_pose = False
        self._spray_events_seen = 0
        self._phase_tick = 0
        self._seed_ctx = (0, 0)

        self._seq = 0
        self._backup_next = world.state.time
        self._rx_p = LinkReceiver(self.link.key, "primary")
        self._rx_b = LinkReceiver(self.link.key, "backup")
        self._reset_ground(0, 0)

    # -- command surface ---------------------------------------------------

    def command(self, name: str, **kw) -> None:
        self._commands.append((name, kw))

    def start(self) -> None:
        self.command("start")

    def land(self) -> None:
        self.command("land")

    def abort(self) -> None:
        self.command("abort")

    def select(self, ids=None, span=None) -> None:
        self.command("select", ids=ids, span=span)

    def inject_blackout(self, channel: str, t0: float, t1: float) -> None:
        """Test/fault hook: silence a channel for a sim-time window."""
        if channel not in ("primary", "backup", "both"):
            raise ValueError("channel must be primary, backup, or both")
        self._blackouts.append((channel, t0, t1))

    @property
    def active(self) -> bool:
        return self.phase in ACTIVE_PHASES

    def apply_checkpoint(self, cp: Checkpoint) -> list[int]:
        """Reduce the pending selection to paths after the checkpoint."""
        remaining = resume_selection(cp, self.plan, self.selection)
        self.selection = remaining
        self.last_completed = cp.last_completed_index
        self.checkpoint = cp
        return remaining

    # -- internals ----------------------------------------------------------

    def _reset_ground(self, path_index: int, attempt: int) -> None:
        """Fresh channel rngs, LED tracker, and selector.

        Called at every drawing entry so the pose pipeline state does
        not depend on how the drone got there; this is what makes
        resumed runs reproduce uninterrupted rasters bit-exactly.
        """
        base = [self.seed & 0xFFFFFFFF, (path_index + 1) & 0xFFFFFFFF,
                attempt & 0xFFFFFFFF]
        self._chan_p = Channel(self.link.primary, np.random.default_rng(
            np.random.SeedSequence(base + [21])))
        self._chan_b = Channel(self.link.backup, np.random.default_rng(
            np.random.SeedSequence(base + [22])))
        self._led_tracker = LedTracker()
        self._selector = FailoverSelector(
            timeout_us=int(self.link.failover_timeout_s * 1e6))
        self._backup_next = self.world.state.time
        # The fresh selector has no pose for a tick or two; that is a
        # reset artifact, not a dying link, so do not report stale.
        self._had_pose = False
        self.link_stale = False

    def _ransac_seed(self) -> int:
        a, b = self._seed_ctx
        mix = ((self.seed & 0xFFFFFFFF) * 0x9E3779B1
               + (a + 1) * 0x85EBCA6B + b * 0xC2B2AE35 + self._phase_tick)
        return mix & 0x7FFFFFFF

    def _emit(self, severity: str, code: str, message: str, **payload):
        return self.events.emit(self.world.state.time, severity, code,
                                message, **payload)

    def _transition(self, new_phase: str) -> None:
        if new_phase not in LEGAL_TRANSITIONS[self.phase]:
            raise IllegalTransition(f"{self.phase} -> {new_phase}")
        old, self.phase = self.phase, new_phase
        self._phase_tick = 0
        self._emit("info", "phase_change", f"{old} -> {new_phase}",
                   from_phase=old, to_phase=new_phase)

    def _apply_commands(self) -> None:
        while self._commands:
            name, kw = self._commands.popleft()
            if name == "start":
                self._cmd_start()
            elif name == "land":
                if self.active:
                    self._manual_land = True
                else:
                    self._emit("warning", "land_rejected",
                               f"land command in phase {self.phase}")
            elif name == "abort":
                self._cmd_abort()
            elif name == "select":
                if self.phase != "idle":
                    self._emit("warning", "select_rejected",
                               "selection only changes while idle")
                else:
                    self.selection = select_paths(self.plan, **kw)
                    self._emit("info", "selection_changed",
                               f"{len(self.selection)} paths selected",
                               indices=list(self.selection))
            elif name == "eraser":
                self._cmd_eraser(**kw)
            else:
                self._emit("warning", "unknown_command", name)

    def _cmd_start(self) -> None:
        if self.phase != "idle":
            self._emit("warning", "start_rejected",
                       f"mission already in phase {self.phase}")
            return
        if not self.selection:
            self._emit("warning", "nothing_to_draw",
                       "empty selection, staying on the ground")
            return
        self.queue = [(i, 0) for i in self.selection]
        self._manual_land = False
        self.home = self.world.state.pos.copy()
        self._goto = GotoController(
            target=np.array([self.home[0], self.home[1], CRUISE_Z]))
        self._transition("takeoff")

    def _cmd_abort(self) -> None:
        if self.phase == "aborted":
            return
        self.world.command_valve(False)
        self._emit("critical", "rc_interrupt",
                   "flight interrupted, aborting")
        self._transition("aborted")

    def _cmd_eraser(self, chains: list[PathChain],
                    bg_color: int = BACKGROUND_COLOR) -> None:
        try:
            new_plan = add_eraser_segments(self.plan, chains,
                                           self.world.wall, bg_color)
        except BadGeometry as exc:
            self._emit("warning", "eraser_rejected", str(exc))
            return
        added = list(range(len(self.plan.draw_paths),
                           len(new_plan.draw_paths)))
        self.plan = new_plan
        self._plan_hash = plan_hash(new_plan)
        self.selection = self.selection + added
        if self.active:
            self.queue.extend((i, 0) for i in added)
        self._emit("info", "eraser_added",
                   f"{len(added)} eraser segments appended", indices=added)

    def _path_start_target(self, idx: int) -> np.ndarray:
        # Repositioning happens at a safer wall distance than drawing;
        # the drawing entry snaps to the true standoff.
        sx, sz = self.plan.draw_paths[idx].start
        return np.array([sx, TRAVEL_STANDOFF, sz])

    def _enter_drawing(self) -> None:
        idx, attempt = self.queue[0]
        path = self.plan.draw_paths[idx]
        # Canonical per-path start: reseeded streams and a snapped
        # state make every (path, attempt) episode self-contained.
        self.world.reseed([self.seed, idx + 1, attempt])
        sx, sz = path.start
        st = self.world.state
        st.pos[:] = (sx, self.gains.standoff, sz)
        st.vel[:] = 0.0
        st.yaw = 0.0
        radius = ERASER_BRUSH_RADIUS if path.source == "eraser" \
            else DRAW_BRUSH_RADIUS
        self.world.set_brush(radius, path.color, idx)
        self.tracker = PathTracker(path, self.gains)
        self._reset_ground(idx, attempt)
        self._seed_ctx = (idx, attempt)
        self._transition("drawing")
        self._emit("info", "path_started",
                   f"path {idx} attempt {attempt}",
                   index=idx, attempt=attempt, color=path.color,
                   source=path.source)

    def _finish_path(self) -> None:
        idx, attempt = self.queue[0]
        self.world.command_valve(False)
        err = self.tracker.max_window_error if self.tracker else 0.0
        done_attempts = attempt + 1
        self.attempts[idx] = done_attempts
        self._seed_ctx = (0, 0)
        if check_retry(err, done_attempts):
            self.queue[0] = (idx, attempt + 1)
            self._emit("warning", "path_retry",
                       f"path {idx} off by {err:.3f} m, retrying",
                       index=idx, error=err, attempt=attempt)
            self._goto = GotoController(target=self._path_start_target(idx))
            self._transition("travel")
            return
        if err > RETRY_ERROR_BOUND:
            self._emit("warning", "path_tolerance_exceeded",
                       f"path {idx} kept despite {err:.3f} m error",
                       index=idx, error=err, attempts=done_attempts)
        self.queue.pop(0)
        self.last_completed = max(self.last_completed, idx)
        st = self.world.state
        self.checkpoint = Checkpoint(
            plan_hash=self._plan_hash,
            last_completed_index=self.last_completed,
            position=(float(st.pos[0]), float(st.pos[1]), float(st.pos[2])),
            timestamp=float(st.time),
        )
        if self.checkpoint_path:
            save_checkpoint(self.checkpoint, self.checkpoint_path)
        self._emit("info", "path_completed",
                   f"path {idx} done, max window error {err:.3f} m",
                   index=idx, error=err, attempts=done_attempts)
        if self.queue:
            nxt = self.queue[0][0]
            self._goto = GotoController(target=self._path_start_target(nxt))
            self._transition("travel")
        else:
            # Nominal completion: fly home to land. Guard trips land
            # in place instead (see _check_guards).
            self._goto = GotoController(
                target=np.array([self.home[0], self.home[1], 0.0]))
            self._transition("landing")

    def _guard_reason(self) -> str | None:
        if self._manual_land:
            return "manual"
        st = self.world.state
        if st.battery < self.guards.battery_min:
            return "low_battery"
        remaining = {i for i, _ in self.queue}
        need = paint_needed_g(self.plan, self.gains.v_target,
                              self.world.params.paint_flow_g_s,
                              indices=remaining)
        if need > st.paint_g - self.guards.paint_reserve_g:
            return "paint_runoff"
        return None

    def _check_guards(self) -> None:
        if self.phase not in ("takeoff", "goto", "drawing", "travel"):
            return
        reason = self._guard_reason()
        if reason is None:
            return
        self.world.command_valve(False)
        st = self.world.state
        self._emit("critical", f"guard_{reason}",
                   f"auto-landing: {reason}",
                   battery=st.battery, paint_g=st.paint_g)
        self._goto = GotoController(
            target=np.array([st.pos[0], st.pos[1], 0.0]))
        self._transition("landing")

    def _drain_watch(self) -> None:
        st = self.world.state
        self._drain_window.append((st.time, st.battery))
        while self._drain_window and st.time - self._drain_window[0][0] > 1.0:
            self._drain_window.popleft()
        if self._drain_warned or len(self._drain_window) < 2:
            return
        (t0, b0), (t1, b1) = self._drain_window[0], self._drain_window[-1]
        if t1 > t0 and (b0 - b1) / (t1 - t0) > self.guards.drain_warn_per_s:
            self._drain_warned = True
            self._emit("warning", "battery_drain_high",
                       "battery draining faster than expected",
                       rate_per_s=(b0 - b1) / (t1 - t0))

    def _blacked(self, channel: str, t: float) -> bool:
        for name, t0, t1 in self._blackouts:
            if (name == channel or name == "both") and t0 <= t < t1:
                return True
        return False

    def _sense_and_fuse(self) -> PoseEstimate | None:
        t = self.world.state.time
        scan, blobs = self.world.sense()

        # Onboard wall fit from LiDAR.
        fit = None
        try:
            fit = ransac_wall_fit(scan, seed=self._ransac_seed(), timestamp=t)
        except (NoWall, InsufficientData):
            pass

        # Ground station: detect the LED bar and uplink it, twice.
        triple = None
        try:
            triple = self._led_tracker.detect(blobs)
        except NoPattern:
            pass
        backup_due = t + 1e-12 >= self._backup_next
        if backup_due:
            self._backup_next = t + 1.0 / self.link.backup_rate_hz
        if triple is not None:
            frame = seal_frame(pack_triple(triple), self.link.key,
                               self._seq, int(t * 1e6))
            self._seq += 1
            if not self._blacked("primary", t):
                self._chan_p.transmit(frame, t)
            if backup_due and not self._blacked("backup", t):
                self._chan_b.transmit(frame, t)

        # Drone side: verify, fail over, fuse.
        cand = []
        for ch, rx, name in ((self._chan_p, self._rx_p, "primary"),
                             (self._chan_b, self._rx_b, "backup")):
            for data in ch.receive(t):
                out = rx.feed(data)
                if out is not None:
                    cand.append((*out, name))
        sel = self._selector.select(cand, int(t * 1e6))

        stale_now = sel.stale
        if self._had_pose and stale_now != self.link_stale:
            if stale_now:
                self._emit("warning", "link_stale",
                           "no fresh pose from either channel")
            else:
                self._emit("info", "link_restored", "pose stream is back")
        self.link_stale = stale_now
        if sel.payload is not None:
            self._had_pose = True

        if sel.payload is None or sel.stale or fit is None:
            return None
        try:
            return fuse_pose(unpack_triple(sel.payload), fit,
                             self.world.camera, self.world.mount, now=t)
        except (StaleSensor, NoIntersection):
            return None

    def _emit_spray_events(self) -> None:
        new = self.world.valve_log[self._spray_events_seen:]
        self._spray_events_seen = len(self.world.valve_log)
        for t, pos, opened in new:
            self._emit("info", "spray_on" if opened else "spray_off",
                       f"valve {'open' if opened else 'closed'} at "
                       f"x={pos[0]:.3f} z={pos[2]:.3f}",
                       valve_time=float(t), x=float(pos[0]), z=float(pos[2]))

    def _telemetry_due(self) -> None:
        t = self.world.state.time
        if t + 1e-12 < self._telem_next:
            return
        self._telem_next += 1.0 / TELEMETRY_HZ
        st = self.world.state
        idx, attempt = (self.queue[0] if self.phase == "drawing" and self.queue
                        else (-1, 0))
        prog = 0.0
        if self.phase == "drawing" and self.tracker is not None \
                and self.last_pose is not None:
            prog, _, _, _ = self.tracker.progress(self.last_pose.x,
                                                  self.last_pose.z)
        sample = TelemetrySample(
            time=float(st.time), phase=self.phase,
            x=float(st.pos[0]), y=float(st.pos[1]), z=float(st.pos[2]),
            yaw=float(st.yaw), paint_g=float(st.paint_g),
            battery=float(st.battery), path_index=idx, attempt=attempt,
            progress_s=float(prog), spray=bool(st.valve_open),
            link_stale=bool(self.link_stale),
            pose_ok=self.last_pose is not None,
        )
        self.telemetry.append(sample)
        for cb in list(self.on_telemetry):
            cb(sample)

    # -- tick loop -----------------------------------------------------------

    def step(self) -> bool:
        """One mission tick; returns False when there is nothing to run."""
        self._apply_commands()
        if not self.active:
            return False
        self._check_guards()

        pose = self._sense_and_fuse()
        self.last_pose = pose

        if self.phase == "drawing":
            cmd = control_step(self.tracker, pose, self.dt)
        else:
            cmd = self._goto.step(pose)

        self.world.command_valve(bool(cmd.spray) and self.phase == "drawing")
        self.world.step(cmd.velocity, cmd.yaw_rate, self.dt)
        self._emit_spray_events()
        self._drain_watch()

        if cmd.done:
            if self.phase == "takeoff":
                nxt = self.queue[0][0]
                self._goto = GotoController(
                    target=self._path_start_target(nxt))
                self._transition("goto")
            elif self.phase in ("goto", "travel"):
                self._enter_drawing()
            elif self.phase == "drawing":
                self._finish_path()
            elif self.phase == "landing":
                st = self.world.state
                self.checkpoint = Checkpoint(
                    plan_hash=self._plan_hash,
                    last_completed_index=self.last_completed,
                    position=(float(st.pos[0]), float(st.pos[1]),
                              float(st.pos[2])),
                    timestamp=float(st.time),
                )
                if self.checkpoint_path:
                    save_checkpoint(self.checkpoint, self.checkpoint_path)
                self._transition("landed")
                self._emit("info", "mission_landed",
                           f"{self.last_completed + 1} paths completed")

        self._telemetry_due()
        self._phase_tick += 1
        return True

    def run(self, max_t: float = 600.0) -> None:
        """Drive ticks until the mission ends or sim time runs out."""
        self._apply_commands()
        while self.active:
            if self.world.state.time >= max_t:
                self._emit("warning", "mission_timeout",
                           f"giving up after {max_t:.0f} s of sim time")
                self._cmd_abort()
                return
            self.step()
