"""HTTP and WebSocket front end over the mission stack.

One service owns one wall, one plan, and at most one running mission.
Plans arrive as SVG (compiled against the configured wall) or as a
saved plan file. The UI drives everything through a small JSON API
plus a bidirectional `/stream` socket carrying versioned event and
telemetry messages; commands sent on the socket land in the same
serialized queue as HTTP commands.
"""

from __future__ import annotations

import asyncio
import json
import logging

from fastapi import FastAPI, HTTPException, Request, WebSocket, WebSocketDisconnect
from fastapi.responses import Response

from .config import AppConfig, load_config
from .errors import BadGeometry, BadSelection, MuralError, ParseError
from .geometry import CurveSegment, PathChain, sample_path
from .mission import MissionRunner, add_eraser_segments, select_paths
from .planner import (
    MissionPlan,
    PlanParams,
    compile_mission,
    plan_from_bytes,
    plan_hash,
)
from .simulation import SimWorld
from .svg import map_to_wall, parse_svg

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
_QUEUE_LIMIT = 512  # per-subscriber; slow consumers drop, never stall


class ServiceState:
    """Everything behind the API: world, plan, runner, subscribers."""

    def __init__(self, config: AppConfig, checkpoint_path: str | None = None,
                 speed: float = 0.0):
        self.config = config
        self.checkpoint_path = checkpoint_path
        self.speed = speed  # sim seconds per wall second; 0 = unthrottled
        self.plan: MissionPlan | None = None
        self.world = self._new_world()
        self.runner: MissionRunner | None = None
        self.task: asyncio.Task | None = None
        self.subscribers: set[asyncio.Queue] = set()

    def _new_world(self) -> SimWorld:
        c = self.config
        return SimWorld(c.wall_width, c.wall_height, c.camera, c.mount,
                        params=c.sim, seed=c.seed, start_pos=c.start_pos)

    def broadcast(self, msg: dict) -> None:
        for q in list(self.subscribers):
            try:
                q.put_nowait(msg)
            except asyncio.QueueFull:
                pass  # slow consumer: drop, the mission loop never waits

    def new_runner(self) -> MissionRunner:
        c = self.config
        runner = MissionRunner(self.plan, self.world, gains=c.gains,
                               link=c.link, guards=c.guards, seed=c.seed,
                               dt=c.dt, checkpoint_path=self.checkpoint_path)
        runner.events.subscribe(
            lambda ev: self.broadcast(
                {"v": SCHEMA_VERSION, "type": "event", **ev.to_json()}))
        runner.on_telemetry.append(
            lambda s: self.broadcast(
                {"v": SCHEMA_VERSION, "type": "telemetry", **s.to_json()}))
        self.runner = runner
        return runner

    async def mission_loop(self) -> None:
        runner = self.runner
        batch = max(1, round(0.1 / runner.dt))  # apply commands 10x per sim s
        try:
            while True:
                ran = False
                for _ in range(batch):
                    ran = runner.step()
                    if not ran:
                        break
                if not ran:
                    break
                if self.speed > 0:
                    await asyncio.sleep(batch * runner.dt / self.speed)
                else:
                    await asyncio.sleep(0)
        finally:
            self.broadcast({"v": SCHEMA_VERSION, "type": "state",
                            "phase": runner.phase})


def _chains_from_polylines(segments: list) -> list[PathChain]:
    chains = []
    for poly in segments:
        if not isinstance(poly, list) or len(poly) < 2:
            raise BadGeometry("each eraser segment needs at least 2 points")
        pts = [(float(p[0]), float(p[1])) for p in poly]
        segs = tuple(CurveSegment.line(a, b) for a, b in zip(pts, pts[1:]))
        chains.append(PathChain(segs))
    return chains


def _path_points(chain: PathChain, spacing: float = 0.02) -> list:
    return [[round(float(x), 4), round(float(z), 4)]
            for x, z in sample_path(chain, spacing)]


def plan_geometry(plan: MissionPlan, wall: tuple[float, float]) -> dict:
    """Everything a front end needs to draw the plan."""
    paths = []
    for p in plan.draw_paths:
        entry = {
            "index": p.index,
            "color": p.color,
            "source": p.source,
            "reversed": p.was_reversed,
            "length": round(p.chain.arc_length(), 4),
            "spray_window": [round(v, 4) for v in p.spray_window],
            "points": _path_points(p.chain),
        }
        entry["lead_in"] = _path_points(PathChain((p.lead_in,))) \
            if p.lead_in is not None else []
        entry["lead_out"] = _path_points(PathChain((p.lead_out,))) \
            if p.lead_out is not None else []
        paths.append(entry)
    travels = [{"from": [round(a[0], 4), round(a[1], 4)],
                "to": [round(b[0], 4), round(b[1], 4)]}
               for a, b in plan.travels()]
    return {
        "v": SCHEMA_VERSION,
        "hash": plan_hash(plan),
        "wall": {"width": wall[0], "height": wall[1]},
        "target_speed": plan.params.target_speed,
        "extension_len": plan.params.extension_len,
        "paths": paths,
        "travels": travels,
    }


def create_app(config: AppConfig | None = None,
               checkpoint_path: str | None = None,
               speed: float = 0.0) -> FastAPI:
    app = FastAPI(title="mural mission control")
    state = ServiceState(config or AppConfig(), checkpoint_path, speed)
    app.state.mural = state

    def _active() -> bool:
        return state.runner is not None and state.runner.active

    @app.post("/plan")
    async def post_plan(request: Request):
        if _active():
            raise HTTPException(409, "mission is running, land first")
        raw = await request.body()
        if not raw:
            raise HTTPException(400, "empty body")
        plan: MissionPlan | None = None
        head = raw.lstrip()[:1]
        if head == b"{":
            try:
                plan = plan_from_bytes(raw)
            except (ParseError, KeyError, ValueError) as exc:
                raise HTTPException(400, f"bad plan file: {exc}")
        else:
            try:
                pset = parse_svg(raw)
                q = request.query_params
                rect = (float(q.get("x0", 0.0)), float(q.get("z0", 0.0)),
                        float(q.get("w", state.config.wall_width)),
                        float(q.get("h", state.config.wall_height)))
                mapped = map_to_wall(pset, rect)
                plan = compile_mission(mapped, PlanParams())
            except MuralError as exc:
                raise HTTPException(400, f"bad svg: {exc}")
        state.plan = plan
        state.world = state._new_world()  # a new plan gets a clean wall
        state.new_runner()  # validates the plan profile up front
        geo = plan_geometry(plan, state.world.wall)
        state.broadcast({"v": SCHEMA_VERSION, "type": "state",
                         "phase": "idle", "plan_hash": geo["hash"]})
        return {"hash": geo["hash"], "paths": len(plan.draw_paths),
                "wall": geo["wall"]}

    @app.get("/plan")
    async def get_plan():
        if state.plan is None:
            raise HTTPException(404, "no plan loaded")
        return plan_geometry(state.plan, state.world.wall)

    @app.post("/mission/select")
    async def post_select(body: dict):
        if state.plan is None:
            raise HTTPException(409, "no plan loaded")
        if _active():
            raise HTTPException(409, "mission is running")
        try:
            if "span" in body:
                a, b = body["span"]
                picked = select_paths(state.plan, span=(int(a), int(b)))
            elif "ids" in body:
                picked = select_paths(state.plan,
                                      ids=[int(i) for i in body["ids"]])
            else:
                raise HTTPException(400, "body needs 'ids' or 'span'")
        except BadSelection as exc:
            raise HTTPException(400, str(exc))
        state.runner.selection = picked
        return {"selected": picked}

    @app.post("/mission/start")
    async def post_start(body: dict | None = None):
        if state.plan is None:
            raise HTTPException(409, "no plan loaded")
        if _active():
            raise HTTPException(409, "mission already running")
        body = body or {}
        prev = state.runner
        if prev is not None and prev.phase != "idle":
            # Fresh lifecycle on the same wall; carry the selection.
            selection = prev.selection
            cp = prev.checkpoint
            runner = state.new_runner()
            runner.selection = selection
            if body.get("resume"):
                if cp is None:
                    raise HTTPException(409, "nothing to resume from")
                runner.apply_checkpoint(cp)
        else:
            runner = state.runner or state.new_runner()
            if body.get("resume") and runner.checkpoint is not None:
                runner.apply_checkpoint(runner.checkpoint)
        runner.start()
        state.task = asyncio.create_task(state.mission_loop())
        return {"started": True, "selection": runner.selection}

    @app.post("/mission/land")
    async def post_land():
        if not _active():
            raise HTTPException(409, "no mission running")
        state.runner.land()
        return {"landing": True}

    @app.post("/mission/eraser")
    async def post_eraser(body: dict):
        if state.plan is None:
            raise HTTPException(409, "no plan loaded")
        segments = body.get("segments")
        if not segments:
            raise HTTPException(400, "body needs 'segments'")
        bg = int(body.get("bg_color", 0))
        try:
            chains = _chains_from_polylines(segments)
            # Validate geometry now so the caller gets a real error.
            add_eraser_segments(state.plan, chains, state.world.wall, bg)
        except (BadGeometry, ValueError, TypeError) as exc:
            raise HTTPException(400, f"bad eraser segment: {exc}")
        runner = state.runner or state.new_runner()
        runner.command("eraser", chains=chains, bg_color=bg)
        if not runner.active:
            runner.step()  # idle runner: apply the command now
        state.plan = runner.plan
        return {"appended": len(chains),
                "paths": len(runner.plan.draw_paths)}

    @app.get("/raster.png")
    async def get_raster():
        return Response(content=state.world.raster.to_png_bytes(),
                        media_type="image/png")

    @app.get("/checkpoint")
    async def get_checkpoint():
        if state.runner is None or state.runner.checkpoint is None:
            raise HTTPException(404, "no checkpoint yet")
        return state.runner.checkpoint.to_json()

    @app.get("/status")
    async def get_status():
        st = state.world.state
        r = state.runner
        return {
            "v": SCHEMA_VERSION,
            "phase": r.phase if r else "idle",
            "time": st.time,
            "plan_hash": plan_hash(state.plan) if state.plan else None,
            "selection": r.selection if r else [],
            "queued": len(r.queue) if r else 0,
            "last_completed_index": r.last_completed if r else -1,
            "pos": [st.pos[0], st.pos[1], st.pos[2]],
            "yaw": st.yaw,
            "paint_g": st.paint_g,
            "battery": st.battery,
            "link_stale": bool(r.link_stale) if r else False,
            "wall": {"width": state.world.wall[0],
                     "height": state.world.wall[1]},
        }

    @app.websocket("/stream")
    async def stream(ws: WebSocket):
        await ws.accept()
        q: asyncio.Queue = asyncio.Queue(maxsize=_QUEUE_LIMIT)
        state.subscribers.add(q)
        await ws.send_json({"v": SCHEMA_VERSION, "type": "hello",
                            "schema": SCHEMA_VERSION})

        async def pump():
            while True:
                await ws.send_json(await q.get())

        sender = asyncio.create_task(pump())
        try:
            while True:
                msg = await ws.receive_json()
                reply = _ws_command(state, msg)
                await ws.send_json(reply)
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            sender.cancel()
            state.subscribers.discard(q)

    return app


def _ws_command(state: ServiceState, msg: dict) -> dict:
    """Commands arriving on the socket; same queue as HTTP commands."""
    name = msg.get("name") if msg.get("type") == "command" else None
    ok, detail = False, "unknown command"
    if state.runner is None:
        detail = "no plan loaded"
    elif name == "land":
        if state.runner.active:
            state.runner.land()
            ok, detail = True, "landing requested"
        else:
            detail = "no mission running"
    elif name == "abort":
        state.runner.abort()
        if not state.runner.active:
            state.runner.step()
        ok, detail = True, "abort requested"
    return {"v": SCHEMA_VERSION, "type": "ack", "name": name,
            "ok": ok, "detail": detail}


def run_server(config_path: str | None = None, host: str = "127.0.0.1",
               port: int = 8000, checkpoint_path: str | None = None,
               speed: float = 0.0) -> None:  # pragma: no cover
    import uvicorn

    config = load_config(config_path)
    uvicorn.run(create_app(config, checkpoint_path, speed),
                host=host, port=port, log_level="info")
