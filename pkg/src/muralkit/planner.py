"""Mission planning: turn tagged chains into an ordered, flyable plan.

Stroke chains are split at sharp corners and merged across smooth
adjacencies, short leftovers pruned, and every surviving chain gets
straight lead-in/lead-out extensions so the drone can reach drawing
speed before paint hits the wall. Filled contours become horizontal
scanline strokes. Paths are then greedily ordered by a rank of travel
distance plus a signed height weight.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateGeometry, EmptyPlan, OpenContour
from .geometry import (
    JOIN_TOL,
    CurveSegment,
    PathChain,
    Point,
    concat_chains,
    sample_path,
)
from .svg import SvgPathSet

log = logging.getLogger(__name__)

PLAN_VERSION = 1
PLAN_SUFFIX = ".mplan.json"


@dataclass(frozen=True)
class PlanParams:
    join_angle_max: float = math.radians(30.0)  # rad
    min_path_len: float = 0.04  # m
    extension_len: float = 0.30  # m
    infill_spacing: float = 0.12  # m
    infill_min_gap: float = 0.005  # m
    rank_z_weight: float = -1.0
    target_speed: float = 0.5  # m/s
    color: int = 1

    def __post_init__(self) -> None:
        if not 0.0 < self.join_angle_max < math.pi:
            raise ValueError("join_angle_max must be in (0, pi)")
        for name in ("min_path_len", "infill_spacing", "infill_min_gap", "target_speed"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.extension_len < 0:
            raise ValueError("extension_len must be >= 0")


@dataclass(frozen=True)
class DrawPath:
    """One drawable path: extensions, spray window, and ordering metadata."""

    chain: PathChain
    lead_in: CurveSegment | None
    lead_out: CurveSegment | None
    spray_window: tuple[float, float]  # (s_on, s_off) on the extended path, m
    color: int = 1
    index: int = -1
    source: str = "stroke"  # stroke | infill | eraser
    was_reversed: bool = False

    def extended_chain(self) -> PathChain:
        segs: tuple[CurveSegment, ...] = ()
        if self.lead_in is not None:
            segs += (self.lead_in,)
        segs += self.chain.segments
        if self.lead_out is not None:
            segs += (self.lead_out,)
        return PathChain(segs)

    def extended_length(self) -> float:
        return self.extended_chain().arc_length()

    @property
    def start(self) -> Point:
        return self.lead_in.start if self.lead_in is not None else self.chain.start

    @property
    def end(self) -> Point:
        return self.lead_out.end if self.lead_out is not None else self.chain.end

    def reversed(self) -> "DrawPath":
        total = self.extended_length()
        s_on, s_off = self.spray_window
        return replace(
            self,
            chain=self.chain.reversed(),
            lead_in=self.lead_out.reversed() if self.lead_out is not None else None,
            lead_out=self.lead_in.reversed() if self.lead_in is not None else None,
            spray_window=(total - s_off, total - s_on),
            was_reversed=not self.was_reversed,
        )


@dataclass
class MissionPlan:
    draw_paths: list[DrawPath]
    params: PlanParams

    def travels(self) -> list[tuple[Point, Point]]:
        """Straight repositioning moves between consecutive paths."""
        out = []
        for a, b in zip(self.draw_paths, self.draw_paths[1:]):
            out.append((a.end, b.start))
        return out


def _tangent_gap(t_out: Point, t_in: Point) -> float:
    dot = max(-1.0, min(1.0, t_out[0] * t_in[0] + t_out[1] * t_in[1]))
    return math.acos(dot)


def _close(a: Point, b: Point) -> bool:
    return math.hypot(a[0] - b[0], a[1] - b[1]) <= JOIN_TOL


def _neg(t: Point) -> Point:
    return (-t[0], -t[1])


def _try_merge(a: PathChain, b: PathChain, max_gap: float) -> PathChain | None:
    """Merge b onto a if some endpoint pairing is adjacent and smooth enough.

    Pairings are tried in a fixed order so results are deterministic when
    several endpoints coincide. Closed chains never merge.
    """
    if a.is_closed() or b.is_closed():
        return None
    if _close(a.end, b.start) and _tangent_gap(a.end_tangent(), b.start_tangent()) <= max_gap:
        return concat_chains([a, b])
    if _close(a.end, b.end) and _tangent_gap(a.end_tangent(), _neg(b.end_tangent())) <= max_gap:
        return concat_chains([a, b.reversed()])
    if _close(a.start, b.start) and _tangent_gap(_neg(b.start_tangent()), a.start_tangent()) <= max_gap:
        return concat_chains([b.reversed(), a])
    if _close(a.start, b.end) and _tangent_gap(b.end_tangent(), a.start_tangent()) <= max_gap:
        return concat_chains([b, a])
    return None


def join_or_split(paths: list[PathChain], join_angle_max: float) -> list[PathChain]:
    """Split chains at sharp interior corners, then merge smooth adjacencies.

    A closed chain with sharp corners opens into pieces; the wrap-around
    joint participates through the merge phase like any other adjacency.
    """
    pieces: list[PathChain] = []
    for ch in paths:
        run: list[CurveSegment] = [ch.segments[0]]
        for seg in ch.segments[1:]:
            if _tangent_gap(run[-1].end_tangent(), seg.start_tangent()) > join_angle_max:
                pieces.append(PathChain(tuple(run)))
                run = [seg]
            else:
                run.append(seg)
        pieces.append(PathChain(tuple(run)))

    merged = True
    while merged:
        merged = False
        for i in range(len(pieces)):
            for j in range(len(pieces)):
                if i == j:
                    continue
                combo = _try_merge(pieces[i], pieces[j], join_angle_max)
                if combo is not None:
                    pieces[i] = combo
                    del pieces[j]
                    merged = True
                    break
            if merged:
                break
    return pieces


def prune_short(paths: list[PathChain], min_path_len: float) -> list[PathChain]:
    """Drop whole chains shorter than min_path_len."""
    kept = [ch for ch in paths if ch.arc_length() >= min_path_len]
    dropped = len(paths) - len(kept)
    if dropped:
        log.info("pruned %d short chain(s)", dropped)
    return kept


def extend_path(chain: PathChain, extension_len: float,
                color: int = 1, source: str = "stroke") -> DrawPath:
    """Attach straight, tangent-aligned lead-in/lead-out extensions."""
    if extension_len < 0:
        raise ValueError("extension_len must be >= 0")
    length = chain.arc_length()
    if length <= 0:
        raise DegenerateGeometry("cannot extend a zero-length chain")
    lead_in = lead_out = None
    if extension_len > 0:
        tx, tz = chain.start_tangent()
        sx, sz = chain.start
        lead_in = CurveSegment.line(
            (sx - extension_len * tx, sz - extension_len * tz), (sx, sz)
        )
        tx, tz = chain.end_tangent()
        ex, ez = chain.end
        lead_out = CurveSegment.line(
            (ex, ez), (ex + extension_len * tx, ez + extension_len * tz)
        )
    return DrawPath(
        chain=chain,
        lead_in=lead_in,
        lead_out=lead_out,
        spray_window=(extension_len, extension_len + length),
        color=color,
        source=source,
    )


def _contour_edges(contours: list[PathChain], sample_spacing: float) -> np.ndarray:
    """Sampled edges of all contours as an array of (x1, z1, x2, z2) rows."""
    rows = []
    for ch in contours:
        if not ch.is_closed():
            raise OpenContour(f"infill contour must be closed, gap at {ch.end}")
        pts = sample_path(ch, sample_spacing)
        # Explicit closing edge; zero-length when the chain closes exactly.
        pts = np.vstack([pts, pts[:1]])
        rows.append(np.hstack([pts[:-1], pts[1:]]))
    return np.vstack(rows)


def generate_infill(contours: list[PathChain], spacing: float,
                    min_gap: float) -> list[PathChain]:
    """Horizontal scanline strokes filling the contours, even-odd rule.

    Scanlines sit at z = z_min + spacing/2 + k*spacing inside the joint
    bounding box and alternate direction (even k rightward, odd leftward).
    Crossing pairs closer than min_gap are dropped together, which both
    removes slivers and heals tangency double-counts without breaking
    parity.
    """
    if spacing <= 0:
        raise ValueError("spacing must be > 0")
    if not contours:
        return []
    edges = _contour_edges(contours, spacing / 10.0)
    x1, z1, x2, z2 = edges[:, 0], edges[:, 1], edges[:, 2], edges[:, 3]
    z_min = float(np.minimum(z1, z2).min())
    z_max = float(np.maximum(z1, z2).max())

    out: list[PathChain] = []
    k = 0
    while True:
        z = z_min + spacing / 2.0 + k * spacing
        if z >= z_max:
            break
        # Half-open crossing rule: a vertex exactly on the scanline counts
        # for exactly one of its two edges.
        hit = ((z1 <= z) & (z < z2)) | ((z2 <= z) & (z < z1))
        if hit.any():
            denom = z2[hit] - z1[hit]
            xs = np.sort(x1[hit] + (z - z1[hit]) * (x2[hit] - x1[hit]) / denom)
            xs = _drop_close_pairs(list(xs), min_gap)
            if len(xs) % 2:
                # Grazing contact can leave an unmatched crossing; the
                # span it would open is unbounded, so discard it.
                xs = xs[:-1]
            spans = [(xs[i], xs[i + 1]) for i in range(0, len(xs), 2)]
            spans = [s for s in spans if s[1] - s[0] > 1e-12]
            if k % 2:
                spans = [(b, a) for a, b in reversed(spans)]
            for a, b in spans:
                out.append(PathChain((CurveSegment.line((a, z), (b, z)),)))
        k += 1
    return out


def _drop_close_pairs(xs: list[float], min_gap: float) -> list[float]:
    i = 0
    while i + 1 < len(xs):
        if xs[i + 1] - xs[i] < min_gap:
            del xs[i : i + 2]
            i = max(0, i - 1)
        else:
            i += 1
    return xs


def sort_paths(paths: list[DrawPath], rank_z_weight: float) -> list[DrawPath]:
    """Greedy ordering over both endpoints of every path.

    rank = distance from the previous exit point + rank_z_weight * (z of
    the candidate entry + z of its far end). The first path is the one
    whose endpoint lies nearest the bottom center of the drawing bounding
    box. Picking a path by its geometric end reverses it. Ties go to the
    lower original index, entry-at-start before entry-at-end.
    """
    if not paths:
        raise EmptyPlan("no paths to sort")

    boxes = [p.chain.bounds() for p in paths]
    x_mid = (min(b[0] for b in boxes) + max(b[2] for b in boxes)) / 2.0
    z_bot = min(b[1] for b in boxes)
    ref: Point = (x_mid, z_bot)

    remaining = list(range(len(paths)))
    ordered: list[DrawPath] = []
    first = True
    for _ in range(len(paths)):
        best: tuple[float, int, int] | None = None  # (score, list position, entry_end)
        for pos, pi in enumerate(remaining):
            p = paths[pi]
            for entry_end, (entry, other) in enumerate(
                ((p.start, p.end), (p.end, p.start))
            ):
                dist = math.hypot(entry[0] - ref[0], entry[1] - ref[1])
                if first:
                    score = dist
                else:
                    score = dist + rank_z_weight * (entry[1] + other[1])
                key = (score, pos, entry_end)
                if best is None or key < best:
                    best = key
        _, pos, entry_end = best
        chosen = paths[remaining.pop(pos)]
        if entry_end == 1:
            chosen = chosen.reversed()
        ordered.append(chosen)
        ref = chosen.end
        first = False
    return [replace(p, index=i) for i, p in enumerate(ordered)]


def compile_mission(pset: SvgPathSet, params: PlanParams) -> MissionPlan:
    """Full pipeline: split/merge, prune, infill, extend, order, index."""
    strokes = [p.chain for p in pset.paths if p.mode == "stroke"]
    fills = [p.chain for p in pset.paths if p.mode == "fill"]

    chains: list[tuple[PathChain, str]] = []
    worked = join_or_split(strokes, params.join_angle_max)
    worked = prune_short(worked, params.min_path_len)
    chains.extend((ch, "stroke") for ch in worked)
    if fills:
        infill = generate_infill(fills, params.infill_spacing, params.infill_min_gap)
        chains.extend((ch, "infill") for ch in infill)

    if not chains:
        raise EmptyPlan("no drawable paths after planning")
    draw_paths = [
        extend_path(ch, params.extension_len, color=params.color, source=src)
        for ch, src in chains
    ]
    return MissionPlan(sort_paths(draw_paths, params.rank_z_weight), params)


# Plan file format: versioned JSON, canonical byte encoding so the file
# digest doubles as the plan identity for checkpoints.


def _segment_to_json(seg: CurveSegment) -> dict:
    return {"kind": seg.kind, "points": [list(p) for p in seg.points]}


def _segment_from_json(obj: dict) -> CurveSegment:
    return CurveSegment(obj["kind"], tuple(tuple(p) for p in obj["points"]))


def plan_to_json(plan: MissionPlan) -> dict:
    return {
        "version": PLAN_VERSION,
        "params": {
            "join_angle_max": plan.params.join_angle_max,
            "min_path_len": plan.params.min_path_len,
            "extension_len": plan.params.extension_len,
            "infill_spacing": plan.params.infill_spacing,
            "infill_min_gap": plan.params.infill_min_gap,
            "rank_z_weight": plan.params.rank_z_weight,
            "target_speed": plan.params.target_speed,
            "color": plan.params.color,
        },
        "paths": [
            {
                "index": p.index,
                "color": p.color,
                "source": p.source,
                "reversed": p.was_reversed,
                "lead_in": _segment_to_json(p.lead_in) if p.lead_in else None,
                "segments": [_segment_to_json(s) for s in p.chain.segments],
                "lead_out": _segment_to_json(p.lead_out) if p.lead_out else None,
                "spray_window": list(p.spray_window),
            }
            for p in plan.draw_paths
        ],
    }


def plan_from_json(doc: dict) -> MissionPlan:
    if doc.get("version") != PLAN_VERSION:
        raise ValueError(f"unsupported plan version {doc.get('version')!r}")
    params = PlanParams(**doc["params"])
    paths = []
    for entry in doc["paths"]:
        paths.append(
            DrawPath(
                chain=PathChain(tuple(_segment_from_json(s) for s in entry["segments"])),
                lead_in=_segment_from_json(entry["lead_in"]) if entry["lead_in"] else None,
                lead_out=_segment_from_json(entry["lead_out"]) if entry["lead_out"] else None,
                spray_window=tuple(entry["spray_window"]),
                color=entry["color"],
                index=entry["index"],
                source=entry.get("source", "stroke"),
                was_reversed=entry.get("reversed", False),
            )
        )
    return MissionPlan(paths, params)


def plan_to_bytes(plan: MissionPlan) -> bytes:
    return json.dumps(plan_to_json(plan), sort_keys=True, separators=(",", ":")).encode()


def plan_from_bytes(data: bytes) -> MissionPlan:
    return plan_from_json(json.loads(data))


def plan_hash(plan: MissionPlan) -> str:
    return hashlib.sha256(plan_to_bytes(plan)).hexdigest()


def save_plan(plan: MissionPlan, path: str) -> str:
    """Write the canonical plan bytes; returns the content digest."""
    data = plan_to_bytes(plan)
    with open(path, "wb") as f:
        f.write(data)
    return hashlib.sha256(data).hexdigest()


def load_plan(path: str) -> MissionPlan:
    with open(path, "rb") as f:
        return plan_from_bytes(f.read())
