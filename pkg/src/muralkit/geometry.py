"""Planar curve primitives on the wall plane.

Wall frame convention used throughout the package: x is lateral along the
wall (m), z is height above the ground (m), y is the perpendicular distance
from the wall, positive away from it (m). Yaw is the rotation about the
vertical axis with 0 = facing the wall. The frame is right-handed. Curves
live in the wall plane and carry (x, z) coordinates only; the y axis is
regulated separately by the controller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DegenerateGeometry, NotAdjacent

Point = tuple[float, float]

# Endpoints closer than this count as adjacent when joining chains.
JOIN_TOL = 1e-6
# Required segment-to-segment continuity inside a chain.
CHAIN_TOL = 1e-9


class WallFrame:
    """Marker for the coordinate convention documented in the module docstring."""


def _pt(p: Sequence[float]) -> Point:
    x, z = float(p[0]), float(p[1])
    if not (math.isfinite(x) and math.isfinite(z)):
        raise DegenerateGeometry(f"non-finite point {p!r}")
    return (x, z)


def _dist(a: Point, b: Point) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def _norm(v: Point) -> float:
    return math.hypot(v[0], v[1])


@dataclass(frozen=True)
class CurveSegment:
    """A line or a cubic Bezier on the wall plane.

    points holds 2 endpoints for a line and 4 control points for a cubic.
    A segment with all points coincident carries no direction and is
    rejected at construction.
    """

    kind: str
    points: tuple[Point, ...]

    def __post_init__(self) -> None:
        if self.kind not in ("line", "cubic"):
            raise ValueError(f"unknown segment kind {self.kind!r}")
        want = 2 if self.kind == "line" else 4
        if len(self.points) != want:
            raise ValueError(f"{self.kind} segment needs {want} points")
        pts = tuple(_pt(p) for p in self.points)
        object.__setattr__(self, "points", pts)
        if all(_dist(p, pts[0]) < 1e-12 for p in pts[1:]):
            raise DegenerateGeometry("all control points coincide")

    @classmethod
    def line(cls, a: Sequence[float], b: Sequence[float]) -> "CurveSegment":
        return cls("line", (tuple(a), tuple(b)))

    @classmethod
    def cubic(cls, p0, p1, p2, p3) -> "CurveSegment":
        return cls("cubic", (tuple(p0), tuple(p1), tuple(p2), tuple(p3)))

    @property
    def start(self) -> Point:
        return self.points[0]

    @property
    def end(self) -> Point:
        return self.points[-1]

    def point_at(self, t: float) -> Point:
        if self.kind == "line":
            (x0, z0), (x1, z1) = self.points
            return (x0 + t * (x1 - x0), z0 + t * (z1 - z0))
        p0, p1, p2, p3 = self.points
        mt = 1.0 - t
        a = mt * mt * mt
        b = 3.0 * mt * mt * t
        c = 3.0 * mt * t * t
        d = t * t * t
        return (
            a * p0[0] + b * p1[0] + c * p2[0] + d * p3[0],
            a * p0[1] + b * p1[1] + c * p2[1] + d * p3[1],
        )

    def start_tangent(self) -> Point:
        """Unit tangent at the start, from the control polygon.

        For a cubic this is P1-P0, falling back to the next distinct
        control point when control points coincide.
        """
        p0 = self.points[0]
        for p in self.points[1:]:
            v = (p[0] - p0[0], p[1] - p0[1])
            n = _norm(v)
            if n > 1e-12:
                return (v[0] / n, v[1] / n)
        raise DegenerateGeometry("segment has no direction")

    def end_tangent(self) -> Point:
        pn = self.points[-1]
        for p in reversed(self.points[:-1]):
            v = (pn[0] - p[0], pn[1] - p[1])
            n = _norm(v)
            if n > 1e-12:
                return (v[0] / n, v[1] / n)
        raise DegenerateGeometry("segment has no direction")

    def reversed(self) -> "CurveSegment":
        return CurveSegment(self.kind, tuple(reversed(self.points)))

    def affine(self, fn: Callable[[Point], Point]) -> "CurveSegment":
        """Apply an affine map to the control points (exact for affine maps)."""
        return CurveSegment(self.kind, tuple(fn(p) for p in self.points))

    def split(self, t: float) -> tuple["CurveSegment", "CurveSegment"]:
        """de Casteljau split at parameter t."""
        if self.kind == "line":
            m = self.point_at(t)
            return CurveSegment.line(self.start, m), CurveSegment.line(m, self.end)
        a, b = _split_ctrl(self.points, t)
        return CurveSegment("cubic", a), CurveSegment("cubic", b)

    def arc_length(self, rel_tol: float = 1e-8) -> float:
        """Arc length via adaptive subdivision.

        Uses the classic bound chord <= length <= control polygon and the
        (2*chord + polygon)/3 estimate once both agree.
        """
        if self.kind == "line":
            return _dist(self.start, self.end)
        scale = max(_poly_len(self.points), 1e-12)
        return _cubic_length(self.points, rel_tol * scale, 0)

    def flatten(self, tol: float) -> list[tuple[float, Point]]:
        """Breakpoints (t, point) such that each piece deviates < tol from its chord."""
        if self.kind == "line":
            return [(0.0, self.start), (1.0, self.end)]
        out: list[tuple[float, Point]] = [(0.0, self.start)]
        _flatten_cubic(self.points, 0.0, 1.0, tol, out, 0)
        return out


# Numeric kernels below work on bare control-point tuples: the adaptive
# recursions visit many sub-spans, some of them legitimately collapsed
# (cusps), and must not pay for or trip over dataclass validation.


def _split_ctrl(pts, t):
    (x0, z0), (x1, z1), (x2, z2), (x3, z3) = pts
    ax, az = x0 + t * (x1 - x0), z0 + t * (z1 - z0)
    bx, bz = x1 + t * (x2 - x1), z1 + t * (z2 - z1)
    cx, cz = x2 + t * (x3 - x2), z2 + t * (z3 - z2)
    dx, dz = ax + t * (bx - ax), az + t * (bz - az)
    ex, ez = bx + t * (cx - bx), bz + t * (cz - bz)
    fx, fz = dx + t * (ex - dx), dz + t * (ez - dz)
    left = ((x0, z0), (ax, az), (dx, dz), (fx, fz))
    right = ((fx, fz), (ex, ez), (cx, cz), (x3, z3))
    return left, right


def _poly_len(pts) -> float:
    return sum(_dist(a, b) for a, b in zip(pts, pts[1:]))


def _cubic_length(pts, tol: float, depth: int) -> float:
    chord = _dist(pts[0], pts[3])
    poly = _poly_len(pts)
    if poly - chord < tol or depth > 40:
        return (2.0 * chord + poly) / 3.0
    a, b = _split_ctrl(pts, 0.5)
    return _cubic_length(a, tol / 2.0, depth + 1) + _cubic_length(b, tol / 2.0, depth + 1)


def _flat_enough(pts, tol: float) -> bool:
    # Max control-point deviation from the chord < tol.
    (x0, z0) = pts[0]
    (x1, z1) = pts[-1]
    dx, dz = x1 - x0, z1 - z0
    n = math.hypot(dx, dz)
    if n < 1e-12:
        return all(_dist(p, pts[0]) < tol for p in pts)
    worst = 0.0
    for p in pts[1:-1]:
        d = abs((p[0] - x0) * dz - (p[1] - z0) * dx) / n
        along = ((p[0] - x0) * dx + (p[1] - z0) * dz) / n
        if along < 0:
            d = max(d, _dist(p, (x0, z0)))
        elif along > n:
            d = max(d, _dist(p, (x1, z1)))
        worst = max(worst, d)
    return worst < tol


def _flatten_cubic(pts, t0, t1, tol, out, depth) -> None:
    if _flat_enough(pts, tol) or depth > 30:
        out.append((t1, pts[-1]))
        return
    a, b = _split_ctrl(pts, 0.5)
    tm = 0.5 * (t0 + t1)
    _flatten_cubic(a, t0, tm, tol, out, depth + 1)
    _flatten_cubic(b, tm, t1, tol, out, depth + 1)


@dataclass(frozen=True)
class PathChain:
    """Contiguous sequence of segments: each one starts where the previous ended."""

    segments: tuple[CurveSegment, ...]

    def __post_init__(self) -> None:
        segs = tuple(self.segments)
        if not segs:
            raise DegenerateGeometry("empty chain")
        for a, b in zip(segs, segs[1:]):
            if _dist(a.end, b.start) > CHAIN_TOL:
                raise DegenerateGeometry(
                    f"discontinuous chain: {a.end} -> {b.start}"
                )
        object.__setattr__(self, "segments", segs)

    @classmethod
    def from_points(cls, pts: Sequence[Sequence[float]]) -> "PathChain":
        """Polyline chain through the given points, skipping zero-length runs."""
        segs = []
        prev = tuple(pts[0])
        for p in pts[1:]:
            p = tuple(p)
            if _dist(prev, p) > 1e-12:
                segs.append(CurveSegment.line(prev, p))
                prev = p
        if not segs:
            raise DegenerateGeometry("polyline has no extent")
        return cls(tuple(segs))

    @property
    def start(self) -> Point:
        return self.segments[0].start

    @property
    def end(self) -> Point:
        return self.segments[-1].end

    def arc_length(self) -> float:
        return sum(s.arc_length() for s in self.segments)

    def is_closed(self, tol: float = JOIN_TOL) -> bool:
        return _dist(self.start, self.end) <= tol

    def start_tangent(self) -> Point:
        return self.segments[0].start_tangent()

    def end_tangent(self) -> Point:
        return self.segments[-1].end_tangent()

    def reversed(self) -> "PathChain":
        return PathChain(tuple(s.reversed() for s in reversed(self.segments)))

    def affine(self, fn: Callable[[Point], Point]) -> "PathChain":
        return PathChain(tuple(s.affine(fn) for s in self.segments))

    def bounds(self) -> tuple[float, float, float, float]:
        """Control-point bounding box (x_min, z_min, x_max, z_max).

        Conservative for cubics: the curve lies inside the control hull.
        """
        xs = [p[0] for s in self.segments for p in s.points]
        zs = [p[1] for s in self.segments for p in s.points]
        return (min(xs), min(zs), max(xs), max(zs))


def concat_chains(chains: Iterable[PathChain]) -> PathChain:
    """Join chains whose endpoints already meet (within JOIN_TOL), snapping joints."""
    segs: list[CurveSegment] = []
    for ch in chains:
        for seg in ch.segments:
            if segs and _dist(segs[-1].end, seg.start) > CHAIN_TOL:
                if _dist(segs[-1].end, seg.start) > JOIN_TOL:
                    raise NotAdjacent("chains do not meet")
                seg = snap_start(seg, segs[-1].end)
            segs.append(seg)
    return PathChain(tuple(segs))


def snap_start(seg: CurveSegment, new_start: Point) -> CurveSegment:
    return CurveSegment(seg.kind, (new_start,) + seg.points[1:])


class _ArcTable:
    """Arc-length parameterization of a chain from a flatness-driven subdivision."""

    def __init__(self, chain: PathChain, tol: float):
        seg_idx: list[int] = []
        ts: list[float] = []
        pts: list[Point] = []
        for i, seg in enumerate(chain.segments):
            for t, p in seg.flatten(tol):
                seg_idx.append(i)
                ts.append(t)
                pts.append(p)
        self.chain = chain
        self.seg_idx = np.array(seg_idx)
        self.ts = np.array(ts)
        self.pts = np.array(pts)
        chords = np.linalg.norm(np.diff(self.pts, axis=0), axis=1)
        self.s = np.concatenate([[0.0], np.cumsum(chords)])
        self.length = float(self.s[-1])

    def point_at_s(self, s: float) -> Point:
        s = min(max(s, 0.0), self.length)
        k = int(np.searchsorted(self.s, s, side="right")) - 1
        k = min(max(k, 0), len(self.s) - 2)
        # Skip zero-length spans at segment joints.
        while self.s[k + 1] - self.s[k] <= 0 and k + 2 < len(self.s):
            k += 1
        span = self.s[k + 1] - self.s[k]
        frac = 0.0 if span <= 0 else (s - self.s[k]) / span
        i0, i1 = self.seg_idx[k], self.seg_idx[k + 1]
        if i0 != i1:
            # Breakpoints at a joint share a position; either endpoint works.
            return tuple(self.pts[k + 1] if frac >= 0.5 else self.pts[k])
        t = self.ts[k] + frac * (self.ts[k + 1] - self.ts[k])
        return self.chain.segments[i0].point_at(t)


def sample_path(chain: PathChain, spacing: float) -> np.ndarray:
    """Sample the chain at arc-length steps <= spacing; shape (N, 2).

    First and last samples are the chain endpoints exactly; samples lie on
    the curve itself so chord sums converge to the true arc length from below.
    """
    if spacing <= 0:
        raise ValueError("spacing must be > 0")
    table = _ArcTable(chain, tol=spacing / 4.0)
    if table.length <= 0:
        raise DegenerateGeometry("chain has no length")
    n = max(1, int(math.ceil(table.length / spacing)))
    for _ in range(64):
        s_targets = np.linspace(0.0, table.length, n + 1)
        pts = np.array([table.point_at_s(s) for s in s_targets])
        pts[0] = chain.start
        pts[-1] = chain.end
        gaps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        if gaps.max() <= spacing * (1.0 + 1e-12):
            return pts
        n += max(1, n // 256)
    return pts


def arc_length(seg: CurveSegment) -> float:
    """Arc length of a single segment, within 1e-6 relative."""
    return seg.arc_length(rel_tol=1e-9)


def end_tangent_angle(a: PathChain, b: PathChain) -> float:
    """Angle in [0, pi] between a's terminal tangent and b's initial tangent.

    Requires a to end where b starts (within JOIN_TOL).
    """
    if _dist(a.end, b.start) > JOIN_TOL:
        raise NotAdjacent(f"chain endpoints {a.end} and {b.start} not adjacent")
    ta = a.end_tangent()
    tb = b.start_tangent()
    dot = max(-1.0, min(1.0, ta[0] * tb[0] + ta[1] * tb[1]))
    return math.acos(dot)
