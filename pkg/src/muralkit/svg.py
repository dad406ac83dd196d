"""SVG parsing into wall-frame path chains.

Supports the subset a plotter-style pipeline needs: path elements with
M/L/H/V/C/S/Q/T/A/Z commands (absolute and relative), basic shapes
(rect, line, polyline, polygon, circle, ellipse), group transforms, and
a fill/stroke draw-mode tag. Quadratics are degree-elevated to cubics
and arcs converted to cubic approximations so downstream geometry deals
with exactly two segment kinds.

Draw-mode rule: an element whose effective fill is set and not "none"
is tagged fill, everything else is tagged stroke. This intentionally
ignores the SVG default of filling paths black: artwork for line
drawing usually leaves fill unset.
"""

from __future__ import annotations

import logging
import math
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

from .errors import DegenerateGeometry, ParseError, UnsupportedFeature
from .geometry import JOIN_TOL, CurveSegment, PathChain, Point

log = logging.getLogger(__name__)

# Quarter-circle cubic tangent handle, minimax-optimal: peak radial
# deviation 1.96e-4 of radius for a 4-arc circle (the classic
# 4/3*(sqrt(2)-1) = 0.55228 handle peaks at 2.73e-4).
CIRCLE_KAPPA = 0.5519150244935106

_UNSUPPORTED = {
    "text", "tspan", "textPath", "image", "linearGradient", "radialGradient",
    "pattern", "clipPath", "mask", "filter", "style", "use", "symbol",
    "foreignObject", "switch",
}
_CONTAINERS = {"svg", "g", "defs", "a"}
_IGNORED = {"title", "desc", "metadata", "marker"}

_NUM_RE = re.compile(r"[+-]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?")
_FLOAT_STRIP_RE = re.compile(r"[a-zA-Z%]+$")

Matrix = tuple[float, float, float, float, float, float]  # SVG (a b c d e f)
_IDENTITY: Matrix = (1.0, 0.0, 0.0, 1.0, 0.0, 0.0)


@dataclass
class SvgPath:
    chain: PathChain
    mode: str  # "stroke" | "fill"
    source_id: str
    closed: bool = False


@dataclass
class SvgPathSet:
    paths: list[SvgPath]
    view_box: tuple[float, float, float, float]  # (min_x, min_y, w, h), user units
    warnings: list[str] = field(default_factory=list)


def _mat_mul(m: Matrix, n: Matrix) -> Matrix:
    a1, b1, c1, d1, e1, f1 = m
    a2, b2, c2, d2, e2, f2 = n
    return (
        a1 * a2 + c1 * b2,
        b1 * a2 + d1 * b2,
        a1 * c2 + c1 * d2,
        b1 * c2 + d1 * d2,
        a1 * e2 + c1 * f2 + e1,
        b1 * e2 + d1 * f2 + f1,
    )


def _mat_apply(m: Matrix, p: Point) -> Point:
    a, b, c, d, e, f = m
    return (a * p[0] + c * p[1] + e, b * p[0] + d * p[1] + f)


def _parse_transform(text: str) -> Matrix:
    m = _IDENTITY
    for name, args in re.findall(r"(\w+)\s*\(([^)]*)\)", text):
        vals = [float(v) for v in _NUM_RE.findall(args)]
        if name == "matrix" and len(vals) == 6:
            t = tuple(vals)
        elif name == "translate":
            tx = vals[0] if vals else 0.0
            ty = vals[1] if len(vals) > 1 else 0.0
            t = (1, 0, 0, 1, tx, ty)
        elif name == "scale":
            sx = vals[0] if vals else 1.0
            sy = vals[1] if len(vals) > 1 else sx
            t = (sx, 0, 0, sy, 0, 0)
        elif name == "rotate":
            ang = math.radians(vals[0]) if vals else 0.0
            ca, sa = math.cos(ang), math.sin(ang)
            t = (ca, sa, -sa, ca, 0, 0)
            if len(vals) == 3:
                cx, cy = vals[1], vals[2]
                t = _mat_mul(_mat_mul((1, 0, 0, 1, cx, cy), t), (1, 0, 0, 1, -cx, -cy))
        elif name == "skewX":
            t = (1, 0, math.tan(math.radians(vals[0])), 1, 0, 0)
        elif name == "skewY":
            t = (1, math.tan(math.radians(vals[0])), 0, 1, 0, 0)
        else:
            raise ParseError(f"bad transform {name}({args})")
        m = _mat_mul(m, t)
    return m


class _PathScanner:
    """Character-level scanner for path data; arc flags need single-char reads."""

    def __init__(self, d: str):
        self.d = d
        self.i = 0

    def _skip(self) -> None:
        d, n = self.d, len(self.d)
        while self.i < n and (d[self.i].isspace() or d[self.i] == ","):
            self.i += 1

    def at_end(self) -> bool:
        self._skip()
        return self.i >= len(self.d)

    def command(self) -> str | None:
        self._skip()
        if self.i < len(self.d) and self.d[self.i].isalpha():
            c = self.d[self.i]
            self.i += 1
            return c
        return None

    def has_number(self) -> bool:
        self._skip()
        return bool(_NUM_RE.match(self.d, self.i))

    def number(self) -> float:
        self._skip()
        m = _NUM_RE.match(self.d, self.i)
        if not m:
            raise ParseError(f"expected number at offset {self.i} in path data")
        self.i = m.end()
        return float(m.group())

    def flag(self) -> int:
        self._skip()
        if self.i < len(self.d) and self.d[self.i] in "01":
            v = int(self.d[self.i])
            self.i += 1
            return v
        raise ParseError(f"expected arc flag at offset {self.i} in path data")


def elevate_quadratic(p0: Point, qc: Point, p1: Point) -> tuple[Point, Point, Point, Point]:
    """Degree-elevate a quadratic to the equivalent cubic."""
    c1 = (p0[0] + 2.0 / 3.0 * (qc[0] - p0[0]), p0[1] + 2.0 / 3.0 * (qc[1] - p0[1]))
    c2 = (p1[0] + 2.0 / 3.0 * (qc[0] - p1[0]), p1[1] + 2.0 / 3.0 * (qc[1] - p1[1]))
    return (p0, c1, c2, p1)


def arc_to_cubics(
    p0: Point,
    rx: float,
    ry: float,
    rot_deg: float,
    large_arc: int,
    sweep: int,
    p1: Point,
) -> list[tuple[Point, Point, Point, Point]]:
    """Endpoint-parameterized elliptical arc to cubic pieces of <= pi/2 each."""
    rx, ry = abs(rx), abs(ry)
    if rx < 1e-12 or ry < 1e-12 or (abs(p0[0] - p1[0]) < 1e-15 and abs(p0[1] - p1[1]) < 1e-15):
        # Degenerate radii draw a straight line per the SVG arc rules.
        return []
    phi = math.radians(rot_deg)
    cp, sp = math.cos(phi), math.sin(phi)
    # Midpoint form: rotate the chord into the ellipse axes.
    hx = (p0[0] - p1[0]) / 2.0
    hy = (p0[1] - p1[1]) / 2.0
    x1p = cp * hx + sp * hy
    y1p = -sp * hx + cp * hy
    lam = (x1p / rx) ** 2 + (y1p / ry) ** 2
    if lam > 1.0:
        s = math.sqrt(lam)
        rx *= s
        ry *= s
    num = rx * rx * ry * ry - rx * rx * y1p * y1p - ry * ry * x1p * x1p
    den = rx * rx * y1p * y1p + ry * ry * x1p * x1p
    coef = math.sqrt(max(0.0, num / den))
    if large_arc == sweep:
        coef = -coef
    cxp = coef * rx * y1p / ry
    cyp = -coef * ry * x1p / rx
    cx = cp * cxp - sp * cyp + (p0[0] + p1[0]) / 2.0
    cy = sp * cxp + cp * cyp + (p0[1] + p1[1]) / 2.0

    def angle(ux: float, uy: float, vx: float, vy: float) -> float:
        dot = ux * vx + uy * vy
        n = math.hypot(ux, uy) * math.hypot(vx, vy)
        a = math.acos(max(-1.0, min(1.0, dot / n)))
        return -a if ux * vy - uy * vx < 0 else a

    th1 = angle(1, 0, (x1p - cxp) / rx, (y1p - cyp) / ry)
    dth = angle((x1p - cxp) / rx, (y1p - cyp) / ry, (-x1p - cxp) / rx, (-y1p - cyp) / ry)
    if sweep == 0 and dth > 0:
        dth -= 2 * math.pi
    elif sweep == 1 and dth < 0:
        dth += 2 * math.pi

    n_pieces = max(1, int(math.ceil(abs(dth) / (math.pi / 2.0) - 1e-12)))
    step = dth / n_pieces
    alpha = 4.0 / 3.0 * math.tan(step / 4.0)

    def eval_pt(th: float) -> Point:
        x = rx * math.cos(th)
        y = ry * math.sin(th)
        return (cp * x - sp * y + cx, sp * x + cp * y + cy)

    def eval_tan(th: float) -> Point:
        x = -rx * math.sin(th)
        y = ry * math.cos(th)
        return (cp * x - sp * y, sp * x + cp * y)

    out = []
    for k in range(n_pieces):
        ta = th1 + k * step
        tb = ta + step
        a_pt, b_pt = eval_pt(ta), eval_pt(tb)
        a_tan, b_tan = eval_tan(ta), eval_tan(tb)
        out.append(
            (
                a_pt,
                (a_pt[0] + alpha * a_tan[0], a_pt[1] + alpha * a_tan[1]),
                (b_pt[0] - alpha * b_tan[0], b_pt[1] - alpha * b_tan[1]),
                b_pt,
            )
        )
    # First/last endpoints are the exact input endpoints.
    out[0] = (p0, out[0][1], out[0][2], out[0][3])
    out[-1] = (out[-1][0], out[-1][1], out[-1][2], p1)
    return out


def ellipse_cubics(cx: float, cy: float, rx: float, ry: float) -> list[tuple[Point, Point, Point, Point]]:
    """Four-arc cubic ellipse using the minimax handle length."""
    kx, ky = CIRCLE_KAPPA * rx, CIRCLE_KAPPA * ry
    e, n, w, s = (cx + rx, cy), (cx, cy + ry), (cx - rx, cy), (cx, cy - ry)
    return [
        (e, (e[0], e[1] + ky), (n[0] + kx, n[1]), n),
        (n, (n[0] - kx, n[1]), (w[0], w[1] + ky), w),
        (w, (w[0], w[1] - ky), (s[0] - kx, s[1]), s),
        (s, (s[0] + kx, s[1]), (e[0], e[1] - ky), e),
    ]


class _ChainBuilder:
    """Accumulates raw segments for one subpath, dropping zero-extent pieces."""

    def __init__(self, ctm: Matrix, source_id: str, warnings: list[str]):
        self.ctm = ctm
        self.source_id = source_id
        self.warnings = warnings
        self.segments: list[CurveSegment] = []
        self.closed = False

    def _points_collapse(self, pts: tuple[Point, ...]) -> bool:
        p0 = pts[0]
        return all(math.hypot(p[0] - p0[0], p[1] - p0[1]) < 1e-12 for p in pts[1:])

    def add(self, kind: str, pts: tuple[Point, ...]) -> None:
        mapped = tuple(_mat_apply(self.ctm, p) for p in pts)
        if self._points_collapse(mapped):
            return
        try:
            self.segments.append(CurveSegment(kind, mapped))
        except DegenerateGeometry:
            self.warnings.append(f"{self.source_id}: dropped degenerate segment")

    def finish(self, mode: str, out: list[SvgPath]) -> None:
        if not self.segments:
            return
        try:
            chain = PathChain(tuple(self.segments))
        except DegenerateGeometry:
            self.warnings.append(f"{self.source_id}: dropped broken subpath")
            return
        closed = self.closed or chain.is_closed()
        if mode == "fill" and not closed:
            # Filled regions need a boundary; close with a straight segment.
            chain = PathChain(chain.segments + (CurveSegment.line(chain.end, chain.start),))
            closed = True
            self.warnings.append(f"{self.source_id}: auto-closed open fill contour")
        out.append(SvgPath(chain, mode, self.source_id, closed))


def _parse_path_data(d: str, ctm: Matrix, source_id: str, mode: str,
                     out: list[SvgPath], warnings: list[str]) -> None:
    sc = _PathScanner(d)
    builder: _ChainBuilder | None = None
    sub = 0
    cur: Point = (0.0, 0.0)
    start: Point = (0.0, 0.0)
    prev_cubic_ctrl: Point | None = None
    prev_quad_ctrl: Point | None = None

    def flush() -> None:
        nonlocal builder
        if builder is not None:
            builder.finish(mode, out)
            builder = None

    def ensure_builder() -> _ChainBuilder:
        nonlocal builder, sub
        if builder is None:
            sub += 1
            sid = source_id if sub == 1 else f"{source_id}#{sub}"
            builder = _ChainBuilder(ctm, sid, warnings)
        return builder

    cmd = None
    while not sc.at_end():
        c = sc.command()
        if c is not None:
            if cmd is None and c not in "Mm":
                raise ParseError("path data must start with a move command")
            cmd = c
        elif cmd is None:
            raise ParseError("path data must start with a move command")
        elif cmd in "Zz":
            raise ParseError("stray characters after close command")
        elif cmd in "Mm":
            # Extra coordinate pairs after a move are implicit line-tos.
            cmd = "L" if cmd == "M" else "l"
        rel = cmd.islower()
        op = cmd.upper()

        def pt() -> Point:
            x, y = sc.number(), sc.number()
            return (cur[0] + x, cur[1] + y) if rel else (x, y)

        if op == "M":
            flush()
            cur = pt()
            start = cur
            prev_cubic_ctrl = prev_quad_ctrl = None
        elif op == "L":
            p = pt()
            ensure_builder().add("line", (cur, p))
            cur = p
            prev_cubic_ctrl = prev_quad_ctrl = None
        elif op == "H":
            x = sc.number()
            p = (cur[0] + x if rel else x, cur[1])
            ensure_builder().add("line", (cur, p))
            cur = p
            prev_cubic_ctrl = prev_quad_ctrl = None
        elif op == "V":
            y = sc.number()
            p = (cur[0], cur[1] + y if rel else y)
            ensure_builder().add("line", (cur, p))
            cur = p
            prev_cubic_ctrl = prev_quad_ctrl = None
        elif op == "C":
            c1, c2, p = pt(), pt(), pt()
            ensure_builder().add("cubic", (cur, c1, c2, p))
            cur, prev_cubic_ctrl, prev_quad_ctrl = p, c2, None
        elif op == "S":
            c1 = (2 * cur[0] - prev_cubic_ctrl[0], 2 * cur[1] - prev_cubic_ctrl[1]) \
                if prev_cubic_ctrl else cur
            c2, p = pt(), pt()
            ensure_builder().add("cubic", (cur, c1, c2, p))
            cur, prev_cubic_ctrl, prev_quad_ctrl = p, c2, None
        elif op == "Q":
            qc, p = pt(), pt()
            ensure_builder().add("cubic", elevate_quadratic(cur, qc, p))
            cur, prev_quad_ctrl, prev_cubic_ctrl = p, qc, None
        elif op == "T":
            qc = (2 * cur[0] - prev_quad_ctrl[0], 2 * cur[1] - prev_quad_ctrl[1]) \
                if prev_quad_ctrl else cur
            p = pt()
            ensure_builder().add("cubic", elevate_quadratic(cur, qc, p))
            cur, prev_quad_ctrl, prev_cubic_ctrl = p, qc, None
        elif op == "A":
            rx, ry, rot = sc.number(), sc.number(), sc.number()
            laf, swf = sc.flag(), sc.flag()
            p = pt()
            pieces = arc_to_cubics(cur, rx, ry, rot, laf, swf, p)
            b = ensure_builder()
            if pieces:
                for cp in pieces:
                    b.add("cubic", cp)
            else:
                b.add("line", (cur, p))
            cur = p
            prev_cubic_ctrl = prev_quad_ctrl = None
        elif op == "Z":
            if builder is not None:
                if math.hypot(cur[0] - start[0], cur[1] - start[1]) > 1e-12:
                    builder.add("line", (cur, start))
                builder.closed = True
                flush()
            cur = start
            prev_cubic_ctrl = prev_quad_ctrl = None
        else:
            raise ParseError(f"unsupported path command {cmd!r}")
    flush()


def _get_float(el: ET.Element, name: str, default: float = 0.0) -> float:
    raw = el.get(name)
    if raw is None:
        return default
    return float(_FLOAT_STRIP_RE.sub("", raw.strip()))


def _effective_fill(el: ET.Element, inherited: str | None) -> str | None:
    fill = el.get("fill")
    style = el.get("style")
    if style:
        m = re.search(r"(?:^|;)\s*fill\s*:\s*([^;]+)", style)
        if m:
            fill = m.group(1).strip()
    return fill if fill is not None else inherited


def _local_tag(el: ET.Element) -> str:
    return el.tag.split("}")[-1]


def _points_attr(el: ET.Element) -> list[Point]:
    vals = [float(v) for v in _NUM_RE.findall(el.get("points", ""))]
    if len(vals) % 2:
        vals = vals[:-1]
    return [(vals[i], vals[i + 1]) for i in range(0, len(vals), 2)]


def _shape_to_paths(el: ET.Element, ctm: Matrix, mode: str, source_id: str,
                    out: list[SvgPath], warnings: list[str]) -> None:
    tag = _local_tag(el)
    b = _ChainBuilder(ctm, source_id, warnings)
    if tag == "rect":
        x, y = _get_float(el, "x"), _get_float(el, "y")
        w, h = _get_float(el, "width"), _get_float(el, "height")
        rx = _get_float(el, "rx", _get_float(el, "ry", 0.0))
        ry = _get_float(el, "ry", rx)
        rx = min(abs(rx), w / 2)
        ry = min(abs(ry), h / 2)
        if rx < 1e-12 or ry < 1e-12:
            pts = [(x, y), (x + w, y), (x + w, y + h), (x, y + h), (x, y)]
            for a, c in zip(pts, pts[1:]):
                b.add("line", (a, c))
        else:
            # Rounded rect: four straight edges joined by quarter ellipses.
            kx, ky = CIRCLE_KAPPA * rx, CIRCLE_KAPPA * ry
            b.add("line", ((x + rx, y), (x + w - rx, y)))
            b.add("cubic", ((x + w - rx, y), (x + w - rx + kx, y),
                            (x + w, y + ry - ky), (x + w, y + ry)))
            b.add("line", ((x + w, y + ry), (x + w, y + h - ry)))
            b.add("cubic", ((x + w, y + h - ry), (x + w, y + h - ry + ky),
                            (x + w - rx + kx, y + h), (x + w - rx, y + h)))
            b.add("line", ((x + w - rx, y + h), (x + rx, y + h)))
            b.add("cubic", ((x + rx, y + h), (x + rx - kx, y + h),
                            (x, y + h - ry + ky), (x, y + h - ry)))
            b.add("line", ((x, y + h - ry), (x, y + ry)))
            b.add("cubic", ((x, y + ry), (x, y + ry - ky),
                            (x + rx - kx, y), (x + rx, y)))
        b.closed = True
    elif tag == "line":
        b.add("line", ((_get_float(el, "x1"), _get_float(el, "y1")),
                       (_get_float(el, "x2"), _get_float(el, "y2"))))
    elif tag in ("polyline", "polygon"):
        pts = _points_attr(el)
        for a, c in zip(pts, pts[1:]):
            b.add("line", (a, c))
        if tag == "polygon" and len(pts) >= 3:
            b.add("line", (pts[-1], pts[0]))
            b.closed = True
    elif tag in ("circle", "ellipse"):
        cx, cy = _get_float(el, "cx"), _get_float(el, "cy")
        if tag == "circle":
            rx = ry = _get_float(el, "r")
        else:
            rx, ry = _get_float(el, "rx"), _get_float(el, "ry")
        if rx > 0 and ry > 0:
            for cp in ellipse_cubics(cx, cy, rx, ry):
                b.add("cubic", cp)
            b.closed = True
    b.finish(mode, out)


def _walk(el: ET.Element, ctm: Matrix, fill: str | None, counter: list[int],
          out: list[SvgPath], warnings: list[str]) -> None:
    tag = _local_tag(el)
    if tag in _UNSUPPORTED:
        raise UnsupportedFeature(f"unsupported SVG element <{tag}>")
    if tag in _IGNORED:
        return
    tf = el.get("transform")
    if tf:
        ctm = _mat_mul(ctm, _parse_transform(tf))
    fill = _effective_fill(el, fill)
    mode = "fill" if (fill is not None and fill.strip().lower() != "none") else "stroke"

    if tag in _CONTAINERS:
        for child in el:
            _walk(child, ctm, fill, counter, out, warnings)
        return
    counter[0] += 1
    source_id = el.get("id") or f"{tag}{counter[0]}"
    if tag == "path":
        d = el.get("d", "")
        if d.strip():
            _parse_path_data(d, ctm, source_id, mode, out, warnings)
    elif tag in ("rect", "line", "polyline", "polygon", "circle", "ellipse"):
        _shape_to_paths(el, ctm, mode, source_id, out, warnings)
    else:
        log.debug("ignoring element <%s>", tag)


def parse_svg(document: bytes | str) -> SvgPathSet:
    """Parse an SVG document into chains tagged with a draw mode."""
    try:
        root = ET.fromstring(document)
    except ET.ParseError as e:
        raise ParseError(f"malformed XML: {e}") from e
    if _local_tag(root) != "svg":
        raise ParseError(f"root element is <{_local_tag(root)}>, expected <svg>")

    paths: list[SvgPath] = []
    warnings: list[str] = []
    _walk(root, _IDENTITY, None, [0], paths, warnings)

    vb_raw = root.get("viewBox")
    if vb_raw:
        vals = [float(v) for v in _NUM_RE.findall(vb_raw)]
        if len(vals) != 4:
            raise ParseError(f"bad viewBox {vb_raw!r}")
        view_box = (vals[0], vals[1], vals[2], vals[3])
    elif root.get("width") and root.get("height"):
        view_box = (0.0, 0.0, _get_float(root, "width"), _get_float(root, "height"))
    elif paths:
        # Fall back to the content bounding box.
        boxes = [p.chain.bounds() for p in paths]
        x0 = min(b[0] for b in boxes)
        y0 = min(b[1] for b in boxes)
        x1 = max(b[2] for b in boxes)
        y1 = max(b[3] for b in boxes)
        view_box = (x0, y0, x1 - x0, y1 - y0)
    else:
        view_box = (0.0, 0.0, 0.0, 0.0)
    for w in warnings:
        log.warning("%s", w)
    return SvgPathSet(paths, view_box, warnings)


def map_to_wall(pset: SvgPathSet, wall_rect: tuple[float, float, float, float]) -> SvgPathSet:
    """Scale uniformly into wall_rect (x0, z0, w, h m), centered, y flipped to z-up."""
    x0, z0, w_m, h_m = wall_rect
    if w_m <= 0 or h_m <= 0:
        raise ValueError("wall_rect width and height must be > 0")
    vx, vy, vw, vh = pset.view_box
    if vw <= 0 or vh <= 0:
        raise ParseError("empty view_box, nothing to map")
    s = min(w_m / vw, h_m / vh)
    off_x = x0 + (w_m - s * vw) / 2.0
    off_z = z0 + (h_m - s * vh) / 2.0

    def to_wall(p: Point) -> Point:
        # SVG y grows downward; wall z grows upward.
        return (off_x + s * (p[0] - vx), off_z + s * (vy + vh - p[1]))

    mapped = [
        SvgPath(p.chain.affine(to_wall), p.mode, p.source_id, p.closed)
        for p in pset.paths
    ]
    return SvgPathSet(mapped, pset.view_box, list(pset.warnings))


def _fmt(v: float) -> str:
    return repr(float(v))


def chain_to_path_data(chain: PathChain, closed: bool = False) -> str:
    """Serialize a chain back to path-data syntax (round-trips within 1e-9)."""
    parts = [f"M {_fmt(chain.start[0])} {_fmt(chain.start[1])}"]
    segs = chain.segments
    n = len(segs)
    for i, seg in enumerate(segs):
        if seg.kind == "line":
            # The closing line of a closed chain is implied by Z.
            if closed and i == n - 1 and chain.is_closed(tol=1e-12):
                continue
            parts.append(f"L {_fmt(seg.end[0])} {_fmt(seg.end[1])}")
        else:
            _, c1, c2, p3 = seg.points
            parts.append(
                f"C {_fmt(c1[0])} {_fmt(c1[1])} {_fmt(c2[0])} {_fmt(c2[1])} "
                f"{_fmt(p3[0])} {_fmt(p3[1])}"
            )
    if closed:
        parts.append("Z")
    return " ".join(parts)


def serialize_svg(pset: SvgPathSet) -> str:
    """Emit the path set as a standalone SVG document."""
    vx, vy, vw, vh = pset.view_box
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" '
        f'viewBox="{_fmt(vx)} {_fmt(vy)} {_fmt(vw)} {_fmt(vh)}">'
    ]
    for p in pset.paths:
        d = chain_to_path_data(p.chain, p.closed)
        fill = ' fill="#000000"' if p.mode == "fill" else ' stroke="#000000"'
        lines.append(f'  <path id="{p.source_id}" d="{d}"{fill}/>')
    lines.append("</svg>")
    return "\n".join(lines)
