"""Construction, validation and measurement of elliptic flower billiard tables.

A flower table is a closed chain of elliptic arcs whose focus pairs sit on the
vertices of a convex base polygon.  This module builds the tables (special
one-layer flowers, side+corner flowers, plain ellipse/circle tables, string
constructions over a caustic), computes the derived objects (zone partition of
the side-line arrangement, core polygon, osculating circles) and provides the
geometric predicates the dynamics layer relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

TWO_PI = 2.0 * math.pi

# Relative geometric tolerance; absolute tolerances are this times a table /
# polygon diameter.
REL_TOL = 1e-9


class InvalidParameterError(ValueError):
    """A caller-supplied parameter is outside the documented domain."""


class ConstructionError(RuntimeError):
    """A table could not be built (ellipse misses a bounding ray, ...)."""

    def __init__(self, message, side_index=None):
        super().__init__(message)
        self.side_index = side_index


class ClosureError(ConstructionError):
    """The assembled arc chain does not close within tolerance."""


class DegenerateCoreError(RuntimeError):
    """Core clipping produced an empty polygon."""


class DegenerateEllipseError(InvalidParameterError):
    """Coincident foci: the requested ellipse is a circle."""


# ---------------------------------------------------------------------------
# small vector helpers
# ---------------------------------------------------------------------------

def _unit(v):
    n = math.hypot(v[0], v[1])
    if n == 0.0:
        raise InvalidParameterError("zero-length vector")
    return np.array([v[0] / n, v[1] / n])


def _norm_angle(t):
    """Wrap an angle into [0, 2*pi)."""
    t = math.fmod(t, TWO_PI)
    return t + TWO_PI if t < 0.0 else t


def polygon_area_centroid(vertices):
    """Area centroid of a simple polygon given as an (n, 2) array."""
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    if abs(area) < 1e-300:
        return v.mean(axis=0)
    cx = ((x + xn) * cross).sum() / (6.0 * area)
    cy = ((y + yn) * cross).sum() / (6.0 * area)
    return np.array([cx, cy])


def clip_polygon_halfplane(poly, normal, offset):
    """Clip a convex polygon by the half-plane {x : normal . x <= offset}.

    Returns the (possibly empty) clipped vertex array.
    """
    poly = np.asarray(poly, dtype=float)
    out = []
    m = len(poly)
    for i in range(m):
        p, q = poly[i], poly[(i + 1) % m]
        fp = normal[0] * p[0] + normal[1] * p[1] - offset
        fq = normal[0] * q[0] + normal[1] * q[1] - offset
        if fp <= 0.0:
            out.append(p)
            if fq > 0.0:
                t = fp / (fp - fq)
                out.append(p + t * (q - p))
        elif fq <= 0.0:
            t = fp / (fp - fq)
            out.append(p + t * (q - p))
    return np.array(out) if out else np.zeros((0, 2))


def point_in_convex_polygon(p, vertices, tol=0.0):
    """True if p lies inside (or within tol of) a convex CCW polygon."""
    v = np.asarray(vertices, dtype=float)
    m = len(v)
    if m < 3:
        return False
    for i in range(m):
        a, b = v[i], v[(i + 1) % m]
        if (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) < -tol:
            return False
    return True


def segments_intersect(p0, p1, q0, q1, tol=0.0):
    """Proper or touching intersection test for two closed segments."""
    r = (p1[0] - p0[0], p1[1] - p0[1])
    s = (q1[0] - q0[0], q1[1] - q0[1])
    denom = r[0] * s[1] - r[1] * s[0]
    qp = (q0[0] - p0[0], q0[1] - p0[1])
    if abs(denom) < 1e-300:
        return False
    t = (qp[0] * s[1] - qp[1] * s[0]) / denom
    u = (qp[0] * r[1] - qp[1] * r[0]) / denom
    return -tol <= t <= 1.0 + tol and -tol <= u <= 1.0 + tol


def segment_crosses_polygon(p0, p1, vertices):
    """True if segment [p0, p1] meets a convex polygon (2-gon = segment)."""
    v = np.asarray(vertices, dtype=float)
    m = len(v)
    if m == 2:
        return segments_intersect(p0, p1, v[0], v[1])
    if point_in_convex_polygon(p0, v) or point_in_convex_polygon(p1, v):
        return True
    for i in range(m):
        if segments_intersect(p0, p1, v[i], v[(i + 1) % m]):
            return True
    return False


# ---------------------------------------------------------------------------
# Ellipse / EllipticArc
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Ellipse:
    """A conic with semi-axes a >= b > 0, canonical frame rotated by `rotation`.

    The canonical parameterization is p(t) = center + R(rotation) @ (a cos t,
    b sin t); the foci sit on the major axis at distance c = sqrt(a^2 - b^2)
    from the center.
    """

    center: np.ndarray
    a: float
    b: float
    rotation: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if not (self.a > 0.0 and self.b > 0.0):
            raise InvalidParameterError("semi-axes must be positive")
        if self.a < self.b:
            raise InvalidParameterError("semi-major a must satisfy a >= b")

    @classmethod
    def from_foci(cls, f1, f2, b):
        """Ellipse with given foci and semi-minor axis, rotation along f1->f2."""
        f1 = np.asarray(f1, dtype=float)
        f2 = np.asarray(f2, dtype=float)
        if b <= 0.0:
            raise InvalidParameterError("semi-minor axis must be positive")
        d = f2 - f1
        c = 0.5 * math.hypot(d[0], d[1])
        if c == 0.0:
            raise DegenerateEllipseError(
                "coincident foci define a circle; construct Ellipse(center, r, r)"
            )
        a = math.sqrt(b * b + c * c)
        rotation = math.atan2(d[1], d[0])
        return cls(0.5 * (f1 + f2), a, b, rotation)

    @property
    def c(self):
        return math.sqrt(max(self.a * self.a - self.b * self.b, 0.0))

    @property
    def focus1(self):
        return self.center - self.c * self._major_dir()

    @property
    def focus2(self):
        return self.center + self.c * self._major_dir()

    def _major_dir(self):
        return np.array([math.cos(self.rotation), math.sin(self.rotation)])

    def _minor_dir(self):
        return np.array([-math.sin(self.rotation), math.cos(self.rotation)])

    def point(self, t):
        t = np.asarray(t, dtype=float)
        cr, sr = math.cos(self.rotation), math.sin(self.rotation)
        x = self.a * np.cos(t)
        y = self.b * np.sin(t)
        return np.stack(
            [self.center[0] + cr * x - sr * y, self.center[1] + sr * x + cr * y],
            axis=-1,
        )

    def tangent(self, t):
        """Unit tangent in the direction of increasing t (CCW)."""
        cr, sr = math.cos(self.rotation), math.sin(self.rotation)
        dx = -self.a * math.sin(t)
        dy = self.b * math.cos(t)
        return _unit((cr * dx - sr * dy, sr * dx + cr * dy))

    def inward_normal(self, t):
        """Unit normal pointing into the ellipse interior."""
        tx, ty = self.tangent(t)
        return np.array([-ty, tx])  # left of CCW tangent

    def param_of(self, p):
        """Canonical parameter of a world point (nearest by angle)."""
        q = np.asarray(p, dtype=float) - self.center
        cr, sr = math.cos(self.rotation), math.sin(self.rotation)
        u = cr * q[0] + sr * q[1]
        v = -sr * q[0] + cr * q[1]
        return _norm_angle(math.atan2(v / self.b, u / self.a))

    def curvature(self, t):
        """Unsigned curvature at parameter t."""
        s2 = self.a * self.a * math.sin(t) ** 2 + self.b * self.b * math.cos(t) ** 2
        return self.a * self.b / s2 ** 1.5

    def focal_sum(self, p):
        f1, f2 = self.focus1, self.focus2
        return math.hypot(p[0] - f1[0], p[1] - f1[1]) + math.hypot(
            p[0] - f2[0], p[1] - f2[1]
        )

    def contains(self, p):
        return self.focal_sum(p) <= 2.0 * self.a

    def arc_length(self, t0, t1):
        """Arc length from parameter t0 to t1 (t1 >= t0)."""
        m = 1.0 - (self.b / self.a) ** 2
        return self.a * float(
            special.ellipeinc(t1 + 0.5 * math.pi, m)
            - special.ellipeinc(t0 + 0.5 * math.pi, m)
        )

    def speed(self, t):
        return math.hypot(self.a * math.sin(t), self.b * math.cos(t))

    def param_at_length(self, t0, s):
        """Parameter t >= t0 such that arc_length(t0, t) == s (Newton)."""
        if s <= 0.0:
            return t0
        t = t0 + s / self.speed(t0)
        for _ in range(60):
            f = self.arc_length(t0, t) - s
            df = self.speed(t)
            dt = f / df
            t -= dt
            if abs(dt) < 1e-15 * max(1.0, abs(t)):
                break
        return t

    def line_intersections(self, p0, d):
        """Intersections of the line p0 + tau*d with the ellipse.

        Returns a list of (tau, t_param) sorted by tau; empty if the line
        misses the ellipse.
        """
        p0 = np.asarray(p0, dtype=float)
        d = np.asarray(d, dtype=float)
        cr, sr = math.cos(self.rotation), math.sin(self.rotation)
        qx = cr * (p0[0] - self.center[0]) + sr * (p0[1] - self.center[1])
        qy = -sr * (p0[0] - self.center[0]) + cr * (p0[1] - self.center[1])
        ex = cr * d[0] + sr * d[1]
        ey = -sr * d[0] + cr * d[1]
        A = (ex / self.a) ** 2 + (ey / self.b) ** 2
        B = 2.0 * (qx * ex / self.a ** 2 + qy * ey / self.b ** 2)
        C = (qx / self.a) ** 2 + (qy / self.b) ** 2 - 1.0
        disc = B * B - 4.0 * A * C
        if disc < 0.0 or A == 0.0:
            return []
        sq = math.sqrt(disc)
        if B >= 0.0:
            qq = -0.5 * (B + sq)
        else:
            qq = -0.5 * (B - sq)
        taus = sorted({qq / A, C / qq} if qq != 0.0 else {0.0})
        out = []
        for tau in taus:
            hx, hy = qx + tau * ex, qy + tau * ey
            out.append((tau, _norm_angle(math.atan2(hy / self.b, hx / self.a))))
        return out


def ellipse_from_foci(f1, f2, b):
    """Build an ellipse from its foci and semi-minor axis length."""
    return Ellipse.from_foci(f1, f2, b)


def max_osculating_radius(e: Ellipse):
    """Largest radius of curvature, attained at the minor-axis endpoints."""
    return e.a * e.a / e.b


def maximal_osculating_circle(e: Ellipse, side="+"):
    """Circle of radius a^2/b internally tangent at a minor-axis endpoint.

    `side` selects the endpoint: '+' is center + b * minor_dir.  Returns
    (center, radius); the center lies on the minor axis, inward from the
    tangency point.
    """
    if side not in ("+", "-"):
        raise InvalidParameterError("side must be '+' or '-'")
    sgn = 1.0 if side == "+" else -1.0
    r = max_osculating_radius(e)
    tangency = e.center + sgn * e.b * e._minor_dir()
    center = tangency - sgn * r * e._minor_dir()
    return center, r


@dataclass(frozen=True, eq=False)
class EllipticArc:
    """A piece of an ellipse, traversed CCW from t_start to t_end.

    t_start is normalized into [0, 2*pi); t_end = t_start + span with
    0 < span < 2*pi.  Optional construction metadata records the base-vertex
    indices of the foci, the layer, and the side index whose bounding
    line/ray carries each endpoint.
    """

    ellipse: Ellipse
    t_start: float
    t_end: float
    focus_indices: tuple | None = None
    layer: int | None = None
    boundary_sides: tuple | None = None

    def __post_init__(self):
        span = self.t_end - self.t_start
        if not (0.0 < span < TWO_PI):
            raise InvalidParameterError("arc span must lie in (0, 2*pi)")
        t0 = _norm_angle(self.t_start)
        object.__setattr__(self, "t_start", t0)
        object.__setattr__(self, "t_end", t0 + span)

    @property
    def span(self):
        return self.t_end - self.t_start

    @property
    def start_point(self):
        return self.ellipse.point(self.t_start)

    @property
    def end_point(self):
        return self.ellipse.point(self.t_end)

    @property
    def length(self):
        return self.ellipse.arc_length(self.t_start, self.t_end)

    def contains_param(self, t, tol=0.0):
        """True if canonical parameter t falls inside the arc range."""
        tt = _norm_angle(t)
        if tt < self.t_start - tol:
            tt += TWO_PI
        return tt <= self.t_end + tol

    def sample(self, n):
        ts = np.linspace(self.t_start, self.t_end, n)
        return self.ellipse.point(ts)

    def minor_vertex_params(self):
        """Canonical minor-axis endpoint parameters contained in the arc."""
        return [t for t in (0.5 * math.pi, 1.5 * math.pi) if self.contains_param(t)]

    def bounding_box(self, pad=0.0):
        """Axis-aligned bounding box (xmin, xmax, ymin, ymax) of the arc."""
        e = self.ellipse
        cr, sr = math.cos(e.rotation), math.sin(e.rotation)
        xs, ys = [], []
        for t in (self.t_start, self.t_end):
            p = e.point(t)
            xs.append(p[0])
            ys.append(p[1])
        # interior extrema of x(t) = cx + ax*cos t + bx*sin t, same for y
        for alpha, beta, acc in (
            (e.a * cr, -e.b * sr, xs),
            (e.a * sr, e.b * cr, ys),
        ):
            text = math.atan2(beta, alpha)
            for t in (text, text + math.pi):
                if self.contains_param(t):
                    tt = _norm_angle(t)
                    p = e.point(tt)
                    acc.append(p[0] if acc is xs else p[1])
        return (min(xs) - pad, max(xs) + pad, min(ys) - pad, max(ys) + pad)


# ---------------------------------------------------------------------------
# BasePolygon
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BasePolygon:
    """Convex polygon with CCW vertices carrying the ellipse foci."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        object.__setattr__(self, "vertices", v)
        n = len(v)
        if n < 3:
            raise InvalidParameterError("polygon needs at least 3 vertices")
        cross = None
        for i in range(n):
            a, b, c = v[i], v[(i + 1) % n], v[(i + 2) % n]
            cr = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
            if cr <= 0.0:
                raise InvalidParameterError("vertices must be convex and CCW")
            cross = cr

    @property
    def n(self):
        return len(self.vertices)

    @property
    def centroid(self):
        return polygon_area_centroid(self.vertices)

    @property
    def side_lengths(self):
        v = self.vertices
        return np.array(
            [math.dist(v[i], v[(i + 1) % self.n]) for i in range(self.n)]
        )

    @property
    def side_length(self):
        """Common side length (meaningful for regular polygons)."""
        return float(self.side_lengths[0])

    @property
    def diameter(self):
        v = self.vertices
        return max(
            math.dist(v[i], v[j]) for i in range(self.n) for j in range(i + 1, self.n)
        )

    def side(self, i):
        """Endpoints (A_i, A_{i+1}) of side i."""
        return self.vertices[i % self.n], self.vertices[(i + 1) % self.n]

    def side_direction(self, i):
        a, b = self.side(i)
        return _unit(b - a)

    def outward_normal(self, i):
        d = self.side_direction(i)
        return np.array([d[1], -d[0]])  # right of CCW edge = outward

    def side_offset(self, i):
        """Offset value so that side line i is {x : outward_normal . x = offset}."""
        a, _ = self.side(i)
        nrm = self.outward_normal(i)
        return float(nrm[0] * a[0] + nrm[1] * a[1])

    def midpoint_ray(self, i):
        """Outward perpendicular ray at the midpoint of side i: (origin, dir)."""
        a, b = self.side(i)
        return 0.5 * (a + b), self.outward_normal(i)

    def signed_side_value(self, i, p):
        """outward_normal . p - offset: positive outside side line i."""
        nrm = self.outward_normal(i)
        return float(nrm[0] * p[0] + nrm[1] * p[1]) - self.side_offset(i)

    def separation_depth(self, p, tol=0.0):
        """Number of side lines strictly separating p from the centroid."""
        return sum(1 for i in range(self.n) if self.signed_side_value(i, p) > tol)

    def contains(self, p, tol=0.0):
        return point_in_convex_polygon(p, self.vertices, tol=tol)


def make_regular_polygon(n, l, center=(0.0, 0.0)):
    """Regular n-gon of side length l, first vertex on the +x axis from center."""
    if n < 3:
        raise InvalidParameterError("n must be >= 3")
    if l <= 0.0:
        raise InvalidParameterError("side length must be positive")
    center = np.asarray(center, dtype=float)
    r = l / (2.0 * math.sin(math.pi / n))
    ang = TWO_PI * np.arange(n) / n
    return BasePolygon(center + r * np.stack([np.cos(ang), np.sin(ang)], axis=1))


def small_diagonal(base: BasePolygon, i, m):
    """Endpoints (A_i, A_{i+m mod n}) of the layer-m focus segment at vertex i."""
    n = base.n
    if not 1 <= m <= n // 2:
        raise InvalidParameterError(f"layer m={m} out of range for n={n}")
    return base.vertices[i % n], base.vertices[(i + m) % n]


def diagonal_center_distance(n, l):
    """Distance from the center of a regular n-gon to a small-diagonal midpoint.

    Evaluates l*cos(2*pi/n) / (2*sin(pi/n)); geometrically meaningful for
    n >= 5 (the layer-2 construction regime).
    """
    if l <= 0.0:
        raise InvalidParameterError("side length must be positive")
    return l * math.cos(TWO_PI / n) / (2.0 * math.sin(math.pi / n))


# ---------------------------------------------------------------------------
# Zone partition of the side-line arrangement
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ZoneFace:
    polygon: np.ndarray
    depth: int
    signs: tuple
    bounded: bool


@dataclass(frozen=True, eq=False)
class ZonePartition:
    """Cells of the side-line arrangement tagged with separation depth.

    Unbounded cells are clipped to a large working box for representation;
    `depth_of` works on exact signed distances and does not depend on it.
    """

    base: BasePolygon
    faces: tuple
    box_half_width: float

    def depth_of(self, p, tol=0.0):
        return self.base.separation_depth(p, tol=tol)

    def locate(self, p):
        """Face containing p (None if p lies on a line of the arrangement)."""
        for f in self.faces:
            ok = True
            for i, s in enumerate(f.signs):
                val = self.base.signed_side_value(i, p)
                if val == 0.0 or (1 if val > 0 else -1) != s:
                    ok = False
                    break
            if ok:
                return f
        return None

    @property
    def max_depth(self):
        return max(f.depth for f in self.faces)


def zone_partition(base: BasePolygon, box_factor=8.0):
    """Arrangement of the n side lines with per-cell separation depths."""
    n = base.n
    c = base.centroid
    half = box_factor * max(base.diameter, 1e-12)
    box = np.array(
        [
            [c[0] - half, c[1] - half],
            [c[0] + half, c[1] - half],
            [c[0] + half, c[1] + half],
            [c[0] - half, c[1] + half],
        ]
    )
    faces = []
    for mask in range(1 << n):
        signs = tuple(1 if mask & (1 << i) else -1 for i in range(n))
        poly = box
        for i, s in enumerate(signs):
            nrm = base.outward_normal(i) * (-float(s))
            off = base.side_offset(i) * (-float(s))
            poly = clip_polygon_halfplane(poly, nrm, off)
            if len(poly) < 3:
                break
        if len(poly) < 3:
            continue
        # drop slivers produced by near-coincident clip lines
        area = 0.5 * abs(
            np.sum(
                poly[:, 0] * np.roll(poly[:, 1], -1)
                - np.roll(poly[:, 0], -1) * poly[:, 1]
            )
        )
        if area < (1e-12 * half) ** 2:
            continue
        bounded = bool(
            np.all(np.abs(poly[:, 0] - c[0]) < half * (1 - 1e-9))
            and np.all(np.abs(poly[:, 1] - c[1]) < half * (1 - 1e-9))
        )
        depth = sum(1 for s in signs if s > 0)
        faces.append(ZoneFace(poly, depth, signs, bounded))
    return ZonePartition(base, tuple(faces), half)


# ---------------------------------------------------------------------------
# FlowerTable
# ---------------------------------------------------------------------------

KIND_UNSTRUCTURED = "unstructured"
KIND_STRUCTURAL = "structural"
KIND_SOL = "sol"


class FlowerTable:
    """Closed CCW chain of elliptic arcs with an optional base polygon.

    Immutable after construction; all derived data (chain lengths, kernel
    arrays, core polygon) is precomputed here so the dynamics layer only
    reads.
    """

    def __init__(self, arcs, base=None, kind=KIND_UNSTRUCTURED, core_polygon=None,
                 b_parameter=None):
        self.arcs = tuple(arcs)
        self.base = base
        self.kind = kind
        self.b_parameter = b_parameter
        if not self.arcs:
            raise InvalidParameterError("table needs at least one arc")

        xmins, xmaxs, ymins, ymaxs = zip(*(a.bounding_box() for a in self.arcs))
        self.bbox = (min(xmins), max(xmaxs), min(ymins), max(ymaxs))
        self.diameter = math.hypot(
            self.bbox[1] - self.bbox[0], self.bbox[3] - self.bbox[2]
        )
        self.tol = REL_TOL * self.diameter

        gaps = []
        k = len(self.arcs)
        for i in range(k):
            p = self.arcs[i].end_point
            q = self.arcs[(i + 1) % k].start_point
            gaps.append(math.dist(p, q))
        self.max_chain_gap = max(gaps)
        if self.max_chain_gap > 100.0 * self.tol:
            raise ClosureError(
                f"arc chain is open: max endpoint gap {self.max_chain_gap:.3e}"
            )

        if base is not None:
            for a in self.arcs:
                for f in (a.ellipse.focus1, a.ellipse.focus2):
                    d = min(math.dist(f, v) for v in base.vertices)
                    if d > 100.0 * self.tol:
                        raise ConstructionError(
                            "arc focus does not coincide with a base vertex"
                        )

        self.arc_lengths = np.array([a.length for a in self.arcs])
        self.cum_lengths = np.concatenate([[0.0], np.cumsum(self.arc_lengths)])
        self.perimeter = float(self.cum_lengths[-1])

        if core_polygon is None and base is not None:
            core_polygon = compute_core_polygon_from_parts(self.arcs, base)
        self.core_polygon = (
            np.asarray(core_polygon, dtype=float) if core_polygon is not None else None
        )
        if self.core_polygon is not None and len(self.core_polygon) >= 3:
            self.core_centroid = polygon_area_centroid(self.core_polygon)
        elif self.core_polygon is not None:
            self.core_centroid = self.core_polygon.mean(axis=0)
        elif base is not None:
            self.core_centroid = base.centroid
        else:
            self.core_centroid = np.array(
                [0.5 * (self.bbox[0] + self.bbox[1]), 0.5 * (self.bbox[2] + self.bbox[3])]
            )
        self._arrays = _build_kernel_arrays(self)

    @property
    def n_arcs(self):
        return len(self.arcs)

    @property
    def layer_of_arc(self):
        return tuple(a.layer for a in self.arcs)

    def kernel_arrays(self):
        return self._arrays

    def arc_param_from_s(self, s):
        """Map a cumulative boundary position to (arc_index, parameter t)."""
        s = math.fmod(s, self.perimeter)
        if s < 0.0:
            s += self.perimeter
        i = int(np.searchsorted(self.cum_lengths, s, side="right") - 1)
        i = min(max(i, 0), self.n_arcs - 1)
        arc = self.arcs[i]
        return i, arc.ellipse.param_at_length(arc.t_start, s - self.cum_lengths[i])

    def s_from_arc_param(self, arc_index, t):
        arc = self.arcs[arc_index]
        tt = _norm_angle(t)
        if tt < arc.t_start - 1e-12:
            tt += TWO_PI
        tt = min(max(tt, arc.t_start), arc.t_end)
        return float(self.cum_lengths[arc_index] + arc.ellipse.arc_length(arc.t_start, tt))

    def contains(self, p, _dir_seed=0):
        """Point-in-table parity test with exact ray/arc intersections."""
        rng = np.random.default_rng(12345 + _dir_seed)
        for _ in range(16):
            ang = rng.uniform(0.0, TWO_PI)
            d = np.array([math.cos(ang), math.sin(ang)])
            hits = 0
            ok = True
            for arc in self.arcs:
                for tau, t in arc.ellipse.line_intersections(p, d):
                    if tau <= 0.0:
                        continue
                    if not arc.contains_param(t):
                        continue
                    # reject near-endpoint / near-tangent hits and retry
                    for tend in (arc.t_start, arc.t_end):
                        if abs(_ang_diff(t, tend)) < 1e-7:
                            ok = False
                    tng = arc.ellipse.tangent(t)
                    if abs(tng[0] * d[1] - tng[1] * d[0]) < 1e-7:
                        ok = False
                    if not ok:
                        break
                    hits += 1
                if not ok:
                    break
            if ok:
                return hits % 2 == 1
        raise RuntimeError("point-in-table parity test failed to stabilize")


def _ang_diff(t, u):
    d = math.fmod(t - u, TWO_PI)
    if d > math.pi:
        d -= TWO_PI
    if d < -math.pi:
        d += TWO_PI
    return d


def _build_kernel_arrays(table: FlowerTable):
    """Flatten a table into plain float arrays consumed by the hot kernels."""
    k = table.n_arcs
    arr = {
        "cx": np.empty(k), "cy": np.empty(k),
        "cr": np.empty(k), "sr": np.empty(k),
        "a": np.empty(k), "b": np.empty(k),
        "t0": np.empty(k), "t1": np.empty(k),
        "xmin": np.empty(k), "xmax": np.empty(k),
        "ymin": np.empty(k), "ymax": np.empty(k),
    }
    pad = 10.0 * table.tol
    for i, a in enumerate(table.arcs):
        e = a.ellipse
        arr["cx"][i], arr["cy"][i] = e.center
        arr["cr"][i], arr["sr"][i] = math.cos(e.rotation), math.sin(e.rotation)
        arr["a"][i], arr["b"][i] = e.a, e.b
        arr["t0"][i], arr["t1"][i] = a.t_start, a.t_end
        bb = a.bounding_box(pad=pad)
        arr["xmin"][i], arr["xmax"][i], arr["ymin"][i], arr["ymax"][i] = bb
    if table.core_polygon is not None:
        core = np.asarray(table.core_polygon, dtype=float)
    else:
        core = np.zeros((0, 2))
    return (
        arr["cx"], arr["cy"], arr["cr"], arr["sr"], arr["a"], arr["b"],
        arr["t0"], arr["t1"],
        arr["xmin"], arr["xmax"], arr["ymin"], arr["ymax"],
        core, np.asarray(table.core_centroid, dtype=float),
        table.diameter,
    )


# ---------------------------------------------------------------------------
# Table constructors
# ---------------------------------------------------------------------------

def ellipse_table(a, b, center=(0.0, 0.0), rotation=0.0):
    """Full-ellipse table (two half arcs); core polygon is the focal segment.

    The smooth joints are placed away from the axes so that axis-aligned
    probe orbits (focal chords, minor-axis bounces) never graze them.
    """
    e = Ellipse(np.asarray(center, dtype=float), a, b, rotation)
    split = 0.25
    arcs = [
        EllipticArc(e, split, split + math.pi),
        EllipticArc(e, split + math.pi, split + TWO_PI),
    ]
    core = None
    if a > b:
        core = np.array([e.focus1, e.focus2])
    return FlowerTable(arcs, base=None, kind=KIND_UNSTRUCTURED, core_polygon=core)


def circle_table(radius, center=(0.0, 0.0)):
    return ellipse_table(radius, radius, center=center)


def _petal_focus_pair(base: BasePolygon, k):
    """Focus vertex indices for the petal over vertex k (SOL rule)."""
    n = base.n
    if n == 3:
        return ((k + 1) % n, (k + 2) % n)  # sides double as small diagonals
    return ((k - 1) % n, (k + 1) % n)


def _ray_ellipse_point(e: Ellipse, origin, direction, side_index):
    """Unique intersection of an outward ray (origin inside e) with e."""
    if not e.contains(origin):
        raise ConstructionError(
            f"ellipse does not enclose the ray origin for side {side_index}; "
            "semi-minor axis too small",
            side_index=side_index,
        )
    hits = [(tau, t) for tau, t in e.line_intersections(origin, direction) if tau > 0.0]
    if not hits:
        raise ConstructionError(
            f"ellipse misses bounding ray of side {side_index}", side_index=side_index
        )
    tau, t = hits[-1]
    return e.point(t), t


def _arc_between(e: Ellipse, t_from, t_to, outward_point, **meta):
    """Arc from t_from to t_to (CCW) that passes nearest `outward_point`."""
    t0 = _norm_angle(t_from)
    t1 = _norm_angle(t_to)
    span = t1 - t0
    if span <= 0.0:
        span += TWO_PI
    arc = EllipticArc(e, t0, t0 + span, **meta)
    t_out = e.param_of(outward_point)
    if not arc.contains_param(t_out):
        # complementary arc
        arc = EllipticArc(e, t1, t1 + (TWO_PI - span), **meta)
        if not arc.contains_param(t_out):
            raise ConstructionError("could not orient petal arc")
    return arc


def build_sol_flower(base: BasePolygon, b):
    """Special one-layer flower: one petal per base vertex.

    Petal k lies on the ellipse with foci at the small-diagonal endpoints
    around vertex k (for a triangle the opposite side's endpoints) and runs
    between the outward perpendicular rays at the midpoints of the two sides
    meeting at vertex k.
    """
    if b <= 0.0:
        raise InvalidParameterError("semi-minor axis b must be positive")
    n = base.n
    arcs = []
    for k in range(n):
        i1, i2 = _petal_focus_pair(base, k)
        e = Ellipse.from_foci(base.vertices[i1], base.vertices[i2], b)
        o_prev, d_prev = base.midpoint_ray((k - 1) % n)
        o_next, d_next = base.midpoint_ray(k)
        p_prev, t_prev = _ray_ellipse_point(e, o_prev, d_prev, (k - 1) % n)
        p_next, t_next = _ray_ellipse_point(e, o_next, d_next, k)
        arcs.append(
            _arc_between(
                e, t_prev, t_next, base.vertices[k],
                focus_indices=(i1, i2),
                layer=1 if n == 3 else 2,
                boundary_sides=((k - 1) % n, k),
            )
        )
    return FlowerTable(arcs, base=base, kind=KIND_SOL, b_parameter=float(b))


def build_corner_flower(base: BasePolygon, b_inner):
    """Structural flower with petals over the sides and over the vertices.

    Side petal i lies on the ellipse with foci (A_i, A_{i+1}) and semi-minor
    b_inner; its endpoints sit on the adjacent side lines extended beyond A_i
    and A_{i+1}.  Corner petal k closes the chain over vertex k on the ellipse
    with foci (A_{k-1}, A_{k+1}) through the shared endpoints.  Over a
    triangle both rings use side foci, giving confocal side/corner pairs.
    """
    if b_inner <= 0.0:
        raise InvalidParameterError("b_inner must be positive")
    n = base.n
    v = base.vertices
    side_arcs = []
    ends = []  # (P_left, P_right) per side petal
    for i in range(n):
        a_i, a_j = v[i], v[(i + 1) % n]
        e = Ellipse.from_foci(a_i, a_j, b_inner)
        d_left = _unit(a_i - v[(i - 1) % n])    # line i-1 extended beyond A_i
        d_right = _unit(a_j - v[(i + 2) % n])   # line i+1 extended beyond A_{i+1}
        hits_l = [(tau, t) for tau, t in e.line_intersections(a_i, d_left) if tau > 0.0]
        hits_r = [(tau, t) for tau, t in e.line_intersections(a_j, d_right) if tau > 0.0]
        if not hits_l or not hits_r:
            raise ConstructionError(
                f"side petal {i} does not reach its bounding lines", side_index=i
            )
        p_l, t_l = e.point(hits_l[-1][1]), hits_l[-1][1]
        p_r, t_r = e.point(hits_r[-1][1]), hits_r[-1][1]
        mid = 0.5 * (a_i + a_j)
        outward = mid + base.outward_normal(i)
        side_arcs.append(
            _arc_between(
                e, t_l, t_r, outward,
                focus_indices=(i, (i + 1) % n),
                layer=1,
                boundary_sides=((i - 1) % n, (i + 1) % n),
            )
        )
        ends.append((p_l, p_r))

    arcs = []
    for i in range(n):
        k = (i + 1) % n  # corner vertex between side petals i and i+1
        arcs.append(side_arcs[i])
        f1, f2 = v[i], v[(i + 2) % n]
        p_start = ends[i][1]          # on line i+1, beyond A_{i+1}
        p_end = ends[k][0]            # on line i, beyond A_{i+1}
        a_far = 0.5 * (
            math.dist(p_start, f1) + math.dist(p_start, f2)
        )
        c_far = 0.5 * math.dist(f1, f2)
        if a_far <= c_far:
            raise ConstructionError(f"corner petal {k} degenerate", side_index=k)
        b_far = math.sqrt(a_far * a_far - c_far * c_far)
        e_far = Ellipse.from_foci(f1, f2, b_far)

        # closure: the corner ellipse must also pass through the next side
        # petal's endpoint (exact for regular bases by symmetry)
        res = abs(e_far.focal_sum(p_end) - 2.0 * a_far)
        if res > 1e-6 * base.diameter:
            raise ClosureError(
                f"corner petal {k} cannot reach both neighbours "
                f"(focal-sum residual {res:.3e}); non-regular base?",
            )
        arcs.append(
            _arc_between(
                e_far, e_far.param_of(p_start), e_far.param_of(p_end), v[k],
                focus_indices=(i, (i + 2) % n),
                layer=1 if n == 3 else 2,
                boundary_sides=(k, (k - 1) % n),
            )
        )
    return FlowerTable(arcs, base=base, kind=KIND_STRUCTURAL, b_parameter=float(b_inner))


# ---------------------------------------------------------------------------
# Core polygon
# ---------------------------------------------------------------------------

def _cut_focus_for_endpoint(arc: EllipticArc, which_end, base: BasePolygon):
    """Focus through which the core-clipping line at this endpoint passes.

    The endpoint sits either on a side line of the base (then the cutting
    line runs through the focus *not* on that line) or on the perpendicular
    midpoint ray of a side (then through the focus that is an endpoint of
    that side).  Falls back to geometric identification when metadata is
    missing.
    """
    e = arc.ellipse
    p = arc.start_point if which_end == 0 else arc.end_point
    if arc.focus_indices is not None and arc.boundary_sides is not None:
        side = arc.boundary_sides[which_end]
        side_set = {side % base.n, (side + 1) % base.n}
        cands = [fi for fi in arc.focus_indices if fi in side_set]
        if len(cands) == 1:
            return base.vertices[cands[0]]
        if len(cands) == 2:
            # endpoint on a line through both foci; either focus works
            return base.vertices[cands[0]]
        # endpoint on a side line: cut through the focus not on that line
        on_line = [
            fi
            for fi in arc.focus_indices
            if abs(base.signed_side_value(side, base.vertices[fi])) < 1e-9 * base.diameter
        ]
        others = [fi for fi in arc.focus_indices if fi not in on_line]
        if others:
            return base.vertices[others[0]]
        return base.vertices[arc.focus_indices[0]]
    # no metadata: pick the focus whose line to p stays closest to the centroid
    best, best_d = None, math.inf
    for f in (e.focus1, e.focus2):
        d = _line_point_distance(p, f, base.centroid)
        if d < best_d:
            best, best_d = f, d
    return best


def _line_point_distance(a, b, p):
    d = _unit(np.asarray(b) - np.asarray(a))
    w = np.asarray(p) - np.asarray(a)
    return abs(d[0] * w[1] - d[1] * w[0])


def compute_core_polygon_from_parts(arcs, base: BasePolygon, depth_tol_scale=1e-7):
    """Core polygon of a structural/SOL flower.

    If no arc endpoint reaches an arrangement cell at separation depth >= 3
    the core equals the base polygon.  Otherwise the base is clipped, for
    each such endpoint, by the line through the endpoint and the matching
    focus of its ellipse, keeping the centroid side.
    """
    tol = depth_tol_scale * base.diameter
    poly = np.array(base.vertices, dtype=float)
    centroid = base.centroid
    cuts = []
    for arc in arcs:
        for which in (0, 1):
            p = arc.start_point if which == 0 else arc.end_point
            if base.separation_depth(p, tol=tol) < 3:
                continue
            f = _cut_focus_for_endpoint(arc, which, base)
            d = _unit(np.asarray(f) - p)
            nrm = np.array([-d[1], d[0]])
            off = float(nrm @ p)
            if float(nrm @ centroid) > off:
                nrm, off = -nrm, -off
            cuts.append((nrm, off))
    for nrm, off in cuts:
        poly = clip_polygon_halfplane(poly, nrm, off)
        if len(poly) < 3:
            raise DegenerateCoreError("core clipping produced an empty polygon")
    return poly


def compute_core_polygon(table: FlowerTable):
    """Core polygon of a flower table (see compute_core_polygon_from_parts)."""
    if table.base is None:
        raise InvalidParameterError("table has no base polygon")
    return compute_core_polygon_from_parts(table.arcs, table.base)


# ---------------------------------------------------------------------------
# Structural validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ArcReport:
    arc_index: int
    layer: int | None
    crosses_side_segment: bool
    crossed_side_indices: tuple
    crossed_line_indices: tuple
    endpoint_line_residuals: tuple
    deepest_zone: int


@dataclass(frozen=True, eq=False)
class ValidationReport:
    passed: bool
    strict_line_pass: bool
    arcs: tuple

    def __str__(self):
        lines = [
            f"structural: {'pass' if self.passed else 'FAIL'} "
            f"(strict side-line check: {'pass' if self.strict_line_pass else 'fail'})"
        ]
        for r in self.arcs:
            lines.append(
                f"  arc {r.arc_index}: layer={r.layer} "
                f"side-segment-crossings={list(r.crossed_side_indices)} "
                f"line-crossings={list(r.crossed_line_indices)} "
                f"deepest-zone={r.deepest_zone} "
                f"endpoint-residuals=({r.endpoint_line_residuals[0]:.2e}, "
                f"{r.endpoint_line_residuals[1]:.2e})"
            )
        return "\n".join(lines)


def validate_structural(table: FlowerTable, samples_per_arc=512):
    """Per-arc structural report for a flower over a base polygon.

    An arc crossing an actual side segment of the base is a violation and
    fails the report.  Crossings of the infinite side *lines* (their
    extensions) are tallied separately: petals of special one-layer flowers
    legitimately sweep across far line extensions, while tables tagged
    'structural' must avoid all side lines; `strict_line_pass` records that
    stricter verdict.
    """
    if table.base is None:
        raise InvalidParameterError("structural validation needs a base polygon")
    base = table.base
    tol = 1e-7 * base.diameter
    reports = []
    ok = True
    strict_ok = True
    for idx, arc in enumerate(table.arcs):
        pts = arc.sample(samples_per_arc)
        seg_cross = []
        line_cross = []
        for i in range(base.n):
            vals = np.array([base.signed_side_value(i, p) for p in pts])
            sign_change = np.any(vals[:-1] * vals[1:] < -tol * tol)
            if not sign_change:
                continue
            line_cross.append(i)
            # does the crossing happen within the side segment itself?
            a, bpt = base.side(i)
            d = base.side_direction(i)
            lo = float(d @ a) - tol
            hi = float(d @ bpt) + tol
            for j in np.nonzero(vals[:-1] * vals[1:] < 0.0)[0]:
                w = vals[j] / (vals[j] - vals[j + 1])
                p = pts[j] + w * (pts[j + 1] - pts[j])
                if lo <= float(d @ p) <= hi:
                    seg_cross.append(i)
                    break
        res = []
        for p in (arc.start_point, arc.end_point):
            res.append(min(abs(base.signed_side_value(i, p)) for i in range(base.n)))
        deepest = max(base.separation_depth(p, tol=tol) for p in pts)
        reports.append(
            ArcReport(
                idx,
                arc.layer,
                bool(seg_cross),
                tuple(sorted(set(seg_cross))),
                tuple(sorted(set(line_cross))),
                (float(res[0]), float(res[1])),
                int(deepest),
            )
        )
        if seg_cross:
            ok = False
        if line_cross:
            strict_ok = False
    if table.kind == KIND_STRUCTURAL:
        ok = ok and strict_ok
    return ValidationReport(ok, strict_ok, tuple(reports))


# ---------------------------------------------------------------------------
# Absolute focusing / defocusing checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FocusingReport:
    applicable: bool
    pass_projection: bool
    pass_angle: bool
    projection: float
    angle: float
    threshold_projection: float
    threshold_angle: float = math.pi / 4.0

    @property
    def verdict(self):
        if not self.applicable:
            return "not_applicable"
        if self.pass_projection and self.pass_angle:
            return "pass"
        return "fail"


def is_absolutely_focusing(arc: EllipticArc, symmetry_tol=1e-9):
    """Absolute-focusing criteria for an arc symmetric about its minor axis.

    `projection` is the largest distance from the ellipse center to the arc
    measured along the major axis (a*sin(half-span)); the criterion requires
    it not to exceed a/sqrt(2).  `angle` is the angle between the minor axis
    and the center-to-endpoint direction; the criterion requires it below
    pi/4.  Arcs not symmetric about a minor-axis endpoint are reported
    not-applicable.
    """
    e = arc.ellipse
    mid = 0.5 * (arc.t_start + arc.t_end)
    sym = min(
        abs(_ang_diff(mid, 0.5 * math.pi)), abs(_ang_diff(mid, 1.5 * math.pi))
    )
    if sym > max(symmetry_tol, 1e-12) * max(1.0, arc.span):
        return FocusingReport(False, False, False, math.nan, math.nan,
                              e.a / math.sqrt(2.0))
    half = 0.5 * arc.span
    projection = e.a * math.sin(half) if half <= 0.5 * math.pi else e.a
    angle = math.atan2(e.a * math.sin(half), e.b * math.cos(half))
    thr = e.a / math.sqrt(2.0)
    return FocusingReport(
        True, projection <= thr, angle < 0.25 * math.pi, projection, angle, thr
    )


@dataclass(frozen=True, eq=False)
class DefocusingReport:
    pass_fraction: float
    n_chords: int
    worst_margin: float
    witnesses: tuple
    premise_ok: bool
    premise_detail: tuple

    @property
    def passed(self):
        """Every sampled core-crossing chord met both osculating circles."""
        return self.pass_fraction == 1.0


def _segment_circle_intersects(p0, p1, center, radius):
    d = np.asarray(p1, dtype=float) - np.asarray(p0, dtype=float)
    w = np.asarray(center, dtype=float) - np.asarray(p0, dtype=float)
    dd = float(d @ d)
    t = float(w @ d) / dd if dd > 0 else 0.0
    t = min(max(t, 0.0), 1.0)
    closest = np.asarray(p0) + t * d
    return math.dist(closest, center) < radius, radius - math.dist(closest, center)


def defocusing_check(table: FlowerTable, samples=2000, seed=0):
    """Monte-Carlo check of the defocusing premise on core-crossing chords.

    Samples chords with endpoints on distinct arcs whose segment crosses the
    core polygon, and verifies that each chord meets the maximal osculating
    circles of both endpoint arcs.  Also verifies, per arc, that the maximal
    osculating circle splits into exactly one arc inside the table and one
    outside it.
    """
    if table.core_polygon is None:
        raise InvalidParameterError("defocusing check needs a core polygon")
    rng = np.random.default_rng(seed)
    circles = []
    for arc in table.arcs:
        e = arc.ellipse
        params = arc.minor_vertex_params()
        if not params:
            raise ConstructionError("arc does not contain a minor-axis endpoint")
        t = params[0]
        tangency = e.point(t)
        r = max_osculating_radius(e)
        center = tangency + r * e.inward_normal(t)
        circles.append((center, r))

    n_pass = 0
    n_done = 0
    worst = math.inf
    witnesses = []
    attempts = 0
    while n_done < samples and attempts < 100 * samples:
        attempts += 1
        s0, s1 = rng.uniform(0.0, table.perimeter, size=2)
        i0, t0 = table.arc_param_from_s(s0)
        i1, t1 = table.arc_param_from_s(s1)
        if i0 == i1:
            continue
        p0 = table.arcs[i0].ellipse.point(t0)
        p1 = table.arcs[i1].ellipse.point(t1)
        if not segment_crosses_polygon(p0, p1, table.core_polygon):
            continue
        n_done += 1
        ok = True
        margin = math.inf
        for i in (i0, i1):
            c, r = circles[i]
            hit, m = _segment_circle_intersects(p0, p1, c, r)
            ok = ok and hit
            margin = min(margin, m)
        if ok:
            n_pass += 1
        if margin < worst:
            worst = margin
            witnesses.append((tuple(p0), tuple(p1), float(margin), bool(ok)))
            witnesses = witnesses[-8:]

    premise = []
    premise_ok = True
    for (c, r), arc in zip(circles, table.arcs):
        flips = _circle_boundary_flips(table, c, r)
        arc_ok = flips == 2
        premise.append((flips, bool(arc_ok)))
        premise_ok = premise_ok and arc_ok
    frac = n_pass / n_done if n_done else math.nan
    return DefocusingReport(
        frac, n_done, float(worst), tuple(witnesses), premise_ok, tuple(premise)
    )


def _circle_boundary_flips(table, center, radius, samples=4096):
    """Number of table-boundary crossings of a circle.

    Flower tables are star-shaped about the core centroid, so a point is
    inside exactly when its distance from the centroid stays below the
    boundary distance in its direction (one exact ray/arc intersection per
    sample).  Two crossings mean the circle splits into one interior and one
    exterior sub-arc.
    """
    from . import kernels  # local import to avoid a cycle at module load

    arrs = table.kernel_arrays()
    o = table.core_centroid
    graze = table.tol  # the circle touches the boundary exactly at its tangency
    ang = np.linspace(0.0, TWO_PI, samples, endpoint=False)
    inside = np.empty(samples, dtype=bool)
    for k, t in enumerate(ang):
        px = center[0] + radius * math.cos(t)
        py = center[1] + radius * math.sin(t)
        dx, dy = px - o[0], py - o[1]
        rr = math.hypot(dx, dy)
        if rr == 0.0:
            inside[k] = True
            continue
        dx, dy = dx / rr, dy / rr
        _, _, tau = kernels.find_collision(
            *arrs[:12], float(o[0]), float(o[1]), dx, dy, 0.0
        )
        inside[k] = rr < tau - graze
    if not inside.any() or inside.all():
        return 0
    return int(np.sum(inside != np.roll(inside, 1)))


# ---------------------------------------------------------------------------
# String construction over a convex caustic
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StringCurve:
    """Closed C^1 chain of elliptic arcs traced by a taut loop around a caustic."""

    arcs: tuple
    caustic: np.ndarray
    rope_length: float

    @property
    def n_arcs(self):
        return len(self.arcs)

    def joint_tangent_mismatches(self):
        """Angle between the tangents of consecutive arcs at each joint."""
        out = []
        k = len(self.arcs)
        for i in range(k):
            a, b = self.arcs[i], self.arcs[(i + 1) % k]
            ta = a.ellipse.tangent(a.t_end)
            tb = b.ellipse.tangent(b.t_start)
            cross = abs(ta[0] * tb[1] - ta[1] * tb[0])
            dot = ta @ tb
            out.append(abs(math.atan2(cross, dot)))
        return np.array(out)

    def string_length_residual(self, point, arc_index=None):
        """(perimeter of hull(caustic + point)) - rope_length.

        The taut-loop definition says this vanishes for every curve point;
        the hull perimeter is computed directly, independent of the arc
        bookkeeping.
        """
        pts = np.vstack([self.caustic, np.asarray(point, dtype=float)])
        hull = _convex_hull(pts)
        per = sum(
            math.dist(hull[i], hull[(i + 1) % len(hull)]) for i in range(len(hull))
        )
        return per - self.rope_length


def _convex_hull(points):
    """Monotone-chain convex hull; returns CCW hull vertices."""
    pts = sorted(map(tuple, np.asarray(points, dtype=float)))
    if len(pts) <= 2:
        return np.array(pts)

    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and (
                (out[-1][0] - out[-2][0]) * (p[1] - out[-2][1])
                - (out[-1][1] - out[-2][1]) * (p[0] - out[-2][0])
            ) <= 0.0:
                out.pop()
            out.append(p)
        return out

    lower = half(pts)
    upper = half(reversed(pts))
    return np.array(lower[:-1] + upper[:-1])


def string_construction(caustic, rope_length):
    """Billiard boundary with the given convex polygon as a caustic.

    Uses the taut-loop construction: the curve is the locus of points P with
    perimeter(hull(caustic + P)) equal to rope_length.  The result is a
    closed C^1 chain of elliptic arcs, one per support regime (six for a
    triangle); a degenerate 2-gon caustic yields the single ellipse with foci
    at the segment endpoints.
    """
    v = np.asarray(caustic, dtype=float)
    m = len(v)
    if m < 2:
        raise InvalidParameterError("caustic needs at least 2 vertices")
    per = sum(math.dist(v[i], v[(i + 1) % m]) for i in range(m)) if m > 2 else (
        2.0 * math.dist(v[0], v[1])
    )
    if m == 2:
        seg = math.dist(v[0], v[1])
        if rope_length <= 2.0 * seg:
            raise InvalidParameterError("rope length must exceed the caustic length")
        a2 = rope_length - seg  # |PV0| + |PV1|
        e = Ellipse.from_foci(v[0], v[1], math.sqrt((0.5 * a2) ** 2 - (0.5 * seg) ** 2))
        arcs = (EllipticArc(e, 0.0, math.pi), EllipticArc(e, math.pi, TWO_PI))
        return StringCurve(arcs, v, rope_length)

    if rope_length <= per:
        raise InvalidParameterError("rope length must exceed the caustic perimeter")

    # convexity/CCW sanity via BasePolygon validation rules
    BasePolygon(v)

    edge_ellipses = []
    for i in range(m):
        f1, f2 = v[i], v[(i + 1) % m]
        two_a = rope_length - per + math.dist(f1, f2)
        cc = 0.5 * math.dist(f1, f2)
        edge_ellipses.append(
            Ellipse.from_foci(f1, f2, math.sqrt((0.5 * two_a) ** 2 - cc * cc))
        )
    vertex_ellipses = []
    for j in range(m):
        f1, f2 = v[(j - 1) % m], v[(j + 1) % m]
        two_a = (
            rope_length - per
            + math.dist(v[(j - 1) % m], v[j])
            + math.dist(v[j], v[(j + 1) % m])
        )
        cc = 0.5 * math.dist(f1, f2)
        if 0.5 * two_a <= cc:
            raise ConstructionError(f"vertex regime {j} degenerate")
        vertex_ellipses.append(
            Ellipse.from_foci(f1, f2, math.sqrt((0.5 * two_a) ** 2 - cc * cc))
        )

    centroid = polygon_area_centroid(v)
    arcs = []
    for i in range(m):
        j = (i + 1) % m
        e_edge = edge_ellipses[i]
        e_vert = vertex_ellipses[j]
        # joint between edge arc i and vertex arc j: on the ray from V_j along
        # (V_j - V_{j+1}); next joint on the ray from V_j along (V_j - V_{j-1})
        ray1 = _unit(v[j] - v[(j + 1) % m])
        ray2 = _unit(v[j] - v[(j - 1) % m])
        p_a, _ = _ray_ellipse_point(e_edge, v[j], ray1, i)
        p_b, _ = _ray_ellipse_point(e_vert, v[j], ray1, i)
        if math.dist(p_a, p_b) > 1e-7 * per:
            raise ClosureError("string regimes do not meet on their shared ray")
        p_c, _ = _ray_ellipse_point(e_vert, v[j], ray2, j)

        mid_edge = 0.5 * (v[i] + v[j])
        out_edge = mid_edge + (mid_edge - centroid)
        if i == 0:
            # starting joint of edge arc 0: on ray from V_0 along (V_0 - V_{m-1})
            ray0 = _unit(v[0] - v[m - 1])
            p_first, _ = _ray_ellipse_point(e_edge, v[0], ray0, 0)
        else:
            p_first = prev_end
        arcs.append(
            _arc_between(
                e_edge,
                e_edge.param_of(p_first),
                e_edge.param_of(p_a),
                out_edge,
            )
        )
        out_vert = v[j] + (v[j] - centroid)
        arcs.append(
            _arc_between(
                e_vert, e_vert.param_of(p_a), e_vert.param_of(p_c), out_vert
            )
        )
        prev_end = p_c
    return StringCurve(tuple(arcs), v, rope_length)
