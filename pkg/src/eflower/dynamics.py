"""Billiard flow on a flower table.

Collision detection against the elliptic arcs is exact (closed-form quadratic
in each ellipse's canonical frame); reflection is the elastic mirror law.
Phase states are kept in Birkhoff coordinates (cumulative boundary position s,
outgoing angle phi against the CCW tangent) with cached Cartesian data.  The
long-orbit loops live in `kernels`; this module prepares inputs, converts
outputs and offers the single-step map used by finite-difference probes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import kernels
from .geometry import FlowerTable, _norm_angle

TWO_PI = 2.0 * math.pi

# singular-outcome guards (see design notes in the module docstrings)
EPS_TAN = 1e-12          # cutoff on sin(phi)
EPS_CORNER = 1e-9        # angular distance to an arc endpoint
REL_TAU_MIN = 1e-9       # times table diameter: skip re-detecting the launch point

TERMINATION_NAMES = {
    kernels.COMPLETED: "completed",
    kernels.HIT_CORNER: "hit_corner",
    kernels.TANGENTIAL: "tangential",
    kernels.NUMERIC_FAILURE: "numeric_failure",
}


class SingularOrbitError(RuntimeError):
    """A single map step ran into a singular outcome."""

    def __init__(self, outcome, message=""):
        super().__init__(message or outcome)
        self.outcome = outcome


class NotIncomingError(ValueError):
    pass


@dataclass(frozen=True)
class PhaseState:
    """Outgoing collision state: boundary position plus cached Cartesian data."""

    arc_index: int
    t: float
    s: float
    phi: float
    point: np.ndarray
    direction: np.ndarray

    @property
    def cos_phi(self):
        return math.cos(self.phi)


def reflect(direction, normal):
    """Elastic reflection d' = d - 2(d.n)n for an incoming direction.

    `normal` must be the unit inward normal and `direction` must point
    against it (incoming).
    """
    d = np.asarray(direction, dtype=float)
    n = np.asarray(normal, dtype=float)
    dot = float(d @ n)
    if dot >= 0.0:
        raise NotIncomingError("direction is not incoming against the normal")
    r = d - 2.0 * dot * n
    return r / math.hypot(r[0], r[1])


def state_from_arc_param(table: FlowerTable, arc_index, t, phi):
    """Build a PhaseState from (arc, canonical parameter, outgoing angle)."""
    if not 0.0 < phi < math.pi:
        raise ValueError("phi must lie in (0, pi)")
    arc = table.arcs[arc_index]
    tt = _norm_angle(t)
    if tt < arc.t_start - 1e-12:
        tt += TWO_PI
    if not arc.t_start - 1e-9 <= tt <= arc.t_end + 1e-9:
        raise ValueError("parameter outside arc range")
    e = arc.ellipse
    p = e.point(tt)
    tx, ty = e.tangent(tt)
    c, s_ = math.cos(phi), math.sin(phi)
    d = np.array([c * tx - s_ * ty, s_ * tx + c * ty])
    return PhaseState(arc_index, tt, table.s_from_arc_param(arc_index, tt), phi, p, d)


def state_from_s_phi(table: FlowerTable, s, phi):
    """Build a PhaseState from Birkhoff coordinates (s, phi)."""
    i, t = table.arc_param_from_s(s)
    return state_from_arc_param(table, i, t, phi)


def state_from_point_direction(table: FlowerTable, point, direction):
    """PhaseState for a boundary point and an outgoing direction."""
    point = np.asarray(point, dtype=float)
    d = np.asarray(direction, dtype=float)
    d = d / math.hypot(d[0], d[1])
    best = None
    for i, arc in enumerate(table.arcs):
        t = arc.ellipse.param_of(point)
        if not arc.contains_param(t, tol=1e-9):
            continue
        p = arc.ellipse.point(t)
        err = math.dist(p, point)
        if best is None or err < best[2]:
            best = (i, t, err)
    if best is None or best[2] > 1e3 * table.tol:
        raise ValueError("point does not lie on the table boundary")
    i, t, _ = best
    tt = _norm_angle(t)
    if tt < table.arcs[i].t_start - 1e-12:
        tt += TWO_PI
    tx, ty = table.arcs[i].ellipse.tangent(tt)
    sphi = tx * d[1] - ty * d[0]
    cphi = tx * d[0] + ty * d[1]
    phi = math.atan2(sphi, cphi)
    if not 0.0 < phi < math.pi:
        raise ValueError("direction is not outgoing at this boundary point")
    return PhaseState(i, tt, table.s_from_arc_param(i, tt), phi,
                      table.arcs[i].ellipse.point(tt), d)


def random_states(table: FlowerTable, n, rng):
    """Sample n states from the invariant measure: s uniform, cos(phi) uniform."""
    ss = rng.uniform(0.0, table.perimeter, size=n)
    phis = np.arccos(rng.uniform(-1.0, 1.0, size=n))
    out = []
    for s, phi in zip(ss, phis):
        phi = min(max(phi, 1e-9), math.pi - 1e-9)
        out.append(state_from_s_phi(table, float(s), float(phi)))
    return out


@dataclass(frozen=True)
class CollisionResult:
    arc_index: int
    point: np.ndarray
    tau: float
    t: float


def next_collision(table: FlowerTable, point, direction):
    """First boundary hit of the ray from `point` along `direction`.

    Raises SingularOrbitError('hit_corner') when the hit parameter falls
    within the corner tolerance of an arc endpoint and
    SingularOrbitError('numeric_failure') when no root is found.
    """
    arrs = table.kernel_arrays()
    d = np.asarray(direction, dtype=float)
    d = d / math.hypot(d[0], d[1])
    arc, t, tau = kernels.find_collision(
        *arrs[:12], float(point[0]), float(point[1]), float(d[0]), float(d[1]),
        REL_TAU_MIN * table.diameter,
    )
    if arc < 0:
        raise SingularOrbitError("numeric_failure", "no collision found")
    a = table.arcs[arc]
    if t - a.t_start < EPS_CORNER or a.t_end - t < EPS_CORNER:
        raise SingularOrbitError("hit_corner", "ray hits an arc endpoint")
    return CollisionResult(arc, a.ellipse.point(t), tau, t)


def billiard_map(table: FlowerTable, state: PhaseState):
    """One free flight plus one reflection."""
    rec = trace_orbit(table, state, 1)
    if rec.termination != "completed" or rec.n_links < 1:
        raise SingularOrbitError(rec.termination)
    return rec.state(1)


class OrbitRecord:
    """Orbit of up to N reflections with per-link metadata.

    States are stored as parallel arrays (arc index, canonical parameter,
    boundary position s, angle phi, Cartesian point and direction); links
    carry the free path, the core-crossing flag and the winding increment
    about the core centroid.  `termination` explains why fewer than N links
    may be present.
    """

    def __init__(self, table, arc_index, t, s, phi, x, y, dx, dy,
                 tau, crosses_core, winding, termination, drift):
        self.table = table
        self.arc_index = arc_index
        self.t = t
        self.s = s
        self.phi = phi
        self.x = x
        self.y = y
        self.dx = dx
        self.dy = dy
        self.tau = tau
        self.crosses_core = crosses_core
        self.winding = winding
        self.termination = termination
        self.renormalization_drift = drift

    @property
    def n_states(self):
        return len(self.s)

    @property
    def n_links(self):
        return len(self.tau)

    def state(self, i):
        i = int(i)
        if i < 0:
            i += self.n_states
        return PhaseState(
            int(self.arc_index[i]), float(self.t[i]), float(self.s[i]),
            float(self.phi[i]),
            np.array([self.x[i], self.y[i]]),
            np.array([self.dx[i], self.dy[i]]),
        )

    @property
    def points(self):
        return np.stack([self.x, self.y], axis=1)

    def reversed_initial_state(self):
        """State that retraces this orbit backwards from its final point."""
        if self.n_links < 1:
            raise ValueError("need at least one link to reverse")
        p = np.array([self.x[-1], self.y[-1]])
        d = -np.array([self.dx[-2], self.dy[-2]])
        return state_from_point_direction(self.table, p, d)


def boundary_positions(table: FlowerTable, arc_index, t):
    """Vectorized cumulative boundary position for (arc, parameter) pairs."""
    arc_index = np.asarray(arc_index)
    t = np.asarray(t, dtype=float)
    s = np.empty(t.shape, dtype=float)
    for k in range(table.n_arcs):
        mask = arc_index == k
        if not mask.any():
            continue
        e = table.arcs[k].ellipse
        m = 1.0 - (e.b / e.a) ** 2
        base = special.ellipeinc(table.arcs[k].t_start + 0.5 * math.pi, m)
        s[mask] = table.cum_lengths[k] + e.a * (
            special.ellipeinc(t[mask] + 0.5 * math.pi, m) - base
        )
    return s


def trace_orbit(table: FlowerTable, initial: PhaseState, n: int):
    """Iterate the billiard map for up to n reflections from `initial`."""
    if n < 0:
        raise ValueError("n must be >= 0")
    arrs = table.kernel_arrays()
    arc = np.zeros(n + 1, dtype=np.int64)
    t = np.zeros(n + 1)
    x = np.zeros(n + 1)
    y = np.zeros(n + 1)
    dx = np.zeros(n + 1)
    dy = np.zeros(n + 1)
    phi = np.zeros(n + 1)
    tau = np.zeros(n)
    cross = np.zeros(n, dtype=np.int8)
    wind = np.zeros(n)
    arc[0] = initial.arc_index
    t[0] = initial.t
    x[0], y[0] = initial.point
    dx[0], dy[0] = initial.direction
    phi[0] = initial.phi
    if n == 0:
        status, n_done, drift = kernels.COMPLETED, 0, 0.0
    else:
        status, n_done, drift = kernels.trace_orbit_kernel(
            *arrs[:12], arrs[12], float(arrs[13][0]), float(arrs[13][1]),
            x[0], y[0], dx[0], dy[0],
            n, REL_TAU_MIN * table.diameter, EPS_CORNER, EPS_TAN,
            arc, t, x, y, dx, dy, phi, tau, cross, wind,
        )
    m = n_done
    s = boundary_positions(table, arc[: m + 1], t[: m + 1])
    s[0] = initial.s
    return OrbitRecord(
        table, arc[: m + 1], t[: m + 1], s, phi[: m + 1],
        x[: m + 1], y[: m + 1], dx[: m + 1], dy[: m + 1],
        tau[:m], cross[:m], wind[:m],
        TERMINATION_NAMES[status], drift,
    )


def continue_orbit(table: FlowerTable, record: OrbitRecord, n: int):
    """Trace n further reflections from the end of an existing record."""
    return trace_orbit(table, record.state(-1), n)


# ---------------------------------------------------------------------------
# tangent (Jacobi) propagation
# ---------------------------------------------------------------------------

def tangent_map_step(kappa, phi, tau):
    """One-link Jacobi propagator Reflect(kappa, phi) @ Flight(tau).

    kappa is the signed boundary curvature at the collision: negative for
    focusing walls seen from inside (all elliptic petals), positive for
    dispersing ones.  The product has unit determinant; the circle-diameter
    monodromy (parabolic, |trace| = 2) pins the sign convention.
    """
    sphi = math.sin(phi)
    if sphi <= EPS_TAN:
        raise SingularOrbitError("tangential", "sin(phi) below tangential cutoff")
    flight = np.array([[1.0, tau], [0.0, 1.0]])
    refl = np.array([[-1.0, 0.0], [-2.0 * kappa / sphi, -1.0]])
    return refl @ flight


def signed_curvature(table: FlowerTable, arc_index, t):
    """Signed curvature at a collision point (focusing arcs are negative)."""
    return -table.arcs[arc_index].ellipse.curvature(t)


def orbit_tangent_frames(record: OrbitRecord):
    """Per-link tangent frames along a traced orbit."""
    out = []
    for k in range(record.n_links):
        kap = signed_curvature(record.table, int(record.arc_index[k + 1]),
                               float(record.t[k + 1]))
        out.append(tangent_map_step(kap, float(record.phi[k + 1]),
                                    float(record.tau[k])))
    return out


# ---------------------------------------------------------------------------
# integrable-witness functional
# ---------------------------------------------------------------------------

def ellipse_chord_invariant(ellipse, point, direction):
    """Product of signed focal distances to the chord line through `point`.

    Conserved along orbits of the full-ellipse billiard: negative for chords
    separating the foci (core family), positive for chords leaving both foci
    on one side (caustic family), zero through a focus.
    """
    d = np.asarray(direction, dtype=float)
    d = d / math.hypot(d[0], d[1])
    p = np.asarray(point, dtype=float)
    vals = []
    for f in (ellipse.focus1, ellipse.focus2):
        w = np.asarray(f) - p
        vals.append(d[0] * w[1] - d[1] * w[0])
    return vals[0] * vals[1]


def orbit_chord_invariants(ellipse, record: OrbitRecord):
    """Chord invariant for every link of an orbit in a full-ellipse table."""
    n = record.n_links
    dx, dy = record.dx[:n], record.dy[:n]
    x, y = record.x[:n], record.y[:n]
    vals = []
    for f in (ellipse.focus1, ellipse.focus2):
        vals.append(dx * (f[1] - y) - dy * (f[0] - x))
    return vals[0] * vals[1]


# ---------------------------------------------------------------------------
# Birkhoff-coordinate probes
# ---------------------------------------------------------------------------

def birkhoff_step(table: FlowerTable, s, cos_phi):
    """One billiard-map step expressed in (s, cos phi) coordinates."""
    phi = math.acos(min(max(cos_phi, -1.0 + 1e-15), 1.0 - 1e-15))
    st = state_from_s_phi(table, s, phi)
    nxt = billiard_map(table, st)
    return nxt.s, math.cos(nxt.phi), nxt.arc_index


def birkhoff_jacobian(table: FlowerTable, s, cos_phi, step=1e-6):
    """Central-difference Jacobian determinant of the map in (s, cos phi).

    Returns (det, consistent) where `consistent` is False when the probe
    stencil straddles an arc joint (the map derivative jumps there).
    """
    per = table.perimeter

    def wrap(ds):
        return (ds + 0.5 * per) % per - 0.5 * per

    vals = {}
    arcs_hit = set()
    for es, ep in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        s1, c1, a1 = birkhoff_step(table, s + es * step, cos_phi + ep * step)
        vals[(es, ep)] = (s1, c1)
        arcs_hit.add(a1)
    ds_ds = wrap(vals[(1, 0)][0] - vals[(-1, 0)][0]) / (2 * step)
    dc_ds = (vals[(1, 0)][1] - vals[(-1, 0)][1]) / (2 * step)
    ds_dp = wrap(vals[(0, 1)][0] - vals[(0, -1)][0]) / (2 * step)
    dc_dp = (vals[(0, 1)][1] - vals[(0, -1)][1]) / (2 * step)
    det = ds_ds * dc_dp - dc_ds * ds_dp
    return det, len(arcs_hit) == 1
