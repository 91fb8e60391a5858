"""Orbit classification, stability, Lyapunov and correlation analysis.

Operates on traced orbit records: labels them as core / directional tracks,
estimates the largest Lyapunov exponent per collision with a bootstrap error,
locates the stable period-2 orbits between confocal petals, and fits
exponential-versus-power decay laws to autocorrelations of orbit observables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .dynamics import (
    EPS_CORNER,
    EPS_TAN,
    REL_TAU_MIN,
    TERMINATION_NAMES,
    OrbitRecord,
    PhaseState,
    billiard_map,
    next_collision,
    random_states,
    state_from_arc_param,
    state_from_s_phi,
    trace_orbit,
)
from .geometry import FlowerTable, segment_crosses_polygon

LABEL_CORE = "core"
LABEL_CW = "track_cw"
LABEL_CCW = "track_ccw"
LABEL_UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class OrbitClass:
    label: str
    crossing_fraction: float
    winding_consistent: bool
    total_winding: float
    n_links: int
    reason: str = ""


def classify_orbit(record: OrbitRecord, core_polygon=None, min_links=10):
    """Label an orbit record as core, directional track, or undetermined.

    A track label requires zero core-crossing links and a constant winding
    sign over the whole record; the core label requires every link to cross
    the core polygon.  Records that terminated before `min_links` links, or
    that show mixed evidence (near the separatrix of vertex-passing orbits),
    come back undetermined.
    """
    n = record.n_links
    if core_polygon is not None:
        cross = np.array(
            [
                segment_crosses_polygon(record.points[k], record.points[k + 1],
                                        core_polygon)
                for k in range(n)
            ],
            dtype=bool,
        )
    else:
        cross = record.crosses_core.astype(bool)
    wind = record.winding
    total = float(wind.sum())
    frac = float(cross.mean()) if n else math.nan
    signs = np.sign(wind)
    consistent = bool(n and signs[0] != 0.0 and (signs == signs[0]).all())
    if n < min_links:
        return OrbitClass(LABEL_UNDETERMINED, frac, consistent, total, n,
                          f"terminated after {n} links ({record.termination})")
    if cross.all():
        return OrbitClass(LABEL_CORE, 1.0, consistent, total, n)
    if not cross.any() and consistent:
        label = LABEL_CW if total < 0.0 else LABEL_CCW
        return OrbitClass(label, 0.0, True, total, n)
    return OrbitClass(LABEL_UNDETERMINED, frac, consistent, total, n,
                      "mixed crossing/winding evidence")


@dataclass(frozen=True)
class ComponentFractions:
    core: float
    cw: float
    ccw: float
    undetermined: float
    stderr: dict
    counts: dict
    samples: int
    n_bounces: int

    def as_dict(self):
        return {
            "core": self.core,
            "cw": self.cw,
            "ccw": self.ccw,
            "undetermined": self.undetermined,
        }


def component_measure_fraction(table: FlowerTable, samples, n_bounces=1000,
                               seed=0, min_links=10):
    """Fractions of the invariant measure in each orbit class.

    Initial conditions are drawn from the collision-map invariant measure
    (s uniform on boundary length, phi with density sin(phi)/2, i.e. cos phi
    uniform); each is traced for n_bounces and classified.
    """
    if samples < 1:
        raise ValueError("samples must be positive")
    rng = np.random.default_rng(seed)
    counts = {LABEL_CORE: 0, LABEL_CW: 0, LABEL_CCW: 0, LABEL_UNDETERMINED: 0}
    for st in random_states(table, samples, rng):
        rec = trace_orbit(table, st, n_bounces)
        counts[classify_orbit(rec, min_links=min_links).label] += 1
    fr = {k: v / samples for k, v in counts.items()}
    se = {k: math.sqrt(p * (1.0 - p) / samples) for k, p in fr.items()}
    return ComponentFractions(
        fr[LABEL_CORE], fr[LABEL_CW], fr[LABEL_CCW], fr[LABEL_UNDETERMINED],
        se, counts, samples, n_bounces,
    )


def sample_classified_states(table: FlowerTable, label, count, window=1000,
                             seed=0, max_attempts=None, min_links=10):
    """Initial states whose first `window` bounces classify as `label`."""
    rng = np.random.default_rng(seed)
    out = []
    attempts = 0
    cap = max_attempts or 200 * count
    want_tracks = label in (LABEL_CW, LABEL_CCW, "track")
    while len(out) < count and attempts < cap:
        attempts += 1
        st = random_states(table, 1, rng)[0]
        rec = trace_orbit(table, st, window)
        cls = classify_orbit(rec, min_links=min_links)
        ok = cls.label == label or (want_tracks and label == "track"
                                    and cls.label in (LABEL_CW, LABEL_CCW))
        if ok:
            out.append(st)
    if len(out) < count:
        raise RuntimeError(
            f"found only {len(out)}/{count} '{label}' states in {attempts} draws"
        )
    return out


# ---------------------------------------------------------------------------
# Lyapunov exponents
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LyapunovEstimate:
    lam: float
    n: int
    checkpoints: np.ndarray
    trace: np.ndarray
    stderr: float
    segment_means: np.ndarray
    terminated_early: bool
    termination: str


def lyapunov_exponent(table: FlowerTable, initial: PhaseState, n,
                      checkpoints=50, n_segments=20, bootstrap=500,
                      bootstrap_seed=0):
    """Largest Lyapunov exponent per collision by renormalized propagation.

    lambda = (1/N) sum log |frame_k v_k| with the Jacobi test vector v
    renormalized every step; `trace` holds the running estimate at the
    checkpoint steps and `stderr` is a bootstrap standard error over
    n_segments contiguous orbit segments.
    """
    if n < 1:
        raise ValueError("n must be positive")
    arrs = table.kernel_arrays()
    cp_steps = np.unique(
        np.linspace(1, n, num=min(checkpoints, n)).astype(np.int64)
    )
    out_cp = np.full(len(cp_steps), np.nan)
    seg_edges = np.linspace(0, n, n_segments + 1).astype(np.int64)
    out_seg = np.full(n_segments, np.nan)
    status, n_done, total = kernels.lyapunov_kernel(
        *arrs[:12],
        float(initial.point[0]), float(initial.point[1]),
        float(initial.direction[0]), float(initial.direction[1]),
        int(n), REL_TAU_MIN * table.diameter, EPS_CORNER, EPS_TAN,
        1.0, 0.0, cp_steps, out_cp, seg_edges, out_seg,
    )
    early = n_done < n
    lam = total / n_done if n_done else math.nan
    mask = cp_steps <= n_done
    trace = out_cp[mask] / cp_steps[mask]
    seg_lens = np.diff(seg_edges)
    seg_mask = ~np.isnan(out_seg)
    seg_means = out_seg[seg_mask] / seg_lens[seg_mask]
    if len(seg_means) >= 2:
        rng = np.random.default_rng(bootstrap_seed)
        idx = rng.integers(0, len(seg_means), size=(bootstrap, len(seg_means)))
        stderr = float(np.std(seg_means[idx].mean(axis=1), ddof=1))
    else:
        stderr = math.nan
    return LyapunovEstimate(
        float(lam), int(n_done), cp_steps[mask], trace, stderr, seg_means,
        early, TERMINATION_NAMES[status],
    )


# ---------------------------------------------------------------------------
# Period-2 orbits between confocal petals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Period2Orbit:
    arc_pair: tuple
    points: tuple
    chord_length: float
    monodromy_trace: float
    stability: str
    curvature_radii: tuple


def _stability_from_trace(tr, tol=1e-9):
    if abs(tr) < 2.0 - tol:
        return "elliptic"
    if abs(tr) > 2.0 + tol:
        return "hyperbolic"
    return "parabolic"


def two_mirror_trace(r1, r2, length):
    """Closed-form period-2 monodromy trace for two facing focusing mirrors.

    With g_i = 1 - length/r_i the trace is 4 g1 g2 - 2; |trace| < 2 (stable)
    iff 0 < g1 g2 < 1.
    """
    g1 = 1.0 - length / r1
    g2 = 1.0 - length / r2
    return 4.0 * g1 * g2 - 2.0


def find_period2_minor_axis_orbits(table: FlowerTable, verify_clear=True):
    """Period-2 chords joining minor-axis endpoints of confocal petal pairs.

    Confocality is decided on construction metadata (exact focus-index pairs)
    when available, exact float equality of focus coordinates otherwise.
    Candidates whose chord is blocked by another arc are dropped.
    """
    dropped = []
    groups = {}
    for i, arc in enumerate(table.arcs):
        if arc.focus_indices is not None:
            key = frozenset(arc.focus_indices)
        else:
            e = arc.ellipse
            key = (tuple(np.round(e.focus1, 15)), tuple(np.round(e.focus2, 15)))
            key = frozenset(key)
        groups.setdefault(key, []).append(i)
    out = []
    for key, idxs in groups.items():
        if len(idxs) < 2:
            continue
        for a_pos in range(len(idxs)):
            for b_pos in range(a_pos + 1, len(idxs)):
                i, j = idxs[a_pos], idxs[b_pos]
                res = _period2_for_pair(table, i, j, verify_clear)
                if isinstance(res, str):
                    dropped.append(((i, j), res))
                elif res is not None:
                    out.append(res)
    out.sort(key=lambda o: o.arc_pair)
    return out, dropped


def _period2_for_pair(table, i, j, verify_clear):
    ai, aj = table.arcs[i], table.arcs[j]
    pts = []
    for arc in (ai, aj):
        params = arc.minor_vertex_params()
        if not params:
            return "arc does not contain a minor-axis endpoint"
        pts.append([arc.ellipse.point(t) for t in params])
    best = None
    for pi in pts[0]:
        for pj in pts[1]:
            d = math.dist(pi, pj)
            if d < 1e3 * table.tol:
                continue
            if best is None or d < best[2]:
                best = (pi, pj, d)
    if best is None:
        return "minor-axis endpoints coincide"
    pi, pj, length = best
    # the chord must run along the shared minor axis
    axis = ai.ellipse._minor_dir()
    chord = (np.asarray(pj) - np.asarray(pi)) / length
    if abs(chord[0] * axis[1] - chord[1] * axis[0]) > 1e-7:
        return "endpoints do not face each other along the minor axis"
    if verify_clear:
        try:
            hit = next_collision(table, pi, chord)
        except Exception as exc:  # corner/numeric outcomes block the chord
            return f"chord blocked ({exc})"
        if hit.arc_index != j or math.dist(hit.point, pj) > 1e3 * table.tol:
            return "chord blocked by another arc"
    r1 = ai.ellipse.a ** 2 / ai.ellipse.b
    r2 = aj.ellipse.a ** 2 / aj.ellipse.b
    tr = two_mirror_trace(r1, r2, length)
    return Period2Orbit(
        (i, j), (tuple(pi), tuple(pj)), float(length), float(tr),
        _stability_from_trace(tr), (float(r1), float(r2)),
    )


def finite_difference_monodromy_trace(table, orbit: Period2Orbit, h=1e-7):
    """Trace of the 2-bounce return map differentiated numerically.

    Central differences of the billiard map in (s, cos phi) around the
    period-2 point; conjugation-invariant, so the trace is comparable with
    the Jacobi-frame product.
    """
    pi = np.asarray(orbit.points[0])
    i = orbit.arc_pair[0]
    t = table.arcs[i].ellipse.param_of(pi)
    st0 = state_from_arc_param(table, i, t, 0.5 * math.pi)
    s0, c0 = st0.s, 0.0
    per = table.perimeter

    def f(s, c):
        st = state_from_s_phi(table, s, math.acos(max(min(c, 1.0), -1.0)))
        st = billiard_map(table, billiard_map(table, st))
        return st.s, math.cos(st.phi)

    def wrap(ds):
        return (ds + 0.5 * per) % per - 0.5 * per

    sp, cp = f(s0 + h, c0)
    sm, cm = f(s0 - h, c0)
    j11 = wrap(sp - sm) / (2 * h)
    j21 = (cp - cm) / (2 * h)
    sp, cp = f(s0, c0 + h)
    sm, cm = f(s0, c0 - h)
    j12 = wrap(sp - sm) / (2 * h)
    j22 = (cp - cm) / (2 * h)
    return j11 + j22


# ---------------------------------------------------------------------------
# Correlation decay
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DecayFit:
    lags: np.ndarray
    acf: np.ndarray
    noise_floor: float
    used_lags: np.ndarray
    exp_rate: float
    exp_residual: float
    power_exponent: float
    power_residual: float
    verdict: str


def autocorrelation(series, max_lag):
    """Normalized autocovariance C(k), k = 0..max_lag (FFT-based)."""
    x = np.asarray(series, dtype=float)
    n = len(x)
    if n < 2:
        raise ValueError("series too short")
    z = x - x.mean()
    var = float(z @ z) / n
    if var == 0.0:
        return np.concatenate([[1.0], np.ones(max_lag)])
    nfft = 1 << int(math.ceil(math.log2(2 * n)))
    f = np.fft.rfft(z, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[: max_lag + 1] / n
    return acov / acov[0]


def fit_decay(acf, n_eff, margin=2.0, min_lags=5):
    """Compare exponential and power-law fits of an autocorrelation.

    Fits log|C| against k (exponential) and against log k (power) over the
    lags where |C(k)| stays above the noise floor 3/sqrt(n_eff); the verdict
    goes to the law whose mean-square residual wins by `margin`, otherwise
    inconclusive.
    """
    acf = np.asarray(acf, dtype=float)
    lags = np.arange(len(acf))
    floor = 3.0 / math.sqrt(max(n_eff, 1))
    usable = (lags >= 1) & (np.abs(acf) > floor)
    # decay laws are fitted on the initial coherent stretch: stop at the
    # first lag that drops below the floor
    below = np.nonzero(~usable & (lags >= 1))[0]
    if len(below):
        usable &= lags < below[0]
    used = lags[usable]
    nan = math.nan
    if len(used) < min_lags:
        return DecayFit(lags, acf, floor, used, nan, nan, nan, nan,
                        "inconclusive")
    y = np.log(np.abs(acf[used]))
    # exponential: log|C| = a - rate * k
    A = np.stack([np.ones(len(used)), used.astype(float)], axis=1)
    coef, res_e = _lstsq_residual(A, y)
    rate = -coef[1]
    # power: log|C| = a + p * log k
    B = np.stack([np.ones(len(used)), np.log(used.astype(float))], axis=1)
    coefp, res_p = _lstsq_residual(B, y)
    expo = coefp[1]
    if res_e * margin < res_p:
        verdict = "exponential"
    elif res_p * margin < res_e:
        verdict = "power"
    else:
        verdict = "inconclusive"
    return DecayFit(lags, acf, floor, used, float(rate), float(res_e),
                    float(expo), float(res_p), verdict)


def _lstsq_residual(A, y):
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    r = y - A @ coef
    return coef, float(np.mean(r * r))


def autocorrelation_decay(series, max_lag, margin=2.0, min_lags=5):
    """Estimate C(k) for a series and fit its decay law."""
    series = np.asarray(series, dtype=float)
    if len(series) < 10 * max_lag:
        raise ValueError("series length must be at least 10 * max_lag")
    acf = autocorrelation(series, max_lag)
    return fit_decay(acf, len(series), margin=margin, min_lags=min_lags)


# ---------------------------------------------------------------------------
# Phase portraits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PortraitPoint:
    orbit_id: int
    s: np.ndarray
    cos_phi: np.ndarray
    label: str


def phase_portrait(table: FlowerTable, initials, n_bounces, min_links=10):
    """Poincare-section data: (s, cos phi) clouds tagged with orbit class."""
    out = []
    for k, st in enumerate(initials):
        rec = trace_orbit(table, st, n_bounces)
        cls = classify_orbit(rec, min_links=min_links)
        out.append(PortraitPoint(k, rec.s.copy(), np.cos(rec.phi), cls.label))
    return out


def occupancy_report(table: FlowerTable, record: OrbitRecord, grid=(200, 200)):
    """Resolution-qualified filling check for a (chaotic) orbit record.

    Grid cells over (s, cos phi) are 'allowed' when the chord launched from
    the cell center crosses the core polygon; returns the fraction of allowed
    cells the record visits plus a chi-square statistic of the visit counts
    against the invariant measure restricted to the visited band (uniform in
    (s, cos phi)).
    """
    gs, gp = grid
    s_edges = np.linspace(0.0, table.perimeter, gs + 1)
    p_edges = np.linspace(-1.0, 1.0, gp + 1)
    counts, *_ = np.histogram2d(record.s % table.perimeter, np.cos(record.phi),
                                bins=(s_edges, p_edges))
    allowed = np.zeros((gs, gp), dtype=bool)
    for a in range(gs):
        s_mid = 0.5 * (s_edges[a] + s_edges[a + 1])
        i, t = table.arc_param_from_s(float(s_mid))
        arc = table.arcs[i]
        p0 = arc.ellipse.point(t)
        tx, ty = arc.ellipse.tangent(t)
        for b in range(gp):
            phi = math.acos(0.5 * (p_edges[b] + p_edges[b + 1]))
            c, s_ = math.cos(phi), math.sin(phi)
            d = (c * tx - s_ * ty, s_ * tx + c * ty)
            try:
                hit = next_collision(table, p0, np.array(d))
            except Exception:
                continue
            if table.core_polygon is not None and segment_crosses_polygon(
                p0, hit.point, table.core_polygon
            ):
                allowed[a, b] = True
    visited = counts > 0
    n_allowed = int(allowed.sum())
    frac = float((visited & allowed).sum() / n_allowed) if n_allowed else math.nan
    vis_counts = counts[visited]
    if len(vis_counts) > 1:
        expected = vis_counts.mean()
        chi2 = float(((vis_counts - expected) ** 2 / expected).sum())
    else:
        chi2 = math.nan
    return {
        "grid": grid,
        "allowed_cells": n_allowed,
        "visited_allowed_fraction": frac,
        "visited_cells": int(visited.sum()),
        "chi_square_visited": chi2,
    }
