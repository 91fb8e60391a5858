"""Hot inner loops of the billiard map.

Every function here is written in a scalar, loop-heavy style that compiles
under numba's nopython mode and also runs unchanged as plain Python/numpy.
The numba path is the default; setting the environment variable
EFLOWER_NUMBA=0 selects the pure-numpy fallback (see benchmarks/bench_kernels.py
for a timing comparison).  Identical inputs give bit-identical orbit records
within either backend; across backends the transcendental calls can differ by
an ulp, so long chaotic orbits agree only statistically.
"""

import math
import os

TWO_PI = 2.0 * math.pi

# termination codes shared with the dynamics layer
COMPLETED = 0
HIT_CORNER = 1
TANGENTIAL = 2
NUMERIC_FAILURE = 3


def numba_enabled():
    flag = os.environ.get("EFLOWER_NUMBA", "1").strip().lower()
    if flag in ("0", "false", "no", "off"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def find_collision(cx, cy, cr, sr, aa, bb, t0, t1,
                   bxmin, bxmax, bymin, bymax,
                   px, py, dx, dy, tau_min):
    """Earliest hit of the ray (px,py)+tau*(dx,dy) on any arc, tau > tau_min.

    Returns (arc_index, t_param, tau); arc_index is -1 when nothing is hit.
    """
    best_arc = -1
    best_t = 0.0
    best_tau = 1.0e300
    n = cx.shape[0]
    for i in range(n):
        # conservative slab test against the arc bounding box
        tlo = -1.0e300
        thi = 1.0e300
        if dx != 0.0:
            u1 = (bxmin[i] - px) / dx
            u2 = (bxmax[i] - px) / dx
            if u1 > u2:
                u1, u2 = u2, u1
            if u1 > tlo:
                tlo = u1
            if u2 < thi:
                thi = u2
        elif px < bxmin[i] or px > bxmax[i]:
            continue
        if dy != 0.0:
            u1 = (bymin[i] - py) / dy
            u2 = (bymax[i] - py) / dy
            if u1 > u2:
                u1, u2 = u2, u1
            if u1 > tlo:
                tlo = u1
            if u2 < thi:
                thi = u2
        elif py < bymin[i] or py > bymax[i]:
            continue
        if thi < tlo or thi < tau_min or tlo > best_tau:
            continue

        rx = px - cx[i]
        ry = py - cy[i]
        qx = cr[i] * rx + sr[i] * ry
        qy = -sr[i] * rx + cr[i] * ry
        ex = cr[i] * dx + sr[i] * dy
        ey = -sr[i] * dx + cr[i] * dy
        ia = 1.0 / aa[i]
        ib = 1.0 / bb[i]
        A = (ex * ia) * (ex * ia) + (ey * ib) * (ey * ib)
        B = 2.0 * (qx * ex * ia * ia + qy * ey * ib * ib)
        C = (qx * ia) * (qx * ia) + (qy * ib) * (qy * ib) - 1.0
        disc = B * B - 4.0 * A * C
        if disc < 0.0 or A == 0.0:
            continue
        sq = math.sqrt(disc)
        if B >= 0.0:
            qq = -0.5 * (B + sq)
        else:
            qq = -0.5 * (B - sq)
        for which in range(2):
            if which == 0:
                tau = qq / A
            else:
                if qq == 0.0:
                    continue
                tau = C / qq
            if tau <= tau_min or tau >= best_tau:
                continue
            hx = (qx + tau * ex) * ia
            hy = (qy + tau * ey) * ib
            t = math.atan2(hy, hx)
            if t < 0.0:
                t += TWO_PI
            tt = t
            if tt < t0[i]:
                tt += TWO_PI
            if tt > t1[i]:
                continue
            best_arc = i
            best_t = tt
            best_tau = tau
    return best_arc, best_t, best_tau


def segment_crosses(core, px, py, qx, qy):
    """Does segment (p,q) meet the convex polygon `core` ((m,2), m >= 2)?"""
    m = core.shape[0]
    if m == 0:
        return False
    if m >= 3:
        inside_p = True
        inside_q = True
        for i in range(m):
            ax = core[i, 0]
            ay = core[i, 1]
            j = i + 1
            if j == m:
                j = 0
            bx = core[j, 0]
            by = core[j, 1]
            if (bx - ax) * (py - ay) - (by - ay) * (px - ax) < 0.0:
                inside_p = False
            if (bx - ax) * (qy - ay) - (by - ay) * (qx - ax) < 0.0:
                inside_q = False
        if inside_p or inside_q:
            return True
    rx = qx - px
    ry = qy - py
    n_edges = m if m >= 3 else 1
    for i in range(n_edges):
        ax = core[i, 0]
        ay = core[i, 1]
        j = i + 1
        if j == m:
            j = 0
        sx = core[j, 0] - ax
        sy = core[j, 1] - ay
        denom = rx * sy - ry * sx
        if denom == 0.0:
            continue
        wx = ax - px
        wy = ay - py
        t = (wx * sy - wy * sx) / denom
        u = (wx * ry - wy * rx) / denom
        if 0.0 <= t <= 1.0 and 0.0 <= u <= 1.0:
            return True
    return False


def trace_orbit_kernel(cx, cy, cr, sr, aa, bb, t0, t1,
                       bxmin, bxmax, bymin, bymax,
                       core, ccx, ccy,
                       x0, y0, dx0, dy0,
                       nmax, tau_min, eps_corner, eps_tan,
                       out_arc, out_t, out_x, out_y, out_dx, out_dy, out_phi,
                       out_tau, out_cross, out_wind):
    """Iterate the billiard map for up to nmax reflections.

    The caller fills slot 0 of the state arrays with the initial state; this
    fills slots 1..n and the link arrays 0..n-1.  Returns (status, n_links,
    renormalization_drift).
    """
    px = x0
    py = y0
    dx = dx0
    dy = dy0
    drift = 0.0
    status = COMPLETED
    n_done = 0
    for step in range(nmax):
        arc, t, tau = find_collision(cx, cy, cr, sr, aa, bb, t0, t1,
                                     bxmin, bxmax, bymin, bymax,
                                     px, py, dx, dy, tau_min)
        if arc < 0:
            status = NUMERIC_FAILURE
            break
        if t - t0[arc] < eps_corner or t1[arc] - t < eps_corner:
            status = HIT_CORNER
            break
        # hit point and local frame (canonical -> world)
        tc = math.cos(t)
        ts = math.sin(t)
        hx_c = aa[arc] * tc
        hy_c = bb[arc] * ts
        hx = cx[arc] + cr[arc] * hx_c - sr[arc] * hy_c
        hy = cy[arc] + sr[arc] * hx_c + cr[arc] * hy_c
        # CCW tangent
        ux_c = -aa[arc] * ts
        uy_c = bb[arc] * tc
        ux = cr[arc] * ux_c - sr[arc] * uy_c
        uy = sr[arc] * ux_c + cr[arc] * uy_c
        un = math.sqrt(ux * ux + uy * uy)
        ux /= un
        uy /= un
        # inward normal = left of CCW tangent
        nx = -uy
        ny = ux
        dot = dx * nx + dy * ny
        rdx = dx - 2.0 * dot * nx
        rdy = dy - 2.0 * dot * ny
        nrm = math.sqrt(rdx * rdx + rdy * rdy)
        d = abs(1.0 - nrm)
        if d > drift:
            drift = d
        rdx /= nrm
        rdy /= nrm
        sphi = ux * rdy - uy * rdx
        cphi = ux * rdx + uy * rdy
        if sphi <= eps_tan:
            status = TANGENTIAL
            break
        phi = math.atan2(sphi, cphi)

        # link metadata
        crossed = segment_crosses(core, px, py, hx, hy)
        v0x = px - ccx
        v0y = py - ccy
        v1x = hx - ccx
        v1y = hy - ccy
        wind = math.atan2(v0x * v1y - v0y * v1x, v0x * v1x + v0y * v1y)

        out_tau[step] = tau
        out_cross[step] = 1 if crossed else 0
        out_wind[step] = wind
        out_arc[step + 1] = arc
        out_t[step + 1] = t
        out_x[step + 1] = hx
        out_y[step + 1] = hy
        out_dx[step + 1] = rdx
        out_dy[step + 1] = rdy
        out_phi[step + 1] = phi
        n_done = step + 1
        px = hx
        py = hy
        dx = rdx
        dy = rdy
    return status, n_done, drift


def lyapunov_kernel(cx, cy, cr, sr, aa, bb, t0, t1,
                    bxmin, bxmax, bymin, bymax,
                    x0, y0, dx0, dy0,
                    nmax, tau_min, eps_corner, eps_tan,
                    v0, v1,
                    cp_steps, out_cp, seg_edges, out_seg):
    """Accumulate log expansion of a Jacobi tangent vector along an orbit.

    v = (transverse displacement, transverse velocity) is propagated through
    Flight(tau) then Reflect(kappa, phi) at each collision, renormalized every
    step; the running sum of log norms divided by the step count estimates the
    largest Lyapunov exponent per collision.  Partial sums are recorded at
    cp_steps; per-segment sums between seg_edges feed the bootstrap error.
    Returns (status, n_done, total_log_sum).
    """
    px = x0
    py = y0
    dx = dx0
    dy = dy0
    status = COMPLETED
    n_done = 0
    total = 0.0
    cp_i = 0
    seg_i = 0
    seg_acc = 0.0
    for step in range(nmax):
        arc, t, tau = find_collision(cx, cy, cr, sr, aa, bb, t0, t1,
                                     bxmin, bxmax, bymin, bymax,
                                     px, py, dx, dy, tau_min)
        if arc < 0:
            status = NUMERIC_FAILURE
            break
        if t - t0[arc] < eps_corner or t1[arc] - t < eps_corner:
            status = HIT_CORNER
            break
        tc = math.cos(t)
        ts = math.sin(t)
        hx = cx[arc] + cr[arc] * (aa[arc] * tc) - sr[arc] * (bb[arc] * ts)
        hy = cy[arc] + sr[arc] * (aa[arc] * tc) + cr[arc] * (bb[arc] * ts)
        ux = cr[arc] * (-aa[arc] * ts) - sr[arc] * (bb[arc] * tc)
        uy = sr[arc] * (-aa[arc] * ts) + cr[arc] * (bb[arc] * tc)
        un = math.sqrt(ux * ux + uy * uy)
        ux /= un
        uy /= un
        nx = -uy
        ny = ux
        dot = dx * nx + dy * ny
        rdx = dx - 2.0 * dot * nx
        rdy = dy - 2.0 * dot * ny
        nrm = math.sqrt(rdx * rdx + rdy * rdy)
        rdx /= nrm
        rdy /= nrm
        sphi = ux * rdy - uy * rdx
        if sphi <= eps_tan:
            status = TANGENTIAL
            break

        # signed curvature: focusing seen from inside is negative
        s2 = aa[arc] * ts * (aa[arc] * ts) + bb[arc] * tc * (bb[arc] * tc)
        kappa = -aa[arc] * bb[arc] / (s2 * math.sqrt(s2))

        # v <- Reflect(kappa, phi) @ Flight(tau) @ v
        w0 = v0 + tau * v1
        w1 = v1
        r0 = -w0
        r1 = -(2.0 * kappa / sphi) * w0 - w1
        vn = math.sqrt(r0 * r0 + r1 * r1)
        if vn == 0.0 or not math.isfinite(vn):
            status = NUMERIC_FAILURE
            break
        total += math.log(vn)
        seg_acc += math.log(vn)
        v0 = r0 / vn
        v1 = r1 / vn
        n_done = step + 1
        if cp_i < cp_steps.shape[0] and n_done == cp_steps[cp_i]:
            out_cp[cp_i] = total
            cp_i += 1
        if seg_i < out_seg.shape[0] and n_done == seg_edges[seg_i + 1]:
            out_seg[seg_i] = seg_acc
            seg_acc = 0.0
            seg_i += 1
        px = hx
        py = hy
        dx = rdx
        dy = rdy
    return status, n_done, total


_JITTED = False


def _jit_all():
    """Compile the kernels with numba, rebinding the module globals."""
    global find_collision, segment_crosses, trace_orbit_kernel, lyapunov_kernel
    global _JITTED
    if _JITTED:
        return
    from numba import njit

    find_collision = njit(cache=True)(find_collision)
    segment_crosses = njit(cache=True)(segment_crosses)
    trace_orbit_kernel = njit(cache=True)(trace_orbit_kernel)
    lyapunov_kernel = njit(cache=True)(lyapunov_kernel)
    _JITTED = True


KERNEL_BACKEND = "numba" if numba_enabled() else "numpy"
if KERNEL_BACKEND == "numba":
    _jit_all()
