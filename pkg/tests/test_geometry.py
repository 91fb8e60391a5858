import math

import numpy as np
import pytest

from eflower import geometry as geom
from eflower.geometry import (
    ConstructionError,
    DegenerateEllipseError,
    Ellipse,
    EllipticArc,
    FlowerTable,
    InvalidParameterError,
    build_sol_flower,
    diagonal_center_distance,
    ellipse_from_foci,
    is_absolutely_focusing,
    make_regular_polygon,
    max_osculating_radius,
    maximal_osculating_circle,
    small_diagonal,
    string_construction,
    validate_structural,
    zone_partition,
)


class TestRegularPolygon:
    def test_square_circumradius(self):
        sq = make_regular_polygon(4, 2.0)
        assert np.hypot(*sq.vertices[0]) == pytest.approx(math.sqrt(2), rel=1e-14)

    def test_triangle_circumradius(self):
        tri = make_regular_polygon(3, 1.0)
        assert np.hypot(*tri.vertices[0]) == pytest.approx(1 / math.sqrt(3), rel=1e-14)

    def test_pentagon_side_lengths(self):
        # distance oracle over all consecutive vertex pairs
        p = make_regular_polygon(5, 1.0)
        for i in range(5):
            a, b = p.side(i)
            assert math.dist(a, b) == pytest.approx(1.0, abs=1e-14)

    def test_ccw_and_first_vertex_on_x_axis(self):
        p = make_regular_polygon(7, 0.5, center=(2.0, -1.0))
        assert p.vertices[0][1] == pytest.approx(-1.0, abs=1e-15)
        assert p.vertices[0][0] > 2.0

    @pytest.mark.parametrize("n,l", [(2, 1.0), (3, 0.0), (5, -1.0)])
    def test_invalid_parameters(self, n, l):
        with pytest.raises(InvalidParameterError):
            make_regular_polygon(n, l)

    def test_nonconvex_rejected(self):
        verts = np.array([[0, 0], [2, 0], [1, 0.2], [1, 2.0]], float)
        with pytest.raises(InvalidParameterError):
            geom.BasePolygon(verts)


class TestSmallDiagonal:
    def test_pentagon_m2_length(self):
        # oracle: 2*l*cos(pi/n), cross-checked by coordinate distance
        p = make_regular_polygon(5, 1.0)
        a, b = small_diagonal(p, 0, 2)
        assert math.dist(a, b) == pytest.approx(2 * math.cos(math.pi / 5), rel=1e-14)

    def test_square_m1_is_side(self):
        p = make_regular_polygon(4, 1.0)
        a, b = small_diagonal(p, 2, 1)
        assert math.dist(a, b) == pytest.approx(1.0, rel=1e-14)

    def test_hexagon_m2(self):
        p = make_regular_polygon(6, 1.0)
        a, b = small_diagonal(p, 1, 2)
        assert math.dist(a, b) == pytest.approx(math.sqrt(3), rel=1e-14)

    def test_layer_out_of_range(self):
        p = make_regular_polygon(5, 1.0)
        for m in (0, 3, 5):
            with pytest.raises(InvalidParameterError):
                small_diagonal(p, 0, m)

    def test_triangle_allows_m1(self):
        p = make_regular_polygon(3, 1.0)
        a, b = small_diagonal(p, 0, 1)
        assert math.dist(a, b) == pytest.approx(1.0, rel=1e-14)


class TestEllipseFromFoci:
    def test_3_4_5(self):
        e = ellipse_from_foci((-4, 0), (4, 0), 3)
        assert e.a == pytest.approx(5.0, rel=1e-15)
        assert e.c == pytest.approx(4.0, rel=1e-15)

    def test_vertical_major_axis(self):
        e = ellipse_from_foci((0, 0), (0, 2), 1)
        assert e.a == pytest.approx(math.sqrt(2), rel=1e-15)
        assert e.rotation == pytest.approx(math.pi / 2, abs=1e-15)

    def test_focal_sum_on_sampled_boundary(self):
        p = make_regular_polygon(5, 1.0)
        f1, f2 = small_diagonal(p, 0, 2)
        e = ellipse_from_foci(f1, f2, 10.0)
        for t in np.linspace(0, 2 * math.pi, 100, endpoint=False):
            pt = e.point(t)
            assert e.focal_sum(pt) == pytest.approx(2 * e.a, rel=1e-12)

    def test_coincident_foci(self):
        with pytest.raises(DegenerateEllipseError):
            ellipse_from_foci((1, 1), (1, 1), 2)


def curvature_radius_fd(e, t, h=1e-3):
    """Radius of curvature by central finite differences (Richardson step)."""

    def kappa(hh):
        p0 = e.point(t - hh)
        p1 = e.point(t)
        p2 = e.point(t + hh)
        d1 = (p2 - p0) / (2 * hh)
        d2 = (p2 - 2 * p1 + p0) / (hh * hh)
        num = abs(d1[0] * d2[1] - d1[1] * d2[0])
        return num / (d1[0] ** 2 + d1[1] ** 2) ** 1.5

    k = (4.0 * kappa(h / 2) - kappa(h)) / 3.0
    return 1.0 / k


class TestOsculating:
    def test_max_radius_5_3(self):
        e = Ellipse((0, 0), 5, 3)
        assert max_osculating_radius(e) == pytest.approx(25 / 3, rel=1e-15)

    def test_circle_case(self):
        e = Ellipse((0, 0), 2.5, 2.5)
        assert max_osculating_radius(e) == pytest.approx(2.5, rel=1e-15)

    def test_sqrt2_case_fd_oracle(self):
        e = Ellipse((0, 0), math.sqrt(2), 1)
        assert max_osculating_radius(e) == pytest.approx(2.0, rel=1e-12)
        # minor-axis vertex sits at t = pi/2
        assert curvature_radius_fd(e, math.pi / 2) == pytest.approx(2.0, rel=1e-6)

    def test_fd_oracle_sweep(self):
        for a in np.linspace(1.1, 10.0, 12):
            e = Ellipse((0.3, -0.2), a, 1.0, rotation=0.37)
            assert max_osculating_radius(e) == pytest.approx(
                curvature_radius_fd(e, math.pi / 2), rel=1e-6
            )

    def test_unit_circle_is_itself(self):
        e = Ellipse((1.0, 2.0), 1, 1)
        c, r = maximal_osculating_circle(e, "+")
        assert r == pytest.approx(1.0)
        assert np.allclose(c, e.center, atol=1e-15)

    def test_center_offset_5_3(self):
        e = Ellipse((0, 0), 5, 3)
        c, r = maximal_osculating_circle(e, "+")
        tangency = e.point(math.pi / 2)
        assert r == pytest.approx(25 / 3, rel=1e-15)
        assert math.dist(c, tangency) == pytest.approx(25 / 3, rel=1e-14)
        # center lies 16/3 beyond the ellipse center on the minor axis
        assert math.dist(c, e.center) == pytest.approx(16 / 3, rel=1e-14)

    def test_second_order_contact(self):
        # circle and ellipse agree to curvature order at the tangency point
        e = Ellipse((0, 0), 5, 3, rotation=0.4)
        c, r = maximal_osculating_circle(e, "-")
        for dt in (1e-2, 5e-3):
            p = e.point(1.5 * math.pi + dt)
            assert abs(math.dist(p, c) - r) < 10 * dt ** 4 * r


class TestDiagonalCenterDistance:
    def test_pentagon(self):
        assert diagonal_center_distance(5, 1.0) == pytest.approx(
            math.cos(math.radians(72)) / (2 * math.sin(math.radians(36))), rel=1e-15
        )
        assert diagonal_center_distance(5, 1.0) == pytest.approx(0.262866, abs=1e-6)

    def test_hexagon(self):
        assert diagonal_center_distance(6, 1.0) == pytest.approx(0.5, rel=1e-14)

    def test_coordinate_oracle_sweep(self):
        # midpoint of the m=2 diagonal against the centroid, n = 5..12
        for n in range(5, 13):
            base = make_regular_polygon(n, 1.0)
            mid = 0.5 * (base.vertices[0] + base.vertices[2])
            d = math.dist(mid, base.centroid)
            assert diagonal_center_distance(n, 1.0) == pytest.approx(d, rel=1e-12)


class TestSolFlower:
    def test_wild_rose_petal_count(self, wild_rose_large):
        assert wild_rose_large.n_arcs == 5
        assert wild_rose_large.kind == "sol"

    def test_narcissus_petal_count(self, narcissus):
        assert narcissus.n_arcs == 6

    def test_endpoints_on_rays_and_closed(self, wild_rose_large, pentagon):
        for k, arc in enumerate(wild_rose_large.arcs):
            o, d = pentagon.midpoint_ray((k - 1) % 5)
            w = arc.start_point - o
            assert abs(w[0] * d[1] - w[1] * d[0]) < 1e-9
        assert wild_rose_large.max_chain_gap < 1e-9

    def test_foci_at_vertices(self, wild_rose, pentagon):
        for arc in wild_rose.arcs:
            for f in (arc.ellipse.focus1, arc.ellipse.focus2):
                assert min(math.dist(f, v) for v in pentagon.vertices) < 1e-12

    def test_focal_sum_on_all_arcs(self, wild_rose, corner_triangle):
        for table in (wild_rose, corner_triangle):
            for arc in table.arcs:
                e = arc.ellipse
                for p in arc.sample(50):
                    assert abs(e.focal_sum(p) - 2 * e.a) < 1e-9 * e.a

    def test_too_small_b_fails_with_side_index(self, pentagon):
        with pytest.raises(ConstructionError) as exc:
            build_sol_flower(pentagon, 0.2)
        assert exc.value.side_index is not None

    def test_total_boundary_turning(self, wild_rose):
        # sum of tangent-angle sweeps plus exterior corner turns equals 2*pi
        total = 0.0
        arcs = wild_rose.arcs
        k = len(arcs)
        for i, arc in enumerate(arcs):
            ts = np.linspace(arc.t_start, arc.t_end, 2000)
            angs = np.array([math.atan2(*arc.ellipse.tangent(t)[::-1]) for t in ts])
            total += float(np.unwrap(angs)[-1] - np.unwrap(angs)[0])
            nxt = arcs[(i + 1) % k]
            ta = arc.ellipse.tangent(arc.t_end)
            tb = nxt.ellipse.tangent(nxt.t_start)
            total += math.atan2(ta[0] * tb[1] - ta[1] * tb[0], ta @ tb)
        assert total == pytest.approx(2 * math.pi, abs=1e-9)


class TestCornerFlower:
    def test_triangle_six_arcs_closed(self, corner_triangle):
        assert corner_triangle.n_arcs == 6
        assert corner_triangle.max_chain_gap < 1e-12
        assert corner_triangle.kind == "structural"

    def test_square_eight_arcs(self, corner_square):
        assert corner_square.n_arcs == 8
        assert all(l in (1, 2) for l in corner_square.layer_of_arc)

    def test_triangle_confocal_pairs(self, corner_triangle):
        keys = [frozenset(a.focus_indices) for a in corner_triangle.arcs]
        assert sum(keys.count(k) == 2 for k in set(keys)) == 3

    def test_endpoints_on_side_lines(self, corner_square, square):
        for arc in corner_square.arcs:
            for p in (arc.start_point, arc.end_point):
                res = min(abs(square.signed_side_value(i, p)) for i in range(4))
                assert res < 1e-12


class TestZonePartition:
    def test_square_outside_depths(self, square):
        zp = zone_partition(square)
        assert sorted({f.depth for f in zp.faces}) == [0, 1, 2]

    def test_pentagon_max_depth(self, pentagon):
        zp = zone_partition(pentagon)
        assert zp.max_depth == 3

    def test_centroid_depth_zero(self, pentagon):
        zp = zone_partition(pentagon)
        assert zp.depth_of(pentagon.centroid) == 0
        face = zp.locate(pentagon.centroid)
        assert face is not None and face.depth == 0

    def test_point_location_oracle(self, pentagon):
        # face-located depth equals the independent separating-line count
        zp = zone_partition(pentagon)
        rng = np.random.default_rng(0)
        for _ in range(200):
            p = rng.uniform(-3, 3, size=2)
            face = zp.locate(p)
            if face is None:
                continue
            assert face.depth == pentagon.separation_depth(p)

    def test_adjacent_depth_difference(self, pentagon):
        # stepping across any single side line changes the depth by exactly 1
        rng = np.random.default_rng(1)
        eps = 1e-6
        for i in range(pentagon.n):
            a, _ = pentagon.side(i)
            d = pentagon.side_direction(i)
            nrm = pentagon.outward_normal(i)
            for _ in range(20):
                t = rng.uniform(-2.0, 2.0)
                p = a + t * d
                # skip points too close to another line of the arrangement
                if any(
                    abs(pentagon.signed_side_value(j, p)) < 1e-3
                    for j in range(pentagon.n) if j != i
                ):
                    continue
                d1 = pentagon.separation_depth(p + eps * nrm)
                d2 = pentagon.separation_depth(p - eps * nrm)
                assert abs(d1 - d2) == 1


class TestValidateStructural:
    def test_wild_rose_large_passes(self, wild_rose_large):
        rep = validate_structural(wild_rose_large)
        assert rep.passed
        # the petals legitimately sweep over far side-line extensions
        assert not rep.strict_line_pass
        assert all(r.deepest_zone == 3 for r in rep.arcs)

    def test_corner_flowers_pass_strict(self, corner_triangle, corner_square):
        for table in (corner_triangle, corner_square):
            rep = validate_structural(table)
            assert rep.passed and rep.strict_line_pass
            assert all(l <= 2 for l in (a.layer for a in table.arcs))

    def test_arc_across_a_side_fails(self):
        # an ellipse table whose base triangle pokes through the boundary
        e = Ellipse((0.0, 0.0), 2.0, 1.0)
        arcs = [EllipticArc(e, 0, math.pi, focus_indices=(0, 1)),
                EllipticArc(e, math.pi, 2 * math.pi, focus_indices=(0, 1))]
        base = geom.BasePolygon(np.array([[-math.sqrt(3), 0], [math.sqrt(3), 0],
                                          [0, 3.0]]))
        table = FlowerTable(arcs, base=base, kind="unstructured")
        rep = validate_structural(table)
        assert not rep.passed
        crossed = set()
        for r in rep.arcs:
            crossed.update(r.crosses_side_segment and r.crossed_side_indices or ())
        assert crossed  # the offending side indices are reported


class TestCorePolygon:
    def test_triangle_core_is_base(self, corner_triangle, triangle):
        assert corner_triangle.core_polygon.shape == triangle.vertices.shape
        assert np.allclose(corner_triangle.core_polygon, triangle.vertices)

    def test_square_core_is_base(self, corner_square, square):
        assert np.allclose(corner_square.core_polygon, square.vertices)

    def test_shallow_wild_rose_core_is_base(self, pentagon):
        table = build_sol_flower(pentagon, 1.2)
        for arc in table.arcs:
            assert pentagon.separation_depth(arc.start_point, tol=1e-7) < 3
        assert np.allclose(table.core_polygon, pentagon.vertices)

    def test_deep_wild_rose_core_clipped(self, pentagon):
        wild_rose = build_sol_flower(pentagon, 2.4)
        core = wild_rose.core_polygon
        assert len(core) == 10
        # convex, subset of the base
        geom.BasePolygon(core)
        for v in core:
            assert pentagon.contains(v, tol=1e-9)
        # every clip edge lies on a line through an arc endpoint and a vertex
        ends = [p for a in wild_rose.arcs for p in (a.start_point, a.end_point)]
        for i in range(len(core)):
            a, b = core[i], core[(i + 1) % len(core)]
            d = (b - a) / np.hypot(*(b - a))
            on_base = any(
                abs(d[0] * (v - a)[1] - d[1] * (v - a)[0]) < 1e-9
                and abs(d[0] * (w - a)[1] - d[1] * (w - a)[0]) < 1e-9
                for v in pentagon.vertices for w in ends
            )
            assert on_base

    def test_core_shrinks_with_b(self, pentagon):
        # remark-3 behaviour: larger petals cut a smaller core
        apothems = []
        for b in (2.2, 2.6, 3.2):
            t = build_sol_flower(pentagon, b)
            core = t.core_polygon
            apothems.append(
                min(
                    geom._line_point_distance(core[i], core[(i + 1) % len(core)],
                                              pentagon.centroid)
                    for i in range(len(core))
                )
            )
        assert apothems[0] > apothems[1] > apothems[2] > 0.5


class TestAbsoluteFocusing:
    def test_tiny_arc_passes_both(self):
        e = Ellipse((0, 0), 5, 3)
        arc = EllipticArc(e, math.pi / 2 - 1e-9, math.pi / 2 + 1e-9)
        rep = is_absolutely_focusing(arc)
        assert rep.applicable and rep.pass_projection and rep.pass_angle

    def test_half_ellipse_fails_projection(self):
        e = Ellipse((0, 0), 5, 3)
        arc = EllipticArc(e, 0, math.pi)
        rep = is_absolutely_focusing(arc)
        assert rep.applicable
        assert not rep.pass_projection
        assert rep.projection > e.a / math.sqrt(2)

    def test_asymmetric_not_applicable(self):
        e = Ellipse((0, 0), 5, 3)
        arc = EllipticArc(e, 0.3, 1.1)
        assert is_absolutely_focusing(arc).verdict == "not_applicable"

    def test_wild_rose_petal_angle_decreases_and_passes(self, pentagon):
        angles = []
        for b in (2.0, 8.0, 32.0):
            table = build_sol_flower(pentagon, b)
            rep = is_absolutely_focusing(table.arcs[0])
            assert rep.applicable
            assert rep.pass_projection and rep.pass_angle
            angles.append(rep.angle)
        assert angles[0] > angles[1] > angles[2]
        assert angles[-1] > math.pi / 5  # limit value for n = 5


class TestDefocusing:
    def test_wild_rose_large_passes(self, wild_rose_large):
        rep = geom.defocusing_check(wild_rose_large, samples=400, seed=0)
        assert rep.pass_fraction == 1.0
        assert rep.passed
        assert rep.premise_ok
        assert all(f == 2 for f, _ in rep.premise_detail)

    def test_small_b_premise_fails(self, wild_rose):
        # shallow petals: the maximal osculating circles do not fit
        rep = geom.defocusing_check(wild_rose, samples=200, seed=0)
        assert not rep.premise_ok
        assert rep.witnesses  # worst chords reported either way

    def test_antipodal_chord_crosses_circle(self):
        # chord through the core to the tangency antipode crosses the circle
        e = Ellipse((0, 0), 5, 3)
        c, r = maximal_osculating_circle(e, "+")
        tangency = e.point(math.pi / 2)
        antipode = c - r * (tangency - c) / np.hypot(*(tangency - c))
        hit, margin = geom._segment_circle_intersects(tangency, antipode, c, r)
        assert hit and margin > 0


class TestStringConstruction:
    def test_triangle_six_arcs_c1(self, triangle):
        sc = string_construction(triangle.vertices, 5.0)
        assert sc.n_arcs == 6
        assert sc.joint_tangent_mismatches().max() < 1e-9

    def test_string_length_residuals(self, triangle):
        sc = string_construction(triangle.vertices, 5.0)
        rng = np.random.default_rng(2)
        for _ in range(200):
            arc = sc.arcs[rng.integers(len(sc.arcs))]
            t = rng.uniform(arc.t_start, arc.t_end)
            p = arc.ellipse.point(t)
            assert abs(sc.string_length_residual(p)) < 1e-9

    def test_degenerate_segment_caustic(self):
        seg = np.array([[-4.0, 0.0], [4.0, 0.0]])
        sc = string_construction(seg, 2 * 5.0 + 2 * 4.0)
        assert sc.n_arcs == 2
        assert sc.arcs[0].ellipse.a == pytest.approx(5.0, rel=1e-12)
        assert sc.arcs[0].ellipse is sc.arcs[1].ellipse

    def test_rope_too_short(self, triangle):
        with pytest.raises(InvalidParameterError):
            string_construction(triangle.vertices, 2.9)

    def test_irregular_quadrilateral(self):
        quad = np.array([[0, 0], [2, 0], [2.5, 1.2], [0.3, 1.5]], float)
        sc = string_construction(quad, 9.0)
        assert sc.n_arcs == 8
        assert sc.joint_tangent_mismatches().max() < 1e-9
