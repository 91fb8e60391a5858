"""Self-contained SVG rendering of tables and their derived geometry."""

from __future__ import annotations

import math

import numpy as np

from .geometry import FlowerTable, maximal_osculating_circle, zone_partition

STYLE = {
    "arc": "stroke:#1f3b73;stroke-width:{w};fill:none",
    "base": "stroke:#b03030;stroke-width:{w};fill:none;stroke-dasharray:{d}",
    "core": "stroke:#207040;stroke-width:{w};fill:#20704022",
    "circle": "stroke:#888888;stroke-width:{w};fill:none;stroke-dasharray:{d}",
    "orbit": "stroke:#cc7a00;stroke-width:{w};fill:none;stroke-opacity:0.7",
}

ZONE_FILLS = ["#ffffff", "#dce6f5", "#b8cdeb", "#94b4e1", "#719bd7", "#4d82cd"]


class SvgCanvas:
    def __init__(self, samples_per_arc=256):
        self.samples_per_arc = samples_per_arc
        self.elements = []
        self.min_x = self.min_y = math.inf
        self.max_x = self.max_y = -math.inf

    def _require(self, pts):
        pts = np.asarray(pts, dtype=float)
        self.min_x = min(self.min_x, float(pts[:, 0].min()))
        self.max_x = max(self.max_x, float(pts[:, 0].max()))
        self.min_y = min(self.min_y, float(pts[:, 1].min()))
        self.max_y = max(self.max_y, float(pts[:, 1].max()))

    def polyline(self, pts, style, closed=False):
        self._require(pts)
        coo = " ".join(f"{x:.6f},{y:.6f}" for x, y in pts)
        tag = "polygon" if closed else "polyline"
        self.elements.append(f'<{tag} points="{coo}" style="{style}" />')

    def circle(self, center, r, style):
        self._require([(center[0] - r, center[1] - r), (center[0] + r, center[1] + r)])
        self.elements.append(
            f'<circle cx="{center[0]:.6f}" cy="{center[1]:.6f}" r="{r:.6f}" '
            f'style="{style}" />'
        )

    def to_string(self, width=800):
        pad = 0.03 * max(self.max_x - self.min_x, self.max_y - self.min_y, 1e-9)
        x0, y0 = self.min_x - pad, self.min_y - pad
        w = self.max_x - self.min_x + 2 * pad
        h = self.max_y - self.min_y + 2 * pad
        height = int(round(width * h / w))
        head = (
            '<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
            f'height="{height}" viewBox="{x0:.6f} {y0:.6f} {w:.6f} {h:.6f}">\n'
            # flip y so the mathematical orientation reads normally
            f'<g transform="translate(0,{(2 * y0 + h):.6f}) scale(1,-1)">\n'
        )
        return head + "\n".join(self.elements) + "\n</g>\n</svg>\n"


def render_table(table: FlowerTable, show_base=True, show_core=True,
                 show_zones=False, show_osculating=False, orbit=None,
                 samples_per_arc=256):
    """Render a table (and optional overlays) to an SVG string."""
    cv = SvgCanvas(samples_per_arc)
    stroke = 0.004 * table.diameter
    dash = f"{3 * stroke:.6f},{2 * stroke:.6f}"

    if show_zones and table.base is not None:
        zp = zone_partition(table.base, box_factor=1.2 * table.diameter
                            / max(table.base.diameter, 1e-12))
        for face in sorted(zp.faces, key=lambda f: f.depth):
            fill = ZONE_FILLS[min(face.depth, len(ZONE_FILLS) - 1)]
            cv.polyline(
                face.polygon,
                f"stroke:#aaaaaa;stroke-width:{0.3 * stroke:.6f};fill:{fill}",
                closed=True,
            )

    for arc in table.arcs:
        cv.polyline(arc.sample(samples_per_arc),
                    STYLE["arc"].format(w=f"{stroke:.6f}"))
    if show_base and table.base is not None:
        cv.polyline(table.base.vertices,
                    STYLE["base"].format(w=f"{0.7 * stroke:.6f}", d=dash),
                    closed=True)
    if show_core and table.core_polygon is not None and len(table.core_polygon) >= 3:
        cv.polyline(table.core_polygon,
                    STYLE["core"].format(w=f"{0.7 * stroke:.6f}"), closed=True)
    if show_osculating:
        for arc in table.arcs:
            params = arc.minor_vertex_params()
            if not params:
                continue
            e = arc.ellipse
            t = params[0]
            r = e.a * e.a / e.b
            side = "+" if abs((e.point(t) - e.center) @ e._minor_dir() - e.b) < 1e-9 else "-"
            c, r = maximal_osculating_circle(e, side)
            cv.circle(c, r, STYLE["circle"].format(w=f"{0.5 * stroke:.6f}", d=dash))
    if orbit is not None:
        cv.polyline(orbit.points, STYLE["orbit"].format(w=f"{0.5 * stroke:.6f}"))
    return cv.to_string()


def save_svg(text, path):
    with open(path, "w") as f:
        f.write(text)
