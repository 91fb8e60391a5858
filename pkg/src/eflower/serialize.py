"""Table files and CSV artifact writers.

Tables are stored as human-readable JSON with every float rendered as a
decimal string with 17 significant digits, which round-trips doubles exactly:
save -> load -> save is byte-identical.  CSV writers share the same decimal
rendering.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .geometry import (
    BasePolygon,
    Ellipse,
    EllipticArc,
    FlowerTable,
    InvalidParameterError,
)

FORMAT_TAG = "elliptic-flower-table/1"


def fmt(x):
    """Decimal rendering with 17 significant digits (exact double round-trip)."""
    return format(float(x), ".17g")


def _point(p):
    return [fmt(p[0]), fmt(p[1])]


def table_to_document(table: FlowerTable):
    doc = {
        "format": FORMAT_TAG,
        "kind": table.kind,
        "b_parameter": fmt(table.b_parameter) if table.b_parameter is not None else None,
        "base": None,
        "core_polygon": None,
        "arcs": [],
    }
    if table.base is not None:
        doc["base"] = {"vertices": [_point(v) for v in table.base.vertices]}
    if table.core_polygon is not None:
        doc["core_polygon"] = [_point(v) for v in table.core_polygon]
    for arc in table.arcs:
        e = arc.ellipse
        entry = {
            "layer": arc.layer,
            "b": fmt(e.b),
            "t_start": fmt(arc.t_start),
            "t_end": fmt(arc.t_end),
        }
        if arc.focus_indices is not None and table.base is not None:
            entry["focus_indices"] = list(arc.focus_indices)
        else:
            entry["ellipse"] = {
                "center": _point(e.center),
                "a": fmt(e.a),
                "rotation": fmt(e.rotation),
            }
        if arc.boundary_sides is not None:
            entry["boundary_sides"] = list(arc.boundary_sides)
        doc["arcs"].append(entry)
    return doc


def document_to_table(doc):
    if doc.get("format") != FORMAT_TAG:
        raise InvalidParameterError(f"unsupported table format: {doc.get('format')}")
    base = None
    if doc.get("base") is not None:
        verts = np.array([[float(x), float(y)] for x, y in doc["base"]["vertices"]])
        base = BasePolygon(verts)
    arcs = []
    for entry in doc["arcs"]:
        b = float(entry["b"])
        if "focus_indices" in entry:
            if base is None:
                raise InvalidParameterError("focus indices without a base polygon")
            i, j = entry["focus_indices"]
            e = Ellipse.from_foci(base.vertices[i], base.vertices[j], b)
            foci = (i, j)
        else:
            ed = entry["ellipse"]
            e = Ellipse(
                np.array([float(ed["center"][0]), float(ed["center"][1])]),
                float(ed["a"]), b, float(ed["rotation"]),
            )
            foci = None
        arcs.append(
            EllipticArc(
                e, float(entry["t_start"]), float(entry["t_end"]),
                focus_indices=foci,
                layer=entry.get("layer"),
                boundary_sides=tuple(entry["boundary_sides"])
                if entry.get("boundary_sides") is not None else None,
            )
        )
    b_par = doc.get("b_parameter")
    core = doc.get("core_polygon")
    if core is not None:
        core = np.array([[float(x), float(y)] for x, y in core])
    return FlowerTable(
        arcs, base=base, kind=doc.get("kind", "unstructured"),
        core_polygon=core,
        b_parameter=float(b_par) if b_par is not None else None,
    )


def dumps_table(table: FlowerTable):
    return json.dumps(table_to_document(table), indent=2, sort_keys=True) + "\n"


def save_table(table: FlowerTable, path):
    text = dumps_table(table)
    with open(path, "w") as f:
        f.write(text)
    return text


def load_table(path):
    with open(path) as f:
        return document_to_table(json.load(f))


# ---------------------------------------------------------------------------
# CSV artifacts
# ---------------------------------------------------------------------------

def write_orbit_csv(record, path):
    """Orbit export: one row per bounce; link columns describe the departing link."""
    lines = ["bounce,arc_index,s,phi,x,y,tau,crosses_core,winding_increment"]
    n = record.n_states
    for k in range(n):
        if k < record.n_links:
            link = (
                fmt(record.tau[k]),
                str(int(record.crosses_core[k])),
                fmt(record.winding[k]),
            )
        else:
            link = ("", "", "")
        lines.append(
            ",".join(
                [
                    str(k),
                    str(int(record.arc_index[k])),
                    fmt(record.s[k]),
                    fmt(record.phi[k]),
                    fmt(record.x[k]),
                    fmt(record.y[k]),
                    *link,
                ]
            )
        )
    _write_lines(path, lines)


def write_portrait_csv(portrait, path):
    lines = ["s,cos_phi,class_label,orbit_id"]
    for pp in portrait:
        for s, c in zip(pp.s, pp.cos_phi):
            lines.append(f"{fmt(s)},{fmt(c)},{pp.label},{pp.orbit_id}")
    _write_lines(path, lines)


def write_fractions_csv(fr, path):
    lines = ["class,fraction,stderr,count"]
    for key, label in (("core", "core"), ("cw", "track_cw"),
                       ("ccw", "track_ccw"), ("undetermined", "undetermined")):
        p = getattr(fr, key)
        lines.append(
            f"{label},{fmt(p)},{fmt(fr.stderr[label])},{fr.counts[label]}"
        )
    _write_lines(path, lines)


def write_decay_csv(fit, path):
    lines = [
        f"# verdict,{fit.verdict}",
        f"# exp_rate,{fmt(fit.exp_rate) if not math.isnan(fit.exp_rate) else 'nan'}",
        f"# exp_residual,{fmt(fit.exp_residual) if not math.isnan(fit.exp_residual) else 'nan'}",
        f"# power_exponent,{fmt(fit.power_exponent) if not math.isnan(fit.power_exponent) else 'nan'}",
        f"# power_residual,{fmt(fit.power_residual) if not math.isnan(fit.power_residual) else 'nan'}",
        f"# noise_floor,{fmt(fit.noise_floor)}",
        f"# used_lags,{len(fit.used_lags)}",
        "lag,C",
    ]
    for k, c in zip(fit.lags, fit.acf):
        lines.append(f"{int(k)},{fmt(c)}")
    _write_lines(path, lines)


def write_lyapunov_csv(est, path):
    lines = [
        f"# lambda,{fmt(est.lam)}",
        f"# stderr,{fmt(est.stderr)}",
        f"# n,{est.n}",
        f"# terminated_early,{int(est.terminated_early)}",
        f"# termination,{est.termination}",
        "step,partial_lambda",
    ]
    for k, v in zip(est.checkpoints, est.trace):
        lines.append(f"{int(k)},{fmt(v)}")
    _write_lines(path, lines)


def _write_lines(path, lines):
    with open(path, "w", newline="") as f:
        f.write("\n".join(lines) + "\n")
