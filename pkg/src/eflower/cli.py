"""Command-line front end: build/validate/simulate/analyze/sweep with run dirs.

Every command writes into a run directory containing the exact config that
produced it; a manifest with per-file checksums is written last and marks the
run complete.  All randomness flows from one master seed.  Exit codes:
0 success, 1 invalid input, 2 construction failure, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__, analysis, dynamics, serialize, svgout
from . import geometry as geom

OUT_ROOT_ENV = "EFLOWER_OUT_ROOT"

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_CONSTRUCTION = 2
EXIT_RUNTIME = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit_(EXIT_INVALID, message)


class SystemExit_(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _out_dir(args, name):
    if args.out:
        path = args.out
    else:
        root = os.environ.get(OUT_ROOT_ENV, "runs")
        path = os.path.join(root, name)
    os.makedirs(path, exist_ok=True)
    return path


def _write_config(out, args):
    cfg = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    cfg["tool_version"] = __version__
    with open(os.path.join(out, "config.json"), "w") as f:
        json.dump(cfg, f, indent=2, sort_keys=True)
        f.write("\n")
    return cfg


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _finish_run(out, cfg, t0, summary=None):
    files = sorted(
        f for f in os.listdir(out)
        if f not in ("manifest.json", "INCOMPLETE") and os.path.isfile(os.path.join(out, f))
    )
    manifest = {
        "config": cfg,
        "tool_version": __version__,
        "wall_time_s": time.time() - t0,
        "outputs": {f: _sha256(os.path.join(out, f)) for f in files},
        "summary": summary or {},
    }
    sentinel = os.path.join(out, "INCOMPLETE")
    if os.path.exists(sentinel):
        os.remove(sentinel)
    with open(os.path.join(out, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def _mark_incomplete(out, reason):
    try:
        with open(os.path.join(out, "INCOMPLETE"), "w") as f:
            f.write(reason + "\n")
    except OSError:
        pass


def _parse_base(text):
    if text.startswith("regular:"):
        parts = text[len("regular:"):].split(",")
        if len(parts) != 2:
            raise geom.InvalidParameterError("--base expects regular:N,L")
        return geom.make_regular_polygon(int(parts[0]), float(parts[1]))
    raise geom.InvalidParameterError(f"unsupported base descriptor: {text}")


def _load_table(args):
    if not args.table or not os.path.exists(args.table):
        raise geom.InvalidParameterError(f"table file not found: {args.table}")
    return serialize.load_table(args.table)


def _build_table(args):
    base = _parse_base(args.base)
    if args.b <= 0.0:
        raise geom.InvalidParameterError("--b must be positive")
    if args.kind == "sol":
        return geom.build_sol_flower(base, args.b)
    if args.kind == "corner":
        return geom.build_corner_flower(base, args.b)
    raise geom.InvalidParameterError(f"unknown kind: {args.kind}")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_build(args):
    out = _out_dir(args, "build")
    cfg = _write_config(out, args)
    t0 = time.time()
    table = _build_table(args)
    serialize.save_table(table, os.path.join(out, "table.json"))
    report = geom.validate_structural(table)
    with open(os.path.join(out, "validation.txt"), "w") as f:
        f.write(str(report) + "\n")
    svgout.save_svg(
        svgout.render_table(table, show_zones=args.zones,
                            show_osculating=args.osculating),
        os.path.join(out, "table.svg"),
    )
    _finish_run(out, cfg, t0, {"structural_pass": report.passed,
                               "n_arcs": table.n_arcs})
    print(f"built {args.kind} flower: {table.n_arcs} arcs -> {out}")
    if not report.passed:
        raise SystemExit_(EXIT_CONSTRUCTION, "structural validation failed")


def cmd_validate(args):
    table = _load_table(args)
    report = geom.validate_structural(table)
    print(report)
    if args.out:
        out = _out_dir(args, "validate")
        cfg = _write_config(out, args)
        with open(os.path.join(out, "validation.txt"), "w") as f:
            f.write(str(report) + "\n")
        _finish_run(out, cfg, time.time(), {"structural_pass": report.passed})
    if not report.passed:
        raise SystemExit_(EXIT_CONSTRUCTION, "structural validation failed")


def cmd_render(args):
    table = _load_table(args)
    out = _out_dir(args, "render")
    cfg = _write_config(out, args)
    t0 = time.time()
    orbit = None
    if args.orbit_bounces:
        rng = np.random.default_rng(args.seed)
        st = dynamics.random_states(table, 1, rng)[0]
        orbit = dynamics.trace_orbit(table, st, args.orbit_bounces)
    svgout.save_svg(
        svgout.render_table(table, show_zones=args.zones,
                            show_osculating=args.osculating, orbit=orbit),
        os.path.join(out, "table.svg"),
    )
    _finish_run(out, cfg, t0)
    print(f"rendered -> {out}/table.svg")


def cmd_simulate(args):
    table = _load_table(args)
    out = _out_dir(args, "simulate")
    cfg = _write_config(out, args)
    t0 = time.time()
    if args.s0 is not None and args.phi0 is not None:
        st = dynamics.state_from_s_phi(table, args.s0, args.phi0)
    else:
        st = dynamics.random_states(table, 1, np.random.default_rng(args.seed))[0]
    rec = dynamics.trace_orbit(table, st, args.n_bounces)
    serialize.write_orbit_csv(rec, os.path.join(out, "orbit.csv"))
    _finish_run(out, cfg, t0, {"termination": rec.termination,
                               "n_links": rec.n_links})
    print(f"{rec.n_links} bounces ({rec.termination}) -> {out}/orbit.csv")


def cmd_classify(args):
    table = _load_table(args)
    out = _out_dir(args, "classify")
    cfg = _write_config(out, args)
    t0 = time.time()
    fr = analysis.component_measure_fraction(
        table, args.samples, args.n_bounces, seed=args.seed
    )
    serialize.write_fractions_csv(fr, os.path.join(out, "fractions.csv"))
    _finish_run(out, cfg, t0, {"fractions": fr.as_dict()})
    print(
        "fractions: core=%.4f cw=%.4f ccw=%.4f undetermined=%.4f -> %s"
        % (fr.core, fr.cw, fr.ccw, fr.undetermined, out)
    )


def _initial_state_for(table, args):
    rng = np.random.default_rng(args.seed)
    if args.orbit_class and args.orbit_class != "any":
        states = analysis.sample_classified_states(
            table, args.orbit_class, 1, window=args.window, seed=args.seed
        )
        return states[0]
    return dynamics.random_states(table, 1, rng)[0]


def cmd_lyapunov(args):
    table = _load_table(args)
    out = _out_dir(args, "lyapunov")
    cfg = _write_config(out, args)
    t0 = time.time()
    st = _initial_state_for(table, args)
    est = analysis.lyapunov_exponent(table, st, args.n_bounces)
    serialize.write_lyapunov_csv(est, os.path.join(out, "lyapunov.csv"))
    _finish_run(out, cfg, t0, {"lambda": est.lam, "stderr": est.stderr,
                               "n": est.n})
    print(f"lambda = {est.lam:.6g} +- {est.stderr:.2g} (n={est.n}) -> {out}")


def cmd_correlate(args):
    table = _load_table(args)
    out = _out_dir(args, "correlate")
    cfg = _write_config(out, args)
    t0 = time.time()
    st = _initial_state_for(table, args)
    rec = dynamics.trace_orbit(table, st, args.n_bounces)
    if rec.n_links < 10 * args.lags:
        raise SystemExit_(EXIT_RUNTIME,
                          f"orbit terminated early ({rec.termination}); "
                          "not enough data for the requested lags")
    series = np.cos(rec.phi[1:])
    fit = analysis.autocorrelation_decay(series, args.lags)
    serialize.write_decay_csv(fit, os.path.join(out, "decay.csv"))
    _finish_run(out, cfg, t0, {"verdict": fit.verdict,
                               "exp_rate": fit.exp_rate,
                               "power_exponent": fit.power_exponent})
    print(f"decay verdict: {fit.verdict} (rate={fit.exp_rate:.4g}, "
          f"exponent={fit.power_exponent:.4g}) -> {out}")


def cmd_portrait(args):
    table = _load_table(args)
    out = _out_dir(args, "portrait")
    cfg = _write_config(out, args)
    t0 = time.time()
    rng = np.random.default_rng(args.seed)
    initials = dynamics.random_states(table, args.samples, rng)
    portrait = analysis.phase_portrait(table, initials, args.n_bounces)
    serialize.write_portrait_csv(portrait, os.path.join(out, "portrait.csv"))
    labels = sorted({pp.label for pp in portrait})
    _finish_run(out, cfg, t0, {"labels": labels})
    print(f"portrait with classes {labels} -> {out}/portrait.csv")


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def _sweep_point(payload):
    (n, b, kind, samples, n_bounces, seed, subdir) = payload
    row = {"n": n, "b": b, "error": ""}
    try:
        base = geom.make_regular_polygon(n, 1.0)
        table = (geom.build_sol_flower(base, b) if kind == "sol"
                 else geom.build_corner_flower(base, b))
        os.makedirs(subdir, exist_ok=True)
        serialize.save_table(table, os.path.join(subdir, "table.json"))
        rep = geom.defocusing_check(table, samples=samples, seed=seed)
        foc = geom.is_absolutely_focusing(table.arcs[0])
        fr = analysis.component_measure_fraction(
            table, samples, n_bounces, seed=seed
        )
        st = dynamics.random_states(table, 1, np.random.default_rng(seed))[0]
        est = analysis.lyapunov_exponent(table, st, max(n_bounces, 1000))
        row.update(
            defocus_pass_fraction=rep.pass_fraction,
            defocus_premise=int(rep.premise_ok),
            focusing_projection=foc.projection,
            focusing_angle=foc.angle,
            focusing_pass_projection=int(foc.pass_projection),
            focusing_pass_angle=int(foc.pass_angle),
            lam=est.lam,
            lam_stderr=est.stderr,
            frac_core=fr.core, frac_cw=fr.cw, frac_ccw=fr.ccw,
            frac_undetermined=fr.undetermined,
        )
    except Exception as exc:  # per-point failures stay in-row
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


SWEEP_COLUMNS = [
    "n", "b", "defocus_pass_fraction", "defocus_premise",
    "focusing_projection", "focusing_angle", "focusing_pass_projection",
    "focusing_pass_angle", "lam", "lam_stderr",
    "frac_core", "frac_cw", "frac_ccw", "frac_undetermined", "error",
]


def cmd_sweep(args):
    out = _out_dir(args, "sweep")
    cfg = _write_config(out, args)
    t0 = time.time()
    ns = [int(x) for x in args.n_list.split(",") if x] if args.n_list else []
    bs = [float(x) for x in args.b_list.split(",") if x] if args.b_list else []
    grid = [(n, b) for n in ns for b in bs]
    payloads = [
        (n, b, args.kind, args.samples, args.n_bounces,
         args.seed + 1000003 * i, os.path.join(out, f"point_{i:03d}"))
        for i, (n, b) in enumerate(grid)
    ]
    if args.workers > 1 and payloads:
        with ProcessPoolExecutor(max_workers=args.workers) as ex:
            rows = list(ex.map(_sweep_point, payloads))
    else:
        rows = [_sweep_point(p) for p in payloads]
    lines = [",".join(SWEEP_COLUMNS)]
    for row in rows:
        cells = []
        for col in SWEEP_COLUMNS:
            v = row.get(col, "")
            if isinstance(v, float):
                cells.append(serialize.fmt(v))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    with open(os.path.join(out, "sweep.csv"), "w", newline="") as f:
        f.write("\n".join(lines) + "\n")
    _finish_run(out, cfg, t0, {"points": len(grid)})
    print(f"swept {len(grid)} grid points -> {out}/sweep.csv")


# ---------------------------------------------------------------------------
# argument wiring
# ---------------------------------------------------------------------------

def make_parser():
    p = _Parser(prog="eflower",
                description="Elliptic flower billiards: construction, "
                            "simulation and analysis")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, table=True):
        sp.add_argument("--out", default=None, help="run directory")
        sp.add_argument("--seed", type=int, default=0, help="master seed")
        if table:
            sp.add_argument("--table", required=True, help="table file")

    b = sub.add_parser("build", help="construct a flower table")
    b.add_argument("--base", required=True, help="base polygon, e.g. regular:5,1")
    b.add_argument("--kind", default="sol", choices=["sol", "corner"])
    b.add_argument("--b", type=float, required=True,
                   help="semi-minor axis of the petal ellipses")
    b.add_argument("--zones", action="store_true")
    b.add_argument("--osculating", action="store_true")
    common(b, table=False)
    b.set_defaults(func=cmd_build)

    v = sub.add_parser("validate", help="structural validation report")
    common(v)
    v.set_defaults(func=cmd_validate)

    r = sub.add_parser("render", help="render a table to SVG")
    r.add_argument("--zones", action="store_true")
    r.add_argument("--osculating", action="store_true")
    r.add_argument("--orbit-bounces", type=int, default=0)
    common(r)
    r.set_defaults(func=cmd_render)

    s = sub.add_parser("simulate", help="trace one orbit to CSV")
    s.add_argument("--n-bounces", type=int, default=1000)
    s.add_argument("--s0", type=float, default=None)
    s.add_argument("--phi0", type=float, default=None)
    common(s)
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("classify", help="component measure fractions")
    c.add_argument("--samples", type=int, default=1000)
    c.add_argument("--n-bounces", type=int, default=1000)
    common(c)
    c.set_defaults(func=cmd_classify)

    l = sub.add_parser("lyapunov", help="largest Lyapunov exponent")
    l.add_argument("--n-bounces", type=int, default=10**6)
    l.add_argument("--orbit-class", default="any",
                   choices=["any", "core", "track_cw", "track_ccw"])
    l.add_argument("--window", type=int, default=50,
                   help="classification window for --orbit-class")
    common(l)
    l.set_defaults(func=cmd_lyapunov)

    q = sub.add_parser("correlate", help="autocorrelation decay fit")
    q.add_argument("--n-bounces", type=int, default=10**5)
    q.add_argument("--lags", type=int, default=200)
    q.add_argument("--orbit-class", default="core",
                   choices=["any", "core", "track_cw", "track_ccw"])
    q.add_argument("--window", type=int, default=50)
    common(q)
    q.set_defaults(func=cmd_correlate)

    o = sub.add_parser("portrait", help="phase portrait point cloud")
    o.add_argument("--samples", type=int, default=50)
    o.add_argument("--n-bounces", type=int, default=2000)
    common(o)
    o.set_defaults(func=cmd_portrait)

    w = sub.add_parser("sweep", help="parameter sweep over n and b")
    w.add_argument("--n-list", default="5")
    w.add_argument("--b-list", default="2,4,8,16")
    w.add_argument("--kind", default="sol", choices=["sol", "corner"])
    w.add_argument("--samples", type=int, default=400)
    w.add_argument("--n-bounces", type=int, default=1000)
    w.add_argument("--workers", type=int, default=1)
    common(w, table=False)
    w.set_defaults(func=cmd_sweep)

    return p


def main(argv=None):
    parser = make_parser()
    out_hint = None
    try:
        args = parser.parse_args(argv)
        out_hint = args.out
        args.func(args)
        return EXIT_OK
    except SystemExit_ as exc:
        print(f"error: {exc}", file=sys.stderr)
        if out_hint:
            _mark_incomplete(out_hint, str(exc))
        return exc.code
    except (geom.InvalidParameterError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        if out_hint:
            _mark_incomplete(out_hint, str(exc))
        return EXIT_INVALID
    except (geom.ConstructionError, geom.DegenerateCoreError) as exc:
        print(f"construction failure: {exc}", file=sys.stderr)
        if out_hint:
            _mark_incomplete(out_hint, str(exc))
        return EXIT_CONSTRUCTION
    except Exception as exc:
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        if out_hint:
            _mark_incomplete(out_hint, str(exc))
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
