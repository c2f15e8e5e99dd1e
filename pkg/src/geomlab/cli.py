"""Command-line front end.

Subcommands: willmore-sweep, distance-check, umbilics, linespace-audit,
maslov, flow-run, toponogov-probe, report.  Outputs are CSV/JSON files
written with 17 significant digits under --out (or $GEOMLAB_OUTPUT_DIR,
or the working directory).  Exit codes: 0 all assertions pass, 1 an
assertion failed, 2 usage/config error, 3 numerical failure.
"""

import argparse
import json
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import chart_tensor as ct
from . import kvdoc
from . import line_space as ls
from . import neutral_flow as nf
from . import scenarios as sc
from . import surface_geom as sg
from . import umbilic_topology as ut
from .errors import (ChartDomainError, ConfigError, ImmersionError,
                     MetricParameterError, SignatureLossError,
                     UnreliableLoopError)

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def _out_dir(args):
    out = args.out or os.environ.get("GEOMLAB_OUTPUT_DIR") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _write_csv(path, header, rows, timestamp):
    with open(path, "w", encoding="utf-8") as fh:
        if timestamp:
            fh.write(f"# generated {datetime.now(timezone.utc).isoformat()}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_json(path, payload, timestamp):
    if timestamp:
        payload = {"generated": datetime.now(timezone.utc).isoformat(), **payload}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    raise TypeError(f"cannot serialise {type(obj)!r}")


def _load_config(args, valid_keys):
    cfg = {}
    if getattr(args, "config", None):
        cfg = kvdoc.load(args.config)
        unknown = set(cfg) - set(valid_keys)
        if unknown:
            raise ConfigError(
                f"unknown config keys {sorted(unknown)}; valid keys: "
                f"{sorted(valid_keys)}")
    return cfg


def _eps_list(text):
    try:
        values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"could not parse eps list {text!r}")
    for eps in values:
        if not (0.0 <= eps < 1.0):
            raise ConfigError(
                f"eps={eps} outside the valid range [0, 1)")
    return values


def _report_to_disk(report, out, stem, timestamp):
    _write_json(os.path.join(out, f"{stem}.json"), report.to_dict(), timestamp)
    _write_csv(os.path.join(out, f"{stem}.csv"), sc.FLAT_ROW_HEADER,
               report.flat_rows(), timestamp)


# -- subcommands ---------------------------------------------------------------

def cmd_willmore_sweep(args):
    cfg = _load_config(args, {"eps", "grid"})
    eps = _eps_list(args.eps) if args.eps else cfg.get("eps", None)
    if isinstance(eps, (int, float)):
        eps = [float(eps)]
    grid = (args.grid, args.grid) if args.grid else tuple(
        cfg.get("grid", (192, 192)))[:2] or (192, 192)
    report = (sc.willmore_sweep(eps_list=eps, grid=grid) if eps
              else sc.willmore_sweep(grid=grid))
    out = _out_dir(args)
    rows = [[r["eps"], r["W_quadrature"], r["W_closed_form"], r["maxH"],
             "pass" if abs(r["W_quadrature"] - r["W_closed_form"])
             <= 1e-8 * r["W_closed_form"] else "FAIL"]
            for r in report.values["rows"]]
    _write_csv(os.path.join(out, "willmore_sweep.csv"),
               ["eps", "W_quadrature", "W_closed_form", "maxH", "verdict"],
               rows, not args.no_timestamp)
    _report_to_disk(report, out, "willmore_sweep_report", not args.no_timestamp)
    print(f"willmore-sweep: {'pass' if report.passed else 'FAIL'} "
          f"({len(report.assertions)} assertions, {report.runtime:.2f}s)")
    return EXIT_PASS if report.passed else EXIT_FAIL


def cmd_distance_check(args):
    cfg = _load_config(args, {"eps", "rho_points", "theta_points"})
    eps = _eps_list(args.eps) if args.eps else cfg.get("eps", [0.1, 0.2, 0.4])
    report = sc.distance_bound_check(
        eps_list=eps, rho_points=int(cfg.get("rho_points", 576)),
        theta_points=int(cfg.get("theta_points", 32)))
    out = _out_dir(args)
    _report_to_disk(report, out, "distance_check", not args.no_timestamp)
    print(f"distance-check: {'pass' if report.passed else 'FAIL'} "
          f"({report.runtime:.2f}s)")
    return EXIT_PASS if report.passed else EXIT_FAIL


def _surface_from_args(args):
    params = {}
    for key in ("a", "b", "c", "r", "R", "d", "expr", "half_width"):
        value = getattr(args, key.lower() if key != "R" else "big_r", None)
        if value is not None:
            params[key] = value
    return sg.surface_by_name(args.surface, **params)


def cmd_umbilics(args):
    surface = _surface_from_args(args)
    if args.metric_file:
        metric = ct.load_metric(args.metric_file)
    elif args.metric != "flat-r3":
        metric = ct.metric_by_name(args.metric, eps=args.eps_val)
    else:
        metric = ct.metric_by_name("flat-r3")
    grid = tuple(int(x) for x in args.grid.split("x"))
    records = ut.umbilic_scan(surface, metric, grid=grid)
    ut.attach_indices(surface, metric, [r for r in records if r.isolated],
                      grid=grid)
    out = _out_dir(args)
    rows = [[r.s, r.t, r.disc_min,
             r.index_num if r.index_num is not None else "",
             r.isolated] for r in records]
    _write_csv(os.path.join(out, "umbilics.csv"),
               ["s", "t", "discriminant", "index_num", "isolated"],
               rows, not args.no_timestamp)
    audit = ut.conjecture_audit(surface, metric, grid=grid)
    payload = sc._audit_values(audit)
    _write_json(os.path.join(out, "umbilics_audit.json"), payload,
                not args.no_timestamp)
    ok = all(audit[k] in (True, None) for k in
             ("hamburger_ok", "local_bound_ok", "poincare_hopf_ok"))
    print(f"umbilics: {audit['umbilic_count']} isolated, "
          f"index sum {audit['index_sum']}, audit {'pass' if ok else 'FAIL'}")
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_linespace_audit(args):
    rng = np.random.default_rng(args.seed)
    n = args.samples
    worst = {"j_squared": 0.0, "constraint": 0.0, "omega_antisym": 0.0,
             "omega_j_invariant": 0.0, "g_symmetric": 0.0, "wirtinger": 0.0}
    signature_ok = True
    for _ in range(n):
        base = ls.random_base(rng)
        x = ls.random_tangent(rng, base)
        y = ls.random_tangent(rng, base)
        ju, jv = ls.apply_j(base.u, base.V, x.du, x.dV)
        worst["constraint"] = max(
            worst["constraint"], abs(np.dot(base.u, ju)),
            abs(np.dot(base.u, jv) + np.dot(base.V, ju)))
        jju, jjv = ls.apply_j(base.u, base.V, ju, jv)
        worst["j_squared"] = max(worst["j_squared"],
                                 float(np.max(np.abs(jju + x.du))),
                                 float(np.max(np.abs(jjv + x.dV))))
        om = ls.omega_pair(x.du, x.dV, y.du, y.dV)
        worst["omega_antisym"] = max(worst["omega_antisym"], abs(
            om + ls.omega_pair(y.du, y.dV, x.du, x.dV)))
        ju2, jv2 = ls.apply_j(base.u, base.V, y.du, y.dV)
        worst["omega_j_invariant"] = max(worst["omega_j_invariant"], abs(
            ls.omega_pair(ju, jv, ju2, jv2) - om))
        worst["g_symmetric"] = max(worst["g_symmetric"], abs(
            ls.metric_pair(base.u, base.V, x.du, x.dV, y.du, y.dV)
            - ls.metric_pair(base.u, base.V, y.du, y.dV, x.du, x.dV)))
        worst["wirtinger"] = max(worst["wirtinger"], ls.wirtinger_residual(x, y))
    # signature on a handful of random frames
    for _ in range(32):
        base = ls.random_base(rng)
        frame = [ls.random_tangent(rng, base) for _ in range(4)]
        gram = np.array([[ls.metric_pair(base.u, base.V, p.du, p.dV, q.du, q.dV)
                          for q in frame] for p in frame])
        evals = np.linalg.eigvalsh(gram)
        if not (np.sum(evals > 0) == 2 and np.sum(evals < 0) == 2):
            signature_ok = False
    checks = {
        "j_squared": worst["j_squared"] < 1e-10,
        "constraint": worst["constraint"] < 1e-12,
        "omega_antisym": worst["omega_antisym"] < 1e-12,
        "omega_j_invariant": worst["omega_j_invariant"] < 1e-10,
        "g_symmetric": worst["g_symmetric"] < 1e-10,
        "wirtinger": worst["wirtinger"] < 1e-9,
        "signature_2_2": signature_ok,
    }
    payload = {"samples": n, "seed": args.seed, "residuals": worst,
               "checks": checks, "passed": all(checks.values())}
    out = _out_dir(args)
    _write_json(os.path.join(out, "linespace_audit.json"), payload,
                not args.no_timestamp)
    print(f"linespace-audit: {'pass' if payload['passed'] else 'FAIL'} "
          f"(worst wirtinger {worst['wirtinger']:.2e})")
    return EXIT_PASS if payload["passed"] else EXIT_FAIL


def cmd_maslov(args):
    surface = _surface_from_args(args)
    metric = ct.metric_by_name("flat-r3")
    grid = tuple(int(x) for x in args.grid.split("x"))
    section = ls.normal_congruence(surface, grid=grid)
    cmap = section.source
    records = ut.umbilic_scan(surface, metric, grid=grid)
    iso = [r for r in records if r.isolated]
    phi = np.linspace(0.0, 2 * np.pi, args.loop_samples, endpoint=False)
    rows = []
    if args.loop_file:
        loop_u = np.loadtxt(args.loop_file, comments="#")
        loop_s, loop_t = ls.invert_gauss_map(cmap, loop_u, section)
        # the principal-winding index uses the counterclockwise convention in
        # parameter space; reorient the inverted loop if the Gauss map
        # reversed it (mu is chart-oriented internally and unaffected)
        s_unwrapped = np.unwrap(loop_s, period=2 * np.pi)
        area = 0.5 * np.sum(s_unwrapped * np.roll(loop_t, -1)
                            - np.roll(s_unwrapped, -1) * loop_t)
        if area < 0:
            loop_s, loop_t = loop_s[::-1], loop_t[::-1]
        mas = ls.maslov_index(cmap, loop_s, loop_t, section.center)
        angles = ut.principal_angles(surface, metric, loop_s, loop_t)
        rows.append(["file", mas["mu"], mas["index_sum"],
                     mas["operator_index"], mas["unparameterized_dim"],
                     ut.line_field_winding(angles)])
    else:
        enclose = [int(x) for x in args.enclose.split(",")]
        for count in enclose:
            if count == 0:
                loop_s = np.pi / 2 + 0.2 * np.cos(phi)
                loop_t = np.pi / 2 + 0.2 * np.sin(phi)
            elif count == 1:
                if not iso:
                    raise ConfigError("surface has no isolated umbilics to enclose")
                loop_s = iso[0].s + 0.15 * np.cos(phi)
                loop_t = iso[0].t + 0.15 * np.sin(phi)
            elif count == 2:
                if len(iso) < 2:
                    raise ConfigError("surface has fewer than two umbilics")
                period = 2 * np.pi
                partner = min(iso[1:], key=lambda r: min(
                    abs(r.s - iso[0].s) % period,
                    period - abs(r.s - iso[0].s) % period))
                t_mid = 0.5 * (iso[0].t + partner.t)
                t_rad = 0.35 + 0.5 * abs(partner.t - iso[0].t)
                loop_s = iso[0].s + 0.35 * np.cos(phi)
                loop_t = t_mid + t_rad * np.sin(phi)
            else:
                raise ConfigError("--enclose supports counts 0, 1, 2")
            mas = ls.maslov_index(cmap, loop_s, loop_t, section.center)
            angles = ut.principal_angles(surface, metric, loop_s, loop_t)
            rows.append([count, mas["mu"], mas["index_sum"],
                         mas["operator_index"], mas["unparameterized_dim"],
                         ut.line_field_winding(angles)])
    out = _out_dir(args)
    _write_csv(os.path.join(out, "maslov.csv"),
               ["enclosed", "mu", "index_sum", "operator_index",
                "unparameterized_dim", "principal_winding"],
               rows, not args.no_timestamp)
    ok = all(abs(row[1] - 4 * row[5]) < 1e-9 for row in rows)
    print(f"maslov: {'pass' if ok else 'FAIL'} ({len(rows)} loops)")
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_flow_run(args):
    cfg = _load_config(args, set(nf.FLOW_CONFIG_KEYS))
    for key in ("grid_n", "steps", "snapshot_every", "seed"):
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    for key in ("h", "twist_strength", "perturbation", "angle_target",
                "dbar_c", "angle_rate", "chart_radius"):
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    if args.disc:
        cfg["disc"] = args.disc
    state, snapshots = nf.run_flow(cfg)
    out = _out_dir(args)
    rows = [d.as_row() for d in state.diagnostics]
    _write_csv(os.path.join(out, "flow_diagnostics.csv"),
               ["step", "time", "area", "margin", "max_h",
                "normal_residual", "angle_residual", "dbar_norm",
                "dbar_target"], rows, not args.no_timestamp)
    for k, (t, f) in enumerate(snapshots):
        np.savetxt(os.path.join(out, f"flow_state_{k:04d}.txt"),
                   f.reshape(-1, 4), header=f"t={t:.17g} chart x,y,w1,w2")
    if state.halted and "stagnation" not in state.halted:
        print(f"flow-run: halted ({state.halted})")
        return EXIT_NUMERIC
    areas = np.array([d.area for d in state.diagnostics])
    margin_ok = all(d.margin > 0 for d in state.diagnostics)
    area_ok = bool(np.all(np.diff(areas) >= -1e-10))
    print(f"flow-run: {len(state.diagnostics) - 1} steps, "
          f"area {'non-decreasing' if area_ok else 'NOT monotone'}, "
          f"margin {'positive' if margin_ok else 'LOST'}")
    return EXIT_PASS if (margin_ok and area_ok) else EXIT_FAIL


def cmd_toponogov_probe(args):
    metric = ct.metric_by_name("flat-r3")
    radii = [float(x) for x in args.radii.split(",")]
    params = {"half_width": max(radii)}
    if args.expr:
        params["expr"] = args.expr
    surface = sg.surface_by_name(args.surface, **params)
    mins = sg.toponogov_probe(surface, metric, radii)
    out = _out_dir(args)
    _write_csv(os.path.join(out, "toponogov_probe.csv"),
               ["radius", "min_disc"], list(zip(radii, mins)),
               not args.no_timestamp)
    non_increasing = all(mins[i + 1] <= mins[i] + 1e-300
                         for i in range(len(mins) - 1))
    print(f"toponogov-probe: minima {[f'{m:.4g}' for m in mins]} "
          f"({'non-increasing' if non_increasing else 'NOT monotone'})")
    return EXIT_PASS if non_increasing else EXIT_FAIL


def cmd_report(args):
    reports = sc.run_all()
    out = _out_dir(args)
    payload = {"schema_version": sc.SCHEMA_VERSION,
               "reports": [r.to_dict() for r in reports],
               "passed": all(r.passed for r in reports)}
    _write_json(os.path.join(out, "report.json"), payload,
                not args.no_timestamp)
    rows = []
    for r in reports:
        rows.extend(r.flat_rows())
    _write_csv(os.path.join(out, "report_summary.csv"), sc.FLAT_ROW_HEADER,
               rows, not args.no_timestamp)
    for r in reports:
        print(f"  {r.scenario}: {'pass' if r.passed else 'FAIL'} "
              f"({r.runtime:.2f}s)")
    print(f"report: {'pass' if payload['passed'] else 'FAIL'}")
    return EXIT_PASS if payload["passed"] else EXIT_FAIL


# -- parser ---------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="geomlab",
        description="Numerical differential geometry experiments: metric "
                    "deformations, umbilics, the oriented-line space, and "
                    "codimension-two mean curvature flow.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default=None,
                       help="output directory (default $GEOMLAB_OUTPUT_DIR or .)")
        p.add_argument("--no-timestamp", action="store_true",
                       help="suppress the timestamp header line in outputs")
        p.add_argument("--config", default=None,
                       help="key-value config file overriding defaults")

    p = sub.add_parser("willmore-sweep", help="torus energy across the deformation")
    p.add_argument("--eps", default=None, help="comma list in [0,1)")
    p.add_argument("--grid", type=int, default=None)
    common(p)
    p.set_defaults(func=cmd_willmore_sweep)

    p = sub.add_parser("distance-check", help="L2 bound for the bumped metric")
    p.add_argument("--eps", default=None)
    common(p)
    p.set_defaults(func=cmd_distance_check)

    p = sub.add_parser("umbilics", help="scan a surface for umbilic points")
    p.add_argument("--surface", default="ellipsoid")
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--b", type=float, default=None)
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--r", type=float, default=None)
    p.add_argument("--big-r", dest="big_r", type=float, default=None,
                   help="major radius for torus-revolution")
    p.add_argument("--d", type=float, default=None)
    p.add_argument("--expr", default=None)
    p.add_argument("--half-width", dest="half_width", type=float, default=None)
    p.add_argument("--metric", default="flat-r3")
    p.add_argument("--metric-file", dest="metric_file", default=None,
                   help="custom metric definition (key-value expressions)")
    p.add_argument("--eps-val", dest="eps_val", type=float, default=0.0)
    p.add_argument("--grid", default="512x384")
    common(p)
    p.set_defaults(func=cmd_umbilics)

    p = sub.add_parser("linespace-audit", help="structure identities on random data")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    common(p)
    p.set_defaults(func=cmd_linespace_audit)

    p = sub.add_parser("maslov", help="Keller-Maslov index on congruence loops")
    p.add_argument("--surface", default="ellipsoid")
    p.add_argument("--a", type=float, default=2.0)
    p.add_argument("--b", type=float, default=1.5)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--enclose", default="0,1,2",
                   help="comma list of enclosed-umbilic counts")
    p.add_argument("--loop-file", default=None,
                   help="polyline of directions (columns u_x u_y u_z)")
    p.add_argument("--grid", default="256x192")
    p.add_argument("--loop-samples", type=int, default=2048)
    common(p)
    p.set_defaults(func=cmd_maslov)

    p = sub.add_parser("flow-run", help="mean curvature flow of a graphical disc")
    p.add_argument("--grid-n", dest="grid_n", type=int, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--h", type=float, default=None)
    p.add_argument("--twist-strength", dest="twist_strength", type=float,
                   default=None)
    p.add_argument("--perturbation", type=float, default=None)
    p.add_argument("--angle-target", dest="angle_target", type=float, default=None)
    p.add_argument("--dbar-c", dest="dbar_c", type=float, default=None)
    p.add_argument("--angle-rate", dest="angle_rate", type=float, default=None)
    p.add_argument("--chart-radius", dest="chart_radius", type=float, default=None)
    p.add_argument("--disc", default=None,
                   help="twisted-hemisphere or holomorphic-affine")
    p.add_argument("--snapshot-every", dest="snapshot_every", type=int,
                   default=None)
    common(p)
    p.set_defaults(func=cmd_flow_run)

    p = sub.add_parser("toponogov-probe",
                       help="min curvature gap over expanding graph disks")
    p.add_argument("--surface", default="saddle")
    p.add_argument("--expr", default=None)
    p.add_argument("--radii", default="1,2,4,8")
    common(p)
    p.set_defaults(func=cmd_toponogov_probe)

    p = sub.add_parser("report", help="run all scenarios and emit reports")
    common(p)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ConfigError, MetricParameterError, ChartDomainError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (SignatureLossError, UnreliableLoopError, ImmersionError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
