"""Command-line experiment runner.

Usage::

    finslerkit --config run.json [--out result.csv] [--format csv|json]
    finslerkit --suite theorem1 [--out table.csv] [--seed 0] [--threads 4]

Exit status is 0 on success, 1 for invalid input and 2 for a numerical
failure or a failed suite check.
"""

import argparse
import csv
import hashlib
import io
import json
import sys

import numpy as np

from . import __version__
from .exceptions import DomainError, FinslerkitError
from .geodesics import CSV_COLUMNS, euclidean_arc_defect, horizontal_residual, integrate_geodesic
from .norms import check_banach_minkowski, plane_from_alpha
from .planar import (ellipse_defect, equivalence_defect, min_circumscribed_ellipse,
                     radial_profile, self_rotation_defect)
from .sections import amu_scan, kakutani_tau, local_ellipsoid_check, quadratic_fit
from .specs import (build_immersion, build_metric, build_norm, build_planar, parse_array,
                    parse_number)
from .suites import CHECK_COLUMNS, SUITES, run_suite
from .surfaces import (classify_sff, euclidean_defect, flatness_defect, monochromatic_defect,
                       mono_theorem_report, second_fundamental_form)
from .tolerances import resolve

COMMON = {"seed": 0, "output_path": None, "format": "csv", "tolerances": {}, "threads": None}


class ConfigError(ValueError):
    pass


def _points(cfg, key="points"):
    pts = parse_array(cfg[key])
    if np.ndim(pts) != 2 or np.shape(pts)[1] != 2:
        raise DomainError(f"{key} must be a list of [x, y] pairs")
    return pts


def _int(cfg, key):
    value = cfg[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise DomainError(f"{key} must be an integer")
    return value


# Each handler returns (columns, rows, json payload).

def _check_norm(cfg, tol):
    rep = check_banach_minkowski(build_norm(cfg["norm"]), _int(cfg, "n_samples"),
                                 cfg["seed"], tol)
    d = rep.as_dict()
    return ("quantity", "value"), sorted(d.items()), d


def _radial_profile(cfg, tol):
    prof = radial_profile(build_planar(cfg["phi0"]), _int(cfg, "n"))
    return ("theta", "r"), prof.rows(), {"is_convex": prof.is_convex(),
                                         "r": prof.r.tolist()}


def _min_ellipse(cfg, tol):
    ell = min_circumscribed_ellipse(build_planar(cfg["phi0"]), _int(cfg, "n"),
                                    active_tol=tol["ellipse_active"], kkt_tol=tol["ellipse_kkt"])
    M = ell.M
    d = {"M": M.tolist(), "area": float(ell.area), "kkt_residual": float(ell.kkt_residual)}
    return ("m00", "m01", "m11"), [(M[0, 0], M[0, 1], M[1, 1])], d


def _equivalence(cfg, tol):
    res = equivalence_defect(build_planar(cfg["phi1"]), build_planar(cfg["phi2"]),
                             _int(cfg, "n"))
    d = res.as_dict()
    d["equivalent"] = bool(res.defect < tol["tau_eq"])
    return (("defect", "best_angle", "reflected"),
            [(res.defect, res.best_angle, int(res.reflected))], d)


def _ellipse_defect(cfg, tol):
    val = ellipse_defect(build_planar(cfg["phi0"]), _int(cfg, "n"))
    return ("ellipse_defect",), [(val,)], {"ellipse_defect": val}


def _self_rotation(cfg, tol):
    arr = self_rotation_defect(build_planar(cfg["phi0"]), _int(cfg, "n_angles"), _int(cfg, "n"))
    rows = [tuple(r) for r in arr]
    return ("theta", "defect"), rows, {"theta": arr[:, 0].tolist(), "defect": arr[:, 1].tolist()}


def _amu_scan(cfg, tol):
    rep = amu_scan(build_norm(cfg["norm"]), tuple(parse_array(cfg["center"])),
                   parse_number(cfg["radius"]), _int(cfg, "count"), _int(cfg, "n"),
                   cfg["seed"], bool(cfg["pairwise"]), tol["tau_eq"], cfg["threads"])
    return ("a", "b", "defect", "ellipse_defect"), rep.rows(), rep.as_dict()


def _kakutani(cfg, tol):
    a, b = parse_array(cfg["alpha"])
    res = kakutani_tau(build_norm(cfg["norm"]), plane_from_alpha(a, b), _int(cfg, "m"),
                       tol["tau_tau"])
    return (("tau_x", "tau_y", "tau_z", "sigma_ratio", "feasible"),
            [(*res.tau, res.sigma_ratio, int(res.feasible))], res.as_dict())


def _quadratic_fit(cfg, tol):
    planes = [plane_from_alpha(a, b) for a, b in _points(cfg, "alphas")]
    fit = quadratic_fit(build_norm(cfg["norm"]), planes, _int(cfg, "per_plane_samples"))
    Q = fit.Q
    rows = [(i, j, Q[i, j]) for i in range(3) for j in range(3)]
    return ("i", "j", "q"), rows, fit.as_dict()


def _local_ellipsoid(cfg, tol):
    res = local_ellipsoid_check(build_norm(cfg["norm"]), tuple(parse_array(cfg["center"])),
                                parse_number(cfg["radius"]), _int(cfg, "count"), _int(cfg, "n"),
                                cfg["seed"], tau_eq=tol["tau_eq"], n_jobs=cfg["threads"])
    return (("verdict", "failing_stage"), [(res.verdict, res.failing_stage or "")],
            res.as_dict())


def _sff(cfg, tol):
    f = build_immersion(cfg["immersion"])
    rows, out = [], []
    for p in _points(cfg):
        s = second_fundamental_form(f, p, tol["immersion_rank"])
        cls = classify_sff(s, tol["sff_scale"])
        rows.append((p[0], p[1], s.matrix[0, 0], s.matrix[0, 1], s.matrix[1, 1], cls))
        out.append(dict(s.as_dict(), point=p.tolist(), sff_class=cls))
    return ("x", "y", "s00", "s01", "s11", "class"), rows, {"points": out}


def _mono_defect(cfg, tol):
    val, pair = monochromatic_defect(build_metric(cfg["metric"]), _points(cfg), _int(cfg, "n"))
    return ("max_defect", "i", "j"), [(val, *pair)], {"max_defect": val, "argmax": list(pair)}


def _euclidean_defect(cfg, tol):
    metric = build_metric(cfg["metric"])
    rows = [(p[0], p[1], euclidean_defect(metric, p, _int(cfg, "n"))) for p in _points(cfg)]
    return ("x", "y", "euclidean_defect"), rows, {"rows": rows}


def _flatness(cfg, tol):
    metric = build_metric(cfg["metric"])
    rows = [(p[0], p[1], *flatness_defect(metric, p, _int(cfg, "n_dirs")))
            for p in _points(cfg)]
    return ("x", "y", "F1", "F2"), rows, {"rows": rows}


def _mono_report(cfg, tol):
    rep = mono_theorem_report(build_immersion(cfg["immersion"]), build_norm(cfg["norm"]),
                              _points(cfg), _int(cfg, "n"), tol["tau_eq"], tol["sff_scale"])
    rows = [(*r.point, r.mono_defect, r.euclidean_defect, r.sff_class) for r in rep.records]
    return ("x", "y", "mono_defect", "euclidean_defect", "class"), rows, rep.as_dict()


def _geodesic(cfg, tol):
    traj = integrate_geodesic(build_metric(cfg["metric"]), parse_array(cfg["x0"]),
                              parse_array(cfg["v0"]), parse_number(cfg["T"]), _int(cfg, "steps"))
    return CSV_COLUMNS, traj.rows(), traj.as_dict()


def _horizontal(cfg, tol):
    phi0 = build_planar(cfg["phi0"])
    vel = parse_array(cfg["velocity"])
    rows = [(y, horizontal_residual(phi0, y, vel)) for y in parse_array(cfg["y_grid"])]
    return ("y", "residual"), rows, {"rows": rows}


def _arc(cfg, tol):
    val = euclidean_arc_defect(build_planar(cfg["phi0"]), parse_number(cfg["theta_lo"]),
                               parse_number(cfg["theta_hi"]), _int(cfg, "n"))
    return ("arc_defect",), [(val,)], {"arc_defect": val}


# command -> (handler, required fields, optional fields with defaults)
COMMANDS = {
    "check-norm": (_check_norm, ("norm",), {"n_samples": 256}),
    "radial-profile": (_radial_profile, ("phi0",), {"n": 256}),
    "min-ellipse": (_min_ellipse, ("phi0",), {"n": 512}),
    "equivalence-defect": (_equivalence, ("phi1", "phi2"), {"n": 512}),
    "ellipse-defect": (_ellipse_defect, ("phi0",), {"n": 512}),
    "self-rotation-defect": (_self_rotation, ("phi0",), {"n_angles": 360, "n": 512}),
    "amu-scan": (_amu_scan, ("norm",),
                 {"center": [0.0, 0.0], "radius": 0.3, "count": 20, "n": 512,
                  "pairwise": False}),
    "kakutani-tau": (_kakutani, ("norm", "alpha"), {"m": 32}),
    "quadratic-fit": (_quadratic_fit, ("norm", "alphas"), {"per_plane_samples": 16}),
    "local-ellipsoid-check": (_local_ellipsoid, ("norm",),
                              {"center": [0.0, 0.0], "radius": 0.3, "count": 20, "n": 512}),
    "sff": (_sff, ("immersion", "points"), {}),
    "monochromatic-defect": (_mono_defect, ("metric", "points"), {"n": 512}),
    "euclidean-defect": (_euclidean_defect, ("metric", "points"), {"n": 512}),
    "flatness-defect": (_flatness, ("metric", "points"), {"n_dirs": 64}),
    "mono-report": (_mono_report, ("immersion", "norm", "points"), {"n": 512}),
    "geodesic": (_geodesic, ("metric", "x0", "v0"), {"T": 1.0, "steps": 1024}),
    "horizontal-residual": (_horizontal, ("phi0", "y_grid"), {"velocity": [1.0, 0.0]}),
    "arc-defect": (_arc, ("phi0", "theta_lo", "theta_hi"), {"n": 256}),
}


def resolve_config(raw):
    """Validate a raw config object and fill in defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    command = raw.get("command")
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}; known: {sorted(COMMANDS)}")
    _, required, optional = COMMANDS[command]
    allowed = {"command"} | set(required) | set(optional) | set(COMMON)
    for key in raw:
        if key not in allowed:
            raise ConfigError(f"unknown field {key!r} for command {command!r}")
    for key in required:
        if key not in raw:
            raise ConfigError(f"missing field {key!r} for command {command!r}")
    cfg = dict(COMMON)
    cfg.update(optional)
    cfg.update(raw)
    if cfg["format"] not in ("csv", "json"):
        raise ConfigError("format must be 'csv' or 'json'")
    if isinstance(cfg["seed"], bool) or not isinstance(cfg["seed"], int):
        raise ConfigError("seed must be an integer")
    if not isinstance(cfg["tolerances"], dict):
        raise ConfigError("tolerances must be an object")
    try:
        cfg["tolerances"] = resolve(cfg["tolerances"])
    except KeyError as err:
        raise ConfigError(f"unknown field {err.args[0]!r} in tolerances") from None
    return cfg


def config_hash(cfg):
    body = {k: v for k, v in cfg.items() if k != "output_path"}
    text = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x) + 0.0)
    return str(x)


def render_csv(header_lines, columns, rows):
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def provenance(cfg):
    return {"tool": "finslerkit", "version": __version__, "config_sha256": config_hash(cfg),
            "seed": cfg.get("seed"), "config": cfg, "tolerances": cfg.get("tolerances")}


def _header(prov):
    return [f"{prov['tool']} {prov['version']}",
            f"config_sha256: {prov['config_sha256']}",
            f"seed: {prov['seed']}",
            "config: " + json.dumps(prov["config"], sort_keys=True, separators=(",", ":")),
            "tolerances: " + json.dumps(prov["tolerances"], sort_keys=True,
                                        separators=(",", ":"))]


def run(raw, out=None, fmt=None, seed=None, threads=None, stdout=sys.stdout, stderr=sys.stderr):
    """Run one experiment config; returns the exit status."""
    try:
        if isinstance(raw, dict):
            raw = dict(raw)
            if seed is not None:
                raw["seed"] = seed
            if threads is not None:
                raw["threads"] = threads
            if fmt is not None:
                raw["format"] = fmt
            if out is not None:
                raw["output_path"] = out
        cfg = resolve_config(raw)
    except ConfigError as err:
        print(f"error: {err}", file=stderr)
        return 1
    handler = COMMANDS[cfg["command"]][0]
    try:
        columns, rows, payload = handler(cfg, cfg["tolerances"])
    except DomainError as err:
        print(f"error: DomainError: {err}", file=stderr)
        return 1
    except FinslerkitError as err:
        print(f"error: {type(err).__name__}: {err}", file=stderr)
        return 2
    prov = provenance(cfg)
    if cfg["format"] == "json":
        text = json.dumps(_jsonable({"provenance": prov, "result": payload}),
                          sort_keys=True, indent=2) + "\n"
    else:
        text = render_csv(_header(prov), columns, rows)
    _emit(text, cfg["output_path"], stdout)
    return 0


def _emit(text, path, stdout):
    if path:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        stdout.write(text)


def run_suite_cli(name, out=None, seed=0, threads=None, stdout=sys.stdout, stderr=sys.stderr):
    if name not in SUITES:
        print(f"error: unknown suite {name!r}; known: {list(SUITES)}", file=stderr)
        return 1
    cfg = {"suite": name, "seed": seed, "tolerances": resolve()}
    try:
        checks = run_suite(name, seed=seed, n_jobs=threads)
    except FinslerkitError as err:
        print(f"error: {type(err).__name__}: {err}", file=stderr)
        return 2
    rows = [c.row() for c in checks]
    prov = provenance(cfg)
    text = render_csv(_header(prov), CHECK_COLUMNS, rows)
    widths = [max(len(str(r[i])) for r in rows + [CHECK_COLUMNS])
              for i in range(len(CHECK_COLUMNS))]
    for r in [CHECK_COLUMNS] + rows:
        stdout.write("  ".join(str(x).ljust(w) for x, w in zip(r, widths)).rstrip() + "\n")
    failed = sum(not c.passed for c in checks)
    stdout.write(f"{name}: {len(checks) - failed} passed, {failed} failed\n")
    if out:
        _emit(text, out, stdout)
        with open(out, encoding="utf-8") as fh:
            written = fh.read()
        if f"config_sha256: {prov['config_sha256']}" not in written:
            print("error: config hash missing from written suite output", file=stderr)
            return 2
    return 0 if failed == 0 else 2


def build_parser():
    p = argparse.ArgumentParser(prog="finslerkit", description=__doc__.split("\n\n")[0])
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--config", help="path to a JSON experiment config")
    g.add_argument("--suite", help=f"run a verification bundle: {', '.join(SUITES)}")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), help="output format")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--threads", type=int, help="worker threads for independent work items")
    p.add_argument("--version", action="version", version=f"finslerkit {__version__}")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.suite is not None:
        return run_suite_cli(args.suite, args.out, args.seed or 0, args.threads)
    try:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        print(f"error: cannot read config: {err}", file=sys.stderr)
        return 1
    return run(raw, args.out, args.format, args.seed, args.threads)


if __name__ == "__main__":
    sys.exit(main())
