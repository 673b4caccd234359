"""Command-line front end.

Exit codes: 0 success, 1 failed check, 2 input error, 3 unmet theorem
hypothesis, 4 nonconvergence.
"""

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .density import Params, ball_mass
from .errors import DomainError, GGMinkError, PreconditionError
from .geometry import Polytope
from .inequalities import SUITES, estimate_half_profile, suite_from_config, threshold_report
from .isotropic import constant_roots, critical_constant, phi_curve_csv
from .ma2d import PeriodicField, continuity_solve, field_from_config, field_from_csv, two_branch_solve
from .measures import volume_and_facet_masses, weighted_surface_measure
from .normalized import problem_from_json, solve_problem

SCHEMA = "ggmink-report/1"


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj):
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def parse_params(text):
    try:
        parts = [float(s) for s in text.split(",")]
    except ValueError:
        raise DomainError(f"--params expects n,alpha,q[,p], got {text!r}") from None
    if len(parts) not in (3, 4) or parts[0] != int(parts[0]):
        raise DomainError(f"--params expects n,alpha,q[,p], got {text!r}")
    return Params(int(parts[0]), parts[1], parts[2], parts[3] if len(parts) == 4 else 1.0)


def _floats(text, name):
    try:
        return [float(s) for s in text.split(",")]
    except ValueError:
        raise DomainError(f"{name} expects comma-separated numbers, got {text!r}") from None


def _read(path):
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise DomainError(f"cannot read {path}: {exc.strerror}") from None


def _load_json(path):
    try:
        return json.loads(_read(path))
    except json.JSONDecodeError as exc:
        raise DomainError(f"{path} is not valid JSON: {exc}") from None


def _report(args, params, **body):
    out = {"schema": SCHEMA, "version": __version__, "command": args.command,
           "params": params.as_dict() if params is not None else None,
           "grid": args.grid, "seed": args.seed, "tol": args.tol}
    out.update(body)
    return out


def _emit(args, primary, report=None):
    """Primary artifact to --out (report then goes to stdout) or to stdout."""
    if args.out:
        Path(args.out).write_text(primary)
        if report is not None:
            sys.stdout.write(dumps(report))
    else:
        sys.stdout.write(primary)


def _body_from_args(args, params, m=None):
    """(polytope, description) from --body, --ball or --box."""
    if args.body:
        data = _load_json(args.body)
        if isinstance(data, dict) and "body" in data:
            data = data["body"]
        return Polytope.from_dict(data), {"source": "file", "path": str(args.body)}
    if args.box:
        widths = _floats(args.box, "--box")
        if len(widths) != params.n:
            raise DomainError(f"--box needs {params.n} half-widths")
        return Polytope.box(widths), {"source": "box", "half_widths": widths}
    if args.ball is not None:
        return Polytope.ball(params.n, args.ball, m or args.grid), {"source": "ball", "radius": args.ball}
    raise DomainError("give a body with --body, --ball or --box")


def cmd_volume(args, params):
    tol = args.tol or 1e-13
    if args.body or args.box:
        K, desc = _body_from_args(args, params)
        G, _ = volume_and_facet_masses(params, K, tol)
        G_fine, _ = volume_and_facet_masses(params, K, tol * 1e-2)
        est, method = abs(G - G_fine), "quadrature tolerance refinement"
    else:
        m = args.grid or (256 if params.n == 2 else 512)
        K, desc = _body_from_args(args, params, m)
        G, _ = volume_and_facet_masses(params, K, tol)
        K2, _ = _body_from_args(args, params, 2 * m)
        G2, _ = volume_and_facet_masses(params, K2, tol)
        est, method = abs(G - G2), "grid m vs 2m"
        desc["exact_ball_mass"] = ball_mass(params, args.ball)
    rep = _report(args, params, G=G, error_estimate=est, error_method=method, body=desc,
                  facets=K.num_facets)
    _emit(args, dumps(rep))
    return 0


def cmd_surface_measure(args, params):
    m = args.grid or (256 if params.n == 2 else 512)
    K, desc = _body_from_args(args, params, m)
    atoms = weighted_surface_measure(params, K, params.p)
    rep = _report(args, params, body=desc, atoms=len(atoms), total=float(atoms.weights.sum()))
    _emit(args, atoms.to_csv(), rep)
    return 0


def cmd_solve_normalized(args, params):
    if not args.problem:
        raise DomainError("solve-normalized needs --problem PATH")
    file_params, mu, c = problem_from_json(_read(args.problem))
    params = params or file_params
    sol = solve_problem(params, mu, c, args.tol or 1e-5)
    rep = _report(args, params, measure=mu.to_dict(), c=c, solution=sol.to_dict(params))
    _emit(args, dumps(rep))
    return 0


def _forcing(args, m):
    if args.forcing:
        text = _read(args.forcing)
        if args.forcing.endswith(".csv"):
            return field_from_csv(text)
        try:
            cfg = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DomainError(f"{args.forcing} is not valid JSON: {exc}") from None
        return field_from_config(cfg, m)
    if args.f_cos:
        vals = _floats(args.f_cos, "--f-cos")
        if len(vals) != 3:
            raise DomainError("--f-cos expects c,amp,mode")
        return PeriodicField.cosine(vals[0], vals[1], int(vals[2]), m)
    raise DomainError("give the forcing with --forcing PATH or --f-cos c,amp,mode")


def cmd_solve_ma2d(args, params):
    if params.n != 2:
        raise DomainError("solve-ma2d is planar: n must be 2")
    m = args.grid or 512
    f = _forcing(args, m)
    tol = args.tol or 1e-10
    if params.p >= params.n:
        sol = continuity_solve(params, f, tol=tol)
        rep = _report(args, params, mode="continuity", solution=sol.summary())
        _emit(args, sol.to_csv(params, f), rep)
    elif params.p >= 1.0:
        res = two_branch_solve(params, f, tol=tol)
        rep = _report(args, params, mode="two-branch", solution=res.summary())
        low = res.low.to_csv(params, f).splitlines()
        high = res.high.to_csv(params, f).splitlines()
        rows = ["theta,h_low,dh_low,residual_low,h_high,dh_high,residual_high"]
        rows += [a + "," + b.split(",", 1)[1] for a, b in zip(low[1:], high[1:])]
        _emit(args, "\n".join(rows) + "\n", rep)
    else:
        raise PreconditionError("the planar solver covers p >= 1 only")
    return 0


def cmd_isotropic(args, params):
    crit = critical_constant(params)
    values = []
    if args.c:
        values = _floats(args.c, "--c")
    elif crit.exists:
        values = [0.5 * crit.c_star, crit.c_star, 2.0 * crit.c_star]
    rows = [constant_roots(params, c).as_dict() for c in values]
    rep = _report(args, params, critical=crit.as_dict(), trichotomy=rows)
    if args.curve:
        Path(args.curve).write_text(phi_curve_csv(params, values[0] if values else None))
    _emit(args, dumps(rep))
    return 0


def cmd_check(args, params):
    if args.config:
        cfg = _load_json(args.config)
    else:
        if not args.suite:
            raise DomainError(f"check needs a suite name ({', '.join(SUITES + ('threshold',))}) or --config")
        cfg = {"suite": args.suite, "n": args.n, "trials": args.trials, "seed": args.seed}
        if args.grid:
            cfg["grid"] = args.grid
        if args.params:
            cfg["params"] = [[params.n, params.alpha, params.q, params.p]]
    if cfg.get("suite") == "threshold":
        params = params or Params(int(cfg.get("n", 2)), 2.0, 0.0, 1.0)
        est = estimate_half_profile(params, int(cfg.get("trials", 100)), int(cfg.get("seed", 0)), args.grid)
        i_half = cfg.get("I_half") or est["estimate"]
        rep = _report(args, params, suite="threshold", estimate=est, I_half=i_half,
                      threshold=threshold_report(params, i_half))
        _emit(args, dumps(rep))
        return 0
    result = suite_from_config(cfg)
    rep = _report(args, None, suite=cfg["suite"], config=cfg, report=result.to_dict())
    _emit(args, dumps(rep))
    return 0 if result.ok else 1


COMMANDS = {"volume": cmd_volume, "surface-measure": cmd_surface_measure,
            "solve-normalized": cmd_solve_normalized, "solve-ma2d": cmd_solve_ma2d,
            "isotropic": cmd_isotropic, "check": cmd_check}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--params", help="n,alpha,q[,p]")
    common.add_argument("--grid", type=int, help="grid size m")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", type=float)
    common.add_argument("--out", help="output path (default: stdout)")

    body = argparse.ArgumentParser(add_help=False)
    body.add_argument("--body", help="polytope JSON")
    body.add_argument("--ball", type=float, help="radius of a centered ball")
    body.add_argument("--box", help="comma-separated half-widths of a centered box")

    parser = argparse.ArgumentParser(prog="ggmink", description="Generalized Gaussian Minkowski problem toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("volume", parents=[common, body], help="generalized Gaussian volume G(K)")
    sub.add_parser("surface-measure", parents=[common, body], help="L_p surface measure atoms as CSV")
    p = sub.add_parser("solve-normalized", parents=[common], help="normalized problem for a discrete measure")
    p.add_argument("--problem", help="problem JSON {params, measure, c}")
    p = sub.add_parser("solve-ma2d", parents=[common], help="planar Monge-Ampere solver")
    p.add_argument("--forcing", help="forcing as JSON config or CSV (theta,f)")
    p.add_argument("--f-cos", help="forcing c*(1 + amp*cos(mode*theta)) given as c,amp,mode")
    p = sub.add_parser("isotropic", parents=[common], help="constant-solution trichotomy")
    p.add_argument("--c", help="comma-separated constants (default c*/2, c*, 2c*)")
    p.add_argument("--curve", help="write the Phi curve CSV here")
    p = sub.add_parser("check", parents=[common], help="randomized inequality suites")
    p.add_argument("suite", nargs="?", help=", ".join(SUITES + ("threshold",)))
    p.add_argument("--config", help="suite config JSON")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--trials", type=int, default=20)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        params = parse_params(args.params) if args.params else None
        if params is None and args.command not in ("solve-normalized", "check"):
            raise DomainError("--params n,alpha,q[,p] is required")
        if args.tol is not None and not args.tol > 0:
            raise DomainError("--tol must be positive")
        return COMMANDS[args.command](args, params)
    except GGMinkError as exc:
        sys.stderr.write(f"ggmink: {type(exc).__name__}: {exc}\n")
        return exc.exit_code
    except (ValueError, KeyError, TypeError) as exc:
        sys.stderr.write(f"ggmink: input error: {exc}\n")
        return 2


def entry():
    sys.exit(main())


__all__ = ["main", "entry", "build_parser", "parse_params"]
