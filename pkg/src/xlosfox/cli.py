"""Command-line interface.

Subcommands: foxh-eval, foxh-contour, xlos, cubature-dump. Every run writes a
JSON manifest (argv, input and output hashes, seed, budgets, version, wall
time) next to its output.

Exit codes: 0 success, 2 bad input, 3 no valid contour, 4 evaluation
failure, 5 method not applicable to the scenario.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field

from . import __version__
from .contour import DEFAULT_EPSILON, NoValidContourError, plan_contour, validate_contour
from .cubature import product_gauss_hermite
from .foxh import (ContourError, ContourSpec, EvalOptions, EvaluationError, ParamFileError,
                   evaluate, load_params)
from .network import BUNDLED_SCENARIOS, ScenarioFileError, bundled_path, load_scenario
from .simulate import SimConfig, WindowTooSmallError, simulate_equivalent, simulate_physical
from .special_fn import PoleError
from .xlos import MAX_M, QuadratureError, XlosQuery, xlos_asymptotic, xlos_closed_form, \
    xlos_oracle_m1

__all__ = ["main", "parse_grid", "RunManifest", "CSV_HEADER"]

EXIT_OK, EXIT_INPUT, EXIT_CONTOUR, EXIT_EVAL, EXIT_METHOD = 0, 2, 3, 4, 5
CSV_HEADER = ("k_th_dB", "method", "p_xlos", "stderr", "ci95", "seed")
_GRID_TOL = 1e-9
_METHOD_NAMES = {"closed": "closed_form", "asym-low": "asymptotic_low",
                 "asym-high": "asymptotic_high", "oracle-m1": "oracle_m1",
                 "sim": "sim_equivalent", "sim-physical": "sim_physical"}


class _Fail(Exception):
    def __init__(self, code, message):
        self.code = code
        super().__init__(message)


@dataclass
class RunManifest:
    argv: list
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    seed: int | None = None
    budgets: dict = field(default_factory=dict)
    version: str = __version__
    wall_time_s: float = 0.0

    def write(self, path):
        with open(path, "w") as fh:
            json.dump(self.__dict__, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def parse_grid(text):
    """'a:b:step' (inclusive of b within 1e-9) or a single value."""
    parts = text.split(":")
    try:
        nums = [float(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None
    if len(nums) == 1:
        return nums
    if len(nums) != 3:
        raise argparse.ArgumentTypeError(f"grid must be a:b:step, got {text!r}")
    a, b, step = nums
    if step == 0 or (b - a) * step < 0:
        raise argparse.ArgumentTypeError(f"step {step:g} does not lead from {a:g} to {b:g}")
    n = int(math.floor((b - a) / step + _GRID_TOL)) + 1
    return [a + k * step for k in range(n)]


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {v}")
    return v


def build_parser():
    p = argparse.ArgumentParser(prog="xlosfox", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    fe = sub.add_parser("foxh-eval", help="evaluate a Fox H-function from a parameter file")
    fe.add_argument("params")
    fe.add_argument("--contour", help="JSON file with {abscissa, half_height}")
    fe.add_argument("--plan", action="store_true",
                    help="plan a contour even if the parameter file carries one")
    fe.add_argument("--points", type=_positive_int)
    fe.add_argument("--replicates", type=_positive_int, default=1)
    fe.add_argument("--seed", type=int, default=0)
    fe.add_argument("--height", type=_positive_float, help="half-height W (default 10)")
    fe.add_argument("--out", help="write the result as JSON")
    fe.add_argument("--manifest")

    fc = sub.add_parser("foxh-contour", help="plan a contour for a parameter file")
    fc.add_argument("params")
    fc.add_argument("--height", type=_positive_float, default=10.0)
    fc.add_argument("--epsilon", type=_positive_float, default=DEFAULT_EPSILON)
    fc.add_argument("--out")
    fc.add_argument("--manifest")

    xl = sub.add_parser("xlos", help="XLOS probability over a threshold grid")
    xl.add_argument("scenario", help=f"scenario file or bundled name {BUNDLED_SCENARIOS}")
    xl.add_argument("--kth", type=parse_grid, required=True, help="a:b:step in dB")
    xl.add_argument("--method", choices=sorted(_METHOD_NAMES), default="closed")
    xl.add_argument("--monitor", type=_positive_int, help="override the monitoring set size M")
    xl.add_argument("--trials", type=_positive_int, default=100_000)
    xl.add_argument("--seed", type=int, default=0)
    xl.add_argument("--order", type=_positive_int)
    xl.add_argument("--points", type=_positive_int)
    xl.add_argument("--replicates", type=_positive_int, default=1)
    xl.add_argument("--out")
    xl.add_argument("--manifest")

    cd = sub.add_parser("cubature-dump", help="write Gauss-Hermite weights and abscissas")
    cd.add_argument("M", type=int)
    cd.add_argument("order", type=int)
    cd.add_argument("--out")
    cd.add_argument("--manifest")
    return p


_BUNDLED_PARAMS = ("h1", "h2", "infeasible")


def _params_path(arg):
    if not os.path.exists(arg) and arg.lower() in _BUNDLED_PARAMS:
        return str(bundled_path(f"{arg.lower()}.json"))
    return arg


def _load_params(path):
    try:
        return load_params(path)
    except OSError as exc:
        raise _Fail(EXIT_INPUT, f"{path}: {exc.strerror}") from None
    except ParamFileError as exc:
        raise _Fail(EXIT_INPUT, f"{path}: {exc}") from None


def _load_contour(path, dim):
    try:
        with open(path) as fh:
            raw = json.load(fh)
        c = ContourSpec(tuple(raw["abscissa"]), raw.get("half_height", 10.0))
    except OSError as exc:
        raise _Fail(EXIT_INPUT, f"{path}: {exc.strerror}") from None
    except (KeyError, TypeError, ValueError) as exc:
        raise _Fail(EXIT_INPUT, f"{path}: contour: {exc}") from None
    if c.dim != dim:
        raise _Fail(EXIT_INPUT, f"{path}: contour.abscissa: expected {dim} values")
    return c


def _contour_lines(contour):
    lines = []
    for lo, hi in zip(contour.lower, contour.upper):
        lines.append(f"{lo.real: .4f} {lo.imag:+.4f}i    {hi.real: .4f} {hi.imag:+.4f}i")
    return lines


def _emit(text, out):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _plan(params, W, epsilon=DEFAULT_EPSILON):
    try:
        return plan_contour(params, W, epsilon)
    except NoValidContourError as exc:
        raise _Fail(EXIT_CONTOUR, f"no valid contour: {exc}") from None


def cmd_foxh_eval(args, manifest):
    path = _params_path(args.params)
    params, contour = _load_params(path)
    manifest.inputs[args.params] = _sha256(path)
    if args.contour:
        contour = _load_contour(args.contour, params.dim)
        manifest.inputs[args.contour] = _sha256(args.contour)
    if contour is None or args.plan:
        contour = _plan(params, args.height or 10.0)
        print("planned contour:")
        print("\n".join(_contour_lines(contour)))
    elif args.height:
        contour = ContourSpec(contour.abscissa, args.height)
    opts = EvalOptions(points=args.points, replicates=args.replicates, seed=args.seed)
    manifest.seed = args.seed
    manifest.budgets = {"points": opts.budget(params.dim), "replicates": opts.replicates,
                        "half_height": contour.half_height}
    try:
        res = evaluate(params, contour, opts)
    except (ContourError, EvaluationError, PoleError) as exc:
        raise _Fail(EXIT_EVAL, f"evaluation failed: {exc}") from None
    est = res.estimate
    print(f"estimate: {est.real:.6f} {est.imag:+.6f}i  stderr: {res.stderr:.2e}  "
          f"points: {res.points_used}")
    if args.out:
        _emit(json.dumps({"re": est.real, "im": est.imag, "stderr": res.stderr,
                          "points_used": res.points_used,
                          "contour": {"abscissa": list(contour.abscissa),
                                      "half_height": contour.half_height}}, indent=2) + "\n",
              args.out)


def cmd_foxh_contour(args, manifest):
    path = _params_path(args.params)
    params, _ = _load_params(path)
    manifest.inputs[args.params] = _sha256(path)
    contour = _plan(params, args.height, args.epsilon)
    ok = validate_contour(params, contour, args.epsilon)
    text = "\n".join(_contour_lines(contour)
                     + [f"sum of abscissas: {sum(contour.abscissa):.10g}",
                        f"feasible: {str(ok).lower()}"]) + "\n"
    _emit(text, args.out)


def _scenario(arg, manifest):
    path = arg
    if not os.path.exists(arg) and arg.lower() in BUNDLED_SCENARIOS:
        path = str(bundled_path(f"{arg.lower()}.json"))
    try:
        sc = load_scenario(path)
    except OSError as exc:
        raise _Fail(EXIT_INPUT, f"{arg}: {exc.strerror}") from None
    except ScenarioFileError as exc:
        raise _Fail(EXIT_INPUT, f"{arg}: {exc}") from None
    manifest.inputs[arg] = _sha256(path)
    return sc


def _fmt(x):
    return repr(float(x))


def cmd_xlos(args, manifest):
    sc = _scenario(args.scenario, manifest)
    if args.monitor:
        sc = sc.with_M(args.monitor)
    method = _METHOD_NAMES[args.method]
    if method == "oracle_m1" and sc.monitor_set_size != 1:
        raise _Fail(EXIT_METHOD, f"oracle-m1 needs a monitoring set of size 1, "
                                 f"scenario has M = {sc.monitor_set_size}")
    if method == "closed_form" and sc.monitor_set_size > MAX_M:
        raise _Fail(EXIT_METHOD, f"closed form supports M <= {MAX_M}, "
                                 f"scenario has M = {sc.monitor_set_size}")
    opts = EvalOptions(points=args.points, replicates=args.replicates, seed=args.seed)
    manifest.seed = args.seed
    manifest.budgets = {"trials": args.trials, "order": args.order, "points": args.points,
                        "replicates": args.replicates}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for k in args.kth:
        try:
            p, se, ci = _xlos_point(method, sc, k, args, opts)
        except (ContourError, EvaluationError, PoleError, QuadratureError,
                WindowTooSmallError) as exc:
            raise _Fail(EXIT_EVAL, f"K_th = {k:g} dB: {exc}") from None
        except NoValidContourError as exc:
            raise _Fail(EXIT_CONTOUR, f"no valid contour: {exc}") from None
        w.writerow([_fmt(k), args.method, _fmt(p), _fmt(se), _fmt(ci), args.seed])
    _emit(buf.getvalue(), args.out)


def _xlos_point(method, sc, k, args, opts):
    if method == "oracle_m1":
        return xlos_oracle_m1(sc, k), 0.0, 0.0
    if method in ("sim_equivalent", "sim_physical"):
        fn = simulate_equivalent if method == "sim_equivalent" else simulate_physical
        r = fn(sc, k, SimConfig(args.trials, seed=args.seed))
        return r.estimate, math.sqrt(r.estimate * (1 - r.estimate) / r.trials), r.ci95_halfwidth
    q = XlosQuery(sc, k, args.order, opts)
    if method == "closed_form":
        r = xlos_closed_form(q)
    else:
        r = xlos_asymptotic(q, "high" if method == "asymptotic_high" else "low")
    return r.probability, r.stderr, 1.96 * r.stderr


def cmd_cubature_dump(args, manifest):
    try:
        cub = product_gauss_hermite(args.M, args.order)
    except ValueError as exc:
        raise _Fail(EXIT_INPUT, str(exc)) from None
    manifest.budgets = {"M": args.M, "order": args.order}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["l", "w"] + [f"u_{m + 1}" for m in range(cub.dim)])
    for l in range(cub.count):
        w.writerow([l + 1, _fmt(cub.weights[l])] + [_fmt(u) for u in cub.abscissas[l]])
    _emit(buf.getvalue(), args.out)


def _join_negative_grid(argv):
    # let "--kth -10:20:5" through argparse, which would read it as a flag
    out = []
    i = 0
    while i < len(argv):
        if argv[i] == "--kth" and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"--kth={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


_COMMANDS = {"foxh-eval": cmd_foxh_eval, "foxh-contour": cmd_foxh_contour,
             "xlos": cmd_xlos, "cubature-dump": cmd_cubature_dump}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(_join_negative_grid(argv))
    manifest = RunManifest(argv=argv)
    t0 = time.perf_counter()
    try:
        _COMMANDS[args.command](args, manifest)
    except _Fail as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    manifest.wall_time_s = time.perf_counter() - t0
    if args.out:
        manifest.outputs[args.out] = _sha256(args.out)
    path = args.manifest or (f"{args.out}.manifest.json" if args.out
                             else f"{args.command}.manifest.json")
    manifest.write(path)
    return EXIT_OK
