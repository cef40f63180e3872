"""Command-line front end.

Exit status: 0 on success, 1 when a computed result fails its check,
2 on usage or input errors.
"""

import argparse
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from .prefactored import BoundarySeed, prefactored_derivatives
from .stencils import get_stencil, read_grid_csv
from .verify import (
    convergence_study,
    convergence_summary,
    dispersion_curve,
    polynomial_audit,
    write_convergence_csv,
    write_json,
)
from .weights import (
    PRINTED_LOWER_BOUND,
    compare_systems,
    load_weights,
    mirror_backward,
    solve_weights,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

_EXPECTED = {"ccd6": (6, 0.3), "ccd8": (8, 0.4)}


class UsageError(Exception):
    pass


def _pair(text):
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'd1,d2', got {text!r}") from None
    return a, b


def build_parser():
    p = argparse.ArgumentParser(prog="prefccd", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check-stencils", help="polynomial-exactness audit of the centred stencils")
    c.add_argument("--scheme", choices=["ccd6", "ccd8", "ccd8-printed", "all"], default="all")
    c.add_argument("--out", help="write the audit as JSON")

    w = sub.add_parser("wavenumber", help="tabulate modified wavenumbers as CSV")
    w.add_argument("--scheme", choices=["ccd6", "ccd8", "ccd8-printed"], default="ccd6")
    w.add_argument("--source", choices=["printed", "oracle", "prefactored"], default="oracle")
    w.add_argument("--samples", type=int, default=64)
    w.add_argument("--weights", help="weights JSON, required for --source prefactored")
    w.add_argument("--out", help="CSV path (default: standard output)")

    s = sub.add_parser("solve-weights", help="solve for prefactored weights by multistart")
    s.add_argument("--target", choices=["ccd6", "ccd8"], default="ccd8")
    s.add_argument("--system", choices=["spectral", "printed"], default="spectral")
    s.add_argument("--starts", type=int, default=64)
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--tol", type=float, default=1e-12)
    s.add_argument("--max-iter", type=int, default=100)
    s.add_argument("--out", required=True, help="forward weights JSON")
    s.add_argument("--summary", help="summary JSON (default: <out stem>.summary.json)")

    d = sub.add_parser("differentiate", help="differentiate an x,u CSV by the two sweeps")
    d.add_argument("--weights", required=True, help="forward (or backward) weights JSON")
    d.add_argument("--backward", help="backward weights JSON (default: mirror of --weights)")
    d.add_argument("--input", required=True, help="CSV with header x,u on a uniform grid")
    d.add_argument("--out", help="CSV path for x,u,du,d2u (default: standard output)")
    d.add_argument("--left", type=_pair, help="exact 'd1,d2' at the first node")
    d.add_argument("--right", type=_pair, help="exact 'd1,d2' at the last node")

    v = sub.add_parser("convergence", help="order-of-accuracy study")
    v.add_argument("--method", choices=["combined", "prefactored"], default="combined")
    v.add_argument("--scheme", choices=["ccd6", "ccd8"], default="ccd6")
    v.add_argument("--testfn", choices=["sin", "exp", "gauss", "constant"], default="sin")
    v.add_argument("--ns", type=int, nargs="+", default=[16, 32, 64, 128])
    v.add_argument("--weights", help="forward weights JSON for --method prefactored")
    v.add_argument("--starts", type=int, default=64)
    v.add_argument("--seed", type=int, default=42)
    v.add_argument("--precision", choices=["extended", "double"], default="extended")
    v.add_argument("--out", required=True, help="convergence CSV")
    v.add_argument("--summary", help="summary JSON (default: <out stem>.summary.json)")
    return p


def _sibling(path, suffix):
    path = Path(path)
    return path.with_name(path.stem + suffix)


def _load(path):
    if not Path(path).is_file():
        raise UsageError(f"weights file not found: {path}")
    try:
        return load_weights(path)
    except (ValueError, KeyError) as exc:
        raise UsageError(str(exc)) from exc


def _weight_pair(fwd_path, bwd_path=None):
    wts, _ = _load(fwd_path)
    if wts.direction == "backward":
        raise UsageError(f"{fwd_path}: expected forward weights, got backward")
    if bwd_path is None:
        return wts, mirror_backward(wts)
    bwd, _ = _load(bwd_path)
    if bwd.direction != "backward":
        raise UsageError(f"{bwd_path}: expected backward weights")
    return wts, bwd


def cmd_check_stencils(args):
    names = ["ccd6", "ccd8", "ccd8-printed"] if args.scheme == "all" else [args.scheme]
    report = {}
    ok = True
    for name in names:
        st = get_stencil(name)
        audit = polynomial_audit(st)
        exact_to = -1
        for deg, r1, r2 in audit:
            if max(r1, r2) > 1e-12:
                break
            exact_to = deg
        defect = st.exact["s0"] + 2 * st.exact["s1"] + 2 * st.exact.get("s2", Fraction(0))
        consistent = name != "ccd8-printed"
        if consistent and exact_to < st.order:
            ok = False
        report[name] = {
            "order": st.order,
            "exact_through_degree": exact_to,
            "constant_defect": str(defect),
            "max_residual_by_degree": [[d, r1, r2] for d, r1, r2 in audit],
        }
        print(f"{name}: exact through degree {exact_to} (order {st.order}); "
              f"constant defect {defect}")
    if args.out:
        write_json(report, args.out)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_wavenumber(args):
    if args.samples < 4:
        raise UsageError("--samples must be at least 4")
    weights = None
    if args.source == "prefactored":
        if not args.weights:
            raise UsageError("--source prefactored requires --weights")
        weights, _ = _load(args.weights)
    curve = dispersion_curve(args.source, args.scheme, args.samples, weights)
    curve.to_csv(args.out if args.out else sys.stdout)
    return EXIT_OK


def cmd_solve_weights(args):
    if args.starts < 0:
        raise UsageError("--starts must be non-negative")
    if args.system == "printed" and args.target != "ccd8":
        raise UsageError("the printed system exists only for --target ccd8")
    sol = solve_weights(args.target, args.system, n_starts=args.starts, seed=args.seed,
                        tol=args.tol, max_iter=args.max_iter)
    norm = sol.report.residual_norm
    out = Path(args.out)
    back = _sibling(out, ".backward.json")
    sol.forward.save(out, sol.target, norm, args.system)
    sol.backward.save(back, sol.target, norm, args.system)

    summary = {
        "command": "solve-weights",
        "target": sol.target,
        "system": args.system,
        "starts": args.starts,
        "seed": args.seed,
        "tol": args.tol,
        "max_iter": args.max_iter,
        "forward": out.name,
        "backward": back.name,
        "residual_norm": norm,
        "converged": sol.report.converged,
        "start_index": sol.report.start_index,
        "iterations": sol.report.iterations,
        "condition_estimate": _finite_or_none(sol.report.condition_estimate),
        "distinct_roots": len(sol.roots),
        "admissible": sol.admissible,
        "decay_rate": sol.decay_rate,
        "validation": {k: _finite_or_none(v) for k, v in sol.validation.maxima().items()},
        "validated": sol.validated,
    }
    if args.system == "printed":
        spectral = solve_weights(args.target, "spectral", n_starts=args.starts, seed=args.seed,
                                 tol=args.tol, max_iter=args.max_iter)
        summary["comparison"] = compare_systems(sol, spectral)
        ok = spectral.validated and (sol.report.converged or norm >= PRINTED_LOWER_BOUND)
    else:
        ok = sol.validated and norm <= 1e-10
    summary["passed"] = bool(ok)
    write_json(summary, args.summary or _sibling(out, ".summary.json"))
    print(f"{sol.target}/{args.system}: residual {norm:.3e}, "
          f"decay rate {sol.decay_rate:.6f}, validated {sol.validated}")
    return EXIT_OK if ok else EXIT_FAIL


def _finite_or_none(v):
    return float(v) if v is not None and math.isfinite(v) else None


def cmd_differentiate(args):
    fwd, bwd = _weight_pair(args.weights, args.backward)
    if not Path(args.input).is_file():
        raise UsageError(f"input file not found: {args.input}")
    try:
        grid = read_grid_csv(args.input)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if grid.n < 6:
        raise UsageError("differentiate needs at least 6 grid points")
    left = BoundarySeed.exact(*args.left) if args.left else BoundarySeed()
    right = BoundarySeed.exact(*args.right) if args.right else BoundarySeed()
    d = prefactored_derivatives(fwd, bwd, grid, left, right)
    d.to_csv(grid, args.out if args.out else sys.stdout)
    return EXIT_OK


def cmd_convergence(args):
    ns = args.ns
    if len(ns) < 3 or min(ns) < 16 or sorted(set(ns)) != ns:
        raise UsageError("--ns needs at least three increasing sizes, each >= 16")
    dtype = np.longdouble if args.precision == "extended" else np.float64
    weights = None
    provenance = {}
    if args.method == "prefactored":
        if args.weights:
            weights = _weight_pair(args.weights)
            provenance["weights"] = Path(args.weights).name
        else:
            sol = solve_weights(args.scheme, n_starts=args.starts, seed=args.seed)
            if not sol.validated:
                print(f"no validated weights for {args.scheme}", file=sys.stderr)
                return EXIT_FAIL
            weights = (sol.forward, sol.backward)
            provenance.update(starts=args.starts, seed=args.seed)
    result = convergence_study(args.method, args.scheme, args.testfn, ns, weights, dtype)
    write_convergence_csv(result.rows, args.out)
    order, tol = _EXPECTED[args.scheme]
    summary = convergence_summary(result, args.method, args.scheme, args.testfn, order, tol)
    summary["precision"] = args.precision
    summary.update(provenance)
    write_json(summary, args.summary or _sibling(args.out, ".summary.json"))
    print(f"{args.method}/{args.scheme}/{args.testfn}: slopes "
          f"{result.slope_first:.3f} (first), {result.slope_second:.3f} (second)")
    failed = summary["pass_first"] is False
    return EXIT_FAIL if failed else EXIT_OK


COMMANDS = {
    "check-stencils": cmd_check_stencils,
    "wavenumber": cmd_wavenumber,
    "solve-weights": cmd_solve_weights,
    "differentiate": cmd_differentiate,
    "convergence": cmd_convergence,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"prefccd {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"prefccd {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"prefccd {args.command}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
