"""Convergence studies, dispersion curves and symmetry checks."""

import json
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.polynomial import hermite

from .prefactored import BoundarySeed, prefactored_derivatives
from .spectral import combined_symbol_oracle, prefactored_symbol, printed_symbol
from .stencils import (
    CombinedStencil,
    ExactBoundary,
    GridFunction,
    _write_csv,
    get_stencil,
    solve_combined,
    stencil_residual,
)
from .weights import PrefactoredWeights

__all__ = [
    "TEST_FUNCTIONS",
    "ConvergenceRow",
    "ConvergenceResult",
    "convergence_study",
    "fit_slope",
    "write_convergence_csv",
    "convergence_summary",
    "write_json",
    "DispersionCurve",
    "dispersion_curve",
    "SymmetryReport",
    "symmetry_report",
    "polynomial_audit",
]


def _sin(k, x):
    return np.sin(x + k * (np.pi / 2))


def _exp(k, x):
    return np.exp(x)


def _gauss(k, x):
    # d^k/dx^k exp(-z^2) with z = 5(x - 1/2) is (-5)^k H_k(z) exp(-z^2)
    z = 5 * (x - 0.5)
    coef = np.zeros(k + 1)
    coef[k] = 1.0
    return (-5.0) ** k * hermite.hermval(z, coef) * np.exp(-z * z)


def _constant(k, x):
    return np.ones_like(x) if k == 0 else np.zeros_like(x)


# name -> (interval, k-th derivative)
TEST_FUNCTIONS = {
    "sin": ((0.0, 2 * np.pi), _sin),
    "exp": ((0.0, 1.0), _exp),
    "gauss": ((0.0, 1.0), _gauss),
    "constant": ((0.0, 1.0), _constant),
}


class ConvergenceRow(NamedTuple):
    n: int
    h: float
    err_first: float
    err_second: float


class ConvergenceResult(NamedTuple):
    """Rows of a study and the fitted slopes; a slope is NaN when the fit was skipped."""

    rows: list
    slope_first: float
    slope_second: float

    @property
    def skipped(self):
        return math.isnan(self.slope_first) or math.isnan(self.slope_second)


def fit_slope(h, err, floor=0.0):
    """Least-squares slope of ``log err`` against ``log h``.

    Points with ``err <= floor`` sit at round-off level and are dropped;
    fewer than two remaining points give NaN.
    """
    h = np.asarray(h, dtype=float)
    err = np.asarray(err, dtype=float)
    keep = err > floor
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(h[keep]), np.log(err[keep]), 1)[0])


def _fit_above(h, err, floors):
    keep = np.asarray(err) > np.asarray(floors)
    if keep.sum() < 2:
        return float("nan")
    return fit_slope(np.asarray(h)[keep], np.asarray(err)[keep])


def _resolve_pair(weights):
    if weights is None:
        return None
    fwd, bwd = weights
    if not (isinstance(fwd, PrefactoredWeights) and isinstance(bwd, PrefactoredWeights)):
        raise TypeError("weights must be a (forward, backward) pair of PrefactoredWeights")
    return fwd, bwd


def convergence_study(method, scheme, testfn, ns, weights=None, dtype=np.longdouble,
                      seed_order=10, exclude=3):
    """Max-norm errors of a differentiator on a sequence of grids.

    Parameters
    ----------
    method : {'combined', 'prefactored'}
        Global block solve or the two explicit sweeps.
    scheme : str or CombinedStencil
        Scheme name; for ``prefactored`` it only labels the run unless
        ``weights`` is omitted, in which case the weights are solved for.
    testfn : str
        Key of :data:`TEST_FUNCTIONS`.
    ns : sequence of int
        At least three grid sizes, each at least 16.
    weights : (PrefactoredWeights, PrefactoredWeights), optional
        Forward/backward pair for ``prefactored``.
    dtype : numpy dtype
        Working precision. The default extended precision keeps the
        eighth-order errors above round-off on the finest default grid.
    seed_order : int
        Number of exact derivatives handed to the sweep seeds.
    exclude : int
        Nodes dropped at each end for the prefactored error norm.

    Returns
    -------
    ConvergenceResult
    """
    ns = [int(n) for n in ns]
    if len(ns) < 3 or min(ns) < 16:
        raise ValueError("need at least three grid sizes, each >= 16")
    if sorted(set(ns)) != ns:
        raise ValueError("grid sizes must be strictly increasing")
    if testfn not in TEST_FUNCTIONS:
        raise ValueError(f"unknown test function {testfn!r}; expected one of {sorted(TEST_FUNCTIONS)}")
    (a, b), deriv = TEST_FUNCTIONS[testfn]
    if method == "combined":
        stencil = scheme if isinstance(scheme, CombinedStencil) else get_stencil(scheme)
        skip = 0
    elif method == "prefactored":
        pair = _resolve_pair(weights)
        if pair is None:
            from .weights import solve_weights

            sol = solve_weights(scheme)
            pair = (sol.forward, sol.backward)
        skip = exclude
    else:
        raise ValueError(f"unknown method {method!r}; expected 'combined' or 'prefactored'")

    rows = []
    floors1, floors2 = [], []
    # prefactored weights are double-precision roots, accurate to about 1e-14
    eps = max(100 * float(np.finfo(dtype).eps), 1e-14 if method == "prefactored" else 0.0)
    for n in ns:
        grid = GridFunction.sample(lambda x: deriv(0, x), a, b, n, dtype=dtype)
        x = grid.x
        if method == "combined":
            bc = ExactBoundary.from_functions(
                stencil, grid, lambda t: deriv(1, t), lambda t: deriv(2, t))
            d = solve_combined(stencil, grid, bc)
        else:
            left = BoundarySeed.from_derivative(deriv, x[0], seed_order)
            right = BoundarySeed.from_derivative(deriv, x[-1], seed_order)
            d = prefactored_derivatives(pair[0], pair[1], grid, left, right)
        sl = slice(skip, n - skip)
        e1 = np.abs(d.first - deriv(1, x))[sl].max()
        e2 = np.abs(d.second - deriv(2, x))[sl].max()
        h = float(grid.h)
        umax = max(float(np.abs(grid.values).max()), 1e-300)
        # round-off in the stencil sums grows like |u|/h and |u|/h**2
        floors1.append(eps * umax / h)
        floors2.append(eps * umax / h**2)
        rows.append(ConvergenceRow(n, h, float(e1), float(e2)))

    hs = [r.h for r in rows]
    e1s = np.array([r.err_first for r in rows])
    e2s = np.array([r.err_second for r in rows])
    if np.all(e1s <= 1e-12) and np.all(e2s <= 1e-12):
        # exact reproduction (constants, low-degree polynomials): nothing to fit
        return ConvergenceResult(rows, float("nan"), float("nan"))
    s1 = _fit_above(hs, e1s, floors1)
    s2 = _fit_above(hs, e2s, floors2)
    return ConvergenceResult(rows, s1, s2)


def write_convergence_csv(rows, path_or_file):
    """``n,h,err_first,err_second`` with 15 significant digits."""
    def emit(fh):
        fh.write("n,h,err_first,err_second\n")
        for r in rows:
            fh.write(f"{r.n},{r.h:.15g},{r.err_first:.15g},{r.err_second:.15g}\n")

    if hasattr(path_or_file, "write"):
        emit(path_or_file)
    else:
        with open(path_or_file, "w", newline="", encoding="utf-8") as fh:
            emit(fh)


def convergence_summary(result, method, scheme, testfn, expected_order, slope_tol):
    """Plain dict for the summary JSON of a study."""
    def check(slope):
        return None if math.isnan(slope) else bool(abs(slope - expected_order) <= slope_tol)

    def num(v):
        return None if math.isnan(v) else v

    return {
        "method": method,
        "scheme": scheme if isinstance(scheme, str) else scheme.name,
        "testfn": testfn,
        "ns": [r.n for r in result.rows],
        "expected_order": expected_order,
        "slope_tolerance": slope_tol,
        "slope_first": num(result.slope_first),
        "slope_second": num(result.slope_second),
        "pass_first": check(result.slope_first),
        "pass_second": check(result.slope_second),
        "fit_skipped": result.skipped,
    }


def write_json(obj, path):
    """Deterministic JSON: insertion order kept, two-space indent, trailing newline."""
    text = json.dumps(obj, indent=2, allow_nan=False) + "\n"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


DISPERSION_HEADER = ["w", "re_wp", "im_wp", "re_wpp2", "im_wpp2", "exact_wp", "exact_wpp2"]


@dataclass(frozen=True)
class DispersionCurve:
    """Modified wavenumbers on ``w_k = k pi / n``, ``k = 1 .. n``."""

    source: str
    scheme: str
    w: np.ndarray
    re_wp: np.ndarray
    im_wp: np.ndarray
    re_wpp2: np.ndarray
    im_wpp2: np.ndarray

    @property
    def error_first(self):
        """Resolution error ``|w' - w|`` of the first derivative."""
        return np.abs(self.re_wp + 1j * self.im_wp - self.w)

    @property
    def error_second(self):
        return np.abs(self.re_wpp2 + 1j * self.im_wpp2 - self.w**2)

    def rows(self):
        return zip(self.w, self.re_wp, self.im_wp, self.re_wpp2, self.im_wpp2,
                   self.w, self.w**2)

    def to_csv(self, path_or_file):
        _write_csv(path_or_file, DISPERSION_HEADER, self.rows(), ".15g")


def dispersion_curve(source, scheme, nsamples, weights=None):
    """Tabulate the modified wavenumbers of one scheme.

    Parameters
    ----------
    source : {'printed', 'oracle', 'prefactored'}
        Published closed forms, the direct linear-solve oracle of a centred
        stencil, or the symbol of one biased operator (``weights`` required).
    scheme : str
        ``ccd6``, ``ccd8`` or ``ccd8-printed``.
    nsamples : int
        Number of wavenumbers, at least 4.
    """
    nsamples = int(nsamples)
    if nsamples < 4:
        raise ValueError("nsamples must be at least 4")
    w = np.arange(1, nsamples + 1) * (np.pi / nsamples)
    if source == "printed":
        name = get_stencil(scheme).name
        key = "ccd6" if name == "ccd6" else "ccd8"
        first = printed_symbol(key, "first", w)
        second = printed_symbol(key, "second", w)
        zero = np.zeros_like(w)
        parts = (first, zero, second, zero)
    elif source == "oracle":
        s = combined_symbol_oracle(get_stencil(scheme), w)
        parts = (s.re_wp, s.im_wp, s.re_wpp2, s.im_wpp2)
    elif source == "prefactored":
        if not isinstance(weights, PrefactoredWeights):
            raise ValueError("source 'prefactored' needs PrefactoredWeights")
        s = prefactored_symbol(weights, w)
        parts = (s.re_wp, s.im_wp, s.re_wpp2, s.im_wpp2)
    else:
        raise ValueError(f"unknown source {source!r}; expected printed, oracle or prefactored")
    label = scheme if isinstance(scheme, str) else scheme.name
    return DispersionCurve(source, label, w, *(np.asarray(p, dtype=float) for p in parts))


class SymmetryReport(NamedTuple):
    max_re_gap: float
    max_im_sum: float


def symmetry_report(fwd, bwd, nsamples=128):
    """Largest ``|Re F - Re B|`` and ``|Im F + Im B|`` over both symbols.

    Sampled at the midpoints ``(k + 1/2) pi / nsamples``.
    """
    if nsamples < 16:
        raise ValueError("nsamples must be at least 16")
    w = (np.arange(nsamples) + 0.5) * (np.pi / nsamples)
    f = prefactored_symbol(fwd, w)
    b = prefactored_symbol(bwd, w)
    re_gap = max(np.abs(f.re_wp - b.re_wp).max(), np.abs(f.re_wpp2 - b.re_wpp2).max())
    im_sum = max(np.abs(f.im_wp + b.im_wp).max(), np.abs(f.im_wpp2 + b.im_wpp2).max())
    return SymmetryReport(float(re_gap), float(im_sum))


def polynomial_audit(stencil, max_degree=None, hs=(1.0, 0.5, 0.1), npoints=10, seed=0):
    """Worst scaled stencil residual per monomial degree.

    Returns a list of ``(degree, res_first, res_second)``; residuals are
    relative to the magnitude of the terms in each row.
    """
    if max_degree is None:
        max_degree = stencil.order + 1
    rng = np.random.default_rng(seed)
    points = rng.uniform(-1.0, 1.0, npoints)
    out = []
    for d in range(max_degree + 1):
        def u(x, d=d):
            return x**d

        def du(x, d=d):
            return d * x ** (d - 1) if d >= 1 else 0.0 * x

        def d2u(x, d=d):
            return d * (d - 1) * x ** (d - 2) if d >= 2 else 0.0 * x

        worst1 = worst2 = 0.0
        for h in hs:
            for x in points:
                r1, r2 = stencil_residual(stencil, u, du, d2u, float(x), h, scaled=True)
                worst1, worst2 = max(worst1, abs(r1)), max(worst2, abs(r2))
        out.append((d, worst1, worst2))
    return out
