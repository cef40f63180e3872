"""Weights of the prefactored (forward/backward) combined operators.

The forward operator pair reads, with ``d1 = h DF`` and ``d2 = h**2 D2F``::

    d1[i] + betaI  d1[i+1] + thetaI  d2[i+1] = aI  u[i-1] + bI  u[i] + cI  u[i+1]
    d2[i] + betaII d1[i+1] + thetaII d2[i+1] = aII u[i-1] + bII u[i] + cII u[i+1]

and the backward pair couples to ``i-1`` instead of ``i+1``. Two residual
systems determine the ten forward weights:

* ``printed``: the closed polynomial system for the eighth-order target,
  transcribed term by term from the literature;
* ``spectral``: real parts of the forward modified wavenumbers matched to the
  centred scheme on a wavenumber grid, plus constant annihilation of both
  right-hand sides.

Both are solved by damped Newton / Levenberg-Marquardt with multistart.
"""

import json
import logging
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .spectral import (
    SingularSymbolError,
    chebyshev_grid,
    combined_symbol_oracle,
    prefactored_symbol,
    symbol_parts,
)
from .stencils import CombinedStencil, get_stencil

__all__ = [
    "WEIGHT_NAMES",
    "PrefactoredWeights",
    "SolveReport",
    "ValidationReport",
    "WeightSolution",
    "ResidualEvaluationError",
    "residuals_printed",
    "residuals_spectral",
    "printed_system",
    "spectral_system",
    "jacobian_fd",
    "newton_solve",
    "multistart",
    "mirror_backward",
    "mirror",
    "validate",
    "amplification_matrix",
    "decay_rate",
    "select_admissible",
    "solve_weights",
    "validation_grid",
    "load_weights",
    "compare_systems",
    "PRINTED_LOWER_BOUND",
]

logger = logging.getLogger(__name__)

WEIGHT_NAMES = ("betaI", "thetaI", "aI", "bI", "cI", "betaII", "thetaII", "aII", "bII", "cII")
SCHEMA = "prefactored-weights/1"


@dataclass(frozen=True)
class PrefactoredWeights:
    """The ten weights of one biased operator pair."""

    direction: str = "forward"
    betaI: float = 0.0
    thetaI: float = 0.0
    aI: float = 0.0
    bI: float = 0.0
    cI: float = 0.0
    betaII: float = 0.0
    thetaII: float = 0.0
    aII: float = 0.0
    bII: float = 0.0
    cII: float = 0.0

    def __post_init__(self):
        if self.direction not in ("forward", "backward"):
            raise ValueError(f"direction must be 'forward' or 'backward', got {self.direction!r}")
        for name in WEIGHT_NAMES:
            v = float(getattr(self, name))
            if not np.isfinite(v):
                raise ValueError(f"weight {name} is not finite")
            object.__setattr__(self, name, v)

    def as_array(self):
        return np.array([getattr(self, n) for n in WEIGHT_NAMES])

    @classmethod
    def from_array(cls, values, direction="forward"):
        values = np.asarray(values, dtype=float)
        if values.shape != (10,):
            raise ValueError(f"expected 10 weights, got shape {values.shape}")
        return cls(direction, *values)

    def to_json(self, target, residual_norm, system):
        """Serialise with 17 significant digits in a fixed key order."""
        def num(v):
            return format(float(v), ".17g")

        parts = [
            f'"schema":{json.dumps(SCHEMA)}',
            f'"target":{json.dumps(target)}',
            f'"direction":{json.dumps(self.direction)}',
        ]
        parts += [f'"{n}":{num(getattr(self, n))}' for n in WEIGHT_NAMES]
        parts += [f'"residual_norm":{num(residual_norm)}', f'"system":{json.dumps(system)}']
        return "{" + ",".join(parts) + "}\n"

    def save(self, path, target, residual_norm, system):
        Path(path).write_text(self.to_json(target, residual_norm, system), encoding="utf-8")


def load_weights(path):
    """Read a weights file; returns ``(weights, metadata)``."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if data.get("schema") != SCHEMA:
        raise ValueError(f"{path}: unsupported schema {data.get('schema')!r}")
    missing = [n for n in WEIGHT_NAMES + ("direction",) if n not in data]
    if missing:
        raise ValueError(f"{path}: missing keys {missing}")
    wts = PrefactoredWeights(data["direction"], *(data[n] for n in WEIGHT_NAMES))
    meta = {k: data.get(k) for k in ("target", "residual_norm", "system")}
    return wts, meta


def _as_vector(wts):
    if isinstance(wts, PrefactoredWeights):
        return wts.as_array()
    return np.asarray(wts, dtype=float)


# ---------------------------------------------------------------------------
# residual systems

PRINTED_RHS = np.array([
    -293 / 216, -63 / 216, -1 / 216, 34 / 36, 11 / 12, 1 / 12,
    -1730 / 1296, 675 / 1296, 10870 / 1296, 29 / 1296,
])


def residuals_printed(wts):
    """LHS minus RHS of the ten printed polynomial equations, in order."""
    B1, T1, a1, b1, c1, B2, T2, a2, b2, c2 = _as_vector(wts)
    lhs = np.array([
        (B1 * c2 * T1 + a1 + B1 * b1 - c1 - T1 * a1 * B2
         - T1 * c1 * B2 + c2 * T1 * T2 + 2 * B1 * a1 * T2 - T1 * b1 * B2 * T2 + a1 * T2**2
         + B1 * b1 * T2**2 - c1 * T2**2 - B1 * T1 * a2 - T1 * T2 * a2
         + T1 * b2 + T1**2 * B2 * b2 - B1 * T1 * T2 * b2),
        (c2 * T1 - T1 * b1 * B2 + a1 * T2 - c1 * T2
         - T1 * a1 * B2 * T2 + T1**2 * B2 * a2
         + B1 * (a1 + b1 * T2 + a1 * T2**2 - T1 * T2 * a2)),
        -2 * a1 * (T1 * B2 - B1 * T2),
        1 + B1**2 + T1**2 * B2**2 + 2 * B1 * T2 - 2 * B1 * T1 * B2 * T2 + T2**2 + B1**2 * T2**2,
        2 * (B1 + T2) * (1 - T1 * B2 + B1 * T2),
        -2 * T1 * B2 + 2 * B1 * T2,
        (B1 * c2 - B1 * c2 * T1 * B2 - a1 * B2 - B1 * b1 * B2
         + T1 * c1 * B2**2 + c2 * T2 + B1**2 * c2 * T2 - b1 * B2 * T2 - B1 * c1 * B2 * T2 + B1 * a2
         + b2 + B1**2 * b2 + B1 * T2 * b2),
        (-b1 * B2 + T1 * b1 * B2**2 - a1 * B2 * T2 - c1 * B2 * T2
         + c2 * (1 + B1**2 - T1 * B2 + 2 * B1 * T2) + a2 + T2 * b2
         - B1 * (a1 * B2 + c1 * B2 + b1 * B2 * T2 - T2 * a2 - 2 * b2 + T1 * B2 * b2)
         + B1**2 * (a2 + T2 * b2)),
        (-c1 * B2 + T1 * a1 * B2**2 + T2 * a2 + B1**2 * T2 * a2
         - T1 * B2 * b2 + B1 * (c2 - a1 * B2 * T2)
         + a2 - T1 * B2 * a2 + T2 * b2),
        -T1 * B2 * a2 + B1 * T2 * a2,
    ])
    return lhs - PRINTED_RHS


def residuals_spectral(wts, target, wgrid):
    """Spectral matching residuals of forward weights against a centred target.

    For each ``w`` in ``wgrid`` two entries, ``Re w'_F - w'_target`` and
    ``Re (w''_F)**2 - (w''_target)**2``, followed by the two constant
    annihilation conditions ``aI + bI + cI`` and ``aII + bII + cII``.
    """
    return spectral_system(target, wgrid)(_as_vector(wts))


def printed_system():
    """Residual callable ``x -> residuals_printed(x)`` on 10-vectors."""
    return residuals_printed


def spectral_system(target, wgrid=None):
    """Residual callable for the spectral matching system.

    The target symbols are computed once with the independent combined-stencil
    oracle; ``wgrid`` defaults to 64 Chebyshev points in ``(0, pi)``.
    """
    if isinstance(target, str):
        target = get_stencil(target)
    wgrid = chebyshev_grid(64) if wgrid is None else np.asarray(wgrid, dtype=float)
    if len(wgrid):
        ref = combined_symbol_oracle(target, wgrid)
        ref_wp, ref_wpp2 = ref.re_wp, ref.re_wpp2

    def batch(X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        consistency = np.stack([X[:, 2] + X[:, 3] + X[:, 4], X[:, 7] + X[:, 8] + X[:, 9]], axis=1)
        if not len(wgrid):
            return consistency
        parts = symbol_parts(X, wgrid)
        paired = np.empty((len(X), 2 * len(wgrid)))
        paired[:, 0::2] = parts[..., 0] - ref_wp
        paired[:, 1::2] = parts[..., 2] - ref_wpp2
        return np.concatenate([paired, consistency], axis=1)

    def resfn(x):
        return batch(x)[0]

    resfn.batch = batch
    resfn.target = target
    resfn.wgrid = wgrid
    return resfn


class ResidualEvaluationError(RuntimeError):
    """A residual function failed while perturbing coordinate ``index``."""

    def __init__(self, index, cause):
        self.index = index
        super().__init__(f"residual evaluation failed at perturbed coordinate {index}: {cause}")


def jacobian_fd(resfn, wts, step=1e-7):
    """Central-difference Jacobian of ``resfn`` at ``wts``.

    The step for coordinate ``j`` is ``step * max(1, |x_j|)``. A residual
    callable exposing a vectorised ``batch`` attribute is evaluated on all
    perturbed points at once.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    x = _as_vector(wts).copy()
    hs = step * np.maximum(1.0, np.abs(x))
    batch = getattr(resfn, "batch", None)
    if batch is not None:
        pts = np.concatenate([x + np.diag(hs), x - np.diag(hs)])
        try:
            vals = batch(pts)
        except Exception:
            pass  # fall through to per-coordinate evaluation to locate the failure
        else:
            n = len(x)
            return ((vals[:n] - vals[n:]) / (2 * hs[:, None])).T
    cols = []
    for j in range(len(x)):
        hj = hs[j]
        xp, xm = x.copy(), x.copy()
        xp[j] += hj
        xm[j] -= hj
        try:
            cols.append((np.asarray(resfn(xp)) - np.asarray(resfn(xm))) / (2 * hj))
        except Exception as exc:
            raise ResidualEvaluationError(j, exc) from exc
    return np.column_stack(cols)


# ---------------------------------------------------------------------------
# Newton / Levenberg-Marquardt

@dataclass(frozen=True)
class SolveReport:
    weights: PrefactoredWeights
    residual_norm: float
    iterations: int
    start_index: int
    converged: bool
    condition_estimate: float
    message: str = ""

    @property
    def x(self):
        return self.weights.as_array()


def _eval(resfn, x):
    try:
        r = np.asarray(resfn(x), dtype=float)
    except (SingularSymbolError, np.linalg.LinAlgError, FloatingPointError):
        return None
    return r if np.all(np.isfinite(r)) else None


def newton_solve(resfn, start, tol=1e-12, max_iter=100, start_index=0, method="auto"):
    """Damped Newton (square) or Levenberg-Marquardt (overdetermined) solve.

    ``method='lm'`` forces Levenberg-Marquardt steps on square systems too,
    which is the better choice when no root is expected and the least-squares
    minimum is wanted instead.

    Each step is halved up to 30 times until the residual 2-norm decreases.
    Convergence is declared when the residual infinity-norm is ``<= tol``.
    A run whose squared residual drops by less than a relative ``1e-6`` over
    10 iterations is abandoned as stalled. A failed run returns
    ``converged=False`` with the best iterate.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if method not in ("auto", "newton", "lm"):
        raise ValueError(f"unknown method {method!r}")
    x = _as_vector(start).astype(float).copy()
    r = _eval(resfn, x)
    if r is None:
        return SolveReport(PrefactoredWeights.from_array(x), np.inf, 0, start_index, False,
                           np.inf, "residual undefined at start")
    mu = 1e-3
    message = "max_iter reached"
    it = 0
    history = []
    while it < max_iter:
        if np.max(np.abs(r)) <= tol:
            message = "converged"
            break
        history.append(r @ r)
        if len(history) > 10 and history[-1] > (1 - 1e-6) * history[-11]:
            message = "stalled"
            break
        it += 1
        try:
            J = jacobian_fd(resfn, x)
        except ResidualEvaluationError as exc:
            message = str(exc)
            break
        m, n = J.shape
        cost = r @ r
        square = method == "newton" or (method == "auto" and m == n)
        if square:
            try:
                dx = np.linalg.solve(J, -r)
            except np.linalg.LinAlgError:
                dx = np.linalg.lstsq(J, -r, rcond=None)[0]
        else:
            JtJ = J.T @ J
            g = J.T @ r
            dx = np.linalg.solve(JtJ + mu * np.diag(np.maximum(np.diag(JtJ), 1e-12)), -g)

        t = 1.0
        accepted = False
        for _ in range(31):
            trial = x + t * dx
            rt = _eval(resfn, trial)
            if rt is not None and rt @ rt < cost:
                accepted = True
                break
            t *= 0.5
        if accepted:
            x, r = trial, rt
            if not square:
                mu = max(mu / 3.0, 1e-15) if t == 1.0 else mu * 2.0
        elif not square and mu < 1e12:
            mu *= 10.0
        else:
            message = "no productive damped step"
            break
    else:
        if np.max(np.abs(r)) <= tol:
            message = "converged"

    norm = float(np.max(np.abs(r)))
    try:
        cond = float(np.linalg.cond(jacobian_fd(resfn, x)))
    except (ResidualEvaluationError, np.linalg.LinAlgError):
        cond = np.inf
    return SolveReport(PrefactoredWeights.from_array(x), norm, it, start_index,
                       norm <= tol, cond, message)


def structured_starts():
    """All zeros, and ``betaI = thetaII = 11/48`` with small cross couplings."""
    zeros = np.zeros(10)
    ansatz = np.zeros(10)
    ansatz[[0, 6]] = 11 / 48
    ansatz[[1, 5]] = 1e-2
    return [zeros, ansatz]


def multistart(resfn, n_starts=64, seed=42, tol=1e-12, max_iter=100, dedup=1e-7, method="auto"):
    """Run :func:`newton_solve` from structured and seeded random starts.

    Start 0 is all zeros, start 1 the structured ansatz, then ``n_starts``
    points uniform in ``[-1.5, 1.5]**10`` from ``numpy.random.default_rng(seed)``.

    Returns
    -------
    best : SolveReport
        Converged root of smallest residual (ties: smallest condition
        estimate); the smallest-residual report when nothing converged.
    roots : list of SolveReport
        Distinct converged roots, in start order.
    """
    if n_starts < 1:
        raise ValueError("n_starts must be at least 1")
    rng = np.random.default_rng(seed)
    starts = structured_starts() + list(rng.uniform(-1.5, 1.5, size=(n_starts, 10)))
    reports = [newton_solve(resfn, s, tol=tol, max_iter=max_iter, start_index=k, method=method)
               for k, s in enumerate(starts)]
    roots = []
    for rep in reports:
        if not rep.converged:
            continue
        for k, other in enumerate(roots):
            if np.linalg.norm(rep.x - other.x) < dedup:
                if (rep.residual_norm, rep.condition_estimate) < (other.residual_norm, other.condition_estimate):
                    roots[k] = rep
                break
        else:
            roots.append(rep)
    pool = roots or reports
    best = min(pool, key=lambda r: (r.residual_norm, r.condition_estimate, r.start_index))
    logger.info("multistart: %d starts, %d distinct roots, best residual %.3e",
                len(starts), len(roots), best.residual_norm)
    return best, roots


# ---------------------------------------------------------------------------
# backward operator and validation

def mirror(wts):
    """Reflect ``i+1 <-> i-1``; maps forward weights to backward and back.

    The first-derivative row is odd under reflection and the second even, so
    the RHS of row I flips sign and reverses, row II only reverses, and the
    two cross couplings (``thetaI``: D2 into row I, ``betaII``: D into row II)
    change sign.
    """
    return PrefactoredWeights(
        "backward" if wts.direction == "forward" else "forward",
        betaI=wts.betaI,
        thetaI=-wts.thetaI,
        aI=-wts.cI,
        bI=-wts.bI,
        cI=-wts.aI,
        betaII=-wts.betaII,
        thetaII=wts.thetaII,
        aII=wts.cII,
        bII=wts.bII,
        cII=wts.aII,
    )


def mirror_backward(fwd):
    """Backward weights whose symbols are the complex conjugates of ``fwd``'s."""
    if fwd.direction != "forward":
        raise ValueError("mirror_backward expects forward weights")
    return mirror(fwd)


@dataclass(frozen=True)
class ValidationReport:
    """Maxima over a wavenumber grid of the symmetry and target conditions."""

    re_gap_first: float
    im_sum_first: float
    target_gap_first: float
    re_gap_second: float
    im_sum_second: float
    target_gap_second: float
    average_gap_first: float
    average_gap_second: float

    def maxima(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def failures(self, tol=1e-9):
        return [k for k, v in self.maxima().items() if not v <= tol]

    def passed(self, tol=1e-9):
        return not self.failures(tol)


def validation_grid(n=128):
    """Uniform midpoint grid in ``(0, pi)``, disjoint from the Chebyshev solve grid."""
    return (np.arange(n) + 0.5) * np.pi / n


def validate(fwd, bwd, target, wgrid=None):
    """Check a forward/backward pair against each other and the centred target.

    Reports maxima of ``|Re w'_F - Re w'_B|``, ``|Im w'_F + Im w'_B|``,
    ``|Re w'_F - w'_target|``, the same three for ``(w'')**2``, and the
    complex distance between the averaged symbol ``(F + B) / 2`` and the target.
    """
    if fwd.direction != "forward" or bwd.direction != "backward":
        raise ValueError("validate expects (forward, backward) weights")
    if isinstance(target, str):
        target = get_stencil(target)
    wgrid = validation_grid() if wgrid is None else np.atleast_1d(np.asarray(wgrid, dtype=float))
    outside = (wgrid <= 0) | (wgrid >= np.pi)
    if outside.any():
        w0 = wgrid[np.argmax(outside)]
        raise SingularSymbolError(w0, 0.0, f"sample w={w0:.6g} lies outside the open interval (0, pi)")
    F = prefactored_symbol(fwd, wgrid)
    B = prefactored_symbol(bwd, wgrid)
    T = combined_symbol_oracle(target, wgrid)

    def mx(a):
        return float(np.max(np.abs(a)))

    avg1 = np.hypot(0.5 * (F.re_wp + B.re_wp) - T.re_wp, 0.5 * (F.im_wp + B.im_wp) - T.im_wp)
    avg2 = np.hypot(0.5 * (F.re_wpp2 + B.re_wpp2) - T.re_wpp2, 0.5 * (F.im_wpp2 + B.im_wpp2) - T.im_wpp2)
    return ValidationReport(
        re_gap_first=mx(F.re_wp - B.re_wp),
        im_sum_first=mx(F.im_wp + B.im_wp),
        target_gap_first=mx(F.re_wp - T.re_wp),
        re_gap_second=mx(F.re_wpp2 - B.re_wpp2),
        im_sum_second=mx(F.im_wpp2 + B.im_wpp2),
        target_gap_second=mx(F.re_wpp2 - T.re_wpp2),
        average_gap_first=mx(avg1),
        average_gap_second=mx(avg2),
    )


def amplification_matrix(wts):
    """Matrix ``M`` with ``(d1, d2)[next] = M (d1, d2)[prev] + rhs`` along a sweep."""
    return -np.array([[wts.betaI, wts.thetaI], [wts.betaII, wts.thetaII]])


def decay_rate(wts):
    """Spectral radius of the sweep recursion; below 1 means a stable sweep."""
    return float(np.max(np.abs(np.linalg.eigvals(amplification_matrix(wts)))))


def _im_sign_constant(wts, wgrid):
    im = prefactored_symbol(wts, wgrid).im_wp
    big = np.abs(im) > 1e-12
    return bool(np.all(im[big] > 0) or np.all(im[big] < 0))


def select_admissible(roots, target, wgrid=None, tol=1e-9):
    """Pick the root best suited for explicit sweeps.

    Requirements: the mirrored pair validates and the sweep recursion decays.
    Preference among those: a first-derivative imaginary part of constant sign
    on ``(0, pi)``, then the largest ``|cI|`` relative to ``|aI|, |bI|``.
    Returns ``None`` if no root qualifies.
    """
    wgrid = validation_grid() if wgrid is None else wgrid
    candidates = []
    for rep in roots:
        fwd = rep.weights
        try:
            report = validate(fwd, mirror_backward(fwd), target, wgrid)
        except SingularSymbolError:
            continue
        rho = decay_rate(fwd)
        if not (report.passed(tol) and rho < 1.0):
            continue
        upwind = abs(fwd.cI) >= max(abs(fwd.aI), abs(fwd.bI)) - 1e-9
        key = (not _im_sign_constant(fwd, wgrid), not upwind, rho, rep.start_index)
        candidates.append((key, rep))
    if not candidates:
        return None
    return min(candidates, key=lambda kv: kv[0])[1]


@dataclass(frozen=True)
class WeightSolution:
    """Outcome of :func:`solve_weights`."""

    target: str
    system: str
    report: SolveReport
    forward: PrefactoredWeights
    backward: PrefactoredWeights
    validation: ValidationReport
    decay_rate: float
    roots: list = field(default_factory=list, repr=False)
    admissible: bool = True

    @property
    def validated(self):
        return self.admissible and self.report.converged and self.validation.passed()


def solve_weights(target="ccd8", system="spectral", n_starts=64, seed=42, tol=1e-12,
                  max_iter=100, wgrid=None):
    """Solve for forward weights, mirror them, validate and pick an admissible root.

    ``system='printed'`` is only defined for the eighth-order target. When no
    admissible root exists the best multistart report is returned with
    ``admissible=False``.
    """
    stencil = target if isinstance(target, CombinedStencil) else get_stencil(target)
    if system == "spectral":
        resfn = spectral_system(stencil, wgrid)
    elif system == "printed":
        if stencil.order != 8:
            raise ValueError("the printed polynomial system only exists for the ccd8 target")
        resfn = printed_system()
    else:
        raise ValueError(f"unknown system {system!r}; expected 'spectral' or 'printed'")
    # the printed system has no exact root, so minimise it in the least-squares sense
    method = "lm" if system == "printed" else "auto"
    best, roots = multistart(resfn, n_starts=n_starts, seed=seed, tol=tol, max_iter=max_iter,
                             method=method)
    chosen = select_admissible(roots, stencil)
    admissible = chosen is not None
    rep = chosen if admissible else best
    fwd = rep.weights
    bwd = mirror_backward(fwd)
    try:
        report = validate(fwd, bwd, stencil)
    except SingularSymbolError:
        nan = float("nan")
        report = ValidationReport(*([nan] * 8))
    return WeightSolution(
        target=stencil.name, system=system, report=rep, forward=fwd, backward=bwd,
        validation=report, decay_rate=decay_rate(fwd), roots=roots, admissible=admissible,
    )


PRINTED_LOWER_BOUND = 1.0 / 18.0


def compare_systems(printed, spectral):
    """Summary of how the printed-system solve relates to the spectral one.

    Both arguments are :class:`WeightSolution` objects for the same target.
    The printed system cannot be solved exactly: one of its equations
    demands ``1 + p**2 + q**2 = 34/36`` for real ``p, q``, so its residual
    infinity-norm is bounded below by ``PRINTED_LOWER_BOUND``.
    """
    spectral_fn = spectral_system(get_stencil(spectral.target))
    printed_at_spectral = float(np.max(np.abs(residuals_printed(spectral.forward))))
    spectral_at_printed = float(np.max(np.abs(spectral_fn(printed.forward.as_array()))))
    gap = float(np.max(np.abs(printed.forward.as_array() - spectral.forward.as_array())))
    return {
        "printed_residual_norm": printed.report.residual_norm,
        "printed_converged": printed.report.converged,
        "printed_lower_bound": PRINTED_LOWER_BOUND,
        "spectral_residual_norm": spectral.report.residual_norm,
        "printed_residual_at_spectral_root": printed_at_spectral,
        "spectral_residual_at_printed_best": spectral_at_printed,
        "max_weight_difference": gap,
        "agree": bool(printed.report.converged and gap <= 1e-8),
    }
