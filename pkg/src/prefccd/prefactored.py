"""Explicit sweeps of the prefactored operators.

The forward operator is evaluated from the right boundary towards the left
(each node needs its right neighbour), the backward operator from left to
right, and the two are averaged. No linear system is solved.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .stencils import DerivativePair, GridFunction
from .weights import PrefactoredWeights, amplification_matrix, decay_rate

__all__ = [
    "BoundarySeed",
    "operator_taylor",
    "forward_sweep",
    "backward_sweep",
    "combine",
    "prefactored_derivatives",
    "SweepStability",
    "sweep_stability",
]

# one-sided explicit stencils at node 0 using nodes 0, 1, 2, ... (both fourth order)
_D1_ONE_SIDED = tuple(Fraction(c) for c in ("-25/12", "4", "-3", "4/3", "-1/4"))
_D2_ONE_SIDED = tuple(Fraction(c) for c in ("15/4", "-77/6", "107/6", "-13", "61/12", "-5/6"))
_TAYLOR_ORDER = 16


@dataclass(frozen=True)
class BoundarySeed:
    """Derivative data at a terminal node of a sweep.

    ``mode='exact'`` takes analytic derivatives: ``d1``, ``d2`` and optionally
    ``higher = (d3, d4, ...)``. ``mode='biased'`` ignores them and uses
    fourth-order one-sided explicit differences for ``d1`` and ``d2``.
    ``mode='scaled'`` takes ``d1``, ``d2`` as the operator values ``h D`` and
    ``h**2 D2`` themselves and uses them unchanged.

    A biased operator applied to smooth data does not return the derivative
    itself (its second-derivative row carries an O(1/h) multiple of the
    first derivative, cancelled only by the opposite sweep), so the sweep
    converts the derivatives into the operator's own value through
    :func:`operator_taylor`. Derivatives of order ``k`` missing from the seed
    leave a seed error of order ``h**k`` that decays geometrically inward.
    """

    mode: str = "biased"
    d1: float = None
    d2: float = None
    higher: tuple = ()

    def __post_init__(self):
        if self.mode not in ("exact", "biased", "scaled"):
            raise ValueError(f"seed mode must be 'exact', 'biased' or 'scaled', got {self.mode!r}")
        if self.mode != "biased" and (self.d1 is None or self.d2 is None):
            raise ValueError(f"{self.mode} seed requires both d1 and d2")
        object.__setattr__(self, "higher", tuple(self.higher))

    @classmethod
    def exact(cls, d1, d2, *higher):
        return cls("exact", d1, d2, higher)

    @classmethod
    def from_derivative(cls, deriv, x, order=2):
        """Exact seed from ``deriv(k, x)``, the ``k``-th derivative, for ``k <= order``."""
        if order < 2:
            raise ValueError("order must be at least 2")
        vals = [deriv(k, x) for k in range(1, order + 1)]
        return cls("exact", vals[0], vals[1], tuple(vals[2:]))


def operator_taylor(wts, order=12, dtype=np.longdouble):
    """Coefficients of a biased operator acting on smooth data.

    Returns ``Y`` of shape (order + 1, 2) with
    ``h*D u = sum_k Y[k, 0] h**k u^(k)`` and
    ``h**2*D2 u = sum_k Y[k, 1] h**k u^(k)``, obtained by expanding the
    shift ``u(x + h) = exp(h d/dx) u`` in both rows and solving the 2x2
    relation order by order.
    """
    t = np.dtype(dtype).type
    fact = [t(math.factorial(k)) for k in range(order + 1)]
    plus = np.array([t(1) / f for f in fact], dtype=dtype)
    minus = np.array([t((-1) ** k) / f for k, f in enumerate(fact)], dtype=dtype)
    near = plus if wts.direction == "forward" else minus
    A = np.zeros((order + 1, 2, 2), dtype=dtype)
    A[:, 0, 0] = t(wts.betaI) * near
    A[:, 0, 1] = t(wts.thetaI) * near
    A[:, 1, 0] = t(wts.betaII) * near
    A[:, 1, 1] = t(wts.thetaII) * near
    A[0, 0, 0] += 1
    A[0, 1, 1] += 1
    R = np.zeros((order + 1, 2), dtype=dtype)
    R[:, 0] = t(wts.aI) * minus + t(wts.cI) * plus
    R[:, 1] = t(wts.aII) * minus + t(wts.cII) * plus
    R[0, 0] += t(wts.bI)
    R[0, 1] += t(wts.bII)
    a = A[0]
    det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    if abs(det) < 1e-14:
        raise ValueError("biased operator is singular on constants")
    inv0 = np.array([[a[1, 1], -a[0, 1]], [-a[1, 0], a[0, 0]]], dtype=dtype) / det
    Y = np.zeros((order + 1, 2), dtype=dtype)
    for k in range(order + 1):
        r = R[k].copy()
        for j in range(1, k + 1):
            r -= A[j] @ Y[k - j]
        Y[k] = inv0 @ r
    return Y


def _coeffs(fracs, dtype):
    t = np.dtype(dtype).type
    return np.array([t(q.numerator) / t(q.denominator) for q in fracs], dtype=dtype)


def _one_sided(u, h, at_left):
    """One-sided first and second derivatives at the first or last node of ``u``.

    ``u`` has shape (..., N); the returned arrays have shape (...).
    """
    c1 = _coeffs(_D1_ONE_SIDED, u.dtype)
    c2 = _coeffs(_D2_ONE_SIDED, u.dtype)
    if at_left:
        return (u[..., :5] @ c1) / h, (u[..., :6] @ c2) / (h * h)
    # mirror: first derivative flips sign, second does not
    return -(u[..., :-6:-1] @ c1) / h, (u[..., :-7:-1] @ c2) / (h * h)


def _terminal(seed, u, h, at_left, taylor):
    """Scaled operator values (h D, h**2 D2) at a terminal node."""
    shape = u.shape[:-1]
    if seed.mode == "scaled":
        return (np.broadcast_to(np.asarray(seed.d1, dtype=u.dtype), shape).copy(),
                np.broadcast_to(np.asarray(seed.d2, dtype=u.dtype), shape).copy())
    if seed.mode == "exact":
        derivs = [seed.d1, seed.d2, *seed.higher]
        derivs = [np.broadcast_to(np.asarray(d, dtype=u.dtype), shape) for d in derivs]
    else:
        derivs = list(_one_sided(u, h, at_left))
    if len(derivs) >= len(taylor):
        raise ValueError(f"seeds carry at most {len(taylor) - 1} derivatives")
    y1 = np.zeros(shape, dtype=u.dtype)
    y2 = np.zeros(shape, dtype=u.dtype)
    hk = h
    for k, d in enumerate(derivs, start=1):
        y1 = y1 + taylor[k, 0] * hk * d
        y2 = y2 + taylor[k, 1] * hk * d
        hk = hk * h
    return y1, y2


def _sweep(wts, u, h, seed, edge, forward):
    """Core recursion on an array of grid functions with shape (..., N)."""
    u = np.asarray(u)
    n = u.shape[-1]
    if n < 6:
        raise ValueError(f"sweeps need at least 6 nodes, got {n}")
    dt = u.dtype
    h = dt.type(h)
    M = amplification_matrix(wts).astype(dt)
    taylor = operator_taylor(wts, _TAYLOR_ORDER).astype(dt)
    rhs1 = wts.aI * u[..., :-2] + wts.bI * u[..., 1:-1] + wts.cI * u[..., 2:]
    rhs2 = wts.aII * u[..., :-2] + wts.bII * u[..., 1:-1] + wts.cII * u[..., 2:]
    y1 = np.empty_like(u)
    y2 = np.empty_like(u)
    if forward:
        y1[..., -1], y2[..., -1] = _terminal(seed, u, h, False, taylor)
        order = range(n - 2, 0, -1)
        step = 1
    else:
        y1[..., 0], y2[..., 0] = _terminal(seed, u, h, True, taylor)
        order = range(1, n - 1)
        step = -1
    for i in order:
        p1, p2 = y1[..., i + step], y2[..., i + step]
        y1[..., i] = rhs1[..., i - 1] + M[0, 0] * p1 + M[0, 1] * p2
        y2[..., i] = rhs2[..., i - 1] + M[1, 0] * p1 + M[1, 1] * p2
    if forward:
        y1[..., 0], y2[..., 0] = _terminal(edge, u, h, True, taylor)
    else:
        y1[..., -1], y2[..., -1] = _terminal(edge, u, h, False, taylor)
    return y1 / h, y2 / (h * h)


def _check(wts, direction):
    if not isinstance(wts, PrefactoredWeights):
        raise TypeError("weights must be PrefactoredWeights")
    if wts.direction != direction:
        raise ValueError(f"expected {direction} weights, got {wts.direction}")


def forward_sweep(wts, grid, seed=BoundarySeed(), edge=BoundarySeed()):
    """Forward operator values ``(DF, D2F)`` by a right-to-left sweep.

    ``seed`` fixes the last node, where the recursion starts; ``edge`` fixes
    node 0, whose stencil would need a value left of the grid.
    """
    _check(wts, "forward")
    return _sweep(wts, grid.values, grid.h, seed, edge, forward=True)


def backward_sweep(wts, grid, seed=BoundarySeed(), edge=BoundarySeed()):
    """Backward operator values ``(DB, D2B)`` by a left-to-right sweep.

    ``seed`` fixes node 0, ``edge`` the last node.
    """
    _check(wts, "backward")
    return _sweep(wts, grid.values, grid.h, seed, edge, forward=False)


def combine(DF, D2F, DB, D2B):
    """Average the forward and backward results into a :class:`DerivativePair`."""
    DF, D2F, DB, D2B = (np.asarray(a) for a in (DF, D2F, DB, D2B))
    if not (DF.shape == D2F.shape == DB.shape == D2B.shape):
        raise ValueError(
            f"length mismatch: {DF.shape}, {D2F.shape}, {DB.shape}, {D2B.shape}")
    return DerivativePair(0.5 * (DF + DB), 0.5 * (D2F + D2B))


def prefactored_derivatives(fwd, bwd, grid, left=BoundarySeed(), right=BoundarySeed()):
    """Both sweeps plus averaging.

    ``left``/``right`` describe derivative data at the first/last node; each
    serves as the seed of one sweep and the edge value of the other.
    """
    DF, D2F = forward_sweep(fwd, grid, seed=right, edge=left)
    DB, D2B = backward_sweep(bwd, grid, seed=left, edge=right)
    return combine(DF, D2F, DB, D2B)


@dataclass(frozen=True)
class SweepStability:
    """Decay of a unit seed along a sweep: ``|y_k| <= constant * rho**k``."""

    rho_estimate: float
    rho_exact: float
    constant: float

    @property
    def stable(self):
        return self.rho_exact < 1.0


def sweep_stability(wts, n=64):
    """Estimate the decay rate by sweeping ``u = 0`` from the seed ``(1, 1)``.

    The empirical rate is compared with the spectral radius of the recursion
    matrix; a rate of one or more marks the weights as unusable for sweeps.
    """
    grid = GridFunction(0.0, 1.0, np.zeros(n))
    seed = BoundarySeed("scaled", 1.0, 1.0)
    zero = BoundarySeed("scaled", 0.0, 0.0)
    if wts.direction == "forward":
        y1, y2 = forward_sweep(wts, grid, seed=seed, edge=zero)
        norms = np.hypot(y1, y2)[::-1][:-1]
    else:
        y1, y2 = backward_sweep(wts, grid, seed=seed, edge=zero)
        norms = np.hypot(y1, y2)[:-1]
    k = np.arange(len(norms))
    tail = norms > 1e-280
    if tail.sum() > 1 and np.all(np.isfinite(norms)):
        # the last quarter of the decay profile is dominated by the leading eigenvalue
        sel = k[tail][len(k[tail]) * 3 // 4:]
        if len(sel) < 2:
            sel = k[tail]
        rho_est = float(np.exp(np.polyfit(sel, np.log(norms[sel]), 1)[0]))
    else:
        rho_est = float("inf")
    rho = decay_rate(wts)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        constant = float(np.max(norms / np.power(max(rho, 1e-300), k)))
    return SweepStability(rho_est, rho, constant)
