"""Modified wavenumbers of combined and prefactored compact operators.

A Fourier mode ``exp(i w s)`` on the scaled coordinate ``s = x / h`` is
differentiated exactly by ``i w / h`` and ``-(w / h)**2``. A discrete
operator replaces these by ``i w' / h`` and ``-(w'')**2 / h**2``; ``w'`` and
``(w'')**2`` are the modified wavenumbers handled here. Public results are
always split into real and imaginary parts.
"""

from dataclasses import dataclass

import mpmath
import numpy as np

__all__ = [
    "SymbolSample",
    "RationalSymbolForm",
    "SingularSymbolError",
    "DegenerateFitError",
    "chebyshev_grid",
    "printed_symbol",
    "combined_symbol_oracle",
    "combined_symbol_error",
    "prefactored_symbol",
    "symbol_parts",
    "extract_rational_form",
    "RATIONAL_NORMALIZATION",
]

# g1 + g2 + g3 after normalisation: (34 + 33 + 3) / 36
RATIONAL_NORMALIZATION = 70.0 / 36.0


class SingularSymbolError(ValueError):
    """The symbol system is singular at wavenumber ``w``."""

    def __init__(self, w, det, message=None):
        self.w = float(w)
        self.det = float(det)
        super().__init__(message or f"symbol system singular at w={self.w:.6g} (scaled det {self.det:.3e})")


class DegenerateFitError(ValueError):
    """The rational-form fit has no unique solution."""

    def __init__(self, gap, message=None):
        self.gap = float(gap)
        super().__init__(message or f"rational form is not unique (singular-value gap {self.gap:.3e})")


@dataclass(frozen=True)
class SymbolSample:
    """Real and imaginary parts of ``w'`` and ``(w'')**2`` at wavenumber(s) ``w``."""

    w: np.ndarray
    re_wp: np.ndarray
    im_wp: np.ndarray
    re_wpp2: np.ndarray
    im_wpp2: np.ndarray


def _sample(w, wp, wpp2, scalar):
    parts = (w, wp.real, wp.imag, wpp2.real, wpp2.imag)
    if scalar:
        parts = tuple(float(np.ravel(p)[0]) for p in parts)
    return SymbolSample(*parts)


def chebyshev_grid(n):
    """``n`` Chebyshev-spaced wavenumbers strictly inside ``(0, pi)``."""
    k = np.arange(n)
    return 0.5 * np.pi * (1.0 - np.cos(np.pi * (k + 0.5) / n))


def printed_symbol(scheme, kind, w):
    """Closed-form modified wavenumbers exactly as published.

    ``(ccd6, first)`` and ``(ccd8, first)`` return ``w'``; ``(ccd6, second)``
    returns ``(w'')**2``. ``(ccd8, second)`` evaluates the published
    eighth-order expression literally; it does not vanish at ``w = 0`` and
    is kept only to document that discrepancy.
    """
    w = np.asarray(w, dtype=float)
    c1, c2, c3 = np.cos(w), np.cos(2 * w), np.cos(3 * w)
    scheme = scheme.lower()
    if scheme == "ccd6":
        if kind == "first":
            out = 9 * np.sin(w) * (4 + c1) / (24 + 20 * c1 + c2)
        elif kind == "second":
            out = (81 - 48 * c1 - 33 * c2) / (48 + 40 * c1 + 2 * c2)
        else:
            raise ValueError(f"kind must be 'first' or 'second', got {kind!r}")
    elif scheme in ("ccd8", "ccd8-printed", "ccd8-corrected"):
        den = 34 + 33 * c1 + 3 * c2
        if kind == "first":
            out = np.sin(w) * (293 + 126 * c1 + c2) / (6 * den)
        elif kind == "second":
            out = (1730 - 675 * c1 - 10870 * c2 - 29 * c3) / (36 * den)
        else:
            raise ValueError(f"kind must be 'first' or 'second', got {kind!r}")
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return float(out) if out.ndim == 0 else out


def combined_symbol_oracle(stencil, w):
    """Modified wavenumbers of a centred combined stencil by direct linear solve.

    Substituting a single Fourier mode into both stencil rows gives, per
    wavenumber, a 2x2 complex system in ``(w', (w'')**2)``, solved here
    without any closed form.

    Raises
    ------
    SingularSymbolError
        If the 2x2 system is singular at some ``w``.
    """
    scalar = np.ndim(w) == 0
    w = np.atleast_1d(np.asarray(w, dtype=float))
    s = stencil
    cw, sw = np.cos(w), np.sin(w)
    A = np.empty((len(w), 2, 2), dtype=complex)
    A[:, 0, 0] = 1j * (1 + 2 * s.alpha1 * cw)
    A[:, 0, 1] = -2j * s.gamma1 * sw
    A[:, 1, 0] = -2 * s.alpha2 * sw
    A[:, 1, 1] = -(1 + 2 * s.gamma2 * cw)
    b = np.empty((len(w), 2), dtype=complex)
    b[:, 0] = 2j * sum(r * np.sin(k * w) for k, r in enumerate(s.r1, start=1))
    b[:, 1] = (s.s0 + 2 * s.s1 * cw + 2 * s.s2 * np.cos(2 * w)
               + 2j * s.s2_antisym * np.sin(2 * w))

    det = A[:, 0, 0] * A[:, 1, 1] - A[:, 0, 1] * A[:, 1, 0]
    scale = np.abs(A).max(axis=(1, 2)) ** 2
    bad = np.abs(det) <= 1e-12 * scale
    if bad.any():
        k = int(np.argmax(bad))
        raise SingularSymbolError(w[k], abs(det[k]) / scale[k])
    x = np.linalg.solve(A, b[..., None])[..., 0]
    return _sample(w, x[:, 0], x[:, 1], scalar)


def combined_symbol_error(stencil, w, dps=60):
    """Errors ``|w' - w|`` and ``|(w'')**2 - w**2|`` in multiprecision.

    For well-resolved wavenumbers these errors fall far below double
    precision round-off, so the 2x2 system of
    :func:`combined_symbol_oracle` is solved here with ``dps`` decimal
    digits from the exact stencil fractions. Returns two float arrays.
    """
    w = np.atleast_1d(np.asarray(w, dtype=float))
    ex = stencil.exact
    if not ex:
        raise ValueError("stencil carries no exact coefficients")
    err1 = np.empty(len(w))
    err2 = np.empty(len(w))
    with mpmath.workdps(dps):
        q = {k: ([mpmath.mpf(c.numerator) / c.denominator for c in v] if isinstance(v, tuple)
                 else mpmath.mpf(v.numerator) / v.denominator) for k, v in ex.items()}
        zero = mpmath.mpf(0)
        for j, wj in enumerate(w):
            x = mpmath.mpf(wj)
            c, sn = mpmath.cos(x), mpmath.sin(x)
            a11 = 1j * (1 + 2 * q["alpha1"] * c)
            a12 = -2j * q["gamma1"] * sn
            a21 = -2 * q["alpha2"] * sn
            a22 = -(1 + 2 * q["gamma2"] * c)
            b1 = 2j * sum(r * mpmath.sin(k * x) for k, r in enumerate(q["r1"], start=1))
            b2 = (q["s0"] + 2 * q["s1"] * c + 2 * q.get("s2", zero) * mpmath.cos(2 * x)
                  + 2j * q.get("s2_antisym", zero) * mpmath.sin(2 * x))
            det = a11 * a22 - a12 * a21
            if abs(det) == 0:
                raise SingularSymbolError(float(wj), 0.0)
            wp = (b1 * a22 - a12 * b2) / det
            wpp2 = (a11 * b2 - a21 * b1) / det
            err1[j] = float(abs(wp - x))
            err2[j] = float(abs(wpp2 - x * x))
    return err1, err2


def _symbol_matrix(params, w, direction):
    """Equilibrated real 4x4 systems for (Re w', Im w', Re w''^2, Im w''^2).

    ``params`` has shape (k, 10) in the order of ``WEIGHT_NAMES``; the result
    has shape (k, len(w), 4, 4) and (k, len(w), 4).
    """
    b1, t1, a1, bb1, c1, b2, t2, a2, bb2, c2 = (params[:, j, None] for j in range(10))
    cw = np.cos(w)[None, :]
    sn = np.sin(w)[None, :]
    # the backward operator couples to i-1: exp(-iw) in place of exp(iw)
    sw = sn if direction == "forward" else -sn
    shape = (params.shape[0], len(w), 4, 4)
    A = np.empty(shape)
    A[..., 0, 0] = -b1 * sw
    A[..., 0, 1] = -1 - b1 * cw
    A[..., 0, 2] = -t1 * cw
    A[..., 0, 3] = t1 * sw
    A[..., 1, 0] = 1 + b1 * cw
    A[..., 1, 1] = -b1 * sw
    A[..., 1, 2] = -t1 * sw
    A[..., 1, 3] = -t1 * cw
    A[..., 2, 0] = -b2 * sw
    A[..., 2, 1] = -b2 * cw
    A[..., 2, 2] = -1 - t2 * cw
    A[..., 2, 3] = t2 * sw
    A[..., 3, 0] = b2 * cw
    A[..., 3, 1] = -b2 * sw
    A[..., 3, 2] = -t2 * sw
    A[..., 3, 3] = -1 - t2 * cw
    R = np.empty(shape[:-1])
    R[..., 0] = (c1 + a1) * cw + bb1
    R[..., 1] = (c1 - a1) * sn
    R[..., 2] = (c2 + a2) * cw + bb2
    R[..., 3] = (c2 - a2) * sn
    rowmax = np.abs(A).max(axis=-1, keepdims=True)
    return A / rowmax, R / rowmax[..., 0]


def symbol_parts(params, w, direction="forward"):
    """Batched solve of the 4x4 symbol systems.

    Returns an array of shape (k, len(w), 4) holding ``(Re w', Im w',
    Re (w'')**2, Im (w'')**2)`` for each of the ``k`` weight vectors.
    """
    params = np.atleast_2d(np.asarray(params, dtype=float))
    w = np.atleast_1d(np.asarray(w, dtype=float))
    with np.errstate(invalid="ignore", divide="ignore"):
        # an all-zero row equilibrates to NaN and is caught as singular below
        A, R = _symbol_matrix(params, w, direction)
        det = np.linalg.det(A)
    bad = ~(np.abs(det) > 1e-12)
    if bad.any():
        k, j = np.unravel_index(np.argmax(bad), bad.shape)
        raise SingularSymbolError(w[j], det[k, j])
    return np.linalg.solve(A, R[..., None])[..., 0]


def prefactored_symbol(wts, w):
    """Modified wavenumbers of one biased (forward or backward) operator.

    Assembles the real 4x4 system in the unknowns ``(Re w', Im w',
    Re (w'')**2, Im (w'')**2)``, equilibrates its rows and solves with
    partial pivoting.

    Parameters
    ----------
    wts : PrefactoredWeights
    w : float or array_like
        Scaled wavenumber(s) in ``[0, pi]``.

    Raises
    ------
    SingularSymbolError
        If the equilibrated determinant falls below ``1e-12`` at some ``w``.
    """
    scalar = np.ndim(w) == 0
    w = np.atleast_1d(np.asarray(w, dtype=float))
    X = symbol_parts(wts.as_array(), w, wts.direction)[0]
    return _sample(w, X[:, 0] + 1j * X[:, 1], X[:, 2] + 1j * X[:, 3], scalar)


@dataclass(frozen=True)
class RationalSymbolForm:
    """Coefficients of the real parts written as ratios of cosine polynomials.

    ``Re w' = sin w (fI . [1, cos w, cos 2w]) / (g . [1, cos w, cos 2w])`` and
    ``Re (w'')**2 = (fII . [1, cos w, cos 2w, cos 3w]) / (g . [1, cos w, cos 2w])``,
    scaled so that ``sum(g) == RATIONAL_NORMALIZATION``. ``scale`` is the
    factor applied to the unit-norm null vector of the fit.
    """

    fI: np.ndarray
    g: np.ndarray
    fII: np.ndarray
    scale: float
    normalization: float = RATIONAL_NORMALIZATION

    def evaluate(self, w):
        w = np.asarray(w, dtype=float)
        c3 = np.stack([np.ones_like(w), np.cos(w), np.cos(2 * w)], axis=-1)
        c4 = np.concatenate([c3, np.cos(3 * w)[..., None]], axis=-1)
        den = c3 @ self.g
        return np.sin(w) * (c3 @ self.fI) / den, (c4 @ self.fII) / den


def extract_rational_form(wts, w=None, rtol=1e-9):
    """Fit the rational forms of ``Re w'`` and ``Re (w'')**2`` for given weights.

    The homogeneous linear conditions ``Re w' * g(w) - sin w * fI(w) = 0`` and
    ``Re (w'')**2 * g(w) - fII(w) = 0`` are stacked over the sample grid and
    the common null vector ``(fI, g, fII)`` is taken from an SVD.

    Raises
    ------
    DegenerateFitError
        If the null space is not one-dimensional, the denominator cannot be
        normalised, or the fit misses the samples by more than ``rtol``.
    """
    w = chebyshev_grid(64) if w is None else np.asarray(w, dtype=float)
    if len(np.unique(w)) < 12:
        raise ValueError("need at least 12 distinct sample wavenumbers")
    sym = prefactored_symbol(wts, w)
    c = np.stack([np.ones_like(w), np.cos(w), np.cos(2 * w), np.cos(3 * w)], axis=-1)
    sw = np.sin(w)[:, None]
    zeros3, zeros4 = np.zeros((len(w), 3)), np.zeros((len(w), 4))
    rows_first = np.hstack([-sw * c[:, :3], sym.re_wp[:, None] * c[:, :3], zeros4])
    rows_second = np.hstack([zeros3, sym.re_wpp2[:, None] * c[:, :3], -c])
    M = np.vstack([rows_first, rows_second])
    colscale = np.linalg.norm(M, axis=0)
    colscale[colscale == 0] = 1.0
    _, sv, vt = np.linalg.svd(M / colscale)
    gap = sv[-2] / sv[0]
    if gap < 1e-9:
        raise DegenerateFitError(gap)
    v = vt[-1] / colscale
    gsum = v[3:6].sum()
    if abs(gsum) < 1e-12 * np.abs(v).max():
        raise DegenerateFitError(gap, "denominator sums to zero; cannot normalise")
    scale = RATIONAL_NORMALIZATION / gsum
    v = v * scale
    form = RationalSymbolForm(fI=v[:3], g=v[3:6], fII=v[6:], scale=float(scale))
    fit1, fit2 = form.evaluate(w)
    ref = max(1.0, np.abs(sym.re_wp).max(), np.abs(sym.re_wpp2).max())
    miss = max(np.abs(fit1 - sym.re_wp).max(), np.abs(fit2 - sym.re_wpp2).max())
    if miss > rtol * ref:
        raise DegenerateFitError(gap, f"rational form misses samples by {miss:.3e}")
    return form
