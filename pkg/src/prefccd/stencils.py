"""Combined compact stencils for first and second derivatives.

Two three-point combined compact difference (CCD) schemes are encoded:

* the sixth-order scheme of Chu and Fan,
* the eighth-order scheme of Mahesh, whose second-derivative right-hand side
  is available both as printed in the literature (an antisymmetric
  ``u[i+2] - u[i-2]`` term, which fails to annihilate constants) and in the
  repaired symmetric form used everywhere else in this package.

Row ``I`` (first derivative) reads::

    D[i] + alpha1 (D[i+1] + D[i-1]) + gamma1 h (D2[i+1] - D2[i-1])
        = sum_k r1[k] (u[i+k] - u[i-k]) / h

and row ``II`` (second derivative)::

    D2[i] + alpha2 (D[i+1] - D[i-1]) / h + gamma2 (D2[i+1] + D2[i-1])
        = (s0 u[i] + s1 (u[i+1] + u[i-1]) + s2 (u[i+2] + u[i-2])
           + s2_antisym (u[i+2] - u[i-2])) / h**2
"""

import csv
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .banded import SingularSystemError, block_thomas, cyclic_block_thomas

__all__ = [
    "CombinedStencil",
    "GridFunction",
    "DerivativePair",
    "ExactBoundary",
    "build_ccd6",
    "build_ccd8",
    "get_stencil",
    "stencil_residual",
    "solve_combined",
    "solve_combined_dense",
    "read_grid_csv",
    "SingularSystemError",
]


@dataclass(frozen=True)
class CombinedStencil:
    """Coefficients of a coupled first/second-derivative compact stencil."""

    name: str
    order: int
    alpha1: float
    gamma1: float
    r1: tuple
    alpha2: float
    gamma2: float
    s0: float
    s1: float
    s2: float = 0.0
    s2_antisym: float = 0.0
    exact: dict = field(default=None, repr=False, compare=False)

    @property
    def width(self):
        """Half-width of the explicit (right-hand side) part of the stencil."""
        if len(self.r1) > 1 or self.s2 != 0.0 or self.s2_antisym != 0.0:
            return 2
        return 1

    def converted(self, dtype):
        """Copy with every coefficient rounded directly from its exact fraction to ``dtype``."""
        dtype = np.dtype(dtype)
        if dtype == np.float64 or not self.exact:
            return self

        def conv(q):
            return dtype.type(q.numerator) / dtype.type(q.denominator)

        vals = {k: (tuple(conv(q) for q in v) if isinstance(v, tuple) else conv(v))
                for k, v in self.exact.items()}
        return replace(self, **vals)

    @property
    def constant_defect(self):
        """Value of the second-derivative RHS for ``u = 1``; zero for a consistent stencil."""
        return self.s0 + 2.0 * self.s1 + 2.0 * self.s2


def _make(name, order, **coeffs):
    exact = {k: (tuple(Fraction(c) for c in v) if isinstance(v, tuple) else Fraction(v))
             for k, v in coeffs.items()}
    floats = {k: (tuple(float(c) for c in v) if isinstance(v, tuple) else float(v))
              for k, v in exact.items()}
    return CombinedStencil(name=name, order=order, exact=exact, **floats)


def build_ccd6():
    """Sixth-order combined compact stencil of Chu and Fan."""
    return _make(
        "ccd6", 6,
        alpha1=Fraction(7, 16),
        gamma1=Fraction(-1, 16),
        r1=(Fraction(15, 16),),
        alpha2=Fraction(9, 8),
        gamma2=Fraction(-1, 8),
        s0=-6,
        s1=3,
    )


def build_ccd8(corrected=True):
    """Eighth-order combined compact stencil of Mahesh.

    With ``corrected=False`` the second-derivative row carries the printed
    term ``-(u[i+2] - u[i-2]) / (108 h**2)``; that row then maps ``u = 1``
    to ``1/54`` instead of zero. The corrected variant uses
    ``-(u[i+2] + u[i-2]) / (108 h**2)``, which is exact through degree 8.
    """
    common = dict(
        alpha1=Fraction(17, 36),
        gamma1=Fraction(-1, 12),
        r1=(Fraction(107, 108), Fraction(-1, 108)),
        alpha2=Fraction(23, 18),
        gamma2=Fraction(-1, 6),
        s0=Fraction(-13, 2),
        s1=Fraction(88, 27),
    )
    if corrected:
        return _make("ccd8", 8, s2=Fraction(-1, 108), **common)
    return _make("ccd8-printed", 8, s2_antisym=Fraction(-1, 108), **common)


def get_stencil(name):
    """Look up a stencil by name: ``ccd6``, ``ccd8`` or ``ccd8-printed``."""
    key = name.lower()
    if key == "ccd6":
        return build_ccd6()
    if key in ("ccd8", "ccd8-corrected"):
        return build_ccd8(corrected=True)
    if key == "ccd8-printed":
        return build_ccd8(corrected=False)
    raise ValueError(f"unknown stencil {name!r}; expected ccd6, ccd8 or ccd8-printed")


def stencil_residual(stencil, u, du, d2u, x, h, scaled=False):
    """LHS minus RHS of both stencil rows with exact data substituted.

    Parameters
    ----------
    stencil : CombinedStencil
    u, du, d2u : callable
        The function and its exact first and second derivatives.
    x : float
        Node at which the stencil is centred.
    h : float
        Grid step, must be positive.
    scaled : bool
        Divide each residual by the sum of the absolute values of the terms
        entering that row, giving a dimensionless relative defect.

    Returns
    -------
    (float, float)
        Residuals of the first- and second-derivative rows.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    s = stencil
    lhs1 = [du(x), s.alpha1 * du(x + h), s.alpha1 * du(x - h),
            s.gamma1 * h * d2u(x + h), -s.gamma1 * h * d2u(x - h)]
    rhs1 = []
    for k, coeff in enumerate(s.r1, start=1):
        rhs1 += [coeff * u(x + k * h) / h, -coeff * u(x - k * h) / h]

    lhs2 = [d2u(x), s.alpha2 * du(x + h) / h, -s.alpha2 * du(x - h) / h,
            s.gamma2 * d2u(x + h), s.gamma2 * d2u(x - h)]
    rhs2 = [s.s0 * u(x), s.s1 * u(x + h), s.s1 * u(x - h)]
    if s.s2 or s.s2_antisym:
        up, um = u(x + 2 * h), u(x - 2 * h)
        rhs2 += [s.s2 * up, s.s2 * um, s.s2_antisym * up, -s.s2_antisym * um]
    rhs2 = [t / h**2 for t in rhs2]

    res1 = sum(lhs1) - sum(rhs1)
    res2 = sum(lhs2) - sum(rhs2)
    if scaled:
        res1 /= max(sum(abs(t) for t in lhs1 + rhs1), np.finfo(float).tiny)
        res2 /= max(sum(abs(t) for t in lhs2 + rhs2), np.finfo(float).tiny)
    return float(res1), float(res2)


@dataclass(frozen=True)
class GridFunction:
    """Samples of a function on a uniform grid ``x0 + h * arange(N)``."""

    x0: float
    h: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values)
        if not np.issubdtype(values.dtype, np.floating):
            values = values.astype(float)
        if values.ndim != 1:
            raise ValueError("grid function values must be one-dimensional")
        if len(values) < 5:
            raise ValueError(f"grid function needs at least 5 nodes, got {len(values)}")
        if not self.h > 0:
            raise ValueError("grid step h must be positive")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self):
        return len(self.values)

    @property
    def x(self):
        return self.x0 + self.h * np.arange(self.n)

    @property
    def dtype(self):
        return self.values.dtype

    @classmethod
    def sample(cls, func, start, stop, n, periodic=False, dtype=float):
        """Sample ``func`` on ``n`` nodes of ``[start, stop]``.

        A periodic grid omits the right end point, so ``h = (stop-start)/n``.
        ``dtype=np.longdouble`` evaluates the grid in extended precision.
        """
        t = np.dtype(dtype).type
        start, stop = t(start), t(stop)
        h = (stop - start) / t(n if periodic else n - 1)
        x = start + h * np.arange(n, dtype=dtype)
        return cls(start, h, func(x))

    def with_values(self, values):
        return GridFunction(self.x0, self.h, values)


@dataclass(frozen=True)
class DerivativePair:
    """First and second derivative arrays on the nodes of a grid."""

    first: np.ndarray
    second: np.ndarray

    def __post_init__(self):
        first = np.asarray(self.first)
        second = np.asarray(self.second)
        if first.shape != second.shape:
            raise ValueError(f"length mismatch: first {first.shape} vs second {second.shape}")
        object.__setattr__(self, "first", first)
        object.__setattr__(self, "second", second)

    def to_csv(self, grid, path_or_file):
        """Write ``x,u,du,d2u`` rows with 17 significant digits."""
        if grid.n != len(self.first):
            raise ValueError("grid and derivative lengths differ")
        rows = zip(grid.x, grid.values, self.first, self.second)
        _write_csv(path_or_file, ["x", "u", "du", "d2u"], rows, ".17g")


def _write_csv(path_or_file, header, rows, fmt):
    def emit(fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format(float(v), fmt) for v in row])

    if hasattr(path_or_file, "write"):
        emit(path_or_file)
    else:
        with open(path_or_file, "w", newline="", encoding="utf-8") as fh:
            emit(fh)


def read_grid_csv(path, rtol=1e-9):
    """Read a ``x,u`` CSV file into a :class:`GridFunction`.

    Raises
    ------
    FileNotFoundError
        If ``path`` does not exist.
    ValueError
        On a bad header, non-increasing ``x`` or non-uniform spacing.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [c.strip() for c in next(reader, [])]
        if header != ["x", "u"]:
            raise ValueError(f"{path}: expected header 'x,u', got {','.join(header)!r}")
        data = [(float(a), float(b)) for a, b in (r for r in reader if r)]
    if len(data) < 5:
        raise ValueError(f"{path}: need at least 5 rows")
    x, u = np.array(data).T
    dx = np.diff(x)
    if np.any(dx <= 0):
        raise ValueError(f"{path}: x must be strictly increasing")
    h = (x[-1] - x[0]) / (len(x) - 1)
    if np.max(np.abs(dx - h)) > rtol * max(abs(h), np.max(np.abs(x))):
        raise ValueError(f"{path}: grid spacing is not uniform")
    return GridFunction(float(x[0]), float(h), u)


@dataclass(frozen=True)
class ExactBoundary:
    """Exact derivative values at the nodes the interior stencil cannot reach.

    ``first_left``/``second_left`` hold values at nodes ``0 .. width-1``;
    ``first_right``/``second_right`` at nodes ``N-width .. N-1``.
    """

    first_left: Sequence[float]
    second_left: Sequence[float]
    first_right: Sequence[float]
    second_right: Sequence[float]

    @classmethod
    def from_functions(cls, stencil, grid, du, d2u):
        w = stencil.width
        x = grid.x
        return cls(du(x[:w]), d2u(x[:w]), du(x[-w:]), d2u(x[-w:]))

    def arrays(self, width, dtype=float):
        arrs = [np.atleast_1d(np.asarray(a, dtype=dtype))
                for a in (self.first_left, self.second_left, self.first_right, self.second_right)]
        for a in arrs:
            if a.shape != (width,):
                raise ValueError(
                    f"boundary data must hold {width} value(s) per side, got shape {a.shape}")
        return arrs


BoundaryMode = Union[str, ExactBoundary]


def _rhs(stencil, u, idx, periodic):
    n = len(u)

    def at(k):
        j = idx + k
        return u[j % n] if periodic else u[j]

    s = stencil
    rhs1 = np.zeros(len(idx), dtype=u.dtype)
    for k, coeff in enumerate(s.r1, start=1):
        rhs1 += coeff * (at(k) - at(-k))
    rhs2 = s.s0 * at(0) + s.s1 * (at(1) + at(-1))
    if s.s2 or s.s2_antisym:
        rhs2 = rhs2 + s.s2 * (at(2) + at(-2)) + s.s2_antisym * (at(2) - at(-2))
    return np.stack([rhs1, rhs2], axis=-1)


def _blocks(stencil, dtype):
    s = stencil
    lower = np.array([[s.alpha1, -s.gamma1], [-s.alpha2, s.gamma2]], dtype=dtype)
    upper = np.array([[s.alpha1, s.gamma1], [s.alpha2, s.gamma2]], dtype=dtype)
    return lower, upper


def solve_combined(stencil, grid, boundary="periodic"):
    """Differentiate a grid function with the global coupled CCD system.

    Rows are scaled by ``h`` and ``h**2`` and the unknowns are ``h D`` and
    ``h**2 D2``, so the 2x2 block system is independent of the grid step.

    Parameters
    ----------
    stencil : CombinedStencil
    grid : GridFunction
    boundary : "periodic" or ExactBoundary
        Periodic wrap-around, or exact derivative values at the
        ``stencil.width`` nodes next to each end.

    Returns
    -------
    DerivativePair
    """
    u = grid.values
    dt = grid.dtype
    n = grid.n
    h = dt.type(grid.h)
    stencil = stencil.converted(dt)
    lower_blk, upper_blk = _blocks(stencil, dt)
    eye = np.eye(2, dtype=dt)

    if isinstance(boundary, str):
        if boundary != "periodic":
            raise ValueError(f"unknown boundary mode {boundary!r}")
        idx = np.arange(n)
        rhs = _rhs(stencil, u, idx, periodic=True)
        y = cyclic_block_thomas(
            np.broadcast_to(lower_blk, (n, 2, 2)),
            np.broadcast_to(eye, (n, 2, 2)),
            np.broadcast_to(upper_blk, (n, 2, 2)),
            rhs,
        )
        return DerivativePair(y[:, 0] / h, y[:, 1] / h**2)

    w = stencil.width
    fl, sl, fr, sr = boundary.arrays(w, dt)
    idx = np.arange(w, n - w)
    m = len(idx)
    if m < 1:
        raise ValueError(f"grid of {n} nodes leaves no interior rows")
    rhs = _rhs(stencil, u, idx, periodic=False)
    left_known = np.array([fl[-1] * h, sl[-1] * h**2], dtype=dt)
    right_known = np.array([fr[0] * h, sr[0] * h**2], dtype=dt)
    rhs[0] -= lower_blk @ left_known
    rhs[-1] -= upper_blk @ right_known
    y = block_thomas(
        np.broadcast_to(lower_blk, (m, 2, 2)),
        np.broadcast_to(eye, (m, 2, 2)),
        np.broadcast_to(upper_blk, (m, 2, 2)),
        rhs,
    )
    first = np.concatenate([fl, y[:, 0] / h, fr])
    second = np.concatenate([sl, y[:, 1] / h**2, sr])
    return DerivativePair(first, second)


def solve_combined_dense(stencil, grid, boundary="periodic"):
    """Reference solve of the full ``2N x 2N`` system ``B {D} = C {u}``.

    Assembled row by row in physical units (no scaling) and handed to a
    dense LU factorisation. Meant as a test oracle for small grids.
    """
    n, h, u = grid.n, grid.h, grid.values
    s = stencil
    periodic = isinstance(boundary, str)
    if periodic and boundary != "periodic":
        raise ValueError(f"unknown boundary mode {boundary!r}")
    if n > 512:
        raise ValueError("dense reference solve is limited to small grids")
    B = np.zeros((2 * n, 2 * n))
    rhs = np.zeros(2 * n)
    # unknown layout: D[0..n-1] then D2[0..n-1]
    D = lambda j: j % n if periodic else j  # noqa: E731
    D2 = lambda j: n + (j % n if periodic else j)  # noqa: E731
    U = lambda j: u[j % n] if periodic else u[j]  # noqa: E731

    w = s.width
    known = set() if periodic else set(range(w)) | set(range(n - w, n))
    if not periodic:
        fl, sl, fr, sr = boundary.arrays(w)
        for k in range(w):
            for j, v1, v2 in ((k, fl[k], sl[k]), (n - w + k, fr[k], sr[k])):
                B[D(j), D(j)] = 1.0
                rhs[D(j)] = v1
                B[D2(j), D2(j)] = 1.0
                rhs[D2(j)] = v2

    for i in range(n):
        if i in known:
            continue
        r = D(i)
        B[r, D(i)] += 1.0
        B[r, D(i + 1)] += s.alpha1
        B[r, D(i - 1)] += s.alpha1
        B[r, D2(i + 1)] += s.gamma1 * h
        B[r, D2(i - 1)] -= s.gamma1 * h
        rhs[r] = sum(c * (U(i + k) - U(i - k)) for k, c in enumerate(s.r1, start=1)) / h

        r = D2(i)
        B[r, D2(i)] += 1.0
        B[r, D(i + 1)] += s.alpha2 / h
        B[r, D(i - 1)] -= s.alpha2 / h
        B[r, D2(i + 1)] += s.gamma2
        B[r, D2(i - 1)] += s.gamma2
        val = s.s0 * U(i) + s.s1 * (U(i + 1) + U(i - 1))
        if w == 2:
            val += s.s2 * (U(i + 2) + U(i - 2)) + s.s2_antisym * (U(i + 2) - U(i - 2))
        rhs[r] = val / h**2

    sol = np.linalg.solve(B, rhs)
    return DerivativePair(sol[:n], sol[n:])
