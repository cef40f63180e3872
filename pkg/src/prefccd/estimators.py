"""Scikit-learn style wrappers: each row of ``X`` is one grid function."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .prefactored import BoundarySeed, _sweep
from .stencils import GridFunction, get_stencil, solve_combined
from .weights import PrefactoredWeights, decay_rate, mirror_backward, solve_weights

__all__ = ["CombinedCompactDerivative", "PrefactoredCompactDerivative"]

_OUTPUTS = ("first", "second", "both")


def _check_common(est):
    if est.output not in _OUTPUTS:
        raise ValueError(f"output must be one of {_OUTPUTS}, got {est.output!r}")
    if not (np.isfinite(est.h) and est.h > 0):
        raise ValueError(f"h must be a positive number, got {est.h!r}")


def _arrange(first, second, output):
    if output == "first":
        return first
    if output == "second":
        return second
    return np.hstack([first, second])


class CombinedCompactDerivative(TransformerMixin, BaseEstimator):
    """Periodic derivatives from the centred combined compact scheme.

    Parameters
    ----------
    scheme : {'ccd6', 'ccd8', 'ccd8-printed'}
    h : float
        Grid spacing shared by all rows.
    output : {'first', 'second', 'both'}
        ``both`` stacks first then second derivatives along axis 1.
    """

    def __init__(self, scheme="ccd6", h=1.0, output="first"):
        self.scheme = scheme
        self.h = h
        self.output = output

    def fit(self, X, y=None):
        _check_common(self)
        X = check_array(X, ensure_min_features=5)
        self.stencil_ = get_stencil(self.scheme)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "stencil_")
        X = check_array(X, ensure_min_features=5)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        first = np.empty_like(X)
        second = np.empty_like(X)
        for k, row in enumerate(X):
            d = solve_combined(self.stencil_, GridFunction(0.0, self.h, row), "periodic")
            first[k], second[k] = d.first, d.second
        return _arrange(first, second, self.output)


class PrefactoredCompactDerivative(TransformerMixin, BaseEstimator):
    """Derivatives from forward and backward explicit sweeps, averaged.

    ``fit`` solves for the biased weights (or takes them from ``weights``,
    a forward :class:`PrefactoredWeights` or a forward/backward pair);
    ``transform`` sweeps every row at once with one-sided seeds at the
    ends.

    Attributes
    ----------
    forward_, backward_ : PrefactoredWeights
    decay_rate_ : float
        Spectral radius of the sweep recursion.
    validation_ : ValidationReport or None
        Symbol checks of the solved pair; ``None`` when weights were given.
    """

    def __init__(self, scheme="ccd8", h=1.0, output="first", weights=None,
                 n_starts=64, seed=42):
        self.scheme = scheme
        self.h = h
        self.output = output
        self.weights = weights
        self.n_starts = n_starts
        self.seed = seed

    def fit(self, X, y=None):
        _check_common(self)
        X = check_array(X, ensure_min_features=6)
        if self.weights is None:
            sol = solve_weights(self.scheme, n_starts=self.n_starts, seed=self.seed)
            if not sol.validated:
                raise ValueError(f"no validated weights found for {self.scheme}")
            fwd, bwd, report = sol.forward, sol.backward, sol.validation
        elif isinstance(self.weights, PrefactoredWeights):
            fwd, bwd, report = self.weights, mirror_backward(self.weights), None
        else:
            fwd, bwd = self.weights
            report = None
        if fwd.direction != "forward" or bwd.direction != "backward":
            raise ValueError("weights must be ordered (forward, backward)")
        self.forward_ = fwd
        self.backward_ = bwd
        self.validation_ = report
        self.decay_rate_ = decay_rate(fwd)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "forward_")
        X = check_array(X, ensure_min_features=6)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        seed = BoundarySeed()
        DF, D2F = _sweep(self.forward_, X, self.h, seed, seed, forward=True)
        DB, D2B = _sweep(self.backward_, X, self.h, seed, seed, forward=False)
        return _arrange(0.5 * (DF + DB), 0.5 * (D2F + D2B), self.output)
