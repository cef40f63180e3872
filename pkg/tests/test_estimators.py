import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline

from prefccd.estimators import CombinedCompactDerivative, PrefactoredCompactDerivative


def _rows(n=48, periodic=True):
    x = np.arange(n) * (2 * np.pi / (n if periodic else n - 1))
    X = np.vstack([np.sin(x), np.cos(2 * x), np.sin(x + 0.3)])
    dX = np.vstack([np.cos(x), -2 * np.sin(2 * x), np.cos(x + 0.3)])
    return x, X, dX


def test_params_round_trip():
    est = CombinedCompactDerivative(scheme="ccd8", h=0.1, output="both")
    assert est.get_params() == {"scheme": "ccd8", "h": 0.1, "output": "both"}
    other = clone(est).set_params(output="second")
    assert other.output == "second" and est.output == "both"


def test_combined_periodic_transform():
    x, X, dX = _rows()
    est = CombinedCompactDerivative("ccd8", h=x[1] - x[0]).fit(X)
    assert est.n_features_in_ == X.shape[1]
    assert np.abs(est.transform(X) - dX).max() < 1e-7
    both = est.set_params(output="both").transform(X)
    assert both.shape == (3, 2 * X.shape[1])


def test_prefactored_with_given_weights(ccd8_solution):
    x, X, dX = _rows(64, periodic=False)
    est = PrefactoredCompactDerivative(h=x[1] - x[0], weights=ccd8_solution.forward)
    out = est.fit_transform(X)
    assert est.backward_ == ccd8_solution.backward
    assert est.decay_rate_ < 1 and est.validation_ is None
    assert np.abs(out - dX)[:, 15:-15].max() < 1e-7
    pair = PrefactoredCompactDerivative(
        h=x[1] - x[0], weights=(ccd8_solution.forward, ccd8_solution.backward))
    assert np.array_equal(pair.fit_transform(X), out)


def test_prefactored_in_pipeline(ccd8_solution):
    x, X, _ = _rows(40, periodic=False)
    pipe = make_pipeline(
        PrefactoredCompactDerivative(h=x[1] - x[0], weights=ccd8_solution.forward, output="second"))
    assert pipe.fit_transform(X).shape == X.shape


def test_input_validation(ccd8_solution):
    _, X, _ = _rows()
    with pytest.raises(NotFittedError):
        CombinedCompactDerivative().transform(X)
    with pytest.raises(ValueError):
        CombinedCompactDerivative(output="third").fit(X)
    with pytest.raises(ValueError):
        CombinedCompactDerivative(h=-1.0).fit(X)
    with pytest.raises(ValueError):
        CombinedCompactDerivative().fit(X[:, :4])
    est = CombinedCompactDerivative().fit(X)
    with pytest.raises(ValueError):
        est.transform(X[:, :-1])
    with pytest.raises(ValueError):
        CombinedCompactDerivative().fit(np.full((2, 8), np.nan))
    with pytest.raises(ValueError):
        PrefactoredCompactDerivative(
            weights=(ccd8_solution.backward, ccd8_solution.forward)).fit(X)
