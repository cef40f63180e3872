import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prefccd.verify import (
    TEST_FUNCTIONS,
    ConvergenceRow,
    convergence_study,
    convergence_summary,
    dispersion_curve,
    fit_slope,
    polynomial_audit,
    symmetry_report,
    write_convergence_csv,
    write_json,
)
from prefccd.stencils import get_stencil
from prefccd.weights import PrefactoredWeights, mirror_backward

NS = [16, 32, 64, 128]


@pytest.mark.parametrize("name", ["sin", "exp", "gauss"])
def test_test_function_derivatives(name):
    (a, b), deriv = TEST_FUNCTIONS[name]
    x = np.linspace(a, b, 7)
    eps = 1e-5
    for k in range(4):
        fd = (deriv(k, x + eps) - deriv(k, x - eps)) / (2 * eps)
        assert np.allclose(fd, deriv(k + 1, x), rtol=1e-6, atol=1e-6 * max(1, np.abs(fd).max()))


def test_combined_slopes():
    r6 = convergence_study("combined", "ccd6", "sin", NS)
    r8 = convergence_study("combined", "ccd8", "sin", NS)
    assert r6.slope_first == pytest.approx(6, abs=0.3)
    assert r8.slope_first == pytest.approx(8, abs=0.4)
    assert [r.n for r in r6.rows] == NS
    assert all(r.h == pytest.approx(2 * np.pi / (r.n - 1)) for r in r6.rows)


def test_gaussian_slopes():
    assert convergence_study("combined", "ccd6", "gauss", NS).slope_first == pytest.approx(6, abs=0.3)


def test_constant_input_skips_fit():
    res = convergence_study("combined", "ccd6", "constant", NS)
    assert all(r.err_first <= 1e-12 and r.err_second <= 1e-12 for r in res.rows)
    assert res.skipped and math.isnan(res.slope_first)


@settings(max_examples=25, deadline=None)
@given(st.floats(1e-3, 1e3))
def test_slope_invariant_under_scaling(c):
    h = np.array([0.4, 0.2, 0.1, 0.05])
    err = 3.0 * h**6 * (1 + 0.1 * np.sin(7 * h))
    assert fit_slope(h, c * err) == pytest.approx(fit_slope(h, err), abs=1e-10)


def test_fit_slope_drops_floor_points():
    h = np.array([0.4, 0.2, 0.1, 0.05])
    err = np.array([1e-4, 1e-4 / 64, 1e-20, 1e-20])
    assert fit_slope(h, err, floor=1e-16) == pytest.approx(6.0)
    assert math.isnan(fit_slope(h, err, floor=1.0))


def test_prefactored_study(ccd8_solution):
    res = convergence_study("prefactored", "ccd8", "sin", NS,
                            weights=(ccd8_solution.forward, ccd8_solution.backward))
    assert res.slope_first == pytest.approx(8, abs=0.4)


def test_study_validation():
    with pytest.raises(ValueError):
        convergence_study("combined", "ccd6", "sin", [16, 32])
    with pytest.raises(ValueError):
        convergence_study("combined", "ccd6", "sin", [8, 16, 32])
    with pytest.raises(ValueError):
        convergence_study("combined", "ccd6", "cosh", NS)
    with pytest.raises(ValueError):
        convergence_study("spectral", "ccd6", "sin", NS)
    with pytest.raises(TypeError):
        convergence_study("prefactored", "ccd6", "sin", NS, weights=(1, 2))


def test_convergence_csv_and_summary(tmp_path):
    rows = [ConvergenceRow(16, 0.5, 1e-3, 2e-3), ConvergenceRow(32, 0.25, 1.5625e-5, 3e-5)]
    buf = io.StringIO()
    write_convergence_csv(rows, buf)
    assert buf.getvalue().splitlines() == [
        "n,h,err_first,err_second", "16,0.5,0.001,0.002", "32,0.25,1.5625e-05,3e-05"]
    res = convergence_study("combined", "ccd6", "sin", NS)
    summary = convergence_summary(res, "combined", "ccd6", "sin", 6, 0.3)
    assert summary["pass_first"] is True and summary["ns"] == NS
    path = tmp_path / "s.json"
    write_json(summary, path)
    assert json.loads(path.read_text()) == summary
    skipped = convergence_study("combined", "ccd6", "constant", NS)
    s2 = convergence_summary(skipped, "combined", "ccd6", "constant", 6, 0.3)
    assert s2["slope_first"] is None and s2["pass_first"] is None and s2["fit_skipped"]


def test_dispersion_printed_row_at_half_pi():
    curve = dispersion_curve("printed", "ccd6", 4)
    k = int(np.argmin(np.abs(curve.w - np.pi / 2)))
    assert curve.re_wp[k] == pytest.approx(36 / 23, abs=1e-15)
    assert curve.error_first[k] == pytest.approx(np.pi / 2 - 36 / 23, abs=1e-12)
    buf = io.StringIO()
    curve.to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "w,re_wp,im_wp,re_wpp2,im_wpp2,exact_wp,exact_wpp2"
    assert lines[2].split(",")[1] == format(36 / 23, ".15g")


def test_dispersion_oracle_matches_printed_first():
    a = dispersion_curve("oracle", "ccd8", 64)
    b = dispersion_curve("printed", "ccd8", 64)
    assert np.abs(a.re_wp - b.re_wp).max() <= 1e-12


def test_printed_ccd8_second_recorded_verbatim():
    c = dispersion_curve("printed", "ccd8", 16)
    assert np.all(np.isfinite(c.re_wpp2))


def test_dispersion_error_monotone_for_ccd6():
    c = dispersion_curve("oracle", "ccd6", 128)
    keep = c.w < 0.9 * np.pi
    assert np.all(np.diff(c.error_first[keep]) >= 0)


def test_dispersion_prefactored_and_errors(ccd8_solution):
    c = dispersion_curve("prefactored", "ccd8", 32, ccd8_solution.forward)
    assert np.abs(c.im_wp).max() > 0
    with pytest.raises(ValueError):
        dispersion_curve("prefactored", "ccd8", 32)
    with pytest.raises(ValueError):
        dispersion_curve("printed", "ccd6", 3)
    with pytest.raises(ValueError):
        dispersion_curve("guess", "ccd6", 16)


def test_symmetry_report_examples(ccd8_solution):
    zero = PrefactoredWeights("forward")
    assert symmetry_report(zero, mirror_backward(zero)) == (0.0, 0.0)
    fwd = PrefactoredWeights("forward", aI=-1.0, bI=1.0, aII=1.0, bII=-2.0, cII=1.0)
    assert max(symmetry_report(fwd, mirror_backward(fwd))) <= 1e-13
    assert max(symmetry_report(ccd8_solution.forward, ccd8_solution.backward)) <= 1e-10
    with pytest.raises(ValueError):
        symmetry_report(zero, zero, nsamples=8)


def test_polynomial_audit():
    audit = polynomial_audit(get_stencil("ccd6"))
    assert [d for d, _, _ in audit] == list(range(8))
    assert max(max(r1, r2) for d, r1, r2 in audit if d <= 6) <= 1e-12
    assert audit[7][1] > 1e-6
    printed = polynomial_audit(get_stencil("ccd8-printed"), max_degree=0)
    assert printed[0][2] > 1e-6
