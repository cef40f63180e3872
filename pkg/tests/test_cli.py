import json

import numpy as np
import pytest

from prefccd.cli import main


@pytest.fixture
def weights_file(tmp_path, ccd8_solution):
    path = tmp_path / "w.json"
    ccd8_solution.forward.save(path, "ccd8", ccd8_solution.report.residual_norm, "spectral")
    return path


@pytest.fixture
def grid_file(tmp_path):
    x = np.linspace(0.0, 2 * np.pi, 48)
    path = tmp_path / "g.csv"
    path.write_text("x,u\n" + "".join(f"{a!r},{b!r}\n" for a, b in zip(x.tolist(), np.sin(x).tolist())))
    return path


def test_check_stencils(tmp_path, capsys):
    out = tmp_path / "audit.json"
    assert main(["check-stencils", "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["ccd6"]["exact_through_degree"] == 6
    assert report["ccd8"]["exact_through_degree"] == 8
    assert report["ccd8-printed"]["constant_defect"] == "1/54"
    assert "1/54" in capsys.readouterr().out


def test_wavenumber_example(capsys):
    assert main(["wavenumber", "--scheme", "ccd6", "--source", "printed", "--samples", "4"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "w,re_wp,im_wp,re_wpp2,im_wpp2,exact_wp,exact_wpp2"
    row = [r for r in lines[1:] if r.startswith(format(np.pi / 2, ".15g"))][0]
    assert row.split(",")[1] == format(36 / 23, ".15g")


def test_wavenumber_prefactored_requires_weights(weights_file, tmp_path):
    assert main(["wavenumber", "--source", "prefactored", "--scheme", "ccd8"]) == 2
    out = tmp_path / "d.csv"
    assert main(["wavenumber", "--source", "prefactored", "--scheme", "ccd8",
                 "--weights", str(weights_file), "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 65


def test_differentiate(weights_file, grid_file, tmp_path):
    out = tmp_path / "d.csv"
    assert main(["differentiate", "--weights", str(weights_file), "--input", str(grid_file),
                 "--out", str(out)]) == 0
    data = np.loadtxt(out, delimiter=",", skiprows=1)
    assert out.read_text().splitlines()[0] == "x,u,du,d2u"
    assert np.abs(data[10:-10, 2] - np.cos(data[10:-10, 0])).max() < 1e-6
    again = tmp_path / "d2.csv"
    main(["differentiate", "--weights", str(weights_file), "--input", str(grid_file),
          "--out", str(again)])
    assert out.read_bytes() == again.read_bytes()


def test_differentiate_with_exact_end_values(weights_file, grid_file, tmp_path):
    out = tmp_path / "d.csv"
    assert main(["differentiate", "--weights", str(weights_file), "--input", str(grid_file),
                 "--left", "1,0", "--right", "1,0", "--out", str(out)]) == 0
    data = np.loadtxt(out, delimiter=",", skiprows=1)
    assert data[0, 2] == pytest.approx(1.0, abs=1e-3)


def test_differentiate_missing_weights(grid_file, capsys):
    assert main(["differentiate", "--weights", "missing.json", "--input", str(grid_file)]) == 2
    assert "missing.json" in capsys.readouterr().err


def test_differentiate_rejects_backward_or_bad_input(tmp_path, weights_file, ccd8_solution):
    back = tmp_path / "b.json"
    ccd8_solution.backward.save(back, "ccd8", 0.0, "spectral")
    bad = tmp_path / "bad.csv"
    bad.write_text("t,u\n0,0\n")
    assert main(["differentiate", "--weights", str(back), "--input", str(bad)]) == 2
    assert main(["differentiate", "--weights", str(weights_file), "--input", str(bad)]) == 2
    assert main(["differentiate", "--weights", str(weights_file), "--input", "nope.csv"]) == 2


def test_convergence(tmp_path):
    out = tmp_path / "c.csv"
    assert main(["convergence", "--scheme", "ccd6", "--out", str(out)]) == 0
    summary = json.loads((tmp_path / "c.summary.json").read_text())
    assert summary["pass_first"] is True
    assert out.read_text().splitlines()[0] == "n,h,err_first,err_second"
    first = out.read_bytes()
    main(["convergence", "--scheme", "ccd6", "--out", str(out)])
    assert out.read_bytes() == first


def test_convergence_prefactored_with_weights(tmp_path, weights_file):
    out = tmp_path / "c.csv"
    assert main(["convergence", "--method", "prefactored", "--scheme", "ccd8",
                 "--weights", str(weights_file), "--out", str(out)]) == 0


def test_convergence_failing_check_exits_one(tmp_path, weights_file):
    # eighth-order weights measured against the sixth-order expectation
    out = tmp_path / "c.csv"
    code = main(["convergence", "--method", "prefactored", "--scheme", "ccd6",
                 "--weights", str(weights_file), "--out", str(out)])
    assert code == 1
    assert json.loads((tmp_path / "c.summary.json").read_text())["pass_first"] is False


def test_convergence_round_off_skips_fit(tmp_path):
    out = tmp_path / "c.csv"
    code = main(["convergence", "--scheme", "ccd8", "--precision", "double",
                 "--ns", "64", "128", "256", "--out", str(out)])
    summary = json.loads((tmp_path / "c.summary.json").read_text())
    assert code == 0 and summary["fit_skipped"]


@pytest.mark.parametrize("argv", [
    [],
    ["bogus"],
    ["wavenumber", "--samples", "two"],
    ["wavenumber", "--samples", "2"],
    ["convergence", "--ns", "16", "32", "--out", "x.csv"],
    ["solve-weights", "--target", "ccd6", "--system", "printed", "--out", "w.json"],
    ["differentiate", "--weights", "w.json", "--input", "g.csv", "--left", "1"],
])
def test_usage_errors(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 2


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0


def test_solve_weights(tmp_path):
    out = tmp_path / "w.json"
    code = main(["solve-weights", "--target", "ccd8", "--system", "spectral", "--starts", "64",
                 "--seed", "42", "--tol", "1e-12", "--out", str(out)])
    assert code == 0
    data = json.loads(out.read_text())
    assert data["residual_norm"] <= 1e-10 and data["direction"] == "forward"
    back = json.loads((tmp_path / "w.backward.json").read_text())
    assert back["direction"] == "backward" and back["thetaI"] == -data["thetaI"]
    summary = json.loads((tmp_path / "w.summary.json").read_text())
    assert summary["validated"] and summary["seed"] == 42 and summary["passed"]
