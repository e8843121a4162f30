import time

import pytest

from gaussrd import DistortionSetup
from gaussrd.cli import main
from gaussrd.validation import check_sandwich, load_fixture, run_all


def test_default_run_passes(capsys):
    assert main(["validate"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.rstrip().endswith("invariants hold")


def test_corrupted_upper_bound_is_caught(capsys):
    assert main(["validate", "--quick", "--corrupt-gupper"]) == 1
    captured = capsys.readouterr()
    assert "FAIL  sandwich" in captured.out and "sandwich" in captured.err


def test_quick_mode_is_fast():
    start = time.perf_counter()
    results = run_all(quick=True)
    assert time.perf_counter() - start < 60.0
    assert all(r.passed for r in results)


def test_report_written_to_file(tmp_path, capsys):
    path = tmp_path / "report.txt"
    assert main(["validate", "--quick", "--out", str(path)]) == 0
    assert path.read_text() == capsys.readouterr().out


def test_sandwich_slack_is_nonnegative():
    res = check_sandwich(DistortionSetup(1.0, 0.25), ns=(8, 32), points=10)
    assert res.passed and res.worst_slack >= 0.0


@pytest.mark.parametrize("name,sigma2", [("gaussian", 1.0), ("ternary", 1.0), ("rayleigh", 1.0)])
def test_bundled_fixtures(name, sigma2):
    assert load_fixture(name).sigma2 == pytest.approx(sigma2, abs=1e-14)
