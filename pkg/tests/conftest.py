import json
from pathlib import Path

import pytest

DATA = Path(__file__).resolve().parents[1] / "src" / "gaussrd" / "data"

_criteria = {}


@pytest.fixture
def fixture_path():
    return lambda name: str(DATA / f"{name}.json")


@pytest.fixture
def write_json(tmp_path):
    def _write(obj, name="source.json"):
        path = tmp_path / name
        path.write_text(obj if isinstance(obj, str) else json.dumps(obj))
        return str(path)
    return _write


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if item.module.__name__.endswith("test_acceptance") and item.name.startswith("test_criterion_"):
        if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
            title = (item.function.__doc__ or item.name).strip().splitlines()[0]
            _criteria[item.name] = (title, report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_criteria, key=lambda s: int(s.split("_")[2])):
        title, outcome = _criteria[name]
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {int(name.split('_')[2]):2d}: {status}  {title}")
