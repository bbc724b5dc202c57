"""Named verification suites: unit, properties, desk."""
import subprocess
import sys
from pathlib import Path

from . import criteria

SUITES = ("unit", "properties", "desk")
# pytest marker expressions per suite
MARKERS = {"unit": "not properties and not acceptance", "properties": "properties"}


def find_tests():
    """The tests/ directory next to ``src/`` in a source checkout, else ./tests."""
    here = Path(__file__).resolve()
    for cand in (here.parents[3] / "tests", Path.cwd() / "tests"):
        if cand.is_dir():
            return cand
    return None


def run_pytest_suite(name, extra=()):
    tests = find_tests()
    if tests is None:
        print(f"[FAIL] {name}: no tests/ directory found (run from a source checkout)")
        return 1
    cmd = [sys.executable, "-m", "pytest", str(tests), "-m", MARKERS[name], "-q", *extra]
    return subprocess.call(cmd)


def run_desk(report=print):
    results = criteria.run_all(report)
    n_ok = sum(r.passed for r in results)
    report(f"desk: {n_ok}/{len(results)} criteria passed")
    return 0 if n_ok == len(results) else 1


def verify(suite, report=print):
    if suite not in SUITES:
        raise ValueError(f"suite must be one of {SUITES}, got {suite!r}")
    if suite == "desk":
        return run_desk(report)
    return run_pytest_suite(suite)
