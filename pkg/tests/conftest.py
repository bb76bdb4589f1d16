from __future__ import annotations

import sys
from pathlib import Path

import pytest

TESTS_DIR = Path(__file__).parent
REPO_ROOT = TESTS_DIR.parent
FIXTURES = REPO_ROOT / "fixtures"

sys.path.insert(0, str(TESTS_DIR))


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def force_numpy_kernel(monkeypatch):
    """Pin the single-threaded reference path (used for golden comparisons)."""
    monkeypatch.setenv("CASTMASK_KERNEL", "numpy")


@pytest.fixture
def force_numba_kernel(monkeypatch):
    from castmask import _kernels

    if not _kernels.NUMBA_AVAILABLE:
        pytest.skip("numba not available")
    monkeypatch.setenv("CASTMASK_KERNEL", "numba")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion."""
    rows: dict[str, str] = {}
    for status, label in (("passed", "PASS"), ("failed", "FAIL"), ("error", "FAIL")):
        for rep in terminalreporter.stats.get(status, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py::test_criterion" in nodeid:
                name = nodeid.split("::")[-1]
                if label == "FAIL" or name not in rows:
                    rows[name] = label
    if rows:
        terminalreporter.write_sep("=", "acceptance criteria")
        for name in sorted(rows):
            terminalreporter.write_line(f"{rows[name]}  {name}")
