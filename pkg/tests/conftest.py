import os
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
DATASET = Path(os.environ.get("SWFOPT_DATASET", ROOT / "data" / "german.data"))

# one line per acceptance criterion, filled in by tests/test_acceptance.py
ACCEPTANCE_LINES: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[name])


@pytest.fixture(scope="session")
def dataset_path():
    if not DATASET.is_file():
        pytest.skip(f"dataset not available at {DATASET}")
    return DATASET


@pytest.fixture(scope="session")
def records(dataset_path):
    from swfopt import data

    return data.parse_german_credit(dataset_path)
