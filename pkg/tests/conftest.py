import csv
from pathlib import Path

import pytest

IMPRESSION_HEADER = ("customer_id", "session_id", "timestamp", "item_id", "rank")
INTERACTION_HEADER = ("customer_id", "timestamp", "item_id", "kind")


def write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


@pytest.fixture
def impressions_file(tmp_path):
    def make(rows, name="impressions.csv"):
        return write_csv(tmp_path / name, IMPRESSION_HEADER, rows)
    return make


@pytest.fixture
def interactions_file(tmp_path):
    def make(rows, name="interactions.csv"):
        return write_csv(tmp_path / name, INTERACTION_HEADER, rows)
    return make


# acceptance criteria outcomes, filled by tests/test_acceptance.py
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE, key=lambda k: int(k.split()[0][2:])):
        ok, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
