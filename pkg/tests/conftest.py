import json
import time
from pathlib import Path

import pytest

from hjsplit.cli import build_model, run_split, validate

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
_START = time.perf_counter()
ACCEPTANCE_LINES: list = []


def load_config(name="arnold.json", **overrides):
    raw = json.loads((CONFIGS / name).read_text())
    raw.update(overrides)
    return validate(raw, CONFIGS)


@pytest.fixture(scope="session")
def arnold_cfg():
    return load_config()


@pytest.fixture(scope="session")
def arnold_model(arnold_cfg):
    return build_model(arnold_cfg, 1e-3)


@pytest.fixture(scope="session")
def arnold_split(arnold_cfg):
    """``(model, runs, report, lines)`` at eps = 1e-3, mu = 1e-6."""
    return run_split(arnold_cfg, 1e-3)


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: _order(s)):
        tr.write_line(line)
    tr.write_line(f"session wall time {time.perf_counter() - _START:.1f} s")


def _order(line):
    head = line.split(":")[0].split()[-1]
    num = "".join(c for c in head if c.isdigit())
    return (int(num or 0), head)
