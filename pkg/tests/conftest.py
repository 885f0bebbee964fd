import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

DATA = Path(__file__).parent / "data"

# criterion id -> (status, detail); filled by test_acceptance.py
ACCEPTANCE: dict[str, tuple[str, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"[{status:7}] criterion {key}: {detail}")


@pytest.fixture(scope="session")
def public_csv():
    """The released annotation CSV, if available locally."""
    candidates = [os.environ.get("FITZ17K_CSV"), DATA / "fitzpatrick17k.csv"]
    for c in candidates:
        if c and Path(c).is_file():
            return Path(c)
    return None


@pytest.fixture(scope="session")
def public_images():
    d = os.environ.get("FITZ17K_IMAGES")
    return Path(d) if d and Path(d).is_dir() else None


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE
