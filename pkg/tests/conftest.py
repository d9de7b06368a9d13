import os
from pathlib import Path

import numpy as np
import pytest

from panelur.tables import TableCache

SEED = 20240611


@pytest.fixture(scope="session")
def cache_dir(tmp_path_factory) -> Path:
    """Table cache shared by the whole session; ``PANELUR_TEST_CACHE`` keeps it between runs."""
    env = os.environ.get("PANELUR_TEST_CACHE")
    if env:
        path = Path(env)
        path.mkdir(parents=True, exist_ok=True)
        return path
    return tmp_path_factory.mktemp("tables")


@pytest.fixture(scope="session")
def small_tables(cache_dir) -> TableCache:
    """Cheap tables for unit tests: minimum replication counts."""
    return TableCache(cache_dir, seed=SEED, reps=10000, cips_reps=300, cadf_reps=1000)


@pytest.fixture(scope="session")
def full_tables(cache_dir) -> TableCache:
    """Tables at the pipeline defaults, as used by a real run."""
    return TableCache(cache_dir, seed=SEED)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_CRITERIA: dict[int, list[tuple[str, bool, str]]] = {}


@pytest.fixture
def criterion():
    """Record named checks under an acceptance criterion number for the end-of-run summary."""
    def record(number: int, name: str, ok: bool, detail: str = "") -> bool:
        _CRITERIA.setdefault(number, []).append((name, bool(ok), detail))
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        checks = _CRITERIA[number]
        if all(detail == "skipped" for _, _, detail in checks):
            status = "SKIP"
        else:
            status = "PASS" if all(ok for _, ok, _ in checks) else "FAIL"
        parts = "; ".join(("" if ok else "FAILED ") + (f"{name}: {detail}" if detail else name)
                          for name, ok, detail in checks)
        terminalreporter.write_line(f"criterion {number}: {status} ({parts})")
