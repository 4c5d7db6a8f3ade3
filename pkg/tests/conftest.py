import os
import tempfile
from pathlib import Path

import pytest

from fieldstore.memory import MemoryBackend
from fieldstore.posix import PosixBackend


def _fast_root() -> str | None:
    # tmpfs keeps the multi-hundred-MiB benchmark runs off the disk
    shm = "/dev/shm"
    return shm if os.path.isdir(shm) and os.access(shm, os.W_OK) else None


@pytest.fixture
def store_root(tmp_path) -> Path:
    return tmp_path


@pytest.fixture
def tmpfs_root():
    with tempfile.TemporaryDirectory(prefix="fieldstore-", dir=_fast_root()) as d:
        yield Path(d)


@pytest.fixture(params=["posix", "memory"])
def backend(request, tmp_path):
    if request.param == "posix":
        return PosixBackend(tmp_path, create=True)
    return MemoryBackend()


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
