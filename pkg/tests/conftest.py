from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from consensus_lab.channel import validate_channel

DATA = Path(__file__).parent / "data"


@pytest.fixture
def data_dir() -> Path:
    return DATA


def random_channel(rng: np.random.Generator, max_size: int = 4):
    """Sparse random broadcast channel with every output reachable."""
    nx, ny, nz = rng.integers(2, max_size + 1, 3)
    w = np.zeros((nx, ny, nz))
    for x in range(nx):
        for _ in range(rng.integers(1, 4)):
            w[x, rng.integers(ny), rng.integers(nz)] += rng.random() + 0.05
    for y in range(ny):
        if w[:, y].sum() == 0:
            w[rng.integers(nx), y, rng.integers(nz)] += 0.3
    for z in range(nz):
        if w[:, :, z].sum() == 0:
            w[rng.integers(nx), rng.integers(ny), z] += 0.3
    w /= w.sum(axis=(1, 2), keepdims=True)
    return validate_channel(w, [f"x{i}" for i in range(nx)], [f"y{i}" for i in range(ny)], [f"z{i}" for i in range(nz)])


# one line per acceptance criterion, echoed again in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def report_criterion(number: int | str, ok: bool, detail: str) -> str:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print("\n" + line, flush=True)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def report_note(detail: str) -> None:
    line = f"[INFO] {detail}"
    ACCEPTANCE_LINES.append(line)
    print("\n" + line, flush=True)
