import csv
import socket
from pathlib import Path

import pytest

from persona_gauge.core import load_personas

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def personas():
    return load_personas()


@pytest.fixture
def no_network(monkeypatch):
    """Fail any socket connection that is not to the loopback interface."""
    real_connect = socket.socket.connect
    attempts = []

    def guarded(self, address):
        host = address[0] if isinstance(address, tuple) else address
        if host not in ("127.0.0.1", "localhost", "::1"):
            attempts.append(address)
            raise OSError(f"network access blocked in tests: {address}")
        return real_connect(self, address)

    monkeypatch.setattr(socket.socket, "connect", guarded)
    monkeypatch.setattr(socket, "getaddrinfo", _loopback_only(socket.getaddrinfo, attempts))
    return attempts


def _loopback_only(real, attempts):
    def resolver(host, *args, **kwargs):
        if host not in ("127.0.0.1", "localhost", "::1"):
            attempts.append(host)
            raise OSError(f"name resolution blocked in tests: {host}")
        return real(host, *args, **kwargs)
    return resolver


def write_mmlu(directory: Path, subjects: dict[str, list[tuple[str, list[str], str]]]) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    for subject, rows in subjects.items():
        with open(directory / f"{subject}_test.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            for stem, opts, gold in rows:
                w.writerow([stem, *opts, gold])
    return directory


@pytest.fixture
def balanced_mmlu(tmp_path):
    """1,024 synthetic items over one subject per category, gold letters cycling A-D."""
    letters = "ABCD"
    subjects = {}
    for subject in ("college_physics", "world_religions", "sociology", "marketing"):
        subjects[subject] = [
            (f"{subject} question {i}?", [f"{subject} option {i}{l}" for l in letters], letters[i % 4])
            for i in range(256)
        ]
    return write_mmlu(tmp_path / "mmlu", subjects)
