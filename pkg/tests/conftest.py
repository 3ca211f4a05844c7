import socket
import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pqmon import ConversionConfig


@pytest.fixture
def cfg() -> ConversionConfig:
    return ConversionConfig()


def read_all(endpoint: str, timeout: float = 10.0) -> bytes:
    """Read a tcp:<host>:<port> endpoint until EOF; for simulator tests."""
    _, _, rest = endpoint.partition(":")
    host, _, port = rest.rpartition(":")
    chunks = []
    with socket.create_connection((host, int(port)), timeout=timeout) as sock:
        sock.settimeout(timeout)
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            data = sock.recv(65536)
            if not data:
                break
            chunks.append(data)
    return b"".join(chunks)


def wait_until(predicate, timeout: float = 10.0, interval: float = 0.02) -> bool:
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if predicate():
            return True
        time.sleep(interval)
    return predicate()
