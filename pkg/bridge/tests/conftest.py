import socket
import threading
import time

import pytest
import requests
import uvicorn

from pagerag_bridge import BuiltinBackend, create_app


def _free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


@pytest.fixture(scope="session")
def live_bridge():
    """A real HTTP server running the builtin backend for the whole session."""
    port = _free_port()
    config = uvicorn.Config(
        create_app(BuiltinBackend(dim=256)),
        host="127.0.0.1",
        port=port,
        log_level="error",
    )
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    url = f"http://127.0.0.1:{port}"
    deadline = time.monotonic() + 15.0
    while time.monotonic() < deadline:
        try:
            if requests.get(url + "/health", timeout=1.0).status_code == 200:
                break
        except requests.RequestException:
            time.sleep(0.05)
    else:
        raise RuntimeError("bridge failed to start")
    yield url
    server.should_exit = True
    thread.join(timeout=5.0)
