import socket
import threading
import time
from pathlib import Path

import pytest
import uvicorn

from tutorcast.service import ServiceConfig, create_app

FIXTURES = Path(__file__).parent / "fixtures"


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


class LiveServer:
    """A real uvicorn instance on localhost, for HTTP-level tests."""

    def __init__(self, config: ServiceConfig):
        self.port = free_port()
        self.app = create_app(config)
        self._uv = uvicorn.Server(
            uvicorn.Config(self.app, host="127.0.0.1", port=self.port, log_level="warning", access_log=False)
        )
        self._thread = threading.Thread(target=self._uv.run, daemon=True)

    @property
    def url(self) -> str:
        return f"http://127.0.0.1:{self.port}"

    def start(self) -> "LiveServer":
        self._thread.start()
        deadline = time.monotonic() + 15
        while not self._uv.started:
            if time.monotonic() > deadline:
                raise RuntimeError("uvicorn did not start in time")
            time.sleep(0.02)
        return self

    def stop(self) -> None:
        self._uv.should_exit = True
        self._thread.join(timeout=10)


@pytest.fixture(scope="session")
def live_server(tmp_path_factory):
    config = ServiceConfig(
        storage_root=tmp_path_factory.mktemp("live-data"),
        secret="live-secret",
        qa_fixture_path=FIXTURES / "qa_fixtures.json",
    )
    server = LiveServer(config).start()
    yield server
    server.stop()


@pytest.fixture
def slowed_server(tmp_path):
    config = ServiceConfig(
        storage_root=tmp_path / "slow-data",
        secret="slow-secret",
        test_delay_ms=300,
    )
    server = LiveServer(config).start()
    yield server
    server.stop()
