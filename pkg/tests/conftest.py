from __future__ import annotations

import json
import threading
from datetime import date, datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from gridcast.series import CarbonSeries, Resolution


def utc(year, month, day, hour=0, minute=0):
    return datetime(year, month, day, hour, minute, tzinfo=timezone.utc)


def make_series(values, grid_id="test-grid", start=None, resolution=Resolution.HOURLY):
    if start is None:
        start = utc(2021, 1, 1)
    return CarbonSeries(grid_id, start, resolution, values)


@pytest.fixture
def store(tmp_path):
    from gridcast.datastore import FileStore

    return FileStore(tmp_path / "store")


@pytest.fixture
def registry():
    from gridcast.backends import default_registry

    return default_registry()


D0 = date(2021, 1, 1)


class StubServer:
    """Local HTTP server for remote-backend and fetcher tests.

    ``routes`` maps (method, path) to a callable(body_dict_or_None) ->
    (status, payload); payload may be a dict (JSON) or a str (text/plain).
    """

    def __init__(self, routes):
        self.routes = routes
        self.requests: list[tuple[str, str, object]] = []
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def _handle(self, method):
                length = int(self.headers.get("Content-Length", 0))
                raw = self.rfile.read(length) if length else b""
                body = json.loads(raw) if raw else None
                outer.requests.append((method, self.path, body))
                handler = outer.routes.get((method, self.path.split("?")[0]))
                if handler is None:
                    self.send_response(404)
                    self.end_headers()
                    return
                status, payload = handler(body)
                data = (
                    json.dumps(payload).encode()
                    if isinstance(payload, (dict, list))
                    else str(payload).encode()
                )
                self.send_response(status)
                ctype = "application/json" if isinstance(payload, (dict, list)) else "text/plain"
                self.send_header("Content-Type", ctype)
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def do_POST(self):
                self._handle("POST")

            def do_GET(self):
                self._handle("GET")

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self._server.server_port}"
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    def close(self):
        self._server.shutdown()
        self._server.server_close()


@pytest.fixture
def stub_server():
    servers = []

    def start(routes):
        server = StubServer(routes)
        servers.append(server)
        return server

    yield start
    for server in servers:
        server.close()
