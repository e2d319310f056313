"""HTTP and subprocess access behind a record/replay switch.

In ``replay`` mode every request is answered from a fixture directory and no
socket is ever opened; a missing fixture raises :class:`FixtureMissError`.
``record`` behaves like ``live`` and additionally stores each exchange.

Fixture files are named by the SHA-256 of the canonicalized request (method,
URL without query, sorted query pairs, canonical body). Headers are not part
of the key, so credentials never leak into fixture names or contents.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import os
import subprocess
import tempfile
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Mapping, Optional, Sequence
from urllib.parse import parse_qsl, urlsplit, urlunsplit

from .errors import FixtureMissError, RunError, TransportError
from .model import canonical_json, format_timestamp, parse_timestamp

log = logging.getLogger(__name__)

LIVE, RECORD, REPLAY = "live", "record", "replay"
RETRY_STATUSES = frozenset({429, 500, 502, 503, 504})


@dataclass(frozen=True)
class Response:
    status: int
    body: bytes
    headers: Mapping[str, str] = field(default_factory=dict)
    fetched_at: Optional[datetime] = None

    def json(self) -> Any:
        return json.loads(self.body.decode("utf-8"))

    @property
    def text(self) -> str:
        return self.body.decode("utf-8", errors="replace")

    @property
    def ok(self) -> bool:
        return 200 <= self.status < 300


@dataclass(frozen=True)
class CommandResult:
    returncode: int
    stdout: bytes
    stderr: bytes = b""
    fetched_at: Optional[datetime] = None


def _canonical_body(body: Any) -> Any:
    if body is None:
        return None
    if isinstance(body, (bytes, bytearray)):
        try:
            return json.loads(body)
        except ValueError:
            return {"sha256": hashlib.sha256(body).hexdigest()}
    return body


def request_key(method: str, url: str, params: Optional[Mapping[str, Any]] = None, body: Any = None) -> str:
    parts = urlsplit(url)
    query = parse_qsl(parts.query, keep_blank_values=True)
    if params:
        query.extend((k, str(v)) for k, v in params.items())
    base = urlunsplit((parts.scheme, parts.netloc, parts.path, "", ""))
    payload = {
        "method": method.upper(),
        "url": base,
        "query": sorted(query),
        "body": _canonical_body(body),
    }
    return hashlib.sha256(canonical_json(payload)).hexdigest()


def command_key(argv: Sequence[str], files: Mapping[str, bytes]) -> str:
    payload = {
        "argv": list(argv),
        "files": {name: hashlib.sha256(data).hexdigest() for name, data in sorted(files.items())},
    }
    return hashlib.sha256(canonical_json(payload)).hexdigest()


class Transport:
    """Replayable HTTP client.

    ``sleep`` and ``clock`` are injectable so retry behaviour can be tested
    without waiting.
    """

    def __init__(self, mode: str = LIVE, fixture_dir: "str | Path | None" = None, *, retries: int = 3,
                 backoff: float = 1.0, timeout: float = 60.0, session=None,
                 sleep: Callable[[float], None] = time.sleep,
                 clock: Callable[[], datetime] = lambda: datetime.now(timezone.utc)):
        if mode not in (LIVE, RECORD, REPLAY):
            raise ValueError(f"unknown transport mode {mode!r}")
        if mode in (RECORD, REPLAY) and fixture_dir is None:
            raise ValueError(f"{mode} mode needs a fixture directory")
        self.mode = mode
        self.fixture_dir = Path(fixture_dir) if fixture_dir is not None else None
        self.retries = retries
        self.backoff = backoff
        self.timeout = timeout
        self._session = session
        self._sleep = sleep
        self._clock = clock
        self._lock = threading.Lock()
        self.calls = 0

    @classmethod
    def replay(cls, fixture_dir: "str | Path") -> "Transport":
        return cls(REPLAY, fixture_dir)

    # -- HTTP ---------------------------------------------------------------

    def request(self, method: str, url: str, *, params: Optional[Mapping[str, Any]] = None,
                json_body: Any = None, headers: Optional[Mapping[str, str]] = None,
                auth: Optional[tuple[str, str]] = None) -> Response:
        key = request_key(method, url, params, json_body)
        with self._lock:
            self.calls += 1
        if self.mode == REPLAY:
            return self._load(key, method, url)
        response = self._send(method, url, params, json_body, headers, auth)
        if self.mode == RECORD:
            self._store(key, method, url, params, json_body, response)
        return response

    def get(self, url: str, **kwargs) -> Response:
        return self.request("GET", url, **kwargs)

    def post(self, url: str, body: Any = None, **kwargs) -> Response:
        return self.request("POST", url, json_body=body, **kwargs)

    def _send(self, method, url, params, json_body, headers, auth) -> Response:
        session = self._get_session()
        last_error: Optional[str] = None
        for attempt in range(1, self.retries + 1):
            try:
                raw = session.request(method, url, params=params, json=json_body, headers=headers,
                                      auth=auth, timeout=self.timeout)
            except Exception as exc:  # connection resets, DNS, timeouts
                last_error = f"{type(exc).__name__}: {exc}"
                response = None
            else:
                response = Response(raw.status_code, raw.content, dict(raw.headers), self._clock())
                if raw.status_code not in RETRY_STATUSES:
                    return response
                last_error = f"HTTP {raw.status_code}"
            if attempt < self.retries:
                delay = self.backoff * (2 ** (attempt - 1))
                if response is not None and "Retry-After" in response.headers:
                    try:
                        delay = max(delay, float(response.headers["Retry-After"]))
                    except ValueError:
                        pass
                log.warning("%s %s failed (%s); retry %d/%d in %.1fs", method, url, last_error,
                            attempt, self.retries - 1, delay)
                self._sleep(delay)
        raise TransportError(f"{method} {url} failed after {self.retries} attempts: {last_error}")

    def _get_session(self):
        if self._session is None:
            import requests

            self._session = requests.Session()
            self._session.headers["User-Agent"] = "scabench/0.1"
        return self._session

    def _fixture_path(self, key: str) -> Path:
        assert self.fixture_dir is not None
        return self.fixture_dir / "http" / f"{key}.json"

    def _store(self, key, method, url, params, body, response: Response) -> None:
        path = self._fixture_path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        record = {
            "request": {"method": method.upper(), "url": url, "params": dict(params or {}), "body": body},
            "response": _encode_body(response.body) | {
                "status": response.status,
                "content_type": response.headers.get("Content-Type", ""),
            },
            "recorded_at": format_timestamp(response.fetched_at),
        }
        path.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    def _load(self, key: str, method: str, url: str) -> Response:
        path = self._fixture_path(key)
        if not path.exists():
            raise FixtureMissError(f"no fixture for {method} {url} (key {key[:16]})")
        record = json.loads(path.read_text(encoding="utf-8"))
        resp = record["response"]
        return Response(
            status=int(resp["status"]),
            body=_decode_body(resp),
            headers={"Content-Type": resp.get("content_type", "")},
            fetched_at=parse_timestamp(record.get("recorded_at")),
        )

    # -- subprocesses --------------------------------------------------------

    def run_command(self, argv: Sequence[str], files: Optional[Mapping[str, bytes]] = None, *,
                    timeout: Optional[float] = None, env: Optional[Mapping[str, str]] = None) -> CommandResult:
        """Run ``argv`` with ``{name}`` placeholders replaced by temp files holding ``files[name]``.

        The replay key uses the placeholder form and file digests, never the
        temporary paths.
        """
        files = dict(files or {})
        key = command_key(argv, files)
        with self._lock:
            self.calls += 1
        if self.mode == REPLAY:
            return self._load_command(key, argv)
        result = self._exec(argv, files, timeout, env)
        if self.mode == RECORD:
            self._store_command(key, argv, result)
        return result

    def _exec(self, argv, files, timeout, env) -> CommandResult:
        with tempfile.TemporaryDirectory(prefix="scabench-") as tmp:
            paths = {}
            for name, data in files.items():
                p = Path(tmp) / name
                p.write_bytes(data)
                paths[name] = str(p)
            concrete = [_substitute(arg, paths) for arg in argv]
            full_env = dict(os.environ)
            full_env.update(env or {})
            try:
                proc = subprocess.run(concrete, capture_output=True, timeout=timeout, env=full_env, check=False)
            except FileNotFoundError as exc:
                raise RunError(f"executable not found: {concrete[0]}") from exc
            except subprocess.TimeoutExpired as exc:
                raise RunError(f"{concrete[0]} timed out after {timeout}s") from exc
        return CommandResult(proc.returncode, proc.stdout, proc.stderr, self._clock())

    def _store_command(self, key: str, argv, result: CommandResult) -> None:
        assert self.fixture_dir is not None
        path = self.fixture_dir / "cmd" / f"{key}.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        record = {
            "argv": list(argv),
            "returncode": result.returncode,
            "stdout": _encode_body(result.stdout),
            "stderr": result.stderr.decode("utf-8", errors="replace"),
            "recorded_at": format_timestamp(result.fetched_at),
        }
        path.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    def _load_command(self, key: str, argv) -> CommandResult:
        assert self.fixture_dir is not None
        path = self.fixture_dir / "cmd" / f"{key}.json"
        if not path.exists():
            raise FixtureMissError(f"no fixture for command {' '.join(argv)} (key {key[:16]})")
        record = json.loads(path.read_text(encoding="utf-8"))
        return CommandResult(
            int(record["returncode"]),
            _decode_body(record["stdout"]),
            record.get("stderr", "").encode("utf-8"),
            parse_timestamp(record.get("recorded_at")),
        )


def _substitute(arg: str, paths: Mapping[str, str]) -> str:
    # literal replacement; str.format would treat "bom.json" as attribute access
    for name, path in paths.items():
        arg = arg.replace("{" + name + "}", path)
    return arg


def _encode_body(body: bytes) -> dict:
    try:
        text = body.decode("utf-8")
    except UnicodeDecodeError:
        return {"body_b64": base64.b64encode(body).decode("ascii")}
    try:
        return {"json": json.loads(text)} if text.strip() else {"text": text}
    except ValueError:
        return {"text": text}


def _decode_body(record: Mapping[str, Any]) -> bytes:
    if "json" in record:
        return json.dumps(record["json"], sort_keys=True).encode("utf-8")
    if "body_b64" in record:
        return base64.b64decode(record["body_b64"])
    return record.get("text", "").encode("utf-8")


def write_fixture(fixture_dir: "str | Path", method: str, url: str, response_json: Any = None, *,
                  status: int = 200, params: Optional[Mapping[str, Any]] = None, body: Any = None,
                  text: Optional[str] = None, recorded_at: str = "2026-03-28T12:00:00Z") -> Path:
    """Write one HTTP fixture by hand (used to assemble offline corpora)."""
    key = request_key(method, url, params, body)
    path = Path(fixture_dir) / "http" / f"{key}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    payload: dict = {"status": status}
    if text is not None:
        payload["text"] = text
    else:
        payload["json"] = response_json
    record = {
        "request": {"method": method.upper(), "url": url, "params": dict(params or {}), "body": body},
        "response": payload,
        "recorded_at": recorded_at,
    }
    path.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_command_fixture(fixture_dir: "str | Path", argv: Sequence[str], files: Mapping[str, bytes],
                          stdout: Any, *, returncode: int = 0,
                          recorded_at: str = "2026-03-28T12:00:00Z") -> Path:
    key = command_key(argv, files)
    path = Path(fixture_dir) / "cmd" / f"{key}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    out = {"text": stdout} if isinstance(stdout, str) else {"json": stdout}
    record = {"argv": list(argv), "returncode": returncode, "stdout": out, "stderr": "",
              "recorded_at": recorded_at}
    path.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
