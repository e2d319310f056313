"""Run configuration files (TOML or JSON, detected from content).

Credentials are referenced by environment-variable name only; a config that
appears to inline a secret value is rejected.
"""

from __future__ import annotations

import json
import re
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Optional

from .adapters import AdapterConfig
from .errors import UsageError
from .groundtruth import BuildConfig
from .transport import LIVE, REPLAY, Transport

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

_ENV_NAME = re.compile(r"^[A-Z_][A-Z0-9_]*$")
_SECRET_KEYS = {"token", "api_key", "apikey", "password", "secret", "key"}


@dataclass(frozen=True)
class TransportConfig:
    mode: str = LIVE
    fixture_dir: Optional[str] = None
    retries: int = 3
    backoff: float = 1.0
    timeout: float = 60.0

    def make(self) -> Transport:
        return Transport(self.mode, self.fixture_dir, retries=self.retries, backoff=self.backoff,
                         timeout=self.timeout)


@dataclass(frozen=True)
class RunConfig:
    build: BuildConfig
    adapters: tuple[AdapterConfig, ...] = ()
    transport: TransportConfig = field(default_factory=TransportConfig)
    output_dir: str = "runs"
    a_max: int = 3
    repeats: int = 2
    osv_url: Optional[str] = None

    def __post_init__(self) -> None:
        if self.a_max < 1 or self.repeats < 1:
            raise UsageError("a_max and repeats must be at least 1")

    def with_replay(self, fixture_dir: "str | Path") -> "RunConfig":
        return replace(self, transport=replace(self.transport, mode=REPLAY, fixture_dir=str(fixture_dir)))


def parse_text(text: str) -> dict:
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            return json.loads(text)
        except ValueError as exc:
            raise UsageError(f"invalid JSON config: {exc}") from exc
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"invalid TOML config: {exc}") from exc


def _check_credentials(adapter: Mapping[str, Any]) -> None:
    for key in adapter:
        if key.lower() in _SECRET_KEYS:
            raise UsageError(f"adapter {adapter.get('tool')}: '{key}' looks like an inlined secret; "
                             "name an environment variable under [credentials] instead")
    for name, var in (adapter.get("credentials") or {}).items():
        if not isinstance(var, str) or not _ENV_NAME.match(var):
            raise UsageError(f"adapter {adapter.get('tool')}: credential {name!r} must name an environment "
                             "variable (UPPER_CASE), not hold a value")


def _resolve(base: Optional[Path], value: Optional[str]) -> Optional[str]:
    if value is None or base is None:
        return value
    p = Path(value)
    return str(p if p.is_absolute() else (base / p))


def config_from_dict(data: Mapping[str, Any], base: Optional[Path] = None) -> RunConfig:
    adapters = []
    for raw in data.get("adapters") or ():
        _check_credentials(raw)
        raw = dict(raw)
        if raw.get("findings_path"):
            raw["findings_path"] = _resolve(base, raw["findings_path"])
        adapters.append(AdapterConfig.from_dict(raw))
    t = dict(data.get("transport") or {})
    if t.get("fixture_dir"):
        t["fixture_dir"] = _resolve(base, t["fixture_dir"])
    return RunConfig(
        build=BuildConfig.from_dict(data.get("build") or {}),
        adapters=tuple(adapters),
        transport=TransportConfig(**t),
        output_dir=data.get("output_dir", "runs"),
        a_max=int(data.get("a_max", 3)),
        repeats=int(data.get("repeats", 2)),
        osv_url=data.get("osv_url"),
    )


def load_config(path: "str | Path") -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(parse_text(text), path.parent)
