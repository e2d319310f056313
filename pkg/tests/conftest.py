import json
import socket
from pathlib import Path

import pytest

from scabench.adapters import read_findings
from scabench.config import load_config
from scabench.groundtruth import load_snapshot

FIXTURES = Path(__file__).parent / "fixtures"
REPLAY = FIXTURES / "replay"
DRIFT = FIXTURES / "replay-drift"
APPENDIX = FIXTURES / "appendix"
SCHEMAS = Path(__file__).parent / "schemas"
TOOLS = ("dtrack", "github", "oss-index", "snyk", "trivy")


@pytest.fixture
def no_network(monkeypatch):
    """Any attempt to open a socket fails the test."""

    def guard(*args, **kwargs):
        raise AssertionError("network access attempted in an offline test")

    monkeypatch.setattr(socket, "socket", guard)
    monkeypatch.setattr(socket, "create_connection", guard)
    yield


@pytest.fixture
def replay_config():
    return load_config(REPLAY / "config.toml")


@pytest.fixture(scope="session")
def golden():
    return json.loads((REPLAY / "golden.json").read_text())


@pytest.fixture(scope="session")
def appendix_snapshots():
    return load_snapshot(APPENDIX / "s0"), load_snapshot(APPENDIX / "s1")


@pytest.fixture(scope="session")
def appendix_findings():
    out = {}
    for name in ("s0", "s1"):
        out[name] = {t: read_findings(APPENDIX / "findings" / name / f"{t}.jsonl") for t in TOOLS}
    return out


@pytest.fixture(scope="session")
def fixture_gen():
    """The fixture generator script, imported as a module (its simulated upstream is reused)."""
    import importlib.util
    import sys

    path = Path(__file__).resolve().parents[1] / "scripts" / "make_fixtures.py"
    spec = importlib.util.spec_from_file_location("make_fixtures", path)
    module = importlib.util.module_from_spec(spec)
    sys.modules["make_fixtures"] = module
    spec.loader.exec_module(module)
    return module


ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Context-manager factory that records PASS/FAIL for one acceptance criterion."""
    import contextlib
    import time

    results = request.config.stash.setdefault(ACCEPTANCE, {})

    @contextlib.contextmanager
    def record(number, title, budget=None):
        start = time.perf_counter()
        try:
            yield
            elapsed = time.perf_counter() - start
            if budget is not None:
                assert elapsed < budget, f"took {elapsed:.2f}s, budget {budget}s"
        except BaseException as exc:
            results[number] = f"FAIL  {number:>2}. {title}  ({type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''})"
            print(results[number])
            raise
        results[number] = f"PASS  {number:>2}. {title}  ({elapsed:.2f}s)"
        print(results[number])

    return record


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(ACCEPTANCE, {})
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
