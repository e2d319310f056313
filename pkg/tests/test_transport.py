from types import SimpleNamespace

import pytest

from scabench.errors import FixtureMissError, TransportError
from scabench.transport import RECORD, REPLAY, Transport, request_key, write_command_fixture, write_fixture


class FakeSession:
    def __init__(self, script):
        self.script = list(script)
        self.seen = []

    def request(self, method, url, **kwargs):
        self.seen.append((method, url, kwargs.get("params"), kwargs.get("json")))
        item = self.script.pop(0)
        if isinstance(item, Exception):
            raise item
        status, body, headers = item
        return SimpleNamespace(status_code=status, content=body, headers=headers)


def test_key_ignores_query_order_and_placement():
    a = request_key("get", "https://x.test/p?b=2&a=1")
    b = request_key("GET", "https://x.test/p", {"a": 1, "b": "2"})
    assert a == b
    assert request_key("GET", "https://x.test/p", {"a": 2}) != a


def test_key_canonicalizes_json_body():
    assert request_key("POST", "https://x", body={"b": 1, "a": [1, 2]}) == \
        request_key("POST", "https://x", body=b'{"a": [1, 2], "b": 1}')


def test_replay_miss_raises(tmp_path, no_network):
    t = Transport(REPLAY, tmp_path)
    with pytest.raises(FixtureMissError):
        t.get("https://registry.npmjs.org/left-pad")


def test_replay_serves_hand_written_fixture(tmp_path, no_network):
    write_fixture(tmp_path, "POST", "https://api.osv.dev/v1/query", {"vulns": []}, body={"q": 1})
    resp = Transport.replay(tmp_path).post("https://api.osv.dev/v1/query", {"q": 1})
    assert resp.ok and resp.json() == {"vulns": []}
    assert resp.fetched_at.year == 2026


def test_record_then_replay_round_trip(tmp_path):
    session = FakeSession([(200, b'{"ok": true}', {"Content-Type": "application/json"}),
                           (200, b"<xml/>", {})])
    rec = Transport(RECORD, tmp_path, session=session)
    first = rec.get("https://a.test/j", params={"x": 1})
    second = rec.get("https://a.test/x")
    rep = Transport(REPLAY, tmp_path)
    assert rep.get("https://a.test/j?x=1").json() == first.json()
    assert rep.get("https://a.test/x").body == second.body


def test_retries_with_backoff():
    delays = []
    session = FakeSession([ConnectionError("reset"), (503, b"", {"Retry-After": "7"}), (200, b"{}", {})])
    t = Transport(session=session, retries=3, backoff=1.0, sleep=delays.append)
    assert t.get("https://a.test").status == 200
    assert delays == [1.0, 7.0]


def test_retry_budget_exhausted():
    session = FakeSession([(500, b"", {})] * 3)
    t = Transport(session=session, retries=3, sleep=lambda s: None)
    with pytest.raises(TransportError):
        t.get("https://a.test")


def test_non_retryable_status_returned_once():
    session = FakeSession([(404, b"{}", {})])
    assert Transport(session=session, sleep=lambda s: None).get("https://a.test").status == 404
    assert len(session.seen) == 1


def test_command_fixture_keyed_by_file_digest(tmp_path, no_network):
    argv = ["tool", "scan", "{bom.json}"]
    write_command_fixture(tmp_path, argv, {"bom.json": b"abc"}, {"results": []}, returncode=1)
    t = Transport.replay(tmp_path)
    res = t.run_command(argv, {"bom.json": b"abc"})
    assert res.returncode == 1 and res.stdout == b'{"results": []}'
    with pytest.raises(FixtureMissError):
        t.run_command(argv, {"bom.json": b"abd"})


def test_record_command(tmp_path):
    t = Transport(RECORD, tmp_path)
    out = t.run_command(["cat", "{in.txt}"], {"in.txt": b"hello"})
    assert out.stdout == b"hello"
    assert Transport.replay(tmp_path).run_command(["cat", "{in.txt}"], {"in.txt": b"hello"}).stdout == b"hello"
