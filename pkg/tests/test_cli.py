"""CLI and animation-protocol tests."""

import json
import threading
import urllib.request
from http.server import HTTPServer

import pytest

from conftest import program_path
from scjcheck import cli
from scjcheck.cli import AnimationSession, _make_handler, main
from scjcheck.framework import load_system
from scjcheck.system import SystemConfig


class TestCheckCommand:
    def test_all_hold_exits_zero(self, capsys):
        assert main(["check", program_path("stub.scj2")]) == 0
        out = capsys.readouterr().out
        assert "HOLDS" in out and "deadlock-freedom" in out

    def test_failure_exits_one(self, capsys):
        rc = main(["check", program_path("flatbuffer_no_notify.scj2"),
                   "--deadlock"])
        assert rc == 1
        assert "FAILS" in capsys.readouterr().out

    def test_inconclusive_exits_three(self, capsys):
        rc = main(["check", program_path("stub.scj2"), "--max-states", "10"])
        assert rc == 3
        assert "INCONCLUSIVE" in capsys.readouterr().out

    def test_missing_file_exits_two(self, capsys):
        with pytest.raises(SystemExit) as e:
            main(["check", "no_such_file.scj2"])
        assert e.value.code == 2

    def test_invalid_program_exits_two(self, tmp_path, capsys):
        bad = tmp_path / "bad.scj2"
        bad.write_text("safelet S { sequencer = Missing }")
        with pytest.raises(SystemExit) as e:
            main(["check", str(bad)])
        assert e.value.code == 2
        assert "error" in capsys.readouterr().err

    def test_structured_output_is_json(self, capsys):
        main(["check", program_path("stub.scj2"), "--format", "structured"])
        rep = json.loads(capsys.readouterr().out)
        assert rep["statespace"]["complete"] is True

    def test_count_and_order_flags(self, capsys):
        rc = main(["check", program_path("flatbuffer.scj2"),
                   "--count", "writeCall", "==", "5",
                   "--order", "probe(wrote,*)", "probe(consumed,*)",
                   "--alternation", "probe(wrote,*)", "probe(consumed,*)"])
        assert rc == 0
        out = capsys.readouterr().out
        assert out.count("HOLDS") == 3

    def test_exception_flag(self, capsys):
        rc = main(["check", program_path("flatbuffer_low_ceiling.scj2"),
                   "--exception", "ceilingViolation"])
        assert rc == 1


class TestExportCommand:
    def test_export_dot_to_file(self, tmp_path, capsys):
        out = tmp_path / "g.dot"
        assert main(["export", program_path("stub.scj2"),
                     "--format", "dot", "-o", str(out)]) == 0
        assert out.read_text().startswith("digraph")

    def test_export_text_to_stdout(self, capsys):
        assert main(["export", program_path("stub.scj2")]) == 0
        assert capsys.readouterr().out.startswith("lts states=")


@pytest.fixture()
def session():
    comp = load_system(open(program_path("stub.scj2")).read())
    return AnimationSession(comp, SystemConfig())


class TestAnimationSession:
    def test_initial_state(self, session):
        p = session.state_payload()
        assert p["depth"] == 0 and not p["ended"] and not p["deadlock"]

    def test_step_and_backtrack(self, session):
        events = session.events_payload()["events"]
        assert events == ["getSequencerCall()"]
        p = session.step(0)
        assert p["trace"] == ["getSequencerCall()"]
        p = session.backtrack()
        assert p["depth"] == 0

    def test_click_through_to_end(self, session):
        for _ in range(500):
            if session.state_payload()["ended"]:
                break
            session.step(0)
        assert session.state_payload()["ended"]
        assert session.trace[-1] == "end_of_program()"

    def test_load_trace_and_reset(self, session):
        session.load_trace(["getSequencerCall()", "getSequencerRet(Main)"])
        assert session.state_payload()["depth"] == 2
        session.reset()
        assert session.state_payload()["depth"] == 0

    def test_bad_step_raises(self, session):
        with pytest.raises(IndexError):
            session.step(99)


@pytest.fixture()
def server(session):
    httpd = HTTPServer(("127.0.0.1", 0), _make_handler(session))
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    yield "http://127.0.0.1:%d" % httpd.server_port
    httpd.shutdown()


def http(url, payload=None):
    data = json.dumps(payload).encode() if payload is not None else None
    req = urllib.request.Request(url, data=data)
    try:
        with urllib.request.urlopen(req) as r:
            return r.status, json.loads(r.read())
    except urllib.error.HTTPError as e:
        return e.code, json.loads(e.read())


class TestHttpProtocol:
    def test_state_and_events(self, server):
        code, state = http(server + "/state")
        assert code == 200 and state["depth"] == 0
        code, events = http(server + "/events")
        assert code == 200 and events["events"]

    def test_step_backtrack_reset(self, server):
        _, p = http(server + "/step", {"index": 0})
        assert p["depth"] == 1
        _, p = http(server + "/backtrack", {})
        assert p["depth"] == 0
        http(server + "/step", {"index": 0})
        _, p = http(server + "/reset", {})
        assert p["depth"] == 0

    def test_trace_replay(self, server):
        _, p = http(server + "/trace",
                    {"trace": ["getSequencerCall()", "getSequencerRet(Main)"]})
        assert p["depth"] == 2

    def test_errors_are_422(self, server):
        code, body = http(server + "/step", {"index": 42})
        assert code == 422 and "error" in body
        code, body = http(server + "/trace", {"trace": ["nonsense()"]})
        assert code == 422

    def test_unknown_endpoint_404(self, server):
        code, _ = http(server + "/nope", {})
        assert code == 404
