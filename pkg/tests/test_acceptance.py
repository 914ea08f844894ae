"""Acceptance gate: one test (and one pass/fail line under ``pytest -v``)
per criterion.  Bounds are pinned here, not derived at run time:

  1. framework + stub application explores completely in < 60 s and
     < 5,000,000 states; deadlock- and divergence-freedom hold.
  2. flatbuffer.scj2: all standard checks hold, writeCall count == 5,
     write/consume probes alternate, exploration < 30 s.
  3. four single-edit mutations produce exactly the expected verdicts and
     every counterexample replays exactly.
  4. most_eligible agrees with a brute-force oracle on 1000 random queues
     (<= 5 priority levels, <= 6 threads); notify-all == repeated extraction.
  5. period 4 with a 5-tick body makes overrun reachable and a 2-tick body
     keeps it unreachable; deadline 3 with a 4-tick body reaches deadlineMiss.
  6. ten corpus programs are deadlock- and divergence-free, each < 120 s.
  7. structured reports are byte-identical across repeat runs and across
     worker counts (1 vs 4).
  8. (secondary protocol contract) an animator can click through the stub
     program to termination and replay a deadlock trace over HTTP.
"""

import json
import random
import threading
import time
import urllib.request
from http.server import HTTPServer

import pytest

from conftest import program_path, program_text
from scjcheck import checker
from scjcheck.checker import (
    ExploreLimits, check_alternation, check_deadlock, check_divergence,
    check_event_count, check_exception, check_order, explore, render_report,
    replay, report,
)
from scjcheck.cli import AnimationSession, _make_handler
from scjcheck.framework import load_system
from scjcheck.sync import EXCEPTION_KINDS, drain_eligible, enqueue, most_eligible
from scjcheck.sync import EMPTY_QUEUE
from scjcheck.system import SystemConfig, SystemContext

MAX_STATES = 5_000_000


def timed_explore(name, budget_s, **kw):
    comp = load_system(program_text(name))
    t0 = time.monotonic()
    graph = explore(comp, limits=ExploreLimits(max_states=MAX_STATES), **kw)
    elapsed = time.monotonic() - t0
    assert graph.complete, "%s: exploration hit a limit (%s)" % (name, graph.limit_note)
    assert elapsed < budget_s, "%s: %.1fs exceeds %ds budget" % (name, elapsed, budget_s)
    return comp, graph


def reachable(graph, channel):
    return any(lbl.startswith(channel + "(")
               for edges in graph.edges for lbl, _ in edges)


def test_criterion_1_stub_lifecycle_deadlock_and_divergence_free():
    _, g = timed_explore("stub.scj2", budget_s=60)
    assert g.n_states < MAX_STATES
    assert check_deadlock(g).status == "holds"
    assert check_divergence(g).status == "holds"


def test_criterion_2_flatbuffer_all_checks_hold():
    _, g = timed_explore("flatbuffer.scj2", budget_s=30)
    assert check_deadlock(g).status == "holds"
    assert check_divergence(g).status == "holds"
    for kind in EXCEPTION_KINDS:
        assert check_exception(g, kind).status == "holds", kind
    assert check_event_count(g, "writeCall", "==", 5).status == "holds"
    assert check_order(g, "probe(wrote,*)", "probe(consumed,*)").status == "holds"
    assert check_alternation(g, "probe(wrote,*)",
                             "probe(consumed,*)").status == "holds"


def _assert_replays_exactly(comp, trace):
    states = replay(comp, trace)
    assert len(states) == len(trace) + 1
    return states


def test_criterion_3_mutations_detected_and_counterexamples_replay():
    # (a) dropped notify: the buffer deadlocks with Reader stranded waiting.
    comp = load_system(program_text("flatbuffer_no_notify.scj2"))
    g = explore(comp)
    v = check_deadlock(g)
    assert v.status == "fails"
    states = _assert_replays_exactly(comp, v.counterexample)
    ctx = SystemContext(comp, SystemConfig())
    assert not ctx.steps(states[-1]) and not ctx.is_terminated(states[-1])
    monitors = json.dumps(ctx.summary(states[-1])["monitors"])
    assert "Reader" in monitors and "wait_set" in monitors

    # (b)-(d): one edit, one exception kind each.
    expected = {
        "flatbuffer_double_registration.scj2": "illegalStateException",
        "flatbuffer_wait_outside_sync.scj2": "illegalMonitorStateException",
        "flatbuffer_low_ceiling.scj2": "ceilingViolation",
    }
    for name, kind in expected.items():
        comp = load_system(program_text(name))
        g = explore(comp)
        v = check_exception(g, kind)
        assert v.status == "fails", name
        assert v.counterexample[-1].startswith("throw(%s," % kind)
        for other in EXCEPTION_KINDS:
            if other != kind:
                assert check_exception(g, other).status == "holds", (name, other)
        _assert_replays_exactly(comp, v.counterexample)


def test_criterion_4_eligibility_matches_brute_force_oracle():
    tids = ("t1", "t2", "t3", "t4", "t5", "t6")
    rng = random.Random(1618)
    for _ in range(1000):
        levels = rng.sample(range(1, 40), rng.randint(1, 5))
        chosen = rng.sample(tids, rng.randint(0, 6))
        q = EMPTY_QUEUE
        arrivals = []
        for i, tid in enumerate(chosen):
            lv = rng.choice(levels)
            q = enqueue(q, tid, lv)
            arrivals.append((tid, lv, i))

        def brute(rest):
            return (max(rest, key=lambda a: (a[1], -a[2]))[0]
                    if rest else None)

        assert most_eligible(q) == brute(arrivals)
        drained, rest = [], list(arrivals)
        while rest:
            t = brute(rest)
            drained.append(t)
            rest = [a for a in rest if a[0] != t]
        assert drain_eligible(q) == tuple(drained)


def test_criterion_5_overrun_and_deadline_miss_reachability():
    _, g = timed_explore("overrun.scj2", budget_s=60)
    assert reachable(g, "overrun"), "period 4 / 5-tick body must overrun"
    _, g = timed_explore("overrun_safe.scj2", budget_s=60)
    assert not reachable(g, "overrun"), "period 4 / 2-tick body must not overrun"
    _, g = timed_explore("deadline_miss.scj2", budget_s=60)
    assert reachable(g, "deadlineMiss"), "deadline 3 / 4-tick body must miss"


CORPUS = (
    "stub.scj2", "two_missions.scj2", "periodic_fires_aperiodic.scj2",
    "thread_and_oneshot.scj2", "three_oneshots.scj2", "three_threads.scj2",
    "nested_sequencer.scj2", "handoff.scj2", "ping_pong.scj2",
    "aperiodic_coalesce.scj2",
)


def test_criterion_6_corpus_deadlock_and_divergence_free():
    assert len(CORPUS) == 10
    for name in CORPUS:
        _, g = timed_explore(name, budget_s=120)
        assert check_deadlock(g).status == "holds", name
        assert check_divergence(g).status == "holds", name


def test_criterion_7_reports_are_deterministic_bytes():
    comp = load_system(program_text("flatbuffer.scj2"))

    def run(workers):
        g = explore(comp, workers=workers)
        verdicts = [check_deadlock(g), check_divergence(g),
                    check_event_count(g, "writeCall", "==", 5),
                    check_order(g, "probe(wrote,*)", "probe(consumed,*)")]
        return render_report(report("flatbuffer", "free", g, verdicts)).encode()

    first = run(1)
    assert run(1) == first, "repeat run changed the report bytes"
    assert run(4) == first, "worker count changed the report bytes"


def _http(url, payload=None):
    data = json.dumps(payload).encode() if payload is not None else None
    with urllib.request.urlopen(urllib.request.Request(url, data=data)) as r:
        return json.loads(r.read())


def test_criterion_8_animation_protocol_click_through_and_trace_replay():
    # Click-through: drive the stub program to end_of_program over HTTP,
    # always taking the first enabled event, as the animator's UI does.
    comp = load_system(program_text("stub.scj2"))
    session = AnimationSession(comp, SystemConfig())
    httpd = HTTPServer(("127.0.0.1", 0), _make_handler(session))
    threading.Thread(target=httpd.serve_forever, daemon=True).start()
    base = "http://127.0.0.1:%d" % httpd.server_port
    try:
        state = _http(base + "/state")
        for _ in range(500):
            if state["ended"]:
                break
            assert _http(base + "/events")["events"]
            state = _http(base + "/step", {"index": 0})
        assert state["ended"] and state["trace"][-1] == "end_of_program()"
    finally:
        httpd.shutdown()

    # Deadlock trace replay: paste the checker's counterexample into a
    # session on the broken buffer and land exactly on the deadlock.
    comp = load_system(program_text("flatbuffer_no_notify.scj2"))
    trace = check_deadlock(explore(comp)).counterexample
    session = AnimationSession(comp, SystemConfig())
    httpd = HTTPServer(("127.0.0.1", 0), _make_handler(session))
    threading.Thread(target=httpd.serve_forever, daemon=True).start()
    base = "http://127.0.0.1:%d" % httpd.server_port
    try:
        state = _http(base + "/trace", {"trace": list(trace)})
        assert state["depth"] == len(trace)
        assert state["deadlock"] and not state["ended"]
        assert _http(base + "/events")["events"] == []
    finally:
        httpd.shutdown()
