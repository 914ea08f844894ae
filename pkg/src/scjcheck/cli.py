"""Command line interface: ``check``, ``export`` and ``serve``.

Exit codes: 0 all requested properties hold, 1 at least one fails,
2 usage/parse/validation error, 3 no failures but some verdicts were
inconclusive (exploration hit a limit).
"""

from __future__ import annotations

import argparse
import json
import sys
from http.server import BaseHTTPRequestHandler, HTTPServer

from . import appmodel, checker, framework
from .sync import EXCEPTION_KINDS
from .system import SystemConfig, SystemContext


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="scjcheck",
        description="Explicit-state checker for Level 2 mission programs.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("program", help="path to a .scj2 program")
        sp.add_argument("--mode", choices=("free", "priority"), default="free",
                        help="scheduling: free interleaving (default) or "
                             "priority-maximal")
        sp.add_argument("--spurious", action="store_true",
                        help="model spurious wakeups from wait sets")
        sp.add_argument("--no-max-progress", action="store_true",
                        help="allow time to pass while events are enabled")

    c = sub.add_parser("check", help="explore and check properties")
    common(c)
    c.add_argument("--all", action="store_true",
                   help="deadlock, divergence and every exception kind")
    c.add_argument("--deadlock", action="store_true")
    c.add_argument("--divergence", action="store_true")
    c.add_argument("--exception", action="append", default=[],
                   metavar="KIND", choices=EXCEPTION_KINDS)
    c.add_argument("--count", action="append", default=[], nargs=3,
                   metavar=("PATTERN", "REL", "N"),
                   help="event count on every maximal path, e.g. "
                        "--count writeCall == 5")
    c.add_argument("--order", action="append", default=[], nargs=2,
                   metavar=("BEFORE", "AFTER"))
    c.add_argument("--alternation", action="append", default=[], nargs=2,
                   metavar=("REPEAT", "BETWEEN"))
    c.add_argument("--max-states", type=int, default=5_000_000)
    c.add_argument("--max-depth", type=int, default=None)
    c.add_argument("--workers", type=int, default=1)
    c.add_argument("--format", choices=("human", "structured"),
                   default="human")

    e = sub.add_parser("export", help="export the explored transition system")
    common(e)
    e.add_argument("--format", choices=("text", "dot"), default="text")
    e.add_argument("--max-states", type=int, default=5_000_000)
    e.add_argument("-o", "--output", default=None)

    s = sub.add_parser("serve", help="serve the single-session animation "
                                     "protocol over HTTP")
    common(s)
    s.add_argument("--port", type=int, default=8571)
    s.add_argument("--host", default="127.0.0.1")
    return p


def _load(args):
    try:
        with open(args.program, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print("error: %s" % exc, file=sys.stderr)
        raise SystemExit(2)
    try:
        spec = appmodel.parse_program(text)
    except appmodel.ParseError as exc:
        for d in exc.diagnostics:
            print("%s: %s" % (args.program, d), file=sys.stderr)
        raise SystemExit(2)
    diags = appmodel.validate(spec)
    for d in diags:
        print("%s: %s" % (args.program, d), file=sys.stderr)
    if any(d.severity == "error" for d in diags):
        raise SystemExit(2)
    return framework.assemble_system(spec)


def _config(args) -> SystemConfig:
    return SystemConfig(max_progress=not args.no_max_progress,
                        spurious_wakeups=args.spurious,
                        priority_scheduling=(args.mode == "priority"))


def _cmd_check(args) -> int:
    composition = _load(args)
    limits = checker.ExploreLimits(max_states=args.max_states,
                                   max_depth=args.max_depth)
    graph = checker.explore(composition, _config(args), limits,
                            workers=args.workers)

    verdicts = []
    everything = args.all or not (args.deadlock or args.divergence
                                  or args.exception or args.count
                                  or args.order or args.alternation)
    if args.deadlock or everything:
        verdicts.append(checker.check_deadlock(graph))
    if args.divergence or everything:
        verdicts.append(checker.check_divergence(graph))
    kinds = list(EXCEPTION_KINDS) if everything else args.exception
    for kind in kinds:
        verdicts.append(checker.check_exception(graph, kind))
    for pattern, rel, n in args.count:
        verdicts.append(checker.check_event_count(graph, pattern, rel, int(n)))
    for before, after in args.order:
        verdicts.append(checker.check_order(graph, before, after))
    for repeat, between in args.alternation:
        verdicts.append(checker.check_alternation(graph, repeat, between))

    rep = checker.report(args.program, args.mode, graph, verdicts)
    if args.format == "structured":
        sys.stdout.write(checker.render_report(rep))
    else:
        sys.stdout.write(checker.render_human(rep))
    if any(v.status == "fails" for v in verdicts):
        return 1
    if any(v.status == "inconclusive" for v in verdicts):
        return 3
    return 0


def _cmd_export(args) -> int:
    composition = _load(args)
    graph = checker.explore(composition, _config(args),
                            checker.ExploreLimits(max_states=args.max_states))
    text = checker.export_graph(graph, args.format)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# Animation protocol
# ---------------------------------------------------------------------------

class AnimationSession:
    """One interactive run: a current state plus the trace that led to it.

    Protocol (all bodies JSON):
        GET  /state              current summary, trace so far, status flags
        GET  /events             enabled transitions, canonical order
        POST /step {"index": i}  take the i-th enabled transition
        POST /backtrack          undo the last step
        POST /reset              back to the initial state
        POST /trace {"trace": [labels]}  replay a trace from the start
    """

    def __init__(self, composition, config: SystemConfig):
        self.ctx = SystemContext(composition, config)
        self.config = config
        self.composition = composition
        self.reset()

    def reset(self):
        self.states = [self.ctx.initial_state()]
        self.trace = []

    @property
    def state(self):
        return self.states[-1]

    def enabled(self):
        return self.ctx.steps(self.state)

    def state_payload(self) -> dict:
        return {
            "summary": self.ctx.summary(self.state),
            "trace": list(self.trace),
            "depth": len(self.trace),
            "ended": self.ctx.is_terminated(self.state),
            "divergent": self.ctx.is_divergent(self.state),
            "deadlock": (not self.enabled()
                         and not self.ctx.is_terminated(self.state)
                         and not self.ctx.is_divergent(self.state)),
        }

    def events_payload(self) -> dict:
        return {"events": [checker._label(lbl) for lbl, _ in self.enabled()]}

    def step(self, index: int) -> dict:
        steps = self.enabled()
        if not 0 <= index < len(steps):
            raise IndexError("no enabled transition %d" % index)
        lbl, st = steps[index]
        self.states.append(st)
        self.trace.append(checker._label(lbl))
        return self.state_payload()

    def backtrack(self) -> dict:
        if len(self.states) > 1:
            self.states.pop()
            self.trace.pop()
        return self.state_payload()

    def load_trace(self, trace) -> dict:
        states = checker.replay(self.composition, trace, self.config)
        self.states = states
        self.trace = list(trace)
        return self.state_payload()


def _make_handler(session: AnimationSession):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):
            pass

        def _send(self, code: int, payload: dict):
            body = json.dumps(payload, sort_keys=True).encode("utf-8")
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Access-Control-Allow-Methods",
                             "GET, POST, OPTIONS")
            self.end_headers()
            self.wfile.write(body)

        def _body(self) -> dict:
            length = int(self.headers.get("Content-Length") or 0)
            if not length:
                return {}
            return json.loads(self.rfile.read(length).decode("utf-8"))

        def do_OPTIONS(self):
            self._send(200, {})

        def do_GET(self):
            if self.path == "/state":
                self._send(200, session.state_payload())
            elif self.path == "/events":
                self._send(200, session.events_payload())
            else:
                self._send(404, {"error": "unknown endpoint %s" % self.path})

        def do_POST(self):
            try:
                if self.path == "/step":
                    self._send(200, session.step(int(self._body()["index"])))
                elif self.path == "/backtrack":
                    self._send(200, session.backtrack())
                elif self.path == "/reset":
                    session.reset()
                    self._send(200, session.state_payload())
                elif self.path == "/trace":
                    self._send(200, session.load_trace(self._body()["trace"]))
                else:
                    self._send(404, {"error": "unknown endpoint %s" % self.path})
            except (KeyError, IndexError, ValueError) as exc:
                self._send(422, {"error": str(exc)})

    return Handler


def _cmd_serve(args) -> int:
    composition = _load(args)
    session = AnimationSession(composition, _config(args))
    server = HTTPServer((args.host, args.port), _make_handler(session))
    print("serving animation protocol on http://%s:%d"
          % (args.host, args.port), flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command == "check":
        return _cmd_check(args)
    if args.command == "export":
        return _cmd_export(args)
    if args.command == "serve":
        return _cmd_serve(args)
    parser.error("unknown command")
    return 2


if __name__ == "__main__":
    sys.exit(main())
