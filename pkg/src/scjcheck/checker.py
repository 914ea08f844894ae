"""Explicit-state checker: exhaustive exploration plus property verdicts.

The exploration artefact is a ``StateGraph``: nodes are canonical system
states (identified by fingerprint), edges carry rendered event labels
(``"tau"`` for internal moves).  All property checks run over the graph, so
one exploration serves any number of properties.

Determinism: exploration is breadth-first over sorted transition lists,
node indices are assigned in discovery order, and the worker count never
changes the result — layers are partitioned, computed, and merged back in
layer order.  Counterexamples are the lexicographically least trace among
the shortest ones, and ``replay`` resolves same-label nondeterminism by the
same canonical rule the checker uses (first transition in step order).
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from .system import SystemConfig, SystemContext

TAU = "tau"


@dataclass(frozen=True)
class ExploreLimits:
    max_states: int = 5_000_000
    max_depth: Optional[int] = None


class LimitReached(Exception):
    pass


class StateGraph:
    """Finite LTS produced by exploration."""

    def __init__(self):
        self.edges = []  # node -> list[(label, succ)] in canonical order
        self.ended = []  # node -> bool
        self.divergent = []  # node -> bool
        self.unexpanded = set()  # nodes cut off by a limit
        self.complete = True
        self.limit_note = None

    @property
    def n_states(self) -> int:
        return len(self.edges)

    @property
    def n_transitions(self) -> int:
        return sum(len(e) for e in self.edges)

    def is_deadlock(self, node: int) -> bool:
        return (not self.edges[node] and not self.ended[node]
                and not self.divergent[node] and node not in self.unexpanded)

    def deadlocks(self) -> list:
        return [n for n in range(self.n_states) if self.is_deadlock(n)]

    def terminals(self) -> list:
        return [n for n in range(self.n_states) if not self.edges[n]]


def _label(ev) -> str:
    return TAU if ev is None else str(ev)


def explore(composition, config: SystemConfig = None,
            limits: ExploreLimits = None, workers: int = 1) -> StateGraph:
    """Breadth-first exploration of the whole reachable state space."""
    config = config or SystemConfig()
    limits = limits or ExploreLimits()
    ctx = SystemContext(composition, config)
    graph = StateGraph()

    s0 = ctx.initial_state()
    index = {ctx.fingerprint(s0): 0}
    graph.edges.append(None)
    graph.ended.append(ctx.is_terminated(s0))
    graph.divergent.append(ctx.is_divergent(s0))
    frontier = [(0, s0)]
    depth = 0

    def expand(item):
        node, state = item
        if ctx.is_terminated(state) or ctx.is_divergent(state):
            return node, []
        steps = ctx.steps(state)
        return node, [(_label(lbl), ctx.fingerprint(st), st,
                       ctx.is_terminated(st), ctx.is_divergent(st))
                      for lbl, st in steps]

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while frontier and graph.complete:
            depth += 1
            if limits.max_depth is not None and depth > limits.max_depth:
                graph.complete = False
                graph.limit_note = "depth limit %d reached" % limits.max_depth
                break
            if pool is not None:
                results = list(pool.map(expand, frontier, chunksize=64))
            else:
                results = [expand(item) for item in frontier]
            nxt = []
            for node, steps in results:
                out = []
                for label, fp, st, ended, div in steps:
                    succ = index.get(fp)
                    if succ is None:
                        if len(graph.edges) >= limits.max_states:
                            graph.complete = False
                            graph.limit_note = ("state limit %d reached"
                                                % limits.max_states)
                            break
                        succ = len(graph.edges)
                        index[fp] = succ
                        graph.edges.append(None)
                        graph.ended.append(ended)
                        graph.divergent.append(div)
                        nxt.append((succ, st))
                    out.append((label, succ))
                graph.edges[node] = out
                if not graph.complete:
                    graph.unexpanded.add(node)  # edge list is truncated
                    break
            frontier = nxt
    finally:
        if pool is not None:
            pool.shutdown(wait=False)
    for n, e in enumerate(graph.edges):
        if e is None:
            graph.edges[n] = []
            if not (graph.ended[n] or graph.divergent[n]):
                graph.unexpanded.add(n)
    return graph


# ---------------------------------------------------------------------------
# Counterexamples
# ---------------------------------------------------------------------------

def shortest_trace(graph: StateGraph, targets, target_edges=None):
    """Lexicographically least among the shortest traces from the initial
    state into ``targets`` (a node set) or over ``target_edges`` (a predicate
    on (node, label, succ), with the matching edge appended)."""
    n = graph.n_states
    INF = n + 2
    # distance-to-goal by reverse BFS
    dist = [INF] * n
    rev = [[] for _ in range(n)]
    goal_edge_dist = [INF] * n
    for u in range(n):
        for label, v in graph.edges[u]:
            rev[v].append(u)
            if target_edges is not None and target_edges(u, label, v):
                goal_edge_dist[u] = 1
    work = []
    for t in (targets or ()):
        dist[t] = 0
        work.append(t)
    if target_edges is not None:
        for u in range(n):
            if goal_edge_dist[u] == 1 and dist[u] > 1:
                dist[u] = 1
                work.append(u)
    i = 0
    while i < len(work):
        v = work[i]
        i += 1
        for u in rev[v]:
            if dist[u] > dist[v] + 1:
                dist[u] = dist[v] + 1
                work.append(u)
    if dist[0] >= INF:
        return None
    # forward greedy walk: among edges that decrease the distance, take the
    # least label (tau sorts first); ties on label take the least successor.
    trace = []
    node = 0
    while True:
        if targets is not None and node in targets and dist[node] == 0:
            return trace
        if target_edges is not None and dist[node] == 1 \
                and goal_edge_dist[node] == 1:
            best = min((label, v) for label, v in graph.edges[node]
                       if target_edges(node, label, v))
            trace.append(best[0])
            return trace
        best = min((label, v) for label, v in graph.edges[node]
                   if dist[v] == dist[node] - 1)
        trace.append(best[0])
        node = best[1]


def replay(composition, trace, config: SystemConfig = None,
           with_summaries: bool = False):
    """Re-execute a trace from the initial state.  Indistinguishable labels
    (several taus, or one event with several successors) are resolved by
    depth-first search in canonical step order with backtracking, so any
    trace the checker emitted is replayable, and the path found is the
    canonically least one realising the trace."""
    ctx = SystemContext(composition, config or SystemConfig())
    trace = list(trace)

    best_fail = [0, []]  # deepest failure position, enabled labels there

    def walk(state, pos, path):
        if pos == len(trace):
            return path
        steps = ctx.steps(state)
        enabled = sorted({_label(l) for l, _ in steps})
        if best_fail[0] <= pos:
            best_fail[0], best_fail[1] = pos, enabled
        for lbl, st in steps:
            if _label(lbl) == trace[pos]:
                found = walk(st, pos + 1, path + [st])
                if found is not None:
                    return found
        return None

    s0 = ctx.initial_state()
    states = walk(s0, 0, [s0])
    if states is None:
        raise ValueError("replay stuck at step %d: no transition %r "
                         "(enabled: %s)" % (best_fail[0],
                                            trace[best_fail[0]],
                                            best_fail[1]))
    if with_summaries:
        return states, [ctx.summary(s) for s in states]
    return states


# ---------------------------------------------------------------------------
# Verdicts
# ---------------------------------------------------------------------------

@dataclass
class Verdict:
    property: str
    status: str  # "holds" | "fails" | "inconclusive"
    counterexample: Optional[list] = None
    detail: str = ""

    def as_dict(self) -> dict:
        d = {"property": self.property, "status": self.status}
        if self.counterexample is not None:
            d["counterexample"] = list(self.counterexample)
        if self.detail:
            d["detail"] = self.detail
        return d


def _verdict(graph, name, bad_nodes=None, bad_edges=None, detail_ok="",
             detail_bad=""):
    trace = shortest_trace(graph, bad_nodes, bad_edges)
    if trace is not None:
        return Verdict(name, "fails", trace, detail_bad)
    if not graph.complete:
        return Verdict(name, "inconclusive",
                       detail="exploration incomplete: %s" % graph.limit_note)
    return Verdict(name, "holds", detail=detail_ok)


def check_deadlock(graph: StateGraph) -> Verdict:
    return _verdict(graph, "deadlock-freedom", set(graph.deadlocks()),
                    detail_bad="a state with no transitions that is neither "
                               "terminated nor divergent")


def check_divergence(graph: StateGraph) -> Verdict:
    bad = {n for n in range(graph.n_states) if graph.divergent[n]}
    return _verdict(graph, "divergence-freedom", bad,
                    detail_bad="a divergent (Chaos) state is reachable")


def check_exception(graph: StateGraph, kind: str) -> Verdict:
    prefix = "throw(%s," % kind
    return _verdict(graph, "no-exception:%s" % kind, None,
                    bad_edges=lambda u, label, v: label.startswith(prefix),
                    detail_bad="a %s can be raised" % kind)


def _matches(label: str, pattern: str) -> bool:
    """``pattern`` is a channel name (matches every event on the channel) or
    a rendered event whose fields may be ``*`` wildcards, e.g.
    ``probe(wrote,*)``."""
    if "(" not in pattern:
        return label.split("(", 1)[0] == pattern
    pchan, pargs = pattern[:-1].split("(", 1)
    if "(" not in label:
        return False
    lchan, largs = label[:-1].split("(", 1)
    if pchan != lchan:
        return False
    pfields = pargs.split(",") if pargs else []
    lfields = largs.split(",") if largs else []
    if len(pfields) != len(lfields):
        return False
    return all(p == "*" or p == l for p, l in zip(pfields, lfields))


_RELS = {
    "==": lambda c, n: c == n,
    "!=": lambda c, n: c != n,
    "<=": lambda c, n: c <= n,
    "<": lambda c, n: c < n,
    ">=": lambda c, n: c >= n,
    ">": lambda c, n: c > n,
}


def check_event_count(graph: StateGraph, pattern: str, rel: str,
                      bound: int) -> Verdict:
    """On every maximal finite path, the number of events matching
    ``pattern`` satisfies ``rel bound``.  The counter saturates at bound+1,
    which keeps the product graph finite; for ==, <= and < a saturated
    counter is already a violation, so nothing is lost."""
    if rel not in _RELS:
        raise ValueError("unknown relation %r" % rel)
    name = "count(%s) %s %d" % (pattern, rel, bound)
    sat = bound + 1
    ok = _RELS[rel]
    # product reachability: (node, count)
    seen = {(0, 0)}
    work = [(0, 0, [])]
    eager_fail = rel in ("==", "<=", "<")
    while work:
        node, cnt, trace = work.pop()
        edges = graph.edges[node]
        if not edges and not ok(cnt, bound):
            return Verdict(name, "fails", trace,
                           "a maximal path ends with count %s" %
                           (cnt if cnt <= bound else "> %d" % bound))
        for label, succ in sorted(edges):
            c2 = min(cnt + 1, sat) if _matches(label, pattern) else cnt
            if eager_fail and c2 == sat:
                return Verdict(name, "fails", trace + [label],
                               "count exceeds %d" % bound)
            if (succ, c2) not in seen:
                seen.add((succ, c2))
                work.append((succ, c2, trace + [label]))
    if not graph.complete:
        return Verdict(name, "inconclusive",
                       detail="exploration incomplete: %s" % graph.limit_note)
    return Verdict(name, "holds")


def check_order(graph: StateGraph, before: str, after: str) -> Verdict:
    """Every event matching ``after`` is preceded (on its path) by at least
    one event matching ``before``."""
    name = "order(%s before %s)" % (before, after)
    seen = {(0, False)}
    work = [(0, False, [])]
    while work:
        node, armed, trace = work.pop()
        for label, succ in sorted(graph.edges[node]):
            if not armed and _matches(label, after):
                return Verdict(name, "fails", trace + [label],
                               "%s occurs before any %s" % (after, before))
            armed2 = armed or _matches(label, before)
            if (succ, armed2) not in seen:
                seen.add((succ, armed2))
                work.append((succ, armed2, trace + [label]))
    if not graph.complete:
        return Verdict(name, "inconclusive",
                       detail="exploration incomplete: %s" % graph.limit_note)
    return Verdict(name, "holds")


def check_alternation(graph: StateGraph, repeat: str, between: str) -> Verdict:
    """No two events matching ``repeat`` without one matching ``between`` in
    between (e.g. writes alternate with reads)."""
    name = "alternation(%s / %s)" % (repeat, between)
    seen = {(0, False)}
    work = [(0, False, [])]
    while work:
        node, hot, trace = work.pop()
        for label, succ in sorted(graph.edges[node]):
            if _matches(label, repeat):
                if hot:
                    return Verdict(name, "fails", trace + [label],
                                   "two %s without an intervening %s"
                                   % (repeat, between))
                flag = True
            elif _matches(label, between):
                flag = False
            else:
                flag = hot
            if (succ, flag) not in seen:
                seen.add((succ, flag))
                work.append((succ, flag, trace + [label]))
    if not graph.complete:
        return Verdict(name, "inconclusive",
                       detail="exploration incomplete: %s" % graph.limit_note)
    return Verdict(name, "holds")


# ---------------------------------------------------------------------------
# Reports and export
# ---------------------------------------------------------------------------

def report(program_name: str, mode: str, graph: StateGraph,
           verdicts: list) -> dict:
    """Structured result; deliberately contains no timing, so identical runs
    produce identical bytes."""
    return {
        "program": program_name,
        "mode": mode,
        "statespace": {
            "states": graph.n_states,
            "transitions": graph.n_transitions,
            "complete": graph.complete,
            **({"limit": graph.limit_note} if graph.limit_note else {}),
        },
        "properties": [v.as_dict() for v in verdicts],
    }


def render_report(rep: dict) -> str:
    return json.dumps(rep, indent=2, sort_keys=True) + "\n"


def render_human(rep: dict) -> str:
    lines = ["program: %s" % rep["program"],
             "states: %d  transitions: %d%s" % (
                 rep["statespace"]["states"],
                 rep["statespace"]["transitions"],
                 "" if rep["statespace"]["complete"] else "  (incomplete)")]
    for p in rep["properties"]:
        lines.append("%-12s %s" % (p["status"].upper(), p["property"]))
        if p.get("detail"):
            lines.append("             %s" % p["detail"])
        if p.get("counterexample") is not None:
            lines.append("  counterexample (%d steps):" %
                         len(p["counterexample"]))
            for label in p["counterexample"]:
                lines.append("    %s" % label)
    return "\n".join(lines) + "\n"


def export_graph(graph: StateGraph, fmt: str = "text") -> str:
    """Deterministic serialisations of the explored LTS."""
    if fmt == "dot":
        out = ["digraph lts {", '  node [shape=circle];']
        for n in range(graph.n_states):
            attrs = []
            if graph.ended[n]:
                attrs.append("shape=doublecircle")
            if graph.divergent[n]:
                attrs.append("color=red")
            if graph.is_deadlock(n):
                attrs.append("color=orange")
            out.append("  s%d [%s];" % (n, ",".join(attrs)) if attrs
                       else "  s%d;" % n)
        for n in range(graph.n_states):
            for label, succ in graph.edges[n]:
                out.append('  s%d -> s%d [label="%s"];' % (n, succ, label))
        out.append("}")
        return "\n".join(out) + "\n"
    if fmt == "text":
        out = ["lts states=%d transitions=%d init=0"
               % (graph.n_states, graph.n_transitions)]
        for n in range(graph.n_states):
            flags = []
            if graph.ended[n]:
                flags.append("ended")
            if graph.divergent[n]:
                flags.append("divergent")
            if graph.is_deadlock(n):
                flags.append("deadlock")
            out.append("state %d%s" % (n, (" " + " ".join(flags)) if flags
                                       else ""))
            for label, succ in graph.edges[n]:
                out.append("  %s -> %d" % (label, succ))
        return "\n".join(out) + "\n"
    raise ValueError("unknown export format %r" % fmt)
