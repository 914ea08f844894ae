"""Monitor semantics: per-object locks with reentrancy, priority-ordered
entry queues and wait sets, and the thread registry that tracks priority
and interrupted status.

The queue/eligibility machinery is pure and independently testable; the
`object_fw` / `thread_fw` builders wrap it into native components whose
event protocol is:

    startSyncMeth(oid, tid, src) ... lockAcquired(oid, tid, src)
    endSyncMeth(oid, tid, src)
    waitCall(oid, tid, src) ... waitRet(oid, tid, src)
    notify(oid, tid, src) / notifyAll(oid, tid, src)
    throw(kind, oid) followed by divergence on paradigm misuse

The ``src`` field names the calling component (a synchronised-method action
or a schedulable body), so replies are routed to the exact call site.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

from .kernel import Component, Event, alpha

KIND_ILLEGAL_STATE = "illegalStateException"
KIND_ILLEGAL_MONITOR = "illegalMonitorStateException"
KIND_CEILING = "ceilingViolation"
KIND_INTERRUPTED = "interrupted"
KIND_ILLEGAL_ARGUMENT = "illegalArgumentException"

EXCEPTION_KINDS = (
    KIND_ILLEGAL_STATE,
    KIND_ILLEGAL_MONITOR,
    KIND_CEILING,
    KIND_INTERRUPTED,
    KIND_ILLEGAL_ARGUMENT,
)


class InvariantFault(Exception):
    """A queue or monitor invariant was violated by the caller."""


# ---------------------------------------------------------------------------
# Priority queues: total map level -> injective thread sequence
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PriorityQueue:
    """Waiting threads by priority level; FIFO within a level."""

    levels: tuple = ()  # sorted tuple of (level, tuple-of-tids), non-empty seqs only

    def threads(self) -> tuple:
        return tuple(t for _, seq in self.levels for t in seq)

    def contains(self, tid: str) -> bool:
        return any(tid in seq for _, seq in self.levels)

    def is_empty(self) -> bool:
        return not self.levels

    def at(self, level: int) -> tuple:
        for lv, seq in self.levels:
            if lv == level:
                return seq
        return ()


EMPTY_QUEUE = PriorityQueue()


def enqueue(q: PriorityQueue, tid: str, level: int) -> PriorityQueue:
    if q.contains(tid):
        raise InvariantFault("thread %r already queued" % tid)
    new = []
    placed = False
    for lv, seq in q.levels:
        if lv == level:
            new.append((lv, seq + (tid,)))
            placed = True
        else:
            new.append((lv, seq))
    if not placed:
        new.append((level, (tid,)))
    new.sort()
    return PriorityQueue(tuple(new))


def most_eligible(q: PriorityQueue) -> Optional[str]:
    """Head of the highest non-empty level (longest-waiting wins a tie)."""
    best = None
    best_level = None
    for lv, seq in q.levels:
        if seq and (best_level is None or lv > best_level):
            best_level = lv
            best = seq[0]
    return best


def remove(q: PriorityQueue, tid: str) -> PriorityQueue:
    new = []
    for lv, seq in q.levels:
        seq = tuple(t for t in seq if t != tid)
        if seq:
            new.append((lv, seq))
    return PriorityQueue(tuple(new))


def drain_eligible(q: PriorityQueue) -> tuple:
    """All threads in eligibility order (repeated most_eligible extraction)."""
    out = []
    while True:
        t = most_eligible(q)
        if t is None:
            return tuple(out)
        out.append(t)
        q = remove(q, t)


# ---------------------------------------------------------------------------
# Monitor state and pure operations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThreadState:
    id: str
    priority: int
    interrupted: bool = False


@dataclass(frozen=True)
class MonitorState:
    object: str
    ceiling: int
    holder: Optional[str] = None
    depth: int = 0
    entry_queue: PriorityQueue = EMPTY_QUEUE
    wait_set: PriorityQueue = EMPTY_QUEUE
    saved_depths: tuple = ()  # sorted tuple of (tid, depth)

    def saved(self, tid: str) -> Optional[int]:
        for t, d in self.saved_depths:
            if t == tid:
                return d
        return None

    def _set_saved(self, tid: str, depth: Optional[int]) -> tuple:
        pairs = [(t, d) for t, d in self.saved_depths if t != tid]
        if depth is not None:
            pairs.append((tid, depth))
        return tuple(sorted(pairs))


ACQUIRED = "acquired"
QUEUED = "queued"


def error(kind: str) -> tuple:
    return ("error", kind)


def try_acquire(m: MonitorState, t: ThreadState) -> Tuple[MonitorState, object]:
    if m.entry_queue.contains(t.id) or m.wait_set.contains(t.id):
        raise InvariantFault("thread %r already inside monitor %r" % (t.id, m.object))
    if t.priority > m.ceiling:
        return m, error(KIND_CEILING)
    if m.holder is None:
        return replace(m, holder=t.id, depth=1), ACQUIRED
    if m.holder == t.id:
        return replace(m, depth=m.depth + 1), ACQUIRED
    return replace(m, entry_queue=enqueue(m.entry_queue, t.id, t.priority)), QUEUED


def release_once(m: MonitorState, tid: str) -> Tuple[MonitorState, Optional[str]]:
    if m.holder != tid or m.depth < 1:
        return m, error(KIND_ILLEGAL_MONITOR)
    if m.depth > 1:
        return replace(m, depth=m.depth - 1), None
    return _grant_next(replace(m, holder=None, depth=0))


def _grant_next(m: MonitorState) -> Tuple[MonitorState, Optional[str]]:
    nxt = most_eligible(m.entry_queue)
    if nxt is None:
        return m, None
    depth = m.saved(nxt)
    m = replace(m,
                holder=nxt,
                depth=depth if depth is not None else 1,
                entry_queue=remove(m.entry_queue, nxt),
                saved_depths=m._set_saved(nxt, None))
    return m, nxt


def monitor_wait(m: MonitorState, t: ThreadState):
    """Returns (state', handover-or-None) or (state, error(kind))."""
    if m.holder != t.id:
        return m, error(KIND_ILLEGAL_MONITOR)
    if t.interrupted:
        return m, error(KIND_INTERRUPTED)
    m = replace(m,
                holder=None,
                depth=0,
                wait_set=enqueue(m.wait_set, t.id, t.priority),
                saved_depths=m._set_saved(t.id, m.depth))
    return _grant_next(m)


def monitor_notify(m: MonitorState, tid: str) -> Tuple[MonitorState, object]:
    """Moves the most eligible waiter to the entry queue.  The resumed
    thread must re-acquire the lock before its waitRet is delivered."""
    if m.holder != tid:
        return m, error(KIND_ILLEGAL_MONITOR)
    r = most_eligible(m.wait_set)
    if r is None:
        return m, None
    return _wake(m, r), r


def monitor_notify_all(m: MonitorState, tid: str) -> Tuple[MonitorState, object]:
    if m.holder != tid:
        return m, error(KIND_ILLEGAL_MONITOR)
    resumed = drain_eligible(m.wait_set)
    for r in resumed:
        m = _wake(m, r)
    return m, resumed


def _wake(m: MonitorState, tid: str) -> MonitorState:
    level = _wait_level(m.wait_set, tid)
    m = replace(m, wait_set=remove(m.wait_set, tid))
    return replace(m, entry_queue=enqueue(m.entry_queue, tid, level))


def _wait_level(q: PriorityQueue, tid: str) -> int:
    for lv, seq in q.levels:
        if tid in seq:
            return lv
    raise InvariantFault("thread %r not waiting" % tid)


# ---------------------------------------------------------------------------
# Native monitor component
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MonitorPart:
    """Runtime slot of an object lock inside a SystemState.

    ``pending`` holds reply events the monitor must deliver before taking
    any new request (lock grants, wait resumptions, throws); ``clients``
    remembers which call site to answer for each admitted thread.
    """

    state: MonitorState
    pending: tuple = ()  # of Event
    clients: tuple = ()  # sorted (tid, src) for entry-queue members
    wait_clients: tuple = ()  # sorted (tid, src) for wait-set members
    diverged: bool = False
    throw_next: bool = False  # diverge after the pending throw is delivered
    is_thread = False

    # -- bookkeeping helpers --

    def _client_of(self, tid: str, waiting: bool) -> str:
        table = self.wait_clients if waiting else self.clients
        for t, s in table:
            if t == tid:
                return s
        raise InvariantFault("no recorded call site for %r" % tid)

    def _set_client(self, tid: str, src: Optional[str], waiting: bool):
        table = self.wait_clients if waiting else self.clients
        pairs = [(t, s) for t, s in table if t != tid]
        if src is not None:
            pairs.append((tid, src))
        return tuple(sorted(pairs))

    def canon(self):
        return (self.state, self.pending, self.clients, self.wait_clients,
                self.diverged, self.throw_next)

    def summary(self) -> dict:
        m = self.state
        return {
            "object": m.object,
            "holder": m.holder,
            "depth": m.depth,
            "ceiling": m.ceiling,
            "entry_queue": [{"level": lv, "threads": list(seq)}
                            for lv, seq in reversed(m.entry_queue.levels)],
            "wait_set": [{"level": lv, "threads": list(seq)}
                         for lv, seq in reversed(m.wait_set.levels)],
            "diverged": self.diverged,
        }

    # -- native part protocol --

    def initiated(self, ctx):
        if self.diverged:
            return []
        return [self.pending[0]] if self.pending else []

    def taus(self, ctx, config):
        if self.diverged or self.pending or not config.spurious_wakeups:
            return []
        out = []
        for tid in self.state.wait_set.threads():
            m = _wake(self.state, tid)
            nxt = replace(self, state=m)
            if m.holder is None:
                m2, granted = _grant_next(m)
                if granted is not None:
                    via_wait = m.saved(granted) is not None
                    nxt = replace(self, state=m2)._granted(granted, via_wait=via_wait)
            out.append(nxt)
        return out

    def apply(self, ev: Event, ctx):
        if self.diverged:
            return None
        oid = self.state.object
        if self.pending:
            if ev != self.pending[0]:
                return None
            nxt = replace(self, pending=self.pending[1:],
                          diverged=self.throw_next and len(self.pending) == 1)
            return [nxt]
        chan = ev.channel
        if chan not in _MONITOR_CHANNELS:
            return None
        if len(ev.values) != 3 or ev.values[0] != oid:
            return None
        tid, src = ev.values[1], ev.values[2]
        thread = ctx.thread(tid)
        if thread is None:
            return None
        if chan == "startSyncMeth":
            return self._on_start(thread, src)
        if chan == "endSyncMeth":
            return self._on_end(tid, src)
        if chan == "waitCall":
            return self._on_wait(thread, src)
        if chan == "notify":
            return self._on_notify(tid, src, all_waiters=False)
        if chan == "notifyAll":
            return self._on_notify(tid, src, all_waiters=True)
        return None

    def _throw(self, kind: str):
        ev = Event("throw", (kind, self.state.object))
        return [replace(self, pending=(ev,), throw_next=True)]

    def _granted(self, tid: str, via_wait: bool = False):
        """Queue the reply event for a thread that just obtained the lock."""
        src = self._client_of(tid, waiting=via_wait)
        chan = "waitRet" if via_wait else "lockAcquired"
        ev = Event(chan, (self.state.object, tid, src))
        clients = self._set_client(tid, None, waiting=False)
        waitc = self._set_client(tid, None, waiting=True) if via_wait else self.wait_clients
        return replace(self, pending=self.pending + (ev,),
                       clients=clients, wait_clients=waitc)

    def _on_start(self, thread: ThreadState, src: str):
        m = self.state
        if m.entry_queue.contains(thread.id) or m.wait_set.contains(thread.id):
            return None  # thread is mid-protocol elsewhere; cannot start again
        m2, outcome = try_acquire(m, thread)
        if outcome == ACQUIRED:
            nxt = replace(self, state=m2, clients=self._set_client(thread.id, src, False))
            return [nxt._granted(thread.id)]
        if outcome == QUEUED:
            return [replace(self, state=m2,
                            clients=self._set_client(thread.id, src, False))]
        return self._throw(outcome[1])

    def _on_end(self, tid: str, src: str):
        m = self.state
        if m.holder != tid:
            return None  # compiled code is balanced; an unmatched end blocks
        m2, handover = release_once(m, tid)
        if isinstance(handover, tuple):
            return self._throw(handover[1])
        nxt = replace(self, state=m2)
        if handover is not None:
            via_wait = m.saved(handover) is not None
            nxt = nxt._granted(handover, via_wait=via_wait)
        return [nxt]

    def _on_wait(self, thread: ThreadState, src: str):
        m = self.state
        m2, handover = monitor_wait(m, thread)
        if isinstance(handover, tuple):
            return self._throw(handover[1])
        nxt = replace(self, state=m2,
                      wait_clients=self._set_client(thread.id, src, True),
                      clients=self._set_client(thread.id, None, False))
        if handover is not None:
            via_wait = m.saved(handover) is not None
            nxt = nxt._granted(handover, via_wait=via_wait)
        return [nxt]

    def _on_notify(self, tid: str, src: str, all_waiters: bool):
        m = self.state
        if all_waiters:
            m2, resumed = monitor_notify_all(m, tid)
            if isinstance(resumed, tuple) and resumed and resumed[0] == "error":
                return self._throw(resumed[1])
        else:
            m2, resumed = monitor_notify(m, tid)
            if isinstance(resumed, tuple):
                return self._throw(resumed[1])
        return [replace(self, state=m2)]


_MONITOR_CHANNELS = frozenset(
    ["startSyncMeth", "lockAcquired", "endSyncMeth", "waitCall", "waitRet",
     "notify", "notifyAll"])


# ---------------------------------------------------------------------------
# Native thread registry component
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThreadPart:
    """Holds one thread's priority and interrupted status."""

    state: ThreadState
    diverged: bool = False
    is_thread = True

    def canon(self):
        return self.state

    def summary(self) -> dict:
        return {"thread": self.state.id, "priority": self.state.priority,
                "interrupted": self.state.interrupted}

    def initiated(self, ctx):
        return []

    def taus(self, ctx, config):
        return []

    def apply(self, ev: Event, ctx):
        if ev.channel == "interruptSelf" and ev.values == (self.state.id,):
            return [replace(self, state=replace(self.state, interrupted=True))]
        return None


# ---------------------------------------------------------------------------
# Component builders
# ---------------------------------------------------------------------------

def object_fw(oid: str, ceiling: int) -> Component:
    """Lock-controller component for one object used as a lock."""
    part = MonitorPart(state=MonitorState(object=oid, ceiling=ceiling))
    alphabet = tuple(alpha(chan, oid, None, None) for chan in sorted(_MONITOR_CHANNELS))
    alphabet += (alpha("throw", None, oid),)
    return Component(id="ObjectFW:" + oid, native=part, alphabet=alphabet)


def thread_fw(tid: str, priority: int) -> Component:
    part = ThreadPart(state=ThreadState(id=tid, priority=priority))
    return Component(id="ThreadFW:" + tid, native=part,
                     alphabet=(alpha("interruptSelf", tid),))
