"""Joint transitions of a composition: multiway synchronisation, tock time,
tau interleaving, and "native" parts (monitors and thread registries).

A native part is any frozen object implementing:

    diverged : bool
    canon()            -> hashable, deterministic canonical form
    initiated(ctx)     -> list[Event]   events it is urgently offering
    apply(event, ctx)  -> list[native'] | None   (None = currently refused)
    taus(ctx, config)  -> list[native']
    summary()          -> dict          for reports and the animator

Determinism contract: for a given state the returned transition list is a
pure function of the state, sorted by canonical event order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

from .kernel import (
    CHAOS, SKIP, TAU_LABEL, TICK_CHANNEL, ChaosT, Component, Composition,
    Event, SkipT, Store, WellFormednessFault, WILD, reduce_term,
    term_offers, term_str,
)

END_CHANNEL = "end_of_program"


@dataclass(frozen=True)
class SystemConfig:
    max_progress: bool = True
    spurious_wakeups: bool = False
    priority_scheduling: bool = False


class SystemState:
    """Canonical snapshot: one slot per component (kernel slots hold a
    reduced (term, store) pair, native slots the native runtime), plus the
    end-of-program flag."""

    __slots__ = ("parts", "ended", "_hash")

    def __init__(self, parts: tuple, ended: bool):
        self.parts = parts
        self.ended = ended
        self._hash = hash((parts, ended))

    def __eq__(self, other):
        return (isinstance(other, SystemState) and self._hash == other._hash
                and self.ended == other.ended and self.parts == other.parts)

    def __hash__(self):
        return self._hash

    def replace(self, updates: dict, ended: Optional[bool] = None) -> "SystemState":
        parts = tuple(updates.get(i, p) for i, p in enumerate(self.parts))
        return SystemState(parts, self.ended if ended is None else ended)


class _Ctx:
    """Per-state view natives use to read thread priorities/flags."""

    __slots__ = ("_threads",)

    def __init__(self, threads: dict):
        self._threads = threads

    def thread(self, tid: str):
        return self._threads.get(tid)

    def thread_ids(self):
        return sorted(self._threads)


class SystemContext:
    """Composition plus step caches.  All step functions are pure; the
    caches are keyed on immutable values only, so shared use from several
    workers is safe."""

    def __init__(self, comp: Composition, config: SystemConfig = SystemConfig()):
        self.composition = comp
        self.config = config
        self.channels = comp.channel_table()
        self.intrange = comp.intrange
        self._offers_cache: dict = {}
        self._canon_cache: dict = {}
        # static: channel -> indices of components whose alphabet mentions it
        self._chan_parts: dict = {}
        for i, c in enumerate(comp.components):
            for chan in c.channels():
                self._chan_parts.setdefault(chan, []).append(i)
        self._thread_slots = [i for i, c in enumerate(comp.components)
                              if c.native is not None and getattr(c.native, "is_thread", False)]

    # -- state construction -------------------------------------------------

    def initial_state(self) -> SystemState:
        parts = []
        for c in self.composition.components:
            if c.native is not None:
                parts.append(c.native)
            else:
                parts.append(self._canon_pair(c.term, c.store))
        return SystemState(tuple(parts), False)

    def _canon_pair(self, term, store):
        key = (term, store)
        hit = self._canon_cache.get(key)
        if hit is None:
            hit = reduce_term(term, store, self.intrange)
            self._canon_cache[key] = hit
        return hit

    def _part_offers(self, idx: int, part) -> tuple:
        key = (idx, part)
        hit = self._offers_cache.get(key)
        if hit is None:
            term, store = part
            hit = term_offers(term, store, self.channels, self.intrange)
            self._offers_cache[key] = hit
        return hit

    def _ctx(self, state: SystemState) -> _Ctx:
        threads = {}
        for i in self._thread_slots:
            t = state.parts[i]
            threads[t.state.id] = t.state
        return _Ctx(threads)

    # -- state predicates ----------------------------------------------------

    def is_divergent(self, state: SystemState) -> bool:
        for i, c in enumerate(self.composition.components):
            p = state.parts[i]
            if c.native is not None:
                if p.diverged:
                    return True
            elif isinstance(p[0], ChaosT):
                return True
        return False

    def is_terminated(self, state: SystemState) -> bool:
        return state.ended

    # -- stepping ------------------------------------------------------------

    def steps(self, state: SystemState) -> list:
        """All joint transitions: list of (label, successor), label an Event
        or None for a tau.  Terminated and divergent states are absorbing."""
        if state.ended or self.is_divergent(state):
            return []
        comps = self.composition.components
        ctx = self._ctx(state)

        kernel_offers = {}
        for i, c in enumerate(comps):
            if c.native is None:
                kernel_offers[i] = self._part_offers(i, state.parts[i])

        out = []
        # tau steps: local assignments plus native internal moves
        for i, offs in kernel_offers.items():
            for o in offs:
                if o.label == TAU_LABEL:
                    nxt = state.replace({i: self._canon_pair(o.cont, o.store)})
                    out.append((None, nxt, self._comp_priority(i)))
        for i, c in enumerate(comps):
            if c.native is not None:
                for nat in state.parts[i].taus(ctx, self.config):
                    out.append((None, state.replace({i: nat}), None))

        events = self._event_steps(state, ctx, comps, kernel_offers)
        out.extend(events)

        ticks = self._tick_steps(state, comps, kernel_offers)
        if self.config.max_progress and (len(out) > 0):
            ticks = []
        out.extend(ticks)

        if self.config.priority_scheduling:
            out = self._priority_filter(out)

        # deterministic order: taus first (by successor hash), then events
        def key(tr):
            lab = tr[0]
            return (0, "", ()) if lab is None else (1,) + lab.key()
        out.sort(key=key)
        return [(lab, st) for lab, st, _ in out]

    def _comp_priority(self, idx: int):
        return self.composition.components[idx].priority

    def _priority_filter(self, trans: list) -> list:
        pris = [p for _, _, p in trans if p is not None]
        if not pris:
            return trans
        top = max(pris)
        return [t for t in trans if t[2] is None or t[2] >= top]

    def _event_steps(self, state, ctx, comps, kernel_offers) -> list:
        # group visible kernel offers by channel
        by_chan: dict = {}
        for i, offs in kernel_offers.items():
            for o in offs:
                if o.label in (TAU_LABEL, TICK_CHANNEL):
                    continue
                by_chan.setdefault(o.label, {}).setdefault(i, []).append(o)
        initiated: dict = {}
        for i, c in enumerate(comps):
            if c.native is not None:
                for ev in state.parts[i].initiated(ctx):
                    initiated.setdefault(ev.channel, set()).add(ev)

        out = []
        channels = set(by_chan) | set(initiated)
        for chan in sorted(channels):
            offers_here = by_chan.get(chan, {})
            # Candidate events come from fully determined offers and from
            # pairwise unification of partially symbolic ones (an input slot
            # takes its value from a matching partner's output slot).  Blind
            # domain enumeration is never used: a solitary input offer has no
            # partner to agree with and therefore fires nothing, which is
            # what keeps one-sided handshake offers from acting alone.
            candidates = set(initiated.get(chan, ()))
            sym = [o for i in sorted(offers_here) for o in offers_here[i]]
            for a, oa in enumerate(sym):
                if WILD not in oa.pattern:
                    candidates.add(Event(chan, oa.pattern))
                    continue
                for b, ob in enumerate(sym):
                    if a == b:
                        continue
                    vals = _unify(oa.pattern, ob.pattern)
                    if vals is not None and WILD not in vals:
                        candidates.add(Event(chan, vals))
                for ev in initiated.get(chan, ()):
                    if oa.matches(ev.values):
                        candidates.add(ev)
            if not candidates:
                continue
            participants = self._chan_parts.get(chan, [])
            for ev in sorted(candidates, key=lambda e: e.key()):
                self._fire_event(state, ctx, comps, offers_here, participants, ev, out)
        return out

    def _fire_event(self, state, ctx, comps, offers_here, participants, ev, out) -> None:
        involved = [i for i in participants if comps[i].matches(ev)]
        if not involved:
            raise WellFormednessFault(
                "event %s offered outside every alphabet" % ev)
        options = []  # per involved component: list of replacement parts
        prio = None
        for i in involved:
            c = comps[i]
            if c.native is not None:
                nats = state.parts[i].apply(ev, ctx)
                if not nats:
                    return
                options.append([(i, n) for n in nats])
            else:
                slots = []
                for o in offers_here.get(i, ()):
                    if o.matches(ev.values):
                        cont, st = o.fire(ev.values)
                        slots.append((i, self._canon_pair(cont, st)))
                if not slots:
                    return
                options.append(sorted(set(slots), key=_slot_key))
            if c.priority is not None:
                prio = c.priority if prio is None else max(prio, c.priority)
        ended = ev.channel == END_CHANNEL
        for combo in itertools.product(*options):
            nxt = state.replace(dict(combo), ended=state.ended or ended)
            out.append((ev, nxt, prio))

    def _tick_steps(self, state, comps, kernel_offers) -> list:
        timed_opts = []
        any_timed = False
        for i, c in enumerate(comps):
            if c.native is not None or not c.timed:
                continue
            term, _ = state.parts[i]
            if isinstance(term, SkipT):
                continue  # a terminated component no longer constrains time
            any_timed = True
            opts = []
            for o in kernel_offers[i]:
                if o.label == TICK_CHANNEL:
                    opts.append((i, self._canon_pair(o.cont, o.store)))
            # A timed component with no explicit tick offer is patient: it is
            # blocked on synchronisation and lets time pass unchanged.
            if opts:
                timed_opts.append(opts)
        if not any_timed:
            return []
        out = []
        for combo in itertools.product(*timed_opts):
            out.append((Event(TICK_CHANNEL, ()), state.replace(dict(combo)), None))
        return out

    # -- canonical fingerprints and summaries ---------------------------------

    def fingerprint(self, state: SystemState) -> str:
        import hashlib
        h = hashlib.sha256()
        h.update(b"1" if state.ended else b"0")
        for i, c in enumerate(self.composition.components):
            p = state.parts[i]
            if c.native is not None:
                h.update(repr(p.canon()).encode())
            else:
                h.update(_term_fingerprint(p[0]).encode())
                h.update(repr(p[1].items()).encode())
            h.update(b"|")
        return h.hexdigest()

    def summary(self, state: SystemState) -> dict:
        """Final-state summary: per-component position, stores, monitors."""
        components = []
        monitors = []
        threads = []
        for i, c in enumerate(self.composition.components):
            p = state.parts[i]
            if c.native is not None:
                s = p.summary()
                if getattr(p, "is_thread", False):
                    threads.append(s)
                else:
                    monitors.append(s)
            else:
                components.append({
                    "id": c.id,
                    "position": term_str(p[0]),
                    "store": {k: v for k, v in p[1].items()},
                })
        return {"components": components, "monitors": monitors,
                "threads": threads, "ended": state.ended,
                "divergent": self.is_divergent(state)}


def _slot_key(slot):
    _, (term, store) = slot
    return (_term_fingerprint(term), store.items())


def _unify(p, q):
    """Combine two offer patterns slot by slot; None on a concrete clash."""
    vals = []
    for a, b in zip(p, q):
        if a is WILD:
            vals.append(b)
        elif b is WILD or a == b:
            vals.append(a)
        else:
            return None
    return tuple(vals)


_term_fp_cache: dict = {}


def _term_fingerprint(term) -> str:
    hit = _term_fp_cache.get(term)
    if hit is None:
        hit = _term_fp(term)
        _term_fp_cache[term] = hit
    return hit


def _term_fp(term) -> str:
    from . import kernel as k
    if isinstance(term, k.SkipT):
        return "S"
    if isinstance(term, k.ChaosT):
        return "C"
    if isinstance(term, k.StopT):
        return "0"
    if isinstance(term, k.PrefixT):
        return "P(%s,%s,%s)" % (term.channel, _fields_fp(term.fields),
                               _term_fingerprint(term.cont))
    if isinstance(term, k.GuardT):
        return "G(%r,%s)" % (term.cond, _term_fingerprint(term.body))
    if isinstance(term, k.SeqT):
        return ";(%s,%s)" % (_term_fingerprint(term.first), _term_fingerprint(term.second))
    if isinstance(term, k.ExtChoiceT):
        return "+(%s,%s)" % (_term_fingerprint(term.left), _term_fingerprint(term.right))
    if isinstance(term, k.InterruptT):
        return "I(%s,%s,%s,%s)" % (_term_fingerprint(term.body), term.channel,
                                   _fields_fp(term.fields), _term_fingerprint(term.handler))
    if isinstance(term, k.RecursionT):
        return "M(%s,%s)" % (term.name, _term_fingerprint(term.body))
    if isinstance(term, k.RecVarT):
        return "X(%s)" % term.name
    if isinstance(term, k.WaitT):
        return "W(%d)" % term.ticks
    if isinstance(term, k.AssignT):
        return "A(%s,%r,%s)" % (term.var, term.expr, _term_fingerprint(term.cont))
    if isinstance(term, k.VarBlockT):
        return "V(%r,%s)" % (term.decls, _term_fingerprint(term.body))
    return repr(term)


def _fields_fp(fields) -> str:
    from . import kernel as k
    parts = []
    for f in fields:
        if isinstance(f, k.In):
            parts.append("?" + f.name)
        else:
            parts.append("!%r" % (f.expr,))
    return ".".join(parts)
