"""Operational semantics for the behaviour expressions that make up a model.

Everything here is a value: terms, stores, events and transitions are
immutable, and the step functions are pure.  A `Component` bundles a term
with its local store and a synchronisation alphabet; `SystemContext` knows
how to compose components (including "native" parts such as lock monitors)
into joint transitions with multiway synchronisation and tock-style time.

Time is discrete: the reserved channel name ``tick`` denotes the global
clock event.  A tick is enabled for the composition only when every live
timed component offers it.  Within a single term, tick behaves like an
ordinary event (in particular it resolves a choice); the terms built by
the framework and compiler always re-offer their choices after an idle
tick, so this simplification is observationally harmless.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

TICK_CHANNEL = "tick"

# recursion-unfold budget before we declare a term ill-formed (e.g. mu X.X)
_MAX_UNFOLDS = 256


class ModelRangeFault(Exception):
    """An evaluated value fell outside the configured finite domain."""


class WellFormednessFault(Exception):
    """A term referenced an unbound variable or unbound recursion name."""


# ---------------------------------------------------------------------------
# Values and domains
# ---------------------------------------------------------------------------

Value = Union[int, bool, str, None]  # identifiers are plain strings


def value_key(v: Value):
    """Total order over values, used for canonical event ordering."""
    if v is None:
        return (0, "")
    if isinstance(v, bool):
        return (1, "1" if v else "0")
    if isinstance(v, int):
        return (2, "%020d" % v)
    return (3, v)


def render_value(v: Value) -> str:
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def parse_value(text: str) -> Value:
    if text == "null":
        return None
    if text == "true":
        return True
    if text == "false":
        return False
    try:
        return int(text)
    except ValueError:
        return text


@dataclass(frozen=True)
class Domain:
    """A finite value domain for one event field."""

    kind: str  # "int" | "bool" | "ids" | "any"
    lo: int = 0
    hi: int = 0
    ids: frozenset = frozenset()

    def contains(self, v: Value) -> bool:
        if self.kind == "int":
            return isinstance(v, int) and not isinstance(v, bool) and self.lo <= v <= self.hi
        if self.kind == "bool":
            return isinstance(v, bool)
        if self.kind == "ids":
            return isinstance(v, str) and v in self.ids
        # "any": bounded ints, bools, the id universe and null
        if v is None or isinstance(v, bool):
            return True
        if isinstance(v, int):
            return self.lo <= v <= self.hi
        return isinstance(v, str) and v in self.ids

    def members(self) -> list:
        if self.kind == "int":
            return list(range(self.lo, self.hi + 1))
        if self.kind == "bool":
            return [False, True]
        if self.kind == "ids":
            return sorted(self.ids)
        out: list = [None, False, True]
        out.extend(range(self.lo, self.hi + 1))
        out.extend(sorted(self.ids))
        return out


def int_domain(lo: int, hi: int) -> Domain:
    return Domain("int", lo=lo, hi=hi)


def bool_domain() -> Domain:
    return Domain("bool")


def id_domain(ids: Iterable[str], nullable: bool = False) -> Domain:
    s = set(ids)
    if nullable:
        # null is modelled by the "any" kind restricted to the id set
        return Domain("any", lo=1, hi=0, ids=frozenset(s))
    return Domain("ids", ids=frozenset(s))


def any_domain(lo: int, hi: int, ids: Iterable[str]) -> Domain:
    return Domain("any", lo=lo, hi=hi, ids=frozenset(ids))


@dataclass(frozen=True)
class ChannelDecl:
    name: str
    domains: tuple  # tuple[Domain, ...]

    @property
    def arity(self) -> int:
        return len(self.domains)


# ---------------------------------------------------------------------------
# Events
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Event:
    channel: str
    values: tuple = ()

    def key(self):
        return (self.channel, tuple(value_key(v) for v in self.values))

    def __str__(self) -> str:
        return "%s(%s)" % (self.channel, ",".join(render_value(v) for v in self.values))


TICK = Event(TICK_CHANNEL, ())


def parse_event(text: str) -> Event:
    text = text.strip()
    if "(" not in text or not text.endswith(")"):
        raise ValueError("bad event string: %r" % text)
    chan, _, rest = text.partition("(")
    body = rest[:-1].strip()
    if not body:
        return Event(chan.strip(), ())
    values = tuple(parse_value(p.strip()) for p in body.split(","))
    return Event(chan.strip(), values)


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Lit:
    value: Value


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Un:
    op: str  # "not" | "neg"
    arg: object


@dataclass(frozen=True)
class Bin:
    op: str
    left: object
    right: object


Expr = Union[Lit, Var, Un, Bin]

_CMP = {
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}
_ARITH = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
}


def eval_expr(expr: Expr, store: "Store", intrange: tuple) -> Value:
    """Evaluate over bounded integers; out-of-range results are a fault."""
    if isinstance(expr, Lit):
        return expr.value
    if isinstance(expr, Var):
        if not store.has(expr.name):
            raise WellFormednessFault("unbound variable %r" % expr.name)
        return store.get(expr.name)
    if isinstance(expr, Un):
        v = eval_expr(expr.arg, store, intrange)
        if expr.op == "not":
            return not v
        if expr.op == "neg":
            return _check_range(-v, intrange)
        raise WellFormednessFault("unknown unary op %r" % expr.op)
    if isinstance(expr, Bin):
        if expr.op == "and":
            return bool(eval_expr(expr.left, store, intrange)) and bool(
                eval_expr(expr.right, store, intrange))
        if expr.op == "or":
            return bool(eval_expr(expr.left, store, intrange)) or bool(
                eval_expr(expr.right, store, intrange))
        a = eval_expr(expr.left, store, intrange)
        b = eval_expr(expr.right, store, intrange)
        if expr.op in _CMP:
            return _CMP[expr.op](a, b)
        if expr.op in _ARITH:
            return _check_range(_ARITH[expr.op](a, b), intrange)
        raise WellFormednessFault("unknown binary op %r" % expr.op)
    raise WellFormednessFault("bad expression node %r" % (expr,))


def _check_range(v: int, intrange: tuple) -> int:
    lo, hi = intrange
    if not (lo <= v <= hi):
        raise ModelRangeFault("integer %d outside configured range %d..%d" % (v, lo, hi))
    return v


# ---------------------------------------------------------------------------
# Stores
# ---------------------------------------------------------------------------

class Store:
    """Immutable variable valuation with a cached canonical form."""

    __slots__ = ("_map", "_items", "_hash")

    def __init__(self, mapping=None):
        self._map = dict(mapping) if mapping else {}
        self._items = tuple(sorted(self._map.items()))
        self._hash = hash(self._items)

    def has(self, name: str) -> bool:
        return name in self._map

    def get(self, name: str) -> Value:
        return self._map[name]

    def set(self, name: str, value: Value) -> "Store":
        m = dict(self._map)
        m[name] = value
        return Store(m)

    def set_many(self, pairs) -> "Store":
        m = dict(self._map)
        m.update(pairs)
        return Store(m)

    def items(self):
        return self._items

    def __eq__(self, other):
        return isinstance(other, Store) and self._items == other._items

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return "Store(%s)" % (dict(self._items),)


EMPTY_STORE = Store()


# ---------------------------------------------------------------------------
# Terms (hash-consed: build through the lowercase factories)
# ---------------------------------------------------------------------------

class Term:
    __slots__ = ()


_intern: dict = {}


def _mk(cls, *args):
    key = (cls, args)
    t = _intern.get(key)
    if t is None:
        t = cls(*args)
        _intern[key] = t
    return t


@dataclass(frozen=True, eq=False)
class SkipT(Term):
    pass


@dataclass(frozen=True, eq=False)
class ChaosT(Term):
    pass


@dataclass(frozen=True, eq=False)
class StopT(Term):
    """Internal: offers nothing and never terminates (a failed guard)."""


@dataclass(frozen=True, eq=False)
class Out:
    expr: object


@dataclass(frozen=True, eq=False)
class In:
    name: str


@dataclass(frozen=True, eq=False)
class PrefixT(Term):
    channel: str
    fields: tuple  # of Out | In
    cont: Term


@dataclass(frozen=True, eq=False)
class GuardT(Term):
    cond: object
    body: Term


@dataclass(frozen=True, eq=False)
class SeqT(Term):
    first: Term
    second: Term


@dataclass(frozen=True, eq=False)
class ExtChoiceT(Term):
    left: Term
    right: Term


@dataclass(frozen=True, eq=False)
class InterruptT(Term):
    body: Term
    channel: str
    fields: tuple
    handler: Term


@dataclass(frozen=True, eq=False)
class RecursionT(Term):
    name: str
    body: Term


@dataclass(frozen=True, eq=False)
class RecVarT(Term):
    name: str


@dataclass(frozen=True, eq=False)
class WaitT(Term):
    ticks: int


@dataclass(frozen=True, eq=False)
class AssignT(Term):
    var: str
    expr: object
    cont: Term


@dataclass(frozen=True, eq=False)
class VarBlockT(Term):
    decls: tuple  # of (name, init-expr)
    body: Term


SKIP = _mk(SkipT)
CHAOS = _mk(ChaosT)
STOP = _mk(StopT)


def skip() -> Term:
    return SKIP


def chaos() -> Term:
    return CHAOS


def stop() -> Term:
    return STOP


def out(expr) -> Out:
    if not isinstance(expr, (Lit, Var, Un, Bin)):
        expr = Lit(expr)
    return _mk(Out, expr)


def inp(name: str) -> In:
    return _mk(In, name)


def prefix(channel: str, fields, cont: Term) -> Term:
    return _mk(PrefixT, channel, tuple(fields), cont)


def guard(cond, body: Term) -> Term:
    return _mk(GuardT, cond, body)


def seq(first: Term, second: Term) -> Term:
    return _mk(SeqT, first, second)


def seqs(*terms: Term) -> Term:
    t = terms[-1]
    for a in reversed(terms[:-1]):
        t = seq(a, t)
    return t


def extchoice(left: Term, right: Term) -> Term:
    return _mk(ExtChoiceT, left, right)


def choice(*branches: Term) -> Term:
    t = branches[0]
    for b in branches[1:]:
        t = extchoice(t, b)
    return t


def interrupt(body: Term, channel: str, fields=(), handler: Term = SKIP) -> Term:
    return _mk(InterruptT, body, channel, tuple(fields), handler)


def rec(name: str, body: Term) -> Term:
    return _mk(RecursionT, name, body)


def recvar(name: str) -> Term:
    return _mk(RecVarT, name)


def wait(ticks: int) -> Term:
    return _mk(WaitT, ticks)


def assign(var: str, expr, cont: Term) -> Term:
    if not isinstance(expr, (Lit, Var, Un, Bin)):
        expr = Lit(expr)
    return _mk(AssignT, var, expr, cont)


def varblock(decls, body: Term) -> Term:
    canon = tuple((n, e if isinstance(e, (Lit, Var, Un, Bin)) else Lit(e)) for n, e in decls)
    return _mk(VarBlockT, canon, body)


def ite(cond, then: Term, els: Term = SKIP) -> Term:
    """If/else realised as a choice of exclusive guards."""
    return extchoice(guard(cond, then), guard(Un("not", cond), els))


_subst_cache: dict = {}


def subst(term: Term, name: str, repl: Term) -> Term:
    key = (term, name, repl)
    hit = _subst_cache.get(key)
    if hit is not None:
        return hit
    r = _subst_uncached(term, name, repl)
    _subst_cache[key] = r
    return r


def _subst_uncached(term: Term, name: str, repl: Term) -> Term:
    if isinstance(term, RecVarT):
        return repl if term.name == name else term
    if isinstance(term, (SkipT, ChaosT, StopT, WaitT)):
        return term
    if isinstance(term, PrefixT):
        return _mk(PrefixT, term.channel, term.fields, subst(term.cont, name, repl))
    if isinstance(term, GuardT):
        return _mk(GuardT, term.cond, subst(term.body, name, repl))
    if isinstance(term, SeqT):
        return _mk(SeqT, subst(term.first, name, repl), subst(term.second, name, repl))
    if isinstance(term, ExtChoiceT):
        return _mk(ExtChoiceT, subst(term.left, name, repl), subst(term.right, name, repl))
    if isinstance(term, InterruptT):
        return _mk(InterruptT, subst(term.body, name, repl), term.channel, term.fields,
                   subst(term.handler, name, repl))
    if isinstance(term, RecursionT):
        if term.name == name:  # shadowed
            return term
        return _mk(RecursionT, term.name, subst(term.body, name, repl))
    if isinstance(term, AssignT):
        return _mk(AssignT, term.var, term.expr, subst(term.cont, name, repl))
    if isinstance(term, VarBlockT):
        return _mk(VarBlockT, term.decls, subst(term.body, name, repl))
    raise WellFormednessFault("bad term %r" % (term,))


# ---------------------------------------------------------------------------
# Reduction (structural normal form under Seq-unit / recursion unfolding)
# ---------------------------------------------------------------------------

def reduce_term(term: Term, store: Store, intrange: tuple):
    """Normalise ``(term, store)``: Seq/choice units, guard evaluation,
    recursion unfolding, variable-block entry.  Pure and deterministic."""
    unfolds = 0
    while True:
        if isinstance(term, SeqT):
            first, store = reduce_term(term.first, store, intrange)
            if isinstance(first, SkipT):
                term = term.second
                continue
            if isinstance(first, (ChaosT, StopT)):
                term = first
                continue
            term = _mk(SeqT, first, term.second)
            return term, store
        if isinstance(term, WaitT):
            if term.ticks <= 0:
                term = SKIP
                continue
            return term, store
        if isinstance(term, GuardT):
            if eval_expr(term.cond, store, intrange):
                term = term.body
                continue
            return STOP, store
        if isinstance(term, ExtChoiceT):
            left, store = reduce_term(term.left, store, intrange)
            right, store = reduce_term(term.right, store, intrange)
            if isinstance(left, StopT):
                term = right
                continue
            if isinstance(right, StopT):
                term = left
                continue
            if isinstance(left, ChaosT) or isinstance(right, ChaosT):
                term = CHAOS
                continue
            return _mk(ExtChoiceT, left, right), store
        if isinstance(term, InterruptT):
            body, store = reduce_term(term.body, store, intrange)
            if isinstance(body, (SkipT, ChaosT)):
                term = body
                continue
            term = _mk(InterruptT, body, term.channel, term.fields, term.handler)
            return term, store
        if isinstance(term, RecursionT):
            unfolds += 1
            if unfolds > _MAX_UNFOLDS:
                raise WellFormednessFault("unguarded recursion %r" % term.name)
            term = subst(term.body, term.name, term)
            continue
        if isinstance(term, VarBlockT):
            pairs = [(n, eval_expr(e, store, intrange)) for n, e in term.decls]
            store = store.set_many(pairs)
            term = term.body
            continue
        if isinstance(term, RecVarT):
            raise WellFormednessFault("unbound recursion variable %r" % term.name)
        return term, store


# ---------------------------------------------------------------------------
# Offers: possibly-symbolic transitions of one term
# ---------------------------------------------------------------------------

WILD = object()  # wildcard slot in a symbolic offer


@dataclass(frozen=True)
class Offer:
    """One (possibly input-symbolic) transition of a term.

    ``pattern`` has one entry per event field: a concrete value or WILD.
    ``binders`` maps field index -> variable name for WILD slots.
    ``label`` is the channel name, "" for a tau (assignment) step.
    """
    label: str
    pattern: tuple
    binders: tuple  # of (index, varname)
    cont: Term
    store: Store

    def matches(self, values: tuple) -> bool:
        if len(values) != len(self.pattern):
            return False
        for p, v in zip(self.pattern, values):
            if p is not WILD and p != v:
                return False
        return True

    def fire(self, values: tuple):
        """Return (cont, store') after binding input fields to ``values``."""
        if self.binders:
            return self.cont, self.store.set_many(
                (name, values[i]) for i, name in self.binders)
        return self.cont, self.store


TAU_LABEL = ""


def term_offers(term: Term, store: Store, channels: dict, intrange: tuple) -> tuple:
    """Offers of a reduced (term, store).  Callers must reduce first."""
    if isinstance(term, (SkipT, ChaosT, StopT)):
        return ()
    if isinstance(term, PrefixT):
        return (_prefix_offer(term.channel, term.fields, term.cont, store, channels, intrange),)
    if isinstance(term, WaitT):
        nxt = wait(term.ticks - 1)
        return (Offer(TICK_CHANNEL, (), (), nxt, store),)
    if isinstance(term, AssignT):
        val = eval_expr(term.expr, store, intrange)
        _check_store_value(val, intrange)
        return (Offer(TAU_LABEL, (), (), term.cont, store.set(term.var, val)),)
    if isinstance(term, SeqT):
        first, st = reduce_term(term.first, store, intrange)
        outs = []
        for o in term_offers(first, st, channels, intrange):
            outs.append(Offer(o.label, o.pattern, o.binders, _mk(SeqT, o.cont, term.second),
                              o.store))
        return tuple(outs)
    if isinstance(term, ExtChoiceT):
        outs = []
        for side, other, left_side in ((term.left, term.right, True),
                                       (term.right, term.left, False)):
            t, st = reduce_term(side, store, intrange)
            for o in term_offers(t, st, channels, intrange):
                if o.label == TAU_LABEL:
                    # internal progress does not resolve the choice
                    nt = _mk(ExtChoiceT, o.cont, other) if left_side \
                        else _mk(ExtChoiceT, other, o.cont)
                    outs.append(Offer(TAU_LABEL, (), (), nt, o.store))
                else:
                    outs.append(o)
        return tuple(outs)
    if isinstance(term, InterruptT):
        outs = []
        for o in term_offers(term.body, store, channels, intrange):
            nt = _mk(InterruptT, o.cont, term.channel, term.fields, term.handler)
            outs.append(Offer(o.label, o.pattern, o.binders, nt, o.store))
        outs.append(_prefix_offer(term.channel, term.fields, term.handler, store,
                                  channels, intrange))
        return tuple(outs)
    raise WellFormednessFault("cannot step unreduced term %r" % (term,))


def _prefix_offer(channel: str, fields: tuple, cont: Term, store: Store,
                  channels: dict, intrange: tuple) -> Offer:
    decl = channels.get(channel)
    if decl is None:
        raise WellFormednessFault("undeclared channel %r" % channel)
    if decl.arity != len(fields):
        raise WellFormednessFault("channel %r arity %d used with %d fields"
                                  % (channel, decl.arity, len(fields)))
    pattern = []
    binders = []
    for i, f in enumerate(fields):
        if isinstance(f, Out):
            v = eval_expr(f.expr, store, intrange)
            if not decl.domains[i].contains(v):
                raise ModelRangeFault(
                    "value %r outside domain of %s field %d" % (v, channel, i))
            pattern.append(v)
        else:
            pattern.append(WILD)
            binders.append((i, f.name))
    return Offer(channel, tuple(pattern), tuple(binders), cont, store)


def _check_store_value(v: Value, intrange: tuple) -> None:
    if isinstance(v, int) and not isinstance(v, bool):
        _check_range(v, intrange)


def expand_offer(offer: Offer, channels: dict) -> list:
    """Enumerate the concrete events of a (possibly symbolic) offer."""
    if offer.label == TAU_LABEL:
        return []
    decl = channels[offer.label]
    slots = []
    for i, p in enumerate(offer.pattern):
        slots.append(decl.domains[i].members() if p is WILD else [p])
    return [Event(offer.label, vals) for vals in itertools.product(*slots)]


# ---------------------------------------------------------------------------
# Components and compositions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Component:
    """A named behaviour with its own store and synchronisation alphabet.

    ``alphabet`` is a tuple of ``(channel, filters)`` patterns; a filter is a
    tuple with one entry per field, each a concrete value or None (any).  A
    component participates in exactly the events its alphabet matches.
    ``native`` components (monitors, thread registries) bypass the term
    semantics; see scjcheck.sync.
    """
    id: str
    term: Term = SKIP
    store: Store = EMPTY_STORE
    alphabet: tuple = ()
    timed: bool = False
    native: object = None
    priority: Optional[int] = None

    def matches(self, event: Event) -> bool:
        for chan, filters in self.alphabet:
            if chan != event.channel:
                continue
            if filters is None:
                return True
            ok = True
            for f, v in zip(filters, event.values):
                if f is not None and f != v:
                    ok = False
                    break
            if ok:
                return True
        return False

    def channels(self) -> set:
        return {chan for chan, _ in self.alphabet}


def alpha(channel: str, *filters) -> tuple:
    """Alphabet pattern helper: ``alpha("register", None, "M1")``."""
    return (channel, tuple(filters) if filters else None)


@dataclass(frozen=True)
class Composition:
    components: tuple  # of Component
    channels: tuple  # of ChannelDecl
    intrange: tuple = (0, 7)
    internal_channels: frozenset = frozenset()

    def channel_table(self) -> dict:
        return {c.name: c for c in self.channels}

    def sync_map(self) -> dict:
        """Channel -> ids of the components that mention it."""
        out: dict = {c.name: set() for c in self.channels}
        for comp in self.components:
            for chan in comp.channels():
                out.setdefault(chan, set()).add(comp.id)
        return out


# ---------------------------------------------------------------------------
# Single-component public API
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Transition:
    """A concrete step: ``label`` is an Event, or None for a tau-marker."""
    label: Optional[Event]
    term: Term
    store: Store


def component_steps(c: Component, channels, intrange: tuple = (0, 7)) -> frozenset:
    """All concrete transitions licensed by the structural semantics."""
    table = channels if isinstance(channels, dict) else {d.name: d for d in channels}
    term, store = reduce_term(c.term, c.store, intrange)
    out = set()
    for offer in term_offers(term, store, table, intrange):
        if offer.label == TAU_LABEL:
            out.add(Transition(None, offer.cont, offer.store))
            continue
        for ev in expand_offer(offer, table):
            cont, st = offer.fire(ev.values)
            out.add(Transition(ev, cont, st))
    return frozenset(out)


def is_terminated(c: Component, intrange: tuple = (0, 7)) -> bool:
    term, _ = reduce_term(c.term, c.store, intrange)
    return isinstance(term, SkipT)


def is_divergent(c: Component, intrange: tuple = (0, 7)) -> bool:
    term, _ = reduce_term(c.term, c.store, intrange)
    return isinstance(term, ChaosT)


def initials(c: Component, channels, intrange: tuple = (0, 7)) -> frozenset:
    """The visible events a component can engage in right now."""
    return frozenset(t.label for t in component_steps(c, channels, intrange)
                     if t.label is not None)


# ---------------------------------------------------------------------------
# Term rendering (for state summaries and reports)
# ---------------------------------------------------------------------------

def term_str(term: Term, depth: int = 3) -> str:
    if depth <= 0:
        return "…"
    if isinstance(term, SkipT):
        return "Skip"
    if isinstance(term, ChaosT):
        return "Chaos"
    if isinstance(term, StopT):
        return "Stop"
    if isinstance(term, PrefixT):
        fs = ".".join(_field_str(f) for f in term.fields)
        head = term.channel + ("." + fs if fs else "")
        return "%s -> %s" % (head, term_str(term.cont, depth - 1))
    if isinstance(term, GuardT):
        return "[guard] %s" % term_str(term.body, depth - 1)
    if isinstance(term, SeqT):
        return "%s ; %s" % (term_str(term.first, depth - 1), term_str(term.second, 1))
    if isinstance(term, ExtChoiceT):
        return "(%s [] %s)" % (term_str(term.left, depth - 1), term_str(term.right, depth - 1))
    if isinstance(term, InterruptT):
        return "(%s /\\ %s)" % (term_str(term.body, depth - 1), term.channel)
    if isinstance(term, RecursionT):
        return "mu %s. %s" % (term.name, term_str(term.body, depth - 1))
    if isinstance(term, RecVarT):
        return term.name
    if isinstance(term, WaitT):
        return "Wait(%d)" % term.ticks
    if isinstance(term, AssignT):
        return "%s := … ; %s" % (term.var, term_str(term.cont, depth - 1))
    if isinstance(term, VarBlockT):
        return "var …; %s" % term_str(term.body, depth - 1)
    return repr(term)


def _field_str(f) -> str:
    if isinstance(f, In):
        return "?" + f.name
    if isinstance(f.expr, Lit):
        return render_value(f.expr.value)
    if isinstance(f.expr, Var):
        return "!" + f.expr.name
    return "!…"
