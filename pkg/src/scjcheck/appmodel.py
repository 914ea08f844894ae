"""Application DSL: parser, validator, printer, and the compiler that turns
a program into application-side components.

The surface syntax (``.scj2`` files, UTF-8, ``//`` line comments):

    safelet Name { sequencer = SeqName }          // or `sequencer = null`
    sequencer Name { missions = [M1, M2] }
    mission Name [ceiling = N] {
        vars { buffer: int = 0; flag: bool = false; }
        registers = [A, B]
        sync method read(): int { ... }
        method bufferEmpty(): bool { return buffer == 0; }
        cleanup { ... }
    }
    thread Name priority = N { run { ... } }
    periodic Name priority=N period=N [deadline=N] { handle { ... } }
    aperiodic Name priority=N [deadline=N] { handle { ... } }
    oneshot Name priority=N offset=N [deadline=N] { handle { ... } }
    sequencerschedulable Name priority=N { missions = [M] }

Statements: ``var x: int = e;``, ``x = e;``, ``x = call [obj.]m(args);``,
``call [obj.]m(args);``, ``if (e) {..} [else {..}]``, ``while (e) {..}``,
``wait(obj); notify(obj); notifyAll(obj);``, ``requestTermination(M);``,
``fire(handler);``, ``interruptSelf;``, ``sleepTicks(n);``,
``return e;``, ``emitProbe(label);``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Optional

from . import kernel as k
from .kernel import Bin, Lit, Un, Var

# ---------------------------------------------------------------------------
# Abstract syntax
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VarDecl:
    name: str
    type: str  # "int" | "bool"
    init: object  # Expr
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Param:
    name: str
    type: str


# Statements ----------------------------------------------------------------

@dataclass(frozen=True)
class SDeclare:
    name: str
    type: str
    init: object


@dataclass(frozen=True)
class SAssign:
    name: str
    expr: object


@dataclass(frozen=True)
class SCallAssign:
    name: Optional[str]  # variable receiving the result, or None
    obj: Optional[str]  # None = enclosing object ("this")
    method: str
    args: tuple


@dataclass(frozen=True)
class SIf:
    cond: object
    then: tuple
    els: tuple = ()


@dataclass(frozen=True)
class SWhile:
    cond: object
    body: tuple


@dataclass(frozen=True)
class SWait:
    obj: Optional[str]  # None = this


@dataclass(frozen=True)
class SNotify:
    obj: Optional[str]
    all: bool = False


@dataclass(frozen=True)
class SRequestTermination:
    mission: str


@dataclass(frozen=True)
class SFire:
    handler: str


@dataclass(frozen=True)
class SInterruptSelf:
    pass


@dataclass(frozen=True)
class SSleep:
    ticks: int


@dataclass(frozen=True)
class SReturn:
    expr: object


@dataclass(frozen=True)
class SProbe:
    label: str


# Declarations ----------------------------------------------------------------

@dataclass(frozen=True)
class MethodDecl:
    name: str
    params: tuple  # of Param
    ret: str  # "int" | "bool" | "void"
    sync: bool
    body: tuple  # of Stmt
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class SafeletDecl:
    name: str
    sequencer: Optional[str]  # None models a null top sequencer
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class SequencerDecl:
    name: str
    missions: tuple
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class MissionDecl:
    name: str
    vars: tuple  # of VarDecl
    registers: tuple  # of str, declaration order, duplicates allowed (flagged)
    methods: tuple  # of MethodDecl
    cleanup: tuple  # of Stmt
    ceiling: Optional[int] = None
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class SchedulableDecl:
    name: str
    kind: str  # periodic | aperiodic | oneshot | thread | sequencerschedulable
    priority: int
    period: Optional[int] = None
    offset: Optional[int] = None
    deadline: Optional[int] = None
    body: tuple = ()  # run/handle statements
    missions: tuple = ()  # sequencerschedulable only
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class AppSpec:
    safelet: SafeletDecl
    sequencers: tuple  # of SequencerDecl
    missions: tuple  # of MissionDecl
    schedulables: tuple  # of SchedulableDecl
    intrange: tuple = (0, 7)


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    line: int
    col: int
    code: str
    message: str

    def __str__(self):
        return "%d:%d: %s [%s] %s" % (self.line, self.col, self.severity,
                                      self.code, self.message)


class ParseError(Exception):
    def __init__(self, diagnostics):
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = list(diagnostics)


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+|//[^\n]*)
  | (?P<num>\d+)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>==|!=|<=|>=|&&|\|\||[-+*<>=!(){}\[\],;:.])
""", re.VERBOSE)


@dataclass(frozen=True)
class Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str):
    toks = []
    line, col, i = 1, 1, 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if not m:
            raise ParseError([Diagnostic("error", line, col, "E001",
                                         "unexpected character %r" % text[i])])
        kind = m.lastgroup
        s = m.group()
        if kind != "ws":
            toks.append(Tok(kind, s, line, col))
        nl = s.count("\n")
        if nl:
            line += nl
            col = len(s) - s.rfind("\n")
        else:
            col += len(s)
        i = m.end()
    toks.append(Tok("eof", "", line, col))
    return toks


KEYWORDS = {"safelet", "sequencer", "mission", "thread", "periodic",
            "aperiodic", "oneshot", "sequencerschedulable", "vars",
            "registers", "missions", "method", "sync", "run", "handle",
            "cleanup", "var", "if", "else", "while", "call", "wait",
            "notify", "notifyAll", "requestTermination", "fire",
            "interruptSelf", "sleepTicks", "return", "emitProbe", "true",
            "false", "null", "int", "bool", "void", "priority", "period",
            "offset", "deadline", "ceiling", "this", "range"}


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.pos = 0

    # -- token helpers --

    def peek(self) -> Tok:
        return self.toks[self.pos]

    def next(self) -> Tok:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def fail(self, msg: str, code: str = "E002"):
        t = self.peek()
        raise ParseError([Diagnostic("error", t.line, t.col, code, msg)])

    def expect(self, text: str) -> Tok:
        t = self.peek()
        if t.text != text:
            self.fail("expected %r, found %r" % (text, t.text or "end of input"))
        return self.next()

    def accept(self, text: str) -> bool:
        if self.peek().text == text:
            self.next()
            return True
        return False

    def ident(self) -> str:
        t = self.peek()
        if t.kind != "id" or t.text in KEYWORDS:
            self.fail("expected identifier, found %r" % (t.text or "end of input"))
        return self.next().text

    def number(self) -> int:
        t = self.peek()
        if t.kind != "num":
            self.fail("expected number, found %r" % t.text)
        return int(self.next().text)

    # -- grammar --

    def program(self) -> AppSpec:
        safelet = None
        sequencers = []
        missions = []
        scheds = []
        intrange = (0, 7)
        while self.peek().kind != "eof":
            t = self.peek()
            if t.text == "safelet":
                if safelet is not None:
                    self.fail("duplicate safelet", "E010")
                safelet = self.safelet_decl()
            elif t.text == "sequencer":
                sequencers.append(self.sequencer_decl())
            elif t.text == "mission":
                missions.append(self.mission_decl())
            elif t.text in ("thread", "periodic", "aperiodic", "oneshot",
                            "sequencerschedulable"):
                scheds.append(self.schedulable_decl())
            elif t.text == "range":
                self.next()
                lo = self.number()
                self.expect(".")
                self.expect(".")
                hi = self.number()
                intrange = (lo, hi)
            else:
                self.fail("expected a declaration, found %r" % t.text)
        if safelet is None:
            raise ParseError([Diagnostic("error", 1, 1, "E011", "missing safelet")])
        return AppSpec(safelet, tuple(sequencers), tuple(missions),
                       tuple(scheds), intrange)

    def safelet_decl(self) -> SafeletDecl:
        line = self.peek().line
        self.expect("safelet")
        name = self.ident()
        self.expect("{")
        self.expect("sequencer")
        self.expect("=")
        seqname = None if self.accept("null") else self.ident()
        self.expect("}")
        return SafeletDecl(name, seqname, line=line)

    def sequencer_decl(self) -> SequencerDecl:
        line = self.peek().line
        self.expect("sequencer")
        name = self.ident()
        self.expect("{")
        self.expect("missions")
        self.expect("=")
        missions = self.id_list()
        self.expect("}")
        return SequencerDecl(name, missions, line=line)

    def id_list(self) -> tuple:
        self.expect("[")
        out = []
        if not self.accept("]"):
            out.append(self.ident())
            while self.accept(","):
                out.append(self.ident())
            self.expect("]")
        return tuple(out)

    def mission_decl(self) -> MissionDecl:
        line = self.peek().line
        self.expect("mission")
        name = self.ident()
        ceiling = None
        if self.accept("ceiling"):
            self.expect("=")
            ceiling = self.number()
        self.expect("{")
        vars_, registers, methods, cleanup = [], (), [], ()
        while not self.accept("}"):
            t = self.peek()
            if t.text == "vars":
                self.next()
                self.expect("{")
                while not self.accept("}"):
                    vars_.append(self.var_decl())
            elif t.text == "registers":
                self.next()
                self.expect("=")
                registers = self.id_list()
            elif t.text in ("method", "sync"):
                methods.append(self.method_decl())
            elif t.text == "cleanup":
                self.next()
                cleanup = self.block()
            else:
                self.fail("expected vars/registers/method/cleanup, found %r" % t.text)
        return MissionDecl(name, tuple(vars_), registers, tuple(methods),
                           cleanup, ceiling, line=line)

    def var_decl(self) -> VarDecl:
        line = self.peek().line
        name = self.ident()
        self.expect(":")
        ty = self.type_name()
        self.expect("=")
        init = self.expr()
        self.expect(";")
        return VarDecl(name, ty, init, line=line)

    def type_name(self) -> str:
        t = self.peek()
        if t.text not in ("int", "bool", "void"):
            self.fail("expected a type, found %r" % t.text)
        return self.next().text

    def method_decl(self) -> MethodDecl:
        line = self.peek().line
        sync = self.accept("sync")
        self.expect("method")
        name = self.ident()
        self.expect("(")
        params = []
        if not self.accept(")"):
            while True:
                pname = self.ident()
                self.expect(":")
                params.append(Param(pname, self.type_name()))
                if not self.accept(","):
                    break
            self.expect(")")
        self.expect(":")
        ret = self.type_name()
        body = self.block()
        return MethodDecl(name, tuple(params), ret, sync, body, line=line)

    def schedulable_decl(self) -> SchedulableDecl:
        line = self.peek().line
        kind = self.next().text
        name = self.ident()
        priority = period = offset = deadline = None
        while self.peek().text in ("priority", "period", "offset", "deadline"):
            key = self.next().text
            self.expect("=")
            val = self.number()
            if key == "priority":
                priority = val
            elif key == "period":
                period = val
            elif key == "offset":
                offset = val
            else:
                deadline = val
        if priority is None:
            self.fail("schedulable %r needs priority = N" % name, "E012")
        if kind == "sequencerschedulable":
            self.expect("{")
            self.expect("missions")
            self.expect("=")
            missions = self.id_list()
            self.expect("}")
            return SchedulableDecl(name, kind, priority, missions=missions,
                                   line=line)
        self.expect("{")
        self.expect("run" if kind == "thread" else "handle")
        body = self.block()
        self.expect("}")
        return SchedulableDecl(name, kind, priority, period=period,
                               offset=offset, deadline=deadline, body=body,
                               line=line)

    # -- statements --

    def block(self) -> tuple:
        self.expect("{")
        out = []
        while not self.accept("}"):
            out.append(self.stmt())
        return tuple(out)

    def stmt(self):
        t = self.peek()
        if t.text == "var":
            self.next()
            name = self.ident()
            self.expect(":")
            ty = self.type_name()
            self.expect("=")
            init = self.expr()
            self.expect(";")
            return SDeclare(name, ty, init)
        if t.text == "if":
            self.next()
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            then = self.block()
            els = self.block() if self.accept("else") else ()
            return SIf(cond, then, els)
        if t.text == "while":
            self.next()
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            return SWhile(cond, self.block())
        if t.text == "wait":
            self.next()
            self.expect("(")
            obj = None if self.accept("this") else self.ident()
            self.expect(")")
            self.expect(";")
            return SWait(obj)
        if t.text in ("notify", "notifyAll"):
            self.next()
            self.expect("(")
            obj = None if self.accept("this") else self.ident()
            self.expect(")")
            self.expect(";")
            return SNotify(obj, all=(t.text == "notifyAll"))
        if t.text == "requestTermination":
            self.next()
            self.expect("(")
            m = self.ident()
            self.expect(")")
            self.expect(";")
            return SRequestTermination(m)
        if t.text == "fire":
            self.next()
            self.expect("(")
            h = self.ident()
            self.expect(")")
            self.expect(";")
            return SFire(h)
        if t.text == "interruptSelf":
            self.next()
            self.expect(";")
            return SInterruptSelf()
        if t.text == "sleepTicks":
            self.next()
            self.expect("(")
            n = self.number()
            self.expect(")")
            self.expect(";")
            return SSleep(n)
        if t.text == "return":
            self.next()
            expr = None if self.peek().text == ";" else self.expr()
            self.expect(";")
            return SReturn(expr)
        if t.text == "emitProbe":
            self.next()
            self.expect("(")
            label = self.ident()
            self.expect(")")
            self.expect(";")
            return SProbe(label)
        if t.text == "call":
            self.next()
            s = self.call_tail(None)
            self.expect(";")
            return s
        if t.kind == "id" and t.text not in KEYWORDS:
            name = self.ident()
            self.expect("=")
            if self.accept("call"):
                s = self.call_tail(name)
                self.expect(";")
                return s
            expr = self.expr()
            self.expect(";")
            return SAssign(name, expr)
        self.fail("expected a statement, found %r" % (t.text or "end of input"))

    def call_tail(self, target: Optional[str]) -> SCallAssign:
        first = None if self.accept("this") else self.ident()
        if self.accept("."):
            obj = first
            meth = self.ident()
        else:
            obj, meth = None, first
            if meth is None:
                self.fail("expected a method name after 'this.'")
        self.expect("(")
        args = []
        if not self.accept(")"):
            args.append(self.expr())
            while self.accept(","):
                args.append(self.expr())
            self.expect(")")
        return SCallAssign(target, obj, meth, tuple(args))

    # -- expressions (precedence climbing) --

    def expr(self):
        return self.expr_or()

    def expr_or(self):
        e = self.expr_and()
        while self.peek().text == "||":
            self.next()
            e = Bin("or", e, self.expr_and())
        return e

    def expr_and(self):
        e = self.expr_cmp()
        while self.peek().text == "&&":
            self.next()
            e = Bin("and", e, self.expr_cmp())
        return e

    def expr_cmp(self):
        e = self.expr_add()
        while self.peek().text in ("==", "!=", "<", "<=", ">", ">="):
            op = self.next().text
            e = Bin(op, e, self.expr_add())
        return e

    def expr_add(self):
        e = self.expr_mul()
        while self.peek().text in ("+", "-"):
            op = self.next().text
            e = Bin(op, e, self.expr_mul())
        return e

    def expr_mul(self):
        e = self.expr_unary()
        while self.peek().text == "*":
            self.next()
            e = Bin("*", e, self.expr_unary())
        return e

    def expr_unary(self):
        t = self.peek()
        if t.text == "!":
            self.next()
            return Un("not", self.expr_unary())
        if t.text == "-":
            self.next()
            return Un("neg", self.expr_unary())
        return self.expr_atom()

    def expr_atom(self):
        t = self.peek()
        if t.kind == "num":
            return Lit(self.number())
        if t.text == "true":
            self.next()
            return Lit(True)
        if t.text == "false":
            self.next()
            return Lit(False)
        if t.text == "null":
            self.next()
            return Lit(None)
        if t.text == "(":
            self.next()
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "id" and t.text not in KEYWORDS:
            return Var(self.ident())
        self.fail("expected an expression, found %r" % (t.text or "end of input"))


def parse_program(text: str) -> AppSpec:
    """Parse a ``.scj2`` program; raises ParseError with diagnostics."""
    return _Parser(text).program()


def try_parse(text: str):
    """Returns (spec, []) or (None, diagnostics)."""
    try:
        return parse_program(text), []
    except ParseError as e:
        return None, e.diagnostics


# ---------------------------------------------------------------------------
# Printer (round-trip support)
# ---------------------------------------------------------------------------

def print_program(spec: AppSpec) -> str:
    out = []
    lo, hi = spec.intrange
    if (lo, hi) != (0, 7):
        out.append("range %d..%d" % (lo, hi))
    seq = spec.safelet.sequencer if spec.safelet.sequencer is not None else "null"
    out.append("safelet %s { sequencer = %s }" % (spec.safelet.name, seq))
    for s in spec.sequencers:
        out.append("sequencer %s { missions = [%s] }" % (s.name, ", ".join(s.missions)))
    for m in spec.missions:
        head = "mission %s" % m.name
        if m.ceiling is not None:
            head += " ceiling = %d" % m.ceiling
        out.append(head + " {")
        if m.vars:
            out.append("  vars {")
            for v in m.vars:
                out.append("    %s: %s = %s;" % (v.name, v.type, print_expr(v.init)))
            out.append("  }")
        out.append("  registers = [%s]" % ", ".join(m.registers))
        for meth in m.methods:
            sig = ", ".join("%s: %s" % (p.name, p.type) for p in meth.params)
            kw = "sync method" if meth.sync else "method"
            out.append("  %s %s(%s): %s {" % (kw, meth.name, sig, meth.ret))
            _print_stmts(meth.body, out, "    ")
            out.append("  }")
        if m.cleanup:
            out.append("  cleanup {")
            _print_stmts(m.cleanup, out, "    ")
            out.append("  }")
        out.append("}")
    for s in spec.schedulables:
        attrs = " priority = %d" % s.priority
        for key, val in (("period", s.period), ("offset", s.offset),
                         ("deadline", s.deadline)):
            if val is not None:
                attrs += " %s = %d" % (key, val)
        if s.kind == "sequencerschedulable":
            out.append("sequencerschedulable %s%s { missions = [%s] }"
                       % (s.name, attrs, ", ".join(s.missions)))
            continue
        word = "run" if s.kind == "thread" else "handle"
        out.append("%s %s%s {" % (s.kind, s.name, attrs))
        out.append("  %s {" % word)
        _print_stmts(s.body, out, "    ")
        out.append("  }")
        out.append("}")
    return "\n".join(out) + "\n"


def _print_stmts(stmts, out, ind):
    for s in stmts:
        if isinstance(s, SDeclare):
            out.append("%svar %s: %s = %s;" % (ind, s.name, s.type, print_expr(s.init)))
        elif isinstance(s, SAssign):
            out.append("%s%s = %s;" % (ind, s.name, print_expr(s.expr)))
        elif isinstance(s, SCallAssign):
            obj = "" if s.obj is None else s.obj + "."
            callstr = "call %s%s(%s)" % (obj, s.method,
                                         ", ".join(print_expr(a) for a in s.args))
            if s.name is None:
                out.append("%s%s;" % (ind, callstr))
            else:
                out.append("%s%s = %s;" % (ind, s.name, callstr))
        elif isinstance(s, SIf):
            out.append("%sif (%s) {" % (ind, print_expr(s.cond)))
            _print_stmts(s.then, out, ind + "  ")
            if s.els:
                out.append("%s} else {" % ind)
                _print_stmts(s.els, out, ind + "  ")
            out.append("%s}" % ind)
        elif isinstance(s, SWhile):
            out.append("%swhile (%s) {" % (ind, print_expr(s.cond)))
            _print_stmts(s.body, out, ind + "  ")
            out.append("%s}" % ind)
        elif isinstance(s, SWait):
            out.append("%swait(%s);" % (ind, s.obj or "this"))
        elif isinstance(s, SNotify):
            out.append("%s%s(%s);" % (ind, "notifyAll" if s.all else "notify",
                                      s.obj or "this"))
        elif isinstance(s, SRequestTermination):
            out.append("%srequestTermination(%s);" % (ind, s.mission))
        elif isinstance(s, SFire):
            out.append("%sfire(%s);" % (ind, s.handler))
        elif isinstance(s, SInterruptSelf):
            out.append("%sinterruptSelf;" % ind)
        elif isinstance(s, SSleep):
            out.append("%ssleepTicks(%d);" % (ind, s.ticks))
        elif isinstance(s, SReturn):
            if s.expr is None:
                out.append("%sreturn;" % ind)
            else:
                out.append("%sreturn %s;" % (ind, print_expr(s.expr)))
        elif isinstance(s, SProbe):
            out.append("%semitProbe(%s);" % (ind, s.label))
        else:
            raise TypeError("unknown stmt %r" % (s,))


_OP_TEXT = {"and": "&&", "or": "||"}


def print_expr(e) -> str:
    if isinstance(e, Lit):
        return k.render_value(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Un):
        return ("!" if e.op == "not" else "-") + "(" + print_expr(e.arg) + ")"
    if isinstance(e, Bin):
        return "(%s %s %s)" % (print_expr(e.left), _OP_TEXT.get(e.op, e.op),
                               print_expr(e.right))
    raise TypeError("unknown expr %r" % (e,))

# ---------------------------------------------------------------------------
# Program analysis
# ---------------------------------------------------------------------------

THREAD_KINDS = ("thread", "periodic", "aperiodic", "oneshot")


@dataclass(frozen=True)
class Analysis:
    """Name resolution and derived structure for a validated program."""
    spec: AppSpec
    missions: dict  # name -> MissionDecl
    scheds: dict  # name -> SchedulableDecl
    sequencer_missions: dict  # sequencer/seq-schedulable name -> mission tuple
    mission_of: dict  # sid -> registering mission name (or absent)
    methods: dict  # (mid, name) -> MethodDecl
    method_sigs: dict  # name -> (param type tuple, ret type)
    sync_oids: tuple  # missions that need a monitor
    thread_sids: tuple  # schedulables backed by a thread registry entry
    ceilings: dict  # mid -> ceiling priority
    srcs: tuple  # all emitting component ids
    probes: tuple  # probe labels in declaration order
    intrange: tuple  # effective integer range


def _walk_stmts(stmts):
    for s in stmts:
        yield s
        if isinstance(s, SIf):
            yield from _walk_stmts(s.then)
            yield from _walk_stmts(s.els)
        elif isinstance(s, SWhile):
            yield from _walk_stmts(s.body)


def _expr_vars(e) -> set:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Un):
        return _expr_vars(e.arg)
    if isinstance(e, Bin):
        return _expr_vars(e.left) | _expr_vars(e.right)
    return set()


def analyze(spec: AppSpec) -> Analysis:
    """Build the Analysis for a program assumed to have passed validation."""
    missions = {m.name: m for m in spec.missions}
    scheds = {s.name: s for s in spec.schedulables}
    seq_missions = {s.name: s.missions for s in spec.sequencers}
    seq_missions.update({s.name: s.missions for s in spec.schedulables
                         if s.kind == "sequencerschedulable"})
    mission_of = {}
    for m in spec.missions:
        for sid in m.registers:
            mission_of.setdefault(sid, m.name)
    methods = {}
    method_sigs = {}
    for m in spec.missions:
        for meth in m.methods:
            methods[(m.name, meth.name)] = meth
            method_sigs[meth.name] = (tuple(p.type for p in meth.params), meth.ret)

    # Missions needing a monitor: any sync method, or being a wait/notify target.
    sync_oids = {m.name for m in spec.missions if any(me.sync for me in m.methods)}

    def monitor_targets(stmts, home_mid):
        for s in _walk_stmts(stmts):
            if isinstance(s, (SWait, SNotify)):
                sync_oids.add(s.obj if s.obj is not None else home_mid)

    for m in spec.missions:
        for meth in m.methods:
            monitor_targets(meth.body, m.name)
        monitor_targets(m.cleanup, m.name)
    for s in spec.schedulables:
        if s.kind != "sequencerschedulable":
            monitor_targets(s.body, mission_of.get(s.name, s.name))

    thread_sids = tuple(s.name for s in spec.schedulables
                        if s.kind in THREAD_KINDS)

    prios = [s.priority for s in spec.schedulables] or [1]
    default_ceiling = max(prios)
    ceilings = {m.name: (m.ceiling if m.ceiling is not None else default_ceiling)
                for m in spec.missions}

    srcs = ["safelet"]
    for m in spec.missions:
        srcs.append(m.name + ".app")
        if m.vars:
            srcs.append(m.name + ".vars")
        for meth in m.methods:
            srcs.append("%s.%s" % (m.name, meth.name))
    for s in spec.schedulables:
        if s.kind == "sequencerschedulable":
            srcs.append(s.name + ".fw")
        else:
            srcs.append(s.name + ".app")
    if spec.safelet.sequencer is not None:
        srcs.append(spec.safelet.sequencer + ".fw")

    probes = []
    def scan_probes(stmts):
        for s in _walk_stmts(stmts):
            if isinstance(s, SProbe) and s.label not in probes:
                probes.append(s.label)
    for m in spec.missions:
        for meth in m.methods:
            scan_probes(meth.body)
        scan_probes(m.cleanup)
    for s in spec.schedulables:
        scan_probes(s.body)

    lo, hi = spec.intrange
    for s in spec.schedulables:
        for v in (s.period, s.offset, s.deadline):
            if v is not None:
                hi = max(hi, v + 1)
        for st in _walk_stmts(s.body):
            if isinstance(st, SSleep):
                hi = max(hi, st.ticks)

    return Analysis(spec, missions, scheds, seq_missions, mission_of,
                    methods, method_sigs, tuple(sorted(sync_oids & set(missions))),
                    thread_sids, ceilings, tuple(srcs), tuple(probes), (lo, hi))


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def validate(spec: AppSpec) -> list:
    """Static checks; returns diagnostics (semantic errors like double
    registration or waiting without the lock are left to the checker)."""
    out = []

    def err(line, code, msg):
        out.append(Diagnostic("error", line, 0, code, msg))

    def warn(line, code, msg):
        out.append(Diagnostic("warning", line, 0, code, msg))

    missions = {m.name: m for m in spec.missions}
    scheds = {s.name: s for s in spec.schedulables}
    top_seqs = {s.name: s for s in spec.sequencers}

    # Global namespace.
    names = {}
    decls = ([spec.safelet] + list(spec.sequencers) + list(spec.missions)
             + list(spec.schedulables))
    for d in decls:
        if d.name.startswith("_"):
            err(d.line, "V018", "identifier %r must not start with '_'" % d.name)
        if d.name in names:
            err(d.line, "V009", "duplicate declaration of %r" % d.name)
        names[d.name] = d

    # Safelet.
    sl = spec.safelet
    if sl.sequencer is not None and sl.sequencer not in top_seqs:
        err(sl.line, "V001", "safelet names unknown sequencer %r" % sl.sequencer)

    # Sequencer mission lists (top-level and schedulable flavours).
    seq_lists = [(s.name, s.missions, s.line) for s in spec.sequencers]
    seq_lists += [(s.name, s.missions, s.line) for s in spec.schedulables
                  if s.kind == "sequencerschedulable"]
    owner = {}
    for sname, mlist, line in seq_lists:
        for m in mlist:
            if m not in missions:
                err(line, "V002", "sequencer %r lists unknown mission %r" % (sname, m))
            elif m in owner:
                err(line, "V003", "mission %r appears in more than one sequencer" % m)
            else:
                owner[m] = sname
    for m in spec.missions:
        if m.name not in owner:
            warn(m.line, "V004", "mission %r is not run by any sequencer" % m.name)

    # Registration.
    registered_by = {}
    for m in spec.missions:
        for sid in m.registers:
            if sid not in scheds:
                err(m.line, "V005", "mission %r registers unknown schedulable %r"
                    % (m.name, sid))
            elif sid in registered_by and registered_by[sid] != m.name:
                err(m.line, "V006", "schedulable %r is registered by two missions "
                    "(%r and %r); re-use across missions is not supported"
                    % (sid, registered_by[sid], m.name))
            else:
                registered_by[sid] = m.name
    for s in spec.schedulables:
        if s.name not in registered_by:
            warn(s.line, "V007", "schedulable %r is never registered" % s.name)

    # Timing attributes.
    for s in spec.schedulables:
        if s.priority < 1:
            err(s.line, "V008", "%s: priority must be >= 1" % s.name)
        if s.kind == "periodic":
            if s.period is None or s.period < 1:
                err(s.line, "V008", "%s: periodic needs period >= 1" % s.name)
        elif s.period is not None:
            err(s.line, "V027", "%s: only periodic schedulables take a period" % s.name)
        if s.offset is not None and (s.kind != "oneshot" or s.offset < 0):
            err(s.line, "V027", "%s: offset is for oneshot handlers and must be >= 0"
                % s.name)
        if s.deadline is not None and s.deadline < 1:
            err(s.line, "V008", "%s: deadline must be >= 1" % s.name)
        if s.kind == "sequencerschedulable" and (s.deadline is not None):
            err(s.line, "V027", "%s: sequencer schedulables take no deadline" % s.name)

    # Method signatures must agree across missions (one channel per name).
    sigs = {}
    for m in spec.missions:
        seen = set()
        for meth in m.methods:
            if meth.name in seen:
                err(meth.line, "V009", "duplicate method %r in mission %r"
                    % (meth.name, m.name))
            seen.add(meth.name)
            sig = (tuple(p.type for p in meth.params), meth.ret)
            if meth.name in sigs and sigs[meth.name][0] != sig:
                err(meth.line, "V010", "method %r redeclared with a different "
                    "signature" % meth.name)
            sigs.setdefault(meth.name, (sig, m.name))

    mission_of = {}
    for m in spec.missions:
        for sid in m.registers:
            mission_of.setdefault(sid, m.name)

    # Mission vars.
    for m in spec.missions:
        seen = set()
        for v in m.vars:
            if v.name.startswith("_"):
                err(v.line, "V018", "variable %r must not start with '_'" % v.name)
            if v.name in seen:
                err(v.line, "V023", "duplicate variable %r in mission %r"
                    % (v.name, m.name))
            seen.add(v.name)
            if not isinstance(v.init, Lit):
                err(v.line, "V028", "initialiser of %s.%s must be a literal"
                    % (m.name, v.name))

    # Statement-level checks.
    def check_body(stmts, *, mid, line, in_method, in_cleanup, sid=None,
                   scope=frozenset()):
        mvars = {v.name for v in missions[mid].vars} if mid in missions else set()

        def resolve_expr(e, local):
            for name in _expr_vars(e):
                if name not in local and name not in mvars:
                    err(line, "V011", "unknown variable %r" % name)

        def walk(stmts, local, *, tail_ok):
            local = set(local)
            for i, s in enumerate(stmts):
                last = i == len(stmts) - 1
                if isinstance(s, SDeclare):
                    if s.name.startswith("_"):
                        err(line, "V018", "variable %r must not start with '_'" % s.name)
                    if s.name in local or s.name in mvars:
                        err(line, "V023", "redeclaration of %r" % s.name)
                    resolve_expr(s.init, local)
                    local.add(s.name)
                elif isinstance(s, SAssign):
                    if s.name not in local and s.name not in mvars:
                        err(line, "V011", "assignment to unknown variable %r" % s.name)
                    resolve_expr(s.expr, local)
                elif isinstance(s, SCallAssign):
                    target_mid = s.obj if s.obj is not None else mid
                    if s.obj is not None and s.obj not in missions:
                        err(line, "V012", "call target %r is not a mission" % s.obj)
                    elif (target_mid, s.method) not in {
                            (m.name, me.name) for m in spec.missions
                            for me in m.methods}:
                        err(line, "V012", "mission %r has no method %r"
                            % (target_mid, s.method))
                    else:
                        meth = next(me for m in spec.missions if m.name == target_mid
                                    for me in m.methods if me.name == s.method)
                        if len(s.args) != len(meth.params):
                            err(line, "V025", "call to %s.%s passes %d arguments, "
                                "expected %d" % (target_mid, s.method,
                                                 len(s.args), len(meth.params)))
                        if in_cleanup and meth.sync:
                            err(line, "V020", "cleanup may not call sync method %r"
                                % s.method)
                        if s.name is not None and meth.ret == "void":
                            err(line, "V025", "method %r returns no value" % s.method)
                    for a in s.args:
                        resolve_expr(a, local)
                    if s.name is not None and s.name not in local and s.name not in mvars:
                        err(line, "V011", "assignment to unknown variable %r" % s.name)
                elif isinstance(s, SIf):
                    resolve_expr(s.cond, local)
                    walk(s.then, local, tail_ok=False)
                    walk(s.els, local, tail_ok=False)
                elif isinstance(s, SWhile):
                    resolve_expr(s.cond, local)
                    walk(s.body, local, tail_ok=False)
                elif isinstance(s, (SWait, SNotify)):
                    if in_cleanup:
                        err(line, "V020", "cleanup may not wait or notify")
                    if s.obj is None and not in_method:
                        err(line, "V013", "wait/notify on 'this' is only available "
                            "inside a mission method")
                    if s.obj is not None and s.obj not in missions:
                        err(line, "V013", "wait/notify target %r is not a mission"
                            % s.obj)
                elif isinstance(s, SRequestTermination):
                    if in_cleanup:
                        err(line, "V014", "cleanup may not request termination")
                    elif s.mission != mid:
                        err(line, "V014", "requestTermination target must be the "
                            "enclosing mission %r" % mid)
                elif isinstance(s, SFire):
                    h = scheds.get(s.handler)
                    if h is None or h.kind != "aperiodic":
                        err(line, "V015", "fire target %r is not an aperiodic "
                            "handler" % s.handler)
                elif isinstance(s, SInterruptSelf):
                    if sid is None:
                        err(line, "V017", "interruptSelf is only available in a "
                            "schedulable body")
                elif isinstance(s, SSleep):
                    if s.ticks < 1:
                        err(line, "V008", "sleepTicks needs a positive count")
                elif isinstance(s, SReturn):
                    if not in_method:
                        err(line, "V016", "return outside a method body")
                    elif not (tail_ok and last):
                        err(line, "V016", "return must be the final statement of "
                            "the method body")
                    if s.expr is not None:
                        resolve_expr(s.expr, local)
                elif isinstance(s, SProbe):
                    pass
                else:
                    raise TypeError("unknown stmt %r" % (s,))

        walk(stmts, scope, tail_ok=in_method)

    for m in spec.missions:
        for meth in m.methods:
            params = {p.name for p in meth.params}
            check_body(meth.body, mid=m.name, line=meth.line, in_method=True,
                       in_cleanup=False, scope=frozenset(params))
            if meth.ret != "void":
                if not (meth.body and isinstance(meth.body[-1], SReturn)
                        and meth.body[-1].expr is not None):
                    err(meth.line, "V016", "method %r returns %s but has no final "
                        "return" % (meth.name, meth.ret))
            elif meth.body and isinstance(meth.body[-1], SReturn) \
                    and meth.body[-1].expr is not None:
                err(meth.line, "V016", "void method %r returns a value" % meth.name)
        check_body(m.cleanup, mid=m.name, line=m.line, in_method=False,
                   in_cleanup=True)

    for s in spec.schedulables:
        if s.kind == "sequencerschedulable":
            continue
        home = mission_of.get(s.name, s.name)
        check_body(s.body, mid=home, line=s.line, in_method=False,
                   in_cleanup=False, sid=s.name)

    # Method call graph must be acyclic (calls compile to server round trips;
    # recursion would make a server call itself and deadlock silently).
    calls = {}
    for m in spec.missions:
        for meth in m.methods:
            callees = set()
            for st in _walk_stmts(meth.body):
                if isinstance(st, SCallAssign):
                    callees.add((st.obj or m.name, st.method))
            calls[(m.name, meth.name)] = callees
    state = {}

    def dfs(node):
        if state.get(node) == 1:
            err(0, "V019", "recursive method call involving %s.%s" % node)
            return
        if state.get(node) == 2 or node not in calls:
            return
        state[node] = 1
        for nxt in calls[node]:
            dfs(nxt)
        state[node] = 2

    for node in calls:
        dfs(node)

    return out

# ---------------------------------------------------------------------------
# Compilation to components
# ---------------------------------------------------------------------------
#
# Mapping:
#   * each mission with vars gets a variable-server component; reads and
#     writes go over getVar/setVar, one event per access;
#   * each mission method gets a server component looping on mCall/mRet
#     (sync methods wrap the body in startSyncMeth/lockAcquired/endSyncMeth);
#   * each thread/handler body becomes a component driven by the matching
#     framework release protocol (runCall/runRet, handleEventCall/Ret);
#   * sequencers get a small component answering getNextMissionCall with the
#     static mission list, then null.
#
# Routing: channels that can have several senders carry an explicit `src`
# field holding the emitting component id, which keeps alphabets pairwise
# disjoint so that multiway synchronisation never couples unrelated parties.

@dataclass(frozen=True)
class _Ctx:
    mid: str  # enclosing object (mission) id
    tid: object  # expr for the acting thread id (Lit or Var)
    src: str  # emitting component id


class _CompUnit:
    """Accumulates the alphabet and timedness of one component being built."""

    def __init__(self, comp_id: str):
        self.id = comp_id
        self.alpha = []
        self._seen = set()
        self.timed = False

    def emit(self, channel: str, fields, cont):
        fields = tuple(f if isinstance(f, (k.Out, k.In)) else k.out(f)
                       for f in fields)
        filters = tuple(
            f.expr.value if isinstance(f, k.Out) and isinstance(f.expr, Lit)
            else None
            for f in fields)
        entry = (channel, filters if fields else None)
        if entry not in self._seen:
            self._seen.add(entry)
            self.alpha.append(entry)
        return k.prefix(channel, fields, cont)

    def done(self, term, store=None, priority=None) -> k.Component:
        return k.Component(self.id, term, store or k.EMPTY_STORE,
                           tuple(self.alpha), self.timed, None, priority)


class Compiler:
    def __init__(self, analysis: Analysis):
        self.a = analysis
        self._fresh = 0

    def fresh(self, prefix: str) -> str:
        self._fresh += 1
        return "%s%d" % (prefix, self._fresh)

    # -- expression support --

    def _mission_vars(self, mid: str) -> set:
        m = self.a.missions.get(mid)
        return {v.name for v in m.vars} if m else set()

    def _fetch(self, exprs, ctx: _Ctx, unit: _CompUnit, build):
        """Prefix getVar fetches for the mission variables used by ``exprs``
        and hand rewritten copies (reading the fetched temporaries) to
        ``build``, which returns the continuation term."""
        mvars = self._mission_vars(ctx.mid)
        used = sorted(set().union(*[_expr_vars(e) for e in exprs]) & mvars) \
            if exprs else []
        rewritten = [_rewrite_expr(e, used) for e in exprs]
        term = build(rewritten)
        for v in reversed(used):
            term = unit.emit("getVar",
                             (k.out(ctx.mid), k.out(ctx.src), k.out(v),
                              k.inp("_g_" + v)),
                             term)
        return term

    def _store_result(self, name, expr, ctx, unit, cont):
        """Assign ``expr`` (already rewritten) to a local or mission var."""
        if name in self._mission_vars(ctx.mid):
            return unit.emit("setVar",
                             (k.out(ctx.mid), k.out(ctx.src), k.out(name),
                              k.out(expr)),
                             cont)
        return k.assign(name, expr, cont)

    # -- statements --

    def _stmts(self, stmts, ctx: _Ctx, unit: _CompUnit, cont):
        term = cont
        for s in reversed(stmts):
            term = self._stmt(s, ctx, unit, term)
        return term

    def _stmt(self, s, ctx: _Ctx, unit: _CompUnit, cont):
        mid, src = ctx.mid, ctx.src
        if isinstance(s, SDeclare):
            return self._fetch([s.init], ctx, unit,
                               lambda es: k.assign(s.name, es[0], cont))
        if isinstance(s, SAssign):
            return self._fetch([s.expr], ctx, unit,
                               lambda es: self._store_result(s.name, es[0],
                                                             ctx, unit, cont))
        if isinstance(s, SCallAssign):
            oid = s.obj if s.obj is not None else mid
            meth = s.method

            def build(es):
                after = cont
                if s.name is not None:
                    after = self._store_result(s.name, Var("_r"), ctx, unit, cont)
                ret = unit.emit(meth + "Ret",
                                (k.out(oid), k.out(ctx.tid), k.out(src),
                                 k.inp("_r")),
                                after)
                return unit.emit(meth + "Call",
                                 (k.out(oid), k.out(ctx.tid), k.out(src))
                                 + tuple(k.out(e) for e in es),
                                 ret)

            return self._fetch(list(s.args), ctx, unit, build)
        if isinstance(s, SIf):
            then_t = self._stmts(s.then, ctx, unit, cont)
            els_t = self._stmts(s.els, ctx, unit, cont)
            return self._fetch([s.cond], ctx, unit,
                               lambda es: k.ite(es[0], then_t, els_t))
        if isinstance(s, SWhile):
            name = self.fresh("_L")
            body = self._fetch(
                [s.cond], ctx, unit,
                lambda es: k.ite(es[0],
                                 self._stmts(s.body, ctx, unit, k.recvar(name)),
                                 k.skip()))
            return k.seq(k.rec(name, body), cont)
        if isinstance(s, SWait):
            oid = s.obj if s.obj is not None else mid
            ret = unit.emit("waitRet", (k.out(oid), k.out(ctx.tid), k.out(src)),
                            cont)
            return unit.emit("waitCall", (k.out(oid), k.out(ctx.tid), k.out(src)),
                             ret)
        if isinstance(s, SNotify):
            oid = s.obj if s.obj is not None else mid
            chan = "notifyAll" if s.all else "notify"
            return unit.emit(chan, (k.out(oid), k.out(ctx.tid), k.out(src)), cont)
        if isinstance(s, SRequestTermination):
            return unit.emit("requestTermination", (k.out(s.mission), k.out(src)),
                             cont)
        if isinstance(s, SFire):
            return unit.emit("release", (k.out(s.handler), k.out(src)), cont)
        if isinstance(s, SInterruptSelf):
            return unit.emit("interruptSelf", (k.out(ctx.tid),), cont)
        if isinstance(s, SSleep):
            unit.timed = True
            return k.seq(k.wait(s.ticks), cont)
        if isinstance(s, SReturn):
            if s.expr is None:
                return cont
            return self._fetch([s.expr], ctx, unit,
                               lambda es: k.assign("_ret", es[0], cont))
        if isinstance(s, SProbe):
            return unit.emit("probe", (k.out(s.label), k.out(src)), cont)
        raise TypeError("unknown stmt %r" % (s,))

    # -- components --

    def mission_app(self, m: MissionDecl) -> k.Component:
        unit = _CompUnit(m.name + ".app")
        ctx = _Ctx(m.name, Lit(m.name), unit.id)
        term = unit.emit("missionCleanupRet", (k.out(m.name),), k.skip())
        term = self._stmts(m.cleanup, ctx, unit, term)
        term = unit.emit("missionCleanupCall", (k.out(m.name),), term)
        term = unit.emit("initializeRet", (k.out(m.name),), term)
        for sid in reversed(m.registers):
            term = unit.emit("register", (k.out(sid), k.out(m.name)), term)
        term = unit.emit("initializeCall", (k.out(m.name),), term)
        return unit.done(term)

    def var_server(self, m: MissionDecl) -> k.Component:
        unit = _CompUnit(m.name + ".vars")
        branches = []
        for v in m.vars:
            branches.append(unit.emit(
                "getVar",
                (k.out(m.name), k.inp("_s"), k.out(v.name), k.out(Var(v.name))),
                k.recvar("VS")))
            branches.append(unit.emit(
                "setVar",
                (k.out(m.name), k.inp("_s"), k.out(v.name), k.inp("_nv")),
                k.assign(v.name, Var("_nv"), k.recvar("VS"))))
        store = k.EMPTY_STORE.set_many([(v.name, v.init.value) for v in m.vars])
        return unit.done(k.rec("VS", k.choice(*branches)), store)

    def method_server(self, m: MissionDecl, meth: MethodDecl) -> k.Component:
        unit = _CompUnit("%s.%s" % (m.name, meth.name))
        ctx = _Ctx(m.name, Var("_tid"), unit.id)
        tail = unit.emit(meth.name + "Ret",
                         (k.out(m.name), k.out(Var("_tid")), k.out(Var("_csrc")),
                          k.out(Var("_ret"))),
                         k.recvar("SRV"))
        if meth.sync:
            tail = unit.emit("endSyncMeth",
                             (k.out(m.name), k.out(Var("_tid")), k.out(unit.id)),
                             tail)
        body = self._stmts(meth.body, ctx, unit, tail)
        if meth.sync:
            body = unit.emit("lockAcquired",
                             (k.out(m.name), k.out(Var("_tid")), k.out(unit.id)),
                             body)
            body = unit.emit("startSyncMeth",
                             (k.out(m.name), k.out(Var("_tid")), k.out(unit.id)),
                             body)
        body = k.assign("_ret", Lit(None), body)
        head = unit.emit(meth.name + "Call",
                         (k.out(m.name), k.inp("_tid"), k.inp("_csrc"))
                         + tuple(k.inp(p.name) for p in meth.params),
                         body)
        return unit.done(k.rec("SRV", head))

    def schedulable_body(self, s: SchedulableDecl) -> k.Component:
        unit = _CompUnit(s.name + ".app")
        home = self.a.mission_of.get(s.name, s.name)
        ctx = _Ctx(home, Lit(s.name), unit.id)
        if s.kind == "thread":
            tail = unit.emit("runRet", (k.out(s.name),), k.skip())
            term = self._stmts(s.body, ctx, unit, tail)
            term = unit.emit("runCall", (k.out(s.name),), term)
        else:
            tail = unit.emit("handleEventRet", (k.out(s.name),), k.recvar("H"))
            term = self._stmts(s.body, ctx, unit, tail)
            term = k.rec("H", unit.emit("handleEventCall", (k.out(s.name),), term))
        return unit.done(term, priority=s.priority)

    def sequencer_app(self, name: str, mission_list) -> k.Component:
        unit = _CompUnit(name + ".app")
        term = k.skip()
        for m in reversed(tuple(mission_list) + (None,)):
            term = unit.emit("getNextMissionCall", (k.out(name),),
                             unit.emit("getNextMissionRet",
                                       (k.out(name), k.out(Lit(m))), term))
        return unit.done(term)

    def compile(self) -> list:
        out = []
        spec = self.a.spec
        if spec.safelet.sequencer is not None:
            out.append(self.sequencer_app(
                spec.safelet.sequencer,
                self.a.sequencer_missions[spec.safelet.sequencer]))
        for m in spec.missions:
            out.append(self.mission_app(m))
            if m.vars:
                out.append(self.var_server(m))
            for meth in m.methods:
                out.append(self.method_server(m, meth))
        for s in spec.schedulables:
            if s.kind == "sequencerschedulable":
                out.append(self.sequencer_app(s.name, s.missions))
            else:
                out.append(self.schedulable_body(s))
        return out


def _rewrite_expr(e, fetched):
    if isinstance(e, Var) and e.name in fetched:
        return Var("_g_" + e.name)
    if isinstance(e, Un):
        return Un(e.op, _rewrite_expr(e.arg, fetched))
    if isinstance(e, Bin):
        return Bin(e.op, _rewrite_expr(e.left, fetched),
                   _rewrite_expr(e.right, fetched))
    return e


def compile_application(spec: AppSpec, analysis: Analysis = None) -> list:
    """Compile a validated program to its application-side components."""
    if analysis is None:
        analysis = analyze(spec)
    return Compiler(analysis).compile()
