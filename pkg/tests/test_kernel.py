"""Unit tests for the process-algebra kernel: terms, stores, reduction
and single-component transitions."""

import pytest

from scjcheck.kernel import (
    Bin, ChannelDecl, Component, Composition, EMPTY_STORE, Lit,
    ModelRangeFault, TICK, Var, alpha, assign, bool_domain, choice,
    component_steps, eval_expr, guard, id_domain, initials, inp, int_domain,
    is_divergent, is_terminated, ite, out, parse_event, prefix, rec, recvar,
    reduce_term, render_value, seq, skip, stop, chaos, wait,
)

INTR = (0, 7)
CHANS = {
    "a": ChannelDecl("a", ()),
    "b": ChannelDecl("b", (int_domain(0, 7),)),
    TICK.channel: ChannelDecl(TICK.channel, ()),
}


def comp(term, store=EMPTY_STORE, alphabet=(alpha("a"), alpha("b"))):
    return Component("c", term, store, alphabet)


def labels(c):
    return sorted(str(t.label) for t in component_steps(c, CHANS, INTR)
                  if t.label is not None)


class TestStore:
    def test_set_returns_new_store(self):
        s = EMPTY_STORE.set("x", 3)
        assert s.get("x") == 3
        assert not EMPTY_STORE.has("x")

    def test_set_many(self):
        s = EMPTY_STORE.set_many({"x": 1, "y": True})
        assert s.get("x") == 1 and s.get("y") is True

    def test_equality_is_structural(self):
        assert EMPTY_STORE.set("x", 1) == EMPTY_STORE.set("x", 1)


class TestExpr:
    def test_arith_and_compare(self):
        st = EMPTY_STORE.set("x", 3)
        assert eval_expr(Bin("+", Var("x"), Lit(2)), st, INTR) == 5
        assert eval_expr(Bin("<", Var("x"), Lit(2)), st, INTR) is False

    def test_range_fault(self):
        with pytest.raises(ModelRangeFault):
            eval_expr(Bin("+", Lit(7), Lit(1)), EMPTY_STORE, INTR)

    def test_render_value(self):
        assert render_value(True) == "true"
        assert render_value(None) == "null"
        assert render_value(3) == "3"


class TestReduction:
    def test_assign_then_guard(self):
        t = assign("x", Lit(2), guard(Bin("==", Var("x"), Lit(2)),
                                      prefix("a", (), skip())))
        steps = component_steps(comp(t), CHANS, INTR)
        # The assignment is a tau; after it the guard opens and offers a.
        (tau,) = [s for s in steps if s.label is None]
        assert tau.store.get("x") == 2
        assert labels(comp(tau.term, tau.store)) == ["a()"]

    def test_false_guard_blocks(self):
        t = guard(Lit(False), prefix("a", (), skip()))
        term, store = reduce_term(t, EMPTY_STORE, INTR)
        assert term == stop()
        assert labels(comp(term, store)) == []

    def test_ite(self):
        t = ite(Lit(True), prefix("a", (), skip()),
                prefix("b", (out(Lit(0)),), skip()))
        assert labels(comp(t)) == ["a()"]

    def test_seq_skips_through(self):
        t = seq(skip(), prefix("a", (), skip()))
        assert labels(comp(t)) == ["a()"]

    def test_recursion_unfolds(self):
        t = rec("X", prefix("a", (), recvar("X")))
        (step,) = component_steps(comp(t), CHANS, INTR)
        assert str(step.label) == "a()"
        # Taking the step reproduces the same offer: the loop is stable.
        assert labels(comp(step.term, step.store)) == ["a()"]


class TestComponentSteps:
    def test_choice_offers_both(self):
        t = choice(prefix("a", (), skip()), prefix("b", (out(Lit(1)),), skip()))
        assert labels(comp(t)) == ["a()", "b(1)"]

    def test_output_binds_concrete_value(self):
        t = assign("x", Lit(4), prefix("b", (out(Var("x")),), skip()))
        steps = component_steps(comp(t), CHANS, INTR)
        (tau,) = [s for s in steps if s.label is None]
        assert labels(comp(tau.term, tau.store)) == ["b(4)"]

    def test_input_ranges_over_domain(self):
        t = prefix("b", (inp("v"),), skip())
        # A lone component's input expands over the declared domain.
        assert labels(comp(t)) == ["b(%d)" % i for i in range(8)]

    def test_input_binds_received_value(self):
        t = prefix("b", (inp("v"),), guard(Bin("==", Var("v"), Lit(5)),
                                           prefix("a", (), skip())))
        steps = {str(s.label): s for s in component_steps(comp(t), CHANS, INTR)}
        after = steps["b(5)"]
        assert labels(comp(after.term, after.store)) == ["a()"]
        blocked = steps["b(4)"]
        assert labels(comp(blocked.term, blocked.store)) == []

    def test_terminated_and_divergent(self):
        assert is_terminated(comp(skip()))
        assert not is_terminated(comp(stop()))
        assert is_divergent(comp(chaos()))
        assert not is_divergent(comp(skip()))

    def test_wait_offers_only_tick(self):
        c = Component("c", wait(2), EMPTY_STORE, (alpha(TICK.channel),))
        evs = [str(s.label) for s in component_steps(c, CHANS, INTR)]
        assert evs == [str(TICK)]

    def test_wait_zero_is_skip(self):
        assert is_terminated(comp(wait(0)))


class TestEvents:
    def test_parse_render_roundtrip(self):
        for text in ("a()", "b(3)", "c(M,true,null)"):
            assert str(parse_event(text)) == text

    def test_event_key_ordering_is_total(self):
        evs = [parse_event(t) for t in ("b(3)", "a()", "b(1)")]
        assert [str(e) for e in sorted(evs, key=lambda e: e.key())] \
            == ["a()", "b(1)", "b(3)"]


class TestDomains:
    def test_int_domain(self):
        d = int_domain(0, 3)
        assert d.contains(2) and not d.contains(4)

    def test_id_domain_nullable(self):
        d = id_domain(("M",), nullable=True)
        assert d.contains("M") and d.contains(None) and not d.contains("N")

    def test_bool_domain(self):
        assert bool_domain().contains(True)


def test_composition_sync_map():
    left = Component("l", prefix("a", (), skip()), EMPTY_STORE, (alpha("a"),))
    right = Component("r", prefix("a", (), skip()), EMPTY_STORE, (alpha("a"),))
    sys = Composition((left, right), tuple(CHANS.values()), INTR)
    assert sys.sync_map()["a"] == {"l", "r"}
    assert sorted(str(e) for e in initials(left, CHANS, INTR)) == ["a()"]
