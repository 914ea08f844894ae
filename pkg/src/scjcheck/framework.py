"""Reusable framework model: the mission lifecycle components.

One component per framework role, mirroring the runtime infrastructure of a
Level 2 mission system:

  * ``safelet_fw``: obtains the top sequencer, keeps the global registry of
    admitted schedulables (``checkSchedulable``), and signals
    ``end_of_program`` once the top sequencer is done;
  * ``top_sequencer_fw`` / ``sched_sequencer_fw``: run their missions in the
    order the application supplies over ``getNextMissionCall/Ret``;
  * ``mission_fw``: initialisation (registration window), release barrier
    (``start_schedulable`` before any ``releaseStart``), execution,
    termination (``stop`` every running schedulable, await their ``done``)
    and cleanup;
  * ``periodic_fw`` / ``aperiodic_fw`` / ``oneshot_fw``: timed release
    engines signalling ``overrun`` and ``deadlineMiss``;
  * ``managed_thread_fw``: one-release thread driver.

Application behaviour is attached through the channels compiled by
``scjcheck.appmodel``; locks and thread records are native components from
``scjcheck.sync``.
"""

from __future__ import annotations

from .kernel import (
    Bin, ChannelDecl, Component, Composition, EMPTY_STORE, Lit, Un, Var,
    alpha, any_domain, assign, bool_domain, chaos, choice, id_domain,
    inp, int_domain, ite, out, prefix, rec, recvar, seq, seqs, skip,
)
from . import appmodel
from . import sync
from .sync import EXCEPTION_KINDS, KIND_ILLEGAL_ARGUMENT, KIND_ILLEGAL_STATE

SAFELET_ID = "SafeletFW"


# ---------------------------------------------------------------------------
# Channel table
# ---------------------------------------------------------------------------

def channel_table(a: appmodel.Analysis) -> tuple:
    """All channels of an assembled system, in a deterministic order."""
    spec = a.spec
    lo, hi = a.intrange
    mids = tuple(m.name for m in spec.missions)
    sids = tuple(s.name for s in spec.schedulables)
    top_seqs = tuple(s.name for s in spec.sequencers)
    all_seqs = top_seqs + tuple(s.name for s in spec.schedulables
                                if s.kind == "sequencerschedulable")
    actors = tuple(dict.fromkeys(sids + mids))  # thread-position ids
    srcs = a.srcs
    varnames = tuple(dict.fromkeys(v.name for m in spec.missions for v in m.vars))
    throw_srcs = tuple(dict.fromkeys(
        ("safelet",) + mids + tuple(m + ".init" for m in mids)))

    d_mid = id_domain(mids)
    d_sid = id_domain(sids)
    d_actor = id_domain(actors)
    d_src = id_domain(srcs)
    d_oid = id_domain(mids)
    d_val = any_domain(lo, hi, ())

    chans = [
        ChannelDecl("getSequencerCall", ()),
        ChannelDecl("getSequencerRet", (id_domain(top_seqs, nullable=True),)),
        ChannelDecl("start_sequencer", (id_domain(top_seqs),)),
        ChannelDecl("sequencer_done", (id_domain(top_seqs),)),
        ChannelDecl("getNextMissionCall", (id_domain(all_seqs),)),
        ChannelDecl("getNextMissionRet", (id_domain(all_seqs),
                                          id_domain(mids, nullable=True))),
        ChannelDecl("start_mission", (d_mid,)),
        ChannelDecl("mission_done", (d_mid,)),
        ChannelDecl("initializeCall", (d_mid,)),
        ChannelDecl("initializeRet", (d_mid,)),
        ChannelDecl("register", (d_sid, d_mid)),
        ChannelDecl("checkSchedulable", (d_mid, bool_domain())),
        ChannelDecl("start_schedulable", (d_sid,)),
        ChannelDecl("stop", (d_sid,)),
        ChannelDecl("done", (d_sid,)),
        ChannelDecl("requestTermination", (d_mid, d_src)),
        ChannelDecl("releaseStart", (d_sid,)),
        ChannelDecl("releaseEnd", (d_sid,)),
        ChannelDecl("release", (d_sid, d_src)),
        ChannelDecl("overrun", (d_sid,)),
        ChannelDecl("deadlineMiss", (d_sid,)),
        ChannelDecl("missionCleanupCall", (d_mid,)),
        ChannelDecl("missionCleanupRet", (d_mid,)),
        ChannelDecl("handleEventCall", (d_sid,)),
        ChannelDecl("handleEventRet", (d_sid,)),
        ChannelDecl("runCall", (d_sid,)),
        ChannelDecl("runRet", (d_sid,)),
        ChannelDecl("interruptSelf", (d_sid,)),
        ChannelDecl("throw", (id_domain(EXCEPTION_KINDS), id_domain(throw_srcs))),
        ChannelDecl("end_of_program", ()),
        ChannelDecl("tick", ()),
    ]
    for chan in ("startSyncMeth", "lockAcquired", "endSyncMeth", "waitCall",
                 "waitRet", "notify", "notifyAll"):
        chans.append(ChannelDecl(chan, (d_oid, d_actor, d_src)))
    if varnames:
        chans.append(ChannelDecl("getVar", (d_oid, d_src, id_domain(varnames),
                                            d_val)))
        chans.append(ChannelDecl("setVar", (d_oid, d_src, id_domain(varnames),
                                            d_val)))
    if a.probes:
        chans.append(ChannelDecl("probe", (id_domain(a.probes), d_src)))
    for name in sorted(a.method_sigs):
        params, _ret = a.method_sigs[name]
        pdoms = tuple(bool_domain() if t == "bool" else int_domain(lo, hi)
                      for t in params)
        chans.append(ChannelDecl(name + "Call", (d_oid, d_actor, d_src) + pdoms))
        chans.append(ChannelDecl(name + "Ret", (d_oid, d_actor, d_src, d_val)))
    return tuple(chans)


# ---------------------------------------------------------------------------
# Framework components
# ---------------------------------------------------------------------------

def safelet_fw(sids, top_seqs) -> Component:
    """Top-level driver: fetch the sequencer, run the schedulable registry,
    close the program when the sequencer reports done."""
    branches = []
    for s in sids:
        granted = Un("not", Var("_g_" + s))
        branches.append(prefix("register", (out(s), inp("_m")),
                        prefix("checkSchedulable", (out(Var("_m")), out(granted)),
                               assign("_g_" + s, Lit(True), recvar("SAF")))))
    branches.append(prefix("sequencer_done", (inp("_q"),),
                    prefix("end_of_program", (), skip())))
    main = rec("SAF", choice(*branches))
    term = prefix("getSequencerCall", (),
           prefix("getSequencerRet", (inp("_sid"),),
           ite(Bin("==", Var("_sid"), Lit(None)),
               prefix("throw", (out(KIND_ILLEGAL_ARGUMENT), out("safelet")),
                      chaos()),
               prefix("start_sequencer", (out(Var("_sid")),), main))))
    store = EMPTY_STORE.set_many([("_g_" + s, False) for s in sids])
    alphabet = [alpha("getSequencerCall"), alpha("getSequencerRet"),
                alpha("throw", KIND_ILLEGAL_ARGUMENT, "safelet")]
    alphabet += [alpha("start_sequencer", q) for q in top_seqs]
    alphabet += [alpha("register", s, None) for s in sids]
    alphabet += [alpha("checkSchedulable")]
    alphabet += [alpha("sequencer_done", q) for q in top_seqs]
    alphabet += [alpha("end_of_program")]
    return Component(SAFELET_ID, term, store, tuple(alphabet))


def top_sequencer_fw(seq_id: str, missions) -> Component:
    term = prefix("start_sequencer", (out(seq_id),),
           rec("SQ",
               prefix("getNextMissionCall", (out(seq_id),),
               prefix("getNextMissionRet", (out(seq_id), inp("_m")),
               ite(Bin("==", Var("_m"), Lit(None)),
                   prefix("sequencer_done", (out(seq_id),), skip()),
                   prefix("start_mission", (out(Var("_m")),),
                   prefix("mission_done", (out(Var("_m")),),
                          recvar("SQ"))))))))
    alphabet = [alpha("start_sequencer", seq_id),
                alpha("getNextMissionCall", seq_id),
                alpha("getNextMissionRet", seq_id, None),
                alpha("sequencer_done", seq_id)]
    alphabet += [alpha("start_mission", m) for m in missions]
    alphabet += [alpha("mission_done", m) for m in missions]
    return Component(seq_id + ".fw", term, EMPTY_STORE, tuple(alphabet))


def sched_sequencer_fw(sid: str, missions) -> Component:
    fwid = sid + ".fw"
    fin = prefix("done", (out(sid),), skip())
    ret_then_done = prefix("mission_done", (out(Var("_m")),), fin)
    term = prefix("start_schedulable", (out(sid),),
           rec("SS", choice(
               prefix("stop", (out(sid),), fin),
               prefix("getNextMissionCall", (out(sid),),
               prefix("getNextMissionRet", (out(sid), inp("_m")),
               ite(Bin("==", Var("_m"), Lit(None)),
                   fin,
                   prefix("start_mission", (out(Var("_m")),),
                   choice(
                       prefix("mission_done", (out(Var("_m")),), recvar("SS")),
                       prefix("stop", (out(sid),),
                       choice(
                           prefix("requestTermination",
                                  (out(Var("_m")), out(fwid)),
                                  ret_then_done),
                           ret_then_done))))))))))
    alphabet = [alpha("start_schedulable", sid), alpha("stop", sid),
                alpha("done", sid),
                alpha("getNextMissionCall", sid),
                alpha("getNextMissionRet", sid, None)]
    alphabet += [alpha("start_mission", m) for m in missions]
    alphabet += [alpha("mission_done", m) for m in missions]
    alphabet += [alpha("requestTermination", m, fwid) for m in missions]
    return Component(fwid, term, EMPTY_STORE, tuple(alphabet))


def mission_fw(mid: str, registers) -> Component:
    regs = tuple(dict.fromkeys(registers))
    r = {s: Var("_r_" + s) for s in regs}
    d = {s: Var("_d_" + s) for s in regs}
    all_done = Lit(True)
    for s in regs:
        all_done = Bin("and", all_done, Bin("or", Un("not", r[s]), d[s]))

    cleanup = prefix("missionCleanupCall", (out(mid),),
              prefix("missionCleanupRet", (out(mid),),
              prefix("mission_done", (out(mid),), skip())))

    def passive(cont):
        """Barrier participation plus late termination requests."""
        return ([prefix("releaseStart", (out(s),), cont) for s in regs]
                + [prefix("requestTermination", (out(mid), inp("_q")), cont)])

    await_loop = rec("AWT", ite(
        all_done, cleanup,
        choice(*([prefix("done", (out(s),),
                         assign("_d_" + s, Lit(True), recvar("AWT")))
                  for s in regs] + passive(recvar("AWT"))))))

    stop_seq = await_loop
    for s in reversed(regs):
        name = "STG_" + s
        stage = rec(name, ite(
            Bin("and", r[s], Un("not", d[s])),
            choice(*([prefix("stop", (out(s),), skip()),
                      prefix("done", (out(s),),
                             assign("_d_" + s, Lit(True), skip()))]
                     + passive(recvar(name)))),
            skip()))
        stop_seq = seq(stage, stop_seq)

    exec_loop = rec("EXE", choice(
        *([prefix("done", (out(s),),
                  assign("_d_" + s, Lit(True),
                         ite(all_done, cleanup, recvar("EXE"))))
           for s in regs]
          + [prefix("releaseStart", (out(s),), recvar("EXE")) for s in regs]
          + [prefix("requestTermination", (out(mid), inp("_q")), stop_seq)])))

    start_phase = ite(all_done, cleanup, exec_loop) if regs else cleanup
    for s in reversed(regs):
        start_phase = ite(r[s],
                          prefix("start_schedulable", (out(s),), start_phase),
                          start_phase)

    reg_loop = rec("REG", choice(
        *([prefix("register", (out(s), out(mid)),
                  prefix("checkSchedulable", (out(mid), inp("_ok")),
                  ite(Var("_ok"),
                      assign("_r_" + s, Lit(True), recvar("REG")),
                      prefix("throw", (out(KIND_ILLEGAL_STATE),
                                       out(mid + ".init")),
                             chaos()))))
           for s in regs]
          + [prefix("initializeRet", (out(mid),), start_phase)])))

    term = prefix("start_mission", (out(mid),),
           prefix("initializeCall", (out(mid),), reg_loop))

    store = EMPTY_STORE.set_many(
        [("_r_" + s, False) for s in regs] + [("_d_" + s, False) for s in regs])
    alphabet = [alpha("start_mission", mid), alpha("initializeCall", mid),
                alpha("initializeRet", mid), alpha("checkSchedulable", mid, None),
                alpha("requestTermination", mid, None),
                alpha("missionCleanupCall", mid), alpha("missionCleanupRet", mid),
                alpha("mission_done", mid),
                alpha("throw", KIND_ILLEGAL_STATE, mid + ".init")]
    for s in regs:
        alphabet += [alpha("register", s, mid), alpha("start_schedulable", s),
                     alpha("stop", s), alpha("done", s), alpha("releaseStart", s)]
    return Component(mid + ".fw", term, store, tuple(alphabet))


# -- release engines ---------------------------------------------------------

def _deadline_checks(sid, period, deadline, cont):
    """After a tick during a release: flag overrun/deadlineMiss once each."""
    t = Var("_t")
    checked = cont
    if deadline is not None:
        hit = Bin("and", Bin("==", t, Lit(deadline)), Un("not", Var("_miss")))
        checked = ite(hit,
                      prefix("deadlineMiss", (out(sid),),
                             assign("_miss", Lit(True), checked)),
                      checked)
    if period is not None:
        hit = Bin("and", Bin("==", t, Lit(period)), Un("not", Var("_over")))
        checked = ite(hit,
                      prefix("overrun", (out(sid),),
                             assign("_over", Lit(True), checked)),
                      checked)
    return checked


def _count_tick(cap, cont):
    """Advance the relative counter, saturating at ``cap`` so endlessly
    late releases keep the state space finite."""
    t = Var("_t")
    if cap <= 0:
        return cont
    return ite(Bin("<", t, Lit(cap)), assign("_t", Bin("+", t, Lit(1)), cont),
               cont)


def periodic_fw(sid: str, period: int, deadline=None) -> Component:
    cap = max(period, deadline or 0)
    idle = rec("IDL", ite(
        Bin(">=", Var("_t"), Lit(period)),
        recvar("CYC"),
        choice(prefix("tick", (),
                      assign("_t", Bin("+", Var("_t"), Lit(1)), recvar("IDL"))),
               prefix("stop", (out(sid),),
                      prefix("done", (out(sid),), skip())))))
    busy = rec("BSY", choice(
        prefix("handleEventRet", (out(sid),),
               prefix("releaseEnd", (out(sid),),
                      ite(Var("_stop"),
                          prefix("done", (out(sid),), skip()),
                          idle))),
        prefix("tick", (),
               _count_tick(cap, _deadline_checks(sid, period, deadline,
                                                 recvar("BSY")))),
        prefix("stop", (out(sid),),
               assign("_stop", Lit(True), recvar("BSY")))))
    cycle = rec("CYC",
                prefix("releaseStart", (out(sid),),
                prefix("handleEventCall", (out(sid),),
                       assign("_t", Lit(0),
                       assign("_over", Lit(False),
                       assign("_miss", Lit(False), busy))))))
    term = rec("PRE", choice(
        prefix("start_schedulable", (out(sid),), cycle),
        prefix("tick", (), recvar("PRE"))))
    store = EMPTY_STORE.set_many([("_t", 0), ("_stop", False),
                                  ("_over", False), ("_miss", False)])
    return Component(sid + ".fw", term, store, _engine_alpha(sid), timed=True)


def _engine_alpha(sid, with_release=False):
    alphabet = [alpha("start_schedulable", sid), alpha("releaseStart", sid),
                alpha("releaseEnd", sid), alpha("handleEventCall", sid),
                alpha("handleEventRet", sid), alpha("stop", sid),
                alpha("done", sid), alpha("overrun", sid),
                alpha("deadlineMiss", sid), alpha("tick")]
    if with_release:
        alphabet.append(alpha("release", sid, None))
    return tuple(alphabet)


def aperiodic_fw(sid: str, deadline=None) -> Component:
    cap = deadline or 0
    absorb = rec("ABS", choice(
        prefix("release", (out(sid), inp("_f")), recvar("ABS")),
        prefix("tick", (), recvar("ABS"))))
    fin = prefix("done", (out(sid),), absorb)
    busy = rec("BSY", choice(
        prefix("handleEventRet", (out(sid),),
               prefix("releaseEnd", (out(sid),),
                      ite(Var("_stop"), fin,
                          ite(Var("_pend"),
                              assign("_pend", Lit(False), recvar("REL")),
                              recvar("A0"))))),
        prefix("tick", (),
               _count_tick(cap, _deadline_checks(sid, None, deadline,
                                                 recvar("BSY")))),
        prefix("release", (out(sid), inp("_f")),
               assign("_pend", Lit(True), recvar("BSY"))),
        prefix("stop", (out(sid),),
               assign("_stop", Lit(True), recvar("BSY")))))
    cycle = rec("REL",
                prefix("releaseStart", (out(sid),),
                prefix("handleEventCall", (out(sid),),
                       assign("_t", Lit(0),
                       assign("_miss", Lit(False), busy)))))
    ready = rec("A0", choice(
        prefix("release", (out(sid), inp("_f")), cycle),
        prefix("stop", (out(sid),), fin),
        prefix("tick", (), recvar("A0"))))
    term = rec("PRE", choice(
        prefix("start_schedulable", (out(sid),), ready),
        prefix("release", (out(sid), inp("_f")), recvar("PRE")),
        prefix("tick", (), recvar("PRE"))))
    store = EMPTY_STORE.set_many([("_t", 0), ("_stop", False),
                                  ("_pend", False), ("_miss", False)])
    return Component(sid + ".fw", term, store,
                     _engine_alpha(sid, with_release=True), timed=True)


def oneshot_fw(sid: str, offset=0, deadline=None) -> Component:
    cap = deadline or 0
    offset = offset or 0
    busy = rec("BSY", choice(
        prefix("handleEventRet", (out(sid),),
               prefix("releaseEnd", (out(sid),),
                      prefix("done", (out(sid),), skip()))),
        prefix("tick", (),
               _count_tick(cap, _deadline_checks(sid, None, deadline,
                                                 recvar("BSY")))),
        prefix("stop", (out(sid),), recvar("BSY"))))
    release = prefix("releaseStart", (out(sid),),
              prefix("handleEventCall", (out(sid),),
                     assign("_t", Lit(0), assign("_miss", Lit(False), busy))))
    off = rec("OFF", ite(
        Bin(">=", Var("_t"), Lit(offset)),
        release,
        choice(prefix("tick", (),
                      assign("_t", Bin("+", Var("_t"), Lit(1)), recvar("OFF"))),
               prefix("stop", (out(sid),),
                      prefix("done", (out(sid),), skip())))))
    term = rec("PRE", choice(
        prefix("start_schedulable", (out(sid),), assign("_t", Lit(0), off)),
        prefix("tick", (), recvar("PRE"))))
    store = EMPTY_STORE.set_many([("_t", 0), ("_miss", False)])
    return Component(sid + ".fw", term, store, _engine_alpha(sid), timed=True)


def managed_thread_fw(sid: str) -> Component:
    term = prefix("start_schedulable", (out(sid),),
           prefix("releaseStart", (out(sid),),
           prefix("runCall", (out(sid),),
           rec("W", choice(
               prefix("runRet", (out(sid),),
                      prefix("releaseEnd", (out(sid),),
                             prefix("done", (out(sid),), skip()))),
               prefix("stop", (out(sid),), recvar("W")))))))
    alphabet = (alpha("start_schedulable", sid), alpha("releaseStart", sid),
                alpha("releaseEnd", sid), alpha("runCall", sid),
                alpha("runRet", sid), alpha("stop", sid), alpha("done", sid))
    return Component(sid + ".fw", term, EMPTY_STORE, alphabet)


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------

def assemble_system(spec: appmodel.AppSpec,
                    analysis: appmodel.Analysis = None) -> Composition:
    """Compose the framework, the compiled application, and the native lock
    and thread components into one closed system."""
    if analysis is None:
        analysis = appmodel.analyze(spec)
    a = analysis
    sids = tuple(s.name for s in spec.schedulables)
    top_seqs = tuple(s.name for s in spec.sequencers)

    comps = [safelet_fw(sids, top_seqs), _safelet_app(spec.safelet)]
    if spec.safelet.sequencer is not None:
        comps.append(top_sequencer_fw(
            spec.safelet.sequencer,
            a.sequencer_missions[spec.safelet.sequencer]))
    for m in spec.missions:
        comps.append(mission_fw(m.name, m.registers))
    for s in spec.schedulables:
        if s.kind == "thread":
            comps.append(managed_thread_fw(s.name))
        elif s.kind == "periodic":
            comps.append(periodic_fw(s.name, s.period, s.deadline))
        elif s.kind == "aperiodic":
            comps.append(aperiodic_fw(s.name, s.deadline))
        elif s.kind == "oneshot":
            comps.append(oneshot_fw(s.name, s.offset, s.deadline))
        elif s.kind == "sequencerschedulable":
            comps.append(sched_sequencer_fw(s.name, s.missions))
    comps.extend(appmodel.compile_application(spec, a))
    for oid in a.sync_oids:
        comps.append(sync.object_fw(oid, a.ceilings[oid]))
    for sid in a.thread_sids:
        comps.append(sync.thread_fw(sid, a.scheds[sid].priority))
    return Composition(tuple(comps), channel_table(a), a.intrange)


def _safelet_app(sl: appmodel.SafeletDecl) -> Component:
    term = prefix("getSequencerCall", (),
           prefix("getSequencerRet", (out(Lit(sl.sequencer)),), skip()))
    alphabet = (alpha("getSequencerCall"), alpha("getSequencerRet"))
    return Component(sl.name + ".app", term, EMPTY_STORE, alphabet)


def load_system(text: str) -> Composition:
    """Parse, validate and assemble a program in one step."""
    spec = appmodel.parse_program(text)
    diags = [d for d in appmodel.validate(spec) if d.severity == "error"]
    if diags:
        raise appmodel.ParseError(diags)
    return assemble_system(spec)


# A minimal application exercising the full lifecycle: one mission with one
# periodic handler that requests termination on its first release.
STUB_PROGRAM = """\
safelet Stub { sequencer = Main }
sequencer Main { missions = [M] }
mission M {
  registers = [H]
}
periodic H priority = 1 period = 2 {
  handle {
    requestTermination(M);
  }
}
"""
