import random

import pytest

from catverify import parse_program
from catverify.interp import (BoundExceeded, Configuration, check_file_correct,
                              enumerate_traces, eval_global, eval_local,
                              eval_local_big, initial_configuration,
                              step_global)
from catverify.syntax import (Assign, AsyncCall, BinOp, If, Lit, Return, Seq,
                              Skip, SyncCall, Var, seq)
from catverify.trace import Event, State, Trace, chop, event_triple, singleton

S0 = State({})


# --- local small steps ------------------------------------------------------

def test_local_skip():
    assert eval_local(Skip(), S0, 0, 0) == (singleton(S0), None)


def test_local_assign_increments():
    s = State({"x": 0})
    frag, cont = eval_local(Assign("x", BinOp("+", Var("x"), Lit(1))), s, 0, 0)
    assert frag == Trace([s, State({"x": 1})]) and cont is None


def test_local_sync_call_uses_next_id():
    frag, cont = eval_local(SyncCall("m"), S0, 3, 0)
    assert frag == Trace([S0, Event("call", name="m", id=4), S0])
    assert cont is None


def test_local_async_call():
    frag, _ = eval_local(AsyncCall("m"), S0, 0, 0)
    assert frag[1] == Event("invoc", name="m", id=1)


def test_local_return_uses_scope_id():
    frag, _ = eval_local(Return(), S0, 9, 2)
    assert frag[1] == Event("ret", id=2)


def test_local_if_branches():
    body = Assign("x", Lit(1))
    frag, cont = eval_local(If(Lit(True), body), S0, 0, 0)
    assert frag == singleton(S0) and cont == body
    frag, cont = eval_local(If(Lit(False), body), S0, 0, 0)
    assert frag == singleton(S0) and cont is None


def test_local_seq_defers_tail():
    frag, cont = eval_local(Seq(Skip(), Return()), S0, 0, 0)
    assert frag == singleton(S0) and cont == Return()


def test_local_file_ops():
    frag, _ = eval_local(
        parse_program('{ open("a"); skip }').init_body, S0, 0, 0)
    assert frag[1] == Event("open", file="a")


def test_local_determinism():
    stmt = Seq(Assign("x", Lit(2)), Return())
    assert eval_local(stmt, S0, 1, 1) == eval_local(stmt, S0, 1, 1)


# --- global steps -------------------------------------------------------------

def test_step_call_prepends_body(fanout_program):
    cfg = initial_configuration(fanout_program)
    # progress over m() emits the call event
    [(rule, cfg2)] = step_global(cfg, fanout_program)
    assert rule == "Progress"
    assert cfg2.trace[-2] == Event("call", name="m", id=1)
    [(rule, cfg3)] = step_global(cfg2, fanout_program)
    assert rule == "Call"
    assert cfg3.trace[-2] == Event("push", name="m", id=1)
    # the body of m now heads the continuation
    from catverify.syntax import seq_items
    assert isinstance(cfg3.continuation, Seq)
    assert seq_items(cfg3.continuation)[0] == AsyncCall("m1")


def test_step_run_branches_like_fig3(fanout_program):
    from tests.test_trace import fig3_prefix
    prefix = fig3_prefix(fanout_program)
    succ = step_global(Configuration(prefix, None), fanout_program)
    assert sorted(r for r, _ in succ) == ["Run", "Run"]
    pushed = sorted(c.trace[-2].scope() for _, c in succ)
    assert pushed == [("m3", 4), ("m4", 5)]


def test_step_return_pops():
    t = chop(chop(event_triple(S0, "call", ("init", 0)),
                  event_triple(S0, "push", ("init", 0))),
             event_triple(S0, "ret", 0))
    [(rule, cfg)] = step_global(Configuration(t, None), parse_program("{ skip }"))
    assert rule == "Return"
    assert cfg.trace[-2] == Event("pop", name="init", id=0)


# --- enumeration -----------------------------------------------------------------

def test_enumeration_counts(files_program, fanout_program):
    assert len(enumerate_traces(files_program)) == 1
    assert len(enumerate_traces(fanout_program)) == 4


def test_trivial_program_trace():
    p = parse_program("{ x; skip }")
    [t] = enumerate_traces(p)
    sd = State({"x": 0})
    events = t.events()
    assert [e.tag for e in events] == ["call", "push", "ret", "pop"]
    assert events[0] == Event("call", name="init", id=0)
    assert events[2] == Event("ret", id=0)
    assert events[3] == Event("pop", name="init", id=0)
    assert t.first() == sd


def test_fanout_scheduling_bullets(fanout_program):
    def pos(t, tag, **kw):
        for i, it in enumerate(t):
            if isinstance(it, Event) and it.tag == tag and all(
                    getattr(it, k) == v for k, v in kw.items()):
                return i
        raise AssertionError(f"{tag} {kw} not in trace")

    for t in enumerate_traces(fanout_program):
        # m1, m2 activate only after m's scope returned
        assert pos(t, "push", name="m1", id=2) > pos(t, "ret", id=1)
        assert pos(t, "push", name="m2", id=3) > pos(t, "ret", id=1)
        # m3, m4 activate only after m1's scope returned
        assert pos(t, "push", name="m3", id=4) > pos(t, "ret", id=2)
        assert pos(t, "push", name="m4", id=5) > pos(t, "ret", id=2)
        # when m1 runs first, its children run before m2
        if pos(t, "push", name="m1", id=2) < pos(t, "push", name="m2", id=3):
            assert pos(t, "push", name="m3", id=4) < pos(t, "push", name="m2", id=3)
            assert pos(t, "push", name="m4", id=5) < pos(t, "push", name="m2", id=3)


def test_every_maximal_trace_ends_with_init_pop(files_program, fanout_program):
    from catverify.trace import schedule
    for program in (files_program, fanout_program):
        for t in enumerate_traces(program):
            assert t[-2] == Event("pop", name="init", id=0)
            assert schedule(t) == frozenset()


def test_sync_recursion_exceeds_bound():
    p = parse_program("m(){ m(); return } { m() }")
    with pytest.raises(BoundExceeded):
        enumerate_traces(p, step_bound=500)


def test_prefix_closure_on_fanout(fanout_program):
    # every intermediate configuration extends to some maximal trace
    maximal = enumerate_traces(fanout_program)
    seen = [initial_configuration(fanout_program)]
    frontier = list(seen)
    while frontier:
        cfg = frontier.pop()
        for _, nxt in step_global(cfg, fanout_program):
            prefix = nxt.trace.items
            assert any(t.items[:len(prefix)] == prefix for t in maximal)
            frontier.append(nxt)


# --- eval_global / eval_local_big ---------------------------------------------

def _scope_base(program, name="init"):
    return initial_configuration(program).trace


def test_eval_global_return_then_pop():
    p = parse_program("{ skip }")
    base = _scope_base(p)
    suffixes = eval_global(Return(), base, p)
    sd = State({})
    expected = chop(event_triple(sd, "ret", 0),
                    event_triple(sd, "pop", ("init", 0)))
    assert suffixes == [expected]


def test_eval_global_skip_progress_only():
    p = parse_program("{ skip }")
    base = _scope_base(p)
    assert eval_global(Skip(), base, p) == [singleton(State({}))]


def test_eval_global_do_body(files_program):
    # position the machine right after push(do, 1)
    [t] = enumerate_traces(files_program)
    idx = next(i for i, it in enumerate(t)
               if isinstance(it, Event) and it.tag == "push" and it.id == 1)
    base = Trace(t.items[:idx + 2])
    from catverify.syntax import lookup
    [suffix] = eval_global(lookup("do", files_program), base, files_program)
    tags = [e.tag for e in suffix.events()]
    assert tags == ["open", "invoc", "call", "push", "write", "ret", "pop",
                    "ret", "push", "close", "ret", "pop", "pop"]


def test_eval_local_big_suppresses_run(fanout_program):
    base = _scope_base(fanout_program)
    stmt = seq(AsyncCall("m1"), Return())
    [suffix] = eval_local_big(stmt, base, fanout_program)
    tags = [e.tag for e in suffix.events()]
    assert tags == ["invoc", "ret"]  # no push of m1 at the outer scope


def _random_fragment(rng, callees):
    from catverify.gen import _gen_body
    stmts = _gen_body(rng, [], rng.randint(1, 3), file_ops=True,
                      force_file_safe=False)
    for name in callees:
        if rng.random() < 0.7:
            stmts.insert(rng.randrange(len(stmts) + 1), AsyncCall(name))
    return seq(*stmts)


def _glue(base, suffix):
    return Trace(base.items + suffix.items[1:])


def test_composition_of_local_and_global_semantics():
    # statements without synchronous calls: the global run of s; s' factors
    # through the local run of s (200 random instances)
    from catverify.gen import gen_program
    rng = random.Random(23)
    checked = 0
    while checked < 200:
        program = gen_program(rng, max_procs=3, max_stmts=3)
        names = program.proc_names()
        base = _scope_base(program)
        s = _random_fragment(rng, names[:2])
        s_prime = seq(*( [Assign("x", Lit(7)), Return()] ))
        try:
            lhs = eval_global(seq(s, s_prime), base, program, step_bound=4000)
        except BoundExceeded:
            continue
        rhs = set()
        for local_suffix in eval_local_big(s, base, program, step_bound=4000):
            mid = _glue(base, local_suffix)
            for global_suffix in eval_global(s_prime, mid, program,
                                             step_bound=4000):
                rhs.add(chop(local_suffix, global_suffix))
        assert set(lhs) == rhs, (program, s)
        checked += 1


def test_special_case_global_equals_local_then_empty():
    from catverify.gen import gen_program
    rng = random.Random(29)
    checked = 0
    while checked < 200:
        program = gen_program(rng, max_procs=3, max_stmts=3)
        base = _scope_base(program)
        s = _random_fragment(rng, program.proc_names()[:2])
        try:
            lhs = eval_global(s, base, program, step_bound=4000)
        except BoundExceeded:
            continue
        rhs = set()
        for local_suffix in eval_local_big(s, base, program, step_bound=4000):
            mid = _glue(base, local_suffix)
            for tail in eval_global(None, mid, program, step_bound=4000):
                rhs.add(chop(local_suffix, tail))
        assert set(lhs) == rhs
        checked += 1


# --- file correctness ---------------------------------------------------------

def test_file_correct_write_before_open():
    t = Trace([S0, Event("write", file="a"), S0])
    verdict = check_file_correct(t)
    assert not verdict.correct and verdict.violation_position == 1


def test_file_correct_close_intervenes():
    t = Trace([S0, Event("open", file="f"), S0, Event("close", file="f"), S0,
               Event("read", file="f"), S0])
    verdict = check_file_correct(t)
    assert not verdict.correct and verdict.violation_position == 5


def test_file_correct_files_program(files_program):
    [t] = enumerate_traces(files_program)
    assert check_file_correct(t).correct


def test_enumeration_deterministic(fanout_program):
    a = enumerate_traces(fanout_program)
    b = enumerate_traces(fanout_program)
    assert a == b
