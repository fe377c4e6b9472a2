"""Two-layer operational semantics for Async programs.

The local layer evaluates one statement for one small step, producing a trace
fragment and a continuation. The global layer composes fragments under four
rules: Progress (run the local step), Call (activate a synchronously called
procedure), Run (schedule an idle asynchronous callee of the current scope
after its return), and Return (pop a finished scope with nothing left to
schedule). Only Run is nondeterministic; enumeration explores every choice.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from . import syntax
from .syntax import (Assign, AsyncCall, FileOp, If, INIT_NAME, Program,
                     Return, Seq, Skip, Stmt, SyncCall, lookup, seq)
from .trace import (Event, State, Trace, chop, curr_scope, ends_with_event,
                    event_trace, event_triple, max_call_id, pop_ev, push_ev,
                    returned_not_popped, schedule, singleton, NoScope)


class BoundExceeded(Exception):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class TooManyTraces(Exception):
    pass


class MalformedConfiguration(Exception):
    pass


DEFAULT_STEP_BOUND = 10_000
DEFAULT_MAX_TRACES = 10_000

# continuation: None is the empty continuation, otherwise a statement
Continuation = Optional[Stmt]


@dataclass(frozen=True)
class Configuration:
    trace: Trace
    continuation: Continuation

    def __repr__(self):
        k = "o" if self.continuation is None else str(self.continuation)
        return f"<{len(self.trace)} items, K({k})>"


def _cont_seq(stmt: Optional[Stmt], rest: Continuation) -> Continuation:
    """Prepend a statement to a continuation, normalizing the empty case."""
    if stmt is None:
        return rest
    if rest is None:
        return stmt
    return Seq(stmt, rest)


# --- local small-step evaluation ------------------------------------------

def eval_local(stmt: Stmt, state: State, call_id: int, scope_id: int):
    """One local step: (trace fragment starting at the state, continuation)."""
    if isinstance(stmt, Skip):
        return singleton(state), None
    if isinstance(stmt, Assign):
        new = state.update(stmt.var, state.eval(stmt.expr))
        return Trace([state, new]), None
    if isinstance(stmt, Return):
        return event_triple(state, "ret", scope_id), None
    if isinstance(stmt, If):
        if state.eval(stmt.cond) is True:
            return singleton(state), stmt.body
        return singleton(state), None
    if isinstance(stmt, Seq):
        fragment, cont = eval_local(stmt.first, state, call_id, scope_id)
        return fragment, _cont_seq(cont, stmt.rest)
    if isinstance(stmt, SyncCall):
        return event_triple(state, "call", (stmt.name, call_id + 1)), None
    if isinstance(stmt, AsyncCall):
        return event_triple(state, "invoc", (stmt.name, call_id + 1)), None
    if isinstance(stmt, FileOp):
        return event_triple(state, stmt.op, stmt.operand), None
    raise TypeError(f"not a statement: {stmt!r}")


# --- global composition rules ----------------------------------------------

Scheduler = Callable[[Trace], frozenset]


def tree_schedule(trace: Trace) -> frozenset:
    return schedule(trace)


def min_idle_schedule(trace: Trace) -> frozenset:
    """Deterministic variant: the least idle scope, regardless of the tree."""
    from .trace import call_tree
    idle = call_tree(trace).idle
    if not idle:
        return frozenset()
    return frozenset([min(idle, key=lambda s: s[1])])


def all_idle_schedule(trace: Trace) -> frozenset:
    """Fully nondeterministic variant: every idle scope is eligible."""
    from .trace import call_tree
    return call_tree(trace).idle


def step_global(cfg: Configuration, program: Program,
                scheduler: Scheduler = tree_schedule,
                run_blocked=None, id_floor: int = 0) -> list:
    """All successor configurations with the rule that produced each.

    ``run_blocked`` suppresses Run applications at the given scope id, which
    is how the local (procedure-view) semantics is carved out of the global
    one. ``id_floor`` keeps freshly generated call identifiers above ids
    already reserved elsewhere (symbolic updates pre-assign ids).
    """
    trace, cont = cfg.trace, cfg.continuation
    successors = []

    trailing_call = ends_with_event(trace, "call")
    if trailing_call is not None:
        body = lookup(trailing_call.name, program)
        new_trace = chop(trace, event_trace(
            trace.last_state(), push_ev(trailing_call.name, trailing_call.id)))
        return [("Call", Configuration(new_trace, _cont_seq(body, cont)))]

    try:
        scope = curr_scope(trace)
    except NoScope:
        return []
    scope_name, scope_id = scope

    if returned_not_popped(trace, scope_id):
        eligible = scheduler(trace)
        if eligible and not (run_blocked is not None and scope_id == run_blocked):
            state = trace.last_state()
            for (m, id2) in sorted(eligible, key=lambda s: (s[1], s[0])):
                body = lookup(m, program)
                new_trace = chop(trace, event_trace(state, push_ev(m, id2)))
                successors.append(
                    ("Run", Configuration(new_trace, _cont_seq(body, cont))))
            return successors
        if not eligible:
            state = trace.last_state()
            new_trace = chop(trace, event_trace(state, pop_ev(scope_name, scope_id)))
            return [("Return", Configuration(new_trace, cont))]
        return []  # only blocked Run applications remain

    if cont is None:
        return []
    state = trace.last_state()
    fragment, new_cont = eval_local(cont, state,
                                    max(max_call_id(trace), id_floor), scope_id)
    return [("Progress", Configuration(chop(trace, fragment), new_cont))]


def initial_configuration(program: Program) -> Configuration:
    """call(init,0) ** push(init,0) over the default state, body queued."""
    bindings = {name: syntax.DEFAULT_VALUE for name in program.init_decls}
    sigma = State(bindings)
    trace = chop(event_triple(sigma, "call", (INIT_NAME, 0)),
                 event_triple(sigma, "push", (INIT_NAME, 0)))
    return Configuration(trace, program.init_body)


def _explore(start: Configuration, program: Program, step_bound: int,
             max_results: int, scheduler: Scheduler = tree_schedule,
             run_blocked=None, stop=None, id_floor: int = 0):
    """DFS over Run choices; yields the maximal configurations."""
    results = []

    def walk(cfg: Configuration, steps_left: int):
        while True:
            if stop is not None and stop(cfg):
                results.append(cfg)
                return
            succ = step_global(cfg, program, scheduler, run_blocked, id_floor)
            if not succ:
                results.append(cfg)
                if len(results) > max_results:
                    raise TooManyTraces(f"more than {max_results} maximal traces")
                return
            if steps_left <= 0:
                raise BoundExceeded(
                    "step bound exhausted; the program may not terminate",
                    trace=cfg.trace)
            steps_left -= 1
            if len(succ) == 1:
                cfg = succ[0][1]
                continue
            for _, nxt in succ:
                walk(nxt, steps_left)
            return

    walk(start, step_bound)
    return results


def enumerate_traces(program: Program, step_bound: int = DEFAULT_STEP_BOUND,
                     max_traces: int = DEFAULT_MAX_TRACES,
                     scheduler: Scheduler = tree_schedule) -> list:
    """All maximal traces of the program, deterministically ordered.

    Every maximal configuration must have an empty continuation and an empty
    schedule; anything else indicates an interpreter bug.
    """
    configs = _explore(initial_configuration(program), program,
                       step_bound, max_traces, scheduler)
    traces = set()
    for cfg in configs:
        if cfg.continuation is not None or schedule(cfg.trace):
            raise MalformedConfiguration(
                f"maximal configuration is not final: {cfg!r}")
        traces.add(cfg.trace)
    return sorted(traces, key=Trace.sort_key)


def _suffix(full: Trace, base: Trace) -> Trace:
    """The suffix t with full == base ** t (shares the boundary state)."""
    k = len(base)
    if full.items[:k] != base.items:
        raise ValueError("not an extension of the base trace")
    return Trace(full.items[k - 1:])


def eval_global(stmt: Optional[Stmt], base: Trace, program: Program,
                step_bound: int = DEFAULT_STEP_BOUND,
                max_traces: int = DEFAULT_MAX_TRACES) -> list:
    """Global semantics of a statement: suffixes of the maximal extensions
    with an empty continuation and nothing left to schedule."""
    configs = _explore(Configuration(base, stmt), program, step_bound, max_traces)
    out = set()
    for cfg in configs:
        if cfg.continuation is None and not schedule(cfg.trace):
            out.add(_suffix(cfg.trace, base))
    return sorted(out, key=Trace.sort_key)


def eval_local_big(stmt: Optional[Stmt], base: Trace, program: Program,
                   step_bound: int = DEFAULT_STEP_BOUND,
                   max_traces: int = DEFAULT_MAX_TRACES) -> list:
    """Local big-step semantics: like the global one, but the asynchronous
    callees of the current scope are never scheduled (inner synchronous
    calls still resolve fully)."""
    scope = curr_scope(base)
    configs = _explore(Configuration(base, stmt), program, step_bound,
                       max_traces, run_blocked=scope[1])
    out = set()
    for cfg in configs:
        if cfg.continuation is None:
            out.add(_suffix(cfg.trace, base))
    return sorted(out, key=Trace.sort_key)


# --- file correctness --------------------------------------------------------

@dataclass(frozen=True)
class FileVerdict:
    correct: bool
    violation_position: Optional[int] = None
    file: Optional[str] = None

    def __bool__(self):
        return self.correct


def check_file_correct(trace: Trace) -> FileVerdict:
    """Every read/write/close must follow an open with no close in between."""
    open_files = set()
    for pos, item in enumerate(trace):
        if not isinstance(item, Event):
            continue
        if item.tag == "open":
            open_files.add(item.file)
        elif item.tag in ("read", "write"):
            if item.file not in open_files:
                return FileVerdict(False, pos, item.file)
        elif item.tag == "close":
            if item.file not in open_files:
                return FileVerdict(False, pos, item.file)
            open_files.discard(item.file)
    return FileVerdict(True)
