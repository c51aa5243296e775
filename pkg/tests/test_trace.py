import pytest
from hypothesis import given, strategies as st

from fairsched.lang import BinOp, Bool, Int, Not, Var
from fairsched.trace import (
    DONE, EMPTY, STAR, ConcretizationError, FreshClash, JunctionError,
    NotEvaluated, State, Trace, call_ev, callr_ev, chop, comp_ev, compr_ev,
    concretize, concretize_state, conditioned, eval_expr, insert_event,
    pc_consistent, serialize, show_item, wf_coop, wf_spawn,
)

Y_POS = BinOp(">", Var("Y"), Int(0))


@pytest.fixture
def sigma():
    # x is bound to Y + 42 with Y symbolic
    return State({"x": BinOp("+", Var("Y"), Int(42)), "Y": STAR})


@pytest.fixture
def tau(sigma):
    return conditioned({Y_POS}, [sigma, sigma.update("w", Int(17))])


def test_symbolic_state(sigma):
    assert sigma.symb() == {"Y"}
    assert not sigma.is_concrete()
    assert eval_expr(sigma, Var("x")) == BinOp("+", Var("Y"), Int(42))


def test_event_insertion_with_fresh_variable(sigma, tau):
    ev = insert_event(sigma, comp_ev(Var("Z")), ["Z"])
    sz = sigma.update("Z", STAR)
    assert ev.items() == [sigma, comp_ev(Var("Z")), sz]
    rest = conditioned(tau.pc, [sz, sz.update("w", Int(17))])
    joined = chop(conditioned((), ev.items()), rest)
    assert joined.pc == {Y_POS}
    assert joined.tau.items() == [sigma, comp_ev(Var("Z")), sz, State({**sz, "w": Int(17)})]


def test_insertion_rejects_bound_fresh_name(sigma):
    with pytest.raises(FreshClash):
        insert_event(sigma, comp_ev(Var("x")), ["x"])


def test_concretisation(sigma, tau):
    rho = {"Y": Int(3)}
    concrete = concretize_state(rho, sigma)
    assert concrete == State({"x": Int(45), "Y": Int(3)})
    out = concretize(rho, tau)
    assert out.pc == frozenset()  # consistent conditions are dropped
    assert out.tau.items() == [concrete, concrete.update("w", Int(17))]


def test_concretisation_keeps_inconsistent_condition(tau):
    out = concretize({"Y": Int(-1)}, tau)
    assert out.pc == {Bool(False)}
    assert not out.consistent


def test_concretisation_needs_every_symbol(sigma):
    with pytest.raises(ConcretizationError):
        concretize_state({}, sigma)


def test_unevaluated_path_condition():
    with pytest.raises(NotEvaluated):
        pc_consistent({Y_POS})
    assert pc_consistent(set())
    assert not pc_consistent({Bool(True), Bool(False)})


def test_chop_merges_junction_state():
    a = State({"x": Int(1)})
    b = State({"x": Int(2)})
    out = chop(conditioned((), [a]), conditioned((), [a, b]))
    assert out.tau.items() == [a, b]


def test_chop_needs_extending_junction():
    a, b = State({"x": Int(1)}), State({"x": Int(2)})
    with pytest.raises(JunctionError):
        chop(conditioned((), [a]), conditioned((), [b]))
    with pytest.raises(JunctionError):
        chop(conditioned((), []), conditioned((), [a]))


def test_serialization_format():
    s = State({"b": Int(2), "a": Bool(True)})
    assert show_item(s) == "S {a=true,b=2}"
    assert show_item(call_ev("m", Int(1))) == "E callEv(m,1)"
    assert serialize([s, DONE, s]) == ["S {a=true,b=2}", "E doneEv()", "S {a=true,b=2}"]


def test_persistent_trace_operations():
    s0, s1 = State({"x": Int(0)}), State({"x": Int(1)})
    t = Trace.of([s0])
    t2 = t.append(call_ev("m", Int(0))).append(s1)
    assert len(t) == 1 and len(t2) == 3
    assert t2.prefix(1) is t
    assert t2.since(1) == [call_ev("m", Int(0)), s1]
    assert t2.last == s1 and t2.first == s0
    assert t2.last_event == call_ev("m", Int(0))
    assert len(EMPTY) == 0


def test_spawn_wellformedness():
    s = State({})
    good = [s, call_ev("m", Int(1)), s, callr_ev("m", Int(1)), s]
    bad = [s, callr_ev("m", Int(1)), s]
    assert wf_spawn(good) and not wf_spawn(bad)
    assert Trace.of(good).stats.wf_spawn and not Trace.of(bad).stats.wf_spawn


def test_coop_wellformedness():
    s = State({})
    call = call_ev(Int(0), "m", Int(1))
    react = callr_ev(Int(0), "m", Int(1))
    assert wf_coop([s, call, s, react, s, comp_ev(Int(1)), s, compr_ev(Int(1)), s])
    assert not wf_coop([s, call, s, call, s])           # task id reused
    assert not wf_coop([s, react, s])                   # reaction before call
    assert not wf_coop([s, compr_ev(Int(1)), s])        # join before completion
    assert not wf_coop([s, call, s, react, s, react, s])


_coop_events = st.sampled_from([
    call_ev(Int(0), "m", Int(1)), call_ev(Int(0), "m", Int(2)),
    callr_ev(Int(0), "m", Int(1)), callr_ev(Int(0), "m", Int(2)),
    comp_ev(Int(1)), compr_ev(Int(1)), compr_ev(Int(2)),
])
_spawn_events = st.sampled_from([
    call_ev("m", Int(0)), call_ev("m", Int(1)),
    callr_ev("m", Int(0)), callr_ev("m", Int(1)),
])


def _interleave(evs):
    s = State({"x": Int(0)})
    items = [s]
    for ev in evs:
        items += [ev, s]
    return items


@given(st.lists(_coop_events, max_size=12))
def test_incremental_coop_stats_agree_with_scanner(evs):
    items = _interleave(evs)
    assert Trace.of(items).stats.wf_coop == wf_coop(items)


@given(st.lists(_spawn_events, max_size=12))
def test_incremental_spawn_stats_agree_with_scanner(evs):
    items = _interleave(evs)
    assert Trace.of(items).stats.wf_spawn == wf_spawn(items)


def test_negated_condition_evaluates():
    assert eval_expr(State({"b": Bool(False)}), Not(Var("b"))) == Bool(True)
