import random

from hypothesis import given, settings, strategies as st

from fairsched.corpus import confluent_program, named
from fairsched.lang import Int, Level, flatten, parse_program
from fairsched.sched import Halt
from fairsched.sos_ref import (
    diff_sos, enabled_tasks, initial_sos_config, is_quiescent_sos, sos_run,
    sos_successors, while_step,
)
from fairsched.trace import State


def test_while_step_unrolls_loops():
    p = parse_program("{ while x < 1 { x := x + 1 } }", Level.WHILE)
    stmts, store = flatten(p.main), State({"x": Int(0)})
    stmts, store = while_step(stmts, store)   # unroll
    stmts, store = while_step(stmts, store)   # test holds
    stmts, store = while_step(stmts, store)   # body
    assert store["x"] == Int(1)
    stmts, store = while_step(stmts, store)   # unroll again
    stmts, store = while_step(stmts, store)   # test fails
    assert stmts == ()


def test_cooperative_run_interleaves_at_yields():
    rec = sos_run(named("example1"), 30)
    rules = [s.rule for s in rec.steps]
    assert rules[:3] == ["SPAWNSTART", "YIELDSUSPEND", "SCHEDULESIMPLE"]
    assert rec.final_store()["j"] == Int(2)
    main_yields = rec.yield_points()[0]
    assert [s.seq for s in main_yields] == [7]


def test_mutual_await_deadlocks():
    rec = sos_run(named("deadlock"))
    assert rec.outcome is Halt.DEADLOCK
    assert [s.rule for s in rec.steps][-3:] == ["SCHEDULEAWAITWAIT"] * 3


def test_task_map_offers_every_waiting_task():
    p = named("example1")
    c = initial_sos_config(p)
    (spawn,) = sos_successors(c, p)
    (yield_,) = sos_successors(spawn.config, p)
    idle = yield_.config
    assert is_quiescent_sos(idle)
    assert enabled_tasks(idle, p) == {0, 1}


def test_false_guard_is_not_enabled():
    p = parse_program("m(x) { :: false; skip } { spawn(m, 0) }", Level.GUARD)
    c = initial_sos_config(p)
    (spawn,) = sos_successors(c, p)
    (end,) = sos_successors(spawn.config, p)
    assert enabled_tasks(end.config, p) == frozenset()
    assert sos_run(p).outcome is Halt.DEADLOCK


def test_diff_lines():
    assert diff_sos(named("example7")).lines() == [
        "SOS outcome=terminated store={x=1,y=2}",
        "LAGC outcome=terminated store={x=1,y=2}",
        "DIFF level=while stores=equal yields=n/a",
    ]
    d = diff_sos(named("example1"), 200)
    assert d.ok and d.lines()[-1] == "DIFF level=coop stores=truncated yields=equal"


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), level=st.sampled_from([Level.SPAWN, Level.GUARD, Level.COOP]))
def test_confluent_programs_agree(seed, level):
    p = confluent_program(random.Random(seed), level)
    d = diff_sos(p, 2000)
    assert d.complete
    assert d.ok, d.lines()
