"""Acceptance criteria 1-9.

Each test records one PASS/FAIL line that pytest prints in its terminal
summary. Running this file directly prints the same lines:

    python3 tests/test_acceptance.py
"""

from __future__ import annotations

import random
import sys
from collections import Counter
from functools import lru_cache
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

from conftest import record  # noqa: E402

from fairsched.corpus import confluent_program, named, random_program  # noqa: E402
from fairsched.fairness import (  # noqa: E402
    SILENT_RULES, avoid_task, check_fairness, check_run, graph_lasso,
    map_conts, monitor_distance, strip_doneEv, verify_embedding,
)
from fairsched.lagc_global import explore  # noqa: E402
from fairsched.lang import Assign, BinOp, Guard, Int, Level, Not, Var, flatten, parse_program  # noqa: E402
from fairsched.local_eval import K, NameSupply, val  # noqa: E402
from fairsched.sched import (  # noqa: E402
    CoopSchedConfig, Halt, Marker, alpha_normalize, final_store, run,
)
from fairsched.sos_ref import diff_sos  # noqa: E402
from fairsched.trace import (  # noqa: E402
    STAR, Event, State, Trace, as_bool, chop, comp_ev, concretize, concretize_state,
    conditioned, eval_expr, initial_state, insert_event,
)

STEPS = 1000
N_SPAWN = 100
N_COOP = 50
CORPUS_SEED = 7


@lru_cache(maxsize=None)
def programs(level: Level, confluent: bool = False) -> tuple:
    n = N_COOP if level == Level.COOP else N_SPAWN
    if level == Level.WHILE and confluent:
        return ()
    gen = confluent_program if confluent else random_program
    rng = random.Random(CORPUS_SEED + (1000 if confluent else 0))
    return tuple(gen(rng, level) for _ in range(n))


@lru_cache(maxsize=None)
def runs(level: Level, confluent: bool = False) -> tuple:
    return tuple(run(p, STEPS) for p in programs(level, confluent))


def full_corpus() -> list:
    recs = []
    for level in Level:
        recs += runs(level) + runs(level, True)
    recs += [run(named(n), 2000) for n in ("example1", "example8", "deadlock", "infinite-local")]
    return recs


# --------------------------------------------------------------- criterion 1


def check_1():
    p = named("example1")
    rec = run(p, 500)
    verdict = check_run(rec, "quiescent")
    j_sid = flatten(p.main)[-1].sid
    # a rule-22 step whose active task had j := 2 at its head
    j_steps = [i for i, (c, r) in enumerate(zip(rec.configs, rec.rules))
               if r == "22" and c.active is not None and c.active.head is not None
               and c.active.head.sid == j_sid]
    g = explore(p, 8)
    lasso = graph_lasso(g, p, avoid_task(0))
    weak = check_fairness(lasso, "weak", p)
    quiet = check_fairness(lasso, "quiescent", p)
    expected = K((flatten(p.main)[-1],), 0).identity
    ok = (verdict.fair and len(j_steps) == 1 and j_steps[0] < 500
          and weak.fair and quiet.violation and quiet.witness == expected)
    detail = (f"scheduler quiescent={verdict.result}, j := 2 at step {j_steps[0] + 1 if j_steps else None}; "
              f"adversarial lasso weak={weak.result} quiescent={quiet.result} witness={quiet.witness}")
    return ok, detail


# --------------------------------------------------------------- criterion 2


def check_2():
    p = named("example8")
    rec = run(p, 10_000)
    guarded = {s.sid for s in p.statements() if isinstance(s, Guard)}
    guarded_bodies = {b.sid for s in p.statements() if isinstance(s, Guard) for b in flatten(s.body)}
    fired = 0
    for c, r in zip(rec.configs, rec.rules):
        head = c.q[0] if c.q else None
        if r == "6" and head is not None and head.head is not None and head.head.sid in guarded:
            fired += 1
    body_left = any(k.head is not None and k.head.sid in guarded_bodies
                    for c in rec.configs for k in c.q)
    store = final_store(rec.final, p)
    weak, strong = check_run(rec, "weak"), check_run(rec, "strong")
    ok = (rec.outcome is Halt.BUDGET and len(rec) == 10_000 and fired == 0 and not body_left
          and store["r0"] == Int(0) and store["r1"] == Int(0)
          and weak.fair and strong.violation and strong.witness.sids[0] in guarded_bodies)
    return ok, (f"{len(rec)} steps, guards passed {fired} times; "
                f"weak={weak.result} strong={strong.result} witness={strong.witness}")


# --------------------------------------------------------------- criterion 3


def _applicable_spawn_rules(c) -> set:
    """Premises of rules (6)-(8) computed directly from the configuration."""
    open_calls = any(n > 0 for _, n in c.sh.stats.spawn_open)
    head = c.q[0] if c.q else None
    out = set()
    if open_calls:
        out.add("7")
    if not open_calls and head is not None and not head.empty:
        out.add("6")
    if not open_calls and head is not None and head.empty:
        out.add("8")
    return out


def check_3():
    recs = runs(Level.SPAWN)
    bad_steps = 0
    for rec in recs:
        for i, c in enumerate(rec.configs):
            rules = _applicable_spawn_rules(c)
            if i < len(rec.rules):
                bad_steps += rules != {rec.rules[i]}
            else:
                bad_steps += len(rules) != (0 if rec.outcome is Halt.TERMINATED else 1)
    renamed = sum(alpha_normalize(rec.dump()) != alpha_normalize(run(rec.program, STEPS, 9173).dump())
                  for rec in recs)
    ok = len(recs) >= 100 and bad_steps == 0 and renamed == 0
    steps = sum(len(r) for r in recs)
    return ok, (f"{len(recs)} programs, {steps} steps, {bad_steps} steps without a unique rule, "
                f"{renamed} runs not alpha-equivalent across seeds")


# --------------------------------------------------------------- criteria 4/5


def _expected_pi(rec) -> list:
    silent = SILENT_RULES[rec.level]
    return [0] + [i + 1 for i, r in enumerate(rec.rules) if r not in silent]


def _embedding(recs) -> tuple[int, int, int]:
    mism = pi_bad = trace_bad = 0
    for rec in recs:
        rep = verify_embedding(rec)
        mism += len(rep.mismatches)
        pi_bad += rep.pi != _expected_pi(rec)
        trace_bad += rep.mapped.items() != strip_doneEv(rec.final.sh.items())
    return mism, pi_bad, trace_bad


def check_4():
    recs = [r for r in runs(Level.SPAWN) + runs(Level.GUARD)]
    mism, pi_bad, trace_bad = _embedding(recs)
    ok = len(recs) >= 100 and mism == pi_bad == trace_bad == 0
    return ok, f"{len(recs)} Spawn/Guard runs, {mism} mismatches, {pi_bad} pi tables off, {trace_bad} traces differ"


def check_5():
    recs = [run(named("example1"), STEPS)] + list(runs(Level.COOP)) + list(runs(Level.COOP, True))
    mism, pi_bad, trace_bad = _embedding(recs)
    ok = len(recs) >= 51 and mism == pi_bad == trace_bad == 0
    return ok, (f"example1 + {len(recs) - 1} CoopWhile runs, {mism} mismatches, "
                f"{pi_bad} pi tables off, {trace_bad} doneEv-stripped traces differ")


# --------------------------------------------------------------- criterion 6


def check_6():
    recs = full_corpus()
    violations = cycle_items = 0
    for rec in recs:
        rep = monitor_distance(rec)
        violations += len(rep.violations)
        cycle_items += rep.cycle_items
    rec8 = run(named("example8"), 10_000)
    rep8 = monitor_distance(rec8)
    unexplained = 0
    for step, rule, item, _, _ in rep8.increases:
        c = rec8.configs[step]
        head = item.head
        blocked = isinstance(head, Guard) and not as_bool(eval_expr(c.sh.last, head.cond))
        unexplained += not (rule == "10" and c.q[0] == item and blocked)
    ok = violations == 0 and rep8.ok and rep8.increases and unexplained == 0
    return ok, (f"{len(recs)} runs, {violations} case violations, {cycle_items} lasso items checked; "
                f"example8: {len(rep8.increases)} increases, {unexplained} not at a blocked guard")


# --------------------------------------------------------------- criterion 7


class PrefixOracle:
    """Independent incremental checker: one verdict per event, both disciplines."""

    def __init__(self):
        self.spawn_pending = Counter()
        self.coop_calls: dict = {}
        self.coop_started: set = set()
        self.coop_done: set = set()
        self.spawn_ok = self.coop_ok = True

    def feed(self, ev: Event) -> None:
        k, a = ev.kind, ev.args
        if len(a) == 2 and k in ("callEv", "callREv"):
            if k == "callEv":
                self.spawn_pending[a] += 1
            elif self.spawn_pending[a] == 0:
                self.spawn_ok = False
            else:
                self.spawn_pending[a] -= 1
        if len(a) == 3 and k == "callEv":
            if a[2] in self.coop_calls:
                self.coop_ok = False
            self.coop_calls[a[2]] = a
        elif len(a) == 3 and k == "callREv":
            if self.coop_calls.get(a[2]) != a or a[2] in self.coop_started:
                self.coop_ok = False
            self.coop_started.add(a[2])
        elif k == "compEv":
            self.coop_done.add(a[0])
        elif k == "compREv" and a[0] not in self.coop_done:
            self.coop_ok = False


def _oracle_rejects(events, coop: bool) -> bool:
    o = PrefixOracle()
    for ev in events:
        o.feed(ev)
    return not (o.coop_ok if coop else o.spawn_ok)


def check_7():
    from fairsched.trace import call_ev, callr_ev, compr_ev
    # the oracle must be able to fail
    sane = (_oracle_rejects([callr_ev("m", Int(1))], False)
            and _oracle_rejects([call_ev(Int(0), "m", Int(1)), call_ev(Int(0), "m", Int(1))], True)
            and _oracle_rejects([compr_ev(Int(4))], True)
            and not _oracle_rejects([call_ev("m", Int(1)), callr_ev("m", Int(1))], False))
    if not sane:
        return False, "prefix oracle accepts a known ill-formed trace"
    recs = full_corpus()
    failures = prefixes = 0
    for rec in recs:
        oracle = PrefixOracle()
        coop = rec.level == Level.COOP
        for it in rec.final.sh.items():
            if isinstance(it, Event):
                oracle.feed(it)
            prefixes += 1
            failures += not (oracle.coop_ok if coop else oracle.spawn_ok)
        for c in rec.configs:
            stats = c.sh.stats
            failures += not (stats.wf_coop if coop else stats.wf_spawn)
    return failures == 0, f"{len(recs)} traces, {prefixes} prefixes, {failures} ill-formed"


# --------------------------------------------------------------- criterion 8


def _terminating(level: Level, need: int = 50) -> list:
    rng = random.Random(CORPUS_SEED + 5000)
    gen = random_program if level == Level.WHILE else confluent_program
    out, tries = [], 0
    while len(out) < need and tries < 20 * need:
        tries += 1
        p = gen(rng, level)
        d = diff_sos(p, STEPS)
        if d.sos_outcome is Halt.TERMINATED and d.lagc_outcome is Halt.TERMINATED:
            out.append(d)
    return out


def check_8():
    parts, ok = [], True
    for level in Level:
        diffs = _terminating(level)
        same = sum(d.sos_store == d.lagc_store for d in diffs)
        ok &= len(diffs) >= 50 and same == len(diffs)
        parts.append(f"{level.value} {same}/{len(diffs)}")
    return ok, "stores identical: " + ", ".join(parts)


# --------------------------------------------------------------- criterion 9


def check_9():
    results = {}
    # sequencing: x := 1; y := x + 1
    p7 = named("example7")
    s0 = initial_state(p7.globals)
    (ct,) = val(s0, flatten(p7.main), NameSupply())
    results["sequence"] = (ct.pc == frozenset() and ct.tau == (s0, State({"x": Int(1), "y": Int(0)}))
                           and len(ct.k) == 1 and isinstance(ct.k[0], Assign) and ct.k[0].var == "y")

    # event insertion with a fresh variable, then chop with a conditioned trace
    sigma = State({"x": BinOp("+", Var("Y"), Int(42)), "Y": STAR})
    cond = BinOp(">", Var("Y"), Int(0))
    ev = insert_event(sigma, comp_ev(Var("Z")), ["Z"])
    sz = sigma.update("Z", STAR)
    joined = chop(conditioned((), ev.items()), conditioned({cond}, [sz, sz.update("w", Int(17))]))
    results["insertion"] = (joined.pc == {cond} and joined.tau.items()
                            == [sigma, comp_ev(Var("Z")), sz, sz.update("w", Int(17))])

    # concretisation under Y -> 3
    rho = {"Y": Int(3)}
    tau = conditioned({cond}, [sigma, sigma.update("w", Int(17))])
    conc = concretize(rho, tau)
    x45 = State({"x": Int(45), "Y": Int(3)})
    results["concretisation"] = (concretize_state(rho, sigma) == x45 and conc.pc == frozenset()
                                 and conc.tau.items() == [x45, x45.update("w", Int(17))])

    # branching gives complementary path conditions
    pif = parse_program("{ if x < 1 { y := 1 } }", Level.WHILE)
    sx = State({"x": STAR, "y": Int(0)})
    then, other = val(sx, flatten(pif.main), NameSupply())
    c = BinOp("<", Var("x"), Int(1))
    results["branching"] = then.pc == {c} and other.pc == {Not(c)} and len(then.k) == 1 and other.k == ()

    # the three shapes of a cooperative configuration
    p1 = named("example1")
    main = K.of(p1.main, 0)
    waiting = K(main.stmts[1:], 0)
    other_task = K(main.stmts[1:], 1)
    q = (Marker("m", 2), waiting)
    sh = Trace.of([initial_state(p1.globals)])
    running = Counter(map_conts(CoopSchedConfig(sh, other_task.with_task(3), q)))
    finished = Counter(map_conts(CoopSchedConfig(sh, K((), 3), q)))
    idle = Counter(map_conts(CoopSchedConfig(sh, None, q)))
    results["mapping"] = (running == Counter([other_task.with_task(3), waiting])
                          and finished == Counter([waiting]) and idle == Counter([waiting]))

    bad = [k for k, v in results.items() if not v]
    return not bad, ", ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in results.items())


CHECKS = {1: check_1, 2: check_2, 3: check_3, 4: check_4, 5: check_5,
          6: check_6, 7: check_7, 8: check_8, 9: check_9}


def _criterion(n: int) -> None:
    ok, detail = CHECKS[n]()
    record(n, ok, detail)
    assert ok, detail


def test_criterion_1_example1():
    _criterion(1)


def test_criterion_2_example8():
    _criterion(2)


def test_criterion_3_spawn_determinism():
    _criterion(3)


def test_criterion_4_spawn_guard_embedding():
    _criterion(4)


def test_criterion_5_coop_embedding():
    _criterion(5)


def test_criterion_6_distance_monitors():
    _criterion(6)


def test_criterion_7_wellformed_prefixes():
    _criterion(7)


def test_criterion_8_sos_agreement():
    _criterion(8)


def test_criterion_9_micro_semantics():
    _criterion(9)


if __name__ == "__main__":
    failed = 0
    for n, check in CHECKS.items():
        try:
            ok, detail = check()
        except Exception as exc:  # report and keep going
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        failed += not ok
        print(f"CRITERION {n}: {'PASS' if ok else 'FAIL'} - {detail}")
    sys.exit(1 if failed else 0)
