"""Reference small-step semantics: nondeterministic task map and round-robin queue."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

from .lang import (
    Assign, Await, Guard, If, Int, Program, Return, Seq, Skip, Spawn, Suspend,
    Var, While, as_bool, flatten, subst_stmt,
)
from .lagc_global import SemanticsBug
from .local_eval import Identity, K, NameSupply
from .sched import DEFAULT_MAX_STEPS, Halt, program_hash, rotate
from .trace import State, eval_expr, initial_state, show_item


@dataclass(frozen=True)
class SOSConfig:
    """``active`` is ``(f, stmts)`` or None for Idle.

    ``tasks`` is a queue of ``(f, stmts)`` for the scheduler and a tuple sorted
    by task id (the mapping T) for the nondeterministic semantics.
    """

    active: Optional[tuple]
    tasks: tuple
    store: State
    next_tid: int = 1
    fresh: tuple = (0, 0)
    rotations: int = 0

    @property
    def idle(self) -> bool:
        return self.active is None


def initial_sos_config(program: Program, seed: int = 0) -> SOSConfig:
    return SOSConfig((0, flatten(program.main)), (), initial_state(program.globals), 1, (seed, 0))


def _val(store: State, e):
    return eval_expr(store, e)


def while_step(stmts: tuple, store: State) -> tuple[tuple, State]:
    """(s, σ) →While (s', σ'): one step per assignment or skip; while unrolls to if."""
    s, rest = stmts[0], stmts[1:]
    if isinstance(s, Seq):
        return while_step(flatten(s) + rest, store)
    if isinstance(s, Skip):
        return rest, store
    if isinstance(s, Assign):
        return rest, store.update(s.var, _val(store, s.expr))
    if isinstance(s, If):
        if as_bool(_val(store, s.cond)):
            return flatten(s.body) + rest, store
        return rest, store
    if isinstance(s, While):
        unrolled = If(s.sid, s.cond, Seq(s.sid, s.body, s))
        return (unrolled,) + rest, store
    raise TypeError(f"not a While statement: {s!r}")


@dataclass(frozen=True)
class SOSStep:
    rule: str
    label: int
    config: SOSConfig
    spawned: tuple = ()


def _active_step(c: SOSConfig, program: Program, push) -> SOSStep:
    """Rules for an active task; ``push`` adds a task to the waiting collection."""
    f, stmts = c.active
    store = c.store
    if not stmts:
        # main block finished: it has no return, the processor is simply released
        return SOSStep("END", f, replace(c, active=None))
    s, rest = stmts[0], stmts[1:]
    if isinstance(s, Return):
        return SOSStep("RETURN", f, replace(c, active=None))
    if isinstance(s, Spawn):
        names = NameSupply.restore(c.fresh)
        proc = program.procs[s.proc]
        f2 = c.next_tid
        y = names.fresh(proc.param)
        upd = {y: _val(store, s.arg)}
        if s.target is not None:
            upd[s.target] = Int(f2)
        body = flatten(subst_stmt(proc.body, proc.param, y)) + (proc.end,)
        c2 = replace(c, active=(f, rest), tasks=push(c.tasks, (f2, body)),
                     store=store.update_many(upd), next_tid=f2 + 1, fresh=names.snapshot())
        return SOSStep("SPAWNSTART", f, c2, ((f2, body),))
    if isinstance(s, Suspend):
        return SOSStep("YIELDSUSPEND", f, replace(c, active=None, tasks=push(c.tasks, (f, rest))))
    if isinstance(s, Await):
        return SOSStep("YIELDAWAIT", f, replace(c, active=None, tasks=push(c.tasks, (f, stmts))))
    if isinstance(s, Guard):
        return SOSStep("YIELDGUARD", f, replace(c, active=None, tasks=push(c.tasks, (f, stmts))))
    stmts2, store2 = while_step(stmts, store)
    return SOSStep("LOCAL", f, replace(c, active=(f, stmts2), store=store2))


def _queue_push(q, item):
    return q + (item,)


def _map_push(t, item):
    return tuple(sorted(t + (item,), key=lambda e: e[0]))


# ------------------------------------------------------- nondeterministic


def sos_successors(c: SOSConfig, program: Program) -> list[SOSStep]:
    """All one-step successors of the task-map semantics, labelled by task id."""
    if not c.idle:
        return [_active_step(c, program, _map_push)]
    out = []
    for i, (f, stmts) in enumerate(c.tasks):
        rest_t = c.tasks[:i] + c.tasks[i + 1:]
        head = stmts[0] if stmts else None
        if isinstance(head, Await):
            if _val(c.store, Var(head.var)) in {Int(g) for g, _ in rest_t}:
                continue
            out.append(SOSStep("SCHEDULEAWAIT", f, replace(c, active=(f, stmts[1:]), tasks=rest_t)))
        elif isinstance(head, Guard):
            if not as_bool(_val(c.store, head.cond)):
                continue
            body = flatten(head.body) + stmts[1:]
            out.append(SOSStep("SCHEDULEGUARD", f, replace(c, active=(f, body), tasks=rest_t)))
        else:
            out.append(SOSStep("SCHEDULESIMPLE", f, replace(c, active=(f, stmts), tasks=rest_t)))
    return out


def enabled_tasks(c: SOSConfig, program: Program) -> frozenset:
    """enabled(C) over task identifiers: the labels of all successor steps."""
    return frozenset(st.label for st in sos_successors(c, program))


def sos_identity(f: int, stmts: tuple) -> Identity:
    return K(stmts, f).identity


def sos_new_stmts(c: SOSConfig, step: SOSStep) -> frozenset:
    """newStmt for one SOS step; stepping to Idle introduces nothing."""
    c2 = step.config
    if c2.idle:
        return frozenset()
    out = {sos_identity(*c2.active)}
    out |= {sos_identity(f, s) for f, s in step.spawned}
    return frozenset(out)


def is_quiescent_sos(c: SOSConfig) -> bool:
    return c.idle


# -------------------------------------------------------------- scheduler


def sos_sched_step(c: SOSConfig, program: Program):
    """Round-robin SOS scheduler with the guard rules."""
    if not c.idle:
        st = _active_step(c, program, _queue_push)
        return replace(st, config=replace(st.config, rotations=0))
    if not c.tasks:
        return Halt.TERMINATED
    rest, (f, stmts) = c.tasks[1:], c.tasks[0]
    head = stmts[0] if stmts else None
    if isinstance(head, Await):
        tsk = {Int(g) for g, _ in c.tasks}
        if _val(c.store, Var(head.var)) not in tsk:
            return SOSStep("SCHEDULEAWAITDONE", f, replace(c, active=(f, stmts[1:]), tasks=rest, rotations=0))
        return _rotate(c, "SCHEDULEAWAITWAIT", f)
    if isinstance(head, Guard):
        if as_bool(_val(c.store, head.cond)):
            body = flatten(head.body) + stmts[1:]
            return SOSStep("SCHEDULEGUARDDONE", f, replace(c, active=(f, body), tasks=rest, rotations=0))
        return _rotate(c, "SCHEDULEGUARDWAIT", f)
    return SOSStep("SCHEDULESIMPLE", f, replace(c, active=(f, stmts), tasks=rest, rotations=0))


def _rotate(c: SOSConfig, rule: str, f: int):
    if c.rotations >= len(c.tasks):
        return Halt.DEADLOCK
    return SOSStep(rule, f, replace(c, tasks=rotate(c.tasks), rotations=c.rotations + 1))


@dataclass
class SOSRecord:
    program: Program
    max_steps: int
    configs: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    outcome: Halt = Halt.BUDGET

    @property
    def final(self) -> SOSConfig:
        return self.configs[-1]

    def final_store(self) -> dict:
        store = self.final.store
        return {n: store[n] for n in self.program.globals}

    def yield_points(self) -> dict:
        """Per task, the ids of the suspend/await statements it completed, in order."""
        out: dict = {}
        for before, st in zip(self.configs, self.steps):
            if st.rule == "YIELDSUSPEND":
                out.setdefault(st.label, []).append(before.active[1][0].sid)
            elif st.rule == "SCHEDULEAWAITDONE":
                out.setdefault(st.label, []).append(before.tasks[0][1][0].sid)
        return out

    def dump(self) -> list[str]:
        lines = [f"RUN program={program_hash(self.program)} level={self.program.level.value} "
                 f"max_steps={self.max_steps} semantics=sos"]
        lines.append(show_item(self.configs[0].store))
        for i, st in enumerate(self.steps):
            lines.append(f"STEP {i + 1} RULE {st.rule}")
            if st.config.store != self.configs[i].store:
                lines.append(show_item(st.config.store))
        lines.append(f"OUTCOME {self.outcome.value}")
        return lines


def sos_run(program: Program, max_steps: int = DEFAULT_MAX_STEPS, seed: int = 0) -> SOSRecord:
    rec = SOSRecord(program, max_steps)
    c = initial_sos_config(program, seed)
    rec.configs.append(c)
    for _ in range(max_steps):
        res = sos_sched_step(c, program)
        if isinstance(res, Halt):
            rec.outcome = res
            return rec
        if res.rule == "SPAWNSTART":
            f2 = res.spawned[0][0]
            if f2 in {g for g, _ in c.tasks} or (c.active and f2 == c.active[0]):
                raise SemanticsBug("SPAWNSTART reused a task identifier")
        c = res.config
        rec.configs.append(c)
        rec.steps.append(res)
    res = sos_sched_step(c, program)
    if res is Halt.TERMINATED or res is Halt.DEADLOCK:
        rec.outcome = res
    return rec


# ------------------------------------------------------------ cross-check


def lagc_yield_points(rec) -> dict:
    """Per task, the ids of the suspend/await statements consumed by rule (20)."""
    out: dict = {}
    for c, rule in zip(rec.configs, rec.rules):
        if rule == "20":
            head = c.q[0]
            out.setdefault(head.task, []).append(head.head.sid)
    return out


def _prefix_compatible(a: dict, b: dict) -> bool:
    for task in set(a) | set(b):
        x, y = a.get(task, []), b.get(task, [])
        n = min(len(x), len(y))
        if x[:n] != y[:n]:
            return False
    return True


@dataclass
class SOSDiff:
    level: str
    sos_outcome: Halt
    lagc_outcome: Halt
    sos_store: dict
    lagc_store: dict
    yields_equal: Optional[bool]

    @property
    def complete(self) -> bool:
        """Both runs halted; a run cut off by the step budget has no final store."""
        return Halt.BUDGET not in (self.sos_outcome, self.lagc_outcome)

    @property
    def stores_equal(self) -> Optional[bool]:
        if not self.complete:
            return None
        return self.sos_store == self.lagc_store and self.sos_outcome == self.lagc_outcome

    @property
    def ok(self) -> bool:
        return self.stores_equal is not False and self.yields_equal is not False

    def lines(self) -> list[str]:
        from .trace import show_state

        def word(flag, same="equal"):
            return {None: "n/a", True: same, False: "differ"}[flag]

        stores = word(self.stores_equal) if self.complete else "truncated"
        return [
            f"SOS outcome={self.sos_outcome.value} store={show_state(self.sos_store)}",
            f"LAGC outcome={self.lagc_outcome.value} store={show_state(self.lagc_store)}",
            f"DIFF level={self.level} stores={stores} yields={word(self.yields_equal)}",
        ]


def diff_sos(program: Program, max_steps: int = DEFAULT_MAX_STEPS, seed: int = 0) -> SOSDiff:
    """Run both schedulers and compare final source-variable stores.

    Yield orders are compared for CoopWhile only: at the other levels the
    LAGC scheduler interleaves at single-statement granularity and there is
    no yield point to compare. When a run is cut off by the budget, yield
    orders only need to agree on their common prefix.
    """
    from .lang import Level
    from .sched import final_store, run

    srec = sos_run(program, max_steps, seed)
    lrec = run(program, max_steps, seed)
    yields = None
    if program.level == Level.COOP:
        a, b = srec.yield_points(), lagc_yield_points(lrec)
        done = Halt.BUDGET not in (srec.outcome, lrec.outcome)
        yields = a == b if done else _prefix_compatible(a, b)
    return SOSDiff(program.level.value, srec.outcome, lrec.outcome,
                   srec.final_store(), final_store(lrec.final, program), yields)
