"""Queues and the deterministic schedulers for Spawn, Guard and CoopWhile."""

from __future__ import annotations

import enum
import hashlib
import re
from dataclasses import dataclass, field, replace
from typing import Optional, Union

from .lagc_global import (
    SemanticsBug, WhileConfig, canon_k, consistent_steps, coop_progress,
    coop_start, event_key, initial_config, step_while, store_key,
    unresolved_calls_spawn,
)
from .lang import Await, Int, Level, Program, show_program
from .local_eval import K, NameSupply, spawn_body, suspended
from .trace import DONE, Trace, initial_state, serialize

DEFAULT_MAX_STEPS = 10_000


# -------------------------------------------------------------------- queues


class QueueError(Exception):
    pass


def create() -> tuple:
    return ()


def empty(q: tuple) -> bool:
    return not q


def push(q: tuple, k) -> tuple:
    return q + (k,)


def pop(q: tuple) -> tuple:
    """Returns ``(rest, first)``; undefined on the empty queue."""
    if not q:
        raise QueueError("pop on an empty queue")
    return q[1:], q[0]


def rotate(q: tuple) -> tuple:
    rest, k = pop(q)
    return push(rest, k)


def multiset_m(q: tuple) -> list:
    """M(q): the non-empty continuations of a queue, in queue order."""
    return [k for k in q if isinstance(k, K) and not k.empty]


# ------------------------------------------------------------ configurations


@dataclass(frozen=True)
class Marker:
    """Task creation marker (m, f)."""

    proc: str
    tid: int

    def __repr__(self):
        return f"({self.proc},{self.tid})"


@dataclass(frozen=True)
class SpawnSchedConfig:
    sh: Trace
    q: tuple
    fresh: tuple = (0, 0)
    rotations: int = 0


@dataclass(frozen=True)
class CoopSchedConfig:
    sh: Trace
    active: Optional[K]
    q: tuple
    c: int = 0
    fresh: tuple = (0, 0)
    rotations: int = 0

    @property
    def idle(self) -> bool:
        return self.active is None


SchedConfig = Union[WhileConfig, SpawnSchedConfig, CoopSchedConfig]


class Halt(str, enum.Enum):
    TERMINATED = "terminated"
    DEADLOCK = "deadlock"
    BUDGET = "budget"


@dataclass(frozen=True)
class Fired:
    rule: str
    config: SchedConfig


def initial_sched_config(program: Program, seed: int = 0) -> SchedConfig:
    sh = Trace.of([initial_state(program.globals)])
    main = K.of(program.main)
    if program.level == Level.WHILE:
        return initial_config(program, seed)
    if program.level == Level.COOP:
        return CoopSchedConfig(sh, main.with_task(0), create(), 0, (seed, 0))
    return SpawnSchedConfig(sh, push(create(), main), (seed, 0))


# ------------------------------------------------------------ Spawn / Guard


def _exactly_one(flags: dict) -> str:
    on = [name for name, v in flags.items() if v]
    if len(on) != 1:
        raise SemanticsBug(f"expected exactly one applicable rule, got {on or 'none'}")
    return on[0]


def sched_step_spawn(c: SpawnSchedConfig, program: Program, guard: bool = False):
    """Rules (6)-(8), plus rule (10) when ``guard`` is set."""
    sh, q = c.sh, c.q
    names = NameSupply.restore(c.fresh)
    open_calls = unresolved_calls_spawn(sh)
    if len(open_calls) > 1:
        raise SemanticsBug(f"more than one unresolved call: {open_calls}")
    head = q[0] if q else None
    steps = None
    if head is not None and not head.empty:
        steps = consistent_steps(sh, head, names)
        if len(steps) > 1:
            raise SemanticsBug("local evaluation is not deterministic")
        if not steps and not guard:
            raise SemanticsBug("rule (6) premise failed without guards")
    r7 = bool(open_calls)
    rule = _exactly_one({
        "7": r7,
        "6": not r7 and bool(steps),
        "8": not r7 and head is not None and head.empty,
        "10": guard and not r7 and steps is not None and not steps,
        "end": not r7 and head is None,
    })
    if rule == "end":
        return Halt.TERMINATED
    if rule == "7":
        m, v = open_calls[0]
        items, body = spawn_body(sh.last, m, v, program, names)
        sh2 = sh.extend(items)
        return Fired("7", SpawnSchedConfig(sh2, push(q, K(body)), names.snapshot()))
    rest, _ = pop(q)
    if rule == "6":
        items, k2 = steps[0]
        return Fired("6", SpawnSchedConfig(sh.extend(items), push(rest, k2), names.snapshot()))
    if rule == "8":
        return Fired("8", SpawnSchedConfig(sh, rest, c.fresh))
    if c.rotations >= len(q):
        return Halt.DEADLOCK
    return Fired("10", SpawnSchedConfig(sh, rotate(q), c.fresh, c.rotations + 1))


def sched_step_guard(c: SpawnSchedConfig, program: Program):
    return sched_step_spawn(c, program, guard=True)


# ----------------------------------------------------------------- CoopWhile


def await_blocked(c: CoopSchedConfig, k: K) -> bool:
    """``await x; s`` whose awaited task has no compEv in sh."""
    if not isinstance(k.head, Await):
        return False
    v = c.sh.last[k.head.var]
    return v not in c.sh.stats.comp_tids


def sched_step_coop(c: CoopSchedConfig, program: Program):
    """Rules (18)-(24) with the step counter c."""
    sh, act, q = c.sh, c.active, c.q
    last = sh.stats.last_event
    a = last is not None and last.kind == "callEv"
    head = q[0] if q else None
    idle = act is None
    if head is not None and isinstance(head, K) and not suspended(head):
        raise SemanticsBug(f"queue holds a non-suspended task {head!r}")
    head_task = idle and isinstance(head, K)
    blocked = head_task and await_blocked(c, head)
    rule = _exactly_one({
        "18": a,
        "22": not a and act is not None and not act.empty and not suspended(act),
        "23": not a and act is not None and act.empty,
        "24": not a and act is not None and not act.empty and suspended(act),
        "19": not a and idle and isinstance(head, Marker),
        "20": not a and head_task and not blocked,
        "21": not a and head_task and blocked,
        "end": not a and idle and head is None,
    })
    names = NameSupply.restore(c.fresh)
    if rule == "end":
        return Halt.TERMINATED
    if rule == "18":
        v, m, f = last.args
        sh2 = sh.extend([DONE, sh.last])
        return Fired("18", replace(c, sh=sh2, q=push(q, Marker(m, f.value)), rotations=0))
    if rule == "22":
        steps = coop_progress(sh, act, names)
        if len(steps) != 1:
            raise SemanticsBug(f"active task must have one step, got {len(steps)}")
        sh2, k2 = steps[0]
        return Fired("22", replace(c, sh=sh2, active=k2, c=c.c - 1, fresh=names.snapshot(), rotations=0))
    if rule == "23":
        return Fired("23", replace(c, active=None, rotations=0))
    if rule == "24":
        return Fired("24", replace(c, active=None, q=push(q, act), rotations=0))
    rest, _ = pop(q)
    if rule == "19":
        matches = [e for e in sh.stats.coop_open if e[1] == head.proc and e[2] == Int(head.tid)]
        if len(matches) != 1:
            raise SemanticsBug(f"marker {head!r} without a unique unresolved call")
        v = matches[0][0]
        steps = coop_start(sh, head.proc, head.tid, v, program, names)
        if len(steps) != 1:
            raise SemanticsBug("task start must be unique")
        sh2, k2 = steps[0]
        return Fired("19", replace(c, sh=sh2, active=k2, q=rest, c=0, fresh=names.snapshot(), rotations=0))
    if rule == "20":
        steps = coop_progress(sh, head, names)
        if len(steps) != 1:
            raise SemanticsBug(f"schedulable task must have one step, got {len(steps)}")
        sh2, k2 = steps[0]
        return Fired("20", replace(c, sh=sh2, active=k2, q=rest, c=0, fresh=names.snapshot(), rotations=0))
    if coop_progress(sh, head, NameSupply.restore(c.fresh)):
        raise SemanticsBug("blocked await admits a well-formed step")
    if c.rotations >= len(q):
        return Halt.DEADLOCK
    return Fired("21", replace(c, q=rotate(q), rotations=c.rotations + 1))


def sched_step(c: SchedConfig, program: Program):
    if isinstance(c, WhileConfig):
        nxt = step_while(c, program)
        return Halt.TERMINATED if nxt is None else Fired("2", nxt)
    if isinstance(c, CoopSchedConfig):
        return sched_step_coop(c, program)
    return sched_step_spawn(c, program, guard=program.level == Level.GUARD)


# ------------------------------------------------------------------- records


def program_hash(program: Program) -> str:
    return hashlib.sha256(show_program(program).encode()).hexdigest()[:16]


@dataclass
class ExecutionRecord:
    program: Program
    max_steps: int
    seed: int = 0
    configs: list = field(default_factory=list)
    rules: list = field(default_factory=list)
    outcome: Halt = Halt.BUDGET

    @property
    def level(self) -> Level:
        return self.program.level

    @property
    def final(self) -> SchedConfig:
        return self.configs[-1]

    def __len__(self):
        return len(self.rules)

    def dump(self) -> list[str]:
        lines = [f"RUN program={program_hash(self.program)} level={self.level.value} max_steps={self.max_steps}"]
        lines += serialize(self.configs[0].sh.items())
        for i, rule in enumerate(self.rules):
            lines.append(f"STEP {i + 1} RULE {rule}")
            before, after = self.configs[i].sh, self.configs[i + 1].sh
            lines += serialize(after.since(len(before)))
        lines.append(f"OUTCOME {self.outcome.value}")
        return lines


def run(program: Program, max_steps: int = DEFAULT_MAX_STEPS, seed: int = 0) -> ExecutionRecord:
    rec = ExecutionRecord(program, max_steps, seed)
    c = initial_sched_config(program, seed)
    rec.configs.append(c)
    for _ in range(max_steps):
        res = sched_step(c, program)
        if isinstance(res, Halt):
            rec.outcome = res
            return rec
        c = res.config
        rec.configs.append(c)
        rec.rules.append(res.rule)
    res = sched_step(c, program)
    if res is Halt.TERMINATED or res is Halt.DEADLOCK:
        rec.outcome = res
    return rec


# ----------------------------------------------------- abstraction of configs


def _canon_item(item, sigma) -> tuple:
    if isinstance(item, Marker):
        return ("marker", item.proc, item.tid)
    return ("k",) + canon_k(item, sigma)


def sched_key(c: SchedConfig, program: Program) -> tuple:
    """Everything future scheduler steps depend on; the counter c is left out."""
    sigma = c.sh.last
    if isinstance(c, WhileConfig):
        return (store_key(c.sh, program), canon_k(c.k, sigma), event_key(c.sh))
    if isinstance(c, SpawnSchedConfig):
        q = tuple(_canon_item(k, sigma) for k in c.q)
        return (store_key(c.sh, program), None, q, event_key(c.sh))
    act = None if c.active is None else _canon_item(c.active, sigma)
    q = tuple(_canon_item(k, sigma) for k in c.q)
    return (store_key(c.sh, program), act, q, event_key(c.sh))


def final_store(c: SchedConfig, program: Program) -> dict:
    sigma = c.sh.last
    return {n: sigma[n] for n in program.globals}


_FRESH = re.compile(r"\$[A-Za-z_][A-Za-z0-9_]*")


def alpha_normalize(lines: list[str]) -> list[str]:
    """Rename fresh variables to ``$0, $1, ...`` by first occurrence."""
    names: dict = {}

    def sub(m):
        return names.setdefault(m.group(), f"${len(names)}")

    return [_FRESH.sub(sub, line) for line in lines]
