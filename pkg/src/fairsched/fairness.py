"""Fairness checking on lassos, scheduling distances and the scheduler embedding check."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .lagc_global import (
    CoopConfig, Graph, PoolConfig, WhileConfig, abstraction_key,
    consistent_steps, new_stmts, successors,
)
from .lang import Level, Program
from .local_eval import K, NameSupply, suspended
from .sched import (
    CoopSchedConfig, ExecutionRecord, Halt, Marker, SpawnSchedConfig, await_blocked,
    multiset_m, sched_key,
)
from .sos_ref import SOSConfig
from .trace import Event, State, Trace

NOTIONS = ("weak", "strong", "quiescent")

SILENT_RULES = {
    Level.WHILE: frozenset(),
    Level.SPAWN: frozenset({"8"}),
    Level.GUARD: frozenset({"8", "10"}),
    Level.COOP: frozenset({"18", "21", "23", "24"}),
}


# ------------------------------------------------------------------ mapping


def strip_doneEv(items: Iterable) -> list:
    """Remove doneEv; the state that followed it is merged into the one before."""
    out: list = []
    drop_dup = False
    for it in items:
        if isinstance(it, Event) and it.kind == "doneEv":
            drop_dup = True
            continue
        if drop_dup and isinstance(it, State) and out and out[-1] == it:
            drop_dup = False
            continue
        drop_dup = False
        out.append(it)
    return out


def m0(q: tuple) -> list:
    """M⁰(q): queue contents without task markers."""
    return [k for k in q if not isinstance(k, Marker)]


def map_conts(c) -> tuple:
    """The continuation multiset of a scheduler configuration."""
    if isinstance(c, SpawnSchedConfig):
        return tuple(multiset_m(c.q))
    if isinstance(c, CoopSchedConfig):
        extra = () if c.active is None or c.active.empty else (c.active,)
        return tuple(m0(c.q)) + extra
    if isinstance(c, WhileConfig):
        return () if c.k.empty else (c.k,)
    return tuple(c.conts)


def _sorted(ks) -> tuple:
    return tuple(sorted((k for k in ks if not k.empty), key=lambda k: k.key))


def map_config(c, sh: Optional[Trace] = None):
    """Scheduler configuration → configuration of the nondeterministic semantics."""
    if isinstance(c, WhileConfig):
        return c
    if isinstance(c, SpawnSchedConfig):
        return PoolConfig(c.sh if sh is None else sh, _sorted(map_conts(c)), c.fresh)
    if isinstance(c, CoopSchedConfig):
        if sh is None:
            sh = Trace.of(strip_doneEv(c.sh.items()))
        return CoopConfig(sh, _sorted(map_conts(c)), c.fresh)
    return c


def _cont_keys(ks) -> Counter:
    return Counter(k.key for k in ks)


# ---------------------------------------------------------- enabled and co.


def enabled(c, program: Program) -> Counter:
    """Multiset of statement identities reachable in one step."""
    out: Counter = Counter()
    for e in successors(c, program):
        out += new_stmts(c, e.target)
    return out


def is_quiescent(c) -> bool:
    if isinstance(c, CoopConfig):
        return c.active() is None
    if isinstance(c, (CoopSchedConfig, SOSConfig)):
        return c.idle
    if isinstance(c, PoolConfig):
        return True
    return False


# -------------------------------------------------------------------- lassos


@dataclass
class Lasso:
    """A finite prefix and a cycle; ``configs[end]`` closes onto ``configs[start]``.

    ``configs`` are configurations of the nondeterministic semantics and
    ``produced[i]`` is the newStmt multiset of the transition from ``configs[i]``.
    """

    configs: list
    produced: list
    start: int
    end: int
    positions: list = field(default_factory=list)

    @property
    def cycle(self) -> range:
        return range(self.start, self.end)

    def at(self) -> int:
        return self.positions[self.start] if self.positions else self.start


def first_repeat(keys: list) -> Optional[tuple[int, int]]:
    seen: dict = {}
    for j, key in enumerate(keys):
        if key in seen:
            return seen[key], j
        seen[key] = j
    return None


def detect_lasso(rec: ExecutionRecord) -> Optional[Lasso]:
    """Split a scheduler run at the first repeated abstraction key.

    A run that halted (terminated or deadlocked) is finite and has no lasso.
    """
    if rec.outcome is not Halt.BUDGET:
        return None
    keys = [sched_key(c, rec.program) for c in rec.configs]
    hit = first_repeat(keys)
    if hit is None:
        return None
    i, j = hit
    silent = SILENT_RULES[rec.level]
    mapped = [map_config(c, sh=c.sh) for c in rec.configs[: j + 1]]
    produced = []
    for k in range(j):
        if rec.rules[k] in silent:
            produced.append(Counter())
        else:
            produced.append(new_stmts(mapped[k], mapped[k + 1]))
    return Lasso(mapped, produced, i, j, list(range(j + 1)))


def graph_lasso(g: Graph, program: Program, prefer: Callable) -> Optional[Lasso]:
    """Follow one path through an explored graph, picking edges by ``prefer``."""
    path = [0]
    edges = []
    seen = {0: 0}
    out: dict = {}
    for e in g.edges:
        out.setdefault(e.src, []).append(e)
    while True:
        cands = out.get(path[-1], [])
        if not cands:
            return None
        e = min(cands, key=lambda e: prefer(g.nodes[e.src].config, e))
        edges.append(e)
        if e.dst in seen:
            configs = [g.nodes[n].config for n in path] + [g.nodes[e.dst].config]
            produced = [Counter(x.new) for x in edges]
            return Lasso(configs, produced, seen[e.dst], len(path))
        seen[e.dst] = len(path)
        path.append(e.dst)


def avoid_task(task: int) -> Callable:
    """Edge preference that starves ``task`` whenever another choice exists."""
    def rank(config, e):
        moved = e.label[0] if e.rule == "16" else e.label[2] if e.rule == "17" else None
        return (moved == task, e.dst)
    return rank


def lasso_from_path(program: Program, start, choose: Callable, max_steps: int = 1000) -> Optional[Lasso]:
    """Walk the nondeterministic semantics from ``start`` choosing successors with ``choose``."""
    configs = [start]
    produced = []
    keys = [abstraction_key(start, program)]
    seen = {keys[0]: 0}
    for _ in range(max_steps):
        succ = successors(configs[-1], program)
        if not succ:
            return None
        e = choose(configs[-1], succ)
        produced.append(new_stmts(configs[-1], e.target))
        key = abstraction_key(e.target, program)
        configs.append(e.target)
        if key in seen:
            return Lasso(configs, produced, seen[key], len(configs) - 1)
        seen[key] = len(configs) - 1
    return None


# ------------------------------------------------------------------ verdicts


@dataclass(frozen=True)
class Verdict:
    notion: str
    result: str
    witness: Optional[object] = None
    at: Optional[int] = None
    bound: Optional[int] = None

    @property
    def fair(self) -> bool:
        return self.result == "fair"

    @property
    def violation(self) -> bool:
        return self.result == "violation"

    def line(self) -> str:
        parts = [f"VERDICT notion={self.notion} result={self.result}"]
        if self.witness is not None:
            parts.append(f"witness={self.witness}")
        if self.at is not None:
            parts.append(f"at={self.at}")
        if self.bound is not None:
            parts.append(f"bound={self.bound}")
        return " ".join(parts)


def no_violation(notion: str, bound: int) -> Verdict:
    return Verdict(notion, "no-violation-within-bound", bound=bound)


class OpenLasso(ValueError):
    pass


def check_fairness(l: Lasso, notion: str, program: Program, enabled_fn: Optional[Callable] = None) -> Verdict:
    """Evaluate one fairness notion exactly on a periodic execution."""
    if notion not in NOTIONS:
        raise ValueError(f"unknown notion {notion!r}")
    first, last = l.configs[l.start], l.configs[l.end]
    if _close_key(first, program) != _close_key(last, program):
        raise OpenLasso("cycle does not return to its first configuration")
    enabled_fn = enabled_fn or (lambda c: enabled(c, program))
    cache: dict = {}

    def en(i):
        key = _close_key(l.configs[i], program)
        if key not in cache:
            cache[key] = set(enabled_fn(l.configs[i]))
        return cache[key]

    produced: set = set()
    for i in l.cycle:
        produced |= set(l.produced[i])
    idx = list(l.cycle)
    if notion == "weak":
        pending = set.intersection(*(en(i) for i in idx))
    elif notion == "strong":
        pending = set.union(*(en(i) for i in idx))
    else:
        quiet = [i for i in idx if is_quiescent(l.configs[i])]
        pending = set.intersection(*(en(i) for i in quiet)) if quiet else set()
    starving = sorted(pending - produced)
    if starving:
        return Verdict(notion, "violation", starving[0], l.at())
    return Verdict(notion, "fair")


def _close_key(c, program):
    return abstraction_key(c, program)


def witness_is_sound(l: Lasso, notion: str, witness, program: Program) -> bool:
    """Re-derive a violation from raw data: precondition holds, conclusion fails."""
    ens = [enabled(l.configs[i], program) for i in l.cycle]
    made = any(witness in l.produced[i] for i in l.cycle)
    if notion == "weak":
        pre = all(witness in e for e in ens)
    elif notion == "strong":
        pre = any(witness in e for e in ens)
    else:
        pre = all(witness in e for i, e in zip(l.cycle, ens) if is_quiescent(l.configs[i]))
    return pre and not made


def no_infinite_local(l: Lasso) -> bool:
    return any(is_quiescent(l.configs[i]) for i in l.cycle)


def check_run(rec: ExecutionRecord, notion: str) -> Verdict:
    l = detect_lasso(rec)
    if l is None:
        return no_violation(notion, len(rec))
    return check_fairness(l, notion, rec.program)


# ------------------------------------------------------------------ distance


def unmatched_spawn(sh: Trace) -> int:
    return sh.stats.unmatched_spawn()


def unmatched_coop(sh: Trace) -> int:
    ev = sh.stats.last_event
    return 1 if ev is not None and ev.kind == "callEv" else 0


def _pos(q: tuple, item) -> Optional[int]:
    for i, k in enumerate(q):
        if k == item:
            return i + 1
    return None


def scheduling_distance(c, item) -> Optional[tuple]:
    """Distance from scheduling; None when the item is absent."""
    if isinstance(c, SpawnSchedConfig):
        if not isinstance(item, K) or item.empty:
            return None
        p = _pos(c.q, item)
        return None if p is None else (p, unmatched_spawn(c.sh))
    if not isinstance(c, CoopSchedConfig):
        raise TypeError("distance is defined for scheduler configurations")
    idle = 1 if c.active is None else 0
    tail = (idle, unmatched_coop(c.sh), c.c)
    if isinstance(item, K):
        if item.empty:
            return None
        if c.active is not None and c.active == item:
            if not suspended(item):
                return (1,) + tail
            return (len(c.q) + 2,) + tail
    p = _pos(c.q, item)
    if p is None:
        return None
    return (p if c.active is None else p + 1,) + tail


def _items(c) -> list:
    if isinstance(c, SpawnSchedConfig):
        seen, out = set(), []
        for k in multiset_m(c.q):
            if k not in seen:
                seen.add(k)
                out.append(k)
        return out
    out = list(dict.fromkeys(k for k in c.q))
    if c.active is not None and not c.active.empty:
        out.append(c.active)
    return out


@dataclass
class MonitorReport:
    level: Level
    steps: int = 0
    checks: int = 0
    increases: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    cycle_items: int = 0
    notes: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def lines(self) -> list[str]:
        out = [f"MONITOR level={self.level.value} steps={self.steps} checks={self.checks} "
               f"increases={len(self.increases)} violations={len(self.violations)} "
               f"cycle_items={self.cycle_items}"]
        out += [f"INCREASE step={s} rule={r} item={i} from={a} to={b}" for s, r, i, a, b in self.increases]
        out += [f"VIOLATION {v}" for v in self.violations]
        out += [f"NOTE {n}" for n in self.notes]
        out.append("RESULT " + ("ok" if self.ok else "violation"))
        return out


def _guard_blocked(c: SpawnSchedConfig, k: K) -> bool:
    return not consistent_steps(c.sh, k, NameSupply.restore(c.fresh))


def monitor_distance(rec: ExecutionRecord) -> MonitorReport:
    """Check the case split on distances at every step and the no-infinite-descent property."""
    rep = MonitorReport(rec.level, len(rec))
    if rec.level == Level.WHILE:
        rep.notes.append("no queue at this level")
        return rep
    cfgs, rules = rec.configs, rec.rules
    coop = rec.level == Level.COOP
    for l, rule in enumerate(rules):
        c0, c1 = cfgs[l], cfgs[l + 1]
        head = c0.q[0] if c0.q else None
        if coop:
            _check_markers(c0, l, rep)
        for x in _items(c0):
            d0 = scheduling_distance(c0, x)
            d1 = scheduling_distance(c1, x)
            rep.checks += 1
            if coop:
                case2 = ((rule == "22" and c0.active == x and d0[:3] == (1, 0, 0))
                         or (rule in ("19", "20") and head == x and d0[:3] == (1, 1, 0)))
                minimum = d0[:3] in ((1, 0, 0),)
            else:
                scheduled = {"6", "10"} if rec.level == Level.GUARD else {"6"}
                case2 = rule in scheduled and head == x and d0 == (1, 0)
                minimum = d0 == (1, 0)
            case1 = not minimum and d1 is not None and d1 < d0
            if case1 or case2:
                dup = not coop and sum(1 for k in c0.q if k == x) > 1
                if case2 and not dup and d1 is not None and d1 > d0:
                    rep.increases.append((l, rule, x, d0, d1))
                    if not (rule == "10" and _guard_blocked(c0, x)):
                        rep.violations.append(f"step {l}: increase at a scheduling step for {x!r}")
                continue
            if d1 is not None and d1 >= d0 and coop:
                reason = _coop_exception(cfgs, rules, l, x, d0, d1)
                if reason:
                    rep.increases.append((l, rule, x, d0, d1))
                    continue
            rep.violations.append(f"step {l} rule {rule}: no distance case holds for {x!r}: {d0} -> {d1}")
    _check_cycle_descent(rec, rep)
    return rep


def _coop_exception(cfgs, rules, l, x, d0, d1) -> Optional[str]:
    """Known non-decreasing steps of the CoopWhile distance, each checked exactly."""
    c0, c1 = cfgs[l], cfgs[l + 1]
    rule = rules[l]
    head = c0.q[0] if c0.q else None
    if rule == "21" and head == x and await_blocked(c0, x):
        return "blocked await is not enabled"
    nxt = rules[l + 1] if l + 1 < len(rules) else None
    if rule == "22" and unmatched_coop(c1.sh) == 1 and nxt == "18":
        # the call is recorded before its marker is queued
        d2 = scheduling_distance(cfgs[l + 2], x)
        if d2 is not None and d2 < d0:
            return "call recorded before its marker"
    if (rule == "18" and c0.active == x and suspended(x)
            and d1 == (d0[0] + 1, 0, 0, d0[3])):
        # the marker is queued ahead of a suspended active task
        if nxt == "24" and scheduling_distance(cfgs[l + 2], x) == (d0[0], 1, 0, d0[3]):
            return "marker queued ahead of the suspended task"
    return None


def _check_markers(c: CoopSchedConfig, l: int, rep: MonitorReport) -> None:
    last = c.sh.stats.last_event
    markers = {(k.proc, k.tid) for k in c.q if isinstance(k, Marker)}
    for v, m, f in c.sh.stats.coop_open:
        if last is not None and last.kind == "callEv" and last.args == (v, m, f):
            continue
        if (m, f.value) not in markers:
            rep.violations.append(f"step {l}: unresolved call ({m},{f.value}) has no marker in the queue")


def _check_cycle_descent(rec: ExecutionRecord, rep: MonitorReport) -> None:
    l = detect_lasso(rec)
    if l is None:
        return
    if not no_infinite_local(l):
        rep.notes.append("cycle has no quiescent configuration; bounded-distance premise does not hold")
        return
    cyc = rec.configs[l.start:l.end + 1]
    pending = set(_items(cyc[0]))
    for c in cyc:
        pending &= set(_items(c))
    for x in pending:
        rep.cycle_items += 1
        ds = [scheduling_distance(c, x) for c in cyc]
        if all(b < a for a, b in zip(ds, ds[1:])):
            rep.violations.append(f"item {x!r} strictly descends through a whole cycle")


# ----------------------------------------------------------------- embedding


@dataclass
class EmbeddingReport:
    level: Level
    steps: int = 0
    progress: int = 0
    silent: int = 0
    pi: list = field(default_factory=list)
    mismatches: list = field(default_factory=list)
    # trace of the replayed run in the nondeterministic semantics
    mapped: Optional[Trace] = None

    @property
    def ok(self) -> bool:
        return not self.mismatches

    def lines(self) -> list[str]:
        out = [f"EMBEDDING level={self.level.value} steps={self.steps} progress={self.progress} "
               f"silent={self.silent} mismatches={len(self.mismatches)}"]
        out += [f"MISMATCH step={i} {why}" for i, why in self.mismatches]
        out.append("PI " + " ".join(f"{j}->{k}" for j, k in enumerate(self.pi)))
        out.append("RESULT " + ("ok" if self.ok else "mismatch"))
        return out


def verify_embedding(rec: ExecutionRecord) -> EmbeddingReport:
    """Replay every scheduler step in the nondeterministic semantics."""
    program = rec.program
    rep = EmbeddingReport(rec.level, len(rec))
    silent = SILENT_RULES[rec.level]
    mapped_sh = Trace.of(strip_doneEv(rec.configs[0].sh.items()))
    rep.pi.append(0)
    for i, rule in enumerate(rec.rules):
        c0, c1 = rec.configs[i], rec.configs[i + 1]
        delta = strip_doneEv([c0.sh.last] + c1.sh.since(len(c0.sh)))[1:]
        if c1.sh.prefix(len(c0.sh)) != c0.sh:
            rep.mismatches.append((i, "trace is not extended"))
            break
        before = _cont_keys(map_conts(c0))
        after = _cont_keys(map_conts(c1))
        if rule in silent:
            rep.silent += 1
            if before != after:
                rep.mismatches.append((i, f"silent rule {rule} changed the continuations"))
            if delta:
                rep.mismatches.append((i, f"silent rule {rule} changed the trace"))
            continue
        rep.progress += 1
        m0_cfg = map_config(c0, sh=mapped_sh)
        found = None
        for e in successors(m0_cfg, program):
            e_delta = e.target.sh.since(len(mapped_sh))
            if _cont_keys(map_conts(e.target)) == after and e_delta == delta:
                found = e
                break
        if found is None:
            rep.mismatches.append((i, f"rule {rule} has no matching step of the nondeterministic semantics"))
            mapped_sh = mapped_sh.extend(delta)
        else:
            mapped_sh = found.target.sh
        rep.pi.append(i + 1)
    rep.mapped = mapped_sh
    # π(j) = j + number of silent steps needed to reach it
    counts = [0]
    for rule in rec.rules:
        counts.append(counts[-1] + (rule in silent))
    for j, p in enumerate(rep.pi):
        if p != j + counts[p]:
            rep.mismatches.append((p, f"pi({j}) = {p} breaks the index formula"))
    if len(set(rep.pi)) != len(rep.pi):
        rep.mismatches.append((0, "pi is not injective"))
    return rep
