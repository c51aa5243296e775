"""Nondeterministic trace composition and a bounded explorer over its interleavings."""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Optional, Union

from .lang import Expr, Int, Level, Program, show_expr
from .local_eval import K, NameSupply, spawn_body, suspended, val, val_proc_body
from .trace import (
    State, Trace, as_condition, concretize_items, eval_expr, initial_state,
    pc_consistent, show_state,
)


class SemanticsBug(AssertionError):
    """An internal invariant of the semantics failed."""


# ------------------------------------------------------------ configurations


def _sorted_pool(ks) -> tuple:
    return tuple(sorted((k for k in ks if not k.empty), key=lambda k: k.key))


@dataclass(frozen=True)
class WhileConfig:
    sh: Trace
    k: K
    fresh: tuple = (0, 0)


@dataclass(frozen=True)
class PoolConfig:
    sh: Trace
    pool: tuple
    fresh: tuple = (0, 0)

    @property
    def conts(self) -> tuple:
        return self.pool


@dataclass(frozen=True)
class CoopConfig:
    sh: Trace
    tasks: tuple
    fresh: tuple = (0, 0)

    @property
    def conts(self) -> tuple:
        return self.tasks

    def active(self) -> Optional[K]:
        act = [k for k in self.tasks if not suspended(k)]
        if len(act) > 1:
            raise SemanticsBug(f"more than one active task: {act}")
        return act[0] if act else None


Config = Union[WhileConfig, PoolConfig, CoopConfig]


@dataclass(frozen=True)
class Edge:
    rule: str
    label: tuple
    target: Config


def initial_config(program: Program, seed: int = 0) -> Config:
    sh = Trace.of([initial_state(program.globals)])
    main = K.of(program.main)
    fresh = (seed, 0)
    if program.level == Level.WHILE:
        return WhileConfig(sh, main, fresh)
    if program.level == Level.COOP:
        return CoopConfig(sh, _sorted_pool([main.with_task(0)]), fresh)
    return PoolConfig(sh, _sorted_pool([main]), fresh)


# ----------------------------------------------------------- shared step code


def consistent_steps(sh: Trace, k: K, names: NameSupply) -> list:
    """Concrete local steps of ``k`` (Spawn/Guard/While): list of (items, K)."""
    out = []
    for ct in val(sh.last, k.stmts, names):
        if pc_consistent(ct.pc):
            out.append((list(ct.tau[1:]), K(ct.k, k.task)))
    return out


def _concretize_fresh(ct, value: Int) -> tuple[list, bool]:
    """Concretise the single fresh symbolic variable of a local trace to ``value``."""
    symb = set()
    for it in ct.tau:
        if isinstance(it, State):
            symb |= it.symb()
    if not symb:
        return list(ct.tau), pc_consistent(ct.pc)
    if len(symb) > 1:
        raise SemanticsBug(f"unexpected symbolic variables {sorted(symb)}")
    env = State({x: value for x in symb})
    items = concretize_items(env, ct.tau)
    pc = [as_condition(eval_expr(env, p)) for p in ct.pc]
    return items, pc_consistent(pc)


def coop_progress(sh: Trace, k: K, names: NameSupply) -> list:
    """Rules (16)/(20)/(22): steps of task ``k``; list of (new sh, K^f(s'))."""
    out = []
    next_tid = Int(sh.stats.max_tid + 1)
    for ct in val(sh.last, k.stmts, names, F=Int(k.task)):
        items, ok = _concretize_fresh(ct, next_tid)
        if not ok:
            continue
        new_sh = sh.extend(items[1:])
        if not new_sh.stats.wf_coop:
            continue
        out.append((new_sh, K(ct.k, k.task)))
    return out


def coop_start(sh: Trace, m: str, f: int, v, program: Program, names: NameSupply) -> list:
    """Rules (17)/(19): start task ``f`` running ``m`` with argument ``v``."""
    out = []
    for ct in val_proc_body(sh.last, Int(f), m, program, names):
        items, ok = _concretize_fresh(ct, v)
        if not ok:
            continue
        new_sh = sh.extend(items[1:])
        if not new_sh.stats.wf_coop:
            continue
        out.append((new_sh, K(ct.k, f)))
    return out


def unresolved_calls_coop(sh: Trace) -> list:
    return sorted(sh.stats.coop_open, key=lambda e: (e[2].value, e[1], repr(e[0])))


def unresolved_calls_spawn(sh: Trace) -> list:
    return [key for key, n in sh.stats.spawn_open if n > 0]


# ---------------------------------------------------------------- successors


def step_while(c: WhileConfig, program: Program) -> Optional[WhileConfig]:
    """Rule (2). Returns None on K(∅)."""
    if c.k.empty:
        return None
    names = NameSupply.restore(c.fresh)
    steps = consistent_steps(c.sh, c.k, names)
    if len(steps) != 1:
        raise SemanticsBug(f"While step must be unique, got {len(steps)}")
    items, k2 = steps[0]
    return WhileConfig(c.sh.extend(items), k2, names.snapshot())


def successors_spawn(c: PoolConfig, program: Program) -> list[Edge]:
    out = []
    seen = set()
    for i, k in enumerate(c.pool):
        if k.key in seen:
            continue
        seen.add(k.key)
        rest = c.pool[:i] + c.pool[i + 1:]
        names = NameSupply.restore(c.fresh)
        for items, k2 in consistent_steps(c.sh, k, names):
            target = PoolConfig(c.sh.extend(items), _sorted_pool(rest + (k2,)), names.snapshot())
            out.append(Edge("4", (k,), target))
    sigma = c.sh.last
    for m, v in unresolved_calls_spawn(c.sh):
        names = NameSupply.restore(c.fresh)
        items, body = spawn_body(sigma, m, v, program, names)
        sh2 = c.sh.extend(items)
        if not sh2.stats.wf_spawn:
            raise SemanticsBug("rule (5) produced an ill-formed trace")
        target = PoolConfig(sh2, _sorted_pool(c.pool + (K(body),)), names.snapshot())
        out.append(Edge("5", (m, v), target))
    return out


def successors_coop(c: CoopConfig, program: Program) -> list[Edge]:
    out = []
    active = c.active()
    candidates = [active] if active is not None else list(c.tasks)
    for k in candidates:
        names = NameSupply.restore(c.fresh)
        rest = tuple(t for t in c.tasks if t is not k)
        for sh2, k2 in coop_progress(c.sh, k, names):
            target = CoopConfig(sh2, _sorted_pool(rest + (k2,)), names.snapshot())
            out.append(Edge("16", (k.task, k), target))
    if active is None:
        for v, m, f in unresolved_calls_coop(c.sh):
            names = NameSupply.restore(c.fresh)
            for sh2, k2 in coop_start(c.sh, m, f.value, v, program, names):
                target = CoopConfig(sh2, _sorted_pool(c.tasks + (k2,)), names.snapshot())
                out.append(Edge("17", (v, m, f.value), target))
    return out


def successors(c: Config, program: Program) -> list[Edge]:
    if isinstance(c, WhileConfig):
        nxt = step_while(c, program)
        return [] if nxt is None else [Edge("2", (c.k,), nxt)]
    if isinstance(c, PoolConfig):
        return successors_spawn(c, program)
    return successors_coop(c, program)


# ------------------------------------------------------------ abstraction key


def canon_k(k, sigma: State) -> tuple:
    """Continuation with fresh names replaced by their current values."""
    return (k.task, tuple((s.sid, tuple(sigma.get(n, n) for n in s.fresh_names)) for s in k.stmts))


def store_key(sh: Trace, program: Program) -> tuple:
    sigma = sh.last
    return tuple((n, sigma[n]) for n in program.globals if n in sigma)


def event_key(sh: Trace) -> tuple:
    st = sh.stats
    last_call = st.last_event is not None and st.last_event.kind == "callEv"
    return (
        st.spawn_open,
        tuple(sorted(st.coop_open, key=repr)),
        tuple(sorted(t.value for t in st.comp_tids)),
        st.max_tid,
        last_call,
    )


def abstraction_key(c: Config, program: Program) -> tuple:
    sigma = c.sh.last
    if isinstance(c, WhileConfig):
        conts = (canon_k(c.k, sigma),)
    else:
        conts = tuple(sorted((canon_k(k, sigma) for k in c.conts), key=repr))
    return (store_key(c.sh, program), conts, event_key(c.sh))


# ------------------------------------------------------------------ explorer


@dataclass
class Node:
    id: int
    key: tuple
    config: Config
    depth: int


@dataclass
class GraphEdge:
    src: int
    dst: int
    rule: str
    label: tuple
    new: tuple


@dataclass
class Graph:
    nodes: list = field(default_factory=list)
    edges: list = field(default_factory=list)
    truncated: bool = False

    def out_edges(self, nid: int) -> list:
        return [e for e in self.edges if e.src == nid]

    def dump(self) -> list[str]:
        lines = []
        for n in self.nodes:
            conts = n.config.conts if not isinstance(n.config, WhileConfig) else (n.config.k,)
            store = show_state({k: v for k, v in n.key[0]})
            lines.append(f"NODE {n.id} depth={n.depth} store={store} conts=[{' | '.join(map(repr, conts))}]")
        for e in self.edges:
            label = ",".join(x if isinstance(x, str) else show_expr(x) if isinstance(x, Expr) else str(x)
                             for x in e.label)
            new = " ".join(str(i) for i in e.new)
            lines.append(f"EDGE {e.src} {e.dst} rule={e.rule} label={label} new={{{new}}}")
        if self.truncated:
            lines.append("TRUNCATED")
        return lines


def new_stmts(c: Config, c2: Config) -> Counter:
    """p' − p on continuation identities."""
    before = Counter(k.identity for k in _conts(c))
    after = Counter(k.identity for k in _conts(c2))
    return after - before


def _conts(c: Config) -> tuple:
    if isinstance(c, WhileConfig):
        return () if c.k.empty else (c.k,)
    return c.conts


def explore(program: Program, depth: int, max_nodes: int = 20000, seed: int = 0) -> Graph:
    """Breadth-first enumeration of configurations up to ``depth`` steps."""
    if not isinstance(depth, int) or depth < 0:
        raise ValueError("depth must be a non-negative integer")
    g = Graph()
    init = initial_config(program, seed)
    index: dict = {}
    key0 = abstraction_key(init, program)
    index[key0] = 0
    g.nodes.append(Node(0, key0, init, 0))
    frontier = deque([0])
    while frontier:
        nid = frontier.popleft()
        node = g.nodes[nid]
        if node.depth >= depth:
            continue
        for e in successors(node.config, program):
            key = abstraction_key(e.target, program)
            dst = index.get(key)
            if dst is None:
                if len(g.nodes) >= max_nodes:
                    g.truncated = True
                    continue
                dst = len(g.nodes)
                index[key] = dst
                g.nodes.append(Node(dst, key, e.target, node.depth + 1))
                frontier.append(dst)
            new = tuple(sorted(new_stmts(node.config, e.target).elements()))
            g.edges.append(GraphEdge(nid, dst, e.rule, e.label, new))
    return g
