"""Symbolic states, events, traces, chop, concretisation and well-formedness."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Iterator, Mapping, Optional, Union

from .lang import (
    BinOp, Bool, EvalError, Expr, Int, Not, Var,
    apply_op, as_bool, is_value, show_value,
)


class Star:
    """The unknown value ``*`` bound to symbolic variables."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "*"

    __str__ = __repr__

    def __reduce__(self):
        return (Star, ())


STAR = Star()
Sexp = Union[Expr, Star]


class TraceError(Exception):
    pass


class JunctionError(TraceError):
    """Chop applied to an empty first trace or to non-extending junction states."""


class FreshClash(TraceError):
    pass


class ConcretizationError(TraceError):
    pass


class NotEvaluated(TraceError):
    pass


# --------------------------------------------------------------------- states


class State(Mapping):
    """Immutable partial map from variable names to symbolic expressions."""

    __slots__ = ("_d", "_hash")

    def __init__(self, data: Optional[Mapping] = None):
        self._d = dict(data or {})
        self._hash = None

    def __getitem__(self, k):
        return self._d[k]

    def __iter__(self):
        return iter(self._d)

    def __len__(self):
        return len(self._d)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._d.items()))
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if isinstance(other, State):
            return self._d == other._d
        return NotImplemented

    def __repr__(self):
        return show_state(self)

    def update(self, x: str, se: Sexp) -> "State":
        d = dict(self._d)
        d[x] = se
        return State(d)

    def update_many(self, pairs: Mapping) -> "State":
        d = dict(self._d)
        d.update(pairs)
        return State(d)

    def symb(self) -> frozenset:
        return frozenset(k for k, v in self._d.items() if v is STAR)

    def extends(self, other: "State") -> bool:
        """True iff ``other ⊆ self`` as mappings."""
        d = self._d
        return all(k in d and d[k] == v for k, v in other.items())

    def restrict(self, names: Iterable[str]) -> "State":
        return State({k: self._d[k] for k in names if k in self._d})

    def is_concrete(self) -> bool:
        return all(is_value(v) for v in self._d.values())


def initial_state(names: Iterable[str]) -> State:
    """σ_ε: every program variable set to 0."""
    return State({n: Int(0) for n in names})


def state_update(sigma: State, x: str, se: Sexp) -> State:
    return sigma.update(x, se)


def show_state(sigma: Mapping) -> str:
    body = ",".join(f"{k}={show_value(sigma[k])}" for k in sorted(sigma))
    return "{" + body + "}"


# ----------------------------------------------------------------- evaluation


def eval_expr(sigma: Mapping, e: Sexp, _seen: frozenset = frozenset()) -> Sexp:
    """val_σ: folds constants and leaves symbolic variables as atoms."""
    if isinstance(e, (Int, Bool)):
        return e
    if e is STAR:
        return e
    if isinstance(e, Var):
        if e.name not in sigma:
            raise EvalError(f"unbound variable {e.name!r}")
        v = sigma[e.name]
        if v is STAR:
            return e
        if is_value(v):
            return v
        if e.name in _seen:
            raise EvalError(f"cyclic binding through {e.name!r}")
        return eval_expr(sigma, v, _seen | {e.name})
    if isinstance(e, Not):
        v = eval_expr(sigma, e.operand, _seen)
        return Bool(not as_bool(v)) if is_value(v) else Not(v)
    if isinstance(e, BinOp):
        a = eval_expr(sigma, e.left, _seen)
        b = eval_expr(sigma, e.right, _seen)
        if is_value(a) and is_value(b):
            return apply_op(e.op, a, b)
        return BinOp(e.op, a, b)
    raise TypeError(f"not an expression: {e!r}")


def as_condition(v: Sexp) -> Sexp:
    """Coerce a concrete value to a boolean; symbolic conditions stay as they are."""
    return Bool(as_bool(v)) if is_value(v) else v


def negate(v: Sexp) -> Sexp:
    return Bool(not as_bool(v)) if is_value(v) else Not(v)


# --------------------------------------------------------------------- events

EVENT_KINDS = ("callEv", "callREv", "compEv", "compREv", "doneEv")


@dataclass(frozen=True)
class Event:
    """``callEv(m, v)`` at Spawn level, ``callEv(v, m, f)`` at CoopWhile level."""

    kind: str
    args: tuple = ()

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")

    def __repr__(self):
        return show_event(self)

    def map_args(self, fn) -> "Event":
        return Event(self.kind, tuple(a if isinstance(a, str) else fn(a) for a in self.args))

    def is_concrete(self) -> bool:
        return all(isinstance(a, str) or is_value(a) for a in self.args)


def show_event(ev: Event) -> str:
    args = ",".join(a if isinstance(a, str) else show_value(a) for a in ev.args)
    return f"{ev.kind}({args})"


def call_ev(*args) -> Event:
    return Event("callEv", tuple(args))


def callr_ev(*args) -> Event:
    return Event("callREv", tuple(args))


def comp_ev(f) -> Event:
    return Event("compEv", (f,))


def compr_ev(f) -> Event:
    return Event("compREv", (f,))


DONE = Event("doneEv")

Item = Union[State, Event]


def show_item(item: Item) -> str:
    if isinstance(item, State):
        return "S " + show_state(item)
    return "E " + show_event(item)


# --------------------------------------------------------------------- traces


@dataclass(frozen=True)
class TraceStats:
    """Cached facts about a trace, updated in O(size of the changed entry) per append."""

    last_state: Optional[State] = None
    last_event: Optional[Event] = None
    # Spawn-level: (m, v) -> #callEv - #callREv, positive entries only
    spawn_open: tuple = ()
    # CoopWhile-level: unresolved (v, m, f) call events
    coop_open: frozenset = frozenset()
    call_tids: frozenset = frozenset()
    comp_tids: frozenset = frozenset()
    max_tid: int = 0
    n_events: int = 0
    wf_spawn: bool = True
    wf_coop: bool = True
    alternation_ok: bool = True
    domains_ok: bool = True

    def push(self, item: Item) -> "TraceStats":
        if isinstance(item, State):
            alt, dom = self.alternation_ok, self.domains_ok
            if self.last_state is not None and not item.keys() >= self.last_state.keys():
                dom = False
            return replace(self, last_state=item, alternation_ok=alt, domains_ok=dom)
        return self._push_event(item)

    def _push_event(self, ev: Event) -> "TraceStats":
        changes: dict = {"last_event": ev, "n_events": self.n_events + 1}
        if self.last_state is None:
            changes["alternation_ok"] = False
        if ev.kind in ("callEv", "callREv") and len(ev.args) == 2:
            key = (ev.args[0], ev.args[1])
            open_ = dict(self.spawn_open)
            if ev.kind == "callEv":
                open_[key] = open_.get(key, 0) + 1
            else:
                if open_.get(key, 0) <= 0:
                    changes["wf_spawn"] = False
                else:
                    open_[key] -= 1
                    if not open_[key]:
                        del open_[key]
            changes["spawn_open"] = tuple(sorted(open_.items(), key=_sort_key))
        elif ev.kind in ("callEv", "callREv") and len(ev.args) == 3:
            v, m, f = ev.args
            key = (v, m, f)
            if ev.kind == "callEv":
                if f in self.call_tids:
                    changes["wf_coop"] = False
                changes["call_tids"] = self.call_tids | {f}
                changes["coop_open"] = self.coop_open | {key}
                if isinstance(f, Int):
                    changes["max_tid"] = max(self.max_tid, f.value)
            else:
                if key not in self.coop_open:
                    changes["wf_coop"] = False
                changes["coop_open"] = self.coop_open - {key}
        elif ev.kind == "compEv":
            changes["comp_tids"] = self.comp_tids | {ev.args[0]}
        elif ev.kind == "compREv":
            if ev.args[0] not in self.comp_tids:
                changes["wf_coop"] = False
        return replace(self, **changes)

    def unmatched_spawn(self) -> int:
        return sum(n for _, n in self.spawn_open)


def _sort_key(kv):
    return repr(kv[0])


_EMPTY_STATS = TraceStats()


class Trace:
    """Persistent append-only sequence of states and events.

    Appending shares the prefix, so every configuration of a long run can keep
    its own trace without copying.
    """

    __slots__ = ("parent", "item", "length", "stats", "_hash")

    def __init__(self, parent: Optional["Trace"] = None, item: Optional[Item] = None):
        self.parent = parent
        self.item = item
        if parent is None:
            self.length = 0 if item is None else 1
            self.stats = _EMPTY_STATS if item is None else _EMPTY_STATS.push(item)
        else:
            self.length = parent.length + 1
            self.stats = parent.stats.push(item)
        self._hash = None

    @classmethod
    def of(cls, items: Iterable[Item]) -> "Trace":
        t = EMPTY
        for it in items:
            t = t.append(it)
        return t

    def append(self, item: Item) -> "Trace":
        if self.length == 0:
            return Trace(None, item)
        return Trace(self, item)

    def extend(self, items: Iterable[Item]) -> "Trace":
        t = self
        for it in items:
            t = t.append(it)
        return t

    def __len__(self):
        return self.length

    def items(self) -> list:
        out = []
        node = self
        while node is not None and node.length:
            out.append(node.item)
            node = node.parent
        out.reverse()
        return out

    def __iter__(self) -> Iterator[Item]:
        return iter(self.items())

    def since(self, n: int) -> list:
        """Items at positions ``n, n+1, ...`` (zero-based)."""
        out = []
        node = self
        while node is not None and node.length > n:
            out.append(node.item)
            node = node.parent
        out.reverse()
        return out

    def prefix(self, n: int) -> "Trace":
        node = self
        while node is not None and node.length > n:
            node = node.parent
        return node if node is not None else EMPTY

    def __getitem__(self, i):
        if isinstance(i, slice):
            return self.items()[i]
        return self.items()[i]

    def __eq__(self, other):
        if self is other:
            return True
        if isinstance(other, Trace):
            return self.length == other.length and self.items() == other.items()
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(tuple(self.items()))
        return self._hash

    def __repr__(self):
        return "Trace[" + " ⌢ ".join(show_item(i) for i in self.items()) + "]"

    @property
    def last(self) -> State:
        s = self.stats.last_state
        if s is None or not isinstance(self.item, State):
            raise TraceError("trace does not end in a state")
        return s

    @property
    def first(self) -> State:
        items = self.items()
        if not items or not isinstance(items[0], State):
            raise TraceError("trace does not start with a state")
        return items[0]

    @property
    def last_event(self) -> Optional[Event]:
        return self.stats.last_event


EMPTY = Trace()


def singleton(sigma: State) -> Trace:
    """⟨σ⟩"""
    return Trace(None, sigma)


def serialize(items: Iterable[Item]) -> list[str]:
    return [show_item(i) for i in items]


# ------------------------------------------------------- conditioned traces


def _eval_pc(pc: Iterable) -> frozenset:
    return frozenset(as_condition(p) for p in pc)


@dataclass(frozen=True)
class ConditionedTrace:
    pc: frozenset
    tau: Trace

    @property
    def consistent(self) -> bool:
        return pc_consistent(self.pc)


def conditioned(pc: Iterable, items: Iterable[Item]) -> ConditionedTrace:
    return ConditionedTrace(frozenset(pc), Trace.of(items))


def chop(a: ConditionedTrace, b: ConditionedTrace) -> ConditionedTrace:
    """(pc1 ▷ τ1) ** (pc2 ▷ τ2): drop τ1's last state, join at an extending state."""
    if len(a.tau) == 0:
        raise JunctionError("chop needs a finite non-empty first trace")
    if not isinstance(a.tau.item, State):
        raise JunctionError("first trace must end in a state")
    rest = b.tau.items()
    if not rest or not isinstance(rest[0], State):
        raise JunctionError("second trace must start with a state")
    if not rest[0].extends(a.tau.item):
        raise JunctionError("junction state does not extend the last state")
    joined = a.tau.parent.extend(rest) if a.tau.parent is not None else Trace.of(rest)
    return ConditionedTrace(a.pc | b.pc, joined)


def insert_event(sigma: State, ev: Event, fresh: Iterable[str] = ()) -> Trace:
    """ev^V_σ(ē) = ⟨σ⟩ ⌢ ev(val_σ'(ē)) ⌢ σ' with σ' = σ[V ↦ *]."""
    fresh = list(fresh)
    clash = [v for v in fresh if v in sigma]
    if clash:
        raise FreshClash(f"fresh variables already bound: {clash}")
    sigma2 = sigma.update_many({v: STAR for v in fresh}) if fresh else sigma
    ev2 = ev.map_args(lambda a: eval_expr(sigma2, a))
    return Trace.of([sigma, ev2, sigma2])


# -------------------------------------------------------------- concretisation


def _rho_value(rho: Mapping, se: Sexp) -> Sexp:
    try:
        v = eval_expr(rho_state(rho), se)
    except EvalError as exc:
        raise ConcretizationError(str(exc)) from None
    if not is_value(v):
        raise ConcretizationError(f"expression {se!r} not concretised")
    return v


def rho_state(rho: Mapping) -> State:
    return rho if isinstance(rho, State) else State(rho)


def concretize_state(rho: Mapping, sigma: State) -> State:
    missing = [x for x in sigma.symb() if x not in rho]
    if missing:
        raise ConcretizationError(f"uncovered symbolic variables {sorted(missing)}")
    env = rho_state(rho)
    out = {}
    for k, v in sigma.items():
        out[k] = env[k] if v is STAR else _rho_value(env, v)
    return State(out)


def concretize_items(rho: Mapping, items: Iterable[Item]) -> list:
    env = rho_state(rho)
    out = []
    for it in items:
        if isinstance(it, State):
            out.append(concretize_state(env, it))
        else:
            out.append(it.map_args(lambda a: _rho_value(env, a)))
    return out


def concretize(rho: Mapping, ct: ConditionedTrace) -> ConditionedTrace:
    """ρ(pc ▷ τ); a consistent path condition is normalised to ∅."""
    env = rho_state(rho)
    items = concretize_items(env, ct.tau.items())
    pc = frozenset(as_condition(_rho_value(env, p)) for p in ct.pc)
    if pc_consistent(pc):
        pc = frozenset()
    return ConditionedTrace(pc, Trace.of(items))


def pc_consistent(pc: Iterable) -> bool:
    pc = list(pc)
    for p in pc:
        if not is_value(p):
            raise NotEvaluated(f"path condition element {p!r} is not fully evaluated")
    return not any(not as_bool(p) for p in pc)


# ------------------------------------------------------------ well-formedness


def wf_spawn(sh: Iterable[Item]) -> bool:
    """Counting check: every callREv(m, v) has more earlier callEv(m, v) than callREv(m, v)."""
    calls: dict = {}
    reacts: dict = {}
    for it in sh:
        if not isinstance(it, Event):
            continue
        key = it.args
        if it.kind == "callEv":
            calls[key] = calls.get(key, 0) + 1
        elif it.kind == "callREv":
            if calls.get(key, 0) <= reacts.get(key, 0):
                return False
            reacts[key] = reacts.get(key, 0) + 1
    return True


def wf_coop(sh: Iterable[Item]) -> bool:
    called_tids: set = set()
    calls: set = set()
    reacted: set = set()
    completed: set = set()
    for it in sh:
        if not isinstance(it, Event):
            continue
        if it.kind == "callEv":
            v, m, f = it.args
            if f in called_tids:
                return False
            called_tids.add(f)
            calls.add(it.args)
        elif it.kind == "callREv":
            if it.args not in calls or it.args in reacted:
                return False
            reacted.add(it.args)
        elif it.kind == "compEv":
            completed.add(it.args[0])
        elif it.kind == "compREv":
            if it.args[0] not in completed:
                return False
    return True


def well_shaped(items: Iterable[Item]) -> bool:
    """Alternation discipline plus domain monotonicity of consecutive states."""
    items = list(items)
    if not items:
        return True
    if not isinstance(items[0], State) or not isinstance(items[-1], State):
        return False
    prev_state = None
    for i, it in enumerate(items):
        if isinstance(it, Event):
            if not isinstance(items[i - 1], State) or not isinstance(items[i + 1], State):
                return False
        else:
            if prev_state is not None and not it.keys() >= prev_state.keys():
                return False
            prev_state = it
    return True
