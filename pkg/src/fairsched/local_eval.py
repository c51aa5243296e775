"""Local evaluation: one statement in a symbolic state yields continuation traces."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .lang import (
    FRESH_PREFIX, Assign, Await, Guard, If, Int, Program, Return, Seq, Skip,
    Spawn, Stmt, Suspend, Var, While, flatten, show_inline, subst_stmt,
)
from .trace import (
    ConditionedTrace, State, Trace, as_condition, call_ev,
    callr_ev, comp_ev, compr_ev, eval_expr, insert_event, negate,
)


class NameSupply:
    """Deterministic generator of fresh variable names.

    ``seed`` only changes how names are spelled, so two supplies with
    different seeds produce runs that agree up to renaming.
    """

    def __init__(self, seed: int = 0, n: int = 0):
        self.seed = seed
        self.n = n

    def fresh(self, kind: str) -> str:
        self.n += 1
        if self.seed:
            return f"{FRESH_PREFIX}{kind}{self.n}s{self.seed}"
        return f"{FRESH_PREFIX}{kind}{self.n}"

    def snapshot(self) -> tuple[int, int]:
        return (self.seed, self.n)

    @classmethod
    def restore(cls, snap: tuple[int, int]) -> "NameSupply":
        return cls(*snap)


class K:
    """Continuation marker K(s) or K^f(s); ``stmts`` is the flattened statement list.

    An empty tuple is the empty continuation K(∅).
    """

    __slots__ = ("stmts", "task", "_key", "_hash")

    def __init__(self, stmts: tuple = (), task: Optional[int] = None):
        self.stmts = tuple(stmts)
        self.task = task
        self._key = None
        self._hash = None

    @classmethod
    def of(cls, s: Stmt, task: Optional[int] = None) -> "K":
        return cls(flatten(s), task)

    @property
    def empty(self) -> bool:
        return not self.stmts

    @property
    def head(self) -> Optional[Stmt]:
        return self.stmts[0] if self.stmts else None

    @property
    def key(self) -> tuple:
        if self._key is None:
            self._key = (self.task, tuple((s.sid, s.fresh_names) for s in self.stmts))
        return self._key

    @property
    def identity(self) -> "Identity":
        """Position-based identity; fresh names are ignored (α-normalised)."""
        return Identity(self.task, tuple(s.sid for s in self.stmts), self.text())

    def with_task(self, task: Optional[int]) -> "K":
        return K(self.stmts, task)

    def text(self) -> str:
        if not self.stmts:
            return "∅"
        return "; ".join(show_inline(s) for s in self.stmts)

    def __eq__(self, other):
        return isinstance(other, K) and self.key == other.key

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.key)
        return self._hash

    def __repr__(self):
        tag = "" if self.task is None else f"^{self.task}"
        return f"K{tag}({self.text()})"


@dataclass(frozen=True)
class Identity:
    task: Optional[int]
    sids: tuple
    text: str = ""

    def _cmp(self):
        return (-1 if self.task is None else self.task, self.sids)

    def __eq__(self, other):
        return isinstance(other, Identity) and self._cmp() == other._cmp()

    def __hash__(self):
        return hash(self._cmp())

    def __lt__(self, other):
        return self._cmp() < other._cmp()

    def __str__(self):
        tag = "" if self.task is None else f"^{self.task}"
        at = f"@{self.sids[0]}" if self.sids else ""
        return f"K{tag}({self.text}){at}"


def suspended(k: K) -> bool:
    """``await x; s`` and ``suspend; s`` are suspended statements."""
    return isinstance(k.head, (Await, Suspend))


@dataclass(frozen=True)
class ContinuationTrace:
    pc: frozenset
    tau: tuple
    k: tuple

    @property
    def conditioned(self) -> ConditionedTrace:
        return ConditionedTrace(self.pc, Trace.of(self.tau))


def _ct(pc, tau, k) -> ContinuationTrace:
    return ContinuationTrace(frozenset(pc), tuple(tau), tuple(k))


def val(sigma: State, stmts: tuple, names: NameSupply, F=None) -> list[ContinuationTrace]:
    """val_σ (or val^F_σ when ``F`` is given) of the first statement of ``stmts``.

    The remaining statements are appended to each continuation, which is the
    sequence rule together with ``∅; s ⇝ s``.
    """
    if not stmts:
        return []
    s, rest = stmts[0], tuple(stmts[1:])
    if isinstance(s, Seq):
        return val(sigma, flatten(s) + rest, names, F)
    if isinstance(s, Skip):
        return [_ct((), (sigma,), rest)]
    if isinstance(s, Assign):
        return [_ct((), (sigma, sigma.update(s.var, eval_expr(sigma, s.expr))), rest)]
    if isinstance(s, (If, While)):
        c = as_condition(eval_expr(sigma, s.cond))
        loop = (s,) if isinstance(s, While) else ()
        return [
            _ct({c}, (sigma,), flatten(s.body) + loop + rest),
            _ct({negate(c)}, (sigma,), rest),
        ]
    if isinstance(s, Guard):
        c = as_condition(eval_expr(sigma, s.cond))
        return [_ct({c}, (sigma,), flatten(s.body) + rest)]
    if isinstance(s, Spawn) and s.target is None:
        v = eval_expr(sigma, s.arg)
        return [_ct((), insert_event(sigma, call_ev(s.proc, v)).items(), rest)]
    if isinstance(s, Spawn):
        fid = names.fresh("F")
        ev = call_ev(s.arg, s.proc, Var(fid))
        tau = insert_event(sigma, ev, [fid]).items()
        after = tau[-1].update(s.target, Var(fid))
        return [_ct((), tau + [after], rest)]
    if isinstance(s, Return):
        if F is None:
            raise ValueError("return evaluated without a task identifier")
        return [_ct((), insert_event(sigma, comp_ev(F)).items(), rest)]
    if isinstance(s, Await):
        v = eval_expr(sigma, Var(s.var))
        return [_ct((), insert_event(sigma, compr_ev(v)).items(), rest)]
    if isinstance(s, Suspend):
        return [_ct((), (sigma,), rest)]
    raise TypeError(f"cannot evaluate {s!r}")


def val_proc_body(sigma: State, F, m: str, program: Program,
                  names: NameSupply) -> list[ContinuationTrace]:
    """Start of a CoopWhile procedure body: callREv(X, m, F), x' ↦ X, then body; return."""
    if m not in program.procs:
        raise KeyError(f"unknown procedure {m!r}")
    proc = program.procs[m]
    X = names.fresh("X")
    x2 = names.fresh(proc.param)
    tau = insert_event(sigma, callr_ev(Var(X), m, F), [X]).items()
    after = tau[-1].update(x2, Var(X))
    body = flatten(subst_stmt(proc.body, proc.param, x2)) + (proc.end,)
    return [_ct((), tau + [after], body)]


def spawn_body(sigma: State, m: str, v, program: Program,
               names: NameSupply) -> tuple[list, tuple]:
    """Rule (5)/(7) material: the items appended to sh and the renamed body."""
    proc = program.procs[m]
    y = names.fresh(proc.param)
    react = insert_event(sigma, callr_ev(m, v)).items()
    items = react[1:] + [sigma.update(y, v)]
    return items, flatten(subst_stmt(proc.body, proc.param, y))


def concrete_tid(f: int) -> Int:
    return Int(f)
