"""Syntax of the four toy languages: While, Spawn, Guard and CoopWhile.

Concrete syntax::

    m(x) { body }          # procedure declarations, any number
    { main }               # main block

Statements are separated by ``;``. A guard ``:: g; s1; s2`` guards the rest
of the enclosing block. ``spawn(m, e)`` is the Spawn/Guard form,
``spawn(m, e, x)`` the CoopWhile form that stores the new task id in ``x``.
Comments run from ``#`` to the end of the line.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Optional, Union

FRESH_PREFIX = "$"


class Level(str, enum.Enum):
    WHILE = "while"
    SPAWN = "spawn"
    GUARD = "guard"
    COOP = "coop"


class ParseError(Exception):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {msg}" if line else msg)
        self.msg = msg
        self.line = line
        self.col = col


class LevelError(ParseError):
    """A construct that is not part of the declared language level."""


class EvalError(Exception):
    """Raised on unbound variables; signals a bug in the semantics, not user error."""


# ---------------------------------------------------------------- expressions


def _merge_names(*groups: tuple[str, ...]) -> tuple[str, ...]:
    seen: dict[str, None] = {}
    for g in groups:
        for n in g:
            seen.setdefault(n, None)
    return tuple(seen)


@dataclass(frozen=True)
class Int:
    value: int
    names = ()


@dataclass(frozen=True)
class Bool:
    value: bool
    names = ()


@dataclass(frozen=True)
class Var:
    name: str

    @property
    def names(self) -> tuple[str, ...]:
        return (self.name,)


@dataclass(frozen=True)
class Not:
    operand: "Expr"
    names: tuple[str, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "names", self.operand.names)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"
    names: tuple[str, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "names", _merge_names(self.left.names, self.right.names))


Expr = Union[Int, Bool, Var, Not, BinOp]
Value = Union[Int, Bool]

TRUE = Bool(True)
FALSE = Bool(False)

BINARY_OPS = ("||", "&&", "==", "!=", "<", "<=", ">", ">=", "+", "-", "*")
_PRECEDENCE = {
    "||": 1, "&&": 2,
    "==": 3, "!=": 3,
    "<": 4, "<=": 4, ">": 4, ">=": 4,
    "+": 5, "-": 5,
    "*": 6,
}


def is_value(e) -> bool:
    return isinstance(e, (Int, Bool))


def as_int(v: Value) -> int:
    return int(v.value)


def as_bool(v: Value) -> bool:
    return bool(v.value)


def apply_op(op: str, a: Value, b: Value) -> Value:
    """Total evaluation of a binary operator on values.

    Booleans coerce to 0/1 under arithmetic and comparison; integers coerce to
    ``value != 0`` under ``&&`` and ``||``.
    """
    if op == "&&":
        return Bool(as_bool(a) and as_bool(b))
    if op == "||":
        return Bool(as_bool(a) or as_bool(b))
    x, y = as_int(a), as_int(b)
    if op == "+":
        return Int(x + y)
    if op == "-":
        return Int(x - y)
    if op == "*":
        return Int(x * y)
    if op == "==":
        return Bool(x == y)
    if op == "!=":
        return Bool(x != y)
    if op == "<":
        return Bool(x < y)
    if op == "<=":
        return Bool(x <= y)
    if op == ">":
        return Bool(x > y)
    if op == ">=":
        return Bool(x >= y)
    raise ValueError(f"unknown operator {op!r}")


def show_value(v) -> str:
    if isinstance(v, Bool):
        return "true" if v.value else "false"
    if isinstance(v, Int):
        return str(v.value)
    return show_expr(v)


def show_expr(e, parent: int = 0) -> str:
    if isinstance(e, Int):
        return str(e.value)
    if isinstance(e, Bool):
        return "true" if e.value else "false"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Not):
        return "!" + show_expr(e.operand, 7)
    if isinstance(e, BinOp):
        prec = _PRECEDENCE[e.op]
        # all binary operators are left-associative
        text = f"{show_expr(e.left, prec)} {e.op} {show_expr(e.right, prec + 1)}"
        return f"({text})" if prec < parent else text
    # Star and other semantic-only atoms know how to print themselves
    return str(e)


def subst_expr(e: Expr, old: str, new: str) -> Expr:
    if old not in e.names:
        return e
    if isinstance(e, Var):
        return Var(new)
    if isinstance(e, Not):
        return Not(subst_expr(e.operand, old, new))
    assert isinstance(e, BinOp)
    return BinOp(e.op, subst_expr(e.left, old, new), subst_expr(e.right, old, new))


# ----------------------------------------------------------------- statements


class StmtId(NamedTuple):
    """Source position plus a sequence number unique within one program."""

    line: int
    col: int
    seq: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}#{self.seq}"


def _fresh(names: tuple[str, ...]) -> tuple[str, ...]:
    return tuple(n for n in names if n.startswith(FRESH_PREFIX))


@dataclass(frozen=True)
class Stmt:
    sid: StmtId

    def __post_init__(self):
        object.__setattr__(self, "fresh_names", _fresh(self._names()))

    def _names(self) -> tuple[str, ...]:
        return ()

    def children(self) -> tuple["Stmt", ...]:
        return ()


@dataclass(frozen=True)
class Skip(Stmt):
    pass


@dataclass(frozen=True)
class Assign(Stmt):
    var: str
    expr: Expr

    def _names(self):
        return _merge_names((self.var,), self.expr.names)


@dataclass(frozen=True)
class If(Stmt):
    cond: Expr
    body: Stmt

    def _names(self):
        return _merge_names(self.cond.names, self.body.fresh_names)

    def children(self):
        return (self.body,)


@dataclass(frozen=True)
class Seq(Stmt):
    first: Stmt
    second: Stmt

    def _names(self):
        return _merge_names(self.first.fresh_names, self.second.fresh_names)

    def children(self):
        return (self.first, self.second)


@dataclass(frozen=True)
class While(Stmt):
    cond: Expr
    body: Stmt

    def _names(self):
        return _merge_names(self.cond.names, self.body.fresh_names)

    def children(self):
        return (self.body,)


@dataclass(frozen=True)
class Spawn(Stmt):
    """``spawn(m, e)`` when ``target`` is None, ``spawn(m, e, x)`` otherwise."""

    proc: str
    arg: Expr
    target: Optional[str] = None

    def _names(self):
        extra = (self.target,) if self.target else ()
        return _merge_names(self.arg.names, extra)


@dataclass(frozen=True)
class Guard(Stmt):
    cond: Expr
    body: Stmt

    def _names(self):
        return _merge_names(self.cond.names, self.body.fresh_names)

    def children(self):
        return (self.body,)


@dataclass(frozen=True)
class Suspend(Stmt):
    pass


@dataclass(frozen=True)
class Await(Stmt):
    var: str

    def _names(self):
        return (self.var,)


@dataclass(frozen=True)
class Return(Stmt):
    """Runtime-only end marker of a procedure body."""


def flatten(s: Stmt) -> tuple[Stmt, ...]:
    """Sequence nodes flattened to a list; applies ``∅; s ⇝ s`` for free."""
    if isinstance(s, Seq):
        return flatten(s.first) + flatten(s.second)
    return (s,)


def walk(s: Stmt) -> Iterator[Stmt]:
    yield s
    for c in s.children():
        yield from walk(c)


def subst_stmt(s: Stmt, old: str, new: str) -> Stmt:
    """Rename variable ``old`` to ``new``; statement ids are kept."""
    if isinstance(s, Assign):
        var = new if s.var == old else s.var
        return Assign(s.sid, var, subst_expr(s.expr, old, new))
    if isinstance(s, If):
        return If(s.sid, subst_expr(s.cond, old, new), subst_stmt(s.body, old, new))
    if isinstance(s, While):
        return While(s.sid, subst_expr(s.cond, old, new), subst_stmt(s.body, old, new))
    if isinstance(s, Guard):
        return Guard(s.sid, subst_expr(s.cond, old, new), subst_stmt(s.body, old, new))
    if isinstance(s, Seq):
        return Seq(s.sid, subst_stmt(s.first, old, new), subst_stmt(s.second, old, new))
    if isinstance(s, Spawn):
        target = new if s.target == old else s.target
        return Spawn(s.sid, s.proc, subst_expr(s.arg, old, new), target)
    if isinstance(s, Await):
        return Await(s.sid, new if s.var == old else s.var)
    return s


def show_stmt(s: Stmt, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(s, Seq):
        return f"{show_stmt(s.first, indent)};\n{show_stmt(s.second, indent)}"
    if isinstance(s, Skip):
        return pad + "skip"
    if isinstance(s, Assign):
        return f"{pad}{s.var} := {show_expr(s.expr)}"
    if isinstance(s, (If, While)):
        kw = "if" if isinstance(s, If) else "while"
        return f"{pad}{kw} {show_expr(s.cond)} {{\n{show_stmt(s.body, indent + 1)}\n{pad}}}"
    if isinstance(s, Guard):
        body = show_stmt(s.body, indent).lstrip(" ")
        return f"{pad}:: {show_expr(s.cond)}; {body}"
    if isinstance(s, Spawn):
        tail = f", {s.target}" if s.target else ""
        return f"{pad}spawn({s.proc}, {show_expr(s.arg)}{tail})"
    if isinstance(s, Suspend):
        return pad + "suspend"
    if isinstance(s, Await):
        return f"{pad}await {s.var}"
    if isinstance(s, Return):
        return pad + "return"
    raise TypeError(s)


def show_inline(s: Stmt) -> str:
    """One-line rendering, used in reports and identities."""
    return " ".join(show_stmt(s).split())


@dataclass(frozen=True)
class Procedure:
    name: str
    param: str
    body: Stmt
    sid: StmtId

    @property
    def end(self) -> Return:
        # one Return per procedure, identified by the declaration itself
        return Return(self.sid)


@dataclass(frozen=True)
class Program:
    level: Level
    procs: dict
    main: Stmt
    globals: tuple[str, ...]

    def proc(self, name: str) -> Procedure:
        return self.procs[name]

    def statements(self) -> Iterator[Stmt]:
        for p in self.procs.values():
            yield from walk(p.body)
        yield from walk(self.main)


def show_program(p: Program) -> str:
    parts = []
    for proc in p.procs.values():
        parts.append(f"{proc.name}({proc.param}) {{\n{show_stmt(proc.body, 1)}\n}}")
    parts.append(f"{{\n{show_stmt(p.main, 1)}\n}}")
    return "\n".join(parts) + "\n"


# --------------------------------------------------------------------- parser

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+|\#[^\n]*) |
    (?P<nl>\n) |
    (?P<num>\d+) |
    (?P<ident>[A-Za-z_][A-Za-z0-9_]*) |
    (?P<op>::|:=|==|!=|<=|>=|&&|\|\||[-+*<>!(){};,])
    """,
    re.VERBOSE,
)

KEYWORDS = {"skip", "if", "while", "spawn", "suspend", "await", "return", "true", "false"}


class Token(NamedTuple):
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    line, start = 1, 0
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - start + 1)
        kind = m.lastgroup
        col = pos - start + 1
        if kind == "nl":
            line += 1
            start = m.end()
        elif kind != "ws":
            tok_kind = kind
            if kind == "ident" and m.group() in KEYWORDS:
                tok_kind = "kw"
            tokens.append(Token(tok_kind, m.group(), line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - start + 1))
    return tokens


_ALLOWED = {
    Level.WHILE: set(),
    Level.SPAWN: {"spawn2", "procs"},
    Level.GUARD: {"spawn2", "procs", "guard"},
    Level.COOP: {"spawn3", "procs", "suspend", "await"},
}


class _Parser:
    def __init__(self, text: str, level: Level):
        self.toks = tokenize(text)
        self.i = 0
        self.level = level
        self.seq = 0

    # token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg: str, tok: Optional[Token] = None):
        tok = tok or self.tok
        raise ParseError(msg, tok.line, tok.col)

    def need(self, feature: str, tok: Token, what: str):
        if feature not in _ALLOWED[self.level]:
            raise LevelError(f"{what} is not part of the {self.level.value} language", tok.line, tok.col)

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("op", "kw")

    def eat(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            self.error(f"expected {text!r}, found {found!r}")
        tok = self.tok
        self.i += 1
        return tok

    def ident(self) -> Token:
        if self.tok.kind != "ident":
            self.error(f"expected identifier, found {self.tok.text or 'end of input'!r}")
        tok = self.tok
        self.i += 1
        return tok

    def sid(self, tok: Token) -> StmtId:
        self.seq += 1
        return StmtId(tok.line, tok.col, self.seq)

    # grammar
    def program(self) -> Program:
        procs: dict[str, Procedure] = {}
        while self.tok.kind == "ident":
            name_tok = self.ident()
            if name_tok.text in procs:
                self.error(f"duplicate procedure {name_tok.text!r}", name_tok)
            self.need("procs", name_tok, "a procedure declaration")
            sid = self.sid(name_tok)
            self.eat("(")
            param = self.ident().text
            self.eat(")")
            body = self.block()
            procs[name_tok.text] = Procedure(name_tok.text, param, body, sid)
        main = self.block()
        if self.tok.kind != "eof":
            self.error(f"unexpected {self.tok.text!r} after main block")
        return Program(self.level, procs, main, _globals(procs, main))

    def block(self) -> Stmt:
        self.eat("{")
        s = self.stmts()
        self.eat("}")
        return s

    def stmts(self) -> Stmt:
        first_tok = self.tok
        items = [self.stmt()]
        while self.at(";"):
            self.eat(";")
            if self.at("}"):
                break
            if isinstance(items[-1], Guard):
                break
            items.append(self.stmt())
        # right-nested sequence; ids follow source order of the sequence heads
        s = items[-1]
        for prev in reversed(items[:-1]):
            s = Seq(self.sid(first_tok), prev, s)
        return s

    def stmt(self) -> Stmt:
        tok = self.tok
        if self.at("{"):
            return self.block()
        if self.at("skip"):
            self.eat("skip")
            return Skip(self.sid(tok))
        if self.at("if") or self.at("while"):
            self.i += 1
            sid = self.sid(tok)
            cond = self.expr()
            body = self.block()
            return (If if tok.text == "if" else While)(sid, cond, body)
        if self.at("spawn"):
            self.eat("spawn")
            sid = self.sid(tok)
            self.eat("(")
            proc = self.ident().text
            self.eat(",")
            arg = self.expr()
            target = None
            if self.at(","):
                self.eat(",")
                target = self.ident().text
            self.eat(")")
            if target is None:
                self.need("spawn2", tok, "spawn(m, e)")
            else:
                self.need("spawn3", tok, "spawn(m, e, x)")
            return Spawn(sid, proc, arg, target)
        if self.at("suspend"):
            self.need("suspend", tok, "suspend")
            self.eat("suspend")
            return Suspend(self.sid(tok))
        if self.at("await"):
            self.need("await", tok, "await")
            self.eat("await")
            sid = self.sid(tok)
            return Await(sid, self.ident().text)
        if self.at("return"):
            self.error("'return' only appears at runtime and cannot be written in source")
        if self.at("::"):
            self.need("guard", tok, "a guarded statement")
            self.eat("::")
            sid = self.sid(tok)
            cond = self.expr()
            self.eat(";")
            body = self.stmts()
            return Guard(sid, cond, body)
        if self.tok.kind == "ident":
            var = self.ident()
            self.eat(":=")
            sid = self.sid(var)
            return Assign(sid, var.text, self.expr())
        self.error(f"expected a statement, found {self.tok.text or 'end of input'!r}")

    def expr(self, min_prec: int = 1) -> Expr:
        left = self.unary()
        while self.tok.kind == "op" and _PRECEDENCE.get(self.tok.text, 0) >= min_prec:
            op = self.tok.text
            self.i += 1
            right = self.expr(_PRECEDENCE[op] + 1)
            left = BinOp(op, left, right)
        return left

    def unary(self) -> Expr:
        tok = self.tok
        if self.at("!"):
            self.eat("!")
            return Not(self.unary())
        if self.at("("):
            self.eat("(")
            e = self.expr()
            self.eat(")")
            return e
        if tok.kind == "num":
            self.i += 1
            return Int(int(tok.text))
        if self.at("true") or self.at("false"):
            self.i += 1
            return Bool(tok.text == "true")
        if tok.kind == "ident":
            self.i += 1
            return Var(tok.text)
        self.error(f"expected an expression, found {tok.text or 'end of input'!r}")


def _stmt_vars(s: Stmt) -> set[str]:
    out: set[str] = set()
    for node in walk(s):
        if isinstance(node, Assign):
            out.add(node.var)
            out.update(node.expr.names)
        elif isinstance(node, (If, While, Guard)):
            out.update(node.cond.names)
        elif isinstance(node, Spawn):
            out.update(node.arg.names)
            if node.target:
                out.add(node.target)
        elif isinstance(node, Await):
            out.add(node.var)
    return out


def _globals(procs: dict, main: Stmt) -> tuple[str, ...]:
    names = _stmt_vars(main)
    for p in procs.values():
        names |= _stmt_vars(p.body) - {p.param}
    return tuple(sorted(names))


def parse_program(text: str, level: Union[Level, str]) -> Program:
    return _Parser(text, Level(level)).program()


# ----------------------------------------------------------------- validation


@dataclass
class ValidationReport:
    errors: list[str] = field(default_factory=list)
    lints: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def lines(self) -> list[str]:
        return [f"error: {e}" for e in self.errors] + [f"lint: {w}" for w in self.lints]


def validate_program(p: Program) -> ValidationReport:
    report = ValidationReport()
    spawned_into: set[str] = set()
    for s in p.statements():
        if isinstance(s, Spawn):
            if s.proc not in p.procs:
                report.errors.append(f"{s.sid}: undeclared procedure {s.proc!r}")
            if s.target:
                spawned_into.add(s.target)
    for s in p.statements():
        if isinstance(s, Await) and s.var not in spawned_into:
            report.lints.append(f"{s.sid}: await on never-assigned task variable {s.var!r}")
    return report
