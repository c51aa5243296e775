"""Named example programs and seeded random program generators."""

from __future__ import annotations

import random

from .lang import Level, Program, parse_program

EXAMPLE1 = """\
# spawned task loops forever; main resumes once and assigns j
m(x) { while true { suspend; i := 1 } }
{ spawn(m, 0, z); suspend; j := 2 }
"""

EXAMPLE7 = """\
{ x := 1; y := x + 1 }
"""

# Two writers per value, arranged so that each guard is evaluated right
# after its condition was falsified. The leading skips delay the first
# guard evaluation until the writers are in phase.
EXAMPLE8 = """\
t0(u) { while true { b := true } }
t1(u) { while true { b := true } }
f0(u) { while true { b := false } }
f1(u) { while true { b := false } }
g0(u) { skip; skip; skip; :: !b; r0 := 1 }
g1(u) { skip; skip; skip; :: b; r1 := 1 }
{ b := true; spawn(t0, 0); spawn(t1, 0); spawn(g1, 0); spawn(f0, 0); spawn(f1, 0); spawn(g0, 0) }
"""

DEADLOCK = """\
# each task awaits the other one
p(x) { await b }
q(x) { await a }
{ spawn(p, 0, a); spawn(q, 0, b); await a }
"""

INFINITE_LOCAL = """\
{ while true { x := 1 - x } }
"""

NAMED = {
    "example1": (EXAMPLE1, Level.COOP),
    "example7": (EXAMPLE7, Level.WHILE),
    "example8": (EXAMPLE8, Level.GUARD),
    "deadlock": (DEADLOCK, Level.COOP),
    "infinite-local": (INFINITE_LOCAL, Level.COOP),
}


def named(name: str) -> Program:
    text, level = NAMED[name]
    return parse_program(text, level)


# ---------------------------------------------------------------- generators


class _Gen:
    def __init__(self, rng: random.Random, level: Level, nprocs: int, budget: int, shared: tuple):
        self.rng = rng
        self.level = level
        self.procs = [f"p{i}" for i in range(nprocs)]
        self.budget = budget
        self.shared = shared
        self.tids: list[str] = []
        self.owner = "t"
        self.loops = 0

    def expr(self, names: tuple, depth: int = 0) -> str:
        r = self.rng.random()
        if depth > 1 or r < 0.35:
            return str(self.rng.randint(0, 3))
        if r < 0.7:
            return self.rng.choice(names)
        op = self.rng.choice(["+", "-", "*"])
        return f"({self.expr(names, depth + 1)} {op} {self.expr(names, depth + 1)})"

    def cond(self, names: tuple) -> str:
        op = self.rng.choice(["<", "==", "!=", "<="])
        return f"{self.rng.choice(names)} {op} {self.rng.randint(0, 3)}"

    def block(self, names: tuple, writes: tuple, in_proc: bool, depth: int) -> str:
        n = self.rng.randint(1, 3)
        out = []
        for _ in range(n):
            if self.budget <= 0:
                break
            out.append(self.stmt(names, writes, in_proc, depth))
            if out[-1].startswith("::"):
                break  # a guard extends to the end of its block
        return "; ".join(out) if out else "skip"

    def stmt(self, names: tuple, writes: tuple, in_proc: bool, depth: int) -> str:
        self.budget -= 1
        rng = self.rng
        kinds = ["assign", "assign", "assign", "skip"]
        if depth < 2:
            kinds += ["if", "while"]
        if self.level != Level.WHILE and self.procs:
            kinds += ["spawn"]
        if self.level == Level.GUARD:
            kinds += ["guard"]
        if self.level == Level.COOP:
            kinds += ["suspend"]
            if self.tids:
                kinds += ["await"]
        kind = rng.choice(kinds)
        if kind == "assign":
            return f"{rng.choice(writes)} := {self.expr(names)}"
        if kind == "skip":
            return "skip"
        if kind == "if":
            return f"if {self.cond(names)} {{ {self.block(names, writes, in_proc, depth + 1)} }}"
        if kind == "while":
            # a dedicated counter keeps the loop bounded
            self.loops += 1
            ctr = f"{self.owner}k{self.loops}"
            body = self.block(names, writes, in_proc, depth + 1)
            return f"{ctr} := 0; while {ctr} < 2 {{ {body}; {ctr} := {ctr} + 1 }}"
        if kind == "spawn":
            proc = rng.choice(self.procs)
            if self.level == Level.COOP:
                self.loops += 1
                tid = f"{self.owner}{self.loops}"
                if depth == 0:
                    # only unconditional spawns may be awaited, so await never sees an unset id
                    self.tids.append(tid)
                return f"spawn({proc}, {self.expr(names)}, {tid})"
            return f"spawn({proc}, {self.expr(names)})"
        if kind == "guard":
            return f":: {self.cond(names)}; {self.block(names, writes, in_proc, depth + 1)}"
        if kind == "suspend":
            return "suspend"
        return f"await {rng.choice(self.tids)}"


def random_program(rng: random.Random, level: Level, max_procs: int = 3, max_stmts: int = 20) -> Program:
    """A random program that may interleave arbitrarily.

    Procedures only spawn procedures with a higher index, so spawning is
    bounded; loops are counter-bounded so runs terminate.
    """
    nprocs = rng.randint(0, max_procs) if level != Level.WHILE else 0
    shared = ("a", "b", "c")
    g = _Gen(rng, level, nprocs, max_stmts, shared)
    parts = []
    for i, name in enumerate(g.procs):
        g.procs = [f"p{j}" for j in range(i + 1, nprocs)]
        saved = g.tids
        g.tids = []
        g.owner = f"u{i}_"
        names = shared + ("x",)
        body = g.block(names, shared + ("x",), True, 0)
        g.tids = saved
        parts.append(f"{name}(x) {{ {body} }}")
    g.procs = [f"p{j}" for j in range(nprocs)]
    g.tids = []
    g.owner = "t"
    main = g.block(shared, shared, False, 0)
    if level == Level.COOP and g.tids and rng.random() < 0.5:
        main += f"; await {rng.choice(g.tids)}"
    return parse_program("\n".join(parts) + f"\n{{ {main} }}", level)


def confluent_program(rng: random.Random, level: Level, max_procs: int = 3, max_stmts: int = 20) -> Program:
    """A program whose final store does not depend on the interleaving.

    Only main spawns; every procedure writes its own variables and reads
    only those and its parameter. Guards wait on a flag that main sets
    after its spawns.
    """
    nprocs = rng.randint(1, max_procs)
    budget = [max_stmts]
    # one instance per procedure: two instances would race on the same variables
    parts = []
    for i in range(nprocs):
        own = (f"v{i}", f"w{i}")
        g = _Gen(rng, Level.WHILE, 0, max(1, budget[0] // (nprocs + 1)), own)
        g.owner = f"p{i}_"
        body = g.block(own + ("x",), own, True, 0)
        if level == Level.GUARD and rng.random() < 0.6:
            body = f":: flag == 1; {body}"
        elif level == Level.COOP and rng.random() < 0.5:
            body = f"suspend; {body}"
        parts.append(f"p{i}(x) {{ {body} }}")
    calls = []
    for i in rng.sample(range(nprocs), nprocs):
        arg = rng.randint(0, 3)
        if level == Level.COOP:
            calls.append(f"spawn(p{i}, {arg}, t{len(calls)})")
        else:
            calls.append(f"spawn(p{i}, {arg})")
    g = _Gen(rng, Level.WHILE, 0, 3, ("m0", "m1"))
    g.owner = "m"
    main = "; ".join(calls) + "; flag := 1; " + g.block(("m0", "m1"), ("m0", "m1"), False, 0)
    return parse_program("\n".join(parts) + f"\n{{ {main} }}", level)


def corpus(level: Level, n: int, seed: int = 0, confluent: bool = False) -> list[Program]:
    rng = random.Random(seed)
    make = confluent_program if confluent else random_program
    return [make(rng, level) for _ in range(n)]
