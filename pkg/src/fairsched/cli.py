"""Command-line front end: one command per process.

Machine-readable lines go to stdout; human summaries go to stderr.
Exit status: 1 for parse or validation errors, 2 for a fairness violation,
an embedding mismatch, a distance-monitor violation or an SOS disagreement,
0 otherwise.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .fairness import NOTIONS, check_run, detect_lasso, monitor_distance, verify_embedding
from .lagc_global import explore
from .lang import Level, ParseError, parse_program, validate_program
from .sched import DEFAULT_MAX_STEPS, final_store, run
from .sos_ref import diff_sos
from .trace import show_state

EXIT_OK, EXIT_INPUT, EXIT_FAIL = 0, 1, 2


@dataclass(frozen=True)
class CliConfig:
    command: str
    path: Path
    level: Level
    max_steps: int
    depth: int
    notion: str
    output: Optional[Path]
    seed: int


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fairsched", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name: str, help: str, *, steps=True, depth=False, notion=False, out=None):
        p = sub.add_parser(name, help=help)
        p.add_argument("file", type=Path)
        p.add_argument("--level", required=True, choices=[lv.value for lv in Level])
        p.add_argument("--seed", type=int, default=0, help="fresh-name spelling seed")
        if steps:
            p.add_argument("--max-steps", type=int, default=DEFAULT_MAX_STEPS)
        if depth:
            p.add_argument("--depth", type=int, required=True)
        if notion:
            p.add_argument("--notion", required=True, choices=NOTIONS)
        if out:
            p.add_argument(out, type=Path, dest="output", default=None)
        return p

    add("run", "execute the deterministic scheduler", out="--emit-trace")
    add("explore", "dump the bounded nondeterministic graph", steps=False, depth=True, out="--emit-graph")
    add("check-fairness", "detect a lasso in the scheduler run and check a fairness notion", notion=True)
    add("verify-embedding", "replay the scheduler run in the nondeterministic semantics")
    add("monitor-distance", "check scheduling distances along the scheduler run")
    add("diff-sos", "compare the SOS and LAGC schedulers")
    return ap


def _config(ns: argparse.Namespace) -> CliConfig:
    return CliConfig(
        ns.command, ns.file, Level(ns.level),
        getattr(ns, "max_steps", DEFAULT_MAX_STEPS), getattr(ns, "depth", 0),
        getattr(ns, "notion", "weak"), getattr(ns, "output", None), ns.seed,
    )


def _emit(lines, out=None) -> None:
    out = out or sys.stdout
    for line in lines:
        print(line, file=out)


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


def _write(path: Path, lines) -> None:
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _load(cfg: CliConfig):
    try:
        text = cfg.path.read_text(encoding="utf-8")
    except OSError as exc:
        _say(f"error: cannot read {cfg.path}: {exc.strerror}")
        return None
    try:
        program = parse_program(text, cfg.level)
    except ParseError as exc:
        _say(f"{cfg.path}:{exc}")
        return None
    report = validate_program(program)
    for line in report.lines():
        _say(f"{cfg.path}: {line}")
    return program if report.ok else None


def execute(cfg: CliConfig) -> int:
    program = _load(cfg)
    if program is None:
        return EXIT_INPUT
    if cfg.max_steps < 0:
        _say("error: --max-steps must be non-negative")
        return EXIT_INPUT

    if cfg.command == "run":
        rec = run(program, cfg.max_steps, cfg.seed)
        if cfg.output:
            _write(cfg.output, rec.dump())
        _emit([f"OUTCOME {rec.outcome.value}", f"STORE {show_state(final_store(rec.final, program))}"])
        _say(f"{len(rec)} scheduler steps, {rec.outcome.value}")
        return EXIT_OK

    if cfg.command == "explore":
        if cfg.depth < 0:
            _say("error: --depth must be non-negative")
            return EXIT_INPUT
        g = explore(program, cfg.depth, seed=cfg.seed)
        lines = g.dump()
        if cfg.output:
            _write(cfg.output, lines)
        _emit(lines)
        _say(f"{len(g.nodes)} nodes, {len(g.edges)} edges" + (" (truncated)" if g.truncated else ""))
        return EXIT_OK

    rec = run(program, cfg.max_steps, cfg.seed)

    if cfg.command == "check-fairness":
        verdict = check_run(rec, cfg.notion)
        _emit([verdict.line()])
        lasso = detect_lasso(rec)
        if lasso is not None:
            _say(f"lasso: prefix {lasso.start} steps, cycle {lasso.end - lasso.start} steps")
        else:
            _say(f"no lasso within {len(rec)} steps ({rec.outcome.value})")
        return EXIT_FAIL if verdict.violation else EXIT_OK

    if cfg.command == "verify-embedding":
        rep = verify_embedding(rec)
        _emit(rep.lines())
        _say(f"{rep.progress} progress and {rep.silent} silent steps checked")
        return EXIT_OK if rep.ok else EXIT_FAIL

    if cfg.command == "monitor-distance":
        rep = monitor_distance(rec)
        _emit(rep.lines())
        _say(f"{rep.checks} distance checks, {len(rep.increases)} justified increases")
        return EXIT_OK if rep.ok else EXIT_FAIL

    if cfg.command == "diff-sos":
        diff = diff_sos(program, cfg.max_steps, cfg.seed)
        _emit(diff.lines())
        _say("schedulers agree" if diff.ok else "schedulers disagree")
        return EXIT_OK if diff.ok else EXIT_FAIL

    raise AssertionError(cfg.command)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        ns = _parser().parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors; 2 is reserved for findings here
        return EXIT_INPUT if exc.code else EXIT_OK
    return execute(_config(ns))


if __name__ == "__main__":
    sys.exit(main())
