"""Trace semantics, deterministic schedulers and fairness checks for a family of small concurrent languages."""

from .lang import Level, Program, parse_program, validate_program
from .sched import run
from .lagc_global import explore
from .fairness import (
    check_fairness, check_run, detect_lasso, monitor_distance, verify_embedding,
)

__all__ = [
    "Level", "Program", "parse_program", "validate_program", "run", "explore",
    "check_fairness", "check_run", "detect_lasso", "monitor_distance",
    "verify_embedding",
]
