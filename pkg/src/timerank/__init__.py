"""Liveness verification of first-order transition systems by reduction to
timer-annotated safety and implicit rankings."""

from .frontend import Bundle, load
from .ranking import build, constructor_count
from .smt import Solver, check_all
from .timers import augment
from .vcgen import plan

__version__ = "0.1.0"

__all__ = [
    "Bundle",
    "Solver",
    "augment",
    "build",
    "check_all",
    "constructor_count",
    "load",
    "plan",
]
