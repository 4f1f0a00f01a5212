"""Explicit-state semantics used to cross-check the symbolic pipeline."""

from .lasso import (
    Lasso,
    ReductionReport,
    check_reduction,
    holds,
    holds_unrolled,
    label_lasso,
    natural_timers,
    random_lasso,
    random_structure,
    search_lasso,
)
from .materialize import (
    INSTANCE_CAP,
    RankingReport,
    check_strict_order,
    materialize,
    random_strict_order,
    verify_ranking,
)
from .structures import INF, FiniteStructure, assignments, eval_fo, eval_term

__all__ = [
    "INF",
    "INSTANCE_CAP",
    "FiniteStructure",
    "Lasso",
    "RankingReport",
    "ReductionReport",
    "assignments",
    "check_reduction",
    "check_strict_order",
    "eval_fo",
    "eval_term",
    "holds",
    "holds_unrolled",
    "label_lasso",
    "materialize",
    "natural_timers",
    "random_lasso",
    "random_strict_order",
    "random_structure",
    "search_lasso",
    "verify_ranking",
]
