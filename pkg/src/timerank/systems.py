"""First-order transition systems."""

from __future__ import annotations

from dataclasses import dataclass

from .logic import Formula, Signature, conj


@dataclass(frozen=True)
class TransitionSystem:
    """Axioms and initial states are one-state formulas; the transition
    relation is a two-state formula reading primed symbols in the post-state."""

    signature: Signature
    axioms: tuple = ()
    inits: tuple = ()
    transitions: tuple = ()

    @property
    def axiom(self) -> Formula:
        return conj(*self.axioms)

    @property
    def init(self) -> Formula:
        return conj(*self.inits)

    @property
    def transition(self) -> Formula:
        return conj(*self.transitions)


@dataclass(frozen=True)
class Property:
    formula: Formula
