"""Reduction of a system of word equations to one equivalent equation.

Two equations X1=Y1 and X2=Y2 over an alphabet with two distinct
characters c1, c2 hold together exactly when

    X1 c1 X2 X1 c2 X2  =  Y1 c1 Y2 Y1 c2 Y2

holds, and folding the pairing over a list collapses any system into a
single equation with the same unknowns.  This is exposed as an explicit
preprocessing step only: the encoding duplicates variable occurrences,
which generally leaves the decidable fragments.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

from .terms import CChar, Equation


class EqualSeparatorsError(Exception):
    pass


class AlphabetTooSmallError(Exception):
    pass


@dataclass(frozen=True)
class EquationSystem:
    equations: tuple
    alphabet: tuple


def pair_encode(e1: Equation, e2: Equation, c1: str, c2: str) -> Equation:
    """Encode two equations as one using two distinct separator characters."""
    if c1 == c2:
        raise EqualSeparatorsError(f"separators must differ, got {c1!r} twice")
    a, b = (CChar(c1),), (CChar(c2),)
    lhs = e1.lhs + a + e2.lhs + e1.lhs + b + e2.lhs
    rhs = e1.rhs + a + e2.rhs + e1.rhs + b + e2.rhs
    return Equation(lhs, rhs)


def reduce_system(sys: EquationSystem) -> Equation:
    """Left fold of the pairing over the system; the separators are the two
    smallest characters of the alphabet."""
    if len(sys.alphabet) < 2:
        raise AlphabetTooSmallError(
            "the reduction needs at least two characters")
    eqs: List[Equation] = list(sys.equations)
    if not eqs:
        return Equation((), ())
    c1, c2 = sorted(sys.alphabet)[:2]
    out = eqs[0]
    for e in eqs[1:]:
        out = pair_encode(out, e, c1, c2)
    return out
