"""Fragment classification: linearity, per-variable dependency graphs,
cycle counting, and syntactic recognition of periodic length arithmetic.

The solver is a decision procedure on two nested fragments:

* acyclic   - linear formulas whose dependency graphs have no cycle
* one-cycle - at most one cycle per graph and periodic length arithmetic

Everything else is classified general; the solver still runs on it but
only as a semi-decision procedure.
"""

from __future__ import annotations

import enum
import math
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Tuple

from .terms import (AInt, AMod, AVar, ArithAtom, Equation, NormalizedFormula,
                    atom_repr, equation_string_vars, equation_str,
                    term_string_vars)
from .arith import _lin  # linear normalization shared with the backend


class FragmentTag(enum.Enum):
    ACYCLIC = "acyclic"
    ONE_CYCLE = "one-cycle"
    GENERAL = "general"


@dataclass(frozen=True)
class Fragment:
    tag: FragmentTag
    witness: str = ""


@dataclass
class DepGraph:
    """Directed dependency multigraph for one string variable."""

    root: str
    vertices: set = field(default_factory=set)
    leaves: set = field(default_factory=set)
    edges: List[Tuple[str, str]] = field(default_factory=list)

    def add_vertex(self, v: str) -> None:
        self.vertices.add(v)

    def add_edge(self, src: str, dst: str) -> None:
        self.edges.append((src, dst))

    def mark_leaf(self, v: str) -> None:
        self.vertices.add(v)
        self.leaves.add(v)
        self.edges = [(s, d) for s, d in self.edges if s != v]

    def out_degree(self, v: str) -> int:
        return sum(1 for s, _ in self.edges if s == v)


def is_linear(f: NormalizedFormula) -> bool:
    """No equation mentions the same string variable twice (both sides
    counted together)."""
    for eq in f.equations:
        seen = Counter()
        for term in (eq.lhs, eq.rhs):
            for a in term:
                name = getattr(a, "name", None) or getattr(a, "var", None)
                if name is not None:
                    seen[name] += 1
        if seen and seen.most_common(1)[0][1] > 1:
            return False
    return True


def _choose_intersect(var: str, worklist_eqs: List[Equation]):
    """Remove and return the first equation mentioning var, split into the
    side containing it and the other side."""
    for i, eq in enumerate(worklist_eqs):
        if var in term_string_vars(eq.lhs):
            del worklist_eqs[i]
            return eq.lhs, eq.rhs
        if var in term_string_vars(eq.rhs):
            del worklist_eqs[i]
            return eq.rhs, eq.lhs
    return None


def build_dep_graph(var: str, equations: Iterable[Equation]) -> DepGraph:
    """Worklist construction over a working copy of the equations.

    Each dequeue consumes at most one equation.  A variable equated to a
    ground word becomes a leaf; leaves lose their outgoing edges and are
    never enqueued again.  A drained variable that already has dependency
    edges is left as an ordinary exhausted vertex, so recorded cycles
    survive (marking it a leaf would erase the self-loop the fragment
    check exists to find).
    """
    g = DepGraph(root=var)
    g.add_vertex(var)
    pool = list(equations)
    wl = deque([var])
    while wl:
        cur = wl.popleft()
        if cur in g.leaves:
            continue
        picked = _choose_intersect(cur, pool)
        if picked is None:
            if g.out_degree(cur) == 0:
                g.mark_leaf(cur)
            continue
        tr_i, tr_d = picked
        dem = term_string_vars(tr_d)
        if not dem:
            for v in sorted(term_string_vars(tr_i)):
                g.mark_leaf(v)
        else:
            for v in sorted(dem):
                g.add_vertex(v)
                g.add_edge(cur, v)
                if v not in g.leaves:
                    wl.append(v)
    return g


def cycle_count(g: DepGraph) -> int:
    """Number of distinct simple cycles; parallel edges multiply."""
    mult = Counter(g.edges)
    adj: dict = {}
    for (s, d), k in mult.items():
        adj.setdefault(s, []).append((d, k))
    order = sorted(g.vertices)
    total = 0
    for start in order:
        # count simple cycles whose smallest vertex is `start`
        def walk(v: str, seen: frozenset, weight: int) -> int:
            found = 0
            for d, k in adj.get(v, ()):
                if d == start:
                    found += weight * k
                elif d > start and d not in seen:
                    found += walk(d, seen | {d}, weight * k)
            return found

        total += walk(start, frozenset((start,)), 1)
    return total


_PERIODIC_COEFFS = (-1, 0, 1)


def _octagonal_shape(atom: ArithAtom) -> bool:
    try:
        cl, kl = _lin(atom.lhs)
        cr, kr = _lin(atom.rhs)
    except ValueError:
        return False
    coeffs = dict(cl)
    for v, c in cr.items():
        coeffs[v] = coeffs.get(v, 0) - c
    coeffs = {v: c for v, c in coeffs.items() if c != 0}
    if len(coeffs) > 2:
        return False
    if not coeffs:
        return True
    g = 0
    for c in coeffs.values():
        g = math.gcd(g, abs(c))
    return all(c // g in _PERIODIC_COEFFS for c in coeffs.values())


def _mod_template(atom: ArithAtom) -> bool:
    # x mod p = r with integer constants p > 0 and r
    if atom.kind != "eq":
        return False
    for a, b in ((atom.lhs, atom.rhs), (atom.rhs, atom.lhs)):
        if isinstance(a, AMod) and isinstance(b, AInt):
            if (isinstance(a.left, AVar) and isinstance(a.right, AInt)
                    and a.right.value > 0):
                return True
    return False


def is_periodic_arith(atoms: Iterable[ArithAtom]) -> bool:
    """True when every atom fits the periodic templates: octagonal
    (+-x +-y <= k and the equalities it spans, hence also x = k and
    x' = +-x + k), or mod-by-constant on a variable.  max/min and mod by a
    non-constant divisor fall outside."""
    return all(_mod_template(a) or _octagonal_shape(a) for a in atoms)


def _first_nonperiodic(atoms: Iterable[ArithAtom]) -> Optional[ArithAtom]:
    for a in atoms:
        if not (_mod_template(a) or _octagonal_shape(a)):
            return a
    return None


def classify_fragment(f: NormalizedFormula) -> Fragment:
    """Classify a normalized formula; the witness explains any downgrade."""
    vars_in_eqs = sorted(set().union(
        *(equation_string_vars(e) for e in f.equations)) if f.equations
        else set())
    graphs = {v: build_dep_graph(v, f.equations) for v in vars_in_eqs}
    cycles = {v: cycle_count(g) for v, g in graphs.items()}
    linear = is_linear(f)
    acyclic = all(c == 0 for c in cycles.values())
    if linear and acyclic:
        return Fragment(FragmentTag.ACYCLIC)
    reasons = []
    if not linear:
        bad = next(e for e in f.equations
                   if any(k > 1 for k in _var_counts(e).values()))
        reasons.append(f"non-linear equation: {equation_str(bad)}")
    worst = max(cycles.values(), default=0)
    if worst > 0:
        v = next(v for v in vars_in_eqs if cycles[v] == worst)
        reasons.append(f"dependency graph of {v} has {worst} cycle(s)")
    if worst <= 1 and is_periodic_arith(f.arith):
        return Fragment(FragmentTag.ONE_CYCLE, "; ".join(reasons))
    bad_atom = _first_nonperiodic(f.arith)
    if bad_atom is not None:
        reasons.append(f"non-periodic arithmetic: {atom_repr(bad_atom)}")
    return Fragment(FragmentTag.GENERAL, "; ".join(reasons))


def _var_counts(eq: Equation) -> Counter:
    seen: Counter = Counter()
    for term in (eq.lhs, eq.rhs):
        for a in term:
            name = getattr(a, "name", None) or getattr(a, "var", None)
            if name is not None:
                seen[name] += 1
    return seen
