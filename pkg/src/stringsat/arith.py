"""Exact decision procedure for quantifier-free linear integer arithmetic
with mod-by-constant, max and min.

max/min/mod are lowered to pure linear systems first (case splits and fresh
variables).  Each system is decided by integer-exact preprocessing
(Euclidean elimination of equalities, gcd tightening of inequalities)
followed by branch and bound over an exact rational simplex relaxation.
All arithmetic uses Python's unbounded ints and Fractions; no floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from .terms import (AAdd, AInt, ALen, AMax, AMin, AMod, ANeg, AScale, AVar,
                    ArithAtom, ArithExpr, NonConstantDivisorError, atom_le,
                    atom_eq, eval_atom)


class ArithInternalError(Exception):
    """A resource cap tripped; never reported as a verdict."""


# A linear atom: sum(coeffs[v] * v) (kind) const, kind in {'eq', 'le'}
@dataclass(frozen=True)
class LinAtom:
    kind: str
    coeffs: tuple   # sorted ((var, coef), ...), coef != 0
    const: int

    def coeff_map(self) -> dict:
        return dict(self.coeffs)


@dataclass(frozen=True)
class LinearSystem:
    atoms: tuple  # of LinAtom


def _lin(e: ArithExpr) -> Tuple[Dict[str, int], int]:
    if isinstance(e, AInt):
        return {}, e.value
    if isinstance(e, AVar):
        return {e.name: 1}, 0
    if isinstance(e, ALen):
        raise ValueError("length expression reached the arithmetic backend")
    if isinstance(e, AScale):
        cs, k = _lin(e.inner)
        return {v: e.factor * c for v, c in cs.items()}, e.factor * k
    if isinstance(e, ANeg):
        cs, k = _lin(e.inner)
        return {v: -c for v, c in cs.items()}, -k
    if isinstance(e, AAdd):
        c1, k1 = _lin(e.left)
        c2, k2 = _lin(e.right)
        out = dict(c1)
        for v, c in c2.items():
            out[v] = out.get(v, 0) + c
        return out, k1 + k2
    raise ValueError(f"non-linear construct not lowered: {e!r}")


def _mk_linatom(kind: str, lhs: ArithExpr, rhs: ArithExpr) -> LinAtom:
    cl, kl = _lin(lhs)
    cr, kr = _lin(rhs)
    coeffs = dict(cl)
    for v, c in cr.items():
        coeffs[v] = coeffs.get(v, 0) - c
    coeffs = {v: c for v, c in coeffs.items() if c != 0}
    return LinAtom(kind, tuple(sorted(coeffs.items())), kr - kl)


# ---------------------------------------------------------------------------
# Lowering: eliminate mod / max / min
# ---------------------------------------------------------------------------

_LOWER_CAP = 4096


class _Fresh:
    def __init__(self, taken: set):
        self.n = 0
        self.taken = taken

    def __call__(self, prefix: str) -> str:
        while True:
            name = f"${prefix}{self.n}"
            self.n += 1
            if name not in self.taken:
                return name


def _collect_vars(e: ArithExpr, out: set) -> None:
    if isinstance(e, AVar):
        out.add(e.name)
    elif isinstance(e, (AScale, ANeg)):
        _collect_vars(e.inner, out)
    elif isinstance(e, (AAdd, AMod, AMax, AMin)):
        _collect_vars(e.left, out)
        _collect_vars(e.right, out)


def _const_value(e: ArithExpr) -> Optional[int]:
    try:
        cs, k = _lin(e)
    except ValueError:
        return None
    return k if not cs else None


def _lower_expr(e: ArithExpr, fresh: _Fresh,
                memo: dict) -> List[Tuple[ArithExpr, tuple]]:
    """Alternatives (rewritten expression, side atoms) for one expression.

    Results are memoized per syntactic subexpression, so repeated subterms
    share one encoding; without that, two copies of the same mod term get
    independent quotient variables whose implied equality is invisible to
    the rational relaxation.
    """
    if e in memo:
        return memo[e]
    out = _lower_expr_raw(e, fresh, memo)
    memo[e] = out
    return out


def _lower_expr_raw(e: ArithExpr, fresh: _Fresh,
                    memo: dict) -> List[Tuple[ArithExpr, tuple]]:
    if isinstance(e, (AInt, AVar)):
        return [(e, ())]
    if isinstance(e, ALen):
        raise ValueError("length expression reached the arithmetic backend")
    if isinstance(e, AScale):
        return [(AScale(e.factor, x), side)
                for x, side in _lower_expr(e.inner, fresh, memo)]
    if isinstance(e, ANeg):
        return [(ANeg(x), side)
                for x, side in _lower_expr(e.inner, fresh, memo)]
    if isinstance(e, AAdd):
        out = []
        for xl, sl in _lower_expr(e.left, fresh, memo):
            for xr, sr in _lower_expr(e.right, fresh, memo):
                out.append((AAdd(xl, xr), sl + sr))
        return out
    if isinstance(e, AMod):
        p = _const_value(e.right)
        if p is None or p <= 0:
            raise NonConstantDivisorError(
                "mod divisor must be a positive integer constant")
        out = []
        for xl, sl in _lower_expr(e.left, fresh, memo):
            q, r = fresh("q"), fresh("r")
            side = sl + (
                atom_eq(xl, AAdd(AScale(p, AVar(q)), AVar(r))),
                atom_le(AInt(0), AVar(r)),
                atom_le(AVar(r), AInt(p - 1)),
            )
            out.append((AVar(r), side))
        return out
    if isinstance(e, (AMax, AMin)):
        out = []
        for xl, sl in _lower_expr(e.left, fresh, memo):
            for xr, sr in _lower_expr(e.right, fresh, memo):
                m = fresh("v")
                if isinstance(e, AMax):
                    cases = [(atom_eq(AVar(m), xl), atom_le(xr, xl)),
                             (atom_eq(AVar(m), xr), atom_le(xl, xr))]
                else:
                    cases = [(atom_eq(AVar(m), xl), atom_le(xl, xr)),
                             (atom_eq(AVar(m), xr), atom_le(xr, xl))]
                for pick, guard in cases:
                    out.append((AVar(m), sl + sr + (pick, guard)))
        return out
    raise TypeError(f"not an arithmetic expression: {e!r}")


def lower(atoms) -> List[LinearSystem]:
    """Case-split max/min and encode mod, yielding pure linear systems whose
    disjunction is equivalent to the input conjunction."""
    taken: set = set()
    for a in atoms:
        _collect_vars(a.lhs, taken)
        _collect_vars(a.rhs, taken)
    fresh = _Fresh(taken)
    memo: dict = {}
    systems: List[tuple] = [()]
    for a in atoms:
        branches = []
        for xl, sl in _lower_expr(a.lhs, fresh, memo):
            for xr, sr in _lower_expr(a.rhs, fresh, memo):
                branches.append((ArithAtom(a.kind, xl, xr),) + sl + sr)
        systems = [s + b for s in systems for b in branches]
        if len(systems) > _LOWER_CAP:
            raise ArithInternalError("case split explosion in lowering")
    out = []
    for sys_atoms in systems:
        lin = tuple(_mk_linatom(a.kind, a.lhs, a.rhs) for a in sys_atoms)
        out.append(LinearSystem(lin))
    return out


# ---------------------------------------------------------------------------
# Integer preprocessing
# ---------------------------------------------------------------------------

def _gcd_many(xs) -> int:
    g = 0
    for x in xs:
        g = math.gcd(g, abs(x))
    return g


def _symmetric_mod(a: int, m: int) -> int:
    # value in [-m/2, m/2) congruent to a
    r = a % m
    return r - m if r >= (m + 1) // 2 else r


def _subst_into(coeffs: dict, const: int, var: str,
                expr: Tuple[dict, int]) -> Tuple[dict, int]:
    # replace var by the linear expr (coeffs, const form)
    if var not in coeffs:
        return coeffs, const
    f = coeffs.pop(var)
    ecs, ek = expr
    for v, c in ecs.items():
        coeffs[v] = coeffs.get(v, 0) + f * c
    return {v: c for v, c in coeffs.items() if c != 0}, const - f * ek


class _Unsat(Exception):
    pass


def _eliminate_equalities(eqs: List[Tuple[dict, int]],
                          ineqs: List[Tuple[dict, int]], fresh: _Fresh):
    """Solve the equality subsystem over the integers.

    Returns (remaining inequalities, substitution list) where the
    substitution list holds (var, (coeffs, const)) entries in elimination
    order.  Raises _Unsat when a gcd divisibility test fails.
    """
    subs: List[Tuple[str, Tuple[dict, int]]] = []
    guard = 0
    while eqs:
        guard += 1
        if guard > 10000:
            raise ArithInternalError("equality elimination did not converge")
        coeffs, const = eqs.pop()
        coeffs = {v: c for v, c in coeffs.items() if c != 0}
        if not coeffs:
            if const != 0:
                raise _Unsat()
            continue
        g = _gcd_many(coeffs.values())
        if const % g != 0:
            raise _Unsat()
        coeffs = {v: c // g for v, c in coeffs.items()}
        const //= g
        unit = next((v for v, c in coeffs.items() if abs(c) == 1), None)
        if unit is not None:
            c = coeffs.pop(unit)
            # unit*c + rest = const  =>  unit = (const - rest)/c
            expr = ({v: -cc * c for v, cc in coeffs.items()}, const * c)
            subs.append((unit, expr))
            eqs = [_subst_into(dict(cs), k, unit, expr) for cs, k in eqs]
            ineqs[:] = [_subst_into(dict(cs), k, unit, expr)
                        for cs, k in ineqs]
            continue
        # no unit coefficient: Omega-style mod reduction on the smallest one
        var_k = min(coeffs, key=lambda v: (abs(coeffs[v]), v))
        m = abs(coeffs[var_k]) + 1
        sigma = fresh("s")
        new_coeffs = {v: _symmetric_mod(c, m) for v, c in coeffs.items()}
        new_coeffs[sigma] = -m
        new_const = _symmetric_mod(const, m)
        # coefficient of var_k in the reduced equation is -sign(coeffs[var_k])
        eqs.append((coeffs, const))
        eqs.append((new_coeffs, new_const))
    return ineqs, subs


def _tighten(ineqs: List[Tuple[dict, int]]) -> List[Tuple[dict, int]]:
    out = []
    for coeffs, const in ineqs:
        coeffs = {v: c for v, c in coeffs.items() if c != 0}
        if not coeffs:
            if const < 0:
                raise _Unsat()
            continue
        g = _gcd_many(coeffs.values())
        out.append(({v: c // g for v, c in coeffs.items()},
                    const // g if const >= 0 else -((-const + g - 1) // g)))
    return out


# ---------------------------------------------------------------------------
# Exact rational simplex (phase 1 feasibility only)
# ---------------------------------------------------------------------------

def _lp_feasible(ineqs: List[Tuple[dict, int]],
                 variables: List[str]) -> Optional[Dict[str, Fraction]]:
    """L1-minimal rational solution of sum(c x) <= k atoms, or None.

    Free variables are split into non-negative pairs and slacks added; a
    phase-1 simplex with Bland's rule drives the artificial sum to zero,
    then phase 2 minimizes the sum of the split pairs so the returned
    point stays near the origin (which keeps later branching shallow).
    """
    n = len(variables)
    m = len(ineqs)
    if m == 0:
        return {v: Fraction(0) for v in variables}
    ncols = 2 * n + m  # split pairs then slacks
    vidx = {v: i for i, v in enumerate(variables)}
    total = ncols + m
    tab: List[List[Fraction]] = []
    basis: List[int] = []
    for j, (coeffs, const) in enumerate(ineqs):
        row = [Fraction(0)] * ncols
        for v, c in coeffs.items():
            row[2 * vidx[v]] = Fraction(c)
            row[2 * vidx[v] + 1] = Fraction(-c)
        row[2 * n + j] = Fraction(1)  # slack
        b = Fraction(const)
        if b < 0:
            row = [-x for x in row]
            b = -b
        row += [Fraction(0)] * m
        row[ncols + j] = Fraction(1)  # artificial
        tab.append(row + [b])
        basis.append(ncols + j)

    # w-row over nonbasics: zero on the artificial columns (they start
    # basic), summed constraint rows elsewhere
    obj = [Fraction(0)] * (total + 1)
    for j in range(m):
        for k in range(ncols):
            obj[k] += tab[j][k]
        obj[total] += tab[j][total]

    def pivot(r: int, c: int) -> None:
        piv = tab[r][c]
        tab[r] = [x / piv for x in tab[r]]
        for i in range(m):
            if i != r and tab[i][c] != 0:
                f = tab[i][c]
                tab[i] = [a - f * b for a, b in zip(tab[i], tab[r])]
        if obj[c] != 0:
            f = obj[c]
            for k in range(total + 1):
                obj[k] -= f * tab[r][k]
        basis[r] = c

    def optimize(allowed: int) -> None:
        # Dantzig pivoting while progress is made; a long degenerate stall
        # switches to Bland's rule, which cannot cycle
        guard = 0
        stall = 0
        while True:
            guard += 1
            if guard > 20000:
                raise ArithInternalError("simplex did not converge")
            if stall < 60:
                enter, best_cost = None, 0
                for c in range(allowed):
                    if obj[c] > best_cost:
                        enter, best_cost = c, obj[c]
            else:
                enter = next((c for c in range(allowed) if obj[c] > 0), None)
            if enter is None:
                return
            best = None
            for r in range(m):
                if tab[r][enter] > 0:
                    key = (tab[r][total] / tab[r][enter], basis[r])
                    if best is None or key < best[0]:
                        best = (key, r)
            if best is None:
                raise ArithInternalError("simplex objective unbounded")
            stall = stall + 1 if best[0][0] == 0 else 0
            pivot(best[1], enter)

    optimize(total)
    if obj[total] != 0:
        return None
    values = [Fraction(0)] * total
    for r, b in enumerate(basis):
        values[b] = tab[r][total]
    if any(values[ncols + j] != 0 for j in range(m)):
        return None
    # drive any zero-level artificial out of the basis before phase 2
    for r in range(m):
        if basis[r] >= ncols:
            c = next((c for c in range(ncols) if tab[r][c] != 0), None)
            if c is not None:
                pivot(r, c)

    # phase 2: minimize the sum of the split pairs (an L1 proxy); the
    # invariant form is z = obj[total] - sum(obj[c] * x_c), so the pair
    # columns start at -1 and basic columns are eliminated below
    obj[:] = [Fraction(0)] * (total + 1)
    for i in range(2 * n):
        obj[i] = Fraction(-1)
    for r, b in enumerate(basis):
        if obj[b] != 0:
            f = obj[b]
            for k in range(total + 1):
                obj[k] -= f * tab[r][k]
    optimize(ncols)
    values = [Fraction(0)] * total
    for r, b in enumerate(basis):
        values[b] = tab[r][total]
    return {v: values[2 * i] - values[2 * i + 1]
            for v, i in vidx.items()}


# ---------------------------------------------------------------------------
# Branch and bound
# ---------------------------------------------------------------------------

_BB_NODE_CAP = 200000


def _propagate(ineqs: List[Tuple[dict, int]], variables: List[str]):
    """Exact integer interval propagation over sum(c x) <= k atoms.

    Returns None when some interval empties (integer infeasible), else a
    bounds map var -> (lo, hi) with None for unbounded ends.  Floor/ceil
    division keeps every deduction integer-exact, so this only ever
    removes impossible values.
    """
    lo: Dict[str, Optional[int]] = {v: None for v in variables}
    hi: Dict[str, Optional[int]] = {v: None for v in variables}
    for _ in range(80):
        changed = False
        for coeffs, k in ineqs:
            for v, c in coeffs.items():
                rest = 0
                ok = True
                for w, cw in coeffs.items():
                    if w == v:
                        continue
                    b = lo[w] if cw > 0 else hi[w]
                    if b is None:
                        ok = False
                        break
                    rest += cw * b
                if not ok:
                    continue
                if c > 0:
                    bound = (k - rest) // c  # x <= floor(R / c)
                    if hi[v] is None or bound < hi[v]:
                        hi[v] = bound
                        changed = True
                else:
                    bound = -((k - rest) // (-c))  # x >= ceil(R / c)
                    if lo[v] is None or bound > lo[v]:
                        lo[v] = bound
                        changed = True
                if lo[v] is not None and hi[v] is not None and lo[v] > hi[v]:
                    return None
        if not changed:
            break
    return {v: (lo[v], hi[v]) for v in variables}


def _search_box(ineqs: List[Tuple[dict, int]], nvars: int) -> int:
    # coefficient-magnitude bound: an integer solution, if any, exists
    # inside this box (Papadimitriou-style estimate, deliberately generous)
    m = max(len(ineqs), 1)
    a = 1
    for coeffs, const in ineqs:
        for c in coeffs.values():
            a = max(a, abs(c))
        a = max(a, abs(const))
    return (nvars + m + 2) * ((m + 2) * (a + 1)) ** (2 * m + 3)


def _dedupe(ineqs: List[Tuple[dict, int]]) -> List[Tuple[dict, int]]:
    seen = set()
    out = []
    for cs, k in ineqs:
        key = (tuple(sorted(cs.items())), k)
        if key not in seen:
            seen.add(key)
            out.append((cs, k))
    return out


def _drop_redundant(ineqs: List[Tuple[dict, int]],
                    bounds: dict) -> List[Tuple[dict, int]]:
    """Remove atoms whose interval maximum already satisfies them."""
    out = []
    for cs, k in ineqs:
        top = 0
        known = True
        for v, c in cs.items():
            b = bounds[v][1] if c > 0 else bounds[v][0]
            if b is None:
                known = False
                break
            top += c * b
        if not (known and top <= k):
            out.append((cs, k))
    return out


def _bb_solve(ineqs: List[Tuple[dict, int]],
              variables: List[str]) -> Optional[Dict[str, int]]:
    try:
        ineqs = _dedupe(_tighten(ineqs))
    except _Unsat:
        return None
    # if any integer solution exists, one exists inside this box; branches
    # are clamped to it so the search is well-founded, but the box stays out
    # of the LP itself (its huge constants would dominate the vertices)
    box = _search_box(ineqs, len(variables))
    nodes = 0
    stack: List[List[Tuple[dict, int]]] = [list(ineqs)]
    while stack:
        nodes += 1
        if nodes > _BB_NODE_CAP:
            raise ArithInternalError("branch-and-bound node cap exceeded")
        sys_ineqs = stack.pop()
        bounds = _propagate(sys_ineqs, variables)
        if bounds is None:
            continue
        # substitute interval-pinned variables and gcd-tighten the residue;
        # this catches implied equalities like 4(x - y) = c once c is
        # pinned, which neither per-atom tightening nor single-variable
        # propagation can see on its own
        pinned = {v: b[0] for v, b in bounds.items()
                  if b[0] is not None and b[0] == b[1]}
        residue: List[Tuple[dict, int]] = []
        dead = False
        for coeffs, k in sys_ineqs:
            cs = {v: c for v, c in coeffs.items() if v not in pinned}
            kk = k - sum(c * pinned[v]
                         for v, c in coeffs.items() if v in pinned)
            if not cs:
                if kk < 0:
                    dead = True
                    break
                continue
            residue.append((cs, kk))
        if dead:
            continue
        try:
            residue = _tighten(residue)
        except _Unsat:
            continue
        free = [v for v in variables if v not in pinned]
        if not free:
            return dict(pinned)
        bound_rows = [({v: 1}, bounds[v][1]) for v in free
                      if bounds[v][1] is not None]
        bound_rows += [({v: -1}, -bounds[v][0]) for v in free
                       if bounds[v][0] is not None]
        # rows already implied by the interval bounds only pad the tableau
        lp_rows = _dedupe(_drop_redundant(residue, bounds)) + bound_rows
        point = _lp_feasible(lp_rows, free)
        if point is None:
            continue
        cand = dict(pinned)
        cand.update((v, round(point[v])) for v in free)
        if all(sum(c * cand[v] for v, c in cs.items()) <= k
               for cs, k in sys_ineqs):
            return cand
        if all(point[v].denominator == 1 for v in free):
            # the tightened residue is integer-equivalent to the node, so
            # an integral residue point must satisfy it
            raise ArithInternalError("integral residue point rejected")
        # Branch preference: a fractional finite-interval variable, then any
        # unpinned finite-interval variable (pinning those arms the gcd
        # residue test), and only then an unbounded fractional one.
        finite = [v for v in free
                  if bounds[v][0] is not None and bounds[v][1] is not None]
        frac_finite = [v for v in finite if point[v].denominator != 1]
        if frac_finite:
            var = frac_finite[0]
            cut = math.floor(point[var])
        elif finite:
            var = finite[0]
            cut = (bounds[var][0] + bounds[var][1]) // 2
        else:
            var = next(v for v in free if point[v].denominator != 1)
            cut = math.floor(point[var])
        down, up = min(cut, box), max(cut + 1, -box)
        if down >= -box:
            stack.append(sys_ineqs + [({var: 1}, down)])
        if up <= box:
            stack.append(sys_ineqs + [({var: -1}, -up)])
    return None


# ---------------------------------------------------------------------------
# Public interface
# ---------------------------------------------------------------------------

def solve_system(system: LinearSystem) -> Optional[Dict[str, int]]:
    """Exact integer satisfiability for a conjunction of linear atoms."""
    eqs: List[Tuple[dict, int]] = []
    ineqs: List[Tuple[dict, int]] = []
    all_vars: set = set()
    for a in dict.fromkeys(system.atoms):  # dedupe, order preserved
        cm = a.coeff_map()
        all_vars.update(cm)
        if a.kind == "eq":
            eqs.append((cm, a.const))
        else:
            ineqs.append((cm, a.const))
    taken = set(all_vars)
    fresh = _Fresh(taken)
    try:
        ineqs, subs = _eliminate_equalities(eqs, ineqs, fresh)
    except _Unsat:
        return None
    live = sorted({v for cs, _ in ineqs for v in cs}
                  | {v for _, (cs, _) in subs for v in cs})
    model = {v: 0 for v in live}
    if ineqs:
        solved = _bb_solve(ineqs, sorted({v for cs, _ in ineqs for v in cs}))
        if solved is None:
            return None
        model.update(solved)
    for var, (cs, k) in reversed(subs):
        model[var] = sum(c * model.get(v, 0) for v, c in cs.items()) + k
    for v in all_vars:
        model.setdefault(v, 0)
    # soundness re-check under exact evaluation
    for a in system.atoms:
        lhs = sum(c * model[v] for v, c in a.coeffs)
        ok = lhs == a.const if a.kind == "eq" else lhs <= a.const
        if not ok:
            raise ArithInternalError(f"model fails atom {a}")
    return model


def quick_unsat(atoms) -> bool:
    """Cheap certain-unsatisfiability test: equality elimination, gcd
    tightening and interval propagation, but no simplex.  True means the
    conjunction definitely has no integer solution; False decides
    nothing.  Used where the full procedure would be too expensive."""
    try:
        systems = lower(atoms)
    except ArithInternalError:
        return False
    for system in systems:
        eqs: List[Tuple[dict, int]] = []
        ineqs: List[Tuple[dict, int]] = []
        for a in system.atoms:
            (eqs if a.kind == "eq" else ineqs).append((a.coeff_map(), a.const))
        try:
            ineqs, _ = _eliminate_equalities(eqs, ineqs, _Fresh(set()))
            ineqs = _tighten(ineqs)
        except _Unsat:
            continue
        except ArithInternalError:
            return False
        variables = sorted({v for cs, _ in ineqs for v in cs})
        if _propagate(ineqs, variables) is not None:
            return False
    return True


def arith_sat(atoms) -> Optional[Dict[str, int]]:
    """SAT with an integer witness, or None for UNSAT.  The witness covers
    every variable of the input atoms (auxiliary lowering variables are
    stripped)."""
    wanted: set = set()
    for a in atoms:
        _collect_vars(a.lhs, wanted)
        _collect_vars(a.rhs, wanted)
    for system in lower(atoms):
        model = solve_system(system)
        if model is not None:
            out = {v: model.get(v, 0) for v in wanted}
            for a in atoms:
                if not eval_atom(a, out):
                    raise ArithInternalError(f"witness fails input atom {a}")
            return out
    return None


def _negate(atom: ArithAtom) -> List[ArithAtom]:
    if atom.kind == "le":
        return [atom_le(AAdd(atom.rhs, AInt(1)), atom.lhs)]
    return [atom_le(AAdd(atom.lhs, AInt(1)), atom.rhs),
            atom_le(AAdd(atom.rhs, AInt(1)), atom.lhs)]


def arith_implies(hyp, concl) -> bool:
    """hyp entails every atom of concl (checked by refuting each negation)."""
    hyp = list(hyp)
    for atom in concl:
        for neg in _negate(atom):
            if arith_sat(hyp + [neg]) is not None:
                return False
    return True
