"""Acceptance suite: one test per criterion, each announcing its verdict.

Every tolerance and corpus size is pinned here; nothing is calibrated at
run time.
"""

import math
import random
import sys
import time

from corpus import (draw_acyclic, draw_one_cycle, gen_equation_system,
                    gen_small_normalized, rand_regex)
from stringsat.arith import arith_implies, arith_sat, _lin
from stringsat.classify import FragmentTag, classify_fragment
from stringsat.engine import (BackLinkedTo, ClosedUnsat, OA_FULL,
                              OA_LENGTHS_ONLY, init_normalize,
                              over_approx, solve_conjunction, unfold)
from stringsat.oracle import Bound, brute_force_solve, eval_formula
from stringsat.reduce import reduce_system
from stringsat.regexes import compile_regex, length_set, lengths_reachable
from stringsat.terms import (AInt, ALen, AMod, AVar, CChar, Equation, FAtom,
                             FEq, FIn, NormalizedFormula, RCat, RStar, RWord,
                             SPred, SVar, atom_eq, atom_le, conj,
                             equation_size, equation_string_vars,
                             normalized_to_formula, rename_atom_vars, word)


def _report(number: int, label: str) -> None:
    print(f"acceptance {number}: pass - {label}", file=sys.__stdout__)


def worked_example():
    return [FEq(word("ab") + (SVar("s"),), (SVar("s"),) + word("ba")),
            FIn((SVar("s"),), RCat(RStar(RWord("ab")), RWord("a"))),
            FAtom(atom_eq(AMod(ALen("s"), AInt(2)), AInt(0)))]


def test_acceptance_1_worked_example_reproduction():
    t0 = time.time()
    ans = solve_conjunction(worked_example(), "ab",
                            oa_mode=OA_LENGTHS_ONLY)
    elapsed = time.time() - t0
    assert ans.verdict == "unsat"
    assert elapsed < 1.0, f"took {elapsed:.2f}s"

    tree = ans.tree
    assert len(tree.nodes) == 5
    root, n11, n12, n21, n22 = tree.nodes
    assert root.children == [n11.id, n12.id]
    assert n12.children == [n21.id, n22.id]
    assert isinstance(n11.status, ClosedUnsat)
    assert isinstance(n21.status, ClosedUnsat)
    assert isinstance(n22.status, BackLinkedTo)
    assert n22.status.target == root.id

    # the substitution renames the leaf's current length onto the root's
    # and moves the stale root name to a fresh variable
    theta = n22.status.theta
    ints = theta.ints()
    assert ints["$n2"] == "$n0"
    assert ints["$n0"].startswith("$fp")

    # and the renamed leaf arithmetic implies the root arithmetic
    renamed = [rename_atom_vars(a, ints) for a in n22.formula.arith]
    assert arith_implies(renamed, list(root.formula.arith))
    _report(1, "worked example: unsat, exact tree shape, back-link checked")


def test_acceptance_2_over_approximation_example():
    u, v, t = SPred("u", "nu"), SPred("v", "nv"), SPred("t", "nt")
    f = NormalizedFormula(
        equations=(Equation((u,), (v, u, CChar("a"), u, t)),),
        arith=(atom_le(AInt(0), AVar("nu")), atom_le(AInt(0), AVar("nv")),
               atom_le(AInt(0), AVar("nt"))),
        lengths=(("u", "nu"), ("v", "nv"), ("t", "nt")),
        alphabet=("a",))
    disjuncts = over_approx(f, OA_FULL)
    assert len(disjuncts) == 1
    atoms = disjuncts[0]
    length_eq = atoms[0]
    # n_u = n_v + n_u + 1 + n_u + n_t, compared as linear forms
    lhs, lk = _lin(length_eq.lhs)
    rhs, rk = _lin(length_eq.rhs)
    assert length_eq.kind == "eq"
    assert lhs == {"nu": 1} and lk == 0
    assert rhs == {"nv": 1, "nu": 2, "nt": 1} and rk == 1
    assert arith_sat(list(atoms)) is None
    _report(2, "length abstraction matches and is unsat")


def _one_cycle_corpus():
    rng = random.Random(1234)
    return draw_one_cycle(rng, 200, with_membership=True,
                          arith_styles=("mod", "mod", "none"))


def test_acceptance_3_and_4_oracle_agreement():
    t0 = time.time()
    corpus = _one_cycle_corpus()
    sats = unsats = 0
    unsat_formulas = []
    for conjs in corpus:
        ans = solve_conjunction(conjs, "ab")
        formula = conj(conjs)
        if ans.verdict == "sat":
            sats += 1
            assert eval_formula(formula, ans.model, "ab"), conjs
        elif ans.verdict == "unsat":
            unsats += 1
            unsat_formulas.append(formula)
        else:
            raise AssertionError(f"unknown verdict on {conjs}")
    elapsed = time.time() - t0
    assert sats + unsats == 200
    assert elapsed < 60.0, f"solving took {elapsed:.1f}s"
    _report(3, f"200 one-cycle instances: {sats} sat models all check "
               f"({elapsed:.1f}s)")

    for formula in unsat_formulas:
        assert brute_force_solve(formula, "ab", Bound(8, 8)) is None, formula
    _report(4, f"{unsats} unsat verdicts confirmed by the bound-8 oracle")


def test_acceptance_5_acyclic_termination_bound():
    rng = random.Random(91)
    corpus = draw_acyclic(rng, 100)
    for conjs in corpus:
        nf = init_normalize(conjs, "ab")
        assert classify_fragment(nf).tag is FragmentTag.ACYCLIC
        m = len(nf.equations)
        n = max(equation_size(eq) for eq in nf.equations)
        bound = 4 * (2 ** m) * max(n, 1)
        ans = solve_conjunction(conjs, "ab")
        assert ans.verdict in ("sat", "unsat"), conjs
        assert ans.tree.max_path_length() <= bound, conjs
    _report(5, "100 acyclic instances terminate within 4*(2^M)*N paths")


def test_acceptance_6_one_cycle_termination():
    rng = random.Random(92)
    corpus = draw_one_cycle(rng, 100, with_membership=False,
                            arith_styles=("mod", "le", "eqk", "none"))
    for conjs in corpus:
        nf = init_normalize(conjs, "ab")
        n = equation_size(nf.equations[0])
        ans = solve_conjunction(conjs, "ab", budget=10000)
        assert ans.verdict in ("sat", "unsat"), conjs
        if n <= 6:
            assert ans.tree.max_path_length() <= n * n * math.factorial(n), \
                conjs
    _report(6, "100 one-cycle instances decide within budget; "
               "N<=6 paths within N^2*N!")


def test_acceptance_7_regex_length_sets():
    rng = random.Random(93)
    for _ in range(200):
        sigma = "abc"[:rng.randint(1, 3)]
        r = rand_regex(rng, sigma, 4)
        d = compile_regex(r, sigma)
        ls = length_set(d)
        expected = lengths_reachable(d, 20)
        got = {n for n in range(21) if ls.contains(n)}
        assert got == expected, r
    _report(7, "200 regex length sets exact up to length 20")


def test_acceptance_8_pairing_reduction():
    import itertools

    def ground(term, env):
        return "".join(env[a.name] if isinstance(a, SVar) else a.char
                       for a in term)

    def solutions(eqs, names):
        words = [""]
        for n in range(1, 4):
            words += ["".join(w) for w in itertools.product("ab", repeat=n)]
        out = set()
        for combo in itertools.product(words, repeat=len(names)):
            env = dict(zip(names, combo))
            if all(ground(e.lhs, env) == ground(e.rhs, env) for e in eqs):
                out.add(combo)
        return out

    rng = random.Random(94)
    for _ in range(100):
        sys_ = gen_equation_system(rng)
        single = reduce_system(sys_)
        whole = set()
        for e in sys_.equations:
            whole |= equation_string_vars(e)
        assert equation_string_vars(single) == whole
        names = sorted(whole)
        assert solutions(list(sys_.equations), names) == \
            solutions([single], names), sys_
    _report(8, "100 equation systems: solution sets match after pairing, "
               "unknowns preserved")


def test_acceptance_9_unfold_equivalence_and_size_discipline():
    rng = random.Random(95)
    bound = Bound(6, 6)
    for _ in range(100):
        f = gen_small_normalized(rng)
        sigma = "".join(f.alphabet)
        parent_sat = brute_force_solve(
            normalized_to_formula(f), sigma, bound) is not None
        kids = unfold(f)
        kid_sat = any(
            brute_force_solve(normalized_to_formula(k.formula), sigma, bound)
            is not None for k in kids)
        assert parent_sat == kid_sat, f

        before = equation_size(f.equations[0])
        for k in kids:
            if k.rule in ("const-succ", "small-ind", "big-identify",
                          "match-var"):
                after = equation_size(k.formula.equations[0])
                step = {"const-succ": 2, "small-ind": 1,
                        "big-identify": 2, "match-var": 2}[k.rule]
                assert after == before - step, (k.rule, f)
    _report(9, "100 small formulas: unfold preserves satisfiability, "
               "size steps exact")
