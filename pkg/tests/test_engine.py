import random

import pytest

from corpus import draw_acyclic, draw_one_cycle, gen_small_normalized
from stringsat import oracle
from stringsat.classify import is_linear
from stringsat.engine import (BackLinkedTo, ClosedUnsat, EngineInternalError,
                              OA_FULL, OA_LENGTHS_ONLY,
                              export_tree, extract_model, init_normalize,
                              link_back, oa_unsat, over_approx,
                              solve_conjunction, under_approx_check, unfold)
from stringsat.terms import (AInt, ALen, AMod, AVar, Alias, CChar, CharPrefix,
                             EpsBind, Equation, FAtom, FEq, FIn, Membership,
                             NormalizedFormula, RCat, RStar, RWord,
                             SPred, SVar, Split, atom_eq, atom_le, atom_lt,
                             normalized_to_formula, word)

ROTATE_RE = RCat(RStar(RWord("ab")), RWord("a"))


def worked_example():
    return [FEq(word("ab") + (SVar("s"),), (SVar("s"),) + word("ba")),
            FIn((SVar("s"),), ROTATE_RE),
            FAtom(atom_eq(AMod(ALen("s"), AInt(2)), AInt(0)))]


def test_init_pairs_variables_with_predicates():
    f0 = init_normalize(worked_example(), "ab")
    p = SPred("$u0", "$n0")
    assert f0.equations == (Equation(word("ab") + (p,), (p,) + word("ba")),)
    assert f0.subterms == (Alias("s", "$u0"),)
    assert f0.memberships == (Membership("s", ROTATE_RE),)
    # the length constraint now speaks about the fresh length variable
    assert atom_eq(AMod(AVar("$n0"), AInt(2)), AInt(0)) in f0.arith
    assert atom_le(AInt(0), AVar("$n0")) in f0.arith


def test_init_on_variable_free_formula():
    f0 = init_normalize([FEq(word("ab"), word("ab"))], "ab")
    assert f0.equations == (Equation(word("ab"), word("ab")),)
    assert f0.subterms == () and f0.lengths == ()


def test_init_reduces_length_sums():
    from stringsat.terms import AAdd
    conjs = [FEq((SVar("s"),), (SVar("t"),)),
             FAtom(atom_le(AAdd(ALen("s"), ALen("t")), AInt(4)))]
    f0 = init_normalize(conjs, "ab")
    assert f0.lengths == (("$u0", "$n0"), ("$u1", "$n1"))
    reduced = atom_le(AAdd(AVar("$n0"), AVar("$n1")), AInt(4))
    assert reduced in f0.arith


def test_unfold_worked_example_first_step():
    f0 = init_normalize(worked_example(), "ab")
    kids = unfold(f0)
    assert [k.rule for k in kids] == ["small-base", "small-ind"]
    base, ind = kids[0].formula, kids[1].formula
    assert base.equations == (Equation(word("ab"), word("ba")),)
    assert EpsBind("$u0") in base.subterms
    assert atom_eq(AVar("$n0"), AInt(0)) in base.arith
    p1 = SPred("$u0", "$n1")
    assert ind.equations == (Equation(word("ba") + (p1,),
                                      (p1,) + word("ba")),)
    assert ind.subterms == (Alias("s", "$u1"), CharPrefix("$u1", "a", "$u0"))
    assert ind.lengths == (("$u0", "$n1"),)


def test_unfold_const_succ():
    f = NormalizedFormula(equations=(Equation(word("ab"), word("ab")),),
                          alphabet=("a", "b"))
    kids = unfold(f)
    assert [k.rule for k in kids] == ["const-succ"]
    assert kids[0].formula.equations == (Equation(word("b"), word("b")),)


def test_unfold_const_fail():
    f = NormalizedFormula(equations=(Equation(word("ab"), word("ba")),),
                          alphabet=("a", "b"))
    assert unfold(f) == []


def test_unfold_is_exhaustive_for_eps_cases():
    p = SPred("$u0", "$n0")
    f = NormalizedFormula(equations=(Equation((), (CChar("a"), p)),),
                          lengths=(("$u0", "$n0"),), alphabet=("a",))
    kids = unfold(f)
    assert [k.rule for k in kids] == ["eps-force"]
    child = kids[0].formula
    assert child.equations == (Equation((), word("a")),)
    assert unfold(child) == []  # constant remainder against the empty word


def test_unfold_drop_empty_equation():
    f = NormalizedFormula(equations=(Equation((), ()),
                                     Equation(word("a"), word("a"))),
                          alphabet=("a",))
    kids = unfold(f)
    assert [k.rule for k in kids] == ["drop"]
    assert kids[0].formula.equations == (Equation(word("a"), word("a")),)


def test_unfold_rejects_bare_variable_heads():
    f = NormalizedFormula(equations=(Equation((SVar("s"),), word("a")),),
                          alphabet=("a",))
    with pytest.raises(EngineInternalError):
        unfold(f)


def test_unfold_big_cases():
    p1, p2 = SPred("$u0", "$n0"), SPred("$u1", "$n1")
    f = NormalizedFormula(
        equations=(Equation((p1, CChar("a")), (p2, CChar("b"))),),
        lengths=(("$u0", "$n0"), ("$u1", "$n1")),
        arith=(atom_le(AInt(0), AVar("$n0")), atom_le(AInt(0), AVar("$n1"))),
        alphabet=("a", "b"))
    kids = unfold(f)
    assert [k.rule for k in kids] == ["big-eps-l", "big-eps-r",
                                      "big-identify", "big-left",
                                      "big-right"]
    eps_l = kids[0].formula
    assert eps_l.equations == (Equation((CChar("a"),), (p2, CChar("b"))),)
    assert EpsBind("$u0") in eps_l.subterms
    ident = kids[2].formula
    assert ident.equations == (Equation((CChar("a"),), (CChar("b"),)),)
    assert Alias("$u1", "$u0") in ident.subterms
    assert atom_eq(AVar("$n0"), AVar("$n1")) in ident.arith
    left = kids[3].formula
    assert left.equations[0].lhs[0] == SPred("$u0", "$n2")
    assert Split("$u2", "$u1", "$u0") in left.subterms
    # the split is strict: non-empty prefix, non-empty tail
    assert atom_le(AInt(1), AVar("$n2")) in left.arith
    assert atom_le(AInt(1), AVar("$n1")) in left.arith
    right = kids[4].formula
    assert right.equations[0].rhs[0] == SPred("$u1", "$n2")
    assert Split("$u2", "$u0", "$u1") in right.subterms


def test_unfold_covers_empty_prefix_models():
    # x.y = y has only models with x empty; they must surface at a finite
    # depth through the explicit empty-word branch
    conjs = [FEq((SVar("x"), SVar("y")), (SVar("y"),)),
             FAtom(atom_eq(ALen("y"), AInt(2)))]
    ans = solve_conjunction(conjs, "ab")
    assert ans.verdict == "sat"
    m = ans.model.string_map()
    assert m["x"] == "" and len(m["y"]) == 2


def test_unfold_same_variable_heads_consume():
    p = SPred("$u0", "$n0")
    f = NormalizedFormula(equations=(Equation((p, CChar("a")),
                                              (p, CChar("a"))),),
                          lengths=(("$u0", "$n0"),), alphabet=("a",))
    kids = unfold(f)
    assert [k.rule for k in kids] == ["match-var"]
    assert kids[0].formula.equations == (Equation((CChar("a"),),
                                                  (CChar("a"),)),)


def test_over_approx_worked_example():
    f0 = init_normalize(worked_example(), "ab")
    weak = over_approx(f0, OA_LENGTHS_ONLY)
    assert len(weak) == 1
    # 2 + n = n + 2 plus the parity atom: satisfiable
    assert not oa_unsat(f0, OA_LENGTHS_ONLY)
    # the full abstraction also sees the odd-lengths membership: closed
    assert oa_unsat(f0, OA_FULL)


def test_over_approx_phonebook_example():
    # STR(u,nu) = STR(v,nv).STR(u,nu).a.STR(u,nu).STR(t,nt) and nonneg
    u, v, t = SPred("u", "nu"), SPred("v", "nv"), SPred("t", "nt")
    f = NormalizedFormula(
        equations=(Equation((u,), (v, u, CChar("a"), u, t)),),
        arith=(atom_le(AInt(0), AVar("nu")), atom_le(AInt(0), AVar("nv")),
               atom_le(AInt(0), AVar("nt"))),
        lengths=(("u", "nu"), ("v", "nv"), ("t", "nt")),
        alphabet=("a",))
    assert oa_unsat(f, OA_LENGTHS_ONLY)
    assert oa_unsat(f, OA_FULL)


def test_over_approx_keeps_arith_when_no_equations():
    f = NormalizedFormula(arith=(atom_eq(AVar("n"), AInt(3)),),
                          alphabet=("a",))
    assert over_approx(f) == [(atom_eq(AVar("n"), AInt(3)),)]


def _pi21():
    # the closed leaf of the worked example, built by two unfold steps
    f0 = init_normalize(worked_example(), "ab")
    f12 = unfold(f0)[1].formula
    return unfold(f12)[0].formula


def _pi22():
    f0 = init_normalize(worked_example(), "ab")
    f12 = unfold(f0)[1].formula
    return unfold(f12)[1].formula


def test_under_approx_closes_by_arithmetic_core():
    got = under_approx_check(_pi21())
    assert got.status == "unsat"


def test_under_approx_closes_ground_mismatch():
    f0 = init_normalize(worked_example(), "ab")
    f11 = unfold(f0)[0].formula
    got = under_approx_check(f11)
    assert got.status == "unsat"
    assert "mismatch" in got.reason


def test_under_approx_not_base_with_predicates():
    f0 = init_normalize(worked_example(), "ab")
    assert under_approx_check(f0).status == "notbase"


def test_under_approx_sat_with_model():
    f = NormalizedFormula(
        equations=(Equation((), ()),),
        subterms=(Alias("s", "u"), EpsBind("u")),
        alphabet=("a", "b"))
    got = under_approx_check(f)
    assert got.status == "sat"
    assert got.model.string_map()["s"] == ""


def test_link_back_worked_example():
    f0 = init_normalize(worked_example(), "ab")
    f12 = unfold(f0)[1].formula
    f22 = _pi22()
    got = link_back(f22, [f12, f0])
    assert got is not None
    idx, theta = got
    assert idx == 1  # pi12 does not match, the root does
    ints = theta.ints()
    assert ints["$n2"] == "$n0"          # current length to the root's
    assert ints["$n0"].startswith("$fp")  # stale root name moved aside
    assert ints["$n1"] == "$n1"


def test_link_back_needs_progress():
    f0 = init_normalize(worked_example(), "ab")
    assert link_back(f0, [f0]) is None


def test_link_back_rejects_mismatched_regex_permutations():
    f0 = init_normalize(worked_example(), "ab")
    f12 = unfold(f0)[1].formula
    # pi12's equation starts b.a... while pi0's starts a.b...; no character
    # permutation fixes the equation and the membership at once
    assert link_back(f12, [f0]) is None


def test_solve_worked_example_tree_shape():
    ans = solve_conjunction(worked_example(), "ab",
                            oa_mode=OA_LENGTHS_ONLY)
    assert ans.verdict == "unsat"
    tree = ans.tree
    assert len(tree.nodes) == 5
    root = tree.nodes[0]
    assert root.children == [1, 2]
    assert isinstance(tree.nodes[1].status, ClosedUnsat)
    assert tree.nodes[2].children == [3, 4]
    assert isinstance(tree.nodes[3].status, ClosedUnsat)
    assert isinstance(tree.nodes[4].status, BackLinkedTo)
    assert tree.nodes[4].status.target == 0


def test_solve_sat_with_model_checked_against_oracle():
    conjs = [FEq(word("ab") + (SVar("s"),), (SVar("s"),) + word("ba"))]
    ans = solve_conjunction(conjs, "ab")
    assert ans.verdict == "sat"
    assert oracle.eval_formula(conjs[0], ans.model, "ab")
    ref = oracle.brute_force_solve(conjs[0], "ab", oracle.Bound(3))
    assert ref is not None and ref.string_map()["s"] == "a"


def test_solve_ground_unsat_without_unfolding():
    ans = solve_conjunction([FEq(word("ab"), word("ba"))], "ab")
    assert ans.verdict == "unsat"
    assert ans.unfoldings == 0


def test_solve_budget_zero_reports_unknown():
    ans = solve_conjunction(worked_example(), "ab", budget=0,
                            oa_mode=OA_LENGTHS_ONLY)
    assert ans.verdict == "unknown"


def test_invariant_injection_on_fresh_lengths():
    f0 = init_normalize(worked_example(), "ab")
    for kid in unfold(f0):
        if kid.rule == "small-ind":
            assert atom_le(AInt(0), AVar("$n1")) in kid.formula.arith
            assert atom_lt(AInt(0), AVar("$n0")) in kid.formula.arith


def test_back_link_targets_are_proper_ancestors_with_progress():
    rng = random.Random(21)
    for conjs in draw_one_cycle(rng, 15):
        ans = solve_conjunction(conjs, "ab")
        tree = ans.tree
        for n in tree.nodes:
            if isinstance(n.status, BackLinkedTo):
                anc_ids = [a.id for a in tree.ancestors(n.id)]
                assert n.status.target in anc_ids
                target = tree.nodes[n.status.target]
                assert n.progress > target.progress


def test_oa_unsat_nodes_have_no_oracle_model():
    rng = random.Random(22)
    for conjs in draw_one_cycle(rng, 8):
        nf = init_normalize(conjs, "ab")
        if oa_unsat(nf, OA_FULL):
            got = oracle.brute_force_solve(
                normalized_to_formula(nf), "ab", oracle.Bound(8, 8))
            assert got is None


def test_unfolding_preserves_linearity_on_acyclic_formulas():
    rng = random.Random(24)
    for conjs in draw_acyclic(rng, 15):
        nf = init_normalize(conjs, "ab")
        if not nf.equations:
            continue
        assert is_linear(nf)
        for kid in unfold(nf):
            assert is_linear(kid.formula), kid.rule


def test_extract_model_resolves_chains():
    f = NormalizedFormula(
        subterms=(Alias("s", "u1"), CharPrefix("u1", "a", "u"),
                  EpsBind("u")),
        alphabet=("a", "b"))
    got = extract_model(f, {})
    assert got.string_map()["s"] == "a"


def test_extract_model_epsilon():
    f = NormalizedFormula(subterms=(EpsBind("s"),), alphabet=("a",))
    assert extract_model(f, {}).string_map()["s"] == ""


def test_extract_model_witness_from_membership():
    f = NormalizedFormula(
        memberships=(Membership("t", ROTATE_RE),),
        lengths=(("t", "nt"),),
        alphabet=("a", "b"))
    got = extract_model(f, {"nt": 3})
    assert got.string_map()["t"] == "aba"


def test_extract_model_rejects_cycles():
    f = NormalizedFormula(subterms=(Alias("s", "t"), Alias("t", "s")),
                          alphabet=("a",))
    with pytest.raises(EngineInternalError):
        extract_model(f, {})


def test_export_tree_single_node():
    ans = solve_conjunction([FEq(word("a"), word("b"))], "ab")
    dot = export_tree(ans.tree)
    assert dot.startswith("digraph")
    assert dot.count("[label=") == len(ans.tree.nodes)


def test_export_tree_worked_example_shape():
    ans = solve_conjunction(worked_example(), "ab",
                            oa_mode=OA_LENGTHS_ONLY)
    dot = export_tree(ans.tree)
    assert dot.count("->") == 5  # four tree edges plus one back edge
    assert "style=dashed" in dot


def test_unfold_children_cover_parent_models():
    rng = random.Random(23)
    bound = oracle.Bound(6, 6)
    for _ in range(30):
        f = gen_small_normalized(rng)
        sigma = "".join(f.alphabet)
        parent_sat = oracle.brute_force_solve(
            normalized_to_formula(f), sigma, bound) is not None
        kids = unfold(f)
        kid_sat = any(
            oracle.brute_force_solve(normalized_to_formula(k.formula),
                                     sigma, bound) is not None
            for k in kids)
        assert parent_sat == kid_sat, f
