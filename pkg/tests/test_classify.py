import random

from corpus import draw_acyclic
from stringsat import engine
from stringsat.classify import (DepGraph, FragmentTag, build_dep_graph,
                                classify_fragment, cycle_count, is_linear,
                                is_periodic_arith)
from stringsat.terms import (AAdd, AInt, ALen, AMax, AMod, AVar, CChar,
                             Equation, FAtom, FEq, FIn, NormalizedFormula,
                             RCat, RStar, RWord, SVar, a_sub, atom_eq,
                             atom_le, word)


def _nf(*eqs, arith=()):
    return NormalizedFormula(equations=tuple(eqs), arith=tuple(arith))


def test_is_linear():
    assert is_linear(_nf(Equation((SVar("s"),), (SVar("t"), SVar("u")))))
    rotation = Equation(word("ab") + (SVar("s"),), (SVar("s"),) + word("ba"))
    assert not is_linear(_nf(rotation))
    # per-equation check: s in two different equations is fine
    assert is_linear(_nf(Equation((SVar("s"),), (SVar("t"),)),
                         Equation((SVar("s"),), (SVar("u"),))))


def test_dep_graph_fan_out():
    g = build_dep_graph("s", [Equation((SVar("s"),),
                                       (SVar("t"), SVar("u")))])
    assert sorted(g.edges) == [("s", "t"), ("s", "u")]


def test_dep_graph_ground_side_marks_leaves():
    g = build_dep_graph("s", [Equation((SVar("s"), SVar("t")), word("ab"))])
    assert g.leaves == {"s", "t"}
    assert g.edges == []


def test_dep_graph_self_loop_survives():
    rotation = Equation(word("ab") + (SVar("s"),), (SVar("s"),) + word("ba"))
    g = build_dep_graph("s", [rotation])
    assert ("s", "s") in g.edges
    assert cycle_count(g) == 1


def test_dep_graph_consumes_each_equation_once():
    eqs = [Equation((SVar("s"),), (SVar("t"),)) for _ in range(4)]
    g = build_dep_graph("s", eqs)
    # one dequeue consumes one equation; the graph stays finite and sane
    assert g.vertices >= {"s", "t"}


def test_leaf_invariant():
    rng = random.Random(3)
    for conjs in draw_acyclic(rng, 20):
        nf = engine.init_normalize(conjs, "ab")
        for eq in nf.equations:
            for v in sorted({a.var for a in eq.lhs + eq.rhs
                             if hasattr(a, "var")}):
                g = build_dep_graph(v, nf.equations)
                for leaf in g.leaves:
                    assert g.out_degree(leaf) == 0


def test_cycle_count_examples():
    g = build_dep_graph("s", [Equation((SVar("s"),),
                                       (SVar("t"), SVar("u")))])
    assert cycle_count(g) == 0
    loop = DepGraph(root="s", vertices={"s"}, edges=[("s", "s")])
    assert cycle_count(loop) == 1
    two = DepGraph(root="s", vertices={"s", "t"},
                   edges=[("s", "t"), ("t", "s"), ("s", "s")])
    assert cycle_count(two) == 2


def test_cycle_count_multi_edges():
    g = DepGraph(root="s", vertices={"s", "t"},
                 edges=[("s", "t"), ("s", "t"), ("t", "s")])
    assert cycle_count(g) == 2


def test_is_periodic_arith():
    n = AVar("n")
    assert is_periodic_arith([atom_eq(AMod(n, AInt(2)), AInt(0))])
    assert is_periodic_arith([atom_eq(a_sub(AVar("x1"), AVar("x2")),
                                      AInt(5))])
    assert not is_periodic_arith([atom_eq(AMax(AVar("x"), AVar("y")),
                                          AInt(3))])
    # three-variable sums fall outside the octagonal shape
    assert not is_periodic_arith(
        [atom_le(AAdd(AVar("x"), AAdd(AVar("y"), AVar("z"))), AInt(3))])


def test_classify_worked_example_is_one_cycle():
    r = RCat(RStar(RWord("ab")), RWord("a"))
    conjs = [FEq(word("ab") + (SVar("s"),), (SVar("s"),) + word("ba")),
             FIn((SVar("s"),), r),
             FAtom(atom_eq(AMod(ALen("s"), AInt(2)), AInt(0)))]
    nf = engine.init_normalize(conjs, "ab")
    frag = classify_fragment(nf)
    assert frag.tag is FragmentTag.ONE_CYCLE
    assert frag.witness


def test_classify_linear_acyclic():
    conjs = [FEq((SVar("s"),), (SVar("t"), SVar("u"))),
             FIn((SVar("t"),), RStar(RWord("ab")))]
    nf = engine.init_normalize(conjs, "ab")
    assert classify_fragment(nf).tag is FragmentTag.ACYCLIC


def test_classify_general_on_non_periodic_arith():
    conjs = [FEq((SVar("s"), SVar("s"), SVar("s")), (SVar("t"), CChar("a"))),
             FAtom(atom_eq(AMax(ALen("t"), AInt(3)), AInt(3)))]
    nf = engine.init_normalize(conjs, "ab")
    frag = classify_fragment(nf)
    assert frag.tag is FragmentTag.GENERAL
    assert "non-periodic" in frag.witness


def test_random_acyclic_instances_classify_acyclic():
    rng = random.Random(7)
    for conjs in draw_acyclic(rng, 40):
        nf = engine.init_normalize(conjs, "ab")
        assert classify_fragment(nf).tag is FragmentTag.ACYCLIC
