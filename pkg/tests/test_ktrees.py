import random

import numpy as np
import pytest

from ketl.ktrees import (KTree, Lasso, TreeStep, check_tree_step, compression, derive_run, fusion,
                         is_ktree, search_tree_sequence, system_of_runs, tree_formula, tree_of)
from ketl.properties import concordant, has_no_learning, has_perfect_recall, is_synchronous
from ketl.syntax import And, Know, Prop, parse, possible
from ketl.tableau import (Atom, PreModel, SigmaState, acceptable_extension, atom_formula,
                          build_premodel, eliminate)

p, q = Prop("p"), Prop("q")


@pytest.fixture(scope="module")
def flat():
    return eliminate(build_premodel(p, d=0))


@pytest.fixture(scope="module")
def search():
    return search_tree_sequence(parse("F q & K1 p"))


def test_single_root_is_a_tree(flat):
    assert is_ktree(flat, {0}, 0).ok


def test_two_roots_rejected(flat):
    check = is_ktree(flat, {0, 1}, 0)
    assert not check.ok and check.clause == "unique-root"


def test_level_bound(search):
    pm = search.premodel
    check = is_ktree(pm, search.trees[0].states, 0)
    assert not check.ok and check.clause == "level"


def test_missing_upward_partner(search):
    pm = search.premodel
    root = search.trees[0].root(pm)
    check = is_ktree(pm, {root}, 1)
    assert not check.ok and check.clause == "upward"


def test_missing_downward_witness(search):
    pm = search.premodel
    tree = search.trees[0]
    root = tree.root(pm)
    upper = next(s for s in tree.states if s != root)
    other_root = next(s for s in pm.alive_ids() if pm.states[s].index == ()
                      and pm.class_id(s, 1) != pm.class_id(upper, 1))
    check = is_ktree(pm, {other_root, upper} | tree_of(pm, other_root, 1).states, 1)
    assert not check.ok and check.clause == "downward"


def test_tree_of_is_a_tree(search):
    pm = search.premodel
    for t in search.trees:
        assert is_ktree(pm, t.states, 1).ok


def test_identity_step_with_advance(flat):
    step = TreeStep(KTree(frozenset({0}), 0), KTree(frozenset({1}), 0), ((0, (0, 1)),))
    assert check_tree_step(flat, step).ok


def test_step_without_progress(flat):
    step = TreeStep(KTree(frozenset({0}), 0), KTree(frozenset({0}), 0), ((0, (0,)),))
    check = check_tree_step(flat, step)
    assert not check.ok and check.clause == "progress"


def test_step_clauses(flat):
    src, dst = KTree(frozenset({0}), 0), KTree(frozenset({1}), 0)
    assert check_tree_step(flat, TreeStep(src, dst, ())).clause == "domain"
    assert check_tree_step(flat, TreeStep(src, dst, ((0, (1, 1)),))).clause == "start"
    assert check_tree_step(flat, TreeStep(src, dst, ((0, (0, 0)),))).clause == "inside"
    assert check_tree_step(flat, TreeStep(src, dst, ((0, (0, 1, 1)),))).clause == "inside"


def test_non_concordant_step(search):
    pm = search.premodel
    tree = search.trees[0]
    root = tree.root(pm)
    upper = next(s for s in tree.states if s != root and pm.class_id(s, 1) == pm.class_id(root, 1))
    for a in pm.successors(root):
        b = next((b for b in pm.successors(upper) if pm.class_id(a, 1) != pm.class_id(b, 1)), None)
        if b is not None:
            break
    paths = {s: search.steps[0].path(s) for s in tree.states}
    paths[root], paths[upper] = (root, a), (upper, b)
    target = KTree(frozenset(x[-1] for x in paths.values()), 1)
    check = check_tree_step(pm, TreeStep(tree, target, tuple(sorted(paths.items()))))
    assert not check.ok and check.clause == "concordance"


def test_search_on_atom():
    r = search_tree_sequence(p)
    assert len(r.trees) == 1 and not r.steps and not r.pending and not r.exhausted


def test_search_discharges_eventuality(search):
    pm = search.premodel
    assert not search.pending and not search.exhausted
    assert len(search.steps) == len(search.trees) - 1 >= 1
    assert pm.holds(search.trees[-1].root(pm), q)
    for step in search.steps:
        assert check_tree_step(pm, step).ok


def test_search_budget_is_reported():
    r = search_tree_sequence(parse("F q & K1 p"), budget=0)
    assert r.exhausted and r.pending


def test_steps_compose():
    search = search_tree_sequence(parse("~q & X ~q & F q"))
    pm = search.premodel
    assert len(search.steps) >= 2 and not search.pending
    a, b = search.steps[0], search.steps[1]
    composed = {s: fusion(a.path(s), b.path(a.path(s)[-1])) for s in a.source.states}
    for s, path in composed.items():
        assert all(pm.next_related(x, y) for x, y in zip(path, path[1:]))
        assert path[-1] in b.target.states


def test_tree_formula_of_root(search):
    pm = search.premodel
    tree = search.trees[0]
    root = tree.root(pm)
    assert tree_formula(pm, tree, root) == atom_formula(pm.states[root].atom)


def test_tree_formula_one_partner(search):
    pm = search.premodel
    tree = search.trees[0]
    root = tree.root(pm)
    upper = next(s for s in tree.states if s != root)
    expected = And(atom_formula(pm.states[upper].atom), possible(1, atom_formula(pm.states[root].atom)))
    assert tree_formula(pm, tree, upper) == expected


def test_tree_formula_two_levels():
    # hand-built states at indices (), (1,) and (1, 2)
    x = frozenset({p})
    states = [SigmaState((), Atom(x)), SigmaState((1,), Atom(x)), SigmaState((1, 2), Atom(x))]
    pm = PreModel(p, 2, 2, None, [x], states, np.zeros(3, dtype=np.int64), [(0,)],
                  np.ones(3, dtype=bool))
    tree = KTree(frozenset({0, 1, 2}), 2)
    assert is_ktree(pm, tree.states, 2).ok
    phi = atom_formula(Atom(x))
    assert tree_formula(pm, tree, 2) == And(phi, possible(2, And(phi, possible(1, phi))))


def test_fusion_examples():
    assert fusion(("s",), ("s", "t")) == ("s", "t")
    assert fusion(("s", "t"), ("t",)) == ("s", "t")
    with pytest.raises(ValueError):
        fusion(("s", "t"), ("u", "v"))
    assert fusion(("s", "t"), Lasso(("t",), ("u",))) == Lasso(("s", "t"), ("u",))


def test_fusion_associative():
    a, b, c = (1, 2), (2, 3, 4), (4, 5)
    assert fusion(fusion(a, b), c) == fusion(a, fusion(b, c))


def test_compression_examples():
    adv = lambda x, y: x != y  # noqa: E731
    assert compression(("s", "s", "t"), adv) == ("s", "t")
    assert compression(("s", "t"), adv) == ("s", "t")
    assert compression(compression(("s", "s", "t", "t", "s"), adv), adv) == ("s", "t", "s")
    assert compression(Lasso(("s",), ("s",)), adv) == ("s",)
    assert compression(Lasso(("a", "a"), ("b", "b", "c")), adv) == Lasso(("a", "b"), ("c", "b"))


def test_compression_keeps_self_advances():
    assert compression(("s", "s", "s"), [True, False]) == ("s", "s")
    with pytest.raises(ValueError):
        compression(("s", "t"), [False])


def lasso_for(pm, s):
    head, loop = acceptable_extension(pm, [s])
    return Lasso(tuple(head), tuple(loop))


def test_constant_sequence_pr():
    pm = eliminate(build_premodel(Know(1, p), d=0))
    s = next(s for s in pm.alive_ids() if pm.holds(s, Know(1, p)))
    run = derive_run(pm, Lasso((), (s,)), "pr", 4)
    assert not run.truncated
    assert len({run.locals[0].at(n) for n in range(6)}) == 1


def test_pr_histories_absorb():
    pm = eliminate(build_premodel(Know(1, p), d=0))
    a = next(s for s in pm.alive_ids() if pm.holds(s, Know(1, p)))
    b = next(s for s in pm.alive_ids() if not pm.holds(s, Know(1, p)))
    run = derive_run(pm, Lasso((a, b), (b,)), "pr", 3)
    assert [len(run.locals[0].at(n)) for n in range(3)] == [1, 2, 2]


def test_nl_descriptor_is_periodic():
    pm = eliminate(build_premodel(Know(1, p), d=0))
    a = next(s for s in pm.alive_ids() if pm.holds(s, Know(1, p)))
    b = next(s for s in pm.alive_ids() if not pm.holds(s, Know(1, p)))
    run = derive_run(pm, Lasso((), (a, b)), "nl", 4)
    cores = run.locals[0]
    assert cores.at(0) == cores.at(2) and cores.at(1) == cores.at(3) and cores.at(0) != cores.at(1)


def test_offset_only_for_sync_runs(flat):
    with pytest.raises(ValueError):
        derive_run(flat, Lasso((), (0,)), "nl", 3, offset=1)
    with pytest.raises(ValueError):
        derive_run(flat, Lasso((), (0,)), "xx", 3)


def test_search_result_yields_recall_runs(search):
    pm = search.premodel
    roots = search.root_sequence()
    head, loop = acceptable_extension(pm, roots)
    H = 6
    run = derive_run(pm, Lasso(tuple(head), tuple(loop)), "pr", H)
    sys = system_of_runs([run], pm.m)
    assert has_perfect_recall(sys, horizon=H - 1).verdict


@pytest.mark.parametrize("kind", ["pr", "nl", "nl_sync", "nl_pr_sync"])
def test_derived_systems_in_class(kind):
    psi = parse("K1 p & F ~p & G F q")
    pm = eliminate(build_premodel(psi, d=0))
    starts = [s for s in pm.alive_ids() if pm.holds(s, psi)][:3]
    rng = random.Random(kind)
    runs = [derive_run(pm, lasso_for(pm, s), kind, 6, offset=rng.randint(0, 2) if kind == "nl_sync" else 0)
            for s in starts]
    sys = system_of_runs(runs, pm.m)
    if kind in ("pr", "nl_pr_sync"):
        assert has_perfect_recall(sys, horizon=5).verdict
    if kind in ("nl", "nl_sync"):
        assert has_no_learning(sys).verdict
    if kind in ("nl_sync", "nl_pr_sync"):
        assert is_synchronous(sys).verdict


def test_step_paths_are_concordant(search):
    pm = search.premodel
    for step in search.steps:
        for s in step.source.states:
            for t in step.source.states:
                if pm.class_id(s, 1) == pm.class_id(t, 1):
                    rel = lambda a, b: pm.class_id(a, 1) == pm.class_id(b, 1)  # noqa: E731
                    assert concordant(step.path(s), step.path(t), rel, transitive=True).verdict
