import random

import pytest

from sparqlopt.algebra import evaluate
from sparqlopt.chase import models
from sparqlopt.cq import TRIPLE, Atom, FragmentError, c1_translate, contained_in, parse_constraints
from sparqlopt.rdf import Iri, Var
from sparqlopt.sqo import (NotApplicable, apply_semantic_rewrites, counterexamples, elim_opt_redundant_bgp,
                           elim_opt_to_and, filter_rewrites, model_documents, optimize, optimize_bgp,
                           semantic_rewrites, simplify_empty)
from sparqlopt import syntax as sx

INCLUSION = parse_constraints("const p1, p2;\nT(x1,p1,x2) -> exists y . T(x1,p2,y)")
SYMMETRIC = parse_constraints("T(x1,x2,x3) -> T(x3,x2,x1)")
FUNCTIONAL = parse_constraints("const p;\nT(x,p,y), T(x,p,z) -> y = z")
E = sx.parse_expr
Q = sx.parse_query


def docs_for(sigma, n=50, seed=0):
    docs = model_documents(sigma, random.Random(seed), n)
    assert len(docs) == n
    return docs


# --------------------------------------------------------------- C&B pipeline

def test_inclusion_example():
    q = Q("SELECT ?x WHERE (?x, p1, ?a) AND (?x, p2, ?b)")
    report = optimize_bgp(q, INCLUSION)
    assert report.status == "ok" and report.complete is True
    assert [str(r) for r in report.rewrites] == ["SELECT ?x WHERE (?x, p1, ?a)"]
    (r,) = report.rewrites
    assert contained_in(c1_translate(r), c1_translate(q), INCLUSION).holds is True
    assert contained_in(c1_translate(q), c1_translate(r), INCLUSION).holds is True
    assert contained_in(c1_translate(r), c1_translate(q)).holds is False
    assert counterexamples(q, r, docs_for(INCLUSION)) == []


def test_minimal_query_without_constraints():
    q = Q("SELECT ?x WHERE (?x, p1, ?a) AND (?a, p2, c)")
    report = optimize_bgp(q, [])
    assert report.rewrites == [q]


def test_redundant_pattern_without_constraints():
    report = optimize_bgp(Q("SELECT ?x WHERE (?x, p, ?a) AND (?x, p, ?b)"), [])
    assert [str(r) for r in report.rewrites] == ["SELECT ?x WHERE (?x, p, ?a)"]


def test_noncompleteness_example():
    q1 = Q("SELECT ?x WHERE (?x, b, 'l')")
    q2 = Q("SELECT ?x WHERE (?x, b, 'l') AND (?x, a, c)")
    report = optimize_bgp(q1, SYMMETRIC)
    assert report.complete is False
    assert report.schemes["c1"].dropped == 1
    assert q2 not in report.rewrites
    assert report.rewrites == [q1]


def test_c2_scheme():
    q = Q("SELECT ?x WHERE (?x, p1, ?a) AND (?x, p2, ?b)")
    report = optimize_bgp(q, INCLUSION, scheme="c2")
    assert [str(r) for r in report.rewrites] == ["SELECT ?x WHERE (?x, p1, ?a)"]
    assert report.schemes["c2"].status == "terminated"
    blocked = optimize_bgp(Q("SELECT ?x WHERE (?x, ?p, ?a)"), INCLUSION, scheme="c2")
    assert blocked.schemes["c2"].status == "not applicable" and blocked.rewrites == []
    with pytest.raises(ValueError):
        optimize_bgp(q, INCLUSION, scheme="c3")


def test_budget_exhaustion_is_unknown():
    loop = parse_constraints("T(x1,x2,x3) -> exists y . T(x3,x2,y)")
    report = optimize_bgp(Q("SELECT ?x WHERE (?x, p, ?a)"), loop, budget=50)
    assert report.status == "unknown" and report.rewrites == []
    assert report.termination is None


def test_rejects_other_fragments():
    with pytest.raises(FragmentError):
        optimize_bgp(Q("SELECT ?x WHERE (?x, p, ?a) OPT (?a, p, ?b)"), [])


def _random_bgp(rng, preds):
    terms = [Var("x"), Var("y"), Var("z"), Iri("a")]
    pats = [sx.Pattern(rng.choice(terms[:3]), rng.choice(preds), rng.choice(terms)) for _ in range(rng.randint(1, 3))]
    body = sx.conjunction(pats)
    vs = sorted(sx.variables(body), key=str)
    return sx.Query(rng.sample(vs, rng.randint(1, len(vs))), body)


SIGMAS = [INCLUSION, FUNCTIONAL, parse_constraints("const p1, p2;\nT(x,p1,y) -> T(y,p2,x)"),
          parse_constraints("const p1, p2;\nT(x,p1,y), T(y,p1,z) -> T(x,p2,z)")]


def test_rewrites_agree_on_model_documents():
    rng = random.Random(3)
    preds = [Iri("p1"), Iri("p2"), Iri("p")]
    docs = {i: docs_for(s, 15, seed=i) for i, s in enumerate(SIGMAS)}
    for _ in range(60):
        i = rng.randrange(len(SIGMAS))
        q = _random_bgp(rng, preds)
        report = optimize_bgp(q, SIGMAS[i])
        assert report.status == "ok"
        if not report.rewrites:
            # every minimal CQ needed a repeated head variable
            run = report.schemes["c1"]
            assert run.candidates and run.dropped == run.candidates, q
            continue
        sizes = {len(sx.patterns_of(r.body)) for r in report.rewrites}
        assert len(sizes) == 1 and sizes.pop() <= len(sx.patterns_of(q.body))
        for r in report.rewrites:
            assert counterexamples(q, r, docs[i]) == [], (q, r)


def test_scheme_interchange():
    rng = random.Random(4)
    preds = [Iri("p1"), Iri("p2"), Iri("p")]
    for _ in range(40):
        sigma = rng.choice(SIGMAS)
        q = _random_bgp(rng, preds)
        via_c2 = optimize_bgp(q, sigma, scheme="c2")
        if via_c2.schemes["c2"].status == "terminated":
            assert optimize_bgp(q, sigma, scheme="c1").schemes["c1"].status != "unknown"


# ---------------------------------------------------------------- Opt rewrites

def test_opt_to_and():
    q1, q2 = E("(?x, p1, ?a)"), E("(?x, p2, ?b)")
    out = elim_opt_to_and(q1, q2, INCLUSION)
    assert out == sx.And(q1, q2)
    assert counterexamples(sx.Opt(q1, q2), out, docs_for(INCLUSION)) == []
    assert isinstance(elim_opt_to_and(q1, q2, []), NotApplicable)
    assert isinstance(elim_opt_to_and(q1, E("(?x, p3, ?b)"), INCLUSION), NotApplicable)
    assert isinstance(elim_opt_to_and(q1, E("(?x, p2, ?b) UNION (?x, p1, ?b)"), INCLUSION), NotApplicable)


def test_opt_redundant_bgp():
    q1 = E("(?x, p, ?a) AND (?a, p, ?b)")
    q2, q3 = E("(?x, p, ?a)"), E("(?b, q, ?c)")
    out = elim_opt_redundant_bgp(q1, q2, q3, [])
    assert out == sx.Opt(q1, q3)
    before = sx.Opt(q1, sx.And(q2, q3))
    assert counterexamples(before, out, docs_for(SYMMETRIC)) == []
    assert isinstance(elim_opt_redundant_bgp(q1, E("(?x, q, ?a)"), q3, []), NotApplicable)
    failed = elim_opt_redundant_bgp(q1, E("(?x, q, ?d)"), q3, [])
    assert isinstance(failed, NotApplicable) and "vars" in failed.reason


def test_opt_redundant_bgp_under_constraints():
    q1, q2, q3 = E("(?x, p1, ?a)"), E("(?x, p2, ?b)"), E("(?x, q, ?c)")
    assert isinstance(elim_opt_redundant_bgp(q1, q2, q3, INCLUSION), NotApplicable)
    q1 = E("(?x, p1, ?a) AND (?x, p2, ?b)")
    assert elim_opt_redundant_bgp(q1, q2, q3, INCLUSION) == sx.Opt(q1, q3)


# ------------------------------------------------------------- Filter rewrites

def test_unbound_filter_after_implied_opt():
    q = E("((?x, p1, ?a) OPT (?x, p2, ?b)) FILTER !bnd(?b)")
    rules = {r.rule: r for r in filter_rewrites(q, INCLUSION)}
    assert isinstance(rules["unbound-after-implied-opt"].result, sx.Empty)
    assert all(evaluate(q, d) == frozenset() for d in docs_for(INCLUSION))
    assert filter_rewrites(q, []) == []


def test_merge_equal_vars():
    q = Q("SELECT ?s ?x WHERE ((?s, p, ?x) AND (?s, p, ?y)) FILTER ?x = ?y")
    (r,) = filter_rewrites(q, FUNCTIONAL)
    assert r.rule == "merge-equal-vars"
    assert str(r.result) == "SELECT ?s ?x WHERE ((?s, p, ?x) AND (?s, p, ?x))"
    assert counterexamples(q, r.result, docs_for(FUNCTIONAL)) == []
    # ?y is projected away, so folding it onto ?x is sound even without constraints
    assert [str(r.result) for r in filter_rewrites(q, [])] == [str(r.result)]
    other = Q("SELECT ?s ?x WHERE ((?s, p, ?x) AND (?s, q, ?y)) FILTER ?x = ?y")
    assert filter_rewrites(other, FUNCTIONAL) == []


def test_forced_head_equality_has_no_sparql_rewrite():
    q = Q("SELECT ?x ?z WHERE (((?y, p, ?x) AND (?z, p, ?y)) AND (?z, p, ?z))")
    report = optimize_bgp(q, FUNCTIONAL)
    assert report.rewrites == []
    assert report.schemes["c1"].dropped == 1 and not report.complete


def test_merge_equal_vars_keeps_projected_variable():
    q = Q("SELECT ?s ?y WHERE ((?s, p, ?x) AND (?s, p, ?y)) FILTER ?x = ?y")
    (r,) = filter_rewrites(q, FUNCTIONAL)
    assert str(r.result) == "SELECT ?s ?y WHERE ((?s, p, ?y) AND (?s, p, ?y))"


def test_unequal_vars_filter_is_empty():
    q = Q("SELECT ?s ?x WHERE ((?s, p, ?x) AND (?s, p, ?y)) FILTER !(?x = ?y)")
    (r,) = filter_rewrites(q, FUNCTIONAL)
    assert r.rule == "unequal-vars-empty"
    assert str(r.result) == "SELECT ?s ?x WHERE EMPTY"
    assert counterexamples(q, r.result, docs_for(FUNCTIONAL)) == []


def test_unequal_vars_needs_every_answer_to_agree():
    # projecting away ?y must not make the filter look redundant
    q = Q("SELECT ?s WHERE ((?s, q, ?x) AND (?s, q, ?y)) FILTER !(?x = ?y)")
    assert filter_rewrites(q, FUNCTIONAL) == []


def test_no_rewrites_without_constraints():
    q = E("((?x, p, ?a) OPT (?x, q, ?b)) FILTER !bnd(?b)")
    assert semantic_rewrites(q, []) == []


def test_simplify_empty():
    assert isinstance(simplify_empty(E("EMPTY AND (?x, p, ?y)")), sx.Empty)
    assert simplify_empty(E("EMPTY UNION (?x, p, ?y)")) == E("(?x, p, ?y)")
    assert simplify_empty(E("(?x, p, ?y) UNION EMPTY")) == E("(?x, p, ?y)")
    assert isinstance(simplify_empty(E("EMPTY OPT (?x, p, ?y)")), sx.Empty)
    assert simplify_empty(E("(?x, p, ?y) OPT EMPTY")) == E("(?x, p, ?y)")
    assert simplify_empty(E("((?x, p, ?y) AND ((?x, p, ?z) AND EMPTY)) UNION (?x, q, ?y)")) == E("(?x, q, ?y)")


def test_rewrite_skipped_when_enclosing_filter_breaks():
    q = E("((?x, p1, ?a) OPT (((?x, p, ?b) AND (?x, p, ?c)) FILTER !(?b = ?c))) FILTER bnd(?b)")
    sigma = parse_constraints("const p;\nT(x,p,y), T(x,p,z) -> y = z")
    assert all(r.rule != "unequal-vars-empty" for r in semantic_rewrites(q, sigma))


def _random_semantic_query(rng):
    pats = lambda k: sx.conjunction(sx.Pattern(Var("x"), rng.choice([Iri("p1"), Iri("p2"), Iri("p")]),
                                               rng.choice([Var("a"), Var("b"), Var("c")])) for _ in range(k))
    q1, q2 = pats(rng.randint(1, 2)), pats(rng.randint(1, 2))
    shape = rng.randrange(4)
    if shape == 0:
        return sx.Opt(q1, q2)
    if shape == 1:
        return sx.Opt(q1, sx.And(q2, pats(1)))
    v = sorted(sx.variables(q2) - sx.variables(q1), key=str)
    if shape == 2 and v:
        return sx.Filter(sx.Opt(q1, q2), sx.Not(sx.Bound(v[0])))
    both = sorted(sx.variables(sx.And(q1, q2)) - {Var("x")}, key=str)
    if len(both) >= 2:
        return sx.Filter(sx.And(q1, q2), sx.Not(sx.EqVar(both[0], both[1])))
    return sx.Opt(q1, q2)


def test_semantic_rewrites_agree_on_model_documents():
    rng = random.Random(8)
    docs = {i: docs_for(s, 15, seed=10 + i) for i, s in enumerate(SIGMAS)}
    applied = 0
    for _ in range(150):
        i = rng.randrange(len(SIGMAS))
        q = _random_semantic_query(rng)
        for r in semantic_rewrites(q, SIGMAS[i]):
            applied += 1
            assert counterexamples(q, r.result, docs[i]) == [], (q, r)
    assert applied > 20


def test_optimize_runs_rewrites_then_backchase():
    q = Q("SELECT ?x ?a ?b WHERE (?x, p1, ?a) OPT (?x, p2, ?b)")
    report = optimize(q, INCLUSION, verify_docs=10)
    assert [s.rule for s in report.steps] == ["opt-to-and"]
    assert str(report.result) == "SELECT ?a ?b ?x WHERE ((?x, p1, ?a) AND (?x, p2, ?b))"
    assert report.status == "ok"
    assert all(failed == 0 for _, failed in report.verification.values())
    assert "rewrite: opt-to-and" in report.format()
    out, steps = apply_semantic_rewrites(q, [])
    assert out == q and steps == []


def test_model_documents():
    docs = docs_for(INCLUSION, 20)
    for d in docs:
        assert models([Atom(TRIPLE, tuple(t)) for t in d], INCLUSION)
    with pytest.raises(FragmentError):
        model_documents(parse_constraints("R(x) -> S(x)"), random.Random(0), 1)
