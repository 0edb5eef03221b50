import itertools
import random

import networkx as nx
import pytest

from oracles import (_rename, all_positions_of_schema, brute_fires, random_constraint, random_sigma,
                     verify_witness)
from sparqlopt.chase import BudgetExceeded, Terminated, chase, models
from sparqlopt.cq import TGD, Atom, Null, Position, all_positions, body_positions, check_schema, parse_constraints
from sparqlopt.rdf import Iri, Var
from sparqlopt.termination import (CONDITIONS, aff_cl, affected_positions, analyze, chase_graph,
                                   dependency_graph, fires, fires_restricted, fires_restricted_witness,
                                   fires_witness, is_safe, is_safely_restricted, is_safely_stratified,
                                   is_stratified, is_weakly_acyclic, minimal_restriction_system,
                                   propagation_graph, restriction_violations,
                                   safely_restricted_via_stratification)

RS = "R(x1,x2,x3), S(x2) -> exists y . R(x2,y,x1)"
GAMMA = "T(x1,x2), T(x2,x1) -> exists y1, y2 . T(x1,y1), T(y1,y2), T(y2,x1)"
PAIR = "S(x2,x3), R(x1,x2,x3) -> exists y . R(x2,y,x1)\nR(x1,x2,x3) -> S(x1,x3)"
ABCD = """R1(x1,x2) -> exists y . S(x1,x2,y)
R1(x1,x2) -> exists y . T(x1,x2,y)
S(x1,x2,x3), T(x4,x5,x6) -> T(x5,x1,x4)
S(x1,x2,x3), T(x4,x5,x3) -> T(x1,x3,x3), R1(x3,x1), R2(x3,x1)"""
TOY = "R(x1,x2) -> exists y . R(x2,y)"


def P(text):
    return frozenset(Position(r, int(i)) for r, i in (s.split("^") for s in text.split()))


# ------------------------------------------------------------ position graphs

def test_safe_example_graphs():
    sigma = parse_constraints(RS)
    assert not is_weakly_acyclic(sigma)
    assert dependency_graph(sigma).special_cycle() is not None
    assert affected_positions(sigma) == P("R^2")
    prop = propagation_graph(sigma)
    assert prop.edges == frozenset() and prop.vertices == P("R^2")
    assert is_safe(sigma)


def test_gamma_graphs():
    sigma = parse_constraints(GAMMA)
    assert affected_positions(sigma) == P("T^1 T^2")
    dep, prop = dependency_graph(sigma), propagation_graph(sigma)
    assert dep.edges == prop.edges and dep.special == prop.special
    assert not is_safe(sigma)


def test_trivial_graphs():
    assert is_weakly_acyclic([]) and is_safe([])
    full = parse_constraints("R(x, y), R(y, z) -> R(x, z)")
    assert is_weakly_acyclic(full) and affected_positions(full) == frozenset()
    assert not is_weakly_acyclic(parse_constraints(TOY))


def test_dependency_graph_edges():
    g = dependency_graph(parse_constraints(TOY))
    assert g.format() == "R^2 -> R^1\nR^2 *-> R^2"


def test_propagation_graph_is_subgraph():
    rng = random.Random(1)
    for _ in range(500):
        sigma = random_sigma(rng)
        assert propagation_graph(sigma).is_subgraph_of(dependency_graph(sigma))


def _affected_reference(sigma):
    """Fixpoint over positions, written from the rule text."""
    aff = set()
    tgds = [c for c in sigma if isinstance(c, TGD)]
    while True:
        new = set(aff)
        for c in tgds:
            for atom in c.head:
                for i, t in enumerate(atom.args):
                    pos = Position(atom.relation, i + 1)
                    if t in c.existentials:
                        new.add(pos)
                    elif isinstance(t, Var):
                        occ = {Position(b.relation, k + 1) for b in c.body for k, u in enumerate(b.args) if u == t}
                        if occ and occ <= aff:
                            new.add(pos)
        if new == aff:
            return frozenset(aff)
        aff = new


def test_affected_positions_reference():
    rng = random.Random(2)
    for _ in range(300):
        sigma = random_sigma(rng)
        assert affected_positions(sigma) == _affected_reference(sigma)


# ---------------------------------------------------------------- fires

def test_pair_fires_both_ways():
    alpha, beta = parse_constraints(PAIR)
    assert fires(alpha, beta) and fires(beta, alpha)
    assert not is_stratified([alpha, beta])


def test_gamma_stratified():
    sigma = parse_constraints(GAMMA)
    assert not fires(sigma[0], sigma[0])
    assert is_stratified(sigma)


def test_empty_sigma_all_conditions():
    r = analyze([])
    assert all(r.verdict(c) for c in CONDITIONS)


def test_toy_fires_itself():
    (c,) = parse_constraints(TOY)
    w = fires_witness(c, c)
    assert w is not None
    assert verify_witness(_rename(c, "a_"), _rename(c, "b_"), w)
    assert not is_stratified([c])


def test_fires_matches_brute_force():
    rng = random.Random(5)
    positives = 0
    for _ in range(120):
        alpha, beta = random_constraint(rng), random_constraint(rng)
        w = fires_witness(alpha, beta)
        if brute_fires(alpha, beta):
            assert w is not None, (alpha, beta)
        if w is not None:
            positives += 1
            assert verify_witness(_rename(alpha, "a_"), _rename(beta, "b_"), w), (alpha, beta)
    assert positives > 15


def test_fires_restricted_matches_brute_force():
    rng = random.Random(6)
    positions = all_positions_of_schema()
    for _ in range(80):
        alpha, beta = random_constraint(rng), random_constraint(rng)
        ps = frozenset(p for p in positions if rng.random() < 0.6)
        w = fires_restricted_witness(alpha, beta, ps)
        if brute_fires(alpha, beta, ps, pool_size=2):
            assert w is not None, (alpha, beta, ps)
        if w is not None:
            assert verify_witness(_rename(alpha, "a_"), _rename(beta, "b_"), w, ps)


def test_fires_restricted_monotone_and_implies_fires():
    rng = random.Random(8)
    positions = all_positions_of_schema()
    for _ in range(200):
        alpha, beta = random_constraint(rng), random_constraint(rng)
        small = frozenset(p for p in positions if rng.random() < 0.4)
        large = small | frozenset(p for p in positions if rng.random() < 0.5)
        if fires_restricted(alpha, beta, small):
            assert fires_restricted(alpha, beta, large)
        if fires_restricted(alpha, beta, large):
            assert fires(alpha, beta)


def test_fires_restricted_without_nulls():
    rng = random.Random(10)
    for _ in range(200):
        alpha, beta = random_constraint(rng), random_constraint(rng)
        w = fires_restricted_witness(alpha, beta, frozenset())
        if w is None:
            continue
        assert not any(isinstance(v, Null) for atom in w.instance for v in atom.args)
        # the null that beta copies can only be one that alpha just created
        assert isinstance(alpha, TGD) and alpha.existentials


def test_pair_restricted_to_all_positions():
    alpha, beta = parse_constraints(PAIR)
    everything = all_positions([alpha, beta])
    assert fires_restricted(alpha, beta, everything) <= fires(alpha, beta)
    assert fires_restricted(beta, alpha, everything) <= fires(beta, alpha)


# -------------------------------------------------------------- aff_cl

def _aff_cl_reference(alpha, ps):
    out = set()
    for atom in alpha.head:
        for i, t in enumerate(atom.args):
            if not isinstance(t, Var):
                continue
            body_occ = {Position(b.relation, k + 1) for b in alpha.body for k, u in enumerate(b.args) if u == t}
            if t in alpha.existentials or body_occ <= set(ps):
                out.add(Position(atom.relation, i + 1))
    return frozenset(out)


def test_aff_cl_examples():
    (alpha,) = parse_constraints(RS)
    assert aff_cl(alpha, frozenset()) == P("R^2")
    assert aff_cl(alpha, body_positions([alpha])) == P("R^1 R^2 R^3")


def test_aff_cl_reference():
    rng = random.Random(12)
    positions = all_positions_of_schema()
    done = 0
    while done < 300:
        alpha = random_constraint(rng)
        if not isinstance(alpha, TGD):
            continue
        done += 1
        ps = frozenset(p for p in positions if rng.random() < 0.5)
        assert aff_cl(alpha, ps) == _aff_cl_reference(alpha, ps)


# --------------------------------------------------------- restriction systems

def test_abcd_minimal_restriction_system():
    sigma = parse_constraints(ABCD)
    rs = minimal_restriction_system(sigma)
    assert rs.edges == set() and all(not f for f in rs.f)
    assert is_safely_restricted(sigma)
    assert not is_safely_stratified(sigma)
    g = chase_graph(sigma)
    assert any(set(comp) == {0, 1, 2, 3} for comp in nx.strongly_connected_components(g))


def test_empty_restriction_system():
    rs = minimal_restriction_system([])
    assert rs.edges == set() and rs.f == []


def test_restriction_system_is_closed_and_order_independent():
    rng = random.Random(14)
    for trial in range(60):
        sigma = random_sigma(rng, rng.randint(1, 3))
        base = minimal_restriction_system(sigma)
        assert restriction_violations(sigma, base) == []
        for k in range(3):
            other = minimal_restriction_system(sigma, random.Random(trial * 10 + k))
            assert other.edges == base.edges and other.f == base.f


def test_restriction_violations_reports_missing_edge():
    sigma = parse_constraints(PAIR)
    rs = minimal_restriction_system(sigma)
    assert restriction_violations(sigma, rs) == []
    broken = type(rs)(set(), [frozenset(f) for f in rs.f])
    if rs.edges:
        assert restriction_violations(sigma, broken)


# -------------------------------------------------------------- reports

GOLDEN = {
    "rs": (RS, {"safe": True, "weakly-acyclic": False}),
    "gamma": (GAMMA, {"stratified": True, "safe": False}),
    "pair": (PAIR, {"safe": True, "stratified": False}),
    "abcd": (ABCD, {"safely-restricted": True, "safely-stratified": False}),
}


@pytest.mark.parametrize("name", sorted(GOLDEN))
def test_golden_verdicts(name):
    text, expected = GOLDEN[name]
    report = analyze(parse_constraints(text))
    for cond, value in expected.items():
        assert report.verdict(cond) is value, (name, cond)
    assert report.implications_hold()


def test_report_rendering():
    report = analyze(parse_constraints(RS))
    assert report.summary() == ("safe: yes, weakly-acyclic: no, stratified: yes, "
                                "safely-stratified: yes, safely-restricted: yes")
    assert report.label == "safe and stratified"
    assert report.details()[-1] == "classification: safe and stratified"
    d = report.as_dict()
    assert d["safe"] is True and d["weakly-acyclic"] is False and d["dependency_cycle"]


def test_single_check():
    report = analyze(parse_constraints(TOY), checks=["weakly-acyclic"])
    assert report.weakly_acyclic is False and report.safe is None
    assert "safe: not checked" in report.summary()
    with pytest.raises(ValueError):
        analyze([], checks=["acyclic"])


def test_implications_on_random_sets():
    rng = random.Random(15)
    for _ in range(150):
        sigma = random_sigma(rng)
        report = analyze(sigma)
        assert report.implications_hold(), sigma
        assert safely_restricted_via_stratification(sigma) == report.safely_restricted


def test_falsch_variant_on_golden_sets():
    for text, _ in GOLDEN.values():
        sigma = parse_constraints(text)
        assert safely_restricted_via_stratification(sigma) == is_safely_restricted(sigma)


# ---------------------------------------------------------- end-to-end soundness

def random_instance_for(sigma, rng, n_values=8, max_facts=8):
    arities = check_schema(a for c in sigma for a in c.body + c.head)
    values = [Iri(f"v{i}") for i in range(rng.randint(1, n_values))]
    rels = sorted(arities)
    return [Atom(r, tuple(rng.choice(values) for _ in range(arities[r])))
            for r in (rng.choice(rels) for _ in range(rng.randint(1, max_facts)))]


def _certified(sigma):
    report = analyze(sigma)
    return any(report.verdict(c) for c in CONDITIONS)


@pytest.mark.parametrize("name", sorted(GOLDEN))
def test_certified_golden_sets_terminate(name):
    sigma = parse_constraints(GOLDEN[name][0])
    rng = random.Random(name)
    for _ in range(100):
        out = chase(random_instance_for(sigma, rng), sigma)
        assert isinstance(out, Terminated)
        assert models(out.instance, sigma)


def test_certified_random_sets_terminate():
    rng = random.Random(16)
    certified = 0
    for _ in range(150):
        sigma = random_sigma(rng)
        if not _certified(sigma):
            continue
        certified += 1
        for _ in range(10):
            out = chase(random_instance_for(sigma, rng), sigma)
            assert not isinstance(out, BudgetExceeded), sigma
            if isinstance(out, Terminated):
                assert models(out.instance, sigma)
    assert certified > 50


def test_uncertified_toy_runs_out_of_budget():
    sigma = parse_constraints(TOY)
    assert not _certified(sigma)
    assert isinstance(chase([Atom("R", (Iri("a"), Iri("b")))], sigma, budget=1000), BudgetExceeded)
