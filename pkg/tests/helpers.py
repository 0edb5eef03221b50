"""Random generators shared by the property tests and the acceptance suite."""
import random

from sparqlopt import algebra as alg
from sparqlopt import syntax as sx
from sparqlopt.rdf import Document, Iri, Triple, Var
from sparqlopt.rewrite import LR, RL, RuleId, rewrite_at

CONSTS = [Iri(c) for c in "abcd"]
VARS = [Var(v) for v in "xyz"]


def random_document(rng: random.Random, max_triples: int = 6, consts=CONSTS) -> Document:
    n = rng.randint(0, max_triples)
    return Document(Triple(rng.choice(consts), rng.choice(consts), rng.choice(consts)) for _ in range(n))


def random_pattern(rng, consts=CONSTS, variables=VARS) -> sx.Pattern:
    def slot():
        return rng.choice(variables) if rng.random() < 0.55 else rng.choice(consts)
    return sx.Pattern(slot(), slot(), slot())


def random_condition(rng, variables, depth=2, equalities_only=False, consts=CONSTS):
    variables = list(variables) or list(VARS)
    if equalities_only:
        atom = rng.choice(["eqc", "eqv"])
        if atom == "eqc":
            c = sx.EqConst(rng.choice(variables), rng.choice(consts))
        else:
            c = sx.EqVar(rng.choice(variables), rng.choice(variables))
        if depth > 0 and rng.random() < 0.3:
            c = sx.CondAnd(c, random_condition(rng, variables, depth - 1, True, consts))
        return c
    r = rng.random()
    if depth <= 0 or r < 0.5:
        kind = rng.choice(["bnd", "eqc", "eqv"])
        if kind == "bnd":
            return sx.Bound(rng.choice(variables))
        if kind == "eqc":
            return sx.EqConst(rng.choice(variables), rng.choice(consts))
        return sx.EqVar(rng.choice(variables), rng.choice(variables))
    if r < 0.65:
        return sx.Not(random_condition(rng, variables, depth - 1, consts=consts))
    op = sx.CondAnd if r < 0.85 else sx.CondOr
    return op(random_condition(rng, variables, depth - 1, consts=consts),
              random_condition(rng, variables, depth - 1, consts=consts))


def random_algebra(rng, depth=3, minus_only=False, consts=CONSTS, variables=VARS):
    """Random algebra expression; minus_only restricts to union/projection-free ones."""
    if depth <= 0 or rng.random() < 0.3:
        return alg.Leaf(random_pattern(rng, consts, variables))
    kinds = ["join", "minus", "leftjoin", "select"]
    if not minus_only:
        kinds += ["union", "project"]
    k = rng.choice(kinds)
    if k == "select":
        child = random_algebra(rng, depth - 1, minus_only, consts, variables)
        return alg.Select(random_condition(rng, child.vars or variables, consts=consts), child)
    if k == "project":
        child = random_algebra(rng, depth - 1, minus_only, consts, variables)
        return alg.Project(rng.sample(variables, rng.randint(0, len(variables))), child)
    cls = {"join": alg.Join, "minus": alg.Minus, "leftjoin": alg.LeftJoin, "union": alg.Union}[k]
    return cls(random_algebra(rng, depth - 1, minus_only, consts, variables),
               random_algebra(rng, depth - 1, minus_only, consts, variables))


def random_sparql(rng, depth=3, ops="AUOF", consts=CONSTS, variables=VARS):
    """Random SPARQL expression using the given operator letters."""
    if depth <= 0 or rng.random() < 0.3:
        return random_pattern(rng, consts, variables)
    k = rng.choice(ops)
    if k == "F":
        child = random_sparql(rng, depth - 1, ops, consts, variables)
        if not child.vars:
            return child
        return sx.Filter(child, random_condition(rng, child.vars, consts=consts))
    cls = {"A": sx.And, "U": sx.Union, "O": sx.Opt}[k]
    return cls(random_sparql(rng, depth - 1, ops, consts, variables),
               random_sparql(rng, depth - 1, ops, consts, variables))


# Builders that produce a node whose shape matches one side of a rule.
def _shape_builders(rng):
    E = lambda: random_algebra(rng, 2)
    M = lambda: random_algebra(rng, 2, minus_only=True)
    V = lambda: rng.choice(VARS)
    R = lambda e: random_condition(rng, e.vars or VARS, depth=1)
    Req = lambda e: random_condition(rng, e.vars or VARS, equalities_only=True)

    def same(f, build):
        a = f()
        return build(a)

    def sel(build_child, cond=R):
        child = build_child()
        return alg.Select(cond(child), child)

    J, U, Mi, L, S = alg.Join, alg.Union, alg.Minus, alg.LeftJoin, alg.Select
    push = {
        LR: lambda op, cond=R: (lambda: sel(lambda: op(E(), E()), cond)),
        RL: lambda op, cond=R: (lambda: (lambda a: op(S(cond(a), a), E()))(E())),
    }
    b = {
        (RuleId.UIdem, LR): lambda: same(E, lambda a: U(a, a)),
        (RuleId.UIdem, RL): E,
        (RuleId.JIdem, LR): lambda: same(M, lambda a: J(a, a)),
        (RuleId.JIdem, RL): M,
        (RuleId.LIdem, LR): lambda: same(M, lambda a: L(a, a)),
        (RuleId.LIdem, RL): M,
        (RuleId.Inv, LR): lambda: same(E, lambda a: Mi(a, a)),
        (RuleId.UAss, LR): lambda: U(U(E(), E()), E()),
        (RuleId.UAss, RL): lambda: U(E(), U(E(), E())),
        (RuleId.JAss, LR): lambda: J(J(E(), E()), E()),
        (RuleId.JAss, RL): lambda: J(E(), J(E(), E())),
        (RuleId.UComm, LR): lambda: U(E(), E()),
        (RuleId.JComm, LR): lambda: J(E(), E()),
        (RuleId.SReord, LR): lambda: sel(lambda: sel(E)),
        (RuleId.SUPush, LR): lambda: sel(lambda: U(E(), E())),
        (RuleId.SUPush, RL): lambda: (lambda r: U(S(r, E()), S(r, E())))(random_condition(rng, VARS, 1)),
        (RuleId.SDecompI, LR): lambda: (lambda a: S(sx.CondAnd(R(a), R(a)), a))(E()),
        (RuleId.SDecompI, RL): lambda: sel(lambda: sel(E)),
        (RuleId.SDecompII, LR): lambda: (lambda a: S(sx.CondOr(R(a), R(a)), a))(E()),
        (RuleId.SDecompII, RL): lambda: same(E, lambda a: U(S(R(a), a), S(R(a), a))),
        (RuleId.BndI, LR): lambda: S(sx.Bound(V()), E()),
        (RuleId.BndII, LR): lambda: S(sx.Bound(V()), alg.Leaf(random_pattern(rng))),
        (RuleId.BndIII, LR): lambda: S(sx.Not(sx.Bound(V())), E()),
        (RuleId.BndIV, LR): lambda: S(sx.Not(sx.Bound(V())), alg.Leaf(random_pattern(rng))),
        (RuleId.BndV, LR): lambda: S(sx.Bound(V()), L(E(), E())),
        (RuleId.BndV, RL): lambda: J(E(), E()),
        (RuleId.MReord, LR): lambda: Mi(Mi(E(), E()), E()),
        (RuleId.MMUCorr, LR): lambda: Mi(Mi(E(), E()), E()),
        (RuleId.MMUCorr, RL): lambda: Mi(E(), U(E(), E())),
        (RuleId.MJ, LR): lambda: Mi(E(), E()),
        (RuleId.MJ, RL): lambda: same(E, lambda a: Mi(a, J(a, E()))),
        (RuleId.LJ, LR): lambda: L(M(), M()),
        (RuleId.LJ, RL): lambda: same(M, lambda a: L(a, J(a, M()))),
        (RuleId.NegBndMinus, LR): lambda: S(sx.Not(sx.Bound(V())), L(M(), M())),
        (RuleId.NegBndMinus, RL): lambda: Mi(M(), M()),
    }
    b[(RuleId.UComm, RL)] = b[(RuleId.UComm, LR)]
    b[(RuleId.JComm, RL)] = b[(RuleId.JComm, LR)]
    b[(RuleId.SReord, RL)] = b[(RuleId.SReord, LR)]
    b[(RuleId.MReord, RL)] = b[(RuleId.MReord, LR)]
    for op, rule in ((J, RuleId.JUDistR), (Mi, RuleId.MUDistR), (L, RuleId.LUDistR)):
        b[(rule, LR)] = (lambda op: lambda: op(U(E(), E()), E()))(op)
        b[(rule, RL)] = (lambda op: lambda: same(E, lambda a: U(op(E(), a), op(E(), a))))(op)
    b[(RuleId.JUDistL, LR)] = lambda: J(E(), U(E(), E()))
    b[(RuleId.JUDistL, RL)] = lambda: same(E, lambda a: U(J(a, E()), J(a, E())))
    for op, rule in ((J, RuleId.SJPush), (Mi, RuleId.SMPush), (L, RuleId.SLPush)):
        b[(rule, LR)] = push[LR](op)
        b[(rule, RL)] = push[RL](op)
    for d in (LR, RL):
        ops = [push[d](op, Req) for op in (J, Mi, L)]
        b[(RuleId.WeakFilterPush, d)] = (lambda ops: lambda: rng.choice(ops)())(ops)
    return b


def directions(rule: RuleId) -> list:
    """Directions in which a rule can fire at all."""
    one_way = {RuleId.Inv, RuleId.BndI, RuleId.BndII, RuleId.BndIII, RuleId.BndIV}
    return [LR] if rule in one_way else [LR, RL]


def random_rule_instance(rng, rule: RuleId, direction: str, attempts: int = 500):
    """Return (expression, path) where rule applies in direction at path."""
    builders = _shape_builders(rng)
    build = builders[(rule, direction)]
    for _ in range(attempts):
        node = build()
        if rewrite_at(rule, direction, node) is None:
            continue
        if rng.random() < 0.4:
            other = random_algebra(rng, 1)
            wrap = rng.choice(["join", "union", "leftjoin", "minus", "select"])
            if wrap == "select":
                return alg.Select(random_condition(rng, node.vars or VARS, 1), node), (0,)
            cls = {"join": alg.Join, "union": alg.Union, "leftjoin": alg.LeftJoin, "minus": alg.Minus}[wrap]
            if rng.random() < 0.5:
                return cls(node, other), (0,)
            return cls(other, node), (1,)
        return node, ()
    raise RuntimeError(f"could not build an instance of {rule} {direction}")


# expressions over the fixed document of the and-elimination rewriting
LEMMA_CONSTS = [Iri(c) for c in ("a", "tv", "true", "false", "0", "1")]
LEMMA_VARS = [Var(v) for v in "abc"]


def lemma_pattern(rng):
    def pick(consts):
        return rng.choice(LEMMA_VARS) if rng.random() < 0.5 else Iri(rng.choice(consts))
    return sx.Pattern(pick(["a"]), pick(["tv", "true", "false"]), pick(["0", "1"]))


def lemma_expr(rng, depth=2):
    if depth <= 0 or rng.random() < 0.4:
        return lemma_pattern(rng)
    op = rng.choice("AOUF")
    if op == "F":
        child = lemma_expr(rng, depth - 1)
        if not child.vars:
            return child
        return sx.Filter(child, random_condition(rng, child.vars, consts=LEMMA_CONSTS))
    cls = {"A": sx.And, "O": sx.Opt, "U": sx.Union}[op]
    return cls(lemma_expr(rng, depth - 1), lemma_expr(rng, depth - 1))


def lemma_instance(rng):
    return lemma_expr(rng), [lemma_expr(rng) for _ in range(rng.randint(2, 3))]
