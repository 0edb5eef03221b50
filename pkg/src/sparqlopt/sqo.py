"""Semantic optimization of SPARQL queries under TGD/EGD constraints.

Two families of rewrites are offered.  ``optimize_bgp`` minimizes an And-only
query by translating it to a conjunctive query and running Chase & Backchase.
The Opt/Filter rewrites replace a subexpression by a Σ-equivalent one; their
preconditions are decided by CQ containment and so need And-only operands.
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

from .algebra import evaluate
from .chase import BackchaseResult, Terminated, Unknown, Unsatisfiable, cb, chase
from .cq import (CQ, TRIPLE, Atom, Constraint, FragmentError, Null, Undefined, c1_inverse, c1_translate,
                 c2_inverse, c2_translate, equivalent, isomorphic, sigma_prime)
from .rdf import Document, DocumentError, Iri, Literal, Triple, Var
from .syntax import (And, Bound, Empty, EqVar, Filter, Not, Opt, Pattern, Query, QuerySyntaxError, Union,
                     conjunction, is_and_only, patterns_of, variables)
from .termination import analyze

SCHEMES = ("c1", "c2", "auto")


@dataclass(frozen=True)
class NotApplicable:
    reason: str

    def __bool__(self) -> bool:
        return False

    def __str__(self) -> str:
        return f"not applicable: {self.reason}"


@dataclass(frozen=True)
class SemanticRewrite:
    """One rewrite step: the subexpression at ``path`` replaced by ``after``."""

    rule: str
    path: tuple
    before: object
    after: object
    result: object

    def __str__(self) -> str:
        where = "/".join(map(str, self.path)) or "root"
        return f"{self.rule} at {where}: {self.before} => {self.after}"


# ------------------------------------------------------------ tree helpers

def _children(e) -> tuple:
    if isinstance(e, Query):
        return (e.body,)
    if isinstance(e, (And, Union, Opt)):
        return (e.left, e.right)
    if isinstance(e, Filter):
        return (e.child,)
    return ()


def _rebuild(e, kids):
    """Rebuild e over new children, propagating EMPTY where it absorbs the operator."""
    if isinstance(e, Query):
        return Query(e.projection, kids[0])
    empty = [isinstance(k, Empty) for k in kids]
    if isinstance(e, Filter):
        return kids[0] if empty[0] else Filter(kids[0], e.cond)
    if not kids:
        return e
    left, right = kids
    if isinstance(e, And) and any(empty):
        return Empty()
    if isinstance(e, Union) and any(empty):
        return right if empty[0] else left
    if isinstance(e, Opt) and any(empty):
        return Empty() if empty[0] else left
    return type(e)(left, right)


def _sites(e, path: tuple = ()) -> Iterator[tuple]:
    for i, child in enumerate(_children(e)):
        yield from _sites(child, path + (i,))
    yield path


def _at(e, path: tuple):
    for i in path:
        e = _children(e)[i]
    return e


def _replace(e, path: tuple, new):
    if not path:
        return new
    kids = list(_children(e))
    kids[path[0]] = _replace(kids[path[0]], path[1:], new)
    return _rebuild(e, kids)


def simplify_empty(e):
    """Propagate EMPTY upwards through operators that cannot recover from it."""
    kids = [simplify_empty(k) for k in _children(e)]
    return _rebuild(e, kids) if kids else e


def rename_var(e, old: Var, new: Var):
    """Replace every occurrence of ``old`` by ``new`` in an And-only expression."""
    if isinstance(e, Pattern):
        return Pattern(*(new if t == old else t for t in e))
    if isinstance(e, And):
        return And(rename_var(e.left, old, new), rename_var(e.right, old, new))
    raise FragmentError(f"variable renaming needs an And-only expression: {e}")


# ------------------------------------------------------------ precondition checks

def _cq(q) -> CQ:
    return c1_translate(q)


def _decide(a: CQ, b: CQ, sigma, budget) -> Optional[NotApplicable]:
    verdict = equivalent(a, b, sigma, budget)
    if verdict.holds is None:
        return NotApplicable(f"undecided: {verdict.reason}")
    if not verdict.holds:
        return NotApplicable("precondition does not hold")
    return None


def _and_only(*exprs) -> Optional[NotApplicable]:
    for e in exprs:
        if not is_and_only(e):
            return NotApplicable(f"{e} is not And-only")
    return None


def _implied(q1, q2, sigma, budget) -> Optional[NotApplicable]:
    """Q1 ≡_Σ Select_vars(Q1)(Q1 And Q2)."""
    keep = variables(q1)
    return _decide(_cq(Query(keep, q1)), _cq(Query(keep, And(q1, q2))), sigma, budget)


def elim_opt_to_and(q1, q2, sigma: Sequence[Constraint], budget: Optional[int] = None):
    """Q1 Opt Q2 becomes Q1 And Q2 when Σ forces every Q1 answer to extend to Q2."""
    bad = _and_only(q1, q2)
    if bad is None:
        bad = _implied(q1, q2, sigma, budget)
    return And(q1, q2) if bad is None else bad


def elim_opt_redundant_bgp(q1, q2, q3, sigma: Sequence[Constraint], budget: Optional[int] = None):
    """Q1 Opt (Q2 And Q3) becomes Q1 Opt Q3 when Q1 ≡_Σ Q1 And Q2."""
    bad = _and_only(q1, q2)
    if bad is not None:
        return bad
    if not variables(q2) <= variables(q1):
        return NotApplicable("vars(Q2) is not contained in vars(Q1)")
    keep = variables(q1)
    bad = _decide(_cq(Query(keep, q1)), _cq(Query(keep, And(q1, q2))), sigma, budget)
    return Opt(q1, q3) if bad is None else bad


def _forced_equal(q2, x: Var, y: Var, sigma, budget) -> Optional[NotApplicable]:
    """Every answer of Q2 on a Σ-model binds ?x and ?y to the same value."""
    cq = _cq(q2)
    sub = {y: x}
    merged = CQ([sub.get(v, v) for v in cq.head], [a.map(sub) for a in cq.body])
    return _decide(cq, merged, sigma, budget)


def _filter_candidates(node, sigma, budget) -> Iterator[tuple[str, object]]:
    if isinstance(node, Filter) and isinstance(node.cond, Not):
        inner = node.cond.arg
        child = node.child
        if isinstance(inner, Bound) and isinstance(child, Opt):
            q1, q2 = child.left, child.right
            if (inner.var in variables(q2) and _and_only(q1, q2) is None
                    and _implied(q1, q2, sigma, budget) is None):
                yield "unbound-after-implied-opt", Empty()
        if isinstance(inner, EqVar) and is_and_only(child) and inner.left != inner.right:
            if _forced_equal(child, inner.left, inner.right, sigma, budget) is None:
                yield "unequal-vars-empty", Empty()
    if (isinstance(node, Query) and isinstance(node.body, Filter) and isinstance(node.body.cond, EqVar)
            and is_and_only(node.body.child)):
        q2, s = node.body.child, node.projection
        x, y = node.body.cond.left, node.body.cond.right
        for keep, drop in ((x, y), (y, x)):
            if keep == drop or drop in s:
                continue
            renamed = rename_var(q2, drop, keep)
            if _decide(_cq(Query(s, q2)), _cq(Query(s, renamed)), sigma, budget) is None:
                yield "merge-equal-vars", Query(s, renamed)
                break


def _opt_candidates(node, sigma, budget) -> Iterator[tuple[str, object]]:
    if not isinstance(node, Opt) or not is_and_only(node.left):
        return
    q1, r = node.left, node.right
    if is_and_only(r):
        out = elim_opt_to_and(q1, r, sigma, budget)
        if not isinstance(out, NotApplicable):
            yield "opt-to-and", out
            return
        pats = patterns_of(r)
        for k in range(len(pats) - 1, 0, -1):
            for drop in itertools.combinations(range(len(pats)), k):
                q2 = conjunction(pats[i] for i in drop)
                q3 = conjunction(p for i, p in enumerate(pats) if i not in drop)
                out = elim_opt_redundant_bgp(q1, q2, q3, sigma, budget)
                if not isinstance(out, NotApplicable):
                    yield "drop-redundant-opt-bgp", out
                    return
    elif isinstance(r, And):
        for q2, q3 in ((r.left, r.right), (r.right, r.left)):
            if is_and_only(q2):
                out = elim_opt_redundant_bgp(q1, q2, q3, sigma, budget)
                if not isinstance(out, NotApplicable):
                    yield "drop-redundant-opt-bgp", out
                    return


def semantic_rewrites(q, sigma: Sequence[Constraint], budget: Optional[int] = None) -> list[SemanticRewrite]:
    """Every single-step Opt/Filter rewrite of q, sites in post-order."""
    out = []
    for path in _sites(q):
        node = _at(q, path)
        found = list(_opt_candidates(node, sigma, budget))
        found += list(_filter_candidates(node, sigma, budget))
        for rule, new in found:
            try:
                result = _replace(q, path, new)
            except QuerySyntaxError:
                # an enclosing filter would mention a variable the rewrite removed
                continue
            out.append(SemanticRewrite(rule, path, node, new, result))
    return out


def filter_rewrites(q, sigma: Sequence[Constraint], budget: Optional[int] = None) -> list[SemanticRewrite]:
    return [r for r in semantic_rewrites(q, sigma, budget) if r.rule not in ("opt-to-and", "drop-redundant-opt-bgp")]


def apply_semantic_rewrites(q, sigma: Sequence[Constraint], budget: Optional[int] = None,
                            max_steps: int = 50) -> tuple[object, list[SemanticRewrite]]:
    """Apply the first available rewrite until none remains; every rule shrinks the query."""
    steps = []
    for _ in range(max_steps):
        found = semantic_rewrites(q, sigma, budget)
        if not found:
            break
        steps.append(found[0])
        q = found[0].result
    return q, steps


# ---------------------------------------------------------------- C&B pipeline

@dataclass
class SchemeRun:
    status: str
    detail: str = ""
    candidates: int = 0
    dropped: int = 0

    def __str__(self) -> str:
        text = self.status + (f" ({self.detail})" if self.detail else "")
        if self.candidates:
            text += f", {self.candidates} minimal CQs, {self.dropped} not valid SPARQL"
        return text


@dataclass
class SqoReport:
    query: object
    schemes: dict = field(default_factory=dict)
    rewrites: list = field(default_factory=list)
    complete: Optional[bool] = None
    termination: Optional[str] = None
    steps: list = field(default_factory=list)
    result: object = None
    verification: dict = field(default_factory=dict)

    @property
    def status(self) -> str:
        runs = list(self.schemes.values())
        if any(r.status == "terminated" for r in runs):
            return "ok"
        if any(r.status == "unsatisfiable" for r in runs):
            return "unsatisfiable"
        if any(r.status == "unknown" for r in runs):
            return "unknown"
        return "not applicable"

    def format(self) -> str:
        lines = [f"query: {self.query}"]
        for step in self.steps:
            lines.append(f"rewrite: {step}")
        if self.steps:
            lines.append(f"after rewrites: {self.result}")
        for name, run in self.schemes.items():
            lines.append(f"scheme {name}: {run}")
        if self.termination:
            lines.append(f"chase termination: {self.termination}")
        if self.schemes:
            flag = {True: "yes", False: "no", None: "unknown"}[self.complete]
            lines.append(f"complete: {flag}")
        for r in self.rewrites:
            lines.append(f"minimal rewrite: {r}")
        for text, (checked, failed) in self.verification.items():
            lines.append(f"verified on {checked} documents, {failed} mismatches: {text}")
        return "\n".join(lines)

    def as_dict(self) -> dict:
        return {
            "query": str(self.query),
            "status": self.status,
            "steps": [{"rule": s.rule, "path": list(s.path), "before": str(s.before), "after": str(s.after)}
                      for s in self.steps],
            "result": str(self.result) if self.result is not None else None,
            "schemes": {k: {"status": v.status, "detail": v.detail, "candidates": v.candidates,
                            "dropped": v.dropped} for k, v in self.schemes.items()},
            "termination": self.termination,
            "complete": self.complete,
            "rewrites": [str(r) for r in self.rewrites],
            "verification": {k: {"documents": c, "mismatches": f} for k, (c, f) in self.verification.items()},
        }


def as_bgp_query(q) -> Query:
    if isinstance(q, Query):
        body = q.body
    else:
        body, q = q, Query(variables(q), q)
    if not is_and_only(body):
        raise FragmentError("optimize_bgp needs an And-only query body")
    return q


def certify(sigma: Sequence[Constraint]) -> Optional[str]:
    """Name of the first termination condition that holds for sigma, cheapest first."""
    for cond in ("weakly-acyclic", "safe", "stratified", "safely-stratified", "safely-restricted"):
        if analyze(sigma, [cond]).verdict(cond):
            return cond
    return None


def _run(result, scheme: str) -> SchemeRun:
    if isinstance(result, Unknown):
        return SchemeRun("unknown", result.reason)
    if isinstance(result, Unsatisfiable):
        return SchemeRun("unsatisfiable", str(result))
    return SchemeRun("terminated", candidates=len(result))


def optimize_bgp(q, sigma: Sequence[Constraint], budget: Optional[int] = None,
                 scheme: str = "auto") -> SqoReport:
    """Minimal Σ-equivalent And-only rewrites of q via Chase & Backchase."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    q = as_bgp_query(q)
    sigma = list(sigma)
    report = SqoReport(query=q, result=q)
    cq1 = c1_translate(q)
    cq2 = c2_translate(q)
    prime = sigma_prime(sigma)
    c2_usable = not isinstance(cq2, Undefined) and len(prime) == len(sigma)
    found: list[Query] = []

    if scheme in ("c1", "auto"):
        res = cb(cq1, sigma, budget)
        run = report.schemes["c1"] = _run(res, "c1")
        if isinstance(res, BackchaseResult):
            report.complete = not isinstance(c1_inverse(res.plan), Undefined)
            for r in res:
                back = c1_inverse(r)
                if isinstance(back, Undefined):
                    run.dropped += 1
                else:
                    found.append(back)
    run_c2 = scheme == "c2" or (scheme == "auto" and c2_usable and report.schemes["c1"].status == "unknown")
    if run_c2:
        if isinstance(cq2, Undefined):
            report.schemes["c2"] = SchemeRun("not applicable", cq2.reason)
        elif len(prime) != len(sigma):
            report.schemes["c2"] = SchemeRun("not applicable", "some constraint has no binary image")
        else:
            res = cb(cq2, prime, budget)
            run = report.schemes["c2"] = _run(res, "c2")
            if isinstance(res, BackchaseResult):
                for r in res:
                    back = c2_inverse(r)
                    if isinstance(back, Undefined) or not equivalent(c1_translate(back), cq1, sigma, budget):
                        run.dropped += 1
                    else:
                        found.append(back)
    if scheme == "auto":
        cert = certify(sigma)
        if cert is None and c2_usable:
            cert = certify(prime)
            cert = cert and f"binary image of the constraints is {cert}"
        report.termination = cert
    report.rewrites = _minimal_distinct(found, cq1, sigma, budget)
    return report


def _minimal_distinct(found: list[Query], reference: CQ, sigma, budget) -> list[Query]:
    out: list[tuple[CQ, Query]] = []
    for q in found:
        cq = c1_translate(q)
        if any(isomorphic(cq, seen) for seen, _ in out):
            continue
        if equivalent(cq, reference, sigma, budget).holds:
            out.append((cq, q))
    if not out:
        return []
    smallest = min(len(cq.body) for cq, _ in out)
    return [q for cq, q in out if len(cq.body) == smallest]


def optimize(q, sigma: Sequence[Constraint], budget: Optional[int] = None, scheme: str = "auto",
             verify_docs: int = 0, seed: int = 0) -> SqoReport:
    """Opt/Filter rewrites to a fixpoint, then C&B when the result is And-only."""
    rewritten, steps = apply_semantic_rewrites(q, sigma, budget)
    body = rewritten.body if isinstance(rewritten, Query) else rewritten
    if is_and_only(body):
        report = optimize_bgp(rewritten, sigma, budget, scheme)
        report.query = q
    else:
        report = SqoReport(query=q)
    report.steps, report.result = steps, rewritten
    if verify_docs:
        docs = model_documents(sigma, random.Random(seed), verify_docs)
        targets = [s.result for s in steps] + list(report.rewrites)
        for t in targets:
            report.verification[str(t)] = (len(docs), len(counterexamples(q, t, docs)))
    return report


# ------------------------------------------------------------- Σ-model documents

def _vocabulary(sigma) -> tuple[list, list]:
    iris = {Iri(c) for c in "abcd"}
    literals = set()
    for c in sigma:
        for a in c.body + c.head:
            for t in a.args:
                if isinstance(t, Iri):
                    iris.add(t)
                elif isinstance(t, Literal):
                    literals.add(t)
    key = lambda t: t.value
    return sorted(iris, key=key), sorted(literals, key=key)


def model_documents(sigma: Sequence[Constraint], rng: random.Random, count: int, max_triples: int = 6,
                    budget: int = 2000, attempts: Optional[int] = None) -> list[Document]:
    """Random documents satisfying Σ: chase random seeds, name the nulls, drop invalid results."""
    for c in sigma:
        for a in c.body + c.head:
            if a.relation != TRIPLE or a.arity != 3:
                raise FragmentError(f"document generation needs ternary {TRIPLE}-constraints, got {a}")
    iris, literals = _vocabulary(sigma)
    docs: list[Document] = []
    for _ in range(attempts or 20 * count):
        if len(docs) >= count:
            break
        seed = [Atom(TRIPLE, (rng.choice(iris), rng.choice(iris), rng.choice(iris + literals)))
                for _ in range(rng.randint(0, max_triples))]
        out = chase(seed, sigma, budget=budget)
        if not isinstance(out, Terminated):
            continue
        name = lambda t: Iri(f"null{t.id}") if isinstance(t, Null) else t
        try:
            docs.append(Document(Triple(*map(name, a.args)) for a in out.instance))
        except DocumentError:
            continue
    return docs


def counterexamples(before, after, docs: Sequence[Document]) -> list[Document]:
    return [d for d in docs if evaluate(before, d) != evaluate(after, d)]
