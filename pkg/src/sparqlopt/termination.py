"""Sufficient conditions for chase termination.

Position graphs give weak acyclicity and safety.  The ``fires`` relation and
its null-restricted variant give the chase graph (stratification, safe
stratification) and restriction systems (safe restriction).

``fires`` is decided on a finite set of candidate instances.  For a TGD
``alpha`` a candidate unifies a nonempty part of the body of ``beta`` with
head atoms of ``alpha`` and keeps every other value distinct.  For an EGD
``alpha`` each variable of ``beta`` either takes the surviving value of the
merge or a value of its own, and each occurrence of the surviving value is
traced back to one of the two merged values.  Any witness instance is a
homomorphic image of one of these candidates, so the search is complete;
every candidate is checked against the definition directly.
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import networkx as nx

from .cq import (
    EGD, TGD, Atom, Constraint, FactIndex, Null, Position, atom_positions, atom_vars,
    body_positions, find_homomorphism, value_key,
)
from .rdf import Blank, Var, is_constant
from .syntax import sort_vars


def _tgds(sigma: Iterable[Constraint]) -> list[TGD]:
    return [c for c in sigma if isinstance(c, TGD)]


def _occurrences(atoms: Iterable[Atom], v) -> list[Position]:
    return [p for a in atoms for p, t in a.positions() if t == v]


# ------------------------------------------------------------ position graphs

@dataclass(frozen=True)
class PositionGraph:
    vertices: frozenset
    edges: frozenset
    special: frozenset

    def graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.vertices)
        g.add_edges_from(self.edges)
        return g

    def special_cycle(self) -> Optional[list[Position]]:
        """A cycle through a special edge as a closed vertex list, or None."""
        g = self.graph()
        for u, v in sorted(self.special, key=lambda e: (e[0].sort_key(), e[1].sort_key())):
            if u == v:
                return [u, u]
            if nx.has_path(g, v, u):
                return [u] + nx.shortest_path(g, v, u)
        return None

    def is_subgraph_of(self, other: "PositionGraph") -> bool:
        return (self.vertices <= other.vertices and self.edges <= other.edges
                and self.special <= other.special)

    def format(self) -> str:
        lines = []
        for u, v in sorted(self.edges, key=lambda e: (e[0].sort_key(), e[1].sort_key())):
            lines.append(f"{u} {'*->' if (u, v) in self.special else '->'} {v}")
        return "\n".join(lines)


def _position_graph(sigma, vertices, allowed) -> PositionGraph:
    edges, special = set(), set()
    for c in _tgds(sigma):
        for x in sorted(c.frontier, key=str):
            if not allowed(c, x):
                continue
            for p1 in _occurrences(c.body, x):
                for p2 in _occurrences(c.head, x):
                    edges.add((p1, p2))
                for y in c.existentials:
                    for p2 in _occurrences(c.head, y):
                        edges.add((p1, p2))
                        special.add((p1, p2))
    return PositionGraph(frozenset(vertices), frozenset(edges), frozenset(special))


def dependency_graph(sigma: Sequence[Constraint]) -> PositionGraph:
    vertices = {p for c in _tgds(sigma) for p in atom_positions(c.body) | atom_positions(c.head)}
    return _position_graph(sigma, vertices, lambda c, x: True)


def is_weakly_acyclic(sigma: Sequence[Constraint]) -> bool:
    return dependency_graph(sigma).special_cycle() is None


def affected_positions(sigma: Sequence[Constraint]) -> frozenset:
    """Least set closed under the existential and propagation rules."""
    aff: set[Position] = set()
    for c in _tgds(sigma):
        for y in c.existentials:
            aff.update(_occurrences(c.head, y))
    changed = True
    while changed:
        changed = False
        for c in _tgds(sigma):
            for x in c.frontier:
                if set(_occurrences(c.body, x)) <= aff:
                    new = set(_occurrences(c.head, x)) - aff
                    if new:
                        aff |= new
                        changed = True
    return frozenset(aff)


def propagation_graph(sigma: Sequence[Constraint]) -> PositionGraph:
    aff = affected_positions(sigma)
    return _position_graph(sigma, aff, lambda c, x: set(_occurrences(c.body, x)) <= aff)


def is_safe(sigma: Sequence[Constraint]) -> bool:
    return propagation_graph(sigma).special_cycle() is None


# ------------------------------------------------------------ fires relations

@dataclass
class Firing:
    """A witness for a fires relation: ``I --alpha,a--> J`` and a trigger ``b`` of beta."""

    instance: frozenset
    result: frozenset
    a: dict
    b: dict

    def __str__(self) -> str:
        fmt = lambda s: "{" + ", ".join(sorted(map(str, s))) + "}"
        return f"I = {fmt(self.instance)}, J = {fmt(self.result)}"


def _applicable(index: FactIndex, facts: frozenset, c: Constraint, h: dict) -> bool:
    if any(a.map(h) not in facts for a in c.body):
        return False
    if isinstance(c, EGD):
        return h[c.left] != h[c.right]
    return find_homomorphism(c.head, index, {v: h[v] for v in c.frontier}) is None


def _rename(c: Constraint, tag: str) -> Constraint:
    m = {v: Var(f"{tag}{v.name}") for v in atom_vars(c.body + c.head)}
    body = [a.map(m) for a in c.body]
    if isinstance(c, EGD):
        return EGD(body, m[c.left], m[c.right])
    return TGD(body, [a.map(m) for a in c.head], [m[y] for y in c.existentials])


class _UnionFind:
    def __init__(self):
        self.parent: dict = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b) -> None:
        self.parent[self.find(a)] = self.find(b)

    def classes(self, items) -> dict:
        out: dict = {}
        for x in items:
            out.setdefault(self.find(x), []).append(x)
        return out


class _Token:
    """A placeholder value of a candidate instance, typed once positions are known."""

    __slots__ = ("n",)
    counter = itertools.count()

    def __init__(self):
        self.n = next(_Token.counter)

    def __repr__(self) -> str:
        return f"t{self.n}"


def _concretize(facts: list[Atom], tokens: set, allowed: Optional[frozenset]) -> dict:
    """Type each token: a null unless it occurs outside ``allowed`` positions."""
    where: dict = {t: set() for t in tokens}
    for a in facts:
        for p, v in a.positions():
            if v in where:
                where[v].add(p)
    out = {}
    for i, t in enumerate(sorted(tokens, key=lambda t: t.n)):
        if allowed is None or where[t] <= allowed:
            out[t] = Null(1000 + i)
        else:
            out[t] = Blank(f"~{i}")
    return out


def _check(alpha, beta, inst, result, a, b, copies) -> Optional[Firing]:
    i_facts, j_facts = frozenset(inst), frozenset(result)
    i_index, j_index = FactIndex(i_facts), FactIndex(j_facts)
    if not _applicable(i_index, i_facts, alpha, a):
        return None
    if _applicable(i_index, i_facts, beta, b):
        return None
    if not _applicable(j_index, j_facts, beta, b):
        return None
    if copies:
        if isinstance(beta, EGD):
            carried = [b[beta.left], b[beta.right]]
        else:
            carried = [b[x] for x in beta.frontier]
        if not any(isinstance(v, Null) for v in carried):
            return None
    return Firing(i_facts, j_facts, a, b)


def _tgd_candidates(alpha: TGD, beta: Constraint, allowed):
    for k in range(1, len(beta.body) + 1):
        for chosen in itertools.combinations(range(len(beta.body)), k):
            for heads in itertools.product(range(len(alpha.head)), repeat=k):
                yield from _tgd_candidate(alpha, beta, allowed, chosen, heads)


def _tgd_candidate(alpha: TGD, beta: Constraint, allowed, chosen, heads):
    uf = _UnionFind()
    for bi, hi in zip(chosen, heads):
        b_atom, h_atom = beta.body[bi], alpha.head[hi]
        if (b_atom.relation, b_atom.arity) != (h_atom.relation, h_atom.arity):
            return
        for s, t in zip(b_atom.args, h_atom.args):
            uf.union(s, t)
    terms = atom_vars(alpha.body + alpha.head) | atom_vars(beta.body)
    terms |= {t for a in alpha.body + alpha.head + beta.body for t in a.args if is_constant(t)}
    value: dict = {}
    for members in uf.classes(terms).values():
        consts = {t for t in members if is_constant(t)}
        exist = {t for t in members if t in alpha.existentials}
        universal = {t for t in members if t in alpha.universals}
        if len(consts) > 1 or (exist and (consts or universal or len(exist) > 1)):
            return
        v = next(iter(consts)) if consts else ("ex", next(iter(exist))) if exist else _Token()
        for t in members:
            value[t] = v
    old = [beta.body[i] for i in range(len(beta.body)) if i not in chosen]
    if any(isinstance(value.get(t), tuple) for a in old for t in a.args):
        return
    tokens = {v for v in value.values() if isinstance(v, _Token)}
    sub = lambda atoms: [Atom(a.relation, (value.get(t, t) for t in a.args)) for a in atoms]
    raw = sub(alpha.body) + sub(old)
    typed = _concretize(raw, tokens, allowed)
    fresh = {}
    for v in value.values():
        if isinstance(v, tuple) and v not in fresh:
            fresh[v] = Null(2000 + len(fresh))
    final = lambda t: typed.get(value.get(t, t), fresh.get(value.get(t, t), value.get(t, t)))
    inst = [Atom(a.relation, (final(t) for t in a.args)) for a in list(alpha.body) + old]
    result = inst + [Atom(a.relation, (final(t) for t in a.args)) for a in alpha.head]
    a = {v: final(v) for v in alpha.universals}
    b = {v: final(v) for v in beta.universals}
    yield inst, result, a, b


def _egd_candidates(alpha: EGD, beta: Constraint, allowed):
    beta_vars = sort_vars(beta.universals)
    consts = sorted({t for a in alpha.body + beta.body for t in a.args if is_constant(t)}, key=value_key)
    for y_var, a_var in ((alpha.right, alpha.left), (alpha.left, alpha.right)):
        # the surviving value is a fresh token or a constant of the two bodies
        for target in [None] + consts:
            alpha_val = {v: _Token() for v in sort_vars(alpha.universals)}
            if target is not None:
                alpha_val[a_var] = target
            y, keep = alpha_val[y_var], alpha_val[a_var]
            yield from _egd_merges(alpha, beta, beta_vars, alpha_val, y, keep, allowed)


def _egd_merges(alpha, beta, beta_vars, alpha_val, y, keep, allowed):
    for merged in itertools.product((False, True), repeat=len(beta_vars)):
        own = {v: (keep if m else _Token()) for v, m in zip(beta_vars, merged)}
        slots = [(i, j) for i, atom in enumerate(beta.body) for j, t in enumerate(atom.args)
                 if (own[t] is keep if isinstance(t, Var) else t == keep)]
        for origin in itertools.product((False, True), repeat=len(slots)):
            from_y = {s for s, o in zip(slots, origin) if o}
            pre = []
            for i, atom in enumerate(beta.body):
                args = []
                for j, t in enumerate(atom.args):
                    v = own.get(t, t) if isinstance(t, Var) else t
                    args.append(y if (i, j) in from_y else v)
                pre.append(Atom(atom.relation, args))
            raw = [a.map(alpha_val) for a in alpha.body] + pre
            tokens = {v for v in list(alpha_val.values()) + list(own.values()) if isinstance(v, _Token)}
            typed = _concretize(raw, tokens, allowed)
            if not isinstance(typed[y], Null):
                continue
            inst = [Atom(a.relation, (typed.get(t, t) for t in a.args)) for a in raw]
            survivor = typed.get(keep, keep)
            result = [a.map({typed[y]: survivor}) for a in inst]
            a = {v: typed.get(t, t) for v, t in alpha_val.items()}
            b = {v: typed.get(t, t) for v, t in own.items()}
            yield inst, result, a, b


def _search(alpha: Constraint, beta: Constraint, allowed: Optional[frozenset]) -> Optional[Firing]:
    alpha, beta = _rename(alpha, "a_"), _rename(beta, "b_")
    gen = _tgd_candidates if isinstance(alpha, TGD) else _egd_candidates
    for inst, result, a, b in gen(alpha, beta, allowed):
        w = _check(alpha, beta, inst, result, a, b, copies=allowed is not None)
        if w is not None:
            return w
    return None


def fires_witness(alpha: Constraint, beta: Constraint) -> Optional[Firing]:
    return _search(alpha, beta, None)


def fires(alpha: Constraint, beta: Constraint) -> bool:
    """alpha ≺ beta: some firing of alpha turns a satisfied trigger of beta into an active one."""
    return fires_witness(alpha, beta) is not None


def fires_restricted_witness(alpha: Constraint, beta: Constraint, positions: Iterable[Position]) -> Optional[Firing]:
    return _search(alpha, beta, frozenset(positions))


def fires_restricted(alpha: Constraint, beta: Constraint, positions: Iterable[Position]) -> bool:
    """alpha ≺_P beta: as ``fires`` with nulls of I confined to P and beta copying a null."""
    return fires_restricted_witness(alpha, beta, positions) is not None


# ------------------------------------------------------------- chase graphs

def chase_graph(sigma: Sequence[Constraint]) -> nx.DiGraph:
    g = nx.DiGraph()
    g.add_nodes_from(range(len(sigma)))
    for i, a in enumerate(sigma):
        for j, b in enumerate(sigma):
            if fires(a, b):
                g.add_edge(i, j)
    return g


def cyclic_components(g: nx.DiGraph) -> list[list[int]]:
    """Strongly connected components that contain a cycle, self-loops included."""
    out = []
    for comp in nx.strongly_connected_components(g):
        comp = sorted(comp)
        if len(comp) > 1 or g.has_edge(comp[0], comp[0]):
            out.append(comp)
    return sorted(out)


def _first_bad(g, sigma, test) -> Optional[list[int]]:
    for comp in cyclic_components(g):
        if not test([sigma[i] for i in comp]):
            return comp
    return None


def is_stratified(sigma: Sequence[Constraint]) -> bool:
    return _first_bad(chase_graph(sigma), sigma, is_weakly_acyclic) is None


def is_safely_stratified(sigma: Sequence[Constraint]) -> bool:
    return _first_bad(chase_graph(sigma), sigma, is_safe) is None


def aff_cl(alpha: TGD, positions: Iterable[Position]) -> frozenset:
    """Head positions holding an existential or a variable confined to P in the body."""
    positions = frozenset(positions)
    out = set()
    for atom in alpha.head:
        for p, t in atom.positions():
            if t in alpha.existentials:
                out.add(p)
            elif isinstance(t, Var) and set(_occurrences(alpha.body, t)) <= positions:
                out.add(p)
    return frozenset(out)


@dataclass
class RestrictionSystem:
    edges: set
    f: list

    def graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(range(len(self.f)))
        g.add_edges_from(self.edges)
        return g

    def format(self, sigma=None) -> str:
        lines = [f"E = {{{', '.join(f'(c{i + 1}, c{j + 1})' for i, j in sorted(self.edges))}}}"]
        for i, ps in enumerate(self.f):
            lines.append(f"f(c{i + 1}) = {{{', '.join(str(p) for p in sorted(ps, key=Position.sort_key))}}}")
        return "\n".join(lines)


def restriction_violations(sigma: Sequence[Constraint], rs: RestrictionSystem) -> list[str]:
    """Closure conditions that ``rs`` fails, as readable strings."""
    bad = []
    for i, j in sorted(rs.edges):
        alpha, pos_b = sigma[i], body_positions([sigma[j]])
        need = aff_cl(alpha, rs.f[i]) if isinstance(alpha, TGD) else rs.f[i]
        if not (need & pos_b) <= rs.f[j]:
            bad.append(f"edge (c{i + 1}, c{j + 1}) does not propagate positions")
    for i, a in enumerate(sigma):
        for j, b in enumerate(sigma):
            if (i, j) not in rs.edges and fires_restricted(a, b, rs.f[i]):
                bad.append(f"c{i + 1} fires c{j + 1} under f(c{i + 1}) but the edge is missing")
    return bad


def minimal_restriction_system(sigma: Sequence[Constraint], rng: Optional[random.Random] = None) -> RestrictionSystem:
    """Least fixpoint from (no edges, f = empty) under the three closure rules.

    ``rng`` randomizes the order in which rules are applied.
    """
    n = len(sigma)
    edges: set = set()
    f = [frozenset() for _ in range(n)]
    body_pos = [body_positions([c]) for c in sigma]
    cache: dict = {}

    def fires_p(i, j):
        key = (i, j, f[i])
        if key not in cache:
            cache[key] = fires_restricted(sigma[i], sigma[j], f[i])
        return cache[key]

    pairs = [(i, j) for i in range(n) for j in range(n)]
    changed = True
    while changed:
        changed = False
        if rng is not None:
            rng.shuffle(pairs)
        for i, j in pairs:
            if (i, j) not in edges and fires_p(i, j):
                edges.add((i, j))
                changed = True
            if (i, j) in edges:
                alpha = sigma[i]
                need = (aff_cl(alpha, f[i]) if isinstance(alpha, TGD) else f[i]) & body_pos[j]
                if not need <= f[j]:
                    f[j] = f[j] | need
                    changed = True
    return RestrictionSystem(edges, f)


def is_safely_restricted(sigma: Sequence[Constraint]) -> bool:
    rs = minimal_restriction_system(sigma)
    return _first_bad(rs.graph(), sigma, is_safe) is None


def safely_restricted_via_stratification(sigma: Sequence[Constraint]) -> bool:
    """The same verdict computed with safely stratified components instead of safe ones."""
    rs = minimal_restriction_system(sigma)
    return _first_bad(rs.graph(), sigma, is_safely_stratified) is None


# -------------------------------------------------------------------- report

CONDITIONS = ("safe", "weakly-acyclic", "stratified", "safely-stratified", "safely-restricted")


@dataclass
class TerminationReport:
    weakly_acyclic: Optional[bool] = None
    safe: Optional[bool] = None
    stratified: Optional[bool] = None
    safely_stratified: Optional[bool] = None
    safely_restricted: Optional[bool] = None
    dependency_cycle: Optional[list] = None
    propagation_cycle: Optional[list] = None
    unstratified_component: Optional[list] = None
    unsafe_component: Optional[list] = None
    unsafe_restricted_component: Optional[list] = None
    restriction_system: Optional[RestrictionSystem] = None
    chase_graph_edges: list = field(default_factory=list)

    def verdict(self, name: str) -> Optional[bool]:
        """True/False for a condition that was checked, None otherwise."""
        return getattr(self, name.replace("-", "_"))

    def implications_hold(self) -> bool:
        """The inclusions between conditions hold among the checked verdicts."""
        wa, sf, st, ss, sr = (self.weakly_acyclic, self.safe, self.stratified,
                              self.safely_stratified, self.safely_restricted)
        rules = [(wa, sf), (wa, ss), (sf, ss), (ss, sr), (st, sr), (wa, st)]
        return all(not (p is True and q is False) for p, q in rules)

    @property
    def label(self) -> str:
        if self.weakly_acyclic:
            return "weakly acyclic"
        tight = [name for name, ok, covered in (
            ("safe", self.safe, False),
            ("stratified", self.stratified, False),
            ("safely stratified", self.safely_stratified, self.safe or self.stratified),
            ("safely restricted", self.safely_restricted, self.safe or self.stratified or self.safely_stratified),
        ) if ok and not covered]
        if tight:
            return " and ".join(tight)
        if any(self.verdict(c) is None for c in CONDITIONS):
            return "no termination guarantee among the checked conditions"
        return "no termination guarantee"

    def summary(self) -> str:
        yn = lambda b: "not checked" if b is None else "yes" if b else "no"
        return ", ".join(f"{c}: {yn(self.verdict(c))}" for c in CONDITIONS)

    def details(self) -> list[str]:
        out = []
        cycle = lambda ps: " -> ".join(map(str, ps))
        comp = lambda cs: "{" + ", ".join(f"c{i + 1}" for i in cs) + "}"
        if self.dependency_cycle:
            out.append(f"dependency graph cycle through a special edge: {cycle(self.dependency_cycle)}")
        if self.propagation_cycle:
            out.append(f"propagation graph cycle through a special edge: {cycle(self.propagation_cycle)}")
        if self.chase_graph_edges:
            out.append("chase graph: " + ", ".join(f"c{i + 1} -> c{j + 1}" for i, j in self.chase_graph_edges))
        if self.unstratified_component:
            out.append(f"chase graph component that is not weakly acyclic: {comp(self.unstratified_component)}")
        if self.unsafe_component:
            out.append(f"chase graph component that is not safe: {comp(self.unsafe_component)}")
        if self.restriction_system is not None:
            out.append("minimal restriction system:")
            out.extend("  " + line for line in self.restriction_system.format().splitlines())
        if self.unsafe_restricted_component:
            out.append(f"restriction system component that is not safe: {comp(self.unsafe_restricted_component)}")
        out.append(f"classification: {self.label}")
        return out

    def as_dict(self) -> dict:
        d = {c: self.verdict(c) for c in CONDITIONS if self.verdict(c) is not None}
        d["classification"] = self.label
        d["dependency_cycle"] = [str(p) for p in self.dependency_cycle or []]
        d["propagation_cycle"] = [str(p) for p in self.propagation_cycle or []]
        d["chase_graph"] = [[i + 1, j + 1] for i, j in self.chase_graph_edges]
        if self.restriction_system is not None:
            rs = self.restriction_system
            d["restriction_system"] = {
                "edges": [[i + 1, j + 1] for i, j in sorted(rs.edges)],
                "f": [sorted(str(p) for p in ps) for ps in rs.f],
            }
        return d


def analyze(sigma: Sequence[Constraint], checks: Optional[Iterable[str]] = None) -> TerminationReport:
    """Run the termination checks (all by default) and collect witnesses."""
    wanted = set(checks or CONDITIONS)
    unknown = wanted - set(CONDITIONS)
    if unknown:
        raise ValueError(f"unknown condition {sorted(unknown)[0]!r}; expected one of {', '.join(CONDITIONS)}")
    sigma = list(sigma)
    report = TerminationReport()
    if "weakly-acyclic" in wanted:
        report.dependency_cycle = dependency_graph(sigma).special_cycle()
        report.weakly_acyclic = report.dependency_cycle is None
    if "safe" in wanted:
        report.propagation_cycle = propagation_graph(sigma).special_cycle()
        report.safe = report.propagation_cycle is None
    if wanted & {"stratified", "safely-stratified"}:
        g = chase_graph(sigma)
        report.chase_graph_edges = sorted(g.edges)
        if "stratified" in wanted:
            report.unstratified_component = _first_bad(g, sigma, is_weakly_acyclic)
            report.stratified = report.unstratified_component is None
        if "safely-stratified" in wanted:
            report.unsafe_component = _first_bad(g, sigma, is_safe)
            report.safely_stratified = report.unsafe_component is None
    if "safely-restricted" in wanted:
        rs = minimal_restriction_system(sigma)
        report.restriction_system = rs
        report.unsafe_restricted_component = _first_bad(rs.graph(), sigma, is_safe)
        report.safely_restricted = report.unsafe_restricted_component is None
    return report
