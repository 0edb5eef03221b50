"""Conjunctive queries, TGD/EGD constraints, homomorphisms and the SPARQL bridge.

CQ variables reuse :class:`sparqlopt.rdf.Var`; constants are RDF terms.
Labelled nulls (:class:`Null`) only appear in chase instances.
"""
from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

from .rdf import Blank, Iri, Literal, Var, is_constant, term_key
from .syntax import Pattern, Query, QuerySyntaxError, conjunction, is_and_only, patterns_of, sort_vars, variables

TRIPLE = "T"


class ConstraintSyntaxError(ValueError):
    """Raised on malformed constraint or CQ text."""


class FragmentError(ValueError):
    """Raised when a query is outside the fragment a translation accepts."""


@dataclass(frozen=True, order=True)
class Null:
    id: int

    def __str__(self) -> str:
        return f"_n{self.id}"

    __repr__ = __str__


def value_key(v) -> tuple:
    if isinstance(v, Null):
        return (5, "", v.id)
    return term_key(v) + (0,)


def is_mappable(v) -> bool:
    return isinstance(v, (Var, Null))


@dataclass(frozen=True)
class Position:
    relation: str
    index: int

    def __str__(self) -> str:
        return f"{self.relation}^{self.index}"

    def sort_key(self) -> tuple:
        return (self.relation, self.index)


_WORD = re.compile(r"[A-Za-z0-9_:/#]+")


def render_term(t) -> str:
    if isinstance(t, Iri) and not _WORD.fullmatch(t.value):
        return f"<{t.value}>"
    return str(t)


@dataclass(frozen=True)
class Atom:
    relation: str
    args: tuple

    def __init__(self, relation: str, args: Iterable):
        object.__setattr__(self, "relation", relation)
        object.__setattr__(self, "args", tuple(args))

    @property
    def arity(self) -> int:
        return len(self.args)

    def positions(self) -> list[tuple[Position, object]]:
        return [(Position(self.relation, i + 1), a) for i, a in enumerate(self.args)]

    def map(self, h) -> "Atom":
        return Atom(self.relation, (h.get(a, a) for a in self.args))

    def sort_key(self) -> tuple:
        return (self.relation, tuple(value_key(a) for a in self.args))

    def __str__(self) -> str:
        return f"{self.relation}({', '.join(render_term(a) for a in self.args)})"

    __repr__ = __str__


def atom_vars(atoms: Iterable[Atom]) -> frozenset:
    return frozenset(a for atom in atoms for a in atom.args if isinstance(a, Var))


def atom_positions(atoms: Iterable[Atom]) -> frozenset:
    return frozenset(p for atom in atoms for p, _ in atom.positions())


# ------------------------------------------------------------------ queries

@dataclass(frozen=True)
class CQ:
    """``ans(head) <- body``; head entries are variables or constants."""

    head: tuple
    body: tuple

    def __init__(self, head: Iterable, body: Iterable[Atom]):
        head, body = tuple(head), tuple(body)
        missing = [v for v in head if isinstance(v, Var) and v not in atom_vars(body)]
        if missing:
            raise ValueError(f"head variable {missing[0]} does not occur in the body")
        object.__setattr__(self, "head", head)
        object.__setattr__(self, "body", body)

    @property
    def vars(self) -> frozenset:
        return atom_vars(self.body)

    def __str__(self) -> str:
        head = ", ".join(render_term(v) for v in self.head)
        return f"ans({head}) <- {', '.join(map(str, self.body))}"

    __repr__ = __str__


# -------------------------------------------------------------- constraints

@dataclass(frozen=True)
class TGD:
    body: tuple
    head: tuple
    existentials: frozenset = frozenset()

    def __init__(self, body: Iterable[Atom], head: Iterable[Atom], existentials: Iterable[Var] = ()):
        body, head, ex = tuple(body), tuple(head), frozenset(existentials)
        if not head:
            raise ValueError("TGD head must not be empty")
        bvars, hvars = atom_vars(body), atom_vars(head)
        if ex & bvars:
            raise ValueError(f"existential variable {min(ex & bvars)} occurs in the body")
        if ex - hvars:
            raise ValueError(f"existential variable {min(ex - hvars)} does not occur in the head")
        if hvars - bvars - ex:
            raise ValueError(f"head variable {min(hvars - bvars - ex)} is neither in the body nor existential")
        object.__setattr__(self, "body", body)
        object.__setattr__(self, "head", head)
        object.__setattr__(self, "existentials", ex)

    @property
    def universals(self) -> frozenset:
        return atom_vars(self.body)

    @property
    def frontier(self) -> frozenset:
        return atom_vars(self.body) & atom_vars(self.head)

    def __str__(self) -> str:
        ex = f"exists {', '.join(map(str, sort_vars(self.existentials)))} . " if self.existentials else ""
        return f"{', '.join(map(str, self.body))} -> {ex}{', '.join(map(str, self.head))}"

    __repr__ = __str__


@dataclass(frozen=True)
class EGD:
    body: tuple
    left: Var
    right: Var

    def __init__(self, body: Iterable[Atom], left: Var, right: Var):
        body = tuple(body)
        if not body:
            raise ValueError("EGD body must not be empty")
        for v in (left, right):
            if v not in atom_vars(body):
                raise ValueError(f"equated variable {v} does not occur in the body")
        object.__setattr__(self, "body", body)
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)

    @property
    def universals(self) -> frozenset:
        return atom_vars(self.body)

    head = ()
    existentials = frozenset()

    def __str__(self) -> str:
        return f"{', '.join(map(str, self.body))} -> {self.left} = {self.right}"

    __repr__ = __str__


Constraint = TGD | EGD


def body_positions(sigma: Iterable[Constraint]) -> frozenset:
    """Positions occurring in some constraint body."""
    return frozenset(p for c in sigma for p in atom_positions(c.body))


def all_positions(sigma: Iterable[Constraint]) -> frozenset:
    return frozenset(p for c in sigma for p in atom_positions(c.body) | atom_positions(c.head))


def check_schema(atoms: Iterable[Atom]) -> dict[str, int]:
    arity: dict[str, int] = {}
    for a in atoms:
        if arity.setdefault(a.relation, a.arity) != a.arity:
            raise ValueError(f"relation {a.relation} used with arities {arity[a.relation]} and {a.arity}")
    return arity


# ------------------------------------------------------------------- parsing

_LEX = re.compile(
    r"""\s*(?:
        (?P<arrow>->|→|<-|:-|←)
      | (?P<iri><[^<>\s-][^<>\s]*>)
      | (?P<punct>[(),.;=∃])
      | (?P<dq>"(?:[^"\\]|\\.)*")
      | (?P<sq>'(?:[^'\\]|\\.)*')
      | (?P<var>\?[A-Za-z0-9_]+)
      | (?P<blank>_:[A-Za-z0-9_]+)
      | (?P<word>[A-Za-z0-9_:/#]+)
    )""",
    re.VERBOSE,
)


def _lex(text: str) -> list[tuple[str, str]]:
    out, pos = [], 0
    text = text.rstrip()
    while pos < len(text):
        m = _LEX.match(text, pos)
        if not m or m.end() == pos:
            raise ConstraintSyntaxError(f"unexpected input at {text[pos:pos + 12]!r}")
        kind = m.lastgroup
        out.append((kind, m.group(kind)))
        pos = m.end()
    return out


class _Reader:
    def __init__(self, tokens, constants: frozenset):
        self.toks, self.i = tokens, 0
        self.constants = constants
        self.sparql_style = any(k == "var" for k, _ in tokens)

    def peek(self, ahead: int = 0):
        j = self.i + ahead
        return self.toks[j] if j < len(self.toks) else (None, None)

    def next(self):
        tok = self.peek()
        if tok[0] is None:
            raise ConstraintSyntaxError("unexpected end of input")
        self.i += 1
        return tok

    def accept(self, value: str) -> bool:
        if self.peek()[1] == value:
            self.i += 1
            return True
        return False

    def expect(self, value: str):
        kind, text = self.next()
        if text != value:
            raise ConstraintSyntaxError(f"expected {value!r}, found {text!r}")

    def at_end(self) -> bool:
        return self.i >= len(self.toks)

    def term(self):
        kind, text = self.next()
        if kind in ("dq", "sq"):
            return Literal(re.sub(r"\\(.)", r"\1", text[1:-1]))
        if kind == "var":
            return Var(text[1:])
        if kind == "blank":
            return Blank(text[2:])
        if kind == "iri":
            return Iri(text[1:-1])
        if kind == "word":
            if text in self.constants or text[0].isdigit() or self.sparql_style:
                return Iri(text)
            return Var(text)
        raise ConstraintSyntaxError(f"expected a term, found {text!r}")

    def atom(self) -> Atom:
        kind, name = self.next()
        if kind != "word" and kind != "iri":
            raise ConstraintSyntaxError(f"expected a relation name, found {name!r}")
        self.expect("(")
        args = []
        if not self.accept(")"):
            args.append(self.term())
            while self.accept(","):
                args.append(self.term())
            self.expect(")")
        return Atom(name.strip("<>"), args)

    def atoms(self, stop: set) -> list[Atom]:
        out = []
        if self.at_end() or self.peek()[1] in stop:
            return out
        out.append(self.atom())
        while self.accept(","):
            out.append(self.atom())
        return out


def _statements(text: str) -> tuple[list[tuple[int, list]], frozenset]:
    """Split text into lexed statements and collect ``const`` declarations."""
    constants: set[str] = set()
    statements = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = re.sub(r"(^|\s)#.*$", "", raw).strip()
        if not line:
            continue
        try:
            toks = _lex(line)
        except ConstraintSyntaxError as e:
            raise ConstraintSyntaxError(f"line {lineno}: {e}") from None
        while toks and toks[0] == ("word", "const"):
            end = next((i for i, t in enumerate(toks) if t[1] == ";"), None)
            if end is None:
                raise ConstraintSyntaxError(f"line {lineno}: const declaration must end with ';'")
            names = [t[1] for t in toks[1:end] if t[1] != ","]
            if any(k != "word" for k, v in toks[1:end] if v != ","):
                raise ConstraintSyntaxError(f"line {lineno}: const declaration lists bare names only")
            constants.update(names)
            toks = toks[end + 1:]
        if toks:
            statements.append((lineno, toks))
    return statements, frozenset(constants)


def _parse_constraint(r: _Reader) -> Constraint:
    body = r.atoms({"->", "→"})
    kind, arrow = r.next()
    if arrow not in ("->", "→"):
        raise ConstraintSyntaxError(f"expected '->', found {arrow!r}")
    if r.peek(1)[1] == "=":
        left, r.i = r.term(), r.i + 1
        right = r.term()
        if not isinstance(left, Var) or not isinstance(right, Var):
            raise ConstraintSyntaxError("EGD heads equate two variables")
        result = EGD(body, left, right)
    else:
        existentials = []
        if r.accept("exists") or r.accept("∃"):
            existentials.append(r.term())
            while r.accept(","):
                existentials.append(r.term())
            r.expect(".")
            if not all(isinstance(v, Var) for v in existentials):
                raise ConstraintSyntaxError("exists lists variables only")
        result = TGD(body, r.atoms(set()), existentials)
    if not r.at_end():
        raise ConstraintSyntaxError(f"trailing input {r.peek()[1]!r}")
    return result


def parse_constraints(text: str) -> list[Constraint]:
    """Parse one constraint per line; ``const a, b;`` declares constants."""
    statements, constants = _statements(text)
    out = []
    for lineno, toks in statements:
        try:
            out.append(_parse_constraint(_Reader(toks, constants)))
        except (ConstraintSyntaxError, ValueError) as e:
            raise ConstraintSyntaxError(f"line {lineno}: {e}") from None
    try:
        check_schema(a for c in out for a in c.body + c.head)
    except ValueError as e:
        raise ConstraintSyntaxError(str(e)) from None
    return out


def parse_constraint(text: str) -> Constraint:
    (c,) = parse_constraints(text)
    return c


def parse_cq(text: str) -> CQ:
    """Parse ``ans(x) <- T(x, b, 'l')``, optionally preceded by ``const`` declarations."""
    statements, constants = _statements(text)
    if len(statements) != 1:
        raise ConstraintSyntaxError("expected exactly one query")
    lineno, toks = statements[0]
    r = _Reader(toks, constants)
    try:
        if r.next()[1] != "ans":
            raise ConstraintSyntaxError("query must start with ans(...)")
        r.expect("(")
        head = []
        if not r.accept(")"):
            head.append(r.term())
            while r.accept(","):
                head.append(r.term())
            r.expect(")")
        kind, arrow = r.next()
        if arrow not in ("<-", ":-", "←"):
            raise ConstraintSyntaxError(f"expected '<-', found {arrow!r}")
        body = r.atoms(set())
        if not r.at_end():
            raise ConstraintSyntaxError(f"trailing input {r.peek()[1]!r}")
        check_schema(body)
        return CQ(head, body)
    except (ConstraintSyntaxError, ValueError) as e:
        raise ConstraintSyntaxError(f"line {lineno}: {e}") from None


def format_constraints(sigma: Iterable[Constraint]) -> str:
    return "".join(f"{c}\n" for c in sigma)


# ------------------------------------------------------------ homomorphisms

class FactIndex:
    """Index over a set of facts for homomorphism search."""

    def __init__(self, atoms: Iterable[Atom] = ()):
        self.by_rel: dict[tuple, list[Atom]] = defaultdict(list)
        self.by_arg: dict[tuple, list[Atom]] = defaultdict(list)
        for a in dict.fromkeys(atoms):
            self.add(a)

    def add(self, a: Atom) -> None:
        self.by_rel[(a.relation, a.arity)].append(a)
        for i, v in enumerate(a.args):
            self.by_arg[(a.relation, a.arity, i, v)].append(a)

    def candidates(self, atom: Atom, h: dict) -> list[Atom]:
        best = self.by_rel.get((atom.relation, atom.arity), [])
        for i, a in enumerate(atom.args):
            if is_mappable(a) and a not in h:
                continue
            v = h[a] if is_mappable(a) else a
            pool = self.by_arg.get((atom.relation, atom.arity, i, v), [])
            if len(pool) < len(best):
                best = pool
        return best


def _extend(atom: Atom, fact: Atom, h: dict, injective: bool, var_to_var: bool) -> Optional[dict]:
    new = {}
    for a, b in zip(atom.args, fact.args):
        if is_mappable(a):
            cur = h.get(a, new.get(a))
            if cur is None:
                if isinstance(a, Null) and isinstance(b, Var):
                    return None
                if var_to_var and isinstance(a, Var) != isinstance(b, Var):
                    return None
                new[a] = b
            elif cur != b:
                return None
        elif a != b:
            return None
    if injective and new:
        used = set(h.values())
        seen = set()
        for v in new.values():
            if v in used or v in seen:
                return None
            seen.add(v)
    return new


def match_atom(atom: Atom, fact: Atom, h: Optional[dict] = None) -> Optional[dict]:
    """Extend ``h`` so that ``atom`` maps onto ``fact``; None if impossible."""
    h = dict(h or {})
    if atom.relation != fact.relation or atom.arity != fact.arity:
        return None
    new = _extend(atom, fact, h, False, False)
    if new is None:
        return None
    h.update(new)
    return h


def homomorphisms(src: Iterable[Atom], dst: Iterable[Atom] | FactIndex, fixed: Optional[dict] = None,
                  *, injective: bool = False, var_to_var: bool = False) -> Iterator[dict]:
    """Enumerate homomorphisms from ``src`` into ``dst`` extending ``fixed``.

    Constants map to themselves; variables and nulls map freely, nulls never to
    variables.
    """
    target = dst if isinstance(dst, FactIndex) else FactIndex(dst)
    pending = list(dict.fromkeys(src))
    h = dict(fixed or {})

    def search(remaining: list[Atom]) -> Iterator[dict]:
        if not remaining:
            yield dict(h)
            return
        # most constrained atom first
        best_i, best_c = 0, None
        for i, atom in enumerate(remaining):
            c = target.candidates(atom, h)
            if best_c is None or len(c) < len(best_c):
                best_i, best_c = i, c
                if not c:
                    return
        atom = remaining[best_i]
        rest = remaining[:best_i] + remaining[best_i + 1:]
        for fact in best_c:
            new = _extend(atom, fact, h, injective, var_to_var)
            if new is None:
                continue
            h.update(new)
            yield from search(rest)
            for k in new:
                del h[k]

    yield from search(pending)


def find_homomorphism(src, dst, fixed=None, **kw) -> Optional[dict]:
    return next(homomorphisms(src, dst, fixed, **kw), None)


def homomorphism_exists(src: Iterable[Atom], dst: Iterable[Atom]) -> tuple[bool, Optional[dict]]:
    h = find_homomorphism(src, dst)
    return h is not None, h


def isomorphic(q1: CQ, q2: CQ) -> bool:
    """True iff a variable bijection maps q1 onto q2 (bodies as sets, heads as tuples)."""
    b1, b2 = set(q1.body), set(q2.body)
    if len(b1) != len(b2) or len(q1.head) != len(q2.head) or len(q1.vars) != len(q2.vars):
        return False
    fixed = {}
    for a, b in zip(q1.head, q2.head):
        if isinstance(a, Var) != isinstance(b, Var):
            return False
        if not isinstance(a, Var):
            if a != b:
                return False
        elif fixed.setdefault(a, b) != b:
            return False
    if len(set(fixed.values())) != len(fixed):
        return False
    for h in homomorphisms(b1, b2, fixed, injective=True, var_to_var=True):
        if {a.map(h) for a in b1} == b2:
            return True
    return False


# ---------------------------------------------------------------- translations

@dataclass(frozen=True)
class Undefined:
    """A translation result that is not defined, with the reason."""

    reason: str

    def __bool__(self) -> bool:
        return False

    def __str__(self) -> str:
        return f"undefined: {self.reason}"


def _bgp(q) -> tuple[list, list[Pattern]]:
    if isinstance(q, Query):
        if not is_and_only(q.body):
            raise FragmentError("translation needs an And-only query body")
        pats = patterns_of(q.body)
        head = [v for v in sort_vars(q.projection) if v in variables(q.body)]
    else:
        if not is_and_only(q):
            raise FragmentError("translation needs an And-only query body")
        pats = patterns_of(q)
        head = sort_vars(variables(q))
    return head, pats


def c1_translate(q) -> CQ:
    """One ternary T-atom per triple pattern; head = sorted projection variables."""
    head, pats = _bgp(q)
    return CQ(head, [Atom(TRIPLE, tuple(p)) for p in pats])


def _to_query(head: Sequence, patterns: list) -> Query | Undefined:
    if not patterns:
        return Undefined("empty body")
    if any(not isinstance(v, Var) for v in head):
        return Undefined("constant in head")
    if len(set(head)) != len(head):
        return Undefined("repeated head variable")
    return Query(head, conjunction(patterns))


def c1_inverse(q: CQ) -> Query | Undefined:
    pats = []
    for atom in q.body:
        if atom.relation != TRIPLE or atom.arity != 3:
            return Undefined(f"{atom} is not a ternary {TRIPLE}-atom")
        if any(isinstance(a, Null) for a in atom.args):
            return Undefined(f"{atom} contains a null")
        try:
            pats.append(Pattern(*atom.args))
        except QuerySyntaxError:
            return Undefined(f"{atom} is not a valid triple pattern")
    return _to_query(q.head, pats)


def _relation_name(t) -> str:
    return t.value if isinstance(t, Iri) else str(t)


def c2_translate(q) -> CQ | Undefined:
    head, pats = _bgp(q)
    atoms = []
    for p in pats:
        if isinstance(p.p, Var):
            return Undefined(f"pattern {p} has a variable predicate")
        atoms.append(Atom(_relation_name(p.p), (p.s, p.o)))
    return CQ(head, atoms)


def c2_inverse(q: CQ) -> Query | Undefined:
    pats = []
    for atom in q.body:
        if atom.arity != 2:
            return Undefined(f"{atom} is not binary")
        try:
            pats.append(Pattern(atom.args[0], Iri(atom.relation), atom.args[1]))
        except QuerySyntaxError:
            return Undefined(f"{atom} is not a valid triple pattern")
    return _to_query(q.head, pats)


def _h(atoms: Iterable[Atom]) -> list[Atom]:
    out = []
    for a in atoms:
        if a.relation != TRIPLE or a.arity != 3:
            raise ValueError(f"{a} is not a ternary {TRIPLE}-atom")
        s, p, o = a.args
        if not isinstance(p, Var):
            out.append(Atom(_relation_name(p), (s, o)))
    return out


def prime_constraint(c: Constraint) -> Constraint | Undefined:
    """The binary-relation image of one constraint, or Undefined if ill-formed."""
    body = _h(c.body)
    try:
        if isinstance(c, EGD):
            return EGD(body, c.left, c.right)
        head = _h(c.head)
        return TGD(body, head, c.existentials & atom_vars(head))
    except ValueError as e:
        return Undefined(str(e))


def sigma_prime(sigma: Sequence[Constraint]) -> list[Constraint]:
    """Translate every constraint; collapse to [] if any image is ill-formed."""
    out = [prime_constraint(c) for c in sigma]
    if any(isinstance(c, Undefined) for c in out):
        return []
    return out


# ----------------------------------------------------------------- containment

@dataclass(frozen=True)
class Containment:
    """Tri-state containment verdict; ``holds`` is None when unknown."""

    holds: Optional[bool]
    vacuous: bool = False
    reason: str = ""
    witness: Optional[dict] = field(default=None, compare=False)

    def __bool__(self) -> bool:
        return self.holds is True

    def __str__(self) -> str:
        if self.holds is None:
            return f"unknown ({self.reason})"
        text = "yes" if self.holds else "no"
        return text + (" (vacuous: chase failed)" if self.vacuous else "")


def freeze(q: CQ, start: int = 1) -> tuple[list[Atom], dict]:
    """Canonical instance of q: each variable becomes a distinct labelled null."""
    nulls = {v: Null(start + i) for i, v in enumerate(sort_vars(q.vars))}
    return [a.map(nulls) for a in q.body], nulls


def contained_in(q: CQ, q2: CQ, sigma: Sequence[Constraint] = (), budget: Optional[int] = None) -> Containment:
    """Decide q ⊑_Σ q2 by chasing the canonical instance of q."""
    from .chase import Failed, Instance, Terminated, chase

    if len(q.head) != len(q2.head):
        return Containment(False, reason="head arities differ")
    facts, nulls = freeze(q)
    outcome = chase(Instance(facts), sigma, budget=budget)
    if isinstance(outcome, Failed):
        return Containment(True, vacuous=True, reason="chase failed")
    if not isinstance(outcome, Terminated):
        return Containment(None, reason="chase budget exceeded")
    frozen_head = [outcome.resolve(nulls.get(v, v)) for v in q.head]
    fixed: dict = {}
    for t, target in zip(q2.head, frozen_head):
        if isinstance(t, Var):
            if fixed.setdefault(t, target) != target:
                return Containment(False)
        elif t != target:
            return Containment(False)
    h = find_homomorphism(q2.body, outcome.instance.index, fixed)
    return Containment(h is not None, witness=h)


def equivalent(q1: CQ, q2: CQ, sigma: Sequence[Constraint] = (), budget: Optional[int] = None) -> Containment:
    a = contained_in(q1, q2, sigma, budget)
    if a.holds is False:
        return a
    b = contained_in(q2, q1, sigma, budget)
    if b.holds is False:
        return b
    if a.holds is None or b.holds is None:
        return Containment(None, reason=a.reason or b.reason)
    return Containment(True, vacuous=a.vacuous or b.vacuous)
