"""Abstract syntax, parser and structural metrics for SPARQL expressions."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
import typing as _t
from typing import Iterable

from .rdf import Blank, Iri, Literal, Term, Var, TOKEN, is_constant, term_from_match, term_key


class QuerySyntaxError(ValueError):
    pass


class UnsafeFilterError(QuerySyntaxError):
    def __init__(self, variable: Var, condition):
        super().__init__(f"unsafe filter: {variable} in {condition} is not a variable of the filtered expression")
        self.variable = variable


# ---------------------------------------------------------------- conditions

@dataclass(frozen=True)
class Bound:
    var: Var

    def __str__(self):
        return f"bnd({self.var})"


@dataclass(frozen=True)
class EqConst:
    var: Var
    value: Term

    def __post_init__(self):
        if not is_constant(self.value):
            raise QuerySyntaxError(f"expected a constant, got {self.value}")

    def __str__(self):
        return f"{self.var} = {self.value}"


@dataclass(frozen=True)
class EqVar:
    left: Var
    right: Var

    def __str__(self):
        return f"{self.left} = {self.right}"


@dataclass(frozen=True)
class Not:
    arg: "Condition"

    def __str__(self):
        return f"!{self.arg}"


@dataclass(frozen=True)
class CondAnd:
    left: "Condition"
    right: "Condition"

    def __str__(self):
        return f"({self.left} && {self.right})"


@dataclass(frozen=True)
class CondOr:
    left: "Condition"
    right: "Condition"

    def __str__(self):
        return f"({self.left} || {self.right})"


Condition = _t.Union[Bound, EqConst, EqVar, Not, CondAnd, CondOr]


def condition_vars(c: Condition) -> frozenset:
    if isinstance(c, Bound):
        return frozenset((c.var,))
    if isinstance(c, EqConst):
        return frozenset((c.var,))
    if isinstance(c, EqVar):
        return frozenset((c.left, c.right))
    if isinstance(c, Not):
        return condition_vars(c.arg)
    return condition_vars(c.left) | condition_vars(c.right)


# --------------------------------------------------------------- expressions

def _cached_vars(node, value):
    object.__setattr__(node, "vars", value)


@dataclass(frozen=True)
class Pattern:
    s: Term
    p: Term
    o: Term
    vars: frozenset = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not isinstance(self.s, (Iri, Blank, Var)):
            raise QuerySyntaxError(f"subject slot must be an IRI, blank node or variable: {self}")
        if not isinstance(self.p, (Iri, Var)):
            raise QuerySyntaxError(f"predicate slot must be an IRI or variable: {self}")
        if not isinstance(self.o, (Iri, Blank, Literal, Var)):
            raise QuerySyntaxError(f"bad object slot: {self}")
        _cached_vars(self, frozenset(t for t in (self.s, self.p, self.o) if isinstance(t, Var)))

    def __iter__(self):
        return iter((self.s, self.p, self.o))

    def __str__(self):
        return f"({self.s}, {self.p}, {self.o})"


@dataclass(frozen=True)
class Empty:
    """Expression that evaluates to the empty set on every document."""
    vars: frozenset = field(init=False, repr=False, compare=False, default=frozenset())

    def __str__(self):
        return "EMPTY"


@dataclass(frozen=True)
class _Binary:
    left: "Expr"
    right: "Expr"
    vars: frozenset = field(init=False, repr=False, compare=False)
    keyword = ""

    def __post_init__(self):
        _cached_vars(self, self.left.vars | self.right.vars)

    def __str__(self):
        return f"({self.left} {self.keyword} {self.right})"


class And(_Binary):
    keyword = "AND"


class Union(_Binary):
    keyword = "UNION"


class Opt(_Binary):
    keyword = "OPT"


@dataclass(frozen=True)
class Filter:
    child: "Expr"
    cond: Condition
    vars: frozenset = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        missing = condition_vars(self.cond) - self.child.vars
        if missing:
            raise UnsafeFilterError(min(missing), self.cond)
        _cached_vars(self, self.child.vars)

    def __str__(self):
        return f"({self.child} FILTER {self.cond})"


Expr = _t.Union[Pattern, Empty, And, Union, Opt, Filter]


@dataclass(frozen=True)
class Query:
    projection: frozenset
    body: Expr

    def __init__(self, projection: Iterable[Var], body: Expr):
        object.__setattr__(self, "projection", frozenset(projection))
        object.__setattr__(self, "body", body)

    @property
    def vars(self) -> frozenset:
        return self.projection | self.body.vars

    def __str__(self):
        head = " ".join(str(v) for v in sorted(self.projection))
        return f"SELECT {head} WHERE {self.body}" if head else f"SELECT WHERE {self.body}"


def variables(e) -> frozenset:
    """Variables syntactically present in an expression, query or condition."""
    if isinstance(e, (Bound, EqConst, EqVar, Not, CondAnd, CondOr)):
        return condition_vars(e)
    return e.vars


def opt_rank(e: Expr) -> int:
    if isinstance(e, Query):
        return opt_rank(e.body)
    if isinstance(e, (Pattern, Empty)):
        return 0
    if isinstance(e, Filter):
        return opt_rank(e.child)
    inner = max(opt_rank(e.left), opt_rank(e.right))
    return inner + 1 if isinstance(e, Opt) else inner


@dataclass(frozen=True)
class Fragment:
    operators: frozenset
    select: bool = False

    def __str__(self):
        name = "".join(op for op in "AFOU" if op in self.operators)
        return (name or "-") + ("+" if self.select else "")


def fragment_of(e) -> Fragment:
    select = isinstance(e, Query)
    if select:
        e = e.body
    ops = set()
    stack = [e]
    while stack:
        n = stack.pop()
        if isinstance(n, Filter):
            ops.add("F")
            stack.append(n.child)
        elif isinstance(n, _Binary):
            ops.add({And: "A", Union: "U", Opt: "O"}[type(n)])
            stack += [n.left, n.right]
    return Fragment(frozenset(ops), select)


def is_and_only(e: Expr) -> bool:
    return isinstance(e, (Pattern, And)) and fragment_of(e).operators <= {"A"}


def patterns_of(e: Expr) -> list[Pattern]:
    """Triple patterns of an And-only expression, left to right."""
    if isinstance(e, Pattern):
        return [e]
    if isinstance(e, And):
        return patterns_of(e.left) + patterns_of(e.right)
    raise QuerySyntaxError(f"not an And-only expression: {e}")


def conjunction(parts: Iterable[Expr]) -> Expr:
    """Left-associated And over a non-empty sequence."""
    parts = list(parts)
    if not parts:
        raise QuerySyntaxError("empty conjunction")
    out = parts[0]
    for p in parts[1:]:
        out = And(out, p)
    return out


# -------------------------------------------------------------------- parser

_PUNCT = re.compile(r"\s*(\(|\)|,|&&|\|\||!=|!|=|¬|∧|∨)")
_KEYWORDS = {"AND", "UNION", "OPT", "FILTER", "SELECT", "WHERE", "EMPTY"}


class _Tokens:
    def __init__(self, text: str):
        self.items: list[tuple[str, object]] = []
        pos = 0
        while True:
            while pos < len(text) and text[pos].isspace():
                pos += 1
            if pos >= len(text):
                break
            m = _PUNCT.match(text, pos)
            if m:
                sym = {"¬": "!", "∧": "&&", "∨": "||"}.get(m.group(1), m.group(1))
                self.items.append(("punct", sym))
                pos = m.end()
                continue
            m = TOKEN.match(text, pos)
            if not m or m.end() == pos:
                raise QuerySyntaxError(f"unexpected input at {text[pos:pos + 20]!r}")
            raw = m.group(0).strip()
            if m.group("bare") is not None and raw in _KEYWORDS:
                self.items.append(("kw", raw))
            else:
                self.items.append(("term", term_from_match(m)))
            pos = m.end()
        self.i = 0

    def peek(self, k: int = 0):
        j = self.i + k
        return self.items[j] if j < len(self.items) else ("eof", None)

    def next(self):
        tok = self.peek()
        self.i += 1
        return tok

    def accept(self, kind, value=None) -> bool:
        k, v = self.peek()
        if k == kind and (value is None or v == value):
            self.i += 1
            return True
        return False

    def expect(self, kind, value=None):
        k, v = self.next()
        if k != kind or (value is not None and v != value):
            want = value if value is not None else kind
            raise QuerySyntaxError(f"expected {want!r}, got {v if v is not None else 'end of input'!r}")
        return v


def _term_or_keyword(tokens: _Tokens) -> Term:
    k, v = tokens.next()
    if k == "term":
        return v
    if k == "kw":
        return Iri(v)
    raise QuerySyntaxError(f"expected a term, got {v!r}")


def _parse_union(t: _Tokens) -> Expr:
    e = _parse_opt(t)
    while t.accept("kw", "UNION"):
        e = Union(e, _parse_opt(t))
    return e


def _parse_opt(t: _Tokens) -> Expr:
    e = _parse_and(t)
    while t.accept("kw", "OPT"):
        e = Opt(e, _parse_and(t))
    return e


def _parse_and(t: _Tokens) -> Expr:
    e = _parse_filter(t)
    while t.accept("kw", "AND"):
        e = And(e, _parse_filter(t))
    return e


def _parse_filter(t: _Tokens) -> Expr:
    e = _parse_primary(t)
    while t.accept("kw", "FILTER"):
        e = Filter(e, _parse_cond(t))
    return e


def _parse_primary(t: _Tokens) -> Expr:
    if t.accept("kw", "EMPTY"):
        return Empty()
    t.expect("punct", "(")
    k, v = t.peek()
    if (k == "punct" and v == "(") or (k == "kw" and v == "EMPTY" and t.peek(1) != ("punct", ",")):
        e = _parse_union(t)
        t.expect("punct", ")")
        return e
    s = _term_or_keyword(t)
    t.expect("punct", ",")
    p = _term_or_keyword(t)
    t.expect("punct", ",")
    o = _term_or_keyword(t)
    t.expect("punct", ")")
    return Pattern(s, p, o)


def _parse_cond(t: _Tokens) -> Condition:
    c = _parse_cond_and(t)
    while t.accept("punct", "||"):
        c = CondOr(c, _parse_cond_and(t))
    return c


def _parse_cond_and(t: _Tokens) -> Condition:
    c = _parse_cond_unary(t)
    while t.accept("punct", "&&"):
        c = CondAnd(c, _parse_cond_unary(t))
    return c


def _parse_cond_unary(t: _Tokens) -> Condition:
    if t.accept("punct", "!"):
        return Not(_parse_cond_unary(t))
    if t.accept("punct", "("):
        c = _parse_cond(t)
        t.expect("punct", ")")
        return c
    k, v = t.next()
    if k == "term" and isinstance(v, Iri) and v.value in ("bnd", "bound"):
        t.expect("punct", "(")
        var = t.expect("term")
        if not isinstance(var, Var):
            raise QuerySyntaxError(f"bnd expects a variable, got {var}")
        t.expect("punct", ")")
        return Bound(var)
    if k == "term" and isinstance(v, Var):
        if t.accept("punct", "!="):
            rhs = _term_or_keyword(t)
            return Not(EqVar(v, rhs) if isinstance(rhs, Var) else EqConst(v, rhs))
        t.expect("punct", "=")
        rhs = _term_or_keyword(t)
        return EqVar(v, rhs) if isinstance(rhs, Var) else EqConst(v, rhs)
    raise QuerySyntaxError(f"unexpected {v!r} in filter condition")


def parse_expr(text: str) -> Expr:
    t = _Tokens(text)
    e = _parse_union(t)
    if t.peek()[0] != "eof":
        raise QuerySyntaxError(f"trailing input starting at {t.peek()[1]!r}")
    return e


def parse_query(text: str) -> Query | Expr:
    """Parse either 'SELECT ?a ... WHERE expr' or a bare expression."""
    t = _Tokens(text)
    if t.accept("kw", "SELECT"):
        proj = []
        while t.peek()[0] == "term" and isinstance(t.peek()[1], Var):
            proj.append(t.next()[1])
        t.expect("kw", "WHERE")
        body = _parse_union(t)
        result: Query | Expr = Query(proj, body)
    else:
        result = _parse_union(t)
    if t.peek()[0] != "eof":
        raise QuerySyntaxError(f"trailing input starting at {t.peek()[1]!r}")
    return result


def serialize(e) -> str:
    return str(e)


def parse_condition(text: str) -> Condition:
    t = _Tokens(text)
    c = _parse_cond(t)
    if t.peek()[0] != "eof":
        raise QuerySyntaxError("trailing input in condition")
    return c


def sort_vars(vs: Iterable[Var]) -> list[Var]:
    return sorted(vs, key=term_key)
