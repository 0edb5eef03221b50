"""Mapping sets, algebra operators, translation and evaluation."""
from __future__ import annotations

import collections.abc as cabc
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator

import numpy as np

from . import kernels
from .rdf import Document, Var, is_constant, parse_term, term_key
from .syntax import (
    And, Bound, CondAnd, CondOr, Condition, Empty, EqConst, EqVar, Filter, Not, Opt,
    Pattern, Query, condition_vars,
)
from . import syntax as sx


class Mapping(cabc.Mapping):
    """Immutable partial function from variables to constants."""

    __slots__ = ("_d", "_hash")

    def __init__(self, bindings=()):
        d = dict(bindings)
        for k, v in d.items():
            if not isinstance(k, Var) or not is_constant(v):
                raise TypeError(f"bad binding {k} -> {v}")
        self._d = d
        self._hash = None

    def __getitem__(self, k):
        return self._d[k]

    def __iter__(self) -> Iterator[Var]:
        return iter(self._d)

    def __len__(self) -> int:
        return len(self._d)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._d.items()))
        return self._hash

    def __eq__(self, other):
        if isinstance(other, Mapping):
            return self._d == other._d
        return NotImplemented

    def dom(self) -> frozenset:
        return frozenset(self._d)

    def sort_key(self) -> tuple:
        return tuple((term_key(k), term_key(v)) for k, v in sorted(self._d.items(), key=lambda kv: term_key(kv[0])))

    def __str__(self):
        items = sorted(self._d.items(), key=lambda kv: term_key(kv[0]))
        return "{" + ", ".join(f"{k} -> {v}" for k, v in items) + "}"

    __repr__ = __str__


def parse_mapping(text: str) -> Mapping:
    """Inverse of str(Mapping): '{?a -> 1, ?b -> "x"}'; '{}' is the empty mapping."""
    body = text.strip()
    if not (body.startswith("{") and body.endswith("}")):
        raise ValueError(f"mapping must be enclosed in braces: {text!r}")
    body = body[1:-1].strip()
    out = {}
    for item in _split_bindings(body):
        left, sep, right = item.partition("->")
        if not sep:
            raise ValueError(f"expected '?var -> value': {item!r}")
        k, v = parse_term(left), parse_term(right)
        if not isinstance(k, Var) or not is_constant(v):
            raise ValueError(f"bad binding: {item!r}")
        if k in out and out[k] != v:
            raise ValueError(f"conflicting bindings for {k}")
        out[k] = v
    return Mapping(out)


def _split_bindings(body: str) -> list[str]:
    """Split on commas outside quoted literals."""
    parts, cur, quote, escaped = [], [], None, False
    for ch in body:
        if escaped:
            escaped = False
        elif ch == "\\" and quote:
            escaped = True
        elif quote:
            quote = None if ch == quote else quote
        elif ch in "\"'":
            quote = ch
        elif ch == ",":
            parts.append("".join(cur))
            cur = []
            continue
        cur.append(ch)
    if quote:
        raise ValueError("unterminated literal in mapping")
    tail = "".join(cur)
    if tail.strip() or parts:
        parts.append(tail)
    return [p.strip() for p in parts]


def format_mappings(omega: Iterable[Mapping]) -> str:
    return "".join(f"{m}\n" for m in sorted(omega, key=lambda m: str(m)))


# --------------------------------------------------------- reference operators

def compatible(m1: Mapping, m2: Mapping) -> bool:
    small, big = (m1, m2) if len(m1) <= len(m2) else (m2, m1)
    for k, v in small.items():
        w = big.get(k)
        if w is not None and w != v:
            return False
    return True


def merge(m1: Mapping, m2: Mapping) -> Mapping:
    return Mapping({**m1, **m2})


def join(left, right) -> frozenset:
    return frozenset(merge(a, b) for a in left for b in right if compatible(a, b))


def union(left, right) -> frozenset:
    return frozenset(left) | frozenset(right)


def minus(left, right) -> frozenset:
    return frozenset(a for a in left if not any(compatible(a, b) for b in right))


def left_outer_join(left, right) -> frozenset:
    return join(left, right) | minus(left, right)


def project(s: Iterable[Var], omega) -> frozenset:
    s = frozenset(s)
    return frozenset(Mapping({k: v for k, v in m.items() if k in s}) for m in omega)


def satisfies(m: Mapping, c: Condition) -> bool:
    if isinstance(c, Bound):
        return c.var in m
    if isinstance(c, EqConst):
        return m.get(c.var) == c.value
    if isinstance(c, EqVar):
        return c.left in m and c.right in m and m[c.left] == m[c.right]
    if isinstance(c, Not):
        return not satisfies(m, c.arg)
    if isinstance(c, CondAnd):
        return satisfies(m, c.left) and satisfies(m, c.right)
    if isinstance(c, CondOr):
        return satisfies(m, c.left) or satisfies(m, c.right)
    raise TypeError(c)


def select(c: Condition, omega) -> frozenset:
    return frozenset(m for m in omega if satisfies(m, c))


# ------------------------------------------------------------- expressions

@dataclass(frozen=True)
class Leaf:
    pattern: Pattern
    vars: frozenset = field(init=False, repr=False, compare=False)
    safe: frozenset = field(init=False, repr=False, compare=False)
    minus_fragment: bool = field(init=False, repr=False, compare=False, default=True)

    def __post_init__(self):
        object.__setattr__(self, "vars", self.pattern.vars)
        object.__setattr__(self, "safe", self.pattern.vars)

    children = ()

    def __str__(self):
        return str(self.pattern)


@dataclass(frozen=True)
class EmptySet:
    vars: frozenset = field(init=False, repr=False, compare=False, default=frozenset())
    safe: frozenset = field(init=False, repr=False, compare=False, default=frozenset())
    minus_fragment: bool = field(init=False, repr=False, compare=False, default=True)

    children = ()

    def __str__(self):
        return "∅"


EMPTY = EmptySet()


@dataclass(frozen=True)
class _BinaryOp:
    left: "AlgebraExpr"
    right: "AlgebraExpr"
    vars: frozenset = field(init=False, repr=False, compare=False)
    safe: frozenset = field(init=False, repr=False, compare=False)
    minus_fragment: bool = field(init=False, repr=False, compare=False)
    symbol = ""

    def __post_init__(self):
        object.__setattr__(self, "vars", self.left.vars | self.right.vars)
        object.__setattr__(self, "safe", self._safe())
        object.__setattr__(self, "minus_fragment", self._minus())

    def _safe(self):
        return self.left.safe

    def _minus(self):
        return self.left.minus_fragment and self.right.minus_fragment

    @property
    def children(self):
        return (self.left, self.right)

    def __str__(self):
        return f"({self.left} {self.symbol} {self.right})"


class Join(_BinaryOp):
    symbol = "⋈"

    def _safe(self):
        return self.left.safe | self.right.safe


class Union(_BinaryOp):
    symbol = "∪"

    def _safe(self):
        return self.left.safe & self.right.safe

    def _minus(self):
        return False


class Minus(_BinaryOp):
    symbol = "\\"


class LeftJoin(_BinaryOp):
    symbol = "⟕"


@dataclass(frozen=True)
class Project:
    projection: frozenset
    child: "AlgebraExpr"
    vars: frozenset = field(init=False, repr=False, compare=False)
    safe: frozenset = field(init=False, repr=False, compare=False)
    minus_fragment: bool = field(init=False, repr=False, compare=False, default=False)

    def __init__(self, projection: Iterable[Var], child):
        object.__setattr__(self, "projection", frozenset(projection))
        object.__setattr__(self, "child", child)
        object.__setattr__(self, "vars", child.vars & self.projection)
        object.__setattr__(self, "safe", child.safe & self.projection)
        object.__setattr__(self, "minus_fragment", False)

    @property
    def children(self):
        return (self.child,)

    def __str__(self):
        names = ",".join(str(v) for v in sorted(self.projection, key=term_key))
        return f"π{{{names}}}({self.child})"


@dataclass(frozen=True)
class Select:
    cond: Condition
    child: "AlgebraExpr"
    vars: frozenset = field(init=False, repr=False, compare=False)
    safe: frozenset = field(init=False, repr=False, compare=False)
    minus_fragment: bool = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "vars", self.child.vars)
        object.__setattr__(self, "safe", self.child.safe)
        object.__setattr__(self, "minus_fragment", self.child.minus_fragment)

    @property
    def children(self):
        return (self.child,)

    def __str__(self):
        return f"σ[{self.cond}]({self.child})"


AlgebraExpr = Leaf | EmptySet | Join | Union | Minus | LeftJoin | Project | Select


def with_children(a, children):
    """Rebuild node a with new children."""
    if isinstance(a, _BinaryOp):
        return type(a)(*children)
    if isinstance(a, Project):
        return Project(a.projection, children[0])
    if isinstance(a, Select):
        return Select(a.cond, children[0])
    return a


def safe_vars(a) -> frozenset:
    return a.safe


def algebra_vars(a) -> frozenset:
    return a.vars


def in_minus_fragment(a) -> bool:
    """Union- and projection-free expressions."""
    return a.minus_fragment


def all_variables(a) -> frozenset:
    """Every variable mentioned anywhere, including projections and conditions."""
    out = set()
    stack = [a]
    while stack:
        n = stack.pop()
        if isinstance(n, Leaf):
            out |= n.vars
        elif isinstance(n, Project):
            out |= n.projection
        elif isinstance(n, Select):
            out |= condition_vars(n.cond)
        stack.extend(n.children)
    return frozenset(out)


def translate(q) -> AlgebraExpr:
    if isinstance(q, Query):
        return Project(q.projection, translate(q.body))
    if isinstance(q, Pattern):
        return Leaf(q)
    if isinstance(q, Empty):
        return EMPTY
    if isinstance(q, And):
        return Join(translate(q.left), translate(q.right))
    if isinstance(q, Opt):
        return LeftJoin(translate(q.left), translate(q.right))
    if isinstance(q, sx.Union):
        return Union(translate(q.left), translate(q.right))
    if isinstance(q, Filter):
        return Select(q.cond, translate(q.child))
    raise TypeError(f"cannot translate {q!r}")


def as_algebra(x):
    if isinstance(x, (Leaf, EmptySet, _BinaryOp, Project, Select)):
        return x
    return translate(x)


# ------------------------------------------------------------- evaluation

def _leaf_reference(t: Pattern, d: Document) -> frozenset:
    out = set()
    for triple in d:
        b = {}
        for slot, value in zip(t, triple):
            if isinstance(slot, Var):
                if b.setdefault(slot, value) != value:
                    break
            elif slot != value:
                break
        else:
            out.add(Mapping(b))
    return frozenset(out)


def evaluate_reference(a, d: Document) -> frozenset:
    """Direct recursive evaluation with the set-level operators."""
    a = as_algebra(a)
    if isinstance(a, Leaf):
        return _leaf_reference(a.pattern, d)
    if isinstance(a, EmptySet):
        return frozenset()
    if isinstance(a, Project):
        return project(a.projection, evaluate_reference(a.child, d))
    if isinstance(a, Select):
        return select(a.cond, evaluate_reference(a.child, d))
    left, right = evaluate_reference(a.left, d), evaluate_reference(a.right, d)
    op = {Join: join, Union: union, Minus: minus, LeftJoin: left_outer_join}[type(a)]
    return op(left, right)


class _EncodedDocument:
    def __init__(self, d: Document):
        self.terms = sorted({t for tr in d for t in tr}, key=term_key)
        self.code = {t: i for i, t in enumerate(self.terms)}
        rows = [[self.code[t] for t in tr] for tr in d]
        self.table = np.array(rows, dtype=np.intc).reshape(len(rows), 3)


@lru_cache(maxsize=128)
def _encode(d: Document) -> _EncodedDocument:
    return _EncodedDocument(d)


def _dedupe(rows: np.ndarray) -> np.ndarray:
    if rows.shape[0] <= 1:
        return rows
    if rows.shape[1] == 0:
        return rows[:1]
    return np.ascontiguousarray(np.unique(rows, axis=0))


class _Evaluator:
    def __init__(self, a, d: Document):
        self.doc = _encode(d)
        self.columns = {v: i for i, v in enumerate(sorted(all_variables(a), key=term_key))}
        self.width = len(self.columns)

    def empty(self) -> np.ndarray:
        return np.empty((0, self.width), dtype=np.intc)

    def run(self, a) -> np.ndarray:
        if isinstance(a, Leaf):
            return self.leaf(a.pattern)
        if isinstance(a, EmptySet):
            return self.empty()
        if isinstance(a, Project):
            rows = self.run(a.child).copy()
            for v, c in self.columns.items():
                if v not in a.projection:
                    rows[:, c] = -1
            return _dedupe(rows)
        if isinstance(a, Select):
            rows = self.run(a.child)
            return np.ascontiguousarray(rows[self.mask(a.cond, rows)])
        left = self.run(a.left)
        right = self.run(a.right)
        if isinstance(a, Union):
            return _dedupe(np.vstack((left, right)))
        if isinstance(a, Join):
            return _dedupe(kernels.join_rows(left, right))
        if isinstance(a, Minus):
            return np.ascontiguousarray(left[kernels.minus_mask(left, right)])
        if isinstance(a, LeftJoin):
            joined = kernels.join_rows(left, right)
            kept = left[kernels.minus_mask(left, right)]
            return _dedupe(np.vstack((joined, kept)))
        raise TypeError(a)

    def leaf(self, t: Pattern) -> np.ndarray:
        table = self.doc.table
        mask = np.ones(table.shape[0], dtype=bool)
        first: dict[Var, int] = {}
        for i, slot in enumerate(t):
            if isinstance(slot, Var):
                if slot in first:
                    mask &= table[:, i] == table[:, first[slot]]
                else:
                    first[slot] = i
            else:
                code = self.doc.code.get(slot)
                if code is None:
                    return self.empty()
                mask &= table[:, i] == code
        matched = table[mask]
        rows = np.full((matched.shape[0], self.width), -1, dtype=np.intc)
        for v, i in first.items():
            rows[:, self.columns[v]] = matched[:, i]
        return _dedupe(rows)

    def mask(self, c: Condition, rows: np.ndarray) -> np.ndarray:
        if isinstance(c, Bound):
            return rows[:, self.columns[c.var]] != -1
        if isinstance(c, EqConst):
            code = self.doc.code.get(c.value)
            if code is None:
                return np.zeros(rows.shape[0], dtype=bool)
            return rows[:, self.columns[c.var]] == code
        if isinstance(c, EqVar):
            x = rows[:, self.columns[c.left]]
            y = rows[:, self.columns[c.right]]
            return (x != -1) & (x == y)
        if isinstance(c, Not):
            return ~self.mask(c.arg, rows)
        if isinstance(c, CondAnd):
            return self.mask(c.left, rows) & self.mask(c.right, rows)
        if isinstance(c, CondOr):
            return self.mask(c.left, rows) | self.mask(c.right, rows)
        raise TypeError(c)

    def decode(self, rows: np.ndarray) -> frozenset:
        names = list(self.columns)
        terms = self.doc.terms
        out = set()
        for row in rows.tolist():
            out.add(Mapping({names[i]: terms[x] for i, x in enumerate(row) if x != -1}))
        return frozenset(out)


def evaluate(a, d: Document) -> frozenset:
    """Evaluate an algebra expression, SPARQL expression or query over d."""
    a = as_algebra(a)
    ev = _Evaluator(a, d)
    return ev.decode(ev.run(a))


def membership(m: Mapping, d: Document, q) -> bool:
    return m in evaluate(q, d)


def membership_fu(m: Mapping, d: Document, e) -> bool:
    """Recursive membership test for Union/Filter expressions without evaluating them."""
    if isinstance(e, Query):
        raise ValueError("projection is outside the Union/Filter fragment")
    if isinstance(e, Pattern):
        if m.dom() != e.vars:
            return False
        try:
            from .rdf import Triple
            return Triple(*(m[t] if isinstance(t, Var) else t for t in e)) in d
        except (ValueError, TypeError):
            return False
    if isinstance(e, sx.Union):
        return membership_fu(m, d, e.left) or membership_fu(m, d, e.right)
    if isinstance(e, Filter):
        return membership_fu(m, d, e.child) and satisfies(m, e.cond)
    if isinstance(e, Empty):
        return False
    raise ValueError(f"{type(e).__name__} is outside the Union/Filter fragment")
