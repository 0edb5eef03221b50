"""Encodings of QBF and 3-CNF satisfiability as SPARQL membership problems.

Every encoder returns the document, the expression or query and the target
mapping whose membership decides the source formula.  The brute-force
evaluators are the matching oracles.
"""
from __future__ import annotations

import itertools
import random
import re
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence, Union

from . import syntax as sx
from .algebra import Mapping, evaluate
from .rdf import Document, Iri, Triple, Var


class ShapeError(ValueError):
    """Raised when a formula does not have the shape an encoder requires."""


class FormulaSyntaxError(ValueError):
    """Raised on malformed formula text."""


# ---------------------------------------------------------------- formulas

@dataclass(frozen=True)
class PVar:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class PNot:
    arg: "Formula"

    def __str__(self):
        return f"!{self.arg}"


@dataclass(frozen=True)
class PAnd:
    args: tuple

    def __str__(self):
        return "(" + " & ".join(str(a) for a in self.args) + ")"


@dataclass(frozen=True)
class POr:
    args: tuple

    def __str__(self):
        return "(" + " | ".join(str(a) for a in self.args) + ")"


Formula = Union[PVar, PNot, PAnd, POr]
Literal = tuple  # (variable name, positive)


def formula_vars(f: Formula) -> frozenset:
    if isinstance(f, PVar):
        return frozenset([f.name])
    if isinstance(f, PNot):
        return formula_vars(f.arg)
    return frozenset().union(*(formula_vars(a) for a in f.args))


def holds(f: Formula, assignment) -> bool:
    if isinstance(f, PVar):
        return bool(assignment[f.name])
    if isinstance(f, PNot):
        return not holds(f.arg, assignment)
    if isinstance(f, PAnd):
        return all(holds(a, assignment) for a in f.args)
    return any(holds(a, assignment) for a in f.args)


def _literal(f) -> Literal | None:
    if isinstance(f, PVar):
        return (f.name, True)
    if isinstance(f, PNot) and isinstance(f.arg, PVar):
        return (f.arg.name, False)
    return None


def cnf_clauses(f: Formula) -> list[tuple[Literal, ...]] | None:
    """Clauses of f when f is a conjunction of disjunctions of literals, else None."""
    out = []
    for conj in (f.args if isinstance(f, PAnd) else (f,)):
        lits = [_literal(d) for d in (conj.args if isinstance(conj, POr) else (conj,))]
        if any(lit is None for lit in lits):
            return None
        out.append(tuple(lits))
    return out


def from_clauses(clauses: Iterable[Sequence[Literal]]) -> Formula:
    def lit(name, positive):
        return PVar(name) if positive else PNot(PVar(name))
    return PAnd(tuple(POr(tuple(lit(*x) for x in c)) for c in clauses))


@dataclass(frozen=True)
class Qbf:
    """Prenex quantified boolean formula; prefix holds (quantifier, variables) blocks."""
    prefix: tuple
    matrix: Formula

    def __post_init__(self):
        prefix = tuple((q, tuple(vs)) for q, vs in self.prefix)
        object.__setattr__(self, "prefix", prefix)
        names = [v for _, vs in prefix for v in vs]
        if any(q not in ("forall", "exists") for q, _ in prefix):
            raise ShapeError("quantifiers must be forall or exists")
        if len(set(names)) != len(names):
            raise ShapeError("quantified variables must be distinct")

    @property
    def variables(self) -> tuple:
        return tuple(v for _, vs in self.prefix for v in vs)

    @property
    def free(self) -> frozenset:
        return formula_vars(self.matrix) - set(self.variables)

    @property
    def clauses(self):
        return cnf_clauses(self.matrix)

    def __str__(self):
        head = " ".join(f"{q} {' '.join(vs)}" for q, vs in self.prefix)
        return f"{head} . {self.matrix}" if head else str(self.matrix)


@dataclass(frozen=True)
class Cnf3:
    variables: tuple
    clauses: tuple

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "clauses", tuple(tuple(tuple(lit) for lit in c) for c in self.clauses))
        for c in self.clauses:
            if len(c) != 3:
                raise ShapeError(f"clause must have exactly three literals: {c}")
            for name, _ in c:
                if name not in self.variables:
                    raise ShapeError(f"undeclared variable {name}")

    @property
    def formula(self) -> Formula:
        return from_clauses(self.clauses)

    def __str__(self):
        return str(self.formula)


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(r"\s*(?:(forall|exists|[A-Za-z_][A-Za-z0-9_]*)|(&&|\|\||[&|!~()∧∨¬∀∃.:]))")
_SYMBOLS = {"&&": "&", "∧": "&", "||": "|", "∨": "|", "~": "!", "¬": "!", "∀": "forall", "∃": "exists",
            ":": "."}


def _tokens(text: str) -> list[str]:
    out, pos = [], 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise FormulaSyntaxError(f"unexpected input at {text[pos:pos + 10]!r}")
        tok = m.group(1) or m.group(2)
        out.append(_SYMBOLS.get(tok, tok))
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    return out


class _Parser:
    def __init__(self, toks):
        self.toks, self.i = toks, 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self, want=None):
        tok = self.peek()
        if tok is None or (want is not None and tok != want):
            raise FormulaSyntaxError(f"expected {want or 'a token'}, got {tok}")
        self.i += 1
        return tok

    def disj(self):
        parts = [self.conj()]
        while self.peek() == "|":
            self.take()
            parts.append(self.conj())
        return parts[0] if len(parts) == 1 else POr(tuple(parts))

    def conj(self):
        parts = [self.unary()]
        while self.peek() == "&":
            self.take()
            parts.append(self.unary())
        return parts[0] if len(parts) == 1 else PAnd(tuple(parts))

    def unary(self):
        tok = self.take()
        if tok == "!":
            return PNot(self.unary())
        if tok == "(":
            f = self.disj()
            self.take(")")
            return f
        if re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", tok) and tok not in ("forall", "exists"):
            return PVar(tok)
        raise FormulaSyntaxError(f"unexpected {tok}")


def parse_formula(text: str) -> Formula:
    p = _Parser(_tokens(text))
    f = p.disj()
    if p.peek() is not None:
        raise FormulaSyntaxError(f"trailing input at {p.peek()}")
    return f


def _dimacs(text: str):
    """(quantifier blocks, clauses) of a (Q)DIMACS file with numbered variables."""
    blocks, clauses, seen_p = [], [], False
    for line in text.splitlines():
        parts = line.split()
        if not parts or parts[0] == "c":
            continue
        if parts[0] == "p":
            if len(parts) != 4 or parts[1] != "cnf":
                raise FormulaSyntaxError(f"bad header: {line}")
            seen_p = True
            continue
        if not seen_p:
            raise FormulaSyntaxError("missing p cnf header")
        try:
            if parts[0] in ("a", "e"):
                nums = [int(x) for x in parts[1:]]
                if nums[-1:] != [0] or any(n <= 0 for n in nums[:-1]):
                    raise FormulaSyntaxError(f"bad quantifier line: {line}")
                blocks.append((parts[0], nums[:-1]))
                continue
            nums = [int(x) for x in parts]
        except ValueError:
            raise FormulaSyntaxError(f"bad line: {line}") from None
        if nums[-1:] != [0] or 0 in nums[:-1]:
            raise FormulaSyntaxError(f"clause must end with 0: {line}")
        clauses.append(nums[:-1])
    if not seen_p:
        raise FormulaSyntaxError("missing p cnf header")
    return blocks, clauses


def _is_dimacs(text: str) -> bool:
    return any(line.split()[:1] == ["p"] for line in text.splitlines())


def parse_qbf(text: str) -> Qbf:
    """Text form 'forall x1 exists y1 . matrix' or QDIMACS."""
    if _is_dimacs(text):
        blocks, clauses = _dimacs(text)
        names = {}
        prefix = []
        for q, nums in blocks:
            quant = "forall" if q == "a" else "exists"
            for n in nums:
                names[n] = f"{'x' if q == 'a' else 'y'}{n}"
            if prefix and prefix[-1][0] == quant:
                prefix[-1] = (quant, prefix[-1][1] + tuple(names[n] for n in nums))
            else:
                prefix.append((quant, tuple(names[n] for n in nums)))
        matrix = from_clauses([[(names.get(abs(n), f"x{abs(n)}"), n > 0) for n in c] for c in clauses])
        return Qbf(tuple(prefix), matrix)
    toks = _tokens(text)
    prefix = []
    i = 0
    while i < len(toks) and toks[i] in ("forall", "exists"):
        quant, i = toks[i], i + 1
        vs = []
        while i < len(toks) and toks[i] not in ("forall", "exists", ".", "(", "!"):
            vs.append(toks[i])
            i += 1
        if not vs:
            raise FormulaSyntaxError(f"{quant} without variables")
        if prefix and prefix[-1][0] == quant:
            prefix[-1] = (quant, prefix[-1][1] + tuple(vs))
        else:
            prefix.append((quant, tuple(vs)))
    if prefix:
        if i >= len(toks) or toks[i] != ".":
            raise FormulaSyntaxError("expected '.' after the quantifier prefix")
        i += 1
    p = _Parser(toks[i:])
    matrix = p.disj()
    if p.peek() is not None:
        raise FormulaSyntaxError(f"trailing input at {p.peek()}")
    return Qbf(tuple(prefix), matrix)


def parse_cnf3(text: str) -> Cnf3:
    """DIMACS with exactly three literals per clause, or a text CNF."""
    if _is_dimacs(text):
        blocks, clauses = _dimacs(text)
        if blocks:
            raise FormulaSyntaxError("quantifiers are not allowed in a 3-CNF")
        lits = [[(f"x{abs(n)}", n > 0) for n in c] for c in clauses]
    else:
        lits = cnf_clauses(parse_formula(text))
        if lits is None:
            raise ShapeError("formula is not in CNF")
    names = sorted({name for c in lits for name, _ in c}, key=_natural)
    return Cnf3(tuple(names), tuple(tuple(c) for c in lits))


def _natural(name: str):
    return [int(p) if p.isdigit() else p for p in re.split(r"(\d+)", name)]


def format_qdimacs(phi: Qbf) -> str:
    clauses = phi.clauses
    if clauses is None:
        raise ShapeError("matrix is not in CNF")
    index = {v: i + 1 for i, v in enumerate(phi.variables)}
    for v in sorted(phi.free, key=_natural):
        index[v] = len(index) + 1
    lines = [f"p cnf {len(index)} {len(clauses)}"]
    lines += [f"{'a' if q == 'forall' else 'e'} {' '.join(str(index[v]) for v in vs)} 0" for q, vs in phi.prefix]
    lines += [" ".join(str(index[n] if pos else -index[n]) for n, pos in c) + " 0" for c in clauses]
    return "\n".join(lines) + "\n"


def format_dimacs(psi: Cnf3) -> str:
    index = {v: i + 1 for i, v in enumerate(psi.variables)}
    lines = [f"p cnf {len(index)} {len(psi.clauses)}"]
    lines += [" ".join(str(index[n] if pos else -index[n]) for n, pos in c) + " 0" for c in psi.clauses]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- oracles

MAX_BRUTE_VARS = 16


def brute_force_qbf(phi: Qbf) -> bool:
    """Exhaustive evaluation of the quantifier tree; free variables are existential."""
    order = [(q, v) for q, vs in phi.prefix for v in vs]
    order = [("exists", v) for v in sorted(phi.free, key=_natural)] + order
    if len(order) > MAX_BRUTE_VARS:
        raise ValueError(f"more than {MAX_BRUTE_VARS} variables")

    def go(i, assignment):
        if i == len(order):
            return holds(phi.matrix, assignment)
        q, v = order[i]
        branches = (go(i + 1, {**assignment, v: b}) for b in (False, True))
        return all(branches) if q == "forall" else any(branches)

    return go(0, {})


def brute_force_sat(psi: Union[Cnf3, Formula]) -> bool:
    """Truth-table satisfiability."""
    f = psi.formula if isinstance(psi, Cnf3) else psi
    names = sorted(formula_vars(f), key=_natural)
    if len(names) > MAX_BRUTE_VARS:
        raise ValueError(f"more than {MAX_BRUTE_VARS} variables")
    return any(holds(f, dict(zip(names, bits))) for bits in itertools.product((False, True), repeat=len(names)))


# ---------------------------------------------------------------- encodings

class Encoding(NamedTuple):
    document: Document
    query: object
    target: Mapping


A, TV, TRUE, FALSE = Iri("a"), Iri("tv"), Iri("true"), Iri("false")
ZERO, ONE = Iri("0"), Iri("1")
_RESERVED = re.compile(r"a|tv|true|false|0|1|c|var\d+")

BASE_DOCUMENT = Document([Triple(A, TV, ZERO), Triple(A, TV, ONE), Triple(A, FALSE, ZERO), Triple(A, TRUE, ONE)])


class _Names:
    """SPARQL variables for formula variables plus fresh helper variables."""

    def __init__(self, formula_vars: Iterable[str]):
        self.of = {}
        for v in formula_vars:
            if _RESERVED.fullmatch(v):
                raise ShapeError(f"variable name {v} clashes with a document constant")
            name = v.upper()
            if name in {n.name for n in self.of.values()}:
                raise ShapeError(f"variable names {v} collide after upper-casing")
            self.of[v] = Var(name)
        self.used = {n.name for n in self.of.values()}

    def fresh(self, base: str) -> Var:
        name = base
        while name in self.used:
            name += "_"
        self.used.add(name)
        return Var(name)


def _pat(s, p, o) -> sx.Pattern:
    return sx.Pattern(s, p, o)


def _opt_chain(parts: Sequence) -> sx.Expr:
    out = parts[0]
    for p in parts[1:]:
        out = sx.Opt(out, p)
    return out


def _shape(phi: Qbf):
    """Pairs (X_i, Y_i) of the forall/exists blocks."""
    if not phi.prefix or len(phi.prefix) % 2:
        raise ShapeError("prefix must alternate forall/exists blocks starting with forall and ending with exists")
    pairs = []
    for i in range(0, len(phi.prefix), 2):
        (q1, xs), (q2, ys) = phi.prefix[i], phi.prefix[i + 1]
        if q1 != "forall" or q2 != "exists" or not xs or not ys:
            raise ShapeError("prefix must alternate non-empty forall/exists blocks")
        pairs.append((xs, ys))
    if phi.free:
        raise ShapeError(f"free variables {sorted(phi.free)} in a closed encoding")
    if not formula_vars(phi.matrix):
        raise ShapeError("matrix has no variables")
    return pairs


class _Shell:
    """The nested Opt tower that simulates the quantifier prefix."""

    def __init__(self, pairs, names: _Names):
        self.pairs = pairs
        self.names = names
        m = len(pairs)
        self.A = [names.fresh(f"A{i}") for i in range(m + 1)]
        self.B = [names.fresh(f"B{i}") for i in range(m + 1)]

    def _tv(self, vs):
        return [_pat(A, TV, self.names.of[v]) for v in vs]

    def parts(self, i: int, kind: str):
        """Patterns of P_i (kind 'P') or Q_i (kind 'Q'), 1-based i."""
        xs = [v for k in range(i) for v in self.pairs[k][0]]
        ys = [v for k in range(i if kind == "Q" else i - 1) for v in self.pairs[k][1]]
        flag = self.A if kind == "P" else self.B
        return self._tv(xs) + self._tv(ys) + [_pat(A, FALSE, flag[i - 1]), _pat(A, TRUE, flag[i])]

    def wrap(self, innermost, combine) -> sx.Expr:
        """B0 Opt (P_1 Opt (Q_1 Opt ... (innermost))) with innermost replacing P_m's subtree."""
        m = len(self.pairs)
        inner = innermost
        for i in range(m - 1, 0, -1):
            inner = sx.Opt(combine(self.parts(i, "P")), sx.Opt(combine(self.parts(i, "Q")), inner))
        return sx.Opt(_pat(A, TRUE, self.B[0]), inner)

    def target(self) -> Mapping:
        return Mapping({self.B[0]: ONE})


def _condition(f: Formula, names: _Names) -> sx.Condition:
    if isinstance(f, PVar):
        return sx.EqConst(names.of[f.name], ONE)
    if isinstance(f, PNot):
        return sx.Not(_condition(f.arg, names))
    conds = [_condition(a, names) for a in f.args]
    kind = sx.CondAnd if isinstance(f, PAnd) else sx.CondOr
    out = conds[0]
    for c in conds[1:]:
        out = kind(out, c)
    return out


def encode_qbf_afo(phi: Qbf) -> Encoding:
    """And/Filter/Opt encoding of a QBF with an arbitrary matrix."""
    pairs = _shape(phi)
    names = _Names(phi.variables)
    shell = _Shell(pairs, names)
    matrix_vars = [v for v in phi.variables if v in formula_vars(phi.matrix)]
    p_psi = sx.Filter(sx.conjunction(_pat(A, TV, names.of[v]) for v in matrix_vars), _condition(phi.matrix, names))
    m = len(pairs)
    inner = sx.Opt(sx.conjunction(shell.parts(m, "P")), sx.And(sx.conjunction(shell.parts(m, "Q")), p_psi))
    return Encoding(BASE_DOCUMENT, shell.wrap(inner, sx.conjunction), shell.target())


def _normal_clauses(phi: Qbf):
    """CNF clauses with duplicate literals merged and tautologies dropped."""
    clauses = phi.clauses
    if clauses is None:
        raise ShapeError("matrix is not in CNF")
    if not clauses or not all(clauses):
        raise ShapeError("CNF matrix needs at least one clause and no empty clause")
    out = []
    for c in clauses:
        lits = tuple(dict.fromkeys(c))
        if any((n, not pos) in lits for n, pos in lits):
            continue
        out.append(tuple(sorted(lits, key=lambda lit: not lit[1])))
    return out


def _clause_document(clauses) -> Document:
    triples = set(BASE_DOCUMENT)
    for i, c in enumerate(clauses, 1):
        for name, _ in c:
            triples.add(Triple(A, Iri(f"var{i}"), Iri(name)))
            triples.add(Triple(A, Iri(name), Iri(name)))
    return Document(triples)


def _clause_exprs(clauses, names: _Names, inner):
    out = []
    for i, c in enumerate(clauses, 1):
        var = names.fresh(f"var{i}")
        parts = [_pat(A, Iri(f"var{i}"), var)]
        for name, pos in c:
            parts.append(inner(_pat(A, Iri(name), var), _pat(A, TRUE if pos else FALSE, names.of[name])))
        out.append(_opt_chain(parts))
    return out


def encode_cnf_matrix(phi: Qbf, fragment: str = "ao") -> tuple[Document, sx.Expr]:
    """Document and clause conjunction for the CNF matrix alone; fragment 'ao' or 'o'."""
    clauses = _normal_clauses(phi)
    if not clauses:
        raise ShapeError("every clause is a tautology")
    names = _Names(phi.variables + tuple(sorted(phi.free, key=_natural)))
    inner = {"ao": sx.And, "o": sx.Opt}[fragment]
    return _clause_document(clauses), sx.conjunction(_clause_exprs(clauses, names, inner))


def encode_qbf_ao(phi: Qbf) -> Encoding:
    """And/Opt encoding of a QBF with a CNF matrix."""
    pairs = _shape(phi)
    clauses = _normal_clauses(phi)
    names = _Names(phi.variables)
    shell = _Shell(pairs, names)
    m = len(pairs)
    q_m = sx.conjunction(shell.parts(m, "Q"))
    body = sx.conjunction([q_m] + _clause_exprs(clauses, names, sx.And))
    inner = sx.Opt(sx.conjunction(shell.parts(m, "P")), body)
    return Encoding(_clause_document(clauses), shell.wrap(inner, sx.conjunction), shell.target())


@dataclass(frozen=True)
class AndRewriting:
    """Both sides of the Opt-only replacement for Q Opt (Q1 And ... And Qn)."""
    q_prime: sx.Expr
    left: sx.Expr
    right: sx.Expr
    fresh: tuple


def and_rewriting(q: sx.Expr, qs: Sequence[sx.Expr], fresh: Sequence[Var] | None = None) -> AndRewriting:
    """Replace the And-chain on the right of an Opt by Opt operators and fresh flag variables.

    Equal on BASE_DOCUMENT for any expressions whose variables avoid the flags.
    """
    qs = list(qs)
    n = len(qs)
    if n < 2:
        raise ValueError("need at least two conjuncts")
    used = set(q.vars).union(*(e.vars for e in qs))
    if fresh is None:
        names = _Names([])
        names.used |= {v.name for v in used}
        fresh = [names.fresh(f"V{i}") for i in range(2, n + 1)]
    fresh = tuple(fresh)
    if len(fresh) != n - 1 or set(fresh) & used:
        raise ValueError("need n-1 fresh variables disjoint from the expressions")
    flags = [_pat(A, TRUE, v) for v in fresh]
    unflags = [_pat(A, FALSE, v) for v in fresh]
    q_prime = _opt_chain([q] + flags)
    q_second = _opt_chain([qs[0]] + [sx.Opt(e, f) for e, f in zip(qs[1:], flags)])
    right = sx.Opt(q_prime, _opt_chain([q_second] + unflags))
    left = sx.Opt(q_prime, sx.conjunction(qs))
    return AndRewriting(q_prime, left, right, fresh)


def encode_qbf_o(phi: Qbf) -> Encoding:
    """Opt-only encoding of a QBF with a CNF matrix."""
    pairs = _shape(phi)
    clauses = _normal_clauses(phi)
    names = _Names(phi.variables)
    shell = _Shell(pairs, names)
    m = len(pairs)
    p_m = _opt_chain(shell.parts(m, "P"))
    q_m = _opt_chain(shell.parts(m, "Q"))
    clause_exprs = _clause_exprs(clauses, names, sx.Opt)
    if clause_exprs:
        fresh = [names.fresh(f"V{i}") for i in range(2, len(clause_exprs) + 2)]
        inner = and_rewriting(p_m, [q_m] + clause_exprs, fresh).right
    else:
        inner = sx.Opt(p_m, q_m)
    return Encoding(_clause_document(clauses), shell.wrap(inner, _opt_chain), shell.target())


SAT_DOCUMENT = Document(
    [Triple(Iri(s), Iri(p), Iri(o)) for s, p, o in itertools.product("01", repeat=3) if "1" in (s, p, o)]
    + [Triple(ZERO, Iri("c"), ONE), Triple(ONE, Iri("c"), ZERO)])


def encode_3sat(psi: Cnf3) -> Encoding:
    """Projected And-only query whose answer contains {?A -> 1} iff psi is satisfiable."""
    if not psi.clauses:
        raise ShapeError("no clauses")
    used = [v for v in psi.variables if any(v == n for c in psi.clauses for n, _ in c)]
    names = _Names(used)
    bar = {v: names.fresh(f"{names.of[v].name}bar") for v in used}
    answer = names.fresh("A")

    def term(name, pos):
        return names.of[name] if pos else bar[name]

    parts = [_pat(*(term(*lit) for lit in c)) for c in psi.clauses]
    parts += [_pat(names.of[v], Iri("c"), bar[v]) for v in used]
    parts.append(_pat(ZERO, Iri("c"), answer))
    return Encoding(SAT_DOCUMENT, sx.Query([answer], sx.conjunction(parts)), Mapping({answer: ONE}))


ENCODERS = {"afo": encode_qbf_afo, "ao": encode_qbf_ao, "o": encode_qbf_o}


def decide(encoding: Encoding) -> bool:
    return encoding.target in evaluate(encoding.query, encoding.document)


# ---------------------------------------------------------------- generators

def random_cnf_qbf(rng: random.Random, max_pairs: int = 2, max_vars: int = 4, max_clauses: int = 4,
                   max_width: int = 3) -> Qbf:
    """Random closed forall/exists QBF with a CNF matrix."""
    m = rng.randint(1, max_pairs)
    n = rng.randint(2 * m, max(2 * m, max_vars))
    sizes = [1] * (2 * m)
    for _ in range(n - 2 * m):
        sizes[rng.randrange(2 * m)] += 1
    prefix, k = [], 0
    for i, size in enumerate(sizes):
        quant = "forall" if i % 2 == 0 else "exists"
        letter = "x" if quant == "forall" else "y"
        prefix.append((quant, tuple(f"{letter}{k + j + 1}" for j in range(size))))
        k += size
    names = [v for _, vs in prefix for v in vs]
    clauses = [[(rng.choice(names), rng.random() < 0.5) for _ in range(rng.randint(1, max_width))]
               for _ in range(rng.randint(1, max_clauses))]
    return Qbf(tuple(prefix), from_clauses(clauses))


def random_3cnf(rng: random.Random, n_vars: int = 4, max_clauses: int = 4) -> Cnf3:
    """Random 3-CNF; literals come from a random prefix of the variables so small pools repeat."""
    names = tuple(f"x{i}" for i in range(1, n_vars + 1))
    pool = names[:rng.randint(1, n_vars)]
    clauses = [tuple((rng.choice(pool), rng.random() < 0.5) for _ in range(3))
               for _ in range(rng.randint(1, max_clauses))]
    return Cnf3(names, tuple(clauses))
