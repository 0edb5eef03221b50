"""RDF terms, triples and documents with a line-based text format."""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Union


class DocumentError(ValueError):
    """Raised on malformed document text or ill-kinded triples."""


@dataclass(frozen=True, order=True)
class Iri:
    value: str

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True, order=True)
class Literal:
    value: str

    def __str__(self) -> str:
        escaped = self.value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'


@dataclass(frozen=True, order=True)
class Blank:
    value: str

    def __str__(self) -> str:
        return f"_:{self.value}"


@dataclass(frozen=True, order=True)
class Var:
    name: str

    def __str__(self) -> str:
        return f"?{self.name}"


Term = Union[Iri, Literal, Blank, Var]
Constant = Union[Iri, Literal, Blank]

_KIND_RANK = {Iri: 0, Literal: 1, Blank: 2, Var: 3}


def term_key(t) -> tuple:
    """Total order over terms of mixed kinds."""
    return (_KIND_RANK.get(type(t), 4), str(t))


def is_constant(t) -> bool:
    return isinstance(t, (Iri, Literal, Blank))


_BARE = re.compile(r"[^\s,()'\"?{}]+")
TOKEN = re.compile(
    r"""\s*(?:
        (?P<dq>"(?:[^"\\]|\\.)*")
      | (?P<sq>'(?:[^'\\]|\\.)*')
      | (?P<var>\?[A-Za-z0-9_]+)
      | (?P<blank>_:[^\s,()'"]+)
      | (?P<bare>[^\s,()'"?{}=!&|<>-][^\s,()'"{}=!&|<>]*)
    )""",
    re.VERBOSE,
)


def _unescape(body: str) -> str:
    return re.sub(r"\\(.)", r"\1", body)


def parse_term(text: str) -> Term:
    """Parse a single term token."""
    m = TOKEN.fullmatch(text.strip())
    if not m:
        raise DocumentError(f"not a term: {text!r}")
    return term_from_match(m)


def term_from_match(m: re.Match) -> Term:
    if m.group("dq") is not None:
        return Literal(_unescape(m.group("dq")[1:-1]))
    if m.group("sq") is not None:
        return Literal(_unescape(m.group("sq")[1:-1]))
    if m.group("var") is not None:
        return Var(m.group("var")[1:])
    if m.group("blank") is not None:
        return Blank(m.group("blank")[2:])
    return Iri(m.group("bare"))


@dataclass(frozen=True)
class Triple:
    subject: Constant
    predicate: Iri
    object: Constant

    def __post_init__(self):
        if not isinstance(self.subject, (Iri, Blank)):
            raise DocumentError(f"subject must be an IRI or blank node: {self}")
        if not isinstance(self.predicate, Iri):
            raise DocumentError(f"predicate must be an IRI: {self}")
        if not is_constant(self.object):
            raise DocumentError(f"object must be an IRI, blank node or literal: {self}")

    def __iter__(self) -> Iterator[Term]:
        return iter((self.subject, self.predicate, self.object))

    def __str__(self) -> str:
        return f"({self.subject}, {self.predicate}, {self.object})"

    def sort_key(self) -> tuple:
        return tuple(term_key(t) for t in self)


@dataclass(frozen=True)
class Document:
    triples: frozenset

    def __init__(self, triples: Iterable[Triple] = ()):
        object.__setattr__(self, "triples", frozenset(triples))

    def __iter__(self) -> Iterator[Triple]:
        return iter(self.triples)

    def __len__(self) -> int:
        return len(self.triples)

    def __contains__(self, t) -> bool:
        return t in self.triples

    def sorted(self) -> list[Triple]:
        return sorted(self.triples, key=Triple.sort_key)


_LINE = re.compile(r"\(\s*(.*)\s*\)")


def split_terms(inner: str) -> list[Term]:
    """Split the inside of a parenthesised triple into its terms."""
    terms: list[Term] = []
    pos = 0
    while True:
        m = TOKEN.match(inner, pos)
        if not m or m.end() == pos:
            raise DocumentError(f"cannot read term at {inner[pos:]!r}")
        terms.append(term_from_match(m))
        pos = m.end()
        rest = inner[pos:].lstrip()
        if not rest:
            return terms
        if not rest.startswith(","):
            raise DocumentError(f"expected ',' at {rest!r}")
        pos = len(inner) - len(rest) + 1


def parse_document(text: str) -> Document:
    triples = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _LINE.fullmatch(line)
        if not m:
            raise DocumentError(f"line {lineno}: expected '(s, p, o)', got {line!r}")
        try:
            terms = split_terms(m.group(1))
            if len(terms) != 3:
                raise DocumentError(f"expected three terms, got {len(terms)}")
            if any(isinstance(t, Var) for t in terms):
                raise DocumentError("variables are not allowed in documents")
            triples.append(Triple(*terms))
        except DocumentError as exc:
            raise DocumentError(f"line {lineno}: {exc}") from None
    return Document(triples)


def serialize_document(d: Document) -> str:
    return "".join(f"{t}\n" for t in d.sorted())
