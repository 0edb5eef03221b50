"""The chase over instances with labelled nulls, universal plans and Chase & Backchase."""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

from .cq import (
    CQ, EGD, TGD, Atom, Constraint, FactIndex, Null, all_positions, atom_vars, equivalent,
    find_homomorphism, homomorphisms, isomorphic, match_atom, value_key,
)
from .rdf import Var
from .syntax import sort_vars

DEFAULT_SAFETY_FACTOR = 4
DEFAULT_ATOM_CAP = 20


class ChaseError(ValueError):
    """Raised when a chase step is requested on an inapplicable trigger."""


class Instance:
    """A set of facts over constants and labelled nulls, in insertion order."""

    def __init__(self, facts: Iterable[Atom] = ()):
        self.facts: dict[Atom, None] = dict.fromkeys(facts)
        self.index = FactIndex(self.facts)
        self.log: list[Atom] = list(self.facts)
        self.epoch = 0
        ids = [v.id for a in self.facts for v in a.args if isinstance(v, Null)]
        self._next = max(ids, default=0) + 1
        for a in self.facts:
            if any(isinstance(v, Var) for v in a.args):
                raise ValueError(f"instance fact {a} contains a variable")

    def fresh(self) -> Null:
        n = Null(self._next)
        self._next += 1
        return n

    def dom(self) -> frozenset:
        return frozenset(v for a in self.facts for v in a.args)

    def nulls(self) -> frozenset:
        return frozenset(v for v in self.dom() if isinstance(v, Null))

    def copy(self) -> "Instance":
        other = Instance()
        other.facts = dict(self.facts)
        other.index = FactIndex(other.facts)
        other.log = list(other.facts)
        other._next = self._next
        return other

    def add(self, atom: Atom) -> bool:
        if atom in self.facts:
            return False
        self.facts[atom] = None
        self.index.add(atom)
        self.log.append(atom)
        return True

    def substitute(self, old, new) -> None:
        self.facts = dict.fromkeys(a.map({old: new}) for a in self.facts)
        self.index = FactIndex(self.facts)
        self.log = list(self.facts)
        self.epoch += 1

    def __iter__(self):
        return iter(self.facts)

    def __len__(self) -> int:
        return len(self.facts)

    def __contains__(self, atom) -> bool:
        return atom in self.facts

    def __eq__(self, other) -> bool:
        return isinstance(other, Instance) and set(self.facts) == set(other.facts)

    def sorted(self) -> list[Atom]:
        return sorted(self.facts, key=Atom.sort_key)

    def __str__(self) -> str:
        return "{" + ", ".join(map(str, self.sorted())) + "}"

    __repr__ = __str__


# --------------------------------------------------------------- single steps

def satisfied(facts: Iterable[Atom] | FactIndex, c: Constraint, h: dict) -> bool:
    """Does the body match ``h`` already have its head satisfied?"""
    if isinstance(c, EGD):
        return h[c.left] == h[c.right]
    fixed = {v: h[v] for v in c.frontier}
    return find_homomorphism(c.head, facts, fixed) is not None


def is_applicable(inst: Instance, c: Constraint, h: dict) -> bool:
    if any(a.map(h) not in inst.facts for a in c.body):
        return False
    return not satisfied(inst.index, c, h)


def triggers(inst: Instance, c: Constraint, since: int = 0) -> list[dict]:
    """Active triggers of c on inst in lexicographic order of their images.

    With ``since > 0`` only body matches using a fact from ``inst.log[since:]``
    are considered.
    """
    order = sort_vars(c.universals)
    if since <= 0:
        matches = homomorphisms(c.body, inst.index)
    else:
        matches = _delta_matches(inst, c, inst.log[since:])
    found = {}
    for h in matches:
        key = tuple(value_key(h[v]) for v in order)
        if key not in found and not satisfied(inst.index, c, h):
            found[key] = h
    return [found[k] for k in sorted(found)]


def _delta_matches(inst: Instance, c: Constraint, delta: list[Atom]):
    for i, atom in enumerate(c.body):
        rest = c.body[:i] + c.body[i + 1:]
        for fact in delta:
            h = match_atom(atom, fact)
            if h is not None:
                yield from homomorphisms(rest, inst.index, h)


def models(facts: Iterable[Atom], sigma: Iterable[Constraint]) -> bool:
    index = FactIndex(facts)
    return all(satisfied(index, c, h) for c in sigma for h in homomorphisms(c.body, index))


def _fire_tgd(inst: Instance, c: TGD, h: dict) -> list[Atom]:
    nu = dict(h)
    for y in sort_vars(c.existentials):
        nu[y] = inst.fresh()
    return [a for a in (atom.map(nu) for atom in c.head) if inst.add(a)]


def _merge_direction(a, b, keep: frozenset):
    """Return (old, new) so that ``old`` is replaced by ``new``; None on a clash."""
    if isinstance(b, Null) and isinstance(a, Null) and b in keep and a not in keep:
        return a, b
    if isinstance(b, Null):
        return b, a
    if isinstance(a, Null):
        return a, b
    return None


def tgd_step(inst: Instance, c: TGD, h: dict) -> Instance:
    """Apply TGD c at trigger h, returning a new instance."""
    if not is_applicable(inst, c, h):
        raise ChaseError(f"{c} is not applicable at {_fmt(h)}")
    out = inst.copy()
    _fire_tgd(out, c, h)
    return out


@dataclass(frozen=True)
class StepFailure:
    clash: tuple

    def __bool__(self) -> bool:
        return False


def egd_step(inst: Instance, c: EGD, h: dict, keep: frozenset = frozenset()) -> Instance | StepFailure:
    """Apply EGD c at trigger h; values in ``keep`` survive a null/null merge."""
    if not is_applicable(inst, c, h):
        raise ChaseError(f"{c} is not applicable at {_fmt(h)}")
    direction = _merge_direction(h[c.left], h[c.right], keep)
    if direction is None:
        return StepFailure((h[c.left], h[c.right]))
    out = inst.copy()
    out.substitute(*direction)
    return out


# --------------------------------------------------------------------- chase

@dataclass
class TraceStep:
    index: int
    constraint: int
    assignment: dict
    added: list = field(default_factory=list)
    merged: Optional[tuple] = None
    failed: Optional[tuple] = None

    def __str__(self) -> str:
        if self.failed:
            effect = f"FAIL {self.failed[0]} != {self.failed[1]}"
        elif self.merged:
            effect = f"merge {self.merged[0]} := {self.merged[1]}"
        else:
            effect = "add " + ", ".join(map(str, self.added))
        return f"{self.index}: c{self.constraint + 1} {_fmt(self.assignment)} {effect}"


def _fmt(h: dict) -> str:
    return "{" + ", ".join(f"{k} -> {h[k]}" for k in sort_vars(k for k in h if isinstance(k, Var))) + "}"


@dataclass
class _Outcome:
    steps: int
    substitution: dict
    trace: list

    def resolve(self, v):
        return self.substitution.get(v, v)


@dataclass
class Terminated(_Outcome):
    instance: Instance = None

    def __str__(self) -> str:
        return f"terminated after {self.steps} steps"


@dataclass
class Failed(_Outcome):
    clash: tuple = ()

    def __str__(self) -> str:
        return f"failed after {self.steps} steps: {self.clash[0]} != {self.clash[1]}"


@dataclass
class BudgetExceeded(_Outcome):
    instance: Instance = None
    budget: int = 0

    def __str__(self) -> str:
        return f"budget of {self.budget} steps exceeded"


ChaseOutcome = Union[Terminated, Failed, BudgetExceeded]


def default_budget(inst: Instance, sigma: Sequence[Constraint], factor: int = DEFAULT_SAFETY_FACTOR) -> int:
    n = len(inst.dom())
    p = len(all_positions(sigma))
    return max(10_000, factor * n ** (p + 1))


def chase(inst: Instance | Iterable[Atom], sigma: Sequence[Constraint], budget: Optional[int] = None,
          order: str | random.Random = "lex", trace: bool = False) -> ChaseOutcome:
    """Chase a copy of ``inst`` with ``sigma``.

    Rounds visit the constraints in turn and fire every trigger that is still
    active.  ``order`` is ``"lex"``, ``"reverse"`` or a ``random.Random`` used
    to shuffle constraints and triggers.
    """
    inst = inst.copy() if isinstance(inst, Instance) else Instance(inst)
    sigma = list(sigma)
    if budget is None:
        budget = default_budget(inst, sigma)
    if budget < 0:
        raise ValueError("budget must be non-negative")
    keep = inst.nulls()
    subst: dict = {}
    log: list[TraceStep] = []
    steps = 0

    def done(cls, **kw):
        return cls(steps=steps, substitution=subst, trace=log, **kw)

    marks = [(-1, 0)] * len(sigma)
    indices = list(range(len(sigma)))
    if order == "reverse":
        indices.reverse()
    while True:
        fired = False
        if isinstance(order, random.Random):
            order.shuffle(indices)
        for ci in indices:
            c = sigma[ci]
            epoch, seen = marks[ci]
            active = triggers(inst, c, seen if epoch == inst.epoch else 0)
            marks[ci] = (inst.epoch, len(inst.log))
            if order == "reverse":
                active.reverse()
            elif isinstance(order, random.Random):
                order.shuffle(active)
            for h in active:
                h = {k: subst.get(v, v) for k, v in h.items()}
                if not is_applicable(inst, c, h):
                    continue
                if steps >= budget:
                    return done(BudgetExceeded, instance=inst, budget=budget)
                steps += 1
                fired = True
                if isinstance(c, TGD):
                    added = _fire_tgd(inst, c, h)
                    if trace:
                        log.append(TraceStep(steps, ci, h, added=added))
                    continue
                direction = _merge_direction(h[c.left], h[c.right], keep)
                if direction is None:
                    if trace:
                        log.append(TraceStep(steps, ci, h, failed=(h[c.left], h[c.right])))
                    return done(Failed, clash=(h[c.left], h[c.right]))
                old, new = direction
                inst.substitute(old, new)
                for k, v in subst.items():
                    if v == old:
                        subst[k] = new
                subst[old] = new
                if trace:
                    log.append(TraceStep(steps, ci, h, merged=(old, new)))
        if not fired:
            return done(Terminated, instance=inst)


# -------------------------------------------------------------- query level

@dataclass(frozen=True)
class Unknown:
    reason: str

    def __bool__(self) -> bool:
        return False

    def __str__(self) -> str:
        return f"unknown: {self.reason}"


@dataclass(frozen=True)
class Unsatisfiable:
    """The chase of the query body failed: no Σ-model contains a match."""

    clash: tuple

    def __bool__(self) -> bool:
        return False

    def __str__(self) -> str:
        return f"unsatisfiable: {self.clash[0]} != {self.clash[1]}"


def _unfreeze(facts: Iterable[Atom], names: dict) -> list[Atom]:
    used = {v.name for v in names.values()}
    mapping = dict(names)
    counter = itertools.count(1)
    out = []
    for a in facts:
        for v in a.args:
            if isinstance(v, Null) and v not in mapping:
                name = next(f"n{i}" for i in counter if f"n{i}" not in used)
                used.add(name)
                mapping[v] = Var(name)
        out.append(a.map(mapping))
    return out


def universal_plan(q: CQ, sigma: Sequence[Constraint], budget: Optional[int] = None) -> CQ | Unknown | Unsatisfiable:
    """Chase the body of q; chase-introduced nulls become fresh variables."""
    from .cq import freeze

    facts, nulls = freeze(q)
    outcome = chase(Instance(facts), sigma, budget=budget)
    if isinstance(outcome, Failed):
        return Unsatisfiable(outcome.clash)
    if isinstance(outcome, BudgetExceeded):
        return Unknown(str(outcome))
    names = {}
    for v, n in nulls.items():
        r = outcome.resolve(n)
        if isinstance(r, Null):
            names.setdefault(r, v)
    head = []
    for v in q.head:
        r = outcome.resolve(nulls[v]) if v in nulls else v
        head.append(names[r] if isinstance(r, Null) else r)
    return CQ(head, _unfreeze(outcome.instance.facts, names))


@dataclass
class BackchaseResult:
    plan: CQ
    rewrites: list
    checked: int

    def __iter__(self):
        return iter(self.rewrites)

    def __len__(self) -> int:
        return len(self.rewrites)


def cb(q: CQ, sigma: Sequence[Constraint], budget: Optional[int] = None,
       max_atoms: int = DEFAULT_ATOM_CAP) -> BackchaseResult | Unknown | Unsatisfiable:
    """Chase & Backchase: minimal Σ-equivalent sub-queries of the universal plan."""
    plan = universal_plan(q, sigma, budget)
    if not isinstance(plan, CQ):
        return plan
    atoms = list(dict.fromkeys(plan.body))
    if len(atoms) > max_atoms:
        return Unknown(f"universal plan has {len(atoms)} atoms, above the cap of {max_atoms}")
    need = {v for v in plan.head if isinstance(v, Var)}
    checked = 0
    for k in range(1, len(atoms) + 1):
        found: list[CQ] = []
        for subset in itertools.combinations(atoms, k):
            if not need <= atom_vars(subset):
                continue
            cand = CQ(plan.head, subset)
            if any(isomorphic(cand, f) for f in found):
                continue
            checked += 1
            verdict = equivalent(cand, q, sigma, budget)
            if verdict.holds is None:
                return Unknown(verdict.reason)
            if verdict.holds:
                found.append(cand)
        if found:
            return BackchaseResult(plan, found, checked)
    return BackchaseResult(plan, [], checked)
