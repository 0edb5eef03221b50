"""Algebraic equivalence rules, single-site application and rewrite strategies."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterator, NamedTuple, Optional

from .algebra import (
    EMPTY, EmptySet, Join, LeftJoin, Leaf, Minus, Project, Select, Union, with_children,
)
from .rdf import term_key
from .syntax import Bound, CondAnd, CondOr, EqConst, EqVar, Not, condition_vars


class RewriteError(ValueError):
    pass


class RuleId(str, Enum):
    UIdem = "UIdem"
    JIdem = "JIdem"
    LIdem = "LIdem"
    Inv = "Inv"
    UAss = "UAss"
    JAss = "JAss"
    UComm = "UComm"
    JComm = "JComm"
    JUDistR = "JUDistR"
    JUDistL = "JUDistL"
    MUDistR = "MUDistR"
    LUDistR = "LUDistR"
    SUPush = "SUPush"
    SDecompI = "SDecompI"
    SDecompII = "SDecompII"
    SReord = "SReord"
    BndI = "BndI"
    BndII = "BndII"
    BndIII = "BndIII"
    BndIV = "BndIV"
    BndV = "BndV"
    SJPush = "SJPush"
    SMPush = "SMPush"
    SLPush = "SLPush"
    MReord = "MReord"
    MMUCorr = "MMUCorr"
    MJ = "MJ"
    LJ = "LJ"
    NegBndMinus = "NegBndMinus"
    WeakFilterPush = "WeakFilterPush"

    def __str__(self):
        return self.value


LR, RL = "lr", "rl"
Rewriter = Callable[[object], Optional[object]]


def _is(node, cls, left=None, right=None) -> bool:
    if type(node) is not cls:
        return False
    return (left is None or type(node.left) is left) and (right is None or type(node.right) is right)


def _fresh_choice(candidates):
    return min(candidates, key=term_key) if candidates else None


def _equalities_only(c) -> bool:
    if isinstance(c, (EqConst, EqVar)):
        return True
    if isinstance(c, CondAnd):
        return _equalities_only(c.left) and _equalities_only(c.right)
    return False


# ---- group I

def _uidem_lr(n):
    return n.left if _is(n, Union) and n.left == n.right else None


def _uidem_rl(n):
    return Union(n, n)


def _idem_lr(cls):
    def f(n):
        return n.left if _is(n, cls) and n.left == n.right and n.left.minus_fragment else None
    return f


def _idem_rl(cls):
    def f(n):
        return cls(n, n) if n.minus_fragment else None
    return f


def _inv_lr(n):
    return EMPTY if _is(n, Minus) and n.left == n.right else None


# ---- group II and III

def _assoc_lr(cls):
    def f(n):
        if _is(n, cls, left=cls):
            return cls(n.left.left, cls(n.left.right, n.right))
        return None
    return f


def _assoc_rl(cls):
    def f(n):
        if _is(n, cls, right=cls):
            return cls(cls(n.left, n.right.left), n.right.right)
        return None
    return f


def _comm(cls):
    def f(n):
        return cls(n.right, n.left) if _is(n, cls) else None
    return f


# ---- group IV

def _dist_right_lr(op):
    def f(n):
        if _is(n, op, left=Union):
            return Union(op(n.left.left, n.right), op(n.left.right, n.right))
        return None
    return f


def _dist_right_rl(op):
    def f(n):
        if _is(n, Union, left=op, right=op) and n.left.right == n.right.right:
            return op(Union(n.left.left, n.right.left), n.left.right)
        return None
    return f


def _judistl_lr(n):
    if _is(n, Join, right=Union):
        return Union(Join(n.left, n.right.left), Join(n.left, n.right.right))
    return None


def _judistl_rl(n):
    if _is(n, Union, left=Join, right=Join) and n.left.left == n.right.left:
        return Join(n.left.left, Union(n.left.right, n.right.right))
    return None


# ---- group V

def _supush_lr(n):
    if type(n) is Select and type(n.child) is Union:
        return Union(Select(n.cond, n.child.left), Select(n.cond, n.child.right))
    return None


def _supush_rl(n):
    if _is(n, Union, Select, Select) and n.left.cond == n.right.cond:
        return Select(n.left.cond, Union(n.left.child, n.right.child))
    return None


def _sdecomp1_lr(n):
    if type(n) is Select and isinstance(n.cond, CondAnd):
        return Select(n.cond.left, Select(n.cond.right, n.child))
    return None


def _sdecomp1_rl(n):
    if type(n) is Select and type(n.child) is Select:
        return Select(CondAnd(n.cond, n.child.cond), n.child.child)
    return None


def _sdecomp2_lr(n):
    if type(n) is Select and isinstance(n.cond, CondOr):
        return Union(Select(n.cond.left, n.child), Select(n.cond.right, n.child))
    return None


def _sdecomp2_rl(n):
    if _is(n, Union, Select, Select) and n.left.child == n.right.child:
        return Select(CondOr(n.left.cond, n.right.cond), n.left.child)
    return None


def _sreord(n):
    if type(n) is Select and type(n.child) is Select:
        return Select(n.child.cond, Select(n.cond, n.child.child))
    return None


def _bnd_var(n, negated: bool):
    if type(n) is not Select:
        return None
    c = n.cond
    if negated:
        if isinstance(c, Not) and isinstance(c.arg, Bound):
            return c.arg.var
        return None
    return c.var if isinstance(c, Bound) else None


def _bnd1(n):
    x = _bnd_var(n, False)
    return n.child if x is not None and x in n.child.safe else None


def _bnd2(n):
    x = _bnd_var(n, False)
    return EMPTY if x is not None and x not in n.child.vars else None


def _bnd3(n):
    x = _bnd_var(n, True)
    return EMPTY if x is not None and x in n.child.safe else None


def _bnd4(n):
    x = _bnd_var(n, True)
    return n.child if x is not None and x not in n.child.vars else None


def _bnd5_lr(n):
    x = _bnd_var(n, False)
    if x is not None and type(n.child) is LeftJoin:
        a1, a2 = n.child.left, n.child.right
        if x in a2.safe and x not in a1.vars:
            return Join(a1, a2)
    return None


def _bnd5_rl(n):
    if _is(n, Join):
        x = _fresh_choice(n.right.safe - n.left.vars)
        if x is not None:
            return Select(Bound(x), LeftJoin(n.left, n.right))
    return None


# ---- group VI and the weak variant

def _push_lr(op, ok):
    def f(n):
        if type(n) is Select and type(n.child) is op and ok(n.cond, n.child.left, n.child.right):
            return op(Select(n.cond, n.child.left), n.child.right)
        return None
    return f


def _push_rl(op, ok):
    def f(n):
        if _is(n, op, left=Select) and ok(n.left.cond, n.left.child, n.right):
            return Select(n.left.cond, op(n.left.child, n.right))
        return None
    return f


def _strong(cond, a1, a2) -> bool:
    return condition_vars(cond) <= a1.safe


def _weak(cond, a1, a2) -> bool:
    rv = condition_vars(cond)
    return _equalities_only(cond) and rv <= a1.vars and (a2.vars & rv) <= a1.safe


def _any_of(*fs):
    def f(n):
        for g in fs:
            out = g(n)
            if out is not None:
                return out
        return None
    return f


# ---- minus and negation rules

def _mreord(n):
    if _is(n, Minus, left=Minus):
        return Minus(Minus(n.left.left, n.right), n.left.right)
    return None


def _mmucorr_lr(n):
    if _is(n, Minus, left=Minus):
        return Minus(n.left.left, Union(n.left.right, n.right))
    return None


def _mmucorr_rl(n):
    if _is(n, Minus, right=Union):
        return Minus(Minus(n.left, n.right.left), n.right.right)
    return None


def _mj_lr(n):
    return Minus(n.left, Join(n.left, n.right)) if _is(n, Minus) else None


def _mj_rl(n):
    if _is(n, Minus, right=Join) and n.right.left == n.left:
        return Minus(n.left, n.right.right)
    return None


def _lj_lr(n):
    if _is(n, LeftJoin) and n.left.minus_fragment and n.right.minus_fragment:
        return LeftJoin(n.left, Join(n.left, n.right))
    return None


def _lj_rl(n):
    if _is(n, LeftJoin, right=Join) and n.right.left == n.left:
        if n.left.minus_fragment and n.right.right.minus_fragment:
            return LeftJoin(n.left, n.right.right)
    return None


def _negbnd_lr(n):
    x = _bnd_var(n, True)
    if x is not None and type(n.child) is LeftJoin:
        a1, a2 = n.child.left, n.child.right
        if a1.minus_fragment and a2.minus_fragment and x in a2.safe and x not in a1.vars:
            return Minus(a1, a2)
    return None


def _negbnd_rl(n):
    if _is(n, Minus) and n.left.minus_fragment and n.right.minus_fragment:
        x = _fresh_choice(n.right.safe - n.left.vars)
        if x is not None:
            return Select(Not(Bound(x)), LeftJoin(n.left, n.right))
    return None


def _none(n):
    return None


RULES: dict[RuleId, dict[str, Rewriter]] = {
    RuleId.UIdem: {LR: _uidem_lr, RL: _uidem_rl},
    RuleId.JIdem: {LR: _idem_lr(Join), RL: _idem_rl(Join)},
    RuleId.LIdem: {LR: _idem_lr(LeftJoin), RL: _idem_rl(LeftJoin)},
    RuleId.Inv: {LR: _inv_lr, RL: _none},
    RuleId.UAss: {LR: _assoc_lr(Union), RL: _assoc_rl(Union)},
    RuleId.JAss: {LR: _assoc_lr(Join), RL: _assoc_rl(Join)},
    RuleId.UComm: {LR: _comm(Union), RL: _comm(Union)},
    RuleId.JComm: {LR: _comm(Join), RL: _comm(Join)},
    RuleId.JUDistR: {LR: _dist_right_lr(Join), RL: _dist_right_rl(Join)},
    RuleId.JUDistL: {LR: _judistl_lr, RL: _judistl_rl},
    RuleId.MUDistR: {LR: _dist_right_lr(Minus), RL: _dist_right_rl(Minus)},
    RuleId.LUDistR: {LR: _dist_right_lr(LeftJoin), RL: _dist_right_rl(LeftJoin)},
    RuleId.SUPush: {LR: _supush_lr, RL: _supush_rl},
    RuleId.SDecompI: {LR: _sdecomp1_lr, RL: _sdecomp1_rl},
    RuleId.SDecompII: {LR: _sdecomp2_lr, RL: _sdecomp2_rl},
    RuleId.SReord: {LR: _sreord, RL: _sreord},
    RuleId.BndI: {LR: _bnd1, RL: _none},
    RuleId.BndII: {LR: _bnd2, RL: _none},
    RuleId.BndIII: {LR: _bnd3, RL: _none},
    RuleId.BndIV: {LR: _bnd4, RL: _none},
    RuleId.BndV: {LR: _bnd5_lr, RL: _bnd5_rl},
    RuleId.SJPush: {LR: _push_lr(Join, _strong), RL: _push_rl(Join, _strong)},
    RuleId.SMPush: {LR: _push_lr(Minus, _strong), RL: _push_rl(Minus, _strong)},
    RuleId.SLPush: {LR: _push_lr(LeftJoin, _strong), RL: _push_rl(LeftJoin, _strong)},
    RuleId.MReord: {LR: _mreord, RL: _mreord},
    RuleId.MMUCorr: {LR: _mmucorr_lr, RL: _mmucorr_rl},
    RuleId.MJ: {LR: _mj_lr, RL: _mj_rl},
    RuleId.LJ: {LR: _lj_lr, RL: _lj_rl},
    RuleId.NegBndMinus: {LR: _negbnd_lr, RL: _negbnd_rl},
    RuleId.WeakFilterPush: {
        LR: _any_of(*(_push_lr(op, _weak) for op in (Join, Minus, LeftJoin))),
        RL: _any_of(*(_push_rl(op, _weak) for op in (Join, Minus, LeftJoin))),
    },
}


class Site(NamedTuple):
    path: tuple
    direction: str


def positions(a, prefix: tuple = ()) -> Iterator[tuple]:
    """Tree positions in post-order: leftmost-innermost first."""
    for i, child in enumerate(a.children):
        yield from positions(child, prefix + (i,))
    yield prefix


def subtree(a, path: tuple):
    for i in path:
        a = a.children[i]
    return a


def replace(a, path: tuple, new):
    if not path:
        return new
    kids = list(a.children)
    kids[path[0]] = replace(kids[path[0]], path[1:], new)
    return with_children(a, kids)


def rewrite_at(rule: RuleId, direction: str, node):
    return RULES[RuleId(rule)][direction](node)


def applicable_sites(rule: RuleId, a, direction: str | None = None) -> list[Site]:
    dirs = (LR, RL) if direction is None else (direction,)
    out = []
    for path in positions(a):
        node = subtree(a, path)
        for d in dirs:
            if rewrite_at(rule, d, node) is not None:
                out.append(Site(path, d))
    return out


def apply(rule: RuleId, direction: str, a, site) -> object:
    path = site.path if isinstance(site, Site) else tuple(site)
    node = subtree(a, path)
    new = rewrite_at(rule, direction, node)
    if new is None:
        raise RewriteError(f"{rule} ({direction}) does not apply at {list(path)}")
    return replace(a, path, new)


@dataclass(frozen=True)
class Step:
    rule: RuleId
    direction: str
    path: tuple
    before: object
    after: object

    def __str__(self):
        return f"{self.rule} {self.direction} at {list(self.path)}: {self.before}  =>  {self.after}"


class RewriteTrace(list):
    """Ordered rule applications; replaying from the source yields the target."""

    def format(self) -> str:
        return "".join(f"{i}. {step}\n" for i, step in enumerate(self, start=1))


def replay(source, trace) -> object:
    a = source
    for step in trace:
        a = apply(step.rule, step.direction, a, step.path)
    return a


def _first_site(a, moves):
    for path in positions(a):
        node = subtree(a, path)
        for rule, direction in moves:
            new = rewrite_at(rule, direction, node)
            if new is not None:
                return rule, direction, path, node, new
    return None


def run_strategy(a, moves, trace: RewriteTrace | None = None):
    """Apply the first applicable move at the leftmost-innermost site until none applies."""
    trace = RewriteTrace() if trace is None else trace
    while True:
        hit = _first_site(a, moves)
        if hit is None:
            return a, trace
        rule, direction, path, node, new = hit
        trace.append(Step(rule, direction, path, node, new))
        a = replace(a, path, new)


_SPLIT = [(RuleId.SDecompI, LR)]
_PUSH = [
    (RuleId.BndI, LR), (RuleId.BndII, LR), (RuleId.BndIII, LR), (RuleId.BndIV, LR), (RuleId.BndV, LR),
    (RuleId.SUPush, LR), (RuleId.SJPush, LR), (RuleId.SMPush, LR), (RuleId.SLPush, LR),
    (RuleId.WeakFilterPush, LR),
]
_NEGATION = [(RuleId.LJ, RL), (RuleId.NegBndMinus, LR)]


def normalize_filters(a):
    """Split conjunctive filters, then push filters down and drop decidable bnd tests."""
    a, trace = run_strategy(a, _SPLIT)
    return run_strategy(a, _PUSH, trace)


def extract_negation(a):
    """Turn simulated negation (not-bound over left outer join) into explicit minus."""
    return run_strategy(a, _NEGATION)
