"""Formulas of linear-time epistemic temporal logic.

The core AST has eight node kinds.  Everything else (``true``, disjunction,
implication, eventually/always, the dual ``L_i``, ``E^k``, nested ``K``
chains) is built by constructor functions that return core trees, so the
rest of the package only ever pattern-matches on the eight kinds below.
"""

from __future__ import annotations

import functools
import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

RESERVED_PROP = "p0"
DEFAULT_CLOSURE_CAP = 2**16


class FormulaSyntaxError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnsupportedFormula(ValueError):
    pass


class ClosureTooLarge(RuntimeError):
    pass


@dataclass(frozen=True)
class Formula:
    _hash: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_hash", hash((type(self).__name__,) + self._fields()))

    def __hash__(self) -> int:
        return self._hash

    def _fields(self) -> tuple:
        raise NotImplementedError

    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True, eq=True)
class Prop(Formula):
    name: str

    def _fields(self):
        return (self.name,)

    __hash__ = Formula.__hash__


@dataclass(frozen=True, eq=True)
class Not(Formula):
    sub: Formula

    def _fields(self):
        return (self.sub,)

    __hash__ = Formula.__hash__


@dataclass(frozen=True, eq=True)
class And(Formula):
    left: Formula
    right: Formula

    def _fields(self):
        return (self.left, self.right)

    __hash__ = Formula.__hash__


@dataclass(frozen=True, eq=True)
class Know(Formula):
    agent: int
    sub: Formula

    def _fields(self):
        return (self.agent, self.sub)

    __hash__ = Formula.__hash__


@dataclass(frozen=True, eq=True)
class Everyone(Formula):
    sub: Formula

    def _fields(self):
        return (self.sub,)

    __hash__ = Formula.__hash__


@dataclass(frozen=True, eq=True)
class Common(Formula):
    sub: Formula

    def _fields(self):
        return (self.sub,)

    __hash__ = Formula.__hash__


@dataclass(frozen=True, eq=True)
class Next(Formula):
    sub: Formula

    def _fields(self):
        return (self.sub,)

    __hash__ = Formula.__hash__


@dataclass(frozen=True, eq=True)
class Until(Formula):
    left: Formula
    right: Formula

    def _fields(self):
        return (self.left, self.right)

    __hash__ = Formula.__hash__


CORE_KINDS = (Prop, Not, And, Know, Everyone, Common, Next, Until)


@dataclass(frozen=True, eq=True)
class Meta(Formula):
    """Metavariable placeholder; appears only in axiom patterns, never in parsed formulas."""
    name: str

    def _fields(self):
        return (self.name,)

    __hash__ = Formula.__hash__

# ---------------------------------------------------------------- abbreviations

TRUE = Not(And(Prop(RESERVED_PROP), Not(Prop(RESERVED_PROP))))
FALSE = Not(TRUE)


def neg(f: Formula) -> Formula:
    return Not(f)


def or_(a: Formula, b: Formula) -> Formula:
    return Not(And(Not(a), Not(b)))


def implies(a: Formula, b: Formula) -> Formula:
    return or_(Not(a), b)


def iff(a: Formula, b: Formula) -> Formula:
    return And(implies(a, b), implies(b, a))


def eventually(f: Formula) -> Formula:
    return Until(TRUE, f)


def always(f: Formula) -> Formula:
    return Not(eventually(Not(f)))


def possible(agent: int, f: Formula) -> Formula:
    return Not(Know(agent, Not(f)))


def everyone_k(k: int, f: Formula) -> Formula:
    """``E^k f`` with ``E^1 f = E f``."""
    if k < 1:
        raise ValueError("E^k needs k >= 1")
    for _ in range(k):
        f = Everyone(f)
    return f


def know_seq(agents: Sequence[int], f: Formula) -> Formula:
    """``K_{i1} K_{i2} ... K_{ik} f``; the empty sequence gives ``f``."""
    for i in reversed(agents):
        f = Know(i, f)
    return f


def conj(formulas: Iterable[Formula]) -> Formula:
    items = list(formulas)
    if not items:
        return TRUE
    out = items[-1]
    for f in reversed(items[:-1]):
        out = And(f, out)
    return out


def disj(formulas: Iterable[Formula]) -> Formula:
    items = list(formulas)
    if not items:
        return FALSE
    out = items[-1]
    for f in reversed(items[:-1]):
        out = or_(f, out)
    return out


def canonical_disjunction(formulas: Iterable[Formula]) -> Formula:
    """Disjunction over a set: duplicates removed, disjuncts in key order.

    The tree is balanced so that large sets stay shallow.
    """
    items = sorted(set(formulas), key=formula_key)
    if not items:
        return FALSE

    def build(lo: int, hi: int) -> Formula:
        if hi - lo == 1:
            return items[lo]
        mid = (lo + hi) // 2
        return or_(build(lo, mid), build(mid, hi))

    return build(0, len(items))


# ---------------------------------------------------------------- traversal

def subformulas(f: Formula) -> list[Formula]:
    """Distinct subformulas in post-order (children before parents)."""
    seen: set[Formula] = set()
    out: list[Formula] = []

    def visit(g: Formula) -> None:
        if g in seen:
            return
        for child in children(g):
            visit(child)
        seen.add(g)
        out.append(g)

    visit(f)
    return out


def children(f: Formula) -> tuple[Formula, ...]:
    if isinstance(f, (Prop, Meta)):
        return ()
    if isinstance(f, (And, Until)):
        return (f.left, f.right)
    return (f.sub,)


def agents_of(f: Formula) -> set[int]:
    return {g.agent for g in subformulas(f) if isinstance(g, Know)}


def props_of(f: Formula) -> set[str]:
    return {g.name for g in subformulas(f) if isinstance(g, Prop)}


def mentions_group_knowledge(f: Formula) -> bool:
    return any(isinstance(g, (Common, Everyone)) for g in subformulas(f))


def size(f: Formula) -> int:
    return 1 + sum(size(c) for c in children(f))


def alternation_depth(f: Formula) -> int:
    """Largest number of switches between distinct ``K_i`` along a branch.

    Temporal operators are transparent.  Undefined when ``C`` or ``E``
    occur, which is signalled with :class:`UnsupportedFormula`.
    """

    @functools.lru_cache(maxsize=None)
    def depth(g: Formula, last: int | None) -> int:
        if isinstance(g, (Common, Everyone)):
            raise UnsupportedFormula("alternation depth is undefined for C and E")
        if isinstance(g, Know):
            return (0 if g.agent == last else 1) + depth(g.sub, g.agent)
        return max((depth(c, last) for c in children(g)), default=0)

    return depth(f, None)


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(r"\s*(?:(->)|([~&|()])|([A-Za-z_][A-Za-z0-9_]*))")
_KNOW = re.compile(r"([KL])(\d+)$")
_RESERVED_WORDS = {"E", "C", "X", "U", "F", "G", "true", "false"}


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise FormulaSyntaxError(f"unexpected character {text[pos]!r}", pos)
        tokens.append((m.group(m.lastindex), m.start(m.lastindex)))
        pos = m.end()
    tokens.append(("<end>", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.at = 0

    def peek(self) -> str:
        return self.tokens[self.at][0]

    def pos(self) -> int:
        return self.tokens[self.at][1]

    def take(self) -> str:
        tok = self.tokens[self.at][0]
        self.at += 1
        return tok

    def expect(self, tok: str) -> None:
        if self.peek() != tok:
            raise FormulaSyntaxError(f"expected {tok!r} but found {self.peek()!r}", self.pos())
        self.at += 1

    def parse(self) -> Formula:
        f = self.implication()
        if self.peek() != "<end>":
            raise FormulaSyntaxError(f"unexpected {self.peek()!r}", self.pos())
        return f

    def implication(self) -> Formula:
        left = self.disjunction()
        if self.peek() == "->":
            self.take()
            return implies(left, self.implication())
        return left

    def disjunction(self) -> Formula:
        f = self.conjunction()
        while self.peek() == "|":
            self.take()
            f = or_(f, self.conjunction())
        return f

    def conjunction(self) -> Formula:
        f = self.until()
        while self.peek() == "&":
            self.take()
            f = And(f, self.until())
        return f

    def until(self) -> Formula:
        left = self.unary()
        if self.peek() == "U":
            self.take()
            return Until(left, self.until())
        return left

    def unary(self) -> Formula:
        tok, pos = self.tokens[self.at]
        if tok == "~":
            self.take()
            return Not(self.unary())
        prefix = {"E": Everyone, "C": Common, "X": Next, "F": eventually, "G": always}
        if tok in prefix:
            self.take()
            return prefix[tok](self.unary())
        m = _KNOW.match(tok)
        if m:
            agent = int(m.group(2))
            if agent < 1:
                raise FormulaSyntaxError(f"agent index must be at least 1, got {agent}", pos)
            self.take()
            sub = self.unary()
            return Know(agent, sub) if m.group(1) == "K" else possible(agent, sub)
        return self.atom()

    def atom(self) -> Formula:
        tok, pos = self.tokens[self.at]
        if tok == "(":
            self.take()
            f = self.implication()
            self.expect(")")
            return f
        if tok == "true":
            self.take()
            return TRUE
        if tok == "false":
            self.take()
            return FALSE
        if tok == "<end>":
            raise FormulaSyntaxError("unexpected end of formula", pos)
        if tok in _RESERVED_WORDS or not re.match(r"[A-Za-z_]", tok):
            raise FormulaSyntaxError(f"unexpected {tok!r}", pos)
        self.take()
        return Prop(tok)


def parse(text: str) -> Formula:
    return _Parser(text).parse()


# ---------------------------------------------------------------- printing

_ATOM, _UNARY, _UNTIL, _AND, _OR, _IMP = 6, 5, 4, 3, 2, 1


def _show(f: Formula, sugar: bool) -> tuple[str, int]:
    def sub(g: Formula, need: int) -> str:
        text, level = _show(g, sugar)
        return text if level >= need else f"({text})"

    if sugar:
        if f == TRUE:
            return "true", _ATOM
        if isinstance(f, Until) and f.left == TRUE:
            return "F " + sub(f.right, _UNARY), _UNARY
        if isinstance(f, Not):
            g = f.sub
            if g == TRUE:
                return "false", _ATOM
            if isinstance(g, Until) and g.left == TRUE and isinstance(g.right, Not):
                return "G " + sub(g.right.sub, _UNARY), _UNARY
            if isinstance(g, Know) and isinstance(g.sub, Not):
                return f"L{g.agent} " + sub(g.sub.sub, _UNARY), _UNARY
            if isinstance(g, And) and isinstance(g.left, Not) and isinstance(g.right, Not):
                a, b = g.left.sub, g.right.sub
                if isinstance(a, Not):
                    return f"{sub(a.sub, _OR)} -> {sub(b, _IMP)}", _IMP
                return f"{sub(a, _OR)} | {sub(b, _AND)}", _OR
    if isinstance(f, (Prop, Meta)):
        return f.name, _ATOM
    if isinstance(f, Not):
        return "~" + sub(f.sub, _UNARY), _UNARY
    if isinstance(f, And):
        return f"{sub(f.left, _AND)} & {sub(f.right, _UNTIL)}", _AND
    if isinstance(f, Until):
        return f"{sub(f.left, _UNARY)} U {sub(f.right, _UNTIL)}", _UNTIL
    if isinstance(f, Know):
        return f"K{f.agent} " + sub(f.sub, _UNARY), _UNARY
    prefix = {Everyone: "E", Common: "C", Next: "X"}[type(f)]
    return f"{prefix} " + sub(f.sub, _UNARY), _UNARY


def to_text(f: Formula, sugar: bool = True) -> str:
    """Render ``f`` in the concrete grammar; ``parse`` inverts it exactly."""
    return _show(f, sugar)[0]


@functools.lru_cache(maxsize=1 << 20)
def formula_key(f: Formula) -> str:
    """Total order on formulas used wherever a canonical order is needed."""
    return to_text(f, sugar=False)


# ---------------------------------------------------------------- closures

def absorptive_concat(seq: Sequence, x) -> tuple:
    seq = tuple(seq)
    if seq and seq[-1] == x:
        return seq
    return seq + (x,)


def absorb(items: Iterable) -> tuple:
    out: tuple = ()
    for x in items:
        out = absorptive_concat(out, x)
    return out


@dataclass(frozen=True)
class ClosureSet:
    formulas: frozenset
    kind: str  # "basic", "level" or "agent-level"
    k: int = 0
    agent: int | None = None

    def __contains__(self, f) -> bool:
        return f in self.formulas

    def __iter__(self) -> Iterator[Formula]:
        return iter(self.ordered())

    def __len__(self) -> int:
        return len(self.formulas)

    def ordered(self) -> list[Formula]:
        return sorted(self.formulas, key=formula_key)


def _agent_bound(psi: Formula, m: int | None) -> int:
    return m if m is not None else max(agents_of(psi), default=1)


def basic_closure(psi: Formula, m: int | None = None) -> ClosureSet:
    """Least set containing ``psi`` closed under the basic closure rules."""
    m = _agent_bound(psi, m)
    members: set[Formula] = set()
    todo = [psi]
    while todo:
        f = todo.pop()
        if f in members:
            continue
        members.add(f)
        todo.extend(children(f))
        if not isinstance(f, Not):
            todo.append(Not(f))
        if isinstance(f, Common):
            todo.append(Everyone(f))
        if isinstance(f, Everyone):
            todo.extend(Know(i, f.sub) for i in range(1, m + 1))
    return ClosureSet(frozenset(members), "basic")


def _with_disjunctions(base: frozenset, agent: int, cap: int) -> frozenset:
    n = len(base)
    projected = n + 2 * (2**n - 1)
    if projected > cap:
        raise ClosureTooLarge(f"closure would hold {projected} formulas (cap {cap})")
    ordered = sorted(base, key=formula_key)
    out = set(base)
    for r in range(1, n + 1):
        for combo in itertools.combinations(ordered, r):
            kd = Know(agent, canonical_disjunction(combo))
            out.add(kd)
            out.add(Not(kd))
    return frozenset(out)


def level_closure(psi: Formula, k: int, agent: int | None = None, m: int | None = None,
                  cap: int = DEFAULT_CLOSURE_CAP) -> ClosureSet:
    """``cl_k(psi)``, or ``cl_{k,i}(psi)`` when ``agent`` is given."""
    if k < 0:
        raise ValueError("closure level must be non-negative")
    m = _agent_bound(psi, m)
    current = basic_closure(psi, m).formulas
    for _ in range(k):
        layer: set[Formula] = set()
        for i in range(1, m + 1):
            layer |= _with_disjunctions(current, i, cap)
        current = frozenset(layer)
        if len(current) > cap:
            raise ClosureTooLarge(f"closure holds {len(current)} formulas (cap {cap})")
    if agent is None:
        return ClosureSet(current, "basic" if k == 0 else "level", k)
    return ClosureSet(_with_disjunctions(current, agent, cap), "agent-level", k, agent)
