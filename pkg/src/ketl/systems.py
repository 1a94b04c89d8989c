"""Interpreted systems whose runs are eventually periodic (lassos).

Every run of a :class:`LassoSystem` is stored as ``W = P + Q`` cells.  Time
``n`` denotes cell ``n`` while ``n < W`` and cell ``P + (n - P) mod Q``
afterwards.  Truth of any formula at ``(r, n)`` only depends on that cell, so
formulas are evaluated once per (run, cell) into boolean numpy tables.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import Hashable, Iterable, NamedTuple, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .syntax import (RESERVED_PROP, And, Common, Everyone, Formula, Know, Next, Not, Prop,
                     Until, agents_of, props_of, subformulas)


class Point(NamedTuple):
    run: int
    time: int


@dataclass(frozen=True)
class Cell:
    env: Hashable
    locals: tuple
    val: frozenset = frozenset()  # propositions true in this cell


@dataclass(frozen=True)
class LassoSystem:
    m: int
    clocked: bool
    prefix_len: int
    period: int
    runs: tuple  # tuple of tuples of Cell, each of length W
    props: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("a system needs at least one agent")
        if self.prefix_len < 0 or self.period < 1:
            raise ValueError("prefix length must be >= 0 and period >= 1")
        if not self.runs:
            raise ValueError("a system needs at least one run")
        for r, run in enumerate(self.runs):
            if len(run) != self.window:
                raise ValueError(f"run {r} has {len(run)} cells, expected {self.window}")
            for cell in run:
                if len(cell.locals) != self.m:
                    raise ValueError(f"run {r} has a cell with {len(cell.locals)} local states")
                if not cell.val <= self.props:
                    raise ValueError(f"run {r} mentions undeclared propositions")

    @property
    def window(self) -> int:
        return self.prefix_len + self.period

    @property
    def run_count(self) -> int:
        return len(self.runs)

    def canon(self, n: int) -> int:
        return canonical_position(self, n)

    def cell(self, point: Point) -> Cell:
        return self.runs[point.run][self.canon(point.time)]

    def core(self, point: Point, agent: int) -> Hashable:
        return self.cell(point).locals[agent - 1]

    def local_state(self, point: Point, agent: int) -> Hashable:
        """Effective local state; clocked systems pair the core with the time."""
        core = self.core(point, agent)
        return (point.time, core) if self.clocked else core

    def cells(self) -> Iterable[Point]:
        for r in range(self.run_count):
            for c in range(self.window):
                yield Point(r, c)


def canonical_position(sys: LassoSystem, n: int) -> int:
    if n < 0:
        raise ValueError("time must be non-negative")
    if n < sys.window:
        return n
    return sys.prefix_len + (n - sys.prefix_len) % sys.period


def successor_cell(sys: LassoSystem, c: int) -> int:
    return c + 1 if c + 1 < sys.window else sys.prefix_len


def indistinguishable(sys: LassoSystem, a: Point, b: Point, agent: int) -> bool:
    if sys.clocked and a.time != b.time:
        return False
    return sys.core(a, agent) == sys.core(b, agent)


def from_lassos(m: int, clocked: bool, runs: Sequence[tuple[Sequence[Cell], Sequence[Cell]]],
                props: Iterable[str] = ()) -> LassoSystem:
    """Align runs given as (head, loop) pairs onto a common prefix and period."""
    if not runs:
        raise ValueError("a system needs at least one run")
    prefix = max(len(head) for head, _ in runs)
    period = math.lcm(*(len(loop) for _, loop in runs))
    aligned = []
    for head, loop in runs:
        if not loop:
            raise ValueError("every run needs a nonempty loop")
        cells = [head[n] if n < len(head) else loop[(n - len(head)) % len(loop)]
                 for n in range(prefix + period)]
        aligned.append(tuple(cells))
    names = set(props)
    for run in aligned:
        for cell in run:
            names |= cell.val
    return LassoSystem(m, clocked, prefix, period, tuple(aligned), frozenset(names))


# ---------------------------------------------------------------- evaluation

class Evaluator:
    """Caches one boolean ``(runs, W)`` table per subformula."""

    def __init__(self, sys: LassoSystem):
        self.sys = sys
        self.tables: dict[Formula, np.ndarray] = {}
        shape = (sys.run_count, sys.window)
        self.shape = shape
        self._groups = [self._group_ids(i) for i in range(1, sys.m + 1)]
        self._components: np.ndarray | None = None
        succ = np.arange(1, sys.window + 1)
        succ[-1] = sys.prefix_len
        self._succ = succ

    def _group_ids(self, agent: int) -> np.ndarray:
        ids: dict = {}
        out = np.empty(self.shape, dtype=np.int64)
        for r, run in enumerate(self.sys.runs):
            for c, cell in enumerate(run):
                key = (c, cell.locals[agent - 1]) if self.sys.clocked else cell.locals[agent - 1]
                out[r, c] = ids.setdefault(key, len(ids))
        return out

    def _know(self, agent: int, sub: np.ndarray) -> np.ndarray:
        gid = self._groups[agent - 1]
        failing = np.bincount(gid.ravel(), weights=(~sub).ravel(), minlength=gid.max() + 1) > 0
        return ~failing[gid]

    def components(self) -> np.ndarray:
        """Connected components of the union of the agents' relations."""
        if self._components is None:
            n = self.shape[0] * self.shape[1]
            rows, cols = [], []
            for gid in self._groups:
                flat = gid.ravel()
                first = np.full(flat.max() + 1, -1)
                for node in range(n):
                    if first[flat[node]] < 0:
                        first[flat[node]] = node
                rows.append(np.arange(n))
                cols.append(first[flat])
            rows_a, cols_a = np.concatenate(rows), np.concatenate(cols)
            graph = coo_matrix((np.ones(len(rows_a)), (rows_a, cols_a)), shape=(n, n))
            _, labels = connected_components(graph, directed=False)
            self._components = labels.reshape(self.shape)
        return self._components

    def table(self, f: Formula) -> np.ndarray:
        if f in self.tables:
            return self.tables[f]
        for g in subformulas(f):
            if g not in self.tables:
                self.tables[g] = self._compute(g)
        return self.tables[f]

    def _compute(self, f: Formula) -> np.ndarray:
        sys, t = self.sys, self.tables
        if isinstance(f, Prop):
            if f.name not in sys.props:
                if f.name == RESERVED_PROP:
                    return np.zeros(self.shape, dtype=bool)
                raise ValueError(f"proposition {f.name!r} is not declared by the system")
            return np.array([[f.name in cell.val for cell in run] for run in sys.runs], dtype=bool)
        if isinstance(f, Not):
            return ~t[f.sub]
        if isinstance(f, And):
            return t[f.left] & t[f.right]
        if isinstance(f, Next):
            return t[f.sub][:, self._succ]
        if isinstance(f, Until):
            left, right = t[f.left], t[f.right]
            out = right.copy()
            while True:
                grown = right | (left & out[:, self._succ])
                if np.array_equal(grown, out):
                    return out
                out = grown
        if isinstance(f, (Know, Everyone, Common)):
            agents = {f.agent} if isinstance(f, Know) else set(range(1, sys.m + 1))
            if max(agents) > sys.m:
                raise ValueError(f"agent {max(agents)} exceeds the system's {sys.m} agents")
        if isinstance(f, Know):
            return self._know(f.agent, t[f.sub])
        if isinstance(f, Everyone):
            out = np.ones(self.shape, dtype=bool)
            for i in range(1, sys.m + 1):
                out &= self._know(i, t[f.sub])
            return out
        if isinstance(f, Common):
            comp = self.components()
            failing = np.bincount(comp.ravel(), weights=(~t[f.sub]).ravel(),
                                  minlength=comp.max() + 1) > 0
            return ~failing[comp]
        raise TypeError(f"not a core formula: {f!r}")


def truth_table(sys: LassoSystem, f: Formula) -> np.ndarray:
    return Evaluator(sys).table(f)


def evaluate(sys: LassoSystem, point: Point, f: Formula) -> bool:
    point = Point(*point)
    return bool(truth_table(sys, f)[point.run, sys.canon(point.time)])


def evaluate_common(sys: LassoSystem, point: Point, f: Formula) -> bool:
    """``C f`` by explicit search over (run, cell) pairs reachable from ``point``."""
    point = Point(*point)
    sub = truth_table(sys, f)
    start = (point.run, sys.canon(point.time))
    seen = {start}
    frontier = [start]
    while frontier:
        r, c = frontier.pop()
        if not sub[r, c]:
            return False
        here = Point(r, c)
        for r2 in range(sys.run_count):
            for c2 in range(sys.window):
                if (r2, c2) in seen:
                    continue
                there = Point(r2, c2)
                if any(indistinguishable(sys, here, there, i) for i in range(1, sys.m + 1)):
                    seen.add((r2, c2))
                    frontier.append((r2, c2))
    return True


@dataclass(frozen=True)
class Validity:
    valid: bool
    counterexample: Point | None = None

    def __bool__(self) -> bool:
        return self.valid


def valid_in_system(sys: LassoSystem, f: Formula, evaluator: Evaluator | None = None) -> Validity:
    table = (evaluator or Evaluator(sys)).table(f)
    bad = np.argwhere(~table)
    if len(bad) == 0:
        return Validity(True)
    r, c = bad[0]
    return Validity(False, Point(int(r), int(c)))


def check_formula_fits(sys: LassoSystem, f: Formula) -> None:
    agents = agents_of(f)
    if agents and max(agents) > sys.m:
        raise ValueError(f"formula mentions agent {max(agents)} but the system has {sys.m}")
    unknown = props_of(f) - set(sys.props) - {RESERVED_PROP}
    if unknown:
        raise ValueError(f"formula mentions undeclared propositions {sorted(unknown)}")


# ---------------------------------------------------------------- constructions

def _fresh(token: str, used: set) -> str:
    while token in used:
        token += "'"
    return token


def uis_transform(sys: LassoSystem) -> LassoSystem:
    """Prepend one shared initial cell with fresh local states to every run."""
    used = {cell.env for run in sys.runs for cell in run}
    used |= {core for run in sys.runs for cell in run for core in cell.locals}
    env = _fresh("init_env", used)
    core = _fresh("init", used)
    first = Cell(env, tuple(core for _ in range(sys.m)), frozenset())
    runs = tuple((first,) + run for run in sys.runs)
    return LassoSystem(sys.m, sys.clocked, sys.prefix_len + 1, sys.period, runs, sys.props)


def fixture_nl_prime() -> LassoSystem:
    """Two runs, one agent: cores a,b,c,b,c,... and a,c,d,c,d,...

    ``p`` holds exactly where the core is ``a`` and ``q`` where it is ``b``.
    ``(K1 p) U (K1 q) -> K1((K1 p) U (K1 q))`` fails at run 0, time 0.  Core
    ``b`` never occurs on the second run, so the weak no-learning condition
    fails at the shared initial state; see :func:`fixture_nl_prime_corrected`.
    """
    return _single_agent_fixture("abc", "acd")


def fixture_nl_prime_corrected() -> LassoSystem:
    """Like :func:`fixture_nl_prime` with the second run a,c,b,c,b,...

    Here the weak no-learning condition holds, strong no-learning does not,
    and the same formula still fails at run 0, time 0.
    """
    return _single_agent_fixture("abc", "acb")


def _single_agent_fixture(first: str, second: str) -> LassoSystem:
    def cell(core: str) -> Cell:
        val = {"a": {"p"}, "b": {"q"}}.get(core, set())
        return Cell("s_e", (core,), frozenset(val))

    runs = (tuple(map(cell, first)), tuple(map(cell, second)))
    return LassoSystem(1, False, 1, 2, runs, frozenset({"p", "q"}))


# ---------------------------------------------------------------- file format

def _to_json_token(token):
    if isinstance(token, tuple):
        return [_to_json_token(t) for t in token]
    return token


def _from_json_token(token):
    if isinstance(token, list):
        return tuple(_from_json_token(t) for t in token)
    return token


def to_document(sys: LassoSystem) -> dict:
    props = sorted(sys.props)
    return {
        "m": sys.m,
        "clocked": sys.clocked,
        "prefix_len": sys.prefix_len,
        "period": sys.period,
        "props": props,
        "runs": [
            {"cells": [
                {"env": _to_json_token(cell.env),
                 "locals": [_to_json_token(c) for c in cell.locals],
                 "val": {p: p in cell.val for p in props}}
                for cell in run]}
            for run in sys.runs
        ],
    }


def from_document(doc: dict) -> LassoSystem:
    props = frozenset(doc["props"])
    runs = []
    for run in doc["runs"]:
        cells = []
        for cell in run["cells"]:
            val = cell["val"]
            missing = props - set(val)
            if missing:
                raise ValueError(f"cell valuation is missing {sorted(missing)}")
            cells.append(Cell(_from_json_token(cell["env"]),
                              tuple(_from_json_token(c) for c in cell["locals"]),
                              frozenset(p for p, v in val.items() if v)))
        runs.append(tuple(cells))
    return LassoSystem(int(doc["m"]), bool(doc["clocked"]), int(doc["prefix_len"]),
                       int(doc["period"]), tuple(runs), props)


def dumps(sys: LassoSystem) -> str:
    return json.dumps(to_document(sys), indent=1, sort_keys=True)


def loads(text: str) -> LassoSystem:
    return from_document(json.loads(text))


def write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_system(sys: LassoSystem, path: str) -> None:
    write_atomic(path, dumps(sys) + "\n")


def load_system(path: str) -> LassoSystem:
    with open(path) as fh:
        return loads(fh.read())
