"""Membership of lasso systems in the semantic classes pr, nl, nl', sync and uis.

Perfect recall and no learning each come with several equivalent
formulations; every one of them is implemented separately so that they can
be checked against each other.  Checks quantify over points with times up
to a horizon ``B`` (default ``3W``).
"""

from __future__ import annotations

import operator
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Hashable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .syntax import absorb
from .systems import LassoSystem, Point, canonical_position, successor_cell

CLASS_NAMES = ("pr", "nl", "nl_prime", "sync", "uis")
PR_MODES = ("definition", "b", "c", "d")
NL_MODES = ("definition", "b", "c")


@dataclass(frozen=True)
class PropertyReport:
    property: str
    verdict: bool
    horizon: int
    agent: int | None = None
    mode: str | None = None
    counterexample: tuple | None = None  # pair of points
    clause: str | None = None

    def __bool__(self) -> bool:
        return self.verdict

    def render(self) -> str:
        who = f" agent {self.agent}" if self.agent is not None else ""
        how = f" [{self.mode}]" if self.mode else ""
        text = f"{self.property}{who}{how}: {'holds' if self.verdict else 'fails'} (horizon {self.horizon})"
        if self.counterexample is not None:
            a, b = self.counterexample
            text += f"; violated {self.clause} at ({a.run},{a.time}) ~ ({b.run},{b.time})"
        return text

    def to_document(self) -> dict:
        return {
            "property": self.property, "verdict": self.verdict, "horizon": self.horizon,
            "agent": self.agent, "mode": self.mode, "clause": self.clause,
            "counterexample": None if self.counterexample is None
            else [list(p) for p in self.counterexample],
        }


@dataclass(frozen=True)
class ClassSpec:
    classes: frozenset
    reports: tuple = field(default=(), compare=False)

    def __contains__(self, name: str) -> bool:
        return name in self.classes

    def names(self) -> list[str]:
        return [c for c in CLASS_NAMES if c in self.classes]


@dataclass(frozen=True)
class ConcordanceWitness:
    """Matching interval pairs as half-open index ranges into S and T."""
    intervals: tuple


@dataclass(frozen=True)
class Concordance:
    verdict: bool
    witness: ConcordanceWitness | None = None

    def __bool__(self) -> bool:
        return self.verdict


# ---------------------------------------------------------------- concordance

def concordant(S: Sequence, T: Sequence, related: Callable[[Hashable, Hashable], bool],
               transitive: bool = False) -> Concordance:
    """Decide whether finite sequences split into pairwise related interval pairs.

    A greedy left-to-right pass is complete when the relation is an
    equivalence (``transitive=True``); otherwise a failed greedy pass is
    followed by an exhaustive search over interval boundaries.
    """
    if not S or not T:
        raise ValueError("concordance needs nonempty sequences")
    greedy = _greedy_partition(S, T, related, transitive)
    if greedy is not None:
        return Concordance(True, ConcordanceWitness(greedy))
    if transitive:
        return Concordance(False)
    exhaustive = _exhaustive_partition(S, T, related)
    if exhaustive is not None:
        return Concordance(True, ConcordanceWitness(exhaustive))
    return Concordance(False)


def _block_ok(S, T, related, i0, i1, j0, j1) -> bool:
    return all(related(S[a], T[b]) for a in range(i0, i1) for b in range(j0, j1))


def _greedy_partition(S, T, related, transitive=False):
    i = j = 0
    out = []
    while i < len(S) and j < len(T):
        if not related(S[i], T[j]):
            return None
        i2, j2 = i + 1, j + 1
        grew = True
        while grew:
            grew = False
            # for an equivalence one representative of the block suffices
            lo_j = j2 - 1 if transitive else j
            if i2 < len(S) and _block_ok(S, T, related, i2, i2 + 1, lo_j, j2):
                i2 += 1
                grew = True
            lo_i = i2 - 1 if transitive else i
            if j2 < len(T) and _block_ok(S, T, related, lo_i, i2, j2, j2 + 1):
                j2 += 1
                grew = True
        out.append(((i, i2), (j, j2)))
        i, j = i2, j2
    if i == len(S) and j == len(T):
        return tuple(out)
    return None


def _exhaustive_partition(S, T, related):
    n, m = len(S), len(T)

    @lru_cache(maxsize=None)
    def solve(i: int, j: int):
        if i == n and j == m:
            return ()
        if i == n or j == m:
            return None
        for i2 in range(i + 1, n + 1):
            if not _block_ok(S, T, related, i, i2, j, j + 1):
                break
            for j2 in range(j + 1, m + 1):
                if not _block_ok(S, T, related, i, i2, j2 - 1, j2):
                    break
                rest = solve(i2, j2)
                if rest is not None:
                    return (((i, i2), (j, j2)),) + rest
        return None

    return solve(0, 0)


# ---------------------------------------------------------------- local states

def local_state_sequence(sys: LassoSystem, run: int, agent: int, n: int) -> tuple:
    """Agent's local states along ``r(0..n)`` with consecutive repeats removed."""
    return absorb(sys.local_state(Point(run, k), agent) for k in range(n + 1))


def canonical_lasso(head: Sequence, loop: Sequence) -> tuple[tuple, tuple]:
    """Shortest (head, loop) denoting the infinite word ``head loop loop ...``."""
    head, loop = list(head), list(loop)
    for p in range(1, len(loop) + 1):
        if len(loop) % p == 0 and loop == loop[:p] * (len(loop) // p):
            loop = loop[:p]
            break
    while head and head[-1] == loop[-1]:
        head.pop()
        loop = loop[-1:] + loop[:-1]
    return tuple(head), tuple(loop)


def absorbed_lasso(head: Sequence, loop: Sequence) -> tuple[tuple, tuple]:
    """Canonical descriptor of an eventually periodic word with stutter removed.

    A word that eventually stays at ``v`` becomes a finite sequence; it is
    encoded with the one-element loop ``(v,)``.  Absorbed infinite words never
    repeat consecutively, so this encoding is unambiguous.
    """
    head, loop = list(head), list(loop)
    if all(x == loop[0] for x in loop):
        return canonical_lasso(absorb(head + [loop[0]])[:-1], (loop[0],))
    while loop[0] == loop[-1]:
        head.append(loop[0])
        loop = loop[1:] + loop[:1]
    h, lp = list(absorb(head)), list(absorb(loop))
    if h and h[-1] == lp[0]:
        h.pop()
    return canonical_lasso(h, lp)


def future_descriptor(sys: LassoSystem, point: Point, agent: int) -> tuple[tuple, tuple]:
    """The agent's future local-state sequence from ``point`` as a lasso.

    Clocked local states carry the time, so no two are equal and nothing is
    absorbed; two clocked points are only compared at equal times, so the
    time component is dropped from the descriptor.
    """
    start = canonical_position(sys, point.time)
    cores = [c.locals[agent - 1] for c in sys.runs[point.run]]
    if start < sys.prefix_len:
        head, loop = cores[start:sys.prefix_len], cores[sys.prefix_len:]
    else:
        off = start - sys.prefix_len
        loop_cells = cores[sys.prefix_len:]
        head, loop = [], loop_cells[off:] + loop_cells[:off]
    if sys.clocked:
        return canonical_lasso(head, loop)
    return absorbed_lasso(head, loop)


def futures_concordant(sys: LassoSystem, a: Point, b: Point, agent: int) -> bool:
    """Concordance of the infinite point sequences starting at ``a`` and ``b``.

    Because indistinguishability is an equivalence, interval partitions
    correspond to monotone staircase walks through related pairs.  In the
    finite product of the two lassos, the futures are concordant iff such a
    walk reaches a cycle on which both coordinates advance.
    """
    ra, rb = sys.runs[a.run], sys.runs[b.run]
    if sys.clocked and a.time != b.time:
        return False

    def rel(x: int, y: int) -> bool:
        return ra[x].locals[agent - 1] == rb[y].locals[agent - 1]

    start = (canonical_position(sys, a.time), canonical_position(sys, b.time))
    if not rel(*start):
        return False
    moves = ((1, 1),) if sys.clocked else ((1, 0), (0, 1), (1, 1))
    nodes = {start: 0}
    edges: list[tuple[int, int, int, int]] = []  # src, dst, advances a, advances b
    todo = [start]
    while todo:
        x, y = todo.pop()
        for da, db in moves:
            nxt = (successor_cell(sys, x) if da else x, successor_cell(sys, y) if db else y)
            if not rel(*nxt):
                continue
            if nxt not in nodes:
                nodes[nxt] = len(nodes)
                todo.append(nxt)
            edges.append((nodes[(x, y)], nodes[nxt], da, db))
    if not edges:
        return False
    src = np.array([e[0] for e in edges])
    dst = np.array([e[1] for e in edges])
    graph = coo_matrix((np.ones(len(edges)), (src, dst)), shape=(len(nodes), len(nodes)))
    _, comp = connected_components(graph, directed=True, connection="strong")
    adv_a: set[int] = set()
    adv_b: set[int] = set()
    for s, d, da, db in edges:
        if comp[s] == comp[d]:
            if da:
                adv_a.add(comp[s])
            if db:
                adv_b.add(comp[s])
    return bool(adv_a & adv_b)


# ---------------------------------------------------------------- helpers

def default_horizon(sys: LassoSystem) -> int:
    return 3 * sys.window


def _agents(sys: LassoSystem, agent: int | None) -> list[int]:
    return list(range(1, sys.m + 1)) if agent is None else [agent]


class _StateIds:
    """Integer ids of effective local states for every point up to a horizon."""

    def __init__(self, sys: LassoSystem, agent: int, horizon: int):
        ids: dict = {}
        self.ids = np.empty((sys.run_count, horizon + 1), dtype=np.int64)
        for r in range(sys.run_count):
            for n in range(horizon + 1):
                key = sys.local_state(Point(r, n), agent)
                self.ids[r, n] = ids.setdefault(key, len(ids))

    def pairs(self):
        """All ordered pairs of related points."""
        R, H = self.ids.shape
        flat = self.ids.ravel()
        order = np.argsort(flat, kind="stable")
        sorted_ids = flat[order]
        bounds = np.flatnonzero(np.diff(sorted_ids)) + 1
        for group in np.split(order, bounds):
            pts = [Point(int(g // H), int(g % H)) for g in group]
            for a in pts:
                for b in pts:
                    yield a, b

    def same(self, a: Point, b: Point) -> bool:
        return self.ids[a.run, a.time] == self.ids[b.run, b.time]


def _combine(name: str, reports: list[PropertyReport], horizon: int, mode: str | None) -> PropertyReport:
    for rep in reports:
        if not rep.verdict:
            return rep
    return PropertyReport(name, True, horizon, None, mode)


# ---------------------------------------------------------------- perfect recall

def has_perfect_recall(sys: LassoSystem, agent: int | None = None, mode: str = "definition",
                       horizon: int | None = None) -> PropertyReport:
    if mode not in PR_MODES:
        raise ValueError(f"unknown perfect-recall mode {mode!r}")
    B = default_horizon(sys) if horizon is None else horizon
    reports = [_pr_agent(sys, i, mode, B) for i in _agents(sys, agent)]
    if agent is not None:
        return reports[0]
    return _combine("pr", reports, B, mode)


def _pr_agent(sys: LassoSystem, i: int, mode: str, B: int) -> PropertyReport:
    st = _StateIds(sys, i, B)
    ids = st.ids
    clause = f"pr({mode})"

    def fail(a, b):
        return PropertyReport("pr", False, B, i, mode, (a, b), clause)

    if mode == "definition":
        hist = {(r, n): local_state_sequence(sys, r, i, n)
                for r in range(sys.run_count) for n in range(B + 1)}
        for a, b in st.pairs():
            if hist[a] != hist[b]:
                return fail(a, b)
    elif mode == "b":
        rows = ids.tolist()
        for a, b in st.pairs():
            S = rows[a.run][:a.time + 1]
            T = rows[b.run][:b.time + 1]
            if not concordant(S, T, operator.eq, transitive=True):
                return fail(a, b)
    elif mode == "c":
        for a, b in st.pairs():
            n, n2 = a.time, b.time
            if n == 0:
                continue
            prev = ids[a.run, n - 1]
            row = ids[b.run]
            if prev == row[n2]:
                continue
            ok = False
            k = n2
            # walk l downward while every k in (l, n'] stays related to (r, n)
            while k >= 1 and row[k] == ids[a.run, n]:
                if row[k - 1] == prev:
                    ok = True
                    break
                k -= 1
            if not ok:
                return fail(a, b)
    else:  # mode d
        R = sys.run_count
        first = np.full((R, B + 1, R), B + 1, dtype=np.int64)
        for r in range(R):
            for k in range(B + 1):
                for r2 in range(R):
                    hits = np.flatnonzero(ids[r2] == ids[r, k])
                    if len(hits):
                        first[r, k, r2] = hits[0]
        reach = np.maximum.accumulate(first, axis=1)
        for a, b in st.pairs():
            if reach[a.run, a.time, b.run] > b.time:
                return fail(a, b)
    return PropertyReport("pr", True, B, i, mode)


# ---------------------------------------------------------------- no learning

def has_no_learning(sys: LassoSystem, agent: int | None = None, mode: str = "definition",
                    horizon: int | None = None) -> PropertyReport:
    if mode not in NL_MODES:
        raise ValueError(f"unknown no-learning mode {mode!r}")
    B = default_horizon(sys) if horizon is None else horizon
    reports = [_nl_agent(sys, i, mode, B) for i in _agents(sys, agent)]
    if agent is not None:
        return reports[0]
    return _combine("nl", reports, B, mode)


def _nl_agent(sys: LassoSystem, i: int, mode: str, B: int) -> PropertyReport:
    # the futures and the one-step condition only look ahead W + 1 steps
    st = _StateIds(sys, i, B + 2 * sys.window + 1)
    ids = st.ids
    clause = f"nl({mode})"

    def fail(a, b):
        return PropertyReport("nl", False, B, i, mode, (a, b), clause)

    pairs = [(a, b) for a, b in st.pairs() if a.time <= B and b.time <= B]
    if mode == "definition":
        cache: dict = {}

        def fut(p):
            key = (p.run, canonical_position(sys, p.time))
            if key not in cache:
                cache[key] = future_descriptor(sys, p, i)
            return cache[key]

        for a, b in pairs:
            if fut(a) != fut(b):
                return fail(a, b)
    elif mode == "b":
        seen: dict = {}
        for a, b in pairs:
            key = (a.run, canonical_position(sys, a.time), b.run, canonical_position(sys, b.time))
            if key not in seen:
                seen[key] = futures_concordant(sys, a, b, i)
            if not seen[key]:
                return fail(a, b)
    else:  # mode c
        limit = 2 * sys.window
        for a, b in pairs:
            n, n2 = a.time, b.time
            nxt = ids[a.run, n + 1]
            row = ids[b.run]
            if nxt == row[n2]:
                continue
            ok = False
            k = n2
            # extend l while (r, n) stays related to (r', k) for n' <= k < l
            while k < n2 + limit and row[k] == ids[a.run, n]:
                if row[k + 1] == nxt:
                    ok = True
                    break
                k += 1
            if not ok:
                return fail(a, b)
    return PropertyReport("nl", True, B, i, mode)


def has_no_learning_prime(sys: LassoSystem, agent: int | None = None,
                          horizon: int | None = None) -> PropertyReport:
    """Weak no learning: every later point of r has some related later point of r'."""
    B = default_horizon(sys) if horizon is None else horizon
    W = sys.window
    reports = []
    for i in _agents(sys, agent):
        st = _StateIds(sys, i, B + 2 * W)
        ids = st.ids
        verdict = PropertyReport("nl_prime", True, B, i)
        checked: set = set()
        for a, b in st.pairs():
            if a.time > B or b.time > B:
                continue
            # the condition only depends on the two canonical cells
            key = (a.run, canonical_position(sys, a.time), b.run, canonical_position(sys, b.time))
            if key in checked:
                continue
            checked.add(key)
            later = ids[b.run, b.time:b.time + 2 * W]
            for k in range(a.time, a.time + W + 1):
                if sys.clocked:
                    ok = ids[a.run, k] == ids[b.run, k] if k >= b.time else False
                else:
                    ok = bool(np.any(later == ids[a.run, k]))
                if not ok:
                    verdict = PropertyReport("nl_prime", False, B, i, None, (a, b), "nl_prime")
                    break
            if not verdict.verdict:
                break
        reports.append(verdict)
    if agent is not None:
        return reports[0]
    return _combine("nl_prime", reports, B, None)


# ---------------------------------------------------------------- sync and uis

def is_synchronous(sys: LassoSystem) -> PropertyReport:
    horizon = 2 * sys.window
    if sys.clocked:
        return PropertyReport("sync", True, horizon)
    for i in range(1, sys.m + 1):
        st = _StateIds(sys, i, horizon)
        for a, b in st.pairs():
            if a.time != b.time:
                return PropertyReport("sync", False, horizon, i, None, (a, b), "sync")
    return PropertyReport("sync", True, horizon)


def has_uis(sys: LassoSystem) -> PropertyReport:
    first = sys.runs[0][0]
    for r, run in enumerate(sys.runs):
        if run[0] != first:
            return PropertyReport("uis", False, 0, None, None, (Point(0, 0), Point(r, 0)), "uis")
    return PropertyReport("uis", True, 0)


def classify(sys: LassoSystem, horizon: int | None = None) -> ClassSpec:
    reports = (
        has_perfect_recall(sys, horizon=horizon),
        has_no_learning(sys, horizon=horizon),
        has_no_learning_prime(sys, horizon=horizon),
        is_synchronous(sys),
        has_uis(sys),
    )
    return ClassSpec(frozenset(r.property for r in reports if r.verdict), reports)
