"""Pre-models over closure atoms, elimination, and satisfiability with model extraction.

Atoms are maximal locally consistent subsets of a closure.  A state pairs an
index (a sequence of agents) with an atom.  Temporal successors and
knowledge partners are computed from the atoms; states lacking a successor,
a fulfilling path for an until, or a witness for a negated knowledge or
common-knowledge formula are deleted until nothing changes.

Atoms of the extended closures ``cl_{k,i}`` contain one formula ``K_i D`` for
every disjunction ``D`` of lower-level members.  They are stored compactly as
a lower-level atom plus the set ``W`` of lower-level atoms agent ``i``
considers possible; ``K_i D`` belongs to the atom iff every member of ``W``
satisfies ``D``.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .syntax import (And, ClosureTooLarge, Common, Everyone, Formula, Know, Next, Not, Prop, Until,
                     UnsupportedFormula, absorptive_concat, agents_of, alternation_depth,
                     basic_closure, canonical_disjunction, conj, mentions_group_knowledge, possible,
                     props_of, size, to_text)
from .systems import Cell, LassoSystem, Point, evaluate, from_lassos, uis_transform

SAT_CLASSES = ("all", "sync", "uis", "sync_uis")
PADDING = "x"
DEFAULT_STATE_CAP = 60_000


class ExtractionError(RuntimeError):
    """A satisfiable verdict whose model could not be confirmed."""


# ---------------------------------------------------------------- atoms

_RANK = {Prop: 0, Not: 1, And: 2, Know: 3, Next: 4, Until: 5, Common: 6, Everyone: 7}


def _order(cl) -> list[Formula]:
    return sorted((f for f in cl if not isinstance(f, Not)),
                  key=lambda f: (size(f), _RANK[type(f)], to_text(f, sugar=False)))


def _value(true: set, f: Formula) -> bool:
    if isinstance(f, Not):
        return not _value(true, f.sub)
    return f in true


def atoms_of(cl, m: int | None = None, cap: int = DEFAULT_STATE_CAP) -> list[frozenset]:
    """All locally consistent maximal subsets of ``cl``, in a fixed order.

    Each atom is returned as the set of closure members it contains.
    """
    members = cl.formulas if hasattr(cl, "formulas") else frozenset(cl)
    m = m if m is not None else max((a for f in members for a in agents_of(f)), default=1)
    order = _order(members)
    out: list[frozenset] = []
    true: set = set()

    def options(f: Formula) -> tuple[bool, ...]:
        if isinstance(f, Prop) or isinstance(f, Next):
            return (False, True)
        if isinstance(f, And):
            return (_value(true, f.left) and _value(true, f.right),)
        if isinstance(f, Know):
            if not _value(true, f.sub):
                return (False,)
            if isinstance(f.sub, Common) and f.sub in true:
                return (True,)
            return (False, True)
        if isinstance(f, Common):
            return (True, False) if _value(true, f.sub) else (False,)
        if isinstance(f, Everyone):
            v = all(Know(j, f.sub) in true for j in range(1, m + 1))
            if isinstance(f.sub, Common) and f.sub in true and not v:
                return ()
            return (v,)
        if isinstance(f, Until):
            if _value(true, f.right):
                return (True,)
            return (False, True) if _value(true, f.left) else (False,)
        raise TypeError(f"unexpected closure member {f!r}")

    def extend(k: int) -> None:
        if k == len(order):
            if len(out) >= cap:
                raise ClosureTooLarge(f"more than {cap} atoms")
            out.append(frozenset(f for f in members if _value(true, f)))
            return
        f = order[k]
        for v in options(f):
            if v:
                true.add(f)
            extend(k + 1)
            true.discard(f)

    extend(0)
    return out


# ---------------------------------------------------------------- states

@dataclass(frozen=True)
class Atom:
    base: frozenset                  # members of the basic closure
    worlds: tuple = ()               # (agent, frozenset of base atoms) pairs

    def world_set(self, agent: int) -> frozenset | None:
        for a, w in self.worlds:
            if a == agent:
                return w
        return None


@dataclass(frozen=True)
class SigmaState:
    index: tuple
    atom: Atom


class Information(NamedTuple):
    index: tuple
    known: frozenset
    worlds: frozenset | None


def holds(atom: Atom, f: Formula) -> bool:
    """Membership of ``f`` in ``atom``, reading knowledge of disjunctions off ``W``."""
    if f in atom.base:
        return True
    if isinstance(f, Not):
        if f.sub in atom.base:
            return False
        return not holds(atom, f.sub)
    if isinstance(f, And):
        return holds(atom, f.left) and holds(atom, f.right)
    if isinstance(f, Know):
        w = atom.world_set(f.agent)
        if w is not None:
            return all(holds(Atom(z), f.sub) for z in w)
    return False


def current_information(s: SigmaState, agent: int) -> Information:
    """What ``agent`` knows at ``s``: its index after absorbing ``agent`` and ``X/K_i``."""
    known = frozenset(f.sub for f in s.atom.base if isinstance(f, Know) and f.agent == agent)
    return Information(absorptive_concat(s.index, agent), known, s.atom.world_set(agent))


def atom_formula(atom: Atom) -> Formula:
    parts = sorted(atom.base, key=lambda f: to_text(f, sugar=False))
    body = conj(parts)
    for agent, w in atom.worlds:
        options = [conj(sorted(z, key=lambda f: to_text(f, sugar=False))) for z in w]
        body = And(body, Know(agent, canonical_disjunction(options)))
        for option in sorted(options, key=lambda f: to_text(f, sugar=False)):
            body = And(body, possible(agent, option))
    return body


# ---------------------------------------------------------------- pre-model

@dataclass
class PreModel:
    psi: Formula
    d: int
    m: int
    closure: object
    bases: list                      # base atoms, each a frozenset of closure members
    states: list                     # SigmaState objects
    base_of: np.ndarray              # state -> base id
    succ: list                       # base id -> sorted tuple of successor base ids
    alive: np.ndarray
    trace: list = field(default_factory=list)

    def __post_init__(self):
        self._node: dict = {}
        for sid, s in enumerate(self.states):
            self._node.setdefault((s.index, int(self.base_of[sid])), []).append(sid)
        self._class_of: dict = {}
        self._members: dict = {}
        for i in range(1, self.m + 1):
            ids: dict = {}
            of = np.empty(len(self.states), dtype=np.int64)
            for sid, s in enumerate(self.states):
                of[sid] = ids.setdefault(current_information(s, i), len(ids))
            members: list = [[] for _ in ids]
            for sid in range(len(self.states)):
                members[of[sid]].append(sid)
            self._class_of[i] = of
            self._members[i] = members

    # relations --------------------------------------------------------
    def info_key(self, sid: int, agent: int) -> Information:
        return current_information(self.states[sid], agent)

    def class_id(self, sid: int, agent: int) -> int:
        return int(self._class_of[agent][sid])

    def node(self, sid: int) -> tuple:
        return self.states[sid].index, int(self.base_of[sid])

    def next_related(self, a: int, b: int) -> bool:
        return (self.states[a].index == self.states[b].index
                and int(self.base_of[b]) in self.succ[int(self.base_of[a])])

    def successors(self, sid: int, alive_only: bool = True) -> list[int]:
        index = self.states[sid].index
        out = []
        for b in self.succ[int(self.base_of[sid])]:
            for t in self._node.get((index, b), ()):
                if not alive_only or self.alive[t]:
                    out.append(t)
        return sorted(out)

    def representative_successors(self, sid: int) -> list[int]:
        """Lowest-id live state of each successor node; → only sees bases."""
        index = self.states[sid].index
        out = []
        for b in self.succ[int(self.base_of[sid])]:
            t = next((t for t in self._node.get((index, b), ()) if self.alive[t]), None)
            if t is not None:
                out.append(t)
        return sorted(out)

    def epistemic_classes(self, agent: int) -> list[list[int]]:
        return [list(c) for c in self._members[agent]]

    def partners(self, sid: int, agent: int, alive_only: bool = True) -> list[int]:
        group = self._members[agent][self._class_of[agent][sid]]
        return [t for t in group if not alive_only or self.alive[t]]

    def holds(self, sid: int, f: Formula) -> bool:
        return holds(self.states[sid].atom, f)

    def alive_ids(self) -> list[int]:
        return [int(s) for s in np.flatnonzero(self.alive)]

    def to_document(self) -> dict:
        def atom_doc(a: Atom) -> dict:
            doc = {"formulas": sorted(to_text(f) for f in a.base)}
            if a.worlds:
                doc["worlds"] = {str(i): sorted(self.bases.index(z) for z in w) for i, w in a.worlds}
            return doc

        return {
            "formula": to_text(self.psi),
            "depth": self.d,
            "agents": self.m,
            "states": [{"id": sid, "index": list(s.index), "alive": bool(self.alive[sid]),
                        "base": int(self.base_of[sid]), **atom_doc(s.atom)}
                       for sid, s in enumerate(self.states)],
            "next": {str(b): list(t) for b, t in enumerate(self.succ)},
            "knowledge": {str(i): self.epistemic_classes(i) for i in range(1, self.m + 1)},
            "elimination": self.trace,
        }


def _transitions(cl, bases: list[frozenset]) -> list[tuple]:
    nexts = [f for f in cl.formulas if isinstance(f, Next)]
    untils = [f for f in cl.formulas if isinstance(f, Until)]
    requirement = []
    for x in bases:
        req = [(f.sub, f in x) for f in nexts]
        req += [(u, u in x) for u in untils if u.left in x and u.right not in x]
        requirement.append(tuple(req))
    groups: dict = {}
    for b, req in enumerate(requirement):
        groups.setdefault(req, None)
    table = {}
    for req in groups:
        table[req] = tuple(t for t, y in enumerate(bases) if all(_value(y, f) == v for f, v in req))
    return [table[req] for req in requirement]


def _world_sets(bases: list[frozenset], agent: int, cap: int) -> dict:
    """Candidate ``W`` sets per base atom for knowledge of disjunctions."""
    knows = sorted({f for x in bases for f in x if isinstance(f, Know) and f.agent == agent},
                   key=lambda f: to_text(f, sugar=False))
    groups: dict = {}
    for b, x in enumerate(bases):
        groups.setdefault(frozenset(f for f in knows if f in x), []).append(b)
    options: dict = {b: [] for b in range(len(bases))}
    for part, ids in groups.items():
        if 2 ** len(ids) > cap:
            raise ClosureTooLarge(f"{2 ** len(ids)} knowledge sets for agent {agent} (cap {cap})")
        for r in range(1, len(ids) + 1):
            for combo in itertools.combinations(ids, r):
                ok = all((k in part) == all(_value(bases[z], k.sub) for z in combo) for k in knows)
                if ok:
                    w = frozenset(bases[z] for z in combo)
                    for z in combo:
                        options[z].append(w)
    return options


def build_premodel(psi: Formula, d: int | None = None, m: int | None = None,
                   cap: int = DEFAULT_STATE_CAP) -> PreModel:
    """All states for ``psi`` with indices of length at most ``d``.

    ``d`` defaults to the alternation depth of ``psi``, or 0 when ``psi``
    mentions group knowledge.
    """
    m = m if m is not None else max(agents_of(psi), default=1)
    if d is None:
        d = 0 if mentions_group_knowledge(psi) else alternation_depth(psi)
    if d > 1:
        raise UnsupportedFormula("pre-models are built for index length at most 1")
    if d and mentions_group_knowledge(psi):
        raise UnsupportedFormula("formulas with E or C use index length 0")
    cl = basic_closure(psi, m)
    bases = atoms_of(cl, m, cap)
    succ = _transitions(cl, bases)
    base_id = {x: b for b, x in enumerate(bases)}
    states: list[SigmaState] = []
    if d == 0:
        states = [SigmaState((), Atom(x)) for x in bases]
    else:
        worlds = {i: _world_sets(bases, i, cap) for i in range(1, m + 1)}
        for b, x in enumerate(bases):
            for combo in itertools.product(*(worlds[i][b] for i in range(1, m + 1))):
                states.append(SigmaState((), Atom(x, tuple(zip(range(1, m + 1), combo)))))
                if len(states) > cap:
                    raise ClosureTooLarge(f"more than {cap} states")
        for i in range(1, m + 1):
            for b, x in enumerate(bases):
                for w in worlds[i][b]:
                    states.append(SigmaState((i,), Atom(x, ((i, w),))))
            if len(states) > cap:
                raise ClosureTooLarge(f"more than {cap} states")
    base_of = np.array([base_id[s.atom.base] for s in states], dtype=np.int64)
    return PreModel(psi, d, m, cl, bases, states, base_of, succ, np.ones(len(states), dtype=bool))


# ---------------------------------------------------------------- elimination

def _live_nodes(pm: PreModel) -> set:
    return {pm.node(int(s)) for s in np.flatnonzero(pm.alive)}


def _fulfilled(pm: PreModel, u: Until, live: set) -> set:
    """Live nodes from which a live path through ``u``-nodes reaches ``u.right``."""
    good = {(index, b) for index, b in live if _value(pm.bases[b], u.right)}
    carrier = {(index, b) for index, b in live if u in pm.bases[b]} - good
    changed = True
    while changed:
        changed = False
        for index, b in list(carrier):
            if any((index, c) in good for c in pm.succ[b]):
                good.add((index, b))
                carrier.discard((index, b))
                changed = True
    return good


def _common_components(pm: PreModel) -> np.ndarray:
    n = len(pm.states)
    rows, cols = [], []
    alive = pm.alive_ids()
    for i in range(1, pm.m + 1):
        firsts: dict = {}
        for s in alive:
            key = pm.class_id(s, i)
            if key in firsts:
                rows.append(firsts[key])
                cols.append(s)
            else:
                firsts[key] = s
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    return connected_components(graph, directed=False)[1]


def _defect(pm: PreModel, s: int, live: set, fulfil: dict, comp: tuple | None) -> str | None:
    index, b = pm.node(s)
    if not any((index, c) in live for c in pm.succ[b]):
        return "no successor"
    atom = pm.states[s].atom
    for f in atom.base:
        if isinstance(f, Until) and f.right not in atom.base and (index, b) not in fulfil[f]:
            return f"unfulfilled {to_text(f)}"
    for i in range(1, pm.m + 1):
        partners = pm.partners(s, i)
        w = atom.world_set(i)
        if w is not None:
            have = {pm.states[t].atom.base for t in partners}
            if not w <= have:
                return f"agent {i} lacks a possible world"
        for f in pm.closure.formulas:
            if isinstance(f, Know) and f.agent == i and f not in atom.base:
                if not any(not pm.holds(t, f.sub) for t in partners):
                    return f"no witness for ~{to_text(f)}"
    if comp is not None:
        for f, refuted in comp[1].items():
            if f not in atom.base and comp[0][s] not in refuted:
                return f"no witness for ~{to_text(f)}"
    return None


def eliminate(pm: PreModel) -> PreModel:
    """Delete defective states until every survivor is free of defects."""
    untils = [f for f in pm.closure.formulas if isinstance(f, Until)]
    has_common = any(isinstance(f, Common) for f in pm.closure.formulas)
    pm.trace = []
    while True:
        live = _live_nodes(pm)
        fulfil = {u: _fulfilled(pm, u, live) for u in untils}
        comp = None
        if has_common:
            labels = _common_components(pm)
            commons = [f for f in pm.closure.formulas if isinstance(f, Common)]
            refuted = {f: {labels[t] for t in pm.alive_ids() if not pm.holds(t, f.sub)} for f in commons}
            comp = (labels, refuted)
        removed = []
        for s in pm.alive_ids():
            why = _defect(pm, s, live, fulfil, comp)
            if why:
                removed.append((s, why))
        if not removed:
            return pm
        for s, _ in removed:
            pm.alive[s] = False
        pm.trace.append({"round": len(pm.trace) + 1, "removed": [[s, why] for s, why in removed]})


# ---------------------------------------------------------------- acceptable sequences

def _bfs_path(pm: PreModel, start: int, goal, within=None) -> list[int] | None:
    """Shortest live path from ``start`` (exclusive) to a state satisfying ``goal``."""
    parent: dict = {}
    queue = deque([start])
    while queue:
        s = queue.popleft()
        for t in pm.representative_successors(s):
            if t in parent or (within is not None and t not in within):
                continue
            parent[t] = s
            if goal(t):
                path, u = [t], s
                while u != start:
                    path.append(u)
                    u = parent[u]
                return path[::-1]
            queue.append(t)
    return None


def _scc(pm: PreModel, nodes: list[int]) -> dict:
    pos = {s: k for k, s in enumerate(nodes)}
    rows, cols = [], []
    for s in nodes:
        for t in pm.representative_successors(s):
            if t in pos:
                rows.append(pos[s])
                cols.append(pos[t])
    n = len(nodes)
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    labels = connected_components(graph, directed=True, connection="strong")[1]
    groups: dict = {}
    for s in nodes:
        groups.setdefault(int(labels[pos[s]]), set()).add(s)
    return {s: groups[int(labels[pos[s]])] for s in nodes}


def _pending(pm: PreModel, seq: list[int]) -> list[Until]:
    """Untils occurring in ``seq`` whose right side never occurs in ``seq``, oldest first."""
    out: list[Until] = []
    seen = set()
    for s in seq:
        for f in sorted(pm.states[s].atom.base, key=lambda f: to_text(f, sugar=False)):
            if isinstance(f, Until) and f not in seen:
                seen.add(f)
                if not any(pm.holds(t, f.right) for t in seq):
                    out.append(f)
    return out


def _self_fulfilling(pm: PreModel, comp: set) -> bool:
    if len(comp) == 1:
        (s,) = comp
        if s not in pm.representative_successors(s):
            return False
    return not _pending(pm, sorted(comp))


def _loop_from(pm: PreModel, c: int, comp: set) -> list[int]:
    loop = [c]
    while True:
        pending = _pending(pm, loop)
        if pending:
            target = pending[0]
            path = _bfs_path(pm, loop[-1], lambda t: pm.holds(t, target.right), comp)
            loop.extend(path)
            continue
        if c in pm.representative_successors(loop[-1]):
            return loop
        back = _bfs_path(pm, loop[-1], lambda t: t == c, comp)
        loop.extend(back[:-1])
        if not _pending(pm, loop):
            return loop


def acceptable_extension(pm: PreModel, prefix: list[int]) -> tuple[list[int], list[int]]:
    """Extend a live →-path to a lasso whose unfolding fulfils every until."""
    if not prefix:
        raise ValueError("empty prefix")
    for a, b in zip(prefix, prefix[1:]):
        if not pm.next_related(a, b):
            raise ValueError("prefix is not a live →-path")
    if not all(pm.alive[s] for s in prefix):
        raise ValueError("prefix visits an eliminated state")
    last = prefix[-1]
    reach = {last}
    queue = deque([last])
    while queue:
        for t in pm.representative_successors(queue.popleft()):
            if t not in reach:
                reach.add(t)
                queue.append(t)
    comps = _scc(pm, sorted(reach))
    if _self_fulfilling(pm, comps[last]):
        return list(prefix[:-1]), _loop_from(pm, last, comps[last])
    path = _bfs_path(pm, last, lambda t: _self_fulfilling(pm, comps[t]))
    entry = path[-1]
    return list(prefix) + path[:-1], _loop_from(pm, entry, comps[entry])


def is_acceptable(pm: PreModel, head: list[int], loop: list[int]) -> bool:
    """Independent scan of the unfolding for →-steps and until fulfilment."""
    horizon = 3 * (len(head) + len(loop))
    seq = [head[n] if n < len(head) else loop[(n - len(head)) % len(loop)] for n in range(horizon + len(loop))]
    for a, b in zip(seq, seq[1:]):
        if not pm.next_related(a, b):
            return False
    for n in range(horizon):
        for f in pm.states[seq[n]].atom.base:
            if isinstance(f, Until):
                k = n
                while k < len(seq) and not pm.holds(seq[k], f.right):
                    if not pm.holds(seq[k], f.left):
                        return False
                    k += 1
                if k == len(seq):
                    return False
    return True


# ---------------------------------------------------------------- Φ formulas

def phi_formulas(pm: PreModel, sid: int, agent: int, plus: bool = False) -> Formula:
    """Disjunction of the atom formulas of ``sid``'s ``agent``-partners at one level."""
    index = pm.states[sid].index
    level = absorptive_concat(index, agent) if plus else index
    partners = [t for t in pm.partners(sid, agent, alive_only=False) if pm.states[t].index == level]
    return canonical_disjunction([atom_formula(pm.states[t].atom) for t in partners])


# ---------------------------------------------------------------- satisfiability

@dataclass
class SatResult:
    verdict: str
    system: LassoSystem | None = None
    point: Point | None = None
    trace: list = field(default_factory=list)
    labels: list = field(default_factory=list)   # per run: (offset, head ids, loop ids)
    premodel: PreModel | None = None
    shift: int = 0                                # 1 once a shared initial state is prepended

    @property
    def satisfiable(self) -> bool:
        return self.verdict == "SAT"

    def label_at(self, point: Point) -> int | None:
        """The state labelling a point, or ``None`` for padding and initial points."""
        offset, head, loop = self.labels[point.run]
        n = point.time - self.shift - offset
        if n < 0:
            return None
        return head[n] if n < len(head) else loop[(n - len(head)) % len(loop)]


def _needed(pm: PreModel, lassos: dict, start: int, every_label: bool = False) -> list[int]:
    """Start states whose lassos, with ``start``'s, contain every required witness.

    With ``every_label`` each labelling state also gets a run of its own, so
    clocked covers can place it at any time.
    """
    starts = [start]
    labels = set(itertools.chain(*_ensure(pm, lassos, start)))
    has_common = any(isinstance(f, Common) for f in pm.closure.formulas)
    changed = True
    while changed:
        changed = False
        for s in sorted(labels):
            extras = _missing_witnesses(pm, s, labels, has_common)
            if every_label:
                extras.append(s)
            for extra in extras:
                if extra not in starts:
                    starts.append(extra)
                    labels |= set(itertools.chain(*_ensure(pm, lassos, extra)))
                    changed = True
    return starts


def _ensure(pm: PreModel, lassos: dict, s: int):
    if s not in lassos:
        lassos[s] = acceptable_extension(pm, [s])
    return lassos[s]


def _missing_witnesses(pm: PreModel, s: int, labels: set, has_common: bool) -> list[int]:
    atom = pm.states[s].atom
    out = []
    for i in range(1, pm.m + 1):
        partners = pm.partners(s, i)
        for f in sorted(pm.closure.formulas, key=lambda f: to_text(f, sugar=False)):
            if isinstance(f, Know) and f.agent == i and f not in atom.base:
                if not any(t in labels and not pm.holds(t, f.sub) for t in partners):
                    out.append(min(t for t in partners if not pm.holds(t, f.sub)))
    if has_common:
        for f in sorted(pm.closure.formulas, key=lambda f: to_text(f, sugar=False)):
            if isinstance(f, Common) and f not in atom.base:
                out.extend(_common_path(pm, s, f.sub, labels))
    return out


def _common_path(pm: PreModel, s: int, f: Formula, labels: set) -> list[int]:
    """States on a shortest live knowledge path from ``s`` to a state refuting ``f``."""
    parent = {s: None}
    queue = deque([s])
    while queue:
        u = queue.popleft()
        if not pm.holds(u, f):
            path = []
            while u is not None:
                path.append(u)
                u = parent[u]
            return [t for t in path[::-1] if t not in labels]
        for i in range(1, pm.m + 1):
            for t in pm.partners(u, i):
                if t not in parent:
                    parent[t] = u
                    queue.append(t)
    raise ExtractionError("common-knowledge witness missing after elimination")


def _cells(pm: PreModel, ids: list[int], props: frozenset) -> list[Cell]:
    out = []
    for s in ids:
        locals_ = []
        for i in range(1, pm.m + 1):
            locals_.append(f"o{i}.{min(pm.partners(s, i, alive_only=False))}")
        val = frozenset(f.name for f in pm.states[s].atom.base if isinstance(f, Prop) and f.name in props)
        out.append(Cell(f"s{s}", tuple(locals_), val))
    return out


def decide_sat(psi: Formula, klass: str = "all", m: int | None = None,
               cap: int = DEFAULT_STATE_CAP, max_doublings: int = 8,
               max_cells: int = 2_000_000) -> SatResult:
    """Decide satisfiability of ``psi`` in a base class and return a checked model."""
    if klass not in SAT_CLASSES:
        raise ValueError(f"class must be one of {', '.join(SAT_CLASSES)}")
    m = m if m is not None else max(agents_of(psi), default=1)
    pm = eliminate(build_premodel(psi, d=0, m=m, cap=cap))
    candidates = [s for s in pm.alive_ids() if psi in pm.states[s].atom.base or pm.holds(s, psi)]
    if not candidates:
        return SatResult("UNSAT", trace=pm.trace, premodel=pm)
    start = candidates[0]
    lassos: dict = {}
    clocked = klass in ("sync", "sync_uis")
    starts = _needed(pm, lassos, start, every_label=clocked)
    props = frozenset(props_of(psi))
    if not clocked:
        runs = [(_cells(pm, lassos[s][0], props), _cells(pm, lassos[s][1], props)) for s in starts]
        labels = [(0, lassos[s][0], lassos[s][1]) for s in starts]
        sys = from_lassos(m, False, runs, props)
        point = Point(0, 0)
        if not evaluate(sys, point, psi):
            raise ExtractionError(f"extracted model refutes {to_text(psi)}")
    else:
        cover = len(lassos[start][0]) + len(lassos[start][1])
        pad = Cell(PADDING, tuple(PADDING for _ in range(m)), frozenset())
        for _ in range(max_doublings + 1):
            runs, labels = [], []
            for s in starts:
                head, loop = lassos[s]
                h, lp = _cells(pm, head, props), _cells(pm, loop, props)
                for o in range(cover + 1):
                    runs.append(([pad] * o + h, lp))
                    labels.append((o, head, loop))
            sys = from_lassos(m, True, runs, props)
            point = Point(0, 0)
            if evaluate(sys, point, psi):
                break
            cover *= 2
            if len(runs) * 2 * sys.window > max_cells:
                raise ExtractionError("clocked run cover exceeded its size limit")
        else:
            raise ExtractionError("clocked run cover exhausted its doublings")
    if klass in ("uis", "sync_uis"):
        sys = uis_transform(sys)
        point = Point(point.run, point.time + 1)
        if not evaluate(sys, point, psi):
            raise ExtractionError("initial-state transform broke the model")
    return SatResult("SAT", sys, point, pm.trace, labels, pm, shift=point.time)
