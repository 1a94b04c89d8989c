"""Trees of states, tree steps, and runs derived from state sequences.

A k-tree is a set of pre-model states with one root at the empty index that
is closed upward under knowledge partners and has a partner one level down
for every non-root state.  A tree step maps each state of one tree to a
→-path ending in the next tree.  Runs for the recall and no-learning
classes are read off state sequences by recording, per agent, the history or
the future of its current information.
"""

from __future__ import annotations

import hashlib
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .properties import absorbed_lasso, canonical_lasso, concordant
from .syntax import (And, Formula, Prop, RESERVED_PROP, Until, absorb, absorptive_concat,
                     alternation_depth, mentions_group_knowledge, possible, to_text)
from .systems import Cell, LassoSystem, from_lassos
from .tableau import Information, PreModel, atom_formula, build_premodel, current_information, eliminate

RUN_KINDS = ("pr", "nl", "nl_pr", "nl_sync", "nl_pr_sync")
PADDING = "x"


# ---------------------------------------------------------------- trees

@dataclass(frozen=True)
class KTree:
    states: frozenset
    k: int

    def root(self, pm: PreModel) -> int:
        return next(s for s in sorted(self.states) if pm.states[s].index == ())


@dataclass(frozen=True)
class TreeCheck:
    ok: bool
    clause: str | None = None
    detail: str | None = None

    def __bool__(self) -> bool:
        return self.ok


def is_ktree(pm: PreModel, states, k: int) -> TreeCheck:
    """Check the k-tree conditions against the live states of ``pm``."""
    states = frozenset(states)
    for s in sorted(states):
        if len(pm.states[s].index) > k:
            return TreeCheck(False, "level", f"state {s} has index longer than {k}")
    roots = [s for s in states if pm.states[s].index == ()]
    if len(roots) != 1:
        return TreeCheck(False, "unique-root", f"{len(roots)} states with the empty index")
    for s in sorted(states):
        sigma = pm.states[s].index
        for i in range(1, pm.m + 1):
            up = absorptive_concat(sigma, i)
            if len(up) > k:
                continue
            for t in pm.partners(s, i):
                if pm.states[t].index == up and t not in states:
                    return TreeCheck(False, "upward", f"state {s} misses agent {i} partner {t}")
        if sigma:
            tau, i = sigma[:-1], sigma[-1]
            if not any(pm.states[t].index == tau for t in pm.partners(s, i) if t in states):
                return TreeCheck(False, "downward", f"state {s} has no agent {i} partner at {tau}")
    return TreeCheck(True)


def tree_of(pm: PreModel, root: int, k: int) -> KTree:
    """The least k-tree with the given root: close upward under live partners."""
    members = {root}
    todo = [root]
    while todo:
        s = todo.pop()
        sigma = pm.states[s].index
        for i in range(1, pm.m + 1):
            up = absorptive_concat(sigma, i)
            if len(up) > k:
                continue
            for t in pm.partners(s, i):
                if pm.states[t].index == up and t not in members:
                    members.add(t)
                    todo.append(t)
    return KTree(frozenset(members), k)


@dataclass(frozen=True)
class TreeStep:
    source: KTree
    target: KTree
    f: tuple  # sorted (state, path) pairs

    def path(self, s: int) -> tuple:
        return dict(self.f)[s]


def check_tree_step(pm: PreModel, step: TreeStep) -> TreeCheck:
    paths = dict(step.f)
    if set(paths) != set(step.source.states):
        return TreeCheck(False, "domain", "f must be defined exactly on the source tree")
    for s, path in sorted(paths.items()):
        if not path or path[0] != s:
            return TreeCheck(False, "start", f"f({s}) does not start at {s}")
        for a, b in zip(path, path[1:]):
            if not pm.next_related(a, b):
                return TreeCheck(False, "path", f"f({s}) has a non-→ step {a} to {b}")
        if any(t not in step.source.states for t in path[:-1]):
            return TreeCheck(False, "inside", f"f({s}) leaves the source tree early")
        if path[-1] not in step.target.states:
            return TreeCheck(False, "inside", f"f({s}) does not end in the target tree")
    for i in range(1, pm.m + 1):
        for s in sorted(paths):
            for t in sorted(paths):
                if s < t and pm.class_id(s, i) == pm.class_id(t, i):
                    related = lambda a, b: pm.class_id(a, i) == pm.class_id(b, i)  # noqa: E731
                    if not concordant(paths[s], paths[t], related, transitive=True):
                        return TreeCheck(False, "concordance",
                                         f"f({s}) and f({t}) are not agent {i} concordant")
    if not any(len(p) >= 2 for p in paths.values()):
        return TreeCheck(False, "progress", "every path has length one")
    return TreeCheck(True)


def tree_formula(pm: PreModel, tree: KTree, s: int) -> Formula:
    """Description of ``tree`` as seen from ``s``."""
    body = atom_formula(pm.states[s].atom)
    sigma = pm.states[s].index
    if not sigma:
        return body
    tau, i = sigma[:-1], sigma[-1]
    for t in sorted(tree.states):
        if pm.states[t].index == tau and pm.class_id(s, i) == pm.class_id(t, i):
            body = And(body, possible(i, tree_formula(pm, tree, t)))
    return body


# ---------------------------------------------------------------- sequences

@dataclass(frozen=True)
class Lasso:
    head: tuple
    loop: tuple

    def at(self, n: int):
        if n < len(self.head):
            return self.head[n]
        return self.loop[(n - len(self.head)) % len(self.loop)]

    def prefix(self, n: int) -> tuple:
        return tuple(self.at(k) for k in range(n))


def fusion(a: Sequence, b):
    """``a`` without its last element followed by ``b``; ``b`` may be a :class:`Lasso`."""
    a = tuple(a)
    if not a:
        raise ValueError("fusion needs a nonempty finite left sequence")
    first = b.at(0) if isinstance(b, Lasso) else (tuple(b)[0] if len(tuple(b)) else None)
    if first is None or a[-1] != first:
        raise ValueError("fusion is defined only when the sequences meet")
    if isinstance(b, Lasso):
        return Lasso(a[:-1] + b.head, b.loop) if b.head else Lasso(a[:-1], b.loop)
    return a[:-1] + tuple(b)


def compression(seq, advances: Callable[[object, object], bool] | Sequence[bool]):
    """Drop stuttering, keeping each element reached by a genuine advance.

    ``advances`` is either a predicate on consecutive elements or one flag
    per step.  A finite result is a tuple; an infinite one a :class:`Lasso`.
    """
    if isinstance(seq, Lasso):
        if not callable(advances):
            raise ValueError("lasso compression needs an advance predicate")
        unrolled = seq.prefix(len(seq.head) + len(seq.loop) + 1)
        flags = [advances(a, b) for a, b in zip(unrolled, unrolled[1:])]
        head = [unrolled[0]] + [unrolled[k + 1] for k in range(len(seq.head)) if flags[k]]
        loop = [unrolled[k + 1] for k in range(len(seq.head), len(flags)) if flags[k]]
        if not loop:
            return tuple(head)
        return Lasso(tuple(head), tuple(loop))
    seq = tuple(seq)
    if not seq:
        return ()
    flags = [advances(a, b) for a, b in zip(seq, seq[1:])] if callable(advances) else list(advances)
    if len(flags) != len(seq) - 1:
        raise ValueError("one advance flag per step is required")
    out = [seq[0]]
    for k, flag in enumerate(flags):
        if flag:
            out.append(seq[k + 1])
        elif seq[k + 1] != seq[k]:
            raise ValueError(f"step {k} changes state without advancing")
    return tuple(out)


# ---------------------------------------------------------------- derived runs

def information_token(info: Information) -> str:
    """Short stable name for a piece of current information."""
    parts = [",".join(map(str, info.index)),
             "|".join(sorted(to_text(f) for f in info.known))]
    if info.worlds is not None:
        parts.append("/".join(sorted("&".join(sorted(to_text(f) for f in z)) for z in info.worlds)))
    digest = hashlib.sha1(";".join(parts).encode()).hexdigest()[:10]
    return f"O{info.index[-1] if info.index else 0}:{digest}"


@dataclass
class DerivedRun:
    kind: str
    env: Lasso                      # environment states
    locals: tuple                   # per agent: Lasso of cores, or tuple prefix when truncated
    valuation: Lasso
    horizon: int
    truncated: bool
    clocked: bool

    def cells(self, n: int) -> Cell:
        cores = tuple(lp.at(n) if isinstance(lp, Lasso) else lp[n] for lp in self.locals)
        return Cell(self.env.at(n), cores, self.valuation.at(n))


def _future(word: Lasso, n: int, absorbing: bool) -> tuple:
    if n < len(word.head):
        head, loop = word.head[n:], word.loop
    else:
        off = (n - len(word.head)) % len(word.loop)
        head, loop = (), word.loop[off:] + word.loop[:off]
    return absorbed_lasso(head, loop) if absorbing else canonical_lasso(head, loop)


def derive_run(pm: PreModel, seq: Lasso, kind: str, horizon: int, offset: int = 0) -> DerivedRun:
    """Run whose agents record histories or futures of their current information.

    ``seq`` is a lasso of state ids.  ``offset`` delays the sequence by that
    many padding steps (synchronous no-learning runs only).
    """
    if kind not in RUN_KINDS:
        raise ValueError(f"kind must be one of {', '.join(RUN_KINDS)}")
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if offset and kind != "nl_sync":
        raise ValueError("only synchronous no-learning runs take an offset")
    info = [Lasso(tuple(information_token(current_information(pm.states[s], i)) for s in seq.head),
                  tuple(information_token(current_information(pm.states[s], i)) for s in seq.loop))
            for i in range(1, pm.m + 1)]
    props = lambda s: frozenset(f.name for f in pm.states[s].atom.base  # noqa: E731
                                if isinstance(f, Prop) and f.name != RESERVED_PROP)
    pad = (PADDING,) * offset
    env = Lasso(pad + tuple(f"s{s}" for s in seq.head), tuple(f"s{s}" for s in seq.loop))
    val = Lasso((frozenset(),) * offset + tuple(props(s) for s in seq.head), tuple(props(s) for s in seq.loop))
    period = len(seq.head) + len(seq.loop)
    locals_ = []
    truncated = False
    for word in info:
        if kind == "pr":
            stable = len(set(word.loop)) == 1
            length = max(horizon, len(word.head) + 1) if stable else horizon
            cores = tuple(absorb(word.prefix(n + 1)) for n in range(length))
            if stable:
                locals_.append(Lasso(cores[:-1], cores[-1:]))
            else:
                locals_.append(cores)
                truncated = True
        elif kind == "nl":
            cores = [_future(word, n, True) for n in range(period)]
            locals_.append(Lasso(tuple(cores[:len(word.head)]), tuple(cores[len(word.head):])))
        elif kind == "nl_pr":
            cores = tuple((absorb(word.prefix(n + 1)), _future(word, n, True)) for n in range(horizon))
            locals_.append(cores)
            truncated = True
        elif kind == "nl_sync":
            padded = Lasso(pad + word.head, word.loop)
            cores = [_future(padded, n, False) for n in range(offset + period)]
            locals_.append(Lasso(tuple(cores[:len(padded.head)]), tuple(cores[len(padded.head):])))
        else:  # nl_pr_sync
            cores = tuple((word.prefix(n + 1)[1:], _future(word, n, False)) for n in range(horizon))
            locals_.append(cores)
            truncated = True
    return DerivedRun(kind, env, tuple(locals_), val, horizon, truncated,
                      kind in ("nl_sync", "nl_pr_sync"))


def system_of_runs(runs: Sequence[DerivedRun], m: int, props=()) -> LassoSystem:
    """Assemble derived runs into a lasso system.

    Truncated runs end in a per-run sink cell whose cores occur nowhere
    else; checks on such systems are meaningful only up to the horizon.
    """
    if not runs:
        raise ValueError("no runs")
    clocked = runs[0].clocked
    if any(r.clocked != clocked for r in runs):
        raise ValueError("cannot mix clocked and unclocked runs")
    lassos = []
    for k, r in enumerate(runs):
        if r.truncated:
            head = [r.cells(n) for n in range(r.horizon)]
            sink = Cell(f"end{k}", tuple(f"end{k}" for _ in range(m)), frozenset())
            lassos.append((head, [sink]))
        else:
            length = max(len(r.env.head), *(len(lp.head) for lp in r.locals))
            period = math.lcm(len(r.env.loop), *(len(lp.loop) for lp in r.locals))
            cells = [r.cells(n) for n in range(length + period)]
            lassos.append((cells[:length], cells[length:]))
    return from_lassos(m, clocked, lassos, props)


# ---------------------------------------------------------------- tree search

@dataclass
class TreeSearch:
    trees: list
    steps: list
    pending: list                       # undischarged until formulas at the last root
    exhausted: bool
    premodel: PreModel = field(repr=False, default=None)

    def root_sequence(self) -> list[int]:
        return [t.root(self.premodel) for t in self.trees]


def _pending(pm: PreModel, root: int, carried: list) -> list:
    base = pm.states[root].atom.base
    out = [u for u in carried if u in base and u.right not in base]
    for u in sorted((f for f in base if isinstance(f, Until) and f.right not in base),
                    key=lambda f: to_text(f, sugar=False)):
        if u not in out:
            out.append(u)
    return out


def _distance_to(pm: PreModel, start: int, goal) -> dict:
    """Live →-distance to a goal state from every state at the start's index.

    The relation depends only on base atoms, so the search runs on bases.
    """
    index = pm.states[start].index
    live: dict = {}
    for s in pm.alive_ids():
        if pm.states[s].index == index:
            live.setdefault(int(pm.base_of[s]), []).append(s)
    dist = {b: 0 for b, ids in live.items() if goal(ids[0])}
    preds: dict = {}
    for b in live:
        for c in pm.succ[b]:
            if c in live:
                preds.setdefault(c, []).append(b)
    frontier = deque(dist)
    while frontier:
        c = frontier.popleft()
        for b in preds.get(c, ()):
            if b not in dist:
                dist[b] = dist[c] + 1
                frontier.append(b)
    return {s: dist[b] for b, ids in live.items() if b in dist for s in ids}


def _step(pm: PreModel, source: KTree, target: KTree) -> TreeStep | None:
    root, new_root = source.root(pm), target.root(pm)
    paths = {root: (root, new_root)}
    for s in sorted(source.states - {root}):
        parent = {s: None}
        queue = deque([s])
        found = None
        while queue and found is None:
            u = queue.popleft()
            for t in pm.successors(u):
                if t in target.states:
                    found = (u, t)
                    break
                if t in source.states and t not in parent:
                    parent[t] = u
                    queue.append(t)
        if found is None:
            return None
        u, t = found
        path = [t, u]
        while parent[path[-1]] is not None:
            path.append(parent[path[-1]])
        paths[s] = tuple(path[::-1])
    step = TreeStep(source, target, tuple(sorted(paths.items())))
    return step if check_tree_step(pm, step) else None


def search_tree_sequence(psi: Formula, budget: int = 200, d: int | None = None,
                         m: int | None = None) -> TreeSearch:
    """Bounded search for tree steps that discharge the root's until obligations.

    Obligations are served oldest first; each step moves the root one →-step
    closer to fulfilling the oldest one.  ``budget`` bounds the number of
    candidate target trees tried.
    """
    if d is None:
        d = 0 if mentions_group_knowledge(psi) else min(alternation_depth(psi), 1)
    pm = eliminate(build_premodel(psi, d=d, m=m))
    roots = [s for s in pm.alive_ids() if pm.states[s].index == () and pm.holds(s, psi)]
    if not roots:
        return TreeSearch([], [], [], False, pm)
    tree = tree_of(pm, roots[0], d)
    trees, steps = [tree], []
    pending = _pending(pm, roots[0], [])
    tried = 0
    while pending:
        root = tree.root(pm)
        target_formula = pending[0]
        dist = _distance_to(pm, root, lambda s: pm.holds(s, target_formula.right))
        candidates = sorted((t for t in pm.successors(root) if t in dist),
                            key=lambda t: (dist[t], len(tree_of(pm, t, d).states), t))
        advanced = False
        for t in candidates:
            if tried >= budget:
                return TreeSearch(trees, steps, pending, True, pm)
            tried += 1
            nxt = tree_of(pm, t, d)
            step = _step(pm, tree, nxt)
            if step is not None:
                steps.append(step)
                trees.append(nxt)
                tree = nxt
                pending = _pending(pm, t, pending)
                advanced = True
                break
        if not advanced:
            return TreeSearch(trees, steps, pending, True, pm)
    return TreeSearch(trees, steps, [], False, pm)
