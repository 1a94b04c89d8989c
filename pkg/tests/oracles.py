"""Reference implementations used only by the tests.

Each oracle recomputes something the library computes, by a different and
deliberately naive route.
"""

from __future__ import annotations

import itertools
import random

from ketl.axioms import random_formula, random_instance
from ketl.syntax import (And, Common, Everyone, Formula, Know, Next, Not, Prop, RESERVED_PROP,
                         Until, agents_of, props_of, subformulas)
from ketl.systems import LassoSystem


# ---------------------------------------------------------------- unrolled evaluation

def _op_depth(f: Formula) -> int:
    kids = [getattr(f, a) for a in ("sub", "left", "right") if hasattr(f, a)]
    return 1 + max((_op_depth(k) for k in kids), default=0)


def unrolled_tables(sys: LassoSystem, f: Formula, horizon: int) -> dict:
    """Truth of every subformula at points (r, n) for n < horizon.

    Runs are unrolled to a long finite prefix and nothing is folded back onto
    canonical positions: time n reads cell n of the infinite run, untils
    search forward for a witness, and knowledge ranges over every unrolled
    point.  Each operator level costs 2W of lookahead, so the unrolled
    length is padded accordingly.
    """
    W = sys.window
    T = horizon + 2 * W * (_op_depth(f) + 1)
    R = sys.run_count

    def cell(r, n):
        return sys.runs[r][sys.canon(n)]

    def local(r, n, i):
        core = cell(r, n).locals[i - 1]
        return (n, core) if sys.clocked else core

    # valid[g] = number of leading times at which the table of g is exact
    tab, valid = {}, {}
    for g in subformulas(f):
        if g in tab:
            continue
        if isinstance(g, Prop):
            tab[g] = [[g.name != RESERVED_PROP and g.name in cell(r, n).val for n in range(T)]
                      for r in range(R)]
            valid[g] = T
        elif isinstance(g, Not):
            tab[g] = [[not x for x in row] for row in tab[g.sub]]
            valid[g] = valid[g.sub]
        elif isinstance(g, And):
            tab[g] = [[a and b for a, b in zip(x, y)] for x, y in zip(tab[g.left], tab[g.right])]
            valid[g] = min(valid[g.left], valid[g.right])
        elif isinstance(g, Next):
            v = valid[g.sub] - 1
            tab[g] = [[tab[g.sub][r][n + 1] if n < v else False for n in range(T)] for r in range(R)]
            valid[g] = v
        elif isinstance(g, Until):
            v = min(valid[g.left], valid[g.right])
            out = []
            for r in range(R):
                row = []
                for n in range(T):
                    hit = False
                    for k in range(n, v):
                        if tab[g.right][r][k]:
                            hit = True
                            break
                        if not tab[g.left][r][k]:
                            break
                    row.append(hit)
                out.append(row)
            tab[g] = out
            valid[g] = max(v - 2 * W, 0)
        else:
            v = valid[g.sub]
            agents = [g.agent] if isinstance(g, Know) else list(range(1, sys.m + 1))
            points = [(r, n) for r in range(R) for n in range(v)]

            def related(a, b):
                return any(local(*a, i) == local(*b, i) for i in agents)

            out = [[False] * T for _ in range(R)]
            for r in range(R):
                for n in range(v):
                    if isinstance(g, Common):
                        seen, stack, ok = {(r, n)}, [(r, n)], True
                        while stack and ok:
                            a = stack.pop()
                            for b in points:
                                if b not in seen and related(a, b):
                                    seen.add(b)
                                    stack.append(b)
                                    ok = ok and tab[g.sub][b[0]][b[1]]
                        # the start point is reachable from itself in one step
                        out[r][n] = ok and tab[g.sub][r][n]
                    else:
                        out[r][n] = all(tab[g.sub][b[0]][b[1]] for b in points
                                        if related((r, n), b))
            tab[g] = out
            valid[g] = v
    if valid[f] < horizon:
        raise AssertionError("unrolling too short for the requested horizon")
    return {g: [row[:horizon] for row in t] for g, t in tab.items()}


# ---------------------------------------------------------------- E^k fixpoint

def common_by_iteration(sys: LassoSystem, sub_table) -> list:
    """C by iterating E: the meet of E^k(sub) for k >= 1 until it stabilises."""
    R, W = sys.run_count, sys.window
    cells = [(r, c) for r in range(R) for c in range(W)]

    def everyone(tab):
        out = [[True] * W for _ in range(R)]
        for (r, c) in cells:
            for i in range(1, sys.m + 1):
                key = lambda x: ((x[1], sys.runs[x[0]][x[1]].locals[i - 1]) if sys.clocked  # noqa: E731
                                 else sys.runs[x[0]][x[1]].locals[i - 1])
                if not all(tab[r2][c2] for (r2, c2) in cells if key((r2, c2)) == key((r, c))):
                    out[r][c] = False
        return out

    level = everyone([[bool(sub_table[r][c]) for c in range(W)] for r in range(R)])
    meet = [row[:] for row in level]
    while True:
        level = everyone([[level[r][c] and bool(sub_table[r][c]) for c in range(W)]
                          for r in range(R)])
        new = [[meet[r][c] and level[r][c] for c in range(W)] for r in range(R)]
        if new == meet:
            return meet
        meet = new


# ---------------------------------------------------------------- bounded model search

def _partitions(n: int):
    """Set partitions of range(n) as restricted growth strings."""
    def grow(prefix, top):
        if len(prefix) == n:
            yield tuple(prefix)
            return
        for b in range(top + 2):
            yield from grow(prefix + [b], max(top, b))
    if n == 0:
        yield ()
    else:
        yield from grow([0], 0)


def bounded_model_search(psi: Formula, max_runs: int = 2, max_window: int = 3):
    """Exhaustively look for an unclocked lasso system satisfying ``psi`` somewhere.

    All valuations are handled at once: bit ``v`` of a cell's integer is the
    truth value under valuation number ``v``.  Returns ``(shape, partitions,
    valuation, cell)`` for a model, or ``None``.
    """
    props = sorted(props_of(psi) - {RESERVED_PROP})
    m = max(agents_of(psi), default=1)
    group = any(isinstance(g, (Everyone, Common)) for g in subformulas(psi))
    agents = list(range(1, m + 1)) if group else sorted(agents_of(psi))
    P = len(props)
    for R in range(1, max_runs + 1):
        for W in range(1, max_window + 1):
            for pre in range(W):
                n = R * W
                nbits = n * P
                full = (1 << (1 << nbits)) - 1
                prop_bits = {}
                for j, name in enumerate(props):
                    for c in range(n):
                        bit = c * P + j
                        value = 0
                        for v in range(1 << nbits):
                            if v >> bit & 1:
                                value |= 1 << v
                        prop_bits[name, c] = value
                succ = []
                for r in range(R):
                    for c in range(W):
                        succ.append(r * W + (c + 1 if c + 1 < W else pre))
                choices = [list(_partitions(n)) for _ in agents] or [[()]]
                for combo in itertools.product(*choices):
                    blocks = dict(zip(agents, combo))
                    tab = _bit_tables(psi, n, succ, blocks, prop_bits, full, W)
                    for c in range(n):
                        if tab[c]:
                            v = (tab[c] & -tab[c]).bit_length() - 1
                            return (R, W, pre), blocks, v, c
    return None


def _bit_tables(psi, n, succ, blocks, prop_bits, full, W):
    memo = {}

    def know(sub, part):
        out = [0] * n
        groups = {}
        for c, b in enumerate(part):
            groups.setdefault(b, []).append(c)
        for members in groups.values():
            acc = full
            for c in members:
                acc &= sub[c]
            for c in members:
                out[c] = acc
        return out

    def go(g):
        if g in memo:
            return memo[g]
        if isinstance(g, Prop):
            out = [0] * n if g.name == RESERVED_PROP else [prop_bits[g.name, c] for c in range(n)]
        elif isinstance(g, Not):
            out = [full ^ x for x in go(g.sub)]
        elif isinstance(g, And):
            out = [a & b for a, b in zip(go(g.left), go(g.right))]
        elif isinstance(g, Next):
            s = go(g.sub)
            out = [s[succ[c]] for c in range(n)]
        elif isinstance(g, Until):
            a, b = go(g.left), go(g.right)
            out = list(b)
            for _ in range(W + 1):
                out = [b[c] | (a[c] & out[succ[c]]) for c in range(n)]
        elif isinstance(g, Know):
            out = know(go(g.sub), blocks[g.agent])
        elif isinstance(g, Everyone):
            s = go(g.sub)
            out = [full] * n
            for part in blocks.values():
                out = [x & y for x, y in zip(out, know(s, part))]
        else:  # Common: one component of the union of all relations at a time
            s = go(g.sub)
            parent = list(range(n))

            def find(x):
                while parent[x] != x:
                    parent[x] = parent[parent[x]]
                    x = parent[x]
                return x
            for part in blocks.values():
                first = {}
                for c, b in enumerate(part):
                    if b in first:
                        parent[find(c)] = find(first[b])
                    else:
                        first[b] = c
            comp = {}
            for c in range(n):
                comp.setdefault(find(c), []).append(c)
            out = [0] * n
            for members in comp.values():
                acc = full
                for c in members:
                    acc &= s[c]
                for c in members:
                    out[c] = acc
        memo[g] = out
        return out

    return go(psi)


# ---------------------------------------------------------------- corpora

SCHEMA_POOL = ("K1", "K2", "K3", "K4", "K5", "T1", "T2", "T3", "C1", "C2")


def formula_corpus(seed: int = 0, n: int = 50) -> list[Formula]:
    """Mixed corpus: random formulas, conjunctions, and negated axiom instances."""
    rng = random.Random(f"corpus:{seed}")
    out = []
    while len(out) < n:
        k = len(out) % 5
        gk = rng.random() < 0.2
        if k in (0, 1):
            f = random_formula(rng, 3, ("p", "q"), 2, gk)
        elif k == 2:
            f = And(random_formula(rng, 2, ("p", "q"), 2, gk), random_formula(rng, 2, ("p", "q"), 2, gk))
        else:
            f = Not(random_instance(rng, rng.choice(SCHEMA_POOL), ("p", "q"), 2, depth=1,
                                    group_knowledge=gk))
        out.append(f)
    return out


def witness_system(psi: Formula, found) -> tuple[LassoSystem, tuple]:
    """Turn a result of :func:`bounded_model_search` into a system and point."""
    from ketl.systems import Cell, Point
    (R, W, pre), blocks, v, c = found
    props = sorted(props_of(psi) - {RESERVED_PROP})
    m = max(agents_of(psi), default=1)
    P = len(props)
    runs = []
    for r in range(R):
        run = []
        for k in range(W):
            idx = r * W + k
            cores = tuple(f"b{blocks[i][idx]}" if i in blocks else f"c{idx}" for i in range(1, m + 1))
            val = frozenset(name for j, name in enumerate(props) if v >> (idx * P + j) & 1)
            run.append(Cell("e", cores, val))
        runs.append(tuple(run))
    sys = LassoSystem(m, False, pre, W - pre, tuple(runs), frozenset(props))
    return sys, Point(c // W, c % W)
