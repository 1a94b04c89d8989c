"""Axiom schemas, class-constrained system generators, soundness sweeps and
bounded counterexample search."""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .properties import absorbed_lasso, canonical_lasso
from .syntax import (RESERVED_PROP, And, Common, Everyone, Formula, Know, Meta, Next, Not, Prop,
                     Until, absorb, agents_of, always, children, conj, eventually, iff, implies,
                     or_, possible, props_of)
from .systems import (Cell, Evaluator, LassoSystem, Point, check_formula_fits, evaluate,
                      from_lassos)

AGENT_VAR = 0  # agent placeholder inside patterns
P1, P2, P3 = Meta("Φ1"), Meta("Φ2"), Meta("Φ3")


def _k(f: Formula) -> Formula:
    return Know(AGENT_VAR, f)


# Propositional tautology templates used to instantiate K1.
TAUTOLOGIES = (
    or_(P1, Not(P1)),
    implies(P1, P1),
    implies(P1, implies(P2, P1)),
    implies(And(P1, P2), P1),
    implies(implies(P1, implies(P2, P3)), implies(implies(P1, P2), implies(P1, P3))),
    implies(implies(implies(P1, P2), P1), P1),
    implies(Not(Not(P1)), P1),
    implies(implies(Not(P2), Not(P1)), implies(P1, P2)),
)


@dataclass(frozen=True)
class AxiomSchema:
    id: str
    build: Callable[[int], tuple]  # agent count -> pattern variants
    metavars: tuple
    uses_agent: bool = True
    group_knowledge: bool = False

    def patterns(self, m: int = 1) -> tuple:
        return self.build(m)


def _schema(id, pattern, metavars, uses_agent=True, group=False):
    return AxiomSchema(id, lambda m, p=pattern: (p,), metavars, uses_agent, group)


SCHEMAS: dict[str, AxiomSchema] = {s.id: s for s in (
    AxiomSchema("K1", lambda m: TAUTOLOGIES, ("Φ1", "Φ2", "Φ3"), uses_agent=False),
    _schema("K2", implies(And(_k(P1), _k(implies(P1, P2))), _k(P2)), ("Φ1", "Φ2")),
    _schema("K3", implies(_k(P1), P1), ("Φ1",)),
    _schema("K4", implies(_k(P1), _k(_k(P1))), ("Φ1",)),
    _schema("K5", implies(Not(_k(P1)), _k(Not(_k(P1)))), ("Φ1",)),
    _schema("T1", implies(And(Next(P1), Next(implies(P1, P2))), Next(P2)), ("Φ1", "Φ2"), False),
    # stated as a bi-implication: the one-way form leaves X non-functional
    _schema("T2", iff(Next(Not(P1)), Not(Next(P1))), ("Φ1",), False),
    _schema("T3", iff(Until(P1, P2), or_(P2, And(P1, Next(Until(P1, P2))))), ("Φ1", "Φ2"), False),
    AxiomSchema("C1", lambda m: (iff(Everyone(P1), conj(Know(i, P1) for i in range(1, m + 1))),),
                ("Φ1",), uses_agent=False, group_knowledge=True),
    _schema("C2", implies(Common(P1), Everyone(And(P1, Common(P1)))), ("Φ1",), False, True),
    _schema("KT1", implies(_k(always(P1)), always(_k(P1))), ("Φ1",)),
    _schema("KT2", implies(_k(Next(P1)), Next(_k(P1))), ("Φ1",)),
    _schema("KT3", implies(And(_k(P1), Next(And(_k(P2), Not(_k(P3))))),
                           Not(_k(Not(Until(_k(P1), Until(_k(P2), Not(P3))))))),
            ("Φ1", "Φ2", "Φ3")),
    _schema("KT4", implies(Until(_k(P1), _k(P2)), _k(Until(_k(P1), _k(P2)))), ("Φ1", "Φ2")),
    _schema("KT5", implies(Next(_k(P1)), _k(Next(P1))), ("Φ1",)),
    _schema("NLSU", iff(_k(P1), Know(1, P1)), ("Φ1",)),
)}

BASE_SCHEMAS = ("K1", "K2", "K3", "K4", "K5", "T1", "T2", "T3")
COMMON_SCHEMAS = ("C1", "C2")

# Extra schemas sound for each class (on top of the base set).
CLASS_AXIOMS: dict[frozenset, tuple] = {
    frozenset(): (),
    frozenset({"sync"}): (),
    frozenset({"uis"}): (),
    frozenset({"sync", "uis"}): (),
    frozenset({"pr"}): ("KT1", "KT3"),
    frozenset({"pr", "uis"}): ("KT1", "KT3"),
    frozenset({"pr", "sync"}): ("KT2",),
    frozenset({"pr", "sync", "uis"}): ("KT2",),
    frozenset({"nl"}): ("KT4",),
    frozenset({"nl", "uis"}): ("KT4",),
    frozenset({"nl", "pr"}): ("KT3", "KT4"),
    frozenset({"nl", "pr", "uis"}): ("KT3", "KT4"),
    frozenset({"nl", "sync"}): ("KT5",),
    frozenset({"nl", "pr", "sync"}): ("KT2", "KT5"),
    frozenset({"nl", "sync", "uis"}): ("KT2", "KT5", "NLSU"),
    frozenset({"nl", "pr", "sync", "uis"}): ("KT2", "KT5", "NLSU"),
}

AXIOM_SETS = {
    "S5U": BASE_SCHEMAS,
    "S5CU": BASE_SCHEMAS + COMMON_SCHEMAS,
}


def axiom_set(name: str) -> tuple[str, ...]:
    """Resolve names such as ``S5U+KT3`` or ``S5CU+KT2+KT5`` to schema ids."""
    base, *extra = name.split("+")
    if base not in AXIOM_SETS:
        raise ValueError(f"unknown axiom system {base!r}")
    for e in extra:
        if e not in SCHEMAS:
            raise ValueError(f"unknown axiom {e!r}")
    return AXIOM_SETS[base] + tuple(extra)


def substitute(pattern: Formula, binding: dict, agent: int | None) -> Formula:
    if isinstance(pattern, Meta):
        if pattern.name not in binding:
            raise KeyError(f"no binding for metavariable {pattern.name}")
        return binding[pattern.name]
    if isinstance(pattern, Prop):
        return pattern
    if isinstance(pattern, Know):
        i = pattern.agent
        if i == AGENT_VAR:
            if agent is None:
                raise KeyError("no binding for the agent metavariable")
            i = agent
        return Know(i, substitute(pattern.sub, binding, agent))
    kids = [substitute(c, binding, agent) for c in children(pattern)]
    return type(pattern)(*kids)


def instantiate(schema: AxiomSchema | str, binding: dict, agent: int | None = None,
                m: int = 1, variant: int = 0) -> Formula:
    """Substitute formulas for Φ1..Φ3 and an agent index into a schema."""
    if isinstance(schema, str):
        schema = SCHEMAS[schema]
    binding = {_metaname(k): v for k, v in binding.items()}
    return substitute(schema.patterns(m)[variant], binding, agent)


def _metaname(key) -> str:
    key = str(key)
    return key if key.startswith("Φ") else "Φ" + key.lstrip("PhiF")


# ---------------------------------------------------------------- random formulas

def random_formula(rng: random.Random, depth: int, props: Sequence[str], m: int,
                   group_knowledge: bool = False) -> Formula:
    """Depth-bounded random formula biased toward knowledge/temporal mixing."""
    if depth <= 0 or rng.random() < 0.15:
        return Prop(rng.choice(list(props)))
    ops = ["not", "and", "or", "imp", "K", "K", "L", "X", "X", "U", "U", "F", "G"]
    if group_knowledge:
        ops += ["E", "C", "C"]
    op = rng.choice(ops)
    sub = lambda: random_formula(rng, depth - 1, props, m, group_knowledge)  # noqa: E731
    agent = rng.randint(1, m)
    if op == "not":
        return Not(sub())
    if op == "and":
        return And(sub(), sub())
    if op == "or":
        return or_(sub(), sub())
    if op == "imp":
        return implies(sub(), sub())
    if op == "K":
        return Know(agent, sub())
    if op == "L":
        return possible(agent, sub())
    if op == "X":
        return Next(sub())
    if op == "U":
        return Until(sub(), sub())
    if op == "F":
        return eventually(sub())
    if op == "G":
        return always(sub())
    if op == "E":
        return Everyone(sub())
    return Common(sub())


def random_instance(rng: random.Random, schema: AxiomSchema | str, props: Sequence[str], m: int,
                    depth: int = 2, group_knowledge: bool = False) -> Formula:
    if isinstance(schema, str):
        schema = SCHEMAS[schema]
    binding = {v: random_formula(rng, rng.randint(0, depth), props, m, group_knowledge)
               for v in schema.metavars}
    variant = rng.randrange(len(schema.patterns(m)))
    return instantiate(schema, binding, rng.randint(1, m), m=m, variant=variant)


# ---------------------------------------------------------------- generators

@dataclass(frozen=True)
class GeneratorConfig:
    target: frozenset = frozenset()
    max_runs: int = 3
    max_window: int = 4
    m: int = 2
    props: tuple = ("p", "q")
    observations: int = 2
    seed: int = 0

    def __post_init__(self):
        unknown = set(self.target) - {"pr", "nl", "sync", "uis"}
        if unknown:
            raise ValueError(f"generators cover pr, nl, sync and uis; not {sorted(unknown)}")
        if min(self.max_runs, self.max_window, self.m, self.observations) < 1:
            raise ValueError("generator bounds must be positive")


def _unroll(head: list, loop: list, H: int, L: int) -> tuple[list, list]:
    word = head + loop * (H + L)
    return word[:H], [word[H + k] if H + k < len(head) else
                      loop[(H + k - len(head)) % len(loop)] for k in range(L)]


def _future(head: list, loop: list, n: int) -> tuple[list, list]:
    if n < len(head):
        return head[n:], loop
    off = (n - len(head)) % len(loop)
    return [], loop[off:] + loop[:off]


def generate_system(config: GeneratorConfig, rng: random.Random | None = None) -> LassoSystem:
    """Random system that belongs to ``config.target`` by construction.

    Agents see private observations; their local states are then chosen as
    observation histories (pr), observation futures (nl), or both, so the
    class conditions hold without rejection sampling.
    """
    rng = rng or random.Random(f"generate:{config.seed}")
    target = config.target
    pr, nl, sync, uis = ("pr" in target, "nl" in target, "sync" in target, "uis" in target)
    m, obs = config.m, config.observations
    R = rng.randint(1, config.max_runs)
    W = rng.randint(1, config.max_window)
    P = rng.randint(0, W - 1)
    Q = W - P

    def fresh_word() -> tuple[list, list]:
        head = [rng.randrange(obs) for _ in range(P)]
        loop = [rng.randrange(obs)] * Q if pr else [rng.randrange(obs) for _ in range(Q)]
        return head, loop

    shared = [fresh_word() for _ in range(m)]
    words = []  # words[r][i] = (head, loop)
    for _ in range(R):
        run = []
        for i in range(m):
            if nl and uis and sync:
                run.append(shared[i])
            elif nl and uis:
                head, loop = shared[i]
                stuttered = []
                for x in head:
                    stuttered += [x] * rng.randint(1, 2)
                run.append((stuttered, loop))
            else:
                head, loop = fresh_word()
                if uis:
                    first = (shared[i][0] + shared[i][1])[0]
                    if P:
                        head[0] = first
                    elif pr:
                        loop = [first] * Q
                    else:
                        loop[0] = first
                run.append((head, loop))
        words.append(run)

    H = max(len(h) for run in words for h, _ in run)
    L = math.lcm(*(len(lp) for run in words for _, lp in run))
    words = [[_unroll(h, lp, H, L) for h, lp in run] for run in words]

    def core(head: list, loop: list, n: int):
        word = head + loop
        if pr:
            hist = tuple(word[:min(n, H) + 1]) if sync else absorb(word[:n + 1])
        fut_h, fut_l = _future(head, loop, n)
        fut = canonical_lasso(fut_h, fut_l) if sync else absorbed_lasso(fut_h, fut_l)
        if pr and nl:
            return (hist, fut)
        if pr:
            return hist
        if nl:
            return fut
        return word[n]

    runs = []
    for run in words:
        cells = []
        for n in range(H + L):
            locals_ = tuple(core(h, lp, n) for h, lp in run)
            env = f"e{rng.randrange(2)}"
            val = frozenset(p for p in config.props if rng.random() < 0.5)
            cells.append(Cell(env, locals_, val))
        runs.append(cells)
    if uis:
        first = runs[0][0]
        for cells in runs:
            cells[0] = Cell(first.env, cells[0].locals, first.val)
    sys = from_lassos(m, sync, [(cells[:H], cells[H:]) for cells in runs], config.props)
    return sys


# ---------------------------------------------------------------- soundness sweeps

@dataclass(frozen=True)
class Violation:
    trial: int
    schema: str
    formula: Formula
    point: Point
    system: LassoSystem


@dataclass
class SoundnessReport:
    target: frozenset
    schemas: tuple
    trials: int
    instances: int = 0
    violations: list = field(default_factory=list)
    lines: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def soundness_suite(target: Iterable[str], schemas: Iterable[str], trials: int,
                    config: GeneratorConfig | None = None, instances: int = 20,
                    depth: int = 2, seed: int = 0) -> SoundnessReport:
    """Check random schema instances on ``trials`` generated members of a class."""
    target = frozenset(target)
    schemas = tuple(schemas)
    base = config or GeneratorConfig()
    report = SoundnessReport(target, schemas, trials)
    for trial in range(trials):
        rng = random.Random(f"sound:{seed}:{trial}")
        cfg = GeneratorConfig(target, base.max_runs, base.max_window, base.m, base.props,
                              base.observations, seed=seed * 100003 + trial)
        sys = generate_system(cfg, rng)
        ev = Evaluator(sys)
        for sid in schemas:
            bad = None
            for _ in range(instances):
                schema = SCHEMAS[sid]
                f = random_instance(rng, schema, base.props, sys.m, depth,
                                    group_knowledge=sid in BASE_SCHEMAS + COMMON_SCHEMAS)
                report.instances += 1
                table = ev.table(f)
                if not table.all():
                    r, c = map(int, next(zip(*(~table).nonzero())))
                    bad = Violation(trial, sid, f, Point(r, c), sys)
                    report.violations.append(bad)
                    break
            report.lines.append(f"trial {trial} {sid}: {'ok' if bad is None else 'VIOLATION'}")
    return report


# ---------------------------------------------------------------- falsification

@dataclass(frozen=True)
class SearchBounds:
    max_runs: int = 3
    max_window: int = 4
    m: int = 2
    samples: int = 20000
    seed: int = 0


def _tiny_systems(f: Formula, bounds: SearchBounds):
    """Exhaustive enumeration of one- and two-run systems with window <= 2."""
    props = sorted(props_of(f) - {RESERVED_PROP})
    m = max(agents_of(f), default=1)
    if m > bounds.m:
        return
    for R in range(1, min(2, bounds.max_runs) + 1):
        for W in range(1, min(2, bounds.max_window) + 1):
            for P in range(W):
                cells = R * W
                for clocked in (False, True):
                    choices = [range(2)] * (cells * m) + [range(2 ** len(props))] * cells
                    for combo in itertools.product(*choices):
                        cores, vals = combo[:cells * m], combo[cells * m:]
                        runs = []
                        for r in range(R):
                            run = []
                            for c in range(W):
                                k = r * W + c
                                local = tuple(cores[k * m:(k + 1) * m])
                                val = frozenset(p for b, p in enumerate(props) if vals[k] >> b & 1)
                                run.append(Cell("e", local, val))
                            runs.append(tuple(run))
                        yield LassoSystem(m, clocked, P, W - P, tuple(runs), frozenset(props))


def _random_systems(f: Formula, bounds: SearchBounds):
    props = tuple(sorted(props_of(f) - {RESERVED_PROP})) or ("p",)
    m = max(agents_of(f), default=1)
    rng = random.Random(f"falsify:{bounds.seed}")
    k = 0
    while True:
        target = frozenset({"sync"}) if rng.random() < 0.3 else frozenset()
        cfg = GeneratorConfig(target, bounds.max_runs, bounds.max_window, max(m, rng.randint(1, bounds.m)),
                              props, rng.randint(2, 3), seed=k)
        yield generate_system(cfg, random.Random(f"falsify:{bounds.seed}:{k}"))
        k += 1


def falsify(f: Formula, bounds: SearchBounds = SearchBounds(),
            pool: Sequence[LassoSystem] = ()) -> tuple[LassoSystem, Point] | None:
    """Search for a system and point where ``f`` is false.

    Systems from ``pool`` are tried first; then tiny systems are enumerated
    exhaustively, interleaved with seeded random samples.  Returns ``None``
    when the budget is spent (which proves nothing).
    """
    def check(sys):
        try:
            check_formula_fits(sys, f)
        except ValueError:
            return None
        table = Evaluator(sys).table(f)
        if table.all():
            return None
        r, c = map(int, next(zip(*(~table).nonzero())))
        point = Point(r, c)
        assert not evaluate(sys, point, f)
        return sys, point

    for sys in pool:
        hit = check(sys)
        if hit:
            return hit
    tiny = _tiny_systems(f, bounds)
    rand = _random_systems(f, bounds)
    budget = bounds.samples
    while budget > 0:
        for source in (tiny, rand):
            sys = next(source, None)
            if sys is None:
                continue
            budget -= 1
            hit = check(sys)
            if hit:
                return hit
    return None
