"""Hilbert-style proofs and their checker.

A proof is a list of labelled lines.  Each line is an axiom instance, a
hypothesis (only in derived-rule templates), or the result of one of the
rules R1 (modus ponens), R2 (K-necessitation), RT1 (next-necessitation),
RT2 (until induction) and RC1 (common-knowledge induction).

Text format, one line per entry::

    SYSTEM S5U+KT3
    GOAL "K1 G p -> G K1 p"
    1. "p -> p" BY AXIOM K1
    2. "K1 (p -> p)" BY R2 FROM 1
    3. "X (p -> p)" BY RT1 FROM 1
    4. "K1 p -> p" BY AXIOM K3 WITH Φ1="p", i=1

``RULE`` on its own line marks a derived-rule template, which may contain
``BY HYPOTHESIS`` lines.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .axioms import AGENT_VAR, SCHEMAS, AxiomSchema, axiom_set, instantiate
from .syntax import (TRUE, And, Common, Everyone, Formula, Know, Meta, Next, Not, Prop, Until,
                     always, children, iff, implies, or_, parse, to_text)

RULES = ("R1", "R2", "RT1", "RT2", "RC1")


@dataclass(frozen=True)
class AxiomInstance:
    schema: str
    binding: tuple = ()  # sorted (metavariable, Formula) pairs
    agent: int | None = None


@dataclass(frozen=True)
class RuleStep:
    rule: str
    premises: tuple


@dataclass(frozen=True)
class Hypothesis:
    pass


@dataclass(frozen=True)
class ProofLine:
    label: int
    formula: Formula
    justification: object


@dataclass
class Proof:
    lines: list
    system: str = "S5U"
    goal: Formula | None = None
    derived_rule: bool = False


@dataclass(frozen=True)
class ProofCheck:
    ok: bool
    line: int | None = None
    reason: str | None = None

    def __bool__(self) -> bool:
        return self.ok


# ---------------------------------------------------------------- matching

def as_implication(f: Formula) -> tuple[Formula, Formula] | None:
    """Split ``a -> b`` (stored as ``~(~~a & ~b)``) into ``(a, b)``."""
    if (isinstance(f, Not) and isinstance(f.sub, And) and isinstance(f.sub.left, Not)
            and isinstance(f.sub.left.sub, Not) and isinstance(f.sub.right, Not)):
        return f.sub.left.sub.sub, f.sub.right.sub
    return None


_PROPOSITIONAL = (Not, And)


def skeleton_atoms(f: Formula) -> list[Formula]:
    """Maximal subformulas not built from negation and conjunction."""
    out: dict[Formula, None] = {}
    stack = [f]
    while stack:
        g = stack.pop()
        if isinstance(g, _PROPOSITIONAL):
            stack.extend(children(g))
        else:
            out.setdefault(g)
    return list(out)


def is_tautology(f: Formula, max_atoms: int = 20) -> bool:
    atoms = skeleton_atoms(f)
    if len(atoms) > max_atoms:
        raise ValueError(f"too many skeleton atoms ({len(atoms)}) for a truth table")
    index = {a: k for k, a in enumerate(atoms)}

    def value(g: Formula, bits: int) -> bool:
        if isinstance(g, Not):
            return not value(g.sub, bits)
        if isinstance(g, And):
            return value(g.left, bits) and value(g.right, bits)
        return bool(bits >> index[g] & 1)

    return all(value(f, bits) for bits in range(1 << len(atoms)))


def _unify(pattern: Formula, f: Formula, binding: dict) -> bool:
    if isinstance(pattern, Meta):
        if pattern.name in binding:
            return binding[pattern.name] == f
        binding[pattern.name] = f
        return True
    if type(pattern) is not type(f):
        return False
    if isinstance(pattern, Prop):
        return pattern == f
    if isinstance(pattern, Know):
        if pattern.agent == AGENT_VAR:
            if binding.setdefault("i", f.agent) != f.agent:
                return False
        elif pattern.agent != f.agent:
            return False
    return all(_unify(p, g, binding) for p, g in zip(children(pattern), children(f)))


def match_schema(f: Formula, schema: AxiomSchema | str, max_agents: int = 9) -> dict | None:
    """A binding making ``f`` an instance of ``schema``, or ``None``.

    K1 is checked semantically: ``f`` must be a tautology when its maximal
    non-propositional subformulas are read as atoms; the empty binding is
    returned on success.
    """
    if isinstance(schema, str):
        schema = SCHEMAS[schema]
    if schema.id == "K1":
        return {} if is_tautology(f) else None
    for m in (range(1, max_agents + 1) if schema.id == "C1" else (1,)):
        for pattern in schema.patterns(m):
            binding: dict = {}
            if _unify(pattern, f, binding):
                return binding
    return None


# ---------------------------------------------------------------- checking

def check_proof(proof: Proof) -> ProofCheck:
    """Verify every line; report the first failing label and why."""
    try:
        allowed = set(axiom_set(proof.system))
    except ValueError as exc:
        return ProofCheck(False, None, str(exc))
    if "C1" in allowed:
        allowed_rules = set(RULES)
    else:
        allowed_rules = set(RULES) - {"RC1"}
    proved: dict[int, Formula] = {}
    last = 0
    for line in proof.lines:
        if line.label <= last:
            return ProofCheck(False, line.label, "labels must strictly increase")
        last = line.label
        problem = _check_line(line, proved, allowed, allowed_rules, proof.derived_rule)
        if problem:
            return ProofCheck(False, line.label, problem)
        proved[line.label] = line.formula
    if not proof.lines:
        return ProofCheck(False, None, "empty proof")
    if proof.goal is not None and proof.lines[-1].formula != proof.goal:
        return ProofCheck(False, proof.lines[-1].label, "last line is not the goal")
    return ProofCheck(True)


def _check_line(line: ProofLine, proved: dict, allowed: set, rules: set, derived: bool) -> str | None:
    f, just = line.formula, line.justification
    if isinstance(just, Hypothesis):
        return None if derived else "hypotheses are only allowed in derived-rule templates"
    if isinstance(just, AxiomInstance):
        if just.schema not in SCHEMAS:
            return f"unknown axiom {just.schema}"
        if just.schema not in allowed:
            return f"axiom {just.schema} is not part of this axiom system"
        if just.schema == "K1":
            return None if is_tautology(f) else "not a propositional tautology"
        if just.binding or just.agent is not None:
            try:
                m = _c1_agents(f) if just.schema == "C1" else 1
                expected = instantiate(just.schema, dict(just.binding), just.agent, m=m)
            except KeyError as exc:
                return f"incomplete instantiation: {exc.args[0]}"
            return None if expected == f else f"formula is not the stated {just.schema} instance"
        return None if match_schema(f, just.schema) is not None else f"not an instance of {just.schema}"
    if not isinstance(just, RuleStep):
        return "unknown justification"
    if just.rule not in rules:
        return f"rule {just.rule} is not part of this axiom system"
    for ref in just.premises:
        if ref not in proved:
            return f"dangling reference to line {ref}"
    prem = [proved[r] for r in just.premises]
    want = {"R1": 2, "R2": 1, "RT1": 1, "RT2": 1, "RC1": 1}[just.rule]
    if len(prem) != want:
        return f"{just.rule} takes {want} premise(s)"
    if just.rule == "R1":
        return None if prem[1] == implies(prem[0], f) else "modus ponens does not yield this formula"
    if just.rule == "R2":
        return None if isinstance(f, Know) and f.sub == prem[0] else "not a K-necessitation of the premise"
    if just.rule == "RT1":
        return None if f == Next(prem[0]) else "not a next-necessitation of the premise"
    if just.rule == "RT2":
        premise, conclusion = as_implication(prem[0]), as_implication(f)
        if premise is None or conclusion is None:
            return "RT2 premise and conclusion must be implications"
        head, body = premise
        if not (isinstance(body, And) and isinstance(body.left, Not) and body.right == Next(head)):
            return "RT2 premise must read φ' -> ~ψ & X φ'"
        psi = body.left.sub
        c_head, c_body = conclusion
        ok = (c_head == head and isinstance(c_body, Not) and isinstance(c_body.sub, Until)
              and c_body.sub.right == psi)
        return None if ok else "RT2 conclusion must read φ' -> ~(φ U ψ) with the premise's φ' and ψ"
    # RC1
    premise, conclusion = as_implication(prem[0]), as_implication(f)
    if premise is None or conclusion is None:
        return "RC1 premise and conclusion must be implications"
    head, body = premise
    if not (isinstance(body, Everyone) and isinstance(body.sub, And) and body.sub.right == head):
        return "RC1 premise must read φ -> E(ψ & φ)"
    ok = conclusion == (head, Common(body.sub.left))
    return None if ok else "RC1 conclusion must read φ -> C ψ"


def _c1_agents(f: Formula) -> int:
    count = 0
    stack = [f]
    while stack:
        g = stack.pop()
        if isinstance(g, Know):
            count = max(count, g.agent)
        stack.extend(children(g))
    return max(count, 1)


# ---------------------------------------------------------------- text format

_LINE = re.compile(r'^\s*(\d+)\s*\.\s*"([^"]*)"\s+BY\s+(.+?)\s*$')
_AXIOM = re.compile(r'^AXIOM\s+(\w+)(?:\s+WITH\s+(.*))?$')
_RULE = re.compile(r'^(\w+)\s+FROM\s+([\d,\s]+)$')
_BIND = re.compile(r'\s*(?:(Φ\d|F\d|P\d)\s*=\s*"([^"]*)"|i\s*=\s*(\d+))\s*(?:,|$)')


class ProofSyntaxError(ValueError):
    def __init__(self, message: str, line_no: int):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def parse_proof(text: str) -> Proof:
    proof = Proof([])
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            if line.startswith("SYSTEM"):
                proof.system = line.split(None, 1)[1].strip()
            elif line.startswith("GOAL"):
                proof.goal = parse(line.split(None, 1)[1].strip().strip('"'))
            elif line == "RULE":
                proof.derived_rule = True
            else:
                proof.lines.append(_parse_line(line))
        except ProofSyntaxError:
            raise
        except (ValueError, IndexError) as exc:
            raise ProofSyntaxError(str(exc), no) from exc
    return proof


def _parse_line(line: str) -> ProofLine:
    m = _LINE.match(line)
    if not m:
        raise ValueError("expected: <n>. \"<formula>\" BY ...")
    label, formula, rest = int(m.group(1)), parse(m.group(2)), m.group(3)
    if rest == "HYPOTHESIS":
        return ProofLine(label, formula, Hypothesis())
    am = _AXIOM.match(rest)
    if am:
        binding, agent = [], None
        spec = am.group(2) or ""
        pos = 0
        while pos < len(spec):
            bm = _BIND.match(spec, pos)
            if not bm or bm.end() == pos:
                raise ValueError(f"cannot read axiom bindings {spec[pos:]!r}")
            if bm.group(3):
                agent = int(bm.group(3))
            else:
                binding.append(("Φ" + bm.group(1)[1:], parse(bm.group(2))))
            pos = bm.end()
        return ProofLine(label, formula, AxiomInstance(am.group(1), tuple(sorted(binding)), agent))
    rm = _RULE.match(rest)
    if rm:
        refs = tuple(int(x) for x in rm.group(2).replace(",", " ").split())
        return ProofLine(label, formula, RuleStep(rm.group(1), refs))
    raise ValueError(f"cannot read justification {rest!r}")


def render_proof(proof: Proof) -> str:
    out = [f"SYSTEM {proof.system}"]
    if proof.derived_rule:
        out.append("RULE")
    if proof.goal is not None:
        out.append(f'GOAL "{to_text(proof.goal)}"')
    for line in proof.lines:
        j = line.justification
        if isinstance(j, Hypothesis):
            why = "HYPOTHESIS"
        elif isinstance(j, AxiomInstance):
            parts = [f'{k}="{to_text(v)}"' for k, v in j.binding]
            if j.agent is not None:
                parts.append(f"i={j.agent}")
            why = f"AXIOM {j.schema}" + (" WITH " + ", ".join(parts) if parts else "")
        else:
            why = f"{j.rule} FROM " + ", ".join(map(str, j.premises))
        out.append(f'{line.label}. "{to_text(line.formula)}" BY {why}')
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------- building proofs

class ProofBuilder:
    """Appends lines and computes rule conclusions; each method returns a label."""

    def __init__(self, system: str = "S5U", derived_rule: bool = False):
        self.proof = Proof([], system, None, derived_rule)

    def _add(self, f: Formula, just) -> int:
        label = len(self.proof.lines) + 1
        self.proof.lines.append(ProofLine(label, f, just))
        return label

    def formula(self, label: int) -> Formula:
        return self.proof.lines[label - 1].formula

    def hypothesis(self, f: Formula) -> int:
        return self._add(f, Hypothesis())

    def axiom(self, schema: str, agent: int | None = None, **binding: Formula) -> int:
        bound = tuple(sorted(("Φ" + k[1:], v) for k, v in binding.items()))
        f = instantiate(schema, dict(bound), agent)
        return self._add(f, AxiomInstance(schema, bound, agent))

    def tautology(self, f: Formula) -> int:
        if not is_tautology(f):
            raise AssertionError(f"internal fault: {to_text(f)} is not a tautology")
        return self._add(f, AxiomInstance("K1"))

    def mp(self, a: int, b: int) -> int:
        parts = as_implication(self.formula(b))
        if parts is None or parts[0] != self.formula(a):
            raise AssertionError("internal fault: modus ponens premises do not fit")
        return self._add(parts[1], RuleStep("R1", (a, b)))

    def nec_k(self, a: int, agent: int) -> int:
        return self._add(Know(agent, self.formula(a)), RuleStep("R2", (a,)))

    def nec_x(self, a: int) -> int:
        return self._add(Next(self.formula(a)), RuleStep("RT1", (a,)))

    def until_induction(self, a: int, left: Formula) -> int:
        head, body = as_implication(self.formula(a))
        return self._add(implies(head, Not(Until(left, body.left.sub))), RuleStep("RT2", (a,)))

    def common_induction(self, a: int) -> int:
        head, body = as_implication(self.formula(a))
        return self._add(implies(head, Common(body.sub.left)), RuleStep("RC1", (a,)))

    def chain(self, facts: list[int], goal: Formula) -> int:
        """Derive ``goal`` from proved ``facts`` when the step is propositional."""
        taut = goal
        for label in reversed(facts):
            taut = implies(self.formula(label), taut)
        current = self.tautology(taut)
        for label in facts:
            current = self.mp(label, current)
        return current


# ---------------------------------------------------------------- library

def kt1_from_kt3(phi: Formula = Prop("p"), agent: int = 1) -> Proof:
    """Derivation of ``K_i G φ -> G K_i φ`` in S5U plus KT3."""
    b = ProofBuilder("S5U+KT3")
    i = agent
    y = Until(TRUE, Not(phi))          # F ~φ, so G φ is ~y
    box = Not(y)
    kt = Know(i, TRUE)
    kbox = Know(i, box)
    w = Until(kt, Not(box))
    z = Until(kt, w)
    a = And(kt, Not(kbox))

    t3 = b.axiom("T3", F1=TRUE, F2=Not(phi))
    t2 = b.axiom("T2", F1=y)
    step = b.chain([t3, t2], implies(box, And(Not(Not(box)), Next(box))))       # G φ -> ~~G φ & X G φ
    not_w = b.until_induction(step, kt)                                         # G φ -> ~w
    step2 = b.chain([not_w, step], implies(box, And(Not(w), Next(box))))
    not_z = b.until_induction(step2, kt)                                        # G φ -> ~z
    k_not_z = b.nec_k(not_z, i)
    k2 = b.axiom("K2", i, F1=box, F2=Not(z))
    kbox_kz = b.chain([k_not_z, k2], implies(kbox, Know(i, Not(z))))
    top = b.tautology(TRUE)
    k_top = b.nec_k(top, i)
    kt3 = b.axiom("KT3", i, F1=TRUE, F2=TRUE, F3=box)
    no_next_a = b.chain([kbox_kz, k_top, kt3], implies(kbox, Not(Next(a))))
    t2a = b.axiom("T2", F1=a)
    tau = b.tautology(implies(Not(a), implies(kt, kbox)))
    x_tau = b.nec_x(tau)
    t1a = b.axiom("T1", F1=Not(a), F2=implies(kt, kbox))
    x_top = b.nec_x(k_top)
    t1b = b.axiom("T1", F1=kt, F2=kbox)
    stays = b.chain([no_next_a, t2a, x_tau, t1a, x_top, t1b], implies(kbox, Next(kbox)))
    box_phi = b.chain([t3], implies(box, phi))
    k_box_phi = b.nec_k(box_phi, i)
    k2b = b.axiom("K2", i, F1=box, F2=phi)
    kbox_kphi = b.chain([k_box_phi, k2b], implies(kbox, Know(i, phi)))
    inv = b.chain([kbox_kphi, stays], implies(kbox, And(Not(Not(Know(i, phi))), Next(kbox))))
    b.until_induction(inv, TRUE)
    b.proof.goal = instantiate("KT1", {"Φ1": phi}, i)
    return b.proof


def until_lemma(alpha: Formula, beta: Formula, gamma: Formula) -> Proof:
    """From ``α -> ~γ`` and ``α -> X(α | (~β & ~γ))`` derive ``α -> ~(β U γ)``."""
    b = ProofBuilder("S5U", derived_rule=True)
    bu = Until(beta, gamma)
    d = or_(alpha, And(Not(beta), Not(gamma)))
    both = And(alpha, bu)
    h1 = b.hypothesis(implies(alpha, Not(gamma)))
    h2 = b.hypothesis(implies(alpha, Next(d)))
    t3 = b.axiom("T3", F1=beta, F2=gamma)
    keeps = b.chain([h1, t3], implies(both, Next(bu)))
    local = b.chain([t3], implies(bu, implies(d, both)))
    x_local = b.nec_x(local)
    t1a = b.axiom("T1", F1=bu, F2=implies(d, both))
    t1b = b.axiom("T1", F1=d, F2=both)
    inv = b.chain([h1, h2, keeps, x_local, t1a, t1b], implies(both, And(Not(gamma), Next(both))))
    dead = b.until_induction(inv, beta)
    b.chain([dead], implies(alpha, Not(bu)))
    b.proof.goal = implies(alpha, Not(bu))
    return b.proof


def box_idempotence(phi: Formula = Prop("p")) -> Proof:
    """``G φ <-> G G φ``."""
    b = ProofBuilder("S5U")
    y = Until(TRUE, Not(phi))
    box = Not(y)
    t3 = b.axiom("T3", F1=TRUE, F2=Not(phi))
    t2 = b.axiom("T2", F1=y)
    step = b.chain([t3, t2], implies(box, And(Not(Not(box)), Next(box))))
    up = b.until_induction(step, TRUE)
    t3b = b.axiom("T3", F1=TRUE, F2=Not(box))
    down = b.chain([t3b], implies(always(box), box))
    b.chain([up, down], iff(box, always(box)))
    b.proof.goal = iff(always(phi), always(always(phi)))
    return b.proof


def k_distribution(phi: Formula, psi: Formula, agent: int = 1) -> Proof:
    """From ``φ -> ψ`` derive ``K_i φ -> K_i ψ``."""
    b = ProofBuilder("S5U", derived_rule=True)
    h = b.hypothesis(implies(phi, psi))
    kh = b.nec_k(h, agent)
    k2 = b.axiom("K2", agent, F1=phi, F2=psi)
    b.chain([kh, k2], implies(Know(agent, phi), Know(agent, psi)))
    b.proof.goal = implies(Know(agent, phi), Know(agent, psi))
    return b.proof


def derived_rule_library() -> dict:
    """Named proof templates; each takes concrete formulas and returns a Proof."""
    return {
        "until_lemma": until_lemma,
        "box_idempotence": box_idempotence,
        "k_distribution": k_distribution,
        "kt1_from_kt3": kt1_from_kt3,
    }


# ---------------------------------------------------------------- mutations

@dataclass(frozen=True)
class Mutation:
    name: str
    proof: Proof
    expected_label: int


def _edit(proof: Proof, label: int, formula: Formula | None = None, just=None) -> Proof:
    lines = []
    for line in proof.lines:
        if line.label == label:
            line = ProofLine(label, formula if formula is not None else line.formula,
                             just if just is not None else line.justification)
        lines.append(line)
    return Proof(lines, proof.system, proof.goal, proof.derived_rule)


def _delete(proof: Proof, label: int) -> Proof:
    return Proof([ln for ln in proof.lines if ln.label != label], proof.system, proof.goal,
                 proof.derived_rule)


def kt1_mutations(phi: Formula = Prop("p"), agent: int = 1) -> list[Mutation]:
    """Single-point corruptions of :func:`kt1_from_kt3` and the label each must fail at."""
    base = kt1_from_kt3(phi, agent)
    f = {ln.label: ln.formula for ln in base.lines}
    j = {ln.label: ln.justification for ln in base.lines}
    other = agent % 9 + 1
    y = Until(TRUE, Not(phi))
    kt = Know(agent, TRUE)
    drop22 = as_implication(f[29])[1]

    def axiom(label: int, **changes) -> AxiomInstance:
        old = j[label]
        binding = dict(old.binding)
        binding.update({"Φ" + k[1:]: v for k, v in changes.pop("binding", {}).items()})
        return AxiomInstance(changes.get("schema", old.schema), tuple(sorted(binding.items())),
                             changes.get("agent", old.agent))

    cases = [
        ("delete a premise of RT2", _delete(base, 5), 6),
        ("delete the first axiom", _delete(base, 1), 4),
        ("delete the necessitated truth", _delete(base, 17), 21),
        ("alter a derived formula", _edit(base, 5, implies(Not(y), Next(Not(y)))), 5),
        ("K-necessitation relabelled as next-necessitation", _edit(base, 11, just=RuleStep("RT1", (10,))), 11),
        ("next-necessitation relabelled as K-necessitation", _edit(base, 25, just=RuleStep("R2", (24,))), 25),
        ("K2 cited for the wrong agent", _edit(base, 12, just=axiom(12, agent=other)), 12),
        ("KT3 with a wrong binding", _edit(base, 18, just=axiom(18, binding={"F3": phi})), 18),
        ("modus ponens with premises swapped", _edit(base, 4, just=RuleStep("R1", (3, 1))), 4),
        ("forward reference", _edit(base, 6, just=RuleStep("RT2", (7,))), 6),
        ("self reference", _edit(base, 10, just=RuleStep("RT2", (10,))), 10),
        ("RT2 from the wrong line", _edit(base, 46, just=RuleStep("RT2", (44,))), 46),
        ("non-tautology cited as K1", _edit(base, 36, implies(Not(y), phi)), 36),
        ("KT3 step cited as KT4", _edit(base, 18, just=AxiomInstance("KT4")), 18),
        ("goal cited as an axiom outside the system", _edit(base, 46, just=AxiomInstance("KT1")), 46),
        ("RT2 conclusion with a different left operand", _edit(base, 10, implies(Not(y), Not(Until(TRUE, Until(kt, Not(Not(y))))))), 11),
        ("T2 instantiated at the wrong formula", _edit(base, 23, just=axiom(23, binding={"F1": kt})), 23),
        ("tautology missing an antecedent", _edit(base, 29, drop22), 29),
        ("converse conclusion", _edit(base, 46, implies(always(Know(agent, phi)), Know(agent, always(phi)))), 46),
        ("modus ponens from unrelated lines", _edit(base, 15, just=RuleStep("R1", (12, 13))), 15),
        ("next-necessitation of the wrong line", _edit(base, 27, just=RuleStep("RT1", (16,))), 27),
        ("necessitation for the wrong agent", _edit(base, 38, Know(other, f[37])), 41),
        ("labels out of order", Proof(base.lines[:9] + [base.lines[10], base.lines[9]] + base.lines[11:],
                                      base.system, base.goal), 11),
        ("system without KT3", Proof(base.lines, "S5U", base.goal), 18),
    ]
    return [Mutation(name, proof, label) for name, proof, label in cases]
