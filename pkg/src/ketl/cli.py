"""Command-line interface.

Exit codes: 0 success, 1 verification failure (violation found, proof
rejected, model extraction failed, resource cap hit), 2 usage or input error.
Points are written ``rN,T`` with runs numbered from 1 and times from 0.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
from typing import Sequence

from . import __version__
from .axioms import (BASE_SCHEMAS, CLASS_AXIOMS, COMMON_SCHEMAS, SCHEMAS, GeneratorConfig,
                     generate_system, soundness_suite)
from .ktrees import (RUN_KINDS, KTree, Lasso, TreeStep, check_tree_step, derive_run, is_ktree,
                     search_tree_sequence, system_of_runs, tree_formula)
from .proofs import ProofSyntaxError, check_proof, kt1_from_kt3, parse_proof, render_proof
from .properties import classify
from .syntax import ClosureTooLarge, FormulaSyntaxError, UnsupportedFormula, parse, to_text
from .systems import (Evaluator, Point, check_formula_fits, dumps, fixture_nl_prime,
                      fixture_nl_prime_corrected, load_system, save_system, write_atomic)
from .tableau import SAT_CLASSES, ExtractionError, acceptable_extension, build_premodel, \
    decide_sat, eliminate

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

BUILTIN_SYSTEMS = {
    "fixture_nl_prime": fixture_nl_prime,
    "fixture_nl_prime_corrected": fixture_nl_prime_corrected,
}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- helpers

def parse_point(text: str) -> Point:
    try:
        run, time = text.strip().split(",")
        if not run.startswith("r"):
            raise ValueError
        point = Point(int(run[1:]) - 1, int(time))
    except ValueError:
        raise UsageError(f"point must look like r1,0 (got {text!r})") from None
    if point.run < 0 or point.time < 0:
        raise UsageError("runs count from 1 and times from 0")
    return point


def show_point(p: Point) -> str:
    return f"r{p.run + 1},{p.time}"


def formula_arg(text: str):
    try:
        return parse(text)
    except FormulaSyntaxError as e:
        raise UsageError(f"bad formula: {e}") from None


def system_arg(name: str):
    if name in BUILTIN_SYSTEMS:
        return BUILTIN_SYSTEMS[name]()
    try:
        return load_system(name)
    except FileNotFoundError:
        raise UsageError(f"no such system file or built-in: {name}") from None
    except (ValueError, KeyError, TypeError) as e:
        raise UsageError(f"cannot read system {name}: {e}") from None


def class_arg(text: str) -> frozenset:
    if text in ("", "all", "none"):
        return frozenset()
    names = frozenset(t.strip() for t in text.split(",") if t.strip())
    unknown = names - {"pr", "nl", "sync", "uis"}
    if unknown:
        raise UsageError(f"unknown class names {sorted(unknown)}")
    return names


def emit(args, lines: list[str], doc: dict) -> None:
    if args.format == "doc":
        print(json.dumps(doc, indent=1, sort_keys=True))
    else:
        for line in lines:
            print(line)


# ---------------------------------------------------------------- verbs

def cmd_eval(args) -> int:
    system = system_arg(args.system)
    f = formula_arg(args.formula)
    point = parse_point(args.point)
    if point.run >= system.run_count:
        raise UsageError(f"the system has {system.run_count} runs")
    try:
        check_formula_fits(system, f)
    except ValueError as e:
        raise UsageError(str(e)) from None
    value = bool(Evaluator(system).table(f)[point.run, system.canon(point.time)])
    emit(args, [str(value).lower()],
         {"formula": to_text(f), "point": show_point(point), "value": value})
    return EXIT_OK


def cmd_classify(args) -> int:
    system = system_arg(args.system)
    spec = classify(system, horizon=args.horizon)
    lines = [r.render() for r in spec.reports]
    lines.append("classes: " + (", ".join(spec.names()) or "none"))
    emit(args, lines, {"classes": spec.names(), "reports": [r.to_document() for r in spec.reports]})
    return EXIT_OK


def cmd_axioms(args) -> int:
    target = class_arg(args.target)
    if args.schemas:
        schemas = tuple(s.strip() for s in args.schemas.split(",") if s.strip())
    else:
        key = target if target in CLASS_AXIOMS else frozenset(target - {"uis"})
        schemas = BASE_SCHEMAS + COMMON_SCHEMAS + CLASS_AXIOMS.get(key, ())
    unknown = [s for s in schemas if s not in SCHEMAS]
    if unknown:
        raise UsageError(f"unknown schemas {unknown}")
    config = GeneratorConfig(target, args.max_runs, args.max_window, args.agents)
    report = soundness_suite(target, schemas, args.trials, config, instances=args.instances,
                             depth=args.depth, seed=args.seed)
    lines = list(report.lines)
    for k, v in enumerate(report.violations):
        lines.append(f"violation {k}: trial {v.trial} {v.schema} at {show_point(v.point)}: "
                     f"{to_text(v.formula)}")
        if args.dump_dir:
            os.makedirs(args.dump_dir, exist_ok=True)
            base = os.path.join(args.dump_dir, f"violation-{k}")
            save_system(v.system, base + ".json")
            write_atomic(base + ".formula", to_text(v.formula) + "\n")
    lines.append(f"{report.instances} instances, {len(report.violations)} violations")
    emit(args, lines, {
        "target": sorted(target), "schemas": list(schemas), "trials": args.trials,
        "instances": report.instances,
        "violations": [{"trial": v.trial, "schema": v.schema, "formula": to_text(v.formula),
                        "point": show_point(v.point)} for v in report.violations]})
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_sat(args) -> int:
    f = formula_arg(args.formula)
    try:
        result = decide_sat(f, args.klass, m=args.agents)
    except UnsupportedFormula as e:
        raise UsageError(str(e)) from None
    except (ExtractionError, ClosureTooLarge) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAIL
    if args.dump_premodel:
        write_atomic(args.dump_premodel,
                     json.dumps(result.premodel.to_document(), indent=1, sort_keys=True) + "\n")
    lines = [result.verdict]
    doc = {"formula": to_text(f), "class": args.klass, "verdict": result.verdict}
    if result.satisfiable:
        lines.append(f"point: {show_point(result.point)}")
        doc["point"] = show_point(result.point)
        if args.model:
            save_system(result.system, args.model)
            lines.append(f"model: {args.model}")
    emit(args, lines, doc)
    return EXIT_OK


def cmd_prove(args) -> int:
    try:
        with open(args.proof) as fh:
            proof = parse_proof(fh.read())
    except FileNotFoundError:
        raise UsageError(f"no such proof file: {args.proof}") from None
    except ProofSyntaxError as e:
        raise UsageError(f"{args.proof}: {e}") from None
    check = check_proof(proof)
    line = "accepted" if check.ok else f"rejected at line {check.line}: {check.reason}"
    emit(args, [line], {"accepted": check.ok, "line": check.line, "reason": check.reason})
    return EXIT_OK if check.ok else EXIT_FAIL


def cmd_fixtures(args) -> int:
    os.makedirs(args.out_dir, exist_ok=True)
    written = []
    for name, make in BUILTIN_SYSTEMS.items():
        path = os.path.join(args.out_dir, name + ".json")
        save_system(make(), path)
        written.append(path)
    path = os.path.join(args.out_dir, "kt1_from_kt3.proof")
    write_atomic(path, render_proof(kt1_from_kt3()))
    written.append(path)
    emit(args, [f"wrote {p}" for p in written], {"written": written})
    return EXIT_OK


def cmd_gen(args) -> int:
    props = tuple(p.strip() for p in args.props.split(",") if p.strip())
    try:
        config = GeneratorConfig(class_arg(args.target), args.max_runs, args.max_window,
                                 args.agents, props, args.observations, args.seed)
    except ValueError as e:
        raise UsageError(str(e)) from None
    system = generate_system(config)
    if args.out:
        save_system(system, args.out)
        emit(args, [f"wrote {args.out}"], {"written": [args.out]})
    else:
        print(dumps(system))
    return EXIT_OK


# ---------------------------------------------------------------- trees

def _tree_document(result, psi, d, m) -> dict:
    pm = result.premodel
    return {
        "formula": to_text(psi), "depth": d, "agents": m,
        "trees": [{"k": t.k, "states": sorted(t.states)} for t in result.trees],
        "steps": [{"source": k, "target": k + 1,
                   "paths": {str(s): list(p) for s, p in step.f}}
                  for k, step in enumerate(result.steps)],
        "pending": [to_text(u) for u in result.pending],
        "exhausted": result.exhausted,
        "alive": pm.alive_ids() if pm is not None else [],
    }


def _load_trees(path: str):
    try:
        with open(path) as fh:
            doc = json.load(fh)
        psi = formula_arg(doc["formula"])
        d, m = int(doc["depth"]), int(doc["agents"])
        trees = [KTree(frozenset(int(s) for s in t["states"]), int(t["k"])) for t in doc["trees"]]
        steps = [TreeStep(trees[int(s["source"])], trees[int(s["target"])],
                          tuple(sorted((int(k), tuple(int(x) for x in v))
                                       for k, v in s["paths"].items())))
                 for s in doc.get("steps", [])]
    except FileNotFoundError:
        raise UsageError(f"no such tree file: {path}") from None
    except (KeyError, ValueError, TypeError, IndexError, json.JSONDecodeError) as e:
        raise UsageError(f"cannot read tree file {path}: {e}") from None
    pm = eliminate(build_premodel(psi, d=d, m=m))
    for t in trees:
        if any(s >= len(pm.states) for s in t.states):
            raise UsageError("tree file names a state outside the pre-model")
    return pm, trees, steps


def _search_depth(psi) -> int:
    from .syntax import alternation_depth, mentions_group_knowledge
    return 0 if mentions_group_knowledge(psi) else min(alternation_depth(psi), 1)


def cmd_trees(args) -> int:
    if args.trees_cmd == "search":
        psi = formula_arg(args.formula)
        d = _search_depth(psi) if args.depth is None else args.depth
        try:
            result = search_tree_sequence(psi, budget=args.budget, d=d, m=args.agents)
        except (UnsupportedFormula, ClosureTooLarge) as e:
            raise UsageError(str(e)) from None
        doc = _tree_document(result, psi, d, result.premodel.m)
        if args.out:
            write_atomic(args.out, json.dumps(doc, indent=1, sort_keys=True) + "\n")
        lines = [f"trees: {len(result.trees)}", f"steps: {len(result.steps)}",
                 "pending: " + (", ".join(doc["pending"]) or "none")]
        if result.exhausted:
            lines.append("budget exhausted")
        emit(args, lines, doc)
        return EXIT_OK

    if args.trees_cmd == "check":
        pm, trees, steps = _load_trees(args.file)
        lines, ok = [], True
        verdicts = []
        for k, t in enumerate(trees):
            v = is_ktree(pm, t.states, t.k)
            ok &= v.ok
            verdicts.append({"tree": k, "ok": v.ok, "clause": v.clause})
            lines.append(f"tree {k}: " + ("ok" if v.ok else f"fails {v.clause}: {v.detail}"))
        for k, st in enumerate(steps):
            v = check_tree_step(pm, st)
            ok &= v.ok
            verdicts.append({"step": k, "ok": v.ok, "clause": v.clause})
            lines.append(f"step {k}: " + ("ok" if v.ok else f"fails {v.clause}: {v.detail}"))
        emit(args, lines, {"ok": ok, "checks": verdicts})
        return EXIT_OK if ok else EXIT_FAIL

    if args.trees_cmd == "formula":
        pm, trees, _ = _load_trees(args.file)
        if not 0 <= args.tree < len(trees):
            raise UsageError(f"the file has {len(trees)} trees")
        tree = trees[args.tree]
        if args.state not in tree.states:
            raise UsageError(f"state {args.state} is not in tree {args.tree}")
        text = to_text(tree_formula(pm, tree, args.state))
        emit(args, [text], {"formula": text})
        return EXIT_OK

    # derive
    psi = formula_arg(args.formula)
    if args.offset and args.kind != "nl_sync":
        raise UsageError("--offset applies to nl_sync only")
    try:
        pm = eliminate(build_premodel(psi, d=0, m=args.agents))
    except (UnsupportedFormula, ClosureTooLarge) as e:
        raise UsageError(str(e)) from None
    starts = [s for s in pm.alive_ids() if pm.holds(s, psi)]
    if not starts:
        print("error: no live state satisfies the formula", file=sys.stderr)
        return EXIT_FAIL
    rng = random.Random(f"derive:{args.seed}")
    chosen = sorted(rng.sample(starts, min(args.runs, len(starts))))
    runs = []
    for s in chosen:
        head, loop = acceptable_extension(pm, [s])
        runs.append(derive_run(pm, Lasso(tuple(head), tuple(loop)), args.kind, args.horizon,
                               offset=args.offset))
    system = system_of_runs(runs, pm.m)
    lines = [f"runs: {len(runs)} from states {', '.join(map(str, chosen))}",
             f"truncated: {str(any(r.truncated for r in runs)).lower()}"]
    if args.out:
        save_system(system, args.out)
        lines.append(f"wrote {args.out}")
    else:
        lines.append(dumps(system))
    emit(args, lines, {"states": chosen, "truncated": any(r.truncated for r in runs),
                       "out": args.out})
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "doc"), default="text",
                        help="line-oriented text or a JSON document")

    p = argparse.ArgumentParser(prog="ketl", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="verb", required=True)

    e = sub.add_parser("eval", parents=[common], help="evaluate a formula at a point")
    e.add_argument("--system", required=True, help="system file or built-in fixture name")
    e.add_argument("--point", required=True, help="point as rN,T (runs from 1)")
    e.add_argument("--formula", required=True)
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("classify", parents=[common], help="report pr, nl, nl_prime, sync, uis")
    c.add_argument("--system", required=True)
    c.add_argument("--horizon", type=int, default=None)
    c.set_defaults(func=cmd_classify)

    a = sub.add_parser("axioms", parents=[common], help="soundness sweep on generated systems")
    a.add_argument("--class", dest="target", default="all", help="comma list of pr,nl,sync,uis")
    a.add_argument("--schemas", default="", help="comma list of schema ids")
    a.add_argument("--trials", type=int, default=20)
    a.add_argument("--instances", type=int, default=20)
    a.add_argument("--depth", type=int, default=2)
    a.add_argument("--seed", type=int, required=True)
    a.add_argument("--max-runs", type=int, default=3)
    a.add_argument("--max-window", type=int, default=4)
    a.add_argument("--agents", type=int, default=2)
    a.add_argument("--dump-dir", default=None, help="write counterexample systems here")
    a.set_defaults(func=cmd_axioms)

    s = sub.add_parser("sat", parents=[common], help="decide satisfiability")
    s.add_argument("--formula", required=True)
    s.add_argument("--class", dest="klass", choices=SAT_CLASSES, default="all")
    s.add_argument("--agents", type=int, default=None)
    s.add_argument("--model", default=None, help="write the model system here")
    s.add_argument("--dump-premodel", default=None, help="write the pre-model document here")
    s.set_defaults(func=cmd_sat)

    pr = sub.add_parser("prove", parents=[common], help="check a proof file")
    pr.add_argument("proof")
    pr.set_defaults(func=cmd_prove)

    t = sub.add_parser("trees", help="tree sequences and derived runs")
    tsub = t.add_subparsers(dest="trees_cmd", required=True)
    ts = tsub.add_parser("search", parents=[common], help="search for a tree sequence")
    ts.add_argument("--formula", required=True)
    ts.add_argument("--budget", type=int, default=200)
    ts.add_argument("--depth", type=int, choices=(0, 1), default=None)
    ts.add_argument("--agents", type=int, default=None)
    ts.add_argument("--out", default=None)
    tc = tsub.add_parser("check", parents=[common], help="validate a tree file")
    tc.add_argument("file")
    tf = tsub.add_parser("formula", parents=[common], help="print a tree formula")
    tf.add_argument("file")
    tf.add_argument("--tree", type=int, default=0)
    tf.add_argument("--state", type=int, required=True)
    td = tsub.add_parser("derive", parents=[common], help="derive runs from acceptable sequences")
    td.add_argument("--formula", required=True)
    td.add_argument("--kind", choices=RUN_KINDS, required=True)
    td.add_argument("--horizon", type=int, default=6)
    td.add_argument("--runs", type=int, default=2)
    td.add_argument("--offset", type=int, default=0)
    td.add_argument("--agents", type=int, default=None)
    td.add_argument("--seed", type=int, required=True)
    td.add_argument("--out", default=None)
    t.set_defaults(func=cmd_trees)

    f = sub.add_parser("fixtures", parents=[common], help="write built-in systems and proofs")
    f.add_argument("--out-dir", required=True)
    f.set_defaults(func=cmd_fixtures)

    g = sub.add_parser("gen", parents=[common], help="generate a random system in a class")
    g.add_argument("--class", dest="target", default="all")
    g.add_argument("--max-runs", type=int, default=3)
    g.add_argument("--max-window", type=int, default=4)
    g.add_argument("--agents", type=int, default=2)
    g.add_argument("--props", default="p,q")
    g.add_argument("--observations", type=int, default=2)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", default=None)
    g.set_defaults(func=cmd_gen)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    for name in ("trials", "instances", "budget", "horizon", "runs"):
        value = getattr(args, name, None)
        if value is not None and value < 1:
            print(f"error: --{name} must be positive", file=sys.stderr)
            return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
