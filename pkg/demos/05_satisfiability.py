"""Deciding satisfiability and extracting a model.

A satisfiable formula comes back with a lasso system and a point where it
holds; an unsatisfiable one comes back with the eliminated pre-model.
"""

from ketl.syntax import parse
from ketl.systems import evaluate
from ketl.tableau import decide_sat

for text in ("F q & K1 p", "K1 p & ~p", "~C (p) & p"):
    for klass in ("all", "sync"):
        r = decide_sat(parse(text), klass)
        line = f"{text:14} {klass:5} {r.verdict}"
        if r.satisfiable:
            line += (f"  model: {r.system.run_count} runs, window {r.system.window}, "
                     f"checks out: {evaluate(r.system, r.point, parse(text))}")
        print(line)
