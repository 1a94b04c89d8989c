"""Evaluating formulas on a small lasso system.

The built-in fixture has one agent and two runs that share their first state.
Agent 1 sees only its own local state, so at the start it cannot tell which
run it is on.
"""

from ketl.syntax import parse, to_text
from ketl.systems import Point, evaluate, fixture_nl_prime, truth_table

fx = fixture_nl_prime()
print(f"{fx.run_count} runs, window {fx.window}, prefix {fx.prefix_len}, loop {fx.period}")
for r, run in enumerate(fx.runs):
    print(f"  run {r + 1}: " + " ".join(f"{c.locals[0]}{sorted(c.val)}" for c in run))

for text in ("(K1 p) U (K1 q)", "K1 ((K1 p) U (K1 q))", "K1 F q"):
    f = parse(text)
    print(f"{to_text(f):28} at r1,0: {evaluate(fx, Point(0, 0), f)}")

# the whole table at once: rows are runs, columns canonical positions
print(truth_table(fx, parse("K1 q")).astype(int))
