"""Tree sequences over a pre-model and runs derived from them.

A tree sequence discharges eventualities one step at a time. Separately, an
acceptable path through the pre-model turns into a run whose local states
record information in the style of the chosen semantics.
"""

from ketl.ktrees import Lasso, derive_run, search_tree_sequence, system_of_runs
from ketl.properties import has_no_learning, has_perfect_recall, is_synchronous
from ketl.syntax import parse, to_text
from ketl.tableau import acceptable_extension, build_premodel, eliminate

found = search_tree_sequence(parse("F q & K1 p"))
print(f"{len(found.trees)} trees, {len(found.steps)} steps, pending: "
      f"{[to_text(u) for u in found.pending]}")

pm = eliminate(build_premodel(parse("~q & X ~q & F q"), d=0))
starts = pm.alive_ids()[:2]
for kind, check in (("pr", has_perfect_recall), ("nl", has_no_learning),
                    ("nl_sync", is_synchronous)):
    runs = []
    for s in starts:
        head, loop = acceptable_extension(pm, [s])
        runs.append(derive_run(pm, Lasso(tuple(head), tuple(loop)), kind, horizon=5))
    sys = system_of_runs(runs, pm.m)
    print(f"{kind:8} system: {sys.run_count} runs, window {sys.window}, "
          f"{check.__name__} = {check(sys).verdict}")
