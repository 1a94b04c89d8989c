"""Axiom soundness on random systems, and counterexamples outside a class.

KT4 (no learning) holds on every generated no-learning system, yet a small
unrestricted system refutes it.
"""

from ketl.axioms import SearchBounds, falsify, instantiate, soundness_suite
from ketl.syntax import Prop, to_text
from ketl.systems import fixture_nl_prime

report = soundness_suite(("nl",), ("K1", "T1", "KT4"), trials=30, instances=10, seed=7)
print(f"{report.instances} instances checked on nl systems, {len(report.violations)} violations")

kt4 = instantiate("KT4", {"Φ1": Prop("p"), "Φ2": Prop("q")}, agent=1)
print("KT4 instance:", to_text(kt4))
sys, point = falsify(kt4, SearchBounds(max_runs=3, max_window=4, m=2))
print(f"refuted on a {sys.run_count}-run system of window {sys.window} at {point}")

sys, point = falsify(kt4, SearchBounds(3, 4, 2), pool=[fixture_nl_prime()])
print("with the fixture offered first, the witness is the fixture at", point)
