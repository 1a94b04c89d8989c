"""Classifying systems by recall, learning, synchrony and initial state.

The literal fixture turns out to learn in the weaker sense too; swapping the
last two states of the second run repairs that.
"""

from ketl.properties import classify, has_no_learning, has_perfect_recall
from ketl.systems import fixture_nl_prime, fixture_nl_prime_corrected

for name, sys in (("fixture", fixture_nl_prime()),
                  ("corrected", fixture_nl_prime_corrected())):
    print(f"{name}: {sorted(classify(sys).classes)}")

# each property check explains a negative verdict with a witness
fx = fixture_nl_prime()
for check in (has_perfect_recall, has_no_learning):
    res = check(fx)
    print(f"{check.__name__}: {res.verdict}  agent {res.agent}, points {res.counterexample}, clause {res.clause}")
