"""Checking Hilbert-style proofs line by line.

The derivation of KT1 from KT3 is accepted; every mutation in the catalogue is
rejected at the line where the damage was done.
"""

from ketl.proofs import check_proof, kt1_from_kt3, kt1_mutations, render_proof

proof = kt1_from_kt3()
text = render_proof(proof).splitlines()
print(f"{len(text)} lines; the last three:")
print("\n".join(text[-3:]))
print("accepted:", check_proof(proof).ok)

for m in kt1_mutations()[:6]:
    res = check_proof(m.proof)
    print(f"{m.name:28} rejected at line {res.line}: {res.reason}")
