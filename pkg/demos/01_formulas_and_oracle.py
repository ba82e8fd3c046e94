"""Formulas, renamings and the isomorphism oracle.

Run with ``python3 demos/01_formulas_and_oracle.py``.
"""
from csfi.cnf import apply_renaming, parse_formula, render_formula, trivial_signature
from csfi.oracle import classify_pair, detect_trivial_noniso, is_isomorphic, is_isomorphic_bruteforce

# A formula is a list of clauses; each clause a set of positive literals.
alpha = parse_formula("(a | b | c) & (c | d) & (a | d)")
print("alpha     :", render_formula(alpha))
print("signature :", trivial_signature(alpha))

# Renaming the symbols gives an isomorphic formula, whatever order the
# clauses end up in.
beta = apply_renaming(alpha, {"a": "x", "b": "y", "c": "z", "d": "w"})
beta = parse_formula(" & ".join(f"({' | '.join(reversed(c))})" for c in reversed(beta.clauses)))
print("beta      :", render_formula(beta))

verdict = is_isomorphic(alpha, beta)
print("isomorphic:", verdict.isomorphic, "witness:", verdict.witness)

# Some non-isomorphic pairs give themselves away through counts alone.
gamma = parse_formula("(a | b | c) & (c | d) & (a | d) & (b)")
print("\ntrivially different because of", detect_trivial_noniso(alpha, gamma).value)

# Others agree on every count and need the search: here every symbol occurs
# twice and clause sizes match, but the clause overlap pattern differs.
p = parse_formula("(a|b)&(b|c)&(c|d)&(d|e)&(e|f)&(f|a)")
q = parse_formula("(a|b)&(b|c)&(c|a)&(d|e)&(e|f)&(f|d)")
print("hexagon vs two triangles:", classify_pair(p, q).value)
print("brute force agrees       :", is_isomorphic_bruteforce(p, q).isomorphic is False)
