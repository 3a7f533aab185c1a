"""Symbolic check that the simplified adaptive limit weight equals (M / R^2)^{1/2}.

M_t = q_t (sqrt(H_t) / sum_k q_k sqrt(H_k))^2 and R_t^2 = H_t / V_t, with all
symbols positive. Prints OK and exits 0 when the difference simplifies to 0.
"""
import sys

import sympy as sp

q1, q2, h1, h2, v1, v2 = sp.symbols("q1 q2 h1 h2 v1 v2", positive=True)
denom = q1 * sp.sqrt(h1) + q2 * sp.sqrt(h2)
ok = True
for q, h, v in ((q1, h1, v1), (q2, h2, v2)):
    m = q * (sp.sqrt(h) / denom) ** 2
    r2 = h / v
    faithful = sp.sqrt(m / r2)
    simplified = sp.sqrt(q * v) / denom
    diff = sp.simplify(faithful - simplified)
    print(f"stage weight difference: {diff}")
    ok &= diff == 0
print("OK" if ok else "MISMATCH")
sys.exit(0 if ok else 1)
