"""
Upper-bound budget for n bosons and lower-bound remainders for N fermions.

Every remainder is an explicit monomial (or sum of monomials) in n, so the
log-log slopes reproduce the rational exponents to rounding.  The
exchange-correlation bound is printed with its two pieces: the momentum
piece scales as n^{17/15}, the localisation piece as n^{127/105}.

    python3 demos/budget_exponents.py
"""
import numpy as np

from polaronlab.records import fit_exponent
from polaronlab.tf_variational import fermion_lower_budget
from polaronlab.trial_budget import assemble_budget, budget_exponents, pekar_shape_constants

shape = pekar_shape_constants()
ns = np.geomspace(1e4, 1e12, 9)
reports = [assemble_budget(n, shape=shape) for n in ns]
ex = budget_exponents()

print("term                 exponent   fitted slope")
for key in ("trace_gamma", "trace_gamma_sq", "r_main", "r_loc", "r_int", "r_xc"):
    fit = fit_exponent(ns, [r.terms[key] for r in reports])
    print(f"{key:20s} {str(ex[key]):>8s}   {fit['slope']:.10f}")
for key in ("r_xc_momentum", "r_xc_localization"):
    fit = fit_exponent(ns, [r.values[key] for r in reports])
    print(f"{key:20s} {str(ex[key]):>8s}   {fit['slope']:.10f}")

print("\n      n        relative deficit   (C_int = 1)")
for n, r in zip(ns, reports):
    print(f"{n:9.1e}  {r.relative_deficit:.6e}")
big = [assemble_budget(n, shape=shape, C_int=1e14).relative_deficit for n in (1e6, 1e8)]
print(f"slope with C_int = 1e14: {np.log(big[1] / big[0]) / np.log(100):.12f}  (-1/35 = {-1 / 35:.12f})")

Ns = np.geomspace(1e4, 1e12, 9)
fr = [fermion_lower_budget(N, 0.5) for N in Ns]
print(f"\nfermions, dominant deficit exponent {fr[0].exponents['deficit']}")
for key in ("main", "rep", "xc"):
    fit = fit_exponent(Ns, [r.terms[key] for r in fr])
    print(f"  {key:5s} {str(fr[0].exponents[key]):>6s}  {fit['slope']:.12f}")
