"""
Single-species energy constant.

Computes the coupling I0 two ways, minimises the functional by projected
gradient flow, checks it against the shooting solution of
-Delta u + u = u^{3/2}, and shows that the mass-n minimiser is an exact
dilation of the unit-mass one.

    python3 demos/pekar_constant.py
"""
import numpy as np

from polaronlab.pekar_variational import (
    default_grid,
    minimize_pekar,
    pekar_energy,
    rescale_minimizer,
    shape_integrals,
    soliton_oracle,
)
from polaronlab.special_math import I0_PRINTED, i0_closed_form, i0_quadrature

I0 = i0_closed_form()
print(f"I0 gamma form   {I0:.16f}")
print(f"I0 quadrature   {i0_quadrature():.16f}")
print(f"printed value   {I0_PRINTED}   (2^(1/3) I0 = {2 ** (1 / 3) * I0:.6f})")

oracle = soliton_oracle()
print(f"\nshooting: u(0) = {oracle.u0:.12f}, A = {-oracle.energy:.15f}")

print("\nnodes        A             |rel err|    virial")
for n in (256, 512, 1024, 2048):
    res = minimize_pekar(1.0, grid=default_grid(n_nodes=n))
    err = abs(res.A + oracle.energy) / abs(oracle.energy)
    print(f"{n:5d}  {res.A:.13f}  {err:.2e}   {res.virial_residual:.1e}")

phi = res.minimizer
s = shape_integrals(phi)
print(f"\nshape integrals: P = {s.P:.10f}, Q = {s.Q:.10f}, T = {s.T:.10f}, decay {s.decay_rate:.5f}")

print("\n       n        E(rescaled)          -A n^(7/5)")
for n in (1.0, 32.0, 1e5):
    e = pekar_energy(rescale_minimizer(phi, n), I0)
    print(f"{n:9.3g}  {e:.15e}  {-res.A * n**1.4:.15e}")

# doubling the coupling multiplies the energy by 2^{8/5}
e2 = minimize_pekar(1.0, I=2 * I0, grid=default_grid(n_nodes=1024)).energy
print(f"\nE(2 I0)/E(I0) = {e2 / res.energy:.10f},  2^(8/5) = {2**1.6:.10f}")
