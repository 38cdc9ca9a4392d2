"""
Thomas-Fermi problem with self-attraction and repulsion strength U.

The reduced energy e_U/(1-U)^2 does not depend on U; the Lane-Emden
polytrope of index 3/2 gives it independently.  The greedy momentum
lattice fill approaches the closed-form kinetic density.

    python3 demos/thomas_fermi.py
"""
from polaronlab.tf_variational import (
    bathtub_kinetic,
    bathtub_lattice,
    edge_exponent,
    lane_emden,
    minimize_tf,
    tf_lane_emden,
)

le = lane_emden()
print(f"Lane-Emden n=3/2: xi1 = {le.xi1:.10f}, omega = {le.omega:.10f}")

print("\n  U      e_U             e_U/(1-U)^2      Lane-Emden rel   virial    edge")
for U in (0.1, 0.3, 0.5, 0.7, 0.9):
    r = minimize_tf(U)
    ref = tf_lane_emden(U)["energy"]
    print(
        f"{U:4.1f}  {r.energy:.10e}  {r.reduced_energy:.12f}  {abs(r.energy / ref - 1):.1e}"
        f"        {r.virial_residual:.1e}   {edge_exponent(r):.3f}"
    )

exact = bathtub_kinetic(1.0)
print(f"\nbathtub at rho = 1: closed form {exact:.12f}")
for h in (0.8, 0.4, 0.2, 0.1, 0.05):
    v = bathtub_lattice(1.0, h)
    print(f"  spacing {h:5.2f}: {v:.12f}  rel err {abs(v / exact - 1):.1e}")
