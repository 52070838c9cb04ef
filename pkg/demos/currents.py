"""
Symmetries and conserved currents
=================================

A field Z on Q lifts to phase space.  If the lift preserves omega^A, is
vertical for eta^A and leaves H invariant, it is a Noether symmetry and
F^A = i(Y) theta^A - zeta^A is a conservation law.
"""

import numpy as np

from kcosym import (
    BaseVectorField,
    QuadraticHamiltonian,
    build_hdw,
    complete_lift,
    conserved_from_killing,
    conserved_from_noether,
    killing_check,
    noether_check,
    sample_box,
)

# flat metrics on Q = R^3 with a rotationally invariant potential
H = QuadraticHamiltonian(
    np.array([np.eye(3), -np.eye(3)]),
    potential=lambda t, q: float(q @ q) ** 2,
    potential_grad=lambda t, q: (np.zeros(2), 4 * float(q @ q) * q),
)
samples = sample_box(H.dims, count=64)

rot = BaseVectorField.rotation(H.dims, 0, 1)
shift = BaseVectorField.translation(H.dims, [1.0, 0.0, 0.0])
for name, Z in (("rotation", rot), ("translation", shift)):
    rep = noether_check(complete_lift(Z), H, samples)
    print(f"{name:>11}: Killing residual {killing_check(Z, H, [x.q for x in samples]):.1e}, verdicts {rep.verdicts}")

# The rotation survives, the translation is broken by the potential.
F = conserved_from_noether(complete_lift(rot), H, samples)
G = conserved_from_killing(rot)
x = samples[5]
print("Noether current:", F(x))
print("Killing current:", G(x))  # angular momenta p^A_2 q^1 - p^A_1 q^2

# conservation along any solution: sum_A dF^A(X_A) = 0
X = build_hdw(H)(x)
print("sum_A dF^A(X_A) =", sum(F.gradient(A, x).flat() @ X[A].flat() for A in range(2)))
