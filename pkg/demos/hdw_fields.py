"""
Solution k-vector fields of a quadratic Hamiltonian
===================================================

For H = 1/2 sum_A g_A^{ij} p^A_i p^A_j + V the equations fix the time and
position parts of X = (X_1, ..., X_k) and only the trace of the momentum
block.  Two choices of the remaining freedom are compared here.
"""

import numpy as np

from kcosym import ConcentratedGauge, QuadraticHamiltonian, SymmetricGauge, build_hdw, hdw_residual, kernel_residual, sample_box

K = np.array([[2.0, 0.3], [0.3, 1.0]])
H = QuadraticHamiltonian(
    np.array([np.eye(2), -np.diag([1.0, 4.0]), -np.eye(2)]),
    potential=lambda t, q: 0.5 * q @ K @ q,
    potential_grad=lambda t, q: (np.zeros(3), K @ q),
)
x = sample_box(H.dims, count=1, seed=3)[0]
print("point:", x)

X = build_hdw(H, SymmetricGauge())(x)
Y = build_hdw(H, ConcentratedGauge(0))(x)
for name, Z in (("symmetric", X), ("concentrated on t^1", Y)):
    E, c = hdw_residual(H, Z, x)
    print(f"{name:>20}: |eta(X) - I| = {np.abs(E).max():.1e}, covector defect = {np.abs(c.flat()).max():.1e}")
    print("   diagonal momentum blocks:", [Z[A].vp[A].round(4).tolist() for A in range(3)])

# the difference of two solutions is in the kernel of the combined map
print("kernel residual of the difference:", kernel_residual(X - Y))
