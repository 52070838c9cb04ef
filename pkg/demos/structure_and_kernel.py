"""
The canonical structure in Darboux coordinates
==============================================

Points of R^k x (T^1_k)^*Q are (t^A, q^i, p^A_i).  The structure is
eta^A = dt^A, theta^A = p^A_i dq^i and omega^A = dq^i ^ dp^A_i.
"""

import numpy as np

from kcosym import ChartPoint, Dimensions, TangentVector, contract_eta, contract_omega, contract_theta, kernel_dimension, reeb

dims = Dimensions(k=2, n=1)
print("phase dimension N =", dims.N)

# the Reeb fields R_A = d/dt^A: eta^B(R_A) = delta, i(R_A) omega^B = 0
for A in range(dims.k):
    R = reeb(A, dims)
    etas = [contract_eta(B, R) for B in range(dims.k)]
    omegas = [float(np.abs(contract_omega(B, R).flat()).max()) for B in range(dims.k)]
    print(f"R_{A + 1}: eta = {etas}, max abs i(R) omega = {omegas}")

# a vector with a q-component and a p^1-component
v = TangentVector([0.0, 0.0], [1.0], [[2.0], [0.0]])
x = ChartPoint([0.0, 0.0], [0.5], [[3.0], [-1.0]])
print("i(v) omega^1 =", contract_omega(0, v).flat())  # (0, 0, -2, 1, 0)
print("i(v) theta^1 =", contract_theta(0, v, x))

# Solutions of the Hamiltonian equations form an affine space modelled on
# ker omega# ∩ ker eta#.  Its dimension is (k-1)(kn+n).
print()
print(" k  n  nullity  (k-1)(kn+n)")
for k in range(1, 5):
    for n in (1, 2, 3):
        print(f"{k:2d} {n:2d} {kernel_dimension(Dimensions(k, n)):8d} {(k - 1) * (k * n + n):12d}")
