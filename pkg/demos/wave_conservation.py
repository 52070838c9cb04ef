"""
The wave equation as an HDW system
==================================

sigma psi_tt - tau psi_xx = 0 comes from H = 1/2 [(p^1)^2/sigma - (p^2)^2/tau].
The translation d/dq is a Killing field, its current is F = (p^1, p^2) and
Div(F o psi) reproduces the wave operator.
"""

import math

import numpy as np

from kcosym import BaseVectorField, Dimensions, WaveParams, conserved_from_killing, divergence, hdw_residual_on_section, integrate_wave, wave_grid

sigma, tau = 1.0, 1.0
params = WaveParams(sigma, tau, 1, np.sin, lambda x: -np.cos(x))
F = conserved_from_killing(BaseVectorField.translation(Dimensions(2, 1), [1.0]))
H = params.hamiltonian()

print("  nodes   grid        max error   max |Div F|   HDW residual")
prev = None
for nx in (32, 64, 128, 256):
    grid = wave_grid(nx, cfl=0.5, t_final=1.0, length=2 * math.pi)
    section = integrate_wave(params, grid)
    T, X = grid.mesh()
    err = np.abs(section.psi[..., 0] - np.sin(X - T)).max()
    div = np.abs(divergence(F, section)).max()
    rq, rp = hdw_residual_on_section(H, section)
    line = f"{nx:7d}   {str(grid.shape):10s}  {err:.3e}   {div:.3e}     {max(rq.max(), rp.max()):.3e}"
    if prev is not None:
        line += f"   ratio {prev / err:.2f}"
    prev = err
    print(line)

# periodic in x: the spatial mean of p^1 = sigma psi_t is constant in time
means = section.momenta[1:-1, :, 0, 0].mean(axis=1)
print("drift of mean p^1:", np.abs(means - means[0]).max())
