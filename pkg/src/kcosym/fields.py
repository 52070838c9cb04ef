"""Sampled sections and finite-difference integration of the HDW equations.

A section psi(t) = (t^A, psi^i(t), psi^A_i(t)) is sampled on a rectangular
grid over the base R^k.  Axis 0 (t^1) is the evolution axis; the remaining
axes are treated spatially.  For quadratic Hamiltonians with constant metrics
the HDW system reduces to

    sum_A g_A d^2 psi / d(t^A)^2 = -dV/dq,      psi^A_i = (g_A)_ij d psi^j / dt^A,

which is integrated by explicit leapfrog along axis 0.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .chart import ChartPoint
from .hamiltonian import QuadraticHamiltonian, wave_hamiltonian

__all__ = [
    "BaseGrid",
    "SectionGrid",
    "WaveParams",
    "wave_grid",
    "check_cfl",
    "integrate_wave",
    "integrate_quadratic",
    "leapfrog_evolve",
    "momenta_from_section",
    "divergence",
    "hdw_residual_on_section",
    "wave_residual",
    "write_section_csv",
    "read_section_csv",
]

PERIODIC = "periodic"
DIRICHLET = "dirichlet"


class BaseGrid:
    """Uniform rectangular grid on the base R^k.

    ``extents`` holds one ``(start, stop, count)`` per axis.  A periodic axis
    has nodes ``start + j h`` with ``h = (stop - start) / count`` (``stop`` is
    identified with ``start``); a Dirichlet axis includes both end points.
    """

    def __init__(self, extents: Sequence[tuple], boundary: Optional[Sequence[str]] = None):
        extents = [(float(a), float(b), int(m)) for a, b, m in extents]
        if not extents:
            raise ValueError("grid needs at least one axis")
        if boundary is None:
            boundary = [DIRICHLET] + [PERIODIC] * (len(extents) - 1)
        boundary = [str(b).lower() for b in boundary]
        if len(boundary) != len(extents):
            raise ValueError("one boundary flag per axis required")
        for (a, b, m), flag in zip(extents, boundary):
            if flag not in (PERIODIC, DIRICHLET):
                raise ValueError(f"unknown boundary {flag!r}")
            if m < 3:
                raise ValueError(f"each axis needs at least 3 nodes, got {m}")
            if not b > a:
                raise ValueError(f"axis extent must be increasing, got ({a}, {b})")
        self.extents = tuple(extents)
        self.boundary = tuple(boundary)

    @property
    def k(self) -> int:
        return len(self.extents)

    @property
    def shape(self) -> tuple:
        return tuple(m for _, _, m in self.extents)

    @property
    def periodic(self) -> tuple:
        return tuple(b == PERIODIC for b in self.boundary)

    @property
    def spacing(self) -> tuple:
        return tuple(
            (b - a) / m if per else (b - a) / (m - 1)
            for (a, b, m), per in zip(self.extents, self.periodic)
        )

    def coords(self, A: int) -> np.ndarray:
        a, b, m = self.extents[A]
        if self.periodic[A]:
            return a + self.spacing[A] * np.arange(m)
        return np.linspace(a, b, m)

    def mesh(self) -> list:
        return np.meshgrid(*[self.coords(A) for A in range(self.k)], indexing="ij")

    def interior(self) -> tuple:
        """Index tuple selecting nodes with a full central stencil."""
        return tuple(slice(None) if per else slice(1, -1) for per in self.periodic)

    def __eq__(self, other):
        return isinstance(other, BaseGrid) and self.extents == other.extents and self.boundary == other.boundary

    def __repr__(self):
        return f"BaseGrid({list(self.extents)}, {list(self.boundary)})"


@dataclass(frozen=True, eq=False)
class SectionGrid:
    """Values psi^i (shape grid + (n,)) and psi^A_i (grid + (k, n)) on a grid."""

    grid: BaseGrid
    psi: np.ndarray
    momenta: np.ndarray

    def __post_init__(self):
        psi = np.array(self.psi, dtype=float)
        shape = self.grid.shape
        if psi.shape == shape:
            psi = psi[..., None]
        if psi.shape[:-1] != shape:
            raise ValueError(f"psi has shape {psi.shape}, grid is {shape}")
        n = psi.shape[-1]
        mom = np.array(self.momenta, dtype=float)
        if mom.shape != shape + (self.grid.k, n):
            raise ValueError(f"momenta has shape {mom.shape}, expected {shape + (self.grid.k, n)}")
        psi.setflags(write=False)
        mom.setflags(write=False)
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "momenta", mom)

    @property
    def n(self) -> int:
        return self.psi.shape[-1]

    @property
    def k(self) -> int:
        return self.grid.k

    def point(self, node) -> ChartPoint:
        node = tuple(node)
        t = np.array([self.grid.coords(A)[j] for A, j in enumerate(node)])
        return ChartPoint(t, self.psi[node], self.momenta[node])

    def points(self):
        """Yield ``(node, ChartPoint)`` for every node in C order."""
        coords = [self.grid.coords(A) for A in range(self.k)]
        for node in np.ndindex(*self.grid.shape):
            t = np.array([coords[A][j] for A, j in enumerate(node)])
            yield node, ChartPoint(t, self.psi[node], self.momenta[node])


@dataclass(frozen=True)
class WaveParams:
    """Wave equation sigma psi_tt - tau lap(psi) = 0 in d = 1, 2, 3 space dimensions.

    Initial data are vectorized callables of the d spatial coordinate arrays.
    """

    sigma: float
    tau: float
    spatial_dims: int
    initial_displacement: Callable
    initial_velocity: Callable

    def __post_init__(self):
        if not (self.sigma > 0 and self.tau > 0):
            raise ValueError("sigma and tau must be positive")
        if self.spatial_dims not in (1, 2, 3):
            raise ValueError("spatial_dims must be 1, 2 or 3")

    @property
    def speed(self) -> float:
        return math.sqrt(self.tau / self.sigma)

    @property
    def k(self) -> int:
        return self.spatial_dims + 1

    def hamiltonian(self) -> QuadraticHamiltonian:
        return wave_hamiltonian(self.sigma, self.tau, self.spatial_dims)


def cfl_number(speed: float, grid: BaseGrid) -> float:
    """speed * dt * sqrt(sum_a 1 / h_a^2); stable leapfrog needs <= 1."""
    h = grid.spacing
    return speed * h[0] * math.sqrt(sum(1.0 / hA**2 for hA in h[1:]))


def check_cfl(params: WaveParams, grid: BaseGrid) -> float:
    if grid.k != params.k:
        raise ValueError(f"grid has {grid.k} axes, wave system needs {params.k}")
    c = cfl_number(params.speed, grid)
    if c > 1.0 + 1e-12:
        raise ValueError(f"CFL condition violated: c*dt*sqrt(sum 1/h^2) = {c:.4g} > 1")
    return c


def wave_grid(
    spatial_nodes: int,
    cfl: float = 0.5,
    t_final: float = 1.0,
    length: float = 2 * math.pi,
    spatial_dims: int = 1,
    speed: float = 1.0,
    boundary: str = PERIODIC,
) -> BaseGrid:
    """Grid [0, t_final] x [0, length]^d with the smallest time-node count keeping CFL <= ``cfl``."""
    h = length / spatial_nodes if boundary == PERIODIC else length / (spatial_nodes - 1)
    dt_max = cfl * h / (speed * math.sqrt(spatial_dims))
    steps = max(2, math.ceil(t_final / dt_max - 1e-9))
    extents = [(0.0, t_final, steps + 1)] + [(0.0, length, spatial_nodes)] * spatial_dims
    return BaseGrid(extents, [DIRICHLET] + [boundary] * spatial_dims)


def _second_difference(u, axis, h, periodic):
    """Compact 3-point second difference; zero on non-periodic boundary nodes."""
    if periodic:
        return (np.roll(u, -1, axis) - 2.0 * u + np.roll(u, 1, axis)) / (h * h)
    out = np.zeros_like(u)
    inner = [slice(None)] * u.ndim
    lo, mid, hi = list(inner), list(inner), list(inner)
    lo[axis], mid[axis], hi[axis] = slice(None, -2), slice(1, -1), slice(2, None)
    inner[axis] = slice(1, -1)
    out[tuple(inner)] = (u[tuple(hi)] - 2.0 * u[tuple(mid)] + u[tuple(lo)]) / (h * h)
    return out


def _first_difference(u, axis, h, periodic):
    """Central first difference along ``axis``.

    At non-periodic ends the value is the quadratic extrapolation of the
    interior central differences, i.e. the one-sided stencil
    (-3u_0 + 3u_1 + 2u_2 - 3u_3 + u_4) / 2h.  It is second order and carries
    the same leading error as the interior, so a further central difference
    next to the boundary stays second order.
    """
    if periodic:
        return (np.roll(u, -1, axis) - np.roll(u, 1, axis)) / (2.0 * h)
    u = np.moveaxis(np.asarray(u, dtype=float), axis, 0)
    if u.shape[0] < 5:
        out = np.gradient(u, h, axis=0, edge_order=2)
    else:
        out = np.empty_like(u)
        out[1:-1] = (u[2:] - u[:-2]) / (2.0 * h)
        out[0] = 3.0 * out[1] - 3.0 * out[2] + out[3]
        out[-1] = 3.0 * out[-2] - 3.0 * out[-3] + out[-4]
    return np.moveaxis(out, 0, axis)


def _check_integrable(H: QuadraticHamiltonian):
    if not isinstance(H, QuadraticHamiltonian) or not H.constant_metrics:
        raise ValueError("integrate_quadratic needs a quadratic Hamiltonian with constant metrics")
    g = H.metrics
    if np.min(np.linalg.eigvalsh(g[0])) <= 0:
        raise ValueError("evolution metric g_1 must be positive definite")
    for A in range(1, g.shape[0]):
        if np.max(np.linalg.eigvalsh(g[A])) > 1e-14 * np.max(np.abs(g[A])):
            raise ValueError(f"metric g_{A + 1} must be negative semidefinite for a hyperbolic scheme")


class _Leapfrog:
    """psi_{m+1} = 2 psi_m - psi_{m-1} + dt^2 g_1^{-1} (-dV/dq - sum_{A>1} g_A D_A^2 psi_m)."""

    def __init__(self, H: QuadraticHamiltonian, grid: BaseGrid):
        _check_integrable(H)
        if grid.k != H.dims.k:
            raise ValueError(f"grid has {grid.k} axes, Hamiltonian has k={H.dims.k}")
        if grid.periodic[0]:
            raise ValueError("the evolution axis 0 cannot be periodic")
        self.H = H
        self.grid = grid
        self.g1inv = H.dual_metrics[0]
        self.spatial = [A for A in range(1, grid.k)]
        self.coords = [grid.coords(A) for A in range(1, grid.k)]
        self.has_potential = H._V is not None

    def rhs(self, u, t):
        """Acceleration along axis 0; u has shape spatial_shape + (n,)."""
        H, grid = self.H, self.grid
        force = np.zeros_like(u)
        for A in self.spatial:
            D2 = _second_difference(u, A - 1, grid.spacing[A], grid.periodic[A])
            force -= D2 @ H.metrics[A].T
        if self.has_potential:
            spatial_shape = u.shape[:-1]
            for node in np.ndindex(*spatial_shape):
                tt = np.array([t] + [c[j] for c, j in zip(self.coords, node)])
                force[node] -= H.potential_grad(tt, u[node])[1]
        return force @ self.g1inv.T

    def pin(self, u, u0):
        """Hold non-periodic spatial boundary nodes at their initial values."""
        for A in self.spatial:
            if not self.grid.periodic[A]:
                idx = [slice(None)] * u.ndim
                for j in (0, -1):
                    idx[A - 1] = j
                    u[tuple(idx)] = u0[tuple(idx)]
        return u

    def step(self, prev, cur, t, dt):
        return 2.0 * cur - prev + (dt * dt) * self.rhs(cur, t)


def leapfrog_evolve(H: QuadraticHamiltonian, grid: BaseGrid, prev, cur, steps: int, t0: float = 0.0, dt=None):
    """Advance the pair (psi_{m-1}, psi_m) by ``steps`` leapfrog steps.

    A negative ``dt`` runs the scheme backwards; pass the pair in reversed
    order to retrace a forward run.  Returns the final pair.
    """
    lf = _Leapfrog(H, grid)
    dt = grid.spacing[0] if dt is None else float(dt)
    prev = np.array(prev, dtype=float)
    cur = np.array(cur, dtype=float)
    t = t0
    for _ in range(steps):
        prev, cur = cur, lf.step(prev, cur, t, dt)
        t += dt
    return prev, cur


def _initial_array(fn, grid: BaseGrid, n: int):
    spatial = np.meshgrid(*[grid.coords(A) for A in range(1, grid.k)], indexing="ij")
    shape = grid.shape[1:]
    val = np.asarray(fn(*spatial), dtype=float)
    if val.shape == shape and n == 1:
        val = val[..., None]
    val = np.broadcast_to(val, shape + (n,)).copy()
    return val


def integrate_quadratic(H: QuadraticHamiltonian, grid: BaseGrid, initial_displacement, initial_velocity) -> SectionGrid:
    """Leapfrog solution of sum_A g_A d^2 psi/d(t^A)^2 = -dV/dq along axis 0.

    ``initial_displacement`` and ``initial_velocity`` are vectorized
    callables of the spatial coordinate arrays (none when k = 1) returning
    arrays of shape ``spatial_shape`` (n = 1) or ``spatial_shape + (n,)``.
    The first step uses the Taylor start psi_1 = psi_0 + dt v_0 + dt^2/2 a_0.
    """
    lf = _Leapfrog(H, grid)
    n = H.dims.n
    nt = grid.shape[0]
    dt = grid.spacing[0]
    times = grid.coords(0)
    u0 = _initial_array(initial_displacement, grid, n)
    v0 = _initial_array(initial_velocity, grid, n)
    psi = np.empty((nt,) + u0.shape)
    psi[0] = u0
    psi[1] = lf.pin(u0 + dt * v0 + (0.5 * dt * dt) * lf.rhs(u0, times[0]), u0)
    for m in range(1, nt - 1):
        psi[m + 1] = lf.pin(lf.step(psi[m - 1], psi[m], times[m], dt), u0)
    bare = SectionGrid(grid, psi, np.zeros(grid.shape + (grid.k, n)))
    return momenta_from_section(bare, H)


def integrate_wave(params: WaveParams, grid: BaseGrid) -> SectionGrid:
    """Leapfrog solution of sigma psi_tt - tau lap(psi) = 0 with momenta filled.

    The momenta are psi^1 = sigma psi_t and psi^{1+a} = -tau psi_{x_a}.
    """
    check_cfl(params, grid)
    return integrate_quadratic(params.hamiltonian(), grid, params.initial_displacement, params.initial_velocity)


def momenta_from_section(section: SectionGrid, H: QuadraticHamiltonian) -> SectionGrid:
    """Fill psi^A_i = (g_A)_ij d psi^j / dt^A by central differences."""
    grid = section.grid
    if H.dims.k != grid.k or H.dims.n != section.n:
        raise ValueError("Hamiltonian dimensions do not match the section")
    mom = np.empty(grid.shape + (grid.k, section.n))
    for A in range(grid.k):
        D = _first_difference(section.psi, A, grid.spacing[A], grid.periodic[A])
        if H.constant_metrics:
            mom[..., A, :] = D @ H.metrics[A].T
        else:
            for node in np.ndindex(*grid.shape):
                mom[node + (A,)] = H.metric_at(section.psi[node])[A] @ D[node]
    return SectionGrid(grid, section.psi, mom)


def _node_values(fn, section: SectionGrid, width: int) -> np.ndarray:
    out = np.empty(section.grid.shape + (width,))
    for node, x in section.points():
        out[node] = fn(x)
    return out


def divergence(F, section: SectionGrid) -> np.ndarray:
    """Div(F o psi) = sum_A d(F^A o psi)/dt^A on interior nodes.

    ``F`` is a :class:`~kcosym.symmetry.ConservedCurrent` or any callable
    mapping a ChartPoint to k values.
    """
    grid = section.grid
    vals = _node_values(F, section, grid.k)
    div = np.zeros(grid.shape)
    for A in range(grid.k):
        div += _first_difference(vals[..., A], A, grid.spacing[A], grid.periodic[A])
    return div[grid.interior()]


def hdw_residual_on_section(H, section: SectionGrid):
    """Pointwise defects of the HDW equations on interior nodes.

    Returns ``(r_q, r_p)`` with r_q = max_i |dH/dq^i + sum_A d psi^A_i/dt^A|
    and r_p = max_{A,i} |dH/dp^A_i - d psi^i/dt^A|.
    """
    grid = section.grid
    k, n = grid.k, section.n
    if isinstance(H, QuadraticHamiltonian) and H.constant_metrics and H._V is None:
        dHq = np.zeros(grid.shape + (n,))
        dHp = np.einsum("aij,...aj->...ai", H.dual_metrics, section.momenta)
    else:
        dHq = np.empty(grid.shape + (n,))
        dHp = np.empty(grid.shape + (k, n))
        for node, x in section.points():
            g = H.gradient(x)
            dHq[node] = g.aq
            dHp[node] = g.ap
    trace = np.zeros(grid.shape + (n,))
    rp = np.zeros(grid.shape)
    for A in range(k):
        h, per = grid.spacing[A], grid.periodic[A]
        trace += _first_difference(section.momenta[..., A, :], A, h, per)
        dpsi = _first_difference(section.psi, A, h, per)
        rp = np.maximum(rp, np.max(np.abs(dHp[..., A, :] - dpsi), axis=-1))
    rq = np.max(np.abs(dHq + trace), axis=-1)
    inner = grid.interior()
    return rq[inner], rp[inner]


def wave_residual(section: SectionGrid, sigma: float, tau: float) -> np.ndarray:
    """Compact discrete sigma D_t^2 psi - tau sum_a D_a^2 psi on interior nodes."""
    grid = section.grid
    u = section.psi[..., 0]
    r = sigma * _second_difference(u, 0, grid.spacing[0], grid.periodic[0])
    for A in range(1, grid.k):
        r = r - tau * _second_difference(u, A, grid.spacing[A], grid.periodic[A])
    return r[grid.interior()]


def wave_terms_scale(section: SectionGrid, sigma: float, tau: float) -> float:
    """max over interior nodes of sigma |D_t^2 psi| + tau sum_a |D_a^2 psi|."""
    grid = section.grid
    u = section.psi[..., 0]
    s = sigma * np.abs(_second_difference(u, 0, grid.spacing[0], grid.periodic[0]))
    for A in range(1, grid.k):
        s = s + tau * np.abs(_second_difference(u, A, grid.spacing[A], grid.periodic[A]))
    return float(np.max(s[grid.interior()]))


def _csv_header(k, n):
    return (
        [f"t{A + 1}" for A in range(k)]
        + [f"q{i + 1}" for i in range(n)]
        + [f"p{A + 1}_{i + 1}" for A in range(k) for i in range(n)]
    )


def write_section_csv(section: SectionGrid, path) -> None:
    """One row per node (C order): t1..tk, q1..qn, p{A}_{i} (A outer)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_csv_header(section.k, section.n))
        grid = section.grid
        size = int(np.prod(grid.shape))
        t = np.stack([c.ravel() for c in grid.mesh()], axis=-1)
        rows = np.concatenate([t, section.psi.reshape(size, -1), section.momenta.reshape(size, -1)], axis=1)
        w.writerows([repr(float(v)) for v in r] for r in rows.tolist())


def read_section_csv(path, grid: Optional[BaseGrid] = None, boundary: Optional[Sequence[str]] = None) -> SectionGrid:
    """Read a section written by :func:`write_section_csv`.

    Without ``grid`` the axes are inferred from the coordinate columns, using
    ``boundary`` flags (default: axis 0 Dirichlet, others periodic).
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], np.array([[float(v) for v in r] for r in rows[1:]])
    k = sum(1 for h in header if h.startswith("t"))
    n = sum(1 for h in header if h.startswith("q"))
    if header != _csv_header(k, n):
        raise ValueError("unrecognized section CSV header")
    if grid is None:
        flags = list(boundary) if boundary is not None else [DIRICHLET] + [PERIODIC] * (k - 1)
        extents = []
        for A in range(k):
            u = np.unique(data[:, A])
            if flags[A] == PERIODIC:
                extents.append((u[0], u[0] + len(u) * (u[-1] - u[0]) / (len(u) - 1), len(u)))
            else:
                extents.append((u[0], u[-1], len(u)))
        grid = BaseGrid(extents, flags)
    shape = grid.shape
    if data.shape[0] != int(np.prod(shape)):
        raise ValueError("row count does not match grid")
    psi = data[:, k : k + n].reshape(shape + (n,))
    mom = data[:, k + n :].reshape(shape + (k, n))
    return SectionGrid(grid, psi, mom)
