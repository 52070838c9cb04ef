"""Hamiltonian functions and solutions of the geometric Hamiltonian equations.

A k-vector field X = (X_1, ..., X_k) solves the geometric Hamiltonian
equations when

    eta^A(X_B) = delta^A_B,   sum_A i(X_A) omega^A = dH - sum_A (dH/dt^A) eta^A.

In Darboux coordinates this fixes (X_A)^B = delta, (X_A)^i = dH/dp^A_i and
only the trace sum_A (X_A)^A_i = -dH/dq^i of the momentum block.  The
remaining freedom is a choice of gauge; see :class:`SymmetricGauge` and
:class:`ConcentratedGauge`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from . import _fd
from .chart import ChartPoint, Covector, Dimensions, KTangent, TangentVector

__all__ = [
    "HamiltonianFunction",
    "QuadraticHamiltonian",
    "SymmetricGauge",
    "ConcentratedGauge",
    "SYMMETRIC",
    "HamiltonianKVectorField",
    "dual_metric",
    "eval_quadratic",
    "gradient",
    "build_hdw",
    "hdw_residual",
    "reconstruct_from_section",
    "wave_hamiltonian",
]


class HamiltonianFunction:
    """A generic Hamiltonian H(t, q, p).

    Args:
        dims: chart dimensions.
        value: callable ``ChartPoint -> float``.
        gradient: optional analytic ``ChartPoint -> Covector``.  When absent,
            central differences with per-axis step ``fd_step * (1 + |x_j|)``
            are used.
        fd_step: base finite-difference step, defaults to cbrt(machine eps).
    """

    def __init__(
        self,
        dims: Dimensions,
        value: Callable[[ChartPoint], float],
        gradient: Optional[Callable[[ChartPoint], Covector]] = None,
        fd_step: Optional[float] = None,
    ):
        if fd_step is not None and not fd_step > 0:
            raise ValueError("fd_step must be positive")
        self.dims = dims
        self._value = value
        self._gradient = gradient
        self.fd_step = _fd.EPS_CBRT if fd_step is None else float(fd_step)

    @property
    def has_analytic_gradient(self) -> bool:
        return self._gradient is not None

    def __call__(self, x: ChartPoint) -> float:
        return float(self._value(x))

    def gradient(self, x: ChartPoint) -> Covector:
        if self._gradient is not None:
            return self._gradient(x)
        dims = self.dims
        g = _fd.gradient(lambda y: self._value(ChartPoint.from_flat(y, dims)), x.flat(), self.fd_step)
        return Covector.from_flat(g, dims)


def dual_metric(g) -> np.ndarray:
    """Inverse of a symmetric, invertible metric matrix."""
    g = np.atleast_2d(np.asarray(g, dtype=float))
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError(f"metric must be a square matrix, got shape {g.shape}")
    scale = max(1.0, float(np.max(np.abs(g))))
    if np.max(np.abs(g - g.T)) > 1e-12 * scale:
        raise ValueError("metric is not symmetric (asymmetry above 1e-12)")
    cond = np.linalg.cond(g)
    if not np.isfinite(cond) or cond > 1.0 / np.finfo(float).eps:
        raise ValueError(f"metric is singular (condition number {cond:.3g})")
    ginv = np.linalg.inv(g)
    ginv = 0.5 * (ginv + ginv.T)
    err = np.max(np.abs(g @ ginv - np.eye(g.shape[0])))
    if err > 1e-10:
        raise ValueError(f"metric inverse inaccurate: |g g* - I| = {err:.3g}")
    return ginv


class QuadraticHamiltonian:
    """H = 1/2 sum_A g_A^{ij}(q) p^A_i p^A_j + V(t, q).

    Args:
        metrics: k x n x n array of constant covariant metrics g_A.  Omit when
            ``metric_fn`` is given.
        metric_fn: for q-dependent metrics, a callable ``q -> g`` (k x n x n)
            or ``q -> (g, dg)`` with ``dg[A, i, j, m] = d g_A,ij / dq^m``.
            Missing derivatives are taken by central differences.
        potential: callable ``(t, q) -> float``; defaults to zero.
        potential_grad: optional callable ``(t, q) -> (dV/dt, dV/dq)``.
        fd_step: base finite-difference step.
    """

    def __init__(
        self,
        metrics=None,
        *,
        metric_fn: Optional[Callable] = None,
        k: Optional[int] = None,
        n: Optional[int] = None,
        potential: Optional[Callable] = None,
        potential_grad: Optional[Callable] = None,
        fd_step: Optional[float] = None,
    ):
        if (metrics is None) == (metric_fn is None):
            raise ValueError("give exactly one of metrics or metric_fn")
        self.fd_step = _fd.EPS_CBRT if fd_step is None else float(fd_step)
        if metrics is not None:
            g = np.asarray(metrics, dtype=float)
            if g.ndim == 2:
                g = g[None]
            if g.ndim != 3 or g.shape[1] != g.shape[2]:
                raise ValueError(f"metrics must have shape (k, n, n), got {g.shape}")
            self.dims = Dimensions(g.shape[0], g.shape[1])
            self.metrics = g.copy()
            self.dual_metrics = np.stack([dual_metric(gA) for gA in g])
            self.metrics.setflags(write=False)
            self.dual_metrics.setflags(write=False)
        else:
            if k is None or n is None:
                raise ValueError("k and n are required with metric_fn")
            self.dims = Dimensions(k, n)
            self.metrics = None
            self.dual_metrics = None
        self._metric_fn = metric_fn
        self._V = potential
        self._dV = potential_grad

    @property
    def constant_metrics(self) -> bool:
        return self.metrics is not None

    @property
    def has_analytic_gradient(self) -> bool:
        return self.constant_metrics and (self._V is None or self._dV is not None)

    def metric_at(self, q):
        """Covariant metrics g_A(q), shape (k, n, n)."""
        if self.metrics is not None:
            return self.metrics
        out = self._metric_fn(np.asarray(q, dtype=float))
        return np.asarray(out[0] if isinstance(out, tuple) else out, dtype=float)

    def dual_at(self, q):
        """Dual metrics g_A^{ij}(q) and their q-derivatives (k, n, n, n)."""
        dims = self.dims
        if self.metrics is not None:
            return self.dual_metrics, np.zeros((dims.k, dims.n, dims.n, dims.n))
        q = np.asarray(q, dtype=float)
        out = self._metric_fn(q)
        if isinstance(out, tuple):
            g, dg = (np.asarray(a, dtype=float) for a in out)
        else:
            g = np.asarray(out, dtype=float)
            dg = _fd.jacobian(lambda y: np.asarray(self.metric_at(y)).ravel(), q, self.fd_step)
            dg = dg.reshape(dims.k, dims.n, dims.n, dims.n)
        ginv = np.stack([dual_metric(gA) for gA in g])
        dginv = -np.einsum("aij,ajlm,alk->aikm", ginv, dg, ginv)
        return ginv, dginv

    def potential(self, t, q) -> float:
        return 0.0 if self._V is None else float(self._V(t, q))

    def potential_grad(self, t, q):
        dims = self.dims
        if self._V is None:
            return np.zeros(dims.k), np.zeros(dims.n)
        if self._dV is not None:
            dt, dq = self._dV(t, q)
            return np.asarray(dt, dtype=float).reshape(dims.k), np.asarray(dq, dtype=float).reshape(dims.n)
        y = np.concatenate([t, q])
        g = _fd.gradient(lambda z: self._V(z[: dims.k], z[dims.k :]), y, self.fd_step)
        return g[: dims.k], g[dims.k :]

    def __call__(self, x: ChartPoint) -> float:
        ginv = self.dual_metrics if self.metrics is not None else self.dual_at(x.q)[0]
        kinetic = 0.5 * np.einsum("ai,aij,aj->", x.p, ginv, x.p)
        return float(kinetic + self.potential(x.t, x.q))

    def gradient(self, x: ChartPoint) -> Covector:
        ginv, dginv = self.dual_at(x.q)
        dVt, dVq = self.potential_grad(x.t, x.q)
        aq = 0.5 * np.einsum("aijm,ai,aj->m", dginv, x.p, x.p) + dVq
        ap = np.einsum("aij,ai->aj", ginv, x.p)
        return Covector(dVt, aq, ap)


Hamiltonian = Union[HamiltonianFunction, QuadraticHamiltonian]


def eval_quadratic(H: QuadraticHamiltonian, x: ChartPoint) -> float:
    """Value of a quadratic Hamiltonian at x."""
    return H(x)


def gradient(H: Hamiltonian, x: ChartPoint) -> Covector:
    """dH at x: analytic when available, central differences otherwise."""
    return H.gradient(x)


def wave_hamiltonian(sigma: float = 1.0, tau: float = 1.0, spatial_dims: int = 3) -> QuadraticHamiltonian:
    """Quadratic Hamiltonian of sigma psi_tt - tau lap(psi) = 0.

    Metrics g_1 = sigma dq^2 and g_{2..d+1} = -tau dq^2 on Q = R, so that
    H = 1/2 [(p^1)^2 / sigma - ((p^2)^2 + ... ) / tau].
    """
    if not (sigma > 0 and tau > 0):
        raise ValueError("sigma and tau must be positive")
    if spatial_dims not in (1, 2, 3):
        raise ValueError("spatial_dims must be 1, 2 or 3")
    g = np.array([[[sigma]]] + [[[-tau]]] * spatial_dims, dtype=float)
    return QuadraticHamiltonian(g)


@dataclass(frozen=True)
class SymmetricGauge:
    """Split -dH/dq^i equally over the k diagonal momentum blocks."""


@dataclass(frozen=True)
class ConcentratedGauge:
    """Put all of -dH/dq^i on the diagonal block of one base index."""

    index: int

    def __post_init__(self):
        if self.index < 0:
            raise IndexError(f"gauge index {self.index} must be non-negative")


SYMMETRIC = SymmetricGauge()
HdwGauge = Union[SymmetricGauge, ConcentratedGauge]


@dataclass(frozen=True)
class HamiltonianKVectorField:
    """A k-vector field built from H that solves the geometric Hamiltonian equations."""

    source: object
    gauge: object = field(default=SYMMETRIC)

    def __call__(self, x: ChartPoint) -> KTangent:
        dims = x.dims
        dH = self.source.gradient(x)
        k, n = dims.k, dims.n
        if isinstance(self.gauge, ConcentratedGauge):
            if self.gauge.index >= k:
                raise IndexError(f"gauge index {self.gauge.index} out of range for k={k}")
            weights = np.zeros(k)
            weights[self.gauge.index] = 1.0
        else:
            weights = np.full(k, 1.0 / k)
        vectors = []
        for A in range(k):
            vt = np.zeros(k)
            vt[A] = 1.0
            vp = np.zeros((k, n))
            vp[A] = -weights[A] * dH.aq
            vectors.append(TangentVector(vt, dH.ap[A], vp))
        return KTangent(vectors)

    eval = __call__


def build_hdw(H: Hamiltonian, gauge: HdwGauge = SYMMETRIC) -> HamiltonianKVectorField:
    """k-vector field solving the geometric Hamiltonian equations for H.

    Off-diagonal momentum components (X_A)^B_i, A != B, are zero; the trace
    condition on the diagonal is distributed according to ``gauge``.
    """
    if isinstance(gauge, ConcentratedGauge) and gauge.index >= H.dims.k:
        raise IndexError(f"gauge index {gauge.index} out of range for k={H.dims.k}")
    return HamiltonianKVectorField(H, gauge)


def hdw_residual(H: Hamiltonian, X: KTangent, x: ChartPoint):
    """Defects of X in the geometric Hamiltonian equations at x.

    Returns ``(E, c)`` with ``E[A, B] = eta^A(X_B) - delta^A_B`` and ``c`` the
    covector sum_A i(X_A)omega^A - dH + sum_A (dH/dt^A) eta^A.
    """
    dims = x.dims
    if X.dims != dims:
        raise ValueError("k-tangent and point have different dimensions")
    E = np.array([[X[B].vt[A] for B in range(dims.k)] for A in range(dims.k)]) - np.eye(dims.k)
    dH = H.gradient(x)
    aq = -sum(X[A].vp[A] for A in range(dims.k)) - dH.aq
    ap = np.stack([X[A].vq for A in range(dims.k)]) - dH.ap
    return E, Covector(np.zeros(dims.k), aq, ap)


def reconstruct_from_section(section, node) -> KTangent:
    """Tangent k-vector of a sampled section at an interior grid node.

    The A-th vector is psi_*(d/dt^A): (e_A, d psi^i/dt^A, d psi^B_i/dt^A), the
    derivatives taken by central differences on the grid.
    """
    grid = section.grid
    node = tuple(int(j) for j in node)
    if len(node) != grid.k:
        raise ValueError(f"node needs {grid.k} indices, got {len(node)}")
    k, n = grid.k, section.n
    vectors = []
    for A in range(k):
        m = grid.shape[A]
        j = node[A]
        if not 0 <= j < m:
            raise IndexError(f"node index {j} outside axis {A} of length {m}")
        if grid.periodic[A]:
            jp, jm = (j + 1) % m, (j - 1) % m
        else:
            if j == 0 or j == m - 1:
                raise ValueError(f"node {node} lies on the boundary of axis {A}; central stencil unavailable")
            jp, jm = j + 1, j - 1
        hi = node[:A] + (jp,) + node[A + 1 :]
        lo = node[:A] + (jm,) + node[A + 1 :]
        h2 = 2.0 * grid.spacing[A]
        vq = (section.psi[hi] - section.psi[lo]) / h2
        vp = (section.momenta[hi] - section.momenta[lo]) / h2
        vt = np.zeros(k)
        vt[A] = 1.0
        vectors.append(TangentVector(vt, vq, vp))
    return KTangent(vectors)
