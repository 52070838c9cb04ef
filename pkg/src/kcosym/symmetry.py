"""Vector fields, lifts, Noether symmetries and conserved currents.

Phase-space vector fields are checked numerically against the defining
conditions of an infinitesimal k-cosymplectic Noether symmetry

    (a) L(Y) omega^A = 0,   (b) i(Y) eta^A = 0,   (c) L(Y) H = 0,

and turned into conserved currents F^A = i(Y) theta^A - zeta^A with
L(Y) theta^A = d zeta^A.  All derivatives come from the fields' Jacobians,
either analytic or by central differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import _fd
from .chart import (
    ChartPoint,
    Covector,
    Dimensions,
    KTangent,
    TangentVector,
    contract_omega,
    contract_theta,
    omega_matrix,
)

__all__ = [
    "SymmetryError",
    "BaseVectorField",
    "PhaseVectorField",
    "BundleMap",
    "ConservedCurrent",
    "NoetherReport",
    "complete_lift",
    "canonical_prolongation",
    "lie_derivative_scalar",
    "lie_derivative_omega",
    "lie_derivative_theta",
    "lie_bracket",
    "bracket_field",
    "component_field",
    "noether_check",
    "killing_check",
    "conserved_from_killing",
    "conserved_from_noether",
    "pullback_current",
    "sample_box",
]


class SymmetryError(ValueError):
    """A candidate field fails the conditions required by the operation."""


class BaseVectorField:
    """Vector field Z = Z^A d/dt^A + Z^i d/dq^i on R^k x Q.

    Args:
        dims: chart dimensions (k, n).
        zt: callable ``(t, q) -> array(k)``; ``None`` for a field tangent to Q.
        zq: callable ``(t, q) -> array(n)``.
        derivs: optional callable ``(t, q) -> (dzt_dt, dzt_dq, dzq_dt, dzq_dq)``
            with shapes (k,k), (k,n), (n,k), (n,n); entry ``[a, b]`` is the
            derivative of component a along coordinate b.  Central differences
            are used when omitted.
    """

    def __init__(self, dims: Dimensions, zt=None, zq=None, derivs=None, fd_step=None):
        self.dims = dims
        self._zt = zt
        self._zq = zq
        self._derivs = derivs
        self.fd_step = _fd.EPS_CBRT if fd_step is None else float(fd_step)

    @property
    def tangent_to_q(self) -> bool:
        return self._zt is None

    def t_part(self, t, q) -> np.ndarray:
        if self._zt is None:
            return np.zeros(self.dims.k)
        return np.asarray(self._zt(np.asarray(t, float), np.asarray(q, float)), dtype=float).reshape(self.dims.k)

    def q_part(self, t, q) -> np.ndarray:
        if self._zq is None:
            return np.zeros(self.dims.n)
        return np.asarray(self._zq(np.asarray(t, float), np.asarray(q, float)), dtype=float).reshape(self.dims.n)

    def derivatives(self, t, q):
        """(dzt_dt, dzt_dq, dzq_dt, dzq_dq) at (t, q)."""
        if self._derivs is not None:
            return tuple(np.asarray(a, dtype=float) for a in self._derivs(t, q))
        k, n = self.dims.k, self.dims.n
        y = np.concatenate([np.asarray(t, float), np.asarray(q, float)])
        J = _fd.jacobian(
            lambda z: np.concatenate([self.t_part(z[:k], z[k:]), self.q_part(z[:k], z[k:])]), y, self.fd_step
        )
        return J[:k, :k], J[:k, k:], J[k:, :k], J[k:, k:]

    @classmethod
    def linear_on_q(cls, dims: Dimensions, matrix, offset=None) -> "BaseVectorField":
        """Affine field X(q) = M q + b on Q (no t-components)."""
        M = np.array(matrix, dtype=float).reshape(dims.n, dims.n)
        b = np.zeros(dims.n) if offset is None else np.array(offset, dtype=float).reshape(dims.n)
        zeros = (np.zeros((dims.k, dims.k)), np.zeros((dims.k, dims.n)), np.zeros((dims.n, dims.k)), M)
        return cls(dims, None, lambda t, q: M @ q + b, lambda t, q: zeros)

    @classmethod
    def translation(cls, dims: Dimensions, direction) -> "BaseVectorField":
        """Constant field along ``direction`` in Q."""
        return cls.linear_on_q(dims, np.zeros((dims.n, dims.n)), direction)

    @classmethod
    def rotation(cls, dims: Dimensions, i: int, j: int) -> "BaseVectorField":
        """Rotation generator -q^j d/dq^i + q^i d/dq^j in the (i, j) plane."""
        M = np.zeros((dims.n, dims.n))
        M[i, j] = -1.0
        M[j, i] = 1.0
        return cls.linear_on_q(dims, M)


class PhaseVectorField:
    """Vector field Y on R^k x M.

    Args:
        dims: chart dimensions.
        eval: callable ``ChartPoint -> TangentVector``.
        jacobian: optional callable ``ChartPoint -> (N, N) array`` with
            ``J[a, b] = dY^a/dx^b`` in flat coordinates.  Central differences
            of ``eval`` otherwise.
    """

    def __init__(self, dims: Dimensions, eval: Callable, jacobian: Optional[Callable] = None, fd_step=None):
        self.dims = dims
        self._eval = eval
        self._jac = jacobian
        self.fd_step = _fd.EPS_CBRT if fd_step is None else float(fd_step)

    def __call__(self, x: ChartPoint) -> TangentVector:
        return self._eval(x)

    def flat(self, y) -> np.ndarray:
        return self._eval(ChartPoint.from_flat(y, self.dims)).flat()

    def jacobian(self, x: ChartPoint) -> np.ndarray:
        if self._jac is not None:
            return np.asarray(self._jac(x), dtype=float)
        return _fd.jacobian(self.flat, x.flat(), self.fd_step)

    @classmethod
    def constant(cls, v: TangentVector) -> "PhaseVectorField":
        J = np.zeros((v.dims.N, v.dims.N))
        return cls(v.dims, lambda x: v, lambda x: J)

    @classmethod
    def linear(cls, dims: Dimensions, matrix, offset=None) -> "PhaseVectorField":
        """Y(x) = M x + b in flat coordinates."""
        M = np.array(matrix, dtype=float).reshape(dims.N, dims.N)
        b = np.zeros(dims.N) if offset is None else np.array(offset, dtype=float).reshape(dims.N)
        return cls(dims, lambda x: TangentVector.from_flat(M @ x.flat() + b, dims), lambda x: M)


def _lift_components(Z: BaseVectorField, t, q, p):
    dzt_dt, dzt_dq, dzq_dt, dzq_dq = Z.derivatives(t, q)
    total_t = dzt_dq + dzt_dt @ p  # dZ^A/dq^i (total)
    total_q = dzq_dq + dzq_dt @ p  # [j, i] = dZ^j/dq^i (total)
    vp = total_t - p @ total_q
    return Z.t_part(t, q), Z.q_part(t, q), vp, (dzt_dt, dzq_dt, total_q)


def complete_lift(Z: BaseVectorField) -> PhaseVectorField:
    """Complete lift Z^{1*} to R^k x (T^1_k)^* Q.

    Z^{1*} = Z^A d/dt^A + Z^i d/dq^i + (dZ^A/dq^i - p^A_j dZ^j/dq^i) d/dp^A_i
    with total derivatives d/dq^i = d/dq^i + p^B_i d/dt^B.
    """
    dims = Z.dims
    k, n, N = dims.k, dims.n, dims.N

    def ev(x: ChartPoint) -> TangentVector:
        vt, vq, vp, _ = _lift_components(Z, x.t, x.q, x.p)
        return TangentVector(vt, vq, vp)

    def jac(x: ChartPoint) -> np.ndarray:
        J = np.empty((N, N))
        p = x.p

        def tq_eval(y):
            vt, vq, vp, _ = _lift_components(Z, y[:k], y[k:], p)
            return np.concatenate([vt, vq, vp.ravel()])

        J[:, : k + n] = _fd.jacobian(tq_eval, np.concatenate([x.t, x.q]), Z.fd_step)
        _, _, _, (dzt_dt, dzq_dt, total_q) = _lift_components(Z, x.t, x.q, p)
        J[: k + n, k + n :] = 0.0
        # d vp[A, i] / d p[C, m] = delta_im (dzt_dt[A, C] - (p dzq_dt)[A, C]) - delta_AC total_q[m, i]
        coef = dzt_dt - p @ dzq_dt
        block = np.einsum("ac,im->aicm", coef, np.eye(n)) - np.einsum("ac,mi->aicm", np.eye(k), total_q)
        J[k + n :, k + n :] = block.reshape(k * n, k * n)
        return J

    return PhaseVectorField(dims, ev, jac, Z.fd_step)


@dataclass(frozen=True)
class BundleMap:
    """Fiber-bundle diffeomorphism (t, q) -> (phi^A(t, q), phi_Q(q)).

    Supply ``inverse_fiber_jacobian(q')`` (the Jacobian of phi_Q^{-1} at q')
    or ``fiber_jacobian(q)`` (inverted pointwise); central differences of
    ``fiber`` otherwise.  ``base_jacobian(t, q) -> (dphi/dt, dphi/dq)`` is
    optional likewise.
    """

    base: Callable
    fiber: Callable
    inverse_fiber_jacobian: Optional[Callable] = None
    fiber_jacobian: Optional[Callable] = None
    base_jacobian: Optional[Callable] = None
    fd_step: float = _fd.EPS_CBRT

    @classmethod
    def fiber_only(cls, fiber, fiber_jacobian=None, inverse_fiber_jacobian=None) -> "BundleMap":
        """phi = (t, phi_Q(q)), leaving the base coordinates fixed."""

        def base_jac(t, q):
            return np.eye(len(t)), np.zeros((len(t), len(q)))

        return cls(lambda t, q: np.array(t, dtype=float), fiber, inverse_fiber_jacobian, fiber_jacobian, base_jac)


def canonical_prolongation(phi: BundleMap, x: ChartPoint) -> ChartPoint:
    """Image of x under j^{1*}phi.

    p'^A_i = (dphi^A/dq^k + p^B_k dphi^A/dt^B) d(phi_Q^{-1})^k/dq^i at phi_Q(q).
    """
    t, q, p = x.t, x.q, x.p
    k, n = len(t), len(q)
    t_new = np.asarray(phi.base(t, q), dtype=float).reshape(k)
    q_new = np.asarray(phi.fiber(q), dtype=float).reshape(n)
    if phi.inverse_fiber_jacobian is not None:
        Jinv = np.asarray(phi.inverse_fiber_jacobian(q_new), dtype=float).reshape(n, n)
    else:
        if phi.fiber_jacobian is not None:
            Jf = np.asarray(phi.fiber_jacobian(q), dtype=float).reshape(n, n)
        else:
            Jf = _fd.jacobian(lambda y: np.asarray(phi.fiber(y), dtype=float), q, phi.fd_step)
        cond = np.linalg.cond(Jf)
        if not np.isfinite(cond) or cond > 1.0 / np.finfo(float).eps:
            raise ValueError(f"fiber Jacobian is singular at q={q.tolist()}")
        Jinv = np.linalg.inv(Jf)
    if phi.base_jacobian is not None:
        dphi_dt, dphi_dq = (np.asarray(a, dtype=float) for a in phi.base_jacobian(t, q))
    else:
        y = np.concatenate([t, q])
        J = _fd.jacobian(lambda z: np.asarray(phi.base(z[:k], z[k:]), dtype=float), y, phi.fd_step)
        dphi_dt, dphi_dq = J[:, :k], J[:, k:]
    p_new = (dphi_dq + dphi_dt @ p) @ Jinv
    return ChartPoint(t_new, q_new, p_new)


def lie_derivative_scalar(Y: PhaseVectorField, f, x: ChartPoint, grad=None) -> float:
    """Y(f) at x.

    Uses ``grad`` (``ChartPoint -> Covector``) or ``f.gradient`` when
    available, else a central difference along x + s Y(x).
    """
    v = Y(x)
    if grad is None:
        grad = getattr(f, "gradient", None)
    if grad is not None:
        return float(grad(x).flat() @ v.flat())
    dims = x.dims
    return float(_fd.directional(lambda y: f(ChartPoint.from_flat(y, dims)), x.flat(), v.flat(), Y.fd_step))


def lie_derivative_omega(Y: PhaseVectorField, A: int, x: ChartPoint) -> np.ndarray:
    """L(Y) omega^A = d i(Y) omega^A as an antisymmetric N x N matrix.

    Entry ``[a, b]`` is the coefficient of dx^a ^ dx^b (a < b), i.e. the
    antisymmetrized Jacobian of the covector field i(Y) omega^A.
    """
    W = omega_matrix(x.dims, A)
    Ja = -W @ Y.jacobian(x)  # Jacobian of the flat covector i(Y)omega^A = -W Y
    return Ja.T - Ja


def _lie_theta_flat(J, v: TangentVector, x: ChartPoint, A: int) -> np.ndarray:
    dims = x.dims
    d_itheta = x.p[A] @ J[dims.q_slice]
    for i in range(dims.n):
        d_itheta[dims.p_index(A, i)] += v.vq[i]
    return d_itheta - contract_omega(A, v).flat()


def lie_derivative_theta(Y: PhaseVectorField, A: int, x: ChartPoint) -> Covector:
    """L(Y) theta^A = d i(Y) theta^A - i(Y) omega^A."""
    A = x.dims.check_index(A)
    return Covector.from_flat(_lie_theta_flat(Y.jacobian(x), Y(x), x, A), x.dims)


def lie_bracket(Y1: PhaseVectorField, Y2: PhaseVectorField, x: ChartPoint) -> TangentVector:
    """[Y1, Y2](x) = J_{Y2} Y1 - J_{Y1} Y2."""
    v = Y2.jacobian(x) @ Y1(x).flat() - Y1.jacobian(x) @ Y2(x).flat()
    return TangentVector.from_flat(v, x.dims)


def bracket_field(Y1: PhaseVectorField, Y2: PhaseVectorField) -> PhaseVectorField:
    """The field x -> [Y1, Y2](x); its Jacobian is taken by central differences."""
    return PhaseVectorField(Y1.dims, lambda x: lie_bracket(Y1, Y2, x), None, Y1.fd_step)


def component_field(X, A: int, dims: Dimensions) -> PhaseVectorField:
    """The A-th vector field of a k-vector field ``X: ChartPoint -> KTangent``."""
    return PhaseVectorField(dims, lambda x: X(x)[A])


@dataclass(frozen=True)
class NoetherReport:
    """Worst-case residuals of the Noether conditions over the samples."""

    residual_omega: float
    residual_eta: float
    residual_H: float
    residual_reeb: float
    exact_residual: float
    tol: float

    @property
    def verdicts(self) -> dict:
        return {
            "omega": self.residual_omega <= self.tol,
            "eta": self.residual_eta <= self.tol,
            "hamiltonian": self.residual_H <= self.tol,
            "reeb": self.residual_reeb <= self.tol,
            "exact": self.exact_residual <= self.tol,
        }

    @property
    def passed(self) -> bool:
        """Conditions (a), (b), (c) all hold."""
        v = self.verdicts
        return v["omega"] and v["eta"] and v["hamiltonian"]

    @property
    def is_exact(self) -> bool:
        return self.exact_residual <= self.tol / 10


def noether_check(Y: PhaseVectorField, H, samples: Sequence[ChartPoint], tol: float = 1e-8) -> NoetherReport:
    """Sample-based check of the infinitesimal Noether symmetry conditions for Y and H.

    Also reports max_A |[Y, R_A]| and max_A |L(Y) theta^A| (exactness).
    Samples are processed in the given order.
    """
    samples = list(samples)
    if not samples:
        raise ValueError("noether_check needs at least one sample point")
    if not tol > 0:
        raise ValueError(f"tolerance must be positive, got {tol!r}")
    r_om = r_eta = r_H = r_reeb = r_ex = 0.0
    for x in samples:
        dims = x.dims
        J = Y.jacobian(x)
        v = Y(x)
        W_all = [omega_matrix(dims, A) for A in range(dims.k)]
        for A in range(dims.k):
            Ja = -W_all[A] @ J
            r_om = max(r_om, float(np.max(np.abs(Ja.T - Ja))))
            r_ex = max(r_ex, float(np.max(np.abs(_lie_theta_flat(J, v, x, A)))))
            # [Y, R_A] = -J_Y e_{t_A}
            r_reeb = max(r_reeb, float(np.max(np.abs(J[:, A]))))
        r_eta = max(r_eta, float(np.max(np.abs(v.vt))))
        r_H = max(r_H, abs(lie_derivative_scalar(Y, H, x)))
    return NoetherReport(r_om, r_eta, r_H, r_reeb, r_ex, float(tol))


def _metric_callables(metrics, k: int):
    if hasattr(metrics, "metric_at"):
        return [lambda q, A=A: metrics.metric_at(q)[A] for A in range(k)]
    out = []
    for g in metrics:
        if callable(g):
            out.append(g)
        else:
            arr = np.atleast_2d(np.asarray(g, dtype=float))
            out.append(lambda q, arr=arr: arr)
    return out


def killing_check(X: BaseVectorField, metrics, sample_qs, t=None) -> float:
    """max over samples, A, j, k of |(L(X) g_A)_jk|.

    (L(X) g)_jk = X(g_jk) + dX^l/dq^j g_kl + dX^l/dq^k g_jl.  ``metrics`` is a
    sequence of k callables ``q -> (n, n)`` (or constant arrays) or a
    QuadraticHamiltonian.
    """
    dims = X.dims
    t = np.zeros(dims.k) if t is None else np.asarray(t, dtype=float)
    gs = _metric_callables(metrics, dims.k)
    worst = 0.0
    for q in sample_qs:
        q = np.atleast_1d(np.asarray(q, dtype=float))
        if np.any(X.t_part(t, q) != 0.0):
            raise SymmetryError("Killing check needs a field on Q without t-components")
        Xq = X.q_part(t, q)
        dX = X.derivatives(t, q)[3]  # [l, j] = dX^l/dq^j
        for g in gs:
            G = np.asarray(g(q), dtype=float)
            dG = _fd.jacobian(lambda y: np.asarray(g(y), dtype=float), q, X.fd_step)  # [j, k, m]
            L = dG @ Xq + dX.T @ G + G @ dX
            worst = max(worst, float(np.max(np.abs(L))))
    return worst


@dataclass(frozen=True)
class KillingProvenance:
    field: BaseVectorField


@dataclass(frozen=True)
class NoetherProvenance:
    field: PhaseVectorField
    exact: bool
    base_point: Optional[ChartPoint] = None


@dataclass(frozen=True)
class UserProvenance:
    note: str = ""


@dataclass(frozen=True)
class ConservedCurrent:
    """A map F = (F^1, ..., F^k) on R^k x M."""

    eval: Callable
    provenance: object = field(default_factory=UserProvenance)

    def __call__(self, x: ChartPoint) -> np.ndarray:
        return np.asarray(self.eval(x), dtype=float)

    def gradient(self, A: int, x: ChartPoint, base=None) -> Covector:
        """dF^A at x by central differences."""
        dims = x.dims
        g = _fd.gradient(lambda y: self.eval(ChartPoint.from_flat(y, dims))[A], x.flat(), base)
        return Covector.from_flat(g, dims)


def conserved_from_killing(X: BaseVectorField) -> ConservedCurrent:
    """F^A = alpha^A(X) = sum_i p^A_i X^i(q) for a field X on Q."""
    if not X.tangent_to_q:
        raise SymmetryError("Killing current needs a field on Q without t-components")
    return ConservedCurrent(lambda x: x.p @ X.q_part(x.t, x.q), KillingProvenance(X))


def _gauss_line_integral(integrand, panels: int, nodes, weights) -> np.ndarray:
    total = 0.0
    edges = np.linspace(0.0, 1.0, panels + 1)
    for a, b in zip(edges[:-1], edges[1:]):
        half = 0.5 * (b - a)
        for s, w in zip(nodes, weights):
            total = total + (w * half) * integrand(a + half * (s + 1.0))
    return np.asarray(total)


def conserved_from_noether(
    Y: PhaseVectorField,
    H,
    samples: Sequence[ChartPoint],
    tol: float = 1e-8,
    base_point: Optional[ChartPoint] = None,
    quad_order: int = 8,
    quad_tol: float = 1e-8,
    max_panels: int = 64,
) -> ConservedCurrent:
    """Noether current F^A = i(Y) theta^A - zeta^A of a Noether symmetry Y.

    Y must pass :func:`noether_check` on ``samples`` at ``tol``.  When
    L(Y) theta^A vanishes (residual <= tol/10) zeta = 0.  Otherwise
    zeta^A(x) = int_0^1 (L(Y) theta^A)(gamma(s)) (gamma'(s)) ds along the
    segment gamma from ``base_point`` (default: chart origin) to x, by
    composite Gauss-Legendre quadrature with panel doubling until two
    successive estimates agree to ``quad_tol``.
    """
    report = noether_check(Y, H, samples, tol)
    if not report.passed:
        raise SymmetryError(
            f"field is not a Noether symmetry at tol={tol:g}: "
            f"omega={report.residual_omega:.3g}, eta={report.residual_eta:.3g}, H={report.residual_H:.3g}"
        )
    dims = samples[0].dims
    k = dims.k

    def itheta(x: ChartPoint) -> np.ndarray:
        v = Y(x)
        return np.array([contract_theta(A, v, x) for A in range(k)])

    if report.is_exact:
        return ConservedCurrent(itheta, NoetherProvenance(Y, True, None))

    x0 = ChartPoint.zeros(dims) if base_point is None else base_point
    nodes, weights = np.polynomial.legendre.leggauss(quad_order)

    def zeta(x: ChartPoint) -> np.ndarray:
        a, d = x0.flat(), x.flat() - x0.flat()

        def integrand(s):
            y = ChartPoint.from_flat(a + s * d, dims)
            return np.array([lie_derivative_theta(Y, A, y).flat() @ d for A in range(k)])

        panels = 1
        prev = _gauss_line_integral(integrand, panels, nodes, weights)
        while panels < max_panels:
            panels *= 2
            cur = _gauss_line_integral(integrand, panels, nodes, weights)
            if np.max(np.abs(cur - prev)) <= quad_tol * (1.0 + np.max(np.abs(cur))):
                return cur
            prev = cur
        raise ArithmeticError(f"line integral for zeta did not converge with {max_panels} panels")

    return ConservedCurrent(lambda x: itheta(x) - zeta(x), NoetherProvenance(Y, False, x0))


def pullback_current(F: ConservedCurrent, Phi: Callable[[ChartPoint], ChartPoint]) -> ConservedCurrent:
    """Phi^* F = F o Phi."""
    return ConservedCurrent(lambda x: F(Phi(x)), UserProvenance("pullback"))


def sample_box(dims: Dimensions, low=-1.0, high=1.0, count: int = 256, seed: int = 0) -> list:
    """Scrambled Halton points in a box of the flat chart coordinates."""
    from scipy.stats import qmc  # deferred: scipy.stats is slow to import

    sampler = qmc.Halton(d=dims.N, scramble=True, seed=seed)
    u = sampler.random(count)
    lo = np.broadcast_to(np.asarray(low, dtype=float), (dims.N,))
    hi = np.broadcast_to(np.asarray(high, dtype=float), (dims.N,))
    pts = qmc.scale(u, lo, hi)
    return [ChartPoint.from_flat(row, dims) for row in pts]
