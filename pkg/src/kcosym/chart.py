"""Canonical k-cosymplectic structure in Darboux coordinates.

Points of R^k x M are stored as ``(t, q, p)`` with ``t`` of length k, ``q`` of
length n and ``p`` a k x n array, ``p[A, i]`` being the momentum p^A_i.  The
canonical forms are

    eta^A   = dt^A
    theta^A = p^A_i dq^i
    omega^A = dq^i ^ dp^A_i  (= -d theta^A)

and the Reeb fields are R_A = d/dt^A.  The forms are never stored as tensors;
only their contractions with vectors are exposed.

Flat coordinate vectors of length N = k + n + k*n are laid out as
``[t_0..t_{k-1}, q_0..q_{n-1}, p_00, p_01, ..., p_{k-1,n-1}]`` (A outer, i inner).
All indices are zero-based.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "Dimensions",
    "ChartPoint",
    "TangentVector",
    "Covector",
    "KTangent",
    "contract_eta",
    "contract_omega",
    "contract_theta",
    "omega_matrix",
    "reeb",
    "hdw_operator",
    "structure_operator",
    "numerical_rank",
    "kernel_dimension",
    "kernel_residual",
]


@dataclass(frozen=True)
class Dimensions:
    """Sizes of the Darboux chart: k base parameters, n configuration coordinates."""

    k: int
    n: int

    def __post_init__(self):
        if int(self.k) != self.k or int(self.n) != self.n:
            raise ValueError(f"k and n must be integers, got k={self.k!r}, n={self.n!r}")
        if self.k < 1 or self.n < 1:
            raise ValueError(f"k and n must be positive, got k={self.k}, n={self.n}")

    @property
    def N(self) -> int:
        return self.k + self.n + self.k * self.n

    # slices into a flat coordinate vector
    @property
    def t_slice(self) -> slice:
        return slice(0, self.k)

    @property
    def q_slice(self) -> slice:
        return slice(self.k, self.k + self.n)

    @property
    def p_slice(self) -> slice:
        return slice(self.k + self.n, self.N)

    def p_index(self, A: int, i: int) -> int:
        """Flat index of the momentum coordinate p^A_i."""
        return self.k + self.n + A * self.n + i

    def check_index(self, A: int) -> int:
        if not isinstance(A, (int, np.integer)) or not 0 <= A < self.k:
            raise IndexError(f"base index {A!r} out of range for k={self.k}")
        return int(A)


def _frozen(a, shape, name):
    arr = np.array(a, dtype=float)
    if arr.shape != shape:
        raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
    arr.setflags(write=False)
    return arr


class _Triple:
    """Shared storage for (t, q, p)-shaped coordinate objects."""

    _names = ("t", "q", "p")
    __slots__ = ("_a", "_b", "_c")

    def __init__(self, a, b, c):
        a = np.atleast_1d(np.asarray(a, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        k, n = a.shape[0], b.shape[0]
        c = np.asarray(c, dtype=float).reshape(k, n) if np.size(c) == k * n else np.asarray(c)
        self._a = _frozen(a, (k,), self._names[0])
        self._b = _frozen(b, (n,), self._names[1])
        self._c = _frozen(c, (k, n), self._names[2])

    @property
    def dims(self) -> Dimensions:
        return Dimensions(self._a.shape[0], self._b.shape[0])

    def flat(self) -> np.ndarray:
        return np.concatenate([self._a, self._b, self._c.ravel()])

    @classmethod
    def from_flat(cls, x, dims: Dimensions):
        x = np.asarray(x, dtype=float)
        if x.shape != (dims.N,):
            raise ValueError(f"flat vector has shape {x.shape}, expected ({dims.N},)")
        return cls(x[dims.t_slice], x[dims.q_slice], x[dims.p_slice].reshape(dims.k, dims.n))

    @classmethod
    def zeros(cls, dims: Dimensions):
        return cls(np.zeros(dims.k), np.zeros(dims.n), np.zeros((dims.k, dims.n)))

    def __add__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return type(self).from_flat(self.flat() + other.flat(), self.dims)

    def __sub__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return type(self).from_flat(self.flat() - other.flat(), self.dims)

    def __mul__(self, s):
        return type(self).from_flat(float(s) * self.flat(), self.dims)

    __rmul__ = __mul__

    def __neg__(self):
        return type(self).from_flat(-self.flat(), self.dims)

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return self.dims == other.dims and np.array_equal(self.flat(), other.flat())

    def __hash__(self):
        return hash((type(self).__name__, self.flat().tobytes()))

    def __repr__(self):
        a, b, c = self._names
        return (
            f"{type(self).__name__}({a}={self._a.tolist()}, {b}={self._b.tolist()}, "
            f"{c}={self._c.tolist()})"
        )


class ChartPoint(_Triple):
    """A point (t^A, q^i, p^A_i) of the Darboux chart."""

    __slots__ = ()

    def __init__(self, t, q, p):
        super().__init__(t, q, p)
        if not np.all(np.isfinite(self.flat())):
            raise ValueError("chart point has non-finite coordinates")

    t = property(lambda self: self._a)
    q = property(lambda self: self._b)
    p = property(lambda self: self._c)


class TangentVector(_Triple):
    """Tangent vector vt^A d/dt^A + vq^i d/dq^i + vp[A, i] d/dp^A_i."""

    _names = ("vt", "vq", "vp")
    __slots__ = ()

    vt = property(lambda self: self._a)
    vq = property(lambda self: self._b)
    vp = property(lambda self: self._c)

    def pair(self, alpha: "Covector") -> float:
        return float(alpha.flat() @ self.flat())


class Covector(_Triple):
    """One-form at[A] dt^A + aq[i] dq^i + ap[A, i] dp^A_i."""

    _names = ("at", "aq", "ap")
    __slots__ = ()

    at = property(lambda self: self._a)
    aq = property(lambda self: self._b)
    ap = property(lambda self: self._c)

    def __call__(self, v: TangentVector) -> float:
        return float(self.flat() @ v.flat())


class KTangent(tuple):
    """A k-tuple of tangent vectors (X_1, ..., X_k) at one point."""

    def __new__(cls, vectors: Sequence[TangentVector]):
        vectors = tuple(vectors)
        if not vectors:
            raise ValueError("a k-tangent needs at least one vector")
        dims = vectors[0].dims
        if len(vectors) != dims.k:
            raise ValueError(f"expected {dims.k} vectors, got {len(vectors)}")
        if any(v.dims != dims for v in vectors):
            raise ValueError("all vectors of a k-tangent must share dimensions")
        return super().__new__(cls, vectors)

    @property
    def dims(self) -> Dimensions:
        return self[0].dims

    def flat(self) -> np.ndarray:
        return np.concatenate([v.flat() for v in self])

    @classmethod
    def from_flat(cls, x, dims: Dimensions) -> "KTangent":
        x = np.asarray(x, dtype=float).reshape(dims.k, dims.N)
        return cls(TangentVector.from_flat(row, dims) for row in x)

    def __sub__(self, other):
        return KTangent(a - b for a, b in zip(self, other))

    def __add__(self, other):
        return KTangent(a + b for a, b in zip(self, other))


def contract_eta(A: int, v: TangentVector) -> float:
    """i(v) eta^A, the component of v along d/dt^A."""
    A = v.dims.check_index(A)
    return float(v.vt[A])


def contract_omega(A: int, v: TangentVector) -> Covector:
    """The one-form i(v) omega^A."""
    dims = v.dims
    A = dims.check_index(A)
    aq = -v.vp[A]
    ap = np.zeros((dims.k, dims.n))
    ap[A] = v.vq
    return Covector(np.zeros(dims.k), aq, ap)


def contract_theta(A: int, v: TangentVector, x: ChartPoint) -> float:
    """(i(v) theta^A)(x) = sum_i p^A_i(x) vq^i."""
    A = v.dims.check_index(A)
    return float(x.p[A] @ v.vq)


def omega_matrix(dims: Dimensions, A: int) -> np.ndarray:
    """Coordinate matrix W with omega^A(v, w) = v.flat() @ W @ w.flat()."""
    A = dims.check_index(A)
    W = np.zeros((dims.N, dims.N))
    for i in range(dims.n):
        qi, pi = dims.k + i, dims.p_index(A, i)
        W[qi, pi] = 1.0
        W[pi, qi] = -1.0
    return W


def reeb(A: int, dims: Dimensions) -> TangentVector:
    """Reeb vector R_A = d/dt^A."""
    A = dims.check_index(A)
    vt = np.zeros(dims.k)
    vt[A] = 1.0
    return TangentVector(vt, np.zeros(dims.n), np.zeros((dims.k, dims.n)))


def hdw_operator(dims: Dimensions) -> np.ndarray:
    """Matrix of (X_1..X_k) -> (sum_A i(X_A)omega^A, (eta^A(X_B))_{A,B}).

    Rows: the N components of the covector followed by the k*k entries
    eta^A(X_B) (A outer).  Columns: the k*N components of the k-tangent in
    ``KTangent.flat`` order.
    """
    k, N = dims.k, dims.N
    M = np.zeros((N + k * k, k * N))
    for A in range(k):
        col = A * N
        # covector rows: i(X_A)omega^A has aq[i] = -X_A.vp[A,i], ap[A,i] = X_A.vq[i]
        for i in range(dims.n):
            M[dims.k + i, col + dims.p_index(A, i)] = -1.0
            M[dims.p_index(A, i), col + dims.k + i] = 1.0
        for B in range(k):
            # eta^B(X_A) -> row N + B*k + A
            M[N + B * k + A, col + B] = 1.0
    return M


def structure_operator(dims: Dimensions) -> np.ndarray:
    """Matrix of v -> ((eta^A(v))_A, (i(v)omega^A)_A) for a single vector."""
    rows = [np.eye(dims.N)[dims.t_slice]]
    for A in range(dims.k):
        rows.append(-omega_matrix(dims, A))  # (i(v)omega)(w) = v W w, so covector = W^T v = -W v
    return np.vstack(rows)


def numerical_rank(M, tol: float = 1e-9) -> int:
    """Rank by Gaussian elimination with partial pivoting.

    A pivot counts when its magnitude exceeds ``tol`` times the largest
    absolute entry of ``M``.
    """
    if not tol > 0:
        raise ValueError(f"tolerance must be positive, got {tol!r}")
    a = np.array(M, dtype=float, copy=True)
    rows, cols = a.shape
    scale = np.max(np.abs(a)) if a.size else 0.0
    if scale == 0.0:
        return 0
    threshold = tol * scale
    rank = 0
    for c in range(cols):
        if rank == rows:
            break
        piv = rank + int(np.argmax(np.abs(a[rank:, c])))
        if abs(a[piv, c]) <= threshold:
            continue
        if piv != rank:
            a[[rank, piv]] = a[[piv, rank]]
        below = a[rank + 1 :, c] / a[rank, c]
        a[rank + 1 :, c:] -= np.outer(below, a[rank, c:])
        rank += 1
    return rank


def kernel_dimension(dims: Dimensions, tol: float = 1e-9) -> int:
    """Nullity of the combined (omega#, eta#) map on k-tangents.

    Equals (k-1)(kn+n), the rank of the affine bundle of solutions of the
    geometric Hamiltonian equations.
    """
    if not tol > 0:
        raise ValueError(f"tolerance must be positive, got {tol!r}")
    M = hdw_operator(dims)
    return M.shape[1] - numerical_rank(M, tol)


def kernel_residual(X: KTangent) -> float:
    """Max-norm of the combined (omega#, eta#) map applied to X.

    Zero exactly when X lies in ker omega# ∩ ker eta#.
    """
    return float(np.max(np.abs(hdw_operator(X.dims) @ X.flat())))
