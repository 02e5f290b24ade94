"""Dense complex linear algebra for small unitaries, states and projectors.

Matrices are plain ``numpy`` arrays of dtype ``complex128``.  The thin
wrappers :class:`Unitary`, :class:`DensityMatrix` and :class:`Projector`
validate once at construction and then hold a read-only copy, so they are
safe to share.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import (
    BadParams,
    ConvergenceFailure,
    NotDensityMatrix,
    NotProjector,
    NotSquare,
    NotUnitary,
    UnknownFamily,
    ValidationError,
)

UNITARY_TOL = 1e-10
HERMITIAN_TOL = 1e-10
PROJECTOR_TOL = 1e-9
EIGEN_TOL = 1e-8
CLUSTER_TOL = 1e-9
SUBSPACE_TOL = 1e-8

FAMILIES = ("identity", "hadamard", "fourier", "rotation", "permutation", "diag_phases")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.flags.writeable = False
    return a


def as_matrix(entries) -> np.ndarray:
    """Coerce ``entries`` to a finite 2-D complex array."""
    m = np.asarray(entries, dtype=complex)
    if m.ndim != 2:
        raise ValidationError(f"expected a 2-D matrix, got shape {m.shape}")
    if m.size == 0:
        raise ValidationError("empty matrix")
    if not np.all(np.isfinite(m)):
        raise ValidationError("matrix has non-finite entries")
    return m


def _square(entries) -> np.ndarray:
    m = as_matrix(entries)
    if m.shape[0] != m.shape[1]:
        raise NotSquare(f"matrix is {m.shape[0]}x{m.shape[1]}, expected square")
    return m


def unitarity_residual(m: np.ndarray) -> float:
    return float(np.abs(m.conj().T @ m - np.eye(m.shape[0])).max())


@dataclass(frozen=True)
class Unitary:
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _frozen(self.matrix))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def H(self) -> "Unitary":
        return Unitary(self.matrix.conj().T)

    def __matmul__(self, other):
        if isinstance(other, Unitary):
            return Unitary(self.matrix @ other.matrix)
        return self.matrix @ np.asarray(other)


def make_unitary(entries, tol: float = UNITARY_TOL) -> Unitary:
    """Validate ``entries`` as a unitary matrix.

    Raises :class:`NotSquare` or :class:`NotUnitary` (residual of
    ``U^dagger U - 1`` above ``tol`` in max-norm).
    """
    m = _square(entries)
    r = unitarity_residual(m)
    if r > tol:
        raise NotUnitary(f"unitarity residual {r:.3e} exceeds {tol:.0e}")
    return Unitary(m)


def named_family(name: str, dim: int = 2, params: Sequence[float] = ()) -> Unitary:
    """Build a well-known unitary.

    ``rotation`` takes one angle and is 2x2; ``diag_phases`` takes ``dim``
    phases; ``permutation`` takes a 1-based permutation and maps ``|i>`` to
    ``|perm[i]>``; ``fourier`` has entries ``omega^{jk}/sqrt(dim)``.
    """
    params = [float(p) for p in params]
    if name not in FAMILIES:
        raise UnknownFamily(f"unknown family {name!r}; choose from {', '.join(FAMILIES)}")
    if dim < 1:
        raise BadParams("dim must be positive")

    def _no_params():
        if params:
            raise BadParams(f"family {name!r} takes no parameters")

    if name == "identity":
        _no_params()
        m = np.eye(dim)
    elif name == "hadamard":
        _no_params()
        if dim != 2:
            raise BadParams("hadamard is defined for dim=2")
        m = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    elif name == "fourier":
        _no_params()
        j, k = np.meshgrid(np.arange(dim), np.arange(dim), indexing="ij")
        m = np.exp(2j * np.pi * j * k / dim) / np.sqrt(dim)
    elif name == "rotation":
        if dim != 2 or len(params) != 1:
            raise BadParams("rotation needs dim=2 and exactly one angle")
        c, s = np.cos(params[0]), np.sin(params[0])
        m = np.array([[c, -s], [s, c]])
    elif name == "diag_phases":
        if len(params) != dim:
            raise BadParams(f"diag_phases needs {dim} phases, got {len(params)}")
        m = np.diag(np.exp(1j * np.asarray(params)))
    else:
        perm = [int(round(p)) for p in params]
        if sorted(perm) != list(range(1, dim + 1)) or any(p != int(p) for p in params):
            raise BadParams(f"permutation must reorder 1..{dim}")
        m = np.zeros((dim, dim))
        for i, p in enumerate(perm):
            m[p - 1, i] = 1.0
    return make_unitary(m)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def haar_unitary(dim: int, seed) -> Unitary:
    """Haar-random unitary from the QR decomposition of a Ginibre matrix.

    The columns of ``Q`` are rephased by ``diag(R)/|diag(R)|``; plain QR output
    is not Haar distributed.  ``seed`` is an integer or a ``Generator``.
    """
    if dim < 1:
        raise BadParams("dim must be positive")
    rng = _rng(seed)
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    q = q * (d / np.abs(d))
    return Unitary(q)


def haar_unitaries(dim: int, count: int, seed) -> np.ndarray:
    """Stack of ``count`` Haar unitaries, shape ``(count, dim, dim)``."""
    rng = _rng(seed)
    z = (rng.standard_normal((count, dim, dim)) + 1j * rng.standard_normal((count, dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=1, axis2=2)
    return q * (d / np.abs(d))[:, None, :]


def random_diagonal_unitary(dim: int, seed) -> Unitary:
    rng = _rng(seed)
    return Unitary(np.diag(np.exp(2j * np.pi * rng.random(dim))))


def kron(*factors) -> np.ndarray:
    mats = [f.matrix if isinstance(f, Unitary) else np.asarray(f, dtype=complex) for f in factors]
    return reduce(np.kron, mats)


def kron_power(a, n: int) -> np.ndarray:
    m = a.matrix if isinstance(a, Unitary) else np.asarray(a, dtype=complex)
    return reduce(np.kron, [m] * n) if n > 0 else np.ones((1, 1), dtype=complex)


@dataclass(frozen=True)
class EigenSystem:
    phases: np.ndarray
    vectors: np.ndarray

    def clusters(self, tol: float = CLUSTER_TOL) -> list[list[int]]:
        """Group indices of eigenphases closer than ``tol`` on the circle."""
        n = len(self.phases)
        if n == 0:
            return []
        groups = [[0]]
        for i in range(1, n):
            if self.phases[i] - self.phases[i - 1] < tol:
                groups[-1].append(i)
            else:
                groups.append([i])
        if len(groups) > 1 and self.phases[0] + 2 * np.pi - self.phases[-1] < tol:
            groups[0] = groups.pop() + groups[0]
        return groups

    def projector(self, indices: Sequence[int]) -> np.ndarray:
        v = self.vectors[:, list(indices)]
        return v @ v.conj().T


def eig_unitary(u) -> EigenSystem:
    """Eigenphases in ``[0, 2pi)`` (ascending) and orthonormal eigenvectors.

    Uses the complex Schur form, which is diagonal for normal matrices and
    therefore yields an orthonormal basis even inside degenerate eigenspaces.
    Each eigenvector is rephased so its largest-modulus entry is real positive.
    """
    m = u.matrix if isinstance(u, Unitary) else _square(u)
    t, z = scipy.linalg.schur(m, output="complex")
    lam = np.diag(t)
    phases = np.mod(np.angle(lam), 2 * np.pi)
    phases[phases >= 2 * np.pi] = 0.0
    order = np.argsort(phases, kind="stable")
    phases = phases[order]
    z = z[:, order]
    for k in range(z.shape[1]):
        j = np.argmax(np.abs(z[:, k]))
        z[:, k] *= np.abs(z[j, k]) / z[j, k]
    resid = np.abs(m - (z * np.exp(1j * phases)) @ z.conj().T).max()
    if resid > EIGEN_TOL:
        raise ConvergenceFailure(f"eigen-reconstruction residual {resid:.2e}")
    return EigenSystem(phases=phases, vectors=z)


def trace_norm(m) -> float:
    return float(np.linalg.svd(np.asarray(m, dtype=complex), compute_uv=False).sum())


def dephase(m) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    return np.diag(np.diag(m))


@dataclass(frozen=True)
class DensityMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _frozen(self.matrix))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def rank(self, tol: float = 1e-9) -> int:
        return int((np.linalg.eigvalsh(self.matrix) > tol).sum())


def make_density(m, tol: float = HERMITIAN_TOL) -> DensityMatrix:
    m = _square(m)
    herm = np.abs(m - m.conj().T).max()
    if herm > tol:
        raise NotDensityMatrix(f"Hermiticity residual {herm:.2e}")
    w = np.linalg.eigvalsh((m + m.conj().T) / 2)
    if w.min() < -tol:
        raise NotDensityMatrix(f"negative eigenvalue {w.min():.2e}")
    tr = np.trace(m).real
    if abs(tr - 1) > tol:
        raise NotDensityMatrix(f"trace {tr!r} differs from 1")
    return DensityMatrix((m + m.conj().T) / 2)


def pure_state(vec) -> DensityMatrix:
    v = np.asarray(vec, dtype=complex).ravel()
    v = v / np.linalg.norm(v)
    return DensityMatrix(np.outer(v, v.conj()))


def project_simplex(w: np.ndarray) -> np.ndarray:
    """Euclidean projection of a real vector onto the probability simplex."""
    u = np.sort(w)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, len(w) + 1)
    idx = np.nonzero(u * k > css - 1)[0][-1]
    tau = (css[idx] - 1) / (idx + 1)
    return np.maximum(w - tau, 0.0)


def project_density(h: np.ndarray) -> np.ndarray:
    """Frobenius-nearest density matrix to the Hermitian part of ``h``."""
    h = (h + h.conj().T) / 2
    w, v = np.linalg.eigh(h)
    return (v * project_simplex(w)) @ v.conj().T


@dataclass(frozen=True)
class Projector:
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _frozen(self.matrix))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def rank(self) -> int:
        return int(round(np.trace(self.matrix).real))


def make_projector(m) -> Projector:
    m = _square(m)
    if np.abs(m @ m - m).max() > PROJECTOR_TOL or np.abs(m - m.conj().T).max() > HERMITIAN_TOL:
        raise NotProjector("matrix is not an orthogonal projector")
    return Projector(m)


def orthonormal_basis(vectors, tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis (as columns) of the column span of ``vectors``."""
    a = np.asarray(vectors, dtype=complex)
    if a.ndim == 1:
        a = a[:, None]
    if a.shape[1] == 0:
        return a
    q, s, _ = np.linalg.svd(a, full_matrices=False)
    return q[:, s > tol * max(1.0, s.max())]


def subspace_intersection(basis_a, basis_b, tol: float = SUBSPACE_TOL) -> Projector:
    """Projector onto ``span(A) & span(B)`` via principal angles.

    Directions whose cosine (singular value of ``QA^dagger QB``) is at least
    ``1 - tol`` are kept; an empty intersection gives the zero projector.
    """
    a = np.asarray(basis_a, dtype=complex)
    b = np.asarray(basis_b, dtype=complex)
    n = a.shape[0]
    if b.shape[0] != n:
        raise ValidationError("bases live in spaces of different dimension")
    qa, qb = orthonormal_basis(a), orthonormal_basis(b)
    if qa.shape[1] == 0 or qb.shape[1] == 0:
        return Projector(np.zeros((n, n)))
    y, s, _ = np.linalg.svd(qa.conj().T @ qb)
    keep = y[:, : len(s)][:, s >= 1 - tol]
    v = orthonormal_basis(qa @ keep)
    return Projector(v @ v.conj().T)
