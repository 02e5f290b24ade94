"""Minimum-error discrimination of ``P_1`` (computational basis) against ``P_U``.

Distances are diamond norms of channel differences.  Everything here is
driven by the optimised arc angle from :func:`measdisc.spectral.upsilon`; the
brute-force :func:`direct_diamond_oracle` works straight from the definition
and shares nothing with that route.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import overlap
from .errors import (
    BadN,
    DimensionMismatch,
    DimensionTooLarge,
    NoConvexCombination,
    OutOfRange,
    SaddleInfeasible,
    ValidationError,
)
from .qmat import DensityMatrix, Unitary, kron, kron_power, orthonormal_basis, project_density
from .spectral import OptimizerOptions, UpsilonResult, nu, upsilon

PERFECT_TOL = 1e-9
IDENTICAL_TOL = 1e-8
FAST_PATH_TOL = 1e-6
AP_ITERATIONS = 10_000
AP_TOL = 1e-8
ORACLE_MAX_DIM = 16


class QueryCount(enum.Enum):
    UNBOUNDED = "unbounded"


UNBOUNDED = QueryCount.UNBOUNDED


def _ups(u: Unitary, ups: UpsilonResult | None, opts: OptimizerOptions | None = None) -> UpsilonResult:
    return ups if ups is not None else upsilon(u, opts)


def _check_n(n: int) -> int:
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise BadN(f"number of shots must be a positive integer, got {n!r}")
    return int(n)


def perfect_at(ups_value: float, n: int) -> bool:
    return n * ups_value >= math.pi - PERFECT_TOL


def unitary_diamond_distance(u: Unitary) -> float:
    """``||Phi_U - Phi_1||_diamond = 2 sqrt(1 - nu^2)``."""
    v = nu(u)
    return 2.0 * math.sqrt(max(1.0 - v * v, 0.0))


def multishot_distance(u: Unitary, n: int, ups: UpsilonResult | None = None,
                       opts: OptimizerOptions | None = None) -> float:
    """Distance between ``n`` parallel copies: 2 once ``n*upsilon >= pi``, else ``2 sin(n*upsilon/2)``."""
    n = _check_n(n)
    y = _ups(u, ups, opts).upsilon
    if perfect_at(y, n):
        return 2.0
    return 2.0 * math.sin(n * y / 2)


def measurement_diamond_distance(u: Unitary, ups: UpsilonResult | None = None,
                                 opts: OptimizerOptions | None = None) -> float:
    return multishot_distance(u, 1, ups, opts)


def queries_for_perfect(u: Unitary, ups: UpsilonResult | None = None,
                        opts: OptimizerOptions | None = None):
    """Smallest ``N`` with ``N * upsilon >= pi``; :data:`UNBOUNDED` for equal measurements."""
    y = _ups(u, ups, opts).upsilon
    if y <= IDENTICAL_TOL:
        return UNBOUNDED
    n = max(1, math.ceil(math.pi / y))
    while n > 1 and perfect_at(y, n - 1):
        n -= 1
    return n


def helstrom_probability(distance: float) -> float:
    if not (0.0 <= distance <= 2.0 + 1e-12):
        raise OutOfRange(f"diamond distance {distance} outside [0, 2]")
    return 0.5 + min(distance, 2.0) / 4.0


def is_perfectly_distinguishable(u: Unitary, n: int, ups: UpsilonResult | None = None,
                                 opts: OptimizerOptions | None = None) -> bool:
    return perfect_at(_ups(u, ups, opts).upsilon, _check_n(n))


@dataclass(frozen=True)
class DiscriminationReport:
    unitary_distance: float
    measurement_distance: float
    helstrom_probability: float
    upsilon: float
    queries_for_perfect: object
    shots: int
    multishot_distance: float
    uncertain: bool = False

    def to_dict(self) -> dict:
        q = self.queries_for_perfect
        return {
            "unitary_distance": self.unitary_distance,
            "measurement_distance": self.measurement_distance,
            "helstrom_probability": self.helstrom_probability,
            "upsilon": self.upsilon,
            "queries_for_perfect": q.value if isinstance(q, QueryCount) else q,
            "shots": self.shots,
            "multishot_distance": self.multishot_distance,
            "uncertain": self.uncertain,
        }


def discrimination_report(u: Unitary, shots: int = 1, opts: OptimizerOptions | None = None) -> DiscriminationReport:
    shots = _check_n(shots)
    ups = upsilon(u, opts)
    md = measurement_diamond_distance(u, ups)
    return DiscriminationReport(
        unitary_distance=unitary_diamond_distance(u),
        measurement_distance=md,
        helstrom_probability=helstrom_probability(md),
        upsilon=ups.upsilon,
        queries_for_perfect=queries_for_perfect(u, ups),
        shots=shots,
        multishot_distance=multishot_distance(u, shots, ups),
        uncertain=not ups.converged,
    )


# -- discriminator construction ---------------------------------------------

@dataclass(frozen=True)
class DiscriminatorState:
    state: DensityMatrix
    weights: tuple
    components: list
    case: str
    shots: int
    construction: str = "extreme_eigenspaces"
    upsilon: float = float("nan")
    e0: np.ndarray | None = field(default=None, repr=False)
    core_shots: int = 1

    @property
    def rank(self) -> int:
        return self.state.rank()

    def reconstruct(self) -> np.ndarray:
        """Rebuild the state from ``weights`` and ``components``.

        Perfect states are a mixture on the first ``core_shots`` queries
        padded with ``rho_1`` on the rest.
        """
        n, m = self.shots, self.core_shots
        r1 = self.components[0]
        if self.construction == "zero_diagonal_witness":
            return kron_power(r1, n)
        rd = self.components[1]
        if self.case == "imperfect":
            return self.weights[0] * kron_power(r1, n) + self.weights[1] * kron_power(rd, n)
        if len(self.weights) == 2:
            core = self.weights[0] * r1 + self.weights[1] * rd
        else:
            p = self.weights
            core = p[0] * kron_power(r1, m) + p[1] * kron(r1, kron_power(rd, m - 1)) + p[2] * kron_power(rd, m)
        return kron(core, kron_power(r1, n - m)) if n > m else core


def _support_basis(p: np.ndarray) -> np.ndarray:
    return orthonormal_basis(p, tol=1e-6)


def _embedded_density(v: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return v @ project_density(v.conj().T @ rho @ v) @ v.conj().T


def equal_diagonal_pair(p_low: np.ndarray, p_high: np.ndarray):
    """States ``rho_1 = P_1 rho_1 P_1``, ``rho_d = P_d rho_d P_d`` with equal diagonals.

    Rank-one eigenspaces are checked directly (entrywise moduli must agree to
    ``1e-6``).  Otherwise alternating projections between the two supported
    state sets and the equal-diagonal constraint are run.
    """
    v1, vd = _support_basis(p_low), _support_basis(p_high)
    if v1.shape[1] == 1 and vd.shape[1] == 1:
        a, b = v1[:, 0], vd[:, 0]
        if np.abs(np.abs(a) - np.abs(b)).max() <= FAST_PATH_TOL:
            return np.outer(a, a.conj()), np.outer(b, b.conj())
        raise SaddleInfeasible(
            f"extreme eigenvectors have unequal moduli (max gap {np.abs(np.abs(a) - np.abs(b)).max():.2e}); "
            "the phase optimum was probably not reached")
    r1 = v1 @ v1.conj().T / v1.shape[1]
    rd = vd @ vd.conj().T / vd.shape[1]
    for _ in range(AP_ITERATIONS):
        r1, rd = _embedded_density(v1, r1), _embedded_density(vd, rd)
        gap = np.diag(r1) - np.diag(rd)
        if np.abs(gap).max() <= AP_TOL:
            return r1, rd
        avg = (np.diag(r1) + np.diag(rd)) / 2
        np.fill_diagonal(r1, avg)
        np.fill_diagonal(rd, avg)
    raise SaddleInfeasible(f"alternating projections stalled at diagonal gap {np.abs(gap).max():.2e}")


def _simplex_weights(a: complex, b: complex, c: complex) -> tuple[float, float, float]:
    # prefer the two-term combination when the outer points are antipodal
    if abs(a / abs(a) + c / abs(c)) <= 1e-8:
        return 0.5, 0.0, 0.5
    m = np.array([[a.real, b.real, c.real], [a.imag, b.imag, c.imag], [1.0, 1.0, 1.0]])
    if np.linalg.cond(m) < 1e12:
        p = np.linalg.solve(m, [0.0, 0.0, 1.0])
    else:
        p, *_ = np.linalg.lstsq(m, [0.0, 0.0, 1.0], rcond=None)
    if p.min() < -1e-9 or abs(p[0] * a + p[1] * b + p[2] * c) > 1e-8:
        raise NoConvexCombination(f"0 is not in conv({a:.4g}, {b:.4g}, {c:.4g}); upsilon is likely misestimated")
    p = np.clip(p, 0.0, None)
    p = p / p.sum()
    return float(p[0]), float(p[1]), float(p[2])


def _witness_state(w: np.ndarray) -> np.ndarray:
    sol = overlap.minimize_diagonal_overlap(w)
    if sol.value > 1e-7:
        raise SaddleInfeasible(f"no state with diag(rho U) = 0 found (best {sol.value:.2e})")
    return sol.rho


def discriminator_state(u: Unitary, n: int, ups: UpsilonResult | None = None,
                        opts: OptimizerOptions | None = None) -> DiscriminatorState:
    """Optimal input state on ``n`` parallel queries.

    Imperfect case: the equal mixture of ``rho_1^{(x)n}`` and ``rho_d^{(x)n}``,
    built from the extreme eigenspaces of ``U E0``.  Perfect case: weights
    ``(p1, p2, p3)`` put zero in the convex hull of ``lambda_1^M``,
    ``lambda_1 lambda_d^{M-1}``, ``lambda_d^M`` for the first perfect ``M``,
    and the remaining ``n - M`` copies carry ``rho_1``.  When one query is
    already perfect (``upsilon >= pi``) the extreme-eigenspace states need
    not exist and a state with ``diag(rho U) = 0`` is found with the convex
    overlap solver instead.
    """
    n = _check_n(n)
    ups = _ups(u, ups, opts)
    y = ups.upsilon
    if y <= IDENTICAL_TOL:
        raise SaddleInfeasible("upsilon is zero: the measurements are identical")
    w = ups.optimal_unitary
    extras = dict(upsilon=y, e0=np.diag(ups.e0.matrix).copy(), shots=n)

    if perfect_at(y, 1):
        try:
            r1, rd = equal_diagonal_pair(ups.extreme_low[1].matrix, ups.extreme_high[1].matrix)
            l1, ld = np.exp(1j * ups.extreme_low[0]), np.exp(1j * ups.extreme_high[0])
            weights = _simplex_weights(l1, l1, ld)
            weights = (weights[0] + weights[1], weights[2])
            base = weights[0] * r1 + weights[1] * rd
            comps, how = [r1, rd], "extreme_eigenspaces"
        except (SaddleInfeasible, NoConvexCombination):
            base = _witness_state(w)
            weights, comps, how = (1.0,), [base], "zero_diagonal_witness"
        state = kron(*([base] + [comps[0]] * (n - 1)))
        return DiscriminatorState(DensityMatrix(state), weights, comps, "perfect", construction=how, **extras)

    r1, rd = equal_diagonal_pair(ups.extreme_low[1].matrix, ups.extreme_high[1].matrix)
    if not perfect_at(y, n):
        state = 0.5 * kron_power(r1, n) + 0.5 * kron_power(rd, n)
        return DiscriminatorState(DensityMatrix(state), (0.5, 0.5), [r1, rd], "imperfect", **extras)

    m = queries_for_perfect(u, ups)
    l1, ld = np.exp(1j * ups.extreme_low[0]), np.exp(1j * ups.extreme_high[0])
    p = _simplex_weights(l1 ** m, l1 * ld ** (m - 1), ld ** m)
    core = p[0] * kron_power(r1, m) + p[1] * kron(r1, kron_power(rd, m - 1)) + p[2] * kron_power(rd, m)
    state = kron(core, kron_power(r1, n - m)) if n > m else core
    return DiscriminatorState(DensityMatrix(state), p, [r1, rd], "perfect", core_shots=m, **extras)


@dataclass(frozen=True)
class VerificationResult:
    case: str
    residual: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.residual <= self.threshold


def verify_discriminator(u: Unitary, n: int, s, ups: UpsilonResult | None = None,
                         opts: OptimizerOptions | None = None) -> VerificationResult:
    """Residual of the optimality condition for a candidate discriminator.

    Perfect case: the 1-norm of ``diag(rho (U E0)^{(x)n})``.  Imperfect case:
    ``| |tr(rho (U E0)^{(x)n})| - cos(n upsilon / 2) |``.  ``s`` may be a
    :class:`DiscriminatorState`, a :class:`DensityMatrix` or an array.
    """
    n = _check_n(n)
    ups = _ups(u, ups, opts)
    rho = s.state.matrix if isinstance(s, DiscriminatorState) else (s.matrix if isinstance(s, DensityMatrix) else np.asarray(s))
    w = kron_power(ups.optimal_unitary, n)
    if rho.shape != w.shape:
        raise DimensionMismatch(f"state has shape {rho.shape}, expected {w.shape}")
    if perfect_at(ups.upsilon, n):
        return VerificationResult("perfect", float(np.abs(overlap.diagonal_terms(rho, w)).sum()), 1e-7)
    val = abs(np.trace(rho @ w))
    return VerificationResult("imperfect", float(abs(val - math.cos(n * ups.upsilon / 2))), 1e-6)


# -- direct oracle ------------------------------------------------------------

def _trace_norm_herm(h: np.ndarray) -> tuple[float, np.ndarray]:
    wv, v = np.linalg.eigh((h + h.conj().T) / 2)
    return float(np.abs(wv).sum()), (v * np.sign(wv)) @ v.conj().T


def _unitary_ascent(w: np.ndarray, psi: np.ndarray, iters: int):
    # L(rho) = W rho W^dag - rho, its adjoint is L*(S) = W^dag S W - S
    last = -1.0
    for _ in range(iters):
        rho = np.outer(psi, psi.conj())
        val, sgn = _trace_norm_herm(w @ rho @ w.conj().T - rho)
        if val <= last + 1e-13:
            break
        last = val
        _, vecs = np.linalg.eigh(w.conj().T @ sgn @ w - sgn)
        psi = vecs[:, -1]
    return max(last, 0.0)


def _measurement_ascent(w: np.ndarray, psi: np.ndarray, iters: int):
    dim = w.shape[0]
    deltas = []
    for i in range(dim):
        e = np.zeros(dim)
        e[i] = 1.0
        deltas.append(np.diag(e) - np.outer(w[:, i], w[:, i].conj()))
    last = -1.0
    for _ in range(iters):
        x = psi.reshape(dim, dim)
        total, signs = 0.0, []
        for dlt in deltas:
            # partial trace over the system of (D_i (x) 1) |psi><psi|
            block = np.einsum("ab,ca,cd->bd", x, dlt, x.conj())
            val, sgn = _trace_norm_herm(block)
            total += val
            signs.append(sgn)
        if total <= last + 1e-13:
            break
        last = total
        g = sum(np.kron(dlt, sgn) for dlt, sgn in zip(deltas, signs))
        _, vecs = np.linalg.eigh((g + g.conj().T) / 2)
        psi = vecs[:, -1]
    return max(last, 0.0)


def direct_diamond_oracle(u: Unitary, kind: str = "measurement_channel", shots: int = 1,
                          starts: int = 12, seed: int = 0, iterations: int = 500) -> float:
    """Lower bound on the diamond distance by ascent over pure inputs.

    The input lives on system times an ancilla of the same dimension
    ``d**shots``.  For fixed input the trace norm is ``tr(S X)`` with ``S`` the
    sign of the output difference, which is linear in the input; alternating
    that sign with a top-eigenvector update increases the value monotonically.
    """
    shots = _check_n(shots)
    w = kron_power(u.matrix, shots)
    dim = w.shape[0]
    if dim > ORACLE_MAX_DIM:
        raise DimensionTooLarge(f"d**shots = {dim} exceeds {ORACLE_MAX_DIM}")
    if kind == "unitary_channel":
        big = np.kron(w, np.eye(dim))
        ascent = lambda psi: _unitary_ascent(big, psi, iterations)
    elif kind == "measurement_channel":
        ascent = lambda psi: _measurement_ascent(w, psi, iterations)
    else:
        raise ValidationError(f"unknown channel kind {kind!r}")
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(starts):
        psi = rng.standard_normal(dim * dim) + 1j * rng.standard_normal(dim * dim)
        best = max(best, ascent(psi / np.linalg.norm(psi)))
    return min(best, 2.0)
