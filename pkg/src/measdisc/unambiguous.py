"""Unambiguous discrimination of ``P_1`` against ``P_U``.

With an entangled input the optimum is ``1 - min_rho sum_i |<i|rho U|i>|``,
a convex problem solved in :mod:`measdisc.overlap`.  Without entanglement the
optimum is a maximum over disjoint label sets ``Gamma`` (conclude ``P_1``) and
``Delta`` (conclude ``P_U``) of a compressed operator norm.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import overlap
from .discrimination import equal_diagonal_pair, measurement_diamond_distance
from .errors import BadDim, DimensionTooLarge, OutOfRange, SaddleInfeasible, SingularPencil, ValidationError
from .qmat import SUBSPACE_TOL, DensityMatrix, Unitary, haar_unitary, kron_power, pure_state
from .spectral import OptimizerOptions, UpsilonResult, upsilon

log = logging.getLogger(__name__)

MAX_SUBSET_DIM = 12
MAX_PARALLEL_DIM = 16
TIE_TOL = 1e-12
GAMMA_TOL = 1e-10
PINV_RCOND = 1e-10
PENCIL_TOL = 1e-8


@dataclass(frozen=True)
class SubsetStrategy:
    gamma: tuple
    delta: tuple
    value: float
    input_state: DensityMatrix

    def __post_init__(self):
        if set(self.gamma) & set(self.delta):
            raise ValidationError("Gamma and Delta must be disjoint")


@dataclass(frozen=True)
class LabelEffects:
    """Ancilla POVM used after reading label ``i``."""
    t1: np.ndarray
    t2: np.ndarray
    t_inconclusive: np.ndarray
    gamma: float


@dataclass(frozen=True)
class UnambiguousResult:
    probability: float
    assisted: bool
    optimal_input: DensityMatrix
    strategy: object
    diagnostics: dict = field(default_factory=dict)
    effects: tuple | None = None
    residuals: tuple = (0.0, 0.0)
    gap: float = 0.0
    converged: bool = True


def _clip01(x: float) -> float:
    return float(min(max(x, 0.0), 1.0))


# -- entanglement-assisted ---------------------------------------------------

def unambiguous_entassisted_closed(u: Unitary, ups: UpsilonResult | None = None) -> float:
    """``1 - sqrt(1 - D^2/4)`` with ``D`` the single-shot diamond distance."""
    d = measurement_diamond_distance(u, ups)
    return _clip01(1.0 - math.sqrt(max(1.0 - d * d / 4, 0.0)))


def _bisect_gamma(t1: np.ndarray, t2: np.ndarray) -> float:
    # largest g in [0, 1] with 1 - g (t1 + t2) >= 0
    top = np.linalg.eigvalsh(t1 + t2)[-1]
    if top <= 1.0:
        return 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > GAMMA_TOL:
        mid = (lo + hi) / 2
        if 1.0 - mid * top >= -1e-15:
            lo = mid
        else:
            hi = mid
    return lo


def _label_effects(x: np.ndarray, y: np.ndarray, p: float, q: float, tol: float = 1e-12) -> LabelEffects:
    n = len(x)
    eye = np.eye(n)
    zero = np.zeros((n, n), dtype=complex)
    if p <= tol and q <= tol:
        return LabelEffects(zero, zero, eye.astype(complex), 0.0)
    if q <= tol:
        t1 = np.outer(x, x.conj())
        return LabelEffects(t1, zero, eye - t1, 1.0)
    if p <= tol:
        t2 = np.outer(y, y.conj())
        return LabelEffects(zero, t2, eye - t2, 1.0)
    # restrict to span{x, y}; outside it neither state has weight
    basis, s, _ = np.linalg.svd(np.stack([x, y], axis=1), full_matrices=False)
    basis = basis[:, s > 1e-10]
    span = basis @ basis.conj().T
    a = span - np.outer(y, y.conj())
    b = span - np.outer(x, x.conj())
    g = _bisect_gamma(a, b)
    return LabelEffects(g * a, g * b, eye - g * a - g * b, g)


def assisted_effects(rho: np.ndarray, u: np.ndarray):
    """Per-label ancilla measurements for the input ``|psi> = sum X_ij |i>|j>``, ``X = sqrt(rho)``.

    Returns ``(effects, diagnostics, (M_1, M_U, M_?), residuals, success)``
    where the residuals are the two unambiguity violations
    ``tr(M_U P_1(sigma))`` and ``tr(M_1 P_U(sigma))``.
    """
    d = rho.shape[0]
    w, v = np.linalg.eigh((rho + rho.conj().T) / 2)
    x_mat = (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
    xs = x_mat.T  # X^T
    p = np.real(np.diag(rho))
    q = np.real(np.diag(u.conj().T @ rho @ u))
    z = overlap.diagonal_terms(rho, u)
    effects, c, eta = [], [], []
    for i in range(d):
        xi = xs[:, i]
        yi = xs @ u[:, i].conj()
        xi = xi / np.linalg.norm(xi) if p[i] > 1e-12 else xi
        yi = yi / np.linalg.norm(yi) if q[i] > 1e-12 else yi
        effects.append(_label_effects(xi, yi, p[i], q[i]))
        c.append(abs(z[i]) / math.sqrt(p[i] * q[i]) if p[i] > 1e-12 and q[i] > 1e-12 else 0.0)
        eta.append(p[i] / (p[i] + q[i]) if p[i] + q[i] > 1e-12 else 0.5)
    proj = [np.diag(np.eye(d)[i]) for i in range(d)]
    m1 = sum(np.kron(proj[i], e.t1) for i, e in enumerate(effects))
    mu = sum(np.kron(proj[i], e.t2) for i, e in enumerate(effects))
    mq = np.eye(d * d) - m1 - mu
    psi = x_mat.reshape(-1)
    sigma = np.outer(psi, psi.conj())
    out1 = _measure_first(sigma, np.eye(d))
    out_u = _measure_first(sigma, u)
    residuals = (abs(np.trace(mu @ out1).real), abs(np.trace(m1 @ out_u).real))
    success = 0.5 * np.trace(m1 @ out1).real + 0.5 * np.trace(mu @ out_u).real
    diag = {"c": np.array(c), "eta": np.array(eta), "p": p, "q": q}
    return effects, diag, (m1, mu, mq), residuals, float(success)


def _measure_first(sigma: np.ndarray, u: np.ndarray) -> np.ndarray:
    """``(P_U (x) 1)(sigma)`` with the classical outcome written on the first register."""
    d = u.shape[0]
    out = np.zeros(sigma.shape, dtype=complex)
    for i in range(d):
        k = np.kron(np.outer(np.eye(d)[i], u[:, i].conj()), np.eye(d))
        out += k @ sigma @ k.conj().T
    return out


def unambiguous_entassisted(u: Unitary, opts: overlap.SolverOptions | None = None,
                            ups: UpsilonResult | None = None) -> UnambiguousResult:
    """Optimal assisted probability ``1 - f*`` with reconstructed effects.

    The convex solver is seeded with the equal mixture of the equal-diagonal
    extreme-eigenspace states when those exist.
    """
    m = np.asarray(u.matrix)
    extra = []
    try:
        ups = ups if ups is not None else upsilon(u, OptimizerOptions())
        r1, rd = equal_diagonal_pair(ups.extreme_low[1].matrix, ups.extreme_high[1].matrix)
        extra.append((r1 + rd) / 2)
    except SaddleInfeasible:
        pass
    sol = overlap.minimize_diagonal_overlap(m, opts, extra_starts=extra)
    rho = sol.rho
    if extra and overlap.diagonal_overlap(extra[0], m) <= sol.value + 1e-12:
        # the eigenspace mixture has p_i = q_i, so the label effects attain the bound
        rho = extra[0]
    if not sol.converged:
        log.warning("assisted solver: duality gap %.2e above tolerance", sol.gap)
    effects, diag, povm, residuals, success = assisted_effects(rho, m)
    diag["achieved_by_effects"] = success
    diag["lower_bound_f"] = sol.lower_bound
    return UnambiguousResult(
        probability=_clip01(1.0 - overlap.diagonal_overlap(rho, m)), assisted=True, optimal_input=DensityMatrix(rho),
        strategy=effects, diagnostics=diag, effects=povm, residuals=residuals,
        gap=sol.gap, converged=sol.converged)


# -- without entanglement ----------------------------------------------------

def _subset_value(m: np.ndarray, gamma: tuple, delta: tuple):
    """``(value, sigma_vec)`` for 0-based disjoint label sets."""
    d = m.shape[0]
    gc = [i for i in range(d) if i not in gamma]
    if not gc:
        return 0.0, None
    cols = m[:, gc]
    # span{U|i>: i not in Gamma} meets span{|j>: j not in Delta} in cols @ null(U[Delta, Gamma^c])
    if delta:
        block = m[list(delta), :][:, gc]
        _, s, vh = np.linalg.svd(block)
        rank = int((s > SUBSPACE_TOL).sum())
        null = vh[rank:].conj().T
    else:
        null = np.eye(len(gc), dtype=complex)
    if null.shape[1] == 0:
        return 0.0, None
    a = m[list(gamma), :][:, gc] if gamma else np.zeros((0, len(gc)))
    comp = a.conj().T @ a
    pos = [gc.index(j) for j in delta]
    comp[pos, pos] += 1.0
    red = null.conj().T @ comp @ null
    w, v = np.linalg.eigh((red + red.conj().T) / 2)
    return 0.5 * float(w[-1]), cols @ (null @ v[:, -1])


def intersection_projector(u: Unitary, gamma, delta) -> np.ndarray:
    """Orthogonal projector onto ``span{U|i>: i not in Gamma} & span{|j>: j not in Delta}`` (1-based sets)."""
    m = np.asarray(u.matrix)
    g0, d0 = _zero_based(u.dim, gamma, delta)
    gc = [i for i in range(u.dim) if i not in g0]
    if not gc:
        return np.zeros((u.dim, u.dim), dtype=complex)
    if d0:
        _, s, vh = np.linalg.svd(m[list(d0), :][:, gc])
        null = vh[int((s > SUBSPACE_TOL).sum()):].conj().T
    else:
        null = np.eye(len(gc))
    b = m[:, gc] @ null
    return b @ b.conj().T


def _zero_based(d: int, gamma, delta):
    g, dl = tuple(sorted(int(i) for i in gamma)), tuple(sorted(int(i) for i in delta))
    if set(g) & set(dl):
        raise ValidationError("Gamma and Delta must be disjoint")
    if any(i < 1 or i > d for i in g + dl):
        raise ValidationError(f"labels must lie in 1..{d}")
    return tuple(i - 1 for i in g), tuple(i - 1 for i in dl)


def subset_value(u: Unitary, gamma, delta) -> float:
    """Best unassisted success probability for fixed 1-based label sets."""
    g, dl = _zero_based(u.dim, gamma, delta)
    return _subset_value(np.asarray(u.matrix), g, dl)[0]


def unambiguous_no_ent(u: Unitary) -> UnambiguousResult:
    """Maximise over every assignment of labels to ``Gamma``, ``Delta`` or neither.

    Ties within ``1e-12`` keep the lexicographically smallest
    ``(sorted Gamma, sorted Delta)``.  Sets in the result are 1-based.
    """
    d = u.dim
    if d > MAX_SUBSET_DIM:
        raise DimensionTooLarge(f"subset enumeration needs d <= {MAX_SUBSET_DIM}, got {d}")
    m = np.asarray(u.matrix)
    best = None
    for assign in itertools.product((0, 1, 2), repeat=d):
        g = tuple(i for i in range(d) if assign[i] == 1)
        dl = tuple(i for i in range(d) if assign[i] == 2)
        val, vec = _subset_value(m, g, dl)
        key = (tuple(i + 1 for i in g), tuple(i + 1 for i in dl))
        if best is None or val > best[0] + TIE_TOL or (abs(val - best[0]) <= TIE_TOL and key < best[1]):
            best = (val, key, vec)
    val, (g, dl), vec = best
    if vec is None:
        vec = np.eye(d)[0]
    sigma = pure_state(vec)
    val = _clip01(val)
    return UnambiguousResult(probability=val, assisted=False, optimal_input=sigma,
                             strategy=SubsetStrategy(g, dl, val, sigma))


def unambiguous_no_ent_pinv(u: Unitary, gamma, delta) -> float:
    """Pseudo-inverse form of the fixed-subset value.

    ``2 || P (P+Q)^+ Theta_Delta (P+Q)^+ P + Q (P+Q)^+ Pi_Gamma (P+Q)^+ Q ||``
    with ``P = Pi_{Delta^c}`` and ``Q = Theta_{Gamma^c}``.
    """
    d = u.dim
    m = np.asarray(u.matrix)
    g, dl = _zero_based(d, gamma, delta)
    ind = lambda s: np.diag(np.isin(np.arange(d), s).astype(float))
    dc = [i for i in range(d) if i not in dl]
    gc = [i for i in range(d) if i not in g]
    p = ind(dc)
    q = m @ ind(gc) @ m.conj().T
    pencil = p + q
    ev = np.linalg.eigvalsh((pencil + pencil.conj().T) / 2)
    if np.any((ev > PINV_RCOND * 2) & (ev < PENCIL_TOL)):
        raise SingularPencil(f"projector sum has eigenvalue {ev[(ev > PINV_RCOND * 2) & (ev < PENCIL_TOL)][0]:.2e}")
    inv = np.linalg.pinv(pencil, rcond=PINV_RCOND, hermitian=True)
    theta_d = m @ ind(dl) @ m.conj().T
    pi_g = ind(g)
    op = p @ inv @ theta_d @ inv @ p + q @ inv @ pi_g @ inv @ q
    return 2.0 * float(np.linalg.eigvalsh((op + op.conj().T) / 2)[-1])


def calibrate_pinv_constant(dim: int = 3, samples: int = 20, seed: int = 0) -> float:
    """Median ratio of the subset value to the pseudo-inverse form over random cases."""
    rng = np.random.default_rng(seed)
    ratios = []
    while len(ratios) < samples:
        u = haar_unitary(dim, rng)
        assign = rng.integers(0, 3, dim)
        g = [i + 1 for i in range(dim) if assign[i] == 1]
        dl = [i + 1 for i in range(dim) if assign[i] == 2]
        a, b = subset_value(u, g, dl), unambiguous_no_ent_pinv(u, g, dl)
        if b > 1e-8:
            ratios.append(a / b)
    return float(np.median(ratios))


# -- closed forms and extensions ----------------------------------------------

def qubit_unambiguous(u: Unitary, assisted: bool) -> float:
    if u.dim != 2:
        raise BadDim(f"qubit formula needs d = 2, got {u.dim}")
    m = np.asarray(u.matrix)
    if assisted:
        return _clip01(1.0 - abs(m[0, 0]))
    off = abs(m[0, 1]) ** 2
    return 1.0 if abs(off - 1.0) <= 1e-12 else 0.5 * off


def jaeger_shimony(c: float, eta: float) -> float:
    """Optimal unambiguous success for two pure states with overlap ``c`` and priors ``eta, 1-eta``."""
    if not 0.0 <= c <= 1.0:
        raise OutOfRange(f"overlap must lie in [0, 1], got {c}")
    if not 0.0 < eta < 1.0:
        raise OutOfRange(f"prior must lie in (0, 1), got {eta}")
    c2 = c * c
    if eta < c2 / (1 + c2):
        return 1 - eta - (1 - eta) * c2
    if eta <= 1 / (1 + c2):
        return 1 - 2 * c * math.sqrt(eta * (1 - eta))
    return 1 - (1 - eta) - eta * c2


def parallel_unitary(u: Unitary, n: int) -> Unitary:
    if n < 1:
        raise ValidationError(f"N must be positive, got {n}")
    if u.dim ** n > MAX_PARALLEL_DIM:
        raise DimensionTooLarge(f"d^N = {u.dim ** n} exceeds {MAX_PARALLEL_DIM}")
    return Unitary(kron_power(u, n))


def unambiguous_parallel_result(u: Unitary, n: int, assisted: bool,
                                opts: overlap.SolverOptions | None = None) -> UnambiguousResult:
    w = parallel_unitary(u, n)
    return unambiguous_entassisted(w, opts) if assisted else unambiguous_no_ent(w)


def unambiguous_parallel(u: Unitary, n: int, assisted: bool,
                         opts: overlap.SolverOptions | None = None) -> float:
    return unambiguous_parallel_result(u, n, assisted, opts).probability
