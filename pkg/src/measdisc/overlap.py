"""Minimise the diagonal overlap ``sum_i |<i| rho W |i>|`` over density matrices.

The functional is convex in ``rho``.  Its minimum equals one minus the optimal
entanglement-assisted unambiguous success probability for distinguishing the
computational-basis measurement from the one in basis ``W``, and it vanishes
exactly when a state with ``diag(rho W) = 0`` exists.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .qmat import project_density

SMOOTHING = 1e-9


@dataclass(frozen=True)
class SolverOptions:
    iterations: int = 2000
    starts: int = 8
    step: float = 0.5
    seed: int = 0
    polish: bool = True
    gap_tol: float = 1e-6


@dataclass(frozen=True)
class OverlapSolution:
    rho: np.ndarray
    value: float
    lower_bound: float
    subgradient_value: float
    converged: bool

    @property
    def gap(self) -> float:
        return max(self.value - self.lower_bound, 0.0)


def diagonal_terms(rho: np.ndarray, w: np.ndarray) -> np.ndarray:
    # diag(rho @ w) without forming the product
    return np.einsum("ij,ji->i", rho, w)


def diagonal_overlap(rho: np.ndarray, w: np.ndarray) -> float:
    return float(np.abs(diagonal_terms(rho, w)).sum())


def _hermitian_gradient(rho: np.ndarray, w: np.ndarray, eps: float) -> np.ndarray:
    z = diagonal_terms(rho, w)
    u = z.conj() / np.sqrt(np.abs(z) ** 2 + eps ** 2)
    b = w * u[None, :]
    return (b + b.conj().T) / 2


def dual_bound(rho: np.ndarray, w: np.ndarray) -> float:
    """Weak-duality lower bound ``lambda_min(Herm(sum_i u_i W|i><i|))`` at ``u = phase(z)``."""
    z = diagonal_terms(rho, w)
    mag = np.abs(z)
    u = np.where(mag > 0, z.conj() / np.where(mag > 0, mag, 1), 1.0)
    b = w * u[None, :]
    return float(np.linalg.eigvalsh((b + b.conj().T) / 2)[0])


def _subgradient(w, rho0, opts: SolverOptions):
    rho = project_density(rho0)
    best, best_val = rho, diagonal_overlap(rho, w)
    for k in range(1, opts.iterations + 1):
        g = _hermitian_gradient(rho, w, SMOOTHING)
        gn = np.linalg.norm(g)
        if gn == 0:
            break
        rho = project_density(rho - (opts.step / np.sqrt(k)) * g / gn)
        val = diagonal_overlap(rho, w)
        if val < best_val:
            best, best_val = rho, val
    return best, best_val


def _factor(rho: np.ndarray, rng) -> np.ndarray:
    wv, v = np.linalg.eigh((rho + rho.conj().T) / 2)
    x = v * np.sqrt(np.clip(wv, 0, None))
    noise = rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape)
    return x + 1e-7 * noise


def _burer_monteiro(w, x0, objective):
    n = x0.shape[0]

    def unpack(p):
        return (p[: n * n] + 1j * p[n * n:]).reshape(n, n)

    def fun(p):
        x = unpack(p)
        t = np.vdot(x, x).real
        rho = x @ x.conj().T / t
        val, g = objective(rho)
        grad = 2 * (g @ x - np.trace(g @ rho).real * x) / t
        return val, np.concatenate([grad.real.ravel(), grad.imag.ravel()])

    p0 = np.concatenate([x0.real.ravel(), x0.imag.ravel()])
    res = minimize(fun, p0, jac=True, method="L-BFGS-B", options={"maxiter": 3000, "ftol": 1e-16, "gtol": 1e-14})
    x = unpack(res.x)
    return x @ x.conj().T / np.vdot(x, x).real


def _smoothed(w, eps):
    def obj(rho):
        z = diagonal_terms(rho, w)
        return float(np.sqrt(np.abs(z) ** 2 + eps ** 2).sum()), _hermitian_gradient(rho, w, eps)
    return obj


def _squared(w):
    def obj(rho):
        z = diagonal_terms(rho, w)
        b = w * z.conj()[None, :]
        return float((np.abs(z) ** 2).sum()), (b + b.conj().T)
    return obj


def _polish(w, rho, rng):
    candidates = [rho]
    cur = rho
    for eps in (1e-3, 1e-5, 1e-7, SMOOTHING):
        cur = _burer_monteiro(w, _factor(cur, rng), _smoothed(w, eps))
        candidates.append(cur)
    if diagonal_overlap(cur, w) < 1e-3:
        candidates.append(_burer_monteiro(w, _factor(cur, rng), _squared(w)))
    return min(candidates, key=lambda r: diagonal_overlap(r, w))


def minimize_diagonal_overlap(w: np.ndarray, opts: SolverOptions | None = None,
                              extra_starts=()) -> OverlapSolution:
    """Projected subgradient descent from several starts, then optional polish.

    Starts are the maximally mixed state, any ``extra_starts`` and seeded
    random mixed states.  The subgradient step is ``step/sqrt(k)`` along the
    normalised smoothed gradient; the best iterate over all starts is then
    refined by L-BFGS on the factorisation ``rho = X X^dagger / tr``, with the
    absolute values smoothed at decreasing widths.  ``lower_bound`` is a dual
    certificate, so ``value - lower_bound`` bounds the true error.
    """
    opts = opts or SolverOptions()
    w = np.asarray(w, dtype=complex)
    n = w.shape[0]
    rng = np.random.default_rng(opts.seed)
    starts = [np.eye(n) / n] + [np.asarray(s, dtype=complex) for s in extra_starts]
    while len(starts) < opts.starts:
        g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        r = g @ g.conj().T
        starts.append(r / np.trace(r).real)
    best, best_val = None, np.inf
    for s in starts:
        rho, val = _subgradient(w, s, opts)
        if val < best_val:
            best, best_val = rho, val
    sub_val = best_val
    if opts.polish:
        best = _polish(w, best, rng)
        best = project_density(best)
        best_val = diagonal_overlap(best, w)
    lb = max(dual_bound(best, w), 0.0)
    return OverlapSolution(rho=best, value=best_val, lower_bound=lb,
                           subgradient_value=sub_val, converged=best_val - lb <= opts.gap_tol)
