"""Eigenvalue-arc geometry of unitaries and its minimisation over diagonal phases.

``theta(U)`` is the angle of the shortest arc of the unit circle holding every
eigenvalue of ``U``; ``nu(U)`` is the distance from the origin to their convex
hull (the numerical range of a normal matrix); ``upsilon(U)`` minimises the
arc angle of ``U @ E`` over diagonal unitaries ``E``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .errors import DimensionTooLarge
from .qmat import CLUSTER_TOL, Projector, Unitary, eig_unitary

log = logging.getLogger(__name__)

TWO_PI = 2 * np.pi
GAP_TIE_TOL = 1e-12
DIAGONAL_TOL = 1e-10
_SCAN = 32
_SCREEN_TOL = 1e-4
_SCREEN_SWEEPS = 10
_PRE_POLISH_TOL = 1e-7
_REFINE = 3


@dataclass(frozen=True)
class ArcResult:
    theta: float
    start_phase: float
    eigenphases: np.ndarray


@dataclass(frozen=True)
class OptimizerOptions:
    starts: int = 16
    max_sweeps: int = 500
    tol: float = 1e-10
    seed: int = 0
    polish: bool = True


@dataclass(frozen=True)
class UpsilonResult:
    upsilon: float
    e0: Unitary
    extreme_low: tuple[float, Projector]
    extreme_high: tuple[float, Projector]
    optimal_unitary: np.ndarray
    optimizer_trace: list = field(default_factory=list)
    converged: bool = True

    @property
    def phases(self) -> np.ndarray:
        return np.angle(np.diag(self.e0.matrix))

    @property
    def warning(self) -> bool:
        return not self.converged


def _largest_gap(phases: np.ndarray) -> tuple[float, int]:
    """Largest circular gap of sorted ``phases`` and the index the arc starts at."""
    n = len(phases)
    if n == 1:
        return TWO_PI, 0
    gaps = np.empty(n)
    gaps[0] = phases[0] + TWO_PI - phases[-1]
    gaps[1:] = np.diff(phases)
    # gaps[k] precedes phases[k]; ties resolved towards the smallest start phase
    best = gaps.max()
    k = int(np.flatnonzero(gaps >= best - GAP_TIE_TOL)[0])
    return float(gaps[k]), k


def arc_of_phases(phases) -> ArcResult:
    phases = np.sort(np.mod(np.asarray(phases, dtype=float), TWO_PI))
    gap, k = _largest_gap(phases)
    return ArcResult(theta=max(TWO_PI - gap, 0.0), start_phase=float(phases[k]), eigenphases=phases)


def _theta_eigvals(lam: np.ndarray) -> np.ndarray:
    """Arc angle for eigenvalue arrays of shape ``(..., d)``."""
    ph = np.sort(np.mod(np.angle(lam), TWO_PI), axis=-1)
    if ph.shape[-1] == 1:
        return np.zeros(ph.shape[:-1])
    gaps = np.diff(ph, axis=-1)
    wrap = ph[..., 0] + TWO_PI - ph[..., -1]
    return np.maximum(TWO_PI - np.maximum(gaps.max(axis=-1), wrap), 0.0)


def theta(u: Unitary) -> ArcResult:
    return arc_of_phases(eig_unitary(u).phases)


def _segment_distance(p: complex, q: complex) -> float:
    d = q - p
    dd = abs(d) ** 2
    if dd == 0:
        return abs(p)
    t = min(max(-(p.conjugate() * d).real / dd, 0.0), 1.0)
    return abs(p + t * d)


def nu(u: Unitary) -> float:
    """Distance from 0 to the convex hull of the eigenvalues of ``u``."""
    phases = eig_unitary(u).phases
    gap, _ = _largest_gap(phases)
    if gap <= np.pi:
        return 0.0
    lam = np.exp(1j * phases)
    best = 1.0
    for i in range(len(lam)):
        for j in range(i + 1, len(lam)):
            best = min(best, _segment_distance(lam[i], lam[j]))
    return float(best)


def is_diagonal(m: np.ndarray, tol: float = DIAGONAL_TOL) -> bool:
    off = m - np.diag(np.diag(m))
    return bool(np.abs(off).max() <= tol) if m.size else True


class _ArcObjective:
    """Arc angle of ``U diag(exp(i phi))``, with ``phi[0]`` pinned to zero."""

    def __init__(self, m: np.ndarray):
        self.m = m
        self.evals = 0

    def __call__(self, phi: np.ndarray) -> float:
        self.evals += 1
        return float(_theta_eigvals(np.linalg.eigvals(self.m * np.exp(1j * phi)[None, :])))

    def batch(self, phis: np.ndarray) -> np.ndarray:
        self.evals += len(phis)
        w = self.m[None, :, :] * np.exp(1j * phis)[:, None, :]
        return _theta_eigvals(np.linalg.eigvals(w))

    def gradient(self, phi: np.ndarray) -> np.ndarray:
        # d(alpha_k)/d(phi_j) = |v_k[j]|^2 for a simple eigenvalue of a normal matrix
        es = eig_unitary(self.m * np.exp(1j * phi)[None, :])
        _, k = _largest_gap(es.phases)
        lo, hi = k, (k - 1) % len(es.phases)
        g = np.abs(es.vectors[:, hi]) ** 2 - np.abs(es.vectors[:, lo]) ** 2
        g[0] = 0.0
        return g


def _line_min(f: _ArcObjective, phi: np.ndarray, j: int, scan: int) -> tuple[np.ndarray, float]:
    grid = phi[j] + TWO_PI * np.arange(scan) / scan
    trial = np.repeat(phi[None, :], scan, axis=0)
    trial[:, j] = grid
    vals = f.batch(trial)
    k = int(np.argmin(vals))
    h = TWO_PI / scan

    def g(t):
        p = phi.copy()
        p[j] = t
        return f(p)

    res = minimize_scalar(g, bounds=(grid[k] - h, grid[k] + h), method="bounded", options={"xatol": 1e-12})
    best = phi.copy()
    if res.fun < vals[k]:
        best[j], val = res.x, float(res.fun)
    else:
        best[j], val = grid[k], float(vals[k])
    return best, val


def _descend(f: _ArcObjective, phi: np.ndarray, tol: float, max_sweeps: int, trace: list):
    d = len(phi)
    val = f(phi)
    if not trace:
        trace.append((0, val))
    for _ in range(max_sweeps):
        before = val
        for j in range(1, d):
            cand, cval = _line_min(f, phi, j, _SCAN)
            if cval < val:
                phi, val = cand, cval
        trace.append((len(trace), val))
        if before - val < tol:
            return phi, val, True
    return phi, val, False


def _polish(f: _ArcObjective, phi: np.ndarray, val: float, trace: list):
    if len(phi) < 2 or val <= 0:
        return phi, val
    res = minimize(lambda p: f(np.concatenate([[0.0], p])), phi[1:],
                   jac=lambda p: f.gradient(np.concatenate([[0.0], p]))[1:],
                   method="BFGS", options={"gtol": 1e-13, "maxiter": 200})
    if res.fun < val:
        phi, val = np.concatenate([[0.0], res.x]), float(res.fun)
        trace.append((len(trace), val))
    return phi, val


def extreme_eigenspaces(w: np.ndarray, tol: float = CLUSTER_TOL):
    """Lowest and highest eigenphase clusters bounding the shortest arc of ``w``."""
    es = eig_unitary(w)
    groups = es.clusters(tol)
    reps = np.array([es.phases[g[0]] for g in groups])
    if len(groups) == 1:
        p = Projector(es.projector(groups[0]))
        return (float(reps[0]), p), (float(reps[0]), p)
    # work on cluster representatives so intra-cluster spread never opens a gap
    _, k = _largest_gap(reps)
    lo, hi = groups[k], groups[(k - 1) % len(groups)]
    return (float(es.phases[lo[0]]), Projector(es.projector(lo))), (float(es.phases[hi[-1]]), Projector(es.projector(hi)))


def upsilon(u: Unitary, opts: OptimizerOptions | None = None) -> UpsilonResult:
    """Minimise ``theta(U E)`` over diagonal unitaries ``E``.

    Coordinate descent on the free phases (the first is fixed to remove the
    global-phase direction): every one-dimensional subproblem is a coarse scan
    of the circle refined by bounded Brent search.  All starts (``E = 1`` plus
    ``opts.starts`` seeded random phase vectors) are screened at a loose
    tolerance; the three best are refined with a BFGS polish (analytic
    eigenphase gradient) followed by sweeps until a full sweep gains less
    than ``opts.tol``.  Ties go to the lowest start index.
    """
    opts = opts or OptimizerOptions()
    m = np.asarray(u.matrix)
    d = m.shape[0]
    if is_diagonal(m):
        ph = -np.angle(np.diag(m))
        phi = ph - ph[0]
        converged, trace = True, [(0, 0.0)]
        val = 0.0
    else:
        f = _ArcObjective(m)
        rng = np.random.default_rng(opts.seed)
        starts = [np.zeros(d)] + [np.concatenate([[0.0], rng.uniform(0, TWO_PI, d - 1)]) for _ in range(opts.starts)]
        runs = []
        for p0 in starts:
            trace: list = []
            phi_i, val_i, _ = _descend(f, p0, max(opts.tol, _SCREEN_TOL), min(opts.max_sweeps, _SCREEN_SWEEPS), trace)
            runs.append((val_i, phi_i, trace))
        # stable sort keeps the lowest start index on ties
        order = sorted(range(len(runs)), key=lambda i: runs[i][0])
        best = None
        for i in order[:_REFINE]:
            val_i, phi_i, trace = runs[i]
            if opts.polish:
                phi_i, val_i, _ = _descend(f, phi_i, max(opts.tol, _PRE_POLISH_TOL), opts.max_sweeps, trace)
                phi_i, val_i = _polish(f, phi_i, val_i, trace)
            phi_i, val_i, conv_i = _descend(f, phi_i, opts.tol, opts.max_sweeps, trace)
            if best is None or val_i < best[1] - 1e-15:
                best = (phi_i, val_i, trace, conv_i)
        phi, val, trace, converged = best
        if not converged:
            log.warning("upsilon: sweep cap reached without meeting tol=%g", opts.tol)
    e0 = Unitary(np.diag(np.exp(1j * np.mod(phi, TWO_PI))))
    w = m * np.diag(e0.matrix)[None, :]
    low, high = extreme_eigenspaces(w)
    val = float(theta(Unitary(w)).theta) if val > 0 else 0.0
    return UpsilonResult(upsilon=val, e0=e0, extreme_low=low, extreme_high=high,
                         optimal_unitary=w, optimizer_trace=trace, converged=converged)


def upsilon_grid_oracle(u: Unitary, resolution: int, chunk: int = 20000) -> float:
    """Brute-force minimum of ``theta(U E)`` over a uniform phase grid (``d <= 4``)."""
    m = np.asarray(u.matrix)
    d = m.shape[0]
    if d > 4:
        raise DimensionTooLarge(f"grid oracle supports d <= 4, got {d}")
    if d == 1:
        return 0.0
    f = _ArcObjective(m)
    total = resolution ** (d - 1)
    best = np.inf
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        coords = np.stack(np.unravel_index(idx, [resolution] * (d - 1)), axis=-1)
        phis = np.zeros((len(idx), d))
        phis[:, 1:] = coords * (TWO_PI / resolution)
        best = min(best, float(f.batch(phis).min()))
    return best
