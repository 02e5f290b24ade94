"""Haar-random studies: two-query perfect discrimination and the law of ``|U_11|^2``.

Samples are drawn in fixed-size blocks, block ``b`` using the ``b``-th child
of ``SeedSequence(seed)``, so results depend only on ``(dim, samples, seed)``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from .errors import BadDim, BadParams
from .qmat import Unitary, haar_unitaries
from .spectral import OptimizerOptions, upsilon

BLOCK = 1000
BINS = 20
FAILURE_TOL = 1e-9
MIN_SAMPLES = 100
KS_ALPHA = 0.01


def _blocks(samples: int, seed: int):
    n_blocks = -(-samples // BLOCK)
    children = np.random.SeedSequence(seed).spawn(n_blocks)
    for b, child in enumerate(children):
        yield min(BLOCK, samples - b * BLOCK), np.random.default_rng(child)


def haar_sample(dim: int, samples: int, seed: int):
    """Iterator over ``(count, dim, dim)`` blocks of Haar unitaries."""
    for count, rng in _blocks(samples, seed):
        yield haar_unitaries(dim, count, rng)


def u11_samples(dim: int, samples: int, seed: int) -> np.ndarray:
    """``|U_11|^2`` for the same unitaries a study with these arguments draws."""
    return np.concatenate([np.abs(b[:, 0, 0]) ** 2 for b in haar_sample(dim, samples, seed)])


def u11_histogram(values: np.ndarray, bins: int = BINS) -> list[tuple[float, float, int]]:
    counts, edges = np.histogram(values, bins=bins, range=(0.0, 1.0))
    return [(float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(bins)]


def wilson_interval(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    ci = stats.binomtest(k, n).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


def two_query_fails(u: np.ndarray, opts: OptimizerOptions | None = None) -> tuple[bool, bool]:
    """``(fails, used_optimizer)`` for the test ``multishot_distance(U, 2) < 2``.

    ``cos(upsilon/2)`` never exceeds ``min_i |U_ii|``, so a diagonal entry with
    ``|U_ii|^2 < 1/2`` forces ``upsilon > pi/2`` and two queries suffice.  Only
    the remaining samples need the phase optimisation.
    """
    if np.min(np.abs(np.diag(u))) ** 2 < 0.5:
        return False, False
    y = upsilon(Unitary(u), opts).upsilon
    return bool(2 * y < math.pi - FAILURE_TOL), True


@dataclass(frozen=True)
class EnsembleStudy:
    dim: int
    samples: int
    seed: int
    failures: int
    empirical_failure_rate: float
    bound: float
    wilson_interval: tuple
    histogram: list
    optimizer_calls: int

    @property
    def consistent(self) -> bool:
        # the interval must not sit entirely above the bound
        return self.wilson_interval[0] <= self.bound

    def to_dict(self) -> dict:
        d = asdict(self)
        d["wilson_interval"] = list(self.wilson_interval)
        d["histogram"] = [list(h) for h in self.histogram]
        d["consistent"] = self.consistent
        return d


def two_query_failure_rate(dim: int, samples: int, seed: int,
                           opts: OptimizerOptions | None = None) -> EnsembleStudy:
    if dim < 2:
        raise BadDim(f"dim must be at least 2, got {dim}")
    if samples < MIN_SAMPLES:
        raise BadParams(f"at least {MIN_SAMPLES} samples required, got {samples}")
    fails = calls = 0
    u11 = []
    for block in haar_sample(dim, samples, seed):
        u11.append(np.abs(block[:, 0, 0]) ** 2)
        for u in block:
            f, used = two_query_fails(u, opts)
            fails += f
            calls += used
    return EnsembleStudy(
        dim=dim, samples=samples, seed=seed, failures=fails,
        empirical_failure_rate=fails / samples, bound=0.5 ** (dim - 1),
        wilson_interval=wilson_interval(fails, samples),
        histogram=u11_histogram(np.concatenate(u11)), optimizer_calls=calls)


@dataclass(frozen=True)
class BetaCheckReport:
    dim: int
    samples: int
    seed: int
    ks_statistic: float
    ks_pvalue: float
    ks_pass: bool
    tail_empirical: float
    tail_expected: float
    tail_sigma: float
    tail_within_3sigma: bool
    insufficient_samples: bool

    def to_dict(self) -> dict:
        return asdict(self)


def u11_cdf(x, dim: int):
    return 1.0 - (1.0 - np.clip(x, 0.0, 1.0)) ** (dim - 1)


def u11_beta_check(dim: int, samples: int, seed: int) -> BetaCheckReport:
    """KS test of ``|U_11|^2`` against the Beta(1, d-1) CDF and the tail ``Pr(>= 1/2)``."""
    if dim < 2:
        raise BadDim(f"dim must be at least 2, got {dim}")
    if samples < 1:
        raise BadParams("samples must be positive")
    x = u11_samples(dim, samples, seed)
    ks = stats.kstest(x, lambda t: u11_cdf(t, dim))
    expected = 0.5 ** (dim - 1)
    tail = float(np.mean(x >= 0.5))
    sigma = math.sqrt(expected * (1 - expected) / samples)
    return BetaCheckReport(
        dim=dim, samples=samples, seed=seed, ks_statistic=float(ks.statistic),
        ks_pvalue=float(ks.pvalue), ks_pass=bool(ks.pvalue >= KS_ALPHA),
        tail_empirical=tail, tail_expected=expected, tail_sigma=sigma,
        tail_within_3sigma=bool(abs(tail - expected) <= 3 * sigma),
        insufficient_samples=samples < MIN_SAMPLES)
