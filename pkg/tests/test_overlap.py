import numpy as np

from measdisc.overlap import (SolverOptions, diagonal_overlap, diagonal_terms, dual_bound,
                              minimize_diagonal_overlap)
from measdisc.qmat import haar_unitary, named_family
from measdisc.spectral import upsilon

from conftest import random_density


def test_diagonal_terms(rng):
    w = haar_unitary(3, 1).matrix
    rho = random_density(3, rng)
    assert np.allclose(diagonal_terms(rho, w), np.diag(rho @ w), atol=1e-15)
    assert abs(diagonal_overlap(rho, w) - np.abs(np.diag(rho @ w)).sum()) < 1e-15


def test_identity_and_hadamard():
    r = minimize_diagonal_overlap(np.eye(3))
    assert abs(r.value - 1) < 1e-12
    h = minimize_diagonal_overlap(named_family("hadamard").matrix)
    assert abs(h.value - np.cos(np.pi / 4)) < 1e-9


def test_matches_cos_half_upsilon():
    for s in range(4):
        u = haar_unitary(3, 200 + s)
        y = upsilon(u).upsilon
        target = 0.0 if y >= np.pi else np.cos(y / 2)
        r = minimize_diagonal_overlap(u.matrix)
        assert abs(r.value - target) < 1e-6
        assert r.converged


def test_dual_bound_is_lower(rng):
    for s in range(5):
        w = haar_unitary(3, 300 + s).matrix
        best = minimize_diagonal_overlap(w).value
        rho = random_density(3, rng)
        assert dual_bound(rho, w) <= best + 1e-9
        assert dual_bound(rho, w) <= diagonal_overlap(rho, w) + 1e-12


def test_zero_overlap_case():
    x = named_family("permutation", 2, [2, 1]).matrix
    r = minimize_diagonal_overlap(x)
    assert r.value < 1e-9
    assert r.gap < 1e-6


def test_deterministic():
    w = haar_unitary(4, 7).matrix
    a = minimize_diagonal_overlap(w, SolverOptions(seed=3))
    b = minimize_diagonal_overlap(w, SolverOptions(seed=3))
    assert a.value == b.value and np.array_equal(a.rho, b.rho)


def test_returns_density():
    r = minimize_diagonal_overlap(haar_unitary(3, 9).matrix)
    assert abs(np.trace(r.rho) - 1) < 1e-12
    assert np.linalg.eigvalsh(r.rho).min() > -1e-12
    assert np.abs(r.rho - r.rho.conj().T).max() < 1e-14
