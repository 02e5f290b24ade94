import math

import numpy as np
import pytest

from measdisc.adaptive import (AdaptiveNetwork, SearchOptions, adaptive_search, adaptive_value,
                               build_adaptive_matrix, lifted_unambiguous_input, load_network,
                               parallel_input, parallel_margin, purify, save_network,
                               sequential_channel_apply, unambiguous_adaptive_bound)
from measdisc.discrimination import multishot_distance
from measdisc.errors import DimensionMismatch, DimensionTooLarge, NotPure, ValidationError
from measdisc.qmat import haar_unitary, kron, named_family, unitarity_residual
from measdisc.unambiguous import (parallel_unitary, unambiguous_entassisted_closed,
                                  unambiguous_parallel)

from conftest import random_density, random_pure

H = named_family("hadamard")
I2 = named_family("identity", 2)


def test_trivial_matrix():
    u = haar_unitary(2, 1)
    a = build_adaptive_matrix(u, AdaptiveNetwork.trivial(2, 2))
    assert np.abs(a - kron(u, u, np.eye(2))).max() < 1e-14
    a1 = build_adaptive_matrix(u, AdaptiveNetwork.trivial(2, 1))
    assert np.abs(a1 - kron(u, np.eye(2))).max() < 1e-14


def test_random_network_unitary():
    net = AdaptiveNetwork.random(2, 2, 3)
    a = build_adaptive_matrix(haar_unitary(2, 2), net)
    assert unitarity_residual(a) <= 1e-9
    net3 = AdaptiveNetwork.random(2, 3, 4)
    assert unitarity_residual(build_adaptive_matrix(H, net3)) <= 1e-9


def test_network_validation():
    with pytest.raises(DimensionTooLarge):
        AdaptiveNetwork(4, 4)
    with pytest.raises(DimensionMismatch):
        AdaptiveNetwork(2, 2, controls={(1,): np.eye(2)})
    with pytest.raises(ValidationError):
        AdaptiveNetwork(2, 2, controls={(3,): np.eye(4)})
    with pytest.raises(ValidationError):
        AdaptiveNetwork(2, 2, controls={(1,): 2 * np.eye(4)})


def test_sequential_apply_examples(rng):
    rho = np.diag([0.1, 0.2, 0.3, 0.4]).astype(complex)
    assert np.allclose(sequential_channel_apply(np.eye(4), rho, 1, 2), rho)
    g = random_density(4, rng)
    out = sequential_channel_apply(np.eye(4), g, 2, 2)
    assert np.allclose(out, np.diag(np.diag(g)))
    # only the label register is dephased
    out1 = sequential_channel_apply(np.eye(4), g, 1, 2)
    assert np.allclose(out1[:2, :2], g[:2, :2]) and np.allclose(out1[:2, 2:], 0)


def test_trace_preserved(rng):
    net = AdaptiveNetwork.random(2, 2, 8)
    a = build_adaptive_matrix(haar_unitary(2, 8), net)
    for _ in range(5):
        r = random_density(8, rng)
        assert abs(np.trace(sequential_channel_apply(a, r, 2, 2)) - 1) < 1e-12


def test_dephasing_contractive(rng):
    for _ in range(20):
        g = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        x = g + g.conj().T
        out = sequential_channel_apply(np.eye(8), x, 2, 2)
        norm = lambda m: np.abs(np.linalg.eigvalsh(m)).sum()
        assert norm(out) <= norm(x) + 1e-10


def test_adaptive_value_examples(rng):
    net = AdaptiveNetwork.random(2, 2, 1)
    r = random_density(8, rng)
    assert adaptive_value(I2, net, r) < 1e-12
    triv = AdaptiveNetwork.trivial(2, 2)
    assert abs(adaptive_value(H, triv, parallel_input(H, 2)) - 2) < 1e-7
    assert adaptive_value(H, net, r) <= 2 + 1e-9


def test_adaptive_bounds_random_ensemble(rng):
    # 20 nets x 10 inputs x random qubit U at N = 2
    for k in range(20):
        u = haar_unitary(2, 2000 + k)
        bound = multishot_distance(u, 2)
        par = unambiguous_entassisted_closed(parallel_unitary(u, 2))
        net = AdaptiveNetwork.random(2, 2, 3000 + k)
        for _ in range(10):
            rho = random_pure(8, rng)
            assert adaptive_value(u, net, rho) <= bound + 1e-8
            assert unambiguous_adaptive_bound(u, 2, net, rho) <= par + 1e-6
            assert parallel_margin(u, 2, net, rho) >= -1e-8


def test_search_examples():
    v, net, rho = adaptive_search(H, 2)
    assert abs(v - 2) < 1e-6
    r = named_family("rotation", 2, [math.pi / 8])
    v, _, _ = adaptive_search(r, 2, SearchOptions(starts=2, rounds=3))
    assert v <= multishot_distance(r, 2) + 1e-6
    v, _, _ = adaptive_search(I2, 2, SearchOptions(starts=1, rounds=2))
    assert abs(v) < 1e-9


def test_lifted_unambiguous_input():
    for u in (H, named_family("rotation", 2, [0.5]), haar_unitary(2, 77)):
        net = AdaptiveNetwork.trivial(2, 2, ancilla_dim=4)
        val = unambiguous_adaptive_bound(u, 2, net, lifted_unambiguous_input(u, 2))
        assert abs(val - unambiguous_parallel(u, 2, True)) < 1e-6
    net = AdaptiveNetwork.random(2, 2, 5)
    rho = random_pure(8, np.random.default_rng(0))
    assert abs(unambiguous_adaptive_bound(I2, 2, net, rho)) < 1e-12


def test_not_pure_rejected():
    net = AdaptiveNetwork.trivial(2, 2)
    with pytest.raises(NotPure):
        unambiguous_adaptive_bound(H, 2, net, np.eye(8) / 8)


def test_purify(rng):
    rho = random_density(4, rng, rank=2)
    psi = purify(rho, 2)
    m = psi.reshape(4, 2)
    assert np.abs(m @ m.conj().T - rho).max() < 1e-12
    with pytest.raises(DimensionMismatch):
        purify(random_density(4, rng), 2)


def test_json_round_trip(tmp_path):
    net = AdaptiveNetwork.random(2, 3, 12)
    path = tmp_path / "net.json"
    save_network(net, path)
    back = load_network(path)
    assert back.dim == 2 and back.shots == 3 and back.ancilla_dim == 2
    assert set(back.controls) == set(net.controls)
    for k, m in net.controls.items():
        assert np.array_equal(back.controls[k], m)
