import json
import math

import numpy as np
import pytest

from measdisc.discrimination import (UNBOUNDED, DiscriminatorState, direct_diamond_oracle,
                                     discrimination_report, discriminator_state,
                                     equal_diagonal_pair, helstrom_probability,
                                     is_perfectly_distinguishable, measurement_diamond_distance,
                                     multishot_distance, queries_for_perfect,
                                     unitary_diamond_distance, verify_discriminator)
from measdisc.errors import BadN, DimensionMismatch, OutOfRange, SaddleInfeasible
from measdisc.io import dumps
from measdisc.qmat import Unitary, haar_unitary, named_family, random_diagonal_unitary
from measdisc.spectral import upsilon

H = named_family("hadamard")
X = named_family("permutation", 2, [2, 1])
I2 = named_family("identity", 2)


def test_unitary_distance_examples():
    assert unitary_diamond_distance(I2) < 1e-12
    assert abs(unitary_diamond_distance(X) - 2) < 1e-12
    assert abs(unitary_diamond_distance(Unitary(np.diag([1, 1j]))) - math.sqrt(2)) < 1e-12


def test_measurement_distance_examples():
    assert measurement_diamond_distance(Unitary(np.diag([1j, -1, 1]))) == 0.0
    assert abs(measurement_diamond_distance(H) - math.sqrt(2)) < 1e-6
    assert measurement_diamond_distance(X) == 2.0


def test_multishot_examples():
    assert abs(multishot_distance(H, 1) - math.sqrt(2)) < 1e-6
    assert multishot_distance(H, 2) == 2.0
    for n in (1, 3, 7):
        assert multishot_distance(I2, n) == 0.0
    with pytest.raises(BadN):
        multishot_distance(H, 0)


def test_queries_examples():
    assert queries_for_perfect(H) == 2
    assert queries_for_perfect(named_family("rotation", 2, [math.pi / 5])) == 3
    assert queries_for_perfect(named_family("diag_phases", 3, [0.1, 0.2, 0.3])) is UNBOUNDED
    assert queries_for_perfect(X) == 1


def test_helstrom_examples():
    assert helstrom_probability(0) == 0.5
    assert helstrom_probability(2) == 1.0
    assert abs(helstrom_probability(math.sqrt(2)) - (0.5 + math.sqrt(2) / 4)) < 1e-15
    with pytest.raises(OutOfRange):
        helstrom_probability(2.5)
    with pytest.raises(OutOfRange):
        helstrom_probability(-0.1)


def test_perfectly_distinguishable_examples():
    assert not is_perfectly_distinguishable(H, 1)
    assert is_perfectly_distinguishable(H, 2)
    assert not is_perfectly_distinguishable(I2, 10)


def test_monotone_and_saturation():
    rng = np.random.default_rng(5)
    for k in range(8):
        d = int(rng.integers(2, 5))
        u = haar_unitary(d, 400 + k)
        ups = upsilon(u)
        q = queries_for_perfect(u, ups)
        vals = [multishot_distance(u, n, ups) for n in range(1, 7)]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
        for n, v in enumerate(vals, start=1):
            assert (v == 2.0) == (n >= q)


def test_measurement_below_unitary():
    for s in range(10):
        u = haar_unitary(2 + s % 3, 500 + s)
        assert measurement_diamond_distance(u) <= unitary_diamond_distance(u) + 1e-9


def test_phase_invariance():
    for s in range(5):
        u = haar_unitary(3, 600 + s)
        e = random_diagonal_unitary(3, s).matrix
        a = measurement_diamond_distance(u)
        b = measurement_diamond_distance(Unitary(u.matrix @ e))
        assert abs(a - b) < 1e-8


def test_oracle_agreement():
    # 50 random unitaries, d in {2, 3}, tolerance 5e-3
    for s in range(50):
        d = 2 + s % 2
        u = haar_unitary(d, 700 + s)
        gap = abs(measurement_diamond_distance(u) - direct_diamond_oracle(u, "measurement_channel", 1))
        assert gap <= 5e-3


def test_oracle_examples():
    assert direct_diamond_oracle(I2, "unitary_channel", 1) < 1e-9
    assert abs(direct_diamond_oracle(H) - math.sqrt(2)) < 1e-3
    assert abs(direct_diamond_oracle(X) - 2) < 1e-3
    # unitary channel distance matches the numerical-range formula
    u = haar_unitary(2, 3)
    assert abs(direct_diamond_oracle(u, "unitary_channel") - unitary_diamond_distance(u)) < 5e-3
    assert abs(direct_diamond_oracle(H, shots=2) - 2) < 1e-3


def test_hadamard_two_shot_witness():
    s = discriminator_state(H, 2)
    assert s.case == "perfect"
    assert np.allclose(s.weights, (0.5, 0.0, 0.5), atol=1e-12)
    v = verify_discriminator(H, 2, s)
    assert v.passed and v.residual <= 1e-7


def test_maximally_mixed_rejected():
    v = verify_discriminator(H, 2, np.eye(4) / 4)
    assert v.residual > 1e-3 and not v.passed


def test_imperfect_rotation():
    u = named_family("rotation", 2, [math.pi / 6])
    s = discriminator_state(u, 1)
    assert s.case == "imperfect"
    assert s.rank == 2
    ups = upsilon(u)
    w = ups.optimal_unitary
    assert abs(abs(np.trace(s.state.matrix @ w)) - math.cos(math.pi / 6)) < 1e-7
    assert verify_discriminator(u, 1, s).residual <= 1e-6


def test_identity_infeasible():
    with pytest.raises(SaddleInfeasible):
        discriminator_state(I2, 1)


def test_witness_whenever_perfect():
    for s in range(10):
        d = 2 + s % 3
        u = haar_unitary(d, 800 + s)
        ups = upsilon(u)
        for n in range(1, 5):
            if d ** n > 64:
                break
            if is_perfectly_distinguishable(u, n, ups):
                st = discriminator_state(u, n, ups)
                assert verify_discriminator(u, n, st, ups).residual <= 1e-7


def test_single_shot_perfect_cases():
    for u in (X, named_family("fourier", 4), named_family("permutation", 3, [2, 3, 1])):
        st = discriminator_state(u, 1)
        assert st.case == "perfect"
        assert verify_discriminator(u, 1, st).residual <= 1e-7


def test_reconstruct_matches_state():
    for u, n in ((H, 2), (H, 3), (named_family("rotation", 2, [0.4]), 2),
                 (named_family("rotation", 2, [0.4]), 5)):
        st = discriminator_state(u, n)
        assert isinstance(st, DiscriminatorState)
        assert np.abs(st.reconstruct() - st.state.matrix).max() < 1e-10


def test_verify_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        verify_discriminator(H, 2, np.eye(2) / 2)


def test_equal_diagonal_pair():
    u = haar_unitary(3, 21)
    ups = upsilon(u)
    r1, rd = equal_diagonal_pair(ups.extreme_low[1].matrix, ups.extreme_high[1].matrix)
    assert np.abs(np.diag(r1) - np.diag(rd)).max() < 1e-8
    for r in (r1, rd):
        assert abs(np.trace(r) - 1) < 1e-10
        assert np.linalg.eigvalsh(r).min() > -1e-10


def test_report_json_fields():
    rep = discrimination_report(H, shots=2)
    obj = json.loads(dumps(rep))
    assert list(obj) == ["unitary_distance", "measurement_distance", "helstrom_probability",
                         "upsilon", "queries_for_perfect", "shots", "multishot_distance", "uncertain"]
    assert obj["multishot_distance"] == 2.0 and obj["queries_for_perfect"] == 2
    assert discrimination_report(I2).to_dict()["queries_for_perfect"] == "unbounded"


def test_multishot_against_tensor_oracle():
    u = named_family("rotation", 2, [0.3])
    assert abs(direct_diamond_oracle(u, shots=2) - multishot_distance(u, 2)) < 5e-3
