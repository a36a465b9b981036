import numpy as np
import pytest

from litresponse.blockenc import (
    ContractViolation,
    ShotNoiseModel,
    build_dilation,
    dilation_from_matrix,
    hadamard_sample,
    noisy_moments,
    walk_moments,
    walk_operator,
)
from litresponse.chebyshev import compute_moments
from litresponse.fockbasis import StateVector
from litresponse.hamiltonian import compute_rescaling, rescaled_operator


def test_zero_operator():
    enc = dilation_from_matrix(np.zeros((2, 2)))
    expect = np.block([[np.zeros((2, 2)), np.eye(2)], [np.eye(2), np.zeros((2, 2))]])
    assert np.allclose(enc.unitary, expect)


def test_one_by_one():
    enc = dilation_from_matrix(np.array([[0.5]]))
    s = np.sqrt(0.75)
    assert np.allclose(enc.unitary, [[0.5, s], [s, -0.5]])


def test_norm_above_one_rejected():
    with pytest.raises(ContractViolation):
        dilation_from_matrix(np.array([[1.2]]))


def test_fixture_block_and_contract(sd):
    _, H, space, _ = sd
    resc = compute_rescaling(H, space)
    enc = build_dilation(H, space, resc)
    Hp = rescaled_operator(H, space, resc).toarray()
    assert np.max(np.abs(enc.block() - Hp)) <= 1e-12
    U = enc.unitary
    assert np.max(np.abs(U.T @ U - np.eye(len(U)))) <= 1e-12
    rng = np.random.default_rng(0)
    for g, f in rng.integers(0, space.dim, size=(200, 2)):
        assert enc.element(g, f) == pytest.approx(Hp[g, f], abs=1e-10)


def test_walk_moments(sd):
    _, H, space, omega = sd
    resc = compute_rescaling(H, space)
    enc = build_dilation(H, space, resc)
    walk = walk_moments(walk_operator(enc), omega, 240, resc, check_with=enc.H_prime)
    rec = compute_moments(H, space, omega, 240, resc)
    assert walk.moments[0] == pytest.approx(1.0)
    assert walk.moments[1] == pytest.approx(np.vdot(omega.amplitudes, enc.H_prime @ omega.amplitudes))
    assert np.max(np.abs(walk.moments - rec.moments)) <= 1e-10


def test_walk_dimension_mismatch(sd):
    _, H, space, omega = sd
    resc = compute_rescaling(H, space)
    walk = walk_operator(dilation_from_matrix(np.zeros((3, 3))))
    with pytest.raises(ValueError):
        walk_moments(walk, omega, 3, resc)


def test_hadamard_exact_at_one():
    for N in (1, 10, 1000):
        assert hadamard_sample(1.0, ShotNoiseModel(N, 5)).real == 1.0


def test_hadamard_tail_at_zero():
    est = hadamard_sample(np.zeros(200), ShotNoiseModel(10**6, 11))
    assert np.max(np.abs(est.real)) <= 5e-3


def test_hadamard_deterministic():
    a = hadamard_sample(0.3, ShotNoiseModel(1000, 42))
    b = hadamard_sample(0.3, ShotNoiseModel(1000, 42))
    assert a == b


def test_shot_noise_standard_error():
    N, mu = 10**4, np.linspace(-0.9, 0.9, 7)
    est = np.array([hadamard_sample(mu, ShotNoiseModel(N, s)).real for s in range(100)])
    expect = np.sqrt((1 - mu ** 2) / N)
    assert np.all(np.abs(est.std(axis=0, ddof=1) / expect - 1) <= 0.2)


def test_noisy_moments_keep_mu0(sd):
    _, H, space, omega = sd
    ms = compute_moments(H, space, 2.0 * omega, 30)
    noisy = noisy_moments(ms, ShotNoiseModel(1000, 1))
    assert noisy.moments[0] == ms.moments[0]
    assert noisy.source == "walk+noise" and noisy.meta["shots"] == 1000
    assert not np.array_equal(noisy.moments, ms.moments)


def test_zero_source(sd):
    _, H, space, _ = sd
    ms = compute_moments(H, space, StateVector.zeros(space), 5)
    assert np.all(noisy_moments(ms, ShotNoiseModel(100)).moments == 0)
