import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from litresponse.chebyshev import MomentError, compute_moments
from litresponse.fci import diagonalize, exact_lorentz, exact_response
from litresponse.fockbasis import StateVector
from litresponse.lorentz import (
    LorentzCurve,
    NegativeContinuumError,
    _bilinear,
    _truncated_coeffs,
    continuum_part,
    discrete_part,
    li_curve,
    li_direct_solve,
    li_from_moments,
    li_moment_weights,
    pair_weights,
    required_K_max,
)
from litresponse.chebyshev import sigma_prime


@pytest.fixture(scope="module")
def fx(sd):
    _, H, space, omega = sd
    d = diagonalize(H, space)
    ms = compute_moments(H, space, omega, 6000)
    return H, space, omega, d, ms


def test_fci_agreement_sigma_8(fx):
    H, space, omega, d, ms = fx
    sR = np.linspace(0, 40, 81)
    x = d.energies[0]
    L = li_from_moments(ms, sR, 8.0, x)
    ref = exact_lorentz(d, omega, sR, 8.0, x)
    assert np.max(np.abs(L - ref) / ref) <= 1e-8


def test_doubling_K_converged(fx):
    *_, ms = fx
    sR = np.linspace(-20, 10, 31)
    K = required_K_max(sR, 2.0, 0.0, ms.rescaling) // 2 + 1
    a = li_from_moments(ms, sR, 2.0, K=K)
    b = li_from_moments(ms, sR, 2.0, K=2 * K)
    assert np.max(np.abs(a - b) / b) <= 1e-10


def test_missing_moments(fx):
    *_, ms = fx
    with pytest.raises(MomentError):
        li_from_moments(ms.truncated(10), -12.0, 0.05)


def test_direct_solve_large_sigma(fx):
    H, space, omega, d, _ = fx
    spread = np.ptp(d.energies)
    sI = 1e3 * spread
    L = li_direct_solve(H, space, omega, 0.0, sI)
    assert L == pytest.approx(omega.norm2() / sI ** 2, rel=10 * (spread / sI) ** 2 + 1e-3 * (40 / sI))


def test_direct_solve_zero_source(fx):
    H, space, *_ = fx
    assert li_direct_solve(H, space, StateVector.zeros(space), 1.0, 2.0) == 0.0


@settings(max_examples=25, deadline=None)
@given(st.floats(-40, 20), st.floats(0.5, 14), st.floats(-20, 20))
def test_shift_invariance_and_positivity(fx, sR, sI, x):
    *_, ms = fx
    a = li_from_moments(ms, sR, sI, 0.0)
    b = li_from_moments(ms, sR - x, sI, x)
    assert a > 0
    assert b == pytest.approx(a, rel=1e-12)


def test_pair_weights_match_direct_bilinear(fx):
    *_, ms = fx
    rng = np.random.default_rng(0)
    sR, sI = rng.uniform(-30, 10, 20), rng.uniform(0.3, 5, 20)
    Ks = rng.integers(8, 200, 20)
    F = _truncated_coeffs(sigma_prime(sR, sI, 0.0, ms.rescaling), Ks)
    mu = ms.moments.real
    W = pair_weights(F)
    ref = _bilinear(mu[: 2 * F.shape[1] - 1], F)
    assert np.max(np.abs(W @ mu[: W.shape[1]] - ref) / np.abs(ref)) <= 1e-12


def test_weights_are_gradient(fx):
    *_, ms = fx
    sR = np.array([-12.0, -5.0])
    L, Ks = li_from_moments(ms, sR, 1.0, return_K=True)
    G = li_moment_weights(sR, 1.0, 0.0, ms.rescaling, Ks)
    assert np.allclose(G @ ms.moments.real[: G.shape[1]], L, rtol=1e-12)


def test_discrete_part_simple():
    assert discrete_part([], [], 0.0, 2.0) == 0.0
    assert discrete_part([0.0], [1.0], 0.0, 2.0) == pytest.approx(0.25)


def test_discrete_matches_moments_below_threshold(fx, bound_ref):
    H, space, omega, d, _ = fx
    # a source made of bound eigenstates only has no continuum part
    E_b, _ = bound_ref
    bound = d.energies <= E_b[-1] + 1e-9
    amps = d.vectors[:, bound] @ (d.vectors[:, bound].conj().T @ omega.amplitudes)
    om_b = StateVector(space, amps)
    sR = np.linspace(d.energies[0] - 2.0, E_b[-1] + 0.5, 60)
    ms = compute_moments(H, space, om_b, required_K_max(sR, 0.5, 0.0, _resc(H, space)), _resc(H, space))
    resp = exact_response(d, om_b)
    L = li_from_moments(ms, sR, 0.5)
    LD = discrete_part(E_b, _multiplet_sums(resp, E_b), sR, 0.5)
    assert np.max(np.abs(L - LD) / L) <= 1e-6


def _resc(H, space):
    from litresponse.hamiltonian import compute_rescaling

    return compute_rescaling(H, space)


def _multiplet_sums(resp, E_levels):
    return np.array([resp.amplitudes[np.abs(resp.energies - e) < 1e-7].sum() for e in E_levels])


def test_continuum_part_cases(fx, bound_ref):
    H, space, omega, d, ms = fx
    sR = np.linspace(0, 40, 41)
    curve = li_curve(ms, sR, 8.0, d.energies[0])
    assert np.array_equal(continuum_part(curve, [], []).L, curve.L)
    resp = exact_response(d, omega)
    pure = curve.with_L(discrete_part(resp.energies, resp.amplitudes, sR, 8.0, d.energies[0]))
    assert np.max(continuum_part(pure, resp.energies, resp.amplitudes).L) <= 1e-12
    E, R = bound_ref
    LC = continuum_part(curve, E, R)
    above = resp.energies > E[-1] + 1e-9
    expect = discrete_part(resp.energies[above], resp.amplitudes[above], sR, 8.0, d.energies[0])
    assert np.allclose(LC.L, expect, rtol=1e-8)
    with pytest.raises(NegativeContinuumError):
        continuum_part(curve, E, 10 * R)


def test_curve_csv_roundtrip(fx, tmp_path):
    *_, ms = fx
    c = li_curve(ms, [1.0, 0.0, 2.0], 5.0, -3.0)
    assert list(c.sigma_R) == [0.0, 1.0, 2.0]
    c.to_csv(tmp_path / "c.csv")
    back = LorentzCurve.from_csv(tmp_path / "c.csv")
    assert np.allclose(back.L, c.L, rtol=1e-11)
    assert np.array_equal(back.K_used, c.K_used)
