import numpy as np
import pytest

from litresponse.fci import diagonalize, diagonalize_matrix, exact_lorentz, exact_response, lorentz_sum
from litresponse.fockbasis import StateVector, enumerate_configs, sd_basis, shell_basis
from litresponse.hamiltonian import Monomial, SecondQuantizedH
from litresponse.lorentz import li_direct_solve


def test_two_by_two():
    space = enumerate_configs(shell_basis([(0, 0, 1)]), 1)
    d = diagonalize_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]), space)
    assert np.allclose(d.energies, [-1, 1])


def test_number_operator_spectrum():
    basis = sd_basis()
    N = SecondQuantizedH(basis, [Monomial((p,), (p,), 0.7) for p in range(basis.n_sp)])
    d = diagonalize(N, enumerate_configs(basis, 3))
    assert np.allclose(d.energies, 2.1)


def test_regression_spectrum(sd, fci_ref):
    basis, H, space, _ = sd
    d = diagonalize(H, space)
    levels = [(E, g - 1) for E, g in d.multiplets(1e-7)]
    ref = [(lv["E"], lv["two_J"]) for lv in fci_ref["A3_levels"]]
    assert len(levels) == len(ref)
    for (E, tJ), (E_ref, tJ_ref) in zip(levels, ref):
        assert E == pytest.approx(E_ref, abs=1e-10)
        assert tJ == tJ_ref


def test_response_of_eigenstate(sd):
    _, H, space, _ = sd
    d = diagonalize(H, space)
    R = exact_response(d, d.state(0)).amplitudes
    assert R[0] == pytest.approx(1.0)
    assert np.allclose(R[1:], 0, atol=1e-20)
    R = exact_response(d, d.state(5)).amplitudes
    assert R[0] == pytest.approx(0.0, abs=1e-20)


def test_completeness(sd):
    _, H, space, _ = sd
    d = diagonalize(H, space)
    rng = np.random.default_rng(3)
    om = StateVector(space, rng.normal(size=space.dim) + 1j * rng.normal(size=space.dim)).normalized()
    assert exact_response(d, om).amplitudes.sum() == pytest.approx(1.0, abs=1e-10)


def test_single_level_lorentzian():
    assert lorentz_sum([0.0], [1.0], 0.0, 1.0) == pytest.approx(1.0)
    assert lorentz_sum([0.0], [1.0], 1.0, 1.0) == pytest.approx(0.5)


def test_exact_lorentz_equals_dense_solve(sd):
    _, H, space, omega = sd
    d = diagonalize(H, space)
    rng = np.random.default_rng(4)
    sR = rng.uniform(-30, 20, 40)
    sI = rng.uniform(0.5, 14, 40)
    x = -12.0
    L = exact_lorentz(d, omega, sR, sI, x)
    D = li_direct_solve(H, space, omega, sR, sI, x)
    assert np.max(np.abs(L - D) / D) <= 1e-10


def test_sigma_I_must_be_positive():
    with pytest.raises(ValueError):
        lorentz_sum([0.0], [1.0], 0.0, 0.0)
