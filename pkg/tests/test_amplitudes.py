import numpy as np
import pytest

from litresponse.chebyshev import compute_moments
from litresponse.fci import diagonalize
from litresponse.fockbasis import StateVector
from litresponse.lorentz import LorentzCurve, li_curve, required_K_max
from litresponse.protocols import fit_bound_amplitudes
from litresponse.protocols.amplitudes import _segments


def test_single_pole_exact():
    E, R, sI = -4.2, 0.37, 0.08
    grid = E + np.linspace(-0.5, 0.5, 101)
    curve = LorentzCurve.build(grid, sI, 0.0, R / ((grid - E) ** 2 + sI ** 2))
    fit = fit_bound_amplitudes(curve, [E])
    L_at = curve.L[np.argmin(np.abs(grid - E))]
    assert fit.amplitudes[0] == pytest.approx(L_at * sI ** 2, rel=1e-10)
    assert fit.residual <= 1e-12


def test_fixture_amplitudes(pipeline_result, bound_ref):
    _, R_ref = bound_ref
    rel = np.abs(pipeline_result.peak_fit.amplitudes - R_ref) / R_ref
    assert np.max(rel) <= 0.01


def test_orthogonal_state_has_no_strength(sd, pipeline_result):
    _, H, space, omega = sd
    d = diagonalize(H, space)
    ground = np.abs(d.energies - d.energies[0]) < 1e-7
    V = d.vectors[:, ground]
    amps = omega.amplitudes - V @ (V.conj().T @ omega.amplitudes)
    om = StateVector(space, amps)
    fit0 = pipeline_result.peak_fit
    sI = fit0.sigma_I
    grid = pipeline_result.amp_curve.sigma_R
    ms = compute_moments(H, space, om, required_K_max(grid, sI, 0.0, pipeline_result.moments.rescaling),
                         pipeline_result.moments.rescaling)
    fit = fit_bound_amplitudes(li_curve(ms, grid, sI), fit0.energies, threshold=pipeline_result.E0_Am1)
    assert fit.amplitudes[0] <= 1e-8
    assert np.all(fit.amplitudes[1:] > 1e-2)


def test_requires_single_sigma_and_zero_shift():
    grid = np.linspace(-1, 1, 30)
    with pytest.raises(ValueError):
        fit_bound_amplitudes(LorentzCurve.build(grid, np.linspace(0.1, 0.2, 30), 0.0, np.ones(30)), [0.0])
    with pytest.raises(ValueError):
        fit_bound_amplitudes(LorentzCurve.build(grid, 0.1, 1.0, np.ones(30)), [0.0])


def test_segments_merge():
    grid = np.linspace(0, 10, 101)
    label, n = _segments(grid, [2.0, 2.5, 8.0], 0.5)
    assert n == 2
    assert label[20] == label[25] == 0 and label[80] == 1 and label[50] == -1
