import numpy as np
import pytest

from litresponse.fockbasis import sd_basis
from litresponse.hamiltonian import Monomial, SecondQuantizedH
from litresponse.moments import MomentProvider, problem_rescaling
from litresponse.protocols import BoundState, SpaceFactory, SpectrumResult, default_grid, prescan
from litresponse.protocols.prescan import fit_peaks, lorentzian, parabolic_vertex


def test_diagonal_hamiltonian_levels_and_J():
    basis = sd_basis()
    eps = {5: -3.0, 1: -1.5}  # 0d5/2 and 1s1/2 single-particle energies
    H = SecondQuantizedH(basis, [Monomial((o.index,), (o.index,), eps[o.two_j]) for o in basis.orbitals])
    res = prescan(H, SpaceFactory(basis, 1), 0.05, default_grid(problem_rescaling(H, 1), 0.0, 0.05), 0.02)
    assert [(round(s.energy, 6), s.two_J) for s in res.states] == [(-3.0, 5), (-1.5, 1)]


def test_single_peak_location():
    E, sI = -3.3337, 0.1
    grid = np.arange(-5.0, -2.0, 0.02)
    L = lorentzian(grid, E, 0.7, sI)
    i = int(np.argmax(L))
    (fit,) = fit_peaks(grid, L, sI, [parabolic_vertex(grid, L, i)])
    assert abs(fit.position - E) <= 0.01
    assert fit.amplitude == pytest.approx(0.7, rel=1e-6)


def test_fixture_levels_match_fci(pipeline_result, fci_ref):
    spec = pipeline_result.spectrum
    ref = [lv for lv in fci_ref["A3_levels"] if lv["E"] < fci_ref["E0_A2"]]
    assert len(spec.states) == len(ref)
    for s, lv in zip(spec.states, ref):
        assert abs(s.energy - lv["E"]) <= spec.sigma_I / 10
        assert s.two_J == lv["two_J"]
    assert [g for _, g in spec.levels()] == [lv["two_J"] + 1 for lv in ref]


def test_J_assignment_consistency(pipeline_result):
    spec = pipeline_result.spectrum
    tol = spec.meta["match_tol"]
    for s in spec.states:
        for scan in spec.meta["scans"]:
            if scan["parity"] != s.parity or scan["two_Mj"] > s.two_J:
                continue
            assert any(abs(p[0] - s.energy) <= tol for p in scan["peaks"]), (s, scan["two_Mj"])


def test_threshold_matches_fci(pipeline_result, fci_ref):
    assert abs(pipeline_result.E0 - fci_ref["E0_A3"]) <= 1e-3
    assert abs(pipeline_result.E0_Am1 - fci_ref["E0_A2"]) <= 1e-3
    assert abs(pipeline_result.e_th - fci_ref["e_th"]) <= 1e-3


def test_grid_refinement_is_stable(sd):
    basis, H, _, _ = sd
    provider = MomentProvider(H, problem_rescaling(H, 3))
    sI = 0.1
    shifts = []
    for step in (sI / 2, sI / 4):
        grid = default_grid(provider.rescaling, -7.8, sI, step)
        res = prescan(H, SpaceFactory(basis, 3), sI, grid, 0.02, provider, two_Mj_values=[9])
        shifts.append((step, res.energies))
    (s0, E0), (_, E1) = shifts
    assert len(E0) == len(E1) > 0
    assert np.max(np.abs(E0 - E1)) <= s0


def test_spectrum_json_roundtrip(tmp_path):
    res = SpectrumResult([BoundState(-2.0, 1, -1, 1e-3), BoundState(-3.0, 5, 1)], 0.05, {"K_max": 10})
    assert res.energies[0] == -3.0
    again = SpectrumResult.from_json(res.to_json())
    assert again.states == res.states and again.meta == res.meta
    res.to_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0].split(",")[:3] == ["E", "two_J", "parity"]


def test_bad_grid_rejected(sd):
    basis, H, _, _ = sd
    with pytest.raises(ValueError):
        prescan(H, SpaceFactory(basis, 3), 0.1, [1.0, 0.0, 2.0, 3.0, 4.0])
