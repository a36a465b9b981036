"""Exit criteria, one PASS/FAIL/SKIPPED line each at pinned tolerances.

The lines are collected and printed in the pytest terminal summary.  A
criterion that misses its tolerance fails its test.
"""

import os
import time

import numpy as np
import pytest

from litresponse.blockenc import ShotNoiseModel, noisy_moments
from litresponse.checks import check_product_identity, check_triple_oracle, check_walk_recursion
from litresponse.chebyshev import compute_moments
from litresponse.moments import MomentProvider, problem_rescaling
from litresponse.protocols import PipelineConfig, SpaceFactory, default_grid, prescan

pytestmark = pytest.mark.acceptance

RESULTS: list = []

# pinned tolerances
TOL_ORACLE = 1e-8
MAX_ORACLE_SECONDS = 30.0
TOL_WALK = 1e-10
TOL_PRODUCT = 1e-10
TOL_AMPLITUDE = 0.01
TOL_ROUNDTRIP = 0.02
TOL_SUM_RULE = 0.03
TOL_KEV = 1e-3
NOISE_SHOTS = 10**6
NOISE_SHIFT_FACTOR = 3.0
TOL_STDERR = 0.2
NOISE_SEEDS = 100
NOISE_K = 20

OXYGEN_E0_A = -15.074
OXYGEN_E0_AM1 = -11.155
OXYGEN_E_TH = 3.919


def record(number, name, ok, detail):
    status = "SKIPPED" if ok is None else "PASS" if ok else "FAIL"
    RESULTS.append(f"[{status:7s}] criterion {number}: {name}: {detail}")
    if ok is None:
        pytest.skip(detail)
    assert ok, detail


def test_1_triple_oracle(sd):
    _, H, _, omega = sd
    t0 = time.perf_counter()
    res = check_triple_oracle(H, omega, n=100, sigma_I_range=(1.0, 14.0), seed=0, tol=TOL_ORACLE)
    dt = time.perf_counter() - t0
    ok = res.status == "PASS" and dt < MAX_ORACLE_SECONDS
    record(1, "triple-oracle LI agreement", ok,
           f"max rel. dev {res.value:.2e} (tol {TOL_ORACLE:.0e}), {dt:.2f} s (limit {MAX_ORACLE_SECONDS:g} s)")


def test_2_walk_recursion(sd):
    _, H, _, omega = sd
    res = check_walk_recursion(H, omega, K=200, tol=TOL_WALK)
    record(2, "walk/recursion moments, k <= 200", res.status == "PASS",
           f"max |diff| {res.value:.2e} (tol {TOL_WALK:.0e})")


def test_3_product_identity(sd):
    _, H, _, omega = sd
    res = check_product_identity(H, omega, n_pairs=50, tol=TOL_PRODUCT)
    record(3, "Chebyshev product identity, 50 pairs", res.status == "PASS",
           f"max dev {res.value:.2e} (tol {TOL_PRODUCT:.0e})")


def test_4_prescan(pipeline_result, fci_ref):
    spec = pipeline_result.spectrum
    ref = [lv for lv in fci_ref["A3_levels"] if lv["E"] < fci_ref["E0_A2"]]
    n_ok = len(spec.states) == len(ref)
    dE = max((abs(s.energy - lv["E"]) for s, lv in zip(spec.states, ref)), default=np.inf)
    J_ok = n_ok and all(s.two_J == lv["two_J"] for s, lv in zip(spec.states, ref))
    tol = spec.sigma_I / 10
    record(4, "prescan levels and J labels", n_ok and J_ok and dE <= tol,
           f"{len(spec.states)}/{len(ref)} levels, max |dE| {dE:.2e} MeV (tol {tol:g}), "
           f"2J {spec.two_J.tolist()} vs FCI {[lv['two_J'] for lv in ref]}")


def test_5_amplitudes(pipeline_result, bound_ref):
    _, R_ref = bound_ref
    R = pipeline_result.peak_fit.amplitudes
    rel = np.max(np.abs(R - R_ref) / R_ref) if len(R) == len(R_ref) else np.inf
    record(5, "bound-state strengths R_n", rel <= TOL_AMPLITUDE,
           f"max rel. dev {rel:.2e} (tol {TOL_AMPLITUDE:g})")


def test_6a_round_trip(pipeline_result):
    dev = pipeline_result.roundtrip_deviation()
    ref = PipelineConfig().sigma_I_ref
    others = ", ".join(f"{s:g}: {v:.2%}" for s, v in sorted(dev.items()))
    record("6a", f"LI round trip at sigma_I = {ref:g} MeV", dev[ref] <= TOL_ROUNDTRIP,
           f"max rel. dev {dev[ref]:.2%} (tol {TOL_ROUNDTRIP:.0%}); all sigma_I: {others}")


def test_6b_band_overlap(pipeline_result):
    r = pipeline_result.response
    ov = r.members_overlap()
    lo = np.max([m.band_lo for m in r.members], axis=0)
    hi = np.min([m.band_hi for m in r.members], axis=0)
    gap = float(np.max(lo - hi)) / float(r.R.max())
    record("6b", "R(e) bands overlap pointwise across sigma_I in {5, 8, 11, 14}", bool(np.all(ov)),
           f"overlap at {ov.mean():.1%} of {len(ov)} points, largest gap {gap:.2%} of peak R")


def test_7_sum_rule(pipeline_result):
    total = pipeline_result.sum_rule()
    norm = pipeline_result.moments.source_norm2
    rel = abs(total - norm) / norm
    record(7, "sum rule", rel <= TOL_SUM_RULE, f"sum R_n + int R = {total:.4f} vs {norm:g} (tol {TOL_SUM_RULE:.0%})")


def test_8_oxygen_energies():
    """Needs a run configuration for the A = 3 oxygen valence problem (A-1 = 2) in
    ``LITRESPONSE_OXYGEN_CONFIG``; the basis and monomial files come from the user."""
    path = os.environ.get("LITRESPONSE_OXYGEN_CONFIG")
    if not path:
        record(8, "oxygen ground-state energies and threshold", None,
               "matrix-element file not supplied (set LITRESPONSE_OXYGEN_CONFIG to a run config)")
    from litresponse.cli import load_config, load_problem
    from litresponse.protocols.prescan import ground_state_energy

    cfg = load_config(path)
    prob = load_problem(cfg, need_source=False)
    sI = cfg["prescan", "sigma_I"]
    E0 = ground_state_energy(prob.H, prob.A, sI, step=cfg["prescan", "grid_step"])
    E1 = ground_state_energy(prob.H, prob.A - 1, sI, step=cfg["prescan", "grid_step"])
    devs = (abs(E0 - OXYGEN_E0_A), abs(E1 - OXYGEN_E0_AM1), abs(E1 - E0 - OXYGEN_E_TH))
    record(8, "oxygen ground-state energies and threshold", max(devs) <= TOL_KEV,
           f"E0(A) {E0:.4f}, E0(A-1) {E1:.4f}, e_th {E1 - E0:.4f} MeV (tol 1 keV)")


def test_9_shot_noise(sd, fci_ref):
    basis, H, space, omega = sd
    resc = problem_rescaling(H, 3)
    sI = PipelineConfig().prescan_sigma_I
    grid = default_grid(resc, fci_ref["E0_A2"], sI)
    factory = SpaceFactory(basis, 3)
    clean = prescan(H, factory, sI, grid, provider=MomentProvider(H, resc))
    noisy = prescan(H, factory, sI, grid,
                    provider=MomentProvider(H, resc, "walk+noise", ShotNoiseModel(NOISE_SHOTS, 0)))
    same = len(clean.states) == len(noisy.states) and np.array_equal(clean.two_J, noisy.two_J)
    err = np.array([s.energy_err for s in noisy.states])
    z = np.abs(noisy.energies - clean.energies) / err if same else np.array([np.inf])

    ms = compute_moments(H, space, omega, NOISE_K)
    mu = ms.moments.real / ms.source_norm2
    est = np.array([noisy_moments(ms, ShotNoiseModel(NOISE_SHOTS, s)).moments.real
                    for s in range(NOISE_SEEDS)]) / ms.source_norm2
    ratio = est.std(axis=0, ddof=1)[1:] / np.sqrt((1 - mu[1:] ** 2) / NOISE_SHOTS)
    worst = float(np.max(np.abs(ratio - 1)))
    ok = same and np.all(z <= NOISE_SHIFT_FACTOR) and worst <= TOL_STDERR
    record(9, f"shot noise, N = {NOISE_SHOTS:.0e}", ok,
           f"peak shift / error max {z.max():.2f} (limit {NOISE_SHIFT_FACTOR:g}); "
           f"moment std. error off by at most {worst:.1%} over k = 1..{NOISE_K}, {NOISE_SEEDS} seeds "
           f"(tol {TOL_STDERR:.0%})")
