"""End-to-end chain: thresholds, prescan, bound amplitudes, continuum
inversion and the LI round trip."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..blockenc import ShotNoiseModel
from ..chebyshev import MomentSet
from ..fockbasis import StateVector
from ..hamiltonian import SecondQuantizedH
from ..lorentz import LorentzCurve, continuum_part, li_curve, required_K_max
from ..moments import MomentProvider, problem_rescaling
from .amplitudes import PeakFit, fit_bound_amplitudes
from .inversion import InversionParams, ResponseFunction, invert_continuum, reconstruct_li
from .prescan import SpaceFactory, SpectrumResult, default_grid, ground_state_energy, prescan

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineConfig:
    """Knobs for :func:`run_pipeline`.  Energies in MeV.

    ``prescan_sigma_I`` should be below the smallest level spacing of both
    the A and A-1 systems.  ``amp_sigma_I=None`` means a fifth of the
    smallest gap between prescan levels.
    """

    prescan_sigma_I: float = 0.05
    grid_step: Optional[float] = None
    peak_tol: float = 0.02
    amp_sigma_I: Optional[float] = None
    sigma_I_ensemble: Sequence[float] = (5.0, 8.0, 11.0, 14.0)
    sigma_I_ref: float = 8.0
    e_window: float = 40.0
    n_sigma_R: int = 161
    method: str = "recursion"
    shots: int = 0
    seed: int = 0
    threads: int = 1
    inversion: InversionParams = field(default_factory=lambda: InversionParams(beta="auto"))


@dataclass
class PipelineResult:
    spectrum: SpectrumResult
    E0: float
    E0_Am1: float
    e_th: float
    peak_fit: PeakFit
    amp_curve: LorentzCurve
    li: dict
    li_continuum: dict
    response: ResponseFunction
    reconstructed: dict
    moments: MomentSet
    K_used: dict = field(default_factory=dict)

    @property
    def E_th(self) -> float:
        return self.E0_Am1

    def roundtrip_deviation(self) -> dict:
        """Max relative ``|L_rec - L| / L`` per ``sigma_I``."""
        return {s: float(np.max(np.abs(self.reconstructed[s].L - self.li[s].L) / np.abs(self.li[s].L)))
                for s in self.li}

    def sum_rule(self) -> float:
        return float(np.sum(self.peak_fit.amplitudes)) + self.response.integral()

    def summary(self) -> dict:
        return {
            "E0": self.E0,
            "E0_Am1": self.E0_Am1,
            "e_th": self.e_th,
            "bound": self.peak_fit.as_dict(),
            "sum_rule": self.sum_rule(),
            "source_norm2": self.moments.source_norm2,
            "roundtrip_max_rel_dev": {f"{k:g}": v for k, v in self.roundtrip_deviation().items()},
            "inversion": self.response.summary(),
            "K_used": self.K_used,
        }


def make_provider(H, A, config: PipelineConfig) -> MomentProvider:
    noise = ShotNoiseModel(config.shots, config.seed) if config.method == "walk+noise" else None
    return MomentProvider(H, problem_rescaling(H, A), config.method, noise)


def thresholds(H: SecondQuantizedH, A: int, config: PipelineConfig):
    """``(E0(A), E0(A-1), e_th)`` from two ground-state scans."""
    E0 = ground_state_energy(H, A, config.prescan_sigma_I, make_provider(H, A, config), step=config.grid_step)
    E1 = ground_state_energy(H, A - 1, config.prescan_sigma_I, make_provider(H, A - 1, config),
                             step=config.grid_step) if A > 1 else 0.0
    return E0, E1, E1 - E0


def _amp_sigma_I(E, E_th, config):
    if config.amp_sigma_I is not None:
        return config.amp_sigma_I
    pts = np.unique(np.round(np.append(E, E_th), 9))
    gaps = np.diff(pts)
    return float(gaps.min()) / 5 if len(gaps) else config.prescan_sigma_I


def run_pipeline(H: SecondQuantizedH, omega: StateVector, config: PipelineConfig = PipelineConfig()) -> PipelineResult:
    A = omega.space.A
    E1 = 0.0
    if A > 1:
        E1 = ground_state_energy(H, A - 1, config.prescan_sigma_I, make_provider(H, A - 1, config),
                                 step=config.grid_step, threads=config.threads)
    provider = make_provider(H, A, config)
    resc = provider.rescaling
    grid = default_grid(resc, E1, config.prescan_sigma_I, config.grid_step)
    spectrum = prescan(H, SpaceFactory(H.basis, A), config.prescan_sigma_I, grid, config.peak_tol, provider,
                       threads=config.threads)
    if not spectrum.states:
        raise RuntimeError("prescan found no bound states below the threshold")
    E0 = float(spectrum.energies[0])
    e_th = E1 - E0
    log.info("E0(A=%d) = %.6f, E0(A-1) = %.6f, e_th = %.6f", A, E0, E1, e_th)

    # one moment set of Omega serves every curve below
    levels = np.unique(np.round(spectrum.energies, 9))
    sI_amp = _amp_sigma_I(levels, E1, config)
    amp_grid = default_grid(resc, E1, sI_amp, config.grid_step if config.grid_step else sI_amp / 8)
    sR = np.linspace(e_th, e_th + config.e_window, config.n_sigma_R)
    K_max = max(required_K_max(amp_grid, sI_amp, 0.0, resc),
                *(required_K_max(sR, s, E0, resc) for s in config.sigma_I_ensemble))
    moments = provider(omega.space, omega, K_max, tag=(0xA11,))

    amp_curve = li_curve(moments, amp_grid, sI_amp, 0.0)
    fit = fit_bound_amplitudes(amp_curve, levels, threshold=E1)

    li, li_c, rec, K_used = {}, {}, {}, {}
    for s in config.sigma_I_ensemble:
        curve = li_curve(moments, sR, s, E0)
        li[s] = curve
        li_c[s] = continuum_part(curve, fit.energies, fit.amplitudes)
        K_used[f"{s:g}"] = [int(curve.K_used.min()), int(curve.K_used.max())]
    K_used["amplitude_fit"] = [int(amp_curve.K_used.min()), int(amp_curve.K_used.max())]
    response = invert_continuum([li_c[s] for s in config.sigma_I_ensemble], e_th, config.inversion,
                                sigma_I_ref=config.sigma_I_ref)
    for s in config.sigma_I_ensemble:
        rec[s] = reconstruct_li(response_for(response, s), fit.energies, fit.amplitudes, sR, s, E0)
    return PipelineResult(spectrum, E0, E1, e_th, fit, amp_curve, li, li_c, response, rec, moments, K_used)


def response_for(response: ResponseFunction, sigma_I: float) -> ResponseFunction:
    """The ensemble member fitted at ``sigma_I`` as a standalone response."""
    from dataclasses import replace

    m = min(response.members, key=lambda f: abs(f.sigma_I - sigma_I))
    return replace(response, R=m.R, m_star=m.m_star, coeffs=m.coeffs, sigma_I_ref=m.sigma_I,
                   band_lo=m.band_lo, band_hi=m.band_hi)
