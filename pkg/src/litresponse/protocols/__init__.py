"""Spectral prescan, bound-state amplitudes and continuum inversion."""

from .amplitudes import ConditioningWarning, PeakFit, fit_bound_amplitudes
from .inversion import (
    ChiBasis,
    InversionError,
    InversionParams,
    ResponseFunction,
    invert_continuum,
    reconstruct_li,
)
from .pipeline import PipelineConfig, PipelineResult, run_pipeline, thresholds
from .prescan import (
    BoundState,
    PrescanError,
    SpaceFactory,
    SpectrumResult,
    default_grid,
    ground_state_energy,
    prescan,
)

__all__ = [
    "BoundState", "ChiBasis", "ConditioningWarning", "InversionError", "InversionParams", "PeakFit",
    "PipelineConfig", "PipelineResult", "PrescanError", "ResponseFunction", "SpaceFactory", "SpectrumResult",
    "default_grid", "fit_bound_amplitudes", "ground_state_energy", "invert_continuum", "prescan",
    "reconstruct_li", "run_pipeline", "thresholds",
]
