"""Bound-state strengths ``R_n`` from a sub-threshold Lorentz curve.

With the energies fixed by the prescan, ``L(sigma_R)`` is linear in the
``R_n``.  Samples within ``±window·sigma_I`` of each level are fitted by
Lorentzian columns plus a background: a low-order polynomial per contiguous
window and, when the threshold is known, nonnegative Lorentzians at fixed
poles above it standing in for the tails of unbound strength.  ``R_n >= 0``
is enforced with a bounded-variable (active-set) least-squares solve.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import lsq_linear

from ..lorentz import LorentzCurve

log = logging.getLogger(__name__)

COND_WARN = 1e8


class ConditioningWarning(UserWarning):
    pass


@dataclass
class PeakFit:
    energies: np.ndarray
    amplitudes: np.ndarray
    residual: float
    condition: float
    sigma_I: float
    n_points: int

    def as_dict(self) -> dict:
        return {
            "E_n": [float(e) for e in self.energies],
            "R_n": [float(r) for r in self.amplitudes],
            "residual": self.residual,
            "condition": self.condition,
            "sigma_I": self.sigma_I,
            "n_points": self.n_points,
        }


def _segments(grid, energies, half):
    """Merge ``[E - half, E + half]`` windows into disjoint segments; return
    a segment label per grid point (-1 outside every window)."""
    spans = sorted((e - half, e + half) for e in energies)
    merged = []
    for lo, hi in spans:
        if merged and lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    label = np.full(len(grid), -1)
    for k, (lo, hi) in enumerate(merged):
        label[(grid >= lo) & (grid <= hi)] = k
    return label, len(merged)


TAIL_POLES = (0.5, 1, 2, 4, 8, 16, 32)


def fit_bound_amplitudes(curve: LorentzCurve, energies, threshold=None, window: float = 3.0,
                         background_order: int = 0, residual_tol: float = 1e-3,
                         tail_poles=TAIL_POLES) -> PeakFit:
    """Nonnegative ``R_n`` with ``L ≈ sum_n R_n / ((sigma_R - E_n)^2 + sigma_I^2)`` near each level.

    ``curve`` must have ``x = 0`` and a single ``sigma_I``; ``energies`` are
    absolute.  ``threshold`` (absolute) places the tail poles at
    ``threshold + t·sigma_I`` for ``t`` in ``tail_poles``; ``background_order
    = -1`` drops the polynomial.  ``residual`` is the rms misfit relative to
    ``max L`` on the fitted samples; values above ``residual_tol`` are logged
    as warnings.
    """
    E = np.sort(np.atleast_1d(np.asarray(energies, dtype=float)))
    if np.ptp(curve.sigma_I) > 0:
        raise ValueError("amplitude fit needs a curve with a single sigma_I")
    if np.any(curve.x != 0):
        raise ValueError("amplitude fit needs x = 0")
    sigma_I = float(curve.sigma_I[0])
    if len(E) == 0:
        return PeakFit(E, np.zeros(0), 0.0, 1.0, sigma_I, 0)
    grid, L = curve.sigma_R, curve.L
    label, nseg = _segments(grid, E, window * sigma_I)
    sel = label >= 0
    xs, ys, lab = grid[sel], L[sel], label[sel]
    cols = [1.0 / ((xs - e) ** 2 + sigma_I ** 2) for e in E]
    for k in range(nseg):
        inseg = lab == k
        center = xs[inseg].mean()
        for p in range(background_order + 1):
            cols.append(np.where(inseg, ((xs - center) / (window * sigma_I)) ** p, 0.0))
    n_tail = 0
    if threshold is not None:
        for t in tail_poles:
            cols.append(1.0 / ((xs - threshold - t * sigma_I) ** 2 + sigma_I ** 2))
            n_tail += 1
    A = np.column_stack(cols)
    if A.shape[0] < A.shape[1]:
        raise ValueError("too few sigma_R samples near the levels; refine the grid")
    norms = np.linalg.norm(A, axis=0)
    norms[norms == 0] = 1.0
    An = A / norms
    nE = len(E)
    lb = np.full(A.shape[1], -np.inf)
    lb[:nE] = 0.0
    if n_tail:
        lb[-n_tail:] = 0.0
    sol = lsq_linear(An, ys, bounds=(lb, np.inf), method="bvls", tol=1e-14, lsmr_tol="auto")
    coef = sol.x / norms
    R = np.clip(coef[:nE], 0.0, None)
    scale = float(np.max(np.abs(ys), initial=0.0)) or 1.0
    resid = float(np.sqrt(np.mean((A @ coef - ys) ** 2)) / scale)
    cond = float(np.linalg.cond(An))
    if cond > COND_WARN:
        warnings.warn(
            f"amplitude fit condition number {cond:.2e} > {COND_WARN:.0e}: use a smaller sigma_I or a denser grid",
            ConditioningWarning, stacklevel=2,
        )
    if resid > residual_tol:
        log.warning("amplitude fit residual %.3e exceeds %.1e", resid, residual_tol)
    log.info("amplitude fit: %d levels, %d samples, residual %.3e, condition %.3e", nE, len(xs), resid, cond)
    return PeakFit(E, R, resid, cond, sigma_I, int(len(xs)))
