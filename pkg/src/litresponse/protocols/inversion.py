"""Continuum response from ``L_C`` by regularized integral inversion.

``R(e)`` is expanded in the family

    chi_m(e) = (e - e_th)^p exp(-(e - e_th) / (m beta)),   m = 1..m*

with nonnegative coefficients.  ``m*`` is the first plateau of the fitted
curve.  Each fit carries a residual-bootstrap band; an ensemble over
``sigma_I`` gives the overall uncertainty band.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import quad_vec
from scipy.optimize import nnls

from ..lorentz import LorentzCurve, discrete_part

log = logging.getLogger(__name__)


class InversionError(RuntimeError):
    pass


@dataclass(frozen=True)
class InversionParams:
    """Settings for :func:`invert_continuum`.

    ``beta=None`` means ``(e_max - e_th) / 10``; ``beta="auto"`` picks the
    value from ``beta_grid`` whose members agree best, among those with a
    worst-case relative misfit of ``L_C`` within ``misfit_slack`` of the best.  ``e_max=None`` means ``e_th + 40``.

    Each member's band is the envelope of the fits at ``beta / beta_spread``,
    ``beta`` and ``beta * beta_spread``, at ``m*`` and ``m* + 1``, together
    with their residual-bootstrap percentiles.  ``beta_spread = 1`` leaves
    only the bootstrap and plateau-neighbour spread.
    """

    e_max: Optional[float] = None
    beta: object = None
    exponent: float = 1.5
    m_max: int = 24
    plateau_tol: float = 0.02
    weight_floor: float = 1e-3
    n_grid: int = 801
    band_sigmas: float = 1.0
    n_bootstrap: int = 200
    seed: int = 0
    beta_spread: float = 80.0 ** (1.0 / 18.0)
    misfit_slack: float = 1.25
    quad_rtol: float = 1e-10
    beta_grid: Optional[Sequence[float]] = None

    def resolve_e_max(self, e_th: float) -> float:
        return e_th + 40.0 if self.e_max is None else float(self.e_max)

    def resolve_beta(self, e_th: float) -> float:
        if self.beta is None:
            return (self.resolve_e_max(e_th) - e_th) / 10.0
        return float(self.beta)

    def auto_beta_grid(self, e_th: float) -> np.ndarray:
        if self.beta_grid is not None:
            return np.asarray(self.beta_grid, dtype=float)
        hi = (self.resolve_e_max(e_th) - e_th) / 10.0
        return np.geomspace(hi / 80.0, hi, 19)


@dataclass(frozen=True)
class ChiBasis:
    e_th: float
    beta: float
    exponent: float = 1.5

    def __call__(self, e, m: int):
        d = np.clip(np.asarray(e, dtype=float) - self.e_th, 0.0, None)
        return d ** self.exponent * np.exp(-d / (m * self.beta))

    def matrix(self, e, M: int) -> np.ndarray:
        """``(len(e), M)`` array of ``chi_1..chi_M``."""
        d = np.clip(np.asarray(e, dtype=float) - self.e_th, 0.0, None)[:, None]
        m = np.arange(1, M + 1)[None, :]
        return d ** self.exponent * np.exp(-d / (m * self.beta))

    def transforms(self, sigma_R, sigma_I, M: int, e_max: float, rtol: float = 1e-10) -> np.ndarray:
        """Lorentz transforms ``int chi_m(e) / ((sigma_R - e)^2 + sigma_I^2) de``
        over ``[e_th, e_max]``, shape ``(len(sigma_R), M)``."""
        sR = np.atleast_1d(np.asarray(sigma_R, dtype=float))
        sI = np.broadcast_to(np.asarray(sigma_I, dtype=float), sR.shape)

        def integrand(e):
            return self.matrix(np.array([e]), M)[0][None, :] / ((sR - e) ** 2 + sI ** 2)[:, None]

        val, err = quad_vec(integrand, self.e_th, e_max, epsrel=rtol, epsabs=0.0, limit=400)
        return val


@dataclass
class InversionFit:
    """Result for a single ``sigma_I``."""

    sigma_I: float
    m_star: int
    coeffs: np.ndarray
    R: np.ndarray
    band_lo: np.ndarray
    band_hi: np.ndarray
    residual: float
    max_rel_dev: float


@dataclass
class ResponseFunction:
    e_grid: np.ndarray
    R: np.ndarray
    m_star: int
    band_lo: np.ndarray
    band_hi: np.ndarray
    e_th: float
    e_max: float
    beta: float
    exponent: float
    coeffs: np.ndarray
    sigma_I_ref: float
    members: list = field(default_factory=list)

    @property
    def basis(self) -> ChiBasis:
        return ChiBasis(self.e_th, self.beta, self.exponent)

    def __call__(self, e):
        """Reference fit evaluated at arbitrary ``e`` (zero below threshold)."""
        e = np.asarray(e, dtype=float)
        if len(self.coeffs) == 0:
            return np.zeros_like(e)
        vals = self.basis.matrix(np.atleast_1d(e), len(self.coeffs)) @ self.coeffs
        return vals.reshape(e.shape)

    def integral(self) -> float:
        return float(np.trapezoid(self(self.e_grid_fine()), self.e_grid_fine()))

    def e_grid_fine(self, n: int = 20001) -> np.ndarray:
        return np.linspace(self.e_th, self.e_max, n)

    def band_width(self) -> np.ndarray:
        return self.band_hi - self.band_lo

    def members_overlap(self) -> np.ndarray:
        """Pointwise: do the per-``sigma_I`` bands share a common value?"""
        if not self.members:
            return np.ones(len(self.e_grid), dtype=bool)
        lo = np.max([m.band_lo for m in self.members], axis=0)
        hi = np.min([m.band_hi for m in self.members], axis=0)
        return lo <= hi

    def to_csv(self, path) -> None:
        cols = ["e", "R", "band_lo", "band_hi"] + [f"R_sigmaI_{m.sigma_I:g}" for m in self.members]
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for i, e in enumerate(self.e_grid):
                row = [e, self.R[i], self.band_lo[i], self.band_hi[i]] + [m.R[i] for m in self.members]
                fh.write(",".join(f"{v:.12g}" for v in row) + "\n")

    def summary(self) -> dict:
        return {
            "e_th": self.e_th,
            "e_max": self.e_max,
            "beta": self.beta,
            "exponent": self.exponent,
            "m_star": self.m_star,
            "coeffs": [float(c) for c in self.coeffs],
            "sigma_I_ref": self.sigma_I_ref,
            "integral": self.integral(),
            "members": [
                {"sigma_I": m.sigma_I, "m_star": m.m_star, "coeffs": [float(c) for c in m.coeffs],
                 "residual": m.residual, "max_rel_dev": m.max_rel_dev}
                for m in self.members
            ],
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)


def _weights(L, floor):
    top = float(np.max(np.abs(L), initial=0.0))
    if top == 0.0:
        return np.ones_like(L)
    return 1.0 / np.maximum(np.abs(L), floor * top)


def _fit_sequence(T, L, w, Phi, plateau_tol):
    """NNLS fits with ``1..M`` basis functions; returns ``(m_star, fits)``."""
    A = T * w[:, None]
    b = L * w
    fits = []
    prev = None
    for M in range(1, T.shape[1] + 1):
        c, _ = nnls(A[:, :M], b, maxiter=50 * M)
        Rg = Phi[:, :M] @ c
        fits.append(c)
        if prev is not None:
            scale = np.linalg.norm(prev)
            change = np.linalg.norm(Rg - prev) / scale if scale > 0 else np.linalg.norm(Rg)
            if change < plateau_tol:
                return M - 1, fits
        prev = Rg
    return None, fits


def _bootstrap_band(A, b, c, Phi_M, params):
    """16th/84th percentiles of ``R(e)`` over a residual bootstrap.

    Weighted residuals of the fit are resampled with replacement and added
    back to the fitted data; each replica is refit with the same ``m*``.
    """
    fitted = A @ c
    r = b - fitted
    rng = np.random.default_rng(params.seed)
    reps = np.empty((params.n_bootstrap, Phi_M.shape[0]))
    for i in range(params.n_bootstrap):
        cb, _ = nnls(A, fitted + rng.choice(r, size=len(r), replace=True), maxiter=50 * A.shape[1])
        reps[i] = Phi_M @ cb
    lo, hi = np.percentile(reps, [16.0, 84.0], axis=0)
    R = Phi_M @ c
    k = params.band_sigmas
    return R - k * (R - lo), R + k * (hi - R)


def _fit_one(T, Phi, L, params, sigma_I, beta):
    w = _weights(L, params.weight_floor)
    m_star, fits = _fit_sequence(T, L, w, Phi, params.plateau_tol)
    if m_star is None:
        raise InversionError(
            f"inversion unstable, widen sigma_R range or adjust beta (no plateau up to m = {params.m_max}, "
            f"beta = {beta:.4g}, sigma_I = {sigma_I:g})"
        )
    M = m_star
    c = fits[M - 1]
    R = Phi[:, :M] @ c
    R_next = Phi[:, : M + 1] @ fits[M]
    fitted = T[:, :M] @ c
    top = float(np.max(np.abs(L), initial=0.0))
    if top > 0:
        rel = float(np.max(np.abs(fitted - L) / np.maximum(np.abs(L), params.weight_floor * top)))
    else:
        rel = float(np.max(np.abs(fitted), initial=0.0))
    resid = float(np.linalg.norm((fitted - L) * w) / np.sqrt(len(L)))
    return M, c, R, R_next, T[:, :M] * w[:, None], L * w, rel, resid


class _Transforms:
    """Caches Lorentz transforms of the basis per ``(curve, beta)``."""

    def __init__(self, curves, e_th, params):
        self.curves = curves
        self.e_th = e_th
        self.params = params
        self.e_max = params.resolve_e_max(e_th)
        self._cache = {}

    def __call__(self, i, beta):
        key = (i, float(beta))
        if key not in self._cache:
            C = self.curves[i]
            basis = ChiBasis(self.e_th, beta, self.params.exponent)
            self._cache[key] = basis.transforms(C.sigma_R, C.sigma_I, self.params.m_max, self.e_max,
                                                self.params.quad_rtol)
        return self._cache[key]


def _member(tr: _Transforms, i: int, beta: float, e_grid, params) -> InversionFit:
    C = tr.curves[i]
    sigma_I = float(C.sigma_I[0])
    Phi = ChiBasis(tr.e_th, beta, params.exponent).matrix(e_grid, params.m_max)
    M, c, R, R_next, A, b, rel, resid = _fit_one(tr(i, beta), Phi, C.L, params, sigma_I, beta)
    curves = [R, R_next, *_bootstrap_band(A, b, c, Phi[:, :M], params)]
    if params.beta_spread != 1.0:
        for nb in (beta / params.beta_spread, beta * params.beta_spread):
            Phi_n = ChiBasis(tr.e_th, nb, params.exponent).matrix(e_grid, params.m_max)
            try:
                Mn, cn, Rn, Rn_next, An, bn, _, _ = _fit_one(tr(i, nb), Phi_n, C.L, params, sigma_I, nb)
            except InversionError:
                continue
            curves += [Rn, Rn_next, *_bootstrap_band(An, bn, cn, Phi_n[:, :Mn], params)]
    lo = np.clip(np.min(curves, axis=0), 0.0, None)
    hi = np.max(curves, axis=0)
    log.info("inversion sigma_I=%g beta=%.4g m*=%d residual=%.3e max_rel=%.3e", sigma_I, beta, M, resid, rel)
    return InversionFit(sigma_I, M, c, R, lo, hi, resid, rel)


def _check_curve(C: LorentzCurve, e_th: float):
    if np.any(C.sigma_R < e_th - 1e-9):
        raise ValueError("L_C must be sampled at sigma_R >= e_th")
    if np.ptp(C.sigma_I) > 0:
        raise ValueError("each L_C curve must have a single sigma_I")


def _select_beta(tr: _Transforms, params) -> float:
    """Among betas whose worst relative misfit is within ``misfit_slack`` of
    the best, take the one whose members agree best (smallest pointwise
    spread relative to the peak)."""
    grid = np.linspace(tr.e_th, tr.e_max, params.n_grid)
    scan = []
    for beta in params.auto_beta_grid(tr.e_th):
        Phi = ChiBasis(tr.e_th, beta, params.exponent).matrix(grid, params.m_max)
        try:
            fits = [_fit_one(tr(i, beta), Phi, C.L, params, float(C.sigma_I[0]), beta)
                    for i, C in enumerate(tr.curves)]
        except InversionError:
            continue
        worst = max(f[6] for f in fits)
        Rs = np.array([f[2] for f in fits])
        peak = float(Rs.max())
        spread = float(np.ptp(Rs, axis=0).max() / peak) if peak > 0 else 0.0
        log.debug("beta scan %.4g: worst misfit %.3e, member spread %.3e", beta, worst, spread)
        scan.append((float(beta), worst, spread))
    if not scan:
        raise InversionError("inversion unstable, widen sigma_R range or adjust beta (no beta in the scan has a plateau)")
    best = min(w for _, w, _ in scan)
    ok = [t for t in scan if t[1] <= params.misfit_slack * best + 1e-15]
    return min(ok, key=lambda t: (t[2], t[1]))[0]


def invert_continuum(L_C, e_th: float, params: InversionParams = InversionParams(),
                     sigma_I_ref: Optional[float] = None) -> ResponseFunction:
    """Invert one ``L_C`` curve or an ensemble of curves (one per ``sigma_I``).

    The reported ``R`` and ``m_star`` are those of the reference member
    (``sigma_I_ref``, default the lower median ``sigma_I``).  ``band_lo`` and
    ``band_hi`` are the pointwise spread of the members' fitted ``R``; each
    member also carries its own band (see :class:`InversionParams`).
    """
    curves = [L_C] if isinstance(L_C, LorentzCurve) else list(L_C)
    if not curves:
        raise ValueError("no L_C curves given")
    for C in curves:
        _check_curve(C, e_th)
    tr = _Transforms(curves, e_th, params)
    beta = _select_beta(tr, params) if params.beta == "auto" else params.resolve_beta(e_th)
    if not beta > 0:
        raise ValueError("beta must be positive")
    e_grid = np.linspace(e_th, tr.e_max, params.n_grid)
    members = [_member(tr, i, beta, e_grid, params) for i in range(len(curves))]
    sig = np.array([m.sigma_I for m in members])
    if sigma_I_ref is None:
        ref = members[int(np.argsort(sig)[(len(sig) - 1) // 2])]
    else:
        ref = members[int(np.argmin(np.abs(sig - sigma_I_ref)))]
    lo = np.min([m.R for m in members], axis=0)
    hi = np.max([m.R for m in members], axis=0)
    return ResponseFunction(e_grid, ref.R, ref.m_star, lo, hi, e_th, tr.e_max, beta, params.exponent,
                            ref.coeffs, ref.sigma_I, members)


def reconstruct_li(R: ResponseFunction, energies, amplitudes, sigma_R, sigma_I, x: float = 0.0,
                   e_max: Optional[float] = None, rtol: float = 1e-10) -> LorentzCurve:
    """``L_D + int_{e_th}^{e_max} R(e) / ((sigma_R - e)^2 + sigma_I^2) de``.

    ``energies`` are absolute; with ``x = E_0`` they become excitation
    energies, matching ``sigma_R`` and ``R.e_grid``.
    """
    sR = np.atleast_1d(np.asarray(sigma_R, dtype=float))
    sI = np.broadcast_to(np.asarray(sigma_I, dtype=float), sR.shape)
    top = R.e_max if e_max is None else float(e_max)
    LD = discrete_part(energies, amplitudes, sR, sI, x)
    if len(R.coeffs) == 0 or not np.any(R.coeffs):
        LC = np.zeros(len(sR))
    else:
        def integrand(e):
            return R(np.array([e]))[0] / ((sR - e) ** 2 + sI ** 2)

        LC, err = quad_vec(integrand, R.e_th, top, epsrel=rtol, epsabs=0.0, limit=400)
        if not np.all(np.isfinite(LC)):
            raise InversionError("quadrature did not converge in reconstruct_li")
    return LorentzCurve.build(sR, sI, x, np.asarray(LD) + LC, 0)
