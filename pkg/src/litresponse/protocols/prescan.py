"""Bound-state energies and angular momenta from a cascading-M_J scan.

For each M_J block, from the largest reachable value down, the Lorentz
integral at ``x = 0`` is accumulated over single-configuration source
states.  Moments are linear in the source projector, so the pooled curve is
``sum_n 1 / ((sigma_R - E_n)^2 + sigma_I^2)`` over every eigenstate of the
block (when the whole block is used): each peak amplitude counts the states
at that energy.  States that were not present at the previous, larger M_J
have ``J = M_J``.
"""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import find_peaks

from ..chebyshev import truncation_order
from ..fockbasis import ConfigSpace, EmptySpaceError, SpBasis, StateVector, enumerate_configs
from ..lorentz import li_from_moments, li_moment_weights, required_K_max
from ..moments import MomentProvider

log = logging.getLogger(__name__)

SOURCE_BUDGET = 64


class PrescanError(RuntimeError):
    pass


@dataclass(frozen=True)
class BoundState:
    energy: float
    two_J: int
    parity: int
    energy_err: float = 0.0
    amplitude: float = 1.0


@dataclass
class SpectrumResult:
    states: list
    sigma_I: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.states = sorted(self.states, key=lambda s: s.energy)

    @property
    def energies(self) -> np.ndarray:
        return np.array([s.energy for s in self.states])

    @property
    def two_J(self) -> np.ndarray:
        return np.array([s.two_J for s in self.states], dtype=int)

    def levels(self):
        """``(E, multiplicity)`` pairs with ``multiplicity = 2J + 1``."""
        return [(s.energy, s.two_J + 1) for s in self.states]

    def to_json(self, path=None) -> str:
        doc = {
            "sigma_I": self.sigma_I,
            "states": [
                {"E": float(s.energy), "two_J": int(s.two_J), "parity": int(s.parity),
                 "E_err": float(s.energy_err), "amplitude": float(s.amplitude)}
                for s in self.states
            ],
            "meta": self.meta,
        }
        text = json.dumps(doc, indent=2, default=_json_default)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_json(cls, src) -> "SpectrumResult":
        try:
            with open(src) as fh:
                doc = json.load(fh)
        except (OSError, TypeError):
            doc = json.loads(src)
        states = [BoundState(d["E"], d["two_J"], d["parity"], d.get("E_err", 0.0), d.get("amplitude", 1.0))
                  for d in doc["states"]]
        return cls(states, doc["sigma_I"], doc.get("meta", {}))

    def to_csv(self, path) -> None:
        """Level-scheme table: energy, J (as 2J), parity, error."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["E", "two_J", "parity", "E_err"])
            for s in self.states:
                w.writerow([f"{s.energy:.12g}", s.two_J, s.parity, f"{s.energy_err:.12g}"])


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


@dataclass(frozen=True)
class SpaceFactory:
    """``two_Mj -> ConfigSpace`` for a fixed basis and particle number."""

    basis: SpBasis
    A: int

    def __call__(self, two_Mj: int) -> ConfigSpace:
        return enumerate_configs(self.basis, self.A, two_Mj)

    def two_Mj_values(self) -> list:
        """Nonnegative ``2 M_J`` values from the largest reachable one down."""
        top = self.basis.max_two_mj(self.A)
        return list(range(top, -1, -2))


@dataclass
class PeakFit1:
    position: float
    amplitude: float
    position_err: float = 0.0
    background: tuple = (0.0, 0.0)


def lorentzian(x, E, A, sigma_I):
    return A / ((x - E) ** 2 + sigma_I ** 2)


def parabolic_vertex(x, y, i: int) -> float:
    """Vertex of the parabola through points ``i-1, i, i+1``."""
    x0, x1, x2 = x[i - 1], x[i], x[i + 1]
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    den = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / den
    b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / den
    if a >= 0:
        return float(x1)
    return float(np.clip(-b / (2 * a), x0, x2))


def fit_peaks(grid, L, sigma_I: float, guesses: Sequence[float], window: float = 3.0,
              sweeps: int = 4, cov_L=None):
    """Single-Lorentzian plus linear-background fits within ``±window·sigma_I``.

    Neighbouring peaks are handled by backfitting: each window sees the
    data minus the current model of every other peak.  With ``cov_L``
    (covariance of ``L`` on ``grid``) the position error is propagated
    through the Gauss-Newton solution.
    """
    grid = np.asarray(grid, dtype=float)
    L = np.asarray(L, dtype=float)
    fits = []
    for g in guesses:
        j = int(np.argmin(np.abs(grid - g)))
        fits.append(PeakFit1(float(g), float(max(L[j], 0.0)) * sigma_I ** 2))
    for _ in range(sweeps):
        for k, pk in enumerate(fits):
            others = sum((lorentzian(grid, f.position, f.amplitude, sigma_I)
                          for i, f in enumerate(fits) if i != k), np.zeros_like(grid))
            sel = np.abs(grid - pk.position) <= window * sigma_I
            if sel.sum() < 5:
                raise PrescanError(f"too few grid points around the peak at {pk.position:.4f}; refine the sigma_R grid")
            xs, ys = grid[sel], (L - others)[sel]
            x0 = pk.position

            def resid(p):
                return lorentzian(xs, p[0], p[1], sigma_I) + p[2] + p[3] * (xs - x0) - ys

            res = least_squares(resid, [pk.position, pk.amplitude, 0.0, 0.0], method="lm", xtol=1e-14, ftol=1e-14)
            fits[k] = PeakFit1(float(res.x[0]), float(res.x[1]), 0.0, (float(res.x[2]), float(res.x[3])))
    if cov_L is not None:
        for k, pk in enumerate(fits):
            sel = np.abs(grid - pk.position) <= window * sigma_I
            fits[k].position_err = _position_error(grid[sel], pk, sigma_I, cov_L[np.ix_(sel, sel)])
    return fits


def _position_error(xs, pk: PeakFit1, sigma_I, cov):
    d = xs - pk.position
    den = d * d + sigma_I ** 2
    J = np.column_stack([2 * pk.amplitude * d / den ** 2, 1.0 / den, np.ones_like(xs), d])
    pinv = np.linalg.pinv(J)
    C = pinv @ cov @ pinv.T
    return float(np.sqrt(max(C[0, 0], 0.0)))


def _pooled_moments(provider: MomentProvider, space: ConfigSpace, rows, K_max, tag0, threads=1):
    def one(r):
        amps = np.zeros(space.dim, dtype=np.complex128)
        amps[r] = 1.0
        ms = provider(space, StateVector(space, amps), K_max, tag=(*tag0, int(space.configs[r])))
        return ms, provider.moment_variance(ms)

    # build the cached operator before any worker threads start
    if provider.method == "recursion":
        provider.operator(space)
    else:
        provider.walk(space)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(one, rows))
    else:
        parts = [one(r) for r in rows]
    # summed in row order whatever the thread count
    total, var = parts[0]
    for ms, v in parts[1:]:
        total = total + ms
        var = var + v
    return total, var


def _source_rows(space: ConfigSpace, budget: int, seed: int):
    """Rows grouped by configuration parity; all of them, or a sorted
    deterministic sample of ``budget`` per group when the block is larger."""
    groups = {}
    for i, w in enumerate(space.configs):
        groups.setdefault(space.basis.config_parity(int(w)), []).append(i)
    out = {}
    for par, rows in sorted(groups.items(), reverse=True):
        if len(rows) > budget:
            rng = np.random.default_rng([seed, space.A, space.two_Mj & 0xFFFF, par & 1])
            rows = sorted(rng.choice(rows, size=budget, replace=False).tolist())
            out[par] = (rows, True)
        else:
            out[par] = (rows, False)
    return out


def default_grid(rescaling, upper: float, sigma_I: float, step: Optional[float] = None):
    """sigma_R grid from just below the spectral lower bound up to (not
    including) ``upper``."""
    step = sigma_I / 4 if step is None else step
    lo = rescaling.shift - rescaling.scale / (1 + rescaling.margin) - 3 * sigma_I
    n = int(np.floor((upper - lo) / step))
    grid = upper - step * np.arange(1, n + 1)[::-1]
    return grid


def prescan(
    H,
    space_factory: SpaceFactory,
    sigma_I: float,
    sigma_R_grid,
    peak_tol: float = 0.02,
    provider: Optional[MomentProvider] = None,
    match_tol: Optional[float] = None,
    budget: int = SOURCE_BUDGET,
    seed: int = 0,
    two_Mj_values: Optional[Sequence[int]] = None,
    propagate_errors: Optional[bool] = None,
    threads: int = 1,
) -> SpectrumResult:
    """Cascading-M_J prescan.  ``sigma_R_grid`` is absolute energy (``x = 0``).

    Returns every state whose peak falls inside the grid.  Peaks are
    identified by ``scipy.signal.find_peaks`` with a prominence of
    ``peak_tol`` times the curve maximum.
    """
    from ..moments import problem_rescaling

    grid = np.asarray(sigma_R_grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 5 or np.any(np.diff(grid) <= 0):
        raise ValueError("sigma_R grid must be strictly increasing with at least 5 points")
    if not sigma_I > 0:
        raise ValueError("sigma_I must be positive")
    step = float(np.max(np.diff(grid)))
    match_tol = max(step, sigma_I / 5) if match_tol is None else match_tol
    if provider is None:
        provider = MomentProvider(H, problem_rescaling(H, space_factory.A))
    resc = provider.rescaling
    if propagate_errors is None:
        propagate_errors = provider.method == "walk+noise"
    K_max = required_K_max(grid, sigma_I, 0.0, resc)
    G = None
    found: list = []
    scans = []
    values = space_factory.two_Mj_values() if two_Mj_values is None else list(two_Mj_values)
    for two_Mj in values:
        try:
            space = space_factory(two_Mj)
        except EmptySpaceError:
            continue
        if space.dim == 0:
            log.info("M_J = %d/2 block empty, skipped", two_Mj)
            continue
        for parity, (rows, sampled) in _source_rows(space, budget, seed).items():
            ms, var = _pooled_moments(provider, space, rows, K_max, (two_Mj & 0xFFFF, parity & 1), threads)
            L = li_from_moments(ms, grid, sigma_I, 0.0)
            peaks, _ = find_peaks(L, prominence=peak_tol * float(L.max()))
            cov_L = None
            if propagate_errors:
                if G is None:
                    G = _weight_matrix(grid, sigma_I, resc)
                cov_L = (G * var[: G.shape[1]]) @ G.T
            guesses = [parabolic_vertex(grid, L, int(i)) for i in peaks]
            fits = fit_peaks(grid, L, sigma_I, guesses, cov_L=cov_L) if guesses else []
            new_here = []
            for f in fits:
                prev = [s for s in found if s.parity == parity and abs(s.energy - f.position) <= match_tol]
                if sampled:
                    n_new = 0 if prev else 1
                else:
                    count = int(round(f.amplitude))
                    if abs(f.amplitude - count) > 0.25:
                        log.warning("peak at %.4f has non-integer weight %.3f; check sigma_I and the grid",
                                    f.position, f.amplitude)
                    n_new = max(count - len(prev), 0)
                for _ in range(n_new):
                    new_here.append(BoundState(f.position, two_Mj, parity, f.position_err, f.amplitude))
            _check_separation(new_here, sigma_I, two_Mj)
            found.extend(new_here)
            scans.append({
                "two_Mj": two_Mj, "parity": parity, "dim": space.dim, "n_sources": len(rows),
                "sampled": sampled, "peaks": [[f.position, f.amplitude, f.position_err] for f in fits],
                "new": len(new_here),
            })
            log.info("M_J=%d/2 parity %+d: %d peaks, %d new", two_Mj, parity, len(fits), len(new_here))
    meta = {
        "sigma_I": sigma_I, "grid_min": float(grid[0]), "grid_max": float(grid[-1]), "grid_step": step,
        "n_grid": len(grid), "peak_tol": peak_tol, "match_tol": match_tol, "K_max": K_max,
        "moment_source": provider.method, "rescaling": resc.as_dict(), "scans": scans,
    }
    if provider.noise is not None:
        meta["shots"] = provider.noise.shots_per_moment
        meta["seed"] = provider.noise.seed
    return SpectrumResult(found, sigma_I, meta)


def _check_separation(states, sigma_I, two_Mj):
    E = sorted(s.energy for s in states)
    for a, b in zip(E, E[1:]):
        if 0 < b - a < sigma_I:
            raise PrescanError(
                f"new peaks at {a:.4f} and {b:.4f} (M_J = {two_Mj}/2) are closer than sigma_I = {sigma_I:g}; "
                "reduce sigma_I"
            )


def _weight_matrix(grid, sigma_I, resc):
    """``dL/dmu`` on the grid, each row with its own truncation order."""
    Ks = np.atleast_1d(truncation_order(grid, sigma_I, 0.0, resc))
    return li_moment_weights(grid, sigma_I, 0.0, resc, Ks)


def ground_state_energy(H, A: int, sigma_I: float, provider: Optional[MomentProvider] = None,
                        window: float = 4.0, step: Optional[float] = None, peak_tol: float = 0.02,
                        threads: int = 1) -> float:
    """Lowest state of the ``A``-particle system from one scan of the
    smallest-|M_J| block, which contains every J."""
    from ..moments import problem_rescaling

    if A == 0:
        return 0.0
    factory = SpaceFactory(H.basis, A)
    if provider is None:
        provider = MomentProvider(H, problem_rescaling(H, A))
    resc = provider.rescaling
    lo = resc.shift - resc.scale / (1 + resc.margin)
    grid = default_grid(resc, lo + window, sigma_I, step)
    res = prescan(H, factory, sigma_I, grid, peak_tol, provider, two_Mj_values=[A % 2], propagate_errors=False,
                  threads=threads)
    if not res.states:
        raise PrescanError(f"no peak found within {window} MeV of the spectral lower bound for A = {A}")
    return float(res.states[0].energy)
