"""Lorentz integral ``L(sigma) = ||(sigma - H)^{-1} Omega||^2``.

Three routes: the Chebyshev bilinear form over moments, a dense linear solve,
and (in :mod:`litresponse.fci`) the spectral sum.  All public values are in
MeV^-2.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .chebyshev import MomentError, MomentSet, coeffs, jackson_damping, sigma_prime, truncation_order
from .fci import lorentz_sum
from .fockbasis import ConfigSpace, StateVector
from .hamiltonian import DEFAULT_DENSE_CAP, SecondQuantizedH, assemble_dense

log = logging.getLogger(__name__)


class NegativeContinuumError(ValueError):
    """Subtracting the bound-state part left a clearly negative remainder."""


@dataclass(frozen=True)
class SigmaPoint:
    sigma_R: float
    sigma_I: float
    x: float = 0.0

    def __post_init__(self):
        if not self.sigma_I > 0:
            raise ValueError("sigma_I must be positive")

    @property
    def complex(self) -> complex:
        return complex(self.x + self.sigma_R, self.sigma_I)


@dataclass(frozen=True, eq=False)
class LorentzCurve:
    sigma_R: np.ndarray
    sigma_I: np.ndarray
    x: np.ndarray
    L: np.ndarray
    K_used: np.ndarray

    @classmethod
    def build(cls, sigma_R, sigma_I, x, L, K_used=0) -> "LorentzCurve":
        sigma_R = np.atleast_1d(np.asarray(sigma_R, dtype=float))
        n = len(sigma_R)
        order = np.argsort(sigma_R, kind="stable")

        def col(v, dtype=float):
            return np.broadcast_to(np.asarray(v, dtype=dtype), (n,))[order].copy()

        return cls(sigma_R[order], col(sigma_I), col(x), col(L), col(K_used, int))

    def __len__(self):
        return len(self.sigma_R)

    def points(self):
        return [SigmaPoint(r, i, x) for r, i, x in zip(self.sigma_R, self.sigma_I, self.x)]

    def with_L(self, L) -> "LorentzCurve":
        return LorentzCurve(self.sigma_R, self.sigma_I, self.x, np.asarray(L, dtype=float), self.K_used)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sigma_R", "sigma_I", "x", "L", "K_used"])
            for r, i, x, L, K in zip(self.sigma_R, self.sigma_I, self.x, self.L, self.K_used):
                w.writerow([f"{r:.12g}", f"{i:.12g}", f"{x:.12g}", f"{L:.12g}", int(K)])

    @classmethod
    def from_csv(cls, path) -> "LorentzCurve":
        data = np.genfromtxt(path, delimiter=",", names=True, ndmin=1)
        return cls.build(data["sigma_R"], data["sigma_I"], data["x"], data["L"], data["K_used"].astype(int))


def _bilinear(mu: np.ndarray, F: np.ndarray) -> np.ndarray:
    """``sum_{k,j} conj(f_k) f_j (mu_{j+k} + mu_{|j-k|}) / 2`` for each row of ``F``.

    Direct O(K^2) form, kept as a reference for :func:`pair_weights`.
    """
    K = F.shape[-1]
    idx = np.arange(K)
    M = 0.5 * (mu[idx[:, None] + idx[None, :]] + mu[np.abs(idx[:, None] - idx[None, :])])
    return np.real(np.einsum("ik,ik->i", F.conj(), F @ M))


def pair_weights(F: np.ndarray) -> np.ndarray:
    """Weights ``w_n`` with ``sum_{k,j} Re(conj(f_k) f_j) (mu_{j+k} + mu_{|j-k|}) / 2 = sum_n w_n mu_n``.

    Rows of ``F`` (length K, zero-padded entries allowed) map to rows of
    length ``2K - 1``.  Sums over ``k + j = n`` and ``|k - j| = n`` are a
    convolution and a correlation, done by FFT.
    """
    F = np.atleast_2d(F)
    K = F.shape[-1]
    N = 2 * K - 1
    nfft = 1 << max(N - 1, 1).bit_length()
    a = np.fft.fft(F.conj(), nfft)
    b = np.fft.fft(F, nfft)
    conv = np.fft.ifft(a * b)[:, :N].real
    corr = np.fft.ifft(np.conj(b) * b)[:, :K].real  # c_n = sum_j conj(f_{j+n}) f_j, real part
    diff = np.zeros_like(conv)
    diff[:, 0] = corr[:, 0]
    diff[:, 1:K] = 2.0 * corr[:, 1:K]
    return 0.5 * (conv + diff)


def _truncated_coeffs(z, Ks, damping=False):
    K = int(Ks.max())
    F = coeffs(z, K)
    if damping:
        for K_i in np.unique(Ks):
            sel = Ks == K_i
            F[sel, :K_i] *= jackson_damping(int(K_i))
    F[np.arange(K)[None, :] >= Ks[:, None]] = 0.0
    return F


def li_from_moments(
    moments: MomentSet,
    sigma_R,
    sigma_I,
    x=0.0,
    K=None,
    tol: float = 1e-12,
    damping: bool = False,
    return_K: bool = False,
):
    """Lorentz integral assembled from Chebyshev moments.

    ``K`` is the number of expansion terms; by default it is chosen per point
    by :func:`truncation_order`.  Moments up to ``2K-2`` must be present.
    Imaginary parts of the moments are dropped: they vanish for Hermitian H.
    """
    scalar = np.ndim(sigma_R) == 0 and np.ndim(sigma_I) == 0
    sR, sI = np.broadcast_arrays(np.atleast_1d(np.asarray(sigma_R, float)), np.atleast_1d(np.asarray(sigma_I, float)))
    resc = moments.rescaling
    z = sigma_prime(sR, sI, x, resc)
    if K is None:
        Ks = np.atleast_1d(truncation_order(sR, sI, x, resc, tol))
    else:
        Ks = np.full(len(sR), int(K))
    need = 2 * int(Ks.max()) - 2
    if need > moments.K_max:
        raise MomentError(
            f"Lorentz integral needs moments up to order {need}, only {moments.K_max} available"
        )
    mu = moments.moments.real
    out = np.empty(len(sR))
    for start in range(0, len(sR), _CHUNK):
        sl = slice(start, start + _CHUNK)
        W = pair_weights(_truncated_coeffs(z[sl], Ks[sl], damping))
        out[sl] = W @ mu[: W.shape[1]]
    out /= resc.scale ** 2
    if scalar:
        return (float(out[0]), int(Ks[0])) if return_K else float(out[0])
    return (out, Ks) if return_K else out


_CHUNK = 256


def required_K_max(sigma_R, sigma_I, x, rescaling, tol: float = 1e-12) -> int:
    """Highest moment order needed to evaluate every given sigma point."""
    Ks = np.atleast_1d(truncation_order(sigma_R, sigma_I, x, rescaling, tol))
    return max(2 * int(Ks.max()) - 2, 0)


def li_curve(moments: MomentSet, sigma_R, sigma_I, x=0.0, tol: float = 1e-12, damping=False) -> LorentzCurve:
    L, Ks = li_from_moments(moments, np.asarray(sigma_R, float), sigma_I, x, tol=tol,
                            damping=damping, return_K=True)
    return LorentzCurve.build(sigma_R, sigma_I, x, L, Ks)


def li_direct_solve(H: SecondQuantizedH, space: ConfigSpace, omega: StateVector, sigma_R, sigma_I, x=0.0,
                    cap: int = DEFAULT_DENSE_CAP):
    """``||psi||^2`` with ``(sigma - H) psi = Omega`` solved densely."""
    M = assemble_dense(H, space, cap)
    return li_direct_matrix(M, omega.amplitudes, sigma_R, sigma_I, x)


def li_direct_matrix(M, omega_amps, sigma_R, sigma_I, x=0.0):
    if np.any(np.asarray(sigma_I) <= 0):
        raise ValueError("sigma_I must be positive")
    scalar = np.ndim(sigma_R) == 0 and np.ndim(sigma_I) == 0
    sR, sI = np.broadcast_arrays(np.atleast_1d(np.asarray(sigma_R, float)), np.atleast_1d(np.asarray(sigma_I, float)))
    dim = M.shape[0]
    ident = np.eye(dim)
    out = np.empty(len(sR))
    for i, (r, im) in enumerate(zip(sR, sI)):
        psi = np.linalg.solve(complex(x + r, im) * ident - M, omega_amps)
        out[i] = float(np.vdot(psi, psi).real)
    return float(out[0]) if scalar else out


def discrete_part(energies, amplitudes, sigma_R, sigma_I, x=0.0):
    """Bound-state sum ``sum_n R_n / ((sigma_R - e_n)^2 + sigma_I^2)``, ``e_n = E_n - x``."""
    if len(np.atleast_1d(energies)) == 0:
        if np.any(np.asarray(sigma_I) <= 0):
            raise ValueError("sigma_I must be positive")
        return np.zeros(np.shape(sigma_R)) if np.ndim(sigma_R) else 0.0
    val = lorentz_sum(energies, amplitudes, sigma_R, sigma_I, x)
    return float(val) if np.ndim(val) == 0 else val


def continuum_part(curve: LorentzCurve, energies, amplitudes, rel_tol: float = 1e-8) -> LorentzCurve:
    """``L_C = L - L_D`` pointwise.

    Small negative remainders (below ``rel_tol * max L``) are clipped; a
    remainder below ``-10`` times that is an error.
    """
    LD = np.array([
        discrete_part(energies, amplitudes, r, i, x)
        for r, i, x in zip(curve.sigma_R, curve.sigma_I, curve.x)
    ]) if len(np.atleast_1d(energies)) else np.zeros(len(curve))
    LC = curve.L - LD
    tol = rel_tol * float(np.max(curve.L, initial=0.0))
    if np.any(LC < -10 * tol):
        worst = int(np.argmin(LC))
        raise NegativeContinuumError(
            f"L - L_D = {LC[worst]:.3e} at sigma_R={curve.sigma_R[worst]:.4g}; "
            "bound-state energies or amplitudes are inconsistent with the curve"
        )
    if np.any(LC < -tol):
        log.warning("clipping negative continuum remainder down to %.3e", LC.min())
    return curve.with_L(np.clip(LC, 0.0, None))


def li_moment_weights(sigma_R, sigma_I, x, rescaling, K) -> np.ndarray:
    """Gradient ``dL/dmu_n`` (rows: sigma points, columns: ``n = 0..2K-2``).

    ``K`` is a common term count or one per point (shorter rows are
    zero-padded).  ``L`` is linear in the moments, so this matrix also
    propagates moment noise: ``Cov(L) = G diag(var mu) G^T``.
    """
    sR, sI = np.broadcast_arrays(np.atleast_1d(np.asarray(sigma_R, float)), np.atleast_1d(np.asarray(sigma_I, float)))
    Ks = np.broadcast_to(np.asarray(K, dtype=int), sR.shape)
    F = _truncated_coeffs(sigma_prime(sR, sI, x, rescaling), Ks)
    return pair_weights(F) / rescaling.scale ** 2
