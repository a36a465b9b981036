"""Chebyshev moments of the rescaled Hamiltonian and the expansion
coefficients of the resolvent ``(z - H')^{-1} = sum_k f_k(z) T_k(H')``."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .fockbasis import StateVector
from .hamiltonian import Rescaling, SecondQuantizedH, compute_rescaling, rescaled_operator

MOMENT_FORMAT = "litresponse-moments/1"
K_FLOOR = 8
K_CAP = 6000


class MomentError(RuntimeError):
    """Moment generation produced unusable values."""


@dataclass(frozen=True, eq=False)
class MomentSet:
    """``mu_k = <Omega|T_k(H')|Omega>`` for ``k = 0..K_max``.

    ``source`` names the path that produced the moments (``recursion``,
    ``walk`` or ``walk+noise``); ``meta`` carries shot settings and the like.
    """

    moments: np.ndarray
    rescaling: Rescaling
    source_norm2: float
    source: str = "recursion"
    meta: dict = field(default_factory=dict)

    @property
    def K_max(self) -> int:
        return len(self.moments) - 1

    def truncated(self, K_max: int) -> "MomentSet":
        if K_max > self.K_max:
            raise MomentError(f"only {self.K_max + 1} moments available, need {K_max + 1}")
        return replace(self, moments=self.moments[: K_max + 1].copy())

    def __add__(self, other: "MomentSet") -> "MomentSet":
        """Moments are linear in the source projector, so per-source moment
        sets can be pooled before assembling a summed Lorentz integral."""
        if self.rescaling != other.rescaling:
            raise ValueError("cannot pool moments built with different rescalings")
        K = min(self.K_max, other.K_max)
        return MomentSet(
            self.moments[: K + 1] + other.moments[: K + 1],
            self.rescaling,
            self.source_norm2 + other.source_norm2,
            self.source,
            dict(self.meta),
        )

    def to_json(self, path=None) -> str:
        doc = {
            "format": MOMENT_FORMAT,
            "source": self.source,
            "K_max": self.K_max,
            "source_norm2": float(self.source_norm2),
            "rescaling": self.rescaling.as_dict(),
            **self.meta,
            "moments": [
                {"k": k, "re": float(m.real), "im": float(m.imag)}
                for k, m in enumerate(self.moments)
            ],
        }
        text = json.dumps(doc, indent=1)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    @classmethod
    def from_json(cls, src) -> "MomentSet":
        text = Path(src).read_text() if not str(src).lstrip().startswith("{") else str(src)
        doc = json.loads(text)
        if doc.get("format") != MOMENT_FORMAT:
            raise ValueError(f"not a moment file (format={doc.get('format')!r})")
        entries = sorted(doc["moments"], key=lambda e: e["k"])
        if [e["k"] for e in entries] != list(range(len(entries))):
            raise ValueError("moment indices must be contiguous from 0")
        mu = np.array([complex(e["re"], e["im"]) for e in entries])
        meta = {
            k: v for k, v in doc.items()
            if k not in ("format", "source", "K_max", "source_norm2", "rescaling", "moments")
        }
        return cls(mu, Rescaling(**doc["rescaling"]), float(doc["source_norm2"]), doc["source"], meta)


def chebyshev_vectors(Hp, v0, K_max: int):
    """Yield ``t_k = T_k(H') v0`` for ``k = 0..K_max``."""
    t_prev = np.array(v0)
    yield t_prev
    if K_max == 0:
        return
    t = Hp @ t_prev
    yield t
    for _ in range(2, K_max + 1):
        t_prev, t = t, 2.0 * (Hp @ t) - t_prev
        yield t


def moments_from_operator(Hp, omega_amps, K_max: int) -> np.ndarray:
    if K_max < 0:
        raise ValueError("K_max must be non-negative")
    v0 = np.asarray(omega_amps)
    if np.isrealobj(Hp.data if hasattr(Hp, "data") else Hp) and not np.any(v0.imag):
        v0 = v0.real.copy()
    mu = np.empty(K_max + 1, dtype=np.complex128)
    for k, t in enumerate(chebyshev_vectors(Hp, v0, K_max)):
        mu[k] = np.vdot(v0, t)
    if not np.all(np.isfinite(mu)):
        raise MomentError("non-finite moment; the rescaling does not bound the spectrum")
    return mu


def compute_moments(
    H: SecondQuantizedH,
    space,
    omega: StateVector,
    K_max: int,
    rescaling: Optional[Rescaling] = None,
) -> MomentSet:
    """Moments by the three-term recursion ``T_{k+1} = 2H'T_k - T_{k-1}``."""
    if not omega.space.same_as(space):
        raise ValueError("source state lives in a different space")
    if rescaling is None:
        rescaling = compute_rescaling(H, space)
    Hp = rescaled_operator(H, space, rescaling)
    mu = moments_from_operator(Hp, omega.amplitudes, K_max)
    return MomentSet(mu, rescaling, omega.norm2(), "recursion")


def sigma_prime(sigma_R, sigma_I, x, rescaling: Rescaling):
    """Physical ``x + sigma_R + i sigma_I`` mapped into rescaled units."""
    if np.any(np.asarray(sigma_I) <= 0):
        raise ValueError("sigma_I must be positive")
    z = np.asarray(x, dtype=float) + np.asarray(sigma_R, dtype=float) + 1j * np.asarray(sigma_I, dtype=float)
    return (z - rescaling.shift) / rescaling.scale


def contracting_root(z):
    """``sqrt(z^2 - 1)`` on the branch with ``|z - sqrt(z^2 - 1)| < 1``."""
    z = np.asarray(z, dtype=np.complex128)
    root = np.sqrt(z * z - 1.0)
    flip = np.abs(z - root) > 1.0
    root = np.where(flip, -root, root)
    ratio = np.abs(z - root)
    if np.any(ratio >= 1.0):
        raise ArithmeticError("no contracting branch; sigma must have a nonzero imaginary part")
    return root


def coeffs(z, K: int) -> np.ndarray:
    """``f_k(z)`` for ``k = 0..K-1``; shape ``z.shape + (K,)``."""
    z = np.asarray(z, dtype=np.complex128)
    root = contracting_root(z)
    rho = (z - root)[..., None]
    k = np.arange(K)
    f = (2.0 / root)[..., None] * rho ** k
    f[..., 0] *= 0.5
    return f


def coeff_f(sigma_R, sigma_I, x, rescaling: Rescaling, k: int):
    z = sigma_prime(sigma_R, sigma_I, x, rescaling)
    root = contracting_root(z)
    return (2.0 - (k == 0)) / root * (z - root) ** k


def ratio(sigma_R, sigma_I, x, rescaling: Rescaling):
    z = sigma_prime(sigma_R, sigma_I, x, rescaling)
    return np.abs(z - contracting_root(z))


def truncation_order(sigma_R, sigma_I, x, rescaling: Rescaling, tol: float = 1e-12, K_cap: int = K_CAP):
    """Smallest ``K`` with ``ratio**K / |sqrt(z^2-1)| <= tol``, clamped to ``[8, K_cap]``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    z = sigma_prime(sigma_R, sigma_I, x, rescaling)
    root = contracting_root(z)
    r = np.abs(z - root)
    K = np.ceil((np.log(tol) + np.log(np.abs(root))) / np.log(r))
    K = np.clip(np.nan_to_num(K, nan=K_FLOOR), K_FLOOR, K_cap).astype(int)
    return int(K) if K.ndim == 0 else K


def jackson_damping(K: int) -> np.ndarray:
    """Jackson kernel factors ``g_k``, ``k = 0..K-1``."""
    N = K + 1
    k = np.arange(K)
    q = np.pi / N
    return ((N - k) * np.cos(q * k) + np.sin(q * k) / np.tan(q)) / N
