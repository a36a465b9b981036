"""Exact diagonalization oracle: full spectrum, response amplitudes and the
Lorentz integral in spectral form."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fockbasis import ConfigSpace, StateVector
from .hamiltonian import DEFAULT_DENSE_CAP, SecondQuantizedH, assemble_dense, is_hermitian

DEGENERACY_WINDOW = 1e-8


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    space: ConfigSpace
    energies: np.ndarray
    vectors: np.ndarray  # columns are eigenvectors

    def state(self, n: int) -> StateVector:
        return StateVector(self.space, self.vectors[:, n])

    def multiplets(self, window: float = DEGENERACY_WINDOW):
        """Group levels closer than ``window``; returns ``[(energy, degeneracy), ...]``."""
        groups = []
        start = 0
        E = self.energies
        for n in range(1, len(E) + 1):
            if n == len(E) or E[n] - E[n - 1] > window:
                groups.append((float(np.mean(E[start:n])), n - start))
                start = n
        return groups


@dataclass(frozen=True)
class ExactResponse:
    energies: np.ndarray
    amplitudes: np.ndarray

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(
            {"E_n": [float(e) for e in self.energies], "R_n": [float(r) for r in self.amplitudes]},
            indent=1,
        ))

    @classmethod
    def from_json(cls, path) -> "ExactResponse":
        d = json.loads(Path(path).read_text())
        return cls(np.array(d["E_n"]), np.array(d["R_n"]))


def diagonalize_matrix(M, space: ConfigSpace) -> EigenDecomposition:
    if not is_hermitian(M):
        raise ValueError("matrix is not Hermitian")
    if np.isrealobj(M):
        w, v = np.linalg.eigh(M)
    else:
        w, v = np.linalg.eigh(np.asarray(M, dtype=np.complex128))
    return EigenDecomposition(space, w, v)


def diagonalize(H: SecondQuantizedH, space: ConfigSpace, cap: int = DEFAULT_DENSE_CAP) -> EigenDecomposition:
    return diagonalize_matrix(assemble_dense(H, space, cap), space)


def exact_response(decomp: EigenDecomposition, omega: StateVector) -> ExactResponse:
    """``R_n = |<Psi_n|Omega>|^2`` for every eigenstate."""
    if not omega.space.same_as(decomp.space):
        raise ValueError("source state lives in a different space")
    overlaps = decomp.vectors.conj().T @ omega.amplitudes
    return ExactResponse(decomp.energies.copy(), np.abs(overlaps) ** 2)


def lorentz_sum(energies, amplitudes, sigma_R, sigma_I, x=0.0):
    """``sum_n R_n / ((sigma_R - (E_n - x))^2 + sigma_I^2)``, broadcast over ``sigma_R``."""
    if np.any(np.asarray(sigma_I) <= 0):
        raise ValueError("sigma_I must be positive")
    e = np.asarray(energies, dtype=float) - x
    sR = np.asarray(sigma_R, dtype=float)[..., None]
    sI = np.asarray(sigma_I, dtype=float)[..., None]
    return np.sum(np.asarray(amplitudes, dtype=float) / ((sR - e) ** 2 + sI ** 2), axis=-1)


def exact_lorentz(decomp: EigenDecomposition, omega: StateVector, sigma_R, sigma_I, x=0.0):
    resp = exact_response(decomp, omega)
    return lorentz_sum(resp.energies, resp.amplitudes, sigma_R, sigma_I, x)
