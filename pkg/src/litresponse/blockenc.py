"""Matrix-level stand-in for the quantum path.

``build_dilation`` embeds ``H'`` as the top-left block of the unitary
``[[H', S], [S, -H']]`` with ``S = sqrt(1 - H'^2)``.  Reflecting the ancilla
turns it into a walk operator ``W`` whose powers satisfy
``<Omega,0|W^k|Omega,0> = <Omega|T_k(H')|Omega>``.  Moments can then be
passed through a Hadamard-test shot sampler.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .chebyshev import MomentSet
from .fockbasis import StateVector
from .hamiltonian import DEFAULT_DENSE_CAP, Rescaling, SecondQuantizedH, assemble_dense

CONTRACT_TOL = 1e-8


class ContractViolation(RuntimeError):
    """The dilation does not block-encode ``H'`` (or is not unitary)."""


@dataclass(frozen=True, eq=False)
class BlockEncoding:
    unitary: np.ndarray
    H_prime: np.ndarray

    @property
    def dim(self) -> int:
        return self.H_prime.shape[0]

    def block(self) -> np.ndarray:
        return self.unitary[: self.dim, : self.dim]

    def element(self, g: int, f: int) -> complex:
        """``<G,0|U|F,0>`` for basis configurations ``g`` and ``f``."""
        return complex(self.unitary[g, f])


@dataclass(frozen=True, eq=False)
class WalkOperator:
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0] // 2


def dilation_from_matrix(Hp: np.ndarray, tol: float = CONTRACT_TOL) -> BlockEncoding:
    Hp = np.asarray(Hp)
    w, V = np.linalg.eigh(Hp)
    if np.max(np.abs(w), initial=0.0) > 1.0 + 1e-12:
        raise ContractViolation(f"||H'|| = {np.max(np.abs(w)):.6g} exceeds 1")
    gap = 1.0 - w * w
    if np.any(gap < 0.0):
        gap = np.clip(gap, 0.0, None)
    if np.any(gap == 0.0) and np.any(np.abs(w) >= 1.0):
        raise ContractViolation("eigenvalue of modulus 1: use a rescaling margin > 0")
    S = (V * np.sqrt(gap)) @ V.conj().T
    if np.isrealobj(Hp):
        S = S.real
    U = np.block([[Hp, S], [S, -Hp]])
    enc = BlockEncoding(U, Hp)
    _check_contract(enc, tol)
    return enc


def _check_contract(enc: BlockEncoding, tol: float):
    U = enc.unitary
    unit_err = np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0])))
    block_err = np.max(np.abs(enc.block() - enc.H_prime), initial=0.0)
    if unit_err > tol or block_err > tol:
        raise ContractViolation(
            f"block-encoding contract violated (unitarity {unit_err:.2e}, block {block_err:.2e})"
        )


def build_dilation(H: SecondQuantizedH, space, rescaling: Rescaling, cap: int = DEFAULT_DENSE_CAP) -> BlockEncoding:
    M = assemble_dense(H, space, cap)
    Hp = (M - rescaling.shift * np.eye(space.dim)) / rescaling.scale
    return dilation_from_matrix(Hp)


def walk_operator(enc: BlockEncoding) -> WalkOperator:
    """``W = (Z_anc ⊗ 1) U`` ``= [[H', S], [-S, H']]``."""
    d = enc.dim
    reflect = np.ones(2 * d)
    reflect[d:] = -1.0
    return WalkOperator(reflect[:, None] * enc.unitary)


def walk_moments(walk: WalkOperator, omega: StateVector, K_max: int, rescaling: Rescaling,
                 check_with=None) -> MomentSet:
    """``mu_k = <Omega,0|W^k|Omega,0>`` by repeated application of ``W``.

    If ``check_with`` (the encoded ``H'``) is given, ``mu_1`` is checked
    against ``<Omega|H'|Omega>`` and a mismatch beyond 1e-8 raises.
    """
    d = walk.dim
    if omega.space.dim != d:
        raise ValueError("source state does not match the walk operator dimension")
    v0 = np.zeros(2 * d, dtype=np.complex128)
    v0[:d] = omega.amplitudes
    W = walk.matrix
    if np.isrealobj(W) and not np.any(v0.imag):
        v0 = v0.real.copy()
    top = v0[:d]
    mu = np.empty(K_max + 1, dtype=np.complex128)
    v = v0
    for k in range(K_max + 1):
        mu[k] = np.vdot(top, v[:d])
        if k < K_max:
            v = W @ v
    if check_with is not None and K_max >= 1:
        expect = np.vdot(top, np.asarray(check_with) @ top)
        if abs(mu[1] - expect) > CONTRACT_TOL * max(1.0, abs(expect)):
            raise ContractViolation(f"mu_1 = {mu[1]} but <Omega|H'|Omega> = {expect}")
    return MomentSet(mu, rescaling, omega.norm2(), "walk")


@dataclass(frozen=True)
class ShotNoiseModel:
    shots_per_moment: int
    seed: int = 0

    def __post_init__(self):
        if self.shots_per_moment < 1:
            raise ValueError("need at least one shot per moment")


def _estimate(p, shots, rng):
    if np.any(p < -1e-12) or np.any(p > 1 + 1e-12):
        raise ValueError("Hadamard-test probability outside [0, 1]; moment bound violated upstream")
    zeros = rng.binomial(shots, np.clip(p, 0.0, 1.0))
    return 2.0 * zeros / shots - 1.0


def hadamard_sample(mu_true, model: ShotNoiseModel, rng=None):
    """Shot-noise estimate of one (or an array of) normalized moment(s).

    Re part: ``P(0) = (1 + Re mu)/2``; Im part uses the ``S†`` variant with
    ``P(0) = (1 + Im mu)/2``.  Deterministic for a fixed seed.
    """
    if rng is None:
        rng = np.random.default_rng(model.seed)
    mu = np.asarray(mu_true, dtype=np.complex128)
    re = _estimate((1.0 + mu.real) / 2.0, model.shots_per_moment, rng)
    im = _estimate((1.0 + mu.imag) / 2.0, model.shots_per_moment, rng)
    est = np.asarray(re + 1j * im)
    return complex(est) if est.ndim == 0 else est


def noisy_moments(moments: MomentSet, model: ShotNoiseModel) -> MomentSet:
    """Replace ``mu_k`` (k >= 1) by Hadamard-test estimates.

    Sampling acts on ``mu_k / mu_0`` (the moments of the normalized source);
    ``mu_0`` is known exactly from the source normalization.
    """
    norm2 = moments.source_norm2
    if norm2 == 0:
        return replace(moments, source="walk+noise",
                       meta={**moments.meta, "shots": model.shots_per_moment, "seed": model.seed})
    rng = np.random.default_rng(model.seed)
    est = np.empty_like(moments.moments)
    est[0] = moments.moments[0]
    est[1:] = norm2 * hadamard_sample(moments.moments[1:] / norm2, model, rng)
    meta = {**moments.meta, "shots": model.shots_per_moment, "seed": model.seed}
    return MomentSet(est, moments.rescaling, norm2, "walk+noise", meta)
