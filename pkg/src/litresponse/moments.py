"""Interchangeable moment sources: classical recursion, walk operator, or
walk operator followed by Hadamard-test shot noise."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .blockenc import ShotNoiseModel, build_dilation, noisy_moments, walk_moments, walk_operator
from .chebyshev import MomentSet, moments_from_operator
from .fockbasis import ConfigSpace, StateVector, enumerate_configs
from .hamiltonian import (
    DEFAULT_DENSE_CAP,
    Rescaling,
    SecondQuantizedH,
    compute_rescaling,
    rescaled_operator,
)

SOURCES = ("recursion", "walk", "walk+noise")


def problem_rescaling(H: SecondQuantizedH, A: int, margin: float = 0.01, cap: int = DEFAULT_DENSE_CAP) -> Rescaling:
    """One rescaling valid for every M_J block of the ``A``-particle space."""
    return compute_rescaling(H, enumerate_configs(H.basis, A), margin=margin, cap=cap)


class MomentProvider:
    """Computes moment sets for ``(space, source state)`` pairs.

    Operators and dilations are cached per space.  With ``method="walk+noise"``
    each call draws from its own stream, seeded from ``noise.seed`` and the
    caller's ``tag`` so results do not depend on call order.
    """

    def __init__(
        self,
        H: SecondQuantizedH,
        rescaling: Rescaling,
        method: str = "recursion",
        noise: Optional[ShotNoiseModel] = None,
        cap: int = DEFAULT_DENSE_CAP,
    ):
        if method not in SOURCES:
            raise ValueError(f"unknown moment source {method!r}; choose from {SOURCES}")
        if method == "walk+noise" and noise is None:
            raise ValueError("walk+noise needs a ShotNoiseModel")
        self.H = H
        self.rescaling = rescaling
        self.method = method
        self.noise = noise
        self.cap = cap
        self._ops: dict = {}
        self._walks: dict = {}

    def _key(self, space: ConfigSpace):
        return (space.A, space.two_Mj)

    def operator(self, space: ConfigSpace):
        key = self._key(space)
        if key not in self._ops:
            self._ops[key] = rescaled_operator(self.H, space, self.rescaling)
        return self._ops[key]

    def walk(self, space: ConfigSpace):
        key = self._key(space)
        if key not in self._walks:
            enc = build_dilation(self.H, space, self.rescaling, self.cap)
            self._walks[key] = (walk_operator(enc), enc.H_prime)
        return self._walks[key]

    def stream_seed(self, tag) -> int:
        tag = tuple(int(t) & 0xFFFFFFFF for t in np.atleast_1d(tag))
        ss = np.random.SeedSequence(entropy=int(self.noise.seed), spawn_key=tag)
        return int(ss.generate_state(1, dtype=np.uint64)[0])

    def __call__(self, space: ConfigSpace, omega: StateVector, K_max: int, tag=(0,)) -> MomentSet:
        if self.method == "recursion":
            mu = moments_from_operator(self.operator(space), omega.amplitudes, K_max)
            return MomentSet(mu, self.rescaling, omega.norm2(), "recursion")
        W, Hp = self.walk(space)
        ms = walk_moments(W, omega, K_max, self.rescaling, check_with=Hp)
        if self.method == "walk":
            return ms
        model = ShotNoiseModel(self.noise.shots_per_moment, self.stream_seed(tag))
        out = noisy_moments(ms, model)
        out.meta["seed"] = int(self.noise.seed)
        out.meta["stream_tag"] = [int(t) for t in np.atleast_1d(tag)]
        return out

    def moment_variance(self, moments: MomentSet) -> np.ndarray:
        """Shot-noise variance of the real part of each moment (zero when noiseless)."""
        if self.method != "walk+noise":
            return np.zeros(len(moments.moments))
        n2 = moments.source_norm2
        mu = np.clip(moments.moments.real / n2, -1.0, 1.0) if n2 else np.zeros(len(moments.moments))
        var = n2 ** 2 * (1.0 - mu ** 2) / self.noise.shots_per_moment
        var[0] = 0.0
        return var
