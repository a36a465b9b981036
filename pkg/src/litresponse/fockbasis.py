"""Single-particle basis, fixed-particle-number configuration spaces and
fermionic ladder-operator action on occupation bitstrings.

Bit ``q`` of a configuration word is set when orbital ``q`` is occupied.
Signs follow Jordan-Wigner parity counting with the orbital index as the
reference ordering.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

MAX_ORBITALS = 64


class BasisError(ValueError):
    """Malformed single-particle basis or basis file."""


class EmptySpaceError(ValueError):
    """Requested configuration space cannot hold any state."""


@dataclass(frozen=True)
class Orbital:
    index: int
    n: int
    l: int
    two_j: int
    two_mj: int

    def __post_init__(self):
        if self.index < 0 or self.n < 0 or self.l < 0:
            raise BasisError(f"negative quantum number in {self}")
        if self.two_j <= 0 or self.two_j % 2 != 1:
            raise BasisError(f"two_j must be odd and positive, got {self.two_j}")
        if abs(self.two_mj) > self.two_j or self.two_mj % 2 != 1:
            raise BasisError(f"two_mj={self.two_mj} incompatible with two_j={self.two_j}")

    @property
    def parity(self) -> int:
        return -1 if self.l % 2 else 1

    def label(self) -> str:
        spdf = "spdfghik"[self.l] if self.l < 8 else f"l{self.l}"
        return f"{self.n}{spdf}{self.two_j}/2,m={self.two_mj}/2"


@dataclass(frozen=True)
class SpBasis:
    orbitals: tuple

    def __post_init__(self):
        object.__setattr__(self, "orbitals", tuple(self.orbitals))
        if not self.orbitals:
            raise BasisError("basis needs at least one orbital")
        if len(self.orbitals) > MAX_ORBITALS:
            raise BasisError(f"at most {MAX_ORBITALS} orbitals supported")
        for pos, orb in enumerate(self.orbitals):
            if orb.index != pos:
                raise BasisError(f"orbital index {orb.index} at position {pos}")

    @property
    def n_sp(self) -> int:
        return len(self.orbitals)

    @property
    def two_mj(self) -> np.ndarray:
        return np.array([o.two_mj for o in self.orbitals], dtype=np.int64)

    @property
    def l_values(self) -> np.ndarray:
        return np.array([o.l for o in self.orbitals], dtype=np.int64)

    def __len__(self):
        return len(self.orbitals)

    def __getitem__(self, i):
        return self.orbitals[i]

    def total_two_mj(self, word: int) -> int:
        return sum(o.two_mj for o in self.orbitals if (word >> o.index) & 1)

    def config_parity(self, word: int) -> int:
        return -1 if sum(o.l for o in self.orbitals if (word >> o.index) & 1) % 2 else 1

    def max_two_mj(self, A: int) -> int:
        return sum(sorted((o.two_mj for o in self.orbitals), reverse=True)[:A])


def load_basis(path) -> SpBasis:
    """Read a basis file with one ``index n l 2j 2mj`` record per line."""
    orbitals = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) < 5:
            raise BasisError(f"{path}:{lineno}: expected 'index n l 2j 2mj', got {raw!r}")
        try:
            # columns past the fifth are opaque extra labels (e.g. isospin)
            idx, n, l, two_j, two_mj = (int(x) for x in fields[:5])
        except ValueError as exc:
            raise BasisError(f"{path}:{lineno}: {exc}") from None
        orbitals.append(Orbital(idx, n, l, two_j, two_mj))
    return SpBasis(tuple(orbitals))


def write_basis(basis: SpBasis, path) -> None:
    lines = ["# index n l 2j 2mj"]
    lines += [f"{o.index} {o.n} {o.l} {o.two_j} {o.two_mj}" for o in basis.orbitals]
    Path(path).write_text("\n".join(lines) + "\n")


def shell_basis(shells: Iterable[tuple]) -> SpBasis:
    """Build an m-scheme basis from ``(n, l, two_j)`` shells, m ascending inside each shell."""
    orbitals = []
    for n, l, two_j in shells:
        for two_mj in range(-two_j, two_j + 1, 2):
            orbitals.append(Orbital(len(orbitals), n, l, two_j, two_mj))
    return SpBasis(tuple(orbitals))


def sd_basis() -> SpBasis:
    """The 0d5/2 1s1/2 valence basis (eight orbitals)."""
    return shell_basis([(0, 2, 5), (1, 0, 1)])


@dataclass(frozen=True, eq=False)
class ConfigSpace:
    basis: SpBasis
    A: int
    two_Mj: Optional[int]
    configs: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.configs)

    def index(self, word: int) -> int:
        i = int(np.searchsorted(self.configs, np.uint64(word)))
        if i >= self.dim or int(self.configs[i]) != int(word):
            raise KeyError(f"configuration {word:#b} not in space")
        return i

    def __contains__(self, word) -> bool:
        try:
            self.index(int(word))
        except KeyError:
            return False
        return True

    def occupied(self, i: int) -> tuple:
        word = int(self.configs[i])
        return tuple(q for q in range(self.basis.n_sp) if (word >> q) & 1)

    def same_as(self, other: "ConfigSpace") -> bool:
        return (
            self is other
            or (self.basis == other.basis and self.A == other.A and self.two_Mj == other.two_Mj)
        )


def word_from_orbitals(orbitals: Iterable[int]) -> int:
    word = 0
    for q in orbitals:
        if (word >> q) & 1:
            raise ValueError(f"orbital {q} listed twice")
        word |= 1 << q
    return word


def enumerate_configs(basis: SpBasis, A: int, two_Mj: Optional[int] = None) -> ConfigSpace:
    """All ``A``-particle bit words, optionally restricted to total ``2*M_J``,
    in ascending word order."""
    n_sp = basis.n_sp
    if A < 0 or A > n_sp:
        raise EmptySpaceError(f"particle number {A} outside [0, {n_sp}]")
    mj = [o.two_mj for o in basis.orbitals]
    words = []
    for occ in combinations(range(n_sp), A):
        if two_Mj is not None and sum(mj[q] for q in occ) != two_Mj:
            continue
        words.append(word_from_orbitals(occ))
    configs = np.array(sorted(words), dtype=np.uint64)
    return ConfigSpace(basis, A, two_Mj, configs)


class StateVector:
    """Amplitudes over the configurations of a :class:`ConfigSpace`."""

    __slots__ = ("space", "amplitudes")

    def __init__(self, space: ConfigSpace, amplitudes):
        amps = np.array(amplitudes, dtype=np.complex128)
        if amps.shape != (space.dim,):
            raise ValueError(f"expected {space.dim} amplitudes, got shape {amps.shape}")
        if not np.all(np.isfinite(amps)):
            raise ValueError("non-finite amplitude")
        amps.setflags(write=False)
        self.space = space
        self.amplitudes = amps

    @classmethod
    def zeros(cls, space: ConfigSpace) -> "StateVector":
        return cls(space, np.zeros(space.dim, dtype=np.complex128))

    def norm2(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def normalized(self) -> "StateVector":
        nrm = np.sqrt(self.norm2())
        if nrm == 0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector(self.space, self.amplitudes / nrm)

    def vdot(self, other: "StateVector") -> complex:
        _check_same_space(self.space, other.space)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def __add__(self, other):
        _check_same_space(self.space, other.space)
        return StateVector(self.space, self.amplitudes + other.amplitudes)

    def __sub__(self, other):
        _check_same_space(self.space, other.space)
        return StateVector(self.space, self.amplitudes - other.amplitudes)

    def __mul__(self, scalar):
        return StateVector(self.space, self.amplitudes * scalar)

    __rmul__ = __mul__

    def __repr__(self):
        return f"StateVector(dim={self.space.dim}, norm2={self.norm2():.6g})"


def _check_same_space(a: ConfigSpace, b: ConfigSpace):
    if not a.same_as(b):
        raise ValueError("state vectors live in different configuration spaces")


def single_config_state(space: ConfigSpace, occ) -> StateVector:
    """Unit vector on one configuration; ``occ`` is a bit word or an iterable
    of occupied orbital indices."""
    word = int(occ) if isinstance(occ, (int, np.integer)) else word_from_orbitals(occ)
    try:
        i = space.index(word)
    except KeyError:
        raise ValueError(f"configuration {word:#b} is not in the space") from None
    amps = np.zeros(space.dim, dtype=np.complex128)
    amps[i] = 1.0
    return StateVector(space, amps)


def _check_ladder_indices(indices: Sequence[int], n_sp: int, what: str):
    for q in indices:
        if not 0 <= q < n_sp:
            raise IndexError(f"{what} index {q} outside basis of {n_sp} orbitals")
    if any(b <= a for a, b in zip(indices, indices[1:])):
        raise ValueError(f"{what} indices must be strictly ascending, got {list(indices)}")


def ladder_on_word(word: int, creations: Sequence[int], annihilations: Sequence[int]):
    """Apply ``b†_Q b_P`` to one bit word; returns ``(sign, new_word)`` or ``None``.

    ``b_P = a_w ... a_v a_u`` so ``a_u`` (lowest index) acts first; in
    ``b†_Q = a†_p a†_q ... a†_r`` the highest index acts first.
    """
    sign = 1
    for p in annihilations:
        bit = 1 << p
        if not word & bit:
            return None
        if bin(word & (bit - 1)).count("1") & 1:
            sign = -sign
        word ^= bit
    for q in reversed(creations):
        bit = 1 << q
        if word & bit:
            return None
        if bin(word & (bit - 1)).count("1") & 1:
            sign = -sign
        word |= bit
    return sign, word


def apply_ladder_string(state: StateVector, creations, annihilations) -> StateVector:
    """Return ``b†_Q b_P |state>``.

    When ``|Q| != |P|`` the result lives in the space with particle number
    ``A + |Q| - |P|`` (and shifted M_J filter, if any).
    """
    space = state.space
    basis = space.basis
    creations = list(creations)
    annihilations = list(annihilations)
    _check_ladder_indices(creations, basis.n_sp, "creation")
    _check_ladder_indices(annihilations, basis.n_sp, "annihilation")

    A_out = space.A + len(creations) - len(annihilations)
    if not 0 <= A_out <= basis.n_sp:
        raise EmptySpaceError(f"ladder string maps A={space.A} to A={A_out}")
    if len(creations) == len(annihilations) and (
        space.two_Mj is None
        or sum(basis[q].two_mj for q in creations) == sum(basis[p].two_mj for p in annihilations)
    ):
        out_space = space
    else:
        two_Mj = space.two_Mj
        if two_Mj is not None:
            two_Mj += sum(basis[q].two_mj for q in creations)
            two_Mj -= sum(basis[p].two_mj for p in annihilations)
        out_space = enumerate_configs(basis, A_out, two_Mj)

    out = np.zeros(out_space.dim, dtype=np.complex128)
    for i, amp in enumerate(state.amplitudes):
        if amp == 0:
            continue
        hit = ladder_on_word(int(space.configs[i]), creations, annihilations)
        if hit is None:
            continue
        sign, new_word = hit
        out[out_space.index(new_word)] += sign * amp
    return StateVector(out_space, out)


class SourceFileError(ValueError):
    pass


def parse_source_state(lines, basis: SpBasis, A: Optional[int] = None, source="<string>") -> StateVector:
    """Lines ``re im | orbital indices``; ``#`` starts a comment.

    The state lives in the full ``A``-particle space (``A`` defaults to the
    occupation count of the first line).  Repeated configurations add up.
    """
    terms = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.count("|") != 1:
            raise SourceFileError(f"{source}:{lineno}: expected 're im | orbitals', got {raw.strip()!r}")
        amp, occ = (f.strip() for f in line.split("|"))
        try:
            parts = [float(t) for t in amp.split()]
            orbs = [int(t) for t in occ.split()]
        except ValueError:
            raise SourceFileError(f"{source}:{lineno}: cannot parse {raw.strip()!r}") from None
        if len(parts) != 2:
            raise SourceFileError(f"{source}:{lineno}: amplitude needs real and imaginary parts")
        if len(set(orbs)) != len(orbs):
            raise SourceFileError(f"{source}:{lineno}: repeated orbital index")
        if any(not 0 <= o < basis.n_sp for o in orbs):
            raise SourceFileError(f"{source}:{lineno}: orbital index outside basis of {basis.n_sp}")
        terms.append((lineno, complex(parts[0], parts[1]), orbs))
    if not terms:
        raise SourceFileError(f"{source}: no source-state lines")
    if A is None:
        A = len(terms[0][2])
    space = enumerate_configs(basis, A)
    amps = np.zeros(space.dim, dtype=np.complex128)
    for lineno, c, orbs in terms:
        if len(orbs) != A:
            raise SourceFileError(f"{source}:{lineno}: {len(orbs)} orbitals occupied, expected A = {A}")
        amps[space.index(word_from_orbitals(orbs))] += c
    return StateVector(space, amps)


def load_source_state(path, basis: SpBasis, A: Optional[int] = None) -> StateVector:
    path = Path(path)
    return parse_source_state(path.read_text().splitlines(), basis, A, source=str(path))


def write_source_state(state: StateVector, path, header: Optional[str] = None) -> None:
    lines = [f"# {h}" for h in header.splitlines()] if header else []
    lines.append("# re im | occupied orbital indices")
    for i, c in enumerate(state.amplitudes):
        if c != 0:
            occ = " ".join(map(str, state.space.occupied(i)))
            lines.append(f"{c.real:.12g} {c.imag:.12g} | {occ}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
