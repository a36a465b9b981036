"""Synthetic sd-shell test problem.

A rotationally invariant two-body Hamiltonian for identical nucleons in
the 0d5/2 1s1/2 orbitals, assembled from J-coupled matrix elements of
realistic magnitude.  The numbers are illustrative and do not come from any
fitted interaction; they only need to give a non-degenerate, J-resolved
spectrum with several states bound below the one-nucleon threshold.
"""

from __future__ import annotations

from importlib import resources
from math import sqrt

import numpy as np

from .angular import clebsch_gordan
from .fockbasis import SpBasis, StateVector, enumerate_configs, load_basis, sd_basis, word_from_orbitals
from .hamiltonian import Monomial, SecondQuantizedH, hermitize, load_monomials

D5, S1 = (0, 2, 5), (1, 0, 1)

# (n, l, two_j) -> single-particle energy, MeV
SD_SPE = {D5: -2.93, S1: -1.49}

# J -> (channels, symmetric matrix of <ab;J|V|cd;J>), MeV
SD_TBME = {
    0: ([(D5, D5), (S1, S1)], [[-1.16, -1.49], [-1.49, -1.26]]),
    2: ([(D5, D5), (D5, S1)], [[-1.92, -0.05], [-0.05, 1.90]]),
    3: ([(D5, S1)], [[0.09]]),
    4: ([(D5, D5)], [[0.27]]),
}


def _shell_orbitals(basis: SpBasis, shell):
    return [o for o in basis.orbitals if (o.n, o.l, o.two_j) == shell]


def _pair_creation(basis, a, b, two_J, two_M):
    """Terms ``(coef, alpha, beta)`` of the normalized pair creator ``A†_{ab;JM}``."""
    norm = 1.0 / sqrt(2.0) if a == b else 1.0
    terms = []
    for oa in _shell_orbitals(basis, a):
        for ob in _shell_orbitals(basis, b):
            if oa.index == ob.index:
                continue
            cg = clebsch_gordan(a[2], oa.two_mj, b[2], ob.two_mj, two_J, two_M)
            if cg != 0.0:
                terms.append((norm * cg, oa.index, ob.index))
    return terms


def two_body_monomials(basis: SpBasis, tbme=SD_TBME):
    """m-scheme monomials of ``sum_J V_J(ab,cd) sum_M A†_{ab;JM} A_{cd;JM}``."""
    acc: dict = {}
    for J, (channels, V) in tbme.items():
        V = np.asarray(V, dtype=float)
        two_J = 2 * J
        for two_M in range(-two_J, two_J + 1, 2):
            pairs = [_pair_creation(basis, a, b, two_J, two_M) for a, b in channels]
            for i, left in enumerate(pairs):
                for k, right in enumerate(pairs):
                    if V[i, k] == 0.0:
                        continue
                    for c1, al, be in left:
                        # a†_al a†_be -> a†_p a†_q with p < q
                        s1 = 1 if al < be else -1
                        Q = (min(al, be), max(al, be))
                        for c2, ga, de in right:
                            # (a†_ga a†_de)† = a_de a_ga -> a_v a_u with u < v
                            s2 = 1 if ga < de else -1
                            P = (min(ga, de), max(ga, de))
                            acc[(Q, P)] = acc.get((Q, P), 0.0) + s1 * s2 * c1 * c2 * V[i, k]
    return [Monomial(Q, P, v) for (Q, P), v in acc.items() if abs(v) > 1e-13]


def one_body_monomials(basis: SpBasis, spe=SD_SPE):
    out = []
    for o in basis.orbitals:
        eps = spe.get((o.n, o.l, o.two_j))
        if eps:
            out.append(Monomial((o.index,), (o.index,), eps))
    return out


def build_sd_hamiltonian(basis: SpBasis | None = None) -> SecondQuantizedH:
    basis = basis or sd_basis()
    mono = one_body_monomials(basis) + two_body_monomials(basis)
    return hermitize(SecondQuantizedH(basis, mono))


# Source-state configurations: (1s m=-1/2)(1s m=+1/2)(0d5/2 m=+1/2),
# (1s +1/2)(0d5/2 -5/2)(0d5/2 +5/2) and (0d5/2 -5/2)(0d5/2 +1/2)(0d5/2 +5/2),
# written as orbital indices of :func:`sd_basis`.
SD_SOURCE_CONFIGS = ((3, 6, 7), (0, 5, 7), (0, 3, 5))


def sd_source_state(space) -> StateVector:
    """Equal-weight, normalized combination of :data:`SD_SOURCE_CONFIGS`."""
    amps = np.zeros(space.dim, dtype=np.complex128)
    for occ in SD_SOURCE_CONFIGS:
        amps[space.index(word_from_orbitals(occ))] = 1.0
    return StateVector(space, amps / np.sqrt(len(SD_SOURCE_CONFIGS)))


def data_path(name: str):
    return resources.files("litresponse") / "data" / name


def load_sd_fixture():
    """``(basis, H)`` from the shipped data files."""
    basis = load_basis(data_path("sd_basis.txt"))
    H = load_monomials(data_path("sd_synthetic.monomials"), basis)
    return basis, H


def sd_problem(A: int = 3, two_Mj=None):
    basis, H = load_sd_fixture()
    return basis, H, enumerate_configs(basis, A, two_Mj)


def write_fixture_files(directory) -> None:
    """Regenerate ``sd_basis.txt`` and ``sd_synthetic.monomials``."""
    from pathlib import Path

    from .fockbasis import write_basis
    from .hamiltonian import write_monomials

    directory = Path(directory)
    basis = sd_basis()
    write_basis(basis, directory / "sd_basis.txt")
    H = build_sd_hamiltonian(basis)
    header = (
        "Synthetic rotationally invariant two-body Hamiltonian, 0d5/2 1s1/2 basis.\n"
        "Generated by litresponse.fixtures.write_fixture_files; values in MeV."
    )
    write_monomials(H, directory / "sd_synthetic.monomials", header=header)
