"""Second-quantized many-fermion Hamiltonians built from monomials
``<Q|H|P> b†_Q b_P``, their action on configuration spaces, and the affine
rescaling that maps the spectrum into (-1, 1).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .fockbasis import ConfigSpace, SpBasis, StateVector

log = logging.getLogger(__name__)

DEFAULT_DENSE_CAP = 4096
HERMITIAN_TOL = 1e-12


class MonomialFileError(ValueError):
    """Malformed monomial file line."""


class HermiticityError(ValueError):
    """A monomial and its conjugate partner carry inconsistent values."""


class DimensionCapError(ValueError):
    """Dense operation requested on a space larger than the configured cap."""


@dataclass(frozen=True)
class Monomial:
    Q: tuple
    P: tuple
    value: complex

    def __post_init__(self):
        object.__setattr__(self, "Q", tuple(int(q) for q in self.Q))
        object.__setattr__(self, "P", tuple(int(p) for p in self.P))
        object.__setattr__(self, "value", complex(self.value))
        if len(self.Q) != len(self.P):
            raise ValueError(f"rank mismatch: |Q|={len(self.Q)} |P|={len(self.P)}")
        for name, idx in (("Q", self.Q), ("P", self.P)):
            if any(b <= a for a, b in zip(idx, idx[1:])):
                raise ValueError(f"{name} indices must be strictly ascending: {idx}")
        if not np.isfinite(self.value):
            raise ValueError("non-finite monomial value")

    @property
    def rank(self) -> int:
        return len(self.Q)

    def adjoint(self) -> "Monomial":
        return Monomial(self.P, self.Q, self.value.conjugate())


class SecondQuantizedH:
    """Sum of monomials over a fixed single-particle basis.

    Instances are immutable; :func:`hermitize` returns a new one.
    """

    def __init__(self, basis: SpBasis, monomials: Sequence[Monomial]):
        monomials = tuple(monomials)
        if not monomials:
            raise ValueError("Hamiltonian needs at least one monomial")
        for m in monomials:
            for idx in m.Q + m.P:
                if not 0 <= idx < basis.n_sp:
                    raise IndexError(f"orbital index {idx} outside basis of {basis.n_sp}")
        self.basis = basis
        self.monomials = monomials

    @property
    def D(self) -> int:
        return len(self.monomials)

    @property
    def Xi(self) -> float:
        return max(abs(m.value) for m in self.monomials)

    @property
    def max_rank(self) -> int:
        return max(m.rank for m in self.monomials)

    @cached_property
    def packed(self):
        """Flat index/offset arrays consumed by the kernels."""
        q_off = np.zeros(self.D + 1, dtype=np.int64)
        p_off = np.zeros(self.D + 1, dtype=np.int64)
        q_off[1:] = np.cumsum([len(m.Q) for m in self.monomials])
        p_off[1:] = np.cumsum([len(m.P) for m in self.monomials])
        q_flat = np.array([q for m in self.monomials for q in m.Q], dtype=np.int32)
        p_flat = np.array([p for m in self.monomials for p in m.P], dtype=np.int32)
        values = np.array([m.value for m in self.monomials], dtype=np.complex128)
        return q_flat, q_off, p_flat, p_off, values

    def delta_two_mj(self) -> np.ndarray:
        mj = self.basis.two_mj
        return np.array(
            [sum(mj[q] for q in m.Q) - sum(mj[p] for p in m.P) for m in self.monomials]
        )

    def is_real(self) -> bool:
        return all(m.value.imag == 0 for m in self.monomials)

    def __repr__(self):
        return f"SecondQuantizedH(n_sp={self.basis.n_sp}, D={self.D}, Xi={self.Xi:.6g})"


def _parse_indices(field: str, lineno: int, path) -> tuple:
    try:
        return tuple(int(t) for t in field.split())
    except ValueError:
        raise MonomialFileError(f"{path}:{lineno}: bad index list {field!r}") from None


def parse_monomials(lines, basis: SpBasis, source="<string>") -> SecondQuantizedH:
    accumulated: dict = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = [f.strip() for f in line.split("|")]
        if len(fields) != 4:
            raise MonomialFileError(
                f"{source}:{lineno}: expected 'rank | Q | P | value', got {raw!r}"
            )
        try:
            rank = int(fields[0])
        except ValueError:
            raise MonomialFileError(f"{source}:{lineno}: bad rank {fields[0]!r}") from None
        Q = _parse_indices(fields[1], lineno, source)
        P = _parse_indices(fields[2], lineno, source)
        if len(Q) != rank or len(P) != rank:
            raise MonomialFileError(
                f"{source}:{lineno}: rank {rank} but |Q|={len(Q)}, |P|={len(P)}"
            )
        for idx in Q + P:
            if not 0 <= idx < basis.n_sp:
                raise MonomialFileError(
                    f"{source}:{lineno}: orbital index {idx} outside basis of {basis.n_sp}"
                )
        parts = fields[3].split()
        if len(parts) not in (1, 2):
            raise MonomialFileError(f"{source}:{lineno}: bad value field {fields[3]!r}")
        try:
            value = complex(float(parts[0]), float(parts[1]) if len(parts) == 2 else 0.0)
        except ValueError:
            raise MonomialFileError(f"{source}:{lineno}: bad value field {fields[3]!r}") from None
        try:
            Monomial(Q, P, value)
        except ValueError as exc:
            raise MonomialFileError(f"{source}:{lineno}: {exc}") from None
        key = (Q, P)
        accumulated[key] = accumulated.get(key, 0.0) + value
    if not accumulated:
        raise MonomialFileError(f"{source}: no monomials")
    return SecondQuantizedH(basis, [Monomial(Q, P, v) for (Q, P), v in accumulated.items()])


def load_monomials(path, basis: SpBasis) -> SecondQuantizedH:
    """Read a ``rank | Q | P | re [im]`` file; repeated (Q, P) pairs are summed."""
    path = Path(path)
    return parse_monomials(path.read_text().splitlines(), basis, source=str(path))


def format_value(x: float) -> str:
    return f"{x:.12g}"


def write_monomials(H: SecondQuantizedH, path, header: Optional[str] = None) -> None:
    lines = []
    if header:
        lines += [f"# {h}" for h in header.splitlines()]
    lines.append("# rank | Q | P | value_re [value_im]   (MeV)")
    for m in H.monomials:
        val = format_value(m.value.real)
        if m.value.imag != 0:
            val += " " + format_value(m.value.imag)
        lines.append(f"{m.rank} | {' '.join(map(str, m.Q))} | {' '.join(map(str, m.P))} | {val}")
    Path(path).write_text("\n".join(lines) + "\n")


def hermitize(H: SecondQuantizedH, tol: float = HERMITIAN_TOL) -> SecondQuantizedH:
    """Add missing conjugate partners and make self-adjoint monomials real."""
    table = {(m.Q, m.P): m.value for m in H.monomials}
    out = dict(table)
    for (Q, P), v in table.items():
        if Q == P:
            if abs(v.imag) > tol * max(1.0, abs(v)):
                raise HermiticityError(f"diagonal monomial {Q} has imaginary value {v}")
            out[(Q, P)] = complex(v.real, 0.0)
            continue
        partner = table.get((P, Q))
        if partner is None:
            out[(P, Q)] = v.conjugate()
        elif abs(partner - v.conjugate()) > tol * max(1.0, abs(v)):
            raise HermiticityError(
                f"monomial Q={Q} P={P} value {v} conflicts with its partner {partner}"
            )
    return SecondQuantizedH(H.basis, [Monomial(Q, P, v) for (Q, P), v in out.items()])


def _check_space(H: SecondQuantizedH, space: ConfigSpace):
    if not H.basis == space.basis:
        raise ValueError("Hamiltonian and space use different bases")
    if space.two_Mj is not None and np.any(H.delta_two_mj() != 0):
        raise ValueError("Hamiltonian changes M_J; it cannot act inside an M_J block")


def apply_H(H: SecondQuantizedH, state: StateVector) -> StateVector:
    """``sum_j value_j b†_Qj b_Pj |state>`` without storing a matrix."""
    _check_space(H, state.space)
    out = kernels.apply_monomials(state.space.configs, *H.packed, state.amplitudes)
    return StateVector(state.space, out)


def sparse_matrix(H: SecondQuantizedH, space: ConfigSpace) -> sp.csr_matrix:
    """CSR matrix with ``M[g, f] = <config_g|H|config_f>``."""
    _check_space(H, space)
    rows, cols, vals = kernels.monomial_coo(space.configs, *H.packed)
    M = sp.coo_matrix((vals, (rows, cols)), shape=(space.dim, space.dim)).tocsr()
    M.sum_duplicates()
    if H.is_real():
        M = M.real.tocsr()
    return M


def assemble_dense(H: SecondQuantizedH, space: ConfigSpace, cap: int = DEFAULT_DENSE_CAP):
    if space.dim > cap:
        raise DimensionCapError(f"dimension {space.dim} exceeds dense cap {cap}")
    return sparse_matrix(H, space).toarray()


def is_hermitian(M, tol: float = HERMITIAN_TOL) -> bool:
    M = M.toarray() if sp.issparse(M) else np.asarray(M)
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    return bool(np.max(np.abs(M - M.conj().T), initial=0.0) <= tol * scale)


@dataclass(frozen=True)
class Rescaling:
    """``H' = (H - shift) / scale``.

    ``alpha`` records the block-encoding subnormalization ``B*Xi/scale`` with
    ``B = D`` (its lower bound); it is informational only.
    """

    shift: float
    scale: float
    margin: float = 0.0
    alpha: float = 1.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("rescaling scale must be positive")

    def to_prime(self, energy):
        return (np.asarray(energy) - self.shift) / self.scale

    def from_prime(self, eps):
        return np.asarray(eps) * self.scale + self.shift

    def as_dict(self):
        return {"shift": self.shift, "scale": self.scale, "margin": self.margin, "alpha": self.alpha}


def extremal_eigenvalues(H: SecondQuantizedH, space: ConfigSpace, cap: int = DEFAULT_DENSE_CAP):
    """(lambda_min, lambda_max): dense when ``dim <= cap``, else Lanczos with
    the window inflated by 5%."""
    if space.dim <= cap:
        w = np.linalg.eigvalsh(assemble_dense(H, space, cap))
        return float(w[0]), float(w[-1])
    M = sparse_matrix(H, space)
    opts = dict(k=1, maxiter=200 * space.dim, ncv=min(space.dim, 40), return_eigenvectors=False)
    lo = float(spla.eigsh(M, which="SA", **opts)[0])
    hi = float(spla.eigsh(M, which="LA", **opts)[0])
    pad = 0.025 * (hi - lo)
    return lo - pad, hi + pad


def compute_rescaling(
    H: SecondQuantizedH, space: ConfigSpace, margin: float = 0.01, cap: int = DEFAULT_DENSE_CAP
) -> Rescaling:
    if margin < 0:
        raise ValueError("margin must be non-negative")
    lo, hi = extremal_eigenvalues(H, space, cap)
    if hi - lo <= 1e-12 * max(1.0, abs(hi)):
        c, s = 0.5 * (hi + lo), 1.0
    else:
        c = 0.5 * (hi + lo)
        s = (1.0 + margin) * 0.5 * (hi - lo)
    return Rescaling(shift=c, scale=s, margin=margin, alpha=H.D * H.Xi / s)


def rescaled_operator(H: SecondQuantizedH, space: ConfigSpace, rescaling: Rescaling):
    """Sparse ``H'`` on ``space``."""
    M = sparse_matrix(H, space)
    ident = sp.identity(space.dim, dtype=M.dtype, format="csr")
    return ((M - rescaling.shift * ident) / rescaling.scale).tocsr()


def hermiticity_defect(H: SecondQuantizedH, space: ConfigSpace) -> float:
    """``max |M - M^dagger| / max(1, max |M|)`` from the sparse matrix."""
    M = sparse_matrix(H, space)
    if M.nnz == 0:
        return 0.0
    D = (M - M.conj().T).tocoo()
    top = max(1.0, float(np.max(np.abs(M.data))))
    return float(np.max(np.abs(D.data), initial=0.0)) / top
