"""Cross-module consistency checks on one problem (H, A, Omega).

Each check returns a :class:`CheckResult` with status ``PASS``, ``FAIL`` or
``SKIPPED``.  Checks that need a dense matrix are skipped above the cap.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .blockenc import ContractViolation, build_dilation, walk_moments, walk_operator
from .chebyshev import chebyshev_vectors, compute_moments
from .fci import diagonalize, exact_lorentz
from .fockbasis import StateVector
from .hamiltonian import DEFAULT_DENSE_CAP, compute_rescaling, hermiticity_defect, rescaled_operator
from .lorentz import li_direct_solve, li_from_moments, required_K_max

PASS, FAIL, SKIPPED = "PASS", "FAIL", "SKIPPED"


@dataclass
class CheckResult:
    name: str
    status: str
    value: float = float("nan")
    tol: float = float("nan")
    detail: str = ""

    def line(self) -> str:
        if self.status == SKIPPED:
            return f"{self.status:7s} {self.name}: {self.detail}"
        return f"{self.status:7s} {self.name}: {self.value:.3e} (tol {self.tol:.1e}) {self.detail}".rstrip()

    def as_dict(self) -> dict:
        return {"name": self.name, "status": self.status, "value": self.value, "tol": self.tol, "detail": self.detail}


def _judge(name, value, tol, detail=""):
    ok = np.isfinite(value) and value <= tol
    return CheckResult(name, PASS if ok else FAIL, float(value), tol, detail)


def check_hermitian(H, space, tol=1e-12) -> CheckResult:
    return _judge("hermiticity", hermiticity_defect(H, space), tol)


def random_sigma_points(rescaling, n, sigma_I_range=(1.0, 14.0), seed=0, pad=10.0):
    rng = np.random.default_rng(seed)
    lo = rescaling.shift - rescaling.scale - pad
    hi = rescaling.shift + rescaling.scale + pad
    return rng.uniform(lo, hi, n), rng.uniform(*sigma_I_range, n)


def check_triple_oracle(H, omega: StateVector, n=100, sigma_I_range=(1.0, 14.0), seed=0, tol=1e-8,
                        cap=DEFAULT_DENSE_CAP) -> CheckResult:
    """Moments, dense solve and spectral sum agree at random sigma points."""
    name = "triple-oracle LI agreement"
    space = omega.space
    if space.dim > cap:
        return CheckResult(name, SKIPPED, detail=f"dim {space.dim} above dense cap {cap}")
    t0 = time.perf_counter()
    resc = compute_rescaling(H, space)
    sR, sI = random_sigma_points(resc, n, sigma_I_range, seed)
    ms = compute_moments(H, space, omega, required_K_max(sR, sI, 0.0, resc), resc)
    L_mom = li_from_moments(ms, sR, sI)
    decomp = diagonalize(H, space, cap)
    L_fci = exact_lorentz(decomp, omega, sR, sI)
    L_dir = li_direct_solve(H, space, omega, sR, sI, cap=cap)
    dev = max(np.max(np.abs(L_mom - L_fci) / L_fci), np.max(np.abs(L_dir - L_fci) / L_fci),
              np.max(np.abs(L_mom - L_dir) / L_dir))
    return _judge(name, dev, tol, f"{n} points, {time.perf_counter() - t0:.2f} s")


def check_walk_recursion(H, omega: StateVector, K=200, tol=1e-10, cap=DEFAULT_DENSE_CAP) -> CheckResult:
    name = "walk/recursion moment equivalence"
    space = omega.space
    if space.dim > cap:
        return CheckResult(name, SKIPPED, detail=f"dim {space.dim} above dense cap {cap}")
    resc = compute_rescaling(H, space)
    rec = compute_moments(H, space, omega, K, resc)
    try:
        enc = build_dilation(H, space, resc, cap)
        walk = walk_moments(walk_operator(enc), omega, K, resc, check_with=enc.H_prime)
    except ContractViolation as exc:
        return CheckResult(name, FAIL, detail=str(exc))
    return _judge(name, float(np.max(np.abs(walk.moments - rec.moments))), tol, f"k <= {K}")


def check_product_identity(H, omega: StateVector, n_pairs=50, k_max=100, seed=0, tol=1e-10) -> CheckResult:
    """``2 <t_j|t_k> = mu_{j+k} + mu_{|j-k|}`` at random pairs."""
    space = omega.space
    resc = compute_rescaling(H, space)
    Hp = rescaled_operator(H, space, resc)
    v0 = omega.amplitudes
    ts = list(chebyshev_vectors(Hp, v0, k_max))
    mu = compute_moments(H, space, omega, 2 * k_max, resc).moments
    rng = np.random.default_rng(seed)
    pairs = rng.integers(0, k_max + 1, size=(n_pairs, 2))
    scale = max(omega.norm2(), 1e-300)
    dev = max(abs(2 * np.vdot(ts[j], ts[k]) - mu[j + k] - mu[abs(j - k)]) / scale for j, k in pairs)
    return _judge("Chebyshev product identity", float(dev), tol, f"{n_pairs} pairs, j,k <= {k_max}")


def check_moment_bound(H, omega: StateVector, K=200, tol=1e-12) -> CheckResult:
    """``|mu_k| <= mu_0``: ``H'`` has spectrum inside [-1, 1]."""
    ms = compute_moments(H, omega.space, omega, K)
    mu0 = ms.moments[0].real
    excess = float(np.max(np.abs(ms.moments)) - mu0) / max(mu0, 1e-300)
    return _judge("moment bound", max(excess, 0.0), tol, f"k <= {K}")


def run_all(H, omega: StateVector, n_points=100, sigma_I_range=(1.0, 14.0), seed=0, K=200,
            cap=DEFAULT_DENSE_CAP) -> list:
    herm = check_hermitian(H, omega.space)
    out = [herm]
    if herm.status != PASS:
        rest = ["triple-oracle LI agreement", "walk/recursion moment equivalence",
                "Chebyshev product identity", "moment bound"]
        return out + [CheckResult(n, SKIPPED, detail="Hamiltonian is not Hermitian") for n in rest]
    out.append(check_triple_oracle(H, omega, n_points, sigma_I_range, seed, cap=cap))
    out.append(check_walk_recursion(H, omega, K, cap=cap))
    out.append(check_product_identity(H, omega, seed=seed))
    out.append(check_moment_bound(H, omega, K))
    return out
