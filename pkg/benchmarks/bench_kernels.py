"""Compare the compiled and NumPy monomial kernels.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--terms 400]

Times matrix assembly (``monomial_coo``) and one matrix-free application
(``apply_monomials``) on the sd-shell fixture and on a larger random
two-body problem, and checks that both backends agree.
"""

import argparse
import timeit

import numpy as np

from litresponse.fixtures import load_sd_fixture
from litresponse.fockbasis import enumerate_configs, shell_basis
from litresponse.hamiltonian import Monomial, SecondQuantizedH, hermitize
from litresponse.kernels import available_backends


def random_two_body(basis, n_terms, seed=0):
    rng = np.random.default_rng(seed)
    n = basis.n_sp
    table = {}
    for _ in range(n_terms):
        Q = tuple(sorted(rng.choice(n, 2, replace=False)))
        P = tuple(sorted(rng.choice(n, 2, replace=False)))
        if (P, Q) not in table:
            table[(Q, P)] = 0.0 if Q == P else rng.normal()
    mono = [Monomial((p,), (p,), rng.normal()) for p in range(n)]
    mono += [Monomial(Q, P, v) for (Q, P), v in table.items() if v]
    return hermitize(SecondQuantizedH(basis, mono))


def problems(n_terms):
    basis, H = load_sd_fixture()
    yield "sd fixture, A=3", H, enumerate_configs(basis, 3)
    big = shell_basis([(0, 2, 5), (1, 0, 1), (0, 2, 3), (0, 3, 7)])
    yield f"20 orbitals, A=4, {n_terms} random terms", random_two_body(big, n_terms), enumerate_configs(big, 4)


def bench(mod, H, space, repeat):
    packed = H.packed
    vec = np.random.default_rng(1).normal(size=space.dim).astype(np.complex128)
    t_coo = min(timeit.repeat(lambda: mod.monomial_coo(space.configs, *packed), number=1, repeat=repeat))
    t_app = min(timeit.repeat(lambda: mod.apply_monomials(space.configs, *packed, vec), number=1, repeat=repeat))
    return t_coo, t_app, mod.apply_monomials(space.configs, *packed, vec)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--terms", type=int, default=400)
    args = ap.parse_args(argv)
    backends = available_backends()
    if "cython" not in backends:
        print("compiled extension not built; only the NumPy backend is available")
    for label, H, space in problems(args.terms):
        print(f"\n{label}: dim {space.dim}, {H.D} monomials")
        print(f"  {'backend':8s} {'assemble [ms]':>14s} {'apply [ms]':>11s}")
        results = {}
        for name, mod in backends.items():
            t_coo, t_app, out = bench(mod, H, space, args.repeat)
            results[name] = (t_coo, t_app, out)
            print(f"  {name:8s} {1e3 * t_coo:14.2f} {1e3 * t_app:11.2f}")
        if len(results) == 2:
            (c1, a1, o1), (c2, a2, o2) = results["numpy"], results["cython"]
            print(f"  speed-up: assemble x{c1 / c2:.1f}, apply x{a1 / a2:.1f}; "
                  f"max |diff| {np.max(np.abs(o1 - o2)):.1e}")


if __name__ == "__main__":
    main()
