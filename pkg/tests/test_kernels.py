"""Compiled and NumPy kernels must agree exactly."""

import numpy as np
import pytest

from litresponse import kernels
from litresponse.fockbasis import enumerate_configs

backends = kernels.available_backends()


def test_numpy_backend_always_available():
    assert "numpy" in backends
    assert kernels.BACKEND in ("cython", "numpy")


@pytest.mark.skipif("cython" not in backends, reason="compiled extension not built")
@pytest.mark.parametrize("A, two_Mj", [(3, None), (3, 1), (2, 0), (4, 2)])
def test_backend_parity(sd, A, two_Mj):
    basis, H, _, _ = sd
    space = enumerate_configs(basis, A, two_Mj)
    cy, py = backends["cython"], backends["numpy"]

    def coo(mod):
        r, c, v = mod.monomial_coo(space.configs, *H.packed)
        order = np.lexsort((c, r))
        return r[order], c[order], v[order]

    for a, b in zip(coo(cy), coo(py)):
        assert np.array_equal(a, b)
    rng = np.random.default_rng(A)
    vec = rng.normal(size=space.dim) + 1j * rng.normal(size=space.dim)
    out_cy = cy.apply_monomials(space.configs, *H.packed, vec)
    out_py = py.apply_monomials(space.configs, *H.packed, vec)
    assert np.allclose(out_cy, out_py, rtol=0, atol=1e-13)


def test_fallback_selected_by_environment():
    import os
    import subprocess
    import sys

    code = ("import litresponse, numpy as np\n"
            "from litresponse.fixtures import sd_problem, sd_source_state\n"
            "from litresponse.checks import run_all\n"
            "b, H, s = sd_problem()\n"
            "print(litresponse.KERNEL_BACKEND, [r.status for r in run_all(H, sd_source_state(s))])")
    env = dict(os.environ, LITRESPONSE_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split()[0] == "numpy"
    assert out.stdout.count("PASS") == 5
