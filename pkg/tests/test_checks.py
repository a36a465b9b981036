from litresponse.checks import FAIL, PASS, SKIPPED, run_all
from litresponse.hamiltonian import Monomial, SecondQuantizedH


def test_fixture_all_pass(sd):
    _, H, _, omega = sd
    results = run_all(H, omega)
    assert [r.status for r in results] == [PASS] * 5
    assert all(r.name in r.line() for r in results)


def test_non_hermitian_short_circuits(sd):
    basis, H, _, omega = sd
    mono = list(H.monomials)
    k = next(i for i, m in enumerate(mono) if m.Q != m.P)
    mono[k] = Monomial(mono[k].Q, mono[k].P, mono[k].value * 1.5)
    results = run_all(SecondQuantizedH(basis, mono), omega)
    assert results[0].status == FAIL
    assert all(r.status == SKIPPED for r in results[1:])


def test_dense_cap_skips_oracles(sd):
    _, H, _, omega = sd
    results = {r.name: r for r in run_all(H, omega, cap=10)}
    assert results["triple-oracle LI agreement"].status == SKIPPED
    assert results["walk/recursion moment equivalence"].status == SKIPPED
    assert "SKIPPED" in results["triple-oracle LI agreement"].line()
    assert results["Chebyshev product identity"].status == PASS
