"""Regenerate ``fci_sd_fixture.json`` from the shipped fixture files.

Run from the repository root: ``python3 tests/data/regen_fci.py``.
"""

import json
from pathlib import Path

from litresponse.fci import diagonalize, exact_response
from litresponse.fixtures import load_sd_fixture, sd_source_state
from litresponse.fockbasis import enumerate_configs


def levels(H, basis, A):
    """``[(E, 2J)]`` from the degeneracy of each multiplet in the full A space."""
    decomp = diagonalize(H, enumerate_configs(basis, A))
    return [(E, g - 1) for E, g in decomp.multiplets(1e-7)]


def main():
    basis, H = load_sd_fixture()
    out = {}
    for A in (2, 3):
        out[f"A{A}_levels"] = [{"E": float(E), "two_J": int(tJ)} for E, tJ in levels(H, basis, A)]
    space = enumerate_configs(basis, 3)
    decomp = diagonalize(H, space)
    resp = exact_response(decomp, sd_source_state(space))
    # strength per multiplet: degenerate partners share one energy
    E_m, R_m, start = [], [], 0
    for E, g in decomp.multiplets(1e-7):
        E_m.append(float(E))
        R_m.append(float(resp.amplitudes[start:start + g].sum()))
        start += g
    out["space"] = {"A": 3, "dim": space.dim}
    out["E0_A3"] = out["A3_levels"][0]["E"]
    out["E0_A2"] = out["A2_levels"][0]["E"]
    out["e_th"] = out["E0_A2"] - out["E0_A3"]
    out["source"] = {"E_n": E_m, "R_n": R_m}
    path = Path(__file__).with_name("fci_sd_fixture.json")
    path.write_text(json.dumps(out, indent=1) + "\n")


if __name__ == "__main__":
    main()
