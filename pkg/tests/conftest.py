import json
from pathlib import Path

import numpy as np
import pytest

from litresponse.fixtures import data_path, load_sd_fixture, sd_source_state
from litresponse.fockbasis import enumerate_configs

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def sd():
    """``(basis, H, space, omega)`` for the A = 3 sd-shell fixture (dim 56)."""
    basis, H = load_sd_fixture()
    space = enumerate_configs(basis, 3)
    return basis, H, space, sd_source_state(space)


@pytest.fixture(scope="session")
def fci_ref():
    return json.loads((DATA / "fci_sd_fixture.json").read_text())


@pytest.fixture(scope="session")
def bound_ref(fci_ref):
    """FCI ``(E_n, R_n)`` of the fixture source below the one-nucleon threshold."""
    E = np.array(fci_ref["source"]["E_n"])
    R = np.array(fci_ref["source"]["R_n"])
    below = E < fci_ref["E0_A2"]
    return E[below], R[below]


@pytest.fixture(scope="session")
def pipeline_result(sd):
    from litresponse.protocols import PipelineConfig, run_pipeline

    basis, H, space, omega = sd
    return run_pipeline(H, omega, PipelineConfig())


@pytest.fixture(scope="session")
def fixture_ini():
    return Path(str(data_path("sd_fixture.ini")))


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
