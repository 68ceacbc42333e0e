"""Shared fixtures and the acceptance-criteria terminal report."""

import sys

import numpy as np
import pytest

from samplab.frame import GridFrame
from samplab.gaussfield import CovarianceSpec, SuperPopulationSpec, generate_population


@pytest.fixture(scope="session")
def frame10():
    return GridFrame(n_cols=10, n_rows=10, cell_side=1.0)


@pytest.fixture(scope="session")
def pop10(frame10):
    spec = SuperPopulationSpec(cov=CovarianceSpec.from_esr(4.0, 3.0),
                               beta=(0.0, 1.0, 1.0), tau2=1.0)
    return generate_population(frame10, spec, master_seed=101, population_index=0)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None) if mod else None
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num in range(1, 11):
        if num in results:
            ok, detail = results[num]
            status = "PASS" if ok else "FAIL"
        else:
            status, detail = "NOT RUN", ""
        line = f"criterion {num:2d}: {status}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
