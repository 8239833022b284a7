import numpy as np
import pytest

from wavesim.medium import Domain, HelmholtzProblem, PMLSpec, SourceSpec
from wavesim.models import homogeneous, two_layer


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_problem(pml=False, L=200.0, v_top=1500.0, v_bottom=2500.0, f=4.0,
                 zs=250.0, extent=1000.0):
    t = L if pml else 0.0
    model = two_layer(v_top, v_bottom, 0.5 * extent, extent + 2 * t,
                      extent + 2 * t, 10.0, -t, -t)
    dom = Domain.from_interior(0.0, extent, 0.0, extent, t)
    spec = PMLSpec(L, 0.8, enabled=True) if pml else PMLSpec()
    return HelmholtzProblem(model, SourceSpec(0.5 * extent, zs, f), dom, spec)


@pytest.fixture
def problem():
    return make_problem()


@pytest.fixture
def pml_problem():
    return make_problem(pml=True)


@pytest.fixture
def homogeneous_problem():
    model = homogeneous(2000.0, 1000.0, 1000.0, 50.0)
    return HelmholtzProblem(model, SourceSpec(500.0, 500.0, 4.0),
                            Domain.from_interior(0.0, 1000.0, 0.0, 1000.0))


def pytest_terminal_summary(terminalreporter):
    import helpers
    if not helpers.ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(helpers.ACCEPTANCE):
        ok, detail = helpers.ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}: {detail}")
