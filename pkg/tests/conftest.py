import numpy as np
import pytest

from nsvrglm.design import block_schedule, build_design, standardize_columns
from nsvrglm.inference import ModelSpec, whiten_data
from nsvrglm.mesh import assemble_fem, grid_mesh

ACCEPTANCE_LINES = {}


def record_criterion(number: int, passed: bool, detail: str):
    """Store one summary line; printed after the run and returned for assertions."""
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.setdefault(number, []).append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        for line in ACCEPTANCE_LINES[number]:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def toy_problem():
    """3x4 grid mesh, two tasks, T = 64, two Hurst clusters."""
    rng = np.random.default_rng(1)
    mesh, _ = grid_mesh(np.ones((3, 4), bool))
    fem = assemble_fem(mesh)
    V = mesh.n_vertices
    T = 64
    design = standardize_columns(build_design(block_schedule(2, T)))
    Y = rng.standard_normal((V, T)) + np.outer(rng.standard_normal(V), design.tasks[:, 0])
    data = whiten_data(Y, design)
    model = ModelSpec(mesh, fem, np.repeat([0, 1], V // 2), 2, rng.standard_normal((2, V)),
                      n_tasks=2, n_nuisance=1, rho0=2.0)
    phi = np.array([0.1, 0.3, -0.4, 0.2, -0.3, 0.5, 0.1])
    return {"mesh": mesh, "fem": fem, "design": design, "Y": Y, "data": data,
            "model": model, "phi": phi}
