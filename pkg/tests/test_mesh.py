import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from nsvrglm.mesh import (NonstatField, TriangularMesh, assemble_fem, grid_mesh,
                          kappa_from_range, local_variability, matern_variance,
                          precision_factor, precision_nonstationary, precision_stationary,
                          read_mesh, unit_square_mesh, write_mesh)


@pytest.fixture(scope="module")
def square30():
    mesh = unit_square_mesh(30)
    return mesh, assemble_fem(mesh)


def test_single_triangle_matrices():
    mesh = TriangularMesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]])
    fem = assemble_fem(mesh)
    np.testing.assert_allclose(fem.C.toarray(), 0.5 / 12 * (np.ones((3, 3)) + np.eye(3)))
    np.testing.assert_allclose(fem.C_lumped.sum(), 0.5)
    # gradients of the hat functions: (-1,-1), (1,0), (0,1); times the area
    grads = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    np.testing.assert_allclose(fem.G.toarray(), 0.5 * grads @ grads.T, atol=1e-15)
    np.testing.assert_allclose(fem.G @ np.ones(3), 0.0, atol=1e-15)


def test_three_dimensional_triangle_area():
    mesh = TriangularMesh([[0, 0, 0], [1, 0, 0], [0, 0, 2]], [[0, 1, 2]])
    assert mesh.areas()[0] == pytest.approx(1.0)


def test_unit_square_mass_total(square30):
    mesh, fem = square30
    assert fem.C.sum() == pytest.approx(1.0, abs=1e-10)
    assert fem.C_lumped.sum() == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("n", [4, 9, 21])
def test_dirichlet_energy_of_plane(n):
    mesh = unit_square_mesh(n)
    fem = assemble_fem(mesh)
    a, b = 1.7, -0.4
    f = a * mesh.vertices[:, 0] + b * mesh.vertices[:, 1] + 3.0
    assert f @ (fem.G @ f) == pytest.approx(a * a + b * b, abs=1e-8)


def test_gradient_operator_reproduces_stiffness(square30):
    _, fem = square30
    np.testing.assert_allclose((fem.grad.T @ fem.grad).toarray(), fem.G.toarray(), atol=1e-10)


def test_first_order_precision(square30):
    _, fem = square30
    Q = precision_stationary(fem, 3.0, alpha=1)
    expected = 9.0 * np.diag(fem.C_lumped) + fem.G.toarray()
    np.testing.assert_allclose(Q.toarray(), expected, atol=1e-12)


def test_second_order_precision_formula():
    mesh = unit_square_mesh(5)
    fem = assemble_fem(mesh)
    K = 4.0 * np.diag(fem.C_lumped) + fem.G.toarray()
    expected = K @ np.diag(1 / fem.C_lumped) @ K
    np.testing.assert_allclose(precision_stationary(fem, 2.0).toarray(), expected, atol=1e-10)


@pytest.mark.parametrize("alpha", [1, 2, 3, 4])
def test_square_root_factor(alpha):
    mesh = unit_square_mesh(6)
    fem = assemble_fem(mesh)
    F = precision_factor(fem, 2.5, alpha)
    Q = precision_stationary(fem, 2.5, alpha)
    np.testing.assert_allclose((F.T @ F).toarray(), Q.toarray(), rtol=1e-10,
                               atol=1e-10 * abs(Q).max())


def test_consistent_mass_precision_is_close():
    mesh = unit_square_mesh(8)
    fem = assemble_fem(mesh)
    a = precision_stationary(fem, 4.0, lumped=False).toarray()
    b = precision_stationary(fem, 4.0).toarray()
    ia, ib = np.linalg.inv(a), np.linalg.inv(b)
    assert np.abs(np.diag(ia) / np.diag(ib) - 1).max() < 0.35


def test_precision_input_checks(square30):
    _, fem = square30
    with pytest.raises(ValueError):
        precision_stationary(fem, 1.0, alpha=5)
    with pytest.raises(ValueError):
        precision_stationary(fem, 0.0)


def test_matern_variance_closed_form():
    k = 7.0
    assert matern_variance(k) == pytest.approx(1.0 / (4 * math.pi * k * k), rel=1e-14)
    assert kappa_from_range(0.5) == pytest.approx(math.sqrt(8) / 0.5)


def test_marginal_sd_and_range(square30):
    mesh, fem = square30
    rho = 0.3
    kappa = kappa_from_range(rho)
    cov = np.linalg.inv(precision_stationary(fem, kappa).toarray())
    sd = np.sqrt(np.diag(cov))
    v = mesh.vertices
    inner = np.all((v > rho) & (v < 1 - rho), axis=1)
    sigma = math.sqrt(1.0 / (4 * math.pi * kappa ** 2))
    assert np.abs(sd[inner] / sigma - 1).max() < 0.1
    c = int(np.argmin(((v - 0.5) ** 2).sum(1)))
    dist = np.linalg.norm(v - v[c], axis=1)
    ring = np.abs(dist - rho) < 0.02
    corr = cov[c, ring] / (sd[c] * sd[ring])
    assert np.all((corr > 0.05) & (corr < 0.25))
    # against the Matern correlation kappa d K_1(kappa d)
    matern = kappa * rho * special.kv(1, kappa * rho)
    assert abs(np.median(corr) - matern) < 0.03


def test_nonstationary_reduces_to_stationary(square30):
    mesh, fem = square30
    delta = np.random.default_rng(0).standard_normal(mesh.n_vertices)
    fld = NonstatField(0.0, 0.0, delta, sigma0=1.3, rho0=0.25)
    Qn = precision_nonstationary(fem, fld)
    Qs = precision_stationary(fem, fld.kappa)
    ratio = Qn.data / Qs.tocsr()[Qn.nonzero()].A1
    assert np.ptp(ratio) < 1e-10 * ratio.mean()
    assert ratio.mean() == pytest.approx(math.exp(2 * fld.log_tau0), rel=1e-10)


def test_stationary_field_has_baseline_sd(square30):
    mesh, fem = square30
    fld = NonstatField(0.0, 0.0, np.zeros(mesh.n_vertices), sigma0=2.0, rho0=0.3)
    sd = np.sqrt(np.diag(np.linalg.inv(precision_nonstationary(fem, fld).toarray())))
    inner = np.all((mesh.vertices > 0.3) & (mesh.vertices < 0.7), axis=1)
    assert np.abs(sd[inner] / 2.0 - 1).max() < 0.1


def test_theta1_raises_sd_where_delta_is_high():
    mesh = unit_square_mesh(12)
    fem = assemble_fem(mesh)
    delta = np.where(mesh.vertices[:, 0] < 0.5, 1.0, -1.0)
    fld = NonstatField(0.5, 0.0, delta, rho0=0.3)
    sd = np.sqrt(np.diag(np.linalg.inv(precision_nonstationary(fem, fld).toarray())))
    x = mesh.vertices[:, 0]
    assert sd[(x > 0.1) & (x < 0.35)].mean() > 1.5 * sd[(x > 0.65) & (x < 0.9)].mean()


@settings(max_examples=20, deadline=None)
@given(t2=st.floats(-2, 2))
def test_theta2_rescales_kappa(t2):
    f0 = NonstatField(0.0, t2, np.zeros(3), rho0=0.7)
    f1 = NonstatField(0.0, t2 + math.log(2.0), np.zeros(3), rho0=0.7)
    assert f1.kappa == pytest.approx(f0.kappa / 2, rel=1e-12)
    assert f0.kappa == pytest.approx(math.sqrt(8) / 0.7 * math.exp(-t2), rel=1e-12)


def test_log_tau_overflow_guard(square30):
    mesh, fem = square30
    fld = NonstatField(400.0, 0.0, np.ones(mesh.n_vertices))
    with pytest.raises(OverflowError):
        precision_nonstationary(fem, fld)


def test_local_variability_constant_field(caplog):
    mesh, _ = grid_mesh(np.ones((5, 5), bool))
    raw = local_variability(np.full(25, 2.0), mesh, standardize=False)
    np.testing.assert_allclose(raw, 0.0, atol=1e-12)
    with caplog.at_level(logging.WARNING):
        z = local_variability(np.full(25, 2.0), mesh)
    np.testing.assert_array_equal(z, 0.0)
    assert "constant" in caplog.text


def test_local_variability_spike():
    mesh, pix = grid_mesh(np.ones((7, 7), bool))
    b = np.zeros(mesh.n_vertices)
    spike = int(np.flatnonzero((pix[:, 0] == 3) & (pix[:, 1] == 3))[0])
    b[spike] = 5.0
    raw = local_variability(b, mesh, standardize=False)
    near = set(mesh.neighbors()[spike].tolist()) | {spike}
    assert set(np.flatnonzero(raw > 0).tolist()) == near
    assert int(np.argmax(raw)) in near
    # sample sd of the spike's own neighbourhood
    k = len(near)
    assert raw[spike] == pytest.approx(np.std([5.0] + [0.0] * (k - 1), ddof=1))


def test_local_variability_linear_field():
    mesh, _ = grid_mesh(np.ones((30, 30), bool))
    b = 0.3 * mesh.vertices[:, 0] + 0.1 * mesh.vertices[:, 1]
    raw = local_variability(b, mesh, standardize=False)
    assert raw.std() / raw.mean() < 0.2


def test_local_variability_scaling_modes(rng):
    mesh, _ = grid_mesh(np.ones((6, 6), bool))
    b = rng.standard_normal(36)
    raw = local_variability(b, mesh, standardize=False)
    z = local_variability(b, mesh)
    u = local_variability(b, mesh, center=False)
    assert abs(z.mean()) < 1e-12 and z.std(ddof=1) == pytest.approx(1.0)
    np.testing.assert_allclose(u, raw / raw.std(ddof=1))
    assert np.all(u >= 0)


def test_mesh_validation():
    with pytest.raises(ValueError):
        TriangularMesh([[0, 0], [1, 0], [2, 0]], [[0, 1, 2]])       # degenerate
    with pytest.raises(ValueError):
        TriangularMesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 3]])       # bad index
    with pytest.raises(ValueError):
        TriangularMesh([[0, 0], [1, 0], [0, 1], [5, 5], [6, 5], [5, 6]],
                       [[0, 1, 2], [3, 4, 5]])                        # disconnected
    with pytest.raises(ValueError):
        TriangularMesh([[0, 0], [1, 0], [0, 1], [0, -1], [1, 1]],
                       [[0, 1, 2], [0, 1, 3], [0, 1, 4]])             # non-manifold edge


def test_grid_mesh_counts():
    mesh, pix = grid_mesh(np.ones((3, 4), bool))
    assert mesh.n_vertices == 12
    assert len(mesh.triangles) == 12
    assert mesh.areas().sum() == pytest.approx(6.0)
    assert len(mesh.boundary_vertices()) == 10


def test_grid_mesh_drops_isolated_pixels():
    mask = np.zeros((6, 6), bool)
    mask[:3, :3] = True
    mask[5, 5] = True
    mesh, pix = grid_mesh(mask)
    assert mesh.n_vertices == 9
    assert [5, 5] not in pix.tolist()


def test_mesh_file_round_trip(tmp_path):
    mesh, _ = grid_mesh(np.ones((3, 3), bool), spacing=0.37)
    write_mesh(mesh, tmp_path / "m.txt")
    back = read_mesh(tmp_path / "m.txt")
    np.testing.assert_array_equal(back.vertices, mesh.vertices)
    np.testing.assert_array_equal(back.triangles, mesh.triangles)


def test_mesh_file_length_check(tmp_path):
    (tmp_path / "m.txt").write_text("3 1\n0 0\n1 0\n")
    with pytest.raises(ValueError):
        read_mesh(tmp_path / "m.txt")
