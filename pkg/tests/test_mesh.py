import numpy as np
import pytest

from delaywave.mesh import (
    GAMMA0,
    GAMMA1,
    CoefField,
    assemble_neumann_laplacian,
    build_interval_mesh,
    build_rect_mesh,
    damping_strip_field,
    stiffness_matrix,
)


def test_interval_layout():
    m = build_interval_mesh(4, 1.0, "right")
    assert np.allclose(m.node_coords[:, 0], [0, 0.25, 0.5, 0.75, 1.0])
    assert list(m.boundary_labels) == [GAMMA0, GAMMA1]
    assert list(m.gamma1_nodes) == [4]


def test_interval_measures():
    assert build_interval_mesh(8, 2.0).omega_measure == pytest.approx(2.0, abs=1e-15)
    assert build_interval_mesh(8, 1.0, "both").gamma1_measure == 2.0


def test_interval_errors():
    with pytest.raises(ValueError):
        build_interval_mesh(1)
    with pytest.raises(ValueError):
        build_rect_mesh(1, 4)


def test_rect_measures():
    m = build_rect_mesh(10, 10, gamma1_spec="all")
    assert m.boundary_quadrature.sum() == pytest.approx(4.0, abs=1e-14)
    assert m.omega_measure == pytest.approx(1.0, abs=1e-14)
    # corner owns half of each adjacent edge segment
    corner = np.flatnonzero(m.boundary_nodes == 0)[0]
    assert m.boundary_quadrature[corner] == pytest.approx(0.1)
    assert m.interior_quadrature[0] == pytest.approx(0.0025)
    assert len(build_rect_mesh(10, 10).gamma1_nodes) == 0


def test_rect_normals_unit():
    m = build_rect_mesh(5, 7, 2.0, 1.0)
    assert np.allclose(np.linalg.norm(m.outward_normal, axis=1), 1.0)
    assert set(np.unique(m.boundary_labels)) == {GAMMA0}


@pytest.mark.parametrize("mesh", [build_interval_mesh(17), build_rect_mesh(9, 6, 1.3, 0.7)])
def test_laplacian_constants_and_symmetry(mesh, rng):
    L, _ = assemble_neumann_laplacian(mesh)
    assert np.abs(L @ np.full(mesh.n_nodes, 3.7)).max() == 0.0
    y1, y2 = rng.standard_normal((2, mesh.n_nodes))
    w = mesh.interior_quadrature
    assert w @ ((L @ y1) * y2) == pytest.approx(w @ (y1 * (L @ y2)), rel=1e-12)
    K = stiffness_matrix(mesh, L).toarray()
    assert np.linalg.eigvalsh(K).min() > -1e-10 * np.abs(K).max()


def test_laplacian_second_order():
    errs = []
    for n in (100, 200):
        m = build_interval_mesh(n)
        L, _ = assemble_neumann_laplacian(m)
        x = m.node_coords[:, 0]
        errs.append(np.abs(L @ np.cos(np.pi * x) + np.pi**2 * np.cos(np.pi * x)).max())
    assert errs[1] < errs[0] / 3.5


@pytest.mark.parametrize("mesh", [build_interval_mesh(12, 1.0, "both"),
                                  build_rect_mesh(6, 9, 1.0, 2.0, "all")])
def test_discrete_divergence_theorem(mesh, rng):
    L, B = assemble_neumann_laplacian(mesh)
    y = rng.standard_normal(mesh.n_nodes)
    flux = rng.standard_normal(len(mesh.gamma1_nodes))
    lhs = mesh.interior_quadrature @ (L @ y + B @ flux)
    rhs = mesh.gamma1_weights @ flux
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_strip_field():
    m = build_rect_mesh(10, 10)
    a = damping_strip_field(m, 0.2, 1.0)
    cols = np.unique(m.node_coords[a.support_mask, 0])
    assert np.allclose(cols, [0.0, 0.1])
    assert m.interior_quadrature @ a.values == pytest.approx(0.2, abs=0.1)
    z = damping_strip_field(m, 0.2, 0.0)
    assert not z.support_mask.any()
    with pytest.raises(ValueError):
        damping_strip_field(m, 1.5)


def test_coef_field_rejects_negative():
    with pytest.raises(ValueError):
        CoefField.from_values([0.0, -1.0])
