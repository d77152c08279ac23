import numpy as np
import pytest

from chns_dg.mesh import (Mesh, build_structured_mesh, face_orientation_check,
                          unit_cube_mesh, unit_square_mesh)


def test_unit_square_2x2_counts():
    mesh = unit_square_mesh(2)
    assert mesh.n_elements == 4
    assert len(mesh.interior_faces) == 4
    assert len(mesh.boundary_faces) == 8


def test_unit_cube_2x2x2_counts():
    mesh = unit_cube_mesh(2)
    assert mesh.n_elements == 8
    assert len(mesh.interior_faces) == 12
    assert len(mesh.boundary_faces) == 24


def test_single_element_mesh():
    mesh = unit_square_mesh(1)
    assert mesh.n_elements == 1
    assert len(mesh.interior_faces) == 0
    assert len(mesh.boundary_faces) == 4


@pytest.mark.parametrize("cells", [0, -3])
def test_invalid_cell_counts_raise(cells):
    with pytest.raises(ValueError):
        build_structured_mesh([(0, 1), (0, 1)], cells)


def test_degenerate_domain_raises():
    with pytest.raises(ValueError):
        build_structured_mesh([(0, 0), (0, 1)], 2)


@pytest.mark.parametrize("cells", [(1, 1), (3, 2), (4, 4), (5, 3)])
def test_interior_face_count_formula_2d(cells):
    mesh = build_structured_mesh([(0, 2), (0, 1)], cells)
    n1, n2 = cells
    expected = (n1 - 1) * n2 + (n2 - 1) * n1
    assert len(mesh.interior_faces) == expected


def test_interior_face_count_formula_3d():
    mesh = build_structured_mesh([(0, 1)] * 3, (2, 3, 4))
    n = np.array([2, 3, 4])
    expected = sum((n[j] - 1) * np.prod(np.delete(n, j)) for j in range(3))
    assert len(mesh.interior_faces) == expected


@pytest.mark.parametrize("dim,cells", [(2, (3, 5)), (3, (2, 3, 2))])
def test_volume_sums_to_domain(dim, cells):
    domain = [(0.0, 2.0)] * dim
    mesh = build_structured_mesh(domain, cells)
    total = mesh.n_elements * mesh.element_volume
    assert abs(total - 2.0 ** dim) < 1e-14 * 2.0 ** dim


def test_h_is_element_diagonal():
    mesh = build_structured_mesh([(0, 1), (0, 2)], (4, 4))
    assert np.isclose(mesh.h, np.hypot(0.25, 0.5))


def test_normals_point_left_to_right():
    mesh = unit_square_mesh(3)
    faces = mesh.interior_faces
    assert np.all(faces.left < faces.right)
    for f in range(len(faces)):
        lo = mesh.element_lower[faces.left[f]]
        hi = mesh.element_lower[faces.right[f]]
        direction = hi - lo
        direction /= np.linalg.norm(direction)
        assert np.allclose(direction, faces.normal[f])


def test_face_orientation_check_passes_on_constructed_meshes():
    for mesh in (unit_square_mesh(4), unit_cube_mesh(2),
                 build_structured_mesh([(0, 1), (0, 3)], (2, 6))):
        assert face_orientation_check(mesh)


def test_face_orientation_check_detects_flipped_normal():
    mesh = unit_square_mesh(2)
    mesh.interior_faces.normal[1] *= -1.0
    assert not face_orientation_check(mesh)


def test_face_orientation_check_detects_non_unit_normal():
    mesh = unit_square_mesh(2)
    mesh.interior_faces.normal[0] *= 1.5
    assert not face_orientation_check(mesh)


def test_boundary_normals_outward():
    mesh = unit_square_mesh(2)
    faces = mesh.boundary_faces
    for f in range(len(faces)):
        lower = mesh.element_lower[faces.elem[f]]
        center = lower + 0.5 * mesh.element_lengths
        # moving along the outward normal must leave the domain
        outside = center + faces.normal[f] * mesh.element_lengths
        assert np.any(outside < -1e-12) or np.any(outside > 1 + 1e-12)
