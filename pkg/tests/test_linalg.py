import numpy as np
import pytest
import scipy.sparse as sp

from chns_dg import forms, linalg
from chns_dg.mesh import unit_square_mesh
from chns_dg.space import DgSpace, mean_weight_vector


def path_laplacian():
    return sp.csr_matrix(np.array([[1.0, -1.0, 0.0],
                                   [-1.0, 2.0, -1.0],
                                   [0.0, -1.0, 1.0]]))


def test_identity_solve():
    a = sp.identity(6, format="csr")
    b = np.arange(6.0)
    x = linalg.solve(a, b)
    assert np.allclose(x, b)


def test_path_graph_zero_mean_constraint():
    a = path_laplacian()
    b = np.array([1.0, 0.0, -1.0])
    w = np.ones(3)
    spec = linalg.LinearSolveSpec(mean_constraint=(w, 0.0))
    x = linalg.solve(a, b, spec)
    assert np.allclose(x, [1.0, 0.0, -1.0], atol=1e-12)


@pytest.mark.parametrize("method", ["cg", "gmres"])
def test_constrained_iterative_matches_direct(method):
    space = DgSpace(unit_square_mesh(4), 1)
    a = forms.assemble_a_diff(space, 4.0)
    w = mean_weight_vector(space)
    rng = np.random.default_rng(0)
    b = rng.standard_normal(space.total_dofs)
    b -= w * (np.ones(space.total_dofs) @ b) / (np.ones(space.total_dofs) @ w)
    ones_coeff = np.zeros(space.total_dofs)
    ones_coeff[::space.n_loc] = 1.0
    b -= ones_coeff * float(ones_coeff @ b) / float(ones_coeff @ ones_coeff)
    # remove the singular component exactly: project b onto range(A)
    b = a @ linalg.solve(a, b, linalg.LinearSolveSpec(mean_constraint=(w, 0.0)))
    direct = linalg.solve(a, b, linalg.LinearSolveSpec(mean_constraint=(w, 0.0)))
    spec = linalg.LinearSolveSpec(method=method, rel_tolerance=1e-12,
                                  max_iterations=2000, mean_constraint=(w, 0.0))
    x = linalg.solve(a, b, spec)
    res = np.linalg.norm(a @ x - b)
    assert res <= 1e-10 * max(1.0, np.linalg.norm(b))
    assert abs(w @ x) < 1e-10
    assert np.allclose(x, direct, atol=1e-8)


def test_direct_and_cg_agree_on_spd():
    rng = np.random.default_rng(1)
    m = rng.standard_normal((40, 40))
    a = sp.csr_matrix(m @ m.T + 40 * np.eye(40))
    b = rng.standard_normal(40)
    x_direct = linalg.solve(a, b)
    x_cg = linalg.solve(a, b, linalg.LinearSolveSpec(method="cg",
                                                     rel_tolerance=1e-14,
                                                     max_iterations=5000))
    assert np.linalg.norm(x_direct - x_cg) < 1e-10 * np.linalg.norm(x_direct)


def test_matvec_matches_dense_oracle():
    space = DgSpace(unit_square_mesh(3), 1)
    a = forms.assemble_a_diff(space, 2.0)
    assert a.shape[0] < 200
    dense = a.toarray()
    rng = np.random.default_rng(2)
    for _ in range(5):
        x = rng.standard_normal(a.shape[0])
        assert np.allclose(a @ x, dense @ x, atol=1e-13)


def test_iterative_failure_raises():
    # indefinite and ill-conditioned; one iteration cannot converge
    rng = np.random.default_rng(3)
    m = rng.standard_normal((30, 30))
    a = sp.csr_matrix(m)
    b = rng.standard_normal(30)
    spec = linalg.LinearSolveSpec(method="gmres", rel_tolerance=1e-14,
                                  max_iterations=1)
    with pytest.raises(linalg.IterativeFailure):
        linalg.solve(a, b, spec)


def test_singular_direct_raises():
    a = sp.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(linalg.SolverError):
        linalg.solve(a, np.array([1.0, 0.0]))


def test_dimension_mismatch():
    a = sp.identity(3, format="csr")
    with pytest.raises(ValueError):
        linalg.solve(a, np.ones(4))


class TestSmallestEigenvalue:
    def test_diagonal_no_constraint(self):
        a = sp.diags([2.0, 5.0]).tocsr()
        val = linalg.smallest_eigenvalue_on_subspace(a, np.zeros(2))
        assert np.isclose(val, 2.0)

    def test_zero_matrix(self):
        a = sp.csr_matrix((4, 4))
        assert linalg.smallest_eigenvalue_on_subspace(a) == 0.0

    def test_adiff_positive_on_constrained_subspace(self):
        space = DgSpace(unit_square_mesh(2), 1)
        a = forms.assemble_a_diff(space, 4.0)
        w = mean_weight_vector(space)
        val = linalg.smallest_eigenvalue_on_subspace(a, w)
        # dense oracle on the same subspace
        dense = a.toarray()
        basis = linalg._orthonormal_complement(w)
        oracle = np.linalg.eigvalsh(basis.T @ dense @ basis)[0]
        assert val > 0.0
        assert abs(val - oracle) < 1e-8 * max(1.0, abs(oracle))

    def test_nonsymmetric_rejected(self):
        a = sp.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))
        with pytest.raises(ValueError):
            linalg.smallest_eigenvalue_on_subspace(a)

    def test_inverse_iteration_path(self):
        # force the sparse branch with a large diagonal matrix
        n = 800
        diag = np.linspace(1.0, 3.0, n)
        a = sp.diags(diag).tocsr()
        val = linalg.smallest_eigenvalue_on_subspace(a, np.zeros(n))
        assert abs(val - 1.0) < 1e-6
