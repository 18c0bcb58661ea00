import numpy as np
import pytest

from nlheat.errors import InvalidParameter
from nlheat.kernel import make_fractional_kernel
from nlheat.lattice import build_grid
from nlheat.nonlocal_op import assemble, bilinear_form
from nlheat.spectral import read_basis_csv, solve_eigenproblem

# first Dirichlet eigenvalue of the half Laplacian on (-1, 1) (Kwasnicki 2012); on (0, 1) it scales by 2
HALF_LAPLACIAN_FIRST = 1.1577738836977


def test_orthonormal_and_sorted(basis1d):
    g = basis1d.op.grid
    V = basis1d.vectors
    assert np.allclose(g.cell * V.T @ V, np.eye(basis1d.count), atol=1e-10)
    assert np.all(np.diff(basis1d.eigenvalues) >= 0)
    assert basis1d.eigenvalues[0] > 0


def test_eigen_identity(basis1d):
    op = basis1d.op
    for i in range(5):
        e = basis1d.mode_field(i)
        assert bilinear_form(op, e, e) / basis1d.eigenvalues[i] == pytest.approx(1.0, abs=1e-10)


def test_first_eigenvalue_against_literature():
    op = assemble(build_grid([[0.0, 1.0]], 1 / 128, 2.0), make_fractional_kernel(1, 0.5))
    b = solve_eigenproblem(op, 3)
    assert b.eigenvalues[0] == pytest.approx(2 * HALF_LAPLACIAN_FIRST, rel=5e-3)


def test_first_mode_is_positive(basis1d):
    assert np.all(basis1d.mode(0) > 0)


def test_projection_roundtrip(basis1d, rng):
    v = rng.standard_normal(basis1d.op.grid.n_interior)
    assert basis1d.synthesize(basis1d.project(v)) == pytest.approx(v, abs=1e-10)
    assert basis1d.truncation_error(v) < 1e-10


def test_truncated_basis(op1d):
    b = solve_eigenproblem(op1d, 4)
    assert b.count == 4
    full = solve_eigenproblem(op1d)
    assert b.eigenvalues == pytest.approx(full.eigenvalues[:4], rel=1e-10)
    assert b.truncation_error(full.mode(10)) == pytest.approx(1.0, rel=1e-8)


def test_mode_count_range(op1d):
    with pytest.raises(InvalidParameter):
        solve_eigenproblem(op1d, 0)
    with pytest.raises(InvalidParameter):
        solve_eigenproblem(op1d, op1d.grid.n_interior + 1)


def test_repeated_eigenvalues_in_square(op2d):
    b = solve_eigenproblem(op2d, 6)
    # modes 2 and 3 of the square are a degenerate pair
    assert b.eigenvalues[1] == pytest.approx(b.eigenvalues[2], rel=1e-8)
    g = op2d.grid
    assert np.allclose(g.cell * b.vectors.T @ b.vectors, np.eye(6), atol=1e-10)


def test_csv_roundtrip(basis1d, tmp_path):
    path = tmp_path / "basis.csv"
    basis1d.to_csv(path)
    eig, pts, vecs = read_basis_csv(path)
    assert np.array_equal(eig, basis1d.eigenvalues)
    assert np.array_equal(vecs, basis1d.vectors)
    assert np.array_equal(pts, basis1d.op.grid.interior_nodes)
