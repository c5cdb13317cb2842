import numpy as np
import pytest
from scipy.linalg import hilbert
from scipy.sparse import csr_matrix

from piezofem.errors import NonFiniteState, SingularLift, SolveFailure
from piezofem.linalg import SOLVE_RTOL, Factorized


def test_solve_matches_direct():
    A = np.array([
        [4.0, 1.0, 0.0, 0.0],
        [1.0, 5.0, 2.0, 0.0],
        [0.0, 2.0, 6.0, 1.0],
        [0.0, 0.0, 1.0, 3.0],
    ])
    b = np.array([1.0, -2.0, 3.0, 0.5])
    x = Factorized(csr_matrix(A)).solve(b)
    assert np.allclose(x, np.linalg.solve(A, b), rtol=1e-13)
    assert np.linalg.norm(b - A @ x) <= SOLVE_RTOL * np.linalg.norm(b)


def test_zero_rhs_gives_exact_zeros():
    A = csr_matrix(np.diag([3.0, 5.0, 7.0]))
    x = Factorized(A).solve(np.zeros(3))
    assert np.array_equal(x, np.zeros(3))


def test_refinement_on_ill_conditioned_system():
    # Hilbert(10) has condition number ~1e13; a single LU pass leaves a
    # residual well above the tolerance, so refinement has to work.
    A = hilbert(10)
    x_true = np.ones(10)
    b = A @ x_true
    x = Factorized(csr_matrix(A), "hilbert").solve(b)
    assert np.linalg.norm(b - A @ x) <= SOLVE_RTOL * np.linalg.norm(b)


def test_singular_matrix_raises_named_error():
    singular = csr_matrix(np.array([[1.0, 2.0], [2.0, 4.0]]))
    with pytest.raises(SolveFailure):
        Factorized(singular)
    with pytest.raises(SingularLift):
        Factorized(singular, "lift block", error_cls=SingularLift)


def test_nonfinite_rhs_rejected():
    A = csr_matrix(np.eye(2))
    with pytest.raises(NonFiniteState):
        Factorized(A).solve(np.array([1.0, np.nan]))
