import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from hyperlp.errors import DimensionError
from hyperlp.linalg import as_matrix, as_vector, dot, matvec, norm_inf

finite_floats = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)


def vectors(length):
    return hnp.arrays(np.float64, (length,), elements=finite_floats)


def test_dot_hand_example():
    assert dot([1.0, 2.0, 3.0], [4.0, 5.0, 6.0]) == 32.0


def test_dot_zero_annihilates():
    x = np.arange(5.0)
    assert dot(x, np.zeros(5)) == 0.0


def test_dot_matches_naive_loop():
    rng = np.random.default_rng(1)
    a = rng.normal(size=10)
    b = rng.normal(size=10)
    acc = 0.0
    for i in range(10):
        acc += a[i] * b[i]
    assert dot(a, b) == pytest.approx(acc, abs=1e-12)


def test_dot_length_mismatch():
    with pytest.raises(DimensionError):
        dot([1.0], [1.0, 2.0])


@settings(max_examples=100, deadline=None)
@given(a=vectors(7), b=vectors(7))
def test_dot_symmetry(a, b):
    assert dot(a, b) == dot(b, a)


def test_matvec_hand_example():
    out = matvec([[1.0, 2.0], [3.0, 4.0]], [1.0, 1.0])
    assert np.array_equal(out, [3.0, 7.0])


def test_matvec_identity():
    x = np.arange(6.0)
    assert np.array_equal(matvec(np.eye(6), x), x)


def test_matvec_matches_naive_loops():
    rng = np.random.default_rng(2)
    A = rng.normal(size=(8, 5))
    x = rng.normal(size=5)
    want = np.array([sum(A[i][j] * x[j] for j in range(5)) for i in range(8)])
    assert np.allclose(matvec(A, x), want, atol=1e-12)


def test_matvec_dimension_error():
    with pytest.raises(DimensionError):
        matvec(np.eye(3), np.zeros(4))


@settings(max_examples=50, deadline=None)
@given(
    x=vectors(4),
    y=vectors(4),
    alpha=st.floats(min_value=-100, max_value=100, allow_nan=False),
    beta=st.floats(min_value=-100, max_value=100, allow_nan=False),
)
def test_matvec_linearity(x, y, alpha, beta):
    rng = np.random.default_rng(3)
    A = rng.normal(size=(3, 4))
    lhs = matvec(A, alpha * x + beta * y)
    rhs = alpha * matvec(A, x) + beta * matvec(A, y)
    scale = max(1.0, np.max(np.abs(lhs)), np.max(np.abs(rhs)))
    assert np.max(np.abs(lhs - rhs)) / scale < 1e-10


def test_norm_inf_examples():
    assert norm_inf([-3.0, 2.0]) == 3.0
    assert norm_inf(np.zeros(4)) == 0.0


def test_norm_inf_matches_loop():
    rng = np.random.default_rng(4)
    x = rng.normal(size=17)
    assert norm_inf(x) == max(abs(v) for v in x)


def test_norm_inf_empty_rejected():
    with pytest.raises(DimensionError):
        norm_inf(np.zeros(0))


@settings(max_examples=100, deadline=None)
@given(x=vectors(6), alpha=st.floats(min_value=-32.0, max_value=32.0, allow_nan=False))
def test_norm_inf_absolute_homogeneity_on_exact_scalars(x, alpha):
    # exact equality holds for scaling factors that are powers of two
    alpha = float(np.ldexp(1.0, int(alpha) % 8)) * (-1.0 if alpha < 0 else 1.0)
    assert norm_inf(alpha * x) == abs(alpha) * norm_inf(x)


def test_validation_rejects_non_finite():
    with pytest.raises(DimensionError):
        as_vector([1.0, np.nan])
    with pytest.raises(DimensionError):
        as_matrix([[np.inf]])
    with pytest.raises(DimensionError):
        as_vector([[1.0, 2.0]])
    with pytest.raises(DimensionError):
        as_matrix([1.0, 2.0])
