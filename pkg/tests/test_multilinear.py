import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from susyfactor.multilinear import (
    DimensionError,
    as_bivector,
    as_symmap,
    basis_bivectors,
    bivector_to_map,
    contract,
    hodge_star_2d,
    map_to_bivector,
    pairing_det,
    wedge,
)

e1, e2 = np.eye(2)


def test_wedge_basis():
    np.testing.assert_array_equal(wedge(e1, e2), [[0, 0.5], [-0.5, 0]])
    assert not wedge(e1, e1).any()


def test_contract_sign_anchor():
    # contract(ξ, u∧v) = (ξ·v)u - (ξ·u)v with ξ = dx1, u = e1, v = e2
    np.testing.assert_array_equal(contract(e1, wedge(e1, e2)), -e2)
    assert not contract(np.zeros(2), wedge(e1, e2)).any()


def test_dimension_errors():
    with pytest.raises(DimensionError):
        wedge(np.ones(2), np.ones(3))
    with pytest.raises(DimensionError):
        contract(np.ones(3), np.zeros((2, 2)))
    with pytest.raises(DimensionError):
        hodge_star_2d(np.ones(3))
    with pytest.raises(ValueError):
        pairing_det([e1, e2, e1], [e1, e2, e1])


def test_pairing_det():
    assert pairing_det([e1], [e1]) == 1.0
    assert pairing_det([e1, e2], [e1, e2]) == 1.0
    assert pairing_det([e1, e2], [e2, e1]) == -1.0


def test_hodge_star():
    np.testing.assert_array_equal(hodge_star_2d(e1), e2)
    U = np.random.default_rng(0).normal(size=(10, 2))
    np.testing.assert_array_equal(hodge_star_2d(hodge_star_2d(U)), -U)
    assert not hodge_star_2d(np.zeros(2)).any()


def test_validation():
    with pytest.raises(ValueError):
        as_bivector([[0, 1], [1, 0]])
    W = as_bivector([[0, 1], [-1 + 1e-14, 0]], atol=1e-12)
    assert np.array_equal(W, -W.T)
    with pytest.raises(ValueError):
        as_symmap([[0, 1], [-1, 0]])


def test_map_bivector_round_trip():
    W = wedge([1.0, 2.0, 3.0], [0.5, -1.0, 2.0])
    np.testing.assert_array_equal(map_to_bivector(bivector_to_map(W)), W)
    xi = np.array([0.3, -0.2, 1.0])
    # ξ⌟W = Bᵗξ for the map B attached to W
    np.testing.assert_allclose(contract(xi, W), bivector_to_map(W).T @ xi, rtol=1e-15)


def test_basis_bivectors():
    B = basis_bivectors(4)
    assert B.shape == (6, 4, 4)
    assert np.all(B + np.swapaxes(B, 1, 2) == 0)
    assert basis_bivectors(1).shape == (0, 1, 1)


vec = arrays(np.float64, 4, elements=st.floats(-10, 10))


@settings(max_examples=300)
@given(vec, vec, vec)
def test_contraction_identity(xi, u, v):
    lhs = contract(xi, wedge(u, v))
    rhs = (xi @ v) * u - (xi @ u) * v
    scale = 1.0 + np.linalg.norm(xi) * np.linalg.norm(u) * np.linalg.norm(v)
    assert np.max(np.abs(lhs - rhs)) <= 1e-13 * scale


@settings(max_examples=300)
@given(vec, vec, vec)
def test_wedge_antisymmetry_and_orthogonality(xi, u, v):
    W = wedge(u, v)
    assert np.array_equal(W, -W.T)
    assert np.array_equal(wedge(v, u), -W)
    scale = 1.0 + np.linalg.norm(xi) ** 2 * np.linalg.norm(u) * np.linalg.norm(v)
    assert abs(contract(xi, W) @ xi) <= 1e-13 * scale


def test_contraction_identity_batch():
    rng = np.random.default_rng(5)
    xi, u, v = rng.normal(size=(3, 1000, 5))
    lhs = contract(xi, wedge(u, v))
    rhs = np.sum(xi * v, axis=1)[:, None] * u - np.sum(xi * u, axis=1)[:, None] * v
    assert np.max(np.abs(lhs - rhs) / (1 + np.abs(rhs))) <= 1e-13
