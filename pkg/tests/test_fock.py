import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kerrbattery.errors import DimensionError
from kerrbattery.fock import (
    HilbertSpec,
    adjoint,
    annihilation,
    commutator,
    creation,
    embed_battery,
    embed_charger,
    identity,
    is_hermitian,
    number_operator,
    tensor,
)


def test_annihilation_dim2():
    np.testing.assert_array_equal(annihilation(2), [[0, 1], [0, 0]])


def test_annihilation_dim3_number_identity():
    a = annihilation(3)
    np.testing.assert_allclose(adjoint(a) @ a, np.diag([0, 1, 2]), atol=1e-14)


def test_truncated_commutator_dim4():
    a = annihilation(4)
    np.testing.assert_allclose(commutator(a, adjoint(a)), np.diag([1, 1, 1, -3]), atol=1e-14)


@pytest.mark.parametrize("dim", [1, 0, -2, 2.5])
def test_invalid_dimension(dim):
    with pytest.raises(DimensionError):
        annihilation(dim)
    with pytest.raises(DimensionError):
        number_operator(dim)


def test_hilbert_spec_validation():
    with pytest.raises(DimensionError):
        HilbertSpec(1, 3)
    spec = HilbertSpec(3, 4)
    assert spec.dim == 12
    assert spec.shape4 == (3, 4, 3, 4)


def test_operators_are_immutable():
    a = annihilation(3)
    with pytest.raises(ValueError):
        a[0, 0] = 1.0


def test_adjoint_examples():
    np.testing.assert_array_equal(adjoint(annihilation(2)), [[0, 0], [1, 0]])
    h = number_operator(4)
    np.testing.assert_array_equal(adjoint(h), h)
    a = annihilation(3)
    np.testing.assert_array_equal(adjoint(1j * a), -1j * adjoint(a))
    np.testing.assert_array_equal(adjoint(adjoint(a)), a)


def test_number_operator_examples():
    np.testing.assert_array_equal(number_operator(3), np.diag([0, 1, 2]))
    a = annihilation(25)
    np.testing.assert_allclose(adjoint(a) @ a, number_operator(25), atol=1e-14)
    assert np.trace(number_operator(5)).real == 10


def test_creation_raises_level():
    ad = creation(4)
    ket = np.zeros(4)
    ket[1] = 1
    np.testing.assert_allclose(ad @ ket, np.sqrt(2) * np.eye(4)[2])


def test_tensor_examples():
    np.testing.assert_array_equal(tensor(identity(2), identity(3)), identity(6))
    a, b = annihilation(3), annihilation(3)
    np.testing.assert_allclose(tensor(a, identity(3)) @ tensor(identity(3), b), tensor(a, b))
    x, y = np.diag([1.0, 2.0]), np.diag([3.0, 4.0])
    assert np.trace(tensor(x, y)).real == 21


def test_charger_first_ordering():
    spec = HilbertSpec(2, 2)
    np.testing.assert_array_equal(embed_charger(number_operator(2), spec), np.diag([0, 0, 1, 1]))
    np.testing.assert_array_equal(embed_battery(number_operator(2), spec), np.diag([0, 1, 0, 1]))


def test_embed_shape_mismatch():
    spec = HilbertSpec(2, 3)
    with pytest.raises(DimensionError):
        embed_charger(number_operator(3), spec)
    with pytest.raises(DimensionError):
        embed_battery(number_operator(2), spec)


def test_embedded_operators_commute(rng):
    spec = HilbertSpec(3, 3)
    for _ in range(5):
        x = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        y = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        c = commutator(embed_charger(x, spec), embed_battery(y, spec))
        assert np.linalg.norm(c) < 1e-14


def test_is_hermitian():
    assert is_hermitian(number_operator(5))
    assert not is_hermitian(annihilation(3))


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=2, max_value=30))
def test_number_identity_property(dim):
    a = annihilation(dim)
    np.testing.assert_allclose(adjoint(a) @ a, number_operator(dim), atol=1e-14)
    c = commutator(a, adjoint(a))
    expected = np.eye(dim)
    expected[-1, -1] = -(dim - 1)
    np.testing.assert_allclose(c, expected, atol=1e-13)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 4), st.integers(2, 4), st.integers(2, 4))
def test_tensor_associative(d1, d2, d3):
    # integer entries: products are exact, so association order cannot matter
    x, y, z = number_operator(d1), identity(d2) + number_operator(d2), number_operator(d3)
    left = tensor(tensor(x, y), z)
    np.testing.assert_array_equal(left, tensor(x, tensor(y, z)))
    assert left.shape == (d1 * d2 * d3,) * 2
    # sqrt(n) entries: equal up to one rounding of the triple product
    x, z = annihilation(d1), creation(d3)
    left = tensor(tensor(x, y), z)
    np.testing.assert_allclose(left, tensor(x, tensor(y, z)), rtol=1e-15, atol=0)
