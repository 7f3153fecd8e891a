import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sptforge.pauli import PauliString, product_of

letters = st.text(alphabet="IXYZ", min_size=1, max_size=4)


def test_single_qubit_products():
    x, y, z = PauliString("X"), PauliString("Y"), PauliString("Z")
    assert (x * y).letters == "Z" and (x * y).coefficient == 1j
    assert (y * x).coefficient == -1j
    assert (z * z).letters == "I" and (z * z).coefficient == 1


def test_from_sites_qubit_zero_first():
    p = PauliString.from_sites(3, {0: "X", 2: "Z"}, -2.0)
    assert p.letters == "XIZ"
    assert p.support == (0, 2)
    assert p.coefficient == -2.0


def test_dense_qubit_zero_is_lsb():
    # X on qubit 0 flips the lowest bit of the basis index
    m = PauliString("XI").dense()
    assert m[1, 0] == 1 and m[2, 0] == 0


@given(letters, st.data())
def test_product_matches_dense(a, data):
    b = data.draw(st.text(alphabet="IXYZ", min_size=len(a), max_size=len(a)))
    pa, pb = PauliString(a), PauliString(b)
    np.testing.assert_allclose((pa * pb).dense(), pa.dense() @ pb.dense(), atol=1e-12)


@given(letters, st.data())
def test_commutation_matches_dense(a, data):
    b = data.draw(st.text(alphabet="IXYZ", min_size=len(a), max_size=len(a)))
    pa, pb = PauliString(a), PauliString(b)
    comm = pa.dense() @ pb.dense() - pb.dense() @ pa.dense()
    assert pa.commutes_with(pb) == bool(np.allclose(comm, 0))


@given(letters)
def test_hermitian_and_squares_to_identity(a):
    p = PauliString(a)
    assert p.is_hermitian()
    np.testing.assert_allclose(p.dense() @ p.dense(), np.eye(1 << len(a)), atol=1e-12)


def test_product_of_requires_matching_width():
    with pytest.raises(ValueError):
        product_of([PauliString("X"), PauliString("XX")])
