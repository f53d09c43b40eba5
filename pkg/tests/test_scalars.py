from fractions import Fraction

import pytest
from hypothesis import given

from qplane_calculi.utils import (DivisionByZeroError, ONE, Q, QMatrix, ZERO, qs, qs_arith, qs_eval, qs_from_json,
                                  qs_inv, qs_limit_q1, qs_pow, qs_power, qs_render, qs_sqrt, qs_substitute,
                                  qs_to_json)
from tests.strategies import rationals, scalars


def test_coercions_agree():
    assert qs('2/3') == qs(Fraction(2, 3)) == qs_arith(2, 3, 'div')
    assert qs(0) == ZERO
    with pytest.raises(TypeError):
        qs(True)


def test_division_by_zero():
    with pytest.raises(DivisionByZeroError):
        qs_arith(Q, 0, 'div')
    with pytest.raises(ZeroDivisionError):
        qs_inv(Q - Q)


def test_canonical_forms_compare_structurally():
    assert (Q**2 - ONE) / (Q - ONE) == Q + ONE
    assert qs_pow(-2) * qs_pow(2) == ONE
    assert qs_power(Q + ONE, -1) == qs_inv(Q + ONE)


def test_limit_at_one():
    assert qs_limit_q1((Q**2 - ONE) / (Q - ONE)).value == 2
    assert qs_limit_q1(Q / (Q - ONE)).pole_order == 1
    assert qs_limit_q1(qs_inv((Q - ONE)**2)).pole_order == 2
    assert qs_limit_q1(ZERO).value == 0


def test_eval_and_pole():
    assert qs_eval(Q / (Q - ONE), 2) == 2
    assert qs_eval(qs_inv(Q), '1/3') == 3
    with pytest.raises(DivisionByZeroError):
        qs_eval(Q / (Q - ONE), 1)


def test_substitution():
    assert qs_substitute(Q, -qs_inv(Q)) == -qs_inv(Q)
    assert qs_substitute(Q**2 + ONE, qs_pow(-4)) == qs_pow(-8) + ONE


def test_sqrt():
    root = qs_sqrt((Q + ONE)**2 / (4 * Q**2))
    assert root * root == (Q + ONE)**2 / (4 * Q**2)
    assert qs_sqrt(Q) is None
    assert qs_sqrt(qs(2)) is None
    assert qs_sqrt(ZERO) == ZERO


def test_render():
    assert qs_render(Q**2 / (Q**4 - ONE)) == 'q^2/(q^4 - 1)'
    assert qs_render(Q / (Q - ONE)) == 'q/(q - 1)'
    assert qs_render(qs('2/3')) == '2/3'
    assert qs_render(-ONE) == '-1'


@given(scalars(), scalars(), scalars())
def test_field_distributivity(a, b, c):
    assert (a + b) * c == a * c + b * c


@given(scalars(nonzero=True))
def test_inverse(a):
    assert a * qs_inv(a) == ONE


@given(scalars())
def test_json_preserves_value(a):
    assert qs_from_json(qs_to_json(a)) == a


@given(scalars(), rationals)
def test_eval_is_a_homomorphism(a, r):
    b = a * a + Q
    try:
        assert qs_eval(b, r) == qs_eval(a, r)**2 + r
    except DivisionByZeroError:
        pass


def test_matrix_arithmetic():
    m = QMatrix.from_rows([[1, Q], [0, 1]])
    assert (QMatrix.identity(2) * m) == m
    assert m * m.inverse() == QMatrix.identity(2)
    assert m.transpose().entry(1, 0) == Q
    assert (m - m).is_zero()
    assert (m * 2).entry(0, 1) == 2 * Q


def test_matrix_singular():
    singular = QMatrix.from_rows([[1, Q], [qs_inv(Q), 1]])
    assert singular.rank() == 1
    assert singular.rank_agrees()
    with pytest.raises(DivisionByZeroError):
        singular.inverse()
    kernel = singular.kernel()
    assert len(kernel) == 1
    v = kernel[0]
    assert v[0] + Q * v[1] == ZERO


def test_matrix_solve():
    m = QMatrix.from_rows([[1, 1], [1, -1]])
    assert m.solve([2 * Q, 0]) == [Q, Q]
    inconsistent = QMatrix.from_rows([[1, 1], [1, 1]])
    assert inconsistent.solve([1, 2]) is None


def test_rref_column_order():
    m = QMatrix.from_rows([[1, Q, 0], [0, 0, 1]])
    rows, pivots = m.rref(column_order=[1, 0, 2])
    assert pivots == [1, 2]
    assert rows[0][1] == ONE and rows[0][0] == qs_inv(Q)


def test_matrix_json():
    m = QMatrix.from_rows([[Q, qs('1/2')], [qs_inv(Q - ONE), 0]])
    assert QMatrix.from_json(m.to_json()) == m
