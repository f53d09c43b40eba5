from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields
from fractions import Fraction

import pytest
from hypothesis import given

from qplane_calculi.utils import (InconsistentDerivationError, InnerDerivation, NonInvertibleError, ONE,
                                  OuterDerivation, PlaneElement, PoleError, Q, X, X_INV, Y, Y_INV, der_apply,
                                  laurent_monomial, pe_commutator, pe_eval_q1, pe_is_central, pe_mul, qs_inv, qs_pow)
from tests.strategies import elements, integer_elements, monomials, scalars


def test_defining_relation():
    assert X * Y == (Y * X).scale(Q)
    assert pe_mul(Y, X) == PlaneElement.monomial(1, 1, qs_inv(Q))


def test_normal_order_of_inverses():
    assert Y_INV * X_INV == PlaneElement.monomial(-1, -1, qs_inv(Q))
    assert X_INV * Y_INV == PlaneElement.monomial(-1, -1)
    assert X * X_INV == PlaneElement.scalar(1)


def test_inverse_of_monomial():
    f = PlaneElement.monomial(2, -1, Q + ONE)
    assert f * f.inverse() == PlaneElement.scalar(1)
    assert f.inverse() * f == PlaneElement.scalar(1)
    with pytest.raises(NonInvertibleError):
        (X + Y).inverse()


def test_center_is_scalars():
    assert pe_is_central(PlaneElement.scalar(Q))
    assert not pe_is_central(X * Y)
    assert pe_commutator(X * Y, X) == PlaneElement.monomial(2, 1, qs_inv(Q) - 1)


def test_eval_q1():
    assert pe_eval_q1(X * Y - (Y * X).scale(Q)) == 0
    assert pe_eval_q1(PlaneElement.monomial(-2, 1, 3)) == laurent_monomial(-2, 1, 3)
    with pytest.raises(PoleError) as error:
        pe_eval_q1(Y.scale(Q / (Q - ONE)))
    assert error.value.order == 1


def test_eval_at_rational_q():
    f = Y.scale(Q / (Q - ONE)) + X * Y
    assert f.eval_q(2) == {(0, 1): Fraction(2), (1, 1): Fraction(1)}
    assert (X - X.scale(Q)).eval_q(1) == {}


def test_substitute_coefficients():
    f = X.scale(Q) + Y.scale(qs_pow(-1))
    assert f.substitute(qs_inv(Q)) == X.scale(qs_inv(Q)) + Y.scale(Q)


def test_render():
    assert PlaneElement().render() == '0'
    assert (X * Y).render() == 'x*y'
    assert Y.scale(Q / (Q - ONE)).render() == '(q/(q - 1))*y'
    assert (-X).render() == '-x'
    assert PlaneElement.scalar(qs_pow(2) + 1).render() == '(q^2 + 1)'


@given(elements(), elements(), elements())
def test_associativity(a, b, c):
    assert (a * b) * c == a * (b * c)


@given(elements(), elements(), elements())
def test_distributivity(a, b, c):
    assert a * (b + c) == a * b + a * c
    assert (a + b) * c == a * c + b * c


@given(monomials())
def test_monomial_inverse(f):
    assert f * f.inverse() == PlaneElement.scalar(1)


@given(elements(), scalars())
def test_scalars_are_central(f, c):
    s = PlaneElement.scalar(c)
    assert s * f == f * s == f.scale(c)


@given(integer_elements(), integer_elements())
def test_q1_image_is_multiplicative(a, b):
    assert pe_eval_q1(a * b) == pe_eval_q1(a) * pe_eval_q1(b)


@given(elements())
def test_json_preserves_value(f):
    assert PlaneElement.from_json(f.to_json()) == f


@given(elements(max_terms=2), elements(max_terms=2))
def test_inner_derivation_leibniz(f, g):
    e = InnerDerivation(lam=Y.scale(Q / (Q - ONE)))
    assert der_apply(e, f * g) == der_apply(e, f) * g + f * der_apply(e, g)


@given(elements(max_terms=2), elements(max_terms=2))
def test_outer_derivation_leibniz(f, g):
    e = OuterDerivation(image_x=X, image_y=PlaneElement())
    assert e(f * g) == e(f) * g + f * e(g)


def test_outer_derivation_on_monomials():
    e1 = OuterDerivation(image_x=X, image_y=PlaneElement())
    e2 = OuterDerivation(image_x=PlaneElement(), image_y=Y)
    f = PlaneElement.monomial(3, -2)
    assert e1(f) == f.scale(3)
    assert e2(f) == f.scale(-2)


def test_inconsistent_outer_rule():
    with pytest.raises(InconsistentDerivationError):
        OuterDerivation(image_x=Y, image_y=PlaneElement())


def test_inner_derivation_of_first_calculus():
    k = Q / (Q - ONE)
    e1, e2 = InnerDerivation(lam=Y.scale(k)), InnerDerivation(lam=X.scale(k))
    assert e1(X) == -(X * Y)
    assert e1(Y) == PlaneElement()
    assert e2(Y) == X * Y
    assert e2(X) == PlaneElement()


def test_outer_derivation_is_stateless_across_threads():
    e = OuterDerivation(image_x=X, image_y=Y.scale(2))
    assert [f.name for f in fields(e)] == ['image_x', 'image_y']
    exponents = [(m, n) for m in range(-2, 3) for n in range(-2, 3)] * 3
    with ThreadPoolExecutor(max_workers=4) as executor:
        threaded = list(executor.map(lambda mn: e(PlaneElement.monomial(*mn)), exponents))
    assert threaded == [PlaneElement.monomial(m, n).scale(m + 2 * n) for m, n in exponents]
