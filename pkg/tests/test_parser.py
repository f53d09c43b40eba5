import pytest
from hypothesis import given

from _QPLANE.resource.parser import parse_expr, render_value
from qplane_calculi.calculus import GradedForm
from qplane_calculi.utils import ONE, ParseError, PlaneElement, Q, X, X_INV, Y, Y_INV, qs, qs_inv
from tests.strategies import elements, preset_handle


def test_defining_relation_normalizes_to_zero():
    assert parse_expr('x*y - q*y*x') == 0
    assert parse_expr('y*x') == PlaneElement.monomial(1, 1, qs_inv(Q))


def test_inverse_generators():
    assert parse_expr('y^-1*x^-1') == PlaneElement.monomial(-1, -1, qs_inv(Q))
    assert parse_expr('y^-1*x^-1') == Y_INV * X_INV


def test_rational_literals_and_scalars():
    assert parse_expr('2/3*x') == X.scale(qs('2/3'))
    assert parse_expr('q/(q - 1)*y') == Y.scale(Q / (Q - ONE))
    assert parse_expr('-(x + y)') == -(X + Y)
    assert parse_expr('(x + y)^2') == X * X + X * Y + Y * X + Y * Y


def test_commutation_in_preset_context(calc2a):
    assert parse_expr('x*dx - q*dx*x', calc2a) == 0
    assert parse_expr('dx*dx', calc2a) == 0


def test_degree_zero_forms_become_elements(calc2a):
    value = parse_expr('dx^0*y', calc2a)
    assert isinstance(value, PlaneElement)
    assert value == Y


def test_forms_keep_their_degree(calc2a):
    value = parse_expr('x*t1*t2', calc2a)
    assert isinstance(value, GradedForm)
    assert value.degree == 2
    assert parse_expr('d(t1)', calc2a) == value


def test_frame_symbols_in_three_generator_calculus(calc3a):
    assert parse_expr('t3*t3', calc3a) == 0
    assert parse_expr('t1*t3 + q*t3*t1', calc3a) == 0


@pytest.mark.parametrize('text, position, message', [
    ('x +', 3, 'Unexpected end of input'),
    ('x $ y', 2, "Unexpected character '$'"),
    ('foo', 0, "Unknown symbol 'foo'"),
    ('x*bar', 2, "Unknown symbol 'bar'"),
    ('dx', 0, "'dx' requires a preset context"),
    ('2*t1', 2, "'t1' requires a preset context"),
    ('x/y', 1, 'Division only by nonzero scalars'),
    ('x/0', 1, 'Division only by nonzero scalars'),
    ('(x + y', 6, "Expected ')'"),
    ('x^y', 2, 'Exponent must be an integer'),
    ('x y', 2, "Unexpected 'y'")
])
def test_parse_errors_report_position(text, position, message):
    with pytest.raises(ParseError) as error:
        parse_expr(text)
    assert error.value.position == position
    assert message in str(error.value)


def test_frame_symbol_out_of_range(calc2a):
    with pytest.raises(ParseError) as error:
        parse_expr('x*t3', calc2a)
    assert error.value.position == 2
    assert 'frame generators' in str(error.value)


def test_forms_have_no_negative_powers(calc2a):
    with pytest.raises(ParseError) as error:
        parse_expr('dx^-1', calc2a)
    assert error.value.position == 2


def test_non_invertible_power_is_a_parse_error():
    with pytest.raises(ParseError) as error:
        parse_expr('(x + y)^-1')
    assert error.value.position == 7


@given(f=elements())
def test_render_then_parse_is_identity(f):
    assert parse_expr(render_value(f)) == f


@given(f=elements(2), g=elements(2))
def test_render_then_parse_forms(f, g):
    handle = preset_handle('calc2a')
    form = handle.form(1, {(0,): f, (1,): g})
    assert parse_expr(render_value(form), handle) == form


@given(f=elements(2))
def test_render_then_parse_two_forms(f):
    handle = preset_handle('calc3b')
    form = handle.form(2, {(0, 1): f, (1, 2): X * f})
    assert parse_expr(render_value(form), handle) == form
