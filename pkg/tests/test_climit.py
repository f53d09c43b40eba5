import pytest
from hypothesis import given

from _QPLANE.resource.presets import expected_curvature, named_sigmas
from qplane_calculi.calculus import SigmaTensor
from qplane_calculi.classical_limit import (CForm, cartan_connection, cform_d, classical_chart,
                                            connection_limit_crosscheck, cr_render, frame_equation_check,
                                            gauss_curvature, is_laurent, lift, poisson, poisson_bivector,
                                            poisson_commutator, structure_residual)
from qplane_calculi.utils import (CField, CX, CY, CalculusError, PlaneElement, PoleError, UnsupportedError,
                                  laurent_monomial, pe_eval_q1)
from tests.strategies import integer_elements


def _sigma(preset_id, label):
    return next(s for s in named_sigmas(preset_id) if s.label == label)


def test_poisson_of_generators():
    assert poisson(CX, CY) == CX * CY
    assert poisson_commutator(CX, CY) == CX * CY
    assert poisson_bivector(CY, CX) == -CX * CY
    assert poisson(CX, CX) == 0


def test_poisson_of_non_laurent_uses_bivector():
    f = CField.one / (CX + CY)
    assert not is_laurent(f)
    assert poisson(f, CY) == poisson_bivector(f, CY)
    with pytest.raises(UnsupportedError):
        lift(f)


def test_lift_is_normal_ordered():
    assert lift(laurent_monomial(-1, 2, 3)) == PlaneElement.monomial(-1, 2, 3)
    assert lift(CX * CY + 1) == PlaneElement({(1, 1): 1, (0, 0): 1})


@given(f=integer_elements(), g=integer_elements())
def test_commutator_limit_matches_bivector(f, g):
    f, g = pe_eval_q1(f), pe_eval_q1(g)
    assert poisson_commutator(f, g) == poisson_bivector(f, g)


@given(f=integer_elements(2), g=integer_elements(2), h=integer_elements(2))
def test_jacobi_identity(f, g, h):
    f, g, h = pe_eval_q1(f), pe_eval_q1(g), pe_eval_q1(h)
    total = (poisson(f, poisson(g, h)) + poisson(g, poisson(h, f)) + poisson(h, poisson(f, g)))
    assert total == 0


@given(f=integer_elements())
def test_commutative_d_squared(f):
    assert not cform_d(cform_d(CForm(0, (pe_eval_q1(f),))))


@pytest.mark.parametrize('preset', ['calc2a', 'calc2b', 'outer'])
def test_curvature_of_limit_frame(preset, request):
    chart = classical_chart(request.getfixturevalue(preset))
    assert gauss_curvature(chart.frame) == expected_curvature(preset)


def test_first_calculus_curvature(calc2a):
    K = gauss_curvature(classical_chart(calc2a).frame)
    assert K == CX**2 + CY**2
    assert cr_render(K) == 'x^2 + y^2'


def test_second_calculus_curvature(calc2b):
    K = gauss_curvature(classical_chart(calc2b).frame)
    assert K == (1 + CY**4) / CX**4


def test_first_calculus_connection_form(calc2a):
    frame = classical_chart(calc2a).frame
    omega = cartan_connection(frame)
    assert omega == CForm(1, (laurent_monomial(0, -1), laurent_monomial(-1, 0, -1)))
    assert not any(structure_residual(frame, omega))


@pytest.mark.parametrize('preset', ['calc2a', 'calc2b'])
def test_frame_equation(preset, request):
    chart = classical_chart(request.getfixturevalue(preset))
    assert chart.frame_equation
    assert frame_equation_check(chart.p, chart.frame)[0]
    assert chart.to_json()['poisson'] == '{x, y} = xy'


def test_outer_chart_has_no_momenta(outer):
    chart = classical_chart(outer)
    assert chart.p is None
    assert chart.frame_equation is None
    assert not cartan_connection(chart.frame)


def test_three_dimensional_frames_have_no_chart(calc3a, calc3b):
    for handle in (calc3a, calc3b):
        with pytest.raises(PoleError):
            classical_chart(handle)
    assert expected_curvature('calc3a') is None


def test_degenerate_frame():
    frame = [CForm(1, (CX, CY)), CForm(1, (2 * CX, 2 * CY))]
    with pytest.raises(CalculusError):
        gauss_curvature(frame)


def test_crosscheck_matches_on_first_calculus(calc2a):
    result = connection_limit_crosscheck(calc2a, _sigma('calc2a', 'metric'))
    assert result.status == 'match'
    assert result.candidate == result.cartan
    assert result.to_json()['status'] == 'match'


def test_crosscheck_rejections(calc2a, calc3a, outer):
    with pytest.raises(PoleError):
        connection_limit_crosscheck(calc2a, _sigma('calc2a', 'singular'))
    with pytest.raises(UnsupportedError):
        connection_limit_crosscheck(calc3a, _sigma('calc3a', 'C'))
    with pytest.raises(UnsupportedError):
        connection_limit_crosscheck(outer, SigmaTensor.flip(2))
