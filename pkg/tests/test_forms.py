import pytest
from hypothesis import given, strategies as st

from _QPLANE.resource.presets import PRESET_IDS
from qplane_calculi.calculus import (CalculusSpec, Check, build_calculus, coordinate_dtheta, coordinate_form, d,
                                     extract_structure, frame_in_coordinates, relation_report, second_order_checks,
                                     run_checks, verify_second_order, wedge)
from qplane_calculi.utils import (CalculusError, InnerDerivation, ONE, PlaneElement, Q,
                                  QMatrix, UnsupportedError, X, Y, qs, qs_inv)
from tests.strategies import elements, one_forms, preset_handle

PRESETS = ['calc2a', 'calc2b', 'calc3a', 'calc3a_two_thirds', 'calc3b', 'outer']


def _failures(results):
    return [f"{r.check_id}: {r.residual}" for r in results if not r.passed]


@pytest.mark.parametrize('preset', PRESETS)
def test_second_order_identities_hold(preset, request):
    handle = request.getfixturevalue(preset)
    assert _failures(verify_second_order(handle, workers=4)) == []


def test_identity_tables_are_attached(calc2a, outer):
    ids = [check.check_id for check in second_order_checks(calc2a)]
    assert 'commutation.x_dx' in ids and 'dtheta.t1' in ids and 'derivations.e1_x' in ids
    outer_ids = [check.check_id for check in second_order_checks(outer)]
    assert 'structure_symmetrized' not in outer_ids
    assert 'frame_differential' not in outer_ids
    assert len(ids) == len(set(ids))


def test_numeric_pass(calc2a):
    results = verify_second_order(calc2a, q_value=2)
    assert all(r.numeric == 'q=2: 0' for r in results if r.passed)


def test_quotient_bases(calc2a, calc3a, calc3b):
    assert calc2a.basis(2) == [(0, 1)]
    assert calc2a.basis(3) == []
    assert calc3a.basis(2) == [(0, 1), (0, 2), (1, 0), (1, 2)]
    assert calc3b.basis(2) == [(0, 1), (0, 2), (1, 2)]
    assert calc3b.basis(3) == [(0, 1, 2)]


def test_wedge_reduces_to_basis(calc2a):
    t1, t2 = calc2a.theta_form(0), calc2a.theta_form(1)
    assert wedge(t2, t1) == wedge(t1, t2).scale(-qs_inv(Q))
    assert wedge(t1, t1).is_zero()


def test_degree_cap(calc3b):
    top = calc3b.word_form((0, 1, 2))
    assert top
    with pytest.raises(CalculusError):
        wedge(top, calc3b.theta_form(0))


def test_mixed_degrees_rejected(calc2a):
    with pytest.raises(CalculusError):
        calc2a.theta_form(0) + calc2a.element(X)


def test_first_calculus_frame(calc2a):
    dx, dy = coordinate_form(calc2a, 'dx'), coordinate_form(calc2a, 'dy')
    assert dx == (-(X * Y)) * calc2a.theta_form(0)
    assert dy == (X * Y) * calc2a.theta_form(1)
    F = frame_in_coordinates(calc2a)
    assert F[0][0] == PlaneElement.monomial(-1, -1, -qs_inv(Q))
    assert F[1][1] == PlaneElement.monomial(-1, -1, qs_inv(Q))
    assert not F[0][1] and not F[1][0]


def test_first_calculus_relations(calc2a):
    rendered = [r.render() for r in relation_report(calc2a)]
    assert 'x dx = q dx x' in rendered
    assert 'y dy = (1/q) dy y' in rendered
    assert len(rendered) == 4


def test_first_calculus_structure(calc2a):
    s = extract_structure(calc2a)
    assert not any(s.D.values())
    t12 = calc2a.word_form((0, 1))
    assert s.dtheta[0] == X * t12
    assert s.dtheta[1] == Y * t12
    assert s.theta == calc2a.theta()


def test_second_calculus_structure_signs(calc2b):
    s = extract_structure(calc2b)
    t12 = calc2b.word_form((0, 1))
    assert s.dtheta[0] == -(PlaneElement.monomial(-2, 0) * t12)
    assert s.dtheta[1] == -(PlaneElement.monomial(-2, 2) * t12)


@pytest.mark.parametrize('preset, alpha', [('calc3a', 1), ('calc3a_two_thirds', '2/3')])
def test_third_calculus_d(preset, alpha, request):
    s = extract_structure(request.getfixturevalue(preset))
    d312 = 2 * qs_inv(qs(alpha) * (Q - ONE))
    assert s.D[(2, 0, 1)] == d312
    assert s.D[(2, 1, 0)] == Q * d312
    nonzero = {k for k, v in s.D.items() if v}
    assert nonzero == {(2, 0, 1), (2, 1, 0)}
    assert not any(s.K.values())


def test_third_calculus_b_has_no_d(calc3b):
    s = extract_structure(calc3b)
    assert not any(s.D.values()) and not any(s.K.values())


def test_outer_has_no_structure(outer):
    with pytest.raises(UnsupportedError):
        outer.structure()
    assert coordinate_dtheta(outer, 0).is_zero()


def test_rejects_non_involutive_c():
    k = Q / (Q - ONE)
    ders = (InnerDerivation(lam=Y.scale(k)), InnerDerivation(lam=X.scale(k)))
    C = QMatrix.from_rows([[1, 0, 0, 0], [0, 0, Q, 0], [0, Q, 0, 0], [0, 0, 0, 1]])
    with pytest.raises(CalculusError):
        build_calculus(CalculusSpec(2, ders, C))


def test_incompatible_lambda():
    # lam_1 = x, lam_2 = 2x are dependent, so no (D, K) decomposition is unique
    ders = (InnerDerivation(lam=X.scale(Q / (Q - ONE))), InnerDerivation(lam=X.scale(2 * Q / (Q - ONE))))
    C = QMatrix.from_rows([[1, 0, 0, 0], [0, 0, Q, 0], [0, qs_inv(Q), 0, 0], [0, 0, 0, 1]])
    with pytest.raises(CalculusError):
        build_calculus(CalculusSpec(2, ders, C)).structure()


@pytest.mark.parametrize('preset', [('calc2a', '1'), ('calc2b', '1'), ('calc3a', '2/3'), ('calc3b', '1'),
                                    ('outer', '1')])
@given(f=elements(max_terms=2))
def test_d_squared_vanishes(preset, f):
    handle = preset_handle(*preset)
    assert d(handle.d(f)).is_zero()


@pytest.mark.parametrize('preset', ['calc2a', 'calc2b', 'calc3b', 'outer'])
@given(f=elements(max_terms=2), g=elements(max_terms=2))
def test_leibniz_on_functions(preset, f, g):
    handle = preset_handle(preset)
    assert handle.d(f * g) == handle.d(f) * g + f * handle.d(g)


@pytest.mark.parametrize('preset', PRESET_IDS)
@given(data=st.data())
def test_graded_leibniz_on_one_forms(preset, data):
    handle = preset_handle(preset)
    alpha = data.draw(one_forms(handle))
    beta = data.draw(one_forms(handle))
    assert handle.d(alpha * beta) == handle.d(alpha) * beta - alpha * handle.d(beta)


@pytest.mark.parametrize('preset', PRESET_IDS)
@given(data=st.data())
def test_graded_leibniz_on_functions_times_forms(preset, data):
    handle = preset_handle(preset)
    f = data.draw(elements(max_terms=2))
    beta = data.draw(one_forms(handle))
    assert handle.d(f * beta) == handle.d(f) * beta + f * handle.d(beta)


def test_check_errors_become_failures():
    def unsound():
        raise AssertionError("S must be square of size n^2.")

    checks = [Check('zero', 'x y - q y x = 0', lambda: X * Y - (Y * X).scale(Q)),
              Check('assertion', 'raises a plain exception', unsound),
              Check('domain', 'raises a workbench error', lambda: (X + Y).inverse())]
    results = run_checks(checks, workers=2)
    assert [r.check_id for r in results] == ['zero', 'assertion', 'domain']
    assert [r.passed for r in results] == [True, False, False]
    assert results[1].residual == 'error: AssertionError: S must be square of size n^2.'
    assert results[2].residual.startswith('error: ')


@pytest.mark.parametrize('preset', PRESETS)
def test_completeness_matches_quotient_dimension(preset, request):
    handle = request.getfixturevalue(preset)
    assert len(handle.basis(2)) == (QMatrix.identity(handle.n ** 2) - handle.C).rank()
    check = next(c for c in second_order_checks(handle) if c.check_id == 'completeness')
    residual = check.compute()
    assert not residual['dimension']
    assert residual['kernel'].rows == handle.n ** 2 - len(handle.basis(2))
    assert residual['kernel'].is_zero()
