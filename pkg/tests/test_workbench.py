import json

import pytest

from _QPLANE.resource.reports import Report
from _QPLANE.scripts.workbench import EXIT_FAILURE, EXIT_OK, EXIT_PARSE, EXIT_PRESET, run
from qplane_calculi.utils import QMatrix


def _json(capsys, argv):
    code = run(argv + ['--format', 'json'])
    return code, Report.loads(capsys.readouterr().out)


def test_list_presets(capsys):
    code, report = _json(capsys, ['list-presets'])
    assert code == EXIT_OK
    ids = [p['id'] for p in report.payload['presets']]
    assert ids == ['calc2a', 'calc2b', 'calc3a', 'calc3b', 'outer']


def test_list_presets_text(capsys):
    assert run(['list-presets', '--format', 'text']) == EXIT_OK
    assert 'calc3b' in capsys.readouterr().out


def test_eval_normalizes(capsys):
    code, report = _json(capsys, ['eval', 'x*y - q*y*x'])
    assert code == EXIT_OK
    assert report.payload['value'] == '0'
    code, report = _json(capsys, ['eval', 'x*dx - q*dx*x', '--preset', 'calc2a'])
    assert code == EXIT_OK
    assert report.payload['value'] == '0'
    assert report.parameters['preset'] == 'calc2a'


@pytest.mark.parametrize('argv', [['eval', 'x +'], ['eval', 'x*dx'], ['eval', 'x/y']])
def test_parse_errors_exit_2(argv, capsys):
    assert run(argv) == EXIT_PARSE
    assert capsys.readouterr().out == ''


@pytest.mark.parametrize('argv', [
    ['verify', 'calc9'],
    ['verify'],
    ['verify', 'calc2a', '--check', 'no.such.check'],
    ['structure', 'calc3a', '--alpha', '0']
])
def test_preset_errors_exit_3(argv):
    assert run(argv) == EXIT_PRESET


def test_bad_alpha_is_an_argument_error():
    with pytest.raises(SystemExit):
        run(['structure', 'calc3a', '--alpha', 'one'])


@pytest.mark.parametrize('preset', ['calc2a', 'calc2b', 'outer'])
def test_verify_passes(preset, capsys):
    code, report = _json(capsys, ['verify', preset])
    assert code == EXIT_OK
    assert report.passed
    assert report.to_json()['status'] == 'pass'
    assert report.checks


def test_verify_third_calculus_with_alpha(capsys):
    code, report = _json(capsys, ['verify', 'calc3a', '--alpha', '2/3'])
    assert code == EXIT_OK
    assert report.parameters['alpha'] == '2/3'


def test_verify_single_check_with_numeric(capsys):
    code, report = _json(capsys, ['verify', 'calc2a', '--check', 'commutation.x_dx', '--q', '3'])
    assert code == EXIT_OK
    assert [check.check_id for check in report.checks] == ['commutation.x_dx']
    assert report.checks[0].numeric == 'q=3: 0'
    assert report.parameters['q'] == '3'


def test_verify_is_deterministic(capsys):
    _, first = _json(capsys, ['verify', 'calc2a'])
    _, second = _json(capsys, ['verify', 'calc2a'])
    assert first.canonical() == second.canonical()
    assert first == second


def test_structure_of_third_calculus(capsys):
    code, report = _json(capsys, ['structure', 'calc3a', '--alpha', '1'])
    assert code == EXIT_OK
    D = report.payload['D']
    assert set(D) == {'3,1,2', '3,2,1'}
    assert report.payload['basis']['2'] == [[1, 2], [1, 3], [2, 1], [2, 3]]


def test_structure_of_outer_calculus(capsys):
    code, report = _json(capsys, ['structure', 'outer'])
    assert code == EXIT_OK
    assert 'Cabc' not in report.payload
    assert report.payload['dtheta'] == ['0', '0']


def test_connection_with_solver(capsys):
    code, report = _json(capsys, ['connection', 'calc2a', '--solve'])
    assert code == EXIT_OK
    named = {entry['label']: entry for entry in report.payload['named']}
    assert named['metric']['checks']['metric'] and named['metric']['checks']['q1_regular']
    assert not named['singular']['checks']['q1_regular']
    assert not named['C']['checks']['metric']
    assert len(report.payload['solutions']) == 3


def test_connection_on_outer_calculus_fails():
    assert run(['connection', 'outer']) == EXIT_FAILURE


def test_limit_of_second_calculus(capsys):
    code, report = _json(capsys, ['limit', 'calc2b'])
    assert code == EXIT_OK
    assert 'K' in report.payload
    assert report.payload['K_status'] == 'match'


def test_limit_crosscheck(capsys):
    _, report = _json(capsys, ['limit', 'calc2a'])
    status = {entry['label']: entry['status'] for entry in report.payload['crosschecks']}
    assert status['metric'] == 'match'
    assert status['singular'] == 'pole'


def test_limit_of_third_calculus_fails():
    assert run(['limit', 'calc3a']) == EXIT_FAILURE


def test_report_json_roundtrip(capsys):
    assert run(['structure', 'calc2a', '--format', 'json']) == EXIT_OK
    text = capsys.readouterr().out
    report = Report.loads(text)
    assert json.loads(report.dumps()) == json.loads(text)
    assert 'timestamp' not in json.loads(report.canonical())


def test_structure_schema(capsys):
    _, report = _json(capsys, ['structure', 'calc2a'])
    assert {'C2', 'Cabc', 'D', 'K', 'theta', 'relations'} <= set(report.payload)
    C2 = QMatrix.from_json(report.payload['C2'])
    assert (C2.rows, C2.cols) == (4, 4)
    assert all(isinstance(r, str) for r in report.payload['relations'])
    assert report.payload['theta']['degree'] == 1


def test_connection_schema(capsys):
    _, report = _json(capsys, ['connection', 'calc2a'])
    assert {'S', 'g', 'omega', 'checks'} <= set(report.payload)
    assert set(report.payload['checks']) == {'sigma', 'metric', 'torsion_free', 'symmetric_metric', 'q1_regular'}
    assert QMatrix.from_json(report.payload['g']).is_identity()
    assert QMatrix.from_json(report.payload['S']).rows == 4
    assert report.payload['label'] == 'metric'


def test_limit_schema(capsys):
    _, report = _json(capsys, ['limit', 'calc2a'])
    assert {'p', 'frame', 'K', 'crosscheck'} <= set(report.payload)
    assert set(report.payload['crosscheck']) >= {'status', 'residual'}
    assert report.payload['crosscheck']['status'] == 'match'
    assert report.payload['K'] == 'x^2 + y^2'
    assert len(report.payload['p']) == len(report.payload['frame']) == 2


def test_limit_schema_of_outer_calculus(capsys):
    code, report = _json(capsys, ['limit', 'outer'])
    assert code == EXIT_OK
    assert report.payload['p'] is None
    assert report.payload['crosscheck'] == {'status': 'unsupported', 'residual': None}


def test_structure_text_renders_matrices(capsys):
    assert run(['structure', 'calc2a', '--format', 'text']) == EXIT_OK
    out = capsys.readouterr().out
    assert 'C2:' in out
    assert '[ ' in out
