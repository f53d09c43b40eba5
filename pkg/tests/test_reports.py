from fractions import Fraction

import pytest

import _QPLANE.resource.config as cfg
from _QPLANE import QPLANE_RESOURCE_DIR
from _QPLANE.resource.reports import CONVENTIONS, Report, render_payload
from qplane_calculi.calculus import CheckResult
from qplane_calculi.utils import ONE, Q, X, qs_inv, qs_to_json


def _report():
    checks = [CheckResult('squares.dx', 'dx dx = 0', True, '0', 'q=2: 0'),
              CheckResult('connection.metric.C', 'S = C is not metric compatible', False, 'False')]
    return Report('calc2a', 'verify', {'q': '2'}, checks, payload={'K': 'x^2 + y^2'})


def test_status_follows_checks():
    report = _report()
    assert not report.passed
    assert [c.check_id for c in report.failures] == ['connection.metric.C']
    assert report.to_json()['status'] == 'fail'
    assert Report(None, 'list-presets').passed


def test_json_roundtrip_ignores_timestamp():
    report = _report()
    restored = Report.loads(report.dumps())
    assert restored == report
    restored.timestamp = 'later'
    assert restored.canonical() == report.canonical()
    assert report.to_json()['conventions'] == CONVENTIONS


def test_render_text():
    text = _report().render_text()
    assert text.splitlines()[0] == 'verify calc2a'
    assert 'checks: 1/2 passed' in text
    assert '[fail] connection.metric.C' in text
    assert 'numeric: q=2: 0' in text


def test_render_payload_scalars_and_elements():
    payload = {'D': {'3,1,2': qs_to_json(qs_inv(Q - ONE) * 2)}, 'lam': X.to_json(), 'flag': True}
    lines = render_payload(payload)
    assert lines[0] == 'D:'
    assert lines[1] == '  3,1,2: 2/(q - 1)'
    assert 'lam: x' in lines
    assert 'flag: True' in lines


def test_config_reads_typed_options():
    cfg.initialize(f"{QPLANE_RESOURCE_DIR}/config", environment='default')
    assert cfg.read_rational('calc3', 'alpha') == Fraction(1)
    assert cfg.read_int('workers', 'checks') >= 1
    assert cfg.read('output', 'format') in ('text', 'json')
    assert 'level' in cfg.read('logging')


def test_missing_environment():
    with pytest.raises(FileNotFoundError):
        cfg.initialize(f"{QPLANE_RESOURCE_DIR}/config", environment='nowhere')
    cfg.initialize(f"{QPLANE_RESOURCE_DIR}/config", environment='default')
