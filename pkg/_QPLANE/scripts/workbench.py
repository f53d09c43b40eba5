import os
from argparse import ArgumentParser, ArgumentTypeError
from fractions import Fraction
from typing import List, Optional

# for some users relative imports are prohibitive
# we simplify imports by adding the repository and resource directories to the path environment variable
import sys
repo_dir = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
config_dir = os.path.join(repo_dir, "_QPLANE")
sys.path.append(repo_dir)
sys.path.append(config_dir)

import _QPLANE.resource.config as cfg
from _QPLANE import QPLANE_RESOURCE_DIR
from _QPLANE.resource.helpers import get_logger, progress_enabled
from _QPLANE.resource.parser import parse_expr
from _QPLANE.resource.presets import (PRESET_IDS, build_preset, expected_curvature, get_preset, named_sigmas,
                                      preset_checks, torsion_free_chi)
from _QPLANE.resource.reports import Report
from qplane_calculi.calculus import (Calculus, GradedForm, MetricTensor, SigmaTensor, connection_checks, omega0,
                                     q1_regular, relation_report, run_checks, second_order_checks, solve_sigma)
from qplane_calculi.classical_limit import (CURVATURE_CONVENTION, cartan_connection, classical_chart,
                                            connection_limit_crosscheck, cr_render, gauss_curvature)
from qplane_calculi.utils import ParseError, PresetError, QPlaneError, UnsupportedError

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_PARSE = 2
EXIT_PRESET = 3

COMMANDS = ('list-presets', 'eval', 'verify', 'structure', 'connection', 'limit')


def _rational(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise ArgumentTypeError(f"'{text}' is not a rational number.") from None


def build_parser() -> ArgumentParser:
    argparse = ArgumentParser(prog='qplane-workbench',
                              description="Exact differential calculi on the generalized quantum plane.")
    argparse.add_argument('command', choices=COMMANDS,
                          help="What to run.")
    argparse.add_argument('target', nargs='?',
                          help=f"Preset id (one of {', '.join(PRESET_IDS)}); the expression for eval.")
    argparse.add_argument('-e', '--environment', default='default',
                          help="The configuration environment to run the script in.")
    argparse.add_argument('-p', '--preset', default=None,
                          help="Preset context for eval, making dx, dy, tau, t1..t3 and d(...) available.")
    argparse.add_argument('-a', '--alpha', type=_rational, default=None,
                          help="Nonzero rational alpha of the calc3 presets. E.g. 2/3")
    argparse.add_argument('-f', '--format', choices=['text', 'json'], default=None,
                          help="Output format. Choose from ['text', 'json']")
    argparse.add_argument('--q', type=_rational, default=None, dest='q_value',
                          help="Also evaluate every check at this rational q.")
    argparse.add_argument('--check', default=None,
                          help="Run a single check by id (verify).")
    argparse.add_argument('--solve', action='store_true',
                          help="Run solve_sigma against the preset's C (connection).")
    return argparse


def _alpha(args) -> Fraction:
    return args.alpha if args.alpha is not None else cfg.read_rational('calc3', 'alpha')


def _preset(args) -> Calculus:
    if not args.target:
        raise PresetError(f"The {args.command} command needs a preset id; choose from {', '.join(PRESET_IDS)}.")
    return build_preset(args.target, _alpha(args))


def _parameters(args, preset_id: Optional[str] = None) -> dict:
    parameters = {}
    if preset_id and get_preset(preset_id).uses_alpha:
        parameters['alpha'] = str(_alpha(args))
    if args.q_value is not None:
        parameters['q'] = str(args.q_value)
    if args.check:
        parameters['check'] = args.check
    return parameters


def list_presets(args) -> Report:
    presets = []
    for preset_id in PRESET_IDS:
        preset = get_preset(preset_id)
        presets.append({'id': preset_id, 'C': preset.parameter, 'alpha': preset.uses_alpha,
                        'description': preset.description})
    return Report(None, args.command, payload={'presets': presets})


def evaluate(args) -> Report:
    if args.target is None:
        raise ParseError("The eval command needs an expression.", 0)
    calculus = build_preset(args.preset, _alpha(args)) if args.preset else None
    value = parse_expr(args.target, calculus)
    degree = value.degree if isinstance(value, GradedForm) else 0
    parameters = _parameters(args, args.preset)
    if args.preset:
        parameters['preset'] = args.preset
    return Report(args.preset, args.command, parameters,
                  payload={'input': args.target, 'degree': degree, 'value': value.render(), 'terms': value.to_json()})


def verify(args, logger) -> Report:
    handle = _preset(args)
    checks = second_order_checks(handle) + preset_checks(args.target, handle)
    if args.check:
        checks = [check for check in checks if check.check_id == args.check]
        if not checks:
            raise PresetError(f"Unknown check '{args.check}' for preset '{args.target}'.")
    logger.info(f"Running {len(checks)} checks on {handle.name}...")
    results = run_checks(checks, q_value=args.q_value, workers=cfg.read_int('workers', 'checks'),
                         progress=progress_enabled(args.format))
    report = Report(args.target, args.command, _parameters(args, args.target), results)
    logger.info(f"{len(results) - len(report.failures)} of {len(results)} checks passed.")
    return report


def structure(args, logger) -> Report:
    handle = _preset(args)
    payload = {
        'C2': handle.C.to_json(),
        'relations': [r.render() for r in relation_report(handle)],
        'coordinates': list(handle.coordinates),
        'basis': {str(p): [[a + 1 for a in word] for word in handle.basis(p)] for p in range(4)},
        'frame_inverse': [{name: e.render() for name, e in handle.frame_expression(a).items()}
                          for a in range(handle.n)]
    }
    if handle.is_inner:
        logger.info(f"Extracting structure data of {handle.name}...")
        data = handle.structure().to_json()
        payload.update({key: data[key] for key in ('Cabc', 'D', 'K', 'theta', 'dtheta')})
    else:
        payload['dtheta'] = [handle.dtheta(a).render() for a in range(handle.n)]
    return Report(args.target, args.command, _parameters(args, args.target), payload=payload)


def _connection_summary(handle: Calculus, sigma: SigmaTensor, g: MetricTensor) -> dict:
    chi = torsion_free_chi(handle)
    conn = omega0(handle, sigma, chi)
    data = conn.to_json()
    return {
        'label': sigma.label,
        'S': data['S'],
        'g': g.g.to_json(),
        'omega': data['omega'],
        'checks': connection_checks(conn, g),
        'chi': 'D/2' if chi else '0'
    }


def connection(args, logger) -> Report:
    handle = _preset(args)
    if not handle.is_inner:
        raise UnsupportedError(f"Calculus '{handle.name}' has outer derivations and carries no omega0.")
    g = MetricTensor.euclidean(handle.n)
    named = [_connection_summary(handle, sigma, g) for sigma in named_sigmas(args.target)]
    # the first named sigma is the preset's primary connection
    payload = dict(named[0])
    payload['named'] = named
    if args.solve:
        logger.info(f"Solving for sigma over the block ansatz of {handle.name}...")
        payload['solutions'] = [_connection_summary(handle, sigma, g) for sigma in solve_sigma(handle.C)]
    parameters = _parameters(args, args.target)
    if args.solve:
        parameters['solve'] = 'true'
    return Report(args.target, args.command, parameters, payload=payload)


def _crosscheck(handle: Calculus, sigma: SigmaTensor) -> dict:
    if not q1_regular(omega0(handle, sigma)):
        return {'status': 'pole', 'residual': None, 'label': sigma.label}
    result = connection_limit_crosscheck(handle, sigma).to_json()
    result['label'] = sigma.label
    return result


def limit(args, logger) -> Report:
    handle = _preset(args)
    chart = classical_chart(handle)
    K = gauss_curvature(chart.frame)
    data = chart.to_json()
    crosschecks = [_crosscheck(handle, sigma) for sigma in named_sigmas(args.target)] if handle.is_inner else []
    payload = {
        'p': data['p'],
        'frame': data['frame'],
        'K': cr_render(K),
        'crosscheck': crosschecks[0] if crosschecks else {'status': 'unsupported', 'residual': None},
        'frame_equation': data['frame_equation'],
        'poisson': data['poisson'],
        'omega12': cartan_connection(chart.frame).to_json(),
        'convention': CURVATURE_CONVENTION
    }
    expected = expected_curvature(args.target)
    if expected is not None:
        payload['K_expected'] = cr_render(expected)
        payload['K_status'] = 'match' if K == expected else 'mismatch'
    if crosschecks:
        payload['crosschecks'] = crosschecks
    return Report(args.target, args.command, _parameters(args, args.target), payload=payload)


def run(argv: Optional[List[str]] = None) -> int:
    """
    Run one workbench command and print its report.

    Returns
    -------
    The exit code: 0 success, 1 failed check or computation error, 2 parse error, 3 preset error.
    """
    args = build_parser().parse_args(argv)

    cfg.initialize(f"{QPLANE_RESOURCE_DIR}/config", environment=args.environment)
    args.format = args.format or cfg.read('output', 'format')
    logger = get_logger('QPLANE-WORKBENCH', cfg.read('logging', 'level'))

    try:
        if args.command == 'list-presets':
            report = list_presets(args)
        elif args.command == 'eval':
            report = evaluate(args)
        else:
            report = {'verify': verify, 'structure': structure, 'connection': connection,
                      'limit': limit}[args.command](args, logger)
    except ParseError as error:
        logger.error(f"Parse error: {error}")
        return EXIT_PARSE
    except PresetError as error:
        logger.error(str(error))
        return EXIT_PRESET
    except QPlaneError as error:
        logger.error(f"{type(error).__name__}: {error}")
        return EXIT_FAILURE

    print(report.dumps() if args.format == 'json' else report.render_text())
    return EXIT_OK if report.passed else EXIT_FAILURE


def main():
    sys.exit(run())


if __name__ == '__main__':
    main()
