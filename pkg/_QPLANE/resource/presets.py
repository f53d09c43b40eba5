"""
Registry of the preset calculi: C tensors, derivations, coordinate frames, and the per-preset identity tables
that verify adds to the generic second-order checks. Identity expressions use the parser's grammar and must
evaluate to zero; 'A' stands for the calc3 parameter alpha.
"""
import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import partial
from typing import Callable, Dict, List, Optional, Tuple

from _QPLANE.resource.parser import parse_expr
from qplane_calculi.calculus import (Calculus, CalculusSpec, Check, MetricTensor, SigmaTensor, build_calculus,
                                     metric_check, omega0, parity_check, q1_regular, sigma_check, solve_sigma,
                                     torsionfree_check)
from qplane_calculi.classical_limit import (classical_chart, connection_limit_crosscheck, frame_equation_check,
                                           gauss_curvature)
from qplane_calculi.utils import (ONE, ZERO, InnerDerivation, OuterDerivation, PlaneElement, PresetError, Q, QMatrix,
                                  QScalar, X, Y, der_apply, pe_eval_q1, qs, qs_inv, qs_pow)

__all__ = [
    'PRESET_IDS',
    'Preset',
    'build_preset',
    'expected_curvature',
    'get_preset',
    'named_sigmas',
    'preset_checks',
    'torsion_free_chi'
]

logger = logging.getLogger(__name__)

PRESET_IDS = ('calc2a', 'calc2b', 'calc3a', 'calc3b', 'outer')

_K = Q / (Q - ONE)
_KAPPA = qs_inv(qs_pow(4) - ONE)


def _calc2_C(c: QScalar) -> QMatrix:
    return QMatrix.from_rows([
        [1, 0, 0, 0],
        [0, 0, c, 0],
        [0, qs_inv(c), 0, 0],
        [0, 0, 0, 1]
    ])


def _calc3_C(variant: str) -> QMatrix:
    rows = [[ZERO] * 9 for _ in range(9)]
    for a in range(3):
        rows[4 * a][4 * a] = ONE
    rows[2][6], rows[6][2] = Q, qs_inv(Q)
    rows[7][5], rows[5][7] = Q, qs_inv(Q)
    if variant == 'a':
        rows[1][1] = rows[3][3] = -ONE
    else:
        rows[1][3], rows[3][1] = Q, qs_inv(Q)
    return QMatrix.from_rows(rows)


def _flip() -> QMatrix:
    return SigmaTensor.flip(2).S


def sigma_metric(c: QScalar) -> QMatrix:
    """The metric-compatible sigma regular at q = 1 for the two-dimensional C with parameter c."""
    s = qs_inv(c * c + ONE)
    return QMatrix.from_rows([
        [2 * c * s, 0, 0, (ONE - c * c) * s],
        [0, (ONE - c * c) * s, 2 * c * s, 0],
        [0, 2 * c * s, (c * c - ONE) * s, 0],
        [(c * c - ONE) * s, 0, 0, 2 * c * s]
    ])


def sigma_singular(c: QScalar) -> QMatrix:
    """The companion solution with negated corners; its omega0 has poles at q = 1."""
    s = qs_inv(c * c + ONE)
    return QMatrix.from_rows([
        [-2 * c * s, 0, 0, (ONE - c * c) * s],
        [0, (ONE - c * c) * s, 2 * c * s, 0],
        [0, 2 * c * s, (c * c - ONE) * s, 0],
        [(c * c - ONE) * s, 0, 0, -2 * c * s]
    ])


Identity = Tuple[str, str, str]
DerivationValue = Tuple[int, str, str]


@dataclass(frozen=True)
class Preset:
    """
    A preset calculus.

    Instance Variables
    ------------------
    preset_id : str
        Registry key.
    description : str
        One line for list-presets.
    parameter : str
        The C parameter, as shown by list-presets.
    uses_alpha : bool
        Whether the preset takes the nonzero rational alpha.
    identities : Tuple[Tuple[str, str, str]]
        (check id, description, expression that must vanish).
    derivations : Tuple[Tuple[int, str, str]]
        (derivation index, generator, expected value), checked as e_a(generator) - expected = 0.
    curvature : str, default None
        Expected Gaussian curvature of the limit frame.
    """
    preset_id: str
    description: str
    parameter: str
    build_spec: Callable[[Fraction], Tuple[int, tuple, QMatrix, Tuple[str, ...]]]
    uses_alpha: bool = False
    identities: Tuple[Identity, ...] = ()
    derivations: Tuple[DerivationValue, ...] = ()
    sigmas: Tuple[Tuple[str, Callable[[], QMatrix]], ...] = ()
    curvature: Optional[str] = None


def _calc2a(alpha):
    lam = (Y.scale(_K), X.scale(_K))
    return 2, tuple(InnerDerivation(lam=v) for v in lam), _calc2_C(Q), ('dx', 'dy')


def _calc2b(alpha):
    x_inv2 = PlaneElement.monomial(-2, 0)
    lam = (PlaneElement.monomial(-2, 2, _KAPPA), x_inv2.scale(_KAPPA))
    return 2, tuple(InnerDerivation(lam=v) for v in lam), _calc2_C(qs_pow(-4)), ('dx', 'dy')


def _calc3(variant, alpha):
    lam = (Y.scale(_K), X.scale(_K), PlaneElement.monomial(1, 1, _K * qs(alpha)))
    return 3, tuple(InnerDerivation(lam=v) for v in lam), _calc3_C(variant), ('dx', 'dy', 'tau')


def _outer(alpha):
    ders = (OuterDerivation(image_x=X, image_y=PlaneElement()), OuterDerivation(image_x=PlaneElement(), image_y=Y))
    return 2, ders, _flip(), ('dx', 'dy')


_CALC3_COMMON = (
    ('frame.dx', 'dx in the frame', 'dx + x*y*t1 + A*x^2*y*t3'),
    ('frame.dy', 'dy in the frame', 'dy - x*y*t2 - A*x*y^2*t3'),
    ('frame.tau', 'tau in the frame', 'tau - A*(q - 1)/q*x^2*y^2*t3'),
    ('coframe.t1', 'theta^1 in coordinates', 't1 + x^-1*y^-1*dx/q + x^-1*y^-2*tau/(q^2*(q - 1))'),
    ('coframe.t2', 'theta^2 in coordinates', 't2 - x^-1*y^-1*dy/q + x^-2*y^-1*tau/(q*(q - 1))'),
    ('coframe.t3', 'theta^3 in coordinates', 't3 - x^-2*y^-2*tau/(A*q^3*(q - 1))'),
    ('wedge.t1_t1', 'theta^1 theta^1 = 0', 't1*t1'),
    ('wedge.t2_t2', 'theta^2 theta^2 = 0', 't2*t2'),
    ('wedge.t3_t3', 'theta^3 theta^3 = 0', 't3*t3'),
    ('wedge.t1_t3', 'theta^1 theta^3 = -q theta^3 theta^1', 't1*t3 + q*t3*t1'),
    ('wedge.t3_t2', 'theta^3 theta^2 = -q theta^2 theta^3', 't3*t2 + q*t2*t3'),
    ('dtau.frame', 'd tau from its frame expression', 'd(tau) - A*(q - 1)/q*(d(x^2*y^2)*t3 + x^2*y^2*d(t3))')
)

_CALC3_DERIVATIONS = (
    (0, 'x', '-x*y'), (0, 'y', '0'), (1, 'x', '0'), (1, 'y', 'x*y'), (2, 'x', '-A*x^2*y'),
    (2, 'y', 'A*x*y^2')
)

_PRESETS: Dict[str, Preset] = {p.preset_id: p for p in (
    Preset(
        'calc2a', 'Two inner derivations lam = q/(q - 1) (y, x); frame of dx, dy', 'c = q', _calc2a,
        identities=(
            ('commutation.x_dx', 'x dx = q dx x', 'x*dx - q*dx*x'),
            ('commutation.y_dx', 'y dx = q^-1 dx y', 'y*dx - q^-1*dx*y'),
            ('commutation.x_dy', 'x dy = q dy x', 'x*dy - q*dy*x'),
            ('commutation.y_dy', 'y dy = q^-1 dy y', 'y*dy - q^-1*dy*y'),
            ('squares.dx', 'dx dx = 0', 'dx*dx'),
            ('squares.dy', 'dy dy = 0', 'dy*dy'),
            ('squares.dx_dy', 'dx dy = -q dy dx', 'dx*dy + q*dy*dx'),
            ('frame.dx', 'dx = -xy theta^1', 'dx + x*y*t1'),
            ('frame.dy', 'dy = xy theta^2', 'dy - x*y*t2'),
            ('coframe.t1', 'theta^1 = -q^-1 x^-1 y^-1 dx', 't1 + q^-1*x^-1*y^-1*dx'),
            ('coframe.t2', 'theta^2 = q^-1 x^-1 y^-1 dy', 't2 - q^-1*x^-1*y^-1*dy'),
            ('wedge.t1_t1', 'theta^1 theta^1 = 0', 't1*t1'),
            ('wedge.t2_t2', 'theta^2 theta^2 = 0', 't2*t2'),
            ('wedge.t1_t2', 'theta^1 theta^2 = -q theta^2 theta^1', 't1*t2 + q*t2*t1'),
            ('dtheta.t1', 'd theta^1 = x theta^1 theta^2', 'd(t1) - x*t1*t2'),
            ('dtheta.t2', 'd theta^2 = y theta^1 theta^2', 'd(t2) - y*t1*t2'),
            ('theta.coordinates', 'theta in coordinates',
             '(q-1)^-1*(q*x^-1*dx - y^-1*dy) + q/(q-1)*(y*t1 + x*t2)'),
            ('theta.closed', 'd theta from the coordinate expression', 'd((q-1)^-1*(q*x^-1*dx - y^-1*dy))')
        ),
        derivations=((0, 'x', '-x*y'), (0, 'y', '0'), (1, 'x', '0'), (1, 'y', 'x*y')),
        sigmas=(('metric', lambda: sigma_metric(Q)), ('singular', lambda: sigma_singular(Q)),
                ('C', lambda: _calc2_C(Q))),
        curvature='x^2 + y^2'
    ),
    Preset(
        'calc2b', 'Two inner derivations lam = (q^4 - 1)^-1 (x^-2 y^2, x^-2); frame of dx, dy', 'c = q^-4',
        _calc2b,
        identities=(
            ('commutation.x_dx', 'x dx = q^2 dx x', 'x*dx - q^2*dx*x'),
            ('commutation.x_dy', 'x dy = q dy x + (q^2 - 1) dx y', 'x*dy - q*dy*x - (q^2 - 1)*dx*y'),
            ('commutation.y_dx', 'y dx = q dx y', 'y*dx - q*dx*y'),
            ('commutation.y_dy', 'y dy = q^2 dy y', 'y*dy - q^2*dy*y'),
            ('squares.dx', 'dx dx = 0', 'dx*dx'),
            ('squares.dy', 'dy dy = 0', 'dy*dy'),
            ('squares.dy_dx', 'dy dx = -q dx dy', 'dy*dx + q*dx*dy'),
            ('frame.dx', 'dx in the frame', 'dx + x^-1*y^2*t1/(q^2*(q^2 + 1))'),
            ('frame.dy', 'dy in the frame', 'dy + x^-2*y*(y^2*t1 + t2)/(q^2 + 1)'),
            ('coframe.t1', 'theta^1 in coordinates', 't1 + q^4*(q^2 + 1)*x*y^-2*dx'),
            ('coframe.t2', 'theta^2 in coordinates', 't2 + q^2*(q^2 + 1)*x*(x*y^-1*dy - dx)'),
            ('wedge.t1_t1', 'theta^1 theta^1 = 0', 't1*t1'),
            ('wedge.t2_t2', 'theta^2 theta^2 = 0', 't2*t2'),
            ('wedge.t2_t1', 'theta^2 theta^1 = -q^4 theta^1 theta^2', 'q^4*t1*t2 + t2*t1'),
            ('dtheta.t1', 'd theta^1 = -x^-2 theta^1 theta^2', 'd(t1) + x^-2*t1*t2'),
            ('dtheta.t2', 'd theta^2 = -x^-2 y^2 theta^1 theta^2', 'd(t2) + x^-2*y^2*t1*t2'),
            ('theta.coordinates', 'theta in coordinates',
             'q^2/(q^2 - 1)*y^-1*dy + (x^-2*y^2*t1 + x^-2*t2)/(q^4 - 1)'),
            ('theta.closed', 'd theta from the coordinate expression', 'd(y^-1*dy)')
        ),
        derivations=((0, 'x', '-x^-1*y^2/(q^2*(q^2 + 1))'), (0, 'y', '-x^-2*y^3/(q^2 + 1)'), (1, 'x', '0'),
                     (1, 'y', '-x^-2*y/(q^2 + 1)')),
        sigmas=(('metric', lambda: sigma_metric(qs_pow(-4))), ('singular', lambda: sigma_singular(qs_pow(-4))),
                ('C', lambda: _calc2_C(qs_pow(-4)))),
        curvature='x^-4 + x^-4*y^4'
    ),
    Preset(
        'calc3a', 'Three inner derivations lam = q/(q - 1) (y, x, alpha xy), theta^1 theta^2 free',
        'c = q, C^{12}_{12} = -1', partial(_calc3, 'a'), uses_alpha=True,
        identities=_CALC3_COMMON + (
            ('dtheta.t1', 'd theta^1', 'd(t1) - q/(q - 1)*x*(t1*t2 + t2*t1) - A*x*y*t1*t3'),
            ('dtheta.t2', 'd theta^2', 'd(t2) - q/(q - 1)*y*(t1*t2 + t2*t1) - A*x*y*t3*t2'),
            ('dtheta.t3', 'd theta^3', 'd(t3) - y*t1*t3 - x*t3*t2 + (t1*t2 + q*t2*t1)/(A*(q - 1))')
        ),
        derivations=_CALC3_DERIVATIONS,
        sigmas=(('C', lambda: _calc3_C('a')),)
    ),
    Preset(
        'calc3b',
        'Three inner derivations lam = q/(q - 1) (y, x, alpha xy), theta^1 theta^2 = -q theta^2 theta^1',
        'c = q, C^{12}_{21} = q', partial(_calc3, 'b'), uses_alpha=True,
        identities=_CALC3_COMMON + (
            ('wedge.t1_t2', 'theta^1 theta^2 = -q theta^2 theta^1', 't1*t2 + q*t2*t1'),
            ('dtheta.t1', 'd theta^1', 'd(t1) - x*t1*t2 - A*x*y*t1*t3'),
            ('dtheta.t2', 'd theta^2', 'd(t2) - y*t1*t2 - A*x*y*t3*t2'),
            ('dtheta.t3', 'd theta^3', 'd(t3) - y*t1*t3 - x*t3*t2')
        ),
        derivations=_CALC3_DERIVATIONS,
        sigmas=(('C', lambda: _calc3_C('b')),)
    ),
    Preset(
        'outer', 'Two outer derivations e_1 = x d/dx, e_2 = y d/dy; C is the flip', 'C = flip', _outer,
        identities=(
            ('coframe.t1', 'theta^1 = x^-1 dx', 't1 - x^-1*dx'),
            ('coframe.t2', 'theta^2 = y^-1 dy', 't2 - y^-1*dy'),
            ('commutation.x_dx', 'x dx = dx x', 'x*dx - dx*x'),
            ('commutation.y_dy', 'y dy = dy y', 'y*dy - dy*y'),
            ('commutation.x_dy', 'x dy = q dy x', 'x*dy - q*dy*x'),
            ('commutation.y_dx', 'y dx = q^-1 dx y', 'y*dx - q^-1*dx*y'),
            ('squares.dx', 'dx dx = 0', 'dx*dx'),
            ('squares.dy', 'dy dy = 0', 'dy*dy'),
            ('squares.dx_dy', 'dx dy = -q dy dx', 'dx*dy + q*dy*dx'),
            ('wedge.t1_t1', 'theta^1 theta^1 = 0', 't1*t1'),
            ('wedge.t2_t2', 'theta^2 theta^2 = 0', 't2*t2'),
            ('wedge.t1_t2', 'theta^1 theta^2 = -theta^2 theta^1', 't1*t2 + t2*t1'),
            ('dtheta.t1', 'd theta^1 = 0', 'd(t1)'),
            ('dtheta.t2', 'd theta^2 = 0', 'd(t2)')
        ),
        derivations=((0, 'x', 'x'), (0, 'y', '0'), (1, 'x', '0'), (1, 'y', 'y')),
        curvature='0'
    )
)}


def get_preset(preset_id: str) -> Preset:
    """
    Raises
    ------
    PresetError for an unknown id.
    """
    try:
        return _PRESETS[preset_id]
    except KeyError:
        raise PresetError(f"Unknown preset '{preset_id}'; choose from {', '.join(PRESET_IDS)}.") from None


def _alpha_text(text: str, alpha: Fraction) -> str:
    return text.replace('A', f'({alpha})')


def _expression_identity(text: str, handle: Calculus):
    return parse_expr(text, handle)


def _derivation_identity(index: int, generator: str, expected: str, handle: Calculus):
    value = der_apply(handle.spec.ders[index], parse_expr(generator))
    return value - parse_expr(expected)


def build_preset(preset_id: str, alpha: Optional[Fraction] = None) -> Calculus:
    """
    Build a preset calculus with its identity table attached.

    Parameters
    ----------
    preset_id : str
        One of PRESET_IDS.
    alpha : Fraction, default None
        Parameter of the calc3 presets; defaults to 1, ignored elsewhere.

    Raises
    ------
    PresetError for an unknown id or alpha = 0.
    """
    preset = get_preset(preset_id)
    alpha = Fraction(1) if alpha is None else Fraction(alpha)
    if preset.uses_alpha and alpha == 0:
        raise PresetError(f"Preset '{preset_id}' needs a nonzero alpha.")
    n, ders, C, coordinates = preset.build_spec(alpha)

    identities = []
    for index, generator, expected in preset.derivations:
        check_id = f"derivations.e{index + 1}_{generator}"
        expected = _alpha_text(expected, alpha)
        identities.append((check_id, f"e_{index + 1}({generator}) = {expected}",
                           partial(_derivation_identity, index, generator, expected)))
    for check_id, description, text in preset.identities:
        identities.append((check_id, description, partial(_expression_identity, _alpha_text(text, alpha))))

    name = f"{preset_id}(alpha={alpha})" if preset.uses_alpha else preset_id
    logger.debug(f"Building preset {name} with {len(identities)} identities.")
    return build_calculus(CalculusSpec(n, ders, C, coordinates=coordinates, name=name,
                                       identities=tuple(identities)))


def named_sigmas(preset_id: str) -> List[SigmaTensor]:
    """The named sigma tensors of a preset, labelled by name."""
    return [SigmaTensor(build(), label=name) for name, build in get_preset(preset_id).sigmas]


def expected_curvature(preset_id: str):
    """The expected Gaussian curvature as a commutative rational function, or None."""
    text = get_preset(preset_id).curvature
    return None if text is None else pe_eval_q1(parse_expr(text))


def torsion_free_chi(handle: Calculus) -> Dict[Tuple[int, int, int], QScalar]:
    """chi = D/2, the central shift that makes omega0(S = C) torsion free; empty when D = 0."""
    half = qs(Fraction(1, 2))
    return {k: v * half for k, v in handle.structure().D.items() if v}


def _sigma(preset_id: str, name: str) -> SigmaTensor:
    return next(s for s in named_sigmas(preset_id) if s.label == name)


def _torsion_residual(handle: Calculus, S: SigmaTensor):
    return torsionfree_check(omega0(handle, S, torsion_free_chi(handle)))[1]


def _solutions_found(handle: Calculus, expected: List[SigmaTensor]) -> bool:
    solutions = solve_sigma(handle.C)
    return len(solutions) == 3 and all(any(s.S == e.S for s in solutions) for e in expected)


def _curvature_residual(handle: Calculus, preset_id: str):
    return gauss_curvature(classical_chart(handle).frame) - expected_curvature(preset_id)


def _frame_equation_residual(handle: Calculus):
    chart = classical_chart(handle)
    return frame_equation_check(chart.p, chart.frame)[1]


def preset_checks(preset_id: str, handle: Calculus) -> List[Check]:
    """
    Connection and classical-limit expectations of a preset, run by verify after the second-order checks.
    Some expectations are negative: S = C is not metric compatible and the singular sigma has a pole at q = 1.
    """
    checks = []
    euclidean = MetricTensor.euclidean(handle.n)
    if preset_id in ('calc2a', 'calc2b'):
        metric, singular, flip_c = (_sigma(preset_id, name) for name in ('metric', 'singular', 'C'))
        checks.extend([
            Check('connection.sigma.metric', '(1 + S)(1 - C) = 0 for the regular metric sigma',
                  lambda: sigma_check(metric, handle.C)[1]),
            Check('connection.metric.metric', 'the regular sigma is metric compatible',
                  lambda: metric_check(metric, euclidean)[1]),
            Check('connection.torsion_free.metric', 'omega0 of the regular sigma is torsion free',
                  lambda: _torsion_residual(handle, metric)),
            Check('connection.q1_regular.metric', 'omega0 of the regular sigma is finite at q = 1',
                  lambda: q1_regular(omega0(handle, metric))),
            Check('connection.metric.singular', 'the singular sigma is metric compatible',
                  lambda: metric_check(singular, euclidean)[1]),
            Check('connection.q1_pole.singular', 'omega0 of the singular sigma has a pole at q = 1',
                  lambda: not q1_regular(omega0(handle, singular))),
            Check('connection.metric.C', 'S = C is not metric compatible',
                  lambda: not metric_check(flip_c, euclidean)[0]),
            Check('connection.solve_sigma', 'solve_sigma returns three solutions including both named sigmas',
                  lambda: _solutions_found(handle, [metric, singular])),
            Check('limit.frame_equation', '{p_c, x^a} theta^c_b = delta^a_b in the limit',
                  lambda: _frame_equation_residual(handle)),
            Check('limit.curvature', f"K = {get_preset(preset_id).curvature}",
                  lambda: _curvature_residual(handle, preset_id))
        ])
        if preset_id == 'calc2a':
            checks.extend([
                Check('connection.parity.metric', 'S(q) = -S(-1/q) for the regular sigma',
                      lambda: parity_check(metric)[1]),
                Check('limit.crosscheck', 'the limit of omega0 matches the Levi-Civita form',
                      lambda: connection_limit_crosscheck(handle, metric).difference)
            ])
    elif preset_id in ('calc3a', 'calc3b'):
        sigma_c = _sigma(preset_id, 'C')
        checks.extend([
            Check('connection.sigma.C', '(1 + C)(1 - C) = 0 for S = C', lambda: sigma_check(sigma_c, handle.C)[1]),
            Check('connection.torsion_free.C', 'omega0(S = C) shifted by chi = D/2 is torsion free',
                  lambda: _torsion_residual(handle, sigma_c))
        ])
    else:
        checks.append(Check('limit.curvature', f"K = {get_preset(preset_id).curvature}",
                            lambda: _curvature_residual(handle, preset_id)))
    return checks
