"""
The q -> 1 limit of a calculus: the Poisson bracket {x, y} = xy, limit frames on the plane minus the axes,
the Levi-Civita connection form of a frame and its Gaussian curvature, with the convention
d omega^1_2 = -K theta^1 theta^2 in the given frame order.
"""
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from sympy import QQ

from qplane_calculi.calculus import Calculus, SigmaTensor, omega0, omega_limit
from qplane_calculi.utils import (CField, CX, CY, CalculusError, ONE, PlaneElement, PoleError, Q, UnsupportedError,
                                  pe_commutator, pe_eval_q1, qs, qs_inv)

__all__ = [
    'CForm',
    'ClassicalChart',
    'CrossCheck',
    'CURVATURE_CONVENTION',
    'cartan_connection',
    'cform_d',
    'classical_chart',
    'connection_limit_crosscheck',
    'cr_render',
    'frame_equation_check',
    'gauss_curvature',
    'is_laurent',
    'lift',
    'poisson',
    'poisson_bivector',
    'poisson_commutator',
    'structure_residual'
]

logger = logging.getLogger(__name__)

CURVATURE_CONVENTION = 'd omega^1_2 = -K theta^1 theta^2, frame in preset order'

_INV_Q_MINUS_ONE = qs_inv(Q - ONE)


def cr_render(f) -> str:
    """Render a commutative rational function with '^' powers."""
    return str(f).replace('**', '^')


def _cr(value):
    return value if getattr(value, 'field', None) == CField else CField(value)


@dataclass(frozen=True)
class CForm:
    """
    A differential form on the commutative plane.

    Parameters
    ----------
    degree : int
        0, 1 or 2.
    coeffs : Tuple
        CField coefficients: (f,) for degree 0, (f_x, f_y) on dx, dy for degree 1, (f_xy,) on dx dy for degree 2.
    """
    degree: int
    coeffs: Tuple

    def __post_init__(self):
        assert self.degree in (0, 1, 2), "Commutative forms on the plane have degree 0, 1 or 2."
        assert len(self.coeffs) == (2 if self.degree == 1 else 1), "Coefficient count does not match the degree."
        object.__setattr__(self, 'coeffs', tuple(_cr(c) for c in self.coeffs))

    def __repr__(self):
        return f"CForm({self.render()})"

    @classmethod
    def zero(cls, degree: int) -> 'CForm':
        return cls(degree, (0, 0) if degree == 1 else (0,))

    def __bool__(self):
        return any(self.coeffs)

    def __add__(self, other: 'CForm') -> 'CForm':
        assert self.degree == other.degree, "Cannot add forms of different degrees."
        return CForm(self.degree, tuple(a + b for a, b in zip(self.coeffs, other.coeffs)))

    def __neg__(self) -> 'CForm':
        return CForm(self.degree, tuple(-a for a in self.coeffs))

    def __sub__(self, other: 'CForm') -> 'CForm':
        return self + (-other)

    def scale(self, f) -> 'CForm':
        f = _cr(f)
        return CForm(self.degree, tuple(f * a for a in self.coeffs))

    def wedge(self, other: 'CForm') -> 'CForm':
        assert self.degree + other.degree <= 2, "Forms above degree 2 vanish on the plane."
        if self.degree == 0:
            return other.scale(self.coeffs[0])
        if other.degree == 0:
            return self.scale(other.coeffs[0])
        (ax, ay), (bx, by) = self.coeffs, other.coeffs
        return CForm(2, (ax * by - ay * bx,))

    def parts(self) -> Dict[str, object]:
        names = {0: ('1',), 1: ('dx', 'dy'), 2: ('dxdy',)}[self.degree]
        return dict(zip(names, self.coeffs))

    def render(self) -> str:
        names = {0: ('',), 1: ('dx', 'dy'), 2: ('dx^dy',)}[self.degree]
        pieces = [f"({cr_render(c)}){'*' + name if name else ''}" for c, name in zip(self.coeffs, names) if c]
        return ' + '.join(pieces) or '0'

    def to_json(self) -> Dict:
        return {'degree': self.degree, 'coeffs': [cr_render(c) for c in self.coeffs]}


def cform_d(form: CForm) -> CForm:
    """Commutative exterior derivative; 2-forms are closed on the plane."""
    if form.degree == 0:
        f = form.coeffs[0]
        return CForm(1, (f.diff(CX), f.diff(CY)))
    if form.degree == 1:
        fx, fy = form.coeffs
        return CForm(2, (fy.diff(CX) - fx.diff(CY),))
    return CForm.zero(2)


def is_laurent(f) -> bool:
    return len(_cr(f).denom.terms()) == 1


def lift(f) -> PlaneElement:
    """
    The normal-ordered lift of a commutative Laurent polynomial: x^m y^n -> x^m y^n with x left of y.

    Raises
    ------
    UnsupportedError if f has a denominator other than a monomial.
    """
    f = _cr(f)
    if not is_laurent(f):
        raise UnsupportedError(f"{cr_render(f)} is not a Laurent polynomial and has no lift.")
    ((a, b), d), = f.denom.terms()
    d = Fraction(int(QQ.numer(d)), int(QQ.denom(d)))
    return PlaneElement({
        (i - a, j - b): qs(Fraction(int(QQ.numer(c)), int(QQ.denom(c))) / d) for (i, j), c in f.numer.terms()
    })


def poisson_bivector(f, g):
    """{f, g} = xy (f_x g_y - f_y g_x)."""
    f, g = _cr(f), _cr(g)
    return CX * CY * (f.diff(CX) * g.diff(CY) - f.diff(CY) * g.diff(CX))


def poisson_commutator(f, g):
    """{f, g} as the q -> 1 limit of (q - 1)^-1 [f, g] on normal-ordered lifts."""
    return pe_eval_q1(pe_commutator(lift(f), lift(g)).scale(_INV_Q_MINUS_ONE))


def poisson(f, g):
    """
    The Poisson bracket of the limit; Laurent inputs go through the commutator limit, anything else through
    the bivector xy d_x ^ d_y.
    """
    if is_laurent(f) and is_laurent(g):
        return poisson_commutator(f, g)
    return poisson_bivector(f, g)


def frame_equation_check(p: Sequence, frame: Sequence[CForm]) -> Tuple[bool, Dict[Tuple[int, int], object]]:
    """
    {p_c, x^a} theta^c_b = delta^a_b for x^1 = x, x^2 = y.

    Returns
    -------
    passed : bool
    residual : Dict[Tuple[int, int], CRational]
    """
    assert len(p) == len(frame) == 2, "The frame equation is stated for two generators."
    residual = {}
    for a, generator in enumerate((CX, CY)):
        brackets = [poisson_bivector(p_c, generator) for p_c in p]
        for b in range(2):
            total = sum((brackets[c] * frame[c].coeffs[b] for c in range(2)), CField.zero)
            residual[(a, b)] = total - (1 if a == b else 0)
    return not any(residual.values()), residual


def _frame_determinant(frame: Sequence[CForm]):
    assert len(frame) == 2 and all(t.degree == 1 for t in frame), "A plane frame is two 1-forms."
    (a1, a2), (b1, b2) = frame[0].coeffs, frame[1].coeffs
    det = a1 * b2 - a2 * b1
    if not det:
        raise CalculusError("Degenerate frame: theta^1 theta^2 vanishes.")
    return det


def cartan_connection(frame: Sequence[CForm]) -> CForm:
    """
    The connection form omega^1_2 with d theta^1 = -omega^1_2 theta^2 and d theta^2 = omega^1_2 theta^1.

    Raises
    ------
    CalculusError if the frame is degenerate.
    """
    det = _frame_determinant(frame)
    c1, c2 = (cform_d(theta).coeffs[0] / det for theta in frame)
    return frame[0].scale(-c1) - frame[1].scale(c2)


def gauss_curvature(frame: Sequence[CForm]):
    """K with d omega^1_2 = -K theta^1 theta^2."""
    det = _frame_determinant(frame)
    return -cform_d(cartan_connection(frame)).coeffs[0] / det


def structure_residual(frame: Sequence[CForm], omega: CForm) -> Tuple[CForm, CForm]:
    """Residuals of the two structure equations; both vanish for cartan_connection's output."""
    return cform_d(frame[0]) + omega.wedge(frame[1]), cform_d(frame[1]) - omega.wedge(frame[0])


@dataclass(frozen=True)
class ClassicalChart:
    """
    Limit data of a calculus.

    Instance Variables
    ------------------
    p : List[CRational] or None
        p_a = lim (q - 1) lam_a; None for outer calculi.
    frame : List[CForm]
        The limit frame theta^a in dx, dy.
    frame_equation : bool or None
        Whether {p_c, x^a} theta^c_b = delta^a_b holds; None without p.
    """
    p: Optional[List]
    frame: List[CForm]
    frame_equation: Optional[bool] = None
    poisson: str = '{x, y} = xy'

    def to_json(self) -> Dict:
        return {
            'p': [cr_render(v) for v in self.p] if self.p is not None else None,
            'frame': [theta.to_json() for theta in self.frame],
            'frame_equation': self.frame_equation,
            'poisson': self.poisson
        }


def classical_chart(handle: Calculus) -> ClassicalChart:
    """
    Raises
    ------
    PoleError naming the first frame entry (or p_a) without a finite limit.
    UnsupportedError if the frame is not spanned by dx and dy.
    """
    rows = []
    for a in range(handle.n):
        row = []
        for mu, name in enumerate(handle.coordinates):
            try:
                row.append(pe_eval_q1(handle.frame_inverse[a][mu]))
            except PoleError as error:
                raise PoleError(f"Frame entry theta^{a + 1}[{name}] has a pole of order {error.order} at q = 1.",
                                where=(a, name), order=error.order) from error
        rows.append(row)
    if handle.coordinates != ('dx', 'dy'):
        raise UnsupportedError(f"The limit frame of '{handle.name}' is not spanned by dx and dy.")
    frame = [CForm(1, tuple(row)) for row in rows]

    if not handle.is_inner:
        return ClassicalChart(None, frame)
    p = []
    for a, lam in enumerate(handle.lambdas):
        try:
            p.append(pe_eval_q1(lam.scale(Q - ONE)))
        except PoleError as error:
            raise PoleError(f"p_{a + 1} has a pole of order {error.order} at q = 1.", where=a,
                            order=error.order) from error
    passed, _ = frame_equation_check(p, frame)
    if not passed:
        logger.warning(f"Limit frame of '{handle.name}' does not satisfy the frame equation.")
    return ClassicalChart(p, frame, passed)


@dataclass(frozen=True)
class CrossCheck:
    """
    The limit of omega0 mapped to a frame connection form and compared with cartan_connection.

    Instance Variables
    ------------------
    candidate : CForm
        1/2 (Omega^1_2 - Omega^2_1) with Omega^a_c = lim omega0^a_{bc} theta^b.
    cartan : CForm
        cartan_connection of the limit frame.
    difference : CForm
        candidate - cartan; reported, never corrected.
    symmetric : CForm
        1/2 (Omega^1_2 + Omega^2_1), for information.
    diagonal : Tuple[CForm, CForm]
        Omega^1_1 and Omega^2_2, for information.
    """
    candidate: CForm
    cartan: CForm
    difference: CForm
    symmetric: CForm
    diagonal: Tuple[CForm, CForm]

    @property
    def status(self) -> str:
        return 'mismatch' if self.difference else 'match'

    def to_json(self) -> Dict:
        return {
            'status': self.status,
            'residual': self.difference.to_json(),
            'candidate': self.candidate.to_json(),
            'cartan': self.cartan.to_json(),
            'symmetric': self.symmetric.to_json(),
            'diagonal': [f.to_json() for f in self.diagonal]
        }


def connection_limit_crosscheck(handle: Calculus, S: SigmaTensor) -> CrossCheck:
    """
    Raises
    ------
    UnsupportedError for outer calculi or frames of dimension other than two.
    PoleError if omega0 has an entry with a pole at q = 1.
    """
    if handle.n != 2:
        raise UnsupportedError("The connection cross-check is defined for two-dimensional frames.")
    conn = omega0(handle, S)
    limits = omega_limit(conn)
    chart = classical_chart(handle)

    def big_omega(a, c):
        total = CForm.zero(1)
        for b in range(2):
            total = total + chart.frame[b].scale(limits[(a, b, c)])
        return total

    half = CField(1) / 2
    o12, o21 = big_omega(0, 1), big_omega(1, 0)
    candidate = (o12 - o21).scale(half)
    cartan = cartan_connection(chart.frame)
    return CrossCheck(candidate, cartan, candidate - cartan, (o12 + o21).scale(half),
                      (big_omega(0, 0), big_omega(1, 1)))
