import logging
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from functools import partial
from itertools import product
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

from sympy.polys.fields import FracElement

from qplane_calculi.calculus.checks import Check, CheckResult, run_checks
from qplane_calculi.utils import (CalculusError, Derivation, IncompatibleStructureError, ONE, PlaneElement, Q, QMatrix,
                                  QScalar, UnsupportedError, X, X_INV, Y, Y_INV, ZERO, der_apply, pe_mul, qs,
                                  qs_render, qs_to_json)

__all__ = [
    'Calculus',
    'CalculusSpec',
    'DEGREE_CAP',
    'GradedForm',
    'Relation',
    'StructureData',
    'build_calculus',
    'coordinate_dtheta',
    'coordinate_form',
    'd',
    'extract_structure',
    'frame_in_coordinates',
    'relation_report',
    'second_order_checks',
    'structure_symmetrized',
    'verify_second_order',
    'wedge'
]

logger = logging.getLogger(__name__)

DEGREE_CAP = 3
COORDINATES = ('dx', 'dy', 'tau')
HALF = qs(Fraction(1, 2))

Word = Tuple[int, ...]
Elementish = Union[PlaneElement, int, Fraction, FracElement]
IdentityFn = Callable[['Calculus'], object]


def _key(indices: Sequence[int]) -> str:
    return ','.join(str(i + 1) for i in indices)


@dataclass(frozen=True, eq=False)
class CalculusSpec:
    """
    Input data for a frame-based differential calculus.

    Parameters
    ----------
    n : int
        Number of derivations e_a (and of frame generators theta^a).
    ders : Tuple[Derivation]
        The derivations, in frame order.
    C : QMatrix
        The n^2 x n^2 tensor C^{ab}_{cd}; row index (ab) = a*n + b, column index (cd) = c*n + d.
    coordinates : Tuple[str]
        Coordinate 1-forms spanning the frame, a sub-sequence of ('dx', 'dy', 'tau').
    name : str, default 'custom'
        Label used in logs and reports.
    identities : Tuple[Tuple[str, str, Callable]]
        Extra (check id, description, residual function) triples evaluated by verify_second_order.
        Each residual function takes the built Calculus and returns something that must vanish.
    """
    n: int
    ders: Tuple[Derivation, ...]
    C: QMatrix
    coordinates: Tuple[str, ...] = ('dx', 'dy')
    name: str = 'custom'
    identities: Tuple[Tuple[str, str, IdentityFn], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'ders', tuple(self.ders))
        object.__setattr__(self, 'coordinates', tuple(self.coordinates))
        object.__setattr__(self, 'identities', tuple(self.identities))
        assert len(self.ders) == self.n, f"Expected {self.n} derivations, got {len(self.ders)}."
        assert self.C.rows == self.C.cols == self.n**2, f"C must be {self.n**2}x{self.n**2}."
        assert len(self.coordinates) == self.n, "One coordinate differential per frame generator is required."
        assert all(c in COORDINATES for c in self.coordinates), f"Coordinates must come from {COORDINATES}."

    def __repr__(self):
        return f"CalculusSpec({self.name}, n={self.n})"

    @property
    def is_inner(self) -> bool:
        return all(e.is_inner for e in self.ders)


class _Quotient:
    """
    Degree-p frame words modulo the relations theta^a theta^b + C^{ab}_{cd} theta^c theta^d = 0
    placed at every adjacent position. Eliminating the columns in reverse order keeps the
    lexicographically smallest words as the canonical basis.
    """

    def __init__(self, n: int, degree: int, C: QMatrix):
        self.degree = degree
        self.words: List[Word] = list(product(range(n), repeat=degree))
        index = {w: i for i, w in enumerate(self.words)}

        one_plus_c = QMatrix.identity(n * n) + C
        relations = []
        for position in range(max(degree - 1, 0)):
            for prefix in product(range(n), repeat=position):
                for suffix in product(range(n), repeat=degree - 2 - position):
                    for r in range(n * n):
                        row = [ZERO] * len(self.words)
                        for col, value in enumerate(one_plus_c.row(r)):
                            if value:
                                row[index[prefix + divmod(col, n) + suffix]] += value
                        if any(row):
                            relations.append(row)

        self.expansion: Dict[Word, Tuple[Tuple[Word, QScalar], ...]] = {w: ((w, ONE),) for w in self.words}
        pivots = []
        if relations:
            reduced, pivots = QMatrix.from_rows(relations).rref(column_order=range(len(self.words))[::-1])
            for row, p in zip(reduced, pivots):
                self.expansion[self.words[p]] = tuple(
                    (self.words[j], -v) for j, v in enumerate(row) if j != p and v
                )
        self.basis: List[Word] = [w for i, w in enumerate(self.words) if i not in set(pivots)]
        logger.debug(f"Degree {degree}: {len(self.words)} words, {len(self.basis)} basis words.")

    def reduce(self, coeffs: Mapping[Word, PlaneElement]) -> Dict[Word, PlaneElement]:
        out: Dict[Word, PlaneElement] = {}
        for word, f in coeffs.items():
            assert word in self.expansion, f"{word} is not a degree-{self.degree} word."
            for basis_word, c in self.expansion[word]:
                out[basis_word] = out.get(basis_word, PlaneElement()) + f.scale(c)
        return out


class GradedForm:
    """
    A p-form sum_w f_w theta^w with algebra coefficients on the left of canonical frame words.

    Parameters
    ----------
    calculus : Calculus
        The calculus the form lives in.
    degree : int
        Form degree, 0 <= degree <= 3.
    coeffs : Mapping[Tuple[int], PlaneElement], default None
        Coefficient of each degree-p word (0-based frame indices). Non-basis words are reduced.
    reduced : bool, default False
        Skip the reduction when the words are known to be basis words.

    Raises
    ------
    CalculusError if the degree is above the supported maximum.
    """
    __slots__ = ('calculus', 'degree', 'coeffs')

    def __init__(self, calculus: 'Calculus', degree: int, coeffs: Optional[Mapping[Word, Elementish]] = None,
                 reduced: bool = False):
        if not 0 <= degree <= DEGREE_CAP:
            raise CalculusError(f"Form degree {degree} is above the supported maximum {DEGREE_CAP}.")
        coeffs = {tuple(w): PlaneElement.coerce(f) for w, f in (coeffs or {}).items()}
        if not reduced:
            coeffs = calculus.quotient(degree).reduce(coeffs)
        self.calculus = calculus
        self.degree = degree
        self.coeffs: Dict[Word, PlaneElement] = {w: f for w, f in sorted(coeffs.items()) if f}

    def __repr__(self):
        return f"GradedForm(degree={self.degree}, {self.render()})"

    def __bool__(self):
        return bool(self.coeffs)

    def is_zero(self) -> bool:
        return not self.coeffs

    def parts(self) -> Dict[Word, PlaneElement]:
        return dict(self.coeffs)

    def coefficient(self, word: Word) -> PlaneElement:
        return self.coeffs.get(tuple(word), PlaneElement())

    def _lift(self, other) -> Optional['GradedForm']:
        if isinstance(other, GradedForm):
            assert other.calculus is self.calculus, "Forms belong to different calculi."
            return other
        if isinstance(other, (PlaneElement, int, Fraction, FracElement)):
            return self.calculus.element(other)
        return None

    def __eq__(self, other):
        other = self._lift(other)
        if other is None:
            return NotImplemented
        if not self.coeffs and not other.coeffs:
            return True
        return self.degree == other.degree and self.coeffs == other.coeffs

    __hash__ = None

    def __add__(self, other):
        other = self._lift(other)
        if other is None:
            return NotImplemented
        if not other.coeffs:
            return self
        if not self.coeffs:
            return other
        if self.degree != other.degree:
            raise CalculusError(f"Cannot add forms of degree {self.degree} and {other.degree}.")
        out = dict(self.coeffs)
        for w, f in other.coeffs.items():
            out[w] = out.get(w, PlaneElement()) + f
        return GradedForm(self.calculus, self.degree, out, reduced=True)

    __radd__ = __add__

    def __neg__(self):
        return GradedForm(self.calculus, self.degree, {w: -f for w, f in self.coeffs.items()}, reduced=True)

    def __sub__(self, other):
        other = self._lift(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        # form * form is the wedge product, form * f multiplies coefficients from the right
        if isinstance(other, GradedForm):
            return self.calculus.wedge(self, other)
        if isinstance(other, (PlaneElement, int, Fraction, FracElement)):
            f = PlaneElement.coerce(other)
            return GradedForm(self.calculus, self.degree, {w: c * f for w, c in self.coeffs.items()}, reduced=True)
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, (PlaneElement, int, Fraction, FracElement)):
            f = PlaneElement.coerce(other)
            return GradedForm(self.calculus, self.degree, {w: f * c for w, c in self.coeffs.items()}, reduced=True)
        return NotImplemented

    def scale(self, c) -> 'GradedForm':
        return GradedForm(self.calculus, self.degree, {w: f.scale(c) for w, f in self.coeffs.items()}, reduced=True)

    def substitute(self, s) -> 'GradedForm':
        return GradedForm(self.calculus, self.degree, {w: f.substitute(s) for w, f in self.coeffs.items()},
                          reduced=True)

    def render(self) -> str:
        """Render in the expression grammar, frame generators written t1, t2, t3."""
        if not self.coeffs:
            return '0'
        if self.degree == 0:
            return self.coeffs[()].render()
        pieces = []
        for w, f in self.coeffs.items():
            word = '*'.join(f't{a + 1}' for a in w)
            if f == 1:
                piece = word
            elif f == -1:
                piece = f'-{word}'
            else:
                piece = f'({f.render()})*{word}'
            if not pieces:
                pieces.append(piece)
            elif piece.startswith('-'):
                pieces.append(f' - {piece[1:]}')
            else:
                pieces.append(f' + {piece}')
        return ''.join(pieces)

    def to_json(self) -> Dict:
        return {
            'degree': self.degree,
            'terms': [{'word': [a + 1 for a in w], 'c': f.to_json()} for w, f in self.coeffs.items()]
        }

    @classmethod
    def from_json(cls, calculus: 'Calculus', data: Dict) -> 'GradedForm':
        return cls(calculus, data['degree'],
                   {tuple(a - 1 for a in t['word']): PlaneElement.from_json(t['c']) for t in data['terms']})


@dataclass(frozen=True)
class Relation:
    """
    g dxi = sum_eta d(eta) r_eta: a generator times a coordinate differential, rewritten with
    the differentials on the left.
    """
    generator: str
    coordinate: str
    rhs: Tuple[Tuple[str, PlaneElement], ...]

    def __repr__(self):
        return f"Relation({self.render()})"

    def render(self) -> str:
        pieces = []
        for name, r in self.rhs:
            for (m, n), c in r.items():
                coefficient = qs_render(c)
                if coefficient == '1':
                    prefix = ''
                elif coefficient == '-1':
                    prefix = '-'
                elif ' ' in coefficient or '/' in coefficient:
                    prefix = f'({coefficient}) '
                else:
                    prefix = f'{coefficient} '
                mono = ' '.join(s if e == 1 else f'{s}^{e}' for s, e in (('x', m), ('y', n)) if e)
                pieces.append(f"{prefix}{name}{' ' + mono if mono else ''}")
        return f"{self.generator} {self.coordinate} = {' + '.join(pieces) or '0'}"


@dataclass(frozen=True, eq=False)
class StructureData:
    """
    Structure data of an inner calculus.

    Instance Variables
    ------------------
    Cabc : Dict[Tuple[int, int, int], PlaneElement]
        Structure elements with d theta^a = -1/2 C^a_{bc} theta^b theta^c.
    D : Dict[Tuple[int, int, int], QScalar]
        Central coefficients of [lam_b, lam_c]_C = lam_a D^a_{bc} + K_{bc}.
    K : Dict[Tuple[int, int], QScalar]
        Central remainders of the same decomposition.
    brackets : Dict[Tuple[int, int], PlaneElement]
        The twisted brackets [lam_b, lam_c]_C.
    theta : GradedForm
        theta = -lam_a theta^a.
    dtheta : Tuple[GradedForm]
        d theta^a, from the graded commutator with theta.
    frame : List[List[PlaneElement]]
        E[mu][a], the theta^a-coefficient of the mu-th coordinate differential.
    frame_inverse : List[List[PlaneElement]]
        F[a][mu] with theta^a = sum_mu F[a][mu] dxi^mu.
    coordinates : Tuple[str]
        Names of the coordinate differentials.
    """
    Cabc: Dict[Tuple[int, int, int], PlaneElement]
    D: Dict[Tuple[int, int, int], QScalar]
    K: Dict[Tuple[int, int], QScalar]
    brackets: Dict[Tuple[int, int], PlaneElement]
    theta: GradedForm
    dtheta: Tuple[GradedForm, ...]
    frame: List[List[PlaneElement]] = field(repr=False)
    frame_inverse: List[List[PlaneElement]] = field(repr=False)
    coordinates: Tuple[str, ...] = ('dx', 'dy')

    def to_json(self) -> Dict:
        return {
            'Cabc': {_key(k): v.to_json() for k, v in self.Cabc.items() if v},
            'D': {_key(k): qs_to_json(v) for k, v in self.D.items() if v},
            'K': {_key(k): qs_to_json(v) for k, v in self.K.items() if v},
            'theta': self.theta.to_json(),
            'dtheta': [f.to_json() for f in self.dtheta],
            'frame': {name: [e.to_json() for e in row] for name, row in zip(self.coordinates, self.frame)},
            'frame_inverse': [{name: e.to_json() for name, e in zip(self.coordinates, row)}
                              for row in self.frame_inverse]
        }


def _left_inverse(matrix: List[List[PlaneElement]], mul=pe_mul) -> List[List[PlaneElement]]:
    """
    Gauss-Jordan with row operations acting by left multiplication. Pivots must be single monomials,
    the only units of the plane.
    """
    n = len(matrix)
    one, zero = PlaneElement.scalar(ONE), PlaneElement()
    work = [list(row) + [one if i == j else zero for j in range(n)] for i, row in enumerate(matrix)]
    for k in range(n):
        pivot = next((i for i in range(k, n) if len(work[i][k].terms) == 1), None)
        if pivot is None:
            if any(work[i][k] for i in range(k, n)):
                raise CalculusError(f"Frame does not exist: column {k + 1} has no invertible monomial pivot.")
            raise CalculusError("Frame does not exist: the frame matrix is singular.")
        work[k], work[pivot] = work[pivot], work[k]
        inverse = work[k][k].inverse()
        work[k] = [mul(inverse, v) for v in work[k]]
        for i in range(n):
            if i != k and work[i][k]:
                factor = work[i][k]
                work[i] = [v - mul(factor, w) for v, w in zip(work[i], work[k])]
    return [row[n:] for row in work]


def _transpose(matrix: List[List[PlaneElement]]) -> List[List[PlaneElement]]:
    return [list(col) for col in zip(*matrix)]


def _right_inverse(matrix: List[List[PlaneElement]]) -> List[List[PlaneElement]]:
    # a left inverse of the transpose in the opposite algebra is a right inverse of the matrix
    return _transpose(_left_inverse(_transpose(matrix), mul=lambda a, b: pe_mul(b, a)))


class Calculus:
    """
    A built calculus: canonical quotient bases up to degree 3, the frame and its inverse, d, wedge,
    and (for inner calculi) structure data computed on first use.

    Parameters
    ----------
    spec : CalculusSpec
        The derivations, C tensor and coordinate differentials.

    Raises
    ------
    CalculusError if C.C != 1 or the frame matrix has no inverse over the algebra.
    """

    def __init__(self, spec: CalculusSpec):
        if not (spec.C * spec.C).is_identity():
            raise CalculusError(f"C.C != 1 for calculus '{spec.name}'; C is rejected.")
        self.spec = spec
        self.n = spec.n
        self._lock = threading.RLock()
        self._quotients = {p: _Quotient(self.n, p, spec.C) for p in range(DEGREE_CAP + 1)}
        self._structure: Optional[StructureData] = None
        self._dtheta: Dict[int, GradedForm] = {}
        self._coordinate_forms = {name: self._build_coordinate_form(name) for name in spec.coordinates}
        self.frame = [[self._coordinate_forms[name].coefficient((a,)) for a in range(self.n)]
                      for name in spec.coordinates]
        self.frame_inverse = _left_inverse(self.frame)
        logger.debug(f"Built calculus '{spec.name}': quotient dimensions "
                     f"{[len(self._quotients[p].basis) for p in range(DEGREE_CAP + 1)]}.")

    def __repr__(self):
        return f"Calculus({self.spec.name}, n={self.n})"

    @property
    def name(self) -> str:
        return self.spec.name

    @property
    def C(self) -> QMatrix:
        return self.spec.C

    @property
    def coordinates(self) -> Tuple[str, ...]:
        return self.spec.coordinates

    @property
    def is_inner(self) -> bool:
        return self.spec.is_inner

    @property
    def lambdas(self) -> List[PlaneElement]:
        if not self.is_inner:
            raise UnsupportedError(f"Calculus '{self.name}' has outer derivations and no generators lambda_a.")
        return [e.lam for e in self.spec.ders]

    def quotient(self, degree: int) -> _Quotient:
        return self._quotients[degree]

    def basis(self, degree: int) -> List[Word]:
        return list(self._quotients[degree].basis)

    # ---- constructors ----

    def element(self, f: Elementish) -> GradedForm:
        return GradedForm(self, 0, {(): PlaneElement.coerce(f)}, reduced=True)

    def zero(self, degree: int) -> GradedForm:
        return GradedForm(self, degree, reduced=True)

    def theta_form(self, a: int) -> GradedForm:
        assert 0 <= a < self.n, f"Frame index {a + 1} out of range."
        return GradedForm(self, 1, {(a,): ONE}, reduced=True)

    def word_form(self, word: Sequence[int]) -> GradedForm:
        return GradedForm(self, len(word), {tuple(word): ONE})

    def form(self, degree: int, coeffs: Mapping[Word, Elementish]) -> GradedForm:
        return GradedForm(self, degree, coeffs)

    def _as_form(self, value) -> GradedForm:
        if isinstance(value, GradedForm):
            assert value.calculus is self, "Form belongs to a different calculus."
            return value
        return self.element(value)

    # ---- products and differentials ----

    def wedge(self, a, b) -> GradedForm:
        """
        Concatenate words and multiply coefficients, then reduce to the canonical basis.

        Raises
        ------
        CalculusError if the result degree exceeds the cap and neither factor is zero.
        """
        a, b = self._as_form(a), self._as_form(b)
        degree = a.degree + b.degree
        if not a.coeffs or not b.coeffs:
            return self.zero(min(degree, DEGREE_CAP))
        if degree > DEGREE_CAP:
            raise CalculusError(f"Wedge product of degree {degree} exceeds the supported maximum {DEGREE_CAP}.")
        out: Dict[Word, PlaneElement] = {}
        for u, f in a.coeffs.items():
            for v, g in b.coeffs.items():
                out[u + v] = out.get(u + v, PlaneElement()) + f * g
        return GradedForm(self, degree, out)

    def graded_commutator(self, a, b) -> GradedForm:
        a, b = self._as_form(a), self._as_form(b)
        sign = -1 if (a.degree * b.degree) % 2 == 0 else 1
        return self.wedge(a, b) + self.wedge(b, a).scale(sign)

    def d(self, value) -> GradedForm:
        """
        Exterior derivative. Degree 0: df = (e_a f) theta^a. Higher degrees use the graded Leibniz rule
        with d theta^a from dtheta().

        Raises
        ------
        CalculusError for input of the maximal degree.
        """
        form = self._as_form(value)
        if form.degree == 0:
            f = form.coeffs.get((), PlaneElement())
            return GradedForm(self, 1, {(a,): der_apply(e, f) for a, e in enumerate(self.spec.ders)}, reduced=True)
        if form.degree >= DEGREE_CAP:
            raise CalculusError(f"d of a degree-{form.degree} form exceeds the supported maximum {DEGREE_CAP}.")
        total = self.zero(form.degree + 1)
        for w, f in form.coeffs.items():
            total = total + self.wedge(self.d(f), self.word_form(w)) + f * self._d_word(w)
        return total

    def _d_word(self, word: Word) -> GradedForm:
        total = self.zero(len(word) + 1)
        for i, a in enumerate(word):
            term = self.wedge(self.wedge(self.word_form(word[:i]), self.dtheta(a)), self.word_form(word[i + 1:]))
            total = total + (term if i % 2 == 0 else -term)
        return total

    def dtheta(self, a: int) -> GradedForm:
        if self.is_inner:
            return self.structure().dtheta[a]
        with self._lock:
            if a not in self._dtheta:
                self._dtheta[a] = self.coordinate_dtheta(a)
            return self._dtheta[a]

    # ---- coordinates ----

    def _build_coordinate_form(self, name: str) -> GradedForm:
        if name == 'dx':
            return self.d(X)
        if name == 'dy':
            return self.d(Y)
        # tau = x dy - q dy x
        dy = self.d(Y)
        return X * dy - (dy * X).scale(Q)

    def coordinate_form(self, name: str) -> GradedForm:
        if name not in self._coordinate_forms:
            if name not in COORDINATES:
                raise CalculusError(f"Unknown coordinate differential '{name}'.")
            return self._build_coordinate_form(name)
        return self._coordinate_forms[name]

    def coordinate_differential(self, name: str) -> GradedForm:
        """d of a coordinate differential: d(dx) = d(dy) = 0, d(tau) = dx dy + q dy dx."""
        if name == 'tau':
            dx, dy = self.coordinate_form('dx'), self.coordinate_form('dy')
            return self.wedge(dx, dy) + self.wedge(dy, dx).scale(Q)
        return self.zero(2)

    def coordinate_dtheta(self, a: int) -> GradedForm:
        """d theta^a through theta^a = sum_mu F[a][mu] dxi^mu."""
        total = self.zero(2)
        for mu, name in enumerate(self.coordinates):
            f = self.frame_inverse[a][mu]
            total = total + self.wedge(self.d(f), self.coordinate_form(name)) + f * self.coordinate_differential(name)
        return total

    def frame_expression(self, a: int) -> Dict[str, PlaneElement]:
        row = self.frame_inverse[a]
        return {name: row[mu] for mu, name in enumerate(self.coordinates) if row[mu]}

    # ---- structure ----

    def structure(self) -> StructureData:
        """
        Raises
        ------
        UnsupportedError for calculi with outer derivations.
        IncompatibleStructureError if some twisted bracket is not lam_a D^a + K with central D, K.
        """
        with self._lock:
            if self._structure is None:
                self._structure = self._extract_structure()
            return self._structure

    def _extract_structure(self) -> StructureData:
        if not self.is_inner:
            raise UnsupportedError(f"Structure data unavailable for outer calculi ('{self.name}').")
        n, C = self.n, self.C
        lams = self.lambdas

        brackets = {}
        for b, c in product(range(n), repeat=2):
            t = lams[b] * lams[c]
            for d_, e in product(range(n), repeat=2):
                coefficient = C.entry(d_ * n + e, b * n + c)
                if coefficient:
                    t = t - (lams[d_] * lams[e]).scale(coefficient)
            brackets[(b, c)] = t

        monomials = {(0, 0)}
        for f in list(lams) + list(brackets.values()):
            monomials.update(f.terms)
        monomials = sorted(monomials)
        system = QMatrix.from_rows([[lam.coefficient(*m) for lam in lams] + [ONE if m == (0, 0) else ZERO]
                                    for m in monomials])
        if system.rank() < n + 1:
            raise IncompatibleStructureError(
                f"Incompatible (lambda, C) pair in '{self.name}': lambda_a and 1 are linearly dependent."
            )

        D, K = {}, {}
        for (b, c), t in brackets.items():
            solution = system.solve([t.coefficient(*m) for m in monomials])
            if solution is None:
                raise IncompatibleStructureError(
                    f"Incompatible (lambda, C) pair in '{self.name}': [lambda_{b + 1}, lambda_{c + 1}]_C = "
                    f"{t.render()} is not lambda_a D^a + K with central D, K."
                )
            for a in range(n):
                D[(a, b, c)] = solution[a]
            K[(b, c)] = solution[n]

        theta = GradedForm(self, 1, {(a,): -lams[a] for a in range(n)}, reduced=True)
        dtheta = []
        for a in range(n):
            half_d = GradedForm(self, 2, {(b, c): D[(a, b, c)] * HALF for b, c in product(range(n), repeat=2)})
            dtheta.append(-(self.graded_commutator(theta, self.theta_form(a)) + half_d))

        Cabc = {}
        for a in range(n):
            v = dtheta[a].coeffs
            for b, c in product(range(n), repeat=2):
                twisted = PlaneElement()
                for d_, e in product(range(n), repeat=2):
                    coefficient = C.entry(d_ * n + e, b * n + c)
                    if coefficient and (d_, e) in v:
                        twisted = twisted + v[(d_, e)].scale(coefficient)
                Cabc[(a, b, c)] = twisted - v.get((b, c), PlaneElement())
        logger.debug(f"Structure of '{self.name}': "
                     f"{sum(1 for v in D.values() if v)} nonzero D, {sum(1 for v in K.values() if v)} nonzero K.")
        return StructureData(Cabc, D, K, brackets, theta, tuple(dtheta), self.frame, self.frame_inverse,
                             self.coordinates)

    def theta(self) -> GradedForm:
        return self.structure().theta

    # ---- relations ----

    def relations(self) -> List[Relation]:
        """
        For g in {x, y} and each coordinate differential dxi, the coefficients r_eta with
        g dxi = sum_eta d(eta) r_eta.
        """
        H = _right_inverse(_transpose(self.frame))
        out = []
        for g_name, g in (('x', X), ('y', Y)):
            for mu, name in enumerate(self.coordinates):
                w = [g * self.frame[mu][a] for a in range(self.n)]
                rhs = []
                for eta, eta_name in enumerate(self.coordinates):
                    r = PlaneElement()
                    for b in range(self.n):
                        r = r + H[eta][b] * w[b]
                    if r:
                        rhs.append((eta_name, r))
                out.append(Relation(g_name, name, tuple(rhs)))
        return out


def build_calculus(spec: CalculusSpec) -> Calculus:
    return Calculus(spec)


def d(form) -> GradedForm:
    assert isinstance(form, GradedForm), "Use Calculus.d for bare algebra elements."
    return form.calculus.d(form)


def wedge(a: GradedForm, b: GradedForm) -> GradedForm:
    return a.calculus.wedge(a, b)


def extract_structure(handle: Calculus) -> StructureData:
    return handle.structure()


def relation_report(handle: Calculus) -> List[Relation]:
    return handle.relations()


def coordinate_form(handle: Calculus, name: str) -> GradedForm:
    return handle.coordinate_form(name)


def frame_in_coordinates(handle: Calculus) -> List[List[PlaneElement]]:
    return handle.frame_inverse


def coordinate_dtheta(handle: Calculus, a: int) -> GradedForm:
    return handle.coordinate_dtheta(a)


def _delta(i: int, j: int) -> int:
    return 1 if i == j else 0


def structure_symmetrized(handle: Calculus) -> Dict[Tuple[int, int, int], PlaneElement]:
    """
    Residuals of C^a_{bc} - D^a_{bc} + lam_(b delta^a_c) - lam_(d delta^a_e) C^{de}_{bc}, with the
    unweighted symmetrization lam_(b delta^a_c) = lam_b delta^a_c + lam_c delta^a_b.
    """
    structure = handle.structure()
    n, C, lams = handle.n, handle.C, handle.lambdas

    def sym(a, b, c):
        return lams[b].scale(_delta(a, c)) + lams[c].scale(_delta(a, b))

    residual = {}
    for a, b, c in product(range(handle.n), repeat=3):
        r = structure.Cabc[(a, b, c)] - PlaneElement.scalar(structure.D[(a, b, c)]) + sym(a, b, c)
        for d_, e in product(range(n), repeat=2):
            coefficient = C.entry(d_ * n + e, b * n + c)
            if coefficient:
                r = r - sym(a, d_, e).scale(coefficient)
        residual[(a, b, c)] = r
    return residual


# ---- checks ----

def _wedge_relations(handle: Calculus):
    n, C = handle.n, handle.C
    out = {}
    for a, b in product(range(n), repeat=2):
        coeffs = {(a, b): ONE}
        for c, e in product(range(n), repeat=2):
            value = C.entry(a * n + b, c * n + e)
            if value:
                coeffs[(c, e)] = coeffs.get((c, e), ZERO) + value
        out[(a, b)] = handle.form(2, coeffs)
    return out


def _coordinate_squares(handle: Calculus):
    return {name: handle.wedge(handle.coordinate_form(name), handle.coordinate_form(name))
            for name in handle.coordinates if name != 'tau'}


def _coordinate_roundtrip(handle: Calculus):
    out = {}
    for mu, nu in product(range(handle.n), repeat=2):
        total = PlaneElement.scalar(-_delta(mu, nu))
        for a in range(handle.n):
            total = total + handle.frame[mu][a] * handle.frame_inverse[a][nu]
        out[(mu, nu)] = total
    return out


def _d_squared(handle: Calculus):
    out = {name: handle.d(handle.d(f)) for name, f in (('x', X), ('y', Y), ('x^-1', X_INV), ('y^-1', Y_INV))}
    for a in range(handle.n):
        out[f't{a + 1}'] = handle.d(handle.dtheta(a))
    return out


def _dtau(handle: Calculus):
    return handle.d(handle.coordinate_form('tau')) - handle.coordinate_differential('tau')


def _relation_residuals(handle: Calculus):
    out = {}
    for relation in handle.relations():
        g = X if relation.generator == 'x' else Y
        residual = g * handle.coordinate_form(relation.coordinate)
        for name, r in relation.rhs:
            residual = residual - handle.coordinate_form(name) * r
        out[f'{relation.generator} {relation.coordinate}'] = residual
    return out


def _bracket_decomposition(handle: Calculus):
    s, lams = handle.structure(), handle.lambdas
    out = {}
    for (b, c), t in s.brackets.items():
        r = t - PlaneElement.scalar(s.K[(b, c)])
        for a in range(handle.n):
            r = r - lams[a].scale(s.D[(a, b, c)])
        out[(b, c)] = r
    return out


def _twisted_symmetry(handle: Calculus):
    # D + D.C = 0, K + K.C = 0 and C^a + C^a.C = 0 in the lower index pair
    s, n, C = handle.structure(), handle.n, handle.C
    out = {}
    for b, c in product(range(n), repeat=2):
        column = b * n + c
        k = s.K[(b, c)] + sum((s.K[(d_, e)] * C.entry(d_ * n + e, column)
                               for d_, e in product(range(n), repeat=2)), ZERO)
        out[('K', b, c)] = k
        for a in range(n):
            dd = s.D[(a, b, c)] + sum((s.D[(a, d_, e)] * C.entry(d_ * n + e, column)
                                       for d_, e in product(range(n), repeat=2)), ZERO)
            cc = s.Cabc[(a, b, c)]
            for d_, e in product(range(n), repeat=2):
                cc = cc + s.Cabc[(a, d_, e)].scale(C.entry(d_ * n + e, column))
            out[('D', a, b, c)] = dd
            out[('C', a, b, c)] = cc
    return out


def _dtheta_structure(handle: Calculus):
    s, n = handle.structure(), handle.n
    out = {}
    for a in range(n):
        rebuilt = handle.form(2, {(b, c): s.Cabc[(a, b, c)].scale(HALF) for b, c in product(range(n), repeat=2)})
        out[a] = s.dtheta[a] + rebuilt
    return out


def _theta_squared(handle: Calculus):
    s, n, lams = handle.structure(), handle.n, handle.lambdas
    coeffs = {}
    for b, c in product(range(n), repeat=2):
        f = PlaneElement.scalar(s.K[(b, c)])
        for a in range(n):
            f = f + lams[a].scale(s.D[(a, b, c)])
        coeffs[(b, c)] = f.scale(HALF)
    return handle.wedge(s.theta, s.theta) - handle.form(2, coeffs)


def _maurer_cartan(handle: Calculus):
    s, n = handle.structure(), handle.n
    k_form = handle.form(2, {(a, b): s.K[(a, b)] * HALF for a, b in product(range(n), repeat=2)})
    return handle.d(s.theta) + handle.wedge(s.theta, s.theta) + k_form


def _maurer_cartan_dual(handle: Calculus):
    s, n, C = handle.structure(), handle.n, handle.C
    ders = handle.spec.ders
    out = {}
    for g_name, g in (('x', X), ('y', Y)):
        first = [der_apply(e, g) for e in ders]
        for b, c in product(range(n), repeat=2):
            r = der_apply(ders[b], first[c])
            for d_, e in product(range(n), repeat=2):
                coefficient = C.entry(d_ * n + e, b * n + c)
                if coefficient:
                    r = r - der_apply(ders[d_], first[e]).scale(coefficient)
            for a in range(n):
                r = r - first[a] * s.Cabc[(a, b, c)]
            out[(g_name, b, c)] = r
    return out


def _completeness(handle: Calculus):
    # covectors killed by the degree-2 reduction satisfy A = A C and span n^2 - rank(1 - C) dimensions
    n2 = handle.n * handle.n
    quotient = handle._quotients[2]
    one_minus_c = QMatrix.identity(n2) - handle.C
    if quotient.basis:
        projection = QMatrix.from_rows([[dict(quotient.expansion[w]).get(b, ZERO) for b in quotient.basis]
                                        for w in quotient.words])
        kernel = projection.transpose().kernel()
    else:
        kernel = QMatrix.identity(n2).to_rows()
    residual = {'dimension': qs(len(quotient.basis) - one_minus_c.rank())}
    if kernel:
        residual['kernel'] = QMatrix.from_rows(kernel) * one_minus_c
    return residual


def _frame_differential(handle: Calculus):
    return {a: handle.coordinate_dtheta(a) - handle.dtheta(a) for a in range(handle.n)}


def second_order_checks(handle: Calculus) -> List[Check]:
    """The registry of identities verified for a calculus, in report order."""
    checks = [
        Check('wedge_relations', 'theta^a theta^b + C^{ab}_{cd} theta^c theta^d = 0',
              partial(_wedge_relations, handle)),
        Check('coordinate_squares', 'dx dx = 0 and dy dy = 0', partial(_coordinate_squares, handle)),
        Check('coordinate_roundtrip', 'coordinate -> frame -> coordinate is the identity',
              partial(_coordinate_roundtrip, handle)),
        Check('relations', 'g dxi = sum d(eta) r_eta for the reported commutation relations',
              partial(_relation_residuals, handle)),
        Check('d_squared', 'd d = 0 on x, y, x^-1, y^-1 and theta^a', partial(_d_squared, handle)),
        Check('completeness', 'A = A C for every covector A killed by the degree-2 quotient',
              partial(_completeness, handle))
    ]
    if 'tau' in handle.coordinates:
        checks.append(Check('dtau', 'd tau = dx dy + q dy dx', partial(_dtau, handle)))
    if handle.is_inner:
        checks.extend([
            Check('bracket_decomposition', '[lam_b, lam_c]_C = lam_a D^a_{bc} + K_{bc}',
                  partial(_bracket_decomposition, handle)),
            Check('twisted_symmetry', 'D, K and C^a are annihilated by 1 + C in the lower pair',
                  partial(_twisted_symmetry, handle)),
            Check('dtheta_structure', 'd theta^a = -1/2 C^a_{bc} theta^b theta^c',
                  partial(_dtheta_structure, handle)),
            Check('frame_differential', 'd theta^a from the frame equals d theta^a from theta',
                  partial(_frame_differential, handle)),
            Check('structure_symmetrized',
                  'C^a_{bc} - D^a_{bc} + lam_(b delta^a_c) - lam_(d delta^a_e) C^{de}_{bc} = 0',
                  partial(structure_symmetrized, handle)),
            Check('theta_squared', 'theta theta = 1/2 (lam_a D^a_{bc} + K_{bc}) theta^b theta^c',
                  partial(_theta_squared, handle)),
            Check('maurer_cartan', 'd theta + theta theta = -1/2 K_{ab} theta^a theta^b',
                  partial(_maurer_cartan, handle)),
            Check('maurer_cartan_dual', '[e_b, e_c]_C f = e_a f C^a_{bc} on f = x, y',
                  partial(_maurer_cartan_dual, handle))
        ])
    checks.extend(Check(check_id, description, partial(fn, handle))
                  for check_id, description, fn in handle.spec.identities)
    return checks


def verify_second_order(handle: Calculus, q_value: Optional[Fraction] = None,
                        workers: int = 1) -> List[CheckResult]:
    """
    Evaluate every identity of second_order_checks exactly.

    Parameters
    ----------
    handle : Calculus
        A built calculus.
    q_value : Fraction, default None
        Also evaluate every residual at this rational q.
    workers : int, default 1
        Threads used to evaluate checks.

    Returns
    -------
    A CheckResult per identity, in registry order.
    """
    return run_checks(second_order_checks(handle), q_value=q_value, workers=workers)
