import logging
import operator
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import isqrt
from typing import Dict, List, Optional, Sequence, Tuple, Union

from sympy import Symbol, ZZ
from sympy.polys.fields import FracElement
from sympy.polys.matrices import DomainMatrix

from qplane_calculi.utils.errors import DivisionByZeroError

__all__ = [
    'Limit',
    'ONE',
    'Q',
    'QField',
    'QMatrix',
    'QQq',
    'QScalar',
    'ZERO',
    'qs',
    'qs_arith',
    'qs_eval',
    'qs_from_json',
    'qs_inv',
    'qs_limit_q1',
    'qs_pow',
    'qs_power',
    'qs_render',
    'qs_sqrt',
    'qs_substitute',
    'qs_to_json'
]

logger = logging.getLogger(__name__)

# Q(q) as the fraction field of Z[q]; sympy keeps its elements cancelled with a positive denominator LC.
QQq = ZZ.frac_field(Symbol('q'))
QField = QQq.field
QScalar = FracElement

Q = QField.gens[0]
ONE = QField.one
ZERO = QField.zero

_QRing = QField.ring
_Q_MINUS_ONE = _QRing.gens[0] - 1

Scalarish = Union[int, Fraction, str, FracElement]

_OPS = {
    'add': operator.add,
    'sub': operator.sub,
    'mul': operator.mul
}


def qs(value: Scalarish) -> QScalar:
    """
    Coerce a python number, a rational string such as '2/3', or a QScalar into the field Q(q).

    Parameters
    ----------
    value : int, Fraction, str, or QScalar
        The value to coerce.

    Returns
    -------
    The canonical QScalar for value.

    Raises
    ------
    TypeError if the value cannot be interpreted as an element of Q(q).
    """
    if isinstance(value, FracElement):
        assert value.field == QField, "Scalar belongs to a different fraction field."
        return value
    if isinstance(value, bool):
        raise TypeError("Booleans are not scalars.")
    if isinstance(value, int):
        return QField(value)
    if isinstance(value, str):
        value = Fraction(value)
    if isinstance(value, Fraction):
        return QField(value.numerator) / QField(value.denominator)
    raise TypeError(f"Cannot build a QScalar from {value!r}.")


def qs_arith(a: Scalarish, b: Scalarish, op: str) -> QScalar:
    """
    Exact field arithmetic on canonical forms.

    Parameters
    ----------
    a, b : Scalarish
        Operands.
    op : str
        One of 'add', 'sub', 'mul', 'div'.

    Raises
    ------
    DivisionByZeroError if op is 'div' and b is zero.
    """
    a, b = qs(a), qs(b)
    if op == 'div':
        if not b:
            raise DivisionByZeroError(f"Division of {qs_render(a)} by zero.")
        return a / b
    assert op in _OPS, f"Unknown scalar operation '{op}'. Choose from ['add', 'sub', 'mul', 'div']"
    return _OPS[op](a, b)


def qs_inv(a: Scalarish) -> QScalar:
    return qs_arith(ONE, a, 'div')


@lru_cache(maxsize=None)
def qs_pow(k: int) -> QScalar:
    """Canonical q^k for any integer k."""
    if k >= 0:
        return Q**k
    return ONE / Q**(-k)


def qs_power(a: Scalarish, k: int) -> QScalar:
    # sympy's negative powers skip sign canonicalization, so invert first.
    a = qs(a)
    if k >= 0:
        return a**k
    return qs_inv(a)**(-k)


@dataclass(frozen=True)
class Limit:
    """
    The value of a QScalar at q = 1: either a finite rational or the order of a pole.
    """
    value: Optional[Fraction] = None
    pole_order: Optional[int] = None

    @property
    def is_finite(self) -> bool:
        return self.pole_order is None

    def __repr__(self):
        if self.is_finite:
            return f"Limit(value={self.value})"
        return f"Limit(pole_order={self.pole_order})"


def _poly_at_one(p) -> int:
    return sum(int(c) for c in p.coeffs()) if p else 0


def _multiplicity_at_one(p) -> int:
    k = 0
    while p and _poly_at_one(p) == 0:
        p = p.exquo(_Q_MINUS_ONE)
        k += 1
    return k


def qs_limit_q1(a: Scalarish) -> Limit:
    """
    Take the q -> 1 limit of a scalar.

    Parameters
    ----------
    a : Scalarish
        The scalar to evaluate.

    Returns
    -------
    Limit(value=...) if the limit is finite, Limit(pole_order=k) if a has a pole of order k at q = 1.
    """
    a = qs(a)
    den = _poly_at_one(a.denom)
    if den != 0:
        return Limit(value=Fraction(_poly_at_one(a.numer), den))
    order = _multiplicity_at_one(a.denom) - _multiplicity_at_one(a.numer)
    if order <= 0:
        # only reachable for non-canonical input
        reduced = QField.new(a.numer, a.denom)
        return qs_limit_q1(reduced)
    return Limit(pole_order=order)


def _poly_eval(p, r: Fraction) -> Fraction:
    return sum((int(c) * r**e for (e,), c in p.terms()), Fraction(0))


def qs_eval(a: Scalarish, r: Union[Fraction, int, str]) -> Fraction:
    """
    Evaluate a scalar at a rational value of q.

    Raises
    ------
    DivisionByZeroError if the denominator vanishes at r.
    """
    a, r = qs(a), Fraction(r)
    den = _poly_eval(a.denom, r)
    if den == 0:
        raise DivisionByZeroError(f"{qs_render(a)} has a pole at q = {r}.")
    return _poly_eval(a.numer, r) / den


def _poly_compose(p, s: QScalar) -> QScalar:
    coeffs = {e: int(c) for (e,), c in p.terms()}
    acc = ZERO
    for e in range(max(coeffs, default=0), -1, -1):
        acc = acc * s + QField(coeffs.get(e, 0))
    return acc


def qs_substitute(a: Scalarish, s: Scalarish) -> QScalar:
    """
    Substitute q -> s, e.g. s = -1/q or s = q^-4.

    Raises
    ------
    DivisionByZeroError if the substituted denominator vanishes identically.
    """
    a, s = qs(a), qs(s)
    return qs_arith(_poly_compose(a.numer, s), _poly_compose(a.denom, s), 'div')


def _poly_sqrt(p):
    if not p:
        return p
    content, factors = p.factor_list()
    content = int(content)
    if content < 0 or isqrt(content)**2 != content:
        return None
    root = _QRing(isqrt(content))
    for factor, multiplicity in factors:
        if multiplicity % 2:
            return None
        root *= factor**(multiplicity // 2)
    return root


def qs_sqrt(a: Scalarish) -> Optional[QScalar]:
    """
    Exact square root in Q(q).

    Returns
    -------
    A root r with r*r == a, or None when a is not a square of a rational function.
    """
    a = qs(a)
    num, den = _poly_sqrt(a.numer), _poly_sqrt(a.denom)
    if num is None or den is None:
        return None
    return QField.new(num, den)


def _render_poly(p) -> str:
    terms = sorted(((e, int(c)) for (e,), c in p.terms()), reverse=True)
    if not terms:
        return '0'
    pieces = []
    for i, (e, c) in enumerate(terms):
        sign = '-' if c < 0 else '+'
        c = abs(c)
        if e == 0:
            body = str(c)
        else:
            mono = 'q' if e == 1 else f'q^{e}'
            body = mono if c == 1 else f'{c}*{mono}'
        if i == 0:
            pieces.append(body if sign == '+' else f'-{body}')
        else:
            pieces.append(f' {sign} {body}')
    return ''.join(pieces)


def qs_render(a: Scalarish) -> str:
    """Render a scalar in the expression grammar, e.g. 'q^2/(q^4 - 1)'."""
    a = qs(a)
    num = _render_poly(a.numer)
    if a.denom == _QRing.one:
        return num
    if len(a.numer.terms()) > 1:
        num = f'({num})'
    den = _render_poly(a.denom)
    if len(a.denom.terms()) > 1 or not den.isalnum():
        den = f'({den})'
    return f'{num}/{den}'


def _poly_to_json(p) -> List[List[int]]:
    return [[e, int(c)] for (e,), c in sorted(p.terms())]


def _poly_from_json(items: Sequence[Sequence[int]]):
    return _QRing({(int(e),): int(c) for e, c in items}) if items else _QRing.zero


def qs_to_json(a: Scalarish) -> Dict[str, List[List[int]]]:
    """Serialize as {"num": [[exp, int], ...], "den": [[exp, int], ...]}, exponent ascending, zero-free."""
    a = qs(a)
    return {'num': _poly_to_json(a.numer), 'den': _poly_to_json(a.denom)}


def qs_from_json(data: Dict[str, Sequence[Sequence[int]]]) -> QScalar:
    den = _poly_from_json(data['den'])
    if not den:
        raise DivisionByZeroError("Serialized scalar has a zero denominator.")
    return QField.new(_poly_from_json(data['num']), den)


@dataclass(frozen=True)
class QMatrix:
    """
    A dense matrix over Q(q), stored row-major. Heavy lifting is delegated to sympy's DomainMatrix.

    Parameters
    ----------
    rows : int
        Number of rows.
    cols : int
        Number of columns.
    entries : Tuple[QScalar]
        rows x cols canonical scalars in row-major order.
    """
    rows: int
    cols: int
    entries: Tuple[QScalar, ...]

    def __post_init__(self):
        assert self.rows > 0 and self.cols > 0, "Matrix dimensions must be positive."
        assert len(self.entries) == self.rows * self.cols, "Entry count must equal rows x cols."

    def __repr__(self):
        return f"QMatrix({self.rows}x{self.cols})"

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[Scalarish]]) -> 'QMatrix':
        rows = [list(row) for row in rows]
        assert rows and all(len(row) == len(rows[0]) for row in rows), "Rows must be non-empty and of equal length."
        return cls(len(rows), len(rows[0]), tuple(qs(v) for row in rows for v in row))

    @classmethod
    def identity(cls, n: int) -> 'QMatrix':
        return cls.from_rows([[ONE if i == j else ZERO for j in range(n)] for i in range(n)])

    @classmethod
    def zeros(cls, rows: int, cols: int) -> 'QMatrix':
        return cls(rows, cols, (ZERO,) * (rows * cols))

    @classmethod
    def _from_domain(cls, dm: DomainMatrix) -> 'QMatrix':
        return cls.from_rows(dm.to_list())

    def _domain(self) -> DomainMatrix:
        return DomainMatrix(self.to_rows(), (self.rows, self.cols), QQq)

    def entry(self, i: int, j: int) -> QScalar:
        return self.entries[i * self.cols + j]

    def row(self, i: int) -> List[QScalar]:
        return list(self.entries[i * self.cols:(i + 1) * self.cols])

    def to_rows(self) -> List[List[QScalar]]:
        return [self.row(i) for i in range(self.rows)]

    def map(self, fn) -> 'QMatrix':
        return QMatrix(self.rows, self.cols, tuple(fn(v) for v in self.entries))

    def __add__(self, other: 'QMatrix') -> 'QMatrix':
        assert (self.rows, self.cols) == (other.rows, other.cols), "Shape mismatch in matrix sum."
        return QMatrix(self.rows, self.cols, tuple(a + b for a, b in zip(self.entries, other.entries)))

    def __sub__(self, other: 'QMatrix') -> 'QMatrix':
        return self + (-other)

    def __neg__(self) -> 'QMatrix':
        return self.map(lambda v: -v)

    def __mul__(self, other: Union['QMatrix', Scalarish]) -> 'QMatrix':
        if isinstance(other, QMatrix):
            assert self.cols == other.rows, "Shape mismatch in matrix product."
            return QMatrix._from_domain(self._domain() * other._domain())
        c = qs(other)
        return self.map(lambda v: v * c)

    def __rmul__(self, other: Scalarish) -> 'QMatrix':
        c = qs(other)
        return self.map(lambda v: c * v)

    def transpose(self) -> 'QMatrix':
        return QMatrix.from_rows([[self.entry(i, j) for i in range(self.rows)] for j in range(self.cols)])

    def is_zero(self) -> bool:
        return not any(self.entries)

    def is_identity(self) -> bool:
        return self.rows == self.cols and self == QMatrix.identity(self.rows)

    def rank(self) -> int:
        return self._domain().rank()

    def rank_agrees(self) -> bool:
        """Rank computed along three elimination orders (natural, reversed columns, transposed) agrees."""
        reversed_cols = self.rref(column_order=list(range(self.cols))[::-1])[1]
        return self.rank() == len(reversed_cols) == self.transpose().rank()

    def rref(self, column_order: Optional[Sequence[int]] = None) -> Tuple[List[List[QScalar]], List[int]]:
        """
        Reduced row echelon form, eliminating columns in the given order.

        Parameters
        ----------
        column_order : List[int], default None
            Permutation of column indices giving the elimination order. Natural order if None.

        Returns
        -------
        rows : List[List[QScalar]]
            The nonzero rows of the reduced matrix, indexed by original column positions.
        pivots : List[int]
            Original column index of each row's pivot.
        """
        order = list(column_order) if column_order is not None else list(range(self.cols))
        assert sorted(order) == list(range(self.cols)), "column_order must be a permutation of the columns."
        permuted = DomainMatrix([[row[j] for j in order] for row in self.to_rows()], (self.rows, self.cols), QQq)
        reduced, pivots = permuted.rref()
        reduced = reduced.to_list()
        out = []
        for r in range(len(pivots)):
            row = [ZERO] * self.cols
            for k, j in enumerate(order):
                row[j] = reduced[r][k]
            out.append(row)
        return out, [order[p] for p in pivots]

    def kernel(self) -> List[List[QScalar]]:
        """Basis of {v : M v = 0}."""
        return [list(v) for v in self._domain().nullspace().to_list() if any(v)]

    def solve(self, rhs: Sequence[Scalarish]) -> Optional[List[QScalar]]:
        """
        Solve M v = rhs.

        Returns
        -------
        One solution (free variables set to zero), or None if the system is inconsistent.
        """
        assert len(rhs) == self.rows, "Right-hand side length must match the row count."
        augmented = QMatrix.from_rows([row + [qs(b)] for row, b in zip(self.to_rows(), rhs)])
        reduced, pivots = augmented.rref()
        if self.cols in pivots:
            return None
        solution = [ZERO] * self.cols
        for row, p in zip(reduced, pivots):
            solution[p] = row[self.cols]
        return solution

    def inverse(self) -> 'QMatrix':
        assert self.rows == self.cols, "Only square matrices can be inverted."
        if self.rank() < self.rows:
            raise DivisionByZeroError(f"Singular {self.rows}x{self.cols} matrix.")
        return QMatrix._from_domain(self._domain().inv())

    def to_json(self) -> Dict:
        return {'rows': self.rows, 'cols': self.cols, 'entries': [qs_to_json(v) for v in self.entries]}

    @classmethod
    def from_json(cls, data: Dict) -> 'QMatrix':
        return cls(data['rows'], data['cols'], tuple(qs_from_json(v) for v in data['entries']))

    def render(self) -> str:
        cells = [[qs_render(v) for v in row] for row in self.to_rows()]
        width = max(len(c) for row in cells for c in row)
        return '\n'.join('[ ' + '  '.join(c.rjust(width) for c in row) + ' ]' for row in cells)
