import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Iterable, List, Mapping, Optional, Tuple, Union

from sympy import QQ
from sympy.polys.fields import field as rational_field

from qplane_calculi.utils.errors import InconsistentDerivationError, NonInvertibleError, PoleError
from qplane_calculi.utils.scalars import (ONE, ZERO, QScalar, Scalarish, qs, qs_eval, qs_from_json, qs_inv,
                                          qs_limit_q1, qs_pow, qs_render, qs_substitute, qs_to_json)

__all__ = [
    'CField',
    'CX',
    'CY',
    'Derivation',
    'InnerDerivation',
    'OuterDerivation',
    'PlaneElement',
    'X',
    'X_INV',
    'Y',
    'Y_INV',
    'der_apply',
    'laurent_monomial',
    'pe_commutator',
    'pe_eval_q1',
    'pe_is_central',
    'pe_mul'
]

logger = logging.getLogger(__name__)

Monomial = Tuple[int, int]

# Commutative image of the plane at q = 1: rational functions in x, y over Q.
CField, CX, CY = rational_field('x,y', QQ)


def laurent_monomial(m: int, n: int, c: Union[Fraction, int] = 1):
    """c * x^m * y^n as an element of CField."""
    c = Fraction(c)
    numer = CX**max(m, 0) * CY**max(n, 0) * CField.ground_new(QQ(c.numerator, c.denominator))
    denom = CX**max(-m, 0) * CY**max(-n, 0)
    return numer / denom


class PlaneElement:
    """
    An element of the generalized quantum plane: a finite sum of normal-ordered monomials
    c_{mn}(q) x^m y^n with all x's to the left of all y's and xy = q yx.

    Parameters
    ----------
    terms : Mapping[Tuple[int, int], Scalarish]
        Coefficient of each monomial x^m y^n. Zero coefficients are pruned.

    Instance Variables
    ------------------
    terms : Dict[Tuple[int, int], QScalar]
        The zero-free coefficient map. Treat it as read-only.
    """
    __slots__ = ('terms', '_hash')

    def __init__(self, terms: Optional[Mapping[Monomial, Scalarish]] = None):
        pruned = {}
        for mono, c in (terms or {}).items():
            c = qs(c)
            if c:
                pruned[(int(mono[0]), int(mono[1]))] = c
        self.terms: Dict[Monomial, QScalar] = pruned
        self._hash = None

    def __repr__(self):
        return f"PlaneElement({self.render()})"

    @classmethod
    def scalar(cls, c: Scalarish) -> 'PlaneElement':
        return cls({(0, 0): c})

    @classmethod
    def monomial(cls, m: int, n: int, c: Scalarish = 1) -> 'PlaneElement':
        return cls({(m, n): c})

    @classmethod
    def coerce(cls, value: Union['PlaneElement', Scalarish]) -> 'PlaneElement':
        return value if isinstance(value, PlaneElement) else cls.scalar(value)

    def __eq__(self, other):
        if isinstance(other, PlaneElement):
            return self.terms == other.terms
        if isinstance(other, (int, Fraction, QScalar)):
            return self.terms == PlaneElement.scalar(other).terms
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self.terms.items()))
        return self._hash

    def __bool__(self):
        return bool(self.terms)

    def __add__(self, other):
        if not isinstance(other, (PlaneElement, int, Fraction, QScalar)):
            return NotImplemented
        other = PlaneElement.coerce(other)
        out = dict(self.terms)
        for mono, c in other.terms.items():
            out[mono] = out.get(mono, ZERO) + c
        return PlaneElement(out)

    __radd__ = __add__

    def __neg__(self):
        return PlaneElement({mono: -c for mono, c in self.terms.items()})

    def __sub__(self, other):
        if not isinstance(other, (PlaneElement, int, Fraction, QScalar)):
            return NotImplemented
        return self + (-PlaneElement.coerce(other))

    def __rsub__(self, other):
        return PlaneElement.coerce(other) - self

    def __mul__(self, other):
        if isinstance(other, PlaneElement):
            return pe_mul(self, other)
        if isinstance(other, (int, Fraction, QScalar)):
            return self.scale(other)
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, (int, Fraction, QScalar)):
            return self.scale(other)
        return NotImplemented

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse()**(-k)
        result = PlaneElement.scalar(ONE)
        for _ in range(k):
            result = result * self
        return result

    def scale(self, c: Scalarish) -> 'PlaneElement':
        c = qs(c)
        return PlaneElement({mono: c * v for mono, v in self.terms.items()})

    def coefficient(self, m: int, n: int) -> QScalar:
        return self.terms.get((m, n), ZERO)

    def items(self) -> List[Tuple[Monomial, QScalar]]:
        return sorted(self.terms.items())

    def is_scalar(self) -> bool:
        return all(mono == (0, 0) for mono in self.terms)

    def scalar_value(self) -> QScalar:
        assert self.is_scalar(), f"{self.render()} is not a scalar."
        return self.coefficient(0, 0)

    def commutator(self, other: 'PlaneElement') -> 'PlaneElement':
        return pe_commutator(self, other)

    def inverse(self) -> 'PlaneElement':
        """
        Inverse of a single monomial, (c x^m y^n)^-1 = c^-1 q^{-mn} x^-m y^-n.

        Raises
        ------
        NonInvertibleError if the element is not a single monomial with nonzero coefficient.
        """
        if len(self.terms) != 1:
            raise NonInvertibleError(f"Only monomials can be inverted, got {self.render()}.")
        (m, n), c = next(iter(self.terms.items()))
        return PlaneElement({(-m, -n): qs_inv(c) * qs_pow(-m * n)})

    def is_central(self) -> bool:
        return pe_is_central(self)

    def eval_q1(self):
        return pe_eval_q1(self)

    def eval_q(self, r: Union[Fraction, int, str]) -> Dict[Monomial, Fraction]:
        """Coefficients at a rational q, keyed by monomial and zero-free."""
        values = {mono: qs_eval(c, r) for mono, c in self.terms.items()}
        return {mono: v for mono, v in values.items() if v}

    def substitute(self, s: Scalarish) -> 'PlaneElement':
        return PlaneElement({mono: qs_substitute(c, s) for mono, c in self.terms.items()})

    def render(self) -> str:
        """Render in the expression grammar, e.g. '-(q/(q - 1))*x*y'."""
        if not self.terms:
            return '0'
        pieces = []
        for i, ((m, n), c) in enumerate(self.items()):
            negative = c.numer.LC < 0
            if negative:
                c = -c
            mono = '*'.join(
                f'{name}' if e == 1 else f'{name}^{e}'
                for name, e in (('x', m), ('y', n)) if e != 0
            )
            if not mono:
                body = qs_render(c)
                if ' ' in body:
                    body = f'({body})'
            elif c == ONE:
                body = mono
            else:
                body = f'({qs_render(c)})*{mono}'
            if i == 0:
                pieces.append(f'-{body}' if negative else body)
            else:
                pieces.append(f" {'-' if negative else '+'} {body}")
        return ''.join(pieces)

    def to_json(self) -> List[Dict]:
        return [{'m': m, 'n': n, 'c': qs_to_json(c)} for (m, n), c in self.items()]

    @classmethod
    def from_json(cls, data: Iterable[Dict]) -> 'PlaneElement':
        return cls({(item['m'], item['n']): qs_from_json(item['c']) for item in data})


X = PlaneElement.monomial(1, 0)
Y = PlaneElement.monomial(0, 1)
X_INV = PlaneElement.monomial(-1, 0)
Y_INV = PlaneElement.monomial(0, -1)


def pe_mul(a: PlaneElement, b: PlaneElement) -> PlaneElement:
    """
    Normal-ordered product using x^a y^b . x^c y^d = q^{-bc} x^{a+c} y^{b+d}.
    """
    out: Dict[Monomial, QScalar] = {}
    for (m1, n1), c1 in a.terms.items():
        for (m2, n2), c2 in b.terms.items():
            mono = (m1 + m2, n1 + n2)
            out[mono] = out.get(mono, ZERO) + c1 * c2 * qs_pow(-n1 * m2)
    return PlaneElement(out)


def pe_commutator(a: PlaneElement, b: PlaneElement) -> PlaneElement:
    return pe_mul(a, b) - pe_mul(b, a)


def pe_is_central(f: PlaneElement) -> bool:
    """For generic q the center is the scalars."""
    return f.is_scalar()


def pe_eval_q1(f: PlaneElement):
    """
    Commutative image of f at q = 1, as an element of CField.

    Raises
    ------
    PoleError if some coefficient has a pole at q = 1; carries the monomial and the pole order.
    """
    out = CField.zero
    for (m, n), c in f.items():
        limit = qs_limit_q1(c)
        if not limit.is_finite:
            raise PoleError(
                f"Coefficient of x^{m} y^{n} has a pole of order {limit.pole_order} at q = 1.",
                where=(m, n),
                order=limit.pole_order
            )
        if limit.value:
            out += laurent_monomial(m, n, limit.value)
    return out


@dataclass(frozen=True, eq=False)
class Derivation:
    """Base class for derivations of the plane; subclasses implement apply."""

    def apply(self, f: PlaneElement) -> PlaneElement:
        raise NotImplementedError

    def __call__(self, f: PlaneElement) -> PlaneElement:
        return self.apply(f)

    @property
    def is_inner(self) -> bool:
        return False


@dataclass(frozen=True, eq=False)
class InnerDerivation(Derivation):
    """
    The inner derivation f -> [lam, f].

    Parameters
    ----------
    lam : PlaneElement
        The generating element.
    """
    lam: PlaneElement = None

    def __post_init__(self):
        assert isinstance(self.lam, PlaneElement), "An inner derivation needs a PlaneElement generator."

    def __repr__(self):
        return f"InnerDerivation(lam={self.lam.render()})"

    @property
    def is_inner(self) -> bool:
        return True

    def apply(self, f: PlaneElement) -> PlaneElement:
        return pe_commutator(self.lam, f)


@dataclass(frozen=True, eq=False)
class OuterDerivation(Derivation):
    """
    A derivation fixed by its images on the generators and extended by the Leibniz rule.

    Parameters
    ----------
    image_x : PlaneElement
        e(x).
    image_y : PlaneElement
        e(y).

    Raises
    ------
    InconsistentDerivationError if e(x)y + x e(y) - q(e(y)x + y e(x)) != 0.
    """
    image_x: PlaneElement = None
    image_y: PlaneElement = None

    def __post_init__(self):
        residual = (self.image_x * Y + X * self.image_y) - (self.image_y * X + Y * self.image_x).scale(qs_pow(1))
        if residual:
            raise InconsistentDerivationError(
                f"Rule e(x) = {self.image_x.render()}, e(y) = {self.image_y.render()} does not respect xy = q yx: "
                f"residual {residual.render()}."
            )

    def __repr__(self):
        return f"OuterDerivation(x -> {self.image_x.render()}, y -> {self.image_y.render()})"

    def _power(self, generator: PlaneElement, image: PlaneElement, k: int) -> PlaneElement:
        # e(u^k) = sum_i u^i e(u) u^{k-1-i}; negative k runs over u^-1 with e(u^-1) = -u^-1 e(u) u^-1
        if k == 0:
            return PlaneElement()
        if k < 0:
            inv = generator.inverse()
            generator, image, k = inv, -(inv * image * inv), -k
        total = PlaneElement()
        for i in range(k):
            total = total + generator**i * image * generator**(k - 1 - i)
        return total

    @lru_cache(maxsize=None)
    def _monomial(self, m: int, n: int) -> PlaneElement:
        x_part = self._power(X, self.image_x, m) * PlaneElement.monomial(0, n)
        y_part = PlaneElement.monomial(m, 0) * self._power(Y, self.image_y, n)
        return x_part + y_part

    def apply(self, f: PlaneElement) -> PlaneElement:
        total = PlaneElement()
        for (m, n), c in f.terms.items():
            total = total + self._monomial(m, n).scale(c)
        return total


def der_apply(e: Derivation, f: PlaneElement) -> PlaneElement:
    return e.apply(f)
