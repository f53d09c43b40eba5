"""
Recursive-descent parser for the expression grammar

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := "-" factor | power
    power  := atom ("^" ["-"] integer)?
    atom   := "x" | "y" | "q" | "dx" | "dy" | "tau" | "t1" | "t2" | "t3" | integer
            | "d" "(" expr ")" | "(" expr ")"

'*' is the noncommutative, order-preserving product (the wedge product between forms); '/' divides by a
nonzero central scalar, so 2/3 is a rational literal. Frame symbols and d need a calculus.
"""
import re
from dataclasses import dataclass
from typing import List, Optional, Union

from qplane_calculi.calculus import Calculus, GradedForm
from qplane_calculi.utils import PlaneElement, QPlaneError, ParseError, Q, qs_inv

__all__ = [
    'parse_expr',
    'render_value'
]

Value = Union[PlaneElement, GradedForm]

_TOKEN = re.compile(r'\s*(?:(?P<int>\d+)|(?P<name>[A-Za-z][A-Za-z0-9]*)|(?P<op>[-+*/^()]))')
_FRAME = re.compile(r't([1-9])$')
_COORDINATES = ('dx', 'dy', 'tau')


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    position: int


def _tokenize(text: str) -> List[_Token]:
    tokens, position = [], 0
    while True:
        while position < len(text) and text[position].isspace():
            position += 1
        if position == len(text):
            tokens.append(_Token('end', '', position))
            return tokens
        match = _TOKEN.match(text, position)
        if not match:
            raise ParseError(f"Unexpected character '{text[position]}'", position)
        kind = match.lastgroup
        tokens.append(_Token(kind, match.group(kind), match.start(kind)))
        position = match.end()


class _Parser:

    def __init__(self, text: str, calculus: Optional[Calculus]):
        self.calculus = calculus
        self.tokens = _tokenize(text)
        self.index = 0

    def peek(self) -> _Token:
        return self.tokens[self.index]

    def take(self) -> _Token:
        token = self.tokens[self.index]
        if token.kind != 'end':
            self.index += 1
        return token

    def expect(self, text: str) -> _Token:
        token = self.take()
        if token.text != text:
            found = f"'{token.text}'" if token.kind != 'end' else 'end of input'
            raise ParseError(f"Expected '{text}' but found {found}", token.position)
        return token

    def parse(self) -> Value:
        value = self.expr()
        token = self.peek()
        if token.kind != 'end':
            raise ParseError(f"Unexpected '{token.text}'", token.position)
        return value

    def expr(self) -> Value:
        value = self.term()
        while self.peek().text in ('+', '-'):
            token = self.take()
            rhs = self.term()
            value = self._apply(token, lambda: value + rhs if token.text == '+' else value - rhs)
        return value

    def term(self) -> Value:
        value = self.factor()
        while self.peek().text in ('*', '/'):
            token = self.take()
            rhs = self.factor()
            if token.text == '*':
                value = self._apply(token, lambda: value * rhs)
            else:
                value = self._divide(value, rhs, token)
        return value

    def factor(self) -> Value:
        if self.peek().text == '-':
            self.take()
            return -self.factor()
        return self.power()

    def power(self) -> Value:
        base = self.atom()
        if self.peek().text != '^':
            return base
        token = self.take()
        sign = 1
        if self.peek().text == '-':
            self.take()
            sign = -1
        exponent = self.take()
        if exponent.kind != 'int':
            raise ParseError("Exponent must be an integer", exponent.position)
        k = sign * int(exponent.text)
        if isinstance(base, GradedForm):
            if k < 0:
                raise ParseError("Forms have no negative powers", token.position)
            result = self.calculus.element(1)
            for _ in range(k):
                result = self._apply(token, lambda: result * base)
            return result
        return self._apply(token, lambda: base**k)

    def atom(self) -> Value:
        token = self.take()
        if token.kind == 'int':
            return PlaneElement.scalar(int(token.text))
        if token.text == '(':
            value = self.expr()
            self.expect(')')
            return value
        if token.kind == 'name':
            return self.symbol(token)
        if token.kind == 'end':
            raise ParseError("Unexpected end of input", token.position)
        raise ParseError(f"Unexpected '{token.text}'", token.position)

    def symbol(self, token: _Token) -> Value:
        name = token.text
        if name == 'x':
            return PlaneElement.monomial(1, 0)
        if name == 'y':
            return PlaneElement.monomial(0, 1)
        if name == 'q':
            return PlaneElement.scalar(Q)
        frame = _FRAME.match(name)
        if name not in _COORDINATES and name != 'd' and not frame:
            raise ParseError(f"Unknown symbol '{name}'", token.position)
        if self.calculus is None:
            raise ParseError(f"'{name}' requires a preset context", token.position)
        if name == 'd':
            self.expect('(')
            inner = self.expr()
            self.expect(')')
            return self._apply(token, lambda: self.calculus.d(inner))
        if frame:
            a = int(frame.group(1))
            if a > self.calculus.n:
                raise ParseError(f"Unknown symbol '{name}': the calculus has {self.calculus.n} frame generators",
                                 token.position)
            return self.calculus.theta_form(a - 1)
        return self._apply(token, lambda: self.calculus.coordinate_form(name))

    def _divide(self, value: Value, divisor: Value, token: _Token) -> Value:
        if isinstance(divisor, GradedForm) and divisor.degree == 0:
            divisor = divisor.coefficient(())
        if not isinstance(divisor, PlaneElement) or not divisor.is_scalar() or not divisor:
            raise ParseError("Division only by nonzero scalars", token.position)
        return value.scale(qs_inv(divisor.scalar_value()))

    @staticmethod
    def _apply(token: _Token, operation):
        try:
            return operation()
        except ParseError:
            raise
        except QPlaneError as error:
            raise ParseError(str(error), token.position) from error


def parse_expr(text: str, calculus: Optional[Calculus] = None) -> Value:
    """
    Parse and normalize an expression.

    Parameters
    ----------
    text : str
        The expression, e.g. 'x*dx - q*dx*x'.
    calculus : Calculus, default None
        Context for dx, dy, tau, t1..t3 and d(...).

    Returns
    -------
    A PlaneElement, or a GradedForm for expressions of positive degree.

    Raises
    ------
    ParseError on syntax errors, unknown symbols, and invalid operations, with the character position.
    """
    value = _Parser(text, calculus).parse()
    if isinstance(value, GradedForm) and value.degree == 0:
        return value.coefficient(())
    return value


def render_value(value: Value) -> str:
    return value.render()
