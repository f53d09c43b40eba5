from fractions import Fraction
from functools import lru_cache

from hypothesis import strategies as st

from _QPLANE.resource.presets import build_preset
from qplane_calculi.utils import ONE, PlaneElement, Q, qs, qs_inv, qs_pow

small_ints = st.integers(min_value=-3, max_value=3)
exponents = st.integers(min_value=-2, max_value=2)


@st.composite
def scalars(draw, nonzero=False):
    """Low-degree elements of Q(q): (a + b q^k) / (c + q^l)."""
    a, b = draw(small_ints), draw(small_ints)
    k, l = draw(st.integers(0, 2)), draw(st.integers(1, 2))
    value = (qs(a) + qs(b) * qs_pow(k)) * qs_inv(ONE + qs_pow(l))
    if nonzero and not value:
        value = ONE + Q
    return value


@st.composite
def elements(draw, max_terms=3):
    """Small-support plane elements with Laurent monomials of low degree."""
    n_terms = draw(st.integers(0, max_terms))
    terms = {}
    for _ in range(n_terms):
        terms[(draw(exponents), draw(exponents))] = draw(scalars())
    return PlaneElement(terms)


@st.composite
def monomials(draw):
    return PlaneElement.monomial(draw(exponents), draw(exponents), draw(scalars(nonzero=True)))


@st.composite
def integer_elements(draw, max_terms=3):
    """Elements with integer coefficients; their q = 1 images are Laurent polynomials."""
    n_terms = draw(st.integers(0, max_terms))
    return PlaneElement({(draw(exponents), draw(exponents)): draw(small_ints) for _ in range(n_terms)})


rationals = st.fractions(min_value=-3, max_value=3, max_denominator=4)


@lru_cache(maxsize=None)
def preset_handle(preset_id: str, alpha: str = '1'):
    """Preset calculi shared by property tests, which cannot take pytest fixtures."""
    return build_preset(preset_id, Fraction(alpha))


@st.composite
def one_forms(draw, handle, max_terms=1):
    """f_a theta^a with small coefficients drawn per frame direction."""
    total = handle.zero(1)
    for a in range(handle.n):
        total = total + draw(elements(max_terms=max_terms)) * handle.theta_form(a)
    return total
