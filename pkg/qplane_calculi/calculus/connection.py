import logging
from dataclasses import dataclass, field
from itertools import product
from typing import Dict, List, Mapping, Optional, Tuple

from qplane_calculi.calculus.forms import Calculus, GradedForm
from qplane_calculi.utils import (CalculusError, IncompatibleStructureError, ONE, PlaneElement, PoleError, Q, QMatrix,
                                  QScalar, UnsupportedError, ZERO, der_apply, pe_eval_q1, qs, qs_inv, qs_sqrt,
                                  qs_substitute, qs_to_json)

__all__ = [
    'ConnectionData',
    'MetricTensor',
    'SigmaTensor',
    'TensorBi',
    'bimodule_leibniz_check',
    'connection_checks',
    'covariant',
    'metric_check',
    'metric_check_matrix',
    'metric_lowered_check',
    'omega0',
    'omega_alternate',
    'omega_limit',
    'parity_check',
    'q1_regular',
    'sigma_apply',
    'sigma_check',
    'sigma_constraints',
    'sigma_symmetry_check',
    'solve_sigma',
    'torsion',
    'torsionfree_check',
    'wedge_projection',
    'with_chi'
]

logger = logging.getLogger(__name__)

Index3 = Tuple[int, int, int]


def _delta(i: int, j: int) -> int:
    return 1 if i == j else 0


def _key(indices) -> str:
    return ','.join(str(i + 1) for i in indices)


@dataclass(frozen=True)
class SigmaTensor:
    """
    The generalized permutation sigma(theta^a (x) theta^b) = S^{ab}_{cd} theta^c (x) theta^d.

    Parameters
    ----------
    S : QMatrix
        n^2 x n^2 matrix with row index (ab) and column index (cd).
    label : str, default ''
        Optional name used in reports.
    """
    S: QMatrix
    label: str = field(default='', compare=False)

    def __post_init__(self):
        n = round(self.S.rows**0.5)
        assert self.S.rows == self.S.cols == n * n, "S must be square of size n^2."

    def __repr__(self):
        return f"SigmaTensor({self.label or 'unnamed'}, n={self.n})"

    @property
    def n(self) -> int:
        return round(self.S.rows**0.5)

    def entry(self, a: int, b: int, c: int, d: int) -> QScalar:
        return self.S.entry(a * self.n + b, c * self.n + d)

    @classmethod
    def flip(cls, n: int) -> 'SigmaTensor':
        return cls(QMatrix.from_rows([[_delta(b, c) * _delta(a, d) for c in range(n) for d in range(n)]
                                      for a in range(n) for b in range(n)]), label='flip')

    @classmethod
    def identity(cls, n: int) -> 'SigmaTensor':
        return cls(QMatrix.identity(n * n), label='identity')


@dataclass(frozen=True)
class MetricTensor:
    """
    A central metric g(theta^a (x) theta^b) = g^{ab}.

    Parameters
    ----------
    g : QMatrix
        Invertible n x n matrix of scalars.

    Raises
    ------
    CalculusError if g is singular.
    """
    g: QMatrix

    def __post_init__(self):
        assert self.g.rows == self.g.cols, "A metric must be square."
        if self.g.rank() < self.g.rows:
            raise CalculusError("The metric is degenerate.")

    @property
    def n(self) -> int:
        return self.g.rows

    @property
    def lowered(self) -> QMatrix:
        return self.g.inverse()

    @classmethod
    def euclidean(cls, n: int = 2) -> 'MetricTensor':
        return cls(QMatrix.identity(n))


class TensorBi:
    """
    sum f_{ab} theta^a (x) theta^b with algebra coefficients on the left, unreduced.

    Parameters
    ----------
    n : int
        Frame dimension.
    coeffs : Mapping[Tuple[int, int], PlaneElement], default None
        Coefficients; zeros are pruned.
    """
    __slots__ = ('n', 'coeffs')

    def __init__(self, n: int, coeffs: Optional[Mapping[Tuple[int, int], PlaneElement]] = None):
        self.n = n
        self.coeffs: Dict[Tuple[int, int], PlaneElement] = {
            k: PlaneElement.coerce(v) for k, v in sorted((coeffs or {}).items()) if v
        }

    def __repr__(self):
        return f"TensorBi({self.render()})"

    def __bool__(self):
        return bool(self.coeffs)

    def __eq__(self, other):
        if not isinstance(other, TensorBi):
            return NotImplemented
        return self.n == other.n and self.coeffs == other.coeffs

    __hash__ = None

    def __add__(self, other: 'TensorBi') -> 'TensorBi':
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out.get(k, PlaneElement()) + v
        return TensorBi(self.n, out)

    def __neg__(self) -> 'TensorBi':
        return TensorBi(self.n, {k: -v for k, v in self.coeffs.items()})

    def __sub__(self, other: 'TensorBi') -> 'TensorBi':
        return self + (-other)

    def left_mul(self, f: PlaneElement) -> 'TensorBi':
        return TensorBi(self.n, {k: f * v for k, v in self.coeffs.items()})

    def right_mul(self, f: PlaneElement) -> 'TensorBi':
        return TensorBi(self.n, {k: v * f for k, v in self.coeffs.items()})

    def parts(self) -> Dict[Tuple[int, int], PlaneElement]:
        return dict(self.coeffs)

    def render(self) -> str:
        if not self.coeffs:
            return '0'
        return ' + '.join(f"({v.render()}) t{a + 1}(x)t{b + 1}" for (a, b), v in self.coeffs.items())


@dataclass(frozen=True, eq=False)
class ConnectionData:
    """
    A linear connection D theta^a = -omega^a_{bc} theta^b (x) theta^c on an inner calculus.

    Instance Variables
    ------------------
    calculus : Calculus
        The underlying calculus.
    sigma : SigmaTensor
        The generalized permutation.
    omega : Dict[Tuple[int, int, int], PlaneElement]
        omega^a_{bc} = omega0^a_{bc} + chi^a_{bc}.
    chi : Dict[Tuple[int, int, int], QScalar]
        The central offset from omega0.
    """
    calculus: Calculus = field(repr=False)
    sigma: SigmaTensor
    omega: Dict[Index3, PlaneElement] = field(repr=False)
    chi: Dict[Index3, QScalar] = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.calculus.n

    def to_json(self) -> Dict:
        return {
            'S': self.sigma.S.to_json(),
            'omega': {_key(k): v.to_json() for k, v in self.omega.items() if v},
            'chi': {_key(k): qs_to_json(v) for k, v in self.chi.items() if v}
        }


def sigma_check(S: SigmaTensor, C: QMatrix) -> Tuple[bool, QMatrix]:
    """
    Consistency of sigma with the wedge relations, (1 + S)(1 - C) = 0.

    Returns
    -------
    passed : bool
    residual : QMatrix
        The product (1 + S)(1 - C).
    """
    assert S.S.rows == C.rows, "S and C must have the same dimension."
    one = QMatrix.identity(C.rows)
    residual = (one + S.S) * (one - C)
    return residual.is_zero(), residual


def omega0(handle: Calculus, S: SigmaTensor, chi: Optional[Mapping[Index3, QScalar]] = None) -> ConnectionData:
    """
    The connection omega0^a_{bc} = lam_d (S^{ad}_{bc} - delta^d_b delta^a_c), optionally shifted by chi.

    Raises
    ------
    UnsupportedError for outer calculi.
    IncompatibleStructureError if S fails sigma_check against the calculus' C.
    """
    if not handle.is_inner:
        raise UnsupportedError(f"Calculus '{handle.name}' has outer derivations and carries no omega0.")
    passed, _ = sigma_check(S, handle.C)
    if not passed:
        raise IncompatibleStructureError(f"sigma '{S.label}' is inconsistent with C of '{handle.name}'.")
    n, lams = handle.n, handle.lambdas
    omega = {}
    for a, b, c in product(range(n), repeat=3):
        total = PlaneElement()
        for d_ in range(n):
            coefficient = S.entry(a, d_, b, c) - _delta(d_, b) * _delta(a, c)
            if coefficient:
                total = total + lams[d_].scale(coefficient)
        omega[(a, b, c)] = total
    conn = ConnectionData(handle, S, omega)
    return with_chi(conn, chi) if chi else conn


def with_chi(conn: ConnectionData, chi: Mapping[Index3, QScalar]) -> ConnectionData:
    """Shift omega by a central chi; entries of chi add to any previous offset."""
    omega = dict(conn.omega)
    total_chi = dict(conn.chi)
    for k, v in chi.items():
        v = qs(v)
        omega[k] = omega[k] + PlaneElement.scalar(v)
        total_chi[k] = total_chi.get(k, ZERO) + v
    return ConnectionData(conn.calculus, conn.sigma, omega, total_chi)


def covariant(conn: ConnectionData, a: int) -> TensorBi:
    n = conn.n
    return TensorBi(n, {(b, c): -conn.omega[(a, b, c)] for b, c in product(range(n), repeat=2)})


def sigma_apply(S: SigmaTensor, t: TensorBi) -> TensorBi:
    n = t.n
    out: Dict[Tuple[int, int], PlaneElement] = {}
    for (a, b), f in t.coeffs.items():
        for c, d_ in product(range(n), repeat=2):
            value = S.entry(a, b, c, d_)
            if value:
                out[(c, d_)] = out.get((c, d_), PlaneElement()) + f.scale(value)
    return TensorBi(n, out)


def wedge_projection(handle: Calculus, t: TensorBi) -> GradedForm:
    return handle.form(2, t.coeffs)


def omega_alternate(handle: Calculus, S: SigmaTensor) -> List[TensorBi]:
    """D0 theta^a = -theta (x) theta^a + sigma(theta^a (x) theta) with theta = -lam_d theta^d."""
    n, lams = handle.n, handle.lambdas
    out = []
    for a in range(n):
        left = TensorBi(n, {(d_, a): lams[d_] for d_ in range(n)})
        right = sigma_apply(S, TensorBi(n, {(a, d_): lams[d_] for d_ in range(n)}))
        out.append(left - right)
    return out


def torsion(conn: ConnectionData) -> Dict[int, GradedForm]:
    """Theta^a = d theta^a - pi(D theta^a)."""
    handle = conn.calculus
    return {a: handle.dtheta(a) - wedge_projection(handle, covariant(conn, a)) for a in range(conn.n)}


def torsionfree_check(conn: ConnectionData) -> Tuple[bool, Dict[Index3, PlaneElement]]:
    """
    omega^a_{bc} - omega^a_{de} C^{de}_{bc} - C^a_{bc} = 0 componentwise.

    Returns
    -------
    passed : bool
    residual : Dict[Tuple[int, int, int], PlaneElement]
    """
    handle = conn.calculus
    n, C, Cabc = handle.n, handle.C, handle.structure().Cabc
    residual = {}
    for a, b, c in product(range(n), repeat=3):
        r = conn.omega[(a, b, c)] - Cabc[(a, b, c)]
        for d_, e in product(range(n), repeat=2):
            value = C.entry(d_ * n + e, b * n + c)
            if value:
                r = r - conn.omega[(a, d_, e)].scale(value)
        residual[(a, b, c)] = r
    return not any(residual.values()), residual


def metric_check(S: SigmaTensor, g: MetricTensor) -> Tuple[bool, QMatrix]:
    """
    Metric compatibility S^{ae}_{dh} g^{hf} S^{cb}_{ef} = g^{ac} delta^b_d.

    Returns
    -------
    passed : bool
    residual : QMatrix
        Entry [(a, c), (b, d)] holds the residual of the (a, b, c, d) component.
    """
    n = S.n
    assert g.n == n, "S and g must have the same frame dimension."
    rows = []
    for a, c in product(range(n), repeat=2):
        row = []
        for b, d_ in product(range(n), repeat=2):
            total = -g.g.entry(a, c) * _delta(b, d_)
            for e, h, f in product(range(n), repeat=3):
                total += S.entry(a, e, d_, h) * g.g.entry(h, f) * S.entry(c, b, e, f)
            row.append(total)
        rows.append(row)
    residual = QMatrix.from_rows(rows)
    return residual.is_zero(), residual


def metric_check_matrix(S: SigmaTensor) -> Tuple[bool, QMatrix]:
    """Matrix form for the euclidean metric: S S' = 1 with S'[(k1 k2), (j1 j2)] = S[(j1 k1), (j2 k2)]."""
    n = S.n
    shuffled = QMatrix.from_rows([[S.entry(j1, k1, j2, k2) for j1 in range(n) for j2 in range(n)]
                                  for k1 in range(n) for k2 in range(n)])
    residual = S.S * shuffled - QMatrix.identity(n * n)
    return residual.is_zero(), residual


def metric_lowered_check(conn: ConnectionData, g: MetricTensor) -> Tuple[bool, Dict[Index3, PlaneElement]]:
    """
    omega^a_{bc} + omega_{ce}^f S^{ae}_{bf} = 0 with omega_{ab}^c = g_{ad} omega^d_{be} g^{ec}.
    """
    n, S = conn.n, conn.sigma
    lower = g.lowered
    lowered = {}
    for c, e, f in product(range(n), repeat=3):
        total = PlaneElement()
        for d_, h in product(range(n), repeat=2):
            value = lower.entry(c, d_) * g.g.entry(h, f)
            if value:
                total = total + conn.omega[(d_, e, h)].scale(value)
        lowered[(c, e, f)] = total
    residual = {}
    for a, b, c in product(range(n), repeat=3):
        r = conn.omega[(a, b, c)]
        for e, f in product(range(n), repeat=2):
            value = S.entry(a, e, b, f)
            if value:
                r = r + lowered[(c, e, f)].scale(value)
        residual[(a, b, c)] = r
    return not any(residual.values()), residual


def bimodule_leibniz_check(conn: ConnectionData, f: PlaneElement) -> Tuple[bool, Dict[int, TensorBi]]:
    """
    D(f theta^a) by the left Leibniz rule against D(theta^a f) by the right Leibniz rule; the two agree
    since f theta^a = theta^a f.
    """
    n = conn.n
    ders = conn.calculus.spec.ders
    df = [der_apply(e, f) for e in ders]
    residual = {}
    for a in range(n):
        dtheta = covariant(conn, a)
        left = TensorBi(n, {(b, a): df[b] for b in range(n)}) + dtheta.left_mul(f)
        right = sigma_apply(conn.sigma, TensorBi(n, {(a, b): df[b] for b in range(n)})) + dtheta.right_mul(f)
        residual[a] = left - right
    return not any(residual.values()), residual


def sigma_symmetry_check(S: SigmaTensor, g: MetricTensor) -> Tuple[bool, QMatrix]:
    """g^{ab} = S^{ab}_{cd} g^{cd}; residual is an n x n matrix."""
    n = S.n
    rows = []
    for a in range(n):
        row = []
        for b in range(n):
            total = g.g.entry(a, b)
            for c, d_ in product(range(n), repeat=2):
                total -= S.entry(a, b, c, d_) * g.g.entry(c, d_)
            row.append(total)
        rows.append(row)
    residual = QMatrix.from_rows(rows)
    return residual.is_zero(), residual


def parity_check(S: SigmaTensor) -> Tuple[bool, QMatrix]:
    """S(q) = -S(-1/q) under the parameter substitution."""
    residual = S.S + S.S.map(lambda v: qs_substitute(v, -qs_inv(Q)))
    return residual.is_zero(), residual


def _c_parameter(C: QMatrix) -> Optional[QScalar]:
    """The parameter c of C = diag-corners plus the middle block [[0, c], [1/c, 0]], or None for any other shape."""
    if C.rows != 4:
        return None
    c = C.entry(1, 2)
    if not c:
        return None
    expected = QMatrix.from_rows([[1, 0, 0, 0], [0, 0, c, 0], [0, qs_inv(c), 0, 0], [0, 0, 0, 1]])
    return c if C == expected else None


def sigma_constraints(S: SigmaTensor, C: QMatrix) -> Tuple[bool, Dict[str, QScalar]]:
    """
    The linear constraints S^2_3 = c (1 + S^2_2), S^3_2 = c^-1 (1 + S^3_3) together with the zeros of the
    block ansatz.

    Raises
    ------
    UnsupportedError if C is not of the two-dimensional block shape.
    """
    c = _c_parameter(C)
    if c is None:
        raise UnsupportedError("sigma_constraints needs a 4x4 C of corner-diagonal plus middle-block shape.")
    M = S.S
    residual = {
        'S23': M.entry(1, 2) - c * (ONE + M.entry(1, 1)),
        'S32': M.entry(2, 1) - qs_inv(c) * (ONE + M.entry(2, 2))
    }
    for i, j in product(range(4), repeat=2):
        in_corners = i in (0, 3) and j in (0, 3)
        in_middle = i in (1, 2) and j in (1, 2)
        if not (in_corners or in_middle):
            residual[f'S{i + 1}{j + 1}'] = M.entry(i, j)
    return not any(residual.values()), residual


def solve_sigma(C: QMatrix, g: Optional[MetricTensor] = None) -> List[SigmaTensor]:
    """
    Every rational solution S of the block ansatz that is consistent with C and compatible with g.

    The ansatz leaves the corner block N = [[S11, S14], [S41, S44]] and the middle block
    M = [[S22, S23], [S32, S33]]. Compatibility splits into N Y = 1 and M Z = 1 where Y and Z reuse
    the same unknowns, so det M = eps and det N = -eps for eps = +1 or -1; each eps fixes the middle
    block rationally and leaves S11 as a square root.

    Parameters
    ----------
    C : QMatrix
        4x4 tensor of the shape diag corners plus the middle block [[0, c], [1/c, 0]].
    g : MetricTensor, default euclidean
        Must be a nonzero multiple of the identity.

    Returns
    -------
    The solutions, each verified by sigma_check and metric_check.

    Raises
    ------
    UnsupportedError for any other C shape or metric, or for c^2 = +1 or -1; use metric_check to verify a
    given S instead.
    """
    g = g or MetricTensor.euclidean(2)
    c = _c_parameter(C)
    if c is None:
        raise UnsupportedError("solve_sigma supports only the 4x4 corner-diagonal plus middle-block C; "
                               "use metric_check to verify a given sigma.")
    scale = g.g.entry(0, 0)
    if g.g != QMatrix.identity(2) * scale:
        raise UnsupportedError("solve_sigma supports only metrics proportional to the identity; "
                               "use metric_check to verify a given sigma.")
    c2 = c * c
    if c2 == ONE or c2 == -ONE:
        raise UnsupportedError("solve_sigma needs c^2 != +1, -1 for the elimination.")

    solutions = []
    for eps in (ONE, -ONE):
        u = eps * (ONE - c2) / (eps * c2 - ONE)
        v = -ONE - eps * c2 * (ONE + u)
        m23, m32 = c * (ONE + u), (ONE + v) / c
        s14, s41 = eps * v, eps * u
        root = qs_sqrt(ONE - eps * u * v)
        if root is None:
            logger.debug(f"Branch eps={eps}: S11^2 is not a square in Q(q).")
            continue
        for s11 in ([root] if not root else [root, -root]):
            s44 = -eps * s11
            candidate = SigmaTensor(QMatrix.from_rows([
                [s11, 0, 0, s14],
                [0, u, m23, 0],
                [0, m32, v, 0],
                [s41, 0, 0, s44]
            ]), label=f'solution {len(solutions) + 1}')
            if sigma_check(candidate, C)[0] and metric_check(candidate, g)[0]:
                solutions.append(candidate)
            else:
                logger.warning(f"Discarded candidate from branch eps={eps}: verification failed.")
    logger.debug(f"solve_sigma found {len(solutions)} solutions.")
    return solutions


def omega_limit(conn: ConnectionData) -> Dict[Index3, object]:
    """
    Entrywise q -> 1 limit of omega.

    Raises
    ------
    PoleError naming the first entry with a pole at q = 1.
    """
    out = {}
    for k, v in conn.omega.items():
        try:
            out[k] = pe_eval_q1(v)
        except PoleError as error:
            raise PoleError(f"omega^{k[0] + 1}_{k[1] + 1}{k[2] + 1} has a pole of order {error.order} at q = 1.",
                            where=k, order=error.order) from error
    return out


def q1_regular(conn: ConnectionData) -> bool:
    try:
        omega_limit(conn)
    except PoleError:
        return False
    return True


def connection_checks(conn: ConnectionData, g: Optional[MetricTensor] = None) -> Dict[str, bool]:
    """The summary flags of a connection report."""
    g = g or MetricTensor.euclidean(conn.n)
    return {
        'sigma': sigma_check(conn.sigma, conn.calculus.C)[0],
        'metric': metric_check(conn.sigma, g)[0],
        'torsion_free': torsionfree_check(conn)[0],
        'symmetric_metric': sigma_symmetry_check(conn.sigma, g)[0],
        'q1_regular': q1_regular(conn)
    }
