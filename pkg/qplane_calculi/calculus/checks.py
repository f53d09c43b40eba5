from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from sympy.polys.fields import FracElement
from tqdm import tqdm

from qplane_calculi.utils import PlaneElement, QMatrix, QPlaneError, qs_eval, qs_render, CField

__all__ = [
    'Check',
    'CheckResult',
    'evaluate_check',
    'residual_is_zero',
    'residual_render',
    'run_checks'
]


@dataclass(frozen=True)
class Check:
    """
    A named identity whose compute callable returns a residual that vanishes iff the identity holds.

    Residuals may be PlaneElements, QScalars, QMatrix objects, commutative rationals, anything exposing
    parts() (forms, tensors), or dicts/lists/tuples of those.
    """
    check_id: str
    description: str
    compute: Callable[[], Any] = field(repr=False, compare=False)


@dataclass(frozen=True)
class CheckResult:
    check_id: str
    description: str
    passed: bool
    residual: str
    numeric: Optional[str] = None

    def __repr__(self):
        return f"CheckResult({self.check_id}, {'pass' if self.passed else 'FAIL'})"

    @property
    def status(self) -> str:
        return 'pass' if self.passed else 'fail'

    def to_json(self) -> Dict:
        return {
            'id': self.check_id,
            'description': self.description,
            'status': self.status,
            'residual': self.residual,
            'numeric': self.numeric
        }

    @classmethod
    def from_json(cls, data: Dict) -> 'CheckResult':
        return cls(data['id'], data['description'], data['status'] == 'pass', data['residual'], data.get('numeric'))


def _leaves(residual: Any, label: str = '') -> List[Tuple[str, Any]]:
    if residual is None or isinstance(residual, bool):
        return []
    if isinstance(residual, dict):
        out = []
        for key in sorted(residual, key=str):
            out.extend(_leaves(residual[key], f"{label}[{_key(key)}]"))
        return out
    if isinstance(residual, (list, tuple)):
        out = []
        for i, item in enumerate(residual):
            out.extend(_leaves(item, f"{label}[{i + 1}]"))
        return out
    if isinstance(residual, QMatrix):
        return [(f"{label}[{i + 1},{j + 1}]", residual.entry(i, j))
                for i in range(residual.rows) for j in range(residual.cols)]
    if hasattr(residual, 'parts'):
        return _leaves(residual.parts(), label)
    return [(label, residual)]


def _key(key: Any) -> str:
    if isinstance(key, tuple):
        return ','.join(str(k + 1) if isinstance(k, int) else str(k) for k in key)
    return str(key)


def _render_leaf(value: Any) -> str:
    if isinstance(value, PlaneElement):
        return value.render()
    if isinstance(value, FracElement) and value.field != CField:
        return qs_render(value)
    return str(value)


def residual_is_zero(residual: Any) -> bool:
    if isinstance(residual, bool):
        return residual
    return not any(value for _, value in _leaves(residual))


def residual_render(residual: Any) -> str:
    if isinstance(residual, bool):
        return '0' if residual else 'identity fails'
    nonzero = [(label, value) for label, value in _leaves(residual) if value]
    if not nonzero:
        return '0'
    return '; '.join(f"{label or 'value'} = {_render_leaf(value)}" for label, value in nonzero)


def _numeric_leaf(value: Any, q_value: Fraction) -> bool:
    if isinstance(value, PlaneElement):
        return not value.eval_q(q_value)
    if isinstance(value, FracElement) and value.field != CField:
        return qs_eval(value, q_value) == 0
    return not value


def evaluate_check(check: Check, q_value: Optional[Fraction] = None) -> CheckResult:
    """
    Run one check exactly, and optionally again with q specialized to a rational value.

    Parameters
    ----------
    check : Check
        The identity to evaluate.
    q_value : Fraction, default None
        If given, also report whether every residual coefficient vanishes at this q.

    Returns
    -------
    A CheckResult. Errors raised by the computation become failures carrying the error text.
    """
    try:
        residual = check.compute()
    except QPlaneError as error:
        return CheckResult(check.check_id, check.description, False, f"error: {error}")
    except Exception as error:
        return CheckResult(check.check_id, check.description, False, f"error: {type(error).__name__}: {error}")

    numeric = None
    if q_value is not None:
        try:
            zero = all(_numeric_leaf(value, q_value) for _, value in _leaves(residual))
            numeric = f"q={q_value}: {'0' if zero else 'nonzero'}"
        except ZeroDivisionError:
            numeric = f"q={q_value}: pole"
    return CheckResult(check.check_id, check.description, residual_is_zero(residual), residual_render(residual),
                       numeric)


def run_checks(checks: Sequence[Check], q_value: Optional[Fraction] = None, workers: int = 1,
               progress: bool = False) -> List[CheckResult]:
    """
    Evaluate checks concurrently; results come back in the order the checks were given.

    Parameters
    ----------
    checks : List[Check]
        Checks to evaluate.
    q_value : Fraction, default None
        Optional rational q for the numeric pass.
    workers : int, default 1
        Number of worker threads.
    progress : bool, default False
        If True, show a tqdm progress bar.
    """
    results: List[Optional[CheckResult]] = [None] * len(checks)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        futures = {executor.submit(evaluate_check, check, q_value): i for i, check in enumerate(checks)}
        with tqdm(total=len(checks), desc='Running checks', unit='checks', colour='green',
                  disable=not progress) as pbar:
            for future in as_completed(futures):
                results[futures[future]] = future.result()
                pbar.update()
    return results
