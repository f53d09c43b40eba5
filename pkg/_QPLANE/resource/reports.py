import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

from qplane_calculi.calculus import CheckResult
from qplane_calculi.classical_limit import CURVATURE_CONVENTION
from qplane_calculi.utils import PlaneElement, QMatrix, qs_from_json, qs_render

__all__ = [
    'CONVENTIONS',
    'Report',
    'render_payload'
]

CONVENTIONS = {
    'indices': '1-based; C^{ab}_{cd} and S^{ab}_{cd} have row (ab) and column (cd)',
    'curvature': CURVATURE_CONVENTION,
    'symmetrization': 'unweighted, X_(bc) = X_bc + X_cb',
    'lowering': 'omega_{ab}^c = g_{ad} omega^d_{be} g^{ec}, g_{ab} the inverse of the metric g^{ab}'
}


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec='seconds')


@dataclass
class Report:
    """
    The outcome of one workbench command.

    Instance Variables
    ------------------
    preset_id : str or None
        Preset the command ran against.
    command : str
        The subcommand name.
    parameters : Dict[str, str]
        Effective parameters (alpha, q, check, sigma...), as strings.
    checks : List[CheckResult]
        Check results in registry order.
    payload : Dict
        JSON-native command output (structure data, connection summaries, limit data, an evaluated expression).
    conventions : Dict[str, str]
        Index, sign and symmetrization conventions the payload is expressed in.
    timestamp : str
        Creation time; ignored by equality and by canonical().
    """
    preset_id: Optional[str]
    command: str
    parameters: Dict[str, str] = field(default_factory=dict)
    checks: List[CheckResult] = field(default_factory=list)
    payload: Dict[str, Any] = field(default_factory=dict)
    conventions: Dict[str, str] = field(default_factory=lambda: dict(CONVENTIONS))
    timestamp: str = field(default_factory=_timestamp, compare=False)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failures(self) -> List[CheckResult]:
        return [check for check in self.checks if not check.passed]

    def to_json(self) -> Dict:
        return {
            'preset': self.preset_id,
            'command': self.command,
            'parameters': dict(self.parameters),
            'conventions': dict(self.conventions),
            'checks': [check.to_json() for check in self.checks],
            'status': 'pass' if self.passed else 'fail',
            'payload': self.payload,
            'timestamp': self.timestamp
        }

    @classmethod
    def from_json(cls, data: Dict) -> 'Report':
        return cls(
            preset_id=data['preset'],
            command=data['command'],
            parameters=dict(data.get('parameters', {})),
            checks=[CheckResult.from_json(c) for c in data.get('checks', [])],
            payload=data.get('payload', {}),
            conventions=dict(data.get('conventions', {})),
            timestamp=data.get('timestamp', '')
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    @classmethod
    def loads(cls, text: str) -> 'Report':
        return cls.from_json(json.loads(text))

    def canonical(self) -> str:
        """Deterministic JSON without the timestamp, for comparing runs byte for byte."""
        data = self.to_json()
        del data['timestamp']
        return json.dumps(data, sort_keys=True)

    def render_text(self) -> str:
        lines = [f"{self.command}" + (f" {self.preset_id}" if self.preset_id else '')]
        lines.extend(f"  {k}: {v}" for k, v in self.parameters.items())
        if self.checks:
            lines.append(f"checks: {len(self.checks) - len(self.failures)}/{len(self.checks)} passed")
            for check in self.checks:
                lines.append(f"  [{check.status}] {check.check_id}: {check.description}")
                if not check.passed:
                    lines.append(f"      residual: {check.residual}")
                if check.numeric is not None:
                    lines.append(f"      numeric: {check.numeric}")
        if self.payload:
            lines.extend(render_payload(self.payload))
        return '\n'.join(lines)


def _is_scalar(value: Any) -> bool:
    return isinstance(value, dict) and set(value) == {'num', 'den'}


def _is_matrix(value: Any) -> bool:
    return isinstance(value, dict) and set(value) == {'rows', 'cols', 'entries'}


def _is_element(value: Any) -> bool:
    if not isinstance(value, list) or not value:
        return False
    return all(isinstance(v, dict) and set(v) == {'m', 'n', 'c'} for v in value)


def _scalar_text(value: Any) -> str:
    if _is_scalar(value):
        return qs_render(qs_from_json(value))
    if _is_element(value):
        return PlaneElement.from_json(value).render()
    return str(value)


def render_payload(value: Any, indent: int = 0) -> List[str]:
    """Indented text rendering of a JSON-native payload."""
    pad = '  ' * indent
    lines = []
    if isinstance(value, dict):
        for k, v in value.items():
            if _is_matrix(v):
                lines.append(f"{pad}{k}:")
                lines.extend(f"{pad}  {row}" for row in QMatrix.from_json(v).render().splitlines())
                continue
            if isinstance(v, (dict, list)) and v and not (_is_scalar(v) or _is_element(v)):
                lines.append(f"{pad}{k}:")
                lines.extend(render_payload(v, indent + 1))
            else:
                lines.append(f"{pad}{k}: {_scalar_text(v)}")
    elif isinstance(value, list):
        for v in value:
            if isinstance(v, (dict, list)) and v and not (_is_scalar(v) or _is_element(v)):
                lines.append(f"{pad}-")
                lines.extend(render_payload(v, indent + 1))
            else:
                lines.append(f"{pad}- {_scalar_text(v)}")
    else:
        lines.append(f"{pad}{_scalar_text(value)}")
    return lines
