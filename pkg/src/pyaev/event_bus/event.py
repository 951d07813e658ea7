from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Any, Dict

import numpy as np

_context: Dict[str, Any] = {}


def get_context() -> Dict[str, Any]:
    return _context


def _json_default(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Exception):
        return f"{type(value).__name__}: {value}"
    return str(value)


@dataclass
class Event:
    signal: str
    args: tuple
    kwargs: dict
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for k, v in get_context().items():
            if k not in self.metadata:
                self.metadata[k] = v
        self.metadata.setdefault('time', time.time())

    def to_dict(self) -> dict:
        return {
            'signal': str(self.signal),
            'args': list(self.args),
            'kwargs': self.kwargs,
            'metadata': self.metadata,
        }

    @staticmethod
    def from_dict(data: dict) -> Event:
        return Event(
            signal=data.get('signal', ''),
            args=tuple(data.get('args', ())),
            kwargs=data.get('kwargs', {}),
            metadata=data.get('metadata', {}),
        )

    def serialize(self) -> str:
        return json.dumps(self.to_dict(), default=_json_default)

    @staticmethod
    def deserialize(data: str) -> Event:
        return Event.from_dict(json.loads(data))
