"""Shared result records and hypothesis errors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np


class HypothesisError(ValueError):
    """A theorem gate failed; ``gate`` names it and ``evidence`` holds the certificate."""

    def __init__(self, gate: str, message: str = "", evidence: Any = None):
        self.gate = gate
        self.evidence = evidence
        super().__init__(f"hypothesis '{gate}' not met" + (f": {message}" if message else ""))


def jsonable(obj):
    """Recursively convert records, numpy scalars and arrays to JSON-ready values."""
    if hasattr(obj, "as_dict"):
        return jsonable(obj.as_dict())
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


@dataclass
class Record:
    """Outcome of a check: a verdict word plus whatever evidence produced it."""

    name: str
    verdict: str
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict in ("Pass", "Consistent", "Satisfied", "Contained")

    def __getitem__(self, key):
        return self.details[key]

    def as_dict(self) -> dict:
        public = {k: v for k, v in self.details.items() if not k.startswith("_")}
        return jsonable({"name": self.name, "verdict": self.verdict, **public})
