"""Report assembly for the command line.

Reports are plain dicts rendered as indented JSON.  Two rules keep them
useful as artifacts:

* byte stability: identical inputs and seed produce identical bytes, so
  the wall-time field is null unless the caller injects one and timing
  goes to stderr instead;
* no bare booleans: every verdict is a check record carrying the measured
  value, the effective tolerance, and the comparison that was applied.
"""

from __future__ import annotations

import hashlib
import json
import sys

import numpy as np

SCHEMA_VERSION = 1

_OPS = {
    "<=": lambda v, t: v <= t,
    ">=": lambda v, t: v >= t,
    "==": lambda v, t: v == t,
}


def jsonable(obj):
    """Recursively coerce numpy types and complex numbers to JSON-safe values.

    Complex numbers become [re, im] pairs, matching the serialization used
    for positions and residues elsewhere in the package.
    """
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        c = complex(obj)
        return [c.real, c.imag]
    return obj


def check(name: str, value, tolerance, op: str = "<=") -> dict:
    if op not in _OPS:
        raise ValueError(f"unknown comparison {op!r}")
    value = float(value)
    tolerance = float(tolerance)
    return {
        "name": name,
        "value": value,
        "tolerance": tolerance,
        "op": op,
        "pass": bool(_OPS[op](value, tolerance)),
    }


class Report:
    """Accumulates checks and extra sections; top-level pass is their AND."""

    def __init__(self, command: str, params: dict | None = None, inputs: dict | None = None):
        self.data = {
            "schema_version": SCHEMA_VERSION,
            "command": command,
            "params": jsonable(params or {}),
            "inputs": dict(inputs or {}),
            "checks": [],
            "pass": True,
            "wall_time_s": None,
        }

    def add_check(self, name: str, value, tolerance, op: str = "<=") -> dict:
        c = check(name, value, tolerance, op)
        self.data["checks"].append(c)
        self.data["pass"] = bool(self.data["pass"] and c["pass"])
        return c

    def fail(self, message: str) -> None:
        self.data["pass"] = False
        self.data["error"] = str(message)

    def extra(self, key: str, value) -> None:
        self.data[key] = jsonable(value)

    @property
    def passed(self) -> bool:
        return bool(self.data["pass"])

    def dumps(self) -> str:
        return json.dumps(self.data, indent=2, allow_nan=False) + "\n"

    def emit(self, output=None, stream=None) -> None:
        """Write to ``stream`` (default stdout) and optionally to a file."""
        text = self.dumps()
        (stream or sys.stdout).write(text)
        if output:
            with open(output, "w") as fh:
                fh.write(text)


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()
