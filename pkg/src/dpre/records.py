"""Result records and deterministic writers.

Outputs must be byte-identical across runs and worker counts, so writers
avoid wall-clock fields, dict-order surprises, and locale-dependent float
formatting. Floats are rendered with repr(), which round-trips exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from . import __version__


def fmt(value) -> str:
    """Canonical cell rendering: repr for floats, str otherwise."""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class EstimateRecord:
    """One scalar estimate with its uncertainty and provenance knobs."""

    name: str
    value: float
    std_error: float = float("nan")
    n_samples: int = 0
    extra: dict = field(default_factory=dict)

    def as_row(self) -> dict:
        row = {
            "name": self.name,
            "value": self.value,
            "std_error": self.std_error,
            "n_samples": self.n_samples,
        }
        row.update(self.extra)
        return row


def write_csv(path, rows, config=None) -> None:
    """Write rows (list of dicts, uniform keys) with a '# ' config header.

    The header line carries the resolved run configuration as compact JSON
    so a result file is self-describing without a sidecar.
    """
    rows = [r.as_row() if isinstance(r, EstimateRecord) else r for r in rows]
    lines = []
    if config is not None:
        lines.append("# " + json.dumps(_jsonable(config), sort_keys=True,
                                       separators=(",", ":")))
    if rows:
        keys = list(rows[0].keys())
        lines.append(",".join(keys))
        for r in rows:
            lines.append(",".join(fmt(r.get(k, "")) for k in keys))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def report_json(config, results) -> str:
    """Canonical JSON report: version + resolved config + results."""
    doc = {
        "version": __version__,
        "config": _jsonable(config),
        "results": _jsonable(results),
    }
    return json.dumps(doc, sort_keys=True, indent=2)


def write_json(path, config, results) -> None:
    with open(path, "w") as fh:
        fh.write(report_json(config, results) + "\n")


def _jsonable(obj):
    """Recursively reduce to JSON-safe types without losing float precision."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "to_json_dict"):
        return _jsonable(obj.to_json_dict())
    if hasattr(obj, "item"):  # numpy scalar
        return obj.item()
    return obj
