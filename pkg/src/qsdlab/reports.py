"""Machine-readable run artifacts: report.json and plot-ready CSV tables.

Reports are deterministic given (config, seed): keys are sorted, floats use
repr round-tripping, and the wall-clock timestamp is isolated as the first
top-level key so that byte comparison after dropping that single line is
exact.  A sha256 digest over the timestamp-free canonical form is embedded,
making every report self-verifying, and the tolerance profile actually used
is echoed so acceptance runs are self-describing.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class ToleranceProfile:
    """Named tolerance bundle embedded in every report."""

    name: str
    lambda0_halfwidth: float     # closed-form eigenvalue window half-width
    qsd_l1: float                # L1 distance of density to closed form
    invariance: float            # sup-norm of conditional-law fixed-point residual
    doob_rowsum: float           # conservativity of the transformed generator
    detailed_balance: float      # symmetry defect of the transformed pair
    intertwining: float          # semigroup intertwining residual at t=3
    chi2_alpha: float            # rejection level for histogram tests

    @classmethod
    def named(cls, name: str) -> "ToleranceProfile":
        if name == "default":
            return cls("default", 1e-3, 1e-3, 1e-10, 1e-12, 1e-12, 1e-9, 0.01)
        if name == "strict":
            return cls("strict", 5e-4, 5e-4, 1e-11, 1e-13, 1e-13, 1e-10, 0.05)
        raise ValueError(f"unknown tolerance profile {name!r}")


def _plain(obj):
    """Recursively convert numpy scalars/arrays and dataclasses to JSON-safe types."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        if np.isnan(f):
            return "nan"
        if np.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _plain(dataclasses.asdict(obj))
    return obj


def canonical_json(obj) -> str:
    """Sorted-key, fixed-separator serialization used for digests."""
    return json.dumps(_plain(obj), sort_keys=True, separators=(",", ":"))


def config_digest(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def write_report(path, content: dict) -> dict:
    """Write report.json with an isolated timestamp line; returns the full dict.

    The digest covers everything except the timestamp, so two runs of the
    same config are byte-identical after dropping the first line.
    """
    body = _plain(content)
    digest = hashlib.sha256(canonical_json(body).encode()).hexdigest()
    body_with_digest = {"report_digest": digest, **body}
    stamped = {"timestamp": datetime.now(timezone.utc).isoformat(), **body_with_digest}
    text = json.dumps(stamped, indent=2, sort_keys=False)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text + "\n")
    return stamped


def write_series(path, rows, header=("t", "value", "stderr")) -> None:
    """CSV table with the documented (t, value, stderr) schema."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join("" if v is None else repr(float(v)) for v in row))
    path.write_text("\n".join(lines) + "\n")
