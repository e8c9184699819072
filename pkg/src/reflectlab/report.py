"""Structured results shared by every verification routine."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

PASS = "pass"
FAIL = "fail"
NOT_APPLICABLE = "not_applicable"
SKIPPED = "skipped"
INCONCLUSIVE = "inconclusive"


@dataclass
class Residual:
    max: float
    l2: float
    count: int
    tolerance: float | None = None

    @classmethod
    def of(cls, values, tolerance=None) -> "Residual":
        v = np.abs(np.asarray(values, dtype=float)).ravel()
        if v.size == 0:
            return cls(0.0, 0.0, 0, tolerance)
        return cls(float(v.max()), float(np.sqrt(np.mean(v**2))), int(v.size), tolerance)

    @property
    def ok(self) -> bool:
        return self.tolerance is None or self.max < self.tolerance or self.max == 0.0


@dataclass
class VerificationReport:
    experiment_id: str
    residuals: dict[str, Residual] = field(default_factory=dict)
    hypothesis_status: dict[str, str] = field(default_factory=dict)
    conclusion_status: str = PASS
    runtime_ms: int = 0
    anchor: str = ""
    kind: str = ""
    exploratory: bool = False
    notes: list[str] = field(default_factory=list)
    tables: dict[str, list[dict[str, Any]]] = field(default_factory=dict)

    def add(self, name: str, values, tolerance=None) -> Residual:
        r = Residual.of(values, tolerance)
        self.residuals[name] = r
        return r

    def hypothesis(self, name: str, ok: bool) -> bool:
        self.hypothesis_status[name] = PASS if ok else FAIL
        return ok

    @property
    def hypotheses_hold(self) -> bool:
        return all(s == PASS for s in self.hypothesis_status.values())

    def finalize(self, status: str | None = None) -> "VerificationReport":
        """Derive the conclusion from hypotheses and tolerances unless forced."""
        if status is not None:
            self.conclusion_status = status
        elif not self.hypotheses_hold:
            self.conclusion_status = NOT_APPLICABLE
        elif all(r.ok for r in self.residuals.values()):
            self.conclusion_status = PASS
        else:
            self.conclusion_status = FAIL
        return self

    @property
    def passed(self) -> bool:
        return self.conclusion_status == PASS

    def worst(self) -> Optional[Residual]:
        """Gated residual with the largest residual-to-tolerance ratio."""
        gated = [r for r in self.residuals.values() if r.tolerance is not None]
        if not gated:
            return None
        return max(gated, key=lambda r: r.max / r.tolerance if r.tolerance > 0 else np.inf)

    @property
    def max_residual(self) -> float:
        w = self.worst()
        return w.max if w is not None else 0.0

    @property
    def tolerance(self) -> float:
        w = self.worst()
        return w.tolerance if w is not None else 0.0

    @property
    def hypothesis_summary(self) -> str:
        if not self.hypothesis_status:
            return "none"
        return PASS if self.hypotheses_hold else FAIL

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.experiment_id,
            "kind": self.kind,
            "anchor": self.anchor,
            "exploratory": self.exploratory,
            "hypotheses": dict(self.hypothesis_status),
            "residuals": {
                k: {"max": r.max, "l2": r.l2, "count": r.count, "tolerance": r.tolerance}
                for k, r in self.residuals.items()
            },
            "status": self.conclusion_status,
            "runtime_ms": self.runtime_ms,
            "notes": list(self.notes),
            "tables": self.tables,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def summary_line(self) -> str:
        return (
            f"{self.experiment_id}: {self.conclusion_status} "
            f"(max residual {self.max_residual:.3g}, tol {self.tolerance:.3g})"
        )
