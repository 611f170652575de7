"""Versioned audit report: one in-memory object behind both text and JSON output."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .claimtext import render_claim
from .model import (
    TECHNIQUE_LABELS,
    TYPE_LABELS,
    CollectionClaim,
    CollectionEvidence,
    FactCheckResult,
    canonical_order,
)

REPORT_VERSION = "1.0"


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def tree_digest(root: str | Path) -> str:
    """Digest over relative paths and contents of every file under ``root``."""
    root = Path(root)
    h = hashlib.sha256()
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        h.update(str(path.relative_to(root)).encode() + b"\0")
        h.update(path.read_bytes())
        h.update(b"\0")
    return h.hexdigest()


def report_schema() -> dict:
    text = resources.files("interaction_audit.data").joinpath("report.schema.json").read_text()
    return json.loads(text)


@dataclass(frozen=True)
class AuditReport:
    app_id: str
    claim: CollectionClaim | None = None
    evidence: CollectionEvidence | None = None
    fact_check: FactCheckResult | None = None
    diagnostics: tuple[str, ...] = ()
    inputs: dict[str, str] = field(default_factory=dict)
    timing: dict[str, float] = field(default_factory=dict)
    version: str = REPORT_VERSION

    @property
    def has_findings(self) -> bool:
        return self.fact_check is not None and self.fact_check.has_findings

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "app_id": self.app_id,
            "claim": self.claim.to_dict() if self.claim else None,
            "evidence": self.evidence.to_dict() if self.evidence else None,
            "fact_check": self.fact_check.to_dict() if self.fact_check else None,
            "diagnostics": list(self.diagnostics),
            "inputs": dict(self.inputs),
            "timing": dict(self.timing),
        }

    @classmethod
    def from_dict(cls, data: dict) -> AuditReport:
        return cls(
            app_id=data["app_id"],
            claim=CollectionClaim.from_dict(data["claim"]) if data.get("claim") else None,
            evidence=CollectionEvidence.from_dict(data["evidence"]) if data.get("evidence") else None,
            fact_check=FactCheckResult.from_dict(data["fact_check"]) if data.get("fact_check") else None,
            diagnostics=tuple(data.get("diagnostics", ())),
            inputs=dict(data.get("inputs", {})),
            timing=dict(data.get("timing", {})),
            version=data["version"],
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def _labels(items, labels) -> str:
    return ", ".join(labels[i] for i in canonical_order(items)) or "none"


def render_claim_text(claim: CollectionClaim) -> str:
    return render_claim(claim.claimed_types, claim.claimed_techniques) + "\n"


def render_evidence_text(evidence: CollectionEvidence) -> str:
    header = ("widget", "type", "techniques", "callback", "library", "site")
    rows = [
        (
            f"{r.widget.element_name}#{r.widget.id_name}" if r.widget.id_name else r.widget.element_name,
            TYPE_LABELS[r.data_type],
            _labels(r.techniques, TECHNIQUE_LABELS),
            r.callback,
            r.library,
            f"{r.invocation.class_name}->{r.invocation.method}@{r.invocation.index}",
        )
        for r in evidence.records
    ]
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    lines = [
        f"app: {evidence.app_id}",
        f"records: {len(evidence.records)}",
        f"types: {_labels(evidence.evidenced_types, TYPE_LABELS)}",
        f"techniques: {_labels(evidence.evidenced_techniques, TECHNIQUE_LABELS)}",
        "",
    ]
    for row in (header, *rows):
        lines.append("  ".join(str(x).ljust(w) for x, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"


def render_report_text(report: AuditReport, diagnostics: bool = True) -> str:
    fc = report.fact_check
    lines = [f"app: {report.app_id}"]
    if report.claim is not None:
        lines.append("claimed: " + render_claim(report.claim.claimed_types, report.claim.claimed_techniques))
    if fc is not None:
        lines += [
            "checked: " + fc.checked_claim_text,
            f"missing types: {_labels(fc.missing_types, TYPE_LABELS)}",
            f"missing techniques: {_labels(fc.missing_techniques, TECHNIQUE_LABELS)}",
            f"overclaimed types (advisory): {_labels(fc.overclaimed_types, TYPE_LABELS)}",
            f"overclaimed techniques (advisory): {_labels(fc.overclaimed_techniques, TECHNIQUE_LABELS)}",
        ]
    if report.evidence is not None:
        lines.append(f"evidence records: {len(report.evidence.records)}")
    if diagnostics and report.diagnostics:
        lines.append("diagnostics:")
        lines += [f"  {d}" for d in report.diagnostics]
    return "\n".join(lines) + "\n"
