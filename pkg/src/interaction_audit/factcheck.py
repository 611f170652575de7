"""Compare claims against evidence, and aggregate evidence over an app corpus."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .claimtext import render_checked_claim
from .model import (
    TECHNIQUE_LABELS,
    TYPE_LABELS,
    CollectionClaim,
    CollectionEvidence,
    CollectionTechnique,
    FactCheckResult,
    InteractionDataType,
)


class FactCheckError(ValueError):
    pass


def fact_check(claim: CollectionClaim, evidence: CollectionEvidence) -> FactCheckResult:
    if claim.app_id != evidence.app_id:
        raise FactCheckError(f"claim is for {claim.app_id!r} but evidence is for {evidence.app_id!r}")
    return check_sets(
        claim.app_id,
        claim.claimed_types,
        claim.claimed_techniques,
        evidence.evidenced_types,
        evidence.evidenced_techniques,
    )


def check_sets(
    app_id: str,
    claimed_types: Iterable[InteractionDataType],
    claimed_techniques: Iterable[CollectionTechnique],
    evidenced_types: Iterable[InteractionDataType],
    evidenced_techniques: Iterable[CollectionTechnique],
) -> FactCheckResult:
    """Set-level fact check; the checked claim covers claimed ∪ evidenced items."""
    ct, cq = frozenset(claimed_types), frozenset(claimed_techniques)
    et, eq = frozenset(evidenced_types), frozenset(evidenced_techniques)
    text = render_checked_claim(ct | et, cq | eq, et - ct, eq - cq)
    return FactCheckResult(app_id, ct, et, cq, eq, text)


# ------------------------------------------------------------------ corpus stats


@dataclass(frozen=True)
class TypeStats:
    percent_collected: float
    avg_distinct_dcms: float
    technique_shares: dict[CollectionTechnique, float]

    def to_dict(self) -> dict:
        return {
            "percent_collected": self.percent_collected,
            "avg_distinct_dcms": self.avg_distinct_dcms,
            "technique_shares": {t.value: s for t, s in self.technique_shares.items()},
        }


@dataclass(frozen=True)
class CorpusStats:
    app_count: int
    by_type: dict[InteractionDataType, TypeStats]

    def __getitem__(self, data_type: InteractionDataType) -> TypeStats:
        return self.by_type[data_type]

    def to_dict(self) -> dict:
        return {
            "app_count": self.app_count,
            "types": {t.value: s.to_dict() for t, s in self.by_type.items()},
        }


def corpus_stats(evidences: Sequence[CollectionEvidence]) -> CorpusStats:
    """Per-type share of apps collecting it, mean distinct DCM sites, technique shares."""
    if not evidences:
        raise FactCheckError("corpus statistics need at least one app")
    n = len(evidences)
    by_type = {}
    for data_type in InteractionDataType:
        site_counts = []
        technique_apps = {t: 0 for t in CollectionTechnique}
        for ev in evidences:
            records = [r for r in ev.records if r.data_type is data_type]
            if not records:
                continue
            site_counts.append(len({r.invocation.key for r in records}))
            used = set().union(*(r.techniques for r in records))
            for t in used:
                technique_apps[t] += 1
        collecting = len(site_counts)
        by_type[data_type] = TypeStats(
            percent_collected=collecting / n,
            avg_distinct_dcms=sum(site_counts) / collecting if collecting else 0.0,
            technique_shares={
                t: (c / collecting if collecting else 0.0) for t, c in technique_apps.items()
            },
        )
    return CorpusStats(n, by_type)


def render_stats_table(stats: CorpusStats) -> str:
    """Markdown table: UI type, techniques with shares, percent collected, avg # collected."""
    lines = [
        "| UI type | Techniques | Percent collected | Avg # collected |",
        "|---|---|---|---|",
    ]
    for data_type, s in stats.by_type.items():
        ranked = sorted(
            ((t, share) for t, share in s.technique_shares.items() if share > 0),
            key=lambda item: (-item[1], list(CollectionTechnique).index(item[0])),
        )
        techniques = ", ".join(f"{TECHNIQUE_LABELS[t].capitalize()} ({share:.0%})" for t, share in ranked)
        lines.append(
            f"| {TYPE_LABELS[data_type].capitalize()} | {techniques or '-'} "
            f"| {s.percent_collected:.0%} | {s.avg_distinct_dcms:.2f} |"
        )
    return "\n".join(lines) + "\n"
