"""Shared vocabulary and data model for claims, evidence and fact-check results."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, TypeVar


class InteractionDataType(enum.Enum):
    """The six kinds of user interaction data, in canonical order."""

    PRESENTATION = "Presentation"
    BINARY = "Binary"
    CATEGORICAL = "Categorical"
    USER_INPUT = "UserInput"
    GESTURE = "Gesture"
    COMPOSITE_GESTURE = "CompositeGesture"

    @property
    def label(self) -> str:
        return TYPE_LABELS[self]


class CollectionTechnique(enum.Enum):
    """How interaction data is collected, in canonical order."""

    FREQUENCY = "Frequency"
    DURATION = "Duration"
    MOTION_DETAILS = "MotionDetails"

    @property
    def label(self) -> str:
        return TECHNIQUE_LABELS[self]


TYPE_LABELS = {
    InteractionDataType.PRESENTATION: "app presentation",
    InteractionDataType.BINARY: "binary",
    InteractionDataType.CATEGORICAL: "categorical",
    InteractionDataType.USER_INPUT: "user input",
    InteractionDataType.GESTURE: "gesture",
    InteractionDataType.COMPOSITE_GESTURE: "composite gesture",
}

TECHNIQUE_LABELS = {
    CollectionTechnique.FREQUENCY: "frequency",
    CollectionTechnique.DURATION: "duration",
    CollectionTechnique.MOTION_DETAILS: "motion details",
}

_RANK = {m: i for i, m in enumerate(InteractionDataType)}
_RANK.update({m: i for i, m in enumerate(CollectionTechnique)})

E = TypeVar("E", InteractionDataType, CollectionTechnique)


def canonical_order(items: Iterable[E]) -> list[E]:
    """Return ``items`` deduplicated and sorted in declaration order."""
    return sorted(set(items), key=_RANK.__getitem__)


def parse_type(value: str) -> InteractionDataType:
    return InteractionDataType(value)


def parse_technique(value: str) -> CollectionTechnique:
    return CollectionTechnique(value)


@dataclass(frozen=True)
class SupportSentence:
    text: str
    start: int
    end: int
    keywords: tuple[str, ...] = ()
    types: frozenset[InteractionDataType] = frozenset()
    techniques: frozenset[CollectionTechnique] = frozenset()

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "span": [self.start, self.end],
            "keywords": list(self.keywords),
            "types": [t.value for t in canonical_order(self.types)],
            "techniques": [t.value for t in canonical_order(self.techniques)],
        }

    @classmethod
    def from_dict(cls, data: dict) -> SupportSentence:
        start, end = data["span"]
        return cls(
            text=data["text"],
            start=start,
            end=end,
            keywords=tuple(data.get("keywords", ())),
            types=frozenset(parse_type(t) for t in data.get("types", ())),
            techniques=frozenset(parse_technique(t) for t in data.get("techniques", ())),
        )


@dataclass(frozen=True)
class CollectionClaim:
    """What a privacy policy says is collected, with the sentences backing it."""

    app_id: str
    source: str
    claimed_types: frozenset[InteractionDataType] = frozenset()
    claimed_techniques: frozenset[CollectionTechnique] = frozenset()
    support: tuple[SupportSentence, ...] = ()

    def to_dict(self) -> dict:
        return {
            "app_id": self.app_id,
            "source": self.source,
            "claimed_types": [t.value for t in canonical_order(self.claimed_types)],
            "claimed_techniques": [t.value for t in canonical_order(self.claimed_techniques)],
            "support": [s.to_dict() for s in self.support],
        }

    @classmethod
    def from_dict(cls, data: dict) -> CollectionClaim:
        return cls(
            app_id=data["app_id"],
            source=data["source"],
            claimed_types=frozenset(parse_type(t) for t in data["claimed_types"]),
            claimed_techniques=frozenset(parse_technique(t) for t in data["claimed_techniques"]),
            support=tuple(SupportSentence.from_dict(s) for s in data.get("support", ())),
        )


@dataclass(frozen=True, order=True)
class InvocationSite:
    """Location of an invoke instruction: class, method (name + descriptor), index."""

    class_name: str
    method: str
    index: int
    line: int = 0

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.class_name, self.method, self.index)

    def to_dict(self) -> dict:
        return {
            "class": self.class_name,
            "method": self.method,
            "index": self.index,
            "line": self.line,
        }

    @classmethod
    def from_dict(cls, data: dict) -> InvocationSite:
        return cls(data["class"], data["method"], data["index"], data.get("line", 0))


@dataclass(frozen=True)
class WidgetRef:
    layout_file: str | None
    id_name: str | None
    element_name: str

    def to_dict(self) -> dict:
        return {
            "layout_file": self.layout_file,
            "id_name": self.id_name,
            "element_name": self.element_name,
        }

    @classmethod
    def from_dict(cls, data: dict) -> WidgetRef:
        return cls(data["layout_file"], data["id_name"], data["element_name"])


@dataclass(frozen=True)
class EvidenceRecord:
    """One DCM invocation reached from a UI callback, tied to the widget it serves."""

    widget: WidgetRef
    data_type: InteractionDataType
    techniques: frozenset[CollectionTechnique]
    invocation: InvocationSite
    library: str
    callback: str
    listener_class: str

    def __post_init__(self):
        if not self.techniques:
            raise ValueError("evidence record needs at least one technique")

    def sort_key(self) -> tuple:
        return (
            self.invocation.class_name,
            self.invocation.method,
            self.invocation.index,
            self.listener_class,
            self.callback,
            self.widget.id_name or "",
        )

    def to_dict(self) -> dict:
        return {
            "widget": self.widget.to_dict(),
            "data_type": self.data_type.value,
            "techniques": [t.value for t in canonical_order(self.techniques)],
            "invocation": self.invocation.to_dict(),
            "library": self.library,
            "callback": self.callback,
            "listener_class": self.listener_class,
        }

    @classmethod
    def from_dict(cls, data: dict) -> EvidenceRecord:
        return cls(
            widget=WidgetRef.from_dict(data["widget"]),
            data_type=parse_type(data["data_type"]),
            techniques=frozenset(parse_technique(t) for t in data["techniques"]),
            invocation=InvocationSite.from_dict(data["invocation"]),
            library=data["library"],
            callback=data["callback"],
            listener_class=data["listener_class"],
        )


@dataclass(frozen=True)
class CollectionEvidence:
    app_id: str
    records: tuple[EvidenceRecord, ...] = ()

    @property
    def evidenced_types(self) -> frozenset[InteractionDataType]:
        return frozenset(r.data_type for r in self.records)

    @property
    def evidenced_techniques(self) -> frozenset[CollectionTechnique]:
        return frozenset(t for r in self.records for t in r.techniques)

    def to_dict(self) -> dict:
        return {
            "app_id": self.app_id,
            "record_count": len(self.records),
            "evidenced_types": [t.value for t in canonical_order(self.evidenced_types)],
            "evidenced_techniques": [
                t.value for t in canonical_order(self.evidenced_techniques)
            ],
            "records": [r.to_dict() for r in self.records],
        }

    @classmethod
    def from_dict(cls, data: dict) -> CollectionEvidence:
        evidence = cls(
            app_id=data["app_id"],
            records=tuple(EvidenceRecord.from_dict(r) for r in data["records"]),
        )
        declared = {parse_type(t) for t in data.get("evidenced_types", ())}
        if "evidenced_types" in data and declared != evidence.evidenced_types:
            raise ValueError("evidenced_types does not match the records")
        return evidence


@dataclass(frozen=True)
class FactCheckResult:
    app_id: str
    claimed_types: frozenset[InteractionDataType]
    evidenced_types: frozenset[InteractionDataType]
    claimed_techniques: frozenset[CollectionTechnique]
    evidenced_techniques: frozenset[CollectionTechnique]
    checked_claim_text: str
    missing_types: frozenset[InteractionDataType] = field(init=False)
    missing_techniques: frozenset[CollectionTechnique] = field(init=False)
    overclaimed_types: frozenset[InteractionDataType] = field(init=False)
    overclaimed_techniques: frozenset[CollectionTechnique] = field(init=False)

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "missing_types", self.evidenced_types - self.claimed_types)
        set_(self, "missing_techniques", self.evidenced_techniques - self.claimed_techniques)
        set_(self, "overclaimed_types", self.claimed_types - self.evidenced_types)
        set_(
            self,
            "overclaimed_techniques",
            self.claimed_techniques - self.evidenced_techniques,
        )

    @property
    def has_findings(self) -> bool:
        return bool(self.missing_types or self.missing_techniques)

    def to_dict(self) -> dict:
        def names(items):
            return [i.value for i in canonical_order(items)]

        return {
            "app_id": self.app_id,
            "claimed_types": names(self.claimed_types),
            "evidenced_types": names(self.evidenced_types),
            "claimed_techniques": names(self.claimed_techniques),
            "evidenced_techniques": names(self.evidenced_techniques),
            "missing_types": names(self.missing_types),
            "missing_techniques": names(self.missing_techniques),
            "overclaimed_types": names(self.overclaimed_types),
            "overclaimed_techniques": names(self.overclaimed_techniques),
            "checked_claim_text": self.checked_claim_text,
        }

    @classmethod
    def from_dict(cls, data: dict) -> FactCheckResult:
        return cls(
            app_id=data["app_id"],
            claimed_types=frozenset(map(parse_type, data["claimed_types"])),
            evidenced_types=frozenset(map(parse_type, data["evidenced_types"])),
            claimed_techniques=frozenset(map(parse_technique, data["claimed_techniques"])),
            evidenced_techniques=frozenset(map(parse_technique, data["evidenced_techniques"])),
            checked_claim_text=data["checked_claim_text"],
        )
