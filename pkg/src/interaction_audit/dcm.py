"""Analytics data-collection-method (DCM) signatures and their detection in bytecode."""

from __future__ import annotations

import enum
import json
import os
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .ingest import AppModel, Invoke, NewInstance, SmaliClass
from .model import InvocationSite

ENV_SIGNATURES = "INTERACTION_AUDIT_SIGNATURES"
CUSTOM_LIBRARY = "custom"
MAX_CUSTOM_ROUNDS = 3

_SIGNATURE_FIELDS = {"library", "class", "method", "descriptor"}
_LIBRARY_FIELDS = {"library", "class_prefix"}


class SignatureError(ValueError):
    pass


class SignatureKind(enum.Enum):
    DIRECT = "Direct"
    DERIVED_CUSTOM = "DerivedCustom"


@dataclass(frozen=True)
class DcmSignature:
    library: str
    class_name: str
    method_name: str
    descriptor: str
    kind: SignatureKind = SignatureKind.DIRECT

    @property
    def triple(self) -> tuple[str, str, str]:
        return (self.class_name, self.method_name, self.descriptor)


@dataclass(frozen=True)
class SignatureDb:
    signatures: dict[tuple[str, str, str], DcmSignature]
    libraries: dict[str, tuple[str, ...]]  # library -> class prefixes

    def __post_init__(self):
        for sig in self.signatures.values():
            if sig.library not in self.libraries and sig.kind is SignatureKind.DIRECT:
                raise SignatureError(f"signature for undeclared library {sig.library!r}")

    def __len__(self):
        return len(self.signatures)

    def __contains__(self, triple):
        return triple in self.signatures

    def get(self, triple) -> DcmSignature | None:
        return self.signatures.get(triple)

    def is_library_class(self, class_name: str) -> bool:
        return any(class_name.startswith(p) for ps in self.libraries.values() for p in ps)

    def with_signatures(self, extra) -> SignatureDb:
        merged = dict(self.signatures)
        libraries = dict(self.libraries)
        for sig in extra:
            merged.setdefault(sig.triple, sig)
            if sig.kind is SignatureKind.DERIVED_CUSTOM:
                libraries.setdefault(CUSTOM_LIBRARY, ())
        return SignatureDb(merged, libraries)

    def derived(self) -> list[DcmSignature]:
        return [s for s in self.signatures.values() if s.kind is SignatureKind.DERIVED_CUSTOM]


def parse_signatures(records: list[dict]) -> SignatureDb:
    signatures: dict[tuple[str, str, str], DcmSignature] = {}
    libraries: dict[str, list[str]] = {}
    for i, rec in enumerate(records):
        keys = set(rec)
        if keys == _LIBRARY_FIELDS:
            libraries.setdefault(rec["library"], []).append(rec["class_prefix"])
        elif keys == _SIGNATURE_FIELDS:
            sig = DcmSignature(rec["library"], rec["class"], rec["method"], rec["descriptor"])
            if sig.triple in signatures:
                raise SignatureError(f"record {i}: duplicate signature {sig.triple}")
            signatures[sig.triple] = sig
        else:
            unknown = keys - _SIGNATURE_FIELDS - _LIBRARY_FIELDS
            detail = f"unknown field(s) {sorted(unknown)}" if unknown else f"incomplete record {rec}"
            raise SignatureError(f"record {i}: {detail}")
    for sig in signatures.values():
        libraries.setdefault(sig.library, [])
    return SignatureDb(signatures, {k: tuple(v) for k, v in libraries.items()})


def default_signatures_path() -> Path | None:
    env = os.environ.get(ENV_SIGNATURES)
    return Path(env) if env else None


def load_signatures(path: str | Path | None = None) -> SignatureDb:
    """Load a signature DB file; defaults to $INTERACTION_AUDIT_SIGNATURES, then the bundled DB."""
    path = path or default_signatures_path()
    if path is None:
        text = resources.files("interaction_audit.data").joinpath("signatures.json").read_text()
    else:
        text = Path(path).read_text(encoding="utf-8")
    data = json.loads(text)
    if not isinstance(data, list):
        raise SignatureError("signature DB must be a JSON list of records")
    return parse_signatures(data)


@dataclass(frozen=True)
class DcmMatch:
    signature: DcmSignature
    site: InvocationSite

    @property
    def library(self) -> str:
        return self.signature.library


def match_invocation(invoke: Invoke, db: SignatureDb, site: InvocationSite | None = None):
    """Exact (class, name, descriptor) lookup; no subtype reasoning."""
    sig = db.get(invoke.signature)
    if sig is None:
        return None
    return DcmMatch(sig, site or InvocationSite("", "", -1, invoke.line))


def method_matches(cls: SmaliClass, method, db: SignatureDb) -> list[DcmMatch]:
    out = []
    for index, ins in enumerate(method.instructions):
        if isinstance(ins, Invoke):
            m = match_invocation(ins, db, InvocationSite(cls.name, method.key, index, ins.line))
            if m:
                out.append(m)
    return out


def scan_app(app: AppModel, db: SignatureDb) -> list[DcmMatch]:
    """Every DCM invocation site in the app, in (class, method, index) order."""
    matches = [m for cls, method in app.iter_methods() for m in method_matches(cls, method, db)]
    return sorted(matches, key=lambda m: m.site)


def activity_family(app: AppModel) -> set[str]:
    """Declared activity classes plus their inner classes."""
    activities = set(app.activity_descriptors)
    family = set()
    for name in app.classes:
        outer = name.split("$", 1)[0] + ";" if "$" in name else name
        if name in activities or outer in activities:
            family.add(name)
    return family


def _referenced_classes(cls: SmaliClass) -> set[str]:
    refs = set()
    for method in cls.methods:
        for ins in method.instructions:
            if isinstance(ins, Invoke):
                refs.add(ins.target_class)
            elif isinstance(ins, NewInstance):
                refs.add(ins.class_name)
    return refs


def _reaching_methods(cls: SmaliClass, db: SignatureDb) -> list:
    """Methods of ``cls`` that reach a DCM invoke, following calls within ``cls``."""
    direct = {m.key for m in cls.methods if method_matches(cls, m, db)}
    calls = {
        m.key: {
            i.method_name + i.descriptor
            for i in m.instructions
            if isinstance(i, Invoke) and i.target_class == cls.name
        }
        for m in cls.methods
    }
    reaching = set(direct)
    changed = True
    while changed:
        changed = False
        for key, callees in calls.items():
            if key not in reaching and callees & reaching:
                reaching.add(key)
                changed = True
    return [m for m in cls.methods if m.key in reaching]


def detect_custom_analytics(app: AppModel, db: SignatureDb):
    """Find app classes wrapping analytics DCMs that activities use.

    Returns ``(custom class names, augmented db)``. A class counts when one of its
    methods invokes a known DCM and an activity (or an inner class of one)
    references it. Each of its non-constructor methods that reaches a DCM within
    the class becomes a derived signature; rounds repeat so wrappers of wrappers
    are found, up to ``MAX_CUSTOM_ROUNDS``.
    """
    family = activity_family(app)
    referenced = set()
    for name in family:
        referenced |= _referenced_classes(app.classes[name])

    custom: set[str] = set()
    working = db
    for _ in range(MAX_CUSTOM_ROUNDS):
        new = []
        for name in sorted(referenced):
            cls = app.classes.get(name)
            if cls is None or name in family or db.is_library_class(name):
                continue
            for method in _reaching_methods(cls, working):
                if method.is_constructor:
                    continue
                triple = (name, method.name, method.descriptor)
                if triple not in working:
                    new.append(
                        DcmSignature(
                            CUSTOM_LIBRARY, name, method.name, method.descriptor,
                            SignatureKind.DERIVED_CUSTOM,
                        )
                    )
                custom.add(name)
        if not new:
            break
        working = working.with_signatures(new)
    return custom, working


_SUSPICIOUS_NAME = re.compile(r"log|track|event|record|send", re.IGNORECASE)


def suspicious_invocations(app: AppModel, db: SignatureDb) -> list[InvocationSite]:
    """Unmatched calls into analytics-library classes whose method name looks like logging.

    Exact matching misses renamed or newer SDK methods; these sites are reported so a
    reviewer can extend the signature DB.
    """
    sites = []
    for cls, method in app.iter_methods():
        for index, ins in enumerate(method.instructions):
            if (
                isinstance(ins, Invoke)
                and ins.signature not in db
                and db.is_library_class(ins.target_class)
                and _SUSPICIOUS_NAME.search(ins.method_name)
            ):
                sites.append(InvocationSite(cls.name, method.key, index, ins.line))
    return sorted(sites)
