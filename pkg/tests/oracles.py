"""Brute-force reference implementations used to cross-check the pipeline."""

import re
from pathlib import Path

from interaction_audit.claimtext import PREFIX


def smali_files(app_dir: Path):
    """Smali files in merge order: smali, smali_classes2, smali_classes3, ..."""
    roots = [p for p in app_dir.iterdir() if p.is_dir() and p.name.startswith("smali")]
    roots.sort(key=lambda p: int(p.name[len("smali_classes"):] or 1) if p.name != "smali" else 1)
    for root in roots:
        yield from sorted(root.rglob("*.smali"))


def scan_signature_sites(app_dir: Path, triples) -> list[tuple[str, int]]:
    """(class, line) of every invoke line ending in one of the full signatures.

    Pure text: no instruction parsing. A class seen earlier in merge order shadows
    later copies.
    """
    wanted = [f"{c}->{m}{d}" for c, m, d in triples]
    seen_classes, sites = set(), []
    for path in smali_files(app_dir):
        lines = path.read_text(encoding="utf-8").splitlines()
        header = next((l for l in lines if l.startswith(".class")), None)
        if header is None:
            continue
        cls = header.split()[-1]
        if cls in seen_classes:
            continue
        seen_classes.add(cls)
        for no, line in enumerate(lines, 1):
            text = line.split("#", 1)[0].strip()
            if text.startswith("invoke-") and any(text.endswith(", " + w) or text.endswith("," + w) for w in wanted):
                sites.append((cls, no))
    return sorted(sites)


def count_invoke_lines(text: str) -> int:
    return sum(
        1
        for line in text.splitlines()
        if line.strip().startswith("invoke-")
        and not line.strip().startswith(("invoke-polymorphic", "invoke-custom"))
    )


TYPE_WORDS = {
    "Presentation": "app presentation",
    "Binary": "binary",
    "Categorical": "categorical",
    "UserInput": "user input",
    "Gesture": "gesture",
    "CompositeGesture": "composite gesture",
}


def labels_in_claim(text: str) -> list[str]:
    """Type names mentioned in a claim, by substring search (no grammar)."""
    body = text[len(PREFIX):].split(", along with")[0]
    body = body.replace("composite gesture", "COMPOSITE")
    found = [name for name, word in TYPE_WORDS.items() if name != "CompositeGesture" and word in body]
    if "COMPOSITE" in body:
        found.append("CompositeGesture")
    return found


def union_by_hand(sentences, match):
    """Claimed sets as the union of per-sentence matches."""
    types, techniques = set(), set()
    for s in sentences:
        e = match(s)
        if e is not None:
            types |= e.inferred_types
            techniques |= e.inferred_techniques
    return types, techniques
