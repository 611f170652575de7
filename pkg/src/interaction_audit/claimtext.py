"""Standardized collection-claim sentences: rendering and parsing.

Type labels are grouped into four phrases::

    app presentation
    binary [and categorical] interactions
    user input interactions
    gesture [and composite gesture] interactions

Groups are joined as an English list with a serial comma; techniques are
joined without one ("frequency, duration and motion details").
"""

from __future__ import annotations

import re
from typing import Iterable

from .model import (
    TECHNIQUE_LABELS,
    TYPE_LABELS,
    CollectionTechnique,
    InteractionDataType as T,
    canonical_order,
)

PREFIX = "We collect the following types of user interaction data: "
MIDDLE = ", along with their "
SUFFIX = "."
NONE = "none"

# (members, trailing noun)
TYPE_GROUPS = (
    ((T.PRESENTATION,), ""),
    ((T.BINARY, T.CATEGORICAL), " interactions"),
    ((T.USER_INPUT,), " interactions"),
    ((T.GESTURE, T.COMPOSITE_GESTURE), " interactions"),
)


class ClaimParseError(ValueError):
    pass


def _mark(label: str, missing: bool) -> str:
    return f"[missing: {label}]" if missing else label


def _and_join(parts: list[str], serial_comma: bool) -> str:
    if not parts:
        return NONE
    if len(parts) == 1:
        return parts[0]
    if len(parts) == 2:
        return f"{parts[0]} and {parts[1]}"
    last = ", and " if serial_comma else " and "
    return ", ".join(parts[:-1]) + last + parts[-1]


def render_types(types: Iterable[T], missing: Iterable[T] = ()) -> str:
    present = set(types)
    missing = set(missing)
    phrases = []
    for members, noun in TYPE_GROUPS:
        chosen = [m for m in members if m in present]
        if chosen:
            labels = [_mark(TYPE_LABELS[m], m in missing) for m in chosen]
            phrases.append(" and ".join(labels) + noun)
    return _and_join(phrases, serial_comma=True)


def render_techniques(
    techniques: Iterable[CollectionTechnique], missing: Iterable[CollectionTechnique] = ()
) -> str:
    missing = set(missing)
    labels = [_mark(TECHNIQUE_LABELS[t], t in missing) for t in canonical_order(techniques)]
    return _and_join(labels, serial_comma=False)


def render_claim(types: Iterable[T], techniques: Iterable[CollectionTechnique]) -> str:
    """Render the one-sentence standardized claim for the given sets."""
    return PREFIX + render_types(types) + MIDDLE + render_techniques(techniques) + SUFFIX


def render_checked_claim(
    types: Iterable[T],
    techniques: Iterable[CollectionTechnique],
    missing_types: Iterable[T] = (),
    missing_techniques: Iterable[CollectionTechnique] = (),
) -> str:
    """Like :func:`render_claim`, wrapping undisclosed items as ``[missing: label]``."""
    return (
        PREFIX
        + render_types(types, missing_types)
        + MIDDLE
        + render_techniques(techniques, missing_techniques)
        + SUFFIX
    )


def _label_alt(label: str) -> str:
    return rf"(?:\[missing: {re.escape(label)}\]|{re.escape(label)})"


_TYPE_TOKEN = re.compile(
    "|".join(
        sorted((_label_alt(lbl) for lbl in TYPE_LABELS.values()), key=len, reverse=True)
    )
)
_TECH_TOKEN = re.compile("|".join(_label_alt(lbl) for lbl in TECHNIQUE_LABELS.values()))
_MISSING = re.compile(r"\[missing: (.+)\]")
_SEPARATOR = re.compile(r", and |, | and | interactions(?=, |$| and )")

_TYPE_BY_LABEL = {v: k for k, v in TYPE_LABELS.items()}
_TECH_BY_LABEL = {v: k for k, v in TECHNIQUE_LABELS.items()}


def _scan(text: str, token: re.Pattern, lookup: dict):
    """Collect labelled items in order, tolerating any list punctuation."""
    if text == NONE:
        return set(), set()
    found, missing = set(), set()
    pos = 0
    while pos < len(text):
        sep = _SEPARATOR.match(text, pos)
        if sep and sep.end() > pos:
            pos = sep.end()
            continue
        tok = token.match(text, pos)
        if not tok:
            raise ClaimParseError(f"unexpected text at {pos}: {text[pos:pos + 30]!r}")
        raw = tok.group(0)
        m = _MISSING.fullmatch(raw)
        item = lookup[m.group(1) if m else raw]
        if item in found:
            raise ClaimParseError(f"duplicate item {raw!r}")
        found.add(item)
        if m:
            missing.add(item)
        pos = tok.end()
    return found, missing


def parse_checked_claim(text: str):
    """Parse a (possibly annotated) claim into ``(types, techniques, missing_types, missing_techniques)``.

    The parse is only accepted when re-rendering reproduces ``text`` exactly.
    """
    if not text.startswith(PREFIX) or not text.endswith(SUFFIX):
        raise ClaimParseError("text does not follow the claim template")
    body = text[len(PREFIX) : -len(SUFFIX)]
    if body.count(MIDDLE) != 1:
        raise ClaimParseError("text does not follow the claim template")
    type_part, tech_part = body.split(MIDDLE)
    types, missing_types = _scan(type_part, _TYPE_TOKEN, _TYPE_BY_LABEL)
    techniques, missing_techniques = _scan(tech_part, _TECH_TOKEN, _TECH_BY_LABEL)
    if render_checked_claim(types, techniques, missing_types, missing_techniques) != text:
        raise ClaimParseError("claim punctuation does not match the canonical rendering")
    return (
        frozenset(types),
        frozenset(techniques),
        frozenset(missing_types),
        frozenset(missing_techniques),
    )


def parse_claim_text(text: str):
    """Inverse of :func:`render_claim`; annotations, if any, are accepted and dropped."""
    types, techniques, _, _ = parse_checked_claim(text)
    return types, techniques
