"""Privacy-policy text mining: HTML stripping, sentence splitting, lexicon matching."""

from __future__ import annotations

import dataclasses
import enum
import json
import re
from dataclasses import dataclass
from html.parser import HTMLParser
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .model import (
    CollectionClaim,
    CollectionTechnique,
    InteractionDataType,
    SupportSentence,
)

BLOCK_TAGS = frozenset(
    "address article aside blockquote br dd div dl dt fieldset figcaption figure footer "
    "form h1 h2 h3 h4 h5 h6 header hr li main nav ol p pre section table td th tr ul".split()
)
SKIP_TAGS = frozenset({"script", "style", "noscript", "template", "head"})

ABBREVIATIONS = frozenset({"e.g", "i.e", "no", "mr", "mrs", "ms", "dr", "vs", "approx", "incl"})
# These also end sentences; they only suppress a split before a lowercase word.
TRAILING_ABBREVIATIONS = frozenset({"etc", "inc", "ltd", "co", "corp", "u.s"})
MIN_SENTENCE_CHARS = 3

# Irregular forms the suffix stripper would mangle.
NORMALIZE_EXCEPTIONS = {
    "used": "use",
    "uses": "use",
    "using": "use",
    "during": "during",
    "setting": "setting",
    "settings": "setting",
    "speed": "speed",
    "this": "this",
    "news": "news",
}

# A verb right after one of these has the user as its subject ("how you use the app")
# and does not describe collection by the operator.
USER_SUBJECTS = frozenset({"you", "user", "they", "i"})
# After a determiner a verb form is a noun ("your use of", "an electronic record").
DETERMINERS = frozenset(
    {"the", "a", "an", "your", "their", "our", "its", "his", "her", "my", "this", "that", "any"}
)
# Normalized compounds where the verb form is a noun modifier.
NOUN_COMPOUNDS = frozenset(
    {("log", "data"), ("log", "file"), ("log", "entry"), ("track", "technology"), ("track", "tool")}
)

_TOKEN = re.compile(r"[a-z0-9]+")


class PolicyError(ValueError):
    pass


def normalize_word(word: str) -> str:
    """Cheap suffix normalization: plural ``-s``/``-ies``, then ``-ing`` or ``-ed``."""
    w = word.lower()
    if w in NORMALIZE_EXCEPTIONS:
        return NORMALIZE_EXCEPTIONS[w]
    if w.endswith("ies") and len(w) > 4:
        return w[:-3] + "y"
    if w.endswith("s") and len(w) > 3 and not w.endswith(("ss", "us", "is")):
        w = w[:-1]
        if w in NORMALIZE_EXCEPTIONS:
            return NORMALIZE_EXCEPTIONS[w]
    for suffix in ("ing", "ed"):
        if w.endswith(suffix) and len(w) - len(suffix) >= 3:
            w = w[: -len(suffix)]
            if len(w) > 3 and w[-1] == w[-2] and w[-1] not in "lsz":
                w = w[:-1]
            break
    return w


def tokenize(text: str) -> list[str]:
    return [normalize_word(t) for t in _TOKEN.findall(text.lower())]


# --------------------------------------------------------------------------- HTML


class _TextExtractor(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.out: list[str] = []
        self._skip = 0

    def _newline(self):
        if self.out:
            self.out[-1] = self.out[-1].rstrip(" ")
            if self.out[-1] and not self.out[-1].endswith("\n"):
                self.out.append("\n")

    def handle_starttag(self, tag, attrs):
        if tag in SKIP_TAGS:
            self._skip += 1
        elif tag in BLOCK_TAGS:
            self._newline()

    def handle_startendtag(self, tag, attrs):
        if tag in BLOCK_TAGS:
            self._newline()

    def handle_endtag(self, tag):
        if tag in SKIP_TAGS:
            self._skip = max(0, self._skip - 1)
        elif tag in BLOCK_TAGS:
            self._newline()

    def handle_data(self, data):
        if self._skip:
            return
        text = re.sub(r"\s+", " ", data)
        if not self.out or self.out[-1].endswith("\n"):
            text = text.lstrip(" ")
        if text:
            self.out.append(text)


_LOOKS_LIKE_HTML = re.compile(r"<\s*(?:[a-zA-Z][\w:-]*|/[a-zA-Z]|!)")


def strip_html(raw: bytes | str) -> str:
    """Remove markup, turning block-level elements into line breaks.

    Input without any tags is returned unchanged.
    """
    text = raw.decode("utf-8", errors="replace") if isinstance(raw, bytes) else raw
    if not _LOOKS_LIKE_HTML.search(text):
        return text
    parser = _TextExtractor()
    parser.feed(text)
    parser.close()
    return "".join(parser.out).rstrip(" ")


# ---------------------------------------------------------------------- sentences


@dataclass(frozen=True)
class Span:
    text: str
    start: int
    end: int


@dataclass(frozen=True)
class PolicyDocument:
    source: str
    raw_text: str
    sentences: tuple[Span, ...]

    @classmethod
    def from_text(cls, text: str, source: str = "<text>") -> PolicyDocument:
        return cls(source, text, tuple(segment_sentences(text)))


_BOUNDARY = re.compile(r"[.?!]+(?=\s|$)|\n")


def _is_abbreviation(text: str, dot: int) -> bool:
    if text[dot] != ".":
        return False
    m = re.search(r"([A-Za-z.]+)$", text[:dot])
    if not m:
        return False
    word = m.group(1).lower().strip(".")
    if word in ABBREVIATIONS:
        return True
    if word in TRAILING_ABBREVIATIONS:
        following = re.match(r"\s*(\S)", text[dot + 1 :])
        return bool(following) and not following.group(1).isupper()
    return False


def segment_sentences(text: str) -> list[Span]:
    spans: list[Span] = []
    start = 0

    def emit(end: int):
        chunk = text[start:end]
        lead = len(chunk) - len(chunk.lstrip())
        body = chunk.strip()
        if sum(not c.isspace() for c in body) >= MIN_SENTENCE_CHARS:
            s = start + lead
            spans.append(Span(body, s, s + len(body)))

    for m in _BOUNDARY.finditer(text):
        if m.group(0) != "\n" and _is_abbreviation(text, m.start()) and m.end() - m.start() == 1:
            continue
        end = m.end() if m.group(0) != "\n" else m.start()
        emit(end)
        start = m.end()
    emit(len(text))
    return spans


# ------------------------------------------------------------------------ lexicon


def _phrase(pattern: str) -> tuple[str, ...]:
    return tuple(tokenize(pattern))


@dataclass(frozen=True)
class Lexicon:
    nouns: dict[str, tuple[str, ...]]
    verbs: dict[str, tuple[str, ...]]
    type_rules: dict[str, InteractionDataType]
    technique_rules: dict[str, CollectionTechnique]

    def __post_init__(self):
        # keyword/pattern tables keyed by normalized token tuples
        object.__setattr__(self, "_nouns", self._forms(self.nouns))
        object.__setattr__(self, "_verbs", self._forms(self.verbs))
        object.__setattr__(self, "_types", self._rules(self.type_rules))
        object.__setattr__(self, "_techniques", self._rules(self.technique_rules))
        names: dict[tuple[str, ...], str] = {}
        for pattern in (*self.type_rules, *self.technique_rules):
            names.setdefault(_phrase(pattern), pattern)
        object.__setattr__(self, "_pattern_names", names)

    @staticmethod
    def _forms(table: dict[str, Sequence[str]]) -> dict[tuple[str, ...], str]:
        forms = {}
        for keyword, synonyms in table.items():
            for word in (keyword, *synonyms):
                if word != word.lower():
                    raise PolicyError(f"lexicon entries must be lowercase: {word!r}")
                forms.setdefault(_phrase(word), keyword)
        return forms

    @staticmethod
    def _rules(table: dict) -> dict[tuple[str, ...], object]:
        rules: dict[tuple[str, ...], object] = {}
        for pattern, target in table.items():
            if pattern != pattern.lower():
                raise PolicyError(f"lexicon patterns must be lowercase: {pattern!r}")
            key = _phrase(pattern)
            if rules.get(key, target) != target:
                raise PolicyError(f"pattern {pattern!r} maps to two different targets")
            rules[key] = target
        return rules

    @classmethod
    def from_dict(cls, data: dict) -> Lexicon:
        unknown = set(data) - {"nouns", "verbs", "type_rules", "technique_rules"}
        if unknown:
            raise PolicyError(f"unknown lexicon sections: {sorted(unknown)}")
        try:
            return cls(
                nouns={k: tuple(v) for k, v in data.get("nouns", {}).items()},
                verbs={k: tuple(v) for k, v in data.get("verbs", {}).items()},
                type_rules={
                    k: InteractionDataType(v) for k, v in data.get("type_rules", {}).items()
                },
                technique_rules={
                    k: CollectionTechnique(v)
                    for k, v in data.get("technique_rules", {}).items()
                },
            )
        except ValueError as exc:
            raise PolicyError(str(exc)) from exc

    def with_synonym(self, section: str, keyword: str, synonym: str) -> Lexicon:
        """Copy of this lexicon with ``synonym`` added under ``nouns`` or ``verbs``."""
        table = dict(getattr(self, section))
        table[keyword] = tuple(table.get(keyword, ())) + (synonym,)
        return dataclasses.replace(self, **{section: table})


def _reject_duplicate_keys(pairs):
    out = {}
    for key, value in pairs:
        if key in out:
            raise PolicyError(f"duplicate lexicon key {key!r}")
        out[key] = value
    return out


def load_lexicon(path: str | Path | None = None) -> Lexicon:
    """Load a lexicon JSON file, or the bundled default when ``path`` is None."""
    if path is None:
        text = resources.files("interaction_audit.data").joinpath("lexicon.json").read_text()
    else:
        text = Path(path).read_text(encoding="utf-8")
    return Lexicon.from_dict(json.loads(text, object_pairs_hook=_reject_duplicate_keys))


# ----------------------------------------------------------------------- matching


class Classification(enum.Enum):
    BOTH = "Both"
    TECHNIQUES_ONLY = "TechniquesOnly"
    TYPES_ONLY = "TypesOnly"
    NEITHER = "Neither"


@dataclass(frozen=True)
class ExtractedSentence:
    sentence: Span
    matched_verbs: tuple[str, ...]
    matched_nouns: tuple[str, ...]
    inferred_types: frozenset[InteractionDataType]
    inferred_techniques: frozenset[CollectionTechnique]
    matched_patterns: tuple[str, ...] = ()

    @property
    def classification(self) -> Classification:
        if self.inferred_types and self.inferred_techniques:
            return Classification.BOTH
        if self.inferred_techniques:
            return Classification.TECHNIQUES_ONLY
        if self.inferred_types:
            return Classification.TYPES_ONLY
        return Classification.NEITHER


def _find(tokens: list[str], table: dict, consume: bool = False):
    """Yield (start, key, value) for phrase hits; longest phrases first when consuming."""
    taken = [False] * len(tokens)
    hits = []
    for key in sorted(table, key=len, reverse=True):
        n = len(key)
        if not n:
            continue
        for i in range(len(tokens) - n + 1):
            if tuple(tokens[i : i + n]) == key and not (consume and any(taken[i : i + n])):
                hits.append((i, key, table[key]))
                if consume:
                    taken[i : i + n] = [True] * n
    return sorted(hits, key=lambda h: (h[0], -len(h[1])))


def _dedupe(items: Iterable[str]) -> tuple[str, ...]:
    return tuple(dict.fromkeys(items))


def _verb_use(tokens: list[str], i: int, n: int) -> bool:
    before = tokens[i - 1] if i else ""
    after = tokens[i + n] if i + n < len(tokens) else ""
    if before in USER_SUBJECTS or before in DETERMINERS:
        return False
    return (tokens[i + n - 1], after) not in NOUN_COMPOUNDS


def match_sentence(sentence: Span | str, lexicon: Lexicon) -> ExtractedSentence | None:
    """Return the sentence's lexicon hits, or None unless it has a collection verb
    plus an interaction noun (or an interaction type/technique phrase)."""
    if isinstance(sentence, str):
        sentence = Span(sentence, 0, len(sentence))
    tokens = tokenize(sentence.text)
    verbs = _dedupe(kw for i, key, kw in _find(tokens, lexicon._verbs) if _verb_use(tokens, i, len(key)))
    if not verbs:
        return None
    nouns = _dedupe(kw for _, _, kw in _find(tokens, lexicon._nouns))
    type_hits = _find(tokens, lexicon._types, consume=True)
    tech_hits = _find(tokens, lexicon._techniques, consume=True)
    if not nouns and not type_hits and not tech_hits:
        return None
    return ExtractedSentence(
        sentence=sentence,
        matched_verbs=verbs,
        matched_nouns=nouns,
        inferred_types=frozenset(v for _, _, v in type_hits),
        inferred_techniques=frozenset(v for _, _, v in tech_hits),
        matched_patterns=_dedupe(lexicon._pattern_names[k] for _, k, _ in type_hits + tech_hits),
    )


def extract_sentences(document: PolicyDocument, lexicon: Lexicon) -> list[ExtractedSentence]:
    found = (match_sentence(s, lexicon) for s in document.sentences)
    return [e for e in found if e is not None]


def extract_claims(document: PolicyDocument, lexicon: Lexicon, app_id: str) -> CollectionClaim:
    matched = extract_sentences(document, lexicon)
    support = tuple(
        SupportSentence(
            text=e.sentence.text,
            start=e.sentence.start,
            end=e.sentence.end,
            keywords=e.matched_verbs + e.matched_nouns + e.matched_patterns,
            types=e.inferred_types,
            techniques=e.inferred_techniques,
        )
        for e in matched
    )
    return CollectionClaim(
        app_id=app_id,
        source=document.source,
        claimed_types=frozenset(t for e in matched for t in e.inferred_types),
        claimed_techniques=frozenset(t for e in matched for t in e.inferred_techniques),
        support=support,
    )


def corpus_claim_stats(sentences: Iterable[ExtractedSentence]) -> tuple[float, float, float]:
    """Fractions (Both, TechniquesOnly, TypesOnly) over sentences with any inference."""
    counts = {c: 0 for c in Classification}
    for s in sentences:
        counts[s.classification] += 1
    total = sum(counts.values()) - counts[Classification.NEITHER]
    if not total:
        raise PolicyError("no matched sentences")
    return (
        counts[Classification.BOTH] / total,
        counts[Classification.TECHNIQUES_ONLY] / total,
        counts[Classification.TYPES_ONLY] / total,
    )


def load_policy(path: str | Path) -> PolicyDocument:
    """Read a ``.html`` or ``.txt`` policy file into a segmented document."""
    path = Path(path)
    raw = path.read_bytes()
    if path.suffix.lower() in {".html", ".htm"}:
        text = strip_html(raw)
    else:
        text = raw.decode("utf-8", errors="replace")
    return PolicyDocument.from_text(text, str(path))
