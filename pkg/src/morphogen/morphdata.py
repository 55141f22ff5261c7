"""Forms, lemmata, morphological tags, sentences, corpora and lexicons.

Also holds CoNLL-U ingestion, the token-budget split and type-lexicon
compilation used by the experiments.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .errors import ParseError, RejectedInput

# Short names for the most frequent UD feature names and values. Anything not
# listed is only lowercased.
ABBREVIATIONS = {
    "number": "num", "tense": "tns", "person": "per", "gender": "gen",
    "plur": "pl", "sing": "sg", "dual": "du",
    "past": "pst", "pres": "prs", "fut": "fut",
    "masc": "masc", "fem": "fem", "neut": "neut",
}


def normalize_feature_name(name: str) -> str:
    low = name.strip().lower()
    return ABBREVIATIONS.get(low, low)


@dataclass(frozen=True, order=True)
class Slot:
    """An inflectional slot: attribute=value pairs kept sorted by attribute."""

    pairs: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        pairs = tuple(sorted((str(a), str(v)) for a, v in self.pairs))
        attrs = [a for a, _ in pairs]
        if len(set(attrs)) != len(attrs):
            raise RejectedInput(f"attribute repeated in slot: {pairs}")
        if any(not a or not v or "=" in a or ";" in a + v for a, v in pairs):
            raise RejectedInput(f"malformed attribute=value pair in {pairs}")
        object.__setattr__(self, "pairs", pairs)

    @classmethod
    def of(cls, mapping: Mapping[str, str] | Iterable[tuple[str, str]] = ()) -> "Slot":
        items = mapping.items() if isinstance(mapping, Mapping) else mapping
        return cls(tuple(items))

    @classmethod
    def from_feats(cls, feats: str) -> "Slot":
        """Parse a UD FEATS column (``A=V|B=W`` or ``_``)."""
        feats = feats.strip()
        if feats in ("", "_"):
            return cls()
        pairs = []
        for item in feats.split("|"):
            if "=" not in item:
                raise RejectedInput(f"feature without '=': {item!r}")
            a, v = item.split("=", 1)
            pairs.append((normalize_feature_name(a), normalize_feature_name(v)))
        return cls(tuple(pairs))

    def tokens(self) -> list[str]:
        return [f"{a}={v}" for a, v in self.pairs]

    def to_feats(self) -> str:
        return "|".join(self.tokens()) or "_"

    def __len__(self):
        return len(self.pairs)

    def __str__(self):
        return "{" + ",".join(self.tokens()) + "}"


@dataclass(frozen=True, order=True)
class MorphTag:
    """A POS tag together with an inflectional slot."""

    pos: str
    slot: Slot = field(default_factory=Slot)

    def __post_init__(self):
        if not self.pos or ";" in self.pos or "=" in self.pos:
            raise RejectedInput(f"invalid POS tag {self.pos!r}")

    @classmethod
    def parse(cls, text: str) -> "MorphTag":
        """Parse the wire format ``POS;attr=val;...``."""
        parts = [p for p in text.strip().split(";")]
        if not parts or not parts[0]:
            raise RejectedInput(f"tag string without POS: {text!r}")
        pairs = []
        for p in parts[1:]:
            if p.count("=") != 1:
                raise RejectedInput(f"malformed feature {p!r} in tag {text!r}")
            a, v = p.split("=")
            pairs.append((a, v))
        return cls(parts[0], Slot(tuple(pairs)))

    def __str__(self):
        return ";".join([self.pos, *self.slot.tokens()])

    def features(self) -> list[str]:
        """The POS followed by every attribute=value symbol."""
        return [f"pos={self.pos}", *self.slot.tokens()]


def tag(pos: str, **feats: str) -> MorphTag:
    """Shorthand: ``tag("v", tns="pst")``."""
    return MorphTag(pos, Slot.of(feats))


@dataclass(frozen=True)
class AnnotatedSentence:
    forms: tuple[str, ...]
    lemmata: tuple[str, ...]
    tags: tuple[MorphTag, ...]

    def __post_init__(self):
        object.__setattr__(self, "forms", tuple(self.forms))
        object.__setattr__(self, "lemmata", tuple(self.lemmata))
        object.__setattr__(self, "tags", tuple(self.tags))
        n = len(self.forms)
        if n == 0 or len(self.lemmata) != n or len(self.tags) != n:
            raise RejectedInput("forms, lemmata and tags must have the same nonzero length")
        if any(not f for f in self.forms):
            raise RejectedInput("empty form in sentence")

    def __len__(self):
        return len(self.forms)

    def triples(self) -> Iterator[tuple[str, str, MorphTag]]:
        return zip(self.forms, self.lemmata, self.tags)


@dataclass(frozen=True)
class Corpus:
    labeled: tuple[AnnotatedSentence, ...]
    unlabeled: tuple[tuple[str, ...], ...]

    @property
    def labeled_tokens(self) -> int:
        return sum(len(s) for s in self.labeled)

    @property
    def unlabeled_tokens(self) -> int:
        return sum(len(s) for s in self.unlabeled)


@dataclass(frozen=True)
class TypeLexicon:
    """Deduplicated (form, lemma, tag) triples."""

    entries: frozenset

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.sorted())

    def __contains__(self, item):
        return item in self.entries

    def sorted(self) -> list[tuple[str, str, MorphTag]]:
        return sorted(self.entries, key=lambda e: (e[1], str(e[2]), e[0]))

    def union(self, other: "TypeLexicon") -> "TypeLexicon":
        return TypeLexicon(self.entries | other.entries)

    def to_tsv(self) -> str:
        return "".join(f"{f}\t{l}\t{t}\n" for f, l, t in self.sorted())

    @classmethod
    def from_tsv(cls, text: str) -> "TypeLexicon":
        entries = set()
        for no, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            cols = line.split("\t")
            if len(cols) != 3:
                raise ParseError(f"expected 3 tab-separated columns, got {len(cols)}", no)
            try:
                entries.add((cols[0], cols[1], MorphTag.parse(cols[2])))
            except RejectedInput as exc:
                raise ParseError(str(exc), no) from exc
        return cls(frozenset(entries))


@dataclass(frozen=True)
class TagInventory:
    pos_tags: tuple[str, ...]
    pairs: tuple[str, ...]
    tags: tuple[MorphTag, ...]

    def covers(self, m: MorphTag) -> bool:
        return m.pos in self.pos_tags and all(p in self.pairs for p in m.slot.tokens())


# --- CoNLL-U -----------------------------------------------------------------

def parse_conllu(text: str) -> list[AnnotatedSentence]:
    """Read sentences from CoNLL-U text.

    Multiword range lines and empty nodes are skipped; FEATS names are
    lowercased (and abbreviated via :data:`ABBREVIATIONS`).
    """
    sentences: list[AnnotatedSentence] = []
    forms, lemmata, tags = [], [], []
    start = None

    def flush():
        if forms:
            try:
                sentences.append(AnnotatedSentence(forms.copy(), lemmata.copy(), tags.copy()))
            except RejectedInput as exc:
                raise ParseError(str(exc), start) from exc
        forms.clear(), lemmata.clear(), tags.clear()

    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            flush()
            continue
        if line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise ParseError(f"expected 10 tab-separated columns, got {len(cols)}", no)
        tid = cols[0]
        if "-" in tid or "." in tid:
            continue
        if not forms:
            start = no
        try:
            forms.append(cols[1])
            lemmata.append(cols[2])
            tags.append(MorphTag(cols[3], Slot.from_feats(cols[5])))
        except RejectedInput as exc:
            raise ParseError(str(exc), no) from exc
    flush()
    return sentences


def read_conllu(path) -> list[AnnotatedSentence]:
    return parse_conllu(Path(path).read_text(encoding="utf-8"))


def serialize_conllu(sentences: Iterable[AnnotatedSentence]) -> str:
    out = []
    for s in sentences:
        for i, (f, l, m) in enumerate(s.triples(), 1):
            out.append("\t".join([str(i), f, l, m.pos, "_", m.slot.to_feats(), "_", "_", "_", "_"]))
        out.append("")
    return "\n".join(out) + ("\n" if out else "")


def parse_forms(text: str) -> list[tuple[str, ...]]:
    """Form sequences from CoNLL-U text, ignoring any annotation columns."""
    sentences, cur = [], []
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            if cur:
                sentences.append(tuple(cur))
                cur = []
            continue
        if line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) < 2:
            raise ParseError("expected at least ID and FORM columns", no)
        if "-" in cols[0] or "." in cols[0]:
            continue
        if not cols[1]:
            raise ParseError("empty form", no)
        cur.append(cols[1])
    if cur:
        sentences.append(tuple(cur))
    return sentences


# --- protocols ---------------------------------------------------------------

def split_tokens(sentences, n: int) -> Corpus:
    """Label the shortest whole-sentence prefix holding at least ``n`` tokens.

    Later sentences keep only their forms. If the corpus has fewer than ``n``
    tokens everything is labeled and a warning is issued.
    """
    if n < 1:
        raise RejectedInput(f"token budget must be >= 1, got {n}")
    sentences = list(sentences)
    count = 0
    for k, s in enumerate(sentences):
        count += len(s)
        if count >= n:
            return Corpus(tuple(sentences[:k + 1]), tuple(s.forms for s in sentences[k + 1:]))
    warnings.warn(f"corpus has only {count} tokens, fewer than the budget {n}; all labeled",
                  stacklevel=2)
    return Corpus(tuple(sentences), ())


def compile_type_lexicon(sentences) -> TypeLexicon:
    return TypeLexicon(frozenset(t for s in sentences for t in s.triples()))


def build_inventory(sentences) -> TagInventory:
    pos, pairs, tags = set(), set(), set()
    for s in sentences:
        for m in s.tags:
            pos.add(m.pos)
            pairs.update(m.slot.tokens())
            tags.add(m)
    return TagInventory(tuple(sorted(pos)), tuple(sorted(pairs)), tuple(sorted(tags, key=str)))


# --- symbol tables -----------------------------------------------------------

class Vocab:
    """Symbol <-> index table with reserved symbols first."""

    def __init__(self, symbols: Iterable[str], reserved: Iterable[str] = ()):
        self.reserved = tuple(reserved)
        seen = list(self.reserved)
        for s in sorted(set(symbols) - set(self.reserved)):
            seen.append(s)
        self.symbols = tuple(seen)
        self.index = {s: i for i, s in enumerate(self.symbols)}

    def __len__(self):
        return len(self.symbols)

    def __contains__(self, s):
        return s in self.index

    def get(self, s: str, default: str) -> int:
        return self.index.get(s, self.index[default])

    def to_json(self) -> dict:
        return {"reserved": list(self.reserved), "symbols": list(self.symbols)}

    @classmethod
    def from_json(cls, data: dict) -> "Vocab":
        v = cls.__new__(cls)
        v.reserved = tuple(data["reserved"])
        v.symbols = tuple(data["symbols"])
        v.index = {s: i for i, s in enumerate(v.symbols)}
        return v
