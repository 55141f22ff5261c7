"""A deterministic toy suffixing language for controlled experiments.

Every form is its lemma followed by a suffix that depends only on the tag; tag
sequences come from a first-order Markov chain and lemmata from a Zipfian
distribution, so a small labeled prefix leaves many (lemma, tag) types unseen.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .morphdata import AnnotatedSentence, Corpus, MorphTag, TypeLexicon, split_tokens, tag
from .numcore import derive_rng

ONSETS = "ptkbdgmnlrsvz"
VOWELS = "aeiou"
CODAS = "ptkmnrs"

DEFAULT_TAGS = (
    tag("N", case="nom"), tag("N", case="acc"), tag("N", case="dat"),
    tag("V", tns="prs"), tag("V", tns="pst"), tag("V", tns="fut"),
)
DEFAULT_SUFFIXES = ("", "em", "ov", "a", "il", "eru")


@dataclass(frozen=True)
class SuffixLanguage:
    lemmata: tuple[str, ...]
    tags: tuple[MorphTag, ...]
    suffixes: tuple[str, ...]
    start: np.ndarray  # (T,) initial tag distribution
    transition: np.ndarray  # (T, T + 1) next-tag distribution; last column stops
    lemma_probs: np.ndarray  # (L,)

    def inflect(self, lemma: str, m: MorphTag) -> str:
        return lemma + self.suffixes[self.tags.index(m)]

    def types(self) -> list[tuple[str, str, MorphTag]]:
        return [(self.inflect(l, m), l, m) for l in self.lemmata for m in self.tags]

    def sample_sentence(self, rng: np.random.Generator, max_len: int = 30) -> AnnotatedSentence:
        T = len(self.tags)
        seq = [int(rng.choice(T, p=self.start))]
        while len(seq) < max_len:
            nxt = int(rng.choice(T + 1, p=self.transition[seq[-1]]))
            if nxt == T:
                break
            seq.append(nxt)
        lemmata = [self.lemmata[int(rng.choice(len(self.lemmata), p=self.lemma_probs))] for _ in seq]
        tags = [self.tags[k] for k in seq]
        return AnnotatedSentence([self.inflect(l, m) for l, m in zip(lemmata, tags)], lemmata, tags)

    def sample_corpus(self, rng: np.random.Generator, n_tokens: int) -> list[AnnotatedSentence]:
        out, count = [], 0
        while count < n_tokens:
            s = self.sample_sentence(rng)
            out.append(s)
            count += len(s)
        return out


def _lemma(rng: np.random.Generator) -> str:
    syllables = int(rng.integers(1, 3))
    word = "".join(rng.choice(list(ONSETS)) + rng.choice(list(VOWELS)) for _ in range(syllables))
    return word + rng.choice(list(CODAS))


def make_language(seed: int = 0, n_lemmata: int = 30, zipf: float = 1.2) -> SuffixLanguage:
    """Build the language: distinct lemmata, six tags with fixed suffixes, a tag grammar."""
    rng = derive_rng(seed, "synthetic-language")
    lemmata: list[str] = []
    while len(lemmata) < n_lemmata:
        w = _lemma(rng)
        if w not in lemmata:
            lemmata.append(w)
    T = len(DEFAULT_TAGS)
    # nouns tend to be followed by verbs and vice versa; sentences stop after verbs
    start = np.array([0.4, 0.1, 0.1, 0.2, 0.1, 0.1])
    transition = np.full((T, T + 1), 0.02)
    for i in range(3):
        transition[i, 3:6] += [0.3, 0.2, 0.2]
    for i in range(3, 6):
        transition[i, 0:3] += [0.1, 0.3, 0.25]
        transition[i, T] += 0.2
    transition /= transition.sum(axis=1, keepdims=True)
    ranks = np.arange(1, n_lemmata + 1, dtype=float)
    lemma_probs = ranks ** -zipf
    lemma_probs /= lemma_probs.sum()
    return SuffixLanguage(tuple(lemmata), DEFAULT_TAGS, DEFAULT_SUFFIXES, start, transition, lemma_probs)


@dataclass(frozen=True)
class SemiSupervisedTask:
    language: SuffixLanguage
    corpus: Corpus
    heldout: TypeLexicon


def make_task(seed: int, labeled_tokens: int = 200, unlabeled_tokens: int = 2000,
              heldout_types: int = 100, language: SuffixLanguage | None = None) -> SemiSupervisedTask:
    """Sample a corpus, split off the labeled prefix, and pick held-out evaluation types.

    Held-out types are drawn uniformly from the (lemma, tag) types that never
    occur in the labeled portion.
    """
    lang = language or make_language(seed)
    rng = derive_rng(seed, "synthetic-corpus")
    sentences = lang.sample_corpus(rng, labeled_tokens + unlabeled_tokens)
    corpus = split_tokens(sentences, labeled_tokens)
    seen = {(l, m) for s in corpus.labeled for _, l, m in s.triples()}
    unseen = [t for t in lang.types() if (t[1], t[2]) not in seen]
    pick = rng.permutation(len(unseen))[:heldout_types]
    heldout = TypeLexicon(frozenset(unseen[k] for k in sorted(pick)))
    return SemiSupervisedTask(lang, corpus, heldout)
