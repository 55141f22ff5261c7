"""Type-level exact-match evaluation of an inflector."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import RejectedInput
from .morphdata import TypeLexicon


@dataclass(frozen=True)
class Prediction:
    form: str
    lemma: str
    tag: str
    predicted: str

    @property
    def correct(self) -> bool:
        return self.form == self.predicted


@dataclass
class EvalReport:
    size: int
    correct: int
    per_pos: dict[str, tuple[int, int]]  # pos -> (correct, size)
    seen: tuple[int, int] = (0, 0)
    unseen: tuple[int, int] = (0, 0)
    fingerprint: str = ""
    predictions: list[Prediction] = field(default_factory=list, repr=False)

    @property
    def accuracy(self) -> float:
        return self.correct / self.size

    def pos_accuracy(self) -> dict[str, float]:
        return {p: c / n for p, (c, n) in self.per_pos.items()}

    def to_json(self) -> str:
        def frac(cn):
            return {"correct": cn[0], "size": cn[1], "accuracy": cn[0] / cn[1] if cn[1] else None}

        doc = {"size": self.size, "correct": self.correct, "accuracy": self.accuracy,
               "per_pos": {p: frac(v) for p, v in sorted(self.per_pos.items())},
               "seen": frac(self.seen), "unseen": frac(self.unseen), "fingerprint": self.fingerprint}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def dump(self) -> str:
        """One tab-separated line per entry: form, lemma, tag, prediction, 1/0."""
        return "".join(f"{p.form}\t{p.lemma}\t{p.tag}\t{p.predicted}\t{int(p.correct)}\n" for p in self.predictions)


def evaluate_type_accuracy(inflector, lexicon: TypeLexicon, training: TypeLexicon | None = None,
                           fingerprint: str = "", mode: str = "beam") -> EvalReport:
    """Decode every (lemma, tag) of ``lexicon`` and count exact matches with its form.

    ``training``, when given, splits the count into entries seen and unseen in training.
    """
    entries = sorted(lexicon.entries, key=lambda t: (t[1], str(t[2]), t[0]))
    if not entries:
        raise RejectedInput("cannot evaluate on an empty lexicon")
    seen_set = set(training.entries) if training is not None else set()
    preds, per_pos = [], {}
    seen = [0, 0]
    unseen = [0, 0]
    for form, lemma, m in entries:
        p = Prediction(form, lemma, str(m), inflector.decode(lemma, m, mode=mode).form)
        preds.append(p)
        c, n = per_pos.get(m.pos, (0, 0))
        per_pos[m.pos] = (c + p.correct, n + 1)
        bucket = seen if (form, lemma, m) in seen_set else unseen
        bucket[0] += p.correct
        bucket[1] += 1
    correct = sum(p.correct for p in preds)
    return EvalReport(len(preds), correct, per_pos, tuple(seen), tuple(unseen), fingerprint, preds)
