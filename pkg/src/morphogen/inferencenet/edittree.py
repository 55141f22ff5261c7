"""Edit trees: a recursive form-to-lemma rewrite keyed on the longest common substring.

A node either keeps a middle span and recurses on what lies to its left and
right (``Match``), or swaps one exact string for another (``Replace``). The
tree stores only span lengths and replaced strings, so one tree extracted
from ``talking -> talk`` also maps ``walking -> walk``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache

# nodes: ("R", src, tgt) or ("M", left_len, right_len, left_node, right_node)
_EMPTY = ("R", "", "")


def _lcs(a: str, b: str) -> tuple[int, int, int]:
    """Longest common substring as (start in a, start in b, length); leftmost in a, then b."""
    best = (0, 0, 0)
    prev = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        cur = [0] * (len(b) + 1)
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                cur[j] = prev[j - 1] + 1
                n = cur[j]
                si, sj = i - n, j - n
                if n > best[2] or (n == best[2] and (si, sj) < (best[0], best[1])):
                    best = (si, sj, n)
        prev = cur
    return best


def _extract(form: str, lemma: str) -> tuple:
    i, j, n = _lcs(form, lemma)
    if n == 0:
        return ("R", form, lemma)
    left = _extract(form[:i], lemma[:j])
    right = _extract(form[i + n:], lemma[j + n:])
    return ("M", i, len(form) - i - n, left, right)


def _apply(node: tuple, form: str) -> str | None:
    if node[0] == "R":
        return node[2] if form == node[1] else None
    _, nl, nr, left, right = node
    if len(form) <= nl + nr:  # the kept middle span is never empty
        return None
    a = _apply(left, form[:nl])
    if a is None:
        return None
    b = _apply(right, form[len(form) - nr:])
    if b is None:
        return None
    return a + form[nl:len(form) - nr] + b


@dataclass(frozen=True)
class EditTree:
    node: tuple

    @classmethod
    def extract(cls, form: str, lemma: str) -> "EditTree":
        return _extract_cached(form, lemma)

    def apply(self, form: str) -> str | None:
        """The lemma this tree gives for ``form``, or ``None`` if it does not fit."""
        return _apply(self.node, form)

    @property
    def is_identity(self) -> bool:
        return self == IDENTITY

    def to_json(self) -> str:
        return json.dumps(self.node, ensure_ascii=False, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "EditTree":
        def tup(x):
            return tuple(tup(v) for v in x) if isinstance(x, list) else x

        return cls(tup(json.loads(text)))

    def __str__(self):
        return self.to_json()


@lru_cache(maxsize=200_000)
def _extract_cached(form: str, lemma: str) -> EditTree:
    return EditTree(_extract(form, lemma))


IDENTITY = EditTree(("M", 0, 0, _EMPTY, _EMPTY))


def extract_edit_tree(form: str, lemma: str) -> EditTree:
    return EditTree.extract(form, lemma)


def apply_edit_tree(tree: EditTree, form: str) -> str | None:
    return tree.apply(form)
