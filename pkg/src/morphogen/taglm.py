"""LSTM language model over morphological tag sequences.

Input tags are embedded as the sum of their POS and attribute=value rows
(multi-hot times an embedding matrix). The output layer predicts whole tags
from the training inventory plus an end-of-sequence symbol.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, RejectedInput
from .morphdata import AnnotatedSentence, MorphTag, Vocab
from .numcore import (
    LSTMParams,
    Parameter,
    Tape,
    add,
    affine,
    clip_and_step_sgd,
    dropout,
    glorot,
    log_softmax,
    lstm_step,
    multi_hot_embedding,
    reshape,
    scale,
    softmax,
    softmax_cross_entropy,
    stack,
    zero_grads,
)
from .training import ParamModel, drop_zero, minibatches

UNK_FEATURE = "<unk>"
EOS = "</s>"


@dataclass
class TagLMConfig:
    embed_dim: int = 200
    hidden: int = 200
    layers: int = 2
    epochs: int = 40
    lr: float = 20.0
    lr_decay: float = 0.25
    # "on_improvement": decay whenever validation loss hits a new minimum;
    # "on_plateau": decay when it does not
    schedule: str = "on_improvement"
    dropout: float = 0.2
    clip: float = 0.25
    batch_size: int = 20
    valid_fraction: float = 0.1
    max_len: int = 30

    def validate(self):
        if self.schedule not in ("on_improvement", "on_plateau"):
            raise ConfigError(f"unknown schedule {self.schedule!r}")
        if self.lr < 0 or self.epochs < 0 or self.batch_size < 1 or self.layers < 1:
            raise ConfigError("taglm: lr/epochs must be >= 0, batch_size and layers >= 1")
        if not 0 <= self.valid_fraction < 1:
            raise ConfigError("taglm: valid_fraction must lie in [0, 1)")


@dataclass
class TagSample:
    tags: list[MorphTag]
    truncated: bool


class TagLMModel(ParamModel):
    def __init__(self, features: Vocab, tags: Sequence[MorphTag], config: TagLMConfig,
                 rng: np.random.Generator):
        self.config = config
        self.features = features
        self.tags = tuple(tags)
        self.tag_index = {m: i for i, m in enumerate(self.tags)}
        self.eos = len(self.tags)
        d, e = config.hidden, config.embed_dim
        self.cells = [LSTMParams.create(e if l == 0 else d, d, rng, f"lstm{l}.") for l in range(config.layers)]
        self.params = {"embed": Parameter(glorot(rng, len(features), e), "embed"),
                       "out.W": Parameter(glorot(rng, self.eos + 1, d), "out.W"),
                       "out.b": Parameter(np.zeros(self.eos + 1), "out.b")}
        for l, cell in enumerate(self.cells):
            for k, p in cell.parameters().items():
                self.params[f"lstm{l}.{k}"] = p
            self.params[f"h0.{l}"] = Parameter(np.zeros(d), f"h0.{l}")
            self.params[f"c0.{l}"] = Parameter(np.zeros(d), f"c0.{l}")
        self._tag_hot = np.stack([self.hot(m) for m in self.tags]) if self.tags else np.zeros((0, len(features)))
        self.history: list[dict] = []

    @property
    def output_size(self) -> int:
        return self.eos + 1

    # --- embedding -----------------------------------------------------------

    def hot(self, m: MorphTag) -> np.ndarray:
        """Multi-hot row: POS plus each attribute=value pair (unknown ones hit the UNK row)."""
        v = np.zeros(len(self.features))
        for sym in m.features():
            v[self.features.get(sym, UNK_FEATURE)] += 1.0
        return v

    def embed_tag(self, m: MorphTag):
        return multi_hot_embedding(self.params["embed"], self.hot(m))

    # --- recurrence ----------------------------------------------------------

    def _initial_state(self, batch: int):
        zeros = np.zeros((batch, self.config.hidden))
        hs = [add(zeros, self.params[f"h0.{l}"]) for l in range(len(self.cells))]
        cs = [add(zeros, self.params[f"c0.{l}"]) for l in range(len(self.cells))]
        return hs, cs

    def _advance(self, hs, cs, hot, mask, training, rng):
        x = dropout(multi_hot_embedding(self.params["embed"], hot), self.config.dropout, training, rng)
        new_h, new_c = [], []
        for cell, h, c in zip(self.cells, hs, cs):
            h, c = lstm_step(h, c, x, cell, mask=mask)
            new_h.append(h)
            new_c.append(c)
            x = dropout(h, self.config.dropout, training, rng)
        return new_h, new_c, x

    def _logits_value(self, top: np.ndarray) -> np.ndarray:
        return top @ self.params["out.W"].value.T + self.params["out.b"].value

    def encode(self, seq: Sequence[MorphTag]) -> list[int] | None:
        try:
            return [self.tag_index[m] for m in seq]
        except KeyError:
            return None

    def batch_loss(self, seqs: list[list[int]], weights: np.ndarray, training: bool = False,
                   rng: np.random.Generator | None = None):
        """Summed weighted negative log-likelihood of index sequences (a recorded scalar)."""
        B = len(seqs)
        L = max(len(s) for s in seqs)
        hs, cs = self._initial_state(B)
        tops = [dropout(hs[-1], self.config.dropout, training, rng)]
        for t in range(L):
            ids = np.array([s[t] if t < len(s) else 0 for s in seqs])
            mask = np.array([t < len(s) for s in seqs])
            hs, cs, top = self._advance(hs, cs, self._tag_hot[ids], mask, training, rng)
            tops.append(top)
        flat = reshape(stack(tops, axis=1), (B * (L + 1), self.config.hidden))
        logits = affine(flat, self.params["out.W"], self.params["out.b"])
        targets = np.zeros((B, L + 1), dtype=np.int64)
        w = np.zeros((B, L + 1))
        for i, s in enumerate(seqs):
            targets[i, :len(s)] = s
            targets[i, len(s)] = self.eos
            w[i, :len(s) + 1] = weights[i]
        return softmax_cross_entropy(logits, targets.reshape(-1), w.reshape(-1))

    # --- scoring and sampling -----------------------------------------------

    def step_distributions(self, seq: Sequence[MorphTag]) -> np.ndarray:
        """Next-symbol distributions after each prefix: (len + 1, |tags| + 1)."""
        ids = self.encode(seq)
        if ids is None:
            raise RejectedInput("tag outside the output vocabulary")
        hs, cs = self._initial_state(1)
        rows = [softmax(self._logits_value(hs[-1].value[0]))]
        for i in ids:
            hs, cs, top = self._advance(hs, cs, self._tag_hot[[i]], None, False, None)
            rows.append(softmax(self._logits_value(top.value[0])))
        return np.stack(rows)

    def logprob(self, seq: Sequence[MorphTag]) -> float:
        """log p(seq, EOS); ``-inf`` for any tag outside the output vocabulary."""
        ids = self.encode(seq)
        if ids is None:
            return -math.inf
        hs, cs = self._initial_state(1)
        total = float(log_softmax(self._logits_value(hs[-1].value[0]))[ids[0] if ids else self.eos])
        for k, i in enumerate(ids):
            hs, cs, top = self._advance(hs, cs, self._tag_hot[[i]], None, False, None)
            nxt = ids[k + 1] if k + 1 < len(ids) else self.eos
            total += float(log_softmax(self._logits_value(top.value[0]))[nxt])
        return total

    def sample(self, rng: np.random.Generator, max_len: int | None = None) -> TagSample:
        cap = self.config.max_len if max_len is None else max_len
        hs, cs = self._initial_state(1)
        top = hs[-1]
        out: list[MorphTag] = []
        while True:
            p = softmax(self._logits_value(top.value[0]))
            k = int(rng.choice(len(p), p=p))
            if k == self.eos:
                return TagSample(out, False)
            if len(out) >= cap:
                return TagSample(out, True)
            out.append(self.tags[k])
            hs, cs, top = self._advance(hs, cs, self._tag_hot[[k]], None, False, None)

    def mean_loss(self, seqs: list[list[int]], weights) -> float:
        if not seqs:
            return float("nan")
        weights = np.asarray(weights, dtype=float)
        n_pred = np.array([len(s) + 1 for s in seqs])
        total = 0.0
        for idx in minibatches(len(seqs), 256, None):
            total += self.batch_loss([seqs[i] for i in idx], weights[idx]).item()
        return total / float((weights * n_pred).sum())

    # --- persistence ---------------------------------------------------------

    def sidecar(self) -> dict:
        return {"kind": "taglm", "config": asdict(self.config), "features": self.features.to_json(),
                "tags": [str(m) for m in self.tags]}

    def save(self, directory, name: str = "taglm", meta: dict | None = None) -> None:
        d = Path(directory)
        self.save_params(d / f"{name}.params", {"kind": "taglm", **(meta or {})})
        (d / f"{name}.json").write_text(json.dumps(self.sidecar(), indent=1, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, directory, name: str = "taglm") -> "TagLMModel":
        d = Path(directory)
        side = json.loads((d / f"{name}.json").read_text(encoding="utf-8"))
        model = cls(Vocab.from_json(side["features"]), [MorphTag.parse(t) for t in side["tags"]],
                    TagLMConfig(**side["config"]), np.random.default_rng(0))
        model.read_params(d / f"{name}.params")
        return model


def _tag_sequences(data) -> list[tuple[MorphTag, ...]]:
    return [tuple(x.tags) if isinstance(x, AnnotatedSentence) else tuple(x) for x in data]


def train_taglm(data, config: TagLMConfig | None = None, rng: np.random.Generator | None = None,
                weights=None) -> TagLMModel:
    """Fit the tag LM by clipped SGD on weighted per-tag cross entropy.

    ``data`` holds tag sequences or annotated sentences. A ``valid_fraction``
    share of the sentences is held out to drive the learning-rate schedule
    (training loss is used when that share rounds to zero).
    """
    config = config or TagLMConfig()
    config.validate()
    rng = rng if rng is not None else np.random.default_rng(0)
    examples = drop_zero(_tag_sequences(data), weights)
    if not examples:
        raise ConfigError("tag LM needs at least one training sentence with positive weight")

    all_tags = sorted({m for seq, _ in examples for m in seq}, key=str)
    feats = {s for m in all_tags for s in m.features()}
    model = TagLMModel(Vocab(feats, reserved=(UNK_FEATURE,)), all_tags, config, rng)

    order = rng.permutation(len(examples))
    n_valid = int(len(examples) * config.valid_fraction)
    valid = [examples[i] for i in order[:n_valid]]
    train = [examples[i] for i in order[n_valid:]]
    tr_seqs = [model.encode(s) for s, _ in train]
    tr_w = np.array([w for _, w in train])
    va_seqs = [model.encode(s) for s, _ in valid]
    va_w = np.array([w for _, w in valid])
    n_pred = np.array([len(s) + 1 for s in tr_seqs])
    mean_w = float((tr_w * n_pred).sum() / n_pred.sum())

    params = model.parameters()
    lr = config.lr
    best = math.inf
    for epoch in range(config.epochs):
        running = 0.0
        for idx in minibatches(len(tr_seqs), config.batch_size, rng):
            with Tape() as tape:
                loss = model.batch_loss([tr_seqs[i] for i in idx], tr_w[idx], True, rng)
                norm = mean_w * float(n_pred[idx].sum())
                obj = scale(loss, 1.0 / norm)
            tape.backward(obj)
            running += loss.item()
            if lr > 0:
                clip_and_step_sgd(params, lr, config.clip)
            else:
                zero_grads(params)
        monitor = model.mean_loss(va_seqs, va_w) if va_seqs else model.mean_loss(tr_seqs, tr_w)
        model.history.append({"epoch": epoch + 1, "lr": lr, "train_loss": running / float((tr_w * n_pred).sum()),
                              "valid_loss": monitor})
        improved = monitor < best
        best = min(best, monitor)
        if improved == (config.schedule == "on_improvement"):
            lr *= config.lr_decay
    model.final_train_loss = model.mean_loss(tr_seqs, tr_w)
    model.final_valid_loss = model.mean_loss(va_seqs, va_w) if va_seqs else float("nan")
    return model
