"""Linear-chain CRF over joint (tag, edit tree) labels.

Each position scores a label as ``tag part + tree part``: observation
features of the token conjoined with the tag, plus the form's own features
conjoined with the edit tree. A first-order transition links consecutive tags.
Inference runs the chain over tags and log-sums (or maxes) the applicable
trees within each position, so everything is exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.optimize import minimize
from scipy.special import logsumexp

from ..errors import ConfigError, ModelError, RejectedInput
from ..morphdata import AnnotatedSentence, MorphTag
from ..training import drop_zero
from .edittree import IDENTITY, EditTree

TEMPLATE_VERSION = 1
BOS_TAG = "<s>"


# --- feature templates ---------------------------------------------------------

def form_observations(form: str) -> list[str]:
    """Observations of a form on its own: bias, identity, prefixes and suffixes up to length 3."""
    obs = ["bias", "w=" + form]
    for k in range(1, min(3, len(form)) + 1):
        obs.append(f"p{k}={form[:k]}")
        obs.append(f"s{k}={form[-k:]}")
    return obs


def tag_observations(forms, i: int) -> list[str]:
    """Form observations plus suffixes of the neighbouring forms."""
    obs = form_observations(forms[i])
    for side, j in (("-1", i - 1), ("+1", i + 1)):
        if 0 <= j < len(forms):
            nb = forms[j]
            obs.extend(f"{side}s{k}={nb[-k:]}" for k in range(1, min(3, len(nb)) + 1))
        else:
            obs.append(f"{side}=<edge>")
    return obs


def featurize(forms, i: int, label: tuple[MorphTag, EditTree], prev_tag: MorphTag | None) -> list[str]:
    """Every feature that fires for ``label`` at position ``i`` after ``prev_tag``."""
    if not 0 <= i < len(forms):
        raise RejectedInput(f"position {i} outside a sentence of length {len(forms)}")
    m, tree = label
    feats = [f"{o} ^ t={m}" for o in tag_observations(forms, i)]
    feats += [f"{o} ^ r={tree.to_json()}" for o in form_observations(forms[i])]
    feats.append(f"trans={BOS_TAG if prev_tag is None else prev_tag} > {m}")
    return feats


# --- configuration ---------------------------------------------------------------

@dataclass
class CRFConfig:
    l2: float = 1.0
    optimizer: str = "lbfgs"  # or "gradient": fixed-step ascent on the weight-normalized objective
    steps: int = 200
    step_size: float = 0.1
    tol: float = 1e-9
    init_scale: float = 0.0

    def validate(self):
        if self.optimizer not in ("lbfgs", "gradient"):
            raise ConfigError(f"unknown CRF optimizer {self.optimizer!r}")
        if self.l2 < 0 or self.steps < 0 or self.step_size <= 0:
            raise ConfigError("CRF: l2 >= 0, steps >= 0 and step_size > 0 required")


# --- prepared batches --------------------------------------------------------------

@dataclass
class _Batch:
    lengths: np.ndarray          # (S,)
    tok_pos: np.ndarray          # (N,) flat index s * Lmax + i of each token
    Xt: sparse.csr_matrix        # (N, obs_tag)
    Xr: sparse.csr_matrix        # (N, obs_tree)
    cand_tok: np.ndarray         # candidates sorted by (token, tag, label)
    cand_tag: np.ndarray
    cand_tree: np.ndarray
    cand_label: np.ndarray
    seg_start: np.ndarray        # first candidate of each (token, tag) group
    seg_key: np.ndarray          # token * T + tag of each group
    forms: list = field(default_factory=list)

    @property
    def lmax(self) -> int:
        return int(self.lengths.max())


class CRFModel:
    def __init__(self, tags, trees, labels, obs_tag, obs_tree):
        self.tags: list[MorphTag] = list(tags)
        self.trees: list[EditTree] = list(trees)
        if not self.trees or self.trees[0] != IDENTITY:
            raise ModelError("tree inventory must start with the identity tree")
        self.labels: list[tuple[int, int]] = sorted(set(map(tuple, labels)) | {(t, 0) for t in range(len(self.tags))})
        self.label_index = {lab: k for k, lab in enumerate(self.labels)}
        self.tag_index = {m: k for k, m in enumerate(self.tags)}
        self.tree_index = {r: k for k, r in enumerate(self.trees)}
        self.obs_tag = {o: k for k, o in enumerate(obs_tag)}
        self.obs_tree = {o: k for k, o in enumerate(obs_tree)}
        T, R = len(self.tags), len(self.trees)
        self.W_tag = np.zeros((len(self.obs_tag), T))
        self.W_tree = np.zeros((len(self.obs_tree), R))
        self.W_trans = np.zeros((T + 1, T))  # last row: sentence start
        self._labels_by_tree: dict[int, list[int]] = {}
        for k, (_, r) in enumerate(self.labels):
            self._labels_by_tree.setdefault(r, []).append(k)
        self._applicable_cache: dict[str, np.ndarray] = {}
        self.history: list[float] = []
        self.final_objective = float("nan")

    # --- parameter vector ------------------------------------------------------

    @property
    def n_params(self) -> int:
        return self.W_tag.size + self.W_tree.size + self.W_trans.size

    def get_theta(self) -> np.ndarray:
        return np.concatenate([self.W_tag.ravel(), self.W_tree.ravel(), self.W_trans.ravel()])

    def set_theta(self, theta: np.ndarray) -> None:
        a, b = self.W_tag.size, self.W_tag.size + self.W_tree.size
        self.W_tag = theta[:a].reshape(self.W_tag.shape).copy()
        self.W_tree = theta[a:b].reshape(self.W_tree.shape).copy()
        self.W_trans = theta[b:].reshape(self.W_trans.shape).copy()

    # --- candidates ------------------------------------------------------------

    def applicable_labels(self, form: str) -> np.ndarray:
        """Label indices whose tree fits ``form`` (the identity labels always do)."""
        hit = self._applicable_cache.get(form)
        if hit is None:
            ks = [k for r, labs in self._labels_by_tree.items() if r == 0 or self.trees[r].apply(form) is not None
                  for k in labs]
            hit = np.array(sorted(ks), dtype=np.int64)
            self._applicable_cache[form] = hit
        return hit

    def candidates(self, forms) -> list[list[tuple[MorphTag, EditTree]]]:
        return [[self.label(k) for k in self.applicable_labels(f)] for f in forms]

    def label(self, k: int) -> tuple[MorphTag, EditTree]:
        t, r = self.labels[k]
        return self.tags[t], self.trees[r]

    def prepare(self, sentences) -> _Batch:
        sentences = [list(s) for s in sentences]
        if not sentences or any(len(s) == 0 for s in sentences):
            raise RejectedInput("sentences must be nonempty")
        lengths = np.array([len(s) for s in sentences])
        L = int(lengths.max())
        rows_t, cols_t, rows_r, cols_r, tok_pos = [], [], [], [], []
        c_tok, c_lab = [], []
        n = 0
        for s, forms in enumerate(sentences):
            for i, f in enumerate(forms):
                for o in tag_observations(forms, i):
                    k = self.obs_tag.get(o)
                    if k is not None:
                        rows_t.append(n)
                        cols_t.append(k)
                for o in form_observations(f):
                    k = self.obs_tree.get(o)
                    if k is not None:
                        rows_r.append(n)
                        cols_r.append(k)
                labs = self.applicable_labels(f)
                c_tok.append(np.full(len(labs), n))
                c_lab.append(labs)
                tok_pos.append(s * L + i)
                n += 1
        Xt = sparse.csr_matrix((np.ones(len(rows_t)), (rows_t, cols_t)), shape=(n, len(self.obs_tag)))
        Xr = sparse.csr_matrix((np.ones(len(rows_r)), (rows_r, cols_r)), shape=(n, len(self.obs_tree)))
        cand_tok = np.concatenate(c_tok)
        cand_label = np.concatenate(c_lab)
        lab_arr = np.array(self.labels, dtype=np.int64)
        cand_tag, cand_tree = lab_arr[cand_label, 0], lab_arr[cand_label, 1]
        T = len(self.tags)
        key = cand_tok * T + cand_tag
        order = np.lexsort((cand_label, key))
        cand_tok, cand_tag, cand_tree, cand_label, key = (a[order] for a in (cand_tok, cand_tag, cand_tree,
                                                                               cand_label, key))
        starts = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
        return _Batch(lengths, np.array(tok_pos), Xt, Xr, cand_tok, cand_tag, cand_tree, cand_label,
                      starts, key[starts], sentences)

    # --- potentials ------------------------------------------------------------

    def _scores(self, b: _Batch):
        Et = b.Xt @ self.W_tag
        Er = b.Xr @ self.W_tree
        return Et, Er, Et[b.cand_tok, b.cand_tag] + Er[b.cand_tok, b.cand_tree]

    def _node(self, b: _Batch, cand_score: np.ndarray, reduce: str):
        """(S, Lmax, T) per-position tag potentials: log-sum or max over each tag's trees."""
        T = len(self.tags)
        seg_max = np.maximum.reduceat(cand_score, b.seg_start)
        if reduce == "max":
            seg_val = seg_max
        else:
            seg_id = np.repeat(np.arange(len(b.seg_start)), np.diff(np.r_[b.seg_start, len(cand_score)]))
            seg_val = seg_max + np.log(np.add.reduceat(np.exp(cand_score - seg_max[seg_id]), b.seg_start))
        flat = np.full(len(b.lengths) * b.lmax * T, -np.inf)
        tok, tag = b.seg_key // T, b.seg_key % T
        flat[b.tok_pos[tok] * T + tag] = seg_val
        return flat.reshape(len(b.lengths), b.lmax, T), seg_max

    def _forward(self, b: _Batch, phi: np.ndarray):
        S, L, T = phi.shape
        trans = self.W_trans[:T]
        alpha = np.empty_like(phi)
        alpha[:, 0] = self.W_trans[T] + phi[:, 0]
        for i in range(1, L):
            nxt = logsumexp(alpha[:, i - 1][:, :, None] + trans[None], axis=1) + phi[:, i]
            live = (i < b.lengths)[:, None]
            alpha[:, i] = np.where(live, nxt, alpha[:, i - 1])
        logZ = logsumexp(alpha[:, L - 1], axis=1)
        return alpha, logZ

    def _backward(self, b: _Batch, phi: np.ndarray):
        S, L, T = phi.shape
        trans = self.W_trans[:T]
        beta = np.zeros_like(phi)
        for i in range(L - 2, -1, -1):
            nxt = logsumexp(trans[None] + (phi[:, i + 1] + beta[:, i + 1])[:, None, :], axis=2)
            beta[:, i] = np.where((i + 1 < b.lengths)[:, None], nxt, 0.0)
        return beta

    # --- inference ---------------------------------------------------------------

    def log_partition(self, forms, extra=None) -> float:
        """log Z of one sentence.

        ``extra(i, label)`` optionally adds a log-potential to each candidate
        label at position ``i``; the result is then log of the sum of
        ``exp(score + sum of extras)`` over all label sequences.
        """
        if extra is None:
            return float(self.log_partition_batch([forms])[0])
        b = self.prepare([forms])
        _, _, cs = self._scores(b)
        cs = cs + np.array([extra(int(i), self.label(int(k))) for i, k in zip(b.cand_tok, b.cand_label)])
        phi, _ = self._node(b, cs, "sum")
        return float(self._forward(b, phi)[1][0])

    def log_partition_batch(self, sentences) -> np.ndarray:
        b = self.prepare(sentences)
        _, _, cs = self._scores(b)
        phi, _ = self._node(b, cs, "sum")
        return self._forward(b, phi)[1]

    def label_score(self, forms, labels: list[tuple[MorphTag, EditTree]]) -> float:
        """Unnormalized score of a joint label sequence; ``-inf`` when some label is not a candidate."""
        if len(labels) != len(forms):
            raise RejectedInput("one label per token is required")
        ids = []
        for f, (m, r) in zip(forms, labels):
            k = self.label_index.get((self.tag_index.get(m, -1), self.tree_index.get(r, -1)))
            if k is None or k not in set(self.applicable_labels(f).tolist()):
                return -math.inf
            ids.append(k)
        b = self.prepare([forms])
        Et, Er, _ = self._scores(b)
        T = len(self.tags)
        total, prev = 0.0, T
        for i, k in enumerate(ids):
            t, r = self.labels[k]
            total += Et[i, t] + Er[i, r] + self.W_trans[prev, t]
            prev = t
        return float(total)

    def logprob(self, forms, lemmata, tags) -> float:
        labels = []
        for f, l, m in zip(forms, lemmata, tags):
            labels.append((m, EditTree.extract(f, l)))
        s = self.label_score(forms, labels)
        return s - self.log_partition(forms) if s > -math.inf else -math.inf

    def marginals(self, forms):
        """Per-position tag marginals (L, T) and, per position, a {label: probability} map."""
        b = self.prepare([forms])
        _, _, cs = self._scores(b)
        tag_marg, cand_marg = self._posteriors(b, cs)[-2:]
        per_pos = [dict() for _ in forms]
        for c in range(len(cs)):
            per_pos[int(b.cand_tok[c])][self.label(int(b.cand_label[c]))] = float(cand_marg[c])
        return tag_marg[0, :len(forms)], per_pos

    def _posteriors(self, b: _Batch, cs: np.ndarray):
        """Forward-backward: (phi, alpha, beta, logZ, tag marginals, candidate marginals)."""
        phi, _ = self._node(b, cs, "sum")
        alpha, logZ = self._forward(b, phi)
        beta = self._backward(b, phi)
        tag_marg = np.exp(alpha + beta - logZ[:, None, None])
        S, L, T = phi.shape
        tm_flat = tag_marg.reshape(S * L, T)
        ph_flat = phi.reshape(S * L, T)
        rows = b.tok_pos[b.cand_tok]
        cand_marg = tm_flat[rows, b.cand_tag] * np.exp(cs - ph_flat[rows, b.cand_tag])
        return phi, alpha, beta, logZ, tag_marg, cand_marg

    def viterbi(self, forms) -> tuple[list[int], float]:
        """Best label indices and their score; ties go to the lower tag / label index."""
        b = self.prepare([forms])
        _, _, cs = self._scores(b)
        phi, seg_max = self._node(b, cs, "max")
        T = len(self.tags)
        n = len(forms)
        # best candidate of each (token, tag) group: first one reaching the group max
        seg_id = np.repeat(np.arange(len(b.seg_start)), np.diff(np.r_[b.seg_start, len(cs)]))
        idx = np.where(cs == seg_max[seg_id], np.arange(len(cs)), len(cs))
        best_cand = np.minimum.reduceat(idx, b.seg_start)
        choice = np.full((n, T), -1)
        choice[b.seg_key // T, b.seg_key % T] = b.cand_label[best_cand]
        trans = self.W_trans[:T]
        delta = self.W_trans[T] + phi[0, 0]
        back = np.zeros((n, T), dtype=np.int64)
        for i in range(1, n):
            cand = delta[:, None] + trans
            back[i] = cand.argmax(axis=0)
            delta = cand.max(axis=0) + phi[0, i]
        t = int(delta.argmax())
        score = float(delta[t])
        path = [t]
        for i in range(n - 1, 0, -1):
            t = int(back[i, t])
            path.append(t)
        path.reverse()
        return [int(choice[i, t]) for i, t in enumerate(path)], score

    def _realize(self, forms, label_ids):
        lemmata, tags = [], []
        for f, k in zip(forms, label_ids):
            m, r = self.label(k)
            lemmata.append(r.apply(f))
            tags.append(m)
        return lemmata, tags

    def map(self, forms) -> tuple[list[str], list[MorphTag]]:
        ids, _ = self.viterbi(forms)
        return self._realize(forms, ids)

    def sample_labels(self, sentences, rng) -> list[list[int]]:
        """Exact joint draws by forward filtering, backward sampling (one per sentence).

        ``rng`` is one generator for the whole batch or a list with one per sentence.
        """
        b = self.prepare(sentences)
        _, _, cs = self._scores(b)
        phi, _ = self._node(b, cs, "sum")
        alpha, _ = self._forward(b, phi)
        S, L, T = phi.shape
        trans = self.W_trans[:T]
        seg_bounds = np.r_[b.seg_start, len(cs)]
        seg_of = {int(k): g for g, k in enumerate(b.seg_key)}
        tok_base = np.cumsum(np.r_[0, b.lengths[:-1]])
        out = []
        for s in range(S):
            g = rng[s] if isinstance(rng, (list, tuple)) else rng
            n = int(b.lengths[s])
            tags = [0] * n
            tags[n - 1] = _draw(alpha[s, n - 1], g)
            for i in range(n - 2, -1, -1):
                tags[i] = _draw(alpha[s, i] + trans[:, tags[i + 1]], g)
            ids = []
            for i, t in enumerate(tags):
                seg = seg_of[int((tok_base[s] + i) * T + t)]
                lo, hi = seg_bounds[seg], seg_bounds[seg + 1]
                ids.append(int(b.cand_label[lo + _draw(cs[lo:hi], g)]))
            out.append(ids)
        return out

    def sample(self, forms, rng: np.random.Generator) -> tuple[list[str], list[MorphTag]]:
        return self._realize(forms, self.sample_labels([forms], rng)[0])

    def sample_many(self, sentences, rng):
        return [self._realize(f, ids) for f, ids in zip(sentences, self.sample_labels(sentences, rng))]

    def diagnostics(self, forms) -> str:
        """Tab-separated MAP analysis with the posterior marginal of each chosen label."""
        ids, _ = self.viterbi(forms)
        _, per_pos = self.marginals(forms)
        lines = []
        for i, (f, k) in enumerate(zip(forms, ids)):
            m, r = self.label(k)
            lines.append(f"{i + 1}\t{f}\t{r.apply(f)}\t{m}\t{per_pos[i][(m, r)]:.6f}")
        return "\n".join(lines) + "\n"

    # --- training objective ---------------------------------------------------------

    def objective(self, b: _Batch, gold: np.ndarray, w_sent: np.ndarray, l2: float):
        """Weighted conditional log-likelihood minus ``l2/2 |theta|^2``, and its gradient.

        ``gold`` holds one label index per token of the prepared batch.
        """
        T, R = len(self.tags), len(self.trees)
        Et, Er, cs = self._scores(b)
        phi, alpha, beta, logZ, tag_marg, cand_marg = self._posteriors(b, cs)
        S, L, _ = tag_marg.shape
        lab = np.array(self.labels, dtype=np.int64)
        g_tag, g_tree = lab[gold, 0], lab[gold, 1]
        sent_of_tok = b.tok_pos // L
        pos_of_tok = b.tok_pos % L
        w_tok = w_sent[sent_of_tok]
        N = len(gold)
        rows = np.arange(N)

        prev = np.where(pos_of_tok == 0, T, np.r_[T, g_tag[:-1]])
        gold_score = Et[rows, g_tag] + Er[rows, g_tree] + self.W_trans[prev, g_tag]
        ll = float(w_sent @ (np.bincount(sent_of_tok, gold_score, minlength=S) - logZ))

        Gt = -tag_marg.reshape(S * L, T)[b.tok_pos]
        Gt[rows, g_tag] += 1.0
        Gt *= w_tok[:, None]
        Gr = np.zeros((N, R))
        np.add.at(Gr, (b.cand_tok, b.cand_tree), -cand_marg)
        Gr[rows, g_tree] += 1.0
        Gr *= w_tok[:, None]

        G_trans = np.zeros((T + 1, T))
        np.add.at(G_trans, (prev, g_tag), w_tok)
        G_trans[T] -= w_sent @ tag_marg[:, 0]
        # expected transitions at positions 1..len-1
        for i in range(1, L):
            live = i < b.lengths
            if not live.any():
                break
            a = alpha[live, i - 1][:, :, None]
            rest = (phi[live, i] + beta[live, i])[:, None, :]
            xi = np.exp(a + self.W_trans[:T][None] + rest - logZ[live][:, None, None])
            G_trans[:T] -= np.tensordot(w_sent[live], xi, axes=1)

        grad = np.concatenate([(b.Xt.T @ Gt).ravel(), (b.Xr.T @ Gr).ravel(), G_trans.ravel()])
        theta = self.get_theta()
        return ll - 0.5 * l2 * float(theta @ theta), grad - l2 * theta

    # --- persistence -------------------------------------------------------------

    def to_json(self) -> dict:
        def nonzero(W, rows, cols):
            out = {}
            for c, cname in enumerate(cols):
                col = {rows[k]: float(W[k, c]) for k in np.flatnonzero(W[:, c])}
                if col:
                    out[cname] = col
            return out

        tags = [str(m) for m in self.tags]
        trees = [r.to_json() for r in self.trees]
        inv_t = sorted(self.obs_tag, key=self.obs_tag.get)
        inv_r = sorted(self.obs_tree, key=self.obs_tree.get)
        return {
            "kind": "crf",
            "template_version": TEMPLATE_VERSION,
            "tags": tags,
            "trees": trees,
            "labels": [[tags[t], trees[r]] for t, r in self.labels],
            "obs_tag": inv_t,
            "obs_tree": inv_r,
            "weights": {
                "tag": nonzero(self.W_tag, inv_t, tags),
                "tree": nonzero(self.W_tree, inv_r, trees),
                "trans": nonzero(self.W_trans, tags + [BOS_TAG], tags),
            },
            "final_objective": self.final_objective,
        }

    def save(self, directory, name: str = "crf", meta: dict | None = None) -> None:
        path = Path(directory) / f"{name}.json"
        doc = {**self.to_json(), "meta": meta or {}}
        path.write_text(json.dumps(doc, ensure_ascii=False, indent=1, sort_keys=True), encoding="utf-8")

    @classmethod
    def from_json(cls, data: dict) -> "CRFModel":
        if data.get("template_version") != TEMPLATE_VERSION:
            raise ModelError(f"unsupported CRF template version {data.get('template_version')!r}")
        tags = [MorphTag.parse(t) for t in data["tags"]]
        trees = [EditTree.from_json(r) for r in data["trees"]]
        ti = {t: k for k, t in enumerate(data["tags"])}
        ri = {r: k for k, r in enumerate(data["trees"])}
        labels = [(ti[t], ri[r]) for t, r in data["labels"]]
        model = cls(tags, trees, labels, data["obs_tag"], data["obs_tree"])
        w = data["weights"]
        for cname, col in w["tag"].items():
            for o, v in col.items():
                model.W_tag[model.obs_tag[o], ti[cname]] = v
        for cname, col in w["tree"].items():
            for o, v in col.items():
                model.W_tree[model.obs_tree[o], ri[cname]] = v
        prev_index = {**ti, BOS_TAG: len(tags)}
        for cname, col in w["trans"].items():
            for p, v in col.items():
                model.W_trans[prev_index[p], ti[cname]] = v
        model.final_objective = data.get("final_objective", float("nan"))
        return model

    @classmethod
    def load(cls, directory, name: str = "crf") -> "CRFModel":
        try:
            data = json.loads((Path(directory) / f"{name}.json").read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ModelError(f"cannot read CRF model: {exc}") from exc
        return cls.from_json(data)


def _draw(logits: np.ndarray, rng: np.random.Generator) -> int:
    p = np.exp(logits - logits.max())
    c = np.cumsum(p)
    return int(min(np.searchsorted(c, rng.random() * c[-1], side="right"), len(c) - 1))


def _triples(ex):
    if isinstance(ex, AnnotatedSentence):
        return list(ex.forms), list(ex.lemmata), list(ex.tags)
    forms, lemmata, tags = ex
    return list(forms), list(lemmata), list(tags)


def build_crf(examples) -> CRFModel:
    """Empty (zero-weight) model whose inventories come from ``examples``."""
    tags, trees, pairs, ot, orr = set(), set(), set(), set(), set()
    for forms, lemmata, mtags in examples:
        for i, (f, l, m) in enumerate(zip(forms, lemmata, mtags)):
            r = EditTree.extract(f, l)
            tags.add(m)
            trees.add(r)
            pairs.add((m, r))
            ot.update(tag_observations(forms, i))
            orr.update(form_observations(f))
    tag_list = sorted(tags, key=str)
    tree_list = [IDENTITY] + sorted(trees - {IDENTITY}, key=EditTree.to_json)
    ti = {m: k for k, m in enumerate(tag_list)}
    ri = {r: k for k, r in enumerate(tree_list)}
    labels = [(ti[m], ri[r]) for m, r in pairs]
    return CRFModel(tag_list, tree_list, labels, sorted(ot), sorted(orr))


def train_crf(examples, config: CRFConfig | None = None, rng: np.random.Generator | None = None,
              weights=None) -> CRFModel:
    """Fit the CRF by maximizing weighted conditional log-likelihood with an L2 penalty.

    ``examples`` are annotated sentences or (forms, lemmata, tags) triples.
    Zero-weight examples are dropped before any inventory is built.
    """
    config = config or CRFConfig()
    config.validate()
    rng = rng if rng is not None else np.random.default_rng(0)
    kept = drop_zero([_triples(e) for e in examples], weights)
    if not kept:
        raise ConfigError("CRF training needs at least one sentence with positive weight")
    data = [e for e, _ in kept]
    w_sent = np.array([w for _, w in kept])
    model = build_crf(data)
    b = model.prepare([f for f, _, _ in data])
    gold = np.array([model.label_index[(model.tag_index[m], model.tree_index[EditTree.extract(f, l)])]
                     for forms, lemmata, tags in data for f, l, m in zip(forms, lemmata, tags)])
    theta0 = rng.normal(0.0, config.init_scale, model.n_params) if config.init_scale > 0 else np.zeros(model.n_params)
    model.set_theta(theta0)

    def f(theta):
        model.set_theta(theta)
        return model.objective(b, gold, w_sent, config.l2)

    if config.optimizer == "lbfgs":
        def neg(theta):
            val, grad = f(theta)
            model.history.append(val)
            return -val, -grad

        res = minimize(neg, theta0, jac=True, method="L-BFGS-B",
                       options={"maxiter": config.steps, "ftol": config.tol, "gtol": 1e-8})
        theta = res.x
    else:
        theta, total_w = theta0, float(w_sent.sum())
        for _ in range(config.steps):
            val, grad = f(theta)
            model.history.append(val)
            theta = theta + config.step_size * grad / total_w
    model.set_theta(theta)
    model.final_objective = f(theta)[0]
    return model
