"""Encoder contract, boundary/matching heads, joint loss and analytic gradients.

The context representation ``E`` (n x d) feeds three heads:

* start:  ``softmax_rows(E @ t_start)``  -> n x 2
* end:    ``softmax_rows(E @ t_end)``    -> n x 2
* match:  ``sigmoid(match_weights . concat(E[i], E[j]))`` for candidate i <= j

The bundled toy encoder stands in for a pretrained transformer. Each
residual layer mixes a token with its neighbours and with left/right prefix
sums of the sequence, and is conditioned on the query twice: multiplicatively
through the mean query embedding, and through an exact-match indicator
marking context tokens whose surface string occurs in the query.

All gradients are derived by hand; ``tests/test_gradients.py`` checks them
against central finite differences.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import tempfile
import zipfile
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Protocol

import numpy as np

from .data import LabelTensors
from .errors import ContractError, EncoderOverflowError, ValidationError

CLS, SEP, PAD, UNK = "[CLS]", "[SEP]", "[PAD]", "[UNK]"


# ---------------------------------------------------------------------------
# value types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EncoderInput:
    """``[CLS] q_1..q_m [SEP] x_1..x_n``; no trailing separator."""

    combined_tokens: tuple[str, ...]
    context_slice: slice

    @classmethod
    def build(cls, query_tokens: Sequence[str], context_tokens: Sequence[str]) -> EncoderInput:
        if not context_tokens:
            raise ValidationError("context must contain at least one token")
        combined = (CLS, *query_tokens, SEP, *context_tokens)
        start = len(query_tokens) + 2
        return cls(combined, slice(start, start + len(context_tokens)))

    @property
    def query_tokens(self) -> tuple[str, ...]:
        return self.combined_tokens[1:self.context_slice.start - 1]

    @property
    def context_tokens(self) -> tuple[str, ...]:
        return self.combined_tokens[self.context_slice]

    def __len__(self) -> int:
        return len(self.combined_tokens)


@dataclass
class HeadParams:
    t_start: np.ndarray
    t_end: np.ndarray
    match_weights: np.ndarray

    def __post_init__(self):
        d = self.t_start.shape[0]
        if self.t_start.shape != (d, 2) or self.t_end.shape != (d, 2):
            raise ValidationError("t_start and t_end must both be d x 2")
        if self.match_weights.shape != (2 * d,):
            raise ValidationError(f"match_weights must have length 2d = {2 * d}")

    @property
    def dim(self) -> int:
        return self.t_start.shape[0]


@dataclass
class ProbOutputs:
    p_start: np.ndarray
    p_end: np.ndarray
    p_match: dict[tuple[int, int], float] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.p_start.shape[0]


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"loss weight {name} must lie in [0, 1], got {v}")


class LossBreakdown(NamedTuple):
    total: float
    start: float
    end: float
    span: float


class Encoder(Protocol):
    """Anything that maps an ``EncoderInput`` to an n x d context matrix.

    Adapters around subword encoders should report rows at native-token
    granularity, see :func:`align_subword_rows`.
    """

    dim: int
    max_length: int

    def encode(self, inp: EncoderInput) -> np.ndarray: ...


def align_subword_rows(sub_rows: np.ndarray, word_of_subword: Sequence[int], n_words: int,
                       which: str = "first") -> np.ndarray:
    """Pick, per native token, the row of its first (or last) subword."""
    if which not in ("first", "last"):
        raise ValueError("which must be 'first' or 'last'")
    rows = np.full(n_words, -1)
    order = range(len(word_of_subword))
    if which == "first":
        order = reversed(order)
    for k in order:
        w = word_of_subword[k]
        if w is not None and w >= 0:
            rows[w] = k
    if (rows < 0).any():
        raise ContractError(f"native tokens without subwords: {np.flatnonzero(rows < 0).tolist()}")
    return sub_rows[rows]


# ---------------------------------------------------------------------------
# numerics
# ---------------------------------------------------------------------------


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    ez = np.exp(z)
    return ez / ez.sum(axis=-1, keepdims=True)


def log_softmax_rows(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _log_sigmoid(x: np.ndarray) -> np.ndarray:
    return -np.logaddexp(0.0, -x)


def _check_repr(e: np.ndarray, d: int) -> None:
    if e.ndim != 2 or e.shape[1] != d:
        raise ValidationError(f"representation must be n x {d}, got shape {e.shape}")


def predict_start(e: np.ndarray, params: HeadParams) -> np.ndarray:
    _check_repr(e, params.dim)
    return softmax_rows(e @ params.t_start)


def predict_end(e: np.ndarray, params: HeadParams) -> np.ndarray:
    _check_repr(e, params.dim)
    return softmax_rows(e @ params.t_end)


def match_probability(e: np.ndarray, i: int, j: int, params: HeadParams) -> float:
    _check_repr(e, params.dim)
    if not 0 <= i <= j < e.shape[0]:
        raise ContractError(f"match pair ({i}, {j}) invalid for n={e.shape[0]}; need 0 <= i <= j < n")
    z = params.match_weights @ np.concatenate([e[i], e[j]])
    return float(sigmoid(z))


def candidate_pairs(gold: LabelTensors | None, i_hat_start: Iterable[int],
                    i_hat_end: Iterable[int]) -> set[tuple[int, int]]:
    """Pairs i <= j over predicted (and, when training, gold) boundaries."""
    starts, ends = set(i_hat_start), set(i_hat_end)
    if gold is not None:
        starts |= gold.starts
        ends |= gold.ends
    return {(i, j) for i in starts for j in ends if i <= j}


def compute_loss(probs: ProbOutputs, gold: LabelTensors, w: LossWeights = LossWeights()) -> LossBreakdown:
    """Weighted start/end cross-entropy plus pairwise binary cross-entropy.

    Start and end terms are averaged over tokens, the matching term over the
    candidate pairs present in ``probs.p_match``.
    """
    n = probs.n
    if gold.n != n:
        raise ContractError(f"gold length {gold.n} != prediction length {n}")
    missing = gold.y_match - probs.p_match.keys()
    if missing:
        raise ContractError(f"positive gold pairs absent from candidate set: {sorted(missing)}")
    rows = np.arange(n)
    with np.errstate(divide="ignore"):
        l_start = float(-np.log(probs.p_start[rows, gold.y_start]).mean())
        l_end = float(-np.log(probs.p_end[rows, gold.y_end]).mean())
        if probs.p_match:
            terms = [np.log(p) if pair in gold.y_match else np.log1p(-p)
                     for pair, p in probs.p_match.items()]
            l_span = float(-np.mean(terms))
        else:
            l_span = 0.0
    # 0 * inf must not poison a disabled term
    parts = [(w.alpha, l_start), (w.beta, l_end), (w.gamma, l_span)]
    total = sum(c * v for c, v in parts if c != 0.0)
    return LossBreakdown(float(total), l_start, l_end, l_span)


# ---------------------------------------------------------------------------
# vocabulary and batching
# ---------------------------------------------------------------------------


class Vocab:
    def __init__(self, tokens: Iterable[str]):
        self.itos = [PAD, UNK]
        for t in tokens:
            if t not in (PAD, UNK):
                self.itos.append(t)
        if len(set(self.itos)) != len(self.itos):
            raise ValidationError("vocabulary contains duplicate tokens")
        self.stoi = {t: i for i, t in enumerate(self.itos)}

    @classmethod
    def build(cls, token_streams: Iterable[Iterable[str]]) -> Vocab:
        seen: dict[str, None] = {}
        for stream in token_streams:
            for t in stream:
                seen.setdefault(t, None)
        return cls(sorted(seen))

    def ids(self, tokens: Iterable[str]) -> list[int]:
        return [self.stoi.get(t, 1) for t in tokens]

    def __len__(self) -> int:
        return len(self.itos)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocab) and self.itos == other.itos


@dataclass
class Batch:
    ctx_ids: np.ndarray   # (B, N) int
    mask: np.ndarray      # (B, N) float, 1 on real tokens
    qry_ids: np.ndarray   # (B, M) int
    qmask: np.ndarray     # (B, M) float
    exact: np.ndarray     # (B, N) float, context token string occurs in the query
    lengths: np.ndarray   # (B,) int

    @property
    def size(self) -> int:
        return self.ctx_ids.shape[0]


def make_batch(vocab: Vocab, inputs: Sequence[EncoderInput]) -> Batch:
    B = len(inputs)
    N = max(len(inp.context_tokens) for inp in inputs)
    M = max(max(len(inp.query_tokens) for inp in inputs), 1)
    ctx = np.zeros((B, N), dtype=np.int64)
    mask = np.zeros((B, N))
    qry = np.zeros((B, M), dtype=np.int64)
    qmask = np.zeros((B, M))
    exact = np.zeros((B, N))
    for b, inp in enumerate(inputs):
        c, q = inp.context_tokens, inp.query_tokens
        ctx[b, :len(c)] = vocab.ids(c)
        mask[b, :len(c)] = 1.0
        qry[b, :len(q)] = vocab.ids(q)
        qmask[b, :len(q)] = 1.0
        qset = set(q)
        exact[b, :len(c)] = [1.0 if t in qset else 0.0 for t in c]
    return Batch(ctx, mask, qry, qmask, exact, mask.sum(axis=1).astype(np.int64))


# ---------------------------------------------------------------------------
# sequence mixing primitives (axis 1 is the token axis)
# ---------------------------------------------------------------------------


def _shift_prev(x):
    out = np.zeros_like(x)
    out[:, 1:] = x[:, :-1]
    return out


def _shift_next(x):
    out = np.zeros_like(x)
    out[:, :-1] = x[:, 1:]
    return out


def _prefix_excl(x):
    return np.cumsum(x, axis=1) - x


def _suffix_excl(x):
    return np.cumsum(x[:, ::-1], axis=1)[:, ::-1] - x


_MIX = ("self", "prev", "next", "left", "right")


@dataclass
class ForwardState:
    batch: Batch
    qbar: np.ndarray
    layer_inputs: list          # per layer: (A, mixed views dict)
    layer_outputs: list         # per layer: tanh branch added to the residual stream
    e: np.ndarray               # (B, N, d) masked context representation
    start_logits: np.ndarray    # (B, N, 2)
    end_logits: np.ndarray

    def repr(self, b: int) -> np.ndarray:
        return self.e[b, :self.batch.lengths[b]]


@dataclass
class ModelConfig:
    dim: int = 16
    layers: int = 2
    max_length: int = 512
    encoder: str = "toy"


class MrcModel:
    """Toy query-conditioned encoder plus the three span heads.

    Parameters live in ``self.params`` (name -> float64 array); the same
    names are used for gradients and in checkpoints.
    """

    def __init__(self, vocab: Vocab, config: ModelConfig, params: Mapping[str, np.ndarray] | None = None,
                 meta: Mapping | None = None):
        if config.dim < 1 or config.layers < 1:
            raise ValidationError("encoder dim and layers must be >= 1")
        self.vocab = vocab
        self.config = config
        self.meta = dict(meta or {})
        self.params: dict[str, np.ndarray] = {}
        if params is not None:
            expected = self.param_shapes()
            if set(params) != set(expected):
                raise ValidationError(f"parameter names mismatch: {sorted(set(params) ^ set(expected))}")
            for k, shape in expected.items():
                arr = np.asarray(params[k], dtype=np.float64)
                if arr.shape != shape:
                    raise ValidationError(f"parameter {k} has shape {arr.shape}, expected {shape}")
                self.params[k] = arr.copy()

    # -- construction ------------------------------------------------------

    @property
    def dim(self) -> int:
        return self.config.dim

    @property
    def max_length(self) -> int:
        return self.config.max_length

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        d = self.config.dim
        width = 2 * d + 1
        shapes: dict[str, tuple[int, ...]] = {"enc.emb": (len(self.vocab), d)}
        for layer in range(self.config.layers):
            for m in _MIX:
                shapes[f"enc.l{layer}.{m}"] = (width, d)
            shapes[f"enc.l{layer}.bias"] = (d,)
        shapes["head.t_start"] = (d, 2)
        shapes["head.t_end"] = (d, 2)
        shapes["head.match"] = (2 * d,)
        return shapes

    @classmethod
    def initialize(cls, vocab: Vocab, config: ModelConfig, seed: int, meta: Mapping | None = None) -> MrcModel:
        """Centered uniform init: heads and embeddings at scale 1/sqrt(d),
        mixing matrices at sqrt(3/fan_in), prefix-sum mixing 10x smaller."""
        rng = np.random.default_rng(seed)
        model = cls(vocab, config, meta=meta)
        d = config.dim
        for name, shape in model.param_shapes().items():
            if name.endswith(".bias"):
                model.params[name] = np.zeros(shape)
                continue
            if name.startswith("head.") or name == "enc.emb":
                scale = 1.0 / np.sqrt(d)
            else:
                scale = np.sqrt(3.0 / shape[0])
                if name.endswith((".left", ".right")):
                    scale *= 0.1
            model.params[name] = rng.uniform(-scale, scale, size=shape)
        return model

    def head_params(self) -> HeadParams:
        return HeadParams(self.params["head.t_start"], self.params["head.t_end"], self.params["head.match"])

    def copy(self) -> MrcModel:
        return MrcModel(self.vocab, self.config, self.params, self.meta)

    # -- forward -----------------------------------------------------------

    def check_length(self, inp: EncoderInput) -> None:
        if len(inp) > self.config.max_length:
            raise EncoderOverflowError(
                f"combined sequence of {len(inp)} tokens exceeds encoder max_length {self.config.max_length}")

    def forward(self, batch: Batch) -> ForwardState:
        p = self.params
        m3 = batch.mask[..., None]
        qcount = np.maximum(batch.qmask.sum(axis=1, keepdims=True), 1.0)
        qbar = (p["enc.emb"][batch.qry_ids] * batch.qmask[..., None]).sum(axis=1) / qcount
        h = p["enc.emb"][batch.ctx_ids] * m3
        layer_inputs, layer_outputs = [], []
        for layer in range(self.config.layers):
            a = np.concatenate([h, h * qbar[:, None, :], batch.exact[..., None]], axis=-1) * m3
            views = {"self": a, "prev": _shift_prev(a), "next": _shift_next(a),
                     "left": _prefix_excl(a), "right": _suffix_excl(a)}
            z = p[f"enc.l{layer}.bias"] + sum(views[m] @ p[f"enc.l{layer}.{m}"] for m in _MIX)
            t = np.tanh(z)
            h = h + t
            layer_inputs.append((a, views))
            layer_outputs.append(t)
        e = h * m3
        return ForwardState(batch, qbar, layer_inputs, layer_outputs, e,
                            e @ p["head.t_start"], e @ p["head.t_end"])

    def encode(self, inp: EncoderInput) -> np.ndarray:
        """Context-only representation (query rows dropped), shape n x d."""
        self.check_length(inp)
        state = self.forward(make_batch(self.vocab, [inp]))
        return state.repr(0).copy()

    def encode_batch(self, inputs: Sequence[EncoderInput]) -> ForwardState:
        for inp in inputs:
            self.check_length(inp)
        return self.forward(make_batch(self.vocab, inputs))

    def match_logits(self, state: ForwardState, pb, pi, pj) -> np.ndarray:
        d = self.config.dim
        m = self.params["head.match"]
        return state.e[pb, pi] @ m[:d] + state.e[pb, pj] @ m[d:]

    def boundary_sets(self, state: ForwardState, b: int) -> tuple[set[int], set[int]]:
        n = state.batch.lengths[b]
        ps = softmax_rows(state.start_logits[b, :n])
        pe = softmax_rows(state.end_logits[b, :n])
        return (set(np.flatnonzero(ps[:, 1] > ps[:, 0]).tolist()),
                set(np.flatnonzero(pe[:, 1] > pe[:, 0]).tolist()))

    def prob_outputs(self, state: ForwardState, b: int, pairs: Iterable[tuple[int, int]] | None = None,
                     all_pairs: bool = False) -> ProbOutputs:
        """Probabilities for example ``b``.

        By default ``p_match`` covers the inference candidates (predicted
        starts x predicted ends, i <= j); ``all_pairs`` fills every i <= j.
        """
        n = int(state.batch.lengths[b])
        ps = softmax_rows(state.start_logits[b, :n])
        pe = softmax_rows(state.end_logits[b, :n])
        if pairs is None:
            if all_pairs:
                pairs = [(i, j) for i in range(n) for j in range(i, n)]
            else:
                starts = np.flatnonzero(ps[:, 1] > ps[:, 0])
                ends = np.flatnonzero(pe[:, 1] > pe[:, 0])
                pairs = [(i, j) for i in starts for j in ends if i <= j]
        pairs = sorted(pairs)
        p_match = {}
        if pairs:
            idx = np.array(pairs)
            probs = sigmoid(self.match_logits(state, np.full(len(idx), b), idx[:, 0], idx[:, 1]))
            p_match = {(int(i), int(j)): float(v) for (i, j), v in zip(pairs, probs)}
        return ProbOutputs(ps, pe, p_match)

    # -- loss and gradients -------------------------------------------------

    def training_candidates(self, state: ForwardState, golds: Sequence[LabelTensors]) -> list[set[tuple[int, int]]]:
        out = []
        for b, gold in enumerate(golds):
            starts, ends = self.boundary_sets(state, b)
            out.append(candidate_pairs(gold, starts, ends))
        return out

    def loss(self, state: ForwardState, golds: Sequence[LabelTensors], w: LossWeights,
             candidates: Sequence[Iterable[tuple[int, int]]]) -> tuple[LossBreakdown, dict]:
        """Batch-mean joint loss computed from logits, plus a backward cache."""
        batch = state.batch
        B = batch.size
        N = batch.mask.shape[1]
        ys = np.zeros((B, N), dtype=np.int64)
        ye = np.zeros((B, N), dtype=np.int64)
        for b, g in enumerate(golds):
            if g.n != batch.lengths[b]:
                raise ContractError(f"gold length {g.n} != context length {batch.lengths[b]}")
            ys[b, :g.n] = g.y_start
            ye[b, :g.n] = g.y_end
        inv_n = (1.0 / batch.lengths)[:, None]
        ls_logp = log_softmax_rows(state.start_logits)
        le_logp = log_softmax_rows(state.end_logits)
        l_start_b = -(np.take_along_axis(ls_logp, ys[..., None], -1)[..., 0] * batch.mask).sum(1) * inv_n[:, 0]
        l_end_b = -(np.take_along_axis(le_logp, ye[..., None], -1)[..., 0] * batch.mask).sum(1) * inv_n[:, 0]

        pb, pi, pj, py, pw = [], [], [], [], []
        for b, (g, cands) in enumerate(zip(golds, candidates)):
            cands = sorted(cands)
            missing = g.y_match - set(cands)
            if missing:
                raise ContractError(f"positive gold pairs absent from candidate set: {sorted(missing)}")
            for i, j in cands:
                pb.append(b); pi.append(i); pj.append(j)
                py.append(1.0 if (i, j) in g.y_match else 0.0)
                pw.append(1.0 / len(cands))
        pb, pi, pj = (np.asarray(x, dtype=np.int64) for x in (pb, pi, pj))
        py, pw = np.asarray(py), np.asarray(pw)
        zm = self.match_logits(state, pb, pi, pj) if len(pb) else np.zeros(0)
        pair_nll = -(py * _log_sigmoid(zm) + (1 - py) * _log_sigmoid(-zm))
        l_span_b = np.bincount(pb, weights=pw * pair_nll, minlength=B) if len(pb) else np.zeros(B)

        total_b = w.alpha * l_start_b + w.beta * l_end_b + w.gamma * l_span_b
        breakdown = LossBreakdown(float(total_b.mean()), float(l_start_b.mean()),
                                  float(l_end_b.mean()), float(l_span_b.mean()))
        cache = dict(ys=ys, ye=ye, inv_n=inv_n, pairs=(pb, pi, pj, py, pw), zm=zm)
        return breakdown, cache

    def loss_gradients(self, state: ForwardState, golds: Sequence[LabelTensors], w: LossWeights,
                       candidates: Sequence[Iterable[tuple[int, int]]] | None = None
                       ) -> tuple[LossBreakdown, dict[str, np.ndarray]]:
        """Joint loss and its gradient for every parameter.

        The encoder receives the summed contributions of all three terms.
        Without explicit ``candidates`` the training rule is used (gold plus
        predicted boundaries, i <= j).
        """
        if candidates is None:
            candidates = self.training_candidates(state, golds)
        breakdown, cache = self.loss(state, golds, w, candidates)
        p = self.params
        batch = state.batch
        B = batch.size
        d = self.config.dim
        m3 = batch.mask[..., None]
        grads = {k: np.zeros_like(v) for k, v in p.items()}

        # boundary heads
        scale = (cache["inv_n"] / B)[..., None] * m3
        g_start = (softmax_rows(state.start_logits) - np.eye(2)[cache["ys"]]) * scale * w.alpha
        g_end = (softmax_rows(state.end_logits) - np.eye(2)[cache["ye"]]) * scale * w.beta
        e = state.e
        grads["head.t_start"] = np.einsum("bnd,bnk->dk", e, g_start)
        grads["head.t_end"] = np.einsum("bnd,bnk->dk", e, g_end)
        de = g_start @ p["head.t_start"].T + g_end @ p["head.t_end"].T

        # matching head
        pb, pi, pj, py, pw = cache["pairs"]
        if len(pb) and w.gamma != 0.0:
            gz = (sigmoid(cache["zm"]) - py) * pw * (w.gamma / B)
            m = p["head.match"]
            grads["head.match"] = np.concatenate([gz @ e[pb, pi], gz @ e[pb, pj]])
            np.add.at(de, (pb, pi), gz[:, None] * m[:d])
            np.add.at(de, (pb, pj), gz[:, None] * m[d:])

        # encoder
        dh = de * m3
        dqbar = np.zeros_like(state.qbar)
        for layer in reversed(range(self.config.layers)):
            a, views = state.layer_inputs[layer]
            t = state.layer_outputs[layer]
            dz = dh * (1.0 - t * t)
            grads[f"enc.l{layer}.bias"] = dz.sum(axis=(0, 1))
            dviews = {}
            for mname in _MIX:
                wmat = p[f"enc.l{layer}.{mname}"]
                grads[f"enc.l{layer}.{mname}"] = np.einsum("bnD,bnd->Dd", views[mname], dz)
                dviews[mname] = dz @ wmat.T
            da = (dviews["self"] + _shift_next(dviews["prev"]) + _shift_prev(dviews["next"])
                  + _suffix_excl(dviews["left"]) + _prefix_excl(dviews["right"])) * m3
            h_in = a[..., :d]
            gated = da[..., d:2 * d]
            qb = state.qbar[:, None, :]
            # a[..., :d] is the masked layer input, a[..., d:2d] = input * qbar;
            # dh already carries the residual path
            dh = dh + da[..., :d] + gated * qb
            dqbar += (gated * h_in).sum(axis=1)
        dx0 = dh * m3
        demb = grads["enc.emb"]
        np.add.at(demb, batch.ctx_ids, dx0)
        qcount = np.maximum(batch.qmask.sum(axis=1, keepdims=True), 1.0)
        dq = (dqbar / qcount)[:, None, :] * batch.qmask[..., None]
        np.add.at(demb, batch.qry_ids, dq)
        return breakdown, grads

    # -- persistence --------------------------------------------------------

    def manifest(self) -> dict:
        return {"encoder": self.config.encoder, "dim": self.config.dim, "layers": self.config.layers,
                "max_length": self.config.max_length, "vocab": self.vocab.itos,
                "params": list(self.params), **self.meta}

    def save(self, path: str | Path) -> None:
        """Write a deterministic zip archive, atomically (temp file + rename)."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=path.name + ".", suffix=".tmp", dir=path.parent)
        try:
            with os.fdopen(fd, "wb") as f, zipfile.ZipFile(f, "w", zipfile.ZIP_STORED) as zf:
                info = zipfile.ZipInfo("manifest.json", date_time=(1980, 1, 1, 0, 0, 0))
                zf.writestr(info, json.dumps(self.manifest(), sort_keys=True, indent=1))
                for name, arr in self.params.items():
                    buf = io.BytesIO()
                    np.lib.format.write_array(buf, np.ascontiguousarray(arr, dtype="<f8"), allow_pickle=False)
                    zf.writestr(zipfile.ZipInfo(f"{name}.npy", date_time=(1980, 1, 1, 0, 0, 0)),
                                buf.getvalue())
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    @classmethod
    def load(cls, path: str | Path) -> MrcModel:
        try:
            with zipfile.ZipFile(path) as zf:
                manifest = json.loads(zf.read("manifest.json"))
                params = {name: np.lib.format.read_array(io.BytesIO(zf.read(f"{name}.npy")),
                                                         allow_pickle=False)
                          for name in manifest["params"]}
        except (OSError, KeyError, zipfile.BadZipFile, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot load checkpoint {path}: {exc}") from exc
        if manifest.get("encoder") != "toy":
            raise ValidationError(f"unsupported encoder kind {manifest.get('encoder')!r}")
        config = ModelConfig(dim=manifest["dim"], layers=manifest["layers"], max_length=manifest["max_length"])
        core = {"encoder", "dim", "layers", "max_length", "vocab", "params"}
        meta = {k: v for k, v in manifest.items() if k not in core}
        return cls(Vocab(manifest["vocab"][2:]), config, params, meta)


def toy_encode(inp: EncoderInput, model: MrcModel) -> np.ndarray:
    return model.encode(inp)


def config_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
