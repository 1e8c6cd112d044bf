"""A small pre-norm transformer encoder classifier in numpy with hand-written backprop.

Layout per layer::

    x = x + MultiHeadAttention(LayerNorm(x))
    x = x + FeedForward(LayerNorm(x))

followed by a final LayerNorm, a mean over non-padding positions and a
linear head producing two logits (index 0 = REAL, 1 = FAKE). Everything runs
in float64.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .corpus import Label
from .linear import TrainLog, TrainingError

PAD, UNK = 0, 1
LN_EPS = 1e-5
_GELU_C = math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class EncoderConfig:
    vocab_size: int
    d_model: int = 64
    heads: int = 4
    layers: int = 2
    d_ff: int = 128
    max_len: int = 128
    seed: int = 42

    def __post_init__(self):
        if self.d_model % self.heads:
            raise ValueError(f"d_model {self.d_model} is not divisible by heads {self.heads}")
        if self.max_len < 1:
            raise ValueError("max_len must be at least 1")

    @property
    def head_dim(self) -> int:
        return self.d_model // self.heads

    def parameter_count(self) -> int:
        """Closed form for the number of scalar parameters.

        embeddings (V + max_len) * d; per layer four d x d projections with
        biases, two layer norms and the two feed-forward maps; a final layer
        norm; a d x 2 head with bias.
        """
        d, f = self.d_model, self.d_ff
        per_layer = 4 * (d * d + d) + 2 * (2 * d) + (d * f + f) + (f * d + d)
        return (self.vocab_size + self.max_len) * d + self.layers * per_layer + 2 * d + 2 * d + 2


def parameter_shapes(cfg: EncoderConfig) -> dict[str, tuple[int, ...]]:
    d, f = cfg.d_model, cfg.d_ff
    shapes = {"tok_emb": (cfg.vocab_size, d), "pos_emb": (cfg.max_len, d)}
    for i in range(cfg.layers):
        p = f"layer{i}."
        shapes.update({
            p + "ln1_g": (d,), p + "ln1_b": (d,),
            p + "wq": (d, d), p + "bq": (d,),
            p + "wk": (d, d), p + "bk": (d,),
            p + "wv": (d, d), p + "bv": (d,),
            p + "wo": (d, d), p + "bo": (d,),
            p + "ln2_g": (d,), p + "ln2_b": (d,),
            p + "w1": (d, f), p + "b1": (f,),
            p + "w2": (f, d), p + "b2": (d,),
        })
    shapes.update({"lnf_g": (d,), "lnf_b": (d,), "head_w": (d, 2), "head_b": (2,)})
    return shapes


@dataclass
class EncoderModel:
    config: EncoderConfig
    params: dict[str, np.ndarray]

    @classmethod
    def init(cls, cfg: EncoderConfig) -> "EncoderModel":
        rng = np.random.Generator(np.random.PCG64(cfg.seed))
        params = {}
        for name, shape in parameter_shapes(cfg).items():
            leaf = name.split(".")[-1]
            if leaf.endswith("_g"):
                params[name] = np.ones(shape)
            elif leaf in ("tok_emb", "pos_emb", "head_w"):
                # a small head keeps the initial logits near zero (loss near ln 2)
                params[name] = rng.normal(0.0, 0.02, shape)
            elif len(shape) == 2:
                params[name] = rng.normal(0.0, 1.0 / math.sqrt(shape[0]), shape)
            else:
                params[name] = np.zeros(shape)
        return cls(cfg, params)

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.params.items()}

    def parameter_count(self) -> int:
        return sum(v.size for v in self.params.values())


@dataclass
class Batch:
    tokens: np.ndarray  # (B, L) int64
    pad_mask: np.ndarray  # (B, L) bool, True at padding
    labels: np.ndarray | None = None  # (B,) int64

    def __post_init__(self):
        if self.tokens.shape != self.pad_mask.shape:
            raise ValueError("tokens and pad_mask shapes differ")
        if not (self.tokens[self.pad_mask] == PAD).all():
            raise ValueError("pad_mask marks a non-padding token")
        if ((self.tokens == PAD) != self.pad_mask).any():
            raise ValueError("padding token outside pad_mask")


# ---------------------------------------------------------------------------
# vocabulary and batching


@dataclass
class TokenVocab:
    """Index 0 is padding, 1 is the unknown-token sentinel."""

    tokens: list[str]
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.index = {t: i for i, t in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    @classmethod
    def build(cls, docs: Iterable[Iterable[str]], min_count: int = 2) -> "TokenVocab":
        counts = Counter(t for d in docs for t in d)
        kept = sorted(t for t, c in counts.items() if c >= min_count)
        return cls(["<pad>", "<unk>"] + kept)

    def encode(self, doc: Iterable[str]) -> list[int]:
        ids = [self.index.get(t, UNK) for t in doc]
        return ids or [UNK]


def make_batch(vocab: TokenVocab, docs: Sequence[Iterable[str]], max_len: int, labels=None) -> Batch:
    """Pad to the longest document in the batch; longer documents are truncated
    to ``max_len``. An empty document becomes a single UNK token."""
    encoded = [vocab.encode(d)[:max_len] for d in docs]
    width = max(len(e) for e in encoded)
    tokens = np.full((len(encoded), width), PAD, dtype=np.int64)
    for i, e in enumerate(encoded):
        tokens[i, : len(e)] = e
    y = None if labels is None else np.asarray(labels, dtype=np.int64)
    return Batch(tokens, tokens == PAD, y)


# ---------------------------------------------------------------------------
# forward / backward pieces


def _layer_norm(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = xc * inv
    return xhat * g + b, (xhat, inv)


def _layer_norm_back(dy, g, cache):
    xhat, inv = cache
    dg = (dy * xhat).reshape(-1, xhat.shape[-1]).sum(axis=0)
    db = dy.reshape(-1, dy.shape[-1]).sum(axis=0)
    dxhat = dy * g
    dx = inv * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
    return dx, dg, db


def _gelu(x):
    t = np.tanh(_GELU_C * (x + 0.044715 * x**3))
    return 0.5 * x * (1.0 + t), t


def _gelu_back(dy, x, t):
    dinner = _GELU_C * (1.0 + 3 * 0.044715 * x * x)
    return dy * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner)


def _split_heads(x, heads):
    B, L, d = x.shape
    return x.reshape(B, L, heads, d // heads).transpose(0, 2, 1, 3)


def _merge_heads(x):
    B, h, L, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(B, L, h * dh)


def _forward(model: EncoderModel, batch: Batch, keep_cache: bool):
    cfg, P = model.config, model.params
    tokens = batch.tokens[:, : cfg.max_len]
    pad = batch.pad_mask[:, : cfg.max_len]
    B, L = tokens.shape
    key_bias = np.where(pad, -np.inf, 0.0)[:, None, None, :]
    scale = 1.0 / math.sqrt(cfg.head_dim)

    x = P["tok_emb"][tokens] + P["pos_emb"][:L]
    caches, maps = [], []
    for i in range(cfg.layers):
        p = f"layer{i}."
        c = {"x_in": x}
        a, c["ln1"] = _layer_norm(x, P[p + "ln1_g"], P[p + "ln1_b"])
        q = _split_heads(a @ P[p + "wq"] + P[p + "bq"], cfg.heads)
        k = _split_heads(a @ P[p + "wk"] + P[p + "bk"], cfg.heads)
        v = _split_heads(a @ P[p + "wv"] + P[p + "bv"], cfg.heads)
        s = q @ k.transpose(0, 1, 3, 2) * scale + key_bias
        s = s - s.max(axis=-1, keepdims=True)
        e = np.exp(s)
        A = e / e.sum(axis=-1, keepdims=True)
        ctx = _merge_heads(A @ v)
        x = x + ctx @ P[p + "wo"] + P[p + "bo"]
        c2, c["ln2"] = _layer_norm(x, P[p + "ln2_g"], P[p + "ln2_b"])
        hpre = c2 @ P[p + "w1"] + P[p + "b1"]
        hact, t = _gelu(hpre)
        x = x + hact @ P[p + "w2"] + P[p + "b2"]
        maps.append(A)
        if keep_cache:
            c.update(a=a, q=q, k=k, v=v, A=A, ctx=ctx, c2=c2, hpre=hpre, hact=hact, t=t)
            caches.append(c)
    z, lnf = _layer_norm(x, P["lnf_g"], P["lnf_b"])
    keep = (~pad).astype(np.float64)
    counts = keep.sum(axis=1, keepdims=True)
    pooled = (z * keep[:, :, None]).sum(axis=1) / counts
    logits = pooled @ P["head_w"] + P["head_b"]
    cache = None
    if keep_cache:
        cache = dict(tokens=tokens, keep=keep, counts=counts, pooled=pooled, lnf=lnf,
                     layers=caches, scale=scale, L=L)
    return logits, np.stack(maps), cache


def encode_forward(model: EncoderModel, batch: Batch) -> tuple[np.ndarray, np.ndarray]:
    """Logits ``(B, 2)`` and attention maps ``(layers, heads, B, L, L)``.

    Sequences longer than ``max_len`` are truncated.
    """
    logits, maps, _ = _forward(model, batch, keep_cache=False)
    return logits, maps.transpose(0, 2, 1, 3, 4)


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    lse = np.logaddexp(logits[:, 0], logits[:, 1])
    return float((lse - logits[np.arange(len(labels)), labels]).mean())


def loss_and_grad(model: EncoderModel, batch: Batch) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy and its exact gradient for every parameter."""
    cfg, P = model.config, model.params
    logits, _, cache = _forward(model, batch, keep_cache=True)
    labels = batch.labels
    B = len(labels)
    loss = cross_entropy(logits, labels)
    grads = model.zeros_like()

    probs = np.exp(logits - np.logaddexp(logits[:, :1], logits[:, 1:]))
    dlogits = probs
    dlogits[np.arange(B), labels] -= 1.0
    dlogits /= B
    grads["head_w"] = cache["pooled"].T @ dlogits
    grads["head_b"] = dlogits.sum(axis=0)
    dpooled = dlogits @ P["head_w"].T
    dz = dpooled[:, None, :] * (cache["keep"] / cache["counts"])[:, :, None]
    dx, grads["lnf_g"], grads["lnf_b"] = _layer_norm_back(dz, P["lnf_g"], cache["lnf"])

    for i in reversed(range(cfg.layers)):
        p = f"layer{i}."
        c = cache["layers"][i]
        # feed-forward block
        dhact = dx @ P[p + "w2"].T
        grads[p + "w2"] = _outer_sum(c["hact"], dx)
        grads[p + "b2"] = dx.sum(axis=(0, 1))
        dhpre = _gelu_back(dhact, c["hpre"], c["t"])
        grads[p + "w1"] = _outer_sum(c["c2"], dhpre)
        grads[p + "b1"] = dhpre.sum(axis=(0, 1))
        dc2 = dhpre @ P[p + "w1"].T
        dln2, grads[p + "ln2_g"], grads[p + "ln2_b"] = _layer_norm_back(dc2, P[p + "ln2_g"], c["ln2"])
        dx = dx + dln2
        # attention block
        grads[p + "wo"] = _outer_sum(c["ctx"], dx)
        grads[p + "bo"] = dx.sum(axis=(0, 1))
        dctx = _split_heads(dx @ P[p + "wo"].T, cfg.heads)
        A, q, k, v = c["A"], c["q"], c["k"], c["v"]
        dA = dctx @ v.transpose(0, 1, 3, 2)
        dv = A.transpose(0, 1, 3, 2) @ dctx
        ds = A * (dA - (dA * A).sum(axis=-1, keepdims=True)) * cache["scale"]
        dq = ds @ k
        dk = ds.transpose(0, 1, 3, 2) @ q
        da = np.zeros_like(c["a"])
        for name, dh in (("q", dq), ("k", dk), ("v", dv)):
            dflat = _merge_heads(dh)
            grads[p + "w" + name] = _outer_sum(c["a"], dflat)
            grads[p + "b" + name] = dflat.sum(axis=(0, 1))
            da += dflat @ P[p + "w" + name].T
        dln1, grads[p + "ln1_g"], grads[p + "ln1_b"] = _layer_norm_back(da, P[p + "ln1_g"], c["ln1"])
        dx = dx + dln1

    np.add.at(grads["tok_emb"], cache["tokens"], dx)
    grads["pos_emb"][: cache["L"]] = dx.sum(axis=0)
    return loss, grads


def _outer_sum(a, b):
    return a.reshape(-1, a.shape[-1]).T @ b.reshape(-1, b.shape[-1])


# ---------------------------------------------------------------------------
# optimization


@dataclass(frozen=True)
class AdamParams:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def for_model(cls, model: EncoderModel) -> "AdamState":
        return cls(model.zeros_like(), model.zeros_like())


def train_step(model: EncoderModel, batch: Batch, state: AdamState,
               params: AdamParams = AdamParams()) -> tuple[float, AdamState]:
    """One Adam update on ``batch``; parameters are modified in place."""
    loss, grads = loss_and_grad(model, batch)
    if not math.isfinite(loss):
        raise TrainingError(f"encoder loss became non-finite at step {state.step}")
    state.step += 1
    b1, b2 = params.beta1, params.beta2
    corr1 = 1.0 - b1 ** state.step
    corr2 = 1.0 - b2 ** state.step
    for name, g in grads.items():
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        model.params[name] -= params.lr * (m / corr1) / (np.sqrt(v / corr2) + params.eps)
    return loss, state


@dataclass(frozen=True)
class EncoderTrainParams:
    epochs: int = 3
    batch_size: int = 32
    lr: float = 1e-3
    min_count: int = 2
    seed: int = 42


def train_encoder(docs: Sequence[Sequence[str]], labels, cfg_overrides: dict | None = None,
                  params: EncoderTrainParams = EncoderTrainParams()) -> tuple[EncoderModel, TokenVocab, TrainLog]:
    """Build a vocabulary, then run shuffled mini-batch Adam for ``epochs``.

    The log holds the mean training loss of each epoch.
    """
    vocab = TokenVocab.build(docs, params.min_count)
    cfg = EncoderConfig(vocab_size=len(vocab), seed=params.seed, **(cfg_overrides or {}))
    model = EncoderModel.init(cfg)
    state = AdamState.for_model(model)
    adam = AdamParams(lr=params.lr)
    labels = np.asarray(labels, dtype=np.int64)
    rng = np.random.Generator(np.random.PCG64(params.seed + 1))
    log = TrainLog()
    for _ in range(params.epochs):
        order = rng.permutation(len(docs))
        losses = []
        for start in range(0, len(order), params.batch_size):
            idx = order[start:start + params.batch_size]
            batch = make_batch(vocab, [docs[i] for i in idx], cfg.max_len, labels[idx])
            loss, state = train_step(model, batch, state, adam)
            losses.append(loss)
        log.objective.append(float(np.mean(losses)))
    return model, vocab, log


def predict_logits(model: EncoderModel, vocab: TokenVocab, docs: Sequence[Sequence[str]],
                   batch_size: int = 64) -> np.ndarray:
    out = []
    for start in range(0, len(docs), batch_size):
        batch = make_batch(vocab, docs[start:start + batch_size], model.config.max_len)
        out.append(encode_forward(model, batch)[0])
    return np.vstack(out) if out else np.zeros((0, 2))


def encoder_predict(model: EncoderModel, docs: Sequence[Sequence[str]], vocab: TokenVocab) -> list[Label]:
    """FAKE only when its logit is strictly larger; ties go to REAL."""
    logits = predict_logits(model, vocab, docs)
    return [Label.FAKE if f > r else Label.REAL for r, f in logits]


# ---------------------------------------------------------------------------
# gradient checking


def numeric_gradient(model: EncoderModel, batch: Batch, name: str, h: float = 1e-4,
                     entries: np.ndarray | None = None) -> np.ndarray:
    """Central differences of the batch loss for one parameter block.

    ``entries`` restricts the check to a subset of flat indices; the rest of
    the returned array is NaN.
    """
    param = model.params[name]
    flat = param.reshape(-1)
    out = np.full(flat.shape, np.nan)
    idx = range(flat.size) if entries is None else entries
    for j in idx:
        old = flat[j]
        flat[j] = old + h
        up = cross_entropy(_forward(model, batch, False)[0], batch.labels)
        flat[j] = old - h
        down = cross_entropy(_forward(model, batch, False)[0], batch.labels)
        flat[j] = old
        out[j] = (up - down) / (2 * h)
    return out.reshape(param.shape)


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    """Largest elementwise ``|a - n| / max(|a|, |n|, floor)`` over checked entries."""
    mask = ~np.isnan(numeric)
    a, n = analytic[mask], numeric[mask]
    if not a.size:
        return 0.0
    return float((np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)).max())
