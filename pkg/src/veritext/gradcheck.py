"""Finite-difference checks for every hand-written gradient."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoder import EncoderConfig, EncoderModel, TokenVocab, loss_and_grad, make_batch, numeric_gradient, relative_error
from .linear import logreg_gradient, logreg_objective

LOGREG_H, LOGREG_THRESHOLD = 1e-6, 1e-6
ENCODER_H, ENCODER_THRESHOLD = 1e-4, 1e-4


@dataclass(frozen=True)
class BlockResult:
    block: str
    error: float
    threshold: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.error) and self.error < self.threshold)


def logreg_problem(seed: int = 0):
    """Random 5x4 problem with a nonzero starting point."""
    rng = np.random.Generator(np.random.PCG64(seed))
    X = rng.normal(size=(5, 4))
    y = np.array([0, 1, 1, 0, 1])
    return X, y, rng.normal(size=4), float(rng.normal()), 0.1


def check_logreg(seed: int = 0, corrupt: bool = False) -> list[BlockResult]:
    X, y, w, b, reg = logreg_problem(seed)
    gw, gb = logreg_gradient(w, b, X, y, reg)
    if corrupt:
        gw = gw * 1.01
    h = LOGREG_H
    num_w = np.empty_like(w)
    for j in range(w.size):
        e = np.zeros_like(w)
        e[j] = h
        num_w[j] = (logreg_objective(w + e, b, X, y, reg) - logreg_objective(w - e, b, X, y, reg)) / (2 * h)
    num_b = (logreg_objective(w, b + h, X, y, reg) - logreg_objective(w, b - h, X, y, reg)) / (2 * h)
    return [
        BlockResult("logreg.weights", relative_error(gw, num_w), LOGREG_THRESHOLD),
        BlockResult("logreg.bias", relative_error(np.array([gb]), np.array([num_b])), LOGREG_THRESHOLD),
    ]


def encoder_fixture(seed: int = 7):
    """Small encoder and a 2-example batch of length 6 (the second one padded)."""
    vocab = TokenVocab(["<pad>", "<unk>"] + [f"w{i}" for i in range(10)])
    cfg = EncoderConfig(len(vocab), d_model=8, heads=2, layers=2, d_ff=12, max_len=6, seed=seed)
    model = EncoderModel.init(cfg)
    # The default 0.02 embedding scale sits below LayerNorm, which amplifies a
    # step of h by 1/0.02; at unit scale h=1e-4 is a small step again.
    rng = np.random.Generator(np.random.PCG64(seed + 1))
    for name in ("tok_emb", "pos_emb"):
        model.params[name] = rng.normal(size=model.params[name].shape)
    docs = [["w1", "w2", "w3", "w4", "w5", "w6"], ["w7", "w0", "oov"]]
    batch = make_batch(vocab, docs, cfg.max_len, labels=[1, 0])
    return model, batch


def check_encoder(seed: int = 7, corrupt: str | None = None) -> list[BlockResult]:
    model, batch = encoder_fixture(seed)
    _, grads = loss_and_grad(model, batch)
    out = []
    for name in model.params:
        g = grads[name]
        if name == corrupt:
            g = g + 1e-3 * np.sign(g + 1e-300)
        num = numeric_gradient(model, batch, name, ENCODER_H)
        out.append(BlockResult("encoder." + name, relative_error(g, num), ENCODER_THRESHOLD))
    return out


def run_gradcheck(corrupt: str | None = None) -> list[BlockResult]:
    """``corrupt`` names a block whose analytic gradient is perturbed before
    comparison (``logreg`` or an encoder parameter name); it exists so the
    failure path can be exercised."""
    return check_logreg(corrupt=corrupt == "logreg") + check_encoder(corrupt=corrupt)
