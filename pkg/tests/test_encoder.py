import math

import numpy as np
import pytest

from veritext.corpus import Label
from veritext.encoder import (
    PAD, UNK, AdamParams, AdamState, Batch, EncoderConfig, EncoderModel, TokenVocab, cross_entropy,
    encode_forward, encoder_predict, loss_and_grad, make_batch, numeric_gradient, parameter_shapes,
    predict_logits, relative_error, train_encoder, train_step, EncoderTrainParams,
)
from veritext.gradcheck import ENCODER_THRESHOLD, check_encoder, encoder_fixture

from synthetic import overfit_suite


def _model(vocab_size=20, **kw):
    return EncoderModel.init(EncoderConfig(vocab_size, **kw))


def _random_batch(rng, vocab_size, B=3, L=7):
    lengths = rng.integers(1, L + 1, size=B)
    lengths[0] = L
    tokens = np.zeros((B, L), dtype=np.int64)
    for i, n in enumerate(lengths):
        tokens[i, :n] = rng.integers(1, vocab_size, size=n)
    return Batch(tokens, tokens == PAD, rng.integers(0, 2, size=B))


def test_gradient_check_every_block():
    results = check_encoder()
    assert len(results) == len(encoder_fixture()[0].params)
    worst = max(results, key=lambda r: r.error)
    assert worst.error < ENCODER_THRESHOLD, worst


def test_gradient_check_second_seed_subsampled():
    model, batch = encoder_fixture(seed=3)
    _, grads = loss_and_grad(model, batch)
    rng = np.random.default_rng(0)
    for name, p in model.params.items():
        entries = rng.choice(p.size, size=min(p.size, 6), replace=False)
        num = numeric_gradient(model, batch, name, 1e-4, entries)
        assert relative_error(grads[name], num) < 1e-4, name


def test_attention_rows_and_pad_keys():
    rng = np.random.default_rng(1)
    model = _model(30, d_model=16, heads=4, max_len=10)
    batch = _random_batch(rng, 30, B=4, L=9)
    _, maps = encode_forward(model, batch)
    assert maps.shape == (2, 4, 4, 9, 9)
    assert np.abs(maps.sum(axis=-1) - 1).max() <= 1e-6
    pad_keys = np.broadcast_to(batch.pad_mask[None, None, :, None, :], maps.shape)
    assert np.all(maps[pad_keys] == 0.0)


def test_permutation_equivariance_without_positions():
    rng = np.random.default_rng(2)
    model = _model(40, d_model=16, heads=2)
    model.params["pos_emb"][:] = 0.0
    tokens = rng.integers(1, 40, size=(1, 12))
    perm = tokens[:, rng.permutation(12)]
    a = encode_forward(model, Batch(tokens, tokens == PAD))[0]
    b = encode_forward(model, Batch(perm, perm == PAD))[0]
    assert np.abs(a - b).max() <= 1e-6


def test_identical_rows_identical_logits():
    model = _model()
    batch = make_batch(TokenVocab(["<pad>", "<unk>", "x", "y"]), [["x", "y"]] * 3, 128)
    logits, _ = encode_forward(model, batch)
    assert np.array_equal(logits[0], logits[1]) and np.array_equal(logits[1], logits[2])


def test_zero_parameters_give_head_bias():
    model = _model()
    for v in model.params.values():
        v[:] = 0.0
    model.params["head_b"][:] = [0.3, -1.2]
    logits, _ = encode_forward(model, Batch(np.array([[5]]), np.array([[False]])))
    assert np.array_equal(logits[0], [0.3, -1.2])


def test_initial_loss_near_ln2():
    rng = np.random.default_rng(3)
    model = _model(50)
    batch = _random_batch(rng, 50, B=64, L=20)
    assert abs(cross_entropy(encode_forward(model, batch)[0], batch.labels) - math.log(2)) < 0.1


def test_parameter_count_hand():
    cfg = EncoderConfig(1000)
    d, f = 64, 128
    attention = 4 * (d * d + d)
    norms = 2 * 2 * d
    ffn = d * f + f + f * d + d
    hand = 1000 * d + 128 * d + 2 * (attention + norms + ffn) + 2 * d + (2 * d + 2)
    assert cfg.parameter_count() == hand == EncoderModel.init(cfg).parameter_count()
    assert sum(math.prod(s) for s in parameter_shapes(cfg).values()) == hand


def test_config_validation():
    with pytest.raises(ValueError):
        EncoderConfig(10, d_model=30, heads=4)
    with pytest.raises(ValueError):
        EncoderConfig(10, max_len=0)


def _overfit_batch():
    docs, labels = overfit_suite()
    vocab = TokenVocab.build(docs, min_count=1)
    model = EncoderModel.init(EncoderConfig(len(vocab), seed=5))
    return model, make_batch(vocab, docs, model.config.max_len, labels)


def test_overfit_32_posts():
    model, batch = _overfit_batch()
    state = AdamState.for_model(model)
    accuracy = 0.0
    for step in range(300):
        train_step(model, batch, state)
        if step % 10 == 9:
            logits, _ = encode_forward(model, batch)
            accuracy = np.mean((logits[:, 1] > logits[:, 0]) == batch.labels)
            if accuracy >= 0.99:
                break
    assert accuracy >= 0.99


def test_loss_monotone_small_lr():
    model, batch = _overfit_batch()
    state = AdamState.for_model(model)
    losses = [train_step(model, batch, state, AdamParams(lr=1e-4))[0] for _ in range(21)]
    assert all(b < a for a, b in zip(losses, losses[1:]))


def test_training_deterministic():
    docs, labels = overfit_suite(20)
    shape = dict(d_model=16, heads=2, layers=1, d_ff=32, max_len=32)
    params = EncoderTrainParams(epochs=2, batch_size=8, min_count=1, seed=4)
    m1, _, log1 = train_encoder(docs, labels, shape, params)
    m2, _, log2 = train_encoder(docs, labels, shape, params)
    assert log1.objective == log2.objective
    assert all(np.array_equal(m1.params[k], m2.params[k]) for k in m1.params)


def test_empty_post_and_oov():
    vocab = TokenVocab(["<pad>", "<unk>", "a", "b"])
    model = _model(len(vocab), max_len=8)
    batch = make_batch(vocab, [[]], 8)
    assert batch.tokens.tolist() == [[UNK]]
    assert encoder_predict(model, [[]], vocab)[0] in (Label.REAL, Label.FAKE)
    oov = predict_logits(model, vocab, [["zz", "qq", "a"]])
    unk = predict_logits(model, vocab, [["<unk>", "<unk>", "a"]])
    assert np.array_equal(oov, unk)
    assert encoder_predict(model, [["a", "b"]], vocab) == encoder_predict(model, [["a", "b"]], vocab)


def test_truncation_to_max_len():
    vocab = TokenVocab(["<pad>", "<unk>", "a"])
    model = _model(len(vocab), max_len=4)
    logits, maps = encode_forward(model, make_batch(vocab, [["a"] * 10], 4))
    assert maps.shape[-1] == 4 and np.all(np.isfinite(logits))


def test_tie_goes_to_real():
    vocab = TokenVocab(["<pad>", "<unk>", "a"])
    model = _model(len(vocab))
    model.params["head_w"][:] = 0.0
    model.params["head_b"][:] = 0.0
    assert encoder_predict(model, [["a"]], vocab) == [Label.REAL]


def test_batch_mask_validation():
    with pytest.raises(ValueError):
        Batch(np.array([[3, 0]]), np.array([[False, False]]))
