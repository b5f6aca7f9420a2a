"""Architecture construction, shape goldens, masking and determinism contracts."""

import numpy as np
import pytest

from emojinet import autodiff as ad
from emojinet.corpus import EncodedBatch
from emojinet.models import (
    ModelConfig, build_cnn, build_feedforward, build_model, build_multiscale,
    build_transformer, sinusoidal_positions,
)
from emojinet.tokenizer import PAD_ID

V = 1000


@pytest.fixture(autouse=True)
def fresh_tape():
    ad.active_tape().reset()
    yield
    ad.active_tape().reset()


def batch_of(ids_rows, lengths, max_len=64):
    ids = np.full((len(ids_rows), max_len), PAD_ID, dtype=np.int64)
    mask = np.zeros((len(ids_rows), max_len), dtype=np.uint8)
    for r, (row, n) in enumerate(zip(ids_rows, lengths)):
        ids[r, :n] = row[:n]
        mask[r, :n] = 1
    labels = np.zeros(len(ids_rows), dtype=np.int64)
    return EncodedBatch(token_ids=ids, mask=mask, labels=labels)


def random_batch(rng, n=3, max_len=64):
    lengths = rng.integers(1, 20, size=n)
    rows = [rng.integers(2, V, size=max_len) for _ in range(n)]
    return batch_of(rows, lengths, max_len)


def config(arch, **kw):
    return ModelConfig(arch=arch, vocab_size=V, **kw)


# --- golden parameter counts ------------------------------------------------------

def test_feedforward_parameter_count():
    model = build_feedforward(config("feedforward"))
    expected = (V * 128
                + (128 * 256 + 256) + (256 * 128 + 128) + (128 * 64 + 64)
                + (64 * 20 + 20)
                + 2 * (256 + 128 + 64))
    assert model.param_count() == expected == 204_372


def test_cnn_parameter_count_and_concat_width():
    model = build_cnn(config("cnn"))
    expected = (V * 128
                + sum(128 * w * 128 + 128 for w in (3, 4, 5))
                + (3 * 128 * 20 + 20))
    assert model.param_count() == expected
    assert model.params["out.w"].shape == (384, 20)


def test_transformer_parameter_count():
    model = build_transformer(config("transformer"))
    per_layer = 4 * (128 * 128 + 128) + 2 * (2 * 128) + (128 * 256 + 256) + (256 * 128 + 128)
    expected = V * 128 + 2 * per_layer + (128 * 128 + 128) + (128 * 20 + 20)
    assert model.param_count() == expected


def test_multiscale_parameter_count():
    d = 128
    model = build_multiscale(config("multiscale"))
    per_layer = 4 * (d * d + d) + 2 * (2 * d) + (d * 2 * d + 2 * d) + (2 * d * d + d)
    attn = 4 * (d * d + d)
    expected = (V * d + 2 * per_layer
                + attn + attn + (d + attn)       # word, phrase, sentence(+query)
                + (d * 3 * d + d)                # conv stream
                + (4 * d * d + d) + 2 * d        # fusion + its layer norm
                + (d * (d // 2) + d // 2) + ((d // 2) * 20 + 20))
    assert model.param_count() == expected


@pytest.mark.parametrize("d", [64, 128, 768])
def test_multiscale_ratio_invariant(d):
    model = build_multiscale(ModelConfig(arch="multiscale", vocab_size=50, embed_dim=d))
    assert model.params["fusion.w"].shape == (4 * d, d)
    assert model.params["cls.fc.w"].shape == (d, d // 2)
    assert model.params["cls.out.w"].shape == (d // 2, 20)


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(arch="rnn", vocab_size=V)
    with pytest.raises(ValueError):
        ModelConfig(arch="multiscale", vocab_size=V, embed_dim=100)
    with pytest.raises(ValueError):
        ModelConfig(arch="transformer", vocab_size=V, embed_dim=127)
    with pytest.raises(ValueError):
        ModelConfig(arch="cnn", vocab_size=V, dropout=1.0)


def test_pad_embedding_row_is_zero():
    for arch in ("feedforward", "cnn", "transformer", "multiscale"):
        model = build_model(config(arch))
        assert not model.params["embedding"].data[PAD_ID].any()


# --- forward contracts ---------------------------------------------------------------

@pytest.mark.parametrize("arch", ["feedforward", "cnn", "transformer", "multiscale"])
def test_logits_shape_and_finite(arch):
    model = build_model(config(arch)).eval()
    batch = random_batch(np.random.default_rng(0), n=2)
    logits = model(batch)
    assert logits.shape == (2, 20)
    assert np.isfinite(logits.data).all()
    model.train()
    assert np.isfinite(model(batch).data).all()


@pytest.mark.parametrize("arch", ["feedforward", "cnn", "transformer", "multiscale"])
def test_eval_mode_deterministic(arch):
    model = build_model(config(arch)).eval()
    batch = random_batch(np.random.default_rng(1))
    with ad.no_grad():
        a = model(batch).data
        b = model(batch).data
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("arch", ["feedforward", "cnn", "transformer", "multiscale"])
def test_batch_independence_in_eval(arch):
    model = build_model(config(arch)).eval()
    rng = np.random.default_rng(2)
    pair = random_batch(rng, n=2)
    solo = EncodedBatch(token_ids=pair.token_ids[:1], mask=pair.mask[:1], labels=pair.labels[:1])
    with ad.no_grad():
        np.testing.assert_allclose(model(pair).data[0], model(solo).data[0], atol=1e-5)


@pytest.mark.parametrize("arch", ["feedforward", "cnn", "transformer", "multiscale"])
def test_padding_invariance(arch):
    """Logits depend on unmasked tokens only: garbage beyond the mask is ignored."""
    model = build_model(config(arch)).eval()
    rng = np.random.default_rng(3)
    batch = random_batch(rng, n=3)
    poisoned = EncodedBatch(
        token_ids=np.where(batch.mask.astype(bool), batch.token_ids,
                           rng.integers(2, V, size=batch.token_ids.shape)),
        mask=batch.mask, labels=batch.labels)
    with ad.no_grad():
        np.testing.assert_allclose(model(batch).data, model(poisoned).data, atol=1e-6)


def test_duplicated_example_rows_identical():
    model = build_cnn(config("cnn")).eval()
    rng = np.random.default_rng(4)
    row = rng.integers(2, V, size=64)
    batch = batch_of([row, row], [10, 10])
    with ad.no_grad():
        logits = model(batch).data
    np.testing.assert_array_equal(logits[0], logits[1])


def test_positional_encoding_row_zero():
    pe = sinusoidal_positions(64, 128)
    np.testing.assert_array_equal(pe[0, 0::2], 0.0)
    np.testing.assert_array_equal(pe[0, 1::2], 1.0)


def test_transformer_is_position_sensitive():
    model = build_transformer(config("transformer")).eval()
    rng = np.random.default_rng(5)
    row = rng.integers(2, V, size=64)
    swapped = row.copy()
    swapped[0], swapped[1] = row[1], row[0]
    assert row[0] != row[1]
    with ad.no_grad():
        a = model(batch_of([row], [6])).data
        b = model(batch_of([swapped], [6])).data
    assert not np.allclose(a, b)


def test_cnn_zero_embedding_yields_classifier_bias():
    model = build_cnn(config("cnn")).eval()
    model.params["embedding"].data[...] = 0.0
    bias = np.arange(20, dtype=np.float32)
    model.params["out.b"].data[...] = bias
    batch = random_batch(np.random.default_rng(6), n=2)
    with ad.no_grad():
        logits = model(batch).data
    np.testing.assert_allclose(logits, np.tile(bias, (2, 1)), atol=1e-6)


def test_cnn_accepts_sequences_shorter_than_largest_kernel():
    model = build_cnn(config("cnn")).eval()
    batch = batch_of([np.array([5, 6])], [2])  # 2 real tokens < kernel width 5
    with ad.no_grad():
        logits = model(batch)
    assert np.isfinite(logits.data).all()


def test_multiscale_single_token_defines_all_streams():
    model = build_multiscale(config("multiscale")).eval()
    batch = batch_of([np.array([7])], [1])
    with ad.no_grad():
        logits = model(batch)
    assert logits.shape == (1, 20)
    assert np.isfinite(logits.data).all()


def test_forward_names_first_non_finite_layer():
    model = build_transformer(config("transformer")).eval()
    model.params["encoder.1.ffn1.w"].data[0, 0] = np.nan
    with pytest.raises(RuntimeError, match="encoder.1"):
        model(random_batch(np.random.default_rng(7)))


def test_same_seed_same_weights():
    a = build_cnn(config("cnn"), seed=11)
    b = build_cnn(config("cnn"), seed=11)
    for name in a.params:
        np.testing.assert_array_equal(a.params[name].data, b.params[name].data)
    c = build_cnn(config("cnn"), seed=12)
    assert any(not np.array_equal(a.params[n].data, c.params[n].data) for n in a.params)


def test_builders_reject_wrong_arch():
    with pytest.raises(ValueError):
        build_feedforward(config("cnn"))
    with pytest.raises(ValueError):
        build_transformer(config("multiscale"))
