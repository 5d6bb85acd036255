"""Layer forward semantics against independent oracles, plus the masking
and normalisation properties the pipeline depends on."""

import numpy as np
import pytest

from beatlab.errors import ConfigError, MaskError, ShapeError
from beatlab.nn import (Conv1D, DecoderBlock, Dense, Dropout, EncoderBlock,
                        LSTM, LayerNorm, MultiHeadAttention,
                        PositionalEncoding, Tensor, causal_mask,
                        key_padding_mask, scaled_dot_attention,
                        sinusoidal_encoding)

rng = np.random.default_rng(1234)


# -- dense -------------------------------------------------------------------

def test_dense_identity():
    d = Dense(3, 3, "linear")
    d.W.data = np.eye(3)
    d.b.data = np.zeros(3)
    x = rng.normal(size=(4, 3))
    np.testing.assert_array_equal(d(Tensor(x)).data, x)


def test_dense_relu_clamps():
    d = Dense(2, 2, "relu")
    d.W.data = np.eye(2)
    d.b.data = np.zeros(2)
    out = d(Tensor(np.array([[-1.0, 2.0]]))).data
    np.testing.assert_array_equal(out, [[0.0, 2.0]])


def test_dense_matches_triple_loop_oracle():
    d = Dense(4, 3, "linear", np.random.default_rng(5))
    x = rng.normal(size=(2, 4))
    expected = np.zeros((2, 3))
    for i in range(2):
        for j in range(3):
            acc = d.b.data[j]
            for k in range(4):
                acc += x[i, k] * d.W.data[k, j]
            expected[i, j] = acc
    np.testing.assert_allclose(d(Tensor(x)).data, expected, atol=1e-12)


def test_dense_shape_error():
    with pytest.raises(ShapeError):
        Dense(3, 2)(Tensor(np.ones((1, 4))))


# -- lstm ---------------------------------------------------------------------

def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def lstm_step_oracle(lstm, x, h, c):
    n = lstm.hidden
    z = x @ lstm.Wx.data + h @ lstm.Wh.data + lstm.b.data
    i, f = _sigmoid(z[:, :n]), _sigmoid(z[:, n:2 * n])
    g, o = np.tanh(z[:, 2 * n:3 * n]), _sigmoid(z[:, 3 * n:])
    c_new = f * c + i * g
    return o * np.tanh(c_new), c_new


def test_lstm_zero_weights_fixed_point():
    lstm = LSTM(3, 4)
    lstm.Wx.data[:] = 0
    lstm.Wh.data[:] = 0
    lstm.b.data[:] = 0
    h, c = lstm.step(Tensor(np.ones((2, 3))),
                     Tensor(np.zeros((2, 4))), Tensor(np.zeros((2, 4))))
    np.testing.assert_array_equal(h.data, np.zeros((2, 4)))
    np.testing.assert_array_equal(c.data, np.zeros((2, 4)))


def test_lstm_step_matches_gate_oracle():
    lstm = LSTM(3, 5, np.random.default_rng(7))
    x = rng.normal(size=(4, 3))
    h0 = rng.normal(size=(4, 5))
    c0 = rng.normal(size=(4, 5))
    h, c = lstm.step(Tensor(x), Tensor(h0), Tensor(c0))
    eh, ec = lstm_step_oracle(lstm, x, h0, c0)
    np.testing.assert_allclose(h.data, eh, atol=1e-12)
    np.testing.assert_allclose(c.data, ec, atol=1e-12)


def test_lstm_large_forget_bias_keeps_cell():
    lstm = LSTM(2, 3, np.random.default_rng(8))
    lstm.b.data[3:6] = 50.0  # forget gate saturated at 1
    x = rng.normal(size=(1, 2))
    c0 = rng.normal(size=(1, 3))
    _, c = lstm.step(Tensor(x), Tensor(np.zeros((1, 3))), Tensor(c0))
    n = lstm.hidden
    z = x @ lstm.Wx.data + lstm.b.data
    expected = c0 + _sigmoid(z[:, :n]) * np.tanh(z[:, 2 * n:3 * n])
    np.testing.assert_allclose(c.data, expected, atol=1e-9)


def test_lstm_mask_freezes_state():
    lstm = LSTM(2, 3, np.random.default_rng(9))
    x = rng.normal(size=(1, 5, 2))
    mask_short = np.array([[True, True, True, False, False]])
    h_masked = lstm(Tensor(x), mask_short).data
    h_direct = lstm(Tensor(x[:, :3]), np.ones((1, 3), dtype=bool)).data
    np.testing.assert_array_equal(h_masked, h_direct)


# -- conv --------------------------------------------------------------------

def conv_oracle(x, W, b, kernel, stride, padding):
    batch, steps, cin = x.shape
    cout = b.size
    if padding == "same":
        left = (kernel - 1) // 2
        x = np.pad(x, ((0, 0), (left, kernel - 1 - left), (0, 0)))
        steps = x.shape[1]
    n_out = (steps - kernel) // stride + 1
    out = np.zeros((batch, n_out, cout))
    Wk = W.reshape(kernel, cin, cout)
    for bi in range(batch):
        for t in range(n_out):
            for j in range(cout):
                acc = b[j]
                for k in range(kernel):
                    for c in range(cin):
                        acc += x[bi, t * stride + k, c] * Wk[k, c, j]
                out[bi, t, j] = acc
    return out


@pytest.mark.parametrize("stride,padding", [(1, "same"), (2, "same"), (1, "valid")])
def test_conv1d_matches_oracle(stride, padding):
    conv = Conv1D(3, 4, kernel=5, stride=stride, padding=padding,
                  rng=np.random.default_rng(11))
    x = rng.normal(size=(2, 9, 3))
    expected = conv_oracle(x, conv.W.data, conv.b.data, 5, stride, padding)
    np.testing.assert_allclose(conv(Tensor(x)).data, expected, atol=1e-12)


# -- attention -----------------------------------------------------------------

def test_attention_single_key_returns_value():
    q = Tensor(rng.normal(size=(2, 1, 3, 4)))
    k = Tensor(rng.normal(size=(2, 1, 1, 4)))
    v = Tensor(rng.normal(size=(2, 1, 1, 4)))
    out = scaled_dot_attention(q, k, v).data
    np.testing.assert_allclose(out, np.broadcast_to(v.data, out.shape), atol=1e-12)


def test_attention_uniform_keys_average_values():
    q = Tensor(rng.normal(size=(1, 1, 2, 4)))
    k = Tensor(np.tile(rng.normal(size=(1, 1, 1, 4)), (1, 1, 5, 1)))
    v = Tensor(rng.normal(size=(1, 1, 5, 4)))
    out = scaled_dot_attention(q, k, v).data
    np.testing.assert_allclose(
        out, np.broadcast_to(v.data.mean(axis=2, keepdims=True), out.shape),
        atol=1e-12)


def test_multihead_matches_bruteforce_per_head():
    mha = MultiHeadAttention(6, heads=2, d_k=3, d_v=3,
                             rng=np.random.default_rng(13))
    x = rng.normal(size=(2, 4, 6))
    valid = np.array([[1, 1, 1, 0], [1, 1, 1, 1]], dtype=bool)
    out = mha(Tensor(x), Tensor(x), Tensor(x), key_padding_mask(valid)).data

    def project(W, b, d):
        p = x @ W + b
        return p.reshape(2, 4, 2, d).transpose(0, 2, 1, 3)

    qh = project(mha.Wq.data, mha.bq.data, 3)
    kh = project(mha.Wk.data, mha.bk.data, 3)
    vh = project(mha.Wv.data, mha.bv.data, 3)
    expected_heads = np.zeros_like(vh)
    for b in range(2):
        for h in range(2):
            scores = qh[b, h] @ kh[b, h].T / np.sqrt(3)
            scores[:, ~valid[b]] = -np.inf
            w = np.exp(scores - scores.max(axis=-1, keepdims=True))
            w = w / w.sum(axis=-1, keepdims=True)
            expected_heads[b, h] = w @ vh[b, h]
    merged = expected_heads.transpose(0, 2, 1, 3).reshape(2, 4, 6)
    expected = merged @ mha.Wo.data + mha.bo.data
    np.testing.assert_allclose(out, expected, atol=1e-10)


def test_padded_keys_get_zero_attention_weight():
    q = Tensor(rng.normal(size=(1, 1, 2, 4)))
    k = Tensor(rng.normal(size=(1, 1, 3, 4)))
    v_data = rng.normal(size=(1, 1, 3, 4))
    mask = np.array([True, True, False])[None, None, None, :]
    out1 = scaled_dot_attention(q, k, Tensor(v_data), mask).data
    v_changed = v_data.copy()
    v_changed[..., 2, :] = 1e6  # masked value must not leak
    out2 = scaled_dot_attention(q, k, Tensor(v_changed), mask).data
    np.testing.assert_array_equal(out1, out2)


def test_mask_shape_error():
    q = Tensor(np.zeros((1, 1, 2, 4)))
    with pytest.raises(MaskError):
        scaled_dot_attention(q, q, q, np.ones((3, 9, 9, 9), dtype=bool))


def test_causal_mask_blocks_future_exactly():
    block = DecoderBlock(6, heads=2, d_k=3, d_v=3, ffn_hidden=8,
                         rng=np.random.default_rng(17))
    block.eval()
    memory = Tensor(rng.normal(size=(1, 3, 6)))
    x = rng.normal(size=(1, 5, 6))
    base = block(Tensor(x), memory, causal_mask(5)).data
    x_perturbed = x.copy()
    x_perturbed[0, 3] += 10.0
    out = block(Tensor(x_perturbed), memory, causal_mask(5)).data
    np.testing.assert_array_equal(base[0, :3], out[0, :3])
    assert np.abs(base[0, 3:] - out[0, 3:]).max() > 0


# -- positional encoding -------------------------------------------------------

def test_positional_encoding_row0_and_bounds():
    table = sinusoidal_encoding(8, 50)
    np.testing.assert_array_equal(table[0], [0, 1, 0, 1, 0, 1, 0, 1])
    assert np.all(np.abs(table) <= 1.0)


def test_positional_encoding_first_column_is_sin_pos():
    table = sinusoidal_encoding(6, 20)
    np.testing.assert_allclose(table[:, 0], np.sin(np.arange(20)), atol=1e-12)
    np.testing.assert_allclose(table[:, 1], np.cos(np.arange(20)), atol=1e-12)


def test_positional_encoding_rejects_odd_dim():
    with pytest.raises(ConfigError):
        sinusoidal_encoding(7, 10)


def test_positional_encoding_length_guard():
    pe = PositionalEncoding(4, max_len=3)
    with pytest.raises(ShapeError):
        pe(Tensor(np.zeros((1, 5, 4))))


# -- layer norm and dropout -----------------------------------------------------

def test_layernorm_moments_before_affine():
    ln = LayerNorm(16)
    x = Tensor(rng.normal(size=(7, 16)) * 3.0 + 5.0)
    out = ln(x).data  # gamma=1, beta=0 initially
    assert np.abs(out.mean(axis=-1)).max() < 1e-9
    assert np.abs(out.var(axis=-1) - 1.0).max() < 1e-6


def test_dropout_inference_identity_and_training_expectation():
    drop = Dropout(0.3, np.random.default_rng(23))
    x = Tensor(np.ones((100, 100)))
    drop.eval()
    np.testing.assert_array_equal(drop(x).data, x.data)
    drop.train()
    total = np.zeros((100, 100))
    n_draws = 30  # 30 * 10000 elementwise samples
    for _ in range(n_draws):
        total += drop(x).data
    assert abs(total.mean() / n_draws - 1.0) < 0.02


def test_parameter_order_is_declaration_order():
    block = EncoderBlock(4, heads=1, d_k=4, d_v=4, ffn_hidden=8)
    names = [n for n, _ in block.named_parameters()]
    assert names[0] == "ln1.gamma"
    assert names.index("attn.Wq") < names.index("ffn.inner.W")
