"""Network building blocks: dense, recurrent, convolutional and attention
layers, all defined over the autodiff :class:`~beatlab.nn.tensor.Tensor`.

Transformer stacks use pre-norm residual blocks; attention masks are boolean
numpy arrays where True marks an allowed position.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, MaskError, ShapeError
from .tensor import Parameter, Tensor, pad, stack

_NEG_INF = -1e30  # finite stand-in for -inf: exp() underflows to exactly 0


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out))


class Module:
    """Base class: parameter discovery in attribute declaration order."""

    training = False

    def named_parameters(self, prefix: str = ""):
        for key, value in vars(self).items():
            name = f"{prefix}{key}"
            if isinstance(value, Parameter):
                yield name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{name}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{name}.{i}.")
                    elif isinstance(item, Parameter):
                        yield f"{name}.{i}", item

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def _submodules(self):
        for value in vars(self).values():
            if isinstance(value, Module):
                yield value
            elif isinstance(value, (list, tuple)):
                for item in value:
                    if isinstance(item, Module):
                        yield item

    def train(self, mode: bool = True):
        self.training = mode
        for sub in self._submodules():
            sub.train(mode)
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()


_ACTIVATIONS = {
    "linear": lambda t: t,
    "relu": Tensor.relu,
    "tanh": Tensor.tanh,
    "sigmoid": Tensor.sigmoid,
}


class Dense(Module):
    """Affine map plus optional activation: y = act(x W + b)."""

    def __init__(self, n_in: int, n_out: int, activation: str = "linear",
                 rng: np.random.Generator | None = None):
        if n_in <= 0 or n_out <= 0:
            raise ConfigError("Dense dimensions must be positive")
        if activation not in _ACTIVATIONS:
            raise ConfigError(f"unknown activation {activation!r}")
        rng = rng or np.random.default_rng(0)
        self.n_in = n_in
        self.n_out = n_out
        self.activation = activation
        self.W = Parameter(glorot_uniform(rng, n_in, n_out))
        self.b = Parameter(np.zeros(n_out))

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.n_in:
            raise ShapeError(f"Dense expected last dim {self.n_in}, got {x.shape}")
        return _ACTIVATIONS[self.activation](x @ self.W + self.b)


class Embedding(Module):
    """Integer-index lookup table."""

    def __init__(self, vocab: int, dim: int, rng: np.random.Generator | None = None):
        if vocab <= 0 or dim <= 0:
            raise ConfigError("Embedding dimensions must be positive")
        rng = rng or np.random.default_rng(0)
        self.W = Parameter(rng.normal(0.0, 0.02, size=(vocab, dim)))

    def __call__(self, indices) -> Tensor:
        idx = np.asarray(indices, dtype=np.intp)
        return self.W[idx]


class LSTM(Module):
    """Single-layer LSTM with the standard i, f, g, o gate equations.

    The forget-gate bias is initialised to 1.  A boolean step mask freezes
    the carried state on padded steps, so padding never alters the final
    hidden state.
    """

    def __init__(self, n_in: int, hidden: int, rng: np.random.Generator | None = None):
        if n_in <= 0 or hidden <= 0:
            raise ConfigError("LSTM dimensions must be positive")
        rng = rng or np.random.default_rng(0)
        self.n_in = n_in
        self.hidden = hidden
        self.Wx = Parameter(glorot_uniform(rng, n_in, 4 * hidden))
        self.Wh = Parameter(glorot_uniform(rng, hidden, 4 * hidden))
        b = np.zeros(4 * hidden)
        b[hidden:2 * hidden] = 1.0
        self.b = Parameter(b)

    def step(self, x_t: Tensor, h: Tensor, c: Tensor) -> tuple[Tensor, Tensor]:
        if x_t.shape[-1] != self.n_in:
            raise ShapeError(f"LSTM expected input dim {self.n_in}, got {x_t.shape}")
        n = self.hidden
        z = x_t @ self.Wx + h @ self.Wh + self.b
        i = z[:, :n].sigmoid()
        f = z[:, n:2 * n].sigmoid()
        g = z[:, 2 * n:3 * n].tanh()
        o = z[:, 3 * n:].sigmoid()
        c_new = f * c + i * g
        h_new = o * c_new.tanh()
        return h_new, c_new

    def __call__(self, x: Tensor, mask: np.ndarray | None = None,
                 return_sequence: bool = False):
        batch, steps = x.shape[0], x.shape[1]
        h = Tensor(np.zeros((batch, self.hidden)))
        c = Tensor(np.zeros((batch, self.hidden)))
        outputs = []
        for t in range(steps):
            h_new, c_new = self.step(x[:, t, :], h, c)
            if mask is not None:
                m = Tensor(mask[:, t:t + 1].astype(np.float64))
                h = m * h_new + (1.0 - m) * h
                c = m * c_new + (1.0 - m) * c
            else:
                h, c = h_new, c_new
            if return_sequence:
                outputs.append(h)
        if return_sequence:
            return stack(outputs, axis=1), h
        return h


class Conv1D(Module):
    """1-D convolution over (batch, time, channels) with 'same' or 'valid'
    zero padding."""

    def __init__(self, n_in: int, n_out: int, kernel: int, stride: int = 1,
                 padding: str = "same", activation: str = "linear",
                 rng: np.random.Generator | None = None):
        if min(n_in, n_out, kernel, stride) <= 0:
            raise ConfigError("Conv1D dimensions must be positive")
        if padding not in ("same", "valid"):
            raise ConfigError(f"unknown padding {padding!r}")
        rng = rng or np.random.default_rng(0)
        self.n_in = n_in
        self.n_out = n_out
        self.kernel = kernel
        self.stride = stride
        self.padding = padding
        self.activation = activation
        fan_in = kernel * n_in
        self.W = Parameter(glorot_uniform(rng, fan_in, n_out))
        self.b = Parameter(np.zeros(n_out))

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.n_in:
            raise ShapeError(f"Conv1D expected {self.n_in} channels, got {x.shape}")
        k = self.kernel
        if self.padding == "same":
            left = (k - 1) // 2
            x = pad(x, ((0, 0), (left, k - 1 - left), (0, 0)))
        steps = x.shape[1]
        if steps < k:
            raise ShapeError("sequence shorter than kernel")
        n_out_steps = (steps - k) // self.stride + 1
        idx = (np.arange(n_out_steps)[:, None] * self.stride
               + np.arange(k)[None, :])
        # gather windows with time leading so fancy indexing hits axis 0
        xt = x.swapaxes(0, 1)                        # (T, B, C)
        windows = xt[idx]                            # (T', K, B, C)
        windows = windows.transpose((2, 0, 1, 3))    # (B, T', K, C)
        windows = windows.reshape(x.shape[0], n_out_steps, k * self.n_in)
        return _ACTIVATIONS[self.activation](windows @ self.W + self.b)


class LayerNorm(Module):
    """Normalises the last axis to zero mean / unit variance, then applies
    a learned affine transform."""

    def __init__(self, dim: int, eps: float = 1e-8):
        if dim <= 0:
            raise ConfigError("LayerNorm dim must be positive")
        self.dim = dim
        self.eps = eps
        self.gamma = Parameter(np.ones(dim))
        self.beta = Parameter(np.zeros(dim))

    def __call__(self, x: Tensor) -> Tensor:
        mu = x.mean(axis=-1, keepdims=True)
        centered = x - mu
        var = (centered * centered).mean(axis=-1, keepdims=True)
        normed = centered / (var + self.eps).sqrt()
        return normed * self.gamma + self.beta


class Dropout(Module):
    """Inverted dropout; identity when not in training mode."""

    def __init__(self, p: float, rng: np.random.Generator | None = None):
        if not 0.0 <= p < 1.0:
            raise ConfigError("dropout rate must be in [0, 1)")
        self.p = p
        self.rng = rng or np.random.default_rng(0)

    def __call__(self, x: Tensor) -> Tensor:
        if not self.training or self.p == 0.0:
            return x
        keep = self.rng.random(x.shape) >= self.p
        return x * Tensor(keep / (1.0 - self.p))


def sinusoidal_encoding(dim: int, max_len: int) -> np.ndarray:
    """Sinusoidal position table: even columns sin, odd columns cos."""
    if dim % 2 != 0:
        raise ConfigError("positional encoding dim must be even")
    pos = np.arange(max_len, dtype=np.float64)[:, None]
    i = np.arange(dim // 2, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, 2.0 * i / dim)
    table = np.zeros((max_len, dim))
    table[:, 0::2] = np.sin(angle)
    table[:, 1::2] = np.cos(angle)
    return table


class PositionalEncoding(Module):
    """Adds the (non-learned) sinusoidal table to a (B, T, d) input."""

    def __init__(self, dim: int, max_len: int):
        self.dim = dim
        self.max_len = max_len
        self.table = sinusoidal_encoding(dim, max_len)

    def __call__(self, x: Tensor) -> Tensor:
        steps = x.shape[1]
        if steps > self.max_len:
            raise ShapeError(f"sequence length {steps} exceeds max_len {self.max_len}")
        return x + Tensor(self.table[:steps])


def scaled_dot_attention(q: Tensor, k: Tensor, v: Tensor,
                         mask: np.ndarray | None = None) -> Tensor:
    """softmax(q kᵀ / sqrt(d_k)) v over the last two axes.

    `mask` is boolean, True = may attend; masked scores get a large negative
    offset so their softmax weight underflows to exactly zero.
    """
    d_k = q.shape[-1]
    scores = (q @ k.swapaxes(-1, -2)) * (1.0 / np.sqrt(d_k))
    if mask is not None:
        try:
            np.broadcast_shapes(mask.shape, scores.shape)
        except ValueError:
            raise MaskError(
                f"mask shape {mask.shape} does not broadcast to {scores.shape}")
        scores = scores + Tensor(np.where(mask, 0.0, _NEG_INF))
    return scores.softmax(axis=-1) @ v


class MultiHeadAttention(Module):
    """Multi-head attention with per-head dimension d_k = d_v."""

    def __init__(self, d_model: int, heads: int, d_k: int, d_v: int,
                 rng: np.random.Generator | None = None):
        if min(d_model, heads, d_k, d_v) <= 0:
            raise ConfigError("attention dimensions must be positive")
        rng = rng or np.random.default_rng(0)
        self.d_model = d_model
        self.heads = heads
        self.d_k = d_k
        self.d_v = d_v
        self.Wq = Parameter(glorot_uniform(rng, d_model, heads * d_k))
        self.bq = Parameter(np.zeros(heads * d_k))
        self.Wk = Parameter(glorot_uniform(rng, d_model, heads * d_k))
        self.bk = Parameter(np.zeros(heads * d_k))
        self.Wv = Parameter(glorot_uniform(rng, d_model, heads * d_v))
        self.bv = Parameter(np.zeros(heads * d_v))
        self.Wo = Parameter(glorot_uniform(rng, heads * d_v, d_model))
        self.bo = Parameter(np.zeros(d_model))

    def _split(self, t: Tensor, dim: int) -> Tensor:
        batch, steps = t.shape[0], t.shape[1]
        return t.reshape(batch, steps, self.heads, dim).transpose((0, 2, 1, 3))

    def __call__(self, q: Tensor, k: Tensor, v: Tensor,
                 mask: np.ndarray | None = None) -> Tensor:
        batch, t_q = q.shape[0], q.shape[1]
        qh = self._split(q @ self.Wq + self.bq, self.d_k)
        kh = self._split(k @ self.Wk + self.bk, self.d_k)
        vh = self._split(v @ self.Wv + self.bv, self.d_v)
        heads_out = scaled_dot_attention(qh, kh, vh, mask)
        merged = heads_out.transpose((0, 2, 1, 3)).reshape(
            batch, t_q, self.heads * self.d_v)
        return merged @ self.Wo + self.bo


def key_padding_mask(valid: np.ndarray) -> np.ndarray:
    """(B, T_k) validity -> (B, 1, 1, T_k) attention mask."""
    return valid.astype(bool)[:, None, None, :]


def causal_mask(steps: int) -> np.ndarray:
    """(1, 1, T, T) lower-triangular mask: position t sees only <= t."""
    return np.tril(np.ones((steps, steps), dtype=bool))[None, None]


class FeedForward(Module):
    """Position-wise two-layer MLP with ReLU hidden activation."""

    def __init__(self, d_model: int, hidden: int, dropout: float = 0.0,
                 rng: np.random.Generator | None = None):
        rng = rng or np.random.default_rng(0)
        self.inner = Dense(d_model, hidden, "relu", rng)
        self.drop = Dropout(dropout, rng)
        self.outer = Dense(hidden, d_model, "linear", rng)

    def __call__(self, x: Tensor) -> Tensor:
        return self.outer(self.drop(self.inner(x)))


class EncoderBlock(Module):
    """Pre-norm transformer encoder block: self-attention + feed-forward."""

    def __init__(self, d_model: int, heads: int, d_k: int, d_v: int,
                 ffn_hidden: int, dropout: float = 0.0,
                 rng: np.random.Generator | None = None):
        rng = rng or np.random.default_rng(0)
        self.ln1 = LayerNorm(d_model)
        self.attn = MultiHeadAttention(d_model, heads, d_k, d_v, rng)
        self.drop1 = Dropout(dropout, rng)
        self.ln2 = LayerNorm(d_model)
        self.ffn = FeedForward(d_model, ffn_hidden, dropout, rng)
        self.drop2 = Dropout(dropout, rng)

    def __call__(self, x: Tensor, mask: np.ndarray | None = None) -> Tensor:
        normed = self.ln1(x)
        x = x + self.drop1(self.attn(normed, normed, normed, mask))
        return x + self.drop2(self.ffn(self.ln2(x)))


class DecoderBlock(Module):
    """Pre-norm transformer decoder block: causal self-attention,
    cross-attention over the encoder memory, then feed-forward."""

    def __init__(self, d_model: int, heads: int, d_k: int, d_v: int,
                 ffn_hidden: int, dropout: float = 0.0,
                 rng: np.random.Generator | None = None):
        rng = rng or np.random.default_rng(0)
        self.ln1 = LayerNorm(d_model)
        self.self_attn = MultiHeadAttention(d_model, heads, d_k, d_v, rng)
        self.drop1 = Dropout(dropout, rng)
        self.ln2 = LayerNorm(d_model)
        self.cross_attn = MultiHeadAttention(d_model, heads, d_k, d_v, rng)
        self.drop2 = Dropout(dropout, rng)
        self.ln3 = LayerNorm(d_model)
        self.ffn = FeedForward(d_model, ffn_hidden, dropout, rng)
        self.drop3 = Dropout(dropout, rng)

    def __call__(self, x: Tensor, memory: Tensor,
                 self_mask: np.ndarray | None = None,
                 memory_mask: np.ndarray | None = None) -> Tensor:
        normed = self.ln1(x)
        x = x + self.drop1(self.self_attn(normed, normed, normed, self_mask))
        normed = self.ln2(x)
        x = x + self.drop2(self.cross_attn(normed, memory, memory, memory_mask))
        return x + self.drop3(self.ffn(self.ln3(x)))
