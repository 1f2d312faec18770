"""Character-level LSTM encoder-decoder with additive attention.

Layout (row-vector convention, ``x @ W``):

    ids -> embedding -> LSTM x encoder_depth -> encoder outputs h_1..h_S
    targets -> embedding -> decoder LSTM (initial state = encoder final state)
    for every decoder output s_t:
        e_ti = v . tanh(s_t @ W_dec + h_i @ W_enc)
        E_t  = softmax over the non-pad encoder positions
        C_t  = sum_i E_ti h_i
    logits_t = concat(s_t, C_t) @ W_out + b_out

LSTM kernels are fused with gate order (i, f, c, o).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics as nx
from .numerics import Tensor
from .textcodec import PAD_ID

INIT_SCALE = 0.08


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    embed_dim: int = 500
    units: int = 500
    encoder_depth: int = 3
    max_len: int = 20

    def __post_init__(self):
        for name in ("vocab_size", "embed_dim", "units", "encoder_depth", "max_len"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.max_len < 2:
            raise ValueError("max_len must be at least 2")


@dataclass(frozen=True)
class AttentionTrace:
    """Attention weights, shape [batch, decoder_steps, encoder_steps]."""

    weights: np.ndarray


def param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Name -> shape for every trainable tensor, in canonical order."""
    V, E, U = config.vocab_size, config.embed_dim, config.units
    shapes: dict[str, tuple[int, ...]] = {"encoder/embedding": (V, E)}
    for k in range(config.encoder_depth):
        in_dim = E if k == 0 else U
        shapes[f"encoder/lstm_{k}/kernel"] = (in_dim, 4 * U)
        shapes[f"encoder/lstm_{k}/recurrent_kernel"] = (U, 4 * U)
        shapes[f"encoder/lstm_{k}/bias"] = (4 * U,)
    shapes["decoder/embedding"] = (V, E)
    shapes["decoder/lstm/kernel"] = (E, 4 * U)
    shapes["decoder/lstm/recurrent_kernel"] = (U, 4 * U)
    shapes["decoder/lstm/bias"] = (4 * U,)
    shapes["attention/W_enc"] = (U, U)
    shapes["attention/W_dec"] = (U, U)
    shapes["attention/v"] = (U,)
    shapes["output/kernel"] = (2 * U, V)
    shapes["output/bias"] = (V,)
    return shapes


def init_params(config: ModelConfig, seed: int = 0) -> dict[str, Tensor]:
    """Uniform(-0.08, 0.08) weights, zero biases."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in param_shapes(config).items():
        if name.endswith("bias"):
            params[name] = Tensor(np.zeros(shape))
        else:
            params[name] = Tensor(rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape))
    return params


def count_params(config: ModelConfig) -> int:
    return int(sum(int(np.prod(s)) for s in param_shapes(config).values()))


def layer_param_counts(config: ModelConfig) -> dict[str, int]:
    """Parameter totals grouped per layer (embedding, each LSTM, attention, output)."""
    counts: dict[str, int] = {}
    for name, shape in param_shapes(config).items():
        layer = name.rsplit("/", 1)[0]
        if name.endswith("embedding"):
            layer = name
        counts[layer] = counts.get(layer, 0) + int(np.prod(shape))
    return counts


# ----------------------------------------------------------------------------
# LSTM


def _lstm_cell(z: Tensor, c_prev: Tensor, units: int) -> tuple[Tensor, Tensor]:
    i = nx.sigmoid(nx.slice_last(z, 0, units))
    f = nx.sigmoid(nx.slice_last(z, units, 2 * units))
    g = nx.tanh(nx.slice_last(z, 2 * units, 3 * units))
    o = nx.sigmoid(nx.slice_last(z, 3 * units, 4 * units))
    c = f * c_prev + i * g
    h = o * nx.tanh(c)
    return h, c


def lstm_step(x: Tensor, h_prev: Tensor, c_prev: Tensor, weights) -> tuple[Tensor, Tensor]:
    """One LSTM step.

    ``x`` is [in_dim] or [batch, in_dim]; ``h_prev``/``c_prev`` match it in
    rank. ``weights`` is (kernel [in_dim, 4u], recurrent_kernel [u, 4u],
    bias [4u]).
    """
    kernel, recurrent, bias = weights
    units = recurrent.shape[0]
    if kernel.shape[1] != 4 * units or bias.shape != (4 * units,) or recurrent.shape != (units, 4 * units):
        raise nx.ShapeError("lstm weights have inconsistent shapes")
    if x.shape[-1] != kernel.shape[0] or h_prev.shape[-1] != units or c_prev.shape != h_prev.shape:
        raise nx.ShapeError(
            f"lstm_step: x {x.shape}, h {h_prev.shape}, c {c_prev.shape} vs kernel {kernel.shape}"
        )
    single = x.ndim == 1
    if single:
        x = nx.reshape(x, (1, -1))
        h_prev = nx.reshape(h_prev, (1, -1))
        c_prev = nx.reshape(c_prev, (1, -1))
    batch = x.shape[0]
    b = nx.broadcast_to(nx.reshape(bias, (1, 4 * units)), (batch, 4 * units))
    z = x @ kernel + h_prev @ recurrent + b
    h, c = _lstm_cell(z, c_prev, units)
    if single:
        h, c = nx.reshape(h, (units,)), nx.reshape(c, (units,))
    return h, c


def _lstm_scan(x: Tensor, h: Tensor, c: Tensor, weights) -> tuple[Tensor, Tensor, Tensor]:
    """Run an LSTM over [batch, steps, in_dim]; returns (outputs, h_last, c_last)."""
    kernel, recurrent, bias = weights
    units = recurrent.shape[0]
    batch, steps, in_dim = x.shape
    # input projection for all steps at once
    zx = nx.reshape(nx.reshape(x, (batch * steps, in_dim)) @ kernel, (batch, steps, 4 * units))
    zx = zx + nx.broadcast_to(nx.reshape(bias, (1, 1, 4 * units)), zx.shape)
    outs = []
    for t in range(steps):
        z = nx.index(zx, t, axis=1) + h @ recurrent
        h, c = _lstm_cell(z, c, units)
        outs.append(h)
    return nx.stack(outs, axis=1), h, c


def _weights(params, prefix):
    return params[f"{prefix}/kernel"], params[f"{prefix}/recurrent_kernel"], params[f"{prefix}/bias"]


def _check_ids(ids: np.ndarray, vocab_size: int) -> np.ndarray:
    ids = np.asarray(ids)
    if ids.dtype.kind not in "iu":
        raise TypeError("token ids must be integers")
    if ids.size and (ids.min() < 0 or ids.max() >= vocab_size):
        raise IndexError(f"token id out of range [0, {vocab_size})")
    return ids


def encode(input_ids, params, config: ModelConfig) -> tuple[Tensor, Tensor, Tensor]:
    """Encoder pass over [batch, steps] ids.

    Returns the top layer's per-step outputs [batch, steps, units] and its
    final (h, c).
    """
    ids = _check_ids(input_ids, config.vocab_size)
    batch = ids.shape[0]
    zeros = Tensor(np.zeros((batch, config.units)))
    x = nx.embedding(params["encoder/embedding"], ids)
    for k in range(config.encoder_depth):
        x, h, c = _lstm_scan(x, zeros, zeros, _weights(params, f"encoder/lstm_{k}"))
    return x, h, c


# ----------------------------------------------------------------------------
# attention


def attention_score(s_prev: Tensor, h_i: Tensor, params) -> Tensor:
    """Additive score ``v . tanh(s_prev @ W_dec + h_i @ W_enc)`` for one pair of vectors."""
    u = params["attention/v"].shape[0]
    pre = nx.reshape(s_prev, (1, u)) @ params["attention/W_dec"] + nx.reshape(h_i, (1, u)) @ params["attention/W_enc"]
    return nx.reshape(nx.tanh(pre) @ nx.reshape(params["attention/v"], (u, 1)), ())


def attention_weights(scores: Tensor, mask=None) -> Tensor:
    """Softmax over the last (encoder) axis; masked positions get exactly 0."""
    return nx.softmax(scores, axis=-1, mask=mask)


def context_vector(weights: Tensor, encoder_outputs: Tensor) -> Tensor:
    """Attention-weighted sum of encoder outputs.

    ``weights`` [S] with ``encoder_outputs`` [S, U] gives [U]; batched
    [B, T, S] with [B, S, U] gives [B, T, U].
    """
    if weights.ndim == 1:
        return nx.reshape(nx.reshape(weights, (1, -1)) @ encoder_outputs, (encoder_outputs.shape[-1],))
    return nx.matmul(weights, encoder_outputs)


def encoder_keys(encoder_outputs: Tensor, params) -> Tensor:
    b, s, u = encoder_outputs.shape
    return nx.reshape(nx.reshape(encoder_outputs, (b * s, u)) @ params["attention/W_enc"], (b, s, u))


def attend(queries: Tensor, encoder_outputs: Tensor, mask, params, keys: Tensor | None = None):
    """Attention for a block of decoder states.

    Args:
        queries: decoder hidden states [B, T, U].
        encoder_outputs: [B, S, U].
        mask: boolean [B, S], True at real (non-pad) encoder positions, or None.
        keys: precomputed ``encoder_keys`` (optional).

    Returns:
        (context [B, T, U], weights [B, T, S])
    """
    b, t, u = queries.shape
    s = encoder_outputs.shape[1]
    if keys is None:
        keys = encoder_keys(encoder_outputs, params)
    q = nx.reshape(nx.reshape(queries, (b * t, u)) @ params["attention/W_dec"], (b, t, 1, u))
    k = nx.reshape(keys, (b, 1, s, u))
    pre = nx.tanh(nx.broadcast_to(q, (b, t, s, u)) + nx.broadcast_to(k, (b, t, s, u)))
    scores = nx.reshape(nx.reshape(pre, (b * t * s, u)) @ nx.reshape(params["attention/v"], (u, 1)), (b, t, s))
    if mask is not None:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool)[:, None, :], (b, t, s))
    weights = attention_weights(scores, mask)
    return context_vector(weights, encoder_outputs), weights


def _project(dec_h: Tensor, context: Tensor, params) -> Tensor:
    b, t, u = dec_h.shape
    vocab = params["output/bias"].shape[0]
    cat = nx.reshape(nx.concat([dec_h, context], axis=-1), (b * t, 2 * u))
    bias = nx.broadcast_to(nx.reshape(params["output/bias"], (1, vocab)), (b * t, vocab))
    return nx.reshape(cat @ params["output/kernel"] + bias, (b, t, vocab))


def decoder_step(y_prev_ids, dec_h: Tensor, dec_c: Tensor, encoder_outputs: Tensor, mask, params, keys=None):
    """Advance the decoder one step for a batch.

    Args:
        y_prev_ids: integer array [B] of previous tokens.
        dec_h, dec_c: decoder state [B, U].
        encoder_outputs: [B, S, U].
        mask: boolean [B, S] of valid encoder positions, or None.

    Returns:
        (logits [B, V], h [B, U], c [B, U], attention weights [B, S])
    """
    ids = np.asarray(y_prev_ids).reshape(-1)
    x = nx.embedding(params["decoder/embedding"], ids)
    h, c = lstm_step(x, dec_h, dec_c, _weights(params, "decoder/lstm"))
    b, u = h.shape
    q = nx.reshape(h, (b, 1, u))
    context, weights = attend(q, encoder_outputs, mask, params, keys)
    logits = _project(q, context, params)
    return nx.reshape(logits, (b, logits.shape[-1])), h, c, nx.reshape(weights, (b, weights.shape[-1]))


def decoder_inputs(target_ids: np.ndarray, start_id: int) -> np.ndarray:
    """Targets shifted right by one with the start marker in front."""
    target_ids = np.asarray(target_ids)
    dec_in = target_ids[:, :-1].copy()
    dec_in[:, 0] = start_id
    return dec_in


def forward_teacher_forced(
    input_ids,
    target_ids,
    params,
    config: ModelConfig,
    start_id: int = 1,
    mask_attention: bool = True,
    mask_loss: bool = True,
) -> tuple[Tensor, AttentionTrace]:
    """Teacher-forced loss for a batch of encoded (input, target) rows.

    The decoder reads ``target[:, :-1]`` (its first slot forced to the start
    marker) and is scored against ``target[:, 1:]``.
    """
    input_ids = _check_ids(input_ids, config.vocab_size)
    target_ids = _check_ids(target_ids, config.vocab_size)
    if input_ids.shape[0] != target_ids.shape[0]:
        raise nx.ShapeError(f"batch mismatch: {input_ids.shape} vs {target_ids.shape}")

    enc_out, h, c = encode(input_ids, params, config)
    dec_x = nx.embedding(params["decoder/embedding"], decoder_inputs(target_ids, start_id))
    dec_h, _, _ = _lstm_scan(dec_x, h, c, _weights(params, "decoder/lstm"))
    mask = input_ids != PAD_ID if mask_attention else None
    context, weights = attend(dec_h, enc_out, mask, params)
    logits = _project(dec_h, context, params)

    labels = target_ids[:, 1:]
    loss_mask = (labels != PAD_ID) if mask_loss else np.ones(labels.shape, dtype=bool)
    loss = nx.masked_sparse_crossentropy(logits, labels, loss_mask)
    return loss, AttentionTrace(weights.numpy())
