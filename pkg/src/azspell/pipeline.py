"""Batching, the training loop, greedy correction and checkpoint files."""

from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator, Sequence

import numpy as np

from . import numerics as nx
from . import seq2seq
from .corruptor import SentencePair, make_rng
from .numerics import AdamState, GradTape, Tensor
from .seq2seq import ModelConfig
from .textcodec import PAD_ID, Vocab, build_vocab, decode, encode

log = logging.getLogger(__name__)

MAGIC = b"AZSC"
FORMAT_VERSION = 1

# sub-stream ids for make_rng so the shuffles and the holdout split never share draws
_SHUFFLE_STREAM = 1
_HOLDOUT_STREAM = 1 << 20


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 40
    epochs: int = 10
    seed: int = 0
    shuffle: bool = True
    learning_rate: float = 0.001
    holdout: float = 0.0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0.0 <= self.holdout < 1.0:
            raise ValueError("holdout must lie in [0, 1)")


@dataclass(frozen=True)
class Batch:
    inputs: np.ndarray
    targets: np.ndarray
    input_mask: np.ndarray
    target_mask: np.ndarray
    indices: np.ndarray

    def __len__(self) -> int:
        return self.inputs.shape[0]


class PairEncodingError(ValueError):
    def __init__(self, lineno: int, cause: Exception):
        super().__init__(f"pair {lineno}: {cause}")
        self.lineno = lineno


class NonFiniteLossError(FloatingPointError):
    def __init__(self, epoch: int, batch_index: int, value: float):
        super().__init__(f"non-finite loss {value} at epoch {epoch}, batch {batch_index}")
        self.epoch = epoch
        self.batch_index = batch_index


def encode_pairs(pairs: Sequence[SentencePair], vocab: Vocab, max_len: int) -> tuple[np.ndarray, np.ndarray]:
    """Encode wrong sides into inputs and correct sides into targets."""
    x = np.zeros((len(pairs), max_len), dtype=np.int64)
    y = np.zeros((len(pairs), max_len), dtype=np.int64)
    for k, pair in enumerate(pairs):
        try:
            x[k] = encode(pair.wrong, vocab, max_len).ids
            y[k] = encode(pair.correct, vocab, max_len).ids
        except ValueError as exc:
            raise PairEncodingError(k + 1, exc) from exc
    return x, y


def _batches(x: np.ndarray, y: np.ndarray, config: TrainConfig, epoch: int) -> Iterator[Batch]:
    n = x.shape[0]
    order = make_rng(config.seed, _SHUFFLE_STREAM + epoch).permutation(n) if config.shuffle else np.arange(n)
    for start in range(0, n, config.batch_size):
        idx = order[start:start + config.batch_size]
        xb, yb = x[idx], y[idx]
        yield Batch(xb, yb, xb != PAD_ID, yb != PAD_ID, idx)


def make_batches(
    pairs: Sequence[SentencePair], vocab: Vocab, config: TrainConfig, max_len: int = 20, epoch: int = 0
) -> list[Batch]:
    """Encoded batches for one epoch; the last batch may be short."""
    if not pairs:
        raise ValueError("no pairs to batch")
    x, y = encode_pairs(pairs, vocab, max_len)
    return list(_batches(x, y, config, epoch))


# ----------------------------------------------------------------------------
# checkpoints


class CheckpointError(ValueError):
    pass


class BadMagicError(CheckpointError):
    pass


class VersionMismatchError(CheckpointError):
    pass


class TruncatedCheckpointError(CheckpointError):
    pass


class ShapeMismatchError(CheckpointError):
    pass


@dataclass
class ModelCheckpoint:
    config: ModelConfig
    vocab: Vocab
    params: dict[str, Tensor]
    version: int = FORMAT_VERSION

    @property
    def num_params(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def to_bytes(self) -> bytes:
        c = self.config
        out = [MAGIC, struct.pack("<B", self.version)]
        out.append(struct.pack("<5I", c.vocab_size, c.embed_dim, c.units, c.encoder_depth, c.max_len))
        items = self.vocab.items()
        out.append(struct.pack("<I", len(items)))
        for i, ch in items:
            raw = ch.encode("utf-8")
            out.append(struct.pack("<II", i, len(raw)) + raw)
        out.append(struct.pack("<I", len(self.params)))
        for name, t in self.params.items():
            raw = name.encode("utf-8")
            out.append(struct.pack("<H", len(raw)) + raw)
            out.append(struct.pack(f"<B{t.ndim}I", t.ndim, *t.shape))
            out.append(np.ascontiguousarray(t.data, dtype="<f8").tobytes())
        return b"".join(out)

    @classmethod
    def from_bytes(cls, buf: bytes) -> "ModelCheckpoint":
        reader = _Reader(buf)
        if reader.take(4, "magic") != MAGIC:
            raise BadMagicError("bad magic: not a model checkpoint")
        (version,) = reader.unpack("<B", "version")
        if version != FORMAT_VERSION:
            raise VersionMismatchError(f"checkpoint version {version}, expected {FORMAT_VERSION}")
        fields = reader.unpack("<5I", "model config")
        try:
            config = ModelConfig(*fields)
        except ValueError as exc:
            raise CheckpointError(f"invalid model config: {exc}") from exc

        (n_chars,) = reader.unpack("<I", "vocab size")
        items = []
        for _ in range(n_chars):
            i, nbytes = reader.unpack("<II", "vocab entry")
            try:
                items.append((i, reader.take(nbytes, "vocab entry").decode("utf-8")))
            except UnicodeDecodeError as exc:
                raise CheckpointError("vocab entry is not valid UTF-8") from exc
        try:
            vocab = Vocab.from_items(items)
        except ValueError as exc:
            raise CheckpointError(f"invalid vocab: {exc}") from exc
        if vocab.size != config.vocab_size:
            raise ShapeMismatchError(f"vocab has {vocab.size} ids, config says {config.vocab_size}")

        expected = seq2seq.param_shapes(config)
        (n_tensors,) = reader.unpack("<I", "tensor count")
        params: dict[str, Tensor] = {}
        for _ in range(n_tensors):
            (name_len,) = reader.unpack("<H", "tensor name")
            name = reader.take(name_len, "tensor name").decode("utf-8", errors="replace")
            (rank,) = reader.unpack("<B", "tensor rank")
            dims = reader.unpack(f"<{rank}I", "tensor dims")
            if name not in expected:
                raise ShapeMismatchError(f"unexpected tensor {name!r}")
            if name in params:
                raise ShapeMismatchError(f"duplicate tensor {name!r}")
            if tuple(dims) != expected[name]:
                raise ShapeMismatchError(f"tensor {name!r} has shape {tuple(dims)}, expected {expected[name]}")
            count = int(np.prod(dims)) if dims else 1
            data = np.frombuffer(reader.take(8 * count, f"tensor {name!r}"), dtype="<f8")
            params[name] = Tensor(data.reshape(dims))
        missing = set(expected) - set(params)
        if missing:
            raise ShapeMismatchError(f"missing tensors: {sorted(missing)}")
        if reader.remaining:
            raise CheckpointError(f"{reader.remaining} trailing bytes after last tensor")
        return cls(config, vocab, {k: params[k] for k in expected}, version)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = memoryview(buf)
        self.pos = 0

    @property
    def remaining(self) -> int:
        return len(self.buf) - self.pos

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.buf):
            raise TruncatedCheckpointError(f"truncated checkpoint while reading {what}")
        out = bytes(self.buf[self.pos:self.pos + n])
        self.pos += n
        return out

    def unpack(self, fmt: str, what: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def save_checkpoint(checkpoint: ModelCheckpoint, path) -> None:
    with open(path, "wb") as fh:
        fh.write(checkpoint.to_bytes())


def load_checkpoint(path) -> ModelCheckpoint:
    with open(path, "rb") as fh:
        return ModelCheckpoint.from_bytes(fh.read())


# ----------------------------------------------------------------------------
# training


@dataclass
class TrainResult:
    checkpoint: ModelCheckpoint
    losses: list[float] = field(default_factory=list)
    holdout_losses: list[float] = field(default_factory=list)


def split_holdout(pairs: Sequence[SentencePair], fraction: float, seed: int):
    """Deterministic (train, holdout) split; holdout gets round(fraction * n) pairs."""
    n_hold = int(round(fraction * len(pairs)))
    if n_hold == 0:
        return list(pairs), []
    if n_hold >= len(pairs):
        raise ValueError("holdout fraction leaves no training pairs")
    order = make_rng(seed, _HOLDOUT_STREAM).permutation(len(pairs))
    hold = set(order[:n_hold].tolist())
    return [p for k, p in enumerate(pairs) if k not in hold], [p for k, p in enumerate(pairs) if k in hold]


def batch_loss(params, batch: Batch, config: ModelConfig) -> float:
    loss, _ = seq2seq.forward_teacher_forced(batch.inputs, batch.targets, params, config)
    return loss.item()


def train(
    pairs: Sequence[SentencePair],
    config: TrainConfig,
    model_config: ModelConfig,
    vocab: Vocab | None = None,
    on_epoch: Callable[[int, float, float | None], None] | None = None,
) -> TrainResult:
    """Teacher-forced training with Adam.

    The vocabulary is built from both sides of ``pairs`` unless given, and
    ``model_config.vocab_size`` is overridden to match it. ``on_epoch`` is
    called after every epoch with (epoch, mean train loss, holdout loss or
    None).
    """
    if not pairs:
        raise ValueError("no training pairs")
    train_pairs, hold_pairs = split_holdout(pairs, config.holdout, config.seed)
    if vocab is None:
        vocab = build_vocab([s for p in pairs for s in (p.wrong, p.correct)])
    model_config = replace(model_config, vocab_size=vocab.size)

    x, y = encode_pairs(train_pairs, vocab, model_config.max_len)
    if hold_pairs:
        hx, hy = encode_pairs(hold_pairs, vocab, model_config.max_len)

    params = seq2seq.init_params(model_config, config.seed)
    state = AdamState(learning_rate=config.learning_rate)
    result = TrainResult(ModelCheckpoint(model_config, vocab, params))

    for epoch in range(1, config.epochs + 1):
        total, seen = 0.0, 0
        for b, batch in enumerate(_batches(x, y, config, epoch)):
            with GradTape() as tape:
                loss, _ = seq2seq.forward_teacher_forced(batch.inputs, batch.targets, params, model_config)
            value = loss.item()
            if not math.isfinite(value):
                raise NonFiniteLossError(epoch, b, value)
            grads = nx.backward(tape, loss, params)
            params, state = nx.adam_step(params, grads, state)
            total += value * len(batch)
            seen += len(batch)
        epoch_loss = total / seen
        result.losses.append(epoch_loss)

        hold_loss = None
        if hold_pairs:
            hold_cfg = replace(config, shuffle=False)
            tot = sum(batch_loss(params, hb, model_config) * len(hb) for hb in _batches(hx, hy, hold_cfg, 0))
            hold_loss = tot / len(hold_pairs)
            result.holdout_losses.append(hold_loss)
        log.debug("epoch %d loss %.6f", epoch, epoch_loss)
        if on_epoch is not None:
            on_epoch(epoch, epoch_loss, hold_loss)

    result.checkpoint = ModelCheckpoint(model_config, vocab, params)
    return result


# ----------------------------------------------------------------------------
# inference


def greedy_decode_batch(sentences: Sequence[str], checkpoint: ModelCheckpoint) -> list[str]:
    """Greedy (argmax) correction of several sentences at once."""
    if not sentences:
        return []
    cfg, vocab, params = checkpoint.config, checkpoint.vocab, checkpoint.params
    x = np.array([encode(s, vocab, cfg.max_len).ids for s in sentences], dtype=np.int64)
    enc_out, h, c = seq2seq.encode(x, params, cfg)
    keys = seq2seq.encoder_keys(enc_out, params)
    mask = x != PAD_ID

    n = len(sentences)
    y = np.full(n, vocab.start_id, dtype=np.int64)
    done = np.zeros(n, dtype=bool)
    out = np.zeros((n, cfg.max_len - 1), dtype=np.int64)
    for t in range(cfg.max_len - 1):
        logits, h, c, _ = seq2seq.decoder_step(y, h, c, enc_out, mask, params, keys)
        # argmax picks the lowest id among ties
        y = np.argmax(logits.data, axis=-1)
        out[:, t] = np.where(done, PAD_ID, y)
        done |= y == vocab.end_id
        if done.all():
            break
    return [decode(row, vocab) for row in out]


def greedy_decode(sentence: str, checkpoint: ModelCheckpoint) -> str:
    return greedy_decode_batch([sentence], checkpoint)[0]
