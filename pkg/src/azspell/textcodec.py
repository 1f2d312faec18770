"""Character vocabulary and fixed-length sequence encoding."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

START = "<"
END = ">"
PAD_ID = 0
DEFAULT_MAX_LEN = 20


class VocabError(ValueError):
    """A character or id is not covered by the vocabulary."""


@dataclass(frozen=True)
class Vocab:
    char_to_id: dict[str, int]
    id_to_char: dict[int, str] = field(repr=False)

    pad_id: int = PAD_ID

    @classmethod
    def from_chars(cls, chars: Iterable[str]) -> "Vocab":
        """Assign ids 1, 2, ... to ``chars`` in order, markers first."""
        char_to_id: dict[str, int] = {}
        for ch in (START, END, *chars):
            if len(ch) != 1:
                raise ValueError(f"vocab entries must be single characters, got {ch!r}")
            if ch not in char_to_id:
                char_to_id[ch] = len(char_to_id) + 1
        return cls(char_to_id, {i: c for c, i in char_to_id.items()})

    @classmethod
    def from_items(cls, items: Iterable[tuple[int, str]]) -> "Vocab":
        """Rebuild a vocab from explicit (id, char) pairs, e.g. from a checkpoint."""
        id_to_char = dict(items)
        char_to_id = {c: i for i, c in id_to_char.items()}
        if len(char_to_id) != len(id_to_char):
            raise ValueError("duplicate characters in vocab items")
        if PAD_ID in id_to_char:
            raise ValueError("id 0 is reserved for padding")
        if char_to_id.get(START) != 1 or char_to_id.get(END) != 2:
            raise ValueError("markers must hold ids 1 and 2")
        if any(i < 0 for i in id_to_char) or max(id_to_char) != len(id_to_char):
            raise ValueError("vocab ids must be exactly 1..N")
        return cls(char_to_id, id_to_char)

    @property
    def start_id(self) -> int:
        return self.char_to_id[START]

    @property
    def end_id(self) -> int:
        return self.char_to_id[END]

    @property
    def size(self) -> int:
        return len(self.char_to_id) + 1

    def __len__(self) -> int:
        return self.size

    def __contains__(self, ch: str) -> bool:
        return ch in self.char_to_id

    def items(self) -> list[tuple[int, str]]:
        return sorted(self.id_to_char.items())


@dataclass(frozen=True)
class EncodedSentence:
    ids: tuple[int, ...]
    source_len: int


def build_vocab(corpus: Sequence[str]) -> Vocab:
    """Vocabulary over every character of ``corpus``.

    The markers take ids 1 and 2; the remaining characters follow in order of
    first appearance. Id 0 is padding.
    """
    if not corpus:
        raise ValueError("empty corpus")
    seen: dict[str, None] = {}
    for sentence in corpus:
        for ch in sentence:
            seen.setdefault(ch, None)
    return Vocab.from_chars(seen)


def build_vocabs(wrong: Sequence[str], correct: Sequence[str], shared: bool = True) -> tuple[Vocab, Vocab]:
    """Input and output vocabularies.

    With ``shared`` (the default) both sides use one vocab over the union of
    the two corpora. ``shared=False`` gives each side its own tokenizer.
    """
    if shared:
        v = build_vocab([*wrong, *correct])
        return v, v
    return build_vocab(wrong), build_vocab(correct)


def encode(sentence: str, vocab: Vocab, max_len: int = DEFAULT_MAX_LEN) -> EncodedSentence:
    """Marker-wrapped ids, truncated from the front and zero-padded at the end."""
    if max_len < 2:
        raise ValueError("max_len must be at least 2")
    ids = [vocab.start_id]
    for pos, ch in enumerate(sentence):
        try:
            ids.append(vocab.char_to_id[ch])
        except KeyError:
            raise VocabError(f"unknown character {ch!r} at position {pos}") from None
    ids.append(vocab.end_id)
    if len(ids) > max_len:
        ids = ids[len(ids) - max_len:]
    n = len(ids)
    ids.extend([PAD_ID] * (max_len - n))
    return EncodedSentence(tuple(ids), n)


def decode(ids: Iterable[int], vocab: Vocab) -> str:
    """Inverse of :func:`encode`: drop padding, a leading start marker and
    everything from the first end marker on."""
    out = []
    first = True
    for i in ids:
        i = int(i)
        if i == PAD_ID:
            continue
        try:
            ch = vocab.id_to_char[i]
        except KeyError:
            raise VocabError(f"unknown id {i}") from None
        if i == vocab.end_id:
            break
        if first and i == vocab.start_id:
            first = False
            continue
        first = False
        out.append(ch)
    return "".join(out)


def read_lines(path) -> list[str]:
    """Read a UTF-8 corpus file, one sentence per line; blank lines dropped."""
    with open(path, encoding="utf-8", errors="strict", newline="") as fh:
        text = fh.read()
    return [line for line in text.split("\n") if line.strip()]
