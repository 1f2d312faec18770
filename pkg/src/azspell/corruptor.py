"""Synthetic misspellings: insertion, deletion, transposition and
confusion-table substitution applied word by word."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from typing import Sequence

import numpy as np

RNG_ALGORITHM = "numpy.random.PCG64"

OPERATIONS = ("substitution", "insertion", "deletion", "transposition")


class ConfusionTableError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True)
class ConfusionTable:
    entries: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def get(self, letter: str) -> tuple[str, ...] | None:
        return self.entries.get(letter)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class NoiseConfig:
    p_word: float = 0.5
    p_substitution: float = 0.6
    p_insert: float = 0.4 / 3
    p_delete: float = 0.4 / 3
    p_transpose: float = 0.4 / 3
    seed: int = 0
    max_edits: int = 1

    def __post_init__(self):
        probs = self.operation_probs()
        if not all(0.0 <= p <= 1.0 for p in (self.p_word, *probs)):
            raise ValueError("noise probabilities must lie in [0, 1]")
        if abs(math.fsum(probs) - 1.0) > 1e-12:
            raise ValueError(f"operation probabilities sum to {math.fsum(probs)}, expected 1")
        if self.max_edits < 1:
            raise ValueError("max_edits must be >= 1")

    def operation_probs(self) -> tuple[float, float, float, float]:
        return (self.p_substitution, self.p_insert, self.p_delete, self.p_transpose)


@dataclass(frozen=True)
class SentencePair:
    wrong: str
    correct: str


def parse_confusion_table(text: str) -> ConfusionTable:
    entries: dict[str, list[str]] = {}
    for lineno, raw in enumerate(text.split("\n"), 1):
        line = raw.rstrip("\r")
        if not line.strip() or line.startswith("#"):
            continue
        key, sep, rest = line.partition("\t")
        if not sep:
            raise ConfusionTableError(lineno, "expected <letter>TAB<misspellings>")
        if len(key) != 1:
            raise ConfusionTableError(lineno, f"key must be a single character, got {key!r}")
        values = [v.strip() for v in rest.split(",")]
        if not values or any(not v for v in values):
            raise ConfusionTableError(lineno, "empty misspelling")
        entries.setdefault(key, []).extend(values)
    return ConfusionTable({k: tuple(v) for k, v in entries.items()})


def load_confusion_table(path=None) -> ConfusionTable:
    """Load a confusion table file; ``None`` loads the bundled Azerbaijani table."""
    if path is None:
        text = resources.files("azspell.data").joinpath("confusion_az.tsv").read_text("utf-8")
    else:
        with open(path, encoding="utf-8", errors="strict") as fh:
            text = fh.read()
    return parse_confusion_table(text)


def make_rng(seed: int, shard: int = 0) -> np.random.Generator:
    """Seeded generator; distinct shards give independent streams."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, shard])))


def alphabet_of(corpus: Sequence[str]) -> tuple[str, ...]:
    letters = {ch for s in corpus for ch in s if ch.isalpha()}
    if not letters:
        letters = {ch for s in corpus for ch in s if not ch.isspace()}
    return tuple(sorted(letters))


def _edit(word: str, table: ConfusionTable, config: NoiseConfig, rng, alphabet) -> tuple[str, str]:
    u = rng.random()
    acc = 0.0
    op = OPERATIONS[-1]
    for name, p in zip(OPERATIONS, config.operation_probs()):
        acc += p
        if u < acc:
            op = name
            break

    n = len(word)
    if op == "substitution":
        pos = int(rng.integers(n))
        choices = table.get(word[pos]) or alphabet
        repl = choices[int(rng.integers(len(choices)))]
        return word[:pos] + repl + word[pos + 1:], op
    if op == "insertion":
        pos = int(rng.integers(n + 1))
        return word[:pos] + alphabet[int(rng.integers(len(alphabet)))] + word[pos:], op
    if op == "deletion":
        # a one-letter word is kept so sentences never lose a word outright
        if n == 1:
            return word, op
        pos = int(rng.integers(n))
        return word[:pos] + word[pos + 1:], op
    if n == 1:
        return word, op
    pos = int(rng.integers(n - 1))
    return word[:pos] + word[pos + 1] + word[pos] + word[pos + 2:], op


def corrupt_word(
    word: str,
    table: ConfusionTable,
    config: NoiseConfig,
    rng: np.random.Generator,
    alphabet: Sequence[str] | None = None,
    stats: Counter | None = None,
) -> str:
    """Randomly misspell ``word``.

    With probability ``config.p_word`` the word is corrupted: it receives one
    edit, or between 1 and ``config.max_edits`` edits chosen uniformly when
    that is above 1. Otherwise it is returned unchanged.

    Args:
        word: non-empty input word.
        table: confusion table driving substitutions.
        config: operation probabilities.
        rng: random stream, advanced in place.
        alphabet: letters for random insertion and for substituting letters
            absent from ``table``. Defaults to the letters of ``word``.
        stats: optional counter; receives ``"words"``, ``"corrupted"`` and
            one count per applied operation name.
    """
    if not word:
        raise ValueError("word must be non-empty")
    if not alphabet:
        alphabet = tuple(sorted(set(word)))
    if stats is not None:
        stats["words"] += 1
    if rng.random() >= config.p_word:
        return word
    n_edits = 1 if config.max_edits == 1 else 1 + int(rng.integers(config.max_edits))
    for _ in range(n_edits):
        word, op = _edit(word, table, config, rng, alphabet)
        if stats is not None:
            stats[op] += 1
    if stats is not None:
        stats["corrupted"] += 1
    return word


def corrupt_sentence(sentence, table, config, rng, alphabet=None, stats=None) -> str:
    return " ".join(
        corrupt_word(w, table, config, rng, alphabet, stats) for w in sentence.split()
    )


def generate_pairs(
    corpus: Sequence[str],
    count: int,
    table: ConfusionTable,
    config: NoiseConfig,
    stats: Counter | None = None,
) -> list[SentencePair]:
    """Cycle through ``corpus`` producing ``count`` (wrong, correct) pairs.

    The output is a pure function of the arguments: the random stream is
    seeded from ``config.seed``.
    """
    corpus = [s for s in corpus if s.strip()]
    if not corpus:
        raise ValueError("empty corpus")
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = make_rng(config.seed)
    alphabet = alphabet_of(corpus)
    pairs = []
    for k in range(count):
        correct = corpus[k % len(corpus)]
        pairs.append(SentencePair(corrupt_sentence(correct, table, config, rng, alphabet, stats), correct))
    return pairs


def write_pairs(pairs: Sequence[SentencePair], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for p in pairs:
            fh.write(f"{p.wrong}\t{p.correct}\n")


def read_pairs(path) -> list[SentencePair]:
    """Read a ``wrong<TAB>correct`` file. Raises ValueError naming the bad line."""
    with open(path, encoding="utf-8", errors="strict", newline="") as fh:
        text = fh.read()
    pairs = []
    for lineno, line in enumerate(text.split("\n"), 1):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'wrong<TAB>correct'")
        pairs.append(SentencePair(parts[0], parts[1]))
    return pairs
